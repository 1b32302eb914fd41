//! Command-line harness: generate synthetic clips, run anchored inference,
//! evaluate J&F, run strategy/alpha ablations, render overlays.
//!
//! Exit codes: 0 success, 2 input or spec error, 3 query ambiguity,
//! 4 internal invariant violation.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use anchorseg_core::config::RunConfig;
use anchorseg_core::error::CoreError;
use anchorseg_core::mask::{read_pgm, write_pgm, write_ppm};
use anchorseg_core::metrics::{sequence_jf, MaskSequence, DEFAULT_BOUNDARY_TOL};
use anchorseg_core::pipeline::Model;
use anchorseg_core::study::{prepare_trend_suite, run_study, study_csv, SuiteSpec};
use anchorseg_core::synthvid::{self, attach_query, generate, read_clip, write_clip};
use anchorseg_core::tokenizer::FeatureVolume;
use anchorseg_core::trace::{validate_trace, TraceLog};
use anchorseg_core::{anchor::Strategy, render::blend_overlay};

#[derive(Parser)]
#[command(name = "anchorseg", version, about = "Anchored referring video segmentation on synthetic clips")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic clip directory from a preset or a scene spec.
    Gen {
        /// Preset name: easy | occlusion | reappear | distractor.
        #[arg(long, conflicts_with = "spec")]
        preset: Option<String>,
        /// Scene spec JSON file (alternative to --preset).
        #[arg(long)]
        spec: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Clip length for presets.
        #[arg(long, default_value_t = 16)]
        t_seg: usize,
    },
    /// Run inference over a clip for a referring query.
    Infer {
        #[arg(long)]
        clip: PathBuf,
        #[arg(long)]
        query: String,
        #[arg(long)]
        out: PathBuf,
        /// Config file (key = value lines).
        #[arg(long)]
        config: Option<PathBuf>,
        /// Inline overrides, repeatable: --set key=value.
        #[arg(long = "set")]
        set: Vec<String>,
        #[arg(long)]
        seed: Option<u64>,
        /// Precomputed feature volume (tensor file, HxWxTxC) replacing the
        /// stub vision encoder.
        #[arg(long)]
        features: Option<PathBuf>,
    },
    /// Evaluate predicted masks against a clip's ground truth.
    Eval {
        #[arg(long)]
        pred: PathBuf,
        #[arg(long)]
        clip: PathBuf,
        /// Report JSON path.
        #[arg(long)]
        out: PathBuf,
        /// Optional CSV path (sequence,J,F,JF).
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Run the strategy/alpha ablation grid described by a suite file.
    Ablate {
        #[arg(long)]
        suite: PathBuf,
        /// Output directory for ablate.csv and ablate.json.
        #[arg(long)]
        out: PathBuf,
    },
    /// Render mask overlays (50% alpha blend) for a prediction directory.
    Render {
        #[arg(long)]
        clip: PathBuf,
        #[arg(long)]
        pred: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

fn exit_code_for(err: &anyhow::Error) -> u8 {
    if let Some(core) = err.downcast_ref::<CoreError>() {
        match core {
            CoreError::AmbiguousQuery(_) => 3,
            CoreError::NonFinite { .. }
            | CoreError::EmptyMemory { .. }
            | CoreError::BankMissingEntry { .. } => 4,
            _ => 2,
        }
    } else {
        2
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(exit_code_for(&err))
        }
    }
}

fn load_config(
    config: Option<&PathBuf>,
    set: &[String],
    seed: Option<u64>,
) -> anyhow::Result<RunConfig> {
    let mut cfg = RunConfig::default();
    if let Some(path) = config {
        let text = std::fs::read_to_string(path)?;
        cfg.apply_text(&text)?;
    }
    for pair in set {
        cfg.apply_override(pair)?;
    }
    if let Some(seed) = seed {
        cfg.seed = seed;
    }
    Ok(cfg)
}

fn run(cli: Cli) -> anyhow::Result<()> {
    match cli.command {
        Command::Gen {
            preset,
            spec,
            out,
            seed,
            t_seg,
        } => cmd_gen(preset.as_deref(), spec.as_deref(), &out, seed, t_seg),
        Command::Infer {
            clip,
            query,
            out,
            config,
            set,
            seed,
            features,
        } => cmd_infer(
            &clip,
            &query,
            &out,
            load_config(config.as_ref(), &set, seed)?,
            features.as_deref(),
        ),
        Command::Eval {
            pred,
            clip,
            out,
            csv,
        } => cmd_eval(&pred, &clip, &out, csv.as_deref()),
        Command::Ablate { suite, out } => cmd_ablate(&suite, &out),
        Command::Render { clip, pred, out } => cmd_render(&clip, &pred, &out),
    }
}

fn cmd_gen(
    preset: Option<&str>,
    spec_path: Option<&Path>,
    out: &Path,
    seed: u64,
    t_seg: usize,
) -> anyhow::Result<()> {
    let (scene, query, preset_name) = match (preset, spec_path) {
        (Some(name), None) => {
            let (scene, query) = synthvid::preset(name, seed, t_seg)?;
            (scene, Some(query), Some(name.to_string()))
        }
        (None, Some(path)) => {
            let text = std::fs::read_to_string(path)?;
            let scene: synthvid::SceneSpec = serde_json::from_str(&text)
                .map_err(|e| CoreError::SceneSpec(format!("{}: {e}", path.display())))?;
            (scene, None, None)
        }
        _ => {
            anyhow::bail!(CoreError::SceneSpec(
                "exactly one of --preset or --spec is required".into()
            ))
        }
    };
    let mut clip = generate(&scene)?;
    clip.preset = preset_name;
    if let Some(q) = query {
        attach_query(&mut clip, &q)?;
    }
    write_clip(out, &clip)?;
    println!(
        "wrote {} frames and {} object tracks to {}",
        clip.t_seg(),
        clip.gt.len(),
        out.display()
    );
    Ok(())
}

fn cmd_infer(
    clip_dir: &Path,
    query: &str,
    out: &Path,
    cfg: RunConfig,
    features: Option<&Path>,
) -> anyhow::Result<()> {
    let clip = read_clip(clip_dir)?;
    let model = Model::with_frame_size(&cfg, clip.spec.height)?;
    let result = match features {
        Some(path) => {
            let volume = FeatureVolume::from_file(path)?;
            model.infer_clip_with_volume(&clip, query, &volume)?
        }
        None => model.infer_clip(&clip, query)?,
    };
    // Self-check: the trace must validate against the documented rules.
    validate_trace(&result.trace)?;
    std::fs::create_dir_all(out)?;
    for (t, mask) in result.masks.masks.iter().enumerate() {
        write_pgm(&out.join(format!("pred_{t:04}.pgm")), mask)?;
    }
    std::fs::write(out.join("trace.json"), result.trace.to_json())?;
    println!(
        "predicted {} frames ({} anchor candidates) into {}",
        clip.t_seg(),
        result.plan.candidates.len(),
        out.display()
    );
    Ok(())
}

fn read_pred_sequence(pred: &Path, t_seg: usize) -> anyhow::Result<MaskSequence> {
    let mut masks = Vec::with_capacity(t_seg);
    for t in 0..t_seg {
        masks.push(read_pgm(&pred.join(format!("pred_{t:04}.pgm")))?);
    }
    Ok(MaskSequence::new(masks, None))
}

fn cmd_eval(pred: &Path, clip_dir: &Path, out: &Path, csv: Option<&Path>) -> anyhow::Result<()> {
    let clip = read_clip(clip_dir)?;
    let trace_text = std::fs::read_to_string(pred.join("trace.json"))?;
    let trace = TraceLog::from_json(&trace_text)?;
    let pred_seq = read_pred_sequence(pred, clip.t_seg())?;
    let gt = clip.aggregated_gt(&trace.resolved_ids)?;
    let (j, f) = sequence_jf(&pred_seq, &gt, DEFAULT_BOUNDARY_TOL)?;
    let (mean_j, mean_f, mean_jf) = anchorseg_core::metrics::jf_mean(&[j], &[f])?;
    let name = clip_dir
        .file_name()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "clip".to_string());

    let report = serde_json::json!({
        "config": trace.config,
        "seed": trace.seed,
        "query": trace.query,
        "sequences": [{
            "name": name,
            "j": round1(j * 100.0),
            "f": round1(f * 100.0),
            "jf": round1((j + f) / 2.0 * 100.0),
        }],
        "mean_j": round1(mean_j),
        "mean_f": round1(mean_f),
        "mean_jf": round1(mean_jf),
    });
    std::fs::write(out, serde_json::to_string_pretty(&report)?)?;
    if let Some(csv_path) = csv {
        let mut text = String::from("sequence,J,F,JF\n");
        text.push_str(&format!(
            "{name},{:.1},{:.1},{:.1}\n",
            j * 100.0,
            f * 100.0,
            (j + f) / 2.0 * 100.0
        ));
        std::fs::write(csv_path, text)?;
    }
    println!("J&F {:.1} (J {:.1}, F {:.1})", mean_jf, mean_j, mean_f);
    Ok(())
}

fn round1(v: f64) -> f64 {
    (v * 10.0).round() / 10.0
}

fn cmd_ablate(suite_path: &Path, out: &Path) -> anyhow::Result<()> {
    let text = std::fs::read_to_string(suite_path)?;
    let spec = SuiteSpec::from_json(&text)?;
    let cfg = spec.config()?;
    let strategies = spec
        .strategies
        .iter()
        .map(|s| Strategy::parse(s))
        .collect::<Result<Vec<_>, _>>()?;
    let suite = prepare_trend_suite(&cfg, spec.seed, spec.clips, spec.t_seg)?;
    let rows = run_study(&suite, &strategies, &spec.alphas)?;
    std::fs::create_dir_all(out)?;
    std::fs::write(out.join("ablate.csv"), study_csv(&rows))?;

    let mut nested: BTreeMap<String, BTreeMap<String, serde_json::Value>> = BTreeMap::new();
    for row in &rows {
        nested.entry(row.strategy.clone()).or_default().insert(
            row.alpha.to_string(),
            serde_json::json!({
                "mean_j": round1(row.mean_j),
                "mean_f": round1(row.mean_f),
                "mean_jf": round1(row.mean_jf),
            }),
        );
    }
    let report = serde_json::json!({
        "config": cfg.echo(),
        "suite_seed": spec.seed,
        "clips": spec.clips,
        "t_seg": spec.t_seg,
        "absent_at_start_fraction": suite.absent_at_start_fraction,
        "results": nested,
    });
    std::fs::write(out.join("ablate.json"), serde_json::to_string_pretty(&report)?)?;
    println!("{}", study_csv(&rows).trim_end());
    Ok(())
}

fn cmd_render(clip_dir: &Path, pred: &Path, out: &Path) -> anyhow::Result<()> {
    let clip = read_clip(clip_dir)?;
    let pred_seq = read_pred_sequence(pred, clip.t_seg())?;
    std::fs::create_dir_all(out)?;
    for t in 0..clip.t_seg() {
        let overlay = blend_overlay(
            &clip.frames[t],
            &pred_seq.masks[t],
            [1.0, 0.15, 0.15],
            0.5,
        )?;
        write_ppm(&out.join(format!("overlay_{t:04}.ppm")), &overlay)?;
    }
    println!("rendered {} overlays into {}", clip.t_seg(), out.display());
    Ok(())
}
