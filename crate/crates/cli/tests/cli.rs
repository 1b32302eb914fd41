//! End-to-end command tests driving the compiled binary.

use std::path::Path;
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_anchorseg"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("spawn anchorseg")
}

fn dir_bytes(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut entries: Vec<(String, Vec<u8>)> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (
                e.file_name().to_string_lossy().into_owned(),
                std::fs::read(e.path()).unwrap(),
            )
        })
        .collect();
    entries.sort();
    entries
}

/// Fast config for tests: small feature stack, identical topology.
const FAST: &[&str] = &[
    "--set",
    "encoder.channels=16",
    "--set",
    "tokenizer.D=16",
];

#[test]
fn gen_is_byte_deterministic() {
    let tmp = tempfile::tempdir().unwrap();
    let a = tmp.path().join("a");
    let b = tmp.path().join("b");
    for out in [&a, &b] {
        let o = run(&[
            "gen",
            "--preset",
            "easy",
            "--seed",
            "7",
            "--t-seg",
            "6",
            "--out",
            out.to_str().unwrap(),
        ]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    }
    assert_eq!(dir_bytes(&a), dir_bytes(&b));
    // 6 frames on disk.
    let frames = std::fs::read_dir(&a)
        .unwrap()
        .filter(|e| {
            e.as_ref()
                .unwrap()
                .file_name()
                .to_string_lossy()
                .starts_with("frame_")
        })
        .count();
    assert_eq!(frames, 6);
}

#[test]
fn gen_invalid_preset_exits_2() {
    let tmp = tempfile::tempdir().unwrap();
    let o = run(&[
        "gen",
        "--preset",
        "bogus",
        "--out",
        tmp.path().join("x").to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(2));
    assert!(!String::from_utf8_lossy(&o.stderr).is_empty());
}

#[test]
fn gen_full_length_preset() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("clip32");
    let o = run(&[
        "gen",
        "--preset",
        "occlusion",
        "--seed",
        "3",
        "--t-seg",
        "32",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success());
    for t in 0..32 {
        assert!(out.join(format!("frame_{t:04}.ppm")).exists());
    }
}

fn gen_and_query(tmp: &Path, preset: &str, seed: u64, t_seg: usize) -> (std::path::PathBuf, String) {
    let clip = tmp.join(format!("{preset}_{seed}"));
    let o = run(&[
        "gen",
        "--preset",
        preset,
        "--seed",
        &seed.to_string(),
        "--t-seg",
        &t_seg.to_string(),
        "--out",
        clip.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let manifest: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(clip.join("manifest.json")).unwrap())
            .unwrap();
    let query = manifest["queries"][0]["text"].as_str().unwrap().to_string();
    (clip, query)
}

#[test]
fn infer_walkthrough_trace_and_determinism() {
    let tmp = tempfile::tempdir().unwrap();
    let (clip, query) = gen_and_query(tmp.path(), "easy", 11, 8);
    let pred_a = tmp.path().join("pred_a");
    let pred_b = tmp.path().join("pred_b");
    for pred in [&pred_a, &pred_b] {
        let mut args = vec![
            "infer",
            "--clip",
            clip.to_str().unwrap(),
            "--query",
            &query,
            "--out",
            pred.to_str().unwrap(),
        ];
        args.extend_from_slice(FAST);
        let o = run(&args);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    }
    // Byte-identical masks and traces across reruns.
    assert_eq!(dir_bytes(&pred_a), dir_bytes(&pred_b));

    // T=8 under defaults: anchors {0, 4} from prompts, others propagated.
    let trace: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(pred_a.join("trace.json")).unwrap())
            .unwrap();
    assert_eq!(trace["anchor_candidates"], serde_json::json!([0, 4]));
    assert_eq!(trace["frames"][0]["branch"], "anchor");
    assert_eq!(trace["frames"][4]["branch"], "anchor");
    assert_eq!(trace["frames"][1]["branch"], "propagated");
    assert_eq!(trace["frames"][1]["anchors"], serde_json::json!([0, 4]));
    assert_eq!(trace["frames"][1]["fifo"], serde_json::json!([0]));
}

#[test]
fn infer_first_strategy_trace() {
    let tmp = tempfile::tempdir().unwrap();
    let (clip, query) = gen_and_query(tmp.path(), "easy", 13, 6);
    let pred = tmp.path().join("pred");
    let mut args = vec![
        "infer",
        "--clip",
        clip.to_str().unwrap(),
        "--query",
        &query,
        "--out",
        pred.to_str().unwrap(),
        "--set",
        "tdau.strategy=first",
    ];
    args.extend_from_slice(FAST);
    let o = run(&args);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let trace: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(pred.join("trace.json")).unwrap()).unwrap();
    assert_eq!(trace["anchor_candidates"], serde_json::json!([0]));
    for t in 1..6 {
        assert_eq!(trace["frames"][t]["branch"], "propagated");
    }
}

#[test]
fn infer_ambiguous_query_exits_3() {
    let tmp = tempfile::tempdir().unwrap();
    let (clip, _) = gen_and_query(tmp.path(), "easy", 11, 4);
    let pred = tmp.path().join("pred");
    let mut args = vec![
        "infer",
        "--clip",
        clip.to_str().unwrap(),
        "--query",
        "the red pentagon",
        "--out",
        pred.to_str().unwrap(),
    ];
    args.extend_from_slice(FAST);
    let o = run(&args);
    assert_eq!(o.status.code(), Some(3));
}

#[test]
fn eval_perfect_and_empty_predictions() {
    let tmp = tempfile::tempdir().unwrap();
    let (clip, query) = gen_and_query(tmp.path(), "easy", 17, 4);
    // Perfect predictions: copy the gt masks for object 0.
    let pred = tmp.path().join("pred");
    std::fs::create_dir_all(&pred).unwrap();
    for t in 0..4 {
        std::fs::copy(
            clip.join(format!("gt_0_{t:04}.pgm")),
            pred.join(format!("pred_{t:04}.pgm")),
        )
        .unwrap();
    }
    // Minimal trace naming the resolved object.
    let trace = serde_json::json!({
        "config": "", "seed": 0, "query": query, "resolved_ids": [0],
        "strategy": "dynamic", "alpha": 3, "fifo_capacity": 6, "causal": false,
        "t_seg": 4, "anchor_candidates": [0], "frames": []
    });
    std::fs::write(pred.join("trace.json"), trace.to_string()).unwrap();
    let report = tmp.path().join("report.json");
    let o = run(&[
        "eval",
        "--pred",
        pred.to_str().unwrap(),
        "--clip",
        clip.to_str().unwrap(),
        "--out",
        report.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let rep: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&report).unwrap()).unwrap();
    assert_eq!(rep["mean_jf"], 100.0);

    // Empty predictions against nonempty gt score zero.
    for t in 0..4 {
        let empty = anchorseg_core::mask::Mask::empty(128, 128);
        anchorseg_core::mask::write_pgm(&pred.join(format!("pred_{t:04}.pgm")), &empty).unwrap();
    }
    let o = run(&[
        "eval",
        "--pred",
        pred.to_str().unwrap(),
        "--clip",
        clip.to_str().unwrap(),
        "--out",
        report.to_str().unwrap(),
    ]);
    assert!(o.status.success());
    let rep: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&report).unwrap()).unwrap();
    assert_eq!(rep["mean_jf"], 0.0);
}

#[test]
fn eval_hand_computed_fixture() {
    // Two-frame fixture with hand-computed J and F.
    let tmp = tempfile::tempdir().unwrap();
    let clip = tmp.path().join("clip");
    // Build a tiny clip on disk via the spec path: one static 16px square
    // at the center of a 64x64 frame.
    let scene = serde_json::json!({
        "width": 64, "height": 64, "t_seg": 2, "seed": 0,
        "objects": [{
            "shape": "square", "color": 0, "size": 16,
            "motion": {"kind": "linear", "vx": 0.0, "vy": 0.0},
            "spawn": 0, "despawn": 2, "start": [32.0, 32.0]
        }],
        "occluders": []
    });
    let scene_path = tmp.path().join("scene.json");
    std::fs::write(&scene_path, scene.to_string()).unwrap();
    let o = run(&[
        "gen",
        "--spec",
        scene_path.to_str().unwrap(),
        "--out",
        clip.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));

    // The 16 px square centered at 32 rasterizes to pixels 24..=39 on both
    // axes. Prediction: the same square shifted right by 4 px, so the
    // intersection is 12x16 and the union 20x16: J = 12/20 = 0.6 per frame.
    let pred = tmp.path().join("pred");
    std::fs::create_dir_all(&pred).unwrap();
    let shifted = anchorseg_core::mask::Mask::from_fn(64, 64, |x, y| {
        (24..40).contains(&(x as i64 - 4)) && (24..40).contains(&(y as i64))
    });
    for t in 0..2 {
        anchorseg_core::mask::write_pgm(&pred.join(format!("pred_{t:04}.pgm")), &shifted).unwrap();
    }
    let trace = serde_json::json!({
        "config": "", "seed": 0, "query": "the square", "resolved_ids": [0],
        "strategy": "dynamic", "alpha": 3, "fifo_capacity": 6, "causal": false,
        "t_seg": 2, "anchor_candidates": [0], "frames": []
    });
    std::fs::write(pred.join("trace.json"), trace.to_string()).unwrap();
    let report = tmp.path().join("report.json");
    let csv = tmp.path().join("report.csv");
    let o = run(&[
        "eval",
        "--pred",
        pred.to_str().unwrap(),
        "--clip",
        clip.to_str().unwrap(),
        "--out",
        report.to_str().unwrap(),
        "--csv",
        csv.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let rep: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&report).unwrap()).unwrap();
    // J = 0.6 exactly. F by hand: tolerance radius ceil(0.008*sqrt(2)*64)=1.
    // Pred/gt boundaries are 16x16 square outlines offset by 4 in x: the
    // left and right vertical edges (16 px each) are 4 px away (unmatched),
    // the top and bottom horizontal runs match within 1 px over 12 of 16
    // px... precision = recall = (2*12 + 2*1)/60 = 26/60, F = 26/60.
    assert_eq!(rep["sequences"][0]["j"], 60.0);
    // F by hand at tolerance radius ceil(0.008 * sqrt(2) * 64) = 1. Each
    // boundary is a 60 px outline. Matched prediction pixels: top and bottom
    // rows contribute 12 overlap pixels plus one at distance 1 (13 each);
    // the left column touches the gt rows at its two corners-adjacent
    // pixels (2); the right column matches nothing: 13+13+2 = 28. The count
    // is symmetric, so precision = recall = 28/60 and F = 28/60.
    let f_expect: f64 = 28.0 / 60.0 * 100.0;
    let f_got = rep["sequences"][0]["f"].as_f64().unwrap();
    assert!(
        (f_got - (f_expect * 10.0).round() / 10.0).abs() < 1e-9,
        "F {f_got} vs {f_expect}"
    );
    let csv_text = std::fs::read_to_string(&csv).unwrap();
    assert!(csv_text.starts_with("sequence,J,F,JF\n"));
    assert!(csv_text.contains(",60.0,"));
}

#[test]
fn ablate_tiny_suite_produces_grid() {
    let tmp = tempfile::tempdir().unwrap();
    let suite = serde_json::json!({
        "seed": 5, "clips": 2, "t_seg": 6,
        "strategies": ["dynamic", "first"],
        "alphas": [2, 3],
        "set": {"encoder.channels": "16", "tokenizer.D": "16"}
    });
    let suite_path = tmp.path().join("suite.json");
    std::fs::write(&suite_path, suite.to_string()).unwrap();
    let out = tmp.path().join("ablation");
    let o = run(&[
        "ablate",
        "--suite",
        suite_path.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = std::fs::read_to_string(out.join("ablate.csv")).unwrap();
    let lines: Vec<&str> = csv.trim().lines().collect();
    assert_eq!(lines[0], "strategy,alpha,mean_j,mean_f,mean_jf");
    assert_eq!(lines.len(), 1 + 4); // header + 2 strategies x 2 alphas
    let json: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("ablate.json")).unwrap()).unwrap();
    assert!(json["results"]["dynamic"]["2"]["mean_jf"].is_number());
    assert!(json["results"]["first"]["3"]["mean_jf"].is_number());
}

#[test]
fn render_blends_overlays() {
    let tmp = tempfile::tempdir().unwrap();
    let (clip, query) = gen_and_query(tmp.path(), "easy", 19, 3);
    let pred = tmp.path().join("pred");
    let mut args = vec![
        "infer",
        "--clip",
        clip.to_str().unwrap(),
        "--query",
        &query,
        "--out",
        pred.to_str().unwrap(),
    ];
    args.extend_from_slice(FAST);
    let o = run(&args);
    assert!(o.status.success());
    let out = tmp.path().join("overlays");
    let o = run(&[
        "render",
        "--clip",
        clip.to_str().unwrap(),
        "--pred",
        pred.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    for t in 0..3 {
        assert!(out.join(format!("overlay_{t:04}.ppm")).exists());
    }
    // Pixels outside the mask equal the original frame bytes.
    let frame = anchorseg_core::mask::read_ppm(&clip.join("frame_0000.ppm")).unwrap();
    let overlay = anchorseg_core::mask::read_ppm(&out.join("overlay_0000.ppm")).unwrap();
    let mask = anchorseg_core::mask::read_pgm(&pred.join("pred_0000.pgm")).unwrap();
    let mut checked = 0;
    for y in 0..128 {
        for x in 0..128 {
            if !mask.get(x, y) {
                for c in 0..3 {
                    assert_eq!(frame.at(&[y, x, c]), overlay.at(&[y, x, c]));
                }
                checked += 1;
            }
        }
    }
    assert!(checked > 0);
}

#[test]
fn infer_accepts_precomputed_features() {
    let tmp = tempfile::tempdir().unwrap();
    let (clip_dir, query) = gen_and_query(tmp.path(), "easy", 23, 3);
    // Export the stub encoder's features for this clip, then infer with and
    // without the feature file; outputs must be byte-identical.
    let clip = anchorseg_core::synthvid::read_clip(&clip_dir).unwrap();
    let mut cfg = anchorseg_core::config::RunConfig::default();
    cfg.set("encoder.channels", "16").unwrap();
    cfg.set("tokenizer.D", "16").unwrap();
    let model = anchorseg_core::pipeline::Model::new(&cfg).unwrap();
    let grids: Vec<anchorseg_core::Tensor> = clip
        .frames
        .iter()
        .map(|f| model.encoder.encode(f).unwrap())
        .collect();
    let volume = anchorseg_core::tokenizer::FeatureVolume::new(grids).unwrap();
    let feat_path = tmp.path().join("features.tensor");
    volume.to_file(&feat_path).unwrap();

    let pred_stub = tmp.path().join("pred_stub");
    let pred_file = tmp.path().join("pred_file");
    let mut args = vec![
        "infer",
        "--clip",
        clip_dir.to_str().unwrap(),
        "--query",
        &query,
        "--out",
        pred_stub.to_str().unwrap(),
    ];
    args.extend_from_slice(FAST);
    assert!(run(&args).status.success());
    let mut args = vec![
        "infer",
        "--clip",
        clip_dir.to_str().unwrap(),
        "--query",
        &query,
        "--out",
        pred_file.to_str().unwrap(),
        "--features",
        feat_path.to_str().unwrap(),
    ];
    args.extend_from_slice(FAST);
    let o = run(&args);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(dir_bytes(&pred_stub), dir_bytes(&pred_file));
}
