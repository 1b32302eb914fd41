//! Seeded synthetic clips: moving shapes, static bar occluders, spawn and
//! despawn windows, exact per-object ground-truth masks, and a rule-based
//! query resolver that maps templated referring expressions to object ids.
//!
//! Generation is a pure function of the scene spec; presets derive their
//! scene parameters from a named seeded stream, so the same (preset, seed,
//! length) always yields byte-identical clips.

use std::collections::BTreeSet;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{CoreError, Result};
use crate::mask::{self, Mask};
use crate::metrics::MaskSequence;
use crate::numerics::{SeededRng, Tensor};

// ---------------------------------------------------------------------------
// Palette and vocabulary
// ---------------------------------------------------------------------------

pub const BACKGROUND_RGB: [f64; 3] = [28.0 / 255.0, 28.0 / 255.0, 32.0 / 255.0];
pub const OCCLUDER_RGB: [f64; 3] = [90.0 / 255.0, 90.0 / 255.0, 95.0 / 255.0];

pub const PALETTE: [(&str, [f64; 3]); 8] = [
    ("red", [0.86, 0.16, 0.16]),
    ("green", [0.16, 0.78, 0.24]),
    ("blue", [0.20, 0.35, 0.90]),
    ("yellow", [0.90, 0.86, 0.20]),
    ("magenta", [0.78, 0.24, 0.78]),
    ("cyan", [0.24, 0.78, 0.78]),
    ("orange", [0.94, 0.55, 0.16]),
    ("white", [0.94, 0.94, 0.94]),
];

pub fn color_name(id: usize) -> &'static str {
    PALETTE[id].0
}

pub fn color_rgb(id: usize) -> [f64; 3] {
    PALETTE[id].1
}

fn color_by_name(name: &str) -> Option<usize> {
    PALETTE.iter().position(|(n, _)| *n == name)
}

/// Fixed symbolic vocabulary for query token streams.
pub const VOCAB: [&str; 18] = [
    "the", "all", "moving", "circle", "square", "triangle", "red", "green", "blue", "yellow",
    "magenta", "cyan", "orange", "white", "left", "right", "up", "down",
];

pub fn vocab_size() -> usize {
    VOCAB.len()
}

fn word_id(word: &str) -> Option<usize> {
    VOCAB.iter().position(|w| *w == word)
}

// ---------------------------------------------------------------------------
// Scene specification
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Shape {
    Circle,
    Square,
    Triangle,
}

impl Shape {
    pub fn word(&self) -> &'static str {
        match self {
            Shape::Circle => "circle",
            Shape::Square => "square",
            Shape::Triangle => "triangle",
        }
    }

    fn from_word(w: &str) -> Option<Self> {
        match w {
            "circle" => Some(Shape::Circle),
            "square" => Some(Shape::Square),
            "triangle" => Some(Shape::Triangle),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Motion {
    Linear { vx: f64, vy: f64 },
    Sinusoidal { amplitude: f64, period: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObjectSpec {
    pub shape: Shape,
    /// Palette index.
    pub color: usize,
    /// Diameter / side length in pixels.
    pub size: usize,
    pub motion: Motion,
    /// First frame the object exists.
    pub spawn: usize,
    /// First frame the object no longer exists.
    pub despawn: usize,
    /// Center position at frame 0 (motion is evaluated at absolute frame
    /// indices, so a late spawn continues the same trajectory).
    pub start: (f64, f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Occluder {
    pub x: usize,
    pub y: usize,
    pub w: usize,
    pub h: usize,
    /// Active frame range, inclusive start, exclusive end.
    pub from: usize,
    pub to: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneSpec {
    pub width: usize,
    pub height: usize,
    pub t_seg: usize,
    pub objects: Vec<ObjectSpec>,
    #[serde(default)]
    pub occluders: Vec<Occluder>,
    pub seed: u64,
}

impl SceneSpec {
    fn validate(&self) -> Result<()> {
        if self.t_seg < 1 || self.t_seg > 32 {
            return Err(CoreError::SceneSpec(format!(
                "t_seg must be in [1, 32], got {}",
                self.t_seg
            )));
        }
        if self.objects.is_empty() {
            return Err(CoreError::SceneSpec("scene has no objects".into()));
        }
        for (i, o) in self.objects.iter().enumerate() {
            if o.size >= self.width || o.size >= self.height {
                return Err(CoreError::SceneSpec(format!(
                    "object {i} size {} does not fit the {}x{} frame",
                    o.size, self.width, self.height
                )));
            }
            if o.size < 3 {
                return Err(CoreError::SceneSpec(format!("object {i} size {} too small", o.size)));
            }
            if o.color >= PALETTE.len() {
                return Err(CoreError::SceneSpec(format!("object {i} color id {} unknown", o.color)));
            }
            if o.spawn >= o.despawn || o.despawn > self.t_seg {
                return Err(CoreError::SceneSpec(format!(
                    "object {i} spawn/despawn window [{}, {}) invalid for t_seg {}",
                    o.spawn, o.despawn, self.t_seg
                )));
            }
        }
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// Clip
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ResolvedQuery {
    pub text: String,
    pub object_ids: Vec<usize>,
    pub tokens: Vec<usize>,
}

#[derive(Debug, Clone)]
pub struct Clip {
    pub spec: SceneSpec,
    /// RGB frames, `[H, W, 3]`, values in [0, 1].
    pub frames: Vec<Tensor>,
    /// Per-object, per-frame ground truth.
    pub gt: Vec<Vec<Mask>>,
    /// `visibility[obj][t]` is true iff the gt mask at t is nonempty.
    pub visibility: Vec<Vec<bool>>,
    pub queries: Vec<ResolvedQuery>,
    pub preset: Option<String>,
}

impl Clip {
    pub fn t_seg(&self) -> usize {
        self.frames.len()
    }

    pub fn gt_sequence(&self, object_id: usize) -> MaskSequence {
        MaskSequence::new(self.gt[object_id].clone(), Some(object_id))
    }

    /// OR-aggregated ground truth over an object id set.
    pub fn aggregated_gt(&self, ids: &[usize]) -> Result<MaskSequence> {
        let seqs: Vec<MaskSequence> = ids.iter().map(|&i| self.gt_sequence(i)).collect();
        crate::metrics::aggregate_or(&seqs)
    }
}

fn object_center(o: &ObjectSpec, t: usize) -> (f64, f64) {
    match o.motion {
        Motion::Linear { vx, vy } => (o.start.0 + vx * t as f64, o.start.1 + vy * t as f64),
        Motion::Sinusoidal { amplitude, period } => {
            let phase = 2.0 * std::f64::consts::PI * t as f64 / period.max(1e-9);
            (o.start.0 + amplitude * phase.sin(), o.start.1)
        }
    }
}

fn raster_shape(shape: Shape, cx: f64, cy: f64, size: usize, width: usize, height: usize) -> Mask {
    let half = size as f64 / 2.0;
    Mask::from_fn(width, height, |x, y| {
        let px = x as f64 + 0.5;
        let py = y as f64 + 0.5;
        match shape {
            Shape::Circle => {
                let dx = px - cx;
                let dy = py - cy;
                dx * dx + dy * dy <= half * half
            }
            Shape::Square => (px - cx).abs() <= half && (py - cy).abs() <= half,
            Shape::Triangle => {
                // Upward triangle: apex at (cx, cy - half), base at cy + half.
                let fy = (py - (cy - half)) / (2.0 * half);
                if !(0.0..=1.0).contains(&fy) {
                    return false;
                }
                (px - cx).abs() <= fy * half
            }
        }
    })
}

/// Deterministic rasterization: objects back-to-front in list order, then
/// occluders on top. Ground truth holds each object's visible pixels, so it
/// excludes pixels covered by later-drawn objects or active occluders.
pub fn generate(spec: &SceneSpec) -> Result<Clip> {
    spec.validate()?;
    let (w, h, t_seg) = (spec.width, spec.height, spec.t_seg);
    let n_obj = spec.objects.len();
    let mut frames = Vec::with_capacity(t_seg);
    let mut gt: Vec<Vec<Mask>> = vec![Vec::with_capacity(t_seg); n_obj];

    for t in 0..t_seg {
        let mut frame = Tensor::zeros(&[h, w, 3]);
        for y in 0..h {
            for x in 0..w {
                for c in 0..3 {
                    frame.set(&[y, x, c], BACKGROUND_RGB[c]);
                }
            }
        }
        // owner[pixel] = topmost alive object covering it.
        let mut owner: Vec<Option<usize>> = vec![None; w * h];
        for (idx, o) in spec.objects.iter().enumerate() {
            if t < o.spawn || t >= o.despawn {
                continue;
            }
            let (cx, cy) = object_center(o, t);
            let raster = raster_shape(o.shape, cx, cy, o.size, w, h);
            let rgb = color_rgb(o.color);
            for y in 0..h {
                for x in 0..w {
                    if raster.get(x, y) {
                        owner[y * w + x] = Some(idx);
                        for c in 0..3 {
                            frame.set(&[y, x, c], rgb[c]);
                        }
                    }
                }
            }
        }
        for occ in &spec.occluders {
            if t < occ.from || t >= occ.to {
                continue;
            }
            for y in occ.y..(occ.y + occ.h).min(h) {
                for x in occ.x..(occ.x + occ.w).min(w) {
                    owner[y * w + x] = None;
                    for c in 0..3 {
                        frame.set(&[y, x, c], OCCLUDER_RGB[c]);
                    }
                }
            }
        }
        for (idx, masks) in gt.iter_mut().enumerate() {
            masks.push(Mask::from_fn(w, h, |x, y| owner[y * w + x] == Some(idx)));
        }
        frames.push(frame);
    }

    let visibility: Vec<Vec<bool>> = gt
        .iter()
        .map(|masks| masks.iter().map(|m| !m.is_blank()).collect())
        .collect();
    Ok(Clip {
        spec: spec.clone(),
        frames,
        gt,
        visibility,
        queries: Vec::new(),
        preset: None,
    })
}

// ---------------------------------------------------------------------------
// Query resolver
// ---------------------------------------------------------------------------

/// Resolution result: matched ids, the symbolic token stream, and the
/// matched objects' attributes (used downstream to seed query-conditioned
/// prompt tokens).
#[derive(Debug, Clone)]
pub struct QueryGrounding {
    pub text: String,
    pub object_ids: Vec<usize>,
    pub tokens: Vec<usize>,
    pub attributes: Vec<(Shape, usize)>,
}

fn net_displacement(clip: &Clip, idx: usize) -> (f64, f64) {
    let o = &clip.spec.objects[idx];
    let first = object_center(o, o.spawn);
    let last = object_center(o, o.despawn - 1);
    (last.0 - first.0, last.1 - first.1)
}

/// Resolve a templated referring expression against the clip's ground truth.
///
/// Grammar: `the <shape>`, `the <color> <shape>`,
/// `the <shape> moving <left|right|up|down>`, `all <shape>s`.
/// Singular templates must match exactly one object. Motion direction is the
/// sign of the object's net displacement over its lifetime.
pub fn resolve_query(clip: &Clip, template: &str) -> Result<QueryGrounding> {
    let words: Vec<&str> = template.split_whitespace().collect();
    let fail = |msg: String| Err(CoreError::AmbiguousQuery(msg));

    #[derive(Debug)]
    struct Filter {
        shape: Shape,
        color: Option<usize>,
        direction: Option<&'static str>,
        plural: bool,
    }

    let filter = match words.as_slice() {
        ["the", s] => match Shape::from_word(s) {
            Some(shape) => Filter {
                shape,
                color: None,
                direction: None,
                plural: false,
            },
            None => return fail(format!("unknown shape {s:?} in {template:?}")),
        },
        ["the", c, s] => match (color_by_name(c), Shape::from_word(s)) {
            (Some(color), Some(shape)) => Filter {
                shape,
                color: Some(color),
                direction: None,
                plural: false,
            },
            _ => return fail(format!("unknown color/shape in {template:?}")),
        },
        ["the", s, "moving", d] => {
            let dir = match *d {
                "left" => "left",
                "right" => "right",
                "up" => "up",
                "down" => "down",
                _ => return fail(format!("unknown direction {d:?} in {template:?}")),
            };
            match Shape::from_word(s) {
                Some(shape) => Filter {
                    shape,
                    color: None,
                    direction: Some(dir),
                    plural: false,
                },
                None => return fail(format!("unknown shape {s:?} in {template:?}")),
            }
        }
        ["all", p] => {
            let singular = p.strip_suffix('s').unwrap_or(p);
            match Shape::from_word(singular) {
                Some(shape) => Filter {
                    shape,
                    color: None,
                    direction: None,
                    plural: true,
                },
                None => return fail(format!("unknown shape {p:?} in {template:?}")),
            }
        }
        _ => return fail(format!("template {template:?} not in the supported grammar")),
    };

    let mut matched = Vec::new();
    for (idx, o) in clip.spec.objects.iter().enumerate() {
        if o.shape != filter.shape {
            continue;
        }
        if let Some(c) = filter.color {
            if o.color != c {
                continue;
            }
        }
        if let Some(dir) = filter.direction {
            let (dx, dy) = net_displacement(clip, idx);
            let ok = match dir {
                "left" => dx < 0.0,
                "right" => dx > 0.0,
                "up" => dy < 0.0,
                "down" => dy > 0.0,
                _ => unreachable!(),
            };
            if !ok {
                continue;
            }
        }
        matched.push(idx);
    }

    if !filter.plural && matched.len() != 1 {
        return fail(format!(
            "{template:?} matched {} objects, singular templates must match exactly one",
            matched.len()
        ));
    }
    if matched.is_empty() {
        return fail(format!("{template:?} matched no objects"));
    }

    let tokens: Vec<usize> = words
        .iter()
        .map(|w| {
            let normalized = if filter.plural {
                w.strip_suffix('s').unwrap_or(w)
            } else {
                w
            };
            word_id(normalized)
                .ok_or_else(|| CoreError::AmbiguousQuery(format!("word {w:?} not in vocabulary")))
        })
        .collect::<Result<_>>()?;

    let attributes = matched
        .iter()
        .map(|&i| (clip.spec.objects[i].shape, clip.spec.objects[i].color))
        .collect();
    Ok(QueryGrounding {
        text: template.to_string(),
        object_ids: matched,
        tokens,
        attributes,
    })
}

/// Resolve and record a query on the clip.
pub fn attach_query(clip: &mut Clip, template: &str) -> Result<QueryGrounding> {
    let g = resolve_query(clip, template)?;
    clip.queries.push(ResolvedQuery {
        text: g.text.clone(),
        object_ids: g.object_ids.clone(),
        tokens: g.tokens.clone(),
    });
    Ok(g)
}

/// Canvas with a single canonical shape on the standard background, used to
/// seed query-conditioned prompt tokens. Returns the frame and its exact
/// mask.
pub fn reference_frame(
    shape: Shape,
    rgb: [f64; 3],
    size: usize,
    width: usize,
    height: usize,
) -> (Tensor, Mask) {
    let mut frame = Tensor::zeros(&[height, width, 3]);
    for y in 0..height {
        for x in 0..width {
            for c in 0..3 {
                frame.set(&[y, x, c], BACKGROUND_RGB[c]);
            }
        }
    }
    let mask = raster_shape(
        shape,
        width as f64 / 2.0,
        height as f64 / 2.0,
        size,
        width,
        height,
    );
    for y in 0..height {
        for x in 0..width {
            if mask.get(x, y) {
                for c in 0..3 {
                    frame.set(&[y, x, c], rgb[c]);
                }
            }
        }
    }
    (frame, mask)
}

// ---------------------------------------------------------------------------
// Presets
// ---------------------------------------------------------------------------

pub const PRESETS: [&str; 4] = ["easy", "occlusion", "reappear", "distractor"];

const FRAME_SIZE: usize = 128;

/// Build a preset scene. The returned query uniquely names the target by
/// color and shape.
pub fn preset(name: &str, seed: u64, t_seg: usize) -> Result<(SceneSpec, String)> {
    let mut rng = SeededRng::derive(seed, &format!("preset.{name}"));
    let shapes = [Shape::Circle, Shape::Square, Shape::Triangle];
    let shape = shapes[rng.below(3)];
    let color = rng.below(PALETTE.len());
    let size = 22 + rng.below(12);
    let w = FRAME_SIZE;
    let h = FRAME_SIZE;
    let margin = size as f64 / 2.0 + 2.0;
    let mid_y = rng.uniform(margin + 8.0, h as f64 - margin - 8.0);

    let query = format!("the {} {}", color_name(color), shape.word());
    let spec = match name {
        "easy" => {
            let vx = rng.uniform(1.2, 2.2) * if rng.below(2) == 0 { 1.0 } else { -1.0 };
            let start_x = if vx > 0.0 {
                margin + 4.0
            } else {
                w as f64 - margin - 4.0
            };
            SceneSpec {
                width: w,
                height: h,
                t_seg,
                objects: vec![ObjectSpec {
                    shape,
                    color,
                    size,
                    motion: Motion::Linear {
                        vx,
                        vy: rng.uniform(-0.4, 0.4),
                    },
                    spawn: 0,
                    despawn: t_seg,
                    start: (start_x, mid_y),
                }],
                occluders: vec![],
                seed,
            }
        }
        "occlusion" => {
            // The object crosses a full-height static bar wider than itself.
            let bar_w = size + 10;
            let bar_x = w / 2 - bar_w / 2;
            let vx = (w as f64 - 2.0 * margin - 8.0) / t_seg.max(2) as f64;
            SceneSpec {
                width: w,
                height: h,
                t_seg,
                objects: vec![ObjectSpec {
                    shape,
                    color,
                    size,
                    motion: Motion::Linear { vx, vy: 0.0 },
                    spawn: 0,
                    despawn: t_seg,
                    start: (margin + 4.0, mid_y),
                }],
                occluders: vec![Occluder {
                    x: bar_x,
                    y: 0,
                    w: bar_w,
                    h,
                    from: 0,
                    to: t_seg,
                }],
                seed,
            }
        }
        "reappear" => {
            // Target absent at frame 0: it spawns an eighth to a third of the
            // way in.
            let spawn = (t_seg / 8).max(1).min(t_seg.saturating_sub(1));
            let spawn = spawn + rng.below((t_seg / 5).max(1)).min(t_seg - spawn - 1);
            let vx = rng.uniform(1.0, 2.0) * if rng.below(2) == 0 { 1.0 } else { -1.0 };
            // Start so the object is inside the frame over [spawn, t_seg).
            let travel = vx * t_seg as f64;
            let start_x = if vx > 0.0 {
                rng.uniform(margin, (w as f64 - margin - travel).max(margin + 1.0))
            } else {
                rng.uniform((margin - travel).min(w as f64 - margin - 1.0), w as f64 - margin)
            };
            SceneSpec {
                width: w,
                height: h,
                t_seg,
                objects: vec![ObjectSpec {
                    shape,
                    color,
                    size,
                    motion: Motion::Linear { vx, vy: 0.0 },
                    spawn,
                    despawn: t_seg,
                    start: (start_x, mid_y),
                }],
                occluders: vec![],
                seed,
            }
        }
        "distractor" => {
            // Target plus two same-shape distractors in other colors.
            let mut colors = BTreeSet::new();
            colors.insert(color);
            let mut distractor_colors = Vec::new();
            while distractor_colors.len() < 2 {
                let c = rng.below(PALETTE.len());
                if colors.insert(c) {
                    distractor_colors.push(c);
                }
            }
            let vx = rng.uniform(1.0, 2.0);
            let mut objects = vec![ObjectSpec {
                shape,
                color,
                size,
                motion: Motion::Linear { vx, vy: 0.0 },
                spawn: 0,
                despawn: t_seg,
                start: (margin + 4.0, mid_y * 0.6),
            }];
            for (i, &c) in distractor_colors.iter().enumerate() {
                objects.push(ObjectSpec {
                    shape,
                    color: c,
                    size: size.saturating_sub(2).max(12),
                    motion: Motion::Linear {
                        vx: -vx * 0.8,
                        vy: 0.0,
                    },
                    spawn: 0,
                    despawn: t_seg,
                    start: (
                        w as f64 - margin - 4.0,
                        mid_y * 0.6 + 30.0 * (i as f64 + 1.0),
                    ),
                });
            }
            SceneSpec {
                width: w,
                height: h,
                t_seg,
                objects,
                occluders: vec![],
                seed,
            }
        }
        other => {
            return Err(CoreError::SceneSpec(format!(
                "unknown preset {other:?}; expected one of {PRESETS:?}"
            )))
        }
    };
    Ok((spec, query))
}

/// Reappear/occlusion scenes for the strategy and alpha trend studies, three
/// reappear clips for every two occlusion clips, so at least 40% of clips
/// (here 60%) have the target absent at frame 0.
pub fn trend_suite(seed: u64, n_clips: usize, t_seg: usize) -> Result<Vec<(SceneSpec, String)>> {
    let mut out = Vec::with_capacity(n_clips);
    for i in 0..n_clips {
        let name = if i % 5 < 3 { "reappear" } else { "occlusion" };
        let (spec, query) = preset(name, seed.wrapping_add(i as u64), t_seg)?;
        out.push((spec, query));
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// On-disk format
// ---------------------------------------------------------------------------

#[derive(Serialize, Deserialize)]
struct Manifest {
    width: usize,
    height: usize,
    t_seg: usize,
    seed: u64,
    preset: Option<String>,
    objects: Vec<ObjectSpec>,
    occluders: Vec<Occluder>,
    queries: Vec<ResolvedQuery>,
    visibility: Vec<Vec<bool>>,
}

/// Write `frame_%04d.ppm`, `gt_<objid>_%04d.pgm` and `manifest.json`.
pub fn write_clip(dir: &Path, clip: &Clip) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    for (t, frame) in clip.frames.iter().enumerate() {
        mask::write_ppm(&dir.join(format!("frame_{t:04}.ppm")), frame)?;
    }
    for (obj, masks) in clip.gt.iter().enumerate() {
        for (t, m) in masks.iter().enumerate() {
            mask::write_pgm(&dir.join(format!("gt_{obj}_{t:04}.pgm")), m)?;
        }
    }
    let manifest = Manifest {
        width: clip.spec.width,
        height: clip.spec.height,
        t_seg: clip.spec.t_seg,
        seed: clip.spec.seed,
        preset: clip.preset.clone(),
        objects: clip.spec.objects.clone(),
        occluders: clip.spec.occluders.clone(),
        queries: clip.queries.clone(),
        visibility: clip.visibility.clone(),
    };
    let json = serde_json::to_string_pretty(&manifest)
        .map_err(|e| CoreError::Parse(format!("manifest: {e}")))?;
    std::fs::write(dir.join("manifest.json"), json)?;
    Ok(())
}

pub fn read_clip(dir: &Path) -> Result<Clip> {
    let manifest_path = dir.join("manifest.json");
    let json = std::fs::read_to_string(&manifest_path)?;
    let manifest: Manifest = serde_json::from_str(&json)
        .map_err(|e| CoreError::Parse(format!("{}: {e}", manifest_path.display())))?;
    let spec = SceneSpec {
        width: manifest.width,
        height: manifest.height,
        t_seg: manifest.t_seg,
        objects: manifest.objects,
        occluders: manifest.occluders,
        seed: manifest.seed,
    };
    let mut frames = Vec::with_capacity(spec.t_seg);
    for t in 0..spec.t_seg {
        frames.push(mask::read_ppm(&dir.join(format!("frame_{t:04}.ppm")))?);
    }
    let mut gt = Vec::with_capacity(spec.objects.len());
    for obj in 0..spec.objects.len() {
        let mut masks = Vec::with_capacity(spec.t_seg);
        for t in 0..spec.t_seg {
            masks.push(mask::read_pgm(&dir.join(format!("gt_{obj}_{t:04}.pgm")))?);
        }
        gt.push(masks);
    }
    Ok(Clip {
        spec,
        frames,
        gt,
        visibility: manifest.visibility,
        queries: manifest.queries,
        preset: manifest.preset,
    })
}
