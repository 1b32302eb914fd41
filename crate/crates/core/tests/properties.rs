//! Property tests for the module invariants.

use proptest::prelude::*;

use anchorseg_core::anchor::sample_training_plan;
use anchorseg_core::attention::{cross_attention, AttentionParams};
use anchorseg_core::losses::{bce_loss, dice_loss, total_loss, LossComponents, LossWeights};
use anchorseg_core::mask::Mask;
use anchorseg_core::metrics::{boundary_f, region_j, DEFAULT_BOUNDARY_TOL};
use anchorseg_core::numerics::{softmax_rows, SeededRng, Tensor};
use anchorseg_core::rope::{apply_rope, RotationPlan};

fn finite_tensor(rows: usize, cols: usize) -> impl Strategy<Value = Tensor> {
    proptest::collection::vec(-50.0f64..50.0, rows * cols)
        .prop_map(move |data| Tensor::new(vec![rows, cols], data).unwrap())
}

proptest! {
    /// Softmax rows are nonnegative and sum to 1 within 1e-12 for all finite
    /// inputs.
    #[test]
    fn softmax_rows_sum_to_one(x in finite_tensor(4, 7)) {
        let s = softmax_rows(&x);
        for i in 0..4 {
            let row = s.row(i);
            prop_assert!(row.iter().all(|&v| v >= 0.0));
            let sum: f64 = row.iter().sum();
            prop_assert!((sum - 1.0).abs() <= 1e-12, "row {i} sums to {sum}");
        }
    }

    /// Rotations preserve token norms within 1e-12 for any positions.
    #[test]
    fn rope_preserves_norms(
        seed in 0u64..1000,
        positions in proptest::collection::vec(-100i64..100, 3),
    ) {
        let mut rng = SeededRng::new(seed);
        let x = Tensor::seeded_uniform(&[3, 10], -2.0, 2.0, &mut rng);
        let plan = RotationPlan::temporal(&positions, 10, 10000.0).unwrap();
        let y = apply_rope(&x, &plan).unwrap();
        for t in 0..3 {
            let nx: f64 = x.row(t).iter().map(|v| v * v).sum::<f64>().sqrt();
            let ny: f64 = y.row(t).iter().map(|v| v * v).sum::<f64>().sqrt();
            prop_assert!((nx - ny).abs() <= 1e-12);
        }
    }

    /// With identity value/output maps, attention outputs stay inside the
    /// per-dimension convex hull of the value rows.
    #[test]
    fn attention_outputs_in_value_hull(seed in 0u64..1000) {
        let mut rng = SeededRng::new(seed);
        let q = Tensor::seeded_uniform(&[3, 6], -2.0, 2.0, &mut rng);
        let kv = Tensor::seeded_uniform(&[5, 6], -2.0, 2.0, &mut rng);
        let params = AttentionParams::identity_with_gain(6, 3.0);
        let out = cross_attention(&q, &kv, &params, None, None).unwrap();
        for d in 0..6 {
            let lo = (0..5).map(|j| kv.at(&[j, d])).fold(f64::INFINITY, f64::min);
            let hi = (0..5).map(|j| kv.at(&[j, d])).fold(f64::NEG_INFINITY, f64::max);
            for i in 0..3 {
                let v = out.at(&[i, d]);
                prop_assert!(v >= lo - 1e-12 && v <= hi + 1e-12);
            }
        }
    }

    /// Training plans keep every documented invariant for arbitrary shapes.
    #[test]
    fn training_plans_hold_invariants(
        t_seg in 1usize..=32,
        alpha in 1usize..=8,
        n_prop in 0usize..=8,
        seed in 0u64..5000,
    ) {
        let plan = sample_training_plan(t_seg, alpha, n_prop, seed);
        prop_assert_eq!(plan.anchors.len(), alpha.min(t_seg));
        prop_assert!(plan.anchors.windows(2).all(|w| w[0] < w[1]));
        prop_assert!(plan.prop_frames.windows(2).all(|w| w[0] < w[1]));
        prop_assert!(plan.prop_frames.iter().all(|f| !plan.anchors.contains(f)));
        prop_assert!(plan.anchors.iter().chain(&plan.prop_frames).all(|&f| f < t_seg));
        prop_assert!(plan.prop_frames.len() <= alpha * (2 + n_prop));
    }

    /// BCE and dice are nonnegative, dice at most 1 (plus epsilon slack),
    /// and the weighted total is exactly linear in each component.
    #[test]
    fn loss_ranges_and_linearity(
        logits in finite_tensor(3, 3),
        bits in proptest::collection::vec(0u8..2, 9),
        c in -5.0f64..5.0,
    ) {
        let gt = Tensor::new(vec![3, 3], bits.iter().map(|&b| b as f64).collect()).unwrap();
        let (bce, _) = bce_loss(&logits, &gt).unwrap();
        prop_assert!(bce >= 0.0);
        let (dice, _) = dice_loss(&logits, &gt, 1.0).unwrap();
        prop_assert!(dice >= 0.0 && dice <= 1.0 + 1e-12);

        let base = LossComponents { bce: 0.3, dice: 0.7, token: 1.1, occ: 0.2, iou: 0.4 };
        let w = LossWeights::default();
        let mut shifted = base;
        shifted.dice += c;
        let lhs = total_loss(&shifted, &w) - total_loss(&base, &w);
        prop_assert!((lhs - w.dice * c).abs() < 1e-12);
    }

    /// Region J is symmetric and invariant under a joint pixel permutation
    /// (here: a transpose).
    #[test]
    fn region_j_symmetry_and_permutation(
        pb in proptest::collection::vec(0u8..2, 25),
        gb in proptest::collection::vec(0u8..2, 25),
    ) {
        let pred = Mask::from_fn(5, 5, |x, y| pb[y * 5 + x] != 0);
        let gt = Mask::from_fn(5, 5, |x, y| gb[y * 5 + x] != 0);
        prop_assert_eq!(region_j(&pred, &gt).unwrap(), region_j(&gt, &pred).unwrap());
        let predt = Mask::from_fn(5, 5, |x, y| pb[x * 5 + y] != 0);
        let gtt = Mask::from_fn(5, 5, |x, y| gb[x * 5 + y] != 0);
        prop_assert_eq!(region_j(&pred, &gt).unwrap(), region_j(&predt, &gtt).unwrap());
    }

    /// J and F always land in [0, 1].
    #[test]
    fn metric_ranges(
        pb in proptest::collection::vec(0u8..2, 36),
        gb in proptest::collection::vec(0u8..2, 36),
    ) {
        let pred = Mask::from_fn(6, 6, |x, y| pb[y * 6 + x] != 0);
        let gt = Mask::from_fn(6, 6, |x, y| gb[y * 6 + x] != 0);
        let j = region_j(&pred, &gt).unwrap();
        let f = boundary_f(&pred, &gt, DEFAULT_BOUNDARY_TOL).unwrap();
        prop_assert!((0.0..=1.0).contains(&j));
        prop_assert!((0.0..=1.0).contains(&f));
    }

    /// The tensor file format round-trips bit-exactly.
    #[test]
    fn tensor_file_roundtrip(
        rows in 1usize..5,
        cols in 1usize..5,
        seed in 0u64..1000,
    ) {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.tensor");
        let mut rng = SeededRng::new(seed);
        let t = Tensor::seeded_uniform(&[rows, cols], -1e6, 1e6, &mut rng);
        anchorseg_core::numerics::write_tensor_file(&path, &t).unwrap();
        let back = anchorseg_core::numerics::read_tensor_file(&path).unwrap();
        prop_assert_eq!(t, back);
    }
}
