use proptest::prelude::*;
use statrs::distribution::{ContinuousCDF, StudentsT};
use volseg_core::geometry::{expand_box, voxel_to_world, world_to_voxel};
use volseg_core::metrics::MetricsRecord;
use volseg_core::nifti::{encode_nifti, parse_nifti, WriteOptions};
use volseg_core::pipeline::{
    filter_small_components, label_components, morph, run_semi_auto_detailed, threshold_in_voi, Connectivity,
    MorphOp, PipelineParams, Threshold,
};
use volseg_core::stats::{summarize, t_cdf, t_test, TTestVariant};
use volseg_core::{AffineTransform, Grid, Mask, Volume, VoxelBox};

fn mask_strategy(max: usize) -> impl Strategy<Value = Mask> {
    (1..=max, 1..=max, 1..=max, prop::sample::select(vec![[1.0, 1.0, 1.0], [1.0, 1.0, 2.0], [1.25, 1.25, 1.5]]))
        .prop_flat_map(|(x, y, z, s)| {
            prop::collection::vec(prop::bool::weighted(0.4), x * y * z).prop_map(move |data| {
                Mask::from_data(Grid::axis_aligned([x, y, z], s, [0.0; 3]).unwrap(), data).unwrap()
            })
        })
}

fn volume_strategy() -> impl Strategy<Value = Volume> {
    (1..=8usize, 1..=8usize, 1..=6usize).prop_flat_map(|(x, y, z)| {
        prop::collection::vec(-100.0f32..100.0, x * y * z)
            .prop_map(move |d| Volume::new(Grid::axis_aligned([x, y, z], [1.0; 3], [0.0; 3]).unwrap(), d).unwrap())
    })
}

fn connectivity() -> impl Strategy<Value = Connectivity> {
    prop::sample::select(vec![Connectivity::Six, Connectivity::Eighteen, Connectivity::TwentySix])
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn opening_within_input_within_closing(m in mask_strategy(9), r in 0.0f64..3.0) {
        let open = morph(&m, MorphOp::Open, r).unwrap();
        let close = morph(&m, MorphOp::Close, r).unwrap();
        prop_assert!(open.is_subset_of(&m));
        prop_assert!(m.is_subset_of(&close));
    }

    #[test]
    fn component_filter_is_idempotent(m in mask_strategy(10), min in 1usize..12, c in connectivity()) {
        let once = filter_small_components(&m, min, c).unwrap();
        prop_assert_eq!(&filter_small_components(&once, min, c).unwrap(), &once);
        prop_assert!(once.is_subset_of(&m));
    }

    #[test]
    fn component_sizes_sum_to_foreground(m in mask_strategy(10), c in connectivity()) {
        let l = label_components(&m, c);
        prop_assert_eq!(l.sizes().iter().sum::<usize>(), m.count());
        prop_assert_eq!(l.labels().iter().copied().max().unwrap_or(0) as usize, l.count());
    }

    #[test]
    fn raising_the_threshold_never_adds_voxels(v in volume_strategy(), t in -120.0f64..120.0, dt in 0.0f64..50.0) {
        let voi = VoxelBox::full(v.grid().dims());
        let lo = threshold_in_voi(&v, &voi, t).unwrap();
        let hi = threshold_in_voi(&v, &voi, t + dt).unwrap();
        prop_assert!(hi.is_subset_of(&lo));
    }

    #[test]
    fn pipeline_output_stays_in_the_voi(
        v in volume_strategy(),
        seed in any::<u64>(),
        t in -50.0f64..50.0,
        margin in 0.0f64..3.0,
        morph_r in prop::option::of(0.0f64..2.0),
        silhouette in any::<bool>(),
    ) {
        let body = Mask::from_fn(v.grid().clone(), |i, j, k| !(i + 3 * j + 7 * k + seed as usize).is_multiple_of(5));
        let mut p = PipelineParams::new(Threshold::Value(t));
        p.min_component_voxels = 2;
        p.voi_margin_mm = margin;
        p.silhouette = silhouette;
        p.morphology = morph_r.map(|r| vec![format!("close:{r}").parse().unwrap()]).unwrap_or_default();
        let out = run_semi_auto_detailed(&v, &body, &p).unwrap();
        let g = v.grid();
        for idx in 0..g.len() {
            if out.fat_mask.data()[idx] {
                let [i, j, k] = g.coords(idx);
                prop_assert!(out.voi.contains(i, j, k));
            }
        }
    }

    #[test]
    fn box_expansion_is_monotone(ax in 0usize..10, ay in 0usize..10, az in 0usize..10, m1 in 0.0f64..6.0, dm in 0.0f64..6.0) {
        let g = Grid::axis_aligned([12, 12, 12], [1.25, 1.25, 2.0], [0.0; 3]).unwrap();
        let b = VoxelBox::new([ax, ay, az], [ax + 2, ay + 1, az + 2]).unwrap();
        let small = expand_box(&b, m1, &g).unwrap();
        let big = expand_box(&b, m1 + dm, &g).unwrap();
        prop_assert!(big.encloses(&small) && small.encloses(&b));
    }

    #[test]
    fn affine_round_trip(
        s in prop::array::uniform3(0.3f64..3.0),
        o in prop::array::uniform3(-100.0f64..100.0),
        shear in -0.5f64..0.5,
        idx in prop::array::uniform3(-50i64..50),
    ) {
        let mut rows = AffineTransform::diagonal(s, o).rows();
        rows[0][1] = shear;
        let a = AffineTransform::from_rows(rows);
        let back = world_to_voxel(&a, voxel_to_world(&a, idx)).unwrap();
        for d in 0..3 {
            prop_assert!((back[d] - idx[d] as f64).abs() < 1e-9);
        }
    }

    #[test]
    fn nifti_float_round_trip(v in volume_strategy(), big_endian in any::<bool>()) {
        let opts = WriteOptions { big_endian, ..WriteOptions::default() };
        let back = parse_nifti(&encode_nifti(&v, &opts).unwrap()).unwrap();
        prop_assert_eq!(back.grid(), v.grid());
        prop_assert_eq!(back.data(), v.data());
    }

    #[test]
    fn t_cdf_symmetry_and_monotonicity(t in -50.0f64..50.0, dt in 0.0f64..5.0, df in 0.05f64..500.0) {
        let f = t_cdf(t, df).unwrap();
        prop_assert!((f + t_cdf(-t, df).unwrap() - 1.0).abs() < 1e-12);
        prop_assert!(t_cdf(t + dt, df).unwrap() >= f);
    }

    #[test]
    fn t_cdf_agrees_with_statrs(t in -30.0f64..30.0, df in 0.5f64..200.0) {
        let want = StudentsT::new(0.0, 1.0, df).unwrap().cdf(t);
        prop_assert!((t_cdf(t, df).unwrap() - want).abs() < 1e-9);
    }

    #[test]
    fn paired_test_invariants(
        x in prop::collection::vec(-10.0f64..10.0, 3..20),
        noise in prop::collection::vec(-1.0f64..1.0, 20),
        shift in -100.0f64..100.0,
    ) {
        let y: Vec<f64> = x.iter().zip(&noise).map(|(a, e)| a + e).collect();
        if let Ok(r) = t_test(&x, &y, TTestVariant::Paired) {
            let want = 2.0 * (1.0 - t_cdf(r.t_statistic.abs(), r.degrees_of_freedom).unwrap());
            prop_assert!((r.p_value - want).abs() < 1e-12);
            prop_assert!((0.0..=1.0).contains(&r.p_value));
            let xs: Vec<f64> = x.iter().map(|v| v + shift).collect();
            let ys: Vec<f64> = y.iter().map(|v| v + shift).collect();
            let s = t_test(&xs, &ys, TTestVariant::Paired).unwrap();
            prop_assert!((s.t_statistic - r.t_statistic).abs() < 1e-6 * (1.0 + r.t_statistic.abs()));
        }
    }

    #[test]
    fn summary_matches_scan_and_ignores_order(
        dice in prop::collection::vec(0.0f64..1.0, 1..30),
        rot in 0usize..30,
    ) {
        let recs: Vec<MetricsRecord> = dice.iter().enumerate().map(|(i, &d)| MetricsRecord {
            case_id: format!("c{i}"),
            dice: d,
            hausdorff_mm: 40.0 * d,
            assd_mm: 1.0 - d,
            vd_ml: d * 3.0,
            rvd_percent: d / 7.0,
            correction_time_s: None,
        }).collect();
        let s = summarize(&recs).unwrap();
        let min = dice.iter().cloned().fold(f64::INFINITY, f64::min);
        let max = dice.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        prop_assert_eq!((s.dice.min, s.dice.max), (min, max));
        prop_assert!(s.dice.min <= s.dice.mean && s.dice.mean <= s.dice.max && s.dice.std >= 0.0);
        let mut shuffled = recs.clone();
        shuffled.rotate_left(rot % recs.len());
        shuffled.reverse();
        prop_assert_eq!(summarize(&shuffled).unwrap(), s);
    }
}
