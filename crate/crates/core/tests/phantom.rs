use volseg_core::metrics::dice;
use volseg_core::nifti::{read_mask, read_nifti};
use volseg_core::phantom::{self, generate, write_case, PhantomSpec};
use volseg_core::pipeline::{label_components, run_semi_auto, run_semi_auto_detailed, Connectivity, PipelineParams, Threshold};
use volseg_core::Error;

#[test]
fn voxel_volumes_approximate_the_analytic_ones() {
    for spec in [
        PhantomSpec::default(),
        PhantomSpec { dixon_spacing_mm: [1.4, 1.4, 1.5], dixon_dims: [116, 116, 128], ..PhantomSpec::default() },
    ] {
        let c = generate(&spec).unwrap();
        let fat = c.gt_fat_ml();
        let body = c.gt_body_ml();
        assert!((fat / spec.analytic_fat_ml() - 1.0).abs() < 0.05, "fat {fat} vs {}", spec.analytic_fat_ml());
        assert!((body / spec.analytic_body_ml() - 1.0).abs() < 0.05);
    }
}

#[test]
fn clean_shell_is_one_component() {
    let c = generate(&PhantomSpec::default()).unwrap();
    assert_eq!(label_components(&c.gt_fat_dixon, Connectivity::TwentySix).count(), 1);
    assert!(c.artifacts.is_empty());
}

#[test]
fn pipeline_recovers_the_shell() {
    let spec = PhantomSpec { translation_mm: [3.0, -2.0, 1.0], ..PhantomSpec::default() };
    let c = generate(&spec).unwrap();
    let mid = run_semi_auto(&c.dixon_fat, &c.gt_body_trufi, &PipelineParams::new(Threshold::Value(c.midpoint_threshold()))).unwrap();
    assert!(dice(&mid, &c.gt_fat_dixon).unwrap() >= 0.99);
    let otsu = run_semi_auto_detailed(&c.dixon_fat, &c.gt_body_trufi, &PipelineParams::new(Threshold::Otsu)).unwrap();
    assert!(otsu.threshold > spec.water_tissue && otsu.threshold <= spec.fat);
    assert_eq!(otsu.fat_mask, mid);
}

#[test]
fn artifacts_are_removed() {
    let spec = PhantomSpec {
        noise_sigma: 8.0,
        speckle_count: 10,
        maternal_slab: true,
        seed: 5,
        ..PhantomSpec::default()
    };
    let c = generate(&spec).unwrap();
    assert!(c.artifacts.count() > 100);
    let out = run_semi_auto(&c.dixon_fat, &c.gt_body_trufi, &PipelineParams::new(Threshold::Value(c.midpoint_threshold()))).unwrap();
    assert!(out.intersect(&c.artifacts).unwrap().is_empty());
    assert!(dice(&out, &c.gt_fat_dixon).unwrap() >= 0.95);

    // without the component filter the speckles survive
    let mut p = PipelineParams::new(Threshold::Value(c.midpoint_threshold()));
    p.min_component_voxels = 1;
    let raw = run_semi_auto(&c.dixon_fat, &c.gt_body_trufi, &p).unwrap();
    assert!(!raw.intersect(&c.artifacts).unwrap().is_empty());
}

#[test]
fn regeneration_is_bit_identical() {
    let spec = PhantomSpec { noise_sigma: 3.0, speckle_count: 2, seed: 77, ..PhantomSpec::default() };
    assert_eq!(generate(&spec).unwrap(), generate(&spec).unwrap());
}

#[test]
fn write_case_round_trip_and_collision() {
    let dir = tempfile::tempdir().unwrap();
    let spec = PhantomSpec {
        semi_axes_mm: [20.0, 16.0, 24.0],
        trufi_dims: [64, 56, 30],
        dixon_dims: [40, 34, 30],
        noise_sigma: 2.0,
        seed: 3,
        ..PhantomSpec::default()
    };
    let c = generate(&spec).unwrap();
    let out = dir.path().join("case");
    write_case(&c, &out, false).unwrap();
    assert_eq!(read_mask(out.join(phantom::GT_FAT_DIXON_FILE)).unwrap(), c.gt_fat_dixon);
    assert_eq!(read_mask(out.join(phantom::GT_BODY_DIXON_FILE)).unwrap(), c.gt_body_dixon);
    assert_eq!(read_mask(out.join(phantom::GT_BODY_TRUFI_FILE)).unwrap(), c.gt_body_trufi);
    assert_eq!(read_nifti(out.join(phantom::DIXON_FAT_FILE)).unwrap(), c.dixon_fat);
    assert_eq!(read_nifti(out.join(phantom::DIXON_WATER_FILE)).unwrap(), c.dixon_water);
    assert_eq!(read_nifti(out.join(phantom::TRUFI_FILE)).unwrap(), c.trufi);
    let text = std::fs::read_to_string(out.join(phantom::SPEC_FILE)).unwrap();
    assert_eq!(PhantomSpec::from_json(&text).unwrap(), spec);
    assert!(matches!(write_case(&c, &out, false), Err(Error::Exists(_))));
    write_case(&c, &out, true).unwrap();
}
