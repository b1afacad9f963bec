use serde_json::json;
use volseg_core::geometry::VoxelBox;
use volseg_core::metrics::volume_ml;
use volseg_core::nifti::{read_mask, read_nifti, write_mask};
use volseg_core::pipeline::{run_semi_auto_detailed, PipelineParams};

use super::{create_out_dir, require_file, with_threads};
use crate::config::FileConfig;
use crate::error::{CliError, CliResult, EXIT_OK};
use crate::manifest::{digest_file, ManifestBuilder};
use crate::SegmentArgs;

pub const FAT_MASK_FILE: &str = "fat_mask.nii.gz";

pub fn run(args: SegmentArgs) -> CliResult<i32> {
    let cfg = FileConfig::load(args.config.as_deref())?;
    let params = cfg.pipeline.clone().merged(args.pipeline.overrides()?).resolve()?;
    with_threads(args.threads.or(cfg.threads), || segment(&args, &params))
}

fn voi_json(v: &VoxelBox) -> serde_json::Value {
    json!({ "lo": v.lo, "hi": v.hi })
}

fn segment(args: &SegmentArgs, params: &PipelineParams) -> CliResult<i32> {
    require_file("fat", &args.fat)?;
    require_file("body mask", &args.body_mask)?;
    let mut m = ManifestBuilder::start("segment", json!({ "pipeline": params }));
    let fat = read_nifti(&args.fat)?;
    let body = read_mask(&args.body_mask)?;
    m.input(digest_file("fat", &args.fat)?);
    m.input(digest_file("body_mask", &args.body_mask)?);
    m.lap("load");

    let out = run_semi_auto_detailed(&fat, &body, params)?;
    for t in &out.timings {
        m.stage(t.stage, t.seconds);
    }
    m.reset_clock();

    create_out_dir(&args.out_dir)?;
    let path = args.out_dir.join(FAT_MASK_FILE);
    write_mask(&out.fat_mask, &path).map_err(CliError::output)?;
    m.output("fat_mask", &path)?;
    m.lap("write");

    let ml = volume_ml(&out.fat_mask);
    m.results(json!({
        "threshold": out.threshold,
        "voi": voi_json(&out.voi),
        "fat_voxels": out.fat_mask.count(),
        "fat_ml": ml,
    }));
    m.finish().write(&args.out_dir)?;
    println!(
        "{}: {} voxels, {ml:.3} mL (threshold {})",
        path.display(),
        out.fat_mask.count(),
        out.threshold
    );
    Ok(EXIT_OK)
}
