use serde_json::json;
use volseg_core::nifti::{read_mask, read_nifti, write_mask};
use volseg_core::pipeline::{map_body_voi, DEFAULT_VOI_MARGIN_MM};

use super::{create_out_dir, require_file, with_threads};
use crate::config::FileConfig;
use crate::error::{CliError, CliResult, EXIT_OK};
use crate::manifest::{digest_file, ManifestBuilder};
use crate::MapVoiArgs;

pub const MAPPED_FILE: &str = "body_mask_mapped.nii.gz";
pub const VOI_FILE: &str = "voi.json";

pub fn run(args: MapVoiArgs) -> CliResult<i32> {
    let cfg = FileConfig::load(args.config.as_deref())?;
    let margin = args.margin_mm.or(cfg.pipeline.voi_margin_mm).unwrap_or(DEFAULT_VOI_MARGIN_MM);
    if !(margin >= 0.0 && margin.is_finite()) {
        return Err(CliError::usage(format!("--margin-mm must be >= 0, got {margin}")));
    }
    with_threads(args.threads.or(cfg.threads), || map_voi(&args, margin))
}

fn map_voi(args: &MapVoiArgs, margin: f64) -> CliResult<i32> {
    require_file("body mask", &args.body_mask)?;
    require_file("target", &args.target)?;
    let mut m = ManifestBuilder::start("map-voi", json!({ "margin_mm": margin }));
    let body = read_mask(&args.body_mask)?;
    let target = read_nifti(&args.target)?;
    m.input(digest_file("body_mask", &args.body_mask)?);
    m.input(digest_file("target", &args.target)?);
    m.lap("load");

    let (mapped, voi) = map_body_voi(target.grid(), &body, margin)?;
    m.lap("map_voi");

    create_out_dir(&args.out_dir)?;
    let mask_path = args.out_dir.join(MAPPED_FILE);
    write_mask(&mapped, &mask_path).map_err(CliError::output)?;
    let voi_path = args.out_dir.join(VOI_FILE);
    let voi_text = serde_json::to_string_pretty(&json!({ "lo": voi.lo, "hi": voi.hi, "margin_mm": margin }))
        .map_err(|e| CliError::failure(e.to_string()))?;
    std::fs::write(&voi_path, voi_text + "\n")
        .map_err(|e| CliError::failure(format!("cannot write {}: {e}", voi_path.display())))?;
    m.output("body_mask_mapped", &mask_path)?;
    m.output("voi", &voi_path)?;
    m.lap("write");
    m.results(json!({ "voi": { "lo": voi.lo, "hi": voi.hi }, "mapped_voxels": mapped.count() }));
    m.finish().write(&args.out_dir)?;
    println!("VOI lo {:?} hi {:?} ({} mapped voxels)", voi.lo, voi.hi, mapped.count());
    Ok(EXIT_OK)
}
