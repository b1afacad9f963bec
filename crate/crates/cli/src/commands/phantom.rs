use serde_json::json;
use volseg_core::phantom::{generate, write_case, PhantomSpec, SPEC_FILE};
use volseg_core::Error;

use super::with_threads;
use crate::error::{CliError, CliResult, EXIT_OK};
use crate::manifest::ManifestBuilder;
use crate::PhantomArgs;

fn build_spec(args: &PhantomArgs) -> CliResult<PhantomSpec> {
    let mut spec = match &args.spec {
        Some(p) => {
            let text = std::fs::read_to_string(p)
                .map_err(|e| CliError::usage(format!("cannot read {}: {e}", p.display())))?;
            serde_json::from_str::<PhantomSpec>(&text)
                .map_err(|e| CliError::usage(format!("{}: {e}", p.display())))?
        }
        None => PhantomSpec::default(),
    };
    macro_rules! set {
        ($($flag:ident => $field:ident),* $(,)?) => { $( if let Some(v) = args.$flag { spec.$field = v; } )* };
    }
    set!(
        semi_axes_mm => semi_axes_mm,
        fat_thickness_mm => fat_thickness_mm,
        trufi_spacing_mm => trufi_spacing_mm,
        trufi_dims => trufi_dims,
        dixon_spacing_mm => dixon_spacing_mm,
        dixon_dims => dixon_dims,
        translation_mm => translation_mm,
        noise_sigma => noise_sigma,
        speckles => speckle_count,
        speckle_voxels => speckle_voxels,
        slab_offset_mm => maternal_slab_offset_mm,
        seed => seed,
    );
    if args.maternal_slab {
        spec.maternal_slab = true;
    }
    spec.validate()?;
    Ok(spec)
}

pub fn run(args: PhantomArgs) -> CliResult<i32> {
    let spec = build_spec(&args)?;
    if args.out_dir.exists() && !args.force {
        return Err(Error::Exists(args.out_dir.clone()).into());
    }
    with_threads(args.threads, || {
        let mut m = ManifestBuilder::start("phantom", json!({ "spec": spec }));
        let case = generate(&spec)?;
        m.lap("generate");
        write_case(&case, &args.out_dir, args.force).map_err(|e| match e {
            Error::Exists(_) => CliError::from(e),
            other => CliError::output(other),
        })?;
        for name in volseg_core::phantom::CASE_FILES.iter().chain(std::iter::once(&SPEC_FILE)) {
            m.output(name.trim_end_matches(".nii.gz"), &args.out_dir.join(name))?;
        }
        m.lap("write");
        let (body_ml, fat_ml) = (case.gt_body_ml(), case.gt_fat_ml());
        m.results(json!({
            "gt_body_dixon_ml": body_ml,
            "gt_fat_dixon_ml": fat_ml,
            "analytic_body_ml": spec.analytic_body_ml(),
            "analytic_fat_ml": spec.analytic_fat_ml(),
        }));
        m.finish().write(&args.out_dir)?;
        println!("gt_body_dixon: {body_ml:.3} mL (analytic {:.3})", spec.analytic_body_ml());
        println!("gt_fat_dixon: {fat_ml:.3} mL (analytic {:.3})", spec.analytic_fat_ml());
        Ok(EXIT_OK)
    })
}
