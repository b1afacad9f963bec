//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any
//! criterion fails.

use std::fs;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::process::Command;
use std::time::Instant;

use volseg_core::metrics::{self, evaluate_case, squared_distance_weighted, SurfaceDistances};
use volseg_core::nifti::{encode_nifti, read_nifti, write_mask, write_nifti, Datatype, WriteOptions};
use volseg_core::phantom::{generate, PhantomSpec};
use volseg_core::pipeline::{filter_small_components, map_body_voi, run_semi_auto, Connectivity, PipelineParams, Threshold};
use volseg_core::stats::{t_cdf, t_test, TTestVariant};
use volseg_core::{AffineTransform, Grid, Mask, Volume};
use volseg_testkit::{self as kit, oracle};

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn check(ok: bool, msg: impl Into<String>) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn metrics_vs_oracles() -> Outcome {
    let t0 = Instant::now();
    let suite = kit::mask_pair_suite();
    let mut worst = 0.0f64;
    for (n, (a, b)) in suite.iter().enumerate() {
        let d = metrics::dice(a, b).map_err(|e| e.to_string())?;
        check(d == oracle::dice(a, b), format!("pair {n}: dice {d} vs {}", oracle::dice(a, b)))?;
        let vd = metrics::vd(a, b).map_err(|e| e.to_string())?;
        check(vd == oracle::vd_ml(a, b), format!("pair {n}: vd {vd} vs {}", oracle::vd_ml(a, b)))?;
        let s = SurfaceDistances::compute(a, b).map_err(|e| e.to_string())?;
        let dh = (s.hausdorff() - oracle::hausdorff(a, b)).abs();
        let da = (s.assd() - oracle::assd(a, b)).abs();
        worst = worst.max(dh).max(da);
        check(dh < 1e-9 && da < 1e-9, format!("pair {n}: distance error hd {dh:e} assd {da:e}"))?;
    }
    let secs = t0.elapsed().as_secs_f64();
    check(secs < 60.0, format!("took {secs:.1} s"))?;
    Ok(format!("{} pairs, max distance error {worst:.1e}, {secs:.2} s", suite.len()))
}

fn edt_exact() -> Outcome {
    let mut spacings = std::collections::BTreeSet::new();
    for (n, (a, b)) in kit::mask_pair_suite().iter().enumerate() {
        for m in [a, b] {
            let s = m.grid().spacing();
            spacings.insert(format!("{s:?}"));
            let w = s.map(|v| v * v);
            let got = squared_distance_weighted(m, w).map_err(|e| e.to_string())?;
            check(got == oracle::sq_edt(m, w), format!("suite mask {n} (spacing {s:?}) differs"))?;
        }
    }
    let mut r = kit::rng(29);
    for n in 0..20 {
        let g = kit::grid([9, 8, 7], [1.0; 3]);
        let mut m = kit::noise_mask(&mut r, &g, 0.04);
        m.set(n % 9, 0, 0, true);
        let w = [25.0, 25.0, 36.0];
        let got = squared_distance_weighted(&m, w).map_err(|e| e.to_string())?;
        check(got.iter().all(|v| v.fract() == 0.0), format!("integer case {n}: non-integer output"))?;
        check(got == oracle::sq_edt(&m, w), format!("integer case {n} differs"))?;
    }
    Ok(format!("400 suite masks over spacings {spacings:?}, 20 integer-weight masks"))
}

fn component_threshold() -> Outcome {
    let g = kit::grid([30, 12, 6], [1.0; 3]);
    // 49 voxels = 7×7×1 slab at x 0..7; 50 = 10×5×1 slab at x 15..25
    let m = Mask::from_fn(g, |i, j, k| k == 2 && ((i < 7 && j < 7) || ((15..25).contains(&i) && j < 5)));
    check(m.count() == 99, "fixture")?;
    let mut kept = Vec::new();
    for conn in [Connectivity::Six, Connectivity::Eighteen, Connectivity::TwentySix] {
        let out = filter_small_components(&m, 50, conn).map_err(|e| e.to_string())?;
        let big = Mask::from_fn(m.grid().clone(), |i, j, k| m.get(i, j, k) && i >= 15);
        check(out == big, format!("{conn}: kept {} voxels", out.count()))?;
        kept.push(out.count());
    }
    Ok(format!("49-voxel component removed, 50-voxel kept ({kept:?})"))
}

fn phantom_recovery() -> Outcome {
    let mut parts = Vec::new();
    for (label, spec) in [
        ("clean", PhantomSpec::default()),
        ("sigma 8 + 10 speckles", PhantomSpec { noise_sigma: 8.0, speckle_count: 10, seed: 11, ..PhantomSpec::default() }),
    ] {
        let t0 = Instant::now();
        let c = generate(&spec).map_err(|e| e.to_string())?;
        let params = PipelineParams::new(Threshold::Value(c.midpoint_threshold()));
        let out = run_semi_auto(&c.dixon_fat, &c.gt_body_trufi, &params).map_err(|e| e.to_string())?;
        let secs = t0.elapsed().as_secs_f64();
        let d = metrics::dice(&out, &c.gt_fat_dixon).map_err(|e| e.to_string())?;
        let leaked = out.intersect(&c.artifacts).map_err(|e| e.to_string())?.count();
        let need = if spec.noise_sigma == 0.0 { 0.99 } else { 0.95 };
        check(d >= need, format!("{label}: Dice {d:.4} < {need}"))?;
        check(leaked == 0, format!("{label}: {leaked} speckle voxels survive"))?;
        check(spec.noise_sigma == 0.0 || c.artifacts.count() > 0, format!("{label}: no speckles generated"))?;
        check(secs < 30.0, format!("{label}: {secs:.1} s"))?;
        parts.push(format!("{label}: Dice {d:.4}, {leaked} speckle voxels, {secs:.2} s"));
    }
    Ok(parts.join("; "))
}

fn translation_coverage() -> Outcome {
    let mut parts = Vec::new();
    for t in [[7.0, 0.0, 0.0], [4.2, -5.6, 0.0]] {
        let c = generate(&PhantomSpec { translation_mm: t, ..PhantomSpec::default() }).map_err(|e| e.to_string())?;
        let (mapped, voi) = map_body_voi(c.dixon_fat.grid(), &c.gt_body_trufi, 5.0).map_err(|e| e.to_string())?;
        let gt = &c.gt_body_dixon;
        let covered = mapped.intersect(gt).map_err(|e| e.to_string())?.count() as f64 / gt.count() as f64;
        let [nx, ny, nz] = gt.grid().dims();
        let mut inside = 0usize;
        for k in 0..nz {
            for j in 0..ny {
                for i in 0..nx {
                    inside += (gt.get(i, j, k) && voi.contains(i, j, k)) as usize;
                }
            }
        }
        let boxed = inside as f64 / gt.count() as f64;
        check(covered >= 0.995, format!("{t:?}: coverage {:.3}%", 100.0 * covered))?;
        check(boxed == 1.0, format!("{t:?}: VOI holds {:.3}%", 100.0 * boxed))?;
        parts.push(format!("{t:?} mm: coverage {:.2}%, VOI {:.1}%", 100.0 * covered, 100.0 * boxed));
    }
    Ok(parts.join("; "))
}

fn rvd_exact() -> Outcome {
    // 10 mm voxels hold exactly 1 mL
    let g = kit::grid([10, 10, 10], [10.0; 3]);
    let body = Mask::from_fn(g.clone(), |_, _, _| true);
    let gt = Mask::from_fn(g.clone(), |_, _, k| k == 0);
    let pred = Mask::from_fn(g, |i, _, k| k == 0 || (k == 1 && i == 0));
    let vd = metrics::vd(&pred, &gt).map_err(|e| e.to_string())?;
    let rvd = metrics::rvd(&pred, &gt, &body).map_err(|e| e.to_string())?;
    check(metrics::volume_ml(&body) == 1000.0, "body volume")?;
    check(vd == 10.0, format!("vd {vd}"))?;
    check(rvd == 1.0, format!("rvd {rvd:e}"))?;
    Ok(format!("vd {vd} mL, body 1000 mL, rvd {rvd}%"))
}

fn t_distribution() -> Outcome {
    let c = t_cdf(1.0, 1.0).map_err(|e| e.to_string())?;
    check((c - 0.75).abs() < 1e-10, format!("t_cdf(1, 1) = {c}"))?;

    let x = [0.91, 0.87, 0.93, 0.89, 0.95];
    let y = [0.88, 0.85, 0.92, 0.84, 0.93];
    let r = t_test(&x, &y, TTestVariant::Paired).map_err(|e| e.to_string())?;
    let d: Vec<f64> = x.iter().zip(&y).map(|(a, b)| a - b).collect();
    let mean = d.iter().sum::<f64>() / 5.0;
    let sd = (d.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / 4.0).sqrt();
    let t_ref = mean / (sd / 5f64.sqrt());
    let p_ref = 2.0 * (1.0 - oracle::t4_cdf_simpson(t_ref.abs()));
    let (dt, dp) = ((r.t_statistic - t_ref).abs(), (r.p_value - p_ref).abs());
    check(r.degrees_of_freedom == 4.0, format!("df {}", r.degrees_of_freedom))?;
    check(dt < 1e-6 && dp < 1e-6, format!("t {} vs {t_ref}, p {} vs {p_ref}", r.t_statistic, r.p_value))?;

    let mut worst = 0.0f64;
    for n in 0..1000 {
        let t = -20.0 + 40.0 * (n as f64 + 0.5) / 1000.0;
        let df = [0.5, 1.0, 2.0, 3.0, 4.0, 7.5, 10.0, 30.0, 100.0, 1000.0][n % 10];
        let (lo, hi) = (t_cdf(-t, df).map_err(|e| e.to_string())?, t_cdf(t, df).map_err(|e| e.to_string())?);
        worst = worst.max((lo + hi - 1.0).abs());
    }
    check(worst < 1e-12, format!("symmetry error {worst:e}"))?;
    Ok(format!("t_cdf(1,1)={c}, paired |Δt|={dt:.1e} |Δp|={dp:.1e}, symmetry {worst:.1e}"))
}

fn nifti_round_trip() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let rows = [[-0.78, 0.0, 0.02, 81.5], [0.0, 0.78, 0.0, -64.25], [0.01, 0.0, 2.0, -95.0]];
    let g = Grid::new([13, 11, 9], [0.78, 0.78, 2.0], AffineTransform::from_rows(rows)).map_err(|e| e.to_string())?;
    let mut n = 0;
    for dt in Datatype::ALL {
        let data = (0..g.len())
            .map(|i| match dt {
                Datatype::UInt8 => (i * 7 % 256) as f32,
                Datatype::Int16 => ((i % 1200) as f32 - 600.0) * 53.0,
                Datatype::Float32 | Datatype::Float64 => (i as f32 * 0.731).cos() * 1234.5 + 1e-7 * i as f32,
            })
            .collect();
        let v = Volume::new(g.clone(), data).map_err(|e| e.to_string())?;
        for big_endian in [false, true] {
            for name in ["v.nii", "v.nii.gz"] {
                let path = dir.path().join(format!("{}_{big_endian}_{name}", dt.name()));
                let opts = WriteOptions { big_endian, ..WriteOptions::new(dt) };
                write_nifti(&v, &path, &opts).map_err(|e| e.to_string())?;
                let back = read_nifti(&path).map_err(|e| e.to_string())?;
                let bits = |v: &Volume| v.data().iter().map(|x| x.to_bits()).collect::<Vec<_>>();
                check(back.grid() == v.grid(), format!("{path:?}: geometry changed"))?;
                check(bits(&back) == bits(&v), format!("{path:?}: voxel bits changed"))?;
                let again = encode_nifti(&back, &opts).map_err(|e| e.to_string())?;
                check(again == encode_nifti(&v, &opts).map_err(|e| e.to_string())?, format!("{path:?}: re-encode differs"))?;
                n += 1;
            }
        }
    }
    Ok(format!("{n} files over {} datatypes, both byte orders, plain and gzip", Datatype::ALL.len()))
}

fn parallel_determinism() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let mut list = String::from("case_id,pred,gt,body,correction_time_s\n");
    for n in 0..10u64 {
        let spec = PhantomSpec {
            noise_sigma: 4.0 + n as f64,
            speckle_count: n as usize,
            translation_mm: [n as f64 * 0.7, -(n as f64) * 0.4, 0.0],
            seed: n,
            ..PhantomSpec::default()
        };
        let c = generate(&spec).map_err(|e| e.to_string())?;
        let mut p = PipelineParams::new(Threshold::Value(c.midpoint_threshold()));
        p.min_component_voxels = 1;
        let pred = run_semi_auto(&c.dixon_fat, &c.gt_body_trufi, &p).map_err(|e| e.to_string())?;
        let case = dir.path().join(format!("p{n}"));
        fs::create_dir(&case).map_err(|e| e.to_string())?;
        for (name, m) in [("pred", &pred), ("gt", &c.gt_fat_dixon), ("body", &c.gt_body_dixon)] {
            write_mask(m, case.join(format!("{name}.nii.gz"))).map_err(|e| e.to_string())?;
        }
        list += &format!("p{n},p{n}/pred.nii.gz,p{n}/gt.nii.gz,p{n}/body.nii.gz,{}\n", 30 + n);
    }
    let cases = dir.path().join("cases.csv");
    fs::write(&cases, list).map_err(|e| e.to_string())?;
    let run = |threads: &str| -> Result<Vec<u8>, String> {
        let out = dir.path().join(format!("m{threads}.csv"));
        let status = Command::new(env!("CARGO_BIN_EXE_volseg"))
            .args(["evaluate", "--cases"])
            .arg(&cases)
            .arg("--out")
            .arg(&out)
            .args(["--threads", threads])
            .env_remove("VOLSEG_CONFIG")
            .status()
            .map_err(|e| e.to_string())?;
        check(status.success(), format!("--threads {threads} exited with {status}"))?;
        fs::read(&out).map_err(|e| e.to_string())
    };
    let (one, eight) = (run("1")?, run("8")?);
    check(one == eight, "CSVs differ")?;
    let lines = String::from_utf8_lossy(&one).lines().count();
    check(lines == 11, format!("{lines} lines"))?;
    Ok(format!("10 cases, {} identical bytes", one.len()))
}

fn large_evaluation() -> Outcome {
    let g = Grid::axis_aligned([256, 256, 128], [1.0, 1.0, 2.0], [0.0; 3]).map_err(|e| e.to_string())?;
    let ellipsoid = |c: [f64; 3], r: [f64; 3]| {
        Mask::from_fn(g.clone(), move |i, j, k| {
            let p = [i as f64, j as f64, k as f64];
            (0..3).map(|a| ((p[a] - c[a]) / r[a]).powi(2)).sum::<f64>() <= 1.0
        })
    };
    let body = ellipsoid([128.0, 128.0, 64.0], [110.0, 100.0, 60.0]);
    let gt = ellipsoid([128.0, 128.0, 64.0], [80.0, 70.0, 40.0]);
    let pred = ellipsoid([131.0, 126.0, 65.0], [78.0, 72.0, 39.0]);
    let t0 = Instant::now();
    let r = evaluate_case(&pred, &gt, &body, "large").map_err(|e| e.to_string())?;
    let secs = t0.elapsed().as_secs_f64();
    check(r.values().iter().all(|v| v.is_finite()), "non-finite metric")?;
    check(secs < 10.0, format!("{secs:.2} s"))?;
    Ok(format!("Dice {:.4}, HD {:.2} mm, {secs:.2} s", r.dice, r.hausdorff_mm))
}

fn main() {
    let criteria: [Criterion; 10] = [
        ("metrics match brute-force oracles on 200 random pairs", metrics_vs_oracles),
        ("distance transform is exact on anisotropic spacings", edt_exact),
        ("component filter drops 49 voxels and keeps 50", component_threshold),
        ("phantom fat recovered, speckles removed", phantom_recovery),
        ("mapped body covers the Dixon body under 7 mm translation", translation_coverage),
        ("rvd of 10 mL over 1000 mL is exactly 1%", rvd_exact),
        ("t distribution and paired test match references", t_distribution),
        ("NIfTI round trip is bit-exact", nifti_round_trip),
        ("evaluate output is independent of thread count", parallel_determinism),
        ("five metrics on 256x256x128 within 10 s", large_evaluation),
    ];
    // silence the default panic message; the FAIL line carries it
    std::panic::set_hook(Box::new(|_| {}));
    let mut failed = 0;
    for (n, (name, f)) in criteria.iter().enumerate() {
        let outcome = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panic".into());
            Err(format!("panicked: {msg}"))
        });
        match outcome {
            Ok(detail) => println!("PASS {:>2} {name}: {detail}", n + 1),
            Err(why) => {
                failed += 1;
                println!("FAIL {:>2} {name}: {why}", n + 1);
            }
        }
    }
    println!("{}/{} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
