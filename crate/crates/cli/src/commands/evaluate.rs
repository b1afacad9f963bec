use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use volseg_core::metrics::{evaluate_case, write_metrics_csv, MetricsRecord, MetricsRow};
use volseg_core::nifti::read_mask;

use super::{require_file, with_threads};
use crate::config::FileConfig;
use crate::error::{CliError, CliResult, EXIT_FAILURE, EXIT_OK};
use crate::EvaluateArgs;

#[derive(Debug, Clone, PartialEq)]
pub struct CaseSpec {
    pub case_id: String,
    pub pred: PathBuf,
    pub gt: PathBuf,
    pub body: PathBuf,
    pub correction_time_s: Option<u64>,
}

/// Read a cohort CSV with columns `case_id,pred,gt,body` and an optional
/// `correction_time_s`.
pub fn load_cases(path: &Path) -> CliResult<Vec<CaseSpec>> {
    let bad = |msg: String| CliError::usage(format!("{}: {msg}", path.display()));
    let mut r = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| bad(e.to_string()))?;
    let headers = r.headers().map_err(|e| bad(e.to_string()))?.clone();
    let col = |name: &str| headers.iter().position(|h| h == name);
    let (Some(id), Some(pred), Some(gt), Some(body)) = (col("case_id"), col("pred"), col("gt"), col("body")) else {
        return Err(bad("header must contain case_id, pred, gt and body".into()));
    };
    let time = col("correction_time_s");
    let base = path.parent().unwrap_or(Path::new("."));
    let mut out = Vec::new();
    for (n, rec) in r.records().enumerate() {
        let rec = rec.map_err(|e| bad(e.to_string()))?;
        let field = |i: usize| rec.get(i).unwrap_or("");
        let correction_time_s = match time.map(field).filter(|s| !s.is_empty()) {
            Some(t) => Some(t.parse::<u64>().map_err(|_| {
                bad(format!("line {}: correction_time_s must be an integer, got '{t}'", n + 2))
            })?),
            None => None,
        };
        out.push(CaseSpec {
            case_id: field(id).to_string(),
            pred: base.join(field(pred)),
            gt: base.join(field(gt)),
            body: base.join(field(body)),
            correction_time_s,
        });
    }
    if out.is_empty() {
        return Err(bad("no cases listed".into()));
    }
    Ok(out)
}

fn evaluate_one(c: &CaseSpec) -> MetricsRow {
    let result = (|| -> volseg_core::Result<MetricsRecord> {
        let pred = read_mask(&c.pred)?;
        let gt = read_mask(&c.gt)?;
        let body = read_mask(&c.body)?;
        evaluate_case(&pred, &gt, &body, &c.case_id)
    })();
    match result {
        Ok(mut r) => {
            r.correction_time_s = c.correction_time_s;
            MetricsRow::Ok(r)
        }
        Err(e) => MetricsRow::Error { case_id: c.case_id.clone(), reason: e.to_string() },
    }
}

pub fn run(args: EvaluateArgs) -> CliResult<i32> {
    let cfg = FileConfig::load(args.config.as_deref())?;
    let cases = match (&args.cases, &args.pred, &args.gt, &args.body) {
        (Some(list), _, _, _) => load_cases(list)?,
        (None, Some(pred), Some(gt), Some(body)) => {
            require_file("pred", pred)?;
            require_file("gt", gt)?;
            require_file("body", body)?;
            vec![CaseSpec {
                case_id: args.case_id.clone(),
                pred: pred.clone(),
                gt: gt.clone(),
                body: body.clone(),
                correction_time_s: args.correction_time_s,
            }]
        }
        _ => return Err(CliError::usage("give --cases, or all of --pred, --gt and --body")),
    };

    let rows: Vec<MetricsRow> = with_threads(args.threads.or(cfg.threads), || {
        Ok(cases.par_iter().map(evaluate_one).collect())
    })?;

    let sink: Box<dyn Write> = match &args.out {
        Some(p) => Box::new(BufWriter::new(
            File::create(p).map_err(|e| CliError::failure(format!("cannot create {}: {e}", p.display())))?,
        )),
        None => Box::new(io::stdout().lock()),
    };
    write_metrics_csv(sink, &rows).map_err(CliError::output)?;

    let failed: Vec<&MetricsRow> = rows.iter().filter(|r| r.record().is_none()).collect();
    for row in &failed {
        if let MetricsRow::Error { case_id, reason } = row {
            eprintln!("error: case {case_id}: {reason}");
        }
    }
    if let Some(p) = &args.out {
        eprintln!("{}: {} rows, {} failed", p.display(), rows.len(), failed.len());
    }
    Ok(if failed.is_empty() { EXIT_OK } else { EXIT_FAILURE })
}
