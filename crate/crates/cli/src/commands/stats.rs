use std::collections::{HashMap, HashSet};
use std::fmt::Write as _;
use std::fs::File;
use std::path::Path;

use serde_json::{json, Map, Value};
use volseg_core::metrics::{read_metrics_csv, MetricsRecord};
use volseg_core::stats::{summarize, t_test, StudySummary, TTestVariant, METRIC_NAMES};
use volseg_core::Error;

use crate::error::{CliError, CliResult, EXIT_OK};
use crate::{StatsArgs, SummaryFormat};

fn load(path: &Path) -> CliResult<Vec<MetricsRecord>> {
    let file = File::open(path).map_err(|e| CliError::usage(format!("cannot open {}: {e}", path.display())))?;
    let rows = read_metrics_csv(file).map_err(|e| CliError::usage(format!("{}: {e}", path.display())))?;
    let mut out = Vec::with_capacity(rows.len());
    for row in rows {
        match row.record() {
            Some(r) => out.push(r.clone()),
            None => eprintln!("warning: {}: skipping failed case {}", path.display(), row.case_id()),
        }
    }
    Ok(out)
}

fn metric_values(records: &[MetricsRecord], metric: &str) -> Option<Vec<f64>> {
    let pick = |r: &MetricsRecord| -> Option<f64> {
        Some(match metric {
            "dice" => r.dice,
            "hausdorff_mm" => r.hausdorff_mm,
            "assd_mm" => r.assd_mm,
            "vd_ml" => r.vd_ml,
            "rvd_percent" => r.rvd_percent,
            "correction_time_s" => r.correction_time_s? as f64,
            _ => return None,
        })
    };
    records.iter().map(pick).collect()
}

fn csv_rows(source: &Path, s: &StudySummary, out: &mut String) {
    let mut row = |name: &str, m: &volseg_core::stats::MetricSummary| {
        let _ = writeln!(
            out,
            "{},{name},{},{:.6},{:.6},{:.6},{:.6}",
            source.display(),
            s.n,
            m.mean,
            m.std,
            m.min,
            m.max
        );
    };
    for (name, m) in s.metrics() {
        row(name, m);
    }
    if let Some(t) = &s.correction_time_s {
        row("correction_time_s", t);
    }
}

/// Align `y` to `x` by case id; the id sets must match exactly.
fn pair_up(x: &[MetricsRecord], y: &[MetricsRecord]) -> CliResult<Vec<MetricsRecord>> {
    let ids = |r: &[MetricsRecord]| -> CliResult<HashSet<String>> {
        let mut seen = HashSet::new();
        for rec in r {
            if !seen.insert(rec.case_id.clone()) {
                return Err(CliError::usage(format!("duplicate case_id '{}' in paired input", rec.case_id)));
            }
        }
        Ok(seen)
    };
    let (ix, iy) = (ids(x)?, ids(y)?);
    if ix != iy {
        let mut only_x: Vec<_> = ix.difference(&iy).cloned().collect();
        let mut only_y: Vec<_> = iy.difference(&ix).cloned().collect();
        only_x.sort();
        only_y.sort();
        return Err(CliError::usage(format!(
            "paired test needs the same case_id set in both inputs (only in first: {only_x:?}; only in second: {only_y:?})"
        )));
    }
    let by_id: HashMap<&str, &MetricsRecord> = y.iter().map(|r| (r.case_id.as_str(), r)).collect();
    Ok(x.iter().map(|r| by_id[r.case_id.as_str()].clone()).collect())
}

fn compare(x: &[MetricsRecord], y: &[MetricsRecord], variant: TTestVariant) -> CliResult<Value> {
    let y = match variant {
        TTestVariant::Paired => pair_up(x, y)?,
        TTestVariant::Welch => y.to_vec(),
    };
    let mut out = Map::new();
    let metrics = METRIC_NAMES.iter().copied().chain(std::iter::once("correction_time_s"));
    for metric in metrics {
        let (Some(a), Some(b)) = (metric_values(x, metric), metric_values(&y, metric)) else {
            continue;
        };
        let entry = match t_test(&a, &b, variant) {
            Ok(r) => serde_json::to_value(r).map_err(|e| CliError::failure(e.to_string()))?,
            Err(Error::DegenerateVariance(msg)) => {
                eprintln!("notice: {metric}: degenerate variance ({msg}); no t-test");
                json!({ "variant": variant, "notice": format!("degenerate variance: {msg}") })
            }
            Err(e) => return Err(CliError::usage(format!("{metric}: {e}"))),
        };
        out.insert(metric.to_string(), entry);
    }
    Ok(Value::Object(out))
}

pub fn run(args: StatsArgs) -> CliResult<i32> {
    let cohorts: Vec<Vec<MetricsRecord>> = args.inputs.iter().map(|p| load(p)).collect::<CliResult<_>>()?;
    let mut text = String::new();
    if args.format == SummaryFormat::Csv {
        text.push_str("source,metric,n,mean,std,min,max\n");
    }
    for (path, records) in args.inputs.iter().zip(&cohorts) {
        let s = summarize(records).map_err(|e| CliError::usage(format!("{}: {e}", path.display())))?;
        match args.format {
            SummaryFormat::Text => {
                if args.inputs.len() > 1 {
                    let _ = writeln!(text, "== {} ==", path.display());
                }
                text.push_str(&s.to_table());
            }
            SummaryFormat::Csv => csv_rows(path, &s, &mut text),
        }
    }
    print!("{text}");

    if cohorts.len() == 2 {
        let variant = if args.welch { TTestVariant::Welch } else { TTestVariant::Paired };
        let tests = compare(&cohorts[0], &cohorts[1], variant)?;
        let body = serde_json::to_string_pretty(&tests).map_err(|e| CliError::failure(e.to_string()))? + "\n";
        match &args.ttest_out {
            Some(p) => std::fs::write(p, body)
                .map_err(|e| CliError::failure(format!("cannot write {}: {e}", p.display())))?,
            None => print!("{body}"),
        }
    } else if args.ttest_out.is_some() || args.welch || args.paired {
        eprintln!("warning: t-tests need two inputs; only the summary was produced");
    }
    Ok(EXIT_OK)
}
