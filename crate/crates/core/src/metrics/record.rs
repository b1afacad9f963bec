use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const CSV_HEADER: [&str; 7] = [
    "case_id",
    "dice",
    "hausdorff_mm",
    "assd_mm",
    "vd_ml",
    "rvd_percent",
    "correction_time_s",
];

/// One evaluated case.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsRecord {
    pub case_id: String,
    pub dice: f64,
    pub hausdorff_mm: f64,
    pub assd_mm: f64,
    pub vd_ml: f64,
    pub rvd_percent: f64,
    pub correction_time_s: Option<u64>,
}

impl MetricsRecord {
    /// The five metric values in CSV column order.
    pub fn values(&self) -> [f64; 5] {
        [self.dice, self.hausdorff_mm, self.assd_mm, self.vd_ml, self.rvd_percent]
    }
}

/// A CSV row: either metrics or a failed case. Failed cases carry
/// `ERROR: <reason>` in the dice column and leave the rest blank.
#[derive(Debug, Clone, PartialEq)]
pub enum MetricsRow {
    Ok(MetricsRecord),
    Error { case_id: String, reason: String },
}

impl MetricsRow {
    pub fn case_id(&self) -> &str {
        match self {
            MetricsRow::Ok(r) => &r.case_id,
            MetricsRow::Error { case_id, .. } => case_id,
        }
    }

    pub fn record(&self) -> Option<&MetricsRecord> {
        match self {
            MetricsRow::Ok(r) => Some(r),
            MetricsRow::Error { .. } => None,
        }
    }
}

const ERROR_PREFIX: &str = "ERROR";

fn fixed(v: f64) -> String {
    format!("{v:.6}")
}

pub fn write_metrics_csv<W: Write>(out: W, rows: &[MetricsRow]) -> Result<()> {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(out);
    w.write_record(CSV_HEADER)?;
    for row in rows {
        match row {
            MetricsRow::Ok(r) => {
                let time = r.correction_time_s.map(|t| t.to_string()).unwrap_or_default();
                w.write_record([
                    r.case_id.clone(),
                    fixed(r.dice),
                    fixed(r.hausdorff_mm),
                    fixed(r.assd_mm),
                    fixed(r.vd_ml),
                    fixed(r.rvd_percent),
                    time,
                ])?;
            }
            MetricsRow::Error { case_id, reason } => {
                let status = format!("{ERROR_PREFIX}: {reason}");
                w.write_record([case_id.as_str(), &status, "", "", "", "", ""])?;
            }
        }
    }
    w.flush().map_err(|e| Error::Csv(e.into()))?;
    Ok(())
}

pub fn read_metrics_csv<R: Read>(input: R) -> Result<Vec<MetricsRow>> {
    let mut r = csv::ReaderBuilder::new().flexible(false).from_reader(input);
    let header: Vec<String> = r.headers()?.iter().map(|h| h.trim().to_string()).collect();
    if header != CSV_HEADER {
        return Err(Error::Input(format!(
            "unexpected metrics CSV header {header:?}, expected {CSV_HEADER:?}"
        )));
    }
    let mut rows = Vec::new();
    for (n, rec) in r.records().enumerate() {
        let rec = rec?;
        let line = n + 2;
        let case_id = rec[0].to_string();
        if rec[1].starts_with(ERROR_PREFIX) {
            let reason = rec[1]
                .trim_start_matches(ERROR_PREFIX)
                .trim_start_matches(':')
                .trim()
                .to_string();
            rows.push(MetricsRow::Error { case_id, reason });
            continue;
        }
        let num = |col: usize| -> Result<f64> {
            rec[col].trim().parse::<f64>().map_err(|_| {
                Error::Input(format!(
                    "line {line}: column {} is not a number: '{}'",
                    CSV_HEADER[col], &rec[col]
                ))
            })
        };
        let time = rec[6].trim();
        let correction_time_s = if time.is_empty() {
            None
        } else {
            Some(time.parse::<u64>().map_err(|_| {
                Error::Input(format!("line {line}: correction_time_s must be an integer, got '{time}'"))
            })?)
        };
        rows.push(MetricsRow::Ok(MetricsRecord {
            case_id,
            dice: num(1)?,
            hausdorff_mm: num(2)?,
            assd_mm: num(3)?,
            vd_ml: num(4)?,
            rvd_percent: num(5)?,
            correction_time_s,
        }));
    }
    Ok(rows)
}
