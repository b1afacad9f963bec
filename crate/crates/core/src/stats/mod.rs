//! Cohort summaries and two-sided t-tests over metric records.

pub mod special;

use std::fmt::{self, Write as _};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

pub use special::{ln_gamma, regularized_incomplete_beta, t_cdf, t_two_sided_p};

use crate::error::{Error, Result};
use crate::metrics::MetricsRecord;

pub const SIGNIFICANCE_LEVEL: f64 = 0.05;

/// The metrics reported per cohort, in table order.
pub const METRIC_NAMES: [&str; 5] = ["dice", "hausdorff_mm", "assd_mm", "vd_ml", "rvd_percent"];

const METRIC_LABELS: [&str; 5] = ["Dice", "Hausdorff [mm]", "ASSD [mm]", "VD [mL]", "RVD [%]"];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricSummary {
    pub mean: f64,
    /// Sample standard deviation (n − 1 denominator); 0 for a single value.
    pub std: f64,
    pub min: f64,
    pub max: f64,
}

/// Summary statistics of one sample. Values are summed in sorted order so
/// the result does not depend on input order.
pub fn describe(values: &[f64]) -> Result<MetricSummary> {
    if values.is_empty() {
        return Err(Error::EmptyCohort);
    }
    if let Some(bad) = values.iter().find(|v| !v.is_finite()) {
        return Err(Error::Input(format!("non-finite value {bad} in sample")));
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    let (min, max) = (sorted[0], sorted[sorted.len() - 1]);
    let mean = (sorted.iter().sum::<f64>() / n).clamp(min, max);
    let std = if sorted.len() < 2 {
        0.0
    } else {
        let mut dev: Vec<f64> = sorted.iter().map(|v| (v - mean) * (v - mean)).collect();
        dev.sort_by(f64::total_cmp);
        (dev.iter().sum::<f64>() / (n - 1.0)).sqrt()
    };
    Ok(MetricSummary { mean, std, min, max })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudySummary {
    pub n: usize,
    /// Set when `n == 1`; every std is then 0 by convention.
    pub single_case: bool,
    pub dice: MetricSummary,
    pub hausdorff_mm: MetricSummary,
    pub assd_mm: MetricSummary,
    pub vd_ml: MetricSummary,
    pub rvd_percent: MetricSummary,
    /// Over the records that carry a correction time, if any do.
    pub correction_time_s: Option<MetricSummary>,
}

impl StudySummary {
    pub fn metrics(&self) -> [(&'static str, &MetricSummary); 5] {
        [
            (METRIC_NAMES[0], &self.dice),
            (METRIC_NAMES[1], &self.hausdorff_mm),
            (METRIC_NAMES[2], &self.assd_mm),
            (METRIC_NAMES[3], &self.vd_ml),
            (METRIC_NAMES[4], &self.rvd_percent),
        ]
    }

    /// Aligned text table with one row per metric and mean/std/min/max
    /// columns.
    pub fn to_table(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "n = {}{}", self.n, if self.single_case { " (single case, std = 0)" } else { "" });
        let _ = writeln!(out, "{:<16}{:>12}{:>12}{:>12}{:>12}", "", "mean", "std", "min", "max");
        let mut row = |label: &str, s: &MetricSummary| {
            let _ = writeln!(
                out,
                "{:<16}{:>12.3}{:>12.3}{:>12.3}{:>12.3}",
                label, s.mean, s.std, s.min, s.max
            );
        };
        for (label, (_, s)) in METRIC_LABELS.iter().zip(self.metrics()) {
            row(label, s);
        }
        if let Some(t) = &self.correction_time_s {
            row("Correction [s]", t);
        }
        out
    }

    /// `metric,mean,std,min,max` rows with six decimals.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("metric,n,mean,std,min,max\n");
        let mut row = |name: &str, s: &MetricSummary| {
            let _ = writeln!(out, "{name},{},{:.6},{:.6},{:.6},{:.6}", self.n, s.mean, s.std, s.min, s.max);
        };
        for (name, s) in self.metrics() {
            row(name, s);
        }
        if let Some(t) = &self.correction_time_s {
            row("correction_time_s", t);
        }
        out
    }
}

pub fn summarize(records: &[MetricsRecord]) -> Result<StudySummary> {
    if records.is_empty() {
        return Err(Error::EmptyCohort);
    }
    let column = |f: fn(&MetricsRecord) -> f64| -> Result<MetricSummary> {
        describe(&records.iter().map(f).collect::<Vec<_>>())
    };
    let times: Vec<f64> = records
        .iter()
        .filter_map(|r| r.correction_time_s.map(|t| t as f64))
        .collect();
    Ok(StudySummary {
        n: records.len(),
        single_case: records.len() == 1,
        dice: column(|r| r.dice)?,
        hausdorff_mm: column(|r| r.hausdorff_mm)?,
        assd_mm: column(|r| r.assd_mm)?,
        vd_ml: column(|r| r.vd_ml)?,
        rvd_percent: column(|r| r.rvd_percent)?,
        correction_time_s: if times.is_empty() { None } else { Some(describe(&times)?) },
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TTestVariant {
    #[default]
    Paired,
    Welch,
}

impl fmt::Display for TTestVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TTestVariant::Paired => "paired",
            TTestVariant::Welch => "welch",
        })
    }
}

impl FromStr for TTestVariant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "paired" => Ok(Self::Paired),
            "welch" => Ok(Self::Welch),
            _ => Err(Error::Input(format!("t-test variant must be paired or welch, got '{s}'"))),
        }
    }
}

/// Two-sided t-test outcome. Serializes as
/// `{"t", "df", "p", "variant", "significant_at_0_05"}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TTestResult {
    #[serde(rename = "t")]
    pub t_statistic: f64,
    #[serde(rename = "df")]
    pub degrees_of_freedom: f64,
    #[serde(rename = "p")]
    pub p_value: f64,
    pub variant: TTestVariant,
    #[serde(rename = "significant_at_0_05")]
    pub significant: bool,
}

fn mean_var(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let var = v.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
    (mean, var)
}

fn finish(t: f64, df: f64, variant: TTestVariant) -> Result<TTestResult> {
    let p = t_two_sided_p(t, df)?.clamp(0.0, 1.0);
    Ok(TTestResult {
        t_statistic: t,
        degrees_of_freedom: df,
        p_value: p,
        variant,
        significant: p < SIGNIFICANCE_LEVEL,
    })
}

/// Two-sided t-test of `x` against `y`; the statistic's sign follows
/// `x − y`.
pub fn t_test(x: &[f64], y: &[f64], variant: TTestVariant) -> Result<TTestResult> {
    if x.iter().chain(y).any(|v| !v.is_finite()) {
        return Err(Error::Input("t-test samples must be finite".into()));
    }
    match variant {
        TTestVariant::Paired => {
            if x.len() != y.len() {
                return Err(Error::Input(format!(
                    "paired t-test needs equal lengths, got {} and {}",
                    x.len(),
                    y.len()
                )));
            }
            if x.len() < 2 {
                return Err(Error::Input("paired t-test needs at least 2 pairs".into()));
            }
            let diffs: Vec<f64> = x.iter().zip(y).map(|(a, b)| a - b).collect();
            let (mean, var) = mean_var(&diffs);
            if var == 0.0 {
                return Err(Error::DegenerateVariance(
                    "all paired differences are equal".into(),
                ));
            }
            let n = diffs.len() as f64;
            finish(mean / (var.sqrt() / n.sqrt()), n - 1.0, variant)
        }
        TTestVariant::Welch => {
            if x.len() < 2 || y.len() < 2 {
                return Err(Error::Input("Welch t-test needs at least 2 values per sample".into()));
            }
            let (mx, vx) = mean_var(x);
            let (my, vy) = mean_var(y);
            let (nx, ny) = (x.len() as f64, y.len() as f64);
            let (ex, ey) = (vx / nx, vy / ny);
            let se2 = ex + ey;
            if se2 == 0.0 {
                return Err(Error::DegenerateVariance("both samples are constant".into()));
            }
            let df = se2 * se2 / (ex * ex / (nx - 1.0) + ey * ey / (ny - 1.0));
            finish((mx - my) / se2.sqrt(), df, variant)
        }
    }
}
