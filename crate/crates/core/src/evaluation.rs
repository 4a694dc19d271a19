//! Accuracy and runtime metrics, and their CSV/JSON reports.

use std::fmt::Write as _;

use crate::error::{HifError, Result};
use crate::global_map::PointClass;

/// Reference label of a point.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum GroundTruth {
    Static,
    Dynamic,
    /// Unlabeled points; they count toward nothing.
    Excluded,
}

/// Static, dynamic and associated accuracy in percent. A rate is `None`
/// when its ground-truth class is empty; the associated accuracy is `None`
/// unless both rates exist.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct AccuracyReport {
    pub sa: Option<f64>,
    pub da: Option<f64>,
    pub aa: Option<f64>,
    pub static_total: u64,
    pub static_kept: u64,
    pub dynamic_total: u64,
    pub dynamic_removed: u64,
    pub excluded: u64,
}

impl AccuracyReport {
    /// Adds the counts of another report and recomputes the rates.
    pub fn merge(&self, other: &AccuracyReport) -> AccuracyReport {
        from_counts(
            self.static_total + other.static_total,
            self.static_kept + other.static_kept,
            self.dynamic_total + other.dynamic_total,
            self.dynamic_removed + other.dynamic_removed,
            self.excluded + other.excluded,
        )
    }
}

fn from_counts(st: u64, sk: u64, dt: u64, dr: u64, ex: u64) -> AccuracyReport {
    let pct = |num: u64, den: u64| (den > 0).then(|| 100.0 * num as f64 / den as f64);
    let sa = pct(sk, st);
    let da = pct(dr, dt);
    let aa = match (sa, da) {
        (Some(s), Some(d)) => Some((s * d).sqrt()),
        _ => None,
    };
    AccuracyReport {
        sa,
        da,
        aa,
        static_total: st,
        static_kept: sk,
        dynamic_total: dt,
        dynamic_removed: dr,
        excluded: ex,
    }
}

/// Scores predictions against ground truth.
pub fn score(predicted: &[PointClass], truth: &[GroundTruth]) -> Result<AccuracyReport> {
    if predicted.len() != truth.len() {
        return Err(HifError::LabelMismatch {
            labels: truth.len(),
            points: predicted.len(),
        });
    }
    let (mut st, mut sk, mut dt, mut dr, mut ex) = (0, 0, 0, 0, 0);
    for (p, g) in predicted.iter().zip(truth) {
        match g {
            GroundTruth::Static => {
                st += 1;
                sk += u64::from(*p == PointClass::Static);
            }
            GroundTruth::Dynamic => {
                dt += 1;
                dr += u64::from(*p == PointClass::Dynamic);
            }
            GroundTruth::Excluded => ex += 1,
        }
    }
    Ok(from_counts(st, sk, dt, dr, ex))
}

/// Per-scan timing summary.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct RuntimeReport {
    pub scans: usize,
    pub mean_ms: f64,
    /// Population standard deviation.
    pub std_ms: f64,
    pub fps: f64,
    pub peak_memory_mb: Option<f64>,
}

/// Summarizes per-scan integration times in milliseconds.
pub fn runtime_stats(times_ms: &[f64]) -> Result<RuntimeReport> {
    if times_ms.is_empty() {
        return Err(HifError::Validation("no timings to summarize".into()));
    }
    if times_ms.iter().any(|t| !t.is_finite() || *t < 0.0) {
        return Err(HifError::Validation(
            "timings must be finite and non-negative".into(),
        ));
    }
    let n = times_ms.len() as f64;
    let mean = times_ms.iter().sum::<f64>() / n;
    let var = times_ms.iter().map(|t| (t - mean).powi(2)).sum::<f64>() / n;
    Ok(RuntimeReport {
        scans: times_ms.len(),
        mean_ms: mean,
        std_ms: var.sqrt(),
        fps: if mean > 0.0 {
            1000.0 / mean
        } else {
            f64::INFINITY
        },
        peak_memory_mb: peak_memory_mb(),
    })
}

/// Peak resident set size of this process, where the platform reports it.
pub fn peak_memory_mb() -> Option<f64> {
    let status = std::fs::read_to_string("/proc/self/status").ok()?;
    let line = status.lines().find(|l| l.starts_with("VmHWM:"))?;
    let kb: f64 = line.split_whitespace().nth(1)?.parse().ok()?;
    Some(kb / 1024.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Csv,
    Json,
}

impl std::str::FromStr for ReportFormat {
    type Err = HifError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "csv" => Ok(Self::Csv),
            "json" => Ok(Self::Json),
            _ => Err(HifError::config(
                "format",
                format!("unknown report format `{s}`"),
            )),
        }
    }
}

const FIELDS: [&str; 13] = [
    "sa",
    "da",
    "aa",
    "static_total",
    "static_kept",
    "dynamic_total",
    "dynamic_removed",
    "excluded",
    "scans",
    "mean_ms",
    "std_ms",
    "fps",
    "peak_memory_mb",
];

fn fmt_opt(v: Option<f64>, digits: usize) -> Option<String> {
    v.filter(|x| x.is_finite()).map(|x| format!("{x:.digits$}"))
}

fn report_values(
    acc: Option<&AccuracyReport>,
    rt: Option<&RuntimeReport>,
) -> Vec<(&'static str, Option<String>)> {
    let count = |f: fn(&AccuracyReport) -> u64| acc.map(|a| f(a).to_string());
    let values = [
        fmt_opt(acc.and_then(|a| a.sa), 2),
        fmt_opt(acc.and_then(|a| a.da), 2),
        fmt_opt(acc.and_then(|a| a.aa), 2),
        count(|a| a.static_total),
        count(|a| a.static_kept),
        count(|a| a.dynamic_total),
        count(|a| a.dynamic_removed),
        count(|a| a.excluded),
        rt.map(|r| r.scans.to_string()),
        fmt_opt(rt.map(|r| r.mean_ms), 3),
        fmt_opt(rt.map(|r| r.std_ms), 3),
        fmt_opt(rt.map(|r| r.fps), 2),
        fmt_opt(rt.and_then(|r| r.peak_memory_mb), 1),
    ];
    FIELDS.into_iter().zip(values).collect()
}

/// Renders a report with a fixed field order. Percentages carry two
/// decimals and milliseconds three; absent values are empty in CSV and
/// `null` in JSON.
pub fn emit_report(
    acc: Option<&AccuracyReport>,
    rt: Option<&RuntimeReport>,
    format: ReportFormat,
) -> String {
    let values = report_values(acc, rt);
    match format {
        ReportFormat::Csv => {
            let header: Vec<&str> = values.iter().map(|(k, _)| *k).collect();
            let row: Vec<String> = values
                .iter()
                .map(|(_, v)| v.clone().unwrap_or_default())
                .collect();
            format!("{}\n{}\n", header.join(","), row.join(","))
        }
        ReportFormat::Json => {
            let mut out = String::from("{");
            for (i, (k, v)) in values.iter().enumerate() {
                if i > 0 {
                    out.push_str(", ");
                }
                let _ = write!(out, "\"{k}\": {}", v.as_deref().unwrap_or("null"));
            }
            out.push_str("}\n");
            out
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use PointClass::{Dynamic as PD, Static as PS};

    #[test]
    fn rates_from_counts() {
        let truth = [
            GroundTruth::Static,
            GroundTruth::Static,
            GroundTruth::Dynamic,
            GroundTruth::Dynamic,
            GroundTruth::Excluded,
        ];
        let r = score(&[PS, PD, PD, PD, PS], &truth).unwrap();
        assert_eq!(r.sa, Some(50.0));
        assert_eq!(r.da, Some(100.0));
        assert!((r.aa.unwrap() - 50f64.sqrt() * 10.0).abs() < 1e-12);
        assert_eq!(r.excluded, 1);
    }

    #[test]
    fn absent_classes_give_no_rate() {
        let r = score(&[PS, PS], &[GroundTruth::Static, GroundTruth::Static]).unwrap();
        assert_eq!(r.sa, Some(100.0));
        assert_eq!(r.da, None);
        assert_eq!(r.aa, None);
        let r = score(&[], &[]).unwrap();
        assert_eq!((r.sa, r.da, r.aa), (None, None, None));
    }

    #[test]
    fn score_length_mismatch() {
        assert!(matches!(
            score(&[PS], &[]),
            Err(HifError::LabelMismatch { .. })
        ));
    }

    #[test]
    fn merge_pools_counts() {
        let a = score(&[PS, PD], &[GroundTruth::Static, GroundTruth::Static]).unwrap();
        let b = score(&[PD], &[GroundTruth::Dynamic]).unwrap();
        let m = a.merge(&b);
        assert_eq!(m.sa, Some(50.0));
        assert_eq!(m.da, Some(100.0));
    }

    #[test]
    fn runtime_summary() {
        let r = runtime_stats(&[10.0, 20.0, 30.0]).unwrap();
        assert_eq!(r.mean_ms, 20.0);
        assert!((r.std_ms - (200.0f64 / 3.0).sqrt()).abs() < 1e-12);
        assert_eq!(r.fps, 50.0);
        assert!(runtime_stats(&[]).is_err());
        assert!(runtime_stats(&[f64::NAN]).is_err());
    }

    #[test]
    fn report_formats() {
        let acc = score(&[PS, PD], &[GroundTruth::Static, GroundTruth::Dynamic]).unwrap();
        let rt = RuntimeReport {
            scans: 2,
            mean_ms: 1.23456,
            std_ms: 0.5,
            fps: 810.0,
            peak_memory_mb: None,
        };
        let csv = emit_report(Some(&acc), Some(&rt), ReportFormat::Csv);
        let mut lines = csv.lines();
        assert!(lines.next().unwrap().starts_with("sa,da,aa,"));
        assert_eq!(
            lines.next().unwrap(),
            "100.00,100.00,100.00,1,1,1,1,0,2,1.235,0.500,810.00,"
        );

        let json = emit_report(Some(&acc), None, ReportFormat::Json);
        let parsed: serde_json::Value = serde_json::from_str(&json).unwrap();
        assert_eq!(parsed["sa"], 100.0);
        assert!(parsed["mean_ms"].is_null());

        let none = score(&[PS], &[GroundTruth::Static]).unwrap();
        let json = emit_report(Some(&none), None, ReportFormat::Json);
        let parsed: serde_json::Value = serde_json::from_str(&json).unwrap();
        assert!(parsed["da"].is_null());
    }

    #[test]
    fn format_parse() {
        assert_eq!("CSV".parse::<ReportFormat>().unwrap(), ReportFormat::Csv);
        assert!("xml".parse::<ReportFormat>().is_err());
    }
}
