//! Log-log least squares for the complexity coefficient `t ∝ n^α`.
//!
//! Logs are base 10. The confidence interval uses the normal quantile 1.96
//! rather than a t quantile.

use crate::bench::{BenchSample, Subject};
use serde::{Deserialize, Serialize};
use std::collections::HashMap;
use std::io::Write;

pub const Z95: f64 = 1.96;
pub const DEFAULT_WINDOW_DECADES: f64 = 0.5;
pub const DEFAULT_STEP_DECADES: f64 = 0.25;
/// Window slopes spreading more than this trigger the local-validity warning.
pub const LOCAL_SLOPE_SPREAD: f64 = 0.3;
pub const LOCAL_WARNING: &str = "power law only locally valid";

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum RegressionError {
    #[error("need at least 3 points, got {0}")]
    TooFewPoints(usize),
    #[error("all abscissae are equal")]
    DegenerateAbscissa,
    #[error("nonpositive or non-finite point (n = {n}, t = {t})")]
    NonPositive { n: f64, t: f64 },
    #[error("x and y lengths differ ({0} vs {1})")]
    LengthMismatch(usize, usize),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    pub alpha: f64,
    pub intercept: f64,
    /// Standard error of `alpha`.
    pub sigma: f64,
    pub ci95: (f64, f64),
    pub r2: f64,
    pub sample_count: usize,
}

impl FitReport {
    /// Report with a given slope and standard error; other fields zeroed.
    pub fn from_alpha_sigma(alpha: f64, sigma: f64) -> Self {
        Self {
            alpha,
            intercept: 0.0,
            sigma,
            ci95: ci95(alpha, sigma),
            r2: 0.0,
            sample_count: 0,
        }
    }
}

pub fn ci95(alpha: f64, sigma: f64) -> (f64, f64) {
    (alpha - Z95 * sigma, alpha + Z95 * sigma)
}

/// Ordinary least squares `y = alpha·x + intercept`.
pub fn fit_line(x: &[f64], y: &[f64]) -> Result<FitReport, RegressionError> {
    if x.len() != y.len() {
        return Err(RegressionError::LengthMismatch(x.len(), y.len()));
    }
    let n = x.len();
    if n < 3 {
        return Err(RegressionError::TooFewPoints(n));
    }
    let nf = n as f64;
    let mx = x.iter().sum::<f64>() / nf;
    let my = y.iter().sum::<f64>() / nf;
    let (mut sxx, mut sxy, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (dx, dy) = (a - mx, b - my);
        sxx += dx * dx;
        sxy += dx * dy;
        syy += dy * dy;
    }
    if sxx == 0.0 {
        return Err(RegressionError::DegenerateAbscissa);
    }
    let alpha = sxy / sxx;
    let intercept = my - alpha * mx;
    let sse: f64 = x
        .iter()
        .zip(y)
        .map(|(a, b)| {
            let r = b - (alpha * a + intercept);
            r * r
        })
        .sum();
    let sigma = ((sse / (nf - 2.0)) / sxx).sqrt();
    let r2 = if syy == 0.0 { 1.0 } else { (1.0 - sse / syy).clamp(0.0, 1.0) };
    Ok(FitReport {
        alpha,
        intercept,
        sigma,
        ci95: ci95(alpha, sigma),
        r2,
        sample_count: n,
    })
}

/// Fits `log10 t = alpha·log10 n + intercept`.
pub fn fit_loglog(points: &[(f64, f64)]) -> Result<FitReport, RegressionError> {
    let (x, y) = log_points(points)?;
    fit_line(&x, &y)
}

fn log_points(points: &[(f64, f64)]) -> Result<(Vec<f64>, Vec<f64>), RegressionError> {
    let mut x = Vec::with_capacity(points.len());
    let mut y = Vec::with_capacity(points.len());
    for &(n, t) in points {
        if !(n > 0.0 && t > 0.0 && n.is_finite() && t.is_finite()) {
            return Err(RegressionError::NonPositive { n, t });
        }
        x.push(n.log10());
        y.push(t.log10());
    }
    Ok((x, y))
}

/// True iff `value` lies outside the report's 95% interval.
pub fn hypothesis_excluded(report: &FitReport, value: f64) -> bool {
    value < report.ci95.0 || value > report.ci95.1
}

/// Lower median: the middle element, or the lower of the two middle ones.
pub fn lower_median(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    Some(v[(v.len() - 1) / 2])
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaseMedian {
    pub case_id: String,
    pub subject: Subject,
    pub n: usize,
    pub nnz: usize,
    /// Median time, per iteration for per-iteration subjects.
    pub t: f64,
    pub iterations: Option<f64>,
    pub runs: usize,
}

/// Per-case medians in order of first appearance. Failed rows are dropped,
/// so a case that only failed yields nothing.
pub fn median_per_case(samples: &[BenchSample]) -> Vec<CaseMedian> {
    let mut order: Vec<&str> = Vec::new();
    let mut groups: HashMap<&str, Vec<&BenchSample>> = HashMap::new();
    for s in samples.iter().filter(|s| !s.failed && s.t_seconds.is_some()) {
        groups
            .entry(&s.case_id)
            .or_insert_with(|| {
                order.push(&s.case_id);
                Vec::new()
            })
            .push(s);
    }
    order
        .into_iter()
        .map(|id| {
            let g = &groups[id];
            let first = g[0];
            let t: Vec<f64> = g
                .iter()
                .map(|s| {
                    let t = s.t_seconds.unwrap_or(f64::NAN);
                    match s.iterations {
                        Some(k) if s.subject.per_iteration() && k > 0 => t / k as f64,
                        _ => t,
                    }
                })
                .collect();
            let its: Vec<f64> = g.iter().filter_map(|s| s.iterations.map(|k| k as f64)).collect();
            CaseMedian {
                case_id: id.to_string(),
                subject: first.subject,
                n: first.n,
                nnz: first.nnz,
                t: lower_median(&t).unwrap_or(f64::NAN),
                iterations: lower_median(&its),
                runs: g.len(),
            }
        })
        .collect()
}

/// `(n, t)` points of one subject.
pub fn points_for(medians: &[CaseMedian], subject: Subject) -> Vec<(f64, f64)> {
    medians
        .iter()
        .filter(|m| m.subject == subject)
        .map(|m| (m.n as f64, m.t))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindowSlope {
    /// Window bounds in `log10 n`.
    pub lo: f64,
    pub hi: f64,
    pub alpha: f64,
    pub count: usize,
}

/// Log-log slopes over sliding windows of `window` decades, advanced by
/// `step` decades. Windows with fewer than 3 points are skipped; data
/// spanning less than one window gives a single window over everything.
pub fn windowed_slopes(
    points: &[(f64, f64)],
    window: f64,
    step: f64,
) -> Result<Vec<WindowSlope>, RegressionError> {
    let (x, y) = log_points(points)?;
    if x.is_empty() || !(window > 0.0 && step > 0.0) {
        return Ok(Vec::new());
    }
    let lo = x.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = x.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let eps = 1e-9;
    let mut out = Vec::new();
    let mut k = 0usize;
    loop {
        let a = lo + k as f64 * step;
        let b = a + window;
        if k > 0 && b > hi + eps {
            break;
        }
        let (wx, wy): (Vec<f64>, Vec<f64>) = x
            .iter()
            .zip(&y)
            .filter(|(xi, _)| **xi >= a - eps && **xi <= b + eps)
            .map(|(a, b)| (*a, *b))
            .unzip();
        match fit_line(&wx, &wy) {
            Ok(f) => out.push(WindowSlope {
                lo: a,
                hi: b.min(hi),
                alpha: f.alpha,
                count: wx.len(),
            }),
            Err(RegressionError::TooFewPoints(_)) | Err(RegressionError::DegenerateAbscissa) => {}
            Err(e) => return Err(e),
        }
        if b >= hi - eps {
            break;
        }
        k += 1;
    }
    Ok(out)
}

pub fn slopes_nondecreasing(slopes: &[WindowSlope]) -> bool {
    slopes.windows(2).all(|w| w[1].alpha >= w[0].alpha)
}

/// The local-validity warning, when window slopes spread widely.
pub fn local_validity_warning(slopes: &[WindowSlope]) -> Option<&'static str> {
    let min = slopes.iter().map(|s| s.alpha).fold(f64::INFINITY, f64::min);
    let max = slopes.iter().map(|s| s.alpha).fold(f64::NEG_INFINITY, f64::max);
    (slopes.len() >= 2 && max - min > LOCAL_SLOPE_SPREAD).then_some(LOCAL_WARNING)
}

/// One row of the coefficient table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub subject: String,
    pub report: FitReport,
    pub rejects_linear: bool,
    pub rejects_cubic: bool,
    pub window_slopes: Vec<WindowSlope>,
    pub warning: Option<String>,
}

impl SummaryRow {
    pub fn new(subject: impl Into<String>, report: FitReport, window_slopes: Vec<WindowSlope>) -> Self {
        let warning = local_validity_warning(&window_slopes).map(str::to_string);
        Self {
            subject: subject.into(),
            rejects_linear: hypothesis_excluded(&report, 1.0),
            rejects_cubic: hypothesis_excluded(&report, 3.0),
            report,
            window_slopes,
            warning,
        }
    }
}

/// Fits every subject present in the medians that has enough cases.
pub fn summarize(medians: &[CaseMedian]) -> Vec<Result<SummaryRow, (Subject, RegressionError)>> {
    let mut subjects: Vec<Subject> = medians.iter().map(|m| m.subject).collect();
    subjects.sort();
    subjects.dedup();
    subjects
        .into_iter()
        .map(|s| {
            let pts = points_for(medians, s);
            let report = fit_loglog(&pts).map_err(|e| (s, e))?;
            let slopes = windowed_slopes(&pts, DEFAULT_WINDOW_DECADES, DEFAULT_STEP_DECADES).map_err(|e| (s, e))?;
            Ok(SummaryRow::new(s.name(), report, slopes))
        })
        .collect()
}

const COLUMNS: [&str; 10] = [
    "subject", "alpha", "sigma", "ci95_lo", "ci95_hi", "r2", "cases", "rejects_1", "rejects_3", "warning",
];

fn row_fields(r: &SummaryRow) -> [String; 10] {
    let f = &r.report;
    [
        r.subject.clone(),
        format!("{:.3}", f.alpha),
        format!("{:.3}", f.sigma),
        format!("{:.4}", f.ci95.0),
        format!("{:.4}", f.ci95.1),
        format!("{:.3}", f.r2),
        f.sample_count.to_string(),
        r.rejects_linear.to_string(),
        r.rejects_cubic.to_string(),
        r.warning.clone().unwrap_or_default(),
    ]
}

/// Aligned plain-text table.
pub fn write_table_text<W: Write>(mut w: W, rows: &[SummaryRow]) -> std::io::Result<()> {
    let cells: Vec<[String; 10]> = rows.iter().map(row_fields).collect();
    let mut width: Vec<usize> = COLUMNS.iter().map(|c| c.len()).collect();
    for r in &cells {
        for (k, c) in r.iter().enumerate() {
            width[k] = width[k].max(c.len());
        }
    }
    let line = |fields: Vec<&str>| {
        let mut s = String::new();
        for (k, f) in fields.iter().enumerate() {
            if k == 0 {
                s.push_str(&format!("{:<w$}", f, w = width[k]));
            } else {
                s.push_str(&format!("  {:>w$}", f, w = width[k]));
            }
        }
        s.trim_end().to_string()
    };
    writeln!(w, "{}", line(COLUMNS.to_vec()))?;
    for r in &cells {
        writeln!(w, "{}", line(r.iter().map(String::as_str).collect()))?;
    }
    Ok(())
}

pub fn write_table_csv<W: Write>(w: W, rows: &[SummaryRow]) -> Result<(), csv::Error> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(COLUMNS)?;
    for r in rows {
        out.write_record(row_fields(r))?;
    }
    out.flush()?;
    Ok(())
}
