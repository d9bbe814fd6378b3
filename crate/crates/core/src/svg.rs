//! Plain SVG output: spy plots, log-log scatter with fit lines, and
//! iteration counts against size. Output depends only on the inputs.

use crate::regression::FitReport;
use crate::sparse::{Scalar, SparseMatrix};
use std::fmt::Write;

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 480.0;
const LEFT: f64 = 72.0;
const RIGHT: f64 = 24.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 56.0;
/// Spy plots bin larger matrices onto this many cells per side.
pub const SPY_CELLS: usize = 400;
const PALETTE: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf"];

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum PlotError {
    #[error("series {0:?} has no fit")]
    MissingFit(String),
    #[error("series {0:?} has a nonpositive value on a log axis")]
    NonPositive(String),
    #[error("nothing to plot")]
    Empty,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Series {
    pub label: String,
    pub points: Vec<(f64, f64)>,
    pub fit: Option<FitReport>,
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

fn header(out: &mut String, title: &str) {
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" viewBox="0 0 {WIDTH} {HEIGHT}" width="{WIDTH}" height="{HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(out, r#"<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#);
    let _ = writeln!(
        out,
        r#"<text x="{:.2}" y="22" text-anchor="middle" font-size="14">{}</text>"#,
        WIDTH / 2.0,
        escape(title)
    );
}

/// Nonzero pattern of `a`. Matrices larger than [`SPY_CELLS`] are binned and
/// each occupied bin drawn once.
pub fn spy_svg<T: Scalar>(a: &SparseMatrix<T>, title: &str) -> String {
    let mut out = String::new();
    header(&mut out, title);
    let side = (HEIGHT - TOP - BOTTOM).min(WIDTH - LEFT - RIGHT);
    let x0 = (WIDTH - side) / 2.0;
    let (nr, nc) = (a.nrows().max(1), a.ncols().max(1));
    let cells_r = nr.min(SPY_CELLS);
    let cells_c = nc.min(SPY_CELLS);
    let (ch, cw) = (side / cells_r as f64, side / cells_c as f64);
    let mut occupied: Vec<(usize, usize)> = a
        .iter()
        .filter(|(_, _, v)| !v.is_zero())
        .map(|(i, j, _)| (i * cells_r / nr, j * cells_c / nc))
        .collect();
    occupied.sort_unstable();
    occupied.dedup();
    let _ = writeln!(
        out,
        r#"<rect x="{x0:.2}" y="{TOP:.2}" width="{side:.2}" height="{side:.2}" fill="none" stroke="black"/>"#
    );
    let _ = writeln!(out, r#"<g fill="{}">"#, PALETTE[0]);
    for (r, c) in occupied {
        let _ = writeln!(
            out,
            r#"<rect class="nz" x="{:.2}" y="{:.2}" width="{cw:.2}" height="{ch:.2}"/>"#,
            x0 + c as f64 * cw,
            TOP + r as f64 * ch
        );
    }
    let _ = writeln!(out, "</g>");
    let _ = writeln!(
        out,
        r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">n = {}, nnz = {}</text>"#,
        WIDTH / 2.0,
        HEIGHT - 20.0,
        a.nrows(),
        a.nnz()
    );
    out.push_str("</svg>\n");
    out
}

#[derive(Debug, Clone, Copy)]
struct Axis {
    lo: f64,
    hi: f64,
    log: bool,
    p0: f64,
    p1: f64,
}

impl Axis {
    fn new(values: impl Iterator<Item = f64>, log: bool, p0: f64, p1: f64) -> Self {
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for v in values {
            let v = if log { v.log10() } else { v };
            lo = lo.min(v);
            hi = hi.max(v);
        }
        if log {
            lo = lo.floor();
            hi = hi.ceil();
        } else {
            lo = lo.min(0.0).floor();
            hi = hi.ceil();
        }
        if hi <= lo {
            hi = lo + 1.0;
        }
        Self { lo, hi, log, p0, p1 }
    }

    fn map(&self, v: f64) -> f64 {
        let v = if self.log { v.log10() } else { v };
        self.p0 + (v - self.lo) / (self.hi - self.lo) * (self.p1 - self.p0)
    }

    /// Tick values in data units and their labels.
    fn ticks(&self) -> Vec<(f64, String)> {
        if self.log {
            (self.lo as i32..=self.hi as i32)
                .map(|k| (10f64.powi(k), format!("1e{k}")))
                .collect()
        } else {
            let span = self.hi - self.lo;
            let step = [1.0, 2.0, 5.0, 10.0, 20.0, 50.0, 100.0]
                .into_iter()
                .find(|s| span / s <= 10.0)
                .unwrap_or(span / 10.0);
            let mut t = Vec::new();
            let mut v = (self.lo / step).ceil() * step;
            while v <= self.hi + 1e-9 {
                t.push((v, format!("{v}")));
                v += step;
            }
            t
        }
    }
}

fn axes(out: &mut String, x: &Axis, y: &Axis, x_label: &str, y_label: &str) {
    let (l, r, t, b) = (LEFT, WIDTH - RIGHT, TOP, HEIGHT - BOTTOM);
    let _ = writeln!(
        out,
        r#"<rect x="{l:.2}" y="{t:.2}" width="{:.2}" height="{:.2}" fill="none" stroke="black"/>"#,
        r - l,
        b - t
    );
    for (v, label) in x.ticks() {
        let px = x.map(v);
        let _ = writeln!(
            out,
            r##"<line x1="{px:.2}" y1="{t:.2}" x2="{px:.2}" y2="{b:.2}" stroke="#ddd"/><text x="{px:.2}" y="{:.2}" text-anchor="middle">{label}</text>"##,
            b + 16.0
        );
    }
    for (v, label) in y.ticks() {
        let py = y.map(v);
        let _ = writeln!(
            out,
            r##"<line x1="{l:.2}" y1="{py:.2}" x2="{r:.2}" y2="{py:.2}" stroke="#ddd"/><text x="{:.2}" y="{:.2}" text-anchor="end">{label}</text>"##,
            l - 6.0,
            py + 4.0
        );
    }
    let _ = writeln!(
        out,
        r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
        (l + r) / 2.0,
        HEIGHT - 14.0,
        escape(x_label)
    );
    let _ = writeln!(
        out,
        r#"<text x="16" y="{:.2}" text-anchor="middle" transform="rotate(-90 16 {:.2})">{}</text>"#,
        (t + b) / 2.0,
        (t + b) / 2.0,
        escape(y_label)
    );
}

fn legend(out: &mut String, series: &[Series]) {
    for (k, s) in series.iter().enumerate() {
        let y = TOP + 14.0 + 16.0 * k as f64;
        let x = LEFT + 12.0;
        let mut label = escape(&s.label);
        if let Some(f) = &s.fit {
            let _ = write!(label, " (α = {:.3})", f.alpha);
        }
        let _ = writeln!(
            out,
            r#"<circle cx="{x:.2}" cy="{:.2}" r="3.5" fill="{}"/><text x="{:.2}" y="{y:.2}">{label}</text>"#,
            y - 4.0,
            PALETTE[k % PALETTE.len()],
            x + 8.0
        );
    }
}

fn points(out: &mut String, s: &Series, color: &str, x: &Axis, y: &Axis) {
    let _ = writeln!(out, r#"<g fill="{color}">"#);
    for &(a, b) in &s.points {
        let _ = writeln!(out, r#"<circle class="pt" cx="{:.2}" cy="{:.2}" r="3"/>"#, x.map(a), y.map(b));
    }
    let _ = writeln!(out, "</g>");
}

/// Log-log scatter of each series with its dashed fit line drawn over the
/// series' own `n` range.
pub fn scatter_fit_svg(series: &[Series], title: &str, x_label: &str, y_label: &str) -> Result<String, PlotError> {
    if series.iter().all(|s| s.points.is_empty()) {
        return Err(PlotError::Empty);
    }
    for s in series {
        if s.fit.is_none() {
            return Err(PlotError::MissingFit(s.label.clone()));
        }
        if s.points.iter().any(|&(a, b)| !(a > 0.0 && b > 0.0)) {
            return Err(PlotError::NonPositive(s.label.clone()));
        }
    }
    let all = || series.iter().flat_map(|s| s.points.iter());
    let x = Axis::new(all().map(|p| p.0), true, LEFT, WIDTH - RIGHT);
    let y = Axis::new(all().map(|p| p.1), true, HEIGHT - BOTTOM, TOP);
    let mut out = String::new();
    header(&mut out, title);
    axes(&mut out, &x, &y, x_label, y_label);
    for (k, s) in series.iter().enumerate() {
        let color = PALETTE[k % PALETTE.len()];
        points(&mut out, s, color, &x, &y);
        let f = s.fit.as_ref().expect("checked above");
        let lo = s.points.iter().map(|p| p.0).fold(f64::INFINITY, f64::min);
        let hi = s.points.iter().map(|p| p.0).fold(f64::NEG_INFINITY, f64::max);
        if lo.is_finite() {
            let at = |n: f64| 10f64.powf(f.alpha * n.log10() + f.intercept);
            let _ = writeln!(
                out,
                r#"<line class="fit" x1="{:.2}" y1="{:.2}" x2="{:.2}" y2="{:.2}" stroke="{color}" stroke-dasharray="6 4"/>"#,
                x.map(lo),
                y.map(at(lo)),
                x.map(hi),
                y.map(at(hi))
            );
        }
    }
    legend(&mut out, series);
    out.push_str("</svg>\n");
    Ok(out)
}

/// Iteration counts on a linear axis against `n` on a log axis.
pub fn iterations_svg(series: &[Series], title: &str) -> Result<String, PlotError> {
    if series.iter().all(|s| s.points.is_empty()) {
        return Err(PlotError::Empty);
    }
    for s in series {
        if s.points.iter().any(|&(a, _)| !(a > 0.0)) {
            return Err(PlotError::NonPositive(s.label.clone()));
        }
    }
    let all = || series.iter().flat_map(|s| s.points.iter());
    let x = Axis::new(all().map(|p| p.0), true, LEFT, WIDTH - RIGHT);
    let y = Axis::new(all().map(|p| p.1), false, HEIGHT - BOTTOM, TOP);
    let mut out = String::new();
    header(&mut out, title);
    axes(&mut out, &x, &y, "nodes n", "iterations");
    for (k, s) in series.iter().enumerate() {
        points(&mut out, s, PALETTE[k % PALETTE.len()], &x, &y);
    }
    let plain: Vec<Series> = series.iter().map(|s| Series { fit: None, ..s.clone() }).collect();
    legend(&mut out, &plain);
    out.push_str("</svg>\n");
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::regression::fit_loglog;

    fn attr(tag: &str, name: &str) -> f64 {
        let key = format!(" {name}=\"");
        let s = &tag[tag.find(&key).unwrap() + key.len()..];
        s[..s.find('"').unwrap()].parse().unwrap()
    }

    #[test]
    fn identity_spy_marks_diagonal() {
        let svg = spy_svg(&SparseMatrix::<f64>::identity(2), "I");
        let marks: Vec<&str> = svg.lines().filter(|l| l.contains("class=\"nz\"")).collect();
        assert_eq!(marks.len(), 2);
        assert_eq!(attr(marks[0], "x") - attr(marks[0], "y"), attr(marks[1], "x") - attr(marks[1], "y"));
        assert!(attr(marks[1], "x") > attr(marks[0], "x"));
    }

    #[test]
    fn large_spy_is_binned() {
        let a = SparseMatrix::<f64>::identity(5000);
        let svg = spy_svg(&a, "big");
        assert_eq!(svg.matches("class=\"nz\"").count(), SPY_CELLS);
    }

    #[test]
    fn exact_power_law_points_lie_on_fit_line() {
        let pts: Vec<(f64, f64)> = [300.0f64, 1e3, 5e3, 2e4, 1e5].iter().map(|&n| (n, 3e-7 * n.powf(1.1))).collect();
        let fit = fit_loglog(&pts).unwrap();
        let s = Series {
            label: "exact".into(),
            points: pts,
            fit: Some(fit),
        };
        let svg = scatter_fit_svg(&[s], "t", "n", "t").unwrap();
        let line = svg.lines().find(|l| l.contains("class=\"fit\"")).unwrap();
        let (x1, y1, x2, y2) = (attr(line, "x1"), attr(line, "y1"), attr(line, "x2"), attr(line, "y2"));
        assert!(line.contains("stroke-dasharray"));
        for c in svg.lines().filter(|l| l.contains("class=\"pt\"")) {
            let (cx, cy) = (attr(c, "cx"), attr(c, "cy"));
            let on_line = y1 + (cx - x1) / (x2 - x1) * (y2 - y1);
            assert!((cy - on_line).abs() < 0.05, "{cy} vs {on_line}");
        }
    }

    #[test]
    fn scatter_needs_fit() {
        let s = Series {
            label: "x".into(),
            points: vec![(1.0, 1.0)],
            fit: None,
        };
        assert_eq!(scatter_fit_svg(&[s], "", "", ""), Err(PlotError::MissingFit("x".into())));
    }

    #[test]
    fn output_is_stable() {
        let s = Series {
            label: "FixedPointPF <i>".into(),
            points: vec![(100.0, 3.0), (1000.0, 4.0), (10000.0, 4.0)],
            fit: None,
        };
        let a = iterations_svg(std::slice::from_ref(&s), "iterations").unwrap();
        let b = iterations_svg(&[s], "iterations").unwrap();
        assert_eq!(a, b);
        assert!(a.contains("&lt;i&gt;"));
        assert_eq!(a.matches("class=\"pt\"").count(), 3);
    }
}
