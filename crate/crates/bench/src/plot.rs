//! Two-panel SVG figure: per-trial scatter and median curves of
//! `log10(rel_error)` against `k`.

use std::fmt::Write as _;
use std::path::Path;

use crate::config::Method;
use crate::records::{SummaryRow, SweepRecord};
use crate::BenchError;

const PANEL_W: f64 = 480.0;
const PANEL_H: f64 = 400.0;
const MARGIN_L: f64 = 64.0;
const MARGIN_R: f64 = 16.0;
const MARGIN_T: f64 = 40.0;
const MARGIN_B: f64 = 56.0;
const FLOOR: f64 = 1e-16;

fn color(m: Method) -> &'static str {
    match m {
        Method::Manifold => "#1f77b4",
        Method::L21 => "#d62728",
    }
}

fn label(m: Method) -> &'static str {
    match m {
        Method::Manifold => "manifold (orthogonal factor)",
        Method::L21 => "l2,1 convex",
    }
}

struct Axes {
    k_min: f64,
    k_max: f64,
    y_min: f64,
    y_max: f64,
    x0: f64,
}

impl Axes {
    fn x(&self, k: f64) -> f64 {
        let w = PANEL_W - MARGIN_L - MARGIN_R;
        self.x0 + MARGIN_L + (k - self.k_min) / (self.k_max - self.k_min) * w
    }

    fn y(&self, err: f64) -> f64 {
        let h = PANEL_H - MARGIN_T - MARGIN_B;
        let v = err.max(FLOOR).log10().clamp(self.y_min, self.y_max);
        MARGIN_T + (self.y_max - v) / (self.y_max - self.y_min) * h
    }
}

fn marker(out: &mut String, m: Method, x: f64, y: f64, filled: bool) {
    let fill = if filled { color(m) } else { "none" };
    match m {
        Method::L21 => {
            let _ = writeln!(
                out,
                r#"<circle cx="{x:.2}" cy="{y:.2}" r="3.5" fill="{fill}" stroke="{}" stroke-width="1"/>"#,
                color(m)
            );
        }
        Method::Manifold => {
            let _ = writeln!(
                out,
                r#"<polygon points="{:.2},{:.2} {:.2},{:.2} {:.2},{:.2}" fill="{fill}" stroke="{}" stroke-width="1"/>"#,
                x,
                y - 4.0,
                x - 3.8,
                y + 3.0,
                x + 3.8,
                y + 3.0,
                color(m)
            );
        }
    }
}

fn frame(out: &mut String, ax: &Axes, ks: &[usize], title: &str) {
    let (left, right) = (ax.x(ax.k_min), ax.x(ax.k_max));
    let (top, bottom) = (MARGIN_T, PANEL_H - MARGIN_B);
    let _ = writeln!(
        out,
        r#"<rect x="{left:.2}" y="{top:.2}" width="{:.2}" height="{:.2}" fill="none" stroke="black"/>"#,
        right - left,
        bottom - top
    );
    let _ = writeln!(
        out,
        r#"<text x="{:.2}" y="24" text-anchor="middle" font-size="14">{title}</text>"#,
        0.5 * (left + right)
    );
    let step = (ks.len() / 8).max(1);
    for &k in ks.iter().step_by(step) {
        let x = ax.x(k as f64);
        let _ = writeln!(out, r#"<line x1="{x:.2}" y1="{bottom:.2}" x2="{x:.2}" y2="{:.2}" stroke="black"/>"#, bottom + 5.0);
        let _ = writeln!(
            out,
            r#"<text x="{x:.2}" y="{:.2}" text-anchor="middle" font-size="11">{k}</text>"#,
            bottom + 18.0
        );
    }
    let mut e = ax.y_min as i64;
    let y_step = (((ax.y_max - ax.y_min) / 8.0).ceil() as i64).max(1);
    while e as f64 <= ax.y_max {
        let y = ax.y(10f64.powi(e as i32));
        let _ = writeln!(out, r##"<line x1="{left:.2}" y1="{y:.2}" x2="{right:.2}" y2="{y:.2}" stroke="#dddddd"/>"##);
        let _ = writeln!(
            out,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="end" font-size="11">1e{e}</text>"#,
            left - 6.0,
            y + 4.0
        );
        e += y_step;
    }
    let _ = writeln!(
        out,
        r#"<text x="{:.2}" y="{:.2}" text-anchor="middle" font-size="12">number of measurements k</text>"#,
        0.5 * (left + right),
        PANEL_H - 12.0
    );
    let _ = writeln!(
        out,
        r#"<text x="{:.2}" y="{:.2}" text-anchor="middle" font-size="12" transform="rotate(-90 {:.2} {:.2})">relative error</text>"#,
        ax.x0 + 16.0,
        0.5 * (top + bottom),
        ax.x0 + 16.0,
        0.5 * (top + bottom)
    );
}

/// Renders the figure. Fails on an empty summary.
pub fn render_svg(summary: &[SummaryRow], records: &[SweepRecord]) -> Result<String, BenchError> {
    if summary.is_empty() {
        return Err(BenchError::Config("nothing to plot: summary is empty".into()));
    }
    let mut ks: Vec<usize> = summary.iter().map(|r| r.k).chain(records.iter().map(|r| r.k)).collect();
    ks.sort_unstable();
    ks.dedup();
    let errs = summary.iter().map(|r| r.median_rel_error).chain(records.iter().map(|r| r.rel_error));
    let logs: Vec<f64> = errs.map(|e| e.max(FLOOR).log10()).filter(|v| v.is_finite()).collect();
    let mut y_min = logs.iter().copied().fold(f64::INFINITY, f64::min).floor();
    let mut y_max = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max).ceil();
    if y_min >= y_max || !y_min.is_finite() {
        y_min = y_min.min(0.0) - 1.0;
        y_max = y_max.max(0.0) + 1.0;
    }
    let (k_min, mut k_max) = (ks[0] as f64, *ks.last().unwrap() as f64);
    if k_max == k_min {
        k_max += 1.0;
    }
    let left = Axes { k_min, k_max, y_min, y_max, x0: 0.0 };
    let right = Axes { x0: PANEL_W, ..left };

    let mut methods: Vec<Method> = summary.iter().map(|r| r.method).collect();
    methods.sort_unstable();
    methods.dedup();

    let mut out = String::new();
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{w}" height="{h}" viewBox="0 0 {w} {h}" font-family="sans-serif">"#,
        w = 2.0 * PANEL_W,
        h = PANEL_H
    );
    let _ = writeln!(out, r#"<rect width="100%" height="100%" fill="white"/>"#);

    out.push_str("<g id=\"trials\">\n");
    frame(&mut out, &left, &ks, "all trials");
    for r in records {
        marker(&mut out, r.method, left.x(r.k as f64), left.y(r.rel_error), false);
    }
    out.push_str("</g>\n<g id=\"medians\">\n");
    frame(&mut out, &right, &ks, "median over trials");
    for &m in &methods {
        let pts: Vec<(f64, f64)> = summary
            .iter()
            .filter(|r| r.method == m)
            .map(|r| (right.x(r.k as f64), right.y(r.median_rel_error)))
            .collect();
        let coords: Vec<String> = pts.iter().map(|(x, y)| format!("{x:.2},{y:.2}")).collect();
        let _ = writeln!(
            out,
            r#"<polyline class="median" data-method="{}" points="{}" fill="none" stroke="{}" stroke-width="1.5"/>"#,
            m.as_str(),
            coords.join(" "),
            color(m)
        );
        for (x, y) in pts {
            marker(&mut out, m, x, y, true);
        }
    }
    for (i, &m) in methods.iter().enumerate() {
        let y = MARGIN_T + 16.0 + 18.0 * i as f64;
        let x = right.x(right.k_max) - 190.0;
        marker(&mut out, m, x, y, true);
        let _ = writeln!(out, r#"<text x="{:.2}" y="{:.2}" font-size="12">{}</text>"#, x + 10.0, y + 4.0, label(m));
    }
    out.push_str("</g>\n</svg>\n");
    Ok(out)
}

pub fn write_svg(path: impl AsRef<Path>, summary: &[SummaryRow], records: &[SweepRecord]) -> Result<(), BenchError> {
    let svg = render_svg(summary, records)?;
    std::fs::write(path, svg)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::summary::summarize;

    fn recs() -> Vec<SweepRecord> {
        let mut v = Vec::new();
        for (k, e1, e2) in [(40, 0.3, 0.5), (44, 1e-9, 0.2), (48, 0.0, 1e-10)] {
            for (m, e) in [(Method::Manifold, e1), (Method::L21, e2)] {
                v.push(SweepRecord {
                    k,
                    trial: 0,
                    method: m,
                    rel_error: e,
                    support_match: false,
                    iterations: 0,
                    restarts: 0,
                    wall_ms: 0,
                    seed: 0,
                });
            }
        }
        v
    }

    #[test]
    fn svg_has_one_median_curve_per_method() {
        let r = recs();
        let svg = render_svg(&summarize(&r, 1e-3).unwrap(), &r).unwrap();
        assert!(svg.starts_with("<svg"));
        assert_eq!(svg.matches("<polyline").count(), 2);
        assert!(svg.contains("data-method=\"l21\""));
        assert!(!svg.contains("NaN") && !svg.contains("inf"));
    }

    #[test]
    fn empty_summary_is_rejected() {
        assert!(render_svg(&[], &[]).is_err());
    }
}
