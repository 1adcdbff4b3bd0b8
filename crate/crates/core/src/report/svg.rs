//! Hand-written SVG 1.1 figures.
//!
//! Heatmap cells use a linear ramp from [`RAMP_LO`] at the lower color bound to
//! [`RAMP_HI`] at the upper bound, with each RGB channel interpolated and
//! rounded to the nearest integer.

use std::fmt::Write;

use crate::aggregate::{AggregateReport, Surface};
use crate::error::{Error, Result};
use crate::grid::{EvalSide, GridKind};

pub const RAMP_LO: [u8; 3] = [255, 247, 236];
pub const RAMP_HI: [u8; 3] = [127, 0, 0];

const PALETTE: [&str; 6] = [
    "#d62728", "#1f77b4", "#9467bd", "#7f7f7f", "#2ca02c", "#ff7f0e",
];
const X_TICKS: [f64; 5] = [-0.5, 0.0, 0.5, 1.0, 1.5];

#[derive(Debug, Clone, PartialEq)]
pub struct Series {
    pub label: String,
    pub x: Vec<f64>,
    pub mean: Vec<f64>,
    pub ci: Vec<f64>,
    pub color: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LinePlot {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub series: Vec<Series>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Heatmap {
    pub title: String,
    pub surface: Surface,
    pub lo: f64,
    pub hi: f64,
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

fn path_label(group: &str) -> String {
    match group.split('/').next().unwrap_or(group) {
        "src-tgt" => "src-bi".to_string(),
        "tgt-src" => "tgt-bi".to_string(),
        other => other.to_string(),
    }
}

/// One series per (group, side) of a 1D report.
pub fn line_plot_from_report(report: &AggregateReport) -> Result<LinePlot> {
    if report.kind != GridKind::OneD {
        return Err(Error::invalid("line plots need a one_d report"));
    }
    let mut series = Vec::new();
    for group in report.groups() {
        for side in EvalSide::BOTH {
            let mut pts: Vec<_> = report
                .points
                .iter()
                .filter(|p| p.group == group && p.side == side)
                .collect();
            if pts.is_empty() {
                continue;
            }
            pts.sort_by(|a, b| a.alpha1.total_cmp(&b.alpha1));
            series.push(Series {
                label: format!("{} {} dev", path_label(&group), side),
                x: pts.iter().map(|p| p.alpha1).collect(),
                mean: pts.iter().map(|p| p.mean).collect(),
                ci: pts.iter().map(|p| p.ci95).collect(),
                color: series.len(),
            });
        }
    }
    Ok(LinePlot {
        title: format!(
            "Normalized performance along the interpolation path ({})",
            report.scope
        ),
        x_label: "mixing coefficient \u{3b1}".into(),
        y_label: "normalized performance".into(),
        series,
    })
}

/// The `side` surface of one group of a 2D report, colored over its own range.
pub fn heatmap_from_report(
    report: &AggregateReport,
    side: EvalSide,
    group: Option<&str>,
) -> Result<Heatmap> {
    if report.kind != GridKind::TwoD {
        return Err(Error::invalid("heatmaps need a two_d report"));
    }
    let groups = report.groups();
    let group = match group {
        Some(g) => g.to_string(),
        None => groups
            .first()
            .cloned()
            .ok_or_else(|| Error::IncompleteGrid("empty report".into()))?,
    };
    let surface = Surface::from_aggregates(&report.points, side, &group)?;
    let lo = surface
        .values()
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min);
    let hi = surface
        .values()
        .iter()
        .copied()
        .fold(f64::NEG_INFINITY, f64::max);
    let (lo, hi) = if hi > lo {
        (lo, hi)
    } else {
        (lo - 0.5, lo + 0.5)
    };
    Ok(Heatmap {
        title: format!("{} dev, {} ({})", side, path_label(&group), report.scope),
        surface,
        lo,
        hi,
    })
}

/// Ramp color for `v` within `[lo, hi]`, clamped at the ends.
pub fn ramp_color(v: f64, lo: f64, hi: f64) -> String {
    let t = ((v - lo) / (hi - lo)).clamp(0.0, 1.0);
    let ch = |k: usize| {
        let (a, b) = (f64::from(RAMP_LO[k]), f64::from(RAMP_HI[k]));
        (a + t * (b - a)).round() as u8
    };
    format!("#{:02x}{:02x}{:02x}", ch(0), ch(1), ch(2))
}

struct Frame {
    width: f64,
    height: f64,
    left: f64,
    right: f64,
    top: f64,
    bottom: f64,
}

impl Frame {
    fn plot_w(&self) -> f64 {
        self.width - self.left - self.right
    }
    fn plot_h(&self) -> f64 {
        self.height - self.top - self.bottom
    }
}

fn header(out: &mut String, w: f64, h: f64, title: &str) {
    let _ = writeln!(out, r#"<?xml version="1.0" encoding="UTF-8"?>"#);
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{w}" height="{h}" viewBox="0 0 {w} {h}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(
        out,
        r#"<rect x="0" y="0" width="{w}" height="{h}" fill="white"/>"#
    );
    let _ = writeln!(
        out,
        r#"<text x="{:.2}" y="20" text-anchor="middle" font-size="14">{}</text>"#,
        w / 2.0,
        escape(title)
    );
}

fn tick_label(v: f64) -> String {
    let s = format!("{v:.2}");
    let s = s.trim_end_matches('0').trim_end_matches('.');
    if s == "-0" {
        "0".into()
    } else {
        s.into()
    }
}

pub fn emit_line_plot(plot: &LinePlot) -> Result<String> {
    if plot.series.is_empty() {
        return Err(Error::invalid("line plot needs at least one series"));
    }
    for s in &plot.series {
        if s.x.is_empty() || s.x.len() != s.mean.len() || s.x.len() != s.ci.len() {
            return Err(Error::invalid(format!(
                "series `{}` has mismatched lengths",
                s.label
            )));
        }
        if s.x.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::invalid(format!(
                "series `{}` is not sorted by x",
                s.label
            )));
        }
        if s.mean.iter().chain(&s.ci).any(|v| !v.is_finite()) {
            return Err(Error::invalid(format!(
                "series `{}` has non-finite values",
                s.label
            )));
        }
    }
    let frame = Frame {
        width: 720.0,
        height: 460.0,
        left: 70.0,
        right: 190.0,
        top: 40.0,
        bottom: 60.0,
    };
    let all_x = plot.series.iter().flat_map(|s| s.x.iter().copied());
    let (mut x0, mut x1) = all_x.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| {
        (a.min(v), b.max(v))
    });
    if x1 <= x0 {
        x0 -= 0.5;
        x1 += 0.5;
    }
    let (mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY);
    for s in &plot.series {
        for (m, c) in s.mean.iter().zip(&s.ci) {
            y0 = y0.min(m - c);
            y1 = y1.max(m + c);
        }
    }
    let pad = ((y1 - y0) * 0.05).max(0.01);
    let (y0, y1) = (y0 - pad, y1 + pad);
    let px = |x: f64| frame.left + (x - x0) / (x1 - x0) * frame.plot_w();
    let py = |y: f64| frame.top + (y1 - y) / (y1 - y0) * frame.plot_h();

    let mut out = String::new();
    header(&mut out, frame.width, frame.height, &plot.title);
    let (bx, by) = (frame.left, frame.top + frame.plot_h());
    let _ = writeln!(
        out,
        r##"<line x1="{bx:.2}" y1="{by:.2}" x2="{:.2}" y2="{by:.2}" stroke="#333"/>"##,
        frame.left + frame.plot_w()
    );
    let _ = writeln!(
        out,
        r##"<line x1="{bx:.2}" y1="{:.2}" x2="{bx:.2}" y2="{by:.2}" stroke="#333"/>"##,
        frame.top
    );
    for t in X_TICKS
        .iter()
        .copied()
        .filter(|t| *t >= x0 - 1e-9 && *t <= x1 + 1e-9)
    {
        let x = px(t);
        let _ = writeln!(
            out,
            r##"<line x1="{x:.2}" y1="{by:.2}" x2="{x:.2}" y2="{:.2}" stroke="#333"/>"##,
            by + 5.0
        );
        let _ = writeln!(
            out,
            r#"<text x="{x:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
            by + 18.0,
            tick_label(t)
        );
    }
    for k in 0..=4 {
        let v = y0 + (y1 - y0) * f64::from(k) / 4.0;
        let y = py(v);
        let _ = writeln!(
            out,
            r##"<line x1="{:.2}" y1="{y:.2}" x2="{bx:.2}" y2="{y:.2}" stroke="#333"/>"##,
            bx - 5.0
        );
        let _ = writeln!(
            out,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="end">{:.3}</text>"#,
            bx - 8.0,
            y + 4.0,
            v
        );
    }
    let _ = writeln!(
        out,
        r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
        frame.left + frame.plot_w() / 2.0,
        frame.height - 15.0,
        escape(&plot.x_label)
    );
    let _ = writeln!(
        out,
        r#"<text x="18" y="{:.2}" text-anchor="middle" transform="rotate(-90 18 {:.2})">{}</text>"#,
        frame.top + frame.plot_h() / 2.0,
        frame.top + frame.plot_h() / 2.0,
        escape(&plot.y_label)
    );

    for s in &plot.series {
        let color = PALETTE[s.color % PALETTE.len()];
        let upper =
            s.x.iter()
                .zip(s.mean.iter().zip(&s.ci))
                .map(|(&x, (m, c))| (x, m + c));
        let lower =
            s.x.iter()
                .zip(s.mean.iter().zip(&s.ci))
                .rev()
                .map(|(&x, (m, c))| (x, m - c));
        let band: Vec<String> = upper
            .chain(lower)
            .map(|(x, y)| format!("{:.2},{:.2}", px(x), py(y)))
            .collect();
        let _ = writeln!(
            out,
            r#"<polygon class="band" points="{}" fill="{color}" fill-opacity="0.2" stroke="none"/>"#,
            band.join(" ")
        );
    }
    for s in &plot.series {
        let color = PALETTE[s.color % PALETTE.len()];
        let pts: Vec<String> =
            s.x.iter()
                .zip(&s.mean)
                .map(|(&x, &m)| format!("{:.2},{:.2}", px(x), py(m)))
                .collect();
        let _ = writeln!(
            out,
            r#"<polyline class="series" points="{}" fill="none" stroke="{color}" stroke-width="2"/>"#,
            pts.join(" ")
        );
    }
    let lx = frame.left + frame.plot_w() + 15.0;
    for (i, s) in plot.series.iter().enumerate() {
        let y = frame.top + 10.0 + 20.0 * i as f64;
        let color = PALETTE[s.color % PALETTE.len()];
        let _ = writeln!(
            out,
            r#"<rect x="{lx:.2}" y="{:.2}" width="14" height="10" fill="{color}"/>"#,
            y - 8.0
        );
        let _ = writeln!(
            out,
            r#"<text x="{:.2}" y="{y:.2}">{}</text>"#,
            lx + 20.0,
            escape(&s.label)
        );
    }
    out.push_str("</svg>\n");
    Ok(out)
}

pub fn emit_heatmap(map: &Heatmap) -> Result<String> {
    if !(map.lo.is_finite() && map.hi.is_finite() && map.lo < map.hi) {
        return Err(Error::invalid(format!(
            "color bounds must be finite with lo < hi, got [{}, {}]",
            map.lo, map.hi
        )));
    }
    let s = &map.surface;
    if s.values().len() != s.rows() * s.cols() || s.values().iter().any(|v| !v.is_finite()) {
        return Err(Error::IncompleteGrid(
            "surface has missing or non-finite cells".into(),
        ));
    }
    let cell = 20.0;
    let frame = Frame {
        width: 70.0 + cell * s.rows() as f64 + 130.0,
        height: 40.0 + cell * s.cols() as f64 + 60.0,
        left: 70.0,
        right: 130.0,
        top: 40.0,
        bottom: 60.0,
    };
    let mut out = String::new();
    header(&mut out, frame.width, frame.height, &map.title);
    // alpha1 runs left to right, alpha2 bottom to top.
    let cx = |i: usize| frame.left + cell * i as f64;
    let cy = |j: usize| frame.top + cell * (s.cols() - 1 - j) as f64;
    for i in 0..s.rows() {
        for j in 0..s.cols() {
            let _ = writeln!(
                out,
                r#"<rect class="cell" x="{:.2}" y="{:.2}" width="{cell}" height="{cell}" fill="{}"/>"#,
                cx(i),
                cy(j),
                ramp_color(s.at(i, j), map.lo, map.hi)
            );
        }
    }
    let by = frame.top + frame.plot_h();
    for (i, &a) in s.alpha1.iter().enumerate() {
        if X_TICKS.iter().any(|t| (t - a).abs() < 1e-9) {
            let _ = writeln!(
                out,
                r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
                cx(i) + cell / 2.0,
                by + 16.0,
                tick_label(a)
            );
        }
    }
    for (j, &a) in s.alpha2.iter().enumerate() {
        if X_TICKS.iter().any(|t| (t - a).abs() < 1e-9) {
            let _ = writeln!(
                out,
                r#"<text x="{:.2}" y="{:.2}" text-anchor="end">{}</text>"#,
                frame.left - 6.0,
                cy(j) + cell / 2.0 + 4.0,
                tick_label(a)
            );
        }
    }
    let _ = writeln!(
        out,
        r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">&#945;1 (toward source model)</text>"#,
        frame.left + frame.plot_w() / 2.0,
        frame.height - 15.0
    );
    let mid = frame.top + frame.plot_h() / 2.0;
    let _ = writeln!(
        out,
        r#"<text x="18" y="{mid:.2}" text-anchor="middle" transform="rotate(-90 18 {mid:.2})">&#945;2 (toward target model)</text>"#
    );
    for (a1, a2, name) in [
        (0.0, 0.0, "bilingual"),
        (1.0, 0.0, "source"),
        (0.0, 1.0, "target"),
    ] {
        let i = s.alpha1.iter().position(|v| (v - a1).abs() < 1e-9);
        let j = s.alpha2.iter().position(|v| (v - a2).abs() < 1e-9);
        if let (Some(i), Some(j)) = (i, j) {
            let (x, y) = (cx(i) + cell / 2.0, cy(j) + cell / 2.0);
            let _ = writeln!(
                out,
                r##"<circle cx="{x:.2}" cy="{y:.2}" r="4" fill="none" stroke="#000" stroke-width="1.5"/>"##
            );
            let _ = writeln!(
                out,
                r##"<text x="{:.2}" y="{:.2}" font-size="11" fill="#000">{name}</text>"##,
                x + 6.0,
                y - 6.0
            );
        }
    }
    let bar_x = frame.left + frame.plot_w() + 30.0;
    let lo_c = ramp_color(map.lo, map.lo, map.hi);
    let hi_c = ramp_color(map.hi, map.lo, map.hi);
    let _ = writeln!(
        out,
        r#"<defs><linearGradient id="ramp" x1="0" y1="1" x2="0" y2="0"><stop offset="0" stop-color="{lo_c}"/><stop offset="1" stop-color="{hi_c}"/></linearGradient></defs>"#
    );
    let _ = writeln!(
        out,
        r##"<rect class="colorbar" x="{bar_x:.2}" y="{:.2}" width="16" height="{:.2}" fill="url(#ramp)" stroke="#333"/>"##,
        frame.top,
        frame.plot_h()
    );
    let _ = writeln!(
        out,
        r#"<text x="{:.2}" y="{:.2}">{:.3}</text>"#,
        bar_x + 22.0,
        frame.top + 10.0,
        map.hi
    );
    let _ = writeln!(
        out,
        r#"<text x="{:.2}" y="{:.2}">{:.3}</text>"#,
        bar_x + 22.0,
        by,
        map.lo
    );
    out.push_str("</svg>\n");
    Ok(out)
}
