//! Deterministic SVG reports: confusion heatmaps and the sweep trade-off chart.
//!
//! Every report carries the JSON payload it was drawn from; the SVG is a pure
//! function of that payload, so identical inputs give identical bytes.

use std::fmt::Write;

use debias_core::tuner::{PresetTable, SweepPoint};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::error::{Result, WorkbenchError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReportKind {
    Heatmap,
    LineChart,
    Table,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub kind: ReportKind,
    pub payload: Value,
    pub rendered: String,
}

/// Sequential for row-normalized matrices in `[0, 1]`, diverging (zero is
/// white) for difference matrices.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scale {
    Sequential,
    Diverging,
}

pub const NEUTRAL: &str = "#ffffff";
const HIGH: (f64, f64, f64) = (8.0, 48.0, 107.0);
const POSITIVE: (f64, f64, f64) = (33.0, 102.0, 172.0);
const NEGATIVE: (f64, f64, f64) = (178.0, 24.0, 43.0);

fn mix(to: (f64, f64, f64), t: f64) -> String {
    let t = t.clamp(0.0, 1.0);
    if t == 0.0 {
        return NEUTRAL.to_string();
    }
    let c = |x: f64| (255.0 + (x - 255.0) * t).round() as u8;
    format!("#{:02x}{:02x}{:02x}", c(to.0), c(to.1), c(to.2))
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

fn check_finite<'a>(values: impl IntoIterator<Item = &'a f64>, what: &str) -> Result<()> {
    if values.into_iter().any(|v| !v.is_finite()) {
        return Err(WorkbenchError::Render(format!("{what} holds a non-finite value")));
    }
    Ok(())
}

const CELL: usize = 64;
const LEFT: usize = 150;
const TOP: usize = 150;

pub fn heatmap(title: &str, categories: &[String], values: &[Vec<f64>], scale: Scale) -> Result<Report> {
    let k = categories.len();
    if values.len() != k || values.iter().any(|r| r.len() != k) {
        return Err(WorkbenchError::Render("matrix shape does not match categories".into()));
    }
    check_finite(values.iter().flatten(), "matrix")?;
    let max_abs = values.iter().flatten().fold(0.0f64, |m, v| m.max(v.abs()));

    let width = LEFT + k * CELL + 20;
    let height = TOP + k * CELL + 20;
    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" viewBox="0 0 {width} {height}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(svg, r##"<rect width="{width}" height="{height}" fill="#ffffff"/>"##);
    let _ = writeln!(svg, r#"<text x="10" y="20" font-size="14">{}</text>"#, escape(title));
    let _ = writeln!(
        svg,
        r#"<text x="{}" y="{}" text-anchor="middle">predicted</text>"#,
        LEFT + k * CELL / 2,
        44
    );
    let _ = writeln!(
        svg,
        r#"<text x="14" y="{}" transform="rotate(-90 14 {})" text-anchor="middle">true</text>"#,
        TOP + k * CELL / 2,
        TOP + k * CELL / 2
    );
    for (j, c) in categories.iter().enumerate() {
        let x = LEFT + j * CELL + CELL / 2;
        let y = TOP - 8;
        let _ = writeln!(
            svg,
            r#"<text x="{x}" y="{y}" transform="rotate(-45 {x} {y})">{}</text>"#,
            escape(c)
        );
    }
    for (i, c) in categories.iter().enumerate() {
        let _ = writeln!(
            svg,
            r#"<text x="{}" y="{}" text-anchor="end">{}</text>"#,
            LEFT - 8,
            TOP + i * CELL + CELL / 2 + 4,
            escape(c)
        );
    }
    for (i, row) in values.iter().enumerate() {
        for (j, &v) in row.iter().enumerate() {
            let (fill, strength) = match scale {
                Scale::Sequential => (mix(HIGH, v), v.abs()),
                Scale::Diverging => {
                    let t = if max_abs > 0.0 { v / max_abs } else { 0.0 };
                    let to = if t < 0.0 { NEGATIVE } else { POSITIVE };
                    (mix(to, t.abs()), t.abs())
                }
            };
            let ink = if strength > 0.6 { "#ffffff" } else { "#000000" };
            let x = LEFT + j * CELL;
            let y = TOP + i * CELL;
            let _ = writeln!(
                svg,
                r##"<rect x="{x}" y="{y}" width="{CELL}" height="{CELL}" fill="{fill}" stroke="#cccccc"/>"##
            );
            let _ = writeln!(
                svg,
                r#"<text x="{}" y="{}" text-anchor="middle" fill="{ink}">{:.2}</text>"#,
                x + CELL / 2,
                y + CELL / 2 + 4,
                v
            );
        }
    }
    svg.push_str("</svg>\n");
    Ok(Report {
        kind: ReportKind::Heatmap,
        payload: json!({
            "title": title,
            "categories": categories,
            "values": values,
            "scale": scale,
        }),
        rendered: svg,
    })
}

const W: f64 = 640.0;
const H: f64 = 400.0;
const PAD_L: f64 = 60.0;
const PAD_R: f64 = 70.0;
const PAD_T: f64 = 40.0;
const PAD_B: f64 = 50.0;

fn polyline(points: &[(f64, f64)], color: &str, dash: bool) -> String {
    let coords: Vec<String> = points.iter().map(|(x, y)| format!("{x:.2},{y:.2}")).collect();
    let dash = if dash { r#" stroke-dasharray="6 4""# } else { "" };
    format!(
        r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="2"{dash}/>"#,
        coords.join(" ")
    )
}

/// Accuracy and weighted F1 on a fixed left axis `[0, 1]`, signed bias on an
/// auto-scaled right axis, front members circled on the performance lines.
pub fn line_chart(category: &str, points: &[SweepPoint], front: &[f64]) -> Result<Report> {
    if points.is_empty() {
        return Err(WorkbenchError::Render("sweep is empty".into()));
    }
    check_finite(
        points
            .iter()
            .flat_map(|p| [&p.theta, &p.accuracy, &p.weighted_f1, &p.bias]),
        "sweep",
    )?;
    check_finite(front, "front")?;
    let (tmin, tmax) = points
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), p| (a.min(p.theta), b.max(p.theta)));
    let tspan = if tmax > tmin { tmax - tmin } else { 1.0 };
    let (bmin, bmax) = points
        .iter()
        .fold((0.0f64, 0.0f64), |(a, b), p| (a.min(p.bias), b.max(p.bias)));
    let (bmin, bmax) = if bmax > bmin { (bmin, bmax) } else { (-1.0, 1.0) };
    let plot_w = W - PAD_L - PAD_R;
    let plot_h = H - PAD_T - PAD_B;
    let x = |t: f64| PAD_L + (t - tmin) / tspan * plot_w;
    let y_left = |v: f64| PAD_T + (1.0 - v) * plot_h;
    let y_right = |v: f64| PAD_T + (bmax - v) / (bmax - bmin) * plot_h;

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(svg, r##"<rect width="{W}" height="{H}" fill="#ffffff"/>"##);
    let _ = writeln!(
        svg,
        r#"<text x="{PAD_L}" y="22" font-size="14">{}: performance and bias against theta</text>"#,
        escape(category)
    );
    let _ = writeln!(
        svg,
        r##"<rect x="{PAD_L}" y="{PAD_T}" width="{plot_w}" height="{plot_h}" fill="none" stroke="#444444"/>"##
    );
    for i in 0..=5 {
        let v = i as f64 / 5.0;
        let _ = writeln!(
            svg,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="end">{v:.1}</text>"#,
            PAD_L - 6.0,
            y_left(v) + 4.0
        );
        let b = bmin + (bmax - bmin) * v;
        let _ = writeln!(
            svg,
            r#"<text x="{:.2}" y="{:.2}">{b:.2}</text>"#,
            W - PAD_R + 6.0,
            y_right(b) + 4.0
        );
    }
    for p in points {
        let _ = writeln!(
            svg,
            r##"<line x1="{0:.2}" y1="{1:.2}" x2="{0:.2}" y2="{2:.2}" stroke="#444444"/><text x="{0:.2}" y="{3:.2}" text-anchor="middle">{4:.1}</text>"##,
            x(p.theta),
            PAD_T + plot_h,
            PAD_T + plot_h + 5.0,
            PAD_T + plot_h + 18.0,
            p.theta
        );
    }
    if bmin < 0.0 && bmax > 0.0 {
        let _ = writeln!(
            svg,
            r##"<line x1="{PAD_L}" y1="{0:.2}" x2="{1:.2}" y2="{0:.2}" stroke="#bbbbbb" stroke-dasharray="2 3"/>"##,
            y_right(0.0),
            PAD_L + plot_w
        );
    }
    let acc: Vec<(f64, f64)> = points.iter().map(|p| (x(p.theta), y_left(p.accuracy))).collect();
    let f1: Vec<(f64, f64)> = points.iter().map(|p| (x(p.theta), y_left(p.weighted_f1))).collect();
    let bias: Vec<(f64, f64)> = points.iter().map(|p| (x(p.theta), y_right(p.bias))).collect();
    let _ = writeln!(svg, "{}", polyline(&acc, "#1f77b4", false));
    let _ = writeln!(svg, "{}", polyline(&f1, "#2ca02c", false));
    let _ = writeln!(svg, "{}", polyline(&bias, "#d62728", true));
    for p in points.iter().filter(|p| front.contains(&p.theta)) {
        let _ = writeln!(
            svg,
            r##"<circle cx="{:.2}" cy="{:.2}" r="5" fill="none" stroke="#000000" stroke-width="1.5"/>"##,
            x(p.theta),
            y_left(p.weighted_f1)
        );
    }
    let legend_y = H - 12.0;
    for (i, (name, color)) in [
        ("accuracy", "#1f77b4"),
        ("weighted F1", "#2ca02c"),
        ("bias (right axis)", "#d62728"),
        ("Pareto front", "#000000"),
    ]
    .iter()
    .enumerate()
    {
        let lx = PAD_L + i as f64 * 135.0;
        let _ = writeln!(
            svg,
            r#"<rect x="{lx}" y="{}" width="10" height="10" fill="{color}"/><text x="{}" y="{legend_y}">{name}</text>"#,
            legend_y - 9.0,
            lx + 14.0
        );
    }
    svg.push_str("</svg>\n");
    Ok(Report {
        kind: ReportKind::LineChart,
        payload: json!({
            "category": category,
            "theta": points.iter().map(|p| p.theta).collect::<Vec<_>>(),
            "accuracy": points.iter().map(|p| p.accuracy).collect::<Vec<_>>(),
            "weighted_f1": points.iter().map(|p| p.weighted_f1).collect::<Vec<_>>(),
            "bias": points.iter().map(|p| p.bias).collect::<Vec<_>>(),
            "front": front,
        }),
        rendered: svg,
    })
}

fn theta_range(values: &[f64]) -> String {
    match (values.first(), values.last()) {
        (Some(a), Some(b)) if a == b => format!("{a:.1}"),
        (Some(a), Some(b)) => format!("{a:.1}-{b:.1}"),
        _ => "-".to_string(),
    }
}

const ROW: usize = 24;
const COLUMN: usize = 150;

/// Preset table: one row per category with the performance-emphasis range,
/// the balanced theta and the debias-emphasis range.
pub fn preset_table(table: &PresetTable) -> Result<Report> {
    for row in &table.rows {
        check_finite(
            row.performance_emphasis.iter().chain(&row.debias_emphasis).chain([&row.both]),
            "preset table",
        )?;
    }
    let header = ["category", "performance", "both", "debias"];
    let width = COLUMN * header.len() + 20;
    let height = ROW * (table.rows.len() + 1) + 20;
    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" viewBox="0 0 {width} {height}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(svg, r##"<rect width="{width}" height="{height}" fill="#ffffff"/>"##);
    let mut cells = vec![header.map(str::to_string).to_vec()];
    for row in &table.rows {
        cells.push(vec![
            row.category.clone(),
            theta_range(&row.performance_emphasis),
            format!("{:.1}", row.both),
            theta_range(&row.debias_emphasis),
        ]);
    }
    for (i, line) in cells.iter().enumerate() {
        let y = 10 + ROW * (i + 1) - 8;
        let weight = if i == 0 { r#" font-weight="bold""# } else { "" };
        for (j, cell) in line.iter().enumerate() {
            let _ = writeln!(svg, r#"<text x="{}" y="{y}"{weight}>{}</text>"#, 10 + j * COLUMN, escape(cell));
        }
    }
    svg.push_str("</svg>\n");
    Ok(Report {
        kind: ReportKind::Table,
        payload: serde_json::to_value(table).map_err(|e| WorkbenchError::Render(e.to_string()))?,
        rendered: svg,
    })
}
