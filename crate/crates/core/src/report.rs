//! Benchmark tables and report rendering.
//!
//! CSV and table output give mAP in percent with exactly two decimals; JSON
//! keeps full-precision fractions. The SVG plot draws one panel per IoU
//! threshold with runs on the x axis, mAP on the y axis and one marker style
//! per method.

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::eval::{EvalReport, IouThreshold};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Json,
    Csv,
    Svg,
}

impl ReportFormat {
    pub fn from_extension(path: &Path) -> Option<Self> {
        match path.extension()?.to_str()? {
            "json" => Some(Self::Json),
            "csv" => Some(Self::Csv),
            "svg" => Some(Self::Svg),
            _ => None,
        }
    }
}

impl std::str::FromStr for ReportFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "json" => Ok(Self::Json),
            "csv" => Ok(Self::Csv),
            "svg" => Ok(Self::Svg),
            other => Err(Error::Config(format!("unknown report format `{other}`"))),
        }
    }
}

/// One method's mAP values, aligned with the table's thresholds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkRow {
    pub method: String,
    /// Experiment label (e.g. an augmentation setting); used by the plot.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub run: Option<String>,
    /// Fractions in `[0, 1]`.
    pub map: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkTable {
    pub thresholds: Vec<f64>,
    pub rows: Vec<BenchmarkRow>,
}

impl BenchmarkTable {
    pub fn new(thresholds: &[IouThreshold]) -> Self {
        Self {
            thresholds: thresholds.iter().map(|t| t.value()).collect(),
            rows: Vec::new(),
        }
    }

    /// Appends a row read off an evaluation report.
    ///
    /// The report must cover every threshold of the table.
    pub fn push_report(
        &mut self,
        method: impl Into<String>,
        run: Option<String>,
        report: &EvalReport,
    ) -> Result<()> {
        let method = method.into();
        let map = self
            .thresholds
            .iter()
            .map(|&t| {
                report.map_at(t).ok_or_else(|| {
                    Error::Validation(format!("report for `{method}` has no mAP at IoU {t}"))
                })
            })
            .collect::<Result<Vec<_>>>()?;
        self.rows.push(BenchmarkRow { method, run, map });
        Ok(())
    }

    pub fn push_row(&mut self, row: BenchmarkRow) -> Result<()> {
        if row.map.len() != self.thresholds.len() {
            return Err(Error::Validation(format!(
                "row `{}` has {} values for {} thresholds",
                row.method,
                row.map.len(),
                self.thresholds.len()
            )));
        }
        self.rows.push(row);
        Ok(())
    }

    fn has_runs(&self) -> bool {
        self.rows.iter().any(|r| r.run.is_some())
    }
}

/// Anything [`render`] can draw.
#[derive(Debug, Clone, Copy)]
pub enum Report<'a> {
    Eval(&'a EvalReport),
    Benchmark(&'a BenchmarkTable),
}

pub fn render(report: Report<'_>, format: ReportFormat) -> String {
    match (report, format) {
        (Report::Eval(r), ReportFormat::Json) => json(r),
        (Report::Eval(r), ReportFormat::Csv) => eval_csv(r),
        (Report::Eval(r), ReportFormat::Svg) => plot_svg(&eval_as_table(r)),
        (Report::Benchmark(t), ReportFormat::Json) => json(t),
        (Report::Benchmark(t), ReportFormat::Csv) => benchmark_csv(t),
        (Report::Benchmark(t), ReportFormat::Svg) => plot_svg(t),
    }
}

fn json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("plain data serializes");
    s.push('\n');
    s
}

/// Percent with two decimals: `0.755` renders as `75.50`.
pub fn percent(fraction: f64) -> String {
    format!("{:.2}", fraction * 100.0)
}

fn threshold_label(t: f64) -> String {
    IouThreshold::new(t)
        .map(|t| t.percent_label())
        .unwrap_or_else(|_| t.to_string())
}

pub fn benchmark_csv(table: &BenchmarkTable) -> String {
    let runs = table.has_runs();
    let mut out = String::from("method");
    if runs {
        out.push_str(",run");
    }
    for &t in &table.thresholds {
        let _ = write!(out, ",mAP{}", threshold_label(t));
    }
    out.push('\n');
    for row in &table.rows {
        out.push_str(&row.method);
        if runs {
            out.push(',');
            out.push_str(row.run.as_deref().unwrap_or(""));
        }
        for &v in &row.map {
            out.push(',');
            out.push_str(&percent(v));
        }
        out.push('\n');
    }
    out
}

/// `iou,class,n_gt,ap` rows per threshold, then a `mAP` row. Classes
/// without annotations have an empty `ap` cell.
pub fn eval_csv(report: &EvalReport) -> String {
    let mut out = String::from("iou,class,n_gt,ap\n");
    for t in &report.thresholds {
        let mut total = 0;
        for c in &t.classes {
            total += c.n_gt;
            let ap = c.ap.map(percent).unwrap_or_default();
            let _ = writeln!(out, "{},{},{},{}", t.iou, c.class, c.n_gt, ap);
        }
        let _ = writeln!(out, "{},mAP,{},{}", t.iou, total, percent(t.map));
    }
    out
}

fn eval_as_table(report: &EvalReport) -> BenchmarkTable {
    BenchmarkTable {
        thresholds: report.thresholds.iter().map(|t| t.iou).collect(),
        rows: vec![BenchmarkRow {
            method: report.detections_id.clone(),
            run: None,
            map: report.thresholds.iter().map(|t| t.map).collect(),
        }],
    }
}

const PANEL_W: f64 = 260.0;
const PANEL_H: f64 = 220.0;
const MARGIN_L: f64 = 50.0;
const MARGIN_T: f64 = 30.0;
const MARGIN_B: f64 = 60.0;
const GAP: f64 = 30.0;
const LEGEND_H: f64 = 24.0;

/// Marker styles cycled over methods in order of first appearance.
const STYLES: [(&str, Marker); 5] = [
    ("red", Marker::Cross),
    ("blue", Marker::Circle),
    ("green", Marker::Star),
    ("purple", Marker::Square),
    ("orange", Marker::Diamond),
];

#[derive(Debug, Clone, Copy)]
enum Marker {
    Cross,
    Circle,
    Star,
    Square,
    Diamond,
}

fn marker(out: &mut String, kind: Marker, color: &str, cx: f64, cy: f64) {
    let r = 5.0;
    match kind {
        Marker::Cross => {
            let _ = writeln!(
                out,
                r#"<path d="M{:.2} {:.2}L{:.2} {:.2}M{:.2} {:.2}L{:.2} {:.2}" stroke="{color}" stroke-width="2"/>"#,
                cx - r, cy - r, cx + r, cy + r, cx - r, cy + r, cx + r, cy - r
            );
        }
        Marker::Circle => {
            let _ = writeln!(
                out,
                r#"<circle cx="{cx:.2}" cy="{cy:.2}" r="{r:.2}" fill="none" stroke="{color}" stroke-width="2"/>"#
            );
        }
        Marker::Star => {
            let mut d = String::new();
            for i in 0..10 {
                let radius = if i % 2 == 0 { r + 1.5 } else { (r + 1.5) * 0.45 };
                let angle = std::f64::consts::PI * (i as f64) / 5.0 - std::f64::consts::FRAC_PI_2;
                let _ = write!(
                    d,
                    "{}{:.2} {:.2}",
                    if i == 0 { "M" } else { "L" },
                    cx + radius * angle.cos(),
                    cy + radius * angle.sin()
                );
            }
            let _ = writeln!(out, r#"<path d="{d}Z" fill="{color}"/>"#);
        }
        Marker::Square => {
            let _ = writeln!(
                out,
                r#"<rect x="{:.2}" y="{:.2}" width="{:.2}" height="{:.2}" fill="none" stroke="{color}" stroke-width="2"/>"#,
                cx - r, cy - r, 2.0 * r, 2.0 * r
            );
        }
        Marker::Diamond => {
            let _ = writeln!(
                out,
                r#"<path d="M{:.2} {:.2}L{:.2} {:.2}L{:.2} {:.2}L{:.2} {:.2}Z" fill="none" stroke="{color}" stroke-width="2"/>"#,
                cx, cy - r, cx + r, cy, cx, cy + r, cx - r, cy
            );
        }
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

fn first_appearance<'a>(items: impl Iterator<Item = &'a str>) -> Vec<&'a str> {
    let mut out: Vec<&str> = Vec::new();
    for s in items {
        if !out.contains(&s) {
            out.push(s);
        }
    }
    out
}

/// mAP-vs-run scatter, one panel per threshold.
pub fn plot_svg(table: &BenchmarkTable) -> String {
    let methods = first_appearance(table.rows.iter().map(|r| r.method.as_str()));
    let runs = first_appearance(table.rows.iter().map(|r| r.run.as_deref().unwrap_or("")));
    let n_panels = table.thresholds.len().max(1) as f64;
    let width = MARGIN_L + n_panels * (PANEL_W + GAP);
    let height = MARGIN_T + PANEL_H + MARGIN_B + LEGEND_H;

    let mut out = String::new();
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width:.0}" height="{height:.0}" viewBox="0 0 {width:.0} {height:.0}" font-family="sans-serif" font-size="11">"#
    );
    let _ = writeln!(out, r#"<rect width="100%" height="100%" fill="white"/>"#);

    for (p, &t) in table.thresholds.iter().enumerate() {
        let left = MARGIN_L + p as f64 * (PANEL_W + GAP);
        let bottom = MARGIN_T + PANEL_H;
        let _ = writeln!(
            out,
            r#"<rect x="{left:.2}" y="{MARGIN_T:.2}" width="{PANEL_W:.2}" height="{PANEL_H:.2}" fill="none" stroke="black"/>"#
        );
        let _ = writeln!(
            out,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">IoU {}</text>"#,
            left + PANEL_W / 2.0,
            MARGIN_T - 10.0,
            threshold_label(t)
        );
        for tick in (0..=100).step_by(20) {
            let y = bottom - PANEL_H * tick as f64 / 100.0;
            let _ = writeln!(
                out,
                r#"<path d="M{:.2} {y:.2}L{left:.2} {y:.2}" stroke="black"/><text x="{:.2}" y="{:.2}" text-anchor="end">{tick}</text>"#,
                left - 4.0,
                left - 6.0,
                y + 4.0
            );
        }
        let slot = PANEL_W / runs.len().max(1) as f64;
        for (i, run) in runs.iter().enumerate() {
            let x = left + slot * (i as f64 + 0.5);
            let _ = writeln!(
                out,
                r#"<text x="{x:.2}" y="{:.2}" text-anchor="end" transform="rotate(-30 {x:.2} {:.2})">{}</text>"#,
                bottom + 14.0,
                bottom + 14.0,
                escape(run)
            );
        }
        for row in &table.rows {
            let Some(&v) = row.map.get(p) else { continue };
            let m = methods.iter().position(|&m| m == row.method).unwrap_or(0);
            let r = runs
                .iter()
                .position(|&r| r == row.run.as_deref().unwrap_or(""))
                .unwrap_or(0);
            let (color, kind) = STYLES[m % STYLES.len()];
            marker(
                &mut out,
                kind,
                color,
                left + slot * (r as f64 + 0.5),
                bottom - PANEL_H * v.clamp(0.0, 1.0),
            );
        }
    }

    let legend_y = MARGIN_T + PANEL_H + MARGIN_B;
    for (i, method) in methods.iter().enumerate() {
        let x = MARGIN_L + 10.0 + i as f64 * 120.0;
        let (color, kind) = STYLES[i % STYLES.len()];
        marker(&mut out, kind, color, x, legend_y);
        let _ = writeln!(
            out,
            r#"<text x="{:.2}" y="{:.2}">{}</text>"#,
            x + 10.0,
            legend_y + 4.0,
            escape(method)
        );
    }
    let _ = writeln!(
        out,
        r#"<text x="14" y="{:.2}" transform="rotate(-90 14 {:.2})" text-anchor="middle">mAP (%)</text>"#,
        MARGIN_T + PANEL_H / 2.0,
        MARGIN_T + PANEL_H / 2.0
    );
    out.push_str("</svg>\n");
    out
}
