//! Minimal deterministic SVG charts: scatter and line series on linear or
//! logarithmic axes.

use std::fmt::Write;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PlotError {
    #[error("chart has no plottable points")]
    Empty,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scale {
    Linear,
    Log,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SeriesStyle {
    Markers,
    Line,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Series {
    pub label: String,
    pub style: SeriesStyle,
    pub points: Vec<(f64, f64)>,
    /// Optional symmetric y error per point, drawn as vertical bars.
    pub y_err: Option<Vec<f64>>,
}

impl Series {
    pub fn markers(label: &str, points: Vec<(f64, f64)>) -> Self {
        Self {
            label: label.into(),
            style: SeriesStyle::Markers,
            points,
            y_err: None,
        }
    }

    pub fn line(label: &str, points: Vec<(f64, f64)>) -> Self {
        Self {
            label: label.into(),
            style: SeriesStyle::Line,
            points,
            y_err: None,
        }
    }

    pub fn with_errors(mut self, y_err: Vec<f64>) -> Self {
        self.y_err = Some(y_err);
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Chart {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub x_scale: Scale,
    pub y_scale: Scale,
    pub series: Vec<Series>,
}

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 440.0;
const LEFT: f64 = 80.0;
const RIGHT: f64 = 20.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 60.0;
const PALETTE: [&str; 6] = [
    "#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b",
];

/// Axis mapping from data to pixel coordinates.
#[derive(Debug, Clone, Copy)]
struct Axis {
    scale: Scale,
    lo: f64,
    hi: f64,
    px_lo: f64,
    px_hi: f64,
}

impl Axis {
    fn new(
        scale: Scale,
        values: impl Iterator<Item = f64>,
        px_lo: f64,
        px_hi: f64,
    ) -> Option<Self> {
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for v in values.filter(|v| usable(scale, *v)) {
            let t = transform(scale, v);
            lo = lo.min(t);
            hi = hi.max(t);
        }
        if !lo.is_finite() {
            return None;
        }
        match scale {
            Scale::Log => {
                lo = lo.floor();
                hi = hi.ceil();
                if hi <= lo {
                    hi = lo + 1.0;
                }
            }
            Scale::Linear => {
                if hi <= lo {
                    let pad = if lo == 0.0 { 1.0 } else { 0.1 * lo.abs() };
                    lo -= pad;
                    hi += pad;
                }
                let step = nice_step((hi - lo) / 5.0);
                lo = (lo / step).floor() * step;
                hi = (hi / step).ceil() * step;
            }
        }
        Some(Self {
            scale,
            lo,
            hi,
            px_lo,
            px_hi,
        })
    }

    fn px(&self, v: f64) -> f64 {
        let t = transform(self.scale, v);
        self.px_lo + (t - self.lo) / (self.hi - self.lo) * (self.px_hi - self.px_lo)
    }

    /// Tick positions in data units with their labels.
    fn ticks(&self) -> Vec<(f64, String)> {
        match self.scale {
            Scale::Log => {
                let (a, b) = (self.lo as i32, self.hi as i32);
                let stride = ((b - a) / 8).max(1);
                (a..=b)
                    .filter(|e| (e - a) % stride == 0)
                    .map(|e| (10f64.powi(e), format!("1e{e}")))
                    .collect()
            }
            Scale::Linear => {
                let step = nice_step((self.hi - self.lo) / 5.0);
                let n = ((self.hi - self.lo) / step).round() as i64;
                (0..=n)
                    .map(|k| {
                        let v = self.lo + step * k as f64;
                        (v, format_tick(v, step))
                    })
                    .collect()
            }
        }
    }
}

fn usable(scale: Scale, v: f64) -> bool {
    v.is_finite() && (scale == Scale::Linear || v > 0.0)
}

fn transform(scale: Scale, v: f64) -> f64 {
    match scale {
        Scale::Linear => v,
        Scale::Log => v.log10(),
    }
}

fn nice_step(raw: f64) -> f64 {
    let mag = 10f64.powf(raw.log10().floor());
    let frac = raw / mag;
    let nice = if frac <= 1.0 {
        1.0
    } else if frac <= 2.0 {
        2.0
    } else if frac <= 5.0 {
        5.0
    } else {
        10.0
    };
    nice * mag
}

fn format_tick(v: f64, step: f64) -> String {
    let v = if v.abs() < 1e-9 * step { 0.0 } else { v };
    let mag = v.abs().max(step);
    if !(1e-3..1e5).contains(&mag) {
        return format!("{v:.1e}");
    }
    let decimals = (-step.log10().floor()).max(0.0) as usize;
    format!("{v:.decimals$}")
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

impl Chart {
    pub fn new(title: &str, x_label: &str, y_label: &str, x_scale: Scale, y_scale: Scale) -> Self {
        Self {
            title: title.into(),
            x_label: x_label.into(),
            y_label: y_label.into(),
            x_scale,
            y_scale,
            series: Vec::new(),
        }
    }

    pub fn with_series(mut self, series: Series) -> Self {
        self.series.push(series);
        self
    }

    /// Data range covered by the x axis after rounding to ticks.
    pub fn x_range(&self) -> Option<(f64, f64)> {
        let axis = self.x_axis()?;
        Some(match axis.scale {
            Scale::Log => (10f64.powf(axis.lo), 10f64.powf(axis.hi)),
            Scale::Linear => (axis.lo, axis.hi),
        })
    }

    fn plottable(&self, s: &Series) -> Vec<(usize, f64, f64)> {
        s.points
            .iter()
            .enumerate()
            .filter(|(_, (x, y))| usable(self.x_scale, *x) && usable(self.y_scale, *y))
            .map(|(i, &(x, y))| (i, x, y))
            .collect()
    }

    fn x_axis(&self) -> Option<Axis> {
        let xs = self.series.iter().flat_map(|s| {
            self.plottable(s)
                .into_iter()
                .map(|p| p.1)
                .collect::<Vec<_>>()
        });
        Axis::new(self.x_scale, xs, LEFT, WIDTH - RIGHT)
    }

    fn y_axis(&self) -> Option<Axis> {
        let ys = self.series.iter().flat_map(|s| {
            self.plottable(s)
                .into_iter()
                .map(|p| p.2)
                .collect::<Vec<_>>()
        });
        Axis::new(self.y_scale, ys, HEIGHT - BOTTOM, TOP)
    }

    /// Renders the chart as a standalone SVG document. Points that cannot
    /// be shown (non-finite, or non-positive on a log axis) are skipped.
    pub fn to_svg(&self) -> Result<String, PlotError> {
        let (xa, ya) = match (self.x_axis(), self.y_axis()) {
            (Some(x), Some(y)) => (x, y),
            _ => return Err(PlotError::Empty),
        };
        let mut s = String::new();
        let w = &mut s;
        let _ = writeln!(
            w,
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
        );
        let _ = writeln!(
            w,
            r#"<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#
        );
        let _ = writeln!(
            w,
            r#"<text x="{:.1}" y="24" text-anchor="middle" font-size="14">{}</text>"#,
            WIDTH / 2.0,
            escape(&self.title)
        );
        let (x0, x1, y0, y1) = (LEFT, WIDTH - RIGHT, HEIGHT - BOTTOM, TOP);
        let _ = writeln!(
            w,
            r##"<rect x="{x0:.1}" y="{y1:.1}" width="{:.1}" height="{:.1}" fill="none" stroke="#333"/>"##,
            x1 - x0,
            y0 - y1
        );
        for (v, label) in xa.ticks() {
            let px = xa.px(v);
            let _ = writeln!(
                w,
                r##"<line x1="{px:.2}" y1="{y0:.1}" x2="{px:.2}" y2="{y1:.1}" stroke="#ddd"/><text x="{px:.2}" y="{:.1}" text-anchor="middle">{}</text>"##,
                y0 + 16.0,
                escape(&label)
            );
        }
        for (v, label) in ya.ticks() {
            let py = ya.px(v);
            let _ = writeln!(
                w,
                r##"<line x1="{x0:.1}" y1="{py:.2}" x2="{x1:.1}" y2="{py:.2}" stroke="#ddd"/><text x="{:.1}" y="{:.2}" text-anchor="end">{}</text>"##,
                x0 - 6.0,
                py + 4.0,
                escape(&label)
            );
        }
        let _ = writeln!(
            w,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{}</text>"#,
            (x0 + x1) / 2.0,
            HEIGHT - 16.0,
            escape(&self.x_label)
        );
        let _ = writeln!(
            w,
            r#"<text x="18" y="{:.1}" text-anchor="middle" transform="rotate(-90 18 {:.1})">{}</text>"#,
            (y0 + y1) / 2.0,
            (y0 + y1) / 2.0,
            escape(&self.y_label)
        );
        for (k, series) in self.series.iter().enumerate() {
            let color = PALETTE[k % PALETTE.len()];
            let pts = self.plottable(series);
            match series.style {
                SeriesStyle::Line => {
                    if pts.len() >= 2 {
                        let path: Vec<String> = pts
                            .iter()
                            .map(|&(_, x, y)| format!("{:.2},{:.2}", xa.px(x), ya.px(y)))
                            .collect();
                        let _ = writeln!(
                            w,
                            r#"<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{}"/>"#,
                            path.join(" ")
                        );
                    }
                }
                SeriesStyle::Markers => {
                    for &(i, x, y) in &pts {
                        let (px, py) = (xa.px(x), ya.px(y));
                        if let Some(e) = series.y_err.as_ref().and_then(|e| e.get(i)) {
                            let lo = y - e;
                            let lo_px = if usable(self.y_scale, lo) {
                                ya.px(lo)
                            } else {
                                y0
                            };
                            let hi_px = ya.px(y + e);
                            let _ = writeln!(
                                w,
                                r#"<line x1="{px:.2}" y1="{lo_px:.2}" x2="{px:.2}" y2="{hi_px:.2}" stroke="{color}"/>"#
                            );
                        }
                        let _ = writeln!(
                            w,
                            r#"<circle cx="{px:.2}" cy="{py:.2}" r="3" fill="{color}"/>"#
                        );
                    }
                }
            }
            let ly = y1 + 16.0 + 16.0 * k as f64;
            let _ = writeln!(
                w,
                r#"<rect x="{:.1}" y="{:.1}" width="10" height="10" fill="{color}"/><text x="{:.1}" y="{:.1}">{}</text>"#,
                x0 + 10.0,
                ly - 9.0,
                x0 + 26.0,
                ly,
                escape(&series.label)
            );
        }
        s.push_str("</svg>\n");
        Ok(s)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nice_steps() {
        assert_eq!(nice_step(0.13), 0.2);
        assert_eq!(nice_step(3.0), 5.0);
        assert_eq!(nice_step(7.0), 10.0);
    }

    #[test]
    fn log_axis_rounds_to_decades() {
        let a = Axis::new(Scale::Log, [1.0, 1e7].into_iter(), 0.0, 100.0).unwrap();
        assert_eq!((a.lo, a.hi), (0.0, 7.0));
        assert_eq!(a.ticks().first().unwrap().1, "1e0");
    }

    #[test]
    fn escapes_markup() {
        assert_eq!(escape("a<b & \"c\""), "a&lt;b &amp; &quot;c&quot;");
    }
}
