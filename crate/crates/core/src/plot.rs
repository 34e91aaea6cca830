//! Minimal SVG 1.1 line plots: agent trajectories in the plane (with a cross
//! at each starting point) and quantities against time.

use std::fmt::Write as _;
use std::io::Write;

use crate::error::{Error, Result};

/// Longest polyline emitted per series; longer inputs are strided.
const MAX_POINTS: usize = 4000;

const PALETTE: [&str; 8] = [
    "#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#17becf",
];

#[derive(Debug, Clone, PartialEq)]
pub struct Series {
    pub name: String,
    pub points: Vec<(f64, f64)>,
}

impl Series {
    pub fn new(name: impl Into<String>, points: Vec<(f64, f64)>) -> Self {
        Self {
            name: name.into(),
            points,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PlotKind {
    /// x–y paths; the first point of every series gets a cross marker.
    Trajectory,
    /// y against t.
    TimeSeries,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlotStyle {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub kind: PlotKind,
    pub log_y: bool,
    pub width: f64,
    pub height: f64,
}

impl PlotStyle {
    pub fn new(kind: PlotKind, title: &str, x_label: &str, y_label: &str) -> Self {
        Self {
            title: title.into(),
            x_label: x_label.into(),
            y_label: y_label.into(),
            kind,
            log_y: false,
            width: 640.0,
            height: 480.0,
        }
    }

    pub fn log_y(mut self, on: bool) -> Self {
        self.log_y = on;
        self
    }
}

struct Frame {
    x0: f64,
    x1: f64,
    y0: f64,
    y1: f64,
    left: f64,
    right: f64,
    top: f64,
    bottom: f64,
}

impl Frame {
    fn px(&self, x: f64) -> f64 {
        self.left + (x - self.x0) / (self.x1 - self.x0) * (self.right - self.left)
    }

    fn py(&self, y: f64) -> f64 {
        self.bottom - (y - self.y0) / (self.y1 - self.y0) * (self.bottom - self.top)
    }
}

fn nice_ticks(lo: f64, hi: f64) -> Vec<f64> {
    let raw = (hi - lo) / 5.0;
    let mag = 10f64.powf(raw.log10().floor());
    let step = [1.0, 2.0, 5.0, 10.0]
        .iter()
        .map(|m| m * mag)
        .find(|s| *s >= raw)
        .unwrap_or(10.0 * mag);
    let first = (lo / step).ceil() as i64;
    let last = (hi / step).floor() as i64;
    (first..=last).map(|k| k as f64 * step).collect()
}

fn fmt_tick(v: f64) -> String {
    if v == 0.0 {
        "0".into()
    } else if v.abs() >= 1e4 || v.abs() < 1e-3 {
        format!("{v:.1e}")
    } else {
        let s = format!("{v:.3}");
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    }
}

fn escape(text: &str) -> String {
    text.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
}

/// Renders `series` as a standalone SVG document; returns bytes written.
pub fn emit_svg<W: Write>(series: &[Series], style: &PlotStyle, mut sink: W) -> Result<usize> {
    let transform = |y: f64| if style.log_y { y.log10() } else { y };
    let cleaned: Vec<Vec<(f64, f64)>> = series
        .iter()
        .map(|s| {
            let stride = s.points.len().div_ceil(MAX_POINTS).max(1);
            let last = s.points.len().saturating_sub(1);
            s.points
                .iter()
                .enumerate()
                .filter(|(k, _)| k % stride == 0 || *k == last)
                .map(|(_, &(x, y))| (x, transform(y)))
                .filter(|(x, y)| x.is_finite() && y.is_finite())
                .collect()
        })
        .collect();
    if series.is_empty() || cleaned.iter().all(Vec::is_empty) {
        return Err(Error::InvalidArgument("nothing to plot".into()));
    }

    let all = cleaned.iter().flatten();
    let (mut x0, mut x1, mut y0, mut y1) = (f64::MAX, f64::MIN, f64::MAX, f64::MIN);
    for &(x, y) in all {
        x0 = x0.min(x);
        x1 = x1.max(x);
        y0 = y0.min(y);
        y1 = y1.max(y);
    }
    let pad = |lo: f64, hi: f64| {
        let span = hi - lo;
        if span > 0.0 {
            (lo - 0.03 * span, hi + 0.03 * span)
        } else {
            (lo - 0.5 - lo.abs() * 0.05, hi + 0.5 + hi.abs() * 0.05)
        }
    };
    let (x0, x1) = pad(x0, x1);
    let (y0, y1) = pad(y0, y1);
    let frame = Frame {
        x0,
        x1,
        y0,
        y1,
        left: 70.0,
        right: style.width - 150.0,
        top: 40.0,
        bottom: style.height - 55.0,
    };

    let mut doc = String::new();
    let (w, h) = (style.width, style.height);
    writeln!(
        doc,
        r#"<?xml version="1.0" encoding="UTF-8"?>
<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{w}" height="{h}" viewBox="0 0 {w} {h}" font-family="sans-serif" font-size="12">
<rect x="0" y="0" width="{w}" height="{h}" fill="white"/>
<text x="{:.1}" y="24" text-anchor="middle" font-size="15">{}</text>"#,
        w / 2.0,
        escape(&style.title)
    )
    .unwrap();

    // axes box and ticks
    writeln!(
        doc,
        r#"<rect x="{:.1}" y="{:.1}" width="{:.1}" height="{:.1}" fill="none" stroke="black"/>"#,
        frame.left,
        frame.top,
        frame.right - frame.left,
        frame.bottom - frame.top
    )
    .unwrap();
    for t in nice_ticks(x0, x1) {
        let px = frame.px(t);
        writeln!(
            doc,
            r#"<line x1="{px:.1}" y1="{b:.1}" x2="{px:.1}" y2="{b2:.1}" stroke="black"/><text x="{px:.1}" y="{ty:.1}" text-anchor="middle">{}</text>"#,
            fmt_tick(t),
            b = frame.bottom,
            b2 = frame.bottom + 5.0,
            ty = frame.bottom + 18.0,
        )
        .unwrap();
    }
    for t in nice_ticks(y0, y1) {
        let py = frame.py(t);
        let label = if style.log_y {
            format!("1e{}", fmt_tick(t))
        } else {
            fmt_tick(t)
        };
        writeln!(
            doc,
            r#"<line x1="{l2:.1}" y1="{py:.1}" x2="{l:.1}" y2="{py:.1}" stroke="black"/><text x="{tx:.1}" y="{ty:.1}" text-anchor="end">{label}</text>"#,
            l = frame.left,
            l2 = frame.left - 5.0,
            tx = frame.left - 8.0,
            ty = py + 4.0,
        )
        .unwrap();
    }
    writeln!(
        doc,
        r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{}</text>
<text x="16" y="{:.1}" text-anchor="middle" transform="rotate(-90 16 {:.1})">{}</text>"#,
        (frame.left + frame.right) / 2.0,
        h - 15.0,
        escape(&style.x_label),
        (frame.top + frame.bottom) / 2.0,
        (frame.top + frame.bottom) / 2.0,
        escape(&style.y_label)
    )
    .unwrap();

    for (k, (s, pts)) in series.iter().zip(&cleaned).enumerate() {
        let color = PALETTE[k % PALETTE.len()];
        if !pts.is_empty() {
            let coords: Vec<String> = pts
                .iter()
                .map(|&(x, y)| format!("{:.2},{:.2}", frame.px(x), frame.py(y)))
                .collect();
            writeln!(
                doc,
                r#"<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{}"/>"#,
                coords.join(" ")
            )
            .unwrap();
            if style.kind == PlotKind::Trajectory {
                let (cx, cy) = (frame.px(pts[0].0), frame.py(pts[0].1));
                writeln!(
                    doc,
                    r#"<path class="start-marker" stroke="{color}" stroke-width="2" d="M{:.2},{:.2} L{:.2},{:.2} M{:.2},{:.2} L{:.2},{:.2}"/>"#,
                    cx - 5.0, cy - 5.0, cx + 5.0, cy + 5.0, cx - 5.0, cy + 5.0, cx + 5.0, cy - 5.0
                )
                .unwrap();
            }
        }
        // legend
        let ly = frame.top + 10.0 + 18.0 * k as f64;
        writeln!(
            doc,
            r#"<rect x="{:.1}" y="{:.1}" width="14" height="4" fill="{color}"/><text x="{:.1}" y="{:.1}">{}</text>"#,
            frame.right + 12.0,
            ly - 2.0,
            frame.right + 32.0,
            ly + 4.0,
            escape(&s.name)
        )
        .unwrap();
    }
    doc.push_str("</svg>\n");

    sink.write_all(doc.as_bytes())?;
    Ok(doc.len())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn render(series: &[Series], style: &PlotStyle) -> String {
        let mut buf = Vec::new();
        let n = emit_svg(series, style, &mut buf).unwrap();
        assert_eq!(n, buf.len());
        String::from_utf8(buf).unwrap()
    }

    #[test]
    fn single_series_single_polyline() {
        let style = PlotStyle::new(PlotKind::TimeSeries, "E", "t", "E");
        let doc = render(&[Series::new("a", vec![(0.0, 1.0), (1.0, 2.0)])], &style);
        assert_eq!(doc.matches("<polyline").count(), 1);
        assert_eq!(doc.matches("start-marker").count(), 0);
        assert!(doc.starts_with("<?xml") && doc.trim_end().ends_with("</svg>"));
    }

    #[test]
    fn trajectory_markers() {
        let style = PlotStyle::new(PlotKind::Trajectory, "paths", "x", "y");
        let series: Vec<Series> = (0..3)
            .map(|i| {
                Series::new(
                    format!("agent {}", i + 1),
                    vec![(i as f64, 0.0), (i as f64 + 1.0, 2.0)],
                )
            })
            .collect();
        let doc = render(&series, &style);
        assert_eq!(doc.matches("<polyline").count(), 3);
        assert_eq!(doc.matches("start-marker").count(), 3);
        assert!(doc.contains("agent 3"));
    }

    #[test]
    fn empty_input_rejected() {
        let style = PlotStyle::new(PlotKind::TimeSeries, "", "", "");
        assert!(emit_svg(&[], &style, Vec::new()).is_err());
        let nan = Series::new("bad", vec![(0.0, f64::NAN)]);
        assert!(emit_svg(&[nan], &style, Vec::new()).is_err());
    }

    #[test]
    fn log_axis_skips_nonpositive() {
        let style = PlotStyle::new(PlotKind::TimeSeries, "", "t", "E").log_y(true);
        let doc = render(
            &[Series::new(
                "e",
                vec![(0.0, 100.0), (1.0, 0.0), (2.0, 1e-3)],
            )],
            &style,
        );
        assert!(doc.contains("1e"));
    }

    #[test]
    fn ticks_are_round() {
        assert_eq!(nice_ticks(0.0, 10.0), vec![0.0, 2.0, 4.0, 6.0, 8.0, 10.0]);
        assert_eq!(fmt_tick(2.5), "2.5");
    }
}
