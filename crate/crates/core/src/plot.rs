//! SVG rendering of standardized calibration paths.
//!
//! Layout: time on the bottom axis, location (standard-deviation units) on
//! the left. The top axis labels selected times with the ordering-key value
//! of the subject entering there, and the right axis rescales locations to
//! raw cumulative errors (linear, so that `S_n` sits at `C_n`). Guides are
//! drawn for the first path: a horizontal band at the two-sided normal
//! critical value, the gray segment joining the path's endpoints, and two
//! red segments parallel to it at the Kolmogorov critical value.

use std::fmt::Write as _;

use crate::domain::{ProcessKind, ProcessPath};
use crate::error::{Error, Result};
use crate::inference::{kolmogorov_critical, std_normal_quantile};

const WIDTH: f64 = 720.0;
const HEIGHT: f64 = 520.0;
const LEFT: f64 = 80.0;
const RIGHT: f64 = 90.0;
const TOP: f64 = 70.0;
const BOTTOM: f64 = 60.0;

#[derive(Debug, Clone, PartialEq)]
pub struct PlotSpec {
    pub paths: Vec<ProcessPath>,
    pub alpha: f64,
    pub mean_guide: bool,
    pub bridge_guide: bool,
    pub title: Option<String>,
    pub top_axis_label: String,
}

impl PlotSpec {
    pub fn new(paths: Vec<ProcessPath>) -> Self {
        PlotSpec {
            paths,
            alpha: 0.05,
            mean_guide: true,
            bridge_guide: true,
            title: None,
            top_axis_label: "Predicted ITE".to_string(),
        }
    }
}

/// `(z, q)`: the two-sided normal critical value and the Kolmogorov
/// critical value at level `alpha`.
pub fn guide_levels(alpha: f64) -> (f64, f64) {
    (std_normal_quantile(1.0 - alpha / 2.0), kolmogorov_critical(alpha))
}

struct Frame {
    x0: f64,
    x1: f64,
    y0: f64,
    y1: f64,
}

impl Frame {
    fn px(&self, x: f64) -> f64 {
        LEFT + (x - self.x0) / (self.x1 - self.x0) * (WIDTH - LEFT - RIGHT)
    }

    fn py(&self, y: f64) -> f64 {
        HEIGHT - BOTTOM - (y - self.y0) / (self.y1 - self.y0) * (HEIGHT - TOP - BOTTOM)
    }
}

/// Round tick positions covering `[lo, hi]`.
fn nice_ticks(lo: f64, hi: f64, target: usize) -> Vec<f64> {
    let span = (hi - lo).abs().max(1e-12);
    let raw = span / target as f64;
    let mag = 10f64.powf(raw.log10().floor());
    let step = [1.0, 2.0, 2.5, 5.0, 10.0]
        .iter()
        .map(|m| m * mag)
        .find(|s| span / s <= target as f64)
        .unwrap_or(10.0 * mag);
    let first = (lo / step).ceil() as i64;
    let last = (hi / step).floor() as i64;
    (first..=last).map(|i| i as f64 * step).collect()
}

fn fmt_tick(v: f64) -> String {
    let s = format!("{v:.3}");
    let s = s.trim_end_matches('0').trim_end_matches('.');
    if s == "-0" {
        "0".to_string()
    } else {
        s.to_string()
    }
}

fn line(out: &mut String, class: &str, x1: f64, y1: f64, x2: f64, y2: f64) {
    let _ = writeln!(
        out,
        r#"<line class="{class}" x1="{x1:.3}" y1="{y1:.3}" x2="{x2:.3}" y2="{y2:.3}"/>"#
    );
}

fn text(out: &mut String, class: &str, x: f64, y: f64, anchor: &str, body: &str) {
    let _ = writeln!(
        out,
        r#"<text class="{class}" x="{x:.3}" y="{y:.3}" text-anchor="{anchor}">{}</text>"#,
        escape(body)
    );
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn kind_class(kind: ProcessKind) -> &'static str {
    match kind {
        ProcessKind::Risk => "path-risk",
        ProcessKind::IteConditional => "path-conditional",
        ProcessKind::IteMarginal => "path-marginal",
    }
}

/// Index of the first vertex whose time reaches `t`.
fn vertex_at(path: &ProcessPath, t: f64) -> usize {
    path.times
        .iter()
        .skip(1)
        .position(|&x| x >= t - 1e-12)
        .map(|i| i + 1)
        .unwrap_or(path.n())
}

/// Renders a standalone SVG 1.1 document. Output is a pure function of `spec`.
pub fn render_plot(spec: &PlotSpec) -> Result<String> {
    let main = spec.paths.first().ok_or(Error::EmptyPath)?;
    if spec.paths.iter().any(|p| p.times.len() < 2) {
        return Err(Error::EmptyPath);
    }
    let (z, q) = guide_levels(spec.alpha);
    let s_n = main.terminal_location();

    let mut x0: f64 = 0.0;
    let mut x1: f64 = 1.0;
    let mut y0: f64 = 0.0;
    let mut y1: f64 = 0.0;
    for p in &spec.paths {
        for (&t, &s) in p.times.iter().zip(&p.locations) {
            x0 = x0.min(t);
            x1 = x1.max(t);
            y0 = y0.min(s);
            y1 = y1.max(s);
        }
    }
    if spec.mean_guide {
        y0 = y0.min(-z);
        y1 = y1.max(z);
    }
    if spec.bridge_guide {
        y0 = y0.min(-q).min(s_n - q);
        y1 = y1.max(q).max(s_n + q);
    }
    let pad = 0.06 * (y1 - y0).max(1e-9);
    let frame = Frame {
        x0,
        x1,
        y0: y0 - pad,
        y1: y1 + pad,
    };

    let mut out = String::new();
    let _ = writeln!(out, r#"<?xml version="1.0" encoding="UTF-8" standalone="no"?>"#);
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">"#
    );
    out.push_str(concat!(
        "<style>\n",
        "text { font-family: sans-serif; font-size: 12px; fill: #222; }\n",
        ".axis { stroke: #222; stroke-width: 1; }\n",
        ".tick { stroke: #222; stroke-width: 1; }\n",
        ".grid { stroke: #ddd; stroke-width: 0.5; }\n",
        ".zero { stroke: #999; stroke-width: 0.8; }\n",
        ".guide-mean { stroke: #1f4fd1; stroke-width: 1.2; stroke-dasharray: 6 4; }\n",
        ".terminal { stroke: #1f4fd1; stroke-width: 1.5; }\n",
        ".bridge-line { stroke: #888; stroke-width: 1.2; }\n",
        ".guide-bridge { stroke: #d11f1f; stroke-width: 1.2; stroke-dasharray: 6 4; }\n",
        ".path { fill: none; stroke-width: 1.2; stroke-linejoin: round; }\n",
        ".path-conditional, .path-risk { stroke: #000; }\n",
        ".path-marginal { stroke: #1f4fd1; }\n",
        ".path.series-1.path-risk { stroke: #b35900; }\n",
        "</style>\n"
    ));
    let _ = writeln!(out, r##"<rect x="0" y="0" width="{WIDTH}" height="{HEIGHT}" fill="#fff"/>"##);
    if let Some(title) = &spec.title {
        text(&mut out, "title", WIDTH / 2.0, 20.0, "middle", title);
    }

    let (left, right) = (frame.px(frame.x0), frame.px(frame.x1));
    let (top, bottom) = (frame.py(frame.y1), frame.py(frame.y0));

    // grid and axes
    let time_ticks = nice_ticks(frame.x0, frame.x1, 5);
    let loc_ticks = nice_ticks(frame.y0, frame.y1, 6);
    for &t in &time_ticks {
        line(&mut out, "grid", frame.px(t), top, frame.px(t), bottom);
    }
    for &s in &loc_ticks {
        line(&mut out, "grid", left, frame.py(s), right, frame.py(s));
    }
    line(&mut out, "zero", left, frame.py(0.0), right, frame.py(0.0));
    let _ = writeln!(
        out,
        r#"<rect class="axis" x="{left:.3}" y="{top:.3}" width="{:.3}" height="{:.3}" fill="none"/>"#,
        right - left,
        bottom - top
    );
    for &t in &time_ticks {
        line(&mut out, "tick", frame.px(t), bottom, frame.px(t), bottom + 5.0);
        text(&mut out, "tick-label bottom", frame.px(t), bottom + 18.0, "middle", &fmt_tick(t));
    }
    text(&mut out, "axis-label", (left + right) / 2.0, HEIGHT - 15.0, "middle", "Time");
    for &s in &loc_ticks {
        line(&mut out, "tick", left - 5.0, frame.py(s), left, frame.py(s));
        text(&mut out, "tick-label left", left - 8.0, frame.py(s) + 4.0, "end", &fmt_tick(s));
    }
    let _ = writeln!(
        out,
        r#"<text class="axis-label" x="20" y="{:.3}" text-anchor="middle" transform="rotate(-90 20 {:.3})">Location (SD units)</text>"#,
        (top + bottom) / 2.0,
        (top + bottom) / 2.0
    );

    // top axis: ordering key at selected times
    for &t in time_ticks.iter().filter(|&&t| (0.0..=1.0).contains(&t)) {
        let k = vertex_at(main, t);
        let key = main.keys.get(k).copied().unwrap_or(f64::NAN);
        line(&mut out, "tick", frame.px(t), top - 5.0, frame.px(t), top);
        text(&mut out, "tick-label top", frame.px(t), top - 9.0, "middle", &fmt_tick(key));
    }
    text(&mut out, "axis-label", (left + right) / 2.0, top - 30.0, "middle", &spec.top_axis_label);

    // right axis: raw cumulative error
    let scale = main.raw_scale();
    if scale > 0.0 {
        for c in nice_ticks(frame.y0 * scale, frame.y1 * scale, 6) {
            let y = frame.py(c / scale);
            line(&mut out, "tick", right, y, right + 5.0, y);
            text(&mut out, "tick-label right", right + 8.0, y + 4.0, "start", &fmt_tick(c));
        }
        let mid = (top + bottom) / 2.0;
        let xr = WIDTH - 15.0;
        let _ = writeln!(
            out,
            r#"<text class="axis-label" x="{xr:.3}" y="{mid:.3}" text-anchor="middle" transform="rotate(90 {xr:.3} {mid:.3})">Cumulative error (C)</text>"#
        );
    }

    // guides
    if spec.mean_guide {
        line(&mut out, "guide-mean", left, frame.py(z), right, frame.py(z));
        line(&mut out, "guide-mean", left, frame.py(-z), right, frame.py(-z));
        line(&mut out, "terminal", frame.px(1.0), frame.py(0.0), frame.px(1.0), frame.py(s_n));
    }
    if spec.bridge_guide {
        line(&mut out, "bridge-line", frame.px(0.0), frame.py(0.0), frame.px(1.0), frame.py(s_n));
        for off in [q, -q] {
            line(&mut out, "guide-bridge", frame.px(0.0), frame.py(off), frame.px(1.0), frame.py(s_n + off));
        }
    }

    // paths
    for (i, p) in spec.paths.iter().enumerate() {
        let _ = write!(
            out,
            r#"<polyline class="path {} series-{i}" points=""#,
            kind_class(p.kind)
        );
        for (j, (&t, &s)) in p.times.iter().zip(&p.locations).enumerate() {
            if j > 0 {
                out.push(' ');
            }
            let _ = write!(out, "{:.3},{:.3}", frame.px(t), frame.py(s));
        }
        out.push_str("\"/>\n");
    }
    if spec.paths.len() > 1 {
        for (i, p) in spec.paths.iter().enumerate() {
            let y = TOP + 14.0 + 16.0 * i as f64;
            let x = left + 10.0;
            let _ = writeln!(
                out,
                r#"<line class="path {} series-{i}" x1="{x:.3}" y1="{y:.3}" x2="{:.3}" y2="{y:.3}"/>"#,
                kind_class(p.kind),
                x + 24.0
            );
            text(&mut out, "legend", x + 30.0, y + 4.0, "start", p.kind.as_str());
        }
    }
    out.push_str("</svg>\n");
    Ok(out)
}
