//! Minimal deterministic SVG line plots.
//!
//! The plots are diagnostic companions to the CSV tables, not a charting
//! library: fixed canvas, fixed palette, no runtime dependencies. Identical
//! inputs produce byte-identical files, so plot output is reproducible and
//! diffable just like the numeric tables. Coordinates are rounded to 0.01 px
//! to keep the byte output stable across platforms.

use crate::Failure;
use std::fmt::Write as _;

const WIDTH: f64 = 840.0;
const HEIGHT: f64 = 520.0;
const MARGIN_LEFT: f64 = 72.0;
const MARGIN_RIGHT: f64 = 24.0;
const MARGIN_TOP: f64 = 44.0;
const MARGIN_BOTTOM: f64 = 56.0;

const PALETTE: [&str; 5] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#8c564b"];

pub struct Series {
    pub label: String,
    pub points: Vec<(f64, f64)>,
}

pub struct PlotSpec {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    /// Plot x on a log10 axis; nonpositive x values are dropped first.
    pub x_log: bool,
    pub series: Vec<Series>,
    /// Dashed vertical markers, e.g. regime thresholds.
    pub vlines: Vec<(f64, String)>,
}

/// Render the spec to an SVG document.
///
/// Fails if no series contributes a finite (and, on a log axis, positive)
/// point: an empty plot would silently hide an upstream problem.
pub fn render(spec: &PlotSpec) -> Result<String, Failure> {
    let x_of = |x: f64| if spec.x_log { x.log10() } else { x };
    let mut cleaned: Vec<(usize, Vec<(f64, f64)>)> = Vec::new();
    for (idx, s) in spec.series.iter().enumerate() {
        let pts: Vec<(f64, f64)> = s
            .points
            .iter()
            .filter(|(x, y)| x.is_finite() && y.is_finite() && (!spec.x_log || *x > 0.0))
            .map(|&(x, y)| (x_of(x), y))
            .collect();
        if !pts.is_empty() {
            cleaned.push((idx, pts));
        }
    }
    if cleaned.is_empty() {
        return Err(Failure::domain(format!(
            "plot {:?}: no finite data points to draw",
            spec.title
        )));
    }

    let mut x_min = f64::INFINITY;
    let mut x_max = f64::NEG_INFINITY;
    let mut y_min = f64::INFINITY;
    let mut y_max = f64::NEG_INFINITY;
    for (_, pts) in &cleaned {
        for &(x, y) in pts {
            x_min = x_min.min(x);
            x_max = x_max.max(x);
            y_min = y_min.min(y);
            y_max = y_max.max(y);
        }
    }
    for (v, _) in &spec.vlines {
        if v.is_finite() && (!spec.x_log || *v > 0.0) {
            let v = x_of(*v);
            x_min = x_min.min(v);
            x_max = x_max.max(v);
        }
    }
    let x_span = pad_span(&mut x_min, &mut x_max, 0.02);
    let y_span = pad_span(&mut y_min, &mut y_max, 0.05);

    let plot_w = WIDTH - MARGIN_LEFT - MARGIN_RIGHT;
    let plot_h = HEIGHT - MARGIN_TOP - MARGIN_BOTTOM;
    let px = |x: f64| MARGIN_LEFT + (x - x_min) / x_span * plot_w;
    let py = |y: f64| MARGIN_TOP + plot_h - (y - y_min) / y_span * plot_h;

    let mut svg = String::with_capacity(16 * 1024);
    let _ = writeln!(
        svg,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{WIDTH}\" height=\"{HEIGHT}\" \
         viewBox=\"0 0 {WIDTH} {HEIGHT}\" font-family=\"Menlo, Consolas, monospace\" \
         font-size=\"12\">"
    );
    svg.push_str("<rect width=\"100%\" height=\"100%\" fill=\"#ffffff\"/>\n");

    // Grid and tick labels.
    let x_ticks = if spec.x_log {
        log_ticks(x_min, x_max)
    } else {
        linear_ticks(x_min, x_max)
    };
    let y_ticks = linear_ticks(y_min, y_max);
    for (v, label) in &x_ticks {
        let x = px(*v);
        let _ = writeln!(
            svg,
            "<line x1=\"{x:.2}\" y1=\"{:.2}\" x2=\"{x:.2}\" y2=\"{:.2}\" stroke=\"#dddddd\"/>",
            MARGIN_TOP,
            MARGIN_TOP + plot_h
        );
        let _ = writeln!(
            svg,
            "<text x=\"{x:.2}\" y=\"{:.2}\" text-anchor=\"middle\" fill=\"#222222\">{}</text>",
            MARGIN_TOP + plot_h + 18.0,
            escape(label)
        );
    }
    for (v, label) in &y_ticks {
        let y = py(*v);
        let _ = writeln!(
            svg,
            "<line x1=\"{:.2}\" y1=\"{y:.2}\" x2=\"{:.2}\" y2=\"{y:.2}\" stroke=\"#dddddd\"/>",
            MARGIN_LEFT,
            MARGIN_LEFT + plot_w
        );
        let _ = writeln!(
            svg,
            "<text x=\"{:.2}\" y=\"{:.2}\" text-anchor=\"end\" fill=\"#222222\">{}</text>",
            MARGIN_LEFT - 6.0,
            y + 4.0,
            escape(label)
        );
    }

    // Vertical markers under the data.
    for (v, label) in &spec.vlines {
        if !v.is_finite() || (spec.x_log && *v <= 0.0) {
            continue;
        }
        let x = px(x_of(*v));
        let _ = writeln!(
            svg,
            "<line x1=\"{x:.2}\" y1=\"{:.2}\" x2=\"{x:.2}\" y2=\"{:.2}\" \
             stroke=\"#555555\" stroke-dasharray=\"6 4\"/>",
            MARGIN_TOP,
            MARGIN_TOP + plot_h
        );
        let _ = writeln!(
            svg,
            "<text x=\"{:.2}\" y=\"{:.2}\" fill=\"#555555\">{}</text>",
            x + 4.0,
            MARGIN_TOP + 14.0,
            escape(label)
        );
    }

    // Frame above the grid.
    let _ = writeln!(
        svg,
        "<rect x=\"{MARGIN_LEFT}\" y=\"{MARGIN_TOP}\" width=\"{plot_w}\" height=\"{plot_h}\" \
         fill=\"none\" stroke=\"#444444\"/>"
    );

    // Data series.
    for (idx, pts) in &cleaned {
        let color = PALETTE[idx % PALETTE.len()];
        let mut path = String::with_capacity(pts.len() * 16);
        for (x, y) in pts {
            let _ = write!(path, "{:.2},{:.2} ", px(*x), py(*y));
        }
        let _ = writeln!(
            svg,
            "<polyline points=\"{}\" fill=\"none\" stroke=\"{color}\" stroke-width=\"1.5\"/>",
            path.trim_end()
        );
        // Markers keep sparse curves legible; dense curves stay clean lines.
        if pts.len() <= 60 {
            for (x, y) in pts {
                let _ = writeln!(
                    svg,
                    "<circle cx=\"{:.2}\" cy=\"{:.2}\" r=\"2.5\" fill=\"{color}\"/>",
                    px(*x),
                    py(*y)
                );
            }
        }
    }

    // Legend, only when labels carry information.
    let labeled: Vec<&Series> = spec.series.iter().filter(|s| !s.label.is_empty()).collect();
    if labeled.len() > 1 {
        let mut row = 0usize;
        for (idx, s) in spec.series.iter().enumerate() {
            if s.label.is_empty() {
                continue;
            }
            let color = PALETTE[idx % PALETTE.len()];
            let y = MARGIN_TOP + 16.0 + 16.0 * row as f64;
            let x = MARGIN_LEFT + plot_w - 150.0;
            let _ = writeln!(
                svg,
                "<line x1=\"{x:.2}\" y1=\"{:.2}\" x2=\"{:.2}\" y2=\"{:.2}\" \
                 stroke=\"{color}\" stroke-width=\"2\"/>",
                y - 4.0,
                x + 18.0,
                y - 4.0
            );
            let _ = writeln!(
                svg,
                "<text x=\"{:.2}\" y=\"{y:.2}\" fill=\"#222222\">{}</text>",
                x + 24.0,
                escape(&s.label)
            );
            row += 1;
        }
    }

    // Title and axis labels.
    let _ = writeln!(
        svg,
        "<text x=\"{:.2}\" y=\"24\" text-anchor=\"middle\" font-size=\"15\" fill=\"#222222\">{}</text>",
        WIDTH / 2.0,
        escape(&spec.title)
    );
    let _ = writeln!(
        svg,
        "<text x=\"{:.2}\" y=\"{:.2}\" text-anchor=\"middle\" fill=\"#222222\">{}</text>",
        MARGIN_LEFT + plot_w / 2.0,
        HEIGHT - 14.0,
        escape(&spec.x_label)
    );
    let _ = writeln!(
        svg,
        "<text x=\"18\" y=\"{:.2}\" text-anchor=\"middle\" fill=\"#222222\" \
         transform=\"rotate(-90 18 {:.2})\">{}</text>",
        MARGIN_TOP + plot_h / 2.0,
        MARGIN_TOP + plot_h / 2.0,
        escape(&spec.y_label)
    );
    svg.push_str("</svg>\n");
    Ok(svg)
}

/// Widen a degenerate or tight range in place; returns the padded span.
fn pad_span(min: &mut f64, max: &mut f64, frac: f64) -> f64 {
    let span = *max - *min;
    if span <= 0.0 {
        let pad = min.abs().max(1.0) * 0.05;
        *min -= pad;
        *max += pad;
    } else {
        *min -= span * frac;
        *max += span * frac;
    }
    *max - *min
}

/// Round-valued ticks at a 1/2/5 step covering roughly five intervals.
fn linear_ticks(min: f64, max: f64) -> Vec<(f64, String)> {
    let span = max - min;
    let raw = span / 5.0;
    let mag = 10f64.powf(raw.log10().floor());
    let norm = raw / mag;
    let step = if norm <= 1.0 {
        mag
    } else if norm <= 2.0 {
        2.0 * mag
    } else if norm <= 5.0 {
        5.0 * mag
    } else {
        10.0 * mag
    };
    let decimals = if step >= 1.0 {
        0
    } else {
        (-step.log10().floor()) as usize
    };
    let first = (min / step).ceil() as i64;
    let last = (max / step).floor() as i64;
    (first..=last)
        .map(|k| {
            let v = k as f64 * step;
            (v, format!("{v:.decimals$}"))
        })
        .collect()
}

/// Decade ticks for a log10-transformed axis; thinned past eight decades.
fn log_ticks(min: f64, max: f64) -> Vec<(f64, String)> {
    let first = min.ceil() as i64;
    let last = max.floor() as i64;
    if last < first {
        let mid = (min + max) / 2.0;
        return vec![(mid, format!("1e{mid:.1}"))];
    }
    let count = (last - first + 1) as usize;
    let stride = count.div_ceil(8).max(1) as i64;
    (first..=last)
        .step_by(stride as usize)
        .map(|e| (e as f64, format!("1e{e}")))
        .collect()
}

fn escape(text: &str) -> String {
    text.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}
