//! Minimal SVG rendering of a trace with detected extrema, the analysis
//! windows and the chemical-addition marker.

use std::fmt::Write as _;
use std::path::Path;

use physarum_core::analyzer::{detect_extrema, smooth, AnalysisOutcome, AnalyzeParams, ExtremumKind};
use physarum_core::error::{Error, Result};
use physarum_core::signal::{EventMarker, Trace};

const WIDTH: f64 = 1000.0;
const HEIGHT: f64 = 400.0;
const MARGIN: f64 = 45.0;

struct Scale {
    t0: f64,
    t1: f64,
    v0: f64,
    v1: f64,
}

impl Scale {
    fn x(&self, t: f64) -> f64 {
        MARGIN + (t - self.t0) / (self.t1 - self.t0) * (WIDTH - 2.0 * MARGIN)
    }

    fn y(&self, v: f64) -> f64 {
        // SVG y grows downward.
        HEIGHT - MARGIN - (v - self.v0) / (self.v1 - self.v0) * (HEIGHT - 2.0 * MARGIN)
    }
}

pub fn render_svg(
    trace: &Trace,
    event: &EventMarker,
    outcome: &AnalysisOutcome,
    params: &AnalyzeParams,
    path: &Path,
) -> Result<()> {
    if trace.samples.len() < 2 {
        return Err(Error::Argument("trace too short to plot".into()));
    }
    let vmin = trace.samples.iter().cloned().fold(f64::INFINITY, f64::min);
    let vmax = trace.samples.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let pad = ((vmax - vmin) * 0.05).max(1e-6);
    let scale = Scale {
        t0: trace.start_time_s,
        t1: trace.end_time_s(),
        v0: vmin - pad,
        v1: vmax + pad,
    };

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{WIDTH}\" height=\"{HEIGHT}\" viewBox=\"0 0 {WIDTH} {HEIGHT}\">"
    );
    let _ = writeln!(
        svg,
        "<rect width=\"{WIDTH}\" height=\"{HEIGHT}\" fill=\"white\"/>"
    );

    if let AnalysisOutcome::Measured { pre, post, .. } = outcome {
        for (window, color) in [(&pre.window, "#d8ecd8"), (&post.window, "#d8dcec")] {
            let x = scale.x(window.0);
            let w = scale.x(window.1) - x;
            let _ = writeln!(
                svg,
                "<rect x=\"{x:.1}\" y=\"{MARGIN}\" width=\"{w:.1}\" height=\"{:.1}\" fill=\"{color}\"/>",
                HEIGHT - 2.0 * MARGIN
            );
        }
    }

    // Axes.
    let _ = writeln!(
        svg,
        "<line x1=\"{MARGIN}\" y1=\"{:.1}\" x2=\"{:.1}\" y2=\"{:.1}\" stroke=\"black\"/>",
        HEIGHT - MARGIN,
        WIDTH - MARGIN,
        HEIGHT - MARGIN
    );
    let _ = writeln!(
        svg,
        "<line x1=\"{MARGIN}\" y1=\"{MARGIN}\" x2=\"{MARGIN}\" y2=\"{:.1}\" stroke=\"black\"/>",
        HEIGHT - MARGIN
    );

    let mut points = String::new();
    // Cap the polyline at ~4000 points to keep files small.
    let stride = (trace.samples.len() / 4000).max(1);
    for (i, v) in trace.samples.iter().enumerate().step_by(stride) {
        let _ = write!(
            points,
            "{:.1},{:.1} ",
            scale.x(trace.time_at(i)),
            scale.y(*v)
        );
    }
    let _ = writeln!(
        svg,
        "<polyline points=\"{}\" fill=\"none\" stroke=\"#555555\" stroke-width=\"0.8\"/>",
        points.trim_end()
    );

    let smoothed = smooth(trace, params.smooth_window)?;
    let extrema = detect_extrema(&smoothed, params.prominence_mv, params.min_period_s)?;
    for e in &extrema.extrema {
        let (cx, cy) = (scale.x(e.time_s), scale.y(e.value_mv));
        let color = if e.artifact {
            "#cc2222"
        } else if e.kind == ExtremumKind::Peak {
            "#2255cc"
        } else {
            "#22aa55"
        };
        let _ = writeln!(
            svg,
            "<circle cx=\"{cx:.1}\" cy=\"{cy:.1}\" r=\"3\" fill=\"{color}\"/>"
        );
    }

    let ex = scale.x(event.time_s);
    let _ = writeln!(
        svg,
        "<line x1=\"{ex:.1}\" y1=\"{MARGIN}\" x2=\"{ex:.1}\" y2=\"{:.1}\" stroke=\"#cc7700\" stroke-dasharray=\"6 3\"/>",
        HEIGHT - MARGIN
    );
    let _ = writeln!(
        svg,
        "<text x=\"{:.1}\" y=\"{:.1}\" font-size=\"12\" fill=\"#cc7700\">{}</text>",
        ex + 4.0,
        MARGIN + 12.0,
        escape(&event.label)
    );
    let _ = writeln!(
        svg,
        "<text x=\"{MARGIN}\" y=\"{:.1}\" font-size=\"12\">time, s</text>",
        HEIGHT - MARGIN + 28.0
    );
    let _ = writeln!(
        svg,
        "<text x=\"6\" y=\"{MARGIN}\" font-size=\"12\">mV</text>"
    );
    let _ = writeln!(svg, "</svg>");

    std::fs::write(path, svg)?;
    Ok(())
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}
