//! Minimal self-contained SVG plots.
//!
//! Two convenience views: space-time norms against the mesh width on
//! log-log axes, and the discrete energy history of a single run on linear
//! axes. The output is a plain `<svg>` document with polylines and text
//! labels; no styling beyond stroke colors, so diffs stay readable.

use crate::analysis::NormReport;
use crate::evolve::Trajectory;
use std::fmt::Write;

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 440.0;
const MARGIN_LEFT: f64 = 70.0;
const MARGIN_RIGHT: f64 = 20.0;
const MARGIN_TOP: f64 = 30.0;
const MARGIN_BOTTOM: f64 = 50.0;

/// Maps data coordinates to the SVG viewport (y grows downward).
struct Frame {
    x_min: f64,
    x_max: f64,
    y_min: f64,
    y_max: f64,
}

impl Frame {
    fn new(xs: &[f64], ys: &[f64]) -> Frame {
        let span = |vals: &[f64]| {
            let lo = vals.iter().cloned().fold(f64::INFINITY, f64::min);
            let hi = vals.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            if lo == hi {
                (lo - 0.5, hi + 0.5)
            } else {
                let pad = 0.05 * (hi - lo);
                (lo - pad, hi + pad)
            }
        };
        let (x_min, x_max) = span(xs);
        let (y_min, y_max) = span(ys);
        Frame { x_min, x_max, y_min, y_max }
    }

    fn x(&self, v: f64) -> f64 {
        let t = (v - self.x_min) / (self.x_max - self.x_min);
        MARGIN_LEFT + t * (WIDTH - MARGIN_LEFT - MARGIN_RIGHT)
    }

    fn y(&self, v: f64) -> f64 {
        let t = (v - self.y_min) / (self.y_max - self.y_min);
        HEIGHT - MARGIN_BOTTOM - t * (HEIGHT - MARGIN_TOP - MARGIN_BOTTOM)
    }
}

fn document(body: &str) -> String {
    format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{WIDTH}\" height=\"{HEIGHT}\" \
         viewBox=\"0 0 {WIDTH} {HEIGHT}\" font-family=\"monospace\" font-size=\"12\">\n\
         <rect width=\"{WIDTH}\" height=\"{HEIGHT}\" fill=\"white\"/>\n{body}</svg>\n"
    )
}

fn axes(frame: &Frame, title: &str, x_label: &str, y_label: &str) -> String {
    let mut s = String::new();
    let x0 = frame.x(frame.x_min);
    let x1 = frame.x(frame.x_max);
    let y0 = frame.y(frame.y_min);
    let y1 = frame.y(frame.y_max);
    let _ = writeln!(
        s,
        "<polyline points=\"{x0:.1},{y1:.1} {x0:.1},{y0:.1} {x1:.1},{y0:.1}\" \
         fill=\"none\" stroke=\"black\"/>"
    );
    let _ = writeln!(
        s,
        "<text x=\"{:.1}\" y=\"18\" text-anchor=\"middle\">{title}</text>",
        (x0 + x1) / 2.0
    );
    let _ = writeln!(
        s,
        "<text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"middle\">{x_label}</text>",
        (x0 + x1) / 2.0,
        HEIGHT - 12.0
    );
    let _ = writeln!(
        s,
        "<text x=\"16\" y=\"{:.1}\" text-anchor=\"middle\" \
         transform=\"rotate(-90 16 {:.1})\">{y_label}</text>",
        (y0 + y1) / 2.0,
        (y0 + y1) / 2.0
    );
    // Four tick labels per axis, data-space values at the tick positions.
    for i in 0..=3 {
        let fx = frame.x_min + (frame.x_max - frame.x_min) * i as f64 / 3.0;
        let fy = frame.y_min + (frame.y_max - frame.y_min) * i as f64 / 3.0;
        let _ = writeln!(
            s,
            "<text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"middle\">{:.3}</text>",
            frame.x(fx),
            y0 + 16.0,
            fx
        );
        let _ = writeln!(
            s,
            "<text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"end\">{:.3}</text>",
            x0 - 6.0,
            frame.y(fy) + 4.0,
            fy
        );
    }
    s
}

fn polyline(frame: &Frame, points: &[(f64, f64)], stroke: &str, dashed: bool) -> String {
    let mut coords = String::new();
    for &(x, y) in points {
        let _ = write!(coords, "{:.2},{:.2} ", frame.x(x), frame.y(y));
    }
    let dash = if dashed { " stroke-dasharray=\"6 4\"" } else { "" };
    format!(
        "<polyline points=\"{}\" fill=\"none\" stroke=\"{stroke}\" stroke-width=\"1.5\"{dash}/>\n",
        coords.trim_end()
    )
}

/// Space-time norms of both fields against the mesh width, log10 on both
/// axes: `u1` solid blue, `u2` dashed red.
pub fn norm_vs_h_svg(report: &NormReport) -> String {
    let levels: Vec<_> = report
        .levels
        .iter()
        .filter(|l| l.norm_u1 > 0.0 && l.norm_u2 > 0.0 && l.norm_u1.is_finite())
        .collect();
    let xs: Vec<f64> = levels.iter().map(|l| l.h.log10()).collect();
    let mut ys: Vec<f64> = levels.iter().map(|l| l.norm_u1.log10()).collect();
    ys.extend(levels.iter().map(|l| l.norm_u2.log10()));
    if xs.is_empty() {
        return document("<text x=\"40\" y=\"40\">no finite levels to plot</text>\n");
    }
    let frame = Frame::new(&xs, &ys);
    let title = format!(
        "{} a={} b={} sigma={}",
        report.variant.name(),
        report.a,
        report.b,
        report.sigma
    );
    let mut body = axes(&frame, &title, "log10 h", "log10 ||u||");
    let u1: Vec<(f64, f64)> =
        levels.iter().map(|l| (l.h.log10(), l.norm_u1.log10())).collect();
    let u2: Vec<(f64, f64)> =
        levels.iter().map(|l| (l.h.log10(), l.norm_u2.log10())).collect();
    body.push_str(&polyline(&frame, &u1, "steelblue", false));
    body.push_str(&polyline(&frame, &u2, "firebrick", true));
    body.push_str(
        "<text x=\"90\" y=\"40\" fill=\"steelblue\">u1</text>\n\
         <text x=\"90\" y=\"56\" fill=\"firebrick\">u2</text>\n",
    );
    document(&body)
}

/// Discrete energy `(||u1||^2 + ||u2||^2) / 2` against time for one run.
pub fn energy_vs_t_svg(trajectory: &Trajectory) -> String {
    let points: Vec<(f64, f64)> = trajectory
        .records
        .iter()
        .filter(|r| r.energy.is_finite())
        .map(|r| (r.t, r.energy))
        .collect();
    if points.is_empty() {
        return document("<text x=\"40\" y=\"40\">no finite energy samples</text>\n");
    }
    let xs: Vec<f64> = points.iter().map(|p| p.0).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.1).collect();
    let frame = Frame::new(&xs, &ys);
    let mut body = axes(&frame, "discrete energy", "t", "energy");
    body.push_str(&polyline(&frame, &points, "steelblue", false));
    document(&body)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analysis::{LevelRecord, RunStatus};
    use crate::assembly::IPVariant;
    use crate::evolve::{FieldPair, StepRecord};

    fn report() -> NormReport {
        let level = |n: usize, h: f64, u1: f64, u2: f64| LevelRecord {
            n,
            h,
            dt: 2.0 * h * h,
            norm_u1: u1,
            norm_u2: u2,
            err_l2_final: 0.1 * h,
            rate: None,
            dg_norm_final: 1.0,
            status: RunStatus::Ok,
        };
        NormReport {
            variant: IPVariant::Nipg,
            a: 1e-4,
            b: 1e-4,
            sigma: 1e8,
            levels: vec![
                level(6, 0.2357, 0.49, 0.46),
                level(12, 0.1179, 0.55, 0.56),
                level(24, 0.0589, 0.57, 0.60),
            ],
        }
    }

    fn trajectory() -> Trajectory {
        let records = (0..=5)
            .map(|k| StepRecord {
                step: k,
                t: k as f64 * 0.2,
                norm_u1: 0.5,
                norm_u2: 0.4,
                energy: 0.205 - 0.01 * k as f64,
                picard_iters: 3,
                picard_converged: true,
            })
            .collect();
        Trajectory { records, blown_up: false, final_state: FieldPair::zeros(4) }
    }

    #[test]
    fn norm_plot_contains_both_series() {
        let svg = norm_vs_h_svg(&report());
        assert!(svg.starts_with("<svg"));
        assert_eq!(svg.matches("<polyline").count(), 3); // axes + u1 + u2
        assert!(svg.contains("steelblue") && svg.contains("firebrick"));
        assert!(svg.contains("log10 h"));
    }

    #[test]
    fn energy_plot_is_deterministic() {
        let a = energy_vs_t_svg(&trajectory());
        let b = energy_vs_t_svg(&trajectory());
        assert_eq!(a, b);
        assert!(a.contains("discrete energy"));
    }

    #[test]
    fn degenerate_inputs_still_produce_svg() {
        let mut r = report();
        r.levels.clear();
        assert!(norm_vs_h_svg(&r).contains("no finite levels"));
        let t = Trajectory {
            records: vec![],
            blown_up: true,
            final_state: FieldPair::zeros(2),
        };
        assert!(energy_vs_t_svg(&t).contains("no finite energy"));
    }
}
