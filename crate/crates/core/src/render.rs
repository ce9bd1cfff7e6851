//! Deterministic SVG plots of phase diagrams and order-parameter scatters.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::contour::Polyline;
use crate::error::{Error, Result};
use crate::order::{LabelThresholds, Phase};
use crate::report::ReportRow;
use crate::sweep::PhaseDiagram;

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 480.0;
const MARGIN: f64 = 60.0;

pub fn phase_color(p: Phase) -> &'static str {
    match p {
        Phase::PC => "#1f77b4",
        Phase::MC => "#2ca02c",
        Phase::PG => "#d62728",
        Phase::ML => "#ff7f0e",
    }
}

/// Linear map of a data range onto the plot area.
struct Frame {
    x: (f64, f64),
    y: (f64, f64),
}

impl Frame {
    fn new(x: (f64, f64), y: (f64, f64)) -> Self {
        let widen = |(a, b): (f64, f64)| if b > a { (a, b) } else { (a - 0.5, a + 0.5) };
        Frame { x: widen(x), y: widen(y) }
    }

    fn px(&self, x: f64) -> f64 {
        MARGIN + (x - self.x.0) / (self.x.1 - self.x.0) * (WIDTH - 2.0 * MARGIN)
    }

    fn py(&self, y: f64) -> f64 {
        HEIGHT - MARGIN - (y - self.y.0) / (self.y.1 - self.y.0) * (HEIGHT - 2.0 * MARGIN)
    }
}

fn open_svg(out: &mut String, title: &str, x_label: &str, y_label: &str, frame: &Frame) {
    let _ = writeln!(
        out,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{WIDTH}\" height=\"{HEIGHT}\" viewBox=\"0 0 {WIDTH} {HEIGHT}\">"
    );
    let _ = writeln!(out, "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>");
    let _ = writeln!(out, "<text x=\"{:.1}\" y=\"30\" font-size=\"16\" text-anchor=\"middle\">{title}</text>", WIDTH / 2.0);
    let (x0, x1, y0, y1) = (frame.px(frame.x.0), frame.px(frame.x.1), frame.py(frame.y.0), frame.py(frame.y.1));
    let _ = writeln!(
        out,
        "<rect x=\"{x0:.2}\" y=\"{y1:.2}\" width=\"{:.2}\" height=\"{:.2}\" fill=\"none\" stroke=\"black\"/>",
        x1 - x0,
        y0 - y1
    );
    let _ = writeln!(
        out,
        "<text x=\"{:.1}\" y=\"{:.1}\" font-size=\"14\" text-anchor=\"middle\">{x_label}</text>",
        WIDTH / 2.0,
        HEIGHT - 15.0
    );
    let _ = writeln!(
        out,
        "<text x=\"15\" y=\"{:.1}\" font-size=\"14\" text-anchor=\"middle\" transform=\"rotate(-90 15 {:.1})\">{y_label}</text>",
        HEIGHT / 2.0,
        HEIGHT / 2.0
    );
    for (v, anchor) in [(frame.x.0, "start"), (frame.x.1, "end")] {
        let _ = writeln!(
            out,
            "<text x=\"{:.2}\" y=\"{:.2}\" font-size=\"11\" text-anchor=\"{anchor}\">{v}</text>",
            frame.px(v),
            y0 + 16.0
        );
    }
    for v in [frame.y.0, frame.y.1] {
        let _ = writeln!(
            out,
            "<text x=\"{:.2}\" y=\"{:.2}\" font-size=\"11\" text-anchor=\"end\">{v}</text>",
            x0 - 4.0,
            frame.py(v) + 4.0
        );
    }
}

fn polyline(out: &mut String, line: &Polyline, frame: &Frame, style: &str) {
    let pts: Vec<String> = line
        .points
        .iter()
        .map(|p| format!("{:.2},{:.2}", frame.px(p[0]), frame.py(p[1])))
        .collect();
    let _ = writeln!(out, "<polyline points=\"{}\" fill=\"none\" {style}/>", pts.join(" "));
}

fn legend(out: &mut String) {
    for (k, p) in Phase::ALL.into_iter().enumerate() {
        let y = MARGIN + 16.0 * k as f64;
        let _ = writeln!(
            out,
            "<circle cx=\"{:.1}\" cy=\"{y:.1}\" r=\"5\" fill=\"{}\"/><text x=\"{:.1}\" y=\"{:.1}\" font-size=\"11\">{p}</text>",
            WIDTH - MARGIN + 10.0,
            phase_color(p),
            WIDTH - MARGIN + 18.0,
            y + 4.0
        );
    }
}

/// Cells as coloured markers (pinning strength across, drive up) with both boundaries.
pub fn diagram_svg(diagram: &PhaseDiagram) -> Result<String> {
    if diagram.cells.is_empty() || diagram.f_p.is_empty() || diagram.f_d.is_empty() {
        return Err(Error::InvalidInput("cannot render an empty diagram".into()));
    }
    let frame = Frame::new(
        (diagram.f_p[0], *diagram.f_p.last().unwrap()),
        (diagram.f_d[0], *diagram.f_d.last().unwrap()),
    );
    let mut out = String::new();
    open_svg(&mut out, "dynamical phase diagram", "F_p", "F_D", &frame);
    let radius = ((WIDTH - 2.0 * MARGIN) / diagram.f_p.len() as f64)
        .min((HEIGHT - 2.0 * MARGIN) / diagram.f_d.len() as f64)
        .min(24.0)
        * 0.35;
    for c in &diagram.cells {
        let _ = writeln!(
            out,
            "<circle cx=\"{:.2}\" cy=\"{:.2}\" r=\"{radius:.2}\" fill=\"{}\"><title>{} s={:.4} v={:.6}</title></circle>",
            frame.px(c.f_p),
            frame.py(c.f_d),
            phase_color(c.label),
            c.label,
            c.mean_s,
            c.mean_v_bar
        );
    }
    for line in &diagram.crystal_boundary {
        polyline(&mut out, line, &frame, "stroke=\"blue\" stroke-width=\"2\"");
    }
    for line in &diagram.motion_boundary {
        polyline(&mut out, line, &frame, "stroke=\"black\" stroke-width=\"2\" stroke-dasharray=\"6 4\"");
    }
    legend(&mut out);
    out.push_str("</svg>\n");
    Ok(out)
}

/// `v_bar` against `s` per run, with the two thresholds drawn.
pub fn scatter_svg(rows: &[ReportRow], thresholds: &LabelThresholds) -> Result<String> {
    if rows.is_empty() {
        return Err(Error::InvalidInput("cannot render an empty scatter".into()));
    }
    let fold = |f: fn(&ReportRow) -> f64, extra: f64| {
        rows.iter().map(f).fold((extra, extra), |(lo, hi), v| (lo.min(v), hi.max(v)))
    };
    let frame = Frame::new(fold(|r| r.s, thresholds.s0), fold(|r| r.v_bar, thresholds.v0));
    let mut out = String::new();
    open_svg(&mut out, "order parameters", "s", "v_bar", &frame);
    for r in rows {
        let _ = writeln!(
            out,
            "<circle cx=\"{:.2}\" cy=\"{:.2}\" r=\"3\" fill=\"{}\"/>",
            frame.px(r.s),
            frame.py(r.v_bar),
            phase_color(r.label)
        );
    }
    let (xs, ys) = (frame.px(thresholds.s0), frame.py(thresholds.v0));
    let _ = writeln!(
        out,
        "<line x1=\"{xs:.2}\" y1=\"{:.2}\" x2=\"{xs:.2}\" y2=\"{:.2}\" stroke=\"blue\" stroke-dasharray=\"4 3\"/>",
        frame.py(frame.y.0),
        frame.py(frame.y.1)
    );
    let _ = writeln!(
        out,
        "<line x1=\"{:.2}\" y1=\"{ys:.2}\" x2=\"{:.2}\" y2=\"{ys:.2}\" stroke=\"black\" stroke-dasharray=\"4 3\"/>",
        frame.px(frame.x.0),
        frame.px(frame.x.1)
    );
    legend(&mut out);
    out.push_str("</svg>\n");
    Ok(out)
}

pub fn write_svg(path: &Path, svg: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    fs::write(path, svg).map_err(|e| Error::io(path, e))
}
