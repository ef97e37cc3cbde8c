//! Minimal deterministic SVG line charts.

use std::fmt::Write as _;

#[derive(Debug, Clone, PartialEq)]
pub enum Mark {
    Line {
        points: Vec<(f64, f64)>,
        color: &'static str,
        width: f64,
        dashed: bool,
        opacity: f64,
    },
    /// Circle with radius in data units; only meaningful on equal-aspect panels.
    Circle {
        center: (f64, f64),
        radius: f64,
        stroke: &'static str,
        fill: &'static str,
        fill_opacity: f64,
        dashed: bool,
    },
    /// Horizontal reference line across the whole panel.
    HLine {
        y: f64,
        color: &'static str,
        dashed: bool,
    },
    Dot {
        at: (f64, f64),
        color: &'static str,
    },
}

impl Mark {
    pub fn line(points: Vec<(f64, f64)>, color: &'static str, width: f64) -> Mark {
        Mark::Line {
            points,
            color,
            width,
            dashed: false,
            opacity: 1.0,
        }
    }

    fn extent(&self) -> Option<(f64, f64, f64, f64)> {
        let fold = |pts: &mut dyn Iterator<Item = (f64, f64)>| {
            pts.fold(None, |acc: Option<(f64, f64, f64, f64)>, (x, y)| {
                if !(x.is_finite() && y.is_finite()) {
                    return acc;
                }
                Some(match acc {
                    None => (x, x, y, y),
                    Some((a, b, c, d)) => (a.min(x), b.max(x), c.min(y), d.max(y)),
                })
            })
        };
        match self {
            Mark::Line { points, .. } => fold(&mut points.iter().copied()),
            Mark::Circle { center, radius, .. } => Some((
                center.0 - radius,
                center.0 + radius,
                center.1 - radius,
                center.1 + radius,
            )),
            Mark::HLine { .. } => None,
            Mark::Dot { at, .. } => fold(&mut std::iter::once(*at)),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Panel {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub marks: Vec<Mark>,
    pub legend: Vec<(&'static str, String)>,
    pub equal_aspect: bool,
    /// Extra y values the axis must include (reference lines).
    pub y_include: Vec<f64>,
}

impl Panel {
    pub fn new(title: &str, x_label: &str, y_label: &str) -> Self {
        Self {
            title: title.into(),
            x_label: x_label.into(),
            y_label: y_label.into(),
            marks: Vec::new(),
            legend: Vec::new(),
            equal_aspect: false,
            y_include: Vec::new(),
        }
    }
}

const MARGIN_L: f64 = 72.0;
const MARGIN_R: f64 = 24.0;
const MARGIN_T: f64 = 36.0;
const MARGIN_B: f64 = 48.0;

fn esc(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

fn nice_step(span: f64, target: f64) -> f64 {
    let raw = span / target;
    let mag = 10f64.powf(raw.log10().floor());
    let f = raw / mag;
    let nice = if f < 1.5 {
        1.0
    } else if f < 3.5 {
        2.0
    } else if f < 7.5 {
        5.0
    } else {
        10.0
    };
    nice * mag
}

fn tick_label(v: f64, step: f64) -> String {
    let decimals = (-step.log10().floor()).max(0.0) as usize;
    let s = format!("{:.*}", decimals, v);
    if s.trim_start_matches('-')
        .chars()
        .all(|c| c == '0' || c == '.')
    {
        "0".into()
    } else {
        s
    }
}

struct Frame {
    x0: f64,
    x1: f64,
    y0: f64,
    y1: f64,
    left: f64,
    top: f64,
    w: f64,
    h: f64,
}

impl Frame {
    fn px(&self, x: f64) -> f64 {
        self.left + (x - self.x0) / (self.x1 - self.x0) * self.w
    }
    fn py(&self, y: f64) -> f64 {
        self.top + (self.y1 - y) / (self.y1 - self.y0) * self.h
    }
    fn scale(&self) -> f64 {
        self.w / (self.x1 - self.x0)
    }
}

fn padded(lo: f64, hi: f64) -> (f64, f64) {
    if hi - lo > 1e-12 * hi.abs().max(lo.abs()).max(1.0) {
        let pad = 0.04 * (hi - lo);
        (lo - pad, hi + pad)
    } else {
        let d = lo.abs().max(1.0) * 0.1;
        (lo - d, hi + d)
    }
}

fn frame_for(panel: &Panel, left: f64, top: f64, w: f64, h: f64) -> Frame {
    let mut ext = panel
        .marks
        .iter()
        .filter_map(Mark::extent)
        .fold(None, |acc: Option<(f64, f64, f64, f64)>, e| {
            Some(match acc {
                None => e,
                Some(a) => (a.0.min(e.0), a.1.max(e.1), a.2.min(e.2), a.3.max(e.3)),
            })
        })
        .unwrap_or((0.0, 1.0, 0.0, 1.0));
    for &y in &panel.y_include {
        ext.2 = ext.2.min(y);
        ext.3 = ext.3.max(y);
    }
    let (mut x0, mut x1) = padded(ext.0, ext.1);
    let (mut y0, mut y1) = padded(ext.2, ext.3);
    if panel.equal_aspect {
        let s = ((x1 - x0) / w).max((y1 - y0) / h);
        let (cx, cy) = (0.5 * (x0 + x1), 0.5 * (y0 + y1));
        x0 = cx - 0.5 * s * w;
        x1 = cx + 0.5 * s * w;
        y0 = cy - 0.5 * s * h;
        y1 = cy + 0.5 * s * h;
    }
    Frame {
        x0,
        x1,
        y0,
        y1,
        left,
        top,
        w,
        h,
    }
}

fn dash(dashed: bool) -> &'static str {
    if dashed {
        " stroke-dasharray=\"6 4\""
    } else {
        ""
    }
}

fn draw_panel(out: &mut String, panel: &Panel, f: &Frame, clip_id: usize) {
    let _ = writeln!(
        out,
        "<clipPath id=\"clip{clip_id}\"><rect x=\"{:.2}\" y=\"{:.2}\" width=\"{:.2}\" height=\"{:.2}\"/></clipPath>",
        f.left, f.top, f.w, f.h
    );
    let _ = writeln!(
        out,
        "<rect x=\"{:.2}\" y=\"{:.2}\" width=\"{:.2}\" height=\"{:.2}\" fill=\"white\" stroke=\"#444\"/>",
        f.left, f.top, f.w, f.h
    );

    let xs = nice_step(f.x1 - f.x0, 8.0);
    let ys = nice_step(f.y1 - f.y0, 6.0);
    let mut k = (f.x0 / xs).ceil() as i64;
    while (k as f64) * xs <= f.x1 {
        let v = k as f64 * xs;
        let x = f.px(v);
        let _ = writeln!(
            out,
            "<line x1=\"{x:.2}\" y1=\"{:.2}\" x2=\"{x:.2}\" y2=\"{:.2}\" stroke=\"#ddd\"/><text x=\"{x:.2}\" y=\"{:.2}\" text-anchor=\"middle\">{}</text>",
            f.top,
            f.top + f.h,
            f.top + f.h + 16.0,
            tick_label(v, xs)
        );
        k += 1;
    }
    let mut k = (f.y0 / ys).ceil() as i64;
    while (k as f64) * ys <= f.y1 {
        let v = k as f64 * ys;
        let y = f.py(v);
        let _ = writeln!(
            out,
            "<line x1=\"{:.2}\" y1=\"{y:.2}\" x2=\"{:.2}\" y2=\"{y:.2}\" stroke=\"#ddd\"/><text x=\"{:.2}\" y=\"{:.2}\" text-anchor=\"end\">{}</text>",
            f.left,
            f.left + f.w,
            f.left - 6.0,
            y + 4.0,
            tick_label(v, ys)
        );
        k += 1;
    }

    let _ = writeln!(out, "<g clip-path=\"url(#clip{clip_id})\">");
    for m in &panel.marks {
        match m {
            Mark::Line {
                points,
                color,
                width,
                dashed,
                opacity,
            } => {
                if points.is_empty() {
                    continue;
                }
                let _ = write!(
                    out,
                    "<polyline fill=\"none\" stroke=\"{color}\" stroke-width=\"{width}\""
                );
                if *opacity < 1.0 {
                    let _ = write!(out, " stroke-opacity=\"{opacity}\"");
                }
                let _ = write!(out, "{} points=\"", dash(*dashed));
                for (i, (x, y)) in points.iter().enumerate() {
                    if i > 0 {
                        out.push(' ');
                    }
                    let _ = write!(out, "{:.2},{:.2}", f.px(*x), f.py(*y));
                }
                out.push_str("\"/>\n");
            }
            Mark::Circle {
                center,
                radius,
                stroke,
                fill,
                fill_opacity,
                dashed,
            } => {
                let _ = writeln!(
                    out,
                    "<circle cx=\"{:.2}\" cy=\"{:.2}\" r=\"{:.2}\" stroke=\"{stroke}\" fill=\"{fill}\" fill-opacity=\"{fill_opacity}\"{}/>",
                    f.px(center.0),
                    f.py(center.1),
                    radius * f.scale(),
                    dash(*dashed)
                );
            }
            Mark::HLine { y, color, dashed } => {
                let py = f.py(*y);
                let _ = writeln!(
                    out,
                    "<line x1=\"{:.2}\" y1=\"{py:.2}\" x2=\"{:.2}\" y2=\"{py:.2}\" stroke=\"{color}\" stroke-width=\"1.5\"{}/>",
                    f.left,
                    f.left + f.w,
                    dash(*dashed)
                );
            }
            Mark::Dot { at, color } => {
                let _ = writeln!(
                    out,
                    "<circle cx=\"{:.2}\" cy=\"{:.2}\" r=\"3\" fill=\"{color}\"/>",
                    f.px(at.0),
                    f.py(at.1)
                );
            }
        }
    }
    out.push_str("</g>\n");

    let _ = writeln!(
        out,
        "<text x=\"{:.2}\" y=\"{:.2}\" text-anchor=\"middle\" font-size=\"14\">{}</text>",
        f.left + 0.5 * f.w,
        f.top - 10.0,
        esc(&panel.title)
    );
    let _ = writeln!(
        out,
        "<text x=\"{:.2}\" y=\"{:.2}\" text-anchor=\"middle\">{}</text>",
        f.left + 0.5 * f.w,
        f.top + f.h + 36.0,
        esc(&panel.x_label)
    );
    let (lx, ly) = (f.left - 52.0, f.top + 0.5 * f.h);
    let _ = writeln!(
        out,
        "<text x=\"{lx:.2}\" y=\"{ly:.2}\" text-anchor=\"middle\" transform=\"rotate(-90 {lx:.2} {ly:.2})\">{}</text>",
        esc(&panel.y_label)
    );
    for (i, (color, label)) in panel.legend.iter().enumerate() {
        let y = f.top + 16.0 + 16.0 * i as f64;
        let x = f.left + f.w - 150.0;
        let _ = writeln!(
            out,
            "<line x1=\"{x:.2}\" y1=\"{:.2}\" x2=\"{:.2}\" y2=\"{:.2}\" stroke=\"{color}\" stroke-width=\"2\"/><text x=\"{:.2}\" y=\"{:.2}\">{}</text>",
            y - 4.0,
            x + 20.0,
            y - 4.0,
            x + 26.0,
            y,
            esc(label)
        );
    }
}

/// Renders panels stacked vertically, each `width` x `panel_height` pixels.
pub fn render(panels: &[Panel], width: f64, panel_height: f64) -> String {
    let height = panel_height * panels.len() as f64;
    let mut out = String::new();
    let _ = writeln!(
        out,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{width}\" height=\"{height}\" viewBox=\"0 0 {width} {height}\" font-family=\"sans-serif\" font-size=\"11\">"
    );
    let _ = writeln!(
        out,
        "<rect width=\"{width}\" height=\"{height}\" fill=\"white\"/>"
    );
    for (i, p) in panels.iter().enumerate() {
        let top = i as f64 * panel_height + MARGIN_T;
        let frame = frame_for(
            p,
            MARGIN_L,
            top,
            width - MARGIN_L - MARGIN_R,
            panel_height - MARGIN_T - MARGIN_B,
        );
        draw_panel(&mut out, p, &frame, i);
    }
    out.push_str("</svg>\n");
    out
}
