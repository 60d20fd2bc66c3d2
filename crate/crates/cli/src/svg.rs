//! Static SVG plots.

use std::fmt::Write as _;

use crate::CliError;

const WIDTH: f64 = 720.0;
const HEIGHT: f64 = 480.0;
const LEFT: f64 = 80.0;
const RIGHT: f64 = 150.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 60.0;

/// Lowest decade shown on log colour scales.
const LOG_FLOOR: f64 = -16.0;

const PALETTE: [(f64, f64, f64); 5] = [
    (68.0, 1.0, 84.0),
    (59.0, 82.0, 139.0),
    (33.0, 145.0, 140.0),
    (94.0, 201.0, 98.0),
    (253.0, 231.0, 37.0),
];

fn colour(u: f64) -> String {
    let u = u.clamp(0.0, 1.0) * (PALETTE.len() - 1) as f64;
    let i = (u.floor() as usize).min(PALETTE.len() - 2);
    let f = u - i as f64;
    let (a, b) = (PALETTE[i], PALETTE[i + 1]);
    let mix = |x: f64, y: f64| (x + f * (y - x)).round() as u8;
    format!("#{:02x}{:02x}{:02x}", mix(a.0, b.0), mix(a.1, b.1), mix(a.2, b.2))
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

struct Frame {
    x0: f64,
    x1: f64,
    y0: f64,
    y1: f64,
}

impl Frame {
    fn new(x0: f64, x1: f64, y0: f64, y1: f64) -> Self {
        let pad = |a: f64, b: f64| if b > a { (a, b) } else { (a - 0.5, a + 0.5) };
        let (x0, x1) = pad(x0, x1);
        let (y0, y1) = pad(y0, y1);
        Self { x0, x1, y0, y1 }
    }

    fn px(&self, x: f64) -> f64 {
        LEFT + (x - self.x0) / (self.x1 - self.x0) * (WIDTH - LEFT - RIGHT)
    }

    fn py(&self, y: f64) -> f64 {
        HEIGHT - BOTTOM - (y - self.y0) / (self.y1 - self.y0) * (HEIGHT - TOP - BOTTOM)
    }
}

fn open(out: &mut String, title: &str) {
    let _ = writeln!(
        out,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{WIDTH}\" height=\"{HEIGHT}\" viewBox=\"0 0 {WIDTH} {HEIGHT}\" font-family=\"sans-serif\" font-size=\"12\">"
    );
    let _ = writeln!(out, "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>");
    let _ = writeln!(
        out,
        "<text x=\"{}\" y=\"24\" text-anchor=\"middle\" font-size=\"15\">{}</text>",
        WIDTH / 2.0,
        escape(title)
    );
}

fn axes(out: &mut String, f: &Frame, xlabel: &str, ylabel: &str) {
    let (l, r, t, b) = (LEFT, WIDTH - RIGHT, TOP, HEIGHT - BOTTOM);
    let _ = writeln!(
        out,
        "<rect x=\"{l}\" y=\"{t}\" width=\"{}\" height=\"{}\" fill=\"none\" stroke=\"black\"/>",
        r - l,
        b - t
    );
    for i in 0..=4 {
        let x = f.x0 + (f.x1 - f.x0) * i as f64 / 4.0;
        let y = f.y0 + (f.y1 - f.y0) * i as f64 / 4.0;
        let _ = writeln!(
            out,
            "<text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"middle\">{}</text>",
            f.px(x),
            b + 18.0,
            tick(x)
        );
        let _ = writeln!(
            out,
            "<text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"end\">{}</text>",
            l - 6.0,
            f.py(y) + 4.0,
            tick(y)
        );
    }
    let _ = writeln!(
        out,
        "<text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"middle\">{}</text>",
        (l + r) / 2.0,
        HEIGHT - 16.0,
        escape(xlabel)
    );
    let _ = writeln!(
        out,
        "<text x=\"18\" y=\"{:.1}\" text-anchor=\"middle\" transform=\"rotate(-90 18 {:.1})\">{}</text>",
        (t + b) / 2.0,
        (t + b) / 2.0,
        escape(ylabel)
    );
}

fn tick(v: f64) -> String {
    let a = v.abs();
    if a != 0.0 && !(1e-3..1e4).contains(&a) {
        format!("{v:.1e}")
    } else {
        let s = format!("{v:.3}");
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    }
}

/// One column of a heat map: a time, its window half-width, and the weight per energy bin.
pub struct HeatColumn {
    pub time: f64,
    pub window: f64,
    pub weights: Vec<f64>,
}

/// Heat map of `log10` weight over time and energy difference, with the
/// `±window` lines overlaid. Bins start at `bin_start` and are `bin_width` wide.
pub fn heatmap(title: &str, columns: &[HeatColumn], bin_start: f64, bin_width: f64) -> Result<String, CliError> {
    let bins = columns.first().map_or(0, |c| c.weights.len());
    if bins == 0 {
        return Err(CliError::Plot("heat map has no data".into()));
    }
    if columns.iter().any(|c| c.weights.len() != bins) {
        return Err(CliError::Plot("heat map columns differ in length".into()));
    }
    let finite = |x: f64| x.is_finite();
    if !columns
        .iter()
        .all(|c| finite(c.time) && finite(c.window) && c.weights.iter().all(|&w| finite(w)))
    {
        return Err(CliError::Plot("heat map data is not finite".into()));
    }
    let y_top = bin_start + bins as f64 * bin_width;
    let nc = columns.len() as f64;
    let f = Frame::new(0.0, nc, bin_start, y_top);
    let mut out = String::new();
    open(&mut out, title);
    let cell_h = f.py(bin_start) - f.py(bin_start + bin_width);
    let cell_w = f.px(1.0) - f.px(0.0);
    for (i, c) in columns.iter().enumerate() {
        for (j, &w) in c.weights.iter().enumerate() {
            let lw = if w > 0.0 { w.log10().max(LOG_FLOOR) } else { LOG_FLOOR };
            let y = bin_start + (j + 1) as f64 * bin_width;
            let _ = writeln!(
                out,
                "<rect x=\"{:.2}\" y=\"{:.2}\" width=\"{:.2}\" height=\"{:.2}\" fill=\"{}\"/>",
                f.px(i as f64),
                f.py(y),
                cell_w + 0.3,
                cell_h + 0.3,
                colour((lw - LOG_FLOOR) / -LOG_FLOOR)
            );
        }
    }
    for sign in [1.0, -1.0] {
        let pts: Vec<String> = columns
            .iter()
            .enumerate()
            .map(|(i, c)| {
                let y = (sign * c.window).clamp(bin_start, y_top);
                format!("{:.2},{:.2}", f.px(i as f64 + 0.5), f.py(y))
            })
            .collect();
        let d = if pts.len() == 1 {
            let y = f.py((sign * columns[0].window).clamp(bin_start, y_top));
            format!("{:.2},{y:.2} {:.2},{y:.2}", f.px(0.0), f.px(1.0))
        } else {
            pts.join(" ")
        };
        let _ = writeln!(
            out,
            "<polyline points=\"{d}\" fill=\"none\" stroke=\"white\" stroke-width=\"2\" stroke-dasharray=\"6 3\"/>"
        );
    }
    let (l, r, b) = (LEFT, WIDTH - RIGHT, HEIGHT - BOTTOM);
    let _ = writeln!(
        out,
        "<rect x=\"{l}\" y=\"{TOP}\" width=\"{}\" height=\"{}\" fill=\"none\" stroke=\"black\"/>",
        r - l,
        b - TOP
    );
    let step = (columns.len() / 6).max(1);
    for (i, c) in columns.iter().enumerate().step_by(step) {
        let _ = writeln!(
            out,
            "<text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"middle\">{}</text>",
            f.px(i as f64 + 0.5),
            b + 18.0,
            tick(c.time)
        );
    }
    for i in 0..=4 {
        let y = bin_start + (y_top - bin_start) * i as f64 / 4.0;
        let _ = writeln!(
            out,
            "<text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"end\">{}</text>",
            l - 6.0,
            f.py(y) + 4.0,
            tick(y)
        );
    }
    let _ = writeln!(
        out,
        "<text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"middle\">time</text>",
        (l + r) / 2.0,
        HEIGHT - 16.0
    );
    let mid = (TOP + b) / 2.0;
    let _ = writeln!(
        out,
        "<text x=\"18\" y=\"{mid:.1}\" text-anchor=\"middle\" transform=\"rotate(-90 18 {mid:.1})\">E - E0</text>"
    );
    legend(&mut out);
    out.push_str("</svg>\n");
    Ok(out)
}

fn legend(out: &mut String) {
    let x = WIDTH - RIGHT + 30.0;
    let h = HEIGHT - TOP - BOTTOM;
    let steps = 32;
    for k in 0..steps {
        let u = k as f64 / (steps - 1) as f64;
        let y = TOP + h * (1.0 - (k + 1) as f64 / steps as f64);
        let _ = writeln!(
            out,
            "<rect x=\"{x}\" y=\"{y:.2}\" width=\"18\" height=\"{:.2}\" fill=\"{}\"/>",
            h / steps as f64 + 0.3,
            colour(u)
        );
    }
    let _ = writeln!(out, "<text x=\"{}\" y=\"{}\">0</text>", x + 22.0, TOP + 8.0);
    let _ = writeln!(out, "<text x=\"{}\" y=\"{}\">{LOG_FLOOR}</text>", x + 22.0, TOP + h);
    let _ = writeln!(
        out,
        "<text x=\"{}\" y=\"{}\" font-size=\"11\">log10 p</text>",
        x - 4.0,
        TOP - 8.0
    );
}

pub struct Series {
    pub name: String,
    pub points: Vec<(f64, f64)>,
    /// Draw markers instead of a line.
    pub markers: bool,
}

const SERIES_COLOURS: [&str; 4] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd"];

/// Line or marker plot of several series on shared axes. Non-finite points are skipped.
pub fn curves(title: &str, xlabel: &str, ylabel: &str, series: &[Series]) -> Result<String, CliError> {
    let pts: Vec<(f64, f64)> = series
        .iter()
        .flat_map(|s| s.points.iter().copied())
        .filter(|(x, y)| x.is_finite() && y.is_finite())
        .collect();
    if pts.is_empty() {
        return Err(CliError::Plot("plot has no finite data".into()));
    }
    let min = |v: &mut dyn Iterator<Item = f64>| v.fold(f64::INFINITY, f64::min);
    let max = |v: &mut dyn Iterator<Item = f64>| v.fold(f64::NEG_INFINITY, f64::max);
    let f = Frame::new(
        min(&mut pts.iter().map(|p| p.0)),
        max(&mut pts.iter().map(|p| p.0)),
        min(&mut pts.iter().map(|p| p.1)),
        max(&mut pts.iter().map(|p| p.1)),
    );
    let mut out = String::new();
    open(&mut out, title);
    axes(&mut out, &f, xlabel, ylabel);
    for (k, s) in series.iter().enumerate() {
        let c = SERIES_COLOURS[k % SERIES_COLOURS.len()];
        let finite: Vec<(f64, f64)> = s
            .points
            .iter()
            .copied()
            .filter(|(x, y)| x.is_finite() && y.is_finite())
            .collect();
        if s.markers {
            for (x, y) in &finite {
                let _ = writeln!(
                    out,
                    "<circle cx=\"{:.2}\" cy=\"{:.2}\" r=\"2.5\" fill=\"{c}\"/>",
                    f.px(*x),
                    f.py(*y)
                );
            }
        } else if !finite.is_empty() {
            let d: Vec<String> = finite
                .iter()
                .map(|(x, y)| format!("{:.2},{:.2}", f.px(*x), f.py(*y)))
                .collect();
            let _ = writeln!(
                out,
                "<polyline points=\"{}\" fill=\"none\" stroke=\"{c}\" stroke-width=\"1.5\"/>",
                d.join(" ")
            );
        }
        let ly = TOP + 14.0 + 16.0 * k as f64;
        let lx = WIDTH - RIGHT + 8.0;
        let _ = writeln!(
            out,
            "<rect x=\"{lx}\" y=\"{:.1}\" width=\"10\" height=\"10\" fill=\"{c}\"/>",
            ly - 9.0
        );
        let _ = writeln!(
            out,
            "<text x=\"{:.1}\" y=\"{ly:.1}\">{}</text>",
            lx + 14.0,
            escape(&s.name)
        );
    }
    out.push_str("</svg>\n");
    Ok(out)
}
