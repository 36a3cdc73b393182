//! Hand-rolled SVG plots: line charts and a field heat map.
//!
//! No plotting dependency; the documents are plain shapes with a fixed
//! palette and deterministic formatting. Pixel coordinates are rounded to
//! hundredths so output does not wobble across platforms.

use std::fmt::Write as _;

const WIDTH: f64 = 800.0;
const HEIGHT: f64 = 520.0;
const MARGIN_L: f64 = 72.0;
const MARGIN_R: f64 = 24.0;
const MARGIN_T: f64 = 46.0;
const MARGIN_B: f64 = 58.0;

const PALETTE: [&str; 6] = [
    "#1f6fb4", "#d94a2b", "#3d9a46", "#8a56c2", "#c78f1e", "#3bb3ad",
];

pub struct Series<'a> {
    pub label: String,
    pub points: &'a [(f64, f64)],
}

fn px(v: f64) -> String {
    format!("{:.2}", v)
}

fn fmt_tick(v: f64) -> String {
    if v == 0.0 {
        return "0".to_string();
    }
    let a = v.abs();
    if (1e-3..1e5).contains(&a) {
        let s = format!("{v:.4}");
        let s = s.trim_end_matches('0').trim_end_matches('.');
        s.to_string()
    } else {
        format!("{v:.2e}")
    }
}

fn nice_ticks(lo: f64, hi: f64) -> Vec<f64> {
    if !(hi > lo) {
        return vec![lo];
    }
    let span = hi - lo;
    let raw = span / 5.0;
    let mag = 10f64.powf(raw.log10().floor());
    let norm = raw / mag;
    let step = mag
        * if norm < 1.5 {
            1.0
        } else if norm < 3.5 {
            2.0
        } else if norm < 7.5 {
            5.0
        } else {
            10.0
        };
    let mut t = (lo / step).ceil() * step;
    let mut out = Vec::new();
    while t <= hi + 1e-9 * span {
        out.push(t);
        t += step;
    }
    out
}

struct Frame {
    x_lo: f64,
    x_hi: f64,
    y_lo: f64,
    y_hi: f64,
}

impl Frame {
    fn sx(&self, x: f64) -> f64 {
        let w = WIDTH - MARGIN_L - MARGIN_R;
        MARGIN_L + (x - self.x_lo) / (self.x_hi - self.x_lo) * w
    }

    fn sy(&self, y: f64) -> f64 {
        let h = HEIGHT - MARGIN_T - MARGIN_B;
        MARGIN_T + (self.y_hi - y) / (self.y_hi - self.y_lo) * h
    }
}

fn open_document(out: &mut String, title: &str) {
    let _ = write!(
        out,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{WIDTH}\" height=\"{HEIGHT}\" \
         viewBox=\"0 0 {WIDTH} {HEIGHT}\" font-family=\"sans-serif\">\n\
         <rect width=\"{WIDTH}\" height=\"{HEIGHT}\" fill=\"white\"/>\n\
         <text x=\"{}\" y=\"24\" font-size=\"16\" text-anchor=\"middle\">{}</text>\n",
        WIDTH / 2.0,
        escape(title)
    );
}

fn axes(out: &mut String, frame: &Frame, x_label: &str, y_label: &str, log_x: bool, log_y: bool) {
    let x0 = MARGIN_L;
    let x1 = WIDTH - MARGIN_R;
    let y0 = HEIGHT - MARGIN_B;
    let y1 = MARGIN_T;
    let _ = write!(
        out,
        "<line x1=\"{x0}\" y1=\"{y0}\" x2=\"{x1}\" y2=\"{y0}\" stroke=\"black\"/>\n\
         <line x1=\"{x0}\" y1=\"{y0}\" x2=\"{x0}\" y2=\"{y1}\" stroke=\"black\"/>\n"
    );
    for t in nice_ticks(frame.x_lo, frame.x_hi) {
        let sx = px(frame.sx(t));
        let label = if log_x {
            format!("1e{}", fmt_tick(t))
        } else {
            fmt_tick(t)
        };
        let _ = write!(
            out,
            "<line x1=\"{sx}\" y1=\"{y0}\" x2=\"{sx}\" y2=\"{}\" stroke=\"black\"/>\n\
             <text x=\"{sx}\" y=\"{}\" font-size=\"11\" text-anchor=\"middle\">{label}</text>\n",
            px(y0 + 5.0),
            px(y0 + 18.0),
        );
    }
    for t in nice_ticks(frame.y_lo, frame.y_hi) {
        let sy = px(frame.sy(t));
        let label = if log_y {
            format!("1e{}", fmt_tick(t))
        } else {
            fmt_tick(t)
        };
        let _ = write!(
            out,
            "<line x1=\"{}\" y1=\"{sy}\" x2=\"{x0}\" y2=\"{sy}\" stroke=\"black\"/>\n\
             <text x=\"{}\" y=\"{}\" font-size=\"11\" text-anchor=\"end\">{label}</text>\n",
            px(x0 - 5.0),
            px(x0 - 8.0),
            px(frame.sy(t) + 4.0),
        );
    }
    let _ = write!(
        out,
        "<text x=\"{}\" y=\"{}\" font-size=\"13\" text-anchor=\"middle\">{}</text>\n\
         <text x=\"16\" y=\"{}\" font-size=\"13\" text-anchor=\"middle\" \
         transform=\"rotate(-90 16 {})\">{}</text>\n",
        (MARGIN_L + WIDTH - MARGIN_R) / 2.0,
        HEIGHT - 16.0,
        escape(x_label),
        (MARGIN_T + HEIGHT - MARGIN_B) / 2.0,
        (MARGIN_T + HEIGHT - MARGIN_B) / 2.0,
        escape(y_label),
    );
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Multi-series line chart. With `log_log` both coordinates are mapped to
/// base-10 logs and non-positive points are dropped.
pub fn line_plot(
    title: &str,
    x_label: &str,
    y_label: &str,
    series: &[Series],
    log_log: bool,
) -> String {
    let mapped: Vec<(String, Vec<(f64, f64)>)> = series
        .iter()
        .map(|s| {
            let pts = s
                .points
                .iter()
                .filter(|(x, y)| {
                    x.is_finite() && y.is_finite() && (!log_log || (*x > 0.0 && *y > 0.0))
                })
                .map(|&(x, y)| {
                    if log_log {
                        (x.log10(), y.log10())
                    } else {
                        (x, y)
                    }
                })
                .collect();
            (s.label.clone(), pts)
        })
        .collect();

    let mut x_lo = f64::INFINITY;
    let mut x_hi = f64::NEG_INFINITY;
    let mut y_lo = f64::INFINITY;
    let mut y_hi = f64::NEG_INFINITY;
    for (_, pts) in &mapped {
        for &(x, y) in pts {
            x_lo = x_lo.min(x);
            x_hi = x_hi.max(x);
            y_lo = y_lo.min(y);
            y_hi = y_hi.max(y);
        }
    }
    if !x_lo.is_finite() {
        x_lo = 0.0;
        x_hi = 1.0;
        y_lo = 0.0;
        y_hi = 1.0;
    }
    if x_hi - x_lo < 1e-12 {
        x_lo -= 0.5;
        x_hi += 0.5;
    }
    if y_hi - y_lo < 1e-12 {
        y_lo -= 0.5;
        y_hi += 0.5;
    }
    let pad_y = 0.05 * (y_hi - y_lo);
    let frame = Frame {
        x_lo,
        x_hi,
        y_lo: y_lo - pad_y,
        y_hi: y_hi + pad_y,
    };

    let mut out = String::new();
    open_document(&mut out, title);
    axes(&mut out, &frame, x_label, y_label, log_log, log_log);
    for (i, (label, pts)) in mapped.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        if pts.len() > 1 {
            let coords: Vec<String> = pts
                .iter()
                .map(|&(x, y)| format!("{},{}", px(frame.sx(x)), px(frame.sy(y))))
                .collect();
            let _ = writeln!(
                out,
                "<polyline points=\"{}\" fill=\"none\" stroke=\"{color}\" stroke-width=\"1.5\"/>",
                coords.join(" ")
            );
        }
        for &(x, y) in pts {
            let _ = writeln!(
                out,
                "<circle cx=\"{}\" cy=\"{}\" r=\"2.5\" fill=\"{color}\"/>",
                px(frame.sx(x)),
                px(frame.sy(y))
            );
        }
        let ly = MARGIN_T + 16.0 * i as f64 + 12.0;
        let _ = write!(
            out,
            "<rect x=\"{}\" y=\"{}\" width=\"12\" height=\"4\" fill=\"{color}\"/>\n\
             <text x=\"{}\" y=\"{}\" font-size=\"11\">{}</text>\n",
            px(WIDTH - MARGIN_R - 170.0),
            px(ly - 4.0),
            px(WIDTH - MARGIN_R - 152.0),
            px(ly),
            escape(label)
        );
    }
    out.push_str("</svg>\n");
    out
}

fn ramp(t: f64) -> String {
    // Dark violet through magenta to yellow; clamped three-stop ramp.
    let t = t.clamp(0.0, 1.0);
    let stops = [(13.0, 8.0, 135.0), (190.0, 48.0, 101.0), (240.0, 249.0, 33.0)];
    let (a, b, u) = if t < 0.5 {
        (stops[0], stops[1], t * 2.0)
    } else {
        (stops[1], stops[2], (t - 0.5) * 2.0)
    };
    let c = (
        a.0 + (b.0 - a.0) * u,
        a.1 + (b.1 - a.1) * u,
        a.2 + (b.2 - a.2) * u,
    );
    format!("#{:02x}{:02x}{:02x}", c.0 as u8, c.1 as u8, c.2 as u8)
}

/// Heat map of `values[i * ncols + j]` where `i` walks `y_range` and `j`
/// walks `x_range`. Large grids are strided down to at most 160 x 120 cells.
#[allow(clippy::too_many_arguments)]
pub fn heatmap(
    title: &str,
    x_label: &str,
    y_label: &str,
    x_range: (f64, f64),
    y_range: (f64, f64),
    nrows: usize,
    ncols: usize,
    values: &[f64],
) -> String {
    assert_eq!(values.len(), nrows * ncols, "heatmap shape mismatch");
    let stride_i = nrows.div_ceil(120);
    let stride_j = ncols.div_ceil(160);
    let rows: Vec<usize> = (0..nrows).step_by(stride_i).collect();
    let cols: Vec<usize> = (0..ncols).step_by(stride_j).collect();

    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for &v in values {
        if v.is_finite() {
            lo = lo.min(v);
            hi = hi.max(v);
        }
    }
    if !(hi > lo) {
        hi = lo + 1.0;
    }

    let frame = Frame {
        x_lo: x_range.0,
        x_hi: x_range.1,
        y_lo: y_range.0,
        y_hi: y_range.1,
    };
    let mut out = String::new();
    open_document(&mut out, title);
    let cell_w = (WIDTH - MARGIN_L - MARGIN_R) / cols.len().max(1) as f64;
    let cell_h = (HEIGHT - MARGIN_T - MARGIN_B) / rows.len().max(1) as f64;
    for (ri, &i) in rows.iter().enumerate() {
        for (ci, &j) in cols.iter().enumerate() {
            let v = values[i * ncols + j];
            let t = if v.is_finite() { (v - lo) / (hi - lo) } else { 0.0 };
            let _ = writeln!(
                out,
                "<rect x=\"{}\" y=\"{}\" width=\"{}\" height=\"{}\" fill=\"{}\"/>",
                px(MARGIN_L + ci as f64 * cell_w),
                px(MARGIN_T + (rows.len() - 1 - ri) as f64 * cell_h),
                px(cell_w + 0.5),
                px(cell_h + 0.5),
                ramp(t)
            );
        }
    }
    axes(&mut out, &frame, x_label, y_label, false, false);
    let _ = writeln!(
        out,
        "<text x=\"{}\" y=\"{}\" font-size=\"11\">range [{}, {}]</text>",
        px(MARGIN_L),
        px(HEIGHT - 4.0),
        fmt_tick(lo),
        fmt_tick(hi)
    );
    out.push_str("</svg>\n");
    out
}
