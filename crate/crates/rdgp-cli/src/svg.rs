//! Static SVG plots with no external renderer: linear axes, polylines,
//! optional scatter and point markers, a dashed vertical boundary marker,
//! and a legend. Pixel coordinates are written at fixed precision so a
//! rerun with identical inputs is byte-identical.

use rdgp::report::format_sig;

const WIDTH: f64 = 800.0;
const HEIGHT: f64 = 500.0;
const MARGIN_L: f64 = 72.0;
const MARGIN_R: f64 = 24.0;
const MARGIN_T: f64 = 48.0;
const MARGIN_B: f64 = 56.0;

pub struct Series {
    /// Legend entry; an empty label is drawn but not listed.
    pub label: String,
    pub color: &'static str,
    pub dashed: bool,
    /// Draw a circle at each point in addition to the line.
    pub markers: bool,
    /// Non-finite points split the line into segments.
    pub points: Vec<(f64, f64)>,
}

struct Scale {
    x_min: f64,
    x_span: f64,
    y_min: f64,
    y_span: f64,
}

impl Scale {
    fn sx(&self, x: f64) -> f64 {
        MARGIN_L + (x - self.x_min) / self.x_span * (WIDTH - MARGIN_L - MARGIN_R)
    }

    fn sy(&self, y: f64) -> f64 {
        HEIGHT - MARGIN_B - (y - self.y_min) / self.y_span * (HEIGHT - MARGIN_T - MARGIN_B)
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Data extent padded by 4% a side; a degenerate extent widens to a unit
/// window so the scale never divides by zero.
fn padded(min: f64, max: f64) -> (f64, f64) {
    if !(min.is_finite() && max.is_finite()) {
        return (0.0, 1.0);
    }
    let span = max - min;
    if span <= 0.0 {
        return (min - 1.0, 2.0);
    }
    (min - 0.04 * span, 1.08 * span)
}

pub fn plot(
    title: &str,
    x_label: &str,
    y_label: &str,
    scatter: &[(f64, f64)],
    series: &[Series],
    vline: Option<f64>,
) -> String {
    let mut x_min = f64::INFINITY;
    let mut x_max = f64::NEG_INFINITY;
    let mut y_min = f64::INFINITY;
    let mut y_max = f64::NEG_INFINITY;
    let finite_points = scatter
        .iter()
        .chain(series.iter().flat_map(|s| s.points.iter()))
        .filter(|(x, y)| x.is_finite() && y.is_finite());
    for &(x, y) in finite_points {
        x_min = x_min.min(x);
        x_max = x_max.max(x);
        y_min = y_min.min(y);
        y_max = y_max.max(y);
    }
    if let Some(v) = vline {
        x_min = x_min.min(v);
        x_max = x_max.max(v);
    }
    let (x_min, x_span) = padded(x_min, x_max);
    let (y_min, y_span) = padded(y_min, y_max);
    let scale = Scale { x_min, x_span, y_min, y_span };

    let mut out = String::new();
    out.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{WIDTH}\" height=\"{HEIGHT}\" \
         viewBox=\"0 0 {WIDTH} {HEIGHT}\" font-family=\"sans-serif\">\n"
    ));
    out.push_str("<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n");
    out.push_str(&format!(
        "<text x=\"{:.2}\" y=\"26\" text-anchor=\"middle\" font-size=\"16\">{}</text>\n",
        (MARGIN_L + WIDTH - MARGIN_R) / 2.0,
        escape(title)
    ));

    // Axes, grid, tick labels.
    for i in 0..5 {
        let f = i as f64 / 4.0;
        let xv = x_min + f * x_span;
        let yv = y_min + f * y_span;
        let px = scale.sx(xv);
        let py = scale.sy(yv);
        out.push_str(&format!(
            "<line x1=\"{px:.2}\" y1=\"{:.2}\" x2=\"{px:.2}\" y2=\"{:.2}\" stroke=\"#e0e0e0\"/>\n",
            MARGIN_T,
            HEIGHT - MARGIN_B
        ));
        out.push_str(&format!(
            "<line x1=\"{:.2}\" y1=\"{py:.2}\" x2=\"{:.2}\" y2=\"{py:.2}\" stroke=\"#e0e0e0\"/>\n",
            MARGIN_L,
            WIDTH - MARGIN_R
        ));
        out.push_str(&format!(
            "<text x=\"{px:.2}\" y=\"{:.2}\" text-anchor=\"middle\" font-size=\"11\">{}</text>\n",
            HEIGHT - MARGIN_B + 16.0,
            format_sig(xv, 4)
        ));
        out.push_str(&format!(
            "<text x=\"{:.2}\" y=\"{:.2}\" text-anchor=\"end\" font-size=\"11\">{}</text>\n",
            MARGIN_L - 6.0,
            py + 4.0,
            format_sig(yv, 4)
        ));
    }
    out.push_str(&format!(
        "<rect x=\"{MARGIN_L}\" y=\"{MARGIN_T}\" width=\"{:.2}\" height=\"{:.2}\" \
         fill=\"none\" stroke=\"#404040\"/>\n",
        WIDTH - MARGIN_L - MARGIN_R,
        HEIGHT - MARGIN_T - MARGIN_B
    ));
    out.push_str(&format!(
        "<text x=\"{:.2}\" y=\"{:.2}\" text-anchor=\"middle\" font-size=\"13\">{}</text>\n",
        (MARGIN_L + WIDTH - MARGIN_R) / 2.0,
        HEIGHT - 12.0,
        escape(x_label)
    ));
    out.push_str(&format!(
        "<text x=\"18\" y=\"{:.2}\" text-anchor=\"middle\" font-size=\"13\" \
         transform=\"rotate(-90 18 {:.2})\">{}</text>\n",
        (MARGIN_T + HEIGHT - MARGIN_B) / 2.0,
        (MARGIN_T + HEIGHT - MARGIN_B) / 2.0,
        escape(y_label)
    ));

    if let Some(v) = vline {
        let px = scale.sx(v);
        out.push_str(&format!(
            "<line x1=\"{px:.2}\" y1=\"{MARGIN_T}\" x2=\"{px:.2}\" y2=\"{:.2}\" \
             stroke=\"#909090\" stroke-dasharray=\"3 3\"/>\n",
            HEIGHT - MARGIN_B
        ));
    }

    for &(x, y) in scatter.iter().filter(|(x, y)| x.is_finite() && y.is_finite()) {
        out.push_str(&format!(
            "<circle cx=\"{:.2}\" cy=\"{:.2}\" r=\"2.5\" fill=\"#5a6b7a\" opacity=\"0.55\"/>\n",
            scale.sx(x),
            scale.sy(y)
        ));
    }

    for s in series {
        let dash = if s.dashed { " stroke-dasharray=\"6 4\"" } else { "" };
        let mut segment: Vec<String> = Vec::new();
        let flush = |segment: &mut Vec<String>, out: &mut String| {
            if segment.len() >= 2 {
                out.push_str(&format!(
                    "<polyline fill=\"none\" stroke=\"{}\" stroke-width=\"1.8\"{dash} \
                     points=\"{}\"/>\n",
                    s.color,
                    segment.join(" ")
                ));
            }
            segment.clear();
        };
        for &(x, y) in &s.points {
            if x.is_finite() && y.is_finite() {
                segment.push(format!("{:.2},{:.2}", scale.sx(x), scale.sy(y)));
            } else {
                flush(&mut segment, &mut out);
            }
        }
        flush(&mut segment, &mut out);
        if s.markers {
            for &(x, y) in s.points.iter().filter(|(x, y)| x.is_finite() && y.is_finite()) {
                out.push_str(&format!(
                    "<circle cx=\"{:.2}\" cy=\"{:.2}\" r=\"3\" fill=\"{}\"/>\n",
                    scale.sx(x),
                    scale.sy(y),
                    s.color
                ));
            }
        }
    }

    let mut row = 0;
    for s in series.iter().filter(|s| !s.label.is_empty()) {
        let y = MARGIN_T + 16.0 + 18.0 * row as f64;
        let x = WIDTH - MARGIN_R - 170.0;
        let dash = if s.dashed { " stroke-dasharray=\"6 4\"" } else { "" };
        out.push_str(&format!(
            "<line x1=\"{x:.2}\" y1=\"{y:.2}\" x2=\"{:.2}\" y2=\"{y:.2}\" stroke=\"{}\" \
             stroke-width=\"1.8\"{dash}/>\n",
            x + 24.0,
            s.color
        ));
        out.push_str(&format!(
            "<text x=\"{:.2}\" y=\"{:.2}\" font-size=\"12\">{}</text>\n",
            x + 30.0,
            y + 4.0,
            escape(&s.label)
        ));
        row += 1;
    }

    out.push_str("</svg>\n");
    out
}
