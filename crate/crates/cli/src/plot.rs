//! A minimal SVG plotter for the experiment figures: line/scatter charts,
//! 4×4 matrix heatmaps and grouped bar charts. No external rendering
//! dependencies; the output is plain static SVG.

use anyhow::Result;
use std::path::Path;

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 440.0;
const MARGIN_L: f64 = 70.0;
const MARGIN_R: f64 = 25.0;
const MARGIN_T: f64 = 45.0;
const MARGIN_B: f64 = 55.0;

const PALETTE: [&str; 6] = [
    "#1f6fb2", "#d94f30", "#3c9d53", "#8356a8", "#c78f1e", "#3aa6a6",
];

pub struct Series {
    pub label: String,
    pub points: Vec<(f64, f64)>,
    /// Draw circular markers at each point.
    pub markers: bool,
    /// Connect points with a polyline.
    pub line: bool,
}

impl Series {
    pub fn line(label: &str, points: Vec<(f64, f64)>) -> Self {
        Self {
            label: label.to_string(),
            points,
            markers: false,
            line: true,
        }
    }

    pub fn scatter(label: &str, points: Vec<(f64, f64)>) -> Self {
        Self {
            label: label.to_string(),
            points,
            markers: true,
            line: false,
        }
    }
}

pub struct LinePlot {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub series: Vec<Series>,
}

fn nice_ticks(lo: f64, hi: f64) -> Vec<f64> {
    let span = (hi - lo).max(1e-12);
    let raw = span / 5.0;
    let mag = 10f64.powf(raw.log10().floor());
    let step = [1.0, 2.0, 2.5, 5.0, 10.0]
        .iter()
        .map(|m| m * mag)
        .find(|&s| span / s <= 6.0)
        .unwrap_or(mag * 10.0);
    let first = (lo / step).ceil() * step;
    let mut ticks = Vec::new();
    let mut t = first;
    while t <= hi + 1e-9 * span {
        ticks.push(t);
        t += step;
    }
    ticks
}

fn fmt_tick(v: f64) -> String {
    if v == 0.0 {
        return "0".into();
    }
    let a = v.abs();
    if (0.01..10000.0).contains(&a) {
        let s = format!("{v:.3}");
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        format!("{v:.2e}")
    }
}

impl LinePlot {
    pub fn render(&self) -> String {
        let (mut xlo, mut xhi) = (f64::INFINITY, f64::NEG_INFINITY);
        let (mut ylo, mut yhi) = (f64::INFINITY, f64::NEG_INFINITY);
        for s in &self.series {
            for &(x, y) in &s.points {
                xlo = xlo.min(x);
                xhi = xhi.max(x);
                ylo = ylo.min(y);
                yhi = yhi.max(y);
            }
        }
        if !xlo.is_finite() {
            xlo = 0.0;
            xhi = 1.0;
            ylo = 0.0;
            yhi = 1.0;
        }
        if xhi - xlo < 1e-12 {
            xhi = xlo + 1.0;
        }
        if yhi - ylo < 1e-12 {
            yhi = ylo + 1.0;
        }
        let pad_y = 0.06 * (yhi - ylo);
        ylo -= pad_y;
        yhi += pad_y;
        let pad_x = 0.04 * (xhi - xlo);
        xlo -= pad_x;
        xhi += pad_x;

        let px = |x: f64| MARGIN_L + (x - xlo) / (xhi - xlo) * (WIDTH - MARGIN_L - MARGIN_R);
        let py =
            |y: f64| HEIGHT - MARGIN_B - (y - ylo) / (yhi - ylo) * (HEIGHT - MARGIN_T - MARGIN_B);

        let mut svg = String::new();
        svg.push_str(&format!(
            "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{WIDTH}\" height=\"{HEIGHT}\" \
             viewBox=\"0 0 {WIDTH} {HEIGHT}\" font-family=\"sans-serif\">\n"
        ));
        svg.push_str("<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n");
        svg.push_str(&format!(
            "<text x=\"{}\" y=\"24\" text-anchor=\"middle\" font-size=\"15\">{}</text>\n",
            WIDTH / 2.0,
            escape(&self.title)
        ));

        // Axes and grid.
        for t in nice_ticks(xlo, xhi) {
            let x = px(t);
            svg.push_str(&format!(
                "<line x1=\"{x:.1}\" y1=\"{:.1}\" x2=\"{x:.1}\" y2=\"{:.1}\" stroke=\"#dddddd\"/>\n",
                py(ylo), py(yhi)
            ));
            svg.push_str(&format!(
                "<text x=\"{x:.1}\" y=\"{:.1}\" text-anchor=\"middle\" font-size=\"11\">{}</text>\n",
                HEIGHT - MARGIN_B + 18.0,
                fmt_tick(t)
            ));
        }
        for t in nice_ticks(ylo, yhi) {
            let y = py(t);
            svg.push_str(&format!(
                "<line x1=\"{:.1}\" y1=\"{y:.1}\" x2=\"{:.1}\" y2=\"{y:.1}\" stroke=\"#dddddd\"/>\n",
                px(xlo), px(xhi)
            ));
            svg.push_str(&format!(
                "<text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"end\" font-size=\"11\">{}</text>\n",
                MARGIN_L - 8.0,
                y + 4.0,
                fmt_tick(t)
            ));
        }
        svg.push_str(&format!(
            "<rect x=\"{MARGIN_L}\" y=\"{MARGIN_T}\" width=\"{:.1}\" height=\"{:.1}\" \
             fill=\"none\" stroke=\"#444444\"/>\n",
            WIDTH - MARGIN_L - MARGIN_R,
            HEIGHT - MARGIN_T - MARGIN_B
        ));
        svg.push_str(&format!(
            "<text x=\"{}\" y=\"{}\" text-anchor=\"middle\" font-size=\"13\">{}</text>\n",
            (MARGIN_L + WIDTH - MARGIN_R) / 2.0,
            HEIGHT - 12.0,
            escape(&self.x_label)
        ));
        svg.push_str(&format!(
            "<text x=\"18\" y=\"{}\" text-anchor=\"middle\" font-size=\"13\" \
             transform=\"rotate(-90 18 {})\">{}</text>\n",
            (MARGIN_T + HEIGHT - MARGIN_B) / 2.0,
            (MARGIN_T + HEIGHT - MARGIN_B) / 2.0,
            escape(&self.y_label)
        ));

        // Data.
        for (k, s) in self.series.iter().enumerate() {
            let color = PALETTE[k % PALETTE.len()];
            if s.line && s.points.len() > 1 {
                let pts: Vec<String> = s
                    .points
                    .iter()
                    .map(|&(x, y)| format!("{:.2},{:.2}", px(x), py(y)))
                    .collect();
                svg.push_str(&format!(
                    "<polyline points=\"{}\" fill=\"none\" stroke=\"{color}\" stroke-width=\"1.8\"/>\n",
                    pts.join(" ")
                ));
            }
            if s.markers {
                for &(x, y) in &s.points {
                    svg.push_str(&format!(
                        "<circle cx=\"{:.2}\" cy=\"{:.2}\" r=\"3.2\" fill=\"{color}\"/>\n",
                        px(x),
                        py(y)
                    ));
                }
            }
            // Legend entry.
            let ly = MARGIN_T + 16.0 + 18.0 * k as f64;
            svg.push_str(&format!(
                "<line x1=\"{:.1}\" y1=\"{ly:.1}\" x2=\"{:.1}\" y2=\"{ly:.1}\" \
                 stroke=\"{color}\" stroke-width=\"3\"/>\n",
                WIDTH - MARGIN_R - 150.0,
                WIDTH - MARGIN_R - 126.0
            ));
            svg.push_str(&format!(
                "<text x=\"{:.1}\" y=\"{:.1}\" font-size=\"11\">{}</text>\n",
                WIDTH - MARGIN_R - 120.0,
                ly + 4.0,
                escape(&s.label)
            ));
        }
        svg.push_str("</svg>\n");
        svg
    }

    pub fn save<P: AsRef<Path>>(&self, path: P) -> Result<()> {
        std::fs::write(path, self.render())?;
        Ok(())
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
}

fn heat_color(v: f64) -> String {
    // Dark blue → teal → yellow.
    let v = v.clamp(0.0, 1.0);
    let stops = [(0.13, 0.15, 0.37), (0.13, 0.57, 0.55), (0.99, 0.91, 0.14)];
    let (a, b, t) = if v < 0.5 {
        (stops[0], stops[1], v * 2.0)
    } else {
        (stops[1], stops[2], v * 2.0 - 1.0)
    };
    let mix = |x: f64, y: f64| ((x + (y - x) * t) * 255.0).round() as u8;
    format!(
        "#{:02x}{:02x}{:02x}",
        mix(a.0, b.0),
        mix(a.1, b.1),
        mix(a.2, b.2)
    )
}

/// Render a labeled 4×4 matrix heatmap with value annotations.
pub fn save_matrix_heatmap<P: AsRef<Path>>(
    path: P,
    title: &str,
    labels: &[&str; 4],
    matrix: &[[f64; 4]; 4],
) -> Result<()> {
    let cell = 70.0;
    let ox = 90.0;
    let oy = 70.0;
    let w = ox + 4.0 * cell + 30.0;
    let h = oy + 4.0 * cell + 30.0;
    let mut svg = String::new();
    svg.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w}\" height=\"{h}\" \
         viewBox=\"0 0 {w} {h}\" font-family=\"sans-serif\">\n"
    ));
    svg.push_str("<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n");
    svg.push_str(&format!(
        "<text x=\"{}\" y=\"26\" text-anchor=\"middle\" font-size=\"14\">{}</text>\n",
        w / 2.0,
        escape(title)
    ));
    for (j, lab) in labels.iter().enumerate() {
        svg.push_str(&format!(
            "<text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"middle\" font-size=\"12\">{lab}</text>\n",
            ox + (j as f64 + 0.5) * cell,
            oy - 10.0
        ));
        svg.push_str(&format!(
            "<text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"end\" font-size=\"12\">{lab}</text>\n",
            ox - 10.0,
            oy + (j as f64 + 0.5) * cell + 4.0
        ));
    }
    for i in 0..4 {
        for j in 0..4 {
            let v = matrix[i][j];
            let x = ox + j as f64 * cell;
            let y = oy + i as f64 * cell;
            svg.push_str(&format!(
                "<rect x=\"{x:.1}\" y=\"{y:.1}\" width=\"{cell}\" height=\"{cell}\" \
                 fill=\"{}\" stroke=\"#ffffff\"/>\n",
                heat_color(v)
            ));
            let text_color = if v > 0.55 { "#222222" } else { "#fafafa" };
            svg.push_str(&format!(
                "<text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"middle\" font-size=\"12\" \
                 fill=\"{text_color}\">{:.3}</text>\n",
                x + cell / 2.0,
                y + cell / 2.0 + 4.0,
                v
            ));
        }
    }
    // Axis roles: columns = sent, rows = detected.
    svg.push_str(&format!(
        "<text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"middle\" font-size=\"12\">sent mode</text>\n",
        ox + 2.0 * cell,
        oy - 32.0
    ));
    svg.push_str(&format!(
        "<text x=\"20\" y=\"{:.1}\" text-anchor=\"middle\" font-size=\"12\" \
         transform=\"rotate(-90 20 {:.1})\">detected mode</text>\n",
        oy + 2.0 * cell,
        oy + 2.0 * cell
    ));
    svg.push_str("</svg>\n");
    std::fs::write(path, svg)?;
    Ok(())
}

/// Grouped bar chart: one group per x category, one bar per series.
pub fn save_bar_chart<P: AsRef<Path>>(
    path: P,
    title: &str,
    x_label: &str,
    y_label: &str,
    categories: &[String],
    series: &[(String, Vec<f64>)],
) -> Result<()> {
    let ymax = series
        .iter()
        .flat_map(|(_, v)| v.iter().cloned())
        .fold(0.0f64, f64::max)
        .max(1e-12);
    let plot_w = WIDTH - MARGIN_L - MARGIN_R;
    let plot_h = HEIGHT - MARGIN_T - MARGIN_B;
    let group_w = plot_w / categories.len() as f64;
    let bar_w = (group_w * 0.8) / series.len() as f64;
    let mut svg = String::new();
    svg.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{WIDTH}\" height=\"{HEIGHT}\" \
         viewBox=\"0 0 {WIDTH} {HEIGHT}\" font-family=\"sans-serif\">\n"
    ));
    svg.push_str("<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n");
    svg.push_str(&format!(
        "<text x=\"{}\" y=\"24\" text-anchor=\"middle\" font-size=\"15\">{}</text>\n",
        WIDTH / 2.0,
        escape(title)
    ));
    for t in nice_ticks(0.0, ymax) {
        let y = HEIGHT - MARGIN_B - t / ymax * plot_h;
        svg.push_str(&format!(
            "<line x1=\"{MARGIN_L}\" y1=\"{y:.1}\" x2=\"{:.1}\" y2=\"{y:.1}\" stroke=\"#dddddd\"/>\n",
            WIDTH - MARGIN_R
        ));
        svg.push_str(&format!(
            "<text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"end\" font-size=\"11\">{}</text>\n",
            MARGIN_L - 8.0,
            y + 4.0,
            fmt_tick(t)
        ));
    }
    for (ci, cat) in categories.iter().enumerate() {
        let gx = MARGIN_L + ci as f64 * group_w;
        for (si, (_, vals)) in series.iter().enumerate() {
            let v = vals.get(ci).cloned().unwrap_or(0.0);
            let bh = v / ymax * plot_h;
            let x = gx + group_w * 0.1 + si as f64 * bar_w;
            svg.push_str(&format!(
                "<rect x=\"{x:.1}\" y=\"{:.1}\" width=\"{:.1}\" height=\"{bh:.1}\" fill=\"{}\"/>\n",
                HEIGHT - MARGIN_B - bh,
                bar_w.max(1.0),
                PALETTE[si % PALETTE.len()]
            ));
        }
        svg.push_str(&format!(
            "<text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"middle\" font-size=\"11\">{}</text>\n",
            gx + group_w / 2.0,
            HEIGHT - MARGIN_B + 18.0,
            escape(cat)
        ));
    }
    for (si, (label, _)) in series.iter().enumerate() {
        let ly = MARGIN_T + 16.0 + 18.0 * si as f64;
        svg.push_str(&format!(
            "<rect x=\"{:.1}\" y=\"{:.1}\" width=\"14\" height=\"10\" fill=\"{}\"/>\n",
            WIDTH - MARGIN_R - 150.0,
            ly - 8.0,
            PALETTE[si % PALETTE.len()]
        ));
        svg.push_str(&format!(
            "<text x=\"{:.1}\" y=\"{:.1}\" font-size=\"11\">{}</text>\n",
            WIDTH - MARGIN_R - 130.0,
            ly + 1.0,
            escape(label)
        ));
    }
    svg.push_str(&format!(
        "<rect x=\"{MARGIN_L}\" y=\"{MARGIN_T}\" width=\"{plot_w:.1}\" height=\"{plot_h:.1}\" \
         fill=\"none\" stroke=\"#444444\"/>\n"
    ));
    svg.push_str(&format!(
        "<text x=\"{}\" y=\"{}\" text-anchor=\"middle\" font-size=\"13\">{}</text>\n",
        (MARGIN_L + WIDTH - MARGIN_R) / 2.0,
        HEIGHT - 12.0,
        escape(x_label)
    ));
    svg.push_str(&format!(
        "<text x=\"18\" y=\"{}\" text-anchor=\"middle\" font-size=\"13\" \
         transform=\"rotate(-90 18 {})\">{}</text>\n",
        (MARGIN_T + HEIGHT - MARGIN_B) / 2.0,
        (MARGIN_T + HEIGHT - MARGIN_B) / 2.0,
        escape(y_label)
    ));
    svg.push_str("</svg>\n");
    std::fs::write(path, svg)?;
    Ok(())
}
