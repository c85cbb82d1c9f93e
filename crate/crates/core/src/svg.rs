//! Minimal hand-rolled SVG bar and line charts for report figures.

fn esc(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 400.0;
const MARGIN_LEFT: f64 = 60.0;
const MARGIN_BOTTOM: f64 = 50.0;
const MARGIN_TOP: f64 = 40.0;
const MARGIN_RIGHT: f64 = 20.0;

fn frame(title: &str, body: &str, x_label: &str, y_label: &str, y_max: f64) -> String {
    let plot_h = HEIGHT - MARGIN_TOP - MARGIN_BOTTOM;
    let mut svg = String::new();
    svg.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{WIDTH}\" height=\"{HEIGHT}\" viewBox=\"0 0 {WIDTH} {HEIGHT}\">\n"
    ));
    svg.push_str("<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n");
    svg.push_str(&format!(
        "<text x=\"{}\" y=\"22\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"15\">{}</text>\n",
        WIDTH / 2.0,
        esc(title)
    ));
    // axes
    svg.push_str(&format!(
        "<line x1=\"{MARGIN_LEFT}\" y1=\"{MARGIN_TOP}\" x2=\"{MARGIN_LEFT}\" y2=\"{}\" stroke=\"black\"/>\n",
        MARGIN_TOP + plot_h
    ));
    svg.push_str(&format!(
        "<line x1=\"{MARGIN_LEFT}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"black\"/>\n",
        MARGIN_TOP + plot_h,
        WIDTH - MARGIN_RIGHT,
        MARGIN_TOP + plot_h
    ));
    // y ticks at 0, max/2, max
    for frac in [0.0, 0.5, 1.0] {
        let y = MARGIN_TOP + plot_h * (1.0 - frac);
        svg.push_str(&format!(
            "<text x=\"{}\" y=\"{:.1}\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"11\">{:.3}</text>\n",
            MARGIN_LEFT - 6.0,
            y + 4.0,
            y_max * frac
        ));
    }
    svg.push_str(&format!(
        "<text x=\"{}\" y=\"{}\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"12\">{}</text>\n",
        WIDTH / 2.0,
        HEIGHT - 8.0,
        esc(x_label)
    ));
    svg.push_str(&format!(
        "<text x=\"16\" y=\"{}\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"12\" transform=\"rotate(-90 16 {})\">{}</text>\n",
        HEIGHT / 2.0,
        HEIGHT / 2.0,
        esc(y_label)
    ));
    svg.push_str(body);
    svg.push_str("</svg>\n");
    svg
}

/// Vertical bars; values may be negative (bars drop below a zero baseline
/// placed by the data range).
pub fn bar_chart(title: &str, x_label: &str, y_label: &str, labels: &[String], values: &[f64]) -> String {
    let y_max = values.iter().cloned().fold(0.0f64, f64::max).max(1e-9);
    let y_min = values.iter().cloned().fold(0.0f64, f64::min);
    let span = (y_max - y_min).max(1e-9);
    let plot_w = WIDTH - MARGIN_LEFT - MARGIN_RIGHT;
    let plot_h = HEIGHT - MARGIN_TOP - MARGIN_BOTTOM;
    let n = values.len().max(1);
    let slot = plot_w / n as f64;
    let bar_w = slot * 0.7;
    let zero_y = MARGIN_TOP + plot_h * (y_max / span);

    let mut body = String::new();
    for (i, (&v, label)) in values.iter().zip(labels).enumerate() {
        let x = MARGIN_LEFT + slot * i as f64 + (slot - bar_w) / 2.0;
        let h = plot_h * v.abs() / span;
        let y = if v >= 0.0 { zero_y - h } else { zero_y };
        body.push_str(&format!(
            "<rect x=\"{x:.1}\" y=\"{y:.1}\" width=\"{bar_w:.1}\" height=\"{h:.1}\" fill=\"#4878cf\"/>\n"
        ));
        body.push_str(&format!(
            "<text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"11\">{}</text>\n",
            x + bar_w / 2.0,
            MARGIN_TOP + plot_h + 16.0,
            esc(label)
        ));
    }
    frame(title, &body, x_label, y_label, y_max)
}

/// One polyline per named series.
pub fn line_chart(
    title: &str,
    x_label: &str,
    y_label: &str,
    series: &[(String, Vec<(f64, f64)>)],
) -> String {
    let palette = ["#4878cf", "#d65f5f", "#6acc65", "#b47cc7"];
    let xs: Vec<f64> = series.iter().flat_map(|(_, pts)| pts.iter().map(|p| p.0)).collect();
    let ys: Vec<f64> = series.iter().flat_map(|(_, pts)| pts.iter().map(|p| p.1)).collect();
    let x_min = xs.iter().cloned().fold(f64::INFINITY, f64::min).min(0.0);
    let x_max = xs.iter().cloned().fold(0.0f64, f64::max).max(x_min + 1e-9);
    let y_max = ys.iter().cloned().fold(0.0f64, f64::max).max(1e-9);
    let plot_w = WIDTH - MARGIN_LEFT - MARGIN_RIGHT;
    let plot_h = HEIGHT - MARGIN_TOP - MARGIN_BOTTOM;

    let mut body = String::new();
    for (s, (name, points)) in series.iter().enumerate() {
        let color = palette[s % palette.len()];
        let path: Vec<String> = points
            .iter()
            .map(|&(x, y)| {
                let px = MARGIN_LEFT + plot_w * (x - x_min) / (x_max - x_min);
                let py = MARGIN_TOP + plot_h * (1.0 - y / y_max);
                format!("{px:.1},{py:.1}")
            })
            .collect();
        body.push_str(&format!(
            "<polyline points=\"{}\" fill=\"none\" stroke=\"{color}\" stroke-width=\"2\"/>\n",
            path.join(" ")
        ));
        body.push_str(&format!(
            "<text x=\"{:.1}\" y=\"{:.1}\" font-family=\"sans-serif\" font-size=\"11\" fill=\"{color}\">{}</text>\n",
            WIDTH - MARGIN_RIGHT - 120.0,
            MARGIN_TOP + 16.0 * (s + 1) as f64,
            esc(name)
        ));
    }
    frame(title, &body, x_label, y_label, y_max)
}
