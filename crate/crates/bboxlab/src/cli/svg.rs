//! Minimal self-contained SVG line charts: axes, ticks, legend, curves.
//! No external assets; the output is a pure function of its inputs.

const WIDTH: f64 = 720.0;
const HEIGHT: f64 = 480.0;
const MARGIN_L: f64 = 70.0;
const MARGIN_R: f64 = 160.0;
const MARGIN_T: f64 = 50.0;
const MARGIN_B: f64 = 60.0;

const COLORS: [&str; 6] = [
    "#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b",
];

pub struct Curve {
    pub label: String,
    pub points: Vec<(f64, f64)>,
}

fn fmt(v: f64) -> String {
    let s = format!("{v:.4}");
    let s = s.trim_end_matches('0').trim_end_matches('.');
    if s.is_empty() || s == "-" {
        "0".to_string()
    } else {
        s.to_string()
    }
}

pub fn line_chart(title: &str, x_label: &str, y_label: &str, curves: &[Curve]) -> String {
    let all: Vec<(f64, f64)> = curves.iter().flat_map(|c| c.points.iter().copied()).collect();
    let (mut x0, mut x1) = (f64::INFINITY, f64::NEG_INFINITY);
    let (mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY);
    for &(x, y) in &all {
        x0 = x0.min(x);
        x1 = x1.max(x);
        y0 = y0.min(y);
        y1 = y1.max(y);
    }
    if !x0.is_finite() {
        x0 = 0.0;
        x1 = 1.0;
        y0 = 0.0;
        y1 = 1.0;
    }
    if x1 - x0 < 1e-12 {
        x1 = x0 + 1.0;
    }
    if y1 - y0 < 1e-12 {
        y1 = y0 + 1.0;
    }
    let plot_w = WIDTH - MARGIN_L - MARGIN_R;
    let plot_h = HEIGHT - MARGIN_T - MARGIN_B;
    let px = |x: f64| MARGIN_L + (x - x0) / (x1 - x0) * plot_w;
    let py = |y: f64| MARGIN_T + plot_h - (y - y0) / (y1 - y0) * plot_h;

    let mut s = String::new();
    s.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{WIDTH}\" height=\"{HEIGHT}\" \
         viewBox=\"0 0 {WIDTH} {HEIGHT}\" font-family=\"monospace\" font-size=\"12\">\n"
    ));
    s.push_str(&format!(
        "  <rect x=\"0\" y=\"0\" width=\"{WIDTH}\" height=\"{HEIGHT}\" fill=\"white\"/>\n"
    ));
    s.push_str(&format!(
        "  <text x=\"{}\" y=\"24\" text-anchor=\"middle\" font-size=\"15\">{}</text>\n",
        MARGIN_L + plot_w / 2.0,
        escape(title)
    ));

    // axes
    s.push_str(&format!(
        "  <line x1=\"{l}\" y1=\"{b}\" x2=\"{r}\" y2=\"{b}\" stroke=\"black\"/>\n  <line x1=\"{l}\" y1=\"{t}\" x2=\"{l}\" y2=\"{b}\" stroke=\"black\"/>\n",
        l = MARGIN_L,
        r = MARGIN_L + plot_w,
        t = MARGIN_T,
        b = MARGIN_T + plot_h
    ));

    // ticks
    let n_ticks = 5;
    for i in 0..=n_ticks {
        let f = i as f64 / n_ticks as f64;
        let xv = x0 + f * (x1 - x0);
        let yv = y0 + f * (y1 - y0);
        let xp = px(xv);
        let yp = py(yv);
        s.push_str(&format!(
            "  <line x1=\"{xp}\" y1=\"{}\" x2=\"{xp}\" y2=\"{}\" stroke=\"black\"/>\n",
            MARGIN_T + plot_h,
            MARGIN_T + plot_h + 5.0
        ));
        s.push_str(&format!(
            "  <text x=\"{xp}\" y=\"{}\" text-anchor=\"middle\">{}</text>\n",
            MARGIN_T + plot_h + 20.0,
            fmt(xv)
        ));
        s.push_str(&format!(
            "  <line x1=\"{}\" y1=\"{yp}\" x2=\"{}\" y2=\"{yp}\" stroke=\"black\"/>\n",
            MARGIN_L - 5.0,
            MARGIN_L
        ));
        s.push_str(&format!(
            "  <text x=\"{}\" y=\"{}\" text-anchor=\"end\">{}</text>\n",
            MARGIN_L - 9.0,
            yp + 4.0,
            fmt(yv)
        ));
    }
    s.push_str(&format!(
        "  <text x=\"{}\" y=\"{}\" text-anchor=\"middle\">{}</text>\n",
        MARGIN_L + plot_w / 2.0,
        HEIGHT - 15.0,
        escape(x_label)
    ));
    s.push_str(&format!(
        "  <text x=\"18\" y=\"{}\" text-anchor=\"middle\" transform=\"rotate(-90 18 {})\">{}</text>\n",
        MARGIN_T + plot_h / 2.0,
        MARGIN_T + plot_h / 2.0,
        escape(y_label)
    ));

    // curves
    for (i, curve) in curves.iter().enumerate() {
        let color = COLORS[i % COLORS.len()];
        let pts: Vec<String> = curve
            .points
            .iter()
            .map(|&(x, y)| format!("{:.2},{:.2}", px(x), py(y)))
            .collect();
        s.push_str(&format!(
            "  <polyline fill=\"none\" stroke=\"{color}\" stroke-width=\"2\" points=\"{}\"/>\n",
            pts.join(" ")
        ));
    }

    // legend
    let lx = MARGIN_L + plot_w + 15.0;
    for (i, curve) in curves.iter().enumerate() {
        let color = COLORS[i % COLORS.len()];
        let ly = MARGIN_T + 10.0 + i as f64 * 20.0;
        s.push_str(&format!(
            "  <line x1=\"{lx}\" y1=\"{ly}\" x2=\"{}\" y2=\"{ly}\" stroke=\"{color}\" stroke-width=\"2\"/>\n",
            lx + 24.0
        ));
        s.push_str(&format!(
            "  <text x=\"{}\" y=\"{}\">{}</text>\n",
            lx + 30.0,
            ly + 4.0,
            escape(&curve.label)
        ));
    }

    s.push_str("</svg>\n");
    s
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}
