//! Minimal self-contained SVG line plot for cumulative-loss curves.
//! No external assets or fonts beyond generic `sans-serif`.

use std::fmt::Write as _;

const COLORS: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"];
const W: f64 = 720.0;
const H: f64 = 480.0;
const ML: f64 = 70.0; // margins
const MR: f64 = 160.0;
const MT: f64 = 30.0;
const MB: f64 = 55.0;

/// Render curves (label, y values over the shared x grid) into an SVG
/// document string.
pub fn line_plot(
    title: &str,
    x_label: &str,
    y_label: &str,
    xs: &[f64],
    curves: &[(String, Vec<f64>)],
) -> String {
    let x_max = xs.last().copied().unwrap_or(1.0).max(1e-12);
    let y_max = curves
        .iter()
        .flat_map(|(_, ys)| ys.iter().copied())
        .fold(0.0f64, f64::max)
        .max(1e-12);
    let px = |x: f64| ML + (x / x_max) * (W - ML - MR);
    let py = |y: f64| H - MB - (y / y_max) * (H - MT - MB);

    let mut s = String::new();
    let _ = writeln!(
        s,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{W}\" height=\"{H}\" \
         viewBox=\"0 0 {W} {H}\">"
    );
    let _ = writeln!(s, "<rect width=\"{W}\" height=\"{H}\" fill=\"white\"/>");
    let _ = writeln!(
        s,
        "<text x=\"{:.1}\" y=\"20\" text-anchor=\"middle\" font-family=\"sans-serif\" \
         font-size=\"15\">{title}</text>",
        ML + (W - ML - MR) / 2.0
    );
    // axes
    let _ = writeln!(
        s,
        "<line x1=\"{ML}\" y1=\"{MT}\" x2=\"{ML}\" y2=\"{:.1}\" stroke=\"black\"/>",
        H - MB
    );
    let _ = writeln!(
        s,
        "<line x1=\"{ML}\" y1=\"{:.1}\" x2=\"{:.1}\" y2=\"{:.1}\" stroke=\"black\"/>",
        H - MB,
        W - MR,
        H - MB
    );
    // ticks: 5 per axis
    for i in 0..=5 {
        let xv = x_max * i as f64 / 5.0;
        let yv = y_max * i as f64 / 5.0;
        let _ = writeln!(
            s,
            "<line x1=\"{:.1}\" y1=\"{:.1}\" x2=\"{:.1}\" y2=\"{:.1}\" stroke=\"black\"/>\
             <text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"middle\" font-family=\"sans-serif\" \
             font-size=\"11\">{:.2}</text>",
            px(xv),
            H - MB,
            px(xv),
            H - MB + 5.0,
            px(xv),
            H - MB + 18.0,
            xv
        );
        let _ = writeln!(
            s,
            "<line x1=\"{:.1}\" y1=\"{:.1}\" x2=\"{:.1}\" y2=\"{:.1}\" stroke=\"black\"/>\
             <text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"end\" font-family=\"sans-serif\" \
             font-size=\"11\">{:.2}</text>",
            ML - 5.0,
            py(yv),
            ML,
            py(yv),
            ML - 8.0,
            py(yv) + 4.0,
            yv
        );
    }
    let _ = writeln!(
        s,
        "<text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"middle\" font-family=\"sans-serif\" \
         font-size=\"13\">{x_label}</text>",
        ML + (W - ML - MR) / 2.0,
        H - 12.0
    );
    let _ = writeln!(
        s,
        "<text x=\"18\" y=\"{:.1}\" text-anchor=\"middle\" font-family=\"sans-serif\" \
         font-size=\"13\" transform=\"rotate(-90 18 {:.1})\">{y_label}</text>",
        MT + (H - MT - MB) / 2.0,
        MT + (H - MT - MB) / 2.0
    );
    // curves and legend
    for (ci, (label, ys)) in curves.iter().enumerate() {
        let color = COLORS[ci % COLORS.len()];
        let mut points = String::new();
        // subsample long curves; the plot cannot resolve more than ~1k points
        let stride = (xs.len() / 1000).max(1);
        for (k, (&x, &y)) in xs.iter().zip(ys).enumerate() {
            if k % stride == 0 || k == xs.len() - 1 {
                let _ = write!(points, "{:.2},{:.2} ", px(x), py(y));
            }
        }
        let _ = writeln!(
            s,
            "<polyline points=\"{}\" fill=\"none\" stroke=\"{color}\" stroke-width=\"1.5\"/>",
            points.trim_end()
        );
        let ly = MT + 18.0 * ci as f64 + 10.0;
        let _ = writeln!(
            s,
            "<line x1=\"{:.1}\" y1=\"{ly:.1}\" x2=\"{:.1}\" y2=\"{ly:.1}\" stroke=\"{color}\" \
             stroke-width=\"2\"/><text x=\"{:.1}\" y=\"{:.1}\" font-family=\"sans-serif\" \
             font-size=\"12\">{label}</text>",
            W - MR + 10.0,
            W - MR + 40.0,
            W - MR + 46.0,
            ly + 4.0
        );
    }
    s.push_str("</svg>\n");
    s
}
