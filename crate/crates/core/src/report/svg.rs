use std::collections::BTreeSet;
use std::fmt::Write;

use super::fmt_value;
use crate::harness::{Representation, SumRow, TrendRow};

const WIDTH: f64 = 960.0;
const PANEL_W: f64 = 380.0;
const PANEL_X: [f64; 2] = [70.0, 550.0];
const PLOT_TOP: f64 = 60.0;
const PLOT_H: f64 = 280.0;
const BASELINE: f64 = PLOT_TOP + PLOT_H;
const LEGEND_TOP: f64 = BASELINE + 50.0;
const PALETTE: [&str; 10] =
    ["#4c72b0", "#dd8452", "#55a868", "#c44e52", "#8172b3", "#937860", "#da8bc3", "#8c8c8c", "#ccb974", "#64b5cd"];

const PANELS: [(&str, &str); 2] = [("n_leaf", "Number of leaves"), ("d_max", "Maximum depth")];

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

fn color(i: usize) -> &'static str {
    PALETTE[i % PALETTE.len()]
}

fn open(out: &mut String, height: f64, title: &str) {
    writeln!(
        out,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{WIDTH}\" height=\"{height}\" viewBox=\"0 0 {WIDTH} {height}\" font-family=\"sans-serif\" font-size=\"12\">"
    )
    .unwrap();
    writeln!(out, "<rect x=\"0\" y=\"0\" width=\"{WIDTH}\" height=\"{height}\" fill=\"#ffffff\"/>").unwrap();
    writeln!(out, "<text x=\"{}\" y=\"24\" text-anchor=\"middle\" font-size=\"16\">{}</text>", WIDTH / 2.0, escape(title))
        .unwrap();
}

/// Axes, panel title and the y-axis maximum label.
fn panel_frame(out: &mut String, x0: f64, title: &str, max: f64) {
    writeln!(out, "<text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"middle\">{title}</text>", x0 + PANEL_W / 2.0, PLOT_TOP - 12.0)
        .unwrap();
    writeln!(out, "<line x1=\"{x0}\" y1=\"{BASELINE}\" x2=\"{}\" y2=\"{BASELINE}\" stroke=\"#000000\"/>", x0 + PANEL_W).unwrap();
    writeln!(out, "<line x1=\"{x0}\" y1=\"{PLOT_TOP}\" x2=\"{x0}\" y2=\"{BASELINE}\" stroke=\"#000000\"/>").unwrap();
    writeln!(out, "<text x=\"{}\" y=\"{PLOT_TOP}\" text-anchor=\"end\">{}</text>", x0 - 6.0, fmt_value(max)).unwrap();
    writeln!(out, "<text x=\"{}\" y=\"{BASELINE}\" text-anchor=\"end\">0</text>", x0 - 6.0).unwrap();
}

fn legend(out: &mut String, reps: &[&Representation]) {
    writeln!(out, "<g class=\"legend\">").unwrap();
    for (i, rep) in reps.iter().enumerate() {
        let x = PANEL_X[0] + (i % 6) as f64 * 140.0;
        let y = LEGEND_TOP + (i / 6) as f64 * 20.0;
        writeln!(out, "<rect x=\"{x}\" y=\"{}\" width=\"12\" height=\"12\" fill=\"{}\"/>", y - 10.0, color(i)).unwrap();
        writeln!(out, "<text x=\"{}\" y=\"{y}\">{}</text>", x + 18.0, escape(&legend_label(rep))).unwrap();
    }
    writeln!(out, "</g>").unwrap();
}

fn legend_label(rep: &Representation) -> String {
    match rep.bottleneck_dim() {
        None => "raw".to_string(),
        Some(d) => format!("{} ({d})", rep.label()),
    }
}

fn scaled(value: f64, max: f64) -> f64 {
    if max > 0.0 {
        value / max * PLOT_H
    } else {
        0.0
    }
}

fn chart_height(reps: usize) -> f64 {
    LEGEND_TOP + 20.0 * reps.div_ceil(6) as f64 + 10.0
}

/// Two panels of bars (summed leaves, summed depth), representations in canonical order.
pub(crate) fn bars_chart(dataset: &str, rows: &[&SumRow]) -> String {
    let reps: Vec<&Representation> = rows.iter().map(|r| &r.representation).collect();
    let mut out = String::new();
    open(&mut out, chart_height(reps.len()), &format!("{dataset}: metrics summed over sample sizes"));
    let slot = PANEL_W / rows.len().max(1) as f64;
    for ((key, title), x0) in PANELS.iter().zip(PANEL_X) {
        let values: Vec<f64> = rows.iter().map(|r| if *key == "n_leaf" { r.sum_n_leaf } else { r.sum_d_max }).collect();
        let max = values.iter().copied().fold(0.0, f64::max);
        panel_frame(&mut out, x0, title, max);
        for (i, (row, &value)) in rows.iter().zip(&values).enumerate() {
            let h = scaled(value, max);
            let text = fmt_value(value);
            writeln!(
                out,
                "<rect class=\"bar\" data-panel=\"{key}\" data-representation=\"{}\" data-value=\"{text}\" x=\"{:.3}\" y=\"{:.3}\" width=\"{:.3}\" height=\"{h:.3}\" fill=\"{}\"><title>{}: {text}</title></rect>",
                escape(row.representation.label()),
                x0 + slot * (i as f64 + 0.15),
                BASELINE - h,
                slot * 0.7,
                color(i),
                escape(row.representation.label()),
            )
            .unwrap();
        }
    }
    legend(&mut out, &reps);
    out.push_str("</svg>\n");
    out
}

/// Two panels of lines (mean leaves, mean depth) against per-class sample size.
pub(crate) fn trends_chart(dataset: &str, rows: &[&TrendRow]) -> String {
    let mut reps: Vec<&Representation> = Vec::new();
    for r in rows {
        if reps.last() != Some(&&r.representation) {
            reps.push(&r.representation);
        }
    }
    let sizes: Vec<usize> = rows.iter().map(|r| r.per_class_n).collect::<BTreeSet<_>>().into_iter().collect();
    let x_of = |x0: f64, n: usize| {
        let i = sizes.iter().position(|&s| s == n).expect("size collected above");
        x0 + PANEL_W * (i as f64 + 0.5) / sizes.len() as f64
    };
    let mut out = String::new();
    open(&mut out, chart_height(reps.len()), &format!("{dataset}: metrics by samples per class"));
    for ((key, title), x0) in PANELS.iter().zip(PANEL_X) {
        let value = |r: &TrendRow| if *key == "n_leaf" { r.mean_n_leaf } else { r.mean_d_max };
        let max = rows.iter().map(|r| value(r)).fold(0.0, f64::max);
        panel_frame(&mut out, x0, title, max);
        for &n in &sizes {
            writeln!(out, "<text x=\"{:.3}\" y=\"{}\" text-anchor=\"middle\">{n}</text>", x_of(x0, n), BASELINE + 16.0).unwrap();
        }
        for (i, rep) in reps.iter().enumerate() {
            let line: Vec<&&TrendRow> = rows.iter().filter(|r| &r.representation == *rep).collect();
            let points: Vec<String> =
                line.iter().map(|r| format!("{:.3},{:.3}", x_of(x0, r.per_class_n), BASELINE - scaled(value(r), max))).collect();
            writeln!(
                out,
                "<polyline data-panel=\"{key}\" data-representation=\"{}\" points=\"{}\" fill=\"none\" stroke=\"{}\" stroke-width=\"2\"/>",
                escape(rep.label()),
                points.join(" "),
                color(i)
            )
            .unwrap();
            for r in line {
                writeln!(
                    out,
                    "<circle class=\"point\" data-panel=\"{key}\" data-representation=\"{}\" data-size=\"{}\" data-value=\"{}\" cx=\"{:.3}\" cy=\"{:.3}\" r=\"3\" fill=\"{}\"/>",
                    escape(rep.label()),
                    r.per_class_n,
                    fmt_value(value(r)),
                    x_of(x0, r.per_class_n),
                    BASELINE - scaled(value(r), max),
                    color(i)
                )
                .unwrap();
            }
        }
    }
    writeln!(out, "<text x=\"{}\" y=\"{}\" text-anchor=\"middle\">samples per class</text>", WIDTH / 2.0, BASELINE + 34.0).unwrap();
    legend(&mut out, &reps);
    out.push_str("</svg>\n");
    out
}
