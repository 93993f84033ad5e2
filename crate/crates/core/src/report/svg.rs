//! Log-log histogram plots with fixed geometry.

use std::fmt::Write;

use crate::scenarios::{bin_edges, Summary, BIN_COUNT};

const WIDTH: f64 = 720.0;
const HEIGHT: f64 = 420.0;
const LEFT: f64 = 70.0;
const RIGHT: f64 = 20.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 60.0;
/// Bars start just below one count so single hits stay visible.
const FLOOR: f64 = -0.3;
const PALETTE: [&str; 6] = ["#1b6ca8", "#d1495b", "#edae49", "#00798c", "#66a182", "#6c4f77"];

fn decade_span(series: &[(String, &Summary)]) -> (usize, usize) {
    let per = BIN_COUNT / 6;
    let occupied = series
        .iter()
        .flat_map(|(_, s)| s.histogram.occupied().map(|(i, _)| i));
    let (lo, hi) = occupied.fold((usize::MAX, 0), |(lo, hi), i| (lo.min(i), hi.max(i)));
    if lo == usize::MAX {
        return (0, 1);
    }
    (lo / per, hi / per + 1)
}

/// One series per labelled summary; x is cycles, y is count, both log.
pub fn render_histogram(title: &str, series: &[(String, &Summary)]) -> String {
    let per = BIN_COUNT / 6;
    let (d0, d1) = decade_span(series);
    let first_bin = d0 * per;
    let bins = (d1 - d0) * per;
    let max_count = series
        .iter()
        .flat_map(|(_, s)| s.histogram.counts.iter().copied())
        .max()
        .unwrap_or(1)
        .max(1);
    let y_decades = ((max_count as f64).log10().ceil() as usize).max(1);
    let plot_w = WIDTH - LEFT - RIGHT;
    let plot_h = HEIGHT - TOP - BOTTOM;
    let bin_w = plot_w / bins as f64;
    let y_of = |log_count: f64| TOP + plot_h * (1.0 - (log_count - FLOOR) / (y_decades as f64 - FLOOR));

    let mut out = String::new();
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(out, r#"<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#);
    let _ = writeln!(
        out,
        r#"<text x="{:.2}" y="20" text-anchor="middle" font-size="14">{}</text>"#,
        WIDTH / 2.0,
        escape(title)
    );

    // Axes and decade grid.
    let (x0, y0, x1) = (LEFT, TOP + plot_h, LEFT + plot_w);
    let _ = writeln!(out, r#"<g stroke="black" fill="none">"#);
    let _ = writeln!(out, r#"<line x1="{x0:.2}" y1="{y0:.2}" x2="{x1:.2}" y2="{y0:.2}"/>"#);
    let _ = writeln!(out, r#"<line x1="{x0:.2}" y1="{TOP:.2}" x2="{x0:.2}" y2="{y0:.2}"/>"#);
    let _ = writeln!(out, "</g>");
    let _ = writeln!(out, r#"<g fill="black">"#);
    for d in d0..=d1 {
        let x = LEFT + ((d - d0) * per) as f64 * bin_w;
        let _ = writeln!(out, r##"<line x1="{x:.2}" y1="{y0:.2}" x2="{x:.2}" y2="{:.2}" stroke="black"/>"##, y0 + 5.0);
        let _ = writeln!(
            out,
            r#"<text x="{x:.2}" y="{:.2}" text-anchor="middle">1e{d}</text>"#,
            y0 + 18.0
        );
    }
    for d in 0..=y_decades {
        let y = y_of(d as f64);
        let _ = writeln!(out, r##"<line x1="{:.2}" y1="{y:.2}" x2="{x0:.2}" y2="{y:.2}" stroke="black"/>"##, x0 - 5.0);
        let _ = writeln!(
            out,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="end">1e{d}</text>"#,
            x0 - 8.0,
            y + 4.0
        );
    }
    let _ = writeln!(
        out,
        r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">cycles</text>"#,
        LEFT + plot_w / 2.0,
        HEIGHT - 15.0
    );
    let _ = writeln!(
        out,
        r#"<text x="18" y="{:.2}" text-anchor="middle" transform="rotate(-90 18 {:.2})">count</text>"#,
        TOP + plot_h / 2.0,
        TOP + plot_h / 2.0
    );
    let _ = writeln!(out, "</g>");

    let n = series.len().max(1);
    let sub_w = bin_w / n as f64;
    for (si, (label, summary)) in series.iter().enumerate() {
        let color = PALETTE[si % PALETTE.len()];
        let _ = writeln!(out, r#"<g fill="{color}" data-series="{}">"#, escape(label));
        for (bin, count) in summary.histogram.occupied() {
            if bin < first_bin || bin >= first_bin + bins {
                continue;
            }
            let x = LEFT + (bin - first_bin) as f64 * bin_w + si as f64 * sub_w;
            let top = y_of((count as f64).log10());
            let _ = writeln!(
                out,
                r#"<rect x="{x:.2}" y="{top:.2}" width="{sub_w:.2}" height="{:.2}"><title>[{:.0}, {:.0}) {count}</title></rect>"#,
                y0 - top,
                bin_edges()[bin],
                bin_edges()[bin + 1],
            );
        }
        let _ = writeln!(out, "</g>");
    }

    // Legend.
    let _ = writeln!(out, r#"<g font-size="11">"#);
    for (si, (label, _)) in series.iter().enumerate() {
        let y = TOP + 6.0 + 16.0 * si as f64;
        let x = WIDTH - RIGHT - 150.0;
        let _ = writeln!(
            out,
            r#"<rect x="{x:.2}" y="{y:.2}" width="10" height="10" fill="{}"/><text x="{:.2}" y="{:.2}">{}</text>"#,
            PALETTE[si % PALETTE.len()],
            x + 14.0,
            y + 9.0,
            escape(label)
        );
    }
    let _ = writeln!(out, "</g>");
    out.push_str("</svg>\n");
    out
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}
