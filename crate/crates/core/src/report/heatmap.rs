use super::svg::{diverging, gradient_def, Svg, DIVERGING_STOPS};
use crate::error::{Error, Result};
use crate::robustness::CorrelationSummary;

const CELL: f64 = 64.0;
const LABELS: f64 = 170.0;
const MARGIN: f64 = 10.0;
const TITLE_H: f64 = 30.0;

/// Mean correlation per condition pair on a diverging `[-1, 1]` scale, with
/// `mean (std)` written in each cell.
pub fn render_robustness_svg(summary: &CorrelationSummary) -> Result<String> {
    let n = summary.labels.len();
    if summary.means.rows() != n || summary.stds.rows() != n {
        return Err(Error::Render("summary matrices do not match labels".into()));
    }
    let x0 = MARGIN + LABELS;
    let y0 = TITLE_H;
    let width = x0 + n as f64 * CELL + 70.0;
    let height = y0 + n as f64 * CELL + LABELS;
    let mut svg = Svg::new(width, height);
    svg.raw(&format!("<defs>{}</defs>", gradient_def("div", &DIVERGING_STOPS, true)));
    svg.text(
        MARGIN,
        20.0,
        "font-size=\"14\" font-weight=\"bold\"",
        &format!("metric distance correlations over {} seeds", summary.n_seeds),
    );
    for i in 0..n {
        for j in 0..n {
            let (m, s) = (summary.means.get(i, j), summary.stds.get(i, j));
            let (x, y) = (x0 + j as f64 * CELL, y0 + i as f64 * CELL);
            svg.rect_titled(
                "cell",
                x,
                y,
                CELL,
                CELL,
                &format!("fill=\"{}\" stroke=\"#ffffff\"", diverging(m)),
                &format!("{} vs {}: {m:.3} ({s:.3})", summary.labels[i], summary.labels[j]),
            );
            let ink = if m.abs() > 0.6 { "#ffffff" } else { "#222222" };
            svg.text(
                x + CELL / 2.0,
                y + CELL / 2.0 - 2.0,
                &format!("font-size=\"12\" text-anchor=\"middle\" fill=\"{ink}\""),
                &format!("{m:.2}"),
            );
            svg.text(
                x + CELL / 2.0,
                y + CELL / 2.0 + 12.0,
                &format!("font-size=\"10\" text-anchor=\"middle\" fill=\"{ink}\""),
                &format!("({s:.2})"),
            );
        }
    }
    for (i, l) in summary.labels.iter().enumerate() {
        svg.text(
            x0 - 6.0,
            y0 + (i as f64 + 0.5) * CELL + 4.0,
            "class=\"row-label\" font-size=\"11\" text-anchor=\"end\"",
            l,
        );
        let x = x0 + (i as f64 + 0.5) * CELL;
        let y = y0 + n as f64 * CELL + 8.0;
        svg.text(
            x,
            y,
            &format!("class=\"col-label\" font-size=\"11\" text-anchor=\"end\" transform=\"rotate(-60 {x:.2} {y:.2})\""),
            l,
        );
    }
    let bar_x = x0 + n as f64 * CELL + 16.0;
    let bar_h = (n as f64 * CELL).min(200.0);
    svg.rect("colorbar", bar_x, y0, 14.0, bar_h, "fill=\"url(#div)\" stroke=\"#333333\"");
    for (v, label) in [(-1.0, "-1"), (0.0, "0"), (1.0, "1")] {
        svg.text(bar_x + 18.0, y0 + bar_h * (1.0 - v) / 2.0 + 4.0, "font-size=\"10\"", label);
    }
    Ok(svg.finish())
}
