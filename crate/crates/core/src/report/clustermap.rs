use super::bundle::FeatureEntry;
use super::svg::{gradient_def, sequential, Svg, HATCH_DEF, SEQUENTIAL_STOPS};
use crate::cluster::Linkage;
use crate::error::{Error, Result};
use crate::fairmatrix::column_names;

const CELL_W: f64 = 36.0;
const CELL_H: f64 = 20.0;
const TITLE_H: f64 = 30.0;
const TOP_DENDRO: f64 = 90.0;
const LEFT_DENDRO: f64 = 110.0;
const MARGIN: f64 = 10.0;
const ROW_LABELS: f64 = 190.0;
const COL_LABELS: f64 = 110.0;
const BAR_W: f64 = 14.0;

/// Position of every node along the leaf axis (leaves at their display slot
/// centre, internal nodes at the mean of their children) and its height.
fn node_positions(l: &Linkage, slot: impl Fn(usize) -> f64) -> Vec<(f64, f64)> {
    let order = l.leaf_order();
    let mut pos = vec![(0.0, 0.0); l.n_leaves + l.merges.len()];
    for (k, &leaf) in order.iter().enumerate() {
        pos[leaf] = (slot(k), 0.0);
    }
    for (s, m) in l.merges.iter().enumerate() {
        pos[l.n_leaves + s] = ((pos[m.left].0 + pos[m.right].0) / 2.0, m.height);
    }
    pos
}

fn max_height(l: &Linkage) -> f64 {
    let h = l.merges.iter().map(|m| m.height).fold(0.0, f64::max);
    if h > 0.0 {
        h
    } else {
        1.0
    }
}

/// Heatmap of the metrics matrix with the column dendrogram on top, the row
/// dendrogram on the left and per-metric variances in the column labels.
///
/// Cells use a sequential scale on `[0, 1]` (viridis anchors); imputed cells
/// carry a white hatch.
pub fn render_clustermap_svg(entry: &FeatureEntry) -> Result<String> {
    let m = &entry.matrix;
    let (n_rows, n_cols) = (m.values.rows(), m.values.cols());
    let (cl, rl) = (&entry.column_linkage, &entry.row_linkage);
    if cl.n_leaves != n_cols || rl.n_leaves != n_rows || m.column_variances.len() != n_cols {
        return Err(Error::Render("linkages do not match the matrix".into()));
    }
    let col_order = cl.leaf_order();
    let row_order = rl.leaf_order();
    let x0 = MARGIN + LEFT_DENDRO;
    let y0 = TITLE_H + TOP_DENDRO;
    let grid_w = n_cols as f64 * CELL_W;
    let grid_h = n_rows as f64 * CELL_H;
    let bar_x = x0 + grid_w + ROW_LABELS;
    let width = bar_x + BAR_W + 40.0 + MARGIN;
    let height = y0 + grid_h + COL_LABELS + MARGIN;

    let mut svg = Svg::new(width, height);
    svg.raw(&format!(
        "<defs>{HATCH_DEF}{}</defs>",
        gradient_def("seq", &SEQUENTIAL_STOPS, true)
    ));
    let seed = entry.seed.map_or_else(|| "external predictions".to_string(), |s| format!("seed {s}"));
    svg.text(
        MARGIN,
        20.0,
        "font-size=\"14\" font-weight=\"bold\"",
        &format!("{} / {} / {seed}", entry.dataset, entry.feature),
    );

    let names = column_names();
    let labels = m.row_labels();
    for (ri, &r) in row_order.iter().enumerate() {
        for (ci, &c) in col_order.iter().enumerate() {
            let v = m.values.get(r, c);
            let (x, y) = (x0 + ci as f64 * CELL_W, y0 + ri as f64 * CELL_H);
            svg.rect_titled(
                "cell",
                x,
                y,
                CELL_W,
                CELL_H,
                &format!("fill=\"{}\" data-row=\"{r}\" data-col=\"{c}\"", sequential(v)),
                &format!("{} {} = {v:.4}", labels[r], names[c]),
            );
            if m.imputed[r][c] {
                svg.rect("imputed", x, y, CELL_W, CELL_H, "fill=\"url(#hatch)\"");
            }
        }
    }

    // column dendrogram
    let hc = max_height(cl);
    let cpos = node_positions(cl, |k| x0 + (k as f64 + 0.5) * CELL_W);
    let cy = |h: f64| y0 - 4.0 - h / hc * (TOP_DENDRO - 10.0);
    for (s, mg) in cl.merges.iter().enumerate() {
        let (a, b, me) = (cpos[mg.left], cpos[mg.right], cpos[cl.n_leaves + s]);
        svg.path(
            "col-merge",
            &format!(
                "M{:.2} {:.2}V{:.2}H{:.2}V{:.2}",
                a.0,
                cy(a.1),
                cy(me.1),
                b.0,
                cy(b.1)
            ),
            "fill=\"none\" stroke=\"#333333\"",
        );
    }

    // row dendrogram
    let hr = max_height(rl);
    let rpos = node_positions(rl, |k| y0 + (k as f64 + 0.5) * CELL_H);
    let rx = |h: f64| x0 - 4.0 - h / hr * (LEFT_DENDRO - 10.0);
    for (s, mg) in rl.merges.iter().enumerate() {
        let (a, b, me) = (rpos[mg.left], rpos[mg.right], rpos[rl.n_leaves + s]);
        svg.path(
            "row-merge",
            &format!(
                "M{:.2} {:.2}H{:.2}V{:.2}H{:.2}",
                rx(a.1),
                a.0,
                rx(me.1),
                b.0,
                rx(b.1)
            ),
            "fill=\"none\" stroke=\"#333333\"",
        );
    }

    for (ri, &r) in row_order.iter().enumerate() {
        svg.text(
            x0 + grid_w + 6.0,
            y0 + (ri as f64 + 0.5) * CELL_H + 4.0,
            "class=\"row-label\" font-size=\"11\"",
            &labels[r],
        );
    }
    for (ci, &c) in col_order.iter().enumerate() {
        let x = x0 + (ci as f64 + 0.5) * CELL_W;
        let y = y0 + grid_h + 8.0;
        svg.text(
            x,
            y,
            &format!("class=\"col-label\" font-size=\"11\" text-anchor=\"end\" transform=\"rotate(-60 {x:.2} {y:.2})\""),
            &format!("{} ({:.3})", names[c], m.column_variances[c]),
        );
    }

    let bar_h = grid_h.min(200.0);
    svg.rect("colorbar", bar_x, y0, BAR_W, bar_h, "fill=\"url(#seq)\" stroke=\"#333333\"");
    for (v, label) in [(0.0, "0"), (0.5, "0.5"), (1.0, "1")] {
        svg.text(
            bar_x + BAR_W + 4.0,
            y0 + bar_h * (1.0 - v) + 4.0,
            "font-size=\"10\"",
            label,
        );
    }
    Ok(svg.finish())
}
