use super::svg::{Svg, CATEGORICAL};
use crate::error::{Error, Result};
use crate::pca::AlignedProjection;

const W: f64 = 640.0;
const H: f64 = 480.0;
const LEFT: f64 = 70.0;
const RIGHT: f64 = 210.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 60.0;
const MARKER: f64 = 6.0;

/// Marker outline for model `k` centred at `(x, y)`.
fn marker(svg: &mut Svg, class: &str, k: usize, x: f64, y: f64, attrs: &str) {
    let r = MARKER;
    let d = match k % 6 {
        0 => {
            svg.raw(&format!(
                "<circle class=\"{class}\" cx=\"{x:.2}\" cy=\"{y:.2}\" r=\"{r:.2}\" {attrs}/>"
            ));
            return;
        }
        1 => format!("M{:.2} {:.2}h{:.2}v{:.2}h{:.2}z", x - r, y - r, 2.0 * r, 2.0 * r, -2.0 * r),
        2 => format!("M{x:.2} {:.2}L{:.2} {:.2}L{:.2} {:.2}z", y - r, x + r, y + r, x - r, y + r),
        3 => format!("M{x:.2} {:.2}L{:.2} {y:.2}L{x:.2} {:.2}L{:.2} {y:.2}z", y - r, x + r, y + r, x - r),
        4 => format!("M{x:.2} {:.2}L{:.2} {:.2}L{:.2} {:.2}z", y + r, x + r, y - r, x - r, y - r),
        _ => format!(
            "M{:.2} {:.2}L{:.2} {:.2}M{:.2} {:.2}L{:.2} {:.2}",
            x - r,
            y - r,
            x + r,
            y + r,
            x - r,
            y + r,
            x + r,
            y - r
        ),
    };
    svg.path(class, &d, attrs);
}

fn nice_range(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let (mut lo, mut hi) = (0.0f64, 0.0f64);
    for v in values {
        lo = lo.min(v);
        hi = hi.max(v);
    }
    if hi - lo < 1e-12 {
        return (lo - 1.0, hi + 1.0);
    }
    let pad = 0.08 * (hi - lo);
    (lo - pad, hi + pad)
}

/// First two aligned components of the selected models. One marker shape per
/// model, one colour per group; the reference group sits on the crosshair.
pub fn render_pca_scatter_svg(aligned: &AlignedProjection, models: &[&str], title: &str) -> Result<String> {
    if aligned.explained_variance_ratios.len() < 2 {
        return Err(Error::Render(format!(
            "scatter needs 2 components, have {}",
            aligned.explained_variance_ratios.len()
        )));
    }
    let chosen: Vec<(usize, &crate::pca::ModelProjection)> = aligned
        .models
        .iter()
        .enumerate()
        .filter(|(_, m)| models.is_empty() || models.contains(&m.model.as_str()))
        .collect();
    if chosen.is_empty() {
        return Err(Error::Render("no models selected for the scatter".into()));
    }
    let (xlo, xhi) = nice_range(chosen.iter().flat_map(|(_, m)| m.coordinates.column(0)));
    let (ylo, yhi) = nice_range(chosen.iter().flat_map(|(_, m)| m.coordinates.column(1)));
    let pw = W - LEFT - RIGHT;
    let ph = H - TOP - BOTTOM;
    let sx = |v: f64| LEFT + (v - xlo) / (xhi - xlo) * pw;
    let sy = |v: f64| TOP + (1.0 - (v - ylo) / (yhi - ylo)) * ph;

    let mut svg = Svg::new(W, H);
    svg.text(LEFT, 24.0, "font-size=\"14\" font-weight=\"bold\"", title);
    svg.rect("frame", LEFT, TOP, pw, ph, "fill=\"none\" stroke=\"#333333\"");
    for i in 0..=4 {
        let t = i as f64 / 4.0;
        let (vx, vy) = (xlo + t * (xhi - xlo), ylo + t * (yhi - ylo));
        svg.line("tick", sx(vx), TOP + ph, sx(vx), TOP + ph + 4.0, "stroke=\"#333333\"");
        svg.text(sx(vx), TOP + ph + 16.0, "font-size=\"10\" text-anchor=\"middle\"", &format!("{vx:.2}"));
        svg.line("tick", LEFT - 4.0, sy(vy), LEFT, sy(vy), "stroke=\"#333333\"");
        svg.text(LEFT - 6.0, sy(vy) + 3.0, "font-size=\"10\" text-anchor=\"end\"", &format!("{vy:.2}"));
    }
    let dash = "stroke=\"#888888\" stroke-dasharray=\"4 3\"";
    svg.line("crosshair", sx(0.0), TOP, sx(0.0), TOP + ph, dash);
    svg.line("crosshair", LEFT, sy(0.0), LEFT + pw, sy(0.0), dash);

    let ev = &aligned.explained_variance_ratios;
    svg.text(
        LEFT + pw / 2.0,
        H - 18.0,
        "class=\"axis-label\" font-size=\"12\" text-anchor=\"middle\"",
        &format!("PC1 (explained variance {:.2})", ev[0]),
    );
    let (lx, ly) = (18.0, TOP + ph / 2.0);
    svg.text(
        lx,
        ly,
        &format!("class=\"axis-label\" font-size=\"12\" text-anchor=\"middle\" transform=\"rotate(-90 {lx:.2} {ly:.2})\""),
        &format!("PC2 (explained variance {:.2})", ev[1]),
    );

    for (k, mp) in &chosen {
        for (g, group) in aligned.groups.iter().enumerate() {
            let colour = CATEGORICAL[g % CATEGORICAL.len()];
            let (x, y) = (mp.coordinates.get(g, 0), mp.coordinates.get(g, 1));
            let attrs = format!(
                "fill=\"none\" stroke=\"{colour}\" stroke-width=\"2\" data-model=\"{}\" data-group=\"{}\"",
                super::svg::escape(&mp.model),
                super::svg::escape(group)
            );
            marker(&mut svg, "marker", *k, sx(x), sy(y), &attrs);
        }
    }

    let lx = LEFT + pw + 20.0;
    let mut y = TOP + 6.0;
    svg.text(lx, y, "font-size=\"11\" font-weight=\"bold\"", "groups");
    for (g, group) in aligned.groups.iter().enumerate() {
        y += 18.0;
        let colour = CATEGORICAL[g % CATEGORICAL.len()];
        svg.rect("legend-swatch", lx, y - 9.0, 10.0, 10.0, &format!("fill=\"{colour}\""));
        let label = if *group == aligned.reference {
            format!("{group} (reference)")
        } else {
            group.clone()
        };
        svg.text(lx + 16.0, y, "class=\"legend\" font-size=\"11\"", &label);
    }
    y += 28.0;
    svg.text(lx, y, "font-size=\"11\" font-weight=\"bold\"", "models");
    for (k, mp) in &chosen {
        y += 18.0;
        marker(&mut svg, "legend-marker", *k, lx + 5.0, y - 4.0, "fill=\"none\" stroke=\"#333333\" stroke-width=\"1.5\"");
        svg.text(lx + 16.0, y, "class=\"legend\" font-size=\"11\"", &mp.model);
    }
    Ok(svg.finish())
}
