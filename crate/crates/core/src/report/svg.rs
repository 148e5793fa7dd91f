use std::fmt::Write;

/// Minimal SVG writer. Coordinates are printed with two decimals so output is
/// byte-stable.
pub struct Svg {
    buf: String,
}

pub fn escape(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            '\'' => out.push_str("&apos;"),
            _ => out.push(c),
        }
    }
    out
}

impl Svg {
    pub fn new(width: f64, height: f64) -> Self {
        let mut buf = String::new();
        let _ = write!(
            buf,
            "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{width:.0}\" height=\"{height:.0}\" \
             viewBox=\"0 0 {width:.0} {height:.0}\" font-family=\"Helvetica, Arial, sans-serif\">\n"
        );
        Svg { buf }
    }

    pub fn raw(&mut self, s: &str) {
        self.buf.push_str(s);
        self.buf.push('\n');
    }

    pub fn rect(&mut self, class: &str, x: f64, y: f64, w: f64, h: f64, attrs: &str) {
        let _ = writeln!(
            self.buf,
            "<rect class=\"{class}\" x=\"{x:.2}\" y=\"{y:.2}\" width=\"{w:.2}\" height=\"{h:.2}\" {attrs}/>"
        );
    }

    /// A rect with a tooltip.
    pub fn rect_titled(&mut self, class: &str, x: f64, y: f64, w: f64, h: f64, attrs: &str, title: &str) {
        let _ = writeln!(
            self.buf,
            "<rect class=\"{class}\" x=\"{x:.2}\" y=\"{y:.2}\" width=\"{w:.2}\" height=\"{h:.2}\" {attrs}><title>{}</title></rect>",
            escape(title)
        );
    }

    pub fn line(&mut self, class: &str, x1: f64, y1: f64, x2: f64, y2: f64, attrs: &str) {
        let _ = writeln!(
            self.buf,
            "<line class=\"{class}\" x1=\"{x1:.2}\" y1=\"{y1:.2}\" x2=\"{x2:.2}\" y2=\"{y2:.2}\" {attrs}/>"
        );
    }

    pub fn path(&mut self, class: &str, d: &str, attrs: &str) {
        let _ = writeln!(self.buf, "<path class=\"{class}\" d=\"{d}\" {attrs}/>");
    }

    pub fn text(&mut self, x: f64, y: f64, attrs: &str, content: &str) {
        let _ = writeln!(
            self.buf,
            "<text x=\"{x:.2}\" y=\"{y:.2}\" {attrs}>{}</text>",
            escape(content)
        );
    }

    pub fn finish(mut self) -> String {
        self.buf.push_str("</svg>\n");
        self.buf
    }
}

fn lerp_hex(stops: &[(f64, [u8; 3])], v: f64) -> String {
    let v = if v.is_nan() { 0.0 } else { v };
    let v = v.clamp(stops[0].0, stops[stops.len() - 1].0);
    let i = stops.windows(2).position(|w| v <= w[1].0).unwrap_or(stops.len() - 2);
    let (a, b) = (stops[i], stops[i + 1]);
    let t = if b.0 > a.0 { (v - a.0) / (b.0 - a.0) } else { 0.0 };
    let c: Vec<u8> = (0..3)
        .map(|k| (a.1[k] as f64 + t * (b.1[k] as f64 - a.1[k] as f64)).round() as u8)
        .collect();
    format!("#{:02x}{:02x}{:02x}", c[0], c[1], c[2])
}

/// Anchors of the sequential scale on `[0, 1]` (viridis samples).
pub const SEQUENTIAL_STOPS: [(f64, [u8; 3]); 5] = [
    (0.0, [0x44, 0x01, 0x54]),
    (0.25, [0x3b, 0x52, 0x8b]),
    (0.5, [0x21, 0x91, 0x8c]),
    (0.75, [0x5e, 0xc9, 0x62]),
    (1.0, [0xfd, 0xe7, 0x25]),
];

/// Anchors of the diverging scale on `[-1, 1]`.
pub const DIVERGING_STOPS: [(f64, [u8; 3]); 3] = [
    (-1.0, [0x21, 0x66, 0xac]),
    (0.0, [0xf7, 0xf7, 0xf7]),
    (1.0, [0xb2, 0x18, 0x2b]),
];

pub fn sequential(v: f64) -> String {
    lerp_hex(&SEQUENTIAL_STOPS, v)
}

pub fn diverging(v: f64) -> String {
    lerp_hex(&DIVERGING_STOPS, v)
}

pub const CATEGORICAL: [&str; 10] = [
    "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22",
    "#17becf",
];

pub fn gradient_def(id: &str, stops: &[(f64, [u8; 3])], vertical: bool) -> String {
    let (lo, hi) = (stops[0].0, stops[stops.len() - 1].0);
    // vertical gradients run bottom (low) to top (high)
    let mut s = if vertical {
        format!("<linearGradient id=\"{id}\" x1=\"0\" y1=\"1\" x2=\"0\" y2=\"0\">")
    } else {
        format!("<linearGradient id=\"{id}\" x1=\"0\" y1=\"0\" x2=\"1\" y2=\"0\">")
    };
    for (v, c) in stops {
        let _ = write!(
            s,
            "<stop offset=\"{:.3}\" stop-color=\"#{:02x}{:02x}{:02x}\"/>",
            (v - lo) / (hi - lo),
            c[0],
            c[1],
            c[2]
        );
    }
    s.push_str("</linearGradient>");
    s
}

pub const HATCH_DEF: &str = "<pattern id=\"hatch\" width=\"6\" height=\"6\" patternUnits=\"userSpaceOnUse\" \
patternTransform=\"rotate(45)\"><line x1=\"0\" y1=\"0\" x2=\"0\" y2=\"6\" stroke=\"#ffffff\" stroke-width=\"2\" stroke-opacity=\"0.8\"/></pattern>";
