//! A small SVG plotter: lines, scatter points and heatmap cells on one
//! pair of linear axes.

use std::fmt::Write;

const W: f64 = 640.0;
const H: f64 = 480.0;
const LEFT: f64 = 70.0;
const RIGHT: f64 = 20.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 55.0;

pub const PALETTE: [&str; 8] = ["#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f"];

enum Layer {
    Line { points: Vec<(f64, f64)>, color: String, dashed: bool, label: Option<String> },
    Points { points: Vec<(f64, f64)>, color: String, radius: f64, opacity: f64 },
    /// Cells `[x0, x1] × [y0, y1]` with fill colors.
    Cells { cells: Vec<(f64, f64, f64, f64, String)> },
}

pub struct Plot {
    title: String,
    x_label: String,
    y_label: String,
    x_range: Option<(f64, f64)>,
    y_range: Option<(f64, f64)>,
    layers: Vec<Layer>,
}

impl Plot {
    pub fn new(title: &str, x_label: &str, y_label: &str) -> Self {
        Plot {
            title: title.into(),
            x_label: x_label.into(),
            y_label: y_label.into(),
            x_range: None,
            y_range: None,
            layers: Vec::new(),
        }
    }

    pub fn x_range(mut self, lo: f64, hi: f64) -> Self {
        self.x_range = Some((lo, hi));
        self
    }

    pub fn y_range(mut self, lo: f64, hi: f64) -> Self {
        self.y_range = Some((lo, hi));
        self
    }

    pub fn line(&mut self, points: Vec<(f64, f64)>, color: &str, label: Option<&str>) -> &mut Self {
        self.layers.push(Layer::Line { points, color: color.into(), dashed: false, label: label.map(Into::into) });
        self
    }

    pub fn dashed(&mut self, points: Vec<(f64, f64)>, color: &str, label: Option<&str>) -> &mut Self {
        self.layers.push(Layer::Line { points, color: color.into(), dashed: true, label: label.map(Into::into) });
        self
    }

    pub fn points(&mut self, points: Vec<(f64, f64)>, color: &str, radius: f64, opacity: f64) -> &mut Self {
        self.layers.push(Layer::Points { points, color: color.into(), radius, opacity });
        self
    }

    pub fn cells(&mut self, cells: Vec<(f64, f64, f64, f64, String)>) -> &mut Self {
        self.layers.push(Layer::Cells { cells });
        self
    }

    fn bounds(&self) -> ((f64, f64), (f64, f64)) {
        let (mut x0, mut x1, mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
        let mut see = |x: f64, y: f64| {
            if x.is_finite() && y.is_finite() {
                x0 = x0.min(x);
                x1 = x1.max(x);
                y0 = y0.min(y);
                y1 = y1.max(y);
            }
        };
        for l in &self.layers {
            match l {
                Layer::Line { points, .. } | Layer::Points { points, .. } => points.iter().for_each(|&(x, y)| see(x, y)),
                Layer::Cells { cells } => cells.iter().for_each(|c| {
                    see(c.0, c.2);
                    see(c.1, c.3)
                }),
            }
        }
        let pad = |lo: f64, hi: f64| {
            if !lo.is_finite() {
                (0.0, 1.0)
            } else if hi - lo < 1e-12 * lo.abs().max(1.0) {
                (lo - 0.5, hi + 0.5)
            } else {
                (lo, hi)
            }
        };
        (self.x_range.unwrap_or_else(|| pad(x0, x1)), self.y_range.unwrap_or_else(|| pad(y0, y1)))
    }

    pub fn to_svg(&self) -> String {
        let ((x0, x1), (y0, y1)) = self.bounds();
        let pw = W - LEFT - RIGHT;
        let ph = H - TOP - BOTTOM;
        let sx = |x: f64| LEFT + (x - x0) / (x1 - x0) * pw;
        let sy = |y: f64| TOP + (1.0 - (y - y0) / (y1 - y0)) * ph;
        let mut s = String::new();
        let _ = writeln!(s, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="12">"#);
        let _ = writeln!(s, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
        let _ = writeln!(s, r#"<defs><clipPath id="plot"><rect x="{LEFT}" y="{TOP}" width="{pw}" height="{ph}"/></clipPath></defs>"#);
        let _ = writeln!(s, r#"<g clip-path="url(#plot)">"#);
        let mut legend = Vec::new();
        for l in &self.layers {
            match l {
                Layer::Cells { cells } => {
                    for (a, b, c, d, fill) in cells {
                        let (px, py) = (sx(*a), sy(*d));
                        let _ = writeln!(
                            s,
                            r#"<rect x="{px:.2}" y="{py:.2}" width="{:.2}" height="{:.2}" fill="{fill}"/>"#,
                            sx(*b) - px + 0.3,
                            sy(*c) - py + 0.3
                        );
                    }
                }
                Layer::Line { points, color, dashed, label } => {
                    let mut d = String::new();
                    let mut pen = false;
                    for &(x, y) in points {
                        if x.is_finite() && y.is_finite() {
                            let _ = write!(d, "{}{:.2},{:.2} ", if pen { "L" } else { "M" }, sx(x), sy(y));
                            pen = true;
                        } else {
                            pen = false;
                        }
                    }
                    let dash = if *dashed { r#" stroke-dasharray="6,4""# } else { "" };
                    let _ = writeln!(s, r#"<path d="{d}" fill="none" stroke="{color}" stroke-width="1.6"{dash}/>"#);
                    if let Some(label) = label {
                        legend.push((label.clone(), color.clone()));
                    }
                }
                Layer::Points { points, color, radius, opacity } => {
                    for &(x, y) in points.iter().filter(|p| p.0.is_finite() && p.1.is_finite()) {
                        let _ = writeln!(
                            s,
                            r#"<circle cx="{:.2}" cy="{:.2}" r="{radius}" fill="{color}" fill-opacity="{opacity}"/>"#,
                            sx(x),
                            sy(y)
                        );
                    }
                }
            }
        }
        let _ = writeln!(s, "</g>");
        let _ = writeln!(s, r#"<rect x="{LEFT}" y="{TOP}" width="{pw}" height="{ph}" fill="none" stroke="black"/>"#);
        for k in 0..=5 {
            let f = k as f64 / 5.0;
            let (xv, yv) = (x0 + f * (x1 - x0), y0 + f * (y1 - y0));
            let (px, py) = (sx(xv), sy(yv));
            let _ = writeln!(s, r#"<line x1="{px:.2}" y1="{:.2}" x2="{px:.2}" y2="{:.2}" stroke="black"/>"#, TOP + ph, TOP + ph + 5.0);
            let _ = writeln!(s, r#"<text x="{px:.2}" y="{:.2}" text-anchor="middle">{}</text>"#, TOP + ph + 18.0, tick(xv));
            let _ = writeln!(s, r#"<line x1="{:.2}" y1="{py:.2}" x2="{LEFT}" y2="{py:.2}" stroke="black"/>"#, LEFT - 5.0);
            let _ = writeln!(s, r#"<text x="{:.2}" y="{:.2}" text-anchor="end">{}</text>"#, LEFT - 8.0, py + 4.0, tick(yv));
        }
        let _ = writeln!(s, r#"<text x="{:.1}" y="22" text-anchor="middle" font-size="14">{}</text>"#, W / 2.0, escape(&self.title));
        let _ = writeln!(s, r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{}</text>"#, LEFT + pw / 2.0, H - 12.0, escape(&self.x_label));
        let _ = writeln!(
            s,
            r#"<text x="16" y="{:.1}" text-anchor="middle" transform="rotate(-90 16 {:.1})">{}</text>"#,
            TOP + ph / 2.0,
            TOP + ph / 2.0,
            escape(&self.y_label)
        );
        for (i, (label, color)) in legend.iter().enumerate() {
            let y = TOP + 14.0 + 16.0 * i as f64;
            let x = LEFT + pw - 150.0;
            let _ = writeln!(s, r#"<line x1="{x}" y1="{y}" x2="{}" y2="{y}" stroke="{color}" stroke-width="2"/>"#, x + 20.0);
            let _ = writeln!(s, r#"<text x="{}" y="{}">{}</text>"#, x + 25.0, y + 4.0, escape(label));
        }
        s.push_str("</svg>\n");
        s
    }
}

fn tick(v: f64) -> String {
    if v == 0.0 {
        "0".into()
    } else if v.abs() >= 1e4 || v.abs() < 1e-2 {
        format!("{v:.2e}")
    } else {
        format!("{:.3}", v).trim_end_matches('0').trim_end_matches('.').to_string()
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Linear blue-white-red ramp on `[0, 1]`.
pub fn ramp(t: f64) -> String {
    let t = t.clamp(0.0, 1.0);
    let (r, g, b) = if t < 0.5 {
        let u = t / 0.5;
        (u, u, 1.0)
    } else {
        let u = (t - 0.5) / 0.5;
        (1.0, 1.0 - u, 1.0 - u)
    };
    format!("#{:02x}{:02x}{:02x}", (r * 255.0) as u8, (g * 255.0) as u8, (b * 255.0) as u8)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn svg_contains_layers() {
        let mut p = Plot::new("t <1>", "x", "y");
        p.line(vec![(0.0, 0.0), (1.0, f64::NAN), (2.0, 1.0)], PALETTE[0], Some("a"))
            .points(vec![(0.5, 0.5)], PALETTE[1], 2.0, 0.5)
            .cells(vec![(0.0, 1.0, 0.0, 1.0, ramp(0.3))]);
        let s = p.to_svg();
        assert!(s.starts_with("<svg") && s.ends_with("</svg>\n"));
        assert!(s.contains("<circle") && s.contains("<path") && s.contains("t &lt;1&gt;"));
        let d = s.split("<path d=\"").nth(1).unwrap().split('"').next().unwrap();
        assert_eq!(d.matches('M').count(), 2, "NaN breaks the line");
    }

    #[test]
    fn ramp_endpoints() {
        assert_eq!(ramp(0.0), "#0000ff");
        assert_eq!(ramp(0.5), "#ffffff");
        assert_eq!(ramp(1.0), "#ff0000");
    }
}
