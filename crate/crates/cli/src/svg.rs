//! Minimal static SVG plots: line charts and heatmaps.

use std::fmt::Write;

const PANEL_W: f64 = 420.0;
const PANEL_H: f64 = 300.0;
const MARGIN_L: f64 = 60.0;
const MARGIN_R: f64 = 20.0;
const MARGIN_T: f64 = 30.0;
const MARGIN_B: f64 = 45.0;

pub const PALETTE: [&str; 6] = [
    "#d62728", "#1f77b4", "#2ca02c", "#ff7f0e", "#9467bd", "#555555",
];

#[derive(Debug, Clone)]
pub struct Series {
    pub name: String,
    pub points: Vec<(f64, f64)>,
    pub color: &'static str,
    pub markers: bool,
}

#[derive(Debug, Clone, Default)]
pub struct Panel {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub y_range: Option<(f64, f64)>,
    pub series: Vec<Series>,
}

#[derive(Debug, Clone, Default)]
pub struct Heatmap {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    /// Row-major with `y` as the row index.
    pub z: Vec<f64>,
    /// Star markers.
    pub markers: Vec<(f64, f64)>,
    /// `[x0, x1, y0, y1]` outline.
    pub rect: Option<[f64; 4]>,
}

struct Frame {
    ox: f64,
    oy: f64,
    x: (f64, f64),
    y: (f64, f64),
}

impl Frame {
    fn px(&self, x: f64) -> f64 {
        let w = PANEL_W - MARGIN_L - MARGIN_R;
        self.ox + MARGIN_L + (x - self.x.0) / (self.x.1 - self.x.0) * w
    }

    fn py(&self, y: f64) -> f64 {
        let h = PANEL_H - MARGIN_T - MARGIN_B;
        self.oy + MARGIN_T + h - (y - self.y.0) / (self.y.1 - self.y.0) * h
    }
}

fn padded(lo: f64, hi: f64) -> (f64, f64) {
    if !(lo.is_finite() && hi.is_finite()) {
        return (0.0, 1.0);
    }
    if hi - lo < 1e-12 {
        let d = lo.abs().max(1.0) * 0.05;
        return (lo - d, hi + d);
    }
    let d = 0.04 * (hi - lo);
    (lo - d, hi + d)
}

fn bounds(values: impl Iterator<Item = f64>) -> (f64, f64) {
    values
        .filter(|v| v.is_finite())
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| {
            (a.min(v), b.max(v))
        })
}

fn tick_label(v: f64) -> String {
    if v == 0.0 {
        "0".into()
    } else if v.abs() >= 1000.0 || v.abs() < 0.01 {
        format!("{v:.1e}")
    } else {
        format!("{v:.2}")
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
}

fn header(out: &mut String, w: f64, h: f64) {
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w:.0}" height="{h:.0}" viewBox="0 0 {w:.0} {h:.0}" font-family="sans-serif" font-size="11">"#
    );
    let _ = writeln!(
        out,
        r#"<rect width="{w:.0}" height="{h:.0}" fill="white"/>"#
    );
}

fn axes(out: &mut String, f: &Frame, title: &str, xl: &str, yl: &str) {
    let (x0, x1, y0, y1) = (f.px(f.x.0), f.px(f.x.1), f.py(f.y.0), f.py(f.y.1));
    let _ = writeln!(
        out,
        r#"<rect x="{x0:.2}" y="{y1:.2}" width="{:.2}" height="{:.2}" fill="none" stroke="black"/>"#,
        x1 - x0,
        y0 - y1
    );
    for k in 0..=4 {
        let t = k as f64 / 4.0;
        let xv = f.x.0 + t * (f.x.1 - f.x.0);
        let yv = f.y.0 + t * (f.y.1 - f.y.0);
        let (px, py) = (f.px(xv), f.py(yv));
        let _ = writeln!(
            out,
            r#"<line x1="{px:.2}" y1="{y0:.2}" x2="{px:.2}" y2="{:.2}" stroke="black"/><text x="{px:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
            y0 + 4.0,
            y0 + 16.0,
            tick_label(xv)
        );
        let _ = writeln!(
            out,
            r#"<line x1="{:.2}" y1="{py:.2}" x2="{x0:.2}" y2="{py:.2}" stroke="black"/><text x="{:.2}" y="{:.2}" text-anchor="end">{}</text>"#,
            x0 - 4.0,
            x0 - 6.0,
            py + 4.0,
            tick_label(yv)
        );
    }
    let _ = writeln!(
        out,
        r#"<text x="{:.2}" y="{:.2}" text-anchor="middle" font-size="12">{}</text>"#,
        (x0 + x1) / 2.0,
        f.oy + 18.0,
        escape(title)
    );
    let _ = writeln!(
        out,
        r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
        (x0 + x1) / 2.0,
        y0 + 34.0,
        escape(xl)
    );
    let (lx, ly) = (f.ox + 14.0, (y0 + y1) / 2.0);
    let _ = writeln!(
        out,
        r#"<text x="{lx:.2}" y="{ly:.2}" text-anchor="middle" transform="rotate(-90 {lx:.2} {ly:.2})">{}</text>"#,
        escape(yl)
    );
}

fn star(out: &mut String, cx: f64, cy: f64, r: f64) {
    let mut pts = String::new();
    for k in 0..10 {
        let a = std::f64::consts::PI * (k as f64) / 5.0 - std::f64::consts::FRAC_PI_2;
        let rr = if k % 2 == 0 { r } else { r * 0.45 };
        let _ = write!(pts, "{:.2},{:.2} ", cx + rr * a.cos(), cy + rr * a.sin());
    }
    let _ = writeln!(
        out,
        r#"<polygon points="{}" fill="gold" stroke="black"/>"#,
        pts.trim_end()
    );
}

/// Line charts laid out on a grid with `cols` columns.
pub fn line_charts(panels: &[Panel], cols: usize) -> String {
    let cols = cols.max(1).min(panels.len().max(1));
    let rows = panels.len().div_ceil(cols).max(1);
    let mut out = String::new();
    header(&mut out, PANEL_W * cols as f64, PANEL_H * rows as f64);
    for (i, p) in panels.iter().enumerate() {
        let all = || p.series.iter().flat_map(|s| s.points.iter());
        let x = exact_or_padded(bounds(all().map(|q| q.0)));
        let y = p.y_range.unwrap_or_else(|| {
            let (lo, hi) = bounds(all().map(|q| q.1));
            padded(lo, hi)
        });
        let f = Frame {
            ox: PANEL_W * (i % cols) as f64,
            oy: PANEL_H * (i / cols) as f64,
            x,
            y,
        };
        axes(&mut out, &f, &p.title, &p.x_label, &p.y_label);
        for (k, s) in p.series.iter().enumerate() {
            let mut pts = String::new();
            for &(a, b) in s
                .points
                .iter()
                .filter(|q| q.0.is_finite() && q.1.is_finite())
            {
                let _ = write!(pts, "{:.2},{:.2} ", f.px(a), f.py(b));
            }
            let _ = writeln!(
                out,
                r#"<polyline points="{}" fill="none" stroke="{}" stroke-width="1.5"/>"#,
                pts.trim_end(),
                s.color
            );
            if s.markers {
                for &(a, b) in s
                    .points
                    .iter()
                    .filter(|q| q.0.is_finite() && q.1.is_finite())
                {
                    let _ = writeln!(
                        out,
                        r#"<circle cx="{:.2}" cy="{:.2}" r="2.5" fill="{}"/>"#,
                        f.px(a),
                        f.py(b),
                        s.color
                    );
                }
            }
            let (lx, ly) = (
                f.ox + PANEL_W - MARGIN_R - 110.0,
                f.oy + MARGIN_T + 14.0 + 14.0 * k as f64,
            );
            let _ = writeln!(
                out,
                r#"<line x1="{lx:.2}" y1="{:.2}" x2="{:.2}" y2="{:.2}" stroke="{}" stroke-width="2"/><text x="{:.2}" y="{ly:.2}">{}</text>"#,
                ly - 4.0,
                lx + 16.0,
                ly - 4.0,
                s.color,
                lx + 20.0,
                escape(&s.name)
            );
        }
    }
    out.push_str("</svg>\n");
    out
}

fn exact_or_padded((lo, hi): (f64, f64)) -> (f64, f64) {
    if lo.is_finite() && hi.is_finite() && hi > lo {
        (lo, hi)
    } else {
        padded(lo, hi)
    }
}

/// Blue, white, red ramp over `t ∈ [0, 1]`.
fn color(t: f64) -> String {
    let t = t.clamp(0.0, 1.0);
    let (r, g, b) = if t < 0.5 {
        let s = t / 0.5;
        (40.0 + 215.0 * s, 80.0 + 175.0 * s, 200.0 + 55.0 * s)
    } else {
        let s = (t - 0.5) / 0.5;
        (255.0 - 45.0 * s, 255.0 - 200.0 * s, 255.0 - 215.0 * s)
    };
    format!("#{:02x}{:02x}{:02x}", r as u8, g as u8, b as u8)
}

/// Heatmaps side by side. The plotted extent covers the grid, the markers
/// and the rectangle.
pub fn heatmaps(maps: &[Heatmap]) -> String {
    let mut out = String::new();
    header(&mut out, PANEL_W * maps.len().max(1) as f64, PANEL_H);
    for (i, m) in maps.iter().enumerate() {
        let xs =
            m.x.iter()
                .copied()
                .chain(m.markers.iter().map(|p| p.0))
                .chain(m.rect.iter().flat_map(|r| [r[0], r[1]]));
        let ys =
            m.y.iter()
                .copied()
                .chain(m.markers.iter().map(|p| p.1))
                .chain(m.rect.iter().flat_map(|r| [r[2], r[3]]));
        let ((xl, xh), (yl, yh)) = (bounds(xs), bounds(ys));
        let f = Frame {
            ox: PANEL_W * i as f64,
            oy: 0.0,
            x: padded(xl, xh),
            y: padded(yl, yh),
        };
        let (zlo, zhi) = bounds(m.z.iter().copied());
        let span = if zhi > zlo { zhi - zlo } else { 1.0 };
        let half = |v: &[f64], k: usize| -> (f64, f64) {
            let lo = if k == 0 {
                v[0]
            } else {
                0.5 * (v[k - 1] + v[k])
            };
            let hi = if k + 1 == v.len() {
                v[k]
            } else {
                0.5 * (v[k] + v[k + 1])
            };
            (lo, hi)
        };
        if !m.x.is_empty() && !m.y.is_empty() && m.z.len() == m.x.len() * m.y.len() {
            for iy in 0..m.y.len() {
                let (y0, y1) = half(&m.y, iy);
                for ix in 0..m.x.len() {
                    let (x0, x1) = half(&m.x, ix);
                    let z = m.z[iy * m.x.len() + ix];
                    let _ = writeln!(
                        out,
                        r#"<rect x="{:.2}" y="{:.2}" width="{:.2}" height="{:.2}" fill="{}"/>"#,
                        f.px(x0),
                        f.py(y1),
                        (f.px(x1) - f.px(x0)).max(0.0) + 0.3,
                        (f.py(y0) - f.py(y1)).max(0.0) + 0.3,
                        color((z - zlo) / span)
                    );
                }
            }
        }
        axes(&mut out, &f, &m.title, &m.x_label, &m.y_label);
        if let Some([x0, x1, y0, y1]) = m.rect {
            let _ = writeln!(
                out,
                r#"<rect x="{:.2}" y="{:.2}" width="{:.2}" height="{:.2}" fill="none" stroke="black" stroke-width="2" stroke-dasharray="6 3"/>"#,
                f.px(x0),
                f.py(y1),
                f.px(x1) - f.px(x0),
                f.py(y0) - f.py(y1)
            );
        }
        for &(x, y) in &m.markers {
            star(&mut out, f.px(x), f.py(y), 7.0);
        }
        let _ = writeln!(
            out,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="end" font-size="10">range [{}, {}]</text>"#,
            f.ox + PANEL_W - MARGIN_R,
            f.oy + 18.0,
            tick_label(zlo),
            tick_label(zhi)
        );
    }
    out.push_str("</svg>\n");
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn line_chart_is_well_formed() {
        let p = Panel {
            title: "a < b".into(),
            x_label: "t".into(),
            y_label: "f".into(),
            y_range: Some((0.0, 1.0)),
            series: vec![Series {
                name: "s".into(),
                points: vec![(0.0, 0.1), (1.0, 0.9), (2.0, f64::NAN)],
                color: PALETTE[0],
                markers: true,
            }],
        };
        let s = line_charts(&[p.clone(), p], 2);
        assert!(s.starts_with("<svg"));
        assert!(s.trim_end().ends_with("</svg>"));
        assert!(s.contains("a &lt; b"));
        assert_eq!(s.matches("<polyline").count(), 2);
        assert!(!s.contains("NaN"));
    }

    #[test]
    fn heatmap_draws_cells_markers_and_rect() {
        let m = Heatmap {
            x: vec![0.0, 1.0, 2.0],
            y: vec![0.0, 1.0],
            z: vec![0.0, 1.0, 2.0, 3.0, 4.0, 5.0],
            markers: vec![(1.0, 4.0)],
            rect: Some([0.5, 1.5, 0.0, 1.0]),
            ..Heatmap::default()
        };
        let s = heatmaps(&[m]);
        assert_eq!(s.matches("<polygon").count(), 1);
        assert!(s.contains("stroke-dasharray"));
        assert_eq!(s.matches("<rect").count(), 2 + 6 + 1);
    }

    #[test]
    fn output_is_deterministic() {
        let m = Heatmap {
            x: vec![0.0, 1.0],
            y: vec![0.0, 1.0],
            z: vec![0.3, 0.1, 0.2, 0.4],
            ..Heatmap::default()
        };
        assert_eq!(heatmaps(std::slice::from_ref(&m)), heatmaps(&[m]));
    }
}
