//! Static SVG maps: one panel per processing stage plus the clustered map.

use std::fmt::Write as _;

/// Points coloured by SNR score, cluster hulls and the robot path.
#[derive(Debug, Clone, Default)]
pub struct Panel {
    pub title: String,
    pub points: Vec<(f64, f64, f64)>,
    pub hulls: Vec<Vec<(f64, f64)>>,
    pub centroids: Vec<(f64, f64)>,
    pub path: Vec<(f64, f64)>,
}

const PANEL: f64 = 360.0;
const PAD: f64 = 44.0;
const BAR_W: f64 = 70.0;

const VIRIDIS: [(u8, u8, u8); 5] = [
    (0x44, 0x01, 0x54),
    (0x3b, 0x52, 0x8b),
    (0x21, 0x91, 0x8c),
    (0x5e, 0xc9, 0x62),
    (0xfd, 0xe7, 0x25),
];

fn colour(t: f64) -> String {
    let t = if t.is_nan() { 0.0 } else { t.clamp(0.0, 1.0) };
    let pos = t * (VIRIDIS.len() - 1) as f64;
    let i = (pos.floor() as usize).min(VIRIDIS.len() - 2);
    let f = pos - i as f64;
    let (a, b) = (VIRIDIS[i], VIRIDIS[i + 1]);
    let mix = |x: u8, y: u8| (x as f64 + (y as f64 - x as f64) * f).round() as u8;
    format!("#{:02x}{:02x}{:02x}", mix(a.0, b.0), mix(a.1, b.1), mix(a.2, b.2))
}

/// Andrew's monotone chain; collinear points are dropped.
pub fn convex_hull(points: &[(f64, f64)]) -> Vec<(f64, f64)> {
    let mut p: Vec<(f64, f64)> = points.to_vec();
    p.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
    p.dedup();
    if p.len() < 3 {
        return p;
    }
    let cross = |o: (f64, f64), a: (f64, f64), b: (f64, f64)| {
        (a.0 - o.0) * (b.1 - o.1) - (a.1 - o.1) * (b.0 - o.0)
    };
    let mut hull: Vec<(f64, f64)> = Vec::with_capacity(2 * p.len());
    for pass in 0..2 {
        let start = hull.len();
        let iter: Box<dyn Iterator<Item = &(f64, f64)>> = if pass == 0 {
            Box::new(p.iter())
        } else {
            Box::new(p.iter().rev())
        };
        for &q in iter {
            while hull.len() >= start + 2 && cross(hull[hull.len() - 2], hull[hull.len() - 1], q) <= 0.0 {
                hull.pop();
            }
            hull.push(q);
        }
        hull.pop();
    }
    hull
}

struct Frame {
    x0: f64,
    y0: f64,
    scale: f64,
}

impl Frame {
    fn map(&self, ox: f64, (x, y): (f64, f64)) -> (f64, f64) {
        (
            ox + PAD + (x - self.x0) * self.scale,
            PAD + PANEL - (y - self.y0) * self.scale,
        )
    }
}

fn bounds(panels: &[Panel]) -> Frame {
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for p in panels {
        for &(x, y, _) in &p.points {
            xs.push(x);
            ys.push(y);
        }
        for &(x, y) in p.path.iter().chain(p.hulls.iter().flatten()) {
            xs.push(x);
            ys.push(y);
        }
    }
    let lo = |v: &[f64]| v.iter().copied().filter(|v| v.is_finite()).fold(f64::INFINITY, f64::min);
    let hi = |v: &[f64]| v.iter().copied().filter(|v| v.is_finite()).fold(f64::NEG_INFINITY, f64::max);
    let (mut x0, mut x1, mut y0, mut y1) = (lo(&xs), hi(&xs), lo(&ys), hi(&ys));
    if !(x0.is_finite() && y0.is_finite()) {
        (x0, x1, y0, y1) = (0.0, 100.0, 0.0, 100.0);
    }
    let span = (x1 - x0).max(y1 - y0).max(1.0) * 1.1;
    let (cx, cy) = ((x0 + x1) / 2.0, (y0 + y1) / 2.0);
    Frame {
        x0: cx - span / 2.0,
        y0: cy - span / 2.0,
        scale: PANEL / span,
    }
}

/// Renders panels side by side with a shared scale and SNR colour bar.
pub fn render(panels: &[Panel]) -> String {
    let frame = bounds(panels);
    let snrs: Vec<f64> = panels
        .iter()
        .flat_map(|p| p.points.iter().map(|q| q.2))
        .filter(|s| s.is_finite())
        .collect();
    let smin = snrs.iter().copied().fold(f64::INFINITY, f64::min);
    let smax = snrs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let (smin, smax) = if smin.is_finite() { (smin, smax) } else { (0.0, 1.0) };
    let norm = |s: f64| {
        if s == f64::INFINITY {
            1.0
        } else if s == f64::NEG_INFINITY {
            0.0
        } else if smax > smin {
            (s - smin) / (smax - smin)
        } else {
            1.0
        }
    };

    let cell = PANEL + 2.0 * PAD;
    let width = cell * panels.len().max(1) as f64 + BAR_W;
    let height = cell + 20.0;
    let mut s = String::new();
    let _ = writeln!(
        s,
        r##"<svg xmlns="http://www.w3.org/2000/svg" width="{width:.0}" height="{height:.0}" viewBox="0 0 {width:.0} {height:.0}" font-family="sans-serif" font-size="12">"##
    );
    let _ = writeln!(s, r##"<rect width="100%" height="100%" fill="white"/>"##);
    for (k, p) in panels.iter().enumerate() {
        let ox = k as f64 * cell;
        let _ = writeln!(s, r##"<g class="panel">"##);
        let _ = writeln!(
            s,
            r##"<rect x="{:.2}" y="{PAD:.2}" width="{PANEL:.2}" height="{PANEL:.2}" fill="none" stroke="#999"/>"##,
            ox + PAD
        );
        let _ = writeln!(
            s,
            r##"<text x="{:.2}" y="{:.2}" text-anchor="middle">{}</text>"##,
            ox + PAD + PANEL / 2.0,
            PAD - 10.0,
            escape(&p.title)
        );
        let _ = writeln!(
            s,
            r##"<text x="{:.2}" y="{:.2}" text-anchor="middle" fill="#555">x {:.0}..{:.0} cm, y {:.0}..{:.0} cm</text>"##,
            ox + PAD + PANEL / 2.0,
            PAD + PANEL + 18.0,
            frame.x0,
            frame.x0 + PANEL / frame.scale,
            frame.y0,
            frame.y0 + PANEL / frame.scale
        );
        if p.path.len() > 1 {
            let pts: Vec<String> = p
                .path
                .iter()
                .map(|&q| {
                    let (x, y) = frame.map(ox, q);
                    format!("{x:.2},{y:.2}")
                })
                .collect();
            let _ = writeln!(
                s,
                r##"<polyline class="path" points="{}" fill="none" stroke="#d62728" stroke-width="1.5"/>"##,
                pts.join(" ")
            );
        }
        for hull in &p.hulls {
            let pts: Vec<String> = hull
                .iter()
                .map(|&q| {
                    let (x, y) = frame.map(ox, q);
                    format!("{x:.2},{y:.2}")
                })
                .collect();
            let _ = writeln!(
                s,
                r##"<polygon class="hull" points="{}" fill="none" stroke="#000" stroke-dasharray="4 2"/>"##,
                pts.join(" ")
            );
        }
        for &(x, y, snr) in &p.points {
            let (px, py) = frame.map(ox, (x, y));
            let _ = writeln!(
                s,
                r##"<circle cx="{px:.2}" cy="{py:.2}" r="2.5" fill="{}"/>"##,
                colour(norm(snr))
            );
        }
        for &c in &p.centroids {
            let (px, py) = frame.map(ox, c);
            let _ = writeln!(
                s,
                r##"<path class="centroid" d="M{:.2},{:.2}l8,8m0,-8l-8,8" stroke="#000" stroke-width="2"/>"##,
                px - 4.0,
                py - 4.0
            );
        }
        let _ = writeln!(s, "</g>");
    }

    let bx = cell * panels.len().max(1) as f64 + 10.0;
    let _ = writeln!(s, r##"<defs><linearGradient id="snr" x1="0" y1="1" x2="0" y2="0">"##);
    for (i, c) in VIRIDIS.iter().enumerate() {
        let _ = writeln!(
            s,
            r##"<stop offset="{:.2}" stop-color="#{:02x}{:02x}{:02x}"/>"##,
            i as f64 / (VIRIDIS.len() - 1) as f64,
            c.0,
            c.1,
            c.2
        );
    }
    let _ = writeln!(s, "</linearGradient></defs>");
    let _ = writeln!(
        s,
        r##"<rect class="colorbar" x="{bx:.2}" y="{PAD:.2}" width="16" height="{PANEL:.2}" fill="url(#snr)" stroke="#999"/>"##
    );
    let _ = writeln!(
        s,
        r##"<text x="{:.2}" y="{:.2}">{smax:.1}</text><text x="{:.2}" y="{:.2}">{smin:.1}</text><text x="{bx:.2}" y="{:.2}">SNR score</text>"##,
        bx + 20.0,
        PAD + 10.0,
        bx + 20.0,
        PAD + PANEL,
        PAD - 10.0
    );
    s.push_str("</svg>\n");
    s
}

fn escape(t: &str) -> String {
    t.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hull_of_square_with_interior() {
        let pts = [(0.0, 0.0), (1.0, 0.0), (1.0, 1.0), (0.0, 1.0), (0.5, 0.5), (0.5, 0.0)];
        let h = convex_hull(&pts);
        assert_eq!(h, vec![(0.0, 0.0), (1.0, 0.0), (1.0, 1.0), (0.0, 1.0)]);
        assert_eq!(convex_hull(&[(2.0, 2.0)]), vec![(2.0, 2.0)]);
    }

    #[test]
    fn colour_endpoints() {
        assert_eq!(colour(0.0), "#440154");
        assert_eq!(colour(1.0), "#fde725");
    }

    #[test]
    fn render_counts_elements() {
        let p = Panel {
            title: "map".into(),
            points: vec![(0.0, 0.0, 1.0), (10.0, 0.0, f64::INFINITY)],
            hulls: vec![vec![(0.0, 0.0), (10.0, 0.0), (5.0, 5.0)], vec![(50.0, 50.0), (60.0, 50.0), (55.0, 55.0)]],
            centroids: vec![],
            path: vec![(-10.0, 0.0), (-5.0, 0.0)],
        };
        let svg = render(&[p]);
        assert_eq!(svg.matches("<circle").count(), 2);
        assert_eq!(svg.matches(r##"class="hull""##).count(), 2);
        assert_eq!(svg.matches(r##"class="path""##).count(), 1);
        assert!(svg.contains(r##"class="colorbar""##));
    }
}
