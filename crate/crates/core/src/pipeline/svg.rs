//! Minimal hand-written SVG plots: eigenvalues against the unit circle and
//! impulse-response panels with a shaded band.

use std::fmt::Write;

use crate::pvar::{Eigenvalue, IrfResult};

fn num(v: f64) -> String {
    format!("{v:.3}")
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Eigenvalues in the complex plane with the unit circle.
pub fn eigenvalue_svg(eigenvalues: &[Eigenvalue], title: &str) -> String {
    let size = 400.0;
    let c = size / 2.0;
    let radius = 150.0;
    let extent = eigenvalues
        .iter()
        .map(|e| e.modulus)
        .fold(1.0f64, f64::max);
    let scale = radius / extent;
    let mut s = String::new();
    let _ = writeln!(
        s,
        r##"<svg xmlns="http://www.w3.org/2000/svg" width="{size}" height="{size}" viewBox="0 0 {size} {size}" font-family="sans-serif" font-size="11">"##
    );
    let _ = writeln!(s, r##"<rect width="{size}" height="{size}" fill="white"/>"##);
    let _ = writeln!(s, r##"<text x="{c}" y="18" text-anchor="middle" font-size="13">{}</text>"##, escape(title));
    let _ = writeln!(
        s,
        r##"<line x1="{}" y1="{c}" x2="{}" y2="{c}" stroke="#999"/><line x1="{c}" y1="{}" x2="{c}" y2="{}" stroke="#999"/>"##,
        num(c - radius - 20.0),
        num(c + radius + 20.0),
        num(c - radius - 20.0),
        num(c + radius + 20.0)
    );
    let _ = writeln!(
        s,
        r##"<circle cx="{c}" cy="{c}" r="{}" fill="none" stroke="black"/>"##,
        num(scale)
    );
    let _ = writeln!(s, r##"<text x="{}" y="{}">Real</text>"##, num(c + radius - 10.0), num(c + 14.0));
    let _ = writeln!(s, r##"<text x="{}" y="{}">Imaginary</text>"##, num(c + 4.0), num(c - radius - 6.0));
    for e in eigenvalues {
        let colour = if e.modulus < 1.0 { "#1f4e9c" } else { "#c0392b" };
        let _ = writeln!(
            s,
            r##"<circle cx="{}" cy="{}" r="3.5" fill="{colour}"><title>{:.4} {:+.4}i (modulus {:.4})</title></circle>"##,
            num(c + e.re * scale),
            num(c - e.im * scale),
            e.re,
            e.im,
            e.modulus
        );
    }
    s.push_str("</svg>\n");
    s
}

/// One panel per response variable for a single shock, in a grid.
pub fn irf_svg(irf: &IrfResult, shock: usize, unit_shock: bool) -> String {
    let m = irf.variables.len();
    let cols = m.clamp(1, 4);
    let rows = m.div_ceil(cols);
    let (pw, ph) = (220.0, 160.0);
    let (width, height) = (pw * cols as f64, ph * rows as f64 + 30.0);
    let mut s = String::new();
    let _ = writeln!(
        s,
        r##"<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" viewBox="0 0 {width} {height}" font-family="sans-serif" font-size="10">"##
    );
    let _ = writeln!(s, r##"<rect width="{width}" height="{height}" fill="white"/>"##);
    let norm = if unit_shock { "unit" } else { "one s.d." };
    let _ = writeln!(
        s,
        r##"<text x="{}" y="18" text-anchor="middle" font-size="13">Responses to a {norm} shock in {} ({:.0}% band)</text>"##,
        width / 2.0,
        escape(&irf.variables[shock]),
        irf.band_level * 100.0
    );
    let h_max = irf.horizon.max(1) as f64;
    for r in 0..m {
        let ox = pw * (r % cols) as f64;
        let oy = 30.0 + ph * (r / cols) as f64;
        let (left, right, top, bottom) = (ox + 30.0, ox + pw - 10.0, oy + 18.0, oy + ph - 20.0);
        let values: Vec<(f64, f64, f64)> = (0..=irf.horizon)
            .map(|h| {
                if unit_shock {
                    irf.unit_shock(r, shock, h)
                } else {
                    (irf.point(r, shock, h), irf.lower(r, shock, h), irf.upper(r, shock, h))
                }
            })
            .collect();
        let lo = values.iter().map(|v| v.1).fold(0.0f64, f64::min);
        let hi = values.iter().map(|v| v.2).fold(0.0f64, f64::max);
        let span = if hi - lo > 0.0 { hi - lo } else { 1.0 };
        let x = |h: usize| left + (right - left) * h as f64 / h_max;
        let y = |v: f64| bottom - (bottom - top) * (v - lo) / span;
        let _ = writeln!(s, r##"<text x="{}" y="{}" text-anchor="middle">{}</text>"##, num((left + right) / 2.0), num(oy + 12.0), escape(&irf.variables[r]));
        let _ = writeln!(
            s,
            r##"<rect x="{}" y="{}" width="{}" height="{}" fill="none" stroke="#ccc"/>"##,
            num(left),
            num(top),
            num(right - left),
            num(bottom - top)
        );
        let mut band = String::new();
        for (h, v) in values.iter().enumerate() {
            let _ = write!(band, "{},{} ", num(x(h)), num(y(v.2)));
        }
        for (h, v) in values.iter().enumerate().rev() {
            let _ = write!(band, "{},{} ", num(x(h)), num(y(v.1)));
        }
        let _ = writeln!(s, r##"<polygon points="{}" fill="#9bb7e0" fill-opacity="0.5" stroke="none"/>"##, band.trim_end());
        let _ = writeln!(
            s,
            r##"<line x1="{}" y1="{}" x2="{}" y2="{}" stroke="black" stroke-dasharray="3,3"/>"##,
            num(left),
            num(y(0.0)),
            num(right),
            num(y(0.0))
        );
        let line: Vec<String> = values
            .iter()
            .enumerate()
            .map(|(h, v)| format!("{},{}", num(x(h)), num(y(v.0))))
            .collect();
        let _ = writeln!(s, r##"<polyline points="{}" fill="none" stroke="#1f4e9c" stroke-width="1.5"/>"##, line.join(" "));
        let _ = writeln!(s, r##"<text x="{}" y="{}">{:.3}</text>"##, num(ox + 2.0), num(top + 8.0), hi);
        let _ = writeln!(s, r##"<text x="{}" y="{}">{:.3}</text>"##, num(ox + 2.0), num(bottom), lo);
        let _ = writeln!(s, r##"<text x="{}" y="{}" text-anchor="end">{}</text>"##, num(right), num(bottom + 12.0), irf.horizon);
    }
    s.push_str("</svg>\n");
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn eigenvalue_plot_places_points_inside_circle() {
        let eig = [
            Eigenvalue { re: 0.5, im: 0.3, modulus: (0.34f64).sqrt() },
            Eigenvalue { re: -0.2, im: 0.0, modulus: 0.2 },
        ];
        let svg = eigenvalue_svg(&eig, "Roots");
        assert!(svg.starts_with("<svg"));
        assert_eq!(svg.matches("<circle").count(), 3);
        assert!(svg.contains("#1f4e9c"));
        assert!(!svg.contains("#c0392b"));
    }
}
