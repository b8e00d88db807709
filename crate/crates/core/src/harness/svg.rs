//! Minimal SVG line overlays.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};

const W: f64 = 640.0;
const H: f64 = 400.0;
const PAD: f64 = 40.0;
const COLOURS: [&str; 4] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd"];

/// One polyline.
pub struct Series<'a> {
    pub label: &'a str,
    pub x: &'a [f64],
    pub y: &'a [f64],
}

pub fn overlay(title: &str, series: &[Series<'_>]) -> String {
    let pts = series.iter().flat_map(|s| s.x.iter().zip(s.y.iter()));
    let (mut x0, mut x1, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, 0.0f64);
    for (x, y) in pts.filter(|(x, y)| x.is_finite() && y.is_finite()) {
        x0 = x0.min(*x);
        x1 = x1.max(*x);
        y1 = y1.max(*y);
    }
    if !(x1 > x0) {
        x1 = x0 + 1.0;
    }
    if y1 <= 0.0 {
        y1 = 1.0;
    }
    let sx = |x: f64| PAD + (x - x0) / (x1 - x0) * (W - 2.0 * PAD);
    let sy = |y: f64| H - PAD - y / y1 * (H - 2.0 * PAD);
    let mut s = String::new();
    let _ = writeln!(s, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}">"#);
    let _ = writeln!(s, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
    let _ = writeln!(s, r#"<text x="{PAD}" y="20" font-family="sans-serif" font-size="14">{title}</text>"#);
    let _ = writeln!(
        s,
        r#"<polyline points="{PAD},{} {PAD},{} {},{}" fill="none" stroke="black"/>"#,
        PAD,
        H - PAD,
        W - PAD,
        H - PAD
    );
    let _ = writeln!(s, r#"<text x="{PAD}" y="{}" font-size="11">{x0:.3}</text>"#, H - PAD + 15.0);
    let _ = writeln!(s, r#"<text x="{}" y="{}" font-size="11">{x1:.3}</text>"#, W - PAD - 30.0, H - PAD + 15.0);
    let _ = writeln!(s, r#"<text x="2" y="{}" font-size="11">{y1:.3}</text>"#, PAD);
    for (k, ser) in series.iter().enumerate() {
        let c = COLOURS[k % COLOURS.len()];
        let mut p = String::new();
        for (x, y) in ser.x.iter().zip(ser.y) {
            if x.is_finite() && y.is_finite() {
                let _ = write!(p, "{:.2},{:.2} ", sx(*x), sy(*y));
            }
        }
        let _ = writeln!(s, r#"<polyline points="{}" fill="none" stroke="{c}" stroke-width="1.5"/>"#, p.trim_end());
        let _ = writeln!(s, r#"<text x="{}" y="{}" font-size="12" fill="{c}">{}</text>"#, W - 180.0, 40.0 + 16.0 * k as f64, ser.label);
    }
    s.push_str("</svg>\n");
    s
}

pub fn write_overlay(path: &Path, title: &str, series: &[Series<'_>]) -> Result<()> {
    std::fs::write(path, overlay(title, series)).map_err(|e| Error::InvalidInput(format!("{}: {e}", path.display())))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn overlay_is_well_formed() {
        let x = [0.0, 0.5, 1.0];
        let y = [0.0, 2.0, 0.0];
        let s = overlay("t", &[Series { label: "a", x: &x, y: &y }, Series { label: "b", x: &x, y: &y }]);
        assert!(s.starts_with("<svg") && s.trim_end().ends_with("</svg>"));
        assert_eq!(s.matches("<polyline").count(), 3);
    }
}
