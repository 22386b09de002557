//! Minimal deterministic SVG charts: fixed 640x360 canvas, every number
//! printed with three decimals, so identical inputs give identical bytes.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};

pub const WIDTH: f64 = 640.0;
pub const HEIGHT: f64 = 360.0;
const LEFT: f64 = 50.0;
const RIGHT: f64 = 20.0;
const TOP: f64 = 20.0;
const BOTTOM: f64 = 40.0;

/// Bin counts over `[lo, hi]`.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Histogram {
    pub lo: f64,
    pub hi: f64,
    pub counts: Vec<usize>,
}

impl Histogram {
    /// Equal-width bins spanning the data (`lo == hi` for constant data, in
    /// which case everything lands in the first bin).
    pub fn of(values: &[f64], bins: usize) -> Self {
        assert!(bins >= 1);
        let finite: Vec<f64> = values.iter().copied().filter(|v| v.is_finite()).collect();
        let lo = finite.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = finite.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if finite.is_empty() {
            return Histogram {
                lo: 0.0,
                hi: 0.0,
                counts: vec![0; bins],
            };
        }
        Self::with_range(&finite, bins, lo, hi)
    }

    /// Equal-width bins over `[lo, hi]`; values outside are clamped to the edge bins.
    pub fn with_range(values: &[f64], bins: usize, lo: f64, hi: f64) -> Self {
        assert!(bins >= 1);
        let mut counts = vec![0; bins];
        let width = hi - lo;
        for &v in values.iter().filter(|v| v.is_finite()) {
            let k = if width > 0.0 {
                (((v - lo) / width * bins as f64).floor().max(0.0) as usize).min(bins - 1)
            } else {
                0
            };
            counts[k] += 1;
        }
        Histogram { lo, hi, counts }
    }
}

fn header(out: &mut String) {
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH:.0}" height="{HEIGHT:.0}" viewBox="0 0 {WIDTH:.0} {HEIGHT:.0}">"#
    );
    let _ = writeln!(out, r#"<rect x="0" y="0" width="{WIDTH:.0}" height="{HEIGHT:.0}" fill="white"/>"#);
    let (x0, y0, x1, y1) = (LEFT, HEIGHT - BOTTOM, WIDTH - RIGHT, TOP);
    let _ = writeln!(out, r#"<line x1="{x0:.3}" y1="{y0:.3}" x2="{x1:.3}" y2="{y0:.3}" stroke="black"/>"#);
    let _ = writeln!(out, r#"<line x1="{x0:.3}" y1="{y0:.3}" x2="{x0:.3}" y2="{y1:.3}" stroke="black"/>"#);
}

fn label(out: &mut String, x: f64, y: f64, anchor: &str, text: &str) {
    let _ = writeln!(
        out,
        r#"<text x="{x:.3}" y="{y:.3}" font-family="monospace" font-size="11" text-anchor="{anchor}">{text}</text>"#
    );
}

pub fn render_histogram(h: &Histogram, title: &str) -> String {
    let mut out = String::new();
    header(&mut out);
    label(&mut out, WIDTH / 2.0, TOP - 6.0, "middle", title);
    let max = h.counts.iter().copied().max().unwrap_or(0);
    let base = HEIGHT - BOTTOM;
    let plot_w = WIDTH - LEFT - RIGHT;
    let plot_h = HEIGHT - TOP - BOTTOM;
    if max > 0 {
        let bins = h.counts.len() as f64;
        let bar_w = plot_w / bins;
        for (k, &c) in h.counts.iter().enumerate() {
            if c == 0 {
                continue;
            }
            let bh = plot_h * c as f64 / max as f64;
            let x = LEFT + bar_w * k as f64;
            let _ = writeln!(
                out,
                r#"<rect x="{x:.3}" y="{:.3}" width="{bar_w:.3}" height="{bh:.3}" fill="steelblue"/>"#,
                base - bh
            );
        }
        label(&mut out, LEFT, base + 16.0, "start", &format!("{:.3}", h.lo));
        label(&mut out, WIDTH - RIGHT, base + 16.0, "end", &format!("{:.3}", h.hi));
        label(&mut out, LEFT - 4.0, TOP + 4.0, "end", &max.to_string());
    }
    label(&mut out, LEFT - 4.0, base, "end", "0");
    out.push_str("</svg>\n");
    out
}

pub fn emit_svg_histogram(values: &[f64], bins: usize, path: &Path) -> Result<()> {
    if bins == 0 {
        return Err(Error::Config("histogram needs at least one bin".into()));
    }
    let h = Histogram::of(values, bins);
    let title = path.file_stem().and_then(|s| s.to_str()).unwrap_or("");
    write_svg(path, &render_histogram(&h, title))
}

/// Line chart of several `(x, y)` series sharing one pair of axes.
pub fn render_curves(series: &[(&str, &[(f64, f64)])], title: &str) -> String {
    const COLORS: [&str; 6] = ["black", "steelblue", "darkorange", "seagreen", "crimson", "purple"];
    let mut out = String::new();
    header(&mut out);
    label(&mut out, WIDTH / 2.0, TOP - 6.0, "middle", title);
    let pts = series.iter().flat_map(|(_, s)| s.iter()).filter(|(x, y)| x.is_finite() && y.is_finite());
    let (mut xlo, mut xhi, mut ylo, mut yhi) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    for &(x, y) in pts {
        xlo = xlo.min(x);
        xhi = xhi.max(x);
        ylo = ylo.min(y);
        yhi = yhi.max(y);
    }
    if xlo <= xhi {
        let sx = if xhi > xlo { (WIDTH - LEFT - RIGHT) / (xhi - xlo) } else { 0.0 };
        let sy = if yhi > ylo { (HEIGHT - TOP - BOTTOM) / (yhi - ylo) } else { 0.0 };
        for (k, (name, s)) in series.iter().enumerate() {
            let mut d = String::new();
            for &(x, y) in s.iter().filter(|(x, y)| x.is_finite() && y.is_finite()) {
                let _ = write!(d, "{:.3},{:.3} ", LEFT + (x - xlo) * sx, HEIGHT - BOTTOM - (y - ylo) * sy);
            }
            let color = COLORS[k % COLORS.len()];
            let _ = writeln!(out, r#"<polyline fill="none" stroke="{color}" points="{}"/>"#, d.trim_end());
            label(&mut out, WIDTH - RIGHT, TOP + 14.0 * (k + 1) as f64, "end", name);
        }
        label(&mut out, LEFT, HEIGHT - BOTTOM + 16.0, "start", &format!("{xlo:.3}"));
        label(&mut out, WIDTH - RIGHT, HEIGHT - BOTTOM + 16.0, "end", &format!("{xhi:.3}"));
        label(&mut out, LEFT - 4.0, HEIGHT - BOTTOM, "end", &format!("{ylo:.3}"));
        label(&mut out, LEFT - 4.0, TOP + 4.0, "end", &format!("{yhi:.3}"));
    }
    out.push_str("</svg>\n");
    out
}

pub fn write_svg(path: &Path, svg: &str) -> Result<()> {
    fs::write(path, svg).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bars(svg: &str) -> usize {
        svg.matches("fill=\"steelblue\"").count()
    }

    #[test]
    fn empty_values_draw_axes_only() {
        let svg = render_histogram(&Histogram::of(&[], 10), "e");
        assert_eq!(bars(&svg), 0);
        assert_eq!(svg.matches("<line").count(), 2);
        assert!(svg.contains(r#"width="640" height="360""#));
    }

    #[test]
    fn single_value_is_one_full_bar() {
        let svg = render_histogram(&Histogram::of(&[1.25], 8), "s");
        assert_eq!(bars(&svg), 1);
        assert!(svg.contains(r#"height="300.000""#), "{svg}");
    }

    #[test]
    fn counts_and_edges() {
        let h = Histogram::of(&[0.0, 0.1, 0.9, 1.0], 2);
        assert_eq!(h.counts, vec![2, 2]);
        let h = Histogram::with_range(&[-9.0, 0.5, 9.0], 4, 0.0, 1.0);
        assert_eq!(h.counts, vec![1, 0, 1, 1]);
    }

    #[test]
    fn emit_is_deterministic() {
        let dir = tempfile::tempdir().unwrap();
        let vals: Vec<f64> = (0..50).map(|i| (i as f64 * 0.37).sin()).collect();
        let a = dir.path().join("a.svg");
        let b = dir.path().join("b.svg");
        emit_svg_histogram(&vals, 12, &a).unwrap();
        emit_svg_histogram(&vals, 12, &b).unwrap();
        let (ta, tb) = (fs::read_to_string(&a).unwrap(), fs::read_to_string(&b).unwrap());
        assert_eq!(ta.replace(">a<", ">b<"), tb);
        assert!(emit_svg_histogram(&vals, 0, &a).is_err());
        assert!(emit_svg_histogram(&vals, 3, &dir.path().join("missing/x.svg")).is_err());
    }

    #[test]
    fn curves_render() {
        let s: Vec<(f64, f64)> = (0..5).map(|i| (i as f64, (i * i) as f64)).collect();
        let svg = render_curves(&[("sq", &s)], "c");
        assert!(svg.contains("<polyline"));
        assert!(svg.contains("50.000,320.000"));
    }
}
