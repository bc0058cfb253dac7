//! Preview and export formats: PGM images, ASCII PLY clouds, CSV tables.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::error::Result;
use crate::projection::{SphericalScan, IGNORE};

/// Per-class RGB; IGNORE is drawn black.
pub const CLASS_COLORS: [[u8; 3]; 5] = [[245, 150, 100], [250, 30, 30], [175, 0, 175], [255, 200, 0], [0, 175, 0]];

pub fn class_color(c: u8) -> [u8; 3] {
    CLASS_COLORS.get(c as usize).copied().unwrap_or([0, 0, 0])
}

/// Binary 8-bit PGM, rows top to bottom.
pub fn write_pgm(path: &Path, width: usize, height: usize, pixels: &[u8]) -> Result<()> {
    assert_eq!(pixels.len(), width * height, "pixel count");
    let mut bytes = format!("P5\n{width} {height}\n255\n").into_bytes();
    bytes.extend_from_slice(pixels);
    fs::write(path, bytes)?;
    Ok(())
}

/// Equirectangular range preview: rows are polar angle, columns azimuth.
pub fn range_pixels(scan: &SphericalScan, max_range: f64) -> Vec<u8> {
    scan.range()
        .iter()
        .zip(scan.mask())
        .map(|(&r, &m)| if m == 0.0 { 0 } else { (255.0 * (1.0 - (r / max_range).min(1.0))).round().max(1.0) as u8 })
        .collect()
}

/// Labels as gray levels `40·(c+1)`; IGNORE is 0.
pub fn label_pixels(labels: &[u8]) -> Vec<u8> {
    labels.iter().map(|&c| if c == IGNORE { 0 } else { 40 * (c.min(5) + 1) }).collect()
}

pub fn write_ply(path: &Path, points: &[[f64; 3]], labels: &[u8]) -> Result<()> {
    let mut s = String::new();
    writeln!(s, "ply\nformat ascii 1.0\nelement vertex {}", points.len()).unwrap();
    for p in ["x", "y", "z"] {
        writeln!(s, "property float {p}").unwrap();
    }
    for p in ["red", "green", "blue", "label"] {
        writeln!(s, "property uchar {p}").unwrap();
    }
    s.push_str("end_header\n");
    for (p, &l) in points.iter().zip(labels) {
        let [r, g, b] = class_color(l);
        writeln!(s, "{} {} {} {r} {g} {b} {l}", p[0] as f32, p[1] as f32, p[2] as f32).unwrap();
    }
    fs::write(path, s)?;
    Ok(())
}

pub fn write_csv(path: &Path, header: &[&str], rows: &[Vec<String>]) -> Result<()> {
    let mut s = header.join(",");
    s.push('\n');
    for r in rows {
        s.push_str(&r.join(","));
        s.push('\n');
    }
    fs::write(path, s)?;
    Ok(())
}
