//! Orthonormalized associated Legendre functions.

use std::f64::consts::PI;

use crate::sphere::{polar_angle, BandLimit};

/// `P̄_l^m(cos θ_j)` for `0 ≤ m ≤ l < bw` on the polar grid, orthonormal on
/// the sphere (`∫ |Y_l^m|² = 1`) and carrying the Condon-Shortley phase.
#[derive(Debug, Clone)]
pub struct LegendreTable {
    bw: usize,
    side: usize,
    /// Start of the `m` section; each section is `[l][j]` for `l = m..bw`.
    offsets: Vec<usize>,
    values: Vec<f64>,
}

impl LegendreTable {
    pub fn new(bw: BandLimit) -> Self {
        let b = bw.get();
        let side = bw.side();
        let mut offsets = Vec::with_capacity(b + 1);
        let mut total = 0;
        for m in 0..b {
            offsets.push(total);
            total += (b - m) * side;
        }
        offsets.push(total);
        let mut values = vec![0.0; total];
        let mut column = vec![0.0; b];
        for j in 0..side {
            let theta = polar_angle(bw, j);
            for m in 0..b {
                legendre_column(b, m, theta, &mut column[..b - m]);
                for (i, v) in column[..b - m].iter().enumerate() {
                    values[offsets[m] + i * side + j] = *v;
                }
            }
        }
        Self { bw: b, side, offsets, values }
    }

    #[inline]
    pub fn bw(&self) -> usize {
        self.bw
    }

    /// Values `P̄_l^m(θ_j)` for all `j`, `m ≥ 0`.
    #[inline]
    pub fn row(&self, l: usize, m: usize) -> &[f64] {
        let start = self.offsets[m] + (l - m) * self.side;
        &self.values[start..start + self.side]
    }

    /// `P̄_l^m(θ_j)` for signed `m`, using `P̄_l^{-m} = (-1)^m P̄_l^m`.
    #[inline]
    pub fn get(&self, l: usize, m: i64, j: usize) -> f64 {
        let v = self.row(l, m.unsigned_abs() as usize)[j];
        if m < 0 && m % 2 != 0 {
            -v
        } else {
            v
        }
    }
}

/// Fills `out[i] = P̄_{m+i}^m(cos θ)` for `i = 0..out.len()`.
pub fn legendre_column(bw: usize, m: usize, theta: f64, out: &mut [f64]) {
    debug_assert!(out.len() <= bw - m);
    let (s, c) = theta.sin_cos();
    // P̄_m^m = (-1)^m sqrt((2m+1)!! / (4π (2m)!!)) sin^m θ, built up in m.
    let mut pmm = 1.0 / (4.0 * PI).sqrt();
    for k in 1..=m {
        pmm *= -((2 * k + 1) as f64 / (2 * k) as f64).sqrt() * s;
    }
    if out.is_empty() {
        return;
    }
    out[0] = pmm;
    if out.len() == 1 {
        return;
    }
    out[1] = ((2 * m + 3) as f64).sqrt() * c * pmm;
    let mf = m as f64;
    for i in 2..out.len() {
        let l = (m + i) as f64;
        let a = ((4.0 * l * l - 1.0) / (l * l - mf * mf)).sqrt();
        let b = (((l - 1.0) * (l - 1.0) - mf * mf) / (4.0 * (l - 1.0) * (l - 1.0) - 1.0)).sqrt();
        out[i] = a * (c * out[i - 1] - b * out[i - 2]);
    }
}

/// Single evaluation of `P̄_l^m(cos θ)`, signed `m`.
pub fn legendre(l: usize, m: i64, theta: f64) -> f64 {
    let am = m.unsigned_abs() as usize;
    if am > l {
        return 0.0;
    }
    let mut col = vec![0.0; l - am + 1];
    legendre_column(l + 1, am, theta, &mut col);
    let v = col[l - am];
    if m < 0 && am % 2 == 1 {
        -v
    } else {
        v
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn degree_zero_is_constant() {
        let t = LegendreTable::new(BandLimit::new(6).unwrap());
        for j in 0..12 {
            assert!((t.get(0, 0, j) - 1.0 / (4.0 * PI).sqrt()).abs() < 1e-15);
        }
    }

    #[test]
    fn closed_forms() {
        for &theta in &[0.1, 0.9, 2.0, 3.0] {
            let (s, c) = f64::sin_cos(theta);
            assert!((legendre(1, 0, theta) - (3.0 / (4.0 * PI)).sqrt() * c).abs() < 1e-14);
            assert!((legendre(1, 1, theta) + (3.0 / (8.0 * PI)).sqrt() * s).abs() < 1e-14);
            assert!((legendre(2, 1, theta) + (15.0 / (8.0 * PI)).sqrt() * s * c).abs() < 1e-14);
            assert!((legendre(2, -1, theta) - (15.0 / (8.0 * PI)).sqrt() * s * c).abs() < 1e-14);
            let p20 = (5.0 / (16.0 * PI)).sqrt() * (3.0 * c * c - 1.0);
            assert!((legendre(2, 0, theta) - p20).abs() < 1e-14);
        }
    }
}
