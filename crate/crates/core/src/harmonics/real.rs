//! Real orthonormal basis for spectra of real signals.
//!
//! With the unitary `U` below, `U f̂` is real for the S² spectrum of a real
//! signal and `U F U†` is real for an SO(3) block `F` of a real signal.
//! Block products survive the change of basis (`U F U† · U G U† = U FG U†`),
//! which lets the convolution layers run on plain real matrices.
//!
//! Rows of `U`, indexed by `r ∈ -l..=l`:
//! * `r = 0`: `e_0`
//! * `r = +μ`: `(e_{-μ} + (-1)^μ e_μ) / √2`
//! * `r = -μ`: `i (e_{-μ} - (-1)^μ e_μ) / √2`

use num_complex::Complex64;
use std::f64::consts::FRAC_1_SQRT_2;

use crate::sphere::{s2_index, so3_block_offset, BandLimit};

#[inline]
fn parity(mu: i64) -> f64 {
    if mu % 2 == 0 {
        1.0
    } else {
        -1.0
    }
}

/// Nonzero entries of row `r` of `U` as `(column m, value)`.
#[inline]
fn row(r: i64) -> [(i64, Complex64); 2] {
    let zero = Complex64::new(0.0, 0.0);
    if r == 0 {
        return [(0, Complex64::new(1.0, 0.0)), (0, zero)];
    }
    let mu = r.abs();
    let p = parity(mu);
    if r > 0 {
        [(-mu, Complex64::new(FRAC_1_SQRT_2, 0.0)), (mu, Complex64::new(p * FRAC_1_SQRT_2, 0.0))]
    } else {
        [(-mu, Complex64::new(0.0, FRAC_1_SQRT_2)), (mu, Complex64::new(0.0, -p * FRAC_1_SQRT_2))]
    }
}

/// Complex S² spectrum (one channel) to real coefficients.
pub fn s2_to_real(bw: BandLimit, coeff: &[Complex64], out: &mut [f64]) {
    let s2 = std::f64::consts::SQRT_2;
    for l in 0..bw.get() {
        out[s2_index(l, 0)] = coeff[s2_index(l, 0)].re;
        for mu in 1..=l as i64 {
            let c = coeff[s2_index(l, mu)];
            let p = parity(mu);
            out[s2_index(l, mu)] = p * s2 * c.re;
            out[s2_index(l, -mu)] = p * s2 * c.im;
        }
    }
}

/// Real coefficients (one channel) to a conjugate-symmetric complex spectrum.
pub fn s2_from_real(bw: BandLimit, real: &[f64], out: &mut [Complex64]) {
    for l in 0..bw.get() {
        out[s2_index(l, 0)] = Complex64::new(real[s2_index(l, 0)], 0.0);
        for mu in 1..=l as i64 {
            let a = real[s2_index(l, mu)];
            let b = real[s2_index(l, -mu)];
            let p = parity(mu);
            out[s2_index(l, mu)] = Complex64::new(p * a * FRAC_1_SQRT_2, p * b * FRAC_1_SQRT_2);
            out[s2_index(l, -mu)] = Complex64::new(a * FRAC_1_SQRT_2, -b * FRAC_1_SQRT_2);
        }
    }
}

/// `U F U†` for one `(2l+1)²` block; the imaginary residue is dropped.
pub fn so3_block_to_real(l: usize, block: &[Complex64], out: &mut [f64], scratch: &mut Vec<Complex64>) {
    let d = 2 * l + 1;
    let li = l as i64;
    scratch.clear();
    scratch.resize(d * d, Complex64::new(0.0, 0.0));
    // T = U F
    for r in -li..=li {
        let ri = (r + li) as usize;
        for (m, u) in row(r) {
            if u.re == 0.0 && u.im == 0.0 {
                continue;
            }
            let mi = (m + li) as usize;
            for n in 0..d {
                scratch[ri * d + n] += u * block[mi * d + n];
            }
        }
    }
    // out = T U†
    for r in 0..d {
        for s in -li..=li {
            let si = (s + li) as usize;
            let mut acc = Complex64::new(0.0, 0.0);
            for (n, u) in row(s) {
                if u.re == 0.0 && u.im == 0.0 {
                    continue;
                }
                acc += scratch[r * d + (n + li) as usize] * u.conj();
            }
            out[r * d + si] = acc.re;
        }
    }
}

/// `U† F_R U` for one block.
pub fn so3_block_from_real(l: usize, real: &[f64], out: &mut [Complex64], scratch: &mut Vec<Complex64>) {
    let d = 2 * l + 1;
    let li = l as i64;
    scratch.clear();
    scratch.resize(d * d, Complex64::new(0.0, 0.0));
    // T = U† F_R: T[m][s] = Σ_r conj(U[r][m]) F_R[r][s]
    for r in -li..=li {
        let ri = (r + li) as usize;
        for (m, u) in row(r) {
            if u.re == 0.0 && u.im == 0.0 {
                continue;
            }
            let mi = (m + li) as usize;
            let uc = u.conj();
            for s in 0..d {
                scratch[mi * d + s] += uc * real[ri * d + s];
            }
        }
    }
    for v in out[..d * d].iter_mut() {
        *v = Complex64::new(0.0, 0.0);
    }
    // out = T U: out[m][n] = Σ_s T[m][s] U[s][n]
    for s in -li..=li {
        let si = (s + li) as usize;
        for (n, u) in row(s) {
            if u.re == 0.0 && u.im == 0.0 {
                continue;
            }
            let ni = (n + li) as usize;
            for m in 0..d {
                out[m * d + ni] += scratch[m * d + si] * u;
            }
        }
    }
}

/// Whole-channel SO(3) conversion, complex to real.
pub fn so3_to_real(bw: BandLimit, coeff: &[Complex64], out: &mut [f64]) {
    let mut scratch = Vec::new();
    for l in 0..bw.get() {
        let o = so3_block_offset(l);
        let len = (2 * l + 1) * (2 * l + 1);
        so3_block_to_real(l, &coeff[o..o + len], &mut out[o..o + len], &mut scratch);
    }
}

/// Whole-channel SO(3) conversion, real to complex.
pub fn so3_from_real(bw: BandLimit, real: &[f64], out: &mut [Complex64]) {
    let mut scratch = Vec::new();
    for l in 0..bw.get() {
        let o = so3_block_offset(l);
        let len = (2 * l + 1) * (2 * l + 1);
        so3_block_from_real(l, &real[o..o + len], &mut out[o..o + len], &mut scratch);
    }
}

/// Sign `σ_r` relating `U conj(f̂)` to `U f̂`: `+1` for `r ≥ 0`, `-1` otherwise.
#[inline]
pub fn conj_sign(r: i64) -> f64 {
    if r < 0 {
        -1.0
    } else {
        1.0
    }
}
