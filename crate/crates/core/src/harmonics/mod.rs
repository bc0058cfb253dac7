//! Forward and inverse Fourier transforms on S² and SO(3).
//!
//! Conventions: `Y_l^m(θ, φ) = P̄_l^m(cos θ) e^{imφ}` (orthonormal, Condon-Shortley),
//! `D^l_{mn}(α, β, γ) = e^{-imα} d^l_{mn}(β) e^{-inγ}`. The SO(3) analysis is
//! `f̂^l_{mn} = ∫ f conj(D^l_{mn}) dμ` and synthesis weights each degree by
//! `(2l+1)/(8π²)`, so both directions are exact inverses on band-limited data.
//!
//! Periodic axes go through length-`2bw` FFTs; the polar axis is a dense
//! quadrature against cached Legendre / Wigner tables.

pub mod legendre;
pub mod real;
pub mod rotation;
pub mod wigner;

use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::{Arc, Mutex, OnceLock};

use std::cell::RefCell;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};
use crate::linalg::gemm_strided;
use crate::sphere::{dh_weights, s2_index, so3_block_offset, so3_index, BandLimit, S2Signal, S2Spectrum, SO3Signal,
                    SO3Spectrum};

pub use legendre::LegendreTable;
pub use rotation::{rotate_spectrum, rotate_so3_spectrum, wigner_big_d};
pub use wigner::{wigner_d, wigner_d_matrix, WignerTable};

/// Largest tolerated deviation from conjugate symmetry in the inverse transforms.
pub const SYMMETRY_TOL: f64 = 1e-6;

const ZERO: Complex64 = Complex64 { re: 0.0, im: 0.0 };

/// Precomputed kernels for one bandwidth.
pub struct Tables {
    pub bw: BandLimit,
    pub weights: Vec<f64>,
    pub legendre: LegendreTable,
    pub wigner: WignerTable,
    fft: Arc<dyn Fft<f64>>,
    /// Half-plane `(m, n)` pairs with `m > 0`, or `m = 0, n ≥ 0`; the rest
    /// follow from conjugate symmetry.
    half_pairs: Vec<(i64, i64)>,
    /// Positions of `(m, n)` and `(-m, -n)` in a transposed `side×side` DFT.
    pos: Vec<usize>,
    neg: Vec<usize>,
}

impl std::fmt::Debug for Tables {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Tables").field("bw", &self.bw).finish_non_exhaustive()
    }
}

impl Tables {
    fn build(bw: BandLimit) -> Self {
        let b = bw.get() as i64;
        let mut half_pairs = Vec::new();
        for m in 0..b {
            for n in -(b - 1)..b {
                if m > 0 || n >= 0 {
                    half_pairs.push((m, n));
                }
            }
        }
        let side = bw.side();
        let pos = half_pairs.iter().map(|&(m, n)| wrap(n, side) * side + wrap(m, side)).collect();
        let neg = half_pairs.iter().map(|&(m, n)| wrap(-n, side) * side + wrap(-m, side)).collect();
        Self {
            bw,
            pos,
            neg,
            weights: dh_weights(bw),
            legendre: LegendreTable::new(bw),
            wigner: WignerTable::new(bw),
            fft: FftPlanner::new().plan_fft_forward(bw.side()),
            half_pairs,
        }
    }

    /// Shared tables for `bw`, built once per bandwidth.
    pub fn get(bw: BandLimit) -> Arc<Tables> {
        static CACHE: OnceLock<Mutex<HashMap<usize, Arc<Tables>>>> = OnceLock::new();
        let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
        let mut guard = cache.lock().unwrap_or_else(|e| e.into_inner());
        guard.entry(bw.get()).or_insert_with(|| Arc::new(Tables::build(bw))).clone()
    }

    /// S² quadrature weight of row `j`, `w_j · π/bw`.
    #[inline]
    pub fn s2_quad(&self, j: usize) -> f64 {
        self.weights[j] * self.bw.step()
    }

    /// SO(3) quadrature weight of β-row `j`, `w_j · (π/bw)²`.
    #[inline]
    pub fn so3_quad(&self, j: usize) -> f64 {
        self.weights[j] * self.bw.step() * self.bw.step()
    }

    /// 2-D forward DFT of a row-major `side×side` array `buf[a][b]`, written
    /// transposed into `out[b'][a']`; `buf` is clobbered.
    fn fft2_t(&self, buf: &mut [Complex64], out: &mut [Complex64], scratch: &mut [Complex64]) {
        let n = self.bw.side();
        self.fft.process_with_scratch(buf, scratch);
        transpose(buf, out, n);
        self.fft.process_with_scratch(out, scratch);
    }

    fn scratch(&self) -> Vec<Complex64> {
        vec![ZERO; self.fft.get_inplace_scratch_len()]
    }
}

fn transpose(src: &[Complex64], dst: &mut [Complex64], n: usize) {
    for r in 0..n {
        for c in 0..n {
            dst[c * n + r] = src[r * n + c];
        }
    }
}

#[inline]
fn parity(m: i64) -> f64 {
    if m % 2 == 0 {
        1.0
    } else {
        -1.0
    }
}

#[inline]
fn wrap(m: i64, n: usize) -> usize {
    m.rem_euclid(n as i64) as usize
}

/// SO(3) synthesis normalization `(2l+1)/(8π²)`.
#[inline]
pub fn so3_synthesis_weight(l: usize) -> f64 {
    (2 * l + 1) as f64 / (8.0 * PI * PI)
}

/// Analysis of one S² channel into a full (conjugate-symmetric) spectrum.
pub fn s2_analysis(t: &Tables, f: &[f64], out: &mut [Complex64]) {
    let b = t.bw.get();
    let n = t.bw.side();
    let mut row = vec![ZERO; n];
    let mut scratch = t.scratch();
    out[..b * b].fill(ZERO);
    for j in 0..n {
        for k in 0..n {
            row[k] = Complex64::new(f[j * n + k], 0.0);
        }
        t.fft.process_with_scratch(&mut row, &mut scratch);
        let q = t.s2_quad(j);
        for m in 0..b {
            let fm = row[m] * q;
            for l in m..b {
                out[s2_index(l, m as i64)] += fm * t.legendre.row(l, m)[j];
            }
        }
    }
    for l in 0..b {
        for m in 1..=l as i64 {
            out[s2_index(l, -m)] = out[s2_index(l, m)].conj() * parity(m);
        }
    }
}

/// Synthesis of one S² channel; reads only `m ≥ 0` and assumes symmetry.
pub fn s2_synthesis(t: &Tables, coeff: &[Complex64], out: &mut [f64]) {
    let b = t.bw.get();
    let n = t.bw.side();
    let mut row = vec![ZERO; n];
    let mut scratch = t.scratch();
    for j in 0..n {
        row.fill(ZERO);
        for m in 0..b {
            let mut g = ZERO;
            for l in m..b {
                g += coeff[s2_index(l, m as i64)] * t.legendre.row(l, m)[j];
            }
            // Σ_m G(m) e^{imφ_k}: place conj so a forward FFT yields the conjugate sum.
            row[m] = g.conj();
            if m > 0 {
                row[n - m] = g;
            }
        }
        t.fft.process_with_scratch(&mut row, &mut scratch);
        for k in 0..n {
            out[j * n + k] = row[k].re;
        }
    }
}

/// Channels handled together by the grouped SO(3) transforms.
const GROUP: usize = 16;

thread_local! {
    static PLANES: RefCell<Vec<f64>> = const { RefCell::new(Vec::new()) };
    static SPECTRA: RefCell<Vec<Complex64>> = const { RefCell::new(Vec::new()) };
}

/// Runs `f` on a reused per-thread buffer of at least `len` elements. The
/// contents are unspecified on entry.
fn with_buffer<T: Clone + Default + 'static, R>(
    key: &'static std::thread::LocalKey<RefCell<Vec<T>>>,
    len: usize,
    f: impl FnOnce(&mut [T]) -> R,
) -> R {
    let mut v = key.with(|b| std::mem::take(&mut *b.borrow_mut()));
    if v.len() < len {
        v.resize(len, T::default());
    }
    let r = f(&mut v[..len]);
    key.with(|b| *b.borrow_mut() = v);
    r
}

/// Fills `planes[(j·P + p)·2g + 2c (+1)]` with the real and imaginary parts
/// of `q_j Σ_{k,l} f_c e^{+imα_k + inγ_l}` for half-plane pair `p`. Channels
/// are taken two at a time through one complex FFT per slice.
fn so3_planes_group(t: &Tables, f: &[f64], g: usize, planes: &mut [f64]) {
    let n = t.bw.side();
    let vol = n * n * n;
    let np = t.half_pairs.len();
    let mut buf = vec![ZERO; n * n];
    let mut tmp = vec![ZERO; n * n];
    let mut scratch = t.scratch();
    let w = 2 * g;
    for j in 0..n {
        let q = t.so3_quad(j);
        for c in (0..g).step_by(2) {
            let paired = c + 1 < g;
            let sa = &f[c * vol + j * n * n..c * vol + (j + 1) * n * n];
            if paired {
                let sb = &f[(c + 1) * vol + j * n * n..(c + 1) * vol + (j + 1) * n * n];
                for ((dst, &a), &b) in buf.iter_mut().zip(sa).zip(sb) {
                    *dst = Complex64::new(a, b);
                }
            } else {
                for (dst, &a) in buf.iter_mut().zip(sa) {
                    *dst = Complex64::new(a, 0.0);
                }
            }
            // tmp[n·N + m] holds the 2-D DFT at (m, n).
            t.fft2_t(&mut buf, &mut tmp, &mut scratch);
            // Σ f e^{+imα + inγ} is the conjugate of the forward DFT for real f.
            for p in 0..np {
                let z = tmp[t.pos[p]];
                let base = (j * np + p) * w + 2 * c;
                if paired {
                    let zc = tmp[t.neg[p]].conj();
                    let xa = (z + zc).conj() * (0.5 * q);
                    let xb = ((z - zc) * Complex64::new(0.0, -0.5)).conj() * q;
                    planes[base] = xa.re;
                    planes[base + 1] = xa.im;
                    planes[base + 2] = xb.re;
                    planes[base + 3] = xb.im;
                } else {
                    let xa = z.conj() * q;
                    planes[base] = xa.re;
                    planes[base + 1] = xa.im;
                }
            }
        }
    }
}

/// Inverse of the FFT stage of [`so3_planes_group`], without quadrature weights.
fn so3_signal_from_planes(t: &Tables, planes: &[f64], g: usize, out: &mut [f64]) {
    let n = t.bw.side();
    let vol = n * n * n;
    let np = t.half_pairs.len();
    let mut buf = vec![ZERO; n * n];
    let mut tmp = vec![ZERO; n * n];
    let mut scratch = t.scratch();
    let w = 2 * g;
    let i = Complex64::new(0.0, 1.0);
    for j in 0..n {
        for c in (0..g).step_by(2) {
            let paired = c + 1 < g;
            // Only the Nyquist row and column are left unset by the pairs.
            let b = t.bw.get();
            for k in 0..n {
                buf[b * n + k] = ZERO;
                buf[k * n + b] = ZERO;
            }
            for p in 0..np {
                let base = (j * np + p) * w + 2 * c;
                let va = Complex64::new(planes[base], planes[base + 1]);
                let vb = if paired { Complex64::new(planes[base + 2], planes[base + 3]) } else { ZERO };
                // Transposed placement: row n, column m. Both channels are
                // Hermitian, so one FFT of Y_a + i Y_b yields f_a + i f_b.
                buf[t.neg[p]] = va.conj() + i * vb.conj();
                buf[t.pos[p]] = va + i * vb;
            }
            t.fft2_t(&mut buf, &mut tmp, &mut scratch);
            let da = &mut out[c * vol + j * n * n..c * vol + (j + 1) * n * n];
            for (d, v) in da.iter_mut().zip(&tmp) {
                *d = v.re;
            }
            if paired {
                let db = &mut out[(c + 1) * vol + j * n * n..(c + 1) * vol + (j + 1) * n * n];
                for (d, v) in db.iter_mut().zip(&tmp) {
                    *d = v.im;
                }
            }
        }
    }
}

/// Analysis of `g ≤ GROUP` channels; `out` holds `g` full complex spectra.
fn so3_analysis_group(t: &Tables, f: &[f64], g: usize, out: &mut [Complex64]) {
    let len = t.half_pairs.len() * t.bw.side() * 2 * g;
    with_buffer(&PLANES, len, |planes| so3_analysis_from_planes(t, f, g, planes, out));
}

fn so3_analysis_from_planes(t: &Tables, f: &[f64], g: usize, planes: &mut [f64], out: &mut [Complex64]) {
    let n = t.bw.side();
    let b = t.bw.get();
    let nc = t.bw.so3_coeffs();
    let w = 2 * g;
    let np = t.half_pairs.len();
    so3_planes_group(t, f, g, planes);
    let mut res = vec![0.0; b * w];
    for (p, &(m, nn)) in t.half_pairs.iter().enumerate() {
        let j0 = m.abs().max(nn.abs()) as usize;
        let rows = t.wigner.pair_rows(m, nn);
        let lp = b - j0;
        gemm_strided(lp, n, w, 1.0, rows, n, false, &planes[p * w..], np * w, 0.0, &mut res, w);
        for li in 0..lp {
            let l = j0 + li;
            for c in 0..g {
                let v = Complex64::new(res[li * w + 2 * c], res[li * w + 2 * c + 1]);
                let spec = &mut out[c * nc..(c + 1) * nc];
                spec[so3_index(l, m, nn)] = v;
                if m != 0 || nn != 0 {
                    spec[so3_index(l, -m, -nn)] = v.conj() * parity(m + nn);
                }
            }
        }
    }
}

/// Synthesis of `g ≤ GROUP` channels from the half plane of their spectra.
fn so3_synthesis_group(t: &Tables, coeff: &[Complex64], g: usize, out: &mut [f64]) {
    let len = t.half_pairs.len() * t.bw.side() * 2 * g;
    with_buffer(&PLANES, len, |planes| so3_synthesis_via_planes(t, coeff, g, planes, out));
}

fn so3_synthesis_via_planes(t: &Tables, coeff: &[Complex64], g: usize, planes: &mut [f64], out: &mut [f64]) {
    let n = t.bw.side();
    let b = t.bw.get();
    let nc = t.bw.so3_coeffs();
    let w = 2 * g;
    let np = t.half_pairs.len();
    let mut weighted = vec![0.0; b * w];
    for (p, &(m, nn)) in t.half_pairs.iter().enumerate() {
        let j0 = m.abs().max(nn.abs()) as usize;
        let rows = t.wigner.pair_rows(m, nn);
        let lp = b - j0;
        for li in 0..lp {
            let l = j0 + li;
            let s = so3_synthesis_weight(l);
            for c in 0..g {
                let v = coeff[c * nc + so3_index(l, m, nn)] * s;
                weighted[li * w + 2 * c] = v.re;
                weighted[li * w + 2 * c + 1] = v.im;
            }
        }
        gemm_strided(n, lp, w, 1.0, rows, n, true, &weighted, w, 0.0, &mut planes[p * w..], np * w);
    }
    so3_signal_from_planes(t, planes, g, out);
}

/// Analysis of one SO(3) channel into a full (conjugate-symmetric) spectrum.
pub fn so3_analysis(t: &Tables, f: &[f64], out: &mut [Complex64]) {
    so3_analysis_group(t, f, 1, out);
}

/// Synthesis of one SO(3) channel; reads the half plane and assumes symmetry.
pub fn so3_synthesis(t: &Tables, coeff: &[Complex64], out: &mut [f64]) {
    so3_synthesis_group(t, coeff, 1, out);
}

/// Real-basis analysis of `count` channels stored back to back.
pub fn so3_analysis_real_multi(t: &Tables, f: &[f64], out: &mut [f64]) {
    let vol = t.bw.side().pow(3);
    let nc = t.bw.so3_coeffs();
    let count = f.len() / vol;
    assert_eq!(out.len(), count * nc, "coefficient buffer length");
    with_buffer(&SPECTRA, GROUP.min(count) * nc, |c| {
        for start in (0..count).step_by(GROUP) {
            let g = GROUP.min(count - start);
            so3_analysis_group(t, &f[start * vol..(start + g) * vol], g, c);
            for k in 0..g {
                real::so3_to_real(t.bw, &c[k * nc..(k + 1) * nc], &mut out[(start + k) * nc..(start + k + 1) * nc]);
            }
        }
    });
}

/// Real-basis synthesis of `count` channels stored back to back.
pub fn so3_synthesis_real_multi(t: &Tables, coeff: &[f64], out: &mut [f64]) {
    let vol = t.bw.side().pow(3);
    let nc = t.bw.so3_coeffs();
    let count = coeff.len() / nc;
    assert_eq!(out.len(), count * vol, "signal buffer length");
    with_buffer(&SPECTRA, GROUP.min(count) * nc, |c| {
        for start in (0..count).step_by(GROUP) {
            let g = GROUP.min(count - start);
            for k in 0..g {
                real::so3_from_real(t.bw, &coeff[(start + k) * nc..(start + k + 1) * nc], &mut c[k * nc..(k + 1) * nc]);
            }
            so3_synthesis_group(t, c, g, &mut out[start * vol..(start + g) * vol]);
        }
    });
}

/// Adjoint of [`so3_analysis_real_multi`]: `Aᵀ y = diag(q) · B · diag(1/c) y`.
pub fn so3_analysis_real_adjoint_multi(t: &Tables, grad_coeff: &[f64], out: &mut [f64]) {
    let mut scaled = grad_coeff.to_vec();
    for chunk in scaled.chunks_exact_mut(t.bw.so3_coeffs()) {
        scale_so3_degrees(t.bw, chunk, |l| 1.0 / so3_synthesis_weight(l));
    }
    so3_synthesis_real_multi(t, &scaled, out);
    scale_so3_rows(t, out, |q| q);
}

/// Adjoint of [`so3_synthesis_real_multi`]: `Bᵀ z = diag(c) · A · diag(1/q) z`.
pub fn so3_synthesis_real_adjoint_multi(t: &Tables, grad_signal: &[f64], out: &mut [f64]) {
    let mut scaled = grad_signal.to_vec();
    scale_so3_rows(t, &mut scaled, |q| 1.0 / q);
    so3_analysis_real_multi(t, &scaled, out);
    for chunk in out.chunks_exact_mut(t.bw.so3_coeffs()) {
        scale_so3_degrees(t.bw, chunk, so3_synthesis_weight);
    }
}

fn scale_so3_rows(t: &Tables, signal: &mut [f64], f: impl Fn(f64) -> f64) {
    let n = t.bw.side();
    for (idx, slab) in signal.chunks_exact_mut(n * n).enumerate() {
        let s = f(t.so3_quad(idx % n));
        slab.iter_mut().for_each(|v| *v *= s);
    }
}

/// Real-basis S² analysis of one channel (see [`real`]).
pub fn s2_analysis_real(t: &Tables, f: &[f64], out: &mut [f64]) {
    let mut c = vec![ZERO; t.bw.s2_coeffs()];
    s2_analysis(t, f, &mut c);
    real::s2_to_real(t.bw, &c, out);
}

pub fn s2_synthesis_real(t: &Tables, coeff: &[f64], out: &mut [f64]) {
    let mut c = vec![ZERO; t.bw.s2_coeffs()];
    real::s2_from_real(t.bw, coeff, &mut c);
    s2_synthesis(t, &c, out);
}

/// Real-basis SO(3) analysis of one channel.
pub fn so3_analysis_real(t: &Tables, f: &[f64], out: &mut [f64]) {
    so3_analysis_real_multi(t, f, out)
}

pub fn so3_synthesis_real(t: &Tables, coeff: &[f64], out: &mut [f64]) {
    so3_synthesis_real_multi(t, coeff, out)
}

pub fn so3_analysis_real_adjoint(t: &Tables, grad_coeff: &[f64], out: &mut [f64]) {
    so3_analysis_real_adjoint_multi(t, grad_coeff, out)
}

pub fn so3_synthesis_real_adjoint(t: &Tables, grad_signal: &[f64], out: &mut [f64]) {
    so3_synthesis_real_adjoint_multi(t, grad_signal, out)
}

/// Adjoint of [`s2_analysis_real`].
pub fn s2_analysis_real_adjoint(t: &Tables, grad_coeff: &[f64], out: &mut [f64]) {
    s2_synthesis_real(t, grad_coeff, out);
    let n = t.bw.side();
    for j in 0..n {
        let q = t.s2_quad(j);
        out[j * n..(j + 1) * n].iter_mut().for_each(|v| *v *= q);
    }
}

/// Adjoint of [`s2_synthesis_real`]: `Bᵀ z = A · diag(1/q) z`.
pub fn s2_synthesis_real_adjoint(t: &Tables, grad_signal: &[f64], out: &mut [f64]) {
    let n = t.bw.side();
    let mut scaled = grad_signal.to_vec();
    for j in 0..n {
        let q = t.s2_quad(j);
        scaled[j * n..(j + 1) * n].iter_mut().for_each(|v| *v /= q);
    }
    s2_analysis_real(t, &scaled, out);
}

fn scale_so3_degrees(bw: BandLimit, coeff: &mut [f64], factor: impl Fn(usize) -> f64) {
    for l in 0..bw.get() {
        let o = so3_block_offset(l);
        let f = factor(l);
        coeff[o..o + (2 * l + 1) * (2 * l + 1)].iter_mut().for_each(|v| *v *= f);
    }
}

/// Spherical Fourier transform `f̂_l^m = Σ w_j (π/bw) f(θ_j, φ_k) conj(Y_l^m)`.
pub fn sft(signal: &S2Signal) -> S2Spectrum {
    let bw = signal.bw();
    let t = Tables::get(bw);
    let mut spec = S2Spectrum::zeros(bw, signal.channels());
    for c in 0..signal.channels() {
        s2_analysis(&t, signal.channel(c), spec.channel_mut(c));
    }
    spec
}

/// Inverse spherical Fourier transform; rejects spectra that are not the
/// spectrum of a real signal.
pub fn isft(spectrum: &S2Spectrum) -> Result<S2Signal> {
    let defect = spectrum.symmetry_defect();
    if defect > SYMMETRY_TOL {
        return Err(Error::SymmetryViolation(defect));
    }
    let bw = spectrum.bw();
    let t = Tables::get(bw);
    let mut out = S2Signal::zeros(bw, spectrum.channels());
    for c in 0..spectrum.channels() {
        s2_synthesis(&t, spectrum.channel(c), out.channel_mut(c));
    }
    Ok(out)
}

/// SO(3) Fourier transform `f̂^l_{mn} = ∫ f conj(D^l_{mn}) dμ` on the grid.
pub fn so3ft(signal: &SO3Signal) -> SO3Spectrum {
    let bw = signal.bw();
    let t = Tables::get(bw);
    let mut spec = SO3Spectrum::zeros(bw, signal.channels());
    for c in 0..signal.channels() {
        so3_analysis(&t, signal.channel(c), spec.channel_mut(c));
    }
    spec
}

/// Inverse SO(3) transform `f = Σ (2l+1)/(8π²) f̂^l_{mn} D^l_{mn}`.
pub fn iso3ft(spectrum: &SO3Spectrum) -> Result<SO3Signal> {
    let defect = spectrum.symmetry_defect();
    if defect > SYMMETRY_TOL {
        return Err(Error::SymmetryViolation(defect));
    }
    let bw = spectrum.bw();
    let t = Tables::get(bw);
    let mut out = SO3Signal::zeros(bw, spectrum.channels());
    for c in 0..spectrum.channels() {
        so3_synthesis(&t, spectrum.channel(c), out.channel_mut(c));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sphere::polar_angle;

    fn bw(b: usize) -> BandLimit {
        BandLimit::new(b).unwrap()
    }

    #[test]
    fn constant_signal() {
        let f = S2Signal::from_fn(bw(6), 1, |_, _, _| 1.0);
        let s = sft(&f);
        assert!((s.get(0, 0, 0).re - (4.0 * PI).sqrt()).abs() < 1e-10);
        for (i, c) in s.coeffs().iter().enumerate().skip(1) {
            assert!(c.norm() < 1e-10, "coefficient {i} = {c}");
        }
    }

    #[test]
    fn cos_theta_signal() {
        let f = S2Signal::from_fn(bw(6), 1, |_, t, _| t.cos());
        let s = sft(&f);
        let want = (4.0 * PI / 3.0).sqrt();
        assert!((want - 2.0466534).abs() < 1e-7);
        for l in 0..6usize {
            for m in -(l as i64)..=l as i64 {
                let v = s.get(0, l, m);
                let expect = if (l, m) == (1, 0) { want } else { 0.0 };
                assert!((v.re - expect).abs() < 1e-10 && v.im.abs() < 1e-10);
            }
        }
    }

    #[test]
    fn isft_of_degree_zero_and_zero() {
        let mut s = S2Spectrum::zeros(bw(4), 1);
        let f = isft(&s).unwrap();
        assert!(f.values().iter().all(|&v| v == 0.0));
        s.set(0, 0, 0, Complex64::new((4.0 * PI).sqrt(), 0.0));
        let f = isft(&s).unwrap();
        assert!(f.values().iter().all(|&v| (v - 1.0).abs() < 1e-12));
    }

    #[test]
    fn isft_rejects_asymmetric() {
        let mut s = S2Spectrum::zeros(bw(4), 1);
        s.set(0, 2, 1, Complex64::new(1.0, 0.0));
        assert!(matches!(isft(&s), Err(Error::SymmetryViolation(_))));
        let mut s = SO3Spectrum::zeros(bw(3), 1);
        s.set(0, 1, 1, 0, Complex64::new(0.0, 1.0));
        assert!(matches!(iso3ft(&s), Err(Error::SymmetryViolation(_))));
    }

    #[test]
    fn so3_constant_and_cos_beta() {
        let b = bw(4);
        let one = SO3Signal::from_fn(b, 1, |_, _, _, _| 1.0);
        let s = so3ft(&one);
        assert!((s.get(0, 0, 0, 0).re - 8.0 * PI * PI).abs() < 1e-9);
        for l in 1..4 {
            assert!(s.block(0, l).iter().all(|c| c.norm() < 1e-10));
        }
        let cb = SO3Signal::from_fn(b, 1, |_, _, beta, _| beta.cos());
        let s = so3ft(&cb);
        for l in 0..4usize {
            let li = l as i64;
            for m in -li..=li {
                for n in -li..=li {
                    let v = s.get(0, l, m, n);
                    let expect = if (l, m, n) == (1, 0, 0) { 8.0 * PI * PI / 3.0 } else { 0.0 };
                    assert!((v - expect).norm() < 1e-9, "l={l} m={m} n={n} v={v}");
                }
            }
        }
    }

    #[test]
    fn iso3ft_degree_zero_is_constant() {
        let mut s = SO3Spectrum::zeros(bw(3), 1);
        assert!(iso3ft(&s).unwrap().values().iter().all(|&v| v == 0.0));
        s.set(0, 0, 0, 0, Complex64::new(8.0 * PI * PI, 0.0));
        assert!(iso3ft(&s).unwrap().values().iter().all(|&v| (v - 1.0).abs() < 1e-12));
    }

    #[test]
    fn so3_real_adjoints() {
        // <A x, y> = <x, Aᵀ y> and likewise for synthesis.
        let b = bw(3);
        let t = Tables::get(b);
        let nv = 6 * 6 * 6;
        let nc = b.so3_coeffs();
        let x: Vec<f64> = (0..nv).map(|i| ((i * 37 % 11) as f64 - 5.0) / 7.0).collect();
        let y: Vec<f64> = (0..nc).map(|i| ((i * 13 % 7) as f64 - 3.0) / 5.0).collect();
        let mut ax = vec![0.0; nc];
        so3_analysis_real(&t, &x, &mut ax);
        let mut aty = vec![0.0; nv];
        so3_analysis_real_adjoint(&t, &y, &mut aty);
        let lhs: f64 = ax.iter().zip(&y).map(|(a, b)| a * b).sum();
        let rhs: f64 = x.iter().zip(&aty).map(|(a, b)| a * b).sum();
        assert!((lhs - rhs).abs() < 1e-10 * lhs.abs().max(1.0), "{lhs} vs {rhs}");

        let mut by = vec![0.0; nv];
        so3_synthesis_real(&t, &y, &mut by);
        let mut btx = vec![0.0; nc];
        so3_synthesis_real_adjoint(&t, &x, &mut btx);
        let lhs: f64 = by.iter().zip(&x).map(|(a, b)| a * b).sum();
        let rhs: f64 = y.iter().zip(&btx).map(|(a, b)| a * b).sum();
        assert!((lhs - rhs).abs() < 1e-10 * lhs.abs().max(1.0), "{lhs} vs {rhs}");
    }

    #[test]
    fn s2_real_adjoints() {
        let b = bw(4);
        let t = Tables::get(b);
        let (nv, nc) = (64, b.s2_coeffs());
        let x: Vec<f64> = (0..nv).map(|i| ((i * 37 % 11) as f64 - 5.0) / 7.0).collect();
        let y: Vec<f64> = (0..nc).map(|i| ((i * 13 % 7) as f64 - 3.0) / 5.0).collect();
        let (mut ax, mut aty) = (vec![0.0; nc], vec![0.0; nv]);
        s2_analysis_real(&t, &x, &mut ax);
        s2_analysis_real_adjoint(&t, &y, &mut aty);
        let lhs: f64 = ax.iter().zip(&y).map(|(a, b)| a * b).sum();
        let rhs: f64 = x.iter().zip(&aty).map(|(a, b)| a * b).sum();
        assert!((lhs - rhs).abs() < 1e-12 * lhs.abs().max(1.0), "{lhs} vs {rhs}");
        let (mut by, mut btx) = (vec![0.0; nv], vec![0.0; nc]);
        s2_synthesis_real(&t, &y, &mut by);
        s2_synthesis_real_adjoint(&t, &x, &mut btx);
        let lhs: f64 = by.iter().zip(&x).map(|(a, b)| a * b).sum();
        let rhs: f64 = y.iter().zip(&btx).map(|(a, b)| a * b).sum();
        assert!((lhs - rhs).abs() < 1e-12 * lhs.abs().max(1.0), "{lhs} vs {rhs}");
    }

    #[test]
    fn paired_channels_match_single() {
        let b = bw(4);
        let t = Tables::get(b);
        let vol = 8 * 8 * 8;
        let nc = b.so3_coeffs();
        let f: Vec<f64> = (0..3 * vol).map(|i| ((i * 29 % 17) as f64 - 8.0) / 9.0).collect();
        let mut multi = vec![0.0; 3 * nc];
        so3_analysis_real_multi(&t, &f, &mut multi);
        let mut back_multi = vec![0.0; 3 * vol];
        so3_synthesis_real_multi(&t, &multi, &mut back_multi);
        for c in 0..3 {
            let mut single = vec![ZERO; nc];
            so3_analysis(&t, &f[c * vol..(c + 1) * vol], &mut single);
            let mut r = vec![0.0; nc];
            real::so3_to_real(b, &single, &mut r);
            for (x, y) in r.iter().zip(&multi[c * nc..(c + 1) * nc]) {
                assert!((x - y).abs() < 1e-12);
            }
            let mut back = vec![0.0; vol];
            so3_synthesis(&t, &single, &mut back);
            for (x, y) in back.iter().zip(&back_multi[c * vol..(c + 1) * vol]) {
                assert!((x - y).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn tables_shared_per_bandwidth() {
        let a = Tables::get(bw(5));
        let b = Tables::get(bw(5));
        assert!(Arc::ptr_eq(&a, &b));
        assert!((a.wigner.get(0, 0, 0, 3) - 1.0).abs() < 1e-15);
        let _ = polar_angle(bw(5), 0);
    }
}
