//! Spectral convolutions, pooling and γ-integration.
//!
//! Everything here runs in the real orthonormal basis of
//! [`crate::harmonics::real`], with coefficients stored degree-major so that
//! each degree of a convolution is one dense matrix product over the batch:
//!
//! * [`SO3Batch`] degree `l` is a `(B·d) × (C·d)` matrix, row `(b, m)`, column `(c, n)`;
//! * [`S2Batch`] degree `l` is a `(B·d) × C` matrix, row `(b, m)`, column `c`;
//!
//! with `d = 2l + 1`.
//!
//! Conventions realized by the two convolutions:
//!
//! * [`s2_conv`]: `out(R) = ∫_{S²} f(ω) g(R⁻¹ω) dω`, spectrally
//!   `Ĥ^l_{mn} = 8π²/(2l+1) · conj(f̂_l^m) ĝ_l^n`;
//! * [`so3_conv`]: `out(R) = ∫_{SO(3)} f(Q) g(Q⁻¹R) dQ`, spectrally `Ĥ^l = F̂^l Ĝ^l`.

use std::f64::consts::PI;

use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::harmonics::real::{conj_sign, s2_from_real, s2_to_real, so3_from_real, so3_to_real};
use crate::harmonics::{
    s2_analysis_real, s2_analysis_real_adjoint, s2_synthesis_real, s2_synthesis_real_adjoint, so3_analysis_real_adjoint_multi,
    so3_analysis_real_multi, so3_synthesis_real_adjoint_multi, so3_synthesis_real_multi, Tables,
};
use crate::linalg::gemm;
use crate::sphere::{so3_block_offset, BandLimit, S2Signal, S2Spectrum, SO3Signal, SO3Spectrum};

#[inline]
fn dim(l: usize) -> usize {
    2 * l + 1
}

/// Degree-major real SO(3) coefficients of a batch of multi-channel signals.
#[derive(Debug, Clone, PartialEq)]
pub struct SO3Batch {
    bw: BandLimit,
    batch: usize,
    channels: usize,
    data: Vec<f64>,
}

impl SO3Batch {
    pub fn zeros(bw: BandLimit, batch: usize, channels: usize) -> Self {
        Self { bw, batch, channels, data: vec![0.0; batch * channels * bw.so3_coeffs()] }
    }

    pub fn bw(&self) -> BandLimit {
        self.bw
    }

    pub fn batch(&self) -> usize {
        self.batch
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    fn offset(&self, l: usize) -> usize {
        self.batch * self.channels * so3_block_offset(l)
    }

    pub fn block(&self, l: usize) -> &[f64] {
        let o = self.offset(l);
        &self.data[o..o + self.batch * self.channels * dim(l) * dim(l)]
    }

    pub fn block_mut(&mut self, l: usize) -> &mut [f64] {
        let o = self.offset(l);
        let len = self.batch * self.channels * dim(l) * dim(l);
        &mut self.data[o..o + len]
    }

    /// Copies one channel's coefficients (channel-major, blocks in order) in.
    fn scatter(&mut self, b: usize, c: usize, coeff: &[f64]) {
        let cd = self.channels;
        for l in 0..self.bw.get() {
            let d = dim(l);
            let src = &coeff[so3_block_offset(l)..so3_block_offset(l) + d * d];
            let blk = self.block_mut(l);
            for m in 0..d {
                let row = (b * d + m) * cd * d + c * d;
                blk[row..row + d].copy_from_slice(&src[m * d..(m + 1) * d]);
            }
        }
    }

    fn gather(&self, b: usize, c: usize, coeff: &mut [f64]) {
        let cd = self.channels;
        for l in 0..self.bw.get() {
            let d = dim(l);
            let dst = &mut coeff[so3_block_offset(l)..so3_block_offset(l) + d * d];
            let blk = self.block(l);
            for m in 0..d {
                let row = (b * d + m) * cd * d + c * d;
                dst[m * d..(m + 1) * d].copy_from_slice(&blk[row..row + d]);
            }
        }
    }

    fn map_channels(
        bw: BandLimit,
        batch: usize,
        channels: usize,
        signal: &[f64],
        f: fn(&Tables, &[f64], &mut [f64]),
    ) -> Self {
        let t = Tables::get(bw);
        let nc = bw.so3_coeffs();
        assert_eq!(signal.len(), batch * channels * bw.side().pow(3), "signal length");
        let mut coeff = vec![0.0; batch * channels * nc];
        f(&t, signal, &mut coeff);
        let mut out = Self::zeros(bw, batch, channels);
        for b in 0..batch {
            for c in 0..channels {
                let idx = b * channels + c;
                out.scatter(b, c, &coeff[idx * nc..(idx + 1) * nc]);
            }
        }
        out
    }

    fn map_back(&self, out: &mut [f64], f: fn(&Tables, &[f64], &mut [f64])) {
        let t = Tables::get(self.bw);
        let nc = self.bw.so3_coeffs();
        assert_eq!(out.len(), self.batch * self.channels * self.bw.side().pow(3), "signal length");
        let mut coeff = vec![0.0; self.batch * self.channels * nc];
        for b in 0..self.batch {
            for c in 0..self.channels {
                let idx = b * self.channels + c;
                self.gather(b, c, &mut coeff[idx * nc..(idx + 1) * nc]);
            }
        }
        f(&t, &coeff, out);
    }

    /// Analysis of `batch × channels` signals laid out `[b][c][j][k][l]`.
    pub fn analyze(bw: BandLimit, batch: usize, channels: usize, signal: &[f64]) -> Self {
        Self::map_channels(bw, batch, channels, signal, so3_analysis_real_multi)
    }

    /// Synthesis into `out`, laid out like the input of [`SO3Batch::analyze`].
    pub fn synthesize(&self, out: &mut [f64]) {
        self.map_back(out, so3_synthesis_real_multi)
    }

    /// Transpose of [`SO3Batch::analyze`] applied to coefficient gradients.
    pub fn analyze_adjoint(&self, out: &mut [f64]) {
        self.map_back(out, so3_analysis_real_adjoint_multi)
    }

    /// Transpose of [`SO3Batch::synthesize`] applied to signal gradients.
    pub fn synthesize_adjoint(bw: BandLimit, batch: usize, channels: usize, grad: &[f64]) -> Self {
        Self::map_channels(bw, batch, channels, grad, so3_synthesis_real_adjoint_multi)
    }

    /// Truncation (`bw_out < bw`) or zero-padding (`bw_out > bw`) of degrees.
    pub fn resized(&self, bw_out: BandLimit) -> Self {
        let mut out = Self::zeros(bw_out, self.batch, self.channels);
        let keep = out.data.len().min(self.data.len());
        out.data[..keep].copy_from_slice(&self.data[..keep]);
        out
    }

    /// Channel-major per-sample view as complex spectra.
    pub fn to_spectrum(&self, b: usize) -> SO3Spectrum {
        let mut spec = SO3Spectrum::zeros(self.bw, self.channels);
        let mut coeff = vec![0.0; self.bw.so3_coeffs()];
        for c in 0..self.channels {
            self.gather(b, c, &mut coeff);
            so3_from_real(self.bw, &coeff, spec.channel_mut(c));
        }
        spec
    }
}

/// Degree-major real S² coefficients of a batch of multi-channel signals.
#[derive(Debug, Clone, PartialEq)]
pub struct S2Batch {
    bw: BandLimit,
    batch: usize,
    channels: usize,
    data: Vec<f64>,
}

impl S2Batch {
    pub fn zeros(bw: BandLimit, batch: usize, channels: usize) -> Self {
        Self { bw, batch, channels, data: vec![0.0; batch * channels * bw.s2_coeffs()] }
    }

    pub fn bw(&self) -> BandLimit {
        self.bw
    }

    pub fn batch(&self) -> usize {
        self.batch
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn block(&self, l: usize) -> &[f64] {
        let o = self.batch * self.channels * l * l;
        &self.data[o..o + self.batch * self.channels * dim(l)]
    }

    pub fn block_mut(&mut self, l: usize) -> &mut [f64] {
        let o = self.batch * self.channels * l * l;
        let len = self.batch * self.channels * dim(l);
        &mut self.data[o..o + len]
    }

    /// Analysis of signals laid out `[b][c][j][k]`.
    pub fn analyze(bw: BandLimit, batch: usize, channels: usize, signal: &[f64]) -> Self {
        let t = Tables::get(bw);
        let plane = bw.side() * bw.side();
        assert_eq!(signal.len(), batch * channels * plane, "signal length");
        let mut out = Self::zeros(bw, batch, channels);
        let mut coeff = vec![0.0; bw.s2_coeffs()];
        for b in 0..batch {
            for c in 0..channels {
                let idx = b * channels + c;
                s2_analysis_real(&t, &signal[idx * plane..(idx + 1) * plane], &mut coeff);
                for l in 0..bw.get() {
                    let d = dim(l);
                    let blk = out.block_mut(l);
                    for m in 0..d {
                        blk[(b * d + m) * channels + c] = coeff[l * l + m];
                    }
                }
            }
        }
        out
    }

    fn gather(&self, b: usize, c: usize, coeff: &mut [f64]) {
        for l in 0..self.bw.get() {
            let d = dim(l);
            let blk = self.block(l);
            for m in 0..d {
                coeff[l * l + m] = blk[(b * d + m) * self.channels + c];
            }
        }
    }

    /// Synthesis into signals laid out `[b][c][j][k]`.
    pub fn synthesize(&self, out: &mut [f64]) {
        let t = Tables::get(self.bw);
        let plane = self.bw.side() * self.bw.side();
        let mut coeff = vec![0.0; self.bw.s2_coeffs()];
        for b in 0..self.batch {
            for c in 0..self.channels {
                let idx = b * self.channels + c;
                self.gather(b, c, &mut coeff);
                s2_synthesis_real(&t, &coeff, &mut out[idx * plane..(idx + 1) * plane]);
            }
        }
    }

    /// Transpose of [`S2Batch::synthesize`] applied to signal gradients.
    pub fn synthesize_adjoint(bw: BandLimit, batch: usize, channels: usize, grad: &[f64]) -> Self {
        let t = Tables::get(bw);
        let plane = bw.side() * bw.side();
        assert_eq!(grad.len(), batch * channels * plane, "signal length");
        let mut out = Self::zeros(bw, batch, channels);
        let mut coeff = vec![0.0; bw.s2_coeffs()];
        for b in 0..batch {
            for c in 0..channels {
                let idx = b * channels + c;
                s2_synthesis_real_adjoint(&t, &grad[idx * plane..(idx + 1) * plane], &mut coeff);
                out.scatter(b, c, &coeff);
            }
        }
        out
    }

    fn scatter(&mut self, b: usize, c: usize, coeff: &[f64]) {
        for l in 0..self.bw.get() {
            let d = dim(l);
            let channels = self.channels;
            let blk = self.block_mut(l);
            for m in 0..d {
                blk[(b * d + m) * channels + c] = coeff[l * l + m];
            }
        }
    }

    /// Transpose of [`S2Batch::analyze`].
    pub fn analyze_adjoint(&self, out: &mut [f64]) {
        let t = Tables::get(self.bw);
        let plane = self.bw.side() * self.bw.side();
        let mut coeff = vec![0.0; self.bw.s2_coeffs()];
        for b in 0..self.batch {
            for c in 0..self.channels {
                let idx = b * self.channels + c;
                self.gather(b, c, &mut coeff);
                s2_analysis_real_adjoint(&t, &coeff, &mut out[idx * plane..(idx + 1) * plane]);
            }
        }
    }
}

/// Length of a degree-major real S² kernel bank.
pub fn s2_kernel_len(bw: BandLimit, cin: usize, cout: usize) -> usize {
    cin * cout * bw.s2_coeffs()
}

/// Length of a degree-major real SO(3) kernel bank.
pub fn so3_kernel_len(bw: BandLimit, cin: usize, cout: usize) -> usize {
    cin * cout * bw.so3_coeffs()
}

fn s2_kernel_offset(l: usize, cin: usize, cout: usize) -> usize {
    cin * cout * l * l
}

fn so3_kernel_offset(l: usize, cin: usize, cout: usize) -> usize {
    cin * cout * so3_block_offset(l)
}

/// Gaussian spectral initialization, variance `1/(cin · bw² · (2l+1))` per degree.
pub fn s2_kernel_init(bw: BandLimit, cin: usize, cout: usize, rng: &mut impl Rng) -> Vec<f64> {
    let mut k = vec![0.0; s2_kernel_len(bw, cin, cout)];
    for l in 0..bw.get() {
        let o = s2_kernel_offset(l, cin, cout);
        let std = (1.0 / (cin * bw.get() * bw.get() * dim(l)) as f64).sqrt();
        let normal = Normal::new(0.0, std).expect("finite std");
        for v in &mut k[o..o + cin * cout * dim(l)] {
            *v = normal.sample(rng);
        }
    }
    k
}

/// As [`s2_kernel_init`], for SO(3) kernels.
pub fn so3_kernel_init(bw: BandLimit, cin: usize, cout: usize, rng: &mut impl Rng) -> Vec<f64> {
    let mut k = vec![0.0; so3_kernel_len(bw, cin, cout)];
    for l in 0..bw.get() {
        let o = so3_kernel_offset(l, cin, cout);
        let std = (1.0 / (cin * bw.get() * bw.get() * dim(l)) as f64).sqrt();
        let normal = Normal::new(0.0, std).expect("finite std");
        for v in &mut k[o..o + cin * cout * dim(l) * dim(l)] {
            *v = normal.sample(rng);
        }
    }
    k
}

fn s2_corr_scale(l: usize, r: usize, s: usize) -> f64 {
    let li = l as i64;
    8.0 * PI * PI / dim(l) as f64 * conj_sign(r as i64 - li) * conj_sign(s as i64 - li)
}

/// Spectral S²→SO(3) correlation at `bw_out`. `kernel` is degree-major with
/// degree `l` a `cin × (cout·d)` matrix.
pub fn s2_conv_forward(x: &S2Batch, kernel: &[f64], cout: usize, bw_out: BandLimit) -> SO3Batch {
    let (batch, cin) = (x.batch, x.channels);
    let mut y = SO3Batch::zeros(bw_out, batch, cout);
    for l in 0..bw_out.get() {
        let d = dim(l);
        let k = &kernel[s2_kernel_offset(l, cin, cout)..s2_kernel_offset(l, cin, cout) + cin * cout * d];
        let blk = y.block_mut(l);
        gemm(batch * d, cin, cout * d, 1.0, x.block(l), false, k, false, 0.0, blk);
        for b in 0..batch {
            for r in 0..d {
                let row = &mut blk[(b * d + r) * cout * d..(b * d + r + 1) * cout * d];
                for o in 0..cout {
                    for s in 0..d {
                        row[o * d + s] *= s2_corr_scale(l, r, s);
                    }
                }
            }
        }
    }
    y
}

/// Gradients of [`s2_conv_forward`] with respect to the kernel and (optionally) the input.
pub fn s2_conv_backward(
    x: &S2Batch,
    kernel: &[f64],
    cout: usize,
    dy: &SO3Batch,
    want_dx: bool,
) -> (Vec<f64>, Option<S2Batch>) {
    let (batch, cin) = (x.batch, x.channels);
    let mut dk = vec![0.0; kernel.len()];
    let mut dx = want_dx.then(|| S2Batch::zeros(x.bw, batch, cin));
    for l in 0..dy.bw.get() {
        let d = dim(l);
        let mut dm = dy.block(l).to_vec();
        for b in 0..batch {
            for r in 0..d {
                let row = &mut dm[(b * d + r) * cout * d..(b * d + r + 1) * cout * d];
                for o in 0..cout {
                    for s in 0..d {
                        row[o * d + s] *= s2_corr_scale(l, r, s);
                    }
                }
            }
        }
        let ko = s2_kernel_offset(l, cin, cout);
        let klen = cin * cout * d;
        gemm(cin, batch * d, cout * d, 1.0, x.block(l), true, &dm, false, 0.0, &mut dk[ko..ko + klen]);
        if let Some(dx) = dx.as_mut() {
            gemm(batch * d, cout * d, cin, 1.0, &dm, false, &kernel[ko..ko + klen], true, 0.0, dx.block_mut(l));
        }
    }
    (dk, dx)
}

/// Spectral SO(3) convolution. `kernel` degree `l` is a `(cin·d) × (cout·d)` matrix.
pub fn so3_conv_forward(x: &SO3Batch, kernel: &[f64], cout: usize) -> SO3Batch {
    let (batch, cin) = (x.batch, x.channels);
    let mut y = SO3Batch::zeros(x.bw, batch, cout);
    for l in 0..x.bw.get() {
        let d = dim(l);
        let ko = so3_kernel_offset(l, cin, cout);
        let k = &kernel[ko..ko + cin * cout * d * d];
        gemm(batch * d, cin * d, cout * d, 1.0, x.block(l), false, k, false, 0.0, y.block_mut(l));
    }
    y
}

/// Gradients of [`so3_conv_forward`].
pub fn so3_conv_backward(
    x: &SO3Batch,
    kernel: &[f64],
    cout: usize,
    dy: &SO3Batch,
    want_dx: bool,
) -> (Vec<f64>, Option<SO3Batch>) {
    let (batch, cin) = (x.batch, x.channels);
    let mut dk = vec![0.0; kernel.len()];
    let mut dx = want_dx.then(|| SO3Batch::zeros(x.bw, batch, cin));
    for l in 0..x.bw.get() {
        let d = dim(l);
        let ko = so3_kernel_offset(l, cin, cout);
        let klen = cin * cout * d * d;
        gemm(cin * d, batch * d, cout * d, 1.0, x.block(l), true, dy.block(l), false, 0.0, &mut dk[ko..ko + klen]);
        if let Some(dx) = dx.as_mut() {
            gemm(batch * d, cout * d, cin * d, 1.0, dy.block(l), false, &kernel[ko..ko + klen], true, 0.0, dx.block_mut(l));
        }
    }
    (dk, dx)
}

/// Channel concatenation `[a | b]` of two batches at one bandwidth.
pub fn concat_channels(a: &SO3Batch, b: &SO3Batch) -> SO3Batch {
    assert!(a.bw == b.bw && a.batch == b.batch, "concat operands differ in bw or batch");
    let (c1, c2) = (a.channels, b.channels);
    let mut out = SO3Batch::zeros(a.bw, a.batch, c1 + c2);
    for l in 0..a.bw.get() {
        let d = dim(l);
        let (ba, bb) = (a.block(l), b.block(l));
        let blk = out.block_mut(l);
        for row in 0..a.batch * d {
            let dst = &mut blk[row * (c1 + c2) * d..(row + 1) * (c1 + c2) * d];
            dst[..c1 * d].copy_from_slice(&ba[row * c1 * d..(row + 1) * c1 * d]);
            dst[c1 * d..].copy_from_slice(&bb[row * c2 * d..(row + 1) * c2 * d]);
        }
    }
    out
}

/// Inverse of [`concat_channels`]: the first `c1` channels and the rest.
pub fn split_channels(x: &SO3Batch, c1: usize) -> (SO3Batch, SO3Batch) {
    let c2 = x.channels - c1;
    let mut a = SO3Batch::zeros(x.bw, x.batch, c1);
    let mut b = SO3Batch::zeros(x.bw, x.batch, c2);
    for l in 0..x.bw.get() {
        let d = dim(l);
        let src = x.block(l);
        let (ba, bb) = (a.block_mut(l), b.block_mut(l));
        for row in 0..x.batch * d {
            let s = &src[row * (c1 + c2) * d..(row + 1) * (c1 + c2) * d];
            ba[row * c1 * d..(row + 1) * c1 * d].copy_from_slice(&s[..c1 * d]);
            bb[row * c2 * d..(row + 1) * c2 * d].copy_from_slice(&s[c1 * d..]);
        }
    }
    (a, b)
}

/// Factor `c_l σ_r` taking real SO(3) coefficient `(l, r, 0)` to real S²
/// coefficient `(l, r)` under γ-integration.
fn gamma_factor(l: usize, r: usize) -> f64 {
    (dim(l) as f64 / (4.0 * PI)).sqrt() * conj_sign(r as i64 - l as i64)
}

/// γ-integration in the spectral domain: only the `n = 0` column survives.
/// Agrees with [`integrate_gamma`] on band-limited signals.
pub fn integrate_gamma_spectral(x: &SO3Batch) -> S2Batch {
    let (batch, ch) = (x.batch, x.channels);
    let mut out = S2Batch::zeros(x.bw, batch, ch);
    for l in 0..x.bw.get() {
        let d = dim(l);
        let src = x.block(l);
        let blk = out.block_mut(l);
        for b in 0..batch {
            for r in 0..d {
                let row = b * d + r;
                for c in 0..ch {
                    blk[row * ch + c] = gamma_factor(l, r) * src[row * ch * d + c * d + l];
                }
            }
        }
    }
    out
}

/// Transpose of [`integrate_gamma_spectral`].
pub fn integrate_gamma_spectral_adjoint(g: &S2Batch) -> SO3Batch {
    let (batch, ch) = (g.batch, g.channels);
    let mut out = SO3Batch::zeros(g.bw, batch, ch);
    for l in 0..g.bw.get() {
        let d = dim(l);
        let src = g.block(l);
        let blk = out.block_mut(l);
        for b in 0..batch {
            for r in 0..d {
                let row = b * d + r;
                for c in 0..ch {
                    blk[row * ch * d + c * d + l] = gamma_factor(l, r) * src[row * ch + c];
                }
            }
        }
    }
    out
}

/// Kernels of an S²→SO(3) layer as complex spectra; kernel `(o, i)` is channel `o·in + i`.
#[derive(Debug, Clone, PartialEq)]
pub struct S2KernelBank {
    pub in_channels: usize,
    pub out_channels: usize,
    pub weights: S2Spectrum,
}

impl S2KernelBank {
    pub fn new(in_channels: usize, out_channels: usize, weights: S2Spectrum) -> Result<Self> {
        if weights.channels() != in_channels * out_channels {
            return Err(Error::ShapeMismatch(format!(
                "kernel bank has {} spectra, expected {}×{}",
                weights.channels(),
                out_channels,
                in_channels
            )));
        }
        Ok(Self { in_channels, out_channels, weights })
    }

    pub fn bw(&self) -> BandLimit {
        self.weights.bw()
    }

    pub fn random(bw: BandLimit, in_channels: usize, out_channels: usize, rng: &mut impl Rng) -> Self {
        Self::from_real(bw, in_channels, out_channels, &s2_kernel_init(bw, in_channels, out_channels, rng))
    }

    /// Degree-major real layout used by [`s2_conv_forward`].
    pub fn to_real(&self) -> Vec<f64> {
        let (cin, cout, bw) = (self.in_channels, self.out_channels, self.bw());
        let mut k = vec![0.0; s2_kernel_len(bw, cin, cout)];
        let mut real = vec![0.0; bw.s2_coeffs()];
        for o in 0..cout {
            for i in 0..cin {
                s2_to_real(bw, self.weights.channel(o * cin + i), &mut real);
                for l in 0..bw.get() {
                    let d = dim(l);
                    let base = s2_kernel_offset(l, cin, cout) + i * cout * d + o * d;
                    k[base..base + d].copy_from_slice(&real[l * l..l * l + d]);
                }
            }
        }
        k
    }

    pub fn from_real(bw: BandLimit, in_channels: usize, out_channels: usize, k: &[f64]) -> Self {
        let (cin, cout) = (in_channels, out_channels);
        let mut weights = S2Spectrum::zeros(bw, cin * cout);
        let mut real = vec![0.0; bw.s2_coeffs()];
        for o in 0..cout {
            for i in 0..cin {
                for l in 0..bw.get() {
                    let d = dim(l);
                    let base = s2_kernel_offset(l, cin, cout) + i * cout * d + o * d;
                    real[l * l..l * l + d].copy_from_slice(&k[base..base + d]);
                }
                s2_from_real(bw, &real, weights.channel_mut(o * cin + i));
            }
        }
        Self { in_channels, out_channels, weights }
    }
}

/// Kernels of an SO(3) layer as complex spectra; kernel `(o, i)` is channel `o·in + i`.
#[derive(Debug, Clone, PartialEq)]
pub struct SO3KernelBank {
    pub in_channels: usize,
    pub out_channels: usize,
    pub weights: SO3Spectrum,
}

impl SO3KernelBank {
    pub fn new(in_channels: usize, out_channels: usize, weights: SO3Spectrum) -> Result<Self> {
        if weights.channels() != in_channels * out_channels {
            return Err(Error::ShapeMismatch(format!(
                "kernel bank has {} spectra, expected {}×{}",
                weights.channels(),
                out_channels,
                in_channels
            )));
        }
        Ok(Self { in_channels, out_channels, weights })
    }

    pub fn bw(&self) -> BandLimit {
        self.weights.bw()
    }

    pub fn random(bw: BandLimit, in_channels: usize, out_channels: usize, rng: &mut impl Rng) -> Self {
        Self::from_real(bw, in_channels, out_channels, &so3_kernel_init(bw, in_channels, out_channels, rng))
    }

    /// Degree-major real layout used by [`so3_conv_forward`].
    pub fn to_real(&self) -> Vec<f64> {
        let (cin, cout, bw) = (self.in_channels, self.out_channels, self.bw());
        let mut k = vec![0.0; so3_kernel_len(bw, cin, cout)];
        let mut real = vec![0.0; bw.so3_coeffs()];
        for o in 0..cout {
            for i in 0..cin {
                so3_to_real(bw, self.weights.channel(o * cin + i), &mut real);
                for l in 0..bw.get() {
                    let d = dim(l);
                    let src = &real[so3_block_offset(l)..so3_block_offset(l) + d * d];
                    let base = so3_kernel_offset(l, cin, cout);
                    for n in 0..d {
                        let row = base + (i * d + n) * cout * d + o * d;
                        k[row..row + d].copy_from_slice(&src[n * d..(n + 1) * d]);
                    }
                }
            }
        }
        k
    }

    pub fn from_real(bw: BandLimit, in_channels: usize, out_channels: usize, k: &[f64]) -> Self {
        let (cin, cout) = (in_channels, out_channels);
        let mut weights = SO3Spectrum::zeros(bw, cin * cout);
        let mut real = vec![0.0; bw.so3_coeffs()];
        for o in 0..cout {
            for i in 0..cin {
                for l in 0..bw.get() {
                    let d = dim(l);
                    let base = so3_kernel_offset(l, cin, cout);
                    let dst = &mut real[so3_block_offset(l)..so3_block_offset(l) + d * d];
                    for n in 0..d {
                        let row = base + (i * d + n) * cout * d + o * d;
                        dst[n * d..(n + 1) * d].copy_from_slice(&k[row..row + d]);
                    }
                }
                so3_from_real(bw, &real, weights.channel_mut(o * cin + i));
            }
        }
        Self { in_channels, out_channels, weights }
    }
}

fn check_channels(got: usize, want: usize) -> Result<()> {
    if got != want {
        return Err(Error::ShapeMismatch(format!("input has {got} channels, kernels expect {want}")));
    }
    Ok(())
}

/// Spherical correlation lifting an S² signal to SO(3) at bandwidth `bw_out`.
pub fn s2_conv(input: &S2Signal, kernels: &S2KernelBank, bw_out: BandLimit) -> Result<SO3Signal> {
    let bw = input.bw();
    if kernels.bw() != bw {
        return Err(Error::BandwidthMismatch(format!("kernel bw {} vs input bw {}", kernels.bw(), bw)));
    }
    if bw_out > bw {
        return Err(Error::BandwidthMismatch(format!("output bw {bw_out} exceeds input bw {bw}")));
    }
    check_channels(input.channels(), kernels.in_channels)?;
    let x = S2Batch::analyze(bw, 1, input.channels(), input.values());
    let y = s2_conv_forward(&x, &kernels.to_real(), kernels.out_channels, bw_out);
    let mut out = SO3Signal::zeros(bw_out, kernels.out_channels);
    y.synthesize(out.values_mut());
    Ok(out)
}

/// Group convolution on SO(3); bandwidth is preserved.
pub fn so3_conv(input: &SO3Signal, kernels: &SO3KernelBank) -> Result<SO3Signal> {
    let bw = input.bw();
    if kernels.bw() != bw {
        return Err(Error::BandwidthMismatch(format!("kernel bw {} vs input bw {}", kernels.bw(), bw)));
    }
    check_channels(input.channels(), kernels.in_channels)?;
    let x = SO3Batch::analyze(bw, 1, input.channels(), input.values());
    let y = so3_conv_forward(&x, &kernels.to_real(), kernels.out_channels);
    let mut out = SO3Signal::zeros(bw, kernels.out_channels);
    y.synthesize(out.values_mut());
    Ok(out)
}

fn resample(input: &SO3Signal, bw_out: BandLimit) -> SO3Signal {
    let x = SO3Batch::analyze(input.bw(), 1, input.channels(), input.values());
    let mut out = SO3Signal::zeros(bw_out, input.channels());
    x.resized(bw_out).synthesize(out.values_mut());
    out
}

/// Spectral low-pass: keep degrees `l < bw_out` and resample on the smaller grid.
pub fn so3_pool(input: &SO3Signal, bw_out: BandLimit) -> Result<SO3Signal> {
    if bw_out > input.bw() {
        return Err(Error::BandwidthMismatch(format!("pool to {bw_out} from smaller bw {}", input.bw())));
    }
    Ok(resample(input, bw_out))
}

/// Spectral zero-padding to `bw_out` and resampling on the larger grid.
pub fn so3_unpool(input: &SO3Signal, bw_out: BandLimit) -> Result<SO3Signal> {
    if bw_out < input.bw() {
        return Err(Error::BandwidthMismatch(format!("unpool to {bw_out} from larger bw {}", input.bw())));
    }
    Ok(resample(input, bw_out))
}

/// Raw γ-integration of `channels` volumes into planes: `out[j,k] = (π/bw) Σ_l in[j,k,l]`.
pub fn integrate_gamma_raw(bw: BandLimit, input: &[f64], out: &mut [f64]) {
    let n = bw.side();
    let step = bw.step();
    for (dst, row) in out.iter_mut().zip(input.chunks_exact(n)) {
        *dst = step * row.iter().sum::<f64>();
    }
}

/// Transpose of [`integrate_gamma_raw`].
pub fn integrate_gamma_raw_adjoint(bw: BandLimit, grad: &[f64], out: &mut [f64]) {
    let n = bw.side();
    let step = bw.step();
    for (g, row) in grad.iter().zip(out.chunks_exact_mut(n)) {
        row.fill(step * g);
    }
}

/// Integrates out γ; `(β, α)` become `(θ, φ)` of the output grid.
pub fn integrate_gamma(input: &SO3Signal) -> S2Signal {
    let bw = input.bw();
    let mut out = S2Signal::zeros(bw, input.channels());
    integrate_gamma_raw(bw, input.values(), out.values_mut());
    out
}
