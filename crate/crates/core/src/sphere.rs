//! Equiangular grids on S² and SO(3), and the containers for sampled signals
//! and their harmonic spectra.
//!
//! All grids follow the Driscoll-Healy / SOFT layout: for bandwidth `B` every
//! sampled axis has `2B` points, polar angles sit at `π(2j+1)/(4B)` and the
//! periodic angles at `πk/B`.

use std::f64::consts::PI;
use std::io::{Read, Write};

use num_complex::Complex64;

use crate::error::{Error, Result};

/// Spherical bandwidth: harmonic degrees `0..bw` are representable and every
/// sampled axis has `2·bw` points.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct BandLimit(usize);

impl BandLimit {
    pub fn new(bw: usize) -> Result<Self> {
        if bw == 0 {
            return Err(Error::InvalidBandwidth(bw));
        }
        Ok(Self(bw))
    }

    #[inline]
    pub fn get(self) -> usize {
        self.0
    }

    /// Number of samples along each grid axis.
    #[inline]
    pub fn side(self) -> usize {
        2 * self.0
    }

    /// Spherical-harmonic coefficients per channel, `Σ_{l<bw} (2l+1) = bw²`.
    #[inline]
    pub fn s2_coeffs(self) -> usize {
        self.0 * self.0
    }

    /// Wigner coefficients per channel, `Σ_{l<bw} (2l+1)²`.
    #[inline]
    pub fn so3_coeffs(self) -> usize {
        so3_block_offset(self.0)
    }

    /// Uniform step of the periodic axes, `π/bw`.
    #[inline]
    pub fn step(self) -> f64 {
        PI / self.0 as f64
    }
}

impl std::fmt::Display for BandLimit {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Polar sample `π(2j+1)/(4bw)`.
#[inline]
pub fn polar_angle(bw: BandLimit, j: usize) -> f64 {
    PI * (2 * j + 1) as f64 / (4 * bw.get()) as f64
}

/// Periodic sample `πk/bw`.
#[inline]
pub fn periodic_angle(bw: BandLimit, k: usize) -> f64 {
    PI * k as f64 / bw.get() as f64
}

/// Offset of degree `l` inside a flattened S² spectrum (`l²`).
#[inline]
pub fn s2_index(l: usize, m: i64) -> usize {
    l * l + (m + l as i64) as usize
}

/// Offset of block `l` inside a flattened SO(3) spectrum, `Σ_{l'<l} (2l'+1)²`.
#[inline]
pub fn so3_block_offset(l: usize) -> usize {
    (4 * l * l * l - l) / 3
}

#[inline]
pub fn so3_index(l: usize, m: i64, n: i64) -> usize {
    let d = 2 * l + 1;
    let li = l as i64;
    so3_block_offset(l) + (m + li) as usize * d + (n + li) as usize
}

/// Driscoll-Healy quadrature weights for the polar angles, normalized so that
/// `Σ_j w_j · 2π = 4π`.
pub fn dh_weights(bw: BandLimit) -> Vec<f64> {
    let b = bw.get();
    let mut w: Vec<f64> = (0..bw.side())
        .map(|j| {
            let theta = polar_angle(bw, j);
            let s: f64 = (0..b)
                .map(|k| ((2 * k + 1) as f64 * theta).sin() / (2 * k + 1) as f64)
                .sum();
            theta.sin() * s
        })
        .collect();
    let total: f64 = w.iter().sum();
    for x in &mut w {
        *x *= 2.0 / total;
    }
    w
}

/// Equiangular sampling of S².
#[derive(Debug, Clone, PartialEq)]
pub struct S2Grid {
    pub bw: BandLimit,
    pub theta: Vec<f64>,
    pub phi: Vec<f64>,
    /// Per-row polar quadrature weight; the azimuthal weight is `π/bw`.
    pub quad_weight: Vec<f64>,
}

pub fn make_s2_grid(bw: BandLimit) -> S2Grid {
    let n = bw.side();
    S2Grid {
        bw,
        theta: (0..n).map(|j| polar_angle(bw, j)).collect(),
        phi: (0..n).map(|k| periodic_angle(bw, k)).collect(),
        quad_weight: dh_weights(bw),
    }
}

/// Euler-angle sampling of SO(3) (ZYZ, `R = Rz(α)·Ry(β)·Rz(γ)`).
#[derive(Debug, Clone, PartialEq)]
pub struct SO3Grid {
    pub bw: BandLimit,
    pub alpha: Vec<f64>,
    pub beta: Vec<f64>,
    pub gamma: Vec<f64>,
    pub quad_weight: Vec<f64>,
}

pub fn make_so3_grid(bw: BandLimit) -> SO3Grid {
    let n = bw.side();
    let periodic: Vec<f64> = (0..n).map(|k| periodic_angle(bw, k)).collect();
    SO3Grid {
        bw,
        alpha: periodic.clone(),
        beta: (0..n).map(|j| polar_angle(bw, j)).collect(),
        gamma: periodic,
        quad_weight: dh_weights(bw),
    }
}

/// Real multi-channel signal on the S² grid, indexed `[c, j(θ), k(φ)]`.
#[derive(Debug, Clone, PartialEq)]
pub struct S2Signal {
    bw: BandLimit,
    channels: usize,
    values: Vec<f64>,
}

impl S2Signal {
    pub fn zeros(bw: BandLimit, channels: usize) -> Self {
        let n = bw.side();
        Self { bw, channels, values: vec![0.0; channels * n * n] }
    }

    pub fn from_vec(bw: BandLimit, channels: usize, values: Vec<f64>) -> Result<Self> {
        let n = bw.side();
        if channels == 0 || values.len() != channels * n * n {
            return Err(Error::ShapeMismatch(format!(
                "S2 signal with {channels} channels at bw {bw} needs {} values, got {}",
                channels * n * n,
                values.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::ShapeMismatch("S2 signal contains non-finite values".into()));
        }
        Ok(Self { bw, channels, values })
    }

    /// Samples `f(θ, φ)` for every channel.
    pub fn from_fn(bw: BandLimit, channels: usize, f: impl Fn(usize, f64, f64) -> f64) -> Self {
        let n = bw.side();
        let mut values = Vec::with_capacity(channels * n * n);
        for c in 0..channels {
            for j in 0..n {
                let theta = polar_angle(bw, j);
                for k in 0..n {
                    values.push(f(c, theta, periodic_angle(bw, k)));
                }
            }
        }
        Self { bw, channels, values }
    }

    #[inline]
    pub fn bw(&self) -> BandLimit {
        self.bw
    }
    #[inline]
    pub fn channels(&self) -> usize {
        self.channels
    }
    pub fn grid(&self) -> S2Grid {
        make_s2_grid(self.bw)
    }
    #[inline]
    pub fn values(&self) -> &[f64] {
        &self.values
    }
    #[inline]
    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }
    pub fn into_vec(self) -> Vec<f64> {
        self.values
    }
    #[inline]
    pub fn plane_len(&self) -> usize {
        self.bw.side() * self.bw.side()
    }
    pub fn channel(&self, c: usize) -> &[f64] {
        let p = self.plane_len();
        &self.values[c * p..(c + 1) * p]
    }
    pub fn channel_mut(&mut self, c: usize) -> &mut [f64] {
        let p = self.plane_len();
        &mut self.values[c * p..(c + 1) * p]
    }
    #[inline]
    pub fn get(&self, c: usize, j: usize, k: usize) -> f64 {
        let n = self.bw.side();
        self.values[(c * n + j) * n + k]
    }
    #[inline]
    pub fn set(&mut self, c: usize, j: usize, k: usize, v: f64) {
        let n = self.bw.side();
        self.values[(c * n + j) * n + k] = v;
    }
}

/// Real multi-channel signal on the SO(3) grid, indexed `[c, j(β), k(α), l(γ)]`.
#[derive(Debug, Clone, PartialEq)]
pub struct SO3Signal {
    bw: BandLimit,
    channels: usize,
    values: Vec<f64>,
}

impl SO3Signal {
    pub fn zeros(bw: BandLimit, channels: usize) -> Self {
        let n = bw.side();
        Self { bw, channels, values: vec![0.0; channels * n * n * n] }
    }

    pub fn from_vec(bw: BandLimit, channels: usize, values: Vec<f64>) -> Result<Self> {
        let n = bw.side();
        if channels == 0 || values.len() != channels * n * n * n {
            return Err(Error::ShapeMismatch(format!(
                "SO(3) signal with {channels} channels at bw {bw} needs {} values, got {}",
                channels * n * n * n,
                values.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::ShapeMismatch("SO(3) signal contains non-finite values".into()));
        }
        Ok(Self { bw, channels, values })
    }

    /// Samples `f(c, α, β, γ)`.
    pub fn from_fn(bw: BandLimit, channels: usize, f: impl Fn(usize, f64, f64, f64) -> f64) -> Self {
        let n = bw.side();
        let mut values = Vec::with_capacity(channels * n * n * n);
        for c in 0..channels {
            for j in 0..n {
                let beta = polar_angle(bw, j);
                for k in 0..n {
                    let alpha = periodic_angle(bw, k);
                    for l in 0..n {
                        values.push(f(c, alpha, beta, periodic_angle(bw, l)));
                    }
                }
            }
        }
        Self { bw, channels, values }
    }

    #[inline]
    pub fn bw(&self) -> BandLimit {
        self.bw
    }
    #[inline]
    pub fn channels(&self) -> usize {
        self.channels
    }
    pub fn grid(&self) -> SO3Grid {
        make_so3_grid(self.bw)
    }
    #[inline]
    pub fn values(&self) -> &[f64] {
        &self.values
    }
    #[inline]
    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }
    pub fn into_vec(self) -> Vec<f64> {
        self.values
    }
    #[inline]
    pub fn volume_len(&self) -> usize {
        let n = self.bw.side();
        n * n * n
    }
    pub fn channel(&self, c: usize) -> &[f64] {
        let p = self.volume_len();
        &self.values[c * p..(c + 1) * p]
    }
    pub fn channel_mut(&mut self, c: usize) -> &mut [f64] {
        let p = self.volume_len();
        &mut self.values[c * p..(c + 1) * p]
    }
    #[inline]
    pub fn get(&self, c: usize, j: usize, k: usize, l: usize) -> f64 {
        let n = self.bw.side();
        self.values[((c * n + j) * n + k) * n + l]
    }
}

/// Spherical-harmonic coefficients `f̂_l^m`, `0 ≤ l < bw`, `|m| ≤ l`.
#[derive(Debug, Clone, PartialEq)]
pub struct S2Spectrum {
    bw: BandLimit,
    channels: usize,
    coeff: Vec<Complex64>,
}

impl S2Spectrum {
    pub fn zeros(bw: BandLimit, channels: usize) -> Self {
        Self { bw, channels, coeff: vec![Complex64::new(0.0, 0.0); channels * bw.s2_coeffs()] }
    }

    pub fn from_vec(bw: BandLimit, channels: usize, coeff: Vec<Complex64>) -> Result<Self> {
        if channels == 0 || coeff.len() != channels * bw.s2_coeffs() {
            return Err(Error::ShapeMismatch(format!(
                "S2 spectrum with {channels} channels at bw {bw} needs {} coefficients, got {}",
                channels * bw.s2_coeffs(),
                coeff.len()
            )));
        }
        Ok(Self { bw, channels, coeff })
    }

    #[inline]
    pub fn bw(&self) -> BandLimit {
        self.bw
    }
    #[inline]
    pub fn channels(&self) -> usize {
        self.channels
    }
    #[inline]
    pub fn coeffs(&self) -> &[Complex64] {
        &self.coeff
    }
    #[inline]
    pub fn coeffs_mut(&mut self) -> &mut [Complex64] {
        &mut self.coeff
    }
    pub fn channel(&self, c: usize) -> &[Complex64] {
        let p = self.bw.s2_coeffs();
        &self.coeff[c * p..(c + 1) * p]
    }
    pub fn channel_mut(&mut self, c: usize) -> &mut [Complex64] {
        let p = self.bw.s2_coeffs();
        &mut self.coeff[c * p..(c + 1) * p]
    }
    #[inline]
    pub fn get(&self, c: usize, l: usize, m: i64) -> Complex64 {
        self.coeff[c * self.bw.s2_coeffs() + s2_index(l, m)]
    }
    #[inline]
    pub fn set(&mut self, c: usize, l: usize, m: i64, v: Complex64) {
        let p = self.bw.s2_coeffs();
        self.coeff[c * p + s2_index(l, m)] = v;
    }

    /// Largest deviation from `f̂_l^{-m} = (-1)^m conj(f̂_l^m)`.
    pub fn symmetry_defect(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for c in 0..self.channels {
            for l in 0..self.bw.get() {
                for m in 0..=l as i64 {
                    let sign = if m % 2 == 0 { 1.0 } else { -1.0 };
                    let d = self.get(c, l, -m) - self.get(c, l, m).conj() * sign;
                    worst = worst.max(d.norm());
                }
            }
        }
        worst
    }
}

/// Wigner coefficients `f̂^l_{m,n}`; block `l` is a `(2l+1)×(2l+1)` matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct SO3Spectrum {
    bw: BandLimit,
    channels: usize,
    coeff: Vec<Complex64>,
}

impl SO3Spectrum {
    pub fn zeros(bw: BandLimit, channels: usize) -> Self {
        Self { bw, channels, coeff: vec![Complex64::new(0.0, 0.0); channels * bw.so3_coeffs()] }
    }

    pub fn from_vec(bw: BandLimit, channels: usize, coeff: Vec<Complex64>) -> Result<Self> {
        if channels == 0 || coeff.len() != channels * bw.so3_coeffs() {
            return Err(Error::ShapeMismatch(format!(
                "SO(3) spectrum with {channels} channels at bw {bw} needs {} coefficients, got {}",
                channels * bw.so3_coeffs(),
                coeff.len()
            )));
        }
        Ok(Self { bw, channels, coeff })
    }

    #[inline]
    pub fn bw(&self) -> BandLimit {
        self.bw
    }
    #[inline]
    pub fn channels(&self) -> usize {
        self.channels
    }
    #[inline]
    pub fn coeffs(&self) -> &[Complex64] {
        &self.coeff
    }
    #[inline]
    pub fn coeffs_mut(&mut self) -> &mut [Complex64] {
        &mut self.coeff
    }
    pub fn channel(&self, c: usize) -> &[Complex64] {
        let p = self.bw.so3_coeffs();
        &self.coeff[c * p..(c + 1) * p]
    }
    pub fn channel_mut(&mut self, c: usize) -> &mut [Complex64] {
        let p = self.bw.so3_coeffs();
        &mut self.coeff[c * p..(c + 1) * p]
    }
    /// Block `l` of channel `c`, row-major over `(m, n)`.
    pub fn block(&self, c: usize, l: usize) -> &[Complex64] {
        let start = c * self.bw.so3_coeffs() + so3_block_offset(l);
        &self.coeff[start..start + (2 * l + 1) * (2 * l + 1)]
    }
    pub fn block_mut(&mut self, c: usize, l: usize) -> &mut [Complex64] {
        let start = c * self.bw.so3_coeffs() + so3_block_offset(l);
        &mut self.coeff[start..start + (2 * l + 1) * (2 * l + 1)]
    }
    #[inline]
    pub fn get(&self, c: usize, l: usize, m: i64, n: i64) -> Complex64 {
        self.coeff[c * self.bw.so3_coeffs() + so3_index(l, m, n)]
    }
    #[inline]
    pub fn set(&mut self, c: usize, l: usize, m: i64, n: i64, v: Complex64) {
        let p = self.bw.so3_coeffs();
        self.coeff[c * p + so3_index(l, m, n)] = v;
    }

    /// Largest deviation from `f̂^l_{-m,-n} = (-1)^{m+n} conj(f̂^l_{m,n})`.
    pub fn symmetry_defect(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for c in 0..self.channels {
            for l in 0..self.bw.get() {
                let li = l as i64;
                for m in -li..=li {
                    for n in -li..=li {
                        let sign = if (m + n) % 2 == 0 { 1.0 } else { -1.0 };
                        let d = self.get(c, l, -m, -n) - self.get(c, l, m, n).conj() * sign;
                        worst = worst.max(d.norm());
                    }
                }
            }
        }
        worst
    }
}

const MAGIC: &[u8; 4] = b"S2SG";
pub const FORMAT_VERSION: u32 = 1;

/// Any of the four sphere containers, as stored in the binary record format.
#[derive(Debug, Clone, PartialEq)]
pub enum SphereRecord {
    S2Signal(S2Signal),
    SO3Signal(SO3Signal),
    S2Spectrum(S2Spectrum),
    SO3Spectrum(SO3Spectrum),
}

impl SphereRecord {
    fn kind(&self) -> u8 {
        match self {
            SphereRecord::S2Signal(_) => 0,
            SphereRecord::SO3Signal(_) => 1,
            SphereRecord::S2Spectrum(_) => 2,
            SphereRecord::SO3Spectrum(_) => 3,
        }
    }

    /// Writes `magic | version u32 | kind u8 | bw u32 | channels u32 | payload`,
    /// little-endian; spectra store interleaved re/im pairs.
    pub fn write_to<W: Write>(&self, w: &mut W) -> Result<()> {
        let (bw, channels) = match self {
            SphereRecord::S2Signal(s) => (s.bw, s.channels),
            SphereRecord::SO3Signal(s) => (s.bw, s.channels),
            SphereRecord::S2Spectrum(s) => (s.bw, s.channels),
            SphereRecord::SO3Spectrum(s) => (s.bw, s.channels),
        };
        w.write_all(MAGIC)?;
        w.write_all(&FORMAT_VERSION.to_le_bytes())?;
        w.write_all(&[self.kind()])?;
        w.write_all(&(bw.get() as u32).to_le_bytes())?;
        w.write_all(&(channels as u32).to_le_bytes())?;
        let mut buf = Vec::new();
        match self {
            SphereRecord::S2Signal(s) => s.values.iter().for_each(|v| buf.extend_from_slice(&v.to_le_bytes())),
            SphereRecord::SO3Signal(s) => s.values.iter().for_each(|v| buf.extend_from_slice(&v.to_le_bytes())),
            SphereRecord::S2Spectrum(s) => push_complex(&mut buf, &s.coeff),
            SphereRecord::SO3Spectrum(s) => push_complex(&mut buf, &s.coeff),
        }
        w.write_all(&buf)?;
        Ok(())
    }

    pub fn read_from<R: Read>(r: &mut R) -> Result<Self> {
        let bad = |reason: &str| Error::MalformedFile { path: "<sphere record>".into(), reason: reason.into() };
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic).map_err(|_| bad("truncated header"))?;
        if &magic != MAGIC {
            return Err(bad("bad magic"));
        }
        let version = read_u32(r).map_err(|_| bad("truncated header"))?;
        if version != FORMAT_VERSION {
            return Err(bad(&format!("unsupported version {version}")));
        }
        let mut kind = [0u8; 1];
        r.read_exact(&mut kind).map_err(|_| bad("truncated header"))?;
        let bw = read_u32(r).map_err(|_| bad("truncated header"))? as usize;
        let channels = read_u32(r).map_err(|_| bad("truncated header"))? as usize;
        let bw = BandLimit::new(bw)?;
        let n = bw.side();
        let count = match kind[0] {
            0 => channels * n * n,
            1 => channels * n * n * n,
            2 => 2 * channels * bw.s2_coeffs(),
            3 => 2 * channels * bw.so3_coeffs(),
            k => return Err(bad(&format!("unknown record kind {k}"))),
        };
        let mut bytes = vec![0u8; count * 8];
        r.read_exact(&mut bytes).map_err(|_| bad("truncated payload"))?;
        let raw: Vec<f64> = bytes.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect();
        let as_complex = |raw: Vec<f64>| raw.chunks_exact(2).map(|p| Complex64::new(p[0], p[1])).collect::<Vec<_>>();
        Ok(match kind[0] {
            0 => SphereRecord::S2Signal(S2Signal::from_vec(bw, channels, raw)?),
            1 => SphereRecord::SO3Signal(SO3Signal::from_vec(bw, channels, raw)?),
            2 => SphereRecord::S2Spectrum(S2Spectrum::from_vec(bw, channels, as_complex(raw))?),
            _ => SphereRecord::SO3Spectrum(SO3Spectrum::from_vec(bw, channels, as_complex(raw))?),
        })
    }
}

fn push_complex(buf: &mut Vec<u8>, coeff: &[Complex64]) {
    for c in coeff {
        buf.extend_from_slice(&c.re.to_le_bytes());
        buf.extend_from_slice(&c.im.to_le_bytes());
    }
}

pub(crate) fn read_u32<R: Read>(r: &mut R) -> std::io::Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bw(b: usize) -> BandLimit {
        BandLimit::new(b).unwrap()
    }

    #[test]
    fn zero_bandwidth_rejected() {
        assert!(matches!(BandLimit::new(0), Err(Error::InvalidBandwidth(0))));
    }

    #[test]
    fn s2_grid_bw1() {
        let g = make_s2_grid(bw(1));
        assert_eq!(g.theta, vec![PI / 4.0, 3.0 * PI / 4.0]);
        assert_eq!(g.phi, vec![0.0, PI]);
    }

    #[test]
    fn s2_grid_bw2() {
        let g = make_s2_grid(bw(2));
        let want = [PI / 8.0, 3.0 * PI / 8.0, 5.0 * PI / 8.0, 7.0 * PI / 8.0];
        for (a, b) in g.theta.iter().zip(want) {
            assert!((a - b).abs() < 1e-15);
        }
        assert!(g.theta.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn weights_integrate_constant() {
        for b in [1, 2, 5, 16, 32] {
            let g = make_s2_grid(bw(b));
            let step = PI / b as f64;
            let total: f64 = g.quad_weight.iter().map(|w| w * step * g.phi.len() as f64).sum();
            assert!((total - 4.0 * PI).abs() < 1e-12, "bw {b}: {total}");
            assert!(g.quad_weight.iter().all(|&w| w > 0.0));
        }
    }

    #[test]
    fn so3_grid_axes() {
        let g = make_so3_grid(bw(1));
        assert_eq!(g.beta, vec![PI / 4.0, 3.0 * PI / 4.0]);
        assert_eq!(g.alpha, vec![0.0, PI]);
        assert_eq!(g.gamma, vec![0.0, PI]);
        let g = make_so3_grid(bw(2));
        assert_eq!(g.alpha.len(), 4);
        assert!((g.alpha[1] - PI / 2.0).abs() < 1e-15);
        let g = make_so3_grid(bw(8));
        assert_eq!((g.alpha.len(), g.beta.len(), g.gamma.len()), (16, 16, 16));
    }

    #[test]
    fn coefficient_counts() {
        for b in 1..10 {
            let b = bw(b);
            assert_eq!(b.s2_coeffs(), (0..b.get()).map(|l| 2 * l + 1).sum::<usize>());
            assert_eq!(b.so3_coeffs(), (0..b.get()).map(|l| (2 * l + 1) * (2 * l + 1)).sum::<usize>());
        }
        assert_eq!(so3_index(2, -2, -2), 10);
        assert_eq!(so3_index(1, 1, 1), 9);
    }

    #[test]
    fn record_round_trip() {
        let s = S2Signal::from_fn(bw(3), 2, |c, t, p| c as f64 + t * p);
        let mut spec = SO3Spectrum::zeros(bw(2), 1);
        spec.set(0, 1, -1, 0, Complex64::new(0.5, -2.0));
        for rec in [SphereRecord::S2Signal(s), SphereRecord::SO3Spectrum(spec)] {
            let mut buf = Vec::new();
            rec.write_to(&mut buf).unwrap();
            assert_eq!(&buf[..4], b"S2SG");
            let back = SphereRecord::read_from(&mut buf.as_slice()).unwrap();
            assert_eq!(back, rec);
        }
    }

    #[test]
    fn record_header_layout() {
        let rec = SphereRecord::S2Spectrum(S2Spectrum::zeros(bw(2), 3));
        let mut buf = Vec::new();
        rec.write_to(&mut buf).unwrap();
        assert_eq!(buf[8], 2);
        assert_eq!(u32::from_le_bytes(buf[9..13].try_into().unwrap()), 2);
        assert_eq!(u32::from_le_bytes(buf[13..17].try_into().unwrap()), 3);
        assert_eq!(buf.len(), 17 + 3 * 4 * 16);
    }

    #[test]
    fn truncated_record_rejected() {
        let rec = SphereRecord::S2Signal(S2Signal::zeros(bw(2), 1));
        let mut buf = Vec::new();
        rec.write_to(&mut buf).unwrap();
        buf.truncate(buf.len() - 3);
        assert!(matches!(SphereRecord::read_from(&mut buf.as_slice()), Err(Error::MalformedFile { .. })));
    }
}
