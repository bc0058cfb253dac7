//! Exact rotations of spectra through Wigner-D matrices.

use num_complex::Complex64;

use super::wigner::wigner_d_matrix;
use crate::sphere::{s2_index, S2Spectrum, SO3Spectrum};

/// `D^l(α, β, γ)` row-major over `(m, n)`, `D_{mn} = e^{-imα} d^l_{mn}(β) e^{-inγ}`.
pub fn wigner_big_d(l: usize, alpha: f64, beta: f64, gamma: f64) -> Vec<Complex64> {
    let d = 2 * l + 1;
    let li = l as i64;
    let small = wigner_d_matrix(l, beta);
    let mut out = vec![Complex64::new(0.0, 0.0); d * d];
    for m in -li..=li {
        let em = Complex64::from_polar(1.0, -(m as f64) * alpha);
        for n in -li..=li {
            let en = Complex64::from_polar(1.0, -(n as f64) * gamma);
            let idx = (m + li) as usize * d + (n + li) as usize;
            out[idx] = em * small[idx] * en;
        }
    }
    out
}

/// Coefficients of `f(R⁻¹ω)` for `R = R_z(α) R_y(β) R_z(γ)`: per degree,
/// `f̂'_l = D^l(α, β, γ) f̂_l`.
pub fn rotate_spectrum(spectrum: &S2Spectrum, alpha: f64, beta: f64, gamma: f64) -> S2Spectrum {
    let bw = spectrum.bw();
    let mut out = S2Spectrum::zeros(bw, spectrum.channels());
    for l in 0..bw.get() {
        let d = 2 * l + 1;
        let li = l as i64;
        let big = wigner_big_d(l, alpha, beta, gamma);
        for c in 0..spectrum.channels() {
            let src = &spectrum.channel(c)[s2_index(l, -li)..s2_index(l, -li) + d];
            let dst = &mut out.channel_mut(c)[s2_index(l, -li)..s2_index(l, -li) + d];
            for r in 0..d {
                dst[r] = (0..d).map(|k| big[r * d + k] * src[k]).sum();
            }
        }
    }
    out
}

/// Coefficients of the left translation `f(R⁻¹Q)`: per degree `conj(D^l(R)) F^l`.
pub fn rotate_so3_spectrum(spectrum: &SO3Spectrum, alpha: f64, beta: f64, gamma: f64) -> SO3Spectrum {
    let bw = spectrum.bw();
    let mut out = SO3Spectrum::zeros(bw, spectrum.channels());
    for l in 0..bw.get() {
        let d = 2 * l + 1;
        let big = wigner_big_d(l, alpha, beta, gamma);
        for c in 0..spectrum.channels() {
            let src = spectrum.block(c, l).to_vec();
            let dst = out.block_mut(c, l);
            for r in 0..d {
                for s in 0..d {
                    dst[r * d + s] = (0..d).map(|k| big[r * d + k].conj() * src[k * d + s]).sum();
                }
            }
        }
    }
    out
}
