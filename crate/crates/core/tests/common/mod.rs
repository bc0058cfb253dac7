//! Independent reference implementations used by the integration tests.
#![allow(dead_code)]

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use s2seg::harmonics::real::{s2_from_real, so3_from_real};
use s2seg::sphere::{BandLimit, S2Spectrum, SO3Spectrum};

pub type Mat3 = [[f64; 3]; 3];

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn fact(n: i64) -> f64 {
    (1..=n).map(|k| k as f64).product()
}

/// `d^j_{m'm}(β)` from the explicit factorial sum.
pub fn wigner_d_explicit(j: i64, mp: i64, m: i64, beta: f64) -> f64 {
    if mp.abs() > j || m.abs() > j {
        return 0.0;
    }
    let (c, s) = ((beta / 2.0).cos(), (beta / 2.0).sin());
    let pre = (fact(j + mp) * fact(j - mp) * fact(j + m) * fact(j - m)).sqrt();
    let mut acc = 0.0;
    for k in 0..=(2 * j) {
        let (a, b, cc, dd) = (j + m - k, k, mp - m + k, j - mp - k);
        if a < 0 || cc < 0 || dd < 0 {
            continue;
        }
        let sign = if (mp - m + k) % 2 == 0 { 1.0 } else { -1.0 };
        acc += sign / (fact(a) * fact(b) * fact(cc) * fact(dd))
            * c.powi((2 * j + m - mp - 2 * k) as i32)
            * s.powi((mp - m + 2 * k) as i32);
    }
    pre * acc
}

/// Orthonormal `Y_l^m` with Condon-Shortley phase, via the explicit `d` sum.
pub fn ylm_explicit(l: i64, m: i64, theta: f64, phi: f64) -> Complex64 {
    // Y_l^m(θ, φ) = sqrt((2l+1)/(4π)) d^l_{m0}(θ) e^{imφ}
    let v = ((2 * l + 1) as f64 / (4.0 * PI)).sqrt() * wigner_d_explicit(l, m, 0, theta);
    Complex64::from_polar(v, m as f64 * phi)
}

pub fn big_d_explicit(l: i64, m: i64, n: i64, a: f64, b: f64, g: f64) -> Complex64 {
    Complex64::from_polar(1.0, -(m as f64) * a - (n as f64) * g) * wigner_d_explicit(l, m, n, b)
}

pub fn rz(a: f64) -> Mat3 {
    let (s, c) = a.sin_cos();
    [[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]]
}

pub fn ry(a: f64) -> Mat3 {
    let (s, c) = a.sin_cos();
    [[c, 0.0, s], [0.0, 1.0, 0.0], [-s, 0.0, c]]
}

pub fn mul(a: &Mat3, b: &Mat3) -> Mat3 {
    let mut o = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            o[i][j] = (0..3).map(|k| a[i][k] * b[k][j]).sum();
        }
    }
    o
}

pub fn transpose(a: &Mat3) -> Mat3 {
    let mut o = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            o[i][j] = a[j][i];
        }
    }
    o
}

pub fn apply(a: &Mat3, v: [f64; 3]) -> [f64; 3] {
    [0, 1, 2].map(|i| (0..3).map(|k| a[i][k] * v[k]).sum())
}

pub fn zyz(a: f64, b: f64, g: f64) -> Mat3 {
    mul(&mul(&rz(a), &ry(b)), &rz(g))
}

/// ZYZ Euler angles of a rotation matrix (away from the poles of β).
pub fn euler_zyz(r: &Mat3) -> (f64, f64, f64) {
    let b = r[2][2].clamp(-1.0, 1.0).acos();
    let a = r[1][2].atan2(r[0][2]);
    let g = r[2][1].atan2(-r[2][0]);
    (a, b, g)
}

pub fn to_angles(v: [f64; 3]) -> (f64, f64) {
    let r = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
    ((v[2] / r).clamp(-1.0, 1.0).acos(), v[1].atan2(v[0]))
}

/// Random spectrum of a real band-limited S² signal.
pub fn random_s2_spectrum(bw: BandLimit, rng: &mut impl Rng) -> S2Spectrum {
    let real: Vec<f64> = (0..bw.s2_coeffs()).map(|_| rng.random_range(-1.0..1.0)).collect();
    let mut s = S2Spectrum::zeros(bw, 1);
    s2_from_real(bw, &real, s.channel_mut(0));
    s
}

/// Random spectrum of a real band-limited SO(3) signal.
pub fn random_so3_spectrum(bw: BandLimit, rng: &mut impl Rng) -> SO3Spectrum {
    let real: Vec<f64> = (0..bw.so3_coeffs()).map(|_| rng.random_range(-1.0..1.0)).collect();
    let mut s = SO3Spectrum::zeros(bw, 1);
    so3_from_real(bw, &real, s.channel_mut(0));
    s
}

/// Direct synthesis of an S² spectrum at one point.
pub fn eval_s2(spec: &S2Spectrum, c: usize, theta: f64, phi: f64) -> f64 {
    let mut acc = Complex64::new(0.0, 0.0);
    for l in 0..spec.bw().get() as i64 {
        for m in -l..=l {
            acc += spec.get(c, l as usize, m) * ylm_explicit(l, m, theta, phi);
        }
    }
    acc.re
}

/// Direct synthesis of an SO(3) spectrum at one rotation.
pub fn eval_so3(spec: &SO3Spectrum, c: usize, a: f64, b: f64, g: f64) -> f64 {
    let mut acc = Complex64::new(0.0, 0.0);
    for l in 0..spec.bw().get() as i64 {
        let w = (2 * l + 1) as f64 / (8.0 * PI * PI);
        for m in -l..=l {
            for n in -l..=l {
                acc += spec.get(c, l as usize, m, n) * big_d_explicit(l, m, n, a, b, g) * w;
            }
        }
    }
    acc.re
}

/// Gauss-Legendre nodes and weights on [-1, 1] by Newton iteration.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    for i in 0..n {
        let mut z = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        loop {
            let (mut p0, mut p1) = (1.0, z);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * z * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            let dp = n as f64 * (z * p1 - p0) / (z * z - 1.0);
            let dz = p1 / dp;
            z -= dz;
            if dz.abs() < 1e-15 {
                let (mut q0, mut q1) = (1.0, z);
                for k in 2..=n {
                    let q2 = ((2 * k - 1) as f64 * z * q1 - (k - 1) as f64 * q0) / k as f64;
                    q0 = q1;
                    q1 = q2;
                }
                let dq = n as f64 * (z * q1 - q0) / (z * z - 1.0);
                x[i] = z;
                w[i] = 2.0 / ((1.0 - z * z) * dq * dq);
                break;
            }
        }
    }
    (x, w)
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

/// Jaccard set loss `|M| / |G ∪ M|` of a mispredicted set `M` against the class set `G`.
pub fn jaccard_set_loss(mispredicted: &[bool], fg: &[bool]) -> f64 {
    let m = mispredicted.iter().filter(|&&x| x).count();
    let union = fg.iter().zip(mispredicted).filter(|(&g, &x)| g || x).count();
    if union == 0 {
        0.0
    } else {
        m as f64 / union as f64
    }
}

fn permutations(n: usize) -> Vec<Vec<usize>> {
    if n == 0 {
        return vec![vec![]];
    }
    let mut out = Vec::new();
    for p in permutations(n - 1) {
        for pos in 0..=p.len() {
            let mut q = p.clone();
            q.insert(pos, n - 1);
            out.push(q);
        }
    }
    out
}

/// Lovász extension from its permutation definition: the maximum over all
/// orderings of `Σ e_σ(i) (Δ(S_i) − Δ(S_{i−1}))`, valid since Δ is submodular.
pub fn lovasz_bruteforce(errors: &[f64], fg: &[bool]) -> f64 {
    let n = errors.len();
    let mut best = f64::NEG_INFINITY;
    for perm in permutations(n) {
        let mut set = vec![false; n];
        let (mut prev, mut acc) = (0.0, 0.0);
        for &i in &perm {
            set[i] = true;
            let now = jaccard_set_loss(&set, fg);
            acc += errors[i] * (now - prev);
            prev = now;
        }
        best = best.max(acc);
    }
    best
}

/// Central difference of `f` along coordinate `i` of `x`.
pub fn central_diff(x: &mut [f64], i: usize, h: f64, mut f: impl FnMut(&[f64]) -> f64) -> f64 {
    let x0 = x[i];
    x[i] = x0 + h;
    let fp = f(x);
    x[i] = x0 - h;
    let fm = f(x);
    x[i] = x0;
    (fp - fm) / (2.0 * h)
}

/// `|a − b| / max(|a|, |b|, floor)`.
pub fn rel_err(a: f64, b: f64, floor: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(floor)
}

/// `∫ f(ω) g(R⁻¹ω) dω` by Gauss-Legendre × uniform quadrature on direct sums.
pub fn s2_corr_oracle(f: &S2Spectrum, g: &S2Spectrum, r: &Mat3) -> f64 {
    let b = f.bw().get();
    let (x, w) = gauss_legendre(2 * b + 2);
    let nphi = 4 * b + 2;
    let rt = transpose(r);
    let mut acc = 0.0;
    for (xi, wi) in x.iter().zip(&w) {
        let theta = xi.acos();
        for k in 0..nphi {
            let phi = 2.0 * PI * k as f64 / nphi as f64;
            let v = [theta.sin() * phi.cos(), theta.sin() * phi.sin(), theta.cos()];
            let (t2, p2) = to_angles(apply(&rt, v));
            acc += wi * (2.0 * PI / nphi as f64) * eval_s2(f, 0, theta, phi) * eval_s2(g, 0, t2, p2);
        }
    }
    acc
}

/// `∫ f(Q) g(Q⁻¹R) dQ` by Gauss-Legendre in cos β and uniform α, γ.
pub fn so3_conv_oracle(f: &SO3Spectrum, g: &SO3Spectrum, r: &Mat3) -> f64 {
    let b = f.bw().get();
    let (x, w) = gauss_legendre(2 * b + 1);
    let na = 4 * b;
    let mut acc = 0.0;
    for (xi, wi) in x.iter().zip(&w) {
        let beta = xi.acos();
        for ia in 0..na {
            let a = 2.0 * PI * ia as f64 / na as f64;
            for ig in 0..na {
                let gm = 2.0 * PI * ig as f64 / na as f64;
                let q = zyz(a, beta, gm);
                let (a2, b2, g2) = euler_zyz(&mul(&transpose(&q), r));
                let dq = wi * (2.0 * PI / na as f64).powi(2);
                acc += dq * eval_so3(f, 0, a, beta, gm) * eval_so3(g, 0, a2, b2, g2);
            }
        }
    }
    acc
}
