mod common;

use std::f64::consts::PI;

use common::*;
use num_complex::Complex64;
use proptest::prelude::*;
use s2seg::harmonics::{isft, iso3ft, rotate_so3_spectrum, rotate_spectrum, sft, so3ft};
use s2seg::spectral_ops::*;
use s2seg::sphere::{make_s2_grid, make_so3_grid, BandLimit, S2Signal, S2Spectrum, SO3Signal};

fn bw(b: usize) -> BandLimit {
    BandLimit::new(b).unwrap()
}

fn s2_bank(bw: BandLimit, cin: usize, cout: usize, seed: u64) -> S2KernelBank {
    S2KernelBank::random(bw, cin, cout, &mut rng(seed))
}

#[test]
fn s2_conv_matches_quadrature_oracle() {
    let b = bw(5);
    let bo = b;
    let mut r = rng(11);
    let f_spec = random_s2_spectrum(b, &mut r);
    let g_spec = random_s2_spectrum(b, &mut r);
    let f = isft(&f_spec).unwrap();
    let bank = S2KernelBank::new(1, 1, g_spec.clone()).unwrap();
    let out = s2_conv(&f, &bank, bo).unwrap();
    let grid = make_so3_grid(bo);
    let scale = out.values().iter().fold(0.0f64, |m, v| m.max(v.abs()));
    for &(j, k, l) in &[(1usize, 2usize, 3usize), (4, 7, 0), (6, 1, 5)] {
        let rot = zyz(grid.alpha[k], grid.beta[j], grid.gamma[l]);
        let want = s2_corr_oracle(&f_spec, &g_spec, &rot);
        let got = out.get(0, j, k, l);
        assert!((got - want).abs() < 1e-6 * scale, "({j},{k},{l}) got {got} want {want}");
    }
}

#[test]
fn so3_conv_matches_quadrature_oracle() {
    let b = bw(3);
    let mut r = rng(12);
    let f_spec = random_so3_spectrum(b, &mut r);
    let g_spec = random_so3_spectrum(b, &mut r);
    let f = iso3ft(&f_spec).unwrap();
    let bank = SO3KernelBank::new(1, 1, g_spec.clone()).unwrap();
    let out = so3_conv(&f, &bank).unwrap();
    let grid = make_so3_grid(b);
    let scale = out.values().iter().fold(0.0f64, |m, v| m.max(v.abs()));
    for &(j, k, l) in &[(0usize, 1usize, 2usize), (3, 5, 4), (5, 0, 1)] {
        let rot = zyz(grid.alpha[k], grid.beta[j], grid.gamma[l]);
        let want = so3_conv_oracle(&f_spec, &g_spec, &rot);
        let got = out.get(0, j, k, l);
        assert!((got - want).abs() < 1e-6 * scale, "({j},{k},{l}) got {got} want {want}");
    }
}

#[test]
fn isft_of_single_harmonic_matches_direct_evaluation() {
    let b = bw(4);
    let mut s = S2Spectrum::zeros(b, 1);
    s.set(0, 2, 1, Complex64::new(1.0, 0.0));
    s.set(0, 2, -1, Complex64::new(-1.0, 0.0));
    let f = isft(&s).unwrap();
    let grid = make_s2_grid(b);
    for j in 0..8 {
        for k in 0..8 {
            let want = ylm_explicit(2, 1, grid.theta[j], grid.phi[k]) - ylm_explicit(2, -1, grid.theta[j], grid.phi[k]);
            assert!((f.get(0, j, k) - want.re).abs() < 1e-12 && want.im.abs() < 1e-12);
        }
    }
}

#[test]
fn s2_conv_is_rotation_equivariant_spectrally() {
    let b = bw(6);
    let bank = s2_bank(b, 2, 3, 21);
    let mut r = rng(22);
    let mut spec = S2Spectrum::zeros(b, 2);
    for c in 0..2 {
        let s = random_s2_spectrum(b, &mut r);
        spec.channel_mut(c).copy_from_slice(s.channel(0));
    }
    let (a, be, g) = (0.7, 1.3, -2.1);
    let f = isft(&spec).unwrap();
    let fr = isft(&rotate_spectrum(&spec, a, be, g)).unwrap();
    let out = so3ft(&s2_conv(&f, &bank, b).unwrap());
    let out_r = so3ft(&s2_conv(&fr, &bank, b).unwrap());
    let want = rotate_so3_spectrum(&out, a, be, g);
    let scale = out.coeffs().iter().fold(0.0f64, |m, c| m.max(c.norm()));
    for (x, y) in out_r.coeffs().iter().zip(want.coeffs()) {
        assert!((x - y).norm() < 1e-9 * scale.max(1.0));
    }
}

#[test]
fn grid_z_rotation_shifts_alpha_axis() {
    let b = bw(6);
    let n = b.side();
    let bank = s2_bank(b, 1, 2, 31);
    let f = isft(&random_s2_spectrum(b, &mut rng(32))).unwrap();
    // Rotating by π about z is a shift of `bw` samples along φ.
    let mut shifted = S2Signal::zeros(b, 1);
    for j in 0..n {
        for k in 0..n {
            shifted.set(0, j, (k + b.get()) % n, f.get(0, j, k));
        }
    }
    let bo = bw(4);
    let out = s2_conv(&f, &bank, bo).unwrap();
    let out_s = s2_conv(&shifted, &bank, bo).unwrap();
    let no = bo.side();
    for c in 0..2 {
        for j in 0..no {
            for k in 0..no {
                for l in 0..no {
                    let want = out.get(c, j, (k + no - bo.get()) % no, l);
                    assert!((out_s.get(c, j, k, l) - want).abs() < 1e-10);
                }
            }
        }
    }
}

#[test]
fn rotate_spectrum_z_step_matches_shifted_signal() {
    let b = bw(5);
    let n = b.side();
    let spec = random_s2_spectrum(b, &mut rng(33));
    let f = isft(&spec).unwrap();
    let mut shifted = S2Signal::zeros(b, 1);
    for j in 0..n {
        for k in 0..n {
            shifted.set(0, j, (k + 1) % n, f.get(0, j, k));
        }
    }
    let want = sft(&shifted);
    let got = rotate_spectrum(&spec, PI / b.get() as f64, 0.0, 0.0);
    for (x, y) in got.coeffs().iter().zip(want.coeffs()) {
        assert!((x - y).norm() < 1e-10);
    }
}

#[test]
fn integrate_gamma_spectrum_is_column_zero() {
    let b = bw(5);
    let spec = random_so3_spectrum(b, &mut rng(41));
    let f = iso3ft(&spec).unwrap();
    let s = sft(&integrate_gamma(&f));
    for l in 0..5usize {
        let factor = 2.0 * PI * (2 * l + 1) as f64 / (8.0 * PI * PI) * (4.0 * PI / (2 * l + 1) as f64).sqrt();
        for m in -(l as i64)..=l as i64 {
            let want = spec.get(0, l, m, 0).conj() * factor;
            assert!((s.get(0, l, m) - want).norm() < 1e-8, "l={l} m={m}");
        }
    }
}

#[test]
fn pool_unpool_algebra() {
    let b = bw(6);
    let f = iso3ft(&random_so3_spectrum(b, &mut rng(51))).unwrap();
    let up = so3_unpool(&f, bw(9)).unwrap();
    let back = so3_pool(&up, b).unwrap();
    assert!(max_abs_diff(back.values(), f.values()) < 1e-8);
    let same = so3_pool(&f, b).unwrap();
    assert!(max_abs_diff(same.values(), f.values()) < 1e-9);
    let low = so3_unpool(&so3_pool(&f, bw(3)).unwrap(), b).unwrap();
    let (sl, sf) = (so3ft(&low), so3ft(&f));
    for l in 0..6 {
        for (x, y) in sl.block(0, l).iter().zip(sf.block(0, l)) {
            let want = if l < 3 { *y } else { Complex64::new(0.0, 0.0) };
            assert!((x - want).norm() < 1e-8);
        }
    }
}

#[test]
fn operations_are_linear() {
    let b = bw(4);
    let mut r = rng(61);
    let s2a = isft(&random_s2_spectrum(b, &mut r)).unwrap();
    let s2b = isft(&random_s2_spectrum(b, &mut r)).unwrap();
    let so3a = iso3ft(&random_so3_spectrum(b, &mut r)).unwrap();
    let so3b = iso3ft(&random_so3_spectrum(b, &mut r)).unwrap();
    let (ca, cb) = (0.8, -1.7);
    let combo2 = S2Signal::from_vec(b, 1, s2a.values().iter().zip(s2b.values()).map(|(x, y)| ca * x + cb * y).collect()).unwrap();
    let combo3 = SO3Signal::from_vec(b, 1, so3a.values().iter().zip(so3b.values()).map(|(x, y)| ca * x + cb * y).collect()).unwrap();
    let lin = |fa: &[f64], fb: &[f64], fc: &[f64]| {
        fa.iter().zip(fb).zip(fc).map(|((x, y), z)| (ca * x + cb * y - z).abs()).fold(0.0, f64::max)
    };
    let k2 = s2_bank(b, 1, 1, 62);
    let k3 = SO3KernelBank::random(b, 1, 1, &mut rng(63));
    let c = |s: &S2Signal| s2_conv(s, &k2, bw(3)).unwrap();
    assert!(lin(c(&s2a).values(), c(&s2b).values(), c(&combo2).values()) < 1e-10);
    let c = |s: &SO3Signal| so3_conv(s, &k3).unwrap();
    assert!(lin(c(&so3a).values(), c(&so3b).values(), c(&combo3).values()) < 1e-10);
    let c = |s: &SO3Signal| so3_pool(s, bw(2)).unwrap();
    assert!(lin(c(&so3a).values(), c(&so3b).values(), c(&combo3).values()) < 1e-10);
    let c = |s: &SO3Signal| so3_unpool(s, bw(6)).unwrap();
    assert!(lin(c(&so3a).values(), c(&so3b).values(), c(&combo3).values()) < 1e-10);
    let c = |s: &SO3Signal| integrate_gamma(s);
    assert!(lin(c(&so3a).values(), c(&so3b).values(), c(&combo3).values()) < 1e-10);
}

#[test]
fn parseval_on_s2() {
    let b = bw(16);
    let spec = random_s2_spectrum(b, &mut rng(71));
    let f = isft(&spec).unwrap();
    let grid = make_s2_grid(b);
    let n = b.side();
    let mut lhs = 0.0;
    for j in 0..n {
        for k in 0..n {
            lhs += grid.quad_weight[j] * b.step() * f.get(0, j, k).powi(2);
        }
    }
    let rhs: f64 = spec.coeffs().iter().map(|c| c.norm_sqr()).sum();
    assert!((lhs - rhs).abs() < 1e-9 * rhs);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn s2_round_trip(seed in any::<u64>(), b in 1usize..=16) {
        let b = bw(b);
        let spec = random_s2_spectrum(b, &mut rng(seed));
        let back = sft(&isft(&spec).unwrap());
        let err = spec.coeffs().iter().zip(back.coeffs()).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max);
        prop_assert!(err < 1e-9);
    }

    #[test]
    fn so3_round_trip(seed in any::<u64>(), b in 1usize..=8) {
        let b = bw(b);
        let spec = random_so3_spectrum(b, &mut rng(seed));
        let f = iso3ft(&spec).unwrap();
        let back = so3ft(&f);
        let err = spec.coeffs().iter().zip(back.coeffs()).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max);
        prop_assert!(err < 1e-8);
        let again = iso3ft(&back).unwrap();
        prop_assert!(max_abs_diff(again.values(), f.values()) < 1e-8);
    }

    #[test]
    fn rotation_preserves_degree_norms(seed in any::<u64>(), a in -PI..PI, be in 0.0..PI, g in -PI..PI) {
        let b = bw(6);
        let spec = random_s2_spectrum(b, &mut rng(seed));
        let rot = rotate_spectrum(&spec, a, be, g);
        for l in 0..6usize {
            let n0: f64 = (-(l as i64)..=l as i64).map(|m| spec.get(0, l, m).norm_sqr()).sum();
            let n1: f64 = (-(l as i64)..=l as i64).map(|m| rot.get(0, l, m).norm_sqr()).sum();
            prop_assert!((n0 - n1).abs() < 1e-12 * n0.max(1.0));
        }
    }

    #[test]
    fn wigner_recurrence_matches_explicit_formula(l in 0usize..12, m in -11i64..12, n in -11i64..12, beta in 0.0..PI) {
        prop_assume!(m.abs() <= l as i64 && n.abs() <= l as i64);
        let got = s2seg::harmonics::wigner_d(l, m, n, beta);
        let want = wigner_d_explicit(l as i64, m, n, beta);
        prop_assert!((got - want).abs() < 1e-10);
    }
}
