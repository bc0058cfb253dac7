//! Wigner small-d functions `d^l_{mn}(β)`.
//!
//! Values come from the three-term recurrence in `l` at fixed `(m, n)`,
//! seeded at `l = max(|m|, |n|)` with the single-term closed form.

use crate::sphere::{polar_angle, BandLimit};

/// `d^j_{j,m}(β) = sqrt(C(2j, j+m)) cos(β/2)^{j+m} (-sin(β/2))^{j-m}`.
fn d_top(j: usize, m: i64, beta: f64) -> f64 {
    let a = (j as i64 + m) as usize;
    let b = (j as i64 - m) as usize;
    let c = (0.5 * beta).cos().abs();
    let s = (0.5 * beta).sin().abs();
    if (a > 0 && c == 0.0) || (b > 0 && s == 0.0) {
        return 0.0;
    }
    let mut ln_binom = 0.0;
    for i in 1..=b {
        ln_binom += ((a + i) as f64 / i as f64).ln();
    }
    let mut ln_v = 0.5 * ln_binom;
    if a > 0 {
        ln_v += a as f64 * c.ln();
    }
    if b > 0 {
        ln_v += b as f64 * s.ln();
    }
    let v = ln_v.exp();
    if b % 2 == 1 {
        -v
    } else {
        v
    }
}

/// `d^J_{mn}(β)` at `J = max(|m|, |n|)`.
fn seed(m: i64, n: i64, beta: f64) -> f64 {
    if m.abs() >= n.abs() {
        let j = m.unsigned_abs() as usize;
        if m >= 0 {
            d_top(j, n, beta)
        } else {
            let sign = if (j as i64 + n) % 2 == 0 { 1.0 } else { -1.0 };
            sign * d_top(j, -n, beta)
        }
    } else {
        let sign = if (m - n) % 2 == 0 { 1.0 } else { -1.0 };
        sign * seed(n, m, beta)
    }
}

/// Fills `out[i] = d^{J+i}_{mn}(β)`, `J = max(|m|,|n|)`.
pub fn wigner_column(m: i64, n: i64, beta: f64, out: &mut [f64]) {
    if out.is_empty() {
        return;
    }
    let j0 = m.abs().max(n.abs()) as usize;
    let cb = beta.cos();
    let (mf, nf) = (m as f64, n as f64);
    let mut prev = 0.0;
    let mut cur = seed(m, n, beta);
    out[0] = cur;
    for i in 1..out.len() {
        let l = (j0 + i - 1) as f64;
        let l1 = l + 1.0;
        let denom = ((l1 * l1 - mf * mf) * (l1 * l1 - nf * nf)).sqrt();
        let shift = if l == 0.0 { 0.0 } else { mf * nf / (l * l1) };
        let a = l1 * (2.0 * l + 1.0) / denom;
        let b = if l == 0.0 {
            0.0
        } else {
            l1 * ((l * l - mf * mf) * (l * l - nf * nf)).sqrt() / (l * denom)
        };
        let next = a * (cb - shift) * cur - b * prev;
        prev = cur;
        cur = next;
        out[i] = cur;
    }
}

/// Single value `d^l_{mn}(β)`; zero when `max(|m|,|n|) > l`.
pub fn wigner_d(l: usize, m: i64, n: i64, beta: f64) -> f64 {
    let j0 = m.abs().max(n.abs()) as usize;
    if j0 > l {
        return 0.0;
    }
    let mut col = vec![0.0; l - j0 + 1];
    wigner_column(m, n, beta, &mut col);
    col[l - j0]
}

/// The `(2l+1)×(2l+1)` matrix `d^l(β)`, row-major over `(m, n)`.
pub fn wigner_d_matrix(l: usize, beta: f64) -> Vec<f64> {
    let d = 2 * l + 1;
    let li = l as i64;
    let mut out = vec![0.0; d * d];
    for m in -li..=li {
        for n in -li..=li {
            out[(m + li) as usize * d + (n + li) as usize] = wigner_d(l, m, n, beta);
        }
    }
    out
}

/// `d^l_{mn}(β_j)` on the polar grid of one bandwidth, for every
/// `|m|, |n| < bw` and `l = max(|m|,|n|)..bw`.
#[derive(Debug, Clone)]
pub struct WignerTable {
    bw: usize,
    side: usize,
    offsets: Vec<usize>,
    values: Vec<f64>,
}

impl WignerTable {
    pub fn new(bw: BandLimit) -> Self {
        let b = bw.get();
        let side = bw.side();
        let span = 2 * b - 1;
        let mut offsets = Vec::with_capacity(span * span + 1);
        let mut total = 0;
        for m in -(b as i64 - 1)..b as i64 {
            for n in -(b as i64 - 1)..b as i64 {
                offsets.push(total);
                let j0 = m.abs().max(n.abs()) as usize;
                total += (b - j0) * side;
            }
        }
        offsets.push(total);
        let mut values = vec![0.0; total];
        let mut col = vec![0.0; b];
        let betas: Vec<f64> = (0..side).map(|j| polar_angle(bw, j)).collect();
        let mut pair = 0;
        for m in -(b as i64 - 1)..b as i64 {
            for n in -(b as i64 - 1)..b as i64 {
                let j0 = m.abs().max(n.abs()) as usize;
                let rows = b - j0;
                for (j, &beta) in betas.iter().enumerate() {
                    wigner_column(m, n, beta, &mut col[..rows]);
                    for (i, v) in col[..rows].iter().enumerate() {
                        values[offsets[pair] + i * side + j] = *v;
                    }
                }
                pair += 1;
            }
        }
        Self { bw: b, side, offsets, values }
    }

    #[inline]
    pub fn bw(&self) -> usize {
        self.bw
    }

    #[inline]
    fn pair(&self, m: i64, n: i64) -> usize {
        let span = 2 * self.bw as i64 - 1;
        ((m + self.bw as i64 - 1) * span + (n + self.bw as i64 - 1)) as usize
    }

    /// Rows `[l][j]` for `l = max(|m|,|n|)..bw`, flattened.
    #[inline]
    pub fn pair_rows(&self, m: i64, n: i64) -> &[f64] {
        let p = self.pair(m, n);
        &self.values[self.offsets[p]..self.offsets[p + 1]]
    }

    #[inline]
    pub fn get(&self, l: usize, m: i64, n: i64, j: usize) -> f64 {
        let j0 = m.abs().max(n.abs()) as usize;
        self.pair_rows(m, n)[(l - j0) * self.side + j]
    }
}
