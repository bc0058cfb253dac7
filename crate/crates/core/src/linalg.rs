//! Thin row-major wrapper over `matrixmultiply::dgemm`.

/// `C = alpha · op(A) · op(B) + beta · C`, all row-major; `op(A)` is `m×k`,
/// `op(B)` is `k×n`. With `ta`, `a` holds the `k×m` matrix (likewise `tb`).
#[allow(clippy::too_many_arguments)]
pub fn gemm(
    m: usize,
    k: usize,
    n: usize,
    alpha: f64,
    a: &[f64],
    ta: bool,
    b: &[f64],
    tb: bool,
    beta: f64,
    c: &mut [f64],
) {
    assert!(a.len() >= m * k && b.len() >= k * n && c.len() >= m * n, "gemm operand too short");
    if m == 0 || n == 0 {
        return;
    }
    let (rsa, csa) = if ta { (1, m as isize) } else { (k as isize, 1) };
    let (rsb, csb) = if tb { (1, k as isize) } else { (n as isize, 1) };
    // SAFETY: strides and lengths were checked against the slices above.
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            alpha,
            a.as_ptr(),
            rsa,
            csa,
            b.as_ptr(),
            rsb,
            csb,
            beta,
            c.as_mut_ptr(),
            n as isize,
            1,
        );
    }
}

/// Row-major `C = alpha · A · B + beta · C` with explicit row strides
/// (unit column strides); `A` is `m×k`, `B` is `k×n`.
#[allow(clippy::too_many_arguments)]
pub fn gemm_strided(
    m: usize,
    k: usize,
    n: usize,
    alpha: f64,
    a: &[f64],
    lda: usize,
    ta: bool,
    b: &[f64],
    ldb: usize,
    beta: f64,
    c: &mut [f64],
    ldc: usize,
) {
    if m == 0 || n == 0 {
        return;
    }
    let (ar, ac) = if ta { (k, m) } else { (m, k) };
    assert!(ac <= lda && a.len() >= (ar - 1) * lda + ac, "gemm operand A too short");
    assert!(n <= ldb && (k == 0 || b.len() >= (k - 1) * ldb + n), "gemm operand B too short");
    assert!(n <= ldc && c.len() >= (m - 1) * ldc + n, "gemm operand C too short");
    let (rsa, csa) = if ta { (1, lda as isize) } else { (lda as isize, 1) };
    // SAFETY: every addressed element lies inside the slices checked above.
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            alpha,
            a.as_ptr(),
            rsa,
            csa,
            b.as_ptr(),
            ldb as isize,
            1,
            beta,
            c.as_mut_ptr(),
            ldc as isize,
            1,
        );
    }
}
