//! Matrix-product kernels for the training batch shapes.
//!
//! Every product in the batched passes has one of two shapes: a small matrix
//! times a wide batch panel (forward layers and adjoint back-propagation), or
//! two wide panels contracted over the batch dimension (weight gradients).
//! General-purpose BLAS picks kernels for large square operands and loses a
//! lot on these; the AVX-512 paths here are written for exactly these shapes.
//! Without AVX-512 everything falls back to `ndarray`'s general matrix
//! multiply, which keeps the crate portable.
//!
//! All paths accumulate in a fixed order, so results are reproducible on a
//! given machine.

use ndarray::linalg::general_mat_mul;
use ndarray::{ArrayView2, ArrayViewMut2, ShapeBuilder};

#[cfg(target_arch = "x86_64")]
use std::arch::is_x86_feature_detected;

fn avx512_available() -> bool {
    #[cfg(target_arch = "x86_64")]
    {
        static FLAG: std::sync::OnceLock<bool> = std::sync::OnceLock::new();
        *FLAG.get_or_init(|| is_x86_feature_detected!("avx512f"))
    }
    #[cfg(not(target_arch = "x86_64"))]
    {
        false
    }
}

/// C(m×n) = A(m×k)·B(k×n), optionally added onto the existing C.
///
/// `a` is packed row-major with stride `k`; `b` and `c` are row-major panels
/// with leading dimensions `ldb` and `ldc` (≥ n).
#[allow(clippy::too_many_arguments)]
pub(crate) fn gemm_small_a(
    m: usize,
    k: usize,
    n: usize,
    a: &[f64],
    b: &[f64],
    ldb: usize,
    c: &mut [f64],
    ldc: usize,
    accumulate: bool,
) {
    debug_assert!(a.len() >= m * k);
    debug_assert!(ldb >= n && ldc >= n);
    debug_assert!(b.len() >= (k - 1) * ldb + n);
    debug_assert!(c.len() >= (m - 1) * ldc + n);
    if m == 0 || n == 0 || k == 0 {
        return;
    }
    #[cfg(target_arch = "x86_64")]
    if avx512_available() {
        unsafe { avx512::gemm_small_a(m, k, n, a, b, ldb, c, ldc, accumulate) };
        return;
    }
    fallback_gemm_small_a(m, k, n, a, b, ldb, c, ldc, accumulate);
}

/// C(m×n) += A(m×len)·B(n×len)ᵀ, contracting two row-major panels over their
/// shared column count `len`. Always accumulates; `c` is packed with stride n.
#[allow(clippy::too_many_arguments)]
pub(crate) fn gemm_panel_dot(
    m: usize,
    n: usize,
    len: usize,
    a: &[f64],
    lda: usize,
    b: &[f64],
    ldb: usize,
    c: &mut [f64],
) {
    debug_assert!(lda >= len && ldb >= len);
    debug_assert!(a.len() >= (m - 1) * lda + len);
    debug_assert!(b.len() >= (n - 1) * ldb + len);
    debug_assert!(c.len() >= m * n);
    if m == 0 || n == 0 || len == 0 {
        return;
    }
    #[cfg(target_arch = "x86_64")]
    if avx512_available() {
        unsafe { avx512::gemm_panel_dot(m, n, len, a, lda, b, ldb, c) };
        return;
    }
    fallback_gemm_panel_dot(m, n, len, a, lda, b, ldb, c);
}

#[allow(clippy::too_many_arguments)]
pub(crate) fn fallback_gemm_small_a(
    m: usize,
    k: usize,
    n: usize,
    a: &[f64],
    b: &[f64],
    ldb: usize,
    c: &mut [f64],
    ldc: usize,
    accumulate: bool,
) {
    let av = ArrayView2::from_shape((m, k), &a[..m * k]).unwrap();
    let bv = ArrayView2::from_shape((k, n).strides((ldb, 1)), b).unwrap();
    let mut cv = ArrayViewMut2::from_shape((m, n).strides((ldc, 1)), c).unwrap();
    let beta = if accumulate { 1.0 } else { 0.0 };
    general_mat_mul(1.0, &av, &bv, beta, &mut cv);
}

#[allow(clippy::too_many_arguments)]
pub(crate) fn fallback_gemm_panel_dot(
    m: usize,
    n: usize,
    len: usize,
    a: &[f64],
    lda: usize,
    b: &[f64],
    ldb: usize,
    c: &mut [f64],
) {
    let av = ArrayView2::from_shape((m, len).strides((lda, 1)), a).unwrap();
    let bv = ArrayView2::from_shape((n, len).strides((ldb, 1)), b).unwrap();
    let mut cv = ArrayViewMut2::from_shape((m, n), &mut c[..m * n]).unwrap();
    general_mat_mul(1.0, &av, &bv.t(), 1.0, &mut cv);
}

#[cfg(target_arch = "x86_64")]
mod avx512 {
    use std::arch::x86_64::*;

    /// Row-block height of the streaming kernel; together with 4 vector
    /// columns this keeps 24 accumulators in registers.
    const MR: usize = 6;
    /// Columns handled per tile (4 × 8 lanes).
    const NT: usize = 32;

    #[target_feature(enable = "avx512f")]
    unsafe fn stream_tile<const ROWS: usize>(
        k: usize,
        a: *const f64,
        lda: usize,
        b: *const f64,
        ldb: usize,
        c: *mut f64,
        ldc: usize,
        accumulate: bool,
    ) {
        unsafe {
            let mut acc = [[_mm512_setzero_pd(); 4]; ROWS];
            if accumulate {
                let mut base = c as *const f64;
                for row in acc.iter_mut() {
                    for (j, v) in row.iter_mut().enumerate() {
                        *v = _mm512_loadu_pd(base.add(8 * j));
                    }
                    base = base.add(ldc);
                }
            }
            let mut bp = b;
            for kk in 0..k {
                let b0 = _mm512_loadu_pd(bp);
                let b1 = _mm512_loadu_pd(bp.add(8));
                let b2 = _mm512_loadu_pd(bp.add(16));
                let b3 = _mm512_loadu_pd(bp.add(24));
                bp = bp.add(ldb);
                let mut ap = a.add(kk);
                for row in acc.iter_mut() {
                    let va = _mm512_set1_pd(*ap);
                    ap = ap.add(lda);
                    row[0] = _mm512_fmadd_pd(va, b0, row[0]);
                    row[1] = _mm512_fmadd_pd(va, b1, row[1]);
                    row[2] = _mm512_fmadd_pd(va, b2, row[2]);
                    row[3] = _mm512_fmadd_pd(va, b3, row[3]);
                }
            }
            let mut base = c;
            for row in acc.iter() {
                for (j, v) in row.iter().enumerate() {
                    _mm512_storeu_pd(base.add(8 * j), *v);
                }
                base = base.add(ldc);
            }
        }
    }

    #[allow(clippy::too_many_arguments)]
    #[target_feature(enable = "avx512f")]
    pub(super) unsafe fn gemm_small_a(
        m: usize,
        k: usize,
        n: usize,
        a: &[f64],
        b: &[f64],
        ldb: usize,
        c: &mut [f64],
        ldc: usize,
        accumulate: bool,
    ) {
        let n_main = n - n % NT;
        let mut mb = 0;
        while mb < m {
            let rows = (m - mb).min(MR);
            let a_blk = a.as_ptr().wrapping_add(mb * k);
            let c_blk = c.as_mut_ptr().wrapping_add(mb * ldc);
            let mut nt = 0;
            while nt < n_main {
                let bp = b.as_ptr().wrapping_add(nt);
                let cp = c_blk.wrapping_add(nt);
                unsafe {
                    match rows {
                        1 => stream_tile::<1>(k, a_blk, k, bp, ldb, cp, ldc, accumulate),
                        2 => stream_tile::<2>(k, a_blk, k, bp, ldb, cp, ldc, accumulate),
                        3 => stream_tile::<3>(k, a_blk, k, bp, ldb, cp, ldc, accumulate),
                        4 => stream_tile::<4>(k, a_blk, k, bp, ldb, cp, ldc, accumulate),
                        5 => stream_tile::<5>(k, a_blk, k, bp, ldb, cp, ldc, accumulate),
                        _ => stream_tile::<6>(k, a_blk, k, bp, ldb, cp, ldc, accumulate),
                    }
                }
                nt += NT;
            }
            // column tail in scalar code; mul_add keeps the rounding identical
            // to the fused vector path so results do not depend on tiling
            for i in 0..rows {
                for j in n_main..n {
                    let mut sum = if accumulate {
                        unsafe { *c_blk.add(i * ldc + j) }
                    } else {
                        0.0
                    };
                    for kk in 0..k {
                        let (av, bv) =
                            unsafe { (*a_blk.add(i * k + kk), *b.as_ptr().add(kk * ldb + j)) };
                        sum = av.mul_add(bv, sum);
                    }
                    unsafe { *c_blk.add(i * ldc + j) = sum };
                }
            }
            mb += rows;
        }
    }

    /// Panel length per contraction tile, sized so four rows of each operand
    /// stay resident in L1/L2 while the 4×4 dot block runs.
    const KT: usize = 4096;

    #[target_feature(enable = "avx512f")]
    unsafe fn dot_block<const RA: usize, const RB: usize>(
        len: usize,
        a: *const f64,
        lda: usize,
        b: *const f64,
        ldb: usize,
        c: *mut f64,
        ldc: usize,
    ) {
        unsafe {
            let mut acc = [[_mm512_setzero_pd(); RB]; RA];
            let mut apr = [a; RA];
            for (i, p) in apr.iter_mut().enumerate() {
                *p = a.add(i * lda);
            }
            let mut bpr = [b; RB];
            for (j, p) in bpr.iter_mut().enumerate() {
                *p = b.add(j * ldb);
            }
            let main = len - len % 8;
            let mut kk = 0;
            while kk < main {
                let mut vb = [_mm512_setzero_pd(); RB];
                for (j, v) in vb.iter_mut().enumerate() {
                    *v = _mm512_loadu_pd(bpr[j]);
                    bpr[j] = bpr[j].add(8);
                }
                for (i, row) in acc.iter_mut().enumerate() {
                    let va = _mm512_loadu_pd(apr[i]);
                    apr[i] = apr[i].add(8);
                    for (j, v) in row.iter_mut().enumerate() {
                        *v = _mm512_fmadd_pd(va, vb[j], *v);
                    }
                }
                kk += 8;
            }
            if main < len {
                let mask: __mmask8 = (1u8 << (len - main)) - 1;
                let mut vb = [_mm512_setzero_pd(); RB];
                for (j, v) in vb.iter_mut().enumerate() {
                    *v = _mm512_maskz_loadu_pd(mask, bpr[j]);
                }
                for (i, row) in acc.iter_mut().enumerate() {
                    let va = _mm512_maskz_loadu_pd(mask, apr[i]);
                    for (j, v) in row.iter_mut().enumerate() {
                        *v = _mm512_fmadd_pd(va, vb[j], *v);
                    }
                }
            }
            for (i, row) in acc.iter().enumerate() {
                for (j, v) in row.iter().enumerate() {
                    *c.add(i * ldc + j) += _mm512_reduce_add_pd(*v);
                }
            }
        }
    }

    #[allow(clippy::too_many_arguments)]
    #[target_feature(enable = "avx512f")]
    pub(super) unsafe fn gemm_panel_dot(
        m: usize,
        n: usize,
        len: usize,
        a: &[f64],
        lda: usize,
        b: &[f64],
        ldb: usize,
        c: &mut [f64],
    ) {
        let mut kt = 0;
        while kt < len {
            let klen = (len - kt).min(KT);
            let mut i = 0;
            while i < m {
                let ra = (m - i).min(4);
                let mut j = 0;
                while j < n {
                    let rb = (n - j).min(4);
                    let ap = a.as_ptr().wrapping_add(i * lda + kt);
                    let bp = b.as_ptr().wrapping_add(j * ldb + kt);
                    let cp = c.as_mut_ptr().wrapping_add(i * n + j);
                    unsafe {
                        match (ra, rb) {
                            (1, 1) => dot_block::<1, 1>(klen, ap, lda, bp, ldb, cp, n),
                            (1, 2) => dot_block::<1, 2>(klen, ap, lda, bp, ldb, cp, n),
                            (1, 3) => dot_block::<1, 3>(klen, ap, lda, bp, ldb, cp, n),
                            (1, 4) => dot_block::<1, 4>(klen, ap, lda, bp, ldb, cp, n),
                            (2, 1) => dot_block::<2, 1>(klen, ap, lda, bp, ldb, cp, n),
                            (2, 2) => dot_block::<2, 2>(klen, ap, lda, bp, ldb, cp, n),
                            (2, 3) => dot_block::<2, 3>(klen, ap, lda, bp, ldb, cp, n),
                            (2, 4) => dot_block::<2, 4>(klen, ap, lda, bp, ldb, cp, n),
                            (3, 1) => dot_block::<3, 1>(klen, ap, lda, bp, ldb, cp, n),
                            (3, 2) => dot_block::<3, 2>(klen, ap, lda, bp, ldb, cp, n),
                            (3, 3) => dot_block::<3, 3>(klen, ap, lda, bp, ldb, cp, n),
                            (3, 4) => dot_block::<3, 4>(klen, ap, lda, bp, ldb, cp, n),
                            (4, 1) => dot_block::<4, 1>(klen, ap, lda, bp, ldb, cp, n),
                            (4, 2) => dot_block::<4, 2>(klen, ap, lda, bp, ldb, cp, n),
                            (4, 3) => dot_block::<4, 3>(klen, ap, lda, bp, ldb, cp, n),
                            _ => dot_block::<4, 4>(klen, ap, lda, bp, ldb, cp, n),
                        }
                    }
                    j += rb;
                }
                i += ra;
            }
            kt += klen;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{RngExt, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn filled(rng: &mut ChaCha8Rng, len: usize) -> Vec<f64> {
        (0..len).map(|_| rng.random_range(-1.0..1.0)).collect()
    }

    #[test]
    fn small_a_product_matches_reference() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for &(m, k, n) in &[
            (1usize, 1usize, 1usize),
            (1, 20, 33),
            (3, 2, 100),
            (6, 20, 32),
            (7, 13, 95),
            (20, 20, 3001),
            (40, 40, 257),
        ] {
            let ldb = n + 3;
            let ldc = n + 5;
            let a = filled(&mut rng, m * k);
            let b = filled(&mut rng, k * ldb);
            let mut c = filled(&mut rng, m * ldc);
            let mut c_ref = c.clone();
            for accumulate in [false, true] {
                gemm_small_a(m, k, n, &a, &b, ldb, &mut c, ldc, accumulate);
                fallback_gemm_small_a(m, k, n, &a, &b, ldb, &mut c_ref, ldc, accumulate);
                for i in 0..m {
                    for j in 0..n {
                        let got = c[i * ldc + j];
                        let want = c_ref[i * ldc + j];
                        assert!(
                            (got - want).abs() <= 1e-12 * want.abs().max(1.0),
                            "({m},{k},{n}) acc={accumulate} at ({i},{j}): {got} vs {want}"
                        );
                    }
                }
            }
        }
    }

    #[test]
    fn small_a_leaves_columns_beyond_n_untouched() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let (m, k, n, ldb, ldc) = (5, 7, 40, 44, 46);
        let a = filled(&mut rng, m * k);
        let b = filled(&mut rng, k * ldb);
        let mut c = filled(&mut rng, m * ldc);
        let before = c.clone();
        gemm_small_a(m, k, n, &a, &b, ldb, &mut c, ldc, false);
        for i in 0..m {
            for j in n..ldc {
                assert_eq!(c[i * ldc + j], before[i * ldc + j]);
            }
        }
    }

    #[test]
    fn panel_dot_matches_reference() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for &(m, n, len) in &[
            (1usize, 1usize, 9usize),
            (1, 20, 1000),
            (4, 4, 4096),
            (5, 7, 4099),
            (20, 20, 8192),
            (20, 2, 12_345),
            (3, 11, 8),
        ] {
            let lda = len + 1;
            let ldb = len + 2;
            let a = filled(&mut rng, m * lda);
            let b = filled(&mut rng, n * ldb);
            let mut c = filled(&mut rng, m * n);
            let mut c_ref = c.clone();
            gemm_panel_dot(m, n, len, &a, lda, &b, ldb, &mut c);
            fallback_gemm_panel_dot(m, n, len, &a, lda, &b, ldb, &mut c_ref);
            for i in 0..m * n {
                assert!(
                    (c[i] - c_ref[i]).abs() <= 1e-11 * c_ref[i].abs().max(1.0),
                    "({m},{n},{len}) at {i}: {} vs {}",
                    c[i],
                    c_ref[i]
                );
            }
        }
    }

    #[test]
    fn results_are_reproducible_across_calls() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let (m, k, n) = (6, 20, 1024);
        let a = filled(&mut rng, m * k);
        let b = filled(&mut rng, k * n);
        let mut c1 = vec![0.0; m * n];
        let mut c2 = vec![0.0; m * n];
        gemm_small_a(m, k, n, &a, &b, n, &mut c1, n, false);
        gemm_small_a(m, k, n, &a, &b, n, &mut c2, n, false);
        assert_eq!(c1, c2);

        let mut d1 = vec![0.0; m * m];
        let mut d2 = vec![0.0; m * m];
        gemm_panel_dot(m, m, n, &a_panel(&b, m, n), n, &a_panel(&b, m, n), n, &mut d1);
        gemm_panel_dot(m, m, n, &a_panel(&b, m, n), n, &a_panel(&b, m, n), n, &mut d2);
        assert_eq!(d1, d2);
    }

    fn a_panel(b: &[f64], m: usize, n: usize) -> &[f64] {
        &b[..m * n]
    }

    /// Not part of the suite; run with `--ignored --nocapture` to compare
    /// kernel throughput against the `ndarray` fallback on this machine.
    #[test]
    #[ignore]
    fn bench_shapes() {
        use std::time::Instant;
        let cb = 16384usize;
        let a: Vec<f64> = (0..40 * 40).map(|i| (i as f64).sin()).collect();
        let b: Vec<f64> = (0..40 * cb).map(|i| (i as f64).cos()).collect();
        let mut bench = |name: &str, flops: f64, f: &mut dyn FnMut()| {
            for _ in 0..3 {
                f();
            }
            let reps = 200;
            let t = Instant::now();
            for _ in 0..reps {
                f();
            }
            let s = t.elapsed().as_secs_f64() / reps as f64;
            eprintln!("{name}: {:.3} ms  {:.2} GFLOPS", s * 1e3, flops / s / 1e9);
        };
        let mut c = vec![0.0; 40 * cb];
        bench("small_a 20x20xcb", 2.0 * 400.0 * cb as f64, &mut || {
            gemm_small_a(20, 20, cb, &a, &b, cb, &mut c, cb, false);
        });
        bench("small_a 20x2xcb", 2.0 * 40.0 * cb as f64, &mut || {
            gemm_small_a(20, 2, cb, &a, &b, cb, &mut c, cb, false);
        });
        bench("small_a 1x20xcb", 2.0 * 20.0 * cb as f64, &mut || {
            gemm_small_a(1, 20, cb, &a, &b, cb, &mut c, cb, false);
        });
        let mut cd = vec![0.0; 40 * 40];
        bench("panel_dot 20x20xcb", 2.0 * 400.0 * cb as f64, &mut || {
            gemm_panel_dot(20, 20, cb, &b, cb, &b, cb, &mut cd);
        });
        bench("panel_dot 1x20xcb", 2.0 * 20.0 * cb as f64, &mut || {
            gemm_panel_dot(1, 20, cb, &b, cb, &b, cb, &mut cd);
        });
        let mut cf = vec![0.0; 40 * cb];
        bench("fallback 20x20xcb", 2.0 * 400.0 * cb as f64, &mut || {
            fallback_gemm_small_a(20, 20, cb, &a, &b, cb, &mut cf, cb, false);
        });
    }
}
