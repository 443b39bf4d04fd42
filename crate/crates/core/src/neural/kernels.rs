//! Dense products used by the network, specialised for small batches.
//!
//! `f32` takes an AVX2/FMA path when the CPU supports it (checked once at
//! runtime); everything else runs the portable loops.

use super::Scalar;

/// `out[i][r] = bias[r] + dot(x[i], w[r])` for `x: n x k`, `w: m x k`.
pub(crate) fn affine_nt<T: Scalar>(
    x: &[T],
    w: &[T],
    bias: &[T],
    n: usize,
    k: usize,
    m: usize,
    out: &mut [T],
) {
    assert!(x.len() >= n * k && w.len() >= m * k && bias.len() >= m && out.len() >= n * m);
    if let Some(f) = T::fast_affine_nt() {
        // SAFETY: the fast path is only returned when the CPU supports it, and
        // the slice bounds are asserted above.
        unsafe { f(x, w, bias, n, k, m, out) };
        return;
    }
    for i in 0..n {
        let xi = &x[i * k..(i + 1) * k];
        for r in 0..m {
            let wr = &w[r * k..(r + 1) * k];
            let mut acc = T::zero();
            for (a, b) in xi.iter().zip(wr) {
                acc = acc + *a * *b;
            }
            out[i * m + r] = bias[r] + acc;
        }
    }
}

/// `out += a * b` for `a: n x p`, `b: p x k`.
pub(crate) fn gemm_nn_acc<T: Scalar>(
    a: &[T],
    b: &[T],
    n: usize,
    p: usize,
    k: usize,
    out: &mut [T],
) {
    assert!(a.len() >= n * p && b.len() >= p * k && out.len() >= n * k);
    if let Some(f) = T::fast_gemm_nn() {
        // SAFETY: as for `affine_nt`.
        unsafe { f(a, b, n, p, k, out) };
        return;
    }
    for i in 0..n {
        let oi = &mut out[i * k..(i + 1) * k];
        for q in 0..p {
            let coef = a[i * p + q];
            if coef != T::zero() {
                T::axpy(coef, &b[q * k..(q + 1) * k], oi);
            }
        }
    }
}

/// `out = d * w` for `d: n x m`, `w: m x k`.
pub(crate) fn matmul_nn<T: Scalar>(d: &[T], w: &[T], n: usize, m: usize, k: usize, out: &mut [T]) {
    out[..n * k].iter_mut().for_each(|v| *v = T::zero());
    gemm_nn_acc(d, w, n, m, k, out);
}

/// `g += d^T * x` for `d: n x m`, `x: n x k`.
pub(crate) fn accumulate_tn<T: Scalar>(
    d: &[T],
    x: &[T],
    n: usize,
    m: usize,
    k: usize,
    g: &mut [T],
) {
    assert!(d.len() >= n * m);
    let mut dt = vec![T::zero(); m * n];
    for i in 0..n {
        for r in 0..m {
            dt[r * n + i] = d[i * m + r];
        }
    }
    gemm_nn_acc(&dt, x, m, n, k, g);
}

pub(crate) type AffineFn<T> = unsafe fn(&[T], &[T], &[T], usize, usize, usize, &mut [T]);
pub(crate) type GemmFn<T> = unsafe fn(&[T], &[T], usize, usize, usize, &mut [T]);

/// Tile kernels for one vector ISA. `$w` is the lane count; affine tiles are
/// up to `$ai` batch rows by 4 weight rows, product tiles `$ni` rows by two
/// vectors of columns.
#[cfg(target_arch = "x86_64")]
macro_rules! simd_kernels {
    ($feat:literal, $v:ty, $w:literal, $ai:literal, $ni:literal,
     zero = $zero:ident, load = $load:ident, store = $store:ident,
     fma = $fma:ident, splat = $splat:ident, hsum = $hsum:path) => {
        #[inline]
        #[target_feature(enable = $feat)]
        unsafe fn tile<const BI: usize, const BR: usize>(
            x: &[f32],
            w: &[f32],
            bias: &[f32],
            (i, r): (usize, usize),
            k: usize,
            m: usize,
            out: &mut [f32],
        ) {
            let kv = k - k % $w;
            let (xp, wp) = (x.as_ptr(), w.as_ptr());
            let mut acc: [[$v; BR]; BI] = [[$zero(); BR]; BI];
            let mut c = 0;
            while c < kv {
                let mut wv: [$v; BR] = [$zero(); BR];
                for rr in 0..BR {
                    wv[rr] = $load(wp.add((r + rr) * k + c));
                }
                for ii in 0..BI {
                    let xv = $load(xp.add((i + ii) * k + c));
                    for rr in 0..BR {
                        acc[ii][rr] = $fma(xv, wv[rr], acc[ii][rr]);
                    }
                }
                c += $w;
            }
            for ii in 0..BI {
                for rr in 0..BR {
                    let mut s = $hsum(acc[ii][rr]);
                    for cc in kv..k {
                        s += x[(i + ii) * k + cc] * w[(r + rr) * k + cc];
                    }
                    out[(i + ii) * m + r + rr] = bias[r + rr] + s;
                }
            }
        }

        #[target_feature(enable = $feat)]
        unsafe fn affine_block<const BR: usize>(
            x: &[f32],
            w: &[f32],
            bias: &[f32],
            r: usize,
            (n, k, m): (usize, usize, usize),
            out: &mut [f32],
        ) {
            let mut i = 0;
            while i + $ai <= n {
                tile::<$ai, BR>(x, w, bias, (i, r), k, m, out);
                i += $ai;
            }
            match n - i {
                0 => {}
                1 => tile::<1, BR>(x, w, bias, (i, r), k, m, out),
                2 => tile::<2, BR>(x, w, bias, (i, r), k, m, out),
                3 => tile::<3, BR>(x, w, bias, (i, r), k, m, out),
                _ => tile::<4, BR>(x, w, bias, (i, r), k, m, out),
            }
        }

        /// `out = x * w^T + bias`. Weight rows are the outer loop, so a block
        /// of them stays in L1 while the batch streams past.
        #[target_feature(enable = $feat)]
        pub unsafe fn affine_nt_f32(
            x: &[f32],
            w: &[f32],
            bias: &[f32],
            n: usize,
            k: usize,
            m: usize,
            out: &mut [f32],
        ) {
            let mut r = 0;
            while r + 4 <= m {
                affine_block::<4>(x, w, bias, r, (n, k, m), out);
                r += 4;
            }
            while r < m {
                affine_block::<1>(x, w, bias, r, (n, k, m), out);
                r += 1;
            }
        }

        #[inline]
        #[target_feature(enable = $feat)]
        unsafe fn nn_tile<const BI: usize>(
            a: &[f32],
            b: &[f32],
            (i, c): (usize, usize),
            p: usize,
            k: usize,
            out: &mut [f32],
        ) {
            let (ap, bp, op) = (a.as_ptr(), b.as_ptr(), out.as_mut_ptr());
            let mut acc: [[$v; 2]; BI] = [[$zero(); 2]; BI];
            for ii in 0..BI {
                acc[ii][0] = $load(op.add((i + ii) * k + c));
                acc[ii][1] = $load(op.add((i + ii) * k + c + $w));
            }
            for q in 0..p {
                let b0 = $load(bp.add(q * k + c));
                let b1 = $load(bp.add(q * k + c + $w));
                for ii in 0..BI {
                    let av = $splat(*ap.add((i + ii) * p + q));
                    acc[ii][0] = $fma(av, b0, acc[ii][0]);
                    acc[ii][1] = $fma(av, b1, acc[ii][1]);
                }
            }
            for ii in 0..BI {
                $store(op.add((i + ii) * k + c), acc[ii][0]);
                $store(op.add((i + ii) * k + c + $w), acc[ii][1]);
            }
        }

        /// `out += a * b`, column panels of `b` outermost.
        #[target_feature(enable = $feat)]
        pub unsafe fn gemm_nn_f32(
            a: &[f32],
            b: &[f32],
            n: usize,
            p: usize,
            k: usize,
            out: &mut [f32],
        ) {
            let kv = k - k % (2 * $w);
            let mut c = 0;
            while c < kv {
                let mut i = 0;
                while i + $ni <= n {
                    nn_tile::<$ni>(a, b, (i, c), p, k, out);
                    i += $ni;
                }
                match n - i {
                    0 => {}
                    1 => nn_tile::<1>(a, b, (i, c), p, k, out),
                    2 => nn_tile::<2>(a, b, (i, c), p, k, out),
                    3 => nn_tile::<3>(a, b, (i, c), p, k, out),
                    4 => nn_tile::<4>(a, b, (i, c), p, k, out),
                    5 => nn_tile::<5>(a, b, (i, c), p, k, out),
                    6 => nn_tile::<6>(a, b, (i, c), p, k, out),
                    _ => nn_tile::<7>(a, b, (i, c), p, k, out),
                }
                c += 2 * $w;
            }
            for ii in 0..n {
                for q in 0..p {
                    let coef = a[ii * p + q];
                    for cc in kv..k {
                        out[ii * k + cc] += coef * b[q * k + cc];
                    }
                }
            }
        }
    };
}

#[cfg(target_arch = "x86_64")]
pub(crate) mod x86 {
    use std::arch::x86_64::*;
    use std::sync::OnceLock;

    pub fn has_avx2_fma() -> bool {
        static HAS: OnceLock<bool> = OnceLock::new();
        *HAS.get_or_init(|| is_x86_feature_detected!("avx2") && is_x86_feature_detected!("fma"))
    }

    #[inline]
    #[target_feature(enable = "avx2,fma")]
    unsafe fn hsum(v: __m256) -> f32 {
        let hi = _mm256_extractf128_ps(v, 1);
        let lo = _mm256_castps256_ps128(v);
        let s = _mm_add_ps(hi, lo);
        let s = _mm_add_ps(s, _mm_movehl_ps(s, s));
        let s = _mm_add_ss(s, _mm_shuffle_ps(s, s, 0x55));
        _mm_cvtss_f32(s)
    }

    simd_kernels!(
        "avx2,fma",
        __m256,
        8,
        4,
        6,
        zero = _mm256_setzero_ps,
        load = _mm256_loadu_ps,
        store = _mm256_storeu_ps,
        fma = _mm256_fmadd_ps,
        splat = _mm256_set1_ps,
        hsum = hsum
    );

    #[target_feature(enable = "avx2,fma")]
    pub unsafe fn axpy_f32(a: f32, x: &[f32], y: &mut [f32]) {
        let n = x.len().min(y.len());
        let nv = n - n % 8;
        let av = _mm256_set1_ps(a);
        let (xp, yp) = (x.as_ptr(), y.as_mut_ptr());
        let mut j = 0;
        while j < nv {
            let yv = _mm256_loadu_ps(yp.add(j));
            _mm256_storeu_ps(
                yp.add(j),
                _mm256_fmadd_ps(av, _mm256_loadu_ps(xp.add(j)), yv),
            );
            j += 8;
        }
        for j in nv..n {
            y[j] += a * x[j];
        }
    }
}

#[cfg(target_arch = "x86_64")]
pub(crate) mod x86_512 {
    use std::arch::x86_64::*;
    use std::sync::OnceLock;

    pub fn has_avx512() -> bool {
        static HAS: OnceLock<bool> = OnceLock::new();
        *HAS.get_or_init(|| is_x86_feature_detected!("avx512f"))
    }

    simd_kernels!(
        "avx512f",
        __m512,
        16,
        5,
        8,
        zero = _mm512_setzero_ps,
        load = _mm512_loadu_ps,
        store = _mm512_storeu_ps,
        fma = _mm512_fmadd_ps,
        splat = _mm512_set1_ps,
        hsum = _mm512_reduce_add_ps
    );
}

#[cfg(test)]
mod tests {
    use super::*;

    fn data(len: usize, seed: u32) -> Vec<f32> {
        (0..len)
            .map(|i| (((i as u32).wrapping_mul(2654435761) ^ seed) % 1000) as f32 / 500.0 - 1.0)
            .collect()
    }

    #[test]
    fn fast_affine_matches_portable_loop() {
        for &(n, k, m) in &[
            (1, 16, 512),
            (13, 512, 512),
            (5, 20, 7),
            (3, 7, 3),
            (11, 33, 9),
        ] {
            let (x, w, b) = (data(n * k, 1), data(m * k, 2), data(m, 3));
            let mut fast = vec![0.0; n * m];
            affine_nt(&x, &w, &b, n, k, m, &mut fast);
            for i in 0..n {
                for r in 0..m {
                    let want: f64 = b[r] as f64
                        + (0..k)
                            .map(|c| x[i * k + c] as f64 * w[r * k + c] as f64)
                            .sum::<f64>();
                    assert!((fast[i * m + r] as f64 - want).abs() < 1e-3, "{n}x{k}x{m}");
                }
            }
        }
    }

    #[test]
    fn nn_and_tn_products() {
        for &(n, m, k) in &[(3, 5, 9), (7, 20, 37), (13, 16, 48), (9, 50, 512)] {
            let d = data(n * m, 4);
            let w = data(m * k, 5);
            let mut out = vec![0.0f32; n * k];
            matmul_nn(&d, &w, n, m, k, &mut out);
            for i in 0..n {
                for c in 0..k {
                    let want: f32 = (0..m).map(|r| d[i * m + r] * w[r * k + c]).sum();
                    assert!((out[i * k + c] - want).abs() < 1e-4);
                }
            }
            let x = data(n * k, 6);
            let mut g = vec![1.0f32; m * k];
            accumulate_tn(&d, &x, n, m, k, &mut g);
            for r in 0..m {
                for c in 0..k {
                    let want: f32 = 1.0 + (0..n).map(|i| d[i * m + r] * x[i * k + c]).sum::<f32>();
                    assert!((g[r * k + c] - want).abs() < 1e-4);
                }
            }
        }
    }
}
