//! Thin wrappers over `matrixmultiply::dgemm` for the four access patterns
//! the tape needs. All matrices are row-major; transposition is expressed
//! through strides, so nothing is copied.

/// c = a(m,k) * b(k,n), overwriting c.
pub fn gemm(m: usize, k: usize, n: usize, a: &[f64], b: &[f64], c: &mut [f64]) {
    debug_assert_eq!(a.len(), m * k);
    debug_assert_eq!(b.len(), k * n);
    debug_assert_eq!(c.len(), m * n);
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            1.0,
            a.as_ptr(),
            k as isize,
            1,
            b.as_ptr(),
            n as isize,
            1,
            0.0,
            c.as_mut_ptr(),
            n as isize,
            1,
        );
    }
}

/// c += a(m,k) * b(n,k)^T.
pub fn gemm_nt_acc(m: usize, k: usize, n: usize, a: &[f64], b: &[f64], c: &mut [f64]) {
    debug_assert_eq!(a.len(), m * k);
    debug_assert_eq!(b.len(), n * k);
    debug_assert_eq!(c.len(), m * n);
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            1.0,
            a.as_ptr(),
            k as isize,
            1,
            b.as_ptr(),
            1,
            k as isize,
            1.0,
            c.as_mut_ptr(),
            n as isize,
            1,
        );
    }
}

/// c += a(k,m)^T * b(k,n).
pub fn gemm_tn_acc(m: usize, k: usize, n: usize, a: &[f64], b: &[f64], c: &mut [f64]) {
    debug_assert_eq!(a.len(), k * m);
    debug_assert_eq!(b.len(), k * n);
    debug_assert_eq!(c.len(), m * n);
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            1.0,
            a.as_ptr(),
            1,
            m as isize,
            b.as_ptr(),
            n as isize,
            1,
            1.0,
            c.as_mut_ptr(),
            n as isize,
            1,
        );
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    // Triple-loop reference; the oracle every kernel is checked against.
    fn reference(m: usize, k: usize, n: usize, a: &[f64], b: &[f64]) -> Vec<f64> {
        let mut c = vec![0.0; m * n];
        for i in 0..m {
            for j in 0..n {
                let mut acc = 0.0;
                for kk in 0..k {
                    acc += a[i * k + kk] * b[kk * n + j];
                }
                c[i * n + j] = acc;
            }
        }
        c
    }

    fn pseudo_random(len: usize, seed: u64) -> Vec<f64> {
        // splitmix64-derived doubles in [-1, 1); reproducible without rand.
        let mut s = seed;
        (0..len)
            .map(|_| {
                s = s.wrapping_add(0x9e3779b97f4a7c15);
                let mut z = s;
                z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
                z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
                z ^= z >> 31;
                (z >> 11) as f64 / (1u64 << 52) as f64 * 2.0 - 1.0
            })
            .collect()
    }

    #[test]
    fn gemm_matches_triple_loop() {
        let (m, k, n) = (3, 4, 2);
        let a = pseudo_random(m * k, 1);
        let b = pseudo_random(k * n, 2);
        let mut c = vec![0.0; m * n];
        gemm(m, k, n, &a, &b, &mut c);
        let want = reference(m, k, n, &a, &b);
        for (x, y) in c.iter().zip(&want) {
            assert!((x - y).abs() <= 1e-12, "{x} vs {y}");
        }
    }

    #[test]
    fn transposed_kernels_match_triple_loop() {
        let (m, k, n) = (5, 7, 3);
        let a = pseudo_random(m * k, 3);
        let bt = pseudo_random(n * k, 4); // stores b^T as (n,k)
        let mut b = vec![0.0; k * n];
        for i in 0..n {
            for j in 0..k {
                b[j * n + i] = bt[i * k + j];
            }
        }
        let want = reference(m, k, n, &a, &b);
        let mut c = vec![0.0; m * n];
        gemm_nt_acc(m, k, n, &a, &bt, &mut c);
        for (x, y) in c.iter().zip(&want) {
            assert!((x - y).abs() <= 1e-12);
        }

        let at = {
            let mut t = vec![0.0; k * m];
            for i in 0..m {
                for j in 0..k {
                    t[j * m + i] = a[i * k + j];
                }
            }
            t
        };
        let mut c2 = vec![0.0; m * n];
        gemm_tn_acc(m, k, n, &at, &b, &mut c2);
        for (x, y) in c2.iter().zip(&want) {
            assert!((x - y).abs() <= 1e-12);
        }
    }
}
