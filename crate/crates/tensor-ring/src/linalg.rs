//! Small dense linear-algebra kernels used across the crate.
//!
//! Matrices are column-major `&[f64]` slices with explicit dimensions;
//! GEMM goes through `matrixmultiply`, everything else is hand-rolled
//! because the involved matrices are tiny (a few dozen rows at most).

use num_complex::Complex64;

/// General strided GEMM: `C <- alpha * A * B + beta * C`.
///
/// `a_off`/`b_off`/`c_off` are starting offsets into the slices; `rs*`/`cs*`
/// are row/column strides in elements. All strides must be positive.
#[allow(clippy::too_many_arguments)]
pub fn gemm_strided(
    m: usize,
    k: usize,
    n: usize,
    alpha: f64,
    a: &[f64],
    a_off: usize,
    rsa: usize,
    csa: usize,
    b: &[f64],
    b_off: usize,
    rsb: usize,
    csb: usize,
    beta: f64,
    c: &mut [f64],
    c_off: usize,
    rsc: usize,
    csc: usize,
) {
    if m == 0 || n == 0 {
        return;
    }
    if k == 0 {
        // GEMM with an empty inner dimension only scales C.
        for j in 0..n {
            for i in 0..m {
                let idx = c_off + i * rsc + j * csc;
                c[idx] *= beta;
            }
        }
        return;
    }
    debug_assert!(a_off + (m - 1) * rsa + (k - 1) * csa < a.len());
    debug_assert!(b_off + (k - 1) * rsb + (n - 1) * csb < b.len());
    debug_assert!(c_off + (m - 1) * rsc + (n - 1) * csc < c.len());
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            alpha,
            a.as_ptr().add(a_off),
            rsa as isize,
            csa as isize,
            b.as_ptr().add(b_off),
            rsb as isize,
            csb as isize,
            beta,
            c.as_mut_ptr().add(c_off),
            rsc as isize,
            csc as isize,
        );
    }
}

/// `A (m x k) * B (k x n)`, both column-major, result column-major.
pub fn matmul(m: usize, k: usize, a: &[f64], n: usize, b: &[f64]) -> Vec<f64> {
    assert_eq!(a.len(), m * k);
    assert_eq!(b.len(), k * n);
    let mut c = vec![0.0; m * n];
    gemm_strided(m, k, n, 1.0, a, 0, 1, m, b, 0, 1, k, 0.0, &mut c, 0, 1, m);
    c
}

/// `A^T (k x m) * B (k x n)` for column-major `A (k x m)`, `B (k x n)`.
pub fn matmul_tn(k: usize, m: usize, a: &[f64], n: usize, b: &[f64]) -> Vec<f64> {
    assert_eq!(a.len(), k * m);
    assert_eq!(b.len(), k * n);
    let mut c = vec![0.0; m * n];
    gemm_strided(m, k, n, 1.0, a, 0, k, 1, b, 0, 1, k, 0.0, &mut c, 0, 1, m);
    c
}

pub fn transpose(rows: usize, cols: usize, a: &[f64]) -> Vec<f64> {
    assert_eq!(a.len(), rows * cols);
    let mut t = vec![0.0; rows * cols];
    for c in 0..cols {
        for r in 0..rows {
            t[c + r * cols] = a[r + c * rows];
        }
    }
    t
}

/// Eigendecomposition of a symmetric matrix by cyclic Jacobi rotations.
///
/// Returns `(eigenvalues, eigenvectors)` with eigenvectors stored column-major,
/// so `A = V diag(w) V^T`. Intended for the small Gram matrices that appear in
/// the normal-equation solves; cost is O(n^3) per sweep.
pub fn sym_eig(n: usize, a: &[f64]) -> (Vec<f64>, Vec<f64>) {
    assert_eq!(a.len(), n * n);
    let mut m = a.to_vec();
    let mut v = vec![0.0; n * n];
    for i in 0..n {
        v[i + i * n] = 1.0;
    }
    if n <= 1 {
        return (m, v);
    }
    let norm: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm == 0.0 {
        return (vec![0.0; n], v);
    }
    let tol = 1e-15 * norm;
    for _sweep in 0..60 {
        let mut off = 0.0;
        for q in 0..n {
            for p in 0..q {
                off += m[p + q * n] * m[p + q * n];
            }
        }
        if (2.0 * off).sqrt() <= tol {
            break;
        }
        for p in 0..n - 1 {
            for q in p + 1..n {
                let apq = m[p + q * n];
                if apq == 0.0 {
                    continue;
                }
                let app = m[p + p * n];
                let aqq = m[q + q * n];
                if apq.abs() <= f64::EPSILON * (app.abs() + aqq.abs()) * 0.5 {
                    m[p + q * n] = 0.0;
                    m[q + p * n] = 0.0;
                    continue;
                }
                let theta = (aqq - app) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for i in 0..n {
                    let aip = m[i + p * n];
                    let aiq = m[i + q * n];
                    m[i + p * n] = c * aip - s * aiq;
                    m[i + q * n] = s * aip + c * aiq;
                }
                for j in 0..n {
                    let apj = m[p + j * n];
                    let aqj = m[q + j * n];
                    m[p + j * n] = c * apj - s * aqj;
                    m[q + j * n] = s * apj + c * aqj;
                }
                for i in 0..n {
                    let vip = v[i + p * n];
                    let viq = v[i + q * n];
                    v[i + p * n] = c * vip - s * viq;
                    v[i + q * n] = s * vip + c * viq;
                }
            }
        }
    }
    let w: Vec<f64> = (0..n).map(|i| m[i + i * n]).collect();
    (w, v)
}

/// Naive complex GEMM `A (m x k) * B (k x n)`, column-major.
///
/// Only used on sketched matrices (a few thousand rows, a handful of
/// columns), where a blocked kernel would not pay off.
pub fn cmatmul(m: usize, k: usize, a: &[Complex64], n: usize, b: &[Complex64]) -> Vec<Complex64> {
    assert_eq!(a.len(), m * k);
    assert_eq!(b.len(), k * n);
    let mut c = vec![Complex64::new(0.0, 0.0); m * n];
    for j in 0..n {
        for l in 0..k {
            let blj = b[l + j * k];
            if blj == Complex64::new(0.0, 0.0) {
                continue;
            }
            let a_col = &a[l * m..(l + 1) * m];
            let c_col = &mut c[j * m..(j + 1) * m];
            for i in 0..m {
                c_col[i] += a_col[i] * blj;
            }
        }
    }
    c
}

/// `A^T (k x m) * conj(B) (k x n)` for column-major complex matrices.
pub fn cmatmul_t_conj(
    k: usize,
    m: usize,
    a: &[Complex64],
    n: usize,
    b: &[Complex64],
) -> Vec<Complex64> {
    assert_eq!(a.len(), k * m);
    assert_eq!(b.len(), k * n);
    let mut c = vec![Complex64::new(0.0, 0.0); m * n];
    for j in 0..n {
        let b_col = &b[j * k..(j + 1) * k];
        for i in 0..m {
            let a_col = &a[i * k..(i + 1) * k];
            let mut acc = Complex64::new(0.0, 0.0);
            for l in 0..k {
                acc += a_col[l] * b_col[l].conj();
            }
            c[i + j * m] = acc;
        }
    }
    c
}
