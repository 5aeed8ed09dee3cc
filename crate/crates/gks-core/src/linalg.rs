//! Thin facade over the dense linear algebra backend.
//!
//! Everything numerical in the crate funnels through these helpers so the
//! backend choice stays in one file. Matrices cross the boundary as row-major
//! `&[f64]` / `&[Complex64]` slices; solutions come back as `Vec`s.

use crate::error::{GksError, Result};
use faer::prelude::{Solve, SolveLstsq};
use faer::Mat;
use num_complex::Complex64;

fn fmat(rows: usize, cols: usize, a: &[f64]) -> Mat<f64> {
    assert_eq!(a.len(), rows * cols);
    Mat::from_fn(rows, cols, |i, j| a[i * cols + j])
}

fn cmat(rows: usize, cols: usize, a: &[Complex64]) -> Mat<faer::c64> {
    assert_eq!(a.len(), rows * cols);
    Mat::from_fn(rows, cols, |i, j| {
        let z = a[i * cols + j];
        faer::c64::new(z.re, z.im)
    })
}

/// Least-squares solution of an overdetermined real system via QR.
pub fn solve_lstsq(rows: usize, cols: usize, a: &[f64], b: &[f64]) -> Result<Vec<f64>> {
    assert_eq!(b.len(), rows);
    let am = fmat(rows, cols, a);
    let bm = Mat::from_fn(rows, 1, |i, _| b[i]);
    let x = am.qr().solve_lstsq(&bm);
    let sol: Vec<f64> = (0..cols).map(|i| x[(i, 0)]).collect();
    if sol.iter().any(|v| !v.is_finite()) {
        return Err(GksError::linalg("least-squares solve produced non-finite values"));
    }
    Ok(sol)
}

/// LU solve of a square real system, with a residual check so a silently
/// singular factorization surfaces as an error instead of garbage.
pub fn solve_lu(n: usize, a: &[f64], b: &[f64]) -> Result<Vec<f64>> {
    assert_eq!(b.len(), n);
    let am = fmat(n, n, a);
    let bm = Mat::from_fn(n, 1, |i, _| b[i]);
    let lu = am.partial_piv_lu();
    let x = lu.solve(&bm);
    let mut sol: Vec<f64> = (0..n).map(|i| x[(i, 0)]).collect();
    // One step of iterative refinement recovers the digits lost to stiff
    // derivative blocks in bordered systems.
    if sol.iter().all(|v| v.is_finite()) {
        let rm = Mat::from_fn(n, 1, |i, _| {
            let mut r = b[i];
            for j in 0..n {
                r -= a[i * n + j] * sol[j];
            }
            r
        });
        let dx = lu.solve(&rm);
        for (i, s) in sol.iter_mut().enumerate() {
            *s += dx[(i, 0)];
        }
    }
    check_residual_real(n, a, &sol, b)?;
    Ok(sol)
}

fn check_residual_real(n: usize, a: &[f64], x: &[f64], b: &[f64]) -> Result<()> {
    // Scale by the right-hand side only: scaling by |A||x| would let a huge
    // garbage solution from a singular factorization pass the check. NaN
    // residuals must be trapped explicitly: f64::max drops them.
    let mut worst = 0.0f64;
    let mut scale = 1e-300f64;
    let mut bad = false;
    for i in 0..n {
        let mut r = -b[i];
        for j in 0..n {
            r += a[i * n + j] * x[j];
        }
        bad |= !r.is_finite();
        worst = worst.max(r.abs());
        scale = scale.max(b[i].abs());
    }
    if bad || worst > 1e-6 * scale {
        return Err(GksError::linalg(format!(
            "LU solve residual {worst:.3e} exceeds tolerance (rhs scale {scale:.3e})"
        )));
    }
    Ok(())
}

/// LU solve of a square complex system with the same residual guard.
pub fn solve_lu_c64(n: usize, a: &[Complex64], b: &[Complex64]) -> Result<Vec<Complex64>> {
    assert_eq!(b.len(), n);
    let am = cmat(n, n, a);
    let bm = Mat::from_fn(n, 1, |i, _| faer::c64::new(b[i].re, b[i].im));
    let lu = am.partial_piv_lu();
    let x = lu.solve(&bm);
    let mut sol: Vec<Complex64> =
        (0..n).map(|i| Complex64::new(x[(i, 0)].re, x[(i, 0)].im)).collect();
    if sol.iter().all(|v| v.re.is_finite() && v.im.is_finite()) {
        let rm = Mat::from_fn(n, 1, |i, _| {
            let mut r = b[i];
            for j in 0..n {
                r -= a[i * n + j] * sol[j];
            }
            faer::c64::new(r.re, r.im)
        });
        let dx = lu.solve(&rm);
        for (i, s) in sol.iter_mut().enumerate() {
            *s += Complex64::new(dx[(i, 0)].re, dx[(i, 0)].im);
        }
    }
    let mut worst = 0.0f64;
    let mut scale = 1e-300f64;
    let mut bad = false;
    for i in 0..n {
        let mut r = -b[i];
        for j in 0..n {
            r += a[i * n + j] * sol[j];
        }
        bad |= !r.norm().is_finite();
        worst = worst.max(r.norm());
        scale = scale.max(b[i].norm());
    }
    if bad || worst > 1e-6 * scale {
        return Err(GksError::linalg(format!(
            "complex LU solve residual {worst:.3e} exceeds tolerance"
        )));
    }
    Ok(sol)
}

/// Eigen decomposition of a dense complex matrix. Returns `(values, vectors)`
/// with `vectors[j]` the eigenvector for `values[j]`, in backend order.
pub fn eig_c64(n: usize, a: &[Complex64]) -> Result<(Vec<Complex64>, Vec<Vec<Complex64>>)> {
    let am = cmat(n, n, a);
    let evd = am
        .eigen()
        .map_err(|e| GksError::linalg(format!("eigen decomposition failed: {e:?}")))?;
    let s = evd.S().column_vector().to_owned();
    let u = evd.U();
    let values: Vec<Complex64> = (0..n).map(|i| Complex64::new(s[i].re, s[i].im)).collect();
    if values.iter().any(|v| !v.re.is_finite() || !v.im.is_finite()) {
        return Err(GksError::linalg("eigenvalues contain non-finite entries"));
    }
    let vectors: Vec<Vec<Complex64>> = (0..n)
        .map(|j| (0..n).map(|i| Complex64::new(u[(i, j)].re, u[(i, j)].im)).collect())
        .collect();
    Ok((values, vectors))
}

/// Eigen decomposition of a real matrix, promoted to complex.
pub fn eig_real(n: usize, a: &[f64]) -> Result<(Vec<Complex64>, Vec<Vec<Complex64>>)> {
    let ac: Vec<Complex64> = a.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    eig_c64(n, &ac)
}

/// Singular values of a real matrix, descending.
pub fn singular_values(rows: usize, cols: usize, a: &[f64]) -> Result<Vec<f64>> {
    let am = fmat(rows, cols, a);
    let svd = am
        .svd()
        .map_err(|e| GksError::linalg(format!("svd failed: {e:?}")))?;
    let s = svd.S();
    Ok((0..rows.min(cols)).map(|i| s[i]).collect())
}

/// Eigenvalues of a real 2x2 in closed form, deterministic order: the root
/// with the larger real part (then larger imaginary part) first.
pub fn eig2(m: [[f64; 2]; 2]) -> (Complex64, Complex64) {
    let tr = m[0][0] + m[1][1];
    let det = m[0][0] * m[1][1] - m[0][1] * m[1][0];
    let disc = Complex64::new(tr * tr - 4.0 * det, 0.0).sqrt();
    let a = (Complex64::new(tr, 0.0) + disc) / 2.0;
    let b = (Complex64::new(tr, 0.0) - disc) / 2.0;
    if (a.re, a.im) >= (b.re, b.im) {
        (a, b)
    } else {
        (b, a)
    }
}

/// Roots of `c[3] z^3 + c[2] z^2 + c[1] z + c[0]` via the companion matrix,
/// sorted by `(re, im)` for reproducibility.
pub fn cubic_roots(c: [Complex64; 4]) -> Result<[Complex64; 3]> {
    if c[3].norm() < 1e-300 {
        return Err(GksError::linalg("cubic leading coefficient vanishes"));
    }
    let a2 = c[2] / c[3];
    let a1 = c[1] / c[3];
    let a0 = c[0] / c[3];
    let zero = Complex64::new(0.0, 0.0);
    let one = Complex64::new(1.0, 0.0);
    #[rustfmt::skip]
    let comp = [
        zero, zero, -a0,
        one,  zero, -a1,
        zero, one,  -a2,
    ];
    let (mut vals, _) = eig_c64(3, &comp)?;
    vals.sort_by(|x, y| (x.re, x.im).partial_cmp(&(y.re, y.im)).unwrap());
    Ok([vals[0], vals[1], vals[2]])
}

/// Determinant of a complex 3x3 (row-major).
pub fn det3(m: &[Complex64]) -> Complex64 {
    assert_eq!(m.len(), 9);
    m[0] * (m[4] * m[8] - m[5] * m[7]) - m[1] * (m[3] * m[8] - m[5] * m[6])
        + m[2] * (m[3] * m[7] - m[4] * m[6])
}

/// Null vector of a (numerically) singular complex 3x3: the adjugate column
/// of largest norm, normalized to unit length. For a rank-2 matrix every
/// nonzero adjugate column spans the kernel.
pub fn null3(m: &[Complex64]) -> Result<[Complex64; 3]> {
    assert_eq!(m.len(), 9);
    let cof = |r0: usize, c0: usize, r1: usize, c1: usize| m[3 * r0 + c0] * m[3 * r1 + c1] - m[3 * r0 + c1] * m[3 * r1 + c0];
    // adj[i][j] = cofactor_{j,i}
    let adj = [
        [cof(1, 1, 2, 2), -cof(0, 1, 2, 2), cof(0, 1, 1, 2)],
        [-cof(1, 0, 2, 2), cof(0, 0, 2, 2), -cof(0, 0, 1, 2)],
        [cof(1, 0, 2, 1), -cof(0, 0, 2, 1), cof(0, 0, 1, 1)],
    ];
    let mut best = 0usize;
    let mut best_norm = -1.0;
    for j in 0..3 {
        let norm: f64 = (0..3).map(|i| adj[i][j].norm_sqr()).sum();
        if norm > best_norm {
            best_norm = norm;
            best = j;
        }
    }
    if best_norm <= 0.0 {
        return Err(GksError::linalg("adjugate vanished; matrix is not rank 2"));
    }
    let scale = best_norm.sqrt();
    Ok([adj[0][best] / scale, adj[1][best] / scale, adj[2][best] / scale])
}
