//! Fourier collocation on the periodic unit grid.
//!
//! Functions live on `y_j = j/n`, `j = 0..n`. Differentiation is exact for
//! trigonometric polynomials resolved by the grid: the mode `exp(2 pi i m y)`
//! is multiplied by `(i m)^order` (derivative in `theta = 2 pi y`). For even
//! `n` the Nyquist mode is zeroed on odd orders, the usual real-signal
//! convention.

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use std::sync::Arc;

/// FFT plans plus grid size; cheap to clone via `Arc`s inside.
pub struct Spectral {
    n: usize,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
}

impl Spectral {
    /// `n` must be at least 4; even sizes are the intended use.
    pub fn new(n: usize) -> Self {
        assert!(n >= 4, "grid too small: {n}");
        let mut planner = FftPlanner::new();
        Spectral {
            n,
            fwd: planner.plan_fft_forward(n),
            inv: planner.plan_fft_inverse(n),
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Collocation points `y_j = j / n`.
    pub fn grid(&self) -> Vec<f64> {
        (0..self.n).map(|j| j as f64 / self.n as f64).collect()
    }

    /// Forward transform with 1/n normalization: `modes[j]` is the coefficient
    /// of `exp(2 pi i m y)` with `m = signed_freq(j, n)`.
    pub fn to_modes(&self, f: &[f64]) -> Vec<Complex64> {
        assert_eq!(f.len(), self.n);
        let mut buf: Vec<Complex64> = f.iter().map(|&x| Complex64::new(x, 0.0)).collect();
        self.fwd.process(&mut buf);
        let scale = 1.0 / self.n as f64;
        for v in &mut buf {
            *v *= scale;
        }
        buf
    }

    /// Inverse of `to_modes`, discarding the imaginary residue.
    pub fn from_modes(&self, modes: &[Complex64]) -> Vec<f64> {
        assert_eq!(modes.len(), self.n);
        let mut buf = modes.to_vec();
        self.inv.process(&mut buf);
        buf.iter().map(|v| v.re).collect()
    }

    /// `order`-th derivative in `theta = 2 pi y`.
    pub fn deriv(&self, f: &[f64], order: u32) -> Vec<f64> {
        let mut modes = self.to_modes(f);
        self.apply_multiplier(&mut modes, order);
        self.from_modes(&modes)
    }

    fn apply_multiplier(&self, modes: &mut [Complex64], order: u32) {
        if order == 0 {
            return;
        }
        let n = self.n;
        for (j, v) in modes.iter_mut().enumerate() {
            let m = signed_freq(j, n);
            if n % 2 == 0 && j == n / 2 && order % 2 == 1 {
                *v = Complex64::new(0.0, 0.0);
                continue;
            }
            let im = Complex64::new(0.0, m as f64);
            *v *= im.powu(order);
        }
    }

    /// Dense differentiation matrix, row-major `n x n`, consistent with
    /// `deriv` by construction (columns are `deriv` of basis vectors).
    pub fn deriv_matrix(&self, order: u32) -> Vec<f64> {
        let n = self.n;
        let mut mat = vec![0.0; n * n];
        let mut e = vec![0.0; n];
        for col in 0..n {
            e[col] = 1.0;
            let d = self.deriv(&e, order);
            e[col] = 0.0;
            for row in 0..n {
                mat[row * n + col] = d[row];
            }
        }
        mat
    }

    /// Trigonometric interpolation onto an `n_new` grid. Band-limited content
    /// below both Nyquist frequencies is preserved exactly.
    pub fn resample(&self, f: &[f64], n_new: usize) -> Vec<f64> {
        let n = self.n;
        if n_new == n {
            return f.to_vec();
        }
        let modes = self.to_modes(f);
        let target = Spectral::new(n_new);
        let mut out = vec![Complex64::new(0.0, 0.0); n_new];
        for (j, &v) in modes.iter().enumerate() {
            let m = signed_freq(j, n);
            let nyq_src = n % 2 == 0 && j == n / 2;
            if nyq_src {
                if n_new > n {
                    // Split the real Nyquist energy over +/- m.
                    out[m as usize] += 0.5 * v;
                    out[n_new - m as usize] += 0.5 * v;
                }
                // Downsampling drops it.
                continue;
            }
            let half_new = n_new as i64 / 2;
            if m.abs() < half_new || (n_new % 2 == 1 && m.abs() == half_new) {
                let idx = if m >= 0 { m as usize } else { (n_new as i64 + m) as usize };
                out[idx] += v;
            } else if m.abs() == half_new {
                // Folds onto the target Nyquist bin.
                out[half_new as usize] += v;
            }
        }
        target.from_modes(&out)
    }
}

/// Signed frequency for bin `j` of an `n`-point transform.
pub fn signed_freq(j: usize, n: usize) -> i64 {
    if j <= n / 2 {
        j as i64
    } else {
        j as i64 - n as i64
    }
}

/// Period average; the trapezoid rule on a periodic grid, which is spectrally
/// accurate and exact for resolved trigonometric polynomials.
pub fn mean(f: &[f64]) -> f64 {
    f.iter().sum::<f64>() / f.len() as f64
}

/// `<f, g>` with the same quadrature as `mean`.
pub fn inner(f: &[f64], g: &[f64]) -> f64 {
    assert_eq!(f.len(), g.len());
    f.iter().zip(g).map(|(a, b)| a * b).sum::<f64>() / f.len() as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn sample(n: usize, f: impl Fn(f64) -> f64) -> Vec<f64> {
        (0..n).map(|j| f(j as f64 / n as f64)).collect()
    }

    #[test]
    fn derivative_of_single_mode() {
        let n = 64;
        let sp = Spectral::new(n);
        // f = cos(2 pi 3 y), D f = -3 sin(2 pi 3 y), D^2 f = -9 cos(...).
        let f = sample(n, |y| (2.0 * PI * 3.0 * y).cos());
        let d1 = sp.deriv(&f, 1);
        let d2 = sp.deriv(&f, 2);
        for j in 0..n {
            let y = j as f64 / n as f64;
            assert!((d1[j] + 3.0 * (2.0 * PI * 3.0 * y).sin()).abs() < 1e-12);
            assert!((d2[j] + 9.0 * (2.0 * PI * 3.0 * y).cos()).abs() < 1e-12);
        }
    }

    #[test]
    fn high_order_derivative_matches_analytic() {
        let n = 128;
        let sp = Spectral::new(n);
        let f = sample(n, |y| (2.0 * PI * y).sin() + 0.5 * (2.0 * PI * 5.0 * y).cos());
        // D^4: sin mode * 1, cos mode * 625.
        let d4 = sp.deriv(&f, 4);
        for j in 0..n {
            let y = j as f64 / n as f64;
            let want = (2.0 * PI * y).sin() + 0.5 * 625.0 * (2.0 * PI * 5.0 * y).cos();
            // FFT rounding scales with the 5^4 multiplier.
            assert!((d4[j] - want).abs() < 1e-8, "j={j}: {} vs {want}", d4[j]);
        }
    }

    #[test]
    fn deriv_matrix_agrees_with_deriv() {
        let n = 32;
        let sp = Spectral::new(n);
        let f = sample(n, |y| (2.0 * PI * y).sin().exp());
        for order in 1..=4 {
            let direct = sp.deriv(&f, order);
            let m = sp.deriv_matrix(order);
            for row in 0..n {
                let via_mat: f64 = (0..n).map(|col| m[row * n + col] * f[col]).sum();
                assert!(
                    (via_mat - direct[row]).abs() < 1e-8 * direct[row].abs().max(1.0),
                    "order {order}, row {row}"
                );
            }
        }
    }

    #[test]
    fn mean_and_inner_are_exact_for_modes() {
        let n = 48;
        let f = sample(n, |y| 2.5 + (2.0 * PI * y).cos());
        assert!((mean(&f) - 2.5).abs() < 1e-14);
        let g = sample(n, |y| (2.0 * PI * y).cos());
        // <cos, cos> = 1/2.
        assert!((inner(&f, &g) - 0.5).abs() < 1e-14);
    }

    #[test]
    fn resample_round_trip_preserves_bandlimited_data() {
        let n = 32;
        let sp = Spectral::new(n);
        let f = sample(n, |y| 1.0 + (2.0 * PI * 4.0 * y).sin() - 0.3 * (2.0 * PI * 7.0 * y).cos());
        let up = sp.resample(&f, 96);
        let sp_up = Spectral::new(96);
        let back = sp_up.resample(&up, n);
        for j in 0..n {
            assert!((back[j] - f[j]).abs() < 1e-12);
        }
        // Upsampled samples must interpolate the same trig polynomial.
        for (j, &v) in up.iter().enumerate() {
            let y = j as f64 / 96.0;
            let want = 1.0 + (2.0 * PI * 4.0 * y).sin() - 0.3 * (2.0 * PI * 7.0 * y).cos();
            assert!((v - want).abs() < 1e-12);
        }
    }

    #[test]
    fn odd_derivative_kills_nyquist() {
        let n = 16;
        let sp = Spectral::new(n);
        // Pure Nyquist signal: alternating +-1 = cos(pi n y).
        let f: Vec<f64> = (0..n).map(|j| if j % 2 == 0 { 1.0 } else { -1.0 }).collect();
        let d1 = sp.deriv(&f, 1);
        for v in d1 {
            assert!(v.abs() < 1e-13);
        }
        // Even order keeps it: D^2 multiplies by -(n/2)^2.
        let d2 = sp.deriv(&f, 2);
        for (j, v) in d2.iter().enumerate() {
            let want = -((n / 2) as f64).powi(2) * f[j];
            assert!((v - want).abs() < 1e-10);
        }
    }
}
