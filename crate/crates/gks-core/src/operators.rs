//! Linearized traveling-wave operators and the small-dissipation expansion.
//!
//! Linearizing the profile equation about a wave `U` with speed `c` gives
//!
//! ```text
//! L f = k D((6 U - c) f) + k^3 D^3 f + delta (k^2 D^2 f + k^4 D^4 f).
//! ```
//!
//! For `delta > 0` the kernel is the translation direction `U'` and the
//! adjoint kernel the constants, so `L f = rhs` is solvable exactly when
//! `rhs` has zero mean. At `delta = 0` the operator factors as `D` composed
//! with a symmetric operator that annihilates `U'`; both kernels gain one
//! dimension and the adjoint kernel becomes `{1, U}`. The discrete grid adds
//! one more pair at `delta = 0`: odd-order spectral derivatives annihilate
//! the sawtooth mode, so the sawtooth joins both kernels. The bordered
//! solvers pin all of these and verify solvability before factoring.

use crate::cnoidal::{self, CnoidalWave};
use crate::error::{GksError, Result};
use crate::grid::{inner, mean, Spectral};
use crate::linalg;

const SOLVABILITY_TOL: f64 = 1e-8;
/// Normwise backward-error bound for the apply-back check. A stable solve
/// lands near `n * eps ~ 6e-14`; a wrong bordered extension lands near one.
const BACKWARD_TOL: f64 = 1e-12;

/// `max_i sum_j |m[i][j]|` for a row-major `n x n` block.
fn row_norm_inf(n: usize, m: &[f64]) -> f64 {
    (0..n)
        .map(|i| m[i * n..(i + 1) * n].iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// Dense matrix of `L` acting on grid values, row-major `n x n`.
pub fn linearization_matrix(gr: &Spectral, u: &[f64], c: f64, k: f64, delta: f64) -> Vec<f64> {
    let n = gr.n();
    assert_eq!(u.len(), n);
    let d1 = gr.deriv_matrix(1);
    let d2 = gr.deriv_matrix(2);
    let d3 = gr.deriv_matrix(3);
    let d4 = gr.deriv_matrix(4);
    let k2 = k * k;
    let k3 = k2 * k;
    let k4 = k2 * k2;
    let mut l = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            l[i * n + j] = k * d1[i * n + j] * (6.0 * u[j] - c)
                + k3 * d3[i * n + j]
                + delta * (k2 * d2[i * n + j] + k4 * d4[i * n + j]);
        }
    }
    l
}

pub fn matvec(n: usize, m: &[f64], f: &[f64]) -> Vec<f64> {
    assert_eq!(m.len(), n * f.len());
    let cols = f.len();
    (0..n)
        .map(|i| (0..cols).map(|j| m[i * cols + j] * f[j]).sum())
        .collect()
}

/// Solution of `L f = rhs` on a dissipative wave, with the translation
/// component pinned by `<U', f> = 0`.
#[derive(Debug, Clone)]
pub struct ConstrainedSolution {
    pub f: Vec<f64>,
    /// Border multiplier against the constants; roundoff-sized when the
    /// right-hand side is solvable.
    pub multiplier: f64,
    /// Mean removed from the right-hand side before solving.
    pub removed_mean: f64,
}

/// Bordered solve of `L f = rhs` for `delta > 0` waves. With
/// `project_mean = false` a right-hand side whose mean pairing against the
/// adjoint kernel exceeds tolerance is rejected; with `true` the mean is
/// removed first and reported.
pub fn solve_on_wave(
    gr: &Spectral,
    lmat: &[f64],
    u_prime: &[f64],
    rhs: &[f64],
    project_mean: bool,
) -> Result<ConstrainedSolution> {
    let n = gr.n();
    assert_eq!(lmat.len(), n * n);
    assert_eq!(rhs.len(), n);
    let scale = rhs.iter().fold(1e-300f64, |a, v| a.max(v.abs()));
    let rhs_mean = mean(rhs);
    let mut rhs_used = rhs.to_vec();
    let removed_mean = if project_mean {
        for v in &mut rhs_used {
            *v -= rhs_mean;
        }
        rhs_mean
    } else {
        if rhs_mean.abs() > SOLVABILITY_TOL * scale {
            return Err(GksError::Solvability {
                context: "right-hand side pairs with the adjoint constants".into(),
                pairing: rhs_mean,
            });
        }
        0.0
    };
    let cols = n + 1;
    let mut a = vec![0.0; cols * cols];
    for i in 0..n {
        for j in 0..n {
            a[i * cols + j] = lmat[i * n + j];
        }
        a[i * cols + n] = 1.0;
        a[n * cols + i] = u_prime[i] / n as f64;
    }
    let mut b = rhs_used.clone();
    b.push(0.0);
    let sol = linalg::solve_lu(cols, &a, &b)?;
    let f = sol[..n].to_vec();
    let multiplier = sol[n];
    let back = matvec(n, lmat, &f);
    let worst = back
        .iter()
        .zip(&rhs_used)
        .fold(0.0f64, |acc, (l, r)| acc.max((l + multiplier - r).abs()));
    let f_norm = f.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    let backward_scale = row_norm_inf(n, lmat) * f_norm + scale + multiplier.abs();
    if worst > BACKWARD_TOL * backward_scale.max(1.0) {
        return Err(GksError::linalg(format!(
            "bordered solve apply-back residual {worst:.3e}"
        )));
    }
    Ok(ConstrainedSolution {
        f,
        multiplier,
        removed_mean,
    })
}

/// Solution of the zero-dissipation solve with its border multipliers.
#[derive(Debug, Clone)]
pub struct KdvSolution {
    pub f: Vec<f64>,
    pub multipliers: [f64; 3],
}

/// Bordered solve at `delta = 0`. The analytic adjoint kernel is `{1, U}`
/// and both pairings must vanish for solvability. On the discrete grid the
/// odd-order spectral derivatives also annihilate the sawtooth mode
/// `(-1)^j`, which adds one kernel pair purely from the discretization; a
/// third border and constraint pin it. The solution comes back mean-free,
/// orthogonal to the translation direction, and sawtooth-free.
pub fn solve_on_kdv_wave(
    gr: &Spectral,
    lmat: &[f64],
    u: &[f64],
    u_prime: &[f64],
    rhs: &[f64],
) -> Result<KdvSolution> {
    let n = gr.n();
    assert_eq!(lmat.len(), n * n);
    assert_eq!(rhs.len(), n);
    let scale = rhs.iter().fold(1e-300f64, |a, v| a.max(v.abs()));
    let pair_const = mean(rhs);
    if pair_const.abs() > SOLVABILITY_TOL * scale {
        return Err(GksError::Solvability {
            context: "right-hand side pairs with the adjoint constants".into(),
            pairing: pair_const,
        });
    }
    let pair_u = inner(u, rhs);
    let u_scale = u.iter().fold(1e-300f64, |a, v| a.max(v.abs()));
    if pair_u.abs() > SOLVABILITY_TOL * scale * u_scale {
        return Err(GksError::Solvability {
            context: "right-hand side pairs with the adjoint wave direction".into(),
            pairing: pair_u,
        });
    }
    let saw: Vec<f64> = (0..n).map(|j| if j % 2 == 0 { 1.0 } else { -1.0 }).collect();
    let cols = n + 3;
    let mut a = vec![0.0; cols * cols];
    for i in 0..n {
        for j in 0..n {
            a[i * cols + j] = lmat[i * n + j];
        }
        a[i * cols + n] = 1.0;
        a[i * cols + n + 1] = u[i];
        a[i * cols + n + 2] = saw[i];
        a[n * cols + i] = u_prime[i] / n as f64;
        a[(n + 1) * cols + i] = 1.0 / n as f64;
        a[(n + 2) * cols + i] = saw[i] / n as f64;
    }
    let mut b = rhs.to_vec();
    b.extend_from_slice(&[0.0, 0.0, 0.0]);
    let sol = linalg::solve_lu(cols, &a, &b)?;
    let f = sol[..n].to_vec();
    let multipliers = [sol[n], sol[n + 1], sol[n + 2]];
    let back = matvec(n, lmat, &f);
    let worst = (0..n).fold(0.0f64, |acc, i| {
        acc.max(
            (back[i] + multipliers[0] + multipliers[1] * u[i] + multipliers[2] * saw[i]
                - rhs[i])
                .abs(),
        )
    });
    let f_norm = f.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    let backward_scale = row_norm_inf(n, lmat) * f_norm
        + scale
        + multipliers[0].abs()
        + multipliers[1].abs() * u_scale
        + multipliers[2].abs();
    if worst > BACKWARD_TOL * backward_scale.max(1.0) {
        return Err(GksError::linalg(format!(
            "zero-dissipation bordered solve apply-back residual {worst:.3e}"
        )));
    }
    Ok(KdvSolution { f, multipliers })
}

/// Expansion of the wave family in the dissipation strength about the
/// selected zero-dissipation wave:
///
/// ```text
/// U = U0 + delta U1 + delta^2 U2 + O(delta^3),
/// c = c0 + delta^2 c2 + O(delta^3).
/// ```
///
/// The first-order speed correction vanishes by parity: `U0` is even about
/// its crest, which forces `U1` odd and kills every constant pairing in the
/// next order's solvability condition.
#[derive(Debug, Clone)]
pub struct KdvExpansion {
    pub k: f64,
    pub m: f64,
    /// Elliptic amplitude parameter of the selected wave.
    pub p: f64,
    pub u0: Vec<f64>,
    pub c0: f64,
    pub u1: Vec<f64>,
    /// Speed direction of the family: `L w1 = k U0'`.
    pub w1: Vec<f64>,
    /// Particular second correction; the full one is `u2_0 + c2 w1`.
    pub u2_0: Vec<f64>,
    pub c2: f64,
}

impl KdvExpansion {
    pub fn u2(&self) -> Vec<f64> {
        self.u2_0
            .iter()
            .zip(&self.w1)
            .map(|(a, b)| a + self.c2 * b)
            .collect()
    }

    pub fn profile(&self, delta: f64) -> Vec<f64> {
        let u2 = self.u2();
        (0..self.u0.len())
            .map(|i| self.u0[i] + delta * self.u1[i] + delta * delta * u2[i])
            .collect()
    }

    pub fn speed(&self, delta: f64) -> f64 {
        self.c0 + delta * delta * self.c2
    }
}

pub fn kdv_expansion(gr: &Spectral, k: f64, m: f64) -> Result<KdvExpansion> {
    let n = gr.n();
    let p = cnoidal::solve_p_for_k(k)?;
    let wave = CnoidalWave::new(p, k, m)?;
    let u0 = wave.sample(n)?;
    let c0 = wave.speed()?;
    let u0p = gr.deriv(&u0, 1);
    let lmat = linearization_matrix(gr, &u0, c0, k, 0.0);
    let k2 = k * k;
    let k4 = k2 * k2;

    // First order: L U1 = -(k^2 D^2 U0 + k^4 D^4 U0). The wave-direction
    // pairing of this right-hand side is the production-dissipation balance;
    // it vanishes exactly on the selected family.
    let d2u0 = gr.deriv(&u0, 2);
    let d4u0 = gr.deriv(&u0, 4);
    let rhs1: Vec<f64> = (0..n).map(|i| -(k2 * d2u0[i] + k4 * d4u0[i])).collect();
    let u1 = solve_on_kdv_wave(gr, &lmat, &u0, &u0p, &rhs1)?.f;

    // Speed direction: L w1 = k U0'.
    let rhs_w: Vec<f64> = u0p.iter().map(|v| k * v).collect();
    let w1 = solve_on_kdv_wave(gr, &lmat, &u0, &u0p, &rhs_w)?.f;

    // Second order, particular part:
    // L U2_0 = -3 k D(U1^2) - k^2 D^2 U1 - k^4 D^4 U1.
    let u1sq: Vec<f64> = u1.iter().map(|v| v * v).collect();
    let du1sq = gr.deriv(&u1sq, 1);
    let d2u1 = gr.deriv(&u1, 2);
    let d4u1 = gr.deriv(&u1, 4);
    let rhs2: Vec<f64> = (0..n)
        .map(|i| -3.0 * k * du1sq[i] - k2 * d2u1[i] - k4 * d4u1[i])
        .collect();
    let u2_0 = solve_on_kdv_wave(gr, &lmat, &u0, &u0p, &rhs2)?.f;

    // The speed correction comes from third-order solvability against the
    // adjoint wave direction.
    let w1d2 = gr.deriv(&w1, 2);
    let w1d4 = gr.deriv(&w1, 4);
    let u20d2 = gr.deriv(&u2_0, 2);
    let u20d4 = gr.deriv(&u2_0, 4);
    let prod_w: Vec<f64> = (0..n).map(|i| u0p[i] * u1[i] * w1[i]).collect();
    let prod_u: Vec<f64> = (0..n).map(|i| u0p[i] * u1[i] * u2_0[i]).collect();
    let den = 6.0 * k * mean(&prod_w) - k * inner(&u0p, &u1) - k2 * inner(&u0, &w1d2)
        - k4 * inner(&u0, &w1d4);
    let num =
        -6.0 * k * mean(&prod_u) + k2 * inner(&u0, &u20d2) + k4 * inner(&u0, &u20d4);
    let amp = wave.amplitude()?;
    if den.abs() < 1e-10 * amp.max(1e-3) {
        return Err(GksError::degenerate(format!(
            "speed-correction denominator {den:.3e} vanishes"
        )));
    }
    let c2 = num / den;
    Ok(KdvExpansion {
        k,
        m,
        p,
        u0,
        c0,
        u1,
        w1,
        u2_0,
        c2,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::profile::{self, WaveParams};

    fn wave_and_matrix(n: usize, k: f64, m: f64, delta: f64) -> (Spectral, profile::WaveProfile, Vec<f64>) {
        let gr = Spectral::new(n);
        let w = profile::solve_at(&gr, WaveParams::new(k, m, delta).unwrap()).unwrap();
        let l = linearization_matrix(&gr, &w.u, w.c, k, delta);
        (gr, w, l)
    }

    /// Deterministic generic test vector.
    fn trig_mix(n: usize) -> Vec<f64> {
        (0..n)
            .map(|j| {
                let y = j as f64 / n as f64;
                (2.0 * std::f64::consts::PI * y).sin()
                    + 0.4 * (4.0 * std::f64::consts::PI * y).cos()
                    + 0.1 * (6.0 * std::f64::consts::PI * y + 0.7).sin()
            })
            .collect()
    }

    #[test]
    fn constants_map_to_the_translation_direction() {
        let (gr, w, l) = wave_and_matrix(128, 0.75, 0.1, 0.05);
        let ones = vec![1.0; gr.n()];
        let img = matvec(gr.n(), &l, &ones);
        let up = gr.deriv(&w.u, 1);
        let worst = img
            .iter()
            .zip(&up)
            .fold(0.0f64, |acc, (a, b)| acc.max((a - 6.0 * w.params.k * b).abs()));
        assert!(worst < 1e-9, "L[1] != 6 k U', defect {worst:.3e}");
    }

    #[test]
    fn translation_direction_spans_the_kernel() {
        let (gr, w, l) = wave_and_matrix(128, 0.75, 0.0, 0.05);
        let n = gr.n();
        let up = gr.deriv(&w.u, 1);
        let img = matvec(n, &l, &up);
        let scale = up.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        let worst = img.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        assert!(worst < 1e-8 * scale.max(1.0), "L[U'] defect {worst:.3e}");
        // Exactly one singular value collapses for delta > 0.
        let sv = linalg::singular_values(n, n, &l).unwrap();
        assert!(sv[n - 1] / sv[0] < 1e-10);
        assert!(sv[n - 2] / sv[0] > 1e-8);
    }

    #[test]
    fn zero_dissipation_kernel_gains_a_dimension() {
        let gr = Spectral::new(128);
        let n = gr.n();
        let p = cnoidal::solve_p_for_k(0.75).unwrap();
        let wave = CnoidalWave::new(p, 0.75, 0.0).unwrap();
        let u0 = wave.sample(n).unwrap();
        let c0 = wave.speed().unwrap();
        let l = linearization_matrix(&gr, &u0, c0, 0.75, 0.0);
        let sv = linalg::singular_values(n, n, &l).unwrap();
        // Translation direction, speed direction, and the discrete sawtooth.
        assert!(sv[n - 1] / sv[0] < 1e-10);
        assert!(sv[n - 2] / sv[0] < 1e-10);
        assert!(sv[n - 3] / sv[0] < 1e-10);
        assert!(sv[n - 4] / sv[0] > 1e-9, "fourth value {:.3e}", sv[n - 4] / sv[0]);
    }

    #[test]
    fn adjoint_kernel_pairings_vanish() {
        let (gr, w, l) = wave_and_matrix(128, 0.8, 0.2, 0.03);
        let n = gr.n();
        let f = trig_mix(n);
        let img = matvec(n, &l, &f);
        assert!(mean(&img).abs() < 1e-10);
        // At delta = 0 the wave itself joins the adjoint kernel.
        let p = cnoidal::solve_p_for_k(0.8).unwrap();
        let wave = CnoidalWave::new(p, 0.8, 0.2).unwrap();
        let u0 = wave.sample(n).unwrap();
        let c0 = wave.speed().unwrap();
        let l0 = linearization_matrix(&gr, &u0, c0, 0.8, 0.0);
        let img0 = matvec(n, &l0, &f);
        assert!(mean(&img0).abs() < 1e-10);
        assert!(inner(&u0, &img0).abs() < 1e-9);
        // For delta > 0 the wave pairing does not vanish.
        assert!(inner(&w.u, &img).abs() > 1e-6);
    }

    #[test]
    fn bordered_solve_round_trips() {
        let (gr, w, l) = wave_and_matrix(128, 0.75, 0.0, 0.05);
        let n = gr.n();
        let up = gr.deriv(&w.u, 1);
        let phi = inner(&up, &up);
        // Target already satisfying the constraints.
        let mut g = trig_mix(n);
        let gm = mean(&g);
        let gu = inner(&up, &g) / phi;
        for (j, v) in g.iter_mut().enumerate() {
            *v -= gm + gu * up[j];
        }
        let rhs = matvec(n, &l, &g);
        let sol = solve_on_wave(&gr, &l, &up, &rhs, false).unwrap();
        let worst = sol
            .f
            .iter()
            .zip(&g)
            .fold(0.0f64, |acc, (a, b)| acc.max((a - b).abs()));
        assert!(worst < 1e-8, "round-trip drift {worst:.3e}");
        assert!(sol.multiplier.abs() < 1e-9);
        // A right-hand side with a mean component is rejected, then accepted
        // once projection is requested.
        let mut bad = rhs.clone();
        for v in &mut bad {
            *v += 0.5;
        }
        assert!(matches!(
            solve_on_wave(&gr, &l, &up, &bad, false),
            Err(GksError::Solvability { .. })
        ));
        let fixed = solve_on_wave(&gr, &l, &up, &bad, true).unwrap();
        assert!((fixed.removed_mean - 0.5).abs() < 1e-12);
    }

    #[test]
    fn kdv_bordered_solve_round_trips() {
        let gr = Spectral::new(128);
        let n = gr.n();
        let p = cnoidal::solve_p_for_k(0.75).unwrap();
        let wave = CnoidalWave::new(p, 0.75, 0.1).unwrap();
        let u0 = wave.sample(n).unwrap();
        let c0 = wave.speed().unwrap();
        let l = linearization_matrix(&gr, &u0, c0, 0.75, 0.0);
        let up = gr.deriv(&u0, 1);
        let phi = inner(&up, &up);
        let mut g = trig_mix(n);
        let gm = mean(&g);
        let gu = inner(&up, &g) / phi;
        for (j, v) in g.iter_mut().enumerate() {
            *v -= gm + gu * up[j];
        }
        let rhs = matvec(n, &l, &g);
        let sol = solve_on_kdv_wave(&gr, &l, &u0, &up, &rhs).unwrap();
        let worst = sol
            .f
            .iter()
            .zip(&g)
            .fold(0.0f64, |acc, (a, b)| acc.max((a - b).abs()));
        assert!(worst < 1e-8, "round-trip drift {worst:.3e}");
        assert!(sol.multipliers[0].abs() < 1e-9);
        assert!(sol.multipliers[1].abs() < 1e-9);
        assert!(sol.multipliers[2].abs() < 1e-9);
        // Pairing with the adjoint wave direction blocks the solve.
        let d2u0 = gr.deriv(&u0, 2);
        let bad: Vec<f64> = d2u0.iter().map(|v| -v).collect();
        assert!(matches!(
            solve_on_kdv_wave(&gr, &l, &u0, &up, &bad),
            Err(GksError::Solvability { .. })
        ));
    }

    #[test]
    fn expansion_has_the_parity_structure() {
        let gr = Spectral::new(256);
        let n = gr.n();
        let ex = kdv_expansion(&gr, 0.8, 0.0).unwrap();
        // The crest sits at y = 0, so reflection is j -> n - j.
        let mut odd_defect = 0.0f64;
        let mut even_defect = 0.0f64;
        for j in 1..n {
            odd_defect = odd_defect.max((ex.u1[j] + ex.u1[n - j]).abs());
            even_defect = even_defect.max((ex.u2_0[j] - ex.u2_0[n - j]).abs());
            even_defect = even_defect.max((ex.w1[j] - ex.w1[n - j]).abs());
        }
        assert!(odd_defect < 1e-8, "first correction not odd: {odd_defect:.3e}");
        assert!(even_defect < 1e-8, "even parts not even: {even_defect:.3e}");
        assert!(mean(&ex.u1).abs() < 1e-12);
        // The vanishing first-order speed correction is witnessed by the
        // second-order right-hand side pairing against the constants within
        // quadrature accuracy.
        let u1sq: Vec<f64> = ex.u1.iter().map(|v| v * v).collect();
        let du1sq = gr.deriv(&u1sq, 1);
        let d2u1 = gr.deriv(&ex.u1, 2);
        let d4u1 = gr.deriv(&ex.u1, 4);
        let k = ex.k;
        let rhs2: Vec<f64> = (0..n)
            .map(|i| -3.0 * k * du1sq[i] - k * k * d2u1[i] - k.powi(4) * d4u1[i])
            .collect();
        assert!(inner(&ex.u0, &rhs2).abs() < 1e-8);
    }

    #[test]
    fn expansion_predicts_dissipative_profiles() {
        let gr = Spectral::new(256);
        let ex = kdv_expansion(&gr, 0.8, 0.0).unwrap();
        let mut errs = Vec::new();
        let mut cerrs = Vec::new();
        for delta in [1e-3, 5e-4] {
            let w = profile::solve_at(&gr, WaveParams::new(0.8, 0.0, delta).unwrap()).unwrap();
            let predicted: Vec<f64> = (0..gr.n())
                .map(|i| ex.u0[i] + delta * ex.u1[i])
                .collect();
            let e = w
                .u
                .iter()
                .zip(&predicted)
                .fold(0.0f64, |acc, (a, b)| acc.max((a - b).abs()));
            errs.push(e);
            cerrs.push((w.c - ex.speed(delta)).abs());
        }
        // First-order profile prediction converges at second order.
        let order = (errs[0] / errs[1]).log2();
        assert!(order > 1.9, "profile order {order:.2}, errors {errs:?}");
        // Speed prediction including the quadratic term converges at third
        // order or better.
        let corder = (cerrs[0] / cerrs[1]).log2();
        assert!(corder > 2.5, "speed order {corder:.2}, errors {cerrs:?}");
    }
}
