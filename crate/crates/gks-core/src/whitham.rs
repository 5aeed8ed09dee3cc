//! Slow-modulation systems of the wave family.
//!
//! First order: local wavenumber and mean obey the quasilinear system
//! `(k, M)_T + (k c, 3 <U^2>)_X = 0`. Its flux Jacobian `A` carries the
//! modulation characteristics; in the frame of the underlying wave they are
//! `lambda0 = c - eig(A)`.
//!
//! Second order: expanding one order deeper in the modulation wavelength
//! corrects each characteristic branch by a diffusion-like rate. With
//! `nu = i zeta` the phase multiplier per period, a branch behaves as
//!
//! ```text
//! lambda(nu) = nu k lambda0 + nu^2 k lambda1 + O(nu^3),
//! ```
//!
//! so slow modulations decay exactly when `Re lambda1 >= 0`.
//!
//! The zero-dissipation limit carries a three-component analogue on the
//! unselected family `(k, M, p)` with conserved densities
//! `(k, M, <U^2>/2)`, plus a relaxation source that pins `p` to the selected
//! curve at rate `delta`.

use num_complex::Complex64;

use crate::cnoidal::{self, CnoidalWave};
use crate::error::{GksError, Result};
use crate::grid::{inner, mean, Spectral};
use crate::linalg;
use crate::operators;
use crate::profile::{self, WaveProfile};

/// First-order modulation data at one wave.
#[derive(Debug, Clone)]
pub struct FirstOrder {
    /// Flux Jacobian in the laboratory frame, rows `(k c, 3 <U^2>)`,
    /// columns `(k, M)`.
    pub a: [[f64; 2]; 2],
    /// Characteristic rates in the frame of the wave, `c - eig(A)`,
    /// sorted by `(re, im)`.
    pub lambda0: [Complex64; 2],
    /// Discriminant of `A`; positive means hyperbolic.
    pub discriminant: f64,
    pub hyperbolic: bool,
}

pub fn first_order(gr: &Spectral, w: &WaveProfile) -> Result<FirstOrder> {
    let d = profile::param_derivatives(gr, w)?;
    first_order_from_derivatives(w, &d)
}

pub fn first_order_from_derivatives(
    w: &WaveProfile,
    d: &profile::ParamDerivatives,
) -> Result<FirstOrder> {
    let k = w.params.k;
    let m = w.params.m;
    let a = [
        [w.c + k * d.dc_dk, 6.0 * k],
        [6.0 * inner(&w.u, &d.du_dk), 6.0 * m],
    ];
    let (e0, e1) = linalg::eig2([[a[0][0], a[0][1]], [a[1][0], a[1][1]]]);
    let c = Complex64::new(w.c, 0.0);
    let mut lambda0 = [c - e0, c - e1];
    lambda0.sort_by(|x, y| (x.re, x.im).partial_cmp(&(y.re, y.im)).unwrap());
    let tr_half = (a[0][0] - a[1][1]) / 2.0;
    let discriminant = 4.0 * (tr_half * tr_half + a[0][1] * a[1][0]);
    Ok(FirstOrder {
        a,
        lambda0,
        discriminant,
        hyperbolic: discriminant > 0.0,
    })
}

/// Second-order (diffusive) correction data.
#[derive(Debug, Clone)]
pub struct SecondOrder {
    /// Flux-gradient response matrix paired with the branch eigenvectors.
    pub v: [[f64; 2]; 2],
    /// Branch-aligned second-order rates; `lambda1[j]` corrects
    /// `first.lambda0[j]`.
    pub lambda1: [Complex64; 2],
    /// Profile response to a wavenumber gradient.
    pub f_k: Vec<f64>,
    /// Profile response to a mean gradient.
    pub f_m: Vec<f64>,
}

/// Builds the second-order correction by solving the two gradient-response
/// problems on the wave and pairing the resulting flux corrections with the
/// first-order eigenvectors.
pub fn second_order(
    gr: &Spectral,
    w: &WaveProfile,
    d: &profile::ParamDerivatives,
    first: &FirstOrder,
) -> Result<SecondOrder> {
    let n = gr.n();
    let k = w.params.k;
    let m = w.params.m;
    let delta = w.params.delta;
    let u = &w.u;
    let lmat = operators::linearization_matrix(gr, u, w.c, k, delta);
    let up = gr.deriv(u, 1);

    // Response to a wavenumber gradient.
    let dk_kc = w.c + k * d.dc_dk;
    let dk_usq3 = 6.0 * inner(u, &d.du_dk);
    let d1u = gr.deriv(u, 1);
    let d2u = gr.deriv(u, 2);
    let d3u = gr.deriv(u, 3);
    let d1uk = gr.deriv(&d.du_dk, 1);
    let d2uk = gr.deriv(&d.du_dk, 2);
    let d3uk = gr.deriv(&d.du_dk, 3);
    let rhs_k: Vec<f64> = (0..n)
        .map(|i| {
            -dk_kc * d.du_dk[i] + 6.0 * u[i] * d.du_dk[i] - dk_usq3
                + 3.0 * k * d2u[i]
                + 3.0 * k * k * d2uk[i]
                + delta
                    * (d1u[i]
                        + 2.0 * k * d1uk[i]
                        + 6.0 * k * k * d3u[i]
                        + 4.0 * k * k * k * d3uk[i])
        })
        .collect();
    let f_k = operators::solve_on_wave(gr, &lmat, &up, &rhs_k, false)?.f;

    // Response to a mean gradient.
    let rhs_m: Vec<f64> = (0..n)
        .map(|i| 6.0 * (u[i] - m) - 6.0 * k * d.du_dk[i])
        .collect();
    let f_m = operators::solve_on_wave(gr, &lmat, &up, &rhs_m, false)?.f;

    let fk_mean = mean(&f_k);
    let fm_mean = mean(&f_m);
    let fk_fluct: Vec<f64> = f_k.iter().map(|v| v - fk_mean).collect();
    let fm_fluct: Vec<f64> = f_m.iter().map(|v| v - fm_mean).collect();
    let v = [
        [6.0 * k * fk_mean, 6.0 * k * fm_mean],
        [
            -6.0 * inner(u, &fk_fluct),
            -6.0 * inner(u, &fm_fluct) + delta,
        ],
    ];

    let mut lambda1 = [Complex64::new(0.0, 0.0); 2];
    for (j, l1) in lambda1.iter_mut().enumerate() {
        // Branch eigenvalue of A in the laboratory frame.
        let s = Complex64::new(w.c, 0.0) - first.lambda0[j];
        let (ell, r) = branch_vectors(&first.a, s)?;
        let vr = [
            Complex64::new(v[0][0], 0.0) * r[0] + Complex64::new(v[0][1], 0.0) * r[1],
            Complex64::new(v[1][0], 0.0) * r[0] + Complex64::new(v[1][1], 0.0) * r[1],
        ];
        let num = ell[0] * vr[0] + ell[1] * vr[1];
        let den = ell[0] * r[0] + ell[1] * r[1];
        if den.norm() < 1e-12 {
            return Err(GksError::degenerate(
                "coincident modulation characteristics",
            ));
        }
        *l1 = -Complex64::new(k, 0.0) * num / den;
    }
    Ok(SecondOrder {
        v,
        lambda1,
        f_k,
        f_m,
    })
}

/// Left and right null vectors of `A - s I` via the adjugate.
pub(crate) fn branch_vectors(
    a: &[[f64; 2]; 2],
    s: Complex64,
) -> Result<([Complex64; 2], [Complex64; 2])> {
    let b11 = Complex64::new(a[0][0], 0.0) - s;
    let b12 = Complex64::new(a[0][1], 0.0);
    let b21 = Complex64::new(a[1][0], 0.0);
    let b22 = Complex64::new(a[1][1], 0.0) - s;
    // Columns of the adjugate span the right null space.
    let r = if b22.norm() + b21.norm() >= b12.norm() + b11.norm() {
        [b22, -b21]
    } else {
        [-b12, b11]
    };
    // Rows span the left null space.
    let ell = if b22.norm() + b12.norm() >= b21.norm() + b11.norm() {
        [b22, -b12]
    } else {
        [-b21, b11]
    };
    if r[0].norm() + r[1].norm() < 1e-14 || ell[0].norm() + ell[1].norm() < 1e-14 {
        return Err(GksError::degenerate("defective modulation Jacobian"));
    }
    Ok((ell, r))
}

/// Averages over the zero-dissipation family and their parameter
/// derivatives. The wave is `k^2` times a pure `p`-shape, so every
/// `k`-derivative is an exact power law; only the `p`-direction is
/// differenced (Richardson-extrapolated central differences).
#[derive(Debug, Clone, Copy)]
pub struct CnoidalDerivatives {
    pub k: f64,
    pub m: f64,
    pub p: f64,
    /// Speed offset of the wave shape; full speed is `6 m + c_tilde`.
    pub c_tilde: f64,
    /// `<(U - m)^2>`.
    pub usq: f64,
    /// `<(U - m)^3>`.
    pub ucube: f64,
    /// `<(D U)^2>`.
    pub phi: f64,
    /// `<(D^2 U)^2>`.
    pub psi: f64,
    pub dk_c_tilde: f64,
    pub dk_usq: f64,
    pub dk_ucube: f64,
    pub dk_phi: f64,
    pub dk_psi: f64,
    pub dp_c_tilde: f64,
    pub dp_usq: f64,
    pub dp_ucube: f64,
    pub dp_phi: f64,
    pub dp_psi: f64,
}

/// Quadrature resolution for family averages. The elliptic shapes have
/// geometric mode decay with nome below one half across the usable
/// amplitude range, so this is far past converged.
const AVG_GRID: usize = 1024;

#[derive(Debug, Clone, Copy)]
struct ShapeAverages {
    c_gamma: f64,
    g2: f64,
    g3: f64,
    gphi: f64,
    gpsi: f64,
}

/// Averages of the unit-wavenumber shape.
fn shape_averages(p: f64) -> Result<ShapeAverages> {
    let gr = Spectral::new(AVG_GRID);
    let wave = CnoidalWave::new(p, 1.0, 0.0)?;
    let s = wave.sample(AVG_GRID)?;
    let d1 = gr.deriv(&s, 1);
    let d2 = gr.deriv(&s, 2);
    let cube: Vec<f64> = s.iter().map(|v| v * v * v).collect();
    Ok(ShapeAverages {
        c_gamma: wave.c_tilde()?,
        g2: inner(&s, &s),
        g3: mean(&cube),
        gphi: inner(&d1, &d1),
        gpsi: inner(&d2, &d2),
    })
}

impl CnoidalDerivatives {
    pub fn new(k: f64, m: f64, p: f64) -> Result<Self> {
        let base = shape_averages(p)?;
        // Richardson step sized against the f64 noise floor of the
        // quadrature; the shape derivatives are O(1)-smooth in p.
        let room = (crate::special::P_CAP - p).max(0.0);
        let h = (1e-3 * p.max(0.05)).min(0.45 * room.max(1e-6)).min(0.45 * p);
        let eval = |q: f64| shape_averages(q);
        let sp = eval(p + h)?;
        let sm = eval(p - h)?;
        let sp2 = eval(p + 0.5 * h)?;
        let sm2 = eval(p - 0.5 * h)?;
        let rich = |fp: f64, fm: f64, fp2: f64, fm2: f64| {
            let d1 = (fp - fm) / (2.0 * h);
            let d2 = (fp2 - fm2) / h;
            (4.0 * d2 - d1) / 3.0
        };
        let k2 = k * k;
        let k4 = k2 * k2;
        let k6 = k4 * k2;
        Ok(CnoidalDerivatives {
            k,
            m,
            p,
            c_tilde: k2 * base.c_gamma,
            usq: k4 * base.g2,
            ucube: k6 * base.g3,
            phi: k4 * base.gphi,
            psi: k4 * base.gpsi,
            dk_c_tilde: 2.0 * k * base.c_gamma,
            dk_usq: 4.0 * k2 * k * base.g2,
            dk_ucube: 6.0 * k4 * k * base.g3,
            dk_phi: 4.0 * k2 * k * base.gphi,
            dk_psi: 4.0 * k2 * k * base.gpsi,
            dp_c_tilde: k2 * rich(sp.c_gamma, sm.c_gamma, sp2.c_gamma, sm2.c_gamma),
            dp_usq: k4 * rich(sp.g2, sm.g2, sp2.g2, sm2.g2),
            dp_ucube: k6 * rich(sp.g3, sm.g3, sp2.g3, sm2.g3),
            dp_phi: k4 * rich(sp.gphi, sm.gphi, sp2.gphi, sm2.gphi),
            dp_psi: k4 * rich(sp.gpsi, sm.gpsi, sp2.gpsi, sm2.gpsi),
        })
    }

    pub fn speed(&self) -> f64 {
        6.0 * self.m + self.c_tilde
    }
}

/// The three-component modulation system of the zero-dissipation family,
/// states `(k, M, p)`:
///
/// ```text
/// d/dT (k, M, <U^2>/2) + d/dX (k c, 3 <U^2>, <2 U^3> - (3/2) k^2 <(DU)^2>)
///     = (0, 0, delta (k^2 <(DU)^2> - k^4 <(D^2 U)^2>)).
/// ```
#[derive(Debug, Clone)]
pub struct KdvModulation {
    pub derivs: CnoidalDerivatives,
    pub delta: f64,
    /// Jacobian of the conserved densities.
    pub dq: [[f64; 3]; 3],
    /// Jacobian of the fluxes.
    pub df: [[f64; 3]; 3],
    /// Jacobian of the relaxation source.
    pub dg: [[f64; 3]; 3],
    /// Characteristic speeds, `eig(dq^{-1} df)`, sorted by `(re, im)`.
    pub speeds: [Complex64; 3],
}

pub fn kdv_modulation(k: f64, m: f64, p: f64, delta: f64) -> Result<KdvModulation> {
    let d = CnoidalDerivatives::new(k, m, p)?;
    let c = d.speed();
    let dq = [
        [1.0, 0.0, 0.0],
        [0.0, 1.0, 0.0],
        [0.5 * d.dk_usq, m, 0.5 * d.dp_usq],
    ];
    let df = [
        [6.0 * m + d.c_tilde + k * d.dk_c_tilde, 6.0 * k, k * d.dp_c_tilde],
        [3.0 * d.dk_usq, 6.0 * m, 3.0 * d.dp_usq],
        [
            6.0 * m * d.dk_usq + 2.0 * d.dk_ucube - 3.0 * k * d.phi - 1.5 * k * k * d.dk_phi,
            6.0 * m * m + 6.0 * d.usq,
            6.0 * m * d.dp_usq + 2.0 * d.dp_ucube - 1.5 * k * k * d.dp_phi,
        ],
    ];
    let k2 = k * k;
    let k4 = k2 * k2;
    let balance_k = 2.0 * k * d.phi + k2 * d.dk_phi - 4.0 * k2 * k * d.psi - k4 * d.dk_psi;
    let balance_p = k2 * d.dp_phi - k4 * d.dp_psi;
    let dg = [
        [0.0, 0.0, 0.0],
        [0.0, 0.0, 0.0],
        [delta * balance_k, 0.0, delta * balance_p],
    ];
    // Characteristic speeds of the hyperbolic part.
    let mut dq_flat = [0.0; 9];
    let mut df_flat = [0.0; 9];
    for i in 0..3 {
        for j in 0..3 {
            dq_flat[3 * i + j] = dq[i][j];
            df_flat[3 * i + j] = df[i][j];
        }
    }
    let binv_a = solve3(&dq_flat, &df_flat)?;
    let (vals, _) = linalg::eig_real(3, &binv_a)?;
    let mut speeds = [vals[0], vals[1], vals[2]];
    speeds.sort_by(|x, y| (x.re, x.im).partial_cmp(&(y.re, y.im)).unwrap());
    let _ = c;
    Ok(KdvModulation {
        derivs: d,
        delta,
        dq,
        df,
        dg,
        speeds,
    })
}

/// `X^{-1} Y` for row-major 3x3 blocks.
fn solve3(x: &[f64; 9], y: &[f64; 9]) -> Result<Vec<f64>> {
    let mut out = vec![0.0; 9];
    for col in 0..3 {
        let b = [y[col], y[3 + col], y[6 + col]];
        let sol = linalg::solve_lu(3, x, &b)?;
        for row in 0..3 {
            out[3 * row + col] = sol[row];
        }
    }
    Ok(out)
}

/// The relaxed two-component system on the selected curve `p = p(k)`:
/// for slow dynamics the source pins `p`, leaving `(k, M)` with total
/// fluxes differentiated along the curve.
#[derive(Debug, Clone)]
pub struct RelaxedLimit {
    pub p: f64,
    /// `dp/dk` along the selected curve.
    pub dp_dk: f64,
    pub a: [[f64; 2]; 2],
    /// Characteristic speeds in the laboratory frame, sorted by `(re, im)`.
    pub speeds: [Complex64; 2],
}

pub fn relaxed_limit(k: f64, m: f64) -> Result<RelaxedLimit> {
    let p = cnoidal::solve_p_for_k(k)?;
    // 1/k^2 = 16 F(p) differentiated along the curve.
    let fp = cnoidal::selection_f_deriv(p)?;
    if fp.abs() < 1e-14 {
        return Err(GksError::degenerate(
            "selection curve is critical at this wavenumber",
        ));
    }
    let dp_dk = -1.0 / (8.0 * k * k * k * fp);
    let d = CnoidalDerivatives::new(k, m, p)?;
    let a = [
        [
            6.0 * m + d.c_tilde + k * d.dk_c_tilde + k * d.dp_c_tilde * dp_dk,
            6.0 * k,
        ],
        [3.0 * (d.dk_usq + d.dp_usq * dp_dk), 6.0 * m],
    ];
    let (e0, e1) = linalg::eig2(a);
    let mut speeds = [e0, e1];
    speeds.sort_by(|x, y| (x.re, x.im).partial_cmp(&(y.re, y.im)).unwrap());
    Ok(RelaxedLimit {
        p,
        dp_dk,
        a,
        speeds,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::profile::WaveParams;

    #[test]
    fn characteristics_are_frame_covariant_in_the_mean() {
        let gr = Spectral::new(256);
        let w0 = profile::solve_at(&gr, WaveParams::new(0.75, 0.0, 0.05).unwrap()).unwrap();
        let w1 = profile::solve_at(&gr, WaveParams::new(0.75, 0.4, 0.05).unwrap()).unwrap();
        let f0 = first_order(&gr, &w0).unwrap();
        let f1 = first_order(&gr, &w1).unwrap();
        // Shifting the mean boosts the frame; the co-moving rates and the
        // discriminant are invariant.
        for j in 0..2 {
            assert!((f0.lambda0[j] - f1.lambda0[j]).norm() < 1e-7);
        }
        assert!((f0.discriminant - f1.discriminant).abs() < 1e-6 * f0.discriminant.abs().max(1.0));
    }

    #[test]
    fn discriminant_matches_the_eigenvalue_gap() {
        let gr = Spectral::new(256);
        let w = profile::solve_at(&gr, WaveParams::new(0.8, 0.1, 0.05).unwrap()).unwrap();
        let f = first_order(&gr, &w).unwrap();
        let gap = f.lambda0[0] - f.lambda0[1];
        let gap_sq = gap * gap;
        assert!(
            (gap_sq.re - f.discriminant).abs() < 1e-10 * f.discriminant.abs().max(1.0),
            "gap^2 {} vs discriminant {}",
            gap_sq.re,
            f.discriminant
        );
        assert!(gap_sq.im.abs() < 1e-10);
    }

    #[test]
    fn second_order_solves_are_consistent() {
        let gr = Spectral::new(256);
        let w = profile::solve_at(&gr, WaveParams::new(0.75, 0.0, 0.05).unwrap()).unwrap();
        let d = profile::param_derivatives(&gr, &w).unwrap();
        let f = first_order_from_derivatives(&w, &d).unwrap();
        let s = second_order(&gr, &w, &d, &f).unwrap();
        // The gradient responses are pinned orthogonal to translation.
        let up = gr.deriv(&w.u, 1);
        assert!(inner(&up, &s.f_k).abs() < 1e-9);
        assert!(inner(&up, &s.f_m).abs() < 1e-9);
        for l1 in &s.lambda1 {
            assert!(l1.re.is_finite() && l1.im.is_finite());
        }
        // Hyperbolic base state keeps the corrections real.
        if f.hyperbolic {
            assert!(s.lambda1[0].im.abs() < 1e-9);
            assert!(s.lambda1[1].im.abs() < 1e-9);
        }
    }

    #[test]
    fn family_averages_match_closed_forms() {
        let p = 0.9;
        let k = 0.7;
        let d = CnoidalDerivatives::new(k, 0.0, p).unwrap();
        let wave = CnoidalWave::new(p, k, 0.0).unwrap();
        assert!((d.usq - wave.u_sq_mean().unwrap()).abs() < 1e-12 * d.usq.abs());
        assert!((d.c_tilde - wave.c_tilde().unwrap()).abs() < 1e-13 * d.c_tilde.abs());
        // Derivative of the squared-amplitude average against a secant of
        // the closed form.
        let h = 1e-4;
        let up = CnoidalWave::new(p + h, k, 0.0).unwrap().u_sq_mean().unwrap();
        let dn = CnoidalWave::new(p - h, k, 0.0).unwrap().u_sq_mean().unwrap();
        let secant = (up - dn) / (2.0 * h);
        assert!(
            (d.dp_usq - secant).abs() < 1e-6 * secant.abs().max(1.0),
            "dp<u^2> {} vs secant {}",
            d.dp_usq,
            secant
        );
    }

    #[test]
    fn selected_family_balances_production_and_dissipation() {
        for k in [0.65, 0.8, 0.92] {
            let p = cnoidal::solve_p_for_k(k).unwrap();
            let d = CnoidalDerivatives::new(k, 0.0, p).unwrap();
            let defect = k * k * d.phi - k.powi(4) * d.psi;
            assert!(
                defect.abs() < 1e-10 * (k * k * d.phi),
                "imbalance {defect:.3e} at k = {k}"
            );
        }
    }

    #[test]
    fn three_component_speeds_shift_with_the_mean() {
        let k = 0.8;
        let p = cnoidal::solve_p_for_k(k).unwrap();
        let m0 = kdv_modulation(k, 0.0, p, 0.0).unwrap();
        let m1 = kdv_modulation(k, 0.3, p, 0.0).unwrap();
        for j in 0..3 {
            let shifted = m0.speeds[j] + Complex64::new(1.8, 0.0);
            assert!(
                (m1.speeds[j] - shifted).norm() < 1e-6,
                "branch {j}: {} vs {}",
                m1.speeds[j],
                shifted
            );
        }
        // The zero-dissipation system at moderate amplitude is strictly
        // hyperbolic with distinct speeds.
        assert!(m0.speeds[0].im.abs() < 1e-9);
        assert!(m0.speeds[1].im.abs() < 1e-9);
        assert!(m0.speeds[2].im.abs() < 1e-9);
        assert!((m0.speeds[0].re - m0.speeds[1].re).abs() > 1e-3);
        assert!((m0.speeds[1].re - m0.speeds[2].re).abs() > 1e-3);
    }

    #[test]
    fn relaxed_speeds_attract_the_dissipative_characteristics() {
        let k = 0.8;
        let relaxed = relaxed_limit(k, 0.0).unwrap();
        let gr = Spectral::new(256);
        let mut gaps = Vec::new();
        for delta in [2e-2, 1e-2] {
            let w = profile::solve_at(&gr, WaveParams::new(k, 0.0, delta).unwrap()).unwrap();
            let f = first_order(&gr, &w).unwrap();
            // Compare laboratory-frame speeds branch by branch.
            let mut worst = 0.0f64;
            for j in 0..2 {
                let lab = Complex64::new(w.c, 0.0) - f.lambda0[1 - j];
                let gap = (lab - relaxed.speeds[j]).norm();
                worst = worst.max(gap);
            }
            gaps.push(worst);
        }
        // First-order approach in delta.
        let order = (gaps[0] / gaps[1]).log2();
        assert!(
            order > 0.7,
            "approach order {order:.2}, gaps {gaps:?}"
        );
    }
}
