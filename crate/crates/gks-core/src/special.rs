//! Complete elliptic integrals and the Jacobi dn function.
//!
//! All routines take the elliptic *modulus* `p` (not the parameter `m = p^2`).
//! `K` and `E` come from the arithmetic-geometric mean, `dn` from a descending
//! Landen transformation; both converge quadratically, so accuracy is at the
//! rounding level across the whole modulus range used by the wave family.

use crate::error::{GksError, Result};

/// Largest modulus treated as non-degenerate; beyond it `K` diverges
/// logarithmically and profile computations are meaningless anyway.
pub const P_CAP: f64 = 1.0 - 1e-12;

/// Complete elliptic integral of the first kind, `K(p)`.
pub fn elliptic_k(p: f64) -> Result<f64> {
    if !(0.0..1.0).contains(&p) {
        return Err(GksError::invalid(format!(
            "elliptic_k requires 0 <= p < 1, got {p}"
        )));
    }
    let p = p.min(P_CAP);
    let (a, _) = agm(1.0, (1.0 - p * p).sqrt());
    Ok(std::f64::consts::PI / (2.0 * a))
}

/// Complete elliptic integral of the second kind, `E(p)`.
pub fn elliptic_e(p: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&p) {
        return Err(GksError::invalid(format!(
            "elliptic_e requires 0 <= p <= 1, got {p}"
        )));
    }
    if p >= P_CAP {
        // E(1) = 1; linear in the gap below the cap is beyond f64 resolution.
        return Ok(1.0);
    }
    // E = K (1 - sum 2^{n-1} c_n^2), c_0 = p. The cancellation-free update
    // c_{n+1} = c_n^2 / (4 a_{n+1}) follows from the invariant
    // c_n^2 = a_n^2 - b_n^2.
    let mut a = 1.0f64;
    let mut b = (1.0 - p * p).sqrt();
    let mut c = p;
    let mut sum = 0.5 * c * c;
    let mut pow = 0.5;
    for _ in 0..64 {
        if c.abs() < 1e-18 {
            break;
        }
        let an = 0.5 * (a + b);
        c = c * c / (4.0 * an);
        b = (a * b).sqrt();
        a = an;
        pow *= 2.0;
        sum += pow * c * c;
    }
    let k = std::f64::consts::PI / (2.0 * a);
    Ok(k * (1.0 - sum))
}

fn agm(mut a: f64, mut b: f64) -> (f64, usize) {
    let mut iters = 0;
    while (a - b).abs() > 1e-17 * a && iters < 64 {
        let an = 0.5 * (a + b);
        b = (a * b).sqrt();
        a = an;
        iters += 1;
    }
    (a, iters)
}

/// `dK/dp`, exact except for a series branch near `p = 0` where the closed
/// form loses digits to cancellation.
pub fn elliptic_k_deriv(p: f64) -> Result<f64> {
    if !(0.0..1.0).contains(&p) {
        return Err(GksError::invalid(format!(
            "elliptic_k_deriv requires 0 <= p < 1, got {p}"
        )));
    }
    if p < 0.02 {
        return Ok(k_deriv_series(p));
    }
    let p = p.min(P_CAP);
    let k = elliptic_k(p)?;
    let e = elliptic_e(p)?;
    Ok((e - (1.0 - p * p) * k) / (p * (1.0 - p * p)))
}

/// `dE/dp` with the matching series branch.
pub fn elliptic_e_deriv(p: f64) -> Result<f64> {
    if !(0.0..1.0).contains(&p) {
        return Err(GksError::invalid(format!(
            "elliptic_e_deriv requires 0 <= p < 1, got {p}"
        )));
    }
    if p < 0.02 {
        return Ok(e_deriv_series(p));
    }
    let k = elliptic_k(p)?;
    let e = elliptic_e(p)?;
    Ok((e - k) / p)
}

// K = (pi/2) sum a_n p^{2n}, a_n = ((2n-1)!!/(2n)!!)^2, differentiated
// termwise; truncation below the p = 0.02 seam is under 1e-17 while the
// closed forms above it still cancel only ~1e-12 relative.
fn k_deriv_series(p: f64) -> f64 {
    let p2 = p * p;
    let s = p * (0.5
        + p2 * (9.0 / 16.0
            + p2 * (75.0 / 128.0 + p2 * (1225.0 / 2048.0 + p2 * (19845.0 / 32768.0)))));
    std::f64::consts::FRAC_PI_2 * s
}

fn e_deriv_series(p: f64) -> f64 {
    let p2 = p * p;
    let s = -p
        * (0.5
            + p2 * (3.0 / 16.0
                + p2 * (15.0 / 128.0 + p2 * (175.0 / 2048.0 + p2 * (2205.0 / 32768.0)))));
    std::f64::consts::FRAC_PI_2 * s
}

/// Jacobi `dn(u, p)`. Uses `dn = sqrt(1 - p^2 sn^2)` (dn is positive for
/// `p < 1`) with `sn` from a descending Landen recursion, after reducing the
/// argument by the period `2K` and reflecting into `[0, K]`.
pub fn jacobi_dn(u: f64, p: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&p) {
        return Err(GksError::invalid(format!(
            "jacobi_dn requires 0 <= p <= 1, got {p}"
        )));
    }
    if p >= P_CAP {
        // Soliton limit: dn -> sech.
        return Ok(1.0 / u.cosh());
    }
    let k = elliptic_k(p)?;
    let period = 2.0 * k;
    let mut v = u.rem_euclid(period);
    if v > k {
        v = period - v; // dn(2K - u) = dn(u)
    }
    let s = sn_reduced(v, p);
    Ok((1.0 - (p * s) * (p * s)).max(0.0).sqrt())
}

/// sn on `[0, K]` by descending Landen: with `p1 = (1 - p')/(1 + p')`,
/// `sn(u, p) = (1 + p1) s1 / (1 + p1 s1^2)` where `s1 = sn(u/(1+p1), p1)`.
fn sn_reduced(u: f64, p: f64) -> f64 {
    if p < 1e-12 {
        return u.sin();
    }
    let pprime = (1.0 - p * p).sqrt();
    let p1 = (1.0 - pprime) / (1.0 + pprime);
    let s1 = sn_reduced(u / (1.0 + p1), p1);
    (1.0 + p1) * s1 / (1.0 + p1 * s1 * s1)
}
