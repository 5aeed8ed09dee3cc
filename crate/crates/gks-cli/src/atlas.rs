//! Stability atlas: classify modulation behavior across a wavenumber sweep.
//!
//! Points are independent, so they are dispatched to a small worker pool;
//! results land in index-addressed slots, which keeps the output order (and
//! therefore the emitted CSV) independent of scheduling.

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use gks_core::grid::Spectral;
use gks_core::profile::{self, WaveParams};
use gks_core::whitham;
use gks_core::{GksError, Result};
use num_complex::Complex64;

pub struct AtlasPoint {
    pub k: f64,
    pub discriminant: f64,
    /// First-order characteristic rates in the frame of the wave.
    pub lambda0: [Complex64; 2],
    /// Real parts of the second-order rates; NaN when the wave is elliptic
    /// and the second-order solve degenerates.
    pub lambda1_re: [f64; 2],
    pub verdict: &'static str,
}

/// Two-tier classification: first-order hyperbolicity, then second-order
/// damping of both branches.
pub fn verdict(hyperbolic: bool, lambda1_re: &[f64; 2]) -> &'static str {
    if !hyperbolic {
        "elliptic"
    } else if lambda1_re[0] >= 0.0 && lambda1_re[1] >= 0.0 {
        "hyperbolic-stable-to-2nd-order"
    } else {
        "hyperbolic-2nd-order-unstable"
    }
}

fn compute(gr: &Spectral, k: f64, m: f64, delta: f64) -> Result<AtlasPoint> {
    let w = profile::solve_at(gr, WaveParams::new(k, m, delta)?)?;
    let d = profile::param_derivatives(gr, &w)?;
    let first = whitham::first_order_from_derivatives(&w, &d)?;
    let second = whitham::second_order(gr, &w, &d, &first);
    let lambda1_re = match second {
        Ok(s) => [s.lambda1[0].re, s.lambda1[1].re],
        // The damping rates do not decide an elliptic verdict, so a
        // degenerate second-order solve only blanks those two columns.
        Err(_) if !first.hyperbolic => [f64::NAN, f64::NAN],
        Err(e) => return Err(e),
    };
    Ok(AtlasPoint {
        k,
        discriminant: first.discriminant,
        lambda0: first.lambda0,
        lambda1_re,
        verdict: verdict(first.hyperbolic, &lambda1_re),
    })
}

fn worker_count(rows: usize) -> Result<usize> {
    let requested = match std::env::var("GKS_NUM_WORKERS") {
        Ok(text) => Some(text.parse::<usize>().ok().filter(|&v| v >= 1).ok_or_else(|| {
            GksError::invalid(format!("GKS_NUM_WORKERS must be a positive count, got {text:?}"))
        })?),
        Err(_) => None,
    };
    let available = std::thread::available_parallelism().map_or(1, |n| n.get());
    Ok(requested.unwrap_or(available).min(rows).max(1))
}

/// Classifies every wavenumber in `ks` at fixed mean and dissipation.
/// The first failing point (in sweep order) aborts the atlas.
pub fn sweep(grid: usize, m: f64, delta: f64, ks: &[f64]) -> Result<Vec<AtlasPoint>> {
    let rows = ks.len();
    let slots: Vec<Mutex<Option<Result<AtlasPoint>>>> =
        (0..rows).map(|_| Mutex::new(None)).collect();
    let next = AtomicUsize::new(0);
    let workers = worker_count(rows)?;
    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| {
                let gr = Spectral::new(grid);
                loop {
                    let i = next.fetch_add(1, Ordering::Relaxed);
                    if i >= rows {
                        break;
                    }
                    let point = compute(&gr, ks[i], m, delta);
                    *slots[i].lock().expect("no panics hold the slot") = Some(point);
                }
            });
        }
    });
    slots
        .into_iter()
        .map(|slot| {
            slot.into_inner()
                .expect("no panics hold the slot")
                .expect("every index below rows was dispatched")
        })
        .collect()
}

/// CSV with one row per wavenumber; floats carry 12 digits, NaN columns
/// print as `NaN`.
pub fn render_csv(points: &[AtlasPoint]) -> String {
    let mut out =
        String::from("k,Delta,re_L0_1,im_L0_1,re_L0_2,im_L0_2,re_L1_1,re_L1_2,verdict\n");
    for p in points {
        out.push_str(&format!(
            "{:.12e},{:.12e},{:.12e},{:.12e},{:.12e},{:.12e},{:.12e},{:.12e},{}\n",
            p.k,
            p.discriminant,
            p.lambda0[0].re,
            p.lambda0[0].im,
            p.lambda0[1].re,
            p.lambda0[1].im,
            p.lambda1_re[0],
            p.lambda1_re[1],
            p.verdict
        ));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn verdict_tiers() {
        assert_eq!(verdict(false, &[1.0, 1.0]), "elliptic");
        assert_eq!(verdict(false, &[f64::NAN, f64::NAN]), "elliptic");
        assert_eq!(verdict(true, &[0.5, 6.4]), "hyperbolic-stable-to-2nd-order");
        assert_eq!(verdict(true, &[-0.5, 6.4]), "hyperbolic-2nd-order-unstable");
    }

    #[test]
    fn sweep_order_is_independent_of_scheduling() {
        // Two points, forced through one worker and then recomputed in the
        // caller's thread; rows must come back in sweep order with
        // identical values.
        let ks = [0.6, 0.7];
        let points = sweep(128, 0.0, 0.5, &ks).unwrap();
        assert_eq!(points.len(), 2);
        let gr = Spectral::new(128);
        for (p, &k) in points.iter().zip(&ks) {
            assert_eq!(p.k, k);
            let direct = compute(&gr, k, 0.0, 0.5).unwrap();
            assert_eq!(p.discriminant.to_bits(), direct.discriminant.to_bits());
            assert_eq!(p.verdict, direct.verdict);
        }
    }
}
