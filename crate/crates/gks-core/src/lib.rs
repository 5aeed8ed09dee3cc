//! Periodic traveling waves of the generalized Kuramoto-Sivashinsky equation
//!
//!   u_t + 6 u u_x + u_xxx + delta (u_xx + u_xxxx) = 0
//!
//! The crate computes wave profiles, their slow-modulation (Whitham) systems
//! at first and second order, Bloch spectra of the linearized operator, the
//! three-equation modulation system of the small-delta limit, and direct
//! time integration used to cross-check the modulation predictions.
//!
//! Conventions used throughout:
//!
//! * Profiles are 1-periodic functions on the unit grid `y in [0,1)` and the
//!   physical solution is `u(x,t) = U(k (x - c t) / (2 pi) mod 1)`.
//! * `D` denotes d/d theta with `theta = 2 pi y`, so a Fourier mode
//!   `exp(2 pi i m y)` has multiplier `(i m)` and `d/dx = k D`.
//! * `k` is the physical angular wavenumber; the small-amplitude onset of the
//!   periodic family sits at `k = 1`.
//! * `<f>` is the average over one period, `<f, g>` the corresponding inner
//!   product.

pub mod bloch;
pub mod cnoidal;
pub mod error;
pub mod grid;
pub mod io;
pub mod linalg;
pub mod operators;
pub mod profile;
pub mod sim;
pub mod special;
pub mod whitham;

pub mod acceptance;

pub use error::{GksError, Result};
