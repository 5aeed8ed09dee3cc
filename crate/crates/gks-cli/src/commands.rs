//! The seven subcommands: argument structs, parameter resolution, and the
//! artifact writers. Every file is written with fixed key order and 12-digit
//! floats, so identical runs produce byte-identical artifacts.

use std::fs;
use std::path::PathBuf;

use clap::Args;
use gks_core::grid::Spectral;
use gks_core::io::{self, Json};
use gks_core::profile::{self, WaveParams};
use gks_core::{acceptance, bloch, cnoidal, sim, whitham, GksError, Result};
use num_complex::Complex64;

use crate::atlas;
use crate::config::{Config, Manifest, Resolver};

fn emit_manifest(emit: Option<&PathBuf>, manifest: &Manifest) -> Result<()> {
    if let Some(path) = emit {
        fs::write(path, manifest.render())?;
    }
    Ok(())
}

fn check_grid(n: usize) -> Result<()> {
    if n < 32 || n > 8192 || n % 2 != 0 {
        return Err(GksError::invalid(format!(
            "grid must be an even count in [32, 8192], got {n}"
        )));
    }
    Ok(())
}

fn cjson(z: Complex64) -> Json {
    Json::Object(vec![Json::key("re", Json::Num(z.re)), Json::key("im", Json::Num(z.im))])
}

fn cvec(zs: &[Complex64]) -> Json {
    Json::Array(zs.iter().copied().map(cjson).collect())
}

fn matrix<const N: usize>(a: &[[f64; N]; N]) -> Json {
    Json::Array(
        a.iter()
            .map(|row| Json::Array(row.iter().map(|&v| Json::Num(v)).collect()))
            .collect(),
    )
}

/// Solve one wave profile; writes the binary container and a table.
#[derive(Args)]
pub struct ProfileArgs {
    /// Wavenumber (nontrivial waves live at 0 < k < 1).
    #[arg(long)]
    k: Option<f64>,
    /// Profile mean [default: 0].
    #[arg(long = "M")]
    m: Option<f64>,
    /// Dissipation strength.
    #[arg(long)]
    delta: Option<f64>,
    /// Collocation points [default: 256].
    #[arg(long)]
    grid: Option<usize>,
    /// Binary profile output [default: profile.gksprof].
    #[arg(long)]
    out: Option<String>,
    /// Profile table output [default: profile.csv].
    #[arg(long)]
    csv: Option<String>,
}

impl ProfileArgs {
    pub fn run(&self, cfg: &Config, emit: Option<&PathBuf>) -> Result<i32> {
        let mut r = Resolver::new(cfg);
        let k = r.req_f64("k", self.k)?;
        let m = r.f64_or("M", self.m, 0.0)?;
        let delta = r.req_f64("delta", self.delta)?;
        let grid = r.usize_or("grid", self.grid, 256)?;
        let out = r.string_or("out", self.out.clone(), "profile.gksprof");
        let csv = r.string_or("csv", self.csv.clone(), "profile.csv");
        emit_manifest(emit, &r.finish("profile")?)?;
        check_grid(grid)?;

        let gr = Spectral::new(grid);
        let w = profile::solve_at(&gr, WaveParams::new(k, m, delta)?)?;
        let residual = w.residual_inf(&gr);
        let mut container = Vec::new();
        io::write_profile(&mut container, &w)?;
        fs::write(&out, container)?;
        let mut table = Vec::new();
        io::write_profile_csv(&mut table, &w)?;
        fs::write(&csv, table)?;
        println!(
            "profile k={k} M={m} delta={delta}: c={:.12e} qbar={:.12e} residual={:.3e}",
            w.c, w.qbar, residual
        );
        println!("wrote {out}, {csv}");
        Ok(0)
    }
}

/// Bloch spectrum sweep plus the fitted low-frequency expansion.
#[derive(Args)]
pub struct SpectrumArgs {
    /// Wavenumber.
    #[arg(long)]
    k: Option<f64>,
    /// Profile mean [default: 0].
    #[arg(long = "M")]
    m: Option<f64>,
    /// Dissipation strength.
    #[arg(long)]
    delta: Option<f64>,
    /// Collocation points [default: 256].
    #[arg(long)]
    grid: Option<usize>,
    /// Fourier ladder half-width of the spectral matrices [default: 64].
    #[arg(long)]
    modes: Option<usize>,
    /// Floquet offsets swept across [-pi, pi] [default: 65].
    #[arg(long)]
    n_xi: Option<usize>,
    /// Leading eigenvalue branches kept per offset [default: 2].
    #[arg(long)]
    branches: Option<usize>,
    /// Sweep table output [default: spectrum.csv].
    #[arg(long)]
    out: Option<String>,
    /// Low-frequency fit output [default: spectrum_fit.json].
    #[arg(long)]
    fit: Option<String>,
}

impl SpectrumArgs {
    pub fn run(&self, cfg: &Config, emit: Option<&PathBuf>) -> Result<i32> {
        let mut r = Resolver::new(cfg);
        let k = r.req_f64("k", self.k)?;
        let m = r.f64_or("M", self.m, 0.0)?;
        let delta = r.req_f64("delta", self.delta)?;
        let grid = r.usize_or("grid", self.grid, 256)?;
        let modes = r.usize_or("modes", self.modes, bloch::DEFAULT_HILL_MODES)?;
        let n_xi = r.usize_or("n-xi", self.n_xi, 65)?;
        let branches = r.usize_or("branches", self.branches, 2)?;
        let out = r.string_or("out", self.out.clone(), "spectrum.csv");
        let fit_path = r.string_or("fit", self.fit.clone(), "spectrum_fit.json");
        emit_manifest(emit, &r.finish("spectrum")?)?;
        check_grid(grid)?;

        let gr = Spectral::new(grid);
        let w = profile::solve_at(&gr, WaveParams::new(k, m, delta)?)?;
        let sweep = bloch::bloch_sweep(&gr, &w, modes, n_xi, branches)?;
        fs::write(&out, sweep.csv())?;
        let fit = bloch::low_freq_fit(&gr, &w, modes)?;
        let doc = Json::Object(vec![
            Json::key("format", Json::Str("spectrum-fit-v1".into())),
            Json::key("k", Json::Num(k)),
            Json::key("M", Json::Num(m)),
            Json::key("delta", Json::Num(delta)),
            Json::key("c", Json::Num(w.c)),
            Json::key("modes", Json::Int(modes as i64)),
            Json::key("lambda0", cvec(&fit.lambda0)),
            Json::key("lambda1", cvec(&fit.lambda1)),
            Json::key("fit_residual", Json::Num(fit.fit_residual)),
            Json::key("xi_base", Json::Num(fit.xi_base)),
        ]);
        fs::write(&fit_path, doc.render() + "\n")?;
        println!(
            "spectrum k={k} M={m} delta={delta}: {n_xi} offsets, {branches} branches, fit residual {:.3e}",
            fit.fit_residual
        );
        println!("wrote {out}, {fit_path}");
        Ok(0)
    }
}

/// First- and second-order modulation systems at one wave.
#[derive(Args)]
pub struct WhithamArgs {
    /// Wavenumber.
    #[arg(long)]
    k: Option<f64>,
    /// Profile mean [default: 0].
    #[arg(long = "M")]
    m: Option<f64>,
    /// Dissipation strength.
    #[arg(long)]
    delta: Option<f64>,
    /// Collocation points [default: 256].
    #[arg(long)]
    grid: Option<usize>,
    /// Report output [default: whitham.json].
    #[arg(long)]
    out: Option<String>,
}

impl WhithamArgs {
    pub fn run(&self, cfg: &Config, emit: Option<&PathBuf>) -> Result<i32> {
        let mut r = Resolver::new(cfg);
        let k = r.req_f64("k", self.k)?;
        let m = r.f64_or("M", self.m, 0.0)?;
        let delta = r.req_f64("delta", self.delta)?;
        let grid = r.usize_or("grid", self.grid, 256)?;
        let out = r.string_or("out", self.out.clone(), "whitham.json");
        emit_manifest(emit, &r.finish("whitham")?)?;
        check_grid(grid)?;

        let gr = Spectral::new(grid);
        let w = profile::solve_at(&gr, WaveParams::new(k, m, delta)?)?;
        let d = profile::param_derivatives(&gr, &w)?;
        let first = whitham::first_order_from_derivatives(&w, &d)?;
        let second = whitham::second_order(&gr, &w, &d, &first)?;
        let lambda1_re = [second.lambda1[0].re, second.lambda1[1].re];
        let verdict = atlas::verdict(first.hyperbolic, &lambda1_re);
        let doc = Json::Object(vec![
            Json::key("format", Json::Str("whitham-v1".into())),
            Json::key("k", Json::Num(k)),
            Json::key("M", Json::Num(m)),
            Json::key("delta", Json::Num(delta)),
            Json::key("c", Json::Num(w.c)),
            Json::key("qbar", Json::Num(w.qbar)),
            Json::key(
                "first_order",
                Json::Object(vec![
                    Json::key("a", matrix(&first.a)),
                    Json::key("lambda0", cvec(&first.lambda0)),
                    Json::key("discriminant", Json::Num(first.discriminant)),
                    Json::key("hyperbolic", Json::Bool(first.hyperbolic)),
                ]),
            ),
            Json::key(
                "second_order",
                Json::Object(vec![
                    Json::key("lambda1", cvec(&second.lambda1)),
                    Json::key("v", matrix(&second.v)),
                ]),
            ),
            Json::key("verdict", Json::Str(verdict.into())),
        ]);
        fs::write(&out, doc.render() + "\n")?;
        println!("whitham k={k} M={m} delta={delta}: {verdict}, discriminant {:.6e}", first.discriminant);
        println!("wrote {out}");
        Ok(0)
    }
}

/// Three-component dispersion relation of the weak-dissipation limit.
#[derive(Args)]
pub struct KdvLimitArgs {
    /// Wavenumber on the selected family (alternative to --p).
    #[arg(long)]
    k: Option<f64>,
    /// Elliptic shape parameter on the selected family (alternative to --k).
    #[arg(long)]
    p: Option<f64>,
    /// Profile mean [default: 0].
    #[arg(long = "M")]
    m: Option<f64>,
    /// Ratio of dissipation to modulation length scales [default: 1].
    #[arg(long)]
    deltabar: Option<f64>,
    /// Collocation points [default: 256].
    #[arg(long)]
    grid: Option<usize>,
    /// Report output [default: kdv_limit.json].
    #[arg(long)]
    out: Option<String>,
}

impl KdvLimitArgs {
    pub fn run(&self, cfg: &Config, emit: Option<&PathBuf>) -> Result<i32> {
        let mut r = Resolver::new(cfg);
        let k_given = r.opt_f64("k", self.k)?;
        let p_given = r.opt_f64("p", self.p)?;
        let m = r.f64_or("M", self.m, 0.0)?;
        let deltabar = r.f64_or("deltabar", self.deltabar, 1.0)?;
        let grid = r.usize_or("grid", self.grid, 256)?;
        let out = r.string_or("out", self.out.clone(), "kdv_limit.json");
        emit_manifest(emit, &r.finish("kdv-limit")?)?;
        check_grid(grid)?;
        if !(deltabar.is_finite() && deltabar >= 0.0) {
            return Err(GksError::invalid(format!(
                "deltabar must be a nonnegative ratio, got {deltabar}"
            )));
        }
        let k = match (k_given, p_given) {
            (Some(_), Some(_)) => {
                return Err(GksError::invalid("give either `k` or `p`, not both"))
            }
            (Some(k), None) => k,
            (None, Some(p)) => cnoidal::k_for_p(p)?,
            (None, None) => {
                return Err(GksError::invalid(
                    "missing parameter: pass --k or --p (or set one in the config file)",
                ))
            }
        };

        let gr = Spectral::new(grid);
        let disp = bloch::kdv_limit_dispersion(&gr, k, m, deltabar)?;
        let cubic = bloch::pencil_cubic(&disp.a, &disp.b);
        let doc = Json::Object(vec![
            Json::key("format", Json::Str("kdv-limit-v1".into())),
            Json::key("k", Json::Num(disp.k)),
            Json::key("M", Json::Num(disp.m)),
            Json::key("p", Json::Num(disp.p)),
            Json::key("deltabar", Json::Num(disp.rho)),
            Json::key("a", matrix(&disp.a)),
            Json::key("b", matrix(&disp.b)),
            Json::key("cubic", Json::Array(cubic.iter().map(|&v| Json::Num(v)).collect())),
            Json::key("roots", cvec(&disp.roots)),
            Json::key(
                "vectors",
                Json::Array(disp.vectors.iter().map(|v| cvec(v)).collect()),
            ),
        ]);
        fs::write(&out, doc.render() + "\n")?;
        println!(
            "kdv-limit k={:.6} p={:.6} M={m} deltabar={deltabar}: roots ({:.6e}{:+.6e}i, {:.6e}{:+.6e}i, {:.6e}{:+.6e}i)",
            disp.k, disp.p,
            disp.roots[0].re, disp.roots[0].im,
            disp.roots[1].re, disp.roots[1].im,
            disp.roots[2].re, disp.roots[2].im
        );
        println!("wrote {out}");
        Ok(0)
    }
}

/// Classify modulation stability across a wavenumber sweep.
#[derive(Args)]
pub struct AtlasArgs {
    /// Dissipation strength.
    #[arg(long)]
    delta: Option<f64>,
    /// Profile mean [default: 0].
    #[arg(long = "M")]
    m: Option<f64>,
    /// First wavenumber of the sweep.
    #[arg(long)]
    k_min: Option<f64>,
    /// Last wavenumber of the sweep.
    #[arg(long)]
    k_max: Option<f64>,
    /// Number of sweep points, endpoints included.
    #[arg(long)]
    k_steps: Option<usize>,
    /// Collocation points [default: 256].
    #[arg(long)]
    grid: Option<usize>,
    /// Atlas table output [default: atlas.csv].
    #[arg(long)]
    out: Option<String>,
}

impl AtlasArgs {
    pub fn run(&self, cfg: &Config, emit: Option<&PathBuf>) -> Result<i32> {
        let mut r = Resolver::new(cfg);
        let delta = r.req_f64("delta", self.delta)?;
        let m = r.f64_or("M", self.m, 0.0)?;
        let k_min = r.req_f64("k-min", self.k_min)?;
        let k_max = r.req_f64("k-max", self.k_max)?;
        let k_steps = r.req_usize("k-steps", self.k_steps)?;
        let grid = r.usize_or("grid", self.grid, 256)?;
        let out = r.string_or("out", self.out.clone(), "atlas.csv");
        emit_manifest(emit, &r.finish("atlas")?)?;
        check_grid(grid)?;
        if !(k_min.is_finite() && k_max.is_finite() && 0.0 < k_min && k_min <= k_max) {
            return Err(GksError::invalid(format!(
                "sweep range must satisfy 0 < k-min <= k-max, got [{k_min}, {k_max}]"
            )));
        }
        if k_steps == 0 || (k_steps == 1 && k_min != k_max) {
            return Err(GksError::invalid(
                "k-steps must be positive, and a single step needs k-min = k-max",
            ));
        }

        let ks: Vec<f64> = (0..k_steps)
            .map(|i| {
                if k_steps == 1 {
                    k_min
                } else {
                    k_min + (k_max - k_min) * i as f64 / (k_steps - 1) as f64
                }
            })
            .collect();
        let points = atlas::sweep(grid, m, delta, &ks)?;
        fs::write(&out, atlas::render_csv(&points))?;
        let count = |v: &str| points.iter().filter(|p| p.verdict == v).count();
        println!(
            "atlas delta={delta} M={m}: {k_steps} rows ({} hyperbolic-stable-to-2nd-order, {} hyperbolic-2nd-order-unstable, {} elliptic)",
            count("hyperbolic-stable-to-2nd-order"),
            count("hyperbolic-2nd-order-unstable"),
            count("elliptic")
        );
        println!("wrote {out}");
        Ok(0)
    }
}

/// Integrate a modulated wave train and record the final state.
#[derive(Args)]
pub struct SimulateArgs {
    /// Wavenumber.
    #[arg(long)]
    k: Option<f64>,
    /// Profile mean [default: 0].
    #[arg(long = "M")]
    m: Option<f64>,
    /// Dissipation strength.
    #[arg(long)]
    delta: Option<f64>,
    /// Wave copies in the domain [default: 16].
    #[arg(long)]
    periods: Option<usize>,
    /// Simulation points per wave copy [default: 32].
    #[arg(long)]
    modes_per_period: Option<usize>,
    /// Relative wavenumber modulation amplitude [default: 0.01].
    #[arg(long)]
    amp: Option<f64>,
    /// End time [default: 50].
    #[arg(long)]
    t_end: Option<f64>,
    /// Time step [default: 0.01].
    #[arg(long)]
    dt: Option<f64>,
    /// Collocation points of the profile solve [default: 256].
    #[arg(long)]
    grid: Option<usize>,
    /// Final state table output [default: simulate.csv].
    #[arg(long)]
    out: Option<String>,
    /// Run summary output [default: simulate.json].
    #[arg(long)]
    summary: Option<String>,
}

impl SimulateArgs {
    pub fn run(&self, cfg: &Config, emit: Option<&PathBuf>) -> Result<i32> {
        let mut r = Resolver::new(cfg);
        let k = r.req_f64("k", self.k)?;
        let m = r.f64_or("M", self.m, 0.0)?;
        let delta = r.req_f64("delta", self.delta)?;
        let periods = r.usize_or("periods", self.periods, 16)?;
        let mpp = r.usize_or("modes-per-period", self.modes_per_period, 32)?;
        let amp = r.f64_or("amp", self.amp, 0.01)?;
        let t_end = r.f64_or("t-end", self.t_end, 50.0)?;
        let dt = r.f64_or("dt", self.dt, 0.01)?;
        let grid = r.usize_or("grid", self.grid, 256)?;
        let out = r.string_or("out", self.out.clone(), "simulate.csv");
        let summary = r.string_or("summary", self.summary.clone(), "simulate.json");
        emit_manifest(emit, &r.finish("simulate")?)?;
        check_grid(grid)?;
        if periods == 0 {
            return Err(GksError::invalid("periods must be positive"));
        }
        if mpp < 8 || mpp % 2 != 0 {
            return Err(GksError::invalid(format!(
                "modes-per-period must be an even count of at least 8, got {mpp}"
            )));
        }
        if !(amp.is_finite() && amp.abs() < 1.0) {
            return Err(GksError::invalid(format!(
                "relative modulation amplitude must satisfy |amp| < 1, got {amp}"
            )));
        }
        if !(dt.is_finite() && dt > 0.0) || !(t_end.is_finite() && t_end >= 0.0) {
            return Err(GksError::invalid(format!(
                "time stepping needs dt > 0 and t-end >= 0, got dt={dt}, t-end={t_end}"
            )));
        }

        let gr = Spectral::new(grid);
        let w = profile::solve_at(&gr, WaveParams::new(k, m, delta)?)?;
        let n = periods * mpp;
        let (u0, length) = sim::modulated_train(&gr, &w, periods, n, amp);
        let mut s = sim::DirectSim::new(n, length, delta, dt, &u0)?;
        let mass_initial = s.mass();
        let steps = (t_end / dt).round() as usize;
        s.advance(steps);
        let u_final = s.solution();
        if !u_final.iter().all(|v| v.is_finite()) {
            return Err(GksError::NonConvergence {
                what: "direct run diverged".into(),
                iterations: steps,
                residual: f64::INFINITY,
            });
        }
        let mass_final = s.mass();
        let sup_final = u_final.iter().fold(0.0f64, |a, &v| a.max(v.abs()));

        let mut table = String::from("x,u\n");
        for (j, v) in u_final.iter().enumerate() {
            table.push_str(&format!("{:.12e},{:.12e}\n", j as f64 * length / n as f64, v));
        }
        fs::write(&out, table)?;
        let doc = Json::Object(vec![
            Json::key("format", Json::Str("simulate-v1".into())),
            Json::key("k", Json::Num(k)),
            Json::key("M", Json::Num(m)),
            Json::key("delta", Json::Num(delta)),
            Json::key("periods", Json::Int(periods as i64)),
            Json::key("modes-per-period", Json::Int(mpp as i64)),
            Json::key("amp", Json::Num(amp)),
            Json::key("dt", Json::Num(dt)),
            Json::key("steps", Json::Int(steps as i64)),
            Json::key("time", Json::Num(s.time())),
            Json::key("n", Json::Int(n as i64)),
            Json::key("length", Json::Num(length)),
            Json::key("c", Json::Num(w.c)),
            Json::key("mass_initial", Json::Num(mass_initial)),
            Json::key("mass_final", Json::Num(mass_final)),
            Json::key("sup_final", Json::Num(sup_final)),
        ]);
        fs::write(&summary, doc.render() + "\n")?;
        println!(
            "simulate k={k} M={m} delta={delta}: {steps} steps to t={:.3}, mass drift {:.3e}, sup {:.6e}",
            s.time(),
            (mass_final - mass_initial).abs(),
            sup_final
        );
        println!("wrote {out}, {summary}");
        Ok(0)
    }
}

/// Run the validation suites and print a pass/fail report.
#[derive(Args)]
pub struct ValidateArgs {
    /// Suite name, or `all` [default: all].
    #[arg(long)]
    suite: Option<String>,
    /// Also write the report to this path.
    #[arg(long)]
    out: Option<String>,
}

impl ValidateArgs {
    pub fn run(&self, cfg: &Config, emit: Option<&PathBuf>) -> Result<i32> {
        let mut r = Resolver::new(cfg);
        let suite = r.string_or("suite", self.suite.clone(), "all");
        let out = r.opt_string("out", self.out.clone());
        emit_manifest(emit, &r.finish("validate")?)?;

        let reports = if suite == "all" {
            acceptance::run_all()
        } else {
            vec![acceptance::run_named(&suite).ok_or_else(|| {
                GksError::invalid(format!(
                    "unknown suite `{suite}`; valid: all, {}",
                    acceptance::CRITERIA.join(", ")
                ))
            })?]
        };
        let text = acceptance::render_report(&reports);
        print!("{text}");
        if let Some(path) = out {
            fs::write(path, &text)?;
        }
        Ok(if reports.iter().all(|rep| rep.passed) { 0 } else { 2 })
    }
}
