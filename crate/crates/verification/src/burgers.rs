//! Coupled viscous Burgers equations on the unit square,
//!
//! ```text
//! u_t + u u_x + v u_y = (u_xx + u_yy) / R
//! v_t + u v_x + v v_y = (v_xx + v_yy) / R
//! ```
//!
//! with initial data `u = x + y`, `v = x - y` and Dirichlet boundaries taken
//! from the exact solution. Convection is first-order upwind by the sign of
//! the local velocity, diffusion is the 5-point Laplacian, time stepping is
//! explicit Euler.

use std::ops::{Add, Mul, Sub};
use std::time::Instant;

use dslad::{ActiveScalar, MemoryReport, Tape};
use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use thiserror::Error;

use crate::report::{GradCheck, Times};

#[derive(Debug, Error, PartialEq)]
pub enum BurgersError {
    #[error("exact solution is singular at t = {0} (1 - 2t^2 = 0)")]
    SingularTime(f64),
    #[error("invalid configuration: {0}")]
    Config(String),
}

/// Closed form solution `(u, v)`.
///
/// `v = (x - y - 2yt) / (1 - 2t^2)`; a `v` with the same form as `u` would
/// not reduce to the initial data `x - y` and does not solve the system.
pub fn exact(x: f64, y: f64, t: f64) -> Result<(f64, f64), BurgersError> {
    let d = 1.0 - 2.0 * t * t;
    if d.abs() < 1e-12 {
        return Err(BurgersError::SingularTime(t));
    }
    Ok(((x + y - 2.0 * x * t) / d, (x - y - 2.0 * y * t) / d))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BurgersConfig {
    /// Grid points per dimension, boundaries included.
    pub grid: usize,
    pub steps: usize,
    pub reynolds: f64,
    pub dt: f64,
}

impl BurgersConfig {
    /// Default time step: `0.4 h / s` with `s = max(|u| + |v|)` of the
    /// initial field, capped so the diffusive part of the update stays
    /// below one half.
    pub fn new(grid: usize, steps: usize, reynolds: f64) -> Self {
        let h = 1.0 / (grid.max(2) - 1) as f64;
        let speed = 2.0;
        let dt = (0.4 * h / speed).min(0.125 * reynolds * h * h);
        Self { grid, steps, reynolds, dt }
    }

    /// Steps of at most the default size that end exactly at `t_final`.
    pub fn until(grid: usize, t_final: f64, reynolds: f64) -> Self {
        let max_dt = Self::new(grid, 1, reynolds).dt;
        let steps = (t_final / max_dt).ceil() as usize;
        Self { grid, steps, reynolds, dt: t_final / steps as f64 }
    }

    pub fn validate(&self) -> Result<(), BurgersError> {
        if self.grid < 3 {
            return Err(BurgersError::Config(format!("grid must be at least 3, got {}", self.grid)));
        }
        if !(self.reynolds > 0.0) {
            return Err(BurgersError::Config(format!("reynolds must be positive, got {}", self.reynolds)));
        }
        if !(self.dt > 0.0) {
            return Err(BurgersError::Config(format!("dt must be positive, got {}", self.dt)));
        }
        // the exact solution only exists up to the blow-up at 1/sqrt(2)
        let t = self.final_time();
        if 2.0 * t * t >= 1.0 - 1e-12 {
            return Err(BurgersError::SingularTime(t));
        }
        Ok(())
    }

    pub fn h(&self) -> f64 {
        1.0 / (self.grid - 1) as f64
    }

    pub fn final_time(&self) -> f64 {
        self.steps as f64 * self.dt
    }

    pub fn interior(&self) -> usize {
        (self.grid - 2) * (self.grid - 2)
    }

    /// Active assignments per time step: one per interior node and field.
    pub fn statements_per_step(&self) -> usize {
        2 * self.interior()
    }

    /// Largest `dt (|u|+|v|) / h + 4 dt / (R h^2)` over the exact field of
    /// the run. Above one the explicit scheme loses positivity.
    pub fn cfl(&self) -> f64 {
        let h = self.h();
        let mut speed: f64 = 0.0;
        for &t in &[0.0, self.final_time()] {
            for &(x, y) in &[(1.0, 1.0), (1.0, 0.0), (0.0, 1.0)] {
                if let Ok((u, v)) = exact(x, y, t) {
                    speed = speed.max(u.abs() + v.abs());
                }
            }
        }
        self.dt * speed / h + 4.0 * self.dt / (self.reynolds * h * h)
    }

    fn coefficients(&self) -> (f64, f64) {
        let h = self.h();
        (self.dt / h, self.dt / (self.reynolds * h * h))
    }

    fn is_boundary(&self, k: usize) -> bool {
        let (i, j) = (k % self.grid, k / self.grid);
        i == 0 || j == 0 || i == self.grid - 1 || j == self.grid - 1
    }

    fn coords(&self, k: usize) -> (f64, f64) {
        let h = self.h();
        ((k % self.grid) as f64 * h, (k / self.grid) as f64 * h)
    }

    /// Node indices of the interior, row by row.
    pub fn interior_nodes(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.grid * self.grid).filter(move |&k| !self.is_boundary(k))
    }
}

/// Numbers the stepper can run on. Upwind decisions use `re`.
pub trait Field: Copy + Add<Output = Self> + Sub<Output = Self> + Mul<Output = Self> + Mul<f64, Output = Self> + From<f64> {
    fn re(&self) -> f64;
}

impl Field for f64 {
    fn re(&self) -> f64 {
        *self
    }
}

/// One upwind update of `c`, written once for plain numbers and for
/// active leaves so both evaluate the same arithmetic.
macro_rules! upwind {
    ($c:expr, $w:expr, $e:expr, $s:expr, $n:expr, $u:expr, $v:expr, $fx:expr, $fy:expr, $a:expr, $b:expr) => {{
        let (c, w, e, s, n) = ($c, $w, $e, $s, $n);
        let qx = if $fx { e - c } else { c - w };
        let qy = if $fy { n - c } else { c - s };
        c - ($u * qx + $v * qy) * $a + ((((w + e) + s) + n) - c * 4.0) * $b
    }};
}

/// Exact field at time `t` on every node.
pub fn exact_field(cfg: &BurgersConfig, t: f64) -> Result<(Vec<f64>, Vec<f64>), BurgersError> {
    let n = cfg.grid * cfg.grid;
    let (mut u, mut v) = (Vec::with_capacity(n), Vec::with_capacity(n));
    for k in 0..n {
        let (x, y) = cfg.coords(k);
        let (a, b) = exact(x, y, t)?;
        u.push(a);
        v.push(b);
    }
    Ok((u, v))
}

/// Advances `(u, v)` from `t` to `t + dt`.
pub fn step<T: Field>(cfg: &BurgersConfig, u: &[T], v: &[T], t: f64) -> Result<(Vec<T>, Vec<T>), BurgersError> {
    let g = cfg.grid;
    let (a, b) = cfg.coefficients();
    let t_next = t + cfg.dt;
    let mut un = Vec::with_capacity(u.len());
    let mut vn = Vec::with_capacity(v.len());
    for k in 0..g * g {
        if cfg.is_boundary(k) {
            let (x, y) = cfg.coords(k);
            let (eu, ev) = exact(x, y, t_next)?;
            un.push(T::from(eu));
            vn.push(T::from(ev));
            continue;
        }
        let (uc, vc) = (u[k], v[k]);
        let (fx, fy) = (uc.re() < 0.0, vc.re() < 0.0);
        un.push(upwind!(u[k], u[k - 1], u[k + 1], u[k - g], u[k + g], uc, vc, fx, fy, a, b));
        vn.push(upwind!(v[k], v[k - 1], v[k + 1], v[k - g], v[k + g], uc, vc, fx, fy, a, b));
    }
    Ok((un, vn))
}

/// Runs all steps from the given full-grid state.
pub fn solve<T: Field>(cfg: &BurgersConfig, u0: Vec<T>, v0: Vec<T>) -> Result<(Vec<T>, Vec<T>), BurgersError> {
    cfg.validate()?;
    let (mut u, mut v) = (u0, v0);
    for s in 0..cfg.steps {
        (u, v) = step(cfg, &u, &v, s as f64 * cfg.dt)?;
    }
    Ok((u, v))
}

/// Max-norm error of `u` against the exact solution at the final time.
pub fn primal_error(cfg: &BurgersConfig) -> Result<f64, BurgersError> {
    let (u0, v0) = exact_field(cfg, 0.0)?;
    let (u, _) = solve(cfg, u0, v0)?;
    let (ue, _) = exact_field(cfg, cfg.final_time())?;
    Ok(cfg.interior_nodes().map(|k| (u[k] - ue[k]).abs()).fold(0.0, f64::max))
}

/// Sum of the final interior `u` as a function of the initial interior `u`.
pub fn objective(cfg: &BurgersConfig, u_interior: &[f64]) -> Result<f64, BurgersError> {
    let (mut u0, v0) = exact_field(cfg, 0.0)?;
    for (k, &x) in cfg.interior_nodes().zip(u_interior) {
        u0[k] = x;
    }
    let (u, _) = solve(cfg, u0, v0)?;
    Ok(cfg.interior_nodes().map(|k| u[k]).sum())
}

type ActiveFields<'t> = (Vec<ActiveScalar<'t, f64>>, Vec<ActiveScalar<'t, f64>>);

/// The solver recorded on a tape. Inputs are the initial interior values of
/// both fields; boundary values are passive.
pub struct Recording<'t> {
    pub cfg: BurgersConfig,
    pub u0: Vec<ActiveScalar<'t, f64>>,
    pub v0: Vec<ActiveScalar<'t, f64>>,
    last: Option<ActiveFields<'t>>,
}

impl<'t> Recording<'t> {
    pub fn record(tape: &'t Tape<f64>, cfg: &BurgersConfig) -> Result<Self, BurgersError> {
        cfg.validate()?;
        let g = cfg.grid;
        let (a, b) = cfg.coefficients();
        let (eu, ev) = exact_field(cfg, 0.0)?;
        let input = |k: usize, x: f64| if cfg.is_boundary(k) { tape.var(x) } else { tape.register_input(x) };
        let u0: Vec<_> = eu.iter().enumerate().map(|(k, &x)| input(k, x)).collect();
        let v0: Vec<_> = ev.iter().enumerate().map(|(k, &x)| input(k, x)).collect();
        let mut last: Option<ActiveFields<'t>> = None;
        for s in 0..cfg.steps {
            let t_next = (s + 1) as f64 * cfg.dt;
            let (u, v) = match &last {
                Some((u, v)) => (u, v),
                None => (&u0, &v0),
            };
            let mut un = Vec::with_capacity(g * g);
            let mut vn = Vec::with_capacity(g * g);
            for k in 0..g * g {
                if cfg.is_boundary(k) {
                    let (x, y) = cfg.coords(k);
                    let (bu, bv) = exact(x, y, t_next)?;
                    un.push(tape.var(bu));
                    vn.push(tape.var(bv));
                    continue;
                }
                let (uc, vc) = (&u[k], &v[k]);
                let (fx, fy) = (uc.value() < 0.0, vc.value() < 0.0);
                un.push(tape.eval(upwind!(&u[k], &u[k - 1], &u[k + 1], &u[k - g], &u[k + g], uc, vc, fx, fy, a, b)));
                vn.push(tape.eval(upwind!(&v[k], &v[k - 1], &v[k + 1], &v[k - g], &v[k + g], uc, vc, fx, fy, a, b)));
            }
            last = Some((un, vn));
        }
        Ok(Self { cfg: *cfg, u0, v0, last })
    }

    pub fn final_u(&self) -> &[ActiveScalar<'t, f64>] {
        self.last.as_ref().map_or(&self.u0, |(u, _)| u)
    }

    pub fn final_v(&self) -> &[ActiveScalar<'t, f64>] {
        self.last.as_ref().map_or(&self.v0, |(_, v)| v)
    }

    /// Interior entries of `field`, in [`BurgersConfig::interior_nodes`] order.
    pub fn interior<'a>(&'a self, field: &'a [ActiveScalar<'t, f64>]) -> impl Iterator<Item = &'a ActiveScalar<'t, f64>> + 'a {
        self.cfg.interior_nodes().map(move |k| &field[k])
    }
}

/// Gradient of the objective with the tape statistics of the run.
#[derive(Debug, Clone)]
pub struct GradientRun {
    pub gradient: Vec<f64>,
    pub value: f64,
    pub memory: MemoryReport,
    pub times: Times,
}

/// Records the solver, seeds every final interior `u` with one and
/// reverses. Returns the gradient with respect to the initial interior `u`.
pub fn gradient(cfg: &BurgersConfig) -> Result<GradientRun, BurgersError> {
    let tape = Tape::<f64>::new();
    let start = Instant::now();
    tape.start_recording();
    let rec = Recording::record(&tape, cfg)?;
    tape.stop_recording();
    let record_s = start.elapsed().as_secs_f64();
    let memory = tape.memory_report();

    let start = Instant::now();
    let mut value = 0.0;
    for u in rec.interior(rec.final_u()) {
        value += u.value();
        u.set_gradient(1.0).expect("interior values are active");
    }
    tape.evaluate_reverse().expect("reverse sweep");
    let reverse_s = start.elapsed().as_secs_f64();
    let gradient = rec.interior(&rec.u0).map(|u| u.gradient()).collect();
    Ok(GradientRun { gradient, value, memory, times: Times { record_s, reverse_s } })
}

/// Compares `ad` with central differences of [`objective`] at up to
/// `samples` interior nodes drawn with `seed`.
pub fn check_gradient(cfg: &BurgersConfig, ad: &[f64], samples: usize, seed: u64, tolerance: f64) -> Result<GradCheck, BurgersError> {
    let (u0, _) = exact_field(cfg, 0.0)?;
    let x: Vec<f64> = cfg.interior_nodes().map(|k| u0[k]).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let picks = sample(&mut rng, x.len(), samples.min(x.len()));
    let mut fd = Vec::new();
    let mut sub = Vec::new();
    for i in picks.iter() {
        fd.push(dslad::fd::partial(|x| objective(cfg, x).expect("validated"), &x, i));
        sub.push(ad[i]);
    }
    let (max_rel_err, _) = dslad::fd::max_rel_err(&sub, &fd);
    Ok(GradCheck::new(max_rel_err, tolerance))
}
