//! Finite-difference simulation of the normalized clamped-free beam
//! `w_tt = -w_zzzz`, `w(0) = w_z(0) = 0`, `w_zz(1) = u(t)`, `w_zzz(1) = 0`.
//!
//! Unknowns are `w_1..w_N` (`w_0 = 0`). The clamped end uses the ghost value
//! `w_-1 = w_1`; the free end eliminates `w_N+1`, `w_N+2` with second-order
//! central differences of the moment and shear conditions. The closed
//! operator `A` is not symmetric, but `K = M A` is, with the trapezoid mass
//! `M = diag(1, ..., 1, 1/2)`; time stepping solves `M w'' + K w = M b(u)`
//! with the average-acceleration Newmark scheme.

use std::fmt::Write as _;

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::paramgen::SpatialPolynomial;

pub const DEFAULT_INTERVALS: usize = 100;
pub const MAX_SNAPSHOTS: usize = 500;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BeamGrid {
    intervals: usize,
}

impl BeamGrid {
    pub fn new(intervals: usize) -> Result<Self> {
        if intervals < 20 {
            return Err(Error::invalid(
                "N",
                format!("need at least 20 intervals, got {intervals}"),
            ));
        }
        Ok(Self { intervals })
    }

    pub fn intervals(&self) -> usize {
        self.intervals
    }

    pub fn dz(&self) -> f64 {
        1.0 / self.intervals as f64
    }

    /// `z_j = j / N`, `j = 0..=N`.
    pub fn nodes(&self) -> Vec<f64> {
        (0..=self.intervals)
            .map(|j| j as f64 / self.intervals as f64)
            .collect()
    }
}

/// Deflection and velocity at all `N + 1` nodes, node 0 included.
#[derive(Debug, Clone, PartialEq)]
pub struct SimState {
    pub w: Vec<f64>,
    pub wdot: Vec<f64>,
    pub t: f64,
}

impl SimState {
    pub fn at_rest(grid: &BeamGrid) -> Self {
        let n = grid.intervals() + 1;
        Self {
            w: vec![0.0; n],
            wdot: vec![0.0; n],
            t: 0.0,
        }
    }

    /// Static profile `w_j = p(z_j)` with zero velocity.
    pub fn from_profile(grid: &BeamGrid, profile: impl Fn(f64) -> f64, t: f64) -> Self {
        let w: Vec<f64> = grid.nodes().into_iter().map(profile).collect();
        Self {
            wdot: vec![0.0; w.len()],
            w,
            t,
        }
    }

    fn check(&self, grid: &BeamGrid) -> Result<()> {
        let n = grid.intervals() + 1;
        if self.w.len() != n || self.wdot.len() != n {
            return Err(Error::LengthMismatch {
                left: self.w.len().min(self.wdot.len()),
                right: n,
            });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub dt: f64,
    pub newmark_beta: f64,
    pub newmark_gamma: f64,
    pub snapshot_stride: usize,
}

impl SimConfig {
    pub fn new(dt: f64) -> Result<Self> {
        let cfg = Self {
            dt,
            newmark_beta: 0.25,
            newmark_gamma: 0.5,
            snapshot_stride: 1,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// Stride keeping at most [`MAX_SNAPSHOTS`] snapshots over `duration`.
    pub fn with_snapshot_limit(mut self, duration: f64) -> Self {
        let steps = (duration / self.dt).ceil().max(1.0) as usize;
        self.snapshot_stride = steps.div_ceil(MAX_SNAPSHOTS).max(1);
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::invalid(
                "dt",
                format!("must be positive, got {}", self.dt),
            ));
        }
        if !(self.newmark_beta > 0.0 && self.newmark_gamma > 0.0) {
            return Err(Error::invalid("newmark", "beta and gamma must be positive"));
        }
        if self.snapshot_stride == 0 {
            return Err(Error::invalid("snapshot_stride", "must be at least 1"));
        }
        Ok(())
    }
}

/// Dimensional beam `rho w_tt = -EI w_zzzz` on `[0, L]`, with the input
/// given as the curvature `w_zz(L, t)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BeamParams {
    pub mass_density: f64,
    pub flexural_rigidity: f64,
    pub length: f64,
}

impl BeamParams {
    pub fn normalized() -> Self {
        Self {
            mass_density: 1.0,
            flexural_rigidity: 1.0,
            length: 1.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        crate::paramgen::normalize_physical(self.mass_density, self.flexural_rigidity, self.length)
            .map(|_| ())
    }
}

/// `A` (interior unknowns `w_1..w_N`), the mass weights and `K = M A`.
#[derive(Debug, Clone)]
pub struct BeamOperator {
    grid: BeamGrid,
    params: BeamParams,
    a: DMatrix<f64>,
    mass: DVector<f64>,
    stiffness: DMatrix<f64>,
}

pub fn assemble_operator(grid: &BeamGrid) -> BeamOperator {
    assemble_physical_operator(grid, &BeamParams::normalized())
        .expect("normalized parameters are valid")
}

/// As [`assemble_operator`] with spacing `L / N` and `A` scaled by `EI / rho`.
pub fn assemble_physical_operator(grid: &BeamGrid, params: &BeamParams) -> Result<BeamOperator> {
    params.validate()?;
    let n = grid.intervals();
    let h = params.length / n as f64;
    let h4 = h.powi(4) * params.mass_density / params.flexural_rigidity;
    let mut a = DMatrix::<f64>::zeros(n, n);
    // row r <-> node r + 1
    let stencil = [1.0, -4.0, 6.0, -4.0, 1.0];
    for r in 0..n {
        let node = r + 1;
        let row: Vec<(usize, f64)> = if node == 1 {
            vec![(1, 7.0), (2, -4.0), (3, 1.0)]
        } else if node == n - 1 {
            vec![(n - 3, 1.0), (n - 2, -4.0), (n - 1, 5.0), (n, -2.0)]
        } else if node == n {
            vec![(n - 2, 2.0), (n - 1, -4.0), (n, 2.0)]
        } else {
            (0..5)
                .map(|s| (node + s - 2, stencil[s]))
                .filter(|&(j, _)| j >= 1)
                .collect()
        };
        for (j, v) in row {
            a[(r, j - 1)] = v / h4;
        }
    }
    let mut mass = DVector::<f64>::from_element(n, 1.0);
    mass[n - 1] = 0.5;
    let stiffness = DMatrix::from_fn(n, n, |i, j| mass[i] * a[(i, j)]);
    Ok(BeamOperator {
        grid: *grid,
        params: *params,
        a,
        mass,
        stiffness,
    })
}

impl BeamOperator {
    pub fn grid(&self) -> &BeamGrid {
        &self.grid
    }

    pub fn params(&self) -> &BeamParams {
        &self.params
    }

    pub fn spacing(&self) -> f64 {
        self.params.length / self.grid.intervals() as f64
    }

    /// `L z_j`.
    pub fn nodes(&self) -> Vec<f64> {
        self.grid
            .nodes()
            .into_iter()
            .map(|z| z * self.params.length)
            .collect()
    }

    /// `w_zz(0) ~ 2 w_1 / h^2`.
    pub fn clamped_moment(&self, state: &SimState) -> f64 {
        2.0 * state.w[1] / self.spacing().powi(2)
    }

    /// The closed fourth-difference operator acting on `w_1..w_N`.
    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.a
    }

    /// Symmetric `K = M A`.
    pub fn stiffness(&self) -> &DMatrix<f64> {
        &self.stiffness
    }

    pub fn mass(&self) -> &DVector<f64> {
        &self.mass
    }

    /// Load `b(u)` with `w'' = -A w + b(u)`.
    pub fn load(&self, u: f64) -> DVector<f64> {
        let n = self.grid.intervals();
        let h2 = self.spacing().powi(2) * self.params.mass_density / self.params.flexural_rigidity;
        let mut b = DVector::zeros(n);
        b[n - 2] = -u / h2;
        b[n - 1] = 2.0 * u / h2;
        b
    }

    /// `-A w + b(u)` for a full nodal vector (node 0 ignored).
    pub fn acceleration(&self, w: &[f64], u: f64) -> DVector<f64> {
        let interior = DVector::from_column_slice(&w[1..]);
        self.load(u) - &self.a * interior
    }

    /// Static deflection under a constant moment, `A w = b(u)`.
    pub fn equilibrium(&self, u: f64) -> Result<Vec<f64>> {
        let chol = Cholesky::new(self.stiffness.clone())
            .ok_or_else(|| Error::Solve("stiffness matrix is not positive definite".into()))?;
        let rhs = self.load(u).component_mul(&self.mass);
        let sol = chol.solve(&rhs);
        let mut w = Vec::with_capacity(sol.len() + 1);
        w.push(0.0);
        w.extend(sol.iter());
        Ok(w)
    }

    /// Eigenvalues of `A`, ascending, via the symmetric pencil
    /// `M^(-1/2) K M^(-1/2)`.
    pub fn eigenvalues(&self) -> Vec<f64> {
        let s = self.mass.map(|m| 1.0 / m.sqrt());
        let sym = DMatrix::from_fn(self.a.nrows(), self.a.ncols(), |i, j| {
            s[i] * self.stiffness[(i, j)] * s[j]
        });
        let mut ev: Vec<f64> = sym.symmetric_eigenvalues().iter().copied().collect();
        ev.sort_by(f64::total_cmp);
        ev
    }

    /// `1/2 v^T M v + 1/2 w^T K w`.
    pub fn energy(&self, state: &SimState) -> f64 {
        let w = DVector::from_column_slice(&state.w[1..]);
        let v = DVector::from_column_slice(&state.wdot[1..]);
        let kinetic = v.component_mul(&self.mass).dot(&v);
        let potential = w.dot(&(&self.stiffness * &w));
        0.5 * (kinetic + potential)
    }
}

/// Newmark integrator with its effective matrix factored once.
#[derive(Debug, Clone)]
pub struct NewmarkStepper {
    op: BeamOperator,
    cfg: SimConfig,
    effective: Cholesky<f64, Dyn>,
}

impl NewmarkStepper {
    pub fn new(op: BeamOperator, cfg: SimConfig) -> Result<Self> {
        cfg.validate()?;
        let c0 = 1.0 / (cfg.newmark_beta * cfg.dt * cfg.dt);
        let mut k_eff = op.stiffness.clone();
        for i in 0..k_eff.nrows() {
            k_eff[(i, i)] += c0 * op.mass[i];
        }
        let effective = Cholesky::new(k_eff)
            .ok_or_else(|| Error::Solve("effective Newmark matrix is singular".into()))?;
        Ok(Self { op, cfg, effective })
    }

    pub fn operator(&self) -> &BeamOperator {
        &self.op
    }

    pub fn config(&self) -> &SimConfig {
        &self.cfg
    }

    /// One step from `state` (acceleration `accel`) to `t + dt` with input
    /// `u_next`. Returns the new state and its acceleration.
    pub fn step(
        &self,
        state: &SimState,
        accel: &DVector<f64>,
        u_next: f64,
    ) -> Result<(SimState, DVector<f64>)> {
        state.check(&self.op.grid)?;
        let SimConfig {
            dt,
            newmark_beta: beta,
            newmark_gamma: gamma,
            ..
        } = self.cfg;
        let w = DVector::from_column_slice(&state.w[1..]);
        let v = DVector::from_column_slice(&state.wdot[1..]);
        let c0 = 1.0 / (beta * dt * dt);
        let c1 = 1.0 / (beta * dt);
        let c2 = 1.0 / (2.0 * beta) - 1.0;
        let predictor = &w * c0 + &v * c1 + accel * c2;
        let rhs = (self.op.load(u_next) + predictor).component_mul(&self.op.mass);
        let w_next = self.effective.solve(&rhs);
        if w_next.iter().any(|x| !x.is_finite()) {
            return Err(Error::Solve(format!(
                "non-finite deflection at t = {}",
                state.t + dt
            )));
        }
        let a_next = (&w_next - &w) * c0 - &v * c1 - accel * c2;
        let v_next = &v + (accel * (1.0 - gamma) + &a_next * gamma) * dt;
        let mut next = SimState {
            w: Vec::with_capacity(state.w.len()),
            wdot: Vec::with_capacity(state.w.len()),
            t: state.t + dt,
        };
        next.w.push(0.0);
        next.w.extend(w_next.iter());
        next.wdot.push(0.0);
        next.wdot.extend(v_next.iter());
        Ok((next, a_next))
    }
}

/// Single step from rest-consistent data: the acceleration at `state` is
/// recomputed from `u_now`.
pub fn step_newmark(
    state: &SimState,
    u_now: f64,
    u_next: f64,
    cfg: &SimConfig,
    op: &BeamOperator,
) -> Result<SimState> {
    state.check(op.grid())?;
    let stepper = NewmarkStepper::new(op.clone(), *cfg)?;
    let accel = op.acceleration(&state.w, u_now);
    Ok(stepper.step(state, &accel, u_next)?.0)
}

/// `w_zz(0) ~ 2 w_1 / dz^2`, using `w_0 = 0` and `w_-1 = w_1`.
pub fn clamped_moment(state: &SimState, grid: &BeamGrid) -> f64 {
    2.0 * state.w[1] / grid.dz().powi(2)
}

/// Piecewise-linear input signal; constant beyond the first/last sample.
#[derive(Debug, Clone, PartialEq)]
pub struct InputSignal {
    times: Vec<f64>,
    values: Vec<f64>,
}

impl InputSignal {
    pub fn new(times: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if times.len() != values.len() {
            return Err(Error::LengthMismatch {
                left: times.len(),
                right: values.len(),
            });
        }
        if times.is_empty() {
            return Err(Error::invalid("u", "input signal has no samples"));
        }
        if times
            .windows(2)
            .any(|w| w[1].partial_cmp(&w[0]) != Some(std::cmp::Ordering::Greater))
        {
            return Err(Error::invalid(
                "u",
                "sample times must be strictly increasing",
            ));
        }
        if times.iter().chain(&values).any(|x| !x.is_finite()) {
            return Err(Error::invalid("u", "samples must be finite"));
        }
        Ok(Self { times, values })
    }

    pub fn constant(value: f64, until: f64) -> Self {
        Self {
            times: vec![0.0, until.max(f64::MIN_POSITIVE)],
            values: vec![value, value],
        }
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn start(&self) -> f64 {
        self.times[0]
    }

    pub fn end(&self) -> f64 {
        *self.times.last().unwrap()
    }

    pub fn at(&self, t: f64) -> f64 {
        let ts = &self.times;
        if t <= ts[0] {
            return self.values[0];
        }
        if t >= self.end() {
            return *self.values.last().unwrap();
        }
        let j = ts.partition_point(|&x| x <= t);
        let (t0, t1) = (ts[j - 1], ts[j]);
        let s = (t - t0) / (t1 - t0);
        self.values[j - 1] + s * (self.values[j] - self.values[j - 1])
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimOutput {
    pub grid: BeamGrid,
    /// Node positions `z_j` (scaled by `L` for dimensional runs).
    pub nodes: Vec<f64>,
    /// Every step, starting with the initial time.
    pub times: Vec<f64>,
    pub clamped_moment: Vec<f64>,
    pub input_echo: Vec<f64>,
    /// Decimated `(t, w)`; always contains the first and last step.
    pub snapshots: Vec<(f64, Vec<f64>)>,
    pub final_state: SimState,
}

impl SimOutput {
    /// Snapshot whose time is closest to `t`.
    pub fn snapshot_near(&self, t: f64) -> &(f64, Vec<f64>) {
        self.snapshots
            .iter()
            .min_by(|a, b| (a.0 - t).abs().total_cmp(&(b.0 - t).abs()))
            .expect("at least one snapshot")
    }

    /// First row `z` nodes (after an empty corner cell), then `t, w...`.
    pub fn snapshots_csv(&self, digits: usize) -> String {
        let mut out = String::from("t\\z");
        for &z in &self.nodes {
            let _ = write!(out, ",{}", crate::format_f64(z, digits));
        }
        out.push('\n');
        for (t, w) in &self.snapshots {
            out.push_str(&crate::format_f64(*t, digits));
            for x in w {
                let _ = write!(out, ",{}", crate::format_f64(*x, digits));
            }
            out.push('\n');
        }
        out
    }

    /// `t,y_sim,y_ref` with `y_ref` given per step.
    pub fn moment_csv(&self, y_ref: &[f64], digits: usize) -> Result<String> {
        if y_ref.len() != self.times.len() {
            return Err(Error::LengthMismatch {
                left: y_ref.len(),
                right: self.times.len(),
            });
        }
        let mut out = String::from("t,y_sim,y_ref\n");
        for ((t, y), r) in self.times.iter().zip(&self.clamped_moment).zip(y_ref) {
            let _ = writeln!(
                out,
                "{},{},{}",
                crate::format_f64(*t, digits),
                crate::format_f64(*y, digits),
                crate::format_f64(*r, digits)
            );
        }
        Ok(out)
    }
}

/// Runs from `initial.t` to the end of the input signal.
pub fn simulate(
    u: &InputSignal,
    grid: &BeamGrid,
    cfg: &SimConfig,
    initial: &SimState,
) -> Result<SimOutput> {
    simulate_with(assemble_operator(grid), u, cfg, initial)
}

/// [`simulate`] with a prebuilt (possibly dimensional) operator.
pub fn simulate_with(
    op: BeamOperator,
    u: &InputSignal,
    cfg: &SimConfig,
    initial: &SimState,
) -> Result<SimOutput> {
    cfg.validate()?;
    let grid = *op.grid();
    initial.check(&grid)?;
    let nodes = op.nodes();
    let stepper = NewmarkStepper::new(op, *cfg)?;
    let t0 = initial.t;
    let steps = ((u.end() - t0) / cfg.dt).round().max(0.0) as usize;
    let mut state = initial.clone();
    let mut u_now = u.at(t0);
    let mut accel = stepper.operator().acceleration(&state.w, u_now);
    let mut out = SimOutput {
        grid,
        nodes,
        times: Vec::with_capacity(steps + 1),
        clamped_moment: Vec::with_capacity(steps + 1),
        input_echo: Vec::with_capacity(steps + 1),
        snapshots: vec![(t0, state.w.clone())],
        final_state: state.clone(),
    };
    out.times.push(t0);
    out.clamped_moment
        .push(stepper.operator().clamped_moment(&state));
    out.input_echo.push(u_now);
    for n in 1..=steps {
        let t = t0 + n as f64 * cfg.dt;
        u_now = u.at(t);
        let (next, a_next) = stepper.step(&state, &accel, u_now)?;
        state = next;
        state.t = t;
        accel = a_next;
        out.times.push(t);
        out.clamped_moment
            .push(stepper.operator().clamped_moment(&state));
        out.input_echo.push(u_now);
        if n % cfg.snapshot_stride == 0 || n == steps {
            out.snapshots.push((t, state.w.clone()));
        }
    }
    out.final_state = state;
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TransitionMetrics {
    pub final_profile_error_inf: f64,
    pub moment_tracking_error_inf: f64,
}

/// Sup-norm distance of `w(., T)` from `target` and of the clamped moment
/// from `y_ref` (one value per output step) on `[start, T]`.
pub fn transition_error(
    output: &SimOutput,
    target: &SpatialPolynomial,
    duration: f64,
    y_ref: &[f64],
) -> Result<TransitionMetrics> {
    if y_ref.len() != output.times.len() {
        return Err(Error::LengthMismatch {
            left: y_ref.len(),
            right: output.times.len(),
        });
    }
    let last = *output.times.last().unwrap();
    let dt = if output.times.len() > 1 {
        output.times[1] - output.times[0]
    } else {
        0.0
    };
    if last + 0.5 * dt < duration {
        return Err(Error::invalid(
            "T",
            format!("simulation ends at {last}, before T = {duration}"),
        ));
    }
    let (_, w) = output.snapshot_near(duration);
    let final_profile_error_inf = output
        .nodes
        .iter()
        .zip(w)
        .map(|(&z, &wz)| (wz - target.eval_float(&rug::Float::with_val(128, z)).to_f64()).abs())
        .fold(0.0, f64::max);
    let moment_tracking_error_inf = output
        .times
        .iter()
        .zip(&output.clamped_moment)
        .zip(y_ref)
        .filter(|((t, _), _)| **t <= duration + 0.5 * dt)
        .map(|((_, y), r)| (y - r).abs())
        .fold(0.0, f64::max);
    Ok(TransitionMetrics {
        final_profile_error_inf,
        moment_tracking_error_inf,
    })
}
