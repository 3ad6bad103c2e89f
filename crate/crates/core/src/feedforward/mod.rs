//! Evaluation of the series `u(t) = sum_k beta_2k y^(2k)(t)` and
//! `w(z, t) = sum_k alpha_2k(z) y^(2k)(t)` on a time grid.
//!
//! The flat parametrization converges for the `Phi_sigma` trajectories with
//! `sigma > 1` and is simply truncated. The bending-moment parametrization
//! diverges for every non-analytic `y` and is summed up to its smallest term.

use std::fmt::Write as _;

use rug::{Float, Rational};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gevrey::{GevreyTrajectory, PrecisionContext, TrajectorySpec};
use crate::paramgen::{
    alpha_polynomial, bending_moment_choice, build_parametrization, flat_choice, CoefficientTable,
};

pub const DEFAULT_K_MAX: usize = 40;
pub const DEFAULT_EPS_TAIL: f64 = 1e-30;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SummationMode {
    /// Stop at the first `k >= 1` with `|term_k| <= eps_tail * |partial sum|`.
    TailEpsilon,
    /// Stop at the smallest `n > 1` with `|term_(n+1)| > |term_n|`.
    LeastTerm,
    /// Always sum `k = 0..=K_max`.
    FixedK,
}

impl SummationMode {
    pub fn name(self) -> &'static str {
        match self {
            SummationMode::TailEpsilon => "tail_epsilon",
            SummationMode::LeastTerm => "least_term",
            SummationMode::FixedK => "fixed_K",
        }
    }
}

impl std::str::FromStr for SummationMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "tail_epsilon" => Ok(SummationMode::TailEpsilon),
            "least_term" => Ok(SummationMode::LeastTerm),
            "fixed_K" | "fixed_k" => Ok(SummationMode::FixedK),
            other => Err(Error::invalid(
                "mode",
                format!("expected tail_epsilon, least_term or fixed_K, got {other:?}"),
            )),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SummationPolicy {
    pub mode: SummationMode,
    pub k_max: usize,
    pub eps_tail: f64,
}

impl SummationPolicy {
    pub fn new(mode: SummationMode, k_max: usize, eps_tail: f64) -> Result<Self> {
        let policy = Self {
            mode,
            k_max,
            eps_tail,
        };
        policy.validate()?;
        Ok(policy)
    }

    pub fn fixed(k_max: usize) -> Result<Self> {
        Self::new(SummationMode::FixedK, k_max, DEFAULT_EPS_TAIL)
    }

    pub fn least_term(k_max: usize) -> Result<Self> {
        Self::new(SummationMode::LeastTerm, k_max, DEFAULT_EPS_TAIL)
    }

    pub fn tail_epsilon(k_max: usize, eps_tail: f64) -> Result<Self> {
        Self::new(SummationMode::TailEpsilon, k_max, eps_tail)
    }

    pub fn validate(&self) -> Result<()> {
        if self.k_max < 2 {
            return Err(Error::invalid(
                "K_max",
                format!("must be at least 2, got {}", self.k_max),
            ));
        }
        if !(self.eps_tail > 0.0 && self.eps_tail.is_finite()) {
            return Err(Error::invalid(
                "eps_tail",
                format!("must be positive, got {}", self.eps_tail),
            ));
        }
        Ok(())
    }
}

impl Default for SummationPolicy {
    fn default() -> Self {
        Self {
            mode: SummationMode::TailEpsilon,
            k_max: DEFAULT_K_MAX,
            eps_tail: DEFAULT_EPS_TAIL,
        }
    }
}

/// Series values on a time grid together with the truncation actually used.
#[derive(Debug, Clone, PartialEq)]
pub struct FeedforwardResult {
    pub times: Vec<f64>,
    pub u_values: Vec<Float>,
    /// Index of the last term included in the sum.
    pub n_t: Vec<usize>,
    /// `|term_k|`, `k = 0..=K_max`, per time. Only `k = 0` at times outside
    /// the transition window, where every higher term vanishes.
    pub term_log: Vec<Vec<Float>>,
    /// The stopping rule never fired and the sum ran to `K_max`.
    pub saturated: Vec<bool>,
}

impl FeedforwardResult {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn values_f64(&self) -> Vec<f64> {
        self.u_values.iter().map(Float::to_f64).collect()
    }

    /// `t,u,n_t`.
    pub fn to_csv(&self, digits: usize) -> String {
        let mut out = String::from("t,u,n_t\n");
        for ((t, u), n) in self.times.iter().zip(&self.u_values).zip(&self.n_t) {
            let _ = writeln!(
                out,
                "{},{},{n}",
                crate::format_f64(*t, digits),
                crate::format_f64(u.to_f64(), digits)
            );
        }
        out
    }

    /// `t,k,magnitude`.
    pub fn term_log_csv(&self, digits: usize) -> String {
        let mut out = String::from("t,k,magnitude\n");
        for (t, terms) in self.times.iter().zip(&self.term_log) {
            for (k, m) in terms.iter().enumerate() {
                let _ = writeln!(
                    out,
                    "{},{k},{}",
                    crate::format_f64(*t, digits),
                    format_float(m, digits)
                );
            }
        }
        out
    }
}

/// Like [`crate::format_f64`], but keeps magnitudes outside the `f64` range.
pub fn format_float(x: &Float, digits: usize) -> String {
    if x.is_zero() {
        return "0".to_string();
    }
    let v = x.to_f64();
    if v.is_finite() && v != 0.0 && v.abs() >= f64::MIN_POSITIVE {
        return crate::format_f64(v, digits);
    }
    let s = x.to_string_radix(10, Some(digits.max(1)));
    s.replace('@', "")
}

/// Where the stopping rule landed for one time instant.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Truncation {
    pub n_t: usize,
    pub saturated: bool,
}

/// Applies the policy to precomputed terms `term_0..=term_K`.
pub fn truncate(terms: &[Float], policy: &SummationPolicy) -> Truncation {
    let k_max = policy.k_max.min(terms.len().saturating_sub(1));
    match policy.mode {
        SummationMode::FixedK => Truncation {
            n_t: k_max,
            saturated: false,
        },
        SummationMode::LeastTerm => {
            for n in 2..k_max {
                if terms[n + 1].cmp_abs(&terms[n]) == Some(std::cmp::Ordering::Greater) {
                    return Truncation {
                        n_t: n,
                        saturated: false,
                    };
                }
            }
            Truncation {
                n_t: k_max,
                saturated: true,
            }
        }
        SummationMode::TailEpsilon => {
            let prec = terms[0].prec();
            let mut partial = terms[0].clone();
            for (k, term) in terms.iter().enumerate().take(k_max + 1).skip(1) {
                partial += term;
                let bound = Float::with_val(prec, partial.abs_ref()) * policy.eps_tail;
                if Float::with_val(prec, term.abs_ref()) <= bound {
                    return Truncation {
                        n_t: k,
                        saturated: false,
                    };
                }
            }
            Truncation {
                n_t: k_max,
                saturated: true,
            }
        }
    }
}

/// Sums `coeffs[k] * y^(2k)(t)` over `grid` according to `policy`.
/// `coeffs` must hold at least `K_max + 1` entries.
pub fn eval_series(
    coeffs: &[Float],
    traj: &GevreyTrajectory,
    grid: &[f64],
    policy: &SummationPolicy,
) -> Result<FeedforwardResult> {
    let mut out = eval_series_many(&[coeffs], traj, grid, policy)?;
    Ok(out.remove(0))
}

/// [`eval_series`] for several coefficient sequences sharing one pass over
/// the trajectory derivatives; each series is truncated on its own terms.
pub fn eval_series_many(
    coeff_sets: &[&[Float]],
    traj: &GevreyTrajectory,
    grid: &[f64],
    policy: &SummationPolicy,
) -> Result<Vec<FeedforwardResult>> {
    policy.validate()?;
    for coeffs in coeff_sets {
        if coeffs.len() < policy.k_max + 1 {
            return Err(Error::LengthMismatch {
                left: coeffs.len(),
                right: policy.k_max + 1,
            });
        }
    }
    if let Some(t) = grid.iter().find(|t| !t.is_finite()) {
        return Err(Error::invalid("t", format!("grid contains {t}")));
    }
    let prec = traj.context().bits();
    let spec = *traj.spec();
    let mut results: Vec<FeedforwardResult> = coeff_sets
        .iter()
        .map(|_| FeedforwardResult {
            times: grid.to_vec(),
            u_values: Vec::with_capacity(grid.len()),
            n_t: Vec::with_capacity(grid.len()),
            term_log: Vec::with_capacity(grid.len()),
            saturated: Vec::with_capacity(grid.len()),
        })
        .collect();
    let sampled = traj.sample(grid, 2 * policy.k_max);
    for (&t, all_derivs) in grid.iter().zip(sampled) {
        let derivs: Vec<Float> = all_derivs.into_iter().step_by(2).collect();
        for (coeffs, result) in coeff_sets.iter().zip(results.iter_mut()) {
            if t <= 0.0 || t >= spec.duration {
                // equilibrium: only the k = 0 term survives
                let y = if t <= 0.0 { spec.y_start } else { spec.y_end };
                let u = Float::with_val(prec, &coeffs[0] * y);
                let n_t = match policy.mode {
                    SummationMode::LeastTerm => 2,
                    SummationMode::FixedK => policy.k_max,
                    SummationMode::TailEpsilon => 0,
                };
                result
                    .term_log
                    .push(vec![Float::with_val(prec, u.abs_ref())]);
                result.u_values.push(u);
                result.n_t.push(n_t);
                result.saturated.push(false);
                continue;
            }
            let terms: Vec<Float> = coeffs
                .iter()
                .zip(&derivs)
                .map(|(c, y)| Float::with_val(prec, c * y))
                .collect();
            let cut = truncate(&terms, policy);
            let mut u = Float::with_val(prec, 0);
            for term in &terms[..=cut.n_t] {
                u += term;
            }
            result.term_log.push(
                terms
                    .iter()
                    .map(|x| Float::with_val(prec, x.abs_ref()))
                    .collect(),
            );
            result.u_values.push(u);
            result.n_t.push(cut.n_t);
            result.saturated.push(cut.saturated);
        }
    }
    Ok(results)
}

fn to_floats(values: &[Rational], prec: u32) -> Vec<Float> {
    values.iter().map(|r| Float::with_val(prec, r)).collect()
}

fn check_order(table: &CoefficientTable, policy: &SummationPolicy) -> Result<()> {
    if table.order() < policy.k_max {
        return Err(Error::invalid(
            "K_max",
            format!(
                "table has order {} but the policy needs {}",
                table.order(),
                policy.k_max
            ),
        ));
    }
    Ok(())
}

/// `beta_2k`, `k = 0..=K`, in working precision.
pub fn input_coefficients(table: &CoefficientTable, ctx: &PrecisionContext) -> Vec<Float> {
    to_floats(table.beta2().entries(), ctx.bits())
}

/// `d^j alpha_2k / dz^j` at `z`, `k = 0..=K`.
pub fn deflection_coefficients(
    table: &CoefficientTable,
    z: f64,
    z_order: u32,
    ctx: &PrecisionContext,
) -> Result<Vec<Float>> {
    if !(0.0..=1.0).contains(&z) {
        return Err(Error::invalid("z", format!("must lie in [0, 1], got {z}")));
    }
    let zf = ctx.float(z);
    (0..=table.order())
        .map(|k| {
            let p = alpha_polynomial(table, k)?.nth_derivative(z_order);
            Ok(p.eval_float(&zf))
        })
        .collect()
}

/// `u(t)` for an arbitrary coefficient table.
pub fn eval_u(
    table: &CoefficientTable,
    spec: &TrajectorySpec,
    grid: &[f64],
    policy: &SummationPolicy,
    ctx: &PrecisionContext,
) -> Result<FeedforwardResult> {
    check_order(table, policy)?;
    let traj = GevreyTrajectory::new(*spec, *ctx)?;
    eval_series(&input_coefficients(table, ctx), &traj, grid, policy)
}

/// `d^j w / dz^j (z, t)` for an arbitrary coefficient table; `z_order = 0`
/// gives the deflection itself.
pub fn eval_w(
    table: &CoefficientTable,
    spec: &TrajectorySpec,
    z: f64,
    z_order: u32,
    grid: &[f64],
    policy: &SummationPolicy,
    ctx: &PrecisionContext,
) -> Result<FeedforwardResult> {
    check_order(table, policy)?;
    let coeffs = deflection_coefficients(table, z, z_order, ctx)?;
    let traj = GevreyTrajectory::new(*spec, *ctx)?;
    eval_series(&coeffs, &traj, grid, policy)
}

fn flat_table(c00: f64, order: usize) -> Result<CoefficientTable> {
    let c00 = Rational::from_f64(c00)
        .ok_or_else(|| Error::invalid("c00", format!("must be finite, got {c00}")))?;
    Ok(build_parametrization(&flat_choice(&c00, order)))
}

/// Input of the flat parametrization `c[k][0] = (-1)^k c00 / (4k)!`.
pub fn eval_u_flat(
    c00: f64,
    spec: &TrajectorySpec,
    grid: &[f64],
    policy: &SummationPolicy,
    ctx: &PrecisionContext,
) -> Result<FeedforwardResult> {
    policy.validate()?;
    eval_u(&flat_table(c00, policy.k_max)?, spec, grid, policy, ctx)
}

/// Deflection at `z` of the flat parametrization.
pub fn eval_w_flat(
    c00: f64,
    spec: &TrajectorySpec,
    z: f64,
    grid: &[f64],
    policy: &SummationPolicy,
    ctx: &PrecisionContext,
) -> Result<FeedforwardResult> {
    policy.validate()?;
    eval_w(
        &flat_table(c00, policy.k_max)?,
        spec,
        z,
        0,
        grid,
        policy,
        ctx,
    )
}

/// Input of the bending-moment parametrization, summed to its least term.
pub fn eval_u_least_term(
    spec: &TrajectorySpec,
    grid: &[f64],
    k_max: usize,
    ctx: &PrecisionContext,
) -> Result<FeedforwardResult> {
    if k_max < 3 {
        return Err(Error::invalid(
            "K_max",
            format!("least-term summation needs K_max >= 3, got {k_max}"),
        ));
    }
    let table = build_parametrization(&bending_moment_choice(k_max));
    eval_u(
        &table,
        spec,
        grid,
        &SummationPolicy::least_term(k_max)?,
        ctx,
    )
}

/// Deflection at `z` for a bending-moment table; least-term summation, if
/// selected, looks at the full `alpha_2k(z) y^(2k)` magnitudes.
pub fn eval_w_bending(
    table: &CoefficientTable,
    spec: &TrajectorySpec,
    z: f64,
    grid: &[f64],
    policy: &SummationPolicy,
    ctx: &PrecisionContext,
) -> Result<FeedforwardResult> {
    eval_w(table, spec, z, 0, grid, policy, ctx)
}

/// Term magnitudes of the bending-moment input series at one time.
#[derive(Debug, Clone)]
pub struct DivergenceReport {
    pub t: f64,
    pub magnitudes: Vec<Float>,
    /// Least-term index: smallest `n > 1` with `|term_(n+1)| > |term_n|`.
    pub growth_index: Option<usize>,
    /// Smallest `k` from which the magnitudes strictly increase up to `K`.
    pub increasing_from: Option<usize>,
}

impl DivergenceReport {
    /// Some decrease, then strict increase through the last computed term.
    pub fn decreases_then_increases(&self) -> bool {
        let Some(start) = self.increasing_from else {
            return false;
        };
        start >= 1
            && self.magnitudes[..=start]
                .windows(2)
                .any(|w| w[1].cmp_abs(&w[0]) == Some(std::cmp::Ordering::Less))
    }

    /// `k,magnitude,marker` with `growth` on the least-term index.
    pub fn to_csv(&self, digits: usize) -> String {
        let mut out = String::from("k,magnitude,marker\n");
        for (k, m) in self.magnitudes.iter().enumerate() {
            let marker = if Some(k) == self.growth_index {
                "growth"
            } else {
                ""
            };
            let _ = writeln!(out, "{k},{},{marker}", format_float(m, digits));
        }
        out
    }
}

/// `|mu_k / 2 * y^(2k)(t)|` for `k = 0..=K`.
pub fn divergence_report(
    spec: &TrajectorySpec,
    t: f64,
    depth: usize,
    ctx: &PrecisionContext,
) -> Result<DivergenceReport> {
    if depth < 5 {
        return Err(Error::invalid(
            "K",
            format!("needs at least 5 terms, got {depth}"),
        ));
    }
    let traj = GevreyTrajectory::new(*spec, *ctx)?;
    let table = build_parametrization(&bending_moment_choice(depth));
    let coeffs = input_coefficients(&table, ctx);
    let prec = ctx.bits();
    let derivs = traj.even_derivatives(t, depth);
    let magnitudes: Vec<Float> = coeffs
        .iter()
        .zip(&derivs)
        .map(|(c, y)| Float::with_val(prec, c * y).abs())
        .collect();
    let growth_index = (2..depth).find(|&n| magnitudes[n + 1] > magnitudes[n]);
    let mut start = depth;
    while start > 0 && magnitudes[start] > magnitudes[start - 1] {
        start -= 1;
    }
    let increasing_from = (start < depth).then_some(start);
    Ok(DivergenceReport {
        t,
        magnitudes,
        growth_index,
        increasing_from,
    })
}

/// `n + 1` equally spaced samples of `[t0, t1]`, endpoints exact.
pub fn uniform_grid(t0: f64, t1: f64, n: usize) -> Vec<f64> {
    if n == 0 {
        return vec![t0];
    }
    (0..=n)
        .map(|i| {
            if i == n {
                t1
            } else {
                t0 + (t1 - t0) * i as f64 / n as f64
            }
        })
        .collect()
}

/// Grid of spacing close to `step` covering `[0, T]`.
pub fn time_grid(duration: f64, step: f64) -> Result<Vec<f64>> {
    if !(step > 0.0 && step.is_finite()) {
        return Err(Error::invalid(
            "dt",
            format!("must be positive, got {step}"),
        ));
    }
    if !(duration > 0.0 && duration.is_finite()) {
        return Err(Error::invalid(
            "T",
            format!("must be positive, got {duration}"),
        ));
    }
    let n = (duration / step).round().max(1.0) as usize;
    Ok(uniform_grid(0.0, duration, n))
}

#[cfg(test)]
mod tests;
