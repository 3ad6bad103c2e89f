//! Gevrey-class transition trajectory `y(t) = y0 + (y1 - y0) Phi_sigma(t/T)`.
//!
//! `Phi_sigma` is the normalized integral of the bump
//! `phi_sigma(t) = exp(-1 / (t (1 - t))^sigma)`. Derivatives of any order
//! are obtained by propagating truncated Taylor jets through
//! `t (1 - t) -> (.)^(-sigma) -> exp(-.)`; the zeroth derivative needs the
//! integral, done by tanh-sinh quadrature.

mod jet;
mod quadrature;

use std::fmt::Write as _;

use rug::Float;
use serde::{Deserialize, Serialize};

pub use jet::{jet_arith, Jet, JetOp};
pub use quadrature::TanhSinh;

use crate::error::{Error, Result};

pub const DEFAULT_MANTISSA_BITS: u32 = 512;

/// Working precision of every big-float computation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PrecisionContext {
    mantissa_bits: u32,
}

impl PrecisionContext {
    pub fn new(mantissa_bits: u32) -> Result<Self> {
        if mantissa_bits < 64 {
            return Err(Error::invalid(
                "mantissa_bits",
                format!("must be at least 64, got {mantissa_bits}"),
            ));
        }
        Ok(Self { mantissa_bits })
    }

    /// Smallest precision holding `digits` significant decimal digits.
    pub fn for_decimal_digits(digits: u32) -> Result<Self> {
        Self::new(((digits as f64) * std::f64::consts::LOG2_10).ceil() as u32)
    }

    pub fn bits(&self) -> u32 {
        self.mantissa_bits
    }

    pub fn float(&self, x: f64) -> Float {
        Float::with_val(self.mantissa_bits, x)
    }

    /// Relative tolerance used by the quadrature at this precision.
    pub(crate) fn quadrature_tolerance_bits(&self) -> u32 {
        (self.mantissa_bits - 24).min(170)
    }
}

impl Default for PrecisionContext {
    fn default() -> Self {
        Self {
            mantissa_bits: DEFAULT_MANTISSA_BITS,
        }
    }
}

/// Transition from `y_start` (for `t <= 0`) to `y_end` (for `t >= T`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrajectorySpec {
    pub duration: f64,
    pub sigma: f64,
    pub y_start: f64,
    pub y_end: f64,
}

impl TrajectorySpec {
    pub fn new(duration: f64, sigma: f64, y_start: f64, y_end: f64) -> Result<Self> {
        let spec = Self {
            duration,
            sigma,
            y_start,
            y_end,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.duration > 0.0 && self.duration.is_finite()) {
            return Err(Error::invalid(
                "T",
                format!("transition time must be positive, got {}", self.duration),
            ));
        }
        if !(self.sigma > 0.0 && self.sigma.is_finite()) {
            return Err(Error::invalid(
                "sigma",
                format!("must be positive, got {}", self.sigma),
            ));
        }
        if !self.y_start.is_finite() || !self.y_end.is_finite() {
            return Err(Error::invalid("y", "endpoint values must be finite"));
        }
        Ok(())
    }

    /// `1 + 1/sigma`.
    pub fn gevrey_order(&self) -> f64 {
        1.0 + 1.0 / self.sigma
    }
}

fn bump_exponent_base(tau: &Float) -> Float {
    let prec = tau.prec();
    let one_minus = Float::with_val(prec, 1 - tau);
    Float::with_val(prec, tau * one_minus)
}

/// `phi_sigma(tau)` for `tau` strictly inside `(0, 1)`, zero elsewhere.
pub fn phi_value(tau: &Float, sigma: &Float) -> Float {
    let prec = tau.prec();
    if *tau <= 0 || *tau >= 1 {
        return Float::with_val(prec, 0);
    }
    let base = bump_exponent_base(tau);
    let power = Float::with_val(prec, -(base.ln() * sigma)).exp();
    (-power).exp()
}

/// Taylor jet of `phi_sigma` at `tau0`. At (and beyond) the endpoints all
/// one-sided derivatives vanish, so the zero jet is returned without
/// touching the power recurrence.
pub fn phi_jet(tau0: f64, sigma: f64, order: usize, ctx: &PrecisionContext) -> Jet {
    phi_jet_at(&ctx.float(tau0), &ctx.float(sigma), order)
}

pub(crate) fn phi_jet_at(tau0: &Float, sigma: &Float, order: usize) -> Jet {
    let prec = tau0.prec();
    if *tau0 <= 0 || *tau0 >= 1 {
        return Jet::zero(tau0.clone(), order);
    }
    // h(t) = t (1 - t) = h0 + (1 - 2 t0) s - s^2
    let mut h = vec![Float::with_val(prec, 0); order + 1];
    h[0] = bump_exponent_base(tau0);
    if order >= 1 {
        h[1] = Float::with_val(prec, 1 - Float::with_val(prec, tau0 * 2u32));
    }
    if order >= 2 {
        h[2] = Float::with_val(prec, -1);
    }
    let h = Jet::new(tau0.clone(), h).expect("finite coefficients");
    let neg_sigma = Float::with_val(prec, -sigma);
    let g = h.real_power(&neg_sigma).expect("h0 > 0 inside (0, 1)");
    let minus_one = Float::with_val(prec, -1);
    g.scale(&minus_one).exp()
}

/// `C_sigma = int_0^1 phi_sigma`, by tanh-sinh quadrature on `[0, 1/2]`
/// and symmetry.
pub fn normalization_constant(sigma: f64, ctx: &PrecisionContext) -> Float {
    let rule = TanhSinh::new(ctx);
    let sigma = ctx.float(sigma);
    let half = ctx.float(0.5);
    let integral = rule.integrate_from_zero(&half, |x| phi_value(x, &sigma));
    integral * 2u32
}

/// A [`TrajectorySpec`] with its normalization constant and quadrature rule
/// precomputed, so repeated evaluations only pay for the jets.
#[derive(Debug, Clone)]
pub struct GevreyTrajectory {
    spec: TrajectorySpec,
    ctx: PrecisionContext,
    sigma: Float,
    norm: Float,
    rule: TanhSinh,
}

impl GevreyTrajectory {
    pub fn new(spec: TrajectorySpec, ctx: PrecisionContext) -> Result<Self> {
        spec.validate()?;
        let rule = TanhSinh::new(&ctx);
        let sigma = ctx.float(spec.sigma);
        let half = ctx.float(0.5);
        let norm = rule.integrate_from_zero(&half, |x| phi_value(x, &sigma)) * 2u32;
        Ok(Self {
            spec,
            ctx,
            sigma,
            norm,
            rule,
        })
    }

    pub fn spec(&self) -> &TrajectorySpec {
        &self.spec
    }

    pub fn context(&self) -> &PrecisionContext {
        &self.ctx
    }

    pub fn normalization(&self) -> &Float {
        &self.norm
    }

    fn tau(&self, t: f64) -> Float {
        self.ctx.float(t) / self.ctx.float(self.spec.duration)
    }

    /// `Phi_sigma(tau)`, using `Phi(tau) = 1 - Phi(1 - tau)` above `1/2`.
    pub fn phi_integral(&self, tau: &Float) -> Float {
        let prec = self.ctx.bits();
        if *tau <= 0 {
            return Float::with_val(prec, 0);
        }
        if *tau >= 1 {
            return Float::with_val(prec, 1);
        }
        let mirrored = Float::with_val(prec, 1 - tau);
        let (upper, flip) = if *tau <= 0.5 {
            (tau.clone(), false)
        } else {
            (mirrored, true)
        };
        let partial = self
            .rule
            .integrate_from_zero(&upper, |x| phi_value(x, &self.sigma))
            / &self.norm;
        if flip {
            Float::with_val(prec, 1 - partial)
        } else {
            partial
        }
    }

    /// `y(t)` only.
    pub fn value(&self, t: f64) -> Float {
        let tau = self.tau(t);
        let span = self.ctx.float(self.spec.y_end - self.spec.y_start);
        self.ctx.float(self.spec.y_start) + span * self.phi_integral(&tau)
    }

    /// `y^(m)(t)` for `m = 0..=max_order`. Outside `(0, T)` the derivatives
    /// of order `>= 1` are exactly zero.
    pub fn derivatives(&self, t: f64, max_order: usize) -> Vec<Float> {
        let tau = self.tau(t);
        if tau <= 0 || tau >= 1 {
            return self.endpoint_derivatives(&tau, max_order);
        }
        let jet = (max_order > 0).then(|| phi_jet_at(&tau, &self.sigma, max_order - 1));
        self.assemble(self.value(t), jet.as_ref(), max_order)
    }

    /// Even derivatives `y^(2k)(t)`, `k = 0..=max_k`.
    pub fn even_derivatives(&self, t: f64, max_k: usize) -> Vec<Float> {
        self.derivatives(t, 2 * max_k)
            .into_iter()
            .step_by(2)
            .collect()
    }

    /// [`Self::derivatives`] for every point of `grid`. Along increasing
    /// stretches of the grid, `Phi` is advanced interval by interval by
    /// integrating the Taylor jet already needed for the derivatives; the
    /// quadrature is only used where that series is not safely convergent.
    pub fn sample(&self, grid: &[f64], max_order: usize) -> Vec<Vec<Float>> {
        let prec = self.ctx.bits();
        let jet_order = max_order.saturating_sub(1).max(MIN_INTEGRATION_ORDER);
        let mut out = Vec::with_capacity(grid.len());
        // (tau, Phi(tau), jet) of the previous point
        let mut prev: Option<(Float, Float, Option<Jet>)> = None;
        for &t in grid {
            let tau = self.tau(t);
            if tau <= 0 || tau >= 1 {
                out.push(self.endpoint_derivatives(&tau, max_order));
                let phi = Float::with_val(prec, if tau <= 0 { 0 } else { 1 });
                prev = Some((tau, phi, None));
                continue;
            }
            let jet = phi_jet_at(&tau, &self.sigma, jet_order);
            let advanced = prev.as_ref().and_then(|(tau_prev, phi_prev, jet_prev)| {
                self.advance(tau_prev, phi_prev, jet_prev.as_ref(), &tau, &jet)
            });
            let phi = advanced.unwrap_or_else(|| self.phi_integral(&tau));
            let y = self.ctx.float(self.spec.y_start)
                + self.ctx.float(self.spec.y_end - self.spec.y_start) * &phi;
            out.push(self.assemble(y, (max_order > 0).then_some(&jet), max_order));
            prev = Some((tau, phi, Some(jet)));
        }
        out
    }

    fn endpoint_derivatives(&self, tau: &Float, max_order: usize) -> Vec<Float> {
        let prec = self.ctx.bits();
        let endpoint = if *tau <= 0 {
            self.spec.y_start
        } else {
            self.spec.y_end
        };
        let mut out = Vec::with_capacity(max_order + 1);
        out.push(self.ctx.float(endpoint));
        out.extend((0..max_order).map(|_| Float::with_val(prec, 0)));
        out
    }

    /// `y` plus `y^(m) = (y1 - y0) phi^(m-1) / (C T^m)` from a jet of `phi`.
    fn assemble(&self, y: Float, jet: Option<&Jet>, max_order: usize) -> Vec<Float> {
        let prec = self.ctx.bits();
        let mut out = Vec::with_capacity(max_order + 1);
        out.push(y);
        let Some(jet) = jet else {
            return out;
        };
        let span = self.ctx.float(self.spec.y_end - self.spec.y_start);
        let t_scale = self.ctx.float(self.spec.duration);
        // (y1 - y0) / (C T^m), built up one factor of T at a time
        let mut factor = span / &self.norm;
        for d in jet.derivatives().into_iter().take(max_order) {
            factor /= &t_scale;
            out.push(Float::with_val(prec, &d * &factor));
        }
        out
    }

    /// `Phi(tau)` from `Phi(tau_prev)` by integrating one of the two jets
    /// over `[tau_prev, tau]`, or `None` if neither series is trustworthy.
    fn advance(
        &self,
        tau_prev: &Float,
        phi_prev: &Float,
        jet_prev: Option<&Jet>,
        tau: &Float,
        jet: &Jet,
    ) -> Option<Float> {
        let prec = self.ctx.bits();
        let h = Float::with_val(prec, tau - tau_prev);
        if h <= 0 || *tau_prev < 0 {
            return None;
        }
        let radius = |x: &Float| Float::with_val(prec, 1 - x).min(x);
        // expand about the end further from the singular points 0 and 1
        let (center_jet, backward, r) = match jet_prev {
            Some(jp) if radius(tau_prev) > radius(tau) => (jp, false, radius(tau_prev)),
            _ => (jet, true, radius(tau)),
        };
        if Float::with_val(prec, &h * 2u32) > r {
            return None;
        }
        let increment = taylor_integral(
            center_jet,
            &h,
            backward,
            self.ctx.quadrature_tolerance_bits(),
        )?;
        Some(Float::with_val(prec, phi_prev + increment / &self.norm))
    }
}

/// Jets used for stepping `Phi` are never shorter than this.
const MIN_INTEGRATION_ORDER: usize = 48;

/// `int_0^h` (or `int_-h^0` when `backward`) of the jet's Taylor polynomial.
/// `None` unless the last two terms are below `2^-tol_bits` of the sum.
fn taylor_integral(jet: &Jet, h: &Float, backward: bool, tol_bits: u32) -> Option<Float> {
    let prec = jet.prec();
    let mut sum = Float::with_val(prec, 0);
    let mut power = h.clone();
    let mut tail = Float::with_val(prec, 0);
    let order = jet.order();
    for (m, a) in jet.coeffs().iter().enumerate() {
        let mut term = Float::with_val(prec, a * &power) / (m as u32 + 1);
        if backward && m % 2 == 1 {
            term = -term;
        }
        if m + 2 > order {
            tail += Float::with_val(prec, term.abs_ref());
        }
        sum += term;
        power *= h;
    }
    let bound = Float::with_val(prec, sum.abs_ref()) >> tol_bits;
    (tail <= bound && !sum.is_zero()).then_some(sum)
}

/// Convenience wrapper building a [`GevreyTrajectory`] for a single point.
pub fn y_derivatives(
    spec: &TrajectorySpec,
    t: f64,
    max_order: usize,
    ctx: &PrecisionContext,
) -> Result<Vec<Float>> {
    Ok(GevreyTrajectory::new(*spec, *ctx)?.derivatives(t, max_order))
}

/// CSV `t,m,value` of `y^(m)(t)` on a time grid.
pub fn derivative_table_csv(
    traj: &GevreyTrajectory,
    grid: &[f64],
    max_order: usize,
    digits: usize,
) -> String {
    let mut out = String::from("t,m,value\n");
    for &t in grid {
        for (m, v) in traj.derivatives(t, max_order).iter().enumerate() {
            let _ = writeln!(
                out,
                "{},{m},{}",
                crate::format_f64(t, digits),
                v.to_string_radix(10, Some(digits))
            );
        }
    }
    out
}

/// Least-squares fit of `ln sup_t |y^(m)| = ln M + gamma ln m! - m ln R`.
#[derive(Debug, Clone)]
pub struct GevreyFit {
    pub gamma: f64,
    pub scale: f64,
    pub radius: f64,
    /// Root-mean-square residual of the fit in natural-log units.
    pub rms_residual: f64,
    /// `ln sup |y^(m)|` per order `m = 0..=M`; `None` when the sup is zero.
    pub log_sup: Vec<Option<f64>>,
    /// Orders that entered the fit.
    pub fitted_orders: Vec<usize>,
}

impl GevreyFit {
    pub fn is_degenerate(&self) -> bool {
        self.fitted_orders.len() < 3
    }
}

fn ln_factorial(m: usize) -> f64 {
    (2..=m).map(|i| (i as f64).ln()).sum()
}

/// Estimates the Gevrey constants of a trajectory from sampled derivative
/// suprema over orders `1..=max_order`.
pub fn gevrey_bound_probe(
    spec: &TrajectorySpec,
    max_order: usize,
    grid: &[f64],
    ctx: &PrecisionContext,
) -> Result<GevreyFit> {
    if max_order < 2 {
        return Err(Error::invalid("M", "need at least order 2"));
    }
    let traj = GevreyTrajectory::new(*spec, *ctx)?;
    let mut sup: Vec<Float> = vec![Float::with_val(ctx.bits(), 0); max_order + 1];
    for derivs in traj.sample(grid, max_order) {
        for (m, v) in derivs.into_iter().enumerate() {
            let a = v.abs();
            if a > sup[m] {
                sup[m] = a;
            }
        }
    }
    let log_sup: Vec<Option<f64>> = sup
        .iter()
        .map(|s| (!s.is_zero()).then(|| Float::with_val(ctx.bits(), s.ln_ref()).to_f64()))
        .collect();
    let fitted_orders: Vec<usize> = (1..=max_order).filter(|&m| log_sup[m].is_some()).collect();
    if fitted_orders.len() < 3 {
        return Ok(GevreyFit {
            gamma: f64::NAN,
            scale: 0.0,
            radius: f64::NAN,
            rms_residual: 0.0,
            log_sup,
            fitted_orders,
        });
    }
    let n = fitted_orders.len();
    let a = nalgebra::DMatrix::from_fn(n, 3, |r, c| {
        let m = fitted_orders[r];
        match c {
            0 => 1.0,
            1 => ln_factorial(m),
            _ => -(m as f64),
        }
    });
    let b = nalgebra::DVector::from_fn(n, |r, _| log_sup[fitted_orders[r]].unwrap());
    let x = a
        .clone()
        .svd(true, true)
        .solve(&b, 1e-12)
        .map_err(|e| Error::Solve(e.to_string()))?;
    let residual = &a * &x - &b;
    Ok(GevreyFit {
        gamma: x[1],
        scale: x[0].exp(),
        radius: x[2].exp(),
        rms_residual: (residual.norm_squared() / n as f64).sqrt(),
        log_sup,
        fitted_orders,
    })
}

#[cfg(test)]
mod tests;
