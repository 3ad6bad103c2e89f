//! Tanh-sinh quadrature on `[0, b]`.
//!
//! Abscissae are stored on the unit interval and scaled by `b`, so one rule
//! serves every upper limit. Levels halve the step; each level only adds the
//! odd nodes.

use rug::float::Constant;
use rug::Float;

use super::PrecisionContext;

const MAX_LEVEL: usize = 10;

#[derive(Debug, Clone)]
struct Node {
    /// Distance from the left end, in units of `b` (`1/(1+e^{2u})`).
    left: Float,
    /// Distance from the left end of the mirrored node (`1 - left`).
    right: Float,
    weight: Float,
}

#[derive(Debug, Clone)]
pub struct TanhSinh {
    prec: u32,
    tol_bits: u32,
    t_max: f64,
    /// Node at `t = 0` (`x = b/2`, weight `pi/4`).
    center_weight: Float,
    /// `levels[0]` holds integer `t`, `levels[l]` the odd multiples of `2^-l`.
    levels: Vec<Vec<Node>>,
}

impl TanhSinh {
    pub fn new(ctx: &PrecisionContext) -> Self {
        let prec = ctx.bits();
        // beyond t_max the weights fall below 2^-(prec + 16)
        let u_max = (prec as f64 + 16.0) * std::f64::consts::LN_2 / 2.0;
        let t_max = (2.0 * u_max / std::f64::consts::PI).asinh();
        let half_pi = Float::with_val(prec, Constant::Pi) / 2u32;
        let center_weight = Float::with_val(prec, &half_pi / 2u32);
        let mut levels = Vec::with_capacity(MAX_LEVEL + 1);
        for level in 0..=MAX_LEVEL {
            let h = (0.5f64).powi(level as i32);
            let mut nodes = Vec::new();
            let mut j = 1usize;
            loop {
                if level > 0 && j.is_multiple_of(2) {
                    j += 1;
                    continue;
                }
                let t = j as f64 * h;
                if t > t_max {
                    break;
                }
                let t = Float::with_val(prec, t);
                let u = Float::with_val(prec, &half_pi * Float::with_val(prec, t.sinh_ref()));
                let e = Float::with_val(prec, -Float::with_val(prec, &u * 2u32)).exp();
                let denom = Float::with_val(prec, 1 + &e);
                let left = Float::with_val(prec, &e / &denom);
                let right = Float::with_val(prec, 1 / &denom);
                // d/dt [1/(1+e^{-2u})] = 2 e^{-2u} / (1+e^{-2u})^2 * (pi/2) cosh t
                let dudt = Float::with_val(prec, &half_pi * t.cosh());
                let weight = Float::with_val(prec, &e * 2u32) / denom.square() * dudt;
                nodes.push(Node {
                    left,
                    right,
                    weight,
                });
                j += 1;
            }
            levels.push(nodes);
        }
        Self {
            prec,
            tol_bits: ctx.quadrature_tolerance_bits(),
            t_max,
            center_weight,
            levels,
        }
    }

    pub fn t_max(&self) -> f64 {
        self.t_max
    }

    /// `int_0^b f(x) dx` for an integrand smooth on `(0, b)`. Refines until
    /// two successive levels agree to the context tolerance.
    pub fn integrate_from_zero<F>(&self, b: &Float, f: F) -> Float
    where
        F: Fn(&Float) -> Float,
    {
        self.integrate_with_levels(b, f).0
    }

    /// As [`Self::integrate_from_zero`], also returning the level reached.
    pub fn integrate_with_levels<F>(&self, b: &Float, f: F) -> (Float, usize)
    where
        F: Fn(&Float) -> Float,
    {
        let prec = self.prec;
        let b = Float::with_val(prec, b);
        if b <= 0 {
            return (Float::with_val(prec, 0), 0);
        }
        let mid = Float::with_val(prec, &b / 2u32);
        let mut sum = Float::with_val(prec, f(&mid) * &self.center_weight);
        let mut estimate = Float::with_val(prec, 0);
        for (level, nodes) in self.levels.iter().enumerate() {
            for node in nodes {
                let xl = Float::with_val(prec, &b * &node.left);
                let xr = Float::with_val(prec, &b * &node.right);
                let fl = f(&xl);
                let fr = f(&xr);
                sum += Float::with_val(prec, fl + fr) * &node.weight;
            }
            let h = Float::with_val(prec, 1) >> level as u32;
            let next = Float::with_val(prec, &sum * &h) * &b;
            if level >= 3 {
                let diff = Float::with_val(prec, &next - &estimate).abs();
                let scale = Float::with_val(prec, next.abs_ref()) >> self.tol_bits;
                if diff <= scale {
                    return (next, level);
                }
            }
            estimate = next;
        }
        (estimate, MAX_LEVEL)
    }
}
