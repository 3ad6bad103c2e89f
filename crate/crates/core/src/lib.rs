//! Flatness-based motion planning for a boundary-actuated Euler-Bernoulli
//! beam (clamped at `z = 0`, bending moment input at `z = 1`).
//!
//! * [`exactseq`]: exact rational sequences (`eta`, `mu`, Bernoulli, Euler)
//! * [`paramgen`]: coefficient tables of formal differential parametrizations
//! * [`gevrey`]: the `Phi_sigma` reference trajectory and its derivatives
//! * [`feedforward`]: series evaluation, including least-term summation
//! * [`beamsim`]: finite-difference / Newmark simulation of the beam

pub mod beamsim;
pub mod error;
pub mod exactseq;
pub mod feedforward;
pub mod gevrey;
pub mod paramgen;

pub use error::{Error, Result};
pub use rug::{Float, Rational};

/// Scientific notation with `digits` significant digits; used for every
/// decimal written to data files so outputs are reproducible.
pub fn format_f64(x: f64, digits: usize) -> String {
    if x == 0.0 {
        // avoid "-0" and keep zeros short
        return "0".to_string();
    }
    format!("{:.*e}", digits.max(1) - 1, x)
}
