//! Truncated Taylor jets in big-float arithmetic.

use rug::Float;

use crate::error::{Error, Result};

/// Taylor coefficients `a_m = f^(m)(center) / m!`, `m = 0..=order`.
#[derive(Debug, Clone, PartialEq)]
pub struct Jet {
    center: Float,
    coeffs: Vec<Float>,
}

/// Elementary operations understood by [`jet_arith`].
#[derive(Debug, Clone)]
pub enum JetOp {
    Add,
    Mul,
    RealPower(Float),
    Exp,
}

impl Jet {
    pub fn new(center: Float, coeffs: Vec<Float>) -> Result<Self> {
        if coeffs.is_empty() {
            return Err(Error::JetMismatch(
                "a jet needs at least one coefficient".into(),
            ));
        }
        if let Some(m) = coeffs.iter().position(|c| !c.is_finite()) {
            return Err(Error::Domain(format!("jet coefficient {m} is not finite")));
        }
        Ok(Self { center, coeffs })
    }

    pub fn constant(value: Float, center: Float, order: usize) -> Self {
        let prec = value.prec();
        let mut coeffs = vec![Float::with_val(prec, 0); order + 1];
        coeffs[0] = value;
        Self { center, coeffs }
    }

    pub fn zero(center: Float, order: usize) -> Self {
        let prec = center.prec();
        Self::constant(Float::with_val(prec, 0), center, order)
    }

    /// The identity function `x -> x` expanded at `center`.
    pub fn variable(center: Float, order: usize) -> Self {
        let prec = center.prec();
        let mut coeffs = vec![Float::with_val(prec, 0); order + 1];
        coeffs[0] = center.clone();
        if order >= 1 {
            coeffs[1] = Float::with_val(prec, 1);
        }
        Self { center, coeffs }
    }

    pub fn order(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn prec(&self) -> u32 {
        self.coeffs[0].prec()
    }

    pub fn center(&self) -> &Float {
        &self.center
    }

    pub fn coeffs(&self) -> &[Float] {
        &self.coeffs
    }

    pub fn coeff(&self, m: usize) -> &Float {
        &self.coeffs[m]
    }

    pub fn into_coeffs(self) -> Vec<Float> {
        self.coeffs
    }

    /// `f^(m)(center) = m! a_m`.
    pub fn derivative(&self, m: usize) -> Float {
        let prec = self.prec();
        let mut f = self.coeffs[m].clone();
        for i in 2..=m as u32 {
            f *= i;
        }
        Float::with_val(prec, f)
    }

    /// All derivatives `f^(m)(center)`, `m = 0..=order`.
    pub fn derivatives(&self) -> Vec<Float> {
        let mut fact = Float::with_val(self.prec(), 1);
        self.coeffs
            .iter()
            .enumerate()
            .map(|(m, a)| {
                if m > 1 {
                    fact *= m as u32;
                }
                Float::with_val(self.prec(), a * &fact)
            })
            .collect()
    }

    fn check_compatible(&self, other: &Jet) -> Result<()> {
        if self.order() != other.order() {
            return Err(Error::JetMismatch(format!(
                "orders {} and {}",
                self.order(),
                other.order()
            )));
        }
        if self.center != other.center {
            return Err(Error::JetMismatch("different expansion points".into()));
        }
        Ok(())
    }

    pub fn add(&self, other: &Jet) -> Result<Jet> {
        self.check_compatible(other)?;
        let coeffs = self
            .coeffs
            .iter()
            .zip(&other.coeffs)
            .map(|(a, b)| Float::with_val(self.prec(), a + b))
            .collect();
        Ok(Jet {
            center: self.center.clone(),
            coeffs,
        })
    }

    /// Cauchy product.
    pub fn mul(&self, other: &Jet) -> Result<Jet> {
        self.check_compatible(other)?;
        let prec = self.prec();
        let n = self.coeffs.len();
        let mut coeffs = Vec::with_capacity(n);
        for m in 0..n {
            let mut acc = Float::with_val(prec, 0);
            for j in 0..=m {
                acc += &self.coeffs[j] * &other.coeffs[m - j];
            }
            coeffs.push(acc);
        }
        Ok(Jet {
            center: self.center.clone(),
            coeffs,
        })
    }

    pub fn scale(&self, factor: &Float) -> Jet {
        Jet {
            center: self.center.clone(),
            coeffs: self
                .coeffs
                .iter()
                .map(|a| Float::with_val(self.prec(), a * factor))
                .collect(),
        }
    }

    /// `g^a` via `n g_0 h_n = sum_{j=1}^n (a j - (n - j)) g_j h_{n-j}`.
    pub fn real_power(&self, exponent: &Float) -> Result<Jet> {
        let prec = self.prec();
        let g = &self.coeffs;
        if g[0] <= 0 {
            return Err(Error::Domain(format!(
                "real power needs a positive constant term, got {}",
                g[0].to_f64()
            )));
        }
        let mut h = Vec::with_capacity(g.len());
        let log_g0 = Float::with_val(prec, g[0].ln_ref());
        h.push(Float::with_val(prec, log_g0 * exponent).exp());
        // skip structurally zero g_j (h(t) = t(1 - t) has only three terms)
        let nonzero: Vec<usize> = (1..g.len()).filter(|&j| !g[j].is_zero()).collect();
        for n in 1..g.len() {
            let mut acc = Float::with_val(prec, 0);
            for &j in nonzero.iter().take_while(|&&j| j <= n) {
                let weight = Float::with_val(prec, exponent * j as u32) - (n - j) as u32;
                acc += weight * &g[j] * &h[n - j];
            }
            acc /= &g[0];
            acc /= n as u32;
            h.push(acc);
        }
        Ok(Jet {
            center: self.center.clone(),
            coeffs: h,
        })
    }

    /// `exp(g)` via `n h_n = sum_{j=1}^n j g_j h_{n-j}`.
    pub fn exp(&self) -> Jet {
        let prec = self.prec();
        let g = &self.coeffs;
        let mut h = Vec::with_capacity(g.len());
        h.push(Float::with_val(prec, g[0].exp_ref()));
        let weighted: Vec<Float> = g
            .iter()
            .enumerate()
            .map(|(j, gj)| Float::with_val(prec, gj * j as u32))
            .collect();
        for n in 1..g.len() {
            let mut acc = Float::with_val(prec, 0);
            for j in 1..=n {
                acc += &weighted[j] * &h[n - j];
            }
            acc /= n as u32;
            h.push(acc);
        }
        Jet {
            center: self.center.clone(),
            coeffs: h,
        }
    }

    pub fn is_finite(&self) -> bool {
        self.coeffs.iter().all(Float::is_finite)
    }
}

/// Applies one [`JetOp`]; binary ops take two inputs, unary ops one.
pub fn jet_arith(op: &JetOp, inputs: &[&Jet]) -> Result<Jet> {
    let arity = match op {
        JetOp::Add | JetOp::Mul => 2,
        JetOp::RealPower(_) | JetOp::Exp => 1,
    };
    if inputs.len() != arity {
        return Err(Error::JetMismatch(format!(
            "{op:?} takes {arity} input(s), got {}",
            inputs.len()
        )));
    }
    match op {
        JetOp::Add => inputs[0].add(inputs[1]),
        JetOp::Mul => inputs[0].mul(inputs[1]),
        JetOp::RealPower(a) => inputs[0].real_power(a),
        JetOp::Exp => Ok(inputs[0].exp()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const P: u32 = 256;

    fn f(x: f64) -> Float {
        Float::with_val(P, x)
    }

    fn jet(center: f64, coeffs: &[f64]) -> Jet {
        Jet::new(f(center), coeffs.iter().map(|&c| f(c)).collect()).unwrap()
    }

    #[test]
    fn exp_of_zero_is_one() {
        let z = Jet::zero(f(0.3), 6);
        let e = jet_arith(&JetOp::Exp, &[&z]).unwrap();
        assert_eq!(e.coeff(0), &1);
        assert!(e.coeffs()[1..].iter().all(|c| c.is_zero()));
    }

    #[test]
    fn unit_power_is_identity() {
        let g = jet(0.25, &[0.1875, 0.5, -1.0, 0.0, 0.0]);
        let h = jet_arith(&JetOp::RealPower(f(1.0)), &[&g]).unwrap();
        for (a, b) in g.coeffs().iter().zip(h.coeffs()) {
            assert!(Float::with_val(P, a - b).abs() < 1e-70);
        }
    }

    #[test]
    fn exp_of_linear_jet() {
        // exp(x) at x = 0: coefficients 1/m!
        let x = Jet::variable(f(0.0), 8);
        let e = x.exp();
        let mut fact = 1.0;
        for m in 0..=8 {
            if m > 0 {
                fact *= m as f64;
            }
            assert!((e.coeff(m).to_f64() - 1.0 / fact).abs() < 1e-15);
        }
        assert!((e.derivative(5).to_f64() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn product_and_sum() {
        let a = jet(0.0, &[1.0, 2.0, 3.0]);
        let b = jet(0.0, &[4.0, 5.0, 6.0]);
        let p = jet_arith(&JetOp::Mul, &[&a, &b]).unwrap();
        let got: Vec<f64> = p.coeffs().iter().map(Float::to_f64).collect();
        assert_eq!(got, vec![4.0, 13.0, 28.0]);
        let s = jet_arith(&JetOp::Add, &[&a, &b]).unwrap();
        assert_eq!(s.coeff(2).to_f64(), 9.0);
    }

    #[test]
    fn mismatches_and_domain_errors() {
        let a = jet(0.0, &[1.0, 2.0]);
        let b = jet(0.0, &[1.0, 2.0, 3.0]);
        let c = jet(0.5, &[1.0, 2.0]);
        assert!(a.add(&b).is_err());
        assert!(a.mul(&c).is_err());
        assert!(jet_arith(&JetOp::Exp, &[&a, &a]).is_err());
        let neg = jet(0.0, &[-1.0, 1.0]);
        assert!(matches!(neg.real_power(&f(0.5)), Err(Error::Domain(_))));
        let zero = jet(0.0, &[0.0, 1.0]);
        assert!(zero.real_power(&f(-1.1)).is_err());
        assert!(Jet::new(f(0.0), vec![]).is_err());
        assert!(Jet::new(f(0.0), vec![Float::with_val(P, f64::NAN)]).is_err());
    }

    #[test]
    fn square_root_series() {
        // sqrt(1 + x) = 1 + x/2 - x^2/8 + x^3/16 - ...
        let g = jet(0.0, &[1.0, 1.0, 0.0, 0.0]);
        let h = g.real_power(&f(0.5)).unwrap();
        let got: Vec<f64> = h.coeffs().iter().map(Float::to_f64).collect();
        assert_eq!(got, vec![1.0, 0.5, -0.125, 0.0625]);
    }
}
