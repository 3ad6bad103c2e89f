use rug::{Float, Integer, Rational};

use super::*;

fn ctx() -> PrecisionContext {
    PrecisionContext::default()
}

/// Central difference `f^(m)(x) ~ h^-m sum_j (-1)^j C(m, j) f(x + (m/2 - j) h)`
/// evaluated in big floats; second-order in `h`.
fn central_difference<F: Fn(&Float) -> Float>(f: F, x: f64, m: usize, h: f64) -> Float {
    let prec = 512;
    let x = Float::with_val(prec, x);
    let h = Float::with_val(prec, h);
    let mut acc = Float::with_val(prec, 0);
    for j in 0..=m {
        let offset = Float::with_val(prec, (m as f64) / 2.0 - j as f64) * &h;
        let fx = f(&Float::with_val(prec, &x + &offset));
        let c = Integer::from(Integer::binomial_u(m as u32, j as u32));
        let term = Float::with_val(prec, fx * &c);
        if j % 2 == 0 {
            acc += term;
        } else {
            acc -= term;
        }
    }
    for _ in 0..m {
        acc /= &h;
    }
    acc
}

fn rel_err(a: &Float, b: &Float) -> f64 {
    let d = Float::with_val(512, a - b).abs();
    (d / Float::with_val(512, b.abs_ref())).to_f64()
}

#[test]
fn power_jet_matches_finite_difference() {
    let c = ctx();
    let g = phi_jet_base(0.25, &c);
    let h = jet_arith(&JetOp::RealPower(c.float(-1.1)), &[&g]).unwrap();
    let a = c.float(-1.1);
    let fd = central_difference(
        |x| {
            let base = Float::with_val(512, x * Float::with_val(512, 1 - x));
            Float::with_val(512, base.ln() * &a).exp()
        },
        0.25,
        2,
        1e-20,
    ) / 2u32;
    assert!(rel_err(h.coeff(2), &fd) <= 1e-6);
    // independent evaluation of the same coefficient at 40 digits
    let frozen = Float::with_val(
        512,
        Float::parse("88.77716159366232456039648164044390602236").unwrap(),
    );
    assert!(rel_err(h.coeff(2), &frozen) < 1e-35);
}

fn phi_jet_base(tau0: f64, c: &PrecisionContext) -> Jet {
    let t = c.float(tau0);
    let one_minus = Float::with_val(c.bits(), 1 - &t);
    let h0 = Float::with_val(c.bits(), &t * &one_minus);
    Jet::new(
        t.clone(),
        vec![
            h0,
            Float::with_val(c.bits(), 1 - Float::with_val(c.bits(), &t * 2u32)),
            c.float(-1.0),
            c.float(0.0),
            c.float(0.0),
        ],
    )
    .unwrap()
}

#[test]
fn phi_jet_matches_finite_differences() {
    let c = ctx();
    for &sigma in &[1.0, 1.1, 2.0] {
        let s = c.float(sigma);
        for &tau in &[0.1, 0.25, 0.5, 0.7] {
            let jet = phi_jet(tau, sigma, 4, &c);
            for m in 0..=4 {
                let exact = jet.derivative(m);
                let fd = central_difference(|x| phi_value(x, &s), tau, m, 1e-18);
                if exact.is_zero() {
                    // odd orders at the midpoint
                    assert!(fd.abs() < 1e-20, "sigma {sigma} tau {tau} m {m}");
                } else {
                    let e = rel_err(&exact, &fd);
                    assert!(e <= 1e-6, "sigma {sigma} tau {tau} m {m}: {e}");
                }
            }
        }
    }
}

#[test]
fn phi_jet_special_points() {
    let c = ctx();
    let z = phi_jet(0.0, 1.1, 10, &c);
    assert!(z.coeffs().iter().all(|a| a.is_zero()));
    assert!(phi_jet(1.0, 1.1, 3, &c)
        .coeffs()
        .iter()
        .all(|a| a.is_zero()));
    let mid = phi_jet(0.5, 1.0, 3, &c);
    let e4 = Float::with_val(512, -4).exp();
    assert!(rel_err(mid.coeff(0), &e4) < 1e-100);
    let mid = phi_jet(0.5, 1.1, 5, &c);
    assert!(mid.coeff(1).is_zero());
    assert!(mid.coeff(3).is_zero());
}

/// For sigma = 1, `phi = exp(psi)` with `psi = -1/t - 1/(1-t)`. The Taylor
/// coefficients of `psi` at a rational point are exact rationals, so
/// `a_n = exp(psi_0) r_n` with `r_n` from the exact recurrence
/// `n r_n = sum_j j psi_j r_{n-j}`.
fn sigma_one_oracle(tau0: &Rational, order: usize, prec: u32) -> Vec<Float> {
    let one_minus = Rational::from(1 - tau0);
    let psi: Vec<Rational> = (0..=order)
        .map(|n| {
            let left = tau0.clone().recip().pow_ref_i(n as i32 + 1);
            let right = one_minus.clone().recip().pow_ref_i(n as i32 + 1);
            let left = if n % 2 == 0 { left } else { -left };
            -(left + right)
        })
        .collect();
    let mut r = vec![Rational::from(1)];
    for n in 1..=order {
        let mut acc = Rational::new();
        for j in 1..=n {
            acc += Rational::from(&psi[j] * &r[n - j]) * j as u32;
        }
        r.push(acc / n as u32);
    }
    let base = Float::with_val(prec, &psi[0]).exp();
    r.iter().map(|x| Float::with_val(prec, x) * &base).collect()
}

trait PowI {
    fn pow_ref_i(&self, e: i32) -> Rational;
}

impl PowI for Rational {
    fn pow_ref_i(&self, e: i32) -> Rational {
        use rug::ops::Pow;
        Rational::from(self.pow(e))
    }
}

#[test]
fn sigma_one_analytic_recurrence() {
    let c = ctx();
    let tau0 = Rational::from((3, 10));
    let oracle = sigma_one_oracle(&tau0, 40, 1024);
    let jet = phi_jet(0.3, 1.0, 40, &c);
    // 0.3 is not exact in binary; centre a second jet at 3/10 itself
    let jet_exact_center = phi_jet_at(&Float::with_val(512, &tau0), &c.float(1.0), 40);
    for (m, want) in oracle.iter().enumerate() {
        let e = rel_err(jet_exact_center.coeff(m), want);
        assert!(e < 1e-20, "order {m}: {e}");
    }
    assert!(rel_err(jet.coeff(0), &oracle[0]) < 1e-14);
}

#[test]
fn normalization_constants() {
    let c = ctx();
    let c1 = normalization_constant(1.0, &c);
    let frozen1 = Float::with_val(
        512,
        Float::parse("0.0070298584066096562392412705303539560761553994753573").unwrap(),
    );
    assert!(rel_err(&c1, &frozen1) < 1e-40);
    let c11 = normalization_constant(1.1, &c);
    let frozen11 = Float::with_val(
        512,
        Float::parse("0.0035216901167834626272787114068165616820412568598861").unwrap(),
    );
    assert!(rel_err(&c11, &frozen11) < 1e-40);
    for &sigma in &[0.5, 1.0, 1.1, 2.0] {
        let cs = normalization_constant(sigma, &c).to_f64();
        assert!(cs > 0.0);
        assert!(cs < (-(4f64).powf(sigma)).exp());
    }
}

fn trapezoid(sigma: f64, n: u32) -> Float {
    let s = Float::with_val(512, sigma);
    let mut acc = Float::with_val(512, 0);
    for j in 1..n {
        let x = Float::with_val(512, j) / n;
        acc += phi_value(&x, &s);
    }
    acc / n
}

#[test]
fn normalization_matches_trapezoid_rule() {
    // endpoint-flat integrand: the plain trapezoid rule converges quickly
    let c = ctx();
    let ts = normalization_constant(1.0, &c);
    let coarse = trapezoid(1.0, 400);
    let fine = trapezoid(1.0, 800);
    assert!(rel_err(&coarse, &fine) < 1e-12);
    assert!(rel_err(&ts, &fine) < 1e-12);
}

fn spec() -> TrajectorySpec {
    TrajectorySpec::new(5.0, 1.1, 0.0, 1.0).unwrap()
}

#[test]
fn derivatives_outside_window() {
    let traj =
        GevreyTrajectory::new(TrajectorySpec::new(5.0, 1.1, 0.25, 2.0).unwrap(), ctx()).unwrap();
    for (t, y) in [(0.0, 0.25), (-1.0, 0.25), (5.0, 2.0), (7.5, 2.0)] {
        let d = traj.derivatives(t, 6);
        assert_eq!(d[0].to_f64(), y);
        assert!(d[1..].iter().all(|v| v.is_zero()));
    }
}

#[test]
fn midpoint_and_symmetry() {
    let traj = GevreyTrajectory::new(spec(), ctx()).unwrap();
    let mid = traj.derivatives(2.5, 9);
    assert!((mid[0].to_f64() - 0.5).abs() < 1e-30);
    for m in (2..=8).step_by(2) {
        assert!(mid[m].is_zero(), "even order {m} vanishes at the midpoint");
    }
    let t = 1.25;
    let a = traj.derivatives(t, 12);
    let b = traj.derivatives(5.0 - t, 12);
    let sum = Float::with_val(512, &a[0] + &b[0]);
    assert!((sum.to_f64() - 1.0).abs() < 1e-30);
    for m in 1..=12 {
        let sign = if (m - 1) % 2 == 0 { 1.0 } else { -1.0 };
        let diff = Float::with_val(512, &b[m] - Float::with_val(512, &a[m] * sign));
        assert!(
            diff.abs() <= Float::with_val(512, a[m].abs_ref()) * 1e-30,
            "order {m}"
        );
    }
}

#[test]
fn first_derivative_consistent_with_value() {
    let traj = GevreyTrajectory::new(spec(), ctx()).unwrap();
    let c = ctx();
    for &t in &[0.4, 1.7, 3.9] {
        let d = traj.derivatives(t, 1);
        let s = traj.spec();
        let fd = central_difference(
            |x| {
                let tau = Float::with_val(512, x / s.duration);
                traj.phi_integral(&tau) * (s.y_end - s.y_start) + s.y_start
            },
            t,
            1,
            1e-7,
        );
        assert!(rel_err(&d[1], &fd) < 1e-9, "t = {t}");
        let tau = c.float(t) / c.float(5.0);
        let expected = phi_value(&tau, &c.float(1.1)) / traj.normalization() / 5u32;
        assert!(rel_err(&d[1], &expected) < 1e-40);
    }
}

#[test]
fn monotone_and_finite() {
    let traj = GevreyTrajectory::new(spec(), ctx()).unwrap();
    let mut last = f64::NEG_INFINITY;
    for i in 0..=50 {
        let t = 5.0 * i as f64 / 50.0;
        let d = traj.derivatives(t, 80);
        assert!(d.iter().all(Float::is_finite));
        let y = d[0].to_f64();
        assert!(y >= last);
        last = y;
    }
}

#[test]
fn spec_validation() {
    assert!(TrajectorySpec::new(0.0, 1.1, 0.0, 1.0).is_err());
    assert!(TrajectorySpec::new(5.0, -1.0, 0.0, 1.0).is_err());
    assert!(TrajectorySpec::new(5.0, 1.1, f64::NAN, 1.0).is_err());
    assert!(PrecisionContext::new(32).is_err());
    assert_eq!(PrecisionContext::default().bits(), 512);
    assert!((spec().gevrey_order() - (1.0 + 1.0 / 1.1)).abs() < 1e-15);
}

fn probe_grid(duration: f64, n: usize) -> Vec<f64> {
    (1..n).map(|i| duration * i as f64 / n as f64).collect()
}

#[test]
fn gevrey_probe_constant_and_scaling() {
    let c = PrecisionContext::new(256).unwrap();
    let flat = TrajectorySpec::new(5.0, 1.1, 0.3, 0.3).unwrap();
    let fit = gevrey_bound_probe(&flat, 6, &probe_grid(5.0, 20), &c).unwrap();
    assert!(fit.is_degenerate());
    assert!(fit.log_sup[1..].iter().all(Option::is_none));

    let s5 = TrajectorySpec::new(5.0, 1.1, 0.0, 1.0).unwrap();
    let s10 = TrajectorySpec::new(10.0, 1.1, 0.0, 1.0).unwrap();
    let f5 = gevrey_bound_probe(&s5, 12, &probe_grid(5.0, 40), &c).unwrap();
    let f10 = gevrey_bound_probe(&s10, 12, &probe_grid(10.0, 40), &c).unwrap();
    for m in 1..=12 {
        let shift = f5.log_sup[m].unwrap() - f10.log_sup[m].unwrap();
        assert!((shift - m as f64 * std::f64::consts::LN_2).abs() < 1e-9);
    }
    assert!((f5.gamma - f10.gamma).abs() < 1e-8);
    assert!(gevrey_bound_probe(&s5, 1, &[1.0], &c).is_err());
}

#[test]
fn derivative_csv_layout() {
    let traj = GevreyTrajectory::new(spec(), ctx()).unwrap();
    let csv = derivative_table_csv(&traj, &[0.0, 2.5], 1, 6);
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "t,m,value");
    assert_eq!(lines.len(), 5);
    assert!(
        lines[3].starts_with("2.50000e0,0,5.00000e-1"),
        "{}",
        lines[3]
    );
}

fn assert_sample_matches(traj: &GevreyTrajectory, grid: &[f64], max_order: usize) {
    let sampled = traj.sample(grid, max_order);
    assert_eq!(sampled.len(), grid.len());
    for (&t, got) in grid.iter().zip(&sampled) {
        let want = traj.derivatives(t, max_order);
        assert_eq!(got.len(), want.len());
        for (m, (a, b)) in got.iter().zip(&want).enumerate() {
            let scale = Float::with_val(512, b.abs_ref()).max(&Float::with_val(512, 1));
            let err = Float::with_val(512, a - b).abs() / scale;
            assert!(err < 1e-40, "t = {t}, m = {m}: {err}");
        }
    }
}

#[test]
fn sample_matches_pointwise_on_uniform_grid() {
    let traj = GevreyTrajectory::new(spec(), ctx()).unwrap();
    let grid: Vec<f64> = (-4..=204).map(|i| i as f64 * 0.025).collect();
    assert_sample_matches(&traj, &grid, 12);
}

#[test]
fn sample_handles_unsorted_and_repeated_times() {
    let traj = GevreyTrajectory::new(spec(), ctx()).unwrap();
    let grid = [3.5, 0.25, 0.25, 4.875, 2.5, 6.0, 1.0, 1.0625, -1.0, 4.99];
    assert_sample_matches(&traj, &grid, 6);
}
