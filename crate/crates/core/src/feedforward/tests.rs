use rug::{Float, Rational};

use super::*;

fn ctx() -> PrecisionContext {
    PrecisionContext::default()
}

fn f(x: f64) -> Float {
    Float::with_val(256, x)
}

fn spec(y_end: f64) -> TrajectorySpec {
    TrajectorySpec::new(5.0, 1.1, 0.0, y_end).unwrap()
}

fn rel(a: &Float, b: &Float) -> f64 {
    let d = Float::with_val(512, a - b).abs();
    if b.is_zero() {
        return d.to_f64();
    }
    (d / Float::with_val(512, b.abs_ref())).to_f64()
}

#[test]
fn policy_validation() {
    assert!(SummationPolicy::fixed(1).is_err());
    assert!(SummationPolicy::tail_epsilon(10, 0.0).is_err());
    assert!(SummationPolicy::tail_epsilon(10, f64::NAN).is_err());
    assert!(SummationPolicy::least_term(2).is_ok());
    assert_eq!(
        "fixed_K".parse::<SummationMode>().unwrap(),
        SummationMode::FixedK
    );
    assert!("borel".parse::<SummationMode>().is_err());
    for mode in [
        SummationMode::TailEpsilon,
        SummationMode::LeastTerm,
        SummationMode::FixedK,
    ] {
        assert_eq!(mode.name().parse::<SummationMode>().unwrap(), mode);
    }
}

#[test]
fn least_term_scan_starts_at_two() {
    let policy = SummationPolicy::least_term(5).unwrap();
    // growth from k = 1 to 2 is ignored, the first later growth is at n = 4
    let terms: Vec<Float> = [1.0, 0.1, 0.5, 0.2, 0.1, 0.3].map(f).to_vec();
    assert_eq!(
        truncate(&terms, &policy),
        Truncation {
            n_t: 4,
            saturated: false
        }
    );
    let terms: Vec<Float> = [1.0, 0.5, 0.1, 0.05, 0.2, 1.0].map(f).to_vec();
    assert_eq!(truncate(&terms, &policy).n_t, 3);
    // sign does not matter, only magnitude
    let terms: Vec<Float> = [1.0, -0.5, 0.1, -0.05, -0.2, 1.0].map(f).to_vec();
    assert_eq!(truncate(&terms, &policy).n_t, 3);
    let decreasing: Vec<Float> = [1.0, 0.5, 0.25, 0.125, 0.0625, 0.03].map(f).to_vec();
    assert_eq!(
        truncate(&decreasing, &policy),
        Truncation {
            n_t: 5,
            saturated: true
        }
    );
}

#[test]
fn tail_and_fixed_truncation() {
    let terms: Vec<Float> = [1.0, 1e-3, 1e-8, 1e-20, 1e-40].map(f).to_vec();
    let tail = SummationPolicy::tail_epsilon(4, 1e-10).unwrap();
    assert_eq!(truncate(&terms, &tail).n_t, 3);
    let tight = SummationPolicy::tail_epsilon(4, 1e-100).unwrap();
    assert!(truncate(&terms, &tight).saturated);
    let fixed = SummationPolicy::fixed(3).unwrap();
    assert_eq!(truncate(&terms, &fixed).n_t, 3);
}

#[test]
fn flat_steady_states() {
    let c = ctx();
    let policy = SummationPolicy::fixed(20).unwrap();
    let grid = [-1.0, 0.0, 5.0, 6.5];
    let u = eval_u_flat(2.0, &spec(0.25), &grid, &policy, &c).unwrap();
    assert_eq!(u.values_f64(), vec![0.0, 0.0, 1.0, 1.0]);
    let w = eval_w_flat(2.0, &spec(0.25), 1.0, &grid, &policy, &c).unwrap();
    assert_eq!(w.values_f64(), vec![0.0, 0.0, 0.5, 0.5]);
    let w = eval_w_flat(2.0, &spec(0.25), 0.5, &grid, &policy, &c).unwrap();
    assert_eq!(w.values_f64()[3], 2.0 * 0.25 * 0.25);
}

#[test]
fn flat_deflection_vanishes_at_clamp() {
    let grid = uniform_grid(0.0, 5.0, 10);
    let w = eval_w_flat(
        2.0,
        &spec(1.0),
        0.0,
        &grid,
        &SummationPolicy::fixed(10).unwrap(),
        &ctx(),
    )
    .unwrap();
    assert!(w.u_values.iter().all(Float::is_zero));
}

#[test]
fn flat_zeroth_term_is_quadratic_profile() {
    let c = ctx();
    let s = spec(1.0);
    let traj = GevreyTrajectory::new(s, c).unwrap();
    let z = 0.75;
    let grid = [0.5, 1.7, 3.2];
    let w = eval_w_flat(2.0, &s, z, &grid, &SummationPolicy::fixed(8).unwrap(), &c).unwrap();
    for (i, &t) in grid.iter().enumerate() {
        let expected = traj.value(t) * (2.0 * z * z);
        assert!(rel(&w.term_log[i][0], &expected) < 1e-60);
    }
}

#[test]
fn flat_input_converges_at_midpoint() {
    let c = ctx();
    let s = spec(1.0);
    let partial = |k: usize| {
        eval_u_flat(2.0, &s, &[2.5], &SummationPolicy::fixed(k).unwrap(), &c)
            .unwrap()
            .u_values
            .remove(0)
    };
    let u40 = partial(40);
    assert!(rel(&partial(30), &u40) < 1e-10);
    assert!(rel(&partial(35), &u40) < 1e-10);
    // the value is dominated by 4 y(T/2) = 2
    assert!((u40.to_f64() - 2.0).abs() < 0.5);
}

#[test]
fn flat_series_termwise_boundary_condition() {
    // d^2/dz^2 alpha_2k(1) = beta_2k, hence d^2 w(1, t)/dz^2 = u(t)
    let c = ctx();
    let table = build_parametrization(&flat_choice(&Rational::from(2), 12));
    for k in 0..=12 {
        let p = alpha_polynomial(&table, k).unwrap().nth_derivative(2);
        assert_eq!(p.eval(&Rational::from(1)), table.beta2()[k]);
    }
    let s = spec(1.0);
    let grid = [0.8, 2.1, 4.4];
    for k_max in [3, 7, 12] {
        let policy = SummationPolicy::fixed(k_max).unwrap();
        let u = eval_u(&table, &s, &grid, &policy, &c).unwrap();
        let w2 = eval_w(&table, &s, 1.0, 2, &grid, &policy, &c).unwrap();
        for (a, b) in u.u_values.iter().zip(&w2.u_values) {
            assert!(rel(a, b) < 1e-100);
        }
    }
}

#[test]
fn bending_clamped_moment_is_y() {
    let c = ctx();
    let s = spec(1.0);
    let traj = GevreyTrajectory::new(s, c).unwrap();
    let table = build_parametrization(&bending_moment_choice(10));
    let grid = [0.3, 2.5, 4.0];
    let moment = eval_w(
        &table,
        &s,
        0.0,
        2,
        &grid,
        &SummationPolicy::fixed(10).unwrap(),
        &c,
    )
    .unwrap();
    for (i, &t) in grid.iter().enumerate() {
        assert_eq!(moment.u_values[i], traj.value(t));
        assert!(moment.term_log[i][1..].iter().all(Float::is_zero));
    }
}

#[test]
fn least_term_steady_states_and_degenerate_times() {
    let c = ctx();
    let r = eval_u_least_term(&spec(1.0), &[-0.5, 0.0, 5.0, 9.0], 40, &c).unwrap();
    assert_eq!(r.values_f64(), vec![0.0, 0.0, 1.0, 1.0]);
    assert_eq!(r.n_t, vec![2, 2, 2, 2]);
    assert!(eval_u_least_term(&spec(1.0), &[1.0], 2, &c).is_err());
}

#[test]
fn least_term_inside_window() {
    let c = ctx();
    let r = eval_u_least_term(&spec(1.0), &[1.0, 2.0, 3.0, 4.0], 40, &c).unwrap();
    for i in 0..4 {
        assert!(r.n_t[i] >= 2 && r.n_t[i] < 40, "t = {}", r.times[i]);
        assert!(!r.saturated[i]);
        let logs = &r.term_log[i];
        assert!(logs[r.n_t[i] + 1] > logs[r.n_t[i]]);
    }
    // at the midpoint every even derivative of order >= 2 vanishes, so the
    // rule never fires and the sum is just mu_0/2 * y(T/2)
    let mid = eval_u_least_term(&spec(1.0), &[2.5], 40, &c).unwrap();
    assert!(mid.saturated[0]);
    assert_eq!(mid.n_t[0], 40);
    assert!((mid.u_values[0].to_f64() - 0.5).abs() < 1e-30);
}

#[test]
fn least_term_is_deterministic() {
    let c = ctx();
    let grid = uniform_grid(0.0, 5.0, 20);
    let a = eval_u_least_term(&spec(1.0), &grid, 30, &c).unwrap();
    let b = eval_u_least_term(&spec(1.0), &grid, 30, &c).unwrap();
    assert_eq!(a, b);
    assert_eq!(a.to_csv(17), b.to_csv(17));
}

#[test]
fn bending_deflection() {
    let c = ctx();
    let table = build_parametrization(&bending_moment_choice(12));
    let alpha1 = alpha_polynomial(&table, 1).unwrap();
    let expected = Rational::from((-1, 720)) + Rational::from((1, 36));
    assert_eq!(alpha1.eval(&Rational::from(1)), expected);
    let coeffs = deflection_coefficients(&table, 1.0, 0, &c).unwrap();
    assert!(rel(&coeffs[1], &Float::with_val(512, &expected)) < 1e-100);

    let policy = SummationPolicy::least_term(12).unwrap();
    let r = eval_w_bending(&table, &spec(1.0), 1.0, &[5.0, 6.0], &policy, &c).unwrap();
    assert_eq!(r.values_f64(), vec![0.5, 0.5]);
    let grid = uniform_grid(0.0, 5.0, 8);
    let r = eval_w_bending(&table, &spec(1.0), 0.0, &grid, &policy, &c).unwrap();
    assert!(r.u_values.iter().all(Float::is_zero));
    assert!(deflection_coefficients(&table, 1.5, 0, &c).is_err());
}

#[test]
fn table_order_must_cover_policy() {
    let table = build_parametrization(&bending_moment_choice(5));
    let policy = SummationPolicy::fixed(8).unwrap();
    assert!(eval_u(&table, &spec(1.0), &[1.0], &policy, &ctx()).is_err());
    let short = [f(1.0), f(2.0)];
    let traj = GevreyTrajectory::new(spec(1.0), ctx()).unwrap();
    assert!(matches!(
        eval_series(&short, &traj, &[1.0], &policy),
        Err(Error::LengthMismatch { .. })
    ));
}

#[test]
fn divergence_off_center() {
    let c = ctx();
    let r = divergence_report(&spec(1.0), 2.0, 40, &c).unwrap();
    assert!(r.decreases_then_increases());
    let onset = r.increasing_from.unwrap();
    assert!(onset < 30);
    assert!(r.growth_index.unwrap() >= 2);
    assert!(r.magnitudes[40] > Float::with_val(64, 1e30));
}

#[test]
fn divergence_constant_trajectory() {
    let s = TrajectorySpec::new(5.0, 1.1, 0.7, 0.7).unwrap();
    let r = divergence_report(&s, 2.0, 10, &ctx()).unwrap();
    assert!(r.magnitudes[1..].iter().all(Float::is_zero));
    assert!(!r.decreases_then_increases());
    assert!(divergence_report(&s, 2.0, 4, &ctx()).is_err());
}

#[test]
fn longer_transition_delays_growth() {
    let c = ctx();
    let short = divergence_report(&spec(1.0), 2.0, 40, &c).unwrap();
    let long = divergence_report(
        &TrajectorySpec::new(10.0, 1.1, 0.0, 1.0).unwrap(),
        4.0,
        40,
        &c,
    )
    .unwrap();
    assert!(long.growth_index.unwrap() > short.growth_index.unwrap());
    assert!(long.increasing_from.unwrap() > short.increasing_from.unwrap());
}

#[test]
fn csv_layout() {
    let c = ctx();
    let r = eval_u_least_term(&spec(1.0), &[0.0, 2.0, 5.0], 10, &c).unwrap();
    let csv = r.to_csv(6);
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "t,u,n_t");
    assert_eq!(lines[1], "0,0,2");
    assert_eq!(lines[3], "5.00000e0,1.00000e0,2");
    let log = r.term_log_csv(4);
    assert!(log.starts_with("t,k,magnitude\n0,0,0\n2.000e0,0,"));
    assert_eq!(log.lines().count(), 1 + 1 + 11 + 1);
    let d = divergence_report(&spec(1.0), 2.0, 10, &c).unwrap();
    assert!(d.to_csv(3).contains(",growth"));
}

#[test]
fn grids() {
    let g = uniform_grid(0.0, 5.0, 4);
    assert_eq!(g, vec![0.0, 1.25, 2.5, 3.75, 5.0]);
    assert_eq!(time_grid(5.0, 1e-3).unwrap().len(), 5001);
    assert_eq!(*time_grid(5.0, 1e-3).unwrap().last().unwrap(), 5.0);
    assert!(time_grid(0.0, 1e-3).is_err());
    assert!(time_grid(5.0, -1.0).is_err());
}

#[test]
fn huge_magnitudes_keep_their_exponent() {
    let big = Float::with_val(128, Float::i_exp(1, 2000));
    let s = format_float(&big, 3);
    assert!(s.contains('e'), "{s}");
    assert_eq!(format_float(&f(0.0), 3), "0");
    assert_eq!(format_float(&f(0.5), 3), "5.00e-1");
}

#[test]
fn shared_pass_matches_separate_series() {
    let ctx = PrecisionContext::new(256).unwrap();
    let spec = TrajectorySpec::new(5.0, 1.1, 0.0, 1.0).unwrap();
    let table = build_parametrization(&bending_moment_choice(12));
    let policy = SummationPolicy::least_term(12).unwrap();
    let traj = GevreyTrajectory::new(spec, ctx).unwrap();
    let grid = [-0.5, 0.0, 0.75, 2.0, 3.25, 5.0, 6.0];
    let u = input_coefficients(&table, &ctx);
    let w = deflection_coefficients(&table, 0.5, 0, &ctx).unwrap();
    let both = eval_series_many(&[&u, &w], &traj, &grid, &policy).unwrap();
    assert_eq!(both[0], eval_series(&u, &traj, &grid, &policy).unwrap());
    assert_eq!(both[1], eval_series(&w, &traj, &grid, &policy).unwrap());
}
