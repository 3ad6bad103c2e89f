use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use beamflat::beamsim::{
    simulate, transition_error, BeamGrid, InputSignal, SimConfig, SimState, TransitionMetrics,
};
use beamflat::exactseq::{
    bernoulli_numbers, eta_closed_form, eta_recursive, euler_numbers, format_rational,
    mu_closed_form, mu_recursive, parse_rational, rational_to_decimal, RationalSeq,
};
use beamflat::feedforward::{
    deflection_coefficients, eval_series_many, input_coefficients, time_grid, SummationMode,
    SummationPolicy, DEFAULT_K_MAX,
};
use beamflat::gevrey::{GevreyTrajectory, PrecisionContext, TrajectorySpec};
use beamflat::paramgen::{
    bending_moment_choice, build_parametrization, classify, flat_choice, steady_state_profile,
    verify_formal_solution, Ck0Sequence, CoefficientTable, SpatialPolynomial, TableKind,
    VerificationReport,
};
use beamflat::{Float, Rational};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};
use crate::files;

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Which {
    Eta,
    Mu,
    Bernoulli,
    Euler,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum NumberFormat {
    Exact,
    Decimal,
}

/// `k,value` rows; `eta` and `mu` add the recursive minus closed-form
/// difference. Bernoulli rows run over `B_0..=B_K`, Euler rows over
/// `E_0, E_2, ..., E_2K` and are labelled by the actual index.
pub fn sequences_csv(which: Which, k: usize, format: NumberFormat, digits: usize) -> String {
    let render = |x: &Rational| match format {
        NumberFormat::Exact => format_rational(x),
        NumberFormat::Decimal => rational_to_decimal(x, digits),
    };
    let (values, closed, index_step): (RationalSeq, Option<RationalSeq>, usize) = match which {
        Which::Eta => (eta_recursive(k), Some(eta_closed_form(k)), 1),
        Which::Mu => (mu_recursive(k), Some(mu_closed_form(k)), 1),
        Which::Bernoulli => (bernoulli_numbers(k), None, 1),
        Which::Euler => (euler_numbers(k), None, 2),
    };
    let mut out = String::from("k,value");
    if closed.is_some() {
        out.push_str(",closed_form_discrepancy");
    }
    out.push('\n');
    for (i, v) in values.iter().enumerate() {
        let _ = write!(out, "{},{}", i * index_step, render(v));
        if let Some(c) = &closed {
            let _ = write!(out, ",{}", render(&Rational::from(v - &c[i])));
        }
        out.push('\n');
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub enum TableSource {
    Flat(Rational),
    Bending,
    File(PathBuf),
}

/// `[c_00, c_10, ...]` as `"p/q"` strings or integers.
pub fn parse_ck0_json(text: &str) -> CliResult<Ck0Sequence> {
    let value: serde_json::Value = serde_json::from_str(text)
        .map_err(|e| CliError::validation(format!("sequence file is not JSON: {e}")))?;
    let items = value
        .as_array()
        .ok_or_else(|| CliError::validation("sequence file must hold a JSON array"))?;
    if items.is_empty() {
        return Err(CliError::validation("sequence file is empty"));
    }
    let values = items
        .iter()
        .enumerate()
        .map(|(k, item)| match item {
            serde_json::Value::String(s) => Ok(parse_rational(s)?),
            serde_json::Value::Number(n) if n.is_i64() => Ok(Rational::from(n.as_i64().unwrap())),
            other => Err(CliError::validation(format!(
                "entry {k}: expected \"p/q\" or an integer, got {other}"
            ))),
        })
        .collect::<CliResult<Vec<Rational>>>()?;
    Ok(Ck0Sequence::new(values))
}

pub fn build_table(source: &TableSource, k: Option<usize>) -> CliResult<CoefficientTable> {
    let seq = match source {
        TableSource::Flat(c00) => flat_choice(c00, k.unwrap_or(DEFAULT_K_MAX)),
        TableSource::Bending => bending_moment_choice(k.unwrap_or(DEFAULT_K_MAX)),
        TableSource::File(path) => {
            let seq = parse_ck0_json(&files::read(path)?)?;
            match k {
                Some(k) if k > seq.order() => {
                    return Err(CliError::validation(format!(
                        "K = {k} exceeds the {} entries in {}",
                        seq.order() + 1,
                        path.display()
                    )))
                }
                Some(k) => Ck0Sequence::new(seq.as_slice()[..=k].to_vec()),
                None => seq,
            }
        }
    };
    Ok(build_parametrization(&seq))
}

/// Table JSON plus its exact verification; fails with a computation error
/// if any residual is nonzero.
pub fn build_and_verify(
    source: &TableSource,
    k: Option<usize>,
) -> CliResult<(CoefficientTable, VerificationReport)> {
    let table = build_table(source, k)?;
    let report = verify_formal_solution(&table);
    Ok((table, report))
}

pub fn table_kind_name(kind: &TableKind) -> &'static str {
    match kind {
        TableKind::BendingMoment => "bending",
        TableKind::Flat { .. } => "flat",
        TableKind::General => "general",
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlanParams {
    pub sigma: f64,
    pub duration: f64,
    pub y_start: f64,
    pub y_end: f64,
    pub mode: Option<SummationMode>,
    pub k_max: Option<usize>,
    pub eps_tail: f64,
    pub dt: f64,
    pub t_end: Option<f64>,
    pub precision_digits: Option<u32>,
    pub digits: usize,
}

impl PlanParams {
    /// Checks everything that does not depend on the table.
    pub fn validate(&self) -> CliResult<()> {
        TrajectorySpec::new(self.duration, self.sigma, self.y_start, self.y_end)?;
        if let Some(d) = self.precision_digits {
            PrecisionContext::for_decimal_digits(d)?;
        }
        SummationPolicy::new(
            self.mode.unwrap_or(SummationMode::TailEpsilon),
            self.k_max.unwrap_or(DEFAULT_K_MAX),
            self.eps_tail,
        )?;
        plan_grid(self.duration, self.dt, self.t_end.unwrap_or(self.duration))?;
        Ok(())
    }
}

/// Everything `simulate` needs besides the plan itself.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanMeta {
    pub table_kind: String,
    pub sigma: f64,
    #[serde(rename = "T")]
    pub duration: f64,
    pub y_start: f64,
    pub y_end: f64,
    pub mode: String,
    #[serde(rename = "K_max")]
    pub k_max: usize,
    pub eps_tail: f64,
    pub dt: f64,
    pub t_end: f64,
    pub precision_bits: u32,
    pub samples: usize,
    pub saturated_samples: usize,
    pub reference_file: String,
    pub initial_profile: serde_json::Value,
    pub target_profile: serde_json::Value,
}

pub const PLAN_FILE: &str = "plan.csv";
pub const TERMS_FILE: &str = "terms.csv";
pub const REFERENCE_FILE: &str = "reference.csv";
pub const META_FILE: &str = "plan.meta.json";

fn exact(x: f64, name: &str) -> CliResult<Rational> {
    Rational::from_f64(x).ok_or_else(|| CliError::validation(format!("{name} must be finite")))
}

fn plan_grid(duration: f64, dt: f64, t_end: f64) -> CliResult<Vec<f64>> {
    let mut grid = time_grid(duration, dt)?;
    if t_end < duration {
        return Err(CliError::validation(format!(
            "t_end = {t_end} is before T = {duration}"
        )));
    }
    let extra = ((t_end - duration) / dt).round() as usize;
    grid.extend((1..=extra).map(|i| duration + i as f64 * dt));
    Ok(grid)
}

/// Writes `plan.csv`, `terms.csv`, `reference.csv` and `plan.meta.json`
/// into `out` and returns the metadata.
pub fn run_plan(table: &CoefficientTable, p: &PlanParams, out: &Path) -> CliResult<PlanMeta> {
    let spec = TrajectorySpec::new(p.duration, p.sigma, p.y_start, p.y_end)?;
    let ctx = match p.precision_digits {
        Some(d) => PrecisionContext::for_decimal_digits(d)?,
        None => PrecisionContext::default(),
    };
    let kind = classify(table);
    let mode = p.mode.unwrap_or(match kind {
        TableKind::BendingMoment => SummationMode::LeastTerm,
        _ => SummationMode::TailEpsilon,
    });
    if mode == SummationMode::LeastTerm && kind != TableKind::BendingMoment {
        eprintln!(
            "warning: least_term summation requested for a {} table; it is meant for the \
             divergent bending-moment series",
            table_kind_name(&kind)
        );
    }
    let k_max = p.k_max.unwrap_or(DEFAULT_K_MAX.min(table.order()));
    let policy = SummationPolicy::new(mode, k_max, p.eps_tail)?;
    if table.order() < k_max {
        return Err(CliError::validation(format!(
            "K_max = {k_max} exceeds the table order {}",
            table.order()
        )));
    }
    let t_end = p.t_end.unwrap_or(p.duration);
    let grid = plan_grid(p.duration, p.dt, t_end)?;

    let traj = GevreyTrajectory::new(spec, ctx)?;
    let u_coeffs = input_coefficients(table, &ctx);
    let moment_coeffs = deflection_coefficients(table, 0.0, 2, &ctx)?;
    let mut series = eval_series_many(&[&u_coeffs, &moment_coeffs], &traj, &grid, &policy)?;
    let reference = series.pop().expect("two series");
    let plan = series.pop().expect("two series");
    if let Some(i) = plan
        .u_values
        .iter()
        .chain(&reference.u_values)
        .position(|u: &Float| !u.to_f64().is_finite())
    {
        return Err(CliError::Compute(format!(
            "series value at sample {} overflows f64",
            i % grid.len()
        )));
    }
    let saturated = plan.saturated.iter().filter(|s| **s).count();
    if saturated > 0 {
        eprintln!(
            "note: summation reached K_max = {k_max} without stopping at {saturated} of {} samples",
            grid.len()
        );
    }

    let mut reference_csv = String::from("t,y_ref\n");
    for (t, y) in reference.times.iter().zip(&reference.u_values) {
        let _ = writeln!(
            reference_csv,
            "{},{}",
            beamflat::format_f64(*t, p.digits),
            beamflat::format_f64(y.to_f64(), p.digits)
        );
    }
    let meta = PlanMeta {
        table_kind: table_kind_name(&kind).to_string(),
        sigma: p.sigma,
        duration: p.duration,
        y_start: p.y_start,
        y_end: p.y_end,
        mode: mode.name().to_string(),
        k_max,
        eps_tail: p.eps_tail,
        dt: p.dt,
        t_end,
        precision_bits: ctx.bits(),
        samples: grid.len(),
        saturated_samples: saturated,
        reference_file: REFERENCE_FILE.to_string(),
        initial_profile: steady_state_profile(table, &exact(p.y_start, "y_start")?).to_json(),
        target_profile: steady_state_profile(table, &exact(p.y_end, "y_end")?).to_json(),
    };
    files::write(&out.join(PLAN_FILE), &plan.to_csv(p.digits))?;
    files::write(&out.join(TERMS_FILE), &plan.term_log_csv(p.digits))?;
    files::write(&out.join(REFERENCE_FILE), &reference_csv)?;
    files::write_json(&out.join(META_FILE), &meta)?;
    Ok(meta)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimParams {
    pub intervals: usize,
    pub dt: Option<f64>,
    pub digits: usize,
}

impl Default for SimParams {
    fn default() -> Self {
        Self {
            intervals: beamflat::beamsim::DEFAULT_INTERVALS,
            dt: None,
            digits: 17,
        }
    }
}

impl SimParams {
    pub fn validate(&self) -> CliResult<()> {
        BeamGrid::new(self.intervals)?;
        if let Some(dt) = self.dt {
            SimConfig::new(dt)?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimReport {
    #[serde(rename = "N")]
    pub intervals: usize,
    pub dt: f64,
    #[serde(rename = "T")]
    pub duration: f64,
    pub steps: usize,
    #[serde(flatten)]
    pub metrics: TransitionMetrics,
}

fn signal(rows: &[Vec<f64>], what: &str) -> CliResult<InputSignal> {
    InputSignal::new(
        rows.iter().map(|r| r[0]).collect(),
        rows.iter().map(|r| r[1]).collect(),
    )
    .map_err(|e| CliError::validation(format!("{what}: {e}")))
}

fn polynomial(value: &serde_json::Value, what: &str) -> CliResult<SpatialPolynomial> {
    SpatialPolynomial::from_json(value)
        .map_err(|e| CliError::validation(format!("{what} in {META_FILE}: {e}")))
}

/// Simulates `plan` (a `t,u,...` CSV). If `plan.meta.json` sits next to it,
/// the initial state, target profile and moment reference come from there;
/// otherwise the beam starts at rest, the target is the static response to
/// the last input, and the moment is compared with the input itself.
pub fn run_simulate(plan: &Path, p: &SimParams, out: &Path) -> CliResult<SimReport> {
    let rows = files::read_numeric_csv(plan, &["t", "u"])?;
    let u = signal(&rows, &plan.display().to_string())?;
    let dir = plan.parent().unwrap_or(Path::new("."));
    let meta_path = dir.join(META_FILE);
    let meta: Option<PlanMeta> = if meta_path.exists() {
        let text = files::read(&meta_path)?;
        Some(
            serde_json::from_str(&text)
                .map_err(|e| CliError::validation(format!("{}: {e}", meta_path.display())))?,
        )
    } else {
        None
    };

    let t0 = u.start();
    let (duration, initial_profile, target, y_ref_signal) = match &meta {
        Some(m) => {
            let ref_rows = files::read_numeric_csv(&dir.join(&m.reference_file), &["t", "y_ref"])?;
            (
                m.duration,
                polynomial(&m.initial_profile, "initial_profile")?,
                polynomial(&m.target_profile, "target_profile")?,
                signal(&ref_rows, &m.reference_file)?,
            )
        }
        None => {
            let u_end = exact(*u.values().last().unwrap(), "u")?;
            (
                u.end() - t0,
                SpatialPolynomial::zero(),
                SpatialPolynomial::monomial(2, u_end / 2u32),
                u.clone(),
            )
        }
    };
    let dt = p.dt.unwrap_or(1e-3 * duration);
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(CliError::validation(format!(
            "dt must be positive, got {dt} (a zero-length plan needs an explicit --dt)"
        )));
    }
    let grid = BeamGrid::new(p.intervals)?;
    let cfg = SimConfig::new(dt)?.with_snapshot_limit(u.end() - t0);
    let prec = 128;
    let initial = SimState::from_profile(
        &grid,
        |z| {
            initial_profile
                .eval_float(&Float::with_val(prec, z))
                .to_f64()
        },
        t0,
    );
    let output = simulate(&u, &grid, &cfg, &initial)?;
    let y_ref: Vec<f64> = output.times.iter().map(|&t| y_ref_signal.at(t)).collect();
    let metrics = transition_error(&output, &target, t0 + duration, &y_ref)?;
    let report = SimReport {
        intervals: p.intervals,
        dt,
        duration,
        steps: output.times.len() - 1,
        metrics,
    };
    files::write(&out.join("snapshots.csv"), &output.snapshots_csv(p.digits))?;
    files::write(
        &out.join("moment.csv"),
        &output.moment_csv(&y_ref, p.digits)?,
    )?;
    files::write_json(&out.join("metrics.json"), &report)?;
    Ok(report)
}
