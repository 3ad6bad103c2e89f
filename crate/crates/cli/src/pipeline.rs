use std::path::Path;

use beamflat::exactseq::parse_rational;
use beamflat::feedforward::{SummationMode, DEFAULT_EPS_TAIL};
use serde::Serialize;

use crate::commands::{
    build_and_verify, run_plan, run_simulate, sequences_csv, NumberFormat, PlanMeta, PlanParams,
    SimParams, SimReport, TableSource, Which, PLAN_FILE,
};
use crate::config::RunConfig;
use crate::error::{CliError, CliResult, StageExt};
use crate::files;

#[derive(Debug, Clone, Serialize)]
pub struct RunSummary {
    #[serde(rename = "T")]
    pub duration: f64,
    pub mode: String,
    pub samples: usize,
    pub saturated_samples: usize,
    pub final_profile_error_inf: f64,
    pub moment_tracking_error_inf: f64,
}

impl RunSummary {
    fn new(meta: &PlanMeta, sim: &SimReport) -> Self {
        Self {
            duration: meta.duration,
            mode: meta.mode.clone(),
            samples: meta.samples,
            saturated_samples: meta.saturated_samples,
            final_profile_error_inf: sim.metrics.final_profile_error_inf,
            moment_tracking_error_inf: sim.metrics.moment_tracking_error_inf,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct PipelineSummary {
    pub table: String,
    #[serde(rename = "K")]
    pub order: usize,
    pub verification: String,
    pub sigma: f64,
    pub primary: RunSummary,
    pub compare: RunSummary,
    /// Moment tracking error of the longer transition divided by that of
    /// the shorter one.
    pub tracking_ratio_long_over_short: f64,
}

fn table_source(cfg: &RunConfig) -> CliResult<TableSource> {
    match cfg.raw("table") {
        Some("bending") => Ok(TableSource::Bending),
        Some("flat") => {
            let c00 = parse_rational(cfg.raw("c00").unwrap_or_default())?;
            Ok(TableSource::Flat(c00))
        }
        Some(other) => Ok(TableSource::File(other.into())),
        None => Err(CliError::validation("missing config key `table`")),
    }
}

fn plan_params(cfg: &RunConfig, duration: f64) -> CliResult<PlanParams> {
    let mode: SummationMode = cfg.require("mode")?;
    let dt = cfg.get_or("dt", 1e-3)?;
    Ok(PlanParams {
        sigma: cfg.require("sigma")?,
        duration,
        y_start: cfg.require("y_start")?,
        y_end: cfg.require("y_end")?,
        mode: Some(mode),
        k_max: cfg.get("K_max")?,
        eps_tail: cfg.get_or("eps_tail", DEFAULT_EPS_TAIL)?,
        dt,
        t_end: cfg.get::<f64>("t_end")?.map(|t| t.max(duration)),
        precision_digits: cfg.get("precision_digits")?,
        digits: cfg.get_or("digits", 17)?,
    })
}

fn sim_params(cfg: &RunConfig) -> CliResult<SimParams> {
    Ok(SimParams {
        intervals: cfg.get_or("N", beamflat::beamsim::DEFAULT_INTERVALS)?,
        dt: match cfg.get::<f64>("sim_dt")? {
            Some(dt) => Some(dt),
            None => cfg.get("dt")?,
        },
        digits: cfg.get_or("digits", 17)?,
    })
}

/// Runs every stage into `out`:
/// `sequences/`, `table.json`, `verification.txt`, `primary/`, `compare/`
/// and `summary.json`.
pub fn run_pipeline(cfg: &RunConfig, out: &Path) -> CliResult<PipelineSummary> {
    cfg.check_complete()?;
    let order: usize = cfg.require("K")?;
    let duration: f64 = cfg.require("T")?;
    let compare_duration: f64 = cfg.get_or("compare_T", 10.0)?;
    let digits: usize = cfg.get_or("digits", 17)?;
    let source = table_source(cfg)?;
    let primary_params = plan_params(cfg, duration)?;
    let compare_params = plan_params(cfg, compare_duration)?;
    let sim = sim_params(cfg)?;
    primary_params.validate()?;
    compare_params.validate()?;
    sim.validate()?;
    if let Some(k_max) = primary_params.k_max.filter(|k| *k > order) {
        return Err(CliError::validation(format!(
            "K_max = {k_max} exceeds the table order K = {order}"
        )));
    }

    (|| -> CliResult<()> {
        for (which, name) in [
            (Which::Eta, "eta"),
            (Which::Mu, "mu"),
            (Which::Bernoulli, "bernoulli"),
            (Which::Euler, "euler"),
        ] {
            let csv = sequences_csv(which, order, NumberFormat::Exact, digits);
            files::write(&out.join("sequences").join(format!("{name}.csv")), &csv)?;
        }
        Ok(())
    })()
    .stage("sequences")?;

    let (table, report) = (|| -> CliResult<_> {
        let (table, report) = build_and_verify(&source, Some(order))?;
        let mut json = table.to_json_string();
        json.push('\n');
        files::write(&out.join("table.json"), &json)?;
        files::write(
            &out.join("verification.txt"),
            &format!("{}\n", report.summary()),
        )?;
        if !report.passed() {
            return Err(CliError::Compute(report.summary()));
        }
        Ok((table, report))
    })()
    .stage("build")?;

    let primary_dir = out.join("primary");
    let primary_meta = run_plan(&table, &primary_params, &primary_dir).stage("plan")?;
    let primary_sim =
        run_simulate(&primary_dir.join(PLAN_FILE), &sim, &primary_dir).stage("simulate")?;

    let compare_dir = out.join("compare");
    let compare_meta = run_plan(&table, &compare_params, &compare_dir).stage("compare plan")?;
    let compare_sim =
        run_simulate(&compare_dir.join(PLAN_FILE), &sim, &compare_dir).stage("compare simulate")?;

    let primary = RunSummary::new(&primary_meta, &primary_sim);
    let compare = RunSummary::new(&compare_meta, &compare_sim);
    let (short, long) = if duration <= compare_duration {
        (&primary, &compare)
    } else {
        (&compare, &primary)
    };
    let summary = PipelineSummary {
        table: primary_meta.table_kind.clone(),
        order,
        verification: report.summary(),
        sigma: primary_params.sigma,
        tracking_ratio_long_over_short: long.moment_tracking_error_inf
            / short.moment_tracking_error_inf,
        primary,
        compare,
    };
    files::write_json(&out.join("summary.json"), &summary).stage("summary")?;
    Ok(summary)
}
