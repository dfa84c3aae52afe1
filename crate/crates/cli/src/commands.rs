//! Subcommand bodies. Each takes a validated [`RunConfig`] and returns plain data;
//! rendering lives in [`crate::output`].

use cvqkd::finite_size::{
    asymptotic_key_rate, expected_key_rate, optimize_asymptotic, optimize_modulation,
};
use cvqkd::oracle::{run_suite, BoundCheckReport, Verdict};
use cvqkd::sim::{run_batch, TrialConfig, TrialRecord};
use cvqkd::stats::Frequency;
use cvqkd::{ChannelModel, Modulation, PeThresholds};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{config_error, RunConfig};
use crate::CliError;

/// One key-rate evaluation: a keyrate result or a sweep cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KeyRateRow {
    pub distance_km: Option<f64>,
    pub transmittance: f64,
    pub n: u64,
    pub v_opt: f64,
    pub rate: f64,
    pub key_length: u64,
    pub unfloored_rate: f64,
    pub mutual_information: f64,
    pub holevo: f64,
    pub entropy_term: f64,
    pub holevo_term: f64,
    pub leak_ec: f64,
    pub delta_aep: f64,
    pub delta_ent: f64,
    pub pa_term: f64,
    pub sigma_a_max: f64,
    pub sigma_b_max: f64,
    pub sigma_c_min: f64,
    pub asymptotic_rate: f64,
    pub asymptotic_v_opt: f64,
    pub abort_reason: Option<String>,
}

fn rate_row(cfg: &RunConfig, distance_km: Option<f64>, n: u64) -> Result<KeyRateRow, CliError> {
    let ch = cfg.channel_at(distance_km)?;
    let params = cfg.params(n)?;
    let budget = cfg.budget()?;
    let search = cfg.search()?;
    let p = &cfg.protocol;
    let (report, (v_asym, r_asym)) = match p.modulation_variance {
        Some(v) => {
            let m = Modulation::new(v).map_err(config_error)?;
            let report = expected_key_rate(&ch, &m, &params, &budget)?;
            (
                report,
                (v, asymptotic_key_rate(&ch, &m, p.beta, p.eps_rob)?),
            )
        }
        None => {
            let (_, report) = optimize_modulation(&ch, &params, &budget, &search)?;
            (
                report,
                optimize_asymptotic(&ch, p.beta, p.eps_rob, &search)?,
            )
        }
    };
    let b = report.breakdown;
    Ok(KeyRateRow {
        distance_km: if cfg.channel.transmittance.is_some() {
            None
        } else {
            distance_km
        },
        transmittance: ch.transmittance(),
        n,
        v_opt: report.modulation_variance,
        rate: report.rate,
        key_length: report.key_length,
        unfloored_rate: report.unfloored_rate,
        mutual_information: report.mutual_information,
        holevo: report.holevo,
        entropy_term: b.entropy_term,
        holevo_term: b.holevo_term,
        leak_ec: b.leak_ec,
        delta_aep: b.delta_aep,
        delta_ent: b.delta_ent,
        pa_term: b.pa_term,
        sigma_a_max: report.thresholds.sigma_a_max,
        sigma_b_max: report.thresholds.sigma_b_max,
        sigma_c_min: report.thresholds.sigma_c_min,
        asymptotic_rate: r_asym,
        asymptotic_v_opt: v_asym,
        abort_reason: report.abort_reason,
    })
}

/// Key rate at the configured distance (or transmittance) and block size.
pub fn cmd_keyrate(cfg: &RunConfig) -> Result<KeyRateRow, CliError> {
    cfg.validate_rate_inputs()?;
    let n = cfg.require_n()?;
    cfg.channel_at(cfg.channel.distance_km)?;
    rate_row(cfg, cfg.channel.distance_km, n)
}

/// One row per `(distance, n)`, distance-major, each with its own optimised `V`.
pub fn cmd_sweep(cfg: &RunConfig) -> Result<Vec<KeyRateRow>, CliError> {
    cfg.validate_rate_inputs()?;
    let s = &cfg.sweep;
    if s.n_values.is_empty() {
        return Err(CliError::Config("sweep.n_values is empty".into()));
    }
    let distances: Vec<Option<f64>> = if cfg.channel.transmittance.is_some() {
        vec![None]
    } else if s.distances_km.is_empty() {
        return Err(CliError::Config("sweep.distances_km is empty".into()));
    } else {
        s.distances_km.iter().map(|&d| Some(d)).collect()
    };
    for &d in &distances {
        cfg.channel_at(d)?;
    }
    for &n in &s.n_values {
        cfg.params(n)?;
    }
    let cells: Vec<(Option<f64>, u64)> = distances
        .iter()
        .flat_map(|&d| s.n_values.iter().map(move |&n| (d, n)))
        .collect();
    cells
        .par_iter()
        .map(|&(d, n)| rate_row(cfg, d, n))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationSummary {
    pub trials: u64,
    pub n: u64,
    pub seed: u64,
    pub modulation_variance: f64,
    pub transmittance: f64,
    pub excess_noise: f64,
    pub thresholds: PeThresholds,
    pub aborts: u64,
    pub pe_failures: u64,
    pub ec_failures: u64,
    /// Abort frequency on this channel.
    pub robustness: f64,
    pub robustness_std_error: f64,
    pub mean_empirical_entropy: f64,
    pub mean_key_length: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Simulation {
    pub records: Vec<TrialRecord>,
    pub summary: SimulationSummary,
}

/// Modulation variance for simulation: the configured value, else the asymptotic optimum.
fn simulation_modulation(cfg: &RunConfig, ch: &ChannelModel) -> Result<Modulation, CliError> {
    let v = match cfg.protocol.modulation_variance {
        Some(v) => v,
        None => optimize_asymptotic(ch, cfg.protocol.beta, cfg.protocol.eps_rob, &cfg.search()?)?.0,
    };
    Modulation::new(v).map_err(config_error)
}

pub fn simulation_config(cfg: &RunConfig) -> Result<TrialConfig, CliError> {
    let sim = &cfg.simulate;
    if sim.trials == 0 {
        return Err(CliError::Config(
            "simulate.trials must be at least 1".into(),
        ));
    }
    let ch = cfg.channel_at(cfg.channel.distance_km)?;
    let params = cfg.params(sim.n)?;
    let budget = cfg.budget()?;
    let m = simulation_modulation(cfg, &ch)?;
    let mut tc = TrialConfig::honest(
        sim.n,
        params.d,
        m,
        ch,
        params.beta,
        budget,
        params.threshold_sigma,
        cfg.seed,
    )
    .map_err(config_error)?;
    tc.corrupt_symbols = sim.corrupt_symbols;
    tc.validate().map_err(config_error)?;
    Ok(tc)
}

pub fn cmd_simulate(cfg: &RunConfig) -> Result<Simulation, CliError> {
    let tc = simulation_config(cfg)?;
    let trials = cfg.simulate.trials;
    let outcomes = run_batch(&tc, trials as usize)?;
    let count = |f: &dyn Fn(&cvqkd::sim::TrialOutcome) -> bool| {
        outcomes.iter().filter(|o| f(o)).count() as u64
    };
    let aborts = count(&|o| o.aborted());
    let freq = Frequency::new(aborts, trials);
    let t = trials as f64;
    let summary = SimulationSummary {
        trials,
        n: tc.n,
        seed: tc.seed,
        modulation_variance: tc.modulation.variance(),
        transmittance: tc.channel.transmittance(),
        excess_noise: tc.channel.excess_noise(),
        thresholds: tc.thresholds,
        aborts,
        pe_failures: count(&|o| !o.passed_pe),
        ec_failures: count(&|o| !o.passed_ec),
        robustness: freq.frequency,
        robustness_std_error: freq.std_error,
        mean_empirical_entropy: outcomes.iter().map(|o| o.empirical_entropy).sum::<f64>() / t,
        mean_key_length: outcomes.iter().map(|o| o.key_length as f64).sum::<f64>() / t,
    };
    Ok(Simulation {
        records: outcomes.iter().map(|o| o.record()).collect(),
        summary,
    })
}

/// Runs the selected concentration checks, judged against `bound_scale × bound`.
pub fn cmd_verify_bounds(cfg: &RunConfig) -> Result<Vec<BoundCheckReport>, CliError> {
    let v = &cfg.verify;
    let suites = v.suites()?;
    if v.trials == 0 {
        return Err(CliError::Config("verify.trials must be at least 1".into()));
    }
    if !(v.bound_scale > 0.0 && v.bound_scale.is_finite()) {
        return Err(CliError::Config(format!(
            "verify.bound_scale must be positive, got {}",
            v.bound_scale
        )));
    }
    if let Some(e) = v.eps_values.iter().find(|e| !(**e > 0.0 && **e < 1.0)) {
        return Err(CliError::Config(format!(
            "verify.eps_values entries must lie in (0, 1), got {e}"
        )));
    }
    let reports = run_suite(&suites, &v.eps_values, v.trials, cfg.seed).map_err(|e| match e {
        cvqkd::Error::Configuration(_) => config_error(e),
        e => CliError::Core(e),
    })?;
    Ok(reports.iter().map(|r| r.rescaled(v.bound_scale)).collect())
}

pub fn any_violated(reports: &[BoundCheckReport]) -> bool {
    reports.iter().any(|r| r.verdict == Verdict::Violated)
}
