//! Seeded experiments: trial execution, complexity estimates and reports.
//!
//! Trial `i` draws solver randomness from stream `3i`, oracle noise from
//! `3i + 1` and certification samples from `3i + 2` of the configured base
//! seed, so results do not depend on how trials are scheduled across
//! threads.

mod agd;
mod config;

use std::fs;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use agd::{run_agd_experiment, AgdExperiment, AgdSummary};
pub use config::{ExperimentConfig, OracleConfig, SolverConfig};

use crate::base::RngStream;
use crate::certify::{approx_goldstein_distance, validate_certificate};
use crate::error::{Error, Result};
use crate::oracles::{CountingOracle, DeterministicOracle, StochasticOracle, SubGaussianOracle};
use crate::solvers::{
    ingd_deterministic, singd, singd_params, subgaussian_ingd, IngdParams, SolverReport,
    SubgParams,
};

/// Serializes with object keys sorted at every level, pretty-printed with
/// a trailing newline.
pub fn canonical_json<T: Serialize + ?Sized>(value: &T) -> Result<String> {
    fn sort(v: serde_json::Value) -> serde_json::Value {
        match v {
            serde_json::Value::Object(m) => {
                let mut entries: Vec<_> = m.into_iter().collect();
                entries.sort_by(|a, b| a.0.cmp(&b.0));
                serde_json::Value::Object(entries.into_iter().map(|(k, v)| (k, sort(v))).collect())
            }
            serde_json::Value::Array(a) => serde_json::Value::Array(a.into_iter().map(sort).collect()),
            other => other,
        }
    }
    let mut s = serde_json::to_string_pretty(&sort(serde_json::to_value(value)?))?;
    s.push('\n');
    Ok(s)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub trial: u64,
    /// The run certified (δ, ε)-stationarity of its output: either its own
    /// certificate validates, or (for solvers without one) the sampled
    /// Goldstein distance is at most ε.
    pub success: bool,
    /// Sampled `d(0, ∂_δ f(x))` at the output, for solvers without an
    /// exact certificate.
    pub goldstein_estimate: Option<f64>,
    pub report: SolverReport,
}

/// Oracle-call statistics over the trials of one experiment.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ComplexityEstimate {
    pub trials: u64,
    pub successes: u64,
    pub success_fraction: f64,
    /// Oracle calls of every trial, in trial order.
    pub calls: Vec<u64>,
    pub median_calls: f64,
    /// Nearest-rank 90th percentile of `calls`.
    pub p90_calls: u64,
    /// Smallest call count `t` such that at most a third of the trials fail
    /// to certify within `t` calls; `None` if more than a third fail.
    pub t_star: Option<u64>,
}

impl ComplexityEstimate {
    pub fn from_trials(records: &[TrialRecord]) -> Result<Self> {
        if records.is_empty() {
            return Err(Error::contract("no trials"));
        }
        let n = records.len();
        let calls: Vec<u64> = records.iter().map(|r| r.report.oracle_calls).collect();
        let mut sorted = calls.clone();
        sorted.sort_unstable();
        let median_calls = if n % 2 == 1 {
            sorted[n / 2] as f64
        } else {
            0.5 * (sorted[n / 2 - 1] as f64 + sorted[n / 2] as f64)
        };
        let p90_calls = sorted[(9 * n).div_ceil(10) - 1];
        let mut ok: Vec<u64> = records
            .iter()
            .filter(|r| r.success)
            .map(|r| r.report.oracle_calls)
            .collect();
        ok.sort_unstable();
        let needed = (2 * n).div_ceil(3);
        Ok(Self {
            trials: n as u64,
            successes: ok.len() as u64,
            success_fraction: ok.len() as f64 / n as f64,
            calls,
            median_calls,
            p90_calls,
            t_star: ok.get(needed - 1).copied(),
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentOutcome {
    pub estimate: ComplexityEstimate,
    pub trials: Vec<TrialRecord>,
}

fn counting<O>(o: O, limit: Option<u64>) -> CountingOracle<O> {
    match limit {
        Some(l) => CountingOracle::with_limit(o, l),
        None => CountingOracle::new(o),
    }
}

/// Runs trial `index` of `config`.
pub fn run_trial(config: &ExperimentConfig, index: u64) -> Result<TrialRecord> {
    let f = config.function()?;
    let class = *f.class_spec();
    let mut rng = RngStream::new(config.base_seed, 3 * index);
    let noise = RngStream::new(config.base_seed, 3 * index + 1);
    let mut cert_rng = RngStream::new(config.base_seed, 3 * index + 2);
    let x0 = &config.x0;
    let (delta, epsilon) = (config.solver.delta(), config.solver.epsilon());

    let report = match (&config.solver, &config.oracle) {
        (
            SolverConfig::Ingd {
                gamma,
                inner_k,
                outer_t,
                ..
            },
            _,
        ) => {
            let mut p = IngdParams::new(delta, epsilon, class.lipschitz, class.gap, *gamma)?;
            p.inner_k = inner_k.unwrap_or(p.inner_k);
            p.outer_t = outer_t.unwrap_or(p.outer_t);
            let mut o = counting(DeterministicOracle::new(f.clone()), config.max_calls);
            ingd_deterministic(&mut o, x0, &p, &mut rng)?
        }
        (SolverConfig::Singd { t, .. }, oracle) => {
            let mut p = singd_params(class.lipschitz, class.sigma(), epsilon, delta, class.gap)?;
            p.t = t.unwrap_or(p.t);
            if matches!(oracle, OracleConfig::Stochastic { .. }) {
                let mut o = CountingOracle::new(StochasticOracle::new(f.clone(), noise));
                singd(&mut o, x0, &p, &mut rng)?
            } else {
                let mut o = CountingOracle::new(DeterministicOracle::new(f.clone()));
                singd(&mut o, x0, &p, &mut rng)?
            }
        }
        (SolverConfig::Subg { gamma, .. }, oracle) => {
            let p = SubgParams::new(&class, delta, epsilon, *gamma)?;
            if matches!(oracle, OracleConfig::Subgaussian { .. }) {
                let mut o = counting(SubGaussianOracle::new(f.clone(), noise), config.max_calls);
                subgaussian_ingd(&mut o, x0, &p, &mut rng)?
            } else {
                let mut o = counting(DeterministicOracle::new(f.clone()), config.max_calls);
                subgaussian_ingd(&mut o, x0, &p, &mut rng)?
            }
        }
    };

    let (success, goldstein_estimate) = match (&report.certificate, &config.solver) {
        (Some(c), _) => (validate_certificate(c, epsilon).valid, None),
        (None, SolverConfig::Ingd { .. }) => (false, None),
        (None, _) => {
            let (d, _) = approx_goldstein_distance(
                &f,
                &report.final_point,
                delta,
                config.certify_samples,
                &mut cert_rng,
            )?;
            (d <= epsilon, Some(d))
        }
    };
    Ok(TrialRecord {
        trial: index,
        success,
        goldstein_estimate,
        report,
    })
}

fn thread_pool(jobs: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| Error::contract(format!("cannot start {jobs} worker threads: {e}")))
}

/// Runs every trial of `config` on `jobs` threads.
pub fn run_experiment(config: &ExperimentConfig, jobs: usize) -> Result<ExperimentOutcome> {
    config.validate()?;
    let trials = thread_pool(jobs)?.install(|| {
        (0..config.trials)
            .into_par_iter()
            .map(|i| run_trial(config, i))
            .collect::<Result<Vec<_>>>()
    })?;
    Ok(ExperimentOutcome {
        estimate: ComplexityEstimate::from_trials(&trials)?,
        trials,
    })
}

/// Writes `trial-NNNN/report.json` (and `cert.json` when there is a
/// certificate) per trial, plus `summary.json` and `summary.csv`.
pub fn write_experiment(
    config: &ExperimentConfig,
    outcome: &ExperimentOutcome,
    out: &Path,
) -> Result<()> {
    fs::create_dir_all(out)?;
    for t in &outcome.trials {
        let dir = out.join(format!("trial-{:04}", t.trial));
        fs::create_dir_all(&dir)?;
        fs::write(dir.join("report.json"), canonical_json(t)?)?;
        if let Some(c) = &t.report.certificate {
            fs::write(dir.join("cert.json"), canonical_json(c)?)?;
        }
    }
    #[derive(Serialize)]
    struct Summary<'a> {
        config: &'a ExperimentConfig,
        estimate: &'a ComplexityEstimate,
    }
    fs::write(
        out.join("summary.json"),
        canonical_json(&Summary {
            config,
            estimate: &outcome.estimate,
        })?,
    )?;
    fs::write(out.join("summary.csv"), trials_csv(&outcome.trials)?)?;
    Ok(())
}

fn csv_string<R: Serialize>(rows: impl IntoIterator<Item = R>) -> Result<String> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(Vec::new());
    for r in rows {
        w.serialize(r).map_err(|e| Error::contract(e.to_string()))?;
    }
    let bytes = w.into_inner().map_err(|e| Error::contract(e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("csv output is UTF-8"))
}

/// One row per trial.
pub fn trials_csv(trials: &[TrialRecord]) -> Result<String> {
    #[derive(Serialize)]
    struct Row<'a> {
        trial: u64,
        solver: &'a str,
        termination: &'a str,
        oracle_calls: u64,
        success: bool,
        goldstein_estimate: Option<f64>,
    }
    csv_string(trials.iter().map(|t| Row {
        trial: t.trial,
        solver: &t.report.solver,
        termination: match t.report.termination {
            crate::solvers::Termination::CertifiedStationary => "certified_stationary",
            crate::solvers::Termination::BudgetExhausted => "budget_exhausted",
            crate::solvers::Termination::DescentBudgetExceeded => "descent_budget_exceeded",
        },
        oracle_calls: t.report.oracle_calls,
        success: t.success,
        goldstein_estimate: t.goldstein_estimate,
    }))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScalingRow {
    pub epsilon: f64,
    pub delta: f64,
    pub median_calls: f64,
    pub p90_calls: u64,
    pub success_frac: f64,
}

/// Runs `template` at every `(ε, δ)` of the grids (ε-major order).
pub fn run_scaling(
    template: &ExperimentConfig,
    epsilons: &[f64],
    deltas: &[f64],
    jobs: usize,
) -> Result<Vec<ScalingRow>> {
    if epsilons.is_empty() || deltas.is_empty() {
        return Err(Error::contract("scaling grids must be nonempty"));
    }
    let mut rows = Vec::with_capacity(epsilons.len() * deltas.len());
    for &epsilon in epsilons {
        for &delta in deltas {
            let mut cfg = template.clone();
            cfg.solver = cfg.solver.with_tolerances(delta, epsilon);
            let est = run_experiment(&cfg, jobs)?.estimate;
            rows.push(ScalingRow {
                epsilon,
                delta,
                median_calls: est.median_calls,
                p90_calls: est.p90_calls,
                success_frac: est.success_fraction,
            });
        }
    }
    Ok(rows)
}

/// `epsilon,delta,median_calls,p90_calls,success_frac`, LF line endings.
pub fn scaling_csv(rows: &[ScalingRow]) -> Result<String> {
    csv_string(rows)
}

/// Least-squares slope of `ln y` against `ln x`.
pub fn log_log_slope(xs: &[f64], ys: &[f64]) -> Result<f64> {
    if xs.len() != ys.len() || xs.len() < 2 {
        return Err(Error::contract("need at least two matching points"));
    }
    if xs.iter().chain(ys).any(|v| !(*v > 0.0)) {
        return Err(Error::contract("log-log fit needs positive data"));
    }
    let lx: Vec<f64> = xs.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|v| v.ln()).collect();
    let n = lx.len() as f64;
    let (mx, my) = (lx.iter().sum::<f64>() / n, ly.iter().sum::<f64>() / n);
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = lx.iter().map(|x| (x - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::contract("x values must not all coincide"));
    }
    Ok(sxy / sxx)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn abs_config(trials: u64) -> ExperimentConfig {
        ExperimentConfig::from_json(&format!(
            r#"{{"objective": {{"kind": "abs"}}, "x0": [1.0], "trials": {trials},
               "solver": {{"kind": "ingd", "delta": 0.3, "epsilon": 0.1}}}}"#
        ))
        .unwrap()
    }

    #[test]
    fn canonical_json_sorts_keys() {
        let v = serde_json::json!({"b": 1, "a": {"d": 2, "c": 3}});
        assert_eq!(
            canonical_json(&v).unwrap(),
            "{\n  \"a\": {\n    \"c\": 3,\n    \"d\": 2\n  },\n  \"b\": 1\n}\n"
        );
    }

    #[test]
    fn single_ingd_trial_certifies() {
        let out = run_experiment(&abs_config(1), 1).unwrap();
        assert_eq!(out.trials.len(), 1);
        assert!(out.trials[0].success);
        assert!(out.trials[0].report.certificate.is_some());
        assert_eq!(out.estimate.t_star, Some(out.trials[0].report.oracle_calls));
    }

    #[test]
    fn parallel_equals_serial() {
        let cfg = abs_config(8);
        let a = run_experiment(&cfg, 1).unwrap();
        let b = run_experiment(&cfg, 4).unwrap();
        assert_eq!(canonical_json(&a).unwrap(), canonical_json(&b).unwrap());
    }

    #[test]
    fn estimate_statistics() {
        let out = run_experiment(&abs_config(5), 2).unwrap();
        let mut recs = out.trials.clone();
        for (i, r) in recs.iter_mut().enumerate() {
            r.report.oracle_calls = [50, 10, 40, 20, 30][i];
            r.success = i != 2;
        }
        let e = ComplexityEstimate::from_trials(&recs).unwrap();
        assert_eq!(e.median_calls, 30.0);
        assert_eq!(e.p90_calls, 50);
        // need ⌈10/3⌉ = 4 successes: 10, 20, 30, 50
        assert_eq!(e.t_star, Some(50));
        assert_eq!(e.success_fraction, 0.8);
        recs[0].success = false;
        assert_eq!(ComplexityEstimate::from_trials(&recs).unwrap().t_star, None);
    }

    #[test]
    fn scaling_csv_shape() {
        let rows = run_scaling(&abs_config(2), &[0.2, 0.1], &[0.3, 0.2, 0.1], 2).unwrap();
        let csv = scaling_csv(&rows).unwrap();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "epsilon,delta,median_calls,p90_calls,success_frac");
        assert_eq!(lines.len(), 7);
        assert!(!csv.contains('\r'));
    }

    #[test]
    fn slope_of_power_law() {
        let xs = [0.4, 0.2, 0.1];
        let ys: Vec<f64> = xs.iter().map(|x| 3.0 / x).collect();
        assert!((log_log_slope(&xs, &ys).unwrap() + 1.0).abs() < 1e-12);
    }

    #[test]
    fn writes_reports() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = abs_config(2);
        let out = run_experiment(&cfg, 2).unwrap();
        write_experiment(&cfg, &out, dir.path()).unwrap();
        for f in ["trial-0000/report.json", "trial-0001/cert.json", "summary.json", "summary.csv"] {
            assert!(dir.path().join(f).exists(), "{f}");
        }
        let first = fs::read(dir.path().join("trial-0000/report.json")).unwrap();
        write_experiment(&cfg, &run_experiment(&cfg, 1).unwrap(), dir.path()).unwrap();
        assert_eq!(first, fs::read(dir.path().join("trial-0000/report.json")).unwrap());
    }
}
