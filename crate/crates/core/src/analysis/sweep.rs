//! Multi-trial perturbation sweeps.
//!
//! A level is the percentage of the original data that survives, so 100 is
//! always the unperturbed corpus:
//!
//! | perturbation | level `l` means                                   |
//! |--------------|---------------------------------------------------|
//! | `dominant`   | keep `l`% of the largest category                 |
//! | `parity`     | interpolate `t = (100 - l) / 100` toward parity   |
//! | `labels`     | remove `100 - l`% of each category's labels       |
//! | `users`      | sample `l`% of the users                          |

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::Serialize;

use super::{
    downsample_all_to_parity, downsample_dominant, kendall_tau, remove_labels, sample_population,
    system_orderings, Settings, SystemOrdering, COMMONALITY,
};
use crate::corpus::{CategoryMap, Qrels, RunSet, UserIdx};
use crate::error::{Error, Result};
use crate::metrics::Metric;
use crate::seeding;

pub const DEFAULT_TRIALS: usize = 5;
pub const DEFAULT_LEVELS: [f64; 5] = [10.0, 30.0, 50.0, 70.0, 90.0];

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TrialSpec {
    pub seed: u64,
    pub trials: usize,
    pub levels: Vec<f64>,
}

impl Default for TrialSpec {
    fn default() -> Self {
        Self {
            seed: 0,
            trials: DEFAULT_TRIALS,
            levels: DEFAULT_LEVELS.to_vec(),
        }
    }
}

impl TrialSpec {
    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(Error::invalid("trials must be at least 1"));
        }
        if self.levels.is_empty() {
            return Err(Error::invalid("no levels given"));
        }
        if let Some(l) = self.levels.iter().find(|&&l| !(l > 0.0 && l <= 100.0)) {
            return Err(Error::invalid(format!("level {l} is outside (0, 100]")));
        }
        for (i, l) in self.levels.iter().enumerate() {
            if self.levels[..i].contains(l) {
                return Err(Error::invalid(format!("level {l} is listed twice")));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Perturbation {
    Dominant,
    Parity,
    Labels,
    Users,
}

impl Perturbation {
    pub fn name(self) -> &'static str {
        match self {
            Perturbation::Dominant => "dominant",
            Perturbation::Parity => "parity",
            Perturbation::Labels => "labels",
            Perturbation::Users => "users",
        }
    }

    fn code(self) -> u64 {
        match self {
            Perturbation::Dominant => 1,
            Perturbation::Parity => 2,
            Perturbation::Labels => 3,
            Perturbation::Users => 4,
        }
    }
}

impl fmt::Display for Perturbation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Perturbation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "dominant" => Ok(Perturbation::Dominant),
            "parity" => Ok(Perturbation::Parity),
            "labels" => Ok(Perturbation::Labels),
            "users" => Ok(Perturbation::Users),
            other => Err(Error::invalid(format!("unknown perturbation {other:?}"))),
        }
    }
}

/// What each perturbed ordering is compared with.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum SweepMode {
    /// The same metric on the unperturbed corpus.
    Robustness,
    /// The commonality ordering on the same perturbed corpus.
    Correlation,
}

/// The unperturbed corpus a sweep starts from.
#[derive(Clone, Copy, Debug)]
pub struct SweepInput<'a> {
    pub runs: &'a [RunSet],
    pub qrels: &'a Qrels,
    pub cats: &'a CategoryMap,
    /// Sorted population.
    pub population: &'a [UserIdx],
    pub settings: Settings,
    pub metrics: &'a [Metric],
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SweepRow {
    pub perturbation: Perturbation,
    pub level: f64,
    pub trial: usize,
    pub metric: String,
    pub tau: f64,
    pub p_value: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SummaryRow {
    pub perturbation: Perturbation,
    pub level: f64,
    pub metric: String,
    pub mean_tau: f64,
    /// Sample standard deviation; zero for a single trial.
    pub std_tau: f64,
    pub trials: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SweepTable {
    pub mode: SweepMode,
    pub rows: Vec<SweepRow>,
    pub summary: Vec<SummaryRow>,
}

fn job_seed(seed: u64, perturbation: Perturbation, level: f64, trial: usize) -> u64 {
    seeding::derive(seed, &[perturbation.code(), level.to_bits(), trial as u64])
}

fn perturbed_orderings(
    input: &SweepInput<'_>,
    perturbation: Perturbation,
    level: f64,
    seed: u64,
) -> Result<Vec<SystemOrdering>> {
    let orderings = |runs: &[RunSet], qrels: &Qrels, cats: &CategoryMap, pop: &[UserIdx]| {
        system_orderings(runs, qrels, cats, pop, &input.settings, input.metrics)
    };
    match perturbation {
        Perturbation::Dominant => {
            let cats = downsample_dominant(input.cats, level, seed)?;
            orderings(input.runs, input.qrels, &cats, input.population)
        }
        Perturbation::Parity => {
            let cats = downsample_all_to_parity(input.cats, (100.0 - level) / 100.0, seed)?;
            orderings(input.runs, input.qrels, &cats, input.population)
        }
        Perturbation::Labels => {
            let cats = remove_labels(input.cats, 100.0 - level, seed)?;
            orderings(input.runs, input.qrels, &cats, input.population)
        }
        Perturbation::Users => {
            let s = sample_population(input.runs, input.qrels, input.population, level, seed)?;
            orderings(&s.runs, &s.qrels, input.cats, &s.users)
        }
    }
}

fn compare(
    perturbation: Perturbation,
    level: f64,
    trial: usize,
    mode: SweepMode,
    reference: &[SystemOrdering],
    perturbed: &[SystemOrdering],
) -> Result<Vec<SweepRow>> {
    let row = |metric: &str, a: &SystemOrdering, b: &SystemOrdering| {
        kendall_tau(a, b).map(|t| SweepRow {
            perturbation,
            level,
            trial,
            metric: metric.to_string(),
            tau: t.tau,
            p_value: t.p_value,
        })
    };
    match mode {
        SweepMode::Robustness => reference
            .iter()
            .zip(perturbed)
            .map(|(r, p)| row(&r.metric, r, p))
            .collect(),
        SweepMode::Correlation => {
            let (common, rest) = perturbed
                .split_first()
                .expect("commonality ordering present");
            debug_assert_eq!(common.metric, COMMONALITY);
            rest.iter().map(|o| row(&o.metric, common, o)).collect()
        }
    }
}

fn summarize(rows: &[SweepRow], spec: &TrialSpec) -> Vec<SummaryRow> {
    let Some(first) = rows.first() else {
        return Vec::new();
    };
    let metrics: Vec<&str> = rows
        .iter()
        .take_while(|r| r.level == first.level && r.trial == first.trial)
        .map(|r| r.metric.as_str())
        .collect();
    let mut out = Vec::new();
    for &level in &spec.levels {
        for &metric in &metrics {
            let taus: Vec<f64> = rows
                .iter()
                .filter(|r| r.level == level && r.metric == metric)
                .map(|r| r.tau)
                .collect();
            let n = taus.len() as f64;
            let mean = taus.iter().sum::<f64>() / n;
            let std = if taus.len() > 1 {
                (taus.iter().map(|t| (t - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
            } else {
                0.0
            };
            out.push(SummaryRow {
                perturbation: first.perturbation,
                level,
                metric: metric.to_string(),
                mean_tau: mean,
                std_tau: std,
                trials: taus.len(),
            });
        }
    }
    out
}

/// Applies `perturbation` at every level for every trial and records
/// Kendall's tau per metric. Rows come out in (level, trial, metric) order
/// whatever the thread count.
pub fn run_sweep(
    input: &SweepInput<'_>,
    perturbation: Perturbation,
    mode: SweepMode,
    spec: &TrialSpec,
) -> Result<SweepTable> {
    spec.validate()?;
    let reference = match mode {
        SweepMode::Robustness => system_orderings(
            input.runs,
            input.qrels,
            input.cats,
            input.population,
            &input.settings,
            input.metrics,
        )?,
        SweepMode::Correlation => Vec::new(),
    };
    let jobs: Vec<(f64, usize)> = spec
        .levels
        .iter()
        .flat_map(|&l| (0..spec.trials).map(move |t| (l, t)))
        .collect();
    let per_job: Vec<Result<Vec<SweepRow>>> = jobs
        .par_iter()
        .map(|&(level, trial)| {
            let seed = job_seed(spec.seed, perturbation, level, trial);
            let perturbed = perturbed_orderings(input, perturbation, level, seed)?;
            compare(perturbation, level, trial, mode, &reference, &perturbed)
        })
        .collect();
    let mut rows = Vec::new();
    for r in per_job {
        rows.extend(r?);
    }
    let summary = summarize(&rows, spec);
    Ok(SweepTable {
        mode,
        rows,
        summary,
    })
}
