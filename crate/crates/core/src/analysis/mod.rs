//! Experiment harnesses: system orderings, their Kendall correlation, and
//! seeded perturbation sweeps.

mod perturb;
mod sweep;
mod tau;

use std::collections::BTreeMap;

use serde::Serialize;

use crate::browse::BrowsingModel;
use crate::commonality::{
    borda_aggregate, system_commonality, BordaScore, CommonalityOptions, CommonalityResult,
};
use crate::corpus::{CategoryMap, Qrels, RunSet, UserIdx};
use crate::error::{Error, Result};
use crate::metrics::{self, EvalContext, Metric, Polarity, DEFAULT_ALPHA};

pub use perturb::{
    dominant_category, downsample_all_to_parity, downsample_dominant, remove_labels,
    sample_population, sample_users, UserSample,
};
pub use sweep::{
    run_sweep, Perturbation, SummaryRow, SweepInput, SweepMode, SweepRow, SweepTable, TrialSpec,
    DEFAULT_LEVELS, DEFAULT_TRIALS,
};
pub use tau::{kendall_tau, tau_b, TauResult, EXACT_BELOW};

/// Key of the Borda-aggregated commonality ordering.
pub const COMMONALITY: &str = "commonality";
/// Family-wise significance level before Bonferroni correction.
pub const SIGNIFICANCE: f64 = 0.05;

/// Systems ordered best-first by one metric.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SystemOrdering {
    pub metric: String,
    pub polarity: Polarity,
    pub ordered: Vec<(String, f64)>,
}

impl SystemOrdering {
    /// Sorts `values` best-first under `polarity`; ties keep name order.
    pub fn new(
        metric: impl Into<String>,
        polarity: Polarity,
        values: impl IntoIterator<Item = (String, f64)>,
    ) -> Self {
        let mut ordered: Vec<(String, f64)> = values.into_iter().collect();
        ordered.sort_by(|a, b| {
            polarity
                .orient(b.1)
                .total_cmp(&polarity.orient(a.1))
                .then_with(|| a.0.cmp(&b.0))
        });
        Self {
            metric: metric.into(),
            polarity,
            ordered,
        }
    }

    pub fn value(&self, system: &str) -> Option<f64> {
        self.ordered
            .iter()
            .find(|(s, _)| s == system)
            .map(|(_, v)| *v)
    }

    pub fn systems(&self) -> impl Iterator<Item = &str> {
        self.ordered.iter().map(|(s, _)| s.as_str())
    }
}

/// Model parameters shared by every metric of an experiment.
#[derive(Clone, Copy, Debug)]
pub struct Settings {
    pub model: BrowsingModel,
    pub alpha: f64,
    pub commonality: CommonalityOptions,
}

impl Default for Settings {
    fn default() -> Self {
        Self {
            model: BrowsingModel::default(),
            alpha: DEFAULT_ALPHA,
            commonality: CommonalityOptions::default(),
        }
    }
}

/// Per-category commonality of every run plus the Borda table.
#[derive(Clone, Debug)]
pub struct CommonalityTable {
    /// `per_system[i]` belongs to `runs[i]`, indexed by category.
    pub per_system: Vec<Vec<CommonalityResult>>,
    pub borda: Vec<BordaScore>,
}

pub fn commonality_table(
    runs: &[RunSet],
    cats: &CategoryMap,
    population: &[UserIdx],
    settings: &Settings,
) -> Result<CommonalityTable> {
    let per_system: Vec<Vec<CommonalityResult>> = runs
        .iter()
        .map(|r| system_commonality(r, population, cats, &settings.model, settings.commonality))
        .collect();
    let mut table: BTreeMap<String, BTreeMap<String, f64>> = BTreeMap::new();
    for (run, results) in runs.iter().zip(&per_system) {
        for res in results {
            table
                .entry(cats.name(res.category).to_string())
                .or_default()
                .insert(run.system().to_string(), res.log_value);
        }
    }
    let borda = borda_aggregate(&table)?;
    Ok(CommonalityTable { per_system, borda })
}

/// The commonality ordering (by Borda score) followed by one ordering per
/// metric in `metrics`.
pub fn system_orderings(
    runs: &[RunSet],
    qrels: &Qrels,
    cats: &CategoryMap,
    population: &[UserIdx],
    settings: &Settings,
    metrics: &[Metric],
) -> Result<Vec<SystemOrdering>> {
    let table = commonality_table(runs, cats, population, settings)?;
    let mut out = vec![SystemOrdering::new(
        COMMONALITY,
        Polarity::LowerBetter,
        table.borda.iter().map(|b| (b.system.clone(), b.score)),
    )];
    let mut ctx = EvalContext::new(qrels, cats, settings.model, population);
    ctx.alpha = settings.alpha;
    for &m in metrics {
        let values = runs
            .iter()
            .map(|r| metrics::evaluate(r, m, &ctx).map(|v| (v.system, v.value)))
            .collect::<Result<Vec<_>>>()?;
        out.push(SystemOrdering::new(m.key(), m.polarity(), values));
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CorrelationPair {
    pub metric_a: String,
    pub metric_b: String,
    pub tau: f64,
    pub p_value: f64,
    pub significant: bool,
}

/// Commonality versus each baseline metric.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CorrelationReport {
    pub bonferroni_divisor: usize,
    pub threshold: f64,
    pub pairs: Vec<CorrelationPair>,
}

impl CorrelationReport {
    /// Looks a pair up in either order.
    pub fn get(&self, a: &str, b: &str) -> Option<&CorrelationPair> {
        self.pairs
            .iter()
            .find(|p| (p.metric_a == a && p.metric_b == b) || (p.metric_a == b && p.metric_b == a))
    }
}

/// Correlates precomputed orderings: the first is compared with each of the
/// others. The Bonferroni divisor is `(orderings - 1) * datasets`.
pub fn correlate_orderings(
    orderings: &[SystemOrdering],
    datasets: usize,
) -> Result<CorrelationReport> {
    let (reference, rest) = orderings
        .split_first()
        .ok_or_else(|| Error::invalid("no orderings to correlate"))?;
    let divisor = (rest.len() * datasets.max(1)).max(1);
    let threshold = SIGNIFICANCE / divisor as f64;
    let pairs = rest
        .iter()
        .map(|o| {
            let t = kendall_tau(reference, o)?;
            Ok(CorrelationPair {
                metric_a: reference.metric.clone(),
                metric_b: o.metric.clone(),
                tau: t.tau,
                p_value: t.p_value,
                significant: t.p_value < threshold,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(CorrelationReport {
        bonferroni_divisor: divisor,
        threshold,
        pairs,
    })
}

/// Kendall's tau between the commonality ordering and every metric's
/// ordering over the given runs.
pub fn correlate_all(
    runs: &[RunSet],
    qrels: &Qrels,
    cats: &CategoryMap,
    population: &[UserIdx],
    settings: &Settings,
    metrics: &[Metric],
) -> Result<CorrelationReport> {
    if runs.len() < 2 {
        return Err(Error::invalid("correlation needs at least two systems"));
    }
    let orderings = system_orderings(runs, qrels, cats, population, settings, metrics)?;
    correlate_orderings(&orderings, 1)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn ordering_sorts_by_polarity() {
        let o = SystemOrdering::new(
            "loss",
            Polarity::LowerBetter,
            [("b".into(), 2.0), ("a".into(), 3.0), ("c".into(), 1.0)],
        );
        assert_eq!(o.systems().collect::<Vec<_>>(), ["c", "b", "a"]);
        assert_eq!(o.value("a"), Some(3.0));
    }

    fn random_ordering(name: &str, rng: &mut impl Rng, n: usize) -> SystemOrdering {
        SystemOrdering::new(
            name,
            Polarity::HigherBetter,
            (0..n).map(|i| (format!("s{i:02}"), rng.gen::<f64>())),
        )
    }

    #[test]
    fn monotone_transform_is_perfectly_correlated() {
        let mut rng = crate::seeding::rng(1);
        let base = random_ordering(COMMONALITY, &mut rng, 12);
        let cubed = SystemOrdering::new(
            "cubed",
            Polarity::HigherBetter,
            base.ordered
                .iter()
                .map(|(s, v)| (s.clone(), v.powi(3) * 10.0 - 4.0)),
        );
        let report = correlate_orderings(&[base.clone(), cubed, base], 1).unwrap();
        assert_eq!(report.bonferroni_divisor, 2);
        for p in &report.pairs {
            assert_eq!(p.tau, 1.0);
            assert!(p.significant);
        }
        assert!(report.get("cubed", COMMONALITY).is_some());
    }

    #[test]
    fn independent_metrics_rarely_significant() {
        // null distribution: independent random values for 12 systems
        let mut rng = crate::seeding::rng(2024);
        let mut significant = 0;
        for _ in 0..100 {
            let a = random_ordering(COMMONALITY, &mut rng, 12);
            let b = random_ordering("noise", &mut rng, 12);
            let r = correlate_orderings(&[a, b], 1).unwrap();
            assert!(r.pairs[0].tau.abs() <= 1.0);
            if r.pairs[0].significant {
                significant += 1;
            }
        }
        assert!(
            significant <= 10,
            "{significant} of 100 null pairs significant"
        );
    }
}
