//! Baseline utility, fairness, diversity and novelty metrics.
//!
//! Every metric is computed per user over the evaluation population and
//! reduced to a sample mean in ascending user order, except disparate
//! exposure which compares population-level exposure shares to catalog
//! shares. Users of the population without a ranking are scored on an empty
//! list.
//!
//! Position weights come from the shared [`BrowsingModel`]: exposure uses the
//! examination probability `γ^(i-1)`, EILD and EPD use the stopping
//! probability `P(i)`.

mod diversity;
mod exposure;
mod utility;

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::Serialize;

use crate::browse::BrowsingModel;
use crate::corpus::{CategoryMap, ItemIdx, Qrels, RunSet, UserIdx};
use crate::error::{Error, Result};

pub use diversity::{
    alpha_dcg, alpha_ndcg_user, eild_user, epd_user, ia_err_user, jaccard_distance,
};
pub use exposure::{
    divergence, exposure_distribution, DivergenceFlavor, ExposureDistribution, KL_CLAMP,
};
pub use utility::{ndcg_user, precision_user, recall_user};

/// Default cutoff for cutoff-based metrics.
pub const DEFAULT_CUTOFF: usize = 100;
/// Default novelty penalty of alpha-nDCG.
pub const DEFAULT_ALPHA: f64 = 0.5;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Polarity {
    HigherBetter,
    LowerBetter,
}

impl Polarity {
    /// Maps a value so that larger always means better.
    pub fn orient(self, value: f64) -> f64 {
        match self {
            Polarity::HigherBetter => value,
            Polarity::LowerBetter => -value,
        }
    }
}

/// A baseline metric, named by its stable string key.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Metric {
    Precision(usize),
    Recall(usize),
    Ndcg(usize),
    DispExp,
    DexpAbs,
    DexpSq,
    DexpKl,
    AlphaNdcg(usize),
    IaErr(usize),
    Eild,
    Epd,
}

impl Metric {
    /// All baseline metrics with cutoff `k`, in report order.
    pub fn all(k: usize) -> Vec<Metric> {
        vec![
            Metric::Precision(k),
            Metric::Recall(k),
            Metric::Ndcg(k),
            Metric::DispExp,
            Metric::DexpAbs,
            Metric::DexpSq,
            Metric::DexpKl,
            Metric::AlphaNdcg(k),
            Metric::IaErr(k),
            Metric::Eild,
            Metric::Epd,
        ]
    }

    pub fn key(&self) -> String {
        self.to_string()
    }

    pub fn polarity(&self) -> Polarity {
        match self {
            Metric::DispExp | Metric::DexpAbs | Metric::DexpSq | Metric::DexpKl => {
                Polarity::LowerBetter
            }
            _ => Polarity::HigherBetter,
        }
    }

    /// Utility metrics ignore category labels.
    pub fn is_utility(&self) -> bool {
        matches!(
            self,
            Metric::Precision(_) | Metric::Recall(_) | Metric::Ndcg(_)
        )
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Metric::Precision(k) => write!(f, "P@{k}"),
            Metric::Recall(k) => write!(f, "R@{k}"),
            Metric::Ndcg(k) => write!(f, "nDCG@{k}"),
            Metric::DispExp => f.write_str("dispexp"),
            Metric::DexpAbs => f.write_str("dexp_abs"),
            Metric::DexpSq => f.write_str("dexp_sq"),
            Metric::DexpKl => f.write_str("dexp_kl"),
            Metric::AlphaNdcg(k) => write!(f, "alpha_ndcg@{k}"),
            Metric::IaErr(k) => write!(f, "ia_err@{k}"),
            Metric::Eild => f.write_str("eild"),
            Metric::Epd => f.write_str("epd"),
        }
    }
}

impl FromStr for Metric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let unknown = || Error::Config(format!("unknown metric `{s}`"));
        if let Some((name, k)) = s.split_once('@') {
            let k: usize = k.parse().map_err(|_| unknown())?;
            if k == 0 {
                return Err(Error::Config(format!("metric `{s}`: cutoff must be >= 1")));
            }
            return match name {
                "P" => Ok(Metric::Precision(k)),
                "R" => Ok(Metric::Recall(k)),
                "nDCG" => Ok(Metric::Ndcg(k)),
                "alpha_ndcg" => Ok(Metric::AlphaNdcg(k)),
                "ia_err" => Ok(Metric::IaErr(k)),
                _ => Err(unknown()),
            };
        }
        match s {
            "dispexp" => Ok(Metric::DispExp),
            "dexp_abs" => Ok(Metric::DexpAbs),
            "dexp_sq" => Ok(Metric::DexpSq),
            "dexp_kl" => Ok(Metric::DexpKl),
            "eild" => Ok(Metric::Eild),
            "epd" => Ok(Metric::Epd),
            _ => Err(unknown()),
        }
    }
}

/// One system's value for one metric.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MetricValue {
    pub system: String,
    pub metric: String,
    pub value: f64,
    /// Per-user values whose sample mean is `value` (absent for dispexp).
    #[serde(skip)]
    pub per_user: Option<BTreeMap<UserIdx, f64>>,
    /// Counts of users or categories that needed special handling.
    pub flags: BTreeMap<&'static str, usize>,
}

/// Shared inputs of a metric computation.
#[derive(Clone, Copy, Debug)]
pub struct EvalContext<'a> {
    pub qrels: &'a Qrels,
    pub cats: &'a CategoryMap,
    pub model: BrowsingModel,
    /// Sorted evaluation population.
    pub population: &'a [UserIdx],
    pub alpha: f64,
}

impl<'a> EvalContext<'a> {
    pub fn new(
        qrels: &'a Qrels,
        cats: &'a CategoryMap,
        model: BrowsingModel,
        population: &'a [UserIdx],
    ) -> Self {
        Self {
            qrels,
            cats,
            model,
            population,
            alpha: DEFAULT_ALPHA,
        }
    }

    fn items<'r>(&self, run: &'r RunSet, user: UserIdx) -> &'r [ItemIdx] {
        run.get(user).map(|r| r.items()).unwrap_or(&[])
    }
}

fn missing_count(run: &RunSet, ctx: &EvalContext<'_>) -> usize {
    ctx.population
        .iter()
        .filter(|&&u| run.get(u).is_none())
        .count()
}

/// Per-user values, `None` for users excluded from the mean.
fn per_user_mean(
    run: &RunSet,
    metric: Metric,
    ctx: &EvalContext<'_>,
    values: Vec<Option<f64>>,
    mut flags: BTreeMap<&'static str, usize>,
) -> MetricValue {
    let mut per_user = BTreeMap::new();
    let mut sum = 0.0;
    let mut excluded = 0;
    for (&u, v) in ctx.population.iter().zip(values) {
        match v {
            Some(v) => {
                sum += v;
                per_user.insert(u, v);
            }
            None => excluded += 1,
        }
    }
    if excluded > 0 {
        flags.insert("excluded_users", excluded);
    }
    let missing = missing_count(run, ctx);
    if missing > 0 {
        flags.insert("missing_users", missing);
    }
    let value = if per_user.is_empty() {
        0.0
    } else {
        sum / per_user.len() as f64
    };
    MetricValue {
        system: run.system().to_string(),
        metric: metric.key(),
        value,
        per_user: Some(per_user),
        flags,
    }
}

pub fn precision_at(run: &RunSet, ctx: &EvalContext<'_>, k: usize) -> Result<MetricValue> {
    evaluate(run, Metric::Precision(k), ctx)
}

pub fn recall_at(run: &RunSet, ctx: &EvalContext<'_>, k: usize) -> Result<MetricValue> {
    evaluate(run, Metric::Recall(k), ctx)
}

pub fn ndcg_at(run: &RunSet, ctx: &EvalContext<'_>, k: usize) -> Result<MetricValue> {
    evaluate(run, Metric::Ndcg(k), ctx)
}

/// Computes `metric` for `run` over the context's population.
pub fn evaluate(run: &RunSet, metric: Metric, ctx: &EvalContext<'_>) -> Result<MetricValue> {
    if !(ctx.alpha > 0.0 && ctx.alpha <= 1.0) {
        return Err(Error::invalid(format!(
            "alpha must be in (0, 1], got {}",
            ctx.alpha
        )));
    }
    let cats = ctx.cats;
    let model = &ctx.model;
    let flags = BTreeMap::new();
    let per_user = |f: &(dyn Fn(UserIdx, &[ItemIdx]) -> Option<f64> + Sync)| -> Vec<Option<f64>> {
        ctx.population
            .par_iter()
            .map(|&u| f(u, ctx.items(run, u)))
            .collect()
    };

    let result = match metric {
        Metric::Precision(k) => {
            let v = per_user(&|u, items| Some(precision_user(items, ctx.qrels.relevant(u), k)));
            per_user_mean(run, metric, ctx, v, flags)
        }
        Metric::Recall(k) => {
            let v = per_user(&|u, items| Some(recall_user(items, ctx.qrels.relevant(u), k)));
            per_user_mean(run, metric, ctx, v, flags)
        }
        Metric::Ndcg(k) => {
            let v = per_user(&|u, items| Some(ndcg_user(items, ctx.qrels.relevant(u), k)));
            let mut mv = per_user_mean(run, metric, ctx, v, flags);
            let unjudged = ctx
                .population
                .iter()
                .filter(|&&u| ctx.qrels.relevant(u).is_empty())
                .count();
            if unjudged > 0 {
                mv.flags.insert("users_without_relevant", unjudged);
            }
            mv
        }
        Metric::DexpAbs | Metric::DexpSq | Metric::DexpKl => {
            let flavor = match metric {
                Metric::DexpAbs => DivergenceFlavor::Abs,
                Metric::DexpSq => DivergenceFlavor::Sq,
                _ => DivergenceFlavor::Kl,
            };
            let rows: Vec<(f64, bool, usize)> = ctx
                .population
                .par_iter()
                .map(|&u| {
                    let theta = exposure_distribution(ctx.items(run, u), cats, model);
                    let (d, clamped) = divergence(&theta.theta, flavor);
                    (d, theta.defined, clamped)
                })
                .collect();
            let mut flags = flags;
            let zero = rows.iter().filter(|r| !r.1).count();
            if zero > 0 {
                flags.insert("zero_exposure_users", zero);
            }
            let clamped: usize = rows.iter().map(|r| r.2).sum();
            if clamped > 0 {
                flags.insert("kl_clamped", clamped);
            }
            let v = rows.into_iter().map(|r| Some(r.0)).collect();
            per_user_mean(run, metric, ctx, v, flags)
        }
        Metric::DispExp => exposure::disparate_exposure(run, ctx)?,
        Metric::AlphaNdcg(k) => {
            let v = per_user(&|u, items| {
                Some(alpha_ndcg_user(
                    items,
                    ctx.qrels.relevant(u),
                    cats,
                    k,
                    ctx.alpha,
                ))
            });
            per_user_mean(run, metric, ctx, v, flags)
        }
        Metric::IaErr(k) => {
            let v = per_user(&|u, items| Some(ia_err_user(items, ctx.qrels.relevant(u), cats, k)));
            per_user_mean(run, metric, ctx, v, flags)
        }
        Metric::Eild => {
            let v = per_user(&|_, items| Some(eild_user(items, cats, model)));
            per_user_mean(run, metric, ctx, v, flags)
        }
        Metric::Epd => {
            let v = per_user(&|u, items| epd_user(items, ctx.qrels.relevant(u), cats, model));
            per_user_mean(run, metric, ctx, v, flags)
        }
    };
    Ok(result)
}

pub fn divergence_metrics(
    run: &RunSet,
    ctx: &EvalContext<'_>,
    flavor: DivergenceFlavor,
) -> Result<MetricValue> {
    let metric = match flavor {
        DivergenceFlavor::Abs => Metric::DexpAbs,
        DivergenceFlavor::Sq => Metric::DexpSq,
        DivergenceFlavor::Kl => Metric::DexpKl,
    };
    evaluate(run, metric, ctx)
}

pub fn disparate_exposure(run: &RunSet, ctx: &EvalContext<'_>) -> Result<MetricValue> {
    evaluate(run, Metric::DispExp, ctx)
}

pub fn alpha_ndcg(run: &RunSet, ctx: &EvalContext<'_>, k: usize) -> Result<MetricValue> {
    evaluate(run, Metric::AlphaNdcg(k), ctx)
}

pub fn ia_err(run: &RunSet, ctx: &EvalContext<'_>, k: usize) -> Result<MetricValue> {
    evaluate(run, Metric::IaErr(k), ctx)
}

pub fn eild(run: &RunSet, ctx: &EvalContext<'_>) -> Result<MetricValue> {
    evaluate(run, Metric::Eild, ctx)
}

pub fn epd(run: &RunSet, ctx: &EvalContext<'_>) -> Result<MetricValue> {
    evaluate(run, Metric::Epd, ctx)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn metric_keys_round_trip() {
        for m in Metric::all(100) {
            assert_eq!(m.key().parse::<Metric>().unwrap(), m);
        }
        assert_eq!("nDCG@10".parse::<Metric>().unwrap(), Metric::Ndcg(10));
        assert!("nDCG@0".parse::<Metric>().is_err());
        assert!("ndcg@10".parse::<Metric>().is_err());
        assert!("bogus".parse::<Metric>().is_err());
    }

    #[test]
    fn polarity() {
        assert_eq!(Metric::DexpKl.polarity(), Polarity::LowerBetter);
        assert_eq!(Metric::Eild.polarity(), Polarity::HigherBetter);
        assert_eq!(Polarity::LowerBetter.orient(2.0), -2.0);
    }
}
