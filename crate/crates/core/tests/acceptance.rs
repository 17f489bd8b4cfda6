//! End-to-end acceptance checks. Every check writes one `PASS` or `FAIL`
//! line straight to stderr (bypassing the test harness capture) and then
//! asserts, so the lines show up in `cargo test` output either way.
//!
//! Exact oracles use rationals with dyadic patience values, which are
//! represented exactly in `f64`.

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use num::{BigInt, BigRational, One, Zero};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use commonality::analysis::{run_sweep, Perturbation, Settings, SweepInput, SweepMode, TrialSpec};
use commonality::commonality::CommonalityOptions;
use commonality::interleave::{interleave, tradeoff_sweep, PromotionPolicy, TradeoffConfig};
use commonality::synth::{generate, write_corpus, SynthConfig};
use commonality::{
    category_commonality, cli, familiarity, metrics, BrowsingModel, CategoryMap, ItemIdx, Metric,
    Qrels, Ranking, RunSet, UserIdx,
};

const DYADIC: [(i64, i64); 6] = [(1, 2), (3, 4), (5, 8), (7, 8), (13, 16), (29, 32)];

fn report(id: u32, title: &str, ok: bool, detail: &str, elapsed: Duration) {
    let status = if ok { "PASS" } else { "FAIL" };
    let _ = writeln!(
        std::io::stderr(),
        "acceptance {id:>2} {status} {title}: {detail} ({:.2}s)",
        elapsed.as_secs_f64()
    );
}

/// Wall-clock budget of each criterion in seconds, indexed by id.
const BUDGET: [u64; 11] = [0, 1, 10, 10, 10, 30, 1, 120, 120, 120, 60];

fn finish(id: u32, title: &str, start: Instant, mut failures: Vec<String>, detail: String) {
    let budget = Duration::from_secs(BUDGET[id as usize]);
    if start.elapsed() > budget {
        failures.push(format!("over the {}s budget", budget.as_secs()));
    }
    let ok = failures.is_empty();
    let detail = if ok {
        detail
    } else {
        format!("{} failure(s), first: {}", failures.len(), failures[0])
    };
    report(id, title, ok, &detail, start.elapsed());
    assert!(ok, "criterion {id} failed: {detail}");
}

fn items(ids: &[u32]) -> Vec<ItemIdx> {
    ids.iter().map(|&i| ItemIdx(i)).collect()
}

fn ratio(p: i64, q: i64) -> BigRational {
    BigRational::new(BigInt::from(p), BigInt::from(q))
}

/// `(1 - γ) γ^(k-1)` for `k = 1..=n`, exactly.
fn exact_stops(gamma: &BigRational, n: usize) -> Vec<BigRational> {
    let mut out = Vec::with_capacity(n);
    let mut examine = BigRational::one();
    for _ in 0..n {
        out.push((BigRational::one() - gamma) * &examine);
        examine *= gamma;
    }
    out
}

/// Random rankings over a small labeled pool.
struct Instance {
    cats: CategoryMap,
    num_cats: usize,
    labeled: Vec<u32>,
    unlabeled: Vec<u32>,
}

/// Items `0..labeled` are labeled; items from 100 on are unlabeled.
/// With `single` every labeled item gets exactly one category.
fn random_instance(rng: &mut ChaCha8Rng, num_cats: usize, labeled: u32, single: bool) -> Instance {
    let names: Vec<String> = (0..num_cats).map(|c| format!("c{c}")).collect();
    let mut pairs = Vec::new();
    for i in 0..labeled {
        // the first items pin every category to be non-empty
        let first = if (i as usize) < num_cats {
            i as usize
        } else {
            rng.gen_range(0..num_cats)
        };
        pairs.push((ItemIdx(i), names[first].clone()));
        if !single && num_cats > 1 && rng.gen_bool(0.3) {
            let second = rng.gen_range(0..num_cats);
            pairs.push((ItemIdx(i), names[second].clone()));
        }
    }
    let cats = CategoryMap::from_pairs(pairs).unwrap();
    Instance {
        num_cats: cats.num_categories(),
        cats,
        labeled: (0..labeled).collect(),
        unlabeled: (100..104).collect(),
    }
}

impl Instance {
    fn pool(&self) -> Vec<u32> {
        self.labeled
            .iter()
            .chain(&self.unlabeled)
            .copied()
            .collect()
    }

    fn random_list(&self, rng: &mut ChaCha8Rng, len: usize) -> Vec<u32> {
        let mut pool = self.pool();
        pool.shuffle(rng);
        pool.truncate(len);
        pool
    }

    /// A list of `len` items that contains every category.
    fn covering_list(&self, rng: &mut ChaCha8Rng, len: usize) -> Vec<u32> {
        loop {
            let list = self.random_list(rng, len);
            let covered = self
                .cats
                .categories()
                .all(|c| list.iter().any(|&i| self.cats.contains(c, ItemIdx(i))));
            if covered {
                return list;
            }
        }
    }
}

/// Checks that `library` orders systems as `exact` does (both higher is
/// better). Exact ties require library values within `tie_tol`.
fn same_order(library: &[f64], exact: &[BigRational], tie_tol: f64) -> Result<(), String> {
    for a in 0..library.len() {
        for b in a + 1..library.len() {
            let (la, lb) = (library[a], library[b]);
            match exact[a].cmp(&exact[b]) {
                Ordering::Equal => {
                    let scale = la.abs().max(lb.abs()).max(1.0);
                    if (la - lb).abs() > tie_tol * scale {
                        return Err(format!("exact tie {a}/{b} but library {la} vs {lb}"));
                    }
                }
                want => {
                    if la.partial_cmp(&lb) != Some(want) {
                        return Err(format!(
                            "pair {a}/{b}: exact {want:?}, library {la} vs {lb}"
                        ));
                    }
                }
            }
        }
    }
    Ok(())
}

#[test]
fn criterion_01_stopping_mass() {
    let start = Instant::now();
    let mut failures = Vec::new();
    let mut worst: f64 = 0.0;
    for gamma in [0.1, 0.5, 0.9, 0.99] {
        let model = BrowsingModel::new(gamma).unwrap();
        for n in [1usize, 10, 100, 10_000] {
            let total: f64 = (1..=n).map(|k| model.stop_prob(k).unwrap()).sum();
            let want = 1.0 - gamma.powi(n as i32);
            let err = (total - want).abs();
            worst = worst.max(err);
            if err > 1e-12 {
                failures.push(format!("γ={gamma} n={n}: {total} vs {want}"));
            }
            if (model.truncated_mass(n) - want).abs() > 1e-12 {
                failures.push(format!(
                    "γ={gamma} n={n}: truncated mass {}",
                    model.truncated_mass(n)
                ));
            }
        }
    }
    finish(
        1,
        "stopping probabilities sum to 1-γ^n",
        start,
        failures,
        format!("16 cases, max error {worst:.1e}"),
    );
}

#[test]
fn criterion_02_familiarity_closed_form() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut failures = Vec::new();
    let mut worst: f64 = 0.0;
    for case in 0..1000 {
        let gamma = rng.gen_range(0.01..0.99);
        let model = BrowsingModel::new(gamma).unwrap();
        let (num_cats, labeled) = (rng.gen_range(1..=3), rng.gen_range(3..=8));
        let inst = random_instance(&mut rng, num_cats, labeled, false);
        let len = rng.gen_range(1..=10);
        let list = inst.random_list(&mut rng, len);
        let ranking = Ranking::new(UserIdx(0), items(&list)).unwrap();
        for c in inst.cats.categories() {
            let size = inst.cats.size(c) as f64;
            // Σ_i P(i) · recall@i, straight from the definition
            let mut brute = 0.0;
            for i in 1..=list.len() {
                let stop = (1.0 - gamma) * gamma.powf((i - 1) as f64);
                let hits = list[..i]
                    .iter()
                    .filter(|&&x| inst.cats.contains(c, ItemIdx(x)))
                    .count();
                brute += stop * hits as f64 / size;
            }
            let got = familiarity(&ranking, c, &inst.cats, &model).unwrap().value;
            let err = (got - brute).abs();
            worst = worst.max(err);
            if err > 1e-12 {
                failures.push(format!("case {case}: {got} vs {brute}"));
            }
        }
    }
    finish(
        2,
        "familiarity matches position sum",
        start,
        failures,
        format!("1000 instances, max error {worst:.1e}"),
    );
}

/// Exact familiarity: Σ_i P(i) · hits@i / |C|.
fn exact_familiarity(
    list: &[u32],
    stops: &[BigRational],
    cats: &CategoryMap,
    c: commonality::CatIdx,
) -> BigRational {
    let mut sum = BigRational::zero();
    let mut hits = 0i64;
    for (i, &item) in list.iter().enumerate() {
        if cats.contains(c, ItemIdx(item)) {
            hits += 1;
        }
        sum += &stops[i] * BigRational::from_integer(BigInt::from(hits));
    }
    sum / BigRational::from_integer(BigInt::from(cats.size(c) as i64))
}

#[test]
fn criterion_03_commonality_matches_exact_product() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut failures = Vec::new();
    let opts = CommonalityOptions::default();
    for case in 0..200 {
        let (p, q) = DYADIC[rng.gen_range(0..DYADIC.len())];
        let gamma = ratio(p, q);
        let model = BrowsingModel::new(p as f64 / q as f64).unwrap();
        let (num_cats, labeled) = (rng.gen_range(1..=3), rng.gen_range(3..=8));
        let inst = random_instance(&mut rng, num_cats, labeled, false);
        let users = rng.gen_range(1..=8);
        let population: Vec<UserIdx> = (0..users).map(UserIdx).collect();
        let systems = rng.gen_range(2..=5);
        let lists: Vec<Vec<Vec<u32>>> = (0..systems)
            .map(|_| {
                (0..users)
                    .map(|_| {
                        let len = rng.gen_range(inst.num_cats..=8);
                        inst.covering_list(&mut rng, len)
                    })
                    .collect()
            })
            .collect();
        let runs: Vec<RunSet> = lists
            .iter()
            .enumerate()
            .map(|(s, per_user)| {
                RunSet::from_rankings(
                    format!("s{s}"),
                    per_user
                        .iter()
                        .enumerate()
                        .map(|(u, l)| Ranking::new(UserIdx(u as u32), items(l)).unwrap()),
                )
                .unwrap()
            })
            .collect();
        for c in inst.cats.categories() {
            let library: Vec<f64> = runs
                .iter()
                .map(|r| {
                    category_commonality(r, &population, c, &inst.cats, &model, opts)
                        .unwrap()
                        .log_value
                })
                .collect();
            let exact: Vec<BigRational> = lists
                .iter()
                .map(|per_user| {
                    per_user.iter().fold(BigRational::one(), |acc, l| {
                        acc * exact_familiarity(l, &exact_stops(&gamma, l.len()), &inst.cats, c)
                    })
                })
                .collect();
            if library.iter().any(|v| !v.is_finite()) {
                failures.push(format!(
                    "case {case}: non-finite log-commonality {library:?}"
                ));
            } else if let Err(e) = same_order(&library, &exact, 1e-12) {
                failures.push(format!("case {case}: {e}"));
            }
        }
        // one user who sees nothing of the first category vetoes it
        let c = inst.cats.categories().next().unwrap();
        let blind: Vec<u32> = inst
            .pool()
            .into_iter()
            .filter(|&i| !inst.cats.contains(c, ItemIdx(i)))
            .collect();
        let mut vetoed = RunSet::new("vetoed");
        for (u, l) in lists[0].iter().enumerate() {
            let list = if u == 0 { &blind } else { l };
            vetoed
                .insert(Ranking::new(UserIdx(u as u32), items(list)).unwrap())
                .unwrap();
        }
        let r = category_commonality(&vetoed, &population, c, &inst.cats, &model, opts).unwrap();
        if r.log_value != f64::NEG_INFINITY || r.zero_users < 1 {
            failures.push(format!(
                "case {case}: veto gave {} with {} zero users",
                r.log_value, r.zero_users
            ));
        }
    }
    finish(
        3,
        "commonality ordering equals exact product ordering",
        start,
        failures,
        "200 instances".into(),
    );
}

/// Exact exposure share of every category in `list`.
fn exact_theta(list: &[u32], gamma: &BigRational, cats: &CategoryMap) -> Vec<BigRational> {
    let mut per_cat = vec![BigRational::zero(); cats.num_categories()];
    let mut total = BigRational::zero();
    let mut weight = BigRational::one();
    for &item in list {
        for &c in cats.labels(ItemIdx(item)) {
            per_cat[c.index()] += &weight;
            total += &weight;
        }
        weight *= gamma;
    }
    per_cat.into_iter().map(|w| w / &total).collect()
}

fn runs_from(lists: &[Vec<Vec<u32>>]) -> Vec<RunSet> {
    lists
        .iter()
        .enumerate()
        .map(|(s, per_user)| {
            RunSet::from_rankings(
                format!("s{s}"),
                per_user
                    .iter()
                    .enumerate()
                    .map(|(u, l)| Ranking::new(UserIdx(u as u32), items(l)).unwrap()),
            )
            .unwrap()
        })
        .collect()
}

#[test]
fn criterion_04_kl_exposure_reduces_to_product() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut failures = Vec::new();
    let qrels = Qrels::new();
    for case in 0..100 {
        let (p, q) = DYADIC[rng.gen_range(0..DYADIC.len())];
        let gamma = ratio(p, q);
        let model = BrowsingModel::new(p as f64 / q as f64).unwrap();
        let (num_cats, labeled) = (rng.gen_range(2..=4), rng.gen_range(4..=9));
        let inst = random_instance(&mut rng, num_cats, labeled, false);
        let users = rng.gen_range(1..=6);
        let population: Vec<UserIdx> = (0..users).map(UserIdx).collect();
        let systems = rng.gen_range(2..=5);
        let lists: Vec<Vec<Vec<u32>>> = (0..systems)
            .map(|_| {
                (0..users)
                    .map(|_| {
                        let len = rng.gen_range(inst.num_cats..=10);
                        inst.covering_list(&mut rng, len)
                    })
                    .collect()
            })
            .collect();
        let runs = runs_from(&lists);
        let ctx = metrics::EvalContext::new(&qrels, &inst.cats, model, &population);
        // lower divergence is better, so negate to compare with the product
        let library: Vec<f64> = runs
            .iter()
            .map(|r| -metrics::evaluate(r, Metric::DexpKl, &ctx).unwrap().value)
            .collect();
        let exact: Vec<BigRational> = lists
            .iter()
            .map(|per_user| {
                per_user
                    .iter()
                    .flat_map(|l| exact_theta(l, &gamma, &inst.cats))
                    .fold(BigRational::one(), |acc, t| acc * t)
            })
            .collect();
        if let Err(e) = same_order(&library, &exact, 1e-12) {
            failures.push(format!("case {case}: {e}"));
        }
    }
    finish(
        4,
        "mean KL exposure divergence ordering equals exact θ product",
        start,
        failures,
        "100 instances".into(),
    );
}

#[test]
fn criterion_05_eild_reduces_to_same_category_exposure() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut failures = Vec::new();
    let qrels = Qrels::new();
    for case in 0..100 {
        let (p, q) = DYADIC[rng.gen_range(0..DYADIC.len())];
        let gamma = ratio(p, q);
        let model = BrowsingModel::new(p as f64 / q as f64).unwrap();
        let (num_cats, labeled) = (rng.gen_range(1..=4), rng.gen_range(4..=9));
        let inst = random_instance(&mut rng, num_cats, labeled, true);
        let users = rng.gen_range(1..=6);
        let population: Vec<UserIdx> = (0..users).map(UserIdx).collect();
        let lengths: Vec<usize> = (0..users).map(|_| rng.gen_range(2..=10)).collect();
        let systems = rng.gen_range(2..=5);
        let lists: Vec<Vec<Vec<u32>>> = (0..systems)
            .map(|_| {
                lengths
                    .iter()
                    .map(|&n| inst.random_list(&mut rng, n))
                    .collect()
            })
            .collect();
        let runs = runs_from(&lists);
        let ctx = metrics::EvalContext::new(&qrels, &inst.cats, model, &population);
        let library: Vec<f64> = runs
            .iter()
            .map(|r| metrics::evaluate(r, Metric::Eild, &ctx).unwrap().value)
            .collect();
        // negated same-category exposure: Σ_u Σ_{i<j} P(i) P(j-i) 1[same category]
        let exact: Vec<BigRational> = lists
            .iter()
            .map(|per_user| {
                let mut total = BigRational::zero();
                for l in per_user {
                    let stops = exact_stops(&gamma, l.len());
                    for i in 0..l.len() {
                        for j in i + 1..l.len() {
                            let (a, b) = (
                                inst.cats.labels(ItemIdx(l[i])),
                                inst.cats.labels(ItemIdx(l[j])),
                            );
                            if !a.is_empty() && a == b {
                                total += &stops[i] * &stops[j - i - 1];
                            }
                        }
                    }
                }
                -total
            })
            .collect();
        if let Err(e) = same_order(&library, &exact, 1e-12) {
            failures.push(format!("case {case}: {e}"));
        }
    }
    finish(
        5,
        "EILD ordering equals negated same-category exposure",
        start,
        failures,
        "100 instances".into(),
    );
}

struct Fixture {
    name: &'static str,
    labels: Vec<(u32, &'static str)>,
    ranking: Vec<u32>,
    ideal_length: usize,
    /// Hand-traced output at p = 0.
    promoted: Vec<u32>,
}

fn fixtures() -> Vec<Fixture> {
    vec![
        Fixture {
            name: "single category",
            labels: vec![(3, "a"), (1, "a"), (7, "a")],
            ranking: vec![7, 2, 3, 5, 1],
            ideal_length: 100,
            promoted: vec![7, 3, 1, 2, 5],
        },
        Fixture {
            name: "round robin",
            labels: vec![(0, "a"), (2, "a"), (1, "b")],
            ranking: vec![0, 1, 2],
            ideal_length: 100,
            promoted: vec![0, 1, 2],
        },
        Fixture {
            name: "unlabeled items trail",
            labels: vec![(0, "a"), (0, "b"), (1, "a"), (2, "a"), (3, "b")],
            ranking: vec![9, 0, 1, 3, 2],
            ideal_length: 100,
            promoted: vec![0, 1, 3, 2, 9],
        },
        Fixture {
            name: "multi-label item covers two categories",
            labels: vec![(10, "a"), (11, "a"), (13, "a"), (12, "b"), (13, "c")],
            ranking: vec![1, 2, 11, 3, 12, 10, 4, 13],
            ideal_length: 100,
            promoted: vec![11, 12, 13, 10, 1, 2, 3, 4],
        },
        Fixture {
            name: "multi-label skip within a round",
            labels: vec![(1, "a"), (2, "a"), (3, "a"), (1, "b"), (4, "b"), (5, "c")],
            ranking: vec![4, 1, 5, 2, 3],
            ideal_length: 100,
            promoted: vec![1, 5, 2, 4, 3],
        },
        Fixture {
            name: "truncated promoted list",
            labels: vec![(10, "a"), (11, "a"), (13, "a"), (12, "b"), (13, "c")],
            ranking: vec![1, 2, 11, 3, 12, 10, 4, 13],
            ideal_length: 2,
            promoted: vec![11, 12, 1, 2, 3, 10, 4, 13],
        },
    ]
}

#[test]
fn criterion_06_interleave_endpoints() {
    let start = Instant::now();
    let mut failures = Vec::new();
    let all = fixtures();
    for f in &all {
        let cats = CategoryMap::from_pairs(f.labels.iter().map(|&(i, c)| (ItemIdx(i), c))).unwrap();
        let ranking = Ranking::new(UserIdx(0), items(&f.ranking)).unwrap();
        for seed in [0, 1, 99] {
            let at = |p: f64| {
                let policy = PromotionPolicy::new(p, f.ideal_length, seed).unwrap();
                interleave(&ranking, &policy, &cats, "user")
                    .unwrap()
                    .items()
                    .to_vec()
            };
            if at(1.0) != items(&f.ranking) {
                failures.push(format!("{}: p=1 is not the original ranking", f.name));
            }
            if at(0.0) != items(&f.promoted) {
                failures.push(format!("{}: p=0 gave {:?}", f.name, at(0.0)));
            }
        }
    }
    finish(
        6,
        "interleave endpoints",
        start,
        failures,
        format!("{} hand-traced fixtures", all.len()),
    );
}

#[test]
fn criterion_07_tradeoff_is_monotone() {
    let start = Instant::now();
    let p_values = vec![0.0, 0.25, 0.5, 0.75, 1.0];
    let seeds = 20u64;
    let mut ndcg = vec![0.0; p_values.len()];
    let mut common = vec![0.0; p_values.len()];
    let settings = Settings::default();
    for seed in 0..seeds {
        let corpus = generate(&SynthConfig {
            seed,
            ..SynthConfig::default()
        })
        .unwrap();
        let population = corpus.population();
        let config = TradeoffConfig {
            p_values: p_values.clone(),
            ideal_length: 100,
            seed,
            cutoff: 100,
        };
        let rows = tradeoff_sweep(
            &corpus.runs,
            &corpus.qrels,
            &corpus.categories,
            &population,
            &corpus.vocab,
            &settings,
            &config,
        )
        .unwrap();
        let per_p = (rows.len() / p_values.len()) as f64 * seeds as f64;
        for row in rows {
            let k = p_values.iter().position(|&p| p == row.p).unwrap();
            ndcg[k] += row.ndcg / per_p;
            common[k] += row.mean_log_commonality / per_p;
        }
    }
    let mut failures = Vec::new();
    for k in 1..p_values.len() {
        if common[k] > common[k - 1] {
            failures.push(format!(
                "log-commonality rises from p={} to p={}",
                p_values[k - 1],
                p_values[k]
            ));
        }
        if ndcg[k] < ndcg[k - 1] {
            failures.push(format!(
                "nDCG@100 falls from p={} to p={}",
                p_values[k - 1],
                p_values[k]
            ));
        }
    }
    let fmt = |v: &[f64]| {
        v.iter()
            .map(|x| format!("{x:.3}"))
            .collect::<Vec<_>>()
            .join(" ")
    };
    finish(
        7,
        "promotion trades utility for commonality",
        start,
        failures,
        format!(
            "{seeds} seeds, nDCG@100 [{}], mean log-commonality [{}]",
            fmt(&ndcg),
            fmt(&common)
        ),
    );
}

#[test]
fn criterion_08_label_removal_robustness() {
    let start = Instant::now();
    let corpus = generate(&SynthConfig::default()).unwrap();
    let population = corpus.population();
    let metrics = [
        Metric::Precision(100),
        Metric::Recall(100),
        Metric::Ndcg(100),
    ];
    let input = SweepInput {
        runs: &corpus.runs,
        qrels: &corpus.qrels,
        cats: &corpus.categories,
        population: &population,
        settings: Settings::default(),
        metrics: &metrics,
    };
    let spec = TrialSpec {
        seed: 8,
        trials: 5,
        levels: vec![10.0, 30.0, 50.0, 70.0, 90.0],
    };
    let table = run_sweep(&input, Perturbation::Labels, SweepMode::Robustness, &spec).unwrap();
    let mut failures = Vec::new();
    for row in &table.rows {
        if row.metric != "commonality" && row.tau != 1.0 {
            failures.push(format!(
                "{} tau {} at {}% kept",
                row.metric, row.tau, row.level
            ));
        }
    }
    let mut means = BTreeMap::new();
    for s in table.summary.iter().filter(|s| s.metric == "commonality") {
        means.insert(s.level as u32, s.mean_tau);
        // at most half of the labels removed
        if s.level >= 50.0 && s.mean_tau < 0.6 {
            failures.push(format!(
                "commonality mean tau {} at {}% kept",
                s.mean_tau, s.level
            ));
        }
    }
    if means[&90] < means[&50] {
        failures.push(format!(
            "commonality tau higher at 50% kept ({}) than 90% kept ({})",
            means[&50], means[&90]
        ));
    }
    let detail = means
        .iter()
        .map(|(l, t)| format!("{l}%:{t:.3}"))
        .collect::<Vec<_>>()
        .join(" ");
    finish(
        8,
        "label removal robustness",
        start,
        failures,
        format!("commonality mean tau by labels kept {detail}; utility tau 1"),
    );
}

fn small_corpus(dir: &Path) {
    let config = SynthConfig {
        systems: 4,
        users: 120,
        items: 600,
        categories: 4,
        list_length: 30,
        seed: 9,
        ..SynthConfig::default()
    };
    write_corpus(&generate(&config).unwrap(), dir).unwrap();
}

fn read_tree(dir: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    let mut out = BTreeMap::new();
    for entry in fs::read_dir(dir).unwrap() {
        let path = entry.unwrap().path();
        out.insert(
            path.strip_prefix(dir).unwrap().to_path_buf(),
            fs::read(&path).unwrap(),
        );
    }
    out
}

#[test]
fn criterion_09_outputs_are_deterministic() {
    let start = Instant::now();
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("data");
    small_corpus(&data);
    let path = |p: PathBuf| p.to_str().unwrap().to_string();
    let commands: Vec<(&str, Vec<&str>)> = vec![
        ("evaluate", vec![]),
        ("correlate", vec![]),
        (
            "robustness",
            vec![
                "--perturbation",
                "labels",
                "--trials",
                "2",
                "--levels",
                "50,90",
            ],
        ),
        (
            "robustness",
            vec![
                "--perturbation",
                "parity",
                "--trials",
                "2",
                "--levels",
                "50",
            ],
        ),
        (
            "sample-users",
            vec![
                "--trials",
                "2",
                "--levels",
                "30,70",
                "--mode",
                "correlation",
            ],
        ),
        ("interleave", vec!["--p", "0,0.5,1", "--ideal-length", "20"]),
    ];
    let mut failures = Vec::new();
    for (n, (command, extra)) in commands.iter().enumerate() {
        let mut outputs = Vec::new();
        for (attempt, threads) in ["1", "1", "4", "4"].iter().enumerate() {
            let out = tmp.path().join(format!("out-{n}-{attempt}"));
            let mut args = vec![
                "commonality".to_string(),
                "--threads".into(),
                threads.to_string(),
                command.to_string(),
                "--runs".into(),
                path(data.join("runs")),
                "--qrels".into(),
                path(data.join("qrels.txt")),
                "--labels".into(),
                path(data.join("labels.tsv")),
                "--seed".into(),
                "17".into(),
                "--out".into(),
                path(out.clone()),
            ];
            args.extend(extra.iter().map(|s| s.to_string()));
            let code = cli::run(args);
            if code != 0 {
                failures.push(format!("{command} exited {code}"));
                break;
            }
            outputs.push(read_tree(&out));
        }
        if outputs.iter().any(|o| o.is_empty()) {
            failures.push(format!("{command} wrote nothing"));
        }
        if outputs.windows(2).any(|w| w[0] != w[1]) {
            failures.push(format!(
                "{command} {} output differs across runs",
                extra.join(" ")
            ));
        }
    }
    finish(
        9,
        "byte-identical outputs across runs and thread counts",
        start,
        failures,
        format!("{} commands x 2 runs x threads 1,4", commands.len()),
    );
}

#[test]
fn criterion_10_full_scale_evaluate_under_a_minute() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("data");
    let config = SynthConfig {
        systems: 12,
        users: 10_000,
        items: 5000,
        categories: 10,
        list_length: 100,
        seed: 10,
        ..SynthConfig::default()
    };
    write_corpus(&generate(&config).unwrap(), &data).unwrap();
    let path = |p: PathBuf| p.to_str().unwrap().to_string();
    let start = Instant::now();
    let code = cli::run([
        "commonality".to_string(),
        "evaluate".into(),
        "--runs".into(),
        path(data.join("runs")),
        "--qrels".into(),
        path(data.join("qrels.txt")),
        "--labels".into(),
        path(data.join("labels.tsv")),
        "--out".into(),
        path(tmp.path().join("out")),
    ]);
    let elapsed = start.elapsed();
    let mut failures = Vec::new();
    if code != 0 {
        failures.push(format!("evaluate exited {code}"));
    }
    let threads = std::thread::available_parallelism()
        .map(|n| n.get())
        .unwrap_or(1);
    finish(
        10,
        "evaluate 12 systems x 10k users x top-100 x 10 categories",
        start,
        failures,
        format!(
            "all metrics in {:.1}s on {threads} thread(s)",
            elapsed.as_secs_f64()
        ),
    );
}

/// Optional: set `COMMONALITY_MOVIELENS_DIR` to a directory holding
/// `runs/`, `qrels.txt` and `labels.tsv` for the public movielens-1m runs.
#[test]
fn criterion_11_movielens_correlation_report() {
    let title = "movielens-1m correlation report";
    let Some(data) = std::env::var_os("COMMONALITY_MOVIELENS_DIR").map(PathBuf::from) else {
        let _ = writeln!(
            std::io::stderr(),
            "acceptance 11 SKIP {title}: COMMONALITY_MOVIELENS_DIR not set"
        );
        return;
    };
    let start = Instant::now();
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("out");
    let path = |p: PathBuf| p.to_str().unwrap().to_string();
    let code = cli::run([
        "commonality".to_string(),
        "correlate".into(),
        "--runs".into(),
        path(data.join("runs")),
        "--qrels".into(),
        path(data.join("qrels.txt")),
        "--labels".into(),
        path(data.join("labels.tsv")),
        "--out".into(),
        path(out.clone()),
    ]);
    let mut failures = Vec::new();
    let mut detail = String::new();
    if code != 0 {
        failures.push(format!("correlate exited {code}"));
    } else {
        let text = fs::read_to_string(out.join("correlation.csv")).unwrap();
        let rows = text.lines().filter(|l| !l.starts_with('#')).count();
        if rows != 1 + Metric::all(100).len() {
            failures.push(format!("{rows} lines in correlation.csv"));
        }
        detail = format!("{} metric pairs written", rows.saturating_sub(1));
    }
    let report = |ok| report(11, title, ok, &detail, start.elapsed());
    report(failures.is_empty());
    assert!(failures.is_empty(), "{failures:?}");
}
