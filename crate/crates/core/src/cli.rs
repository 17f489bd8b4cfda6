//! Command-line front end.
//!
//! Every experiment setting can come from a flat `key = value` config file
//! (`--config`) and be overridden by the matching flag. Each output file
//! starts with `#` lines echoing the resolved configuration, its SHA-256 and
//! the seed; JSON outputs carry the same fields.

use std::collections::BTreeMap;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::analysis::{
    commonality_table, correlate_orderings, run_sweep, system_orderings, Perturbation, Settings,
    SweepInput, SweepMode, SweepTable, TrialSpec, DEFAULT_LEVELS, DEFAULT_TRIALS,
};
use crate::browse::{BrowsingModel, DEFAULT_PATIENCE};
use crate::commonality::{standings, CommonalityOptions, MissingUsers, Residual};
use crate::corpus::{Corpus, CorpusPaths, DEFAULT_RELEVANCE_THRESHOLD};
use crate::error::{Error, Result};
use crate::interleave::{tradeoff_sweep, TradeoffConfig, DEFAULT_IDEAL_LENGTH};
use crate::metrics::{self, EvalContext, Metric, DEFAULT_ALPHA, DEFAULT_CUTOFF};
use crate::synth::{self, SynthConfig};

/// Environment variable read when `--threads` is absent.
pub const THREADS_ENV: &str = "COMMONALITY_THREADS";

#[derive(Parser, Debug)]
#[command(
    name = "commonality",
    version,
    about = "Commonality and baseline metrics for recommendation runs"
)]
pub struct Cli {
    /// Worker threads; defaults to the number of logical cores.
    #[arg(long, global = true, env = THREADS_ENV)]
    pub threads: Option<usize>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Per-system metrics, per-category commonality and the Borda table.
    Evaluate(CorpusArgs),
    /// Kendall's tau between the commonality ordering and each metric.
    Correlate(CorpusArgs),
    /// Tau of perturbed orderings across label perturbation levels.
    Robustness(SweepArgs),
    /// Tau of orderings computed on sampled user subsets.
    SampleUsers(SweepArgs),
    /// Utility/commonality tradeoff of interleaved promotion.
    Interleave(InterleaveArgs),
    /// Write a synthetic corpus.
    Synth(SynthArgs),
}

#[derive(Args, Debug, Clone, Default)]
pub struct CorpusArgs {
    /// Flat `key = value` file; flags override its entries.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Run files or directories of run files (comma separated or repeated).
    #[arg(long, value_delimiter = ',')]
    pub runs: Vec<PathBuf>,
    #[arg(long)]
    pub qrels: Option<PathBuf>,
    /// Item-to-category TSV.
    #[arg(long)]
    pub labels: Option<PathBuf>,
    /// Optional catalog file, one item per line.
    #[arg(long)]
    pub catalog: Option<PathBuf>,
    /// Minimum rating counted as relevant.
    #[arg(long)]
    pub threshold: Option<f64>,
    /// Browsing patience in (0, 1).
    #[arg(long)]
    pub patience: Option<f64>,
    /// Cutoff used by the default metric list.
    #[arg(long)]
    pub k: Option<usize>,
    /// Novelty penalty of alpha-nDCG.
    #[arg(long)]
    pub alpha: Option<f64>,
    /// Comma-separated metric keys, e.g. `nDCG@100,eild`.
    #[arg(long)]
    pub metrics: Option<String>,
    #[arg(long, value_enum)]
    pub missing_users: Option<MissingArg>,
    #[arg(long, value_enum)]
    pub residual: Option<ResidualArg>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// `csv`, `json` or `csv,json`.
    #[arg(long)]
    pub format: Option<String>,
}

#[derive(Args, Debug, Clone, Default)]
pub struct SweepArgs {
    #[command(flatten)]
    pub corpus: CorpusArgs,
    /// Comma-separated percentages in (0, 100]; 100 is the unperturbed corpus.
    #[arg(long)]
    pub levels: Option<String>,
    #[arg(long)]
    pub trials: Option<usize>,
    /// dominant, parity or labels (robustness only).
    #[arg(long)]
    pub perturbation: Option<String>,
    #[arg(long, value_enum)]
    pub mode: Option<ModeArg>,
}

#[derive(Args, Debug, Clone, Default)]
pub struct InterleaveArgs {
    #[command(flatten)]
    pub corpus: CorpusArgs,
    /// Comma-separated probabilities of keeping the original ranking.
    #[arg(long)]
    pub p: Option<String>,
    #[arg(long)]
    pub ideal_length: Option<usize>,
}

#[derive(Args, Debug, Clone)]
pub struct SynthArgs {
    #[arg(long, default_value_t = 5)]
    pub systems: usize,
    #[arg(long, default_value_t = 500)]
    pub users: usize,
    #[arg(long, default_value_t = 2000)]
    pub items: usize,
    #[arg(long, default_value_t = 5)]
    pub categories: usize,
    #[arg(long, default_value_t = 100)]
    pub list_length: usize,
    #[arg(long, default_value_t = 3)]
    pub min_per_category: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(ValueEnum, Clone, Copy, Debug)]
pub enum MissingArg {
    Zero,
    Skip,
}

#[derive(ValueEnum, Clone, Copy, Debug)]
pub enum ResidualArg {
    Drop,
    Renormalize,
}

#[derive(ValueEnum, Clone, Copy, Debug)]
pub enum ModeArg {
    Robustness,
    Correlation,
}

fn value_name<T: ValueEnum>(v: &T) -> String {
    v.to_possible_value()
        .map(|p| p.get_name().to_string())
        .unwrap_or_default()
}

/// Parses a flat `key = value` file. Blank lines and `#` comments are
/// skipped; keys may use `-` or `_`.
pub fn parse_config(text: &str) -> Result<BTreeMap<String, String>> {
    let mut out = BTreeMap::new();
    for (n, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("config line {}: expected key = value", n + 1)))?;
        out.insert(key.trim().replace('-', "_"), value.trim().to_string());
    }
    Ok(out)
}

const KNOWN_KEYS: &[&str] = &[
    "runs",
    "qrels",
    "labels",
    "catalog",
    "threshold",
    "patience",
    "k",
    "alpha",
    "metrics",
    "missing_users",
    "residual",
    "seed",
    "out",
    "format",
    "levels",
    "trials",
    "perturbation",
    "mode",
    "p",
    "ideal_length",
];

/// Configuration after merging file entries, flags and defaults.
#[derive(Clone, Debug)]
pub struct ExperimentConfig {
    pub command: &'static str,
    pub paths: CorpusPaths,
    pub settings: Settings,
    pub metrics: Vec<Metric>,
    pub seed: u64,
    pub out: PathBuf,
    pub csv: bool,
    pub json: bool,
    pub trials: TrialSpec,
    pub perturbation: Perturbation,
    pub mode: SweepMode,
    pub p_values: Vec<f64>,
    pub ideal_length: usize,
    pub cutoff: usize,
    /// Resolved settings echoed into every output.
    pub echo: BTreeMap<String, String>,
}

impl ExperimentConfig {
    pub fn config_hash(&self) -> String {
        let mut h = Sha256::new();
        for (k, v) in &self.echo {
            h.update(format!("{k}={v}\n"));
        }
        format!("{:x}", h.finalize())
    }
}

struct Resolver {
    file: BTreeMap<String, String>,
    flags: BTreeMap<&'static str, String>,
    echo: BTreeMap<String, String>,
}

impl Resolver {
    fn new(config: Option<&Path>) -> Result<Self> {
        let file = match config {
            Some(path) => {
                let text = fs::read_to_string(path).map_err(|source| Error::File {
                    path: path.to_path_buf(),
                    source,
                })?;
                let map = parse_config(&text)?;
                if let Some(k) = map.keys().find(|k| !KNOWN_KEYS.contains(&k.as_str())) {
                    return Err(Error::Config(format!(
                        "{}: unknown key `{k}`",
                        path.display()
                    )));
                }
                map
            }
            None => BTreeMap::new(),
        };
        Ok(Self {
            file,
            flags: BTreeMap::new(),
            echo: BTreeMap::new(),
        })
    }

    fn flag(&mut self, key: &'static str, value: Option<String>) {
        if let Some(v) = value {
            self.flags.insert(key, v);
        }
    }

    fn raw(&self, key: &str) -> Option<String> {
        self.flags
            .get(key)
            .cloned()
            .or_else(|| self.file.get(key).cloned())
    }

    /// The value for `key`, or `default`, recorded in the echo.
    fn get<T: FromStr>(&mut self, key: &str, default: &str) -> Result<T> {
        let text = self.raw(key).unwrap_or_else(|| default.to_string());
        let value = text
            .parse()
            .map_err(|_| Error::Config(format!("invalid value for `{key}`: {text:?}")))?;
        self.echo.insert(key.to_string(), text);
        Ok(value)
    }

    fn list<T: FromStr>(&mut self, key: &str, default: &str) -> Result<Vec<T>> {
        let text: String = self.get(key, default)?;
        text.split(',')
            .map(str::trim)
            .filter(|s| !s.is_empty())
            .map(|s| {
                s.parse()
                    .map_err(|_| Error::Config(format!("invalid entry {s:?} in `{key}`")))
            })
            .collect()
    }

    fn path(&mut self, key: &str) -> Option<PathBuf> {
        let p = self.raw(key)?;
        self.echo.insert(key.to_string(), p.clone());
        Some(PathBuf::from(p))
    }
}

fn join<T: ToString>(values: &[T]) -> String {
    values
        .iter()
        .map(T::to_string)
        .collect::<Vec<_>>()
        .join(",")
}

/// Expands directories into their files, sorted by name.
fn expand_runs(paths: &[PathBuf]) -> Result<Vec<PathBuf>> {
    let mut out = Vec::new();
    for p in paths {
        let meta = fs::metadata(p).map_err(|source| Error::File {
            path: p.clone(),
            source,
        })?;
        if meta.is_dir() {
            let mut files: Vec<PathBuf> = fs::read_dir(p)?
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|f| f.is_file())
                .collect();
            files.sort();
            out.extend(files);
        } else {
            out.push(p.clone());
        }
    }
    if out.is_empty() {
        return Err(Error::Config("no run files given".into()));
    }
    Ok(out)
}

fn required(r: &mut Resolver, key: &'static str) -> Result<PathBuf> {
    r.path(key)
        .ok_or_else(|| Error::Config(format!("missing required setting `{key}` (flag --{key})")))
}

fn resolve(
    command: &'static str,
    corpus: &CorpusArgs,
    sweep: Option<&SweepArgs>,
    inter: Option<&InterleaveArgs>,
) -> Result<ExperimentConfig> {
    let mut r = Resolver::new(corpus.config.as_deref())?;
    if !corpus.runs.is_empty() {
        r.flag(
            "runs",
            Some(join(
                &corpus.runs.iter().map(|p| p.display()).collect::<Vec<_>>(),
            )),
        );
    }
    r.flag(
        "qrels",
        corpus.qrels.as_ref().map(|p| p.display().to_string()),
    );
    r.flag(
        "labels",
        corpus.labels.as_ref().map(|p| p.display().to_string()),
    );
    r.flag(
        "catalog",
        corpus.catalog.as_ref().map(|p| p.display().to_string()),
    );
    r.flag("threshold", corpus.threshold.map(|v| v.to_string()));
    r.flag("patience", corpus.patience.map(|v| v.to_string()));
    r.flag("k", corpus.k.map(|v| v.to_string()));
    r.flag("alpha", corpus.alpha.map(|v| v.to_string()));
    r.flag("metrics", corpus.metrics.clone());
    r.flag(
        "missing_users",
        corpus.missing_users.as_ref().map(value_name),
    );
    r.flag("residual", corpus.residual.as_ref().map(value_name));
    r.flag("seed", corpus.seed.map(|v| v.to_string()));
    r.flag("out", corpus.out.as_ref().map(|p| p.display().to_string()));
    r.flag("format", corpus.format.clone());
    if let Some(s) = sweep {
        r.flag("levels", s.levels.clone());
        r.flag("trials", s.trials.map(|v| v.to_string()));
        r.flag("perturbation", s.perturbation.clone());
        r.flag("mode", s.mode.as_ref().map(value_name));
    }
    if let Some(i) = inter {
        r.flag("p", i.p.clone());
        r.flag("ideal_length", i.ideal_length.map(|v| v.to_string()));
    }

    let run_paths: Vec<PathBuf> = required(&mut r, "runs")?
        .to_string_lossy()
        .split(',')
        .map(|s| PathBuf::from(s.trim()))
        .collect();
    let runs = expand_runs(&run_paths)?;
    let qrels = required(&mut r, "qrels")?;
    let labels = required(&mut r, "labels")?;
    let catalog = r.path("catalog");
    for p in [Some(&qrels), Some(&labels), catalog.as_ref()]
        .into_iter()
        .flatten()
    {
        if !p.exists() {
            return Err(Error::File {
                path: p.clone(),
                source: std::io::Error::new(std::io::ErrorKind::NotFound, "no such file"),
            });
        }
    }
    let threshold: f64 = r.get("threshold", &DEFAULT_RELEVANCE_THRESHOLD.to_string())?;
    let patience: f64 = r.get("patience", &DEFAULT_PATIENCE.to_string())?;
    let model = BrowsingModel::new(patience)?;
    let k: usize = r.get("k", &DEFAULT_CUTOFF.to_string())?;
    if k == 0 {
        return Err(Error::Config("k must be at least 1".into()));
    }
    let alpha: f64 = r.get("alpha", &DEFAULT_ALPHA.to_string())?;
    let default_metrics = join(&Metric::all(k));
    let metrics: Vec<Metric> = r.list("metrics", &default_metrics)?;
    let missing = match r.get::<String>("missing_users", "zero")?.as_str() {
        "zero" => MissingUsers::Zero,
        "skip" => MissingUsers::Skip,
        other => return Err(Error::Config(format!("invalid missing_users {other:?}"))),
    };
    let residual = match r.get::<String>("residual", "drop")?.as_str() {
        "drop" => Residual::Drop,
        "renormalize" => Residual::Renormalize,
        other => return Err(Error::Config(format!("invalid residual {other:?}"))),
    };
    let seed: u64 = r.get("seed", "0")?;
    let format: String = r.get("format", "csv,json")?;
    let formats: Vec<&str> = format.split(',').map(str::trim).collect();
    if formats.iter().any(|f| !matches!(*f, "csv" | "json")) {
        return Err(Error::Config(format!("invalid format {format:?}")));
    }

    let (mut trials, mut perturbation, mut mode) = (
        TrialSpec::default(),
        Perturbation::Labels,
        SweepMode::Robustness,
    );
    if sweep.is_some() {
        let default_perturbation = if command == "sample-users" {
            "users"
        } else {
            "labels"
        };
        perturbation = r.get("perturbation", default_perturbation)?;
        if (command == "sample-users") != (perturbation == Perturbation::Users) {
            return Err(Error::Config(format!(
                "perturbation `{perturbation}` is not available in `{command}`"
            )));
        }
        mode = match r.get::<String>("mode", "robustness")?.as_str() {
            "robustness" => SweepMode::Robustness,
            "correlation" => SweepMode::Correlation,
            other => return Err(Error::Config(format!("invalid mode {other:?}"))),
        };
        trials = TrialSpec {
            seed,
            trials: r.get("trials", &DEFAULT_TRIALS.to_string())?,
            levels: r.list("levels", &join(&DEFAULT_LEVELS))?,
        };
        trials.validate()?;
    }
    let (mut p_values, mut ideal_length) = (Vec::new(), DEFAULT_IDEAL_LENGTH);
    if inter.is_some() {
        p_values = r.list("p", "0,0.25,0.5,0.75,1")?;
        ideal_length = r.get("ideal_length", &DEFAULT_IDEAL_LENGTH.to_string())?;
    }
    let out = r
        .raw("out")
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from("out"));
    r.echo.remove("out");
    r.echo.insert(
        "runs".into(),
        join(&runs.iter().map(|p| p.display()).collect::<Vec<_>>()),
    );

    Ok(ExperimentConfig {
        command,
        paths: CorpusPaths {
            runs,
            qrels,
            labels,
            catalog,
            threshold,
        },
        settings: Settings {
            model,
            alpha,
            commonality: CommonalityOptions { missing, residual },
        },
        metrics,
        seed,
        out,
        csv: formats.contains(&"csv"),
        json: formats.contains(&"json"),
        trials,
        perturbation,
        mode,
        p_values,
        ideal_length,
        cutoff: k,
        echo: r.echo,
    })
}

/// One output table: CSV with a provenance header and a JSON mirror.
struct Table<'a> {
    config: &'a ExperimentConfig,
    name: &'a str,
    columns: &'a [&'a str],
    rows: Vec<Vec<String>>,
}

#[derive(Serialize)]
struct JsonTable<'a> {
    command: &'a str,
    config: &'a BTreeMap<String, String>,
    config_sha256: String,
    seed: u64,
    columns: &'a [&'a str],
    rows: Vec<BTreeMap<&'a str, serde_json::Value>>,
}

fn json_cell(s: &str) -> serde_json::Value {
    match s.parse::<f64>() {
        Ok(v) if v.is_finite() && !s.is_empty() => serde_json::Number::from_f64(v)
            .map(serde_json::Value::Number)
            .unwrap_or_else(|| serde_json::Value::String(s.to_string())),
        _ => serde_json::Value::String(s.to_string()),
    }
}

impl Table<'_> {
    fn write(&self) -> Result<()> {
        let c = self.config;
        fs::create_dir_all(&c.out)?;
        if c.csv {
            let path = c.out.join(format!("{}.csv", self.name));
            let mut w = create(&path)?;
            writeln!(w, "# commonality {}", c.command)?;
            for (k, v) in &c.echo {
                writeln!(w, "# {k}={v}")?;
            }
            writeln!(w, "# config_sha256={}", c.config_hash())?;
            writeln!(w, "# seed={}", c.seed)?;
            writeln!(w, "{}", self.columns.join(","))?;
            for row in &self.rows {
                writeln!(w, "{}", row.join(","))?;
            }
            w.flush()?;
        }
        if c.json {
            let path = c.out.join(format!("{}.json", self.name));
            let table = JsonTable {
                command: c.command,
                config: &c.echo,
                config_sha256: c.config_hash(),
                seed: c.seed,
                columns: self.columns,
                rows: self
                    .rows
                    .iter()
                    .map(|r| {
                        self.columns
                            .iter()
                            .copied()
                            .zip(r.iter().map(|s| json_cell(s)))
                            .collect()
                    })
                    .collect(),
            };
            let mut w = create(&path)?;
            serde_json::to_writer_pretty(&mut w, &table).map_err(std::io::Error::from)?;
            writeln!(w)?;
            w.flush()?;
        }
        Ok(())
    }
}

fn create(path: &Path) -> Result<BufWriter<fs::File>> {
    fs::File::create(path)
        .map(BufWriter::new)
        .map_err(|source| Error::File {
            path: path.to_path_buf(),
            source,
        })
}

fn load(config: &ExperimentConfig) -> Result<Corpus> {
    let corpus = Corpus::load(&config.paths)?;
    for w in &corpus.warnings {
        log::warn!("{w}");
    }
    Ok(corpus)
}

fn cmd_evaluate(config: &ExperimentConfig) -> Result<()> {
    let corpus = load(config)?;
    let population = corpus.population();
    let cats = &corpus.categories;
    let mut ctx = EvalContext::new(&corpus.qrels, cats, config.settings.model, &population);
    ctx.alpha = config.settings.alpha;

    let mut metric_rows = Vec::new();
    for run in &corpus.runs {
        for &m in &config.metrics {
            let v = metrics::evaluate(run, m, &ctx)?;
            let flags = v
                .flags
                .iter()
                .map(|(k, n)| format!("{k}={n}"))
                .collect::<Vec<_>>()
                .join(";");
            metric_rows.push(vec![v.system, v.metric, v.value.to_string(), flags]);
        }
    }
    Table {
        config,
        name: "metrics",
        columns: &["system", "metric", "value", "flags"],
        rows: metric_rows,
    }
    .write()?;

    let table = commonality_table(&corpus.runs, cats, &population, &config.settings)?;
    let mut rows = Vec::new();
    for (run, results) in corpus.runs.iter().zip(&table.per_system) {
        for r in results {
            rows.push(vec![
                run.system().to_string(),
                cats.name(r.category).to_string(),
                r.log_value.to_string(),
                r.zero_users.to_string(),
            ]);
        }
    }
    Table {
        config,
        name: "commonality",
        columns: &["system", "category", "log_commonality", "zero_users"],
        rows,
    }
    .write()?;

    let ranks = standings(&table.borda);
    Table {
        config,
        name: "borda",
        columns: &["system", "borda_score", "rank"],
        rows: table
            .borda
            .iter()
            .zip(ranks)
            .map(|(b, r)| vec![b.system.clone(), b.score.to_string(), r.to_string()])
            .collect(),
    }
    .write()
}

fn cmd_correlate(config: &ExperimentConfig) -> Result<()> {
    let corpus = load(config)?;
    if corpus.runs.len() < 2 {
        return Err(Error::Config(
            "correlate needs at least two run files".into(),
        ));
    }
    let population = corpus.population();
    let orderings = system_orderings(
        &corpus.runs,
        &corpus.qrels,
        &corpus.categories,
        &population,
        &config.settings,
        &config.metrics,
    )?;
    let report = correlate_orderings(&orderings, 1)?;
    Table {
        config,
        name: "correlation",
        columns: &[
            "metric_a",
            "metric_b",
            "tau",
            "p_value",
            "significant",
            "bonferroni_divisor",
        ],
        rows: report
            .pairs
            .iter()
            .map(|p| {
                vec![
                    p.metric_a.clone(),
                    p.metric_b.clone(),
                    p.tau.to_string(),
                    p.p_value.to_string(),
                    p.significant.to_string(),
                    report.bonferroni_divisor.to_string(),
                ]
            })
            .collect(),
    }
    .write()?;
    let mut rows = Vec::new();
    for o in &orderings {
        for (rank, (system, value)) in o.ordered.iter().enumerate() {
            rows.push(vec![
                o.metric.clone(),
                (rank + 1).to_string(),
                system.clone(),
                value.to_string(),
            ]);
        }
    }
    Table {
        config,
        name: "orderings",
        columns: &["metric", "position", "system", "value"],
        rows,
    }
    .write()
}

fn write_sweep(config: &ExperimentConfig, table: &SweepTable) -> Result<()> {
    Table {
        config,
        name: "sweep",
        columns: &["perturbation", "level", "trial", "metric", "tau", "p_value"],
        rows: table
            .rows
            .iter()
            .map(|r| {
                vec![
                    r.perturbation.to_string(),
                    r.level.to_string(),
                    r.trial.to_string(),
                    r.metric.clone(),
                    r.tau.to_string(),
                    r.p_value.to_string(),
                ]
            })
            .collect(),
    }
    .write()?;
    Table {
        config,
        name: "summary",
        columns: &[
            "perturbation",
            "level",
            "metric",
            "mean_tau",
            "std_tau",
            "trials",
        ],
        rows: table
            .summary
            .iter()
            .map(|s| {
                vec![
                    s.perturbation.to_string(),
                    s.level.to_string(),
                    s.metric.clone(),
                    s.mean_tau.to_string(),
                    s.std_tau.to_string(),
                    s.trials.to_string(),
                ]
            })
            .collect(),
    }
    .write()
}

fn cmd_sweep(config: &ExperimentConfig) -> Result<()> {
    let corpus = load(config)?;
    let population = corpus.population();
    let input = SweepInput {
        runs: &corpus.runs,
        qrels: &corpus.qrels,
        cats: &corpus.categories,
        population: &population,
        settings: config.settings,
        metrics: &config.metrics,
    };
    let table = run_sweep(&input, config.perturbation, config.mode, &config.trials)?;
    write_sweep(config, &table)
}

fn cmd_interleave(config: &ExperimentConfig) -> Result<()> {
    let corpus = load(config)?;
    let population = corpus.population();
    let rows = tradeoff_sweep(
        &corpus.runs,
        &corpus.qrels,
        &corpus.categories,
        &population,
        &corpus.vocab,
        &config.settings,
        &TradeoffConfig {
            p_values: config.p_values.clone(),
            ideal_length: config.ideal_length,
            seed: config.seed,
            cutoff: config.cutoff,
        },
    )?;
    let ndcg_key = Metric::Ndcg(config.cutoff).key();
    let mut out = Vec::new();
    for row in &rows {
        let mut push = |metric: String, value: String| {
            out.push(vec![row.system.clone(), row.p.to_string(), metric, value]);
        };
        push(ndcg_key.clone(), row.ndcg.to_string());
        push(
            "mean_log_commonality".into(),
            row.mean_log_commonality.to_string(),
        );
        for (cat, v) in &row.log_commonality {
            push(format!("log_commonality:{cat}"), v.to_string());
        }
        push("borda_score".into(), row.borda_score.to_string());
        push("borda_rank".into(), row.borda_rank.to_string());
    }
    Table {
        config,
        name: "tradeoff",
        columns: &["system", "p", "metric", "value"],
        rows: out,
    }
    .write()
}

fn cmd_synth(args: &SynthArgs) -> Result<()> {
    let config = SynthConfig {
        systems: args.systems,
        users: args.users,
        items: args.items,
        categories: args.categories,
        list_length: args.list_length,
        min_per_category: args.min_per_category,
        seed: args.seed,
        ..SynthConfig::default()
    };
    let corpus = synth::generate(&config)?;
    synth::write_corpus(&corpus, &args.out)
}

/// Runs one parsed invocation on the current thread pool.
pub fn execute(command: &Command) -> Result<()> {
    match command {
        Command::Evaluate(a) => cmd_evaluate(&resolve("evaluate", a, None, None)?),
        Command::Correlate(a) => cmd_correlate(&resolve("correlate", a, None, None)?),
        Command::Robustness(a) => cmd_sweep(&resolve("robustness", &a.corpus, Some(a), None)?),
        Command::SampleUsers(a) => cmd_sweep(&resolve("sample-users", &a.corpus, Some(a), None)?),
        Command::Interleave(a) => cmd_interleave(&resolve("interleave", &a.corpus, None, Some(a))?),
        Command::Synth(a) => cmd_synth(a),
    }
}

/// Exit status for an error: 2 for bad input or usage, 1 otherwise.
pub fn exit_code(err: &Error) -> i32 {
    if err.is_input_error() {
        2
    } else {
        1
    }
}

/// Parses `args`, runs the command in a pool of the requested size and
/// returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    let pool = match rayon::ThreadPoolBuilder::new()
        .num_threads(cli.threads.unwrap_or(0))
        .build()
    {
        Ok(pool) => pool,
        Err(e) => {
            eprintln!("error: cannot start worker pool: {e}");
            return 1;
        }
    };
    match pool.install(|| execute(&cli.command)) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}
