//! Comparison of generators against a truth sample.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::{Duration, Instant};

use invsynth_core::baselines::{mc_fit, mc_generate, smote_generate, SmoteConfig};
use invsynth_core::generate::GenerationConfig;
use invsynth_core::metrics::{full_report, MetricReport};
use invsynth_core::model::KernelBackend;
use invsynth_core::schema::Inventory;
use invsynth_core::select::{apply_rule, SelectionRule};
use rayon::prelude::*;
use serde_json::json;

use crate::derive_seed;
use crate::error::{Error, Result};
use crate::io::{load_csv, save_inventory, write_json};
use crate::parallel::par_generate_pool;
use crate::report::{cdf_table, frequency_table, kde_table, report_json, write_rows};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Method {
    Proposed,
    MonteCarlo,
    Smote,
    /// Rows produced elsewhere, read from a CSV with the truth schema.
    External {
        name: String,
        path: PathBuf,
    },
}

impl Method {
    pub fn name(&self) -> &str {
        match self {
            Method::Proposed => "proposed",
            Method::MonteCarlo => "mc",
            Method::Smote => "smote",
            Method::External { name, .. } => name,
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;

    /// `proposed`, `mc` (or `monte_carlo`), `smote`, or `name=path.csv`.
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "proposed" => Ok(Method::Proposed),
            "mc" | "monte_carlo" => Ok(Method::MonteCarlo),
            "smote" => Ok(Method::Smote),
            _ => match s.split_once('=') {
                Some((name, path)) if !name.is_empty() && !path.is_empty() => {
                    Ok(Method::External { name: name.into(), path: path.into() })
                }
                _ => Err(Error::Usage(format!("unknown method `{s}`"))),
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchConfig {
    /// Candidate pool settings of the proposed method; its seed is replaced
    /// by one derived from `seed`.
    pub generation: GenerationConfig,
    pub rule: SelectionRule,
    pub smote_k: usize,
    pub seed: u64,
}

impl Default for BenchConfig {
    fn default() -> Self {
        BenchConfig {
            generation: GenerationConfig { candidates: 2000, temperature: 1.0, permutations: 4, ..Default::default() },
            rule: SelectionRule::TopQuantile(0.5),
            smote_k: 5,
            seed: 0,
        }
    }
}

#[derive(Debug)]
pub struct MethodOutcome {
    pub method: Method,
    /// Synthetic rows and their report, or why the method failed.
    pub result: Result<(Inventory, MetricReport)>,
    pub wall_clock: Duration,
}

#[derive(Debug)]
pub struct BenchResult {
    pub scenario: Option<String>,
    pub seed: u64,
    pub truth: Inventory,
    pub outcomes: Vec<MethodOutcome>,
}

impl BenchResult {
    pub fn report(&self, method: &str) -> Option<&MetricReport> {
        self.outcomes.iter().find(|o| o.method.name() == method).and_then(|o| o.result.as_ref().ok()).map(|(_, r)| r)
    }

    pub fn synthetic(&self, method: &str) -> Option<&Inventory> {
        self.outcomes.iter().find(|o| o.method.name() == method).and_then(|o| o.result.as_ref().ok()).map(|(s, _)| s)
    }

    pub fn failures(&self) -> impl Iterator<Item = (&Method, &Error)> {
        self.outcomes.iter().filter_map(|o| o.result.as_ref().err().map(|e| (&o.method, e)))
    }
}

/// Synthetic rows from `method`, fitted on `train` only. Baselines produce
/// `n` rows; the proposed method returns whatever its selection rule keeps.
pub fn synthesize(method: &Method, train: &Inventory, n: usize, config: &BenchConfig) -> Result<Inventory> {
    let seed = derive_seed(config.seed, method.name());
    let fail = |e| Error::method(method.name(), e);
    match method {
        Method::Proposed => {
            let model = KernelBackend::fit(train).map_err(fail)?;
            let generation = GenerationConfig { seed, ..config.generation.clone() };
            let pool = par_generate_pool(&model, &generation).map_err(fail)?;
            let accepted = apply_rule(&pool, config.rule).map_err(fail)?;
            Inventory::new(train.schema().clone(), accepted.into_iter().map(|c| c.row).collect()).map_err(fail)
        }
        Method::MonteCarlo => {
            let model = mc_fit(train).map_err(fail)?;
            mc_generate(&model, n, seed).map_err(fail)
        }
        Method::Smote => smote_generate(train, &SmoteConfig { k: config.smote_k, n_new: n, seed }).map_err(fail),
        Method::External { path, .. } => load_csv(path, train.schema()),
    }
}

/// Run every method on `train` and score it against `truth`. A failing
/// method is recorded and the others still run.
pub fn run_comparison(
    scenario: Option<&str>,
    train: &Inventory,
    truth: &Inventory,
    methods: &[Method],
    config: &BenchConfig,
) -> Result<BenchResult> {
    if methods.is_empty() {
        return Err(Error::Usage("no methods to compare".into()));
    }
    let outcomes = methods
        .par_iter()
        .map(|method| {
            let start = Instant::now();
            let result = synthesize(method, train, truth.n_rows(), config).and_then(|synthetic| {
                let report = full_report(truth, &synthetic, method.name(), Some(config.seed))
                    .map_err(|e| Error::method(method.name(), e))?;
                Ok((synthetic, report))
            });
            MethodOutcome { method: method.clone(), result, wall_clock: start.elapsed() }
        })
        .collect();
    Ok(BenchResult { scenario: scenario.map(str::to_string), seed: config.seed, truth: truth.clone(), outcomes })
}

fn file_stem(name: &str) -> String {
    name.chars().map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' { c } else { '_' }).collect()
}

/// Write one JSON report per method, `comparison.csv` (a row per feature
/// and metric, a column per method), the synthetic tables, and per-feature
/// KDE, CDF and frequency grids for plotting. Returns the files written.
pub fn emit_report(result: &BenchResult, dir: &Path) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut written = Vec::new();
    let schema = result.truth.schema();
    let ok: Vec<(&str, &Inventory, &MetricReport)> =
        result.outcomes.iter().filter_map(|o| o.result.as_ref().ok().map(|(s, r)| (o.method.name(), s, r))).collect();

    for (name, synthetic, report) in &ok {
        let path = dir.join(format!("{}.json", file_stem(name)));
        write_json(&path, &report_json(report, schema))?;
        written.push(path);
        let path = dir.join(format!("{}.synthetic.csv", file_stem(name)));
        save_inventory(synthetic, &path)?;
        written.push(path);
    }

    let mut rows = vec![std::iter::once("feature".to_string())
        .chain(std::iter::once("metric".to_string()))
        .chain(result.outcomes.iter().map(|o| o.method.name().to_string()))
        .collect::<Vec<_>>()];
    for (i, spec) in schema.features().iter().enumerate() {
        let metric_names: Vec<&str> = match ok.first() {
            Some((_, _, r)) => r.features[i].1.scalars().into_iter().map(|(n, _)| n).collect(),
            None => Vec::new(),
        };
        for metric in metric_names {
            let mut row = vec![spec.name.clone(), metric.to_string()];
            for o in &result.outcomes {
                let v = o.result.as_ref().ok().and_then(|(_, r)| {
                    r.features[i].1.scalars().into_iter().find(|(n, _)| *n == metric).map(|(_, v)| v)
                });
                row.push(v.map(crate::io::format_number).unwrap_or_default());
            }
            rows.push(row);
        }
    }
    let path = dir.join("comparison.csv");
    write_rows(&path, &rows)?;
    written.push(path);

    for (i, spec) in schema.features().iter().enumerate() {
        let stem = file_stem(&spec.name);
        if spec.kind.is_numeric() {
            let truth = result.truth.numeric_values(i);
            let gens: Vec<(&str, Vec<f64>)> = ok.iter().map(|(n, s, _)| (*n, s.numeric_values(i))).collect();
            let mut samples: Vec<(&str, &[f64])> = vec![("truth", &truth)];
            samples.extend(gens.iter().filter(|(_, v)| !v.is_empty()).map(|(n, v)| (*n, v.as_slice())));
            if truth.is_empty() {
                continue;
            }
            let path = dir.join(format!("kde_{stem}.csv"));
            write_rows(&path, &kde_table(&samples)?)?;
            written.push(path);
            let path = dir.join(format!("cdf_{stem}.csv"));
            write_rows(&path, &cdf_table(&samples, invsynth_core::metrics::KDE_GRID_POINTS))?;
            written.push(path);
        } else {
            let mut tables: Vec<(&str, &Inventory)> = vec![("truth", &result.truth)];
            tables.extend(ok.iter().map(|(n, s, _)| (*n, *s)));
            let path = dir.join(format!("freq_{stem}.csv"));
            write_rows(&path, &frequency_table(i, &tables))?;
            written.push(path);
        }
    }

    let summary = json!({
        "scenario": result.scenario,
        "seed": result.seed,
        "n_truth": result.truth.n_rows(),
        "methods": result.outcomes.iter().map(|o| json!({
            "name": o.method.name(),
            "status": if o.result.is_ok() { "ok" } else { "failed" },
            "error": o.result.as_ref().err().map(|e| e.to_string()),
        })).collect::<Vec<_>>(),
    });
    let path = dir.join("bench.json");
    write_json(&path, &summary)?;
    written.push(path);
    Ok(written)
}
