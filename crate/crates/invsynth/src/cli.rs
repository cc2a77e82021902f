//! The `invsynth` command line.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, CommandFactory, Parser, Subcommand, ValueEnum};
use invsynth_core::baselines::{mc_fit, mc_generate, smote_generate, SmoteConfig};
use invsynth_core::generate::GenerationConfig;
use invsynth_core::metrics::full_report;
use invsynth_core::model::{KernelBackend, KernelParams};
use invsynth_core::preprocess::{fit_apply_pipeline, QuantileTarget, StepRequest};
use invsynth_core::schema::{FeatureSchema, Inventory};
use invsynth_core::select::{apply_rule, mix, SelectionConfig, SelectionRule, Source, Subsample};
use invsynth_core::Cell;
use serde_json::{json, Value};

use crate::bench::{emit_report, run_comparison, BenchConfig, Method};
use crate::error::{Error, Result};
use crate::io::{self, load_inventory, meta_sidecar, save_inventory, write_json};
use crate::parallel::{par_generate_pool, with_threads};
use crate::report::{cdf_table, frequency_table, kde_table, report_json, write_rows};
use crate::scenario::{make_scenario, preset, Scenario, PRESETS};

#[derive(Debug, Parser)]
#[command(name = "invsynth", version, about = "Synthesize and evaluate sparse tabular inventories")]
#[command(args_override_self = true)]
pub struct Cli {
    /// Seed for every random choice.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Schema JSON for the input table (default: its sidecar, else inferred).
    #[arg(long, global = true)]
    pub schema: Option<PathBuf>,
    #[arg(long, short = 'q', global = true)]
    pub quiet: bool,
    /// JSON file of flag values; flags on the command line win.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Worker threads (default: all cores). Outputs do not depend on it.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Load and validate a table; report duplicates, type violations and missing counts.
    Ingest(IngestArgs),
    /// Fit and apply preprocessing steps, or apply / invert a saved pipeline.
    Preprocess(PreprocessArgs),
    /// Generate a scored candidate pool from a training table.
    Generate(GenerateArgs),
    /// Keep the candidates of a pool that pass a score rule.
    Select(SelectArgs),
    /// Mix accepted candidates into observed rows at a target fraction.
    Mix(MixArgs),
    /// Run a baseline generator.
    #[command(subcommand)]
    Baseline(BaselineCommand),
    /// Score a generated table against an original one.
    Evaluate(EvaluateArgs),
    /// Compare generators on a ground-truth scenario.
    Bench(BenchArgs),
}

#[derive(Debug, Args)]
pub struct IngestArgs {
    #[arg(long)]
    pub input: PathBuf,
    /// Validated table (with schema sidecar).
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Drop duplicate rows from the output.
    #[arg(long)]
    pub dedupe: bool,
    /// Validation report JSON.
    #[arg(long)]
    pub report: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct PreprocessArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Step to fit, e.g. `log:area`, `winsorize:slope:0.01:0.99`,
    /// `rank_quantile:twi:normal`, `impute_knn:depth:5`, `missing_indicator`.
    #[arg(long = "step", conflicts_with_all = ["apply", "invert"])]
    pub steps: Vec<String>,
    /// JSON list of steps, fitted before any `--step`.
    #[arg(long, conflicts_with_all = ["apply", "invert"])]
    pub steps_file: Option<PathBuf>,
    /// Where to write the fitted pipeline.
    #[arg(long)]
    pub pipeline: Option<PathBuf>,
    /// Apply a saved pipeline instead of fitting one.
    #[arg(long, conflicts_with = "invert")]
    pub apply: Option<PathBuf>,
    /// Invert a saved pipeline.
    #[arg(long)]
    pub invert: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    #[arg(long)]
    pub train: PathBuf,
    #[arg(short = 'N', long, default_value_t = 500)]
    pub candidates: usize,
    #[arg(short = 'T', long, default_value_t = 1.0)]
    pub temperature: f64,
    #[arg(short = 'M', long, default_value_t = 8)]
    pub permutations: usize,
    /// Fix a feature in every candidate: `name=value`.
    #[arg(long = "condition")]
    pub conditions: Vec<String>,
    /// Kernel weight of a categorical mismatch.
    #[arg(long, default_value_t = 0.1)]
    pub cat_mismatch_weight: f64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
#[command(group = clap::ArgGroup::new("rule").required(true).args(["tau", "top_q"]))]
pub struct SelectArgs {
    #[arg(long)]
    pub pool: PathBuf,
    /// Keep candidates with log plausibility at least this.
    #[arg(long, allow_negative_numbers = true)]
    pub tau: Option<f64>,
    /// Keep this top fraction of the pool.
    #[arg(long)]
    pub top_q: Option<f64>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum SubsampleArg {
    Score,
    Random,
}

#[derive(Debug, Args)]
pub struct MixArgs {
    #[arg(long)]
    pub observed: PathBuf,
    /// Accepted pool written by `select` (or `generate`).
    #[arg(long)]
    pub accepted: PathBuf,
    #[arg(long)]
    pub alpha: f64,
    /// How to cut an oversupplied pool.
    #[arg(long, value_enum, default_value_t = SubsampleArg::Score)]
    pub subsample: SubsampleArg,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Subcommand)]
pub enum BaselineCommand {
    /// Independent per-feature sampling from fitted marginals.
    Mc(McArgs),
    /// Interpolation between rows and their nearest neighbors.
    Smote(SmoteArgs),
}

#[derive(Debug, Args)]
pub struct McArgs {
    #[arg(long)]
    pub train: PathBuf,
    #[arg(short = 'n', long)]
    pub count: usize,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct SmoteArgs {
    #[arg(long)]
    pub train: PathBuf,
    #[arg(short = 'k', long, default_value_t = 5)]
    pub neighbors: usize,
    #[arg(short = 'n', long)]
    pub count: usize,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    #[arg(long)]
    pub orig: PathBuf,
    /// Generated table, read with the original's schema.
    #[arg(long)]
    pub gen: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Flat per-feature table.
    #[arg(long)]
    pub csv: Option<PathBuf>,
    /// Directory for KDE, CDF and frequency grids.
    #[arg(long)]
    pub grids: Option<PathBuf>,
    /// Method name recorded in the report.
    #[arg(long, default_value = "generated")]
    pub method: String,
}

#[derive(Debug, Args)]
#[command(group = clap::ArgGroup::new("source").required(true).args(["scenario", "scenario_file"]))]
pub struct BenchArgs {
    /// Preset: zero_peak, heavy_tail, irregular or coupled_met.
    #[arg(long)]
    pub scenario: Option<String>,
    /// Scenario JSON instead of a preset.
    #[arg(long)]
    pub scenario_file: Option<PathBuf>,
    #[arg(long, value_delimiter = ',', default_value = "proposed,mc,smote")]
    pub methods: Vec<String>,
    /// Externally generated rows to score alongside: `name=path.csv`.
    #[arg(long = "external")]
    pub externals: Vec<String>,
    /// Seed of the truth and training draws (default: --seed).
    #[arg(long)]
    pub truth_seed: Option<u64>,
    #[arg(short = 'N', long, default_value_t = 2000)]
    pub candidates: usize,
    #[arg(short = 'T', long, default_value_t = 1.0)]
    pub temperature: f64,
    #[arg(short = 'M', long, default_value_t = 4)]
    pub permutations: usize,
    #[arg(long, allow_negative_numbers = true, conflicts_with = "top_q")]
    pub tau: Option<f64>,
    #[arg(long)]
    pub top_q: Option<f64>,
    #[arg(long, default_value_t = 5)]
    pub smote_k: usize,
    #[arg(long)]
    pub out: PathBuf,
}

/// Parse `argv` (config file expanded) and run; returns the exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let argv: Vec<String> = argv.into_iter().map(|a| a.into().to_string_lossy().into_owned()).collect();
    let argv = match expand_config(argv) {
        Ok(a) => a,
        Err(e) => {
            eprintln!("error: {e}");
            return e.exit_code();
        }
    };
    let cli = match Cli::try_parse_from(&argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match with_threads(cli.threads, || dispatch(&cli)).and_then(|r| r) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

const GLOBAL_VALUE_FLAGS: [&str; 4] = ["--seed", "--schema", "--config", "--threads"];

/// Splice the flags of a `--config` JSON file in right after the subcommand,
/// so that flags given on the command line come later and win.
///
/// Keys are long flag names (`_` or `-`); `true` adds a switch, `false` and
/// `null` add nothing, arrays repeat the flag. A key named after the active
/// subcommand may hold an object of flags for that subcommand only; sections
/// for other subcommands are ignored.
pub fn expand_config(argv: Vec<String>) -> Result<Vec<String>> {
    let mut config_path = None;
    let mut insert_at = None;
    let mut path: Vec<String> = Vec::new();
    let commands = Cli::command();
    let mut current = &commands;
    let mut i = 1;
    while i < argv.len() {
        let tok = &argv[i];
        if tok == "--" {
            break;
        }
        if let Some(p) = tok.strip_prefix("--config=") {
            config_path = Some(PathBuf::from(p));
        } else if tok == "--config" {
            config_path = argv.get(i + 1).map(PathBuf::from);
            i += 1;
        } else if GLOBAL_VALUE_FLAGS.contains(&tok.as_str()) {
            i += 1;
        } else if !tok.starts_with('-') && current.has_subcommands() {
            match current.find_subcommand(tok) {
                Some(sub) => {
                    path.push(tok.clone());
                    current = sub;
                    insert_at = Some(i + 1);
                }
                None => break,
            }
        }
        i += 1;
    }
    let (Some(config_path), Some(at)) = (config_path, insert_at) else {
        return Ok(argv);
    };
    let config: Value = io::read_json(&config_path)?;
    let Value::Object(map) = config else {
        return Err(Error::format(&config_path, "config must be a JSON object"));
    };
    let section_names: Vec<String> = commands.get_subcommands().map(|c| c.get_name().to_string()).collect();
    let mut tokens = Vec::new();
    let mut push_flags = |map: &serde_json::Map<String, Value>, skip_sections: bool| -> Result<()> {
        for (key, value) in map {
            if key == "config" || skip_sections && section_names.contains(key) {
                continue;
            }
            let flag = if key.len() == 1 { format!("-{key}") } else { format!("--{}", key.replace('_', "-")) };
            let values = match value {
                Value::Array(items) => items.clone(),
                other => vec![other.clone()],
            };
            for v in values {
                match v {
                    Value::Bool(true) => tokens.push(flag.clone()),
                    Value::Bool(false) | Value::Null => {}
                    Value::String(s) => tokens.extend([flag.clone(), s]),
                    Value::Number(n) => tokens.extend([flag.clone(), n.to_string()]),
                    Value::Object(_) | Value::Array(_) => {
                        return Err(Error::format(&config_path, format!("unsupported value for `{key}`")))
                    }
                }
            }
        }
        Ok(())
    };
    push_flags(&map, true)?;
    for name in &path {
        if let Some(Value::Object(section)) = map.get(name) {
            push_flags(section, false)?;
        }
    }
    let mut out = argv[..at].to_vec();
    out.extend(tokens);
    out.extend_from_slice(&argv[at..]);
    Ok(out)
}

fn say(cli: &Cli, msg: impl AsRef<str>) {
    if !cli.quiet {
        eprintln!("{}", msg.as_ref());
    }
}

fn dispatch(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::Ingest(a) => ingest(cli, a),
        Command::Preprocess(a) => preprocess(cli, a),
        Command::Generate(a) => generate(cli, a),
        Command::Select(a) => select(cli, a),
        Command::Mix(a) => mix_cmd(cli, a),
        Command::Baseline(b) => baseline(cli, b),
        Command::Evaluate(a) => evaluate(cli, a),
        Command::Bench(a) => bench(cli, a),
    }
}

fn schema_for(cli: &Cli, input: &Path) -> Result<FeatureSchema> {
    let sidecar = io::schema_sidecar(input);
    match &cli.schema {
        Some(p) => io::read_schema(p),
        None if sidecar.exists() => io::read_schema(&sidecar),
        None => io::infer_schema(input),
    }
}

fn ingest(cli: &Cli, a: &IngestArgs) -> Result<()> {
    let schema = schema_for(cli, &a.input)?;
    let (rows, report) = io::load_csv_report(&a.input, &schema)?;
    if let Some(path) = &a.report {
        let doc = json!({
            "n_rows": rows.len(),
            "duplicate_row_indices": report.duplicate_row_indices,
            "type_violations": report.type_violations.iter().map(|v| json!({
                "row": v.row,
                "column": schema.feature(v.column).name,
                "description": v.description,
            })).collect::<Vec<_>>(),
            "missing_counts": schema.names().zip(&report.missing_counts).map(|(n, c)| (n.to_string(), json!(c))).collect::<serde_json::Map<_, _>>(),
        });
        write_json(path, &doc)?;
    }
    say(
        cli,
        format!(
            "{} rows, {} duplicates, {} type violations, {} missing cells",
            rows.len(),
            report.duplicate_row_indices.len(),
            report.type_violations.len(),
            report.missing_counts.iter().sum::<usize>()
        ),
    );
    if let Some(v) = report.type_violations.first() {
        return Err(Error::format(
            &a.input,
            format!(
                "{} type violations, first at row {}, column `{}`: {}",
                report.type_violations.len(),
                v.row + 1,
                schema.feature(v.column).name,
                v.description
            ),
        ));
    }
    let mut inv = Inventory::new(schema, rows)?;
    if a.dedupe {
        inv = inv.without_rows(&report.duplicate_row_indices);
    }
    if let Some(out) = &a.out {
        save_inventory(&inv, out)?;
    }
    Ok(())
}

/// `kind[:column[:params]]`, mirroring the JSON step list.
pub fn parse_step(text: &str) -> Result<StepRequest> {
    let parts: Vec<&str> = text.split(':').collect();
    let bad = || Error::Usage(format!("cannot parse step `{text}`"));
    let column = || parts.get(1).filter(|c| !c.is_empty()).map(|c| c.to_string()).ok_or_else(bad);
    let number = |i: usize| -> Result<f64> { parts.get(i).and_then(|v| v.parse().ok()).ok_or_else(bad) };
    let step = match parts[0] {
        "missing_indicator" if parts.len() == 1 => StepRequest::MissingIndicator,
        "impute_median" if parts.len() == 2 => StepRequest::ImputeMedian { column: column()? },
        "impute_knn" if parts.len() <= 3 => StepRequest::ImputeKnn {
            column: column()?,
            k: match parts.get(2) {
                Some(k) => k.parse().map_err(|_| bad())?,
                None => 5,
            },
        },
        "winsorize" if parts.len() == 4 => {
            StepRequest::Winsorize { column: column()?, q_lo: number(2)?, q_hi: number(3)? }
        }
        "log" if parts.len() == 2 => StepRequest::Log { column: column()? },
        "rank_quantile" if parts.len() <= 3 => StepRequest::RankQuantile {
            column: column()?,
            target: match parts.get(2).copied() {
                None | Some("uniform") => QuantileTarget::Uniform,
                Some("normal") => QuantileTarget::Normal,
                Some(_) => return Err(bad()),
            },
        },
        "zscore" if parts.len() == 2 => StepRequest::Zscore { column: column()? },
        _ => return Err(bad()),
    };
    Ok(step)
}

fn preprocess(cli: &Cli, a: &PreprocessArgs) -> Result<()> {
    let inv = load_inventory(&a.input, cli.schema.as_deref())?;
    let out = if let Some(p) = &a.apply {
        io::read_pipeline(p)?.apply(&inv)?
    } else if let Some(p) = &a.invert {
        io::read_pipeline(p)?.invert(&inv)?
    } else {
        let mut requests: Vec<StepRequest> = match &a.steps_file {
            Some(p) => io::read_json(p)?,
            None => Vec::new(),
        };
        for s in &a.steps {
            requests.push(parse_step(s)?);
        }
        if requests.is_empty() {
            return Err(Error::Usage("no steps given (use --step, --steps-file, --apply or --invert)".into()));
        }
        let (out, pipeline) = fit_apply_pipeline(&inv, &requests)?;
        if let Some(p) = &a.pipeline {
            io::write_pipeline(&pipeline, p)?;
        }
        say(cli, format!("fitted {} steps", pipeline.steps.len()));
        out
    };
    save_inventory(&out, &a.out)
}

fn parse_condition(schema: &FeatureSchema, text: &str) -> Result<(String, Cell)> {
    let (name, value) =
        text.split_once('=').ok_or_else(|| Error::Usage(format!("condition `{text}` is not `name=value`")))?;
    let idx = schema.index_of(name).ok_or_else(|| Error::Usage(format!("unknown feature `{name}`")))?;
    let cell = schema.parse_cell(idx, value).map_err(|e| Error::Usage(format!("condition `{text}`: {e}")))?;
    Ok((name.to_string(), cell))
}

fn generate(cli: &Cli, a: &GenerateArgs) -> Result<()> {
    let train = load_inventory(&a.train, cli.schema.as_deref())?;
    if train.has_missing() {
        return Err(Error::format(&a.train, "training table has missing cells; impute them first (preprocess)"));
    }
    let config = GenerationConfig {
        candidates: a.candidates,
        temperature: a.temperature,
        permutations: a.permutations,
        conditioning: a.conditions.iter().map(|c| parse_condition(train.schema(), c)).collect::<Result<_>>()?,
        seed: cli.seed,
    };
    let model = KernelBackend::fit_with(&train, KernelParams { cat_mismatch_weight: a.cat_mismatch_weight })
        .map_err(|e| Error::method("generate", e))?;
    let pool = par_generate_pool(&model, &config).map_err(|e| Error::method("generate", e))?;
    io::write_pool(&pool, train.schema(), &config, &a.out)?;
    say(cli, format!("{} candidates written", pool.len()));
    Ok(())
}

fn select(cli: &Cli, a: &SelectArgs) -> Result<()> {
    let (schema, config, pool) = io::read_pool(&a.pool)?;
    let rule = match (a.tau, a.top_q) {
        (Some(t), _) => SelectionRule::Threshold(t),
        (None, Some(q)) => SelectionRule::TopQuantile(q),
        (None, None) => unreachable!("clap requires one rule"),
    };
    let accepted = apply_rule(&pool, rule).map_err(|e| Error::method("select", e))?;
    io::write_pool(&accepted, &schema, &config, &a.out)?;
    say(cli, format!("accepted {} of {} candidates", accepted.len(), pool.len()));
    Ok(())
}

fn mix_cmd(cli: &Cli, a: &MixArgs) -> Result<()> {
    let observed = load_inventory(&a.observed, cli.schema.as_deref())?;
    let (_, _, accepted) = io::read_pool(&a.accepted)?;
    let subsample = match a.subsample {
        SubsampleArg::Score => Subsample::Score,
        SubsampleArg::Random => Subsample::Random,
    };
    let config = SelectionConfig {
        rule: SelectionRule::Threshold(f64::NEG_INFINITY),
        alpha: a.alpha,
        seed: cli.seed,
        subsample,
    };
    let corpus = mix(&observed, &accepted, &config).map_err(|e| Error::method("mix", e))?;
    save_inventory(&corpus.tagged()?, &a.out)?;
    let synthetic_rows: Vec<Value> = corpus
        .sources
        .iter()
        .zip(&corpus.candidate_ids)
        .enumerate()
        .filter(|(_, (s, _))| **s == Source::Synthetic)
        .map(|(row, (_, id))| json!({ "row": row, "candidate_id": id }))
        .collect();
    let meta = json!({
        "alpha": a.alpha,
        "subsample": format!("{:?}", a.subsample).to_lowercase(),
        "seed": cli.seed,
        "n_observed": observed.n_rows(),
        "n_synthetic": corpus.n_synthetic(),
        "synthetic_fraction": corpus.synthetic_fraction(),
        "synthetic_rows": synthetic_rows,
    });
    write_json(&meta_sidecar(&a.out), &meta)?;
    say(cli, format!("{} observed + {} synthetic rows", observed.n_rows(), corpus.n_synthetic()));
    Ok(())
}

fn baseline(cli: &Cli, b: &BaselineCommand) -> Result<()> {
    let (train_path, out) = match b {
        BaselineCommand::Mc(a) => (&a.train, &a.out),
        BaselineCommand::Smote(a) => (&a.train, &a.out),
    };
    let train = load_inventory(train_path, cli.schema.as_deref())?;
    let synthetic = match b {
        BaselineCommand::Mc(a) => {
            let model = mc_fit(&train).map_err(|e| Error::method("mc", e))?;
            mc_generate(&model, a.count, cli.seed).map_err(|e| Error::method("mc", e))?
        }
        BaselineCommand::Smote(a) => {
            smote_generate(&train, &SmoteConfig { k: a.neighbors, n_new: a.count, seed: cli.seed })
                .map_err(|e| Error::method("smote", e))?
        }
    };
    save_inventory(&synthetic, out)?;
    say(cli, format!("{} rows written", synthetic.n_rows()));
    Ok(())
}

fn write_grids(dir: &Path, orig: &Inventory, gen: &Inventory, method: &str) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    for (i, spec) in orig.schema().features().iter().enumerate() {
        let stem: String = spec
            .name
            .chars()
            .map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' { c } else { '_' })
            .collect();
        if spec.kind.is_numeric() {
            let (o, g) = (orig.numeric_values(i), gen.numeric_values(i));
            if o.is_empty() || g.is_empty() {
                continue;
            }
            let samples: [(&str, &[f64]); 2] = [("orig", &o), (method, &g)];
            write_rows(&dir.join(format!("kde_{stem}.csv")), &kde_table(&samples)?)?;
            write_rows(
                &dir.join(format!("cdf_{stem}.csv")),
                &cdf_table(&samples, invsynth_core::metrics::KDE_GRID_POINTS),
            )?;
        } else {
            write_rows(&dir.join(format!("freq_{stem}.csv")), &frequency_table(i, &[("orig", orig), (method, gen)]))?;
        }
    }
    Ok(())
}

fn evaluate(cli: &Cli, a: &EvaluateArgs) -> Result<()> {
    let orig = load_inventory(&a.orig, cli.schema.as_deref())?;
    let gen = io::load_csv(&a.gen, orig.schema())?;
    let report = full_report(&orig, &gen, &a.method, None)?;
    write_json(&a.out, &report_json(&report, orig.schema()))?;
    if let Some(path) = &a.csv {
        write_rows(path, &crate::report::flat_table(&report, orig.schema()))?;
    }
    if let Some(dir) = &a.grids {
        write_grids(dir, &orig, &gen, &a.method)?;
    }
    say(cli, format!("{} features scored", report.features.len()));
    Ok(())
}

fn bench(cli: &Cli, a: &BenchArgs) -> Result<()> {
    let truth_seed = a.truth_seed.unwrap_or(cli.seed);
    let scenario: Scenario = match (&a.scenario, &a.scenario_file) {
        (Some(name), _) => preset(name, truth_seed)
            .ok_or_else(|| Error::Usage(format!("unknown scenario `{name}` (presets: {})", PRESETS.join(", "))))?,
        (None, Some(path)) => io::read_json(path)?,
        (None, None) => unreachable!("clap requires a scenario"),
    };
    let (train, truth) = make_scenario(&scenario)?;
    let mut methods = a.methods.iter().map(|m| m.parse()).collect::<Result<Vec<Method>>>()?;
    for e in &a.externals {
        match e.parse()? {
            m @ Method::External { .. } => methods.push(m),
            _ => return Err(Error::Usage(format!("--external expects name=path, got `{e}`"))),
        }
    }
    let config = BenchConfig {
        generation: GenerationConfig {
            candidates: a.candidates,
            temperature: a.temperature,
            permutations: a.permutations,
            ..Default::default()
        },
        rule: match (a.tau, a.top_q) {
            (Some(t), _) => SelectionRule::Threshold(t),
            (None, q) => SelectionRule::TopQuantile(q.unwrap_or(0.5)),
        },
        smote_k: a.smote_k,
        seed: cli.seed,
    };
    let result = run_comparison(Some(&scenario.name), &train, &truth, &methods, &config)?;
    std::fs::create_dir_all(&a.out).map_err(|e| Error::io(&a.out, e))?;
    save_inventory(&train, &a.out.join("train.csv"))?;
    save_inventory(&truth, &a.out.join("truth.csv"))?;
    emit_report(&result, &a.out)?;
    for o in &result.outcomes {
        match &o.result {
            Ok((s, r)) => say(
                cli,
                format!(
                    "{:<10} {:>6} rows  {:>8.2?}  mean KS {:.4}  mean |d pearson| {}",
                    o.method.name(),
                    s.n_rows(),
                    o.wall_clock,
                    r.aggregate("ks_stat").map_or(f64::NAN, |g| g.mean),
                    r.aggregate("pearson_delta").map_or("n/a".into(), |g| format!("{:.4}", g.mean)),
                ),
            ),
            Err(e) => say(cli, format!("{:<10} failed: {e}", o.method.name())),
        }
    }
    let failed: Vec<&str> = result.failures().map(|(m, _)| m.name()).collect();
    if failed.is_empty() {
        Ok(())
    } else {
        Err(Error::Failed(format!("method(s) failed: {}", failed.join(", "))))
    }
}
