//! Command-line front end: system generation, guided and random search,
//! border learning, empirical evaluation, statistical comparison, and a
//! manifest-driven pipeline tying the stages together reproducibly.

use std::collections::BTreeMap;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use safewcet::baseline::{
    max_safe_hyperbox, random_search, BaselineParams, BestBoxFile,
};
use safewcet::evalrun::{empirical_probability, hyperbox_volume, read_box};
use safewcet::learn::{
    fit_rsm_logit, prune_by_intercepts, reduce_features, refine, report_grid,
    threshold_no_false_negative, BorderFile, FeatureSet, ReduceConfig, RefineConfig,
};
use safewcet::model::{load_system, SystemSpec};
use safewcet::search::{
    nsga2_search, read_archive, write_archive, LabeledDataset, SearchParams,
};
use safewcet::seeds::{derive_seed, rng_from_seed};
use safewcet::sim::{simulate, TestCase, WcetAssignment};
use safewcet::synth::{
    generate_experiment_suite, generate_preset, generate_system, GenConfig, Preset, SweepParam,
};

#[derive(Parser)]
#[command(
    name = "safewcet",
    version,
    about = "Safe WCET range analysis for weakly hard real-time systems"
)]
struct Cli {
    /// Root random seed (overrides seeds embedded in config files).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads; defaults to all available cores.
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// Output directory; defaults to the current directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate synthetic systems from a config, preset, or parameter sweep.
    Generate(GenerateArgs),
    /// Simulate one randomized scenario and print the verdict or trace.
    Simulate(SimulateArgs),
    /// Guided multi-objective search producing an archive and a dataset.
    Search(SearchArgs),
    /// Random-search baseline producing a dataset and its best safe box.
    Baseline(BaselineArgs),
    /// Fit and refine a safe-border model from a search dataset.
    Learn(LearnArgs),
    /// Measure a box's empirical violation probability by simulation.
    Evaluate(EvaluateArgs),
    /// Mann-Whitney U and A12 between two volume columns.
    Compare(CompareArgs),
    /// Run generate/search/baseline/learn/evaluate end to end with a manifest.
    Pipeline(PipelineArgs),
    /// Emit a plot-ready 2-D contour grid of a fitted border.
    Report(ReportArgs),
}

#[derive(Args)]
struct GenerateArgs {
    /// Generator config JSON; defaults apply when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Named subject: base, partition, policy, or multicore.
    #[arg(long, conflicts_with = "config")]
    preset: Option<String>,
    /// Sweep one parameter: `name` (default grid) or `name=v1,v2,...`.
    #[arg(long, conflicts_with = "preset")]
    sweep: Option<String>,
    /// Systems per sweep value.
    #[arg(long, default_value_t = 1)]
    replicates: usize,
}

#[derive(Args)]
struct SimulateArgs {
    #[arg(long)]
    system: PathBuf,
    /// Test-case JSON; a random one is sampled when omitted.
    #[arg(long)]
    case: Option<PathBuf>,
    /// WCET draw: min, max, or random.
    #[arg(long, default_value = "random")]
    wcet: String,
    /// Print one line per tuple: task,arrival,end,missed.
    #[arg(long)]
    trace: bool,
}

#[derive(Args)]
struct SearchArgs {
    #[arg(long)]
    system: PathBuf,
    #[arg(long, default_value_t = 10)]
    pop: usize,
    #[arg(long, default_value_t = 20)]
    ns: usize,
    #[arg(long, default_value_t = 1000)]
    iters: usize,
    #[arg(long, default_value_t = 0.7)]
    pc: f64,
    #[arg(long, default_value_t = 0.2)]
    pm: f64,
}

#[derive(Args)]
struct BaselineArgs {
    #[arg(long)]
    system: PathBuf,
    #[arg(long, default_value_t = 10)]
    pop: usize,
    #[arg(long, default_value_t = 20)]
    ns: usize,
    #[arg(long, default_value_t = 1500)]
    iters: usize,
}

#[derive(Args)]
struct LearnArgs {
    #[arg(long)]
    system: PathBuf,
    #[arg(long)]
    dataset: PathBuf,
    #[arg(long)]
    archive: PathBuf,
    #[arg(long, default_value_t = 100)]
    updates: usize,
    #[arg(long, default_value_t = 100)]
    samples: usize,
    #[arg(long, default_value_t = 5)]
    kfold: usize,
    #[arg(long, default_value_t = 100)]
    trees: usize,
    /// Feature selection: `auto` (forest importance) or `all`.
    #[arg(long, default_value = "auto")]
    features: String,
    #[arg(long, default_value_t = 10)]
    cases_per_point: usize,
    #[arg(long, default_value_t = 0.99)]
    target_precision: f64,
}

#[derive(Args)]
struct EvaluateArgs {
    #[arg(long)]
    system: PathBuf,
    /// Border or best-box JSON carrying a `box_ms` table.
    #[arg(long = "box")]
    box_file: PathBuf,
    #[arg(long, default_value_t = 40000)]
    runs: usize,
}

#[derive(Args)]
struct CompareArgs {
    /// CSV whose last column holds sample A's volumes.
    #[arg(long)]
    a: PathBuf,
    /// CSV whose last column holds sample B's volumes.
    #[arg(long)]
    b: PathBuf,
}

#[derive(Args)]
struct PipelineArgs {
    /// Pipeline config JSON.
    #[arg(long, conflicts_with = "replay")]
    config: Option<PathBuf>,
    /// Re-run from a manifest and verify artifacts are byte-identical.
    #[arg(long)]
    replay: Option<PathBuf>,
}

#[derive(Args)]
struct ReportArgs {
    #[arg(long)]
    system: PathBuf,
    #[arg(long)]
    border: PathBuf,
    /// Two feature task names, comma separated.
    #[arg(long)]
    features: String,
    #[arg(long, default_value_t = 50)]
    grid: usize,
}

// ---------------------------------------------------------------------------
// Error handling: validation problems exit 2, stage failures exit 3.

#[derive(Debug)]
enum AppError {
    Validation(String),
    Stage(String),
}

impl AppError {
    fn code(&self) -> u8 {
        match self {
            AppError::Validation(_) => 2,
            AppError::Stage(_) => 3,
        }
    }

    fn message(&self) -> &str {
        match self {
            AppError::Validation(m) | AppError::Stage(m) => m,
        }
    }
}

fn invalid(e: impl std::fmt::Display) -> AppError {
    AppError::Validation(e.to_string())
}

fn stage_err(stage: &str, e: impl std::fmt::Display) -> AppError {
    AppError::Stage(format!("stage {stage}: {e}"))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(jobs) = cli.jobs {
        // Ignore re-initialization: tests may share a process.
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build_global();
    }
    match dispatch(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message());
            ExitCode::from(e.code())
        }
    }
}

fn dispatch(cli: &Cli) -> Result<(), AppError> {
    let out = cli.out.clone().unwrap_or_else(|| PathBuf::from("."));
    std::fs::create_dir_all(&out).map_err(invalid)?;
    match &cli.command {
        Command::Generate(a) => cmd_generate(cli, a, &out),
        Command::Simulate(a) => cmd_simulate(cli, a),
        Command::Search(a) => cmd_search(cli, a, &out),
        Command::Baseline(a) => cmd_baseline(cli, a, &out),
        Command::Learn(a) => cmd_learn(cli, a, &out),
        Command::Evaluate(a) => cmd_evaluate(cli, a, &out),
        Command::Compare(a) => cmd_compare(a, &out),
        Command::Pipeline(a) => cmd_pipeline(cli, a, &out),
        Command::Report(a) => cmd_report(a, &out),
    }
}

// ---------------------------------------------------------------------------
// generate

#[derive(Serialize)]
struct GenerateManifest<'a> {
    config: &'a GenConfig,
    sweep: Option<String>,
    replicates: usize,
    systems: BTreeMap<String, String>,
}

fn cmd_generate(cli: &Cli, args: &GenerateArgs, out: &Path) -> Result<(), AppError> {
    if let Some(name) = &args.preset {
        let preset = Preset::parse(name)
            .ok_or_else(|| invalid(format!("unknown preset `{name}`")))?;
        let spec = generate_preset(preset, cli.seed.unwrap_or(0)).map_err(invalid)?;
        let path = out.join(format!("{}.json", preset.name()));
        safewcet::model::save_system(&spec, &path).map_err(invalid)?;
        println!("{}", path.display());
        return Ok(());
    }

    let mut cfg = match &args.config {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(invalid)?;
            serde_json::from_str::<GenConfig>(&text).map_err(invalid)?
        }
        None => GenConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }

    let sweep = args
        .sweep
        .as_deref()
        .map(parse_sweep)
        .transpose()?;
    let systems =
        generate_experiment_suite(&cfg, sweep.clone(), args.replicates).map_err(invalid)?;

    let mut index = BTreeMap::new();
    for (label, spec) in &systems {
        let file = format!("{label}.json");
        safewcet::model::save_system(spec, out.join(&file)).map_err(invalid)?;
        index.insert(label.clone(), file);
    }
    let manifest = GenerateManifest {
        config: &cfg,
        sweep: args.sweep.clone(),
        replicates: args.replicates,
        systems: index,
    };
    write_json(&out.join("generate_manifest.json"), &manifest)?;
    println!("generated {} system(s) in {}", systems.len(), out.display());
    Ok(())
}

fn parse_sweep(text: &str) -> Result<(SweepParam, Vec<f64>), AppError> {
    let (name, values) = match text.split_once('=') {
        Some((n, v)) => (n, Some(v)),
        None => (text, None),
    };
    let param = SweepParam::parse(name)
        .ok_or_else(|| invalid(format!("unknown sweep parameter `{name}`")))?;
    let values = match values {
        None => param.default_grid(),
        Some(list) => list
            .split(',')
            .map(|v| {
                v.trim()
                    .parse::<f64>()
                    .map_err(|_| invalid(format!("bad sweep value `{v}`")))
            })
            .collect::<Result<Vec<_>, _>>()?,
    };
    Ok((param, values))
}

// ---------------------------------------------------------------------------
// simulate

fn cmd_simulate(cli: &Cli, args: &SimulateArgs) -> Result<(), AppError> {
    let spec = load_system(&args.system).map_err(invalid)?;
    let seed = cli.seed.unwrap_or(0);
    let mut rng = rng_from_seed(derive_seed(seed, "simulate", &[]));
    let tc = match &args.case {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(invalid)?;
            let tc: TestCase = serde_json::from_str(&text).map_err(invalid)?;
            tc.validate(&spec).map_err(invalid)?;
            tc
        }
        None => TestCase::sample(&spec, &mut rng),
    };
    let w = match args.wcet.as_str() {
        "min" => WcetAssignment(spec.tasks.iter().map(|t| t.wcet_min).collect()),
        "max" => WcetAssignment(spec.tasks.iter().map(|t| t.wcet_max).collect()),
        "random" => WcetAssignment::sample(&spec, &mut rng),
        other => return Err(invalid(format!("unknown wcet mode `{other}`"))),
    };
    let scenario = simulate(&spec, &tc, &w).map_err(|e| stage_err("simulate", e))?;
    if args.trace {
        let mut stdout = std::io::stdout().lock();
        for t in &scenario.tuples {
            let deadline = spec.task(t.task).deadline;
            let missed = t.end.signed_diff(t.arrival + deadline) > 0;
            writeln!(
                stdout,
                "{},{},{},{}",
                spec.task(t.task).name,
                spec.scale.format(t.arrival),
                spec.scale.format(t.end),
                u8::from(missed)
            )
            .map_err(invalid)?;
        }
    }
    let verdict =
        safewcet::sim::check_schedulability(&spec, &scenario, &spec.target_tasks)
            .map_err(|e| stage_err("simulate", e))?;
    match verdict {
        safewcet::sim::Verdict::Schedulable => println!("schedulable"),
        safewcet::sim::Verdict::Violated { task, window_start } => println!(
            "violated: task {} from arrival {}",
            spec.task(task).name,
            window_start
        ),
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// search

fn cmd_search(cli: &Cli, args: &SearchArgs, out: &Path) -> Result<(), AppError> {
    let spec = load_system(&args.system).map_err(invalid)?;
    let params = search_params(args.pop, args.ns, args.iters, args.pc, args.pm, cli.seed)?;
    let result = nsga2_search(&spec, &params);
    write_archive(&spec, &result.archive, out.join("archive.json"))
        .map_err(|e| stage_err("search", e))?;
    result
        .dataset
        .write_csv(&spec, out.join("dataset.csv"))
        .map_err(|e| stage_err("search", e))?;
    println!(
        "archive {} cases, dataset {} rows",
        result.archive.len(),
        result.dataset.rows.len()
    );
    Ok(())
}

fn search_params(
    pop: usize,
    ns: usize,
    iters: usize,
    pc: f64,
    pm: f64,
    seed: Option<u64>,
) -> Result<SearchParams, AppError> {
    if pop < 2 {
        return Err(invalid("population must be at least 2"));
    }
    if ns == 0 || iters == 0 {
        return Err(invalid("ns and iters must be positive"));
    }
    if !(0.0..=1.0).contains(&pc) || !(0.0..=1.0).contains(&pm) {
        return Err(invalid("pc and pm must lie in [0, 1]"));
    }
    Ok(SearchParams {
        np: pop,
        ns,
        iterations: iters,
        pc,
        pm,
        seed: seed.unwrap_or(0),
    })
}

// ---------------------------------------------------------------------------
// baseline

fn cmd_baseline(cli: &Cli, args: &BaselineArgs, out: &Path) -> Result<(), AppError> {
    let spec = load_system(&args.system).map_err(invalid)?;
    if args.pop == 0 || args.ns == 0 || args.iters == 0 {
        return Err(invalid("pop, ns, and iters must be positive"));
    }
    let params = BaselineParams {
        np: args.pop,
        ns: args.ns,
        iterations: args.iters,
        seed: cli.seed.unwrap_or(0),
    };
    let dataset = random_search(&spec, &params);
    dataset
        .write_csv(&spec, out.join("dataset.csv"))
        .map_err(|e| stage_err("baseline", e))?;
    let best = max_safe_hyperbox(&spec, &dataset).map_err(|e| stage_err("baseline", e))?;
    let file = BestBoxFile::from_assignment(&spec, &best);
    file.save(out.join("bestbox.json"))
        .map_err(|e| stage_err("baseline", e))?;
    println!(
        "dataset {} rows, best box volume {} ms^{}",
        dataset.rows.len(),
        file.volume_ms,
        file.box_ms.len()
    );
    Ok(())
}

// ---------------------------------------------------------------------------
// learn

struct LearnKnobs {
    updates: usize,
    samples: usize,
    kfold: usize,
    trees: usize,
    features: String,
    cases_per_point: usize,
    target_precision: f64,
    seed: u64,
}

fn run_learn(
    spec: &SystemSpec,
    dataset: &LabeledDataset,
    archive: &[safewcet::search::EvaluatedCase],
    knobs: &LearnKnobs,
    out: &Path,
) -> Result<BorderFile, AppError> {
    let err = |e: safewcet::learn::LearnError| stage_err("learn", e);
    let features = match knobs.features.as_str() {
        "all" => FeatureSet {
            tasks: spec.range_tasks(),
        },
        "auto" => reduce_features(
            spec,
            dataset,
            &ReduceConfig {
                trees: knobs.trees,
                depth: None,
                threshold: None,
                seed: derive_seed(knobs.seed, "forest", &[]),
            },
        )
        .map_err(err)?,
        other => {
            return Err(invalid(format!(
                "features must be `auto` or `all`, got `{other}`"
            )))
        }
    };
    let model = fit_rsm_logit(spec, dataset, &features).map_err(err)?;
    let (p_u, _) = threshold_no_false_negative(spec, dataset, &model).map_err(err)?;
    let (reduced, pruned) = prune_by_intercepts(spec, dataset, &model, p_u).map_err(err)?;
    let cfg = RefineConfig {
        max_updates: knobs.updates,
        samples: knobs.samples,
        kfold: knobs.kfold,
        target_precision: knobs.target_precision,
        cases_per_point: knobs.cases_per_point,
        seed: derive_seed(knobs.seed, "refine", &[]),
    };
    let (border, final_dataset) =
        refine(spec, archive, pruned, &features, reduced, &cfg).map_err(err)?;
    let file = BorderFile::from_border(spec, &border);
    file.save(out.join("border.json"))
        .map_err(|e| stage_err("learn", e))?;
    final_dataset
        .write_csv(spec, out.join("refined_dataset.csv"))
        .map_err(|e| stage_err("learn", e))?;
    Ok(file)
}

fn cmd_learn(cli: &Cli, args: &LearnArgs, out: &Path) -> Result<(), AppError> {
    let spec = load_system(&args.system).map_err(invalid)?;
    let dataset = LabeledDataset::read_csv(&spec, &args.dataset).map_err(invalid)?;
    let archive = read_archive(&spec, &args.archive).map_err(invalid)?;
    if args.kfold < 2 {
        return Err(invalid("kfold must be at least 2"));
    }
    let knobs = LearnKnobs {
        updates: args.updates,
        samples: args.samples,
        kfold: args.kfold,
        trees: args.trees,
        features: args.features.clone(),
        cases_per_point: args.cases_per_point,
        target_precision: args.target_precision,
        seed: cli.seed.unwrap_or(0),
    };
    let file = run_learn(&spec, &dataset, &archive, &knobs, out)?;
    println!(
        "border over {} feature(s), p_s {:.4}, precision {:.4}",
        file.feature_tasks.len(),
        file.p_s,
        file.precision
    );
    Ok(())
}

// ---------------------------------------------------------------------------
// evaluate

#[derive(Serialize)]
struct EvalReport {
    runs: usize,
    violations: usize,
    probability: f64,
    volume_ms: f64,
}

fn cmd_evaluate(cli: &Cli, args: &EvaluateArgs, out: &Path) -> Result<(), AppError> {
    let spec = load_system(&args.system).map_err(invalid)?;
    let bx = read_box(&spec, &args.box_file).map_err(invalid)?;
    if args.runs == 0 {
        return Err(invalid("runs must be positive"));
    }
    let outcome = empirical_probability(&spec, &bx, args.runs, cli.seed.unwrap_or(0))
        .map_err(|e| stage_err("evaluate", e))?;
    write_eval_outputs(&spec, &bx, &outcome, out, "eval.json", "runs.csv")?;
    println!(
        "violations {}/{} (p = {})",
        outcome.violations, outcome.runs, outcome.probability
    );
    Ok(())
}

fn write_eval_outputs(
    spec: &SystemSpec,
    bx: &safewcet::evalrun::WcetBox,
    outcome: &safewcet::evalrun::EvalOutcome,
    out: &Path,
    json_name: &str,
    csv_name: &str,
) -> Result<(), AppError> {
    let report = EvalReport {
        runs: outcome.runs,
        violations: outcome.violations,
        probability: outcome.probability,
        volume_ms: hyperbox_volume(spec, bx),
    };
    write_json(&out.join(json_name), &report)?;
    let mut csv = String::from("run,violated\n");
    for (i, v) in outcome.verdicts.iter().enumerate() {
        csv.push_str(&format!("{},{}\n", i, u8::from(*v)));
    }
    std::fs::write(out.join(csv_name), csv).map_err(|e| stage_err("evaluate", e))?;
    Ok(())
}

// ---------------------------------------------------------------------------
// compare

fn cmd_compare(args: &CompareArgs, out: &Path) -> Result<(), AppError> {
    let a = read_volume_column(&args.a)?;
    let b = read_volume_column(&args.b)?;
    let result = safewcet::stats::compare(&a, &b).map_err(invalid)?;
    #[derive(Serialize)]
    struct CompareReport {
        n_a: usize,
        n_b: usize,
        u_statistic: f64,
        p_value: f64,
        a12: f64,
    }
    let report = CompareReport {
        n_a: a.len(),
        n_b: b.len(),
        u_statistic: result.u_statistic,
        p_value: result.p_value,
        a12: result.a12,
    };
    write_json(&out.join("compare.json"), &report)?;
    println!(
        "U = {}, p = {}, A12 = {}",
        result.u_statistic, result.p_value, result.a12
    );
    Ok(())
}

/// Reads the last column of a CSV as f64s; a non-numeric first line is
/// treated as a header.
fn read_volume_column(path: &Path) -> Result<Vec<f64>, AppError> {
    let text = std::fs::read_to_string(path).map_err(invalid)?;
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let field = line.rsplit(',').next().unwrap_or("").trim();
        if field.is_empty() {
            continue;
        }
        match field.parse::<f64>() {
            Ok(v) => out.push(v),
            Err(_) if i == 0 => continue,
            Err(_) => {
                return Err(invalid(format!(
                    "{}: line {} is not numeric",
                    path.display(),
                    i + 1
                )))
            }
        }
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// report

fn cmd_report(args: &ReportArgs, out: &Path) -> Result<(), AppError> {
    let spec = load_system(&args.system).map_err(invalid)?;
    let border = BorderFile::load(&args.border).map_err(invalid)?;
    let (fa, fb) = args
        .features
        .split_once(',')
        .ok_or_else(|| invalid("--features wants two names: a,b"))?;
    if args.grid < 2 {
        return Err(invalid("grid must be at least 2"));
    }
    let grid = report_grid(&spec, &border, fa.trim(), fb.trim(), args.grid).map_err(invalid)?;
    let mut csv = format!("{}_ms,{}_ms,probability\n", fa.trim(), fb.trim());
    for (x, y, p) in grid {
        csv.push_str(&format!("{x},{y},{p}\n"));
    }
    let path = out.join("report.csv");
    std::fs::write(&path, csv).map_err(|e| stage_err("report", e))?;
    println!("{}", path.display());
    Ok(())
}

// ---------------------------------------------------------------------------
// pipeline

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct SearchSection {
    np: usize,
    ns: usize,
    iterations: usize,
    pc: f64,
    pm: f64,
}

impl Default for SearchSection {
    fn default() -> Self {
        SearchSection {
            np: 10,
            ns: 20,
            iterations: 1000,
            pc: 0.7,
            pm: 0.2,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct BaselineSection {
    np: usize,
    ns: usize,
    /// Omitted: derived so the label budget matches search + refinement.
    iterations: Option<usize>,
}

impl Default for BaselineSection {
    fn default() -> Self {
        BaselineSection {
            np: 10,
            ns: 20,
            iterations: None,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct LearnSection {
    updates: usize,
    samples: usize,
    kfold: usize,
    trees: usize,
    features: String,
    cases_per_point: usize,
    target_precision: f64,
}

impl Default for LearnSection {
    fn default() -> Self {
        LearnSection {
            updates: 100,
            samples: 100,
            kfold: 5,
            trees: 100,
            features: "auto".into(),
            cases_per_point: 10,
            target_precision: 0.99,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct EvaluateSection {
    runs: usize,
}

impl Default for EvaluateSection {
    fn default() -> Self {
        EvaluateSection { runs: 40000 }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
struct PipelineConfig {
    seed: u64,
    /// Existing system file; mutually exclusive with `generator`.
    system: Option<String>,
    generator: Option<GenConfig>,
    search: SearchSection,
    baseline: Option<BaselineSection>,
    learn: LearnSection,
    evaluate: Option<EvaluateSection>,
}

#[derive(Serialize, Deserialize)]
struct StageRecord {
    name: String,
    duration_ms: f64,
    artifacts: BTreeMap<String, String>,
}

#[derive(Serialize, Deserialize)]
struct Manifest {
    config: PipelineConfig,
    stage_seeds: BTreeMap<String, u64>,
    stages: Vec<StageRecord>,
}

fn sha256_file(path: &Path) -> Result<String, AppError> {
    let bytes = std::fs::read(path)
        .map_err(|e| AppError::Stage(format!("hash {}: {e}", path.display())))?;
    let mut hasher = Sha256::new();
    hasher.update(&bytes);
    let mut hex = String::with_capacity(64);
    for b in hasher.finalize() {
        hex.push_str(&format!("{b:02x}"));
    }
    Ok(hex)
}

struct StageLog {
    stages: Vec<StageRecord>,
}

impl StageLog {
    fn record(
        &mut self,
        out: &Path,
        name: &str,
        started: Instant,
        files: &[&str],
    ) -> Result<(), AppError> {
        let mut artifacts = BTreeMap::new();
        for f in files {
            artifacts.insert(f.to_string(), sha256_file(&out.join(f))?);
        }
        self.stages.push(StageRecord {
            name: name.into(),
            duration_ms: started.elapsed().as_secs_f64() * 1000.0,
            artifacts,
        });
        Ok(())
    }
}

fn cmd_pipeline(cli: &Cli, args: &PipelineArgs, out: &Path) -> Result<(), AppError> {
    if let Some(manifest_path) = &args.replay {
        return replay_pipeline(manifest_path, out);
    }
    let mut config = match &args.config {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(invalid)?;
            serde_json::from_str::<PipelineConfig>(&text).map_err(invalid)?
        }
        None => PipelineConfig::default(),
    };
    if let Some(seed) = cli.seed {
        config.seed = seed;
    }
    run_pipeline(&config, out)?;
    println!("pipeline complete: {}", out.join("manifest.json").display());
    Ok(())
}

fn replay_pipeline(manifest_path: &Path, out: &Path) -> Result<(), AppError> {
    let text = std::fs::read_to_string(manifest_path).map_err(invalid)?;
    let old: Manifest = serde_json::from_str(&text).map_err(invalid)?;
    let new = run_pipeline(&old.config, out)?;
    let collect = |m: &Manifest| -> BTreeMap<String, String> {
        m.stages
            .iter()
            .flat_map(|s| s.artifacts.clone())
            .collect()
    };
    let (old_art, new_art) = (collect(&old), collect(&new));
    let mut mismatches = Vec::new();
    for (file, hash) in &old_art {
        match new_art.get(file) {
            Some(h) if h == hash => {}
            Some(_) => mismatches.push(format!("{file}: contents differ")),
            None => mismatches.push(format!("{file}: missing from replay")),
        }
    }
    if mismatches.is_empty() {
        println!("replay OK: {} artifact(s) byte-identical", old_art.len());
        Ok(())
    } else {
        Err(AppError::Stage(format!(
            "replay mismatch: {}",
            mismatches.join("; ")
        )))
    }
}

fn run_pipeline(config: &PipelineConfig, out: &Path) -> Result<Manifest, AppError> {
    if config.system.is_some() && config.generator.is_some() {
        return Err(invalid("config sets both `system` and `generator`"));
    }
    let seed_of = |name: &str| derive_seed(config.seed, name, &[]);
    let mut stage_seeds = BTreeMap::new();
    for name in ["generate", "search", "baseline", "learn", "evaluate"] {
        stage_seeds.insert(name.to_string(), seed_of(name));
    }
    let mut log = StageLog { stages: Vec::new() };

    // Stage 0: obtain the system under analysis.
    let t0 = Instant::now();
    let spec = match (&config.system, &config.generator) {
        (Some(path), _) => load_system(path).map_err(|e| stage_err("system", e))?,
        (None, gen) => {
            let mut cfg = gen.clone().unwrap_or_default();
            cfg.seed = seed_of("generate");
            generate_system(&cfg).map_err(|e| stage_err("system", e))?
        }
    };
    safewcet::model::save_system(&spec, out.join("system.json"))
        .map_err(|e| stage_err("system", e))?;
    log.record(out, "system", t0, &["system.json"])?;

    // Stage 1: guided search.
    let t1 = Instant::now();
    let params = search_params(
        config.search.np,
        config.search.ns,
        config.search.iterations,
        config.search.pc,
        config.search.pm,
        Some(seed_of("search")),
    )?;
    let result = nsga2_search(&spec, &params);
    write_archive(&spec, &result.archive, out.join("archive.json"))
        .map_err(|e| stage_err("search", e))?;
    result
        .dataset
        .write_csv(&spec, out.join("dataset.csv"))
        .map_err(|e| stage_err("search", e))?;
    log.record(out, "search", t1, &["archive.json", "dataset.csv"])?;

    // Stage 2 (optional): random baseline with a matched label budget.
    let mut baseline_ran = false;
    if let Some(bl) = &config.baseline {
        let t = Instant::now();
        let sweak_labels = config.search.np * config.search.ns * config.search.iterations
            + config.learn.updates * config.learn.samples * config.learn.cases_per_point;
        let iterations = match bl.iterations {
            Some(i) => i,
            None => {
                let per_iter = bl.np * bl.ns;
                if per_iter == 0 || sweak_labels % per_iter != 0 {
                    return Err(invalid(format!(
                        "baseline np*ns = {} cannot exactly match the {} label budget; \
                         set baseline.iterations explicitly",
                        bl.np * bl.ns,
                        sweak_labels
                    )));
                }
                sweak_labels / per_iter
            }
        };
        let params = BaselineParams {
            np: bl.np,
            ns: bl.ns,
            iterations,
            seed: seed_of("baseline"),
        };
        let dataset = random_search(&spec, &params);
        dataset
            .write_csv(&spec, out.join("baseline_dataset.csv"))
            .map_err(|e| stage_err("baseline", e))?;
        let best = max_safe_hyperbox(&spec, &dataset).map_err(|e| stage_err("baseline", e))?;
        BestBoxFile::from_assignment(&spec, &best)
            .save(out.join("bestbox.json"))
            .map_err(|e| stage_err("baseline", e))?;
        log.record(
            out,
            "baseline",
            t,
            &["baseline_dataset.csv", "bestbox.json"],
        )?;
        baseline_ran = true;
    }

    // Stage 3: border learning on the search outputs.
    let t3 = Instant::now();
    let knobs = LearnKnobs {
        updates: config.learn.updates,
        samples: config.learn.samples,
        kfold: config.learn.kfold,
        trees: config.learn.trees,
        features: config.learn.features.clone(),
        cases_per_point: config.learn.cases_per_point,
        target_precision: config.learn.target_precision,
        seed: seed_of("learn"),
    };
    run_learn(&spec, &result.dataset, &result.archive, &knobs, out)?;
    log.record(out, "learn", t3, &["border.json", "refined_dataset.csv"])?;

    // Stage 4 (optional): empirical evaluation of the learned box (and the
    // baseline box when present).
    if let Some(ev) = &config.evaluate {
        let t = Instant::now();
        if ev.runs == 0 {
            return Err(invalid("evaluate.runs must be positive"));
        }
        let bx = read_box(&spec, out.join("border.json")).map_err(|e| stage_err("evaluate", e))?;
        let outcome = empirical_probability(&spec, &bx, ev.runs, seed_of("evaluate"))
            .map_err(|e| stage_err("evaluate", e))?;
        write_eval_outputs(&spec, &bx, &outcome, out, "eval_border.json", "runs_border.csv")?;
        let mut files = vec!["eval_border.json", "runs_border.csv"];
        if baseline_ran {
            let bbx =
                read_box(&spec, out.join("bestbox.json")).map_err(|e| stage_err("evaluate", e))?;
            let boutcome = empirical_probability(
                &spec,
                &bbx,
                ev.runs,
                derive_seed(seed_of("evaluate"), "baseline-box", &[]),
            )
            .map_err(|e| stage_err("evaluate", e))?;
            write_eval_outputs(
                &spec,
                &bbx,
                &boutcome,
                out,
                "eval_baseline.json",
                "runs_baseline.csv",
            )?;
            files.extend(["eval_baseline.json", "runs_baseline.csv"]);
        }
        log.record(out, "evaluate", t, &files)?;
    }

    let manifest = Manifest {
        config: config.clone(),
        stage_seeds,
        stages: log.stages,
    };
    write_json(&out.join("manifest.json"), &manifest)?;
    Ok(manifest)
}

// ---------------------------------------------------------------------------

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), AppError> {
    let mut text = serde_json::to_string_pretty(value)
        .map_err(|e| AppError::Stage(format!("serialize {}: {e}", path.display())))?;
    text.push('\n');
    std::fs::write(path, text)
        .map_err(|e| AppError::Stage(format!("write {}: {e}", path.display())))
}
