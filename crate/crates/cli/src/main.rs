//! `sds`: generate instances, run solvers and candidate programs, score
//! generations, evaluate against the virtual best, run tournaments and audit
//! candidate code.
//!
//! Exit codes: 0 success, 1 usage or configuration error, 2 data error,
//! 3 internal error.

mod config;

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use config::{resolve_seed, Config};
use sds_core::assets::HERO_SA_PY;
use sds_core::audit::{AuditReport, Auditor, StructuralBucket};
use sds_core::eval::{
    self, best_of_n_collapse, evaluate, gap, pass_at_k, read_metrics_csv, read_records_csv, to_rounded_json, tournament,
    vbs_table, write_metrics_csv, write_records_csv, GapMode, MethodRecord, PoolSample, RecordRow, TournamentConfig,
};
use sds_core::gen::{generate_mixture, instance_seed, Family, GenSpec};
use sds_core::model::{read_jsonl, write_jsonl, Instance};
use sds_core::pool::{default_workers, parallel_map};
use sds_core::reward::{compute_reward, diversity_penalty, ExecMode, Gate, Sample, TrainingProgress};
use sds_core::sandbox::{extract_code_block, Candidate, Harness};
use sds_core::solvers::{builtin, Acceptance, SimulatedAnnealing, Solver};

/// Failure with the exit code it maps to.
struct Fail {
    code: u8,
    err: anyhow::Error,
}

trait Classify<T> {
    fn usage(self) -> Result<T, Fail>;
    fn data(self) -> Result<T, Fail>;
    fn internal(self) -> Result<T, Fail>;
}

impl<T, E: Into<anyhow::Error>> Classify<T> for Result<T, E> {
    fn usage(self) -> Result<T, Fail> {
        self.map_err(|e| Fail { code: 1, err: e.into() })
    }
    fn data(self) -> Result<T, Fail> {
        self.map_err(|e| Fail { code: 2, err: e.into() })
    }
    fn internal(self) -> Result<T, Fail> {
        self.map_err(|e| Fail { code: 3, err: e.into() })
    }
}

#[derive(Parser, Debug)]
#[command(name = "sds", version, about = "Selection-problem instances, solvers, sandboxed candidates, rewards and evaluation")]
struct Cli {
    /// TOML configuration file; flags override it.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Print the fully resolved configuration as TOML and exit.
    #[arg(long, global = true)]
    print_config: bool,
    /// Re-read and check every file written.
    #[arg(long, global = true)]
    validate: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Write a JSONL dataset of generated instances.
    Generate(GenerateArgs),
    /// Run a built-in solver or an external program over a dataset.
    Solve(SolveArgs),
    /// Run one candidate program over a dataset and report outcomes.
    RunCandidate(RunCandidateArgs),
    /// Compute virtual-best gaps, difficulty strata and a summary report.
    Evaluate(EvaluateArgs),
    /// Bootstrap pass@k over a pool of sampled runs.
    Passk(PassKArgs),
    /// Two-stage tournament over candidate programs.
    Tournament(TournamentArgs),
    /// Heuristic structural audit of annealing-style code.
    Audit(AuditArgs),
    /// Score one generation and print its reward breakdown.
    Reward(RewardArgs),
}

#[derive(Args, Debug)]
struct GenerateArgs {
    #[arg(long)]
    count: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: PathBuf,
    /// Generate a single family instead of the mixture.
    #[arg(long)]
    family: Option<String>,
    /// TOML file with `[[mixture]]` entries (family, weight, params).
    #[arg(long)]
    mixture: Option<PathBuf>,
    #[arg(long)]
    n_min: Option<usize>,
    #[arg(long)]
    n_max: Option<usize>,
}

#[derive(Args, Debug)]
struct SolveArgs {
    #[arg(long)]
    dataset: PathBuf,
    /// greedy, ls, bnb, sa, sa-bug, exhaustive, or external:<source file>.
    #[arg(long)]
    method: String,
    /// Per-instance wall-clock budget in seconds (also the external timeout).
    #[arg(long)]
    budget: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    workers: Option<usize>,
    #[arg(long)]
    out: PathBuf,
    /// Method name written to the record file (default: --method).
    #[arg(long)]
    label: Option<String>,
    /// Write elapsed_sec as 0 so repeated runs produce identical files.
    #[arg(long)]
    no_timing: bool,
}

#[derive(Args, Debug)]
struct RunCandidateArgs {
    /// Candidate source file.
    #[arg(long, conflicts_with = "generation")]
    source: Option<PathBuf>,
    /// Model generation whose single code block is the candidate.
    #[arg(long)]
    generation: Option<PathBuf>,
    #[arg(long)]
    dataset: PathBuf,
    #[arg(long)]
    timeout: Option<f64>,
    #[arg(long)]
    workers: Option<usize>,
    /// Record CSV output.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Full per-run JSONL output.
    #[arg(long)]
    runs: Option<PathBuf>,
    #[arg(long, default_value = "candidate")]
    label: String,
}

#[derive(Args, Debug)]
struct EvaluateArgs {
    /// Record CSV files; all methods share one virtual best.
    #[arg(long, num_args = 1.., required = true)]
    records: Vec<PathBuf>,
    /// Output directory for metrics_final.csv and summary.json.
    #[arg(long)]
    out: PathBuf,
    /// Method defining instance hardness.
    #[arg(long, default_value = "greedy")]
    reference: String,
    #[arg(long)]
    workers: Option<usize>,
}

#[derive(Args, Debug)]
struct PassKArgs {
    /// Directory of record CSVs; all rows of one uuid form its sample pool.
    #[arg(long)]
    samples: PathBuf,
    /// Extra record CSVs that only contribute to the virtual best.
    #[arg(long, num_args = 1..)]
    vbs_records: Vec<PathBuf>,
    #[arg(long, value_delimiter = ',')]
    k: Vec<usize>,
    #[arg(long = "B")]
    bootstrap: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Also write the best-of-N collapsed record CSV here.
    #[arg(long)]
    collapsed: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct TournamentArgs {
    #[arg(long)]
    dataset: PathBuf,
    /// Candidate source files.
    #[arg(long, num_args = 0..)]
    pool: Vec<PathBuf>,
    /// Files holding model generations; their code blocks join the pool.
    #[arg(long, num_args = 1..)]
    generations: Vec<PathBuf>,
    /// Add the bundled annealing template to the pool.
    #[arg(long)]
    include_hero: bool,
    /// Record CSVs defining reference scores and gaps (default: greedy and
    /// local search are run in-process).
    #[arg(long, num_args = 1..)]
    reference_records: Vec<PathBuf>,
    #[arg(long, default_value = "greedy")]
    reference: String,
    #[arg(long)]
    probes: Option<usize>,
    #[arg(long)]
    hardest_frac: Option<f64>,
    #[arg(long)]
    survivors: Option<usize>,
    #[arg(long)]
    timeout: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    workers: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct AuditArgs {
    /// Files to audit.
    #[arg(required = true)]
    files: Vec<PathBuf>,
    /// Treat files as model generations and audit their code block.
    #[arg(long)]
    generations: bool,
    /// JSON pattern file replacing the bundled one.
    #[arg(long)]
    patterns: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum GateArg {
    Hard,
    Soft,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum ExecArg {
    Scaffolded,
    Minimal,
}

#[derive(Args, Debug)]
struct RewardArgs {
    /// Generation text with `<think>` and `<code>` blocks.
    #[arg(long)]
    generation: PathBuf,
    /// Instance file: a JSON object or JSONL (first line, or --uuid).
    #[arg(long)]
    instance: PathBuf,
    #[arg(long)]
    uuid: Option<String>,
    /// Normalized training progress t in [0, 1].
    #[arg(long, default_value_t = 0.0)]
    progress: f64,
    #[arg(long, value_enum)]
    gate: Option<GateArg>,
    #[arg(long, value_enum)]
    exec_mode: Option<ExecArg>,
    /// Add the greedy-anchoring term.
    #[arg(long)]
    anchor: bool,
    /// Other generations of the same group, for the diversity penalty.
    #[arg(long, num_args = 1..)]
    group: Vec<PathBuf>,
    #[arg(long)]
    timeout: Option<f64>,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {:#}", f.err);
            ExitCode::from(f.code)
        }
    }
}

fn run(cli: Cli) -> Result<(), Fail> {
    let mut cfg = Config::load(cli.config.as_deref()).with_context(|| "loading config").usage()?;
    let ctx = Ctx { print_config: cli.print_config, validate: cli.validate };
    match cli.command {
        Command::Generate(a) => cmd_generate(a, &mut cfg, ctx),
        Command::Solve(a) => cmd_solve(a, &mut cfg, ctx),
        Command::RunCandidate(a) => cmd_run_candidate(a, &mut cfg, ctx),
        Command::Evaluate(a) => cmd_evaluate(a, &mut cfg, ctx),
        Command::Passk(a) => cmd_passk(a, &mut cfg, ctx),
        Command::Tournament(a) => cmd_tournament(a, &mut cfg, ctx),
        Command::Audit(a) => cmd_audit(a, &mut cfg, ctx),
        Command::Reward(a) => cmd_reward(a, &mut cfg, ctx),
    }
}

#[derive(Clone, Copy)]
struct Ctx {
    print_config: bool,
    validate: bool,
}

impl Ctx {
    /// Print the resolved config when asked; `true` means stop here.
    fn show(&self, cfg: &Config) -> bool {
        if self.print_config {
            print!("{}", cfg.to_toml());
        }
        self.print_config
    }
}

fn create(path: &Path) -> Result<BufWriter<File>, Fail> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display())).data()?;
    }
    Ok(BufWriter::new(File::create(path).with_context(|| format!("creating {}", path.display())).data()?))
}

fn read_dataset(path: &Path) -> Result<Vec<Instance>, Fail> {
    let f = File::open(path).with_context(|| format!("opening {}", path.display())).data()?;
    read_jsonl(BufReader::new(f)).with_context(|| format!("reading {}", path.display())).data()
}

fn read_records(paths: &[PathBuf]) -> Result<Vec<MethodRecord>, Fail> {
    let mut all: Vec<MethodRecord> = Vec::new();
    for p in paths {
        let f = File::open(p).with_context(|| format!("opening {}", p.display())).data()?;
        for rec in read_records_csv(BufReader::new(f)).with_context(|| format!("reading {}", p.display())).data()? {
            match all.iter_mut().find(|m| m.method == rec.method) {
                Some(m) => m.rows.extend(rec.rows),
                None => all.push(rec),
            }
        }
    }
    Ok(all)
}

fn write_json<T: Serialize>(path: Option<&Path>, value: &T) -> Result<(), Fail> {
    let text = serde_json::to_string_pretty(value).internal()?;
    match path {
        Some(p) => {
            let mut w = create(p)?;
            writeln!(w, "{text}").data()?;
            w.flush().data()
        }
        None => {
            println!("{text}");
            Ok(())
        }
    }
}

fn workers(flag: Option<usize>, cfg: &Config) -> usize {
    flag.or(cfg.workers).unwrap_or_else(default_workers).clamp(1, 32)
}

fn cmd_generate(a: GenerateArgs, cfg: &mut Config, ctx: Ctx) -> Result<(), Fail> {
    if let Some(path) = &a.mixture {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display())).usage()?;
        let m: Config = toml::from_str(&text).with_context(|| format!("parsing {}", path.display())).usage()?;
        cfg.mixture = m.mixture;
    }
    if let Some(c) = a.count {
        cfg.generate.count = c;
    }
    cfg.seed = Some(resolve_seed(a.seed, cfg).usage()?);
    let mut specs = match &a.family {
        Some(name) => vec![GenSpec::new(name.parse::<Family>().usage()?)],
        None => cfg.mixture(),
    };
    for s in &mut specs {
        if a.n_min.is_some() {
            s.params.n_min = a.n_min;
        }
        if a.n_max.is_some() {
            s.params.n_max = a.n_max;
        }
    }
    cfg.mixture = specs.clone();
    if ctx.show(cfg) {
        return Ok(());
    }
    let instances = generate_mixture(&specs, cfg.generate.count, cfg.seed.unwrap_or(0)).usage()?;
    let mut w = create(&a.out)?;
    write_jsonl(&mut w, &instances).data()?;
    w.flush().data()?;
    let mut hist: BTreeMap<&str, usize> = BTreeMap::new();
    for inst in &instances {
        *hist.entry(inst.problem_type.as_str()).or_default() += 1;
    }
    for (family, count) in &hist {
        println!("{family}\t{count}");
    }
    if ctx.validate {
        let back = read_dataset(&a.out)?;
        if back != instances {
            return Err(anyhow!("validation: {} does not read back identically", a.out.display())).internal();
        }
    }
    Ok(())
}

fn cmd_solve(a: SolveArgs, cfg: &mut Config, ctx: Ctx) -> Result<(), Fail> {
    if let Some(b) = a.budget {
        cfg.solve.budget_sec = b;
    }
    cfg.seed = Some(resolve_seed(a.seed, cfg).usage()?);
    cfg.workers = Some(workers(a.workers, cfg));
    let budget = cfg.solve.budget_sec;
    if !(budget.is_finite() && budget > 0.0) {
        return Err(anyhow!("budget must be positive, got {budget}")).usage();
    }
    let label = a.label.clone().unwrap_or_else(|| a.method.clone());
    let seed = cfg.seed.unwrap_or(0);
    let n_workers = cfg.workers.unwrap_or(1);

    enum Method {
        Builtin(Box<dyn Solver>),
        External(Candidate, Harness),
    }
    let method = if let Some(src) = a.method.strip_prefix("external:") {
        let cand = Candidate::from_file(Path::new(src)).with_context(|| format!("reading candidate {src}")).usage()?;
        let harness = Harness::new(cfg.sandbox.runner.clone());
        harness.check_runner().usage()?;
        Method::External(cand, harness)
    } else {
        match a.method.as_str() {
            "sa" => Method::Builtin(Box::new(SimulatedAnnealing::new(cfg.sa))),
            "sa-bug" => {
                Method::Builtin(Box::new(SimulatedAnnealing::new(sds_core::solvers::SaConfig { acceptance: Acceptance::GlobalBestBug, ..cfg.sa })))
            }
            other => Method::Builtin(builtin(other).usage()?),
        }
    };
    if ctx.show(cfg) {
        return Ok(());
    }
    let instances = read_dataset(&a.dataset)?;
    let mut rows: Vec<RecordRow> = match &method {
        Method::Builtin(solver) => {
            let results = parallel_map(&instances, n_workers, |k, inst| {
                solver.solve(inst, budget, instance_seed(seed, k as u64)).map(|r| RecordRow::from_solve(&inst.uuid, &r))
            });
            results.into_iter().collect::<Result<_, _>>().data()?
        }
        Method::External(cand, harness) => harness
            .run_batch(cand, &instances, budget, n_workers)
            .usage()?
            .iter()
            .map(|r| RecordRow::from_run(r, Some(&cand.source_hash)))
            .collect(),
    };
    if a.no_timing {
        rows.iter_mut().for_each(|r| r.elapsed_sec = 0.0);
    }
    let rec = MethodRecord { method: label, rows };
    let mut w = create(&a.out)?;
    write_records_csv(&mut w, std::slice::from_ref(&rec)).data()?;
    w.flush().data()?;
    if ctx.validate {
        let back = read_records(std::slice::from_ref(&a.out))?;
        if back != vec![rec] {
            return Err(anyhow!("validation: {} does not read back identically", a.out.display())).internal();
        }
    }
    Ok(())
}

fn load_candidate(source: Option<&Path>, generation: Option<&Path>) -> Result<Candidate, Fail> {
    match (source, generation) {
        (Some(p), _) => Candidate::from_file(p).with_context(|| format!("reading {}", p.display())).data(),
        (None, Some(p)) => {
            let text = std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display())).data()?;
            let mut c = extract_code_block(&text).ok_or_else(|| anyhow!("{}: no single code block", p.display())).data()?;
            c.origin = p.display().to_string();
            Ok(c)
        }
        (None, None) => Err(anyhow!("one of --source or --generation is required")).usage(),
    }
}

fn cmd_run_candidate(a: RunCandidateArgs, cfg: &mut Config, ctx: Ctx) -> Result<(), Fail> {
    if let Some(t) = a.timeout {
        cfg.sandbox.timeout_sec = t;
    }
    cfg.workers = Some(workers(a.workers, cfg));
    if ctx.show(cfg) {
        return Ok(());
    }
    let cand = load_candidate(a.source.as_deref(), a.generation.as_deref())?;
    let instances = read_dataset(&a.dataset)?;
    let harness = Harness::new(cfg.sandbox.runner.clone());
    let runs = harness.run_batch(&cand, &instances, cfg.sandbox.timeout_sec, cfg.workers.unwrap_or(1)).usage()?;
    let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
    for r in &runs {
        *counts.entry(r.outcome.error_type()).or_default() += 1;
    }
    if let Some(p) = &a.runs {
        let mut w = create(p)?;
        for r in &runs {
            writeln!(w, "{}", serde_json::to_string(r).internal()?).data()?;
        }
        w.flush().data()?;
    }
    if let Some(p) = &a.out {
        let rec = MethodRecord { method: a.label.clone(), rows: runs.iter().map(|r| RecordRow::from_run(r, Some(&cand.source_hash))).collect() };
        let mut w = create(p)?;
        write_records_csv(&mut w, &[rec]).data()?;
        w.flush().data()?;
        if ctx.validate {
            read_records(std::slice::from_ref(p))?;
        }
    }
    println!("{}", serde_json::json!({ "source_hash": cand.source_hash, "runs": runs.len(), "outcomes": counts }));
    Ok(())
}

fn cmd_evaluate(a: EvaluateArgs, cfg: &mut Config, ctx: Ctx) -> Result<(), Fail> {
    cfg.workers = Some(workers(a.workers, cfg));
    if ctx.show(cfg) {
        return Ok(());
    }
    let records = read_records(&a.records)?;
    let result = evaluate(&records, Some(&a.reference)).data()?;
    std::fs::create_dir_all(&a.out).with_context(|| format!("creating {}", a.out.display())).data()?;
    let metrics = a.out.join("metrics_final.csv");
    let mut w = create(&metrics)?;
    write_metrics_csv(&mut w, &result.rows).data()?;
    w.flush().data()?;
    let mut strata: BTreeMap<String, usize> = BTreeMap::new();
    for v in &result.verdicts {
        if let Some(d) = v.difficulty {
            *strata.entry(d.name().to_string()).or_default() += 1;
        }
    }
    let report = serde_json::json!({
        "instances": result.verdicts.len(),
        "reference": a.reference,
        "difficulty_counts": strata,
        "methods": to_rounded_json(&result.summary),
    });
    let summary = a.out.join("summary.json");
    write_json(Some(&summary), &report)?;
    if ctx.validate {
        let f = File::open(&metrics).data()?;
        let back = read_metrics_csv(BufReader::new(f)).data()?;
        if back != result.rows {
            return Err(anyhow!("validation: metrics file does not read back identically")).internal();
        }
        let text = std::fs::read_to_string(&summary).data()?;
        serde_json::from_str::<serde_json::Value>(&text).data()?;
    }
    println!("{}", serde_json::to_string_pretty(&report).internal()?);
    Ok(())
}

fn cmd_passk(a: PassKArgs, cfg: &mut Config, ctx: Ctx) -> Result<(), Fail> {
    if let Some(b) = a.bootstrap {
        cfg.passk.bootstrap = b;
    }
    if !a.k.is_empty() {
        cfg.passk.ks = a.k.clone();
    }
    cfg.seed = Some(resolve_seed(a.seed, cfg).usage()?);
    if ctx.show(cfg) {
        return Ok(());
    }
    let mut files: Vec<PathBuf> = std::fs::read_dir(&a.samples)
        .with_context(|| format!("listing {}", a.samples.display()))
        .data()?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "csv"))
        .collect();
    files.sort();
    if files.is_empty() {
        return Err(anyhow!("no .csv files in {}", a.samples.display())).data();
    }
    let sample_records = read_records(&files)?;
    let mut all = sample_records.clone();
    all.extend(read_records(&a.vbs_records)?);
    let vbs = vbs_table(&all);
    let mut pools: BTreeMap<String, Vec<RecordRow>> = BTreeMap::new();
    for rec in &sample_records {
        for r in &rec.rows {
            pools.entry(r.uuid.clone()).or_default().push(r.clone());
        }
    }
    let n = pools.values().map(Vec::len).min().unwrap_or(0);
    let samples: Vec<Vec<PoolSample>> = pools
        .iter()
        .map(|(uuid, rows)| {
            rows.iter()
                .map(|r| PoolSample {
                    feasible: r.feasible,
                    gap: gap(vbs[uuid], r.score, r.feasible, GapMode::UnconditionalInfeasibleIsOne).expect("defined"),
                })
                .collect()
        })
        .collect();
    let ks: Vec<usize> = if cfg.passk.ks.is_empty() {
        std::iter::successors(Some(1usize), |k| Some(k * 2)).take_while(|&k| k <= n).collect()
    } else {
        cfg.passk.ks.clone()
    };
    let mut table = Vec::new();
    for &k in &ks {
        table.push(pass_at_k(&samples, k, cfg.passk.bootstrap, cfg.seed.unwrap_or(0)).usage()?);
    }
    if let Some(p) = &a.collapsed {
        let rec = best_of_n_collapse("best_of_n", &pools, &vbs);
        let mut w = create(p)?;
        write_records_csv(&mut w, &[rec]).data()?;
        w.flush().data()?;
    }
    let report = serde_json::json!({
        "instances": pools.len(),
        "pool_size": n,
        "bootstrap": cfg.passk.bootstrap,
        "table": to_rounded_json(&table),
    });
    write_json(a.out.as_deref(), &report)
}

fn cmd_tournament(a: TournamentArgs, cfg: &mut Config, ctx: Ctx) -> Result<(), Fail> {
    let t = &mut cfg.tournament;
    if let Some(v) = a.probes {
        t.probe_count = v;
    }
    if let Some(v) = a.hardest_frac {
        t.hardest_frac = v;
    }
    if let Some(v) = a.survivors {
        t.survivors = v;
    }
    if let Some(v) = a.timeout {
        t.timeout_sec = v;
    }
    let seed = resolve_seed(a.seed, cfg).usage()?;
    cfg.tournament.seed = seed;
    cfg.seed = Some(seed);
    cfg.tournament.workers = workers(a.workers, cfg);
    if ctx.show(cfg) {
        return Ok(());
    }
    let tcfg: TournamentConfig = cfg.tournament;
    let instances = read_dataset(&a.dataset)?;
    let mut pool = Vec::new();
    if a.include_hero {
        pool.push(Candidate::new(HERO_SA_PY, "builtin:hero_sa"));
    }
    for p in &a.pool {
        pool.push(load_candidate(Some(p), None)?);
    }
    for p in &a.generations {
        pool.push(load_candidate(None, Some(p))?);
    }
    let records = if a.reference_records.is_empty() {
        let mut recs = Vec::new();
        for (name, budget) in [("greedy", 1.0), ("ls", 1.0)] {
            let solver = builtin(name).internal()?;
            let rows = parallel_map(&instances, tcfg.workers, |k, inst| {
                solver.solve(inst, budget, instance_seed(seed, k as u64)).map(|r| RecordRow::from_solve(&inst.uuid, &r))
            });
            recs.push(MethodRecord { method: name.into(), rows: rows.into_iter().collect::<Result<_, _>>().internal()? });
        }
        recs
    } else {
        read_records(&a.reference_records)?
    };
    let vbs = vbs_table(&records);
    let reference = records
        .iter()
        .find(|r| r.method == a.reference)
        .ok_or_else(|| anyhow!("reference method {:?} not in records", a.reference))
        .usage()?;
    let mut scores = Vec::with_capacity(instances.len());
    let mut gaps = Vec::with_capacity(instances.len());
    for inst in &instances {
        let row = reference.row(&inst.uuid).ok_or_else(|| anyhow!("reference has no row for {}", inst.uuid)).data()?;
        let v = vbs.get(&inst.uuid).copied().unwrap_or(f64::NEG_INFINITY);
        scores.push(if row.feasible { row.score } else { f64::NEG_INFINITY });
        gaps.push(gap(v, row.score, row.feasible, GapMode::UnconditionalInfeasibleIsOne).expect("defined"));
    }
    let harness = Harness::new(cfg.sandbox.runner.clone());
    harness.check_runner().usage()?;
    let report = tournament(&pool, &instances, &scores, &gaps, &tcfg, &harness).map_err(|e| match e {
        eval::EvalError::EmptyPool | eval::EvalError::TooManyProbes { .. } => Fail { code: 1, err: e.into() },
        other => Fail { code: 3, err: other.into() },
    })?;
    write_json(a.out.as_deref(), &to_rounded_json(&report))
}

fn cmd_audit(a: AuditArgs, cfg: &mut Config, ctx: Ctx) -> Result<(), Fail> {
    if ctx.show(cfg) {
        return Ok(());
    }
    let custom;
    let auditor = match &a.patterns {
        Some(p) => {
            let text = std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display())).usage()?;
            custom = Auditor::from_json(&text).usage()?;
            &custom
        }
        None => Auditor::builtin(),
    };
    #[derive(Serialize)]
    struct Entry {
        file: String,
        extracted: bool,
        report: Option<AuditReport>,
    }
    let mut entries = Vec::new();
    let mut buckets: BTreeMap<&str, usize> = StructuralBucket::ALL.iter().map(|b| (b.name(), 0)).collect();
    let mut not_sa = 0usize;
    for f in &a.files {
        let text = std::fs::read_to_string(f).with_context(|| format!("reading {}", f.display())).data()?;
        let code = if a.generations { extract_code_block(&text).map(|c| c.source_text) } else { Some(text) };
        let report = code.as_deref().map(|c| auditor.audit(c));
        match report.as_ref().and_then(|r| r.bucket) {
            Some(b) => *buckets.get_mut(b.name()).expect("known bucket") += 1,
            None => not_sa += 1,
        }
        entries.push(Entry { file: f.display().to_string(), extracted: code.is_some(), report });
    }
    let out = serde_json::json!({
        "heuristic": true,
        "files": entries,
        "buckets": buckets,
        "not_sa_like": not_sa,
    });
    write_json(a.out.as_deref(), &out)
}

fn cmd_reward(a: RewardArgs, cfg: &mut Config, ctx: Ctx) -> Result<(), Fail> {
    if let Some(g) = a.gate {
        cfg.reward.gate = match g {
            GateArg::Hard => Gate::Hard,
            GateArg::Soft => Gate::Soft,
        };
    }
    if let Some(m) = a.exec_mode {
        cfg.reward.exec_mode = match m {
            ExecArg::Scaffolded => ExecMode::Scaffolded,
            ExecArg::Minimal => ExecMode::Minimal,
        };
    }
    cfg.reward.anchor |= a.anchor;
    if let Some(t) = a.timeout {
        cfg.sandbox.timeout_sec = t;
    }
    if ctx.show(cfg) {
        return Ok(());
    }
    let text = std::fs::read_to_string(&a.generation).with_context(|| format!("reading {}", a.generation.display())).data()?;
    let inst_text = std::fs::read_to_string(&a.instance).with_context(|| format!("reading {}", a.instance.display())).data()?;
    let instances = read_jsonl(inst_text.as_bytes()).data()?;
    let inst = match &a.uuid {
        Some(u) => instances.iter().find(|i| &i.uuid == u).ok_or_else(|| anyhow!("no instance {u}")).data()?,
        None => instances.first().ok_or_else(|| anyhow!("no instance in {}", a.instance.display())).data()?,
    };
    let cand = extract_code_block(&text);
    let run = match &cand {
        Some(c) => {
            let harness = Harness::new(cfg.sandbox.runner.clone());
            Some(harness.run(c, inst, cfg.sandbox.timeout_sec).usage()?)
        }
        None => None,
    };
    let greedy_score = if cfg.reward.anchor {
        Some(builtin("greedy").internal()?.solve(inst, 5.0, 0).internal()?.score)
    } else {
        None
    };
    let diversity = if a.group.is_empty() {
        None
    } else {
        let mut codes = vec![cand.as_ref().map(|c| c.source_text.clone()).unwrap_or_default()];
        for p in &a.group {
            let t = std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display())).data()?;
            codes.push(extract_code_block(&t).map(|c| c.source_text).unwrap_or_default());
        }
        let refs: Vec<&str> = codes.iter().map(String::as_str).collect();
        Some(diversity_penalty(&refs)[0])
    };
    let sample = Sample {
        text: &text,
        code: cand.as_ref().map(|c| c.source_text.as_str()),
        run: run.as_ref(),
        instance: inst,
        progress: TrainingProgress::new(a.progress),
        greedy_score,
        diversity,
    };
    let breakdown = compute_reward(&sample, &cfg.reward);
    write_json(None, &breakdown)
}
