//! Command-line front end. Each stage is a subcommand with file handoffs;
//! every artifact-producing command writes a manifest next to its output.

use std::ffi::OsString;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::time::Duration;

use clap::{Args, Parser, Subcommand};
use serde_json::json;

use crate::bench::{
    decile_histogram, generate_cases, histogram_csv, measure_accuracy, read_cases, run_suite, write_atomic,
    write_cases, BenchError, SolverCommand, SuiteEntry, CASES_PER_ORACLE, SOLVER_ENV,
};
use crate::gp::GpConfig;
use crate::oracles::{error_rate, find_oracle, serve, usable_corpus, ExternalProcess, OracleSpec, DEFAULT_CALL_TIMEOUT};
use crate::pipeline::{evolve_stub, run_corpus, write_corpus_artifacts, Artifacts, CorpusConfig, PipelineError, RunManifest, StubFile};
use crate::sampler::{sample_dataset, Dataset, SampleError, SamplerConfig};
use crate::smtlib::TheoryMode;

#[derive(Debug, Parser)]
#[command(name = "stubgen", version, about = "Evolve SMT-LIB stubs for opaque functions")]
pub struct Cli {
    /// Base directory for every relative path.
    #[arg(long, global = true, default_value = ".")]
    pub workdir: PathBuf,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
    /// Extra functions served by an external process speaking the line protocol.
    #[arg(long = "oracle-cmd", global = true)]
    pub oracle_cmd: Option<String>,
    #[command(subcommand)]
    pub command: Cmd,
}

#[derive(Debug, Subcommand)]
pub enum Cmd {
    /// List the available functions.
    List,
    /// Sample a labelled dataset from a function.
    Sample {
        #[arg(long)]
        oracle: String,
        #[arg(long, default_value_t = 10_000)]
        n: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Evolve a stub from a function or a dataset file.
    Evolve {
        #[arg(long, conflicts_with = "dataset", required_unless_present = "dataset")]
        oracle: Option<String>,
        #[arg(long)]
        dataset: Option<PathBuf>,
        /// Training rows when sampling from a function.
        #[arg(long, default_value_t = 256)]
        n: usize,
        #[command(flatten)]
        gp: GpArgs,
        #[arg(long)]
        out: PathBuf,
    },
    /// Measure a stub, or every stub in a directory, on fresh samples.
    Eval {
        #[arg(long, conflicts_with = "stub_dir", required_unless_present = "stub_dir")]
        stub: Option<PathBuf>,
        #[arg(long)]
        stub_dir: Option<PathBuf>,
        /// Defaults to the function named in the stub file.
        #[arg(long)]
        oracle: Option<String>,
        #[arg(long, default_value_t = 100_000)]
        n: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Solver round trip over benchmark cases.
    Bench {
        #[arg(long, conflicts_with = "stub_dir", required_unless_present = "stub_dir")]
        stub: Option<PathBuf>,
        #[arg(long)]
        stub_dir: Option<PathBuf>,
        /// Skip stubs whose accuracy report (in `--reports-dir`) is at or below this rate.
        #[arg(long, requires = "reports_dir")]
        min_accuracy: Option<f64>,
        #[arg(long)]
        reports_dir: Option<PathBuf>,
        /// Solver command; `{file}` stands for the script path.
        #[arg(long, env = SOLVER_ENV, default_value = "z3")]
        solver: String,
        /// Per-case timeout in seconds.
        #[arg(long, default_value_t = 1.0)]
        timeout: f64,
        #[arg(long, default_value = "bvfp")]
        mode: TheoryMode,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Output directory for cases and reports.
        #[arg(long)]
        out: PathBuf,
    },
    /// Evolve and measure stubs for the whole usable corpus.
    Corpus {
        /// Restrict to these functions.
        #[arg(long = "oracle")]
        oracles: Vec<String>,
        #[arg(long, default_value_t = 5)]
        seeds: u64,
        #[arg(long, default_value_t = 256)]
        train_rows: usize,
        #[arg(long, default_value_t = 100_000)]
        eval_samples: usize,
        #[command(flatten)]
        gp: GpArgs,
        #[arg(long)]
        out: PathBuf,
    },
    /// Serve the built-in functions over the line protocol on stdin/stdout.
    Serve,
}

#[derive(Debug, Args)]
pub struct GpArgs {
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub population: Option<usize>,
    #[arg(long)]
    pub generations: Option<usize>,
    #[arg(long)]
    pub max_depth: Option<usize>,
    /// Seconds per run; 0 disables the limit.
    #[arg(long)]
    pub time_budget: Option<f64>,
    /// Select on random scores instead of fitness.
    #[arg(long)]
    pub baseline: bool,
}

impl GpArgs {
    fn config(&self) -> GpConfig {
        let d = GpConfig::default();
        GpConfig {
            seed: self.seed,
            population_size: self.population.unwrap_or(d.population_size),
            max_generations: self.generations.unwrap_or(d.max_generations),
            max_depth: self.max_depth.unwrap_or(d.max_depth),
            init_depth_range: (d.init_depth_range.0, d.init_depth_range.1.min(self.max_depth.unwrap_or(d.max_depth))),
            time_budget: match self.time_budget {
                Some(t) if t == 0.0 => None,
                Some(t) => Some(t),
                None => d.time_budget,
            },
            baseline_mode: self.baseline,
            ..d
        }
    }
}

/// Failure classes with their exit codes.
#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Environment(String),
    Internal(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Environment(_) => 2,
            CliError::Internal(_) => 3,
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Usage(m) | CliError::Environment(m) | CliError::Internal(m) => m,
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Environment(e.to_string())
    }
}

impl From<SampleError> for CliError {
    fn from(e: SampleError) -> Self {
        match e {
            SampleError::InvalidConfig(_) => CliError::Usage(e.to_string()),
            SampleError::OracleUnavailable(_) | SampleError::OracleFailure { .. } | SampleError::Io(_) => {
                CliError::Environment(e.to_string())
            }
            _ => CliError::Usage(e.to_string()),
        }
    }
}

impl From<BenchError> for CliError {
    fn from(e: BenchError) -> Self {
        match e {
            BenchError::SolverMissing(_) | BenchError::Oracle(_) | BenchError::Io(_) | BenchError::UnknownOracle(_) => {
                CliError::Environment(e.to_string())
            }
            BenchError::Sample(s) => s.into(),
            _ => CliError::Usage(e.to_string()),
        }
    }
}

impl From<PipelineError> for CliError {
    fn from(e: PipelineError) -> Self {
        match e {
            PipelineError::Sample(s) => s.into(),
            PipelineError::Bench(b) => b.into(),
            PipelineError::Io(io) => io.into(),
            PipelineError::Gp(crate::gp::GpError::InvalidConfig(m)) => CliError::Usage(m),
            PipelineError::Gp(crate::gp::GpError::EmptyDataset) | PipelineError::StubFormat(_) | PipelineError::Grammar(_) => {
                CliError::Usage(e.to_string())
            }
            other => CliError::Internal(other.to_string()),
        }
    }
}

/// Parses `args`, runs the command and returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let args: Vec<OsString> = args.into_iter().map(Into::into).collect();
    let cli = match Cli::try_parse_from(&args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    let command: Vec<String> = args.iter().map(|a| a.to_string_lossy().into_owned()).collect();
    let result = match cli.jobs {
        Some(0) => Err(CliError::Usage("--jobs must be positive".into())),
        Some(n) => match rayon::ThreadPoolBuilder::new().num_threads(n).build() {
            Ok(pool) => pool.install(|| execute(&cli, command)),
            Err(e) => Err(CliError::Internal(e.to_string())),
        },
        None => execute(&cli, command),
    };
    match result {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {}", e.message());
            e.exit_code()
        }
    }
}

struct Ctx<'a> {
    workdir: &'a Path,
    corpus: Vec<OracleSpec>,
}

impl Ctx<'_> {
    fn path(&self, p: &Path) -> PathBuf {
        self.workdir.join(p)
    }

    fn oracle(&self, name: &str) -> Result<&OracleSpec, CliError> {
        find_oracle(&self.corpus, name).ok_or_else(|| CliError::Environment(format!("unknown oracle `{name}`")))
    }
}

fn manifest_path(out: &Path) -> PathBuf {
    let mut s = out.as_os_str().to_owned();
    s.push(".manifest.json");
    PathBuf::from(s)
}

fn execute(cli: &Cli, command: Vec<String>) -> Result<(), CliError> {
    let mut corpus = usable_corpus();
    if let Some(cmd) = &cli.oracle_cmd {
        let argv: Vec<String> = cmd.split_whitespace().map(str::to_string).collect();
        let extra = ExternalProcess::spawn(&argv, DEFAULT_CALL_TIMEOUT).map_err(|e| CliError::Environment(e.to_string()))?;
        corpus.extend(extra);
    }
    let ctx = Ctx { workdir: &cli.workdir, corpus };
    match &cli.command {
        Cmd::List => {
            let mut out = std::io::stdout().lock();
            for o in &ctx.corpus {
                let rate = error_rate(o, 1000, 0x5eed).map_err(|e| CliError::Environment(e.to_string()))?;
                writeln!(out, "{}\t{}\terror_rate={rate:.3}", o.signature.header(&o.name), o.class)?;
            }
            Ok(())
        }
        Cmd::Sample { oracle, n, seed, out } => {
            let o = ctx.oracle(oracle)?;
            let cfg = SamplerConfig::with_seed(*seed);
            let ds = sample_dataset(o, *n, &cfg)?;
            write_atomic(&ctx.path(out), &ds.to_text())?;
            let mut m = RunManifest::new(command, json!({ "sampler": cfg, "n": n }));
            m.oracles.push(o.name.clone());
            m.artifacts.insert(o.name.clone(), Artifacts { dataset: Some(out.clone()), stub: None, reports: vec![] });
            m.write(&ctx.path(&manifest_path(out)))?;
            Ok(())
        }
        Cmd::Evolve { oracle, dataset, n, gp, out } => {
            let gp = gp.config();
            let (ds, sampler) = match (oracle, dataset) {
                (Some(name), _) => {
                    let cfg = SamplerConfig::with_seed(gp.seed);
                    (sample_dataset(ctx.oracle(name)?, *n, &cfg)?, Some(cfg))
                }
                (None, Some(path)) => {
                    let file = std::fs::File::open(ctx.path(path))?;
                    (Dataset::read_from(std::io::BufReader::new(file))?, None)
                }
                (None, None) => return Err(CliError::Usage("give --oracle or --dataset".into())),
            };
            let (stub, run) = evolve_stub(&ds, &gp)?;
            write_atomic(&ctx.path(out), &stub.to_json())?;
            let mut log = out.as_os_str().to_owned();
            log.push(".log");
            let log = PathBuf::from(log);
            write_atomic(&ctx.path(&log), &run.log_lines())?;
            let mut m = RunManifest::new(command, json!({ "gp": gp, "sampler": sampler, "n": n }));
            m.oracles.push(ds.name.clone());
            m.artifacts.insert(
                ds.name.clone(),
                Artifacts { dataset: dataset.clone(), stub: Some(out.clone()), reports: vec![log] },
            );
            m.write(&ctx.path(&manifest_path(out)))?;
            println!("{}\t{}\tfitness={}", ds.name, stub.tree, stub.score.value);
            Ok(())
        }
        Cmd::Eval { stub, stub_dir, oracle, n, seed, out } => {
            let stubs = match (stub, stub_dir) {
                (Some(p), _) => vec![(p.clone(), StubFile::read(&ctx.path(p))?)],
                (None, Some(dir)) => read_stub_dir(&ctx.path(dir))?,
                (None, None) => return Err(CliError::Usage("give --stub or --stub-dir".into())),
            };
            let mut m = RunManifest::new(command, json!({ "n": n, "seed": seed }));
            let mut reports = Vec::new();
            for (path, s) in &stubs {
                let name = oracle.as_deref().unwrap_or(&s.oracle);
                let o = ctx.oracle(name)?;
                let report = measure_accuracy(&s.parse_tree()?, o, *n, *seed)?;
                m.oracles.push(o.name.clone());
                m.artifacts.insert(o.name.clone(), Artifacts { dataset: None, stub: Some(path.clone()), reports: vec![out.clone()] });
                reports.push(report);
            }
            if stub.is_some() {
                let text = serde_json::to_string_pretty(&reports[0]).expect("plain data") + "\n";
                write_atomic(&ctx.path(out), &text)?;
            } else {
                let dir = ctx.path(out);
                let rates: Vec<f64> = reports.iter().map(|r| r.exact_match_rate).collect();
                write_atomic(&dir.join("accuracy.json"), &(serde_json::to_string_pretty(&reports).expect("plain data") + "\n"))?;
                write_atomic(&dir.join("histogram.csv"), &histogram_csv(&decile_histogram(&rates)))?;
            }
            m.write(&ctx.path(&manifest_path(out)))?;
            Ok(())
        }
        Cmd::Bench { stub, stub_dir, min_accuracy, reports_dir, solver, timeout, mode, seed, out } => {
            if !(*timeout > 0.0) {
                return Err(CliError::Usage("--timeout must be positive".into()));
            }
            let solver = SolverCommand::parse(solver);
            if !solver.is_available() {
                return Err(BenchError::SolverMissing(solver.argv.join(" ")).into());
            }
            let mut stubs = match (stub, stub_dir) {
                (Some(p), _) => vec![(p.clone(), StubFile::read(&ctx.path(p))?)],
                (None, Some(dir)) => read_stub_dir(&ctx.path(dir))?,
                (None, None) => return Err(CliError::Usage("give --stub or --stub-dir".into())),
            };
            if let (Some(min), Some(dir)) = (min_accuracy, reports_dir) {
                let mut kept = Vec::new();
                for (p, s) in stubs {
                    let path = ctx.path(dir).join(format!("{}.accuracy.json", s.oracle));
                    let report: crate::bench::AccuracyReport = serde_json::from_str(&std::fs::read_to_string(&path)?)
                        .map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
                    if report.exact_match_rate > *min {
                        kept.push((p, s));
                    }
                }
                stubs = kept;
            }
            let out_dir = ctx.path(out);
            let mut loaded = Vec::new();
            for (_, s) in &stubs {
                let o = ctx.oracle(&s.oracle)?;
                let tree = s.parse_tree()?;
                let cases = match generate_cases(o, CASES_PER_ORACLE, *seed) {
                    Ok(c) => c,
                    Err(BenchError::ConstantFunction(_)) => continue,
                    Err(e) => return Err(e.into()),
                };
                let file = out_dir.join("cases").join(format!("{}.cases", o.name));
                write_atomic(&file, &write_cases(&cases))?;
                let cases = read_cases(&std::fs::read_to_string(&file)?, &ctx.corpus)?;
                loaded.push((o, tree, cases));
            }
            let entries: Vec<SuiteEntry<'_>> = loaded
                .iter()
                .map(|(o, tree, cases)| SuiteEntry { oracle: o, stub: tree, cases })
                .collect();
            let report = run_suite(&entries, &solver, Duration::from_secs_f64(*timeout), *mode)?;
            write_atomic(&out_dir.join("suite.txt"), &report.to_text())?;
            write_atomic(&out_dir.join("suite.csv"), &report.to_csv())?;
            write_atomic(&out_dir.join("suite.json"), &(serde_json::to_string_pretty(&report).expect("plain data") + "\n"))?;
            let mut m = RunManifest::new(
                command,
                json!({ "solver": solver, "timeout": timeout, "mode": mode, "seed": seed, "min_accuracy": min_accuracy }),
            );
            for (path, s) in &stubs {
                m.oracles.push(s.oracle.clone());
                m.artifacts.insert(
                    s.oracle.clone(),
                    Artifacts {
                        dataset: None,
                        stub: Some(path.clone()),
                        reports: vec![out.join("cases").join(format!("{}.cases", s.oracle)), out.join("suite.txt")],
                    },
                );
            }
            m.write(&out_dir.join("manifest.json"))?;
            println!("solved {}/{} mean {:.4}s max {:.4}s", report.solved, report.total_cases, report.mean_solve_time, report.max_solve_time);
            Ok(())
        }
        Cmd::Corpus { oracles, seeds, train_rows, eval_samples, gp, out } => {
            let selected: Vec<OracleSpec> = if oracles.is_empty() {
                ctx.corpus.clone()
            } else {
                oracles.iter().map(|n| ctx.oracle(n).cloned()).collect::<Result<_, _>>()?
            };
            if *seeds == 0 {
                return Err(CliError::Usage("--seeds must be positive".into()));
            }
            let cfg = CorpusConfig {
                master_seed: gp.seed,
                seeds_per_oracle: *seeds,
                train_rows: *train_rows,
                eval_samples: *eval_samples,
                sampler: SamplerConfig::default(),
                gp: gp.config(),
            };
            let runs = run_corpus(&selected, &cfg)?;
            let dir = ctx.path(out);
            let artifacts = write_corpus_artifacts(&dir, &runs)?;
            let mut m = RunManifest::new(command, json!({ "corpus": cfg }));
            m.oracles = selected.iter().map(|o| o.name.clone()).collect();
            m.artifacts = artifacts;
            m.write(&dir.join("manifest.json"))?;
            let above = runs.iter().filter(|r| r.accuracy.exact_match_rate > 0.9).count();
            println!("{above}/{} stubs above 0.9 exact-match rate", runs.len());
            Ok(())
        }
        Cmd::Serve => {
            let stdin = std::io::stdin();
            serve(&ctx.corpus, stdin.lock(), std::io::stdout().lock())?;
            Ok(())
        }
    }
}

fn read_stub_dir(dir: &Path) -> Result<Vec<(PathBuf, StubFile)>, CliError> {
    let mut paths: Vec<PathBuf> = std::fs::read_dir(dir)?
        .map(|e| e.map(|e| e.path()))
        .collect::<Result<_, _>>()?;
    paths.retain(|p| {
        let name = p.file_name().map(|n| n.to_string_lossy()).unwrap_or_default();
        name.ends_with(".json") && !name.ends_with(".manifest.json")
    });
    paths.sort();
    paths.into_iter().map(|p| Ok((p.clone(), StubFile::read(&p)?))).collect()
}
