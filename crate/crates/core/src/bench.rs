//! Accuracy measurement on fresh samples and the solver round-trip
//! benchmark: pairs of distinct target outputs, solved for inputs through
//! the stub, then checked against the real function.

use std::fmt::Write as _;
use std::io::{Read, Write};
use std::path::Path;
use std::process::{Command, Stdio};
use std::time::{Duration, Instant};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::eval::evaluate_batch;
use crate::fitness::score_outcomes;
use crate::grammar::ExprTree;
use crate::oracles::{find_oracle, OracleError, OracleSpec};
use crate::sampler::{derive_seed, sample_dataset, sample_inputs, stream_rng, SampleError, SamplerConfig};
use crate::smtlib::{benchmark_bindings, emit_benchmark_script, emit_stub, input_names, parse_model, SmtError, TheoryMode};
use crate::values::{format_literal, parse_literal, tokenize_literals, Value};

/// Environment variable naming the default solver command.
pub const SOLVER_ENV: &str = "STUBGEN_SOLVER";
pub const DEFAULT_SOLVER: &str = "z3";
pub const CASES_PER_ORACLE: usize = 10;
pub const PAIR_BUDGET: usize = 10_000;

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("{0}: no two distinct outputs found in {PAIR_BUDGET} input pairs")]
    ConstantFunction(String),
    #[error("solver `{0}` not found")]
    SolverMissing(String),
    #[error("benchmark file line {line}: {detail}")]
    Format { line: usize, detail: String },
    #[error("stale case {oracle}#{index}: the function no longer produces the recorded targets")]
    StaleCase { oracle: String, index: usize },
    #[error("unknown function `{0}`")]
    UnknownOracle(String),
    #[error("stub returns {stub} but {oracle} returns {expected}")]
    SortMismatch { oracle: String, stub: crate::values::Sort, expected: crate::values::Sort },
    #[error(transparent)]
    Oracle(#[from] OracleError),
    #[error(transparent)]
    Sample(#[from] SampleError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Two input tuples whose outputs differ, with those outputs.
#[derive(Debug, Clone, PartialEq)]
pub struct BenchmarkCase {
    pub oracle: String,
    pub case_index: usize,
    pub inputs: (Vec<Value>, Vec<Value>),
    pub targets: (Value, Value),
}

impl BenchmarkCase {
    pub fn to_line(&self) -> String {
        let mut parts = vec![self.oracle.clone(), self.case_index.to_string()];
        parts.extend(self.inputs.0.iter().chain(&self.inputs.1).map(format_literal));
        parts.push("|".into());
        parts.push(format_literal(&self.targets.0));
        parts.push(format_literal(&self.targets.1));
        parts.join(" ")
    }
}

pub fn name_hash(name: &str) -> u64 {
    // FNV-1a
    name.bytes().fold(0xcbf2_9ce4_8422_2325, |h, b| (h ^ b as u64).wrapping_mul(0x0100_0000_01b3))
}

/// Draws input pairs until the outputs differ, `count` times.
pub fn generate_cases(oracle: &OracleSpec, count: usize, seed: u64) -> Result<Vec<BenchmarkCase>, BenchError> {
    let cfg = SamplerConfig::with_seed(seed);
    let mut cases = Vec::with_capacity(count);
    for case_index in 0..count {
        let mut rng = stream_rng(seed, &[name_hash(&oracle.name), case_index as u64]);
        let mut found = None;
        for _ in 0..PAIR_BUDGET {
            let x1 = sample_inputs(&oracle.signature, &cfg, &mut rng);
            let x2 = sample_inputs(&oracle.signature, &cfg, &mut rng);
            let o1 = match oracle.invoke(&x1) {
                Ok(v) => v,
                Err(OracleError::Failed(_)) => continue,
                Err(e) => return Err(e.into()),
            };
            let o2 = match oracle.invoke(&x2) {
                Ok(v) => v,
                Err(OracleError::Failed(_)) => continue,
                Err(e) => return Err(e.into()),
            };
            if !o1.same_class(&o2) {
                found = Some(((x1, x2), (o1, o2)));
                break;
            }
        }
        let (inputs, targets) = found.ok_or_else(|| BenchError::ConstantFunction(oracle.name.clone()))?;
        cases.push(BenchmarkCase { oracle: oracle.name.clone(), case_index, inputs, targets });
    }
    Ok(cases)
}

pub fn write_cases(cases: &[BenchmarkCase]) -> String {
    cases.iter().map(|c| c.to_line() + "\n").collect()
}

/// Parses a benchmark file and re-invokes each function on the recorded
/// inputs, rejecting cases whose targets no longer match.
pub fn read_cases(text: &str, corpus: &[OracleSpec]) -> Result<Vec<BenchmarkCase>, BenchError> {
    let mut cases = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line_no = i + 1;
        if line.trim().is_empty() {
            continue;
        }
        let fmt_err = |detail: String| BenchError::Format { line: line_no, detail };
        let tokens = tokenize_literals(line).map_err(|e| fmt_err(e.to_string()))?;
        let [name, index, rest @ ..] = tokens.as_slice() else {
            return Err(fmt_err("too few fields".into()));
        };
        let oracle = find_oracle(corpus, name).ok_or_else(|| BenchError::UnknownOracle(name.to_string()))?;
        let case_index: usize = index.parse().map_err(|_| fmt_err(format!("bad case index `{index}`")))?;
        let arity = oracle.signature.arity();
        if rest.len() != 2 * arity + 3 || rest[2 * arity] != "|" {
            return Err(fmt_err(format!("expected {} input literals, `|` and two targets", 2 * arity)));
        }
        let lits = rest
            .iter()
            .enumerate()
            .filter(|(k, _)| *k != 2 * arity)
            .map(|(_, t)| parse_literal(t))
            .collect::<Result<Vec<_>, _>>()
            .map_err(|e| fmt_err(e.to_string()))?;
        let x1 = lits[..arity].to_vec();
        let x2 = lits[arity..2 * arity].to_vec();
        let (o1, o2) = (lits[2 * arity].clone(), lits[2 * arity + 1].clone());
        let stale = || BenchError::StaleCase { oracle: oracle.name.clone(), index: case_index };
        let check = |x: &[Value], o: &Value| match oracle.invoke(x) {
            Ok(v) if v.same_class(o) => Ok(()),
            Ok(_) | Err(OracleError::Failed(_)) | Err(OracleError::BadArguments(_)) => Err(stale()),
            Err(e) => Err(BenchError::Oracle(e)),
        };
        check(&x1, &o1)?;
        check(&x2, &o2)?;
        if o1.same_class(&o2) {
            return Err(fmt_err("targets must differ".into()));
        }
        cases.push(BenchmarkCase {
            oracle: oracle.name.clone(),
            case_index,
            inputs: (x1, x2),
            targets: (o1, o2),
        });
    }
    Ok(cases)
}

// ---------------------------------------------------------------------------
// Accuracy

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AccuracyReport {
    pub oracle_name: String,
    pub samples: usize,
    pub seed: u64,
    pub exact_match_rate: f64,
    pub fitness_value: f64,
}

/// Evaluates `stub` against the function on `n` fresh inputs. Inputs on
/// which the function fails are redrawn, as in training; stub faults count
/// as mismatches and NaN payloads are not distinguished.
pub fn measure_accuracy(stub: &ExprTree, oracle: &OracleSpec, n: usize, eval_seed: u64) -> Result<AccuracyReport, BenchError> {
    if stub.sort() != oracle.signature.ret {
        return Err(BenchError::SortMismatch {
            oracle: oracle.name.clone(),
            stub: stub.sort(),
            expected: oracle.signature.ret,
        });
    }
    let ds = sample_dataset(oracle, n, &SamplerConfig::with_seed(eval_seed))?;
    let outcomes = evaluate_batch(stub, &ds).map_err(|e| std::io::Error::new(std::io::ErrorKind::InvalidInput, e.to_string()))?;
    let fitness = score_outcomes(&outcomes, &ds).expect("aligned lengths and sorts");
    Ok(AccuracyReport {
        oracle_name: oracle.name.clone(),
        samples: n,
        seed: eval_seed,
        exact_match_rate: fitness.exact_matches as f64 / n as f64,
        fitness_value: fitness.value,
    })
}

/// Counts of match rates in the deciles [0, 0.1), ..., [0.9, 1.0].
pub fn decile_histogram(rates: &[f64]) -> [usize; 10] {
    let mut h = [0; 10];
    for r in rates {
        h[((r * 10.0).floor() as usize).min(9)] += 1;
    }
    h
}

pub fn histogram_csv(h: &[usize; 10]) -> String {
    let mut out = String::from("bucket_low,bucket_high,count\n");
    for (i, c) in h.iter().enumerate() {
        let _ = writeln!(out, "{:.1},{:.1},{c}", i as f64 / 10.0, (i + 1) as f64 / 10.0);
    }
    out
}

// ---------------------------------------------------------------------------
// Solver round trip

/// A solver command line; `{file}` is replaced by the script path, or the
/// path is appended when absent.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SolverCommand {
    pub argv: Vec<String>,
}

impl SolverCommand {
    pub fn parse(template: &str) -> SolverCommand {
        SolverCommand { argv: template.split_whitespace().map(str::to_string).collect() }
    }

    /// `$STUBGEN_SOLVER`, or `z3`.
    pub fn from_env() -> SolverCommand {
        SolverCommand::parse(&std::env::var(SOLVER_ENV).unwrap_or_else(|_| DEFAULT_SOLVER.to_string()))
    }

    fn program(&self) -> &str {
        self.argv.first().map_or("", String::as_str)
    }

    /// Whether the program can be started at all.
    pub fn is_available(&self) -> bool {
        !self.argv.is_empty()
            && Command::new(self.program())
                .arg("-version")
                .stdin(Stdio::null())
                .stdout(Stdio::null())
                .stderr(Stdio::null())
                .status()
                .is_ok()
    }

    /// Runs the solver on `script`; `None` means the timeout expired.
    pub fn run(&self, script: &str, timeout: Duration) -> Result<Option<(String, Duration)>, BenchError> {
        let mut file = tempfile::Builder::new().suffix(".smt2").tempfile()?;
        file.write_all(script.as_bytes())?;
        file.flush()?;
        let path = file.path().to_string_lossy().into_owned();
        let mut args: Vec<String> = self.argv[1..].iter().map(|a| a.replace("{file}", &path)).collect();
        if !self.argv.iter().any(|a| a.contains("{file}")) {
            args.push(path);
        }
        let start = Instant::now();
        let mut child = match Command::new(self.program()).args(&args).stdout(Stdio::piped()).stderr(Stdio::null()).spawn() {
            Ok(c) => c,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => {
                return Err(BenchError::SolverMissing(self.program().to_string()))
            }
            Err(e) => return Err(e.into()),
        };
        let mut stdout = child.stdout.take().expect("piped");
        let reader = std::thread::spawn(move || {
            let mut s = String::new();
            let _ = stdout.read_to_string(&mut s);
            s
        });
        loop {
            if child.try_wait()?.is_some() {
                let elapsed = start.elapsed();
                return Ok(Some((reader.join().unwrap_or_default(), elapsed)));
            }
            if start.elapsed() >= timeout {
                let _ = child.kill();
                let _ = child.wait();
                let _ = reader.join();
                return Ok(None);
            }
            std::thread::sleep(Duration::from_micros(500));
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, PartialOrd, Ord)]
#[serde(rename_all = "snake_case")]
pub enum CaseStatus {
    Solved,
    WrongModel,
    Unsat,
    Unknown,
    Timeout,
    EmitError,
}

impl CaseStatus {
    pub const ALL: [CaseStatus; 6] = [
        CaseStatus::Solved,
        CaseStatus::WrongModel,
        CaseStatus::Unsat,
        CaseStatus::Unknown,
        CaseStatus::Timeout,
        CaseStatus::EmitError,
    ];

    pub fn name(self) -> &'static str {
        match self {
            CaseStatus::Solved => "solved",
            CaseStatus::WrongModel => "wrong_model",
            CaseStatus::Unsat => "unsat",
            CaseStatus::Unknown => "unknown",
            CaseStatus::Timeout => "timeout",
            CaseStatus::EmitError => "emit_error",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaseOutcome {
    pub oracle: String,
    pub case_index: usize,
    pub status: CaseStatus,
    /// Solver wall time in seconds (0 when nothing ran).
    pub solve_time: f64,
}

/// Emits the script for `case`, solves it and checks the model's inputs
/// against the real function.
pub fn run_case(
    case: &BenchmarkCase,
    stub: &ExprTree,
    oracle: &OracleSpec,
    solver: &SolverCommand,
    timeout: Duration,
    mode: TheoryMode,
) -> Result<CaseOutcome, BenchError> {
    let outcome = |status, solve_time| CaseOutcome {
        oracle: case.oracle.clone(),
        case_index: case.case_index,
        status,
        solve_time,
    };
    let script = emit_stub(stub, &oracle.signature, "stub", mode)
        .and_then(|s| emit_benchmark_script(&s, "stub", &oracle.signature, (&case.targets.0, &case.targets.1), mode));
    let script = match script {
        Ok(s) => s,
        Err(_) => return Ok(outcome(CaseStatus::EmitError, 0.0)),
    };
    let Some((output, elapsed)) = solver.run(&script, timeout)? else {
        return Ok(outcome(CaseStatus::Timeout, timeout.as_secs_f64()));
    };
    let t = elapsed.as_secs_f64();
    let model = match parse_model(&output, &benchmark_bindings(&oracle.signature), mode) {
        Ok(m) => m,
        Err(SmtError::SolverUnsat) => return Ok(outcome(CaseStatus::Unsat, t)),
        Err(_) => return Ok(outcome(CaseStatus::Unknown, t)),
    };
    let reproduces = |k: usize, target: &Value| {
        let args: Vec<Value> = input_names(&oracle.signature, k).iter().map(|n| model[n].clone()).collect();
        matches!(oracle.invoke(&args), Ok(v) if v.same_class(target))
    };
    let status = if reproduces(1, &case.targets.0) && reproduces(2, &case.targets.1) {
        CaseStatus::Solved
    } else {
        CaseStatus::WrongModel
    };
    Ok(outcome(status, t))
}

/// Benchmark input for one function.
pub struct SuiteEntry<'a> {
    pub oracle: &'a OracleSpec,
    pub stub: &'a ExprTree,
    pub cases: &'a [BenchmarkCase],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleSuiteResult {
    pub oracle: String,
    pub cases: usize,
    pub solved: usize,
    pub statuses: Vec<(String, usize)>,
    pub mean_solve_time: f64,
    pub max_solve_time: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteReport {
    pub mode: TheoryMode,
    pub timeout: f64,
    pub oracles: Vec<OracleSuiteResult>,
    pub outcomes: Vec<CaseOutcome>,
    pub total_cases: usize,
    pub solved: usize,
    pub mean_solve_time: f64,
    pub max_solve_time: f64,
}

fn time_stats(times: impl Iterator<Item = f64> + Clone) -> (f64, f64) {
    let n = times.clone().count();
    if n == 0 {
        return (0.0, 0.0);
    }
    (times.clone().sum::<f64>() / n as f64, times.fold(0.0, f64::max))
}

/// Runs every case on the current rayon pool; the report is ordered by
/// function and case index.
pub fn run_suite(entries: &[SuiteEntry<'_>], solver: &SolverCommand, timeout: Duration, mode: TheoryMode) -> Result<SuiteReport, BenchError> {
    if !solver.is_available() {
        return Err(BenchError::SolverMissing(solver.argv.join(" ")));
    }
    let jobs: Vec<(&SuiteEntry<'_>, &BenchmarkCase)> = entries.iter().flat_map(|e| e.cases.iter().map(move |c| (e, c))).collect();
    let outcomes: Vec<CaseOutcome> = jobs
        .par_iter()
        .map(|(e, c)| run_case(c, e.stub, e.oracle, solver, timeout, mode))
        .collect::<Result<_, _>>()?;
    let mut oracles = Vec::new();
    for e in entries {
        let mine: Vec<&CaseOutcome> = outcomes.iter().filter(|o| o.oracle == e.oracle.name).collect();
        let ran = mine.iter().filter(|o| o.status != CaseStatus::EmitError).map(|o| o.solve_time);
        let (mean, max) = time_stats(ran);
        oracles.push(OracleSuiteResult {
            oracle: e.oracle.name.clone(),
            cases: mine.len(),
            solved: mine.iter().filter(|o| o.status == CaseStatus::Solved).count(),
            statuses: CaseStatus::ALL
                .iter()
                .map(|s| (s.name().to_string(), mine.iter().filter(|o| o.status == *s).count()))
                .collect(),
            mean_solve_time: mean,
            max_solve_time: max,
        });
    }
    let (mean, max) = time_stats(outcomes.iter().filter(|o| o.status != CaseStatus::EmitError).map(|o| o.solve_time));
    Ok(SuiteReport {
        mode,
        timeout: timeout.as_secs_f64(),
        total_cases: outcomes.len(),
        solved: outcomes.iter().filter(|o| o.status == CaseStatus::Solved).count(),
        oracles,
        outcomes,
        mean_solve_time: mean,
        max_solve_time: max,
    })
}

impl SuiteReport {
    /// Key/value sections, one per function.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "[suite]");
        let _ = writeln!(out, "mode = {}", self.mode);
        let _ = writeln!(out, "timeout = {}", self.timeout);
        let _ = writeln!(out, "cases = {}", self.total_cases);
        let _ = writeln!(out, "solved = {}", self.solved);
        let _ = writeln!(out, "mean_solve_time = {:.4}", self.mean_solve_time);
        let _ = writeln!(out, "max_solve_time = {:.4}", self.max_solve_time);
        for o in &self.oracles {
            let _ = writeln!(out, "\n[{}]", o.oracle);
            let _ = writeln!(out, "cases = {}", o.cases);
            for (s, n) in &o.statuses {
                let _ = writeln!(out, "{s} = {n}");
            }
            let _ = writeln!(out, "mean_solve_time = {:.4}", o.mean_solve_time);
            let _ = writeln!(out, "max_solve_time = {:.4}", o.max_solve_time);
        }
        out
    }

    /// One row per function with solved counts in 0 to 10.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("oracle,cases,solved,mean_solve_time,max_solve_time\n");
        for o in &self.oracles {
            let _ = writeln!(out, "{},{},{},{:.4},{:.4}", o.oracle, o.cases, o.solved, o.mean_solve_time, o.max_solve_time);
        }
        out
    }
}

/// Seed for evaluation samples, disjoint from training streams by
/// construction.
pub fn eval_seed(training_seed: u64) -> u64 {
    derive_seed(training_seed, &[0xe7a1])
}

/// Writes `text` to `path` through a temporary sibling so a failure never
/// leaves a truncated file behind.
pub fn write_atomic(path: &Path, text: &str) -> std::io::Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    std::fs::create_dir_all(dir)?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(text.as_bytes())?;
    tmp.persist(path).map_err(|e| e.error)?;
    Ok(())
}
