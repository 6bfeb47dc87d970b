//! Pipeline stages shared by the command line and the acceptance suite:
//! stub files, corpus runs and the run manifest.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bench::{decile_histogram, histogram_csv, measure_accuracy, name_hash, write_atomic, AccuracyReport, BenchError};
use crate::fitness::FitnessScore;
use crate::gp::{evolve, simplify, GpConfig, GpError, RunResult};
use crate::grammar::{ExprTree, Grammar, GrammarError};
use crate::oracles::{DifficultyClass, OracleSpec};
use crate::sampler::{derive_seed, sample_dataset, Dataset, SampleError, SamplerConfig};
use crate::smtlib::{emit_stub, TheoryMode};
use crate::values::Signature;

pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Sample(#[from] SampleError),
    #[error(transparent)]
    Gp(#[from] GpError),
    #[error(transparent)]
    Bench(#[from] BenchError),
    #[error("stub file: {0}")]
    StubFormat(String),
    #[error(transparent)]
    Grammar(#[from] GrammarError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// An evolved stub with its emissions. Holds nothing timing-dependent, so
/// reruns with the same seeds reproduce it byte for byte.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StubFile {
    pub oracle: String,
    pub signature: String,
    pub tree: String,
    pub score: FitnessScore,
    pub seed: u64,
    pub generations: usize,
    pub smt_bvfp: Option<String>,
    pub smt_intreal: Option<String>,
    pub emit_errors: Vec<String>,
}

impl StubFile {
    pub fn new(name: &str, signature: &Signature, tree: &ExprTree, score: FitnessScore, seed: u64, generations: usize) -> StubFile {
        let mut emit_errors = Vec::new();
        let mut emit = |mode| match emit_stub(tree, signature, &smt_name(name), mode) {
            Ok(s) => Some(s),
            Err(e) => {
                emit_errors.push(format!("{mode}: {e}"));
                None
            }
        };
        let smt_bvfp = emit(TheoryMode::BvFp);
        let smt_intreal = emit(TheoryMode::IntReal);
        StubFile {
            oracle: name.to_string(),
            signature: signature.header(name),
            tree: tree.to_string(),
            score,
            seed,
            generations,
            smt_bvfp,
            smt_intreal,
            emit_errors,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("plain data") + "\n"
    }

    pub fn from_json(text: &str) -> Result<StubFile, PipelineError> {
        serde_json::from_str(text).map_err(|e| PipelineError::StubFormat(e.to_string()))
    }

    pub fn read(path: &Path) -> Result<StubFile, PipelineError> {
        StubFile::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn signature(&self) -> Result<Signature, PipelineError> {
        Signature::parse_header(&self.signature)
            .map(|(_, s)| s)
            .map_err(|e| PipelineError::StubFormat(e.to_string()))
    }

    /// Re-parses the tree against the signature.
    pub fn parse_tree(&self) -> Result<ExprTree, PipelineError> {
        Ok(Grammar::for_signature_full(&self.signature()?).parse_tree(&self.tree)?)
    }
}

/// SMT-LIB function names cannot contain every character a function name
/// can; dots are fine, anything else unusual becomes `_`.
pub fn smt_name(name: &str) -> String {
    name.chars()
        .map(|c| if c.is_ascii_alphanumeric() || "._-".contains(c) { c } else { '_' })
        .collect()
}

/// Evolves and simplifies one stub from `dataset`.
pub fn evolve_stub(dataset: &Dataset, gp: &GpConfig) -> Result<(StubFile, RunResult), PipelineError> {
    let grammar = Grammar::for_signature(&dataset.signature);
    let run = evolve(dataset, &grammar, gp)?;
    let tree = simplify(&run.best);
    let stub = StubFile::new(&dataset.name, &dataset.signature, &tree, run.best_score, gp.seed, run.generations_run);
    Ok((stub, run))
}

/// Settings of a corpus run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusConfig {
    pub master_seed: u64,
    pub seeds_per_oracle: u64,
    pub train_rows: usize,
    pub eval_samples: usize,
    pub sampler: SamplerConfig,
    /// `seed` is overwritten per run.
    pub gp: GpConfig,
}

impl Default for CorpusConfig {
    fn default() -> Self {
        CorpusConfig {
            master_seed: 0,
            seeds_per_oracle: 5,
            train_rows: 256,
            eval_samples: 100_000,
            sampler: SamplerConfig::default(),
            gp: GpConfig::default(),
        }
    }
}

impl CorpusConfig {
    pub fn train_seed(&self, oracle: &str, k: u64) -> u64 {
        derive_seed(self.master_seed, &[name_hash(oracle), k])
    }

    pub fn gp_seed(&self, oracle: &str, k: u64) -> u64 {
        derive_seed(self.master_seed, &[name_hash(oracle), k, 1])
    }

    pub fn eval_seed(&self, oracle: &str) -> u64 {
        derive_seed(self.master_seed, &[name_hash(oracle), 0xe7a1])
    }
}

/// Outcome for one function: the best of its seeded runs by training
/// score, then size, then seed order, measured on fresh samples.
#[derive(Debug, Clone, PartialEq)]
pub struct OracleRun {
    pub oracle: String,
    pub class: DifficultyClass,
    pub stub: StubFile,
    pub seed_scores: Vec<f64>,
    pub accuracy: AccuracyReport,
}

/// Evolves `seeds_per_oracle` stubs per function, keeps the best and
/// measures it. Runs are spread over the current rayon pool; the result
/// does not depend on its size.
pub fn run_corpus(corpus: &[OracleSpec], cfg: &CorpusConfig) -> Result<Vec<OracleRun>, PipelineError> {
    let jobs: Vec<(usize, u64)> = (0..corpus.len()).flat_map(|i| (0..cfg.seeds_per_oracle).map(move |k| (i, k))).collect();
    let runs: Vec<(StubFile, usize)> = jobs
        .par_iter()
        .map(|&(i, k)| {
            let o = &corpus[i];
            let sampler = SamplerConfig { seed: cfg.train_seed(&o.name, k), ..cfg.sampler.clone() };
            let ds = sample_dataset(o, cfg.train_rows, &sampler)?;
            let gp = GpConfig { seed: cfg.gp_seed(&o.name, k), ..cfg.gp.clone() };
            let (stub, run) = evolve_stub(&ds, &gp)?;
            Ok((stub, run.best.size()))
        })
        .collect::<Result<_, PipelineError>>()?;
    let per = cfg.seeds_per_oracle as usize;
    corpus
        .par_iter()
        .enumerate()
        .map(|(i, o)| {
            let mine = &runs[i * per..(i + 1) * per];
            let (best, _) = mine
                .iter()
                .min_by(|a, b| (a.0.score.value, a.1).partial_cmp(&(b.0.score.value, b.1)).expect("finite scores"))
                .expect("at least one seed");
            let tree = best.parse_tree()?;
            let accuracy = measure_accuracy(&tree, o, cfg.eval_samples, cfg.eval_seed(&o.name))?;
            Ok(OracleRun {
                oracle: o.name.clone(),
                class: o.class,
                stub: best.clone(),
                seed_scores: mine.iter().map(|r| r.0.score.value).collect(),
                accuracy,
            })
        })
        .collect()
}

/// Fraction of runs whose exact-match rate exceeds `threshold`.
pub fn fraction_above(runs: &[OracleRun], threshold: f64) -> f64 {
    if runs.is_empty() {
        return 0.0;
    }
    runs.iter().filter(|r| r.accuracy.exact_match_rate > threshold).count() as f64 / runs.len() as f64
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Artifacts {
    pub dataset: Option<PathBuf>,
    pub stub: Option<PathBuf>,
    pub reports: Vec<PathBuf>,
}

/// Everything needed to regenerate a command's artifacts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool_version: String,
    pub command: Vec<String>,
    pub config: serde_json::Value,
    pub oracles: Vec<String>,
    pub artifacts: BTreeMap<String, Artifacts>,
}

impl RunManifest {
    pub fn new(command: Vec<String>, config: serde_json::Value) -> RunManifest {
        RunManifest {
            tool_version: TOOL_VERSION.to_string(),
            command,
            config,
            oracles: Vec::new(),
            artifacts: BTreeMap::new(),
        }
    }

    pub fn write(&self, path: &Path) -> std::io::Result<()> {
        write_atomic(path, &(serde_json::to_string_pretty(self).expect("plain data") + "\n"))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusRow {
    pub oracle: String,
    pub class: String,
    pub tree: String,
    pub training_fitness: f64,
    pub exact_match_rate: f64,
    pub fitness_value: f64,
}

/// Writes `stubs/`, `reports/` and the summary files under `dir`, returning
/// artifact paths relative to it.
pub fn write_corpus_artifacts(dir: &Path, runs: &[OracleRun]) -> std::io::Result<BTreeMap<String, Artifacts>> {
    let mut artifacts = BTreeMap::new();
    let mut csv = String::from("oracle,class,exact_match_rate,fitness_value,training_fitness\n");
    let mut rows = Vec::new();
    for r in runs {
        let stub = PathBuf::from("stubs").join(format!("{}.json", r.oracle));
        let report = PathBuf::from("reports").join(format!("{}.accuracy.json", r.oracle));
        write_atomic(&dir.join(&stub), &r.stub.to_json())?;
        write_atomic(&dir.join(&report), &(serde_json::to_string_pretty(&r.accuracy).expect("plain data") + "\n"))?;
        csv.push_str(&format!(
            "{},{},{},{},{}\n",
            r.oracle, r.class, r.accuracy.exact_match_rate, r.accuracy.fitness_value, r.stub.score.value
        ));
        rows.push(CorpusRow {
            oracle: r.oracle.clone(),
            class: r.class.to_string(),
            tree: r.stub.tree.clone(),
            training_fitness: r.stub.score.value,
            exact_match_rate: r.accuracy.exact_match_rate,
            fitness_value: r.accuracy.fitness_value,
        });
        artifacts.insert(r.oracle.clone(), Artifacts { dataset: None, stub: Some(stub), reports: vec![report] });
    }
    let rates: Vec<f64> = runs.iter().map(|r| r.accuracy.exact_match_rate).collect();
    write_atomic(&dir.join("reports/accuracy.csv"), &csv)?;
    write_atomic(&dir.join("reports/histogram.csv"), &histogram_csv(&decile_histogram(&rates)))?;
    write_atomic(&dir.join("reports/summary.json"), &(serde_json::to_string_pretty(&rows).expect("plain data") + "\n"))?;
    Ok(artifacts)
}
