//! The evolutionary engine: ramped half-and-half initialization, tournament
//! selection, typed one-point crossover, subtree mutation and elitism, plus a
//! baseline mode that selects on random scores.

use std::time::Instant;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::eval::evaluate;
use crate::fitness::{score, FitnessError, FitnessScore};
use crate::grammar::{typed_positions, ExprTree, Grammar};
use crate::sampler::{stream_rng, Dataset, SamplerRng};
use crate::values::Signature;

#[derive(Debug, Error)]
pub enum GpError {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("empty training dataset")]
    EmptyDataset,
    #[error(transparent)]
    Fitness(#[from] FitnessError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GpConfig {
    pub population_size: usize,
    pub max_generations: usize,
    pub tournament_size: usize,
    pub crossover_probability: f64,
    pub mutation_probability: f64,
    pub elitism: usize,
    pub max_depth: usize,
    pub init_depth_range: (usize, usize),
    /// Wall-clock limit in seconds, checked between generations. `None`
    /// disables it, which makes runs fully reproducible.
    pub time_budget: Option<f64>,
    pub target_fitness: f64,
    pub seed: u64,
    pub baseline_mode: bool,
}

impl Default for GpConfig {
    fn default() -> Self {
        GpConfig {
            population_size: 512,
            max_generations: 200,
            tournament_size: 7,
            crossover_probability: 0.9,
            mutation_probability: 0.1,
            elitism: 1,
            max_depth: 8,
            init_depth_range: (2, 6),
            time_budget: Some(60.0),
            target_fitness: 0.0,
            seed: 0,
            baseline_mode: false,
        }
    }
}

impl GpConfig {
    pub fn validate(&self) -> Result<(), GpError> {
        let bad = |m: &str| Err(GpError::InvalidConfig(m.to_string()));
        if self.population_size == 0 {
            return bad("population_size must be positive");
        }
        if self.tournament_size == 0 || self.tournament_size > self.population_size {
            return bad("tournament_size must lie in 1..=population_size");
        }
        for p in [self.crossover_probability, self.mutation_probability] {
            if !(0.0..=1.0).contains(&p) {
                return bad("probabilities must lie in [0, 1]");
            }
        }
        if self.elitism >= self.population_size {
            return bad("elitism must be below population_size");
        }
        let (lo, hi) = self.init_depth_range;
        if lo == 0 || lo > hi || hi > self.max_depth {
            return bad("init_depth_range must satisfy 1 <= lo <= hi <= max_depth");
        }
        if self.time_budget.is_some_and(|t| !(t > 0.0)) {
            return bad("time_budget must be positive");
        }
        Ok(())
    }
}

/// One line of the run log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationRecord {
    pub generation: usize,
    pub best: f64,
    pub mean: f64,
    pub best_size: usize,
    pub elapsed: f64,
}

#[derive(Debug, Clone)]
pub struct RunResult {
    pub best: ExprTree,
    pub best_score: FitnessScore,
    pub generations_run: usize,
    pub evaluations: usize,
    pub wall_time: f64,
    pub history: Vec<GenerationRecord>,
}

impl RunResult {
    /// The run log as newline-delimited JSON.
    pub fn log_lines(&self) -> String {
        let mut out = String::new();
        for rec in &self.history {
            out.push_str(&serde_json::to_string(rec).expect("plain record"));
            out.push('\n');
        }
        out
    }
}

/// Ramped half-and-half: individual `i` uses grow when `i` is even and full
/// otherwise, with depths cycling through the configured range.
pub fn init_population(grammar: &Grammar, signature: &Signature, cfg: &GpConfig, rng: &mut SamplerRng) -> Vec<ExprTree> {
    let (lo, hi) = cfg.init_depth_range;
    let span = hi - lo + 1;
    (0..cfg.population_size)
        .map(|i| {
            let depth = (lo + (i / 2) % span).min(cfg.max_depth);
            let tree = if i % 2 == 0 {
                grammar.random_tree(signature.ret, depth, rng)
            } else {
                grammar.full_tree(signature.ret, depth, rng)
            };
            tree.expect("every sort has a terminal rule")
        })
        .collect()
}

/// Best of `tournament_size` uniform draws with replacement. Ties go to the
/// smaller tree, then to the earlier index.
pub fn tournament_select<R: Rng + ?Sized>(population: &[ExprTree], scores: &[f64], cfg: &GpConfig, rng: &mut R) -> usize {
    let mut best = rng.gen_range(0..population.len());
    for _ in 1..cfg.tournament_size {
        let c = rng.gen_range(0..population.len());
        if rank_key(population, scores, c) < rank_key(population, scores, best) {
            best = c;
        }
    }
    best
}

fn rank_key(population: &[ExprTree], scores: &[f64], i: usize) -> (f64, usize, usize) {
    (scores[i], population[i].size(), i)
}

/// Swaps a uniformly chosen subtree of `a` with a same-sort subtree of `b`.
/// An offspring deeper than `max_depth` is replaced by its parent.
pub fn crossover_one_point<R: Rng + ?Sized>(a: &ExprTree, b: &ExprTree, cfg: &GpConfig, rng: &mut R) -> (ExprTree, ExprTree) {
    let pos_a = rng.gen_range(0..a.size());
    let sub_a = a.subtree(pos_a).expect("position in range");
    let candidates = typed_positions(b, sub_a.sort());
    if candidates.is_empty() {
        return (a.clone(), b.clone());
    }
    let pos_b = candidates[rng.gen_range(0..candidates.len())];
    let sub_b = b.subtree(pos_b).expect("position in range");
    let child_a = a.replace(pos_a, sub_b.clone());
    let child_b = b.replace(pos_b, sub_a.clone());
    let child_a = if child_a.depth() > cfg.max_depth { a.clone() } else { child_a };
    let child_b = if child_b.depth() > cfg.max_depth { b.clone() } else { child_b };
    (child_a, child_b)
}

/// Regrows the subtree at a uniform position within the remaining depth.
pub fn mutate_subtree<R: Rng + ?Sized>(t: &ExprTree, grammar: &Grammar, cfg: &GpConfig, rng: &mut R) -> ExprTree {
    let pos = rng.gen_range(0..t.size());
    let depth = t.depth_at(pos).expect("position in range");
    let sort = t.subtree(pos).expect("position in range").sort();
    let budget = (cfg.max_depth + 1).saturating_sub(depth).max(1);
    let fresh = grammar.random_tree(sort, budget, rng).expect("every sort has a terminal rule");
    t.replace(pos, fresh)
}

/// Replaces operator applications over constants by their value, unless the
/// fold faults.
pub fn simplify(t: &ExprTree) -> ExprTree {
    match t {
        ExprTree::Apply(op, ch) => {
            let ch: Vec<ExprTree> = ch.iter().map(simplify).collect();
            let folded = ExprTree::Apply(*op, ch);
            if folded.children().iter().all(ExprTree::is_constant) {
                if let Ok(Ok(v)) = evaluate(&folded, &[]) {
                    return ExprTree::Const(v);
                }
            }
            folded
        }
        leaf => leaf.clone(),
    }
}

/// Runs the generational loop on `dataset` and returns the final
/// population's best individual by true score. Fitness evaluation uses the
/// current rayon pool; results do not depend on its size.
pub fn evolve(dataset: &Dataset, grammar: &Grammar, cfg: &GpConfig) -> Result<RunResult, GpError> {
    cfg.validate()?;
    if dataset.is_empty() {
        return Err(GpError::EmptyDataset);
    }
    let start = Instant::now();
    let mut grammar = grammar.clone();
    grammar.max_depth = cfg.max_depth;
    let mut population = init_population(&grammar, &dataset.signature, cfg, &mut stream_rng(cfg.seed, &[u64::MAX]));
    let mut best: (ExprTree, FitnessScore);
    let mut history = Vec::new();
    let mut evaluations = 0;
    let mut generation = 0;
    loop {
        let scores: Vec<FitnessScore> = population
            .par_iter()
            .map(|t| score(t, dataset))
            .collect::<Result<_, _>>()?;
        evaluations += population.len();
        let values: Vec<f64> = scores.iter().map(|s| s.value).collect();
        let gen_best = (0..population.len())
            .min_by(|&i, &j| rank_key(&population, &values, i).partial_cmp(&rank_key(&population, &values, j)).expect("scores are finite"))
            .expect("nonempty population");
        best = (population[gen_best].clone(), scores[gen_best].clone());
        history.push(GenerationRecord {
            generation,
            best: values[gen_best],
            mean: values.iter().sum::<f64>() / values.len() as f64,
            best_size: population[gen_best].size(),
            elapsed: start.elapsed().as_secs_f64(),
        });
        generation += 1;
        let best_value = values[gen_best];
        let out_of_time = cfg.time_budget.is_some_and(|t| start.elapsed().as_secs_f64() >= t);
        if best_value <= cfg.target_fitness || generation >= cfg.max_generations || out_of_time {
            break;
        }

        let selection: Vec<f64> = if cfg.baseline_mode {
            let mut rng = stream_rng(cfg.seed, &[generation as u64, u64::MAX - 1]);
            (0..population.len()).map(|_| rng.gen::<f64>()).collect()
        } else {
            values
        };
        let mut order: Vec<usize> = (0..population.len()).collect();
        order.sort_by(|&i, &j| {
            rank_key(&population, &selection, i)
                .partial_cmp(&rank_key(&population, &selection, j))
                .expect("scores are finite")
        });
        let mut next: Vec<ExprTree> = order[..cfg.elitism].iter().map(|&i| population[i].clone()).collect();
        let children: Vec<ExprTree> = (cfg.elitism..cfg.population_size)
            .into_par_iter()
            .map(|slot| {
                let mut rng = stream_rng(cfg.seed, &[generation as u64, slot as u64]);
                let p1 = tournament_select(&population, &selection, cfg, &mut rng);
                let mut child = population[p1].clone();
                if rng.gen_bool(cfg.crossover_probability) {
                    let p2 = tournament_select(&population, &selection, cfg, &mut rng);
                    child = crossover_one_point(&child, &population[p2], cfg, &mut rng).0;
                }
                if rng.gen_bool(cfg.mutation_probability) {
                    child = mutate_subtree(&child, &grammar, cfg, &mut rng);
                }
                child
            })
            .collect();
        next.extend(children);
        population = next;
    }
    let (best, best_score) = best;
    Ok(RunResult {
        best,
        best_score,
        generations_run: generation,
        evaluations,
        wall_time: start.elapsed().as_secs_f64(),
        history,
    })
}
