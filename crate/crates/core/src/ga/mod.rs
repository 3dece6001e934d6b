//! Binary-chromosome genetic algorithm over predictor subsets.
//!
//! Each generation keeps the `n_best` lowest-fitness individuals plus
//! `n_random` others as parents, pairs them up, and every pair breeds
//! `n_children` children by single-point crossover followed by per-gene
//! mutation. The next population consists of children only, so
//! `(n_best + n_random) / 2 * n_children` must equal the population size.
//! The best individual over the bred generations is tracked separately.

mod fitness;

use rand::seq::{index, SliceRandom};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::{Dataset, FoldPlan};
use crate::error::{Error, Result};
use crate::seed;

pub use fitness::{evaluate_fitness, FitnessEvaluator, FitnessModel, FitnessScore, FitnessWeights};

#[derive(Debug, Clone, PartialEq)]
pub struct Individual {
    pub bits: Vec<bool>,
    pub fitness: Option<f64>,
}

impl Individual {
    pub fn new(bits: Vec<bool>) -> Self {
        Self { bits, fitness: None }
    }

    pub fn from_bit_str(s: &str) -> Self {
        Self::new(s.chars().map(|c| c == '1').collect())
    }

    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }

    pub fn count_selected(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    pub fn selected(&self) -> Vec<usize> {
        (0..self.bits.len()).filter(|&j| self.bits[j]).collect()
    }

    pub fn bit_string(&self) -> String {
        self.bits.iter().map(|&b| if b { '1' } else { '0' }).collect()
    }

    pub fn fitness_value(&self) -> f64 {
        self.fitness.unwrap_or(f64::INFINITY)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GAConfig {
    pub population_size: usize,
    pub generations: usize,
    /// Parents taken from the top of the ranking.
    pub n_best: usize,
    /// Parents drawn uniformly from the rest.
    pub n_random: usize,
    /// Children per parent pair.
    pub n_children: usize,
    /// Per-gene flip probability.
    pub mutation_rate: f64,
    pub seed: u64,
}

impl Default for GAConfig {
    fn default() -> Self {
        Self {
            population_size: 50,
            generations: 10,
            n_best: 19,
            n_random: 1,
            n_children: 5,
            mutation_rate: 0.05,
            seed: 0,
        }
    }
}

impl GAConfig {
    pub fn validate(&self) -> Result<()> {
        let pool = self.n_best + self.n_random;
        if pool == 0 || !pool.is_multiple_of(2) {
            return Err(Error::config(format!("parent pool n_best + n_random = {pool} must be even and positive")));
        }
        if pool / 2 * self.n_children != self.population_size {
            return Err(Error::config(format!(
                "({} + {}) / 2 * {} = {} does not equal population_size {}",
                self.n_best,
                self.n_random,
                self.n_children,
                pool / 2 * self.n_children,
                self.population_size
            )));
        }
        if pool > self.population_size {
            return Err(Error::config("parent pool is larger than the population"));
        }
        if !(0.0..=1.0).contains(&self.mutation_rate) {
            return Err(Error::config("mutation_rate must lie in [0, 1]"));
        }
        if self.generations == 0 {
            return Err(Error::config("generations must be at least 1"));
        }
        Ok(())
    }
}

/// Population drawn from a fresh stream seeded with `cfg.seed`.
pub fn init_population(p: usize, cfg: &GAConfig) -> Vec<Individual> {
    init_population_with(p, cfg, &mut seed::rng(cfg.seed))
}

/// Uniform random bits; all-zero chromosomes are redrawn.
pub fn init_population_with<R: Rng>(p: usize, cfg: &GAConfig, rng: &mut R) -> Vec<Individual> {
    assert!(p >= 1, "need at least one predictor");
    (0..cfg.population_size)
        .map(|_| loop {
            let bits: Vec<bool> = (0..p).map(|_| rng.random_bool(0.5)).collect();
            if bits.iter().any(|&b| b) {
                break Individual::new(bits);
            }
        })
        .collect()
}

/// Indices of `pop` in ascending fitness order; ties keep the lower index first.
fn ranking(pop: &[Individual]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..pop.len()).collect();
    order.sort_by(|&a, &b| pop[a].fitness_value().total_cmp(&pop[b].fitness_value()));
    order
}

/// The `n_best` fittest plus `n_random` uniformly drawn from the remainder,
/// shuffled for pairing.
pub fn select_parents<R: Rng>(pop: &[Individual], cfg: &GAConfig, rng: &mut R) -> Vec<Individual> {
    let order = ranking(pop);
    let n_best = cfg.n_best.min(order.len());
    let mut pool: Vec<Individual> = order[..n_best].iter().map(|&i| pop[i].clone()).collect();
    let rest = &order[n_best..];
    let n_random = cfg.n_random.min(rest.len());
    for k in index::sample(rng, rest.len(), n_random).into_iter() {
        pool.push(pop[rest[k]].clone());
    }
    pool.shuffle(rng);
    pool
}

/// `a[..cut] ++ b[cut..]`.
pub fn crossover_at(a: &Individual, b: &Individual, cut: usize) -> Individual {
    assert_eq!(a.len(), b.len(), "parents must have equal length");
    let bits = a.bits[..cut].iter().chain(&b.bits[cut..]).copied().collect();
    Individual::new(bits)
}

/// Single-point crossover with the cut drawn from `1..P`. With one gene the
/// child copies a uniformly chosen parent.
pub fn crossover_single_point<R: Rng>(a: &Individual, b: &Individual, rng: &mut R) -> Individual {
    assert_eq!(a.len(), b.len(), "parents must have equal length");
    let p = a.len();
    if p < 2 {
        let parent = if rng.random_bool(0.5) { a } else { b };
        return Individual::new(parent.bits.clone());
    }
    crossover_at(a, b, rng.random_range(1..p))
}

pub fn mutate<R: Rng>(ind: &Individual, rate: f64, rng: &mut R) -> Individual {
    let bits = ind.bits.iter().map(|&b| b ^ rng.random_bool(rate)).collect();
    Individual::new(bits)
}

/// Breeds and evaluates the next population. All random draws happen before
/// any evaluation, so the result does not depend on the thread count.
pub fn next_generation(
    pop: &[Individual],
    evaluator: &FitnessEvaluator,
    cfg: &GAConfig,
    rng: &mut ChaCha8Rng,
) -> Vec<Individual> {
    let parents = select_parents(pop, cfg, rng);
    let mut children = Vec::with_capacity(cfg.population_size);
    for pair in parents.chunks_exact(2) {
        for _ in 0..cfg.n_children {
            let child = crossover_single_point(&pair[0], &pair[1], rng);
            children.push(mutate(&child, cfg.mutation_rate, rng));
        }
    }
    evaluator.evaluate_all(&mut children);
    children
}

/// One line of the JSON-lines GA trace. Generation 0 is the initial population.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationRecord {
    pub gen: usize,
    pub best_fitness: f64,
    pub mean_fitness: f64,
    pub best_bits: String,
}

impl GenerationRecord {
    fn of(gen: usize, pop: &[Individual]) -> Self {
        let best = &pop[ranking(pop)[0]];
        let mean = pop.iter().map(Individual::fitness_value).sum::<f64>() / pop.len() as f64;
        Self { gen, best_fitness: best.fitness_value(), mean_fitness: mean, best_bits: best.bit_string() }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GaRun {
    /// Best individual over every bred generation.
    pub best: Individual,
    /// Best fitness within each bred generation; length `cfg.generations`.
    pub history: Vec<f64>,
    /// Running best after each bred generation; non-increasing.
    pub best_so_far: Vec<f64>,
    pub trace: Vec<GenerationRecord>,
    pub population_sizes: Vec<usize>,
}

pub fn run_ga(evaluator: &FitnessEvaluator, cfg: &GAConfig) -> Result<GaRun> {
    cfg.validate()?;
    let mut rng = seed::rng(cfg.seed);
    let mut pop = init_population_with(evaluator.p(), cfg, &mut rng);
    evaluator.evaluate_all(&mut pop);

    let mut best: Option<Individual> = None;
    let mut trace = vec![GenerationRecord::of(0, &pop)];
    let mut history = Vec::with_capacity(cfg.generations);
    let mut best_so_far = Vec::with_capacity(cfg.generations);
    let mut population_sizes = vec![pop.len()];

    for gen in 1..=cfg.generations {
        pop = next_generation(&pop, evaluator, cfg, &mut rng);
        let gen_best = &pop[ranking(&pop)[0]];
        if best.as_ref().is_none_or(|b| gen_best.fitness_value() < b.fitness_value()) {
            best = Some(gen_best.clone());
        }
        history.push(gen_best.fitness_value());
        best_so_far.push(best.as_ref().map_or(f64::INFINITY, Individual::fitness_value));
        population_sizes.push(pop.len());
        trace.push(GenerationRecord::of(gen, &pop));
    }

    let best = best.expect("validated config has at least one generation");
    Ok(GaRun { best, history, best_so_far, trace, population_sizes })
}

/// Convenience wrapper building the evaluator from its parts.
pub fn run_ga_on(
    d: &Dataset,
    folds: &FoldPlan,
    weights: FitnessWeights,
    model: &FitnessModel,
    cfg: &GAConfig,
) -> Result<GaRun> {
    let evaluator = FitnessEvaluator::new(d, folds, weights, model.clone())?;
    run_ga(&evaluator, cfg)
}
