//! Evolutionary symbolic regression over expression trees.
//!
//! A generational loop with tournament selection evolves formulas against
//! mean-squared-error fitness; every generation feeds a Pareto archive
//! holding the non-dominated (complexity, training MSE) front. Runs are
//! fully deterministic in the seed: variation draws from one sequential
//! RNG stream, and fitness evaluation is pure, so parallel evaluation is
//! bit-identical to sequential.

use crate::expr::{crossover, mutate, random_tree, CompiledExpr, Expr, FunctionSet, MutationWeights};
use crate::metrics::r_squared;
use crate::weather::FeatureVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use std::cmp::Ordering;
use std::collections::BTreeMap;

/// Fitness assigned when any training-row evaluation is non-finite.
pub const WORST_MSE: f64 = f64::INFINITY;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum GpError {
    #[error("training set is empty")]
    EmptyTrainingSet,
    #[error("validation set is empty")]
    EmptyValidation,
    #[error("cannot split {n} rows with fraction {fraction}")]
    BadSplit { n: usize, fraction: f64 },
    #[error("bad GP config: {0}")]
    BadConfig(String),
    #[error("archive line {line}: {message}")]
    ArchiveFormat { line: usize, message: String },
}

/// One evolved candidate: its tree, training MSE, weighted complexity, and
/// a creation index used as the final deterministic tie-breaker.
#[derive(Debug, Clone, PartialEq)]
pub struct Individual {
    pub tree: Expr,
    pub mse: f64,
    pub complexity: u32,
    pub creation_index: u64,
}

impl Individual {
    /// Selection order: lower MSE, then lower complexity, then earlier
    /// creation.
    fn rank(&self, other: &Individual) -> Ordering {
        self.mse
            .total_cmp(&other.mse)
            .then(self.complexity.cmp(&other.complexity))
            .then(self.creation_index.cmp(&other.creation_index))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GpConfig {
    pub population_size: usize,
    pub generations: usize,
    pub tournament_size: usize,
    pub crossover_prob: f64,
    pub mutation_prob: f64,
    pub reproduction_prob: f64,
    pub depth_max: usize,
    pub elitism_count: usize,
    pub split_fraction: f64,
    pub seed: u64,
    pub init_depth_min: usize,
    pub init_depth_max: usize,
    pub mutation_weights: MutationWeights,
    /// Stop early once the best training MSE reaches this value.
    pub target_mse: Option<f64>,
    /// Per generation, this many archive members (lowest complexity first)
    /// each parent one mutated child. Keeps the simple end of the front
    /// under refinement pressure; a pure-MSE tournament would otherwise
    /// never touch it again.
    pub archive_refinement: usize,
}

impl Default for GpConfig {
    fn default() -> Self {
        GpConfig {
            population_size: 500,
            generations: 5000,
            tournament_size: 5,
            crossover_prob: 0.8,
            mutation_prob: 0.15,
            reproduction_prob: 0.05,
            depth_max: 12,
            elitism_count: 1,
            split_fraction: 0.9,
            seed: 0,
            init_depth_min: 1,
            init_depth_max: 6,
            mutation_weights: MutationWeights::default(),
            target_mse: None,
            archive_refinement: 50,
        }
    }
}

impl GpConfig {
    pub fn validate(&self) -> Result<(), GpError> {
        let sum = self.crossover_prob + self.mutation_prob + self.reproduction_prob;
        if (sum - 1.0).abs() > 1e-9 {
            return Err(GpError::BadConfig(format!(
                "crossover + mutation + reproduction must sum to 1, got {sum}"
            )));
        }
        if self.crossover_prob < 0.0 || self.mutation_prob < 0.0 || self.reproduction_prob < 0.0 {
            return Err(GpError::BadConfig("probabilities must be non-negative".into()));
        }
        if !(self.split_fraction > 0.0 && self.split_fraction < 1.0) {
            return Err(GpError::BadConfig(format!(
                "split_fraction must be in (0, 1), got {}",
                self.split_fraction
            )));
        }
        if self.population_size < 2 {
            return Err(GpError::BadConfig("population_size must be at least 2".into()));
        }
        if self.tournament_size == 0 {
            return Err(GpError::BadConfig("tournament_size must be at least 1".into()));
        }
        if self.elitism_count >= self.population_size {
            return Err(GpError::BadConfig(
                "elitism_count must be smaller than the population".into(),
            ));
        }
        if self.elitism_count + self.archive_refinement >= self.population_size {
            return Err(GpError::BadConfig(
                "elitism_count + archive_refinement must leave room for offspring".into(),
            ));
        }
        if self.init_depth_min == 0
            || self.init_depth_min > self.init_depth_max
            || self.init_depth_max > self.depth_max
        {
            return Err(GpError::BadConfig(format!(
                "bad depth bounds: init [{}, {}], max {}",
                self.init_depth_min, self.init_depth_max, self.depth_max
            )));
        }
        Ok(())
    }
}

/// Training MSE of a tree over rows; `WORST_MSE` as soon as any row
/// evaluates non-finite.
pub fn fitness(tree: &Expr, rows: &[FeatureVector]) -> Result<f64, GpError> {
    if rows.is_empty() {
        return Err(GpError::EmptyTrainingSet);
    }
    let xs: Vec<[f64; 8]> = rows.iter().map(|r| r.inputs()).collect();
    let targets: Vec<f64> = rows.iter().map(|r| r.mstny).collect();
    Ok(fitness_precomputed(tree, &xs, &targets))
}

fn fitness_precomputed(tree: &Expr, xs: &[[f64; 8]], targets: &[f64]) -> f64 {
    FITNESS_SCRATCH.with(|cell| {
        let (scratch, out) = &mut *cell.borrow_mut();
        CompiledExpr::new(tree).evaluate_rows(xs, scratch, out);
        let mut sum = 0.0;
        for (y, t) in out.iter().zip(targets) {
            if !y.is_finite() {
                return WORST_MSE;
            }
            let e = y - t;
            sum += e * e;
        }
        let mse = sum / xs.len() as f64;
        if mse.is_finite() {
            mse
        } else {
            WORST_MSE
        }
    })
}

thread_local! {
    #[allow(clippy::type_complexity)]
    static FITNESS_SCRATCH: std::cell::RefCell<(Vec<Vec<f64>>, Vec<f64>)> =
        std::cell::RefCell::new((Vec::new(), Vec::new()));
}

/// Random 90/10-style partition without replacement: the training side gets
/// `ceil(fraction * n)` rows, the validation side the rest. Deterministic
/// in the seed.
pub fn split_train_validation(
    rows: &[FeatureVector],
    fraction: f64,
    seed: u64,
) -> Result<(Vec<FeatureVector>, Vec<FeatureVector>), GpError> {
    let n = rows.len();
    if n < 2 || !(fraction > 0.0 && fraction < 1.0) {
        return Err(GpError::BadSplit { n, fraction });
    }
    let mut indices: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    use rand::seq::SliceRandom;
    indices.shuffle(&mut rng);
    let train_size = (fraction * n as f64).ceil() as usize;
    let train = indices[..train_size].iter().map(|&i| rows[i].clone()).collect();
    let validation = indices[train_size..].iter().map(|&i| rows[i].clone()).collect();
    Ok((train, validation))
}

/// The non-dominated (complexity, training MSE) front, keyed by complexity.
/// Along ascending complexity the MSE is strictly decreasing.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ParetoArchive {
    members: BTreeMap<u32, Individual>,
}

impl ParetoArchive {
    pub fn new() -> ParetoArchive {
        ParetoArchive::default()
    }

    /// Insert a candidate unless some member dominates it (no worse in both
    /// MSE and complexity, strictly better in one; exact duplicates keep the
    /// incumbent). Inserting evicts every member the candidate dominates.
    pub fn update(&mut self, candidate: &Individual) -> bool {
        let dominated = self
            .members
            .range(..=candidate.complexity)
            .any(|(_, m)| m.mse <= candidate.mse);
        if dominated {
            return false;
        }
        let evict: Vec<u32> = self
            .members
            .range(candidate.complexity..)
            .filter(|(_, m)| m.mse >= candidate.mse)
            .map(|(c, _)| *c)
            .collect();
        for c in evict {
            self.members.remove(&c);
        }
        self.members.insert(candidate.complexity, candidate.clone());
        true
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    /// Members in ascending complexity order.
    pub fn members(&self) -> impl Iterator<Item = &Individual> {
        self.members.values()
    }

    /// Strictly increasing complexity with strictly decreasing MSE.
    pub fn invariant_holds(&self) -> bool {
        self.members
            .values()
            .zip(self.members.values().skip(1))
            .all(|(a, b)| a.complexity < b.complexity && a.mse > b.mse)
    }
}

/// Per-generation progress: best training MSE in the population and the
/// current archive size.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Progress {
    pub generation: usize,
    pub best_mse: f64,
    pub archive_size: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvolveOutcome {
    pub archive: ParetoArchive,
    pub generations_run: usize,
    pub best: Individual,
}

fn tournament<'a, R: Rng>(
    population: &'a [Individual],
    size: usize,
    rng: &mut R,
) -> &'a Individual {
    let mut best = &population[rng.gen_range(0..population.len())];
    for _ in 1..size {
        let contender = &population[rng.gen_range(0..population.len())];
        if contender.rank(best) == Ordering::Less {
            best = contender;
        }
    }
    best
}

/// Run the generational loop. Offspring come from crossover, mutation, or
/// reproduction per the configured probabilities, parents from tournaments
/// ranked by MSE (complexity, then creation order as tie-breakers), and the
/// best individual is carried over unchanged. The archive absorbs every
/// generation. Deterministic in `config.seed`.
pub fn evolve(
    config: &GpConfig,
    train: &[FeatureVector],
    fs: &FunctionSet,
    mut progress: impl FnMut(Progress),
) -> Result<EvolveOutcome, GpError> {
    config.validate()?;
    if train.is_empty() {
        return Err(GpError::EmptyTrainingSet);
    }
    let xs: Vec<[f64; 8]> = train.iter().map(|r| r.inputs()).collect();
    let targets: Vec<f64> = train.iter().map(|r| r.mstny).collect();

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut next_creation: u64 = 0;
    let assign = |trees: Vec<Expr>, counter: &mut u64| -> Vec<Individual> {
        let mses: Vec<f64> = trees
            .par_iter()
            .map(|t| fitness_precomputed(t, &xs, &targets))
            .collect();
        trees
            .into_iter()
            .zip(mses)
            .map(|(tree, mse)| {
                let complexity = tree.complexity();
                let ind = Individual {
                    tree,
                    mse,
                    complexity,
                    creation_index: *counter,
                };
                *counter += 1;
                ind
            })
            .collect()
    };

    let init_trees: Vec<Expr> = (0..config.population_size)
        .map(|_| random_tree(fs, config.init_depth_min, config.init_depth_max, &mut rng))
        .collect();
    let mut population = assign(init_trees, &mut next_creation);

    let mut archive = ParetoArchive::new();
    for ind in &population {
        archive.update(ind);
    }
    let best_of = |pop: &[Individual]| -> Individual {
        pop.iter()
            .min_by(|a, b| a.rank(b))
            .expect("population is never empty")
            .clone()
    };
    let mut best = best_of(&population);
    progress(Progress {
        generation: 0,
        best_mse: best.mse,
        archive_size: archive.len(),
    });

    let mut generations_run = 0;
    for generation in 1..=config.generations {
        if config.target_mse.is_some_and(|t| best.mse <= t) {
            break;
        }
        let mut elites: Vec<Individual> = population.clone();
        elites.sort_by(|a, b| a.rank(b));
        elites.truncate(config.elitism_count);

        let mut offspring: Vec<Expr> = elites.iter().map(|e| e.tree.clone()).collect();
        for member in archive.members().take(config.archive_refinement) {
            offspring.push(mutate(
                &member.tree,
                fs,
                &config.mutation_weights,
                config.depth_max,
                &mut rng,
            ));
        }
        while offspring.len() < config.population_size {
            let r = rng.gen::<f64>();
            let child = if r < config.crossover_prob {
                let a = tournament(&population, config.tournament_size, &mut rng);
                let b = tournament(&population, config.tournament_size, &mut rng);
                crossover(&a.tree, &b.tree, config.depth_max, &mut rng)
            } else if r < config.crossover_prob + config.mutation_prob {
                let a = tournament(&population, config.tournament_size, &mut rng);
                mutate(
                    &a.tree,
                    fs,
                    &config.mutation_weights,
                    config.depth_max,
                    &mut rng,
                )
            } else {
                tournament(&population, config.tournament_size, &mut rng)
                    .tree
                    .clone()
            };
            offspring.push(child);
        }

        population = assign(offspring, &mut next_creation);
        for ind in &population {
            archive.update(ind);
        }
        let gen_best = best_of(&population);
        if gen_best.rank(&best) == Ordering::Less {
            best = gen_best;
        }
        generations_run = generation;
        progress(Progress {
            generation,
            best_mse: best.mse,
            archive_size: archive.len(),
        });
    }

    Ok(EvolveOutcome {
        archive,
        generations_run,
        best,
    })
}

/// One archive member scored against held-out rows.
#[derive(Debug, Clone, PartialEq)]
pub struct SolutionReport {
    pub complexity: u32,
    pub train_mse: f64,
    pub validation_mse: f64,
    pub r_squared: f64,
    pub formula: String,
}

/// Score every archive member on the validation rows. A member that goes
/// non-finite on validation gets `WORST_MSE` and a NaN determination.
pub fn evaluate_archive(
    archive: &ParetoArchive,
    validation: &[FeatureVector],
) -> Result<Vec<SolutionReport>, GpError> {
    if validation.is_empty() {
        return Err(GpError::EmptyValidation);
    }
    let actual: Vec<f64> = validation.iter().map(|r| r.mstny).collect();
    let mut out = Vec::with_capacity(archive.len());
    for member in archive.members() {
        let pred: Vec<f64> = validation
            .iter()
            .map(|r| {
                member
                    .tree
                    .evaluate(&r.inputs())
                    .expect("feature rows carry all variables")
            })
            .collect();
        let finite = pred.iter().all(|p| p.is_finite());
        let (validation_mse, r2) = if finite {
            let mse = pred
                .iter()
                .zip(&actual)
                .map(|(p, a)| (p - a) * (p - a))
                .sum::<f64>()
                / pred.len() as f64;
            let r2 = r_squared(&pred, &actual).unwrap_or(f64::NAN);
            (mse, r2)
        } else {
            (WORST_MSE, f64::NAN)
        };
        out.push(SolutionReport {
            complexity: member.complexity,
            train_mse: member.mse,
            validation_mse,
            r_squared: r2,
            formula: member.tree.to_string(),
        });
    }
    Ok(out)
}

/// Archive export: one member per line,
/// `complexity<TAB>train_mse<TAB>validation_mse<TAB>r2<TAB>formula`.
pub fn write_archive_tsv(reports: &[SolutionReport], comment: Option<&str>) -> String {
    let mut out = String::new();
    if let Some(c) = comment {
        for line in c.lines() {
            out.push_str("# ");
            out.push_str(line);
            out.push('\n');
        }
    }
    out.push_str("complexity\ttrain_mse\tvalidation_mse\tr2\tformula\n");
    for r in reports {
        out.push_str(&format!(
            "{}\t{}\t{}\t{}\t{}\n",
            r.complexity, r.train_mse, r.validation_mse, r.r_squared, r.formula
        ));
    }
    out
}

/// Read an archive export back.
pub fn parse_archive_tsv(text: &str) -> Result<Vec<SolutionReport>, GpError> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l))
        .filter(|(_, l)| !l.trim().is_empty() && !l.trim_start().starts_with('#'));
    let fail = |line: usize, message: String| GpError::ArchiveFormat { line, message };
    match lines.next() {
        Some((_, h)) if h.trim() == "complexity\ttrain_mse\tvalidation_mse\tr2\tformula" => {}
        Some((line, h)) => return Err(fail(line, format!("unexpected header `{h}`"))),
        None => return Err(fail(1, "empty archive".into())),
    }
    let mut out = Vec::new();
    for (line_no, line) in lines {
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != 5 {
            return Err(fail(line_no, format!("expected 5 fields, found {}", fields.len())));
        }
        let num = |s: &str, what: &str| -> Result<f64, GpError> {
            s.parse::<f64>()
                .map_err(|_| fail(line_no, format!("invalid {what} `{s}`")))
        };
        out.push(SolutionReport {
            complexity: fields[0]
                .parse::<u32>()
                .map_err(|_| fail(line_no, format!("invalid complexity `{}`", fields[0])))?,
            train_mse: num(fields[1], "train_mse")?,
            validation_mse: num(fields[2], "validation_mse")?,
            r_squared: num(fields[3], "r2")?,
            formula: fields[4].to_string(),
        });
    }
    Ok(out)
}
