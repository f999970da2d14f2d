//! Layered run configuration: compiled-in defaults, overridden by an
//! optional TOML config file, overridden by command-line flags.

use seasoncast_core::gp::GpConfig;
use seasoncast_core::mlp::{SizeSearchConfig, TrainConfig};
use serde::Deserialize;
use std::path::Path;

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub seed: Option<u64>,
    #[serde(default)]
    pub features: FeaturesSection,
    #[serde(default)]
    pub gp: GpSection,
    #[serde(default)]
    pub mlp: MlpSection,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FeaturesSection {
    pub min_coverage: Option<f64>,
    pub rainy_threshold_mm: Option<f64>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GpSection {
    pub population_size: Option<usize>,
    pub generations: Option<usize>,
    pub tournament_size: Option<usize>,
    pub crossover_prob: Option<f64>,
    pub mutation_prob: Option<f64>,
    pub reproduction_prob: Option<f64>,
    pub depth_max: Option<usize>,
    pub elitism_count: Option<usize>,
    pub split_fraction: Option<f64>,
    pub init_depth_min: Option<usize>,
    pub init_depth_max: Option<usize>,
    pub archive_refinement: Option<usize>,
    pub target_mse: Option<f64>,
    pub enable_gaussian: Option<bool>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MlpSection {
    pub learning_rate: Option<f64>,
    pub momentum: Option<f64>,
    pub epochs: Option<usize>,
    pub init_range: Option<f64>,
    pub k: Option<usize>,
    pub hidden: Option<usize>,
    pub grow_threshold_pct: Option<f64>,
    pub prune_margin_pct: Option<f64>,
}

impl FileConfig {
    pub fn load(path: &Path) -> Result<FileConfig, String> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| format!("cannot read config {}: {e}", path.display()))?;
        toml::from_str(&text).map_err(|e| format!("config {}: {e}", path.display()))
    }
}

/// `flag` beats `file` beats `default`.
pub fn resolve<T: Copy>(flag: Option<T>, file: Option<T>, default: T) -> T {
    flag.or(file).unwrap_or(default)
}

pub fn gp_config(flags: &GpSection, file: &GpSection, seed: u64) -> GpConfig {
    let d = GpConfig::default();
    GpConfig {
        population_size: resolve(flags.population_size, file.population_size, d.population_size),
        generations: resolve(flags.generations, file.generations, d.generations),
        tournament_size: resolve(flags.tournament_size, file.tournament_size, d.tournament_size),
        crossover_prob: resolve(flags.crossover_prob, file.crossover_prob, d.crossover_prob),
        mutation_prob: resolve(flags.mutation_prob, file.mutation_prob, d.mutation_prob),
        reproduction_prob: resolve(
            flags.reproduction_prob,
            file.reproduction_prob,
            d.reproduction_prob,
        ),
        depth_max: resolve(flags.depth_max, file.depth_max, d.depth_max),
        elitism_count: resolve(flags.elitism_count, file.elitism_count, d.elitism_count),
        split_fraction: resolve(flags.split_fraction, file.split_fraction, d.split_fraction),
        seed,
        init_depth_min: resolve(flags.init_depth_min, file.init_depth_min, d.init_depth_min),
        init_depth_max: resolve(flags.init_depth_max, file.init_depth_max, d.init_depth_max),
        mutation_weights: d.mutation_weights,
        target_mse: flags.target_mse.or(file.target_mse).or(d.target_mse),
        archive_refinement: resolve(
            flags.archive_refinement,
            file.archive_refinement,
            d.archive_refinement,
        ),
    }
}

pub fn train_config(flags: &MlpSection, file: &MlpSection, seed: u64) -> TrainConfig {
    let d = TrainConfig::default();
    TrainConfig {
        learning_rate: resolve(flags.learning_rate, file.learning_rate, d.learning_rate),
        momentum: resolve(flags.momentum, file.momentum, d.momentum),
        epochs: resolve(flags.epochs, file.epochs, d.epochs),
        init_range: resolve(flags.init_range, file.init_range, d.init_range),
        seed,
    }
}

pub fn size_search_config(flags: &MlpSection, file: &MlpSection) -> SizeSearchConfig {
    let d = SizeSearchConfig::default();
    SizeSearchConfig {
        grow_threshold_pct: resolve(
            flags.grow_threshold_pct,
            file.grow_threshold_pct,
            d.grow_threshold_pct,
        ),
        prune_margin_pct: resolve(flags.prune_margin_pct, file.prune_margin_pct, d.prune_margin_pct),
        ..d
    }
}
