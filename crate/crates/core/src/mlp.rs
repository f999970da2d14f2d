//! Feed-forward multilayer perceptron trained by per-example
//! back-propagation with a momentum term.
//!
//! Inputs and the target are min-max normalized to [0, 1] using bounds
//! fitted on the training fold only; hidden units are logistic, the output
//! unit is linear in normalized target space. Weight updates follow
//! `dw(t) = -lr * dE/dw + momentum * dw(t-1)` in a presentation order
//! reshuffled once per epoch.

use crate::metrics::percent_error;
use crate::seed::derive_seed;
use crate::weather::FeatureVector;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const NUM_INPUTS: usize = 8;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum MlpError {
    #[error("bad architecture: {0}")]
    BadArchitecture(String),
    #[error("bad training config: {0}")]
    BadConfig(String),
    #[error("dataset is empty")]
    EmptyDataset,
    #[error("dataset contains a non-finite value in row {0}")]
    NonFiniteData(usize),
    #[error("training diverged: non-finite loss after epoch {epoch} (learning rate too high?)")]
    NonFiniteLoss { epoch: usize },
    #[error("model format error: {0}")]
    Format(String),
}

/// Back-propagation hyper-parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub momentum: f64,
    pub epochs: usize,
    /// Weights start uniform in `[-init_range, init_range]`.
    pub init_range: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 0.3,
            momentum: 0.6,
            epochs: 500,
            init_range: 0.5,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), MlpError> {
        // Zero is allowed so the no-op limit stays observable.
        if !(self.learning_rate >= 0.0) {
            return Err(MlpError::BadConfig(format!(
                "learning_rate must be non-negative, got {}",
                self.learning_rate
            )));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return Err(MlpError::BadConfig(format!(
                "momentum must be in [0, 1), got {}",
                self.momentum
            )));
        }
        if self.epochs == 0 {
            return Err(MlpError::BadConfig("epochs must be at least 1".into()));
        }
        if !(self.init_range > 0.0) {
            return Err(MlpError::BadConfig(format!(
                "init_range must be positive, got {}",
                self.init_range
            )));
        }
        Ok(())
    }
}

/// Min-max normalization bounds, fitted on training rows only.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureStats {
    pub input_min: [f64; NUM_INPUTS],
    pub input_max: [f64; NUM_INPUTS],
    pub target_min: f64,
    pub target_max: f64,
}

fn scale01(x: f64, min: f64, max: f64) -> f64 {
    if max == min {
        0.5
    } else {
        ((x - min) / (max - min)).clamp(0.0, 1.0)
    }
}

impl FeatureStats {
    pub fn fit(rows: &[FeatureVector]) -> Result<FeatureStats, MlpError> {
        if rows.is_empty() {
            return Err(MlpError::EmptyDataset);
        }
        let mut input_min = [f64::INFINITY; NUM_INPUTS];
        let mut input_max = [f64::NEG_INFINITY; NUM_INPUTS];
        let mut target_min = f64::INFINITY;
        let mut target_max = f64::NEG_INFINITY;
        for (i, row) in rows.iter().enumerate() {
            let x = row.inputs();
            if x.iter().any(|v| !v.is_finite()) || !row.mstny.is_finite() {
                return Err(MlpError::NonFiniteData(i + 1));
            }
            for k in 0..NUM_INPUTS {
                input_min[k] = input_min[k].min(x[k]);
                input_max[k] = input_max[k].max(x[k]);
            }
            target_min = target_min.min(row.mstny);
            target_max = target_max.max(row.mstny);
        }
        Ok(FeatureStats {
            input_min,
            input_max,
            target_min,
            target_max,
        })
    }

    /// Encode the eight inputs to [0, 1]; the season code is scaled like
    /// any other numeric feature, out-of-range validation rows are clamped,
    /// and a feature constant in training maps to 0.5.
    pub fn encode(&self, row: &FeatureVector) -> [f64; NUM_INPUTS] {
        let raw = row.inputs();
        let mut out = [0.0; NUM_INPUTS];
        for k in 0..NUM_INPUTS {
            out[k] = scale01(raw[k], self.input_min[k], self.input_max[k]);
        }
        out
    }

    pub fn encode_target(&self, t: f64) -> f64 {
        scale01(t, self.target_min, self.target_max)
    }

    pub fn decode_target(&self, y: f64) -> f64 {
        self.target_min + y * (self.target_max - self.target_min)
    }
}

fn logistic(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

/// Per-epoch training mean squared error, in target units.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainReport {
    pub epoch_mse: Vec<f64>,
}

/// The network: layer sizes `[8, hidden.., 1]` with weight matrices, biases,
/// the previous-update momentum state, and the normalization bounds it was
/// fitted with.
#[derive(Debug, Clone, PartialEq)]
pub struct MlpNetwork {
    layer_sizes: Vec<usize>,
    /// `weights[l][j][i]`: layer `l`, output unit `j`, input `i`.
    weights: Vec<Vec<Vec<f64>>>,
    biases: Vec<Vec<f64>>,
    prev_dw: Vec<Vec<Vec<f64>>>,
    prev_db: Vec<Vec<f64>>,
    stats: FeatureStats,
}

impl MlpNetwork {
    /// Fresh network with the given hidden-layer sizes (at most two hidden
    /// layers) and uniform random weights in `[-init_range, init_range]`.
    pub fn new(
        hidden: &[usize],
        stats: FeatureStats,
        init_range: f64,
        seed: u64,
    ) -> Result<MlpNetwork, MlpError> {
        if hidden.len() > 2 {
            return Err(MlpError::BadArchitecture(format!(
                "at most 2 hidden layers are supported, got {}",
                hidden.len()
            )));
        }
        if hidden.iter().any(|h| *h == 0) {
            return Err(MlpError::BadArchitecture(
                "hidden layers must have at least one unit".into(),
            ));
        }
        if !(init_range > 0.0) {
            return Err(MlpError::BadArchitecture(format!(
                "init_range must be positive, got {init_range}"
            )));
        }
        let mut layer_sizes = vec![NUM_INPUTS];
        layer_sizes.extend_from_slice(hidden);
        layer_sizes.push(1);

        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut weights = Vec::new();
        let mut biases = Vec::new();
        for l in 1..layer_sizes.len() {
            let (n_in, n_out) = (layer_sizes[l - 1], layer_sizes[l]);
            weights.push(
                (0..n_out)
                    .map(|_| (0..n_in).map(|_| rng.gen_range(-init_range..init_range)).collect())
                    .collect(),
            );
            biases.push((0..n_out).map(|_| rng.gen_range(-init_range..init_range)).collect());
        }
        let prev_dw = weights
            .iter()
            .map(|m: &Vec<Vec<f64>>| m.iter().map(|r| vec![0.0; r.len()]).collect())
            .collect();
        let prev_db = biases.iter().map(|b: &Vec<f64>| vec![0.0; b.len()]).collect();
        Ok(MlpNetwork {
            layer_sizes,
            weights,
            biases,
            prev_dw,
            prev_db,
            stats,
        })
    }

    pub fn layer_sizes(&self) -> &[usize] {
        &self.layer_sizes
    }

    pub fn stats(&self) -> &FeatureStats {
        &self.stats
    }

    /// All layer activations for a normalized input: hidden layers logistic,
    /// output layer linear.
    fn activations(&self, x: &[f64; NUM_INPUTS]) -> Vec<Vec<f64>> {
        let mut acts: Vec<Vec<f64>> = vec![x.to_vec()];
        let last = self.weights.len() - 1;
        for (l, (w, b)) in self.weights.iter().zip(&self.biases).enumerate() {
            let prev = &acts[l];
            let layer: Vec<f64> = w
                .iter()
                .zip(b)
                .map(|(row, bias)| {
                    let z = row.iter().zip(prev).map(|(wi, ai)| wi * ai).sum::<f64>() + bias;
                    if l == last {
                        z
                    } else {
                        logistic(z)
                    }
                })
                .collect();
            acts.push(layer);
        }
        acts
    }

    fn forward_normalized(&self, x: &[f64; NUM_INPUTS]) -> f64 {
        self.activations(x).last().expect("output layer")[0]
    }

    /// Prediction in target units.
    pub fn predict(&self, row: &FeatureVector) -> f64 {
        let x = self.stats.encode(row);
        self.stats.decode_target(self.forward_normalized(&x))
    }

    /// Squared-error loss `E = (pred - target)^2 / 2` for one example, in
    /// normalized target space.
    pub fn example_loss(&self, row: &FeatureVector) -> f64 {
        let x = self.stats.encode(row);
        let t = self.stats.encode_target(row.mstny);
        let y = self.forward_normalized(&x);
        (y - t) * (y - t) / 2.0
    }

    /// Back-propagated gradient of `example_loss` with respect to every
    /// parameter, flattened in `get_param` order. Returns (loss, gradient).
    pub fn gradients(&self, row: &FeatureVector) -> (f64, Vec<f64>) {
        let x = self.stats.encode(row);
        let t = self.stats.encode_target(row.mstny);
        let (loss, dw, db) = self.backprop(&x, t);
        let mut flat = Vec::with_capacity(self.num_params());
        for (wl, bl) in dw.iter().zip(&db) {
            for row in wl {
                flat.extend_from_slice(row);
            }
            flat.extend_from_slice(bl);
        }
        (loss, flat)
    }

    #[allow(clippy::type_complexity)]
    fn backprop(
        &self,
        x: &[f64; NUM_INPUTS],
        target: f64,
    ) -> (f64, Vec<Vec<Vec<f64>>>, Vec<Vec<f64>>) {
        let acts = self.activations(x);
        let output = acts.last().expect("output layer")[0];
        let loss = (output - target) * (output - target) / 2.0;

        let layers = self.weights.len();
        let mut deltas: Vec<Vec<f64>> = vec![Vec::new(); layers];
        deltas[layers - 1] = vec![output - target]; // linear output unit
        for l in (0..layers - 1).rev() {
            let next_deltas = deltas[l + 1].clone();
            let a = &acts[l + 1];
            deltas[l] = (0..self.layer_sizes[l + 1])
                .map(|j| {
                    let upstream: f64 = self.weights[l + 1]
                        .iter()
                        .zip(&next_deltas)
                        .map(|(row, d)| row[j] * d)
                        .sum();
                    upstream * a[j] * (1.0 - a[j])
                })
                .collect();
        }

        let dw = (0..layers)
            .map(|l| {
                deltas[l]
                    .iter()
                    .map(|d| acts[l].iter().map(|a| d * a).collect())
                    .collect()
            })
            .collect();
        let db = deltas;
        (loss, dw, db)
    }

    /// Number of weights and biases.
    pub fn num_params(&self) -> usize {
        self.weights
            .iter()
            .map(|m| m.iter().map(|r| r.len()).sum::<usize>())
            .sum::<usize>()
            + self.biases.iter().map(|b| b.len()).sum::<usize>()
    }

    fn param_slot(&mut self, mut index: usize) -> &mut f64 {
        for (wl, bl) in self.weights.iter_mut().zip(&mut self.biases) {
            for row in wl.iter_mut() {
                if index < row.len() {
                    return &mut row[index];
                }
                index -= row.len();
            }
            if index < bl.len() {
                return &mut bl[index];
            }
            index -= bl.len();
        }
        panic!("parameter index out of range");
    }

    pub fn get_param(&self, index: usize) -> f64 {
        let mut i = index;
        for (wl, bl) in self.weights.iter().zip(&self.biases) {
            for row in wl {
                if i < row.len() {
                    return row[i];
                }
                i -= row.len();
            }
            if i < bl.len() {
                return bl[i];
            }
            i -= bl.len();
        }
        panic!("parameter index out of range");
    }

    pub fn set_param(&mut self, index: usize, value: f64) {
        *self.param_slot(index) = value;
    }

    /// Train in place. The presentation order is reshuffled once per epoch
    /// from the config seed; the report carries one training-MSE entry per
    /// epoch, measured after the epoch's updates in target units.
    pub fn train(
        &mut self,
        rows: &[FeatureVector],
        config: &TrainConfig,
    ) -> Result<TrainReport, MlpError> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let mut orders = Vec::with_capacity(config.epochs);
        let mut base: Vec<usize> = (0..rows.len()).collect();
        for _ in 0..config.epochs {
            base.shuffle(&mut rng);
            orders.push(base.clone());
        }
        self.train_with_orders(rows, config, &orders)
    }

    /// Training core with an explicit presentation schedule; exposed to the
    /// crate so tests can pin the example sequence.
    pub(crate) fn train_with_orders(
        &mut self,
        rows: &[FeatureVector],
        config: &TrainConfig,
        orders: &[Vec<usize>],
    ) -> Result<TrainReport, MlpError> {
        config.validate()?;
        if rows.is_empty() {
            return Err(MlpError::EmptyDataset);
        }
        let encoded: Vec<([f64; NUM_INPUTS], f64)> = rows
            .iter()
            .map(|r| (self.stats.encode(r), self.stats.encode_target(r.mstny)))
            .collect();

        let mut epoch_mse = Vec::with_capacity(orders.len());
        for (epoch, order) in orders.iter().enumerate() {
            for &idx in order {
                let (x, t) = &encoded[idx];
                let (_, dw, db) = self.backprop(x, *t);
                for l in 0..self.weights.len() {
                    for j in 0..self.weights[l].len() {
                        for i in 0..self.weights[l][j].len() {
                            let step = -config.learning_rate * dw[l][j][i]
                                + config.momentum * self.prev_dw[l][j][i];
                            self.weights[l][j][i] += step;
                            self.prev_dw[l][j][i] = step;
                        }
                        let step = -config.learning_rate * db[l][j]
                            + config.momentum * self.prev_db[l][j];
                        self.biases[l][j] += step;
                        self.prev_db[l][j] = step;
                    }
                }
            }
            let mse = rows
                .iter()
                .map(|r| {
                    let e = self.predict(r) - r.mstny;
                    e * e
                })
                .sum::<f64>()
                / rows.len() as f64;
            if !mse.is_finite() {
                return Err(MlpError::NonFiniteLoss { epoch: epoch + 1 });
            }
            epoch_mse.push(mse);
        }
        Ok(TrainReport { epoch_mse })
    }

    /// Serialize to the `mlp v1` text format: layer sizes, then per layer a
    /// row-major weight block and a bias line, then the normalization
    /// bounds, all with 17 significant digits for an exact round trip.
    pub fn save(&self) -> String {
        let fmt = |v: f64| format!("{:.16e}", v);
        let join = |vs: &[f64]| vs.iter().map(|v| fmt(*v)).collect::<Vec<_>>().join(" ");
        let mut out = String::from("mlp v1\n");
        out.push_str("layers ");
        out.push_str(
            &self
                .layer_sizes
                .iter()
                .map(|s| s.to_string())
                .collect::<Vec<_>>()
                .join(" "),
        );
        out.push('\n');
        for l in 0..self.weights.len() {
            out.push_str(&format!("weights {l}\n"));
            for row in &self.weights[l] {
                out.push_str(&join(row));
                out.push('\n');
            }
            out.push_str(&format!("biases {l}\n"));
            out.push_str(&join(&self.biases[l]));
            out.push('\n');
        }
        out.push_str("input_min ");
        out.push_str(&join(&self.stats.input_min));
        out.push('\n');
        out.push_str("input_max ");
        out.push_str(&join(&self.stats.input_max));
        out.push('\n');
        out.push_str(&format!("target_min {}\n", fmt(self.stats.target_min)));
        out.push_str(&format!("target_max {}\n", fmt(self.stats.target_max)));
        out
    }

    pub fn load(text: &str) -> Result<MlpNetwork, MlpError> {
        let fail = |m: String| MlpError::Format(m);
        let mut lines = text
            .lines()
            .map(|l| l.trim_end())
            .filter(|l| !l.trim().is_empty() && !l.trim_start().starts_with('#'));
        if lines.next().map(|l| l.trim()) != Some("mlp v1") {
            return Err(fail("expected `mlp v1` header".into()));
        }
        let parse_floats = |line: &str, what: &str| -> Result<Vec<f64>, MlpError> {
            line.split_whitespace()
                .map(|t| {
                    t.parse::<f64>()
                        .map_err(|_| fail(format!("invalid number `{t}` in {what}")))
                })
                .collect()
        };
        let sizes_line = lines.next().ok_or_else(|| fail("missing layers line".into()))?;
        let sizes_body = sizes_line
            .strip_prefix("layers ")
            .ok_or_else(|| fail(format!("expected `layers ...`, found `{sizes_line}`")))?;
        let layer_sizes: Vec<usize> = sizes_body
            .split_whitespace()
            .map(|t| t.parse::<usize>().map_err(|_| fail(format!("invalid layer size `{t}`"))))
            .collect::<Result<_, _>>()?;
        if layer_sizes.len() < 2
            || layer_sizes.len() > 4
            || layer_sizes[0] != NUM_INPUTS
            || *layer_sizes.last().expect("non-empty") != 1
            || layer_sizes.iter().any(|s| *s == 0)
        {
            return Err(fail(format!("unsupported layer sizes {layer_sizes:?}")));
        }

        let mut weights = Vec::new();
        let mut biases = Vec::new();
        for l in 1..layer_sizes.len() {
            let (n_in, n_out) = (layer_sizes[l - 1], layer_sizes[l]);
            let head = lines.next().ok_or_else(|| fail("missing weights block".into()))?;
            if head.trim() != format!("weights {}", l - 1) {
                return Err(fail(format!("expected `weights {}`, found `{head}`", l - 1)));
            }
            let mut matrix = Vec::with_capacity(n_out);
            for _ in 0..n_out {
                let row_line = lines.next().ok_or_else(|| fail("missing weight row".into()))?;
                let row = parse_floats(row_line, "weights")?;
                if row.len() != n_in {
                    return Err(fail(format!(
                        "weight row has {} values, expected {n_in}",
                        row.len()
                    )));
                }
                matrix.push(row);
            }
            weights.push(matrix);
            let head = lines.next().ok_or_else(|| fail("missing biases block".into()))?;
            if head.trim() != format!("biases {}", l - 1) {
                return Err(fail(format!("expected `biases {}`, found `{head}`", l - 1)));
            }
            let bias_line = lines.next().ok_or_else(|| fail("missing bias row".into()))?;
            let bias = parse_floats(bias_line, "biases")?;
            if bias.len() != n_out {
                return Err(fail(format!(
                    "bias row has {} values, expected {n_out}",
                    bias.len()
                )));
            }
            biases.push(bias);
        }

        let mut bound = |prefix: &str| -> Result<Vec<f64>, MlpError> {
            let line = lines
                .next()
                .ok_or_else(|| fail(format!("missing `{prefix}` line")))?;
            let body = line
                .strip_prefix(prefix)
                .ok_or_else(|| fail(format!("expected `{prefix} ...`, found `{line}`")))?;
            parse_floats(body, prefix)
        };
        let input_min_v = bound("input_min ")?;
        let input_max_v = bound("input_max ")?;
        let target_min_v = bound("target_min ")?;
        let target_max_v = bound("target_max ")?;
        if input_min_v.len() != NUM_INPUTS
            || input_max_v.len() != NUM_INPUTS
            || target_min_v.len() != 1
            || target_max_v.len() != 1
        {
            return Err(fail("normalization bounds have wrong arity".into()));
        }
        let mut input_min = [0.0; NUM_INPUTS];
        let mut input_max = [0.0; NUM_INPUTS];
        input_min.copy_from_slice(&input_min_v);
        input_max.copy_from_slice(&input_max_v);

        let prev_dw = weights
            .iter()
            .map(|m: &Vec<Vec<f64>>| m.iter().map(|r| vec![0.0; r.len()]).collect())
            .collect();
        let prev_db = biases.iter().map(|b: &Vec<f64>| vec![0.0; b.len()]).collect();
        Ok(MlpNetwork {
            layer_sizes,
            weights,
            biases,
            prev_dw,
            prev_db,
            stats: FeatureStats {
                input_min,
                input_max,
                target_min: target_min_v[0],
                target_max: target_max_v[0],
            },
        })
    }
}

/// Fit normalization stats on `rows`, initialize a fresh network, and train
/// it. Initialization and shuffling use seeds derived from `config.seed`.
pub fn fit(
    rows: &[FeatureVector],
    hidden: &[usize],
    config: &TrainConfig,
) -> Result<(MlpNetwork, TrainReport), MlpError> {
    if rows.is_empty() {
        return Err(MlpError::EmptyDataset);
    }
    let stats = FeatureStats::fit(rows)?;
    let mut net = MlpNetwork::new(hidden, stats, config.init_range, derive_seed(config.seed, 0))?;
    let mut train_cfg = config.clone();
    train_cfg.seed = derive_seed(config.seed, 1);
    let report = net.train(rows, &train_cfg)?;
    Ok((net, report))
}

/// Grow/prune search over single-hidden-layer sizes.
#[derive(Debug, Clone, PartialEq)]
pub struct SizeSearchConfig {
    /// Training percent-error above this grows the layer by one unit.
    pub grow_threshold_pct: f64,
    /// Validation percent-error exceeding training by more than this
    /// margin (in points) prunes one unit.
    pub prune_margin_pct: f64,
    pub max_steps: usize,
    pub size_min: usize,
    pub size_max: usize,
    /// Fixed starting size; `None` draws one from the seed.
    pub start_size: Option<usize>,
}

impl Default for SizeSearchConfig {
    fn default() -> Self {
        SizeSearchConfig {
            grow_threshold_pct: 12.0,
            prune_margin_pct: 5.0,
            max_steps: 10,
            size_min: 1,
            size_max: 8,
            start_size: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SizeStep {
    pub size: usize,
    pub train_pct: f64,
    pub valid_pct: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SizeSearchReport {
    /// Size with the lowest validation error among those evaluated.
    pub chosen: usize,
    pub steps: Vec<SizeStep>,
}

/// Iterative hidden-layer sizing: grow on training underfit, prune when
/// validation error runs away from training error, stop on a revisited size
/// or after `max_steps`. Returns the best validated size.
pub fn size_search(
    train_rows: &[FeatureVector],
    validation_rows: &[FeatureVector],
    config: &TrainConfig,
    search: &SizeSearchConfig,
) -> Result<SizeSearchReport, MlpError> {
    if train_rows.is_empty() || validation_rows.is_empty() {
        return Err(MlpError::EmptyDataset);
    }
    if search.size_min == 0 || search.size_min > search.size_max || search.max_steps == 0 {
        return Err(MlpError::BadConfig(format!(
            "bad size-search bounds [{}, {}] / {} steps",
            search.size_min, search.size_max, search.max_steps
        )));
    }
    let mut size = match search.start_size {
        Some(s) => s.clamp(search.size_min, search.size_max),
        None => {
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(config.seed, 101));
            rng.gen_range(search.size_min..=search.size_max)
        }
    };

    let pct = |net: &MlpNetwork, rows: &[FeatureVector]| -> Result<f64, MlpError> {
        let pred: Vec<f64> = rows.iter().map(|r| net.predict(r)).collect();
        let actual: Vec<f64> = rows.iter().map(|r| r.mstny).collect();
        percent_error(&pred, &actual)
            .map(|p| p.value)
            .map_err(|e| MlpError::BadConfig(format!("percent error undefined: {e}")))
    };

    let mut steps: Vec<SizeStep> = Vec::new();
    let mut visited: Vec<usize> = Vec::new();
    for step in 0..search.max_steps {
        let mut cfg = config.clone();
        cfg.seed = derive_seed(config.seed, 200 + step as u64);
        let (net, _) = fit(train_rows, &[size], &cfg)?;
        let train_pct = pct(&net, train_rows)?;
        let valid_pct = pct(&net, validation_rows)?;
        steps.push(SizeStep {
            size,
            train_pct,
            valid_pct,
        });
        visited.push(size);

        let next = if train_pct > search.grow_threshold_pct {
            size + 1
        } else if valid_pct - train_pct > search.prune_margin_pct {
            size.saturating_sub(1)
        } else {
            break; // both criteria satisfied
        };
        let next = next.clamp(search.size_min, search.size_max);
        if next == size || visited.contains(&next) {
            break; // boundary hit or oscillation
        }
        size = next;
    }

    let chosen = steps
        .iter()
        .min_by(|a, b| {
            a.valid_pct
                .total_cmp(&b.valid_pct)
                .then(a.size.cmp(&b.size))
        })
        .expect("at least one step")
        .size;
    Ok(SizeSearchReport { chosen, steps })
}
