//! Seasonal temperature forecasting toolkit: weather-station ingestion and
//! seasonal feature engineering, a back-propagation multilayer perceptron,
//! an evolutionary symbolic-regression engine with a complexity/error
//! Pareto archive, and the shared evaluation metrics.

pub mod expr;
pub mod gp;
pub mod metrics;
pub mod mlp;
pub mod seed;
pub mod weather;
