//! Flat key=value run configuration. Every key has a default except the data
//! paths and the chi-squared feature count; unknown keys are rejected.
//! Command-line flags override file values.

use std::fs;
use std::path::{Path, PathBuf};

use crisiscnn_core::cnn::CnnConfig;
use crisiscnn_core::error::{Error, Result};
use crisiscnn_core::train::TrainConfig;

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    // Model shape.
    pub t_max: usize,
    pub embed_dim: usize,
    pub num_filters: usize,
    pub window: usize,
    pub pool_len: usize,
    pub dense_units: usize,
    pub dropout: f64,
    // Optimization.
    pub batch_size: usize,
    pub max_epochs: usize,
    pub patience: usize,
    pub seed: u64,
    pub rho: f64,
    pub eps: f64,
    pub init_scale: f64,
    // Adaptation.
    pub lambda: f64,
    // Data and features.
    pub vocab_percent: f64,
    pub chi2_k: Option<usize>,
    // Linear baselines.
    pub baseline_epochs: usize,
    pub baseline_learning_rate: f64,
    pub baseline_l2: f64,
    // Optional file paths.
    pub event_data: Option<PathBuf>,
    pub out_event_data: Option<PathBuf>,
    pub embeddings: Option<PathBuf>,
    pub event_model: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub model: String,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            t_max: 30,
            embed_dim: 300,
            num_filters: 100,
            window: 3,
            pool_len: 2,
            dense_units: 100,
            dropout: 0.5,
            batch_size: 64,
            max_epochs: 25,
            patience: 5,
            seed: 7,
            rho: 0.95,
            eps: 1e-6,
            init_scale: 0.25,
            lambda: 0.5,
            vocab_percent: 90.0,
            chi2_k: None,
            baseline_epochs: 100,
            baseline_learning_rate: 0.1,
            baseline_l2: 1e-4,
            event_data: None,
            out_event_data: None,
            embeddings: None,
            event_model: None,
            out: None,
            model: "cnn".to_string(),
        }
    }
}

impl RunConfig {
    /// Parse a config file of `key = value` lines (`#` comments allowed) on
    /// top of the defaults.
    pub fn from_file(path: &Path) -> Result<Self> {
        let mut config = RunConfig::default();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::parse(path, i + 1, "expected `key = value`")
            })?;
            config
                .set(key.trim(), value.trim())
                .map_err(|e| Error::parse(path, i + 1, e.to_string()))?;
        }
        Ok(config)
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        fn num<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
            value
                .parse::<T>()
                .map_err(|_| Error::invalid(format!("bad value {value:?} for {key}")))
        }
        match key {
            "t_max" => self.t_max = num(key, value)?,
            "embed_dim" => self.embed_dim = num(key, value)?,
            "num_filters" => self.num_filters = num(key, value)?,
            "window" => self.window = num(key, value)?,
            "pool_len" => self.pool_len = num(key, value)?,
            "dense_units" => self.dense_units = num(key, value)?,
            "dropout" => self.dropout = num(key, value)?,
            "batch_size" => self.batch_size = num(key, value)?,
            "max_epochs" => self.max_epochs = num(key, value)?,
            "patience" => self.patience = num(key, value)?,
            "seed" => self.seed = num(key, value)?,
            "rho" => self.rho = num(key, value)?,
            "eps" => self.eps = num(key, value)?,
            "init_scale" => self.init_scale = num(key, value)?,
            "lambda" => self.lambda = num(key, value)?,
            "vocab_percent" => self.vocab_percent = num(key, value)?,
            "chi2_k" => self.chi2_k = Some(num(key, value)?),
            "baseline_epochs" => self.baseline_epochs = num(key, value)?,
            "baseline_learning_rate" => self.baseline_learning_rate = num(key, value)?,
            "baseline_l2" => self.baseline_l2 = num(key, value)?,
            "event_data" => self.event_data = Some(PathBuf::from(value)),
            "out_event_data" => self.out_event_data = Some(PathBuf::from(value)),
            "embeddings" => self.embeddings = Some(PathBuf::from(value)),
            "event_model" => self.event_model = Some(PathBuf::from(value)),
            "out" => self.out = Some(PathBuf::from(value)),
            "model" => self.model = value.to_string(),
            other => return Err(Error::invalid(format!("unknown config key {other:?}"))),
        }
        Ok(())
    }

    /// Config-file rendering, reloadable through [`RunConfig::from_file`].
    pub fn to_file_format(&self) -> String {
        let mut out = String::new();
        let mut push = |k: &str, v: String| out.push_str(&format!("{k} = {v}\n"));
        push("model", self.model.clone());
        push("t_max", self.t_max.to_string());
        push("embed_dim", self.embed_dim.to_string());
        push("num_filters", self.num_filters.to_string());
        push("window", self.window.to_string());
        push("pool_len", self.pool_len.to_string());
        push("dense_units", self.dense_units.to_string());
        push("dropout", self.dropout.to_string());
        push("batch_size", self.batch_size.to_string());
        push("max_epochs", self.max_epochs.to_string());
        push("patience", self.patience.to_string());
        push("seed", self.seed.to_string());
        push("rho", self.rho.to_string());
        push("eps", self.eps.to_string());
        push("init_scale", self.init_scale.to_string());
        push("lambda", self.lambda.to_string());
        push("vocab_percent", self.vocab_percent.to_string());
        if let Some(k) = self.chi2_k {
            push("chi2_k", k.to_string());
        }
        push("baseline_epochs", self.baseline_epochs.to_string());
        push("baseline_learning_rate", self.baseline_learning_rate.to_string());
        push("baseline_l2", self.baseline_l2.to_string());
        out
    }

    pub fn cnn_config(&self, num_classes: usize, extra_dim: usize) -> CnnConfig {
        CnnConfig {
            t_max: self.t_max,
            embed_dim: self.embed_dim,
            num_filters: self.num_filters,
            window: self.window,
            pool_len: self.pool_len,
            dense_units: self.dense_units,
            num_classes,
            dropout_rate: self.dropout,
            extra_dim,
        }
    }

    pub fn train_config(&self, threads: usize) -> TrainConfig {
        TrainConfig {
            max_epochs: self.max_epochs,
            batch_size: self.batch_size,
            patience: self.patience,
            seed: self.seed,
            rho: self.rho,
            eps: self.eps,
            threads,
        }
    }
}
