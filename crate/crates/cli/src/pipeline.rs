//! Shared model pipelines behind the commands: vocabulary and feature
//! construction, CNN / MLP-CNN / linear-baseline training, adaptation, and
//! evaluation of a loaded container on labeled examples.

use std::path::Path;

use crisiscnn_core::baselines::{self, LinearKind};
use crisiscnn_core::cnn::{self, CnnConfig, CnnParams};
use crisiscnn_core::corpus::{build_vocab, LabelSchema, LabeledExample, Vocabulary};
use crisiscnn_core::embeddings;
use crisiscnn_core::error::{Error, Result};
use crisiscnn_core::eval::{self, EvalReport};
use crisiscnn_core::features::{self, NgramVocab, SparseVec};
use crisiscnn_core::train::{self, EpochStats, TrainExample};

use crate::config::RunConfig;
use crate::container::{FeatureMeta, ModelContainer};

/// Model families the train command accepts.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModelKind {
    Cnn,
    MlpCnn,
    Logreg,
    Svm,
}

impl ModelKind {
    pub fn parse(name: &str) -> Result<Self> {
        match name {
            "cnn" => Ok(ModelKind::Cnn),
            "mlp-cnn" => Ok(ModelKind::MlpCnn),
            "logreg" | "lr" => Ok(ModelKind::Logreg),
            "svm" => Ok(ModelKind::Svm),
            "rf" | "random-forest" => Err(Error::invalid(
                "the random forest baseline is unsupported; use logreg, svm, cnn, or mlp-cnn",
            )),
            other => Err(Error::invalid(format!(
                "unknown model kind {other:?}; expected cnn, mlp-cnn, logreg, or svm"
            ))),
        }
    }
}

/// Fixed TF-IDF channel: fitted n-gram vocabulary plus the optional
/// chi-squared column subset defining the dense ordering.
#[derive(Debug, Clone)]
pub struct FeaturePipeline {
    pub vocab: NgramVocab,
    pub selected: Option<Vec<usize>>,
}

impl FeaturePipeline {
    /// Fit on training examples; `chi2_k` switches selection on.
    pub fn fit(train_pool: &[LabeledExample], schema: &LabelSchema, chi2_k: Option<usize>) -> Result<Self> {
        let vocab = features::fit_tfidf(train_pool.iter().map(|e| e.tokens.as_slice()))?;
        let selected = match chi2_k {
            None => None,
            Some(k) => {
                let x: Vec<SparseVec> =
                    train_pool.iter().map(|e| features::transform_tfidf(&vocab, &e.tokens)).collect();
                let y: Vec<usize> = train_pool.iter().map(|e| e.label).collect();
                Some(features::chi2_select(&x, &y, schema.len(), k)?)
            }
        };
        Ok(FeaturePipeline { vocab, selected })
    }

    pub fn extra_dim(&self) -> usize {
        self.selected.as_ref().map_or(self.vocab.len(), Vec::len)
    }

    /// Dense auxiliary vector for the CNN channel.
    pub fn dense_features(&self, tokens: &[String]) -> Vec<f64> {
        let v = features::transform_tfidf(&self.vocab, tokens);
        match &self.selected {
            Some(cols) => v.dense_at(cols),
            None => {
                let all: Vec<usize> = (0..self.vocab.len()).collect();
                v.dense_at(&all)
            }
        }
    }

    /// Sparse vector in the linear model's feature space.
    pub fn sparse_features(&self, tokens: &[String]) -> SparseVec {
        let v = features::transform_tfidf(&self.vocab, tokens);
        match &self.selected {
            Some(cols) => v.project(cols),
            None => v,
        }
    }

    pub fn to_meta(&self) -> FeatureMeta {
        FeatureMeta {
            ngrams: self.vocab.ngrams().to_vec(),
            doc_freq: (0..self.vocab.len()).map(|i| self.vocab.doc_freq(i)).collect(),
            n_docs: self.vocab.n_docs(),
            selected: self.selected.clone(),
        }
    }

    pub fn from_meta(meta: &FeatureMeta) -> Result<Self> {
        Ok(FeaturePipeline { vocab: meta.to_vocab()?, selected: meta.selected.clone() })
    }
}

fn to_train_examples(
    examples: &[LabeledExample],
    vocab: &Vocabulary,
    cfg: &CnnConfig,
    pipeline: Option<&FeaturePipeline>,
) -> Vec<TrainExample> {
    examples
        .iter()
        .map(|e| {
            let extra = pipeline.map(|p| p.dense_features(&e.tokens));
            TrainExample::from_labeled(e, vocab, cfg, extra)
        })
        .collect()
}

fn init_embeddings(
    run: &RunConfig,
    vocab: &Vocabulary,
    embeddings_path: Option<&Path>,
    seed: u64,
) -> Result<embeddings::EmbeddingTable> {
    match embeddings_path {
        Some(path) => {
            let table = embeddings::load_pretrained(path, vocab, seed)?;
            if let Some(warning) = &table.warning {
                eprintln!("warning: {warning}");
            }
            Ok(table)
        }
        None => embeddings::random_init(vocab, run.embed_dim, seed, run.init_scale),
    }
}

pub struct TrainedCnn {
    pub container: ModelContainer,
    pub history: Vec<EpochStats>,
    pub best_epoch: usize,
    pub best_accuracy: f64,
}

/// Train a CNN (or MLP-CNN when `kind` enables the channel) from scratch on
/// the given pools. The vocabulary and, for MLP-CNN, the feature pipeline are
/// built from the training pool only.
pub fn train_cnn_model(
    run: &RunConfig,
    kind: ModelKind,
    train_pool: &[LabeledExample],
    val_pool: &[LabeledExample],
    schema: &LabelSchema,
    embeddings_path: Option<&Path>,
    threads: usize,
) -> Result<TrainedCnn> {
    let vocab = build_vocab(train_pool, run.vocab_percent)?;
    let pipeline = match kind {
        ModelKind::MlpCnn => Some(FeaturePipeline::fit(train_pool, schema, run.chi2_k)?),
        ModelKind::Cnn => None,
        _ => return Err(Error::invalid("train_cnn_model expects a cnn-family kind")),
    };
    let extra_dim = pipeline.as_ref().map_or(0, FeaturePipeline::extra_dim);
    let cfg = run.cnn_config(schema.len(), extra_dim);
    cfg.validate()?;

    let table = init_embeddings(run, &vocab, embeddings_path, run.seed)?;
    let params = CnnParams::init(&cfg, table, run.seed.wrapping_add(1))?;
    let train_data = to_train_examples(train_pool, &vocab, &cfg, pipeline.as_ref());
    let val_data = to_train_examples(val_pool, &vocab, &cfg, pipeline.as_ref());

    let outcome =
        train::train(&cfg, &run.train_config(threads), params, &train_data, &val_data, None)?;
    let container = ModelContainer::from_cnn(
        &cfg,
        &outcome.params,
        &vocab,
        schema,
        pipeline.as_ref().map(FeaturePipeline::to_meta),
    );
    Ok(TrainedCnn {
        container,
        history: outcome.history,
        best_epoch: outcome.best_epoch,
        best_accuracy: outcome.best_accuracy,
    })
}

/// Regularized adaptation: continue from the event model, training on the
/// combined pool with the mixed loss. Vocabulary, shape, and feature pipeline
/// all come from the event model.
pub fn train_cnn_adapt_reg(
    run: &RunConfig,
    event_model: &ModelContainer,
    train_pool: &[LabeledExample],
    val_pool: &[LabeledExample],
    threads: usize,
) -> Result<TrainedCnn> {
    let (cfg, reference, vocab, schema) = event_model.to_cnn()?;
    let pipeline = match &event_model.meta.features {
        Some(meta) => Some(FeaturePipeline::from_meta(meta)?),
        None => None,
    };
    let train_data = to_train_examples(train_pool, &vocab, &cfg, pipeline.as_ref());
    let val_data = to_train_examples(val_pool, &vocab, &cfg, pipeline.as_ref());
    let outcome = train::fit_adapted(
        &cfg,
        &run.train_config(threads),
        &reference,
        &train_data,
        &val_data,
        run.lambda,
    )?;
    let container = ModelContainer::from_cnn(
        &cfg,
        &outcome.params,
        &vocab,
        &schema,
        event_model.meta.features.clone(),
    );
    Ok(TrainedCnn {
        container,
        history: outcome.history,
        best_epoch: outcome.best_epoch,
        best_accuracy: outcome.best_accuracy,
    })
}

/// Out-of-event examples the event model predicts correctly, as owned copies.
pub fn select_with_container(
    event_model: &ModelContainer,
    out_pool: &[LabeledExample],
) -> Result<Vec<LabeledExample>> {
    let (cfg, params, vocab, schema) = event_model.to_cnn()?;
    check_labels(out_pool, &schema)?;
    let pipeline = match &event_model.meta.features {
        Some(meta) => Some(FeaturePipeline::from_meta(meta)?),
        None => None,
    };
    let extra: Option<Vec<Vec<f64>>> =
        pipeline.as_ref().map(|p| out_pool.iter().map(|e| p.dense_features(&e.tokens)).collect());
    let picked =
        train::select_instances(&cfg, &params, &vocab, out_pool, extra.as_deref())?;
    Ok(picked.into_iter().map(|i| out_pool[i].clone()).collect())
}

/// Train a linear baseline on TF-IDF features, with optional chi-squared
/// selection when the run config carries a feature count.
pub fn train_baseline_model(
    run: &RunConfig,
    kind: LinearKind,
    train_pool: &[LabeledExample],
    schema: &LabelSchema,
) -> Result<ModelContainer> {
    let pipeline = FeaturePipeline::fit(train_pool, schema, run.chi2_k)?;
    let x: Vec<SparseVec> =
        train_pool.iter().map(|e| pipeline.sparse_features(&e.tokens)).collect();
    let y: Vec<usize> = train_pool.iter().map(|e| e.label).collect();
    let model = match kind {
        LinearKind::Logistic => baselines::train_logreg(
            &x,
            &y,
            schema.len(),
            run.baseline_epochs,
            run.baseline_learning_rate,
            run.baseline_l2,
            run.seed,
        )?,
        LinearKind::SvmHinge => baselines::train_linear_svm(
            &x,
            &y,
            schema.len(),
            run.baseline_epochs,
            run.baseline_learning_rate,
            run.baseline_l2,
            run.seed,
        )?,
    };
    Ok(ModelContainer::from_linear(&model, schema, pipeline.to_meta()))
}

fn check_labels(examples: &[LabeledExample], schema: &LabelSchema) -> Result<()> {
    for e in examples {
        if e.label >= schema.len() {
            return Err(Error::invalid(format!(
                "example {} has label index {} outside the model schema",
                e.id, e.label
            )));
        }
    }
    Ok(())
}

/// Per-example probabilities (or decision scores) from any container kind.
pub fn score_examples(
    container: &ModelContainer,
    examples: &[LabeledExample],
) -> Result<Vec<(usize, Vec<f64>)>> {
    match container.meta.kind.as_str() {
        "cnn" => {
            let (cfg, params, vocab, schema) = container.to_cnn()?;
            check_labels(examples, &schema)?;
            let pipeline = match &container.meta.features {
                Some(meta) => Some(FeaturePipeline::from_meta(meta)?),
                None => None,
            };
            examples
                .iter()
                .map(|e| {
                    let extra = pipeline.as_ref().map(|p| p.dense_features(&e.tokens));
                    cnn::predict(&cfg, &params, &vocab, &e.tokens, extra.as_deref())
                })
                .collect()
        }
        _ => {
            let (model, schema) = container.to_linear()?;
            check_labels(examples, &schema)?;
            let meta = container
                .meta
                .features
                .as_ref()
                .ok_or_else(|| Error::invalid("linear container without feature metadata"))?;
            let pipeline = FeaturePipeline::from_meta(meta)?;
            examples
                .iter()
                .map(|e| baselines::predict_linear(&model, &pipeline.sparse_features(&e.tokens)))
                .collect()
        }
    }
}

/// Score and build the full evaluation report.
pub fn evaluate_container(
    container: &ModelContainer,
    examples: &[LabeledExample],
) -> Result<EvalReport> {
    if examples.is_empty() {
        return Err(Error::invalid("cannot evaluate an empty dataset"));
    }
    let schema = container.schema()?;
    let scored = score_examples(container, examples)?;
    let gold: Vec<usize> = examples.iter().map(|e| e.label).collect();
    let pred: Vec<usize> = scored.iter().map(|(l, _)| *l).collect();
    let scores: Vec<Vec<f64>> = scored.into_iter().map(|(_, s)| s).collect();
    eval::build_report(&gold, &pred, &scores, &schema)
}
