//! `train`: the five training pipelines over prepared data directories.
//!
//! Data settings follow the transfer scenario: `event` trains on the event
//! train split; `out` trains on the whole out-of-event pool; `event+out`
//! concatenates both; `adapt-reg` continues from a trained event model with
//! the regularized loss; `adapt-select` retrains on event data plus the
//! out-of-event examples the event model already gets right. Validation (for
//! early stopping) is always the event dev split.

use std::path::{Path, PathBuf};

use crisiscnn_core::baselines::LinearKind;
use crisiscnn_core::corpus::{LabeledExample, Origin};
use crisiscnn_core::error::{Error, Result};
use crisiscnn_core::train::history_to_csv;

use crate::config::RunConfig;
use crate::container::ModelContainer;
use crate::io::{atomic_write_str, thread_count, PreparedDir};
use crate::pipeline::{self, ModelKind};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TrainMode {
    Event,
    Out,
    EventOut,
    AdaptReg,
    AdaptSelect,
}

impl TrainMode {
    pub fn parse(name: &str) -> Result<Self> {
        match name {
            "event" => Ok(TrainMode::Event),
            "out" => Ok(TrainMode::Out),
            "event+out" => Ok(TrainMode::EventOut),
            "adapt-reg" => Ok(TrainMode::AdaptReg),
            "adapt-select" => Ok(TrainMode::AdaptSelect),
            other => Err(Error::invalid(format!(
                "unknown mode {other:?}; expected event, out, event+out, adapt-reg, or adapt-select"
            ))),
        }
    }

    pub fn needs_out_data(&self) -> bool {
        !matches!(self, TrainMode::Event)
    }

    pub fn needs_event_model(&self) -> bool {
        matches!(self, TrainMode::AdaptReg | TrainMode::AdaptSelect)
    }
}

pub struct TrainArgs {
    pub run: RunConfig,
    pub mode: TrainMode,
    pub event_data: PathBuf,
    pub out_event_data: Option<PathBuf>,
    pub event_model: Option<PathBuf>,
    pub out_path: PathBuf,
    pub history_path: Option<PathBuf>,
    pub export_ngrams: Option<PathBuf>,
}

fn history_path_for(out_path: &Path, explicit: Option<&PathBuf>) -> PathBuf {
    match explicit {
        Some(p) => p.clone(),
        None => {
            let stem = out_path.file_stem().map(|s| s.to_string_lossy().to_string());
            let name = format!("{}.history.csv", stem.unwrap_or_else(|| "model".to_string()));
            out_path.with_file_name(name)
        }
    }
}

pub fn run(args: &TrainArgs) -> Result<()> {
    let threads = thread_count();
    let event = PreparedDir::load(&args.event_data, Origin::Event)?;
    let out_dir = match &args.out_event_data {
        Some(path) => {
            let dir = PreparedDir::load(path, Origin::OutOfEvent)?;
            if dir.schema != event.schema {
                return Err(Error::SchemaMismatch {
                    expected: event.schema.classes().to_vec(),
                    found: format!("[{}]", dir.schema.classes().join(", ")),
                });
            }
            Some(dir)
        }
        None => None,
    };
    if args.mode.needs_out_data() && out_dir.is_none() {
        return Err(Error::invalid("this mode requires --out-event-data"));
    }
    if args.mode.needs_event_model() && args.event_model.is_none() {
        return Err(Error::invalid("adaptation modes require --event-model"));
    }

    let kind = ModelKind::parse(&args.run.model)?;
    let out_pool: Vec<LabeledExample> =
        out_dir.as_ref().map(|d| d.pool()).unwrap_or_default();

    match kind {
        ModelKind::Cnn | ModelKind::MlpCnn => {
            train_cnn(args, kind, &event, &out_pool, threads)
        }
        ModelKind::Logreg | ModelKind::Svm => train_baseline(args, kind, &event, &out_pool),
    }
}

fn train_cnn(
    args: &TrainArgs,
    kind: ModelKind,
    event: &PreparedDir,
    out_pool: &[LabeledExample],
    threads: usize,
) -> Result<()> {
    let run = &args.run;
    let embeddings = run.embeddings.as_deref();
    let trained = match args.mode {
        TrainMode::Event => pipeline::train_cnn_model(
            run,
            kind,
            &event.train,
            &event.dev,
            &event.schema,
            embeddings,
            threads,
        )?,
        TrainMode::Out => pipeline::train_cnn_model(
            run,
            kind,
            out_pool,
            &event.dev,
            &event.schema,
            embeddings,
            threads,
        )?,
        TrainMode::EventOut => {
            let mut pool = event.train.clone();
            pool.extend(out_pool.iter().cloned());
            pipeline::train_cnn_model(
                run,
                kind,
                &pool,
                &event.dev,
                &event.schema,
                embeddings,
                threads,
            )?
        }
        TrainMode::AdaptReg => {
            let event_model = ModelContainer::load(args.event_model.as_ref().unwrap())?;
            check_model_schema(&event_model, event)?;
            let mut pool = event.train.clone();
            pool.extend(out_pool.iter().cloned());
            pipeline::train_cnn_adapt_reg(run, &event_model, &pool, &event.dev, threads)?
        }
        TrainMode::AdaptSelect => {
            let event_model = ModelContainer::load(args.event_model.as_ref().unwrap())?;
            check_model_schema(&event_model, event)?;
            let selected = pipeline::select_with_container(&event_model, out_pool)?;
            println!(
                "instance selection kept {} of {} out-of-event examples; training set = {} event + {} selected = {}",
                selected.len(),
                out_pool.len(),
                event.train.len(),
                selected.len(),
                event.train.len() + selected.len()
            );
            let mut pool = event.train.clone();
            pool.extend(selected);
            pipeline::train_cnn_model(
                run,
                kind,
                &pool,
                &event.dev,
                &event.schema,
                embeddings,
                threads,
            )?
        }
    };

    if let Some(path) = &args.export_ngrams {
        if let Some(meta) = &trained.container.meta.features {
            atomic_write_str(path, &meta.to_vocab()?.to_tsv())?;
        }
    }
    trained.container.save(&args.out_path)?;
    let history = history_path_for(&args.out_path, args.history_path.as_ref());
    atomic_write_str(&history, &history_to_csv(&trained.history))?;
    println!(
        "trained {} epochs (best epoch {}, dev accuracy {:.4}); model {}, history {}",
        trained.history.len(),
        trained.best_epoch,
        trained.best_accuracy,
        args.out_path.display(),
        history.display()
    );
    Ok(())
}

fn train_baseline(
    args: &TrainArgs,
    kind: ModelKind,
    event: &PreparedDir,
    out_pool: &[LabeledExample],
) -> Result<()> {
    let linear_kind = match kind {
        ModelKind::Logreg => LinearKind::Logistic,
        ModelKind::Svm => LinearKind::SvmHinge,
        _ => unreachable!(),
    };
    let pool: Vec<LabeledExample> = match args.mode {
        TrainMode::Event => event.train.clone(),
        TrainMode::Out => out_pool.to_vec(),
        TrainMode::EventOut => {
            let mut pool = event.train.clone();
            pool.extend(out_pool.iter().cloned());
            pool
        }
        TrainMode::AdaptReg | TrainMode::AdaptSelect => {
            return Err(Error::invalid(
                "adaptation modes train CNN-family models; linear baselines support event, out, and event+out",
            ))
        }
    };
    let container = pipeline::train_baseline_model(&args.run, linear_kind, &pool, &event.schema)?;
    if let Some(path) = &args.export_ngrams {
        if let Some(meta) = &container.meta.features {
            atomic_write_str(path, &meta.to_vocab()?.to_tsv())?;
        }
    }
    container.save(&args.out_path)?;
    println!(
        "trained {} baseline on {} examples; model {}",
        container.meta.kind,
        pool.len(),
        args.out_path.display()
    );
    Ok(())
}

fn check_model_schema(model: &ModelContainer, event: &PreparedDir) -> Result<()> {
    if model.meta.schema != event.schema.classes() {
        return Err(Error::SchemaMismatch {
            expected: model.meta.schema.clone(),
            found: format!("[{}]", event.schema.classes().join(", ")),
        });
    }
    Ok(())
}
