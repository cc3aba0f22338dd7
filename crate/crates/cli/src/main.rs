//! Command-line front end for the crisis tweet classification toolkit.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use crisiscnn_cli::commands::gridsearch::{parse_list, GridRestriction, GridSearchArgs};
use crisiscnn_cli::commands::prepare::PrepareArgs;
use crisiscnn_cli::commands::tables::TablesArgs;
use crisiscnn_cli::commands::train::{TrainArgs, TrainMode};
use crisiscnn_cli::commands::{evaluate, gridsearch, predict, prepare, tables, train};
use crisiscnn_cli::config::RunConfig;
use crisiscnn_cli::io::atomic_write_str;
use crisiscnn_cli::synth::{generate, SynthSpec};
use crisiscnn_core::error::{Error, Result};

#[derive(Parser)]
#[command(
    name = "crisiscnn",
    about = "Classify crisis-related short texts: CNN and linear models, domain adaptation, evaluation",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

/// Config-file values these flags override.
#[derive(Args, Default)]
struct Overrides {
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long = "batch-size")]
    batch_size: Option<usize>,
    #[arg(long)]
    dropout: Option<f64>,
    #[arg(long)]
    filters: Option<usize>,
    #[arg(long)]
    window: Option<usize>,
    #[arg(long)]
    pool: Option<usize>,
    #[arg(long)]
    hidden: Option<usize>,
    #[arg(long = "t-max")]
    t_max: Option<usize>,
    #[arg(long = "embed-dim")]
    embed_dim: Option<usize>,
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long = "vocab-percent")]
    vocab_percent: Option<f64>,
    #[arg(long)]
    patience: Option<usize>,
    #[arg(long = "chi2-k")]
    chi2_k: Option<usize>,
    /// cnn, mlp-cnn, logreg, or svm.
    #[arg(long)]
    model: Option<String>,
}

impl Overrides {
    fn apply(&self, run: &mut RunConfig) {
        if let Some(v) = self.seed {
            run.seed = v;
        }
        if let Some(v) = self.epochs {
            run.max_epochs = v;
        }
        if let Some(v) = self.batch_size {
            run.batch_size = v;
        }
        if let Some(v) = self.dropout {
            run.dropout = v;
        }
        if let Some(v) = self.filters {
            run.num_filters = v;
        }
        if let Some(v) = self.window {
            run.window = v;
        }
        if let Some(v) = self.pool {
            run.pool_len = v;
        }
        if let Some(v) = self.hidden {
            run.dense_units = v;
        }
        if let Some(v) = self.t_max {
            run.t_max = v;
        }
        if let Some(v) = self.embed_dim {
            run.embed_dim = v;
        }
        if let Some(v) = self.lambda {
            run.lambda = v;
        }
        if let Some(v) = self.vocab_percent {
            run.vocab_percent = v;
        }
        if let Some(v) = self.patience {
            run.patience = v;
        }
        if let Some(v) = self.chi2_k {
            run.chi2_k = Some(v);
        }
        if let Some(v) = &self.model {
            run.model = v.clone();
        }
    }
}

fn load_run_config(config: Option<&PathBuf>, overrides: &Overrides) -> Result<RunConfig> {
    let mut run = match config {
        Some(path) => RunConfig::from_file(path)?,
        None => RunConfig::default(),
    };
    overrides.apply(&mut run);
    Ok(run)
}

#[derive(Subcommand)]
enum Command {
    /// Split a labeled TSV into train/dev/test and build the vocabulary.
    Prepare {
        #[arg(long)]
        input: PathBuf,
        /// Schema file: one class name per line, order defines indices.
        #[arg(long)]
        schema: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 7)]
        seed: u64,
        /// Merge all classes except the designated one into Informative.
        #[arg(long)]
        binary: bool,
        #[arg(long, default_value = "Not related or irrelevant")]
        negative_class: String,
        /// Skip a single header row in the input.
        #[arg(long)]
        header: bool,
        #[arg(long, default_value_t = 90.0)]
        vocab_percent: f64,
        /// Comma-separated train,validation,test fractions.
        #[arg(long, default_value = "0.70,0.10,0.20")]
        fractions: String,
    },
    /// Train a model in one of the five data settings.
    Train {
        #[arg(long)]
        config: Option<PathBuf>,
        /// event, out, event+out, adapt-reg, or adapt-select.
        #[arg(long)]
        mode: String,
        #[arg(long)]
        event_data: PathBuf,
        #[arg(long)]
        out_event_data: Option<PathBuf>,
        /// Trained event model (.ccnn), required by the adapt modes.
        #[arg(long)]
        event_model: Option<PathBuf>,
        /// Pretrained embeddings in word2vec text format.
        #[arg(long)]
        embeddings: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        /// Where to write the epoch history CSV (default: next to --out).
        #[arg(long)]
        history: Option<PathBuf>,
        /// Export the fitted n-gram vocabulary as TSV.
        #[arg(long)]
        export_ngrams: Option<PathBuf>,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Evaluate a model on a labeled TSV and write report files.
    Evaluate {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Classify a two-column TSV (id, text) or stdin lines.
    Predict {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        input: Option<PathBuf>,
    },
    /// Sweep the tuning grids and select by dev accuracy.
    Gridsearch {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        event_data: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Comma-separated values restricting one grid dimension.
        #[arg(long)]
        grid_dropout: Option<String>,
        #[arg(long)]
        grid_batch: Option<String>,
        #[arg(long)]
        grid_filters: Option<String>,
        #[arg(long)]
        grid_window: Option<String>,
        #[arg(long)]
        grid_pool: Option<String>,
        #[arg(long)]
        grid_hidden: Option<String>,
        #[arg(long)]
        grid_vocab: Option<String>,
        /// Required to run the full 2916-cell default grid.
        #[arg(long)]
        confirm: bool,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Generate a synthetic keyword-separable corpus (tweets.tsv, schema.txt).
    Synth {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 2000)]
        count: usize,
        #[arg(long, default_value_t = 7)]
        seed: u64,
        #[arg(long, default_value_t = 6)]
        classes: usize,
    },
    /// Run every reported pipeline and emit tables in the published layout.
    Tables {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        event: PathBuf,
        #[arg(long)]
        out_event: PathBuf,
        #[arg(long)]
        schema: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value = "Not related or irrelevant")]
        negative_class: String,
        #[arg(long)]
        header: bool,
        #[command(flatten)]
        overrides: Overrides,
    },
}

fn parse_fractions(value: &str) -> Result<(f64, f64, f64)> {
    let parts = parse_list::<f64>(value, "fraction")?;
    if parts.len() != 3 {
        return Err(Error::invalid("expected three comma-separated fractions"));
    }
    Ok((parts[0], parts[1], parts[2]))
}

fn dispatch(command: Command) -> Result<()> {
    match command {
        Command::Prepare {
            input,
            schema,
            out,
            seed,
            binary,
            negative_class,
            header,
            vocab_percent,
            fractions,
        } => prepare::run(&PrepareArgs {
            input: &input,
            schema: &schema,
            out_dir: &out,
            seed,
            binary,
            negative_class: &negative_class,
            has_header: header,
            vocab_percent,
            fractions: parse_fractions(&fractions)?,
        }),
        Command::Train {
            config,
            mode,
            event_data,
            out_event_data,
            event_model,
            embeddings,
            out,
            history,
            export_ngrams,
            overrides,
        } => {
            let mut run = load_run_config(config.as_ref(), &overrides)?;
            if let Some(path) = embeddings {
                run.embeddings = Some(path);
            }
            train::run(&TrainArgs {
                run,
                mode: TrainMode::parse(&mode)?,
                event_data,
                out_event_data,
                event_model,
                out_path: out,
                history_path: history,
                export_ngrams,
            })
        }
        Command::Evaluate { model, data, out } => evaluate::run(&model, &data, &out),
        Command::Predict { model, input } => {
            let mut stdout = std::io::stdout().lock();
            predict::run(&model, input.as_deref(), &mut stdout)
        }
        Command::Gridsearch {
            config,
            event_data,
            out,
            grid_dropout,
            grid_batch,
            grid_filters,
            grid_window,
            grid_pool,
            grid_hidden,
            grid_vocab,
            confirm,
            overrides,
        } => {
            let run = load_run_config(config.as_ref(), &overrides)?;
            let restriction = GridRestriction {
                dropout: grid_dropout.map(|v| parse_list(&v, "dropout")).transpose()?,
                batch: grid_batch.map(|v| parse_list(&v, "batch")).transpose()?,
                filters: grid_filters.map(|v| parse_list(&v, "filters")).transpose()?,
                window: grid_window.map(|v| parse_list(&v, "window")).transpose()?,
                pool: grid_pool.map(|v| parse_list(&v, "pool")).transpose()?,
                hidden: grid_hidden.map(|v| parse_list(&v, "hidden")).transpose()?,
                vocab: grid_vocab.map(|v| parse_list(&v, "vocab")).transpose()?,
            };
            gridsearch::run(&GridSearchArgs {
                run,
                event_data,
                out_dir: out,
                restriction,
                confirmed: confirm,
            })
        }
        Command::Synth { out, count, seed, classes } => {
            let corpus = generate(&SynthSpec {
                count,
                num_classes: classes,
                seed,
                ..SynthSpec::default()
            });
            atomic_write_str(&out.join("tweets.tsv"), &corpus.to_tsv())?;
            atomic_write_str(&out.join("schema.txt"), &corpus.schema_file())?;
            println!(
                "wrote {} synthetic tweets over {} classes to {}",
                count,
                classes,
                out.display()
            );
            Ok(())
        }
        Command::Tables {
            config,
            event,
            out_event,
            schema,
            out,
            negative_class,
            header,
            overrides,
        } => {
            let run = load_run_config(config.as_ref(), &overrides)?;
            tables::run(&TablesArgs {
                run,
                event_tsv: event,
                out_event_tsv: out_event,
                schema,
                out_dir: out,
                negative_class,
                has_header: header,
            })
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
