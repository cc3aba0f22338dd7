//! `tables`: run every reported pipeline end-to-end on user-supplied event
//! and out-of-event TSVs and emit result tables in the published row/column
//! layout: a binary AUC table over {event, out, event+out} x {LR, SVM, CNN},
//! and a multi-class accuracy / macro-F1 table over {event, out, event+out,
//! adpt01, adpt02} x {SVM, CNN, MLP-CNN}.
//!
//! adpt01 is the regularized adaptation (CNN-family only; hinge models have
//! no probability estimates to mix, so that cell is emitted as n/a). adpt02
//! is instance selection, applied to every system.

use std::path::{Path, PathBuf};

use crisiscnn_core::baselines::LinearKind;
use crisiscnn_core::corpus::{LabeledExample, Origin};
use crisiscnn_core::error::Result;
use crisiscnn_core::eval::EvalReport;

use crate::commands::prepare::{self, PrepareArgs};
use crate::config::RunConfig;
use crate::container::ModelContainer;
use crate::io::{atomic_write_str, thread_count, PreparedDir};
use crate::pipeline::{self, ModelKind};

pub struct TablesArgs {
    pub run: RunConfig,
    pub event_tsv: PathBuf,
    pub out_event_tsv: PathBuf,
    pub schema: PathBuf,
    pub out_dir: PathBuf,
    pub negative_class: String,
    pub has_header: bool,
}

struct Ctx {
    run: RunConfig,
    threads: usize,
    models_dir: PathBuf,
}

impl Ctx {
    fn save(&self, name: &str, container: &ModelContainer) -> Result<()> {
        container.save(&self.models_dir.join(format!("{name}.ccnn")))
    }
}

pub fn run(args: &TablesArgs) -> Result<()> {
    let threads = thread_count();
    let models_dir = args.out_dir.join("models");

    // Prepare all four dataset directories.
    let dirs = args.out_dir.join("data");
    for (tsv, name, binary) in [
        (&args.event_tsv, "event-multi", false),
        (&args.out_event_tsv, "out-multi", false),
        (&args.event_tsv, "event-binary", true),
        (&args.out_event_tsv, "out-binary", true),
    ] {
        prepare::run(&PrepareArgs {
            input: tsv,
            schema: &args.schema,
            out_dir: &dirs.join(name),
            seed: args.run.seed,
            binary,
            negative_class: &args.negative_class,
            has_header: args.has_header,
            vocab_percent: args.run.vocab_percent,
            fractions: (0.70, 0.10, 0.20),
        })?;
    }

    let ctx = Ctx { run: args.run.clone(), threads, models_dir };
    let binary_table = binary_table(&ctx, &dirs)?;
    let multi_table = multiclass_table(&ctx, &dirs)?;
    atomic_write_str(&args.out_dir.join("binary_auc.tsv"), &binary_table)?;
    atomic_write_str(&args.out_dir.join("multiclass.tsv"), &multi_table)?;
    println!("{binary_table}");
    println!("{multi_table}");
    println!("tables written to {}", args.out_dir.display());
    Ok(())
}

fn pools(event: &PreparedDir, out: &PreparedDir) -> (Vec<LabeledExample>, Vec<LabeledExample>) {
    let out_pool = out.pool();
    let mut combined = event.train.clone();
    combined.extend(out_pool.iter().cloned());
    (out_pool, combined)
}

fn train_linear(
    ctx: &Ctx,
    kind: LinearKind,
    pool: &[LabeledExample],
    event: &PreparedDir,
    name: &str,
) -> Result<ModelContainer> {
    let container = pipeline::train_baseline_model(&ctx.run, kind, pool, &event.schema)?;
    ctx.save(name, &container)?;
    Ok(container)
}

fn train_cnn(
    ctx: &Ctx,
    kind: ModelKind,
    pool: &[LabeledExample],
    event: &PreparedDir,
    name: &str,
) -> Result<ModelContainer> {
    let trained = pipeline::train_cnn_model(
        &ctx.run,
        kind,
        pool,
        &event.dev,
        &event.schema,
        ctx.run.embeddings.as_deref(),
        ctx.threads,
    )?;
    ctx.save(name, &trained.container)?;
    Ok(trained.container)
}

fn eval_on(container: &ModelContainer, test: &[LabeledExample]) -> Result<EvalReport> {
    pipeline::evaluate_container(container, test)
}

/// Out-of-event examples a linear event model predicts correctly.
fn select_linear(
    event_model: &ModelContainer,
    out_pool: &[LabeledExample],
) -> Result<Vec<LabeledExample>> {
    let scored = pipeline::score_examples(event_model, out_pool)?;
    Ok(out_pool
        .iter()
        .zip(scored)
        .filter(|(e, (label, _))| *label == e.label)
        .map(|(e, _)| e.clone())
        .collect())
}

fn binary_table(ctx: &Ctx, dirs: &Path) -> Result<String> {
    let event = PreparedDir::load(&dirs.join("event-binary"), Origin::Event)?;
    let out = PreparedDir::load(&dirs.join("out-binary"), Origin::OutOfEvent)?;
    let (out_pool, combined) = pools(&event, &out);

    let settings: [(&str, &[LabeledExample]); 3] = [
        ("B_event", &event.train),
        ("B_out", &out_pool),
        ("B_event+out", &combined),
    ];

    let mut table = String::from("SYS\tLR\tSVM\tCNN\n");
    for (row_name, pool) in settings {
        let mut cells = vec![row_name.to_string()];
        for system in ["lr", "svm", "cnn"] {
            let model_name = format!("binary-{row_name}-{system}");
            let container = match system {
                "lr" => train_linear(ctx, LinearKind::Logistic, pool, &event, &model_name)?,
                "svm" => train_linear(ctx, LinearKind::SvmHinge, pool, &event, &model_name)?,
                _ => train_cnn(ctx, ModelKind::Cnn, pool, &event, &model_name)?,
            };
            let report = eval_on(&container, &event.test)?;
            let auc = report.auc.expect("binary evaluation produces AUC");
            cells.push(format!("{:.2}", auc * 100.0));
        }
        table.push_str(&cells.join("\t"));
        table.push('\n');
    }
    Ok(table)
}

fn multiclass_table(ctx: &Ctx, dirs: &Path) -> Result<String> {
    let event = PreparedDir::load(&dirs.join("event-multi"), Origin::Event)?;
    let out = PreparedDir::load(&dirs.join("out-multi"), Origin::OutOfEvent)?;
    let (out_pool, combined) = pools(&event, &out);

    let mut table = String::from(
        "SYS\tSVM:Accuracy\tCNN:Accuracy\tMLP-CNN:Accuracy\tSVM:MacroF1\tCNN:MacroF1\tMLP-CNN:MacroF1\n",
    );

    // Event models are reused by both adaptation rows.
    let svm_event =
        train_linear(ctx, LinearKind::SvmHinge, &event.train, &event, "multi-M_event-svm")?;
    let cnn_event = train_cnn(ctx, ModelKind::Cnn, &event.train, &event, "multi-M_event-cnn")?;
    let mlp_event =
        train_cnn(ctx, ModelKind::MlpCnn, &event.train, &event, "multi-M_event-mlp-cnn")?;

    let mut rows: Vec<(String, Vec<Option<EvalReport>>)> = Vec::new();

    for (row_name, pool) in [
        ("M_event", &event.train),
        ("M_out", &out_pool),
        ("M_event+out", &combined),
    ] {
        let (svm, cnn, mlp) = if row_name == "M_event" {
            (svm_event.clone(), cnn_event.clone(), mlp_event.clone())
        } else {
            (
                train_linear(ctx, LinearKind::SvmHinge, pool, &event, &format!("multi-{row_name}-svm"))?,
                train_cnn(ctx, ModelKind::Cnn, pool, &event, &format!("multi-{row_name}-cnn"))?,
                train_cnn(ctx, ModelKind::MlpCnn, pool, &event, &format!("multi-{row_name}-mlp-cnn"))?,
            )
        };
        rows.push((
            row_name.to_string(),
            vec![
                Some(eval_on(&svm, &event.test)?),
                Some(eval_on(&cnn, &event.test)?),
                Some(eval_on(&mlp, &event.test)?),
            ],
        ));
    }

    // adpt01: regularized adaptation on the combined pool (CNN family only).
    {
        let mut reports = vec![None];
        for (reference, name) in [(&cnn_event, "cnn"), (&mlp_event, "mlp-cnn")] {
            let trained = pipeline::train_cnn_adapt_reg(
                &ctx.run,
                reference,
                &combined,
                &event.dev,
                ctx.threads,
            )?;
            ctx.save(&format!("multi-M_event+adpt01-{name}"), &trained.container)?;
            reports.push(Some(eval_on(&trained.container, &event.test)?));
        }
        rows.push(("M_event+adpt01".to_string(), reports));
    }

    // adpt02: instance selection then retraining on event + selected.
    {
        let mut reports = Vec::new();
        let selected_svm = select_linear(&svm_event, &out_pool)?;
        let mut pool = event.train.clone();
        pool.extend(selected_svm);
        let svm = train_linear(ctx, LinearKind::SvmHinge, &pool, &event, "multi-M_event+adpt02-svm")?;
        reports.push(Some(eval_on(&svm, &event.test)?));

        for (reference, kind, name) in [
            (&cnn_event, ModelKind::Cnn, "cnn"),
            (&mlp_event, ModelKind::MlpCnn, "mlp-cnn"),
        ] {
            let selected = pipeline::select_with_container(reference, &out_pool)?;
            println!(
                "adpt02 {name}: selected {} of {} out-of-event examples",
                selected.len(),
                out_pool.len()
            );
            let mut pool = event.train.clone();
            pool.extend(selected);
            let container =
                train_cnn(ctx, kind, &pool, &event, &format!("multi-M_event+adpt02-{name}"))?;
            reports.push(Some(eval_on(&container, &event.test)?));
        }
        rows.push(("M_event+adpt02".to_string(), reports));
    }

    for (name, reports) in rows {
        let fmt_acc = |r: &Option<EvalReport>| match r {
            Some(r) => format!("{:.2}", r.accuracy * 100.0),
            None => "n/a".to_string(),
        };
        let fmt_f1 = |r: &Option<EvalReport>| match r {
            Some(r) => format!("{:.2}", r.macro_f1),
            None => "n/a".to_string(),
        };
        let cells = [
            name,
            fmt_acc(&reports[0]),
            fmt_acc(&reports[1]),
            fmt_acc(&reports[2]),
            fmt_f1(&reports[0]),
            fmt_f1(&reports[1]),
            fmt_f1(&reports[2]),
        ];
        table.push_str(&cells.join("\t"));
        table.push('\n');
    }
    Ok(table)
}
