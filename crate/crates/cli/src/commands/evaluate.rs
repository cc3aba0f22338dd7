//! `evaluate`: score a model container on a labeled TSV and write the report
//! files (metrics.json, confusion.csv, pr_curves.csv, class_distribution.csv).

use std::path::Path;

use crisiscnn_core::corpus::{self, LabelSchema, Origin};
use crisiscnn_core::error::{Error, Result};

use crate::container::ModelContainer;
use crate::io::atomic_write_str;
use crate::pipeline;

pub fn run(model_path: &Path, data_path: &Path, out_dir: &Path) -> Result<()> {
    let container = ModelContainer::load(model_path)?;
    let schema = container.schema()?;
    let examples = load_with_schema(data_path, &schema)?;
    if examples.is_empty() {
        return Err(Error::invalid(format!("{}: no evaluation examples", data_path.display())));
    }
    let report = pipeline::evaluate_container(&container, &examples)?;

    atomic_write_str(&out_dir.join("metrics.json"), &report.metrics_json())?;
    atomic_write_str(&out_dir.join("confusion.csv"), &report.confusion_csv())?;
    atomic_write_str(&out_dir.join("pr_curves.csv"), &report.pr_curves_csv())?;
    atomic_write_str(
        &out_dir.join("class_distribution.csv"),
        &report.class_distribution_csv(),
    )?;

    match report.auc {
        Some(auc) => println!(
            "accuracy {:.4}, macro-F1 {:.4}, AUC {:.4}; reports in {}",
            report.accuracy,
            report.macro_f1,
            auc,
            out_dir.display()
        ),
        None => println!(
            "accuracy {:.4}, macro-F1 {:.4}; reports in {}",
            report.accuracy,
            report.macro_f1,
            out_dir.display()
        ),
    }
    Ok(())
}

/// Load evaluation data against the model's schema, reporting both schemas on
/// a label mismatch.
fn load_with_schema(
    path: &Path,
    schema: &LabelSchema,
) -> Result<Vec<corpus::LabeledExample>> {
    match corpus::load_tsv(path, schema, false, Origin::Event) {
        Ok(examples) => Ok(examples),
        Err(Error::Parse { line, message, .. }) if message.contains("unknown label") => {
            Err(Error::SchemaMismatch {
                expected: schema.classes().to_vec(),
                found: format!("{message} at {}:{line}", path.display()),
            })
        }
        Err(e) => Err(e),
    }
}
