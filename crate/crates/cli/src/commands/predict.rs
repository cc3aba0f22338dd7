//! `predict`: classify unlabeled text from a two-column TSV (`id<TAB>text`)
//! or stdin lines, one output row per input: id, predicted class name, and
//! the probability (or score) vector.

use std::fs;
use std::io::{BufRead, Write};
use std::path::Path;

use crisiscnn_core::corpus::LabeledExample;
use crisiscnn_core::error::{Error, Result};
use crisiscnn_core::textprep;

use crate::container::ModelContainer;
use crate::pipeline;

pub fn run(model_path: &Path, input: Option<&Path>, output: &mut dyn Write) -> Result<()> {
    let container = ModelContainer::load(model_path)?;
    let schema = container.schema()?;

    let rows: Vec<(String, String)> = match input {
        Some(path) => {
            let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
            let mut rows = Vec::new();
            for (i, line) in text.lines().enumerate() {
                if line.is_empty() {
                    continue;
                }
                let cols: Vec<&str> = line.split('\t').collect();
                if cols.len() != 2 {
                    return Err(Error::parse(
                        path,
                        i + 1,
                        format!("expected 2 tab-separated columns (id, text), found {}", cols.len()),
                    ));
                }
                rows.push((cols[0].to_string(), cols[1].to_string()));
            }
            rows
        }
        None => {
            let stdin = std::io::stdin();
            let mut rows = Vec::new();
            for (i, line) in stdin.lock().lines().enumerate() {
                let line = line.map_err(|e| Error::io("<stdin>", e))?;
                if !line.is_empty() {
                    rows.push(((i + 1).to_string(), line));
                }
            }
            rows
        }
    };

    for (id, text) in rows {
        let example = LabeledExample {
            id: id.clone(),
            tokens: textprep::normalize_and_tokenize(&text),
            label: 0,
            origin: crisiscnn_core::corpus::Origin::Event,
        };
        let scored = pipeline::score_examples(&container, &[example])?;
        let (label, scores) = &scored[0];
        let rendered: Vec<String> = scores.iter().map(|s| format!("{s:.6}")).collect();
        writeln!(output, "{id}\t{}\t{}", schema.name(*label), rendered.join(" "))
            .map_err(|e| Error::io("<output>", e))?;
    }
    Ok(())
}
