//! `prepare`: load a labeled TSV, optionally merge to the binary task,
//! stratified-split 70/10/20, build the vocabulary, and write the dataset
//! directory.

use std::path::Path;

use crisiscnn_core::corpus::{self, LabelSchema, Origin};
use crisiscnn_core::error::Result;

use crate::io::{atomic_write_str, examples_to_tsv, Manifest};

pub struct PrepareArgs<'a> {
    pub input: &'a Path,
    pub schema: &'a Path,
    pub out_dir: &'a Path,
    pub seed: u64,
    pub binary: bool,
    pub negative_class: &'a str,
    pub has_header: bool,
    pub vocab_percent: f64,
    pub fractions: (f64, f64, f64),
}

pub fn run(args: &PrepareArgs<'_>) -> Result<()> {
    let schema = LabelSchema::from_file(args.schema)?;
    let mut examples = corpus::load_tsv(args.input, &schema, args.has_header, Origin::Event)?;
    let schema = if args.binary {
        let (merged, binary_schema) =
            corpus::merge_to_binary(&examples, &schema, args.negative_class)?;
        examples = merged;
        binary_schema
    } else {
        schema
    };

    let split = corpus::stratified_split(examples, args.fractions, schema.len(), args.seed)?;
    let vocab = corpus::build_vocab(&split.train, args.vocab_percent)?;

    let manifest = Manifest {
        seed: args.seed,
        fractions: [args.fractions.0, args.fractions.1, args.fractions.2],
        binary: args.binary,
        vocab_percent: args.vocab_percent,
        schema: schema.classes().to_vec(),
        train_count: split.train.len(),
        validation_count: split.validation.len(),
        test_count: split.test.len(),
    };

    atomic_write_str(&args.out_dir.join("train.tsv"), &examples_to_tsv(&split.train, &schema))?;
    atomic_write_str(&args.out_dir.join("dev.tsv"), &examples_to_tsv(&split.validation, &schema))?;
    atomic_write_str(&args.out_dir.join("test.tsv"), &examples_to_tsv(&split.test, &schema))?;
    atomic_write_str(&args.out_dir.join("vocab.tsv"), &vocab.to_tsv())?;
    let manifest_json =
        serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    atomic_write_str(&args.out_dir.join("manifest.json"), &manifest_json)?;

    println!(
        "prepared {}: train {}, dev {}, test {}, vocabulary {} entries",
        args.out_dir.display(),
        manifest.train_count,
        manifest.validation_count,
        manifest.test_count,
        vocab.len()
    );
    Ok(())
}
