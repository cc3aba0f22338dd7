//! Dataset ingestion, label schemas, binary relabeling, stratified splitting,
//! and vocabulary construction.

use std::collections::{HashMap, HashSet};
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::numerics::Rng;
use crate::textprep;

/// Binary schema class names used by [`merge_to_binary`].
pub const INFORMATIVE: &str = "Informative";
pub const NOT_INFORMATIVE: &str = "Not-Informative";

/// Ordered set of class names; a class index is its position.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelSchema {
    classes: Vec<String>,
}

impl LabelSchema {
    pub fn new(classes: Vec<String>) -> Result<Self> {
        if classes.len() < 2 {
            return Err(Error::invalid("a label schema needs at least two classes"));
        }
        let mut seen = HashSet::new();
        for c in &classes {
            if !seen.insert(c.as_str()) {
                return Err(Error::invalid(format!("duplicate class name {c:?}")));
            }
        }
        Ok(LabelSchema { classes })
    }

    /// Read a schema file: one class name per line, blank lines and `#`
    /// comments ignored, order defines indices.
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let classes: Vec<String> = text
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty() && !l.starts_with('#'))
            .map(str::to_string)
            .collect();
        LabelSchema::new(classes)
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.classes.iter().position(|c| c == name)
    }

    pub fn name(&self, index: usize) -> &str {
        &self.classes[index]
    }

    pub fn len(&self) -> usize {
        self.classes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.classes.is_empty()
    }

    pub fn classes(&self) -> &[String] {
        &self.classes
    }

    pub fn binary() -> Self {
        LabelSchema { classes: vec![INFORMATIVE.to_string(), NOT_INFORMATIVE.to_string()] }
    }
}

/// Whether an example comes from the event under study or from other events.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Origin {
    Event,
    OutOfEvent,
}

/// One preprocessed tweet.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledExample {
    pub id: String,
    pub tokens: Vec<String>,
    pub label: usize,
    pub origin: Origin,
}

/// 70/10/20-style partition of a dataset.
#[derive(Debug, Clone)]
pub struct DatasetSplit {
    pub train: Vec<LabeledExample>,
    pub validation: Vec<LabeledExample>,
    pub test: Vec<LabeledExample>,
}

/// Load a TSV file of `id<TAB>text<TAB>label` rows. Text is normalized and
/// tokenized; labels are mapped through the schema. Tabs inside the text
/// column are not supported and surface as a column-count error.
pub fn load_tsv(
    path: &Path,
    schema: &LabelSchema,
    has_header: bool,
    origin: Origin,
) -> Result<Vec<LabeledExample>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut examples = Vec::new();
    let mut seen_ids = HashSet::new();
    for (i, line) in text.lines().enumerate() {
        let lineno = i + 1;
        if has_header && i == 0 {
            continue;
        }
        if line.is_empty() {
            continue;
        }
        let cols: Vec<&str> = line.split('\t').collect();
        if cols.len() != 3 {
            return Err(Error::parse(
                path,
                lineno,
                format!("expected 3 tab-separated columns, found {}", cols.len()),
            ));
        }
        let (id, body, label_name) = (cols[0], cols[1], cols[2]);
        if id.is_empty() {
            return Err(Error::parse(path, lineno, "empty id"));
        }
        if !seen_ids.insert(id.to_string()) {
            return Err(Error::parse(path, lineno, format!("duplicate id {id:?}")));
        }
        let label = schema.index_of(label_name).ok_or_else(|| {
            Error::parse(path, lineno, format!("unknown label {label_name:?}"))
        })?;
        examples.push(LabeledExample {
            id: id.to_string(),
            tokens: textprep::normalize_and_tokenize(body),
            label,
            origin,
        });
    }
    Ok(examples)
}

/// Collapse all classes except the designated not-informative one into a
/// single `Informative` class. Preserves example count, ids, and order.
pub fn merge_to_binary(
    examples: &[LabeledExample],
    schema: &LabelSchema,
    not_informative: &str,
) -> Result<(Vec<LabeledExample>, LabelSchema)> {
    let negative = schema.index_of(not_informative).ok_or_else(|| {
        Error::invalid(format!(
            "designated class {not_informative:?} not in schema [{}]",
            schema.classes().join(", ")
        ))
    })?;
    let binary = LabelSchema::binary();
    let merged = examples
        .iter()
        .map(|e| LabeledExample { label: usize::from(e.label == negative), ..e.clone() })
        .collect();
    Ok((merged, binary))
}

/// Deterministic per-class split. Validation and test sizes are the rounded
/// fractions of each class; the remainder goes to train.
pub fn stratified_split(
    examples: Vec<LabeledExample>,
    fractions: (f64, f64, f64),
    num_classes: usize,
    seed: u64,
) -> Result<DatasetSplit> {
    let (f_train, f_val, f_test) = fractions;
    if (f_train + f_val + f_test - 1.0).abs() > 1e-9 {
        return Err(Error::invalid("split fractions must sum to 1"));
    }
    if f_train < 0.0 || f_val < 0.0 || f_test < 0.0 {
        return Err(Error::invalid("split fractions must be nonnegative"));
    }

    let mut by_class: Vec<Vec<usize>> = vec![Vec::new(); num_classes];
    for (i, e) in examples.iter().enumerate() {
        if e.label >= num_classes {
            return Err(Error::invalid(format!("label {} out of range", e.label)));
        }
        by_class[e.label].push(i);
    }
    for (c, members) in by_class.iter().enumerate() {
        if members.len() < 3 {
            return Err(Error::invalid(format!(
                "class {c} has {} examples; at least 3 are required to split",
                members.len()
            )));
        }
    }

    let mut rng = Rng::new(seed);
    let mut split = DatasetSplit { train: Vec::new(), validation: Vec::new(), test: Vec::new() };
    let mut taken: Vec<Option<LabeledExample>> = examples.into_iter().map(Some).collect();
    for (class, members) in by_class.iter_mut().enumerate() {
        rng.shuffle(members);
        let n = members.len();
        let n_val = (f_val * n as f64).round() as usize;
        let n_test = (f_test * n as f64).round() as usize;
        if n_val + n_test > n {
            return Err(Error::invalid(format!(
                "fractions leave no training examples for class {class}"
            )));
        }
        let n_train = n - n_val - n_test;
        for (pos, &idx) in members.iter().enumerate() {
            let example = taken[idx].take().expect("example consumed twice");
            if pos < n_train {
                split.train.push(example);
            } else if pos < n_train + n_val {
                split.validation.push(example);
            } else {
                split.test.push(example);
            }
        }
    }
    Ok(split)
}

/// Token-to-index map with reserved padding and unknown-word entries.
#[derive(Debug, Clone)]
pub struct Vocabulary {
    token_to_index: HashMap<String, usize>,
    index_to_token: Vec<String>,
    frequencies: Vec<u64>,
    coverage_percent: f64,
}

impl Vocabulary {
    pub const PAD: usize = 0;
    pub const UNK: usize = 1;
    pub const PAD_TOKEN: &'static str = "<PAD>";
    pub const UNK_TOKEN: &'static str = "<UNK>";

    pub fn len(&self) -> usize {
        self.index_to_token.len()
    }

    pub fn is_empty(&self) -> bool {
        self.index_to_token.is_empty()
    }

    /// Index of a token, or `UNK` when absent.
    pub fn index_of(&self, token: &str) -> usize {
        self.token_to_index.get(token).copied().unwrap_or(Self::UNK)
    }

    pub fn contains(&self, token: &str) -> bool {
        self.token_to_index.contains_key(token)
    }

    pub fn token(&self, index: usize) -> &str {
        &self.index_to_token[index]
    }

    pub fn tokens(&self) -> &[String] {
        &self.index_to_token
    }

    pub fn frequency(&self, index: usize) -> u64 {
        self.frequencies[index]
    }

    pub fn coverage_percent(&self) -> f64 {
        self.coverage_percent
    }

    /// Rebuild a vocabulary from an ordered token list (e.g. from a model
    /// container). The list must start with the reserved entries.
    pub fn from_tokens(tokens: Vec<String>) -> Result<Self> {
        if tokens.len() < 2
            || tokens[Self::PAD] != Self::PAD_TOKEN
            || tokens[Self::UNK] != Self::UNK_TOKEN
        {
            return Err(Error::invalid("vocabulary must start with <PAD>, <UNK>"));
        }
        let mut map = HashMap::with_capacity(tokens.len());
        for (i, t) in tokens.iter().enumerate().skip(2) {
            if map.insert(t.clone(), i).is_some() {
                return Err(Error::invalid(format!("duplicate vocabulary token {t:?}")));
            }
        }
        let frequencies = vec![0; tokens.len()];
        Ok(Vocabulary {
            token_to_index: map,
            index_to_token: tokens,
            frequencies,
            coverage_percent: 100.0,
        })
    }

    /// TSV export: `token<TAB>index<TAB>frequency`.
    pub fn to_tsv(&self) -> String {
        let mut out = String::new();
        for (i, t) in self.index_to_token.iter().enumerate() {
            out.push_str(&format!("{t}\t{i}\t{}\n", self.frequencies[i]));
        }
        out
    }
}

/// Build a vocabulary from the training split: rank word types by descending
/// frequency (ties lexicographic), keep the top `percent`% of types.
pub fn build_vocab(train: &[LabeledExample], percent: f64) -> Result<Vocabulary> {
    if !(percent > 0.0 && percent <= 100.0) {
        return Err(Error::invalid(format!("vocabulary percent {percent} outside (0, 100]")));
    }
    if train.is_empty() {
        return Err(Error::invalid("cannot build a vocabulary from an empty training set"));
    }
    let mut counts: HashMap<&str, u64> = HashMap::new();
    for e in train {
        for t in &e.tokens {
            *counts.entry(t.as_str()).or_insert(0) += 1;
        }
    }
    let mut types: Vec<(&str, u64)> = counts.into_iter().collect();
    types.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(b.0)));
    let keep = ((percent / 100.0) * types.len() as f64).ceil() as usize;
    types.truncate(keep);

    let mut index_to_token = vec![Vocabulary::PAD_TOKEN.to_string(), Vocabulary::UNK_TOKEN.to_string()];
    let mut frequencies = vec![0u64, 0u64];
    let mut token_to_index = HashMap::with_capacity(types.len());
    for (t, freq) in types {
        token_to_index.insert(t.to_string(), index_to_token.len());
        index_to_token.push(t.to_string());
        frequencies.push(freq);
    }
    Ok(Vocabulary { token_to_index, index_to_token, frequencies, coverage_percent: percent })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn example(id: &str, tokens: &[&str], label: usize) -> LabeledExample {
        LabeledExample {
            id: id.to_string(),
            tokens: tokens.iter().map(|s| s.to_string()).collect(),
            label,
            origin: Origin::Event,
        }
    }

    fn six_class_schema() -> LabelSchema {
        LabelSchema::new(
            [
                "Affected individual",
                "Donations and volunteering",
                "Infrastructure and utilities",
                "Sympathy and support",
                "Other useful information",
                "Not related or irrelevant",
            ]
            .iter()
            .map(|s| s.to_string())
            .collect(),
        )
        .unwrap()
    }

    fn write_temp(content: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(content.as_bytes()).unwrap();
        f
    }

    #[test]
    fn load_tsv_normalizes_and_maps_labels() {
        let schema = six_class_schema();
        let f = write_temp("t1\tHelp NOW!!\tOther useful information\n");
        let rows = load_tsv(f.path(), &schema, false, Origin::Event).unwrap();
        assert_eq!(rows.len(), 1);
        assert_eq!(rows[0].tokens, vec!["help", "now", "!", "!"]);
        assert_eq!(rows[0].label, 4);
    }

    #[test]
    fn load_tsv_unknown_label_names_line() {
        let schema = six_class_schema();
        let f = write_temp("t1\thello\tBogus\n");
        let err = load_tsv(f.path(), &schema, false, Origin::Event).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains(":1:"), "missing line number: {msg}");
        assert!(msg.contains("Bogus"));
    }

    #[test]
    fn load_tsv_malformed_row_names_line() {
        let schema = six_class_schema();
        let f = write_temp("t1\thello\tSympathy and support\nt2\tonly two cols\n");
        let err = load_tsv(f.path(), &schema, false, Origin::Event).unwrap_err();
        assert!(err.to_string().contains(":2:"));
    }

    #[test]
    fn load_tsv_empty_file_is_empty_list() {
        let schema = six_class_schema();
        let f = write_temp("");
        assert!(load_tsv(f.path(), &schema, false, Origin::Event).unwrap().is_empty());
    }

    #[test]
    fn load_tsv_header_flag_skips_first_row() {
        let schema = six_class_schema();
        let f = write_temp("id\ttext\tlabel\nt1\thi\tSympathy and support\n");
        let rows = load_tsv(f.path(), &schema, true, Origin::Event).unwrap();
        assert_eq!(rows.len(), 1);
    }

    #[test]
    fn merge_to_binary_maps_classes() {
        let schema = six_class_schema();
        let examples = vec![
            example("a", &["x"], schema.index_of("Sympathy and support").unwrap()),
            example("b", &["y"], schema.index_of("Not related or irrelevant").unwrap()),
        ];
        let (merged, bin) =
            merge_to_binary(&examples, &schema, "Not related or irrelevant").unwrap();
        assert_eq!(merged[0].label, 0); // Informative
        assert_eq!(merged[1].label, 1); // Not-Informative
        assert_eq!(bin.classes(), &[INFORMATIVE.to_string(), NOT_INFORMATIVE.to_string()]);
        assert_eq!(merged.len(), examples.len());
        assert_eq!(merged[0].id, "a");
    }

    #[test]
    fn merge_to_binary_missing_designated_class_is_error() {
        let schema = six_class_schema();
        assert!(merge_to_binary(&[], &schema, "Nope").is_err());
    }

    #[test]
    fn merge_to_binary_empty_list() {
        let schema = six_class_schema();
        let (merged, bin) =
            merge_to_binary(&[], &schema, "Not related or irrelevant").unwrap();
        assert!(merged.is_empty());
        assert_eq!(bin.len(), 2);
    }

    fn hundred_examples() -> Vec<LabeledExample> {
        let mut v = Vec::new();
        for i in 0..60 {
            v.push(example(&format!("a{i}"), &["x"], 0));
        }
        for i in 0..40 {
            v.push(example(&format!("b{i}"), &["y"], 1));
        }
        v
    }

    #[test]
    fn stratified_split_counts_and_determinism() {
        let split =
            stratified_split(hundred_examples(), (0.70, 0.10, 0.20), 2, 7).unwrap();
        assert_eq!(split.train.len(), 70);
        assert_eq!(split.validation.len(), 10);
        assert_eq!(split.test.len(), 20);
        let count = |v: &[LabeledExample], c| v.iter().filter(|e| e.label == c).count();
        assert_eq!(count(&split.train, 0), 42);
        assert_eq!(count(&split.train, 1), 28);
        assert_eq!(count(&split.validation, 0), 6);
        assert_eq!(count(&split.validation, 1), 4);
        assert_eq!(count(&split.test, 0), 12);
        assert_eq!(count(&split.test, 1), 8);

        let again = stratified_split(hundred_examples(), (0.70, 0.10, 0.20), 2, 7).unwrap();
        let ids = |v: &[LabeledExample]| v.iter().map(|e| e.id.clone()).collect::<Vec<_>>();
        assert_eq!(ids(&split.train), ids(&again.train));
        assert_eq!(ids(&split.validation), ids(&again.validation));
        assert_eq!(ids(&split.test), ids(&again.test));
    }

    #[test]
    fn stratified_split_is_disjoint_by_id() {
        let split =
            stratified_split(hundred_examples(), (0.70, 0.10, 0.20), 2, 3).unwrap();
        let mut all: Vec<&str> = split
            .train
            .iter()
            .chain(&split.validation)
            .chain(&split.test)
            .map(|e| e.id.as_str())
            .collect();
        let total = all.len();
        all.sort_unstable();
        all.dedup();
        assert_eq!(all.len(), total);
        assert_eq!(total, 100);
    }

    #[test]
    fn stratified_split_small_class_is_error() {
        let examples = vec![
            example("a", &["x"], 0),
            example("b", &["x"], 0),
            example("c", &["x"], 0),
            example("d", &["y"], 1),
            example("e", &["y"], 1),
        ];
        let err = stratified_split(examples, (0.70, 0.10, 0.20), 2, 1).unwrap_err();
        assert!(err.to_string().contains("class 1"));
    }

    #[test]
    fn stratification_within_one_of_rounded_target() {
        let mut examples = Vec::new();
        for (c, n) in [(0usize, 17usize), (1, 9), (2, 33)] {
            for i in 0..n {
                examples.push(example(&format!("{c}-{i}"), &["t"], c));
            }
        }
        let split = stratified_split(examples, (0.70, 0.10, 0.20), 3, 99).unwrap();
        for (c, n) in [(0usize, 17usize), (1, 9), (2, 33)] {
            for (part, frac) in
                [(&split.train, 0.7), (&split.validation, 0.1), (&split.test, 0.2)]
            {
                let got = part.iter().filter(|e| e.label == c).count() as f64;
                let target = (frac * n as f64).round();
                assert!((got - target).abs() <= 1.0, "class {c}: {got} vs {target}");
            }
        }
    }

    #[test]
    fn build_vocab_percent_arithmetic() {
        // types {a:5, b:5, c:1}; P=67 keeps ceil(2.01)=3, P=66 keeps ceil(1.98)=2.
        let mut examples = Vec::new();
        for i in 0..5 {
            examples.push(example(&format!("x{i}"), &["a", "b"], 0));
        }
        examples.push(example("y", &["c"], 0));
        let v67 = build_vocab(&examples, 67.0).unwrap();
        assert_eq!(v67.len(), 2 + 3);
        let v66 = build_vocab(&examples, 66.0).unwrap();
        assert_eq!(v66.len(), 2 + 2);
        assert!(v66.contains("a") && v66.contains("b") && !v66.contains("c"));
    }

    #[test]
    fn build_vocab_ties_break_lexicographically() {
        let examples = vec![example("x", &["b", "a"], 0), example("y", &["a", "b"], 0)];
        // a:2, b:2, keep one type: "a" wins the tie.
        let v = build_vocab(&examples, 50.0).unwrap();
        assert_eq!(v.len(), 3);
        assert!(v.contains("a"));
        assert!(!v.contains("b"));
        assert_eq!(v.index_of("b"), Vocabulary::UNK);
    }

    #[test]
    fn build_vocab_full_percent_keeps_everything() {
        let examples = vec![example("x", &["a", "b", "c"], 0)];
        let v = build_vocab(&examples, 100.0).unwrap();
        assert_eq!(v.len(), 5);
        assert_eq!(v.index_of("a"), 2);
    }

    #[test]
    fn build_vocab_rejects_bad_percent() {
        let examples = vec![example("x", &["a"], 0)];
        assert!(build_vocab(&examples, 0.0).is_err());
        assert!(build_vocab(&examples, 101.0).is_err());
    }

    #[test]
    fn vocab_only_from_train_tokens() {
        let train = vec![example("x", &["seen"], 0)];
        let v = build_vocab(&train, 100.0).unwrap();
        assert!(!v.contains("unseen"));
        assert_eq!(v.index_of("unseen"), Vocabulary::UNK);
    }
}
