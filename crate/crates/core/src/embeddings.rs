//! The shared embedding look-up table: random initialization, pretrained
//! loading in word2vec text format, and sequence-to-matrix lookup.

use std::fs;
use std::path::Path;

use crate::corpus::Vocabulary;
use crate::error::{Error, Result};
use crate::numerics::{Matrix, Rng};

/// `|V| x D` embedding matrix. Row 0 is the padding row and stays all-zero;
/// every other row is fine-tuned during training unless `trainable` is off.
#[derive(Debug, Clone)]
pub struct EmbeddingTable {
    pub matrix: Matrix,
    pub trainable: bool,
    /// Number of vocabulary tokens found in the pretrained file, when loaded
    /// from one.
    pub pretrained_overlap: Option<usize>,
    /// Set when pretrained loading found no overlapping tokens.
    pub warning: Option<String>,
}

impl EmbeddingTable {
    pub fn dim(&self) -> usize {
        self.matrix.cols()
    }

    pub fn vocab_size(&self) -> usize {
        self.matrix.rows()
    }
}

/// Uniform [-scale, scale] initialization of every non-padding row.
pub fn random_init(vocab: &Vocabulary, dim: usize, seed: u64, scale: f64) -> Result<EmbeddingTable> {
    if dim == 0 {
        return Err(Error::invalid("embedding dimension must be at least 1"));
    }
    let mut rng = Rng::new(seed);
    let mut matrix = Matrix::zeros(vocab.len(), dim);
    for r in 1..vocab.len() {
        for v in matrix.row_mut(r) {
            *v = rng.uniform(-scale, scale);
        }
    }
    Ok(EmbeddingTable { matrix, trainable: true, pretrained_overlap: None, warning: None })
}

/// Load word2vec text format: a `count dim` header line, then one
/// `word v1 ... vdim` line per word. Vocabulary tokens absent from the file
/// (and the unknown-word row) are initialized as in [`random_init`].
pub fn load_pretrained(path: &Path, vocab: &Vocabulary, seed: u64) -> Result<EmbeddingTable> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut lines = text.lines().enumerate();

    let (_, header) = lines
        .next()
        .ok_or_else(|| Error::parse(path, 1, "empty embedding file"))?;
    let mut parts = header.split_whitespace();
    let declared: usize = parts
        .next()
        .and_then(|s| s.parse().ok())
        .ok_or_else(|| Error::parse(path, 1, "malformed header, expected `count dim`"))?;
    let dim: usize = parts
        .next()
        .and_then(|s| s.parse().ok())
        .ok_or_else(|| Error::parse(path, 1, "malformed header, expected `count dim`"))?;
    if parts.next().is_some() || dim == 0 {
        return Err(Error::parse(path, 1, "malformed header, expected `count dim`"));
    }

    let mut table = random_init(vocab, dim, seed, 0.25)?;
    let mut overlap = 0usize;
    let mut rows_seen = 0usize;
    for (i, line) in lines {
        let lineno = i + 1;
        if line.is_empty() {
            continue;
        }
        rows_seen += 1;
        let mut fields = line.split_whitespace();
        let word = fields
            .next()
            .ok_or_else(|| Error::parse(path, lineno, "missing word"))?;
        let values: std::result::Result<Vec<f64>, _> =
            fields.map(|s| s.parse::<f64>()).collect();
        let values = values
            .map_err(|e| Error::parse(path, lineno, format!("bad vector value: {e}")))?;
        if values.len() != dim {
            return Err(Error::parse(
                path,
                lineno,
                format!("vector has {} values, header declares {}", values.len(), dim),
            ));
        }
        if let Some(index) = vocab_index_non_reserved(vocab, word) {
            table.matrix.row_mut(index).copy_from_slice(&values);
            overlap += 1;
        }
    }
    if rows_seen != declared {
        return Err(Error::parse(
            path,
            rows_seen + 1,
            format!("header declares {declared} vectors, file has {rows_seen}"),
        ));
    }
    table.pretrained_overlap = Some(overlap);
    if overlap == 0 {
        table.warning =
            Some("no vocabulary tokens found in the pretrained embedding file".to_string());
    }
    Ok(table)
}

/// Reserved rows (<PAD>, <UNK>) never take pretrained vectors.
fn vocab_index_non_reserved(vocab: &Vocabulary, word: &str) -> Option<usize> {
    if !vocab.contains(word) {
        return None;
    }
    let idx = vocab.index_of(word);
    if idx == Vocabulary::PAD || idx == Vocabulary::UNK {
        None
    } else {
        Some(idx)
    }
}

/// Map tokens to vocabulary indices, truncated or padded to `t_max`.
pub fn token_ids(vocab: &Vocabulary, tokens: &[String], t_max: usize) -> Vec<usize> {
    let mut ids = Vec::with_capacity(t_max);
    for t in tokens.iter().take(t_max) {
        ids.push(vocab.index_of(t));
    }
    ids.resize(t_max, Vocabulary::PAD);
    ids
}

/// Stack embedding rows for the id sequence into a `t_max x D` matrix.
pub fn embed_ids(table: &EmbeddingTable, ids: &[usize]) -> Matrix {
    let dim = table.dim();
    let mut out = Matrix::zeros(ids.len(), dim);
    for (r, &id) in ids.iter().enumerate() {
        out.row_mut(r).copy_from_slice(table.matrix.row(id));
    }
    out
}

/// Spec-shaped lookup: tokens through the vocabulary, padded/truncated to
/// `t_max`, one embedding row per position.
pub fn lookup(
    table: &EmbeddingTable,
    tokens: &[String],
    vocab: &Vocabulary,
    t_max: usize,
) -> Matrix {
    embed_ids(table, &token_ids(vocab, tokens, t_max))
}

/// Export in word2vec text format with full round-trip precision.
pub fn to_word2vec_text(table: &EmbeddingTable, vocab: &Vocabulary) -> String {
    let mut out = String::new();
    out.push_str(&format!("{} {}\n", vocab.len(), table.dim()));
    for i in 0..vocab.len() {
        out.push_str(vocab.token(i));
        for v in table.matrix.row(i) {
            out.push_str(&format!(" {v:.16e}"));
        }
        out.push('\n');
    }
    out
}
