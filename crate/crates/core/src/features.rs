//! TF-IDF vectors over uni/bi/trigrams and chi-squared feature selection.
//! These feed the linear baselines and the fixed auxiliary channel of the
//! combined MLP-CNN model.

use std::collections::{BTreeMap, HashMap};

use crate::error::{Error, Result};

/// Sorted sparse vector.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseVec {
    pub dim: usize,
    /// (column, value) pairs with strictly increasing columns.
    pub entries: Vec<(usize, f64)>,
}

impl SparseVec {
    pub fn empty(dim: usize) -> Self {
        SparseVec { dim, entries: Vec::new() }
    }

    pub fn l2_norm(&self) -> f64 {
        self.entries.iter().map(|(_, v)| v * v).sum::<f64>().sqrt()
    }

    pub fn get(&self, column: usize) -> f64 {
        self.entries
            .binary_search_by_key(&column, |(c, _)| *c)
            .map(|i| self.entries[i].1)
            .unwrap_or(0.0)
    }

    /// Values at the given (sorted) columns, as a dense vector.
    pub fn dense_at(&self, columns: &[usize]) -> Vec<f64> {
        columns.iter().map(|&c| self.get(c)).collect()
    }

    /// Re-index onto the given sorted column subset.
    pub fn project(&self, columns: &[usize]) -> SparseVec {
        let mut entries = Vec::new();
        for (new_col, &old_col) in columns.iter().enumerate() {
            let v = self.get(old_col);
            if v != 0.0 {
                entries.push((new_col, v));
            }
        }
        SparseVec { dim: columns.len(), entries }
    }
}

/// Contiguous 1-, 2-, and 3-grams, joined with single spaces, with counts.
pub fn extract_ngrams(tokens: &[String]) -> BTreeMap<String, usize> {
    let mut counts = BTreeMap::new();
    for n in 1..=3usize {
        if tokens.len() < n {
            break;
        }
        for window in tokens.windows(n) {
            *counts.entry(window.join(" ")).or_insert(0) += 1;
        }
    }
    counts
}

/// N-gram vocabulary with document frequencies, fitted on training documents
/// only. Columns are assigned in lexicographic n-gram order.
#[derive(Debug, Clone)]
pub struct NgramVocab {
    index: HashMap<String, usize>,
    ngrams: Vec<String>,
    doc_freq: Vec<u32>,
    n_docs: usize,
}

impl NgramVocab {
    pub fn len(&self) -> usize {
        self.ngrams.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ngrams.is_empty()
    }

    pub fn n_docs(&self) -> usize {
        self.n_docs
    }

    pub fn ngram(&self, column: usize) -> &str {
        &self.ngrams[column]
    }

    pub fn ngrams(&self) -> &[String] {
        &self.ngrams
    }

    pub fn doc_freq(&self, column: usize) -> u32 {
        self.doc_freq[column]
    }

    pub fn column(&self, ngram: &str) -> Option<usize> {
        self.index.get(ngram).copied()
    }

    /// Smoothed inverse document frequency: ln((1 + N) / (1 + df)) + 1.
    pub fn idf(&self, column: usize) -> f64 {
        ((1 + self.n_docs) as f64 / (1 + self.doc_freq[column]) as f64).ln() + 1.0
    }

    /// Rebuild from serialized parts (ordered n-grams with their document
    /// frequencies).
    pub fn from_parts(ngrams: Vec<String>, doc_freq: Vec<u32>, n_docs: usize) -> Result<Self> {
        if ngrams.len() != doc_freq.len() {
            return Err(Error::invalid("ngram and document-frequency lengths differ"));
        }
        let mut index = HashMap::with_capacity(ngrams.len());
        for (i, g) in ngrams.iter().enumerate() {
            if index.insert(g.clone(), i).is_some() {
                return Err(Error::invalid(format!("duplicate ngram {g:?}")));
            }
        }
        Ok(NgramVocab { index, ngrams, doc_freq, n_docs })
    }

    /// TSV export: `ngram<TAB>index<TAB>df<TAB>idf`.
    pub fn to_tsv(&self) -> String {
        let mut out = String::new();
        for (i, g) in self.ngrams.iter().enumerate() {
            out.push_str(&format!("{g}\t{i}\t{}\t{}\n", self.doc_freq[i], self.idf(i)));
        }
        out
    }
}

/// Fit the n-gram vocabulary and document frequencies on training documents.
pub fn fit_tfidf<'a, I>(docs: I) -> Result<NgramVocab>
where
    I: IntoIterator<Item = &'a [String]>,
{
    let mut df: BTreeMap<String, u32> = BTreeMap::new();
    let mut n_docs = 0usize;
    for tokens in docs {
        n_docs += 1;
        for gram in extract_ngrams(tokens).into_keys() {
            *df.entry(gram).or_insert(0) += 1;
        }
    }
    if n_docs == 0 {
        return Err(Error::invalid("cannot fit TF-IDF on an empty training set"));
    }
    let mut index = HashMap::with_capacity(df.len());
    let mut ngrams = Vec::with_capacity(df.len());
    let mut doc_freq = Vec::with_capacity(df.len());
    for (gram, freq) in df {
        index.insert(gram.clone(), ngrams.len());
        ngrams.push(gram);
        doc_freq.push(freq);
    }
    Ok(NgramVocab { index, ngrams, doc_freq, n_docs })
}

/// TF-IDF transform: raw in-document count times idf, L2-normalized. N-grams
/// unknown to the vocabulary are dropped.
pub fn transform_tfidf(vocab: &NgramVocab, tokens: &[String]) -> SparseVec {
    let mut entries: Vec<(usize, f64)> = extract_ngrams(tokens)
        .into_iter()
        .filter_map(|(gram, count)| {
            vocab.column(&gram).map(|c| (c, count as f64 * vocab.idf(c)))
        })
        .collect();
    entries.sort_unstable_by_key(|(c, _)| *c);
    let mut vec = SparseVec { dim: vocab.len(), entries };
    let norm = vec.l2_norm();
    if norm > 0.0 {
        for (_, v) in &mut vec.entries {
            *v /= norm;
        }
    }
    vec
}

/// Chi-squared scores per feature over nonnegative values: for each class,
/// observed is the value mass inside the class, expected follows the class
/// prior. Classes with zero expected mass are skipped.
pub fn chi2_scores(x: &[SparseVec], y: &[usize], num_classes: usize) -> Result<Vec<f64>> {
    if x.len() != y.len() {
        return Err(Error::invalid("feature and label counts differ"));
    }
    if x.is_empty() {
        return Err(Error::invalid("chi-squared selection needs at least one document"));
    }
    let dim = x[0].dim;
    let mut class_counts = vec![0usize; num_classes];
    for &label in y {
        if label >= num_classes {
            return Err(Error::invalid(format!("label {label} out of range")));
        }
        class_counts[label] += 1;
    }

    // observed[c][j] = sum of feature j over documents of class c.
    let mut observed = vec![vec![0.0; dim]; num_classes];
    for (vec, &label) in x.iter().zip(y) {
        if vec.dim != dim {
            return Err(Error::invalid("inconsistent feature dimensions"));
        }
        for &(c, v) in &vec.entries {
            if v < 0.0 {
                return Err(Error::invalid("chi-squared requires nonnegative features"));
            }
            observed[label][c] += v;
        }
    }

    let n = x.len() as f64;
    let mut scores = vec![0.0; dim];
    for j in 0..dim {
        let total: f64 = (0..num_classes).map(|c| observed[c][j]).sum();
        let mut chi2 = 0.0;
        for c in 0..num_classes {
            let expected = total * (class_counts[c] as f64 / n);
            if expected == 0.0 {
                continue;
            }
            let diff = observed[c][j] - expected;
            chi2 += diff * diff / expected;
        }
        scores[j] = chi2;
    }
    Ok(scores)
}

/// Columns of the k highest chi-squared scores, ties toward the smaller
/// index, returned sorted. Asking for more features than exist returns all.
pub fn chi2_select(x: &[SparseVec], y: &[usize], num_classes: usize, k: usize) -> Result<Vec<usize>> {
    if k == 0 {
        return Err(Error::invalid("chi-squared selection needs k >= 1"));
    }
    let scores = chi2_scores(x, y, num_classes)?;
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| {
        scores[b].partial_cmp(&scores[a]).expect("chi2 scores are finite").then(a.cmp(&b))
    });
    let mut selected: Vec<usize> = order.into_iter().take(k).collect();
    selected.sort_unstable();
    Ok(selected)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toks(words: &[&str]) -> Vec<String> {
        words.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn ngram_extraction_examples() {
        let grams = extract_ngrams(&toks(&["a", "b", "c"]));
        let keys: Vec<&str> = grams.keys().map(String::as_str).collect();
        assert_eq!(keys, vec!["a", "a b", "a b c", "b", "b c", "c"]);
        assert!(grams.values().all(|&c| c == 1));

        assert_eq!(extract_ngrams(&toks(&["a"])).len(), 1);
        assert!(extract_ngrams(&[]).is_empty());
    }

    #[test]
    fn ngram_counts_are_multiset() {
        let grams = extract_ngrams(&toks(&["a", "a", "a"]));
        assert_eq!(grams["a"], 3);
        assert_eq!(grams["a a"], 2);
        assert_eq!(grams["a a a"], 1);
    }

    #[test]
    fn idf_examples() {
        let docs = [toks(&["t"]), toks(&["t"]), toks(&["t"])];
        let vocab = fit_tfidf(docs.iter().map(Vec::as_slice)).unwrap();
        // Present in all 3 docs: ln(4/4) + 1 = 1.
        assert!((vocab.idf(vocab.column("t").unwrap()) - 1.0).abs() < 1e-12);

        let docs = [toks(&["t"]), toks(&["x"]), toks(&["y"])];
        let vocab = fit_tfidf(docs.iter().map(Vec::as_slice)).unwrap();
        // Present in 1 of 3 docs: ln(4/2) + 1.
        let idf = vocab.idf(vocab.column("t").unwrap());
        assert!((idf - (2.0_f64.ln() + 1.0)).abs() < 1e-12);
        assert!((idf - 1.693147).abs() < 1e-6);
        assert!(vocab.column("unseen").is_none());
    }

    #[test]
    fn transform_single_known_unigram_normalizes_to_one() {
        let docs = [toks(&["hello", "world"])];
        let vocab = fit_tfidf(docs.iter().map(Vec::as_slice)).unwrap();
        let v = transform_tfidf(&vocab, &toks(&["hello"]));
        assert_eq!(v.entries.len(), 1);
        assert!((v.entries[0].1 - 1.0).abs() < 1e-12);
    }

    #[test]
    fn transform_unknown_document_is_empty() {
        let docs = [toks(&["hello"])];
        let vocab = fit_tfidf(docs.iter().map(Vec::as_slice)).unwrap();
        let v = transform_tfidf(&vocab, &toks(&["zzz", "qqq"]));
        assert!(v.entries.is_empty());
    }

    #[test]
    fn transform_two_doc_corpus_oracle() {
        // Corpus {(a b), (a)}; transform of "a b" has raw values
        // a: 1*1, b: 1*(1+ln(3/2)), "a b": 1*(1+ln(3/2)), then L2 normalization.
        // Expected values recomputed independently from that formula.
        let docs = [toks(&["a", "b"]), toks(&["a"])];
        let vocab = fit_tfidf(docs.iter().map(Vec::as_slice)).unwrap();
        let v = transform_tfidf(&vocab, &toks(&["a", "b"]));
        let idf_rare = 1.5_f64.ln() + 1.0;
        let norm = (1.0 + 2.0 * idf_rare * idf_rare).sqrt();
        let expect = |g: &str, raw: f64| {
            let col = vocab.column(g).unwrap();
            assert!((v.get(col) - raw / norm).abs() < 1e-12, "{g}");
        };
        expect("a", 1.0);
        expect("b", idf_rare);
        expect("a b", idf_rare);
        assert!((v.get(vocab.column("a").unwrap()) - 0.4494364165).abs() < 1e-9);
        assert!((v.get(vocab.column("b").unwrap()) - 0.6316672017).abs() < 1e-9);
    }

    #[test]
    fn transform_output_is_unit_norm_or_empty() {
        let docs = [toks(&["a", "b", "c"]), toks(&["b", "c", "d"]), toks(&["d", "e"])];
        let vocab = fit_tfidf(docs.iter().map(Vec::as_slice)).unwrap();
        for doc in &docs {
            let v = transform_tfidf(&vocab, doc);
            assert!((v.l2_norm() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn fit_and_transform_are_deterministic() {
        let docs = [toks(&["b", "a"]), toks(&["a", "c"])];
        let v1 = fit_tfidf(docs.iter().map(Vec::as_slice)).unwrap();
        let v2 = fit_tfidf(docs.iter().map(Vec::as_slice)).unwrap();
        assert_eq!(v1.ngrams(), v2.ngrams());
        assert_eq!(
            transform_tfidf(&v1, &docs[0]).entries,
            transform_tfidf(&v2, &docs[0]).entries
        );
    }

    fn one_hot(dim: usize, col: usize) -> SparseVec {
        SparseVec { dim, entries: vec![(col, 1.0)] }
    }

    #[test]
    fn chi2_class_specific_feature_beats_uniform_feature() {
        // Feature 0 only in class 0; feature 1 in every document.
        let x = vec![
            SparseVec { dim: 2, entries: vec![(0, 1.0), (1, 1.0)] },
            SparseVec { dim: 2, entries: vec![(0, 1.0), (1, 1.0)] },
            SparseVec { dim: 2, entries: vec![(1, 1.0)] },
            SparseVec { dim: 2, entries: vec![(1, 1.0)] },
        ];
        let y = vec![0, 0, 1, 1];
        let scores = chi2_scores(&x, &y, 2).unwrap();
        assert!(scores[0] > scores[1]);
        assert!(scores[1].abs() < 1e-12); // identical per-class means
    }

    #[test]
    fn chi2_matches_brute_force_contingency() {
        // 4 docs, 2 classes, 3 features with hand-built counts.
        let x = vec![
            SparseVec { dim: 3, entries: vec![(0, 2.0), (1, 1.0)] },
            SparseVec { dim: 3, entries: vec![(0, 1.0), (2, 3.0)] },
            SparseVec { dim: 3, entries: vec![(1, 2.0)] },
            SparseVec { dim: 3, entries: vec![(1, 1.0), (2, 1.0)] },
        ];
        let y = vec![0, 0, 1, 1];
        let scores = chi2_scores(&x, &y, 2).unwrap();

        // Independent brute-force: explicit per-class observed/expected sums.
        for j in 0..3 {
            let mut observed = [0.0f64; 2];
            for (v, &label) in x.iter().zip(&y) {
                observed[label] += v.get(j);
            }
            let total = observed[0] + observed[1];
            let mut expected_chi2 = 0.0;
            for c in 0..2 {
                let expected = total * (2.0 / 4.0);
                if expected > 0.0 {
                    expected_chi2 += (observed[c] - expected).powi(2) / expected;
                }
            }
            assert_eq!(scores[j], expected_chi2, "feature {j}");
        }
    }

    #[test]
    fn chi2_select_orders_and_truncates() {
        let x = vec![one_hot(3, 0), one_hot(3, 0), one_hot(3, 1), one_hot(3, 2)];
        let y = vec![0, 0, 1, 1];
        let picked = chi2_select(&x, &y, 2, 2).unwrap();
        assert_eq!(picked.len(), 2);
        assert!(picked.windows(2).all(|w| w[0] < w[1]));
        // k larger than the feature count returns every column.
        let all = chi2_select(&x, &y, 2, 99).unwrap();
        assert_eq!(all, vec![0, 1, 2]);
    }

    #[test]
    fn ngram_vocab_tsv_export_lists_every_column() {
        let docs = [toks(&["a", "b"]), toks(&["a"])];
        let vocab = fit_tfidf(docs.iter().map(Vec::as_slice)).unwrap();
        let tsv = vocab.to_tsv();
        assert_eq!(tsv.lines().count(), vocab.len());
        let first = tsv.lines().next().unwrap();
        let cols: Vec<&str> = first.split('\t').collect();
        assert_eq!(cols.len(), 4); // ngram, index, df, idf
        assert_eq!(cols[1], "0");
    }

    #[test]
    fn sparse_projection_helpers() {
        let v = SparseVec { dim: 5, entries: vec![(1, 0.5), (3, 0.25)] };
        assert_eq!(v.dense_at(&[0, 1, 3]), vec![0.0, 0.5, 0.25]);
        let p = v.project(&[1, 2, 3]);
        assert_eq!(p.dim, 3);
        assert_eq!(p.entries, vec![(0, 0.5), (2, 0.25)]);
    }
}
