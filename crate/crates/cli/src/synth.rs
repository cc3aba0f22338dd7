//! Synthetic tweet generator for desk-scale pipeline runs: each class owns a
//! disjoint keyword vocabulary, a shared noise pool supplies roughly 20% of
//! tokens, and a sprinkle of URLs, mentions, and digits exercises the
//! normalizer.

use std::collections::HashSet;

use crisiscnn_core::numerics::Rng;

/// The six class names used across the bundled examples.
pub const DEFAULT_CLASSES: [&str; 6] = [
    "Affected individual",
    "Donations and volunteering",
    "Infrastructure and utilities",
    "Sympathy and support",
    "Other useful information",
    "Not related or irrelevant",
];

pub struct SynthSpec {
    pub count: usize,
    pub num_classes: usize,
    pub seed: u64,
    pub words_per_class: usize,
    pub shared_words: usize,
    pub noise_fraction: f64,
}

impl Default for SynthSpec {
    fn default() -> Self {
        SynthSpec {
            count: 2000,
            num_classes: 6,
            seed: 7,
            words_per_class: 30,
            shared_words: 60,
            noise_fraction: 0.2,
        }
    }
}

pub struct SynthCorpus {
    /// (id, raw text, label name) rows in TSV column order.
    pub rows: Vec<(String, String, String)>,
    pub class_names: Vec<String>,
}

impl SynthCorpus {
    pub fn to_tsv(&self) -> String {
        let mut out = String::new();
        for (id, text, label) in &self.rows {
            out.push_str(&format!("{id}\t{text}\t{label}\n"));
        }
        out
    }

    pub fn schema_file(&self) -> String {
        let mut out = self.class_names.join("\n");
        out.push('\n');
        out
    }
}

/// A lowercase letters-only word; letters survive normalization unchanged.
fn random_word(rng: &mut Rng, used: &mut HashSet<String>) -> String {
    loop {
        let len = 4 + rng.below(5);
        let word: String =
            (0..len).map(|_| char::from(b'a' + rng.below(26) as u8)).collect();
        if used.insert(word.clone()) {
            return word;
        }
    }
}

pub fn generate(spec: &SynthSpec) -> SynthCorpus {
    assert!(spec.num_classes >= 2 && spec.num_classes <= DEFAULT_CLASSES.len());
    let class_names: Vec<String> =
        DEFAULT_CLASSES[..spec.num_classes].iter().map(|s| s.to_string()).collect();

    let mut rng = Rng::new(spec.seed);
    let mut used = HashSet::new();
    let class_vocab: Vec<Vec<String>> = (0..spec.num_classes)
        .map(|_| (0..spec.words_per_class).map(|_| random_word(&mut rng, &mut used)).collect())
        .collect();
    let shared: Vec<String> =
        (0..spec.shared_words).map(|_| random_word(&mut rng, &mut used)).collect();

    let mut rows = Vec::with_capacity(spec.count);
    for i in 0..spec.count {
        let class = i % spec.num_classes;
        let len = 8 + rng.below(9);
        let mut words = Vec::with_capacity(len + 2);
        for _ in 0..len {
            if rng.next_f64() < spec.noise_fraction {
                words.push(shared[rng.below(shared.len())].clone());
            } else {
                let vocab = &class_vocab[class];
                words.push(vocab[rng.below(vocab.len())].clone());
            }
        }
        // Raw-tweet texture that the normalizer must clean up.
        match rng.below(10) {
            0 => words.push(format!("http://t.co/{}", rng.below(1000))),
            1 => words.push(format!("@user{}", rng.below(100))),
            2 => words.push(format!("{}", rng.below(10_000))),
            3 => {
                let n = words.len();
                words[n - 1] = format!("{}!!", words[n - 1]);
            }
            _ => {}
        }
        rows.push((format!("t{i:05}"), words.join(" "), class_names[class].clone()));
    }
    SynthCorpus { rows, class_names }
}
