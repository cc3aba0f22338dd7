//! Evaluation: confusion matrices, accuracy, macro-F1, rank-based ROC AUC,
//! per-class precision-recall curves, class distributions, and the report
//! file formats (metrics.json plus CSV exports).

use serde::Serialize;

use crate::corpus::LabelSchema;
use crate::error::{Error, Result};

/// Entry (i, j) counts examples with gold class i predicted as class j.
pub fn confusion_matrix(gold: &[usize], pred: &[usize], k: usize) -> Result<Vec<Vec<usize>>> {
    if gold.len() != pred.len() {
        return Err(Error::invalid("gold and prediction lengths differ"));
    }
    let mut matrix = vec![vec![0usize; k]; k];
    for (&g, &p) in gold.iter().zip(pred) {
        if g >= k || p >= k {
            return Err(Error::invalid(format!("label {} outside 0..{}", g.max(p), k)));
        }
        matrix[g][p] += 1;
    }
    Ok(matrix)
}

fn matrix_total(confusion: &[Vec<usize>]) -> usize {
    confusion.iter().map(|row| row.iter().sum::<usize>()).sum()
}

/// Trace over total.
pub fn accuracy(confusion: &[Vec<usize>]) -> Result<f64> {
    let total = matrix_total(confusion);
    if total == 0 {
        return Err(Error::invalid("cannot compute accuracy of an empty confusion matrix"));
    }
    let trace: usize = confusion.iter().enumerate().map(|(i, row)| row[i]).sum();
    Ok(trace as f64 / total as f64)
}

/// Unweighted mean of per-class F1; a class with zero precision+recall
/// contributes zero.
pub fn macro_f1(confusion: &[Vec<usize>]) -> Result<f64> {
    let k = confusion.len();
    if matrix_total(confusion) == 0 {
        return Err(Error::invalid("cannot compute macro-F1 of an empty confusion matrix"));
    }
    let mut sum = 0.0;
    for c in 0..k {
        let col: usize = confusion.iter().map(|row| row[c]).sum();
        let row: usize = confusion[c].iter().sum();
        let hit = confusion[c][c] as f64;
        let precision = if col > 0 { hit / col as f64 } else { 0.0 };
        let recall = if row > 0 { hit / row as f64 } else { 0.0 };
        if precision + recall > 0.0 {
            sum += 2.0 * precision * recall / (precision + recall);
        }
    }
    Ok(sum / k as f64)
}

/// Rank-based (Mann-Whitney) AUC: pairs where a positive outscores a negative
/// count 1, ties count 1/2. Every intermediate is a half-integer, so this is
/// exact.
pub fn roc_auc(scores: &[f64], positive: &[bool]) -> Result<f64> {
    if scores.len() != positive.len() {
        return Err(Error::invalid("score and label lengths differ"));
    }
    let n_pos = positive.iter().filter(|&&p| p).count();
    let n_neg = positive.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(Error::invalid("ROC AUC needs both classes present"));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].partial_cmp(&scores[b]).expect("scores are finite"));

    let mut won = 0.0f64;
    let mut negatives_below = 0usize;
    let mut i = 0;
    while i < order.len() {
        // One tie group at a time.
        let mut j = i;
        let mut group_pos = 0usize;
        let mut group_neg = 0usize;
        while j < order.len() && scores[order[j]] == scores[order[i]] {
            if positive[order[j]] {
                group_pos += 1;
            } else {
                group_neg += 1;
            }
            j += 1;
        }
        won += group_pos as f64 * negatives_below as f64;
        won += 0.5 * group_pos as f64 * group_neg as f64;
        negatives_below += group_neg;
        i = j;
    }
    Ok(won / (n_pos as f64 * n_neg as f64))
}

/// Precision-recall curve points (recall, precision) over descending score
/// thresholds (ties grouped), plus average precision
/// sum_i (R_i - R_{i-1}) P_i.
pub fn pr_curve(scores: &[f64], positive: &[bool]) -> Result<(Vec<(f64, f64)>, f64)> {
    if scores.len() != positive.len() {
        return Err(Error::invalid("score and label lengths differ"));
    }
    let total_pos = positive.iter().filter(|&&p| p).count();
    if total_pos == 0 {
        return Err(Error::invalid("precision-recall curve needs at least one positive"));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].partial_cmp(&scores[a]).expect("scores are finite"));

    let mut points = Vec::new();
    let mut average_precision = 0.0;
    let mut tp = 0usize;
    let mut fp = 0usize;
    let mut last_recall = 0.0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j < order.len() && scores[order[j]] == scores[order[i]] {
            if positive[order[j]] {
                tp += 1;
            } else {
                fp += 1;
            }
            j += 1;
        }
        let recall = tp as f64 / total_pos as f64;
        let precision = tp as f64 / (tp + fp) as f64;
        points.push((recall, precision));
        average_precision += (recall - last_recall) * precision;
        last_recall = recall;
        i = j;
    }
    Ok((points, average_precision))
}

/// Per-class counts in schema order.
pub fn class_distribution(labels: &[usize], schema: &LabelSchema) -> Vec<usize> {
    let mut counts = vec![0usize; schema.len()];
    for &label in labels {
        counts[label] += 1;
    }
    counts
}

#[derive(Debug, Clone, Serialize)]
pub struct ClassPr {
    pub class_index: usize,
    pub class_name: String,
    pub points: Vec<(f64, f64)>,
    pub average_precision: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct EvalReport {
    pub accuracy: f64,
    pub macro_f1: f64,
    /// Binary tasks only: AUC with class 0 as the positive class.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub auc: Option<f64>,
    #[serde(skip)]
    pub confusion: Vec<Vec<usize>>,
    #[serde(skip)]
    pub pr_curves: Vec<ClassPr>,
    #[serde(skip)]
    pub class_names: Vec<String>,
    #[serde(skip)]
    pub class_counts: Vec<usize>,
}

/// Assemble the full report from gold labels and per-example probability (or
/// score) vectors. PR curves are emitted for every class with at least one
/// positive example.
pub fn build_report(
    gold: &[usize],
    pred: &[usize],
    scores: &[Vec<f64>],
    schema: &LabelSchema,
) -> Result<EvalReport> {
    if gold.is_empty() {
        return Err(Error::invalid("cannot evaluate an empty dataset"));
    }
    if gold.len() != scores.len() {
        return Err(Error::invalid("gold and score lengths differ"));
    }
    let k = schema.len();
    let confusion = confusion_matrix(gold, pred, k)?;
    let accuracy = accuracy(&confusion)?;
    let macro_f1 = macro_f1(&confusion)?;

    let auc = if k == 2 {
        let positive: Vec<bool> = gold.iter().map(|&g| g == 0).collect();
        if positive.iter().any(|&p| p) && positive.iter().any(|&p| !p) {
            let s: Vec<f64> = scores.iter().map(|p| p[0]).collect();
            Some(roc_auc(&s, &positive)?)
        } else {
            None
        }
    } else {
        None
    };

    let mut pr_curves = Vec::new();
    for c in 0..k {
        let positive: Vec<bool> = gold.iter().map(|&g| g == c).collect();
        if !positive.iter().any(|&p| p) {
            continue;
        }
        let s: Vec<f64> = scores.iter().map(|p| p[c]).collect();
        let (points, average_precision) = pr_curve(&s, &positive)?;
        pr_curves.push(ClassPr {
            class_index: c,
            class_name: schema.name(c).to_string(),
            points,
            average_precision,
        });
    }

    Ok(EvalReport {
        accuracy,
        macro_f1,
        auc,
        confusion,
        pr_curves,
        class_names: schema.classes().to_vec(),
        class_counts: class_distribution(gold, schema),
    })
}

impl EvalReport {
    /// Scalar metrics as JSON.
    pub fn metrics_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    /// Confusion matrix CSV: header row of predicted classes, one row per
    /// actual class.
    pub fn confusion_csv(&self) -> String {
        let mut out = String::from("actual\\predicted");
        for name in &self.class_names {
            out.push(',');
            out.push_str(&csv_field(name));
        }
        out.push('\n');
        for (i, row) in self.confusion.iter().enumerate() {
            out.push_str(&csv_field(&self.class_names[i]));
            for v in row {
                out.push_str(&format!(",{v}"));
            }
            out.push('\n');
        }
        out
    }

    /// PR curve points as `class,recall,precision` rows, with one
    /// `class,ap,<value>` summary row per class.
    pub fn pr_curves_csv(&self) -> String {
        let mut out = String::from("class,recall,precision\n");
        for curve in &self.pr_curves {
            let name = csv_field(&curve.class_name);
            for (recall, precision) in &curve.points {
                out.push_str(&format!("{name},{recall},{precision}\n"));
            }
            out.push_str(&format!("{name},ap,{}\n", curve.average_precision));
        }
        out
    }

    /// `class,count,fraction` rows.
    pub fn class_distribution_csv(&self) -> String {
        let total: usize = self.class_counts.iter().sum();
        let mut out = String::from("class,count,fraction\n");
        for (name, &count) in self.class_names.iter().zip(&self.class_counts) {
            let fraction = if total > 0 { count as f64 / total as f64 } else { 0.0 };
            out.push_str(&format!("{},{count},{fraction}\n", csv_field(name)));
        }
        out
    }
}

fn csv_field(s: &str) -> String {
    if s.contains(',') || s.contains('"') || s.contains('\n') {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::Rng;

    #[test]
    fn confusion_examples() {
        assert_eq!(confusion_matrix(&[0, 1], &[0, 1], 2).unwrap(), vec![vec![1, 0], vec![0, 1]]);
        assert_eq!(confusion_matrix(&[0, 0], &[1, 1], 2).unwrap(), vec![vec![0, 2], vec![0, 0]]);
        assert_eq!(confusion_matrix(&[], &[], 2).unwrap(), vec![vec![0, 0], vec![0, 0]]);
        assert!(confusion_matrix(&[5], &[0], 2).is_err());
        assert!(confusion_matrix(&[0, 1], &[0], 2).is_err());
    }

    #[test]
    fn accuracy_and_macro_f1_examples() {
        let identity = vec![vec![5, 0], vec![0, 5]];
        assert_eq!(accuracy(&identity).unwrap(), 1.0);
        assert_eq!(macro_f1(&identity).unwrap(), 1.0);

        let balanced = vec![vec![2, 2], vec![2, 2]];
        assert_eq!(accuracy(&balanced).unwrap(), 0.5);
        assert!((macro_f1(&balanced).unwrap() - 0.5).abs() < 1e-12);

        // Hand arithmetic: acc 0.7; F1 = (2/3 + 8/11) / 2.
        let uneven = vec![vec![3, 1], vec![2, 4]];
        assert!((accuracy(&uneven).unwrap() - 0.7).abs() < 1e-12);
        assert!((macro_f1(&uneven).unwrap() - 0.69697).abs() < 1e-5);

        assert!(accuracy(&[Vec::new()]).is_err());
    }

    #[test]
    fn accuracy_equals_one_minus_offdiagonal_mass() {
        let m = vec![vec![7, 2, 1], vec![0, 5, 3], vec![2, 2, 8]];
        let total: usize = 30;
        let off: usize = 2 + 1 + 3 + 2 + 2;
        assert!((accuracy(&m).unwrap() - (1.0 - off as f64 / total as f64)).abs() < 1e-15);
    }

    #[test]
    fn auc_perfect_and_all_ties() {
        let scores = [0.9, 0.8, 0.2, 0.1];
        let labels = [true, true, false, false];
        assert_eq!(roc_auc(&scores, &labels).unwrap(), 1.0);
        let flat = [0.5, 0.5, 0.5, 0.5];
        assert_eq!(roc_auc(&flat, &labels).unwrap(), 0.5);
        assert!(roc_auc(&[0.1, 0.2], &[true, true]).is_err());
    }

    /// Brute-force pairwise AUC oracle.
    fn auc_brute(scores: &[f64], positive: &[bool]) -> f64 {
        let mut num = 0.0;
        let mut pairs = 0.0;
        for (i, &pi) in positive.iter().enumerate() {
            if !pi {
                continue;
            }
            for (j, &pj) in positive.iter().enumerate() {
                if pj {
                    continue;
                }
                pairs += 1.0;
                if scores[i] > scores[j] {
                    num += 1.0;
                } else if scores[i] == scores[j] {
                    num += 0.5;
                }
            }
        }
        num / pairs
    }

    #[test]
    fn auc_matches_brute_force_with_ties() {
        let mut rng = Rng::new(2024);
        for _ in 0..100 {
            let n = 5 + rng.below(60);
            // Coarse score grid forces ties.
            let scores: Vec<f64> = (0..n).map(|_| rng.below(7) as f64 / 7.0).collect();
            let mut labels: Vec<bool> = (0..n).map(|_| rng.below(2) == 0).collect();
            labels[0] = true;
            labels[1] = false;
            assert_eq!(roc_auc(&scores, &labels).unwrap(), auc_brute(&scores, &labels));
        }
    }

    #[test]
    fn auc_complement_symmetry_and_monotone_invariance() {
        let mut rng = Rng::new(55);
        for _ in 0..50 {
            let n = 6 + rng.below(40);
            let scores: Vec<f64> = (0..n).map(|_| rng.below(9) as f64).collect();
            let mut labels: Vec<bool> = (0..n).map(|_| rng.below(2) == 0).collect();
            labels[0] = true;
            labels[1] = false;
            let auc = roc_auc(&scores, &labels).unwrap();
            let negated: Vec<f64> = scores.iter().map(|s| -s).collect();
            assert!((auc + roc_auc(&negated, &labels).unwrap() - 1.0).abs() < 1e-12);
            // Strictly increasing transform preserves ranks exactly.
            let transformed: Vec<f64> = scores.iter().map(|s| (s * 0.3).exp() + 2.0 * s).collect();
            assert_eq!(auc, roc_auc(&transformed, &labels).unwrap());
        }
    }

    #[test]
    fn pr_curve_examples() {
        let (_, ap) = pr_curve(&[0.9, 0.8, 0.3, 0.2], &[true, true, false, false]).unwrap();
        assert_eq!(ap, 1.0);

        // Single positive ranked last among n: AP = 1/n.
        let scores = [0.9, 0.8, 0.7, 0.1];
        let labels = [false, false, false, true];
        let (_, ap) = pr_curve(&scores, &labels).unwrap();
        assert!((ap - 0.25).abs() < 1e-15);

        assert!(pr_curve(&[0.5], &[false]).is_err());
    }

    /// Brute-force AP oracle: recompute counts from scratch per threshold.
    fn ap_brute(scores: &[f64], positive: &[bool]) -> f64 {
        let mut thresholds: Vec<f64> = scores.to_vec();
        thresholds.sort_by(|a, b| b.partial_cmp(a).unwrap());
        thresholds.dedup();
        let total_pos = positive.iter().filter(|&&p| p).count() as f64;
        let mut ap = 0.0;
        let mut last_recall = 0.0;
        for t in thresholds {
            let mut tp = 0usize;
            let mut fp = 0usize;
            for (s, &p) in scores.iter().zip(positive) {
                if *s >= t {
                    if p {
                        tp += 1;
                    } else {
                        fp += 1;
                    }
                }
            }
            let recall = tp as f64 / total_pos;
            let precision = tp as f64 / (tp + fp) as f64;
            ap += (recall - last_recall) * precision;
            last_recall = recall;
        }
        ap
    }

    #[test]
    fn average_precision_matches_brute_force() {
        let mut rng = Rng::new(31);
        for _ in 0..60 {
            let n = 20;
            let scores: Vec<f64> = (0..n).map(|_| rng.below(6) as f64 / 6.0).collect();
            let mut labels: Vec<bool> = (0..n).map(|_| rng.below(2) == 0).collect();
            labels[0] = true;
            let (_, ap) = pr_curve(&scores, &labels).unwrap();
            assert_eq!(ap, ap_brute(&scores, &labels));
        }
    }

    fn schema6() -> LabelSchema {
        LabelSchema::new(
            ["Aff", "Don", "Inf", "Sym", "Oth", "Not"].iter().map(|s| s.to_string()).collect(),
        )
        .unwrap()
    }

    #[test]
    fn class_distribution_nepal_column() {
        // Nepal event class counts: 756, 1021, 351, 983, 1505, 6698 = 11314.
        let schema = schema6();
        let counts = [756usize, 1021, 351, 983, 1505, 6698];
        let mut labels = Vec::new();
        for (c, &n) in counts.iter().enumerate() {
            labels.extend(std::iter::repeat_n(c, n));
        }
        let dist = class_distribution(&labels, &schema);
        assert_eq!(dist, counts.to_vec());
        assert_eq!(dist.iter().sum::<usize>(), 11_314);

        assert_eq!(class_distribution(&[], &schema), vec![0; 6]);
        assert_eq!(class_distribution(&[3], &schema)[3], 1);
    }

    #[test]
    fn report_binary_includes_auc_multiclass_does_not() {
        let schema = LabelSchema::binary();
        let gold = vec![0, 0, 1, 1];
        let pred = vec![0, 1, 1, 1];
        let scores = vec![
            vec![0.9, 0.1],
            vec![0.4, 0.6],
            vec![0.2, 0.8],
            vec![0.1, 0.9],
        ];
        let report = build_report(&gold, &pred, &scores, &schema).unwrap();
        assert!(report.auc.is_some());
        assert_eq!(report.accuracy, 0.75);
        assert!(report.metrics_json().contains("auc"));

        let schema = schema6();
        let gold = vec![0, 1, 2, 3, 4, 5];
        let pred = gold.clone();
        let scores: Vec<Vec<f64>> = gold
            .iter()
            .map(|&g| {
                let mut p = vec![0.1; 6];
                p[g] = 0.5;
                p
            })
            .collect();
        let report = build_report(&gold, &pred, &scores, &schema).unwrap();
        assert!(report.auc.is_none());
        assert!(!report.metrics_json().contains("auc"));
        assert_eq!(report.pr_curves.len(), 6);
    }

    #[test]
    fn csv_outputs_have_expected_shape() {
        let schema = LabelSchema::binary();
        let gold = vec![0, 1, 1];
        let pred = vec![0, 1, 0];
        let scores = vec![vec![0.8, 0.2], vec![0.3, 0.7], vec![0.6, 0.4]];
        let report = build_report(&gold, &pred, &scores, &schema).unwrap();
        let confusion = report.confusion_csv();
        assert_eq!(confusion.lines().count(), 3);
        let dist = report.class_distribution_csv();
        assert!(dist.contains("Informative,1,"));
        let pr = report.pr_curves_csv();
        assert!(pr.starts_with("class,recall,precision\n"));
        assert!(pr.contains(",ap,"));
    }
}
