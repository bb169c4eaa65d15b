use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Area under the ROC curve as the Mann-Whitney statistic, with tied scores
/// given their average rank. `None` when either class is empty.
pub fn auc(positive: &[bool], scores: &[f64]) -> Option<f64> {
    let n_pos = positive.iter().filter(|&&p| p).count();
    let n_neg = positive.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return None;
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    let mut rank_sum = 0.0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && scores[order[j + 1]] == scores[order[i]] {
            j += 1;
        }
        // Ranks i+1..=j+1 share their mean.
        let avg = (i + j + 2) as f64 / 2.0;
        for &o in &order[i..=j] {
            if positive[o] {
                rank_sum += avg;
            }
        }
        i = j + 1;
    }
    let u = rank_sum - (n_pos * (n_pos + 1)) as f64 / 2.0;
    Some(u / (n_pos * n_neg) as f64)
}

/// ROC curve points `(false positive rate, true positive rate)`, one per
/// distinct threshold, starting at `(0, 0)`.
pub fn roc_curve(positive: &[bool], scores: &[f64]) -> Vec<(f64, f64)> {
    let n_pos = positive.iter().filter(|&&p| p).count().max(1) as f64;
    let n_neg = positive.iter().filter(|&&p| !p).count().max(1) as f64;
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    let mut pts = vec![(0.0, 0.0)];
    let (mut tp, mut fp) = (0.0, 0.0);
    for (k, &o) in order.iter().enumerate() {
        if positive[o] {
            tp += 1.0;
        } else {
            fp += 1.0;
        }
        let last_of_tie = order.get(k + 1).is_none_or(|&n| scores[n] != scores[o]);
        if last_of_tie {
            pts.push((fp / n_neg, tp / n_pos));
        }
    }
    pts
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RocCurve {
    /// Positive class of this one-vs-rest curve.
    pub class: usize,
    pub points: Vec<(f64, f64)>,
}

/// Metrics of one evaluation (typically one fold).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldMetrics {
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    /// Binary AUC, or the macro one-vs-rest AUC for more classes; absent
    /// when `y_true` holds a single class.
    pub auc: Option<f64>,
    pub roc: Vec<RocCurve>,
    pub confusion: Vec<Vec<usize>>,
}

/// `confusion[t][p]` counts samples of true class `t` predicted as `p`.
pub fn confusion_matrix(y_true: &[usize], y_pred: &[usize], n_classes: usize) -> Vec<Vec<usize>> {
    let mut m = vec![vec![0; n_classes]; n_classes];
    for (&t, &p) in y_true.iter().zip(y_pred) {
        m[t][p] += 1;
    }
    m
}

/// Accuracy, macro precision/recall/F1 over the classes present in either
/// vector, and AUC from `scores[i][c]` (per-class scores of sample `i`).
pub fn compute_metrics(y_true: &[usize], y_pred: &[usize], scores: &[Vec<f64>], n_classes: usize) -> Result<FoldMetrics> {
    if y_true.is_empty() || y_true.len() != y_pred.len() || y_true.len() != scores.len() {
        return Err(Error::InvalidArgument(format!(
            "metric inputs need equal non-zero lengths, got {}, {}, {}",
            y_true.len(),
            y_pred.len(),
            scores.len()
        )));
    }
    if y_true.iter().chain(y_pred).any(|&c| c >= n_classes) || scores.iter().any(|s| s.len() != n_classes) {
        return Err(Error::InvalidArgument(format!("labels or scores outside {n_classes} classes")));
    }
    let cm = confusion_matrix(y_true, y_pred, n_classes);
    let n = y_true.len() as f64;
    let accuracy = (0..n_classes).map(|c| cm[c][c]).sum::<usize>() as f64 / n;

    let present: BTreeSet<usize> = y_true.iter().chain(y_pred).copied().collect();
    let (mut p_sum, mut r_sum, mut f_sum) = (0.0, 0.0, 0.0);
    for &c in &present {
        let tp = cm[c][c] as f64;
        let predicted: usize = (0..n_classes).map(|t| cm[t][c]).sum();
        let actual: usize = cm[c].iter().sum();
        let p = if predicted > 0 { tp / predicted as f64 } else { 0.0 };
        let r = if actual > 0 { tp / actual as f64 } else { 0.0 };
        let f = if p + r > 0.0 { 2.0 * p * r / (p + r) } else { 0.0 };
        p_sum += p;
        r_sum += r;
        f_sum += f;
    }
    let k = present.len() as f64;

    let classes: BTreeSet<usize> = y_true.iter().copied().collect();
    let curve_classes: Vec<usize> = if n_classes == 2 { vec![1] } else { (0..n_classes).collect() };
    let mut roc = Vec::new();
    let mut aucs = Vec::new();
    for c in curve_classes {
        let pos: Vec<bool> = y_true.iter().map(|&t| t == c).collect();
        let s: Vec<f64> = scores.iter().map(|v| v[c]).collect();
        if let Some(a) = auc(&pos, &s) {
            aucs.push(a);
            roc.push(RocCurve {
                class: c,
                points: roc_curve(&pos, &s),
            });
        }
    }
    let auc = (classes.len() > 1 && !aucs.is_empty()).then(|| aucs.iter().sum::<f64>() / aucs.len() as f64);

    Ok(FoldMetrics {
        accuracy,
        precision: p_sum / k,
        recall: r_sum / k,
        f1: f_sum / k,
        auc,
        roc,
        confusion: cm,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanStd {
    pub mean: f64,
    /// Population standard deviation.
    pub std: f64,
}

impl MeanStd {
    pub fn of(values: &[f64]) -> Self {
        let n = values.len().max(1) as f64;
        let mean = values.iter().sum::<f64>() / n;
        let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
        MeanStd { mean, std: var.sqrt() }
    }
}

/// Metrics aggregated over folds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub accuracy: MeanStd,
    pub precision: MeanStd,
    pub recall: MeanStd,
    pub f1: MeanStd,
    /// Over the folds where AUC was defined.
    pub auc: Option<MeanStd>,
    pub folds: Vec<FoldMetrics>,
}

impl MetricsReport {
    pub fn from_folds(folds: Vec<FoldMetrics>) -> Self {
        let col = |f: fn(&FoldMetrics) -> f64| MeanStd::of(&folds.iter().map(f).collect::<Vec<_>>());
        let aucs: Vec<f64> = folds.iter().filter_map(|f| f.auc).collect();
        MetricsReport {
            accuracy: col(|f| f.accuracy),
            precision: col(|f| f.precision),
            recall: col(|f| f.recall),
            f1: col(|f| f.f1),
            auc: (!aucs.is_empty()).then(|| MeanStd::of(&aucs)),
            folds,
        }
    }

    /// Tab-separated cells `accuracy precision recall f1 auc`, each as
    /// `mean±std`.
    pub fn tsv_cells(&self) -> String {
        let cell = |m: &MeanStd| format!("{:.4}±{:.4}", m.mean, m.std);
        let auc = self.auc.as_ref().map_or_else(|| "NA".to_string(), cell);
        format!(
            "{}\t{}\t{}\t{}\t{}",
            cell(&self.accuracy),
            cell(&self.precision),
            cell(&self.recall),
            cell(&self.f1),
            auc
        )
    }

    /// ROC points of every fold: `fold class fpr tpr` lines.
    pub fn roc_tsv(&self) -> String {
        let mut s = String::from("fold\tclass\tfpr\ttpr\n");
        for (i, f) in self.folds.iter().enumerate() {
            for c in &f.roc {
                for (x, y) in &c.points {
                    s.push_str(&format!("{i}\t{}\t{x}\t{y}\n", c.class));
                }
            }
        }
        s
    }
}

pub const METRICS_HEADER: &str = "accuracy\tprecision\trecall\tf1\tauc";

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// Fraction of positive/negative pairs ordered correctly, ties half.
    fn auc_by_pairs(pos: &[bool], s: &[f64]) -> Option<f64> {
        let (mut num, mut den) = (0.0, 0.0);
        for i in 0..pos.len() {
            for j in 0..pos.len() {
                if pos[i] && !pos[j] {
                    den += 1.0;
                    if s[i] > s[j] {
                        num += 1.0;
                    } else if s[i] == s[j] {
                        num += 0.5;
                    }
                }
            }
        }
        (den > 0.0).then(|| num / den)
    }

    fn binary_scores(p1: &[f64]) -> Vec<Vec<f64>> {
        p1.iter().map(|&p| vec![1.0 - p, p]).collect()
    }

    #[test]
    fn worked_auc() {
        let pos = [true, true, false, false];
        let s = [0.9, 0.7, 0.8, 0.6];
        assert_eq!(auc(&pos, &s), Some(0.75));
        assert_eq!(auc_by_pairs(&pos, &s), Some(0.75));
    }

    #[test]
    fn confusion_accuracy() {
        let y_true = [0, 0, 0, 1, 1, 1];
        let y_pred = [0, 0, 1, 0, 1, 1];
        let m = compute_metrics(&y_true, &y_pred, &binary_scores(&[0.1, 0.2, 0.6, 0.4, 0.8, 0.9]), 2).unwrap();
        assert_eq!(m.confusion, vec![vec![2, 1], vec![1, 2]]);
        assert!((m.accuracy - 4.0 / 6.0).abs() < 1e-15);
        assert!((m.precision - 2.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn perfect_predictions() {
        let y = [0, 1, 2, 3, 1, 0];
        let scores: Vec<Vec<f64>> = y
            .iter()
            .map(|&c| (0..4).map(|k| if k == c { 0.9 } else { 0.1 / 3.0 }).collect())
            .collect();
        let m = compute_metrics(&y, &y, &scores, 4).unwrap();
        for v in [m.accuracy, m.precision, m.recall, m.f1, m.auc.unwrap()] {
            assert_eq!(v, 1.0);
        }
    }

    #[test]
    fn single_class_has_no_auc() {
        let m = compute_metrics(&[1, 1], &[1, 0], &binary_scores(&[0.7, 0.2]), 2).unwrap();
        assert_eq!(m.auc, None);
        assert!(compute_metrics(&[], &[], &[], 2).is_err());
    }

    #[test]
    fn roc_ends_at_one_one() {
        let pts = roc_curve(&[true, false, true, false], &[0.9, 0.8, 0.8, 0.1]);
        assert_eq!(pts.first(), Some(&(0.0, 0.0)));
        assert_eq!(pts.last(), Some(&(1.0, 1.0)));
        assert_eq!(pts.len(), 4);
    }

    #[test]
    fn report_aggregates_folds() {
        let f = |a: f64| FoldMetrics {
            accuracy: a,
            precision: a,
            recall: a,
            f1: a,
            auc: None,
            roc: vec![],
            confusion: vec![],
        };
        let r = MetricsReport::from_folds(vec![f(0.5), f(1.0)]);
        assert_eq!(r.accuracy.mean, 0.75);
        assert_eq!(r.accuracy.std, 0.25);
        assert!(r.auc.is_none());
        assert!(r.tsv_cells().ends_with("NA"));
    }

    proptest! {
        #[test]
        fn rank_auc_equals_pair_counting(
            v in prop::collection::vec((any::<bool>(), 0u8..6), 1..=20)
        ) {
            let pos: Vec<bool> = v.iter().map(|p| p.0).collect();
            let s: Vec<f64> = v.iter().map(|p| p.1 as f64 / 5.0).collect();
            prop_assert_eq!(auc(&pos, &s), auc_by_pairs(&pos, &s));
        }

        #[test]
        fn metrics_ignore_class_renaming(
            v in prop::collection::vec((0usize..3, 0usize..3), 1..40)
        ) {
            let perm = [2usize, 0, 1];
            let (t, p): (Vec<usize>, Vec<usize>) = v.iter().copied().unzip();
            let scores = |p: &[usize]| -> Vec<Vec<f64>> {
                p.iter().map(|&c| (0..3).map(|k| if k == c { 0.8 } else { 0.1 }).collect()).collect()
            };
            let a = compute_metrics(&t, &p, &scores(&p), 3).unwrap();
            let t2: Vec<usize> = t.iter().map(|&c| perm[c]).collect();
            let p2: Vec<usize> = p.iter().map(|&c| perm[c]).collect();
            let b = compute_metrics(&t2, &p2, &scores(&p2), 3).unwrap();
            prop_assert!((a.accuracy - b.accuracy).abs() < 1e-12);
            prop_assert!((a.precision - b.precision).abs() < 1e-12);
            prop_assert!((a.recall - b.recall).abs() < 1e-12);
            prop_assert!((a.f1 - b.f1).abs() < 1e-12);
            match (a.auc, b.auc) {
                (Some(x), Some(y)) => prop_assert!((x - y).abs() < 1e-12),
                (x, y) => prop_assert_eq!(x, y),
            }
        }
    }
}
