//! Accuracy aggregation and ROC/AUC computation.

/// Sample mean and standard deviation.
pub fn mean_std(xs: &[f64]) -> (f64, f64) {
    if xs.is_empty() {
        return (0.0, 0.0);
    }
    let mean = xs.iter().sum::<f64>() / xs.len() as f64;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (xs.len() - 1) as f64;
    (mean, var.sqrt())
}

#[derive(Debug, Clone, PartialEq)]
pub struct RocPoint {
    pub threshold: f64,
    pub false_positive_rate: f64,
    pub true_positive_rate: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RocCurve {
    /// One point per distinct threshold, ascending; rates are monotone.
    pub points: Vec<RocPoint>,
    pub auc: f64,
}

/// ROC sweep where LOW scores indicate the positive class: an item is
/// flagged positive when its score is at or below the threshold. The
/// thresholds are the observed scores themselves.
pub fn roc_curve(positive_scores: &[f64], negative_scores: &[f64]) -> RocCurve {
    assert!(
        !positive_scores.is_empty() && !negative_scores.is_empty(),
        "both classes need at least one score"
    );
    let mut thresholds: Vec<f64> = positive_scores
        .iter()
        .chain(negative_scores)
        .copied()
        .collect();
    thresholds.sort_by(f64::total_cmp);
    thresholds.dedup_by(|a, b| a == b);

    let p = positive_scores.len() as f64;
    let n = negative_scores.len() as f64;
    let points: Vec<RocPoint> = thresholds
        .into_iter()
        .map(|t| {
            let tp = positive_scores.iter().filter(|&&s| s <= t).count() as f64;
            let fp = negative_scores.iter().filter(|&&s| s <= t).count() as f64;
            RocPoint {
                threshold: t,
                false_positive_rate: fp / n,
                true_positive_rate: tp / p,
            }
        })
        .collect();

    // Trapezoid over (fpr, tpr), anchored at (0, 0); the final point is
    // always (1, 1).
    let mut auc = 0.0;
    let (mut prev_fpr, mut prev_tpr) = (0.0, 0.0);
    for point in &points {
        auc += (point.false_positive_rate - prev_fpr)
            * (point.true_positive_rate + prev_tpr)
            / 2.0;
        prev_fpr = point.false_positive_rate;
        prev_tpr = point.true_positive_rate;
    }
    RocCurve { points, auc }
}
