use super::{Error, Metric};
use crate::emulator::classify_cloud;

/// Counts with clear sky as the positive class.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct Confusion {
    pub true_clear: usize,
    pub true_cloudy: usize,
    pub false_clear: usize,
    pub false_cloudy: usize,
}

impl Confusion {
    pub fn total(&self) -> usize {
        self.true_clear + self.true_cloudy + self.false_clear + self.false_cloudy
    }

    pub fn accuracy(&self) -> Metric {
        ratio(self.true_clear + self.true_cloudy, self.total())
    }

    /// True positive rate on clear pixels.
    pub fn sensitivity(&self) -> Metric {
        ratio(self.true_clear, self.true_clear + self.false_cloudy)
    }

    /// True negative rate on cloudy pixels.
    pub fn specificity(&self) -> Metric {
        ratio(self.true_cloudy, self.true_cloudy + self.false_clear)
    }

    pub fn false_positive_rate(&self) -> Metric {
        ratio(self.false_clear, self.true_cloudy + self.false_clear)
    }

    pub fn merge(self, o: Self) -> Self {
        Self {
            true_clear: self.true_clear + o.true_clear,
            true_cloudy: self.true_cloudy + o.true_cloudy,
            false_clear: self.false_clear + o.false_clear,
            false_cloudy: self.false_cloudy + o.false_cloudy,
        }
    }
}

fn ratio(num: usize, den: usize) -> Metric {
    (den > 0).then(|| num as f64 / den as f64)
}

/// Compares a predicted clear mask with the reference mask.
pub fn confusion(predicted_clear: &[bool], reference_clear: &[bool]) -> Confusion {
    assert_eq!(predicted_clear.len(), reference_clear.len());
    let mut c = Confusion::default();
    for (&p, &r) in predicted_clear.iter().zip(reference_clear) {
        match (p, r) {
            (true, true) => c.true_clear += 1,
            (false, false) => c.true_cloudy += 1,
            (true, false) => c.false_clear += 1,
            (false, true) => c.false_cloudy += 1,
        }
    }
    c
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepPoint {
    pub threshold: f64,
    pub confusion: Confusion,
    pub accuracy: Metric,
    pub true_positive_rate: Metric,
    pub false_positive_rate: Metric,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ThresholdSweep {
    pub points: Vec<SweepPoint>,
    /// `(fpr, tpr)` at the swept levels plus `(0, 0)` and `(1, 1)`,
    /// sorted by false positive rate.
    pub roc_levels: Vec<(f64, f64)>,
    /// Trapezoidal area under `roc_levels`.
    pub auc_levels: Metric,
    /// Area under the ROC traced through every distinct score; unchanged by
    /// any strictly increasing transform of the probabilities.
    pub auc: Metric,
    /// Lowest level reaching the highest accuracy.
    pub best_threshold: Option<f64>,
    pub best_accuracy: Metric,
}

/// Classifies at every level, records accuracy and ROC coordinates, and
/// computes both the level-based and the exact AUC.
pub fn threshold_sweep(
    probability: &[f64],
    reference_clear: &[bool],
    levels: &[f64],
) -> Result<ThresholdSweep, Error> {
    if levels.iter().any(|l| !(0.0..=1.0).contains(l)) {
        return Err(Error::Levels("thresholds must lie in [0, 1]".into()));
    }
    if levels.windows(2).any(|w| w[0] > w[1]) {
        return Err(Error::Levels("thresholds must be sorted".into()));
    }
    let points: Vec<SweepPoint> = levels
        .iter()
        .map(|&t| {
            let c = confusion(&classify_cloud(probability, t), reference_clear);
            SweepPoint {
                threshold: t,
                confusion: c,
                accuracy: c.accuracy(),
                true_positive_rate: c.sensitivity(),
                false_positive_rate: c.false_positive_rate(),
            }
        })
        .collect();

    let mut roc_levels = vec![(0.0, 0.0), (1.0, 1.0)];
    roc_levels.extend(
        points
            .iter()
            .filter_map(|p| Some((p.false_positive_rate?, p.true_positive_rate?))),
    );
    roc_levels.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
    let has_both = reference_clear.iter().any(|&r| r) && reference_clear.iter().any(|&r| !r);
    let auc_levels = has_both.then(|| trapezoid(&roc_levels));
    let auc = roc_exact(probability, reference_clear).map(|r| trapezoid(&r));

    let mut best: Option<(f64, f64)> = None;
    for p in &points {
        if let Some(a) = p.accuracy {
            if best.is_none_or(|(_, b)| a > b) {
                best = Some((p.threshold, a));
            }
        }
    }
    Ok(ThresholdSweep {
        points,
        roc_levels,
        auc_levels,
        auc,
        best_threshold: best.map(|b| b.0),
        best_accuracy: best.map(|b| b.1),
    })
}

/// ROC `(fpr, tpr)` obtained by lowering the cut through every distinct
/// score, from `(0, 0)` to `(1, 1)`. Pixels with equal scores enter
/// together. `None` unless both classes are present.
pub fn roc_exact(score: &[f64], reference_clear: &[bool]) -> Option<Vec<(f64, f64)>> {
    let pos = reference_clear.iter().filter(|&&r| r).count();
    let neg = reference_clear.len() - pos;
    if pos == 0 || neg == 0 {
        return None;
    }
    let mut order: Vec<usize> = (0..score.len()).collect();
    order.sort_by(|&a, &b| score[b].total_cmp(&score[a]));
    let mut roc = vec![(0.0, 0.0)];
    let (mut tp, mut fp) = (0usize, 0usize);
    let mut k = 0;
    while k < order.len() {
        let s = score[order[k]];
        while k < order.len() && score[order[k]].total_cmp(&s).is_eq() {
            if reference_clear[order[k]] {
                tp += 1;
            } else {
                fp += 1;
            }
            k += 1;
        }
        roc.push((fp as f64 / neg as f64, tp as f64 / pos as f64));
    }
    Some(roc)
}

fn trapezoid(curve: &[(f64, f64)]) -> f64 {
    curve
        .windows(2)
        .map(|w| (w[1].0 - w[0].0) * (w[0].1 + w[1].1) / 2.0)
        .sum()
}
