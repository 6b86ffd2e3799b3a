use crate::error::{Error, Result};

/// ROC curve from a descending threshold sweep plus its trapezoidal AUC.
/// Points run from (0,0) to (1,1) and are non-decreasing in both
/// coordinates; score ties are grouped, contributing diagonal segments, so
/// the AUC equals P(risk_pos > risk_neg) + 0.5 P(tie).
#[derive(Debug, Clone)]
pub struct RocCurve {
    /// (threshold, false positive rate, true positive rate).
    pub points: Vec<(f64, f64, f64)>,
    pub auc: f64,
}

/// Sweeps thresholds over the distinct scores of `(risk, label)` pairs,
/// labels 0 = negative/normal, 1 = positive/attack.
pub fn roc_auc(scores: &[(f64, u8)]) -> Result<RocCurve> {
    let n_pos = scores.iter().filter(|(_, l)| *l == 1).count();
    let n_neg = scores.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(Error::Input(format!(
            "roc_auc needs both labels, got {n_pos} positive / {n_neg} negative"
        )));
    }
    for (risk, _) in scores {
        if !risk.is_finite() {
            return Err(Error::Numeric(format!("non-finite risk score {risk}")));
        }
    }

    let mut sorted: Vec<(f64, u8)> = scores.to_vec();
    sorted.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap());

    let mut points = vec![(f64::INFINITY, 0.0, 0.0)];
    let mut tp = 0usize;
    let mut fp = 0usize;
    let mut auc = 0.0;
    let mut i = 0;
    while i < sorted.len() {
        let threshold = sorted[i].0;
        let mut d_tp = 0usize;
        let mut d_fp = 0usize;
        while i < sorted.len() && sorted[i].0 == threshold {
            if sorted[i].1 == 1 {
                d_tp += 1;
            } else {
                d_fp += 1;
            }
            i += 1;
        }
        let (fpr0, tpr0) = (fp as f64 / n_neg as f64, tp as f64 / n_pos as f64);
        tp += d_tp;
        fp += d_fp;
        let (fpr1, tpr1) = (fp as f64 / n_neg as f64, tp as f64 / n_pos as f64);
        auc += (fpr1 - fpr0) * (tpr0 + tpr1) / 2.0;
        points.push((threshold, fpr1, tpr1));
    }
    debug_assert_eq!(points.last().map(|p| (p.1, p.2)), Some((1.0, 1.0)));
    Ok(RocCurve { points, auc })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numeric::Rng;

    /// O(n^2) pairwise-comparison oracle: ties count half.
    pub(crate) fn auc_oracle(scores: &[(f64, u8)]) -> f64 {
        let pos: Vec<f64> = scores.iter().filter(|(_, l)| *l == 1).map(|(s, _)| *s).collect();
        let neg: Vec<f64> = scores.iter().filter(|(_, l)| *l == 0).map(|(s, _)| *s).collect();
        let mut wins = 0.0;
        for &p in &pos {
            for &n in &neg {
                if p > n {
                    wins += 1.0;
                } else if p == n {
                    wins += 0.5;
                }
            }
        }
        wins / (pos.len() * neg.len()) as f64
    }

    #[test]
    fn perfect_separation_is_auc_one() {
        let scores = vec![(0.9, 1), (0.8, 1), (0.2, 0), (0.1, 0)];
        let curve = roc_auc(&scores).unwrap();
        assert_eq!(curve.auc, 1.0);
    }

    #[test]
    fn all_ties_is_auc_half() {
        let scores = vec![(0.5, 1), (0.5, 0), (0.5, 1), (0.5, 0)];
        let curve = roc_auc(&scores).unwrap();
        assert_eq!(curve.auc, 0.5);
        // One diagonal segment from (0,0) to (1,1).
        assert_eq!(curve.points.len(), 2);
    }

    #[test]
    fn matches_pairwise_oracle_on_random_sets() {
        let mut rng = Rng::new(301);
        for _ in 0..100 {
            let scores: Vec<(f64, u8)> = (0..200)
                .map(|_| {
                    // Quantized scores force plenty of ties.
                    let s = (rng.next_f64() * 20.0).floor() / 20.0;
                    (s, rng.below(2) as u8)
                })
                .collect();
            if scores.iter().all(|(_, l)| *l == 1) || scores.iter().all(|(_, l)| *l == 0) {
                continue;
            }
            let curve = roc_auc(&scores).unwrap();
            let want = auc_oracle(&scores);
            assert!((curve.auc - want).abs() < 1e-9, "{} vs {want}", curve.auc);
        }
    }

    #[test]
    fn endpoints_and_monotonicity() {
        let mut rng = Rng::new(302);
        let scores: Vec<(f64, u8)> =
            (0..150).map(|_| (rng.next_f64(), rng.below(2) as u8)).collect();
        let curve = roc_auc(&scores).unwrap();
        let first = curve.points.first().unwrap();
        let last = curve.points.last().unwrap();
        assert_eq!((first.1, first.2), (0.0, 0.0));
        assert_eq!((last.1, last.2), (1.0, 1.0));
        for win in curve.points.windows(2) {
            assert!(win[1].1 >= win[0].1 && win[1].2 >= win[0].2);
        }
    }

    #[test]
    fn invariant_under_monotone_transform() {
        let mut rng = Rng::new(303);
        let scores: Vec<(f64, u8)> =
            (0..100).map(|_| (rng.next_f64(), rng.below(2) as u8)).collect();
        let cubed: Vec<(f64, u8)> = scores.iter().map(|&(s, l)| (s * s * s, l)).collect();
        let a = roc_auc(&scores).unwrap().auc;
        let b = roc_auc(&cubed).unwrap().auc;
        assert!((a - b).abs() < 1e-12);
    }

    #[test]
    fn single_class_is_an_error() {
        assert!(roc_auc(&[(0.5, 1), (0.7, 1)]).is_err());
    }
}
