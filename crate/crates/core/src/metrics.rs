//! Confusion-matrix metrics and rank correlations.

use serde::Serialize;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
pub struct Confusion {
    pub tp: usize,
    pub tn: usize,
    pub fp: usize,
    pub fn_: usize,
}

impl Confusion {
    pub fn total(&self) -> usize {
        self.tp + self.tn + self.fp + self.fn_
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MetricReport {
    pub tp: usize,
    pub tn: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub pearson: Option<f64>,
    pub spearman: Option<f64>,
}

/// Which metric feeds weight calibration.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum MetricFactor {
    #[default]
    Accuracy,
    Precision,
    Recall,
    F1,
}

impl MetricFactor {
    pub fn pick(self, r: &MetricReport) -> f64 {
        match self {
            MetricFactor::Accuracy => r.accuracy,
            MetricFactor::Precision => r.precision,
            MetricFactor::Recall => r.recall,
            MetricFactor::F1 => r.f1,
        }
    }
}

impl std::str::FromStr for MetricFactor {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "accuracy" => Ok(MetricFactor::Accuracy),
            "precision" => Ok(MetricFactor::Precision),
            "recall" => Ok(MetricFactor::Recall),
            "f1" => Ok(MetricFactor::F1),
            other => Err(Error::Config(format!("unknown weighting factor `{other}`"))),
        }
    }
}

/// "Similar" (`true`) is the positive class.
pub fn confusion_counts(predictions: &[bool], labels: &[bool]) -> Result<Confusion> {
    if predictions.len() != labels.len() {
        return Err(Error::Dimension(format!(
            "{} predictions for {} labels",
            predictions.len(),
            labels.len()
        )));
    }
    let mut c = Confusion::default();
    for (&p, &y) in predictions.iter().zip(labels) {
        match (p, y) {
            (true, true) => c.tp += 1,
            (false, false) => c.tn += 1,
            (true, false) => c.fp += 1,
            (false, true) => c.fn_ += 1,
        }
    }
    Ok(c)
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

/// Accuracy, precision, recall and F1; any 0/0 is reported as 0.
pub fn prf_metrics(c: Confusion) -> Result<MetricReport> {
    if c.total() == 0 {
        return Err(Error::EmptyEval);
    }
    let precision = ratio(c.tp, c.tp + c.fp);
    let recall = ratio(c.tp, c.tp + c.fn_);
    let f1 = if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    };
    Ok(MetricReport {
        tp: c.tp,
        tn: c.tn,
        fp: c.fp,
        fn_: c.fn_,
        accuracy: ratio(c.tp + c.tn, c.total()),
        precision,
        recall,
        f1,
        pearson: None,
        spearman: None,
    })
}

fn pearson(x: &[f64], y: &[f64]) -> Result<f64> {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (dx, dy) = (a - mx, b - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(Error::UndefinedCorrelation);
    }
    Ok((sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0))
}

/// 1-based ranks, ties sharing the average of their positions.
pub fn average_ranks(x: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..x.len()).collect();
    idx.sort_by(|&a, &b| x[a].total_cmp(&x[b]));
    let mut ranks = vec![0.0; x.len()];
    let mut start = 0;
    while start < idx.len() {
        let mut end = start + 1;
        while end < idx.len() && x[idx[end]] == x[idx[start]] {
            end += 1;
        }
        let avg = (start + end + 1) as f64 / 2.0;
        for &i in &idx[start..end] {
            ranks[i] = avg;
        }
        start = end;
    }
    ranks
}

/// Pearson on raw values and Spearman as Pearson on average ranks.
pub fn rank_correlations(predicted: &[f64], gold: &[f64]) -> Result<(f64, f64)> {
    if predicted.len() != gold.len() {
        return Err(Error::Dimension(format!(
            "{} predictions for {} gold scores",
            predicted.len(),
            gold.len()
        )));
    }
    if predicted.len() < 2 {
        return Err(Error::UndefinedCorrelation);
    }
    let p = pearson(predicted, gold)?;
    let s = pearson(&average_ranks(predicted), &average_ranks(gold))?;
    Ok((p, s))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn counts() {
        let c = confusion_counts(&[true, true, false], &[true, true, false]).unwrap();
        assert_eq!((c.tp, c.tn, c.fp, c.fn_), (2, 1, 0, 0));
        let c = confusion_counts(&[false, false, true], &[true, true, false]).unwrap();
        assert_eq!((c.tp, c.tn), (0, 0));
        assert!(confusion_counts(&[true], &[]).is_err());
    }

    #[test]
    fn prf_examples() {
        let r = prf_metrics(Confusion {
            tp: 2,
            tn: 1,
            fp: 0,
            fn_: 0,
        })
        .unwrap();
        assert_eq!(
            (r.accuracy, r.precision, r.recall, r.f1),
            (1.0, 1.0, 1.0, 1.0)
        );
        let r = prf_metrics(Confusion {
            tp: 0,
            tn: 3,
            fp: 0,
            fn_: 2,
        })
        .unwrap();
        assert_eq!((r.precision, r.recall, r.f1), (0.0, 0.0, 0.0));
        let r = prf_metrics(Confusion {
            tp: 1,
            tn: 1,
            fp: 1,
            fn_: 1,
        })
        .unwrap();
        assert_eq!(
            (r.accuracy, r.precision, r.recall, r.f1),
            (0.5, 0.5, 0.5, 0.5)
        );
        assert!(matches!(
            prf_metrics(Confusion::default()),
            Err(Error::EmptyEval)
        ));
    }

    #[test]
    fn correlation_examples() {
        let g = [1.0, 2.0, 3.5, 0.2];
        let (p, s) = rank_correlations(&g, &g).unwrap();
        assert!((p - 1.0).abs() < 1e-12 && (s - 1.0).abs() < 1e-12);
        let neg: Vec<f64> = g.iter().map(|x| -x).collect();
        let (p, s) = rank_correlations(&neg, &g).unwrap();
        assert!((p + 1.0).abs() < 1e-12 && (s + 1.0).abs() < 1e-12);
        let (p, s) = rank_correlations(&[1.0, 2.0, 3.0], &[1.0, 3.0, 2.0]).unwrap();
        assert!((p - 0.5).abs() < 1e-12 && (s - 0.5).abs() < 1e-12);
        assert!(matches!(
            rank_correlations(&[1.0, 1.0], &[1.0, 2.0]),
            Err(Error::UndefinedCorrelation)
        ));
        assert!(rank_correlations(&[1.0], &[1.0]).is_err());
    }

    #[test]
    fn ties_get_average_rank() {
        assert_eq!(
            average_ranks(&[10.0, 20.0, 10.0, 5.0]),
            [2.5, 4.0, 2.5, 1.0]
        );
    }

    proptest! {
        #[test]
        fn spearman_monotone_invariant(g in proptest::collection::vec(-10.0f64..10.0, 3..20)) {
            prop_assume!(g.iter().any(|x| *x != g[0]));
            let cubed: Vec<f64> = g.iter().map(|x| x.powi(3) + 2.0).collect();
            let (_, s) = rank_correlations(&cubed, &g).unwrap();
            prop_assert!((s - 1.0).abs() < 1e-9);
        }

        #[test]
        fn pearson_affine_invariant(
            x in proptest::collection::vec(-10.0f64..10.0, 3..20),
            scale in 0.1f64..10.0,
            shift in -5.0f64..5.0,
        ) {
            prop_assume!(x.iter().any(|v| (*v - x[0]).abs() > 1e-3));
            let y: Vec<f64> = x.iter().map(|v| v * 0.5 + v.sin()).collect();
            prop_assume!(y.iter().any(|v| (*v - y[0]).abs() > 1e-3));
            let xt: Vec<f64> = x.iter().map(|v| v * scale + shift).collect();
            let (p1, _) = rank_correlations(&x, &y).unwrap();
            let (p2, _) = rank_correlations(&xt, &y).unwrap();
            prop_assert!((p1 - p2).abs() < 1e-9);
        }
    }
}
