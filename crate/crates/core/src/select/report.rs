use std::fmt::Write as _;

use serde::Serialize;

use super::{Importance, SelectError};
use crate::classifiers::{HyperParams, TrainedModel};

/// Binary confusion matrix with VR (label 1) as the positive class.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
pub struct Confusion {
    pub tn: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
    pub tp: usize,
}

impl Confusion {
    pub fn from_predictions(predicted: &[u8], actual: &[u8]) -> Self {
        let mut c = Confusion::default();
        for (&p, &a) in predicted.iter().zip(actual) {
            match (a, p) {
                (0, 0) => c.tn += 1,
                (0, _) => c.fp += 1,
                (_, 0) => c.fn_ += 1,
                _ => c.tp += 1,
            }
        }
        c
    }

    pub fn total(&self) -> usize {
        self.tn + self.fp + self.fn_ + self.tp
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ClassMetrics {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub support: usize,
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

impl ClassMetrics {
    /// Zero denominators yield 0 rather than NaN.
    fn new(hits: usize, predicted: usize, support: usize) -> Self {
        let precision = ratio(hits, predicted);
        let recall = ratio(hits, support);
        let f1 = if precision + recall > 0.0 {
            2.0 * precision * recall / (precision + recall)
        } else {
            0.0
        };
        ClassMetrics {
            precision,
            recall,
            f1,
            support,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvalReport {
    pub confusion: Confusion,
    /// Index 0 is Non-VR, index 1 is VR.
    pub classes: [ClassMetrics; 2],
    pub accuracy: f64,
    pub params: Option<HyperParams>,
    pub importances: Vec<Importance>,
    pub excluded: Vec<String>,
}

const CLASS_NAMES: [&str; 2] = ["Non-VR", "VR"];

impl EvalReport {
    pub fn from_confusion(c: Confusion) -> Self {
        let Confusion { tn, fp, fn_, tp } = c;
        EvalReport {
            confusion: c,
            classes: [
                ClassMetrics::new(tn, tn + fn_, tn + fp),
                ClassMetrics::new(tp, tp + fp, tp + fn_),
            ],
            accuracy: ratio(tn + tp, c.total()),
            params: None,
            importances: Vec::new(),
            excluded: Vec::new(),
        }
    }

    pub fn evaluate(model: &TrainedModel, x: &[Vec<f64>], y: &[u8]) -> Result<Self, SelectError> {
        if x.is_empty() {
            return Err(SelectError::EmptyEvaluation);
        }
        let predicted = model.predict_batch(x)?;
        let mut report = EvalReport::from_confusion(Confusion::from_predictions(&predicted, y));
        report.params = Some(model.params.clone());
        Ok(report)
    }

    /// Human-readable report: per-class table, accuracy, confusion matrix,
    /// then importances and excluded features when present.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        if let Some(p) = &self.params {
            let _ = writeln!(s, "model: {} ({})", p.family(), p.describe());
        }
        let _ = writeln!(s, "{:>8} {:>10} {:>10} {:>10} {:>8}", "class", "precision", "recall", "f1-score", "support");
        for (name, m) in CLASS_NAMES.iter().zip(&self.classes) {
            let _ = writeln!(
                s,
                "{:>8} {:>10.4} {:>10.4} {:>10.4} {:>8}",
                name, m.precision, m.recall, m.f1, m.support
            );
        }
        let _ = writeln!(s, "accuracy: {:.5} ({} / {})", self.accuracy, self.confusion.tn + self.confusion.tp, self.confusion.total());
        let _ = writeln!(s, "confusion (rows true, columns predicted):");
        let _ = writeln!(s, "{:>8} {:>8} {:>8}", "", "Non-VR", "VR");
        let _ = writeln!(s, "{:>8} {:>8} {:>8}", "Non-VR", self.confusion.tn, self.confusion.fp);
        let _ = writeln!(s, "{:>8} {:>8} {:>8}", "VR", self.confusion.fn_, self.confusion.tp);
        if !self.importances.is_empty() {
            let _ = writeln!(s, "permutation importance:");
            for imp in &self.importances {
                let _ = writeln!(s, "{:>12} {:.4}", imp.name, imp.importance);
            }
        }
        if !self.excluded.is_empty() {
            let _ = writeln!(s, "excluded: {}", self.excluded.join(","));
        }
        s
    }

    /// Per-class rows: `class,precision,recall,f1_score,support`.
    pub fn classes_csv(&self) -> String {
        let mut s = String::from("class,precision,recall,f1_score,support\n");
        for (name, m) in CLASS_NAMES.iter().zip(&self.classes) {
            let _ = writeln!(s, "{name},{},{},{},{}", m.precision, m.recall, m.f1, m.support);
        }
        s
    }

    /// Confusion matrix rows: `true_label,pred_nonvr,pred_vr`.
    pub fn confusion_csv(&self) -> String {
        let c = &self.confusion;
        format!(
            "true_label,pred_nonvr,pred_vr\nNon-VR,{},{}\nVR,{},{}\n",
            c.tn, c.fp, c.fn_, c.tp
        )
    }

    pub fn importances_csv(&self) -> String {
        let mut s = String::from("rank,feature,importance\n");
        for (rank, imp) in self.importances.iter().enumerate() {
            let _ = writeln!(s, "{},{},{}", rank + 1, imp.name, imp.importance);
        }
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn published_rf_matrix() {
        let r = EvalReport::from_confusion(Confusion { tn: 390, fp: 2, fn_: 4, tp: 399 });
        assert_eq!(r.confusion.total(), 795);
        assert!((r.accuracy - 789.0 / 795.0).abs() < 1e-15);
        assert!((r.accuracy - 0.99245).abs() < 5e-6);
        assert!((r.classes[1].precision - 399.0 / 401.0).abs() < 1e-15);
        assert!(r.classes[1].precision > 0.995);
        assert_eq!(r.classes[0].support, 392);
        assert_eq!(r.classes[1].support, 403);
    }

    #[test]
    fn perfect_predictions() {
        let y = [0, 1, 0, 1, 1, 0, 0, 1, 1, 0];
        let r = EvalReport::from_confusion(Confusion::from_predictions(&y, &y));
        assert_eq!(r.accuracy, 1.0);
        assert_eq!(r.classes[0].f1, 1.0);
        assert_eq!(r.classes[1].f1, 1.0);
    }

    #[test]
    fn zero_division_is_zero() {
        let r = EvalReport::from_confusion(Confusion { tn: 5, fp: 0, fn_: 5, tp: 0 });
        assert_eq!(r.classes[1].precision, 0.0);
        assert_eq!(r.classes[1].f1, 0.0);
        assert!(r.to_text().contains("accuracy: 0.50000"));
    }

    #[test]
    fn csv_layouts() {
        let r = EvalReport::from_confusion(Confusion { tn: 1, fp: 2, fn_: 3, tp: 4 });
        assert_eq!(r.confusion_csv(), "true_label,pred_nonvr,pred_vr\nNon-VR,1,2\nVR,3,4\n");
        assert_eq!(r.classes_csv().lines().count(), 3);
    }
}
