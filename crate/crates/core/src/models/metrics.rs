use alloc::format;
use alloc::vec;

use crate::{Error, Result, Tensor};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum Metric {
    #[default]
    Accuracy,
    MacroF1,
}

impl core::str::FromStr for Metric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "accuracy" => Ok(Metric::Accuracy),
            "macro_f1" | "macro-f1" => Ok(Metric::MacroF1),
            other => Err(Error::param(format!("unknown metric '{other}'"))),
        }
    }
}

/// Scores argmax predictions over the masked, labeled rows.
pub fn evaluate(logits: &Tensor, labels: &[Option<usize>], mask: &[bool], metric: Metric) -> Result<f64> {
    match metric {
        Metric::Accuracy => accuracy(logits, labels, mask),
        Metric::MacroF1 => macro_f1(logits, labels, mask),
    }
}

fn scored_rows<'a>(
    logits: &Tensor,
    labels: &'a [Option<usize>],
    mask: &'a [bool],
) -> Result<impl Iterator<Item = (usize, usize)> + 'a> {
    let n = logits.rows();
    if labels.len() != n || mask.len() != n {
        return Err(Error::shape("evaluate", (labels.len(), mask.len()), (n, n)));
    }
    if !mask.iter().zip(labels).any(|(&m, l)| m && l.is_some()) {
        return Err(Error::EmptyMask);
    }
    let pred = logits.argmax_rows();
    Ok(mask
        .iter()
        .zip(labels)
        .zip(pred)
        .filter_map(|((&m, &l), p)| if m { l.map(|l| (l, p)) } else { None }))
}

pub fn accuracy(logits: &Tensor, labels: &[Option<usize>], mask: &[bool]) -> Result<f64> {
    let (mut hit, mut total) = (0usize, 0usize);
    for (label, pred) in scored_rows(logits, labels, mask)? {
        total += 1;
        hit += usize::from(label == pred);
    }
    Ok(hit as f64 / total as f64)
}

/// Unweighted mean of per-class F1 over all `logits.cols()` classes; a class
/// with no true, predicted or actual members scores 0.
pub fn macro_f1(logits: &Tensor, labels: &[Option<usize>], mask: &[bool]) -> Result<f64> {
    let classes = logits.cols();
    let mut tp = vec![0usize; classes];
    let mut fp = vec![0usize; classes];
    let mut fn_ = vec![0usize; classes];
    for (label, pred) in scored_rows(logits, labels, mask)? {
        if label >= classes {
            return Err(Error::InvalidLabel {
                node: usize::MAX,
                label,
                classes,
            });
        }
        if label == pred {
            tp[label] += 1;
        } else {
            fp[pred] += 1;
            fn_[label] += 1;
        }
    }
    let total: f64 = (0..classes)
        .map(|c| {
            let denom = 2 * tp[c] + fp[c] + fn_[c];
            if tp[c] == 0 {
                0.0
            } else {
                2.0 * tp[c] as f64 / denom as f64
            }
        })
        .sum();
    Ok(total / classes as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_prediction_on_balanced_binary() {
        let logits = Tensor::from_fn(4, 2, |_, c| if c == 0 { 1.0 } else { 0.0 });
        let labels = [Some(0), Some(1), Some(0), Some(1)];
        let mask = [true; 4];
        assert_eq!(accuracy(&logits, &labels, &mask).unwrap(), 0.5);
        let f1 = macro_f1(&logits, &labels, &mask).unwrap();
        assert!((f1 - 1.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn empty_mask_errors() {
        let logits = Tensor::zeros(2, 2);
        let r = accuracy(&logits, &[Some(0), None], &[false, true]);
        assert!(matches!(r, Err(Error::EmptyMask)));
    }
}
