use alloc::format;
use alloc::vec::Vec;

use crate::drop::DropKind;
use crate::{Error, Result};

/// Abstract message statistics: `p[i]` is the share of message type `i`,
/// sent by `senders[i]` nodes and delivered `deliveries[i]` times;
/// `msg_dim` is the message dimension.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct EntropyInputs {
    p: Vec<f64>,
    senders: Vec<usize>,
    deliveries: Vec<usize>,
    msg_dim: usize,
}

impl EntropyInputs {
    pub fn new(p: Vec<f64>, senders: Vec<usize>, deliveries: Vec<usize>, msg_dim: usize) -> Result<Self> {
        if p.is_empty() || p.len() != senders.len() || p.len() != deliveries.len() {
            return Err(Error::param(format!(
                "entropy inputs need equal, non-zero lengths (p {}, senders {}, deliveries {})",
                p.len(),
                senders.len(),
                deliveries.len()
            )));
        }
        if p.iter().any(|&x| !(0.0..=1.0).contains(&x)) || (p.iter().sum::<f64>() - 1.0).abs() > 1e-12 {
            return Err(Error::param("type proportions must lie in [0, 1] and sum to 1"));
        }
        if senders.iter().zip(&deliveries).any(|(&n, &t)| n == 0 || t < n) {
            return Err(Error::param("need deliveries >= senders >= 1 for every type"));
        }
        if msg_dim == 0 {
            return Err(Error::param("message dimension must be positive"));
        }
        Ok(EntropyInputs {
            p,
            senders,
            deliveries,
            msg_dim,
        })
    }

    pub fn p(&self) -> &[f64] {
        &self.p
    }

    pub fn senders(&self) -> &[usize] {
        &self.senders
    }

    pub fn deliveries(&self) -> &[usize] {
        &self.deliveries
    }

    pub fn msg_dim(&self) -> usize {
        self.msg_dim
    }
}

fn xlogy_neg(p: f64, y: f64) -> f64 {
    if p == 0.0 {
        0.0
    } else {
        -p * libm::log(y)
    }
}

/// `sum_i -p_i ln p_i`.
pub fn entropy_clean(inputs: &EntropyInputs) -> f64 {
    inputs.p.iter().map(|&p| xlogy_neg(p, p)).sum()
}

/// Expected message entropy after dropping at rate `delta` (natural log).
pub fn entropy_expected(kind: DropKind, inputs: &EntropyInputs, delta: f64) -> Result<f64> {
    if !(0.0..1.0).contains(&delta) {
        return Err(Error::param(format!("entropy rate must lie in [0, 1), got {delta}")));
    }
    let kept: f64 = inputs.p.iter().map(|&p| xlogy_neg(p, (1.0 - delta) * p)).sum();
    let split = |spread: &[usize]| -> f64 {
        inputs
            .p
            .iter()
            .zip(spread)
            .map(|(&p, &m)| xlogy_neg(p, p / inputs.msg_dim.min(m) as f64))
            .sum()
    };
    Ok(match kind {
        DropKind::None => entropy_clean(inputs),
        DropKind::DropEdge | DropKind::DropNode => xlogy_neg(delta, delta) + (1.0 - delta) * kept,
        DropKind::Dropout => delta * split(&inputs.senders) + (1.0 - delta) * kept,
        DropKind::DropMessage => delta * split(&inputs.deliveries) + (1.0 - delta) * kept,
    })
}

/// One row of the ordering scan. DropEdge and DropNode share a formula.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct EntropyRow {
    pub delta: f64,
    pub clean: f64,
    pub dropout: f64,
    pub dropedge: f64,
    pub dropnode: f64,
    pub dropmessage: f64,
}

impl EntropyRow {
    /// Holds for every valid input.
    pub fn dm_ge_dropout(&self) -> bool {
        self.dropmessage >= self.dropout
    }

    pub fn dm_ge_structural(&self) -> bool {
        self.dropmessage >= self.dropedge && self.dropmessage >= self.dropnode
    }

    /// Every dropped entropy is at least the clean one.
    pub fn all_ge_clean(&self) -> bool {
        [self.dropout, self.dropedge, self.dropnode, self.dropmessage]
            .iter()
            .all(|&h| h >= self.clean)
    }

    pub fn full_ordering(&self) -> bool {
        self.dm_ge_dropout() && self.dm_ge_structural() && self.all_ge_clean()
    }
}

pub fn entropy_ordering_scan(inputs: &EntropyInputs, deltas: &[f64]) -> Result<Vec<EntropyRow>> {
    deltas
        .iter()
        .map(|&delta| {
            Ok(EntropyRow {
                delta,
                clean: entropy_clean(inputs),
                dropout: entropy_expected(DropKind::Dropout, inputs, delta)?,
                dropedge: entropy_expected(DropKind::DropEdge, inputs, delta)?,
                dropnode: entropy_expected(DropKind::DropNode, inputs, delta)?,
                dropmessage: entropy_expected(DropKind::DropMessage, inputs, delta)?,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;
    use proptest::prelude::*;

    fn halves() -> EntropyInputs {
        EntropyInputs::new(vec![0.5, 0.5], vec![1, 1], vec![1, 1], 4).unwrap()
    }

    #[test]
    fn reference_values() {
        let ln2 = core::f64::consts::LN_2;
        assert!((entropy_clean(&halves()) - ln2).abs() < 1e-15);
        let e = entropy_expected(DropKind::DropEdge, &halves(), 0.5).unwrap();
        let direct = -0.5 * libm::log(0.5) + 0.5 * -libm::log(0.25);
        assert!((e - direct).abs() < 1e-15);
        assert!((e - 1.039721).abs() < 5e-7);
        for kind in DropKind::METHODS {
            assert!((entropy_expected(kind, &halves(), 0.0).unwrap() - ln2).abs() < 1e-15);
        }
    }

    #[test]
    fn equal_delivery_and_sender_counts_coincide() {
        let inputs = EntropyInputs::new(vec![0.2, 0.3, 0.5], vec![2, 5, 1], vec![2, 5, 1], 3).unwrap();
        for delta in [0.1, 0.5, 0.9] {
            assert_eq!(
                entropy_expected(DropKind::DropMessage, &inputs, delta).unwrap(),
                entropy_expected(DropKind::Dropout, &inputs, delta).unwrap()
            );
        }
    }

    #[test]
    fn uniform_scan() {
        let inputs = EntropyInputs::new(vec![0.25; 4], vec![2; 4], vec![8; 4], 16).unwrap();
        let grid: Vec<f64> = (1..=9).map(|i| i as f64 / 10.0).collect();
        let rows = entropy_ordering_scan(&inputs, &grid).unwrap();
        for row in &rows {
            assert!(row.dm_ge_dropout() && row.dm_ge_structural());
            assert!(row.dropmessage >= row.clean && row.dropout >= row.clean);
        }
        // DropEdge/DropNode stay above the clean entropy only while the binary
        // entropy of delta exceeds delta * ln 4, i.e. up to delta = 0.5.
        let structural_ok: Vec<bool> = rows.iter().map(|r| r.dropedge >= r.clean - 1e-12).collect();
        assert_eq!(structural_ok, [true, true, true, true, true, false, false, false, false]);
    }

    #[test]
    fn rejects_invalid_inputs() {
        assert!(EntropyInputs::new(vec![0.5, 0.4], vec![1, 1], vec![1, 1], 2).is_err());
        assert!(EntropyInputs::new(vec![0.5, 0.5], vec![2, 1], vec![1, 1], 2).is_err());
        assert!(EntropyInputs::new(vec![1.0], vec![0], vec![1], 2).is_err());
        assert!(entropy_expected(DropKind::Dropout, &halves(), 1.0).is_err());
    }

    fn inputs_strategy() -> impl Strategy<Value = EntropyInputs> {
        (1usize..6)
            .prop_flat_map(|k| {
                (
                    proptest::collection::vec(0.01f64..1.0, k),
                    proptest::collection::vec((1usize..20, 0usize..20), k),
                    1usize..32,
                )
            })
            .prop_map(|(w, counts, dim)| {
                let total: f64 = w.iter().sum();
                let mut p: Vec<f64> = w.iter().map(|x| x / total).collect();
                let rest: f64 = p[1..].iter().sum();
                p[0] = 1.0 - rest;
                let senders = counts.iter().map(|&(n, _)| n).collect();
                let deliveries = counts.iter().map(|&(n, e)| n + e).collect();
                EntropyInputs::new(p, senders, deliveries, dim).unwrap()
            })
    }

    proptest! {
        #[test]
        fn dropmessage_dominates_dropout(inputs in inputs_strategy(), delta in 0.0f64..0.999) {
            let dm = entropy_expected(DropKind::DropMessage, &inputs, delta).unwrap();
            let dout = entropy_expected(DropKind::Dropout, &inputs, delta).unwrap();
            prop_assert!(dm >= dout);
        }
    }
}
