use crate::graph::{HopClasses, PairTag};
use crate::stats::pairwise_sum;
use crate::{Error, Result, Tensor};
use alloc::vec::Vec;

/// `1 - cos(a, b)`; `None` when either vector has zero norm.
pub fn cosine_distance(a: &[f64], b: &[f64]) -> Option<f64> {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na = libm::sqrt(a.iter().map(|x| x * x).sum());
    let nb = libm::sqrt(b.iter().map(|x| x * x).sum());
    if na == 0.0 || nb == 0.0 {
        None
    } else {
        Some(1.0 - dot / (na * nb))
    }
}

/// Mean cosine distance over far pairs minus the mean over near pairs.
pub fn madgap(h: &Tensor, classes: &HopClasses) -> Result<f64> {
    if classes.num_nodes() != h.rows() {
        return Err(Error::shape("madgap", h.shape(), (classes.num_nodes(), h.cols())));
    }
    let mut near = Vec::new();
    let mut far = Vec::new();
    for (i, j, tag) in classes.pairs() {
        let bucket = match tag {
            PairTag::Near => &mut near,
            PairTag::Far => &mut far,
            PairTag::Neither => continue,
        };
        if let Some(d) = cosine_distance(h.row(i), h.row(j)) {
            bucket.push(d);
        }
    }
    if near.is_empty() {
        return Err(Error::NoValidPairs("near"));
    }
    if far.is_empty() {
        return Err(Error::NoValidPairs("far"));
    }
    Ok(pairwise_sum(&far) / far.len() as f64 - pairwise_sum(&near) / near.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{hop_distance_classes, Graph};
    use proptest::prelude::*;

    fn two_components() -> Graph {
        Graph::from_undirected_edges(4, &[(0, 1), (2, 3)]).unwrap()
    }

    #[test]
    fn identical_rows_give_zero() {
        let g = two_components();
        let classes = hop_distance_classes(&g, 3, 8).unwrap();
        assert_eq!(madgap(&Tensor::ones(4, 3), &classes).unwrap(), 0.0);
    }

    #[test]
    fn orthogonal_far_pairs_give_one() {
        let g = two_components();
        let classes = hop_distance_classes(&g, 3, 8).unwrap();
        let h = Tensor::from_fn(4, 2, |i, c| f64::from(u8::from(c == i / 2)));
        assert_eq!(madgap(&h, &classes).unwrap(), 1.0);
    }

    #[test]
    fn zero_rows_are_skipped_and_missing_pairs_error() {
        let g = two_components();
        let classes = hop_distance_classes(&g, 3, 8).unwrap();
        let mut h = Tensor::ones(4, 2);
        h.row_mut(0).fill(0.0);
        assert_eq!(madgap(&h, &classes).unwrap(), 0.0);
        h.row_mut(1).fill(0.0);
        assert!(matches!(madgap(&h, &classes), Err(Error::NoValidPairs("far"))));
        let path = Graph::from_undirected_edges(3, &[(0, 1), (1, 2)]).unwrap();
        let classes = hop_distance_classes(&path, 3, 8).unwrap();
        assert!(matches!(madgap(&Tensor::ones(3, 1), &classes), Err(Error::NoValidPairs("far"))));
    }

    proptest! {
        #[test]
        fn invariant_to_positive_row_scaling(
            values in proptest::collection::vec(-3.0f64..3.0, 12),
            scales in proptest::collection::vec(0.1f64..10.0, 4),
        ) {
            let g = two_components();
            let classes = hop_distance_classes(&g, 3, 8).unwrap();
            let h = Tensor::new(4, 3, values).unwrap();
            let scaled = Tensor::from_fn(4, 3, |i, c| h.get(i, c) * scales[i]);
            match (madgap(&h, &classes), madgap(&scaled, &classes)) {
                (Ok(a), Ok(b)) => prop_assert!((a - b).abs() < 1e-9),
                (Err(_), Err(_)) => {}
                other => prop_assert!(false, "{other:?}"),
            }
        }
    }
}
