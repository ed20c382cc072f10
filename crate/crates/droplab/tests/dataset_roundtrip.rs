use droplab::{load_dataset, save_dataset};
use droplab_core::{Graph, Split, Tensor};
use proptest::prelude::*;

fn graph_strategy() -> impl Strategy<Value = Graph> {
    (1usize..12, 1usize..4).prop_flat_map(|(n, c)| {
        let pairs = prop::collection::vec((0..n, 0..n), 0..3 * n);
        let features = prop::collection::vec(-1e6f64..1e6, n * c);
        let labels = prop::collection::vec(prop::option::of(0usize..4), n);
        let splits = prop::collection::vec(0u8..4, n);
        (pairs, features, labels, splits).prop_map(move |(pairs, features, labels, splits)| {
            let mut edges: Vec<(usize, usize)> = pairs
                .into_iter()
                .filter(|(u, v)| u != v)
                .map(|(u, v)| (u.min(v), u.max(v)))
                .collect();
            edges.sort_unstable();
            edges.dedup();
            let split = splits
                .into_iter()
                .map(|s| match s {
                    0 => Split::Train,
                    1 => Split::Val,
                    2 => Split::Test,
                    _ => Split::None,
                })
                .collect();
            Graph::from_undirected_edges(n, &edges)
                .unwrap()
                .with_features(Tensor::new(n, c, features).unwrap())
                .unwrap()
                .with_labels(labels)
                .unwrap()
                .with_split(split)
                .unwrap()
        })
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn save_then_load_is_identity(g in graph_strategy()) {
        let dir = tempfile::tempdir().unwrap();
        save_dataset(&g, dir.path()).unwrap();
        let back = load_dataset(dir.path()).unwrap();
        prop_assert_eq!(back.undirected_edges(), g.undirected_edges());
        prop_assert_eq!(back.features(), g.features());
        prop_assert_eq!(back.labels(), g.labels());
        prop_assert_eq!(back.split(), g.split());
    }
}
