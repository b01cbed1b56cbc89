use std::collections::HashMap;

use percolate::{
    estimate_block_probs, generate_sbm, load_partitioned_edge_list, BlockModelParams, Estimator,
    IngestOptions,
};
use proptest::prelude::*;

#[test]
fn sbm_estimates_concentrate() {
    let params = BlockModelParams::new(2000, 0.8, 0.2, vec![0.5, 0.0, 0.5]).unwrap();
    let g = generate_sbm(&params, 2024).unwrap();
    let est = estimate_block_probs(&g, Estimator::PerPair).unwrap();
    assert!((0.79..=0.81).contains(&est.p_in_hat), "{}", est.p_in_hat);
    assert!((0.19..=0.21).contains(&est.p_out_hat), "{}", est.p_out_hat);
    assert_eq!(est.rho_hat, vec![0.5, 0.0, 0.5]);
}

#[test]
fn four_sigma_concentration() {
    for (i, (p_in, p_out)) in [(0.8, 0.2), (0.3, 0.05), (0.9, 0.1)]
        .into_iter()
        .enumerate()
    {
        let params = BlockModelParams::new(1200, p_in, p_out, vec![0.25, 0.35, 0.4]).unwrap();
        let g = generate_sbm(&params, 77 + i as u64).unwrap();
        let est = estimate_block_probs(&g, Estimator::PerPair).unwrap();
        let intra_pairs: f64 = g
            .block_sizes()
            .iter()
            .map(|&s| (s * s.saturating_sub(1) / 2) as f64)
            .sum();
        let sigma = (p_in * (1.0 - p_in) / intra_pairs).sqrt();
        assert!((est.p_in_hat - p_in).abs() <= 4.0 * sigma);
    }
}

fn edge_list() -> impl Strategy<Value = (Vec<(String, String)>, HashMap<String, usize>)> {
    (2usize..40, 1usize..4).prop_flat_map(|(n, b)| {
        (
            prop::collection::vec((0..n, 0..n), 1..200),
            prop::collection::vec(1..=b, n),
        )
            .prop_map(|(edges, labels)| {
                let edges = edges
                    .into_iter()
                    .map(|(a, c)| (format!("v{a}"), format!("v{c}")))
                    .collect();
                let labels = labels
                    .into_iter()
                    .enumerate()
                    .map(|(i, l)| (format!("v{i}"), l))
                    .collect();
                (edges, labels)
            })
    })
}

proptest! {
    #[test]
    fn handshake_identity(n in 1usize..80, p_in in 0.0f64..=1.0, p_out in 0.0f64..=1.0, seed in any::<u64>()) {
        let params = BlockModelParams::new(n, p_in, p_out, vec![0.5, 0.5]).unwrap();
        let g = generate_sbm(&params, seed).unwrap();
        prop_assert_eq!(g.degree_sum(), 2 * g.edge_count());
        for u in 0..n {
            prop_assert_eq!(g.degree(u), g.neighbors(u).len());
            prop_assert!(g.neighbors(u).windows(2).all(|w| w[0] < w[1]));
            for &w in g.neighbors(u) {
                prop_assert!(w as usize != u);
                prop_assert!(g.has_edge(w as usize, u));
            }
        }
        let again = generate_sbm(&params, seed).unwrap();
        prop_assert_eq!(g.edges().collect::<Vec<_>>(), again.edges().collect::<Vec<_>>());
    }

    #[test]
    fn ingestion_is_idempotent((edges, labels) in edge_list(), min_degree in 1usize..4) {
        let opts = IngestOptions { min_degree, iterative: true };
        let Ok(first) = load_partitioned_edge_list(edges, &labels, opts) else { return Ok(()); };
        let g = &first.graph;
        let out_edges: Vec<(String, String)> = g
            .edges()
            .map(|(a, b)| (first.original_ids[a].clone(), first.original_ids[b].clone()))
            .collect();
        let out_labels: HashMap<String, usize> = first
            .original_ids
            .iter()
            .enumerate()
            .map(|(i, id)| (id.clone(), g.block_of(i) + 1))
            .collect();
        let second = load_partitioned_edge_list(out_edges, &out_labels, opts).unwrap();
        prop_assert_eq!(&second.original_ids, &first.original_ids);
        prop_assert_eq!(second.graph.to_file(), first.graph.to_file());
        prop_assert_eq!(second.stats.nodes_removed, 0);
    }
}
