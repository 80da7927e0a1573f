//! Blossom matching against exhaustive enumeration on small random graphs.

use proptest::prelude::*;
use superunit::decoder::blossom::max_weight_matching;

/// Best (cardinality, weight) over all matchings, by brute force.
fn exhaustive(n: usize, edges: &[(usize, usize, i64)], max_card: bool) -> (usize, i64) {
    fn go(
        k: usize,
        used: &mut Vec<bool>,
        edges: &[(usize, usize, i64)],
        card: usize,
        w: i64,
        best: &mut Vec<(usize, i64)>,
    ) {
        if k == edges.len() {
            best.push((card, w));
            return;
        }
        go(k + 1, used, edges, card, w, best);
        let (a, b, wt) = edges[k];
        if !used[a] && !used[b] {
            used[a] = true;
            used[b] = true;
            go(k + 1, used, edges, card + 1, w + wt, best);
            used[a] = false;
            used[b] = false;
        }
    }
    let mut all = Vec::new();
    go(0, &mut vec![false; n], edges, 0, 0, &mut all);
    if max_card {
        *all.iter().max().unwrap()
    } else {
        (0, all.iter().map(|x| x.1).max().unwrap())
    }
}

fn graph() -> impl Strategy<Value = (usize, Vec<(usize, usize, i64)>)> {
    (2usize..9)
        .prop_flat_map(|n| {
            let pairs: Vec<(usize, usize)> = (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j))).collect();
            let m = pairs.len();
            (
                Just(n),
                Just(pairs),
                proptest::collection::vec(proptest::option::weighted(0.6, -20i64..60), m),
            )
        })
        .prop_map(|(n, pairs, ws)| {
            let edges = pairs
                .into_iter()
                .zip(ws)
                .filter_map(|((i, j), w)| w.map(|w| (i, j, 2 * w)))
                .collect();
            (n, edges)
        })
}

fn evaluate(n: usize, edges: &[(usize, usize, i64)], mate: &[Option<usize>]) -> (usize, i64) {
    let mut card = 0;
    let mut w = 0;
    for v in 0..n {
        if let Some(u) = mate[v] {
            assert_eq!(mate[u], Some(v), "mate must be symmetric");
            if v < u {
                card += 1;
                w += edges
                    .iter()
                    .filter(|e| (e.0 == v && e.1 == u) || (e.0 == u && e.1 == v))
                    .map(|e| e.2)
                    .max()
                    .expect("matched pair must be an edge");
            }
        }
    }
    (card, w)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(400))]

    #[test]
    fn max_weight_is_optimal((n, edges) in graph()) {
        let mate = max_weight_matching(n, &edges, false);
        let (_, w) = evaluate(n, &edges, &mate);
        prop_assert_eq!(w, exhaustive(n, &edges, false).1);
    }

    #[test]
    fn max_cardinality_then_weight_is_optimal((n, edges) in graph()) {
        let mate = max_weight_matching(n, &edges, true);
        prop_assert_eq!(evaluate(n, &edges, &mate), exhaustive(n, &edges, true));
    }
}
