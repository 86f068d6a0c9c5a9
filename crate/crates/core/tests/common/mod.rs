#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use treespark::WeightedGraph;

/// Connected graph with `3 ≤ n ≤ max_n` vertices and at most `max_m` edges,
/// weights drawn from a mix of integers, halves and continuous values.
pub fn random_small_graph(seed: u64, max_n: usize, max_m: usize) -> WeightedGraph {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    loop {
        let n = rng.gen_range(3..=max_n);
        let mut pairs: Vec<(usize, usize)> = (0..n)
            .flat_map(|u| (u + 1..n).map(move |v| (u, v)))
            .collect();
        // random spanning tree first so the result is connected
        let mut order: Vec<usize> = (0..n).collect();
        for i in (1..n).rev() {
            order.swap(i, rng.gen_range(0..=i));
        }
        let mut chosen: Vec<(usize, usize)> = (1..n)
            .map(|i| {
                let j = order[rng.gen_range(0..i)];
                let (a, b) = (order[i].min(j), order[i].max(j));
                (a, b)
            })
            .collect();
        pairs.retain(|p| !chosen.contains(p));
        let extra = rng.gen_range(0..=pairs.len().min(max_m.saturating_sub(chosen.len())));
        for _ in 0..extra {
            let k = rng.gen_range(0..pairs.len());
            chosen.push(pairs.swap_remove(k));
        }
        if chosen.len() > max_m {
            continue;
        }
        let edges: Vec<(usize, usize, f64)> = chosen
            .into_iter()
            .map(|(u, v)| {
                let w = match rng.gen_range(0..4) {
                    0 => 1.0,
                    1 => rng.gen_range(1..=4) as f64,
                    2 => 0.5,
                    _ => rng.gen_range(0.1..3.0),
                };
                (u, v, w)
            })
            .collect();
        return WeightedGraph::new(n, edges).expect("spanning tree keeps it connected");
    }
}
