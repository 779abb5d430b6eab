//! Subset families for exact checks: all subsets when small, otherwise
//! singletons, the full set and seeded pseudorandom subsets.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

/// Exhaustive enumeration up to this many items.
pub const EXHAUSTIVE_LIMIT: usize = 12;
/// Pseudorandom subsets drawn beyond the exhaustive limit.
pub const RANDOM_SUBSETS: usize = 256;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Coverage {
    Exhaustive,
    Sampled,
}

/// Index subsets of `0..n` as sorted vectors, with the coverage used.
pub fn subset_family(n: usize, seed: u64) -> (Vec<Vec<usize>>, Coverage) {
    subset_family_with(n, seed, EXHAUSTIVE_LIMIT)
}

pub fn subset_family_with(n: usize, seed: u64, limit: usize) -> (Vec<Vec<usize>>, Coverage) {
    if n <= limit {
        let all = (0..1usize << n)
            .map(|m| (0..n).filter(|i| m & (1 << i) != 0).collect())
            .collect();
        return (all, Coverage::Exhaustive);
    }
    let mut out: Vec<Vec<usize>> = (0..n).map(|i| vec![i]).collect();
    out.push((0..n).collect());
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..RANDOM_SUBSETS {
        out.push((0..n).filter(|_| rng.gen_bool(0.5)).collect());
    }
    (out, Coverage::Sampled)
}
