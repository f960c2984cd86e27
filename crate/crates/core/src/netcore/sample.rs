use std::collections::HashSet;

use rand::seq::index;

use super::HeterogeneousNetwork;
use crate::error::{Error, Result};
use crate::seed;

/// Number of survivors when keeping a fraction `lambda` of `count` items.
///
/// `0.3 * 10` is `3.0000000000000004` in binary floating point, so a small
/// slack is subtracted before rounding up.
pub(crate) fn kept_count(lambda: f64, count: usize) -> usize {
    let raw = lambda * count as f64;
    ((raw - 1e-9).ceil().max(0.0) as usize).min(count)
}

fn choose(count: usize, lambda: f64, rng: &mut impl rand::Rng) -> Vec<usize> {
    let keep = kept_count(lambda, count);
    let mut chosen = index::sample(rng, count, keep).into_vec();
    chosen.sort_unstable();
    chosen
}

/// Keeps exactly `ceil(lambda * count)` of the non-protected follow edges and
/// of the posts, chosen uniformly without replacement. Users are never
/// removed and protected edges always survive.
pub fn sample_network(
    net: &HeterogeneousNetwork,
    lambda: f64,
    seed: u64,
    protected_edges: &HashSet<(usize, usize)>,
) -> Result<HeterogeneousNetwork> {
    if !(lambda > 0.0 && lambda <= 1.0) {
        return Err(Error::InvalidLambda(lambda));
    }
    if lambda == 1.0 {
        return Ok(net.clone());
    }

    let mut edge_rng = seed::rng(seed::derive_seed(seed, "sample/edges"));
    let mut post_rng = seed::rng(seed::derive_seed(seed, "sample/posts"));

    let candidates: Vec<usize> = (0..net.follows().len())
        .filter(|&i| !protected_edges.contains(&net.follows()[i]))
        .collect();
    let kept: HashSet<usize> = choose(candidates.len(), lambda, &mut edge_rng)
        .into_iter()
        .map(|i| candidates[i])
        .collect();
    let follows = net
        .follows()
        .iter()
        .enumerate()
        .filter(|(i, e)| kept.contains(i) || protected_edges.contains(e))
        .map(|(_, &e)| e)
        .collect();

    let posts = choose(net.n_posts(), lambda, &mut post_rng);
    Ok(net.with_follows(follows).with_posts(&posts))
}
