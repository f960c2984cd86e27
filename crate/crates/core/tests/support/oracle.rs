// Brute-force references for meta-path counting and proximity.
//
// Everything here walks explicit node sequences over the raw network
// accessors, so it shares no code with the sparse-product implementation.

use dime_core::netcore::io::parse_network;
use dime_core::netcore::TimeBucketing;
use dime_core::{HeterogeneousNetwork, MetaPath};
use rand::Rng;

/// Random edge-list-v1 network with at most `max_users` users and
/// `max_posts` posts. Small vocabularies make shared attributes common.
pub fn random_network(rng: &mut impl Rng, max_users: usize, max_posts: usize) -> HeterogeneousNetwork {
    let n = rng.random_range(1..=max_users);
    let n_posts = rng.random_range(0..=max_posts);
    let mut doc = String::new();
    for u in 0..n {
        doc += &format!("U u{u}\n");
    }
    let p_follow = rng.random_range(0.0..0.5);
    for a in 0..n {
        for b in 0..n {
            if a != b && rng.random_bool(p_follow) {
                doc += &format!("F u{a} u{b}\n");
            }
        }
    }
    for p in 0..n_posts {
        doc += &format!("P p{p} u{}\n", rng.random_range(0..n));
        for _ in 0..rng.random_range(0..4) {
            doc += &format!("AW p{p} w{}\n", rng.random_range(0..6));
        }
        for _ in 0..rng.random_range(0..3) {
            // a few hours spread over two weeks so buckets wrap
            doc += &format!("AT p{p} {}\n", rng.random_range(0..14) * 3600 * 24 + rng.random_range(0..3) * 3600);
        }
        for _ in 0..rng.random_range(0..2) {
            doc += &format!("AL p{p} l{}\n", rng.random_range(0..4));
        }
    }
    parse_network(&doc, TimeBucketing::HourOfWeek).unwrap()
}

fn follows(net: &HeterogeneousNetwork, a: usize, b: usize) -> bool {
    net.follows().contains(&(a, b))
}

fn attr_tokens(net: &HeterogeneousNetwork, post: usize, path: MetaPath) -> Vec<i64> {
    let attrs = &net.post_attrs()[post];
    let mut out: Vec<i64> = match path {
        MetaPath::Phi5 => attrs.words.iter().map(|&w| w as i64).collect(),
        MetaPath::Phi6 => attrs.timestamps.iter().map(|&t| t.div_euclid(3600).rem_euclid(168)).collect(),
        MetaPath::Phi7 => attrs.locations.iter().map(|&l| l as i64).collect(),
        _ => unreachable!(),
    };
    out.sort_unstable();
    out.dedup();
    out
}

/// Number of instances of `path` from user `i` to user `j`, by enumeration.
pub fn brute_count(net: &HeterogeneousNetwork, path: MetaPath, i: usize, j: usize) -> u64 {
    let n = net.n_users();
    let mid = |a: &dyn Fn(usize) -> bool| (0..n).filter(|&k| a(k)).count() as u64;
    match path {
        MetaPath::Phi0 => follows(net, i, j) as u64,
        MetaPath::Phi1 => mid(&|k| follows(net, i, k) && follows(net, k, j)),
        MetaPath::Phi2 => mid(&|k| follows(net, i, k) && follows(net, j, k)),
        MetaPath::Phi3 => mid(&|k| follows(net, k, i) && follows(net, k, j)),
        MetaPath::Phi4 => mid(&|k| follows(net, k, i) && follows(net, j, k)),
        _ => {
            let authors = net.post_authors();
            let mut total = 0;
            for p in (0..net.n_posts()).filter(|&p| authors[p] == i) {
                for q in (0..net.n_posts()).filter(|&q| authors[q] == j) {
                    let tq = attr_tokens(net, q, path);
                    total += attr_tokens(net, p, path).iter().filter(|t| tq.contains(t)).count() as u64;
                }
            }
            total
        }
    }
}

/// Dense count matrix with the diagonal zeroed.
pub fn brute_counts(net: &HeterogeneousNetwork, path: MetaPath) -> Vec<Vec<u64>> {
    let n = net.n_users();
    (0..n)
        .map(|i| (0..n).map(|j| if i == j { 0 } else { brute_count(net, path, i, j) }).collect())
        .collect()
}

/// `2 c(i,j) / (Σ_k c(i,k) + Σ_k c(k,j))`, one entry at a time.
pub fn scalar_proximity(counts: &[Vec<u64>], i: usize, j: usize) -> f64 {
    let out: u64 = counts[i].iter().sum();
    let inc: u64 = counts.iter().map(|row| row[j]).sum();
    if out + inc == 0 {
        0.0
    } else {
        2.0 * counts[i][j] as f64 / (out + inc) as f64
    }
}
