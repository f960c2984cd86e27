//! Planted-community aligned network pairs.
//!
//! A population of persons is split into communities. The mature network
//! holds `n_users` persons; the emerging network holds the anchored subset
//! of those persons plus fresh ones, so anchored users share their
//! community across networks. Follow edges follow a planted partition
//! model scaled by per-person activity and popularity factors. Posts carry
//! words, hour-of-week timestamps and locations that lean toward a
//! community-specific slice of each attribute space.
//!
//! The emerging network is thinned by `emergence`: an edge between two
//! anchored persons survives from the mature network with that probability,
//! every other emerging edge is drawn at `emergence` times the mature rate,
//! and the mean post count is scaled the same way.

use std::fmt::Write as _;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::weighted::WeightedIndex;
use rand_distr::{Distribution, LogNormal, Poisson};

use crate::error::{Error, Result};
use crate::netcore::{AlignedPair, HeterogeneousNetwork, NetworkBuilder, TimeBucketing};
use crate::seed;

const HOURS_PER_WEEK: u32 = 168;
const WEEK_SECS: i64 = 7 * 24 * 3600;

#[derive(Clone, Debug, PartialEq)]
pub struct SynthConfig {
    /// Users in each network.
    pub n_users: usize,
    pub n_communities: usize,
    /// Relative size of community `c` is `size_ratio^c`; 1 gives equal
    /// communities.
    pub size_ratio: f64,
    /// Follow probability between members of the same community.
    pub p_intra: f64,
    /// Follow probability across communities.
    pub p_inter: f64,
    /// Mean posts per mature-network user.
    pub posts_per_user: f64,
    pub vocab_size: usize,
    pub words_per_post: usize,
    pub n_locations: usize,
    /// Probability that an attribute value is drawn from the author's
    /// community slice rather than uniformly.
    pub attr_skew: f64,
    pub anchor_fraction: f64,
    /// Thinning factor of the emerging network, in `(0, 1]`.
    pub emergence: f64,
    /// Log-scale standard deviation of per-person activity and popularity.
    /// Zero gives a plain planted partition.
    pub degree_spread: f64,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            n_users: 200,
            n_communities: 4,
            size_ratio: 0.6,
            p_intra: 0.15,
            p_inter: 0.01,
            posts_per_user: 6.0,
            vocab_size: 200,
            words_per_post: 4,
            n_locations: 24,
            attr_skew: 0.7,
            anchor_fraction: 0.6,
            emergence: 0.3,
            degree_spread: 0.8,
            seed: 0,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::InvalidConfig(msg.to_owned()));
        let prob = |p: f64| (0.0..=1.0).contains(&p);
        if self.n_users == 0 {
            return bad("n_users must be >= 1");
        }
        if self.n_communities == 0 || self.n_communities > self.n_users {
            return bad("n_communities must be in 1..=n_users");
        }
        if !prob(self.p_intra) || !prob(self.p_inter) || !prob(self.attr_skew) || !prob(self.anchor_fraction) {
            return bad("probabilities must lie in [0, 1]");
        }
        if self.n_communities > 1 && self.p_intra <= self.p_inter {
            return bad("p_intra must exceed p_inter");
        }
        if !(self.emergence > 0.0 && self.emergence <= 1.0) {
            return bad("emergence must lie in (0, 1]");
        }
        if !(self.posts_per_user >= 0.0 && self.posts_per_user.is_finite()) {
            return bad("posts_per_user must be finite and >= 0");
        }
        if self.vocab_size < self.n_communities || self.n_locations < self.n_communities {
            return bad("vocab_size and n_locations must be >= n_communities");
        }
        if self.n_communities > HOURS_PER_WEEK as usize {
            return bad("at most 168 communities (one hour-of-week slice each)");
        }
        if !(self.size_ratio > 0.0 && self.size_ratio <= 1.0) {
            return bad("size_ratio must lie in (0, 1]");
        }
        if !(self.degree_spread >= 0.0 && self.degree_spread.is_finite()) {
            return bad("degree_spread must be finite and >= 0");
        }
        Ok(())
    }

    /// Community sizes for `n_users` people: `size_ratio^c` shares rounded
    /// by largest remainder, each community getting at least one member.
    pub fn community_sizes(&self) -> Vec<usize> {
        let k = self.n_communities;
        let weights: Vec<f64> = (0..k).map(|c| self.size_ratio.powi(c as i32)).collect();
        let total: f64 = weights.iter().sum();
        let spare = (self.n_users - k) as f64;
        let raw: Vec<f64> = weights.iter().map(|w| spare * w / total).collect();
        let mut sizes: Vec<usize> = raw.iter().map(|r| r.floor() as usize + 1).collect();
        let mut order: Vec<usize> = (0..k).collect();
        order.sort_by(|&a, &b| (raw[b] - raw[b].floor()).total_cmp(&(raw[a] - raw[a].floor())).then(a.cmp(&b)));
        let short = self.n_users - sizes.iter().sum::<usize>();
        for &c in order.iter().take(short) {
            sizes[c] += 1;
        }
        sizes
    }

    /// Anchored persons, `round(anchor_fraction * n_users)`.
    pub fn n_anchored(&self) -> usize {
        (self.anchor_fraction * self.n_users as f64).round() as usize
    }
}

/// A generated pair with ground-truth communities.
#[derive(Clone, Debug)]
pub struct SynthPair {
    pub pair: AlignedPair,
    /// Community of each emerging-network user, by user index.
    pub emerging_labels: Vec<usize>,
    /// Community of each mature-network user, by user index.
    pub mature_labels: Vec<usize>,
}

impl SynthPair {
    /// `user_id,community` for both networks, emerging users first.
    pub fn labels_csv(&self) -> String {
        let mut s = String::from("user_id,community\n");
        for (net, labels) in [
            (&self.pair.emerging, &self.emerging_labels),
            (&self.pair.mature, &self.mature_labels),
        ] {
            for (i, c) in labels.iter().enumerate() {
                writeln!(s, "{},{c}", net.user_id(i)).unwrap();
            }
        }
        s
    }
}

struct Person {
    community: usize,
    activity: f64,
    popularity: f64,
}

/// Value in `0..n` leaning toward community `c`'s contiguous slice.
fn skewed(rng: &mut ChaCha8Rng, n: usize, k: usize, c: usize, skew: f64) -> usize {
    if rng.random_bool(skew) {
        let lo = c * n / k;
        let hi = (c + 1) * n / k;
        rng.random_range(lo..hi)
    } else {
        rng.random_range(0..n)
    }
}

fn follow_prob(cfg: &SynthConfig, a: &Person, b: &Person) -> f64 {
    let base = if a.community == b.community {
        cfg.p_intra
    } else {
        cfg.p_inter
    };
    (base * a.activity * b.popularity).min(1.0)
}

fn add_posts(
    b: &mut NetworkBuilder,
    rng: &mut ChaCha8Rng,
    cfg: &SynthConfig,
    author: &str,
    community: usize,
    mean: f64,
    counter: &mut usize,
) -> Result<()> {
    let n = if mean > 0.0 {
        Poisson::new(mean).unwrap().sample(rng) as usize
    } else {
        0
    };
    let k = cfg.n_communities;
    for _ in 0..n {
        let post = format!("p{counter}");
        *counter += 1;
        b.add_post(&post, author, 0)?;
        for _ in 0..cfg.words_per_post {
            let w = skewed(rng, cfg.vocab_size, k, community, cfg.attr_skew);
            b.add_word(&post, &format!("w{w}"), 0)?;
        }
        let hour = skewed(rng, HOURS_PER_WEEK as usize, k, community, cfg.attr_skew) as i64;
        let week = rng.random_range(0..52i64);
        let secs = week * WEEK_SECS + hour * 3600 + rng.random_range(0..3600i64);
        b.add_timestamp(&post, secs, 0)?;
        let loc = skewed(rng, cfg.n_locations, k, community, cfg.attr_skew);
        b.add_location(&post, &format!("l{loc}"), 0)?;
    }
    Ok(())
}

fn draw_factor(rng: &mut ChaCha8Rng, dist: &Option<LogNormal<f64>>) -> f64 {
    dist.as_ref().map_or(1.0, |d| d.sample(rng))
}

/// Generates an aligned pair. Output is a pure function of `cfg`.
pub fn generate_pair(cfg: &SynthConfig) -> Result<SynthPair> {
    cfg.validate()?;
    let n = cfg.n_users;
    let n_anchor = cfg.n_anchored();

    // persons 0..n live in the mature network; 0..n_anchor are anchored and
    // n..2n-n_anchor are emerging-only
    let n_persons = 2 * n - n_anchor;
    let mut rng = seed::rng(seed::derive_seed(cfg.seed, "synth/persons"));
    let sizes = cfg.community_sizes();
    let mut mature_comm: Vec<usize> = sizes.iter().enumerate().flat_map(|(c, &s)| std::iter::repeat_n(c, s)).collect();
    mature_comm.shuffle(&mut rng);
    let share = WeightedIndex::new(&sizes).expect("sizes are positive");
    // unit-mean log-normal factors
    let dist = (cfg.degree_spread > 0.0).then(|| {
        let s = cfg.degree_spread;
        LogNormal::new(-s * s / 2.0, s).unwrap()
    });
    let persons: Vec<Person> = (0..n_persons)
        .map(|p| Person {
            community: if p < n { mature_comm[p] } else { share.sample(&mut rng) },
            activity: draw_factor(&mut rng, &dist),
            popularity: draw_factor(&mut rng, &dist),
        })
        .collect();
    let emerging_persons: Vec<usize> = (0..n_anchor).chain(n..n_persons).collect();

    let mut mature = NetworkBuilder::new(TimeBucketing::HourOfWeek);
    let mut emerging = NetworkBuilder::new(TimeBucketing::HourOfWeek);
    let mid = |p: usize| format!("m{p}");
    let eid = |p: usize| format!("e{p}");
    for p in 0..n {
        mature.add_user(&mid(p), 0)?;
    }
    for &p in &emerging_persons {
        emerging.add_user(&eid(p), 0)?;
    }

    let mut rng = seed::rng(seed::derive_seed(cfg.seed, "synth/mature-edges"));
    let mut mature_edge = vec![false; n * n];
    for u in 0..n {
        for v in 0..n {
            if u != v && rng.random_bool(follow_prob(cfg, &persons[u], &persons[v])) {
                mature_edge[u * n + v] = true;
                mature.add_follow(&mid(u), &mid(v), 0)?;
            }
        }
    }

    let mut rng = seed::rng(seed::derive_seed(cfg.seed, "synth/emerging-edges"));
    for &u in &emerging_persons {
        for &v in &emerging_persons {
            if u == v {
                continue;
            }
            let keep = if u < n_anchor && v < n_anchor {
                mature_edge[u * n + v] && rng.random_bool(cfg.emergence)
            } else {
                rng.random_bool(cfg.emergence * follow_prob(cfg, &persons[u], &persons[v]))
            };
            if keep {
                emerging.add_follow(&eid(u), &eid(v), 0)?;
            }
        }
    }

    let mut rng = seed::rng(seed::derive_seed(cfg.seed, "synth/posts"));
    let mut counter = 0;
    for p in 0..n {
        add_posts(&mut mature, &mut rng, cfg, &mid(p), persons[p].community, cfg.posts_per_user, &mut counter)?;
    }
    let mut counter = 0;
    for &p in &emerging_persons {
        let mean = cfg.posts_per_user * cfg.emergence;
        add_posts(&mut emerging, &mut rng, cfg, &eid(p), persons[p].community, mean, &mut counter)?;
    }

    let emerging: HeterogeneousNetwork = emerging.build();
    let mature: HeterogeneousNetwork = mature.build();
    // user indices follow insertion order
    let anchors = (0..n_anchor).map(|p| (p, p)).collect();
    let emerging_labels = emerging_persons.iter().map(|&p| persons[p].community).collect();
    let mature_labels = (0..n).map(|p| persons[p].community).collect();
    Ok(SynthPair {
        pair: AlignedPair::new(emerging, mature, anchors)?,
        emerging_labels,
        mature_labels,
    })
}
