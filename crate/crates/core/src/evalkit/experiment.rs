//! Cross-validated link prediction and clustering drivers.

use std::collections::HashSet;
use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rayon::prelude::*;

use super::cluster::{community_metrics, kmeans, CommunityMetrics};
use super::link::{
    auc, classification_metrics, link_features, sample_negatives, train_linear_classifier, SvmConfig,
};
use crate::deepalign::{embed_single, train, ArchitectureSpec, FusionRows, TrainConfig};
use crate::error::{Error, Result};
use crate::metaprox::{proximity_bundle_for, MetaPath, ProximityBundle, ProximityOptions};
use crate::netcore::{sample_network, AlignedPair, HeterogeneousNetwork};
use crate::seed;

/// Embedding method under evaluation.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Method {
    /// Joint training with the mature network.
    Dime,
    /// Emerging network alone, all configured meta paths.
    DimeSh,
    /// Emerging network alone, follow links only.
    Autoencoder,
    /// Joint training with the fusion loss restricted to anchored rows.
    DimeAnchorsOnly,
}

impl Method {
    pub const ALL: [Method; 4] = [Method::Dime, Method::DimeSh, Method::Autoencoder, Method::DimeAnchorsOnly];

    pub fn name(self) -> &'static str {
        match self {
            Method::Dime => "dime",
            Method::DimeSh => "dime-sh",
            Method::Autoencoder => "auto",
            Method::DimeAnchorsOnly => "dime-anchors",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::InvalidConfig(format!("unknown method `{s}`")))
    }
}

/// Sample mean and standard deviation (`n - 1` denominator; 0 for one run).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MeanStd {
    pub mean: f64,
    pub std: f64,
    pub n: usize,
}

impl MeanStd {
    pub fn of(xs: &[f64]) -> MeanStd {
        let n = xs.len();
        if n == 0 {
            return MeanStd {
                mean: f64::NAN,
                std: f64::NAN,
                n,
            };
        }
        let mean = xs.iter().sum::<f64>() / n as f64;
        let std = if n > 1 {
            (xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1) as f64).sqrt()
        } else {
            0.0
        };
        MeanStd { mean, std, n }
    }
}

/// `0.852±0.004`
impl fmt::Display for MeanStd {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:.3}±{:.3}", self.mean, self.std)
    }
}

/// Shared settings of both experiment drivers.
#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentConfig {
    pub arch: ArchitectureSpec,
    pub train: TrainConfig,
    /// Fraction of emerging-network follow links and posts retained.
    pub lambda: f64,
    pub seed: u64,
}

/// Partition of labelled pairs into folds.
#[derive(Clone, Debug, PartialEq)]
pub struct LinkExperimentPlan {
    pub positives: Vec<(usize, usize)>,
    pub negatives: Vec<(usize, usize)>,
    pub positive_folds: Vec<usize>,
    pub negative_folds: Vec<usize>,
    pub n_folds: usize,
    pub theta: usize,
}

/// Positives are every follow link of `net`; negatives are `theta` times as
/// many sampled non-links. Each class is shuffled and dealt round-robin into
/// `n_folds` folds, so fold sizes differ by at most one.
pub fn plan_link_experiment(net: &HeterogeneousNetwork, theta: usize, n_folds: usize, seed: u64) -> Result<LinkExperimentPlan> {
    if !(1..=10).contains(&theta) {
        return Err(Error::InvalidConfig(format!("theta must be in 1..=10, got {theta}")));
    }
    if n_folds < 2 {
        return Err(Error::InvalidConfig("need at least two folds".into()));
    }
    let positives = net.follows().to_vec();
    if positives.len() < n_folds {
        return Err(Error::InvalidConfig(format!(
            "{} follow links cannot fill {n_folds} folds",
            positives.len()
        )));
    }
    let negatives = sample_negatives(net, theta, &positives, seed::derive_seed(seed, "link/negatives"))?;
    let deal = |len: usize, label: &str| {
        let mut order: Vec<usize> = (0..len).collect();
        order.shuffle(&mut seed::rng(seed::derive_seed(seed, label)));
        let mut folds = vec![0; len];
        for (rank, &i) in order.iter().enumerate() {
            folds[i] = rank % n_folds;
        }
        folds
    };
    Ok(LinkExperimentPlan {
        positive_folds: deal(positives.len(), "link/folds/positive"),
        negative_folds: deal(negatives.len(), "link/folds/negative"),
        positives,
        negatives,
        n_folds,
        theta,
    })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LinkFoldMetrics {
    pub auc: f64,
    pub accuracy: f64,
    pub recall: f64,
    pub f1: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct LinkResult {
    pub method: Method,
    pub folds: Vec<LinkFoldMetrics>,
}

impl LinkResult {
    pub fn summary(&self) -> Vec<(&'static str, MeanStd)> {
        let col = |f: fn(&LinkFoldMetrics) -> f64| MeanStd::of(&self.folds.iter().map(f).collect::<Vec<_>>());
        vec![
            ("auc", col(|m| m.auc)),
            ("accuracy", col(|m| m.accuracy)),
            ("recall", col(|m| m.recall)),
            ("f1", col(|m| m.f1)),
        ]
    }

    pub fn mean_auc(&self) -> f64 {
        MeanStd::of(&self.folds.iter().map(|m| m.auc).collect::<Vec<_>>()).mean
    }
}

fn paths_for(method: Method, arch: &ArchitectureSpec) -> Vec<MetaPath> {
    match method {
        Method::Autoencoder => vec![MetaPath::Phi0],
        _ => arch.paths.clone(),
    }
}

/// Embeds the emerging network of `pair` with `method`. `mature` holds the
/// mature network's bundle for the joint methods.
pub fn embed_emerging(
    method: Method,
    pair: &AlignedPair,
    mature: Option<&ProximityBundle>,
    arch: &ArchitectureSpec,
    cfg: &TrainConfig,
) -> Result<ndarray::Array2<f64>> {
    let paths = paths_for(method, arch);
    let arch = arch.with_paths(&paths);
    let bundle = proximity_bundle_for(&pair.emerging, &paths, &ProximityOptions::default());
    let out = match method {
        Method::DimeSh | Method::Autoencoder => embed_single(&pair.emerging, &bundle, &arch, cfg)?,
        Method::Dime | Method::DimeAnchorsOnly => {
            let mut cfg = cfg.clone();
            if method == Method::DimeAnchorsOnly {
                cfg.fusion_rows = FusionRows::AnchorsOnly;
            }
            let owned;
            let mature = match mature {
                Some(m) => m,
                None => {
                    owned = proximity_bundle_for(&pair.mature, &paths, &ProximityOptions::default());
                    &owned
                }
            };
            train(pair, &bundle, mature, &arch, &cfg)?
        }
    };
    Ok(out.emerging.values)
}

fn mature_bundle(method: Method, pair: &AlignedPair, arch: &ArchitectureSpec) -> Option<ProximityBundle> {
    matches!(method, Method::Dime | Method::DimeAnchorsOnly)
        .then(|| proximity_bundle_for(&pair.mature, &paths_for(method, arch), &ProximityOptions::default()))
}

/// Runs one fold: hides the fold's positive links, thins the rest to
/// `lambda`, embeds, fits the classifier on the other folds' pairs and
/// scores this fold's pairs.
fn run_fold(
    pair: &AlignedPair,
    mature: Option<&ProximityBundle>,
    plan: &LinkExperimentPlan,
    method: Method,
    cfg: &ExperimentConfig,
    svm: &SvmConfig,
    fold: usize,
) -> Result<LinkFoldMetrics> {
    let hidden: HashSet<(usize, usize)> = plan
        .positives
        .iter()
        .zip(&plan.positive_folds)
        .filter(|&(_, &f)| f == fold)
        .map(|(&e, _)| e)
        .collect();
    let visible = pair.emerging.without_follows(&hidden);
    let sampled = sample_network(
        &visible,
        cfg.lambda,
        seed::derive_indexed(cfg.seed, "link/sample", fold),
        &HashSet::new(),
    )?;
    let fold_pair = pair.with_emerging(sampled);
    let mut train_cfg = cfg.train.clone();
    train_cfg.seed = seed::derive_indexed(cfg.seed, "link/train", fold);
    let z = embed_emerging(method, &fold_pair, mature, &cfg.arch, &train_cfg)?;

    let mut train_x = Vec::new();
    let mut train_y = Vec::new();
    let mut test_x = Vec::new();
    let mut test_y = Vec::new();
    let labelled = plan
        .positives
        .iter()
        .zip(&plan.positive_folds)
        .map(|(&p, &f)| (p, f, 1i8))
        .chain(plan.negatives.iter().zip(&plan.negative_folds).map(|(&p, &f)| (p, f, -1i8)));
    for (p, f, y) in labelled {
        let x = link_features(&z, p)?;
        if f == fold {
            test_x.push(x);
            test_y.push(y);
        } else {
            train_x.push(x);
            train_y.push(y);
        }
    }
    let clf = train_linear_classifier(&train_x, &train_y, svm, seed::derive_indexed(cfg.seed, "link/svm", fold))?;
    let scores: Vec<f64> = test_x.iter().map(|x| clf.score(x)).collect();
    let pred: Vec<i8> = test_x.iter().map(|x| clf.predict(x)).collect();
    let m = classification_metrics(&pred, &test_y)?;
    Ok(LinkFoldMetrics {
        auc: auc(&scores, &test_y)?,
        accuracy: m.accuracy,
        recall: m.recall,
        f1: m.f1,
    })
}

/// Link prediction with k-fold cross-validation over the emerging network.
/// Folds run in parallel; results are ordered by fold index.
pub fn run_link_experiment(
    pair: &AlignedPair,
    method: Method,
    cfg: &ExperimentConfig,
    theta: usize,
    n_folds: usize,
    svm: &SvmConfig,
) -> Result<LinkResult> {
    let plan = plan_link_experiment(&pair.emerging, theta, n_folds, cfg.seed)?;
    run_link_plan(pair, &plan, method, cfg, svm)
}

pub fn run_link_plan(
    pair: &AlignedPair,
    plan: &LinkExperimentPlan,
    method: Method,
    cfg: &ExperimentConfig,
    svm: &SvmConfig,
) -> Result<LinkResult> {
    let mature = mature_bundle(method, pair, &cfg.arch);
    let folds = (0..plan.n_folds)
        .into_par_iter()
        .map(|f| run_fold(pair, mature.as_ref(), plan, method, cfg, svm, f))
        .collect::<Result<Vec<_>>>()?;
    Ok(LinkResult { method, folds })
}

#[derive(Clone, Debug, PartialEq)]
pub struct CommunityResult {
    pub method: Method,
    pub k: usize,
    pub runs: Vec<CommunityMetrics>,
}

impl CommunityResult {
    pub fn summary(&self) -> Vec<(&'static str, MeanStd)> {
        let col = |f: fn(&CommunityMetrics) -> f64| MeanStd::of(&self.runs.iter().map(f).collect::<Vec<_>>());
        vec![
            ("density", col(|m| m.density)),
            ("separability", col(|m| m.separability)),
            ("coverage", col(|m| m.coverage)),
            ("expansion", col(|m| m.expansion)),
        ]
    }
}

/// Thins the emerging network to `lambda`, embeds it, clusters the
/// embeddings into `k` groups and scores the clustering on the unthinned
/// follow graph. Repeats use independent sub-seeds.
pub fn run_community_experiment(
    pair: &AlignedPair,
    method: Method,
    cfg: &ExperimentConfig,
    k: usize,
    repeats: usize,
) -> Result<CommunityResult> {
    if repeats == 0 {
        return Err(Error::InvalidConfig("need at least one repeat".into()));
    }
    let mature = mature_bundle(method, pair, &cfg.arch);
    let runs = (0..repeats)
        .into_par_iter()
        .map(|r| {
            let sampled = sample_network(
                &pair.emerging,
                cfg.lambda,
                seed::derive_indexed(cfg.seed, "community/sample", r),
                &HashSet::new(),
            )?;
            let run_pair = pair.with_emerging(sampled);
            let mut train_cfg = cfg.train.clone();
            train_cfg.seed = seed::derive_indexed(cfg.seed, "community/train", r);
            let z = embed_emerging(method, &run_pair, mature.as_ref(), &cfg.arch, &train_cfg)?;
            let clustering = kmeans(&z, k, seed::derive_indexed(cfg.seed, "community/kmeans", r))?;
            community_metrics(&pair.emerging, &clustering)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(CommunityResult { method, k, runs })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synthgen::{generate_pair, SynthConfig};

    fn tiny_setup() -> (AlignedPair, ExperimentConfig) {
        let g = generate_pair(&SynthConfig {
            n_users: 30,
            n_communities: 2,
            p_intra: 0.3,
            p_inter: 0.02,
            emergence: 0.6,
            seed: 2,
            ..SynthConfig::default()
        })
        .unwrap();
        let cfg = ExperimentConfig {
            arch: ArchitectureSpec {
                encoder_widths: vec![6],
                fusion_width: 4,
                embedding_dim: 3,
                ..ArchitectureSpec::default()
            },
            train: TrainConfig {
                epochs: 2,
                learning_rate: 1e-5,
                ..TrainConfig::default()
            },
            lambda: 0.5,
            seed: 11,
        };
        (g.pair, cfg)
    }

    #[test]
    fn folds_partition_both_classes() {
        let (pair, _) = tiny_setup();
        let plan = plan_link_experiment(&pair.emerging, 2, 10, 5).unwrap();
        assert_eq!(plan.negatives.len(), 2 * plan.positives.len());
        for folds in [&plan.positive_folds, &plan.negative_folds] {
            let mut sizes = vec![0usize; 10];
            folds.iter().for_each(|&f| sizes[f] += 1);
            assert!(sizes.iter().max().unwrap() - sizes.iter().min().unwrap() <= 1);
            assert_eq!(sizes.iter().sum::<usize>(), folds.len());
        }
        let pos: HashSet<_> = plan.positives.iter().collect();
        assert!(plan.negatives.iter().all(|p| !pos.contains(p) && p.0 != p.1));
        assert_eq!(plan, plan_link_experiment(&pair.emerging, 2, 10, 5).unwrap());
    }

    #[test]
    fn link_experiment_is_deterministic() {
        let (pair, cfg) = tiny_setup();
        let svm = SvmConfig {
            passes: 5,
            ..SvmConfig::default()
        };
        for method in Method::ALL {
            let a = run_link_experiment(&pair, method, &cfg, 1, 3, &svm).unwrap();
            assert_eq!(a.folds.len(), 3);
            assert!(a.folds.iter().all(|m| (0.0..=1.0).contains(&m.auc)));
            assert_eq!(a, run_link_experiment(&pair, method, &cfg, 1, 3, &svm).unwrap());
        }
    }

    #[test]
    fn community_runs_satisfy_identities() {
        let (pair, cfg) = tiny_setup();
        let r = run_community_experiment(&pair, Method::DimeSh, &cfg, 2, 2).unwrap();
        assert_eq!(r.runs.len(), 2);
        for m in &r.runs {
            assert_eq!(m.coverage + m.expansion, 1.0);
        }
    }

    #[test]
    fn method_names_round_trip() {
        for m in Method::ALL {
            assert_eq!(m.name().parse::<Method>().unwrap(), m);
        }
        assert!("svm".parse::<Method>().is_err());
    }

    #[test]
    fn mean_std_format() {
        let s = MeanStd::of(&[0.85, 0.854, 0.852]);
        assert_eq!(s.to_string(), "0.852±0.002");
        assert_eq!(MeanStd::of(&[0.5]).std, 0.0);
    }
}
