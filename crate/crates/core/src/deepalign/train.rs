//! Minibatch SGD over one network or an aligned pair.

use std::io::Write;

use ndarray::Array2;
use rand::seq::SliceRandom;

use super::forward::encode;
use super::grad::{gather_inputs, gradients, total_loss, Batch, JointData};
use super::loss::FusionRows;
use super::model::{init_params, init_seed, shuffle_seed, ArchitectureSpec, DimeParams, NetworkParams, Side};
use crate::error::{Error, Result};
use crate::metaprox::ProximityBundle;
use crate::netcore::{build_transition_matrix, AlignedPair, HeterogeneousNetwork};
use crate::seed;

/// Hyperparameters of the optimiser and the joint objective.
#[derive(Clone, Debug, PartialEq)]
pub struct TrainConfig {
    /// Weight of the cross-network fusion loss.
    pub alpha: f64,
    /// Weight of the squared-norm penalty on all weight matrices.
    pub beta: f64,
    /// Reconstruction weight on non-zero proximity entries.
    pub gamma: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub seed: u64,
    pub fusion_rows: FusionRows,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            alpha: 1.0,
            beta: 0.02,
            gamma: 100.0,
            epochs: 600,
            batch_size: 64,
            learning_rate: 0.001,
            seed: 0,
            fusion_rows: FusionRows::Literal,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        if !(self.gamma > 1.0) || !self.gamma.is_finite() {
            return bad(format!("gamma must be > 1, got {}", self.gamma));
        }
        if !(self.alpha >= 0.0) || !self.alpha.is_finite() {
            return bad(format!("alpha must be >= 0, got {}", self.alpha));
        }
        if !(self.beta >= 0.0) || !self.beta.is_finite() {
            return bad(format!("beta must be >= 0, got {}", self.beta));
        }
        if self.epochs == 0 {
            return bad("epochs must be >= 1".into());
        }
        if self.batch_size == 0 {
            return bad("batch size must be >= 1".into());
        }
        if !(self.learning_rate > 0.0) || !self.learning_rate.is_finite() {
            return bad(format!("learning rate must be > 0, got {}", self.learning_rate));
        }
        Ok(())
    }
}

/// One row per user, sigmoid outputs in `(0, 1)`.
#[derive(Clone, Debug, PartialEq)]
pub struct EmbeddingMatrix {
    pub user_ids: Vec<String>,
    pub values: Array2<f64>,
}

impl EmbeddingMatrix {
    pub fn n_users(&self) -> usize {
        self.values.nrows()
    }

    pub fn dim(&self) -> usize {
        self.values.ncols()
    }

    /// `user_id,z0,z1,...` with a header row. Floats use the shortest
    /// representation that round-trips.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        write!(out, "user_id")?;
        for k in 0..self.dim() {
            write!(out, ",z{k}")?;
        }
        writeln!(out)?;
        for (id, row) in self.user_ids.iter().zip(self.values.rows()) {
            write!(out, "{id}")?;
            for v in row {
                write!(out, ",{v:?}")?;
            }
            writeln!(out)?;
        }
        Ok(())
    }
}

/// Result of a training run.
#[derive(Clone, Debug)]
pub struct TrainOutput {
    pub emerging: EmbeddingMatrix,
    pub mature: Option<EmbeddingMatrix>,
    pub params: DimeParams,
    /// Mean minibatch objective within each epoch.
    pub loss_trace: Vec<f64>,
    /// Objective over all users, evaluated after each epoch.
    pub full_loss_trace: Vec<f64>,
}

/// Jointly trains both networks of `pair` with the same architecture.
pub fn train(
    pair: &AlignedPair,
    emerging: &ProximityBundle,
    mature: &ProximityBundle,
    arch: &ArchitectureSpec,
    cfg: &TrainConfig,
) -> Result<TrainOutput> {
    train_with(pair, emerging, mature, arch, arch, cfg)
}

/// Joint training with separate architectures per network.
pub fn train_with(
    pair: &AlignedPair,
    emerging: &ProximityBundle,
    mature: &ProximityBundle,
    emerging_arch: &ArchitectureSpec,
    mature_arch: &ArchitectureSpec,
    cfg: &TrainConfig,
) -> Result<TrainOutput> {
    cfg.validate()?;
    let (n1, n2) = (pair.emerging.n_users(), pair.mature.n_users());
    let params = init_params(emerging_arch, n1, Some((mature_arch, n2)), cfg.seed)?;
    let t = build_transition_matrix(pair);
    let data = JointData {
        emerging,
        mature: Some(mature),
        transition: Some(&t),
    };
    let ids = |net: &HeterogeneousNetwork| net.users().names().to_vec();
    run(data, params, cfg, ids(&pair.emerging), Some(ids(&pair.mature)))
}

/// Single-network model: the joint objective without the mature network.
pub fn embed_single(
    net: &HeterogeneousNetwork,
    bundle: &ProximityBundle,
    arch: &ArchitectureSpec,
    cfg: &TrainConfig,
) -> Result<TrainOutput> {
    embed_single_as(Side::Emerging, net, bundle, arch, cfg)
}

/// As [`embed_single`], drawing initial weights and batch order from the
/// streams of the given side. `embed_single_as(Side::Mature, ..)` matches
/// the mature half of an `alpha = 0` joint run.
pub fn embed_single_as(
    side: Side,
    net: &HeterogeneousNetwork,
    bundle: &ProximityBundle,
    arch: &ArchitectureSpec,
    cfg: &TrainConfig,
) -> Result<TrainOutput> {
    cfg.validate()?;
    let net_params = NetworkParams::init(arch, net.n_users(), init_seed(cfg.seed, side))?;
    let params = DimeParams::single(net_params);
    let mut cfg = cfg.clone();
    cfg.alpha = 0.0;
    run_streams(
        JointData::single(bundle),
        params,
        &cfg,
        net.users().names().to_vec(),
        None,
        side,
    )
}

fn run(
    data: JointData<'_>,
    params: DimeParams,
    cfg: &TrainConfig,
    ids1: Vec<String>,
    ids2: Option<Vec<String>>,
) -> Result<TrainOutput> {
    run_streams(data, params, cfg, ids1, ids2, Side::Emerging)
}

fn run_streams(
    data: JointData<'_>,
    mut params: DimeParams,
    cfg: &TrainConfig,
    ids1: Vec<String>,
    ids2: Option<Vec<String>>,
    first_side: Side,
) -> Result<TrainOutput> {
    let n1 = params.emerging.input_dim;
    let n2 = params.mature.as_ref().map_or(0, |m| m.input_dim);
    if data.emerging.n_users() != n1 || ids1.len() != n1 {
        return Err(Error::ShapeMismatch(format!(
            "emerging bundle covers {} users, network has {n1}",
            data.emerging.n_users()
        )));
    }
    if let Some(m) = data.mature {
        if m.n_users() != n2 {
            return Err(Error::ShapeMismatch(format!(
                "mature bundle covers {} users, network has {n2}",
                m.n_users()
            )));
        }
    }

    let mut rng1 = seed::rng(shuffle_seed(cfg.seed, first_side));
    let mut rng2 = seed::rng(shuffle_seed(cfg.seed, Side::Mature));
    let mut order1: Vec<usize> = (0..n1).collect();
    let mut order2: Vec<usize> = (0..n2).collect();
    let b = cfg.batch_size;
    let steps = n1.div_ceil(b).max(n2.div_ceil(b));
    let full = Batch {
        emerging: (0..n1).collect(),
        mature: (0..n2).collect(),
    };

    let mut loss_trace = Vec::with_capacity(cfg.epochs);
    let mut full_loss_trace = Vec::with_capacity(cfg.epochs);
    for epoch in 1..=cfg.epochs {
        order1.shuffle(&mut rng1);
        order2.shuffle(&mut rng2);
        let mut sum = 0.0;
        for s in 0..steps {
            let chunk = |order: &[usize]| order.iter().skip(s * b).take(b).copied().collect::<Vec<_>>();
            let batch = Batch {
                emerging: chunk(&order1),
                mature: chunk(&order2),
            };
            let (loss, grads) = gradients(&data, &batch, &params, cfg)?;
            if !loss.is_finite() {
                return Err(Error::Diverged { epoch });
            }
            sum += loss;
            params.add_scaled(&grads, -cfg.learning_rate);
        }
        loss_trace.push(sum / steps.max(1) as f64);
        let loss = total_loss(&data, &full, &params, cfg)?;
        if !loss.is_finite() {
            return Err(Error::Diverged { epoch });
        }
        full_loss_trace.push(loss);
    }

    let emerging = embed_all(&params.emerging, data.emerging, ids1)?;
    let mature = match (&params.mature, data.mature, ids2) {
        (Some(p), Some(bundle), Some(ids)) => Some(embed_all(p, bundle, ids)?),
        _ => None,
    };
    Ok(TrainOutput {
        emerging,
        mature,
        params,
        loss_trace,
        full_loss_trace,
    })
}

/// Encodes every user of a network.
pub fn embed_all(params: &NetworkParams, bundle: &ProximityBundle, user_ids: Vec<String>) -> Result<EmbeddingMatrix> {
    let rows: Vec<usize> = (0..params.input_dim).collect();
    let inputs = gather_inputs(bundle, params, &rows)?;
    let values = encode(params, inputs)?.z;
    Ok(EmbeddingMatrix { user_ids, values })
}
