//! Minibatch objective and its analytic gradient.
//!
//! For a batch `(B1, B2)` of emerging and mature users the objective is
//!
//! ```text
//! L = L1(B1) + L2(B2) + α L12(B1, B2) + β Lreg
//! ```
//!
//! `L12` covers the anchor pairs whose emerging member is in `B1` plus, in
//! literal mode, the unanchored mature users of `B2`. Over one epoch every
//! row of the global fusion loss is visited exactly once. Each network's
//! weight penalty is charged only on steps where that network has batch
//! members; the projection penalty is charged on every step.

use ndarray::{Array2, Zip};

use super::forward::{decode, encode, DecodeTrace, EncodeTrace};
use super::loss::{entry_weight, FusionRows};
use super::model::{column_sums, weight_sq_norm, DimeParams, NetworkParams};
use super::train::TrainConfig;
use crate::error::{Error, Result};
use crate::metaprox::ProximityBundle;
use crate::netcore::TransitionMatrix;

/// Inputs of the joint objective.
#[derive(Clone, Copy, Debug)]
pub struct JointData<'a> {
    pub emerging: &'a ProximityBundle,
    pub mature: Option<&'a ProximityBundle>,
    pub transition: Option<&'a TransitionMatrix>,
}

impl<'a> JointData<'a> {
    pub fn single(bundle: &'a ProximityBundle) -> Self {
        JointData {
            emerging: bundle,
            mature: None,
            transition: None,
        }
    }
}

/// User indices of one minibatch, per network.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Batch {
    pub emerging: Vec<usize>,
    pub mature: Vec<usize>,
}

/// Dense `rows x n` blocks of the proximity rows the network consumes.
pub fn gather_inputs(bundle: &ProximityBundle, params: &NetworkParams, rows: &[usize]) -> Result<Vec<Array2<f64>>> {
    if bundle.n_users() != params.input_dim {
        return Err(Error::ShapeMismatch(format!(
            "bundle covers {} users, model expects {}",
            bundle.n_users(),
            params.input_dim
        )));
    }
    params
        .paths
        .iter()
        .map(|&path| {
            let m = bundle
                .get(path)
                .ok_or_else(|| Error::InvalidConfig(format!("bundle has no {path} matrix")))?;
            let mut block = Array2::zeros((rows.len(), params.input_dim));
            for (r, &u) in rows.iter().enumerate() {
                if u >= params.input_dim {
                    return Err(Error::IndexOutOfRange {
                        index: u,
                        len: params.input_dim,
                    });
                }
                m.values.row_into(u, block.row_mut(r).into_slice().unwrap());
            }
            Ok(block)
        })
        .collect()
}

/// Objective value on a batch.
pub fn total_loss(data: &JointData<'_>, batch: &Batch, params: &DimeParams, cfg: &TrainConfig) -> Result<f64> {
    Ok(evaluate(data, batch, params, cfg, false)?.0)
}

/// Objective value and its gradient with respect to every parameter.
pub fn gradients(
    data: &JointData<'_>,
    batch: &Batch,
    params: &DimeParams,
    cfg: &TrainConfig,
) -> Result<(f64, DimeParams)> {
    let (loss, grads) = evaluate(data, batch, params, cfg, true)?;
    Ok((loss, grads.expect("requested")))
}

struct SideState {
    enc: EncodeTrace,
    dec: Option<DecodeTrace>,
    dz: Array2<f64>,
}

/// Reconstruction term for one network: forward, loss and (optionally) the
/// decoder half of backprop.
fn reconstruct(
    params: &NetworkParams,
    inputs: Vec<Array2<f64>>,
    gamma: f64,
    grads: Option<&mut NetworkParams>,
) -> Result<(f64, SideState)> {
    let enc = encode(params, inputs)?;
    let dec = decode(params, &enc.z)?;
    let mut loss = 0.0;
    let mut gx = Vec::with_capacity(enc.inputs.len());
    for (k, x) in enc.inputs.iter().enumerate() {
        let xh = dec.reconstruction(k);
        let mut g = Array2::zeros(x.raw_dim());
        Zip::from(&mut g).and(x).and(xh).for_each(|g, &xv, &xhv| {
            let b = entry_weight(xv, gamma);
            let e = (xhv - xv) * b;
            loss += e * e;
            *g = 2.0 * b * e;
        });
        gx.push(g);
    }
    let dz = match grads {
        Some(g) => backward_decoder(params, &enc.z, &dec, gx, g),
        None => Array2::zeros(enc.z.raw_dim()),
    };
    Ok((
        loss,
        SideState {
            enc,
            dec: Some(dec),
            dz,
        },
    ))
}

fn evaluate(
    data: &JointData<'_>,
    batch: &Batch,
    params: &DimeParams,
    cfg: &TrainConfig,
    want_grad: bool,
) -> Result<(f64, Option<DimeParams>)> {
    let mut grads = want_grad.then(|| params.zeros_like());
    let mut loss = 0.0;

    let mut emerging = None;
    if !batch.emerging.is_empty() {
        let x = gather_inputs(data.emerging, &params.emerging, &batch.emerging)?;
        let (l, s) = reconstruct(&params.emerging, x, cfg.gamma, grads.as_mut().map(|g| &mut g.emerging))?;
        loss += l;
        emerging = Some(s);
    }

    let mut mature = None;
    let mut partners: Option<(Vec<usize>, SideState)> = None;
    if let (Some(mparams), Some(mbundle)) = (&params.mature, data.mature) {
        if !batch.mature.is_empty() {
            let x = gather_inputs(mbundle, mparams, &batch.mature)?;
            let (l, s) = reconstruct(mparams, x, cfg.gamma, grads.as_mut().and_then(|g| g.mature.as_mut()))?;
            loss += l;
            mature = Some(s);
        }

        if cfg.alpha != 0.0 {
            let t = data
                .transition
                .ok_or_else(|| Error::InvalidConfig("joint training needs a transition matrix".into()))?;
            let w12 = params
                .projection
                .as_ref()
                .ok_or_else(|| Error::InvalidConfig("joint training needs a projection".into()))?;
            if t.shape() != (params.emerging.input_dim, mparams.input_dim) {
                return Err(Error::ShapeMismatch(format!(
                    "transition matrix is {:?}, networks have {} and {} users",
                    t.shape(),
                    params.emerging.input_dim,
                    mparams.input_dim
                )));
            }

            // anchored emerging users of this batch and their mature partners
            let mut anchored_rows = Vec::new();
            let mut partner_ids = Vec::new();
            for (r, &u) in batch.emerging.iter().enumerate() {
                if let Some(j) = t.partner_of_row(u) {
                    anchored_rows.push(r);
                    partner_ids.push(j);
                }
            }
            if !anchored_rows.is_empty() {
                let e = emerging.as_mut().expect("anchored rows imply a non-empty batch");
                let x = gather_inputs(mbundle, mparams, &partner_ids)?;
                let enc = encode(mparams, x)?;
                let mut dz_partner = Array2::zeros(enc.z.raw_dim());
                let mut dw = Array2::<f64>::zeros(w12.raw_dim());
                for (q, &r) in anchored_rows.iter().enumerate() {
                    let z1 = e.enc.z.row(r);
                    let resid = &z1.dot(w12) - &enc.z.row(q);
                    loss += cfg.alpha * resid.dot(&resid);
                    if want_grad {
                        let g = resid.mapv(|v| 2.0 * cfg.alpha * v);
                        let dz1 = w12.dot(&g);
                        e.dz.row_mut(r).scaled_add(1.0, &dz1);
                        dz_partner.row_mut(q).scaled_add(-1.0, &g);
                        for a in 0..dw.nrows() {
                            dw.row_mut(a).scaled_add(z1[a], &g);
                        }
                    }
                }
                if let Some(g) = grads.as_mut() {
                    *g.projection.as_mut().unwrap() += &dw;
                }
                partners = Some((
                    partner_ids,
                    SideState {
                        enc,
                        dec: None,
                        dz: dz_partner,
                    },
                ));
            }

            if cfg.fusion_rows == FusionRows::Literal {
                if let Some(m) = mature.as_mut() {
                    for (r, &j) in batch.mature.iter().enumerate() {
                        if t.partner_of_col(j).is_none() {
                            let z2 = m.enc.z.row(r).to_owned();
                            loss += cfg.alpha * z2.dot(&z2);
                            if want_grad {
                                m.dz.row_mut(r).scaled_add(2.0 * cfg.alpha, &z2);
                            }
                        }
                    }
                }
            }
        }
    }

    // weight penalties
    if cfg.beta != 0.0 {
        if emerging.is_some() {
            loss += cfg.beta * weight_sq_norm(&params.emerging);
        }
        if mature.is_some() {
            loss += cfg.beta * weight_sq_norm(params.mature.as_ref().unwrap());
        }
        if let Some(p) = &params.projection {
            loss += cfg.beta * p.iter().map(|x| x * x).sum::<f64>();
        }
    }

    if let Some(g) = grads.as_mut() {
        if let Some(s) = &emerging {
            backward_encoder(&params.emerging, &s.enc, &s.dz, &mut g.emerging);
            add_weight_decay(&params.emerging, &mut g.emerging, cfg.beta);
        }
        if let (Some(mp), Some(mg)) = (&params.mature, g.mature.as_mut()) {
            if let Some(s) = &mature {
                backward_encoder(mp, &s.enc, &s.dz, mg);
                add_weight_decay(mp, mg, cfg.beta);
            }
            if let Some((_, s)) = &partners {
                backward_encoder(mp, &s.enc, &s.dz, mg);
            }
        }
        if let (Some(p), Some(gp)) = (&params.projection, g.projection.as_mut()) {
            gp.scaled_add(2.0 * cfg.beta, p);
        }
    }
    debug_assert!(emerging.as_ref().is_none_or(|s| s.dec.is_some()));
    Ok((loss, grads))
}

fn add_weight_decay(params: &NetworkParams, grads: &mut NetworkParams, beta: f64) {
    if beta == 0.0 {
        return;
    }
    let mut weights: Vec<&[f64]> = Vec::new();
    params.visit(&mut |_, t| weights.push(t));
    let mut k = 0;
    grads.visit_mut(&mut |is_weight, g| {
        if is_weight {
            for (gv, &w) in g.iter_mut().zip(weights[k]) {
                *gv += 2.0 * beta * w;
            }
        }
        k += 1;
    });
}

/// `delta = upstream ⊙ a (1 - a)` for a sigmoid activation `a`.
fn sigmoid_delta(upstream: &Array2<f64>, act: &Array2<f64>) -> Array2<f64> {
    let mut d = upstream.clone();
    Zip::from(&mut d).and(act).for_each(|d, &a| *d *= a * (1.0 - a));
    d
}

/// Backprop from the reconstructions to the embedding. Accumulates decoder
/// gradients and returns `dL/dz`.
fn backward_decoder(
    params: &NetworkParams,
    z: &Array2<f64>,
    dec: &DecodeTrace,
    grad_out: Vec<Array2<f64>>,
    grads: &mut NetworkParams,
) -> Array2<f64> {
    let mut d_expanded = Array2::<f64>::zeros(dec.expanded.raw_dim());
    for (k, mut upstream) in grad_out.into_iter().enumerate() {
        let acts = &dec.hidden[k];
        let branch = &params.branches[k];
        let gbranch = &mut grads.branches[k];
        // acts[0] is the dispatch output, acts[i] the output of decoder[i - 1]
        for li in (0..acts.len()).rev() {
            let delta = sigmoid_delta(&upstream, &acts[li]);
            let input = if li == 0 { &dec.expanded } else { &acts[li - 1] };
            let (layer, glayer) = if li == 0 {
                (&branch.dispatch, &mut gbranch.dispatch)
            } else {
                (&branch.decoder[li - 1], &mut gbranch.decoder[li - 1])
            };
            glayer.weight += &delta.t().dot(input);
            glayer.bias += &column_sums(&delta);
            upstream = delta.dot(&layer.weight);
        }
        d_expanded += &upstream;
    }
    let delta = sigmoid_delta(&d_expanded, &dec.expanded);
    grads.expand.weight += &delta.t().dot(z);
    grads.expand.bias += &column_sums(&delta);
    delta.dot(&params.expand.weight)
}

/// Backprop from `dL/dz` through the bottleneck, fusion layer and every
/// per-path encoder.
fn backward_encoder(params: &NetworkParams, enc: &EncodeTrace, dz: &Array2<f64>, grads: &mut NetworkParams) {
    let delta_z = sigmoid_delta(dz, &enc.z);
    grads.bottleneck.weight += &delta_z.t().dot(&enc.fused);
    grads.bottleneck.bias += &column_sums(&delta_z);
    let d_fused = delta_z.dot(&params.bottleneck.weight);
    let delta_f = sigmoid_delta(&d_fused, &enc.fused);
    grads.fusion_bias += &column_sums(&delta_f);

    for (k, branch) in params.branches.iter().enumerate() {
        let gbranch = &mut grads.branches[k];
        gbranch.fusion += &delta_f.t().dot(enc.top(k));
        let mut upstream = delta_f.dot(&branch.fusion);
        let acts = &enc.hidden[k];
        for li in (0..acts.len()).rev() {
            let delta = sigmoid_delta(&upstream, &acts[li]);
            let input = if li == 0 { &enc.inputs[k] } else { &acts[li - 1] };
            gbranch.encoder[li].weight += &delta.t().dot(input);
            gbranch.encoder[li].bias += &column_sums(&delta);
            if li > 0 {
                upstream = delta.dot(&branch.encoder[li].weight);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::deepalign::model::{init_params, ArchitectureSpec};
    use crate::metaprox::{CsrMatrix, MetaPath, ProximityMatrix};
    use rand::Rng;

    const PATHS: [MetaPath; 3] = [MetaPath::Phi0, MetaPath::Phi3, MetaPath::Phi5];

    fn random_bundle(n: usize, seed: u64) -> ProximityBundle {
        let mut rng = crate::seed::rng(seed);
        let matrices = PATHS
            .iter()
            .map(|&path| {
                let mut t = Vec::new();
                for i in 0..n {
                    for j in 0..n {
                        if i != j && rng.random_bool(0.5) {
                            t.push((i, j, rng.random_range(0.05..1.0)));
                        }
                    }
                }
                ProximityMatrix {
                    path,
                    values: CsrMatrix::from_triplets(n, n, &t),
                    counts: None,
                }
            })
            .collect();
        ProximityBundle::new(n, matrices).unwrap()
    }

    fn arch(d: usize) -> ArchitectureSpec {
        ArchitectureSpec {
            encoder_widths: vec![4, 3],
            fusion_width: 3,
            embedding_dim: d,
            paths: PATHS.to_vec(),
        }
    }

    // A moderate gamma keeps the loss small enough that central differences
    // with h = 1e-5 are not swamped by round-off.
    fn cfg(alpha: f64, beta: f64, rows: FusionRows) -> TrainConfig {
        TrainConfig {
            alpha,
            beta,
            gamma: 3.0,
            fusion_rows: rows,
            ..TrainConfig::default()
        }
    }

    fn nudge(p: &mut DimeParams, index: usize, delta: f64) {
        let mut base = 0;
        p.visit_mut(&mut |_, t| {
            if (base..base + t.len()).contains(&index) {
                t[index - base] += delta;
            }
            base += t.len();
        });
    }

    fn check_fd(seed: u64, c: &TrainConfig) {
        let (n1, n2) = (6, 5);
        let b1 = random_bundle(n1, seed * 2 + 1);
        let b2 = random_bundle(n2, seed * 2 + 2);
        let t = TransitionMatrix::from_matching(n1, n2, &[(0, 1), (2, 0), (4, 3)]);
        let data = JointData {
            emerging: &b1,
            mature: Some(&b2),
            transition: Some(&t),
        };
        let batch = Batch {
            emerging: vec![0, 2, 3, 5],
            mature: vec![0, 2, 4],
        };
        let params = init_params(&arch(2), n1, Some((&arch(3), n2)), seed).unwrap();
        let (loss, g) = gradients(&data, &batch, &params, c).unwrap();
        assert_eq!(loss, total_loss(&data, &batch, &params, c).unwrap());

        let analytic = g.to_flat();
        let h = 1e-5;
        let mut worst: f64 = 0.0;
        for (k, &a) in analytic.iter().enumerate() {
            let mut p = params.clone();
            nudge(&mut p, k, h);
            let up = total_loss(&data, &batch, &p, c).unwrap();
            nudge(&mut p, k, -2.0 * h);
            let down = total_loss(&data, &batch, &p, c).unwrap();
            let numeric = (up - down) / (2.0 * h);
            let rel = (a - numeric).abs() / a.abs().max(numeric.abs()).max(1e-6);
            worst = worst.max(rel);
        }
        assert!(worst <= 1e-4, "seed {seed}: max relative error {worst:e}");
    }

    #[test]
    fn matches_finite_differences() {
        for seed in 0..5 {
            check_fd(seed, &cfg(1.3, 0.02, FusionRows::Literal));
        }
        check_fd(9, &cfg(0.7, 0.5, FusionRows::AnchorsOnly));
    }

    #[test]
    fn projection_gradient_vanishes_without_fusion_or_penalty() {
        let b1 = random_bundle(4, 1);
        let b2 = random_bundle(4, 2);
        let t = TransitionMatrix::from_matching(4, 4, &[(0, 0), (1, 2)]);
        let data = JointData {
            emerging: &b1,
            mature: Some(&b2),
            transition: Some(&t),
        };
        let batch = Batch {
            emerging: vec![0, 1, 2, 3],
            mature: vec![0, 1, 2, 3],
        };
        let params = init_params(&arch(2), 4, Some((&arch(2), 4)), 3).unwrap();
        let (_, g) = gradients(&data, &batch, &params, &cfg(0.0, 0.0, FusionRows::Literal)).unwrap();
        assert!(g.projection.unwrap().iter().all(|&v| v == 0.0));
        // the penalty alone still reaches the projection
        let (_, g) = gradients(&data, &batch, &params, &cfg(0.0, 0.02, FusionRows::Literal)).unwrap();
        let p = params.projection.as_ref().unwrap();
        assert_eq!(g.projection.unwrap(), p * 0.04);
    }

    fn constant_bundle(n: usize, v: f64) -> ProximityBundle {
        let matrices = PATHS
            .iter()
            .map(|&path| {
                let t: Vec<_> = (0..n).flat_map(|i| (0..n).map(move |j| (i, j, v))).collect();
                ProximityMatrix {
                    path,
                    values: CsrMatrix::from_triplets(n, n, &t),
                    counts: None,
                }
            })
            .collect();
        ProximityBundle::new(n, matrices).unwrap()
    }

    #[test]
    fn perfect_reconstruction_has_flat_decoder_biases() {
        // the zero model reconstructs 0.5 everywhere
        let b = constant_bundle(3, 0.5);
        let params = DimeParams::single(NetworkParams::init(&arch(2), 3, 0).unwrap().zeros_like());
        let batch = Batch {
            emerging: vec![0, 1, 2],
            mature: vec![],
        };
        let (loss, g) = gradients(&JointData::single(&b), &batch, &params, &cfg(0.0, 0.0, FusionRows::Literal)).unwrap();
        assert_eq!(loss, 0.0);
        for br in &g.emerging.branches {
            assert!(br.dispatch.bias.iter().all(|&v| v == 0.0));
            assert!(br.decoder.iter().all(|l| l.bias.iter().all(|&v| v == 0.0)));
        }
    }

    #[test]
    fn zero_model_on_zero_inputs() {
        let b = constant_bundle(4, 0.0);
        let params = DimeParams::single(NetworkParams::init(&arch(2), 4, 0).unwrap().zeros_like());
        let batch = Batch {
            emerging: vec![1, 3],
            mature: vec![],
        };
        // 3 paths x 2 rows x 4 columns of (0 - 0.5)^2
        let l = total_loss(&JointData::single(&b), &batch, &params, &TrainConfig::default()).unwrap();
        assert_eq!(l, 3.0 * 2.0 * 4.0 * 0.25);
    }

    #[test]
    fn penalty_is_monotone_in_beta() {
        let b = random_bundle(4, 5);
        let params = DimeParams::single(NetworkParams::init(&arch(2), 4, 1).unwrap());
        let batch = Batch {
            emerging: vec![0, 1],
            mature: vec![],
        };
        let data = JointData::single(&b);
        let mut last = f64::NEG_INFINITY;
        for beta in [0.0, 0.01, 0.1, 1.0] {
            let l = total_loss(&data, &batch, &params, &cfg(0.0, beta, FusionRows::Literal)).unwrap();
            assert!(l > last);
            last = l;
        }
    }

    #[test]
    fn empty_mature_batch_skips_its_penalty() {
        let b1 = random_bundle(3, 1);
        let b2 = random_bundle(3, 2);
        let t = TransitionMatrix::from_matching(3, 3, &[]);
        let data = JointData {
            emerging: &b1,
            mature: Some(&b2),
            transition: Some(&t),
        };
        let params = init_params(&arch(2), 3, Some((&arch(2), 3)), 3).unwrap();
        let batch = Batch {
            emerging: vec![0],
            mature: vec![],
        };
        let (_, g) = gradients(&data, &batch, &params, &cfg(1.0, 0.5, FusionRows::Literal)).unwrap();
        assert!(DimeParams::single(g.mature.unwrap()).to_flat().iter().all(|&v| v == 0.0));
    }
}
