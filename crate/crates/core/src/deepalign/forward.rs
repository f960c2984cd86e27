//! Batched forward passes. Rows are users; every intermediate activation is
//! kept for backpropagation.

use ndarray::Array2;

use super::model::{sigmoid, NetworkParams};
use crate::error::{Error, Result};

/// Encoder activations for a batch.
#[derive(Clone, Debug)]
pub struct EncodeTrace {
    /// Per-path input rows, `B x n`.
    pub inputs: Vec<Array2<f64>>,
    /// Per path, the output of each encoder layer `y^1 .. y^o`.
    pub hidden: Vec<Vec<Array2<f64>>>,
    /// Fused layer `y^{o+1}`, `B x fusion_width`.
    pub fused: Array2<f64>,
    /// Embeddings, `B x d`.
    pub z: Array2<f64>,
}

impl EncodeTrace {
    /// Top encoder output of path `k` (the input itself when there are no
    /// encoder layers).
    pub fn top(&self, k: usize) -> &Array2<f64> {
        self.hidden[k].last().unwrap_or(&self.inputs[k])
    }
}

/// Decoder activations for a batch.
#[derive(Clone, Debug)]
pub struct DecodeTrace {
    /// `ŷ^{o+1}`, `B x fusion_width`.
    pub expanded: Array2<f64>,
    /// Per path: dispatch output `ŷ^o`, then every decoder layer output; the
    /// last entry is the reconstruction `x̂`.
    pub hidden: Vec<Vec<Array2<f64>>>,
}

impl DecodeTrace {
    pub fn reconstruction(&self, k: usize) -> &Array2<f64> {
        self.hidden[k].last().unwrap()
    }

    pub fn reconstructions(&self) -> Vec<&Array2<f64>> {
        (0..self.hidden.len()).map(|k| self.reconstruction(k)).collect()
    }
}

/// Encodes a batch. `inputs[k]` holds the proximity rows of path
/// `params.paths[k]` for every user in the batch.
pub fn encode(params: &NetworkParams, inputs: Vec<Array2<f64>>) -> Result<EncodeTrace> {
    if inputs.len() != params.branches.len() {
        return Err(Error::ShapeMismatch(format!(
            "{} input blocks for {} meta paths",
            inputs.len(),
            params.branches.len()
        )));
    }
    let batch = inputs.first().map_or(0, |x| x.nrows());
    for x in &inputs {
        if x.ncols() != params.input_dim || x.nrows() != batch {
            return Err(Error::ShapeMismatch(format!(
                "input block is {:?}, expected {batch}x{}",
                x.shape(),
                params.input_dim
            )));
        }
    }

    let mut hidden = Vec::with_capacity(inputs.len());
    let mut fused = Array2::<f64>::zeros((batch, params.fusion_width()));
    for (branch, x) in params.branches.iter().zip(&inputs) {
        let mut acts: Vec<Array2<f64>> = Vec::with_capacity(branch.encoder.len());
        for layer in &branch.encoder {
            let next = layer.forward(acts.last().unwrap_or(x));
            acts.push(next);
        }
        let top = acts.last().unwrap_or(x);
        fused += &top.dot(&branch.fusion.t());
        hidden.push(acts);
    }
    fused += &params.fusion_bias;
    fused.mapv_inplace(sigmoid);
    let z = params.bottleneck.forward(&fused);
    Ok(EncodeTrace {
        inputs,
        hidden,
        fused,
        z,
    })
}

/// Decodes a batch of embeddings into one reconstruction per meta path.
pub fn decode(params: &NetworkParams, z: &Array2<f64>) -> Result<DecodeTrace> {
    if z.ncols() != params.embedding_dim() {
        return Err(Error::ShapeMismatch(format!(
            "embedding has {} columns, expected {}",
            z.ncols(),
            params.embedding_dim()
        )));
    }
    let expanded = params.expand.forward(z);
    let hidden = params
        .branches
        .iter()
        .map(|branch| {
            let mut acts = vec![branch.dispatch.forward(&expanded)];
            for layer in &branch.decoder {
                let next = layer.forward(acts.last().unwrap());
                acts.push(next);
            }
            acts
        })
        .collect();
    Ok(DecodeTrace { expanded, hidden })
}
