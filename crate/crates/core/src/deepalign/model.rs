use ndarray::{Array1, Array2, Axis};
use rand::Rng;

use crate::error::{Error, Result};
use crate::metaprox::MetaPath;
use crate::seed;

/// Layer widths of one network's autoencoder.
///
/// Each meta path gets its own encoder stack `n -> w1 -> ... -> wo`; the
/// per-path outputs are fused into `fusion_width` units, then projected to
/// the `embedding_dim`-dimensional embedding. The decoder mirrors this.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ArchitectureSpec {
    pub encoder_widths: Vec<usize>,
    pub fusion_width: usize,
    pub embedding_dim: usize,
    /// Meta paths whose proximity rows are fed to the model.
    pub paths: Vec<MetaPath>,
}

impl Default for ArchitectureSpec {
    fn default() -> Self {
        ArchitectureSpec {
            encoder_widths: vec![500, 50],
            fusion_width: 50,
            embedding_dim: 50,
            paths: MetaPath::ALL.to_vec(),
        }
    }
}

impl ArchitectureSpec {
    pub fn validate(&self) -> Result<()> {
        if self.encoder_widths.iter().any(|&w| w == 0) || self.fusion_width == 0 || self.embedding_dim == 0 {
            return Err(Error::InvalidConfig("all layer widths must be at least 1".into()));
        }
        if self.paths.is_empty() {
            return Err(Error::InvalidConfig("at least one meta path is required".into()));
        }
        let mut sorted = self.paths.clone();
        sorted.sort();
        sorted.dedup();
        if sorted.len() != self.paths.len() {
            return Err(Error::InvalidConfig("meta paths listed twice".into()));
        }
        Ok(())
    }

    /// Same widths, restricted to the given paths.
    pub fn with_paths(&self, paths: &[MetaPath]) -> Self {
        ArchitectureSpec {
            paths: paths.to_vec(),
            ..self.clone()
        }
    }
}

/// Fully connected layer `y = σ(W x + b)` with `W` stored `out x in`.
#[derive(Clone, Debug, PartialEq)]
pub struct Dense {
    pub weight: Array2<f64>,
    pub bias: Array1<f64>,
}

impl Dense {
    fn init(out: usize, inp: usize, rng: &mut impl Rng) -> Self {
        Dense {
            weight: glorot(out, inp, rng),
            bias: Array1::zeros(out),
        }
    }

    pub fn zeros(out: usize, inp: usize) -> Self {
        Dense {
            weight: Array2::zeros((out, inp)),
            bias: Array1::zeros(out),
        }
    }

    pub fn out_dim(&self) -> usize {
        self.weight.nrows()
    }

    pub fn in_dim(&self) -> usize {
        self.weight.ncols()
    }

    /// Row-major batch forward: `σ(H Wᵀ + b)`.
    pub fn forward(&self, input: &Array2<f64>) -> Array2<f64> {
        let mut pre = input.dot(&self.weight.t());
        pre += &self.bias;
        pre.mapv_inplace(sigmoid);
        pre
    }
}

/// Uniform Glorot initialisation on `[-s, s]`, `s = sqrt(6 / (fan_in + fan_out))`.
pub(crate) fn glorot(out: usize, inp: usize, rng: &mut impl Rng) -> Array2<f64> {
    let s = (6.0 / (inp + out) as f64).sqrt();
    Array2::from_shape_fn((out, inp), |_| rng.random_range(-s..=s))
}

pub fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Encoder, fusion and decoder weights owned by one meta path.
#[derive(Clone, Debug, PartialEq)]
pub struct PathBranch {
    /// `n -> w1 -> ... -> wo`
    pub encoder: Vec<Dense>,
    /// `fusion_width x wo`; the fused bias is shared, see [`NetworkParams`].
    pub fusion: Array2<f64>,
    /// `wo x fusion_width`, first per-path decoder step.
    pub dispatch: Dense,
    /// `wo -> ... -> w1 -> n`
    pub decoder: Vec<Dense>,
}

/// All weights of one network's autoencoder.
#[derive(Clone, Debug, PartialEq)]
pub struct NetworkParams {
    pub input_dim: usize,
    pub paths: Vec<MetaPath>,
    pub branches: Vec<PathBranch>,
    /// One bias for the fused sum over all paths.
    pub fusion_bias: Array1<f64>,
    /// Fused layer to embedding, `d x fusion_width`.
    pub bottleneck: Dense,
    /// Embedding back to the fused width, `fusion_width x d`.
    pub expand: Dense,
}

impl NetworkParams {
    pub fn init(arch: &ArchitectureSpec, input_dim: usize, seed: u64) -> Result<Self> {
        arch.validate()?;
        let mut rng = seed::rng(seed);
        let widths: Vec<usize> = std::iter::once(input_dim).chain(arch.encoder_widths.iter().copied()).collect();
        let top = *widths.last().unwrap();
        let mut branches = Vec::with_capacity(arch.paths.len());
        for _ in &arch.paths {
            let encoder = widths.windows(2).map(|w| Dense::init(w[1], w[0], &mut rng)).collect();
            let fusion = glorot(arch.fusion_width, top, &mut rng);
            let dispatch = Dense::init(top, arch.fusion_width, &mut rng);
            let decoder = widths.windows(2).rev().map(|w| Dense::init(w[0], w[1], &mut rng)).collect();
            branches.push(PathBranch {
                encoder,
                fusion,
                dispatch,
                decoder,
            });
        }
        let bottleneck = Dense::init(arch.embedding_dim, arch.fusion_width, &mut rng);
        let expand = Dense::init(arch.fusion_width, arch.embedding_dim, &mut rng);
        Ok(NetworkParams {
            input_dim,
            paths: arch.paths.clone(),
            branches,
            fusion_bias: Array1::zeros(arch.fusion_width),
            bottleneck,
            expand,
        })
    }

    pub fn embedding_dim(&self) -> usize {
        self.bottleneck.out_dim()
    }

    pub fn fusion_width(&self) -> usize {
        self.fusion_bias.len()
    }

    pub fn encoder_widths(&self) -> Vec<usize> {
        self.branches[0].encoder.iter().map(Dense::out_dim).collect()
    }

    pub fn architecture(&self) -> ArchitectureSpec {
        ArchitectureSpec {
            encoder_widths: self.encoder_widths(),
            fusion_width: self.fusion_width(),
            embedding_dim: self.embedding_dim(),
            paths: self.paths.clone(),
        }
    }

    /// Same shapes, all zeros.
    pub fn zeros_like(&self) -> Self {
        let mut z = self.clone();
        z.visit_mut(&mut |_, t| t.fill(0.0));
        z
    }

    /// Visits every tensor in checkpoint order. The flag is true for weight
    /// matrices and false for biases.
    pub fn visit<'a>(&'a self, f: &mut dyn FnMut(bool, &'a [f64])) {
        for b in &self.branches {
            for l in &b.encoder {
                visit_dense(l, f);
            }
            f(true, b.fusion.as_slice().unwrap());
            visit_dense(&b.dispatch, f);
            for l in &b.decoder {
                visit_dense(l, f);
            }
        }
        f(false, self.fusion_bias.as_slice().unwrap());
        visit_dense(&self.bottleneck, f);
        visit_dense(&self.expand, f);
    }

    pub fn visit_mut(&mut self, f: &mut dyn FnMut(bool, &mut [f64])) {
        for b in &mut self.branches {
            for l in &mut b.encoder {
                visit_dense_mut(l, f);
            }
            f(true, b.fusion.as_slice_mut().unwrap());
            visit_dense_mut(&mut b.dispatch, f);
            for l in &mut b.decoder {
                visit_dense_mut(l, f);
            }
        }
        f(false, self.fusion_bias.as_slice_mut().unwrap());
        visit_dense_mut(&mut self.bottleneck, f);
        visit_dense_mut(&mut self.expand, f);
    }

    pub fn n_params(&self) -> usize {
        let mut n = 0;
        self.visit(&mut |_, t| n += t.len());
        n
    }
}

fn visit_dense<'a>(d: &'a Dense, f: &mut dyn FnMut(bool, &'a [f64])) {
    f(true, d.weight.as_slice().unwrap());
    f(false, d.bias.as_slice().unwrap());
}

fn visit_dense_mut(d: &mut Dense, f: &mut dyn FnMut(bool, &mut [f64])) {
    f(true, d.weight.as_slice_mut().unwrap());
    f(false, d.bias.as_slice_mut().unwrap());
}

/// Parameters of the joint model.
///
/// Without a mature network (`mature: None`) this is the single-network
/// model; the cross-network projection `W^(1,2)` exists only when both
/// networks do.
#[derive(Clone, Debug, PartialEq)]
pub struct DimeParams {
    pub emerging: NetworkParams,
    pub mature: Option<NetworkParams>,
    /// `d1 x d2`
    pub projection: Option<Array2<f64>>,
}

impl DimeParams {
    pub fn single(net: NetworkParams) -> Self {
        DimeParams {
            emerging: net,
            mature: None,
            projection: None,
        }
    }

    pub fn network(&self, net_id: u8) -> Option<&NetworkParams> {
        match net_id {
            1 => Some(&self.emerging),
            2 => self.mature.as_ref(),
            _ => None,
        }
    }

    pub fn zeros_like(&self) -> Self {
        DimeParams {
            emerging: self.emerging.zeros_like(),
            mature: self.mature.as_ref().map(NetworkParams::zeros_like),
            projection: self.projection.as_ref().map(|p| Array2::zeros(p.raw_dim())),
        }
    }

    pub fn visit<'a>(&'a self, f: &mut dyn FnMut(bool, &'a [f64])) {
        self.emerging.visit(f);
        if let Some(m) = &self.mature {
            m.visit(f);
        }
        if let Some(p) = &self.projection {
            f(true, p.as_slice().unwrap());
        }
    }

    pub fn visit_mut(&mut self, f: &mut dyn FnMut(bool, &mut [f64])) {
        self.emerging.visit_mut(f);
        if let Some(m) = &mut self.mature {
            m.visit_mut(f);
        }
        if let Some(p) = &mut self.projection {
            f(true, p.as_slice_mut().unwrap());
        }
    }

    /// Flattened copy of every tensor, in visit order.
    pub fn to_flat(&self) -> Vec<f64> {
        let mut out = Vec::new();
        self.visit(&mut |_, t| out.extend_from_slice(t));
        out
    }

    /// `self += scale * other`; shapes must match.
    pub fn add_scaled(&mut self, other: &DimeParams, scale: f64) {
        let mut theirs: Vec<&[f64]> = Vec::new();
        other.visit(&mut |_, t| theirs.push(t));
        let mut k = 0;
        self.visit_mut(&mut |_, t| {
            let src = theirs[k];
            assert_eq!(src.len(), t.len(), "parameter shapes differ");
            for (x, g) in t.iter_mut().zip(src) {
                *x += scale * g;
            }
            k += 1;
        });
        assert_eq!(k, theirs.len(), "parameter shapes differ");
    }
}

/// Initialises parameters for both networks of a pair.
///
/// Each network draws from its own named stream so that the emerging
/// network's initial weights do not depend on the mature network's shape.
pub fn init_params(
    emerging_arch: &ArchitectureSpec,
    emerging_users: usize,
    mature: Option<(&ArchitectureSpec, usize)>,
    seed: u64,
) -> Result<DimeParams> {
    let emerging = NetworkParams::init(emerging_arch, emerging_users, init_seed(seed, Side::Emerging))?;
    let (mature, projection) = match mature {
        Some((arch, n)) => {
            let m = NetworkParams::init(arch, n, init_seed(seed, Side::Mature))?;
            let mut rng = seed::rng(seed::derive_seed(seed, "init/projection"));
            let p = glorot(emerging_arch.embedding_dim, arch.embedding_dim, &mut rng);
            (Some(m), Some(p))
        }
        None => (None, None),
    };
    Ok(DimeParams {
        emerging,
        mature,
        projection,
    })
}

/// Which network of a pair a stream belongs to.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Side {
    Emerging,
    Mature,
}

impl Side {
    fn label(self) -> &'static str {
        match self {
            Side::Emerging => "emerging",
            Side::Mature => "mature",
        }
    }
}

pub(crate) fn init_seed(seed: u64, side: Side) -> u64 {
    seed::derive_seed(seed, &format!("init/{}", side.label()))
}

pub(crate) fn shuffle_seed(seed: u64, side: Side) -> u64 {
    seed::derive_seed(seed, &format!("shuffle/{}", side.label()))
}

/// Sum of squared entries of all weight matrices (biases excluded).
pub fn weight_sq_norm(net: &NetworkParams) -> f64 {
    let mut s = 0.0;
    net.visit(&mut |is_weight, t| {
        if is_weight {
            s += t.iter().map(|x| x * x).sum::<f64>();
        }
    });
    s
}

pub(crate) fn column_sums(a: &Array2<f64>) -> Array1<f64> {
    a.sum_axis(Axis(0))
}
