//! Social meta paths and meta proximity.
//!
//! Each of the eight social meta paths `Φ0..Φ7` is a chain of typed
//! relations from a user back to a user. Path instances between every pair
//! of users are counted with a chain of sparse products over the relation
//! adjacency matrices, and the counts are normalised into a proximity score
//!
//! ```text
//! p(i, j) = 2 c(i, j) / (c(i, ·) + c(·, j))
//! ```
//!
//! where `c(i, ·)` and `c(·, j)` are the row and column sums of the count
//! matrix. `Φ0` (direct follow) uses the binary friendship indicator instead.

pub mod persist;
pub mod sparse;

use std::fmt;

use crate::error::{Error, Result};
use crate::netcore::{AttrKind, HeterogeneousNetwork};
pub use sparse::{chain_product, CsrMatrix};

/// Typed relation traversed by one step of a meta path.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Relation {
    Follow,
    FollowInv,
    Write,
    WriteInv,
    Have(AttrKind),
    HaveInv(AttrKind),
}

/// The catalog of social meta paths.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum MetaPath {
    /// User -follow-> User
    Phi0,
    /// User -follow-> User -follow-> User
    Phi1,
    /// User -follow-> User <-follow- User (common followee)
    Phi2,
    /// User <-follow- User -follow-> User (common follower)
    Phi3,
    /// User <-follow- User <-follow- User
    Phi4,
    /// Posts sharing a word
    Phi5,
    /// Posts sharing a time bucket
    Phi6,
    /// Posts sharing a check-in location
    Phi7,
}

impl MetaPath {
    pub const ALL: [MetaPath; 8] = [
        MetaPath::Phi0,
        MetaPath::Phi1,
        MetaPath::Phi2,
        MetaPath::Phi3,
        MetaPath::Phi4,
        MetaPath::Phi5,
        MetaPath::Phi6,
        MetaPath::Phi7,
    ];

    pub fn id(self) -> u8 {
        self as u8
    }

    pub fn from_id(id: u8) -> Option<MetaPath> {
        MetaPath::ALL.get(id as usize).copied()
    }

    pub fn steps(self) -> &'static [Relation] {
        use AttrKind::*;
        use Relation::*;
        match self {
            MetaPath::Phi0 => &[Follow],
            MetaPath::Phi1 => &[Follow, Follow],
            MetaPath::Phi2 => &[Follow, FollowInv],
            MetaPath::Phi3 => &[FollowInv, Follow],
            MetaPath::Phi4 => &[FollowInv, FollowInv],
            MetaPath::Phi5 => &[Write, Have(Word), HaveInv(Word), WriteInv],
            MetaPath::Phi6 => &[Write, Have(Time), HaveInv(Time), WriteInv],
            MetaPath::Phi7 => &[Write, Have(Location), HaveInv(Location), WriteInv],
        }
    }
}

impl fmt::Display for MetaPath {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Φ{}", self.id())
    }
}

/// Knobs for proximity computation.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct ProximityOptions {
    /// Keep `u -> ... -> u` instances on the diagonal and in the row/column
    /// sums. Off by default; exposed for sensitivity checks.
    pub include_self_paths: bool,
    /// Keep at most this many entries per row of each count matrix.
    pub max_row_nnz: Option<usize>,
}

/// Sparse 0/1 adjacency matrix of a single relation.
pub fn relation_matrix(net: &HeterogeneousNetwork, rel: Relation) -> CsrMatrix<u64> {
    let (nu, np) = (net.n_users(), net.n_posts());
    match rel {
        Relation::Follow => CsrMatrix::from_pattern(nu, nu, net.follows(), 1),
        Relation::FollowInv => relation_matrix(net, Relation::Follow).transpose(),
        Relation::Write => {
            let pattern: Vec<_> = net
                .post_authors()
                .iter()
                .enumerate()
                .map(|(p, &u)| (u, p))
                .collect();
            CsrMatrix::from_pattern(nu, np, &pattern, 1)
        }
        Relation::WriteInv => relation_matrix(net, Relation::Write).transpose(),
        Relation::Have(kind) => {
            let (links, n_attr) = net.have_links(kind);
            CsrMatrix::from_pattern(np, n_attr, &links, 1)
        }
        Relation::HaveInv(kind) => relation_matrix(net, Relation::Have(kind)).transpose(),
    }
}

/// Number of instances of `phi` between every ordered pair of users, with the
/// diagonal removed.
pub fn count_path_instances(net: &HeterogeneousNetwork, phi: MetaPath) -> CsrMatrix<u64> {
    count_path_instances_with(net, phi, &ProximityOptions::default())
}

pub fn count_path_instances_with(
    net: &HeterogeneousNetwork,
    phi: MetaPath,
    opts: &ProximityOptions,
) -> CsrMatrix<u64> {
    let factors: Vec<_> = phi.steps().iter().map(|&r| relation_matrix(net, r)).collect();
    let counts = chain_product(factors, opts.max_row_nnz);
    if opts.include_self_paths {
        counts
    } else {
        counts.without_diagonal()
    }
}

/// Path-count marginals retained alongside a proximity matrix.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PathCounts {
    /// `|P(u_i, ·)|`
    pub row_sums: Vec<u64>,
    /// `|P(·, u_j)|`
    pub col_sums: Vec<u64>,
}

/// Proximity scores in `[0, 1]` between all users along one meta path.
#[derive(Clone, Debug, PartialEq)]
pub struct ProximityMatrix {
    pub path: MetaPath,
    pub values: CsrMatrix<f64>,
    /// Present when computed from a network; absent when reloaded from disk.
    pub counts: Option<PathCounts>,
}

impl ProximityMatrix {
    pub fn n_users(&self) -> usize {
        self.values.nrows()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values.get(i, j)
    }
}

/// Binary friendship proximity: 1 exactly where a follow edge exists.
pub fn friendship_proximity(net: &HeterogeneousNetwork) -> ProximityMatrix {
    let adj = relation_matrix(net, Relation::Follow);
    ProximityMatrix {
        path: MetaPath::Phi0,
        values: adj.map(|_, _, v| v as f64),
        counts: Some(PathCounts {
            row_sums: adj.row_sums(),
            col_sums: adj.col_sums(),
        }),
    }
}

pub fn meta_proximity(net: &HeterogeneousNetwork, phi: MetaPath) -> Result<ProximityMatrix> {
    meta_proximity_with(net, phi, &ProximityOptions::default())
}

pub fn meta_proximity_with(
    net: &HeterogeneousNetwork,
    phi: MetaPath,
    opts: &ProximityOptions,
) -> Result<ProximityMatrix> {
    if phi == MetaPath::Phi0 {
        return Err(Error::UnsupportedMetaPath(phi.to_string()));
    }
    let counts = count_path_instances_with(net, phi, opts);
    let row_sums = counts.row_sums();
    let col_sums = counts.col_sums();
    let values = counts.map(|i, j, c| {
        let denom = row_sums[i] + col_sums[j];
        if denom == 0 {
            0.0
        } else {
            2.0 * c as f64 / denom as f64
        }
    });
    Ok(ProximityMatrix {
        path: phi,
        values,
        counts: Some(PathCounts { row_sums, col_sums }),
    })
}

/// Proximity matrices for a network, ordered by meta path id.
#[derive(Clone, Debug, PartialEq)]
pub struct ProximityBundle {
    n_users: usize,
    matrices: Vec<ProximityMatrix>,
}

impl ProximityBundle {
    pub fn new(n_users: usize, mut matrices: Vec<ProximityMatrix>) -> Result<Self> {
        matrices.sort_by_key(|m| m.path);
        for w in matrices.windows(2) {
            if w[0].path == w[1].path {
                return Err(Error::InvalidConfig(format!("meta path {} listed twice", w[0].path)));
            }
        }
        if let Some(m) = matrices.iter().find(|m| m.values.shape() != (n_users, n_users)) {
            return Err(Error::ShapeMismatch(format!(
                "{} matrix is {:?}, expected {n_users}x{n_users}",
                m.path,
                m.values.shape()
            )));
        }
        Ok(ProximityBundle { n_users, matrices })
    }

    pub fn n_users(&self) -> usize {
        self.n_users
    }

    pub fn matrices(&self) -> &[ProximityMatrix] {
        &self.matrices
    }

    pub fn paths(&self) -> Vec<MetaPath> {
        self.matrices.iter().map(|m| m.path).collect()
    }

    pub fn get(&self, path: MetaPath) -> Option<&ProximityMatrix> {
        self.matrices.iter().find(|m| m.path == path)
    }

    /// Restriction to the given paths; missing paths are an error.
    pub fn select(&self, paths: &[MetaPath]) -> Result<ProximityBundle> {
        let mut out = Vec::with_capacity(paths.len());
        for &p in paths {
            let m = self
                .get(p)
                .ok_or_else(|| Error::InvalidConfig(format!("bundle has no {p} matrix")))?;
            out.push(m.clone());
        }
        ProximityBundle::new(self.n_users, out)
    }
}

/// All eight proximity matrices `[P_Φ0, …, P_Φ7]`.
pub fn proximity_bundle(net: &HeterogeneousNetwork) -> ProximityBundle {
    proximity_bundle_for(net, &MetaPath::ALL, &ProximityOptions::default())
}

pub fn proximity_bundle_for(
    net: &HeterogeneousNetwork,
    paths: &[MetaPath],
    opts: &ProximityOptions,
) -> ProximityBundle {
    let matrices = paths
        .iter()
        .map(|&p| match p {
            MetaPath::Phi0 => friendship_proximity(net),
            _ => meta_proximity_with(net, p, opts).expect("non-Φ0 path"),
        })
        .collect();
    ProximityBundle::new(net.n_users(), matrices).expect("paths come from the catalog")
}
