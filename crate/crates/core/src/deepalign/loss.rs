use ndarray::Array2;

use super::model::{weight_sq_norm, DimeParams};
use crate::error::{Error, Result};
use crate::netcore::TransitionMatrix;

/// How the cross-network fusion loss treats mature-network users without
/// an anchor.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum FusionRows {
    /// `||Tᵀ Z1 W - Z2||²_F` as written: unanchored rows of `Z2` are pulled
    /// toward zero.
    #[default]
    Literal,
    /// Only anchored rows contribute.
    AnchorsOnly,
}

/// Weight applied to a reconstruction error: `gamma` on non-zero targets,
/// 1 elsewhere.
#[inline]
pub(crate) fn entry_weight(x: f64, gamma: f64) -> f64 {
    if x != 0.0 {
        gamma
    } else {
        1.0
    }
}

/// `Σ ||(x - x̂) ⊙ b||²` over all paths and rows.
pub fn recon_loss(x: &[Array2<f64>], x_hat: &[&Array2<f64>], gamma: f64) -> Result<f64> {
    if x.len() != x_hat.len() {
        return Err(Error::ShapeMismatch(format!("{} inputs vs {} reconstructions", x.len(), x_hat.len())));
    }
    let mut total = 0.0;
    for (a, b) in x.iter().zip(x_hat) {
        if a.shape() != b.shape() {
            return Err(Error::ShapeMismatch(format!("{:?} vs {:?}", a.shape(), b.shape())));
        }
        total += a
            .iter()
            .zip(b.iter())
            .map(|(&xv, &xh)| {
                let e = (xv - xh) * entry_weight(xv, gamma);
                e * e
            })
            .sum::<f64>();
    }
    Ok(total)
}

/// `||Tᵀ Z1 W12 - Z2||²_F`, or its anchored rows only.
pub fn fusion_loss(
    z1: &Array2<f64>,
    z2: &Array2<f64>,
    t: &TransitionMatrix,
    w12: &Array2<f64>,
    rows: FusionRows,
) -> Result<f64> {
    let (n1, n2) = t.shape();
    if z1.nrows() != n1 || z2.nrows() != n2 {
        return Err(Error::ShapeMismatch(format!(
            "embeddings have {} and {} rows, transition matrix is {n1}x{n2}",
            z1.nrows(),
            z2.nrows()
        )));
    }
    if w12.shape() != [z1.ncols(), z2.ncols()] {
        return Err(Error::ShapeMismatch(format!(
            "projection is {:?}, expected {}x{}",
            w12.shape(),
            z1.ncols(),
            z2.ncols()
        )));
    }
    let mut total = 0.0;
    for j in 0..n2 {
        match t.partner_of_col(j) {
            Some(i) => {
                let projected = z1.row(i).dot(w12);
                total += (&projected - &z2.row(j)).mapv(|v| v * v).sum();
            }
            None if rows == FusionRows::Literal => total += z2.row(j).mapv(|v| v * v).sum(),
            None => {}
        }
    }
    Ok(total)
}

/// Squared Frobenius norm of every weight matrix of both networks plus the
/// projection. Biases are not regularised.
pub fn reg_loss(params: &DimeParams) -> f64 {
    let mut s = weight_sq_norm(&params.emerging);
    if let Some(m) = &params.mature {
        s += weight_sq_norm(m);
    }
    if let Some(p) = &params.projection {
        s += p.iter().map(|x| x * x).sum::<f64>();
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::deepalign::model::{init_params, ArchitectureSpec};
    use crate::metaprox::MetaPath;
    use ndarray::array;

    #[test]
    fn perfect_reconstruction_is_free() {
        let x = vec![array![[0.2, 0.0, 1.0]]];
        assert_eq!(recon_loss(&x, &[&x[0]], 100.0).unwrap(), 0.0);
    }

    #[test]
    fn weighted_error_by_hand() {
        let x = vec![array![[1.0, 0.0]]];
        let xh = array![[0.5, 0.5]];
        // (0.5 * 100)^2 + 0.5^2
        assert_eq!(recon_loss(&x, &[&xh], 100.0).unwrap(), 2500.25);
    }

    #[test]
    fn gamma_one_is_plain_squared_error() {
        let x = vec![array![[1.0, 0.0, 0.3]]];
        let xh = array![[0.5, 0.25, 0.3]];
        assert_eq!(recon_loss(&x, &[&xh], 1.0).unwrap(), 0.25 + 0.0625);
    }

    #[test]
    fn fusion_without_anchors_is_mature_norm() {
        let z1 = array![[0.3, 0.4]];
        let z2 = array![[0.1, 0.2], [0.5, 0.5]];
        let t = TransitionMatrix::from_matching(1, 2, &[]);
        let w = Array2::eye(2);
        let l = fusion_loss(&z1, &z2, &t, &w, FusionRows::Literal).unwrap();
        assert!((l - (0.01 + 0.04 + 0.25 + 0.25)).abs() < 1e-15);
        assert_eq!(fusion_loss(&z1, &z2, &t, &w, FusionRows::AnchorsOnly).unwrap(), 0.0);
    }

    #[test]
    fn fusion_perfectly_aligned_is_zero() {
        let z1 = array![[0.3, 0.4], [0.9, 0.1]];
        let w = array![[2.0, 0.0], [0.0, 0.5]];
        // mature user 0 is anchored to emerging user 1, mature user 1 unanchored at zero
        let z2 = array![[1.8, 0.05], [0.0, 0.0]];
        let t = TransitionMatrix::from_matching(2, 2, &[(1, 0)]);
        assert_eq!(fusion_loss(&z1, &z2, &t, &w, FusionRows::Literal).unwrap(), 0.0);
    }

    #[test]
    fn fusion_identity_instance() {
        let z1 = array![[1.0, 0.0], [0.0, 1.0]];
        let z2 = Array2::zeros((2, 2));
        let t = TransitionMatrix::from_matching(2, 2, &[(0, 0), (1, 1)]);
        let l = fusion_loss(&z1, &z2, &t, &Array2::eye(2), FusionRows::Literal).unwrap();
        assert_eq!(l, 2.0);
    }

    #[test]
    fn fusion_shape_errors() {
        let t = TransitionMatrix::from_matching(2, 2, &[]);
        let z = Array2::zeros((2, 2));
        assert!(fusion_loss(&Array2::zeros((3, 2)), &z, &t, &Array2::eye(2), FusionRows::Literal).is_err());
        assert!(fusion_loss(&z, &z, &t, &Array2::eye(3), FusionRows::Literal).is_err());
    }

    fn zero_params() -> DimeParams {
        let arch = ArchitectureSpec {
            encoder_widths: vec![2],
            fusion_width: 2,
            embedding_dim: 2,
            paths: vec![MetaPath::Phi0],
        };
        let mut p = init_params(&arch, 2, Some((&arch, 2)), 0).unwrap();
        p.visit_mut(&mut |_, t| t.fill(0.0));
        p
    }

    #[test]
    fn reg_of_zero_weights() {
        assert_eq!(reg_loss(&zero_params()), 0.0);
    }

    #[test]
    fn reg_single_matrix() {
        let mut p = zero_params();
        p.emerging.branches[0].encoder[0].weight = array![[1.0, 2.0], [2.0, 1.0]];
        // biases are ignored
        p.emerging.bottleneck.bias.fill(3.0);
        assert_eq!(reg_loss(&p), 10.0);
    }

    #[test]
    fn reg_is_quadratic() {
        let arch = ArchitectureSpec {
            encoder_widths: vec![3],
            fusion_width: 2,
            embedding_dim: 2,
            paths: vec![MetaPath::Phi0, MetaPath::Phi1],
        };
        let p = init_params(&arch, 4, Some((&arch, 5)), 9).unwrap();
        let mut q = p.clone();
        q.visit_mut(&mut |_, t| t.iter_mut().for_each(|x| *x *= 2.0));
        assert!((reg_loss(&q) - 4.0 * reg_loss(&p)).abs() < 1e-12 * reg_loss(&q));
    }
}
