use super::AlignedPair;

/// Binary inter-network transitional matrix `T^(1,2)` of shape
/// `|U^(1)| x |U^(2)|`, stored as the two partial maps of the matching.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TransitionMatrix {
    row_to_col: Vec<Option<usize>>,
    col_to_row: Vec<Option<usize>>,
}

impl TransitionMatrix {
    /// Builds from anchor pairs that already form a partial matching.
    pub fn from_matching(n_rows: usize, n_cols: usize, anchors: &[(usize, usize)]) -> Self {
        let mut row_to_col = vec![None; n_rows];
        let mut col_to_row = vec![None; n_cols];
        for &(i, j) in anchors {
            debug_assert!(row_to_col[i].is_none() && col_to_row[j].is_none());
            row_to_col[i] = Some(j);
            col_to_row[j] = Some(i);
        }
        TransitionMatrix {
            row_to_col,
            col_to_row,
        }
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.row_to_col.len(), self.col_to_row.len())
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        if self.row_to_col[i] == Some(j) {
            1.0
        } else {
            0.0
        }
    }

    /// Anchor partner in the mature network of emerging user `i`.
    pub fn partner_of_row(&self, i: usize) -> Option<usize> {
        self.row_to_col[i]
    }

    /// Anchor partner in the emerging network of mature user `j`.
    pub fn partner_of_col(&self, j: usize) -> Option<usize> {
        self.col_to_row[j]
    }

    pub fn nnz(&self) -> usize {
        self.row_to_col.iter().flatten().count()
    }

    pub fn row_sums(&self) -> Vec<usize> {
        self.row_to_col.iter().map(|c| c.is_some() as usize).collect()
    }

    pub fn col_sums(&self) -> Vec<usize> {
        self.col_to_row.iter().map(|r| r.is_some() as usize).collect()
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let (r, c) = self.shape();
        let mut out = vec![vec![0.0; c]; r];
        for (i, j) in self.row_to_col.iter().enumerate() {
            if let Some(j) = j {
                out[i][*j] = 1.0;
            }
        }
        out
    }
}

pub fn build_transition_matrix(pair: &AlignedPair) -> TransitionMatrix {
    TransitionMatrix::from_matching(
        pair.emerging.n_users(),
        pair.mature.n_users(),
        pair.anchors(),
    )
}
