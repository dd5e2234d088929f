//! Linear-stage machinery: delay-embedded data matrices and the
//! multi-channel CCA generalized eigenproblem that estimates the FIR
//! channels blindly from second-order statistics, plus the least-squares
//! variant for comparison.

use crate::linalg::{solve_gev, EigenSelect, GevProblem, Matrix, Vector};
use crate::{Error, Result};

/// Delay-embedded data matrix of a signal: `T x L` with `T = N - L + 1`
/// valid rows; row `t` holds `[v[t+L-1], v[t+L-2], ..., v[t]]`, so
/// `matrix * h` is the valid part of the convolution of `v` with `h`.
#[derive(Debug, Clone)]
pub struct DelayEmbedding {
    matrix: Matrix,
    order: usize,
}

pub fn embed(v: &[f64], order: usize) -> Result<DelayEmbedding> {
    if order == 0 {
        return Err(Error::InvalidConfig("embedding order must be >= 1".into()));
    }
    let need = 2 * order - 1;
    if v.len() < need {
        return Err(Error::TooShort {
            need,
            got: v.len(),
        });
    }
    let t = v.len() - order + 1;
    let matrix = Matrix::from_fn(t, order, |r, c| v[r + order - 1 - c]);
    Ok(DelayEmbedding { matrix, order })
}

impl DelayEmbedding {
    pub fn matrix(&self) -> &Matrix {
        &self.matrix
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn rows(&self) -> usize {
        self.matrix.nrows()
    }

    fn column_centered(&self) -> Matrix {
        let mut m = self.matrix.clone();
        let rows = m.nrows() as f64;
        for c in 0..m.ncols() {
            let mean = m.column(c).sum() / rows;
            for r in 0..m.nrows() {
                m[(r, c)] -= mean;
            }
        }
        m
    }
}

/// Estimated channels: P vectors of length L whose concatenation has unit
/// norm (sign fixed by the eigensolver convention), plus the attained
/// generalized eigenvalue.
#[derive(Debug, Clone)]
pub struct ChannelEstimate {
    pub channels: Vec<Vector>,
    pub rho: f64,
}

fn validate_embeddings(embeddings: &[DelayEmbedding], min_p: usize) -> Result<(usize, usize)> {
    if embeddings.len() < min_p {
        return Err(Error::InvalidConfig(format!(
            "need at least {min_p} branches, got {}",
            embeddings.len()
        )));
    }
    let order = embeddings[0].order();
    let rows = embeddings[0].rows();
    for e in embeddings {
        if e.order() != order || e.rows() != rows {
            return Err(Error::DimensionMismatch(
                "embeddings must share order and row count".into(),
            ));
        }
    }
    if rows < order {
        return Err(Error::TooShort {
            need: order,
            got: rows,
        });
    }
    Ok((order, rows))
}

/// Assembles and solves the channel-estimation GEV over data matrices
/// `Y_i` (one per branch):
///
/// off-diagonal block `(i, j)` of the correlation side is `Y_j^T Y_i`, the
/// block-diagonal energy side holds `sum_{j != i} Y_j^T Y_j`, and the
/// principal eigenvector maximizes the pairwise output correlations under
/// unit total output energy.
fn channels_from_matrices(mats: &[Matrix], order: usize) -> Result<ChannelEstimate> {
    let p = mats.len();
    let dim = p * order;
    let mut grams = vec![vec![Matrix::zeros(order, order); p]; p];
    for i in 0..p {
        for j in i..p {
            let g = mats[i].transpose() * &mats[j];
            if i == j {
                grams[i][i] = g;
            } else {
                grams[j][i] = g.transpose();
                grams[i][j] = g;
            }
        }
    }
    let mut r = Matrix::zeros(dim, dim);
    let mut d = Matrix::zeros(dim, dim);
    for i in 0..p {
        let mut energy = Matrix::zeros(order, order);
        for j in 0..p {
            if i == j {
                continue;
            }
            // grams[j][i] = Y_j^T Y_i
            r.view_mut((i * order, j * order), (order, order))
                .copy_from(&grams[j][i]);
            energy += &grams[j][j];
        }
        d.view_mut((i * order, i * order), (order, order))
            .copy_from(&energy);
    }
    let solution = solve_gev(&GevProblem::new(r, d, EigenSelect::Largest)?)?;
    let channels = (0..p)
        .map(|i| solution.eigenvector.rows(i * order, order).into_owned())
        .collect();
    Ok(ChannelEstimate {
        channels,
        rho: solution.eigenvalue,
    })
}

/// Blind CCA channel estimation over P >= 2 branches. Embedding columns
/// are mean-centered before the Gram blocks are formed.
pub fn cca_channels(embeddings: &[DelayEmbedding]) -> Result<ChannelEstimate> {
    let (order, _) = validate_embeddings(embeddings, 2)?;
    let mats: Vec<Matrix> = embeddings.iter().map(|e| e.column_centered()).collect();
    channels_from_matrices(&mats, order)
}

/// [`cca_channels`] without the column centering, for inputs that are
/// zero-mean by construction (the alternating loop's intermediates).
pub fn cca_channels_uncentered(embeddings: &[DelayEmbedding]) -> Result<ChannelEstimate> {
    let (order, _) = validate_embeddings(embeddings, 2)?;
    let mats: Vec<Matrix> = embeddings.iter().map(|e| e.matrix.clone()).collect();
    channels_from_matrices(&mats, order)
}

/// Least-squares variant for exactly two branches: the smallest-eigenvalue
/// eigenvector of `[[X2^T X2, -X2^T X1], [-X1^T X2, X1^T X1]]` under a unit
/// constraint on the stacked filter norm.
pub fn ls_channels(embeddings: &[DelayEmbedding]) -> Result<ChannelEstimate> {
    if embeddings.len() != 2 {
        return Err(Error::InvalidConfig(format!(
            "least-squares estimation requires exactly 2 branches, got {}",
            embeddings.len()
        )));
    }
    let (order, _) = validate_embeddings(embeddings, 2)?;
    let x1 = embeddings[0].column_centered();
    let x2 = embeddings[1].column_centered();
    let dim = 2 * order;
    let mut a = Matrix::zeros(dim, dim);
    a.view_mut((0, 0), (order, order))
        .copy_from(&(x2.transpose() * &x2));
    a.view_mut((0, order), (order, order))
        .copy_from(&(-(x2.transpose() * &x1)));
    a.view_mut((order, 0), (order, order))
        .copy_from(&(-(x1.transpose() * &x2)));
    a.view_mut((order, order), (order, order))
        .copy_from(&(x1.transpose() * &x1));
    let solution = solve_gev(&GevProblem::new(
        a,
        Matrix::identity(dim, dim),
        EigenSelect::Smallest,
    )?)?;
    let channels = (0..2)
        .map(|i| solution.eigenvector.rows(i * order, order).into_owned())
        .collect();
    Ok(ChannelEstimate {
        channels,
        rho: solution.eigenvalue,
    })
}
