//! Gaussian-kernel machinery: data-driven bandwidth selection, low-rank
//! centered kernel factors obtained by incomplete Cholesky, and kernel
//! expansions representing the estimated inverse nonlinearities.

use crate::linalg::{incomplete_cholesky, Matrix, Vector};
use crate::{Error, Result};

/// Width of a Gaussian kernel `exp(-(x - x')^2 / (2 sigma^2))`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelSpec {
    pub sigma: f64,
}

impl KernelSpec {
    pub fn new(sigma: f64) -> Result<Self> {
        if !(sigma > 0.0) || !sigma.is_finite() {
            return Err(Error::InvalidConfig(format!(
                "kernel width must be positive and finite, got {sigma}"
            )));
        }
        Ok(Self { sigma })
    }
}

pub fn gaussian_kernel(x: f64, y: f64, spec: &KernelSpec) -> f64 {
    let d = x - y;
    (-d * d / (2.0 * spec.sigma * spec.sigma)).exp()
}

/// Linear-interpolation quantile of already sorted data, `p` in [0, 1].
fn sorted_quantile(sorted: &[f64], p: f64) -> f64 {
    let pos = p * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let frac = pos - lo as f64;
    if lo + 1 < sorted.len() {
        sorted[lo] + frac * (sorted[lo + 1] - sorted[lo])
    } else {
        sorted[lo]
    }
}

/// Bandwidth rule `sigma = min(std, IQR/1.34) * N^(-1/5)` with the
/// empirical (1/(N-1)-normalized) standard deviation and
/// linear-interpolation quartiles.
pub fn silverman_bandwidth(data: &[f64]) -> Result<KernelSpec> {
    if data.len() < 2 {
        return Err(Error::TooShort {
            need: 2,
            got: data.len(),
        });
    }
    if data.iter().any(|x| !x.is_finite()) {
        return Err(Error::NonFinite("bandwidth data"));
    }
    let n = data.len() as f64;
    let mean = data.iter().sum::<f64>() / n;
    let std = (data.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
    let mut sorted = data.to_vec();
    sorted.sort_by(|a, b| a.total_cmp(b));
    let iqr = sorted_quantile(&sorted, 0.75) - sorted_quantile(&sorted, 0.25);
    let a = std.min(iqr / 1.34);
    if a <= 0.0 {
        return Err(Error::DegenerateBandwidth);
    }
    KernelSpec::new(a * n.powf(-0.2))
}

/// Low-rank factor `G` of a Gaussian kernel matrix, `K ≈ G G^T`, over the
/// base points it was built from.
///
/// Rows may be organized in equally sized blocks (one per branch when the
/// factor spans several branches' data); centering removes column means
/// per block so that every block of `G alpha` is zero-mean.
#[derive(Debug, Clone)]
pub struct LowRankFactor {
    g: Matrix,
    base_points: Vec<f64>,
    spec: KernelSpec,
    centered: bool,
    blocks: usize,
    /// Column means removed from each row block; empty until centered.
    block_means: Vec<Vector>,
}

/// Builds an (uncentered) low-rank factor of the kernel matrix
/// `K[i,j] = k(data[i], data[j])` by incomplete Cholesky, stopping at the
/// given residual-trace precision.
pub fn build_lowrank_factor(
    data: &[f64],
    spec: &KernelSpec,
    precision: f64,
) -> Result<LowRankFactor> {
    build_lowrank_factor_blocks(data, spec, precision, 1)
}

/// Same as [`build_lowrank_factor`] for data made of `blocks` equally
/// sized segments that will be centered independently.
pub fn build_lowrank_factor_blocks(
    data: &[f64],
    spec: &KernelSpec,
    precision: f64,
    blocks: usize,
) -> Result<LowRankFactor> {
    if data.len() < 2 {
        return Err(Error::TooShort {
            need: 2,
            got: data.len(),
        });
    }
    if blocks == 0 || data.len() % blocks != 0 {
        return Err(Error::InvalidConfig(format!(
            "{} points do not split into {blocks} equal blocks",
            data.len()
        )));
    }
    let g = incomplete_cholesky(
        |i, j| gaussian_kernel(data[i], data[j], spec),
        data.len(),
        precision,
    )?;
    Ok(LowRankFactor {
        g,
        base_points: data.to_vec(),
        spec: *spec,
        centered: false,
        blocks,
        block_means: Vec::new(),
    })
}

impl LowRankFactor {
    pub fn g(&self) -> &Matrix {
        &self.g
    }

    /// Number of base points (rows of `G`).
    pub fn len(&self) -> usize {
        self.base_points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.base_points.is_empty()
    }

    /// Number of retained columns `M`.
    pub fn rank(&self) -> usize {
        self.g.ncols()
    }

    pub fn spec(&self) -> &KernelSpec {
        &self.spec
    }

    pub fn base_points(&self) -> &[f64] {
        &self.base_points
    }

    pub fn is_centered(&self) -> bool {
        self.centered
    }

    pub fn blocks(&self) -> usize {
        self.blocks
    }

    pub fn block_len(&self) -> usize {
        self.base_points.len() / self.blocks
    }

    /// Rows of `G` belonging to block `b`.
    pub fn block_g(&self, b: usize) -> Matrix {
        let bl = self.block_len();
        self.g.rows(b * bl, bl).into_owned()
    }

    /// Removes the column means of every row block of `G`, so each block of
    /// the feature-space data becomes zero-mean. Centering twice is an
    /// error.
    pub fn center(mut self) -> Result<Self> {
        if self.centered {
            return Err(Error::AlreadyCentered);
        }
        let bl = self.block_len();
        let m = self.g.ncols();
        let mut block_means = Vec::with_capacity(self.blocks);
        for b in 0..self.blocks {
            let mut means = Vector::zeros(m);
            for c in 0..m {
                let mut s = 0.0;
                for r in 0..bl {
                    s += self.g[(b * bl + r, c)];
                }
                means[c] = s / bl as f64;
            }
            for c in 0..m {
                for r in 0..bl {
                    self.g[(b * bl + r, c)] -= means[c];
                }
            }
            block_means.push(means);
        }
        self.centered = true;
        self.block_means = block_means;
        Ok(self)
    }

    /// The factor as built, before any centering.
    fn uncentered_g(&self) -> Matrix {
        if !self.centered {
            return self.g.clone();
        }
        let bl = self.block_len();
        let mut g = self.g.clone();
        for b in 0..self.blocks {
            let means = &self.block_means[b];
            for c in 0..g.ncols() {
                for r in 0..bl {
                    g[(b * bl + r, c)] += means[c];
                }
            }
        }
        g
    }

    /// Test-only constructor for exercising operations on a handcrafted
    /// factor matrix.
    #[doc(hidden)]
    pub fn from_parts(g: Matrix, base_points: Vec<f64>, spec: KernelSpec, centered: bool) -> Self {
        let blocks = 1;
        let block_means = if centered {
            vec![Vector::zeros(g.ncols())]
        } else {
            Vec::new()
        };
        Self {
            g,
            base_points,
            spec,
            centered,
            blocks,
            block_means,
        }
    }
}

/// Coefficients `alpha` over a low-rank factor, representing an estimated
/// inverse nonlinearity `g_hat`.
///
/// At the base points the represented values are exactly `G alpha`; at an
/// arbitrary query `t` the expansion evaluates the minimum-norm consistent
/// extension `k_t^T G_u (G_u^T G_u)^{-1} alpha` over the uncentered factor
/// `G_u`, minus the constant that block centering removed. The extension
/// reduces to a plain kernel expansion `sum_n w[n] k(t, x[n]) - offset`.
#[derive(Debug, Clone)]
pub struct KernelExpansion {
    coefficients: Vector,
    weights: Vector,
    offsets: Vec<f64>,
    values: Vector,
    base_points: Vec<f64>,
    spec: KernelSpec,
    block_len: usize,
}

impl KernelExpansion {
    pub fn new(factor: &LowRankFactor, coefficients: Vector) -> Result<Self> {
        if coefficients.len() != factor.rank() {
            return Err(Error::DimensionMismatch(format!(
                "{} coefficients for a rank-{} factor",
                coefficients.len(),
                factor.rank()
            )));
        }
        let gu = factor.uncentered_g();
        let gram = gu.transpose() * &gu;
        let chol = match nalgebra::Cholesky::new(gram.clone()) {
            Some(c) => c,
            None => {
                let eps = 1e-12 * gram.trace() / gram.nrows().max(1) as f64;
                let jittered = gram + Matrix::identity(gu.ncols(), gu.ncols()) * eps;
                nalgebra::Cholesky::new(jittered).ok_or(Error::SingularPencil)?
            }
        };
        let weights = &gu * chol.solve(&coefficients);
        let offsets = if factor.is_centered() {
            factor
                .block_means
                .iter()
                .map(|mu| mu.dot(&coefficients))
                .collect()
        } else {
            vec![0.0; factor.blocks()]
        };
        let values = factor.g() * &coefficients;
        Ok(Self {
            coefficients,
            weights,
            offsets,
            values,
            base_points: factor.base_points().to_vec(),
            spec: *factor.spec(),
            block_len: factor.block_len(),
        })
    }

    pub fn coefficients(&self) -> &Vector {
        &self.coefficients
    }

    /// Represented values at the base points, `G alpha`.
    pub fn values(&self) -> &Vector {
        &self.values
    }

    /// Values of block `b` at its base points.
    pub fn block_values(&self, b: usize) -> Vec<f64> {
        self.values
            .as_slice()
            .iter()
            .skip(b * self.block_len)
            .take(self.block_len)
            .cloned()
            .collect()
    }

    /// Evaluates the represented function at `t` (block 0 for factors
    /// spanning several branches).
    pub fn eval(&self, t: f64) -> f64 {
        self.eval_block(t, 0)
    }

    /// Evaluates the function as seen by branch block `b`.
    pub fn eval_block(&self, t: f64, b: usize) -> f64 {
        let mut acc = 0.0;
        for (n, &x) in self.base_points.iter().enumerate() {
            acc += self.weights[n] * gaussian_kernel(t, x, &self.spec);
        }
        acc - self.offsets[b]
    }
}
