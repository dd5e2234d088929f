//! The alternating identification loop for SIMO Wiener systems.
//!
//! Each iteration solves two generalized eigenproblems in turn: a CCA over
//! delay embeddings of the current intermediate signals updates the channel
//! estimates, then a regularized kernel CCA over filtered low-rank kernel
//! factors updates the inverse-nonlinearity coefficients. The loop descends
//! a normalized pairwise disagreement cost and stops when the cost change
//! drops below the configured tolerance.

use crate::cca::{self, embed, ChannelEstimate};
use crate::kernels::{
    build_lowrank_factor, build_lowrank_factor_blocks, silverman_bandwidth, KernelExpansion,
    LowRankFactor,
};
use crate::linalg::{solve_gev, EigenSelect, GevProblem, Matrix, Vector};
use crate::{Error, Result};

/// How the loop is seeded.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InitStrategy {
    /// Start from identity inverse nonlinearities: the initial
    /// intermediates are the (mean-removed) observed outputs.
    Identity,
    /// Solve the unconstrained stacked problem for the Kronecker vectors
    /// and project them onto rank-1 structure (two branches only).
    KroneckerSvd,
}

#[derive(Debug, Clone)]
pub struct AkccaConfig {
    /// Channel order L (assumed known).
    pub order: usize,
    /// Regularization weight on the expansion-coefficient norms.
    pub regularization: f64,
    /// Residual-trace precision of the incomplete Cholesky factors.
    pub icd_precision: f64,
    /// Stop when the absolute cost change falls below this.
    pub conv_tol: f64,
    pub max_iters: usize,
    pub init: InitStrategy,
    /// Estimate a single nonlinearity shared by all branches.
    pub shared_nonlinearity: bool,
}

impl Default for AkccaConfig {
    fn default() -> Self {
        Self {
            order: 5,
            regularization: 1e-5,
            icd_precision: 1e-8,
            conv_tol: 1e-10,
            max_iters: 200,
            init: InitStrategy::Identity,
            shared_nonlinearity: false,
        }
    }
}

impl AkccaConfig {
    pub fn new(order: usize) -> Self {
        Self {
            order,
            ..Self::default()
        }
    }

    fn validate(&self) -> Result<()> {
        if self.order < 2 {
            return Err(Error::InvalidConfig(format!(
                "channel order must be >= 2, got {}",
                self.order
            )));
        }
        if self.regularization < 0.0 {
            return Err(Error::InvalidConfig(
                "regularization must be >= 0".into(),
            ));
        }
        if !(self.conv_tol > 0.0) {
            return Err(Error::InvalidConfig("conv_tol must be > 0".into()));
        }
        if self.max_iters == 0 {
            return Err(Error::InvalidConfig("max_iters must be >= 1".into()));
        }
        Ok(())
    }
}

/// Per-ordered-pair storage for P branches; the diagonal is unused.
#[derive(Debug, Clone)]
pub struct PairGrid<T> {
    p: usize,
    items: Vec<Option<T>>,
}

impl<T> PairGrid<T> {
    pub fn new(p: usize) -> Self {
        Self {
            p,
            items: (0..p * p).map(|_| None).collect(),
        }
    }

    pub fn branch_count(&self) -> usize {
        self.p
    }

    pub fn set(&mut self, i: usize, j: usize, item: T) {
        assert!(i != j && i < self.p && j < self.p, "invalid pair ({i},{j})");
        self.items[i * self.p + j] = Some(item);
    }

    pub fn get(&self, i: usize, j: usize) -> &T {
        self.items[i * self.p + j]
            .as_ref()
            .expect("pair entry not populated")
    }

    /// Ordered pairs (i, j), i != j.
    pub fn pairs(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        let p = self.p;
        (0..p).flat_map(move |i| (0..p).filter(move |&j| j != i).map(move |j| (i, j)))
    }
}

/// The filtered factors `W_ij[t, m] = sum_l h_j[l] G_i[t+L-1-l, m]` for all
/// ordered pairs.
pub type WStack = PairGrid<Matrix>;

/// Filters the rows of `g` (an N x M block) with taps `h`, keeping the
/// T = N - L + 1 valid rows.
fn filter_rows(g: &Matrix, h: &Vector) -> Result<Matrix> {
    let n = g.nrows();
    let order = h.len();
    if n < 2 * order - 1 {
        return Err(Error::TooShort {
            need: 2 * order - 1,
            got: n,
        });
    }
    let t = n - order + 1;
    let m = g.ncols();
    let mut w = Matrix::zeros(t, m);
    for r in 0..t {
        for l in 0..order {
            let hl = h[l];
            if hl == 0.0 {
                continue;
            }
            let src = r + order - 1 - l;
            for c in 0..m {
                w[(r, c)] += hl * g[(src, c)];
            }
        }
    }
    Ok(w)
}

/// Builds `W = filter(G, h)` from a centered single-block factor.
pub fn build_w(factor: &LowRankFactor, h: &Vector) -> Result<Matrix> {
    if !factor.is_centered() {
        return Err(Error::NotCentered);
    }
    filter_rows(factor.g(), h)
}

fn build_w_stack(factors: &Factors, channels: &[Vector]) -> Result<WStack> {
    let p = channels.len();
    let mut stack = WStack::new(p);
    for i in 0..p {
        let g = factors.block(i);
        for j in 0..p {
            if i == j {
                continue;
            }
            stack.set(i, j, filter_rows(&g, &channels[j])?);
        }
    }
    Ok(stack)
}

/// Solution of one kernel-CCA step.
#[derive(Debug, Clone)]
pub struct KccaSolution {
    /// Per-branch coefficient vectors (a single shared vector is cloned to
    /// every branch slot in shared mode).
    pub alphas: Vec<Vector>,
    /// Attained generalized eigenvalue (canonical correlation).
    pub rho: f64,
}

/// Solves the regularized kernel-CCA generalized eigenproblem over the
/// filtered factors.
///
/// Off-diagonal correlation blocks are `W_ij^T W_ji`; the block-diagonal
/// energy side holds `sum_{j != i} W_ij^T W_ij + c I`. In shared mode the
/// blocks collapse to sums over all ordered pairs. The returned vector is
/// rescaled so the total constrained energy
/// `sum ||W_ij a_i||^2 + c sum ||a_i||^2` equals one.
pub fn kcca_step(stack: &WStack, regularization: f64, shared: bool) -> Result<KccaSolution> {
    let p = stack.branch_count();
    if p < 2 {
        return Err(Error::InvalidConfig("need at least 2 branches".into()));
    }
    let c = regularization;
    let (r, d, sizes) = if shared {
        let m = stack.get(0, 1).ncols();
        let mut r = Matrix::zeros(m, m);
        let mut d = Matrix::zeros(m, m);
        for (i, j) in stack.pairs() {
            let wij = stack.get(i, j);
            r += wij.transpose() * stack.get(j, i);
            d += wij.transpose() * wij;
        }
        r = (&r + r.transpose()) * 0.5;
        d += Matrix::identity(m, m) * c;
        (r, d, vec![m])
    } else {
        let sizes: Vec<usize> = (0..p)
            .map(|i| stack.get(i, if i == 0 { 1 } else { 0 }).ncols())
            .collect();
        let total: usize = sizes.iter().sum();
        let offsets: Vec<usize> = sizes
            .iter()
            .scan(0, |acc, &s| {
                let o = *acc;
                *acc += s;
                Some(o)
            })
            .collect();
        let mut r = Matrix::zeros(total, total);
        let mut d = Matrix::zeros(total, total);
        for (i, j) in stack.pairs() {
            let wij = stack.get(i, j);
            r.view_mut((offsets[i], offsets[j]), (sizes[i], sizes[j]))
                .copy_from(&(wij.transpose() * stack.get(j, i)));
        }
        for i in 0..p {
            let mut energy = Matrix::identity(sizes[i], sizes[i]) * c;
            for j in 0..p {
                if j == i {
                    continue;
                }
                let wij = stack.get(i, j);
                energy += wij.transpose() * wij;
            }
            d.view_mut((offsets[i], offsets[i]), (sizes[i], sizes[i]))
                .copy_from(&energy);
        }
        (r, d, sizes)
    };

    let problem = GevProblem::new(r, d.clone(), EigenSelect::Largest)?;
    let solution = solve_gev(&problem)?;
    let energy = (solution.eigenvector.transpose() * &d * &solution.eigenvector)[(0, 0)];
    if !(energy > 0.0) {
        return Err(Error::Degenerate("zero constrained energy"));
    }
    let scaled = &solution.eigenvector / energy.sqrt();

    let alphas = if shared {
        vec![scaled.clone(); p]
    } else {
        let mut offset = 0;
        sizes
            .iter()
            .map(|&s| {
                let a = scaled.rows(offset, s).into_owned();
                offset += s;
                a
            })
            .collect()
    };
    Ok(KccaSolution {
        alphas,
        rho: solution.eigenvalue,
    })
}

/// Channel update: delegates to the linear-stage CCA over delay embeddings
/// of the current intermediate signals.
pub fn cca_step(intermediates: &[Vec<f64>], order: usize) -> Result<ChannelEstimate> {
    let embeddings = intermediates
        .iter()
        .map(|y| embed(y, order))
        .collect::<Result<Vec<_>>>()?;
    cca::cca_channels(&embeddings)
}

/// Normalized pairwise disagreement of the identification-diagram outputs:
/// `0.5 * sum_{i != j} ||z_ij - z_ji||^2` after rescaling the stacked
/// outputs to unit total energy. Zero iff all pairs commute exactly.
pub fn cost(z: &PairGrid<Vector>) -> Result<f64> {
    let mut energy = 0.0;
    for (i, j) in z.pairs() {
        energy += z.get(i, j).norm_squared();
    }
    if !(energy > 0.0) {
        return Err(Error::Degenerate("all identification outputs are zero"));
    }
    let mut disagree = 0.0;
    for (i, j) in z.pairs() {
        disagree += (z.get(i, j) - z.get(j, i)).norm_squared();
    }
    Ok(0.5 * disagree / energy)
}

/// Estimate returned by [`run_akcca`].
#[derive(Debug, Clone)]
pub struct AkccaEstimate {
    /// Estimated channel vectors (unit-norm concatenation).
    pub channels: Vec<Vector>,
    /// Estimated inverse nonlinearities, one per branch (clones of the
    /// shared expansion in shared mode).
    pub expansions: Vec<KernelExpansion>,
    /// Estimated intermediate signals `y_i = G_i alpha_i`, full length N.
    pub intermediates: Vec<Vec<f64>>,
    /// Cost after every completed iteration; non-increasing.
    pub cost_history: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    /// Retained low-rank ranks M per branch factor (one entry in shared
    /// mode).
    pub factor_ranks: Vec<usize>,
}

/// Per-branch or shared kernel factors behind a uniform block interface.
enum Factors {
    PerBranch(Vec<LowRankFactor>),
    Shared(LowRankFactor),
}

impl Factors {
    fn block(&self, i: usize) -> Matrix {
        match self {
            Factors::PerBranch(fs) => fs[i].g().clone(),
            Factors::Shared(f) => f.block_g(i),
        }
    }

    fn ranks(&self) -> Vec<usize> {
        match self {
            Factors::PerBranch(fs) => fs.iter().map(|f| f.rank()).collect(),
            Factors::Shared(f) => vec![f.rank()],
        }
    }
}

fn intermediates_from(factors: &Factors, alphas: &[Vector], p: usize) -> Vec<Vec<f64>> {
    (0..p)
        .map(|i| {
            let y = factors.block(i) * &alphas[i];
            y.as_slice().to_vec()
        })
        .collect()
}

fn z_outputs(stack: &WStack, alphas: &[Vector]) -> PairGrid<Vector> {
    let mut z = PairGrid::new(stack.branch_count());
    for (i, j) in stack.pairs() {
        z.set(i, j, stack.get(i, j) * &alphas[i]);
    }
    z
}

/// Rescales the coefficients so every branch's intermediate `G_i alpha_i`
/// has unit power (a single global rescale in shared mode).
///
/// The summed energy constraint leaves the per-branch scale split loose;
/// without this balance the alternation drifts indefinitely along a
/// near-flat direction that slowly mutes the worst-fitting branch.
fn balance_alphas(factors: &Factors, alphas: &mut [Vector], shared: bool) {
    if shared {
        let p = alphas.len();
        let mut energy = 0.0;
        let mut count = 0usize;
        for i in 0..p {
            let y = factors.block(i) * &alphas[0];
            energy += y.norm_squared();
            count += y.len();
        }
        let rms = (energy / count as f64).sqrt();
        if rms > 0.0 {
            for a in alphas.iter_mut() {
                *a /= rms;
            }
        }
    } else {
        for (i, a) in alphas.iter_mut().enumerate() {
            let y = factors.block(i) * &*a;
            let rms = (y.norm_squared() / y.len() as f64).sqrt();
            if rms > 0.0 {
                *a /= rms;
            }
        }
    }
}

fn normalize_power(signals: &mut [Vec<f64>]) {
    for s in signals.iter_mut() {
        let rms = (s.iter().map(|v| v * v).sum::<f64>() / s.len() as f64).sqrt();
        if rms > 0.0 {
            for v in s.iter_mut() {
                *v /= rms;
            }
        }
    }
}

/// Runs the full alternating identification on the observed outputs.
///
/// Per iteration: update channels by CCA over the current intermediates,
/// rebuild the filtered factors, update expansion coefficients by the
/// regularized kernel CCA, rebalance the per-branch powers, recompute
/// the intermediates and evaluate the cost. The loop keeps the
/// lowest-cost iterate seen (`cost_history` reports that incumbent's
/// cost after every iteration, so it is non-increasing) and stops once
/// the cost movement between consecutive iterations falls below the
/// configured tolerance.
pub fn run_akcca(outputs: &[Vec<f64>], config: &AkccaConfig) -> Result<AkccaEstimate> {
    config.validate()?;
    let p = outputs.len();
    if p < 2 {
        return Err(Error::InvalidConfig(format!(
            "need at least 2 output branches, got {p}"
        )));
    }
    let n = outputs[0].len();
    if outputs.iter().any(|x| x.len() != n) {
        return Err(Error::DimensionMismatch(
            "branch outputs have different lengths".into(),
        ));
    }
    if n < 2 * config.order - 1 {
        return Err(Error::TooShort {
            need: 2 * config.order - 1,
            got: n,
        });
    }

    let factors = if config.shared_nonlinearity {
        let concat: Vec<f64> = outputs.iter().flatten().cloned().collect();
        let spec = silverman_bandwidth(&concat)?;
        Factors::Shared(
            build_lowrank_factor_blocks(&concat, &spec, config.icd_precision, p)?.center()?,
        )
    } else {
        let fs = outputs
            .iter()
            .map(|x| {
                let spec = silverman_bandwidth(x)?;
                build_lowrank_factor(x, &spec, config.icd_precision)?.center()
            })
            .collect::<Result<Vec<_>>>()?;
        Factors::PerBranch(fs)
    };

    // Initial intermediates, unit power per branch.
    let mut intermediates: Vec<Vec<f64>> = match config.init {
        InitStrategy::Identity => outputs
            .iter()
            .map(|x| {
                let mean = x.iter().sum::<f64>() / n as f64;
                x.iter().map(|v| v - mean).collect()
            })
            .collect(),
        InitStrategy::KroneckerSvd => {
            if config.shared_nonlinearity {
                return Err(Error::InvalidConfig(
                    "rank-1 initialization is not defined for the shared-nonlinearity mode".into(),
                ));
            }
            let Factors::PerBranch(fs) = &factors else {
                unreachable!()
            };
            let (_, alphas) = init_kronecker_svd(fs, config)?;
            intermediates_from(&factors, &alphas, p)
        }
    };
    normalize_power(&mut intermediates);

    let mut cost_history: Vec<f64> = Vec::new();
    let mut raw_costs: Vec<f64> = Vec::new();
    let mut converged = false;
    let mut best_cost = f64::INFINITY;
    let mut channels: Vec<Vector> = Vec::new();
    let mut alphas: Vec<Vector> = Vec::new();
    let mut best_intermediates: Vec<Vec<f64>> = Vec::new();

    for _ in 0..config.max_iters {
        // Channel update. The intermediates are zero-mean by construction
        // (centered factors), so no further column centering is applied;
        // this keeps the CCA stage an exact minimizer of the evaluated cost.
        let embeddings = intermediates
            .iter()
            .map(|y| embed(y, config.order))
            .collect::<Result<Vec<_>>>()?;
        let channel_est = cca::cca_channels_uncentered(&embeddings)?;
        let new_channels = channel_est.channels;

        let stack = build_w_stack(&factors, &new_channels)?;
        let kcca = kcca_step(&stack, config.regularization, config.shared_nonlinearity)?;
        let mut new_alphas = kcca.alphas;
        balance_alphas(&factors, &mut new_alphas, config.shared_nonlinearity);
        let new_intermediates = intermediates_from(&factors, &new_alphas, p);
        let j = cost(&z_outputs(&stack, &new_alphas))?;

        if j < best_cost {
            best_cost = j;
            channels = new_channels;
            alphas = new_alphas;
            best_intermediates = new_intermediates.clone();
        }
        cost_history.push(best_cost);
        raw_costs.push(j);
        intermediates = new_intermediates;

        if raw_costs.len() >= 2 {
            let delta = (raw_costs[raw_costs.len() - 2] - j).abs();
            if delta < config.conv_tol {
                converged = true;
                break;
            }
        }
    }

    if channels.is_empty() {
        return Err(Error::Degenerate("no iteration completed"));
    }
    let intermediates = best_intermediates;

    let expansions: Vec<KernelExpansion> = match &factors {
        Factors::PerBranch(fs) => fs
            .iter()
            .zip(&alphas)
            .map(|(f, a)| KernelExpansion::new(f, a.clone()))
            .collect::<Result<Vec<_>>>()?,
        Factors::Shared(f) => {
            let e = KernelExpansion::new(f, alphas[0].clone())?;
            vec![e; p]
        }
    };

    Ok(AkccaEstimate {
        channels,
        expansions,
        intermediates,
        iterations: cost_history.len(),
        cost_history,
        converged,
        factor_ranks: factors.ranks(),
    })
}

/// Direct initialization for two branches: solve the stacked problem
/// without Kronecker structure, then project each stacked vector onto its
/// nearest rank-1 factorization.
///
/// Returns `(channels, alphas)` where `channels[i]` has length L and
/// `alphas[i]` has length `M_i`.
pub fn init_kronecker_svd(
    factors: &[LowRankFactor],
    config: &AkccaConfig,
) -> Result<(Vec<Vector>, Vec<Vector>)> {
    if factors.len() != 2 {
        return Err(Error::InvalidConfig(format!(
            "rank-1 initialization is defined for 2 branches, got {}",
            factors.len()
        )));
    }
    config.validate()?;
    if factors.iter().any(|f| !f.is_centered()) {
        return Err(Error::NotCentered);
    }
    let order = config.order;
    // The unconstrained stacked problem has order-times more coefficients
    // per branch than the structured one and overfits into near-perfect
    // correlation at the loop's own penalty; stiffen it proportionally to
    // the added dimensionality.
    let dofs = order * (factors[0].rank() + factors[1].rank()) / 2;
    let c = (config.regularization * dofs as f64).max(config.regularization);

    // Stacked matrices: column block l of Gbar_i holds G_i shifted by l,
    // so Gbar_i * (h (x) alpha) equals W_ij alpha for h = h_j.
    let stacked: Vec<Matrix> = factors
        .iter()
        .map(|f| {
            let g = f.g();
            let n = g.nrows();
            let m = g.ncols();
            let t = n - order + 1;
            let mut s = Matrix::zeros(t, order * m);
            for l in 0..order {
                for r in 0..t {
                    for cix in 0..m {
                        s[(r, l * m + cix)] = g[(r + order - 1 - l, cix)];
                    }
                }
            }
            s
        })
        .collect();

    let m1 = factors[0].rank() * order;
    let m2 = factors[1].rank() * order;
    let total = m1 + m2;
    let mut r = Matrix::zeros(total, total);
    r.view_mut((0, m1), (m1, m2))
        .copy_from(&(stacked[0].transpose() * &stacked[1]));
    r.view_mut((m1, 0), (m2, m1))
        .copy_from(&(stacked[1].transpose() * &stacked[0]));
    let mut d = Matrix::zeros(total, total);
    d.view_mut((0, 0), (m1, m1))
        .copy_from(&(stacked[0].transpose() * &stacked[0] + Matrix::identity(m1, m1) * c));
    d.view_mut((m1, m1), (m2, m2))
        .copy_from(&(stacked[1].transpose() * &stacked[1] + Matrix::identity(m2, m2) * c));

    let solution = solve_gev(&GevProblem::new(r, d, EigenSelect::Largest)?)?;
    // First block drives branch 1's data filtered by branch 2's channel.
    let r2 = solution.eigenvector.rows(0, m1).into_owned();
    let r1 = solution.eigenvector.rows(m1, m2).into_owned();
    let (h2, a1) = crate::linalg::nearest_kronecker_rank1(&r2, order, factors[0].rank())?;
    let (h1, a2) = crate::linalg::nearest_kronecker_rank1(&r1, order, factors[1].rank())?;
    Ok((vec![h1, h2], vec![a1, a2]))
}

/// Initial cost of an initialization point `(channels, alphas)` under the
/// same conventions the loop records.
pub fn initial_cost(
    factors: &[LowRankFactor],
    channels: &[Vector],
    alphas: &[Vector],
) -> Result<f64> {
    let p = factors.len();
    let mut z = PairGrid::new(p);
    for i in 0..p {
        for j in 0..p {
            if i == j {
                continue;
            }
            let w = build_w(&factors[i], &channels[j])?;
            z.set(i, j, w * &alphas[i]);
        }
    }
    cost(&z)
}
