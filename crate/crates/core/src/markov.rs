//! Finite reversible Markov chains and the spectrum of their Markov operator
//! on the `m`-weighted space orthogonal to constants.
//!
//! Every solver works on the symmetrized kernel `D^{1/2} P D^{-1/2}`
//! (`D = diag(m)`), which is a symmetric matrix exactly when the chain is
//! reversible. The constant function corresponds to `sqrt(m)` there and is
//! removed by explicit projection.

use std::collections::VecDeque;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{
    self, dense_symmetric_eigen, lanczos_extreme, power_extreme, CsrMatrix, IterOptions, Which,
};

/// Row sums and detailed balance are checked to this tolerance.
pub const CHAIN_TOL: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RowMode {
    Stochastic,
    Substochastic,
}

/// State space, positive measure and sparse transition kernel.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(try_from = "ChainWire", into = "ChainWire")]
pub struct WeightedChain {
    labels: Vec<String>,
    measure: Vec<f64>,
    kernel: CsrMatrix,
    row_mode: RowMode,
}

impl WeightedChain {
    /// Validates measure positivity, probabilities and row sums. Detailed
    /// balance is not required here; the spectral solvers check it.
    pub fn new(
        labels: Vec<String>,
        measure: Vec<f64>,
        transitions: Vec<(usize, usize, f64)>,
        row_mode: RowMode,
    ) -> Result<Self> {
        let n = measure.len();
        if n == 0 {
            return Err(Error::InvalidChain("empty state space".into()));
        }
        if labels.len() != n {
            return Err(Error::InvalidChain(format!(
                "{} labels for {n} states",
                labels.len()
            )));
        }
        if let Some((i, m)) = measure
            .iter()
            .enumerate()
            .find(|(_, m)| !(m.is_finite() && **m > 0.0))
        {
            return Err(Error::InvalidChain(format!(
                "measure of state {i} is {m}, must be positive"
            )));
        }
        let mut kept = Vec::with_capacity(transitions.len());
        for (i, j, p) in transitions {
            if i >= n || j >= n {
                return Err(Error::InvalidChain(format!(
                    "transition ({i}, {j}) out of range for {n} states"
                )));
            }
            if !(p.is_finite() && p >= 0.0) {
                return Err(Error::InvalidChain(format!(
                    "transition ({i}, {j}) has probability {p}"
                )));
            }
            if p > 0.0 {
                kept.push((i, j, p));
            }
        }
        let kernel = CsrMatrix::from_triplets(n, kept);
        for i in 0..n {
            let s: f64 = kernel.row(i).map(|(_, p)| p).sum();
            let ok = match row_mode {
                RowMode::Stochastic => (s - 1.0).abs() <= CHAIN_TOL,
                RowMode::Substochastic => s <= 1.0 + CHAIN_TOL,
            };
            if !ok {
                return Err(Error::InvalidChain(format!(
                    "row {i} sums to {s} ({row_mode:?})"
                )));
            }
        }
        Ok(WeightedChain {
            labels,
            measure,
            kernel,
            row_mode,
        })
    }

    /// Chain with labels `"0", "1", ...`.
    pub fn unlabeled(
        measure: Vec<f64>,
        transitions: Vec<(usize, usize, f64)>,
        row_mode: RowMode,
    ) -> Result<Self> {
        let labels = (0..measure.len()).map(|i| i.to_string()).collect();
        Self::new(labels, measure, transitions, row_mode)
    }

    /// Simple random walk on an undirected weighted graph: `m(x) = deg(x)`,
    /// `p(x, y) = w(x, y) / deg(x)`. Each undirected edge is listed once.
    pub fn from_undirected_edges(n: usize, edges: &[(usize, usize, f64)]) -> Result<Self> {
        let mut deg = vec![0.0; n];
        for &(u, v, w) in edges {
            if u >= n || v >= n {
                return Err(Error::InvalidChain(format!("edge ({u}, {v}) out of range")));
            }
            deg[u] += w;
            if u != v {
                deg[v] += w;
            }
        }
        let mut t = Vec::with_capacity(2 * edges.len());
        for &(u, v, w) in edges {
            t.push((u, v, w / deg[u]));
            if u != v {
                t.push((v, u, w / deg[v]));
            }
        }
        Self::unlabeled(deg, t, RowMode::Stochastic)
    }

    pub fn len(&self) -> usize {
        self.measure.len()
    }

    pub fn is_empty(&self) -> bool {
        self.measure.is_empty()
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn measure(&self) -> &[f64] {
        &self.measure
    }

    pub fn row_mode(&self) -> RowMode {
        self.row_mode
    }

    pub fn kernel(&self) -> &CsrMatrix {
        &self.kernel
    }

    pub fn prob(&self, i: usize, j: usize) -> f64 {
        self.kernel.get(i, j)
    }

    /// Stored transitions `(i, j, p)` in row-major order.
    pub fn transitions(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.len()).flat_map(move |i| self.kernel.row(i).map(move |(j, p)| (i, j, p)))
    }

    /// `m / m(X)`.
    pub fn normalized_measure(&self) -> Vec<f64> {
        let total: f64 = self.measure.iter().sum();
        self.measure.iter().map(|m| m / total).collect()
    }

    /// Same kernel with the measure multiplied by `c > 0`.
    pub fn with_scaled_measure(&self, c: f64) -> Result<Self> {
        let mut out = self.clone();
        if !(c.is_finite() && c > 0.0) {
            return Err(Error::InvalidArgument(format!("scale {c} must be positive")));
        }
        out.measure.iter_mut().for_each(|m| *m *= c);
        Ok(out)
    }

    /// Max over state pairs of `|m(i) p_ij - m(j) p_ji|`.
    pub fn check_detailed_balance(&self) -> f64 {
        self.transitions()
            .map(|(i, j, p)| (self.measure[i] * p - self.measure[j] * self.prob(j, i)).abs())
            .fold(0.0, f64::max)
    }

    fn reversibility_tol(&self) -> f64 {
        CHAIN_TOL * self.measure.iter().fold(1.0f64, |a, &b| a.max(b))
    }

    pub fn is_reversible(&self) -> bool {
        self.check_detailed_balance() <= self.reversibility_tol()
    }

    fn check_dim(&self, f: &[f64]) -> Result<()> {
        if f.len() != self.len() {
            return Err(Error::DimensionMismatch {
                expected: self.len(),
                got: f.len(),
            });
        }
        Ok(())
    }

    /// `(M f)(i) = sum_j p_ij f(j)`.
    pub fn apply_markov(&self, f: &[f64]) -> Result<Vec<f64>> {
        self.check_dim(f)?;
        Ok((0..self.len())
            .map(|i| self.kernel.row(i).map(|(j, p)| p * f[j]).sum())
            .collect())
    }

    /// `<f, g>_m` with the chain's (unnormalized) measure.
    pub fn inner(&self, f: &[f64], g: &[f64]) -> Result<f64> {
        self.check_dim(f)?;
        self.check_dim(g)?;
        Ok(f.iter()
            .zip(g)
            .zip(&self.measure)
            .map(|((a, b), m)| a * b * m)
            .sum())
    }

    /// `1/2 sum_{x,y} |f(y) - f(x)|^2 m(x) p(x, y)`.
    pub fn dirichlet_form(&self, f: &[f64]) -> Result<f64> {
        self.check_dim(f)?;
        Ok(0.5
            * self
                .transitions()
                .map(|(x, y, p)| (f[y] - f[x]).powi(2) * self.measure[x] * p)
                .sum::<f64>())
    }

    /// `<(I - M) f, f>_m`.
    pub fn laplacian_form(&self, f: &[f64]) -> Result<f64> {
        let mf = self.apply_markov(f)?;
        let diff: Vec<f64> = f.iter().zip(&mf).map(|(a, b)| a - b).collect();
        self.inner(&diff, f)
    }

    /// `D^{1/2} P D^{-1/2}`, symmetrized entrywise so that it is exactly
    /// symmetric for reversible chains.
    pub fn symmetrized(&self) -> CsrMatrix {
        let m = &self.measure;
        let mut t = Vec::with_capacity(2 * self.kernel.nnz());
        for (i, j, p) in self.transitions() {
            let v = 0.5 * m[i] * p / (m[i] * m[j]).sqrt();
            t.push((i, j, v));
            t.push((j, i, v));
        }
        CsrMatrix::from_triplets(self.len(), t)
    }

    /// Unit vector `sqrt(m) / ||sqrt(m)||`, the image of the constants.
    fn constant_direction(&self) -> Vec<f64> {
        let v: Vec<f64> = self.measure.iter().map(|m| m.sqrt()).collect();
        let n = linalg::norm(&v);
        v.into_iter().map(|x| x / n).collect()
    }

    /// Errors naming a disconnected pair when the transition graph is not
    /// connected.
    pub fn check_connected(&self) -> Result<()> {
        let n = self.len();
        let mut seen = vec![false; n];
        let mut queue = VecDeque::from([0usize]);
        seen[0] = true;
        while let Some(x) = queue.pop_front() {
            for (y, _) in self.kernel.row(x) {
                if !seen[y] {
                    seen[y] = true;
                    queue.push_back(y);
                }
            }
        }
        match seen.iter().position(|s| !s) {
            Some(to) => Err(Error::Disconnected { from: 0, to }),
            None => Ok(()),
        }
    }

    /// All eigenvalues of `M` in descending order (dense; reversible chains only).
    pub fn spectrum(&self) -> Result<Vec<f64>> {
        self.require_reversible()?;
        let (mut vals, _) = dense_symmetric_eigen(self.symmetrized().to_dense());
        vals.reverse();
        Ok(vals)
    }

    fn require_reversible(&self) -> Result<()> {
        let violation = self.check_detailed_balance();
        if violation > self.reversibility_tol() {
            return Err(Error::NotReversible { violation });
        }
        Ok(())
    }

    fn require_spectral_preconditions(&self) -> Result<()> {
        if self.row_mode != RowMode::Stochastic {
            return Err(Error::InvalidChain(
                "spectral gap solvers need a stochastic chain".into(),
            ));
        }
        if self.len() < 2 {
            return Err(Error::InvalidChain(
                "a single state has no nonconstant functions".into(),
            ));
        }
        self.require_reversible()?;
        self.check_connected()
    }
}

#[derive(Serialize, Deserialize)]
struct ChainWire {
    states: Vec<String>,
    measure: Vec<f64>,
    transitions: Vec<(usize, usize, f64)>,
    row_mode: RowMode,
}

impl From<WeightedChain> for ChainWire {
    fn from(c: WeightedChain) -> Self {
        let transitions = c.transitions().collect();
        ChainWire {
            states: c.labels,
            measure: c.measure,
            transitions,
            row_mode: c.row_mode,
        }
    }
}

impl TryFrom<ChainWire> for WeightedChain {
    type Error = Error;

    fn try_from(w: ChainWire) -> Result<Self> {
        WeightedChain::new(w.states, w.measure, w.transitions, w.row_mode)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolverMethod {
    Dense,
    PowerDeflated,
    Lanczos,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Quantity {
    /// Bottom of the Laplacian spectrum on functions orthogonal to constants.
    Lambda1,
    /// Norm of the Markov operator on functions orthogonal to constants.
    NormL20,
}

/// Eigenvalue or norm estimate with convergence diagnostics.
///
/// `certified_lower` is a rigorous lower bound for `NormL20` reports (the
/// absolute Rayleigh quotient of a unit vector orthogonal to constants). For
/// `Lambda1` reports it is `estimate - residual`, the lower end of the
/// interval guaranteed to contain an eigenvalue.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SpectralReport {
    pub quantity: Quantity,
    pub estimate: f64,
    pub certified_lower: f64,
    pub iterations: usize,
    pub residual: f64,
    pub method: SolverMethod,
    pub converged: bool,
}

#[derive(Clone, Copy, Debug)]
pub struct SolverOptions {
    /// `None`: dense up to `dense_limit` states, Lanczos beyond.
    pub method: Option<SolverMethod>,
    pub dense_limit: usize,
    pub iter: IterOptions,
    /// Salt for the deterministic start vector of iterative solvers.
    pub start_salt: u64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            method: None,
            dense_limit: 512,
            iter: IterOptions::default(),
            start_salt: 0,
        }
    }
}

/// Both spectral quantities plus the eigenvector attaining `lambda1`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct GapSummary {
    pub lambda1: SpectralReport,
    pub norm: SpectralReport,
    /// Eigenfunction of `lambda1` in the `m`-weighted coordinates, unit norm
    /// in `l^2(m)`.
    pub eigenfunction: Vec<f64>,
}

struct Extreme {
    value: f64,
    vector: Vec<f64>,
    residual: f64,
    iterations: usize,
    converged: bool,
}

fn finish_report(quantity: Quantity, method: SolverMethod, ext: &Extreme, s: &CsrMatrix, v0: &[f64]) -> SpectralReport {
    let estimate = match quantity {
        Quantity::Lambda1 => 1.0 - ext.value,
        Quantity::NormL20 => ext.value.abs(),
    };
    let certified_lower = match quantity {
        Quantity::Lambda1 => (estimate - ext.residual).max(0.0),
        Quantity::NormL20 => {
            let mut u = ext.vector.clone();
            let c = linalg::dot(&u, v0);
            u.iter_mut().zip(v0).for_each(|(a, b)| *a -= c * b);
            let nu = linalg::norm(&u);
            let mut su = vec![0.0; u.len()];
            linalg::LinearOp::apply(s, &u, &mut su);
            (linalg::dot(&su, &u) / (nu * nu)).abs()
        }
    };
    SpectralReport {
        quantity,
        estimate,
        certified_lower,
        iterations: ext.iterations,
        residual: ext.residual,
        method,
        converged: ext.converged,
    }
}

fn dense_extremes(s: &CsrMatrix, v0: &[f64]) -> (Extreme, Extreme) {
    let n = s.n();
    let dense: DMatrix<f64> = s.to_dense();
    let (vals, vecs) = dense_symmetric_eigen(dense.clone());
    let overlap = |k: usize| -> f64 { (0..n).map(|i| vecs[(i, k)] * v0[i]).sum::<f64>().abs() };
    let trivial = (0..n)
        .max_by(|&a, &b| overlap(a).total_cmp(&overlap(b)))
        .expect("n >= 2");
    let rest: Vec<usize> = (0..n).filter(|&k| k != trivial).collect();
    let make = |k: usize| {
        let v: Vec<f64> = vecs.column(k).iter().copied().collect();
        let sv = &dense * nalgebra::DVector::from_column_slice(&v);
        let residual = sv
            .iter()
            .zip(&v)
            .map(|(a, b)| (a - vals[k] * b).powi(2))
            .sum::<f64>()
            .sqrt();
        Extreme {
            value: vals[k],
            vector: v,
            residual,
            iterations: 1,
            converged: true,
        }
    };
    // vals ascending
    let top = *rest.last().expect("n >= 2");
    let bottom = rest[0];
    (make(top), make(bottom))
}

fn iterative_extreme(
    s: &CsrMatrix,
    v0: &[f64],
    which: Which,
    method: SolverMethod,
    opts: &SolverOptions,
) -> Result<Extreme> {
    let start = linalg::scrambled_vector(s.n(), opts.start_salt ^ (which as u64 + 11));
    let deflate = [v0.to_vec()];
    let r = match method {
        SolverMethod::Lanczos => lanczos_extreme(s, &start, &deflate, which, &opts.iter)?,
        SolverMethod::PowerDeflated => power_extreme(s, &start, &deflate, which, 1.0, &opts.iter)?,
        SolverMethod::Dense => unreachable!("dense handled separately"),
    };
    Ok(Extreme {
        value: r.value,
        vector: r.vector,
        residual: r.residual,
        iterations: r.matvecs,
        converged: r.converged,
    })
}

fn pick_method(chain: &WeightedChain, opts: &SolverOptions) -> SolverMethod {
    opts.method.unwrap_or(if chain.len() <= opts.dense_limit {
        SolverMethod::Dense
    } else {
        SolverMethod::Lanczos
    })
}

/// `lambda1` and the `l^2_0` norm from one solve.
pub fn gap_summary(chain: &WeightedChain, opts: &SolverOptions) -> Result<GapSummary> {
    chain.require_spectral_preconditions()?;
    let s = chain.symmetrized();
    let v0 = chain.constant_direction();
    let method = pick_method(chain, opts);
    let (top, bottom) = match method {
        SolverMethod::Dense => dense_extremes(&s, &v0),
        m => (
            iterative_extreme(&s, &v0, Which::Largest, m, opts)?,
            iterative_extreme(&s, &v0, Which::Smallest, m, opts)?,
        ),
    };
    let lambda1 = finish_report(Quantity::Lambda1, method, &top, &s, &v0);
    let norm_src = if top.value.abs() >= bottom.value.abs() {
        &top
    } else {
        &bottom
    };
    let mut norm = finish_report(Quantity::NormL20, method, norm_src, &s, &v0);
    norm.iterations = top.iterations + bottom.iterations;
    norm.converged = top.converged && bottom.converged;
    let eigenfunction = top
        .vector
        .iter()
        .zip(chain.measure())
        .map(|(u, m)| u / m.sqrt())
        .collect();
    Ok(GapSummary {
        lambda1,
        norm,
        eigenfunction,
    })
}

/// Smallest nonzero eigenvalue of `I - M` on `l^2_0(m)`.
pub fn lambda1(chain: &WeightedChain) -> Result<SpectralReport> {
    lambda1_with(chain, &SolverOptions::default())
}

pub fn lambda1_with(chain: &WeightedChain, opts: &SolverOptions) -> Result<SpectralReport> {
    chain.require_spectral_preconditions()?;
    let method = pick_method(chain, opts);
    if method == SolverMethod::Dense {
        return Ok(gap_summary(chain, opts)?.lambda1);
    }
    let s = chain.symmetrized();
    let v0 = chain.constant_direction();
    let top = iterative_extreme(&s, &v0, Which::Largest, method, opts)?;
    Ok(finish_report(Quantity::Lambda1, method, &top, &s, &v0))
}

/// `max |eigenvalue|` of `M` on `l^2_0(m)`.
pub fn operator_norm_l20(chain: &WeightedChain) -> Result<SpectralReport> {
    Ok(gap_summary(chain, &SolverOptions::default())?.norm)
}

pub fn operator_norm_l20_with(chain: &WeightedChain, opts: &SolverOptions) -> Result<SpectralReport> {
    Ok(gap_summary(chain, opts)?.norm)
}
