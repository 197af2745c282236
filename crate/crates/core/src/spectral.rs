//! Compressions of infinite averaging operators, the tensor-power norm
//! inequality on finite-dimensional representations, and the expander
//! eigenvalue bound.

use std::fmt::Write as _;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::group::{ProbMeasure, WEIGHT_TOL};
use crate::linalg::{
    dense_spectral_norm, dense_symmetric_eigen, lanczos_extreme, CsrMatrix, IterOptions,
    NormalOp, Which,
};
use crate::markov::{gap_summary, SolverMethod, SolverOptions, WeightedChain};
use crate::models::LabeledGraph;

/// Compressions up to this many vertices are solved densely.
pub const DENSE_COMPRESSION_LIMIT: usize = 512;

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct NormEstimate {
    /// Norm of the compression; a Rayleigh-quotient value, hence a lower
    /// bound for the full operator norm even when not converged.
    pub norm: f64,
    pub vertices: usize,
    pub residual: f64,
    pub matvecs: usize,
    pub method: SolverMethod,
    pub converged: bool,
}

/// Norm of `pi(mu)` compressed to the vertices within `radius` of the
/// basepoint: the matrix `A[x][y] = sum of mu(s) over edges x -s-> y`.
pub fn compressed_norm(graph: &LabeledGraph, mu: &ProbMeasure, radius: usize) -> Result<NormEstimate> {
    compressed_norm_weighted(graph, &graph.generator_weights(mu)?, Some(radius))
}

/// Norm of `pi(mu)` compressed to every generated vertex; stubs are dropped.
pub fn compressed_norm_full(graph: &LabeledGraph, mu: &ProbMeasure) -> Result<NormEstimate> {
    compressed_norm_weighted(graph, &graph.generator_weights(mu)?, None)
}

/// Compression with explicit per-generator weights, to the ball of the given
/// radius or (with `None`) to the whole generated graph.
pub fn compressed_norm_weighted(
    graph: &LabeledGraph,
    weights: &[f64],
    radius: Option<usize>,
) -> Result<NormEstimate> {
    if weights.len() != graph.n_generators() {
        return Err(Error::DimensionMismatch {
            expected: graph.n_generators(),
            got: weights.len(),
        });
    }
    let keep: Vec<bool> = match radius {
        None => vec![true; graph.n_vertices()],
        Some(radius) => {
            let dist = graph.distances();
            // every vertex at distance < radius must have all its neighbours built
            for (v, d) in dist.iter().enumerate() {
                if let Some(d) = *d {
                    if d < radius && graph.degree(v) < graph.n_generators() {
                        return Err(Error::InvalidArgument(format!(
                            "radius {radius} exceeds the generated graph (vertex {v} at distance {d} has stubs)"
                        )));
                    }
                }
            }
            dist.iter().map(|d| matches!(d, Some(d) if *d <= radius)).collect()
        }
    };
    let mut local = vec![usize::MAX; graph.n_vertices()];
    let mut n = 0;
    for (v, &k) in keep.iter().enumerate() {
        if k {
            local[v] = n;
            n += 1;
        }
    }
    let mut triplets = Vec::new();
    for (u, v, g) in graph.edges() {
        if keep[u] && keep[v] && weights[g] > 0.0 {
            triplets.push((local[u], local[v], weights[g]));
        }
    }
    sparse_norm(&CsrMatrix::from_triplets(n, triplets))
}

/// Largest singular value of a nonnegative sparse matrix.
pub fn sparse_norm(a: &CsrMatrix) -> Result<NormEstimate> {
    let n = a.n();
    let symmetric = a.is_symmetric(1e-15);
    if n <= DENSE_COMPRESSION_LIMIT {
        let dense = a.to_dense();
        let norm = if symmetric {
            let (vals, _) = dense_symmetric_eigen(dense);
            vals.iter().fold(0.0f64, |m, v| m.max(v.abs()))
        } else {
            dense_spectral_norm(&dense)
        };
        return Ok(NormEstimate {
            norm,
            vertices: n,
            residual: 0.0,
            matvecs: 0,
            method: SolverMethod::Dense,
            converged: true,
        });
    }
    // the Perron vector is positive, so a positive start overlaps it
    let start = vec![1.0; n];
    let opts = IterOptions::default();
    if symmetric {
        let r = lanczos_extreme(a, &start, &[], Which::Largest, &opts)?;
        Ok(NormEstimate {
            norm: r.value,
            vertices: n,
            residual: r.residual,
            matvecs: r.matvecs,
            method: SolverMethod::Lanczos,
            converged: r.converged,
        })
    } else {
        let at = a.transpose();
        let op = NormalOp { a, at: &at };
        let r = lanczos_extreme(&op, &start, &[], Which::Largest, &opts)?;
        Ok(NormEstimate {
            norm: r.value.max(0.0).sqrt(),
            vertices: n,
            residual: r.residual,
            matvecs: 2 * r.matvecs,
            method: SolverMethod::Lanczos,
            converged: r.converged,
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LimitClaim {
    pub value: f64,
    pub tag: String,
}

/// Compressed norms along increasing truncation radii.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CompressionLadder {
    pub radii: Vec<usize>,
    pub norms: Vec<f64>,
    pub limit_claim: Option<LimitClaim>,
}

impl CompressionLadder {
    /// Evaluates `norm_at` on every radius in parallel; results stay in
    /// radius order.
    pub fn evaluate<F>(radii: &[usize], norm_at: F, limit_claim: Option<LimitClaim>) -> Result<Self>
    where
        F: Fn(usize) -> Result<f64> + Sync,
    {
        if radii.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidArgument("radii must be strictly increasing".into()));
        }
        let norms = radii
            .par_iter()
            .map(|&r| norm_at(r))
            .collect::<Result<Vec<f64>>>()?;
        Ok(CompressionLadder {
            radii: radii.to_vec(),
            norms,
            limit_claim,
        })
    }

    /// Largest norm along the ladder.
    pub fn supremum(&self) -> f64 {
        self.norms.iter().copied().fold(0.0, f64::max)
    }

    /// Non-decreasing norms (to 1e-12) and, with a claim, `norm <= claim + 1e-9`.
    pub fn check(&self) -> Result<()> {
        for (w, r) in self.norms.windows(2).zip(self.radii.windows(2)) {
            if w[1] < w[0] - 1e-12 {
                return Err(Error::InvalidArgument(format!(
                    "compressed norm decreased from {} (radius {}) to {} (radius {})",
                    w[0], r[0], w[1], r[1]
                )));
            }
        }
        if let Some(claim) = &self.limit_claim {
            if let Some((r, n)) = self
                .radii
                .iter()
                .zip(&self.norms)
                .find(|(_, &n)| n > claim.value + 1e-9)
            {
                return Err(Error::InvalidArgument(format!(
                    "compressed norm {n} at radius {r} exceeds the limit {} ({})",
                    claim.value, claim.tag
                )));
            }
        }
        Ok(())
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("radius,norm\n");
        for (r, n) in self.radii.iter().zip(&self.norms) {
            let _ = writeln!(out, "{r},{n:.12}");
        }
        out
    }
}

/// Rayleigh quotient `<Mf, f> / |f|^2` of the radial vector
/// `f(v) = (lambda / sqrt(d-1))^|v|` on the `d`-regular tree truncated at
/// `depth`, with `M` the simple random walk operator.
pub fn radial_rayleigh(d: u32, lambda: f64, depth: u32) -> Result<f64> {
    if d < 3 {
        return Err(Error::InvalidArgument(format!("degree must be >= 3, got {d}")));
    }
    if !(lambda > 0.0 && lambda < 1.0) {
        return Err(Error::InvalidArgument(format!("lambda must lie in (0, 1), got {lambda}")));
    }
    if depth < 1 {
        return Err(Error::InvalidArgument("depth must be >= 1".into()));
    }
    let df = d as f64;
    let rho = lambda / (df - 1.0).sqrt();
    // sphere m contributes w_m = |S_m| f_m^2 to |f|^2 and w_m (Mf)_m / f_m to <Mf, f>
    let mut w = 1.0;
    let mut ff = 0.0;
    let mut mff = 0.0;
    for m in 0..=depth {
        let ratio = if m == 0 {
            rho
        } else if m < depth {
            (1.0 / rho + (df - 1.0) * rho) / df
        } else {
            1.0 / (rho * df)
        };
        ff += w;
        mff += w * ratio;
        w *= if m == 0 { df * rho * rho } else { (df - 1.0) * rho * rho };
    }
    Ok(mff / ff)
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct TensorPowerCheck {
    /// `|| sum mu(g) U_g ||`.
    pub lhs: f64,
    /// `|| sum mu(g) (U_g (x) conj U_g)^{(x)k} ||^{1/2k}`.
    pub rhs: f64,
}

/// Largest `dim^(2k)` accepted by [`tensor_power_check`].
pub const TENSOR_SIZE_LIMIT: usize = 4096;

/// Compares the norm of the averaged representation with the `1/2k` power
/// of the norm of its `k`-th tensor power of `pi (x) conj(pi)`. `weights[i]`
/// is the probability of the group element represented by `rep[i]`.
pub fn tensor_power_check(rep: &[DMatrix<Complex64>], weights: &[f64], k: u32) -> Result<TensorPowerCheck> {
    if rep.is_empty() || rep.len() != weights.len() {
        return Err(Error::DimensionMismatch {
            expected: rep.len(),
            got: weights.len(),
        });
    }
    if k < 1 {
        return Err(Error::InvalidArgument("k must be >= 1".into()));
    }
    if weights.iter().any(|&w| !(w > 0.0)) || (weights.iter().sum::<f64>() - 1.0).abs() > WEIGHT_TOL {
        return Err(Error::InvalidMeasure("weights must be positive and sum to 1".into()));
    }
    let dim = rep[0].nrows();
    for u in rep {
        if u.nrows() != dim || u.ncols() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                got: u.nrows().max(u.ncols()),
            });
        }
        let defect = (u.adjoint() * u - DMatrix::<Complex64>::identity(dim, dim)).camax();
        if defect > 1e-10 {
            return Err(Error::InvalidArgument(format!(
                "matrix is not unitary (|U*U - I| = {defect:.3e})"
            )));
        }
    }
    let size = (dim as u128).checked_pow(2 * k);
    if !matches!(size, Some(s) if s <= TENSOR_SIZE_LIMIT as u128) {
        return Err(Error::BudgetExceeded(format!(
            "tensor power of dimension {dim}^{} exceeds {TENSOR_SIZE_LIMIT}",
            2 * k
        )));
    }

    let mut avg = DMatrix::<Complex64>::zeros(dim, dim);
    let n = dim.pow(2 * k);
    let mut big = DMatrix::<Complex64>::zeros(n, n);
    for (u, &w) in rep.iter().zip(weights) {
        avg += u * Complex64::new(w, 0.0);
        let v = u.kronecker(&u.map(|z| z.conj()));
        let mut t = v.clone();
        for _ in 1..k {
            t = t.kronecker(&v);
        }
        big += t * Complex64::new(w, 0.0);
    }
    Ok(TensorPowerCheck {
        lhs: complex_norm(&avg),
        rhs: complex_norm(&big).powf(1.0 / (2.0 * k as f64)),
    })
}

fn complex_norm(m: &DMatrix<Complex64>) -> f64 {
    if m.nrows() <= 1024 {
        return m
            .clone()
            .singular_values()
            .iter()
            .fold(0.0f64, |a, &b| a.max(b));
    }
    // power iteration on M*M for the largest tensor powers
    let n = m.nrows();
    let mh = m.adjoint();
    let mut v = DVector::<Complex64>::from_element(n, Complex64::new(1.0 / (n as f64).sqrt(), 0.0));
    let mut sigma2 = 0.0;
    for _ in 0..20_000 {
        let w = &mh * (m * &v);
        let next = w.norm();
        if next == 0.0 {
            return 0.0;
        }
        v = w / Complex64::new(next, 0.0);
        if (next - sigma2).abs() <= 1e-15 * next {
            sigma2 = next;
            break;
        }
        sigma2 = next;
    }
    sigma2.sqrt()
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct ExpanderBound {
    pub lambda1: f64,
    pub norm: f64,
    /// `(1 - norm)^2 / 2`.
    pub bound: f64,
}

/// `lambda1` of a connected reversible chain against `(1 - ||M||_{l2_0})^2 / 2`.
pub fn expander_bound_check(chain: &WeightedChain) -> Result<ExpanderBound> {
    let g = gap_summary(chain, &SolverOptions::default())?;
    let norm = g.norm.estimate;
    Ok(ExpanderBound {
        lambda1: g.lambda1.estimate,
        norm,
        bound: 0.5 * (1.0 - norm).powi(2),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::group::FreeWord;
    use crate::models::{build_cayley, build_tree, FiniteMatrixGroup, DEFAULT_GROUP_BUDGET};

    // Radial reduction of the symmetric walk on the d-regular tree ball:
    // orthonormal radial basis gives a tridiagonal matrix with
    // off-diagonals sqrt(d-1)/d (sqrt(d)/d at the root).
    fn radial_tridiagonal_norm(d: f64, depth: usize) -> f64 {
        let n = depth + 1;
        let mut t = DMatrix::<f64>::zeros(n, n);
        for m in 0..depth {
            let off = if m == 0 { d.sqrt() / d } else { (d - 1.0).sqrt() / d };
            t[(m, m + 1)] = off;
            t[(m + 1, m)] = off;
        }
        dense_spectral_norm(&t)
    }

    #[test]
    fn tree_compression_matches_radial_reduction() {
        let mu = ProbMeasure::free_symmetric(2);
        let g = build_tree(4, 6).unwrap();
        for r in 0..=6 {
            let est = compressed_norm(&g, &mu, r).unwrap();
            let oracle = radial_tridiagonal_norm(4.0, r);
            assert!((est.norm - oracle).abs() < 1e-9, "r={r}: {} vs {oracle}", est.norm);
        }
        assert!(compressed_norm(&g, &mu, 7).is_err());
    }

    #[test]
    fn large_tree_compression_uses_lanczos() {
        let mu = ProbMeasure::free_symmetric(2);
        let g = build_tree(4, 8).unwrap();
        let est = compressed_norm(&g, &mu, 8).unwrap();
        assert_eq!(est.method, SolverMethod::Lanczos);
        assert!(est.converged);
        assert!((est.norm - radial_tridiagonal_norm(4.0, 8)).abs() < 1e-9);
    }

    #[test]
    fn line_graph_compression() {
        let mu = ProbMeasure::free_symmetric(1);
        let g = build_tree(2, 100).unwrap();
        let est = compressed_norm(&g, &mu, 100).unwrap();
        // path on 201 vertices with weights 1/2
        let oracle = (std::f64::consts::PI / 202.0).cos();
        assert!((est.norm - oracle).abs() < 1e-9);
        assert!(est.norm >= 0.999);
    }

    #[test]
    fn radius_zero_is_loop_weight() {
        let mu = ProbMeasure::free_symmetric(2);
        let g = build_tree(4, 3).unwrap();
        assert_eq!(compressed_norm(&g, &mu, 0).unwrap().norm, 0.0);
        let a = FreeWord::generator(2, 1).unwrap();
        let nonsym = ProbMeasure::uniform([a.into()]).unwrap();
        // non-symmetric atoms still compress; the single-edge compression has norm 1
        assert!((compressed_norm(&g, &nonsym, 1).unwrap().norm - 1.0).abs() < 1e-12);
    }

    #[test]
    fn radial_rayleigh_closed_form() {
        for d in [3u32, 4, 7] {
            for lambda in [0.1, 0.5, 0.9] {
                let depth = 200;
                let df = d as f64;
                let geo = |x: f64, from: u32, to: u32| -> f64 { (from..=to).map(|m| x.powi(m as i32)).sum() };
                let ff = 1.0 + df / (df - 1.0) * geo(lambda * lambda, 1, depth);
                let mff = 2.0 / (df - 1.0).sqrt() * lambda * geo(lambda * lambda, 0, depth - 1);
                let got = radial_rayleigh(d, lambda, depth).unwrap();
                assert!((got - mff / ff).abs() < 1e-12, "d={d} lambda={lambda}");
            }
        }
    }

    #[test]
    fn radial_rayleigh_matches_explicit_vector() {
        let (d, depth, lambda) = (3u32, 5u32, 0.7);
        let g = build_tree(d, depth).unwrap();
        let dist = g.distances();
        let rho = lambda / (d as f64 - 1.0).sqrt();
        let f: Vec<f64> = dist.iter().map(|x| rho.powi(x.unwrap() as i32)).collect();
        let mut mff = 0.0;
        for (u, v, _) in g.edges() {
            mff += f[u] * f[v] / d as f64;
        }
        let ff: f64 = f.iter().map(|x| x * x).sum();
        assert!((radial_rayleigh(d, lambda, depth).unwrap() - mff / ff).abs() < 1e-12);
    }

    #[test]
    fn radial_rayleigh_limits() {
        let target = |d: f64| 2.0 * (d - 1.0).sqrt() / d;
        assert!(radial_rayleigh(4, 0.999, 2000).unwrap() >= 0.86);
        assert!((radial_rayleigh(3, 0.999, 2000).unwrap() - target(3.0)).abs() < 0.01);
        assert!(radial_rayleigh(4, 1e-9, 1).unwrap() < 1e-8);
        assert!(radial_rayleigh(4, 1.0, 3).is_err());
        assert!(radial_rayleigh(2, 0.5, 3).is_err());
        let mut prev = 0.0;
        for i in 1..100 {
            let q = radial_rayleigh(4, i as f64 / 100.0, 3000).unwrap();
            assert!(q > prev);
            prev = q;
        }
    }

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    #[test]
    fn tensor_trivial_and_sign() {
        let one = DMatrix::from_element(1, 1, c(1.0));
        for k in 1..=3 {
            let t = tensor_power_check(&[one.clone(), one.clone()], &[0.3, 0.7], k).unwrap();
            assert!((t.lhs - 1.0).abs() < 1e-12 && (t.rhs - 1.0).abs() < 1e-12);
        }
        let sign = DMatrix::from_element(1, 1, c(-1.0));
        let t = tensor_power_check(&[sign], &[1.0], 1).unwrap();
        assert!((t.lhs - 1.0).abs() < 1e-12 && (t.rhs - 1.0).abs() < 1e-12);
    }

    #[test]
    fn tensor_rejects_bad_input() {
        let m = DMatrix::from_element(1, 1, c(2.0));
        assert!(tensor_power_check(&[m], &[1.0], 1).is_err());
        let id = DMatrix::<Complex64>::identity(3, 3);
        assert!(matches!(
            tensor_power_check(&[id.clone()], &[1.0], 4),
            Err(Error::BudgetExceeded(_))
        ));
        assert!(tensor_power_check(&[id], &[0.5], 1).is_err());
    }

    #[test]
    fn expander_bound_examples() {
        let c5 = WeightedChain::from_undirected_edges(5, &(0..5).map(|i| (i, (i + 1) % 5, 1.0)).collect::<Vec<_>>()).unwrap();
        let b = expander_bound_check(&c5).unwrap();
        let cos72 = (72f64).to_radians().cos();
        assert!((b.lambda1 - (1.0 - cos72)).abs() < 1e-12);
        assert!((b.norm - cos72.abs().max((144f64).to_radians().cos().abs())).abs() < 1e-12);
        assert!(b.lambda1 >= b.bound);

        let swap = WeightedChain::from_undirected_edges(2, &[(0, 1, 1.0)]).unwrap();
        let b = expander_bound_check(&swap).unwrap();
        assert!((b.lambda1 - 2.0).abs() < 1e-12 && b.bound.abs() < 1e-12);

        let g = FiniteMatrixGroup { p: 3, dim: 2 };
        let cay = build_cayley(g, &g.elementary_generators().unwrap(), DEFAULT_GROUP_BUDGET).unwrap();
        let b = expander_bound_check(&cay.simple_walk_chain().unwrap()).unwrap();
        assert!(b.lambda1 >= b.bound - 1e-9);
    }

    #[test]
    fn ladder_csv_and_checks() {
        let mu = ProbMeasure::free_symmetric(2);
        let g = build_tree(4, 7).unwrap();
        let claim = LimitClaim {
            value: 3f64.sqrt() / 2.0,
            tag: "tree norm".into(),
        };
        let ladder = CompressionLadder::evaluate(
            &[0, 1, 2, 4, 7],
            |r| Ok(compressed_norm(&g, &mu, r)?.norm),
            Some(claim),
        )
        .unwrap();
        ladder.check().unwrap();
        let csv = ladder.to_csv();
        assert!(csv.starts_with("radius,norm\n0,"));
        assert_eq!(csv.lines().count(), 6);
        assert!(CompressionLadder::evaluate(&[2, 1], |_| Ok(0.0), None).is_err());
        let bad = CompressionLadder {
            radii: vec![1, 2],
            norms: vec![0.5, 0.4],
            limit_claim: None,
        };
        assert!(bad.check().is_err());
    }
}
