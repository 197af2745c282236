//! Symmetric eigen-solvers shared by the chain and compression code: a
//! CSR matrix, restarted Lanczos with full reorthogonalization, and deflated
//! power iteration. Dense problems go through `nalgebra`.

use nalgebra::{DMatrix, SymmetricEigen};
use rayon::prelude::*;

use crate::error::{Error, Result};

/// Matrix-free linear operator on `R^n`.
pub trait LinearOp: Sync {
    fn dim(&self) -> usize;
    fn apply(&self, x: &[f64], y: &mut [f64]);
}

/// Compressed sparse row matrix.
#[derive(Clone, Debug)]
pub struct CsrMatrix {
    n: usize,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<f64>,
}

const PAR_ROWS: usize = 1 << 15;

impl CsrMatrix {
    /// Builds from `(row, col, value)` triplets; duplicates are summed.
    pub fn from_triplets(n: usize, mut triplets: Vec<(usize, usize, f64)>) -> Self {
        triplets.sort_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));
        let mut row_ptr = vec![0usize; n + 1];
        let mut cols = Vec::with_capacity(triplets.len());
        let mut vals: Vec<f64> = Vec::with_capacity(triplets.len());
        let mut last: Option<(usize, usize)> = None;
        for (r, c, v) in triplets {
            if last == Some((r, c)) {
                *vals.last_mut().expect("nonempty") += v;
                continue;
            }
            row_ptr[r + 1] += 1;
            cols.push(c);
            vals.push(v);
            last = Some((r, c));
        }
        for i in 0..n {
            row_ptr[i + 1] += row_ptr[i];
        }
        CsrMatrix {
            n,
            row_ptr,
            cols,
            vals,
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let (a, b) = (self.row_ptr[i], self.row_ptr[i + 1]);
        self.cols[a..b].iter().copied().zip(self.vals[a..b].iter().copied())
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (a, b) = (self.row_ptr[i], self.row_ptr[i + 1]);
        match self.cols[a..b].binary_search(&j) {
            Ok(k) => self.vals[a + k],
            Err(_) => 0.0,
        }
    }

    pub fn transpose(&self) -> CsrMatrix {
        let triplets = (0..self.n)
            .flat_map(|i| self.row(i).map(move |(j, v)| (j, i, v)))
            .collect();
        CsrMatrix::from_triplets(self.n, triplets)
    }

    pub fn is_symmetric(&self, tol: f64) -> bool {
        (0..self.n).all(|i| self.row(i).all(|(j, v)| (self.get(j, i) - v).abs() <= tol))
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.n, self.n);
        for i in 0..self.n {
            for (j, v) in self.row(i) {
                m[(i, j)] += v;
            }
        }
        m
    }
}

impl LinearOp for CsrMatrix {
    fn dim(&self) -> usize {
        self.n
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        let row = |i: usize| -> f64 { self.row(i).map(|(j, v)| v * x[j]).sum() };
        if self.n >= PAR_ROWS {
            y.par_iter_mut().enumerate().for_each(|(i, yi)| *yi = row(i));
        } else {
            for (i, yi) in y.iter_mut().enumerate() {
                *yi = row(i);
            }
        }
    }
}

/// `A^T A` for a square sparse `A`, applied as two products.
pub struct NormalOp<'a> {
    pub a: &'a CsrMatrix,
    pub at: &'a CsrMatrix,
}

impl LinearOp for NormalOp<'_> {
    fn dim(&self) -> usize {
        self.a.n
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        let mut tmp = vec![0.0; self.a.n];
        self.a.apply(x, &mut tmp);
        self.at.apply(&tmp, y);
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

fn project_out(v: &mut [f64], basis: &[Vec<f64>]) {
    for q in basis {
        let c = dot(v, q);
        axpy(-c, q, v);
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Which {
    Largest,
    Smallest,
}

#[derive(Clone, Copy, Debug)]
pub struct IterOptions {
    /// Stop once `||A v - theta v|| <= tol` for the unit Ritz vector.
    pub tol: f64,
    /// Total matrix-vector products allowed.
    pub max_matvecs: usize,
    /// Cap on Krylov basis size per restart; also limited by `max_basis_floats`.
    pub max_basis: usize,
    pub max_basis_floats: usize,
}

impl Default for IterOptions {
    fn default() -> Self {
        IterOptions {
            tol: 1e-10,
            max_matvecs: 100_000,
            max_basis: 200,
            max_basis_floats: 40_000_000,
        }
    }
}

/// Eigenpair approximation with its true residual.
#[derive(Clone, Debug)]
pub struct RitzPair {
    pub value: f64,
    pub vector: Vec<f64>,
    pub residual: f64,
    pub matvecs: usize,
    pub converged: bool,
}

/// Applies `op` followed by projection onto the orthogonal complement of
/// `deflate` (orthonormal vectors).
fn apply_deflated(op: &dyn LinearOp, deflate: &[Vec<f64>], x: &[f64], y: &mut [f64]) {
    op.apply(x, y);
    project_out(y, deflate);
}

fn residual_of(op: &dyn LinearOp, deflate: &[Vec<f64>], v: &[f64], theta: f64) -> f64 {
    let mut av = vec![0.0; v.len()];
    apply_deflated(op, deflate, v, &mut av);
    axpy(-theta, v, &mut av);
    norm(&av)
}

fn prepare_start(start: &[f64], deflate: &[Vec<f64>]) -> Option<Vec<f64>> {
    let mut v = start.to_vec();
    project_out(&mut v, deflate);
    project_out(&mut v, deflate);
    let nv = norm(&v);
    (nv > 1e-300).then(|| v.iter().map(|x| x / nv).collect())
}

/// Deterministic fallback start vector (no RNG state needed).
pub(crate) fn scrambled_vector(n: usize, salt: u64) -> Vec<f64> {
    let mut state = 0x9E37_79B9_7F4A_7C15u64 ^ salt;
    (0..n)
        .map(|_| {
            state ^= state << 13;
            state ^= state >> 7;
            state ^= state << 17;
            (state >> 11) as f64 / (1u64 << 53) as f64 - 0.5
        })
        .collect()
}

/// Extreme eigenpair of the symmetric operator `op` restricted to the
/// orthogonal complement of `deflate`, by restarted Lanczos with full
/// reorthogonalization.
pub fn lanczos_extreme(
    op: &dyn LinearOp,
    start: &[f64],
    deflate: &[Vec<f64>],
    which: Which,
    opts: &IterOptions,
) -> Result<RitzPair> {
    let n = op.dim();
    if start.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: start.len(),
        });
    }
    let available = n.saturating_sub(deflate.len());
    if available == 0 {
        return Err(Error::InvalidArgument(
            "deflation leaves an empty subspace".into(),
        ));
    }
    let mut v = prepare_start(start, deflate)
        .or_else(|| prepare_start(&scrambled_vector(n, 1), deflate))
        .ok_or_else(|| Error::InvalidArgument("no usable start vector".into()))?;
    let basis_cap = opts
        .max_basis
        .min(available)
        .min((opts.max_basis_floats / n.max(1)).max(4))
        .max(1);

    let mut matvecs = 0usize;
    let mut best: Option<RitzPair> = None;
    let mut w = vec![0.0; n];
    loop {
        let mut q: Vec<Vec<f64>> = vec![v.clone()];
        let mut alpha: Vec<f64> = Vec::new();
        let mut beta: Vec<f64> = Vec::new();
        let mut breakdown = false;
        for j in 0..basis_cap {
            apply_deflated(op, deflate, &q[j], &mut w);
            matvecs += 1;
            if j > 0 {
                axpy(-beta[j - 1], &q[j - 1], &mut w);
            }
            let a = dot(&w, &q[j]);
            alpha.push(a);
            axpy(-a, &q[j], &mut w);
            // two passes of classical Gram-Schmidt against the whole basis
            for _ in 0..2 {
                project_out(&mut w, &q);
                project_out(&mut w, deflate);
            }
            let b = norm(&w);
            let scale = alpha.iter().fold(1e-300f64, |m, x| m.max(x.abs()));
            if b <= 1e-13 * scale || j + 1 == basis_cap || matvecs >= opts.max_matvecs {
                breakdown = b <= 1e-13 * scale;
                break;
            }
            beta.push(b);
            q.push(w.iter().map(|x| x / b).collect());
        }

        let k = alpha.len();
        let mut t = DMatrix::zeros(k, k);
        for i in 0..k {
            t[(i, i)] = alpha[i];
            if i + 1 < k {
                t[(i, i + 1)] = beta[i];
                t[(i + 1, i)] = beta[i];
            }
        }
        let eig = SymmetricEigen::new(t);
        let idx = (0..k)
            .max_by(|&a, &b| {
                let (x, y) = (eig.eigenvalues[a], eig.eigenvalues[b]);
                match which {
                    Which::Largest => x.total_cmp(&y),
                    Which::Smallest => y.total_cmp(&x),
                }
            })
            .expect("k >= 1");
        let theta = eig.eigenvalues[idx];
        let mut y = vec![0.0; n];
        for (i, qi) in q.iter().take(k).enumerate() {
            axpy(eig.eigenvectors[(i, idx)], qi, &mut y);
        }
        project_out(&mut y, deflate);
        let ny = norm(&y);
        y.iter_mut().for_each(|x| *x /= ny);
        let residual = residual_of(op, deflate, &y, theta);
        matvecs += 1;
        let converged = residual <= opts.tol;
        let pair = RitzPair {
            value: theta,
            vector: y,
            residual,
            matvecs,
            converged,
        };
        v = pair.vector.clone();
        if best.as_ref().is_none_or(|b| pair.residual < b.residual || converged) {
            best = Some(pair);
        }
        let current = best.as_ref().expect("set above");
        if current.converged || breakdown || k >= available || matvecs >= opts.max_matvecs {
            let mut out = current.clone();
            out.matvecs = matvecs;
            // an invariant Krylov subspace gives an exact eigenpair
            out.converged = out.converged || breakdown || k >= available;
            return Ok(out);
        }
    }
}

/// Deflated power iteration on `(op + shift I)`; `shift` makes the target
/// eigenvalue dominant in magnitude. Returns the eigenvalue of `op`.
pub fn power_extreme(
    op: &dyn LinearOp,
    start: &[f64],
    deflate: &[Vec<f64>],
    which: Which,
    spectrum_bound: f64,
    opts: &IterOptions,
) -> Result<RitzPair> {
    let n = op.dim();
    let mut v = prepare_start(start, deflate)
        .or_else(|| prepare_start(&scrambled_vector(n, 2), deflate))
        .ok_or_else(|| Error::InvalidArgument("no usable start vector".into()))?;
    // shifted operator B = sign * A + bound I is positive semidefinite and its
    // top eigenvector is the requested extreme of A
    let sign = if which == Which::Largest { 1.0 } else { -1.0 };
    let mut w = vec![0.0; n];
    let mut theta = 0.0;
    let mut residual = f64::INFINITY;
    let mut it = 0usize;
    while it < opts.max_matvecs {
        apply_deflated(op, deflate, &v, &mut w);
        it += 1;
        theta = dot(&w, &v);
        let r: f64 = w
            .iter()
            .zip(&v)
            .map(|(wi, vi)| (wi - theta * vi).powi(2))
            .sum::<f64>()
            .sqrt();
        residual = r;
        if r <= opts.tol {
            break;
        }
        for (wi, vi) in w.iter_mut().zip(&v) {
            *wi = sign * *wi + spectrum_bound * vi;
        }
        project_out(&mut w, deflate);
        let nw = norm(&w);
        if nw == 0.0 {
            break;
        }
        v.iter_mut().zip(&w).for_each(|(vi, wi)| *vi = wi / nw);
    }
    Ok(RitzPair {
        value: theta,
        vector: v,
        residual,
        matvecs: it,
        converged: residual <= opts.tol,
    })
}

/// All eigenvalues (ascending) and eigenvectors of a dense symmetric matrix.
pub fn dense_symmetric_eigen(m: DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let eig = SymmetricEigen::new(m);
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = DMatrix::from_fn(eig.eigenvectors.nrows(), order.len(), |r, c| {
        eig.eigenvectors[(r, order[c])]
    });
    (values, vectors)
}

/// Largest singular value of a dense real matrix.
pub fn dense_spectral_norm(m: &DMatrix<f64>) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    m.clone()
        .singular_values()
        .iter()
        .fold(0.0f64, |a, &b| a.max(b))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn path(n: usize) -> CsrMatrix {
        let mut t = Vec::new();
        for i in 0..n - 1 {
            t.push((i, i + 1, 1.0));
            t.push((i + 1, i, 1.0));
        }
        CsrMatrix::from_triplets(n, t)
    }

    #[test]
    fn csr_merges_duplicates() {
        let m = CsrMatrix::from_triplets(2, vec![(0, 1, 0.5), (0, 1, 0.25), (1, 0, 1.0)]);
        assert_eq!(m.nnz(), 2);
        assert_eq!(m.get(0, 1), 0.75);
        assert!(!m.is_symmetric(1e-12));
        assert_eq!(m.transpose().get(1, 0), 0.75);
    }

    #[test]
    fn lanczos_path_extremes() {
        // path adjacency eigenvalues: 2 cos(pi k / (n + 1))
        let n = 80;
        let a = path(n);
        let start = vec![1.0; n];
        let top = lanczos_extreme(&a, &start, &[], Which::Largest, &IterOptions::default()).unwrap();
        let exact = 2.0 * (std::f64::consts::PI / (n + 1) as f64).cos();
        assert!(top.converged);
        assert!((top.value - exact).abs() < 1e-9);
        let start = scrambled_vector(n, 5);
        let bottom =
            lanczos_extreme(&a, &start, &[], Which::Smallest, &IterOptions::default()).unwrap();
        assert!((bottom.value + exact).abs() < 1e-9);
    }

    #[test]
    fn lanczos_with_deflation_and_restarts() {
        let n = 60;
        let a = path(n);
        let (vals, vecs) = dense_symmetric_eigen(a.to_dense());
        let top_vec: Vec<f64> = vecs.column(n - 1).iter().copied().collect();
        let opts = IterOptions {
            max_basis: 8,
            ..Default::default()
        };
        let second = lanczos_extreme(
            &a,
            &scrambled_vector(n, 9),
            &[top_vec],
            Which::Largest,
            &opts,
        )
        .unwrap();
        assert!(second.converged);
        assert!((second.value - vals[n - 2]).abs() < 1e-9);
    }

    #[test]
    fn power_iteration_agrees() {
        let n = 12;
        let a = path(n);
        let (vals, _) = dense_symmetric_eigen(a.to_dense());
        let r = power_extreme(
            &a,
            &vec![1.0; n],
            &[],
            Which::Largest,
            2.0,
            &IterOptions::default(),
        )
        .unwrap();
        assert!(r.converged);
        assert!((r.value - vals[n - 1]).abs() < 1e-9);
    }

    #[test]
    fn spectral_norm_dense() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 0.0, 1.0]);
        assert!((dense_spectral_norm(&m) - (1.0 + 2f64.sqrt())).abs() < 1e-12);
    }
}
