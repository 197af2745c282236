//! Expander families from the Cayley graphs of `SL_n(Z/pZ)` with the
//! elementary generators, and their spectral certificates.

use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cheeger::{cheeger_exact, MAX_EXACT_STATES};
use crate::error::{Error, Result};
use crate::markov::{gap_summary, SolverOptions};
use crate::models::{build_cayley, FiniteMatrixGroup, LabeledGraph, DEFAULT_GROUP_BUDGET};

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MemberRecord {
    pub p: u64,
    pub order: u64,
    /// Number of generators `k` (edges counted with multiplicity).
    pub degree: usize,
    pub lambda1: f64,
    /// Norm of the Markov operator on functions orthogonal to constants.
    pub norm: f64,
    /// `(1 - norm)^2 / 2`.
    pub lemma_bound: f64,
    /// `k lambda1 / 4 <= h~`, from `lambda1 <= 2h` and `h <= 2h~/k`.
    pub h_edge_lower: f64,
    /// `h~ <= k sqrt(8 lambda1)`, from `h^2/8 <= lambda1` and `h~/k <= h`.
    pub h_edge_upper: f64,
    /// Exact Cheeger constant, for orders up to the enumeration limit.
    pub h_exact: Option<f64>,
    /// Exact edge expansion `min_{|S| <= |X|/2} |E(S, S^c)| / |S|`.
    pub h_edge_exact: Option<f64>,
    pub converged: bool,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct FamilyCertificate {
    pub n: usize,
    pub members: Vec<MemberRecord>,
    pub family_inf_lambda1: f64,
}

impl FamilyCertificate {
    pub fn from_members(n: usize, members: Vec<MemberRecord>) -> Self {
        let family_inf_lambda1 = members.iter().map(|m| m.lambda1).fold(f64::INFINITY, f64::min);
        FamilyCertificate {
            n,
            members,
            family_inf_lambda1,
        }
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("p,order,degree,lambda1,norm,lemma_bound\n");
        for m in &self.members {
            let _ = writeln!(
                out,
                "{},{},{},{:.12},{:.12},{:.12}",
                m.p, m.order, m.degree, m.lambda1, m.norm, m.lemma_bound
            );
        }
        out
    }
}

/// Exact `min |E(S, S^c)| / |S|` over nonempty `S` with `|S| <= |X|/2`,
/// edges counted with multiplicity.
pub fn edge_expansion_exact(graph: &LabeledGraph) -> Result<f64> {
    let n = graph.n_vertices();
    if n > MAX_EXACT_STATES {
        return Err(Error::BudgetExceeded(format!(
            "exact edge expansion is limited to {MAX_EXACT_STATES} vertices (got {n})"
        )));
    }
    if n < 2 {
        return Err(Error::InvalidGraph("edge expansion needs two vertices".into()));
    }
    let edges: Vec<(usize, usize)> = graph.edges().map(|(u, v, _)| (u, v)).collect();
    let mut best = f64::INFINITY;
    for mask in 1u32..(1u32 << n) - 1 {
        let size = mask.count_ones() as usize;
        if 2 * size > n {
            continue;
        }
        let cut = edges
            .iter()
            .filter(|&&(u, v)| mask >> u & 1 == 1 && mask >> v & 1 == 0)
            .count();
        best = best.min(cut as f64 / size as f64);
    }
    Ok(best)
}

fn member(n: usize, p: u64, budget: usize) -> Result<MemberRecord> {
    let group = FiniteMatrixGroup { p, dim: n };
    let order = group
        .order()
        .ok_or_else(|| Error::BudgetExceeded(format!("order of SL_{n}(F_{p}) overflows")))?;
    if order > budget as u64 {
        return Err(Error::BudgetExceeded(format!(
            "SL_{n}(F_{p}) has {order} elements, above the budget of {budget}"
        )));
    }
    let gens = group.elementary_generators()?;
    let graph = build_cayley(group, &gens, budget)?;
    let chain = graph.simple_walk_chain()?;
    let g = gap_summary(&chain, &SolverOptions::default())?;
    let (lambda1, norm) = (g.lambda1.estimate, g.norm.estimate);
    let k = gens.len() as f64;
    let (h_exact, h_edge_exact) = if graph.n_vertices() <= MAX_EXACT_STATES {
        (Some(cheeger_exact(&chain)?.h), Some(edge_expansion_exact(&graph)?))
    } else {
        (None, None)
    };
    Ok(MemberRecord {
        p,
        order,
        degree: gens.len(),
        lambda1,
        norm,
        lemma_bound: 0.5 * (1.0 - norm).powi(2),
        h_edge_lower: k * lambda1 / 4.0,
        h_edge_upper: k * (8.0 * lambda1).sqrt(),
        h_exact,
        h_edge_exact,
        converged: g.lambda1.converged && g.norm.converged,
    })
}

/// Builds and certifies `SL_n(Z/pZ)` for every prime, in parallel; records
/// keep the order of `primes`.
pub fn build_family(n: usize, primes: &[u64]) -> Result<FamilyCertificate> {
    build_family_with_budget(n, primes, DEFAULT_GROUP_BUDGET)
}

pub fn build_family_with_budget(n: usize, primes: &[u64], budget: usize) -> Result<FamilyCertificate> {
    if !(n == 2 || n == 3) {
        return Err(Error::InvalidArgument(format!("n must be 2 or 3, got {n}")));
    }
    if primes.is_empty() {
        return Err(Error::InvalidArgument("no primes given".into()));
    }
    let members = primes
        .par_iter()
        .map(|&p| member(n, p, budget))
        .collect::<Result<Vec<_>>>()?;
    Ok(FamilyCertificate::from_members(n, members))
}

/// `inf lambda1 / 2` over the members, a lower bound for every Cheeger
/// constant in the family.
pub fn expanding_constant_report(cert: &FamilyCertificate) -> Result<f64> {
    if cert.members.is_empty() {
        return Err(Error::InvalidArgument("empty family".into()));
    }
    Ok(cert.members.iter().map(|m| m.lambda1).fold(f64::INFINITY, f64::min) / 2.0)
}
