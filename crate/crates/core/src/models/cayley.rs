use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::group::{sl_order, GroupElement, MatModP};

use super::graph::{Generator, LabeledGraph, VertexLabel};

/// Default cap on enumerated group elements (2^20).
pub const DEFAULT_GROUP_BUDGET: usize = 1 << 20;

/// `SL_dim(Z/pZ)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FiniteMatrixGroup {
    pub p: u64,
    pub dim: usize,
}

impl FiniteMatrixGroup {
    pub fn order(&self) -> Option<u64> {
        sl_order(self.p, self.dim)
    }

    /// `E_ij^{+1}, E_ij^{-1}` for all `i != j`, inverses adjacent.
    pub fn elementary_generators(&self) -> Result<Vec<MatModP>> {
        let mut out = Vec::new();
        for i in 0..self.dim {
            for j in 0..self.dim {
                if i != j {
                    out.push(MatModP::elementary(self.p, self.dim, i, j, 1)?);
                    out.push(MatModP::elementary(self.p, self.dim, i, j, -1)?);
                }
            }
        }
        Ok(out)
    }
}

fn matrix_name(m: &MatModP) -> String {
    let rows: Vec<String> = m
        .rows()
        .iter()
        .map(|r| r.iter().map(ToString::to_string).collect::<Vec<_>>().join(" "))
        .collect();
    format!("[{}]", rows.join(";"))
}

/// Right Cayley graph `x -> x s` of the subgroup generated by `generators`,
/// enumerated by BFS from the identity. The generator list must be closed
/// under inverses.
pub fn build_cayley(
    group: FiniteMatrixGroup,
    generators: &[MatModP],
    budget: usize,
) -> Result<LabeledGraph> {
    let identity = MatModP::identity(group.p, group.dim)?;
    if generators.is_empty() {
        return Err(Error::InvalidArgument("empty generator set".into()));
    }
    for g in generators {
        if g.kind() != identity.kind() {
            return Err(Error::KindMismatch {
                left: format!("{:?}", identity.kind()),
                right: format!("{:?}", g.kind()),
            });
        }
    }
    // Pair every generator with an inverse; repeated generators are allowed
    // and paired among themselves.
    let k = generators.len();
    let mut inverse: Vec<Option<usize>> = vec![None; k];
    for i in 0..k {
        if inverse[i].is_some() {
            continue;
        }
        let inv = generators[i].inverse();
        if inv == generators[i] {
            inverse[i] = Some(i);
            continue;
        }
        let j = (i + 1..k)
            .find(|&j| inverse[j].is_none() && generators[j] == inv)
            .ok_or_else(|| {
                Error::InvalidArgument(format!(
                    "generator set is not closed under inverses: {} missing",
                    matrix_name(&inv)
                ))
            })?;
        inverse[i] = Some(j);
        inverse[j] = Some(i);
    }
    let gens: Vec<Generator> = generators
        .iter()
        .zip(inverse)
        .map(|(g, inv)| Generator {
            name: matrix_name(g),
            element: Some(GroupElement::ModP(g.clone())),
            inverse: inv.expect("every generator is paired"),
        })
        .collect();
    let key = |m: &MatModP| {
        m.key()
            .ok_or_else(|| Error::BudgetExceeded("matrix key does not fit in 64 bits".into()))
    };

    // elements are stored by key and decoded when their row is filled
    let mut index: HashMap<u64, u32> = HashMap::new();
    let mut keys = vec![key(&identity)?];
    index.insert(keys[0], 0);
    let mut action: Vec<u32> = Vec::new();
    let mut v = 0;
    while v < keys.len() {
        let x = MatModP::from_key(group.p, group.dim, keys[v]);
        for s in generators {
            let k = key(&x.mul(s)?)?;
            let next = keys.len() as u32;
            let t = *index.entry(k).or_insert(next);
            if t == next {
                if keys.len() >= budget {
                    return Err(Error::BudgetExceeded(format!(
                        "generated group exceeds {budget} elements"
                    )));
                }
                keys.push(k);
            }
            action.push(t);
        }
        v += 1;
    }
    let labels = keys
        .into_iter()
        .map(|k| VertexLabel::Matrix(MatModP::from_key(group.p, group.dim, k).entries().to_vec()))
        .collect();
    LabeledGraph::from_parts(labels, gens, action, 0)
}
