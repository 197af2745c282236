use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::group::{GroupElement, MatZ};

use super::graph::{Generator, LabeledGraph, VertexLabel, STUB};

fn matrix_name(m: &MatZ) -> String {
    let rows: Vec<String> = m
        .rows()
        .iter()
        .map(|r| r.iter().map(ToString::to_string).collect::<Vec<_>>().join(" "))
        .collect();
    format!("[{}]", rows.join(";"))
}

/// Orbit of `basepoint` under the dual action `x -> (g^T)^-1 x`, restricted to
/// the sup-norm ball of the given radius. The basepoint is always a vertex.
/// Inverses missing from `generators` are appended, so the resulting
/// generator list is symmetric.
pub fn build_torus_schreier(
    generators: &[MatZ],
    basepoint: &[i64],
    radius: u64,
) -> Result<LabeledGraph> {
    if basepoint.iter().all(|&x| x == 0) {
        return Err(Error::InvalidArgument("basepoint must be nonzero".into()));
    }
    if generators.is_empty() {
        return Err(Error::InvalidArgument("empty generator set".into()));
    }
    let dim = basepoint.len();
    let mut gens: Vec<MatZ> = Vec::new();
    for g in generators {
        if g.dim() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                got: g.dim(),
            });
        }
        if !gens.contains(g) {
            gens.push(g.clone());
        }
    }
    for i in 0..gens.len() {
        let inv = gens[i].inverse();
        if !gens.contains(&inv) {
            gens.push(inv);
        }
    }
    let generators: Vec<Generator> = gens
        .iter()
        .map(|g| {
            let inv = g.inverse();
            Generator {
                name: matrix_name(g),
                element: Some(GroupElement::Int(g.clone())),
                inverse: gens.iter().position(|h| *h == inv).expect("list is symmetric"),
            }
        })
        .collect();
    let dual: Vec<MatZ> = gens.iter().map(|g| g.transpose().inverse()).collect();

    let in_ball = |x: &[i64]| x.iter().all(|c| c.unsigned_abs() <= radius);
    let mut index: HashMap<Vec<i64>, u32> = HashMap::new();
    let mut points = vec![basepoint.to_vec()];
    index.insert(basepoint.to_vec(), 0);
    let mut action = Vec::new();
    let mut v = 0;
    while v < points.len() {
        let x = points[v].clone();
        for d in &dual {
            let y = d.apply(&x)?;
            if let Some(&t) = index.get(&y) {
                action.push(t);
            } else if in_ball(&y) {
                let t = points.len() as u32;
                index.insert(y.clone(), t);
                points.push(y);
                action.push(t);
            } else {
                action.push(STUB);
            }
        }
        v += 1;
    }
    let labels = points.into_iter().map(VertexLabel::Vector).collect();
    LabeledGraph::from_parts(labels, generators, action, 0)
}
