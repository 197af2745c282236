use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::group::{FreeWord, GroupElement};

use super::graph::{Generator, LabeledGraph, VertexLabel, STUB};

/// Largest vertex count a tree ball may reach.
pub const MAX_TREE_VERTICES: u64 = 5_000_000;

/// Vertices in the ball of radius `depth` of the `d`-regular tree.
pub fn tree_ball_size(d: u32, depth: u32) -> Option<u64> {
    let mut total = 1u64;
    let mut sphere = d as u64;
    for _ in 0..depth {
        total = total.checked_add(sphere)?;
        sphere = sphere.checked_mul(d as u64 - 1)?;
    }
    Some(total)
}

/// Ball of radius `depth` in the `d`-regular tree, rooted at vertex 0.
///
/// Even `d` uses the free group on `d/2` generators, odd `d` the free product
/// of `d` copies of `Z/2`. Letters of the words are generator indices (signed
/// for the free case). Edges leaving the ball are stubs.
pub fn build_tree(d: u32, depth: u32) -> Result<LabeledGraph> {
    if d < 2 {
        return Err(Error::InvalidArgument(format!("tree degree must be >= 2, got {d}")));
    }
    match tree_ball_size(d, depth) {
        Some(n) if n <= MAX_TREE_VERTICES => {}
        _ => {
            return Err(Error::BudgetExceeded(format!(
                "tree ball of degree {d} and depth {depth} exceeds {MAX_TREE_VERTICES} vertices"
            )))
        }
    }
    let involutions = d % 2 == 1;
    let (letters, generators): (Vec<i32>, Vec<Generator>) = if involutions {
        (1..=d as i32)
            .map(|l| {
                let g = Generator {
                    name: format!("s{l}"),
                    element: None,
                    inverse: (l - 1) as usize,
                };
                (l, g)
            })
            .unzip()
    } else {
        let rank = d / 2;
        FreeWord::symmetric_generators(rank)
            .into_iter()
            .enumerate()
            .map(|(i, w)| {
                let l = w.letters()[0];
                let name = if l > 0 { format!("a{l}") } else { format!("a{}^-1", -l) };
                let g = Generator {
                    name,
                    element: Some(GroupElement::Free(w)),
                    inverse: i ^ 1,
                };
                (l, g)
            })
            .unzip()
    };
    let inverse_letter = |l: i32| if involutions { l } else { -l };
    let k = generators.len();

    let mut words: Vec<Vec<i32>> = vec![Vec::new()];
    let mut parent: Vec<u32> = vec![STUB];
    let mut action: Vec<u32> = Vec::new();
    let mut v = 0;
    while v < words.len() {
        let word = words[v].clone();
        for &l in &letters {
            if word.last() == Some(&inverse_letter(l)) {
                action.push(parent[v]);
            } else if word.len() < depth as usize {
                let child = words.len() as u32;
                let mut w = word.clone();
                w.push(l);
                words.push(w);
                parent.push(v as u32);
                action.push(child);
            } else {
                action.push(STUB);
            }
        }
        v += 1;
    }
    debug_assert_eq!(action.len(), words.len() * k);
    let labels = words.into_iter().map(VertexLabel::Word).collect();
    LabeledGraph::from_parts(labels, generators, action, 0)
}

/// Index of every vertex by its word, for lookups in tests and tooling.
pub fn word_index(graph: &LabeledGraph) -> HashMap<Vec<i32>, usize> {
    graph
        .labels()
        .iter()
        .enumerate()
        .filter_map(|(i, l)| match l {
            VertexLabel::Word(w) => Some((w.clone(), i)),
            _ => None,
        })
        .collect()
}
