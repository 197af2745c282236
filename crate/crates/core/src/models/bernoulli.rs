use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::group::{FreeWord, GroupElement};

use super::graph::{Generator, LabeledGraph, VertexLabel, STUB};

/// Orbit of the finite configuration `config` under left translation by the
/// free group of rank `rank`, up to `radius` steps from the configuration.
/// Configurations are kept as sorted sets of reduced words.
pub fn build_bernoulli_schreier(
    rank: u32,
    config: &[FreeWord],
    radius: u32,
) -> Result<LabeledGraph> {
    if config.is_empty() {
        return Err(Error::InvalidArgument(
            "empty configuration (trivial character) is not allowed".into(),
        ));
    }
    if let Some(w) = config.iter().find(|w| w.rank() != rank) {
        return Err(Error::InvalidArgument(format!(
            "configuration word {w} has rank {}, expected {rank}",
            w.rank()
        )));
    }
    let mut start: Vec<FreeWord> = config.to_vec();
    start.sort();
    start.dedup();

    let letters = FreeWord::symmetric_generators(rank);
    let generators: Vec<Generator> = letters
        .iter()
        .enumerate()
        .map(|(i, w)| Generator {
            name: w.to_string(),
            element: Some(GroupElement::Free(w.clone())),
            inverse: i ^ 1,
        })
        .collect();

    let mut index: HashMap<Vec<FreeWord>, u32> = HashMap::new();
    let mut configs = vec![start.clone()];
    let mut depth = vec![0u32];
    index.insert(start, 0);
    let mut action = Vec::new();
    let mut v = 0;
    while v < configs.len() {
        let c = configs[v].clone();
        for s in &letters {
            let mut img = c.iter().map(|w| s.mul(w)).collect::<Result<Vec<_>>>()?;
            img.sort();
            if let Some(&t) = index.get(&img) {
                action.push(t);
            } else if depth[v] < radius {
                let t = configs.len() as u32;
                index.insert(img.clone(), t);
                configs.push(img);
                depth.push(depth[v] + 1);
                action.push(t);
            } else {
                action.push(STUB);
            }
        }
        v += 1;
    }
    let labels = configs
        .into_iter()
        .map(|c| VertexLabel::Config(c.into_iter().map(|w| w.letters().to_vec()).collect()))
        .collect();
    LabeledGraph::from_parts(labels, generators, action, 0)
}
