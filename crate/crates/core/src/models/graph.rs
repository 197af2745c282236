use std::collections::VecDeque;
use std::fmt;
use std::fmt::Write as _;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::group::{GroupElement, ProbMeasure};
use crate::markov::{RowMode, WeightedChain};

/// Marks a generator whose image falls outside the generated portion.
pub(crate) const STUB: u32 = u32::MAX;

/// Canonical name of a vertex: the orbit representative it stands for.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum VertexLabel {
    /// Reduced word (tree vertices).
    Word(Vec<i32>),
    /// Matrix entries, row-major (Cayley graphs of matrix groups).
    Matrix(Vec<u64>),
    /// Integer vector (dual torus action).
    Vector(Vec<i64>),
    /// Finite configuration, as a sorted list of reduced words.
    Config(Vec<Vec<i32>>),
}

impl fmt::Display for VertexLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fn join<T: fmt::Display>(xs: &[T], sep: &str) -> String {
            xs.iter().map(ToString::to_string).collect::<Vec<_>>().join(sep)
        }
        match self {
            VertexLabel::Word(w) if w.is_empty() => write!(f, "e"),
            VertexLabel::Word(w) => write!(f, "{}", join(w, ".")),
            VertexLabel::Matrix(m) => write!(f, "[{}]", join(m, ",")),
            VertexLabel::Vector(v) => write!(f, "({})", join(v, ",")),
            VertexLabel::Config(c) => {
                let words: Vec<String> = c
                    .iter()
                    .map(|w| if w.is_empty() { "e".into() } else { join(w, ".") })
                    .collect();
                write!(f, "{{{}}}", words.join(";"))
            }
        }
    }
}

#[derive(Clone, Debug)]
pub struct Generator {
    pub name: String,
    /// Group element acting, when the generator comes from a supported group.
    pub element: Option<GroupElement>,
    /// Index of the inverse generator.
    pub inverse: usize,
}

/// Schreier (or Cayley) graph with one labeled outgoing edge per generator at
/// every vertex. Edges that leave the generated portion are kept as stubs and
/// never enter compressions or chains.
#[derive(Clone, Debug)]
pub struct LabeledGraph {
    labels: Vec<VertexLabel>,
    generators: Vec<Generator>,
    action: Vec<u32>,
    basepoint: usize,
}

impl LabeledGraph {
    pub(crate) fn from_parts(
        labels: Vec<VertexLabel>,
        generators: Vec<Generator>,
        action: Vec<u32>,
        basepoint: usize,
    ) -> Result<Self> {
        let g = LabeledGraph {
            labels,
            generators,
            action,
            basepoint,
        };
        g.check_invariants()?;
        Ok(g)
    }

    pub fn n_vertices(&self) -> usize {
        self.labels.len()
    }

    pub fn n_generators(&self) -> usize {
        self.generators.len()
    }

    pub fn generators(&self) -> &[Generator] {
        &self.generators
    }

    pub fn labels(&self) -> &[VertexLabel] {
        &self.labels
    }

    pub fn label(&self, v: usize) -> &VertexLabel {
        &self.labels[v]
    }

    pub fn basepoint(&self) -> usize {
        self.basepoint
    }

    /// Image of `v` under generator `g`, `None` for a stub.
    pub fn target(&self, v: usize, g: usize) -> Option<usize> {
        let t = self.action[v * self.generators.len() + g];
        (t != STUB).then_some(t as usize)
    }

    /// Non-stub edges `(from, to, generator)`.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize, usize)> + '_ {
        let k = self.generators.len();
        (0..self.n_vertices())
            .flat_map(move |v| (0..k).filter_map(move |g| self.target(v, g).map(|t| (v, t, g))))
    }

    pub fn stub_count(&self) -> usize {
        self.action.iter().filter(|&&t| t == STUB).count()
    }

    /// Number of non-stub outgoing edges.
    pub fn degree(&self, v: usize) -> usize {
        (0..self.generators.len())
            .filter(|&g| self.target(v, g).is_some())
            .count()
    }

    /// Totality up to stubs and presence of the inverse edge for every edge.
    pub fn check_invariants(&self) -> Result<()> {
        let (n, k) = (self.n_vertices(), self.generators.len());
        if self.action.len() != n * k {
            return Err(Error::InvalidGraph(format!(
                "action table has {} entries, expected {}",
                self.action.len(),
                n * k
            )));
        }
        if self.basepoint >= n {
            return Err(Error::InvalidGraph(format!(
                "basepoint {} missing from {n} vertices",
                self.basepoint
            )));
        }
        for (g, gen) in self.generators.iter().enumerate() {
            if gen.inverse >= k || self.generators[gen.inverse].inverse != g {
                return Err(Error::InvalidGraph(format!(
                    "generator {} has no consistent inverse",
                    gen.name
                )));
            }
        }
        for (u, v, g) in self.edges() {
            if v >= n {
                return Err(Error::InvalidGraph(format!("edge {u}->{v} leaves the vertex set")));
            }
            if self.target(v, self.generators[g].inverse) != Some(u) {
                return Err(Error::InvalidGraph(format!(
                    "edge {u}->{v} ({}) has no inverse edge",
                    self.generators[g].name
                )));
            }
        }
        Ok(())
    }

    /// BFS distances from the basepoint over non-stub edges.
    pub fn distances(&self) -> Vec<Option<usize>> {
        let mut dist = vec![None; self.n_vertices()];
        dist[self.basepoint] = Some(0);
        let mut queue = VecDeque::from([self.basepoint]);
        while let Some(v) = queue.pop_front() {
            let d = dist[v].expect("queued vertices have a distance");
            for g in 0..self.generators.len() {
                if let Some(t) = self.target(v, g) {
                    if dist[t].is_none() {
                        dist[t] = Some(d + 1);
                        queue.push_back(t);
                    }
                }
            }
        }
        dist
    }

    /// Per-generator weights of `mu`; every atom must be one of the generators.
    pub fn generator_weights(&self, mu: &ProbMeasure) -> Result<Vec<f64>> {
        let mut w = vec![0.0; self.generators.len()];
        for (g, weight) in mu.iter() {
            let idx = self
                .generators
                .iter()
                .position(|gen| gen.element.as_ref() == Some(g))
                .ok_or_else(|| {
                    Error::InvalidArgument(format!("measure atom {g} is not a graph generator"))
                })?;
            w[idx] += weight;
        }
        Ok(w)
    }

    /// One `"u v label"` line per non-stub edge.
    pub fn to_edge_list(&self) -> String {
        let mut out = String::new();
        for (u, v, g) in self.edges() {
            let _ = writeln!(out, "{u} {v} {}", self.generators[g].name);
        }
        out
    }

    /// Simple random walk: `m(x) = deg(x)`, `p(x, y) = #edges(x -> y) / deg(x)`.
    pub fn simple_walk_chain(&self) -> Result<WeightedChain> {
        let n = self.n_vertices();
        let mut measure = Vec::with_capacity(n);
        let mut transitions = Vec::new();
        for v in 0..n {
            let deg = self.degree(v);
            if deg == 0 {
                return Err(Error::InvalidGraph(format!("vertex {v} has no edges")));
            }
            measure.push(deg as f64);
            for g in 0..self.generators.len() {
                if let Some(t) = self.target(v, g) {
                    transitions.push((v, t, 1.0 / deg as f64));
                }
            }
        }
        let labels = self.labels.iter().map(ToString::to_string).collect();
        WeightedChain::new(labels, measure, transitions, RowMode::Stochastic)
    }
}
