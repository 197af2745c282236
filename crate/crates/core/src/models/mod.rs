//! Random-walk models: regular trees, the PGL2 half-line chain, Cayley graphs
//! of finite matrix groups, and Schreier graphs of torus and Bernoulli actions.

mod bernoulli;
mod cayley;
mod graph;
mod pgl2;
mod torus;
mod tree;

pub use bernoulli::build_bernoulli_schreier;
pub use cayley::{build_cayley, FiniteMatrixGroup, DEFAULT_GROUP_BUDGET};
pub use graph::{Generator, LabeledGraph, VertexLabel};
pub use pgl2::{
    build_pgl2_halfline, is_prime_power, pgl2_cheeger_bound, HalfLineSpec, TruncationMode,
};
pub use torus::build_torus_schreier;
pub use tree::{build_tree, tree_ball_size, word_index, MAX_TREE_VERTICES};
