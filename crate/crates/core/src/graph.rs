//! Attention matrix → weighted complete graph.
//!
//! Undirected graphs combine the two directed scores of a token pair with a
//! [`SymmetryFunction`] and store `1 − f(a_ij, a_ji)`, so strongly attending
//! pairs get small weights and enter a filtration early. Self-loops are
//! dropped in both graph kinds.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SymmetryFunction {
    Max,
    Min,
    Mean,
    Mult,
}

impl SymmetryFunction {
    pub const ALL: [SymmetryFunction; 4] = [
        SymmetryFunction::Max,
        SymmetryFunction::Min,
        SymmetryFunction::Mean,
        SymmetryFunction::Mult,
    ];

    pub fn apply(self, a: f64, b: f64) -> f64 {
        match self {
            SymmetryFunction::Max => a.max(b),
            SymmetryFunction::Min => a.min(b),
            SymmetryFunction::Mean => 0.5 * (a + b),
            SymmetryFunction::Mult => a * b,
        }
    }
}

impl fmt::Display for SymmetryFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SymmetryFunction::Max => "max",
            SymmetryFunction::Min => "min",
            SymmetryFunction::Mean => "mean",
            SymmetryFunction::Mult => "mult",
        })
    }
}

impl FromStr for SymmetryFunction {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "max" => Ok(SymmetryFunction::Max),
            "min" => Ok(SymmetryFunction::Min),
            "mean" => Ok(SymmetryFunction::Mean),
            "mult" => Ok(SymmetryFunction::Mult),
            _ => Err(Error::invalid(format!("unknown symmetry function {s:?}"))),
        }
    }
}

/// How a directed edge value is derived from the attention score.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EdgeTransform {
    /// `1 − a_ij`: strong attention enters the filtration early.
    #[default]
    OneMinus,
    Identity,
}

impl FromStr for EdgeTransform {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "one_minus" | "one-minus" => Ok(EdgeTransform::OneMinus),
            "identity" => Ok(EdgeTransform::Identity),
            _ => Err(Error::invalid(format!("unknown directed edge transform {s:?}"))),
        }
    }
}

impl fmt::Display for EdgeTransform {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            EdgeTransform::OneMinus => "one_minus",
            EdgeTransform::Identity => "identity",
        })
    }
}

/// Complete undirected graph; weights for `i < j` stored in a dense matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct UndirectedWeightedGraph {
    n: usize,
    weights: Vec<f64>,
}

impl UndirectedWeightedGraph {
    /// Builds a graph from an explicit symmetric weight function on pairs.
    pub fn from_fn(n: usize, mut weight: impl FnMut(usize, usize) -> f64) -> Self {
        let mut weights = vec![0.0; n * n];
        for i in 0..n {
            for j in i + 1..n {
                let w = weight(i, j);
                weights[i * n + j] = w;
                weights[j * n + i] = w;
            }
        }
        UndirectedWeightedGraph { n, weights }
    }

    pub fn num_vertices(&self) -> usize {
        self.n
    }

    pub fn weight(&self, i: usize, j: usize) -> f64 {
        self.weights[i * self.n + j]
    }

    /// Edges `(i, j, w)` with `i < j`, lexicographic.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.n).flat_map(move |i| (i + 1..self.n).map(move |j| (i, j, self.weight(i, j))))
    }

    pub fn scaled(&self, c: f64) -> Self {
        UndirectedWeightedGraph {
            n: self.n,
            weights: self.weights.iter().map(|w| w * c).collect(),
        }
    }
}

/// Complete digraph without self-loops.
#[derive(Debug, Clone, PartialEq)]
pub struct DirectedWeightedGraph {
    n: usize,
    values: Vec<f64>,
}

impl DirectedWeightedGraph {
    pub fn from_fn(n: usize, mut value: impl FnMut(usize, usize) -> f64) -> Self {
        let mut values = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    values[i * n + j] = value(i, j);
                }
            }
        }
        DirectedWeightedGraph { n, values }
    }

    pub fn num_vertices(&self) -> usize {
        self.n
    }

    /// Value of the edge `i → j`.
    pub fn value(&self, i: usize, j: usize) -> f64 {
        debug_assert_ne!(i, j);
        self.values[i * self.n + j]
    }

    pub fn scaled(&self, c: f64) -> Self {
        DirectedWeightedGraph {
            n: self.n,
            values: self.values.iter().map(|w| w * c).collect(),
        }
    }
}

fn check_square(attn: &[f32], n: usize) -> Result<()> {
    if attn.len() != n * n {
        return Err(Error::Shape {
            expected: format!("{n}×{n} matrix"),
            got: format!("{} values", attn.len()),
        });
    }
    if n < 2 {
        return Err(Error::invalid(format!("attention graph needs at least 2 tokens, got {n}")));
    }
    Ok(())
}

/// `weight(i, j) = 1 − f(attn[i][j], attn[j][i])`.
pub fn to_undirected(attn: &[f32], n: usize, f: SymmetryFunction) -> Result<UndirectedWeightedGraph> {
    check_square(attn, n)?;
    Ok(UndirectedWeightedGraph::from_fn(n, |i, j| {
        1.0 - f.apply(attn[i * n + j] as f64, attn[j * n + i] as f64)
    }))
}

pub fn to_directed(attn: &[f32], n: usize, transform: EdgeTransform) -> Result<DirectedWeightedGraph> {
    check_square(attn, n)?;
    Ok(DirectedWeightedGraph::from_fn(n, |i, j| {
        let a = attn[i * n + j] as f64;
        match transform {
            EdgeTransform::OneMinus => 1.0 - a,
            EdgeTransform::Identity => a,
        }
    }))
}
