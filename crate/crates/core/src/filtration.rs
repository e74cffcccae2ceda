//! Filtered simplicial complexes (dimension ≤ 2) built on attention graphs.
//!
//! Simplices are kept in filtration order: ascending value, then dimension,
//! then vertex tuple. With 2-simplices entering at the maximum of their edge
//! values this order always lists faces before cofaces.

use std::cmp::Ordering;
use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{DirectedWeightedGraph, UndirectedWeightedGraph};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FiltrationKind {
    Ordinary,
    MultiDim,
    Directed,
}

impl FiltrationKind {
    pub const ALL: [FiltrationKind; 3] = [
        FiltrationKind::Ordinary,
        FiltrationKind::MultiDim,
        FiltrationKind::Directed,
    ];

    /// Number of homology dimensions (and images) computed per head.
    pub fn num_dims(self) -> usize {
        match self {
            FiltrationKind::Ordinary => 2,
            FiltrationKind::MultiDim | FiltrationKind::Directed => 3,
        }
    }

    pub fn max_dim(self) -> usize {
        self.num_dims() - 1
    }
}

impl fmt::Display for FiltrationKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            FiltrationKind::Ordinary => "ordinary",
            FiltrationKind::MultiDim => "multidim",
            FiltrationKind::Directed => "directed",
        })
    }
}

impl FromStr for FiltrationKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "ordinary" => Ok(FiltrationKind::Ordinary),
            "multidim" => Ok(FiltrationKind::MultiDim),
            "directed" => Ok(FiltrationKind::Directed),
            _ => Err(Error::invalid(format!("unknown filtration {s:?}"))),
        }
    }
}

/// A simplex of dimension 0, 1 or 2 with its filtration value.
///
/// Undirected simplices store sorted vertices. Directed edges store
/// `(source, target)`; directed triangles `(a, b, c)` stand for the
/// transitive triple with edges `a→b`, `b→c`, `a→c`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Simplex {
    vertices: [u32; 3],
    dim: u8,
    pub value: f64,
}

impl Simplex {
    pub fn vertex(v: usize) -> Self {
        Simplex { vertices: [v as u32, 0, 0], dim: 0, value: 0.0 }
    }

    pub fn edge(a: usize, b: usize, value: f64) -> Self {
        Simplex { vertices: [a as u32, b as u32, 0], dim: 1, value }
    }

    pub fn triangle(a: usize, b: usize, c: usize, value: f64) -> Self {
        Simplex { vertices: [a as u32, b as u32, c as u32], dim: 2, value }
    }

    pub fn dim(&self) -> usize {
        self.dim as usize
    }

    pub fn vertices(&self) -> &[u32] {
        &self.vertices[..=self.dim as usize]
    }

    /// Codimension-one faces as vertex tuples. For both undirected and
    /// transitive directed triangles `(a, b, c)` these are `(b, c)`,
    /// `(a, c)`, `(a, b)`.
    pub fn faces(&self) -> Vec<Vec<u32>> {
        let v = self.vertices();
        match self.dim {
            0 => Vec::new(),
            1 => vec![vec![v[1]], vec![v[0]]],
            _ => vec![vec![v[1], v[2]], vec![v[0], v[2]], vec![v[0], v[1]]],
        }
    }

    fn filtration_cmp(&self, other: &Self) -> Ordering {
        self.value
            .total_cmp(&other.value)
            .then(self.dim.cmp(&other.dim))
            .then_with(|| self.vertices().cmp(other.vertices()))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FilteredComplex {
    kind: FiltrationKind,
    num_vertices: usize,
    simplices: Vec<Simplex>,
}

impl FilteredComplex {
    /// Sorts `simplices` into filtration order.
    pub fn from_simplices(kind: FiltrationKind, num_vertices: usize, mut simplices: Vec<Simplex>) -> Self {
        simplices.sort_by(Simplex::filtration_cmp);
        FilteredComplex { kind, num_vertices, simplices }
    }

    pub fn kind(&self) -> FiltrationKind {
        self.kind
    }

    pub fn num_vertices(&self) -> usize {
        self.num_vertices
    }

    pub fn simplices(&self) -> &[Simplex] {
        &self.simplices
    }

    pub fn len(&self) -> usize {
        self.simplices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.simplices.is_empty()
    }

    pub fn count_dim(&self, dim: usize) -> usize {
        self.simplices.iter().filter(|s| s.dim() == dim).count()
    }

    /// Boundary columns as sorted indices into [`Self::simplices`].
    pub fn boundary_columns(&self) -> Result<Vec<Vec<usize>>> {
        let index: HashMap<(u8, [u32; 3]), usize> = self
            .simplices
            .iter()
            .enumerate()
            .map(|(i, s)| ((s.dim, s.vertices), i))
            .collect();
        self.simplices
            .iter()
            .map(|s| {
                let mut col = s
                    .faces()
                    .into_iter()
                    .map(|face| {
                        let mut key = [0u32; 3];
                        key[..face.len()].copy_from_slice(&face);
                        index.get(&((face.len() - 1) as u8, key)).copied().ok_or_else(|| {
                            Error::invalid(format!("face {face:?} of {:?} is missing", s.vertices()))
                        })
                    })
                    .collect::<Result<Vec<_>>>()?;
                col.sort_unstable();
                Ok(col)
            })
            .collect()
    }

    /// Checks that every face is present, precedes its coface and has a
    /// filtration value no larger than it, and that vertices enter at 0.
    pub fn audit(&self) -> Result<()> {
        let columns = self.boundary_columns()?;
        for (i, (s, col)) in self.simplices.iter().zip(&columns).enumerate() {
            if s.dim == 0 && s.value != 0.0 {
                return Err(Error::invalid(format!("vertex {:?} enters at {}", s.vertices(), s.value)));
            }
            for &f in col {
                if f >= i || self.simplices[f].value > s.value {
                    return Err(Error::invalid(format!(
                        "face {:?} does not precede {:?}",
                        self.simplices[f].vertices(),
                        s.vertices()
                    )));
                }
            }
        }
        Ok(())
    }
}

fn vertices(n: usize) -> impl Iterator<Item = Simplex> {
    (0..n).map(Simplex::vertex)
}

/// Vertices at 0 and every edge at its weight.
pub fn ordinary(graph: &UndirectedWeightedGraph) -> FilteredComplex {
    let n = graph.num_vertices();
    let simplices = vertices(n)
        .chain(graph.edges().map(|(i, j, w)| Simplex::edge(i, j, w)))
        .collect();
    FilteredComplex::from_simplices(FiltrationKind::Ordinary, n, simplices)
}

/// [`ordinary`] plus every triangle, entering when its last edge does.
pub fn multidim(graph: &UndirectedWeightedGraph) -> FilteredComplex {
    let n = graph.num_vertices();
    let mut simplices: Vec<Simplex> = vertices(n)
        .chain(graph.edges().map(|(i, j, w)| Simplex::edge(i, j, w)))
        .collect();
    for i in 0..n {
        for j in i + 1..n {
            let wij = graph.weight(i, j);
            for k in j + 1..n {
                let t = wij.max(graph.weight(i, k)).max(graph.weight(j, k));
                simplices.push(Simplex::triangle(i, j, k, t));
            }
        }
    }
    FilteredComplex::from_simplices(FiltrationKind::MultiDim, n, simplices)
}

/// Directed flag complex: both orientations of every pair as separate
/// edges, and every transitively oriented triple `a→b, b→c, a→c` as a
/// triangle entering at the maximum of its three edge values. Cyclic
/// triples never appear.
pub fn directed(graph: &DirectedWeightedGraph) -> FilteredComplex {
    let n = graph.num_vertices();
    let mut simplices: Vec<Simplex> = vertices(n).collect();
    for i in 0..n {
        for j in 0..n {
            if i != j {
                simplices.push(Simplex::edge(i, j, graph.value(i, j)));
            }
        }
    }
    for a in 0..n {
        for b in 0..n {
            if b == a {
                continue;
            }
            let ab = graph.value(a, b);
            for c in 0..n {
                if c == a || c == b {
                    continue;
                }
                let t = ab.max(graph.value(b, c)).max(graph.value(a, c));
                simplices.push(Simplex::triangle(a, b, c, t));
            }
        }
    }
    FilteredComplex::from_simplices(FiltrationKind::Directed, n, simplices)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn triangle_graph() -> UndirectedWeightedGraph {
        UndirectedWeightedGraph::from_fn(3, |i, j| match (i, j) {
            (0, 1) => 0.2,
            (0, 2) => 0.5,
            _ => 0.9,
        })
    }

    fn binom(n: usize, k: usize) -> usize {
        (0..k).fold(1, |acc, i| acc * (n - i) / (i + 1))
    }

    #[test]
    fn ordinary_three_vertices() {
        let fc = ordinary(&triangle_graph());
        let values: Vec<(usize, f64)> = fc.simplices().iter().map(|s| (s.dim(), s.value)).collect();
        assert_eq!(values, vec![(0, 0.0), (0, 0.0), (0, 0.0), (1, 0.2), (1, 0.5), (1, 0.9)]);
        fc.audit().unwrap();
    }

    #[test]
    fn equal_weights_sort_lexicographically() {
        let g = UndirectedWeightedGraph::from_fn(4, |_, _| 0.4);
        let fc = ordinary(&g);
        let edges: Vec<&[u32]> = fc.simplices()[4..].iter().map(|s| s.vertices()).collect();
        assert_eq!(edges, vec![&[0, 1][..], &[0, 2], &[0, 3], &[1, 2], &[1, 3], &[2, 3]]);
    }

    #[test]
    fn two_vertices_single_edge() {
        let g = UndirectedWeightedGraph::from_fn(2, |_, _| 0.3);
        assert_eq!(ordinary(&g).count_dim(1), 1);
    }

    #[test]
    fn multidim_triangle_enters_with_last_edge() {
        let fc = multidim(&triangle_graph());
        let tri: Vec<&Simplex> = fc.simplices().iter().filter(|s| s.dim() == 2).collect();
        assert_eq!(tri.len(), 1);
        assert_eq!(tri[0].value, 0.9);
        assert_eq!(fc.simplices().last().unwrap().dim(), 2);
        fc.audit().unwrap();
    }

    #[test]
    fn multidim_counts_and_equal_weights() {
        let g = UndirectedWeightedGraph::from_fn(4, |_, _| 0.6);
        let fc = multidim(&g);
        assert_eq!(fc.count_dim(2), 4);
        assert!(fc.simplices().iter().filter(|s| s.dim() == 2).all(|s| s.value == 0.6));
    }

    #[test]
    fn ordinary_is_multidim_skeleton() {
        let g = UndirectedWeightedGraph::from_fn(6, |i, j| ((i * 7 + j * 3) % 11) as f64 / 11.0);
        let a = ordinary(&g);
        let b = multidim(&g);
        let skeleton: Vec<Simplex> = b.simplices().iter().filter(|s| s.dim() <= 1).copied().collect();
        assert_eq!(a.simplices(), &skeleton[..]);
    }

    #[test]
    fn directed_all_equal() {
        let d = DirectedWeightedGraph::from_fn(3, |_, _| 0.5);
        let fc = directed(&d);
        assert_eq!(fc.count_dim(1), 6);
        assert_eq!(fc.count_dim(2), 6);
        assert!(fc.simplices().iter().filter(|s| s.dim() == 2).all(|s| s.value == 0.5));
        fc.audit().unwrap();
    }

    #[test]
    fn directed_two_vertices() {
        let d = DirectedWeightedGraph::from_fn(2, |i, _| if i == 0 { 0.1 } else { 0.4 });
        let fc = directed(&d);
        assert_eq!(fc.count_dim(1), 2);
        assert_eq!(fc.count_dim(2), 0);
    }

    #[test]
    fn cyclic_edges_alone_fill_nothing() {
        // 0→1, 1→2, 2→0 arrive at 0.1; the reverse edges only at 0.8.
        let d = DirectedWeightedGraph::from_fn(3, |i, j| if (i + 1) % 3 == j { 0.1 } else { 0.8 });
        let fc = directed(&d);
        assert!(fc.simplices().iter().filter(|s| s.dim() == 2).all(|s| s.value >= 0.8));
    }

    #[test]
    fn counts_for_larger_graphs() {
        for n in 2..=7 {
            let g = UndirectedWeightedGraph::from_fn(n, |i, j| (i + 2 * j) as f64 / 20.0);
            assert_eq!(ordinary(&g).len(), n + binom(n, 2));
            assert_eq!(multidim(&g).len(), n + binom(n, 2) + binom(n, 3));
            let d = DirectedWeightedGraph::from_fn(n, |i, j| (3 * i + j) as f64 / 30.0);
            let fc = directed(&d);
            assert_eq!(fc.count_dim(1), n * (n - 1));
            assert_eq!(fc.count_dim(2), 6 * binom(n, 3));
            fc.audit().unwrap();
        }
    }
}
