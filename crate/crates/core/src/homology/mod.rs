//! Persistence diagrams over GF(2).
//!
//! [`h0`] runs union-find over the edges; [`reduce`] is the column
//! reduction with clearing for every dimension; [`oracle::oracle_reduce`]
//! is a slow rank-based cross-check used by the tests.
//!
//! Features still alive at the end of the filtration are reported with
//! death [`ESSENTIAL_DEATH`] in every dimension. Pairs with equal birth and
//! death are kept.

pub mod oracle;

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::filtration::FilteredComplex;

pub use oracle::{oracle_reduce, ORACLE_MAX_SIMPLICES};

pub const ESSENTIAL_DEATH: f64 = 1.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PersistenceDiagram {
    pub dim: usize,
    pub points: Vec<(f64, f64)>,
}

impl PersistenceDiagram {
    pub fn new(dim: usize, points: Vec<(f64, f64)>) -> Self {
        PersistenceDiagram { dim, points }
    }

    pub fn empty(dim: usize) -> Self {
        Self::new(dim, Vec::new())
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Points in a canonical order, for multiset comparison.
    pub fn sorted_points(&self) -> Vec<(f64, f64)> {
        let mut p = self.points.clone();
        p.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
        p
    }

    /// Exact multiset equality of the points (dimension must match too).
    pub fn same_multiset(&self, other: &Self) -> bool {
        self.dim == other.dim && self.sorted_points() == other.sorted_points()
    }
}

struct UnionFind {
    parent: Vec<usize>,
}

impl UnionFind {
    fn new(n: usize) -> Self {
        UnionFind { parent: (0..n).collect() }
    }

    fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }
}

/// Dimension-0 diagram by union-find over edges in filtration order.
///
/// Every vertex is born at 0, so the elder rule only matters for which
/// root survives; the component holding the smallest vertex index wins,
/// which keeps each root equal to its component's minimum vertex.
pub fn h0(fc: &FilteredComplex) -> PersistenceDiagram {
    let n = fc.num_vertices();
    let mut uf = UnionFind::new(n);
    let mut points = Vec::with_capacity(n);
    for s in fc.simplices().iter().filter(|s| s.dim() == 1) {
        let v = s.vertices();
        let (a, b) = (uf.find(v[0] as usize), uf.find(v[1] as usize));
        if a != b {
            let (keep, merge) = if a < b { (a, b) } else { (b, a) };
            uf.parent[merge] = keep;
            points.push((0.0, s.value));
        }
    }
    let components = (0..n).filter(|&v| uf.find(v) == v).count();
    points.extend(std::iter::repeat_n((0.0, ESSENTIAL_DEATH), components));
    PersistenceDiagram::new(0, points)
}

/// XOR of two sorted index lists.
fn add_column(target: &mut Vec<usize>, source: &[usize], scratch: &mut Vec<usize>) {
    scratch.clear();
    let (mut i, mut j) = (0, 0);
    while i < target.len() && j < source.len() {
        match target[i].cmp(&source[j]) {
            std::cmp::Ordering::Less => {
                scratch.push(target[i]);
                i += 1;
            }
            std::cmp::Ordering::Greater => {
                scratch.push(source[j]);
                j += 1;
            }
            std::cmp::Ordering::Equal => {
                i += 1;
                j += 1;
            }
        }
    }
    scratch.extend_from_slice(&target[i..]);
    scratch.extend_from_slice(&source[j..]);
    std::mem::swap(target, scratch);
}

/// Persistence diagrams for dimensions `0..=max_dim`.
///
/// Standard left-to-right column reduction, processed from the highest
/// dimension down so that columns already known to be zero (the pivots of
/// higher-dimensional columns) are skipped.
pub fn reduce(fc: &FilteredComplex, max_dim: usize) -> Result<Vec<PersistenceDiagram>> {
    let simplices = fc.simplices();
    let m = simplices.len();
    let mut columns = fc.boundary_columns()?;
    // pivot_owner[row] = column whose lowest entry is `row`
    let mut pivot_owner: Vec<Option<usize>> = vec![None; m];
    let mut cleared = vec![false; m];
    let mut scratch = Vec::new();

    let top = simplices.iter().map(|s| s.dim()).max().unwrap_or(0).min(max_dim + 1);
    for dim in (1..=top).rev() {
        for j in 0..m {
            if simplices[j].dim() != dim || cleared[j] {
                continue;
            }
            while let Some(&low) = columns[j].last() {
                match pivot_owner[low] {
                    Some(k) => {
                        let (left, right) = columns.split_at_mut(j);
                        add_column(&mut right[0], &left[k], &mut scratch);
                    }
                    None => {
                        pivot_owner[low] = Some(j);
                        cleared[low] = true;
                        break;
                    }
                }
            }
        }
    }

    let mut diagrams: Vec<PersistenceDiagram> = (0..=max_dim).map(PersistenceDiagram::empty).collect();
    for (i, s) in simplices.iter().enumerate() {
        let q = s.dim();
        if q > max_dim {
            continue;
        }
        // negative simplices kill a class of dimension q - 1
        let positive = cleared[i] || q == 0 || columns[i].is_empty();
        if !positive {
            continue;
        }
        let death = match pivot_owner[i] {
            Some(j) => simplices[j].value,
            None => ESSENTIAL_DEATH,
        };
        diagrams[q].points.push((s.value, death));
    }
    Ok(diagrams)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::filtration::{directed, multidim, ordinary};
    use crate::graph::{DirectedWeightedGraph, UndirectedWeightedGraph};

    fn triangle_graph() -> UndirectedWeightedGraph {
        UndirectedWeightedGraph::from_fn(3, |i, j| match (i, j) {
            (0, 1) => 0.2,
            (0, 2) => 0.5,
            _ => 0.9,
        })
    }

    #[test]
    fn h0_three_vertices() {
        let d = h0(&ordinary(&triangle_graph()));
        assert_eq!(d.sorted_points(), vec![(0.0, 0.2), (0.0, 0.5), (0.0, 1.0)]);
    }

    #[test]
    fn h0_two_vertices() {
        let g = UndirectedWeightedGraph::from_fn(2, |_, _| 0.3);
        assert_eq!(h0(&ordinary(&g)).sorted_points(), vec![(0.0, 0.3), (0.0, 1.0)]);
    }

    #[test]
    fn h0_equal_weights() {
        let n = 6;
        let g = UndirectedWeightedGraph::from_fn(n, |_, _| 0.4);
        let d = h0(&ordinary(&g));
        let mut expected = vec![(0.0, 0.4); n - 1];
        expected.push((0.0, 1.0));
        assert_eq!(d.sorted_points(), expected);
    }

    #[test]
    fn ordinary_cycle_never_dies() {
        let dgms = reduce(&ordinary(&triangle_graph()), 1).unwrap();
        assert_eq!(dgms[1].points, vec![(0.9, 1.0)]);
        assert!(dgms[0].same_multiset(&h0(&ordinary(&triangle_graph()))));
    }

    #[test]
    fn multidim_triangle_is_born_and_killed_together() {
        let dgms = reduce(&multidim(&triangle_graph()), 2).unwrap();
        assert_eq!(dgms[1].points, vec![(0.9, 0.9)]);
        assert!(dgms[2].is_empty());
    }

    #[test]
    fn ordinary_h1_count_is_cycle_rank() {
        for n in 2..=9 {
            let g = UndirectedWeightedGraph::from_fn(n, |i, j| ((i * 13 + j * 5) % 17) as f64 / 17.0);
            let dgms = reduce(&ordinary(&g), 1).unwrap();
            assert_eq!(dgms[0].len(), n);
            assert_eq!(dgms[1].len(), n * (n - 1) / 2 - (n - 1));
        }
    }

    #[test]
    fn directed_equal_values_have_no_lasting_cycles() {
        let d = DirectedWeightedGraph::from_fn(3, |_, _| 0.5);
        let dgms = reduce(&directed(&d), 2).unwrap();
        assert!(dgms[1].points.iter().all(|&(b, d)| b == d));
        assert_eq!(dgms[0].len(), 3);
    }

    #[test]
    fn column_xor() {
        let mut a = vec![1, 3, 5];
        let mut s = Vec::new();
        add_column(&mut a, &[3, 4], &mut s);
        assert_eq!(a, vec![1, 4, 5]);
    }
}
