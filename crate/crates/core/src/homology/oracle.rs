//! Brute-force persistence used to cross-check [`super::reduce`].
//!
//! Works from ranks of lower-left submatrices of the boundary matrix
//! instead of column operations: the reduced column `j` has its lowest
//! entry at row `i` exactly when appending column `j` raises the rank of
//! the rows `≥ i` but not of the rows `> i`. Faces are located by linear
//! search and ranks come from dense GF(2) elimination, so nothing is
//! shared with the fast path beyond the input complex.

use crate::error::{Error, Result};
use crate::filtration::FilteredComplex;

use super::{PersistenceDiagram, ESSENTIAL_DEATH};

pub const ORACLE_MAX_SIMPLICES: usize = 512;

struct Bits {
    words: Vec<u64>,
}

impl Bits {
    fn zeros(len: usize) -> Self {
        Bits { words: vec![0; len.div_ceil(64)] }
    }

    fn set(&mut self, i: usize) {
        self.words[i / 64] ^= 1 << (i % 64);
    }

    fn highest(&self) -> Option<usize> {
        self.words
            .iter()
            .enumerate()
            .rev()
            .find(|(_, w)| **w != 0)
            .map(|(k, w)| k * 64 + 63 - w.leading_zeros() as usize)
    }

    /// Copy keeping only bits `< len`.
    fn truncated(&self, len: usize) -> Bits {
        let mut out = Bits { words: self.words.clone() };
        for (k, w) in out.words.iter_mut().enumerate() {
            let lo = k * 64;
            if lo >= len {
                *w = 0;
            } else if len - lo < 64 {
                *w &= (1u64 << (len - lo)) - 1;
            }
        }
        out
    }

    fn xor(&mut self, other: &Bits) {
        for (a, b) in self.words.iter_mut().zip(&other.words) {
            *a ^= b;
        }
    }
}

/// Incremental GF(2) row space; returns whether the row was independent.
struct Echelon {
    by_lead: Vec<Option<Bits>>,
}

impl Echelon {
    fn new(width: usize) -> Self {
        Echelon { by_lead: (0..width).map(|_| None).collect() }
    }

    fn insert(&mut self, mut row: Bits) -> bool {
        while let Some(lead) = row.highest() {
            match &self.by_lead[lead] {
                Some(b) => row.xor(b),
                None => {
                    self.by_lead[lead] = Some(row);
                    return true;
                }
            }
        }
        false
    }
}

fn drop_vertex(vertices: &[u32], k: usize) -> Vec<u32> {
    vertices
        .iter()
        .enumerate()
        .filter(|&(i, _)| i != k)
        .map(|(_, v)| *v)
        .collect()
}

/// Naive persistence for small complexes (at most [`ORACLE_MAX_SIMPLICES`]).
pub fn oracle_reduce(fc: &FilteredComplex, max_dim: usize) -> Result<Vec<PersistenceDiagram>> {
    let simplices = fc.simplices();
    let m = simplices.len();
    if m > ORACLE_MAX_SIMPLICES {
        return Err(Error::OracleCap { simplices: m, cap: ORACLE_MAX_SIMPLICES });
    }

    // rows[i] has bit j set when simplex i is a face of simplex j
    let mut rows: Vec<Bits> = (0..m).map(|_| Bits::zeros(m)).collect();
    for (j, s) in simplices.iter().enumerate() {
        let verts = s.vertices();
        if verts.len() < 2 {
            continue;
        }
        for k in 0..verts.len() {
            let face = drop_vertex(verts, k);
            let i = simplices
                .iter()
                .position(|t| t.vertices() == face.as_slice())
                .ok_or_else(|| Error::invalid(format!("face {face:?} of {verts:?} is missing")))?;
            rows[i].set(j);
        }
    }

    let low: Vec<Option<usize>> = (0..m)
        .map(|j| {
            let mut with = Echelon::new(m);
            let mut without = Echelon::new(m);
            // rank(with) - rank(without) only changes from 0 to 1 once
            (0..m).rev().find(|&i| {
                let grew_with = with.insert(rows[i].truncated(j + 1));
                let grew_without = without.insert(rows[i].truncated(j));
                grew_with && !grew_without
            })
        })
        .collect();

    let mut killer: Vec<Option<usize>> = vec![None; m];
    for (j, l) in low.iter().enumerate() {
        if let Some(i) = *l {
            killer[i] = Some(j);
        }
    }

    let mut diagrams: Vec<PersistenceDiagram> = (0..=max_dim).map(PersistenceDiagram::empty).collect();
    for (i, s) in simplices.iter().enumerate() {
        if s.dim() > max_dim || low[i].is_some() {
            continue;
        }
        let death = killer[i].map_or(ESSENTIAL_DEATH, |j| simplices[j].value);
        diagrams[s.dim()].points.push((s.value, death));
    }
    Ok(diagrams)
}
