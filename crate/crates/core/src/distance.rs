//! p-Wasserstein distance between persistence diagrams.
//!
//! Both diagrams are augmented with the diagonal: every point of one
//! diagram may be matched either to a point of the other or to its own
//! orthogonal projection on `y = x`, and projections match each other for
//! free. The optimal bijection is found exactly with the Hungarian method
//! on the `(|D1| + |D2|)`-square cost matrix.

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::homology::PersistenceDiagram;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GroundMetric {
    #[default]
    Euclidean,
    LInfinity,
}

impl GroundMetric {
    pub fn dist(self, a: (f64, f64), b: (f64, f64)) -> f64 {
        let dx = a.0 - b.0;
        let dy = a.1 - b.1;
        match self {
            GroundMetric::Euclidean => (dx * dx + dy * dy).sqrt(),
            GroundMetric::LInfinity => dx.abs().max(dy.abs()),
        }
    }

    /// Distance from `(b, d)` to its projection `((b+d)/2, (b+d)/2)`.
    pub fn to_diagonal(self, a: (f64, f64)) -> f64 {
        let gap = (a.1 - a.0).abs();
        match self {
            GroundMetric::Euclidean => gap / std::f64::consts::SQRT_2,
            GroundMetric::LInfinity => gap / 2.0,
        }
    }
}

/// Optimal matching on the diagonal-augmented diagrams.
#[derive(Debug, Clone, PartialEq)]
pub struct AugmentedMatching {
    /// `assignment[i]` is the partner of left slot `i`. Slots `0..|D1|` are
    /// the points of D1, the rest are diagonal copies standing for the
    /// points of D2; right slots likewise.
    pub assignment: Vec<usize>,
    pub left_len: usize,
    pub right_len: usize,
    /// `(Σ cost^p)^(1/p)`.
    pub cost: f64,
}

fn power(x: f64, p: f64) -> f64 {
    if p == 1.0 {
        x
    } else if p == 2.0 {
        x * x
    } else {
        x.powf(p)
    }
}

/// Sum in ascending order, so the result depends only on the multiset.
pub(crate) fn canonical_sum(mut terms: Vec<f64>) -> f64 {
    terms.sort_by(f64::total_cmp);
    terms.into_iter().sum()
}

/// Minimum-cost perfect matching on a square matrix (row → column).
fn hungarian(cost: &[f64], n: usize) -> Vec<usize> {
    // potentials formulation with a virtual column 0, indices shifted by one
    let mut u = vec![0.0f64; n + 1];
    let mut v = vec![0.0f64; n + 1];
    let mut owner = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for row in 1..=n {
        owner[0] = row;
        let mut col0 = 0usize;
        let mut min_v = vec![f64::INFINITY; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[col0] = true;
            let r = owner[col0];
            let mut delta = f64::INFINITY;
            let mut next = 0usize;
            for col in 1..=n {
                if used[col] {
                    continue;
                }
                let reduced = cost[(r - 1) * n + (col - 1)] - u[r] - v[col];
                if reduced < min_v[col] {
                    min_v[col] = reduced;
                    way[col] = col0;
                }
                if min_v[col] < delta {
                    delta = min_v[col];
                    next = col;
                }
            }
            for col in 0..=n {
                if used[col] {
                    u[owner[col]] += delta;
                    v[col] -= delta;
                } else {
                    min_v[col] -= delta;
                }
            }
            col0 = next;
            if owner[col0] == 0 {
                break;
            }
        }
        loop {
            let prev = way[col0];
            owner[col0] = owner[prev];
            col0 = prev;
            if col0 == 0 {
                break;
            }
        }
    }
    let mut assignment = vec![0usize; n];
    for col in 1..=n {
        assignment[owner[col] - 1] = col - 1;
    }
    assignment
}

pub fn matching(
    d1: &PersistenceDiagram,
    d2: &PersistenceDiagram,
    p: f64,
    metric: GroundMetric,
) -> Result<AugmentedMatching> {
    if !(p.is_finite() && p >= 1.0) {
        return Err(Error::invalid(format!("Wasserstein order p must be finite and ≥ 1, got {p}")));
    }
    if d1.dim != d2.dim {
        return Err(Error::invalid(format!(
            "diagrams of dimensions {} and {} are not comparable",
            d1.dim, d2.dim
        )));
    }
    if let Some(bad) = d1.points.iter().chain(&d2.points).find(|(b, d)| !b.is_finite() || !d.is_finite()) {
        return Err(Error::invalid(format!("diagram point {bad:?} is not finite")));
    }
    let (k, l) = (d1.len(), d2.len());
    let n = k + l;
    let diag1: Vec<f64> = d1.points.iter().map(|&a| power(metric.to_diagonal(a), p)).collect();
    let diag2: Vec<f64> = d2.points.iter().map(|&b| power(metric.to_diagonal(b), p)).collect();
    let forbidden = 2.0 * (diag1.iter().sum::<f64>() + diag2.iter().sum::<f64>()) + 1.0;

    let mut cost = vec![0.0f64; n * n];
    for i in 0..n {
        for j in 0..n {
            cost[i * n + j] = match (i < k, j < l) {
                (true, true) => power(metric.dist(d1.points[i], d2.points[j]), p),
                (true, false) if j - l == i => diag1[i],
                (false, true) if i - k == j => diag2[j],
                (false, false) => 0.0,
                _ => forbidden,
            };
        }
    }
    let assignment = if n == 0 { Vec::new() } else { hungarian(&cost, n) };
    let total = canonical_sum(assignment.iter().enumerate().map(|(i, &j)| cost[i * n + j]).collect());
    Ok(AugmentedMatching {
        assignment,
        left_len: k,
        right_len: l,
        cost: total.powf(1.0 / p),
    })
}

/// `W_p(D1, D2)` with the Euclidean ground metric.
pub fn wasserstein(d1: &PersistenceDiagram, d2: &PersistenceDiagram, p: f64) -> Result<f64> {
    wasserstein_with(d1, d2, p, GroundMetric::Euclidean)
}

pub fn wasserstein_with(
    d1: &PersistenceDiagram,
    d2: &PersistenceDiagram,
    p: f64,
    metric: GroundMetric,
) -> Result<f64> {
    Ok(matching(d1, d2, p, metric)?.cost)
}

/// Symmetric matrix of pairwise distances with a zero diagonal.
pub fn distance_matrix(diagrams: &[PersistenceDiagram], p: f64, metric: GroundMetric) -> Result<Vec<Vec<f64>>> {
    let n = diagrams.len();
    if let Some(first) = diagrams.first() {
        if let Some(bad) = diagrams.iter().find(|d| d.dim != first.dim) {
            return Err(Error::invalid(format!(
                "distance matrix mixes dimensions {} and {}",
                first.dim, bad.dim
            )));
        }
    }
    let pairs: Vec<(usize, usize)> = (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j))).collect();
    let values = pairs
        .par_iter()
        .map(|&(i, j)| wasserstein_with(&diagrams[i], &diagrams[j], p, metric))
        .collect::<Result<Vec<f64>>>()?;
    let mut out = vec![vec![0.0; n]; n];
    for (&(i, j), v) in pairs.iter().zip(values) {
        out[i][j] = v;
        out[j][i] = v;
    }
    Ok(out)
}

/// CSV with a header row of ids and one labelled row per diagram.
pub fn write_matrix_csv<W: Write>(mut out: W, ids: &[String], matrix: &[Vec<f64>]) -> std::io::Result<()> {
    write!(out, "id")?;
    for id in ids {
        write!(out, ",{id}")?;
    }
    writeln!(out)?;
    for (id, row) in ids.iter().zip(matrix) {
        write!(out, "{id}")?;
        for v in row {
            write!(out, ",{v}")?;
        }
        writeln!(out)?;
    }
    Ok(())
}
