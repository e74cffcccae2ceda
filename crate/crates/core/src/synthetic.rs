//! Synthetic attention datasets with known structure.
//!
//! Two row-stochastic patterns stand in for the two classes: near-diagonal
//! maps (tokens attend to themselves and their neighbours) and
//! single-column maps (every token attends to one special token, as heads
//! attending to `[CLS]` or `[SEP]` do). Heads that should carry no signal
//! draw their pattern independently of the label.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::tensor_io::AttentionRecord;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Pattern {
    Diagonal,
    Column,
    Diffuse,
}

/// What heads outside the informative set show.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Distractor {
    /// Random row-stochastic noise.
    Diffuse,
    /// Diagonal or column, chosen by a coin flip unrelated to the label.
    RandomPattern,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticConfig {
    pub sentences: usize,
    pub min_tokens: usize,
    pub max_tokens: usize,
    pub num_layers: usize,
    pub num_heads: usize,
    /// Global head indices whose pattern follows the label; `None` means all.
    pub informative_heads: Option<Vec<usize>>,
    pub distractor: Distractor,
    pub seed: u64,
}

impl SyntheticConfig {
    /// 12 × 12 heads, 8–16 tokens, every head informative.
    pub fn standard(sentences: usize, seed: u64) -> Self {
        SyntheticConfig {
            sentences,
            min_tokens: 8,
            max_tokens: 16,
            num_layers: 12,
            num_heads: 12,
            informative_heads: None,
            distractor: Distractor::Diffuse,
            seed,
        }
    }
}

fn normalize_rows(m: &mut [f64], n: usize) {
    for row in m.chunks_exact_mut(n) {
        let s: f64 = row.iter().sum();
        row.iter_mut().for_each(|v| *v /= s);
    }
}

pub fn pattern_matrix(pattern: Pattern, n: usize, rng: &mut impl Rng) -> Vec<f32> {
    let mut m = vec![0.0f64; n * n];
    match pattern {
        Pattern::Diagonal => {
            for i in 0..n {
                for j in 0..n {
                    let base = match i.abs_diff(j) {
                        0 => 1.0,
                        1 => 0.4,
                        _ => 0.01,
                    };
                    m[i * n + j] = base * rng.gen_range(0.7..1.3) + rng.gen_range(0.0..0.02);
                }
            }
        }
        Pattern::Column => {
            let col = if rng.gen_bool(0.5) { 0 } else { n - 1 };
            for i in 0..n {
                for j in 0..n {
                    let base = if j == col { 1.0 } else { 0.01 };
                    m[i * n + j] = base * rng.gen_range(0.7..1.3) + rng.gen_range(0.0..0.02);
                }
            }
        }
        Pattern::Diffuse => {
            for v in m.iter_mut() {
                *v = rng.gen_range(0.05..1.0);
            }
        }
    }
    normalize_rows(&mut m, n);
    m.into_iter().map(|v| v as f32).collect()
}

fn class_pattern(label: u8) -> Pattern {
    if label == 0 {
        Pattern::Diagonal
    } else {
        Pattern::Column
    }
}

/// Balanced dataset; sentence `i` gets label `i % 2` and id `syn-<i>`.
pub fn generate(cfg: &SyntheticConfig) -> Result<Vec<AttentionRecord>> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let total = cfg.num_layers * cfg.num_heads;
    let mut informative = vec![cfg.informative_heads.is_none(); total];
    for &h in cfg.informative_heads.iter().flatten() {
        informative[h] = true;
    }
    (0..cfg.sentences)
        .map(|i| {
            let label = (i % 2) as u8;
            let n = rng.gen_range(cfg.min_tokens..=cfg.max_tokens);
            let heads: Vec<Vec<f32>> = informative
                .iter()
                .map(|&signal| {
                    let pattern = if signal {
                        class_pattern(label)
                    } else {
                        match cfg.distractor {
                            Distractor::Diffuse => Pattern::Diffuse,
                            Distractor::RandomPattern => class_pattern(rng.gen_range(0..2)),
                        }
                    };
                    pattern_matrix(pattern, n, &mut rng)
                })
                .collect();
            AttentionRecord::from_heads(format!("syn-{i:05}"), label, cfg.num_layers, cfg.num_heads, &heads)
        })
        .collect()
}

/// Adds `U(0, eps)` to every attention entry and renormalizes each row.
/// Label and id are kept, so the result pairs with the input.
pub fn perturb(record: &AttentionRecord, eps: f64, rng: &mut impl Rng) -> AttentionRecord {
    let mut out = record.clone();
    let n = record.num_tokens;
    for row in out.data_mut().chunks_exact_mut(n) {
        let mut vals: Vec<f64> = row.iter().map(|&v| v as f64 + rng.gen_range(0.0..eps)).collect();
        let s: f64 = vals.iter().sum();
        vals.iter_mut().for_each(|v| *v /= s);
        for (dst, v) in row.iter_mut().zip(vals) {
            *dst = v as f32;
        }
    }
    out
}
