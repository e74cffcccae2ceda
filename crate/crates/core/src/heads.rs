//! Gradient-based head relevance, top-n selection and channel pruning.
//!
//! A head's score is the mean absolute input gradient of the logit over
//! the pixels of each of its images, averaged over its images and then
//! over sentences.

use std::collections::HashSet;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::classifier::Network;
use crate::distance::canonical_sum;
use crate::error::{Error, Result};
use crate::image::ImageStack;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HeadScore {
    pub num_layers: usize,
    pub num_heads: usize,
    /// Indexed by `layer * num_heads + head`; heads missing from the
    /// scored stacks score 0.
    pub scores: Vec<f64>,
    pub num_sentences: usize,
    pub source: String,
}

impl HeadScore {
    pub fn get(&self, layer: usize, head: usize) -> f64 {
        self.scores[layer * self.num_heads + head]
    }

    /// `layer,head,score` rows.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "layer,head,score")?;
        for layer in 0..self.num_layers {
            for head in 0..self.num_heads {
                writeln!(out, "{layer},{head},{}", self.get(layer, head))?;
            }
        }
        Ok(())
    }

    /// One row per layer, one column per head.
    pub fn write_heatmap_csv<W: Write>(&self, out: W) -> std::io::Result<()> {
        write_grid_csv(out, self.num_layers, self.num_heads, |l, h| self.get(l, h).to_string())
    }

    pub fn read_csv(text: &str, num_layers: usize, num_heads: usize) -> Result<Self> {
        let mut scores = vec![0.0; num_layers * num_heads];
        let mut seen = 0;
        for (i, line) in text.lines().enumerate().skip(1) {
            if line.trim().is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split(',').collect();
            let parse_err = || Error::invalid(format!("bad score row {}: {line:?}", i + 1));
            if fields.len() != 3 {
                return Err(parse_err());
            }
            let layer: usize = fields[0].trim().parse().map_err(|_| parse_err())?;
            let head: usize = fields[1].trim().parse().map_err(|_| parse_err())?;
            let score: f64 = fields[2].trim().parse().map_err(|_| parse_err())?;
            if layer >= num_layers || head >= num_heads {
                return Err(parse_err());
            }
            scores[layer * num_heads + head] = score;
            seen += 1;
        }
        if seen == 0 {
            return Err(Error::invalid("score file has no rows"));
        }
        Ok(HeadScore { num_layers, num_heads, scores, num_sentences: 0, source: String::new() })
    }
}

/// Grid CSV with a header of head ids and one row per layer.
pub fn write_grid_csv<W: Write>(
    mut out: W,
    rows: usize,
    cols: usize,
    cell: impl Fn(usize, usize) -> String,
) -> std::io::Result<()> {
    write!(out, "layer")?;
    for h in 0..cols {
        write!(out, ",{h}")?;
    }
    writeln!(out)?;
    for l in 0..rows {
        write!(out, "{l}")?;
        for h in 0..cols {
            write!(out, ",{}", cell(l, h))?;
        }
        writeln!(out)?;
    }
    Ok(())
}

/// Per-head mean |∂logit/∂pixel| for one stack, in the stack's head order.
pub fn sentence_head_scores(net: &mut Network, stack: &ImageStack) -> Result<Vec<f64>> {
    let grad = net.input_gradient(stack)?;
    let hw = stack.height * stack.width;
    let per_head = stack.per_head;
    Ok(grad
        .chunks_exact(hw * per_head)
        .map(|head| {
            let channel_means: f64 = head
                .chunks_exact(hw)
                .map(|ch| ch.iter().map(|g| g.abs()).sum::<f64>() / hw as f64)
                .sum();
            channel_means / per_head as f64
        })
        .collect())
}

/// Scores every head on `stacks`. The mean over sentences is summed in
/// sorted order so the result does not depend on sentence order.
pub fn score_heads(
    net: &mut Network,
    stacks: &[ImageStack],
    num_layers: usize,
    num_heads: usize,
    source: &str,
) -> Result<HeadScore> {
    let first = stacks.first().ok_or_else(|| Error::invalid("no stacks to score heads on"))?;
    let layout = first.layout();
    if layout.heads.iter().any(|&h| h >= num_layers * num_heads) {
        return Err(Error::invalid("stack refers to a head outside the encoder"));
    }
    let mut per_head: Vec<Vec<f64>> = vec![Vec::with_capacity(stacks.len()); layout.heads.len()];
    for stack in stacks {
        if stack.layout() != layout {
            return Err(Error::Shape {
                expected: format!("{layout:?}"),
                got: format!("{:?}", stack.layout()),
            });
        }
        for (slot, s) in per_head.iter_mut().zip(sentence_head_scores(net, stack)?) {
            slot.push(s);
        }
    }
    let mut scores = vec![0.0; num_layers * num_heads];
    for (&head, values) in layout.heads.iter().zip(per_head) {
        scores[head] = canonical_sum(values) / stacks.len() as f64;
    }
    Ok(HeadScore {
        num_layers,
        num_heads,
        scores,
        num_sentences: stacks.len(),
        source: source.to_string(),
    })
}

/// Global head indices of the `n` best heads, best first; ties go to the
/// lower `(layer, head)`.
pub fn top_n(scores: &HeadScore, n: usize) -> Result<Vec<usize>> {
    let total = scores.scores.len();
    if n == 0 || n > total {
        return Err(Error::invalid(format!("top-n needs 1 ≤ n ≤ {total}, got {n}")));
    }
    let mut order: Vec<usize> = (0..total).collect();
    order.sort_by(|&a, &b| scores.scores[b].total_cmp(&scores.scores[a]).then(a.cmp(&b)));
    order.truncate(n);
    Ok(order)
}

/// Keeps only the channels of `heads` (or drops them when `invert`),
/// preserving channel order.
pub fn prune_stack(stack: &ImageStack, heads: &[usize], invert: bool) -> Result<ImageStack> {
    let selected: HashSet<usize> = heads.iter().copied().collect();
    let hw = stack.height * stack.width;
    let block = stack.per_head * hw;
    let mut kept = Vec::new();
    let mut data = Vec::new();
    for (pos, &head) in stack.heads.iter().enumerate() {
        if selected.contains(&head) != invert {
            kept.push(head);
            data.extend_from_slice(&stack.data()[pos * block..(pos + 1) * block]);
        }
    }
    if kept.is_empty() {
        return Err(Error::invalid(format!("pruning {} leaves no channels", stack.sentence_id)));
    }
    ImageStack::new(
        &stack.sentence_id,
        stack.label,
        stack.kind,
        stack.per_head,
        kept,
        stack.height,
        stack.width,
        data,
    )
}

pub fn prune_dataset(stacks: &[ImageStack], heads: &[usize], invert: bool) -> Result<Vec<ImageStack>> {
    stacks.iter().map(|s| prune_stack(s, heads, invert)).collect()
}
