//! Classification metrics and the paired-input robustness harness.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::classifier::Network;
use crate::distance::canonical_sum;
use crate::error::{Error, Result};
use crate::heads::write_grid_csv;
use crate::image::ImageStack;
use crate::tensor_io::Paired;

fn check_binary(preds: &[u8], labels: &[u8]) -> Result<()> {
    if preds.is_empty() {
        return Err(Error::invalid("no predictions to score"));
    }
    if preds.len() != labels.len() {
        return Err(Error::invalid(format!(
            "{} predictions for {} labels",
            preds.len(),
            labels.len()
        )));
    }
    if preds.iter().chain(labels).any(|&v| v > 1) {
        return Err(Error::invalid("predictions and labels must be 0 or 1"));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Confusion {
    pub tp: u64,
    pub tn: u64,
    pub fp: u64,
    pub fn_: u64,
}

impl Confusion {
    pub fn from_predictions(preds: &[u8], labels: &[u8]) -> Result<Self> {
        check_binary(preds, labels)?;
        let mut c = Confusion::default();
        for (&p, &y) in preds.iter().zip(labels) {
            match (p, y) {
                (1, 1) => c.tp += 1,
                (0, 0) => c.tn += 1,
                (1, 0) => c.fp += 1,
                _ => c.fn_ += 1,
            }
        }
        Ok(c)
    }

    pub fn accuracy(&self) -> f64 {
        (self.tp + self.tn) as f64 / (self.tp + self.tn + self.fp + self.fn_) as f64
    }

    /// Matthews correlation coefficient; 0 when any marginal is empty.
    pub fn mcc(&self) -> f64 {
        let (tp, tn, fp, fn_) = (self.tp as f64, self.tn as f64, self.fp as f64, self.fn_ as f64);
        let denom = ((tp + fp) * (tp + fn_) * (tn + fp) * (tn + fn_)).sqrt();
        if denom == 0.0 {
            0.0
        } else {
            (tp * tn - fp * fn_) / denom
        }
    }
}

pub fn accuracy(preds: &[u8], labels: &[u8]) -> Result<f64> {
    Ok(Confusion::from_predictions(preds, labels)?.accuracy())
}

pub fn mcc(preds: &[u8], labels: &[u8]) -> Result<f64> {
    Ok(Confusion::from_predictions(preds, labels)?.mcc())
}

pub fn write_metrics_csv<W: Write>(mut out: W, preds: &[u8], labels: &[u8]) -> Result<()> {
    let c = Confusion::from_predictions(preds, labels)?;
    let io = |e| Error::io("<metrics>", e);
    writeln!(out, "metric,value").map_err(io)?;
    writeln!(out, "samples,{}", preds.len()).map_err(io)?;
    writeln!(out, "accuracy,{}", c.accuracy()).map_err(io)?;
    writeln!(out, "mcc,{}", c.mcc()).map_err(io)?;
    writeln!(out, "tp,{}\ntn,{}\nfp,{}\nfn,{}", c.tp, c.tn, c.fp, c.fn_).map_err(io)?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RobustnessReport {
    pub total: usize,
    /// Pairs whose predicted class is the same before and after.
    pub avoided: usize,
    /// Avoided pairs that were also classified correctly before the attack.
    pub avoided_common: usize,
    pub initially_correct: usize,
    pub num_layers: usize,
    pub num_heads: usize,
    /// Mean over pairs of the summed Frobenius distance between a head's
    /// before/after images, indexed by `layer * num_heads + head`.
    pub perturbation: Vec<f64>,
}

impl RobustnessReport {
    pub fn avoided_pct(&self) -> f64 {
        100.0 * self.avoided as f64 / self.total as f64
    }

    pub fn avoided_common_pct(&self) -> f64 {
        100.0 * self.avoided_common as f64 / self.total as f64
    }

    pub fn write_summary_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "metric,value")?;
        writeln!(out, "total,{}", self.total)?;
        writeln!(out, "avoided,{}", self.avoided)?;
        writeln!(out, "avoided_pct,{}", self.avoided_pct())?;
        writeln!(out, "avoided_common,{}", self.avoided_common)?;
        writeln!(out, "avoided_common_pct,{}", self.avoided_common_pct())?;
        writeln!(out, "initially_correct,{}", self.initially_correct)
    }

    /// Layer × head grid of `log10(perturbation)`; untouched heads are `-inf`.
    pub fn write_log_heatmap_csv<W: Write>(&self, out: W) -> std::io::Result<()> {
        write_grid_csv(out, self.num_layers, self.num_heads, |l, h| {
            let v = self.perturbation[l * self.num_heads + h];
            if v > 0.0 {
                v.log10().to_string()
            } else {
                "-inf".to_string()
            }
        })
    }
}

/// Sum over a head's channels of the Frobenius distance between the two
/// stacks, for each head of the layout.
pub fn head_perturbations(before: &ImageStack, after: &ImageStack) -> Result<Vec<f64>> {
    if before.layout() != after.layout() {
        return Err(Error::Shape {
            expected: format!("{:?}", before.layout()),
            got: format!("{:?}", after.layout()),
        });
    }
    Ok((0..before.heads.len())
        .map(|pos| {
            (0..before.per_head)
                .map(|q| {
                    let c = pos * before.per_head + q;
                    before
                        .channel(c)
                        .iter()
                        .zip(after.channel(c))
                        .map(|(&a, &b)| {
                            let d = a as f64 - b as f64;
                            d * d
                        })
                        .sum::<f64>()
                        .sqrt()
                })
                .sum()
        })
        .collect())
}

/// Runs the classifier on both sides of every pair. "Avoided" means the
/// predicted class did not change.
pub fn robustness_eval(
    net: &mut Network,
    pairs: &[Paired<ImageStack>],
    num_layers: usize,
    num_heads: usize,
) -> Result<RobustnessReport> {
    let first = pairs.first().ok_or_else(|| Error::invalid("no pairs to evaluate"))?;
    let layout = first.before.layout();
    if layout.heads.iter().any(|&h| h >= num_layers * num_heads) {
        return Err(Error::invalid("stack refers to a head outside the encoder"));
    }
    let mut avoided = 0;
    let mut avoided_common = 0;
    let mut initially_correct = 0;
    let mut per_head: Vec<Vec<f64>> = vec![Vec::with_capacity(pairs.len()); layout.heads.len()];
    for pair in pairs {
        if pair.before.layout() != layout {
            return Err(Error::Shape {
                expected: format!("{layout:?}"),
                got: format!("{:?}", pair.before.layout()),
            });
        }
        let before = net.predict(&pair.before)?;
        let after = net.predict(&pair.after)?;
        let correct = before == pair.before.label;
        initially_correct += correct as usize;
        if before == after {
            avoided += 1;
            avoided_common += correct as usize;
        }
        for (slot, d) in per_head.iter_mut().zip(head_perturbations(&pair.before, &pair.after)?) {
            slot.push(d);
        }
    }
    let mut perturbation = vec![0.0; num_layers * num_heads];
    for (&head, values) in layout.heads.iter().zip(per_head) {
        perturbation[head] = canonical_sum(values) / pairs.len() as f64;
    }
    Ok(RobustnessReport {
        total: pairs.len(),
        avoided,
        avoided_common,
        initially_correct,
        num_layers,
        num_heads,
        perturbation,
    })
}
