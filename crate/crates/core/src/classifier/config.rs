use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::filtration::FiltrationKind;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OptimizerKind {
    Adam,
    Rmsprop,
}

/// Max-pooling window after a convolution block.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Pool {
    pub kernel: usize,
    pub stride: usize,
    pub pad: usize,
}

impl Pool {
    pub fn output_len(&self, len: usize) -> Option<usize> {
        let padded = len + 2 * self.pad;
        if padded < self.kernel || self.stride == 0 {
            return None;
        }
        Some((padded - self.kernel) / self.stride + 1)
    }
}

/// Classifier architecture, one field per column of the architecture table:
/// optimizer, learning rate, conv filters, pooling kernel/stride/pad (one
/// entry per conv layer, `null` for no pooling), linear layer widths and
/// dropout rate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkConfig {
    pub optimizer: OptimizerKind,
    pub lr: f64,
    #[serde(default)]
    pub filters: Vec<usize>,
    #[serde(default)]
    pub pool_kernel: Option<Vec<usize>>,
    #[serde(default)]
    pub pool_stride: Option<Vec<usize>>,
    #[serde(default)]
    pub pool_pad: Option<Vec<usize>>,
    #[serde(default)]
    pub linear: Vec<usize>,
    #[serde(default)]
    pub dropout: f64,
    /// `[channels, height, width]`.
    pub input_shape: [usize; 3],
    #[serde(default)]
    pub seed: u64,
}

/// Stack shape produced by each filtration kind on a 12 × 12 encoder.
pub fn default_input_shape(kind: FiltrationKind) -> [usize; 3] {
    match kind {
        FiltrationKind::Ordinary => [288, 50, 5],
        FiltrationKind::MultiDim => [432, 50, 50],
        FiltrationKind::Directed => [432, 30, 30],
    }
}

impl NetworkConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|source| Error::Json {
            path: path.to_path_buf(),
            source,
        })
    }

    /// The tuned architectures per dataset (`cola`, `imdb`, `spam`, `sst2`)
    /// and filtration kind.
    pub fn preset(dataset: &str, kind: FiltrationKind) -> Result<Self> {
        use FiltrationKind::*;
        use OptimizerKind::*;
        type Row = (
            OptimizerKind,
            f64,
            &'static [usize],
            Option<[&'static [usize]; 3]>,
            &'static [usize],
            f64,
        );
        let row: Row = match (dataset.to_ascii_lowercase().as_str(), kind) {
            ("cola", Ordinary) => (Adam, 6.7e-4, &[15, 25, 45], None, &[150], 0.25),
            ("cola", MultiDim) => (Rmsprop, 7.5e-5, &[15, 25], Some([&[3, 2], &[3, 2], &[1, 1]]), &[500, 120], 0.25),
            ("cola", Directed) => (
                Rmsprop,
                9.2e-4,
                &[4, 30, 20],
                Some([&[2, 1, 2], &[1, 1, 2], &[1, 0, 1]]),
                &[700, 350, 750],
                0.15,
            ),
            ("imdb", Ordinary) => (Adam, 8.4e-5, &[35, 30], None, &[180], 0.25),
            ("imdb", MultiDim) => (
                Adam,
                1.2e-3,
                &[17, 17, 17],
                Some([&[2, 3, 2], &[2, 1, 2], &[1, 0, 0]]),
                &[700, 660, 800],
                0.2,
            ),
            ("spam", Ordinary) => (Adam, 2.2e-4, &[15, 25], None, &[700], 0.2),
            ("spam", MultiDim) => (Adam, 7e-4, &[33, 5, 32], Some([&[1, 2, 1], &[1, 2, 1], &[0, 1, 0]]), &[480, 220], 0.3),
            ("sst2", Ordinary) => (Adam, 5e-4, &[35], None, &[190, 940], 0.25),
            ("sst2", MultiDim) => (Adam, 2.4e-5, &[20, 20], Some([&[2, 1], &[2, 1], &[1, 0]]), &[650, 680], 0.25),
            _ => return Err(Error::invalid(format!("no preset architecture for {dataset}/{kind}"))),
        };
        let (optimizer, lr, filters, pools, linear, dropout) = row;
        Ok(NetworkConfig {
            optimizer,
            lr,
            filters: filters.to_vec(),
            pool_kernel: pools.map(|p| p[0].to_vec()),
            pool_stride: pools.map(|p| p[1].to_vec()),
            pool_pad: pools.map(|p| p[2].to_vec()),
            linear: linear.to_vec(),
            dropout,
            input_shape: default_input_shape(kind),
            seed: 0,
        })
    }

    /// Per-conv-layer pooling; stride defaults to the kernel, pad to 0.
    pub fn pools(&self) -> Result<Vec<Option<Pool>>> {
        let n = self.filters.len();
        let Some(kernels) = &self.pool_kernel else {
            if self.pool_stride.is_some() || self.pool_pad.is_some() {
                return Err(Error::invalid("pool stride/pad given without pool kernels"));
            }
            return Ok(vec![None; n]);
        };
        let check = |name: &str, v: &Option<Vec<usize>>| -> Result<()> {
            match v {
                Some(v) if v.len() != n => Err(Error::invalid(format!(
                    "{name} has {} entries for {n} conv layers",
                    v.len()
                ))),
                _ => Ok(()),
            }
        };
        check("pool_kernel", &self.pool_kernel)?;
        check("pool_stride", &self.pool_stride)?;
        check("pool_pad", &self.pool_pad)?;
        (0..n)
            .map(|i| {
                let kernel = kernels[i];
                if kernel == 0 {
                    return Ok(None);
                }
                let stride = self.pool_stride.as_ref().map_or(kernel, |s| s[i]);
                let pad = self.pool_pad.as_ref().map_or(0, |p| p[i]);
                if stride == 0 || 2 * pad > kernel {
                    return Err(Error::invalid(format!(
                        "pool {i}: kernel {kernel}, stride {stride}, pad {pad} is not a valid window"
                    )));
                }
                Ok(Some(Pool { kernel, stride, pad }))
            })
            .collect()
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lr.is_finite() && self.lr >= 0.0) {
            return Err(Error::invalid(format!("learning rate {} is invalid", self.lr)));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(Error::invalid(format!("dropout rate {} not in [0, 1)", self.dropout)));
        }
        if self.input_shape.contains(&0) {
            return Err(Error::invalid(format!("input shape {:?} has an empty axis", self.input_shape)));
        }
        if self.filters.iter().chain(&self.linear).any(|&d| d == 0) {
            return Err(Error::invalid("layer widths must be positive"));
        }
        self.pools()?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cola_ordinary_row() {
        let c = NetworkConfig::preset("CoLA", FiltrationKind::Ordinary).unwrap();
        assert_eq!(c.optimizer, OptimizerKind::Adam);
        assert_eq!(c.lr, 6.7e-4);
        assert_eq!(c.filters, vec![15, 25, 45]);
        assert_eq!(c.pools().unwrap(), vec![None; 3]);
        assert_eq!(c.linear, vec![150]);
        assert_eq!(c.dropout, 0.25);
        assert_eq!(c.input_shape, [288, 50, 5]);
    }

    #[test]
    fn cola_directed_row() {
        let c = NetworkConfig::preset("cola", FiltrationKind::Directed).unwrap();
        assert_eq!(c.filters, vec![4, 30, 20]);
        let pools = c.pools().unwrap();
        assert_eq!(pools[0], Some(Pool { kernel: 2, stride: 1, pad: 1 }));
        assert_eq!(pools[1], Some(Pool { kernel: 1, stride: 1, pad: 0 }));
        assert_eq!(pools[2], Some(Pool { kernel: 2, stride: 2, pad: 1 }));
        assert_eq!(c.linear, vec![700, 350, 750]);
        assert_eq!(c.dropout, 0.15);
        assert_eq!(c.input_shape, [432, 30, 30]);
    }

    #[test]
    fn json_round_trip_with_null_pooling() {
        let text = r#"{"optimizer":"rmsprop","lr":0.001,"filters":[4],"pool_kernel":null,
                       "linear":[8],"dropout":0.1,"input_shape":[2,5,5],"seed":3}"#;
        let c: NetworkConfig = serde_json::from_str(text).unwrap();
        c.validate().unwrap();
        assert_eq!(serde_json::from_str::<NetworkConfig>(&serde_json::to_string(&c).unwrap()).unwrap(), c);
    }

    #[test]
    fn mismatched_pool_lists() {
        let mut c = NetworkConfig::preset("sst2", FiltrationKind::MultiDim).unwrap();
        c.pool_pad = Some(vec![0]);
        assert!(c.validate().is_err());
        assert!(NetworkConfig::preset("glue", FiltrationKind::Ordinary).is_err());
    }
}
