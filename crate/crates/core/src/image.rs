//! Persistence images and per-sentence image stacks.
//!
//! A pixel stores the integral of the weighted Gaussian surface
//! `Σ_u w(u) φ_u` over its cell. The Gaussian is separable, so each pixel
//! is a product of two differences of the normal CDF and no quadrature is
//! involved.
//!
//! Images are stored row-major as `[row][col]` with the column index
//! following birth (left to right) and the row index following death
//! (bottom to top).

use std::fmt;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;

use crate::error::{Error, Result};
use crate::filtration::{self, FilteredComplex, FiltrationKind};
use crate::graph::{to_directed, to_undirected, EdgeTransform, SymmetryFunction};
use crate::homology::{reduce, PersistenceDiagram};
use crate::tensor_io::{AttentionRecord, StackLayout};

pub const PADDED_SIDE: usize = 50;

/// Piecewise weight functions, one per diagram class.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WeightFunction {
    Constant,
    /// `5·(1 − x)` for `x ≥ 0.8`, else 1.
    LateBirthLinear,
    /// Damps late features and features near the diagonal.
    LateAndDiagonal,
    /// `10·(1 − x)` for `x ≥ 0.9`, else 1.
    VeryLateBirthLinear,
}

impl WeightFunction {
    pub fn for_class(kind: FiltrationKind, dim: usize) -> Result<Self> {
        use FiltrationKind::*;
        match (kind, dim) {
            (Ordinary, 0) | (MultiDim, 0) | (Directed, 0..=2) => Ok(WeightFunction::Constant),
            (Ordinary, 1) => Ok(WeightFunction::LateBirthLinear),
            (MultiDim, 1) => Ok(WeightFunction::LateAndDiagonal),
            (MultiDim, 2) => Ok(WeightFunction::VeryLateBirthLinear),
            _ => Err(Error::invalid(format!("no persistence image class {kind}-{dim}"))),
        }
    }

    pub fn eval(self, x: f64, y: f64) -> f64 {
        match self {
            WeightFunction::Constant => 1.0,
            WeightFunction::LateBirthLinear => {
                if x >= 0.8 {
                    5.0 - 5.0 * x
                } else {
                    1.0
                }
            }
            WeightFunction::LateAndDiagonal => {
                let near_diagonal = (-10.0 * (x - y).abs()).exp();
                let mid = 0.5 * (x + y);
                if mid >= 0.9 {
                    2.0 - mid - near_diagonal
                } else {
                    1.1 - near_diagonal
                }
            }
            WeightFunction::VeryLateBirthLinear => {
                if x >= 0.9 {
                    10.0 - 10.0 * x
                } else {
                    1.0
                }
            }
        }
    }
}

/// Weight of a diagram point `(x, y) = (birth, death)` for the class
/// `(kind, dim)`.
pub fn weight_value(kind: FiltrationKind, dim: usize, point: (f64, f64)) -> Result<f64> {
    Ok(WeightFunction::for_class(kind, dim)?.eval(point.0, point.1))
}

/// How an image is brought to the common per-channel size of its stack.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Standardize {
    None,
    /// Quarter turn of the raster, swapping the birth axis onto rows.
    Rotate45,
    /// Zero padding on the high-index sides up to 50 × 50.
    PadTo50x50,
    /// Rasterize `(birth, death − birth)` instead of `(birth, death)`.
    /// The frame is read in those coordinates.
    BirthPersistence,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImageSpec {
    pub kind: FiltrationKind,
    pub dim: usize,
    pub x_range: (f64, f64),
    pub y_range: (f64, f64),
    /// Pixels along x (birth).
    pub nx: usize,
    /// Pixels along y (death).
    pub ny: usize,
    pub sigma: f64,
    pub weight: WeightFunction,
    pub standardize: Standardize,
}

impl ImageSpec {
    /// The built-in frame, resolution, weight and standardization for one
    /// diagram class, with σ = longest frame side / 20.
    pub fn preset(kind: FiltrationKind, dim: usize) -> Result<Self> {
        use FiltrationKind::*;
        let (x_range, y_range, nx, ny, standardize) = match (kind, dim) {
            (Ordinary, 0) => ((0.0, 0.01), (0.0, 1.0), 5, 50, Standardize::None),
            (Ordinary, 1) => ((0.0, 1.0), (0.99, 1.0), 50, 5, Standardize::Rotate45),
            (MultiDim, 0) => ((0.0, 0.01), (0.0, 1.0), 5, 50, Standardize::PadTo50x50),
            (MultiDim, 1) => ((0.5, 1.0), (0.5, 1.0), 50, 50, Standardize::None),
            (MultiDim, 2) => ((0.7, 1.0), (0.999, 1.0), 50, 5, Standardize::PadTo50x50),
            (Directed, 0..=2) => ((0.0, 0.01), (0.0, 1.0), 30, 30, Standardize::None),
            _ => return Err(Error::invalid(format!("no persistence image class {kind}-{dim}"))),
        };
        let mut spec = ImageSpec {
            kind,
            dim,
            x_range,
            y_range,
            nx,
            ny,
            sigma: 0.0,
            weight: WeightFunction::for_class(kind, dim)?,
            standardize,
        };
        spec.sigma = spec.default_sigma();
        Ok(spec)
    }

    pub fn default_sigma(&self) -> f64 {
        let wx = self.x_range.1 - self.x_range.0;
        let wy = self.y_range.1 - self.y_range.0;
        wx.max(wy) / 20.0
    }

    pub fn with_sigma(mut self, sigma: f64) -> Self {
        self.sigma = sigma;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let ok = self.x_range.1 > self.x_range.0
            && self.y_range.1 > self.y_range.0
            && self.nx > 0
            && self.ny > 0
            && self.sigma.is_finite()
            && self.sigma > 0.0;
        if ok {
            Ok(())
        } else {
            Err(Error::invalid(format!("degenerate image spec {self:?}")))
        }
    }

    /// `(height, width)` after standardization.
    pub fn output_shape(&self) -> (usize, usize) {
        match self.standardize {
            Standardize::None | Standardize::BirthPersistence => (self.ny, self.nx),
            Standardize::Rotate45 => (self.nx, self.ny),
            Standardize::PadTo50x50 => (PADDED_SIDE, PADDED_SIDE),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PersistenceImage {
    pub height: usize,
    pub width: usize,
    pub pixels: Vec<f64>,
}

impl PersistenceImage {
    pub fn zeros(height: usize, width: usize) -> Self {
        PersistenceImage { height, width, pixels: vec![0.0; height * width] }
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.pixels[row * self.width + col]
    }

    pub fn sum(&self) -> f64 {
        self.pixels.iter().sum()
    }
}

fn normal_cdf(z: f64) -> f64 {
    0.5 * erfc(-z / std::f64::consts::SQRT_2)
}

/// Gaussian mass of each of `bins` equal cells of `range` around `center`.
fn cell_masses(center: f64, range: (f64, f64), bins: usize, sigma: f64) -> Vec<f64> {
    let step = (range.1 - range.0) / bins as f64;
    let cdf: Vec<f64> = (0..=bins)
        .map(|k| normal_cdf((range.0 + k as f64 * step - center) / sigma))
        .collect();
    cdf.windows(2).map(|w| w[1] - w[0]).collect()
}

/// Raw `ny × nx` raster of the diagram, before standardization.
pub fn rasterize(diagram: &PersistenceDiagram, spec: &ImageSpec) -> Result<PersistenceImage> {
    spec.validate()?;
    let mut img = PersistenceImage::zeros(spec.ny, spec.nx);
    for &(birth, death) in &diagram.points {
        let w = spec.weight.eval(birth, death);
        if w == 0.0 {
            continue;
        }
        let (x, y) = match spec.standardize {
            Standardize::BirthPersistence => (birth, death - birth),
            _ => (birth, death),
        };
        let mx = cell_masses(x, spec.x_range, spec.nx, spec.sigma);
        let my = cell_masses(y, spec.y_range, spec.ny, spec.sigma);
        for (row, &py) in my.iter().enumerate() {
            let line = &mut img.pixels[row * spec.nx..(row + 1) * spec.nx];
            for (px, &qx) in line.iter_mut().zip(&mx) {
                *px += w * py * qx;
            }
        }
    }
    Ok(img)
}

pub fn standardize(img: &PersistenceImage, rule: Standardize) -> Result<PersistenceImage> {
    match rule {
        Standardize::None | Standardize::BirthPersistence => Ok(img.clone()),
        Standardize::Rotate45 => {
            // counter-clockwise: (row, col) -> (col, height - 1 - row)
            let mut out = PersistenceImage::zeros(img.width, img.height);
            for r in 0..img.height {
                for c in 0..img.width {
                    out.pixels[c * out.width + (img.height - 1 - r)] = img.get(r, c);
                }
            }
            Ok(out)
        }
        Standardize::PadTo50x50 => {
            if img.height > PADDED_SIDE || img.width > PADDED_SIDE {
                return Err(Error::Shape {
                    expected: format!("at most {PADDED_SIDE}×{PADDED_SIDE}"),
                    got: format!("{}×{}", img.height, img.width),
                });
            }
            let mut out = PersistenceImage::zeros(PADDED_SIDE, PADDED_SIDE);
            for r in 0..img.height {
                out.pixels[r * PADDED_SIDE..r * PADDED_SIDE + img.width]
                    .copy_from_slice(&img.pixels[r * img.width..(r + 1) * img.width]);
            }
            Ok(out)
        }
    }
}

/// Rasterize then standardize.
pub fn render(diagram: &PersistenceDiagram, spec: &ImageSpec) -> Result<PersistenceImage> {
    standardize(&rasterize(diagram, spec)?, spec.standardize)
}

/// Graph construction, filtration and image settings for a whole dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Pipeline {
    pub kind: FiltrationKind,
    pub symmetry: SymmetryFunction,
    pub edge_transform: EdgeTransform,
    /// Overrides every image's σ when set.
    pub sigma: Option<f64>,
}

impl Pipeline {
    pub fn new(kind: FiltrationKind, symmetry: SymmetryFunction) -> Self {
        Pipeline { kind, symmetry, edge_transform: EdgeTransform::default(), sigma: None }
    }

    pub fn image_specs(&self) -> Result<Vec<ImageSpec>> {
        (0..self.kind.num_dims())
            .map(|q| {
                let spec = ImageSpec::preset(self.kind, q)?;
                Ok(match self.sigma {
                    Some(s) => spec.with_sigma(s),
                    None => spec,
                })
            })
            .collect()
    }

    pub fn complex(&self, attn: &[f32], n: usize) -> Result<FilteredComplex> {
        Ok(match self.kind {
            FiltrationKind::Ordinary => filtration::ordinary(&to_undirected(attn, n, self.symmetry)?),
            FiltrationKind::MultiDim => filtration::multidim(&to_undirected(attn, n, self.symmetry)?),
            FiltrationKind::Directed => filtration::directed(&to_directed(attn, n, self.edge_transform)?),
        })
    }

    /// Diagrams of one head for dimensions `0..K`.
    pub fn diagrams(&self, record: &AttentionRecord, layer: usize, head: usize) -> Result<Vec<PersistenceDiagram>> {
        let fc = self.complex(record.head(layer, head), record.num_tokens)?;
        reduce(&fc, self.kind.max_dim())
    }
}

impl fmt::Display for Pipeline {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.kind {
            FiltrationKind::Directed => write!(f, "{}/{}", self.kind, self.edge_transform),
            _ => write!(f, "{}/{}", self.kind, self.symmetry),
        }
    }
}

/// Channel index of image `dim` of head `(layer, head)` in a full stack.
pub fn channel_index(layer: usize, head: usize, dim: usize, num_heads: usize, per_head: usize) -> usize {
    (layer * num_heads + head) * per_head + dim
}

/// Inverse of [`channel_index`].
pub fn channel_location(channel: usize, num_heads: usize, per_head: usize) -> (usize, usize, usize) {
    let global = channel / per_head;
    (global / num_heads, global % num_heads, channel % per_head)
}

/// A sentence's persistence images, `per_head` consecutive channels for each
/// head in `heads`.
#[derive(Debug, Clone, PartialEq)]
pub struct ImageStack {
    pub sentence_id: String,
    pub label: u8,
    pub kind: FiltrationKind,
    pub per_head: usize,
    /// Global head indices `layer * num_heads + head`, in channel order.
    pub heads: Vec<usize>,
    pub height: usize,
    pub width: usize,
    data: Vec<f32>,
}

impl ImageStack {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        sentence_id: impl Into<String>,
        label: u8,
        kind: FiltrationKind,
        per_head: usize,
        heads: Vec<usize>,
        height: usize,
        width: usize,
        data: Vec<f32>,
    ) -> Result<Self> {
        let channels = per_head * heads.len();
        if data.len() != channels * height * width {
            return Err(Error::Shape {
                expected: format!("[{channels}, {height}, {width}]"),
                got: format!("{} values", data.len()),
            });
        }
        Ok(ImageStack {
            sentence_id: sentence_id.into(),
            label,
            kind,
            per_head,
            heads,
            height,
            width,
            data,
        })
    }

    pub fn from_layout(sentence_id: &str, label: u8, layout: &StackLayout, data: Vec<f32>) -> Result<Self> {
        let kind = layout.filtration.parse()?;
        let stack = Self::new(
            sentence_id,
            label,
            kind,
            layout.channels_per_head,
            layout.heads.clone(),
            layout.height,
            layout.width,
            data,
        )?;
        if stack.channels() != layout.channels {
            return Err(Error::invalid("layout channel count disagrees with its heads"));
        }
        Ok(stack)
    }

    pub fn layout(&self) -> StackLayout {
        StackLayout {
            channels: self.channels(),
            height: self.height,
            width: self.width,
            channels_per_head: self.per_head,
            heads: self.heads.clone(),
            filtration: self.kind.to_string(),
        }
    }

    pub fn channels(&self) -> usize {
        self.per_head * self.heads.len()
    }

    /// `[C, h, w]`.
    pub fn shape(&self) -> [usize; 3] {
        [self.channels(), self.height, self.width]
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f32] {
        &mut self.data
    }

    pub fn channel(&self, c: usize) -> &[f32] {
        let hw = self.height * self.width;
        &self.data[c * hw..(c + 1) * hw]
    }
}

/// Every head's graph → filtration → diagrams → images, in channel order.
pub fn build_stack(record: &AttentionRecord, pipeline: &Pipeline) -> Result<ImageStack> {
    let specs = pipeline.image_specs()?;
    let (height, width) = specs[0].output_shape();
    if let Some(bad) = specs.iter().find(|s| s.output_shape() != (height, width)) {
        return Err(Error::Shape {
            expected: format!("{height}×{width} images"),
            got: format!("{:?} for {}-{}", bad.output_shape(), bad.kind, bad.dim),
        });
    }
    let num_heads = record.num_layers * record.num_heads;
    let mut data = Vec::with_capacity(num_heads * specs.len() * height * width);
    for layer in 0..record.num_layers {
        for head in 0..record.num_heads {
            let diagrams = pipeline.diagrams(record, layer, head)?;
            for (diagram, spec) in diagrams.iter().zip(&specs) {
                let img = render(diagram, spec)?;
                data.extend(img.pixels.iter().map(|&p| p as f32));
            }
        }
    }
    ImageStack::new(
        &record.sentence_id,
        record.label,
        pipeline.kind,
        specs.len(),
        (0..num_heads).collect(),
        height,
        width,
        data,
    )
}

/// [`build_stack`] over many records on a pool of `jobs` threads; output
/// order follows input order.
pub fn build_stacks(records: &[AttentionRecord], pipeline: &Pipeline, jobs: usize) -> Result<Vec<ImageStack>> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| Error::invalid(format!("cannot start worker pool: {e}")))?;
    pool.install(|| records.par_iter().map(|r| build_stack(r, pipeline)).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit_spec(center: (f64, f64), sigma: f64, n: usize) -> ImageSpec {
        ImageSpec {
            kind: FiltrationKind::Ordinary,
            dim: 0,
            x_range: (center.0 - 5.0 * sigma, center.0 + 5.0 * sigma),
            y_range: (center.1 - 5.0 * sigma, center.1 + 5.0 * sigma),
            nx: n,
            ny: n,
            sigma,
            weight: WeightFunction::Constant,
            standardize: Standardize::None,
        }
    }

    #[test]
    fn table_weights() {
        use FiltrationKind::*;
        assert!((weight_value(Ordinary, 1, (0.9, 1.0)).unwrap() - 0.5).abs() < 1e-12);
        assert_eq!(weight_value(Ordinary, 1, (0.5, 1.0)).unwrap(), 1.0);
        assert!((weight_value(MultiDim, 2, (0.95, 1.0)).unwrap() - 0.5).abs() < 1e-12);
        assert_eq!(weight_value(Ordinary, 0, (0.0, 0.3)).unwrap(), 1.0);
        assert_eq!(weight_value(Directed, 2, (0.4, 0.6)).unwrap(), 1.0);
        assert!(weight_value(Ordinary, 2, (0.0, 0.3)).is_err());
        // 1.1 - e^0 on the diagonal, 2 - 0.95 - e^-1 late and away from it
        assert!((weight_value(MultiDim, 1, (0.6, 0.6)).unwrap() - 0.1).abs() < 1e-12);
        let late = weight_value(MultiDim, 1, (0.9, 1.0)).unwrap();
        assert!((late - (2.0 - 0.95 - (-1.0f64).exp())).abs() < 1e-12);
    }

    #[test]
    fn presets_follow_table() {
        use FiltrationKind::*;
        let o0 = ImageSpec::preset(Ordinary, 0).unwrap();
        assert_eq!((o0.x_range, o0.y_range, o0.nx, o0.ny), ((0.0, 0.01), (0.0, 1.0), 5, 50));
        let m1 = ImageSpec::preset(MultiDim, 1).unwrap();
        assert_eq!((m1.x_range, m1.y_range, m1.nx, m1.ny), ((0.5, 1.0), (0.5, 1.0), 50, 50));
        for q in 0..3 {
            let d = ImageSpec::preset(Directed, q).unwrap();
            assert_eq!((d.x_range, d.y_range, d.nx, d.ny), ((0.0, 0.01), (0.0, 1.0), 30, 30));
        }
        let o1 = ImageSpec::preset(Ordinary, 1).unwrap();
        assert_eq!((o1.x_range, o1.y_range, o1.nx, o1.ny), ((0.0, 1.0), (0.99, 1.0), 50, 5));
        let m2 = ImageSpec::preset(MultiDim, 2).unwrap();
        assert_eq!((m2.x_range, m2.y_range, m2.nx, m2.ny), ((0.7, 1.0), (0.999, 1.0), 50, 5));
        assert_eq!(o1.sigma, 0.05);
    }

    #[test]
    fn uniform_shapes_per_kind() {
        use FiltrationKind::*;
        let shapes = |k: FiltrationKind| -> Vec<(usize, usize)> {
            (0..k.num_dims()).map(|q| ImageSpec::preset(k, q).unwrap().output_shape()).collect()
        };
        assert_eq!(shapes(Ordinary), vec![(50, 5); 2]);
        assert_eq!(shapes(MultiDim), vec![(50, 50); 3]);
        assert_eq!(shapes(Directed), vec![(30, 30); 3]);
    }

    #[test]
    fn empty_diagram_gives_zero_image() {
        let spec = ImageSpec::preset(FiltrationKind::MultiDim, 1).unwrap();
        let img = rasterize(&PersistenceDiagram::empty(1), &spec).unwrap();
        assert!(img.pixels.iter().all(|&p| p == 0.0));
    }

    #[test]
    fn mass_is_conserved() {
        let spec = unit_spec((0.4, 0.6), 0.03, 40);
        let img = rasterize(&PersistenceDiagram::new(0, vec![(0.4, 0.6)]), &spec).unwrap();
        assert!((img.sum() - 1.0).abs() < 1e-3);
    }

    #[test]
    fn coincident_points_double() {
        let spec = ImageSpec::preset(FiltrationKind::MultiDim, 1).unwrap();
        let one = rasterize(&PersistenceDiagram::new(1, vec![(0.7, 0.8)]), &spec).unwrap();
        let two = rasterize(&PersistenceDiagram::new(1, vec![(0.7, 0.8); 2]), &spec).unwrap();
        for (a, b) in one.pixels.iter().zip(&two.pixels) {
            assert_eq!(2.0 * a, *b);
        }
    }

    #[test]
    fn padding_keeps_corner() {
        let spec = ImageSpec::preset(FiltrationKind::MultiDim, 0).unwrap();
        let raw = rasterize(&PersistenceDiagram::new(0, vec![(0.0, 0.3), (0.0, 1.0)]), &spec).unwrap();
        assert_eq!((raw.height, raw.width), (50, 5));
        let padded = standardize(&raw, Standardize::PadTo50x50).unwrap();
        assert_eq!((padded.height, padded.width), (50, 50));
        for r in 0..50 {
            for c in 0..50 {
                let expected = if c < 5 { raw.get(r, c) } else { 0.0 };
                assert_eq!(padded.get(r, c), expected);
            }
        }
        let too_big = PersistenceImage::zeros(51, 3);
        assert!(standardize(&too_big, Standardize::PadTo50x50).is_err());
    }

    #[test]
    fn none_rule_is_identity() {
        let img = PersistenceImage { height: 2, width: 2, pixels: vec![1.0, 2.0, 3.0, 4.0] };
        assert_eq!(standardize(&img, Standardize::None).unwrap(), img);
    }

    #[test]
    fn quarter_turn() {
        // rows are y (bottom first), columns x
        let img = PersistenceImage { height: 2, width: 3, pixels: vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0] };
        let r = standardize(&img, Standardize::Rotate45).unwrap();
        assert_eq!((r.height, r.width), (3, 2));
        assert_eq!(r.pixels, vec![4.0, 1.0, 5.0, 2.0, 6.0, 3.0]);
    }

    #[test]
    fn birth_persistence_shear() {
        // (0.3, 1.0) lands at (0.3, 0.7) in birth/persistence coordinates
        let mut spec = unit_spec((0.3, 0.7), 0.02, 21);
        spec.standardize = Standardize::BirthPersistence;
        let img = rasterize(&PersistenceDiagram::new(1, vec![(0.3, 1.0)]), &spec).unwrap();
        let peak = img
            .pixels
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(b.1))
            .unwrap()
            .0;
        assert_eq!((peak / 21, peak % 21), (10, 10));
        assert!((img.sum() - 1.0).abs() < 1e-3);
    }

    #[test]
    fn channel_index_round_trip() {
        for per_head in [2, 3] {
            let mut seen = vec![false; 144 * per_head];
            for layer in 0..12 {
                for head in 0..12 {
                    for q in 0..per_head {
                        let c = channel_index(layer, head, q, 12, per_head);
                        assert!(!seen[c]);
                        seen[c] = true;
                        assert_eq!(channel_location(c, 12, per_head), (layer, head, q));
                    }
                }
            }
            assert!(seen.iter().all(|&s| s));
        }
    }

    #[test]
    fn two_token_sentence_has_empty_h1_channels() {
        let record = AttentionRecord::new("s", 0, 1, 2, 2, vec![0.8, 0.2, 0.4, 0.6, 0.5, 0.5, 0.1, 0.9]).unwrap();
        let stack = build_stack(&record, &Pipeline::new(FiltrationKind::Ordinary, SymmetryFunction::Max)).unwrap();
        assert_eq!(stack.shape(), [4, 50, 5]);
        assert!(stack.channel(1).iter().all(|&p| p == 0.0));
        assert!(stack.channel(3).iter().all(|&p| p == 0.0));
        assert!(stack.channel(0).iter().any(|&p| p > 0.0));
    }
}
