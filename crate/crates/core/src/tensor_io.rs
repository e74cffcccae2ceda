//! Neutral on-disk format for attention datasets, image-stack datasets and
//! paired (before/after attack) datasets.
//!
//! A dataset is a directory holding `manifest.json` and one raw file per
//! sentence. Attention tensors are stored as `<sentence_id>.attn`, image
//! stacks as `<sentence_id>.pimg`; both are little-endian `f32` in row-major
//! order with no header. Shapes live in the manifest.

use std::collections::{HashMap, HashSet};
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::ImageStack;

pub const MANIFEST_FILE: &str = "manifest.json";
pub const DEFAULT_MAX_TOKENS: usize = 128;
pub const ROW_SUM_TOLERANCE: f64 = 1e-4;

/// One sentence's attention tensor, laid out `[layer][head][row][col]`.
#[derive(Debug, Clone, PartialEq)]
pub struct AttentionRecord {
    pub sentence_id: String,
    pub label: u8,
    pub num_tokens: usize,
    pub num_layers: usize,
    pub num_heads: usize,
    data: Vec<f32>,
}

impl AttentionRecord {
    pub fn new(
        sentence_id: impl Into<String>,
        label: u8,
        num_layers: usize,
        num_heads: usize,
        num_tokens: usize,
        data: Vec<f32>,
    ) -> Result<Self> {
        let expected = num_layers * num_heads * num_tokens * num_tokens;
        if data.len() != expected {
            return Err(Error::Shape {
                expected: format!("[{num_layers}, {num_heads}, {num_tokens}, {num_tokens}] ({expected} values)"),
                got: format!("{} values", data.len()),
            });
        }
        Ok(AttentionRecord {
            sentence_id: sentence_id.into(),
            label,
            num_tokens,
            num_layers,
            num_heads,
            data,
        })
    }

    /// Builds a record from per-head matrices given in `(layer, head)` order.
    pub fn from_heads(
        sentence_id: impl Into<String>,
        label: u8,
        num_layers: usize,
        num_heads: usize,
        heads: &[Vec<f32>],
    ) -> Result<Self> {
        let first = heads
            .first()
            .ok_or_else(|| Error::invalid("record needs at least one head"))?;
        let n = (first.len() as f64).sqrt() as usize;
        if n * n != first.len() {
            return Err(Error::invalid("head matrix is not square"));
        }
        let data: Vec<f32> = heads.iter().flatten().copied().collect();
        Self::new(sentence_id, label, num_layers, num_heads, n, data)
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f32] {
        &mut self.data
    }

    /// The `n × n` attention matrix of one head, row-major.
    pub fn head(&self, layer: usize, head: usize) -> &[f32] {
        let nn = self.num_tokens * self.num_tokens;
        let start = (layer * self.num_heads + head) * nn;
        &self.data[start..start + nn]
    }

    pub fn byte_len(&self) -> u64 {
        4 * self.data.len() as u64
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    NonFinite { layer: usize, head: usize, row: usize, col: usize },
    Negative { layer: usize, head: usize, row: usize, col: usize, value: f32 },
    RowSum { layer: usize, head: usize, row: usize, sum: f64 },
    TooManyTokens { num_tokens: usize, max: usize },
    TooFewTokens { num_tokens: usize },
    Label { label: u8 },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::NonFinite { layer, head, row, col } => {
                write!(f, "non-finite entry at layer {layer}, head {head}, row {row}, col {col}")
            }
            Violation::Negative { layer, head, row, col, value } => write!(
                f,
                "negative entry {value} at layer {layer}, head {head}, row {row}, col {col}"
            ),
            Violation::RowSum { layer, head, row, sum } => write!(
                f,
                "row sum {sum} (off by {:.3e}) at layer {layer}, head {head}, row {row}",
                (sum - 1.0).abs()
            ),
            Violation::TooManyTokens { num_tokens, max } => {
                write!(f, "{num_tokens} tokens exceeds the maximum of {max}")
            }
            Violation::TooFewTokens { num_tokens } => {
                write!(f, "{num_tokens} tokens, need at least 2")
            }
            Violation::Label { label } => write!(f, "label {label} is not 0 or 1"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ValidationOptions {
    pub row_sum_tolerance: f64,
    pub max_tokens: usize,
}

impl Default for ValidationOptions {
    fn default() -> Self {
        ValidationOptions {
            row_sum_tolerance: ROW_SUM_TOLERANCE,
            max_tokens: DEFAULT_MAX_TOKENS,
        }
    }
}

/// Lists every broken invariant of `record`; an empty list means valid.
pub fn validate_record(record: &AttentionRecord, opts: &ValidationOptions) -> Vec<Violation> {
    let mut out = Vec::new();
    let n = record.num_tokens;
    if record.label > 1 {
        out.push(Violation::Label { label: record.label });
    }
    if n < 2 {
        out.push(Violation::TooFewTokens { num_tokens: n });
    }
    if n > opts.max_tokens {
        out.push(Violation::TooManyTokens { num_tokens: n, max: opts.max_tokens });
    }
    for layer in 0..record.num_layers {
        for head in 0..record.num_heads {
            let m = record.head(layer, head);
            for (row, values) in m.chunks_exact(n.max(1)).enumerate() {
                let mut sum = 0.0f64;
                let mut finite = true;
                for (col, &v) in values.iter().enumerate() {
                    if !v.is_finite() {
                        out.push(Violation::NonFinite { layer, head, row, col });
                        finite = false;
                    } else if v < 0.0 {
                        out.push(Violation::Negative { layer, head, row, col, value: v });
                    }
                    sum += v as f64;
                }
                if finite && (sum - 1.0).abs() > opts.row_sum_tolerance {
                    out.push(Violation::RowSum { layer, head, row, sum });
                }
            }
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Validation,
    Prediction,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DatasetKind {
    #[default]
    Attention,
    ImageStack,
}

/// Channel layout of an image-stack dataset.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StackLayout {
    pub channels: usize,
    pub height: usize,
    pub width: usize,
    /// Images per head (one per homology dimension).
    pub channels_per_head: usize,
    /// Global head indices `layer * num_heads + head`, in channel order.
    pub heads: Vec<usize>,
    pub filtration: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestRecord {
    pub sentence_id: String,
    pub label: u8,
    pub num_tokens: usize,
    /// Relative to the manifest's directory.
    pub path: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub name: String,
    #[serde(default)]
    pub kind: DatasetKind,
    pub num_layers: usize,
    pub num_heads: usize,
    pub split: Split,
    #[serde(default = "default_indexing")]
    pub indexing: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_tokens: Option<usize>,
    /// Name of the dataset this one is the attacked counterpart of.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pair_of: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stack: Option<StackLayout>,
    pub records: Vec<ManifestRecord>,
}

fn default_indexing() -> String {
    "zero-based".to_string()
}

impl DatasetManifest {
    pub fn new(name: impl Into<String>, split: Split, num_layers: usize, num_heads: usize) -> Self {
        DatasetManifest {
            name: name.into(),
            kind: DatasetKind::Attention,
            num_layers,
            num_heads,
            split,
            indexing: default_indexing(),
            max_tokens: None,
            pair_of: None,
            stack: None,
            records: Vec::new(),
        }
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|source| Error::Json {
            path: path.to_path_buf(),
            source,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self).map_err(|source| Error::Json {
            path: path.to_path_buf(),
            source,
        })?;
        fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    fn check_unique_ids(&self) -> Result<()> {
        let mut seen = HashSet::new();
        for r in &self.records {
            if !seen.insert(r.sentence_id.as_str()) {
                return Err(Error::invalid(format!(
                    "duplicate sentence_id {:?} in manifest {}",
                    r.sentence_id, self.name
                )));
            }
        }
        Ok(())
    }
}

/// Resolves the manifest path: accepts either the file or its directory.
pub fn manifest_path(path: &Path) -> PathBuf {
    if path.is_dir() {
        path.join(MANIFEST_FILE)
    } else {
        path.to_path_buf()
    }
}

fn encode_f32(values: &[f32]) -> Vec<u8> {
    let mut bytes = Vec::with_capacity(values.len() * 4);
    for v in values {
        bytes.extend_from_slice(&v.to_le_bytes());
    }
    bytes
}

fn read_f32_file(path: &Path, expected_len: usize) -> Result<Vec<f32>> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let expected = 4 * expected_len as u64;
    if bytes.len() as u64 != expected {
        return Err(Error::ByteLength {
            path: path.to_path_buf(),
            expected,
            found: bytes.len() as u64,
        });
    }
    Ok(bytes
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
        .collect())
}

fn check_file_name(id: &str) -> Result<()> {
    if id.is_empty() || id.contains(['/', '\\']) || id == "." || id == ".." {
        return Err(Error::invalid(format!("sentence_id {id:?} is not usable as a file name")));
    }
    Ok(())
}

/// Writes `<sentence_id>.attn` into `dir` after validating the record.
pub fn write_record(record: &AttentionRecord, dir: &Path, opts: &ValidationOptions) -> Result<PathBuf> {
    let violations = validate_record(record, opts);
    if !violations.is_empty() {
        return Err(Error::Validation {
            sentence_id: record.sentence_id.clone(),
            violations,
        });
    }
    check_file_name(&record.sentence_id)?;
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let path = dir.join(format!("{}.attn", record.sentence_id));
    fs::write(&path, encode_f32(record.data())).map_err(|e| Error::io(&path, e))?;
    Ok(path)
}

/// Single-writer builder for an attention dataset directory.
pub struct DatasetWriter {
    dir: PathBuf,
    manifest: DatasetManifest,
    opts: ValidationOptions,
}

impl DatasetWriter {
    pub fn create(dir: impl Into<PathBuf>, manifest: DatasetManifest, opts: ValidationOptions) -> Result<Self> {
        let dir = dir.into();
        fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
        Ok(DatasetWriter { dir, manifest, opts })
    }

    pub fn write_record(&mut self, record: &AttentionRecord) -> Result<PathBuf> {
        if record.num_layers != self.manifest.num_layers || record.num_heads != self.manifest.num_heads {
            return Err(Error::Shape {
                expected: format!("{} layers × {} heads", self.manifest.num_layers, self.manifest.num_heads),
                got: format!("{} layers × {} heads", record.num_layers, record.num_heads),
            });
        }
        let path = write_record(record, &self.dir, &self.opts)?;
        self.manifest.records.push(ManifestRecord {
            sentence_id: record.sentence_id.clone(),
            label: record.label,
            num_tokens: record.num_tokens,
            path: format!("{}.attn", record.sentence_id),
        });
        Ok(path)
    }

    /// Writes `manifest.json` and returns its path.
    pub fn finish(mut self) -> Result<PathBuf> {
        self.manifest.check_unique_ids()?;
        if self.manifest.max_tokens.is_none() {
            self.manifest.max_tokens = Some(self.opts.max_tokens);
        }
        let path = self.dir.join(MANIFEST_FILE);
        self.manifest.save(&path)?;
        Ok(path)
    }
}

/// Writes a whole attention dataset in one call.
pub fn write_dataset(dir: &Path, manifest: DatasetManifest, records: &[AttentionRecord]) -> Result<PathBuf> {
    let opts = ValidationOptions {
        max_tokens: manifest.max_tokens.unwrap_or(DEFAULT_MAX_TOKENS),
        ..Default::default()
    };
    let mut writer = DatasetWriter::create(dir, manifest, opts)?;
    for r in records {
        writer.write_record(r)?;
    }
    writer.finish()
}

pub fn read_dataset(manifest: &Path) -> Result<Vec<AttentionRecord>> {
    read_dataset_with(manifest, None)
}

/// Loads and validates every record, in manifest order. `opts` defaults to
/// the manifest's `max_tokens` and the standard row-sum tolerance.
pub fn read_dataset_with(manifest: &Path, opts: Option<ValidationOptions>) -> Result<Vec<AttentionRecord>> {
    let path = manifest_path(manifest);
    let m = DatasetManifest::load(&path)?;
    if m.kind != DatasetKind::Attention {
        return Err(Error::invalid(format!("{} is not an attention dataset", path.display())));
    }
    m.check_unique_ids()?;
    let opts = opts.unwrap_or(ValidationOptions {
        max_tokens: m.max_tokens.unwrap_or(DEFAULT_MAX_TOKENS),
        ..Default::default()
    });
    let base = path.parent().unwrap_or(Path::new("."));
    m.records
        .iter()
        .map(|entry| {
            let n = entry.num_tokens;
            let data = read_f32_file(&base.join(&entry.path), m.num_layers * m.num_heads * n * n)?;
            let record = AttentionRecord::new(&entry.sentence_id, entry.label, m.num_layers, m.num_heads, n, data)?;
            let violations = validate_record(&record, &opts);
            if violations.is_empty() {
                Ok(record)
            } else {
                Err(Error::Validation {
                    sentence_id: entry.sentence_id.clone(),
                    violations,
                })
            }
        })
        .collect()
}

/// Writes an image-stack dataset. All stacks must share one channel layout.
pub fn write_stack_dataset(
    dir: &Path,
    mut manifest: DatasetManifest,
    stacks: &[ImageStack],
    num_tokens: &[usize],
) -> Result<PathBuf> {
    let first = stacks
        .first()
        .ok_or_else(|| Error::invalid("cannot write an empty image-stack dataset"))?;
    if num_tokens.len() != stacks.len() {
        return Err(Error::invalid("one token count per stack is required"));
    }
    let layout = first.layout();
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    manifest.kind = DatasetKind::ImageStack;
    manifest.records.clear();
    for (stack, &n) in stacks.iter().zip(num_tokens) {
        if stack.layout() != layout {
            return Err(Error::Shape {
                expected: format!("{layout:?}"),
                got: format!("{:?}", stack.layout()),
            });
        }
        check_file_name(&stack.sentence_id)?;
        let file = format!("{}.pimg", stack.sentence_id);
        let path = dir.join(&file);
        fs::write(&path, encode_f32(stack.data())).map_err(|e| Error::io(&path, e))?;
        manifest.records.push(ManifestRecord {
            sentence_id: stack.sentence_id.clone(),
            label: stack.label,
            num_tokens: n,
            path: file,
        });
    }
    manifest.check_unique_ids()?;
    manifest.stack = Some(layout);
    let path = dir.join(MANIFEST_FILE);
    manifest.save(&path)?;
    Ok(path)
}

pub fn read_stack_dataset(manifest: &Path) -> Result<(DatasetManifest, Vec<ImageStack>)> {
    let path = manifest_path(manifest);
    let m = DatasetManifest::load(&path)?;
    let layout = match (&m.kind, &m.stack) {
        (DatasetKind::ImageStack, Some(layout)) => layout.clone(),
        _ => {
            return Err(Error::invalid(format!(
                "{} is not an image-stack dataset",
                path.display()
            )))
        }
    };
    if layout.channels != layout.channels_per_head * layout.heads.len() {
        return Err(Error::invalid(format!(
            "layout declares {} channels but {} heads × {} images",
            layout.channels,
            layout.heads.len(),
            layout.channels_per_head
        )));
    }
    m.check_unique_ids()?;
    let base = path.parent().unwrap_or(Path::new("."));
    let stacks = m
        .records
        .iter()
        .map(|entry| {
            let data = read_f32_file(
                &base.join(&entry.path),
                layout.channels * layout.height * layout.width,
            )?;
            ImageStack::from_layout(&entry.sentence_id, entry.label, &layout, data)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((m, stacks))
}

/// A sentence before and after an adversarial rewrite.
#[derive(Debug, Clone, PartialEq)]
pub struct Paired<T> {
    pub before: T,
    pub after: T,
}

pub type PairedRecord = Paired<AttentionRecord>;

/// Links the records of an attacked dataset (whose manifest names the
/// original in `pair_of`) to the originals by shared `sentence_id`.
/// A dataset also pairs with itself. Pairs come out in the order of the
/// `after` manifest.
pub fn pair_up<T>(
    before_manifest: &DatasetManifest,
    before: Vec<T>,
    after_manifest: &DatasetManifest,
    after: Vec<T>,
    label_of: impl Fn(&T) -> u8,
) -> Result<Vec<Paired<T>>> {
    match &after_manifest.pair_of {
        Some(name) if *name == before_manifest.name => {}
        _ if after_manifest == before_manifest => {}
        other => {
            return Err(Error::invalid(format!(
                "dataset {} has pair_of {:?}, expected {:?}",
                after_manifest.name, other, before_manifest.name
            )))
        }
    }
    if before.len() != after.len() {
        return Err(Error::invalid(format!(
            "paired datasets differ in size: {} before, {} after",
            before.len(),
            after.len()
        )));
    }
    let mut by_id: HashMap<&str, T> = before_manifest
        .records
        .iter()
        .map(|r| r.sentence_id.as_str())
        .zip(before)
        .collect();
    after_manifest
        .records
        .iter()
        .zip(after)
        .map(|(entry, after)| {
            let before = by_id.remove(entry.sentence_id.as_str()).ok_or_else(|| {
                Error::invalid(format!("no original for attacked sentence {:?}", entry.sentence_id))
            })?;
            if label_of(&before) != label_of(&after) {
                return Err(Error::invalid(format!(
                    "labels differ across the pair {:?}",
                    entry.sentence_id
                )));
            }
            Ok(Paired { before, after })
        })
        .collect()
}

pub fn read_paired(before: &Path, after: &Path) -> Result<Vec<PairedRecord>> {
    let bm = DatasetManifest::load(&manifest_path(before))?;
    let am = DatasetManifest::load(&manifest_path(after))?;
    let b = read_dataset(before)?;
    let a = read_dataset(after)?;
    pair_up(&bm, b, &am, a, |r| r.label)
}

pub fn read_paired_stacks(before: &Path, after: &Path) -> Result<Vec<Paired<ImageStack>>> {
    let (bm, b) = read_stack_dataset(before)?;
    let (am, a) = read_stack_dataset(after)?;
    pair_up(&bm, b, &am, a, |s| s.label)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny(id: &str, m: [f32; 4]) -> AttentionRecord {
        AttentionRecord::new(id, 1, 1, 1, 2, m.to_vec()).unwrap()
    }

    #[test]
    fn two_token_record_is_sixteen_bytes() {
        let dir = tempfile::tempdir().unwrap();
        let r = tiny("s0", [0.9, 0.1, 0.3, 0.7]);
        let path = write_record(&r, dir.path(), &ValidationOptions::default()).unwrap();
        assert_eq!(fs::metadata(&path).unwrap().len(), 16);
        assert_eq!(path.file_name().unwrap(), "s0.attn");
    }

    #[test]
    fn short_row_is_rejected_with_location() {
        let dir = tempfile::tempdir().unwrap();
        let r = tiny("bad", [0.9, 0.1, 0.2, 0.7]);
        let err = write_record(&r, dir.path(), &ValidationOptions::default()).unwrap_err();
        match err {
            Error::Validation { violations, .. } => {
                assert_eq!(violations.len(), 1);
                assert!(matches!(
                    violations[0],
                    Violation::RowSum { layer: 0, head: 0, row: 1, .. }
                ));
            }
            other => panic!("unexpected {other}"),
        }
    }

    #[test]
    fn one_hot_rows_validate() {
        let r = tiny("ok", [1.0, 0.0, 0.0, 1.0]);
        assert!(validate_record(&r, &ValidationOptions::default()).is_empty());
    }

    #[test]
    fn negative_entry_is_one_violation() {
        let r = tiny("neg", [1.1, -0.1, 0.5, 0.5]);
        let v = validate_record(&r, &ValidationOptions::default());
        assert_eq!(v.len(), 1);
        assert!(matches!(v[0], Violation::Negative { row: 0, col: 1, .. }));
    }

    #[test]
    fn row_sum_within_tolerance_passes() {
        let r = tiny("tol", [0.50005, 0.5, 0.5, 0.5]);
        assert!(validate_record(&r, &ValidationOptions::default()).is_empty());
    }

    #[test]
    fn too_long_and_too_short() {
        let opts = ValidationOptions { max_tokens: 1, ..Default::default() };
        let v = validate_record(&tiny("x", [0.5; 4]), &opts);
        assert_eq!(v, vec![Violation::TooManyTokens { num_tokens: 2, max: 1 }]);
        let one = AttentionRecord::new("y", 0, 1, 1, 1, vec![1.0]).unwrap();
        assert_eq!(
            validate_record(&one, &ValidationOptions::default()),
            vec![Violation::TooFewTokens { num_tokens: 1 }]
        );
    }

    #[test]
    fn duplicate_ids_are_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let m = DatasetManifest::new("d", Split::Train, 1, 1);
        let r = tiny("same", [0.5; 4]);
        assert!(write_dataset(dir.path(), m, &[r.clone(), r]).is_err());
    }

    #[test]
    fn pairing_requires_link_and_equal_labels() {
        let before = DatasetManifest {
            records: vec![ManifestRecord {
                sentence_id: "a".into(),
                label: 1,
                num_tokens: 2,
                path: "a.attn".into(),
            }],
            ..DatasetManifest::new("orig", Split::Prediction, 1, 1)
        };
        let mut after = DatasetManifest { name: "adv".into(), ..before.clone() };
        assert!(pair_up(&before, vec![1u8], &after, vec![1u8], |x| *x).is_err());
        after.pair_of = Some("orig".into());
        assert_eq!(pair_up(&before, vec![1u8], &after, vec![1u8], |x| *x).unwrap().len(), 1);
        assert!(pair_up(&before, vec![1u8], &after, vec![0u8], |x| *x).is_err());
        assert_eq!(pair_up(&before, vec![1u8], &before, vec![1u8], |x| *x).unwrap().len(), 1);
    }
}
