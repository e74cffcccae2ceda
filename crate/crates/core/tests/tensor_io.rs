use std::fs;

use attn_topo::filtration::FiltrationKind;
use attn_topo::graph::SymmetryFunction;
use attn_topo::image::{build_stacks, Pipeline};
use attn_topo::synthetic::{generate, pattern_matrix, perturb, Pattern, SyntheticConfig};
use attn_topo::tensor_io::{
    read_dataset, read_paired, read_paired_stacks, read_stack_dataset, write_dataset, write_stack_dataset,
    AttentionRecord, DatasetManifest, Split,
};
use attn_topo::Error;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn small_records(count: usize, seed: u64) -> Vec<AttentionRecord> {
    let cfg = SyntheticConfig {
        num_layers: 2,
        num_heads: 3,
        ..SyntheticConfig::standard(count, seed)
    };
    generate(&cfg).unwrap()
}

#[test]
fn round_trip_keeps_manifest_order() {
    let dir = tempfile::tempdir().unwrap();
    let records = small_records(3, 1);
    let manifest = write_dataset(dir.path(), DatasetManifest::new("toy", Split::Train, 2, 3), &records).unwrap();
    assert_eq!(read_dataset(&manifest).unwrap(), records);
    assert_eq!(read_dataset(dir.path()).unwrap(), records);
}

#[test]
fn truncated_file_reports_byte_length() {
    let dir = tempfile::tempdir().unwrap();
    let records = small_records(3, 2);
    let manifest = write_dataset(dir.path(), DatasetManifest::new("toy", Split::Train, 2, 3), &records).unwrap();
    let victim = dir.path().join(format!("{}.attn", records[1].sentence_id));
    let bytes = fs::read(&victim).unwrap();
    fs::write(&victim, &bytes[..bytes.len() - 4]).unwrap();
    match read_dataset(&manifest) {
        Err(Error::ByteLength { expected, found, .. }) => assert_eq!(expected, found + 4),
        other => panic!("expected a byte-length error, got {other:?}"),
    }
}

#[test]
fn long_sentence_loads() {
    let dir = tempfile::tempdir().unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let heads: Vec<Vec<f32>> = (0..4).map(|_| pattern_matrix(Pattern::Diffuse, 47, &mut rng)).collect();
    let record = AttentionRecord::from_heads("long", 1, 2, 2, &heads).unwrap();
    let manifest = write_dataset(dir.path(), DatasetManifest::new("long", Split::Prediction, 2, 2), std::slice::from_ref(&record)).unwrap();
    let back = read_dataset(&manifest).unwrap();
    assert_eq!(back[0].num_tokens, 47);
    assert_eq!(back[0], record);
}

#[test]
fn writer_rejects_invalid_rows() {
    let dir = tempfile::tempdir().unwrap();
    let mut record = small_records(1, 4).remove(0);
    record.data_mut()[0] += 0.1;
    let err = write_dataset(dir.path(), DatasetManifest::new("bad", Split::Train, 2, 3), &[record]).unwrap_err();
    assert!(matches!(err, Error::Validation { .. }), "{err}");
}

#[test]
fn stack_datasets_and_pairs() {
    let root = tempfile::tempdir().unwrap();
    let records = small_records(4, 5);
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let attacked: Vec<_> = records.iter().map(|r| perturb(r, 0.01, &mut rng)).collect();
    let before_dir = root.path().join("before");
    let after_dir = root.path().join("after");
    write_dataset(&before_dir, DatasetManifest::new("orig", Split::Prediction, 2, 3), &records).unwrap();
    let mut after_manifest = DatasetManifest::new("attacked", Split::Prediction, 2, 3);
    after_manifest.pair_of = Some("orig".into());
    write_dataset(&after_dir, after_manifest, &attacked).unwrap();
    let pairs = read_paired(&before_dir, &after_dir).unwrap();
    assert_eq!(pairs.len(), 4);
    assert!(pairs.iter().all(|p| p.before.sentence_id == p.after.sentence_id));

    let pipeline = Pipeline::new(FiltrationKind::Ordinary, SymmetryFunction::Max);
    let tokens: Vec<usize> = records.iter().map(|r| r.num_tokens).collect();
    let mut stack_manifests = Vec::new();
    for (name, pair_of, recs) in [("orig-pi", None, &records), ("attacked-pi", Some("orig-pi"), &attacked)] {
        let stacks = build_stacks(recs, &pipeline, 1).unwrap();
        let mut m = DatasetManifest::new(name, Split::Prediction, 2, 3);
        m.pair_of = pair_of.map(String::from);
        let dir = root.path().join(name);
        stack_manifests.push(write_stack_dataset(&dir, m, &stacks, &tokens).unwrap());
        let (manifest, back) = read_stack_dataset(&dir).unwrap();
        assert_eq!(back, stacks);
        assert_eq!(manifest.stack.unwrap().channels, 12);
    }
    let stack_pairs = read_paired_stacks(&stack_manifests[0], &stack_manifests[1]).unwrap();
    assert_eq!(stack_pairs.len(), 4);
    assert!(read_paired_stacks(&stack_manifests[1], &stack_manifests[0]).is_err());
}
