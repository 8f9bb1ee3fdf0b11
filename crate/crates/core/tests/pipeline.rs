use std::path::Path;

use music_auditor::auditor::Checkpoint;
use music_auditor::config::ExperimentConfig;
use music_auditor::embeddings::{
    write_tensor_file, Aggregation, DatasetManifest, EmbeddingForm, EmbeddingStore,
    ManifestRecord, RawEncoderOutput, Role,
};
use music_auditor::evaluation::{EvalReport, Protocol};
use music_auditor::numerics::RngState;
use music_auditor::pipeline::{self, IngestOutcome, CHECKPOINT_FILE, TRAINING_LOG_FILE};
use music_auditor::ErrorKind;

fn small_config(root: &Path, pairs: usize) -> ExperimentConfig {
    let mut config = ExperimentConfig::default();
    config.synth.pairs = pairs;
    config.paths.output = root.join("data");
    pipeline::synthesize(&config).unwrap();
    config.paths.data = root.join("data");
    config.paths.output = root.join("out");
    config
}

/// Manifest of `n` pairs per class for one generator, plus one raw
/// hidden-state tensor per item.
fn layered_fixture(dir: &Path, n: usize, layers: usize, dim: usize) {
    let tensors = dir.join("raw");
    std::fs::create_dir_all(&tensors).unwrap();
    let mut rng = RngState::new(44);
    let mut records = Vec::new();
    for (orig, gen, tag) in [(Role::Member, Role::GenMember, "m"), (Role::Nonmember, Role::GenNonmember, "n")] {
        for i in 0..n {
            for role in [orig, gen] {
                let item_id = format!("{tag}{i}-{role}");
                let frames = 3 + rng.below(20);
                let values = (0..layers * frames * dim).map(|_| rng.normal()).collect();
                let raw = RawEncoderOutput::layered(layers, frames, dim, values).unwrap();
                write_tensor_file(tensors.join(format!("{item_id}.maud")), &raw).unwrap();
                records.push(ManifestRecord {
                    item_id,
                    generator_id: "gen-x".into(),
                    role,
                    pair_id: format!("{tag}{i}"),
                    source_path: String::new(),
                    duration_s: 30.0,
                    caption: Some("slow piano".into()),
                });
            }
        }
    }
    DatasetManifest::new(records).save(dir.join("manifest.json")).unwrap();
}

#[test]
fn mean_over_time_ingest_produces_layer_maps() {
    let dir = tempfile::tempdir().unwrap();
    layered_fixture(dir.path(), 6, 3, 5);
    let outcome = pipeline::ingest(
        &dir.path().join("manifest.json"),
        &dir.path().join("raw"),
        Aggregation::MeanOverTime,
        "mert",
        &dir.path().join("store"),
    )
    .unwrap();
    let IngestOutcome::Written(report) = outcome else {
        panic!("ingest failed")
    };
    assert_eq!(report.items, 24);
    assert_eq!(report.form, EmbeddingForm::Map { rows: 3, cols: 5 });
    let store = EmbeddingStore::read(dir.path().join("store")).unwrap();
    assert_eq!(store.meta.encoder_id, "mert");
    assert_eq!(pipeline::store_digest(&dir.path().join("store")).unwrap(), report.digest);
}

#[test]
fn ingest_leaves_inputs_untouched() {
    let dir = tempfile::tempdir().unwrap();
    layered_fixture(dir.path(), 3, 1, 4);
    let before = std::fs::read(dir.path().join("manifest.json")).unwrap();
    pipeline::ingest(
        &dir.path().join("manifest.json"),
        &dir.path().join("raw"),
        Aggregation::MeanOverTime,
        "m2v",
        &dir.path().join("store"),
    )
    .unwrap();
    assert_eq!(before, std::fs::read(dir.path().join("manifest.json")).unwrap());
}

#[test]
fn wrong_aggregation_fails_every_item() {
    let dir = tempfile::tempdir().unwrap();
    layered_fixture(dir.path(), 2, 1, 4);
    let outcome = pipeline::ingest(
        &dir.path().join("manifest.json"),
        &dir.path().join("raw"),
        Aggregation::CodebookHistogram,
        "dac",
        &dir.path().join("store"),
    )
    .unwrap();
    let IngestOutcome::Failed(failures) = outcome else {
        panic!("expected failures")
    };
    assert_eq!(failures.len(), 8);
    assert!(failures.iter().all(|f| f.error.kind() == ErrorKind::Validation));
}

#[test]
fn load_data_accepts_a_store_or_a_directory_of_stores() {
    let dir = tempfile::tempdir().unwrap();
    let config = small_config(dir.path(), 10);
    let all = pipeline::load_data(&config.paths.data).unwrap();
    assert_eq!(all.generators.len(), 3);
    assert_eq!(all.encoder_id, "sim");
    let one = pipeline::load_data(&config.paths.data.join("gen-b")).unwrap();
    assert_eq!(one.generators.len(), 1);
    assert_eq!(one.generators[0].pairs.len(), 20);
    let err = pipeline::load_data(dir.path()).unwrap_err();
    assert_eq!(err.kind(), ErrorKind::Validation);
}

#[test]
fn config_checks_run_before_training() {
    let dir = tempfile::tempdir().unwrap();
    let mut config = small_config(dir.path(), 10);
    config.experiment.holdout = "gen-q".into();
    let err = pipeline::train_auditor(&config).unwrap_err();
    assert_eq!(err.kind(), ErrorKind::Validation);
    assert!(err.to_string().contains("gen-q"));
    assert!(!config.paths.output.exists());
}

#[test]
fn training_artifacts_carry_seed_and_config_hash() {
    let dir = tempfile::tempdir().unwrap();
    let mut config = small_config(dir.path(), 40);
    config.experiment.seed = 5;
    config.experiment.holdout = "gen-c".into();
    let (ck, log) = pipeline::train_auditor(&config).unwrap();
    assert_eq!(ck.header.training_generators, ["gen-a", "gen-b"]);
    assert_eq!(ck.header.best_epoch, log.best_epoch);

    let loaded = Checkpoint::load(config.paths.output.join(CHECKPOINT_FILE)).unwrap();
    assert_eq!(loaded.header.config_hash.as_deref(), Some(config.config_hash().as_str()));
    assert_eq!(loaded.header.seed, 5);
    let log_json: serde_json::Value = serde_json::from_slice(
        &std::fs::read(config.paths.output.join(TRAINING_LOG_FILE)).unwrap(),
    )
    .unwrap();
    assert_eq!(log_json["seed"], 5);
    assert_eq!(log_json["config_hash"], config.config_hash());
    assert_eq!(log_json["epochs"].as_array().unwrap().len(), log.epochs.len());
}

#[test]
fn evaluate_reports_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let mut config = small_config(dir.path(), 40);
    config.experiment.protocol = Protocol::Transfer;
    let (report, files) = pipeline::evaluate(&config).unwrap();
    assert_eq!(report.cells.len(), 9);
    assert_eq!(files.len(), 4);
    let loaded = EvalReport::load(config.paths.output.join("transfer.json")).unwrap();
    assert_eq!(loaded.cells_csv().unwrap(), report.cells_csv().unwrap());
    let csv = std::fs::read_to_string(config.paths.output.join("transfer.csv")).unwrap();
    assert!(csv.lines().skip(1).all(|l| l.ends_with(&format!(",0,{}", config.config_hash()))));
}

#[test]
fn audit_accepts_raw_tensors_through_the_checkpoint_aggregation() {
    let dir = tempfile::tempdir().unwrap();
    layered_fixture(dir.path(), 12, 1, 6);
    pipeline::ingest(
        &dir.path().join("manifest.json"),
        &dir.path().join("raw"),
        Aggregation::MeanOverTime,
        "mert",
        &dir.path().join("data/gen-x"),
    )
    .unwrap();
    // A second generator so the auditor trains on two sources.
    let mut manifest = DatasetManifest::load(dir.path().join("manifest.json")).unwrap();
    for r in &mut manifest.records {
        r.generator_id = "gen-y".into();
    }
    manifest.save(dir.path().join("manifest_y.json")).unwrap();
    pipeline::ingest(
        &dir.path().join("manifest_y.json"),
        &dir.path().join("raw"),
        Aggregation::MeanOverTime,
        "mert",
        &dir.path().join("data/gen-y"),
    )
    .unwrap();

    let mut config = ExperimentConfig::default();
    config.experiment.encoder_id = "mert".into();
    config.train.max_epochs = 3;
    config.train.patience = 2;
    config.paths.data = dir.path().join("data");
    config.paths.output = dir.path().join("out");
    let (ck, _) = pipeline::train_auditor(&config).unwrap();
    assert_eq!(ck.header.input, EmbeddingForm::Vector { dim: 6 });
    assert_eq!(ck.header.aggregation, "mean-over-time");

    let raw = dir.path().join("raw/m0-member.maud");
    let gen = dir.path().join("raw/m0-gen_member.maud");
    let verdict = pipeline::audit(&ck, &raw, &gen, 0.5).unwrap();
    assert!(verdict.score > 0.0 && verdict.score < 1.0);
    assert_eq!(verdict.member, verdict.score > 0.5);

    let wide = RawEncoderOutput::layered(1, 4, 7, vec![0.1; 28]).unwrap();
    write_tensor_file(dir.path().join("wide.maud"), &wide).unwrap();
    let err = pipeline::audit(&ck, &dir.path().join("wide.maud"), &gen, 0.5).unwrap_err();
    assert_eq!(err.kind(), ErrorKind::Validation);
    assert!(err.to_string().contains('7') && err.to_string().contains('6'), "{err}");
}

#[test]
fn config_hash_ignores_paths_and_jobs() {
    let mut a = ExperimentConfig::default();
    let mut b = ExperimentConfig::default();
    b.paths.output = "elsewhere".into();
    b.experiment.jobs = 8;
    assert_eq!(a.config_hash(), b.config_hash());
    a.train.lr = 0.01;
    assert_ne!(a.config_hash(), b.config_hash());
}
