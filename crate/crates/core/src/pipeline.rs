//! End-to-end steps behind the command line: synthesize, ingest, train,
//! evaluate and audit. Each step reads its inputs, writes only under the
//! configured output directory, and stamps outputs with the seed and
//! config hash.

use std::collections::{BTreeMap, HashMap};
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::audio_io::{load_wav, resample_linear, ReferenceEncoder, REFERENCE_SAMPLE_RATE};
use crate::auditor::{score, train, Architecture, Checkpoint, PairExample, TrainingLog};
use crate::config::ExperimentConfig;
use crate::embeddings::{
    read_tensor_file, AggregatedEmbedding, Aggregation, DatasetManifest, EmbeddingForm,
    EmbeddingStore, RawEncoderOutput, Role, EMBEDDINGS_DIR, MANIFEST_FILE, META_FILE,
};
use crate::error::{Error, Result};
use crate::evaluation::{
    ablation_curve, group_by_generator, leave_one_out, name_label, stratified_split,
    transferability_matrix, EvalReport, GeneratorPairs, Protocol,
};
use crate::numerics::RngState;
use crate::synthworld::make_suite;

pub const CHECKPOINT_FILE: &str = "auditor.ckpt";
pub const TRAINING_LOG_FILE: &str = "training_log.json";

/// Write the three-generator suite as one embedding store per generator
/// under `paths.output`. Returns `(generator_id, pair_count)` per store.
pub fn synthesize(config: &ExperimentConfig) -> Result<Vec<(String, usize)>> {
    config.validate()?;
    let seed = config.experiment.seed;
    let suite = make_suite(&config.synth.suite_params(), seed)?;
    let hash = config.config_hash();
    let mut out = Vec::new();
    for world in suite.worlds {
        let gid = world.spec.generator_id.clone();
        let pairs = world.tracks.len();
        let store = EmbeddingStore::new(
            world.manifest,
            world.embeddings,
            &config.experiment.encoder_id,
            "synthetic",
        )?
        .with_provenance(Some(seed), Some(hash.clone()));
        store.write(config.paths.output.join(&gid))?;
        out.push((gid, pairs));
    }
    Ok(out)
}

#[derive(Debug, Serialize)]
pub struct IngestReport {
    pub items: usize,
    pub role_counts: BTreeMap<Role, usize>,
    pub form: EmbeddingForm,
    pub generator_ids: Vec<String>,
    /// Digest of the written store; unchanged when re-run on the same input.
    pub digest: String,
}

#[derive(Debug)]
pub struct ItemFailure {
    pub item_id: String,
    pub error: Error,
}

/// Either a written store or every item that could not be aggregated.
#[derive(Debug)]
pub enum IngestOutcome {
    Written(IngestReport),
    Failed(Vec<ItemFailure>),
}

/// Aggregate one encoder output per manifest item into a store at `out`.
///
/// Item `x` is read from `<tensor_dir>/x.maud`, or, failing that, encoded
/// from `<tensor_dir>/x.wav` with the reference encoder.
pub fn ingest(
    manifest_path: &Path,
    tensor_dir: &Path,
    aggregation: Aggregation,
    encoder_id: &str,
    out: &Path,
) -> Result<IngestOutcome> {
    let manifest = DatasetManifest::load(manifest_path)?;
    manifest.validate()?;
    let mut embeddings = HashMap::with_capacity(manifest.records.len());
    let mut failures = Vec::new();
    let mut form: Option<EmbeddingForm> = None;
    for r in &manifest.records {
        let result = aggregate_item(tensor_dir, &r.item_id, aggregation, encoder_id).and_then(|e| {
            match form {
                Some(f) if f != e.form() => Err(Error::Validation(format!(
                    "aggregates to {} but earlier items are {f}",
                    e.form()
                ))),
                _ => {
                    form = Some(e.form());
                    Ok(e)
                }
            }
        });
        match result {
            Ok(e) => {
                embeddings.insert(r.item_id.clone(), e);
            }
            Err(error) => failures.push(ItemFailure {
                item_id: r.item_id.clone(),
                error,
            }),
        }
    }
    if !failures.is_empty() {
        return Ok(IngestOutcome::Failed(failures));
    }
    let store = EmbeddingStore::new(manifest, embeddings, encoder_id, aggregation.as_str())?;
    store.write(out)?;
    Ok(IngestOutcome::Written(IngestReport {
        items: store.meta.items,
        role_counts: store.manifest.role_counts(),
        form: store.meta.form,
        generator_ids: store.meta.generator_ids.clone(),
        digest: store_digest(out)?,
    }))
}

fn aggregate_item(
    dir: &Path,
    item_id: &str,
    aggregation: Aggregation,
    encoder_id: &str,
) -> Result<AggregatedEmbedding> {
    crate::embeddings::check_item_id(item_id)?;
    let tensor = dir.join(format!("{item_id}.maud"));
    let wav = dir.join(format!("{item_id}.wav"));
    let raw = if !tensor.exists() && wav.exists() {
        reference_raw(&wav)?
    } else {
        read_tensor_file(&tensor)?
    };
    Ok(aggregation.apply(&raw, encoder_id)?.squeeze())
}

/// Frame-level reference-encoder output for a WAV file, as a one-layer
/// hidden-state tensor.
fn reference_raw(path: &Path) -> Result<RawEncoderOutput> {
    let clip = resample_linear(&load_wav(path)?, REFERENCE_SAMPLE_RATE)?;
    let enc = ReferenceEncoder::default();
    let map = enc.encode(&clip)?;
    RawEncoderOutput::layered(1, enc.n_frames, enc.n_bands, map.values().data().to_vec())
}

/// SHA-256 over the store metadata, manifest and every embedding file in
/// manifest order.
pub fn store_digest(dir: &Path) -> Result<String> {
    let mut h = Sha256::new();
    let read = |p: PathBuf| std::fs::read(&p).map_err(|e| Error::io(p, e));
    h.update(read(dir.join(META_FILE))?);
    h.update(read(dir.join(MANIFEST_FILE))?);
    let manifest = DatasetManifest::load(dir.join(MANIFEST_FILE))?;
    for r in &manifest.records {
        h.update(r.item_id.as_bytes());
        h.update(read(dir.join(EMBEDDINGS_DIR).join(format!("{}.maud", r.item_id)))?);
    }
    Ok(hex(&h.finalize()))
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

/// Pairs from a store directory, or from every store directly below it.
#[derive(Debug)]
pub struct LoadedData {
    pub generators: Vec<GeneratorPairs>,
    pub encoder_id: String,
    pub aggregation: String,
    pub form: EmbeddingForm,
}

pub fn load_data(path: &Path) -> Result<LoadedData> {
    let dirs: Vec<PathBuf> = if path.join(META_FILE).exists() {
        vec![path.to_path_buf()]
    } else {
        let entries = std::fs::read_dir(path).map_err(|e| Error::io(path, e))?;
        let mut dirs = Vec::new();
        for entry in entries {
            let p = entry.map_err(|e| Error::io(path, e))?.path();
            if p.join(META_FILE).exists() {
                dirs.push(p);
            }
        }
        dirs.sort();
        dirs
    };
    if dirs.is_empty() {
        return Err(Error::Validation(format!(
            "no embedding store found at {}",
            path.display()
        )));
    }
    let mut pairs = Vec::new();
    let mut first: Option<(String, String, EmbeddingForm)> = None;
    for dir in &dirs {
        let store = EmbeddingStore::read(dir)?;
        let m = &store.meta;
        match &first {
            None => first = Some((m.encoder_id.clone(), m.aggregation.clone(), m.form)),
            Some((enc, _, form)) if *enc != m.encoder_id || *form != m.form => {
                return Err(Error::Validation(format!(
                    "store {} holds {} {} embeddings, expected {enc} {form}",
                    dir.display(),
                    m.encoder_id,
                    m.form
                )))
            }
            Some(_) => {}
        }
        pairs.extend(store.pairs()?);
    }
    let (encoder_id, aggregation, form) = first.expect("at least one store");
    Ok(LoadedData {
        generators: group_by_generator(pairs),
        encoder_id,
        aggregation,
        form,
    })
}

/// Configuration checks that need the data; run before any training.
pub fn check_against_data(config: &ExperimentConfig, data: &LoadedData) -> Result<()> {
    config.validate()?;
    if config.experiment.encoder_id != data.encoder_id {
        return Err(Error::Validation(format!(
            "config names encoder '{}' but the data was embedded with '{}'",
            config.experiment.encoder_id, data.encoder_id
        )));
    }
    if let Some(arch) = config.experiment.architecture {
        if Architecture::for_form(data.form) != arch {
            return Err(Error::Validation(format!(
                "config asks for the {arch} auditor but the data holds {} embeddings",
                data.form
            )));
        }
    }
    let ids: Vec<&str> = data.generators.iter().map(|g| g.generator_id.as_str()).collect();
    for (key, id) in [
        ("holdout", &config.experiment.holdout),
        ("ablation.target", &config.ablation.target),
    ] {
        if !id.is_empty() && !ids.contains(&id.as_str()) {
            return Err(Error::Validation(format!(
                "{key} '{id}' is not one of the generators {ids:?}"
            )));
        }
    }
    Ok(())
}

/// Train one auditor on every generator except the holdout (80/20
/// stratified per generator, pooled) and write the checkpoint and log.
pub fn train_auditor(config: &ExperimentConfig) -> Result<(Checkpoint, TrainingLog)> {
    let data = load_data(&config.paths.data)?;
    check_against_data(config, &data)?;
    let seed = config.experiment.seed;
    let (mut tr, mut va) = (Vec::new(), Vec::new());
    let mut sources = Vec::new();
    for g in data.generators.iter().filter(|g| g.generator_id != config.experiment.holdout) {
        let mut rng = RngState::new(seed).fork(name_label(&g.generator_id));
        let mut parts = stratified_split(&g.pairs, &[0.8, 0.2], &mut rng)?;
        va.append(&mut parts[1]);
        tr.append(&mut parts[0]);
        sources.push(g.generator_id.clone());
    }
    let train_config = config.train_config();
    let (params, log) = train(&tr, &va, &train_config)?;
    let mut ck = Checkpoint::new(params, train_config);
    ck.header.encoder_id = data.encoder_id;
    ck.header.aggregation = data.aggregation;
    ck.header.training_generators = sources;
    ck.header.config_hash = Some(config.config_hash());
    ck.header.best_epoch = log.best_epoch;
    ck.header.best_val_loss = Some(log.best_val_loss);

    let out = &config.paths.output;
    std::fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    ck.save(out.join(CHECKPOINT_FILE))?;
    let log_path = out.join(TRAINING_LOG_FILE);
    let mut record = serde_json::to_value(&log)?;
    record["seed"] = seed.into();
    record["config_hash"] = config.config_hash().into();
    let mut text = serde_json::to_string_pretty(&record)?;
    text.push('\n');
    std::fs::write(&log_path, text).map_err(|e| Error::io(&log_path, e))?;
    Ok((ck, log))
}

/// Run the configured protocol and write its report files. Returns the
/// report and the paths written.
pub fn evaluate(config: &ExperimentConfig) -> Result<(EvalReport, Vec<PathBuf>)> {
    let data = load_data(&config.paths.data)?;
    check_against_data(config, &data)?;
    let settings = config.eval_settings();
    let protocol = config.experiment.protocol;
    let mut report = EvalReport {
        protocol,
        encoder_id: data.encoder_id.clone(),
        seed: config.experiment.seed,
        config_hash: config.config_hash(),
        cells: Vec::new(),
        ablation: Vec::new(),
        ablation_target: None,
    };
    match protocol {
        Protocol::LeaveOneOut => {
            report.cells = leave_one_out(&data.generators, &data.encoder_id, &settings)?
        }
        Protocol::Transfer => {
            report.cells = transferability_matrix(&data.generators, &data.encoder_id, &settings)?
        }
        Protocol::Ablation => {
            let target = if config.ablation.target.is_empty() {
                data.generators[0].generator_id.clone()
            } else {
                config.ablation.target.clone()
            };
            report.ablation = ablation_curve(
                &data.generators,
                &target,
                &config.ablation.sizes,
                config.ablation.repeats,
                &settings,
            )?;
            report.ablation_target = Some(target);
        }
    }
    let files = report.write_all(&config.paths.output, protocol.as_str())?;
    Ok((report, files))
}

/// Auditor input for one side of a pair: a WAV file (reference encoder) or
/// a MAUD tensor, either already aggregated or raw encoder output.
pub fn load_audit_input(path: &Path, ck: &Checkpoint) -> Result<AggregatedEmbedding> {
    let expected = ck.header.input;
    let is_wav = path
        .extension()
        .is_some_and(|e| e.eq_ignore_ascii_case("wav"));
    let embedding = if is_wav {
        let clip = resample_linear(&load_wav(path)?, REFERENCE_SAMPLE_RATE)?;
        match expected {
            EmbeddingForm::Vector { dim } => ReferenceEncoder {
                n_bands: dim,
                ..ReferenceEncoder::default()
            }
            .embed(&clip)?,
            EmbeddingForm::Map { rows, cols } => ReferenceEncoder {
                n_bands: cols,
                n_frames: rows,
            }
            .encode(&clip)?,
        }
    } else {
        let raw = read_tensor_file(path)?;
        let direct = AggregatedEmbedding::from_tensor(raw.tensor(), &ck.header.encoder_id)
            .ok()
            .filter(|e| e.form() == expected);
        match direct {
            Some(e) => e,
            None => {
                let agg: Aggregation = ck.header.aggregation.parse().map_err(|_| {
                    Error::dims("audit input", &raw.tensor().dims_usize(), &expected.dims())
                })?;
                agg.apply(&raw, &ck.header.encoder_id)?.squeeze()
            }
        }
    };
    if embedding.form() != expected {
        return Err(Error::dims("audit input", &embedding.form().dims(), &expected.dims()));
    }
    Ok(embedding)
}

#[derive(Debug, Clone, Serialize)]
pub struct AuditVerdict {
    pub score: f64,
    pub threshold: f64,
    pub member: bool,
}

/// Score one (original, generation) pair with a trained checkpoint.
pub fn audit(
    ck: &Checkpoint,
    original: &Path,
    generation: &Path,
    threshold: f64,
) -> Result<AuditVerdict> {
    let pair = PairExample::new(
        load_audit_input(original, ck)?,
        load_audit_input(generation, ck)?,
        0,
        "audit",
        "target",
    )?;
    let s = score(&ck.params, &pair)?;
    Ok(AuditVerdict {
        score: s,
        threshold,
        member: s > threshold,
    })
}
