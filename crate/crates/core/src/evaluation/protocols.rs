//! Leave-one-generator-out, transferability and training-size ablation.
//!
//! Every cell derives its split and training seeds from the base seed and
//! generator names only, so results do not depend on the number of worker
//! threads or the order cells finish in.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::metrics::{compute_metrics, ConfusionCounts};
use super::splits::{name_label, stratified_split, stratified_subsample, GeneratorPairs};
use crate::auditor::{train, AuditorParams, TrainConfig, TrainingLog, DEFAULT_THRESHOLD};
use crate::embeddings::{EmbeddingForm, PairExample};
use crate::error::{Error, Result};
use crate::numerics::RngState;

const SPLIT_STREAM: u64 = 0x5911_7000;
const TRAIN_STREAM: u64 = 0x7EA1_0000;
const ABLATION_STREAM: u64 = 0xAB1A_0000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Protocol {
    LeaveOneOut,
    Transfer,
    Ablation,
}

impl Protocol {
    pub fn as_str(self) -> &'static str {
        match self {
            Protocol::LeaveOneOut => "leave-one-out",
            Protocol::Transfer => "transfer",
            Protocol::Ablation => "ablation",
        }
    }
}

impl std::str::FromStr for Protocol {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "leave-one-out" => Ok(Protocol::LeaveOneOut),
            "transfer" => Ok(Protocol::Transfer),
            "ablation" => Ok(Protocol::Ablation),
            other => Err(Error::Validation(format!(
                "unknown protocol '{other}' (expected leave-one-out, transfer or ablation)"
            ))),
        }
    }
}

/// Settings shared by all protocols.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvalSettings {
    /// `train.seed` is the base seed every cell derives from.
    pub train: TrainConfig,
    pub threshold: f64,
    /// Upper bound on concurrently trained cells.
    pub jobs: usize,
}

impl Default for EvalSettings {
    fn default() -> Self {
        EvalSettings {
            train: TrainConfig::default(),
            threshold: DEFAULT_THRESHOLD,
            jobs: 1,
        }
    }
}

/// One trained-and-tested auditor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalCell {
    pub protocol: Protocol,
    pub train_sources: Vec<String>,
    pub test_target: String,
    pub encoder_id: String,
    pub n_test: usize,
    pub counts: ConfusionCounts,
    pub acc: f64,
    pub fpr: Option<f64>,
    pub fnr: Option<f64>,
    pub train_seed: u64,
    pub best_epoch: usize,
}

/// Mean target accuracy of `k` auditors trained on `n` subsampled pairs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationPoint {
    pub n: usize,
    pub accs: Vec<f64>,
    pub seeds: Vec<u64>,
    pub mean_acc: f64,
}

fn check_datasets(data: &[GeneratorPairs], min: usize) -> Result<EmbeddingForm> {
    if data.len() < min {
        return Err(Error::Validation(format!(
            "protocol needs at least {min} generators, got {}",
            data.len()
        )));
    }
    let mut ids: Vec<&str> = data.iter().map(|g| g.generator_id.as_str()).collect();
    ids.sort_unstable();
    if ids.windows(2).any(|w| w[0] == w[1]) {
        return Err(Error::Validation(format!("duplicate generator ids in {ids:?}")));
    }
    let first = data[0]
        .pairs
        .first()
        .ok_or_else(|| Error::Validation(format!("generator '{}' has no pairs", data[0].generator_id)))?;
    let form = first.original.form();
    for g in data {
        if g.pairs.is_empty() {
            return Err(Error::Validation(format!("generator '{}' has no pairs", g.generator_id)));
        }
        for p in &g.pairs {
            if p.generator_id != g.generator_id {
                return Err(Error::Validation(format!(
                    "pair {} belongs to '{}' but is listed under '{}'",
                    p.pair_id, p.generator_id, g.generator_id
                )));
            }
            if p.original.form() != form {
                return Err(Error::Validation(format!(
                    "generator '{}' has {} embeddings, expected {form}",
                    g.generator_id,
                    p.original.form()
                )));
            }
        }
    }
    Ok(form)
}

fn split_rng(seed: u64, generator_id: &str) -> RngState {
    RngState::new(seed).fork(SPLIT_STREAM ^ name_label(generator_id))
}

/// 80/20 stratified split of each shadow, pooled.
fn pooled_shadow_split(
    shadows: &[&GeneratorPairs],
    seed: u64,
) -> Result<(Vec<PairExample>, Vec<PairExample>)> {
    let (mut tr, mut va) = (Vec::new(), Vec::new());
    for g in shadows {
        let mut parts =
            stratified_split(&g.pairs, &[0.8, 0.2], &mut split_rng(seed, &g.generator_id))?;
        va.append(&mut parts[1]);
        tr.append(&mut parts[0]);
    }
    Ok((tr, va))
}

fn ensure_no_leak(target: &str, sets: &[&[PairExample]]) -> Result<()> {
    for set in sets {
        if let Some(p) = set.iter().find(|p| p.generator_id == target) {
            return Err(Error::Validation(format!(
                "target generator '{target}' leaked into training data via pair {}",
                p.pair_id
            )));
        }
    }
    Ok(())
}

fn run_pool<T: Send>(jobs: usize, f: impl FnOnce() -> T + Send) -> Result<T> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| Error::Validation(format!("cannot start worker pool: {e}")))?;
    Ok(pool.install(f))
}

fn with_seed(config: &TrainConfig, seed: u64) -> TrainConfig {
    TrainConfig { seed, ..*config }
}

fn test_cell(
    protocol: Protocol,
    params: &AuditorParams,
    log: &TrainingLog,
    train_sources: Vec<String>,
    target: &str,
    test: &[PairExample],
    encoder_id: &str,
    settings: &EvalSettings,
    train_seed: u64,
) -> Result<EvalCell> {
    let scores = params.score_pairs(test)?;
    let labels: Vec<u8> = test.iter().map(|p| p.label).collect();
    let m = compute_metrics(&scores, &labels, settings.threshold)?;
    Ok(EvalCell {
        protocol,
        train_sources,
        test_target: target.to_string(),
        encoder_id: encoder_id.to_string(),
        n_test: test.len(),
        counts: m.counts,
        acc: m.acc,
        fpr: m.fpr,
        fnr: m.fnr,
        train_seed,
        best_epoch: log.best_epoch,
    })
}

/// Hold out each generator in turn; train on the pooled 80% shadow splits,
/// validate on the pooled 20%, and test on every pair of the target.
pub fn leave_one_out(
    data: &[GeneratorPairs],
    encoder_id: &str,
    settings: &EvalSettings,
) -> Result<Vec<EvalCell>> {
    check_datasets(data, 3)?;
    let base = settings.train.seed;
    run_pool(settings.jobs, || {
        data.par_iter()
            .map(|target| {
                let shadows: Vec<&GeneratorPairs> = data
                    .iter()
                    .filter(|g| g.generator_id != target.generator_id)
                    .collect();
                let (tr, va) = pooled_shadow_split(&shadows, base)?;
                ensure_no_leak(&target.generator_id, &[&tr, &va])?;
                let seed =
                    RngState::derive_seed(base, TRAIN_STREAM ^ name_label(&target.generator_id));
                let (params, log) = train(&tr, &va, &with_seed(&settings.train, seed))?;
                test_cell(
                    Protocol::LeaveOneOut,
                    &params,
                    &log,
                    shadows.iter().map(|g| g.generator_id.clone()).collect(),
                    &target.generator_id,
                    &target.pairs,
                    encoder_id,
                    settings,
                    seed,
                )
            })
            .collect::<Result<Vec<_>>>()
    })?
}

/// Train on one generator's 70% split (20% validation) and test on every
/// generator: the source's own 10% split on the diagonal, all pairs of the
/// other generator elsewhere. Cells are source-major.
pub fn transferability_matrix(
    data: &[GeneratorPairs],
    encoder_id: &str,
    settings: &EvalSettings,
) -> Result<Vec<EvalCell>> {
    check_datasets(data, 2)?;
    let base = settings.train.seed;
    let rows = run_pool(settings.jobs, || {
        data.par_iter()
            .map(|source| {
                let parts = stratified_split(
                    &source.pairs,
                    &[0.7, 0.2, 0.1],
                    &mut split_rng(base, &source.generator_id),
                )?;
                let seed =
                    RngState::derive_seed(base, TRAIN_STREAM ^ name_label(&source.generator_id));
                let (params, log) = train(&parts[0], &parts[1], &with_seed(&settings.train, seed))?;
                data.iter()
                    .map(|target| {
                        let test = if target.generator_id == source.generator_id {
                            &parts[2]
                        } else {
                            &target.pairs
                        };
                        test_cell(
                            Protocol::Transfer,
                            &params,
                            &log,
                            vec![source.generator_id.clone()],
                            &target.generator_id,
                            test,
                            encoder_id,
                            settings,
                            seed,
                        )
                    })
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<Vec<_>>>()
    })??;
    Ok(rows.into_iter().flatten().collect())
}

/// Training-size ablation against `target`. The pooled 80% shadow splits
/// form the subsampling pool and the pooled 20% the fixed validation set.
/// Each size gets `k` stratified subsamples with fresh seeds.
pub fn ablation_curve(
    data: &[GeneratorPairs],
    target: &str,
    sizes: &[usize],
    k: usize,
    settings: &EvalSettings,
) -> Result<Vec<AblationPoint>> {
    check_datasets(data, 2)?;
    if k == 0 || sizes.is_empty() {
        return Err(Error::Validation("ablation needs k >= 1 and at least one size".into()));
    }
    if sizes.windows(2).any(|w| w[0] >= w[1]) || sizes[0] == 0 {
        return Err(Error::Validation(format!(
            "ablation sizes must be positive and strictly ascending, got {sizes:?}"
        )));
    }
    let target_data = data
        .iter()
        .find(|g| g.generator_id == target)
        .ok_or_else(|| Error::Validation(format!("unknown target generator '{target}'")))?;
    let shadows: Vec<&GeneratorPairs> = data.iter().filter(|g| g.generator_id != target).collect();
    let base = settings.train.seed;
    let (pool, va) = pooled_shadow_split(&shadows, base)?;
    ensure_no_leak(target, &[&pool, &va])?;
    let largest = *sizes.last().unwrap();
    if largest > pool.len() {
        return Err(Error::Validation(format!(
            "ablation size {largest} exceeds the pooled training set of {} pairs",
            pool.len()
        )));
    }

    let runs: Vec<(usize, usize)> = sizes
        .iter()
        .flat_map(|&n| (0..k).map(move |r| (n, r)))
        .collect();
    let results = run_pool(settings.jobs, || {
        runs.par_iter()
            .map(|&(n, r)| {
                let seed =
                    RngState::derive_seed(base, ABLATION_STREAM ^ ((n as u64) << 8) ^ r as u64);
                let root = RngState::new(seed);
                let sample = stratified_subsample(&pool, n, &mut root.fork(0))?;
                let (params, _) = train(&sample, &va, &with_seed(&settings.train, seed))?;
                let scores = params.score_pairs(&target_data.pairs)?;
                let labels: Vec<u8> = target_data.pairs.iter().map(|p| p.label).collect();
                Ok((seed, compute_metrics(&scores, &labels, settings.threshold)?.acc))
            })
            .collect::<Result<Vec<_>>>()
    })??;

    Ok(sizes
        .iter()
        .zip(results.chunks(k))
        .map(|(&n, chunk)| {
            let accs: Vec<f64> = chunk.iter().map(|r| r.1).collect();
            AblationPoint {
                n,
                mean_acc: accs.iter().sum::<f64>() / k as f64,
                seeds: chunk.iter().map(|r| r.0).collect(),
                accs,
            }
        })
        .collect())
}
