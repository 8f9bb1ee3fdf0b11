//! Mini-batch AdamW training with validation-based early stopping.

use serde::{Deserialize, Serialize};

use super::model::{Architecture, AuditorParams, Standardizer};
use crate::embeddings::{EmbeddingForm, PairExample};
use crate::error::{Error, Result};
use crate::numerics::{
    adamw_step, bce_with_logits_mean, AdamState, AdamWConfig, DenseArray, RngState,
};

const INIT_STREAM: u64 = 0;
const SHUFFLE_STREAM: u64 = 1 << 32;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub lr: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    pub patience: usize,
    pub min_delta: f64,
    pub weight_decay: f64,
    pub seed: u64,
    /// Fit per-feature standardization on the training pairs and freeze it
    /// into the model.
    pub standardize: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            lr: 1e-3,
            batch_size: 32,
            max_epochs: 200,
            patience: 10,
            min_delta: 1e-4,
            weight_decay: 1e-2,
            seed: 0,
            standardize: false,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Validation(msg));
        if !(self.lr.is_finite() && self.lr > 0.0) {
            return bad(format!("lr must be positive, got {}", self.lr));
        }
        if self.batch_size == 0 {
            return bad("batch_size must be positive".into());
        }
        if self.max_epochs == 0 || self.patience == 0 {
            return bad("max_epochs and patience must be positive".into());
        }
        if self.patience >= self.max_epochs {
            return bad(format!(
                "patience ({}) must be below max_epochs ({})",
                self.patience, self.max_epochs
            ));
        }
        if !(self.min_delta.is_finite() && self.min_delta >= 0.0) {
            return bad(format!("min_delta must be non-negative, got {}", self.min_delta));
        }
        if !(self.weight_decay.is_finite() && self.weight_decay >= 0.0) {
            return bad(format!(
                "weight_decay must be non-negative, got {}",
                self.weight_decay
            ));
        }
        Ok(())
    }

    fn optimizer(&self) -> AdamWConfig {
        AdamWConfig {
            lr: self.lr,
            weight_decay: self.weight_decay,
            ..AdamWConfig::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub train_acc: f64,
    pub val_loss: f64,
    pub val_acc: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingLog {
    pub epochs: Vec<EpochRecord>,
    /// Epoch whose parameters were returned (1-based).
    pub best_epoch: usize,
    pub best_val_loss: f64,
    pub stopped_early: bool,
}

impl TrainingLog {
    pub fn best(&self) -> Option<&EpochRecord> {
        self.epochs.iter().find(|e| e.epoch == self.best_epoch)
    }
}

fn common_form(train: &[PairExample], val: &[PairExample]) -> Result<EmbeddingForm> {
    let form = train
        .first()
        .ok_or_else(|| Error::Validation("training set is empty".into()))?
        .original
        .form();
    if val.is_empty() {
        return Err(Error::Validation("validation set is empty".into()));
    }
    for p in train.iter().chain(val) {
        if p.original.form() != form || p.generation.form() != form {
            return Err(Error::Validation(format!(
                "pair {} of {} has form {} but the training set uses {form}",
                p.pair_id,
                p.generator_id,
                p.original.form()
            )));
        }
    }
    Ok(form)
}

/// Pairs sorted by `(generator_id, pair_id)` so that only the seeded
/// shuffle decides batch composition.
fn canonical(pairs: &[PairExample]) -> Vec<&PairExample> {
    let mut v: Vec<&PairExample> = pairs.iter().collect();
    v.sort_by(|a, b| {
        (a.generator_id.as_str(), a.pair_id.as_str())
            .cmp(&(b.generator_id.as_str(), b.pair_id.as_str()))
    });
    v
}

fn gather(features: &DenseArray, rows: &[usize]) -> DenseArray {
    let width = features.len() / features.dims()[0];
    let mut data = Vec::with_capacity(rows.len() * width);
    for &r in rows {
        data.extend_from_slice(&features.data()[r * width..(r + 1) * width]);
    }
    let mut dims = features.dims().to_vec();
    dims[0] = rows.len();
    DenseArray::new(dims, data).expect("gathered rows keep their width")
}

fn correct(logits: &[f64], labels: &[f64]) -> usize {
    logits
        .iter()
        .zip(labels)
        .filter(|(z, y)| (**z > 0.0) == (**y > 0.5))
        .count()
}

/// Mean loss and accuracy over a featurized set, in chunks.
fn evaluate(params: &AuditorParams, features: &DenseArray, labels: &[f64]) -> Result<(f64, f64)> {
    let n = labels.len();
    let mut loss = 0.0;
    let mut hits = 0;
    let idx: Vec<usize> = (0..n).collect();
    for chunk in idx.chunks(256) {
        let logits = params.forward_batch(&gather(features, chunk))?;
        let y = &labels[chunk[0]..chunk[0] + chunk.len()];
        loss += bce_with_logits_mean(&logits, y).0 * chunk.len() as f64;
        hits += correct(&logits, y);
    }
    Ok((loss / n as f64, hits as f64 / n as f64))
}

/// Train an auditor for the embedding form of `train`. The architecture
/// follows the form: vectors get the MLP, maps the CNN.
///
/// Returns the parameters from the epoch with the lowest validation loss.
pub fn train(
    train: &[PairExample],
    val: &[PairExample],
    config: &TrainConfig,
) -> Result<(AuditorParams, TrainingLog)> {
    config.validate()?;
    let form = common_form(train, val)?;
    let train = canonical(train);
    let val = canonical(val);
    let members = train.iter().filter(|p| p.is_member()).count();
    if members == 0 || members == train.len() {
        return Err(Error::Validation(format!(
            "training set needs both classes, got {members} members out of {}",
            train.len()
        )));
    }

    let root = RngState::new(config.seed);
    let mut params =
        AuditorParams::init(Architecture::for_form(form), form, &mut root.fork(INIT_STREAM))?;
    if config.standardize {
        let raw = params.raw_features(&train)?;
        params.set_standardizer(Some(Standardizer::fit(&raw)));
    }
    let train_x = params.features(&train)?;
    let train_y: Vec<f64> = train.iter().map(|p| p.label as f64).collect();
    let val_x = params.features(&val)?;
    let val_y: Vec<f64> = val.iter().map(|p| p.label as f64).collect();

    let hyper = config.optimizer();
    let mut state = AdamState::for_params(params.tensors());
    let mut best = params.clone();
    let mut log = TrainingLog {
        epochs: Vec::new(),
        best_epoch: 0,
        best_val_loss: f64::INFINITY,
        stopped_early: false,
    };
    let mut stale = 0;
    let mut order: Vec<usize> = (0..train.len()).collect();

    for epoch in 1..=config.max_epochs {
        order.sort_unstable();
        root.fork(SHUFFLE_STREAM + epoch as u64).shuffle(&mut order);
        let mut loss_sum = 0.0;
        let mut hits = 0;
        for (b, rows) in order.chunks(config.batch_size).enumerate() {
            let x = gather(&train_x, rows);
            let y: Vec<f64> = rows.iter().map(|&r| train_y[r]).collect();
            let (loss, logits, grads) = params.loss_and_grads(&x, &y)?;
            if !loss.is_finite() {
                return Err(Error::NonFinite(format!(
                    "training loss is {loss} at epoch {epoch}, batch {b}"
                )));
            }
            adamw_step(params.tensors_mut(), &grads, &mut state, &hyper).map_err(|e| match e {
                Error::NonFinite(msg) => Error::NonFinite(format!("{msg} in epoch {epoch}")),
                other => other,
            })?;
            loss_sum += loss * rows.len() as f64;
            hits += correct(&logits, &y);
        }
        let (val_loss, val_acc) = evaluate(&params, &val_x, &val_y)?;
        if !val_loss.is_finite() {
            return Err(Error::NonFinite(format!(
                "validation loss is {val_loss} at epoch {epoch}"
            )));
        }
        log.epochs.push(EpochRecord {
            epoch,
            train_loss: loss_sum / train.len() as f64,
            train_acc: hits as f64 / train.len() as f64,
            val_loss,
            val_acc,
        });
        if val_loss < log.best_val_loss - config.min_delta {
            log.best_val_loss = val_loss;
            log.best_epoch = epoch;
            best = params.clone();
            stale = 0;
        } else {
            stale += 1;
            if stale >= config.patience {
                log.stopped_early = epoch < config.max_epochs;
                break;
            }
        }
    }
    Ok((best, log))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::embeddings::AggregatedEmbedding;

    /// Members: generation close to original. Non-members: independent.
    fn toy_pairs(n: usize, dim: usize, seed: u64) -> Vec<PairExample> {
        let mut rng = RngState::new(seed);
        (0..n)
            .map(|i| {
                let label = (i % 2) as u8;
                let x: Vec<f64> = (0..dim).map(|_| rng.normal()).collect();
                let g: Vec<f64> = if label == 1 {
                    x.iter().map(|v| v + 0.1 * rng.normal()).collect()
                } else {
                    (0..dim).map(|_| rng.normal()).collect()
                };
                PairExample::new(
                    AggregatedEmbedding::vector(x, "t").unwrap(),
                    AggregatedEmbedding::vector(g, "t").unwrap(),
                    label,
                    format!("p{i:04}"),
                    "g",
                )
                .unwrap()
            })
            .collect()
    }

    fn quick() -> TrainConfig {
        TrainConfig {
            max_epochs: 8,
            patience: 3,
            seed: 7,
            ..TrainConfig::default()
        }
    }

    #[test]
    fn config_validation() {
        assert!(TrainConfig::default().validate().is_ok());
        for broken in [
            TrainConfig { lr: 0.0, ..Default::default() },
            TrainConfig { batch_size: 0, ..Default::default() },
            TrainConfig { patience: 200, ..Default::default() },
            TrainConfig { min_delta: -1.0, ..Default::default() },
        ] {
            assert!(broken.validate().is_err(), "{broken:?}");
        }
    }

    #[test]
    fn single_class_is_rejected() {
        let pairs: Vec<PairExample> = toy_pairs(20, 4, 1).into_iter().filter(|p| p.label == 1).collect();
        let err = train(&pairs, &pairs, &quick()).unwrap_err();
        assert!(matches!(err, Error::Validation(_)));
    }

    #[test]
    fn empty_sets_are_rejected() {
        let pairs = toy_pairs(10, 4, 1);
        assert!(train(&[], &pairs, &quick()).is_err());
        assert!(train(&pairs, &[], &quick()).is_err());
    }

    #[test]
    fn deterministic_and_order_invariant() {
        let tr = toy_pairs(64, 4, 2);
        let va = toy_pairs(16, 4, 3);
        let (p1, l1) = train(&tr, &va, &quick()).unwrap();
        let mut reversed = tr.clone();
        reversed.reverse();
        let (p2, l2) = train(&reversed, &va, &quick()).unwrap();
        assert_eq!(l1, l2);
        assert_eq!(p1, p2);
    }

    #[test]
    fn returns_best_snapshot() {
        let tr = toy_pairs(64, 4, 4);
        let va = toy_pairs(32, 4, 5);
        let (params, log) = train(&tr, &va, &quick()).unwrap();
        let worst_allowed = log.best_val_loss;
        for e in &log.epochs {
            assert!(e.val_loss >= worst_allowed - 1e-12 || e.epoch == log.best_epoch);
        }
        let x = params.features(&va.iter().collect::<Vec<_>>()).unwrap();
        let y: Vec<f64> = canonical(&va).iter().map(|p| p.label as f64).collect();
        let val_sorted = params.features(&canonical(&va)).unwrap();
        let (loss, _) = evaluate(&params, &val_sorted, &y).unwrap();
        assert!((loss - log.best_val_loss).abs() < 1e-12);
        assert_eq!(x.dims()[0], va.len());
    }

    #[test]
    fn learns_an_easy_task() {
        let tr = toy_pairs(400, 4, 6);
        let va = toy_pairs(100, 4, 7);
        let cfg = TrainConfig { max_epochs: 60, ..quick() };
        let (_, log) = train(&tr, &va, &cfg).unwrap();
        assert!(log.best().unwrap().val_acc > 0.9, "{:?}", log.best());
    }

    #[test]
    fn divergence_reports_the_epoch() {
        let tr = toy_pairs(32, 4, 8);
        let cfg = TrainConfig { lr: 1e300, ..quick() };
        match train(&tr, &tr, &cfg) {
            Err(Error::NonFinite(msg)) => assert!(msg.contains("epoch"), "{msg}"),
            other => panic!("expected a numeric failure, got {other:?}"),
        }
    }
}
