//! Seeded simulator of shadow and target generators in embedding space.
//!
//! Every pair shares a caption latent `c`. The original embedding is
//! `P c + s + e1` and the generation is `P c + s + e2`, where `P` is a fixed
//! random projection (the "encoder"), `s` a per-generator style offset, and
//! the noise terms are isotropic Gaussians. Member generations use noise
//! `sigma_in`; non-member generations use `sigma_in + gap`, so members land
//! closer to their originals. Short-clip generators widen the gap by
//! [`SHORT_REGIME_NOISE_MULTIPLIER`].

use std::collections::HashMap;

use crate::embeddings::{
    AggregatedEmbedding, DatasetManifest, EmbeddingForm, ManifestRecord, Role,
};
use crate::error::{Error, Result};
use crate::numerics::RngState;

/// Alignment-gap multiplier for the short-clip regime.
pub const SHORT_REGIME_NOISE_MULTIPLIER: f64 = 2.0;

pub const SIM_ENCODER_ID: &str = "sim";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ClipRegime {
    Short,
    Long,
}

impl ClipRegime {
    pub fn duration_s(self) -> f64 {
        match self {
            ClipRegime::Short => 10.0,
            ClipRegime::Long => 150.0,
        }
    }

    pub fn noise_multiplier(self) -> f64 {
        match self {
            ClipRegime::Short => SHORT_REGIME_NOISE_MULTIPLIER,
            ClipRegime::Long => 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimGeneratorSpec {
    pub generator_id: String,
    pub form: EmbeddingForm,
    pub semantic_dim: usize,
    /// Extra generation noise for non-members, `sigma_out - sigma_in`.
    pub alignment_gap: f64,
    pub member_noise: f64,
    pub style_offset: Vec<f64>,
    pub clip_regime: ClipRegime,
    /// Seed of the shared projection; generators measured by the same
    /// encoder share it.
    pub projection_seed: u64,
}

impl SimGeneratorSpec {
    pub fn nonmember_noise(&self) -> f64 {
        self.member_noise + self.alignment_gap
    }

    /// Non-member generation noise after the clip-regime multiplier, which
    /// widens the alignment gap.
    pub fn effective_nonmember_noise(&self) -> f64 {
        self.member_noise + self.clip_regime.noise_multiplier() * self.alignment_gap
    }

    fn validate(&self) -> Result<()> {
        if !(self.member_noise > 0.0) || !(self.alignment_gap >= 0.0) {
            return Err(Error::Validation(format!(
                "generator '{}': need member_noise > 0 and alignment_gap >= 0",
                self.generator_id
            )));
        }
        if self.semantic_dim == 0 || self.form.is_empty() {
            return Err(Error::Validation(format!(
                "generator '{}': empty semantic or embedding dimension",
                self.generator_id
            )));
        }
        if self.style_offset.len() != self.form.len() {
            return Err(Error::Validation(format!(
                "generator '{}': style offset has {} entries, embedding has {}",
                self.generator_id,
                self.style_offset.len(),
                self.form.len()
            )));
        }
        Ok(())
    }
}

/// A simulated original track: its caption latent and membership.
#[derive(Debug, Clone, PartialEq)]
pub struct SimTrack {
    pub item_id: String,
    pub latent: Vec<f64>,
    pub member: bool,
}

#[derive(Debug, Clone)]
pub struct SimWorld {
    pub spec: SimGeneratorSpec,
    pub manifest: DatasetManifest,
    pub embeddings: HashMap<String, AggregatedEmbedding>,
    pub tracks: Vec<SimTrack>,
}

/// Row-major `semantic_dim x out_dim` projection with N(0, 1/semantic_dim)
/// entries, so projected latents have unit variance per coordinate.
fn projection(seed: u64, semantic_dim: usize, out_dim: usize) -> Vec<f64> {
    let mut rng = RngState::new(seed);
    let scale = 1.0 / (semantic_dim as f64).sqrt();
    (0..semantic_dim * out_dim).map(|_| rng.normal() * scale).collect()
}

fn embedding(form: EmbeddingForm, values: Vec<f64>) -> Result<AggregatedEmbedding> {
    match form {
        EmbeddingForm::Vector { .. } => AggregatedEmbedding::vector(values, SIM_ENCODER_ID),
        EmbeddingForm::Map { rows, cols } => {
            AggregatedEmbedding::map(rows, cols, values, SIM_ENCODER_ID)
        }
    }
}

/// Sample `n_member` member pairs followed by `n_nonmember` non-member pairs.
/// Output is a pure function of `(spec, counts, seed)`.
pub fn sample_world(
    spec: &SimGeneratorSpec,
    n_member: usize,
    n_nonmember: usize,
    seed: u64,
) -> Result<SimWorld> {
    spec.validate()?;
    if n_member == 0 || n_nonmember == 0 {
        return Err(Error::Validation("pair counts must be at least 1".into()));
    }
    let dim = spec.form.len();
    let proj = projection(spec.projection_seed, spec.semantic_dim, dim);
    let base = RngState::new(seed);
    let gid = &spec.generator_id;

    let mut records = Vec::with_capacity(2 * (n_member + n_nonmember));
    let mut embeddings = HashMap::with_capacity(2 * (n_member + n_nonmember));
    let mut tracks = Vec::with_capacity(n_member + n_nonmember);

    let classes = [(true, n_member, 0u64), (false, n_nonmember, 1u64)];
    for (member, count, class_label) in classes {
        let (tag, orig_role, gen_role, gen_noise) = if member {
            ("m", Role::Member, Role::GenMember, spec.member_noise)
        } else {
            ("n", Role::Nonmember, Role::GenNonmember, spec.effective_nonmember_noise())
        };
        for i in 0..count {
            let mut rng = base.fork((class_label << 32) | i as u64);
            let latent: Vec<f64> = (0..spec.semantic_dim).map(|_| rng.normal()).collect();
            let centre: Vec<f64> = (0..dim)
                .map(|j| {
                    spec.style_offset[j]
                        + latent
                            .iter()
                            .enumerate()
                            .map(|(k, c)| c * proj[k * dim + j])
                            .sum::<f64>()
                })
                .collect();
            let original: Vec<f64> = centre
                .iter()
                .map(|m| m + spec.member_noise * rng.normal())
                .collect();
            let generation: Vec<f64> = centre
                .iter()
                .map(|m| m + gen_noise * rng.normal())
                .collect();

            let pair_id = format!("{gid}-{tag}{i:05}");
            let orig_id = format!("{pair_id}-orig");
            let gen_id = format!("{pair_id}-gen");
            for (item_id, role, values) in [
                (&orig_id, orig_role, original),
                (&gen_id, gen_role, generation),
            ] {
                records.push(ManifestRecord {
                    item_id: item_id.clone(),
                    generator_id: gid.clone(),
                    role,
                    pair_id: pair_id.clone(),
                    source_path: format!("{item_id}.wav"),
                    duration_s: spec.clip_regime.duration_s(),
                    caption: None,
                });
                embeddings.insert(item_id.clone(), embedding(spec.form, values)?);
            }
            tracks.push(SimTrack {
                item_id: orig_id,
                latent,
                member,
            });
        }
    }
    Ok(SimWorld {
        spec: spec.clone(),
        manifest: DatasetManifest::new(records),
        embeddings,
        tracks,
    })
}

/// Knobs for a three-generator suite.
#[derive(Debug, Clone, PartialEq)]
pub struct SuiteParams {
    pub n_member: usize,
    pub n_nonmember: usize,
    pub form: EmbeddingForm,
    pub semantic_dim: usize,
    pub member_noise: f64,
    pub alignment_gap: f64,
    /// Standard deviation of each style-offset coordinate.
    pub style_scale: f64,
    /// Give the second generator the short-clip regime.
    pub with_short_regime: bool,
}

impl SuiteParams {
    /// Three generators drawn from one distribution: no style offsets and
    /// no short-clip generator.
    pub fn matched() -> Self {
        SuiteParams {
            style_scale: 0.0,
            with_short_regime: false,
            ..SuiteParams::default()
        }
    }
}

impl Default for SuiteParams {
    fn default() -> Self {
        SuiteParams {
            n_member: 1000,
            n_nonmember: 1000,
            form: EmbeddingForm::Vector { dim: 32 },
            semantic_dim: 8,
            member_noise: 0.5,
            alignment_gap: 1.0,
            style_scale: 0.1,
            with_short_regime: true,
        }
    }
}

/// Generator ids and clip regimes of the suite: two long-form generators
/// and one short-clip generator.
pub const SUITE_GENERATORS: [(&str, ClipRegime); 3] = [
    ("gen-a", ClipRegime::Long),
    ("gen-b", ClipRegime::Short),
    ("gen-c", ClipRegime::Long),
];

#[derive(Debug, Clone)]
pub struct SimSuite {
    pub worlds: Vec<SimWorld>,
}

impl SimSuite {
    pub fn specs(&self) -> Vec<&SimGeneratorSpec> {
        self.worlds.iter().map(|w| &w.spec).collect()
    }
}

pub fn suite_specs(params: &SuiteParams, base_seed: u64) -> Vec<SimGeneratorSpec> {
    let projection_seed = RngState::derive_seed(base_seed, 0xE4C0_DE00);
    SUITE_GENERATORS
        .iter()
        .enumerate()
        .map(|(g, &(id, regime))| {
            let mut rng = RngState::new(RngState::derive_seed(base_seed, 0x5717_E000 + g as u64));
            SimGeneratorSpec {
                generator_id: id.to_string(),
                form: params.form,
                semantic_dim: params.semantic_dim,
                alignment_gap: params.alignment_gap,
                member_noise: params.member_noise,
                style_offset: (0..params.form.len())
                    .map(|_| params.style_scale * rng.normal())
                    .collect(),
                clip_regime: if params.with_short_regime {
                    regime
                } else {
                    ClipRegime::Long
                },
                projection_seed,
            }
        })
        .collect()
}

pub fn make_suite(params: &SuiteParams, base_seed: u64) -> Result<SimSuite> {
    let worlds = suite_specs(params, base_seed)
        .iter()
        .enumerate()
        .map(|(g, spec)| {
            sample_world(
                spec,
                params.n_member,
                params.n_nonmember,
                RngState::derive_seed(base_seed, g as u64),
            )
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SimSuite { worlds })
}

/// The default suite: three generators, 1000 member and 1000 non-member
/// pairs each.
pub fn make_three_world_suite(base_seed: u64) -> Result<SimSuite> {
    make_suite(&SuiteParams::default(), base_seed)
}
