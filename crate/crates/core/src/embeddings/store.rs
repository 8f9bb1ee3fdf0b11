//! On-disk cache of aggregated embeddings for one dataset:
//!
//! ```text
//! <dir>/manifest.json          dataset manifest
//! <dir>/store.json             encoder id, form, aggregation, provenance
//! <dir>/embeddings/<item>.maud one binary32 MAUD tensor per item
//! ```

use std::collections::HashMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::manifest::DatasetManifest;
use super::pairs::{build_pairs, PairExample};
use super::tensor_file::{read_maud, write_maud};
use super::types::{AggregatedEmbedding, EmbeddingForm};
use crate::error::{Error, Result};

pub const MANIFEST_FILE: &str = "manifest.json";
pub const META_FILE: &str = "store.json";
pub const EMBEDDINGS_DIR: &str = "embeddings";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StoreMeta {
    pub encoder_id: String,
    pub form: EmbeddingForm,
    pub aggregation: String,
    pub items: usize,
    pub generator_ids: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub config_hash: Option<String>,
}

#[derive(Debug, Clone)]
pub struct EmbeddingStore {
    pub meta: StoreMeta,
    pub manifest: DatasetManifest,
    pub embeddings: HashMap<String, AggregatedEmbedding>,
}

/// Item ids double as file names, so keep them to a portable character set.
pub fn check_item_id(id: &str) -> Result<()> {
    let ok = !id.is_empty()
        && !id.starts_with('.')
        && id
            .chars()
            .all(|c| c.is_ascii_alphanumeric() || matches!(c, '-' | '_' | '.'));
    if ok {
        Ok(())
    } else {
        Err(Error::Validation(format!(
            "item id '{id}' must use only ASCII letters, digits, '-', '_' or '.'"
        )))
    }
}

impl EmbeddingStore {
    pub fn new(
        manifest: DatasetManifest,
        embeddings: HashMap<String, AggregatedEmbedding>,
        encoder_id: &str,
        aggregation: &str,
    ) -> Result<Self> {
        manifest.validate()?;
        for r in &manifest.records {
            check_item_id(&r.item_id)?;
        }
        // pairing performs the completeness and form checks
        let pairs = build_pairs(&manifest, &embeddings)?;
        let form = pairs
            .first()
            .map(|p| p.original.form())
            .ok_or_else(|| Error::Validation("manifest has no pairs".into()))?;
        Ok(EmbeddingStore {
            meta: StoreMeta {
                encoder_id: encoder_id.to_string(),
                form,
                aggregation: aggregation.to_string(),
                items: manifest.records.len(),
                generator_ids: manifest.generator_ids(),
                seed: None,
                config_hash: None,
            },
            manifest,
            embeddings,
        })
    }

    pub fn with_provenance(mut self, seed: Option<u64>, config_hash: Option<String>) -> Self {
        self.meta.seed = seed;
        self.meta.config_hash = config_hash;
        self
    }

    pub fn pairs(&self) -> Result<Vec<PairExample>> {
        build_pairs(&self.manifest, &self.embeddings)
    }

    pub fn write(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        let emb_dir = dir.join(EMBEDDINGS_DIR);
        std::fs::create_dir_all(&emb_dir).map_err(|e| Error::io(&emb_dir, e))?;
        for r in &self.manifest.records {
            let tensor = self.embeddings[&r.item_id].to_tensor()?;
            write_maud(emb_dir.join(format!("{}.maud", r.item_id)), &tensor)?;
        }
        self.manifest.save(dir.join(MANIFEST_FILE))?;
        let meta_path = dir.join(META_FILE);
        let mut text = serde_json::to_string_pretty(&self.meta)?;
        text.push('\n');
        std::fs::write(&meta_path, text).map_err(|e| Error::io(&meta_path, e))
    }

    pub fn read(dir: impl AsRef<Path>) -> Result<Self> {
        let dir = dir.as_ref();
        let meta_path = dir.join(META_FILE);
        let meta_text = std::fs::read_to_string(&meta_path).map_err(|e| Error::io(&meta_path, e))?;
        let meta: StoreMeta = serde_json::from_str(&meta_text)?;
        let manifest = DatasetManifest::load(dir.join(MANIFEST_FILE))?;
        let mut embeddings = HashMap::with_capacity(manifest.records.len());
        for r in &manifest.records {
            check_item_id(&r.item_id)?;
            let tensor = read_maud(dir.join(EMBEDDINGS_DIR).join(format!("{}.maud", r.item_id)))?;
            let e = AggregatedEmbedding::from_tensor(&tensor, &meta.encoder_id)?;
            if e.form() != meta.form {
                return Err(Error::Validation(format!(
                    "item '{}' has form {} but the store declares {}",
                    r.item_id,
                    e.form(),
                    meta.form
                )));
            }
            embeddings.insert(r.item_id.clone(), e);
        }
        Ok(EmbeddingStore {
            meta,
            manifest,
            embeddings,
        })
    }
}
