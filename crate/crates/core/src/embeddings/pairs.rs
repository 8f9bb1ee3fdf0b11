use std::collections::HashMap;

use super::manifest::DatasetManifest;
use super::types::AggregatedEmbedding;
use crate::error::{Error, Result};

/// An original track and the generation conditioned on its caption,
/// labelled 1 when the original was in the generator's training set.
#[derive(Debug, Clone, PartialEq)]
pub struct PairExample {
    pub original: AggregatedEmbedding,
    pub generation: AggregatedEmbedding,
    pub label: u8,
    pub pair_id: String,
    pub generator_id: String,
}

impl PairExample {
    pub fn new(
        original: AggregatedEmbedding,
        generation: AggregatedEmbedding,
        label: u8,
        pair_id: impl Into<String>,
        generator_id: impl Into<String>,
    ) -> Result<Self> {
        if label > 1 {
            return Err(Error::Validation(format!("label must be 0 or 1, got {label}")));
        }
        if original.form() != generation.form() {
            return Err(Error::Validation(format!(
                "pair forms differ: {} vs {}",
                original.form(),
                generation.form()
            )));
        }
        Ok(PairExample {
            original,
            generation,
            label,
            pair_id: pair_id.into(),
            generator_id: generator_id.into(),
        })
    }

    pub fn is_member(&self) -> bool {
        self.label == 1
    }
}

/// One labelled pair per pair id, in manifest order of first appearance.
pub fn build_pairs(
    manifest: &DatasetManifest,
    embeddings: &HashMap<String, AggregatedEmbedding>,
) -> Result<Vec<PairExample>> {
    manifest.validate()?;
    let missing: Vec<&str> = manifest
        .records
        .iter()
        .filter(|r| !embeddings.contains_key(&r.item_id))
        .map(|r| r.item_id.as_str())
        .collect();
    if !missing.is_empty() {
        return Err(Error::Validation(format!(
            "missing embeddings for {} item(s): {}",
            missing.len(),
            missing.join(", ")
        )));
    }

    let mut form = None;
    let mut pairs = Vec::new();
    for (pair_id, records) in manifest.by_pair() {
        let (orig, gen) = if records[0].role.is_original() {
            (records[0], records[1])
        } else {
            (records[1], records[0])
        };
        let original = embeddings[&orig.item_id].clone();
        let generation = embeddings[&gen.item_id].clone();
        for e in [&original, &generation] {
            match form {
                None => form = Some(e.form()),
                Some(f) if f != e.form() => {
                    return Err(Error::Validation(format!(
                        "mixed embedding forms: {f} and {} (pair '{pair_id}')",
                        e.form()
                    )))
                }
                _ => {}
            }
        }
        let label = u8::from(orig.role.is_member_side());
        pairs.push(PairExample::new(
            original,
            generation,
            label,
            pair_id,
            orig.generator_id.clone(),
        )?);
    }
    Ok(pairs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::embeddings::manifest::tests::small_manifest;
    use crate::embeddings::manifest::Role;

    fn embeddings_for(m: &DatasetManifest) -> HashMap<String, AggregatedEmbedding> {
        m.records
            .iter()
            .enumerate()
            .map(|(i, r)| {
                (
                    r.item_id.clone(),
                    AggregatedEmbedding::vector(vec![i as f64, 1.0], "e").unwrap(),
                )
            })
            .collect()
    }

    #[test]
    fn builds_labelled_pairs_in_order() {
        let m = small_manifest();
        let pairs = build_pairs(&m, &embeddings_for(&m)).unwrap();
        assert_eq!(pairs.len(), 4);
        assert_eq!(pairs.iter().map(|p| p.label).collect::<Vec<_>>(), vec![1, 1, 0, 0]);
        // p3 lists the generation first; original must still come first
        assert_eq!(pairs[3].original.values().data()[0], 7.0);
        assert_eq!(pairs[3].generation.values().data()[0], 6.0);
    }

    #[test]
    fn missing_embeddings_are_listed() {
        let m = small_manifest();
        let mut e = embeddings_for(&m);
        e.remove("m1g");
        e.remove("n0");
        let err = build_pairs(&m, &e).unwrap_err().to_string();
        assert!(err.contains("2 item(s): m1g, n0"), "{err}");
    }

    #[test]
    fn mixed_forms_are_rejected() {
        let m = small_manifest();
        let mut e = embeddings_for(&m);
        e.insert(
            "n1".into(),
            AggregatedEmbedding::map(1, 2, vec![0.0, 0.0], "e").unwrap(),
        );
        assert!(build_pairs(&m, &e).unwrap_err().to_string().contains("mixed"));
    }

    #[test]
    fn orphan_is_a_validation_error() {
        let mut m = small_manifest();
        m.records.retain(|r| r.item_id != "n0g");
        let e = embeddings_for(&m);
        assert!(matches!(build_pairs(&m, &e), Err(Error::Validation(_))));
        assert_eq!(Role::GenMember.counterpart(), Role::Member);
    }
}
