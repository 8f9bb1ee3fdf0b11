use std::collections::BTreeMap;

use sha2::{Digest, Sha256};

use crate::embeddings::PairExample;
use crate::error::{Error, Result};
use crate::numerics::RngState;

/// All pairs of one generator.
#[derive(Debug, Clone)]
pub struct GeneratorPairs {
    pub generator_id: String,
    pub pairs: Vec<PairExample>,
}

/// Group pairs by generator, ordered by generator id.
pub fn group_by_generator(pairs: Vec<PairExample>) -> Vec<GeneratorPairs> {
    let mut groups: BTreeMap<String, Vec<PairExample>> = BTreeMap::new();
    for p in pairs {
        groups.entry(p.generator_id.clone()).or_default().push(p);
    }
    groups
        .into_iter()
        .map(|(generator_id, pairs)| GeneratorPairs { generator_id, pairs })
        .collect()
}

/// Stable 64-bit label for a string, used to key RNG streams by name.
pub fn name_label(name: &str) -> u64 {
    let digest = Sha256::digest(name.as_bytes());
    u64::from_le_bytes(digest[..8].try_into().expect("sha256 has 32 bytes"))
}

fn by_class(pairs: &[PairExample]) -> [Vec<&PairExample>; 2] {
    let mut classes: [Vec<&PairExample>; 2] = [Vec::new(), Vec::new()];
    for p in pairs {
        classes[p.label as usize].push(p);
    }
    for c in &mut classes {
        c.sort_by(|a, b| {
            (a.generator_id.as_str(), a.pair_id.as_str())
                .cmp(&(b.generator_id.as_str(), b.pair_id.as_str()))
        });
    }
    classes
}

/// Split each label class into consecutive parts of the given fractions
/// after a seeded shuffle. Part sizes are `round(cumulative * n)`
/// differences, so they always add up to the class size.
pub fn stratified_split(
    pairs: &[PairExample],
    fractions: &[f64],
    rng: &mut RngState,
) -> Result<Vec<Vec<PairExample>>> {
    let sum: f64 = fractions.iter().sum();
    if fractions.is_empty() || fractions.iter().any(|f| !(*f > 0.0)) || (sum - 1.0).abs() > 1e-9 {
        return Err(Error::Validation(format!(
            "split fractions must be positive and sum to 1, got {fractions:?}"
        )));
    }
    let mut parts: Vec<Vec<PairExample>> = vec![Vec::new(); fractions.len()];
    for mut class in by_class(pairs) {
        rng.shuffle(&mut class);
        let n = class.len();
        let mut start = 0;
        let mut cum = 0.0;
        for (k, f) in fractions.iter().enumerate() {
            cum += f;
            let end = if k + 1 == fractions.len() {
                n
            } else {
                ((cum * n as f64).round() as usize).min(n)
            };
            parts[k].extend(class[start..end].iter().map(|p| (*p).clone()));
            start = end;
        }
    }
    Ok(parts)
}

/// Draw `n` pairs keeping the label proportions of `pairs`. When both
/// classes exist and `n >= 2`, each class gets at least one pair.
pub fn stratified_subsample(
    pairs: &[PairExample],
    n: usize,
    rng: &mut RngState,
) -> Result<Vec<PairExample>> {
    if n == 0 || n > pairs.len() {
        return Err(Error::Validation(format!(
            "cannot draw {n} pairs from a pool of {}",
            pairs.len()
        )));
    }
    let [mut neg, mut pos] = by_class(pairs);
    let mut n_pos = (n as f64 * pos.len() as f64 / pairs.len() as f64).round() as usize;
    if n >= 2 && !pos.is_empty() && !neg.is_empty() {
        n_pos = n_pos.clamp(1, n - 1);
    }
    n_pos = n_pos.clamp(n.saturating_sub(neg.len()), pos.len().min(n));
    rng.shuffle(&mut neg);
    rng.shuffle(&mut pos);
    let mut out: Vec<PairExample> = pos[..n_pos].iter().map(|p| (*p).clone()).collect();
    out.extend(neg[..n - n_pos].iter().map(|p| (*p).clone()));
    Ok(out)
}
