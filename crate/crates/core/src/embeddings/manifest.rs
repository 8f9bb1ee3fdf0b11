use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    Member,
    Nonmember,
    GenMember,
    GenNonmember,
}

impl Role {
    pub fn is_original(self) -> bool {
        matches!(self, Role::Member | Role::Nonmember)
    }

    pub fn is_member_side(self) -> bool {
        matches!(self, Role::Member | Role::GenMember)
    }

    /// The generation role that pairs with an original role, and vice versa.
    pub fn counterpart(self) -> Role {
        match self {
            Role::Member => Role::GenMember,
            Role::GenMember => Role::Member,
            Role::Nonmember => Role::GenNonmember,
            Role::GenNonmember => Role::Nonmember,
        }
    }
}

impl fmt::Display for Role {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Role::Member => "member",
            Role::Nonmember => "nonmember",
            Role::GenMember => "gen_member",
            Role::GenNonmember => "gen_nonmember",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestRecord {
    pub item_id: String,
    pub generator_id: String,
    pub role: Role,
    pub pair_id: String,
    pub source_path: String,
    pub duration_s: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub caption: Option<String>,
}

/// Provenance index: which items exist, which role each plays, and how
/// originals pair with their caption-conditioned generations.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct DatasetManifest {
    pub records: Vec<ManifestRecord>,
}

impl DatasetManifest {
    pub fn new(records: Vec<ManifestRecord>) -> Self {
        DatasetManifest { records }
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(serde_json::from_str(&text)?)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut text = serde_json::to_string_pretty(self)?;
        text.push('\n');
        std::fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    /// Check item-id uniqueness and that every pair id joins exactly one
    /// original with its matching generation.
    pub fn validate(&self) -> Result<()> {
        let mut seen = HashSet::new();
        for r in &self.records {
            if r.item_id.is_empty() || r.pair_id.is_empty() {
                return Err(Error::Validation(format!(
                    "record with empty item_id or pair_id: {r:?}"
                )));
            }
            if !seen.insert(r.item_id.as_str()) {
                return Err(Error::Validation(format!("duplicate item_id '{}'", r.item_id)));
            }
        }
        let mut problems = Vec::new();
        for (pair_id, members) in self.by_pair() {
            match members.as_slice() {
                [a, b] => {
                    let (orig, gen) = if a.role.is_original() { (a, b) } else { (b, a) };
                    if !orig.role.is_original() || gen.role != orig.role.counterpart() {
                        problems.push(format!(
                            "pair '{pair_id}' has roles {} and {}",
                            a.role, b.role
                        ));
                    } else if orig.generator_id != gen.generator_id {
                        problems.push(format!(
                            "pair '{pair_id}' spans generators '{}' and '{}'",
                            orig.generator_id, gen.generator_id
                        ));
                    }
                }
                other => problems.push(format!(
                    "pair '{pair_id}' appears {} time(s), expected 2",
                    other.len()
                )),
            }
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(Error::Validation(problems.join("; ")))
        }
    }

    /// Records grouped by pair id, in order of first appearance.
    pub(crate) fn by_pair(&self) -> Vec<(&str, Vec<&ManifestRecord>)> {
        let mut order: Vec<&str> = Vec::new();
        let mut groups: BTreeMap<&str, Vec<&ManifestRecord>> = BTreeMap::new();
        for r in &self.records {
            let g = groups.entry(r.pair_id.as_str()).or_default();
            if g.is_empty() {
                order.push(r.pair_id.as_str());
            }
            g.push(r);
        }
        order
            .into_iter()
            .map(|p| (p, groups.remove(p).unwrap_or_default()))
            .collect()
    }

    pub fn role_counts(&self) -> BTreeMap<Role, usize> {
        let mut counts = BTreeMap::new();
        for r in &self.records {
            *counts.entry(r.role).or_insert(0) += 1;
        }
        counts
    }

    pub fn generator_ids(&self) -> Vec<String> {
        let mut ids: Vec<String> = self.records.iter().map(|r| r.generator_id.clone()).collect();
        ids.sort();
        ids.dedup();
        ids
    }
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;

    pub(crate) fn record(item: &str, pair: &str, role: Role) -> ManifestRecord {
        ManifestRecord {
            item_id: item.into(),
            generator_id: "g".into(),
            role,
            pair_id: pair.into(),
            source_path: format!("{item}.wav"),
            duration_s: 10.0,
            caption: None,
        }
    }

    pub(crate) fn small_manifest() -> DatasetManifest {
        DatasetManifest::new(vec![
            record("m0", "p0", Role::Member),
            record("m0g", "p0", Role::GenMember),
            record("m1", "p1", Role::Member),
            record("m1g", "p1", Role::GenMember),
            record("n0", "p2", Role::Nonmember),
            record("n0g", "p2", Role::GenNonmember),
            record("n1g", "p3", Role::GenNonmember),
            record("n1", "p3", Role::Nonmember),
        ])
    }

    #[test]
    fn valid_manifest_passes() {
        small_manifest().validate().unwrap();
        let counts = small_manifest().role_counts();
        assert_eq!(counts[&Role::Member], 2);
        assert_eq!(counts[&Role::GenNonmember], 2);
    }

    #[test]
    fn orphan_pair_fails() {
        let mut m = small_manifest();
        m.records.pop();
        let err = m.validate().unwrap_err().to_string();
        assert!(err.contains("'p3' appears 1 time"), "{err}");
    }

    #[test]
    fn mismatched_roles_fail() {
        let mut m = small_manifest();
        m.records[1].role = Role::GenNonmember;
        assert!(m.validate().unwrap_err().to_string().contains("roles member and gen_nonmember"));
        let mut m = small_manifest();
        m.records[3].item_id = "m0".into();
        assert!(m.validate().unwrap_err().to_string().contains("duplicate"));
    }

    #[test]
    fn json_uses_snake_case_roles() {
        let m = DatasetManifest::new(vec![record("a", "p", Role::GenNonmember)]);
        let text = serde_json::to_string(&m).unwrap();
        assert!(text.starts_with('['));
        assert!(text.contains("\"role\":\"gen_nonmember\""));
        assert!(!text.contains("caption"));
        let back: DatasetManifest = serde_json::from_str(&text).unwrap();
        assert_eq!(back, m);
    }
}
