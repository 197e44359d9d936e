//! Mapping between class names and dense integer label ids.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Ordered mapping from class name to label id.
///
/// Ids are dense: exactly `0..n_classes()`, no gaps, no duplicates. The entry
/// order is the order classes were declared in and doubles as the canonical
/// order for directory scanning and report columns.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelMap {
    entries: Vec<LabelEntry>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelEntry {
    pub name: String,
    pub id: u32,
}

impl LabelMap {
    /// Build from explicit (name, id) pairs. Ids must cover `0..len` exactly.
    pub fn new(pairs: Vec<(String, u32)>) -> Result<Self> {
        if pairs.is_empty() {
            return Err(Error::Config("label map must not be empty".into()));
        }
        let n = pairs.len();
        let mut seen_ids = vec![false; n];
        let mut seen_names = BTreeMap::new();
        for (name, id) in &pairs {
            if *id as usize >= n {
                return Err(Error::Config(format!(
                    "label id {id} out of range for {n} classes"
                )));
            }
            if seen_ids[*id as usize] {
                return Err(Error::Config(format!("duplicate label id {id}")));
            }
            seen_ids[*id as usize] = true;
            if seen_names.insert(name.clone(), *id).is_some() {
                return Err(Error::Config(format!("duplicate class name {name:?}")));
            }
        }
        Ok(LabelMap {
            entries: pairs
                .into_iter()
                .map(|(name, id)| LabelEntry { name, id })
                .collect(),
        })
    }

    /// Assign ids `0..names.len()` in the given order.
    pub fn from_names<S: Into<String>>(names: Vec<S>) -> Result<Self> {
        Self::new(
            names
                .into_iter()
                .enumerate()
                .map(|(i, name)| (name.into(), i as u32))
                .collect(),
        )
    }

    pub fn n_classes(&self) -> usize {
        self.entries.len()
    }

    /// Entries in declaration order.
    pub fn entries(&self) -> &[LabelEntry] {
        &self.entries
    }

    pub fn id_of(&self, name: &str) -> Option<u32> {
        self.entries.iter().find(|e| e.name == name).map(|e| e.id)
    }

    pub fn name_of(&self, id: u32) -> Option<&str> {
        self.entries
            .iter()
            .find(|e| e.id == id)
            .map(|e| e.name.as_str())
    }

    /// Class names indexed by label id.
    pub fn names_by_id(&self) -> Vec<String> {
        let mut names = vec![String::new(); self.entries.len()];
        for e in &self.entries {
            names[e.id as usize] = e.name.clone();
        }
        names
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn from_names_assigns_dense_ids() {
        let map = LabelMap::from_names(vec!["lung_aca", "lung_n", "lung_scc"]).unwrap();
        assert_eq!(map.n_classes(), 3);
        assert_eq!(map.id_of("lung_aca"), Some(0));
        assert_eq!(map.id_of("lung_n"), Some(1));
        assert_eq!(map.id_of("lung_scc"), Some(2));
        assert_eq!(map.name_of(2), Some("lung_scc"));
        assert_eq!(map.id_of("colon_n"), None);
    }

    #[test]
    fn explicit_pairs_keep_declaration_order() {
        let map = LabelMap::new(vec![("benign".into(), 1), ("tumor".into(), 0)]).unwrap();
        assert_eq!(map.entries()[0].name, "benign");
        assert_eq!(map.names_by_id(), vec!["tumor".to_string(), "benign".to_string()]);
    }

    #[test]
    fn rejects_gaps_duplicates_and_empty() {
        assert!(LabelMap::new(vec![]).is_err());
        assert!(LabelMap::new(vec![("a".into(), 0), ("b".into(), 2)]).is_err());
        assert!(LabelMap::new(vec![("a".into(), 0), ("b".into(), 0)]).is_err());
        assert!(LabelMap::new(vec![("a".into(), 0), ("a".into(), 1)]).is_err());
    }

    #[test]
    fn serde_round_trip() {
        let map = LabelMap::from_names(vec!["colon_aca", "colon_n"]).unwrap();
        let json = serde_json::to_string(&map).unwrap();
        let back: LabelMap = serde_json::from_str(&json).unwrap();
        assert_eq!(map, back);
    }
}
