//! Identity splits, training-cell selection and morph partner assignment.

use std::collections::BTreeSet;
use std::fmt;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::manipulate::{ManipulationClass, ManipulationSpec};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Protocol {
    /// Train on every variation.
    P8_8,
    /// Train without the held-out variations, test on all of them.
    P6_8,
}

impl Protocol {
    pub fn as_str(self) -> &'static str {
        match self {
            Protocol::P8_8 => "P8-8",
            Protocol::P6_8 => "P6-8",
        }
    }
}

impl fmt::Display for Protocol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Split {
    pub train: Vec<String>,
    pub test: Vec<String>,
    /// Hex SHA-256 over both sorted id lists.
    pub hash: String,
}

impl Split {
    pub fn is_train(&self, id: &str) -> bool {
        self.train.binary_search_by(|t| t.as_str().cmp(id)).is_ok()
    }

    pub fn is_test(&self, id: &str) -> bool {
        self.test.binary_search_by(|t| t.as_str().cmp(id)).is_ok()
    }
}

pub(crate) fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

fn split_hash(train: &[String], test: &[String]) -> String {
    let mut h = Sha256::new();
    for (tag, ids) in [("train", train), ("test", test)] {
        h.update(tag.as_bytes());
        h.update([0]);
        for id in ids {
            h.update(id.as_bytes());
            h.update([0]);
        }
    }
    hex(&h.finalize())
}

/// Partitions identities: sort, shuffle with `seed`, first `round(f * n)` train.
/// Both halves come back sorted.
pub fn split_identities(ids: &[String], seed: u64, train_fraction: f64) -> Result<Split> {
    let mut all: Vec<String> = ids.to_vec();
    all.sort();
    all.dedup();
    if all.len() != ids.len() {
        return Err(Error::InvalidParameter("identity ids must be unique".into()));
    }
    let n_train = (train_fraction * all.len() as f64).round() as usize;
    if n_train == 0 {
        return Err(Error::EmptySplit("train".into()));
    }
    if n_train >= all.len() {
        return Err(Error::EmptySplit("test".into()));
    }
    all.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut test = all.split_off(n_train);
    let mut train = all;
    train.sort();
    test.sort();
    let hash = split_hash(&train, &test);
    Ok(Split { train, test, hash })
}

/// First and last listed cell of every class with more than two cells.
pub fn default_held_out(grid: &[ManipulationSpec]) -> Vec<String> {
    let mut out = Vec::new();
    for class in ManipulationClass::ALL {
        let cells: Vec<&ManipulationSpec> = grid.iter().filter(|s| s.class() == class).collect();
        if cells.len() > 2 {
            out.push(cells[0].id());
            out.push(cells[cells.len() - 1].id());
        }
    }
    out
}

/// Cell ids used for training under `protocol`.
pub fn training_cells(grid: &[ManipulationSpec], protocol: Protocol, held_out: &[String]) -> BTreeSet<String> {
    grid.iter()
        .map(|s| s.id())
        .filter(|id| protocol == Protocol::P8_8 || !held_out.contains(id))
        .collect()
}

/// Morph partner for each id within one group: shuffle the group with `seed`
/// and pair every element with the next one (cyclically). A group of one
/// partners with itself.
pub fn morph_partners(group: &[String], seed: u64) -> Vec<(String, String)> {
    let mut order: Vec<String> = group.to_vec();
    order.sort();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let n = order.len();
    let mut pairs: Vec<(String, String)> = (0..n)
        .map(|i| (order[i].clone(), order[(i + 1) % n].clone()))
        .collect();
    pairs.sort();
    pairs
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::manipulate::default_grid;

    fn ids(n: usize) -> Vec<String> {
        (0..n).map(|i| format!("id{i:03}")).collect()
    }

    #[test]
    fn split_sizes_and_disjointness() {
        let s = split_identities(&ids(50), 42, 0.7).unwrap();
        assert_eq!((s.train.len(), s.test.len()), (35, 15));
        assert!(s.train.iter().all(|t| !s.is_test(t)));
        assert!(s.test.iter().all(|t| s.is_test(t) && !s.is_train(t)));
        let s10 = split_identities(&ids(10), 1, 0.7).unwrap();
        assert_eq!(s10.train.len(), 7);
    }

    #[test]
    fn split_is_deterministic_and_order_free() {
        let a = split_identities(&ids(20), 9, 0.7).unwrap();
        let mut rev = ids(20);
        rev.reverse();
        assert_eq!(a, split_identities(&rev, 9, 0.7).unwrap());
        assert_ne!(a.hash, split_identities(&ids(20), 10, 0.7).unwrap().hash);
    }

    #[test]
    fn split_hash_detects_leakage() {
        let s = split_identities(&ids(20), 3, 0.7).unwrap();
        let mut train = s.train.clone();
        train.push(s.test[0].clone());
        train.sort();
        assert_ne!(split_hash(&train, &s.test[1..]), s.hash);
    }

    #[test]
    fn degenerate_splits_are_errors() {
        assert!(matches!(split_identities(&ids(1), 0, 0.7), Err(Error::EmptySplit(_))));
        assert!(matches!(split_identities(&ids(2), 0, 0.1), Err(Error::EmptySplit(_))));
        let dup = vec!["a".to_string(), "a".to_string()];
        assert!(split_identities(&dup, 0, 0.5).is_err());
    }

    #[test]
    fn held_out_cells_are_class_extremes() {
        let grid = default_grid();
        let held = default_held_out(&grid);
        assert_eq!(held.len(), 12);
        assert!(held.contains(&"noise/gauss/s2".to_string()));
        assert!(held.contains(&"noise/gauss/s32".to_string()));
        assert!(held.contains(&"compression/jpeg/q100".to_string()));
        assert!(held.contains(&"compression/webp/q80".to_string()));
        assert!(!held.iter().any(|h| h.starts_with("morph")));
        let p6 = training_cells(&grid, Protocol::P6_8, &held);
        assert_eq!(p6.len(), 37);
        assert!(p6.contains("morph/landmark/a0.9"));
        assert_eq!(training_cells(&grid, Protocol::P8_8, &held).len(), 49);
    }

    #[test]
    fn partners_form_a_cycle() {
        let group = ids(7);
        let pairs = morph_partners(&group, 5);
        assert_eq!(pairs.len(), 7);
        assert!(pairs.iter().all(|(a, b)| a != b));
        let targets: BTreeSet<&String> = pairs.iter().map(|p| &p.1).collect();
        assert_eq!(targets.len(), 7);
        assert_eq!(morph_partners(&ids(1), 5), vec![("id000".into(), "id000".into())]);
    }
}
