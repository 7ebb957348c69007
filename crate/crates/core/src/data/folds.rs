//! Cross-validation fold assignment: lexicographic sort, seeded shuffle,
//! round-robin.

use crate::rng::Rng;
use crate::{Error, Result};
use std::collections::BTreeMap;

#[derive(Debug, Clone)]
pub struct FoldPlan {
    pub k: usize,
    pub assignment: BTreeMap<String, usize>,
}

impl FoldPlan {
    pub fn files_in(&self, fold: usize) -> Vec<String> {
        self.assignment
            .iter()
            .filter(|(_, &f)| f == fold)
            .map(|(name, _)| name.clone())
            .collect()
    }

    pub fn files_not_in(&self, fold: usize) -> Vec<String> {
        self.assignment
            .iter()
            .filter(|(_, &f)| f != fold)
            .map(|(name, _)| name.clone())
            .collect()
    }
}

pub fn make_folds(file_ids: &[String], k: usize, seed: u64) -> Result<FoldPlan> {
    if k == 0 {
        return Err(Error::InvalidConfig("fold count must be positive".into()));
    }
    if file_ids.len() < k {
        return Err(Error::InvalidConfig(format!(
            "{} files cannot fill {k} folds",
            file_ids.len()
        )));
    }
    let mut sorted: Vec<String> = file_ids.to_vec();
    sorted.sort();
    sorted.dedup();
    if sorted.len() < k {
        return Err(Error::InvalidConfig("too few distinct files".into()));
    }
    let mut rng = Rng::new(seed);
    rng.shuffle(&mut sorted);
    let assignment = sorted
        .into_iter()
        .enumerate()
        .map(|(i, name)| (name, i % k))
        .collect();
    Ok(FoldPlan { k, assignment })
}
