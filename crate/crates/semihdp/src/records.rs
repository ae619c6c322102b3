//! Persisted posterior draws: one self-describing JSON record per line.

use crate::dist::{FiniteMixture, GaussianParam};
use crate::error::{Error, Result};
use crate::state::{canonical_partition, ChainState, Dish, Partition};
use serde::{Deserialize, Serialize};
use std::io::{BufRead, BufWriter, Write};
use std::path::Path;

/// Truncated mixture of one restaurant, stored column-wise with per-atom
/// area flag `h` (1 private, 0 shared) and source index `t` (1-based atom
/// index, 0 for fresh draws).
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct RestaurantMixture {
    pub weight: Vec<f64>,
    pub mu: Vec<f64>,
    pub sigma2: Vec<f64>,
    pub h: Vec<u8>,
    pub t: Vec<usize>,
}

impl RestaurantMixture {
    pub fn to_mixture(&self) -> Result<FiniteMixture> {
        let comps = self
            .mu
            .iter()
            .zip(&self.sigma2)
            .map(|(&mu, &sigma2)| GaussianParam { mu, sigma2 })
            .collect();
        FiniteMixture::new(self.weight.clone(), comps)
    }
}

/// One persisted draw: assignments, kappa, per-restaurant mixtures, and
/// derived count summaries.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct ChainRecord {
    /// Sweep index within the chain (absolute, including burn-in offset).
    pub iter: u64,
    /// Restaurant assignment per group, 1-based.
    pub c: Vec<usize>,
    pub kappa: f64,
    /// Shared dishes attached to at least one live table.
    pub h0: usize,
    /// Live tables per restaurant.
    pub h_r: Vec<usize>,
    /// Canonical partition labels of `c` (1-based block ranks).
    pub partition: Vec<usize>,
    /// Distinct dish values attached to customers of two or more groups.
    pub shared_unique: usize,
    /// Per group: distinct dish values attached only to that group.
    pub group_unique: Vec<usize>,
    /// Largest truncation error bound among this sweep's mixture draws.
    pub trunc_error: f64,
    pub restaurants: Vec<RestaurantMixture>,
}

impl ChainRecord {
    /// Canonical partition of the stored assignments.
    pub fn canonical(&self) -> Partition {
        canonical_partition(&self.c)
    }

    /// Number of distinct restaurants in use.
    pub fn n_population_clusters(&self) -> usize {
        self.canonical().n_blocks()
    }

    /// Mixture backing the density of `group` (0-based).
    pub fn group_mixture(&self, group: usize) -> Result<FiniteMixture> {
        let r = self.c[group] - 1;
        self.restaurants
            .get(r)
            .ok_or_else(|| Error::Data(format!("record has no restaurant {}", r + 1)))?
            .to_mixture()
    }
}

/// Dish-identity count summaries of a state: per-group exclusive unique
/// values and the number of values shared across groups.
pub fn unique_value_counts(state: &ChainState) -> (Vec<usize>, usize) {
    use std::collections::HashMap;
    // Dish identity: (restaurant, private index) or global shared index.
    #[derive(PartialEq, Eq, Hash)]
    enum Id {
        Private(usize, usize),
        Shared(usize),
    }
    let mut owners: HashMap<Id, u64> = HashMap::new();
    let n_groups = state.n_groups();
    for i in 0..n_groups {
        let r = state.c[i];
        for &l in &state.s[i] {
            let id = match state.restaurants[r].tables[l].dish {
                Dish::Private(p) => Id::Private(r, p),
                Dish::Shared(k) => Id::Shared(k),
            };
            *owners.entry(id).or_insert(0) |= 1u64 << i;
        }
    }
    let mut group_unique = vec![0usize; n_groups];
    let mut shared = 0usize;
    for mask in owners.values() {
        if mask.count_ones() >= 2 {
            shared += 1;
        } else {
            group_unique[mask.trailing_zeros() as usize] += 1;
        }
    }
    (group_unique, shared)
}

pub fn write_records_jsonl(path: &Path, records: &[ChainRecord]) -> Result<()> {
    let file = std::fs::File::create(path)?;
    let mut w = BufWriter::new(file);
    for rec in records {
        let line = serde_json::to_string(rec)
            .map_err(|e| Error::Data(format!("record serialization failed: {e}")))?;
        writeln!(w, "{line}")?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_records_jsonl(path: &Path) -> Result<Vec<ChainRecord>> {
    let file = std::fs::File::open(path)?;
    let reader = std::io::BufReader::new(file);
    let mut out = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: ChainRecord = serde_json::from_str(&line)
            .map_err(|e| Error::Data(format!("record line {}: {e}", idx + 1)))?;
        out.push(rec);
    }
    Ok(out)
}
