//! The resource-plan cache.
//!
//! For each (operator implementation, subplan kind) the cache keeps a sorted,
//! dynamically resized array of data-characteristic keys (smaller-input size
//! in GB), each pointing at the best known resource configuration. Lookup is
//! a binary search with three modes: exact match, nearest neighbor within a
//! threshold, and inverse-distance weighted average of the flanking
//! neighbors. One cache belongs to one planner instance.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::cost::OperatorImpl;
use crate::resource::{ClusterConditions, ResourceConfig};

/// What kind of subplan a cache entry was computed for. Joins are the only
/// resource-bearing subplans today.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum SubplanKind {
    #[serde(rename = "join")]
    Join,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CacheLookupMode {
    #[serde(rename = "exact")]
    Exact,
    #[serde(rename = "nn")]
    NearestNeighbor,
    #[serde(rename = "wa")]
    WeightedAverage,
}

impl CacheLookupMode {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "exact" => Some(CacheLookupMode::Exact),
            "nn" => Some(CacheLookupMode::NearestNeighbor),
            "wa" => Some(CacheLookupMode::WeightedAverage),
            _ => None,
        }
    }

    pub fn label(&self) -> &'static str {
        match self {
            CacheLookupMode::Exact => "exact",
            CacheLookupMode::NearestNeighbor => "nn",
            CacheLookupMode::WeightedAverage => "wa",
        }
    }
}

impl fmt::Display for CacheLookupMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CacheStats {
    pub hits: u64,
    pub misses: u64,
    pub inserts: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct Entry {
    #[serde(rename = "ssGB")]
    key: f64,
    config: ResourceConfig,
}

/// Serialized cache image for cross-process reuse.
#[derive(Debug, Serialize, Deserialize)]
struct CacheFile {
    mode: CacheLookupMode,
    #[serde(rename = "thresholdGB")]
    threshold_gb: f64,
    entries: Vec<(OperatorImpl, SubplanKind, Entry)>,
}

#[derive(Debug, Clone)]
pub struct ResourcePlanCache {
    mode: CacheLookupMode,
    threshold_gb: f64,
    arrays: BTreeMap<(OperatorImpl, SubplanKind), Vec<Entry>>,
    stats: CacheStats,
}

impl ResourcePlanCache {
    pub fn new(mode: CacheLookupMode, threshold_gb: f64) -> Self {
        ResourcePlanCache {
            mode,
            threshold_gb,
            arrays: BTreeMap::new(),
            stats: CacheStats::default(),
        }
    }

    pub fn mode(&self) -> CacheLookupMode {
        self.mode
    }

    pub fn threshold_gb(&self) -> f64 {
        self.threshold_gb
    }

    pub fn stats(&self) -> CacheStats {
        self.stats
    }

    pub fn len(&self) -> usize {
        self.arrays.values().map(Vec::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn clear(&mut self) {
        self.arrays.clear();
        self.stats = CacheStats::default();
    }

    pub fn record_hit(&mut self) {
        self.stats.hits += 1;
    }

    pub fn record_miss(&mut self) {
        self.stats.misses += 1;
    }

    fn position(entries: &[Entry], key: f64) -> Result<usize, usize> {
        entries.binary_search_by(|e| e.key.total_cmp(&key))
    }

    /// Looks up the configuration for `ss_gb`, or `None` on a miss. An exact
    /// key match short-circuits in every mode. The weighted-average mode
    /// needs `cluster` to round interpolated configurations back onto the
    /// grid.
    pub fn lookup(
        &self,
        op: OperatorImpl,
        kind: SubplanKind,
        ss_gb: f64,
        cluster: &ClusterConditions,
    ) -> Option<ResourceConfig> {
        let entries = self.arrays.get(&(op, kind))?;
        if entries.is_empty() {
            return None;
        }
        let idx = match Self::position(entries, ss_gb) {
            Ok(i) => return Some(entries[i].config),
            Err(i) => i,
        };
        match self.mode {
            CacheLookupMode::Exact => None,
            CacheLookupMode::NearestNeighbor => {
                let mut nearest: Option<&Entry> = None;
                for i in [idx.checked_sub(1), (idx < entries.len()).then_some(idx)]
                    .into_iter()
                    .flatten()
                {
                    let e = &entries[i];
                    if nearest.map_or(true, |n| (e.key - ss_gb).abs() < (n.key - ss_gb).abs()) {
                        nearest = Some(e);
                    }
                }
                let n = nearest?;
                ((n.key - ss_gb).abs() <= self.threshold_gb).then_some(n.config)
            }
            CacheLookupMode::WeightedAverage => {
                let below = idx.checked_sub(1).map(|i| &entries[i]);
                let above = (idx < entries.len()).then(|| &entries[idx]);
                let within = |e: &&Entry| (e.key - ss_gb).abs() <= self.threshold_gb;
                match (below, above) {
                    // Interior: both flanking neighbors must be in range.
                    (Some(lo), Some(hi)) => {
                        if !within(&lo) || !within(&hi) {
                            return None;
                        }
                        let w_lo = 1.0 / (ss_gb - lo.key).abs();
                        let w_hi = 1.0 / (hi.key - ss_gb).abs();
                        let count = (w_lo * lo.config.container_count as f64
                            + w_hi * hi.config.container_count as f64)
                            / (w_lo + w_hi);
                        let gb = (w_lo * lo.config.container_gb as f64
                            + w_hi * hi.config.container_gb as f64)
                            / (w_lo + w_hi);
                        Some(cluster.nearest_grid_point(count, gb))
                    }
                    // Array end: a single in-range neighbor suffices.
                    (Some(e), None) | (None, Some(e)) => within(&e).then_some(e.config),
                    (None, None) => None,
                }
            }
        }
    }

    /// Inserts `ss_gb -> config`, keeping keys strictly increasing. An
    /// existing key is overwritten in place.
    pub fn insert(&mut self, op: OperatorImpl, kind: SubplanKind, ss_gb: f64, config: ResourceConfig) {
        let entries = self.arrays.entry((op, kind)).or_default();
        match Self::position(entries, ss_gb) {
            Ok(i) => entries[i].config = config,
            Err(i) => entries.insert(i, Entry { key: ss_gb, config }),
        }
        self.stats.inserts += 1;
    }

    pub fn to_json(&self) -> String {
        let entries = self
            .arrays
            .iter()
            .flat_map(|(&(op, kind), v)| v.iter().map(move |e| (op, kind, e.clone())))
            .collect();
        let file = CacheFile { mode: self.mode, threshold_gb: self.threshold_gb, entries };
        serde_json::to_string_pretty(&file).unwrap()
    }

    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        let file: CacheFile = serde_json::from_str(text)?;
        let mut cache = ResourcePlanCache::new(file.mode, file.threshold_gb);
        for (op, kind, e) in file.entries {
            cache.insert(op, kind, e.key, e.config);
        }
        cache.stats = CacheStats::default();
        Ok(cache)
    }

    #[cfg(test)]
    pub(crate) fn keys(&self, op: OperatorImpl, kind: SubplanKind) -> Vec<f64> {
        self.arrays
            .get(&(op, kind))
            .map(|v| v.iter().map(|e| e.key).collect())
            .unwrap_or_default()
    }
}
