//! Resource planning over the discrete (container count, container size) grid.
//!
//! Three strategies per join operator: exhaustive grid scan, greedy hill
//! climbing from the smallest configuration, and hill climbing behind the
//! resource-plan cache. All searches minimize predicted operator time and
//! report the number of distinct configurations they evaluated.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cache::{ResourcePlanCache, SubplanKind};
use crate::cost::{CostError, CostModel, OperatorImpl};

#[derive(Debug, Error, PartialEq)]
pub enum ResourceError {
    #[error("no feasible resource configuration on the grid ({explored} explored)")]
    NoFeasibleConfig { explored: u64 },
    #[error(transparent)]
    Cost(CostError),
    #[error("invalid cluster conditions: {0}")]
    InvalidCluster(String),
}

/// A point in the resource grid: how many containers, and how large.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ResourceConfig {
    #[serde(rename = "containerCount")]
    pub container_count: u32,
    #[serde(rename = "containerGB")]
    pub container_gb: u32,
}

impl ResourceConfig {
    pub fn new(container_count: u32, container_gb: u32) -> Self {
        ResourceConfig { container_count, container_gb }
    }
}

/// Per-dimension step granularity of the grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct StepSizes {
    #[serde(rename = "containerCount")]
    pub container_count: u32,
    #[serde(rename = "containerGB")]
    pub container_gb: u32,
}

/// Current bounds and granularity of the resource grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClusterConditions {
    pub min: ResourceConfig,
    pub max: ResourceConfig,
    pub step: StepSizes,
}

impl ClusterConditions {
    /// Grid with automatic steps: `max(1, (max - min) / 100)` per dimension,
    /// so the default 100 x 10 cluster steps by 1 and very large clusters
    /// keep at most ~101 values per axis.
    pub fn new(min: ResourceConfig, max: ResourceConfig) -> Result<Self, ResourceError> {
        let auto = |lo: u32, hi: u32| ((hi - lo) / 100).max(1);
        Self::with_steps(
            min,
            max,
            StepSizes {
                container_count: auto(min.container_count, max.container_count),
                container_gb: auto(min.container_gb, max.container_gb),
            },
        )
    }

    pub fn with_steps(
        min: ResourceConfig,
        max: ResourceConfig,
        step: StepSizes,
    ) -> Result<Self, ResourceError> {
        if min.container_count < 1 || min.container_gb < 1 {
            return Err(ResourceError::InvalidCluster("minimum must be at least 1x1".into()));
        }
        if min.container_count > max.container_count || min.container_gb > max.container_gb {
            return Err(ResourceError::InvalidCluster("min exceeds max".into()));
        }
        if step.container_count < 1 || step.container_gb < 1 {
            return Err(ResourceError::InvalidCluster("steps must be at least 1".into()));
        }
        Ok(ClusterConditions { min, max, step })
    }

    /// The default cluster: 1..=100 containers of 1..=10 GB, step 1 on both
    /// axes.
    pub fn default_cluster() -> Self {
        ClusterConditions {
            min: ResourceConfig::new(1, 1),
            max: ResourceConfig::new(100, 10),
            step: StepSizes { container_count: 1, container_gb: 1 },
        }
    }

    /// Number of container-count values on the grid (`r_p`).
    pub fn count_values(&self) -> u64 {
        ((self.max.container_count - self.min.container_count) / self.step.container_count) as u64
            + 1
    }

    /// Number of container-size values on the grid (`r_c`).
    pub fn gb_values(&self) -> u64 {
        ((self.max.container_gb - self.min.container_gb) / self.step.container_gb) as u64 + 1
    }

    pub fn grid_size(&self) -> u64 {
        self.count_values() * self.gb_values()
    }

    pub fn contains(&self, c: ResourceConfig) -> bool {
        c.container_count >= self.min.container_count
            && c.container_count <= self.max.container_count
            && c.container_gb >= self.min.container_gb
            && c.container_gb <= self.max.container_gb
    }

    pub fn iter_counts(&self) -> impl Iterator<Item = u32> + '_ {
        (self.min.container_count..=self.max.container_count)
            .step_by(self.step.container_count as usize)
    }

    pub fn iter_gbs(&self) -> impl Iterator<Item = u32> + '_ {
        (self.min.container_gb..=self.max.container_gb).step_by(self.step.container_gb as usize)
    }

    /// Rounds real-valued coordinates to the nearest grid point.
    pub fn nearest_grid_point(&self, count: f64, gb: f64) -> ResourceConfig {
        let snap = |x: f64, lo: u32, hi: u32, st: u32| {
            let steps_max = (hi - lo) / st;
            let k = ((x - lo as f64) / st as f64).round();
            let k = k.clamp(0.0, steps_max as f64) as u32;
            lo + k * st
        };
        ResourceConfig {
            container_count: snap(
                count,
                self.min.container_count,
                self.max.container_count,
                self.step.container_count,
            ),
            container_gb: snap(gb, self.min.container_gb, self.max.container_gb, self.step.container_gb),
        }
    }
}

/// Outcome of one resource-planning call.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ResourceDecision {
    pub config: ResourceConfig,
    /// Predicted operator time at `config`, seconds.
    pub cost: f64,
    /// Distinct grid configurations evaluated by the search.
    pub configs_explored: u64,
}

/// How resources are chosen per join operator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ResourceStrategy {
    #[serde(rename = "bf")]
    BruteForce,
    #[serde(rename = "hc")]
    HillClimb,
    #[serde(rename = "hc-cache")]
    HillClimbCached,
}

impl ResourceStrategy {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "bf" => Some(ResourceStrategy::BruteForce),
            "hc" => Some(ResourceStrategy::HillClimb),
            "hc-cache" => Some(ResourceStrategy::HillClimbCached),
            _ => None,
        }
    }

    pub fn label(&self) -> &'static str {
        match self {
            ResourceStrategy::BruteForce => "bf",
            ResourceStrategy::HillClimb => "hc",
            ResourceStrategy::HillClimbCached => "hc-cache",
        }
    }
}

fn money_of(cost: f64, c: ResourceConfig) -> f64 {
    cost * c.container_count as f64 * c.container_gb as f64
}

/// Exhaustive scan of every grid point. Returns the minimum-time feasible
/// configuration; ties break toward lower money, then fewer containers, then
/// smaller containers. `configs_explored` is always the full grid size.
pub fn brute_force_plan(
    model: &CostModel,
    op: OperatorImpl,
    ss_gb: f64,
    cluster: &ClusterConditions,
) -> Result<ResourceDecision, ResourceError> {
    let mut best: Option<(f64, f64, ResourceConfig)> = None;
    let mut explored = 0u64;
    for count in cluster.iter_counts() {
        for gb in cluster.iter_gbs() {
            explored += 1;
            let config = ResourceConfig::new(count, gb);
            let cost = match model.join_cost(op, ss_gb, config) {
                Ok(c) => c,
                Err(CostError::InfeasibleOperator { .. }) => continue,
                Err(e) => return Err(ResourceError::Cost(e)),
            };
            let money = money_of(cost, config);
            let better = match &best {
                None => true,
                Some((bc, bm, bcfg)) => {
                    (cost, money, config.container_count, config.container_gb)
                        < (*bc, *bm, bcfg.container_count, bcfg.container_gb)
                }
            };
            if better {
                best = Some((cost, money, config));
            }
        }
    }
    match best {
        Some((cost, _, config)) => Ok(ResourceDecision { config, cost, configs_explored: explored }),
        None => Err(ResourceError::NoFeasibleConfig { explored }),
    }
}

/// Greedy coordinate hill climbing from `start` (the smallest configuration
/// by default). Each outer iteration probes one step forward and backward per
/// dimension, immediately applies a step that beats the best cost seen this
/// iteration, and stops when no step improves on the iteration's starting
/// cost. Infeasible points price as infinite. Repeated evaluations of the
/// same point are served from a per-call memo, so `configs_explored` counts
/// distinct configurations.
pub fn hill_climb_plan(
    model: &CostModel,
    op: OperatorImpl,
    ss_gb: f64,
    start: ResourceConfig,
    cluster: &ClusterConditions,
) -> Result<ResourceDecision, ResourceError> {
    debug_assert!(cluster.contains(start));
    let steps = [cluster.step.container_count as i64, cluster.step.container_gb as i64];
    let lo = [cluster.min.container_count as i64, cluster.min.container_gb as i64];
    let hi = [cluster.max.container_count as i64, cluster.max.container_gb as i64];
    let candidate: [i64; 2] = [-1, 1];

    let mut memo: HashMap<(i64, i64), f64> = HashMap::new();
    let mut eval = |pos: [i64; 2]| -> Result<f64, ResourceError> {
        if let Some(&c) = memo.get(&(pos[0], pos[1])) {
            return Ok(c);
        }
        let config = ResourceConfig::new(pos[0] as u32, pos[1] as u32);
        let cost = match model.join_cost(op, ss_gb, config) {
            Ok(c) => c,
            Err(CostError::InfeasibleOperator { .. }) => f64::INFINITY,
            Err(e) => return Err(ResourceError::Cost(e)),
        };
        memo.insert((pos[0], pos[1]), cost);
        Ok(cost)
    };

    let mut curr = [start.container_count as i64, start.container_gb as i64];
    loop {
        let curr_cost = eval(curr)?;
        let mut best_cost = curr_cost;
        for dim in 0..2 {
            let mut best_step: Option<i64> = None;
            for &dir in &candidate {
                let delta = steps[dim] * dir;
                let moved = curr[dim] + delta;
                if moved >= lo[dim] && moved <= hi[dim] {
                    curr[dim] += delta;
                    let temp = eval(curr)?;
                    curr[dim] -= delta;
                    if temp < best_cost {
                        best_cost = temp;
                        best_step = Some(delta);
                    }
                }
            }
            if let Some(delta) = best_step {
                curr[dim] += delta;
            }
        }
        if best_cost >= curr_cost {
            // no better neighbor exists
            let explored = memo.len() as u64;
            let final_cost = eval(curr)?;
            if final_cost.is_infinite() {
                return Err(ResourceError::NoFeasibleConfig { explored });
            }
            return Ok(ResourceDecision {
                config: ResourceConfig::new(curr[0] as u32, curr[1] as u32),
                cost: final_cost,
                configs_explored: explored,
            });
        }
    }
}

/// Strategy dispatch, including the cache fast path. Under
/// [`ResourceStrategy::HillClimbCached`], a usable cache hit is priced with a
/// single cost evaluation and reported as one explored configuration; a miss
/// runs the hill climb and inserts the result. Hits whose stored
/// configuration falls outside the current cluster bounds, or is infeasible
/// for this input, are treated as misses.
pub fn plan_resources(
    model: &CostModel,
    op: OperatorImpl,
    ss_gb: f64,
    cluster: &ClusterConditions,
    cache: &mut ResourcePlanCache,
    strategy: ResourceStrategy,
) -> Result<ResourceDecision, ResourceError> {
    match strategy {
        ResourceStrategy::BruteForce => brute_force_plan(model, op, ss_gb, cluster),
        ResourceStrategy::HillClimb => hill_climb_plan(model, op, ss_gb, cluster.min, cluster),
        ResourceStrategy::HillClimbCached => {
            if let Some(config) = cache.lookup(op, SubplanKind::Join, ss_gb, cluster) {
                if cluster.contains(config) {
                    match model.join_cost(op, ss_gb, config) {
                        Ok(cost) => {
                            cache.record_hit();
                            return Ok(ResourceDecision { config, cost, configs_explored: 1 });
                        }
                        Err(CostError::InfeasibleOperator { .. }) => {}
                        Err(e) => return Err(ResourceError::Cost(e)),
                    }
                }
            }
            cache.record_miss();
            let decision = hill_climb_plan(model, op, ss_gb, cluster.min, cluster)?;
            cache.insert(op, SubplanKind::Join, ss_gb, decision.config);
            Ok(decision)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cache::CacheLookupMode;

    #[test]
    fn default_cluster_grid_size() {
        let c = ClusterConditions::default_cluster();
        assert_eq!(c.count_values(), 100);
        assert_eq!(c.gb_values(), 10);
        assert_eq!(c.grid_size(), 1000);
    }

    #[test]
    fn auto_steps_scale_with_range() {
        let small = ClusterConditions::new(ResourceConfig::new(1, 1), ResourceConfig::new(100, 10))
            .unwrap();
        assert_eq!(small.step, StepSizes { container_count: 1, container_gb: 1 });
        let huge =
            ClusterConditions::new(ResourceConfig::new(1, 1), ResourceConfig::new(100_000, 100))
                .unwrap();
        assert_eq!(huge.step.container_count, 999);
        assert_eq!(huge.step.container_gb, 1);
        assert!(huge.count_values() <= 101);
    }

    #[test]
    fn brute_force_explores_whole_grid() {
        let model = CostModel::default();
        let cluster = ClusterConditions::default_cluster();
        let d = brute_force_plan(&model, OperatorImpl::Smj, 5.1, &cluster).unwrap();
        assert_eq!(d.configs_explored, 1000);
        assert!(cluster.contains(d.config));
    }

    #[test]
    fn brute_force_single_point_grid() {
        let model = CostModel::default();
        let cluster = ClusterConditions::with_steps(
            ResourceConfig::new(7, 3),
            ResourceConfig::new(7, 3),
            StepSizes { container_count: 1, container_gb: 1 },
        )
        .unwrap();
        let d = brute_force_plan(&model, OperatorImpl::Smj, 1.0, &cluster).unwrap();
        assert_eq!(d.config, ResourceConfig::new(7, 3));
        assert_eq!(d.configs_explored, 1);
    }

    #[test]
    fn brute_force_no_feasible_config() {
        let model = CostModel::default();
        let cluster = ClusterConditions::default_cluster();
        // BHJ with a 20 GB build side cannot fit in any container <= 10 GB.
        let err = brute_force_plan(&model, OperatorImpl::Bhj, 20.0, &cluster).unwrap_err();
        assert_eq!(err, ResourceError::NoFeasibleConfig { explored: 1000 });
    }

    #[test]
    fn brute_force_matches_exhaustive_oracle() {
        // Independent exhaustive scan with the same tie-breaks.
        let model = CostModel::default();
        let cluster = ClusterConditions::with_steps(
            ResourceConfig::new(1, 1),
            ResourceConfig::new(10, 10),
            StepSizes { container_count: 1, container_gb: 1 },
        )
        .unwrap();
        for &(op, ss) in &[
            (OperatorImpl::Smj, 5.1),
            (OperatorImpl::Smj, 0.2),
            (OperatorImpl::Bhj, 1.5),
            (OperatorImpl::Bhj, 6.0),
        ] {
            let got = brute_force_plan(&model, op, ss, &cluster).unwrap();
            let mut oracle: Option<(f64, f64, u32, u32)> = None;
            for count in 1..=10u32 {
                for gb in 1..=10u32 {
                    if let Ok(c) = model.join_cost(op, ss, ResourceConfig::new(count, gb)) {
                        let key = (c, c * count as f64 * gb as f64, count, gb);
                        if oracle.map_or(true, |o| key < o) {
                            oracle = Some(key);
                        }
                    }
                }
            }
            let o = oracle.unwrap();
            assert_eq!(got.cost, o.0, "{op} ss={ss}");
            assert_eq!((got.config.container_count, got.config.container_gb), (o.2, o.3));
        }
    }

    #[test]
    fn hill_climb_monotone_surface_reaches_corner() {
        // Cost strictly decreasing in container count only: the climb must
        // end at (max count, min gb).
        let model = CostModel::from_coefficients(vec![(
            OperatorImpl::Smj,
            [100.0, 0.0, 0.0, 0.0, -1.0, 0.0, 0.0],
        )]);
        let cluster = ClusterConditions::with_steps(
            ResourceConfig::new(1, 1),
            ResourceConfig::new(10, 10),
            StepSizes { container_count: 1, container_gb: 1 },
        )
        .unwrap();
        let d = hill_climb_plan(&model, OperatorImpl::Smj, 1.0, cluster.min, &cluster).unwrap();
        assert_eq!(d.config, ResourceConfig::new(10, 1));
    }

    #[test]
    fn hill_climb_explores_at_most_grid() {
        let model = CostModel::default();
        let cluster = ClusterConditions::default_cluster();
        for &ss in &[0.01, 0.3, 1.9, 5.1, 40.0] {
            let hc = hill_climb_plan(&model, OperatorImpl::Smj, ss, cluster.min, &cluster).unwrap();
            assert!(hc.configs_explored <= cluster.grid_size());
        }
    }

    #[test]
    fn hill_climb_result_is_locally_optimal() {
        let model = CostModel::default();
        let cluster = ClusterConditions::default_cluster();
        let d = hill_climb_plan(&model, OperatorImpl::Smj, 5.1, cluster.min, &cluster).unwrap();
        let c = d.config;
        for (dc, dg) in [(-1i64, 0i64), (1, 0), (0, -1), (0, 1)] {
            let count = c.container_count as i64 + dc;
            let gb = c.container_gb as i64 + dg;
            let n = ResourceConfig::new(count.max(0) as u32, gb.max(0) as u32);
            if !cluster.contains(n) {
                continue;
            }
            if let Ok(cost) = model.join_cost(OperatorImpl::Smj, 5.1, n) {
                assert!(cost >= d.cost);
            }
        }
    }

    #[test]
    fn hill_climb_escapes_infeasible_start() {
        // BHJ with ss=1.5 is infeasible at (1,1) but feasible at gb >= 2;
        // the climb walks out of the out-of-memory region.
        let model = CostModel::default();
        let cluster = ClusterConditions::default_cluster();
        let d = hill_climb_plan(&model, OperatorImpl::Bhj, 1.5, cluster.min, &cluster).unwrap();
        assert!(d.config.container_gb as f64 * 0.8 >= 1.5);
        assert!(d.cost.is_finite());
    }

    #[test]
    fn hill_climb_all_infeasible() {
        let model = CostModel::default();
        let cluster = ClusterConditions::default_cluster();
        let err =
            hill_climb_plan(&model, OperatorImpl::Bhj, 50.0, cluster.min, &cluster).unwrap_err();
        assert!(matches!(err, ResourceError::NoFeasibleConfig { .. }));
    }

    #[test]
    fn cached_strategy_memoizes_identical_calls() {
        let model = CostModel::default();
        let cluster = ClusterConditions::default_cluster();
        let mut cache = ResourcePlanCache::new(CacheLookupMode::Exact, 0.0);
        let first = plan_resources(
            &model,
            OperatorImpl::Smj,
            2.0,
            &cluster,
            &mut cache,
            ResourceStrategy::HillClimbCached,
        )
        .unwrap();
        assert!(first.configs_explored > 1);
        let second = plan_resources(
            &model,
            OperatorImpl::Smj,
            2.0,
            &cluster,
            &mut cache,
            ResourceStrategy::HillClimbCached,
        )
        .unwrap();
        assert_eq!(second.config, first.config);
        assert_eq!(second.cost, first.cost);
        assert!(second.configs_explored <= 1);
        assert_eq!(cache.stats().hits, 1);
        assert_eq!(cache.stats().misses, 1);
    }

    #[test]
    fn nearest_grid_point_snaps_and_clamps() {
        let c = ClusterConditions::with_steps(
            ResourceConfig::new(1, 1),
            ResourceConfig::new(100, 10),
            StepSizes { container_count: 1, container_gb: 1 },
        )
        .unwrap();
        assert_eq!(c.nearest_grid_point(20.4, 5.6), ResourceConfig::new(20, 6));
        assert_eq!(c.nearest_grid_point(-3.0, 99.0), ResourceConfig::new(1, 10));
    }
}
