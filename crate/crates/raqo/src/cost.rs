//! The learned per-operator cost model.
//!
//! Join operator time is a dot product of a per-implementation coefficient
//! vector with the 7-feature expansion `[ss, ss^2, cs, cs^2, nc, nc^2, cs*nc]`
//! of smaller-input size (GB), container size (GB), and container count,
//! clamped below at [`FLOOR_COST`]. Plan time is the sum over join operators;
//! monetary cost is container occupancy, `time * count * size` in GB-seconds.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::plan::PlanNode;
use crate::resource::ResourceConfig;

/// Lower clamp on predicted operator time, in seconds. The regression
/// coefficients can predict negative times on parts of the grid; plan
/// comparison needs positive costs.
pub const FLOOR_COST: f64 = 0.001;

pub const FEATURE_LEN: usize = 7;

/// Default fraction of a container's memory a broadcast build side may use.
pub const DEFAULT_MEMORY_FRACTION: f64 = 0.8;

// Regression coefficients fitted over Hive profile runs, over the feature
// vector [ss, ss^2, cs, cs^2, nc, nc^2, cs*nc].
const SMJ_COEFFICIENTS: [f64; 7] = [
    1.62643613e+01,
    9.68774888e-01,
    1.33866542e-02,
    1.60639851e-01,
    -7.82618920e-03,
    -3.91309460e-01,
    1.10387975e-01,
];
const BHJ_COEFFICIENTS: [f64; 7] = [
    1.00739509e+04,
    -6.72184592e+02,
    -1.37392901e+01,
    -1.64871481e+02,
    2.44721676e-02,
    1.22360838e+00,
    -1.37319484e+02,
];

#[derive(Debug, Error, PartialEq)]
pub enum CostError {
    #[error("no coefficients for operator implementation {0}")]
    UnknownImplementation(OperatorImpl),
    #[error("{op} infeasible: smaller input {ss_gb} GB exceeds {fraction} x {container_gb} GB container")]
    InfeasibleOperator {
        op: OperatorImpl,
        ss_gb: f64,
        container_gb: f64,
        fraction: f64,
    },
    #[error("coefficient vector for {0} must have exactly {FEATURE_LEN} entries")]
    BadCoefficientCount(String),
}

/// Physical operator implementations. `Smj` and `Bhj` are the two join
/// implementations; `FullScan` is the single scan implementation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum OperatorImpl {
    #[serde(rename = "SMJ")]
    Smj,
    #[serde(rename = "BHJ")]
    Bhj,
    #[serde(rename = "FULLSCAN")]
    FullScan,
}

/// The two join implementations, in deterministic tie-break order.
pub const JOIN_IMPLS: [OperatorImpl; 2] = [OperatorImpl::Smj, OperatorImpl::Bhj];

impl OperatorImpl {
    pub fn is_join(self) -> bool {
        matches!(self, OperatorImpl::Smj | OperatorImpl::Bhj)
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s.to_ascii_uppercase().as_str() {
            "SMJ" => Some(OperatorImpl::Smj),
            "BHJ" => Some(OperatorImpl::Bhj),
            "FULLSCAN" => Some(OperatorImpl::FullScan),
            _ => None,
        }
    }
}

impl fmt::Display for OperatorImpl {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            OperatorImpl::Smj => write!(f, "SMJ"),
            OperatorImpl::Bhj => write!(f, "BHJ"),
            OperatorImpl::FullScan => write!(f, "FULLSCAN"),
        }
    }
}

/// Expands `(ss, cs, nc)` into the 7-feature vector.
pub fn expand_features(ss: f64, cs: f64, nc: f64) -> [f64; FEATURE_LEN] {
    [ss, ss * ss, cs, cs * cs, nc, nc * nc, cs * nc]
}

/// Time and monetary cost of an operator or plan.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CostReport {
    #[serde(rename = "timeSeconds")]
    pub time_seconds: f64,
    #[serde(rename = "moneyGBSeconds")]
    pub money_gb_seconds: f64,
}

impl CostReport {
    pub const ZERO: CostReport = CostReport { time_seconds: 0.0, money_gb_seconds: 0.0 };

    pub fn add(self, other: CostReport) -> CostReport {
        CostReport {
            time_seconds: self.time_seconds + other.time_seconds,
            money_gb_seconds: self.money_gb_seconds + other.money_gb_seconds,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sign {
    Negative,
    Zero,
    Positive,
}

impl Sign {
    fn of(x: f64) -> Sign {
        if x > 0.0 {
            Sign::Positive
        } else if x < 0.0 {
            Sign::Negative
        } else {
            Sign::Zero
        }
    }
}

/// Signs of the container-size and container-count coefficients of one
/// implementation: positions `cs`, `cs^2`, `nc`, `nc^2`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SignPattern {
    pub cs: Sign,
    pub cs_sq: Sign,
    pub nc: Sign,
    pub nc_sq: Sign,
}

/// Per-implementation coefficient vectors plus the scan cost term.
#[derive(Debug, Clone, PartialEq)]
pub struct CostModel {
    coefficients: BTreeMap<OperatorImpl, [f64; FEATURE_LEN]>,
    pub scan_cost_per_gb: f64,
    pub memory_fraction: f64,
}

impl Default for CostModel {
    /// The embedded default: the published SMJ/BHJ vectors, scans free,
    /// broadcast memory fraction 0.8.
    fn default() -> Self {
        let mut coefficients = BTreeMap::new();
        coefficients.insert(OperatorImpl::Smj, SMJ_COEFFICIENTS);
        coefficients.insert(OperatorImpl::Bhj, BHJ_COEFFICIENTS);
        CostModel {
            coefficients,
            scan_cost_per_gb: 0.0,
            memory_fraction: DEFAULT_MEMORY_FRACTION,
        }
    }
}

impl CostModel {
    pub fn from_coefficients(entries: Vec<(OperatorImpl, [f64; FEATURE_LEN])>) -> Self {
        CostModel {
            coefficients: entries.into_iter().collect(),
            scan_cost_per_gb: 0.0,
            memory_fraction: DEFAULT_MEMORY_FRACTION,
        }
    }

    /// Parses `{"SMJ": [7 reals], "BHJ": [7 reals]}`.
    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        let raw: BTreeMap<String, Vec<f64>> = serde_json::from_str(text)?;
        let mut coefficients = BTreeMap::new();
        for (name, vec) in raw {
            let op = OperatorImpl::parse(&name).ok_or_else(|| {
                serde::de::Error::custom(format!("unknown operator implementation `{name}`"))
            })?;
            let arr: [f64; FEATURE_LEN] = vec.try_into().map_err(|_| {
                serde::de::Error::custom(CostError::BadCoefficientCount(name).to_string())
            })?;
            coefficients.insert(op, arr);
        }
        Ok(CostModel {
            coefficients,
            scan_cost_per_gb: 0.0,
            memory_fraction: DEFAULT_MEMORY_FRACTION,
        })
    }

    pub fn to_json(&self) -> String {
        let raw: BTreeMap<String, Vec<f64>> = self
            .coefficients
            .iter()
            .map(|(op, c)| (op.to_string(), c.to_vec()))
            .collect();
        serde_json::to_string_pretty(&raw).unwrap()
    }

    pub fn coefficients(&self, op: OperatorImpl) -> Option<&[f64; FEATURE_LEN]> {
        self.coefficients.get(&op)
    }

    /// Join implementations this model can price, in tie-break order.
    pub fn join_impls(&self) -> impl Iterator<Item = OperatorImpl> + '_ {
        JOIN_IMPLS
            .into_iter()
            .filter(|op| self.coefficients.contains_key(op))
    }

    /// Predicted join time with real-valued resource coordinates. Used by the
    /// grid search (through [`CostModel::join_cost`]) and by decision-tree
    /// grid labeling.
    pub fn join_cost_raw(
        &self,
        op: OperatorImpl,
        ss_gb: f64,
        container_gb: f64,
        container_count: f64,
    ) -> Result<f64, CostError> {
        if !op.is_join() {
            return Err(CostError::UnknownImplementation(op));
        }
        let coeffs = self
            .coefficients
            .get(&op)
            .ok_or(CostError::UnknownImplementation(op))?;
        if op == OperatorImpl::Bhj && ss_gb > self.memory_fraction * container_gb {
            return Err(CostError::InfeasibleOperator {
                op,
                ss_gb,
                container_gb,
                fraction: self.memory_fraction,
            });
        }
        let features = expand_features(ss_gb, container_gb, container_count);
        let mut dot = 0.0;
        for (c, f) in coeffs.iter().zip(features.iter()) {
            dot += c * f;
        }
        Ok(dot.max(FLOOR_COST))
    }

    /// Predicted time of one join operator under `config`, in seconds.
    pub fn join_cost(
        &self,
        op: OperatorImpl,
        ss_gb: f64,
        config: ResourceConfig,
    ) -> Result<f64, CostError> {
        self.join_cost_raw(
            op,
            ss_gb,
            config.container_gb as f64,
            config.container_count as f64,
        )
    }

    /// Recomputed cost of an annotated plan: joins priced from their stored
    /// `(impl, ss, resources)`, scans at `scan_cost_per_gb` per input GB.
    /// Money accrues only on joins.
    pub fn plan_cost(&self, plan: &PlanNode) -> Result<CostReport, CostError> {
        match plan {
            PlanNode::Scan { input_gb, .. } => Ok(CostReport {
                time_seconds: self.scan_cost_per_gb * input_gb,
                money_gb_seconds: 0.0,
            }),
            PlanNode::Join { left, right, op, resources, ss_gb, .. } => {
                let lc = self.plan_cost(left)?;
                let rc = self.plan_cost(right)?;
                let time = self.join_cost(*op, *ss_gb, *resources)?;
                let money =
                    time * resources.container_count as f64 * resources.container_gb as f64;
                Ok(lc.add(rc).add(CostReport { time_seconds: time, money_gb_seconds: money }))
            }
        }
    }

    /// Sign pattern of the `cs`, `cs^2`, `nc`, `nc^2` coefficients per
    /// implementation.
    pub fn coefficient_signature(&self) -> BTreeMap<OperatorImpl, SignPattern> {
        self.coefficients
            .iter()
            .map(|(op, c)| {
                (
                    *op,
                    SignPattern {
                        cs: Sign::of(c[2]),
                        cs_sq: Sign::of(c[3]),
                        nc: Sign::of(c[4]),
                        nc_sq: Sign::of(c[5]),
                    },
                )
            })
            .collect()
    }
}
