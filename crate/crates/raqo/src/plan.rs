//! Annotated join trees.
//!
//! A [`PlanNode`] is either a base-table scan or a join carrying its operator
//! implementation, resource configuration, smaller-input size, and both the
//! operator's own cost and the cumulative subtree cost. The serialized form
//! is the plan artifact emitted by the CLI.

use std::collections::HashSet;

use serde::ser::SerializeStruct;
use serde::{Deserialize, Serialize, Serializer};
use thiserror::Error;

use crate::catalog::{Catalog, CatalogError};
use crate::cost::{CostError, CostModel, CostReport, OperatorImpl};
use crate::resource::{ClusterConditions, ResourceConfig};

#[derive(Debug, Error)]
pub enum PlanError {
    #[error("no feasible plan: every operator implementation is infeasible at every configuration")]
    NoFeasiblePlan,
    #[error("monetary budget infeasible: cheapest plan costs {cheapest} GB-s, budget {budget} GB-s")]
    BudgetInfeasible { cheapest: f64, budget: f64 },
    #[error(transparent)]
    Catalog(#[from] CatalogError),
    #[error(transparent)]
    Cost(#[from] CostError),
    #[error("invalid plan: {0}")]
    InvalidPlan(String),
}

#[derive(Debug, Clone, PartialEq)]
pub enum PlanNode {
    Scan {
        table: String,
        input_gb: f64,
    },
    Join {
        left: Box<PlanNode>,
        right: Box<PlanNode>,
        op: OperatorImpl,
        resources: ResourceConfig,
        /// Smaller input of the two sides, GB.
        ss_gb: f64,
        /// This join operator alone.
        op_cost: CostReport,
        /// Cumulative cost of the whole subtree, scans included.
        cost: CostReport,
    },
}

impl PlanNode {
    pub fn scan(catalog: &Catalog, table: &str) -> Result<PlanNode, CatalogError> {
        let t = catalog
            .table(table)
            .ok_or_else(|| CatalogError::UnknownTable(table.to_string()))?;
        Ok(PlanNode::Scan { table: t.name.clone(), input_gb: t.size_gb() })
    }

    /// Cumulative subtree cost; scans are priced with `model`.
    pub fn subtree_cost(&self, model: &CostModel) -> CostReport {
        match self {
            PlanNode::Scan { input_gb, .. } => CostReport {
                time_seconds: model.scan_cost_per_gb * input_gb,
                money_gb_seconds: 0.0,
            },
            PlanNode::Join { cost, .. } => *cost,
        }
    }

    pub fn relations(&self) -> HashSet<&str> {
        let mut out = HashSet::new();
        self.collect_relations(&mut out);
        out
    }

    fn collect_relations<'a>(&'a self, out: &mut HashSet<&'a str>) {
        match self {
            PlanNode::Scan { table, .. } => {
                out.insert(table.as_str());
            }
            PlanNode::Join { left, right, .. } => {
                left.collect_relations(out);
                right.collect_relations(out);
            }
        }
    }

    pub fn join_count(&self) -> usize {
        match self {
            PlanNode::Scan { .. } => 0,
            PlanNode::Join { left, right, .. } => 1 + left.join_count() + right.join_count(),
        }
    }

    /// True when every join's right child is a base scan.
    pub fn is_left_deep(&self) -> bool {
        match self {
            PlanNode::Scan { .. } => true,
            PlanNode::Join { left, right, .. } => {
                matches!(**right, PlanNode::Scan { .. }) && left.is_left_deep()
            }
        }
    }

    /// Structural validation: disjoint child relation sets with a crossing
    /// join edge, resources within bounds, and stored costs equal to their
    /// recomputation.
    pub fn validate(
        &self,
        catalog: &Catalog,
        model: &CostModel,
        cluster: &ClusterConditions,
    ) -> Result<(), PlanError> {
        self.validate_structure(catalog, cluster)?;
        let recomputed = model.plan_cost(self)?;
        let stored = self.subtree_cost(model);
        if recomputed != stored {
            return Err(PlanError::InvalidPlan(format!(
                "stored cost {stored:?} does not match recomputed {recomputed:?}"
            )));
        }
        Ok(())
    }

    fn validate_structure(
        &self,
        catalog: &Catalog,
        cluster: &ClusterConditions,
    ) -> Result<(), PlanError> {
        match self {
            PlanNode::Scan { table, .. } => {
                if catalog.table(table).is_none() {
                    return Err(CatalogError::UnknownTable(table.clone()).into());
                }
                Ok(())
            }
            PlanNode::Join { left, right, op, resources, op_cost, cost, .. } => {
                if !op.is_join() {
                    return Err(PlanError::InvalidPlan(format!("{op} is not a join")));
                }
                let lrel = left.relations();
                let rrel = right.relations();
                if !lrel.is_disjoint(&rrel) {
                    return Err(PlanError::InvalidPlan("child relation sets overlap".into()));
                }
                let crossing = catalog.edges.iter().any(|e| {
                    (lrel.contains(e.left.as_str()) && rrel.contains(e.right.as_str()))
                        || (lrel.contains(e.right.as_str()) && rrel.contains(e.left.as_str()))
                });
                if !crossing {
                    return Err(CatalogError::NoJoinEdge.into());
                }
                if !cluster.contains(*resources) {
                    return Err(PlanError::InvalidPlan(format!(
                        "resources {resources:?} outside cluster bounds"
                    )));
                }
                for r in [op_cost, cost] {
                    if r.time_seconds < 0.0 || r.money_gb_seconds < 0.0 {
                        return Err(PlanError::InvalidPlan("negative cost".into()));
                    }
                }
                left.validate_structure(catalog, cluster)?;
                right.validate_structure(catalog, cluster)
            }
        }
    }
}

// The emitted artifact nests {"scan": {...}} and {"join": {...}} objects with
// the per-join fields impl, containerCount, containerGB, ssGB, timeSeconds.
impl Serialize for PlanNode {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        match self {
            PlanNode::Scan { table, input_gb } => {
                #[derive(Serialize)]
                struct ScanBody<'a> {
                    table: &'a str,
                    #[serde(rename = "inputGB")]
                    input_gb: f64,
                }
                let mut s = serializer.serialize_struct("PlanNode", 1)?;
                s.serialize_field("scan", &ScanBody { table, input_gb: *input_gb })?;
                s.end()
            }
            PlanNode::Join { left, right, op, resources, ss_gb, op_cost, .. } => {
                #[derive(Serialize)]
                struct JoinBody<'a> {
                    #[serde(rename = "impl")]
                    op: OperatorImpl,
                    #[serde(rename = "containerCount")]
                    container_count: u32,
                    #[serde(rename = "containerGB")]
                    container_gb: u32,
                    #[serde(rename = "ssGB")]
                    ss_gb: f64,
                    #[serde(rename = "timeSeconds")]
                    time_seconds: f64,
                    left: &'a PlanNode,
                    right: &'a PlanNode,
                }
                let mut s = serializer.serialize_struct("PlanNode", 1)?;
                s.serialize_field(
                    "join",
                    &JoinBody {
                        op: *op,
                        container_count: resources.container_count,
                        container_gb: resources.container_gb,
                        ss_gb: *ss_gb,
                        time_seconds: op_cost.time_seconds,
                        left,
                        right,
                    },
                )?;
                s.end()
            }
        }
    }
}

/// Join-order/implementation skeleton parsed back from an emitted plan file;
/// resource annotations are recomputed when the skeleton is replanned.
#[derive(Debug, Clone, Deserialize)]
pub enum PlanSkeleton {
    #[serde(rename = "scan")]
    Scan { table: String },
    #[serde(rename = "join")]
    Join {
        #[serde(rename = "impl")]
        op: OperatorImpl,
        left: Box<PlanSkeleton>,
        right: Box<PlanSkeleton>,
    },
}

impl PlanSkeleton {
    pub fn relations(&self) -> Vec<String> {
        let mut out = Vec::new();
        self.collect(&mut out);
        out
    }

    fn collect(&self, out: &mut Vec<String>) {
        match self {
            PlanSkeleton::Scan { table } => out.push(table.clone()),
            PlanSkeleton::Join { left, right, .. } => {
                left.collect(out);
                right.collect(out);
            }
        }
    }
}
