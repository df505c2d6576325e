//! Schemas, join graphs, and queries.
//!
//! A [`Catalog`] holds base-table statistics (row count, row width) and the
//! join graph: one undirected edge per joinable table pair, annotated with a
//! selectivity. Cardinality estimation multiplies base cardinalities by the
//! selectivities of every join edge internal to the relation set, so PK-FK
//! edges with the `1/max(|A|,|B|)` convention yield `|A join B| = min(|A|,|B|)`.
//!
//! Queries over relation sets that are not connected in the join graph are
//! rejected: cross products are never planned.

use std::collections::{HashMap, HashSet};

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const BYTES_PER_GB: f64 = 1024.0 * 1024.0 * 1024.0;

#[derive(Debug, Error, PartialEq)]
pub enum CatalogError {
    #[error("unknown table `{0}`")]
    UnknownTable(String),
    #[error("duplicate table `{0}`")]
    DuplicateTable(String),
    #[error("join edge endpoints must differ (`{0}`)")]
    SelfJoinEdge(String),
    #[error("duplicate join edge between `{0}` and `{1}`")]
    DuplicateEdge(String, String),
    #[error("selectivity must be in (0, 1], got {0}")]
    BadSelectivity(f64),
    #[error("table `{0}` must have rowCount >= 1 and rowBytes >= 1")]
    BadTableStats(String),
    #[error("no join edge crosses the two relation sets (cross product refused)")]
    NoJoinEdge,
    #[error("query relations are not connected in the join graph")]
    DisconnectedQuery,
    #[error("query must name at least one relation")]
    EmptyQuery,
    #[error("query names relation `{0}` more than once")]
    DuplicateRelation(String),
}

/// A base table: name, cardinality, and average row width in bytes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Table {
    pub name: String,
    #[serde(rename = "rowCount")]
    pub row_count: u64,
    #[serde(rename = "rowBytes")]
    pub row_bytes: u64,
}

impl Table {
    pub fn size_bytes(&self) -> u64 {
        self.row_count * self.row_bytes
    }

    pub fn size_gb(&self) -> f64 {
        self.size_bytes() as f64 / BYTES_PER_GB
    }
}

/// An undirected join edge with its selectivity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JoinEdge {
    pub left: String,
    pub right: String,
    pub selectivity: f64,
}

/// Tables plus the join graph over them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Catalog {
    pub tables: Vec<Table>,
    pub edges: Vec<JoinEdge>,
}

/// A query is the set of relations to join, in declaration order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Query {
    pub relations: Vec<String>,
}

/// On-disk wrapper so query files read `{"query": {"relations": [...]}}`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct QueryFile {
    pub query: Query,
}

impl Catalog {
    /// Validates table stats, edge endpoints, and edge uniqueness.
    pub fn validate(&self) -> Result<(), CatalogError> {
        let mut names = HashSet::new();
        for t in &self.tables {
            if t.row_count < 1 || t.row_bytes < 1 {
                return Err(CatalogError::BadTableStats(t.name.clone()));
            }
            if !names.insert(t.name.as_str()) {
                return Err(CatalogError::DuplicateTable(t.name.clone()));
            }
        }
        let mut pairs = HashSet::new();
        for e in &self.edges {
            if e.left == e.right {
                return Err(CatalogError::SelfJoinEdge(e.left.clone()));
            }
            for end in [&e.left, &e.right] {
                if !names.contains(end.as_str()) {
                    return Err(CatalogError::UnknownTable(end.clone()));
                }
            }
            if !(e.selectivity > 0.0 && e.selectivity <= 1.0) {
                return Err(CatalogError::BadSelectivity(e.selectivity));
            }
            let key = if e.left < e.right {
                (e.left.clone(), e.right.clone())
            } else {
                (e.right.clone(), e.left.clone())
            };
            if !pairs.insert(key) {
                return Err(CatalogError::DuplicateEdge(e.left.clone(), e.right.clone()));
            }
        }
        Ok(())
    }

    pub fn table(&self, name: &str) -> Option<&Table> {
        self.tables.iter().find(|t| t.name == name)
    }

    /// Checks that `query` names distinct known tables whose induced join
    /// graph is connected. Cross-product queries are rejected here.
    pub fn validate_query(&self, query: &Query) -> Result<(), CatalogError> {
        if query.relations.is_empty() {
            return Err(CatalogError::EmptyQuery);
        }
        let mut seen = HashSet::new();
        for r in &query.relations {
            if self.table(r).is_none() {
                return Err(CatalogError::UnknownTable(r.clone()));
            }
            if !seen.insert(r.as_str()) {
                return Err(CatalogError::DuplicateRelation(r.clone()));
            }
        }
        // BFS over the induced subgraph.
        let set: HashSet<&str> = query.relations.iter().map(|s| s.as_str()).collect();
        let mut reached = HashSet::new();
        let mut stack = vec![query.relations[0].as_str()];
        reached.insert(query.relations[0].as_str());
        while let Some(cur) = stack.pop() {
            for e in &self.edges {
                let other = if e.left == cur {
                    e.right.as_str()
                } else if e.right == cur {
                    e.left.as_str()
                } else {
                    continue;
                };
                if set.contains(other) && reached.insert(other) {
                    stack.push(other);
                }
            }
        }
        if reached.len() != set.len() {
            return Err(CatalogError::DisconnectedQuery);
        }
        Ok(())
    }

    /// Estimated output rows of joining all relations in `set`: the product of
    /// base cardinalities times the selectivities of every edge internal to
    /// the set.
    pub fn subset_rows(&self, set: &HashSet<&str>) -> Result<f64, CatalogError> {
        let mut rows = 1.0;
        for r in set {
            let t = self
                .table(r)
                .ok_or_else(|| CatalogError::UnknownTable(r.to_string()))?;
            rows *= t.row_count as f64;
        }
        for e in &self.edges {
            if set.contains(e.left.as_str()) && set.contains(e.right.as_str()) {
                rows *= e.selectivity;
            }
        }
        Ok(rows)
    }

    /// Sum of row widths over the set, in bytes.
    pub fn subset_row_bytes(&self, set: &HashSet<&str>) -> Result<f64, CatalogError> {
        let mut width = 0.0;
        for r in set {
            let t = self
                .table(r)
                .ok_or_else(|| CatalogError::UnknownTable(r.to_string()))?;
            width += t.row_bytes as f64;
        }
        Ok(width)
    }

    fn crosses(&self, left: &HashSet<&str>, right: &HashSet<&str>) -> bool {
        self.edges.iter().any(|e| {
            (left.contains(e.left.as_str()) && right.contains(e.right.as_str()))
                || (left.contains(e.right.as_str()) && right.contains(e.left.as_str()))
        })
    }
}

/// Estimated output cardinality and byte size of joining two relation sets.
///
/// `rows = prod(base rows) * prod(selectivity of every edge inside the union)`
/// and `bytes = rows * sum(row widths)`. Refuses cross products: at least one
/// join edge must cross the two sides.
pub fn estimate_join_output(
    catalog: &Catalog,
    left: &HashSet<&str>,
    right: &HashSet<&str>,
) -> Result<(f64, f64), CatalogError> {
    debug_assert!(left.is_disjoint(right));
    debug_assert!(!left.is_empty() && !right.is_empty());
    if !catalog.crosses(left, right) {
        return Err(CatalogError::NoJoinEdge);
    }
    let union: HashSet<&str> = left.union(right).copied().collect();
    let rows = catalog.subset_rows(&union)?;
    let bytes = rows * catalog.subset_row_bytes(&union)?;
    Ok((rows, bytes))
}

// TPC-H base row counts at scale factor 1, per dbgen.
const TPCH_TABLES: [(&str, u64, u64, bool); 8] = [
    // (name, rows at SF1, avg row bytes, scales with SF)
    ("region", 5, 120, false),
    ("nation", 25, 110, false),
    ("supplier", 10_000, 144, true),
    ("customer", 150_000, 160, true),
    ("part", 200_000, 128, true),
    ("partsupp", 800_000, 144, true),
    ("orders", 1_500_000, 104, true),
    ("lineitem", 6_001_215, 112, true),
];

// PK-FK edges of the TPC-H schema, including lineitem's foreign keys into
// part and supplier.
const TPCH_EDGES: [(&str, &str); 10] = [
    ("region", "nation"),
    ("nation", "customer"),
    ("nation", "supplier"),
    ("customer", "orders"),
    ("orders", "lineitem"),
    ("part", "partsupp"),
    ("supplier", "partsupp"),
    ("partsupp", "lineitem"),
    ("part", "lineitem"),
    ("supplier", "lineitem"),
];

fn pk_fk_selectivity(a: &Table, b: &Table) -> f64 {
    1.0 / a.row_count.max(b.row_count) as f64
}

/// The 8-table TPC-H catalog. Row counts scale linearly with `scale_factor`
/// except the fixed-size `nation` and `region` tables; every edge is PK-FK
/// with selectivity `1/max(row counts)`.
pub fn tpch_catalog(scale_factor: f64) -> Catalog {
    assert!(scale_factor > 0.0, "scale factor must be positive");
    let tables: Vec<Table> = TPCH_TABLES
        .iter()
        .map(|&(name, rows, bytes, scales)| Table {
            name: name.to_string(),
            row_count: if scales {
                ((rows as f64 * scale_factor).round() as u64).max(1)
            } else {
                rows
            },
            row_bytes: bytes,
        })
        .collect();
    let edges = TPCH_EDGES
        .iter()
        .map(|&(l, r)| {
            let lt = tables.iter().find(|t| t.name == l).unwrap();
            let rt = tables.iter().find(|t| t.name == r).unwrap();
            JoinEdge {
                left: l.to_string(),
                right: r.to_string(),
                selectivity: pk_fk_selectivity(lt, rt),
            }
        })
        .collect();
    Catalog { tables, edges }
}

/// Named TPC-H query shapes used by the bench harness.
pub fn tpch_query(name: &str) -> Option<Query> {
    let relations: Vec<&str> = match name {
        "Q12" => vec!["orders", "lineitem"],
        "Q3" => vec!["customer", "orders", "lineitem"],
        "Q2" => vec!["part", "supplier", "partsupp", "nation"],
        "All" => TPCH_TABLES.iter().map(|t| t.0).collect(),
        _ => return None,
    };
    Some(Query {
        relations: relations.into_iter().map(str::to_string).collect(),
    })
}

/// A reproducible random schema: `table_count` tables with row widths in
/// [100, 200] bytes and row counts in [100K, 2M], connected by a uniformly
/// random spanning tree plus `table_count / 4` extra edges. Identical
/// `(table_count, seed)` produce identical catalogs.
pub fn random_catalog(table_count: usize, seed: u64) -> Catalog {
    assert!(table_count >= 1);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let tables: Vec<Table> = (0..table_count)
        .map(|i| Table {
            name: format!("t{i}"),
            row_count: rng.gen_range(100_000..=2_000_000),
            row_bytes: rng.gen_range(100..=200),
        })
        .collect();

    let mut pairs: HashSet<(usize, usize)> = HashSet::new();
    let mut order: Vec<(usize, usize)> = Vec::new();
    let mut push = |pairs: &mut HashSet<(usize, usize)>,
                    order: &mut Vec<(usize, usize)>,
                    a: usize,
                    b: usize| {
        let key = (a.min(b), a.max(b));
        if pairs.insert(key) {
            order.push(key);
        }
    };

    // Uniform spanning tree via a random Pruefer sequence.
    if table_count == 2 {
        push(&mut pairs, &mut order, 0, 1);
    } else if table_count > 2 {
        let n = table_count;
        let pruefer: Vec<usize> = (0..n - 2).map(|_| rng.gen_range(0..n)).collect();
        let mut degree = vec![1usize; n];
        for &p in &pruefer {
            degree[p] += 1;
        }
        let mut used = vec![false; n];
        for &p in &pruefer {
            let leaf = (0..n).find(|&i| degree[i] == 1 && !used[i]).unwrap();
            used[leaf] = true;
            degree[p] -= 1;
            push(&mut pairs, &mut order, leaf, p);
        }
        let rest: Vec<usize> = (0..n).filter(|&i| !used[i] && degree[i] == 1).collect();
        push(&mut pairs, &mut order, rest[0], rest[1]);
    }

    // Extra non-duplicate edges beyond the spanning tree.
    let extra = table_count / 4;
    let max_pairs = table_count * (table_count - 1) / 2;
    let mut added = 0;
    while added < extra && pairs.len() < max_pairs {
        let a = rng.gen_range(0..table_count);
        let b = rng.gen_range(0..table_count);
        if a == b {
            continue;
        }
        let key = (a.min(b), a.max(b));
        if pairs.insert(key) {
            order.push(key);
            added += 1;
        }
    }

    let edges = order
        .into_iter()
        .map(|(a, b)| JoinEdge {
            left: tables[a].name.clone(),
            right: tables[b].name.clone(),
            selectivity: pk_fk_selectivity(&tables[a], &tables[b]),
        })
        .collect();
    Catalog { tables, edges }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn set<'a>(names: &[&'a str]) -> HashSet<&'a str> {
        names.iter().copied().collect()
    }

    #[test]
    fn tpch_sf1_row_counts() {
        let c = tpch_catalog(1.0);
        assert_eq!(c.table("lineitem").unwrap().row_count, 6_001_215);
        assert_eq!(c.table("orders").unwrap().row_count, 1_500_000);
        assert_eq!(c.table("nation").unwrap().row_count, 25);
        assert_eq!(c.table("region").unwrap().row_count, 5);
        c.validate().unwrap();
    }

    #[test]
    fn tpch_fixed_tables_ignore_scale() {
        let c = tpch_catalog(100.0);
        assert_eq!(c.table("nation").unwrap().row_count, 25);
        assert_eq!(c.table("region").unwrap().row_count, 5);
        assert_eq!(c.table("lineitem").unwrap().row_count, 600_121_500);
    }

    #[test]
    fn tpch_edge_structure() {
        let c = tpch_catalog(2.5);
        let has = |a: &str, b: &str| {
            c.edges.iter().any(|e| {
                (e.left == a && e.right == b) || (e.left == b && e.right == a)
            })
        };
        assert!(has("orders", "lineitem"));
        assert!(!has("nation", "lineitem"));
    }

    #[test]
    fn estimate_single_edge() {
        // |A|=10, |B|=20, sel=0.1 -> 20 rows
        let c = Catalog {
            tables: vec![
                Table { name: "a".into(), row_count: 10, row_bytes: 4 },
                Table { name: "b".into(), row_count: 20, row_bytes: 6 },
            ],
            edges: vec![JoinEdge { left: "a".into(), right: "b".into(), selectivity: 0.1 }],
        };
        let (rows, bytes) = estimate_join_output(&c, &set(&["a"]), &set(&["b"])).unwrap();
        assert_eq!(rows, 20.0);
        assert_eq!(bytes, 20.0 * 10.0);
    }

    #[test]
    fn estimate_pk_fk_yields_min_side() {
        // sel = 1/max(|A|,|B|) with |A|=100, |B|=1000 -> 100 rows
        let c = Catalog {
            tables: vec![
                Table { name: "a".into(), row_count: 100, row_bytes: 8 },
                Table { name: "b".into(), row_count: 1000, row_bytes: 8 },
            ],
            edges: vec![JoinEdge {
                left: "a".into(),
                right: "b".into(),
                selectivity: 1.0 / 1000.0,
            }],
        };
        let (rows, _) = estimate_join_output(&c, &set(&["a"]), &set(&["b"])).unwrap();
        assert_eq!(rows, 100.0);
    }

    #[test]
    fn estimate_tpch_orders_lineitem() {
        // 1.5M x 6,001,215 x (1/6,001,215) = 1.5M
        let c = tpch_catalog(1.0);
        let (rows, _) = estimate_join_output(&c, &set(&["orders"]), &set(&["lineitem"])).unwrap();
        assert_eq!(rows, 1_500_000.0);
    }

    #[test]
    fn estimate_refuses_cross_product() {
        let c = tpch_catalog(1.0);
        let err = estimate_join_output(&c, &set(&["nation"]), &set(&["lineitem"])).unwrap_err();
        assert_eq!(err, CatalogError::NoJoinEdge);
    }

    #[test]
    fn estimate_is_symmetric() {
        let c = tpch_catalog(1.0);
        let a = set(&["customer", "orders"]);
        let b = set(&["lineitem"]);
        assert_eq!(
            estimate_join_output(&c, &a, &b).unwrap(),
            estimate_join_output(&c, &b, &a).unwrap()
        );
    }

    #[test]
    fn random_catalog_edge_counts() {
        let one = random_catalog(1, 7);
        assert_eq!(one.tables.len(), 1);
        assert_eq!(one.edges.len(), 0);

        let big = random_catalog(100, 7);
        assert_eq!(big.tables.len(), 100);
        assert_eq!(big.edges.len(), 99 + 25);
        big.validate().unwrap();
    }

    #[test]
    fn random_catalog_is_deterministic() {
        let a = serde_json::to_string(&random_catalog(5, 42)).unwrap();
        let b = serde_json::to_string(&random_catalog(5, 42)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn random_catalog_is_connected() {
        for seed in 0..20 {
            let c = random_catalog(12, seed);
            let q = Query {
                relations: c.tables.iter().map(|t| t.name.clone()).collect(),
            };
            c.validate_query(&q).unwrap();
        }
    }

    #[test]
    fn query_validation_rejects_disconnected_sets() {
        let c = tpch_catalog(1.0);
        let q = Query { relations: vec!["nation".into(), "lineitem".into()] };
        assert_eq!(c.validate_query(&q).unwrap_err(), CatalogError::DisconnectedQuery);
        let q2 = Query { relations: vec!["part".into(), "lineitem".into()] };
        c.validate_query(&q2).unwrap();
    }

    #[test]
    fn serialization_field_names() {
        let c = tpch_catalog(1.0);
        let json = serde_json::to_string(&c).unwrap();
        assert!(json.contains("\"rowCount\""));
        assert!(json.contains("\"rowBytes\""));
        assert!(json.contains("\"selectivity\""));
        let back: Catalog = serde_json::from_str(&json).unwrap();
        assert_eq!(back, c);
    }
}
