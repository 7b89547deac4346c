//! Failure units, failure classes and the failure dependency graph (FDG).
//!
//! A failure unit is one component paired with a group of indicative
//! metrics. Units that share a metric group on the same component class
//! form a failure class. The FDG connects units that depend on each other;
//! it is undirected and rebuilt per failure snapshot.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::Path;

use rand::seq::index::sample;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Component {
    pub id: String,
    pub class_name: String,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct MetricDescriptor {
    pub name: String,
    pub unit_id: String,
}

/// A metric group on one component class. Every unit of the class exposes
/// exactly `metric_names`, in this order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FailureClass {
    pub id: String,
    pub component_class: String,
    pub metric_names: Vec<String>,
}

impl FailureClass {
    pub fn metric_count(&self) -> usize {
        self.metric_names.len()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FailureUnit {
    pub id: String,
    pub component_id: String,
    pub class_id: String,
}

/// Call and deployment relationships between components.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ComponentRelations {
    #[serde(default)]
    pub call: Vec<(String, String)>,
    #[serde(default)]
    pub deploy: Vec<(String, String)>,
}

impl ComponentRelations {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Ok(serde_json::from_str(&text)?)
    }
}

/// Components, failure classes and failure units of one system.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SystemCatalog {
    pub components: Vec<Component>,
    pub classes: Vec<FailureClass>,
    pub units: Vec<FailureUnit>,
}

impl SystemCatalog {
    /// Checks ids for uniqueness and cross references for resolution.
    pub fn validate(&self) -> Result<()> {
        let mut components = BTreeMap::new();
        for c in &self.components {
            if c.class_name.is_empty() {
                return Err(Error::Validation(format!("component {} has empty class name", c.id)));
            }
            if components.insert(c.id.as_str(), c).is_some() {
                return Err(Error::Validation(format!("duplicate component id {}", c.id)));
            }
        }
        let mut classes = BTreeMap::new();
        for class in &self.classes {
            if class.metric_names.is_empty() {
                return Err(Error::Validation(format!("class {} has no metrics", class.id)));
            }
            let distinct: BTreeSet<_> = class.metric_names.iter().collect();
            if distinct.len() != class.metric_names.len() {
                return Err(Error::Validation(format!("class {} repeats a metric name", class.id)));
            }
            if classes.insert(class.id.as_str(), class).is_some() {
                return Err(Error::Validation(format!("duplicate class id {}", class.id)));
            }
        }
        let mut seen = BTreeSet::new();
        for unit in &self.units {
            if !seen.insert(unit.id.as_str()) {
                return Err(Error::Validation(format!("duplicate unit id {}", unit.id)));
            }
            let component = components
                .get(unit.component_id.as_str())
                .ok_or_else(|| Error::UnknownId(unit.component_id.clone()))?;
            let class = classes
                .get(unit.class_id.as_str())
                .ok_or_else(|| Error::UnknownId(unit.class_id.clone()))?;
            if component.class_name != class.component_class {
                return Err(Error::Validation(format!(
                    "unit {}: component class {} does not match failure class {} ({})",
                    unit.id, component.class_name, class.id, class.component_class
                )));
            }
        }
        Ok(())
    }

    pub fn class(&self, id: &str) -> Option<&FailureClass> {
        self.classes.iter().find(|c| c.id == id)
    }

    pub fn unit(&self, id: &str) -> Option<&FailureUnit> {
        self.units.iter().find(|u| u.id == id)
    }

    pub fn unit_class_map(&self) -> BTreeMap<String, String> {
        self.units.iter().map(|u| (u.id.clone(), u.class_id.clone())).collect()
    }

    /// All metric descriptors, one per (unit, class metric).
    pub fn metric_descriptors(&self) -> Vec<MetricDescriptor> {
        let mut out = Vec::new();
        for unit in &self.units {
            if let Some(class) = self.class(&unit.class_id) {
                for name in &class.metric_names {
                    out.push(MetricDescriptor { name: name.clone(), unit_id: unit.id.clone() });
                }
            }
        }
        out
    }
}

/// Undirected graph over failure unit ids, taken at `snapshot_time`.
///
/// Edges are stored as `(lo, hi)` pairs with `lo < hi`, sorted.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Fdg {
    pub vertices: BTreeSet<String>,
    pub edges: Vec<(String, String)>,
    #[serde(default)]
    pub snapshot_time: i64,
}

fn ordered(a: &str, b: &str) -> (String, String) {
    if a <= b {
        (a.to_string(), b.to_string())
    } else {
        (b.to_string(), a.to_string())
    }
}

impl Fdg {
    /// Builds a graph, normalizing and deduplicating edges. Self-loops and
    /// unknown endpoints are rejected.
    pub fn new<I, S>(vertices: I, edges: &[(String, String)], snapshot_time: i64) -> Result<Self>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let vertices: BTreeSet<String> = vertices.into_iter().map(Into::into).collect();
        let mut set = BTreeSet::new();
        for (a, b) in edges {
            for end in [a, b] {
                if !vertices.contains(end) {
                    return Err(Error::UnknownId(end.clone()));
                }
            }
            if a == b {
                return Err(Error::Validation(format!("self-loop on {a}")));
            }
            set.insert(ordered(a, b));
        }
        Ok(Self { vertices, edges: set.into_iter().collect(), snapshot_time })
    }

    pub fn vertex_count(&self) -> usize {
        self.vertices.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn contains(&self, id: &str) -> bool {
        self.vertices.contains(id)
    }

    pub fn has_edge(&self, a: &str, b: &str) -> bool {
        self.edges.binary_search(&ordered(a, b)).is_ok()
    }

    /// Neighbors of `unit_id` in ascending id order, excluding itself.
    pub fn neighbors(&self, unit_id: &str) -> Result<Vec<String>> {
        if !self.contains(unit_id) {
            return Err(Error::UnknownId(unit_id.to_string()));
        }
        let mut out: Vec<String> = self
            .edges
            .iter()
            .filter_map(|(a, b)| {
                if a == unit_id {
                    Some(b.clone())
                } else if b == unit_id {
                    Some(a.clone())
                } else {
                    None
                }
            })
            .collect();
        out.sort();
        out.dedup();
        out.retain(|v| v != unit_id);
        Ok(out)
    }

    /// Adjacency lists indexed by position in `vertices` (ascending id).
    pub fn adjacency(&self) -> Vec<Vec<usize>> {
        let index: BTreeMap<&str, usize> =
            self.vertices.iter().enumerate().map(|(i, v)| (v.as_str(), i)).collect();
        let mut adj = vec![Vec::new(); self.vertices.len()];
        for (a, b) in &self.edges {
            if let (Some(&i), Some(&j)) = (index.get(a.as_str()), index.get(b.as_str())) {
                if i != j {
                    adj[i].push(j);
                    adj[j].push(i);
                }
            }
        }
        for list in &mut adj {
            list.sort_unstable();
            list.dedup();
        }
        adj
    }

    /// Hop distances from `source` by breadth-first search.
    pub fn hop_distances(&self, source: &str) -> Result<BTreeMap<String, usize>> {
        if !self.contains(source) {
            return Err(Error::UnknownId(source.to_string()));
        }
        let ids: Vec<&String> = self.vertices.iter().collect();
        let adj = self.adjacency();
        let start = ids.iter().position(|v| v.as_str() == source).unwrap_or(0);
        let mut dist = vec![usize::MAX; ids.len()];
        dist[start] = 0;
        let mut queue = std::collections::VecDeque::from([start]);
        while let Some(u) = queue.pop_front() {
            for &v in &adj[u] {
                if dist[v] == usize::MAX {
                    dist[v] = dist[u] + 1;
                    queue.push_back(v);
                }
            }
        }
        Ok(ids
            .into_iter()
            .zip(dist)
            .filter(|(_, d)| *d != usize::MAX)
            .map(|(id, d)| (id.clone(), d))
            .collect())
    }

    pub fn with_edge(&self, a: &str, b: &str) -> Result<Self> {
        let mut edges = self.edges.clone();
        edges.push((a.to_string(), b.to_string()));
        Fdg::new(self.vertices.iter().cloned(), &edges, self.snapshot_time)
    }

    pub fn without_edge(&self, a: &str, b: &str) -> Self {
        let key = ordered(a, b);
        let mut g = self.clone();
        g.edges.retain(|e| *e != key);
        g
    }

    /// Removes `round(fraction * |E|)` edges chosen uniformly at random.
    pub fn remove_random_edges<R: Rng + ?Sized>(&self, fraction: f64, rng: &mut R) -> Result<Self> {
        if !(0.0..1.0).contains(&fraction) {
            return Err(Error::InvalidArgument(format!("edge fraction {fraction} not in [0, 1)")));
        }
        let n = self.edges.len();
        let k = ((fraction * n as f64).round() as usize).min(n);
        let drop: BTreeSet<usize> = sample(rng, n, k).into_iter().collect();
        let mut g = self.clone();
        g.edges = self
            .edges
            .iter()
            .enumerate()
            .filter(|(i, _)| !drop.contains(i))
            .map(|(_, e)| e.clone())
            .collect();
        Ok(g)
    }

    /// Returns a copy with every vertex id passed through `rename`.
    pub fn relabel(&self, rename: impl Fn(&str) -> String) -> Result<Self> {
        let edges: Vec<_> = self.edges.iter().map(|(a, b)| (rename(a), rename(b))).collect();
        Fdg::new(self.vertices.iter().map(|v| rename(v)), &edges, self.snapshot_time)
    }
}

/// Constructs an FDG from component relationships.
///
/// Two units are connected iff they share a component, their components are
/// related by a call or deployment edge, or the pair is listed in
/// `manual_edges`; pairs in `manual_removals` are then dropped.
pub fn build_fdg(
    components: &[Component],
    units: &[FailureUnit],
    relations: &ComponentRelations,
    manual_edges: &[(String, String)],
    manual_removals: &[(String, String)],
    snapshot_time: i64,
) -> Result<Fdg> {
    let known_components: BTreeSet<&str> = components.iter().map(|c| c.id.as_str()).collect();
    let mut unit_ids = BTreeSet::new();
    let mut by_component: BTreeMap<&str, Vec<&str>> = BTreeMap::new();
    for unit in units {
        if !known_components.contains(unit.component_id.as_str()) {
            return Err(Error::UnknownId(unit.component_id.clone()));
        }
        if !unit_ids.insert(unit.id.as_str()) {
            return Err(Error::Validation(format!("duplicate unit id {}", unit.id)));
        }
        by_component.entry(unit.component_id.as_str()).or_default().push(unit.id.as_str());
    }
    for (a, b) in manual_edges.iter().chain(manual_removals) {
        for end in [a, b] {
            if !unit_ids.contains(end.as_str()) {
                return Err(Error::UnknownId(end.clone()));
            }
        }
    }

    let mut edges: BTreeSet<(String, String)> = BTreeSet::new();
    let mut connect = |a: &str, b: &str| {
        if a != b {
            edges.insert(ordered(a, b));
        }
    };
    for members in by_component.values() {
        for (i, a) in members.iter().enumerate() {
            for b in &members[i + 1..] {
                connect(a, b);
            }
        }
    }
    let empty = Vec::new();
    for (x, y) in relations.call.iter().chain(&relations.deploy) {
        for end in [x, y] {
            if !known_components.contains(end.as_str()) {
                return Err(Error::UnknownId(end.clone()));
            }
        }
        let left = by_component.get(x.as_str()).unwrap_or(&empty);
        let right = by_component.get(y.as_str()).unwrap_or(&empty);
        for a in left {
            for b in right {
                connect(a, b);
            }
        }
    }
    for (a, b) in manual_edges {
        connect(a, b);
    }
    for (a, b) in manual_removals {
        edges.remove(&ordered(a, b));
    }

    Ok(Fdg {
        vertices: unit_ids.into_iter().map(String::from).collect(),
        edges: edges.into_iter().collect(),
        snapshot_time,
    })
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Violation {
    SelfLoop(String),
    UnknownEndpoint(String),
    DuplicateEdge(String, String),
    UnknownVertex(String),
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::SelfLoop(v) => write!(f, "self-loop on {v}"),
            Violation::UnknownEndpoint(v) => write!(f, "edge endpoint {v} is not a vertex"),
            Violation::DuplicateEdge(a, b) => write!(f, "duplicate edge {a} -- {b}"),
            Violation::UnknownVertex(v) => write!(f, "vertex {v} is not a defined failure unit"),
        }
    }
}

/// Lists every broken FDG invariant. Empty iff the graph is well formed.
pub fn validate_fdg(g: &Fdg, units: &[FailureUnit]) -> Vec<Violation> {
    let known: BTreeSet<&str> = units.iter().map(|u| u.id.as_str()).collect();
    let mut out = Vec::new();
    for v in &g.vertices {
        if !known.contains(v.as_str()) {
            out.push(Violation::UnknownVertex(v.clone()));
        }
    }
    let mut seen = BTreeSet::new();
    for (a, b) in &g.edges {
        if a == b {
            out.push(Violation::SelfLoop(a.clone()));
            continue;
        }
        let mut bad = false;
        for end in [a, b] {
            if !g.vertices.contains(end) {
                out.push(Violation::UnknownEndpoint(end.clone()));
                bad = true;
            }
        }
        if !bad && !seen.insert(ordered(a, b)) {
            out.push(Violation::DuplicateEdge(a.clone(), b.clone()));
        }
    }
    out
}

/// On-disk FDG file: the system catalog plus the edge list.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FdgDocument {
    pub components: Vec<Component>,
    pub classes: Vec<FailureClass>,
    pub units: Vec<FailureUnit>,
    pub edges: Vec<(String, String)>,
    #[serde(default)]
    pub snapshot_time: i64,
}

impl FdgDocument {
    pub fn new(catalog: &SystemCatalog, fdg: &Fdg) -> Self {
        Self {
            components: catalog.components.clone(),
            classes: catalog.classes.clone(),
            units: catalog.units.clone(),
            edges: fdg.edges.clone(),
            snapshot_time: fdg.snapshot_time,
        }
    }

    /// Splits into a validated catalog and graph.
    pub fn into_parts(self) -> Result<(SystemCatalog, Fdg)> {
        let catalog =
            SystemCatalog { components: self.components, classes: self.classes, units: self.units };
        catalog.validate()?;
        let fdg = Fdg::new(catalog.units.iter().map(|u| u.id.clone()), &self.edges, self.snapshot_time)?;
        Ok((catalog, fdg))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Ok(serde_json::from_str(&text)?)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, serde_json::to_string_pretty(self)?)?;
        Ok(())
    }
}
