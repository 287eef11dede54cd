//! Capability models: a causal graph over boolean fact variables, one
//! eventual node (e-node) per fact, and a beta-parameterised conditional
//! table for every node.
//!
//! Edges are never stored separately from the tables. The edge set of a
//! model is read off the `parents` lists of its CPTs, and the construction
//! rule fixes those lists: a fact node's parents are its causal parents, and
//! the e-node of `x` has `x` plus the causal parents of `x` as parents.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

/// Reserved prefix that marks e-node ids in documents.
pub const ENODE_PREFIX: &str = "e:";

/// Name of one boolean proposition.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct VarId(Arc<str>);

impl VarId {
    pub fn new(name: impl AsRef<str>) -> Result<Self> {
        let name = name.as_ref();
        if name.is_empty() {
            return Err(Error::InvalidVarId {
                id: name.to_string(),
                reason: "must not be empty",
            });
        }
        if name.starts_with(ENODE_PREFIX) {
            return Err(Error::InvalidVarId {
                id: name.to_string(),
                reason: "the `e:` prefix is reserved for e-nodes",
            });
        }
        if name.chars().any(char::is_whitespace) {
            return Err(Error::InvalidVarId {
                id: name.to_string(),
                reason: "must not contain whitespace",
            });
        }
        Ok(VarId(Arc::from(name)))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for VarId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl fmt::Debug for VarId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?}", &*self.0)
    }
}

impl Serialize for VarId {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.0)
    }
}

impl<'de> Deserialize<'de> for VarId {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        VarId::new(&s).map_err(serde::de::Error::custom)
    }
}

/// Convenience for tests and fixtures. Panics on an invalid id.
pub fn var(name: &str) -> VarId {
    VarId::new(name).unwrap_or_else(|e| panic!("{e}"))
}

/// A node of the capability network: the initial value of a fact, or its
/// eventual value after an operation.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum NodeId {
    Fact(VarId),
    Eventual(VarId),
}

impl NodeId {
    pub fn var(&self) -> &VarId {
        match self {
            NodeId::Fact(v) | NodeId::Eventual(v) => v,
        }
    }

    pub fn is_fact(&self) -> bool {
        matches!(self, NodeId::Fact(_))
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s.strip_prefix(ENODE_PREFIX) {
            Some(rest) => Ok(NodeId::Eventual(VarId::new(rest)?)),
            None => Ok(NodeId::Fact(VarId::new(s)?)),
        }
    }
}

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            NodeId::Fact(v) => write!(f, "{v}"),
            NodeId::Eventual(v) => write!(f, "{ENODE_PREFIX}{v}"),
        }
    }
}

impl fmt::Debug for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self}")
    }
}

impl Serialize for NodeId {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for NodeId {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        NodeId::parse(&s).map_err(serde::de::Error::custom)
    }
}

/// Beta density over one CPT entry, as pseudo-counts of true/false outcomes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BetaParam {
    pub a: f64,
    pub b: f64,
}

impl BetaParam {
    pub fn new(a: f64, b: f64) -> Result<Self> {
        let p = BetaParam { a, b };
        if p.is_valid() {
            Ok(p)
        } else {
            Err(Error::InvalidBeta { a, b })
        }
    }

    pub const fn uniform() -> Self {
        BetaParam { a: 1.0, b: 1.0 }
    }

    pub fn is_valid(&self) -> bool {
        self.a.is_finite() && self.b.is_finite() && self.a > 0.0 && self.b > 0.0
    }

    /// Posterior mean `a / (a + b)`.
    pub fn mean(&self) -> f64 {
        self.a / (self.a + self.b)
    }
}

impl Default for BetaParam {
    fn default() -> Self {
        BetaParam::uniform()
    }
}

/// Conditional table of one node. `rows[j]` belongs to the parent
/// configuration whose big-endian bit pattern over `parents` is `j`.
#[derive(Debug, Clone, PartialEq)]
pub struct Cpt {
    pub parents: Vec<NodeId>,
    pub rows: Vec<BetaParam>,
}

impl Cpt {
    pub fn uniform(parents: Vec<NodeId>, prior: BetaParam) -> Self {
        let rows = vec![prior; 1usize << parents.len()];
        Cpt { parents, rows }
    }

    /// Row index for the parent values produced by `value_of`.
    pub fn row_index(&self, mut value_of: impl FnMut(&NodeId) -> bool) -> usize {
        self.parents
            .iter()
            .fold(0usize, |acc, p| (acc << 1) | usize::from(value_of(p)))
    }

    /// The big-endian bit string naming row `index`.
    pub fn config_string(&self, index: usize) -> String {
        let n = self.parents.len();
        (0..n)
            .map(|k| {
                if (index >> (n - 1 - k)) & 1 == 1 {
                    '1'
                } else {
                    '0'
                }
            })
            .collect()
    }

    pub fn expected_rows(&self) -> usize {
        1usize << self.parents.len()
    }
}

/// Fact variables plus the causal fact-to-fact edges supplied by the domain
/// writer.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct CausalGraph {
    variables: BTreeSet<VarId>,
    edges: BTreeSet<(VarId, VarId)>,
}

impl CausalGraph {
    /// Builds the graph without any checks; see [`CausalGraph::check`].
    pub fn from_parts(variables: BTreeSet<VarId>, edges: BTreeSet<(VarId, VarId)>) -> Self {
        CausalGraph { variables, edges }
    }

    pub fn variables(&self) -> &BTreeSet<VarId> {
        &self.variables
    }

    pub fn edges(&self) -> &BTreeSet<(VarId, VarId)> {
        &self.edges
    }

    pub fn contains(&self, v: &VarId) -> bool {
        self.variables.contains(v)
    }

    /// Causal parents of `v`, sorted.
    pub fn parents(&self, v: &VarId) -> Vec<VarId> {
        self.edges
            .iter()
            .filter(|(_, to)| to == v)
            .map(|(from, _)| from.clone())
            .collect()
    }

    fn children_map(&self) -> BTreeMap<&VarId, Vec<&VarId>> {
        let mut m: BTreeMap<&VarId, Vec<&VarId>> =
            self.variables.iter().map(|v| (v, Vec::new())).collect();
        for (from, to) in &self.edges {
            m.entry(from).or_default().push(to);
        }
        m
    }

    /// Errors on the first dangling edge endpoint or cycle.
    pub fn check(&self) -> Result<()> {
        for (from, to) in &self.edges {
            for end in [from, to] {
                if !self.variables.contains(end) {
                    return Err(Error::DanglingEdge {
                        from: from.clone(),
                        to: to.clone(),
                        missing: end.clone(),
                    });
                }
            }
        }
        let order: Vec<&VarId> = self.variables.iter().collect();
        if let Some(cycle) = self.find_cycle(&order) {
            let (from, to) = cycle.into_iter().max().expect("cycle has edges");
            return Err(Error::Cycle { from, to });
        }
        Ok(())
    }

    /// Depth-first search for a directed cycle, starting roots in `order`.
    /// Returns the edges of the first cycle found.
    fn find_cycle(&self, order: &[&VarId]) -> Option<Vec<(VarId, VarId)>> {
        #[derive(Clone, Copy, PartialEq)]
        enum Mark {
            White,
            Grey,
            Black,
        }
        let children = self.children_map();
        let mut mark: BTreeMap<&VarId, Mark> =
            self.variables.iter().map(|v| (v, Mark::White)).collect();

        for &root in order {
            if mark[root] != Mark::White {
                continue;
            }
            // Explicit stack of (node, next child index).
            let mut stack: Vec<(&VarId, usize)> = vec![(root, 0)];
            mark.insert(root, Mark::Grey);
            while let Some(&mut (node, ref mut next)) = stack.last_mut() {
                let kids = &children[node];
                if *next < kids.len() {
                    let child = kids[*next];
                    *next += 1;
                    match mark.get(child).copied().unwrap_or(Mark::Black) {
                        Mark::White => {
                            mark.insert(child, Mark::Grey);
                            stack.push((child, 0));
                        }
                        Mark::Grey => {
                            let start = stack
                                .iter()
                                .position(|(n, _)| *n == child)
                                .expect("grey node is on the stack");
                            let mut path: Vec<&VarId> =
                                stack[start..].iter().map(|(n, _)| *n).collect();
                            path.push(child);
                            return Some(
                                path.windows(2)
                                    .map(|w| (w[0].clone(), w[1].clone()))
                                    .collect(),
                            );
                        }
                        Mark::Black => {}
                    }
                } else {
                    mark.insert(node, Mark::Black);
                    stack.pop();
                }
            }
        }
        None
    }

    /// Removes edges until the graph is acyclic. Cycles are discovered from
    /// roots visited in a seed-shuffled order and each loses its
    /// lexicographically last edge. Returns the removed edges in removal
    /// order.
    pub fn break_cycles(&mut self, seed: u64) -> Vec<(VarId, VarId)> {
        let mut order: Vec<VarId> = self.variables.iter().cloned().collect();
        order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        let mut removed = Vec::new();
        loop {
            let refs: Vec<&VarId> = order.iter().collect();
            let Some(cycle) = self.find_cycle(&refs) else {
                break;
            };
            let last = cycle.into_iter().max().expect("cycle has edges");
            self.edges.remove(&last);
            removed.push(last);
        }
        removed
    }

    /// Kahn's algorithm with ties broken by variable order.
    pub fn topological_order(&self) -> Result<Vec<VarId>> {
        let mut indegree: BTreeMap<&VarId, usize> = self.variables.iter().map(|v| (v, 0)).collect();
        for (_, to) in &self.edges {
            *indegree.entry(to).or_default() += 1;
        }
        let children = self.children_map();
        let mut ready: BTreeSet<&VarId> = indegree
            .iter()
            .filter(|(_, d)| **d == 0)
            .map(|(v, _)| *v)
            .collect();
        let mut out = Vec::with_capacity(self.variables.len());
        while let Some(v) = ready.pop_first() {
            out.push(v.clone());
            for &c in &children[v] {
                let d = indegree.get_mut(c).expect("child is a variable");
                *d -= 1;
                if *d == 0 {
                    ready.insert(c);
                }
            }
        }
        if out.len() != self.variables.len() {
            self.check()?;
        }
        Ok(out)
    }

    /// All variables with a directed path into some target. A target is
    /// included only when it is reachable from another target.
    pub fn ancestors<'a>(&self, targets: impl IntoIterator<Item = &'a VarId>) -> BTreeSet<VarId> {
        let mut parents: BTreeMap<&VarId, Vec<&VarId>> = BTreeMap::new();
        for (from, to) in &self.edges {
            parents.entry(to).or_default().push(from);
        }
        let mut seen = BTreeSet::new();
        let mut stack: Vec<&VarId> = targets.into_iter().collect();
        while let Some(v) = stack.pop() {
            for &p in parents.get(v).map(Vec::as_slice).unwrap_or(&[]) {
                if seen.insert(p.clone()) {
                    stack.push(p);
                }
            }
        }
        seen
    }
}

/// The capability model of one agent.
#[derive(Debug, Clone, PartialEq)]
pub struct CapabilityModel {
    agent: String,
    graph: CausalGraph,
    cpts: BTreeMap<NodeId, Cpt>,
}

/// Result of a build that was allowed to break causal loops.
#[derive(Debug, Clone)]
pub struct BuildOutcome {
    pub model: CapabilityModel,
    pub removed_edges: Vec<(VarId, VarId)>,
}

/// Builds a capability model. Every CPT row starts at `prior`. Cycles in
/// the causal edges are rejected.
pub fn build_model(
    agent: &str,
    vars: &[VarId],
    causal_edges: &[(VarId, VarId)],
    prior: BetaParam,
) -> Result<CapabilityModel> {
    let graph = collect_graph(vars, causal_edges, prior)?;
    graph.check()?;
    Ok(CapabilityModel::with_prior(agent, graph, prior))
}

/// Like [`build_model`], but cycles are broken deterministically under
/// `seed` and the removed edges are reported.
pub fn build_model_breaking_loops(
    agent: &str,
    vars: &[VarId],
    causal_edges: &[(VarId, VarId)],
    prior: BetaParam,
    seed: u64,
) -> Result<BuildOutcome> {
    let mut graph = collect_graph(vars, causal_edges, prior)?;
    let removed_edges = graph.break_cycles(seed);
    graph.check()?;
    Ok(BuildOutcome {
        model: CapabilityModel::with_prior(agent, graph, prior),
        removed_edges,
    })
}

fn collect_graph(
    vars: &[VarId],
    causal_edges: &[(VarId, VarId)],
    prior: BetaParam,
) -> Result<CausalGraph> {
    if !prior.is_valid() {
        return Err(Error::InvalidBeta {
            a: prior.a,
            b: prior.b,
        });
    }
    let mut variables = BTreeSet::new();
    for v in vars {
        if !variables.insert(v.clone()) {
            return Err(Error::DuplicateVar(v.clone()));
        }
    }
    let edges: BTreeSet<(VarId, VarId)> = causal_edges.iter().cloned().collect();
    for (from, to) in &edges {
        for end in [from, to] {
            if !variables.contains(end) {
                return Err(Error::DanglingEdge {
                    from: from.clone(),
                    to: to.clone(),
                    missing: end.clone(),
                });
            }
        }
    }
    Ok(CausalGraph { variables, edges })
}

impl CapabilityModel {
    fn with_prior(agent: &str, graph: CausalGraph, prior: BetaParam) -> Self {
        let mut cpts = BTreeMap::new();
        for v in graph.variables() {
            for node in [NodeId::Fact(v.clone()), NodeId::Eventual(v.clone())] {
                let parents = expected_parents(&graph, &node);
                cpts.insert(node, Cpt::uniform(parents, prior));
            }
        }
        CapabilityModel {
            agent: agent.to_string(),
            graph,
            cpts,
        }
    }

    /// Assembles a model without validating it.
    pub fn from_parts(agent: String, graph: CausalGraph, cpts: BTreeMap<NodeId, Cpt>) -> Self {
        CapabilityModel { agent, graph, cpts }
    }

    pub fn into_parts(self) -> (String, CausalGraph, BTreeMap<NodeId, Cpt>) {
        (self.agent, self.graph, self.cpts)
    }

    pub fn agent(&self) -> &str {
        &self.agent
    }

    pub fn graph(&self) -> &CausalGraph {
        &self.graph
    }

    pub fn variables(&self) -> &BTreeSet<VarId> {
        self.graph.variables()
    }

    pub fn cpts(&self) -> &BTreeMap<NodeId, Cpt> {
        &self.cpts
    }

    pub(crate) fn cpts_mut(&mut self) -> &mut BTreeMap<NodeId, Cpt> {
        &mut self.cpts
    }

    pub fn cpt(&self, node: &NodeId) -> Option<&Cpt> {
        self.cpts.get(node)
    }

    pub fn node_count(&self) -> usize {
        self.cpts.len()
    }

    /// All edges `(parent, child)` of the network, as listed by the CPTs.
    pub fn edges(&self) -> impl Iterator<Item = (&NodeId, &NodeId)> {
        self.cpts
            .iter()
            .flat_map(|(child, cpt)| cpt.parents.iter().map(move |p| (p, child)))
    }

    pub fn edge_count(&self) -> usize {
        self.cpts.values().map(|c| c.parents.len()).sum()
    }

    /// Ancestor set of `targets` in the causal fact graph.
    pub fn ancestors(&self, targets: &BTreeSet<VarId>) -> Result<BTreeSet<VarId>> {
        if let Some(v) = targets.iter().find(|v| !self.graph.contains(v)) {
            return Err(Error::UnknownVar(v.clone()));
        }
        Ok(self.graph.ancestors(targets))
    }

    /// Checks every structural invariant; an empty list means valid.
    pub fn validate(&self) -> Vec<Violation> {
        validate_model(self)
    }

    /// Errors with the full violation list unless the model is valid.
    pub fn ensure_valid(&self) -> Result<()> {
        let v = self.validate();
        if v.is_empty() {
            Ok(())
        } else {
            Err(Error::InvalidModel(v))
        }
    }
}

/// Free-function form of [`CapabilityModel::ancestors`].
pub fn ancestors(model: &CapabilityModel, targets: &BTreeSet<VarId>) -> Result<BTreeSet<VarId>> {
    model.ancestors(targets)
}

/// Parents a node must have under the construction rule, in canonical order.
pub fn expected_parents(graph: &CausalGraph, node: &NodeId) -> Vec<NodeId> {
    let mut parents: Vec<NodeId> = graph
        .parents(node.var())
        .into_iter()
        .map(NodeId::Fact)
        .collect();
    if let NodeId::Eventual(v) = node {
        parents.push(NodeId::Fact(v.clone()));
    }
    parents.sort();
    parents
}

/// One broken invariant found by [`validate_model`].
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Violation {
    DanglingEdge {
        from: VarId,
        to: VarId,
    },
    CyclicGraph {
        from: VarId,
        to: VarId,
    },
    MissingCpt {
        node: NodeId,
    },
    UnexpectedCpt {
        node: NodeId,
    },
    IllegalEdge {
        from: NodeId,
        to: NodeId,
    },
    MissingEdge {
        from: NodeId,
        to: NodeId,
    },
    UnsortedParents {
        node: NodeId,
    },
    IncompleteCpt {
        node: NodeId,
        expected: usize,
        found: usize,
    },
    InvalidBeta {
        node: NodeId,
        row: usize,
    },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::DanglingEdge { from, to } => {
                write!(
                    f,
                    "causal edge {from} -> {to} references an undeclared variable"
                )
            }
            Violation::CyclicGraph { from, to } => {
                write!(f, "causal graph has a cycle through {from} -> {to}")
            }
            Violation::MissingCpt { node } => write!(f, "node {node} has no CPT"),
            Violation::UnexpectedCpt { node } => write!(f, "CPT for undeclared node {node}"),
            Violation::IllegalEdge { from, to } => write!(f, "illegal edge {from} -> {to}"),
            Violation::MissingEdge { from, to } => write!(f, "missing edge {from} -> {to}"),
            Violation::UnsortedParents { node } => {
                write!(f, "parents of {node} are not in canonical order")
            }
            Violation::IncompleteCpt {
                node,
                expected,
                found,
            } => write!(
                f,
                "incomplete CPT for {node}: expected {expected} rows (2^|parents|), found {found}"
            ),
            Violation::InvalidBeta { node, row } => {
                write!(f, "CPT row {row} of {node}: pseudo-count must be positive")
            }
        }
    }
}

pub fn validate_model(model: &CapabilityModel) -> Vec<Violation> {
    let mut out = Vec::new();
    let graph = &model.graph;

    let mut graph_ok = true;
    for (from, to) in &graph.edges {
        if !graph.contains(from) || !graph.contains(to) {
            out.push(Violation::DanglingEdge {
                from: from.clone(),
                to: to.clone(),
            });
            graph_ok = false;
        }
    }
    if graph_ok {
        if let Err(Error::Cycle { from, to }) = graph.check() {
            out.push(Violation::CyclicGraph { from, to });
        }
    }

    for v in graph.variables() {
        for node in [NodeId::Fact(v.clone()), NodeId::Eventual(v.clone())] {
            if !model.cpts.contains_key(&node) {
                out.push(Violation::MissingCpt { node });
            }
        }
    }

    for (node, cpt) in &model.cpts {
        if !graph.contains(node.var()) {
            out.push(Violation::UnexpectedCpt { node: node.clone() });
            continue;
        }
        let expected = expected_parents(graph, node);
        for p in &cpt.parents {
            if !expected.contains(p) {
                out.push(Violation::IllegalEdge {
                    from: p.clone(),
                    to: node.clone(),
                });
            }
        }
        for p in &expected {
            if !cpt.parents.contains(p) {
                out.push(Violation::MissingEdge {
                    from: p.clone(),
                    to: node.clone(),
                });
            }
        }
        if cpt.parents.windows(2).any(|w| w[0] >= w[1]) {
            out.push(Violation::UnsortedParents { node: node.clone() });
        }
        if cpt.rows.len() != cpt.expected_rows() {
            out.push(Violation::IncompleteCpt {
                node: node.clone(),
                expected: cpt.expected_rows(),
                found: cpt.rows.len(),
            });
        }
        for (row, p) in cpt.rows.iter().enumerate() {
            if !p.is_valid() {
                out.push(Violation::InvalidBeta {
                    node: node.clone(),
                    row,
                });
            }
        }
    }
    out
}

/// A capability `C ∧ ¬D → A ∧ ¬B`: from a partial initial state where `c`
/// holds and `d` does not, some operation reaches a partial state where `a`
/// holds and `b` does not.
#[derive(Debug, Clone, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CapabilitySpec {
    #[serde(rename = "A", default)]
    pub a: BTreeSet<VarId>,
    #[serde(rename = "B", default)]
    pub b: BTreeSet<VarId>,
    #[serde(rename = "C", default)]
    pub c: BTreeSet<VarId>,
    #[serde(rename = "D", default)]
    pub d: BTreeSet<VarId>,
}

/// Non-fatal observation about a spec.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SpecNotice {
    /// The variable is both evidence and a queried outcome.
    EvidenceTargetOverlap { var: VarId },
}

impl fmt::Display for SpecNotice {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SpecNotice::EvidenceTargetOverlap { var } => write!(
                f,
                "`{var}` is both evidence and target; the fact node is pinned and its e-node queried"
            ),
        }
    }
}

impl CapabilitySpec {
    pub fn new<I, J, K, L>(c: I, d: J, a: K, b: L) -> Self
    where
        I: IntoIterator<Item = VarId>,
        J: IntoIterator<Item = VarId>,
        K: IntoIterator<Item = VarId>,
        L: IntoIterator<Item = VarId>,
    {
        CapabilitySpec {
            c: c.into_iter().collect(),
            d: d.into_iter().collect(),
            a: a.into_iter().collect(),
            b: b.into_iter().collect(),
        }
    }

    /// Checks disjointness and membership against `model`.
    pub fn check(&self, model: &CapabilityModel) -> Result<Vec<SpecNotice>> {
        self.check_disjoint()?;
        for v in self.c.iter().chain(&self.d).chain(&self.a).chain(&self.b) {
            if !model.graph.contains(v) {
                return Err(Error::UnknownVar(v.clone()));
            }
        }
        Ok(self
            .c
            .iter()
            .chain(&self.d)
            .filter(|v| self.a.contains(*v) || self.b.contains(*v))
            .map(|v| SpecNotice::EvidenceTargetOverlap { var: v.clone() })
            .collect())
    }

    pub fn check_disjoint(&self) -> Result<()> {
        if let Some(v) = self.c.intersection(&self.d).next() {
            return Err(Error::InvalidSpec(format!(
                "`{v}` appears in both C and D; capability sets must be disjoint"
            )));
        }
        if let Some(v) = self.a.intersection(&self.b).next() {
            return Err(Error::InvalidSpec(format!(
                "`{v}` appears in both A and B; capability sets must be disjoint"
            )));
        }
        Ok(())
    }

    /// Variables whose final values the capability asserts: `A ∪ B`.
    pub fn effects(&self) -> BTreeSet<VarId> {
        self.a.union(&self.b).cloned().collect()
    }
}

impl fmt::Display for CapabilitySpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fn lits(
            f: &mut fmt::Formatter<'_>,
            pos: &BTreeSet<VarId>,
            neg: &BTreeSet<VarId>,
        ) -> fmt::Result {
            let items: Vec<String> = pos
                .iter()
                .map(|v| v.to_string())
                .chain(neg.iter().map(|v| format!("!{v}")))
                .collect();
            if items.is_empty() {
                f.write_str("true")
            } else {
                f.write_str(&items.join(" & "))
            }
        }
        lits(f, &self.c, &self.d)?;
        f.write_str(" -> ")?;
        lits(f, &self.a, &self.b)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn vars(names: &[&str]) -> Vec<VarId> {
        names.iter().map(|n| var(n)).collect()
    }

    fn edges(pairs: &[(&str, &str)]) -> Vec<(VarId, VarId)> {
        pairs.iter().map(|(a, b)| (var(a), var(b))).collect()
    }

    fn set(names: &[&str]) -> BTreeSet<VarId> {
        names.iter().map(|n| var(n)).collect()
    }

    #[test]
    fn delivery_structure_has_ten_nodes_and_thirteen_edges() {
        let v = vars(&[
            "has_money(AG)",
            "has_trolley(AG)",
            "has_license(AG)",
            "at_dest(AG)",
            "delivered(parcel)",
        ]);
        let e = edges(&[
            ("has_money(AG)", "has_trolley(AG)"),
            ("has_trolley(AG)", "delivered(parcel)"),
            ("at_dest(AG)", "delivered(parcel)"),
            ("has_license(AG)", "at_dest(AG)"),
        ]);
        let m = build_model("AG", &v, &e, BetaParam::uniform()).unwrap();
        assert_eq!(m.node_count(), 10);
        assert_eq!(m.edge_count(), 13);
        let fact_to_fact = m
            .edges()
            .filter(|(p, c)| p.is_fact() && c.is_fact())
            .count();
        assert_eq!(fact_to_fact, 4);
        assert!(m.validate().is_empty());
    }

    #[test]
    fn no_causal_edges_gives_only_own_enode_edges() {
        let m = build_model("x", &vars(&["a", "b", "c"]), &[], BetaParam::uniform()).unwrap();
        assert_eq!(m.node_count(), 6);
        assert_eq!(m.edge_count(), 3);
        for (p, c) in m.edges() {
            assert!(p.is_fact());
            assert_eq!(c, &NodeId::Eventual(p.var().clone()));
        }
    }

    #[test]
    fn two_cycle_is_rejected() {
        let err = build_model(
            "x",
            &vars(&["x", "y"]),
            &edges(&[("x", "y"), ("y", "x")]),
            BetaParam::uniform(),
        )
        .unwrap_err();
        assert!(matches!(err, Error::Cycle { .. }), "{err}");
    }

    #[test]
    fn loop_breaking_is_seeded_and_reported() {
        let v = vars(&["a", "b", "c", "d"]);
        let e = edges(&[("a", "b"), ("b", "c"), ("c", "a"), ("c", "d"), ("d", "b")]);
        let first = build_model_breaking_loops("x", &v, &e, BetaParam::uniform(), 7).unwrap();
        let again = build_model_breaking_loops("x", &v, &e, BetaParam::uniform(), 7).unwrap();
        assert_eq!(first.model, again.model);
        assert_eq!(first.removed_edges, again.removed_edges);
        assert!(!first.removed_edges.is_empty());
        assert!(first.model.validate().is_empty());
        assert_eq!(
            first.model.graph().edges().len() + first.removed_edges.len(),
            e.len()
        );
    }

    #[test]
    fn duplicate_and_dangling_inputs_are_errors() {
        let err = build_model("x", &vars(&["a", "a"]), &[], BetaParam::uniform()).unwrap_err();
        assert!(matches!(err, Error::DuplicateVar(_)));
        let err = build_model(
            "x",
            &vars(&["a"]),
            &edges(&[("a", "z")]),
            BetaParam::uniform(),
        )
        .unwrap_err();
        assert!(matches!(err, Error::DanglingEdge { .. }));
        let err = build_model("x", &vars(&["a"]), &[], BetaParam { a: 0.0, b: 1.0 }).unwrap_err();
        assert!(matches!(err, Error::InvalidBeta { .. }));
    }

    #[test]
    fn reserved_prefix_is_rejected() {
        assert!(VarId::new("e:x").is_err());
        assert!(VarId::new("").is_err());
        assert!(VarId::new("has_money(AG)").is_ok());
    }

    #[test]
    fn ancestors_follow_directed_paths() {
        let chain = build_model(
            "x",
            &vars(&["x1", "x2", "x3"]),
            &edges(&[("x1", "x2"), ("x2", "x3")]),
            BetaParam::uniform(),
        )
        .unwrap();
        assert_eq!(chain.ancestors(&set(&["x3"])).unwrap(), set(&["x1", "x2"]));
        assert_eq!(chain.ancestors(&set(&["x1"])).unwrap(), set(&[]));
        // x2 is an ancestor of the other target x3
        assert_eq!(
            chain.ancestors(&set(&["x2", "x3"])).unwrap(),
            set(&["x1", "x2"])
        );

        let diamond = build_model(
            "x",
            &vars(&["x1", "x2", "x3", "x4"]),
            &edges(&[("x1", "x2"), ("x1", "x3"), ("x2", "x4"), ("x3", "x4")]),
            BetaParam::uniform(),
        )
        .unwrap();
        assert_eq!(
            diamond.ancestors(&set(&["x4"])).unwrap(),
            set(&["x1", "x2", "x3"])
        );
        assert!(matches!(
            diamond.ancestors(&set(&["nope"])),
            Err(Error::UnknownVar(_))
        ));
    }

    #[test]
    fn validate_reports_missing_row() {
        let m = build_model(
            "x",
            &vars(&["a", "b"]),
            &edges(&[("a", "b")]),
            BetaParam::uniform(),
        )
        .unwrap();
        let (agent, graph, mut cpts) = m.into_parts();
        cpts.get_mut(&NodeId::Eventual(var("b")))
            .unwrap()
            .rows
            .pop();
        let broken = CapabilityModel::from_parts(agent, graph, cpts);
        let v = broken.validate();
        assert_eq!(v.len(), 1, "{v:?}");
        assert!(matches!(
            &v[0],
            Violation::IncompleteCpt {
                expected: 4,
                found: 3,
                ..
            }
        ));
    }

    #[test]
    fn validate_reports_enode_to_enode_edge() {
        let m = build_model(
            "x",
            &vars(&["a", "b"]),
            &edges(&[("a", "b")]),
            BetaParam::uniform(),
        )
        .unwrap();
        let (agent, graph, mut cpts) = m.into_parts();
        let cpt = cpts.get_mut(&NodeId::Eventual(var("b"))).unwrap();
        cpt.parents.push(NodeId::Eventual(var("a")));
        cpt.rows = vec![BetaParam::uniform(); cpt.expected_rows()];
        let broken = CapabilityModel::from_parts(agent, graph, cpts);
        let v = broken.validate();
        assert_eq!(v.len(), 1, "{v:?}");
        assert!(matches!(&v[0], Violation::IllegalEdge { .. }));
    }

    #[test]
    fn row_index_is_big_endian_over_parents() {
        let cpt = Cpt::uniform(
            vec![NodeId::Fact(var("a")), NodeId::Fact(var("b"))],
            BetaParam::uniform(),
        );
        let idx = cpt.row_index(|n| n.var().as_str() == "a");
        assert_eq!(idx, 2);
        assert_eq!(cpt.config_string(idx), "10");
        assert_eq!(cpt.config_string(1), "01");
        let root = Cpt::uniform(vec![], BetaParam::uniform());
        assert_eq!(root.config_string(0), "");
    }

    #[test]
    fn spec_check_catches_overlap_and_unknown_vars() {
        let m = build_model("x", &vars(&["a", "b"]), &[], BetaParam::uniform()).unwrap();
        let bad = CapabilitySpec::new([var("a")], [var("a")], [], []);
        assert!(matches!(bad.check(&m), Err(Error::InvalidSpec(_))));
        let unknown = CapabilitySpec::new([], [], [var("z")], []);
        assert!(matches!(unknown.check(&m), Err(Error::UnknownVar(_))));
        let overlap = CapabilitySpec::new([var("a")], [], [var("a")], []);
        assert_eq!(overlap.check(&m).unwrap().len(), 1);
    }
}
