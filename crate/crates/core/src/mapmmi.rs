//! Conditional planning with a per-execution-path request budget.
//!
//! A search node holds every frontier branch (substate) of a partial
//! conditional plan. Requesting a human operation splits a substate into a
//! success and a failure branch whose masses are the parent's mass times
//! `p` and `1 - p`. The plan's value is the total mass that reaches the goal.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BinaryHeap, HashSet};
use std::fmt;
use std::rc::Rc;

use crate::error::{Error, Result};
use crate::inference::query_capability;
use crate::mapmm::{
    operation_failure_state, operation_success_state, Expander, MapMmProblem, Move,
    DEFAULT_MAX_EXPANSIONS,
};
use crate::model::{CapabilityModel, CapabilitySpec};
use crate::strips::PlanningState;

type NodeKey = (Vec<(Rc<PlanningState>, u32, u32, u64)>, u64);

pub const DEFAULT_MAX_DEPTH: u32 = 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SubstateStatus {
    Open,
    Goal,
    Abandoned,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Substate {
    pub state: PlanningState,
    pub mass: f64,
    pub requests_used: u32,
    pub status: SubstateStatus,
}

impl Substate {
    pub fn root(state: PlanningState) -> Self {
        Substate {
            state,
            mass: 1.0,
            requests_used: 0,
            status: SubstateStatus::Open,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct CondSearchState {
    pub substates: Vec<Substate>,
}

/// Splits `sub` on a request. The success branch gets `mass * p` and the
/// MAP-MM success state; the failure branch gets `mass * (1 - p)` with
/// `A`, `B` and the disturbed ancestors unknown.
pub fn expand_request(
    model: &CapabilityModel,
    spec: &CapabilitySpec,
    sub: &Substate,
    budget: u32,
) -> Result<(Substate, Substate)> {
    if sub.requests_used >= budget {
        return Err(Error::BudgetExhausted);
    }
    spec.check(model)?;
    if !spec.c.is_subset(sub.state.t()) || !spec.d.is_subset(sub.state.n()) {
        return Err(Error::NotApplicable(spec.to_string()));
    }
    let p = query_capability(model, spec)?;
    Ok(split(model, spec, sub, p))
}

fn split(
    model: &CapabilityModel,
    spec: &CapabilitySpec,
    sub: &Substate,
    p: f64,
) -> (Substate, Substate) {
    let success = Substate {
        state: operation_success_state(model, spec, &sub.state).expect("spec checked"),
        mass: sub.mass * p,
        requests_used: sub.requests_used + 1,
        status: SubstateStatus::Open,
    };
    let failure = Substate {
        state: operation_failure_state(model, spec, &sub.state).expect("spec checked"),
        mass: sub.mass - success.mass,
        requests_used: sub.requests_used + 1,
        status: SubstateStatus::Open,
    };
    (success, failure)
}

/// `-log Σ mass·exp(-h(s))` over open substates, with goal substates
/// contributing their full mass and abandoned ones nothing.
pub fn heuristic_cond(s: &CondSearchState, problem: &MapMmProblem) -> Result<f64> {
    let mut ex = Expander::new(problem, false)?;
    let mut total = 0.0;
    for sub in &s.substates {
        total += match sub.status {
            SubstateStatus::Goal => sub.mass,
            SubstateStatus::Abandoned => 0.0,
            SubstateStatus::Open => sub.mass * (-ex.h(&sub.state)?).exp(),
        };
    }
    Ok(-total.ln())
}

/// Upper bound on the success probability of one open substate when at
/// most `remaining` more requests fit on its path. `q = exp(-h)` bounds a
/// single request; independent retries can do no better than
/// `1 - (1 - q)^remaining`.
fn substate_bound(q: f64, remaining: u32) -> f64 {
    if q >= 1.0 {
        1.0
    } else {
        1.0 - (1.0 - q).powi(remaining as i32)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum CondNode {
    Robot {
        robot: String,
        action: String,
        child: Box<CondNode>,
    },
    Request {
        agent: String,
        operation: Option<String>,
        spec: CapabilitySpec,
        probability: f64,
        success: Box<CondNode>,
        failure: Box<CondNode>,
    },
    Goal,
    Abandoned {
        depth_capped: bool,
    },
}

impl CondNode {
    /// Probability mass of goal leaves below this node, for unit mass here.
    pub fn success_mass(&self) -> f64 {
        match self {
            CondNode::Robot { child, .. } => child.success_mass(),
            CondNode::Request {
                probability,
                success,
                failure,
                ..
            } => {
                probability * success.success_mass() + (1.0 - probability) * failure.success_mass()
            }
            CondNode::Goal => 1.0,
            CondNode::Abandoned { .. } => 0.0,
        }
    }

    /// Largest number of requests on any root-to-leaf path.
    pub fn max_requests_on_path(&self) -> u32 {
        match self {
            CondNode::Robot { child, .. } => child.max_requests_on_path(),
            CondNode::Request {
                success, failure, ..
            } => {
                1 + success
                    .max_requests_on_path()
                    .max(failure.max_requests_on_path())
            }
            CondNode::Goal | CondNode::Abandoned { .. } => 0,
        }
    }

    pub fn request_count(&self) -> usize {
        match self {
            CondNode::Robot { child, .. } => child.request_count(),
            CondNode::Request {
                success, failure, ..
            } => 1 + success.request_count() + failure.request_count(),
            CondNode::Goal | CondNode::Abandoned { .. } => 0,
        }
    }

    fn render(&self, f: &mut fmt::Formatter<'_>, indent: usize) -> fmt::Result {
        let pad = "  ".repeat(indent);
        match self {
            CondNode::Robot {
                robot,
                action,
                child,
            } => {
                writeln!(f, "{pad}robot {robot}: {action}")?;
                child.render(f, indent)
            }
            CondNode::Request {
                agent,
                operation,
                spec,
                probability,
                success,
                failure,
            } => {
                let name = operation
                    .as_deref()
                    .map(|n| format!("{n} "))
                    .unwrap_or_default();
                writeln!(f, "{pad}request {agent}: {name}[{spec}]  p = {probability}")?;
                writeln!(f, "{pad}  on success:")?;
                success.render(f, indent + 2)?;
                writeln!(f, "{pad}  on failure:")?;
                failure.render(f, indent + 2)
            }
            CondNode::Goal => writeln!(f, "{pad}goal"),
            CondNode::Abandoned { depth_capped: true } => {
                writeln!(f, "{pad}abandon (depth limit)")
            }
            CondNode::Abandoned { .. } => writeln!(f, "{pad}abandon"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConditionalPlan {
    pub root: CondNode,
    pub success_probability: f64,
    /// Some branch was cut off by the depth limit.
    pub depth_exceeded: bool,
}

impl fmt::Display for ConditionalPlan {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.root.render(f, 0)?;
        if self.depth_exceeded {
            writeln!(f, "note: depth limit reached on some branch")?;
        }
        writeln!(f, "success probability: {}", self.success_probability)
    }
}

#[derive(Debug, Clone)]
pub struct CondOptions {
    pub budget: u32,
    pub max_depth: u32,
    pub max_expansions: usize,
    pub auto_ops: bool,
}

impl CondOptions {
    pub fn with_budget(budget: u32) -> Self {
        CondOptions {
            budget,
            max_depth: DEFAULT_MAX_DEPTH,
            max_expansions: DEFAULT_MAX_EXPANSIONS,
            auto_ops: false,
        }
    }
}

/// Masses seen when a substate was split by a request.
#[derive(Debug, Clone, Copy)]
pub struct SplitRecord {
    pub parent_mass: f64,
    pub success_mass: f64,
    pub failure_mass: f64,
    pub requests_used: u32,
}

#[derive(Debug, Clone)]
enum Decision {
    Robot {
        robot: usize,
        action: usize,
        child: u32,
    },
    Request {
        agent: usize,
        name: Option<String>,
        spec: CapabilitySpec,
        probability: f64,
        success: u32,
        failure: u32,
    },
    Goal,
    Abandon {
        depth_capped: bool,
    },
}

struct DecisionList {
    id: u32,
    decision: Decision,
    prev: Option<Rc<DecisionList>>,
}

struct Trail {
    state: Rc<PlanningState>,
    prev: Option<Rc<Trail>>,
}

#[derive(Clone)]
struct Sub {
    id: u32,
    state: Rc<PlanningState>,
    mass: f64,
    used: u32,
    depth: u32,
    /// States visited since the last request on this path.
    trail: Option<Rc<Trail>>,
    /// Optimistic success probability for unit mass.
    bound: f64,
}

impl Sub {
    fn on_trail(&self, s: &PlanningState) -> bool {
        let mut t = self.trail.as_ref();
        while let Some(node) = t {
            if *node.state == *s {
                return true;
            }
            t = node.prev.as_ref();
        }
        false
    }
}

#[derive(Clone)]
struct Node {
    open: Vec<Sub>,
    goal_mass: f64,
    decisions: Option<Rc<DecisionList>>,
    decision_count: usize,
    requests: u32,
    next_id: u32,
    f: f64,
    seq: u64,
}

impl Node {
    fn decide(&mut self, id: u32, decision: Decision) {
        self.decisions = Some(Rc::new(DecisionList {
            id,
            decision,
            prev: self.decisions.take(),
        }));
        self.decision_count += 1;
    }

    fn refresh_f(&mut self) {
        let optimistic: f64 =
            self.goal_mass + self.open.iter().map(|s| s.mass * s.bound).sum::<f64>();
        self.f = -optimistic.ln();
    }

    fn key(&self) -> NodeKey {
        (
            self.open
                .iter()
                .map(|s| (s.state.clone(), s.used, s.depth, s.mass.to_bits()))
                .collect(),
            self.goal_mass.to_bits(),
        )
    }

    /// `f` rounded to 1e-12 so that plans equal up to rounding noise tie.
    fn f_key(&self) -> i64 {
        if self.f.is_finite() {
            (self.f * 1e12).round() as i64
        } else {
            i64::MAX
        }
    }

    fn cmp_key(&self, other: &Self) -> Ordering {
        // Lower f first; then fewer open branches and fewer requests. Among
        // complete plans the smaller one wins, among partial ones the
        // deeper. Generation order settles the rest.
        self.f_key()
            .cmp(&other.f_key())
            .then(self.open.len().cmp(&other.open.len()))
            .then(self.requests.cmp(&other.requests))
            .then(if self.open.is_empty() {
                self.decision_count.cmp(&other.decision_count)
            } else {
                other.decision_count.cmp(&self.decision_count)
            })
            .then(self.seq.cmp(&other.seq))
    }
}

impl PartialEq for Node {
    fn eq(&self, other: &Self) -> bool {
        self.cmp_key(other) == Ordering::Equal
    }
}
impl Eq for Node {}
impl PartialOrd for Node {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Node {
    fn cmp(&self, other: &Self) -> Ordering {
        self.cmp_key(other).reverse()
    }
}

pub fn plan_conditional(problem: &MapMmProblem, budget: u32) -> Result<ConditionalPlan> {
    plan_conditional_with(problem, &CondOptions::with_budget(budget))
}

pub fn plan_conditional_with(
    problem: &MapMmProblem,
    options: &CondOptions,
) -> Result<ConditionalPlan> {
    plan_conditional_observed(problem, options, &mut |_| {})
}

/// Best-first search over partial conditional plans. Each expansion takes
/// the first open substate and either applies a robot action, splits it on
/// a request (while its path has budget left), or abandons it. The first
/// complete plan popped maximises the goal mass.
pub fn plan_conditional_observed(
    problem: &MapMmProblem,
    options: &CondOptions,
    observer: &mut dyn FnMut(&SplitRecord),
) -> Result<ConditionalPlan> {
    let mut search = CondSearch {
        ex: Expander::new(problem, options.auto_ops)?,
        options,
        seq: 0,
    };
    let start = problem.initial_state()?;

    let mut root = Node {
        open: Vec::new(),
        goal_mass: 0.0,
        decisions: None,
        decision_count: 0,
        requests: 0,
        next_id: 1,
        f: 0.0,
        seq: 0,
    };
    search.admit(&mut root, 0, Rc::new(start), 1.0, 0, 0, None)?;
    root.refresh_f();

    let mut open = BinaryHeap::new();
    let mut closed: HashSet<NodeKey> = HashSet::new();
    open.push(root);
    let mut expansions = 0usize;

    while let Some(node) = open.pop() {
        if node.open.is_empty() {
            return Ok(build_plan(problem, &node));
        }
        if !closed.insert(node.key()) {
            continue;
        }
        expansions += 1;
        if expansions > options.max_expansions {
            return Err(Error::ExpansionLimit(options.max_expansions));
        }
        for child in search.expand(&node, observer)? {
            open.push(child);
        }
    }
    // Abandoning is always possible, so a complete plan is always reached.
    Err(Error::NoPlan)
}

struct CondSearch<'p, 'o> {
    ex: Expander<'p>,
    options: &'o CondOptions,
    seq: u64,
}

impl CondSearch<'_, '_> {
    /// Adds a freshly created substate to `node`, resolving it at once when
    /// it is a goal or cannot succeed.
    #[allow(clippy::too_many_arguments)]
    fn admit(
        &mut self,
        node: &mut Node,
        id: u32,
        state: Rc<PlanningState>,
        mass: f64,
        used: u32,
        depth: u32,
        trail: Option<Rc<Trail>>,
    ) -> Result<()> {
        if state.satisfies(&self.ex.problem.goal) {
            node.goal_mass += mass;
            node.decide(id, Decision::Goal);
            return Ok(());
        }
        let h = self.ex.h(&state)?;
        let bound = substate_bound((-h).exp(), self.options.budget - used);
        if mass <= 0.0 || bound <= 0.0 {
            node.decide(
                id,
                Decision::Abandon {
                    depth_capped: false,
                },
            );
            return Ok(());
        }
        let trail = Some(Rc::new(Trail {
            state: state.clone(),
            prev: trail,
        }));
        node.open.push(Sub {
            id,
            state,
            mass,
            used,
            depth,
            trail,
            bound,
        });
        Ok(())
    }

    fn child_of(&mut self, parent: &Node, index: usize) -> Node {
        let mut child = parent.clone();
        child.open.remove(index);
        self.seq += 1;
        child.seq = self.seq;
        child
    }

    fn expand(&mut self, node: &Node, observer: &mut dyn FnMut(&SplitRecord)) -> Result<Vec<Node>> {
        let sub = node.open[0].clone();
        let mut out = Vec::new();

        let mut abandon = self.child_of(node, 0);
        let capped = sub.depth >= self.options.max_depth;
        abandon.decide(
            sub.id,
            Decision::Abandon {
                depth_capped: capped,
            },
        );
        abandon.refresh_f();
        if capped {
            return Ok(vec![abandon]);
        }

        for m in self.ex.moves(&sub.state) {
            match m {
                Move::Robot { robot, action } => {
                    let next = self.ex.robot_next(robot, action, &sub.state);
                    if sub.on_trail(&next) {
                        continue;
                    }
                    let mut child = self.child_of(node, 0);
                    let id = child.next_id;
                    child.next_id += 1;
                    child.decide(
                        sub.id,
                        Decision::Robot {
                            robot,
                            action,
                            child: id,
                        },
                    );
                    self.admit(
                        &mut child,
                        id,
                        Rc::new(next),
                        sub.mass,
                        sub.used,
                        sub.depth + 1,
                        sub.trail.clone(),
                    )?;
                    child.refresh_f();
                    out.push(child);
                }
                Move::Human { agent, name, spec } => {
                    if sub.used >= self.options.budget {
                        continue;
                    }
                    let p = self.ex.probability(agent, &spec)?;
                    let model = self.ex.model(agent);
                    let parent = Substate {
                        state: (*sub.state).clone(),
                        mass: sub.mass,
                        requests_used: sub.used,
                        status: SubstateStatus::Open,
                    };
                    let (ok, fail) = split(model, &spec, &parent, p);
                    observer(&SplitRecord {
                        parent_mass: sub.mass,
                        success_mass: ok.mass,
                        failure_mass: fail.mass,
                        requests_used: ok.requests_used,
                    });

                    let mut child = self.child_of(node, 0);
                    child.requests += 1;
                    let (sid, fid) = (child.next_id, child.next_id + 1);
                    child.next_id += 2;
                    child.decide(
                        sub.id,
                        Decision::Request {
                            agent,
                            name,
                            spec,
                            probability: p,
                            success: sid,
                            failure: fid,
                        },
                    );
                    // Keep the success branch ahead of the failure branch
                    // so it is expanded first.
                    let mut fresh = Node {
                        open: Vec::new(),
                        ..child.clone()
                    };
                    self.admit(
                        &mut fresh,
                        sid,
                        Rc::new(ok.state),
                        ok.mass,
                        ok.requests_used,
                        sub.depth + 1,
                        None,
                    )?;
                    self.admit(
                        &mut fresh,
                        fid,
                        Rc::new(fail.state),
                        fail.mass,
                        fail.requests_used,
                        sub.depth + 1,
                        None,
                    )?;
                    let mut open = fresh.open;
                    open.extend(child.open);
                    child.open = open;
                    child.goal_mass = fresh.goal_mass;
                    child.decisions = fresh.decisions;
                    child.decision_count = fresh.decision_count;
                    child.refresh_f();
                    out.push(child);
                }
            }
        }
        out.push(abandon);
        Ok(out)
    }
}

fn build_plan(problem: &MapMmProblem, node: &Node) -> ConditionalPlan {
    let mut decisions: BTreeMap<u32, &Decision> = BTreeMap::new();
    let mut cur = node.decisions.as_ref();
    while let Some(d) = cur {
        decisions.entry(d.id).or_insert(&d.decision);
        cur = d.prev.as_ref();
    }
    let mut depth_exceeded = false;
    let root = build_node(problem, &decisions, 0, &mut depth_exceeded);
    ConditionalPlan {
        success_probability: node.goal_mass,
        root,
        depth_exceeded,
    }
}

fn build_node(
    problem: &MapMmProblem,
    decisions: &BTreeMap<u32, &Decision>,
    id: u32,
    capped: &mut bool,
) -> CondNode {
    match decisions.get(&id) {
        Some(Decision::Robot {
            robot,
            action,
            child,
        }) => CondNode::Robot {
            robot: problem.robots[*robot].id.clone(),
            action: problem.robots[*robot].actions[*action].id.clone(),
            child: Box::new(build_node(problem, decisions, *child, capped)),
        },
        Some(Decision::Request {
            agent,
            name,
            spec,
            probability,
            success,
            failure,
        }) => CondNode::Request {
            agent: problem.humans[*agent].id.clone(),
            operation: name.clone(),
            spec: spec.clone(),
            probability: *probability,
            success: Box::new(build_node(problem, decisions, *success, capped)),
            failure: Box::new(build_node(problem, decisions, *failure, capped)),
        },
        Some(Decision::Goal) => CondNode::Goal,
        Some(Decision::Abandon { depth_capped }) => {
            *capped |= *depth_capped;
            CondNode::Abandoned {
                depth_capped: *depth_capped,
            }
        }
        None => CondNode::Abandoned {
            depth_capped: false,
        },
    }
}
