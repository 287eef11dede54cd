//! Linear planning with mixed models: STRIPS robots plus capability-modelled
//! human agents, maximising the product of human-operation success
//! probabilities by A* over `-log` costs.

use std::cmp::Ordering;
use std::collections::{BTreeSet, BinaryHeap, HashMap};
use std::fmt;
use std::rc::Rc;

use crate::error::{Error, Result};
use crate::inference::QueryEngine;
use crate::model::{CapabilityModel, CapabilitySpec, VarId};
use crate::strips::{apply_unchecked, PlanningState, StripsAction};

pub const DEFAULT_MAX_EXPANSIONS: usize = 1_000_000;

#[derive(Debug, Clone, PartialEq)]
pub struct Robot {
    pub id: String,
    pub actions: Vec<StripsAction>,
}

/// One entry of a human agent's operation menu.
#[derive(Debug, Clone, PartialEq)]
pub struct Operation {
    pub name: Option<String>,
    pub spec: CapabilitySpec,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HumanAgent {
    pub id: String,
    pub model: CapabilityModel,
    pub operations: Vec<Operation>,
}

/// Propositions, robots, humans, initial state, goal and an optional
/// request threshold.
#[derive(Debug, Clone, PartialEq)]
pub struct MapMmProblem {
    pub propositions: BTreeSet<VarId>,
    pub robots: Vec<Robot>,
    pub humans: Vec<HumanAgent>,
    pub init_true: BTreeSet<VarId>,
    pub init_unknown: BTreeSet<VarId>,
    pub goal: BTreeSet<VarId>,
    pub communication_threshold: Option<u32>,
}

impl MapMmProblem {
    pub fn validate(&self) -> Result<()> {
        let x = &self.propositions;
        let check_subset = |what: &str, set: &BTreeSet<VarId>| -> Result<()> {
            match set.iter().find(|v| !x.contains(*v)) {
                Some(v) => Err(Error::InvalidProblem(format!(
                    "{what} references undeclared proposition `{v}`"
                ))),
                None => Ok(()),
            }
        };
        check_subset("init_true", &self.init_true)?;
        check_subset("init_unknown", &self.init_unknown)?;
        check_subset("goal", &self.goal)?;
        if let Some(v) = self.init_true.intersection(&self.init_unknown).next() {
            return Err(Error::InvalidProblem(format!(
                "`{v}` is both initially true and initially unknown"
            )));
        }

        let mut ids = BTreeSet::new();
        for r in &self.robots {
            if !ids.insert(r.id.as_str()) {
                return Err(Error::InvalidProblem(format!(
                    "duplicate agent id `{}`",
                    r.id
                )));
            }
            for a in &r.actions {
                a.check()?;
                let vars: BTreeSet<VarId> = a.vars().cloned().collect();
                check_subset(&format!("robot `{}` action `{}`", r.id, a.id), &vars)?;
            }
        }
        for h in &self.humans {
            if !ids.insert(h.id.as_str()) {
                return Err(Error::InvalidProblem(format!(
                    "duplicate agent id `{}`",
                    h.id
                )));
            }
            h.model.ensure_valid()?;
            check_subset(&format!("model of human `{}`", h.id), h.model.variables())?;
            for (i, op) in h.operations.iter().enumerate() {
                op.spec.check(&h.model).map_err(|e| {
                    Error::InvalidProblem(format!("human `{}` operation {i}: {e}", h.id))
                })?;
            }
        }
        Ok(())
    }

    pub fn initial_state(&self) -> Result<PlanningState> {
        PlanningState::initial(&self.propositions, &self.init_true, &self.init_unknown)
    }

    /// Propositions some robot action adds.
    pub fn robot_addable(&self) -> BTreeSet<VarId> {
        self.robots
            .iter()
            .flat_map(|r| r.actions.iter().flat_map(|a| a.add.iter().cloned()))
            .collect()
    }

    /// Copy of the problem with one human's model replaced.
    pub fn with_human_model(mut self, agent: &str, model: CapabilityModel) -> Result<Self> {
        let h = self
            .humans
            .iter_mut()
            .find(|h| h.id == agent)
            .ok_or_else(|| Error::InvalidProblem(format!("no human agent `{agent}`")))?;
        h.model = model;
        self.validate()?;
        Ok(self)
    }
}

/// State reached when a human operation succeeds. With
/// `AC' = ancestors(A ∪ B) \ A \ B`:
/// `T' = T ∪ A \ B \ AC'`, `N' = N ∪ B \ A \ AC'`, `U' = U ∪ AC' \ A \ B`.
pub fn operation_success_state(
    model: &CapabilityModel,
    spec: &CapabilitySpec,
    s: &PlanningState,
) -> Result<PlanningState> {
    let disturbed = disturbed_vars(model, spec)?;
    let mut next = s.clone();
    for v in &disturbed {
        next.set(v, None);
    }
    for v in &spec.a {
        next.set(v, Some(true));
    }
    for v in &spec.b {
        next.set(v, Some(false));
    }
    Ok(next)
}

/// State reached when a human operation fails: `A`, `B` and `AC'` all
/// become unknown.
pub fn operation_failure_state(
    model: &CapabilityModel,
    spec: &CapabilitySpec,
    s: &PlanningState,
) -> Result<PlanningState> {
    let disturbed = disturbed_vars(model, spec)?;
    let mut next = s.clone();
    for v in disturbed.iter().chain(&spec.a).chain(&spec.b) {
        next.set(v, None);
    }
    Ok(next)
}

/// `AC' = ancestors(A ∪ B) \ A \ B`: what a rational agent may disturb.
pub fn disturbed_vars(model: &CapabilityModel, spec: &CapabilitySpec) -> Result<BTreeSet<VarId>> {
    let effects = spec.effects();
    Ok(model
        .ancestors(&effects)?
        .into_iter()
        .filter(|v| !effects.contains(v))
        .collect())
}

fn check_operation(
    model: &CapabilityModel,
    spec: &CapabilitySpec,
    s: &PlanningState,
) -> Result<()> {
    spec.check(model)?;
    if let Some(v) = spec.effects().iter().find(|v| !s.contains(v)) {
        return Err(Error::UnknownVar((*v).clone()));
    }
    if !spec.c.is_subset(s.t()) || !spec.d.is_subset(s.n()) {
        return Err(Error::NotApplicable(spec.to_string()));
    }
    Ok(())
}

/// Applies a human operation on success and returns the new state with the
/// operation's success probability.
pub fn apply_human_operation(
    model: &CapabilityModel,
    spec: &CapabilitySpec,
    s: &PlanningState,
) -> Result<(PlanningState, f64)> {
    check_operation(model, spec, s)?;
    let p = crate::inference::query_capability(model, spec)?;
    Ok((operation_success_state(model, spec, s)?, p))
}

/// Admissible cost-to-go estimate for a linear plan. See [`Expander::h`].
pub fn heuristic_h(s: &PlanningState, problem: &MapMmProblem) -> Result<f64> {
    Expander::new(problem, false)?.h(s)
}

#[derive(Debug, Clone, PartialEq)]
pub enum Step {
    Robot {
        robot: String,
        action: String,
    },
    Human {
        agent: String,
        operation: Option<String>,
        spec: CapabilitySpec,
        probability: f64,
    },
}

impl Step {
    pub fn label(&self) -> String {
        match self {
            Step::Robot { robot, action } => format!("{robot}:{action}"),
            Step::Human {
                agent,
                operation: Some(name),
                ..
            } => format!("{agent}:{name}"),
            Step::Human { agent, spec, .. } => format!("{agent}:[{spec}]"),
        }
    }

    pub fn cost(&self) -> f64 {
        match self {
            Step::Robot { .. } => 0.0,
            Step::Human { probability, .. } => -probability.ln(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Plan {
    pub steps: Vec<Step>,
    pub success_probability: f64,
}

impl Plan {
    pub fn cost(&self) -> f64 {
        self.steps.iter().map(Step::cost).sum()
    }

    pub fn human_steps(&self) -> usize {
        self.steps
            .iter()
            .filter(|s| matches!(s, Step::Human { .. }))
            .count()
    }
}

impl fmt::Display for Plan {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.steps.is_empty() {
            writeln!(f, "(empty plan)")?;
        }
        for (i, step) in self.steps.iter().enumerate() {
            match step {
                Step::Robot { robot, action } => {
                    writeln!(f, "{:>3}. robot {robot}: {action}", i + 1)?
                }
                Step::Human {
                    agent,
                    operation,
                    spec,
                    probability,
                } => {
                    let name = operation
                        .as_deref()
                        .map(|n| format!("{n} "))
                        .unwrap_or_default();
                    writeln!(
                        f,
                        "{:>3}. human {agent}: {name}[{spec}]  p = {probability}",
                        i + 1
                    )?
                }
            }
        }
        writeln!(f, "success probability: {}", self.success_probability)
    }
}

/// A single candidate transition out of a state.
#[derive(Debug, Clone)]
pub(crate) enum Move {
    Robot {
        robot: usize,
        action: usize,
    },
    Human {
        agent: usize,
        name: Option<String>,
        spec: CapabilitySpec,
    },
}

/// Successor generation, operation probabilities and the heuristic for one
/// problem. Query results are cached per (agent, spec).
pub(crate) struct Expander<'p> {
    pub problem: &'p MapMmProblem,
    engines: Vec<QueryEngine<'p>>,
    robot_addable: BTreeSet<VarId>,
    auto_ops: bool,
    prob_cache: HashMap<(usize, CapabilitySpec), f64>,
    goal_cost_cache: HashMap<VarId, f64>,
}

impl<'p> Expander<'p> {
    pub fn new(problem: &'p MapMmProblem, auto_ops: bool) -> Result<Self> {
        problem.validate()?;
        let engines = problem
            .humans
            .iter()
            .map(|h| QueryEngine::new(&h.model))
            .collect::<Result<Vec<_>>>()?;
        Ok(Expander {
            problem,
            engines,
            robot_addable: problem.robot_addable(),
            auto_ops,
            prob_cache: HashMap::new(),
            goal_cost_cache: HashMap::new(),
        })
    }

    pub fn moves(&self, s: &PlanningState) -> Vec<Move> {
        let mut out = Vec::new();
        for (ri, r) in self.problem.robots.iter().enumerate() {
            for (ai, a) in r.actions.iter().enumerate() {
                if a.pre.is_subset(s.t()) {
                    out.push(Move::Robot {
                        robot: ri,
                        action: ai,
                    });
                }
            }
        }
        for (hi, h) in self.problem.humans.iter().enumerate() {
            for op in &h.operations {
                if op.spec.c.is_subset(s.t()) && op.spec.d.is_subset(s.n()) {
                    out.push(Move::Human {
                        agent: hi,
                        name: op.name.clone(),
                        spec: op.spec.clone(),
                    });
                }
            }
            if self.auto_ops {
                let xs = h.model.variables();
                let c: BTreeSet<VarId> = s.t().intersection(xs).cloned().collect();
                let d: BTreeSet<VarId> = s.n().intersection(xs).cloned().collect();
                for p in xs.iter().filter(|p| !s.t().contains(*p)) {
                    out.push(Move::Human {
                        agent: hi,
                        name: Some(format!("auto({p})")),
                        spec: CapabilitySpec {
                            a: [p.clone()].into(),
                            b: BTreeSet::new(),
                            c: c.clone(),
                            d: d.clone(),
                        },
                    });
                }
            }
        }
        out
    }

    pub fn label(&self, m: &Move) -> String {
        match m {
            Move::Robot { robot, action } => {
                let r = &self.problem.robots[*robot];
                format!("{}:{}", r.id, r.actions[*action].id)
            }
            Move::Human { agent, name, spec } => {
                let id = &self.problem.humans[*agent].id;
                match name {
                    Some(n) => format!("{id}:{n}"),
                    None => format!("{id}:[{spec}]"),
                }
            }
        }
    }

    pub fn robot_next(&self, robot: usize, action: usize, s: &PlanningState) -> PlanningState {
        apply_unchecked(&self.problem.robots[robot].actions[action], s)
    }

    pub fn model(&self, agent: usize) -> &'p CapabilityModel {
        &self.problem.humans[agent].model
    }

    pub fn probability(&mut self, agent: usize, spec: &CapabilitySpec) -> Result<f64> {
        if let Some(&p) = self.prob_cache.get(&(agent, spec.clone())) {
            return Ok(p);
        }
        let p = self.engines[agent].query(spec)?;
        self.prob_cache.insert((agent, spec.clone()), p);
        Ok(p)
    }

    /// Cheapest single-agent cost of making `p` true given every other
    /// variable of that agent true; `+∞` when no agent models `p`.
    fn goal_cost(&mut self, p: &VarId) -> Result<f64> {
        if let Some(&c) = self.goal_cost_cache.get(p) {
            return Ok(c);
        }
        let mut best = f64::INFINITY;
        for (hi, h) in self.problem.humans.iter().enumerate() {
            let xs = h.model.variables();
            if !xs.contains(p) {
                continue;
            }
            let spec = CapabilitySpec {
                a: [p.clone()].into(),
                b: BTreeSet::new(),
                c: xs.iter().filter(|v| *v != p).cloned().collect(),
                d: BTreeSet::new(),
            };
            let cost = -self.engines[hi].query(&spec)?.ln();
            if cost < best {
                best = cost;
            }
        }
        self.goal_cost_cache.insert(p.clone(), best);
        Ok(best)
    }

    /// `h(S) = max_{p ∈ G_Φ} min_φ -log P(ṗ | X_φ \ p)` over goal
    /// propositions not yet true that no robot action adds; 0 when there
    /// are none.
    pub fn h(&mut self, s: &PlanningState) -> Result<f64> {
        let pending: Vec<VarId> = self
            .problem
            .goal
            .iter()
            .filter(|p| !s.t().contains(*p) && !self.robot_addable.contains(*p))
            .cloned()
            .collect();
        let mut h: f64 = 0.0;
        for p in &pending {
            h = h.max(self.goal_cost(p)?);
        }
        Ok(h)
    }
}

/// Options for [`astar_plan_with`].
#[derive(Debug, Clone)]
pub struct SearchOptions {
    pub auto_ops: bool,
    pub max_expansions: usize,
}

impl Default for SearchOptions {
    fn default() -> Self {
        SearchOptions {
            auto_ops: false,
            max_expansions: DEFAULT_MAX_EXPANSIONS,
        }
    }
}

/// One outgoing edge of an expanded node.
#[derive(Debug, Clone)]
pub struct EdgeRecord {
    pub label: String,
    pub cost: f64,
    pub next: PlanningState,
    pub next_h: f64,
}

/// What the search saw when it expanded a node.
#[derive(Debug, Clone)]
pub struct ExpansionRecord {
    pub state: PlanningState,
    pub g: f64,
    pub h: f64,
    pub edges: Vec<EdgeRecord>,
}

struct PathNode {
    step: Step,
    prev: Option<Rc<PathNode>>,
}

struct OpenNode {
    f: f64,
    g: f64,
    human_steps: usize,
    labels: Vec<String>,
    state: PlanningState,
    path: Option<Rc<PathNode>>,
}

impl OpenNode {
    fn key_cmp(&self, other: &Self) -> Ordering {
        self.f
            .total_cmp(&other.f)
            .then(self.g.total_cmp(&other.g))
            .then(self.human_steps.cmp(&other.human_steps))
            .then_with(|| self.labels.cmp(&other.labels))
    }
}

impl PartialEq for OpenNode {
    fn eq(&self, other: &Self) -> bool {
        self.key_cmp(other) == Ordering::Equal
    }
}

impl Eq for OpenNode {}

impl PartialOrd for OpenNode {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for OpenNode {
    // BinaryHeap is a max-heap; smallest key first.
    fn cmp(&self, other: &Self) -> Ordering {
        self.key_cmp(other).reverse()
    }
}

pub fn astar_plan(problem: &MapMmProblem) -> Result<Plan> {
    astar_plan_with(problem, &SearchOptions::default())
}

pub fn astar_plan_with(problem: &MapMmProblem, options: &SearchOptions) -> Result<Plan> {
    astar_plan_observed(problem, options, &mut |_| {})
}

/// A* with `g = Σ -log p`, `f = g + h`. Ties go to lower `g`, then fewer
/// human steps, then the lexicographically smaller step-label sequence.
/// `observer` sees every expansion.
pub fn astar_plan_observed(
    problem: &MapMmProblem,
    options: &SearchOptions,
    observer: &mut dyn FnMut(&ExpansionRecord),
) -> Result<Plan> {
    let mut ex = Expander::new(problem, options.auto_ops)?;
    let start = problem.initial_state()?;
    let h0 = ex.h(&start)?;

    let mut best_g: HashMap<PlanningState, f64> = HashMap::new();
    let mut open = BinaryHeap::new();
    if h0.is_finite() {
        best_g.insert(start.clone(), 0.0);
        open.push(OpenNode {
            f: h0,
            g: 0.0,
            human_steps: 0,
            labels: Vec::new(),
            state: start,
            path: None,
        });
    }

    let mut expansions = 0usize;
    while let Some(node) = open.pop() {
        if best_g.get(&node.state).is_some_and(|&g| node.g > g) {
            continue;
        }
        if node.state.satisfies(&problem.goal) {
            return Ok(reconstruct(node.path));
        }
        expansions += 1;
        if expansions > options.max_expansions {
            return Err(Error::ExpansionLimit(options.max_expansions));
        }

        let mut record = ExpansionRecord {
            state: node.state.clone(),
            g: node.g,
            h: node.f - node.g,
            edges: Vec::new(),
        };
        for m in ex.moves(&node.state) {
            let label = ex.label(&m);
            let (next, step) = match &m {
                Move::Robot { robot, action } => (
                    ex.robot_next(*robot, *action, &node.state),
                    Step::Robot {
                        robot: problem.robots[*robot].id.clone(),
                        action: problem.robots[*robot].actions[*action].id.clone(),
                    },
                ),
                Move::Human { agent, name, spec } => {
                    let p = ex.probability(*agent, spec)?;
                    let next = operation_success_state(ex.model(*agent), spec, &node.state)?;
                    (
                        next,
                        Step::Human {
                            agent: problem.humans[*agent].id.clone(),
                            operation: name.clone(),
                            spec: spec.clone(),
                            probability: p,
                        },
                    )
                }
            };
            let cost = step.cost();
            let h = ex.h(&next)?;
            record.edges.push(EdgeRecord {
                label: label.clone(),
                cost,
                next: next.clone(),
                next_h: h,
            });
            let g = node.g + cost;
            if !(g + h).is_finite() {
                continue;
            }
            if best_g.get(&next).is_some_and(|&old| old <= g) {
                continue;
            }
            best_g.insert(next.clone(), g);
            let mut labels = node.labels.clone();
            labels.push(label);
            let human_steps = node.human_steps + usize::from(matches!(m, Move::Human { .. }));
            open.push(OpenNode {
                f: g + h,
                g,
                human_steps,
                labels,
                state: next,
                path: Some(Rc::new(PathNode {
                    step,
                    prev: node.path.clone(),
                })),
            });
        }
        observer(&record);
    }
    Err(Error::NoPlan)
}

fn reconstruct(mut path: Option<Rc<PathNode>>) -> Plan {
    let mut steps = Vec::new();
    while let Some(node) = path {
        steps.push(node.step.clone());
        path = node.prev.clone();
    }
    steps.reverse();
    let success_probability = steps
        .iter()
        .map(|s| match s {
            Step::Robot { .. } => 1.0,
            Step::Human { probability, .. } => *probability,
        })
        .product();
    Plan {
        steps,
        success_probability,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{build_model, var, BetaParam, NodeId};

    fn set(names: &[&str]) -> BTreeSet<VarId> {
        names.iter().map(|n| var(n)).collect()
    }

    fn trolley_model() -> CapabilityModel {
        build_model(
            "AG",
            &[var("has_trolley"), var("delivered")],
            &[(var("has_trolley"), var("delivered"))],
            BetaParam::uniform(),
        )
        .unwrap()
    }

    #[test]
    fn success_moves_ancestors_to_unknown() {
        let m = trolley_model();
        let s =
            PlanningState::from_sets(set(&["has_trolley"]), set(&["delivered"]), set(&[])).unwrap();
        let spec = CapabilitySpec::new([], [], [var("delivered")], []);
        let (next, p) = apply_human_operation(&m, &spec, &s).unwrap();
        assert_eq!(next.t(), &set(&["delivered"]));
        assert_eq!(next.u(), &set(&["has_trolley"]));
        assert!(next.n().is_empty());
        assert!(p > 0.0 && p < 1.0);
    }

    #[test]
    fn empty_operation_is_identity_with_probability_one() {
        let m = trolley_model();
        let s =
            PlanningState::from_sets(set(&["has_trolley"]), set(&["delivered"]), set(&[])).unwrap();
        let (next, p) = apply_human_operation(&m, &CapabilitySpec::default(), &s).unwrap();
        assert_eq!(next, s);
        assert_eq!(p, 1.0);
    }

    #[test]
    fn precondition_must_hold() {
        let m = trolley_model();
        let s =
            PlanningState::from_sets(set(&[]), set(&["delivered"]), set(&["has_trolley"])).unwrap();
        let spec = CapabilitySpec::new([var("has_trolley")], [], [var("delivered")], []);
        assert!(matches!(
            apply_human_operation(&m, &spec, &s),
            Err(Error::NotApplicable(_))
        ));
    }

    #[test]
    fn failure_state_forgets_effects_and_ancestors() {
        let m = trolley_model();
        let s =
            PlanningState::from_sets(set(&["has_trolley"]), set(&["delivered"]), set(&[])).unwrap();
        let spec = CapabilitySpec::new([], [], [var("delivered")], []);
        let next = operation_failure_state(&m, &spec, &s).unwrap();
        assert_eq!(next.u(), &set(&["delivered", "has_trolley"]));
        assert!(next.t().is_empty() && next.n().is_empty());
    }

    fn problem(model: CapabilityModel, robots: Vec<Robot>, goal: &[&str]) -> MapMmProblem {
        MapMmProblem {
            propositions: set(&["has_trolley", "delivered", "van"]),
            robots,
            humans: vec![HumanAgent {
                id: "AG".into(),
                model,
                operations: vec![Operation {
                    name: Some("deliver".into()),
                    spec: CapabilitySpec::new([var("has_trolley")], [], [var("delivered")], []),
                }],
            }],
            init_true: set(&[]),
            init_unknown: set(&[]),
            goal: set(goal),
            communication_threshold: None,
        }
    }

    #[test]
    fn heuristic_cases() {
        let m = trolley_model();
        let p = problem(m.clone(), vec![], &["delivered"]);
        let s = p.initial_state().unwrap();
        let h = heuristic_h(&s, &p).unwrap();
        let direct = crate::inference::query_capability(
            &m,
            &CapabilitySpec::new([var("has_trolley")], [], [var("delivered")], []),
        )
        .unwrap();
        assert!((h + direct.ln()).abs() < 1e-12);

        let robot_only = problem(m.clone(), vec![], &["has_trolley"]);
        let robot_only = MapMmProblem {
            robots: vec![Robot {
                id: "r".into(),
                actions: vec![StripsAction::new("fetch", [], [var("has_trolley")], []).unwrap()],
            }],
            ..robot_only
        };
        assert_eq!(
            heuristic_h(&robot_only.initial_state().unwrap(), &robot_only).unwrap(),
            0.0
        );

        let unreachable = problem(m, vec![], &["van"]);
        assert_eq!(
            heuristic_h(&unreachable.initial_state().unwrap(), &unreachable).unwrap(),
            f64::INFINITY
        );
    }

    #[test]
    fn astar_trivial_and_robot_only() {
        let m = trolley_model();
        let mut p = problem(m.clone(), vec![], &[]);
        let plan = astar_plan(&p).unwrap();
        assert!(plan.steps.is_empty());
        assert_eq!(plan.success_probability, 1.0);

        p.goal = set(&["van"]);
        p.robots = vec![Robot {
            id: "r".into(),
            actions: vec![StripsAction::new("load_van", [], [var("van")], []).unwrap()],
        }];
        let plan = astar_plan(&p).unwrap();
        assert_eq!(plan.success_probability, 1.0);
        assert_eq!(plan.human_steps(), 0);
        assert_eq!(plan.steps.len(), 1);
    }

    #[test]
    fn astar_uses_robot_then_human() {
        let mut m = trolley_model();
        let (agent, graph, mut cpts) = m.clone().into_parts();
        // make delivery likely when the trolley is there
        // rows "01" and "11" over (delivered, has_trolley)
        let rows = &mut cpts
            .get_mut(&NodeId::Eventual(var("delivered")))
            .unwrap()
            .rows;
        rows[1] = BetaParam { a: 9.0, b: 1.0 };
        rows[3] = BetaParam { a: 9.0, b: 1.0 };
        m = CapabilityModel::from_parts(agent, graph, cpts);
        let p = problem(
            m,
            vec![Robot {
                id: "r".into(),
                actions: vec![StripsAction::new("fetch", [], [var("has_trolley")], []).unwrap()],
            }],
            &["delivered"],
        );
        let plan = astar_plan(&p).unwrap();
        assert_eq!(plan.steps.len(), 2);
        assert_eq!(plan.steps[0].label(), "r:fetch");
        assert_eq!(plan.steps[1].label(), "AG:deliver");
        assert!((plan.success_probability - (-plan.cost()).exp()).abs() < 1e-12);
        assert!((plan.success_probability - 0.9).abs() < 1e-12);
    }

    #[test]
    fn unreachable_goal_is_no_plan() {
        let p = problem(trolley_model(), vec![], &["van"]);
        assert!(matches!(astar_plan(&p), Err(Error::NoPlan)));
    }

    #[test]
    fn expansion_cap_is_reported() {
        let mut p = problem(trolley_model(), vec![], &["delivered"]);
        p.robots = vec![Robot {
            id: "r".into(),
            actions: vec![
                StripsAction::new("on", [], [var("van")], []).unwrap(),
                StripsAction::new("off", [], [], [var("van")]).unwrap(),
            ],
        }];
        let opts = SearchOptions {
            max_expansions: 1,
            ..SearchOptions::default()
        };
        assert!(matches!(
            astar_plan_with(&p, &opts),
            Err(Error::ExpansionLimit(1))
        ));
    }
}
