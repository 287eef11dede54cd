#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};
use std::path::PathBuf;

use capmap::inference::QueryEngine;
use capmap::learning::Trace;
use capmap::mapmm::{HumanAgent, MapMmProblem, Operation, Robot};
use capmap::model::{
    build_model, expected_parents, BetaParam, CapabilityModel, CapabilitySpec, NodeId, VarId,
};
use capmap::strips::StripsAction;
use rand::seq::{IndexedRandom, SliceRandom};
use rand::Rng;

pub fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("fixtures")
        .join(name)
}

pub fn v(name: &str) -> VarId {
    VarId::new(name).unwrap()
}

pub fn var_names(n: usize) -> Vec<VarId> {
    (0..n).map(|i| v(&format!("p{i}"))).collect()
}

/// Random DAG over `vars`: edges follow a shuffled order.
pub fn random_dag(rng: &mut impl Rng, vars: &[VarId], edge_prob: f64) -> Vec<(VarId, VarId)> {
    let mut order = vars.to_vec();
    order.shuffle(rng);
    let mut edges = Vec::new();
    for i in 0..order.len() {
        for j in i + 1..order.len() {
            if rng.random_bool(edge_prob) {
                edges.push((order[i].clone(), order[j].clone()));
            }
        }
    }
    edges
}

fn beta_for_mean(rng: &mut impl Rng, theta: f64) -> BetaParam {
    let k = rng.random_range(2.0..20.0);
    BetaParam {
        a: theta * k,
        b: (1.0 - theta) * k,
    }
}

/// Model with arbitrary rows, means in (0.02, 0.98).
pub fn random_model(rng: &mut impl Rng, vars: &[VarId], edge_prob: f64) -> CapabilityModel {
    let edges = random_dag(rng, vars, edge_prob);
    let m = build_model("AG", vars, &edges, BetaParam::uniform()).unwrap();
    let (agent, graph, mut cpts) = m.into_parts();
    for cpt in cpts.values_mut() {
        for row in &mut cpt.rows {
            let theta = rng.random_range(0.02..0.98);
            *row = beta_for_mean(rng, theta);
        }
    }
    CapabilityModel::from_parts(agent, graph, cpts)
}

/// Model whose rows are nondecreasing in every parent: the mean is a
/// base plus nonnegative weights of the parents that are true.
pub fn monotone_model(rng: &mut impl Rng, vars: &[VarId], edge_prob: f64) -> CapabilityModel {
    let edges = random_dag(rng, vars, edge_prob);
    let m = build_model("AG", vars, &edges, BetaParam::uniform()).unwrap();
    let (agent, graph, mut cpts) = m.into_parts();
    for (node, cpt) in cpts.iter_mut() {
        let n = cpt.parents.len();
        let base = rng.random_range(0.02..0.4);
        let weights: Vec<f64> = (0..n)
            .map(|_| rng.random_range(0.0..0.55 / n.max(1) as f64))
            .collect();
        for (j, row) in cpt.rows.iter_mut().enumerate() {
            let mut theta = base;
            for (k, w) in weights.iter().enumerate() {
                if (j >> (n - 1 - k)) & 1 == 1 {
                    theta += w;
                }
            }
            // an e-node whose own fact is already true stays likely true
            if let NodeId::Eventual(x) = node {
                let own = cpt
                    .parents
                    .iter()
                    .position(|p| *p == NodeId::Fact(x.clone()))
                    .unwrap();
                if (j >> (n - 1 - own)) & 1 == 1 {
                    theta = theta.max(0.6);
                }
            }
            *row = beta_for_mean(rng, theta.min(0.97));
        }
    }
    CapabilityModel::from_parts(agent, graph, cpts)
}

fn random_subset(rng: &mut impl Rng, from: &[VarId], p: f64) -> BTreeSet<VarId> {
    from.iter()
        .filter(|_| rng.random_bool(p))
        .cloned()
        .collect()
}

/// Spec with disjoint C/D and disjoint A/B over the model's variables.
pub fn random_spec(rng: &mut impl Rng, model: &CapabilityModel) -> CapabilitySpec {
    let vars: Vec<VarId> = model.variables().iter().cloned().collect();
    let mut spec = CapabilitySpec::default();
    for x in &vars {
        match rng.random_range(0..5) {
            0 => {
                spec.c.insert(x.clone());
            }
            1 => {
                spec.d.insert(x.clone());
            }
            _ => {}
        }
        match rng.random_range(0..5) {
            0 => {
                spec.a.insert(x.clone());
            }
            1 => {
                spec.b.insert(x.clone());
            }
            _ => {}
        }
    }
    spec
}

/// Whether every evidence that leaves `p` unassigned or false gives
/// `P(e:p) <= P(e:p | every other variable true)`. The planners'
/// heuristics rely on this.
pub fn satisfies_goal_bound(model: &CapabilityModel) -> bool {
    let engine = QueryEngine::new(model).unwrap();
    let vars: Vec<VarId> = model.variables().iter().cloned().collect();
    for p in &vars {
        let others: Vec<&VarId> = vars.iter().filter(|x| *x != p).collect();
        let reference = CapabilitySpec {
            a: [p.clone()].into(),
            c: others.iter().map(|x| (*x).clone()).collect(),
            ..Default::default()
        };
        let top = engine.query(&reference).unwrap();
        let combos = 3usize.pow(others.len() as u32);
        for code in 0..combos {
            for p_false in [false, true] {
                let mut spec = CapabilitySpec {
                    a: [p.clone()].into(),
                    ..Default::default()
                };
                if p_false {
                    spec.d.insert(p.clone());
                }
                let mut c = code;
                for x in &others {
                    match c % 3 {
                        1 => {
                            spec.c.insert((*x).clone());
                        }
                        2 => {
                            spec.d.insert((*x).clone());
                        }
                        _ => {}
                    }
                    c /= 3;
                }
                if engine.query(&spec).unwrap() > top + 1e-12 {
                    return false;
                }
            }
        }
    }
    true
}

pub struct ProblemShape {
    pub max_props: usize,
    pub max_robot_actions: usize,
    pub max_humans: usize,
    pub max_ops: usize,
}

/// Random planning problem whose human models satisfy
/// [`satisfies_goal_bound`]. Retries until one does.
pub fn random_problem(rng: &mut impl Rng, shape: &ProblemShape) -> MapMmProblem {
    loop {
        if let Some(p) = try_random_problem(rng, shape) {
            return p;
        }
    }
}

fn try_random_problem(rng: &mut impl Rng, shape: &ProblemShape) -> Option<MapMmProblem> {
    let n = rng.random_range(3..=shape.max_props);
    let props = var_names(n);

    let mut actions = Vec::new();
    for i in 0..rng.random_range(0..=shape.max_robot_actions) {
        let add = props.choose(rng).unwrap().clone();
        let pre: BTreeSet<VarId> = random_subset(rng, &props, 0.2);
        let del: BTreeSet<VarId> = random_subset(rng, &props, 0.15)
            .into_iter()
            .filter(|x| *x != add)
            .collect();
        actions.push(StripsAction::new(&format!("a{i}"), pre, [add], del).unwrap());
    }
    let robots = if actions.is_empty() {
        vec![]
    } else {
        vec![Robot {
            id: "r".into(),
            actions,
        }]
    };

    let mut humans = Vec::new();
    for h in 0..rng.random_range(1..=shape.max_humans) {
        let k = rng.random_range(2..=n.min(4));
        let mut chosen = props.clone();
        chosen.shuffle(rng);
        chosen.truncate(k);
        chosen.sort();
        let model = monotone_model(rng, &chosen, 0.4);
        if !satisfies_goal_bound(&model) {
            return None;
        }
        let mut operations = Vec::new();
        for o in 0..rng.random_range(1..=shape.max_ops) {
            let target = chosen.choose(rng).unwrap().clone();
            let rest: Vec<VarId> = chosen.iter().filter(|x| **x != target).cloned().collect();
            let mut spec = CapabilitySpec {
                a: [target.clone()].into(),
                ..Default::default()
            };
            for x in &rest {
                match rng.random_range(0..6) {
                    0 | 1 => {
                        spec.c.insert(x.clone());
                    }
                    2 => {
                        spec.d.insert(x.clone());
                    }
                    3 => {
                        spec.b.insert(x.clone());
                    }
                    _ => {}
                }
            }
            if rng.random_bool(0.3) {
                spec.d.insert(target);
            }
            operations.push(Operation {
                name: Some(format!("o{o}")),
                spec,
            });
        }
        humans.push(HumanAgent {
            id: format!("h{h}"),
            model,
            operations,
        });
    }

    let init_true = random_subset(rng, &props, 0.35);
    let rest: Vec<VarId> = props
        .iter()
        .filter(|x| !init_true.contains(*x))
        .cloned()
        .collect();
    let init_unknown = random_subset(rng, &rest, 0.15);
    let mut goal = BTreeSet::new();
    for _ in 0..rng.random_range(1..=2) {
        goal.insert(props.choose(rng).unwrap().clone());
    }
    let problem = MapMmProblem {
        propositions: props.into_iter().collect(),
        robots,
        humans,
        init_true,
        init_unknown,
        goal,
        communication_threshold: None,
    };
    problem.validate().ok()?;
    Some(problem)
}

/// Copy of `problem` starting from `state`.
pub fn restart_from(problem: &MapMmProblem, state: &capmap::PlanningState) -> MapMmProblem {
    MapMmProblem {
        init_true: state.t().clone(),
        init_unknown: state.u().clone(),
        ..problem.clone()
    }
}

/// Polytree over `n` facts: each new node links to an earlier one in a
/// random direction.
pub fn polytree_model(rng: &mut impl Rng, n: usize) -> CapabilityModel {
    let vars = var_names(n);
    let mut edges = Vec::new();
    for i in 1..n {
        let j = rng.random_range(0..i);
        if rng.random_bool(0.5) {
            edges.push((vars[j].clone(), vars[i].clone()));
        } else {
            edges.push((vars[i].clone(), vars[j].clone()));
        }
    }
    let m = build_model("AG", &vars, &edges, BetaParam::uniform()).unwrap();
    let (agent, graph, mut cpts) = m.into_parts();
    for cpt in cpts.values_mut() {
        for row in &mut cpt.rows {
            let theta = rng.random_range(0.05..0.95);
            *row = beta_for_mean(rng, theta);
        }
    }
    CapabilityModel::from_parts(agent, graph, cpts)
}

/// Expected pseudo-count increments from `traces`, computed by scanning
/// every full assignment of both observations and keeping the consistent
/// ones.
pub fn reference_counts(
    model: &CapabilityModel,
    traces: &[Trace],
) -> BTreeMap<(NodeId, usize), (f64, f64)> {
    let vars: Vec<VarId> = model.variables().iter().cloned().collect();
    let n = vars.len();
    let mut out: BTreeMap<(NodeId, usize), (f64, f64)> = BTreeMap::new();
    for trace in traces {
        for pair in trace.observations().windows(2) {
            let consistent = |obs: &capmap::StateObservation, bits: u64| {
                vars.iter().enumerate().all(|(i, x)| match obs.value(x) {
                    Some(val) => (bits >> i & 1 == 1) == val,
                    None => true,
                })
            };
            let starts: Vec<u64> = (0..1u64 << n)
                .filter(|b| consistent(&pair[0], *b))
                .collect();
            let ends: Vec<u64> = (0..1u64 << n)
                .filter(|b| consistent(&pair[1], *b))
                .collect();
            let w = 1.0 / (starts.len() * ends.len()) as f64;
            for &s in &starts {
                for &e in &ends {
                    let value_at = |bits: u64, x: &VarId| {
                        let i = vars.iter().position(|y| y == x).unwrap();
                        bits >> i & 1 == 1
                    };
                    for (i, x) in vars.iter().enumerate() {
                        for node in [NodeId::Fact(x.clone()), NodeId::Eventual(x.clone())] {
                            let parents = expected_parents(model.graph(), &node);
                            let row = parents
                                .iter()
                                .fold(0usize, |acc, p| acc * 2 + value_at(s, p.var()) as usize);
                            let label = match node {
                                NodeId::Fact(_) => s >> i & 1 == 1,
                                NodeId::Eventual(_) => e >> i & 1 == 1,
                            };
                            let entry = out.entry((node, row)).or_default();
                            if label {
                                entry.0 += w;
                            } else {
                                entry.1 += w;
                            }
                        }
                    }
                }
            }
        }
    }
    out
}
