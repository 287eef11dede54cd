//! Slow reference implementations used to cross-check the planners and the
//! inference engine on small instances.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use crate::error::{Error, Result};
use crate::mapmm::MapMmProblem;
use crate::model::{CapabilityModel, CapabilitySpec, NodeId, VarId};
use crate::strips::PlanningState;

pub const MAX_ENUMERATION_NODES: usize = 20;
pub const MAX_BRUTE_FORCE_PROPS: usize = 10;
pub const MAX_BRUTE_FORCE_DEPTH: u32 = 16;

/// Conditional probability by summing the full joint over every node.
pub fn joint_enumeration_query(model: &CapabilityModel, spec: &CapabilitySpec) -> Result<f64> {
    spec.check(model)?;
    let nodes: Vec<&NodeId> = model.cpts().keys().collect();
    if nodes.len() > MAX_ENUMERATION_NODES {
        return Err(Error::OracleGuard(format!(
            "{} nodes exceeds the enumeration limit of {MAX_ENUMERATION_NODES}",
            nodes.len()
        )));
    }
    let pos: HashMap<&NodeId, usize> = nodes.iter().enumerate().map(|(i, n)| (*n, i)).collect();
    let families: Vec<(Vec<usize>, Vec<f64>)> = nodes
        .iter()
        .map(|n| {
            let cpt = &model.cpts()[*n];
            let parents = cpt.parents.iter().map(|p| pos[p]).collect();
            let theta = cpt.rows.iter().map(|r| r.a / (r.a + r.b)).collect();
            (parents, theta)
        })
        .collect();

    let mut fixed: Vec<(usize, bool)> = Vec::new();
    for v in &spec.c {
        fixed.push((pos[&NodeId::Fact(v.clone())], true));
    }
    for v in &spec.d {
        fixed.push((pos[&NodeId::Fact(v.clone())], false));
    }
    let mut wanted: Vec<(usize, bool)> = Vec::new();
    for v in &spec.a {
        wanted.push((pos[&NodeId::Eventual(v.clone())], true));
    }
    for v in &spec.b {
        wanted.push((pos[&NodeId::Eventual(v.clone())], false));
    }

    let bit = |world: u64, i: usize| world >> i & 1 == 1;
    let (mut num, mut den) = (0.0, 0.0);
    for world in 0..1u64 << nodes.len() {
        if fixed.iter().any(|&(i, val)| bit(world, i) != val) {
            continue;
        }
        let mut weight = 1.0;
        for (i, (parents, theta)) in families.iter().enumerate() {
            let row = parents
                .iter()
                .fold(0, |acc, &p| acc * 2 + bit(world, p) as usize);
            weight *= if bit(world, i) {
                theta[row]
            } else {
                1.0 - theta[row]
            };
        }
        den += weight;
        if wanted.iter().all(|&(i, val)| bit(world, i) == val) {
            num += weight;
        }
    }
    if den == 0.0 {
        return Err(Error::ImpossibleEvidence);
    }
    Ok((num / den).clamp(0.0, 1.0))
}

struct Oracle<'p> {
    problem: &'p MapMmProblem,
    probs: HashMap<(usize, CapabilitySpec), f64>,
    upstream: Vec<BTreeMap<VarId, BTreeSet<VarId>>>,
}

impl<'p> Oracle<'p> {
    fn new(problem: &'p MapMmProblem, max_depth: u32) -> Result<Self> {
        problem.validate()?;
        if problem.propositions.len() > MAX_BRUTE_FORCE_PROPS {
            return Err(Error::OracleGuard(format!(
                "{} propositions exceeds the brute-force limit of {MAX_BRUTE_FORCE_PROPS}",
                problem.propositions.len()
            )));
        }
        if max_depth > MAX_BRUTE_FORCE_DEPTH {
            return Err(Error::OracleGuard(format!(
                "depth {max_depth} exceeds the brute-force limit of {MAX_BRUTE_FORCE_DEPTH}"
            )));
        }
        let upstream = problem
            .humans
            .iter()
            .map(|h| {
                let mut up: BTreeMap<VarId, BTreeSet<VarId>> = BTreeMap::new();
                for (from, to) in h.model.graph().edges() {
                    up.entry(to.clone()).or_default().insert(from.clone());
                }
                up
            })
            .collect();
        Ok(Oracle {
            problem,
            probs: HashMap::new(),
            upstream,
        })
    }

    fn probability(&mut self, agent: usize, spec: &CapabilitySpec) -> Result<f64> {
        if let Some(&p) = self.probs.get(&(agent, spec.clone())) {
            return Ok(p);
        }
        let p = joint_enumeration_query(&self.problem.humans[agent].model, spec)?;
        self.probs.insert((agent, spec.clone()), p);
        Ok(p)
    }

    /// Variables with a directed path into `targets`, minus the targets.
    fn disturbed(&self, agent: usize, targets: &BTreeSet<VarId>) -> BTreeSet<VarId> {
        let up = &self.upstream[agent];
        let mut seen = BTreeSet::new();
        let mut stack: Vec<&VarId> = targets.iter().collect();
        while let Some(v) = stack.pop() {
            for p in up.get(v).into_iter().flatten() {
                if seen.insert(p.clone()) {
                    stack.push(p);
                }
            }
        }
        seen.retain(|v| !targets.contains(v));
        seen
    }

    fn robot_successors(&self, s: &PlanningState) -> Vec<PlanningState> {
        let mut out = Vec::new();
        for r in &self.problem.robots {
            for a in &r.actions {
                if !a.pre.iter().all(|v| s.t().contains(v)) {
                    continue;
                }
                let t: BTreeSet<VarId> = s
                    .t()
                    .union(&a.add)
                    .filter(|v| !a.del.contains(*v))
                    .cloned()
                    .collect();
                let n: BTreeSet<VarId> = s
                    .n()
                    .union(&a.del)
                    .filter(|v| !a.add.contains(*v))
                    .cloned()
                    .collect();
                let u: BTreeSet<VarId> = s
                    .u()
                    .iter()
                    .filter(|v| !a.add.contains(*v) && !a.del.contains(*v))
                    .cloned()
                    .collect();
                out.push(PlanningState::from_sets(t, n, u).expect("partition preserved"));
            }
        }
        out
    }

    /// Applicable human operations with their success probability and the
    /// success and failure states.
    fn human_outcomes(
        &mut self,
        s: &PlanningState,
    ) -> Result<Vec<(f64, PlanningState, PlanningState)>> {
        let mut out = Vec::new();
        for hi in 0..self.problem.humans.len() {
            for op in &self.problem.humans[hi].operations {
                let spec = &op.spec;
                if !spec.c.iter().all(|v| s.t().contains(v))
                    || !spec.d.iter().all(|v| s.n().contains(v))
                {
                    continue;
                }
                let p = self.probability(hi, spec)?;
                let (a, b) = (&spec.a, &spec.b);
                let effects: BTreeSet<VarId> = a.union(b).cloned().collect();
                let ac = self.disturbed(hi, &effects);

                let t: BTreeSet<VarId> = s
                    .t()
                    .union(a)
                    .filter(|v| !b.contains(*v) && !ac.contains(*v))
                    .cloned()
                    .collect();
                let n: BTreeSet<VarId> = s
                    .n()
                    .union(b)
                    .filter(|v| !a.contains(*v) && !ac.contains(*v))
                    .cloned()
                    .collect();
                let u: BTreeSet<VarId> = s
                    .u()
                    .union(&ac)
                    .filter(|v| !a.contains(*v) && !b.contains(*v))
                    .cloned()
                    .collect();
                let success = PlanningState::from_sets(t, n, u).expect("partition preserved");

                let t: BTreeSet<VarId> = s
                    .t()
                    .iter()
                    .filter(|v| !effects.contains(*v) && !ac.contains(*v))
                    .cloned()
                    .collect();
                let n: BTreeSet<VarId> = s
                    .n()
                    .iter()
                    .filter(|v| !effects.contains(*v) && !ac.contains(*v))
                    .cloned()
                    .collect();
                let u: BTreeSet<VarId> = s.u().iter().chain(&effects).chain(&ac).cloned().collect();
                let failure = PlanningState::from_sets(t, n, u).expect("partition preserved");
                out.push((p, success, failure));
            }
        }
        Ok(out)
    }
}

/// Highest success probability of any linear plan with at most
/// `max_depth` steps, by exhaustive search. Zero when none reaches the goal.
pub fn brute_force_optimal_plan(problem: &MapMmProblem, max_depth: u32) -> Result<f64> {
    let mut oracle = Oracle::new(problem, max_depth)?;
    let mut memo = HashMap::new();
    linear_value(&mut oracle, &problem.initial_state()?, max_depth, &mut memo)
}

fn linear_value(
    o: &mut Oracle<'_>,
    s: &PlanningState,
    left: u32,
    memo: &mut HashMap<(PlanningState, u32), f64>,
) -> Result<f64> {
    if o.problem.goal.iter().all(|g| s.t().contains(g)) {
        return Ok(1.0);
    }
    if left == 0 {
        return Ok(0.0);
    }
    if let Some(&v) = memo.get(&(s.clone(), left)) {
        return Ok(v);
    }
    let mut best: f64 = 0.0;
    for next in o.robot_successors(s) {
        best = best.max(linear_value(o, &next, left - 1, memo)?);
    }
    for (p, success, _) in o.human_outcomes(s)? {
        if p > 0.0 {
            best = best.max(p * linear_value(o, &success, left - 1, memo)?);
        }
    }
    memo.insert((s.clone(), left), best);
    Ok(best)
}

/// Highest goal mass of any conditional plan that uses at most `budget`
/// requests on each execution path and whose branches are at most
/// `max_depth` steps long.
pub fn brute_force_conditional(problem: &MapMmProblem, budget: u32, max_depth: u32) -> Result<f64> {
    let mut oracle = Oracle::new(problem, max_depth)?;
    let mut memo = HashMap::new();
    cond_value(
        &mut oracle,
        &problem.initial_state()?,
        budget,
        max_depth,
        &mut memo,
    )
}

fn cond_value(
    o: &mut Oracle<'_>,
    s: &PlanningState,
    budget_left: u32,
    left: u32,
    memo: &mut HashMap<(PlanningState, u32, u32), f64>,
) -> Result<f64> {
    if o.problem.goal.iter().all(|g| s.t().contains(g)) {
        return Ok(1.0);
    }
    if left == 0 {
        return Ok(0.0);
    }
    let key = (s.clone(), budget_left, left);
    if let Some(&v) = memo.get(&key) {
        return Ok(v);
    }
    let mut best: f64 = 0.0;
    for next in o.robot_successors(s) {
        best = best.max(cond_value(o, &next, budget_left, left - 1, memo)?);
    }
    if budget_left > 0 {
        for (p, success, failure) in o.human_outcomes(s)? {
            let on_success = if p > 0.0 {
                cond_value(o, &success, budget_left - 1, left - 1, memo)?
            } else {
                0.0
            };
            let on_failure = if p < 1.0 {
                cond_value(o, &failure, budget_left - 1, left - 1, memo)?
            } else {
                0.0
            };
            best = best.max(p * on_success + (1.0 - p) * on_failure);
        }
    }
    memo.insert(key, best);
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{build_model, var, BetaParam};

    #[test]
    fn enumeration_matches_hand_values() {
        let m = build_model(
            "AG",
            &[var("x"), var("y")],
            &[(var("x"), var("y"))],
            BetaParam::uniform(),
        )
        .unwrap();
        let (agent, graph, mut cpts) = m.into_parts();
        cpts.get_mut(&NodeId::Eventual(var("y"))).unwrap().rows = vec![
            BetaParam { a: 1.0, b: 3.0 },
            BetaParam { a: 1.0, b: 1.0 },
            BetaParam { a: 3.0, b: 1.0 },
            BetaParam { a: 9.0, b: 1.0 },
        ];
        let m = CapabilityModel::from_parts(agent, graph, cpts);
        // parents of e:y are (x, y): P(y)=1/2 marginalises rows 2 and 3
        let p = joint_enumeration_query(&m, &CapabilitySpec::new([var("x")], [], [var("y")], []))
            .unwrap();
        assert!((p - 0.825).abs() < 1e-12);
        let p = joint_enumeration_query(&m, &CapabilitySpec::new([], [var("x")], [var("y")], []))
            .unwrap();
        assert!((p - 0.375).abs() < 1e-12);
    }

    #[test]
    fn guards_reject_large_inputs() {
        let vars: Vec<VarId> = (0..11).map(|i| var(&format!("v{i}"))).collect();
        let m = build_model("AG", &vars, &[], BetaParam::uniform()).unwrap();
        assert!(matches!(
            joint_enumeration_query(&m, &CapabilitySpec::default()),
            Err(Error::OracleGuard(_))
        ));
    }
}
