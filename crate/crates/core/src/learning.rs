//! Online parameter learning from plan-execution traces.
//!
//! A trace is a sequence of possibly partial state observations. Each pair
//! of consecutive observations is one transition; unknown variables are
//! completed in every possible way with uniform weights summing to one, and
//! the weighted completions are added to the beta pseudo-counts.

use std::collections::{BTreeMap, BTreeSet};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::model::{CapabilityModel, NodeId, VarId};

pub const DEFAULT_MAX_UNKNOWN: usize = 8;

/// One partial snapshot of the world. Variables in neither set are unknown.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct StateObservation {
    true_vars: BTreeSet<VarId>,
    false_vars: BTreeSet<VarId>,
}

impl StateObservation {
    pub fn new(true_vars: BTreeSet<VarId>, false_vars: BTreeSet<VarId>) -> Result<Self> {
        if let Some(v) = true_vars.intersection(&false_vars).next() {
            return Err(Error::InvalidObservation(format!(
                "`{v}` is observed both true and false"
            )));
        }
        Ok(StateObservation {
            true_vars,
            false_vars,
        })
    }

    pub fn true_vars(&self) -> &BTreeSet<VarId> {
        &self.true_vars
    }

    pub fn false_vars(&self) -> &BTreeSet<VarId> {
        &self.false_vars
    }

    pub fn value(&self, v: &VarId) -> Option<bool> {
        if self.true_vars.contains(v) {
            Some(true)
        } else if self.false_vars.contains(v) {
            Some(false)
        } else {
            None
        }
    }

    fn check_vars(&self, model: &CapabilityModel) -> Result<()> {
        match self
            .true_vars
            .iter()
            .chain(&self.false_vars)
            .find(|v| !model.variables().contains(*v))
        {
            Some(v) => Err(Error::UnknownVar(v.clone())),
            None => Ok(()),
        }
    }
}

/// A sequence of at least two observations.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Trace {
    observations: Vec<StateObservation>,
}

impl Trace {
    pub fn new(observations: Vec<StateObservation>) -> Result<Self> {
        if observations.len() < 2 {
            return Err(Error::TraceTooShort(observations.len()));
        }
        Ok(Trace { observations })
    }

    pub fn observations(&self) -> &[StateObservation] {
        &self.observations
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TransitionPair {
    pub initial: StateObservation,
    pub final_state: StateObservation,
}

/// Consecutive observation pairs `{S1,Si}, …, {Sj,SK}`.
pub fn split_trace(observations: &[StateObservation]) -> Result<Vec<TransitionPair>> {
    if observations.len() < 2 {
        return Err(Error::TraceTooShort(observations.len()));
    }
    Ok(observations
        .windows(2)
        .map(|w| TransitionPair {
            initial: w[0].clone(),
            final_state: w[1].clone(),
        })
        .collect())
}

/// A complete assignment over a model's variables.
pub type Assignment = BTreeMap<VarId, bool>;

#[derive(Debug, Clone, PartialEq)]
pub struct WeightedTransition {
    pub initial: Assignment,
    pub final_state: Assignment,
    pub weight: f64,
}

/// All completions of `pair` over the model's variables, each weighted
/// `1 / 2^u` for `u` unknowns across both endpoints.
pub fn complete_transition(
    pair: &TransitionPair,
    model: &CapabilityModel,
    max_unknown: usize,
) -> Result<Vec<WeightedTransition>> {
    pair.initial.check_vars(model)?;
    pair.final_state.check_vars(model)?;

    // (is_final, var) for every unknown slot, initial state first.
    let unknown: Vec<(bool, &VarId)> = model
        .variables()
        .iter()
        .filter(|v| pair.initial.value(v).is_none())
        .map(|v| (false, v))
        .chain(
            model
                .variables()
                .iter()
                .filter(|v| pair.final_state.value(v).is_none())
                .map(|v| (true, v)),
        )
        .collect();
    let u = unknown.len();
    if u > max_unknown {
        return Err(Error::TooManyUnknowns {
            unknown: u,
            max: max_unknown,
        });
    }

    let known = |obs: &StateObservation| -> Assignment {
        model
            .variables()
            .iter()
            .filter_map(|v| obs.value(v).map(|b| (v.clone(), b)))
            .collect()
    };
    let (base_initial, base_final) = (known(&pair.initial), known(&pair.final_state));
    let weight = 0.5f64.powi(u as i32);

    Ok((0..1usize << u)
        .map(|bits| {
            let mut initial = base_initial.clone();
            let mut final_state = base_final.clone();
            for (k, &(is_final, v)) in unknown.iter().enumerate() {
                let value = (bits >> k) & 1 == 1;
                if is_final {
                    final_state.insert(v.clone(), value);
                } else {
                    initial.insert(v.clone(), value);
                }
            }
            WeightedTransition {
                initial,
                final_state,
                weight,
            }
        })
        .collect())
}

/// Beta update: every node gains `weight` on the true or false side of the
/// row selected by the transition's initial assignment. Fact nodes are
/// labelled by the initial value, e-nodes by the final value.
pub fn update(model: &CapabilityModel, data: &[WeightedTransition]) -> Result<CapabilityModel> {
    let mut out = model.clone();
    update_in_place(&mut out, data)?;
    Ok(out)
}

pub fn update_in_place(model: &mut CapabilityModel, data: &[WeightedTransition]) -> Result<()> {
    for t in data {
        if !(t.weight > 0.0 && t.weight <= 1.0) {
            return Err(Error::InvalidObservation(format!(
                "transition weight {} is outside (0, 1]",
                t.weight
            )));
        }
        for v in model.variables() {
            if !t.initial.contains_key(v) || !t.final_state.contains_key(v) {
                return Err(Error::InvalidObservation(format!(
                    "transition does not assign `{v}`"
                )));
            }
        }
    }
    for t in data {
        for (node, cpt) in model.cpts_mut().iter_mut() {
            let row = cpt.row_index(|p| t.initial[p.var()]);
            let outcome = match node {
                NodeId::Fact(v) => t.initial[v],
                NodeId::Eventual(v) => t.final_state[v],
            };
            let param = &mut cpt.rows[row];
            if outcome {
                param.a += t.weight;
            } else {
                param.b += t.weight;
            }
        }
    }
    Ok(())
}

/// A transition left out of learning because it had too many unknowns.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SkippedTransition {
    pub trace: usize,
    pub pair: usize,
    pub unknown: usize,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct LearnReport {
    pub transitions: usize,
    pub completions: usize,
    pub skipped: Vec<SkippedTransition>,
}

/// Splits, completes and applies every trace, in order.
pub fn learn_from_traces(
    model: &CapabilityModel,
    traces: &[Trace],
    max_unknown: usize,
) -> Result<(CapabilityModel, LearnReport)> {
    let mut out = model.clone();
    let mut report = LearnReport::default();
    for (ti, trace) in traces.iter().enumerate() {
        for obs in trace.observations() {
            obs.check_vars(model)
                .map_err(|e| Error::InvalidObservation(format!("trace {ti}: {e}")))?;
        }
        for (pi, pair) in split_trace(trace.observations())?.iter().enumerate() {
            match complete_transition(pair, model, max_unknown) {
                Ok(data) => {
                    report.transitions += 1;
                    report.completions += data.len();
                    update_in_place(&mut out, &data)?;
                }
                Err(Error::TooManyUnknowns { unknown, .. }) => {
                    log::warn!(
                        "trace {ti}, transition {pi}: {unknown} unknowns exceed {max_unknown}; skipped"
                    );
                    report.skipped.push(SkippedTransition {
                        trace: ti,
                        pair: pi,
                        unknown,
                    });
                }
                Err(e) => return Err(e),
            }
        }
    }
    Ok((out, report))
}

/// Samples `count` two-observation traces from `truth`.
///
/// Facts are drawn in topological order from the fact CPT means, then every
/// e-node from its row given the sampled facts. Each variable of each
/// observation is hidden independently with probability
/// `1 - observability`. Random draws happen in a fixed order, so the output
/// depends only on the inputs and `seed`.
pub fn simulate_traces(
    truth: &CapabilityModel,
    count: usize,
    seed: u64,
    observability: f64,
) -> Result<Vec<Trace>> {
    if !(0.0..=1.0).contains(&observability) {
        return Err(Error::InvalidObservation(format!(
            "observability {observability} is outside [0, 1]"
        )));
    }
    truth.ensure_valid()?;
    let order = truth.graph().topological_order()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut traces = Vec::with_capacity(count);

    for _ in 0..count {
        let mut initial = Assignment::new();
        for v in &order {
            let cpt = &truth.cpts()[&NodeId::Fact(v.clone())];
            let theta = cpt.rows[cpt.row_index(|p| initial[p.var()])].mean();
            let draw: f64 = rng.random();
            initial.insert(v.clone(), draw < theta);
        }
        let mut final_state = Assignment::new();
        for v in truth.variables() {
            let cpt = &truth.cpts()[&NodeId::Eventual(v.clone())];
            let theta = cpt.rows[cpt.row_index(|p| initial[p.var()])].mean();
            let draw: f64 = rng.random();
            final_state.insert(v.clone(), draw < theta);
        }
        let observations = [initial, final_state]
            .iter()
            .map(|state| {
                let mut obs = StateObservation::default();
                for (v, &value) in state {
                    let draw: f64 = rng.random();
                    if draw >= observability {
                        continue;
                    }
                    if value {
                        obs.true_vars.insert(v.clone());
                    } else {
                        obs.false_vars.insert(v.clone());
                    }
                }
                obs
            })
            .collect();
        traces.push(Trace { observations });
    }
    Ok(traces)
}
