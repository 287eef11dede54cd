//! Exact inference over capability models.
//!
//! A query `C ∧ ¬D → A ∧ ¬B` returns `P(Ȧ ∧ ¬Ḃ | C, ¬D)` with every CPT
//! entry collapsed to its posterior mean. This is taken as an approximation
//! of the probability that an operation meeting the capability exists.
//!
//! Every e-node is a leaf whose parents are fact nodes, so e-nodes outside
//! `A ∪ B` sum out to one and each queried e-node contributes a single
//! factor over its fact family. The remaining fact-level problem is solved
//! by variable elimination restricted to the ancestral set of the evidence
//! and the queried families.

use std::collections::{BTreeMap, BTreeSet};

use crate::error::{Error, Result};
use crate::model::{BetaParam, CapabilityModel, CapabilitySpec, NodeId, VarId};

pub fn posterior_mean(p: BetaParam) -> f64 {
    p.mean()
}

/// Posterior-mean success probability of every CPT row.
#[derive(Debug, Clone, PartialEq)]
pub struct PointEstimateTable {
    rows: BTreeMap<NodeId, Vec<f64>>,
}

impl PointEstimateTable {
    pub fn from_model(model: &CapabilityModel) -> Self {
        let rows = model
            .cpts()
            .iter()
            .map(|(node, cpt)| (node.clone(), cpt.rows.iter().map(|p| p.mean()).collect()))
            .collect();
        PointEstimateTable { rows }
    }

    pub fn get(&self, node: &NodeId, row: usize) -> Option<f64> {
        self.rows.get(node).and_then(|r| r.get(row)).copied()
    }

    pub fn node(&self, node: &NodeId) -> Option<&[f64]> {
        self.rows.get(node).map(Vec::as_slice)
    }
}

/// `P(Ȧ ∧ ¬Ḃ | C ∧ ¬D)` under point-estimate CPTs.
pub fn query_capability(model: &CapabilityModel, spec: &CapabilitySpec) -> Result<f64> {
    QueryEngine::new(model)?.query(spec)
}

/// Indexed view of a model for repeated queries.
#[derive(Debug, Clone)]
pub struct QueryEngine<'m> {
    model: &'m CapabilityModel,
    index: BTreeMap<&'m VarId, usize>,
    /// Per fact: sorted causal-parent indices, and mean per CPT row.
    facts: Vec<Family>,
    /// Per fact: the e-node family.
    eventual: Vec<Family>,
}

#[derive(Debug, Clone)]
struct Family {
    /// Parent fact indices in CPT order (big-endian row bits).
    parents: Vec<usize>,
    theta: Vec<f64>,
}

impl<'m> QueryEngine<'m> {
    pub fn new(model: &'m CapabilityModel) -> Result<Self> {
        let index: BTreeMap<&VarId, usize> = model
            .variables()
            .iter()
            .enumerate()
            .map(|(i, v)| (v, i))
            .collect();
        let family = |node: NodeId| -> Result<Family> {
            let cpt = model
                .cpt(&node)
                .ok_or_else(|| Error::InvalidModel(model.validate()))?;
            let mut parents = Vec::with_capacity(cpt.parents.len());
            for p in &cpt.parents {
                match p {
                    NodeId::Fact(v) if index.contains_key(v) => parents.push(index[v]),
                    _ => return Err(Error::InvalidModel(model.validate())),
                }
            }
            if cpt.rows.len() != cpt.expected_rows() {
                return Err(Error::InvalidModel(model.validate()));
            }
            Ok(Family {
                parents,
                theta: cpt.rows.iter().map(|p| p.mean()).collect(),
            })
        };
        let mut facts = Vec::with_capacity(index.len());
        let mut eventual = Vec::with_capacity(index.len());
        for v in model.variables() {
            facts.push(family(NodeId::Fact(v.clone()))?);
            eventual.push(family(NodeId::Eventual(v.clone()))?);
        }
        Ok(QueryEngine {
            model,
            index,
            facts,
            eventual,
        })
    }

    pub fn model(&self) -> &'m CapabilityModel {
        self.model
    }

    pub fn query(&self, spec: &CapabilitySpec) -> Result<f64> {
        spec.check(self.model)?;
        let idx = |v: &VarId| self.index[v];

        let mut evidence: BTreeMap<usize, bool> = BTreeMap::new();
        evidence.extend(spec.c.iter().map(|v| (idx(v), true)));
        evidence.extend(spec.d.iter().map(|v| (idx(v), false)));

        let targets: Vec<(usize, bool)> = spec
            .a
            .iter()
            .map(|v| (idx(v), true))
            .chain(spec.b.iter().map(|v| (idx(v), false)))
            .collect();

        let mut seeds: BTreeSet<usize> = evidence.keys().copied().collect();
        for &(t, _) in &targets {
            seeds.extend(self.eventual[t].parents.iter().copied());
        }
        let relevant = self.ancestral_closure(seeds);
        let free: BTreeSet<usize> = relevant
            .iter()
            .copied()
            .filter(|v| !evidence.contains_key(v))
            .collect();

        let fact_factors: Vec<Factor> = relevant
            .iter()
            .map(|&i| {
                let fam = &self.facts[i];
                let mut scope = fam.parents.clone();
                scope.push(i);
                Factor::build(&scope, &evidence, |val| {
                    let theta = fam.theta[row_of(&fam.parents, val)];
                    if val(i) {
                        theta
                    } else {
                        1.0 - theta
                    }
                })
            })
            .collect();

        let denominator = eliminate(fact_factors.clone(), &free);
        if denominator <= 0.0 {
            return Err(Error::ImpossibleEvidence);
        }

        let mut joint = fact_factors;
        for &(t, want) in &targets {
            let fam = &self.eventual[t];
            joint.push(Factor::build(&fam.parents, &evidence, |val| {
                let theta = fam.theta[row_of(&fam.parents, val)];
                if want {
                    theta
                } else {
                    1.0 - theta
                }
            }));
        }
        let numerator = eliminate(joint, &free);
        Ok((numerator / denominator).clamp(0.0, 1.0))
    }

    fn ancestral_closure(&self, seeds: BTreeSet<usize>) -> BTreeSet<usize> {
        let mut out = seeds.clone();
        let mut stack: Vec<usize> = seeds.into_iter().collect();
        while let Some(v) = stack.pop() {
            for &p in &self.facts[v].parents {
                if out.insert(p) {
                    stack.push(p);
                }
            }
        }
        out
    }
}

fn row_of(parents: &[usize], val: &dyn Fn(usize) -> bool) -> usize {
    parents
        .iter()
        .fold(0usize, |acc, &p| (acc << 1) | usize::from(val(p)))
}

/// Table over boolean variables. `vars` is ascending and bit `k` of a table
/// index is the value of `vars[k]`.
#[derive(Debug, Clone)]
struct Factor {
    vars: Vec<usize>,
    table: Vec<f64>,
}

impl Factor {
    /// Tabulates `f` over the non-evidence variables of `scope`, with
    /// evidence variables fixed to their observed values.
    fn build(
        scope: &[usize],
        evidence: &BTreeMap<usize, bool>,
        f: impl Fn(&dyn Fn(usize) -> bool) -> f64,
    ) -> Factor {
        let vars: Vec<usize> = scope
            .iter()
            .copied()
            .filter(|v| !evidence.contains_key(v))
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect();
        let table = (0..1usize << vars.len())
            .map(|bits| {
                let val = |v: usize| match evidence.get(&v) {
                    Some(&b) => b,
                    None => {
                        let k = vars.binary_search(&v).expect("variable in scope");
                        (bits >> k) & 1 == 1
                    }
                };
                f(&val)
            })
            .collect();
        Factor { vars, table }
    }

    fn product(&self, other: &Factor) -> Factor {
        let vars: Vec<usize> = self
            .vars
            .iter()
            .chain(&other.vars)
            .copied()
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect();
        let proj = |sub: &[usize]| -> Vec<usize> {
            sub.iter()
                .map(|v| vars.binary_search(v).expect("subset"))
                .collect()
        };
        let (pa, pb) = (proj(&self.vars), proj(&other.vars));
        let pick = |bits: usize, pos: &[usize]| -> usize {
            pos.iter()
                .enumerate()
                .fold(0, |acc, (k, &p)| acc | (((bits >> p) & 1) << k))
        };
        let table = (0..1usize << vars.len())
            .map(|bits| self.table[pick(bits, &pa)] * other.table[pick(bits, &pb)])
            .collect();
        Factor { vars, table }
    }

    fn sum_out(&self, v: usize) -> Factor {
        let k = self.vars.binary_search(&v).expect("variable in scope");
        let vars: Vec<usize> = self.vars.iter().copied().filter(|&x| x != v).collect();
        let low = (1usize << k) - 1;
        let table = (0..1usize << vars.len())
            .map(|bits| {
                let base = (bits & low) | ((bits & !low) << 1);
                self.table[base] + self.table[base | (1 << k)]
            })
            .collect();
        Factor { vars, table }
    }
}

/// Sums out `free` (min-degree order, ties to the lowest index) and
/// returns the product of what remains.
fn eliminate(mut factors: Vec<Factor>, free: &BTreeSet<usize>) -> f64 {
    let mut pending = free.clone();
    while !pending.is_empty() {
        let next = pending
            .iter()
            .copied()
            .min_by_key(|&v| {
                let mut nb = BTreeSet::new();
                for f in factors.iter().filter(|f| f.vars.contains(&v)) {
                    nb.extend(f.vars.iter().copied().filter(|&x| x != v));
                }
                (nb.len(), v)
            })
            .expect("pending is non-empty");
        pending.remove(&next);

        let (touching, rest): (Vec<Factor>, Vec<Factor>) =
            factors.into_iter().partition(|f| f.vars.contains(&next));
        factors = rest;
        if let Some(merged) = touching.into_iter().reduce(|a, b| a.product(&b)) {
            factors.push(merged.sum_out(next));
        }
    }
    factors
        .iter()
        .map(|f| {
            debug_assert!(f.vars.is_empty());
            f.table.iter().sum::<f64>()
        })
        .product()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{build_model, var, Cpt};

    fn single_pair(theta_row: BetaParam) -> CapabilityModel {
        let m = build_model("x", &[var("x")], &[], BetaParam::uniform()).unwrap();
        let (agent, graph, mut cpts) = m.into_parts();
        let cpt: &mut Cpt = cpts.get_mut(&NodeId::Eventual(var("x"))).unwrap();
        cpt.rows[1] = theta_row;
        CapabilityModel::from_parts(agent, graph, cpts)
    }

    #[test]
    fn posterior_means() {
        assert_eq!(posterior_mean(BetaParam::uniform()), 0.5);
        assert!((posterior_mean(BetaParam { a: 4.0, b: 2.0 }) - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(posterior_mean(BetaParam { a: 3.0, b: 1.0 }), 0.75);
    }

    #[test]
    fn empty_targets_give_one() {
        let m = single_pair(BetaParam { a: 3.0, b: 1.0 });
        let spec = CapabilitySpec::new([var("x")], [], [], []);
        assert_eq!(query_capability(&m, &spec).unwrap(), 1.0);
        assert_eq!(
            query_capability(&m, &CapabilitySpec::default()).unwrap(),
            1.0
        );
    }

    #[test]
    fn single_pair_lookup() {
        let m = single_pair(BetaParam { a: 3.0, b: 1.0 });
        let spec = CapabilitySpec::new([var("x")], [], [var("x")], []);
        assert_eq!(query_capability(&m, &spec).unwrap(), 0.75);
        let neg = CapabilitySpec::new([var("x")], [], [], [var("x")]);
        assert_eq!(query_capability(&m, &neg).unwrap(), 0.25);
    }

    #[test]
    fn unobserved_root_is_marginalised() {
        // P(x) = 0.5, θ(ẋ | x) = 0.75, θ(ẋ | ¬x) = 0.5 → 0.625
        let m = single_pair(BetaParam { a: 3.0, b: 1.0 });
        let spec = CapabilitySpec::new([], [], [var("x")], []);
        assert_eq!(query_capability(&m, &spec).unwrap(), 0.625);
    }

    #[test]
    fn invalid_specs_are_rejected() {
        let m = single_pair(BetaParam::uniform());
        let both = CapabilitySpec::new([], [], [var("x")], [var("x")]);
        assert!(matches!(
            query_capability(&m, &both),
            Err(Error::InvalidSpec(_))
        ));
        let unknown = CapabilitySpec::new([var("y")], [], [], []);
        assert!(matches!(
            query_capability(&m, &unknown),
            Err(Error::UnknownVar(_))
        ));
    }

    #[test]
    fn factor_sum_out_middle_variable() {
        let f = Factor {
            vars: vec![1, 4, 7],
            table: (0..8).map(|i| i as f64).collect(),
        };
        let g = f.sum_out(4);
        assert_eq!(g.vars, vec![1, 7]);
        // bits (v1, v7): 00 → t[0]+t[2], 01 → t[1]+t[3], 10 → t[4]+t[6], 11 → t[5]+t[7]
        assert_eq!(g.table, vec![2.0, 4.0, 10.0, 12.0]);
    }

    #[test]
    fn point_estimates_match_rows() {
        let m = single_pair(BetaParam { a: 3.0, b: 1.0 });
        let t = PointEstimateTable::from_model(&m);
        assert_eq!(t.get(&NodeId::Eventual(var("x")), 1), Some(0.75));
        assert_eq!(t.get(&NodeId::Fact(var("x")), 0), Some(0.5));
        assert_eq!(t.get(&NodeId::Fact(var("x")), 3), None);
    }
}
