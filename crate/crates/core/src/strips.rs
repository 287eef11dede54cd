//! Planning states and deterministic robot actions.

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::VarId;

/// Partition of the propositions into known-true `T`, known-false `N` and
/// unknown `U`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct PlanningState {
    t: BTreeSet<VarId>,
    n: BTreeSet<VarId>,
    u: BTreeSet<VarId>,
}

impl PlanningState {
    /// Initial state of a problem: `init_true` is true, `init_unknown` is
    /// unknown, everything else in `universe` is false.
    pub fn initial(
        universe: &BTreeSet<VarId>,
        init_true: &BTreeSet<VarId>,
        init_unknown: &BTreeSet<VarId>,
    ) -> Result<Self> {
        if let Some(v) = init_true.intersection(init_unknown).next() {
            return Err(Error::InvalidProblem(format!(
                "`{v}` is both initially true and unknown"
            )));
        }
        let n = universe
            .iter()
            .filter(|v| !init_true.contains(*v) && !init_unknown.contains(*v))
            .cloned()
            .collect();
        PlanningState::from_sets(init_true.clone(), n, init_unknown.clone())
    }

    /// Errors unless the three sets are pairwise disjoint.
    pub fn from_sets(t: BTreeSet<VarId>, n: BTreeSet<VarId>, u: BTreeSet<VarId>) -> Result<Self> {
        let s = PlanningState { t, n, u };
        if s.is_partition() {
            Ok(s)
        } else {
            Err(Error::InvalidProblem(
                "state sets T, N and U overlap".to_string(),
            ))
        }
    }

    pub fn t(&self) -> &BTreeSet<VarId> {
        &self.t
    }

    pub fn n(&self) -> &BTreeSet<VarId> {
        &self.n
    }

    pub fn u(&self) -> &BTreeSet<VarId> {
        &self.u
    }

    pub fn universe(&self) -> BTreeSet<VarId> {
        self.t
            .iter()
            .chain(&self.n)
            .chain(&self.u)
            .cloned()
            .collect()
    }

    pub fn contains(&self, v: &VarId) -> bool {
        self.t.contains(v) || self.n.contains(v) || self.u.contains(v)
    }

    pub fn is_partition(&self) -> bool {
        self.t.is_disjoint(&self.n) && self.t.is_disjoint(&self.u) && self.n.is_disjoint(&self.u)
    }

    pub fn satisfies(&self, goal: &BTreeSet<VarId>) -> bool {
        goal.is_subset(&self.t)
    }

    /// Moves `v` into the set named by `value` (`None` for unknown).
    pub(crate) fn set(&mut self, v: &VarId, value: Option<bool>) {
        self.t.remove(v);
        self.n.remove(v);
        self.u.remove(v);
        match value {
            Some(true) => self.t.insert(v.clone()),
            Some(false) => self.n.insert(v.clone()),
            None => self.u.insert(v.clone()),
        };
    }
}

impl fmt::Display for PlanningState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let list =
            |s: &BTreeSet<VarId>| s.iter().map(|v| v.as_str()).collect::<Vec<_>>().join(", ");
        write!(
            f,
            "T={{{}}} N={{{}}} U={{{}}}",
            list(&self.t),
            list(&self.n),
            list(&self.u)
        )
    }
}

/// Grounded STRIPS action with positive preconditions only.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StripsAction {
    pub id: String,
    #[serde(default)]
    pub pre: BTreeSet<VarId>,
    #[serde(default)]
    pub add: BTreeSet<VarId>,
    #[serde(default)]
    pub del: BTreeSet<VarId>,
}

impl StripsAction {
    pub fn new(
        id: &str,
        pre: impl IntoIterator<Item = VarId>,
        add: impl IntoIterator<Item = VarId>,
        del: impl IntoIterator<Item = VarId>,
    ) -> Result<Self> {
        let a = StripsAction {
            id: id.to_string(),
            pre: pre.into_iter().collect(),
            add: add.into_iter().collect(),
            del: del.into_iter().collect(),
        };
        a.check()?;
        Ok(a)
    }

    pub fn check(&self) -> Result<()> {
        if let Some(v) = self.add.intersection(&self.del).next() {
            return Err(Error::InvalidProblem(format!(
                "action `{}` both adds and deletes `{v}`",
                self.id
            )));
        }
        Ok(())
    }

    pub fn vars(&self) -> impl Iterator<Item = &VarId> {
        self.pre.iter().chain(&self.add).chain(&self.del)
    }

    fn check_vars(&self, s: &PlanningState) -> Result<()> {
        match self.vars().find(|v| !s.contains(v)) {
            Some(v) => Err(Error::UnknownVar(v.clone())),
            None => Ok(()),
        }
    }
}

/// True iff every precondition is known true. Unknown is not true.
pub fn applicable(action: &StripsAction, s: &PlanningState) -> Result<bool> {
    action.check_vars(s)?;
    Ok(action.pre.is_subset(&s.t))
}

/// `T' = T ∪ Add \ Del`, `N' = N ∪ Del \ Add`, `U' = U \ Add \ Del`.
pub fn apply_robot_action(action: &StripsAction, s: &PlanningState) -> Result<PlanningState> {
    if !applicable(action, s)? {
        return Err(Error::NotApplicable(action.id.clone()));
    }
    Ok(apply_unchecked(action, s))
}

pub(crate) fn apply_unchecked(action: &StripsAction, s: &PlanningState) -> PlanningState {
    let mut next = s.clone();
    for v in &action.add {
        next.set(v, Some(true));
    }
    for v in &action.del {
        next.set(v, Some(false));
    }
    next
}
