//! Capability models for human agents, learned online from execution traces
//! and queried by exact inference, plus planners that mix these models with
//! deterministic STRIPS robots.

pub mod error;
pub mod formats;
pub mod inference;
pub mod learning;
pub mod mapmm;
pub mod mapmmi;
pub mod model;
pub mod oracle;
pub mod strips;

pub use error::{Error, ErrorKind, Result};
pub use inference::{query_capability, QueryEngine};
pub use learning::{learn_from_traces, simulate_traces, StateObservation, Trace};
pub use mapmm::{astar_plan, HumanAgent, MapMmProblem, Operation, Plan, Robot, Step};
pub use mapmmi::{plan_conditional, ConditionalPlan};
pub use model::{build_model, BetaParam, CapabilityModel, CapabilitySpec, NodeId, VarId};
pub use strips::{PlanningState, StripsAction};
