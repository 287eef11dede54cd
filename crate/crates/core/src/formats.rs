//! JSON documents for models, problems and plans, and JSON-Lines traces.
//!
//! Output is canonical: keys are sorted and numbers use serde_json's
//! shortest round-trip rendering, so equal values give equal bytes.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::learning::{StateObservation, Trace};
use crate::mapmm::{HumanAgent, MapMmProblem, Operation, Plan, Robot, Step};
use crate::mapmmi::{CondNode, ConditionalPlan};
use crate::model::{BetaParam, CapabilityModel, CapabilitySpec, CausalGraph, Cpt, NodeId, VarId};
use crate::strips::StripsAction;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelDoc {
    pub agent: String,
    pub variables: Vec<VarId>,
    pub edges: Vec<(VarId, VarId)>,
    pub cpts: BTreeMap<NodeId, CptDoc>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CptDoc {
    pub parents: Vec<NodeId>,
    pub rows: Vec<RowDoc>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RowDoc {
    /// Parent values as a big-endian bit string, e.g. `"01"`.
    pub config: String,
    pub a: f64,
    pub b: f64,
}

fn parse_doc<T: DeserializeOwned>(text: &str, source: &str) -> Result<T> {
    let de = &mut serde_json::Deserializer::from_str(text);
    serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        let path = if path == "." {
            source.to_string()
        } else {
            format!("{source}: {path}")
        };
        Error::format(path, e.into_inner().to_string())
    })
}

fn canonical<T: Serialize>(doc: &T) -> String {
    let value = serde_json::to_value(doc).expect("documents serialize");
    let mut out = serde_json::to_string_pretty(&value).expect("values serialize");
    out.push('\n');
    out
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

fn write(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

impl ModelDoc {
    pub fn from_model(model: &CapabilityModel) -> Self {
        ModelDoc {
            agent: model.agent().to_string(),
            variables: model.variables().iter().cloned().collect(),
            edges: model.graph().edges().iter().cloned().collect(),
            cpts: model
                .cpts()
                .iter()
                .map(|(node, cpt)| {
                    let rows = cpt
                        .rows
                        .iter()
                        .enumerate()
                        .map(|(i, r)| RowDoc {
                            config: cpt.config_string(i),
                            a: r.a,
                            b: r.b,
                        })
                        .collect();
                    (
                        node.clone(),
                        CptDoc {
                            parents: cpt.parents.clone(),
                            rows,
                        },
                    )
                })
                .collect(),
        }
    }

    /// Converts without checking model invariants; rows are placed by
    /// their `config` strings.
    pub fn to_model_unchecked(&self, source: &str) -> Result<CapabilityModel> {
        let mut variables = BTreeSet::new();
        for v in &self.variables {
            if !variables.insert(v.clone()) {
                return Err(Error::DuplicateVar(v.clone()));
            }
        }
        let edges: BTreeSet<(VarId, VarId)> = self.edges.iter().cloned().collect();
        let mut cpts = BTreeMap::new();
        for (node, doc) in &self.cpts {
            let n = doc.parents.len();
            let mut placed: BTreeMap<usize, BetaParam> = BTreeMap::new();
            for (i, row) in doc.rows.iter().enumerate() {
                let here = format!("{source}: cpts.{node}.rows[{i}]");
                if row.config.len() != n || !row.config.chars().all(|c| c == '0' || c == '1') {
                    return Err(Error::format(
                        here,
                        format!("config `{}` must be {n} binary digit(s)", row.config),
                    ));
                }
                let index = usize::from_str_radix(&row.config, 2).unwrap_or(0);
                if placed
                    .insert(index, BetaParam { a: row.a, b: row.b })
                    .is_some()
                {
                    return Err(Error::format(
                        here,
                        format!("duplicate config `{}`", row.config),
                    ));
                }
            }
            cpts.insert(
                node.clone(),
                Cpt {
                    parents: doc.parents.clone(),
                    rows: placed.into_values().collect(),
                },
            );
        }
        Ok(CapabilityModel::from_parts(
            self.agent.clone(),
            CausalGraph::from_parts(variables, edges),
            cpts,
        ))
    }

    pub fn to_model(&self, source: &str) -> Result<CapabilityModel> {
        let model = self.to_model_unchecked(source)?;
        model.ensure_valid()?;
        Ok(model)
    }
}

/// Parses a model document without enforcing model invariants.
pub fn parse_model_unchecked(text: &str, source: &str) -> Result<CapabilityModel> {
    parse_doc::<ModelDoc>(text, source)?.to_model_unchecked(source)
}

pub fn parse_model(text: &str, source: &str) -> Result<CapabilityModel> {
    parse_doc::<ModelDoc>(text, source)?.to_model(source)
}

pub fn model_to_string(model: &CapabilityModel) -> String {
    canonical(&ModelDoc::from_model(model))
}

pub fn load_model(path: &Path) -> Result<CapabilityModel> {
    parse_model(&read(path)?, &path.display().to_string())
}

pub fn save_model(model: &CapabilityModel, path: &Path) -> Result<()> {
    write(path, &model_to_string(model))
}

/// Parses a `{"A":[..],"B":[..],"C":[..],"D":[..]}` capability spec.
pub fn parse_spec(text: &str, source: &str) -> Result<CapabilitySpec> {
    let spec: CapabilitySpec = parse_doc(text, source)?;
    spec.check_disjoint()
        .map_err(|e| Error::format(source.to_string(), e.to_string()))?;
    Ok(spec)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemDoc {
    pub propositions: Vec<VarId>,
    #[serde(default)]
    pub robots: Vec<RobotDoc>,
    #[serde(default)]
    pub humans: Vec<HumanDoc>,
    #[serde(default)]
    pub init_true: Vec<VarId>,
    #[serde(default)]
    pub init_unknown: Vec<VarId>,
    pub goal: Vec<VarId>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub communication_threshold: Option<u32>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RobotDoc {
    pub id: String,
    #[serde(default)]
    pub actions: Vec<StripsAction>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HumanDoc {
    pub id: String,
    pub model: ModelRef,
    #[serde(default)]
    pub operations: Vec<OperationDoc>,
}

/// A model given by path (relative to the problem document) or inline.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ModelRef {
    Path(String),
    Inline(Box<ModelDoc>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OperationDoc {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    #[serde(rename = "A", default)]
    pub a: BTreeSet<VarId>,
    #[serde(rename = "B", default)]
    pub b: BTreeSet<VarId>,
    #[serde(rename = "C", default)]
    pub c: BTreeSet<VarId>,
    #[serde(rename = "D", default)]
    pub d: BTreeSet<VarId>,
}

impl OperationDoc {
    fn spec(&self) -> CapabilitySpec {
        CapabilitySpec {
            a: self.a.clone(),
            b: self.b.clone(),
            c: self.c.clone(),
            d: self.d.clone(),
        }
    }
}

impl ProblemDoc {
    /// Resolves model references against `base_dir` and validates every
    /// cross-reference.
    pub fn to_problem(&self, base_dir: &Path, source: &str) -> Result<MapMmProblem> {
        let props: BTreeSet<VarId> = self.propositions.iter().cloned().collect();
        let check = |field: String, vars: Vec<&VarId>| -> Result<()> {
            match vars.into_iter().find(|v| !props.contains(*v)) {
                Some(v) => Err(Error::format(
                    format!("{source}: {field}"),
                    format!("unknown proposition `{v}`"),
                )),
                None => Ok(()),
            }
        };
        check("init_true".into(), self.init_true.iter().collect())?;
        check("init_unknown".into(), self.init_unknown.iter().collect())?;
        check("goal".into(), self.goal.iter().collect())?;

        let mut robots = Vec::new();
        for (ri, r) in self.robots.iter().enumerate() {
            for (ai, a) in r.actions.iter().enumerate() {
                check(format!("robots[{ri}].actions[{ai}]"), a.vars().collect())?;
                a.check().map_err(|e| {
                    Error::format(
                        format!("{source}: robots[{ri}].actions[{ai}]"),
                        e.to_string(),
                    )
                })?;
            }
            robots.push(Robot {
                id: r.id.clone(),
                actions: r.actions.clone(),
            });
        }

        let mut humans = Vec::new();
        for (hi, h) in self.humans.iter().enumerate() {
            let model = match &h.model {
                ModelRef::Path(p) => {
                    let path = base_dir.join(p);
                    load_model(&path)?
                }
                ModelRef::Inline(doc) => doc.to_model(&format!("{source}: humans[{hi}].model"))?,
            };
            check(
                format!("humans[{hi}].model.variables"),
                model.variables().iter().collect(),
            )?;
            let mut operations = Vec::new();
            for (oi, op) in h.operations.iter().enumerate() {
                let spec = op.spec();
                spec.check(&model).map_err(|e| {
                    Error::format(
                        format!("{source}: humans[{hi}].operations[{oi}]"),
                        e.to_string(),
                    )
                })?;
                operations.push(Operation {
                    name: op.name.clone(),
                    spec,
                });
            }
            humans.push(HumanAgent {
                id: h.id.clone(),
                model,
                operations,
            });
        }

        let problem = MapMmProblem {
            propositions: props.clone(),
            robots,
            humans,
            init_true: self.init_true.iter().cloned().collect(),
            init_unknown: self.init_unknown.iter().cloned().collect(),
            goal: self.goal.iter().cloned().collect(),
            communication_threshold: self.communication_threshold,
        };
        problem
            .validate()
            .map_err(|e| Error::format(source.to_string(), e.to_string()))?;
        Ok(problem)
    }
}

pub fn parse_problem_doc(text: &str, source: &str) -> Result<ProblemDoc> {
    parse_doc(text, source)
}

pub fn problem_doc_to_string(doc: &ProblemDoc) -> String {
    canonical(doc)
}

pub fn load_problem_doc(path: &Path) -> Result<ProblemDoc> {
    parse_problem_doc(&read(path)?, &path.display().to_string())
}

pub fn load_problem(path: &Path) -> Result<MapMmProblem> {
    let doc = load_problem_doc(path)?;
    let base: PathBuf = path.parent().map(Path::to_path_buf).unwrap_or_default();
    doc.to_problem(&base, &path.display().to_string())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ObservationDoc {
    #[serde(rename = "true", default)]
    true_vars: BTreeSet<VarId>,
    #[serde(rename = "false", default)]
    false_vars: BTreeSet<VarId>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TraceDoc {
    observations: Vec<ObservationDoc>,
}

/// A trace line that failed to parse.
#[derive(Debug)]
pub struct BadLine {
    pub line: usize,
    pub error: Error,
}

fn parse_trace_line(text: &str, line: usize) -> Result<Trace> {
    let as_line_error = |e: Error| Error::TraceLine {
        line,
        message: e.to_string(),
    };
    let doc: TraceDoc = parse_doc(text, "trace").map_err(as_line_error)?;
    let observations = doc
        .observations
        .into_iter()
        .map(|o| StateObservation::new(o.true_vars, o.false_vars))
        .collect::<Result<Vec<_>>>()
        .map_err(as_line_error)?;
    Trace::new(observations).map_err(as_line_error)
}

/// Parses one trace per non-blank line. Strict mode stops at the first bad
/// line; lenient mode collects bad lines and keeps the rest.
pub fn parse_traces(text: &str, lenient: bool) -> Result<(Vec<Trace>, Vec<BadLine>)> {
    let mut traces = Vec::new();
    let mut bad = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        if raw.trim().is_empty() {
            continue;
        }
        match parse_trace_line(raw, i + 1) {
            Ok(t) => traces.push(t),
            Err(e) if lenient => bad.push(BadLine {
                line: i + 1,
                error: e,
            }),
            Err(e) => return Err(e),
        }
    }
    Ok((traces, bad))
}

pub fn load_traces(path: &Path, lenient: bool) -> Result<(Vec<Trace>, Vec<BadLine>)> {
    parse_traces(&read(path)?, lenient)
}

pub fn trace_to_line(trace: &Trace) -> String {
    let doc = TraceDoc {
        observations: trace
            .observations()
            .iter()
            .map(|o| ObservationDoc {
                true_vars: o.true_vars().clone(),
                false_vars: o.false_vars().clone(),
            })
            .collect(),
    };
    serde_json::to_value(&doc)
        .expect("documents serialize")
        .to_string()
}

pub fn traces_to_string(traces: &[Trace]) -> String {
    traces.iter().map(|t| trace_to_line(t) + "\n").collect()
}

pub fn save_traces(traces: &[Trace], path: &Path) -> Result<()> {
    write(path, &traces_to_string(traces))
}

fn spec_value(spec: &CapabilitySpec) -> Value {
    serde_json::to_value(spec).expect("specs serialize")
}

pub fn plan_to_value(plan: &Plan) -> Value {
    let steps: Vec<Value> = plan
        .steps
        .iter()
        .map(|s| match s {
            Step::Robot { robot, action } => json!({
                "kind": "robot",
                "agent": robot,
                "action": action,
            }),
            Step::Human {
                agent,
                operation,
                spec,
                probability,
            } => {
                let mut v = json!({
                    "kind": "human",
                    "agent": agent,
                    "spec": spec_value(spec),
                    "probability": probability,
                });
                if let Some(name) = operation {
                    v["operation"] = json!(name);
                }
                v
            }
        })
        .collect();
    json!({
        "steps": steps,
        "success_probability": plan.success_probability,
    })
}

pub fn plan_to_string(plan: &Plan) -> String {
    canonical(&plan_to_value(plan))
}

fn cond_node_value(node: &CondNode) -> Value {
    match node {
        CondNode::Robot {
            robot,
            action,
            child,
        } => json!({
            "kind": "robot",
            "agent": robot,
            "action": action,
            "next": cond_node_value(child),
        }),
        CondNode::Request {
            agent,
            operation,
            spec,
            probability,
            success,
            failure,
        } => {
            let mut v = json!({
                "kind": "request",
                "agent": agent,
                "spec": spec_value(spec),
                "probability": probability,
                "on_success": cond_node_value(success),
                "on_failure": cond_node_value(failure),
            });
            if let Some(name) = operation {
                v["operation"] = json!(name);
            }
            v
        }
        CondNode::Goal => json!({ "kind": "goal" }),
        CondNode::Abandoned { depth_capped } => json!({
            "kind": "abandon",
            "depth_capped": depth_capped,
        }),
    }
}

pub fn conditional_plan_to_value(plan: &ConditionalPlan) -> Value {
    json!({
        "root": cond_node_value(&plan.root),
        "success_probability": plan.success_probability,
        "depth_exceeded": plan.depth_exceeded,
    })
}

pub fn conditional_plan_to_string(plan: &ConditionalPlan) -> String {
    canonical(&conditional_plan_to_value(plan))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{build_model, var};

    fn small_model() -> CapabilityModel {
        let m = build_model(
            "AG",
            &[var("x"), var("y")],
            &[(var("x"), var("y"))],
            BetaParam::uniform(),
        )
        .unwrap();
        let (agent, graph, mut cpts) = m.into_parts();
        cpts.get_mut(&NodeId::Eventual(var("y"))).unwrap().rows[2] = BetaParam {
            a: 0.1 + 0.2,
            b: 7.25,
        };
        CapabilityModel::from_parts(agent, graph, cpts)
    }

    #[test]
    fn model_round_trip_is_exact() {
        let m = small_model();
        let text = model_to_string(&m);
        let back = parse_model(&text, "m.json").unwrap();
        assert_eq!(back, m);
        assert_eq!(model_to_string(&back), text);
        assert!(text.contains("\"e:y\""));
    }

    #[test]
    fn unknown_field_is_path_qualified() {
        let text =
            model_to_string(&small_model()).replacen("\"agent\"", "\"extra\": 1, \"agent\"", 1);
        let err = parse_model(&text, "m.json").unwrap_err().to_string();
        assert!(err.contains("extra"), "{err}");

        let mut v: Value = serde_json::from_str(&model_to_string(&small_model())).unwrap();
        v["cpts"]["x"]["rows"][0]["bogus"] = json!(true);
        let err = parse_model(&v.to_string(), "m.json")
            .unwrap_err()
            .to_string();
        assert!(err.contains("cpts.x.rows[0]"), "{err}");
    }

    #[test]
    fn row_count_and_negative_counts_are_rejected() {
        let mut v: Value = serde_json::from_str(&model_to_string(&small_model())).unwrap();
        v["cpts"]["e:y"]["rows"].as_array_mut().unwrap().pop();
        let err = parse_model(&v.to_string(), "m.json")
            .unwrap_err()
            .to_string();
        assert!(err.contains("e:y") && err.contains('4'), "{err}");

        let mut v: Value = serde_json::from_str(&model_to_string(&small_model())).unwrap();
        v["cpts"]["x"]["rows"][0]["a"] = json!(-1.0);
        let err = parse_model(&v.to_string(), "m.json")
            .unwrap_err()
            .to_string();
        assert!(err.contains("pseudo-count must be positive"), "{err}");
    }

    #[test]
    fn trace_lines() {
        let (t, _) = parse_traces(
            r#"{"observations":[{"true":["x"]},{"false":["x"],"true":["y"]}]}"#,
            false,
        )
        .unwrap();
        assert_eq!(t.len(), 1);
        assert_eq!(t[0].observations().len(), 2);
        assert_eq!(traces_to_string(&t), "{\"observations\":[{\"false\":[],\"true\":[\"x\"]},{\"false\":[\"x\"],\"true\":[\"y\"]}]}\n");

        let text = "{\"observations\":[]}\n{\"observations\":[{},{}]}\n";
        let err = parse_traces(text, false).unwrap_err();
        assert!(matches!(err, Error::TraceLine { line: 1, .. }), "{err}");
        let (ok, bad) = parse_traces(text, true).unwrap();
        assert_eq!(ok.len(), 1);
        assert_eq!(bad.len(), 1);
        assert_eq!(bad[0].line, 1);
    }

    #[test]
    fn problem_checks_ids() {
        let model = ModelDoc::from_model(&small_model());
        let doc = ProblemDoc {
            propositions: vec![var("x"), var("y")],
            robots: vec![],
            humans: vec![HumanDoc {
                id: "AG".into(),
                model: ModelRef::Inline(Box::new(model)),
                operations: vec![OperationDoc {
                    name: None,
                    a: [var("y")].into(),
                    b: [var("y")].into(),
                    c: BTreeSet::new(),
                    d: BTreeSet::new(),
                }],
            }],
            init_true: vec![],
            init_unknown: vec![],
            goal: vec![var("z")],
            communication_threshold: None,
        };
        let err = parse_problem_doc("{\"propositions\":[\"x\"],\"goal\":[\"zz\"]}", "p.json")
            .unwrap()
            .to_problem(Path::new("."), "p.json")
            .unwrap_err()
            .to_string();
        assert!(err.contains("goal") && err.contains("zz"), "{err}");

        let err = doc
            .to_problem(Path::new("."), "p.json")
            .unwrap_err()
            .to_string();
        assert!(err.contains("goal"), "{err}");
        let mut fixed = doc.clone();
        fixed.goal = vec![var("y")];
        let err = fixed
            .to_problem(Path::new("."), "p.json")
            .unwrap_err()
            .to_string();
        assert!(
            err.contains("operations[0]") && err.contains("disjoint"),
            "{err}"
        );

        let text = problem_doc_to_string(&fixed);
        assert_eq!(parse_problem_doc(&text, "p.json").unwrap(), fixed);
    }
}
