//! Scenario documents: `{"model": {...}, "beliefs": {...}, "requests": [...]}`.
//!
//! Rationals are `"p/q"` strings (integers and decimals are accepted on
//! input). Every diagnostic names the JSON path of the offending value.
//! The document layout is described in `docs/scenario-schema.md`.

use std::collections::BTreeMap;

use serde_json::{json, Map, Value};

use crate::beliefs::{make_contamination, BeliefMap, BeliefPolytope, ContaminationSpec, Origin, StateSpace};
use crate::error::{Error, Result};
use crate::extraction::ExtractionInstance;
use crate::grid::TypeGrid;
use crate::lp::{Constraint, Relation};
use crate::models::{AuctionModel, GeneralModel, IndirectMechanism, QuasilinearModel, SensitivitySource};
use crate::scalar::{self, Rational};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ScenarioModel {
    Quasilinear(QuasilinearModel),
    Auction(AuctionModel),
    General(GeneralModel),
    Indirect(IndirectMechanism),
    /// Beliefs live inside the instance.
    Extraction(ExtractionInstance),
}

impl ScenarioModel {
    pub fn kind(&self) -> &'static str {
        match self {
            ScenarioModel::Quasilinear(_) => "quasilinear",
            ScenarioModel::Auction(_) => "auction",
            ScenarioModel::General(_) => "general",
            ScenarioModel::Indirect(_) => "indirect",
            ScenarioModel::Extraction(_) => "extraction",
        }
    }
}

/// One entry of `"requests"`: an operation name plus its raw parameters.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Request {
    pub op: String,
    pub params: Map<String, Value>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Scenario {
    pub name: Option<String>,
    pub model: ScenarioModel,
    /// One map for single-agent models, one per bidder for auctions, none
    /// for extraction instances.
    pub beliefs: Vec<BeliefMap>,
    pub requests: Vec<Request>,
}

impl Scenario {
    /// First request for `op`, if the document has one.
    pub fn request(&self, op: &str) -> Option<&Request> {
        self.requests.iter().find(|r| r.op == op)
    }
}

fn invalid(path: &str, message: impl Into<String>) -> Error {
    Error::validation(path, message)
}

fn field<'a>(obj: &'a Value, key: &str, path: &str) -> Result<&'a Value> {
    obj.get(key).ok_or_else(|| invalid(path, format!("missing field \"{key}\"")))
}

fn join(path: &str, key: &str) -> String {
    if path.is_empty() {
        key.to_string()
    } else {
        format!("{path}.{key}")
    }
}

fn array<'a>(v: &'a Value, path: &str) -> Result<&'a Vec<Value>> {
    v.as_array().ok_or_else(|| invalid(path, "expected an array"))
}

fn object<'a>(v: &'a Value, path: &str) -> Result<&'a Map<String, Value>> {
    v.as_object().ok_or_else(|| invalid(path, "expected an object"))
}

fn string(v: &Value, path: &str) -> Result<String> {
    v.as_str().map(str::to_string).ok_or_else(|| invalid(path, "expected a string"))
}

fn index(v: &Value, path: &str) -> Result<usize> {
    v.as_u64()
        .and_then(|x| usize::try_from(x).ok())
        .ok_or_else(|| invalid(path, "expected a non-negative integer"))
}

/// Parses `"p/q"` strings and plain integers.
pub fn rational(v: &Value, path: &str) -> Result<Rational> {
    match v {
        Value::String(s) => scalar::parse(s).map_err(|e| invalid(path, e.to_string())),
        Value::Number(n) if n.is_i64() => Ok(scalar::int(n.as_i64().expect("checked"))),
        _ => Err(invalid(path, "expected a rational written as \"p/q\"")),
    }
}

pub fn rational_vec(v: &Value, path: &str) -> Result<Vec<Rational>> {
    array(v, path)?
        .iter()
        .enumerate()
        .map(|(i, x)| rational(x, &format!("{path}[{i}]")))
        .collect()
}

fn table(v: &Value, path: &str) -> Result<Vec<Vec<Rational>>> {
    array(v, path)?
        .iter()
        .enumerate()
        .map(|(i, row)| rational_vec(row, &format!("{path}[{i}]")))
        .collect()
}

fn strings(v: &Value, path: &str) -> Result<Vec<String>> {
    array(v, path)?
        .iter()
        .enumerate()
        .map(|(i, x)| string(x, &format!("{path}[{i}]")))
        .collect()
}

/// Re-roots a constructor's validation path under `prefix`.
fn under(prefix: &str, e: Error) -> Error {
    match e {
        Error::Validation { path, message } => Error::Validation {
            path: join(prefix, &path),
            message,
        },
        Error::Input(message) => Error::Validation {
            path: prefix.to_string(),
            message,
        },
        other => other,
    }
}

fn grid(v: &Value, path: &str) -> Result<TypeGrid> {
    if let Some(n) = v.get("uniform") {
        let n = index(n, &join(path, "uniform"))?;
        return TypeGrid::uniform(n).map_err(|e| under(path, e));
    }
    TypeGrid::new(rational_vec(v, path)?).map_err(|e| invalid(path, strip(e)))
}

fn strip(e: Error) -> String {
    match e {
        Error::Validation { message, .. } => message,
        Error::Input(m) | Error::Capability(m) => m,
    }
}

fn states(v: &Value, path: &str) -> Result<StateSpace> {
    StateSpace::new(strings(v, path)?).map_err(|e| invalid(path, strip(e)))
}

/// Parses one belief set over `space`.
///
/// Accepted forms: `{"simplex": true}`, `{"point": [...]}`,
/// `{"points": [[...], ...]}` (convex hull), `{"constraints": [...]}` and
/// `{"contamination": {"reference": [...], "epsilon": "..."}}`. An optional
/// `"states"` list must match `space`.
pub fn parse_belief(v: &Value, space: &StateSpace, path: &str) -> Result<BeliefPolytope> {
    object(v, path)?;
    if let Some(s) = v.get("states") {
        let p = join(path, "states");
        if &states(s, &p)? != space {
            return Err(invalid(&p, "belief states differ from the model's state space"));
        }
    }
    let wrap = |e: Error| under(path, e);
    if v.get("simplex").and_then(Value::as_bool) == Some(true) {
        return Ok(BeliefPolytope::simplex(space.clone()));
    }
    if let Some(p) = v.get("point") {
        let point = rational_vec(p, &join(path, "point"))?;
        return BeliefPolytope::singleton(space.clone(), &point).map_err(wrap);
    }
    if let Some(p) = v.get("points") {
        let pts = table(p, &join(path, "points"))?;
        return BeliefPolytope::from_points(space.clone(), &pts).map_err(wrap);
    }
    if let Some(c) = v.get("contamination") {
        let cp = join(path, "contamination");
        let reference = rational_vec(field(c, "reference", &cp)?, &join(&cp, "reference"))?;
        let epsilon = rational(field(c, "epsilon", &cp)?, &join(&cp, "epsilon"))?;
        let spec = ContaminationSpec::new(reference, epsilon).map_err(|e| under(&cp, e))?;
        return make_contamination(space.clone(), &spec).map_err(|e| under(&cp, e));
    }
    if let Some(c) = v.get("constraints") {
        let cp = join(path, "constraints");
        let mut rows = Vec::new();
        for (i, row) in array(c, &cp)?.iter().enumerate() {
            let rp = format!("{cp}[{i}]");
            let rel_path = join(&rp, "rel");
            let rel = string(field(row, "rel", &rp)?, &rel_path)?;
            rows.push(Constraint {
                coeffs: rational_vec(field(row, "coeffs", &rp)?, &join(&rp, "coeffs"))?,
                relation: Relation::from_symbol(&rel)
                    .ok_or_else(|| invalid(&rel_path, "relation must be <=, = or >="))?,
                rhs: rational(field(row, "rhs", &rp)?, &join(&rp, "rhs"))?,
            });
        }
        let p = BeliefPolytope::new(space.clone(), rows).map_err(wrap)?;
        let hull = v.get("origin").and_then(Value::as_str) == Some("convex_hull");
        return Ok(if hull { p.with_origin(Origin::ConvexHull) } else { p });
    }
    Err(invalid(path, "belief needs one of simplex, point, points, constraints, contamination"))
}

fn belief_map(v: &Value, g: &TypeGrid, space: &StateSpace, path: &str) -> Result<BeliefMap> {
    if let Some(u) = v.get("uniform") {
        return Ok(BeliefMap::uniform(g.clone(), parse_belief(u, space, &join(path, "uniform"))?));
    }
    let pp = join(path, "per_type");
    let list = array(field(v, "per_type", path)?, &pp)?;
    let polys = list
        .iter()
        .enumerate()
        .map(|(i, b)| parse_belief(b, space, &format!("{pp}[{i}]")))
        .collect::<Result<Vec<_>>>()?;
    BeliefMap::new(g.clone(), polys).map_err(|e| invalid(&pp, strip(e)))
}

/// Outcome-keyed tables `{"label": n×m table}`.
fn outcome_tables(v: &Value, outcomes: &[String], path: &str) -> Result<Vec<Vec<Vec<Rational>>>> {
    let obj = object(v, path)?;
    if let Some(k) = obj.keys().find(|k| !outcomes.contains(k)) {
        return Err(invalid(&join(path, k), "not a declared outcome"));
    }
    outcomes
        .iter()
        .map(|o| {
            let p = join(path, o);
            table(obj.get(o).ok_or_else(|| invalid(&p, "missing table for outcome"))?, &p)
        })
        .collect()
}

fn label_index(labels: &[String], v: &Value, path: &str, what: &str) -> Result<usize> {
    let s = string(v, path)?;
    labels
        .iter()
        .position(|l| *l == s)
        .ok_or_else(|| invalid(path, format!("unknown {what} \"{s}\"")))
}

fn label_table(v: &Value, labels: &[String], path: &str, what: &str) -> Result<Vec<Vec<usize>>> {
    array(v, path)?
        .iter()
        .enumerate()
        .map(|(i, row)| {
            let rp = format!("{path}[{i}]");
            array(row, &rp)?
                .iter()
                .enumerate()
                .map(|(j, x)| label_index(labels, x, &format!("{rp}[{j}]"), what))
                .collect()
        })
        .collect()
}

/// Parses and validates a whole scenario document.
pub fn load_scenario(text: &str) -> Result<Scenario> {
    let doc: Value = serde_json::from_str(text).map_err(|e| Error::input(format!("malformed JSON: {e}")))?;
    object(&doc, "$")?;
    let name = doc.get("name").map(|n| string(n, "name")).transpose()?;
    let mv = field(&doc, "model", "$")?;
    let kind = string(field(mv, "kind", "model")?, "model.kind")?;
    let bv = doc.get("beliefs");
    let need_beliefs = |what: &str| -> Result<&Value> {
        bv.ok_or_else(|| invalid("beliefs", format!("{what} scenarios need beliefs")))
    };

    let (model, beliefs) = match kind.as_str() {
        "quasilinear" => {
            let g = grid(field(mv, "grid", "model")?, "model.grid")?;
            let st = states(field(mv, "states", "model")?, "model.states")?;
            let q = table(field(mv, "q", "model")?, "model.q")?;
            let p = table(field(mv, "p", "model")?, "model.p")?;
            let m = QuasilinearModel::new(g.clone(), st.clone(), q, p).map_err(|e| under("model", e))?;
            let b = match bv {
                Some(b) => vec![belief_map(b, &g, &st, "beliefs")?],
                None => Vec::new(),
            };
            (ScenarioModel::Quasilinear(m), b)
        }
        "general" => {
            let (g, st, outcomes, phi, u, u2, fd) = general_parts(mv)?;
            let mut m = GeneralModel::new(g.clone(), st.clone(), outcomes, phi, u, u2).map_err(|e| under("model", e))?;
            if fd {
                m = m.with_finite_difference_u2().map_err(|e| under("model", e))?;
            }
            let b = match bv {
                Some(b) => vec![belief_map(b, &g, &st, "beliefs")?],
                None => Vec::new(),
            };
            (ScenarioModel::General(m), b)
        }
        "indirect" => {
            let g = grid(field(mv, "grid", "model")?, "model.grid")?;
            let st = states(field(mv, "states", "model")?, "model.states")?;
            let messages = strings(field(mv, "messages", "model")?, "model.messages")?;
            let outcomes = strings(field(mv, "outcomes", "model")?, "model.outcomes")?;
            let gv = object(field(mv, "gamma", "model")?, "model.gamma")?;
            let gamma = messages
                .iter()
                .map(|msg| {
                    let p = format!("model.gamma.{msg}");
                    let row = gv.get(msg).ok_or_else(|| invalid(&p, "missing outcome row for message"))?;
                    array(row, &p)?
                        .iter()
                        .enumerate()
                        .map(|(s, x)| label_index(&outcomes, x, &format!("{p}[{s}]"), "outcome"))
                        .collect::<Result<Vec<_>>>()
                })
                .collect::<Result<Vec<_>>>()?;
            let sv = array(field(mv, "strategy", "model")?, "model.strategy")?;
            if sv.len() != g.len() {
                return Err(Error::input(format!("model.strategy covers {} of {} types", sv.len(), g.len())));
            }
            let strategy = sv
                .iter()
                .enumerate()
                .map(|(t, x)| label_index(&messages, x, &format!("model.strategy[{t}]"), "message"))
                .collect::<Result<Vec<_>>>()?;
            let u = outcome_tables(field(mv, "u", "model")?, &outcomes, "model.u")?;
            let u2 = mv.get("u2").map(|x| outcome_tables(x, &outcomes, "model.u2")).transpose()?;
            let ind = IndirectMechanism {
                grid: g.clone(),
                states: st.clone(),
                messages,
                outcomes,
                gamma,
                strategy,
                u,
                u2,
            };
            ind.validate().map_err(|e| under("model", e))?;
            let b = match bv {
                Some(b) => vec![belief_map(b, &g, &st, "beliefs")?],
                None => Vec::new(),
            };
            (ScenarioModel::Indirect(ind), b)
        }
        "auction" => {
            let agents = array(field(mv, "agents", "model")?, "model.agents")?;
            let grids = agents
                .iter()
                .enumerate()
                .map(|(i, a)| {
                    let p = format!("model.agents[{i}]");
                    grid(field(a, "grid", &p)?, &join(&p, "grid"))
                })
                .collect::<Result<Vec<_>>>()?;
            let v = table(field(mv, "v", "model")?, "model.v")?;
            let dv = table(field(mv, "dv", "model")?, "model.dv")?;
            let q = table(field(mv, "q", "model")?, "model.q")?;
            let p = table(field(mv, "p", "model")?, "model.p")?;
            let a = AuctionModel::new(grids, v, dv, q, p).map_err(|e| under("model", e))?;
            let b = match bv {
                None => Vec::new(),
                Some(b) => {
                    let list = array(field(b, "per_agent", "beliefs")?, "beliefs.per_agent")?;
                    if list.len() != a.num_agents() {
                        return Err(invalid("beliefs.per_agent", "one entry per agent is required"));
                    }
                    list.iter()
                        .enumerate()
                        .map(|(i, x)| {
                            let st = a.opponent_states(i)?;
                            belief_map(x, &a.grids()[i], &st, &format!("beliefs.per_agent[{i}]"))
                        })
                        .collect::<Result<Vec<_>>>()?
                }
            };
            (ScenarioModel::Auction(a), b)
        }
        "extraction" => {
            let labels = strings(field(mv, "types", "model")?, "model.types")?;
            let values = rational_vec(field(mv, "values", "model")?, "model.values")?;
            let st = states(field(mv, "states", "model")?, "model.states")?;
            let b = need_beliefs("extraction")?;
            let polys = match b.get("uniform") {
                Some(u) => vec![parse_belief(u, &st, "beliefs.uniform")?; labels.len()],
                None => {
                    let list = array(field(b, "per_type", "beliefs")?, "beliefs.per_type")?;
                    list.iter()
                        .enumerate()
                        .map(|(i, x)| parse_belief(x, &st, &format!("beliefs.per_type[{i}]")))
                        .collect::<Result<Vec<_>>>()?
                }
            };
            let inst = ExtractionInstance::new(labels, values, polys).map_err(|e| under("model", e))?;
            (ScenarioModel::Extraction(inst), Vec::new())
        }
        other => return Err(invalid("model.kind", format!("unknown model kind \"{other}\""))),
    };

    let requests = match doc.get("requests") {
        None => Vec::new(),
        Some(r) => array(r, "requests")?
            .iter()
            .enumerate()
            .map(|(i, x)| {
                let p = format!("requests[{i}]");
                let mut params = object(x, &p)?.clone();
                let op = string(
                    &params.remove("op").ok_or_else(|| invalid(&p, "missing field \"op\""))?,
                    &join(&p, "op"),
                )?;
                Ok(Request { op, params })
            })
            .collect::<Result<Vec<_>>>()?,
    };
    Ok(Scenario {
        name,
        model,
        beliefs,
        requests,
    })
}

type GeneralParts = (
    TypeGrid,
    StateSpace,
    Vec<String>,
    Vec<Vec<usize>>,
    Vec<Vec<Vec<Rational>>>,
    Option<Vec<Vec<Vec<Rational>>>>,
    bool,
);

fn general_parts(mv: &Value) -> Result<GeneralParts> {
    let g = grid(field(mv, "grid", "model")?, "model.grid")?;
    let st = states(field(mv, "states", "model")?, "model.states")?;
    let outcomes = strings(field(mv, "outcomes", "model")?, "model.outcomes")?;
    let phi = label_table(field(mv, "phi", "model")?, &outcomes, "model.phi", "outcome")?;
    let u = outcome_tables(field(mv, "u", "model")?, &outcomes, "model.u")?;
    let u2 = mv.get("u2").map(|x| outcome_tables(x, &outcomes, "model.u2")).transpose()?;
    let fd = match mv.get("u2_fallback").map(|x| string(x, "model.u2_fallback")).transpose()?.as_deref() {
        None => false,
        Some("finite_difference") => {
            if u2.is_some() {
                return Err(invalid("model.u2_fallback", "u2 is supplied; the fallback would be ignored"));
            }
            true
        }
        Some(_) => return Err(invalid("model.u2_fallback", "only \"finite_difference\" is supported")),
    };
    Ok((g, st, outcomes, phi, u, u2, fd))
}

fn fmt(q: &Rational) -> Value {
    Value::String(scalar::format(q))
}

fn fmt_vec(v: &[Rational]) -> Value {
    Value::Array(v.iter().map(fmt).collect())
}

fn fmt_table(t: &[Vec<Rational>]) -> Value {
    Value::Array(t.iter().map(|r| fmt_vec(r)).collect())
}

fn fmt_outcome_tables(outcomes: &[String], t: &[Vec<Vec<Rational>>]) -> Value {
    let m: BTreeMap<&String, Value> = outcomes.iter().zip(t).map(|(o, x)| (o, fmt_table(x))).collect();
    json!(m)
}

pub fn belief_to_json(p: &BeliefPolytope) -> Value {
    let rows: Vec<Value> = p
        .halfspaces()
        .iter()
        .map(|h| json!({"coeffs": fmt_vec(&h.coeffs), "rel": "<=", "rhs": fmt(&h.rhs)}))
        .collect();
    let mut v = json!({ "constraints": rows });
    if p.origin() == Origin::ConvexHull {
        v["origin"] = json!("convex_hull");
    }
    v
}

fn map_to_json(b: &BeliefMap) -> Value {
    json!({"per_type": b.polytopes().iter().map(belief_to_json).collect::<Vec<_>>()})
}

fn labels(v: &[String]) -> Value {
    json!(v)
}

/// Canonical document for a scenario; loading it reproduces an equal
/// scenario and saving again reproduces the same bytes.
pub fn save_scenario(s: &Scenario) -> String {
    let mut doc = Map::new();
    if let Some(n) = &s.name {
        doc.insert("name".into(), json!(n));
    }
    let (model, beliefs) = match &s.model {
        ScenarioModel::Quasilinear(m) => (
            json!({
                "kind": "quasilinear",
                "grid": fmt_vec(crate::models::Mechanism::grid(m).points()),
                "states": labels(m.states().labels()),
                "q": fmt_table(m.q()),
                "p": fmt_table(m.p()),
            }),
            s.beliefs.first().map(map_to_json),
        ),
        ScenarioModel::General(m) => {
            let phi: Vec<Vec<&String>> = m.phi().iter().map(|r| r.iter().map(|&o| &m.outcomes()[o]).collect()).collect();
            let mut v = json!({
                "kind": "general",
                "grid": fmt_vec(crate::models::Mechanism::grid(m).points()),
                "states": labels(m.states().labels()),
                "outcomes": labels(m.outcomes()),
                "phi": phi,
                "u": fmt_outcome_tables(m.outcomes(), m.u()),
            });
            match (m.u2_source(), m.u2()) {
                (SensitivitySource::Supplied, Some(u2)) => v["u2"] = fmt_outcome_tables(m.outcomes(), u2),
                (SensitivitySource::FiniteDifference, _) => v["u2_fallback"] = json!("finite_difference"),
                _ => {}
            }
            (v, s.beliefs.first().map(map_to_json))
        }
        ScenarioModel::Indirect(g) => {
            let gamma: BTreeMap<&String, Vec<&String>> = g
                .messages
                .iter()
                .zip(&g.gamma)
                .map(|(msg, row)| (msg, row.iter().map(|&o| &g.outcomes[o]).collect()))
                .collect();
            let strategy: Vec<&String> = g.strategy.iter().map(|&k| &g.messages[k]).collect();
            let mut v = json!({
                "kind": "indirect",
                "grid": fmt_vec(g.grid.points()),
                "states": labels(g.states.labels()),
                "messages": labels(&g.messages),
                "outcomes": labels(&g.outcomes),
                "gamma": gamma,
                "strategy": strategy,
                "u": fmt_outcome_tables(&g.outcomes, &g.u),
            });
            if let Some(u2) = &g.u2 {
                v["u2"] = fmt_outcome_tables(&g.outcomes, u2);
            }
            (v, s.beliefs.first().map(map_to_json))
        }
        ScenarioModel::Auction(a) => {
            let agents: Vec<Value> = a.grids().iter().map(|g| json!({"grid": fmt_vec(g.points())})).collect();
            let beliefs = (!s.beliefs.is_empty())
                .then(|| json!({"per_agent": s.beliefs.iter().map(map_to_json).collect::<Vec<_>>()}));
            (
                json!({
                    "kind": "auction",
                    "agents": agents,
                    "v": fmt_table(a.v()),
                    "dv": fmt_table(a.dv()),
                    "q": fmt_table(a.q()),
                    "p": fmt_table(a.p()),
                }),
                beliefs,
            )
        }
        ScenarioModel::Extraction(inst) => (
            json!({
                "kind": "extraction",
                "types": labels(inst.labels()),
                "values": fmt_vec(inst.values()),
                "states": labels(inst.states().labels()),
            }),
            Some(json!({"per_type": inst.beliefs().iter().map(belief_to_json).collect::<Vec<_>>()})),
        ),
    };
    doc.insert("model".into(), model);
    if let Some(b) = beliefs {
        doc.insert("beliefs".into(), b);
    }
    if !s.requests.is_empty() {
        let reqs: Vec<Value> = s
            .requests
            .iter()
            .map(|r| {
                let mut m = r.params.clone();
                m.insert("op".into(), json!(r.op));
                Value::Object(m)
            })
            .collect();
        doc.insert("requests".into(), Value::Array(reqs));
    }
    let mut out = serde_json::to_string_pretty(&Value::Object(doc)).expect("JSON values always serialize");
    out.push('\n');
    out
}
