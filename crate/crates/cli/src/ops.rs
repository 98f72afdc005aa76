//! Maps operations onto rmd-core calls and renders their results as
//! verdicts: a JSON object plus a one-line human summary.

use num_traits::{One, Zero};
use serde_json::{json, Map, Value};

use rmd_core::beliefs::{self, BeliefMap, BeliefPolytope, ContaminationSpec, OverlapProfile};
use rmd_core::envelope::{self, EnvelopeReport, PaymentOffset, PipelineReport};
use rmd_core::extraction::{self, DesignerBelief, ExtractionInstance, Menu, MenuMode, MenuVerdict};
use rmd_core::ic::{self, IcMode, IcVerdict, IcWitness, ModelRef, MonotonicityVerdict, MonotonicityWitness};
use rmd_core::models::{GeneralModel, Mechanism, SensitivitySource};
use rmd_core::oracles::{self, OracleBudget};
use rmd_core::scalar::{self, Rational};
use rmd_core::scenario::{self, Scenario, ScenarioModel};
use rmd_core::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Op {
    BeliefsCheck,
    IcCheck,
    EnvelopeCheck,
    EnvelopePipeline,
    PaymentsCompare,
    ExtractPi,
    ExtractCi,
    ExtractMenu,
    ExtractVse,
    ExtractVirtual,
    ExtractCollapse,
    ExtractOptimal,
    RevealTransform,
}

const OPS: [(Op, &str); 13] = [
    (Op::BeliefsCheck, "beliefs.check"),
    (Op::IcCheck, "ic.check"),
    (Op::EnvelopeCheck, "envelope.check"),
    (Op::EnvelopePipeline, "envelope.pipeline"),
    (Op::PaymentsCompare, "payments.compare"),
    (Op::ExtractPi, "extract.pi"),
    (Op::ExtractCi, "extract.ci"),
    (Op::ExtractMenu, "extract.menu"),
    (Op::ExtractVse, "extract.vse"),
    (Op::ExtractVirtual, "extract.virtual"),
    (Op::ExtractCollapse, "extract.collapse"),
    (Op::ExtractOptimal, "extract.optimal"),
    (Op::RevealTransform, "reveal.transform"),
];

impl Op {
    pub fn name(self) -> &'static str {
        OPS.iter().find(|(op, _)| *op == self).map(|(_, n)| *n).expect("every op is named")
    }

    pub fn parse(name: &str) -> Option<Op> {
        OPS.iter().find(|(_, n)| *n == name).map(|(op, _)| *op)
    }
}

/// Settings for one operation. Flags fill these directly; requests inside
/// a scenario file fill them from their parameters.
#[derive(Debug, Clone, Default)]
pub struct Options {
    pub mode: Option<IcMode>,
    pub tau: Option<Rational>,
    pub eps: Option<Rational>,
    pub window: Option<usize>,
    pub oracle: bool,
    pub params: Map<String, Value>,
}

impl Options {
    /// Reads `mode`, `tau`, `eps` and `window` from request parameters
    /// unless a flag already set them.
    pub fn merge_params(&mut self, params: &Map<String, Value>, path: &str) -> Result<()> {
        if self.mode.is_none() {
            if let Some(v) = params.get("mode") {
                let p = format!("{path}.mode");
                let s = v.as_str().ok_or_else(|| Error::validation(&p, "expected a string"))?;
                self.mode = Some(IcMode::parse(s).ok_or_else(|| Error::validation(&p, format!("unknown mode \"{s}\"")))?);
            }
        }
        if self.tau.is_none() {
            if let Some(v) = params.get("tau") {
                self.tau = Some(scenario::rational(v, &format!("{path}.tau"))?);
            }
        }
        if self.eps.is_none() {
            if let Some(v) = params.get("eps") {
                self.eps = Some(scenario::rational(v, &format!("{path}.eps"))?);
            }
        }
        if self.window.is_none() {
            if let Some(v) = params.get("window") {
                let w = v
                    .as_u64()
                    .ok_or_else(|| Error::validation(format!("{path}.window"), "expected a positive integer"))?;
                self.window = Some(w as usize);
            }
        }
        for (k, v) in params {
            self.params.entry(k.clone()).or_insert_with(|| v.clone());
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct Verdict {
    pub pass: bool,
    pub summary: String,
    pub detail: Value,
}

fn verdict(check: &str, pass: bool, summary: String, mut detail: Value) -> Verdict {
    let obj = detail.as_object_mut().expect("verdict details are objects");
    obj.insert("check".into(), json!(check));
    obj.insert("pass".into(), json!(pass));
    Verdict { pass, summary, detail }
}

fn f(q: &Rational) -> String {
    scalar::format(q)
}

fn fv(v: &[Rational]) -> Value {
    json!(scalar::format_vec(v))
}

fn ft(t: &[Vec<Rational>]) -> Value {
    Value::Array(t.iter().map(|r| fv(r)).collect())
}

fn mark(pass: bool) -> &'static str {
    if pass {
        "PASS"
    } else {
        "FAIL"
    }
}

/// Type and state names used in witnesses.
struct Names {
    types: Vec<String>,
    states: Vec<String>,
    /// `" (agent i)"` for auction bidders.
    suffix: String,
}

impl Names {
    fn of<M: Mechanism + ?Sized>(m: &M, states: &[String], agent: Option<usize>) -> Names {
        Names {
            types: m.grid().points().iter().map(f).collect(),
            states: states.to_vec(),
            suffix: agent.map(|i| format!(" (agent {i})")).unwrap_or_default(),
        }
    }

    fn put_agent(&self, agent: Option<usize>, v: &mut Value) {
        if let Some(i) = agent {
            v["agent"] = json!(i);
        }
    }
}

fn ic_verdict(v: &IcVerdict, names: &Names, agent: Option<usize>) -> Verdict {
    let (witness, text) = match &v.witness {
        None => (Value::Null, String::new()),
        Some(IcWitness::ExPost { t, report, state }) => (
            json!({
                "t": names.types[*t], "report": names.types[*report], "state": names.states[*state],
                "t_index": t, "report_index": report, "state_index": state,
            }),
            format!(" witness t={} report={} state={}", names.types[*t], names.types[*report], names.states[*state]),
        ),
        Some(IcWitness::Belief { t, report, belief }) => (
            json!({
                "t": names.types[*t], "report": names.types[*report], "belief": fv(belief),
                "t_index": t, "report_index": report,
            }),
            format!(
                " witness t={} report={} belief=({})",
                names.types[*t],
                names.types[*report],
                scalar::format_vec(belief).join(",")
            ),
        ),
    };
    let mut detail = json!({"mode": v.mode.as_str(), "witness": witness, "slack": f(&v.slack)});
    names.put_agent(agent, &mut detail);
    let summary = format!("ic {}{}: {} slack {}{}", v.mode.as_str(), names.suffix, mark(v.pass), f(&v.slack), text);
    verdict("ic", v.pass, summary, detail)
}

fn envelope_json(r: &EnvelopeReport, names: &Names) -> Value {
    let residuals: Vec<Value> = r
        .residuals
        .iter()
        .map(|x| json!({"lower": names.types[x.lower], "upper": names.types[x.upper], "state": names.states[x.state], "value": f(&x.value)}))
        .collect();
    json!({
        "rule": r.rule,
        "tau": f(&r.tau),
        "max_abs": f(&r.max_abs),
        "argmax": r.argmax.map(|(lo, hi, s)| json!({"lower": names.types[lo], "upper": names.types[hi], "state": names.states[s]})),
        "residuals": residuals,
    })
}

fn envelope_verdict(r: &EnvelopeReport, names: &Names, agent: Option<usize>) -> Verdict {
    let mut detail = envelope_json(r, names);
    names.put_agent(agent, &mut detail);
    let at = r
        .argmax
        .map(|(lo, hi, s)| format!(" at (t'={}, t''={}, state={})", names.types[lo], names.types[hi], names.states[s]))
        .unwrap_or_default();
    let summary = format!(
        "envelope{}: {} max |residual| {}{} (tau {})",
        names.suffix,
        mark(r.pass),
        f(&r.max_abs),
        at,
        f(&r.tau)
    );
    verdict("envelope", r.pass, summary, detail)
}

fn overlap_json(p: &OverlapProfile, names: &[String]) -> Value {
    let window = |lo: usize, hi: usize| json!([names[lo], names[hi]]);
    json!({
        "window": p.window,
        "common_belief": p.common_belief,
        "independent": p.independent,
        "overlapping": p.overlapping,
        "fully_overlapping": p.fully_overlapping,
        "empty_windows": p.empty_windows().iter().map(|r| json!({"type": names[r.type_index], "range": window(r.lo, r.hi)})).collect::<Vec<_>>(),
        "records": p.records.iter().map(|r| json!({
            "type": names[r.type_index],
            "range": window(r.lo, r.hi),
            "nonempty": r.nonempty,
            "dimension": r.dimension,
            "full_dimension": r.full_dimension,
        })).collect::<Vec<_>>(),
    })
}

fn monotone_json(v: &MonotonicityVerdict, names: &Names) -> Value {
    let witness = match &v.witness {
        None => Value::Null,
        Some(MonotonicityWitness::Allocation { agent, lower, upper, state }) => json!({
            "agent": agent, "lower": names.types[*lower], "upper": names.types[*upper], "state": names.states[*state],
        }),
        Some(MonotonicityWitness::Sensitivity { t, lower, upper, state }) => json!({
            "t": names.types[*t], "lower": names.types[*lower], "upper": names.types[*upper], "state": names.states[*state],
        }),
    };
    json!({"kind": v.kind.as_str(), "pass": v.pass, "witness": witness})
}

fn pipeline_verdict(r: &PipelineReport, names: &Names) -> Verdict {
    let links: Vec<Value> = r
        .links
        .iter()
        .map(|l| json!({"name": l.name, "hypotheses": l.hypotheses, "conclusion": l.conclusion, "status": l.status.as_str()}))
        .collect();
    let mut detail = json!({
        "overlap": overlap_json(&r.overlap, &names.types),
        "robust": ic_verdict(&r.robust, names, None).detail,
        "envelope": envelope_verdict(&r.envelope, names, None).detail,
        "monotone": monotone_json(&r.monotone, names),
        "expost": ic_verdict(&r.expost, names, None).detail,
        "links": links,
        "red_alert": r.red_alert,
        "notes": r.notes,
    });
    names.put_agent(r.agent, &mut detail);
    let statuses: Vec<String> = r.links.iter().map(|l| format!("{} [{}]", l.name, l.status.as_str())).collect();
    let summary = format!(
        "pipeline{}: {} fully_overlapping={} robust_ic={} envelope={} monotone={} expost_ic={}; {}",
        names.suffix,
        mark(!r.red_alert),
        r.overlap.fully_overlapping,
        r.robust.pass,
        r.envelope.pass,
        r.monotone.pass,
        r.expost.pass,
        statuses.join("; ")
    );
    verdict("envelope.pipeline", !r.red_alert, summary, detail)
}

fn need_beliefs(s: &Scenario, op: Op) -> Result<&[BeliefMap]> {
    if s.beliefs.is_empty() {
        return Err(Error::input(format!("{} needs beliefs in the scenario", op.name())));
    }
    Ok(&s.beliefs)
}

fn extraction(s: &Scenario, op: Op) -> Result<&ExtractionInstance> {
    match &s.model {
        ScenarioModel::Extraction(inst) => Ok(inst),
        other => Err(Error::input(format!("{} needs an extraction model, found {}", op.name(), other.kind()))),
    }
}

pub fn execute(s: &Scenario, op: Op, opts: &Options) -> Result<Vec<Verdict>> {
    match op {
        Op::BeliefsCheck => beliefs_check(s, opts),
        Op::IcCheck => ic_check(s, opts),
        Op::EnvelopeCheck => envelope_check(s, opts),
        Op::EnvelopePipeline => pipeline(s, opts),
        Op::PaymentsCompare => payments(s, opts),
        Op::ExtractPi => extract_pi(extraction(s, op)?, opts),
        Op::ExtractCi => Ok(vec![extract_ci(extraction(s, op)?)]),
        Op::ExtractMenu => extract_menu(extraction(s, op)?),
        Op::ExtractVse => extract_vse(extraction(s, op)?, opts),
        Op::ExtractVirtual => extract_virtual(extraction(s, op)?, opts),
        Op::ExtractCollapse => extract_collapse(extraction(s, op)?, opts),
        Op::ExtractOptimal => extract_optimal(extraction(s, op)?, opts),
        Op::RevealTransform => reveal(s),
    }
}

fn type_names(points: &[Rational]) -> Vec<String> {
    points.iter().map(f).collect()
}

fn beliefs_check(s: &Scenario, opts: &Options) -> Result<Vec<Verdict>> {
    let window = opts.window.unwrap_or(1);
    let lists: Vec<(Option<usize>, Vec<String>, Vec<BeliefPolytope>)> = match &s.model {
        ScenarioModel::Extraction(inst) => vec![(None, inst.labels().to_vec(), inst.beliefs().to_vec())],
        ScenarioModel::Auction(_) => need_beliefs(s, Op::BeliefsCheck)?
            .iter()
            .enumerate()
            .map(|(i, b)| (Some(i), type_names(b.grid().points()), b.polytopes().to_vec()))
            .collect(),
        _ => need_beliefs(s, Op::BeliefsCheck)?
            .iter()
            .map(|b| (None, type_names(b.grid().points()), b.polytopes().to_vec()))
            .collect(),
    };
    let mut out = Vec::new();
    for (agent, names, polys) in &lists {
        let suffix = agent.map(|i| format!(" (agent {i})")).unwrap_or_default();
        let dims: Vec<_> = polys.iter().map(BeliefPolytope::full_dimension).collect();
        let first_flat = dims.iter().position(|d| !d.full);
        let pass = first_flat.is_none();
        let mut detail = json!({
            "dimensions": names.iter().zip(&dims).map(|(n, d)| json!({"type": n, "dimension": d.dimension, "full": d.full})).collect::<Vec<_>>(),
            "witness": first_flat.map(|k| json!({"type": names[k], "annihilator": dims[k].annihilator.as_deref().map(fv)})),
        });
        if let Some(i) = agent {
            detail["agent"] = json!(i);
        }
        let text = first_flat
            .map(|k| format!(" type {} has dimension {}", names[k], dims[k].dimension))
            .unwrap_or_default();
        out.push(verdict("beliefs.full_dimension", pass, format!("full dimension{suffix}: {}{text}", mark(pass)), detail));

        let profile = beliefs::overlap_profile(polys, window)?;
        let mut detail = overlap_json(&profile, names);
        if let Some(i) = agent {
            detail["agent"] = json!(i);
        }
        let empty: Vec<String> = profile
            .empty_windows()
            .iter()
            .map(|r| format!("{} [{}..{}]", names[r.type_index], names[r.lo], names[r.hi]))
            .collect();
        let summary = format!(
            "overlap{suffix} (window {window}): {} common_belief={} independent={} overlapping={} fully_overlapping={}{}",
            mark(profile.fully_overlapping),
            profile.common_belief,
            profile.independent,
            profile.overlapping,
            profile.fully_overlapping,
            if empty.is_empty() {
                String::new()
            } else {
                format!("; empty intersections at {}", empty.join(", "))
            }
        );
        out.push(verdict("beliefs.overlap", profile.fully_overlapping, summary, detail));
    }
    if let Some(n) = opts.params.get("nesting") {
        let spec = |key: &str| -> Result<ContaminationSpec> {
            let path = format!("nesting.{key}");
            let v = n.get(key).ok_or_else(|| Error::validation(&path, "missing contamination spec"))?;
            let reference = scenario::rational_vec(
                v.get("reference").ok_or_else(|| Error::validation(&path, "missing field \"reference\""))?,
                &format!("{path}.reference"),
            )?;
            let epsilon = scenario::rational(
                v.get("epsilon").ok_or_else(|| Error::validation(&path, "missing field \"epsilon\""))?,
                &format!("{path}.epsilon"),
            )?;
            ContaminationSpec::new(reference, epsilon)
        };
        let (inner, outer) = (spec("inner")?, spec("outer")?);
        let nested = beliefs::contamination_nested(&inner, &outer)?;
        let summary = format!(
            "nesting: {} contamination eps={} inside eps={}",
            mark(nested),
            f(&inner.epsilon),
            f(&outer.epsilon)
        );
        out.push(verdict("beliefs.nesting", nested, summary, json!({"inner_epsilon": f(&inner.epsilon), "outer_epsilon": f(&outer.epsilon)})));
    }
    Ok(out)
}

/// Worst gap recomputed from vertex lists, for `--oracle`.
fn oracle_slack<M: Mechanism + ?Sized>(m: &M, b: &BeliefMap) -> Result<Rational> {
    let budget = OracleBudget::default();
    let n = m.num_types();
    let mut worst = Rational::zero();
    for t in 0..n {
        for r in 0..n {
            let gap: Vec<Rational> = (0..m.num_states()).map(|s| m.utility(t, t, s) - m.utility(t, r, s)).collect();
            let w = oracles::brute_worst_case(b.get(t), &gap, &budget)?;
            if w.min < worst {
                worst = w.min;
            }
        }
    }
    Ok(worst)
}

fn oracle_verdict(what: &str, lp: &Rational, brute: &Rational) -> Verdict {
    let pass = lp == brute;
    verdict(
        &format!("oracle.{what}"),
        pass,
        format!("oracle {what}: {} lp {} brute {}", mark(pass), f(lp), f(brute)),
        json!({"lp": f(lp), "brute": f(brute)}),
    )
}

fn ic_one<M: Mechanism + Sync + ?Sized>(
    m: &M,
    states: &[String],
    agent: Option<usize>,
    b: Option<&BeliefMap>,
    opts: &Options,
    mode: IcMode,
) -> Result<Vec<Verdict>> {
    let names = Names::of(m, states, agent);
    let v = ic::check_ic(m, mode, b)?;
    let mut out = vec![ic_verdict(&v, &names, agent)];
    if opts.oracle && mode == IcMode::Robust {
        let brute = oracle_slack(m, b.expect("robust mode requires beliefs"))?;
        out.push(oracle_verdict("ic", &v.slack, &brute));
    }
    Ok(out)
}

fn ic_check(s: &Scenario, opts: &Options) -> Result<Vec<Verdict>> {
    let mode = opts.mode.unwrap_or(IcMode::Robust);
    if matches!(s.model, ScenarioModel::Indirect(_) | ScenarioModel::Extraction(_)) {
        return Err(Error::input(format!("ic check needs a direct mechanism, found {}", s.model.kind())));
    }
    let beliefs = if mode == IcMode::ExPost {
        None
    } else {
        Some(need_beliefs(s, Op::IcCheck)?)
    };
    match &s.model {
        ScenarioModel::Quasilinear(m) => ic_one(m, m.states().labels(), None, beliefs.map(|b| &b[0]), opts, mode),
        ScenarioModel::General(m) => ic_one(m, m.states().labels(), None, beliefs.map(|b| &b[0]), opts, mode),
        ScenarioModel::Auction(a) => {
            let mut out = Vec::new();
            for i in 0..a.num_agents() {
                let view = a.agent_view(i)?;
                out.extend(ic_one(&view, view.states().labels(), Some(i), beliefs.map(|b| &b[i]), opts, mode)?);
            }
            Ok(out)
        }
        _ => unreachable!("rejected above"),
    }
}

fn envelope_check(s: &Scenario, opts: &Options) -> Result<Vec<Verdict>> {
    match &s.model {
        ScenarioModel::Quasilinear(m) => {
            let r = envelope::check_envelope(m, opts.tau.clone())?;
            Ok(vec![envelope_verdict(&r, &Names::of(m, m.states().labels(), None), None)])
        }
        ScenarioModel::General(m) => {
            let r = envelope::check_envelope(m, opts.tau.clone())?;
            let v = envelope_verdict(&r, &Names::of(m, m.states().labels(), None), None);
            Ok(vec![flag_finite_difference(m, v)])
        }
        ScenarioModel::Auction(a) => {
            let reports = envelope::check_auction_envelope(a, opts.tau.clone())?;
            reports
                .iter()
                .enumerate()
                .map(|(i, r)| {
                    let view = a.agent_view(i)?;
                    Ok(envelope_verdict(r, &Names::of(&view, view.states().labels(), Some(i)), Some(i)))
                })
                .collect()
        }
        other => Err(Error::input(format!("envelope check needs a direct mechanism, found {}", other.kind()))),
    }
}

/// A derivative taken from `u` by differencing is not the model's own.
fn flag_finite_difference(m: &GeneralModel, mut v: Verdict) -> Verdict {
    if m.u2_source() == SensitivitySource::FiniteDifference {
        v.detail["u2_source"] = json!("finite_difference");
        v.summary.push_str(" [u2 approximated by finite differences]");
    }
    v
}

fn pipeline(s: &Scenario, opts: &Options) -> Result<Vec<Verdict>> {
    let beliefs = need_beliefs(s, Op::EnvelopePipeline)?;
    let window = opts.window.unwrap_or(1);
    let model = match &s.model {
        ScenarioModel::Quasilinear(m) => ModelRef::Quasilinear(m),
        ScenarioModel::General(m) => ModelRef::General(m),
        ScenarioModel::Auction(a) => ModelRef::Auction(a),
        other => return Err(Error::input(format!("envelope pipeline needs a direct mechanism, found {}", other.kind()))),
    };
    let reports = envelope::envelope_pipeline(model, beliefs, window, opts.tau.clone())?;
    reports
        .iter()
        .map(|r| {
            let names = match (&s.model, r.agent) {
                (ScenarioModel::Quasilinear(m), _) => Names::of(m, m.states().labels(), None),
                (ScenarioModel::General(m), _) => Names::of(m, m.states().labels(), None),
                (ScenarioModel::Auction(a), Some(i)) => {
                    let view = a.agent_view(i)?;
                    Names::of(&view, view.states().labels(), Some(i))
                }
                _ => unreachable!("pipeline reports match the model"),
            };
            let v = pipeline_verdict(r, &names);
            Ok(match &s.model {
                ScenarioModel::General(m) => flag_finite_difference(m, v),
                _ => v,
            })
        })
        .collect()
}

fn offset_verdict(o: &PaymentOffset, names: &Names) -> Verdict {
    let indifference = o.indifference.as_ref().map(|d| {
        json!({"type": names.types[d.t], "min": f(&d.min), "max": f(&d.max), "holds": d.holds, "offset_zero": d.offset_zero})
    });
    let witness = o.witness.as_ref().map(|w| {
        json!({"state": names.states[w.state], "lower": names.types[w.lower], "upper": names.types[w.upper]})
    });
    let pass = o.consistent && o.indifference.as_ref().is_none_or(|d| d.holds);
    let mut detail = json!({"offsets": fv(&o.offsets), "consistent": o.consistent, "witness": witness, "indifference": indifference});
    names.put_agent(o.agent, &mut detail);
    let mut summary = format!(
        "payments{}: {} offset ({}) {}",
        names.suffix,
        mark(pass),
        scalar::format_vec(&o.offsets).join(","),
        if o.consistent { "independent of type" } else { "varies with type" }
    );
    if let Some(w) = &o.witness {
        summary.push_str(&format!(
            " at state {} between types {} and {}",
            names.states[w.state], names.types[w.lower], names.types[w.upper]
        ));
    }
    if let Some(d) = &o.indifference {
        summary.push_str(&format!(
            "; type {} indifferent: {} (offset zero: {})",
            names.types[d.t],
            d.holds,
            d.offset_zero.map_or("n/a".to_string(), |z| z.to_string())
        ));
    }
    verdict("payments.compare", pass, summary, detail)
}

fn payments(s: &Scenario, opts: &Options) -> Result<Vec<Verdict>> {
    let other = opts
        .params
        .get("other")
        .ok_or_else(|| Error::input("payments compare needs a payments.compare request with \"other\": {\"p\": ...}"))?;
    let p_value = other
        .get("p")
        .ok_or_else(|| Error::validation("other", "missing field \"p\""))?;
    let table: Vec<Vec<Rational>> = p_value
        .as_array()
        .ok_or_else(|| Error::validation("other.p", "expected an array"))?
        .iter()
        .enumerate()
        .map(|(i, row)| scenario::rational_vec(row, &format!("other.p[{i}]")))
        .collect::<Result<_>>()?;
    let indifferent = match opts.params.get("indifferent_type") {
        None => None,
        Some(v) => Some(
            v.as_u64()
                .ok_or_else(|| Error::validation("indifferent_type", "expected a type index"))? as usize,
        ),
    };
    let beliefs = (!s.beliefs.is_empty()).then_some(&s.beliefs[..]);
    match &s.model {
        ScenarioModel::Quasilinear(m) => {
            let b = m.with_payments(table).map_err(|e| reroot("other", e))?;
            let o = envelope::compare_payments(m, &b, beliefs.map(|b| &b[0]), indifferent)?;
            Ok(vec![offset_verdict(&o, &Names::of(m, m.states().labels(), None))])
        }
        ScenarioModel::Auction(a) => {
            let b = a.with_payments(table).map_err(|e| reroot("other", e))?;
            let offsets = envelope::compare_auction_payments(a, &b, beliefs, indifferent)?;
            offsets
                .iter()
                .enumerate()
                .map(|(i, o)| {
                    let view = a.agent_view(i)?;
                    Ok(offset_verdict(o, &Names::of(&view, view.states().labels(), Some(i))))
                })
                .collect()
        }
        other => Err(Error::input(format!("payments compare needs a quasilinear or auction model, found {}", other.kind()))),
    }
}

fn reroot(prefix: &str, e: Error) -> Error {
    match e {
        Error::Validation { path, message } => Error::validation(format!("{prefix}.{path}"), message),
        other => other,
    }
}

fn extract_pi(inst: &ExtractionInstance, opts: &Options) -> Result<Vec<Verdict>> {
    let r = extraction::check_probabilistic_independence(inst);
    let labels = inst.labels();
    let violation = r.violation.as_ref().map(|v| {
        json!({
            "anchor": labels[v.anchor],
            "mu": fv(&v.mu),
            "selections": v.selections.iter().map(|s| s.as_deref().map(fv)).collect::<Vec<_>>(),
            "anchor_belief": fv(&v.anchor_belief),
        })
    });
    let text = r
        .violation
        .as_ref()
        .map(|v| format!(" violation at anchor {} mu=({})", labels[v.anchor], scalar::format_vec(&v.mu).join(",")))
        .unwrap_or_default();
    let mut out = vec![verdict(
        "extract.pi",
        r.holds,
        format!("probabilistic independence: {}{text}", mark(r.holds)),
        json!({"optima": fv(&r.optima), "violation": violation}),
    )];
    if opts.oracle {
        let brute = oracles::brute_pi(inst, 64, &OracleBudget::default())?;
        // One-sided: a brute-force violation must be matched by the LP.
        let pass = brute.is_none() || !r.holds;
        let summary = format!(
            "oracle pi: {} brute force {}",
            mark(pass),
            if brute.is_some() { "found a violation" } else { "found none" }
        );
        let found = brute.map(|b| json!({"anchor": labels[b.anchor], "mu": fv(&b.mu)}));
        out.push(verdict("oracle.pi", pass, summary, json!({"brute_violation": found})));
    }
    Ok(out)
}

fn extract_ci(inst: &ExtractionInstance) -> Verdict {
    let r = extraction::check_convex_independence(inst);
    let labels = inst.labels();
    let entries: Vec<Value> = r
        .entries
        .iter()
        .map(|e| {
            json!({
                "type": labels[e.type_index],
                "disjoint": e.disjoint,
                "separator": e.separator.as_deref().map(fv),
                "gap": e.gap.as_ref().map(f),
                "shared_point": e.shared_point.as_deref().map(fv),
            })
        })
        .collect();
    let text = r
        .entries
        .iter()
        .find(|e| !e.disjoint)
        .map(|e| format!(" type {} meets the hull of the others", labels[e.type_index]))
        .unwrap_or_default();
    verdict(
        "extract.ci",
        r.holds,
        format!("convex independence: {}{text}", mark(r.holds)),
        json!({"entries": entries}),
    )
}

fn menu_verdict(check: &str, inst: &ExtractionInstance, menu: &Menu, v: &MenuVerdict) -> Verdict {
    let labels = inst.labels();
    let witness = v.witness.as_ref().map(|w| {
        json!({
            "clause": w.clause,
            "type": labels[w.t],
            "other": w.other.map(|o| labels[o].clone()),
            "belief": fv(&w.belief),
            "value": f(&w.value),
        })
    });
    let bound = match &v.mode {
        MenuMode::Virtual(e) => Some(f(e)),
        _ => None,
    };
    let text = v
        .witness
        .as_ref()
        .map(|w| format!(" {} fails for type {} (value {})", w.clause, labels[w.t], f(&w.value)))
        .unwrap_or_default();
    verdict(
        check,
        v.pass,
        format!("menu {}: {}{text}", v.mode.name(), mark(v.pass)),
        json!({"mode": v.mode.name(), "bound": bound, "contracts": ft(&menu.contracts), "witness": witness}),
    )
}

fn extract_menu(inst: &ExtractionInstance) -> Result<Vec<Verdict>> {
    let menu = extraction::build_extraction_menu(inst)?;
    let v = extraction::check_menu(inst, &menu, MenuMode::WeakFull)?;
    Ok(vec![menu_verdict("extract.menu", inst, &menu, &v)])
}

fn extract_vse(inst: &ExtractionInstance, opts: &Options) -> Result<Vec<Verdict>> {
    let sol = extraction::solve_vse(inst);
    let labels = inst.labels();
    let detail = json!({
        "p_star": f(&sol.p_star),
        "virtual_extraction": sol.p_star.is_zero(),
        "z": ft(&sol.z),
        "lambda": fv(&sol.lambda),
        "nu": ft(&sol.nu),
        "nu_conditional": sol.nu_conditional.iter().map(|c| c.as_deref().map(fv)).collect::<Vec<_>>(),
        "dual_objective": f(&sol.dual_objective),
        "types": labels,
    });
    let mut out = vec![verdict(
        "extract.vse",
        true,
        format!(
            "vse: p* = {} (dual objective {}); virtual extraction {}",
            f(&sol.p_star),
            f(&sol.dual_objective),
            if sol.p_star.is_zero() { "holds" } else { "fails" }
        ),
        detail,
    )];
    if opts.oracle {
        let brute = oracles::brute_vse(inst, &OracleBudget::default())?;
        out.push(oracle_verdict("vse", &sol.p_star, &brute));
    }
    Ok(out)
}

fn extract_virtual(inst: &ExtractionInstance, opts: &Options) -> Result<Vec<Verdict>> {
    let eps = opts
        .eps
        .as_ref()
        .ok_or_else(|| Error::input("extract virtual needs --eps"))?;
    let menu = extraction::build_virtual_menu(inst, eps)?;
    let bound = eps * (Rational::one() + Rational::one());
    let v = extraction::check_menu(inst, &menu, MenuMode::Virtual(bound))?;
    Ok(vec![menu_verdict("extract.virtual", inst, &menu, &v)])
}

fn extract_collapse(inst: &ExtractionInstance, opts: &Options) -> Result<Vec<Verdict>> {
    let c = extraction::menu_collapse(inst, opts.window)?;
    let labels = inst.labels();
    let name = |t: &usize| labels[*t].clone();
    let components: Vec<Vec<String>> = c.components.iter().map(|comp| comp.iter().map(name).collect()).collect();
    let edges: Vec<Value> = c.edges.iter().map(|(a, b)| json!([labels[*a], labels[*b]])).collect();
    let shown: Vec<String> = components.iter().map(|comp| format!("{{{}}}", comp.join(","))).collect();
    Ok(vec![verdict(
        "extract.collapse",
        true,
        format!(
            "collapse: {} component(s) {}; single contract forced: {}",
            components.len(),
            shown.join(" "),
            c.single_contract
        ),
        json!({"components": components, "edges": edges, "single_contract": c.single_contract}),
    )])
}

fn extract_optimal(inst: &ExtractionInstance, opts: &Options) -> Result<Vec<Verdict>> {
    let d = opts
        .params
        .get("designer")
        .ok_or_else(|| Error::input("extract optimal needs an extract.optimal request with a \"designer\" belief"))?;
    let designer = match d.get("point") {
        Some(p) => DesignerBelief::Point(scenario::rational_vec(p, "designer.point")?),
        None => DesignerBelief::Set(scenario::parse_belief(d, inst.states(), "designer")?),
    };
    let r = extraction::optimal_single_contract(inst, &designer)?;
    let summary = format!(
        "optimal single contract: {} revenue {} (lowest type {}); applicability: {}",
        f(&r.contract),
        f(&r.revenue),
        inst.labels()[r.lowest_type],
        r.applicability.as_str()
    );
    Ok(vec![verdict(
        "extract.optimal",
        true,
        summary,
        json!({
            "contract": f(&r.contract),
            "revenue": f(&r.revenue),
            "lowest_type": inst.labels()[r.lowest_type],
            "applicability": r.applicability.as_str(),
            "hypotheses_met": r.applicability != extraction::Applicability::NotMet,
        }),
    )])
}

fn reveal(s: &Scenario) -> Result<Vec<Verdict>> {
    let g = match &s.model {
        ScenarioModel::Indirect(g) => g,
        other => return Err(Error::input(format!("reveal transform needs an indirect mechanism, found {}", other.kind()))),
    };
    let b = &need_beliefs(s, Op::RevealTransform)?[0];
    let r = rmd_core::models::revelation_transform(g, b)?;
    let names = Names::of(&r.direct, g.states.labels(), None);
    let phi: Vec<Vec<&String>> = r
        .direct
        .phi()
        .iter()
        .map(|row| row.iter().map(|&o| &r.direct.outcomes()[o]).collect())
        .collect();
    let witness = r.strategy_witness.as_ref().map(|(t, alt, belief)| {
        json!({"t": names.types[*t], "message": g.messages[*alt], "belief": fv(belief)})
    });
    let direct = ic_verdict(&r.direct_verdict, &names, None);
    let pass = r.strategy_robust && r.direct_verdict.pass;
    let summary = format!(
        "revelation: {} strategy robust={}; direct mechanism {}",
        mark(pass),
        r.strategy_robust,
        direct.summary
    );
    Ok(vec![verdict(
        "reveal.transform",
        pass,
        summary,
        json!({"phi": phi, "strategy_robust": r.strategy_robust, "strategy_witness": witness, "direct": direct.detail}),
    )])
}
