//! Mechanism data models.
//!
//! Three families share one view through [`Mechanism`]: the single-agent
//! quasilinear screening model, the interdependent-value auction (seen one
//! bidder at a time through [`AuctionModel::agent_view`]) and the general
//! outcome model with tabulated utilities.

use std::collections::HashMap;

use num_traits::{One, Signed, Zero};

use crate::beliefs::{BeliefMap, StateSpace};
use crate::error::{Error, Result};
use crate::grid::TypeGrid;
use crate::ic::{self, IcVerdict};
use crate::scalar::{self, Rational};

/// Direct mechanism seen from the agent: tabulated ex post utilities.
pub trait Mechanism {
    fn grid(&self) -> &TypeGrid;

    fn num_states(&self) -> usize;

    /// Ex post utility of true type `t` reporting `report` in state `s`.
    fn utility(&self, t: usize, report: usize, s: usize) -> Rational;

    /// Derivative of utility in the true type, evaluated at the outcome
    /// assigned to `report`. `None` when the model carries no such table.
    fn type_sensitivity(&self, t: usize, report: usize, s: usize) -> Option<Rational>;

    fn num_types(&self) -> usize {
        self.grid().len()
    }
}

fn check_table(name: &str, table: &[Vec<Rational>], rows: usize, cols: usize) -> Result<()> {
    if table.len() != rows {
        return Err(Error::validation(name, format!("expected {rows} rows, found {}", table.len())));
    }
    for (i, r) in table.iter().enumerate() {
        if r.len() != cols {
            return Err(Error::validation(
                format!("{name}[{i}]"),
                format!("expected {cols} entries, found {}", r.len()),
            ));
        }
    }
    Ok(())
}

fn in_unit_interval(x: &Rational) -> bool {
    !x.is_negative() && *x <= Rational::one()
}

/// Single buyer with utility `t·q(θ,s) - p(θ,s)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct QuasilinearModel {
    grid: TypeGrid,
    states: StateSpace,
    q: Vec<Vec<Rational>>,
    p: Vec<Vec<Rational>>,
}

impl QuasilinearModel {
    pub fn new(grid: TypeGrid, states: StateSpace, q: Vec<Vec<Rational>>, p: Vec<Vec<Rational>>) -> Result<Self> {
        check_table("q", &q, grid.len(), states.len())?;
        check_table("p", &p, grid.len(), states.len())?;
        for (t, row) in q.iter().enumerate() {
            if let Some(s) = row.iter().position(|x| !in_unit_interval(x)) {
                return Err(Error::validation(format!("q[{t}][{s}]"), "q out of [0,1]"));
            }
        }
        Ok(QuasilinearModel { grid, states, q, p })
    }

    pub fn states(&self) -> &StateSpace {
        &self.states
    }

    pub fn q(&self) -> &[Vec<Rational>] {
        &self.q
    }

    pub fn p(&self) -> &[Vec<Rational>] {
        &self.p
    }

    /// Same allocation, payments replaced.
    pub fn with_payments(&self, p: Vec<Vec<Rational>>) -> Result<Self> {
        QuasilinearModel::new(self.grid.clone(), self.states.clone(), self.q.clone(), p)
    }

    /// Re-expressed in the general model: outcomes are the distinct
    /// `(q, p)` pairs, `u = t·q - p` and `u₂ = q`.
    pub fn to_general(&self) -> GeneralModel {
        let mut outcomes = OutcomeTable::default();
        let phi: Vec<Vec<usize>> = (0..self.grid.len())
            .map(|t| {
                (0..self.states.len())
                    .map(|s| outcomes.intern(&self.q[t][s], &self.p[t][s]))
                    .collect()
            })
            .collect();
        let n = self.grid.len();
        let m = self.states.len();
        let mut u = Vec::new();
        let mut u2 = Vec::new();
        for (q, p) in &outcomes.pairs {
            u.push(
                (0..n)
                    .map(|t| (0..m).map(|_| self.grid.value(t) * q - p).collect())
                    .collect(),
            );
            u2.push(vec![vec![q.clone(); m]; n]);
        }
        GeneralModel::new(
            self.grid.clone(),
            self.states.clone(),
            outcomes.labels,
            phi,
            u,
            Some(u2),
        )
        .expect("quasilinear tables translate to a valid general model")
    }
}

impl Mechanism for QuasilinearModel {
    fn grid(&self) -> &TypeGrid {
        &self.grid
    }

    fn num_states(&self) -> usize {
        self.states.len()
    }

    fn utility(&self, t: usize, report: usize, s: usize) -> Rational {
        self.grid.value(t) * &self.q[report][s] - &self.p[report][s]
    }

    fn type_sensitivity(&self, _t: usize, report: usize, s: usize) -> Option<Rational> {
        Some(self.q[report][s].clone())
    }
}

/// Interns `(q, p)` outcome pairs under readable labels.
#[derive(Default)]
struct OutcomeTable {
    labels: Vec<String>,
    pairs: Vec<(Rational, Rational)>,
    index: HashMap<(Rational, Rational), usize>,
}

impl OutcomeTable {
    fn intern(&mut self, q: &Rational, p: &Rational) -> usize {
        let key = (q.clone(), p.clone());
        if let Some(&i) = self.index.get(&key) {
            return i;
        }
        let i = self.labels.len();
        self.labels.push(format!("q={},p={}", scalar::format(q), scalar::format(p)));
        self.pairs.push(key.clone());
        self.index.insert(key, i);
        i
    }
}

/// Provenance of the `u₂` table.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SensitivitySource {
    Supplied,
    /// Central differences of `u` along the grid (one-sided at the ends).
    FiniteDifference,
    Absent,
}

/// General outcome model: `φ(θ,s)` picks an outcome, `u(o,t,s)` and
/// `u₂(o,t,s)` are tabulated per outcome.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GeneralModel {
    grid: TypeGrid,
    states: StateSpace,
    outcomes: Vec<String>,
    phi: Vec<Vec<usize>>,
    u: Vec<Vec<Vec<Rational>>>,
    u2: Option<Vec<Vec<Vec<Rational>>>>,
    u2_source: SensitivitySource,
}

impl GeneralModel {
    pub fn new(
        grid: TypeGrid,
        states: StateSpace,
        outcomes: Vec<String>,
        phi: Vec<Vec<usize>>,
        u: Vec<Vec<Vec<Rational>>>,
        u2: Option<Vec<Vec<Vec<Rational>>>>,
    ) -> Result<Self> {
        let n = grid.len();
        let m = states.len();
        if outcomes.is_empty() {
            return Err(Error::validation("outcomes", "at least one outcome is required"));
        }
        if phi.len() != n {
            return Err(Error::validation("phi", format!("expected {n} rows, found {}", phi.len())));
        }
        for (t, row) in phi.iter().enumerate() {
            if row.len() != m {
                return Err(Error::validation(format!("phi[{t}]"), format!("expected {m} entries, found {}", row.len())));
            }
            if let Some(s) = row.iter().position(|&o| o >= outcomes.len()) {
                return Err(Error::validation(format!("phi[{t}][{s}]"), "not a valid outcome label"));
            }
        }
        check_outcome_tables("u", &u, &outcomes, n, m)?;
        let u2_source = match &u2 {
            Some(t) => {
                check_outcome_tables("u2", t, &outcomes, n, m)?;
                check_nonnegative_u2(t, &outcomes)?;
                SensitivitySource::Supplied
            }
            None => SensitivitySource::Absent,
        };
        Ok(GeneralModel {
            grid,
            states,
            outcomes,
            phi,
            u,
            u2,
            u2_source,
        })
    }

    /// Fills a missing `u₂` from central differences of `u`; flagged as
    /// [`SensitivitySource::FiniteDifference`].
    pub fn with_finite_difference_u2(mut self) -> Result<Self> {
        let n = self.grid.len();
        let m = self.states.len();
        let pts = self.grid.points();
        let table: Vec<Vec<Vec<Rational>>> = self
            .u
            .iter()
            .map(|uo| {
                (0..n)
                    .map(|t| {
                        let (a, b) = (t.saturating_sub(1), (t + 1).min(n - 1));
                        let h = &pts[b] - &pts[a];
                        (0..m).map(|s| (&uo[b][s] - &uo[a][s]) / &h).collect()
                    })
                    .collect()
            })
            .collect();
        check_nonnegative_u2(&table, &self.outcomes)?;
        self.u2 = Some(table);
        self.u2_source = SensitivitySource::FiniteDifference;
        Ok(self)
    }

    pub fn states(&self) -> &StateSpace {
        &self.states
    }

    pub fn outcomes(&self) -> &[String] {
        &self.outcomes
    }

    pub fn phi(&self) -> &[Vec<usize>] {
        &self.phi
    }

    pub fn u(&self) -> &[Vec<Vec<Rational>>] {
        &self.u
    }

    pub fn u2(&self) -> Option<&[Vec<Vec<Rational>>]> {
        self.u2.as_deref()
    }

    pub fn u2_source(&self) -> SensitivitySource {
        self.u2_source
    }

    pub fn outcome_index(&self, label: &str) -> Option<usize> {
        self.outcomes.iter().position(|o| o == label)
    }
}

fn check_outcome_tables(name: &str, t: &[Vec<Vec<Rational>>], outcomes: &[String], n: usize, m: usize) -> Result<()> {
    if t.len() != outcomes.len() {
        return Err(Error::validation(name, format!("expected a table for each of {} outcomes", outcomes.len())));
    }
    for (o, table) in t.iter().enumerate() {
        check_table(&format!("{name}.{}", outcomes[o]), table, n, m)?;
    }
    Ok(())
}

fn check_nonnegative_u2(t: &[Vec<Vec<Rational>>], outcomes: &[String]) -> Result<()> {
    for (o, table) in t.iter().enumerate() {
        for (ti, row) in table.iter().enumerate() {
            if let Some(s) = row.iter().position(Signed::is_negative) {
                return Err(Error::validation(format!("u2.{}[{ti}][{s}]", outcomes[o]), "u2 must be non-negative"));
            }
        }
    }
    Ok(())
}

impl Mechanism for GeneralModel {
    fn grid(&self) -> &TypeGrid {
        &self.grid
    }

    fn num_states(&self) -> usize {
        self.states.len()
    }

    fn utility(&self, t: usize, report: usize, s: usize) -> Rational {
        self.u[self.phi[report][s]][t][s].clone()
    }

    fn type_sensitivity(&self, t: usize, report: usize, s: usize) -> Option<Rational> {
        self.u2.as_ref().map(|u2| u2[self.phi[report][s]][t][s].clone())
    }
}

/// Interdependent-value auction over per-agent type grids.
///
/// Tables are indexed by full type profile in row-major order (agent 0
/// most significant): `v[i][profile]`, `dv[i][profile]`, `q[i][profile]`,
/// `p[i][profile]`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AuctionModel {
    grids: Vec<TypeGrid>,
    v: Vec<Vec<Rational>>,
    dv: Vec<Vec<Rational>>,
    q: Vec<Vec<Rational>>,
    p: Vec<Vec<Rational>>,
}

impl AuctionModel {
    pub fn new(
        grids: Vec<TypeGrid>,
        v: Vec<Vec<Rational>>,
        dv: Vec<Vec<Rational>>,
        q: Vec<Vec<Rational>>,
        p: Vec<Vec<Rational>>,
    ) -> Result<Self> {
        let agents = grids.len();
        if agents == 0 {
            return Err(Error::validation("agents", "an auction needs at least one agent"));
        }
        let profiles: usize = grids.iter().map(TypeGrid::len).product();
        for (name, t) in [("v", &v), ("dv", &dv), ("q", &q), ("p", &p)] {
            check_table(name, t, agents, profiles)?;
        }
        let model = AuctionModel { grids, v, dv, q, p };
        for k in 0..profiles {
            let mut total = Rational::zero();
            for i in 0..agents {
                if !in_unit_interval(&model.q[i][k]) {
                    return Err(Error::validation(format!("q[{i}][{k}]"), "q out of [0,1]"));
                }
                if model.dv[i][k].is_negative() {
                    return Err(Error::validation(format!("dv[{i}][{k}]"), "dv must be non-negative"));
                }
                total += &model.q[i][k];
            }
            if total > Rational::one() {
                return Err(Error::validation(
                    format!("q[*][{k}]"),
                    format!("allocation overspend: total {} exceeds 1", scalar::format(&total)),
                ));
            }
        }
        for i in 0..agents {
            for k in 0..profiles {
                let mut prof = model.decode(k);
                if prof[i] + 1 < model.grids[i].len() {
                    prof[i] += 1;
                    let up = model.encode(&prof);
                    if model.v[i][up] < model.v[i][k] {
                        return Err(Error::validation(
                            format!("v[{i}][{up}]"),
                            "valuation must be non-decreasing in own type",
                        ));
                    }
                }
            }
        }
        Ok(model)
    }

    pub fn num_agents(&self) -> usize {
        self.grids.len()
    }

    pub fn grids(&self) -> &[TypeGrid] {
        &self.grids
    }

    pub fn num_profiles(&self) -> usize {
        self.grids.iter().map(TypeGrid::len).product()
    }

    pub fn v(&self) -> &[Vec<Rational>] {
        &self.v
    }

    pub fn dv(&self) -> &[Vec<Rational>] {
        &self.dv
    }

    pub fn q(&self) -> &[Vec<Rational>] {
        &self.q
    }

    pub fn p(&self) -> &[Vec<Rational>] {
        &self.p
    }

    pub fn with_payments(&self, p: Vec<Vec<Rational>>) -> Result<Self> {
        AuctionModel::new(self.grids.clone(), self.v.clone(), self.dv.clone(), self.q.clone(), p)
    }

    pub fn encode(&self, profile: &[usize]) -> usize {
        profile
            .iter()
            .zip(&self.grids)
            .fold(0, |acc, (&k, g)| acc * g.len() + k)
    }

    pub fn decode(&self, mut index: usize) -> Vec<usize> {
        let mut out = vec![0; self.grids.len()];
        for (slot, g) in out.iter_mut().zip(&self.grids).rev() {
            *slot = index % g.len();
            index /= g.len();
        }
        out
    }

    fn check_agent(&self, agent: usize) -> Result<()> {
        if agent >= self.num_agents() {
            return Err(Error::input(format!(
                "agent index {agent} out of range ({} agents)",
                self.num_agents()
            )));
        }
        Ok(())
    }

    /// Opponent profiles `t₋ᵢ` in row-major order; these are agent `i`'s states.
    pub fn opponent_profiles(&self, agent: usize) -> Result<Vec<Vec<usize>>> {
        self.check_agent(agent)?;
        let others: Vec<usize> = (0..self.num_agents()).filter(|&j| j != agent).collect();
        let mut out = vec![Vec::new()];
        for &j in &others {
            let mut next = Vec::new();
            for prefix in &out {
                for k in 0..self.grids[j].len() {
                    let mut p = prefix.clone();
                    p.push(k);
                    next.push(p);
                }
            }
            out = next;
        }
        Ok(out)
    }

    /// State space of agent `i`: one state per opponent profile.
    pub fn opponent_states(&self, agent: usize) -> Result<StateSpace> {
        let others: Vec<usize> = (0..self.num_agents()).filter(|&j| j != agent).collect();
        let profiles = self.opponent_profiles(agent)?;
        let labels = profiles
            .iter()
            .map(|prof| {
                if prof.is_empty() {
                    "none".to_string()
                } else {
                    prof.iter()
                        .zip(&others)
                        .map(|(&k, &j)| format!("t{}={}", j + 1, scalar::format(self.grids[j].value(k))))
                        .collect::<Vec<_>>()
                        .join(",")
                }
            })
            .collect();
        StateSpace::new(labels)
    }

    /// Full-profile index for agent `i` with own type `own` and opponents `opp`.
    pub fn profile_index(&self, agent: usize, own: usize, opp: &[usize]) -> usize {
        let mut prof = Vec::with_capacity(self.num_agents());
        let mut it = opp.iter();
        for j in 0..self.num_agents() {
            prof.push(if j == agent { own } else { *it.next().expect("opponent profile length") });
        }
        self.encode(&prof)
    }

    /// Per-agent slice `table[i]` rearranged to `[own type][opponent profile]`.
    pub fn agent_table(&self, table: &[Vec<Rational>], agent: usize) -> Result<Vec<Vec<Rational>>> {
        let opps = self.opponent_profiles(agent)?;
        Ok((0..self.grids[agent].len())
            .map(|own| opps.iter().map(|o| table[agent][self.profile_index(agent, own, o)].clone()).collect())
            .collect())
    }

    /// Agent `i`'s problem as a general model over opponent profiles:
    /// outcomes are the realized `(qᵢ, pᵢ)` pairs, `u = vᵢ·q - p` and
    /// `u₂ = ∂vᵢ/∂tᵢ · q`.
    pub fn agent_view(&self, agent: usize) -> Result<GeneralModel> {
        let states = self.opponent_states(agent)?;
        let grid = self.grids[agent].clone();
        let q = self.agent_table(&self.q, agent)?;
        let p = self.agent_table(&self.p, agent)?;
        let v = self.agent_table(&self.v, agent)?;
        let dv = self.agent_table(&self.dv, agent)?;
        let n = grid.len();
        let m = states.len();
        let mut outcomes = OutcomeTable::default();
        let phi: Vec<Vec<usize>> = (0..n)
            .map(|t| (0..m).map(|s| outcomes.intern(&q[t][s], &p[t][s])).collect())
            .collect();
        let mut u = Vec::new();
        let mut u2 = Vec::new();
        for (qo, po) in &outcomes.pairs {
            u.push(
                (0..n)
                    .map(|t| (0..m).map(|s| &v[t][s] * qo - po).collect())
                    .collect(),
            );
            u2.push((0..n).map(|t| (0..m).map(|s| &dv[t][s] * qo).collect()).collect());
        }
        GeneralModel::new(grid, states, outcomes.labels, phi, u, Some(u2))
    }
}

/// Indirect mechanism `Γ = (M, γ)` together with a candidate strategy.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IndirectMechanism {
    pub grid: TypeGrid,
    pub states: StateSpace,
    pub messages: Vec<String>,
    pub outcomes: Vec<String>,
    /// `gamma[message][state]` = outcome index.
    pub gamma: Vec<Vec<usize>>,
    /// Message sent by each grid type.
    pub strategy: Vec<usize>,
    /// `u[outcome][type][state]`.
    pub u: Vec<Vec<Vec<Rational>>>,
    pub u2: Option<Vec<Vec<Vec<Rational>>>>,
}

impl IndirectMechanism {
    pub fn validate(&self) -> Result<()> {
        if self.messages.is_empty() {
            return Err(Error::validation("messages", "message set is empty"));
        }
        if self.strategy.len() != self.grid.len() {
            return Err(Error::input(format!(
                "strategy covers {} of {} types",
                self.strategy.len(),
                self.grid.len()
            )));
        }
        if let Some(t) = self.strategy.iter().position(|&m| m >= self.messages.len()) {
            return Err(Error::validation(format!("strategy[{t}]"), "unknown message"));
        }
        if self.gamma.len() != self.messages.len() {
            return Err(Error::validation("gamma", "one outcome row per message is required"));
        }
        for (k, row) in self.gamma.iter().enumerate() {
            if row.len() != self.states.len() || row.iter().any(|&o| o >= self.outcomes.len()) {
                return Err(Error::validation(format!("gamma[{k}]"), "row must map every state to a valid outcome"));
            }
        }
        check_outcome_tables("u", &self.u, &self.outcomes, self.grid.len(), self.states.len())
    }
}

/// Result of [`revelation_transform`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RevelationReport {
    pub direct: GeneralModel,
    /// Whether the supplied strategy was robust in the indirect mechanism.
    pub strategy_robust: bool,
    /// First `(type, alternative message, minimizing belief)` that beats
    /// the strategy, if any.
    pub strategy_witness: Option<(usize, usize, Vec<Rational>)>,
    /// Robust truthfulness of the direct mechanism.
    pub direct_verdict: IcVerdict,
}

/// Direct mechanism `φ(t,s) = γ(m(t),s)` induced by a strategy.
///
/// When the strategy is robust in `Γ` the direct mechanism is robustly
/// truthful; both facts are checked and reported.
pub fn revelation_transform(g: &IndirectMechanism, beliefs: &BeliefMap) -> Result<RevelationReport> {
    g.validate()?;
    if beliefs.polytopes().len() != g.grid.len() || beliefs.states() != &g.states {
        return Err(Error::input("beliefs must cover every type over the mechanism's state space"));
    }
    let n = g.grid.len();
    let m = g.states.len();
    let phi: Vec<Vec<usize>> = (0..n).map(|t| g.gamma[g.strategy[t]].clone()).collect();
    let direct = GeneralModel::new(
        g.grid.clone(),
        g.states.clone(),
        g.outcomes.clone(),
        phi,
        g.u.clone(),
        g.u2.clone(),
    )?;

    let mut witness = None;
    'types: for t in 0..n {
        let chosen = g.strategy[t];
        for alt in 0..g.messages.len() {
            if alt == chosen {
                continue;
            }
            let gap: Vec<Rational> = (0..m)
                .map(|s| &g.u[g.gamma[chosen][s]][t][s] - &g.u[g.gamma[alt][s]][t][s])
                .collect();
            let worst = beliefs.get(t).minimize(&gap);
            if worst.value.is_negative() {
                witness = Some((t, alt, worst.point));
                break 'types;
            }
        }
    }
    let direct_verdict = ic::check_robust(&direct, beliefs)?;
    Ok(RevelationReport {
        direct,
        strategy_robust: witness.is_none(),
        strategy_witness: witness,
        direct_verdict,
    })
}
