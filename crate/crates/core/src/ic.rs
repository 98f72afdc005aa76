//! Incentive-compatibility and monotonicity checks.
//!
//! All comparisons are exact. The deviation gap of type `t` reporting `θ`
//! in state `s` is `U(t,t,s) - U(t,θ,s)`; ex post IC needs every gap to be
//! non-negative, interim IC needs its expectation under the type's belief
//! to be, and robust IC needs the expectation to be non-negative for every
//! belief in `Π(t)`, which is one LP per `(t, θ)` pair.

use num_traits::{Signed, Zero};
use rayon::prelude::*;

use crate::beliefs::{intersect, BeliefMap, BeliefPolytope};
use crate::error::{Error, Result};
use crate::models::{AuctionModel, GeneralModel, Mechanism, QuasilinearModel};
use crate::scalar::{dot, Rational};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum IcMode {
    ExPost,
    Interim,
    Robust,
}

impl IcMode {
    pub fn as_str(self) -> &'static str {
        match self {
            IcMode::ExPost => "expost",
            IcMode::Interim => "interim",
            IcMode::Robust => "robust",
        }
    }

    pub fn parse(s: &str) -> Option<IcMode> {
        match s {
            "expost" => Some(IcMode::ExPost),
            "interim" => Some(IcMode::Interim),
            "robust" => Some(IcMode::Robust),
            _ => None,
        }
    }
}

/// Where a check failed. Indices refer to the type grid and state space.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum IcWitness {
    ExPost { t: usize, report: usize, state: usize },
    /// `belief` is the type's reference belief (interim) or the minimizing
    /// vertex of `Π(t)` (robust).
    Belief { t: usize, report: usize, belief: Vec<Rational> },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IcVerdict {
    pub mode: IcMode,
    pub pass: bool,
    pub witness: Option<IcWitness>,
    /// Worst truth-minus-deviation gap over all pairs (at most zero, since
    /// truthful "deviations" have gap zero).
    pub slack: Rational,
}

fn gap_vector<M: Mechanism + ?Sized>(m: &M, t: usize, report: usize) -> Vec<Rational> {
    (0..m.num_states())
        .map(|s| m.utility(t, t, s) - m.utility(t, report, s))
        .collect()
}

/// Keeps the smallest value, and among equal values the first one seen.
/// Callers feed candidates in lexicographic order, so the witness is the
/// lexicographically smallest violator attaining the worst gap.
struct Worst<W> {
    slack: Rational,
    witness: Option<W>,
}

impl<W> Worst<W> {
    fn new() -> Self {
        Worst {
            slack: Rational::zero(),
            witness: None,
        }
    }

    fn offer(&mut self, value: Rational, witness: impl FnOnce() -> W) {
        if value < self.slack {
            self.slack = value;
            self.witness = Some(witness());
        }
    }
}

fn verdict(mode: IcMode, worst: Worst<IcWitness>) -> IcVerdict {
    IcVerdict {
        mode,
        pass: worst.witness.is_none(),
        witness: worst.witness,
        slack: worst.slack,
    }
}

pub fn check_expost<M: Mechanism + ?Sized>(m: &M) -> IcVerdict {
    let n = m.num_types();
    let mut worst = Worst::new();
    for t in 0..n {
        for report in 0..n {
            for (state, g) in gap_vector(m, t, report).into_iter().enumerate() {
                worst.offer(g, || IcWitness::ExPost { t, report, state });
            }
        }
    }
    verdict(IcMode::ExPost, worst)
}

/// Interim check against one belief per type.
pub fn check_interim<M: Mechanism + ?Sized>(m: &M, beliefs: &[Vec<Rational>]) -> Result<IcVerdict> {
    let n = m.num_types();
    if beliefs.len() != n || beliefs.iter().any(|b| b.len() != m.num_states()) {
        return Err(Error::input("interim check needs one belief over the state space per type"));
    }
    let mut worst = Worst::new();
    for t in 0..n {
        for report in 0..n {
            let value = dot(&beliefs[t], &gap_vector(m, t, report));
            worst.offer(value, || IcWitness::Belief {
                t,
                report,
                belief: beliefs[t].clone(),
            });
        }
    }
    Ok(verdict(IcMode::Interim, worst))
}

fn check_map_shape<M: Mechanism + ?Sized>(m: &M, beliefs: &BeliefMap) -> Result<()> {
    if beliefs.polytopes().len() != m.num_types() || beliefs.states().len() != m.num_states() {
        return Err(Error::input(format!(
            "beliefs cover {} types over {} states; the model has {} types and {} states",
            beliefs.polytopes().len(),
            beliefs.states().len(),
            m.num_types(),
            m.num_states()
        )));
    }
    Ok(())
}

/// `min_{π ∈ P} π·w` with the minimizing vertex, skipping the LP when every
/// entry of `w` is already non-negative (then the minimum cannot be below
/// zero and never decides a verdict).
fn worst_expectation(p: &BeliefPolytope, w: &[Rational]) -> Option<(Rational, Vec<Rational>)> {
    if w.iter().all(|x| !x.is_negative()) {
        return None;
    }
    let e = p.minimize(w);
    Some((e.value, e.point))
}

pub fn check_robust<M: Mechanism + Sync + ?Sized>(m: &M, beliefs: &BeliefMap) -> Result<IcVerdict> {
    check_map_shape(m, beliefs)?;
    let n = m.num_types();
    let pairs: Vec<(usize, usize)> = (0..n)
        .flat_map(|t| (0..n).filter(move |&r| r != t).map(move |r| (t, r)))
        .collect();
    // Independent LPs; `collect` keeps pair order, so the merge below is
    // deterministic whatever order the workers finish in.
    let minima: Vec<Option<(Rational, Vec<Rational>)>> = pairs
        .par_iter()
        .map(|&(t, r)| worst_expectation(beliefs.get(t), &gap_vector(m, t, r)))
        .collect();
    let mut worst = Worst::new();
    for (&(t, report), found) in pairs.iter().zip(minima) {
        if let Some((value, belief)) = found {
            worst.offer(value, || IcWitness::Belief { t, report, belief });
        }
    }
    Ok(verdict(IcMode::Robust, worst))
}

/// Dispatches on `mode`. Interim mode takes the belief map's sets, which
/// must all be single points.
pub fn check_ic<M: Mechanism + Sync + ?Sized>(m: &M, mode: IcMode, beliefs: Option<&BeliefMap>) -> Result<IcVerdict> {
    match mode {
        IcMode::ExPost => Ok(check_expost(m)),
        IcMode::Robust => {
            let b = beliefs.ok_or_else(|| Error::input("robust mode needs beliefs"))?;
            check_robust(m, b)
        }
        IcMode::Interim => {
            let b = beliefs.ok_or_else(|| Error::input("interim mode needs beliefs"))?;
            check_map_shape(m, b)?;
            let points = b
                .polytopes()
                .iter()
                .enumerate()
                .map(|(t, p)| {
                    p.as_point()
                        .ok_or_else(|| Error::input(format!("interim mode needs a single belief for type {t}")))
                })
                .collect::<Result<Vec<_>>>()?;
            check_interim(m, &points)
        }
    }
}

/// One verdict per bidder, each computed on that bidder's view.
/// `beliefs[i]` is bidder `i`'s belief map over opponent profiles.
pub fn check_auction_ic(a: &AuctionModel, mode: IcMode, beliefs: Option<&[BeliefMap]>) -> Result<Vec<IcVerdict>> {
    if let Some(b) = beliefs {
        if b.len() != a.num_agents() {
            return Err(Error::input(format!(
                "expected a belief map for each of {} agents, found {}",
                a.num_agents(),
                b.len()
            )));
        }
    }
    (0..a.num_agents())
        .map(|i| {
            let view = a.agent_view(i)?;
            check_ic(&view, mode, beliefs.map(|b| &b[i]))
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum MonotonicityKind {
    ExPostAllocation,
    TypeSensitivity,
}

impl MonotonicityKind {
    pub fn as_str(self) -> &'static str {
        match self {
            MonotonicityKind::ExPostAllocation => "expost_allocation",
            MonotonicityKind::TypeSensitivity => "type_sensitivity",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum MonotonicityWitness {
    /// `q(upper, s) < q(lower, s)` with `lower < upper`; `agent` is set for auctions.
    Allocation {
        agent: Option<usize>,
        lower: usize,
        upper: usize,
        state: usize,
    },
    /// `u₂(φ(upper,s), t, s) < u₂(φ(lower,s), t, s)`.
    Sensitivity {
        t: usize,
        lower: usize,
        upper: usize,
        state: usize,
    },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MonotonicityVerdict {
    pub kind: MonotonicityKind,
    pub pass: bool,
    pub witness: Option<MonotonicityWitness>,
}

#[derive(Debug, Clone, Copy)]
pub enum ModelRef<'a> {
    Quasilinear(&'a QuasilinearModel),
    Auction(&'a AuctionModel),
    General(&'a GeneralModel),
}

/// First `(lower, upper, s)` with `table[upper][s] < table[lower][s]`.
pub(crate) fn first_decrease(table: &[Vec<Rational>]) -> Option<(usize, usize, usize)> {
    let n = table.len();
    for lower in 0..n {
        for upper in lower + 1..n {
            if let Some(s) = (0..table[lower].len()).find(|&s| table[upper][s] < table[lower][s]) {
                return Some((lower, upper, s));
            }
        }
    }
    None
}

pub fn check_monotonicity(model: ModelRef<'_>, kind: MonotonicityKind) -> Result<MonotonicityVerdict> {
    let witness = match (kind, model) {
        (MonotonicityKind::ExPostAllocation, ModelRef::Quasilinear(m)) => {
            first_decrease(m.q()).map(|(lower, upper, state)| MonotonicityWitness::Allocation {
                agent: None,
                lower,
                upper,
                state,
            })
        }
        (MonotonicityKind::ExPostAllocation, ModelRef::Auction(a)) => {
            let mut found = None;
            for i in 0..a.num_agents() {
                if let Some((lower, upper, state)) = first_decrease(&a.agent_table(a.q(), i)?) {
                    found = Some(MonotonicityWitness::Allocation {
                        agent: Some(i),
                        lower,
                        upper,
                        state,
                    });
                    break;
                }
            }
            found
        }
        (MonotonicityKind::TypeSensitivity, ModelRef::General(g)) => sensitivity_decrease(g)?,
        (MonotonicityKind::ExPostAllocation, ModelRef::General(_)) => {
            return Err(Error::input("allocation monotonicity needs a quasilinear or auction model"))
        }
        (MonotonicityKind::TypeSensitivity, _) => {
            return Err(Error::input("type-sensitivity monotonicity needs a general model with u2"))
        }
    };
    Ok(MonotonicityVerdict {
        kind,
        pass: witness.is_none(),
        witness,
    })
}

fn sensitivity_decrease(g: &GeneralModel) -> Result<Option<MonotonicityWitness>> {
    if g.u2().is_none() {
        return Err(Error::input("type-sensitivity monotonicity needs a u2 table"));
    }
    let n = g.num_types();
    for t in 0..n {
        let table: Vec<Vec<Rational>> = (0..n)
            .map(|r| {
                (0..g.num_states())
                    .map(|s| g.type_sensitivity(t, r, s).expect("u2 present"))
                    .collect()
            })
            .collect();
        if let Some((lower, upper, state)) = first_decrease(&table) {
            return Ok(Some(MonotonicityWitness::Sensitivity { t, lower, upper, state }));
        }
    }
    Ok(None)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Clause {
    CommonBelief,
    Independent,
    Overlapping,
    Unrestricted,
}

impl Clause {
    pub fn as_str(self) -> &'static str {
        match self {
            Clause::CommonBelief => "common_belief",
            Clause::Independent => "independent",
            Clause::Overlapping => "overlapping",
            Clause::Unrestricted => "unrestricted",
        }
    }
}

/// `E_π[q(upper) - q(lower)] < 0` for the reported `π`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PairWitness {
    pub lower: usize,
    pub upper: usize,
    pub belief: Vec<Rational>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClauseReport {
    pub clause: Clause,
    /// Whether the clause's belief hypothesis holds.
    pub applicable: bool,
    /// Outcome of the monotonicity test; `None` when there was nothing to test.
    pub pass: Option<bool>,
    pub witness: Option<PairWitness>,
    /// Inclusive type ranges whose windowed intersection was empty (overlap clause only).
    pub empty_windows: Vec<(usize, usize)>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MonotonicityReport {
    pub robust: IcVerdict,
    pub clauses: Vec<ClauseReport>,
}

/// First pair `lower < upper` inside `range` whose expected allocation
/// drops somewhere on `p`.
fn expected_decrease(q: &[Vec<Rational>], range: std::ops::RangeInclusive<usize>, p: &BeliefPolytope) -> Option<PairWitness> {
    let (lo, hi) = (*range.start(), *range.end());
    for lower in lo..=hi {
        for upper in lower + 1..=hi {
            let w: Vec<Rational> = q[upper].iter().zip(&q[lower]).map(|(a, b)| a - b).collect();
            if let Some((value, belief)) = worst_expectation(p, &w) {
                if value.is_negative() {
                    return Some(PairWitness { lower, upper, belief });
                }
            }
        }
    }
    None
}

fn tested(clause: Clause, applicable: bool, witness: Option<PairWitness>) -> ClauseReport {
    ClauseReport {
        clause,
        applicable,
        pass: Some(witness.is_none()),
        witness,
        empty_windows: Vec::new(),
    }
}

fn untested(clause: Clause) -> ClauseReport {
    ClauseReport {
        clause,
        applicable: false,
        pass: None,
        witness: None,
        empty_windows: Vec::new(),
    }
}

/// Checks the four belief-structure clauses linking robust IC to
/// monotonicity of `q`. Every clause whose hypothesis holds is tested; the
/// overlap clause also tests each nonempty window when overlap fails
/// somewhere, and lists the empty ones.
pub fn monotonicity_implications(model: &QuasilinearModel, beliefs: &BeliefMap, window: usize) -> Result<MonotonicityReport> {
    let robust = check_robust(model, beliefs)?;
    let profile = beliefs.overlap_profile(window)?;
    let q = model.q();
    let n = q.len();
    let all: Vec<&BeliefPolytope> = beliefs.polytopes().iter().collect();

    let common = match intersect(&all)? {
        Some(p) => tested(Clause::CommonBelief, true, expected_decrease(q, 0..=n - 1, &p)),
        None => untested(Clause::CommonBelief),
    };

    let independent = if profile.independent {
        tested(Clause::Independent, true, expected_decrease(q, 0..=n - 1, beliefs.get(0)))
    } else {
        untested(Clause::Independent)
    };

    let mut overlapping = ClauseReport {
        clause: Clause::Overlapping,
        applicable: profile.overlapping,
        pass: None,
        witness: None,
        empty_windows: Vec::new(),
    };
    for r in &profile.records {
        if !r.nonempty {
            overlapping.empty_windows.push((r.lo, r.hi));
            continue;
        }
        let members: Vec<&BeliefPolytope> = all[r.lo..=r.hi].to_vec();
        let p = intersect(&members)?.expect("window recorded as nonempty");
        overlapping.pass = Some(true);
        if let Some(w) = expected_decrease(q, r.lo..=r.hi, &p) {
            overlapping.pass = Some(false);
            overlapping.witness = Some(w);
            break;
        }
    }

    let states = beliefs.states().clone();
    let simplex = BeliefPolytope::simplex(states.clone());
    let unrestricted = if beliefs.polytopes().iter().all(|p| p.set_equals(&simplex)) {
        let v = check_monotonicity(ModelRef::Quasilinear(model), MonotonicityKind::ExPostAllocation)?;
        let witness = v.witness.map(|w| match w {
            MonotonicityWitness::Allocation { lower, upper, state, .. } => {
                let mut belief = vec![Rational::zero(); states.len()];
                belief[state] = num_traits::One::one();
                PairWitness { lower, upper, belief }
            }
            MonotonicityWitness::Sensitivity { .. } => unreachable!("allocation check"),
        });
        tested(Clause::Unrestricted, true, witness)
    } else {
        untested(Clause::Unrestricted)
    };

    Ok(MonotonicityReport {
        robust,
        clauses: vec![common, independent, overlapping, unrestricted],
    })
}
