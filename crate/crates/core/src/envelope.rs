//! Ex post envelope checks, the envelope/monotonicity pipeline and payment
//! comparison between mechanisms sharing an allocation rule.
//!
//! The envelope residual of a pair `t' < t''` in state `s` is
//! `U(t'',s) - U(t',s)` minus the composite trapezoid sum of the integrand
//! (`q`, `∂vᵢ/∂tᵢ·qᵢ` or `u₂`) along the grid between them. Residuals are
//! exact; only the verdict uses the tolerance `τ`.

use num_traits::{Signed, Zero};

use crate::beliefs::{BeliefMap, OverlapProfile};
use crate::error::{Error, Result};
use crate::ic::{self, ModelRef, MonotonicityKind, MonotonicityVerdict, IcVerdict};
use crate::models::{AuctionModel, Mechanism, QuasilinearModel};
use crate::scalar::{self, Rational};

pub const TRAPEZOID: &str = "trapezoid";

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Residual {
    pub lower: usize,
    pub upper: usize,
    pub state: usize,
    pub value: Rational,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EnvelopeReport {
    pub rule: &'static str,
    pub tau: Rational,
    /// All pairs `lower < upper`, ordered by `(lower, upper, state)`.
    pub residuals: Vec<Residual>,
    pub max_abs: Rational,
    /// Location of the largest `|residual|`; ties go to the widest span,
    /// then the lowest starting type, then the lowest state.
    pub argmax: Option<(usize, usize, usize)>,
    pub pass: bool,
}

/// Envelope check with the default tolerance of one grid step when `tau`
/// is `None`.
pub fn check_envelope<M: Mechanism + ?Sized>(m: &M, tau: Option<Rational>) -> Result<EnvelopeReport> {
    let tau = tau.unwrap_or_else(|| m.grid().max_step());
    if tau.is_negative() {
        return Err(Error::input("tau must be non-negative"));
    }
    let n = m.num_types();
    let pts = m.grid().points();
    let mut residuals = Vec::new();
    for s in 0..m.num_states() {
        let value: Vec<Rational> = (0..n).map(|t| m.utility(t, t, s)).collect();
        let integrand = (0..n)
            .map(|t| {
                m.type_sensitivity(t, t, s)
                    .ok_or_else(|| Error::input("envelope check needs a type-sensitivity table"))
            })
            .collect::<Result<Vec<_>>>()?;
        // cumulative[k] = trapezoid sum from t₁ to t_k.
        let mut cumulative = vec![Rational::zero()];
        for k in 1..n {
            let step = (&pts[k] - &pts[k - 1]) * (&integrand[k - 1] + &integrand[k]) / Rational::from_integer(2.into());
            let next = &cumulative[k - 1] + step;
            cumulative.push(next);
        }
        for lower in 0..n {
            for upper in lower + 1..n {
                residuals.push(Residual {
                    lower,
                    upper,
                    state: s,
                    value: (&value[upper] - &value[lower]) - (&cumulative[upper] - &cumulative[lower]),
                });
            }
        }
    }
    residuals.sort_by_key(|r| (r.lower, r.upper, r.state));

    let mut max_abs = Rational::zero();
    let mut argmax: Option<(usize, usize, usize)> = None;
    let rank = |(lo, hi, s): (usize, usize, usize)| (std::cmp::Reverse(hi - lo), lo, s);
    for r in &residuals {
        let a = r.value.abs();
        let key = (r.lower, r.upper, r.state);
        let better = match &argmax {
            None => true,
            Some(cur) => a > max_abs || (a == max_abs && rank(key) < rank(*cur)),
        };
        if better {
            max_abs = a;
            argmax = Some(key);
        }
    }
    Ok(EnvelopeReport {
        rule: TRAPEZOID,
        pass: max_abs <= tau,
        tau,
        residuals,
        max_abs,
        argmax,
    })
}

/// One report per bidder, computed on the bidder's view (integrand `dvᵢ·qᵢ`).
pub fn check_auction_envelope(a: &AuctionModel, tau: Option<Rational>) -> Result<Vec<EnvelopeReport>> {
    (0..a.num_agents())
        .map(|i| check_envelope(&a.agent_view(i)?, tau.clone()))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum LinkStatus {
    /// Hypotheses and conclusion both hold.
    Confirmed,
    /// Some hypothesis fails, so nothing is predicted.
    Vacuous,
    /// Hypotheses hold but the conclusion does not: a red alert.
    Broken,
}

impl LinkStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            LinkStatus::Confirmed => "confirmed",
            LinkStatus::Vacuous => "vacuous",
            LinkStatus::Broken => "broken",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LinkReport {
    pub name: &'static str,
    pub hypotheses: bool,
    pub conclusion: bool,
    pub status: LinkStatus,
}

fn link(name: &'static str, hypotheses: bool, conclusion: bool) -> LinkReport {
    let status = match (hypotheses, conclusion) {
        (false, _) => LinkStatus::Vacuous,
        (true, true) => LinkStatus::Confirmed,
        (true, false) => LinkStatus::Broken,
    };
    LinkReport {
        name,
        hypotheses,
        conclusion,
        status,
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PipelineReport {
    /// Bidder index for auctions.
    pub agent: Option<usize>,
    pub overlap: OverlapProfile,
    pub robust: IcVerdict,
    pub envelope: EnvelopeReport,
    pub monotone: MonotonicityVerdict,
    pub expost: IcVerdict,
    pub links: Vec<LinkReport>,
    pub red_alert: bool,
    pub notes: Vec<String>,
}

pub const LINK_ENVELOPE: &str = "fully_overlapping & robust_ic => envelope";
pub const LINK_EXPOST: &str = "fully_overlapping & robust_ic & monotone => expost_ic";

/// Runs overlap, robust IC, envelope, monotonicity and ex post IC on one
/// model and grades the predicted implication chain. `beliefs` holds one
/// map per bidder for auctions and a single map otherwise.
pub fn envelope_pipeline(
    model: ModelRef<'_>,
    beliefs: &[BeliefMap],
    window: usize,
    tau: Option<Rational>,
) -> Result<Vec<PipelineReport>> {
    match model {
        ModelRef::Quasilinear(m) => {
            let b = single_map(beliefs)?;
            let mono = ic::check_monotonicity(model, MonotonicityKind::ExPostAllocation)?;
            Ok(vec![pipeline_one(m, None, b, window, tau, mono)?])
        }
        ModelRef::General(g) => {
            let b = single_map(beliefs)?;
            let mono = ic::check_monotonicity(model, MonotonicityKind::TypeSensitivity)?;
            Ok(vec![pipeline_one(g, None, b, window, tau, mono)?])
        }
        ModelRef::Auction(a) => {
            if beliefs.len() != a.num_agents() {
                return Err(Error::input(format!(
                    "expected a belief map for each of {} agents, found {}",
                    a.num_agents(),
                    beliefs.len()
                )));
            }
            (0..a.num_agents())
                .map(|i| {
                    let view = a.agent_view(i)?;
                    let q = a.agent_table(a.q(), i)?;
                    let mono = allocation_monotone(&q, i);
                    pipeline_one(&view, Some(i), &beliefs[i], window, tau.clone(), mono)
                })
                .collect()
        }
    }
}

fn single_map(beliefs: &[BeliefMap]) -> Result<&BeliefMap> {
    match beliefs {
        [b] => Ok(b),
        _ => Err(Error::input(format!("expected one belief map, found {}", beliefs.len()))),
    }
}

fn allocation_monotone(q: &[Vec<Rational>], agent: usize) -> MonotonicityVerdict {
    let witness = ic::first_decrease(q).map(|(lower, upper, state)| ic::MonotonicityWitness::Allocation {
        agent: Some(agent),
        lower,
        upper,
        state,
    });
    MonotonicityVerdict {
        kind: MonotonicityKind::ExPostAllocation,
        pass: witness.is_none(),
        witness,
    }
}

fn pipeline_one<M: Mechanism + Sync + ?Sized>(
    m: &M,
    agent: Option<usize>,
    beliefs: &BeliefMap,
    window: usize,
    tau: Option<Rational>,
    monotone: MonotonicityVerdict,
) -> Result<PipelineReport> {
    let overlap = beliefs.overlap_profile(window)?;
    let robust = ic::check_robust(m, beliefs)?;
    let envelope = check_envelope(m, tau)?;
    let expost = ic::check_expost(m);
    let full = overlap.fully_overlapping;

    let links = vec![
        link(LINK_ENVELOPE, full && robust.pass, envelope.pass),
        link(LINK_EXPOST, full && robust.pass && monotone.pass, expost.pass),
    ];
    let red_alert = links.iter().any(|l| l.status == LinkStatus::Broken);

    let step = m.grid().max_step();
    let mut notes = Vec::new();
    if !robust.pass {
        notes.push(format!(
            "robust IC fails (slack {}), so the chain is vacuous; the envelope check {} with max residual {}",
            scalar::format(&robust.slack),
            if envelope.pass { "passes" } else { "fails" },
            scalar::format(&envelope.max_abs)
        ));
    } else if !full {
        notes.push(format!(
            "beliefs are not fully overlapping, so robust IC does not force the envelope condition; envelope {}",
            if envelope.pass { "passes anyway" } else { "fails, which this permits" }
        ));
    }
    if links[0].status == LinkStatus::Broken {
        if envelope.max_abs <= step {
            notes.push(format!(
                "envelope residual {} is within one grid step ({}): discretization artifact, refine the grid or raise tau",
                scalar::format(&envelope.max_abs),
                scalar::format(&step)
            ));
        } else {
            notes.push(format!(
                "envelope residual {} exceeds one grid step ({}): the tables are inconsistent with the model",
                scalar::format(&envelope.max_abs),
                scalar::format(&step)
            ));
        }
    }
    if links[1].status == LinkStatus::Broken {
        notes.push(format!(
            "ex post IC fails (slack {}) although its hypotheses hold; the integrand is not integrated exactly on this grid",
            scalar::format(&expost.slack)
        ));
    }
    Ok(PipelineReport {
        agent,
        overlap,
        robust,
        envelope,
        monotone,
        expost,
        links,
        red_alert,
        notes,
    })
}

/// Where two payment rules differ by more than a state-dependent constant.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OffsetWitness {
    pub state: usize,
    pub lower: usize,
    pub upper: usize,
}

/// Result of the indifference test for one type.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Indifference {
    pub t: usize,
    /// Extremes over `Π(t)` of the expected payment difference.
    pub min: Rational,
    pub max: Rational,
    pub holds: bool,
    /// When indifference holds: whether the offset is identically zero.
    pub offset_zero: Option<bool>,
}

/// `offsets[s] = p̃(t₁,s) - p(t₁,s)`; consistent when the difference does
/// not depend on the own type.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PaymentOffset {
    pub agent: Option<usize>,
    pub offsets: Vec<Rational>,
    pub consistent: bool,
    pub witness: Option<OffsetWitness>,
    pub indifference: Option<Indifference>,
}

fn offset_from_tables(
    p: &[Vec<Rational>],
    p_tilde: &[Vec<Rational>],
    agent: Option<usize>,
    beliefs: Option<&BeliefMap>,
    indifferent_type: Option<usize>,
) -> Result<PaymentOffset> {
    let diff: Vec<Vec<Rational>> = p_tilde
        .iter()
        .zip(p)
        .map(|(a, b)| a.iter().zip(b).map(|(x, y)| x - y).collect())
        .collect();
    let offsets = diff[0].clone();
    let mut witness = None;
    'scan: for s in 0..offsets.len() {
        for (t, row) in diff.iter().enumerate().skip(1) {
            if row[s] != offsets[s] {
                witness = Some(OffsetWitness { state: s, lower: 0, upper: t });
                break 'scan;
            }
        }
    }
    let indifference = match indifferent_type {
        None => None,
        Some(t) => {
            let b = beliefs.ok_or_else(|| Error::input("indifference check needs beliefs"))?;
            if t >= diff.len() || b.polytopes().len() != diff.len() || b.states().len() != offsets.len() {
                return Err(Error::input(format!("type index {t} or beliefs do not match the payment tables")));
            }
            let min = b.get(t).minimize(&diff[t]).value;
            let max = b.get(t).maximize(&diff[t]).value;
            let holds = min.is_zero() && max.is_zero();
            Some(Indifference {
                t,
                holds,
                offset_zero: holds.then(|| witness.is_none() && offsets.iter().all(Zero::is_zero)),
                min,
                max,
            })
        }
    };
    Ok(PaymentOffset {
        agent,
        consistent: witness.is_none(),
        offsets,
        witness,
        indifference,
    })
}

/// Compares `b`'s payments against `a`'s; both must share grid, states and `q`.
pub fn compare_payments(
    a: &QuasilinearModel,
    b: &QuasilinearModel,
    beliefs: Option<&BeliefMap>,
    indifferent_type: Option<usize>,
) -> Result<PaymentOffset> {
    if a.grid() != b.grid() || a.states() != b.states() {
        return Err(Error::input("mechanisms must share the type grid and state space"));
    }
    if a.q() != b.q() {
        return Err(Error::input("mechanisms must have identical allocation tables"));
    }
    offset_from_tables(a.p(), b.p(), None, beliefs, indifferent_type)
}

/// Per-bidder comparison; offsets are indexed by opponent profile.
pub fn compare_auction_payments(
    a: &AuctionModel,
    b: &AuctionModel,
    beliefs: Option<&[BeliefMap]>,
    indifferent_type: Option<usize>,
) -> Result<Vec<PaymentOffset>> {
    if a.grids() != b.grids() {
        return Err(Error::input("auctions must share agents and type grids"));
    }
    if a.q() != b.q() {
        return Err(Error::input("auctions must have identical allocation tables"));
    }
    if let Some(bs) = beliefs {
        if bs.len() != a.num_agents() {
            return Err(Error::input("expected one belief map per agent"));
        }
    }
    (0..a.num_agents())
        .map(|i| {
            let p = a.agent_table(a.p(), i)?;
            let pt = b.agent_table(b.p(), i)?;
            offset_from_tables(&p, &pt, Some(i), beliefs.map(|bs| &bs[i]), indifferent_type)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::beliefs::StateSpace;
    use crate::grid::TypeGrid;
    use crate::scalar::{int, rat};

    fn model(q: Vec<Vec<Rational>>, p: Vec<Vec<Rational>>) -> QuasilinearModel {
        let n = q.len();
        let m = q[0].len();
        QuasilinearModel::new(TypeGrid::uniform(n).unwrap(), StateSpace::numbered(m).unwrap(), q, p).unwrap()
    }

    #[test]
    fn constant_mechanism_is_exact() {
        let m = model(vec![vec![rat(1, 3)]; 4], vec![vec![rat(1, 5)]; 4]);
        let r = check_envelope(&m, Some(int(0))).unwrap();
        assert!(r.pass);
        assert!(r.residuals.iter().all(|x| x.value.is_zero()));
        assert_eq!(r.residuals.len(), 6);
    }

    #[test]
    fn negative_tau_is_rejected() {
        let m = model(vec![vec![int(1)]; 2], vec![vec![int(0)]; 2]);
        assert!(matches!(check_envelope(&m, Some(int(-1))), Err(Error::Input(_))));
    }

    #[test]
    fn default_tau_is_one_grid_step() {
        let m = model(vec![vec![int(1)]; 3], vec![vec![int(0)]; 3]);
        assert_eq!(check_envelope(&m, None).unwrap().tau, rat(1, 2));
    }

    #[test]
    fn constructed_offset_is_recovered() {
        let q = vec![vec![int(1), int(0)]; 3];
        let p = vec![vec![int(0), int(1)]; 3];
        let a = model(q.clone(), p.clone());
        let shifted: Vec<Vec<Rational>> = p.iter().map(|r| vec![&r[0] + int(1), &r[1] - int(2)]).collect();
        let b = model(q.clone(), shifted);
        let off = compare_payments(&a, &b, None, None).unwrap();
        assert!(off.consistent);
        assert_eq!(off.offsets, vec![int(1), int(-2)]);

        let typed: Vec<Vec<Rational>> = p
            .iter()
            .enumerate()
            .map(|(t, r)| r.iter().map(|x| x + rat(t as i64, 2)).collect())
            .collect();
        let c = model(q.clone(), typed);
        let off = compare_payments(&a, &c, None, None).unwrap();
        assert!(!off.consistent);
        assert_eq!(off.witness, Some(OffsetWitness { state: 0, lower: 0, upper: 1 }));

        let other = model(vec![vec![int(0), int(0)]; 3], p);
        assert!(matches!(compare_payments(&a, &other, None, None), Err(Error::Input(_))));
    }
}
