//! Surplus extraction over finitely many types with polytope beliefs.
//!
//! Menus are state-contingent payment vectors `c(t)`. Type `t` holding
//! belief `π` keeps surplus `v(t) - π·c(t')` when it picks contract `t'`.

use num_traits::{One, Signed, Zero};
use rayon::prelude::*;

use crate::beliefs::{intersect, BeliefMap, BeliefPolytope, StateSpace};
use crate::error::{Error, Result};
use crate::lp::{self, LpProblem, LpSolution, Relation, Sense};
use crate::scalar::{self, Rational};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExtractionInstance {
    labels: Vec<String>,
    values: Vec<Rational>,
    beliefs: Vec<BeliefPolytope>,
}

impl ExtractionInstance {
    pub fn new(labels: Vec<String>, values: Vec<Rational>, beliefs: Vec<BeliefPolytope>) -> Result<Self> {
        if labels.is_empty() {
            return Err(Error::validation("types", "at least one type is required"));
        }
        if values.len() != labels.len() {
            return Err(Error::validation("v", format!("expected {} values, found {}", labels.len(), values.len())));
        }
        if beliefs.len() != labels.len() {
            return Err(Error::validation(
                "beliefs",
                format!("expected {} belief sets, found {}", labels.len(), beliefs.len()),
            ));
        }
        if beliefs.iter().any(|b| b.states() != beliefs[0].states()) {
            return Err(Error::validation("beliefs", "all belief sets must share one state space"));
        }
        Ok(ExtractionInstance { labels, values, beliefs })
    }

    /// Types are the grid points of the map, labelled by their values.
    pub fn from_map(values: Vec<Rational>, map: &BeliefMap) -> Result<Self> {
        let labels = map.grid().points().iter().map(scalar::format).collect();
        ExtractionInstance::new(labels, values, map.polytopes().to_vec())
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn values(&self) -> &[Rational] {
        &self.values
    }

    pub fn beliefs(&self) -> &[BeliefPolytope] {
        &self.beliefs
    }

    pub fn states(&self) -> &StateSpace {
        self.beliefs[0].states()
    }

    pub fn num_types(&self) -> usize {
        self.labels.len()
    }

    fn num_states(&self) -> usize {
        self.states().len()
    }
}

/// Adds `x ∈ μ·P` over variables `x = vars[x0..x0+m]` and `μ = vars[mu]`:
/// `a·x <= μ·b` per row and `1·x = μ` (with `x >= 0` from the default bounds).
fn add_scaled_membership(lp: &mut LpProblem, p: &BeliefPolytope, x0: usize, mu: usize) {
    let m = p.dim();
    for h in p.halfspaces() {
        let mut terms: Vec<(usize, Rational)> = h.coeffs.iter().enumerate().map(|(s, a)| (x0 + s, a.clone())).collect();
        terms.push((mu, -h.rhs.clone()));
        lp.add_sparse(&terms, Relation::Le, Rational::zero());
    }
    let mut terms: Vec<(usize, Rational)> = (0..m).map(|s| (x0 + s, Rational::one())).collect();
    terms.push((mu, -Rational::one()));
    lp.add_sparse(&terms, Relation::Eq, Rational::zero());
}

fn solve(lp: &LpProblem) -> LpSolution {
    let sol = lp::solve_lp(lp).expect("extraction LPs are well formed");
    debug_assert!(sol.verify(lp).is_ok());
    sol
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PiViolation {
    pub anchor: usize,
    pub mu: Vec<Rational>,
    /// `π²(t) = x_t / μ_t` where `μ_t > 0`.
    pub selections: Vec<Option<Vec<Rational>>>,
    /// `π¹(anchor) = Σ_t μ_t π²(t)`, a member of the anchor's set.
    pub anchor_belief: Vec<Rational>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PiReport {
    pub holds: bool,
    /// Optimal `1 - μ_anchor` per anchor.
    pub optima: Vec<Rational>,
    /// Violation at the first anchor with a positive optimum.
    pub violation: Option<PiViolation>,
}

/// For each anchor `t₀`, maximizes `1 - μ_{t₀}` over mixtures
/// `Σ_t μ_t π²(t)` landing in `Π(t₀)`, with `x_t = μ_t π²(t)` keeping the
/// program linear. The condition holds iff every optimum is zero.
pub fn check_probabilistic_independence(inst: &ExtractionInstance) -> PiReport {
    let k = inst.num_types();
    let m = inst.num_states();
    let width = m + 1;
    let results: Vec<(Rational, Vec<Rational>)> = (0..k)
        .into_par_iter()
        .map(|anchor| {
            let mut objective = vec![Rational::zero(); k * width];
            for t in (0..k).filter(|&t| t != anchor) {
                objective[t * width + m] = Rational::one();
            }
            let mut lp = LpProblem::new(Sense::Maximize, objective);
            for (t, p) in inst.beliefs.iter().enumerate() {
                add_scaled_membership(&mut lp, p, t * width, t * width + m);
            }
            let mass: Vec<(usize, Rational)> = (0..k).map(|t| (t * width + m, Rational::one())).collect();
            lp.add_sparse(&mass, Relation::Eq, Rational::one());
            for h in inst.beliefs[anchor].halfspaces() {
                let terms: Vec<(usize, Rational)> = (0..k)
                    .flat_map(|t| h.coeffs.iter().enumerate().map(move |(s, a)| (t * width + s, a.clone())))
                    .collect();
                lp.add_sparse(&terms, Relation::Le, h.rhs.clone());
            }
            let sol = solve(&lp);
            (sol.value.expect("the anchor alone is feasible"), sol.primal)
        })
        .collect();

    let optima: Vec<Rational> = results.iter().map(|(v, _)| v.clone()).collect();
    let violation = results.iter().enumerate().find(|(_, (v, _))| v.is_positive()).map(|(anchor, (_, x))| {
        let mu: Vec<Rational> = (0..k).map(|t| x[t * width + m].clone()).collect();
        let selections = (0..k)
            .map(|t| {
                (!mu[t].is_zero()).then(|| x[t * width..t * width + m].iter().map(|xs| xs / &mu[t]).collect())
            })
            .collect();
        let anchor_belief = (0..m)
            .map(|s| (0..k).map(|t| &x[t * width + s]).sum())
            .collect();
        PiViolation {
            anchor,
            mu,
            selections,
            anchor_belief,
        }
    });
    PiReport {
        holds: violation.is_none(),
        optima,
        violation,
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CiEntry {
    pub type_index: usize,
    /// `Π(tᵢ)` misses the convex hull of the other types' sets.
    pub disjoint: bool,
    /// Box-normalized `g` with `max_{Π(tᵢ)} g·π < min_{others} g·π`.
    pub separator: Option<Vec<Rational>>,
    pub gap: Option<Rational>,
    /// A point of `Π(tᵢ)` inside the hull of the others, when not disjoint.
    pub shared_point: Option<Vec<Rational>>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CiReport {
    pub holds: bool,
    pub entries: Vec<CiEntry>,
}

pub fn check_convex_independence(inst: &ExtractionInstance) -> CiReport {
    let entries: Vec<CiEntry> = (0..inst.num_types())
        .into_par_iter()
        .map(|i| convex_independence_for(inst, i))
        .collect();
    CiReport {
        holds: entries.iter().all(|e| e.disjoint),
        entries,
    }
}

fn convex_independence_for(inst: &ExtractionInstance, i: usize) -> CiEntry {
    let m = inst.num_states();
    let others: Vec<usize> = (0..inst.num_types()).filter(|&j| j != i).collect();
    if others.is_empty() {
        return CiEntry {
            type_index: i,
            disjoint: true,
            separator: Some(vec![Rational::zero(); m]),
            gap: None,
            shared_point: None,
        };
    }

    // Feasibility: π ∈ Π(tᵢ) with π = Σ_j x_j, x_j ∈ μ_j Π(t_j), Σμ = 1.
    let width = m + 1;
    let mut lp = LpProblem::new(Sense::Minimize, vec![Rational::zero(); m + others.len() * width]);
    for h in inst.beliefs[i].halfspaces() {
        let terms: Vec<(usize, Rational)> = h.coeffs.iter().cloned().enumerate().collect();
        lp.add_sparse(&terms, Relation::Le, h.rhs.clone());
    }
    for (k, &j) in others.iter().enumerate() {
        let base = m + k * width;
        add_scaled_membership(&mut lp, &inst.beliefs[j], base, base + m);
    }
    for s in 0..m {
        let mut terms = vec![(s, -Rational::one())];
        terms.extend((0..others.len()).map(|k| (m + k * width + s, Rational::one())));
        lp.add_sparse(&terms, Relation::Eq, Rational::zero());
    }
    let mass: Vec<(usize, Rational)> = (0..others.len()).map(|k| (m + k * width + m, Rational::one())).collect();
    lp.add_sparse(&mass, Relation::Eq, Rational::one());
    let sol = solve(&lp);
    if sol.is_optimal() {
        return CiEntry {
            type_index: i,
            disjoint: false,
            separator: None,
            gap: None,
            shared_point: Some(sol.primal[..m].to_vec()),
        };
    }

    let g = separator(inst, i, &others);
    let own_max = inst.beliefs[i].maximize(&g).value;
    let others_min = others
        .iter()
        .map(|&j| inst.beliefs[j].minimize(&g).value)
        .min()
        .expect("at least one other type");
    CiEntry {
        type_index: i,
        disjoint: true,
        separator: Some(g),
        gap: Some(others_min - own_max),
        shared_point: None,
    }
}

/// Maximizes the margin `δ` of a separating functional `g ∈ [-1,1]^m`
/// with the robust constraints dualized through each H-representation.
fn separator(inst: &ExtractionInstance, i: usize, others: &[usize]) -> Vec<Rational> {
    let m = inst.num_states();
    // Layout: g (m, boxed), α (free), δ (free), then (y, η) blocks.
    let mut sizes = vec![inst.beliefs[i].halfspaces().len()];
    sizes.extend(others.iter().map(|&j| inst.beliefs[j].halfspaces().len()));
    let n = m + 2 + sizes.iter().map(|r| r + 1).sum::<usize>();
    let (alpha, delta) = (m, m + 1);
    let mut objective = vec![Rational::zero(); n];
    objective[delta] = Rational::one();
    let mut lp = LpProblem::new(Sense::Maximize, objective);
    for s in 0..m {
        lp.set_bounds(s, Some(-Rational::one()), Some(Rational::one()));
    }
    lp.set_free(alpha);
    lp.set_free(delta);

    let mut base = m + 2;
    for (k, p) in std::iter::once(i).chain(others.iter().copied()).map(|j| &inst.beliefs[j]).enumerate() {
        let rows = p.halfspaces();
        let eta = base + rows.len();
        lp.set_free(eta);
        let by: Vec<(usize, Rational)> = rows.iter().enumerate().map(|(r, h)| (base + r, h.rhs.clone())).collect();
        if k == 0 {
            // max_{Π(tᵢ)} g·π <= α:  b·y + η <= α,  Aᵀy + η·1 >= g.
            let mut terms = by;
            terms.push((eta, Rational::one()));
            terms.push((alpha, -Rational::one()));
            lp.add_sparse(&terms, Relation::Le, Rational::zero());
            for s in 0..m {
                let mut terms: Vec<(usize, Rational)> = rows.iter().enumerate().map(|(r, h)| (base + r, h.coeffs[s].clone())).collect();
                terms.push((eta, Rational::one()));
                terms.push((s, -Rational::one()));
                lp.add_sparse(&terms, Relation::Ge, Rational::zero());
            }
        } else {
            // min_{Π(tⱼ)} g·π >= α + δ:  η - b·y >= α + δ,  η·1 - Aᵀy <= g.
            let mut terms: Vec<(usize, Rational)> = by.into_iter().map(|(j, b)| (j, -b)).collect();
            terms.push((eta, Rational::one()));
            terms.push((alpha, -Rational::one()));
            terms.push((delta, -Rational::one()));
            lp.add_sparse(&terms, Relation::Ge, Rational::zero());
            for s in 0..m {
                let mut terms: Vec<(usize, Rational)> = rows.iter().enumerate().map(|(r, h)| (base + r, -h.coeffs[s].clone())).collect();
                terms.push((eta, Rational::one()));
                terms.push((s, -Rational::one()));
                lp.add_sparse(&terms, Relation::Le, Rational::zero());
            }
        }
        base = eta + 1;
    }
    let sol = solve(&lp);
    assert!(
        sol.value.as_ref().is_some_and(Signed::is_positive),
        "disjoint compact convex sets admit a strictly separating functional"
    );
    sol.primal[..m].to_vec()
}

/// One state-contingent contract per type.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Menu {
    pub contracts: Vec<Vec<Rational>>,
}

/// Contracts `c(tᵢ) = v(tᵢ) + βᵢ(gᵢ - αᵢ)` from convex-independence
/// separators, checked for weak full extraction before being returned.
pub fn build_extraction_menu(inst: &ExtractionInstance) -> Result<Menu> {
    let m = inst.num_states();
    let k = inst.num_types();
    if k == 1 {
        return Ok(Menu {
            contracts: vec![vec![inst.values[0].clone(); m]],
        });
    }
    let ci = check_convex_independence(inst);
    if let Some(e) = ci.entries.iter().find(|e| !e.disjoint) {
        return Err(Error::capability(format!(
            "extraction not guaranteed: beliefs of type {} meet the convex hull of the others",
            inst.labels[e.type_index]
        )));
    }
    let hi = inst.values.iter().max().expect("nonempty");
    let lo = inst.values.iter().min().expect("nonempty");
    let range = hi - lo;
    let contracts = ci
        .entries
        .iter()
        .map(|e| {
            let g = e.separator.as_ref().expect("disjoint entries carry a separator");
            let gap = e.gap.as_ref().expect("disjoint entries carry a gap");
            let alpha = inst.beliefs[e.type_index].maximize(g).value;
            let beta = (&range + Rational::one()) / gap;
            g.iter()
                .map(|gs| &inst.values[e.type_index] + &beta * (gs - &alpha))
                .collect()
        })
        .collect();
    let menu = Menu { contracts };
    let verdict = check_menu(inst, &menu, MenuMode::WeakFull)?;
    assert!(verdict.pass, "constructed menu must satisfy weak full extraction: {verdict:?}");
    Ok(menu)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VseSolution {
    pub p_star: Rational,
    /// Optimal `z(t)`; contracts `v(t) + z(t)` attain `p*`.
    pub z: Vec<Vec<Rational>>,
    pub lambda: Vec<Rational>,
    /// `nu[t][t']`, the multiplier of the deviation constraint for `(t, t')`.
    pub nu: Vec<Vec<Rational>>,
    /// `ν(t,·)` rescaled to a distribution over `t'` where it has mass.
    pub nu_conditional: Vec<Option<Vec<Rational>>>,
    /// `Σ_{t,t'} ν(t,t')·(v(t) - v(t'))`, equal to `p*`.
    pub dual_objective: Rational,
}

/// Builds and solves the robust program
///
/// ```text
/// minimize c  s.t.  max_{π∈Π(t)} π·z(t) <= c                 for all t
///                   v(t) - v(t') - min_{π∈Π(t)} π·z(t') <= c   for all t, t'
/// ```
///
/// as one LP, each inner max/min replaced by its LP dual over the
/// H-representation of `Π(t)`.
pub fn solve_vse(inst: &ExtractionInstance) -> VseSolution {
    let k = inst.num_types();
    let m = inst.num_states();
    let rows: Vec<usize> = inst.beliefs.iter().map(|b| b.halfspaces().len()).collect();
    // Layout: c, z(t) for each t, then a (y, η) block per f-constraint and
    // per (t, t') g-constraint.
    let z0 = 1;
    let mut n = 1 + k * m;
    let f_blocks: Vec<usize> = (0..k)
        .map(|t| {
            let b = n;
            n += rows[t] + 1;
            b
        })
        .collect();
    let g_blocks: Vec<Vec<usize>> = (0..k)
        .map(|t| {
            (0..k)
                .map(|_| {
                    let b = n;
                    n += rows[t] + 1;
                    b
                })
                .collect()
        })
        .collect();
    let mut objective = vec![Rational::zero(); n];
    objective[0] = Rational::one();
    let mut lp = LpProblem::new(Sense::Minimize, objective);
    lp.set_free(0);
    for j in z0..z0 + k * m {
        lp.set_free(j);
    }

    let mut f_rows = Vec::with_capacity(k);
    for t in 0..k {
        let h = inst.beliefs[t].halfspaces();
        let base = f_blocks[t];
        let eta = base + rows[t];
        lp.set_free(eta);
        let mut terms: Vec<(usize, Rational)> = h.iter().enumerate().map(|(r, hs)| (base + r, hs.rhs.clone())).collect();
        terms.push((eta, Rational::one()));
        terms.push((0, -Rational::one()));
        f_rows.push(lp.add_sparse(&terms, Relation::Le, Rational::zero()));
        for s in 0..m {
            let mut terms: Vec<(usize, Rational)> = h.iter().enumerate().map(|(r, hs)| (base + r, hs.coeffs[s].clone())).collect();
            terms.push((eta, Rational::one()));
            terms.push((z0 + t * m + s, -Rational::one()));
            lp.add_sparse(&terms, Relation::Ge, Rational::zero());
        }
    }
    let mut g_rows = vec![Vec::with_capacity(k); k];
    for t in 0..k {
        let h = inst.beliefs[t].halfspaces();
        for tp in 0..k {
            let base = g_blocks[t][tp];
            let eta = base + rows[t];
            lp.set_free(eta);
            // v(t) - v(t') - (η - b·y) <= c.
            let mut terms: Vec<(usize, Rational)> = h.iter().enumerate().map(|(r, hs)| (base + r, hs.rhs.clone())).collect();
            terms.push((eta, -Rational::one()));
            terms.push((0, -Rational::one()));
            let rhs = &inst.values[tp] - &inst.values[t];
            g_rows[t].push(lp.add_sparse(&terms, Relation::Le, rhs));
            for s in 0..m {
                let mut terms: Vec<(usize, Rational)> = h.iter().enumerate().map(|(r, hs)| (base + r, -hs.coeffs[s].clone())).collect();
                terms.push((eta, Rational::one()));
                terms.push((z0 + tp * m + s, -Rational::one()));
                lp.add_sparse(&terms, Relation::Le, Rational::zero());
            }
        }
    }

    let sol = lp::solve_lp(&lp).expect("well-formed program");
    assert!(sol.is_optimal(), "the program is feasible and bounded below by zero");
    if let Err(e) = sol.verify(&lp) {
        panic!("certificate check failed: {e}");
    }
    let p_star = sol.value.clone().expect("optimal");
    assert!(!p_star.is_negative(), "p* >= 0 by the t = t' constraints");

    // Minimization: `<=` rows carry non-positive multipliers.
    let lambda: Vec<Rational> = f_rows.iter().map(|&r| -&sol.dual[r]).collect();
    let nu: Vec<Vec<Rational>> = g_rows.iter().map(|row| row.iter().map(|&r| -&sol.dual[r]).collect()).collect();
    let nu_conditional = nu
        .iter()
        .map(|row| {
            let mass: Rational = row.iter().sum();
            (!mass.is_zero()).then(|| row.iter().map(|x| x / &mass).collect())
        })
        .collect();
    let mut dual_objective = Rational::zero();
    for t in 0..k {
        for tp in 0..k {
            dual_objective += &nu[t][tp] * (&inst.values[t] - &inst.values[tp]);
        }
    }
    assert_eq!(dual_objective, p_star, "strong duality");
    let z = (0..k).map(|t| sol.primal[z0 + t * m..z0 + (t + 1) * m].to_vec()).collect();
    VseSolution {
        p_star,
        z,
        lambda,
        nu,
        nu_conditional,
        dual_objective,
    }
}

/// Contracts `c(t) = v(t) + z(t) - eps` from an optimal `z`; own and
/// deviation surplus then lie within `2·eps` whenever `p* <= eps`.
pub fn build_virtual_menu(inst: &ExtractionInstance, eps: &Rational) -> Result<Menu> {
    if !eps.is_positive() {
        return Err(Error::input("eps must be positive"));
    }
    let vse = solve_vse(inst);
    if &vse.p_star > eps {
        return Err(Error::capability(format!(
            "virtual extraction not reached: p* = {} exceeds eps = {}",
            scalar::format(&vse.p_star),
            scalar::format(eps)
        )));
    }
    let contracts = vse
        .z
        .iter()
        .zip(&inst.values)
        .map(|(z, v)| z.iter().map(|zs| v + zs - eps).collect())
        .collect();
    let menu = Menu { contracts };
    let bound = eps * Rational::from_integer(2.into());
    let verdict = check_menu(inst, &menu, MenuMode::Virtual(bound))?;
    assert!(verdict.pass, "virtual menu must meet its bound: {verdict:?}");
    Ok(menu)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum MenuMode {
    Full,
    WeakFull,
    Virtual(Rational),
    RobustIc,
    RobustIr,
}

impl MenuMode {
    pub fn name(&self) -> &'static str {
        match self {
            MenuMode::Full => "full",
            MenuMode::WeakFull => "weak_full",
            MenuMode::Virtual(_) => "virtual",
            MenuMode::RobustIc => "robust_ic",
            MenuMode::RobustIr => "robust_ir",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MenuWitness {
    /// Which inequality failed, e.g. `own_surplus_nonnegative`.
    pub clause: &'static str,
    pub t: usize,
    /// The contract taken, when it is not the type's own.
    pub other: Option<usize>,
    pub belief: Vec<Rational>,
    pub value: Rational,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MenuVerdict {
    pub mode: MenuMode,
    pub pass: bool,
    pub witness: Option<MenuWitness>,
}

pub fn check_menu(inst: &ExtractionInstance, menu: &Menu, mode: MenuMode) -> Result<MenuVerdict> {
    let k = inst.num_types();
    if menu.contracts.len() != k {
        return Err(Error::input(format!("menu has {} contracts for {k} types", menu.contracts.len())));
    }
    if menu.contracts.iter().any(|c| c.len() != inst.num_states()) {
        return Err(Error::input("every contract needs one payment per state"));
    }
    let witness = menu_failure(inst, menu, &mode);
    Ok(MenuVerdict {
        mode,
        pass: witness.is_none(),
        witness,
    })
}

fn menu_failure(inst: &ExtractionInstance, menu: &Menu, mode: &MenuMode) -> Option<MenuWitness> {
    let k = inst.num_types();
    for t in 0..k {
        let p = &inst.beliefs[t];
        let v = &inst.values[t];
        // Surplus from contract j ranges over [v - max π·c(j), v - min π·c(j)].
        let lowest = |j: usize| {
            let e = p.maximize(&menu.contracts[j]);
            (v - e.value, e.point)
        };
        let highest = |j: usize| {
            let e = p.minimize(&menu.contracts[j]);
            (v - e.value, e.point)
        };
        let fail = |clause, other, (value, belief): (Rational, Vec<Rational>)| {
            Some(MenuWitness {
                clause,
                t,
                other,
                belief,
                value,
            })
        };
        match mode {
            MenuMode::Full | MenuMode::WeakFull | MenuMode::Virtual(_) | MenuMode::RobustIr => {
                let lo = lowest(t);
                if lo.0.is_negative() {
                    return fail("own_surplus_nonnegative", None, lo);
                }
            }
            MenuMode::RobustIc => {}
        }
        match mode {
            MenuMode::Full => {
                let hi = highest(t);
                if hi.0.is_positive() {
                    return fail("own_surplus_zero", None, hi);
                }
            }
            MenuMode::Virtual(eps) => {
                let hi = highest(t);
                if &hi.0 > eps {
                    return fail("own_surplus_within_eps", None, hi);
                }
            }
            _ => {}
        }
        for j in (0..k).filter(|&j| j != t) {
            match mode {
                MenuMode::Full | MenuMode::WeakFull => {
                    let hi = highest(j);
                    if hi.0.is_positive() {
                        return fail("deviation_surplus_nonpositive", Some(j), hi);
                    }
                }
                MenuMode::Virtual(eps) => {
                    let hi = highest(j);
                    if &hi.0 > eps {
                        return fail("deviation_surplus_within_eps", Some(j), hi);
                    }
                }
                MenuMode::RobustIc => {
                    let diff: Vec<Rational> = menu.contracts[j].iter().zip(&menu.contracts[t]).map(|(a, b)| a - b).collect();
                    let e = p.minimize(&diff);
                    if e.value.is_negative() {
                        return fail("prefers_own_contract", Some(j), (e.value, e.point));
                    }
                }
                MenuMode::RobustIr => {}
            }
        }
    }
    None
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Collapse {
    /// Pairs whose belief intersection has full dimension.
    pub edges: Vec<(usize, usize)>,
    /// Connected components, each sorted, ordered by smallest member.
    pub components: Vec<Vec<usize>>,
    pub single_contract: bool,
}

/// Types joined by full-dimensional belief intersections must share a
/// contract in every robust-IC menu; returns the resulting partition.
/// `window = None` compares all pairs.
pub fn menu_collapse(inst: &ExtractionInstance, window: Option<usize>) -> Result<Collapse> {
    let k = inst.num_types();
    let pairs: Vec<(usize, usize)> = (0..k)
        .flat_map(|a| (a + 1..k).map(move |b| (a, b)))
        .filter(|&(a, b)| window.is_none_or(|w| b - a <= w))
        .collect();
    let joined: Vec<bool> = pairs
        .par_iter()
        .map(|&(a, b)| -> Result<bool> {
            Ok(intersect(&[&inst.beliefs[a], &inst.beliefs[b]])?.is_some_and(|p| p.has_full_dimension()))
        })
        .collect::<Result<_>>()?;
    let edges: Vec<(usize, usize)> = pairs.into_iter().zip(joined).filter(|(_, j)| *j).map(|(p, _)| p).collect();

    let mut parent: Vec<usize> = (0..k).collect();
    fn root(parent: &mut [usize], mut x: usize) -> usize {
        while parent[x] != x {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        x
    }
    for &(a, b) in &edges {
        let (ra, rb) = (root(&mut parent, a), root(&mut parent, b));
        if ra != rb {
            parent[ra.max(rb)] = ra.min(rb);
        }
    }
    let mut components: Vec<Vec<usize>> = Vec::new();
    let mut slot = vec![usize::MAX; k];
    for t in 0..k {
        let r = root(&mut parent, t);
        if slot[r] == usize::MAX {
            slot[r] = components.len();
            components.push(Vec::new());
        }
        components[slot[r]].push(t);
    }
    Ok(Collapse {
        single_contract: components.len() == 1,
        edges,
        components,
    })
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum DesignerBelief {
    Point(Vec<Rational>),
    Set(BeliefPolytope),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Applicability {
    /// The designer's belief lies in the lowest type's set.
    PointInside,
    /// The designer's set is contained in the lowest type's set.
    Subset,
    /// The sets meet: optimal for a maxmin designer.
    Intersecting,
    NotMet,
}

impl Applicability {
    pub fn as_str(self) -> &'static str {
        match self {
            Applicability::PointInside => "point_inside",
            Applicability::Subset => "subset",
            Applicability::Intersecting => "intersecting_maxmin",
            Applicability::NotMet => "theorem hypotheses not met",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SingleContract {
    pub contract: Rational,
    /// Collected from every type: each has `v(t) >= contract`.
    pub revenue: Rational,
    /// Index of the lowest-value type.
    pub lowest_type: usize,
    pub applicability: Applicability,
}

/// The deterministic contract `min_t v(t)` in the single-contract regime.
pub fn optimal_single_contract(inst: &ExtractionInstance, designer: &DesignerBelief) -> Result<SingleContract> {
    let collapse = menu_collapse(inst, None)?;
    if !collapse.single_contract {
        return Err(Error::capability(format!(
            "types split into {} contract classes; a single contract is forced only when full-dimensional overlaps connect all types",
            collapse.components.len()
        )));
    }
    let (lowest_type, contract) = inst
        .values
        .iter()
        .enumerate()
        .fold(None::<(usize, &Rational)>, |best, (t, v)| match best {
            Some((_, b)) if b <= v => best,
            _ => Some((t, v)),
        })
        .expect("nonempty");
    let own = &inst.beliefs[lowest_type];
    let applicability = match designer {
        DesignerBelief::Point(p) => {
            if p.len() != inst.num_states() {
                return Err(Error::input("designer belief has the wrong number of states"));
            }
            if own.contains(p) {
                Applicability::PointInside
            } else {
                Applicability::NotMet
            }
        }
        DesignerBelief::Set(d) => {
            if d.states() != own.states() {
                return Err(Error::input("designer beliefs use a different state space"));
            }
            if d.is_subset_of(own) {
                Applicability::Subset
            } else if d.intersects(own)? {
                Applicability::Intersecting
            } else {
                Applicability::NotMet
            }
        }
    };
    Ok(SingleContract {
        contract: contract.clone(),
        revenue: contract.clone(),
        lowest_type,
        applicability,
    })
}
