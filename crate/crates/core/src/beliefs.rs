//! Belief sets as polytopes inside the probability simplex.
//!
//! A [`BeliefPolytope`] is stored in H-representation `Aπ <= b`; the
//! simplex constraints `Σπ = 1, π >= 0` are always implied and never
//! stored. Only finite state spaces are supported: full dimension on an
//! infinite state space cannot be decided from tabulated data.

use std::collections::BTreeSet;

use num_traits::{One, Signed, Zero};

use crate::error::{Error, Result};
use crate::grid::TypeGrid;
use crate::lp::{self, affine_rank, nullspace, rank, Constraint, LpProblem, Relation, Sense};
use crate::scalar::{self, dot, primitive_direction, Rational};

/// Maximum number of points accepted by [`BeliefPolytope::from_points`].
pub const HULL_MAX_POINTS: usize = 24;

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct StateSpace {
    labels: Vec<String>,
}

impl StateSpace {
    pub fn new(labels: Vec<String>) -> Result<Self> {
        if labels.is_empty() {
            return Err(Error::validation("states", "state space must contain at least one state"));
        }
        let distinct: BTreeSet<&String> = labels.iter().collect();
        if distinct.len() != labels.len() {
            return Err(Error::validation("states", "state labels must be distinct"));
        }
        Ok(StateSpace { labels })
    }

    /// States labelled `1..=m`.
    pub fn numbered(m: usize) -> Result<Self> {
        StateSpace::new((1..=m).map(|s| s.to_string()).collect())
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }
}

/// One stored inequality `coeffs·π <= rhs`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct HalfSpace {
    pub coeffs: Vec<Rational>,
    pub rhs: Rational,
}

/// Where an H-representation came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Origin {
    Constraints,
    /// Built from a point list; the stored set is the convex hull.
    ConvexHull,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BeliefPolytope {
    states: StateSpace,
    rows: Vec<HalfSpace>,
    origin: Origin,
}

/// Outcome of a full-dimension test.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FullDimension {
    pub full: bool,
    /// Affine dimension of the set; full means `m - 1`.
    pub dimension: usize,
    /// `dimension + 1` affinely independent members of the set.
    pub points: Vec<Vec<Rational>>,
    /// When not full: a nonzero `g` with `π·g = 0` for every member.
    pub annihilator: Option<Vec<Rational>>,
}

/// Optimum of a linear functional over a belief set.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Extremum {
    pub value: Rational,
    /// A vertex of the set attaining `value`.
    pub point: Vec<Rational>,
}

impl BeliefPolytope {
    /// Builds a polytope from general rows and certifies it is nonempty.
    pub fn new(states: StateSpace, constraints: Vec<Constraint>) -> Result<Self> {
        let m = states.len();
        let mut rows = Vec::new();
        for (i, c) in constraints.into_iter().enumerate() {
            if c.coeffs.len() != m {
                return Err(Error::validation(
                    format!("constraints[{i}].coeffs"),
                    format!("expected {m} coefficients, found {}", c.coeffs.len()),
                ));
            }
            let negated = || HalfSpace {
                coeffs: c.coeffs.iter().map(|a| -a).collect(),
                rhs: -&c.rhs,
            };
            match c.relation {
                Relation::Le => rows.push(HalfSpace {
                    coeffs: c.coeffs.clone(),
                    rhs: c.rhs.clone(),
                }),
                Relation::Ge => rows.push(negated()),
                Relation::Eq => {
                    rows.push(negated());
                    rows.push(HalfSpace {
                        coeffs: c.coeffs.clone(),
                        rhs: c.rhs.clone(),
                    });
                }
            }
        }
        BeliefPolytope::from_halfspaces(states, rows)
    }

    pub fn from_halfspaces(states: StateSpace, rows: Vec<HalfSpace>) -> Result<Self> {
        let p = BeliefPolytope {
            states,
            rows,
            origin: Origin::Constraints,
        };
        if p.rows.iter().any(|r| r.coeffs.len() != p.dim()) {
            return Err(Error::input("half-space width differs from the state count"));
        }
        if p.feasible_point()?.is_none() {
            return Err(Error::input("belief set is empty"));
        }
        Ok(p)
    }

    /// The whole simplex `Δ(S)`.
    pub fn simplex(states: StateSpace) -> Self {
        BeliefPolytope {
            states,
            rows: Vec::new(),
            origin: Origin::Constraints,
        }
    }

    pub fn singleton(states: StateSpace, point: &[Rational]) -> Result<Self> {
        check_distribution(point, states.len())?;
        let rows = point
            .iter()
            .enumerate()
            .flat_map(|(s, ps)| {
                let mut e = vec![Rational::zero(); point.len()];
                e[s] = Rational::one();
                let neg: Vec<Rational> = e.iter().map(|a| -a).collect();
                [
                    HalfSpace {
                        coeffs: e,
                        rhs: ps.clone(),
                    },
                    HalfSpace {
                        coeffs: neg,
                        rhs: -ps,
                    },
                ]
            })
            .collect();
        BeliefPolytope::from_halfspaces(states, rows)
    }

    /// Convex hull of a finite list of distributions.
    ///
    /// The affine hull becomes equality rows; facets are found by testing
    /// every hyperplane through `k` affinely independent points, where `k`
    /// is the affine dimension of the list.
    pub fn from_points(states: StateSpace, points: &[Vec<Rational>]) -> Result<Self> {
        let m = states.len();
        if points.is_empty() {
            return Err(Error::input("point list is empty"));
        }
        if points.len() > HULL_MAX_POINTS || m > lp::VERTEX_MAX_DIM {
            return Err(Error::capability(format!(
                "convex hulls are limited to {HULL_MAX_POINTS} points in at most {} states",
                lp::VERTEX_MAX_DIM
            )));
        }
        for p in points {
            check_distribution(p, m)?;
        }
        let lifted: Vec<Vec<Rational>> = points
            .iter()
            .map(|p| {
                let mut r = p.clone();
                r.push(Rational::one());
                r
            })
            .collect();
        let k = affine_rank(points);
        let mut rows = Vec::new();
        // Equalities a·π + c = 0 on the affine hull.
        for w in nullspace(&lifted, m + 1) {
            let (a, c) = w.split_at(m);
            rows.push(HalfSpace {
                coeffs: a.to_vec(),
                rhs: -&c[0],
            });
            rows.push(HalfSpace {
                coeffs: a.iter().map(|x| -x).collect(),
                rhs: c[0].clone(),
            });
        }
        if k > 0 {
            let mut facets = BTreeSet::new();
            for subset in combinations(points.len(), k) {
                let sub: Vec<Vec<Rational>> = subset.iter().map(|&i| lifted[i].clone()).collect();
                if rank(&sub) != k {
                    continue;
                }
                let Some(w) = nullspace(&sub, m + 1)
                    .into_iter()
                    .find(|w| lifted.iter().any(|p| !dot(p, w).is_zero()))
                else {
                    continue;
                };
                let values: Vec<Rational> = lifted.iter().map(|p| dot(p, &w)).collect();
                let (a, c) = w.split_at(m);
                let row = if values.iter().all(|v| !v.is_negative()) {
                    HalfSpace {
                        coeffs: a.iter().map(|x| -x).collect(),
                        rhs: c[0].clone(),
                    }
                } else if values.iter().all(|v| !v.is_positive()) {
                    HalfSpace {
                        coeffs: a.to_vec(),
                        rhs: -&c[0],
                    }
                } else {
                    continue;
                };
                facets.insert(normalize_row(&row));
            }
            rows.extend(facets);
        }
        let mut p = BeliefPolytope::from_halfspaces(states, rows)?;
        p.origin = Origin::ConvexHull;
        Ok(p)
    }

    pub fn states(&self) -> &StateSpace {
        &self.states
    }

    /// Number of states `m`.
    pub fn dim(&self) -> usize {
        self.states.len()
    }

    pub fn halfspaces(&self) -> &[HalfSpace] {
        &self.rows
    }

    /// Re-tags a stored set, e.g. when reloading a saved hull.
    pub fn with_origin(mut self, origin: Origin) -> Self {
        self.origin = origin;
        self
    }

    pub fn origin(&self) -> Origin {
        self.origin
    }

    pub fn contains(&self, point: &[Rational]) -> bool {
        point.len() == self.dim()
            && point.iter().all(|p| !p.is_negative())
            && scalar::sum(point).is_one()
            && self.rows.iter().all(|r| dot(&r.coeffs, point) <= r.rhs)
    }

    /// LP over `π` with the simplex and stored rows; the caller fills the objective.
    fn lp(&self, sense: Sense, objective: Vec<Rational>) -> LpProblem {
        let m = self.dim();
        let mut lp = LpProblem::new(sense, objective);
        lp.add_constraint(vec![Rational::one(); m], Relation::Eq, Rational::one());
        for r in &self.rows {
            lp.add_constraint(r.coeffs.clone(), Relation::Le, r.rhs.clone());
        }
        lp
    }

    fn feasible_point(&self) -> Result<Option<Vec<Rational>>> {
        let sol = lp::solve_lp(&self.lp(Sense::Minimize, vec![Rational::zero(); self.dim()]))?;
        Ok(sol.is_optimal().then_some(sol.primal))
    }

    fn optimize(&self, w: &[Rational], sense: Sense) -> Extremum {
        assert_eq!(w.len(), self.dim(), "objective width must equal the state count");
        let sol = lp::solve_lp(&self.lp(sense, w.to_vec())).expect("well-formed belief LP");
        // Nonempty and bounded by construction.
        assert!(sol.is_optimal(), "belief LP over a nonempty polytope must be optimal");
        Extremum {
            value: sol.value.expect("optimal"),
            point: sol.primal,
        }
    }

    /// `min_{π ∈ P} π·w`, attained at a vertex.
    pub fn minimize(&self, w: &[Rational]) -> Extremum {
        self.optimize(w, Sense::Minimize)
    }

    /// `max_{π ∈ P} π·w`, attained at a vertex.
    pub fn maximize(&self, w: &[Rational]) -> Extremum {
        self.optimize(w, Sense::Maximize)
    }

    pub fn is_subset_of(&self, other: &BeliefPolytope) -> bool {
        self.states == other.states && other.rows.iter().all(|r| self.maximize(&r.coeffs).value <= r.rhs)
    }

    pub fn set_equals(&self, other: &BeliefPolytope) -> bool {
        self.is_subset_of(other) && other.is_subset_of(self)
    }

    /// Does this set meet `other`?
    pub fn intersects(&self, other: &BeliefPolytope) -> Result<bool> {
        Ok(intersect(&[self, other])?.is_some())
    }

    /// Vertex list via brute-force enumeration (small state spaces only).
    pub fn vertices(&self) -> Result<Vec<Vec<Rational>>> {
        let m = self.dim();
        let mut a = lp::nonnegativity_rows(m);
        let mut b = vec![Rational::zero(); m];
        for r in &self.rows {
            a.push(r.coeffs.clone());
            b.push(r.rhs.clone());
        }
        lp::enumerate_vertices(&a, &b, &[vec![Rational::one(); m]], &[Rational::one()])
    }

    /// Rows `(a, β)` with `a·π = β` on the whole set, including tight
    /// coordinate constraints `π_s >= 0`, found by one LP per candidate row.
    fn implicit_equalities(&self) -> Vec<HalfSpace> {
        let m = self.dim();
        let mut out = Vec::new();
        for s in 0..m {
            let mut e = vec![Rational::zero(); m];
            e[s] = Rational::one();
            if self.maximize(&e).value.is_zero() {
                let neg = e.iter().map(|a| -a).collect();
                out.push(HalfSpace {
                    coeffs: neg,
                    rhs: Rational::zero(),
                });
            }
        }
        for r in &self.rows {
            if self.minimize(&r.coeffs).value == r.rhs {
                out.push(r.clone());
            }
        }
        out
    }

    pub fn affine_dimension(&self) -> usize {
        let m = self.dim();
        let mut rows = vec![vec![Rational::one(); m]];
        rows.extend(self.implicit_equalities().into_iter().map(|r| r.coeffs));
        m - rank(&rows)
    }

    /// Full-dimension test with certificates.
    ///
    /// On a finite state space the only `g` with `π·g = 0` for all members
    /// is zero exactly when the set contains `m` affinely independent
    /// points, i.e. has affine dimension `m - 1`.
    pub fn full_dimension(&self) -> FullDimension {
        let m = self.dim();
        let equalities = self.implicit_equalities();
        let mut hull_rows = vec![vec![Rational::one(); m]];
        hull_rows.extend(equalities.iter().map(|r| r.coeffs.clone()));
        let dimension = m - rank(&hull_rows);
        // Directions along the affine hull.
        let directions = nullspace(&hull_rows, m);

        let first = self
            .feasible_point()
            .expect("well-formed belief LP")
            .expect("belief set is nonempty");
        let mut points = vec![first];
        while affine_rank(&points) < dimension {
            let diffs: Vec<Vec<Rational>> = points[1..]
                .iter()
                .map(|p| p.iter().zip(&points[0]).map(|(a, b)| a - b).collect())
                .collect();
            let candidates = nullspace(&diffs, m);
            let g = candidates
                .into_iter()
                .find(|g| directions.iter().any(|d| !dot(g, d).is_zero()))
                .expect("a functional separating the current hull exists");
            let base = dot(&g, &points[0]);
            let hi = self.maximize(&g);
            let next = if hi.value != base { hi.point } else { self.minimize(&g).point };
            points.push(next);
        }
        let full = dimension + 1 == m;
        let annihilator = if full {
            None
        } else {
            equalities.iter().find_map(|r| {
                let g: Vec<Rational> = r.coeffs.iter().map(|a| a - &r.rhs).collect();
                (!g.iter().all(Zero::is_zero)).then(|| primitive_direction(&g))
            })
        };
        FullDimension {
            full,
            dimension,
            points,
            annihilator,
        }
    }

    /// The single member of a point belief, `None` for larger sets.
    pub fn as_point(&self) -> Option<Vec<Rational>> {
        if self.affine_dimension() != 0 {
            return None;
        }
        Some(self.minimize(&vec![Rational::zero(); self.dim()]).point)
    }

    pub fn has_full_dimension(&self) -> bool {
        self.affine_dimension() + 1 == self.dim()
    }
}

fn check_distribution(p: &[Rational], m: usize) -> Result<()> {
    if p.len() != m {
        return Err(Error::input(format!("distribution has {} entries, expected {m}", p.len())));
    }
    if p.iter().any(Signed::is_negative) || !scalar::sum(p).is_one() {
        return Err(Error::input("not a probability distribution (entries must be >= 0 and sum to 1)"));
    }
    Ok(())
}

/// Scales a row so its first nonzero coefficient has magnitude one.
fn normalize_row(r: &HalfSpace) -> HalfSpace {
    match r.coeffs.iter().find(|a| !a.is_zero()) {
        None => r.clone(),
        Some(lead) => {
            let f = lead.abs().recip();
            HalfSpace {
                coeffs: r.coeffs.iter().map(|a| a * &f).collect(),
                rhs: &r.rhs * &f,
            }
        }
    }
}

pub(crate) fn combinations(n: usize, k: usize) -> Vec<Vec<usize>> {
    fn go(start: usize, n: usize, k: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for i in start..n {
            if n - i < k - cur.len() {
                break;
            }
            cur.push(i);
            go(i + 1, n, k, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    go(0, n, k, &mut Vec::new(), &mut out);
    out
}

/// Intersection by stacking rows; `None` when the intersection is empty.
pub fn intersect(polytopes: &[&BeliefPolytope]) -> Result<Option<BeliefPolytope>> {
    let Some(first) = polytopes.first() else {
        return Err(Error::input("nothing to intersect"));
    };
    if polytopes.iter().any(|p| p.states != first.states) {
        return Err(Error::input("cannot intersect belief sets over different state spaces"));
    }
    let rows: Vec<HalfSpace> = polytopes.iter().flat_map(|p| p.rows.iter().cloned()).collect();
    let candidate = BeliefPolytope {
        states: first.states.clone(),
        rows,
        origin: Origin::Constraints,
    };
    Ok(candidate.feasible_point()?.map(|_| candidate))
}

/// ε-contamination of a reference distribution.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ContaminationSpec {
    pub reference: Vec<Rational>,
    pub epsilon: Rational,
}

impl ContaminationSpec {
    pub fn new(reference: Vec<Rational>, epsilon: Rational) -> Result<Self> {
        let spec = ContaminationSpec { reference, epsilon };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.epsilon.is_negative() || self.epsilon > Rational::one() {
            return Err(Error::input("epsilon must lie in [0,1]"));
        }
        check_distribution(&self.reference, self.reference.len())
    }

    /// Per-state lower bounds `(1-ε)·π̄_s`.
    pub fn floors(&self) -> Vec<Rational> {
        let w = Rational::one() - &self.epsilon;
        self.reference.iter().map(|p| &w * p).collect()
    }
}

/// `{(1-ε)π̄ + επ : π ∈ Δ(S)}`, which on a finite state space is exactly
/// `{π ∈ Δ(S) : π_s >= (1-ε)π̄_s}`.
pub fn make_contamination(states: StateSpace, spec: &ContaminationSpec) -> Result<BeliefPolytope> {
    spec.validate()?;
    if spec.reference.len() != states.len() {
        return Err(Error::input("reference distribution does not match the state space"));
    }
    let m = states.len();
    let rows = spec
        .floors()
        .into_iter()
        .enumerate()
        .filter(|(_, f)| !f.is_zero())
        .map(|(s, f)| {
            let mut coeffs = vec![Rational::zero(); m];
            coeffs[s] = -Rational::one();
            HalfSpace { coeffs, rhs: -f }
        })
        .collect();
    BeliefPolytope::from_halfspaces(states, rows)
}

/// Whether the inner contamination set lies inside the outer one.
///
/// For `m >= 2` the inner set's vertices are `(1-ε)π̄ + ε·δ_s`, and
/// containment in the outer floors reduces to the floor comparison
/// `(1-ε_in)π̄_in,s >= (1-ε_out)π̄_out,s` for every state.
pub fn contamination_nested(inner: &ContaminationSpec, outer: &ContaminationSpec) -> Result<bool> {
    inner.validate()?;
    outer.validate()?;
    if inner.reference.len() != outer.reference.len() {
        return Err(Error::input("contamination specs use different state spaces"));
    }
    if inner.reference.len() < 2 {
        return Err(Error::input("nesting test needs at least two states"));
    }
    Ok(inner.floors().iter().zip(outer.floors()).all(|(a, b)| *a >= b))
}

/// Per-type belief sets over a shared state space.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BeliefMap {
    grid: TypeGrid,
    polytopes: Vec<BeliefPolytope>,
}

impl BeliefMap {
    pub fn new(grid: TypeGrid, polytopes: Vec<BeliefPolytope>) -> Result<Self> {
        if polytopes.len() != grid.len() {
            return Err(Error::validation(
                "beliefs",
                format!("expected {} belief sets (one per grid type), found {}", grid.len(), polytopes.len()),
            ));
        }
        if let Some(first) = polytopes.first() {
            if polytopes.iter().any(|p| p.states != first.states) {
                return Err(Error::validation("beliefs", "all belief sets must share one state space"));
            }
        }
        Ok(BeliefMap { grid, polytopes })
    }

    /// Every type holds the same set.
    pub fn uniform(grid: TypeGrid, polytope: BeliefPolytope) -> Self {
        let polytopes = vec![polytope; grid.len()];
        BeliefMap { grid, polytopes }
    }

    pub fn grid(&self) -> &TypeGrid {
        &self.grid
    }

    pub fn polytopes(&self) -> &[BeliefPolytope] {
        &self.polytopes
    }

    pub fn get(&self, k: usize) -> &BeliefPolytope {
        &self.polytopes[k]
    }

    pub fn states(&self) -> &StateSpace {
        self.polytopes[0].states()
    }

    pub fn overlap_profile(&self, window: usize) -> Result<OverlapProfile> {
        overlap_profile(&self.polytopes, window)
    }
}

/// Record of one windowed intersection `⋂_{|j-k| <= w} Π(t_j)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WindowRecord {
    pub type_index: usize,
    /// Inclusive index range covered by the window.
    pub lo: usize,
    pub hi: usize,
    pub nonempty: bool,
    pub dimension: Option<usize>,
    pub full_dimension: bool,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OverlapProfile {
    pub window: usize,
    pub records: Vec<WindowRecord>,
    pub common_belief: bool,
    pub independent: bool,
    pub overlapping: bool,
    pub fully_overlapping: bool,
}

impl OverlapProfile {
    pub fn empty_windows(&self) -> Vec<&WindowRecord> {
        self.records.iter().filter(|r| !r.nonempty).collect()
    }
}

/// Classifies an ordered list of belief sets; the neighbourhood of type
/// `k` is every type within `window` grid steps.
pub fn overlap_profile(polytopes: &[BeliefPolytope], window: usize) -> Result<OverlapProfile> {
    if window < 1 {
        return Err(Error::input("window must be at least 1"));
    }
    if polytopes.is_empty() {
        return Err(Error::input("no belief sets to classify"));
    }
    let n = polytopes.len();
    let mut records = Vec::with_capacity(n);
    for k in 0..n {
        let lo = k.saturating_sub(window);
        let hi = (k + window).min(n - 1);
        let members: Vec<&BeliefPolytope> = polytopes[lo..=hi].iter().collect();
        let record = match intersect(&members)? {
            None => WindowRecord {
                type_index: k,
                lo,
                hi,
                nonempty: false,
                dimension: None,
                full_dimension: false,
            },
            Some(p) => {
                let d = p.affine_dimension();
                WindowRecord {
                    type_index: k,
                    lo,
                    hi,
                    nonempty: true,
                    dimension: Some(d),
                    full_dimension: d + 1 == p.dim(),
                }
            }
        };
        records.push(record);
    }
    let all: Vec<&BeliefPolytope> = polytopes.iter().collect();
    let common_belief = intersect(&all)?.is_some();
    let independent = polytopes.iter().skip(1).all(|p| p.set_equals(&polytopes[0]));
    let overlapping = records.iter().all(|r| r.nonempty);
    let fully_overlapping = records.iter().all(|r| r.full_dimension);
    Ok(OverlapProfile {
        window,
        records,
        common_belief,
        independent,
        overlapping,
        fully_overlapping,
    })
}
