//! Exact linear programming.
//!
//! [`solve_lp`] is a dense two-phase simplex over [`Rational`] with
//! Bland's pivoting rule, so the same input always produces the same
//! basis, primal point and dual multipliers. Every optimal solution
//! carries a dual certificate that [`LpSolution::verify`] checks
//! independently of the pivoting code.
//!
//! [`enumerate_vertices`] is a brute-force vertex enumerator used as an
//! oracle in tests; it shares no arithmetic with the simplex.

mod linalg;
mod simplex;
mod vertices;

pub use linalg::{affine_rank, nullspace, rank};
pub use simplex::solve_lp;
pub use vertices::{enumerate_vertices, VERTEX_MAX_DIM, VERTEX_MAX_ROWS};
pub(crate) use vertices::nonnegativity_rows;

use num_traits::{Signed, Zero};

use crate::error::{Error, Result};
use crate::scalar::{dot, Rational};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Sense {
    Minimize,
    Maximize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Relation {
    Le,
    Eq,
    Ge,
}

impl Relation {
    pub fn holds(self, lhs: &Rational, rhs: &Rational) -> bool {
        match self {
            Relation::Le => lhs <= rhs,
            Relation::Eq => lhs == rhs,
            Relation::Ge => lhs >= rhs,
        }
    }

    pub fn symbol(self) -> &'static str {
        match self {
            Relation::Le => "<=",
            Relation::Eq => "=",
            Relation::Ge => ">=",
        }
    }

    pub fn from_symbol(s: &str) -> Option<Relation> {
        match s {
            "<=" | "≤" => Some(Relation::Le),
            "=" | "==" => Some(Relation::Eq),
            ">=" | "≥" => Some(Relation::Ge),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Constraint {
    pub coeffs: Vec<Rational>,
    pub relation: Relation,
    pub rhs: Rational,
}

/// Per-variable bounds; `None` means unbounded on that side.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Bound {
    pub lower: Option<Rational>,
    pub upper: Option<Rational>,
}

impl Bound {
    pub fn nonnegative() -> Self {
        Bound {
            lower: Some(Rational::zero()),
            upper: None,
        }
    }

    pub fn free() -> Self {
        Bound {
            lower: None,
            upper: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LpProblem {
    pub sense: Sense,
    pub objective: Vec<Rational>,
    pub constraints: Vec<Constraint>,
    pub bounds: Vec<Bound>,
}

impl LpProblem {
    /// A problem over `objective.len()` variables, each defaulting to `x >= 0`.
    pub fn new(sense: Sense, objective: Vec<Rational>) -> Self {
        let bounds = vec![Bound::nonnegative(); objective.len()];
        LpProblem {
            sense,
            objective,
            constraints: Vec::new(),
            bounds,
        }
    }

    pub fn num_vars(&self) -> usize {
        self.objective.len()
    }

    /// Appends a row and returns its index (the index of its dual multiplier).
    pub fn add_constraint(&mut self, coeffs: Vec<Rational>, relation: Relation, rhs: Rational) -> usize {
        self.constraints.push(Constraint {
            coeffs,
            relation,
            rhs,
        });
        self.constraints.len() - 1
    }

    /// Appends a row given as `(variable, coefficient)` pairs.
    pub fn add_sparse(&mut self, terms: &[(usize, Rational)], relation: Relation, rhs: Rational) -> usize {
        let mut coeffs = vec![Rational::zero(); self.num_vars()];
        for (j, a) in terms {
            coeffs[*j] += a;
        }
        self.add_constraint(coeffs, relation, rhs)
    }

    pub fn set_bounds(&mut self, var: usize, lower: Option<Rational>, upper: Option<Rational>) {
        self.bounds[var] = Bound { lower, upper };
    }

    pub fn set_free(&mut self, var: usize) {
        self.bounds[var] = Bound::free();
    }

    pub fn validate(&self) -> Result<()> {
        if self.objective.is_empty() {
            return Err(Error::input("LP must have at least one variable"));
        }
        if self.bounds.len() != self.objective.len() {
            return Err(Error::input(format!(
                "LP has {} variables but {} bounds",
                self.objective.len(),
                self.bounds.len()
            )));
        }
        for (i, row) in self.constraints.iter().enumerate() {
            if row.coeffs.len() != self.objective.len() {
                return Err(Error::input(format!(
                    "LP row {i} has width {} but the objective has width {}",
                    row.coeffs.len(),
                    self.objective.len()
                )));
            }
        }
        Ok(())
    }

    pub fn objective_value(&self, x: &[Rational]) -> Rational {
        dot(&self.objective, x)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
}

/// Result of [`solve_lp`].
///
/// Dual conventions: `dual[i]` is the multiplier of constraint `i` and
/// `reduced_costs = objective - Aᵀ·dual` (the multipliers of the variable
/// bounds). For a maximization, `<=` rows carry `dual >= 0` and `>=` rows
/// `dual <= 0`; for a minimization the signs flip. A variable resting at
/// its lower bound has a reduced cost of sign opposite to one resting at
/// its upper bound, and a variable strictly inside its bounds has reduced
/// cost zero.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LpSolution {
    pub status: LpStatus,
    pub value: Option<Rational>,
    pub primal: Vec<Rational>,
    pub dual: Vec<Rational>,
    pub reduced_costs: Vec<Rational>,
    /// Sorted indices of the basic columns of the internal standard form.
    pub basis: Vec<usize>,
}

impl LpSolution {
    pub(crate) fn without_point(status: LpStatus) -> Self {
        LpSolution {
            status,
            value: None,
            primal: Vec::new(),
            dual: Vec::new(),
            reduced_costs: Vec::new(),
            basis: Vec::new(),
        }
    }

    pub fn is_optimal(&self) -> bool {
        self.status == LpStatus::Optimal
    }

    /// Dual objective `b·y + Σ_j r_j·(bound r_j is attached to)`.
    ///
    /// Returns `None` when a nonzero reduced cost points at a missing bound,
    /// i.e. when the dual vector is not dual feasible.
    pub fn dual_objective(&self, problem: &LpProblem) -> Option<Rational> {
        if !self.is_optimal() {
            return None;
        }
        let mut total = Rational::zero();
        for (row, y) in problem.constraints.iter().zip(&self.dual) {
            total += &row.rhs * y;
        }
        // Minimization: positive reduced cost pairs with the lower bound.
        let lower_side_positive = problem.sense == Sense::Minimize;
        for (r, bound) in self.reduced_costs.iter().zip(&problem.bounds) {
            if r.is_zero() {
                continue;
            }
            let uses_lower = r.is_positive() == lower_side_positive;
            let attached = if uses_lower { &bound.lower } else { &bound.upper };
            total += r * attached.as_ref()?;
        }
        Some(total)
    }

    /// Checks the optimality certificate exactly: primal feasibility, dual
    /// sign pattern, `objective = Aᵀy + r`, complementary slackness and a
    /// zero duality gap.
    pub fn verify(&self, problem: &LpProblem) -> std::result::Result<(), String> {
        if !self.is_optimal() {
            return Ok(());
        }
        let n = problem.num_vars();
        let x = &self.primal;
        if x.len() != n || self.reduced_costs.len() != n || self.dual.len() != problem.constraints.len() {
            return Err("certificate has wrong dimensions".into());
        }
        for (j, (xj, b)) in x.iter().zip(&problem.bounds).enumerate() {
            if b.lower.as_ref().is_some_and(|l| xj < l) || b.upper.as_ref().is_some_and(|u| xj > u) {
                return Err(format!("variable {j} violates its bounds"));
            }
        }
        let maximize = problem.sense == Sense::Maximize;
        for (i, (row, y)) in problem.constraints.iter().zip(&self.dual).enumerate() {
            let lhs = dot(&row.coeffs, x);
            if !row.relation.holds(&lhs, &row.rhs) {
                return Err(format!("row {i} is violated"));
            }
            let sign_ok = match row.relation {
                Relation::Eq => true,
                Relation::Le => (maximize && !y.is_negative()) || (!maximize && !y.is_positive()),
                Relation::Ge => (maximize && !y.is_positive()) || (!maximize && !y.is_negative()),
            };
            if !sign_ok {
                return Err(format!("dual multiplier of row {i} has the wrong sign"));
            }
            if !y.is_zero() && lhs != row.rhs {
                return Err(format!("row {i} is slack but carries a multiplier"));
            }
        }
        for j in 0..n {
            let mut col = Rational::zero();
            for (row, y) in problem.constraints.iter().zip(&self.dual) {
                col += &row.coeffs[j] * y;
            }
            let r = &self.reduced_costs[j];
            if &problem.objective[j] - col != *r {
                return Err(format!("reduced cost of variable {j} is inconsistent"));
            }
            if r.is_zero() {
                continue;
            }
            let uses_lower = r.is_positive() != maximize;
            let attached = if uses_lower {
                &problem.bounds[j].lower
            } else {
                &problem.bounds[j].upper
            };
            match attached {
                Some(v) if v == &x[j] => {}
                _ => return Err(format!("reduced cost of variable {j} is not supported by an active bound")),
            }
        }
        let primal_value = problem.objective_value(x);
        if self.value.as_ref() != Some(&primal_value) {
            return Err("reported value differs from c·x".into());
        }
        match self.dual_objective(problem) {
            Some(d) if d == primal_value => Ok(()),
            Some(_) => Err("nonzero duality gap".into()),
            None => Err("dual objective undefined".into()),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::{int, rat};

    #[test]
    fn validate_rejects_ragged_rows() {
        let mut lp = LpProblem::new(Sense::Minimize, vec![int(1), int(1)]);
        lp.add_constraint(vec![int(1)], Relation::Le, int(1));
        assert!(matches!(lp.validate(), Err(Error::Input(_))));
        assert!(matches!(solve_lp(&lp), Err(Error::Input(_))));
    }

    #[test]
    fn validate_rejects_empty_problem() {
        let lp = LpProblem::new(Sense::Minimize, vec![]);
        assert!(lp.validate().is_err());
    }

    #[test]
    fn relation_symbols_round_trip() {
        for r in [Relation::Le, Relation::Eq, Relation::Ge] {
            assert_eq!(Relation::from_symbol(r.symbol()), Some(r));
        }
        assert!(Relation::Ge.holds(&rat(1, 2), &rat(1, 3)));
    }
}
