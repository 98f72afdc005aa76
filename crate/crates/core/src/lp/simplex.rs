use num_traits::{One, Signed, Zero};

use super::{LpProblem, LpSolution, LpStatus, Relation, Sense};
use crate::error::Result;
use crate::scalar::Rational;

/// How an original variable is expressed through nonnegative columns.
#[derive(Debug, Clone)]
enum VarMap {
    /// x = lower + col
    Shift { col: usize, lower: Rational },
    /// x = upper - col
    Mirror { col: usize, upper: Rational },
    /// x = pos - neg
    Split { pos: usize, neg: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum ColKind {
    Structural,
    Slack,
    Artificial,
}

/// Equality-form problem `min c·x, A x = b, x >= 0, b >= 0` plus the
/// bookkeeping needed to map results back.
struct StandardForm {
    rows: Vec<Vec<Rational>>,
    rhs: Vec<Rational>,
    cost: Vec<Rational>,
    kinds: Vec<ColKind>,
    /// Column that is basic in row `i` at the start of phase one.
    initial_basic: Vec<usize>,
    /// +1/-1: factor applied to user row `i` to make its rhs nonnegative.
    row_flip: Vec<bool>,
    var_map: Vec<VarMap>,
    /// Objective constant picked up by bound shifts.
    constant: Rational,
}

fn build_standard_form(p: &LpProblem) -> Option<StandardForm> {
    let n = p.num_vars();
    let negate = p.sense == Sense::Maximize;
    let mut var_map = Vec::with_capacity(n);
    let mut ncols = 0usize;
    // Upper-bound rows for variables bounded on both sides: (col, width).
    let mut box_rows: Vec<(usize, Rational)> = Vec::new();
    for b in &p.bounds {
        match (&b.lower, &b.upper) {
            (Some(l), Some(u)) => {
                if l > u {
                    return None;
                }
                var_map.push(VarMap::Shift {
                    col: ncols,
                    lower: l.clone(),
                });
                box_rows.push((ncols, u - l));
                ncols += 1;
            }
            (Some(l), None) => {
                var_map.push(VarMap::Shift {
                    col: ncols,
                    lower: l.clone(),
                });
                ncols += 1;
            }
            (None, Some(u)) => {
                var_map.push(VarMap::Mirror {
                    col: ncols,
                    upper: u.clone(),
                });
                ncols += 1;
            }
            (None, None) => {
                var_map.push(VarMap::Split {
                    pos: ncols,
                    neg: ncols + 1,
                });
                ncols += 2;
            }
        }
    }
    let structural = ncols;

    let mut cost = vec![Rational::zero(); structural];
    let mut constant = Rational::zero();
    for (j, vm) in var_map.iter().enumerate() {
        let c = if negate { -&p.objective[j] } else { p.objective[j].clone() };
        match vm {
            VarMap::Shift { col, lower } => {
                constant += &c * lower;
                cost[*col] = c;
            }
            VarMap::Mirror { col, upper } => {
                constant += &c * upper;
                cost[*col] = -c;
            }
            VarMap::Split { pos, neg } => {
                cost[*neg] = -c.clone();
                cost[*pos] = c;
            }
        }
    }

    // Rows in terms of structural columns: (coeffs, relation, rhs).
    let mut raw: Vec<(Vec<Rational>, Relation, Rational)> = Vec::new();
    for row in &p.constraints {
        let mut coeffs = vec![Rational::zero(); structural];
        let mut rhs = row.rhs.clone();
        for (j, a) in row.coeffs.iter().enumerate() {
            if a.is_zero() {
                continue;
            }
            match &var_map[j] {
                VarMap::Shift { col, lower } => {
                    coeffs[*col] += a;
                    rhs -= a * lower;
                }
                VarMap::Mirror { col, upper } => {
                    coeffs[*col] -= a;
                    rhs -= a * upper;
                }
                VarMap::Split { pos, neg } => {
                    coeffs[*pos] += a;
                    coeffs[*neg] -= a;
                }
            }
        }
        raw.push((coeffs, row.relation, rhs));
    }
    for (col, width) in box_rows {
        let mut coeffs = vec![Rational::zero(); structural];
        coeffs[col] = Rational::one();
        raw.push((coeffs, Relation::Le, width));
    }

    let mut row_flip = Vec::with_capacity(raw.len());
    for (coeffs, rel, rhs) in raw.iter_mut() {
        let flip = rhs.is_negative();
        if flip {
            for a in coeffs.iter_mut() {
                *a = -&*a;
            }
            *rhs = -&*rhs;
            *rel = match *rel {
                Relation::Le => Relation::Ge,
                Relation::Ge => Relation::Le,
                Relation::Eq => Relation::Eq,
            };
        }
        row_flip.push(flip);
    }

    let m = raw.len();
    let mut kinds = vec![ColKind::Structural; structural];
    // Slack/surplus columns first, then artificials, so that ties in
    // Bland's rule prefer structural and slack columns.
    let mut slack_col = vec![None; m];
    for (i, (_, rel, _)) in raw.iter().enumerate() {
        if *rel != Relation::Eq {
            slack_col[i] = Some(kinds.len());
            kinds.push(ColKind::Slack);
        }
    }
    let mut art_col = vec![None; m];
    for (i, (_, rel, _)) in raw.iter().enumerate() {
        if *rel != Relation::Le {
            art_col[i] = Some(kinds.len());
            kinds.push(ColKind::Artificial);
        }
    }
    let total = kinds.len();
    let mut rows = Vec::with_capacity(m);
    let mut rhs_vec = Vec::with_capacity(m);
    let mut initial_basic = Vec::with_capacity(m);
    for (i, (coeffs, rel, rhs)) in raw.into_iter().enumerate() {
        let mut full = coeffs;
        full.resize(total, Rational::zero());
        match rel {
            Relation::Le => {
                let s = slack_col[i].unwrap();
                full[s] = Rational::one();
                initial_basic.push(s);
            }
            Relation::Ge => {
                full[slack_col[i].unwrap()] = -Rational::one();
                let a = art_col[i].unwrap();
                full[a] = Rational::one();
                initial_basic.push(a);
            }
            Relation::Eq => {
                let a = art_col[i].unwrap();
                full[a] = Rational::one();
                initial_basic.push(a);
            }
        }
        rows.push(full);
        rhs_vec.push(rhs);
    }
    cost.resize(total, Rational::zero());
    Some(StandardForm {
        rows,
        rhs: rhs_vec,
        cost,
        kinds,
        initial_basic,
        row_flip,
        var_map,
        constant,
    })
}

/// Dense tableau holding `B⁻¹A | B⁻¹b` for the current basis.
struct Tableau {
    rows: Vec<Vec<Rational>>,
    rhs: Vec<Rational>,
    basis: Vec<usize>,
    /// Original row index of each tableau row (rows can be dropped).
    row_id: Vec<usize>,
}

enum Outcome {
    Optimal,
    Unbounded,
}

impl Tableau {
    fn reduced_costs(&self, cost: &[Rational]) -> Vec<Rational> {
        let mut d = cost.to_vec();
        for (row, &b) in self.rows.iter().zip(&self.basis) {
            let cb = &cost[b];
            if cb.is_zero() {
                continue;
            }
            for (dj, a) in d.iter_mut().zip(row) {
                if !a.is_zero() {
                    *dj -= cb * a;
                }
            }
        }
        d
    }

    fn pivot(&mut self, r: usize, c: usize) {
        let p = self.rows[r][c].clone();
        if !p.is_one() {
            let inv = p.recip();
            for a in self.rows[r].iter_mut() {
                if !a.is_zero() {
                    *a *= &inv;
                }
            }
            self.rhs[r] *= &inv;
        }
        let pivot_row = self.rows[r].clone();
        let pivot_rhs = self.rhs[r].clone();
        for i in 0..self.rows.len() {
            if i == r {
                continue;
            }
            let f = self.rows[i][c].clone();
            if f.is_zero() {
                continue;
            }
            for (a, pa) in self.rows[i].iter_mut().zip(&pivot_row) {
                if !pa.is_zero() {
                    *a -= &f * pa;
                }
            }
            self.rhs[i] -= &f * &pivot_rhs;
        }
        self.basis[r] = c;
    }

    /// Minimizes `cost` with Bland's rule over columns allowed by `allowed`.
    fn optimize(&mut self, cost: &[Rational], allowed: &dyn Fn(usize) -> bool) -> Outcome {
        loop {
            let d = self.reduced_costs(cost);
            let entering = (0..d.len()).find(|&j| allowed(j) && d[j].is_negative());
            let Some(c) = entering else {
                return Outcome::Optimal;
            };
            let mut best: Option<(usize, Rational)> = None;
            for i in 0..self.rows.len() {
                let a = &self.rows[i][c];
                if !a.is_positive() {
                    continue;
                }
                let ratio = &self.rhs[i] / a;
                let better = match &best {
                    None => true,
                    Some((bi, br)) => ratio < *br || (ratio == *br && self.basis[i] < self.basis[*bi]),
                };
                if better {
                    best = Some((i, ratio));
                }
            }
            match best {
                None => return Outcome::Unbounded,
                Some((r, _)) => self.pivot(r, c),
            }
        }
    }
}

/// Solves an [`LpProblem`] exactly.
///
/// Two-phase primal simplex on a dense tableau; Bland's rule (lowest
/// eligible index enters, lowest basic index leaves among ratio ties)
/// guarantees termination and determinism.
pub fn solve_lp(problem: &LpProblem) -> Result<LpSolution> {
    problem.validate()?;
    let Some(sf) = build_standard_form(problem) else {
        return Ok(LpSolution::without_point(LpStatus::Infeasible));
    };
    let m = sf.rows.len();
    let total = sf.kinds.len();
    let mut tab = Tableau {
        rows: sf.rows.clone(),
        rhs: sf.rhs.clone(),
        basis: sf.initial_basic.clone(),
        row_id: (0..m).collect(),
    };

    // Phase one: minimize the sum of artificials.
    let has_artificial = sf.kinds.contains(&ColKind::Artificial);
    if has_artificial {
        let phase1: Vec<Rational> = sf
            .kinds
            .iter()
            .map(|k| {
                if *k == ColKind::Artificial {
                    Rational::one()
                } else {
                    Rational::zero()
                }
            })
            .collect();
        tab.optimize(&phase1, &|_| true);
        let infeasibility = tab
            .basis
            .iter()
            .zip(&tab.rhs)
            .filter(|(b, _)| sf.kinds[**b] == ColKind::Artificial)
            .fold(Rational::zero(), |acc, (_, v)| acc + v);
        if infeasibility.is_positive() {
            return Ok(LpSolution::without_point(LpStatus::Infeasible));
        }
        // Drive zero-level artificials out of the basis; drop redundant rows.
        let mut i = 0;
        while i < tab.rows.len() {
            if sf.kinds[tab.basis[i]] != ColKind::Artificial {
                i += 1;
                continue;
            }
            let col = (0..total).find(|&j| sf.kinds[j] != ColKind::Artificial && !tab.rows[i][j].is_zero());
            match col {
                Some(j) => {
                    tab.pivot(i, j);
                    i += 1;
                }
                None => {
                    tab.rows.remove(i);
                    tab.rhs.remove(i);
                    tab.basis.remove(i);
                    tab.row_id.remove(i);
                }
            }
        }
    }

    let kinds = &sf.kinds;
    if let Outcome::Unbounded = tab.optimize(&sf.cost, &|j| kinds[j] != ColKind::Artificial) {
        return Ok(LpSolution::without_point(LpStatus::Unbounded));
    }

    // Standard-form primal.
    let mut xs = vec![Rational::zero(); total];
    for (b, v) in tab.basis.iter().zip(&tab.rhs) {
        xs[*b] = v.clone();
    }
    let primal: Vec<Rational> = sf
        .var_map
        .iter()
        .map(|vm| match vm {
            VarMap::Shift { col, lower } => lower + &xs[*col],
            VarMap::Mirror { col, upper } => upper - &xs[*col],
            VarMap::Split { pos, neg } => &xs[*pos] - &xs[*neg],
        })
        .collect();

    // y'ᵢ = c_B B⁻¹ eᵢ, read off the column that was basic in row i at the
    // start (its original column is eᵢ). With zero cost on that column,
    // y'ᵢ = -dᵢ.
    let d = tab.reduced_costs(&sf.cost);
    let mut y_std = vec![Rational::zero(); m];
    let live: std::collections::HashSet<usize> = tab.row_id.iter().copied().collect();
    for i in 0..m {
        if live.contains(&i) {
            y_std[i] = -&d[sf.initial_basic[i]];
        }
    }
    let negate = problem.sense == Sense::Maximize;
    let dual: Vec<Rational> = (0..problem.constraints.len())
        .map(|i| {
            let mut y = y_std[i].clone();
            if sf.row_flip[i] {
                y = -y;
            }
            if negate {
                y = -y;
            }
            y
        })
        .collect();
    let reduced_costs: Vec<Rational> = (0..problem.num_vars())
        .map(|j| {
            let mut r = problem.objective[j].clone();
            for (row, y) in problem.constraints.iter().zip(&dual) {
                if !y.is_zero() {
                    r -= &row.coeffs[j] * y;
                }
            }
            r
        })
        .collect();
    let value = problem.objective_value(&primal);
    debug_assert_eq!(
        {
            let internal: Rational = sf.cost.iter().zip(&xs).fold(Rational::zero(), |a, (c, x)| a + c * x);
            let v = internal + &sf.constant;
            if negate {
                -v
            } else {
                v
            }
        },
        value
    );
    let mut basis = tab.basis.clone();
    basis.sort_unstable();
    Ok(LpSolution {
        status: LpStatus::Optimal,
        value: Some(value),
        primal,
        dual,
        reduced_costs,
        basis,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::{int, rat};

    fn check(problem: &LpProblem) -> LpSolution {
        let sol = solve_lp(problem).unwrap();
        sol.verify(problem).unwrap();
        sol
    }

    #[test]
    fn single_variable_box() {
        let mut lp = LpProblem::new(Sense::Maximize, vec![int(1)]);
        lp.add_constraint(vec![int(1)], Relation::Le, int(1));
        lp.add_constraint(vec![int(1)], Relation::Ge, int(0));
        let sol = check(&lp);
        assert_eq!(sol.value, Some(int(1)));
        assert_eq!(sol.dual[0], int(1));
        assert_eq!(sol.dual[1], int(0));
    }

    #[test]
    fn contradictory_bounds_are_infeasible() {
        let mut lp = LpProblem::new(Sense::Minimize, vec![int(0)]);
        lp.add_constraint(vec![int(1)], Relation::Le, int(-1));
        lp.add_constraint(vec![int(1)], Relation::Ge, int(0));
        assert_eq!(solve_lp(&lp).unwrap().status, LpStatus::Infeasible);
    }

    #[test]
    fn inverted_variable_bounds_are_infeasible() {
        let mut lp = LpProblem::new(Sense::Minimize, vec![int(1)]);
        lp.set_bounds(0, Some(int(2)), Some(int(1)));
        assert_eq!(solve_lp(&lp).unwrap().status, LpStatus::Infeasible);
    }

    #[test]
    fn clipped_square() {
        // max x+y, x+y <= 3/2, 0 <= x,y <= 1. Vertices of the feasible
        // pentagon: (0,0),(1,0),(1,1/2),(1/2,1),(0,1); best value 3/2.
        let mut lp = LpProblem::new(Sense::Maximize, vec![int(1), int(1)]);
        lp.add_constraint(vec![int(1), int(1)], Relation::Le, rat(3, 2));
        lp.set_bounds(0, Some(int(0)), Some(int(1)));
        lp.set_bounds(1, Some(int(0)), Some(int(1)));
        let sol = check(&lp);
        assert_eq!(sol.value, Some(rat(3, 2)));
    }

    #[test]
    fn unbounded_ray() {
        let mut lp = LpProblem::new(Sense::Maximize, vec![int(1), int(0)]);
        lp.add_constraint(vec![int(1), int(-1)], Relation::Le, int(1));
        assert_eq!(solve_lp(&lp).unwrap().status, LpStatus::Unbounded);
    }

    #[test]
    fn free_and_mirrored_variables() {
        // min x - y with x free, y <= 3, x >= y - 2, x >= -5.
        let mut lp = LpProblem::new(Sense::Minimize, vec![int(1), int(-1)]);
        lp.set_free(0);
        lp.set_bounds(1, None, Some(int(3)));
        lp.add_constraint(vec![int(1), int(-1)], Relation::Ge, int(-2));
        lp.add_constraint(vec![int(1), int(0)], Relation::Ge, int(-5));
        let sol = check(&lp);
        assert_eq!(sol.value, Some(int(-2)));
    }

    #[test]
    fn redundant_equalities() {
        let mut lp = LpProblem::new(Sense::Minimize, vec![int(1), int(2)]);
        lp.add_constraint(vec![int(1), int(1)], Relation::Eq, int(1));
        lp.add_constraint(vec![int(2), int(2)], Relation::Eq, int(2));
        let sol = check(&lp);
        assert_eq!(sol.value, Some(int(1)));
        assert_eq!(sol.primal, vec![int(1), int(0)]);
    }

    #[test]
    fn degenerate_problem_terminates() {
        // Beale's cycling example; Bland's rule must terminate.
        let mut lp = LpProblem::new(Sense::Minimize, vec![rat(-3, 4), int(150), rat(-1, 50), int(6)]);
        lp.add_constraint(vec![rat(1, 4), int(-60), rat(-1, 25), int(9)], Relation::Le, int(0));
        lp.add_constraint(vec![rat(1, 2), int(-90), rat(-1, 50), int(3)], Relation::Le, int(0));
        lp.add_constraint(vec![int(0), int(0), int(1), int(0)], Relation::Le, int(1));
        let sol = check(&lp);
        assert_eq!(sol.value, Some(rat(-1, 20)));
    }

    #[test]
    fn identical_inputs_give_identical_outputs() {
        let mut lp = LpProblem::new(Sense::Maximize, vec![int(2), int(3), int(1)]);
        lp.add_constraint(vec![int(1), int(1), int(1)], Relation::Le, int(4));
        lp.add_constraint(vec![int(1), int(3), int(0)], Relation::Le, int(6));
        lp.add_constraint(vec![int(2), int(0), int(1)], Relation::Ge, int(1));
        assert_eq!(solve_lp(&lp).unwrap(), solve_lp(&lp).unwrap());
    }
}
