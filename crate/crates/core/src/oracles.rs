//! Slow brute-force counterparts of the LP-based checks, for tests and the
//! `--oracle` cross-check. Extrema come from explicit vertex lists built by
//! the echelon enumerator, never from the simplex solver's pivoting on the
//! original problem.

use num_integer::Integer;
use num_traits::{One, ToPrimitive, Zero};

use crate::beliefs::BeliefPolytope;
use crate::error::{Error, Result};
use crate::extraction::ExtractionInstance;
use crate::lp::{self, LpProblem, Relation, Sense};
use crate::scalar::{dot, Rational};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct OracleBudget {
    pub max_vertices: usize,
    pub max_resolution: u32,
    /// Cap on enumerated `(μ, selection)` combinations.
    pub max_cells: u64,
}

impl Default for OracleBudget {
    fn default() -> Self {
        OracleBudget {
            max_vertices: 64,
            max_resolution: 256,
            max_cells: 20_000_000,
        }
    }
}

impl OracleBudget {
    fn validate(&self) -> Result<()> {
        if self.max_vertices == 0 || self.max_resolution == 0 || self.max_cells == 0 {
            return Err(Error::input("oracle budget entries must be positive"));
        }
        Ok(())
    }
}

fn vertices(p: &BeliefPolytope, budget: &OracleBudget) -> Result<Vec<Vec<Rational>>> {
    let v = p.vertices()?;
    if v.len() > budget.max_vertices {
        return Err(Error::capability(format!(
            "{} vertices exceed the oracle budget of {}",
            v.len(),
            budget.max_vertices
        )));
    }
    Ok(v)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WorstCase {
    pub min: Rational,
    pub max: Rational,
    pub argmin: Vec<Rational>,
    pub argmax: Vec<Rational>,
}

/// Extrema of `π·w` by evaluating every vertex; ties keep the first vertex
/// in lexicographic order.
pub fn brute_worst_case(p: &BeliefPolytope, w: &[Rational], budget: &OracleBudget) -> Result<WorstCase> {
    budget.validate()?;
    if w.len() != p.dim() {
        return Err(Error::input("objective width must equal the state count"));
    }
    let verts = vertices(p, budget)?;
    let mut best: Option<WorstCase> = None;
    for v in verts {
        let x = dot(&v, w);
        match &mut best {
            None => {
                best = Some(WorstCase {
                    min: x.clone(),
                    max: x,
                    argmin: v.clone(),
                    argmax: v,
                })
            }
            Some(b) => {
                if x < b.min {
                    b.min = x.clone();
                    b.argmin = v.clone();
                }
                if x > b.max {
                    b.max = x;
                    b.argmax = v;
                }
            }
        }
    }
    best.ok_or_else(|| Error::input("belief set has no vertices"))
}

fn small_instance(inst: &ExtractionInstance) -> Result<()> {
    if inst.num_types() > 3 || inst.states().len() > 3 {
        return Err(Error::capability("oracles handle at most 3 types and 3 states"));
    }
    Ok(())
}

/// Optimal value of the robust extraction program with every robust
/// constraint expanded over the vertices of `Π(t)`.
pub fn brute_vse(inst: &ExtractionInstance, budget: &OracleBudget) -> Result<Rational> {
    budget.validate()?;
    small_instance(inst)?;
    let k = inst.num_types();
    let m = inst.states().len();
    let verts = inst
        .beliefs()
        .iter()
        .map(|p| vertices(p, budget))
        .collect::<Result<Vec<_>>>()?;
    let mut objective = vec![Rational::zero(); 1 + k * m];
    objective[0] = Rational::one();
    let mut lp = LpProblem::new(Sense::Minimize, objective);
    for j in 0..1 + k * m {
        lp.set_free(j);
    }
    let z = |t: usize, s: usize| 1 + t * m + s;
    for t in 0..k {
        for v in &verts[t] {
            // π·z(t) - c <= 0
            let mut terms: Vec<(usize, Rational)> = (0..m).map(|s| (z(t, s), v[s].clone())).collect();
            terms.push((0, -Rational::one()));
            lp.add_sparse(&terms, Relation::Le, Rational::zero());
            for tp in 0..k {
                // -π·z(t') - c <= v(t') - v(t)
                let mut terms: Vec<(usize, Rational)> = (0..m).map(|s| (z(tp, s), -v[s].clone())).collect();
                terms.push((0, -Rational::one()));
                lp.add_sparse(&terms, Relation::Le, &inst.values()[tp] - &inst.values()[t]);
            }
        }
    }
    let sol = lp::solve_lp(&lp)?;
    sol.value
        .ok_or_else(|| Error::capability(format!("oracle program ended {:?}", sol.status)))
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BrutePiViolation {
    pub anchor: usize,
    pub mu: Vec<Rational>,
    /// Vertex chosen for each type with positive weight.
    pub selections: Vec<Option<Vec<Rational>>>,
}

/// Weights `a` with `Σ a = total`, in lexicographic order.
fn compositions(parts: usize, total: u32) -> Vec<Vec<u32>> {
    if parts == 1 {
        return vec![vec![total]];
    }
    let mut out = Vec::new();
    for first in 0..=total {
        for mut rest in compositions(parts - 1, total - first) {
            rest.insert(0, first);
            out.push(rest);
        }
    }
    out
}

/// Row `a·π <= b` of the anchor with every `a·vertex` over one common
/// denominator, so membership of a mixture is an integer comparison.
struct ScaledRow {
    /// `values[t][vertex]`
    values: Vec<Vec<i128>>,
    rhs: i128,
}

fn scale_row(coeffs: &[Rational], rhs: &Rational, verts: &[Vec<Vec<Rational>>]) -> Option<ScaledRow> {
    let raw: Vec<Vec<Rational>> = verts.iter().map(|vs| vs.iter().map(|v| dot(coeffs, v)).collect()).collect();
    let mut denom = rhs.denom().clone();
    for x in raw.iter().flatten() {
        denom = denom.lcm(x.denom());
    }
    let to_int = |x: &Rational| (x.numer() * (&denom / x.denom())).to_i64().map(i128::from);
    let values = raw
        .iter()
        .map(|row| row.iter().map(to_int).collect::<Option<Vec<_>>>())
        .collect::<Option<Vec<_>>>()?;
    Some(ScaledRow {
        values,
        rhs: to_int(rhs)?,
    })
}

fn odometer(sizes: &[usize], idx: &mut [usize]) -> bool {
    for (i, n) in sizes.iter().enumerate().rev() {
        idx[i] += 1;
        if idx[i] < *n {
            return true;
        }
        idx[i] = 0;
    }
    false
}

/// Searches mixtures with weights on the `1/resolution` grid and vertex
/// selections for a point of some `Π(t₀)` written without putting all
/// weight on `t₀`. Weights with the smallest `μ_{t₀}` are tried first.
/// Finding nothing certifies nothing.
pub fn brute_pi(inst: &ExtractionInstance, resolution: u32, budget: &OracleBudget) -> Result<Option<BrutePiViolation>> {
    budget.validate()?;
    small_instance(inst)?;
    if resolution == 0 || resolution > budget.max_resolution {
        return Err(Error::capability(format!(
            "resolution {resolution} outside the oracle budget (1..={})",
            budget.max_resolution
        )));
    }
    let k = inst.num_types();
    let verts = inst
        .beliefs()
        .iter()
        .map(|p| vertices(p, budget))
        .collect::<Result<Vec<_>>>()?;
    let selections: u64 = verts.iter().map(|v| v.len() as u64).product();
    let weights = compositions(k, resolution);
    if (weights.len() as u64).saturating_mul(selections).saturating_mul(k as u64) > budget.max_cells {
        return Err(Error::capability("oracle search space exceeds the cell budget"));
    }
    let res = i128::from(resolution);
    let sizes: Vec<usize> = verts.iter().map(Vec::len).collect();

    for anchor in 0..k {
        let rows: Option<Vec<ScaledRow>> = inst.beliefs()[anchor]
            .halfspaces()
            .iter()
            .map(|h| scale_row(&h.coeffs, &h.rhs, &verts))
            .collect();
        let mut order: Vec<&Vec<u32>> = weights.iter().filter(|a| a[anchor] < resolution).collect();
        order.sort_by_key(|a| a[anchor]);
        for a in order {
            let mut idx = vec![0usize; k];
            loop {
                let inside = match &rows {
                    Some(rows) => rows.iter().all(|r| {
                        let lhs: i128 = (0..k).map(|t| i128::from(a[t]) * r.values[t][idx[t]]).sum();
                        lhs <= res * r.rhs
                    }),
                    None => {
                        let r = Rational::from_integer(i64::from(resolution).into());
                        let point: Vec<Rational> = (0..inst.states().len())
                            .map(|s| {
                                (0..k)
                                    .map(|t| Rational::from_integer(i64::from(a[t]).into()) * &verts[t][idx[t]][s])
                                    .sum::<Rational>()
                                    / &r
                            })
                            .collect();
                        inst.beliefs()[anchor].contains(&point)
                    }
                };
                if inside {
                    let mu: Vec<Rational> = a
                        .iter()
                        .map(|&x| Rational::new(i64::from(x).into(), i64::from(resolution).into()))
                        .collect();
                    let selections = (0..k).map(|t| (a[t] > 0).then(|| verts[t][idx[t]].clone())).collect();
                    return Ok(Some(BrutePiViolation { anchor, mu, selections }));
                }
                if !odometer(&sizes, &mut idx) {
                    break;
                }
            }
        }
    }
    Ok(None)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::beliefs::{BeliefPolytope, StateSpace};
    use crate::lp::Constraint;
    use crate::scalar::{int, rat};

    fn two() -> StateSpace {
        StateSpace::numbered(2).unwrap()
    }

    #[test]
    fn worst_case_examples() {
        let b = OracleBudget::default();
        let simplex = BeliefPolytope::simplex(two());
        let r = brute_worst_case(&simplex, &[int(1), int(0)], &b).unwrap();
        assert_eq!((r.min, r.max), (int(0), int(1)));
        assert_eq!(r.argmin, vec![int(0), int(1)]);
        assert_eq!(r.argmax, vec![int(1), int(0)]);

        let band = BeliefPolytope::new(
            two(),
            vec![
                Constraint {
                    coeffs: vec![int(1), int(0)],
                    relation: Relation::Ge,
                    rhs: rat(1, 4),
                },
                Constraint {
                    coeffs: vec![int(1), int(0)],
                    relation: Relation::Le,
                    rhs: rat(3, 4),
                },
            ],
        )
        .unwrap();
        let r = brute_worst_case(&band, &[int(1), int(-1)], &b).unwrap();
        assert_eq!((r.min, r.max), (rat(-1, 2), rat(1, 2)));
        let r = brute_worst_case(&band, &[int(3), int(3)], &b).unwrap();
        assert_eq!((r.min, r.max), (int(3), int(3)));
    }

    #[test]
    fn budget_is_enforced() {
        let tight = OracleBudget {
            max_vertices: 1,
            ..OracleBudget::default()
        };
        let simplex = BeliefPolytope::simplex(two());
        assert!(matches!(brute_worst_case(&simplex, &[int(1), int(0)], &tight), Err(Error::Capability(_))));
    }

    #[test]
    fn compositions_cover_the_simplex_grid() {
        assert_eq!(compositions(3, 4).len(), 15);
        assert!(compositions(2, 3).iter().all(|c| c.iter().sum::<u32>() == 3));
    }
}
