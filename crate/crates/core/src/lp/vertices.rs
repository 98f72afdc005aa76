use std::collections::BTreeSet;

use num_traits::{One, Zero};

use crate::error::{Error, Result};
use crate::scalar::Rational;

pub const VERTEX_MAX_DIM: usize = 8;
pub const VERTEX_MAX_ROWS: usize = 24;

/// Row-echelon basis of an augmented system `[a | b]`, grown one row at
/// a time. Deliberately independent of the simplex and `linalg` code.
#[derive(Clone)]
struct Echelon {
    dim: usize,
    rows: Vec<(usize, Vec<Rational>)>,
}

enum Insert {
    Added,
    Dependent,
    Inconsistent,
}

impl Echelon {
    fn new(dim: usize) -> Self {
        Echelon { dim, rows: Vec::new() }
    }

    fn insert(&mut self, coeffs: &[Rational], rhs: &Rational) -> Insert {
        let mut row: Vec<Rational> = coeffs.to_vec();
        row.push(rhs.clone());
        for (p, r) in &self.rows {
            if row[*p].is_zero() {
                continue;
            }
            let f = row[*p].clone();
            for (a, ra) in row.iter_mut().zip(r) {
                if !ra.is_zero() {
                    *a -= &f * ra;
                }
            }
        }
        match (0..self.dim).find(|&c| !row[c].is_zero()) {
            None if row[self.dim].is_zero() => Insert::Dependent,
            None => Insert::Inconsistent,
            Some(p) => {
                let inv = row[p].recip();
                for a in row.iter_mut() {
                    *a *= &inv;
                }
                self.rows.push((p, row));
                Insert::Added
            }
        }
    }

    /// Unique solution; only valid once the rank equals `dim`.
    fn solve(&self) -> Vec<Rational> {
        let mut x = vec![Rational::zero(); self.dim];
        for (p, r) in self.rows.iter().rev() {
            let mut v = r[self.dim].clone();
            for c in 0..self.dim {
                if c != *p && !r[c].is_zero() {
                    v -= &r[c] * &x[c];
                }
            }
            x[*p] = v;
        }
        x
    }
}

/// Extreme points of `{x : A x <= b, C x = d}`, deduplicated and sorted
/// lexicographically.
///
/// Brute force: every way of making `dim - rank(C)` inequality rows
/// active is tried and the unique solutions that satisfy all rows are
/// kept. Guarded to `dim <= 8` and at most 24 rows in total. An empty
/// polyhedron yields an empty list.
pub fn enumerate_vertices(
    a: &[Vec<Rational>],
    b: &[Rational],
    eq_a: &[Vec<Rational>],
    eq_b: &[Rational],
) -> Result<Vec<Vec<Rational>>> {
    let dim = a.first().or(eq_a.first()).map_or(0, Vec::len);
    if a.len() != b.len() || eq_a.len() != eq_b.len() {
        return Err(Error::input("row and right-hand-side counts differ"));
    }
    if a.iter().chain(eq_a).any(|r| r.len() != dim) {
        return Err(Error::input("rows have inconsistent widths"));
    }
    if dim == 0 {
        return Err(Error::input("vertex enumeration needs at least one coordinate"));
    }
    if dim > VERTEX_MAX_DIM || a.len() + eq_a.len() > VERTEX_MAX_ROWS {
        return Err(Error::capability(format!(
            "vertex enumeration limited to dimension {VERTEX_MAX_DIM} and {VERTEX_MAX_ROWS} rows (got {dim} and {})",
            a.len() + eq_a.len()
        )));
    }
    let mut base = Echelon::new(dim);
    for (row, rhs) in eq_a.iter().zip(eq_b) {
        if let Insert::Inconsistent = base.insert(row, rhs) {
            return Ok(Vec::new());
        }
    }
    let need = dim - base.rows.len();
    let mut found = BTreeSet::new();
    let feasible = |x: &[Rational]| {
        a.iter().zip(b).all(|(row, rhs)| {
            let lhs = row.iter().zip(x).fold(Rational::zero(), |acc, (p, q)| acc + p * q);
            lhs <= *rhs
        })
    };
    search(a, b, 0, need, &base, &mut |ech| {
        let x = ech.solve();
        if feasible(&x) {
            found.insert(x);
        }
    });
    Ok(found.into_iter().collect())
}

fn search(
    a: &[Vec<Rational>],
    b: &[Rational],
    start: usize,
    need: usize,
    ech: &Echelon,
    emit: &mut dyn FnMut(&Echelon),
) {
    if need == 0 {
        emit(ech);
        return;
    }
    if a.len() < start + need {
        return;
    }
    for i in start..=a.len() - need {
        let mut next = ech.clone();
        if let Insert::Added = next.insert(&a[i], &b[i]) {
            search(a, b, i + 1, need - 1, &next, emit);
        }
    }
}

/// Inequality rows `-x_j <= 0` for every coordinate, the usual companion
/// of a probability-simplex system.
pub(crate) fn nonnegativity_rows(dim: usize) -> Vec<Vec<Rational>> {
    (0..dim)
        .map(|j| {
            let mut r = vec![Rational::zero(); dim];
            r[j] = -Rational::one();
            r
        })
        .collect()
}
