//! `rmd selftest`: random bounded LPs solved by the simplex and by vertex
//! enumeration, which must agree exactly.

use num_traits::Zero;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::json;

use rmd_core::lp::{self, LpProblem, Relation, Sense};
use rmd_core::scalar::{self, rat, Rational};
use rmd_core::Result;

use crate::ops::Verdict;

fn small(rng: &mut ChaCha8Rng) -> Rational {
    rat(rng.gen_range(-6..=6), rng.gen_range(1..=4))
}

pub fn run(seed: u64, cases: usize) -> Result<Vec<Verdict>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut first_failure = None;
    for case in 0..cases {
        let n = rng.gen_range(1..=6);
        let rows = rng.gen_range(1..=10usize);
        let objective: Vec<Rational> = (0..n).map(|_| small(&mut rng)).collect();
        let mut problem = LpProblem::new(Sense::Maximize, objective.clone());
        let mut a = Vec::new();
        let mut b = Vec::new();
        for r in 0..rows {
            // The last row caps the sum of variables so the program is bounded;
            // nonnegative right-hand sides keep the origin feasible.
            let coeffs: Vec<Rational> = if r == rows - 1 {
                vec![scalar::one(); n]
            } else {
                (0..n).map(|_| small(&mut rng)).collect()
            };
            let rhs = rat(rng.gen_range(0..=8), rng.gen_range(1..=3));
            problem.add_constraint(coeffs.clone(), Relation::Le, rhs.clone());
            a.push(coeffs);
            b.push(rhs);
        }
        for j in 0..n {
            let mut row = vec![Rational::zero(); n];
            row[j] = -scalar::one();
            a.push(row);
            b.push(Rational::zero());
        }
        let sol = lp::solve_lp(&problem)?;
        let verts = lp::enumerate_vertices(&a, &b, &[], &[])?;
        let brute = verts.iter().map(|v| scalar::dot(&objective, v)).max();
        let agrees = sol.value.is_some() && sol.value == brute && sol.verify(&problem).is_ok();
        if !agrees && first_failure.is_none() {
            first_failure = Some((case, sol.value.as_ref().map(scalar::format), brute.as_ref().map(scalar::format)));
        }
    }
    let pass = first_failure.is_none();
    let summary = match &first_failure {
        None => format!("selftest lp: PASS {cases} random programs agree with vertex enumeration"),
        Some((case, lp, brute)) => format!("selftest lp: FAIL case {case}: simplex {lp:?} vs vertices {brute:?}"),
    };
    let detail = json!({
        "check": "selftest.lp",
        "pass": pass,
        "cases": cases,
        "seed": seed,
        "failure": first_failure.map(|(case, lp, brute)| json!({"case": case, "simplex": lp, "vertices": brute})),
    });
    Ok(vec![Verdict { pass, summary, detail }])
}
