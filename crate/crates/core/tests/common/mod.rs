//! Seeded generators and the invariant suites shared by `invariants.rs`
//! and the acceptance target. Each suite returns `Err(description)` on the
//! first counterexample so callers can print it.
#![allow(dead_code)]

use num_traits::{One, Signed, Zero};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use rmd_core::beliefs::{self, BeliefMap, BeliefPolytope, ContaminationSpec, Origin, StateSpace};
use rmd_core::envelope;
use rmd_core::extraction::{self, ExtractionInstance, Menu, MenuMode};
use rmd_core::grid::TypeGrid;
use rmd_core::ic::{self, ModelRef, MonotonicityKind};
use rmd_core::lp::{self, LpProblem, LpStatus, Relation, Sense};
use rmd_core::models::{self, AuctionModel, GeneralModel, IndirectMechanism, Mechanism, QuasilinearModel};
use rmd_core::oracles::{self, OracleBudget};
use rmd_core::scalar::{dot, int, rat, Rational};
use rmd_core::scenario::{self, Scenario, ScenarioModel};

pub const DEFAULT_SEED: u64 = 20240917;

macro_rules! ensure {
    ($cond:expr, $($arg:tt)*) => {
        if !$cond {
            return Err(format!($($arg)*));
        }
    };
}

pub type Outcome = Result<(), String>;

fn lift<T, E: std::fmt::Debug>(r: Result<T, E>, what: &str) -> Result<T, String> {
    r.map_err(|e| format!("{what}: {e:?}"))
}

/// Independent stream per suite so suites can run in any order.
pub fn rng(seed: u64, salt: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed ^ salt.wrapping_mul(0x9E37_79B9_7F4A_7C15))
}

pub fn small(rng: &mut ChaCha8Rng, lo: i64, hi: i64, max_den: i64) -> Rational {
    rat(rng.gen_range(lo..=hi), rng.gen_range(1..=max_den))
}

/// Random point of the simplex on the `1/den` lattice.
pub fn distribution(rng: &mut ChaCha8Rng, m: usize, den: i64) -> Vec<Rational> {
    let mut w: Vec<i64> = (0..m).map(|_| rng.gen_range(0..=den)).collect();
    if w.iter().all(|&x| x == 0) {
        w[rng.gen_range(0..m)] = 1;
    }
    let total: i64 = w.iter().sum();
    w.into_iter().map(|x| rat(x, total)).collect()
}

pub fn states(m: usize) -> StateSpace {
    StateSpace::numbered(m).unwrap()
}

// ---------------------------------------------------------------- lp_core

pub struct RandomLp {
    pub problem: LpProblem,
    /// `a x <= b` including `-x <= 0`, for vertex enumeration.
    pub a: Vec<Vec<Rational>>,
    pub b: Vec<Rational>,
    pub eq_a: Vec<Vec<Rational>>,
    pub eq_b: Vec<Rational>,
}

/// At most 6 variables and 10 rows; the first row caps `Σx`, so every
/// feasible instance is bounded. Some instances are infeasible.
pub fn random_lp(rng: &mut ChaCha8Rng) -> RandomLp {
    let n = rng.gen_range(1..=6);
    let rows = rng.gen_range(1..=10usize);
    let sense = if rng.gen_bool(0.5) { Sense::Minimize } else { Sense::Maximize };
    let objective: Vec<Rational> = (0..n).map(|_| small(rng, -5, 5, 3)).collect();
    let mut problem = LpProblem::new(sense, objective);
    let (mut a, mut b, mut eq_a, mut eq_b) = (Vec::new(), Vec::new(), Vec::new(), Vec::new());
    for r in 0..rows {
        let (coeffs, relation, rhs) = if r == 0 {
            (vec![Rational::one(); n], Relation::Le, small(rng, 1, 10, 3))
        } else {
            let coeffs: Vec<Rational> = (0..n)
                .map(|_| if rng.gen_bool(0.25) { Rational::zero() } else { small(rng, -5, 5, 3) })
                .collect();
            match rng.gen_range(0..20) {
                0..=11 => (coeffs, Relation::Le, small(rng, 0, 8, 3)),
                12..=16 => (coeffs, Relation::Ge, small(rng, -3, 3, 3)),
                _ => (coeffs, Relation::Eq, small(rng, 0, 4, 3)),
            }
        };
        match relation {
            Relation::Le => {
                a.push(coeffs.clone());
                b.push(rhs.clone());
            }
            Relation::Ge => {
                a.push(coeffs.iter().map(|x| -x).collect());
                b.push(-rhs.clone());
            }
            Relation::Eq => {
                eq_a.push(coeffs.clone());
                eq_b.push(rhs.clone());
            }
        }
        problem.add_constraint(coeffs, relation, rhs);
    }
    for j in 0..n {
        let mut row = vec![Rational::zero(); n];
        row[j] = -Rational::one();
        a.push(row);
        b.push(Rational::zero());
    }
    RandomLp { problem, a, b, eq_a, eq_b }
}

/// Certificate check written from the definitions, without `verify`.
fn certificate_holds(p: &LpProblem, sol: &lp::LpSolution) -> Outcome {
    let x = &sol.primal;
    let maximize = p.sense == Sense::Maximize;
    ensure!(x.iter().all(|v| !v.is_negative()), "negative primal entry");
    for (i, (row, y)) in p.constraints.iter().zip(&sol.dual).enumerate() {
        let lhs = dot(&row.coeffs, x);
        let ok = match row.relation {
            Relation::Le => lhs <= row.rhs,
            Relation::Ge => lhs >= row.rhs,
            Relation::Eq => lhs == row.rhs,
        };
        ensure!(ok, "row {i} infeasible");
        let sign = match (row.relation, maximize) {
            (Relation::Eq, _) => true,
            (Relation::Le, true) | (Relation::Ge, false) => !y.is_negative(),
            (Relation::Le, false) | (Relation::Ge, true) => !y.is_positive(),
        };
        ensure!(sign, "row {i} dual sign");
        ensure!((y * (&lhs - &row.rhs)).is_zero(), "row {i} complementary slackness");
    }
    let mut dual_value = Rational::zero();
    for (row, y) in p.constraints.iter().zip(&sol.dual) {
        dual_value += &row.rhs * y;
    }
    for j in 0..x.len() {
        let col: Rational = p.constraints.iter().zip(&sol.dual).map(|(r, y)| &r.coeffs[j] * y).sum();
        let r = &p.objective[j] - col;
        ensure!(r == sol.reduced_costs[j], "reduced cost {j}");
        let sign = if maximize { !r.is_positive() } else { !r.is_negative() };
        ensure!(sign, "reduced cost {j} sign");
        ensure!((&r * &x[j]).is_zero(), "variable {j} complementary slackness");
    }
    ensure!(Some(&dual_value) == sol.value.as_ref(), "duality gap");
    Ok(())
}

pub fn lp_certificates(seed: u64) -> Outcome {
    let mut rng = rng(seed, 1);
    for case in 0..60 {
        let inst = random_lp(&mut rng);
        let sol = lift(lp::solve_lp(&inst.problem), "solve")?;
        if sol.status == LpStatus::Optimal {
            certificate_holds(&inst.problem, &sol).map_err(|e| format!("case {case}: {e}"))?;
        }
    }
    Ok(())
}

/// Simplex optimum against the best enumerated vertex; returns how many
/// instances were optimal.
pub fn lp_matches_vertices(seed: u64, cases: usize) -> Result<usize, String> {
    let mut rng = rng(seed, 2);
    let mut optimal = 0;
    for case in 0..cases {
        let inst = random_lp(&mut rng);
        let sol = lift(lp::solve_lp(&inst.problem), "solve")?;
        let verts = lift(lp::enumerate_vertices(&inst.a, &inst.b, &inst.eq_a, &inst.eq_b), "vertices")?;
        let values = verts.iter().map(|v| inst.problem.objective_value(v));
        let best = match inst.problem.sense {
            Sense::Maximize => values.max(),
            Sense::Minimize => values.min(),
        };
        match best {
            None => ensure!(sol.status == LpStatus::Infeasible, "case {case}: expected infeasible, got {:?}", sol.status),
            Some(best) => {
                ensure!(sol.value.as_ref() == Some(&best), "case {case}: simplex {:?} vs vertices {best}", sol.value);
                ensure!(sol.dual_objective(&inst.problem).as_ref() == Some(&best), "case {case}: duality gap");
                lift(sol.verify(&inst.problem), "verify")?;
                optimal += 1;
            }
        }
    }
    Ok(optimal)
}

pub fn lp_agrees_with_vertices(seed: u64) -> Outcome {
    lp_matches_vertices(seed, 40).map(|_| ())
}

pub fn lp_determinism(seed: u64) -> Outcome {
    let mut rng = rng(seed, 3);
    for case in 0..30 {
        let inst = random_lp(&mut rng);
        let a = lift(lp::solve_lp(&inst.problem), "solve")?;
        let b = lift(lp::solve_lp(&inst.problem.clone()), "solve")?;
        ensure!(a == b, "case {case}: two solves differ");
    }
    Ok(())
}

// ---------------------------------------------------------------- beliefs

pub fn random_contamination(rng: &mut ChaCha8Rng, m: usize) -> ContaminationSpec {
    ContaminationSpec::new(distribution(rng, m, 6), rat(rng.gen_range(1..=8), 8)).unwrap()
}

/// Hull of 1..=3 lattice points.
pub fn random_hull(rng: &mut ChaCha8Rng, m: usize) -> BeliefPolytope {
    let k = rng.gen_range(1..=3);
    let pts: Vec<Vec<Rational>> = (0..k).map(|_| distribution(rng, m, 4)).collect();
    BeliefPolytope::from_points(states(m), &pts).unwrap()
}

pub fn contamination_dimension(seed: u64) -> Outcome {
    let mut rng = rng(seed, 10);
    for case in 0..40 {
        let m = rng.gen_range(2..=4);
        let spec = random_contamination(&mut rng, m);
        let p = lift(beliefs::make_contamination(states(m), &spec), "contamination")?;
        ensure!(p.has_full_dimension(), "case {case}: eps > 0 not full");
        let flat = ContaminationSpec::new(spec.reference.clone(), Rational::zero()).unwrap();
        let q = lift(beliefs::make_contamination(states(m), &flat), "contamination")?;
        ensure!(!q.has_full_dimension(), "case {case}: eps = 0 full");
    }
    Ok(())
}

pub fn hull_dimension_matches_rank(seed: u64) -> Outcome {
    let mut rng = rng(seed, 11);
    for case in 0..40 {
        let m = rng.gen_range(2..=4);
        let k = rng.gen_range(1..=5);
        let pts: Vec<Vec<Rational>> = (0..k).map(|_| distribution(&mut rng, m, 3)).collect();
        let p = lift(BeliefPolytope::from_points(states(m), &pts), "hull")?;
        let verts = lift(p.vertices(), "vertices")?;
        ensure!(
            p.has_full_dimension() == (lp::affine_rank(&verts) == m - 1),
            "case {case}: full-dimension test disagrees with vertex rank"
        );
        ensure!(lp::affine_rank(&verts) == lp::affine_rank(&pts), "case {case}: hull changed the affine rank");
    }
    Ok(())
}

fn random_map(rng: &mut ChaCha8Rng, n: usize, m: usize) -> BeliefMap {
    let grid = TypeGrid::uniform(n).unwrap();
    let polys = (0..n)
        .map(|_| {
            if rng.gen_bool(0.5) {
                beliefs::make_contamination(states(m), &random_contamination(rng, m)).unwrap()
            } else {
                random_hull(rng, m)
            }
        })
        .collect();
    BeliefMap::new(grid, polys).unwrap()
}

pub fn overlap_window_monotone(seed: u64) -> Outcome {
    let mut rng = rng(seed, 12);
    for case in 0..20 {
        let n = rng.gen_range(2..=5);
        let m = rng.gen_range(2..=3);
        let map = random_map(&mut rng, n, m);
        for w in 1..n {
            let narrow = lift(map.overlap_profile(w), "profile")?;
            let wide = lift(map.overlap_profile(w + 1), "profile")?;
            ensure!(!wide.overlapping || narrow.overlapping, "case {case}: overlapping at {} but not {w}", w + 1);
            for (a, b) in narrow.records.iter().zip(&wide.records) {
                ensure!(!b.nonempty || a.nonempty, "case {case}: wider window nonempty, narrower empty");
                ensure!(b.dimension <= a.dimension, "case {case}: wider window has larger dimension");
                let inner: Vec<&BeliefPolytope> = map.polytopes()[b.lo..=b.hi].iter().collect();
                let outer: Vec<&BeliefPolytope> = map.polytopes()[a.lo..=a.hi].iter().collect();
                if let (Some(i), Some(o)) = (lift(beliefs::intersect(&inner), "i")?, lift(beliefs::intersect(&outer), "o")?) {
                    ensure!(i.is_subset_of(&o), "case {case}: wider intersection escapes");
                }
            }
        }
    }
    Ok(())
}

pub fn nesting_implies_containment(seed: u64) -> Outcome {
    let mut rng = rng(seed, 13);
    let mut nested_seen = 0;
    for case in 0..60 {
        let m = rng.gen_range(2..=3);
        let reference = distribution(&mut rng, m, 4);
        let outer = ContaminationSpec::new(reference.clone(), rat(rng.gen_range(1..=8), 8)).unwrap();
        let inner_ref = if rng.gen_bool(0.5) { reference } else { distribution(&mut rng, m, 4) };
        let inner = ContaminationSpec::new(inner_ref, rat(rng.gen_range(0..=8), 8)).unwrap();
        if lift(beliefs::contamination_nested(&inner, &outer), "nested")? {
            nested_seen += 1;
            let pin = lift(beliefs::make_contamination(states(m), &inner), "inner")?;
            let pout = lift(beliefs::make_contamination(states(m), &outer), "outer")?;
            for v in lift(pin.vertices(), "vertices")? {
                ensure!(pout.contains(&v), "case {case}: inner vertex outside outer set");
            }
        }
    }
    ensure!(nested_seen > 0, "no nested pair generated");
    Ok(())
}

// ---------------------------------------------------------------- models

fn table(rng: &mut ChaCha8Rng, rows: usize, cols: usize, f: &mut dyn FnMut(&mut ChaCha8Rng) -> Rational) -> Vec<Vec<Rational>> {
    (0..rows).map(|_| (0..cols).map(|_| f(rng)).collect()).collect()
}

pub fn random_quasilinear(rng: &mut ChaCha8Rng, n: usize, m: usize) -> QuasilinearModel {
    let q = table(rng, n, m, &mut |r| rat(r.gen_range(0..=4), 4));
    let p = table(rng, n, m, &mut |r| small(r, -4, 4, 4));
    QuasilinearModel::new(TypeGrid::uniform(n).unwrap(), states(m), q, p).unwrap()
}

/// Monotone `q` on a uniform grid with payments making `U` follow the
/// trapezoid rule, plus a state-dependent constant `offset`.
pub fn trapezoid_mechanism(rng: &mut ChaCha8Rng, n: usize, m: usize, offset: &[Rational]) -> QuasilinearModel {
    let grid = TypeGrid::uniform(n).unwrap();
    let step = rat(1, n as i64 - 1);
    let mut q = vec![vec![Rational::zero(); m]; n];
    for s in 0..m {
        let mut level = 0;
        for row in q.iter_mut() {
            level = rng.gen_range(level..=4);
            row[s] = rat(level, 4);
        }
    }
    let mut p = vec![vec![Rational::zero(); m]; n];
    for s in 0..m {
        let mut u = Rational::zero();
        for k in 0..n {
            if k > 0 {
                u += (&q[k - 1][s] + &q[k][s]) / int(2) * &step;
            }
            p[k][s] = grid.value(k) * &q[k][s] - &u + &offset[s];
        }
    }
    QuasilinearModel::new(grid, states(m), q, p).unwrap()
}

pub fn random_auction(rng: &mut ChaCha8Rng) -> AuctionModel {
    let agents = rng.gen_range(1..=3);
    let grids: Vec<TypeGrid> = (0..agents).map(|_| TypeGrid::uniform(rng.gen_range(2..=3)).unwrap()).collect();
    let profiles: usize = grids.iter().map(TypeGrid::len).product();
    let probe = AuctionModel::new(
        grids.clone(),
        vec![vec![Rational::zero(); profiles]; agents],
        vec![vec![Rational::zero(); profiles]; agents],
        vec![vec![Rational::zero(); profiles]; agents],
        vec![vec![Rational::zero(); profiles]; agents],
    )
    .unwrap();
    let mut v = vec![vec![Rational::zero(); profiles]; agents];
    let mut dv = v.clone();
    let mut q = v.clone();
    let mut p = v.clone();
    let weights: Vec<Rational> = (0..agents).map(|_| rat(rng.gen_range(0..=2), 4)).collect();
    for k in 0..profiles {
        let profile = probe.decode(k);
        let mut budget = 4;
        for i in 0..agents {
            let own = grids[i].value(profile[i]).clone();
            let others: Rational = (0..agents).filter(|&j| j != i).map(|j| grids[j].value(profile[j]).clone()).sum();
            v[i][k] = &own + &weights[i] * &others;
            dv[i][k] = Rational::one();
            let share = rng.gen_range(0..=budget);
            budget -= share;
            q[i][k] = rat(share, 4);
            p[i][k] = small(rng, -2, 2, 4);
        }
    }
    AuctionModel::new(grids, v, dv, q, p).unwrap()
}

fn random_general(rng: &mut ChaCha8Rng) -> GeneralModel {
    let n = rng.gen_range(2..=3);
    let m = rng.gen_range(1..=3);
    let outcomes: Vec<String> = (0..rng.gen_range(1..=3)).map(|o| format!("o{o}")).collect();
    let phi = (0..n).map(|_| (0..m).map(|_| rng.gen_range(0..outcomes.len())).collect()).collect();
    let u = (0..outcomes.len()).map(|_| table(rng, n, m, &mut |r| small(r, -3, 3, 2))).collect();
    let u2 = (0..outcomes.len()).map(|_| table(rng, n, m, &mut |r| small(r, 0, 3, 2))).collect();
    GeneralModel::new(TypeGrid::uniform(n).unwrap(), states(m), outcomes, phi, u, Some(u2)).unwrap()
}

pub fn scenario_round_trip(seed: u64) -> Outcome {
    let mut rng = rng(seed, 20);
    for case in 0..30 {
        let (model, beliefs) = match case % 3 {
            0 => {
                let n = rng.gen_range(2..=4);
                let m = rng.gen_range(1..=3);
                let b = random_map(&mut rng, n, m.max(2));
                let mech = random_quasilinear(&mut rng, n, m.max(2));
                (ScenarioModel::Quasilinear(mech), vec![b])
            }
            1 => {
                let a = random_auction(&mut rng);
                let maps = (0..a.num_agents())
                    .map(|i| {
                        let st = a.opponent_states(i).unwrap();
                        let polys = (0..a.grids()[i].len())
                            .map(|_| {
                                BeliefPolytope::singleton(st.clone(), &distribution(&mut rng, st.len(), 4)).unwrap()
                            })
                            .collect();
                        BeliefMap::new(a.grids()[i].clone(), polys).unwrap()
                    })
                    .collect();
                (ScenarioModel::Auction(a), maps)
            }
            _ => (ScenarioModel::General(random_general(&mut rng)), Vec::new()),
        };
        let s = Scenario {
            name: Some(format!("case-{case}")),
            model,
            beliefs,
            requests: Vec::new(),
        };
        let text = scenario::save_scenario(&s);
        let back = lift(scenario::load_scenario(&text), "reload")?;
        ensure!(back == s, "case {case}: reloaded scenario differs");
        ensure!(scenario::save_scenario(&back) == text, "case {case}: second save differs");
    }
    Ok(())
}

pub fn agent_view_payoffs(seed: u64) -> Outcome {
    let mut rng = rng(seed, 21);
    for case in 0..30 {
        let a = random_auction(&mut rng);
        for i in 0..a.num_agents() {
            let view = lift(a.agent_view(i), "view")?;
            let opps = lift(a.opponent_profiles(i), "opponents")?;
            for own in 0..a.grids()[i].len() {
                for report in 0..a.grids()[i].len() {
                    for (s, opp) in opps.iter().enumerate() {
                        let truth = a.profile_index(i, own, opp);
                        let k = a.profile_index(i, report, opp);
                        let expected = &a.v()[i][truth] * &a.q()[i][k] - &a.p()[i][k];
                        ensure!(view.utility(own, report, s) == expected, "case {case}: agent {i} payoff mismatch");
                    }
                }
            }
        }
    }
    Ok(())
}

pub fn revelation_keeps_robustness(seed: u64) -> Outcome {
    let mut rng = rng(seed, 22);
    let mut robust = 0;
    for case in 0..40 {
        let n = rng.gen_range(2..=3);
        let m = 2;
        let messages: Vec<String> = (0..rng.gen_range(2..=3)).map(|k| format!("m{k}")).collect();
        let outcomes: Vec<String> = (0..3).map(|o| format!("o{o}")).collect();
        let gamma: Vec<Vec<usize>> = messages.iter().map(|_| (0..m).map(|_| rng.gen_range(0..3)).collect()).collect();
        let u: Vec<Vec<Vec<Rational>>> = (0..3).map(|_| table(&mut rng, n, m, &mut |r| small(r, -3, 3, 2))).collect();
        let map = BeliefMap::new(
            TypeGrid::uniform(n).unwrap(),
            (0..n)
                .map(|_| {
                    let a = distribution(&mut rng, m, 8);
                    let b = distribution(&mut rng, m, 8);
                    BeliefPolytope::from_points(states(m), &[a, b]).unwrap()
                })
                .collect(),
        )
        .unwrap();
        // Best message at the first vertex of each type's set.
        let strategy: Vec<usize> = (0..n)
            .map(|t| {
                let pi = map.get(t).vertices().unwrap()[0].clone();
                let value = |msg: usize| -> Rational { (0..m).map(|s| &pi[s] * &u[gamma[msg][s]][t][s]).sum() };
                (0..messages.len()).fold(0, |best, msg| if value(msg) > value(best) { msg } else { best })
            })
            .collect();
        let g = IndirectMechanism {
            grid: TypeGrid::uniform(n).unwrap(),
            states: states(m),
            messages,
            outcomes,
            gamma,
            strategy,
            u,
            u2: None,
        };
        let r = lift(models::revelation_transform(&g, &map), "transform")?;
        if r.strategy_robust {
            robust += 1;
            ensure!(r.direct_verdict.pass, "case {case}: robust strategy, non-robust direct mechanism");
        }
    }
    ensure!(robust > 0, "no robust strategy generated");
    Ok(())
}

// ---------------------------------------------------------------- ic

/// Half the time an ex post IC mechanism, otherwise arbitrary tables.
fn mixed_mechanism(rng: &mut ChaCha8Rng, n: usize, m: usize) -> QuasilinearModel {
    if rng.gen_bool(0.5) {
        let offset: Vec<Rational> = (0..m).map(|_| small(rng, -2, 2, 2)).collect();
        let mut mech = trapezoid_mechanism(rng, n, m, &offset);
        if rng.gen_bool(0.3) {
            let mut p = mech.p().to_vec();
            let (t, s) = (rng.gen_range(0..n), rng.gen_range(0..m));
            p[t][s] += small(rng, -1, 1, 8);
            mech = mech.with_payments(p).unwrap();
        }
        mech
    } else {
        random_quasilinear(rng, n, m)
    }
}

pub fn ic_nesting(seed: u64) -> Outcome {
    let mut rng = rng(seed, 30);
    for case in 0..40 {
        let n = rng.gen_range(2..=4);
        let m = rng.gen_range(2..=3);
        let mech = mixed_mechanism(&mut rng, n, m);
        let map = random_map(&mut rng, n, m);
        let expost = ic::check_expost(&mech);
        let robust = lift(ic::check_robust(&mech, &map), "robust")?;
        ensure!(!expost.pass || robust.pass, "case {case}: ex post pass but robust fail");
        for _ in 0..3 {
            let selection: Vec<Vec<Rational>> = (0..n)
                .map(|t| {
                    let verts = map.get(t).vertices().unwrap();
                    mixture(&mut rng, &verts)
                })
                .collect();
            let interim = lift(ic::check_interim(&mech, &selection), "interim")?;
            ensure!(!robust.pass || interim.pass, "case {case}: robust pass but interim fail");
        }
    }
    Ok(())
}

/// Random convex combination of `points`.
pub fn mixture(rng: &mut ChaCha8Rng, points: &[Vec<Rational>]) -> Vec<Rational> {
    let w = distribution(rng, points.len(), 5);
    let m = points[0].len();
    (0..m).map(|s| points.iter().zip(&w).map(|(p, wk)| &p[s] * wk).sum()).collect()
}

/// Robust and ex post verdicts over `Π(t) = Δ(S)`; returns the number of
/// ex post failures seen.
pub fn simplex_equivalence(seed: u64, cases: usize, n: usize, m: usize) -> Result<usize, String> {
    let mut rng = rng(seed, 31);
    let mut failures = 0;
    let map = BeliefMap::uniform(TypeGrid::uniform(n).unwrap(), BeliefPolytope::simplex(states(m)));
    for case in 0..cases {
        let mech = mixed_mechanism(&mut rng, n, m);
        let expost = ic::check_expost(&mech);
        let robust = lift(ic::check_robust(&mech, &map), "robust")?;
        ensure!(expost.pass == robust.pass, "case {case}: verdicts differ");
        ensure!(expost.slack == robust.slack, "case {case}: slack {} vs {}", expost.slack, robust.slack);
        if !expost.pass {
            failures += 1;
        }
    }
    Ok(failures)
}

pub fn robust_equals_expost_on_simplex(seed: u64) -> Outcome {
    simplex_equivalence(seed, 30, 4, 3).map(|_| ())
}

pub fn randomized_reports(seed: u64) -> Outcome {
    let mut rng = rng(seed, 32);
    let mut passing = 0;
    for case in 0..40 {
        let n = rng.gen_range(2..=4);
        let m = rng.gen_range(2..=3);
        let mech = mixed_mechanism(&mut rng, n, m);
        let map = random_map(&mut rng, n, m);
        if !lift(ic::check_robust(&mech, &map), "robust")?.pass {
            continue;
        }
        passing += 1;
        for t in 0..n {
            let verts = lift(map.get(t).vertices(), "vertices")?;
            for _ in 0..4 {
                let sigma = distribution(&mut rng, n, 6);
                let pi = mixture(&mut rng, &verts);
                let gap: Rational = (0..n)
                    .map(|r| {
                        let g: Rational = (0..m).map(|s| &pi[s] * (mech.utility(t, t, s) - mech.utility(t, r, s))).sum();
                        &sigma[r] * g
                    })
                    .sum();
                ensure!(!gap.is_negative(), "case {case}: randomized report beats truth");
            }
        }
    }
    ensure!(passing > 0, "no robust mechanism generated");
    Ok(())
}

pub fn hull_invariance(seed: u64) -> Outcome {
    let mut rng = rng(seed, 33);
    for case in 0..30 {
        let n = rng.gen_range(2..=4);
        let m = rng.gen_range(2..=3);
        let mech = mixed_mechanism(&mut rng, n, m);
        let points: Vec<Vec<Vec<Rational>>> = (0..n)
            .map(|_| (0..rng.gen_range(1..=4)).map(|_| distribution(&mut rng, m, 4)).collect())
            .collect();
        let map = BeliefMap::new(
            TypeGrid::uniform(n).unwrap(),
            points.iter().map(|pts| BeliefPolytope::from_points(states(m), pts).unwrap()).collect(),
        )
        .unwrap();
        let robust = lift(ic::check_robust(&mech, &map), "robust")?;
        // Worst gap over the raw point lists, no LP involved.
        let mut worst = Rational::zero();
        for t in 0..n {
            for r in 0..n {
                for pi in &points[t] {
                    let g: Rational = (0..m).map(|s| &pi[s] * (mech.utility(t, t, s) - mech.utility(t, r, s))).sum();
                    if g < worst {
                        worst = g;
                    }
                }
            }
        }
        ensure!(robust.slack == worst, "case {case}: hull slack {} vs points {}", robust.slack, worst);
        let rebuilt: Vec<BeliefPolytope> = map
            .polytopes()
            .iter()
            .map(|p| BeliefPolytope::from_halfspaces(p.states().clone(), p.halfspaces().to_vec()).unwrap())
            .collect();
        ensure!(rebuilt.iter().all(|p| p.origin() == Origin::Constraints), "case {case}: origin not reset");
        let again = lift(ic::check_robust(&mech, &BeliefMap::new(map.grid().clone(), rebuilt).unwrap()), "robust")?;
        ensure!(again == robust, "case {case}: verdict depends on representation");
    }
    Ok(())
}

// ---------------------------------------------------------------- envelope

pub fn telescoping(seed: u64) -> Outcome {
    let mut rng = rng(seed, 40);
    for case in 0..30 {
        let n = rng.gen_range(2..=5);
        let m = rng.gen_range(1..=3);
        let mech = random_quasilinear(&mut rng, n, m);
        let r = lift(envelope::check_envelope(&mech, Some(Rational::zero())), "envelope")?;
        let at = |lo: usize, hi: usize, s: usize| {
            r.residuals
                .iter()
                .find(|x| x.lower == lo && x.upper == hi && x.state == s)
                .map(|x| x.value.clone())
                .unwrap()
        };
        for lo in 0..n {
            for hi in lo + 1..n {
                for s in 0..m {
                    let chain: Rational = (lo..hi).map(|k| at(k, k + 1, s)).sum();
                    ensure!(at(lo, hi, s) == chain, "case {case}: ({lo},{hi},{s}) does not telescope");
                }
            }
        }
    }
    Ok(())
}

pub fn constant_allocation_passes(seed: u64) -> Outcome {
    let mut rng = rng(seed, 41);
    for case in 0..30 {
        let n = rng.gen_range(2..=5);
        let m = rng.gen_range(1..=3);
        let levels: Vec<Rational> = (0..m).map(|_| rat(rng.gen_range(0..=4), 4)).collect();
        let fees: Vec<Rational> = (0..m).map(|_| small(&mut rng, -3, 3, 3)).collect();
        let q = vec![levels; n];
        let p = vec![fees; n];
        let mech = QuasilinearModel::new(TypeGrid::uniform(n).unwrap(), states(m), q, p).unwrap();
        ensure!(ic::check_expost(&mech).pass, "case {case}: constant mechanism not ex post IC");
        let r = lift(envelope::check_envelope(&mech, Some(Rational::zero())), "envelope")?;
        ensure!(r.pass && r.max_abs.is_zero(), "case {case}: residual {}", r.max_abs);
    }
    Ok(())
}

pub fn envelope_and_monotone_give_expost(seed: u64) -> Outcome {
    let mut rng = rng(seed, 42);
    for case in 0..40 {
        let n = rng.gen_range(2..=5);
        let m = rng.gen_range(1..=3);
        let offset: Vec<Rational> = (0..m).map(|_| small(&mut rng, -2, 2, 2)).collect();
        let mech = if case % 2 == 0 {
            trapezoid_mechanism(&mut rng, n, m, &offset)
        } else {
            random_quasilinear(&mut rng, n, m)
        };
        let env = lift(envelope::check_envelope(&mech, Some(Rational::zero())), "envelope")?;
        let mono = lift(ic::check_monotonicity(ModelRef::Quasilinear(&mech), MonotonicityKind::ExPostAllocation), "mono")?;
        if case % 2 == 0 {
            ensure!(env.pass && mono.pass, "case {case}: constructed fixture should pass");
        }
        if env.pass && mono.pass {
            ensure!(ic::check_expost(&mech).pass, "case {case}: envelope and monotone but not ex post IC");
        }
    }
    Ok(())
}

pub fn revenue_equivalence(seed: u64) -> Outcome {
    let mut rng = rng(seed, 43);
    for case in 0..20 {
        let n = rng.gen_range(2..=4);
        let m = rng.gen_range(2..=3);
        let zero = vec![Rational::zero(); m];
        let offset: Vec<Rational> = (0..m).map(|_| small(&mut rng, -2, 2, 3)).collect();
        let base = trapezoid_mechanism(&mut rng.clone(), n, m, &zero);
        let shifted = trapezoid_mechanism(&mut rng, n, m, &offset);
        let spec = ContaminationSpec::new(distribution(&mut rng, m, 4), rat(1, 4)).unwrap();
        let map = BeliefMap::uniform(
            TypeGrid::uniform(n).unwrap(),
            beliefs::make_contamination(states(m), &spec).unwrap(),
        );
        ensure!(map.overlap_profile(1).unwrap().fully_overlapping, "case {case}: beliefs not fully overlapping");
        ensure!(ic::check_robust(&base, &map).unwrap().pass, "case {case}: base not robust IC");
        ensure!(ic::check_robust(&shifted, &map).unwrap().pass, "case {case}: shifted not robust IC");
        let cmp = lift(envelope::compare_payments(&base, &shifted, Some(&map), None), "compare")?;
        ensure!(cmp.consistent, "case {case}: offset depends on type");
        ensure!(cmp.offsets == offset, "case {case}: offsets {:?}", cmp.offsets);
    }
    Ok(())
}

// ---------------------------------------------------------------- extraction

pub fn random_instance(rng: &mut ChaCha8Rng, k: usize, m: usize) -> ExtractionInstance {
    let labels = (0..k).map(|t| format!("t{t}")).collect();
    let values = (0..k).map(|_| rat(rng.gen_range(0..=4), 2)).collect();
    let polys = (0..k).map(|_| random_hull(rng, m)).collect();
    ExtractionInstance::new(labels, values, polys).unwrap()
}

/// Small intervals or points around distinct lattice points, which often
/// satisfy probabilistic independence.
pub fn separated_instance(rng: &mut ChaCha8Rng, k: usize, m: usize) -> ExtractionInstance {
    let mut centers: Vec<Vec<Rational>> = Vec::new();
    while centers.len() < k {
        let c = distribution(rng, m, 6);
        if !centers.contains(&c) {
            centers.push(c);
        }
    }
    let polys = centers
        .iter()
        .map(|c| {
            let mut pts = vec![c.clone()];
            if rng.gen_bool(0.5) {
                let other = distribution(rng, m, 6);
                let near: Vec<Rational> = c.iter().zip(&other).map(|(a, b)| (int(19) * a + b) / int(20)).collect();
                pts.push(near);
            }
            BeliefPolytope::from_points(states(m), &pts).unwrap()
        })
        .collect();
    let labels = (0..k).map(|t| format!("t{t}")).collect();
    let values = (0..k).map(|_| rat(rng.gen_range(0..=4), 2)).collect();
    ExtractionInstance::new(labels, values, polys).unwrap()
}

pub fn vse_duality(seed: u64) -> Outcome {
    let mut rng = rng(seed, 50);
    for case in 0..30 {
        let k = rng.gen_range(1..=3);
        let m = rng.gen_range(2..=3);
        let inst = if case % 2 == 0 { random_instance(&mut rng, k, m) } else { separated_instance(&mut rng, k, m) };
        let sol = extraction::solve_vse(&inst);
        ensure!(!sol.p_star.is_negative(), "case {case}: p* < 0");
        ensure!(sol.lambda.iter().chain(sol.nu.iter().flatten()).all(|x| !x.is_negative()), "case {case}: negative multiplier");
        let mass: Rational = sol.lambda.iter().chain(sol.nu.iter().flatten()).sum();
        ensure!(mass.is_one(), "case {case}: multiplier mass {mass}");
        ensure!(sol.dual_objective == sol.p_star, "case {case}: dual objective {} vs p* {}", sol.dual_objective, sol.p_star);
    }
    Ok(())
}

pub fn pi_implies_zero_vse(seed: u64) -> Outcome {
    let mut rng = rng(seed, 51);
    let mut holds = 0;
    for case in 0..30 {
        let k = rng.gen_range(2..=3);
        let m = rng.gen_range(2..=3);
        let inst = separated_instance(&mut rng, k, m);
        if extraction::check_probabilistic_independence(&inst).holds {
            holds += 1;
            let p = extraction::solve_vse(&inst).p_star;
            ensure!(p.is_zero(), "case {case}: independence holds but p* = {p}");
        }
    }
    ensure!(holds > 0, "no independent instance generated");
    Ok(())
}

/// Exact finite form on singleton beliefs, where the audit "some π attains
/// own surplus zero" is own surplus equal to zero.
pub fn weak_full_audit(seed: u64) -> Outcome {
    let mut rng = rng(seed, 52);
    let mut built = 0;
    for case in 0..30 {
        let k = rng.gen_range(1..=3);
        let m = rng.gen_range(k.max(2)..=3);
        let mut centers: Vec<Vec<Rational>> = Vec::new();
        while centers.len() < k {
            let c = distribution(&mut rng, m, 5);
            if !centers.contains(&c) {
                centers.push(c);
            }
        }
        let polys = centers.iter().map(|c| BeliefPolytope::singleton(states(m), c).unwrap()).collect();
        let values = (0..k).map(|_| rat(rng.gen_range(0..=4), 2)).collect();
        let inst = ExtractionInstance::new((0..k).map(|t| format!("t{t}")).collect(), values, polys).unwrap();
        let Ok(menu) = extraction::build_extraction_menu(&inst) else { continue };
        built += 1;
        let weak = lift(extraction::check_menu(&inst, &menu, MenuMode::WeakFull), "weak")?.pass;
        let full = lift(extraction::check_menu(&inst, &menu, MenuMode::Full), "full")?.pass;
        let audit = (0..k).all(|t| dot(&centers[t], &menu.contracts[t]) == inst.values()[t]);
        ensure!((weak && audit) == full, "case {case}: weak {weak} audit {audit} full {full}");
    }
    ensure!(built > 0, "no menu built");
    Ok(())
}

pub fn collapse_soundness(seed: u64) -> Outcome {
    let mut rng = rng(seed, 53);
    let grid = [Rational::zero(), rat(1, 2), Rational::one()];
    let mut tested = 0;
    for case in 0..12 {
        let k = rng.gen_range(2..=3);
        let m = 2;
        let polys: Vec<BeliefPolytope> = (0..k)
            .map(|_| {
                if rng.gen_bool(0.6) {
                    let lo = rat(rng.gen_range(0..=3), 8);
                    let hi = rat(rng.gen_range(4..=8), 8);
                    BeliefPolytope::from_points(states(m), &[vec![lo.clone(), Rational::one() - lo], vec![hi.clone(), Rational::one() - hi]]).unwrap()
                } else {
                    BeliefPolytope::singleton(states(m), &distribution(&mut rng, m, 4)).unwrap()
                }
            })
            .collect();
        let inst = ExtractionInstance::new((0..k).map(|t| format!("t{t}")).collect(), vec![Rational::zero(); k], polys).unwrap();
        let collapse = lift(extraction::menu_collapse(&inst, None), "collapse")?;
        let contracts: Vec<Vec<Rational>> = grid
            .iter()
            .flat_map(|a| grid.iter().map(move |b| vec![a.clone(), b.clone()]))
            .collect();
        let mut menus: Vec<Vec<usize>> = vec![vec![]];
        for _ in 0..k {
            menus = menus
                .into_iter()
                .flat_map(|m| (0..contracts.len()).map(move |c| [m.clone(), vec![c]].concat()))
                .collect();
        }
        menus.shuffle(&mut rng);
        for choice in menus.iter().take(150) {
            let menu = Menu {
                contracts: choice.iter().map(|&c| contracts[c].clone()).collect(),
            };
            if lift(extraction::check_menu(&inst, &menu, MenuMode::RobustIc), "check")?.pass {
                tested += 1;
                for &(a, b) in &collapse.edges {
                    ensure!(menu.contracts[a] == menu.contracts[b], "case {case}: robust IC menu splits edge ({a},{b})");
                }
            }
        }
    }
    ensure!(tested > 0, "no robust IC menu found");
    Ok(())
}

// ---------------------------------------------------------------- oracles

pub fn worst_case_matches_lp(seed: u64) -> Outcome {
    let mut rng = rng(seed, 60);
    let budget = OracleBudget::default();
    for case in 0..40 {
        let m = rng.gen_range(2..=4);
        let p = if rng.gen_bool(0.5) {
            random_hull(&mut rng, m)
        } else {
            beliefs::make_contamination(states(m), &random_contamination(&mut rng, m)).unwrap()
        };
        let w: Vec<Rational> = (0..m).map(|_| small(&mut rng, -4, 4, 3)).collect();
        let brute = lift(oracles::brute_worst_case(&p, &w, &budget), "oracle")?;
        ensure!(brute.min == p.minimize(&w).value, "case {case}: min differs");
        ensure!(brute.max == p.maximize(&w).value, "case {case}: max differs");
    }
    Ok(())
}

pub fn brute_vse_matches(seed: u64) -> Outcome {
    let mut rng = rng(seed, 61);
    let budget = OracleBudget::default();
    for case in 0..30 {
        let k = rng.gen_range(1..=3);
        let m = rng.gen_range(2..=3);
        let inst = if case % 2 == 0 { random_instance(&mut rng, k, m) } else { separated_instance(&mut rng, k, m) };
        let lp_value = extraction::solve_vse(&inst).p_star;
        let brute = lift(oracles::brute_vse(&inst, &budget), "oracle")?;
        ensure!(lp_value == brute, "case {case}: solve_vse {lp_value} vs brute {brute}");
    }
    Ok(())
}

/// Instances for the independence oracle: at most three types, two states,
/// each set an interval or a point.
pub fn pi_instance(rng: &mut ChaCha8Rng) -> ExtractionInstance {
    let k = rng.gen_range(1..=3);
    let polys = (0..k)
        .map(|_| {
            let a = rng.gen_range(0..=8);
            let b = if rng.gen_bool(0.4) { a } else { rng.gen_range(0..=8) };
            let pts = [a, b].map(|x| vec![rat(x, 8), rat(8 - x, 8)]);
            BeliefPolytope::from_points(states(2), &pts).unwrap()
        })
        .collect();
    let labels = (0..k).map(|t| format!("t{t}")).collect();
    ExtractionInstance::new(labels, vec![Rational::zero(); k], polys).unwrap()
}

/// Checks a reported violation by substituting it back.
pub fn violation_verifies(inst: &ExtractionInstance, v: &extraction::PiViolation) -> Outcome {
    let m = inst.states().len();
    ensure!(v.mu.iter().all(|x| !x.is_negative()), "negative weight");
    ensure!(v.mu.iter().sum::<Rational>().is_one(), "weights do not sum to one");
    ensure!(!v.mu[v.anchor].is_one(), "all weight on the anchor");
    let mut mix = vec![Rational::zero(); m];
    for (t, (mu, sel)) in v.mu.iter().zip(&v.selections).enumerate() {
        match sel {
            Some(p) => {
                ensure!(!mu.is_zero(), "selection for a zero weight");
                ensure!(inst.beliefs()[t].contains(p), "selection of type {t} outside its set");
                for s in 0..m {
                    mix[s] += mu * &p[s];
                }
            }
            None => ensure!(mu.is_zero(), "missing selection for type {t}"),
        }
    }
    ensure!(mix == v.anchor_belief, "mixture differs from the reported belief");
    ensure!(inst.beliefs()[v.anchor].contains(&mix), "mixture outside the anchor set");
    Ok(())
}

/// Returns `(instances where the oracle found a violation, LP violations)`.
pub fn pi_oracle_agreement(seed: u64, cases: usize) -> Result<(usize, usize), String> {
    let mut rng = rng(seed, 62);
    let budget = OracleBudget::default();
    let (mut brute_found, mut lp_found) = (0, 0);
    for case in 0..cases {
        let inst = pi_instance(&mut rng);
        let report = extraction::check_probabilistic_independence(&inst);
        if let Some(v) = &report.violation {
            lp_found += 1;
            violation_verifies(&inst, v).map_err(|e| format!("case {case}: {e}"))?;
        }
        ensure!(report.holds == report.violation.is_none(), "case {case}: verdict and witness disagree");
        if lift(oracles::brute_pi(&inst, 64, &budget), "oracle")?.is_some() {
            brute_found += 1;
            ensure!(!report.holds, "case {case}: oracle violation missed by the LP");
        }
    }
    Ok((brute_found, lp_found))
}

pub fn brute_pi_soundness(seed: u64) -> Outcome {
    pi_oracle_agreement(seed, 25).map(|_| ())
}

pub type Suite = (&'static str, fn(u64) -> Outcome);

/// Every module's invariant suite, in module order.
pub const SUITES: &[Suite] = &[
    ("lp_core: certificates", lp_certificates),
    ("lp_core: simplex matches vertex enumeration", lp_agrees_with_vertices),
    ("lp_core: determinism", lp_determinism),
    ("beliefs: contamination dimension", contamination_dimension),
    ("beliefs: hull dimension matches vertex rank", hull_dimension_matches_rank),
    ("beliefs: overlap window monotonicity", overlap_window_monotone),
    ("beliefs: nesting implies containment", nesting_implies_containment),
    ("models: scenario round trip", scenario_round_trip),
    ("models: agent view payoffs", agent_view_payoffs),
    ("models: revelation keeps robustness", revelation_keeps_robustness),
    ("ic: expost => robust => interim", ic_nesting),
    ("ic: robust equals expost on the simplex", robust_equals_expost_on_simplex),
    ("ic: randomized reports", randomized_reports),
    ("ic: hull invariance", hull_invariance),
    ("envelope: telescoping", telescoping),
    ("envelope: constant allocation", constant_allocation_passes),
    ("envelope: envelope + monotone => expost", envelope_and_monotone_give_expost),
    ("envelope: revenue equivalence", revenue_equivalence),
    ("extraction: vse duality", vse_duality),
    ("extraction: independence => p* = 0", pi_implies_zero_vse),
    ("extraction: weak full audit", weak_full_audit),
    ("extraction: collapse soundness", collapse_soundness),
    ("oracles: worst case matches lp", worst_case_matches_lp),
    ("oracles: brute vse matches", brute_vse_matches),
    ("oracles: brute pi soundness", brute_pi_soundness),
];
