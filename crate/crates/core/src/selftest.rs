//! Randomized self-test battery.
//!
//! Five algebraic invariants of the engine, each exercised on a fixed count
//! of deterministic seeded cases: trace cyclicity, the Leibniz rule, the
//! splitting identity of the variational derivative, the two commutation
//! identities between total and partial derivatives, and the coherence of
//! reduction with prolongation. The acceptance suite runs these at a
//! thousand cases each.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::calculus::{partial_jet, total_derivative, variational_derivative};
use crate::check::CheckResult;
use crate::expr::{zero_index, Expr, Jet};
use crate::rewrite::{reduce_lazy, RuleSet};
use crate::scalar::ParamScalar;
use crate::workspace::{CoordId, FieldId, Shape, Workspace, WorkspaceBuilder};

struct Fixture {
    ws: Workspace,
    coords: Vec<CoordId>,
    matrix_fields: Vec<FieldId>,
    phi: FieldId,
}

fn fixture() -> Fixture {
    let mut b = WorkspaceBuilder::new();
    let t1 = b.coord("t1").unwrap();
    let t2 = b.coord("t2").unwrap();
    let t3 = b.coord("t3").unwrap();
    b.param("a").unwrap();
    b.param("b").unwrap();
    let u = b.field("u", Shape::Matrix, &[t1, t2, t3]).unwrap();
    let v = b.field("v", Shape::Matrix, &[t1, t2, t3]).unwrap();
    let phi = b.field("phi", Shape::Matrix, &[t1, t2, t3]).unwrap();
    Fixture { ws: b.build(), coords: vec![t1, t2, t3], matrix_fields: vec![u, v, phi], phi }
}

fn random_jet(rng: &mut ChaCha8Rng, fx: &Fixture, field: FieldId, max_order: u8) -> Expr {
    let mut derivs = Vec::new();
    let order = rng.gen_range(0..=max_order);
    for _ in 0..order {
        let c = fx.coords[rng.gen_range(0..fx.coords.len())];
        derivs.push((c, 1u8));
    }
    Expr::jet(&fx.ws, field, &derivs)
}

fn random_word(rng: &mut ChaCha8Rng, fx: &Fixture, len: usize, with_inverses: bool, max_order: u8) -> Expr {
    let ws = &fx.ws;
    let mut acc = Expr::identity(ws);
    for _ in 0..len {
        let f = fx.matrix_fields[rng.gen_range(0..fx.matrix_fields.len())];
        let factor = if with_inverses && rng.gen_bool(0.25) {
            Expr::inv(ws, f)
        } else {
            random_jet(rng, fx, f, max_order)
        };
        acc = acc.mul(ws, &factor);
    }
    acc
}

fn random_coeff(rng: &mut ChaCha8Rng, ws: &Workspace) -> ParamScalar {
    let p = rng.gen_range(-4i64..=4).max(-4);
    let q = rng.gen_range(1i64..=4);
    if rng.gen_bool(0.5) {
        ws.ratio(if p == 0 { 1 } else { p }, q)
    } else {
        ws.imag(if p == 0 { 1 } else { p }, q)
    }
}

fn random_trace_poly(
    rng: &mut ChaCha8Rng,
    fx: &Fixture,
    terms: usize,
    word_len: usize,
    max_order: u8,
) -> Expr {
    let ws = &fx.ws;
    let mut acc = Expr::zero();
    for _ in 0..terms {
        let len = rng.gen_range(1..=word_len);
        let w = random_word(rng, fx, len, false, max_order);
        if w.is_zero() {
            continue;
        }
        let t = w.trace(ws).unwrap().scale(&random_coeff(rng, ws));
        acc = acc.add(ws, &t);
    }
    acc
}

/// `tr(w)` is invariant under every rotation of the word.
pub fn suite_trace_cyclicity(cases: usize) -> CheckResult {
    let fx = fixture();
    let ws = &fx.ws;
    let mut rng = ChaCha8Rng::seed_from_u64(1001);
    for case in 0..cases {
        let len = rng.gen_range(1..=6usize);
        let factors: Vec<Expr> = (0..len)
            .map(|_| {
                let f = fx.matrix_fields[rng.gen_range(0..fx.matrix_fields.len())];
                if rng.gen_bool(0.2) {
                    Expr::inv(ws, f)
                } else {
                    random_jet(&mut rng, &fx, f, 2)
                }
            })
            .collect();
        let word = factors.iter().fold(Expr::identity(ws), |acc, f| acc.mul(ws, f));
        if word.is_zero() {
            continue;
        }
        let rot = rng.gen_range(0..len);
        let rotated = factors
            .iter()
            .cycle()
            .skip(rot)
            .take(len)
            .fold(Expr::identity(ws), |acc, f| acc.mul(ws, f));
        if word.trace(ws).unwrap() != rotated.trace(ws).unwrap() {
            return CheckResult::fail("props.trace_cyclicity", format!("case {} differs under rotation", case));
        }
    }
    CheckResult::pass("props.trace_cyclicity")
}

/// `D_c(e1 e2) = (D_c e1) e2 + e1 (D_c e2)`.
pub fn suite_leibniz(cases: usize) -> CheckResult {
    let fx = fixture();
    let ws = &fx.ws;
    let mut rng = ChaCha8Rng::seed_from_u64(1002);
    for case in 0..cases {
        let (n1, n2) = (rng.gen_range(1..=3), rng.gen_range(1..=3));
        let e1 = random_word(&mut rng, &fx, n1, true, 2);
        let e2 = random_word(&mut rng, &fx, n2, true, 2);
        let c = fx.coords[rng.gen_range(0..fx.coords.len())];
        let lhs = total_derivative(ws, &e1.mul(ws, &e2), c);
        let rhs = total_derivative(ws, &e1, c)
            .mul(ws, &e2)
            .add(ws, &e1.mul(ws, &total_derivative(ws, &e2, c)));
        if lhs != rhs {
            return CheckResult::fail("props.leibniz", format!("case {} violates the Leibniz rule", case));
        }
    }
    CheckResult::pass("props.leibniz")
}

/// The variational derivative splits as
/// `dL/dv = pL/pv - D1 dL/dv' - D2 dL/dv'' - D1 D2 dL/dv'''` with the
/// indices raised in the component pair.
pub fn suite_splitting_identity(cases: usize) -> CheckResult {
    let fx = fixture();
    let ws = &fx.ws;
    let (t1, t2, t3) = (fx.coords[0], fx.coords[1], fx.coords[2]);
    let mut rng = ChaCha8Rng::seed_from_u64(1003);
    for case in 0..cases {
        let lag = random_trace_poly(&mut rng, &fx, 2, 3, 3);
        let (a, b, c) = (rng.gen_range(0..=2u8), rng.gen_range(0..=2u8), rng.gen_range(0..=1u8));
        let jet_at = |da: u8, db: u8| {
            let mut idx = zero_index(ws);
            idx[t1.0 as usize] = a + da;
            idx[t2.0 as usize] = b + db;
            idx[t3.0 as usize] = c;
            Jet { field: fx.phi, index: idx }
        };
        let vd = |j: &Jet| variational_derivative(ws, &lag, (t1, t2), j).unwrap();
        let lhs = vd(&jet_at(0, 0));
        let mut rhs = partial_jet(ws, &lag, &jet_at(0, 0)).unwrap();
        rhs = rhs.sub(ws, &total_derivative(ws, &vd(&jet_at(1, 0)), t1));
        rhs = rhs.sub(ws, &total_derivative(ws, &vd(&jet_at(0, 1)), t2));
        rhs = rhs.sub(
            ws,
            &total_derivative(ws, &total_derivative(ws, &vd(&jet_at(1, 1)), t1), t2),
        );
        if lhs != rhs {
            return CheckResult::fail("props.splitting", format!("case {} violates the splitting identity", case));
        }
    }
    CheckResult::pass("props.splitting")
}

/// `D_1` commutes with partials in jets of zero first slot, and picks up the
/// decremented partial otherwise.
pub fn suite_commutation_identities(cases: usize) -> CheckResult {
    let fx = fixture();
    let ws = &fx.ws;
    let (t1, t2, t3) = (fx.coords[0], fx.coords[1], fx.coords[2]);
    let mut rng = ChaCha8Rng::seed_from_u64(1004);
    for case in 0..cases {
        let lag = random_trace_poly(&mut rng, &fx, 2, 3, 3);
        let jet = |a: u8, b: u8, c: u8| {
            let mut idx = zero_index(ws);
            idx[t1.0 as usize] = a;
            idx[t2.0 as usize] = b;
            idx[t3.0 as usize] = c;
            Jet { field: fx.phi, index: idx }
        };
        let (b, c) = (rng.gen_range(0..=2u8), rng.gen_range(0..=2u8));
        let j0 = jet(0, b, c);
        let lhs0 = total_derivative(ws, &partial_jet(ws, &lag, &j0).unwrap(), t1);
        let rhs0 = partial_jet(ws, &total_derivative(ws, &lag, t1), &j0).unwrap();
        if lhs0 != rhs0 {
            return CheckResult::fail("props.commutation", format!("case {} fails at zero first slot", case));
        }
        let a = rng.gen_range(1..=3u8);
        let j = jet(a, b, c);
        let lhs = total_derivative(ws, &partial_jet(ws, &lag, &j).unwrap(), t1);
        let rhs = partial_jet(ws, &total_derivative(ws, &lag, t1), &j)
            .unwrap()
            .sub(ws, &partial_jet(ws, &lag, &jet(a - 1, b, c)).unwrap());
        if lhs != rhs {
            return CheckResult::fail("props.commutation", format!("case {} fails at first slot {}", case, a));
        }
    }
    CheckResult::pass("props.commutation")
}

/// Reduction commutes with total differentiation once the rules are closed
/// under prolongation: `reduce(D_c e) = reduce(D_c reduce(e))`.
pub fn suite_prolongation_coherence(cases: usize) -> CheckResult {
    let fx = fixture();
    let ws = &fx.ws;
    let (t1, t2) = (fx.coords[0], fx.coords[1]);
    let (u, v, phi) = (fx.matrix_fields[0], fx.matrix_fields[1], fx.phi);
    let mut rng = ChaCha8Rng::seed_from_u64(1005);
    for case in 0..cases {
        let mut rhs = Expr::identity(ws);
        for _ in 0..rng.gen_range(1..=2usize) {
            let f = [u, v, phi][rng.gen_range(0..3)];
            let order = rng.gen_range(0..=1u8);
            let factor = if order == 0 { Expr::field(ws, f) } else { Expr::jet(ws, f, &[(t1, 1)]) };
            rhs = rhs.mul(ws, &factor);
        }
        let mut idx = zero_index(ws);
        idx[t2.0 as usize] = 1;
        let mut rules = RuleSet::new();
        rules.add(ws, Jet { field: phi, index: idx }, rhs, t2).unwrap();
        let len = rng.gen_range(1..=3);
        let e = random_word(&mut rng, &fx, len, false, 2);
        let c = fx.coords[rng.gen_range(0..fx.coords.len())];
        let lhs = reduce_lazy(ws, &total_derivative(ws, &e, c), &rules).unwrap();
        let inner = reduce_lazy(ws, &e, &rules).unwrap();
        let rhs2 = reduce_lazy(ws, &total_derivative(ws, &inner, c), &rules).unwrap();
        if lhs != rhs2 {
            return CheckResult::fail(
                "props.prolongation",
                format!("case {}: reduction does not commute with differentiation", case),
            );
        }
    }
    CheckResult::pass("props.prolongation")
}

/// The full battery at the given case count.
pub fn run_all(cases: usize) -> Vec<CheckResult> {
    vec![
        suite_trace_cyclicity(cases),
        suite_leibniz(cases),
        suite_splitting_identity(cases),
        suite_commutation_identities(cases),
        suite_prolongation_coherence(cases),
    ]
}
