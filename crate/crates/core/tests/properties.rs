//! Randomized algebraic invariants of the expression and calculus layers.
//!
//! The five named suites run 1000 deterministic seeded cases each; the
//! remaining sections cover canonicalization, ring axioms, numeric
//! faithfulness, reduction soundness, confluence under rule-order shuffles,
//! the adjointness of integration by parts, and the order bound of the
//! multiform EL system.

use laxform_core::akns::{q_recursion, ExprMatrix};
use laxform_core::calculus::{
    multiform_el_system, partial_jet, total_derivative, variational_derivative, Lagrangian2Form,
};
use laxform_core::expr::{zero_index, Expr, Jet};
use laxform_core::integrate::formal_integrate_pair;
use laxform_core::numeric::{
    is_zero_mod, numeric_eval, numeric_eval_on_shell, NumericAssignment, Value, Verdict,
};
use laxform_core::rewrite::{reduce, reduce_lazy, RuleSet};
use laxform_core::workspace::{CoordId, FieldId, Shape, Workspace, WorkspaceBuilder};
use laxform_core::zm::{PoleData, ZmSystem};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const CASES: usize = 1000;

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

fn random_coeff(rng: &mut ChaCha8Rng, ws: &Workspace) -> laxform_core::ParamScalar {
    let p = rng.gen_range(-4i64..=4).max(-4);
    let q = rng.gen_range(1i64..=4);
    if rng.gen_bool(0.5) {
        ws.ratio(if p == 0 { 1 } else { p }, q)
    } else {
        ws.imag(if p == 0 { 1 } else { p }, q)
    }
}

/// A random scalar trace polynomial with a bounded number of terms.
fn random_trace_poly(
    rng: &mut ChaCha8Rng,
    fx: &Fixture,
    terms: usize,
    word_len: usize,
    with_inverses: bool,
    max_order: u8,
) -> Expr {
    let ws = &fx.ws;
    let mut acc = Expr::zero();
    for _ in 0..terms {
        let len = rng.gen_range(1..=word_len);
        let w = random_word(rng, fx, len, with_inverses, max_order);
        if w.is_zero() {
            continue;
        }
        let t = w.trace(ws).unwrap().scale(&random_coeff(rng, ws));
        acc = acc.add(ws, &t);
    }
    acc
}

// ---------------------------------------------------------------------------
// criterion suites
// ---------------------------------------------------------------------------

#[test]
fn criterion_suites_at_full_case_count() {
    for check in laxform_core::selftest::run_all(CASES) {
        assert!(check.ok(), "{}: {}", check.name, check.residual);
    }
}

// ---------------------------------------------------------------------------
// canonicalization and ring axioms
// ---------------------------------------------------------------------------

#[test]
fn canonical_rebuild_is_identity() {
    let fx = fixture();
    let ws = &fx.ws;
    let mut rng = ChaCha8Rng::seed_from_u64(2001);
    for _ in 0..200 {
        let e = random_trace_poly(&mut rng, &fx, 3, 3, true, 2);
        let rebuilt =
            Expr::from_terms(ws, e.is_matrix(), e.terms().map(|(k, c)| (k.clone(), c.clone())));
        assert_eq!(e, rebuilt);
    }
}

#[test]
fn ring_axioms_hold_syntactically() {
    let fx = fixture();
    let ws = &fx.ws;
    let mut rng = ChaCha8Rng::seed_from_u64(2002);
    for case in 0..CASES {
        let (n1, n2, n3) = (rng.gen_range(1..=2), rng.gen_range(1..=2), rng.gen_range(1..=2));
        let e1 = random_word(&mut rng, &fx, n1, true, 1);
        let e2 = random_word(&mut rng, &fx, n2, true, 1);
        let e3 = random_word(&mut rng, &fx, n3, true, 1);
        let assoc_l = e1.mul(ws, &e2).mul(ws, &e3);
        let assoc_r = e1.mul(ws, &e2.mul(ws, &e3));
        assert_eq!(assoc_l, assoc_r, "case {}: associativity", case);
        let dist_l = e1.mul(ws, &e2.add(ws, &e3));
        let dist_r = e1.mul(ws, &e2).add(ws, &e1.mul(ws, &e3));
        assert_eq!(dist_l, dist_r, "case {}: distributivity", case);
    }
}

#[test]
fn numeric_faithfulness_of_products() {
    let fx = fixture();
    let ws = &fx.ws;
    let mut rng = ChaCha8Rng::seed_from_u64(2003);
    for case in 0..200 {
        let (n1, n2) = (rng.gen_range(1..=2), rng.gen_range(1..=2));
        let e1 = random_word(&mut rng, &fx, n1, true, 1);
        let e2 = random_word(&mut rng, &fx, n2, true, 1);
        if e1.is_zero() || e2.is_zero() {
            continue;
        }
        let asg = NumericAssignment::new(ws, 4000 + case, 2);
        let (v1, _) = numeric_eval(ws, &e1, &asg).unwrap();
        let (v2, _) = numeric_eval(ws, &e2, &asg).unwrap();
        let (v12, m12) = numeric_eval(ws, &e1.mul(ws, &e2), &asg).unwrap();
        let (m1, m2, prod) = match (v1, v2, v12) {
            (Value::Matrix(a), Value::Matrix(b), Value::Matrix(c)) => (a, b, c),
            _ => continue,
        };
        let direct = m1.matmul(&m2);
        let mut diff = 0.0f64;
        for (x, y) in direct.a.iter().zip(prod.a.iter()) {
            diff = diff.max((x - y).norm());
        }
        assert!(
            diff <= 1e-12 * m12.max(1.0),
            "case {}: product evaluation differs by {:.3e}",
            case,
            diff
        );
    }
}

// ---------------------------------------------------------------------------
// rewriting: soundness, determinism, confluence
// ---------------------------------------------------------------------------

#[test]
fn reduction_soundness_on_shell() {
    // whenever reduce gives zero, the on-shell numeric evaluation agrees
    let fx = fixture();
    let ws = &fx.ws;
    let (t1, t2) = (fx.coords[0], fx.coords[1]);
    let (u, phi) = (fx.matrix_fields[0], fx.phi);
    let mut rng = ChaCha8Rng::seed_from_u64(3001);
    for case in 0..100 {
        let rhs = Expr::field(ws, u).mul(ws, &Expr::field(ws, phi));
        let mut idx = zero_index(ws);
        idx[t2.0 as usize] = 1;
        let lhs_jet = Jet { field: phi, index: idx };
        let mut rules = RuleSet::new();
        rules.add(ws, lhs_jet.clone(), rhs.clone(), t2).unwrap();
        let x = random_word(&mut rng, &fx, 1, false, 1);
        let equation = Expr::from_jet(ws, lhs_jet).sub(ws, &rhs);
        let e = x.mul(ws, &total_derivative(ws, &equation, t1));
        let red = reduce_lazy(ws, &e, &rules).unwrap();
        assert!(red.is_zero(), "case {}: expected proved-zero", case);
        let asg = NumericAssignment::new(ws, 9000 + case, 2);
        let (v, mag) = numeric_eval_on_shell(ws, &e, &rules, &asg).unwrap();
        assert!(v.max_abs() / mag.max(1.0) <= 1e-9, "case {}: on-shell residual too large", case);
    }
}

#[test]
fn zero_test_verdicts_are_deterministic() {
    let fx = fixture();
    let ws = &fx.ws;
    let e = Expr::field(ws, fx.matrix_fields[0]).trace(ws).unwrap();
    let rules = RuleSet::new();
    let v1 = is_zero_mod(ws, &e, &rules, 4, 77, 2).unwrap();
    let v2 = is_zero_mod(ws, &e, &rules, 4, 77, 2).unwrap();
    assert_eq!(v1, v2);
    assert!(matches!(v1, Verdict::Nonzero { .. }));
}

#[test]
fn triplet_reduction_is_confluent_under_rule_order() {
    // reduce dL of the single-pole triplet with the six rule families
    // inserted in shuffled orders: the normal form is always zero, and a
    // genuinely nonzero expression reduces to the same normal form
    let sys = ZmSystem::new(&PoleData::symmetric(1, 1, 1)).unwrap();
    let ws = &sys.ws;
    let form = sys.triplet_multiform().unwrap();
    let dl = form.exterior_derivative(ws);
    let base = sys.triplet_rules().unwrap();
    let probe = total_derivative(ws, &form.component(sys.xi, sys.eta), sys.nu);
    let mut reference: Option<Expr> = None;
    let mut rng = ChaCha8Rng::seed_from_u64(3003);
    for _ in 0..12 {
        let mut order: Vec<usize> = (0..base.rules().len()).collect();
        for i in (1..order.len()).rev() {
            let j = rng.gen_range(0..=i);
            order.swap(i, j);
        }
        let mut shuffled = RuleSet::new();
        for &i in &order {
            let r = &base.rules()[i];
            shuffled.add(ws, r.lhs.clone(), r.rhs.clone(), r.eliminates).unwrap();
        }
        let red = reduce_lazy(ws, &dl, &shuffled).unwrap();
        assert!(red.is_zero(), "dL normal form depends on rule order");
        let nf = reduce_lazy(ws, &probe, &shuffled).unwrap();
        assert!(!nf.is_zero());
        match &reference {
            None => reference = Some(nf),
            Some(r) => assert_eq!(*r, nf, "normal form depends on rule order"),
        }
    }
}

#[test]
fn strict_reduce_agrees_with_lazy_on_prolonged_rules() {
    let sys = ZmSystem::new(&PoleData::symmetric(1, 1, 1)).unwrap();
    let ws = &sys.ws;
    let form = sys.triplet_multiform().unwrap();
    let dl = form.exterior_derivative(ws);
    let base = sys.triplet_rules().unwrap();
    let coords: Vec<CoordId> = ws.coords().collect();
    let prolonged = base.prolonged_to(ws, &coords, 2);
    let strict = reduce(ws, &dl, &prolonged).unwrap();
    let lazy = reduce_lazy(ws, &dl, &base).unwrap();
    assert_eq!(strict, lazy);
    assert!(strict.is_zero());
}

// ---------------------------------------------------------------------------
// integration by parts and EL order bound
// ---------------------------------------------------------------------------

#[test]
fn ibp_adjointness_leaves_a_total_divergence() {
    // sum_I tr(pL/p phi_I . D_I T) - tr(dL/d phi . T) = D1 A + D2 B
    let fx = fixture();
    let ws = &fx.ws;
    let (t1, t2) = (fx.coords[0], fx.coords[1]);
    let mut rng = ChaCha8Rng::seed_from_u64(4001);
    for case in 0..60 {
        // L over the first two coordinates only, inverse-free
        let mut lag = Expr::zero();
        for _ in 0..2 {
            let mut w = Expr::identity(ws);
            for _ in 0..rng.gen_range(1..=2usize) {
                let f = fx.matrix_fields[rng.gen_range(0..fx.matrix_fields.len())];
                let derivs: Vec<(CoordId, u8)> = match rng.gen_range(0..4) {
                    0 => vec![],
                    1 => vec![(t1, 1)],
                    2 => vec![(t2, 1)],
                    _ => vec![(t1, 1), (t2, 1)],
                };
                w = w.mul(ws, &Expr::jet(ws, f, &derivs));
            }
            if w.is_zero() {
                continue;
            }
            lag = lag.add(ws, &w.trace(ws).unwrap().scale(&random_coeff(&mut rng, ws)));
        }
        if lag.is_zero() {
            continue;
        }
        let test_dir = Expr::field(ws, fx.matrix_fields[rng.gen_range(0..2)]);
        // sum over the phi-jets present in L
        let mut pairing = Expr::zero();
        for jet in lag.collect_jets(ws) {
            if jet.field != fx.phi {
                continue;
            }
            let grad = partial_jet(ws, &lag, &jet).unwrap();
            if grad.is_zero() {
                continue;
            }
            let mut dt = test_dir.clone();
            for _ in 0..jet.index[t1.0 as usize] {
                dt = total_derivative(ws, &dt, t1);
            }
            for _ in 0..jet.index[t2.0 as usize] {
                dt = total_derivative(ws, &dt, t2);
            }
            pairing = pairing.add(ws, &grad.mul(ws, &dt).trace(ws).unwrap());
        }
        let ed = variational_derivative(ws, &lag, (t1, t2), &Jet::base(ws, fx.phi)).unwrap();
        let boundary = pairing.sub(ws, &ed.mul(ws, &test_dir).trace(ws).unwrap());
        if boundary.is_zero() {
            continue;
        }
        let split = formal_integrate_pair(ws, &boundary, t1, t2);
        assert!(split.is_ok(), "case {}: boundary term is not a total divergence", case);
        let (a, b) = split.unwrap();
        let rebuilt = total_derivative(ws, &a, t1).add(ws, &total_derivative(ws, &b, t2));
        assert_eq!(rebuilt, boundary, "case {}: divergence split does not rebuild", case);
    }
}

#[test]
fn first_order_two_forms_have_no_high_order_el_equations() {
    let fx = fixture();
    let ws = &fx.ws;
    let [t1, t2, t3] = [fx.coords[0], fx.coords[1], fx.coords[2]];
    let mut rng = ChaCha8Rng::seed_from_u64(4002);
    for case in 0..60 {
        let mut form = Lagrangian2Form::new([t1, t2, t3]).unwrap();
        for (i, j) in [(t1, t2), (t2, t3), (t3, t1)] {
            form.set_component(ws, i, j, random_trace_poly(&mut rng, &fx, 2, 3, false, 1)).unwrap();
        }
        let sys = multiform_el_system(ws, &form, Some(4)).unwrap();
        for rec in &sys.records {
            let total = rec.label.0 as u32 + rec.label.1 as u32 + rec.label.2 as u32;
            assert!(
                total <= 2,
                "case {}: first-order 2-form produced an order-{} equation",
                case,
                total
            );
        }
    }
}

// ---------------------------------------------------------------------------
// q-recursion guards
// ---------------------------------------------------------------------------

mod generated {
    use super::*;
    use proptest::prelude::*;

    fn coeff_strategy() -> impl Strategy<Value = (i64, i64, bool)> {
        (-6i64..=6, 1i64..=6, any::<bool>()).prop_map(|(p, q, imag)| (if p == 0 { 1 } else { p }, q, imag))
    }

    proptest! {
        #[test]
        fn scalar_field_axioms((p1, q1, i1) in coeff_strategy(), (p2, q2, i2) in coeff_strategy()) {
            let fx = fixture();
            let ws = &fx.ws;
            let a = ws.param_scalar(ws.lookup_param("a").unwrap());
            let b = ws.param_scalar(ws.lookup_param("b").unwrap());
            let c1 = if i1 { ws.imag(p1, q1) } else { ws.ratio(p1, q1) };
            let c2 = if i2 { ws.imag(p2, q2) } else { ws.ratio(p2, q2) };
            let x = a.mul(&c1).add(&b);
            let y = b.mul(&c2).sub(&a);
            // field axioms on rational functions
            prop_assert_eq!(x.add(&y), y.add(&x));
            prop_assert_eq!(x.mul(&y), y.mul(&x));
            prop_assert_eq!(x.sub(&x), ws.int(0));
            if !y.is_zero() {
                prop_assert_eq!(x.div(&y).mul(&y), x);
            }
        }

        #[test]
        fn trace_is_rotation_invariant(rot in 0usize..6, seed in 0u64..500) {
            let fx = fixture();
            let ws = &fx.ws;
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let factors: Vec<Expr> = (0..6)
                .map(|_| {
                    let f = fx.matrix_fields[rng.gen_range(0..fx.matrix_fields.len())];
                    random_jet(&mut rng, &fx, f, 1)
                })
                .collect();
            let word = factors.iter().fold(Expr::identity(ws), |acc, f| acc.mul(ws, f));
            let rotated = factors
                .iter()
                .cycle()
                .skip(rot)
                .take(6)
                .fold(Expr::identity(ws), |acc, f| acc.mul(ws, f));
            if !word.is_zero() {
                prop_assert_eq!(word.trace(ws).unwrap(), rotated.trace(ws).unwrap());
            }
        }
    }
}

#[test]
fn q_recursion_rejects_degenerate_seeds() {
    let mut b = WorkspaceBuilder::new();
    let x1 = b.coord("x1").unwrap();
    let q = b.field("q", Shape::Scalar, &[x1]).unwrap();
    let r = b.field("r", Shape::Scalar, &[x1]).unwrap();
    let ws = b.build();
    let same = Expr::scalar(ws.imag(1, 1));
    let q0 = ExprMatrix::from_rows(vec![vec![same.clone(), Expr::zero()], vec![Expr::zero(), same]]).unwrap();
    let q1 = ExprMatrix::from_rows(vec![
        vec![Expr::zero(), Expr::field(&ws, q)],
        vec![Expr::field(&ws, r), Expr::zero()],
    ])
    .unwrap();
    assert!(q_recursion(&ws, &q0, &q1, x1, 2).is_err());
}
