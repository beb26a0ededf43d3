//! Seeded randomized numeric evaluation.
//!
//! Jets are treated as independent unknowns (the off-shell setting): every
//! needed jet of every field gets an independent random complex matrix or
//! scalar with entries of magnitude O(1), derived deterministically from the
//! seed, the field name, and the multi-index, so evaluation order never
//! changes the sample. Parameters are random complex values kept pairwise at
//! least 0.1 apart so that pole differences stay away from collisions.

use std::collections::HashMap;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::expr::{Atom, Expr, Jet, Word};
use crate::rewrite::RuleSet;
use crate::workspace::{Shape, Workspace};

const COND_LIMIT: f64 = 1e8;
const ZERO_TOL: f64 = 1e-9;

/// FNV-1a over a label; used to derive independent sub-seeds.
pub fn derive_seed(root: u64, label: &str) -> u64 {
    let mut h = 0xcbf29ce484222325u64 ^ root.rotate_left(17);
    for b in label.as_bytes() {
        h ^= *b as u64;
        h = h.wrapping_mul(0x100000001b3);
    }
    h
}

// ---------------------------------------------------------------------------
// Values
// ---------------------------------------------------------------------------

/// A dense complex matrix, row major.
#[derive(Clone, Debug)]
pub struct Mat {
    pub n: usize,
    pub a: Vec<Complex64>,
}

impl Mat {
    pub fn zeros(n: usize) -> Self {
        Mat { n, a: vec![Complex64::new(0.0, 0.0); n * n] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Mat::zeros(n);
        for i in 0..n {
            m.a[i * n + i] = Complex64::new(1.0, 0.0);
        }
        m
    }

    pub fn get(&self, i: usize, j: usize) -> Complex64 {
        self.a[i * self.n + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: Complex64) {
        self.a[i * self.n + j] = v;
    }

    pub fn add(&self, other: &Mat) -> Mat {
        let mut out = self.clone();
        for (x, y) in out.a.iter_mut().zip(other.a.iter()) {
            *x += y;
        }
        out
    }

    pub fn scale(&self, c: Complex64) -> Mat {
        let mut out = self.clone();
        for x in out.a.iter_mut() {
            *x *= c;
        }
        out
    }

    pub fn matmul(&self, other: &Mat) -> Mat {
        let n = self.n;
        let mut out = Mat::zeros(n);
        for i in 0..n {
            for k in 0..n {
                let s = self.a[i * n + k];
                if s == Complex64::new(0.0, 0.0) {
                    continue;
                }
                for j in 0..n {
                    out.a[i * n + j] += s * other.a[k * n + j];
                }
            }
        }
        out
    }

    pub fn trace(&self) -> Complex64 {
        (0..self.n).map(|i| self.get(i, i)).sum()
    }

    pub fn max_abs(&self) -> f64 {
        self.a.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    fn norm1(&self) -> f64 {
        (0..self.n)
            .map(|j| (0..self.n).map(|i| self.get(i, j).norm()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    /// Inverse by Gauss-Jordan elimination with partial pivoting; errors
    /// when the 1-norm condition estimate exceeds the resampling threshold.
    pub fn inverse(&self) -> Result<Mat> {
        let n = self.n;
        let mut a = self.clone();
        let mut inv = Mat::identity(n);
        for col in 0..n {
            let mut piv = col;
            let mut best = a.get(col, col).norm();
            for r in col + 1..n {
                let v = a.get(r, col).norm();
                if v > best {
                    best = v;
                    piv = r;
                }
            }
            if best < 1e-14 {
                return Err(Error::IllConditioned { what: "singular matrix in numeric inverse".into() });
            }
            if piv != col {
                for j in 0..n {
                    let (x, y) = (a.get(col, j), a.get(piv, j));
                    a.set(col, j, y);
                    a.set(piv, j, x);
                    let (x, y) = (inv.get(col, j), inv.get(piv, j));
                    inv.set(col, j, y);
                    inv.set(piv, j, x);
                }
            }
            let d = a.get(col, col);
            for j in 0..n {
                a.set(col, j, a.get(col, j) / d);
                inv.set(col, j, inv.get(col, j) / d);
            }
            for r in 0..n {
                if r == col {
                    continue;
                }
                let f = a.get(r, col);
                if f == Complex64::new(0.0, 0.0) {
                    continue;
                }
                for j in 0..n {
                    let v = a.get(r, j) - f * a.get(col, j);
                    a.set(r, j, v);
                    let v = inv.get(r, j) - f * inv.get(col, j);
                    inv.set(r, j, v);
                }
            }
        }
        let cond = self.norm1() * inv.norm1();
        if cond > COND_LIMIT {
            return Err(Error::IllConditioned { what: format!("condition estimate {:.3e}", cond) });
        }
        Ok(inv)
    }
}

/// A numeric value: complex scalar or complex matrix.
#[derive(Clone, Debug)]
pub enum Value {
    Scalar(Complex64),
    Matrix(Mat),
}

impl Value {
    pub fn zero_like(matrix: bool, n: usize) -> Value {
        if matrix {
            Value::Matrix(Mat::zeros(n))
        } else {
            Value::Scalar(Complex64::new(0.0, 0.0))
        }
    }

    pub fn max_abs(&self) -> f64 {
        match self {
            Value::Scalar(z) => z.norm(),
            Value::Matrix(m) => m.max_abs(),
        }
    }

    fn add(&self, other: &Value) -> Value {
        match (self, other) {
            (Value::Scalar(a), Value::Scalar(b)) => Value::Scalar(a + b),
            (Value::Matrix(a), Value::Matrix(b)) => Value::Matrix(a.add(b)),
            _ => panic!("mixed shapes in numeric accumulation"),
        }
    }
}

// ---------------------------------------------------------------------------
// Assignments
// ---------------------------------------------------------------------------

/// Deterministic random data for one evaluation.
#[derive(Clone, Debug)]
pub struct NumericAssignment {
    pub seed: u64,
    pub dim: usize,
    params: Vec<Complex64>,
}

impl NumericAssignment {
    /// Sample parameter values; resample (deterministically) until all
    /// pairwise gaps are at least 0.1.
    pub fn new(ws: &Workspace, seed: u64, dim: usize) -> Self {
        let nparams = ws.nparams();
        let mut params = vec![Complex64::new(dim as f64, 0.0); nparams];
        'attempt: for attempt in 0u32.. {
            for i in 1..nparams {
                let label = format!("param:{}:{}", ws.param_name(crate::workspace::ParamId(i as u32)), attempt);
                let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, &label));
                params[i] = Complex64::new(rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0));
            }
            for i in 1..nparams {
                for j in i + 1..nparams {
                    if (params[i] - params[j]).norm() < 0.1 {
                        continue 'attempt;
                    }
                }
            }
            break;
        }
        NumericAssignment { seed, dim, params }
    }

    pub fn params(&self) -> &[Complex64] {
        &self.params
    }

    /// The sample for one jet: an independent O(1) random matrix or scalar,
    /// or zero when the jet leaves the field's dependency set.
    pub fn jet_value(&self, ws: &Workspace, jet: &Jet) -> Value {
        let matrix = matches!(ws.field(jet.field).shape, Shape::Matrix);
        if jet.vanishes(ws) {
            return Value::zero_like(matrix, self.dim);
        }
        let label = format!("jet:{}:{:?}", ws.field_name(jet.field), jet.index);
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(self.seed, &label));
        if matrix {
            let mut m = Mat::zeros(self.dim);
            for i in 0..self.dim {
                for j in 0..self.dim {
                    m.set(i, j, Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)));
                }
            }
            Value::Matrix(m)
        } else {
            Value::Scalar(Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
        }
    }
}

// ---------------------------------------------------------------------------
// Evaluation
// ---------------------------------------------------------------------------

struct EvalCtx<'a> {
    ws: &'a Workspace,
    asg: &'a NumericAssignment,
    /// On-shell evaluation substitutes rule right-hand sides for covered
    /// jets, deriving missing prolongations on demand.
    rules: Option<RuleSet>,
    memo: HashMap<Jet, Value>,
    depth: usize,
}

impl<'a> EvalCtx<'a> {
    fn jet(&mut self, jet: &Jet) -> Result<Value> {
        if let Some(v) = self.memo.get(jet) {
            return Ok(v.clone());
        }
        let rhs = match self.rules.as_mut() {
            Some(rules) => {
                rules.ensure_covered(self.ws, jet)?;
                rules.get(jet).map(|r| r.rhs.clone())
            }
            None => None,
        };
        let matrix = matches!(self.ws.field(jet.field).shape, Shape::Matrix);
        let v = match rhs {
            Some(rhs) if rhs.is_zero() => Value::zero_like(matrix, self.asg.dim),
            Some(rhs) => {
                if self.depth > 64 {
                    return Err(Error::Invalid("on-shell evaluation recursion too deep".into()));
                }
                self.depth += 1;
                let v = self.expr(&rhs)?.0;
                self.depth -= 1;
                v
            }
            None => self.asg.jet_value(self.ws, jet),
        };
        self.memo.insert(jet.clone(), v.clone());
        Ok(v)
    }

    fn word(&mut self, w: &Word) -> Result<Mat> {
        let mut acc = Mat::identity(self.asg.dim);
        for atom in w {
            let m = match atom {
                Atom::Jet(j) => match self.jet(j)? {
                    Value::Matrix(m) => m,
                    Value::Scalar(_) => {
                        return Err(Error::ShapeMismatch("scalar jet inside matrix word".into()))
                    }
                },
                Atom::Inv(f) => {
                    let base = Jet::base(self.ws, *f);
                    match self.jet(&base)? {
                        Value::Matrix(m) => m.inverse()?,
                        Value::Scalar(_) => {
                            return Err(Error::ShapeMismatch("scalar jet inside matrix word".into()))
                        }
                    }
                }
            };
            acc = acc.matmul(&m);
        }
        Ok(acc)
    }

    /// Value and magnitude estimate (sum of term magnitudes, for scaling
    /// the zero tolerance).
    fn expr(&mut self, e: &Expr) -> Result<(Value, f64)> {
        let mut acc = Value::zero_like(e.is_matrix(), self.asg.dim);
        let mut magnitude = 0.0f64;
        for (key, coeff) in e.terms() {
            let mut c = coeff.eval(self.asg.params())?;
            for (jet, &exp) in &key.scalars {
                let v = match self.jet(jet)? {
                    Value::Scalar(z) => z,
                    Value::Matrix(_) => return Err(Error::ShapeMismatch("matrix jet used as scalar".into())),
                };
                if exp < 0 && v.norm() < 1e-8 {
                    return Err(Error::IllConditioned { what: "scalar inverse near zero".into() });
                }
                let mut p = Complex64::new(1.0, 0.0);
                for _ in 0..exp.unsigned_abs() {
                    p *= v;
                }
                c *= if exp < 0 { p.inv() } else { p };
            }
            for (w, &mult) in &key.traces {
                let t = self.word(w)?.trace();
                for _ in 0..mult {
                    c *= t;
                }
            }
            let term = if key.word.is_empty() {
                if e.is_matrix() {
                    Value::Matrix(Mat::identity(self.asg.dim).scale(c))
                } else {
                    Value::Scalar(c)
                }
            } else {
                Value::Matrix(self.word(&key.word)?.scale(c))
            };
            magnitude += term.max_abs();
            acc = acc.add(&term);
        }
        Ok((acc, magnitude))
    }
}

/// Plain off-shell evaluation: every jet is an independent random sample.
pub fn numeric_eval(ws: &Workspace, e: &Expr, asg: &NumericAssignment) -> Result<(Value, f64)> {
    let mut ctx = EvalCtx { ws, asg, rules: None, memo: HashMap::new(), depth: 0 };
    ctx.expr(e)
}

/// On-shell evaluation: jets covered by a rule evaluate to the numeric value
/// of their right-hand side; all remaining jets are independent samples.
pub fn numeric_eval_on_shell(
    ws: &Workspace,
    e: &Expr,
    rules: &RuleSet,
    asg: &NumericAssignment,
) -> Result<(Value, f64)> {
    let mut ctx = EvalCtx { ws, asg, rules: Some(rules.clone()), memo: HashMap::new(), depth: 0 };
    ctx.expr(e)
}

// ---------------------------------------------------------------------------
// Zero testing
// ---------------------------------------------------------------------------

#[derive(Clone, Debug, PartialEq)]
pub enum Verdict {
    /// The reduction reached the canonical zero form.
    ProvedZero,
    /// The reduced form is not canonically zero but evaluates below the
    /// scaled tolerance at every trial seed.
    NumericallyZero { max_residual: f64, seeds: Vec<u64> },
    /// A trial seed produced a residual above tolerance, re-confirmed at
    /// three extra seeds.
    Nonzero { witness_seed: u64, residual: f64 },
}

impl Verdict {
    pub fn passed(&self) -> bool {
        !matches!(self, Verdict::Nonzero { .. })
    }
}

fn trial_seed(base: u64, t: u64) -> u64 {
    base.wrapping_add(t.wrapping_mul(0x9e3779b97f4a7c15))
}

/// Evaluate a (typically already reduced) expression at seeded assignments;
/// residuals are scaled by the expression magnitude. Ill-conditioned draws
/// are skipped deterministically by advancing the seed.
pub fn residual_at_seeds(
    ws: &Workspace,
    e: &Expr,
    trials: u32,
    base_seed: u64,
    dim: usize,
) -> Result<(f64, Vec<u64>, Option<u64>)> {
    let mut max_res = 0.0f64;
    let mut seeds = Vec::new();
    let mut t = 0u64;
    let mut done = 0u32;
    let mut witness = None;
    while done < trials {
        let seed = trial_seed(base_seed, t);
        t += 1;
        if t > 10 * trials as u64 + 32 {
            return Err(Error::IllConditioned { what: "could not find well-conditioned samples".into() });
        }
        let asg = NumericAssignment::new(ws, seed, dim);
        match numeric_eval(ws, e, &asg) {
            Err(Error::IllConditioned { .. }) => continue,
            Err(other) => return Err(other),
            Ok((v, mag)) => {
                let res = v.max_abs() / mag.max(1.0);
                seeds.push(seed);
                if res > max_res {
                    max_res = res;
                    witness = Some(seed);
                }
                done += 1;
            }
        }
    }
    Ok((max_res, seeds, witness))
}

/// Decide whether an expression is zero modulo the rules: first by exact
/// reduction, then by seeded numeric evaluation of the reduced form.
/// Nonzero verdicts are re-confirmed at three extra seeds.
pub fn is_zero_mod(
    ws: &Workspace,
    e: &Expr,
    rules: &RuleSet,
    trials: u32,
    base_seed: u64,
    dim: usize,
) -> Result<Verdict> {
    assert!(trials >= 1, "at least one trial required");
    let reduced = crate::rewrite::reduce(ws, e, rules)?;
    if reduced.is_zero() {
        return Ok(Verdict::ProvedZero);
    }
    let (max_res, seeds, witness) = residual_at_seeds(ws, &reduced, trials, base_seed, dim)?;
    if max_res <= ZERO_TOL {
        return Ok(Verdict::NumericallyZero { max_residual: max_res, seeds });
    }
    let confirm_seed = derive_seed(base_seed, "confirm");
    let (confirm_res, _, _) = residual_at_seeds(ws, &reduced, 3, confirm_seed, dim)?;
    if confirm_res > ZERO_TOL {
        Ok(Verdict::Nonzero { witness_seed: witness.unwrap_or(base_seed), residual: max_res })
    } else {
        Ok(Verdict::NumericallyZero { max_residual: confirm_res, seeds })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::workspace::WorkspaceBuilder;

    fn setup() -> Workspace {
        let mut b = WorkspaceBuilder::new();
        let xi = b.coord("xi").unwrap();
        let eta = b.coord("eta").unwrap();
        b.param("a").unwrap();
        b.param("b").unwrap();
        b.field("u", Shape::Matrix, &[xi, eta]).unwrap();
        b.field("v", Shape::Matrix, &[xi, eta]).unwrap();
        b.build()
    }

    #[test]
    fn trace_cyclicity_is_numerically_tight() {
        let ws = setup();
        let u = ws.lookup_field("u").unwrap();
        let v = ws.lookup_field("v").unwrap();
        let ab = Expr::field(&ws, u).mul(&ws, &Expr::field(&ws, v)).trace(&ws).unwrap();
        let ba = Expr::field(&ws, v).mul(&ws, &Expr::field(&ws, u)).trace(&ws).unwrap();
        let diff = ab.sub(&ws, &ba);
        assert!(diff.is_zero());
        // evaluate the unmerged difference by hand: product homomorphism
        let asg = NumericAssignment::new(&ws, 7, 3);
        let (va, _) = numeric_eval(&ws, &ab, &asg).unwrap();
        let (vb, _) = numeric_eval(&ws, &ba, &asg).unwrap();
        assert!((va.max_abs() - vb.max_abs()).abs() < 1e-12);
    }

    #[test]
    fn eval_is_multiplicative() {
        let ws = setup();
        let u = Expr::field(&ws, ws.lookup_field("u").unwrap());
        let v = Expr::field(&ws, ws.lookup_field("v").unwrap());
        let asg = NumericAssignment::new(&ws, 11, 2);
        let (vu, _) = numeric_eval(&ws, &u, &asg).unwrap();
        let (vv, _) = numeric_eval(&ws, &v, &asg).unwrap();
        let (vuv, _) = numeric_eval(&ws, &u.mul(&ws, &v), &asg).unwrap();
        let (mu, mv, muv) = match (vu, vv, vuv) {
            (Value::Matrix(a), Value::Matrix(b), Value::Matrix(c)) => (a, b, c),
            _ => panic!("matrix values expected"),
        };
        let prod = mu.matmul(&mv);
        let mut diff = 0.0f64;
        for (x, y) in prod.a.iter().zip(muv.a.iter()) {
            diff = diff.max((x - y).norm());
        }
        assert!(diff < 1e-12);
    }

    #[test]
    fn determinism_same_seed_same_values() {
        let ws = setup();
        let u = Expr::field(&ws, ws.lookup_field("u").unwrap());
        let a1 = NumericAssignment::new(&ws, 5, 2);
        let a2 = NumericAssignment::new(&ws, 5, 2);
        let (v1, _) = numeric_eval(&ws, &u, &a1).unwrap();
        let (v2, _) = numeric_eval(&ws, &u, &a2).unwrap();
        match (v1, v2) {
            (Value::Matrix(m1), Value::Matrix(m2)) => assert_eq!(m1.a, m2.a),
            _ => panic!(),
        }
    }

    #[test]
    fn param_gaps_are_respected() {
        let ws = setup();
        for seed in 0..20 {
            let asg = NumericAssignment::new(&ws, seed, 2);
            let p = asg.params();
            assert!((p[1] - p[2]).norm() >= 0.1);
        }
    }

    #[test]
    fn free_trace_is_reported_nonzero() {
        let ws = setup();
        let u = ws.lookup_field("u").unwrap();
        let e = Expr::field(&ws, u).trace(&ws).unwrap();
        let rules = RuleSet::new();
        let verdict = is_zero_mod(&ws, &e, &rules, 4, 3, 2).unwrap();
        assert!(matches!(verdict, Verdict::Nonzero { .. }));
    }

    #[test]
    fn commutator_is_numerically_zero_at_dimension_one() {
        // AB - BA is canonically nonzero but evaluates to zero when the
        // numeric dimension is one: the numerically-zero verdict fires
        let ws = setup();
        let u = ws.lookup_field("u").unwrap();
        let v = ws.lookup_field("v").unwrap();
        let e = Expr::field(&ws, u).commutator(&ws, &Expr::field(&ws, v));
        assert!(!e.is_zero());
        let verdict = is_zero_mod(&ws, &e, &RuleSet::new(), 4, 9, 1).unwrap();
        match verdict {
            Verdict::NumericallyZero { max_residual, ref seeds } => {
                assert!(max_residual <= 1e-9);
                assert_eq!(seeds.len(), 4);
            }
            other => panic!("expected numerically-zero, got {:?}", other),
        }
    }

    #[test]
    fn singular_matrix_inverse_is_rejected() {
        let mut m = Mat::zeros(2);
        m.set(0, 0, Complex64::new(1.0, 0.0));
        m.set(0, 1, Complex64::new(2.0, 0.0));
        m.set(1, 0, Complex64::new(2.0, 0.0));
        m.set(1, 1, Complex64::new(4.0, 0.0));
        assert!(matches!(m.inverse(), Err(Error::IllConditioned { .. })));
    }

    #[test]
    fn inverse_times_matrix_is_identity_numerically() {
        let ws = setup();
        let u = ws.lookup_field("u").unwrap();
        let e = Expr::inv(&ws, u).mul(&ws, &Expr::field(&ws, u));
        let asg = NumericAssignment::new(&ws, 13, 3);
        let (v, _) = numeric_eval(&ws, &e, &asg).unwrap();
        match v {
            Value::Matrix(m) => {
                let mut diff = 0.0f64;
                for i in 0..3 {
                    for j in 0..3 {
                        let want = if i == j { 1.0 } else { 0.0 };
                        diff = diff.max((m.get(i, j) - Complex64::new(want, 0.0)).norm());
                    }
                }
                assert!(diff < 1e-12);
            }
            _ => panic!(),
        }
    }
}
