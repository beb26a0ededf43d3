//! The pole-expanded hierarchy: Q-recursion, hierarchy equations, and the
//! scalar three-flow Lagrangian multiform.
//!
//! The recursion determines `Q_{k+1}` from `Q_k` in two stages: the
//! off-diagonal part solves `[Q0, Q_{k+1}] + [Q1, Q_k] = D_{x1} Q_k` by
//! inverting `ad(Q0)` (valid for regular diagonal `Q0`), and the diagonal
//! part is the formal `x1`-antiderivative of the diagonal of `[Q1, Q_{k+1}]`
//! with integration constants set to zero. For the 2x2 seed
//! `Q0 = diag(-i, i)`, `Q1 = [[0, q], [r, 0]]` this generates the hierarchy
//! whose first flows are the NLS pair and an mKdV-type flow.

use crate::calculus::{multiform_el_system, total_derivative, variational_derivative, Lagrangian2Form};
use crate::check::CheckResult;
use crate::error::{Error, Result};
use crate::expr::{Expr, Jet, MonoKey};
use crate::integrate::formal_integrate;
use crate::numeric::{self, NumericAssignment};
use crate::rewrite::{delta_d_check, reduce_lazy, RuleSet};
use crate::scalar::ParamScalar;
use crate::workspace::{CoordId, FieldId, Shape, Workspace, WorkspaceBuilder};

// ---------------------------------------------------------------------------
// Matrices of expressions
// ---------------------------------------------------------------------------

/// A small square matrix with expression entries (entries are scalar-shaped;
/// matrix structure lives at this level, not inside the entries).
#[derive(Clone, Debug, PartialEq)]
pub struct ExprMatrix {
    pub n: usize,
    entries: Vec<Expr>,
}

impl ExprMatrix {
    pub fn zeros(n: usize) -> Self {
        ExprMatrix { n, entries: vec![Expr::zero(); n * n] }
    }

    pub fn from_rows(rows: Vec<Vec<Expr>>) -> Result<Self> {
        let n = rows.len();
        if rows.iter().any(|r| r.len() != n) {
            return Err(Error::Invalid("matrix rows must be square".into()));
        }
        Ok(ExprMatrix { n, entries: rows.into_iter().flatten().collect() })
    }

    pub fn get(&self, i: usize, j: usize) -> &Expr {
        &self.entries[i * self.n + j]
    }

    pub fn set(&mut self, i: usize, j: usize, e: Expr) {
        self.entries[i * self.n + j] = e;
    }

    pub fn add(&self, ws: &Workspace, other: &Self) -> Self {
        let mut out = self.clone();
        for (x, y) in out.entries.iter_mut().zip(other.entries.iter()) {
            *x = x.add(ws, y);
        }
        out
    }

    pub fn sub(&self, ws: &Workspace, other: &Self) -> Self {
        self.add(ws, &other.neg())
    }

    pub fn neg(&self) -> Self {
        let mut out = self.clone();
        for x in out.entries.iter_mut() {
            *x = x.neg();
        }
        out
    }

    pub fn scale(&self, c: &ParamScalar) -> Self {
        let mut out = self.clone();
        for x in out.entries.iter_mut() {
            *x = x.scale(c);
        }
        out
    }

    pub fn matmul(&self, ws: &Workspace, other: &Self) -> Self {
        let n = self.n;
        let mut out = ExprMatrix::zeros(n);
        for i in 0..n {
            for j in 0..n {
                let mut acc = Expr::zero();
                for k in 0..n {
                    acc = acc.add(ws, &self.get(i, k).mul(ws, other.get(k, j)));
                }
                out.set(i, j, acc);
            }
        }
        out
    }

    pub fn commutator(&self, ws: &Workspace, other: &Self) -> Self {
        self.matmul(ws, other).sub(ws, &other.matmul(ws, self))
    }

    pub fn derivative(&self, ws: &Workspace, c: CoordId) -> Self {
        let mut out = self.clone();
        for x in out.entries.iter_mut() {
            *x = total_derivative(ws, x, c);
        }
        out
    }

    pub fn try_map(&self, f: impl Fn(&Expr) -> Result<Expr>) -> Result<Self> {
        let mut out = self.clone();
        for x in out.entries.iter_mut() {
            *x = f(x)?;
        }
        Ok(out)
    }

    pub fn is_zero(&self) -> bool {
        self.entries.iter().all(|e| e.is_zero())
    }

    pub fn trace(&self, ws: &Workspace) -> Expr {
        let mut acc = Expr::zero();
        for i in 0..self.n {
            acc = acc.add(ws, self.get(i, i));
        }
        acc
    }

    pub fn display(&self, ws: &Workspace) -> String {
        let rows: Vec<String> = (0..self.n)
            .map(|i| {
                let cells: Vec<String> = (0..self.n).map(|j| self.get(i, j).display(ws)).collect();
                format!("[{}]", cells.join(", "))
            })
            .collect();
        format!("[{}]", rows.join(", "))
    }
}

// ---------------------------------------------------------------------------
// Q-recursion
// ---------------------------------------------------------------------------

/// Build the tower `Q_0 .. Q_n` from a regular diagonal constant `Q_0` and
/// an off-diagonal `Q_1`.
pub fn q_recursion(
    ws: &Workspace,
    q0: &ExprMatrix,
    q1: &ExprMatrix,
    x1: CoordId,
    n: usize,
) -> Result<Vec<ExprMatrix>> {
    let size = q0.n;
    if q1.n != size {
        return Err(Error::Invalid("Q0 and Q1 sizes differ".into()));
    }
    let mut diag: Vec<ParamScalar> = Vec::with_capacity(size);
    for i in 0..size {
        for j in 0..size {
            if i != j && !q0.get(i, j).is_zero() {
                return Err(Error::Invalid("Q0 must be diagonal".into()));
            }
        }
        let d = q0
            .get(i, i)
            .as_constant(ws)
            .ok_or_else(|| Error::Invalid("Q0 entries must be constant".into()))?;
        diag.push(d);
    }
    for i in 0..size {
        for j in 0..size {
            if i != j && diag[i].sub(&diag[j]).is_zero() {
                return Err(Error::AdSingular(format!("eigenvalues {} and {} coincide", i, j)));
            }
        }
    }
    for i in 0..size {
        if !q1.get(i, i).is_zero() {
            return Err(Error::Invalid("Q1 must be off-diagonal".into()));
        }
    }
    let mut tower = vec![q0.clone(), q1.clone()];
    for k in 1..n {
        let qk = &tower[k];
        let rhs = qk.derivative(ws, x1).sub(ws, &q1.commutator(ws, qk));
        for i in 0..size {
            if !rhs.get(i, i).is_zero() {
                return Err(Error::Invalid(format!(
                    "recursion inconsistency: diagonal source at step {} is {}",
                    k,
                    rhs.get(i, i).display(ws)
                )));
            }
        }
        // off-diagonal part: invert ad(Q0)
        let mut next = ExprMatrix::zeros(size);
        for i in 0..size {
            for j in 0..size {
                if i == j {
                    continue;
                }
                let gap = diag[i].sub(&diag[j]);
                next.set(i, j, rhs.get(i, j).scale(&gap.inv()));
            }
        }
        // diagonal part: formally integrate diag([Q1, Q_{k+1}^offdiag])
        let source = q1.commutator(ws, &next);
        for i in 0..size {
            let f = formal_integrate(ws, source.get(i, i), x1)?;
            next.set(i, i, f);
        }
        tower.push(next);
    }
    Ok(tower)
}

// ---------------------------------------------------------------------------
// The 2x2 hierarchy context
// ---------------------------------------------------------------------------

/// Workspace with coordinates `x1..x_height` and the scalar fields `q`, `r`.
pub struct HierarchyContext {
    pub ws: Workspace,
    pub xs: Vec<CoordId>,
    pub q: FieldId,
    pub r: FieldId,
}

impl HierarchyContext {
    pub fn new(height: usize) -> Result<Self> {
        if height < 2 {
            return Err(Error::Invalid("tower height must be at least 2".into()));
        }
        let mut b = WorkspaceBuilder::new();
        let mut xs = Vec::new();
        for k in 1..=height {
            xs.push(b.coord(&format!("x{}", k))?);
        }
        let q = b.field("q", Shape::Scalar, &xs)?;
        let r = b.field("r", Shape::Scalar, &xs)?;
        Ok(HierarchyContext { ws: b.build(), xs, q, r })
    }

    /// Coordinate `x_k` (1-based).
    pub fn x(&self, k: usize) -> CoordId {
        self.xs[k - 1]
    }

    fn qj(&self, orders: &[usize]) -> Expr {
        let derivs: Vec<(CoordId, u8)> = orders.iter().map(|&k| (self.x(k), 1)).collect();
        Expr::jet(&self.ws, self.q, &derivs)
    }

    fn rj(&self, orders: &[usize]) -> Expr {
        let derivs: Vec<(CoordId, u8)> = orders.iter().map(|&k| (self.x(k), 1)).collect();
        Expr::jet(&self.ws, self.r, &derivs)
    }

    /// The 2x2 seed `Q0 = diag(-i, i)`, `Q1 = [[0, q], [r, 0]]`.
    pub fn seed(&self) -> (ExprMatrix, ExprMatrix) {
        let ws = &self.ws;
        let mi = Expr::scalar(ws.imag(-1, 1));
        let pi = Expr::scalar(ws.imag(1, 1));
        let q0 = ExprMatrix::from_rows(vec![vec![mi, Expr::zero()], vec![Expr::zero(), pi]]).unwrap();
        let q1 = ExprMatrix::from_rows(vec![
            vec![Expr::zero(), Expr::field(ws, self.q)],
            vec![Expr::field(ws, self.r), Expr::zero()],
        ])
        .unwrap();
        (q0, q1)
    }

    pub fn tower(&self, n: usize) -> Result<Vec<ExprMatrix>> {
        let (q0, q1) = self.seed();
        q_recursion(&self.ws, &q0, &q1, self.x(1), n)
    }

    /// Hierarchy equation `D_{x_n} Q_1 - D_{x_1} Q_n - [Q_n, Q_1]`.
    pub fn hierarchy_equation(&self, tower: &[ExprMatrix], n: usize) -> Result<ExprMatrix> {
        if n >= tower.len() {
            return Err(Error::Invalid(format!("tower holds Q_0..Q_{}, asked for Q_{}", tower.len() - 1, n)));
        }
        if n > self.xs.len() {
            return Err(Error::TruncationExceeded(format!("no coordinate x{}", n)));
        }
        let ws = &self.ws;
        let q1 = &tower[1];
        let qn = &tower[n];
        Ok(q1
            .derivative(ws, self.x(n))
            .sub(ws, &qn.derivative(ws, self.x(1)))
            .sub(ws, &qn.commutator(ws, q1)))
    }

    /// Flow rules orienting `q_{x_n}`, `r_{x_n}` (n >= 2) into pure
    /// `x1`-differential polynomials, for every requested flow.
    pub fn flow_rules(&self, tower: &[ExprMatrix], flows: &[usize]) -> Result<RuleSet> {
        let ws = &self.ws;
        let q1 = &tower[1];
        let mut rules = RuleSet::new();
        for &n in flows {
            if n < 2 {
                return Err(Error::Invalid("flows start at x2".into()));
            }
            let qn = &tower[n];
            let rhs_m = qn.derivative(ws, self.x(1)).add(ws, &qn.commutator(ws, q1));
            let lhs_q = Jet { field: self.q, index: single_index(ws, self.x(n)) };
            let lhs_r = Jet { field: self.r, index: single_index(ws, self.x(n)) };
            rules.add(ws, lhs_q, rhs_m.get(0, 1).clone(), self.x(n))?;
            rules.add(ws, lhs_r, rhs_m.get(1, 0).clone(), self.x(n))?;
        }
        Ok(rules)
    }

    // -- printed golden expressions ------------------------------------

    /// `Q2 = (i/2) [[-qr, q_x1], [-r_x1, qr]]`.
    pub fn q2_golden(&self) -> ExprMatrix {
        let ws = &self.ws;
        let half_i = ws.imag(1, 2);
        let qr = self.qj(&[]).mul(ws, &self.rj(&[]));
        ExprMatrix::from_rows(vec![
            vec![qr.neg().scale(&half_i), self.qj(&[1]).scale(&half_i)],
            vec![self.rj(&[1]).neg().scale(&half_i), qr.scale(&half_i)],
        ])
        .unwrap()
    }

    /// `Q3 = -(1/4) [[q r_x1 - r q_x1, q_x1x1 - 2 q^2 r], [r_x1x1 - 2 q r^2, -(q r_x1) + r q_x1]]`.
    pub fn q3_golden(&self) -> ExprMatrix {
        let ws = &self.ws;
        let mq = ws.ratio(-1, 4);
        let q = self.qj(&[]);
        let r = self.rj(&[]);
        let a11 = q.mul(ws, &self.rj(&[1])).sub(ws, &r.mul(ws, &self.qj(&[1])));
        let a12 = self.qj(&[1, 1]).sub(ws, &q.pow(ws, 2).mul(ws, &r).scale(&ws.int(2)));
        let a21 = self.rj(&[1, 1]).sub(ws, &q.mul(ws, &r.pow(ws, 2)).scale(&ws.int(2)));
        ExprMatrix::from_rows(vec![
            vec![a11.clone().scale(&mq), a12.scale(&mq)],
            vec![a21.scale(&mq), a11.neg().scale(&mq)],
        ])
        .unwrap()
    }

    /// The NLS pair in equation form: `q_x2 - (i/2) q_x1x1 + i q^2 r` and
    /// `r_x2 + (i/2) r_x1x1 - i r^2 q`.
    pub fn nls_pair_golden(&self) -> (Expr, Expr) {
        let ws = &self.ws;
        let eq_q = self
            .qj(&[2])
            .sub(ws, &self.qj(&[1, 1]).scale(&ws.imag(1, 2)))
            .add(ws, &self.qj(&[]).pow(ws, 2).mul(ws, &self.rj(&[])).scale(&ws.imag(1, 1)));
        let eq_r = self
            .rj(&[2])
            .add(ws, &self.rj(&[1, 1]).scale(&ws.imag(1, 2)))
            .sub(ws, &self.rj(&[]).pow(ws, 2).mul(ws, &self.qj(&[])).scale(&ws.imag(1, 1)));
        (eq_q, eq_r)
    }

    /// The third flow in equation form: `q_x3 - (3/2) q r q_x1 + (1/4) q_x1x1x1`
    /// and `r_x3 - (3/2) r q r_x1 + (1/4) r_x1x1x1`.
    pub fn x3_pair_golden(&self) -> (Expr, Expr) {
        let ws = &self.ws;
        let qr = self.qj(&[]).mul(ws, &self.rj(&[]));
        let eq_q = self
            .qj(&[3])
            .sub(ws, &qr.mul(ws, &self.qj(&[1])).scale(&ws.ratio(3, 2)))
            .add(ws, &self.qj(&[1, 1, 1]).scale(&ws.ratio(1, 4)));
        let eq_r = self
            .rj(&[3])
            .sub(ws, &qr.mul(ws, &self.rj(&[1])).scale(&ws.ratio(3, 2)))
            .add(ws, &self.rj(&[1, 1, 1]).scale(&ws.ratio(1, 4)));
        (eq_q, eq_r)
    }

    // -- the scalar multiform ------------------------------------------

    /// `L_(x1x2) = (1/2)(r q_x2 - q r_x2) + (i/2) q_x1 r_x1 + (i/2) q^2 r^2`.
    pub fn l12(&self) -> Expr {
        let ws = &self.ws;
        let t1 = self
            .rj(&[])
            .mul(ws, &self.qj(&[2]))
            .sub(ws, &self.qj(&[]).mul(ws, &self.rj(&[2])))
            .scale(&ws.ratio(1, 2));
        let t2 = self.qj(&[1]).mul(ws, &self.rj(&[1])).scale(&ws.imag(1, 2));
        let t3 = self.qj(&[]).pow(ws, 2).mul(ws, &self.rj(&[]).pow(ws, 2)).scale(&ws.imag(1, 2));
        t1.add(ws, &t2).add(ws, &t3)
    }

    /// `L_(x3x1) = (1/2)(q r_x3 - r q_x3) + (1/8)(r_x1 q_x1x1 - q_x1 r_x1x1)
    ///            + (3/8) q r (r q_x1 - q r_x1)`.
    pub fn l31(&self) -> Expr {
        let ws = &self.ws;
        let t1 = self
            .qj(&[])
            .mul(ws, &self.rj(&[3]))
            .sub(ws, &self.rj(&[]).mul(ws, &self.qj(&[3])))
            .scale(&ws.ratio(1, 2));
        let t2 = self
            .rj(&[1])
            .mul(ws, &self.qj(&[1, 1]))
            .sub(ws, &self.qj(&[1]).mul(ws, &self.rj(&[1, 1])))
            .scale(&ws.ratio(1, 8));
        let inner = self
            .rj(&[])
            .mul(ws, &self.qj(&[1]))
            .sub(ws, &self.qj(&[]).mul(ws, &self.rj(&[1])));
        let t3 = self.qj(&[]).mul(ws, &self.rj(&[])).mul(ws, &inner).scale(&ws.ratio(3, 8));
        t1.add(ws, &t2).add(ws, &t3)
    }

    /// The derived `L_(x2x3)` component, term by term as printed.
    pub fn l23(&self) -> Expr {
        let ws = &self.ws;
        let q = self.qj(&[]);
        let r = self.rj(&[]);
        let qr = q.mul(ws, &r);
        let mut acc = self
            .qj(&[2])
            .mul(ws, &self.rj(&[1, 1]))
            .sub(ws, &self.rj(&[2]).mul(ws, &self.qj(&[1, 1])))
            .scale(&ws.ratio(1, 4));
        acc = acc.sub(
            ws,
            &self
                .qj(&[3])
                .mul(ws, &self.rj(&[1]))
                .add(ws, &self.rj(&[3]).mul(ws, &self.qj(&[1])))
                .scale(&ws.imag(1, 2)),
        );
        acc = acc.add(
            ws,
            &self
                .qj(&[1])
                .mul(ws, &self.rj(&[1, 2]))
                .sub(ws, &self.rj(&[1]).mul(ws, &self.qj(&[1, 2])))
                .scale(&ws.ratio(1, 8)),
        );
        acc = acc.add(
            ws,
            &qr.mul(ws, &q.mul(ws, &self.rj(&[2])).sub(ws, &r.mul(ws, &self.qj(&[2]))))
                .scale(&ws.ratio(3, 8)),
        );
        acc = acc.sub(ws, &self.qj(&[1, 1]).mul(ws, &self.rj(&[1, 1])).scale(&ws.imag(1, 8)));
        acc = acc.add(
            ws,
            &qr.mul(ws, &q.mul(ws, &self.rj(&[1, 1])).add(ws, &r.mul(ws, &self.qj(&[1, 1]))))
                .scale(&ws.imag(1, 4)),
        );
        acc = acc.sub(
            ws,
            &q.pow(ws, 2)
                .mul(ws, &self.rj(&[1]).pow(ws, 2))
                .add(ws, &r.pow(ws, 2).mul(ws, &self.qj(&[1]).pow(ws, 2)))
                .scale(&ws.imag(1, 8)),
        );
        acc = acc.add(ws, &qr.mul(ws, &self.qj(&[1])).mul(ws, &self.rj(&[1])).scale(&ws.imag(1, 4)));
        acc.sub(ws, &q.pow(ws, 3).mul(ws, &r.pow(ws, 3)).scale(&ws.imag(1, 2)))
    }

    /// The two printed equations of motion of `L_(x2x3)`, in the printed
    /// normalization: the first equals `dL/dq`, the second equals `-dL/dr`.
    pub fn l23_equations_golden(&self) -> (Expr, Expr) {
        let ws = &self.ws;
        let q = self.qj(&[]);
        let r = self.rj(&[]);
        let qr = q.mul(ws, &r);
        // (i/2) r_x1x3 + (3/2) q r r_x2 - (1/4) r_x1x1x2 + (i/2) q r r_x1x1
        // + (i/4) r^2 q_x1x1 - (i/4) q r_x1^2 + (i/4) r q_x1 r_x1 - (3i/2) q^2 r^3
        let eq1 = self
            .rj(&[1, 3])
            .scale(&ws.imag(1, 2))
            .add(ws, &qr.mul(ws, &self.rj(&[2])).scale(&ws.ratio(3, 2)))
            .sub(ws, &self.rj(&[1, 1, 2]).scale(&ws.ratio(1, 4)))
            .add(ws, &qr.mul(ws, &self.rj(&[1, 1])).scale(&ws.imag(1, 2)))
            .add(ws, &r.pow(ws, 2).mul(ws, &self.qj(&[1, 1])).scale(&ws.imag(1, 4)))
            .sub(ws, &q.mul(ws, &self.rj(&[1]).pow(ws, 2)).scale(&ws.imag(1, 4)))
            .add(ws, &r.mul(ws, &self.qj(&[1])).mul(ws, &self.rj(&[1])).scale(&ws.imag(1, 4)))
            .sub(ws, &q.pow(ws, 2).mul(ws, &r.pow(ws, 3)).scale(&ws.imag(3, 2)));
        // -(i/2) q_x1x3 + (3/2) r q q_x2 - (1/4) q_x1x1x2 - (i/2) r q q_x1x1
        // - (i/4) q^2 r_x1x1 + (i/4) r q_x1^2 - (i/4) q q_x1 r_x1 + (3i/2) r^2 q^3
        let eq2 = self
            .qj(&[1, 3])
            .scale(&ws.imag(-1, 2))
            .add(ws, &qr.mul(ws, &self.qj(&[2])).scale(&ws.ratio(3, 2)))
            .sub(ws, &self.qj(&[1, 1, 2]).scale(&ws.ratio(1, 4)))
            .sub(ws, &qr.mul(ws, &self.qj(&[1, 1])).scale(&ws.imag(1, 2)))
            .sub(ws, &q.pow(ws, 2).mul(ws, &self.rj(&[1, 1])).scale(&ws.imag(1, 4)))
            .add(ws, &r.mul(ws, &self.qj(&[1]).pow(ws, 2)).scale(&ws.imag(1, 4)))
            .sub(ws, &q.mul(ws, &self.qj(&[1])).mul(ws, &self.rj(&[1])).scale(&ws.imag(1, 4)))
            .add(ws, &r.pow(ws, 2).mul(ws, &q.pow(ws, 3)).scale(&ws.imag(3, 2)));
        (eq1, eq2)
    }

    /// The scalar multiform over `(x1, x2, x3)`.
    pub fn scalar_multiform(&self) -> Result<Lagrangian2Form> {
        if self.xs.len() < 3 {
            return Err(Error::Invalid("the scalar multiform needs x1, x2, x3".into()));
        }
        let mut form = Lagrangian2Form::new([self.x(1), self.x(2), self.x(3)])?;
        form.set_component(&self.ws, self.x(1), self.x(2), self.l12())?;
        form.set_component(&self.ws, self.x(2), self.x(3), self.l23())?;
        form.set_component(&self.ws, self.x(3), self.x(1), self.l31())?;
        Ok(form)
    }
}

fn single_index(ws: &Workspace, c: CoordId) -> crate::expr::MultiIndex {
    let mut idx = crate::expr::zero_index(ws);
    idx[c.0 as usize] = 1;
    idx
}

// ---------------------------------------------------------------------------
// Pole expansion of xi/eta derivatives into the x-tower
// ---------------------------------------------------------------------------

/// Result of expanding `xi`/`eta` derivatives into the coordinate tower:
/// the exact coefficient of `a^-i b^-j` for every key `(i, j)` inside the
/// guaranteed window `i + j <= order`; keys outside the window error rather
/// than silently returning a truncated value.
#[derive(Clone, Debug)]
pub struct PoleExpansion {
    pub order: usize,
    coefficients: std::collections::BTreeMap<(i64, i64), Expr>,
}

impl PoleExpansion {
    pub fn coefficient(&self, i: i64, j: i64) -> Result<Expr> {
        if i + j > self.order as i64 {
            return Err(Error::TruncationExceeded(format!(
                "coefficient ({}, {}) lies outside the window i+j <= {}",
                i, j, self.order
            )));
        }
        Ok(self.coefficients.get(&(i, j)).cloned().unwrap_or_else(Expr::zero))
    }

    pub fn keys(&self) -> impl Iterator<Item = (i64, i64)> + '_ {
        self.coefficients.keys().copied()
    }
}

/// Setup for the expansion: which parameters expand which coordinate, and
/// the tower coordinates `x0..x_order` (index 0 first).
pub struct ExpansionSpec {
    pub xi: CoordId,
    pub eta: CoordId,
    pub a: crate::workspace::ParamId,
    pub b: crate::workspace::ParamId,
    pub tower: Vec<CoordId>,
}

/// Expand every `xi`-derivative as `sum_i a^-(i+1) D_{x_i}` and every
/// `eta`-derivative as `sum_j b^-(j+1) D_{x_j}` (truncated at the tower),
/// and collect exact coefficients of `a^-i b^-j`. Denominators of the input
/// must not involve the expanded parameters (clear them first); polynomial
/// occurrences contribute positive powers that offset the keys.
pub fn expand_pole_coordinates(ws: &Workspace, e: &Expr, spec: &ExpansionSpec) -> Result<PoleExpansion> {
    let order = spec.tower.len() - 1;
    let ai = spec.a.0 as usize;
    let bi = spec.b.0 as usize;
    let names = ws.param_names();
    let mut buckets: std::collections::BTreeMap<(i64, i64), Expr> = std::collections::BTreeMap::new();
    for (key, coeff) in e.terms() {
        if coeff.den().degree_in(ai) > 0 || coeff.den().degree_in(bi) > 0 {
            return Err(Error::Invalid(format!(
                "clear the expanded parameters from denominators first: {}",
                coeff.to_string_with(&names)
            )));
        }
        for (mono, gc) in &coeff.num().terms {
            let s = mono[ai] as i64;
            let t = mono[bi] as i64;
            let mut rest = mono.clone();
            rest[ai] = 0;
            rest[bi] = 0;
            let mut poly = crate::scalar::Poly::zero(ws.nparams());
            poly.terms.insert(rest, gc.clone());
            let c = ParamScalar::from_poly(poly);
            for ((di, dj), kex, kc) in expand_key(ws, key, spec)? {
                let slot =
                    buckets.entry((di - s, dj - t)).or_insert_with(|| Expr::zero_shaped(e.is_matrix()));
                let mut tmp = Expr::zero_shaped(e.is_matrix());
                tmp.push_term(ws, kex, kc.mul(&c));
                *slot = slot.add(ws, &tmp);
            }
        }
    }
    buckets.retain(|_, v| !v.is_zero());
    let mut coefficients = std::collections::BTreeMap::new();
    for ((i, j), v) in buckets {
        if i + j <= order as i64 {
            coefficients.insert((i, j), v);
        }
        // contributions beyond the window are inexact under truncation and
        // are not reported
    }
    Ok(PoleExpansion { order, coefficients })
}

/// Expand all xi/eta derivative slots of one monomial key; returns
/// `((a-power, b-power), key, coefficient)` triples with positive powers
/// meaning `a^-power`.
fn expand_key(
    ws: &Workspace,
    key: &MonoKey,
    spec: &ExpansionSpec,
) -> Result<Vec<((i64, i64), MonoKey, ParamScalar)>> {
    let xi = spec.xi.0 as usize;
    let eta = spec.eta.0 as usize;
    let find = |key: &MonoKey| -> Option<(Jet, usize)> {
        for jet in key.scalars.keys() {
            if jet.index[xi] > 0 {
                return Some((jet.clone(), xi));
            }
            if jet.index[eta] > 0 {
                return Some((jet.clone(), eta));
            }
        }
        for w in key.traces.keys() {
            for a in w {
                if let crate::expr::Atom::Jet(j) = a {
                    if j.index[xi] > 0 {
                        return Some((j.clone(), xi));
                    }
                    if j.index[eta] > 0 {
                        return Some((j.clone(), eta));
                    }
                }
            }
        }
        for a in &key.word {
            if let crate::expr::Atom::Jet(j) = a {
                if j.index[xi] > 0 {
                    return Some((j.clone(), xi));
                }
                if j.index[eta] > 0 {
                    return Some((j.clone(), eta));
                }
            }
        }
        None
    };
    let mut done: Vec<((i64, i64), MonoKey, ParamScalar)> = Vec::new();
    let mut work: Vec<((i64, i64), MonoKey, ParamScalar)> =
        vec![((0, 0), key.clone(), ParamScalar::one(ws.nparams()))];
    while let Some(((pa, pb), k, c)) = work.pop() {
        let Some((jet, slot)) = find(&k) else {
            done.push(((pa, pb), k, c));
            continue;
        };
        for (ti, &tc) in spec.tower.iter().enumerate() {
            let mut idx = jet.index.clone();
            idx[slot] -= 1;
            idx[tc.0 as usize] += 1;
            let new_jet = Jet { field: jet.field, index: idx };
            if new_jet.vanishes(ws) {
                continue;
            }
            let mut k2 = k.clone();
            replace_jet_once(&mut k2, &jet, &new_jet);
            let (da, db) = if slot == xi { (ti as i64 + 1, 0) } else { (0, ti as i64 + 1) };
            work.push(((pa + da, pb + db), k2, c.clone()));
        }
    }
    Ok(done)
}

/// Replace one occurrence of `from` by `to` in a key (one power in the
/// commuting part, or a single atom in a trace word or the ordered word).
fn replace_jet_once(key: &mut MonoKey, from: &Jet, to: &Jet) {
    if let Some(&e) = key.scalars.get(from) {
        let e2 = e - 1;
        if e2 == 0 {
            key.scalars.remove(from);
        } else {
            key.scalars.insert(from.clone(), e2);
        }
        *key.scalars.entry(to.clone()).or_insert(0) += 1;
        return;
    }
    let traces = std::mem::take(&mut key.traces);
    let mut replaced = false;
    for (mut w, m) in traces {
        if !replaced {
            if let Some(pos) = w.iter().position(|a| matches!(a, crate::expr::Atom::Jet(j) if j == from)) {
                if m > 1 {
                    let mut w2 = w.clone();
                    w2[pos] = crate::expr::Atom::Jet(to.clone());
                    *key.traces.entry(w2).or_insert(0) += 1;
                    *key.traces.entry(w).or_insert(0) += m - 1;
                } else {
                    w[pos] = crate::expr::Atom::Jet(to.clone());
                    *key.traces.entry(w).or_insert(0) += m;
                }
                replaced = true;
                continue;
            }
        }
        *key.traces.entry(w).or_insert(0) += m;
    }
    if replaced {
        return;
    }
    if let Some(pos) = key.word.iter().position(|a| matches!(a, crate::expr::Atom::Jet(j) if j == from)) {
        key.word[pos] = crate::expr::Atom::Jet(to.clone());
    }
}

// ---------------------------------------------------------------------------
// Verification battery
// ---------------------------------------------------------------------------

/// Golden checks for the recursion.
pub fn verify_q_recursion(height: usize) -> Result<Vec<CheckResult>> {
    let height = height.max(3);
    let ctx = HierarchyContext::new(height)?;
    let ws = &ctx.ws;
    let tower = ctx.tower(height)?;
    let mut out = Vec::new();
    out.push(CheckResult::of_bool(
        "qtower.q2",
        tower[2] == ctx.q2_golden(),
        tower[2].sub(ws, &ctx.q2_golden()).display(ws),
    ));
    out.push(CheckResult::of_bool(
        "qtower.q3",
        tower[3] == ctx.q3_golden(),
        tower[3].sub(ws, &ctx.q3_golden()).display(ws),
    ));
    let trace_free = tower[1..].iter().all(|qk| qk.trace(ws).is_zero());
    out.push(CheckResult::of_bool("qtower.traceless", trace_free, "nonzero trace in tower"));
    let killed = tower[1..]
        .iter()
        .map(|qk| -> Result<bool> {
            let z = qk.try_map(|e| e.set_field_zero(ws, ctx.q)?.set_field_zero(ws, ctx.r))?;
            Ok(z.is_zero())
        })
        .collect::<Result<Vec<_>>>()?;
    out.push(CheckResult::of_bool("qtower.zero_seed", killed.iter().all(|&b| b), "Q_k nonzero at q=r=0"));
    Ok(out)
}

/// The three recursion relations hold for all computed indices (the two
/// differential ones modulo the flow rules).
pub fn verify_recursion_consistency(height: usize) -> Result<Vec<CheckResult>> {
    let height = height.max(5);
    let ctx = HierarchyContext::new(height)?;
    let ws = &ctx.ws;
    let tower = ctx.tower(height)?;
    let flows: Vec<usize> = (2..=height).collect();
    let rules = ctx.flow_rules(&tower, &flows)?;
    let mut out = Vec::new();
    let mut alg_ok = true;
    let mut alg_residual = String::new();
    for k in 1..tower.len() - 1 {
        let lhs = tower[0]
            .commutator(ws, &tower[k + 1])
            .add(ws, &tower[1].commutator(ws, &tower[k]))
            .sub(ws, &tower[k].derivative(ws, ctx.x(1)));
        if !lhs.is_zero() {
            alg_ok = false;
            alg_residual = format!("k={}: {}", k, lhs.display(ws));
            break;
        }
    }
    out.push(CheckResult::of_bool("qtower.ladder", alg_ok, alg_residual));
    let mut flow_ok = true;
    let mut flow_residual = String::new();
    'outer: for i in 1..=3usize {
        for j in 1..=3usize {
            if i + 1 >= tower.len() || j >= tower.len() {
                continue;
            }
            let cross = tower[i]
                .derivative(ws, ctx.x(j))
                .sub(ws, &tower[j].derivative(ws, ctx.x(i)))
                .sub(ws, &tower[j].commutator(ws, &tower[i]));
            let red = cross.try_map(|e| reduce_lazy(ws, e, &rules))?;
            if !red.is_zero() {
                flow_ok = false;
                flow_residual = format!("curvature ({}, {}): {}", i, j, red.display(ws));
                break 'outer;
            }
            if j >= 2 {
                let mixed = tower[j]
                    .derivative(ws, ctx.x(i))
                    .sub(ws, &tower[i + 1].derivative(ws, ctx.x(j - 1)));
                let red = mixed.try_map(|e| reduce_lazy(ws, e, &rules))?;
                if !red.is_zero() {
                    flow_ok = false;
                    flow_residual = format!("mixed ({}, {}): {}", i, j, red.display(ws));
                    break 'outer;
                }
            }
        }
    }
    out.push(CheckResult::of_bool("qtower.flows_consistent", flow_ok, flow_residual));
    Ok(out)
}

/// Independent route to the tower: `D_x1 Q_{k+1} = D_{x_k} Q_2` modulo the
/// flows, so integrating the reduced right side must rebuild the entry.
pub fn verify_cross_route() -> Result<Vec<CheckResult>> {
    let ctx = HierarchyContext::new(5)?;
    let ws = &ctx.ws;
    let tower = ctx.tower(5)?;
    let rules = ctx.flow_rules(&tower, &[2, 3, 4])?;
    let mut out = Vec::new();
    for k in 2..=4usize {
        let d2 = tower[2].derivative(ws, ctx.x(k));
        let reduced = d2.try_map(|e| reduce_lazy(ws, e, &rules))?;
        let rebuilt = reduced.try_map(|e| formal_integrate(ws, e, ctx.x(1)))?;
        let ok = rebuilt == tower[k + 1];
        out.push(CheckResult::of_bool(
            format!("qtower.cross_route.q{}", k + 1),
            ok,
            rebuilt.sub(ws, &tower[k + 1]).display(ws),
        ));
    }
    Ok(out)
}

/// The printed hierarchy equations.
pub fn verify_hierarchy_equations() -> Result<Vec<CheckResult>> {
    let ctx = HierarchyContext::new(3)?;
    let ws = &ctx.ws;
    let tower = ctx.tower(3)?;
    let mut out = Vec::new();
    let e1 = ctx.hierarchy_equation(&tower, 1)?;
    out.push(CheckResult::of_bool("hierarchy.x1_trivial", e1.is_zero(), e1.display(ws)));
    let e2 = ctx.hierarchy_equation(&tower, 2)?;
    let (nls_q, nls_r) = ctx.nls_pair_golden();
    out.push(CheckResult::of_bool(
        "hierarchy.nls.q",
        *e2.get(0, 1) == nls_q,
        e2.get(0, 1).sub(ws, &nls_q).display(ws),
    ));
    out.push(CheckResult::of_bool(
        "hierarchy.nls.r",
        *e2.get(1, 0) == nls_r,
        e2.get(1, 0).sub(ws, &nls_r).display(ws),
    ));
    let e3 = ctx.hierarchy_equation(&tower, 3)?;
    let (f3_q, f3_r) = ctx.x3_pair_golden();
    out.push(CheckResult::of_bool(
        "hierarchy.x3.q",
        *e3.get(0, 1) == f3_q,
        e3.get(0, 1).sub(ws, &f3_q).display(ws),
    ));
    out.push(CheckResult::of_bool(
        "hierarchy.x3.r",
        *e3.get(1, 0) == f3_r,
        e3.get(1, 0).sub(ws, &f3_r).display(ws),
    ));
    Ok(out)
}

/// Pole-expanded hierarchy relations: the interior coefficients of the
/// cleared equation reproduce
/// `H_{x_i x_{j-1}} - H_{x_{i-1} x_j} - [H_{x_{j-1}}, H_{x_{i-1}}]`.
pub fn verify_pole_expansion() -> Result<Vec<CheckResult>> {
    let order = 6usize;
    let mut b = WorkspaceBuilder::new();
    let xi = b.coord("xi")?;
    let eta = b.coord("eta")?;
    let mut tower = Vec::new();
    for k in 0..=order {
        tower.push(b.coord(&format!("x{}", k))?);
    }
    let a = b.param("a")?;
    let bb = b.param("b")?;
    let mut deps = vec![xi, eta];
    deps.extend(tower.iter().copied());
    let h = b.field("H", Shape::Matrix, &deps)?;
    let ws = b.build();
    let spec = ExpansionSpec { xi, eta, a, b: bb, tower: tower.clone() };
    // cleared equation: (a - b) H_{xi eta} - [H_eta, H_xi]
    let gap = ws.param_scalar(a).sub(&ws.param_scalar(bb));
    let commutator = Expr::jet(&ws, h, &[(eta, 1)]).commutator(&ws, &Expr::jet(&ws, h, &[(xi, 1)]));
    let cleared = Expr::jet(&ws, h, &[(xi, 1), (eta, 1)]).scale(&gap).sub(&ws, &commutator);
    let expansion = expand_pole_coordinates(&ws, &cleared, &spec)?;
    let hx = |k: usize| Expr::jet(&ws, h, &[(tower[k], 1)]);
    let hxx = |k: usize, l: usize| {
        if k == l {
            Expr::jet(&ws, h, &[(tower[k], 2)])
        } else {
            Expr::jet(&ws, h, &[(tower[k], 1), (tower[l], 1)])
        }
    };
    let mut out = Vec::new();
    for i in 1..=3i64 {
        for j in 1..=3i64 {
            if i + j > order as i64 {
                continue;
            }
            let got = expansion.coefficient(i, j)?;
            let expect = hxx(i as usize, j as usize - 1)
                .sub(&ws, &hxx(i as usize - 1, j as usize))
                .sub(&ws, &hx(j as usize - 1).commutator(&ws, &hx(i as usize - 1)));
            out.push(CheckResult::of_bool(
                format!("hierarchy.expansion.{}{}", i, j),
                got == expect,
                got.sub(&ws, &expect).display(&ws),
            ));
        }
    }
    let beyond = expansion.coefficient(4, 4);
    out.push(CheckResult::of_bool(
        "hierarchy.expansion.window_guard",
        matches!(beyond, Err(Error::TruncationExceeded(_))),
        "window guard missing",
    ));
    Ok(out)
}

/// Scalar EL goldens and the matrix-flow correspondences.
pub fn verify_scalar_el() -> Result<Vec<CheckResult>> {
    let ctx = HierarchyContext::new(3)?;
    let ws = &ctx.ws;
    let (x1, x2, x3) = (ctx.x(1), ctx.x(2), ctx.x(3));
    let q0 = Jet::base(ws, ctx.q);
    let r0 = Jet::base(ws, ctx.r);
    let tower = ctx.tower(3)?;
    let mut out = Vec::new();

    let l12 = ctx.l12();
    let (nls_q, nls_r) = ctx.nls_pair_golden();
    let d12_dr = variational_derivative(ws, &l12, (x1, x2), &r0)?;
    let d12_dq = variational_derivative(ws, &l12, (x1, x2), &q0)?;
    out.push(CheckResult::of_bool("scalar.el.l12.dr", d12_dr == nls_q, d12_dr.sub(ws, &nls_q).display(ws)));
    out.push(CheckResult::of_bool(
        "scalar.el.l12.dq",
        d12_dq == nls_r.neg(),
        d12_dq.add(ws, &nls_r).display(ws),
    ));

    let l31 = ctx.l31();
    let (f3_q, f3_r) = ctx.x3_pair_golden();
    let d31_dr = variational_derivative(ws, &l31, (x3, x1), &r0)?;
    let d31_dq = variational_derivative(ws, &l31, (x3, x1), &q0)?;
    out.push(CheckResult::of_bool(
        "scalar.el.l31.dr",
        d31_dr == f3_q.neg(),
        d31_dr.add(ws, &f3_q).display(ws),
    ));
    out.push(CheckResult::of_bool("scalar.el.l31.dq", d31_dq == f3_r, d31_dq.sub(ws, &f3_r).display(ws)));

    let l23 = ctx.l23();
    let (p1, p2) = ctx.l23_equations_golden();
    let d23_dq = variational_derivative(ws, &l23, (x2, x3), &q0)?;
    let d23_dr = variational_derivative(ws, &l23, (x2, x3), &r0)?;
    out.push(CheckResult::of_bool("scalar.el.l23.dq", d23_dq == p1, d23_dq.sub(ws, &p1).display(ws)));
    out.push(CheckResult::of_bool(
        "scalar.el.l23.dr",
        d23_dr == p2.neg(),
        d23_dr.add(ws, &p2).display(ws),
    ));

    // standard ELs of L12/L31 are the off-diagonal matrix flow entries
    let e2 = ctx.hierarchy_equation(&tower, 2)?;
    let e3 = ctx.hierarchy_equation(&tower, 3)?;
    out.push(CheckResult::of_bool(
        "scalar.el.matrix_flow.l12",
        d12_dr == *e2.get(0, 1) && d12_dq == e2.get(1, 0).neg(),
        "off-diagonal mismatch for the second flow",
    ));
    out.push(CheckResult::of_bool(
        "scalar.el.matrix_flow.l31",
        d31_dr == e3.get(0, 1).neg() && d31_dq == *e3.get(1, 0),
        "off-diagonal mismatch for the third flow",
    ));
    Ok(out)
}

/// The `L_(x2x3)` equations agree with the `(2,3)` matrix flow off-diagonal
/// entries modulo the `x2`/`x3` flow rules, with a numeric backstop.
pub fn verify_l23_flow_equivalence(seed: u64, trials: u32) -> Result<Vec<CheckResult>> {
    let ctx = HierarchyContext::new(3)?;
    let ws = &ctx.ws;
    let (x2, x3) = (ctx.x(2), ctx.x(3));
    let tower = ctx.tower(3)?;
    let rules = ctx.flow_rules(&tower, &[2, 3])?;
    let l23 = ctx.l23();
    let q0 = Jet::base(ws, ctx.q);
    let r0 = Jet::base(ws, ctx.r);
    let d23_dq = variational_derivative(ws, &l23, (x2, x3), &q0)?;
    let d23_dr = variational_derivative(ws, &l23, (x2, x3), &r0)?;
    // F = D_x3 Q2 - D_x2 Q3 - [Q3, Q2]
    let f = tower[2]
        .derivative(ws, x3)
        .sub(ws, &tower[3].derivative(ws, x2))
        .sub(ws, &tower[3].commutator(ws, &tower[2]));
    let mut out = Vec::new();
    for (name, diff) in [
        ("scalar.el.l23_vs_flow.q", d23_dq.add(ws, f.get(1, 0))),
        ("scalar.el.l23_vs_flow.r", d23_dr.sub(ws, f.get(0, 1))),
    ] {
        let red = reduce_lazy(ws, &diff, &rules)?;
        let mut check = CheckResult::of_bool(name, red.is_zero(), red.display(ws));
        if check.ok() {
            // numeric backstop: evaluate the unreduced difference on shell
            let mut max_res = 0.0f64;
            let mut seeds = Vec::new();
            for t in 0..trials {
                let s = numeric::derive_seed(seed, &format!("{}:{}", name, t));
                let asg = NumericAssignment::new(ws, s, 1);
                let (v, mag) = numeric::numeric_eval_on_shell(ws, &diff, &rules, &asg)?;
                max_res = max_res.max(v.max_abs() / mag.max(1.0));
                seeds.push(s);
            }
            if max_res > 1e-9 {
                check = CheckResult::fail(name, format!("on-shell residual {:.3e}", max_res));
            }
            check.seeds = seeds;
        }
        out.push(check);
    }
    Ok(out)
}

/// Closure and criticality of the scalar multiform: `dL` reduces to zero
/// modulo the flows, `delta(dL)` vanishes on shell, every multiform EL
/// equation reduces to zero, and off-shell `dL` is genuinely nonzero.
pub fn verify_scalar_multiform(seed: u64) -> Result<Vec<CheckResult>> {
    verify_scalar_multiform_with(seed, false)
}

/// Fault-injection switch: `corrupt` perturbs one coefficient of the
/// `(x2, x3)` component so the detector's sensitivity can be demonstrated.
pub fn verify_scalar_multiform_with(seed: u64, corrupt: bool) -> Result<Vec<CheckResult>> {
    let ctx = HierarchyContext::new(3)?;
    let ws = &ctx.ws;
    let tower = ctx.tower(3)?;
    let rules = ctx.flow_rules(&tower, &[2, 3])?;
    let mut form = ctx.scalar_multiform()?;
    if corrupt {
        let bad = ctx.l23().add(
            ws,
            &ctx.qj(&[1, 1]).mul(ws, &ctx.rj(&[1, 1])).scale(&ws.imag(1, 977)),
        );
        form.set_component(ws, ctx.x(2), ctx.x(3), bad)?;
    }
    let mut out = Vec::new();

    let dl = form.exterior_derivative(ws);
    let closed = reduce_lazy(ws, &dl, &rules)?;
    out.push(CheckResult::of_bool("scalar.closure", closed.is_zero(), closed.display(ws)));

    let dd = delta_d_check(ws, &form, &rules)?;
    let bad: Vec<String> = dd.entries.iter().filter(|e| !e.vanished).map(|e| e.jet.clone()).collect();
    out.push(CheckResult::of_bool("scalar.delta_d", dd.pass(), format!("nonvanishing at {:?}", bad)));

    let sys = multiform_el_system(ws, &form, None)?;
    let mut all_zero = true;
    let mut residual = String::new();
    for rec in &sys.records {
        let red = reduce_lazy(ws, &rec.equation, &rules)?;
        if !red.is_zero() {
            all_zero = false;
            residual = format!(
                "field {} label {:?} class {}: {}",
                ws.field_name(rec.field),
                rec.label,
                rec.class,
                red.display(ws)
            );
            break;
        }
    }
    out.push(CheckResult::of_bool("scalar.el_system_on_shell", all_zero, residual));

    // off-shell dL does not vanish: random independent jets
    let mut min_res = f64::INFINITY;
    let mut seeds = Vec::new();
    for t in 0..5u64 {
        let s = numeric::derive_seed(seed, &format!("offshell:{}", t));
        let asg = NumericAssignment::new(ws, s, 1);
        let (v, _) = numeric::numeric_eval(ws, &dl, &asg)?;
        min_res = min_res.min(v.max_abs());
        seeds.push(s);
    }
    let mut check = CheckResult::of_bool(
        "scalar.offshell_nonzero",
        min_res > 1e-3,
        format!("off-shell |dL| as small as {:.3e}", min_res),
    );
    check.seeds = seeds;
    out.push(check);

    // specializing q = r maps the reduced normal form (zero) to zero
    let specialized = closed.substitute_field_jets(ws, ctx.r, ctx.q)?;
    out.push(CheckResult::of_bool(
        "scalar.closure_specialized",
        specialized.is_zero(),
        specialized.display(ws),
    ));
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn q_recursion_matches_printed_tower() {
        for check in verify_q_recursion(3).unwrap() {
            assert!(check.ok(), "{}: {}", check.name, check.residual);
        }
    }

    #[test]
    fn hierarchy_equations_match_printed_flows() {
        for check in verify_hierarchy_equations().unwrap() {
            assert!(check.ok(), "{}: {}", check.name, check.residual);
        }
    }

    #[test]
    fn q2_diagonal_integrates_from_offdiagonal_source() {
        // the diagonal of Q2 is the antiderivative of the commutator source
        let ctx = HierarchyContext::new(2).unwrap();
        let ws = &ctx.ws;
        let tower = ctx.tower(2).unwrap();
        let expect = Expr::field(ws, ctx.q)
            .mul(ws, &Expr::field(ws, ctx.r))
            .scale(&ws.imag(-1, 2));
        assert_eq!(*tower[2].get(0, 0), expect);
    }

    #[test]
    fn recursion_consistency_and_cross_route() {
        for check in verify_recursion_consistency(5).unwrap() {
            assert!(check.ok(), "{}: {}", check.name, check.residual);
        }
        for check in verify_cross_route().unwrap() {
            assert!(check.ok(), "{}: {}", check.name, check.residual);
        }
    }

    #[test]
    fn pole_expansion_reproduces_hierarchy_family() {
        for check in verify_pole_expansion().unwrap() {
            assert!(check.ok(), "{}: {}", check.name, check.residual);
        }
    }

    #[test]
    fn pole_expansion_agrees_with_series_multiplication() {
        // independent oracle: assemble the cleared equation as explicit
        // truncated series in 1/a and 1/b, multiply them term by term, and
        // compare every window coefficient (including (2,3)).
        let order = 6usize;
        let mut b = WorkspaceBuilder::new();
        let xi = b.coord("xi").unwrap();
        let eta = b.coord("eta").unwrap();
        let mut tower = Vec::new();
        for k in 0..=order {
            tower.push(b.coord(&format!("x{}", k)).unwrap());
        }
        let a = b.param("a").unwrap();
        let bb = b.param("b").unwrap();
        let mut deps = vec![xi, eta];
        deps.extend(tower.iter().copied());
        let h = b.field("H", Shape::Matrix, &deps).unwrap();
        let ws = b.build();
        let spec = ExpansionSpec { xi, eta, a, b: bb, tower: tower.clone() };
        let gap = ws.param_scalar(a).sub(&ws.param_scalar(bb));
        let commutator =
            Expr::jet(&ws, h, &[(eta, 1)]).commutator(&ws, &Expr::jet(&ws, h, &[(xi, 1)]));
        let cleared = Expr::jet(&ws, h, &[(xi, 1), (eta, 1)]).scale(&gap).sub(&ws, &commutator);
        let expansion = expand_pole_coordinates(&ws, &cleared, &spec).unwrap();

        // series route: S_xi = { i+1 -> H_{x_i} }, S_eta = { j+1 -> H_{x_j} }
        let mut series: std::collections::BTreeMap<(i64, i64), Expr> = std::collections::BTreeMap::new();
        let mut put = |k: (i64, i64), v: Expr, series: &mut std::collections::BTreeMap<(i64, i64), Expr>| {
            let slot = series.entry(k).or_insert_with(Expr::zero);
            *slot = slot.add(&ws, &v);
        };
        for i in 0..=order {
            for j in 0..=order {
                let hxx = if tower[i] == tower[j] {
                    Expr::jet(&ws, h, &[(tower[i], 2)])
                } else {
                    Expr::jet(&ws, h, &[(tower[i], 1), (tower[j], 1)])
                };
                // (a - b) * a^-(i+1) b^-(j+1) H_{x_i x_j}
                put(((i as i64 + 1) - 1, j as i64 + 1), hxx.clone(), &mut series);
                put((i as i64 + 1, (j as i64 + 1) - 1), hxx.neg(), &mut series);
                // - [H_eta, H_xi] term by term: - b^-(j+1) a^-(i+1) [H_{x_j}, H_{x_i}]
                let comm = Expr::jet(&ws, h, &[(tower[j], 1)])
                    .commutator(&ws, &Expr::jet(&ws, h, &[(tower[i], 1)]));
                put((i as i64 + 1, j as i64 + 1), comm.neg(), &mut series);
            }
        }
        for i in 0..=order as i64 {
            for j in 0..=order as i64 {
                if i + j > order as i64 {
                    continue;
                }
                let want = series.get(&(i, j)).cloned().unwrap_or_else(Expr::zero);
                let got = expansion.coefficient(i, j).unwrap();
                assert_eq!(got, want, "coefficient ({}, {}) differs", i, j);
            }
        }
        // the (2,3) instance specifically
        let got23 = expansion.coefficient(2, 3).unwrap();
        assert!(!got23.is_zero());
    }

    #[test]
    fn scalar_el_goldens() {
        for check in verify_scalar_el().unwrap() {
            assert!(check.ok(), "{}: {}", check.name, check.residual);
        }
    }

    #[test]
    fn l23_equations_are_flow_equivalent() {
        for check in verify_l23_flow_equivalence(17, 4).unwrap() {
            assert!(check.ok(), "{}: {}", check.name, check.residual);
        }
    }

    #[test]
    fn scalar_multiform_closes_on_shell() {
        for check in verify_scalar_multiform(23).unwrap() {
            assert!(check.ok(), "{}: {}", check.name, check.residual);
        }
    }
}
