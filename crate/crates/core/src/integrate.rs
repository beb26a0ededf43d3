//! Formal integration of differential polynomials.
//!
//! `formal_integrate` finds `F` with `D_c F = p` (zero constant term) by
//! solving a linear system over a finite basis of candidate antiderivative
//! monomials: the candidates are obtained by decrementing one `c`-derivative
//! in a monomial of `p`, closed up under differentiation and decrementing so
//! that cancellations inside `D_c F` are covered. The two-coordinate variant
//! decides whether an expression is a total divergence `D_1 A + D_2 B`.

use std::collections::{BTreeMap, BTreeSet};

use crate::calculus::total_derivative;
use crate::error::{Error, Result};
use crate::expr::{Atom, Expr, Jet, MonoKey};
use crate::scalar::ParamScalar;
use crate::workspace::{CoordId, Workspace};

fn contains_inverse(key: &MonoKey) -> bool {
    key.traces.keys().chain(std::iter::once(&key.word)).any(|w| w.iter().any(|a| matches!(a, Atom::Inv(_))))
}

/// Canonicalize a raw key (trace rotation, etc.); the coefficient factor it
/// may produce (from `tr(I) = N`) is returned alongside.
fn canonical_key(ws: &Workspace, key: MonoKey, matrix: bool) -> (MonoKey, ParamScalar) {
    let mut e = Expr::zero_shaped(matrix);
    e.push_term(ws, key, ParamScalar::one(ws.nparams()));
    let out = match e.terms().next() {
        Some((k, c)) => (k.clone(), c.clone()),
        None => (MonoKey::default(), ParamScalar::one(ws.nparams())),
    };
    out
}

/// All keys obtained by lowering one `c`-derivative somewhere in `key`.
fn decrements(ws: &Workspace, key: &MonoKey, c: CoordId) -> Vec<MonoKey> {
    let ci = c.0 as usize;
    let mut out = Vec::new();
    for jet in key.scalars.keys() {
        if jet.index[ci] == 0 {
            continue;
        }
        let mut idx = jet.index.clone();
        idx[ci] -= 1;
        let dec = Jet { field: jet.field, index: idx };
        let mut k2 = key.clone();
        let e = k2.scalars.get_mut(jet).unwrap();
        *e -= 1;
        if *e == 0 {
            k2.scalars.remove(jet);
        }
        *k2.scalars.entry(dec).or_insert(0) += 1;
        out.push(canonical_key(ws, k2, false).0);
    }
    for w in key.traces.keys() {
        for (pos, atom) in w.iter().enumerate() {
            let j = match atom {
                Atom::Jet(j) if j.index[ci] >= 1 => j,
                _ => continue,
            };
            let mut idx = j.index.clone();
            idx[ci] -= 1;
            let mut w2 = w.clone();
            w2[pos] = Atom::Jet(Jet { field: j.field, index: idx });
            let mut k2 = key.clone();
            let m = k2.traces.get_mut(w).unwrap();
            *m -= 1;
            if *m == 0 {
                k2.traces.remove(w);
            }
            *k2.traces.entry(w2).or_insert(0) += 1;
            out.push(canonical_key(ws, k2, false).0);
        }
    }
    out
}

fn single_term(ws: &Workspace, key: &MonoKey) -> Expr {
    let mut e = Expr::zero_shaped(false);
    e.push_term(ws, key.clone(), ParamScalar::one(ws.nparams()));
    e
}

/// Exact Gaussian elimination; returns one solution (free unknowns zero) or
/// the inconsistent residual rows.
fn solve_exact(
    nvars: usize,
    rows: Vec<(Vec<ParamScalar>, ParamScalar)>,
    ncols: usize,
) -> std::result::Result<Vec<ParamScalar>, Vec<usize>> {
    let mut rows: Vec<(Vec<ParamScalar>, ParamScalar)> = rows;
    let mut pivot_of_col: Vec<Option<usize>> = vec![None; ncols];
    let mut used_rows: Vec<usize> = Vec::new();
    for col in 0..ncols {
        let mut pivot = None;
        for (ri, (r, _)) in rows.iter().enumerate() {
            if used_rows.contains(&ri) {
                continue;
            }
            if !r[col].is_zero() {
                pivot = Some(ri);
                break;
            }
        }
        let Some(pr) = pivot else { continue };
        used_rows.push(pr);
        pivot_of_col[col] = Some(pr);
        let inv = rows[pr].0[col].inv();
        for v in rows[pr].0.iter_mut() {
            *v = v.mul(&inv);
        }
        rows[pr].1 = rows[pr].1.mul(&inv);
        let pivot_row = rows[pr].clone();
        for (ri, row) in rows.iter_mut().enumerate() {
            if ri == pr || row.0[col].is_zero() {
                continue;
            }
            let f = row.0[col].clone();
            for (v, pv) in row.0.iter_mut().zip(pivot_row.0.iter()) {
                *v = v.sub(&f.mul(pv));
            }
            row.1 = row.1.sub(&f.mul(&pivot_row.1));
        }
    }
    let mut bad = Vec::new();
    for (ri, (r, b)) in rows.iter().enumerate() {
        if r.iter().all(|v| v.is_zero()) && !b.is_zero() {
            bad.push(ri);
        }
    }
    if !bad.is_empty() {
        return Err(bad);
    }
    let mut x = vec![ParamScalar::zero(nvars); ncols];
    for (col, p) in pivot_of_col.iter().enumerate() {
        if let Some(pr) = p {
            x[col] = rows[*pr].1.clone();
        }
    }
    Ok(x)
}

fn build_candidates(ws: &Workspace, p: &Expr, coords: &[CoordId]) -> Result<Vec<(MonoKey, CoordId)>> {
    let mut cands: BTreeSet<(MonoKey, CoordId)> = BTreeSet::new();
    let mut frontier: Vec<(MonoKey, CoordId)> = Vec::new();
    for (key, _) in p.terms() {
        if contains_inverse(key) {
            return Err(Error::Invalid("formal integration does not support inverse atoms".into()));
        }
        for &c in coords {
            for k in decrements(ws, key, c) {
                if cands.insert((k.clone(), c)) {
                    frontier.push((k, c));
                }
            }
        }
    }
    let mut rounds = 0;
    while !frontier.is_empty() {
        rounds += 1;
        if rounds > 64 || cands.len() > 2000 {
            return Err(Error::Invalid("candidate basis for formal integration grew too large".into()));
        }
        let mut next = Vec::new();
        for (key, c) in frontier.drain(..) {
            let d = total_derivative(ws, &single_term(ws, &key), c);
            for (dk, _) in d.terms() {
                for &c2 in coords {
                    for k2 in decrements(ws, dk, c2) {
                        if cands.insert((k2.clone(), c2)) {
                            next.push((k2, c2));
                        }
                    }
                }
            }
        }
        frontier = next;
    }
    Ok(cands.into_iter().collect())
}

fn integrate_over(ws: &Workspace, p: &Expr, coords: &[CoordId]) -> Result<Vec<Expr>> {
    if p.is_matrix() && !p.is_zero() {
        return Err(Error::ShapeMismatch("formal integration expects scalar-shaped expressions".into()));
    }
    if p.is_zero() {
        return Ok(coords.iter().map(|_| Expr::zero()).collect());
    }
    let nvars = ws.nparams();
    let cands = build_candidates(ws, p, coords)?;
    // rows: all monomials from p and from derivatives of candidates
    let mut row_of: BTreeMap<MonoKey, usize> = BTreeMap::new();
    let mut row_keys: Vec<MonoKey> = Vec::new();
    let touch = |k: &MonoKey, row_of: &mut BTreeMap<MonoKey, usize>, row_keys: &mut Vec<MonoKey>| -> usize {
        if let Some(&i) = row_of.get(k) {
            return i;
        }
        let i = row_keys.len();
        row_of.insert(k.clone(), i);
        row_keys.push(k.clone());
        i
    };
    let mut cols: Vec<BTreeMap<usize, ParamScalar>> = Vec::with_capacity(cands.len());
    for (key, c) in &cands {
        let d = total_derivative(ws, &single_term(ws, key), *c);
        let mut col = BTreeMap::new();
        for (dk, dc) in d.terms() {
            let r = touch(dk, &mut row_of, &mut row_keys);
            col.insert(r, dc.clone());
        }
        cols.push(col);
    }
    let mut rhs: BTreeMap<usize, ParamScalar> = BTreeMap::new();
    for (k, c) in p.terms() {
        let r = touch(k, &mut row_of, &mut row_keys);
        rhs.insert(r, c.clone());
    }
    let nrows = row_keys.len();
    let ncols = cands.len();
    let mut rows: Vec<(Vec<ParamScalar>, ParamScalar)> =
        (0..nrows).map(|_| (vec![ParamScalar::zero(nvars); ncols], ParamScalar::zero(nvars))).collect();
    for (j, col) in cols.iter().enumerate() {
        for (&r, v) in col {
            rows[r].0[j] = v.clone();
        }
    }
    for (&r, v) in &rhs {
        rows[r].1 = v.clone();
    }
    match solve_exact(nvars, rows, ncols) {
        Ok(x) => {
            let mut parts: Vec<Expr> = coords.iter().map(|_| Expr::zero()).collect();
            for ((key, c), coeff) in cands.iter().zip(x.into_iter()) {
                if coeff.is_zero() {
                    continue;
                }
                let slot = coords.iter().position(|cc| cc == c).unwrap();
                let mut term = Expr::zero_shaped(false);
                term.push_term(ws, key.clone(), coeff);
                parts[slot] = parts[slot].add(ws, &term);
            }
            Ok(parts)
        }
        Err(bad_rows) => {
            let mut residual = Expr::zero_shaped(false);
            for r in bad_rows {
                if let Some(c) = rhs.get(&r) {
                    residual.push_term(ws, row_keys[r].clone(), c.clone());
                }
            }
            Err(Error::NotTotalDerivative { residual: residual.display(ws) })
        }
    }
}

/// Find `F` with `D_c F = p` and zero constant term; errors with the
/// unmatched residual when `p` is not a total derivative.
pub fn formal_integrate(ws: &Workspace, p: &Expr, c: CoordId) -> Result<Expr> {
    Ok(integrate_over(ws, p, &[c])?.remove(0))
}

/// Decompose `p = D_1 A + D_2 B`; errors when `p` is not a total divergence.
pub fn formal_integrate_pair(ws: &Workspace, p: &Expr, c1: CoordId, c2: CoordId) -> Result<(Expr, Expr)> {
    let mut parts = integrate_over(ws, p, &[c1, c2])?;
    let b = parts.remove(1);
    let a = parts.remove(0);
    Ok((a, b))
}

/// True when `p` is a total `D_1`/`D_2`-divergence.
pub fn is_total_divergence(ws: &Workspace, p: &Expr, c1: CoordId, c2: CoordId) -> bool {
    formal_integrate_pair(ws, p, c1, c2).is_ok()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::workspace::{Shape, WorkspaceBuilder};

    fn setup() -> (Workspace, CoordId) {
        let mut b = WorkspaceBuilder::new();
        let x1 = b.coord("x1").unwrap();
        b.coord("x2").unwrap();
        b.field("q", Shape::Scalar, &[x1]).unwrap();
        b.field("r", Shape::Scalar, &[x1]).unwrap();
        (b.build(), x1)
    }

    #[test]
    fn integrates_product_rule_back() {
        // q_x1 r + q r_x1 -> qr
        let (ws, x1) = setup();
        let q = ws.lookup_field("q").unwrap();
        let r = ws.lookup_field("r").unwrap();
        let p = Expr::jet(&ws, q, &[(x1, 1)])
            .mul(&ws, &Expr::field(&ws, r))
            .add(&ws, &Expr::field(&ws, q).mul(&ws, &Expr::jet(&ws, r, &[(x1, 1)])));
        let f = formal_integrate(&ws, &p, x1).unwrap();
        let expect = Expr::field(&ws, q).mul(&ws, &Expr::field(&ws, r));
        assert_eq!(f, expect);
        assert_eq!(total_derivative(&ws, &f, x1), p);
    }

    #[test]
    fn rejects_non_exact_integrand() {
        // q_x1 r - q r_x1 is not a total x1-derivative
        let (ws, x1) = setup();
        let q = ws.lookup_field("q").unwrap();
        let r = ws.lookup_field("r").unwrap();
        let p = Expr::jet(&ws, q, &[(x1, 1)])
            .mul(&ws, &Expr::field(&ws, r))
            .sub(&ws, &Expr::field(&ws, q).mul(&ws, &Expr::jet(&ws, r, &[(x1, 1)])));
        match formal_integrate(&ws, &p, x1) {
            Err(Error::NotTotalDerivative { .. }) => {}
            other => panic!("expected NotTotalDerivative, got {:?}", other),
        }
    }

    #[test]
    fn integration_needs_cancellation_aware_basis() {
        // p = d/dx1 (q r_x1 - r q_x1) = q r_x1x1 - r q_x1x1; the naive
        // decrement seeds still span the solution.
        let (ws, x1) = setup();
        let q = ws.lookup_field("q").unwrap();
        let r = ws.lookup_field("r").unwrap();
        let p = Expr::field(&ws, q)
            .mul(&ws, &Expr::jet(&ws, r, &[(x1, 2)]))
            .sub(&ws, &Expr::field(&ws, r).mul(&ws, &Expr::jet(&ws, q, &[(x1, 2)])));
        let f = formal_integrate(&ws, &p, x1).unwrap();
        assert_eq!(total_derivative(&ws, &f, x1), p);
    }

    #[test]
    fn zero_integrates_to_zero() {
        let (ws, x1) = setup();
        let f = formal_integrate(&ws, &Expr::zero(), x1).unwrap();
        assert!(f.is_zero());
    }
}
