//! Jet calculus on canonical expressions.
//!
//! Implements the total derivative, the trace-gradient partial derivative
//! with the transposition convention for matrix-valued fields, the
//! variational derivative of a 2-form component (integration by parts runs
//! over the component's own coordinate pair only), the exterior derivative
//! of a Lagrangian 2-form on three coordinates, and the generator of the
//! multiform Euler-Lagrange system.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::expr::{index_plus, Atom, Expr, Jet, Word};
use crate::scalar::ParamScalar;
use crate::workspace::{CoordId, FieldId, Shape, Workspace};

// ---------------------------------------------------------------------------
// Derivatives
// ---------------------------------------------------------------------------

/// Total derivative along a coordinate. Leibniz over all factors; jets of
/// fields that do not depend on the coordinate vanish; on an inverse,
/// `D(f^-1) = -f^-1 (Df) f^-1`; parameters are constants.
pub fn total_derivative(ws: &Workspace, e: &Expr, c: CoordId) -> Expr {
    let mut out = Expr::zero_shaped(e.is_matrix());
    for (key, coeff) in e.terms() {
        // scalar factors
        for (jet, &exp) in &key.scalars {
            let dj = Jet { field: jet.field, index: index_plus(&jet.index, c) };
            if dj.vanishes(ws) {
                continue;
            }
            let mut k = key.clone();
            *k.scalars.get_mut(jet).unwrap() -= 1;
            *k.scalars.entry(dj).or_insert(0) += 1;
            out.push_term(ws, k, coeff.mul(&ParamScalar::int(coeff.nvars(), exp as i64)));
        }
        // trace factors
        for (w, &mult) in &key.traces {
            for (pos, replacement, sign) in word_derivative_sites(ws, w, c) {
                let mut w2 = w.clone();
                w2.splice(pos..pos + 1, replacement);
                let mut k = key.clone();
                let m = k.traces.get_mut(w).unwrap();
                *m -= 1;
                if *m == 0 {
                    k.traces.remove(w);
                }
                *k.traces.entry(w2).or_insert(0) += 1;
                let factor = ParamScalar::int(coeff.nvars(), sign * mult as i64);
                out.push_term(ws, k, coeff.mul(&factor));
            }
        }
        // the ordered word
        for (pos, replacement, sign) in word_derivative_sites(ws, &key.word, c) {
            let mut k = key.clone();
            k.word.splice(pos..pos + 1, replacement);
            let factor = ParamScalar::int(coeff.nvars(), sign);
            out.push_term(ws, k, coeff.mul(&factor));
        }
    }
    out
}

/// Derivative expansion of each atom of a word: `(position, replacement
/// atoms, sign)`.
fn word_derivative_sites(ws: &Workspace, w: &Word, c: CoordId) -> Vec<(usize, Vec<Atom>, i64)> {
    let mut sites = Vec::new();
    for (pos, atom) in w.iter().enumerate() {
        match atom {
            Atom::Jet(j) => {
                let dj = Jet { field: j.field, index: index_plus(&j.index, c) };
                if dj.vanishes(ws) {
                    continue;
                }
                sites.push((pos, vec![Atom::Jet(dj)], 1));
            }
            Atom::Inv(f) => {
                if !ws.field(*f).depends_on(c) {
                    continue;
                }
                let mut idx = crate::expr::zero_index(ws);
                idx[c.0 as usize] = 1;
                sites.push((pos, vec![Atom::Inv(*f), Atom::Jet(Jet { field: *f, index: idx }), Atom::Inv(*f)], -1));
            }
        }
    }
    sites
}

/// Partial derivative of a scalar-shaped expression with respect to a jet.
///
/// For a scalar field this is the ordinary partial derivative. For a
/// matrix field the trace-gradient convention applies: for each trace
/// monomial and each occurrence of the jet, rotate the word so the jet is
/// last and delete it; occurrences inside an inverse contribute
/// `-f^-1 W f^-1` with `W` the rotated remainder.
pub fn partial_jet(ws: &Workspace, e: &Expr, v: &Jet) -> Result<Expr> {
    if e.is_matrix() && !e.is_zero() {
        return Err(Error::ShapeMismatch("partial_jet expects a scalar-shaped expression".into()));
    }
    let nvars = ws.nparams();
    let mut out = Expr::zero();
    match ws.field(v.field).shape {
        Shape::Scalar => {
            for (key, coeff) in e.terms() {
                if let Some(&exp) = key.scalars.get(v) {
                    let mut k = key.clone();
                    *k.scalars.get_mut(v).unwrap() -= 1;
                    out.push_term(ws, k, coeff.mul(&ParamScalar::int(nvars, exp as i64)));
                }
            }
            Ok(out)
        }
        Shape::Matrix => {
            let mut out = Expr::zero_shaped(true);
            for (key, coeff) in e.terms() {
                for (w, &mult) in &key.traces {
                    for (pos, atom) in w.iter().enumerate() {
                        let rotated: Word = w[pos + 1..].iter().chain(w[..pos].iter()).cloned().collect();
                        let (grad, sign): (Word, i64) = match atom {
                            Atom::Jet(j) if j == v => (rotated, 1),
                            Atom::Inv(f) if *f == v.field && v.order() == 0 => {
                                let mut g = Vec::with_capacity(rotated.len() + 2);
                                g.push(Atom::Inv(*f));
                                g.extend(rotated);
                                g.push(Atom::Inv(*f));
                                (g, -1)
                            }
                            _ => continue,
                        };
                        let mut k = key.clone();
                        let m = k.traces.get_mut(w).unwrap();
                        *m -= 1;
                        if *m == 0 {
                            k.traces.remove(w);
                        }
                        k.word = grad;
                        let factor = ParamScalar::int(nvars, sign * mult as i64);
                        out.push_term(ws, k, coeff.mul(&factor));
                    }
                }
            }
            Ok(out)
        }
    }
}

/// Variational derivative of a 2-form component with respect to a jet:
/// the finite alternating sum of `D_i^alpha D_j^beta` of partial
/// derivatives, over the component's coordinate pair only.
pub fn variational_derivative(ws: &Workspace, lag: &Expr, pair: (CoordId, CoordId), v: &Jet) -> Result<Expr> {
    let (ci, cj) = pair;
    let amax = lag.max_order_in(ws, v.field, ci);
    let bmax = lag.max_order_in(ws, v.field, cj);
    let mut acc = Expr::zero();
    for alpha in 0..=amax {
        for beta in 0..=bmax {
            let mut idx = v.index.clone();
            idx[ci.0 as usize] += alpha;
            idx[cj.0 as usize] += beta;
            let jet = Jet { field: v.field, index: idx };
            if jet.vanishes(ws) {
                continue;
            }
            let mut term = partial_jet(ws, lag, &jet)?;
            if term.is_zero() {
                continue;
            }
            for _ in 0..alpha {
                term = total_derivative(ws, &term, ci);
            }
            for _ in 0..beta {
                term = total_derivative(ws, &term, cj);
            }
            if (alpha + beta) % 2 == 1 {
                term = term.neg();
            }
            acc = acc.add(ws, &term);
        }
    }
    Ok(acc)
}

// ---------------------------------------------------------------------------
// Lagrangian 2-forms
// ---------------------------------------------------------------------------

/// A Lagrangian 2-form on three coordinates. Components are stored once for
/// ordered pairs `(i, j)` with `i < j` in workspace coordinate order;
/// orientation is handled by sign: `L_(ji) = -L_(ij)`.
#[derive(Clone, Debug)]
pub struct Lagrangian2Form {
    coords: [CoordId; 3],
    comps: BTreeMap<(CoordId, CoordId), Expr>,
}

impl Lagrangian2Form {
    pub fn new(coords: [CoordId; 3]) -> Result<Self> {
        if !(coords[0] < coords[1] && coords[1] < coords[2]) {
            return Err(Error::Invalid("2-form coordinates must be distinct and ascending".into()));
        }
        Ok(Lagrangian2Form { coords, comps: BTreeMap::new() })
    }

    pub fn coords(&self) -> [CoordId; 3] {
        self.coords
    }

    /// Set the component for the oriented pair `(i, j)` (not necessarily
    /// ascending; descending pairs are stored negated).
    pub fn set_component(&mut self, ws: &Workspace, i: CoordId, j: CoordId, lag: Expr) -> Result<()> {
        if i == j || !self.coords.contains(&i) || !self.coords.contains(&j) {
            return Err(Error::Invalid("component pair must be two distinct coordinates of the form".into()));
        }
        if lag.is_matrix() && !lag.is_zero() {
            return Err(Error::ShapeMismatch("2-form components must be scalar-shaped".into()));
        }
        let _ = ws;
        if i < j {
            self.comps.insert((i, j), lag);
        } else {
            self.comps.insert((j, i), lag.neg());
        }
        Ok(())
    }

    /// The component for the oriented pair `(i, j)`, with orientation sign.
    pub fn component(&self, i: CoordId, j: CoordId) -> Expr {
        if i < j {
            self.comps.get(&(i, j)).cloned().unwrap_or_else(Expr::zero)
        } else {
            self.comps.get(&(j, i)).map(|e| e.neg()).unwrap_or_else(Expr::zero)
        }
    }

    /// Maximum jet order over the stored components.
    pub fn jet_order(&self, ws: &Workspace) -> u32 {
        self.comps.values().map(|e| e.max_jet_order(ws)).max().unwrap_or(0)
    }

    /// All fields occurring in the components.
    pub fn fields(&self, ws: &Workspace) -> Vec<FieldId> {
        let mut seen = std::collections::BTreeSet::new();
        for e in self.comps.values() {
            for j in e.collect_jets(ws) {
                seen.insert(j.field);
            }
        }
        seen.into_iter().collect()
    }

    /// The coefficient of the volume 3-form in `dL`, with the cyclic sign
    /// convention `D_3 L_(12) + D_1 L_(23) + D_2 L_(31)`.
    pub fn exterior_derivative(&self, ws: &Workspace) -> Expr {
        let [c1, c2, c3] = self.coords;
        let t1 = total_derivative(ws, &self.component(c1, c2), c3);
        let t2 = total_derivative(ws, &self.component(c2, c3), c1);
        let t3 = total_derivative(ws, &self.component(c3, c1), c2);
        t1.add(ws, &t2).add(ws, &t3)
    }
}

// ---------------------------------------------------------------------------
// Multiform Euler-Lagrange system
// ---------------------------------------------------------------------------

/// Classification of a multiform EL equation by its jet label.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum ElClass {
    /// One surviving term, undifferentiated variation: the standard EL
    /// equation of a single component.
    Standard,
    /// One surviving term, a first derivative in the complementary
    /// coordinate of one component.
    FirstJetOneComponent,
    /// Two surviving terms pairing first jets of two components.
    FirstJetTwoComponent,
    /// Everything of higher jet order.
    HigherJet,
}

impl std::fmt::Display for ElClass {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            ElClass::Standard => "standard",
            ElClass::FirstJetOneComponent => "first-jet-one-component",
            ElClass::FirstJetTwoComponent => "first-jet-two-component",
            ElClass::HigherJet => "higher-jet",
        };
        f.write_str(s)
    }
}

pub fn classify_label(l: u8, m: u8, n: u8) -> ElClass {
    let sum = l as u32 + m as u32 + n as u32;
    let nonzero = [l, m, n].iter().filter(|&&x| x > 0).count();
    if sum == 1 {
        ElClass::Standard
    } else if nonzero == 1 && sum == 2 {
        ElClass::FirstJetOneComponent
    } else if nonzero == 2 && l.max(m).max(n) == 1 {
        ElClass::FirstJetTwoComponent
    } else {
        ElClass::HigherJet
    }
}

#[derive(Clone, Debug)]
pub struct ElRecord {
    pub field: FieldId,
    pub label: (u8, u8, u8),
    pub class: ElClass,
    pub equation: Expr,
}

/// The generated system: nonzero equations, plus the labels whose equations
/// canonicalized to zero (dropped but counted).
#[derive(Clone, Debug, Default)]
pub struct ElSystem {
    pub records: Vec<ElRecord>,
    pub trivial: Vec<(FieldId, (u8, u8, u8), ElClass)>,
}

impl ElSystem {
    pub fn trivial_count(&self, class: ElClass) -> usize {
        self.trivial.iter().filter(|(_, _, c)| *c == class).count()
    }

    pub fn records_in(&self, class: ElClass) -> impl Iterator<Item = &ElRecord> {
        self.records.iter().filter(move |r| r.class == class)
    }
}

/// Generate the multiform EL equations
/// `dL_(12)/d phi_(l,m,n-1) + dL_(23)/d phi_(l-1,m,n) + dL_(31)/d phi_(l,m-1,n) = 0`
/// for all fields of the form and all labels with `1 <= l+m+n <= max_order`.
pub fn multiform_el_system(ws: &Workspace, form: &Lagrangian2Form, max_order: Option<u32>) -> Result<ElSystem> {
    let [c1, c2, c3] = form.coords();
    let max_order = max_order.unwrap_or_else(|| form.jet_order(ws) + 1);
    let l12 = form.component(c1, c2);
    let l23 = form.component(c2, c3);
    let l31 = form.component(c3, c1);
    let mut sys = ElSystem::default();
    for field in form.fields(ws) {
        for total in 1..=max_order {
            for l in 0..=total {
                for m in 0..=(total - l) {
                    let n = total - l - m;
                    let (l, m, n) = (l as u8, m as u8, n as u8);
                    let mut eq = Expr::zero();
                    for (lag, pair, shift) in [
                        (&l12, (c1, c2), (l as i16, m as i16, n as i16 - 1)),
                        (&l23, (c2, c3), (l as i16 - 1, m as i16, n as i16)),
                        (&l31, (c3, c1), (l as i16, m as i16 - 1, n as i16)),
                    ] {
                        let (sl, sm, sn) = shift;
                        if sl < 0 || sm < 0 || sn < 0 || lag.is_zero() {
                            continue;
                        }
                        let mut idx = crate::expr::zero_index(ws);
                        idx[c1.0 as usize] = sl as u8;
                        idx[c2.0 as usize] = sm as u8;
                        idx[c3.0 as usize] = sn as u8;
                        let jet = Jet { field, index: idx };
                        if jet.vanishes(ws) {
                            continue;
                        }
                        let term = variational_derivative(ws, lag, pair, &jet)?;
                        eq = eq.add(ws, &term);
                    }
                    let class = classify_label(l, m, n);
                    if eq.is_zero() {
                        sys.trivial.push((field, (l, m, n), class));
                    } else {
                        sys.records.push(ElRecord { field, label: (l, m, n), class, equation: eq });
                    }
                }
            }
        }
    }
    Ok(sys)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::MultiIndex;
    use crate::workspace::WorkspaceBuilder;

    fn setup() -> (Workspace, CoordId, CoordId, CoordId) {
        let mut b = WorkspaceBuilder::new();
        let xi = b.coord("xi").unwrap();
        let eta = b.coord("eta").unwrap();
        let nu = b.coord("nu").unwrap();
        b.param("a").unwrap();
        b.param("b").unwrap();
        b.field("phi", Shape::Matrix, &[xi, eta, nu]).unwrap();
        b.field("psi", Shape::Matrix, &[xi, eta, nu]).unwrap();
        b.field("ubar", Shape::Matrix, &[xi]).unwrap();
        (b.build(), xi, eta, nu)
    }

    #[test]
    fn leibniz_with_inverse_rule() {
        // D_eta(phi^-1 phi_eta) = -phi^-1 phi_eta phi^-1 phi_eta + phi^-1 phi_etaeta
        let (ws, _xi, eta, _nu) = setup();
        let phi = ws.lookup_field("phi").unwrap();
        let e = Expr::inv(&ws, phi).mul(&ws, &Expr::jet(&ws, phi, &[(eta, 1)]));
        let d = total_derivative(&ws, &e, eta);
        let term1 = Expr::inv(&ws, phi)
            .mul(&ws, &Expr::jet(&ws, phi, &[(eta, 1)]))
            .mul(&ws, &Expr::inv(&ws, phi))
            .mul(&ws, &Expr::jet(&ws, phi, &[(eta, 1)]))
            .neg();
        let term2 = Expr::inv(&ws, phi).mul(&ws, &Expr::jet(&ws, phi, &[(eta, 2)]));
        assert_eq!(d, term1.add(&ws, &term2));
    }

    #[test]
    fn dependency_rule_kills_derivative() {
        let (ws, _xi, _eta, nu) = setup();
        let ubar = ws.lookup_field("ubar").unwrap();
        let d = total_derivative(&ws, &Expr::field(&ws, ubar), nu);
        assert!(d.is_zero());
    }

    #[test]
    fn parameters_are_constants() {
        let (ws, xi, ..) = setup();
        let a = ws.lookup_param("a").unwrap();
        let b = ws.lookup_param("b").unwrap();
        let c = ws.int(1).div(&ws.param_scalar(a).sub(&ws.param_scalar(b)));
        let e = Expr::scalar(c);
        assert!(total_derivative(&ws, &e, xi).is_zero());
    }

    #[test]
    fn cyclic_gradient() {
        // d tr(A X B)/dX = B A
        let (ws, ..) = setup();
        let a = ws.lookup_field("phi").unwrap();
        let x = ws.lookup_field("psi").unwrap();
        let bb = ws.lookup_field("ubar").unwrap();
        let l = Expr::field(&ws, a)
            .mul(&ws, &Expr::field(&ws, x))
            .mul(&ws, &Expr::field(&ws, bb))
            .trace(&ws)
            .unwrap();
        let g = partial_jet(&ws, &l, &Jet::base(&ws, x)).unwrap();
        let expect = Expr::field(&ws, bb).mul(&ws, &Expr::field(&ws, a));
        assert_eq!(g, expect);
    }

    #[test]
    fn inverse_gradient() {
        // d tr(A X^-1 B)/dX = -X^-1 B A X^-1
        let (ws, ..) = setup();
        let a = ws.lookup_field("phi").unwrap();
        let x = ws.lookup_field("psi").unwrap();
        let bb = ws.lookup_field("ubar").unwrap();
        let l = Expr::field(&ws, a)
            .mul(&ws, &Expr::inv(&ws, x))
            .mul(&ws, &Expr::field(&ws, bb))
            .trace(&ws)
            .unwrap();
        let g = partial_jet(&ws, &l, &Jet::base(&ws, x)).unwrap();
        let expect = Expr::inv(&ws, x)
            .mul(&ws, &Expr::field(&ws, bb))
            .mul(&ws, &Expr::field(&ws, a))
            .mul(&ws, &Expr::inv(&ws, x))
            .neg();
        assert_eq!(g, expect);
    }

    #[test]
    fn gradient_of_ubar_cross_term() {
        // d/d ubar of tr(phi^-1 phi_eta ubar) = phi^-1 phi_eta
        let (ws, _xi, eta, _nu) = setup();
        let phi = ws.lookup_field("phi").unwrap();
        let ubar = ws.lookup_field("ubar").unwrap();
        let l = Expr::inv(&ws, phi)
            .mul(&ws, &Expr::jet(&ws, phi, &[(eta, 1)]))
            .mul(&ws, &Expr::field(&ws, ubar))
            .trace(&ws)
            .unwrap();
        let g = partial_jet(&ws, &l, &Jet::base(&ws, ubar)).unwrap();
        assert_eq!(g, Expr::inv(&ws, phi).mul(&ws, &Expr::jet(&ws, phi, &[(eta, 1)])));
    }

    #[test]
    fn gradient_of_a_matrix_shaped_expression_is_rejected() {
        let (ws, ..) = setup();
        let phi = ws.lookup_field("phi").unwrap();
        let word = Expr::field(&ws, phi);
        match partial_jet(&ws, &word, &Jet::base(&ws, phi)) {
            Err(crate::error::Error::ShapeMismatch(_)) => {}
            other => panic!("expected ShapeMismatch, got {:?}", other),
        }
    }

    #[test]
    fn variational_derivative_of_absent_field_is_zero() {
        let (ws, xi, eta, _nu) = setup();
        let phi = ws.lookup_field("phi").unwrap();
        let psi = ws.lookup_field("psi").unwrap();
        let l = Expr::field(&ws, phi).mul(&ws, &Expr::jet(&ws, phi, &[(xi, 1)])).trace(&ws).unwrap();
        let v = variational_derivative(&ws, &l, (xi, eta), &Jet::base(&ws, psi)).unwrap();
        assert!(v.is_zero());
    }

    #[test]
    fn exterior_derivative_respects_dependencies() {
        // F = (f dxi^deta, 0, 0) with f = tr(ubar) depending on xi only:
        // dF = D_nu tr(ubar) = 0.
        let (ws, xi, eta, nu) = setup();
        let ubar = ws.lookup_field("ubar").unwrap();
        let mut f = Lagrangian2Form::new([xi, eta, nu]).unwrap();
        f.set_component(&ws, xi, eta, Expr::field(&ws, ubar).trace(&ws).unwrap()).unwrap();
        assert!(f.exterior_derivative(&ws).is_zero());
    }

    #[test]
    fn el_labels_classify_like_first_order_taxonomy() {
        assert_eq!(classify_label(0, 0, 1), ElClass::Standard);
        assert_eq!(classify_label(0, 0, 2), ElClass::FirstJetOneComponent);
        assert_eq!(classify_label(1, 0, 1), ElClass::FirstJetTwoComponent);
        assert_eq!(classify_label(1, 1, 0), ElClass::FirstJetTwoComponent);
        assert_eq!(classify_label(2, 1, 0), ElClass::HigherJet);
        assert_eq!(classify_label(0, 0, 3), ElClass::HigherJet);
    }

    #[test]
    fn standard_el_label_recovers_single_component_equation() {
        let (ws, xi, eta, nu) = setup();
        let phi = ws.lookup_field("phi").unwrap();
        // L_(xi,eta) = tr(phi_xi phi_eta)
        let l = Expr::jet(&ws, phi, &[(xi, 1)])
            .mul(&ws, &Expr::jet(&ws, phi, &[(eta, 1)]))
            .trace(&ws)
            .unwrap();
        let mut f = Lagrangian2Form::new([xi, eta, nu]).unwrap();
        f.set_component(&ws, xi, eta, l.clone()).unwrap();
        let sys = multiform_el_system(&ws, &f, Some(2)).unwrap();
        let std_eq: Vec<_> = sys
            .records
            .iter()
            .filter(|r| r.label == (0, 0, 1) && r.field == phi)
            .collect();
        assert_eq!(std_eq.len(), 1);
        let expect = variational_derivative(&ws, &l, (xi, eta), &Jet::base(&ws, phi)).unwrap();
        assert_eq!(std_eq[0].equation, expect);
        let _: MultiIndex = crate::expr::zero_index(&ws);
    }
}
