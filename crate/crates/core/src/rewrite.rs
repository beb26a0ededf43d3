//! Oriented rewriting modulo equations of motion.
//!
//! A rule replaces one jet coordinate by an expression; the rule set is
//! closed under total-derivative prolongation so that every derivative of an
//! eliminable jet is covered. Reduction substitutes innermost occurrences
//! until fixpoint; it terminates because every substitution strictly lowers
//! the number of eliminable-jet occurrences of maximal order, and a step
//! budget guards against miswritten rule sets.

use std::collections::{HashMap, VecDeque};

use crate::calculus::{partial_jet, total_derivative, Lagrangian2Form};
use crate::error::{Error, Result};
use crate::expr::{index_plus, Atom, Expr, Jet, Word};
use crate::workspace::{CoordId, Shape, Workspace};

#[derive(Clone, Debug)]
pub struct Rule {
    pub lhs: Jet,
    pub rhs: Expr,
    /// The coordinate whose derivatives of the left-hand-side field this
    /// rule is oriented to eliminate.
    pub eliminates: CoordId,
}

#[derive(Clone, Debug, Default)]
pub struct RuleSet {
    rules: Vec<Rule>,
    by_lhs: HashMap<Jet, usize>,
}

impl RuleSet {
    pub fn new() -> Self {
        RuleSet::default()
    }

    pub fn len(&self) -> usize {
        self.rules.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rules.is_empty()
    }

    pub fn rules(&self) -> &[Rule] {
        &self.rules
    }

    pub fn get(&self, jet: &Jet) -> Option<&Rule> {
        self.by_lhs.get(jet).map(|&i| &self.rules[i])
    }

    pub fn add(&mut self, ws: &Workspace, lhs: Jet, rhs: Expr, eliminates: CoordId) -> Result<()> {
        if lhs.order() == 0 {
            return Err(Error::Invalid(format!(
                "rule left-hand side `{}` must be a differentiated jet",
                lhs.display(ws)
            )));
        }
        if lhs.vanishes(ws) {
            return Err(Error::Invalid(format!(
                "rule left-hand side `{}` is identically zero",
                lhs.display(ws)
            )));
        }
        if lhs.index[eliminates.0 as usize] == 0 {
            return Err(Error::Invalid(format!(
                "rule for `{}` does not involve the coordinate it eliminates",
                lhs.display(ws)
            )));
        }
        let lhs_matrix = matches!(ws.field(lhs.field).shape, Shape::Matrix);
        if !rhs.is_zero() && rhs.is_matrix() != lhs_matrix {
            return Err(Error::ShapeMismatch(format!("rule for `{}` has mismatched shapes", lhs.display(ws))));
        }
        if self.by_lhs.contains_key(&lhs) {
            return Err(Error::DuplicateRule(lhs.display(ws)));
        }
        if rhs.collect_jets(ws).contains(&lhs) {
            return Err(Error::SelfReferentialRule(lhs.display(ws)));
        }
        self.by_lhs.insert(lhs.clone(), self.rules.len());
        self.rules.push(Rule { lhs, rhs, eliminates });
        Ok(())
    }

    fn insert_raw(&mut self, rule: Rule) -> bool {
        if self.by_lhs.contains_key(&rule.lhs) {
            return false;
        }
        self.by_lhs.insert(rule.lhs.clone(), self.rules.len());
        self.rules.push(rule);
        true
    }

    /// Extend with the consequences `D_c^m(lhs) -> D_c^m(rhs)` for `m <= k`.
    /// Prolonging twice by one order equals prolonging once to order two;
    /// existing left-hand sides are kept as they are.
    pub fn prolong(&self, ws: &Workspace, c: CoordId, k: u32) -> RuleSet {
        let mut out = self.clone();
        for _ in 0..k {
            let snapshot: Vec<Rule> = out.rules.clone();
            for rule in snapshot {
                let lhs = Jet { field: rule.lhs.field, index: index_plus(&rule.lhs.index, c) };
                if lhs.vanishes(ws) {
                    continue;
                }
                let rhs = total_derivative(ws, &rule.rhs, c);
                out.insert_raw(Rule { lhs, rhs, eliminates: rule.eliminates });
            }
        }
        out
    }

    /// Close under prolongation by the given coordinates until every
    /// left-hand side of total order `<= max_order` is present.
    pub fn prolonged_to(&self, ws: &Workspace, coords: &[CoordId], max_order: u32) -> RuleSet {
        let mut out = self.clone();
        let mut queue: VecDeque<usize> = (0..out.rules.len()).collect();
        while let Some(i) = queue.pop_front() {
            let (lhs0, elim) = (out.rules[i].lhs.clone(), out.rules[i].eliminates);
            if lhs0.order() >= max_order {
                continue;
            }
            for &c in coords {
                let lhs = Jet { field: lhs0.field, index: index_plus(&lhs0.index, c) };
                if lhs.vanishes(ws) || out.by_lhs.contains_key(&lhs) {
                    continue;
                }
                let rhs = total_derivative(ws, &out.rules[i].rhs, c);
                let idx = out.rules.len();
                out.insert_raw(Rule { lhs, rhs, eliminates: elim });
                queue.push_back(idx);
            }
        }
        out
    }

    /// True when the jet is a derivative this rule set is oriented to
    /// eliminate (whether or not a matching prolongation is present).
    pub fn eliminable(&self, jet: &Jet) -> bool {
        self.rules
            .iter()
            .any(|r| r.lhs.field == jet.field && jet.index[r.eliminates.0 as usize] >= 1)
    }

    /// The present left-hand side below `jet` (componentwise) that needs the
    /// fewest extra derivatives, with a deterministic tie-break.
    fn covering_source(&self, jet: &Jet) -> Option<Jet> {
        self.rules
            .iter()
            .filter(|r| {
                r.lhs.field == jet.field
                    && r.lhs.index.iter().zip(jet.index.iter()).all(|(a, b)| a <= b)
            })
            .map(|r| r.lhs.clone())
            .max_by(|a, b| a.order().cmp(&b.order()).then_with(|| a.index.cmp(&b.index)))
    }

    /// Derive the prolongation covering `jet` on demand, one coordinate at a
    /// time from the closest present rule. Returns false when the jet is not
    /// eliminable at all.
    pub fn ensure_covered(&mut self, ws: &Workspace, jet: &Jet) -> Result<bool> {
        if self.get(jet).is_some() {
            return Ok(true);
        }
        if !self.eliminable(jet) {
            return Ok(false);
        }
        let mut src = self
            .covering_source(jet)
            .ok_or_else(|| Error::NotProlonged { jet: jet.display(ws) })?;
        while src != *jet {
            let c = (0..ws.ncoords())
                .find(|&i| src.index[i] < jet.index[i])
                .expect("source lies below target");
            let mut idx = src.index.clone();
            idx[c] += 1;
            let next = Jet { field: src.field, index: idx };
            if self.get(&next).is_none() {
                let rule = self.get(&src).unwrap();
                let rhs = total_derivative(ws, &rule.rhs, CoordId(c as u32));
                let eliminates = rule.eliminates;
                self.insert_raw(Rule { lhs: next.clone(), rhs, eliminates });
            }
            src = next;
        }
        Ok(true)
    }
}

const DEFAULT_BUDGET: usize = 500_000;

enum Site {
    Scalar(Jet),
    Trace(Word, usize),
    Word(usize),
}

fn find_site_in_key(ws: &Workspace, key: &crate::expr::MonoKey, rules: &RuleSet) -> Result<Option<Site>> {
    for jet in key.scalars.keys() {
        if rules.get(jet).is_some() {
            return Ok(Some(Site::Scalar(jet.clone())));
        }
        if rules.eliminable(jet) {
            return Err(Error::NotProlonged { jet: jet.display(ws) });
        }
    }
    for w in key.traces.keys() {
        for (pos, atom) in w.iter().enumerate() {
            if let Atom::Jet(j) = atom {
                if rules.get(j).is_some() {
                    return Ok(Some(Site::Trace(w.clone(), pos)));
                }
                if rules.eliminable(j) {
                    return Err(Error::NotProlonged { jet: j.display(ws) });
                }
            }
        }
    }
    for (pos, atom) in key.word.iter().enumerate() {
        if let Atom::Jet(j) = atom {
            if rules.get(j).is_some() {
                return Ok(Some(Site::Word(pos)));
            }
            if rules.eliminable(j) {
                return Err(Error::NotProlonged { jet: j.display(ws) });
            }
        }
    }
    Ok(None)
}

/// Replace every eliminable jet occurrence by its rule right-hand side until
/// fixpoint, and return the canonical normal form. The rules must already be
/// prolonged to cover every jet encountered.
pub fn reduce(ws: &Workspace, e: &Expr, rules: &RuleSet) -> Result<Expr> {
    let mut work = rules.clone();
    reduce_with_budget(ws, e, &mut work, DEFAULT_BUDGET, false)
}

/// Like [`reduce`], but derives missing prolongations on demand instead of
/// erroring on them.
pub fn reduce_lazy(ws: &Workspace, e: &Expr, rules: &RuleSet) -> Result<Expr> {
    let mut work = rules.clone();
    reduce_with_budget(ws, e, &mut work, DEFAULT_BUDGET, true)
}

pub fn reduce_with_budget(
    ws: &Workspace,
    e: &Expr,
    rules: &mut RuleSet,
    budget: usize,
    lazy: bool,
) -> Result<Expr> {
    use crate::expr::MonoKey;
    use crate::scalar::ParamScalar;
    let mut work: Vec<(MonoKey, ParamScalar)> = e.terms().map(|(k, c)| (k.clone(), c.clone())).collect();
    let mut done = Expr::zero_shaped(e.is_matrix());
    let mut steps = 0usize;
    while let Some((key, coeff)) = work.pop() {
        if lazy {
            for jet in key_jets(&key) {
                rules.ensure_covered(ws, &jet)?;
            }
        }
        let site = match find_site_in_key(ws, &key, rules)? {
            None => {
                done.push_term(ws, key, coeff);
                continue;
            }
            Some(s) => s,
        };
        steps += 1;
        if steps > budget {
            let jet = match &site {
                Site::Scalar(j) => j.display(ws),
                Site::Trace(w, p) => w[*p].display(ws),
                Site::Word(p) => key.word[*p].display(ws),
            };
            return Err(Error::ReduceBudget { jet, steps });
        }
        match site {
            Site::Scalar(jet) => {
                let rule = rules.get(&jet).unwrap();
                let mut base_key = key.clone();
                let ex = base_key.scalars.get_mut(&jet).unwrap();
                *ex -= 1;
                if *ex == 0 {
                    base_key.scalars.remove(&jet);
                }
                for (rk, rc) in rule.rhs.terms() {
                    let mut k2 = base_key.clone();
                    merge_commuting(&mut k2, rk);
                    debug_assert!(rk.word.is_empty());
                    work.push((k2, coeff.mul(rc)));
                }
            }
            Site::Trace(w, pos) => {
                let rule = match &w[pos] {
                    Atom::Jet(j) => rules.get(j).unwrap(),
                    _ => unreachable!(),
                };
                let mut base_key = key.clone();
                let m = base_key.traces.get_mut(&w).unwrap();
                *m -= 1;
                if *m == 0 {
                    base_key.traces.remove(&w);
                }
                for (rk, rc) in rule.rhs.terms() {
                    let mut k2 = base_key.clone();
                    merge_commuting(&mut k2, rk);
                    let mut w2 = Vec::with_capacity(w.len() - 1 + rk.word.len());
                    w2.extend_from_slice(&w[..pos]);
                    w2.extend_from_slice(&rk.word);
                    w2.extend_from_slice(&w[pos + 1..]);
                    *k2.traces.entry(w2).or_insert(0) += 1;
                    work.push((k2, coeff.mul(rc)));
                }
            }
            Site::Word(pos) => {
                let rule = match &key.word[pos] {
                    Atom::Jet(j) => rules.get(j).unwrap(),
                    _ => unreachable!(),
                };
                for (rk, rc) in rule.rhs.terms() {
                    let mut k2 = key.clone();
                    merge_commuting(&mut k2, rk);
                    let mut w2 = Vec::with_capacity(key.word.len() - 1 + rk.word.len());
                    w2.extend_from_slice(&key.word[..pos]);
                    w2.extend_from_slice(&rk.word);
                    w2.extend_from_slice(&key.word[pos + 1..]);
                    k2.word = w2;
                    work.push((k2, coeff.mul(rc)));
                }
            }
        }
    }
    Ok(done)
}

fn merge_commuting(dst: &mut crate::expr::MonoKey, src: &crate::expr::MonoKey) {
    for (j, e) in &src.scalars {
        *dst.scalars.entry(j.clone()).or_insert(0) += e;
    }
    for (w, m) in &src.traces {
        *dst.traces.entry(w.clone()).or_insert(0) += m;
    }
}

fn key_jets(key: &crate::expr::MonoKey) -> Vec<Jet> {
    let mut out: Vec<Jet> = key.scalars.keys().cloned().collect();
    for w in key.traces.keys().chain(std::iter::once(&key.word)) {
        for a in w {
            if let Atom::Jet(j) = a {
                out.push(j.clone());
            }
        }
    }
    out
}

/// Compatibility alias: reduce with on-demand prolongation.
pub fn reduce_auto(ws: &Workspace, e: &Expr, base: &RuleSet) -> Result<Expr> {
    reduce_lazy(ws, e, base)
}

// ---------------------------------------------------------------------------
// delta(dL) on shell
// ---------------------------------------------------------------------------

/// Outcome of reducing one coefficient of `delta(dL)`.
#[derive(Clone, Debug)]
pub struct DeltaDEntry {
    pub jet: String,
    pub vanished: bool,
    pub residual: String,
}

#[derive(Clone, Debug, Default)]
pub struct DeltaDReport {
    pub entries: Vec<DeltaDEntry>,
}

impl DeltaDReport {
    pub fn pass(&self) -> bool {
        self.entries.iter().all(|e| e.vanished)
    }
}

/// Compute `dL`, take the partial derivative with respect to every jet
/// appearing in it, reduce each coefficient modulo the rules, and report
/// which vanish.
pub fn delta_d_check(ws: &Workspace, form: &Lagrangian2Form, base_rules: &RuleSet) -> Result<DeltaDReport> {
    let dl = form.exterior_derivative(ws);
    let mut report = DeltaDReport::default();
    for jet in dl.collect_jets(ws) {
        let g = partial_jet(ws, &dl, &jet)?;
        if g.is_zero() {
            continue;
        }
        let r = reduce_auto(ws, &g, base_rules)?;
        report.entries.push(DeltaDEntry {
            jet: jet.display(ws),
            vanished: r.is_zero(),
            residual: r.display(ws),
        });
    }
    Ok(report)
}
