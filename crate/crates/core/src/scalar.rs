//! Exact coefficient arithmetic.
//!
//! Coefficients of symbolic expressions are rational functions in the declared
//! parameter symbols (spectral poles, the spectral parameter, the symbolic
//! matrix dimension) with coefficients in the Gaussian rationals Q(i).
//! Fractions are kept reduced (numerator and denominator coprime, denominator
//! monic in the fixed lexicographic monomial order), so equality of canonical
//! forms is plain structural equality.

use num::{BigInt, BigRational, FromPrimitive, One, Signed, ToPrimitive, Zero};
use num_complex::Complex64;
use std::collections::BTreeMap;
use std::fmt::Write as _;

use crate::error::Error;

// ---------------------------------------------------------------------------
// Gaussian rationals
// ---------------------------------------------------------------------------

/// An element of Q(i): `re + im*i` with exact rational parts.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GaussRat {
    pub re: BigRational,
    pub im: BigRational,
}

impl GaussRat {
    pub fn zero() -> Self {
        GaussRat { re: BigRational::zero(), im: BigRational::zero() }
    }

    pub fn one() -> Self {
        GaussRat { re: BigRational::one(), im: BigRational::zero() }
    }

    /// The imaginary unit.
    pub fn i() -> Self {
        GaussRat { re: BigRational::zero(), im: BigRational::one() }
    }

    pub fn from_int(n: i64) -> Self {
        GaussRat { re: BigRational::from_i64(n).unwrap(), im: BigRational::zero() }
    }

    /// `p/q` as a real rational.
    pub fn from_ratio(p: i64, q: i64) -> Self {
        assert!(q != 0, "zero denominator");
        let r = BigRational::new(BigInt::from(p), BigInt::from(q));
        GaussRat { re: r, im: BigRational::zero() }
    }

    /// `(p/q)*i`.
    pub fn from_imag_ratio(p: i64, q: i64) -> Self {
        assert!(q != 0, "zero denominator");
        let r = BigRational::new(BigInt::from(p), BigInt::from(q));
        GaussRat { re: BigRational::zero(), im: r }
    }

    pub fn is_zero(&self) -> bool {
        self.re.is_zero() && self.im.is_zero()
    }

    pub fn is_one(&self) -> bool {
        self.re.is_one() && self.im.is_zero()
    }

    pub fn add(&self, other: &Self) -> Self {
        GaussRat { re: &self.re + &other.re, im: &self.im + &other.im }
    }

    pub fn sub(&self, other: &Self) -> Self {
        GaussRat { re: &self.re - &other.re, im: &self.im - &other.im }
    }

    pub fn neg(&self) -> Self {
        GaussRat { re: -self.re.clone(), im: -self.im.clone() }
    }

    pub fn mul(&self, other: &Self) -> Self {
        GaussRat {
            re: &self.re * &other.re - &self.im * &other.im,
            im: &self.re * &other.im + &self.im * &other.re,
        }
    }

    pub fn inv(&self) -> Self {
        assert!(!self.is_zero(), "division by zero in Q(i)");
        let norm = &self.re * &self.re + &self.im * &self.im;
        GaussRat { re: &self.re / &norm, im: -(&self.im / &norm) }
    }

    pub fn div(&self, other: &Self) -> Self {
        self.mul(&other.inv())
    }

    pub fn to_complex(&self) -> Complex64 {
        Complex64::new(self.re.to_f64().unwrap_or(f64::NAN), self.im.to_f64().unwrap_or(f64::NAN))
    }
}

fn fmt_rat(r: &BigRational) -> String {
    if r.denom().is_one() {
        format!("{}", r.numer())
    } else {
        format!("{}/{}", r.numer(), r.denom())
    }
}

impl std::fmt::Display for GaussRat {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        if self.im.is_zero() {
            return write!(f, "{}", fmt_rat(&self.re));
        }
        if self.re.is_zero() {
            if self.im.is_one() {
                return write!(f, "i");
            }
            if self.im == -BigRational::one() {
                return write!(f, "-i");
            }
            return write!(f, "{}*i", fmt_rat(&self.im));
        }
        write!(f, "({}{}{}*i)", fmt_rat(&self.re), if self.im.is_negative() { "" } else { "+" }, fmt_rat(&self.im))
    }
}

// ---------------------------------------------------------------------------
// Multivariate polynomials over Q(i)
// ---------------------------------------------------------------------------

/// Exponent vector; one slot per declared parameter, lexicographic order.
pub type Exponents = Vec<u16>;

/// A multivariate polynomial over the Gaussian rationals.
///
/// Terms are kept in a map keyed by exponent vector; zero coefficients are
/// never stored.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Poly {
    pub nvars: usize,
    pub terms: BTreeMap<Exponents, GaussRat>,
}

impl Poly {
    pub fn zero(nvars: usize) -> Self {
        Poly { nvars, terms: BTreeMap::new() }
    }

    pub fn constant(nvars: usize, c: GaussRat) -> Self {
        let mut p = Poly::zero(nvars);
        if !c.is_zero() {
            p.terms.insert(vec![0; nvars], c);
        }
        p
    }

    pub fn one(nvars: usize) -> Self {
        Poly::constant(nvars, GaussRat::one())
    }

    pub fn var(nvars: usize, idx: usize) -> Self {
        assert!(idx < nvars);
        let mut e = vec![0u16; nvars];
        e[idx] = 1;
        let mut p = Poly::zero(nvars);
        p.terms.insert(e, GaussRat::one());
        p
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn is_constant(&self) -> bool {
        self.terms.is_empty() || (self.terms.len() == 1 && self.terms.keys().next().unwrap().iter().all(|&e| e == 0))
    }

    fn insert_term(&mut self, e: Exponents, c: GaussRat) {
        if c.is_zero() {
            return;
        }
        match self.terms.entry(e) {
            std::collections::btree_map::Entry::Vacant(v) => {
                v.insert(c);
            }
            std::collections::btree_map::Entry::Occupied(mut o) => {
                let s = o.get().add(&c);
                if s.is_zero() {
                    o.remove();
                } else {
                    *o.get_mut() = s;
                }
            }
        }
    }

    pub fn add(&self, other: &Self) -> Self {
        debug_assert_eq!(self.nvars, other.nvars);
        let mut out = self.clone();
        for (e, c) in &other.terms {
            out.insert_term(e.clone(), c.clone());
        }
        out
    }

    pub fn neg(&self) -> Self {
        let mut out = self.clone();
        for c in out.terms.values_mut() {
            *c = c.neg();
        }
        out
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.add(&other.neg())
    }

    pub fn mul(&self, other: &Self) -> Self {
        debug_assert_eq!(self.nvars, other.nvars);
        let mut out = Poly::zero(self.nvars);
        for (e1, c1) in &self.terms {
            for (e2, c2) in &other.terms {
                let e: Exponents = e1.iter().zip(e2.iter()).map(|(a, b)| a + b).collect();
                out.insert_term(e, c1.mul(c2));
            }
        }
        out
    }

    pub fn scale(&self, c: &GaussRat) -> Self {
        if c.is_zero() {
            return Poly::zero(self.nvars);
        }
        let mut out = self.clone();
        for v in out.terms.values_mut() {
            *v = v.mul(c);
        }
        out
    }

    /// Leading term in the lexicographic order.
    pub fn leading(&self) -> Option<(&Exponents, &GaussRat)> {
        self.terms.iter().next_back()
    }

    /// Degree in variable `idx`.
    pub fn degree_in(&self, idx: usize) -> u16 {
        self.terms.keys().map(|e| e[idx]).max().unwrap_or(0)
    }

    /// Highest variable index that actually occurs, if any.
    fn main_var(&self) -> Option<usize> {
        let mut best: Option<usize> = None;
        for e in self.terms.keys() {
            for (i, &x) in e.iter().enumerate() {
                if x > 0 && best.map_or(true, |b| i > b) {
                    best = Some(i);
                }
            }
        }
        best
    }

    /// Coefficient of `x_idx^k`, as a polynomial in the remaining variables
    /// (same variable space, exponent of `idx` zeroed).
    fn coeff_of(&self, idx: usize, k: u16) -> Poly {
        let mut out = Poly::zero(self.nvars);
        for (e, c) in &self.terms {
            if e[idx] == k {
                let mut e2 = e.clone();
                e2[idx] = 0;
                out.insert_term(e2, c.clone());
            }
        }
        out
    }

    fn mul_var_pow(&self, idx: usize, k: u16) -> Poly {
        let mut out = Poly::zero(self.nvars);
        for (e, c) in &self.terms {
            let mut e2 = e.clone();
            e2[idx] += k;
            out.insert_term(e2, c.clone());
        }
        out
    }

    /// Exact division; `None` if `other` does not divide `self`.
    pub fn divide_exact(&self, other: &Self) -> Option<Poly> {
        assert!(!other.is_zero(), "division by zero polynomial");
        let mut rem = self.clone();
        let mut quot = Poly::zero(self.nvars);
        let (le, lc) = {
            let (e, c) = other.leading().unwrap();
            (e.clone(), c.clone())
        };
        while !rem.is_zero() {
            let (re, rc) = {
                let (e, c) = rem.leading().unwrap();
                (e.clone(), c.clone())
            };
            if !re.iter().zip(le.iter()).all(|(a, b)| a >= b) {
                return None;
            }
            let qe: Exponents = re.iter().zip(le.iter()).map(|(a, b)| a - b).collect();
            let qc = rc.div(&lc);
            let mut t = Poly::zero(self.nvars);
            t.insert_term(qe, qc);
            rem = rem.sub(&t.mul(other));
            quot = quot.add(&t);
        }
        Some(quot)
    }

    /// Make the lexicographic leading coefficient equal to one.
    pub fn monic(&self) -> Poly {
        match self.leading() {
            None => self.clone(),
            Some((_, c)) => {
                let inv = c.inv();
                self.scale(&inv)
            }
        }
    }

    /// GCD via the primitive pseudo-remainder sequence, monic-normalized.
    pub fn gcd(a: &Poly, b: &Poly) -> Poly {
        if a.is_zero() {
            return b.monic();
        }
        if b.is_zero() {
            return a.monic();
        }
        let va = a.main_var();
        let vb = b.main_var();
        let x = match (va, vb) {
            (None, _) | (_, None) => return Poly::one(a.nvars),
            (Some(i), Some(j)) => i.max(j),
        };
        // If one of them does not involve x at all, the gcd divides the
        // content of the other with respect to x.
        let (ca, pa) = a.content_primitive(x);
        let (cb, pb) = b.content_primitive(x);
        let cont = Poly::gcd(&ca, &cb);
        if a.degree_in(x) == 0 || b.degree_in(x) == 0 {
            // x-free argument: gcd lies entirely in the contents.
            let extra = if a.degree_in(x) == 0 {
                Poly::gcd(&pa, &cb)
            } else {
                Poly::gcd(&pb, &ca)
            };
            return cont.mul(&extra).monic();
        }
        let (mut f, mut g) = if pa.degree_in(x) >= pb.degree_in(x) { (pa, pb) } else { (pb, pa) };
        loop {
            let r = Poly::prem(&f, &g, x);
            if r.is_zero() {
                break;
            }
            f = g;
            g = r.content_primitive(x).1;
        }
        cont.mul(&g).monic()
    }

    /// Split into content (gcd of x-coefficients) and primitive part.
    fn content_primitive(&self, x: usize) -> (Poly, Poly) {
        let d = self.degree_in(x);
        let mut cont = Poly::zero(self.nvars);
        for k in 0..=d {
            let c = self.coeff_of(x, k);
            if !c.is_zero() {
                cont = Poly::gcd(&cont, &c);
            }
        }
        if cont.is_zero() {
            return (Poly::one(self.nvars), self.clone());
        }
        let pp = self.divide_exact(&cont).expect("content must divide");
        (cont, pp)
    }

    /// Pseudo-remainder of `f` by `g` with respect to variable `x`.
    fn prem(f: &Poly, g: &Poly, x: usize) -> Poly {
        let dg = g.degree_in(x);
        let lg = g.coeff_of(x, dg);
        let mut r = f.clone();
        while !r.is_zero() && r.degree_in(x) >= dg {
            let dr = r.degree_in(x);
            let lr = r.coeff_of(x, dr);
            // r <- lg*r - x^(dr-dg)*lr*g  eliminates the x^dr coefficient
            r = r.mul(&lg).sub(&lr.mul_var_pow(x, dr - dg).mul(g));
        }
        r
    }

    pub fn eval(&self, values: &[Complex64]) -> Complex64 {
        let mut acc = Complex64::new(0.0, 0.0);
        for (e, c) in &self.terms {
            let mut t = c.to_complex();
            for (i, &k) in e.iter().enumerate() {
                for _ in 0..k {
                    t *= values[i];
                }
            }
            acc += t;
        }
        acc
    }

    /// Substitute variable `idx` by a rational function; the result is rational.
    fn substitute(&self, idx: usize, value: &ParamScalar) -> ParamScalar {
        let mut acc = ParamScalar::zero(self.nvars);
        for (e, c) in &self.terms {
            let mut e2 = e.clone();
            let k = e2[idx];
            e2[idx] = 0;
            let mut mono = Poly::zero(self.nvars);
            mono.insert_term(e2, c.clone());
            let mut term = ParamScalar::from_poly(mono);
            for _ in 0..k {
                term = term.mul(value);
            }
            acc = acc.add(&term);
        }
        acc
    }

    pub fn to_string_with(&self, names: &[String]) -> String {
        if self.is_zero() {
            return "0".into();
        }
        let mut parts = Vec::new();
        for (e, c) in self.terms.iter().rev() {
            let mut s = String::new();
            let vars: Vec<String> = e
                .iter()
                .enumerate()
                .filter(|(_, &k)| k > 0)
                .map(|(i, &k)| if k == 1 { names[i].clone() } else { format!("{}^{}", names[i], k) })
                .collect();
            if vars.is_empty() {
                s.push_str(&format!("{}", c));
            } else if c.is_one() {
                s.push_str(&vars.join("*"));
            } else if *c == GaussRat::one().neg() {
                let _ = write!(s, "-{}", vars.join("*"));
            } else {
                let _ = write!(s, "{}*{}", c, vars.join("*"));
            }
            parts.push(s);
        }
        let mut out = String::new();
        for (i, p) in parts.iter().enumerate() {
            if i == 0 {
                out.push_str(p);
            } else if let Some(rest) = p.strip_prefix('-') {
                out.push_str(" - ");
                out.push_str(rest);
            } else {
                out.push_str(" + ");
                out.push_str(p);
            }
        }
        out
    }
}

// ---------------------------------------------------------------------------
// Rational functions
// ---------------------------------------------------------------------------

/// A reduced fraction of multivariate polynomials over Q(i).
///
/// Canonical form: gcd(num, den) = 1 and den monic in lexicographic order,
/// so structural equality decides mathematical equality.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ParamScalar {
    num: Poly,
    den: Poly,
}

impl ParamScalar {
    pub fn zero(nvars: usize) -> Self {
        ParamScalar { num: Poly::zero(nvars), den: Poly::one(nvars) }
    }

    pub fn one(nvars: usize) -> Self {
        ParamScalar { num: Poly::one(nvars), den: Poly::one(nvars) }
    }

    pub fn from_poly(p: Poly) -> Self {
        let den = Poly::one(p.nvars);
        ParamScalar { num: p, den }
    }

    pub fn constant(nvars: usize, c: GaussRat) -> Self {
        ParamScalar::from_poly(Poly::constant(nvars, c))
    }

    pub fn int(nvars: usize, n: i64) -> Self {
        ParamScalar::constant(nvars, GaussRat::from_int(n))
    }

    pub fn ratio(nvars: usize, p: i64, q: i64) -> Self {
        ParamScalar::constant(nvars, GaussRat::from_ratio(p, q))
    }

    pub fn imag_ratio(nvars: usize, p: i64, q: i64) -> Self {
        ParamScalar::constant(nvars, GaussRat::from_imag_ratio(p, q))
    }

    pub fn var(nvars: usize, idx: usize) -> Self {
        ParamScalar::from_poly(Poly::var(nvars, idx))
    }

    pub fn nvars(&self) -> usize {
        self.num.nvars
    }

    pub fn num(&self) -> &Poly {
        &self.num
    }

    pub fn den(&self) -> &Poly {
        &self.den
    }

    /// Build and reduce to canonical form.
    pub fn new(num: Poly, den: Poly) -> Self {
        assert!(!den.is_zero(), "zero denominator");
        if num.is_zero() {
            return ParamScalar::zero(num.nvars);
        }
        let g = Poly::gcd(&num, &den);
        let (mut n, mut d) = if g.is_constant() {
            (num, den)
        } else {
            (num.divide_exact(&g).expect("gcd divides num"), den.divide_exact(&g).expect("gcd divides den"))
        };
        // normalize: monic denominator
        let lc = d.leading().expect("nonzero").1.clone();
        if !lc.is_one() {
            let inv = lc.inv();
            n = n.scale(&inv);
            d = d.scale(&inv);
        }
        ParamScalar { num: n, den: d }
    }

    pub fn is_zero(&self) -> bool {
        self.num.is_zero()
    }

    pub fn is_one(&self) -> bool {
        self.num == self.den
    }

    pub fn add(&self, other: &Self) -> Self {
        let num = self.num.mul(&other.den).add(&other.num.mul(&self.den));
        let den = self.den.mul(&other.den);
        ParamScalar::new(num, den)
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.add(&other.neg())
    }

    pub fn neg(&self) -> Self {
        ParamScalar { num: self.num.neg(), den: self.den.clone() }
    }

    pub fn mul(&self, other: &Self) -> Self {
        ParamScalar::new(self.num.mul(&other.num), self.den.mul(&other.den))
    }

    pub fn inv(&self) -> Self {
        assert!(!self.is_zero(), "inverse of zero");
        ParamScalar::new(self.den.clone(), self.num.clone())
    }

    pub fn div(&self, other: &Self) -> Self {
        self.mul(&other.inv())
    }

    pub fn pow(&self, k: i64) -> Self {
        let base = if k < 0 { self.inv() } else { self.clone() };
        let mut out = ParamScalar::one(self.nvars());
        for _ in 0..k.unsigned_abs() {
            out = out.mul(&base);
        }
        out
    }

    /// Substitute one parameter by a value; errors if a stored denominator
    /// vanishes under the substitution.
    pub fn substitute(&self, idx: usize, value: &ParamScalar, names: &[String]) -> Result<Self, Error> {
        let n = self.num.substitute(idx, value);
        let d = self.den.substitute(idx, value);
        if d.is_zero() {
            return Err(Error::PoleCollision { denominator: self.den.to_string_with(names) });
        }
        Ok(n.div(&d))
    }

    pub fn eval(&self, values: &[Complex64]) -> Result<Complex64, Error> {
        let d = self.den.eval(values);
        if d.norm() < 1e-12 {
            return Err(Error::IllConditioned { what: "coefficient denominator near zero".into() });
        }
        Ok(self.num.eval(values) / d)
    }

    pub fn to_string_with(&self, names: &[String]) -> String {
        let ns = self.num.to_string_with(names);
        if self.den == Poly::one(self.nvars()) {
            return ns;
        }
        let wrap = |s: &str| {
            if s.contains(['+', '-', ' ']) && !s.starts_with('(') {
                format!("({})", s)
            } else {
                s.to_string()
            }
        };
        format!("{}/{}", wrap(&ns), wrap(&self.den.to_string_with(names)))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn names(n: usize) -> Vec<String> {
        (0..n).map(|i| format!("p{}", i)).collect()
    }

    #[test]
    fn gauss_rat_field_ops() {
        let x = GaussRat { re: BigRational::new(1.into(), 2.into()), im: BigRational::new(3.into(), 4.into()) };
        let y = x.inv();
        assert!(x.mul(&y).is_one());
        assert_eq!(GaussRat::i().mul(&GaussRat::i()), GaussRat::from_int(-1));
    }

    #[test]
    fn fraction_normalization_absorbs_sign() {
        // 1/(a-b) == -(1/(b-a))
        let a = ParamScalar::var(2, 0);
        let b = ParamScalar::var(2, 1);
        let one = ParamScalar::one(2);
        let lhs = one.div(&a.sub(&b));
        let rhs = one.div(&b.sub(&a)).neg();
        assert_eq!(lhs, rhs);
    }

    #[test]
    fn gcd_reduces_fractions() {
        // (a^2 - b^2)/(a - b) == a + b
        let a = Poly::var(2, 0);
        let b = Poly::var(2, 1);
        let num = a.mul(&a).sub(&b.mul(&b));
        let den = a.sub(&b);
        let f = ParamScalar::new(num, den);
        let expect = ParamScalar::from_poly(a.add(&b));
        assert_eq!(f, expect);
    }

    #[test]
    fn three_pole_partial_fraction_identity() {
        // 1/((b-a)(c-a)) + 1/((c-b)(a-b)) + 1/((a-c)(b-c)) = 0
        let a = ParamScalar::var(3, 0);
        let b = ParamScalar::var(3, 1);
        let c = ParamScalar::var(3, 2);
        let one = ParamScalar::one(3);
        let t1 = one.div(&b.sub(&a).mul(&c.sub(&a)));
        let t2 = one.div(&c.sub(&b).mul(&a.sub(&b)));
        let t3 = one.div(&a.sub(&c).mul(&b.sub(&c)));
        assert!(t1.add(&t2).add(&t3).is_zero());
    }

    #[test]
    fn substitute_detects_pole_collision() {
        // lambda -> b inside 1/(lambda - b)
        let nvars = 2;
        let lam = ParamScalar::var(nvars, 0);
        let b = ParamScalar::var(nvars, 1);
        let f = ParamScalar::one(nvars).div(&lam.sub(&b));
        let err = f.substitute(0, &b, &names(nvars)).unwrap_err();
        match err {
            Error::PoleCollision { .. } => {}
            e => panic!("expected pole collision, got {:?}", e),
        }
        // lambda -> c is fine
        let c = ParamScalar::constant(nvars, GaussRat::from_int(7));
        let g = f.substitute(0, &c, &names(nvars)).unwrap();
        assert_eq!(g, ParamScalar::one(nvars).div(&c.sub(&b)));
    }

    #[test]
    fn eval_matches_exact_arithmetic() {
        let a = ParamScalar::var(2, 0);
        let b = ParamScalar::var(2, 1);
        let f = a.mul(&a).sub(&b).div(&a.add(&b));
        let va = Complex64::new(1.5, 0.25);
        let vb = Complex64::new(-0.5, 1.0);
        let direct = (va * va - vb) / (va + vb);
        let got = f.eval(&[va, vb]).unwrap();
        assert!((got - direct).norm() < 1e-12);
    }

    #[test]
    fn gcd_handles_multivariate_contents() {
        // gcd(a*c + b*c, a^2 - b^2) over vars a,b,c is (a + b)
        let a = Poly::var(3, 0);
        let b = Poly::var(3, 1);
        let c = Poly::var(3, 2);
        let p = a.add(&b).mul(&c);
        let q = a.mul(&a).sub(&b.mul(&b));
        let g = Poly::gcd(&p, &q);
        assert_eq!(g, a.add(&b).monic());
    }
}
