//! Exact arithmetic kernel: rationals extended by `sqrt(2)`, and sparse
//! polynomial/exponential expressions over them.
//!
//! [`Scalar`] is an element of the field `Q(sqrt 2)`, stored as a pair of
//! reduced big rationals. That single quadratic extension is the only
//! irrationality that appears in any of the matrix representations handled by
//! this crate, so a general number-field type would be dead weight.
//!
//! [`ExpPoly`] is a sparse multivariate polynomial in the Wei-Norman exponents
//! `u_1..u_n` whose terms may each carry an exponential `exp(L)` of an
//! integer linear form `L` supported on Cartan variables. Entries of the
//! symbolic coefficient matrix `A(u)` and the extracted right-hand sides live
//! in this type.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Zero};
use std::collections::BTreeMap;
use std::fmt;
use std::ops::{Add, Div, Mul, Neg, Sub};

/// Errors from the exact kernel.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ArithmeticError {
    /// Division by an exact zero.
    DivisionByZero,
    /// Substitution into a variable that occurs inside an exponential.
    SubstituteExpVar(usize),
}

impl fmt::Display for ArithmeticError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ArithmeticError::DivisionByZero => write!(f, "division by zero"),
            ArithmeticError::SubstituteExpVar(v) => {
                write!(f, "cannot substitute u{}: it occurs in an exponential", v + 1)
            }
        }
    }
}

impl std::error::Error for ArithmeticError {}

/// An element `rat + surd * sqrt(2)` of `Q(sqrt 2)`.
///
/// Both components are kept in lowest terms with positive denominators
/// (guaranteed by `BigRational`), and the element is zero iff both are.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct Scalar {
    rat: BigRational,
    surd: BigRational,
}

impl Scalar {
    pub fn zero() -> Self {
        Scalar { rat: BigRational::zero(), surd: BigRational::zero() }
    }

    pub fn one() -> Self {
        Scalar::from_int(1)
    }

    pub fn from_int(n: i64) -> Self {
        Scalar { rat: BigRational::from_integer(BigInt::from(n)), surd: BigRational::zero() }
    }

    /// `p/q`, exact. Panics if `q == 0`.
    pub fn from_ratio(p: i64, q: i64) -> Self {
        assert!(q != 0, "zero denominator");
        Scalar {
            rat: BigRational::new(BigInt::from(p), BigInt::from(q)),
            surd: BigRational::zero(),
        }
    }

    /// `(p/q) * sqrt(2)`.
    pub fn sqrt2_ratio(p: i64, q: i64) -> Self {
        assert!(q != 0, "zero denominator");
        Scalar {
            rat: BigRational::zero(),
            surd: BigRational::new(BigInt::from(p), BigInt::from(q)),
        }
    }

    /// `sqrt(2)` itself.
    pub fn sqrt2() -> Self {
        Scalar::sqrt2_ratio(1, 1)
    }

    pub fn from_parts(rat: BigRational, surd: BigRational) -> Self {
        Scalar { rat, surd }
    }

    pub fn rat_part(&self) -> &BigRational {
        &self.rat
    }

    pub fn surd_part(&self) -> &BigRational {
        &self.surd
    }

    pub fn is_zero(&self) -> bool {
        self.rat.is_zero() && self.surd.is_zero()
    }

    pub fn is_one(&self) -> bool {
        self.rat.is_one() && self.surd.is_zero()
    }

    /// True when the element lies in `Q` (no `sqrt 2` component).
    pub fn is_rational(&self) -> bool {
        self.surd.is_zero()
    }

    /// Exact reciprocal: `(a + b sqrt2)^-1 = (a - b sqrt2) / (a^2 - 2 b^2)`.
    ///
    /// The norm `a^2 - 2 b^2` vanishes only at zero because `sqrt 2` is
    /// irrational, so inversion is total on nonzero elements.
    pub fn try_inv(&self) -> Result<Scalar, ArithmeticError> {
        if self.is_zero() {
            return Err(ArithmeticError::DivisionByZero);
        }
        let two = BigRational::from_integer(BigInt::from(2));
        let norm = &self.rat * &self.rat - two * &self.surd * &self.surd;
        Ok(Scalar { rat: &self.rat / &norm, surd: -(&self.surd / &norm) })
    }

    pub fn try_div(&self, rhs: &Scalar) -> Result<Scalar, ArithmeticError> {
        Ok(self * &rhs.try_inv()?)
    }

    /// Floating-point value `rat + surd * sqrt(2)`.
    pub fn to_f64(&self) -> f64 {
        rational_to_f64(&self.rat) + rational_to_f64(&self.surd) * std::f64::consts::SQRT_2
    }
}

/// Rounded conversion good to f64 precision for the magnitudes seen here.
fn rational_to_f64(r: &BigRational) -> f64 {
    let num = r.numer();
    let den = r.denom();
    // Exact for the small integers in practice; falls back to a scaled
    // quotient for large ones.
    let nf = bigint_to_f64(num);
    let df = bigint_to_f64(den);
    nf / df
}

fn bigint_to_f64(n: &BigInt) -> f64 {
    use num_traits::ToPrimitive;
    n.to_f64().unwrap_or(f64::NAN)
}

impl fmt::Debug for Scalar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

impl fmt::Display for Scalar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fn rat_str(r: &BigRational) -> String {
            if r.denom().is_one() {
                format!("{}", r.numer())
            } else {
                format!("{}/{}", r.numer(), r.denom())
            }
        }
        if self.is_zero() {
            return write!(f, "0");
        }
        let mut parts = Vec::new();
        if !self.rat.is_zero() {
            parts.push(rat_str(&self.rat));
        }
        if !self.surd.is_zero() {
            let coeff = if self.surd.is_one() {
                "sqrt2".to_string()
            } else if (-&self.surd).is_one() {
                "-sqrt2".to_string()
            } else {
                format!("{}*sqrt2", rat_str(&self.surd))
            };
            if parts.is_empty() {
                parts.push(coeff);
            } else if coeff.starts_with('-') {
                parts.push(format!("- {}", &coeff[1..]));
            } else {
                parts.push(format!("+ {}", coeff));
            }
        }
        write!(f, "{}", parts.join(" "))
    }
}

impl Add for &Scalar {
    type Output = Scalar;
    fn add(self, rhs: &Scalar) -> Scalar {
        Scalar { rat: &self.rat + &rhs.rat, surd: &self.surd + &rhs.surd }
    }
}

impl Sub for &Scalar {
    type Output = Scalar;
    fn sub(self, rhs: &Scalar) -> Scalar {
        Scalar { rat: &self.rat - &rhs.rat, surd: &self.surd - &rhs.surd }
    }
}

impl Mul for &Scalar {
    type Output = Scalar;
    fn mul(self, rhs: &Scalar) -> Scalar {
        // (a + b s)(c + d s) = ac + 2bd + (ad + bc) s,  s^2 = 2
        let two = BigRational::from_integer(BigInt::from(2));
        Scalar {
            rat: &self.rat * &rhs.rat + two * &self.surd * &rhs.surd,
            surd: &self.rat * &rhs.surd + &self.surd * &rhs.rat,
        }
    }
}

impl Neg for &Scalar {
    type Output = Scalar;
    fn neg(self) -> Scalar {
        Scalar { rat: -&self.rat, surd: -&self.surd }
    }
}

macro_rules! forward_val_ops {
    ($t:ty) => {
        impl Add for $t {
            type Output = $t;
            fn add(self, rhs: $t) -> $t {
                &self + &rhs
            }
        }
        impl Sub for $t {
            type Output = $t;
            fn sub(self, rhs: $t) -> $t {
                &self - &rhs
            }
        }
        impl Mul for $t {
            type Output = $t;
            fn mul(self, rhs: $t) -> $t {
                &self * &rhs
            }
        }
        impl Neg for $t {
            type Output = $t;
            fn neg(self) -> $t {
                -&self
            }
        }
    };
}

forward_val_ops!(Scalar);

impl Div for &Scalar {
    type Output = Scalar;
    fn div(self, rhs: &Scalar) -> Scalar {
        self.try_div(rhs).expect("scalar division by zero")
    }
}

impl Div for Scalar {
    type Output = Scalar;
    fn div(self, rhs: Scalar) -> Scalar {
        &self / &rhs
    }
}

/// Monomial exponents: sorted `(variable, power)` pairs, powers nonzero.
pub type Monomial = Vec<(usize, u32)>;

/// Integer linear form in the exponent of an exponential factor:
/// sorted `(variable, coefficient)` pairs, coefficients nonzero.
pub type LinForm = Vec<(usize, i64)>;

/// One term key of an [`ExpPoly`].
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct TermKey {
    pub monomial: Monomial,
    pub exponent: LinForm,
}

impl TermKey {
    fn constant() -> Self {
        TermKey { monomial: Vec::new(), exponent: Vec::new() }
    }

    pub fn total_degree(&self) -> u32 {
        self.monomial.iter().map(|&(_, p)| p).sum()
    }
}

/// Graded-lex on the monomial, then lex on the exponential linear form.
///
/// Graded-lex: higher total degree compares greater; at equal degree the
/// monomial with the higher power on the earliest variable wins.
impl Ord for TermKey {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        use std::cmp::Ordering;
        match self.total_degree().cmp(&other.total_degree()) {
            Ordering::Equal => {}
            ord => return ord,
        }
        // Lex comparison treating missing variables as power 0; smaller
        // variable index is "more significant".
        let mut i = 0;
        let mut j = 0;
        loop {
            match (self.monomial.get(i), other.monomial.get(j)) {
                (None, None) => break,
                (Some(_), None) => return Ordering::Greater,
                (None, Some(_)) => return Ordering::Less,
                (Some(&(va, pa)), Some(&(vb, pb))) => {
                    if va != vb {
                        // The one with the smaller leading variable has a
                        // positive power there, the other has zero.
                        return if va < vb { Ordering::Greater } else { Ordering::Less };
                    }
                    match pa.cmp(&pb) {
                        Ordering::Equal => {
                            i += 1;
                            j += 1;
                        }
                        ord => return ord,
                    }
                }
            }
        }
        self.exponent.cmp(&other.exponent)
    }
}

impl PartialOrd for TermKey {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

/// Sparse polynomial in `u` variables with optional exponential factors
/// `exp(L)` per term, `L` an integer linear form over Cartan variables.
///
/// Invariants: no stored zero coefficients; terms held in canonical order
/// (the `BTreeMap` keys are graded-lex on the monomial, then lex on `L`).
#[derive(Clone, PartialEq, Eq, Debug, Default)]
pub struct ExpPoly {
    terms: BTreeMap<TermKey, Scalar>,
}

impl ExpPoly {
    pub fn zero() -> Self {
        ExpPoly { terms: BTreeMap::new() }
    }

    pub fn one() -> Self {
        ExpPoly::constant(Scalar::one())
    }

    pub fn constant(c: Scalar) -> Self {
        let mut terms = BTreeMap::new();
        if !c.is_zero() {
            terms.insert(TermKey::constant(), c);
        }
        ExpPoly { terms }
    }

    /// The variable `u_var` (0-based index).
    pub fn var(var: usize) -> Self {
        let mut terms = BTreeMap::new();
        terms.insert(
            TermKey { monomial: vec![(var, 1)], exponent: Vec::new() },
            Scalar::one(),
        );
        ExpPoly { terms }
    }

    /// `exp(L)` for a linear form given as `(variable, integer coefficient)`.
    pub fn exponential(form: &[(usize, i64)]) -> Self {
        let mut exponent: LinForm = form.iter().copied().filter(|&(_, c)| c != 0).collect();
        exponent.sort_unstable_by_key(|&(v, _)| v);
        let mut terms = BTreeMap::new();
        terms.insert(TermKey { monomial: Vec::new(), exponent }, Scalar::one());
        ExpPoly { terms }
    }

    pub fn term(coeff: Scalar, monomial: &[(usize, u32)], exponent: &[(usize, i64)]) -> Self {
        let mut mono: Monomial = monomial.iter().copied().filter(|&(_, p)| p != 0).collect();
        mono.sort_unstable_by_key(|&(v, _)| v);
        let mut expo: LinForm = exponent.iter().copied().filter(|&(_, c)| c != 0).collect();
        expo.sort_unstable_by_key(|&(v, _)| v);
        let mut terms = BTreeMap::new();
        if !coeff.is_zero() {
            terms.insert(TermKey { monomial: mono, exponent: expo }, coeff);
        }
        ExpPoly { terms }
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn num_terms(&self) -> usize {
        self.terms.len()
    }

    pub fn terms(&self) -> impl Iterator<Item = (&TermKey, &Scalar)> {
        self.terms.iter()
    }

    /// Coefficient of an exact term key (zero if absent).
    pub fn coefficient(&self, monomial: &[(usize, u32)], exponent: &[(usize, i64)]) -> Scalar {
        let key = TermKey { monomial: monomial.to_vec(), exponent: exponent.to_vec() };
        self.terms.get(&key).cloned().unwrap_or_else(Scalar::zero)
    }

    /// Constant term (empty monomial, empty exponent).
    pub fn constant_term(&self) -> Scalar {
        self.terms.get(&TermKey::constant()).cloned().unwrap_or_else(Scalar::zero)
    }

    fn insert_term(&mut self, key: TermKey, coeff: Scalar) {
        if coeff.is_zero() {
            return;
        }
        use std::collections::btree_map::Entry;
        match self.terms.entry(key) {
            Entry::Vacant(e) => {
                e.insert(coeff);
            }
            Entry::Occupied(mut e) => {
                let sum = &*e.get() + &coeff;
                if sum.is_zero() {
                    e.remove();
                } else {
                    *e.get_mut() = sum;
                }
            }
        }
    }

    pub fn scale(&self, c: &Scalar) -> ExpPoly {
        if c.is_zero() {
            return ExpPoly::zero();
        }
        ExpPoly {
            terms: self.terms.iter().map(|(k, v)| (k.clone(), v * c)).collect(),
        }
    }

    /// Total degree of the monomial part, `None` for the zero polynomial.
    /// Exponential factors do not contribute.
    pub fn total_degree(&self) -> Option<u32> {
        self.terms.keys().map(TermKey::total_degree).max()
    }

    /// Maximum power of a single variable across all monomials.
    pub fn degree_in(&self, var: usize) -> u32 {
        self.terms
            .keys()
            .flat_map(|k| k.monomial.iter())
            .filter(|&&(v, _)| v == var)
            .map(|&(_, p)| p)
            .max()
            .unwrap_or(0)
    }

    /// All variables appearing in monomials (not in exponentials).
    pub fn monomial_vars(&self) -> Vec<usize> {
        let mut vars: Vec<usize> = self
            .terms
            .keys()
            .flat_map(|k| k.monomial.iter().map(|&(v, _)| v))
            .collect();
        vars.sort_unstable();
        vars.dedup();
        vars
    }

    /// All variables appearing inside exponentials.
    pub fn exponential_vars(&self) -> Vec<usize> {
        let mut vars: Vec<usize> = self
            .terms
            .keys()
            .flat_map(|k| k.exponent.iter().map(|&(v, _)| v))
            .collect();
        vars.sort_unstable();
        vars.dedup();
        vars
    }

    /// Floating evaluation at `point` (indexed by variable).
    pub fn eval(&self, point: &[f64]) -> f64 {
        let mut acc = 0.0;
        for (key, coeff) in &self.terms {
            let mut v = coeff.to_f64();
            for &(var, pow) in &key.monomial {
                v *= point[var].powi(pow as i32);
            }
            if !key.exponent.is_empty() {
                let mut lin = 0.0;
                for &(var, c) in &key.exponent {
                    lin += c as f64 * point[var];
                }
                v *= lin.exp();
            }
            acc += v;
        }
        acc
    }

    /// Exact substitution `u_var <- value` into the polynomial part.
    ///
    /// Errors if the variable occurs inside an exponential factor, where a
    /// rational substitution would leave the ring.
    pub fn substitute(&self, var: usize, value: &Scalar) -> Result<ExpPoly, ArithmeticError> {
        let mut out = ExpPoly::zero();
        for (key, coeff) in &self.terms {
            if key.exponent.iter().any(|&(v, _)| v == var) {
                return Err(ArithmeticError::SubstituteExpVar(var));
            }
            let mut c = coeff.clone();
            let mut mono = Vec::with_capacity(key.monomial.len());
            for &(v, p) in &key.monomial {
                if v == var {
                    for _ in 0..p {
                        c = &c * value;
                    }
                } else {
                    mono.push((v, p));
                }
            }
            out.insert_term(TermKey { monomial: mono, exponent: key.exponent.clone() }, c);
        }
        Ok(out)
    }
}

impl Add for &ExpPoly {
    type Output = ExpPoly;
    fn add(self, rhs: &ExpPoly) -> ExpPoly {
        let mut out = self.clone();
        for (k, v) in &rhs.terms {
            out.insert_term(k.clone(), v.clone());
        }
        out
    }
}

impl Sub for &ExpPoly {
    type Output = ExpPoly;
    fn sub(self, rhs: &ExpPoly) -> ExpPoly {
        let mut out = self.clone();
        for (k, v) in &rhs.terms {
            out.insert_term(k.clone(), -v);
        }
        out
    }
}

impl Neg for &ExpPoly {
    type Output = ExpPoly;
    fn neg(self) -> ExpPoly {
        ExpPoly { terms: self.terms.iter().map(|(k, v)| (k.clone(), -v)).collect() }
    }
}

fn merge_monomials(a: &Monomial, b: &Monomial) -> Monomial {
    let mut out: Monomial = Vec::with_capacity(a.len() + b.len());
    let (mut i, mut j) = (0, 0);
    while i < a.len() || j < b.len() {
        match (a.get(i), b.get(j)) {
            (Some(&(va, pa)), Some(&(vb, pb))) if va == vb => {
                out.push((va, pa + pb));
                i += 1;
                j += 1;
            }
            (Some(&(va, pa)), Some(&(vb, _))) if va < vb => {
                out.push((va, pa));
                i += 1;
            }
            (Some(_), Some(&(vb, pb))) => {
                out.push((vb, pb));
                j += 1;
            }
            (Some(&t), None) => {
                out.push(t);
                i += 1;
            }
            (None, Some(&t)) => {
                out.push(t);
                j += 1;
            }
            (None, None) => unreachable!(),
        }
    }
    out
}

fn merge_linforms(a: &LinForm, b: &LinForm) -> LinForm {
    let mut out: LinForm = Vec::with_capacity(a.len() + b.len());
    let (mut i, mut j) = (0, 0);
    while i < a.len() || j < b.len() {
        match (a.get(i), b.get(j)) {
            (Some(&(va, ca)), Some(&(vb, cb))) if va == vb => {
                if ca + cb != 0 {
                    out.push((va, ca + cb));
                }
                i += 1;
                j += 1;
            }
            (Some(&(va, ca)), Some(&(vb, _))) if va < vb => {
                out.push((va, ca));
                i += 1;
            }
            (Some(_), Some(&t)) => {
                out.push(t);
                j += 1;
            }
            (Some(&t), None) => {
                out.push(t);
                i += 1;
            }
            (None, Some(&t)) => {
                out.push(t);
                j += 1;
            }
            (None, None) => unreachable!(),
        }
    }
    out
}

impl Mul for &ExpPoly {
    type Output = ExpPoly;
    fn mul(self, rhs: &ExpPoly) -> ExpPoly {
        let mut out = ExpPoly::zero();
        for (ka, ca) in &self.terms {
            for (kb, cb) in &rhs.terms {
                let key = TermKey {
                    monomial: merge_monomials(&ka.monomial, &kb.monomial),
                    exponent: merge_linforms(&ka.exponent, &kb.exponent),
                };
                out.insert_term(key, ca * cb);
            }
        }
        out
    }
}

forward_val_ops!(ExpPoly);

impl fmt::Display for ExpPoly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_zero() {
            return write!(f, "0");
        }
        // Descending graded-lex for readability.
        let mut first = true;
        for (key, coeff) in self.terms.iter().rev() {
            let piece = format_term(key, coeff, "u");
            if first {
                write!(f, "{}", piece)?;
                first = false;
            } else if let Some(stripped) = piece.strip_prefix('-') {
                write!(f, " - {}", stripped)?;
            } else {
                write!(f, " + {}", piece)?;
            }
        }
        Ok(())
    }
}

/// Render one term as `coeff*u1^2*u3*exp(-u5+2*u6)`.
pub(crate) fn format_term(key: &TermKey, coeff: &Scalar, var_prefix: &str) -> String {
    let mut factors: Vec<String> = Vec::new();
    let coeff_str = coeff.to_string();
    let bare = key.monomial.is_empty() && key.exponent.is_empty();
    let negated_one = coeff_str == "-1";
    if bare || !(coeff.is_one() || negated_one) {
        // Coefficients with more than one component need parentheses when
        // they multiply something.
        if coeff_str.contains(' ') && !bare {
            factors.push(format!("({})", coeff_str));
        } else {
            factors.push(coeff_str.clone());
        }
    }
    for &(v, p) in &key.monomial {
        if p == 1 {
            factors.push(format!("{}{}", var_prefix, v + 1));
        } else {
            factors.push(format!("{}{}^{}", var_prefix, v + 1, p));
        }
    }
    if !key.exponent.is_empty() {
        factors.push(format!("exp({})", format_linform(&key.exponent, var_prefix)));
    }
    let joined = factors.join("*");
    if negated_one && !bare {
        format!("-{}", joined)
    } else {
        joined
    }
}

pub(crate) fn format_linform(form: &LinForm, var_prefix: &str) -> String {
    let mut s = String::new();
    for (idx, &(v, c)) in form.iter().enumerate() {
        let mag = c.abs();
        if idx == 0 {
            if c < 0 {
                s.push('-');
            }
        } else if c < 0 {
            s.push_str(" - ");
        } else {
            s.push_str(" + ");
        }
        if mag != 1 {
            s.push_str(&format!("{}*", mag));
        }
        s.push_str(&format!("{}{}", var_prefix, v + 1));
    }
    s
}
