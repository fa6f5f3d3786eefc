//! Exact commutative polynomials over the T*GL(N) generator alphabet.

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::fmt;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};

use crate::error::{GzError, Result};

/// Which family a generator belongs to.
///
/// The derived order `U < UTilde < G` is the first key of the monomial order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, serde::Serialize, serde::Deserialize)]
pub enum GenKind {
    U,
    UTilde,
    G,
}

/// A coordinate generator `u^{ij}`, `ũ^{ij}` or `g_{ij}` with 1-based indices.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Generator {
    pub kind: GenKind,
    pub row: u8,
    pub col: u8,
}

impl Generator {
    pub fn new(kind: GenKind, row: usize, col: usize) -> Self {
        debug_assert!(row >= 1 && col >= 1);
        Self { kind, row: row as u8, col: col as u8 }
    }

    pub fn u(row: usize, col: usize) -> Self {
        Self::new(GenKind::U, row, col)
    }

    pub fn ut(row: usize, col: usize) -> Self {
        Self::new(GenKind::UTilde, row, col)
    }

    pub fn g(row: usize, col: usize) -> Self {
        Self::new(GenKind::G, row, col)
    }

    pub fn row(&self) -> usize {
        self.row as usize
    }

    pub fn col(&self) -> usize {
        self.col as usize
    }

    pub fn check(&self, n: usize) -> Result<()> {
        if self.row() == 0 || self.col() == 0 || self.row() > n || self.col() > n {
            return Err(GzError::IndexOutOfRange { row: self.row(), col: self.col(), n });
        }
        Ok(())
    }
}

impl fmt::Display for Generator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self.kind {
            GenKind::U => "u",
            GenKind::UTilde => "ut",
            GenKind::G => "g",
        };
        write!(f, "{}{}{}", name, self.row, self.col)
    }
}

/// A polynomial variable: a generator or one of the central formal parameters.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Var {
    Gen(Generator),
    Lambda,
    Mu,
}

impl Var {
    pub fn is_central(&self) -> bool {
        !matches!(self, Var::Gen(_))
    }
}

impl fmt::Display for Var {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Var::Gen(g) => write!(f, "{g}"),
            Var::Lambda => write!(f, "lambda"),
            Var::Mu => write!(f, "mu"),
        }
    }
}

/// Product of variable powers, sorted by variable with no zero exponents.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default)]
pub struct Monomial(Vec<(Var, u32)>);

impl Monomial {
    pub fn one() -> Self {
        Self(Vec::new())
    }

    pub fn var(v: Var) -> Self {
        Self(vec![(v, 1)])
    }

    pub fn from_powers(mut powers: Vec<(Var, u32)>) -> Self {
        powers.retain(|&(_, e)| e > 0);
        powers.sort_by_key(|p| p.0);
        let mut out: Vec<(Var, u32)> = Vec::with_capacity(powers.len());
        for (v, e) in powers {
            match out.last_mut() {
                Some(last) if last.0 == v => last.1 += e,
                _ => out.push((v, e)),
            }
        }
        Self(out)
    }

    pub fn powers(&self) -> &[(Var, u32)] {
        &self.0
    }

    pub fn degree(&self) -> u32 {
        self.0.iter().map(|&(_, e)| e).sum()
    }

    /// Degree counting generators only (formal parameters excluded).
    pub fn generator_degree(&self) -> u32 {
        self.0.iter().filter(|(v, _)| !v.is_central()).map(|&(_, e)| e).sum()
    }

    pub fn exponent(&self, v: Var) -> u32 {
        self.0.iter().find(|(w, _)| *w == v).map_or(0, |&(_, e)| e)
    }

    pub fn is_one(&self) -> bool {
        self.0.is_empty()
    }

    pub fn mul(&self, other: &Monomial) -> Monomial {
        let (a, b) = (&self.0, &other.0);
        let mut out = Vec::with_capacity(a.len() + b.len());
        let (mut i, mut j) = (0, 0);
        while i < a.len() && j < b.len() {
            match a[i].0.cmp(&b[j].0) {
                Ordering::Less => {
                    out.push(a[i]);
                    i += 1;
                }
                Ordering::Greater => {
                    out.push(b[j]);
                    j += 1;
                }
                Ordering::Equal => {
                    out.push((a[i].0, a[i].1 + b[j].1));
                    i += 1;
                    j += 1;
                }
            }
        }
        out.extend_from_slice(&a[i..]);
        out.extend_from_slice(&b[j..]);
        Monomial(out)
    }

    /// Divides out one power of `v`; returns the exponent it had.
    pub fn remove_one(&self, v: Var) -> Option<(u32, Monomial)> {
        let pos = self.0.iter().position(|(w, _)| *w == v)?;
        let e = self.0[pos].1;
        let mut out = self.0.clone();
        if e == 1 {
            out.remove(pos);
        } else {
            out[pos].1 -= 1;
        }
        Some((e, Monomial(out)))
    }

    /// Drops all powers of `v`.
    pub fn without(&self, v: Var) -> Monomial {
        Monomial(self.0.iter().copied().filter(|(w, _)| *w != v).collect())
    }
}

// Graded lexicographic: total degree first, then the sorted power lists.
impl Ord for Monomial {
    fn cmp(&self, other: &Self) -> Ordering {
        self.degree().cmp(&other.degree()).then_with(|| self.0.cmp(&other.0))
    }
}

impl PartialOrd for Monomial {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for Monomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.is_empty() {
            return write!(f, "1");
        }
        for (k, (v, e)) in self.0.iter().enumerate() {
            if k > 0 {
                write!(f, "*")?;
            }
            if *e == 1 {
                write!(f, "{v}")?;
            } else {
                write!(f, "{v}^{e}")?;
            }
        }
        Ok(())
    }
}

/// Exact polynomial with big-rational coefficients in the generators of an
/// ambient `gl_N` context.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PoissonPoly {
    n: usize,
    terms: BTreeMap<Monomial, BigRational>,
}

pub fn rat(num: i64, den: i64) -> BigRational {
    BigRational::new(BigInt::from(num), BigInt::from(den))
}

impl PoissonPoly {
    pub fn zero(n: usize) -> Self {
        Self { n, terms: BTreeMap::new() }
    }

    pub fn constant(n: usize, c: BigRational) -> Self {
        let mut p = Self::zero(n);
        p.add_term(Monomial::one(), c);
        p
    }

    pub fn one(n: usize) -> Self {
        Self::constant(n, BigRational::one())
    }

    pub fn var(n: usize, v: Var) -> Self {
        let mut p = Self::zero(n);
        p.add_term(Monomial::var(v), BigRational::one());
        p
    }

    pub fn gen(n: usize, g: Generator) -> Self {
        Self::var(n, Var::Gen(g))
    }

    pub fn lambda(n: usize) -> Self {
        Self::var(n, Var::Lambda)
    }

    pub fn mu(n: usize) -> Self {
        Self::var(n, Var::Mu)
    }

    pub fn from_terms(n: usize, terms: impl IntoIterator<Item = (Monomial, BigRational)>) -> Self {
        let mut p = Self::zero(n);
        for (m, c) in terms {
            p.add_term(m, c);
        }
        p
    }

    pub fn ambient_size(&self) -> usize {
        self.n
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Monomial, &BigRational)> {
        self.terms.iter()
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    /// True when no generator appears (formal parameters may).
    pub fn is_generator_free(&self) -> bool {
        self.terms.keys().all(|m| m.generator_degree() == 0)
    }

    pub fn is_constant(&self) -> bool {
        self.terms.keys().all(Monomial::is_one)
    }

    pub fn degree(&self) -> u32 {
        self.terms.keys().map(Monomial::degree).max().unwrap_or(0)
    }

    pub fn add_term(&mut self, m: Monomial, c: BigRational) {
        if c.is_zero() {
            return;
        }
        match self.terms.entry(m) {
            std::collections::btree_map::Entry::Vacant(e) => {
                e.insert(c);
            }
            std::collections::btree_map::Entry::Occupied(mut e) => {
                *e.get_mut() += c;
                if e.get().is_zero() {
                    e.remove();
                }
            }
        }
    }

    fn check_same(&self, other: &Self) -> Result<()> {
        if self.n != other.n {
            return Err(GzError::AmbientMismatch { left: self.n, right: other.n });
        }
        Ok(())
    }

    pub fn try_add(&self, other: &Self) -> Result<Self> {
        self.check_same(other)?;
        let mut out = self.clone();
        for (m, c) in &other.terms {
            out.add_term(m.clone(), c.clone());
        }
        Ok(out)
    }

    pub fn try_mul(&self, other: &Self) -> Result<Self> {
        self.check_same(other)?;
        let mut out = Self::zero(self.n);
        for (ma, ca) in &self.terms {
            for (mb, cb) in &other.terms {
                out.add_term(ma.mul(mb), ca * cb);
            }
        }
        Ok(out)
    }

    pub fn scale(&self, c: &BigRational) -> Self {
        if c.is_zero() {
            return Self::zero(self.n);
        }
        Self { n: self.n, terms: self.terms.iter().map(|(m, v)| (m.clone(), v * c)).collect() }
    }

    pub fn pow(&self, e: u32) -> Self {
        let mut out = Self::one(self.n);
        for _ in 0..e {
            out = &out * self;
        }
        out
    }

    pub fn derivative(&self, v: Var) -> Self {
        let mut out = Self::zero(self.n);
        for (m, c) in &self.terms {
            if let Some((e, rest)) = m.remove_one(v) {
                out.add_term(rest, c * BigRational::from_integer(BigInt::from(e)));
            }
        }
        out
    }

    /// Coefficient of `v^power`, as a polynomial free of `v`.
    pub fn coefficient(&self, v: Var, power: u32) -> Self {
        let mut out = Self::zero(self.n);
        for (m, c) in &self.terms {
            if m.exponent(v) == power {
                out.add_term(m.without(v), c.clone());
            }
        }
        out
    }

    pub fn degree_in(&self, v: Var) -> u32 {
        self.terms.keys().map(|m| m.exponent(v)).max().unwrap_or(0)
    }

    /// Part of homogeneous generator-degree `d`.
    pub fn generator_degree_part(&self, d: u32) -> Self {
        Self::from_terms(
            self.n,
            self.terms.iter().filter(|(m, _)| m.generator_degree() == d).map(|(m, c)| (m.clone(), c.clone())),
        )
    }

    pub fn max_generator_degree(&self) -> u32 {
        self.terms.keys().map(Monomial::generator_degree).max().unwrap_or(0)
    }

    pub fn variables(&self) -> Vec<Var> {
        let mut vs: Vec<Var> = self.terms.keys().flat_map(|m| m.powers().iter().map(|&(v, _)| v)).collect();
        vs.sort();
        vs.dedup();
        vs
    }

    /// Evaluates with a caller-supplied value for every variable.
    pub fn eval_with<T, F>(&self, mut value: F) -> T
    where
        T: Clone + num_traits::Num + From<f64>,
        F: FnMut(Var) -> T,
    {
        let mut acc = T::zero();
        for (m, c) in &self.terms {
            let mut term = T::from(rat_to_f64(c));
            for &(v, e) in m.powers() {
                let x = value(v);
                for _ in 0..e {
                    term = term * x.clone();
                }
            }
            acc = acc + term;
        }
        acc
    }

    /// Terms rendered as `(coefficient, monomial)` strings, in canonical order.
    pub fn term_list(&self) -> Vec<(String, String)> {
        self.terms.iter().map(|(m, c)| (c.to_string(), m.to_string())).collect()
    }
}

pub fn rat_to_f64(q: &BigRational) -> f64 {
    use num_traits::ToPrimitive;
    q.to_f64().unwrap_or_else(|| {
        // ratio of huge integers: scale down through the bit lengths
        let shift = q.numer().bits().max(q.denom().bits()).saturating_sub(1000);
        let num = (q.numer() >> shift).to_f64().unwrap_or(f64::NAN);
        let den = (q.denom() >> shift).to_f64().unwrap_or(f64::NAN);
        num / den
    })
}

impl fmt::Display for PoissonPoly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        for (k, (m, c)) in self.terms.iter().enumerate() {
            let neg = c.is_negative();
            let a = c.abs();
            if k == 0 {
                if neg {
                    write!(f, "-")?;
                }
            } else {
                write!(f, " {} ", if neg { "-" } else { "+" })?;
            }
            if m.is_one() {
                write!(f, "{a}")?;
            } else if a.is_one() {
                write!(f, "{m}")?;
            } else {
                write!(f, "{a}*{m}")?;
            }
        }
        Ok(())
    }
}

macro_rules! forward_binop {
    ($tr:ident, $method:ident, $inner:ident) => {
        impl std::ops::$tr<&PoissonPoly> for &PoissonPoly {
            type Output = PoissonPoly;
            fn $method(self, rhs: &PoissonPoly) -> PoissonPoly {
                self.$inner(rhs).expect("ambient size mismatch")
            }
        }
        impl std::ops::$tr<PoissonPoly> for PoissonPoly {
            type Output = PoissonPoly;
            fn $method(self, rhs: PoissonPoly) -> PoissonPoly {
                (&self).$inner(&rhs).expect("ambient size mismatch")
            }
        }
    };
}

forward_binop!(Add, add, try_add);
forward_binop!(Mul, mul, try_mul);

impl PoissonPoly {
    pub fn try_sub(&self, other: &Self) -> Result<Self> {
        self.try_add(&-other)
    }
}

forward_binop!(Sub, sub, try_sub);

impl std::ops::Neg for &PoissonPoly {
    type Output = PoissonPoly;
    fn neg(self) -> PoissonPoly {
        PoissonPoly { n: self.n, terms: self.terms.iter().map(|(m, c)| (m.clone(), -c)).collect() }
    }
}

impl std::ops::Neg for PoissonPoly {
    type Output = PoissonPoly;
    fn neg(self) -> PoissonPoly {
        -&self
    }
}
