//! Classical commuting families on T*GL(N): Gelfand-Zetlin minors (principal
//! and left-lower corner), the shift-of-argument family and the trivial family
//! `g⁻¹ũ`.

use std::collections::HashMap;
use std::fmt;

use nalgebra::DMatrix;
use num_complex::Complex64;
use num_rational::BigRational;
use num_traits::{One, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{GzError, Result};
use crate::poisson::canonical::canonical_gradient;
use crate::poisson::{bracket, canonical_bracket, CanonicalPoint, GenKind, Generator, PoissonPoly, Var};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FamilyKind {
    GzPrincipal,
    GzCorner,
    MfShift,
    Trivial,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Side {
    Left,
    Right,
    Both,
}

/// Which momentum matrix a minor is taken of.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Momentum {
    U,
    UTilde,
}

impl Momentum {
    fn kind(self) -> GenKind {
        match self {
            Momentum::U => GenKind::U,
            Momentum::UTilde => GenKind::UTilde,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FamilySpec {
    pub kind: FamilyKind,
    pub n: usize,
    pub side: Side,
    /// Exact rational shift matrix, row-major, rendered as `"p/q"` strings.
    #[serde(skip_serializing_if = "Option::is_none", default, with = "rational_matrix")]
    pub shift_matrix: Option<Vec<Vec<BigRational>>>,
}

impl FamilySpec {
    pub fn new(kind: FamilyKind, n: usize, side: Side) -> Self {
        Self { kind, n, side, shift_matrix: None }
    }

    pub fn shift(n: usize, side: Side, a: Vec<Vec<BigRational>>) -> Self {
        Self { kind: FamilyKind::MfShift, n, side, shift_matrix: Some(a) }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(GzError::InvalidSize(0));
        }
        match (&self.kind, &self.shift_matrix) {
            (FamilyKind::MfShift, None) => Err(GzError::InvalidSpec("shift family needs a shift matrix".into())),
            (FamilyKind::MfShift, Some(a)) => {
                if a.len() != self.n || a.iter().any(|r| r.len() != self.n) {
                    return Err(GzError::InvalidSpec(format!("shift matrix must be {0}x{0}", self.n)));
                }
                Ok(())
            }
            (_, Some(_)) => Err(GzError::InvalidSpec("shift matrix given for a non-shift family".into())),
            _ => Ok(()),
        }
    }
}

mod rational_matrix {
    use num_rational::BigRational;
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(m: &Option<Vec<Vec<BigRational>>>, s: S) -> Result<S::Ok, S::Error> {
        let rows: Option<Vec<Vec<String>>> =
            m.as_ref().map(|m| m.iter().map(|r| r.iter().map(|q| q.to_string()).collect()).collect());
        serde::Serialize::serialize(&rows, s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<Vec<Vec<BigRational>>>, D::Error> {
        use serde::de::Error;
        let rows: Option<Vec<Vec<String>>> = Option::deserialize(d)?;
        rows.map(|rows| {
            rows.into_iter()
                .map(|r| r.into_iter().map(|q| q.parse::<BigRational>().map_err(D::Error::custom)).collect())
                .collect()
        })
        .transpose()
    }
}

/// Label of a family member.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Label {
    /// Coefficient of `lambda^power` in the size-`k` minor of `lambda - momentum`.
    Minor { momentum: Momentum, k: usize, power: u32 },
    /// Coefficient of `lambda^lambda_power mu^mu_power` in `det(x - mu A - lambda)`.
    Shift { momentum: Momentum, lambda_power: u32, mu_power: u32 },
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let side = |m: &Momentum| match m {
            Momentum::U => "L",
            Momentum::UTilde => "R",
        };
        match self {
            Label::Minor { momentum, k, power } => write!(f, "I{}[{k}]@lambda^{power}", side(momentum)),
            Label::Shift { momentum, lambda_power, mu_power } => {
                write!(f, "IA{}@lambda^{lambda_power}mu^{mu_power}", side(momentum))
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LabeledPoly {
    pub label: Label,
    pub poly: PoissonPoly,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CommutingFamily {
    pub meta: FamilySpec,
    /// Empty for the trivial family, whose members are rational in `g`.
    pub generators: Vec<LabeledPoly>,
}

impl CommutingFamily {
    pub fn is_numeric_only(&self) -> bool {
        self.meta.kind == FamilyKind::Trivial
    }
}

/// Determinant of a square matrix of polynomials by Laplace expansion along
/// rows with memoized sub-minors over column subsets.
pub fn poly_det(n: usize, entries: &[Vec<PoissonPoly>]) -> PoissonPoly {
    let k = entries.len();
    if k == 0 {
        return PoissonPoly::one(n);
    }
    assert!(k <= 30, "minor too large for bitmask expansion");
    let mut memo: HashMap<u32, PoissonPoly> = HashMap::new();
    det_rec(n, entries, 0, (1u32 << k) - 1, &mut memo)
}

fn det_rec(
    n: usize,
    m: &[Vec<PoissonPoly>],
    row: usize,
    cols: u32,
    memo: &mut HashMap<u32, PoissonPoly>,
) -> PoissonPoly {
    if cols == 0 {
        return PoissonPoly::one(n);
    }
    if let Some(v) = memo.get(&cols) {
        return v.clone();
    }
    let mut acc = PoissonPoly::zero(n);
    let mut pos = 0;
    for c in 0..m.len() {
        if cols & (1 << c) == 0 {
            continue;
        }
        if !m[row][c].is_zero() {
            let sub = det_rec(n, m, row + 1, cols & !(1 << c), memo);
            let term = &m[row][c] * &sub;
            acc = if pos % 2 == 0 { &acc + &term } else { &acc - &term };
        }
        pos += 1;
    }
    memo.insert(cols, acc.clone());
    acc
}

/// Size-`k` minor of `lambda - X` (`X = u` or `ũ`) as a polynomial in `lambda`.
///
/// Principal minors use rows and columns `1..k`; corner minors use rows
/// `N-k+1..N` and columns `1..k`, with `lambda` only where row equals column.
pub fn char_minor(n: usize, momentum: Momentum, k: usize, corner: bool) -> Result<PoissonPoly> {
    if n == 0 {
        return Err(GzError::InvalidSize(0));
    }
    if k == 0 || k > n {
        return Err(GzError::InvalidSpec(format!("minor size {k} outside 1..={n}")));
    }
    let rows: Vec<usize> = if corner { (n - k + 1..=n).collect() } else { (1..=k).collect() };
    let cols: Vec<usize> = (1..=k).collect();
    let entries: Vec<Vec<PoissonPoly>> = rows
        .iter()
        .map(|&r| {
            cols.iter()
                .map(|&c| {
                    let x = PoissonPoly::gen(n, Generator::new(momentum.kind(), r, c));
                    if r == c {
                        &PoissonPoly::lambda(n) - &x
                    } else {
                        -x
                    }
                })
                .collect()
        })
        .collect();
    Ok(poly_det(n, &entries))
}

fn minor_coefficients(n: usize, momentum: Momentum, k: usize, corner: bool, out: &mut Vec<LabeledPoly>) -> Result<()> {
    let m = char_minor(n, momentum, k, corner)?;
    for power in 0..=m.degree_in(Var::Lambda) {
        let c = m.coefficient(Var::Lambda, power);
        if !c.is_constant() {
            out.push(LabeledPoly { label: Label::Minor { momentum, k, power }, poly: c });
        }
    }
    Ok(())
}

/// `det(X - mu A - lambda)` for `X = u` or `ũ`.
pub fn shift_determinant(n: usize, momentum: Momentum, a: &[Vec<BigRational>]) -> PoissonPoly {
    let entries: Vec<Vec<PoissonPoly>> = (1..=n)
        .map(|r| {
            (1..=n)
                .map(|c| {
                    let mut e = PoissonPoly::gen(n, Generator::new(momentum.kind(), r, c));
                    e = &e - &PoissonPoly::mu(n).scale(&a[r - 1][c - 1]);
                    if r == c {
                        e = &e - &PoissonPoly::lambda(n);
                    }
                    e
                })
                .collect()
        })
        .collect();
    poly_det(n, &entries)
}

fn sides(side: Side) -> &'static [Momentum] {
    match side {
        Side::Left => &[Momentum::U],
        Side::Right => &[Momentum::UTilde],
        Side::Both => &[Momentum::U, Momentum::UTilde],
    }
}

/// Builds all non-constant coefficients of the family.
///
/// For the minor families, `Left` gives the `u`-minors `k = 1..N`, `Right` the
/// `ũ`-minors `k = 1..N`, and `Both` the `u`- and `ũ`-minors `k = 1..N-1`
/// together with the full `det(lambda - u)`.
pub fn build_family(spec: &FamilySpec) -> Result<CommutingFamily> {
    spec.validate()?;
    let n = spec.n;
    let mut generators = Vec::new();
    match spec.kind {
        FamilyKind::GzPrincipal | FamilyKind::GzCorner => {
            let corner = spec.kind == FamilyKind::GzCorner;
            match spec.side {
                Side::Left | Side::Right => {
                    for k in 1..=n {
                        minor_coefficients(n, sides(spec.side)[0], k, corner, &mut generators)?;
                    }
                }
                Side::Both => {
                    for &m in sides(Side::Both) {
                        for k in 1..n {
                            minor_coefficients(n, m, k, corner, &mut generators)?;
                        }
                    }
                    minor_coefficients(n, Momentum::U, n, corner, &mut generators)?;
                }
            }
        }
        FamilyKind::MfShift => {
            let a = spec.shift_matrix.as_ref().expect("validated");
            for &m in sides(spec.side) {
                let det = shift_determinant(n, m, a);
                for lp in 0..=det.degree_in(Var::Lambda) {
                    let by_lambda = det.coefficient(Var::Lambda, lp);
                    for mp in 0..=by_lambda.degree_in(Var::Mu) {
                        let c = by_lambda.coefficient(Var::Mu, mp);
                        if !c.is_constant() {
                            generators.push(LabeledPoly {
                                label: Label::Shift { momentum: m, lambda_power: lp, mu_power: mp },
                                poly: c,
                            });
                        }
                    }
                }
            }
        }
        FamilyKind::Trivial => {}
    }
    Ok(CommutingFamily { meta: spec.clone(), generators })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Ok,
    Violation,
}

#[derive(Debug, Clone, Serialize)]
pub struct Witness {
    pub left: String,
    pub right: String,
    /// Nonzero bracket as `(coefficient, monomial)` pairs.
    pub terms: Vec<(String, String)>,
}

#[derive(Debug, Clone, Serialize)]
pub struct CommuteReport {
    pub family: FamilySpec,
    pub generators: usize,
    pub pairs: usize,
    pub max_nonzero_terms: usize,
    pub violations: usize,
    pub status: Status,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub witness: Option<Witness>,
}

/// Brackets every unordered pair of family members exactly.
pub fn verify_commutes(fam: &CommutingFamily) -> CommuteReport {
    let gens = &fam.generators;
    let mut pairs = 0;
    let mut max_nonzero_terms = 0;
    let mut violations = 0;
    let mut witness = None;
    for a in 0..gens.len() {
        for b in a + 1..gens.len() {
            pairs += 1;
            let br = bracket(&gens[a].poly, &gens[b].poly).expect("family members share the ambient size");
            if !br.is_zero() {
                violations += 1;
                max_nonzero_terms = max_nonzero_terms.max(br.len());
                if witness.is_none() {
                    witness = Some(Witness {
                        left: gens[a].label.to_string(),
                        right: gens[b].label.to_string(),
                        terms: br.term_list(),
                    });
                }
            }
        }
    }
    CommuteReport {
        family: fam.meta.clone(),
        generators: gens.len(),
        pairs,
        max_nonzero_terms,
        violations,
        status: if violations == 0 { Status::Ok } else { Status::Violation },
        witness,
    }
}

/// `I^u_{ij} = Σ_m (g⁻¹)_{im} ũ^{mj}` at a point.
pub fn trivial_member(pt: &CanonicalPoint, i: usize, j: usize) -> Complex64 {
    let ginv = pt
        .g()
        .clone()
        .try_inverse()
        .unwrap_or_else(|| DMatrix::from_element(pt.n(), pt.n(), Complex64::new(f64::NAN, 0.0)));
    (ginv * pt.utilde())[(i, j)]
}

#[derive(Debug, Clone, Serialize)]
pub struct TrivialReport {
    pub n: usize,
    pub points: usize,
    pub pairs_per_point: usize,
    pub max_abs_bracket: f64,
    pub tolerance: f64,
    pub status: Status,
}

pub const TRIVIAL_TOLERANCE: f64 = 1e-5;

/// Finite-difference check that the `N²` functions `g⁻¹ũ` pairwise commute.
pub fn verify_trivial_numeric(n: usize, pt_count: usize, seed: u64) -> Result<TrivialReport> {
    if n == 0 {
        return Err(GzError::InvalidSize(0));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let idx: Vec<(usize, usize)> = (0..n).flat_map(|i| (0..n).map(move |j| (i, j))).collect();
    let mut worst = 0.0f64;
    let mut pairs_per_point = 0;
    for _ in 0..pt_count {
        let pt = CanonicalPoint::random(n, &mut rng);
        pairs_per_point = 0;
        for a in 0..idx.len() {
            for b in a..idx.len() {
                let ((i, j), (k, l)) = (idx[a], idx[b]);
                let v = canonical_bracket(|q| trivial_member(q, i, j), |q| trivial_member(q, k, l), &pt)?;
                worst = worst.max(v.norm());
                pairs_per_point += 1;
            }
        }
    }
    Ok(TrivialReport {
        n,
        points: pt_count,
        pairs_per_point,
        max_abs_bracket: worst,
        tolerance: TRIVIAL_TOLERANCE,
        status: if worst < TRIVIAL_TOLERANCE { Status::Ok } else { Status::Violation },
    })
}

pub const RANK_RELATIVE_THRESHOLD: f64 = 1e-8;

/// Numerical rank of the Jacobian of all members with respect to the `2N²`
/// canonical coordinates.
pub fn independence_rank(fam: &CommutingFamily, pt: &CanonicalPoint) -> Result<usize> {
    if fam.meta.n != pt.n() {
        return Err(GzError::AmbientMismatch { left: fam.meta.n, right: pt.n() });
    }
    let z = Complex64::new(0.0, 0.0);
    let rows: Vec<Vec<Complex64>> = fam.generators.iter().map(|g| canonical_gradient(&g.poly, pt, z, z)).collect();
    Ok(numerical_rank(&rows, RANK_RELATIVE_THRESHOLD))
}

pub fn numerical_rank(rows: &[Vec<Complex64>], rel: f64) -> usize {
    if rows.is_empty() {
        return 0;
    }
    let m = DMatrix::from_fn(rows.len(), rows[0].len(), |i, j| rows[i][j]);
    let sv = m.svd(false, false).singular_values;
    let top = sv.iter().cloned().fold(0.0, f64::max);
    if top == 0.0 {
        return 0;
    }
    sv.iter().filter(|&&s| s > rel * top).count()
}

/// Random `N×N` matrix with small rational entries `p/q`, `|p| ≤ 5`, `1 ≤ q ≤ 4`.
pub fn random_rational_matrix<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Vec<Vec<BigRational>> {
    (0..n)
        .map(|_| {
            (0..n)
                .map(|_| {
                    let p: i64 = rng.random_range(-5..=5);
                    let q: i64 = rng.random_range(1..=4);
                    crate::poisson::rat(p, q)
                })
                .collect()
        })
        .collect()
}

pub fn rational_identity(n: usize) -> Vec<Vec<BigRational>> {
    (0..n).map(|i| (0..n).map(|j| if i == j { BigRational::one() } else { BigRational::zero() }).collect()).collect()
}
