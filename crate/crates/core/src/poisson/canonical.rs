//! Numerical realization of T*GL(N) in canonical coordinates `(g, p)` with
//! `{g_{ij}, p_{kl}} = δ_{ik} δ_{jl}`.
//!
//! The momentum maps are
//!
//! ```text
//! u^{ij} = −Σ_k g_{ki} p_{kj}        (u = −gᵀp)
//! ũ^{ij} = −Σ_l g_{il} p_{jl}        (ũ = −g pᵀ)
//! ```
//!
//! so that `ũ = g uᵀ g⁻¹` as matrices. These are the signs and index
//! placements under which every relation in [`super::bracket`] holds.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::poly::{GenKind, PoissonPoly, Var};
use crate::error::{GzError, Result};

pub type CMatrix = DMatrix<Complex64>;

pub const DEFAULT_DET_THRESHOLD: f64 = 1e-8;
pub const DEFAULT_FD_STEP: f64 = 1e-6;

/// A point of T*GL(N): invertible `g` and conjugate momenta `p`.
#[derive(Debug, Clone, PartialEq)]
pub struct CanonicalPoint {
    g: CMatrix,
    p: CMatrix,
}

/// One of the `2N²` canonical coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Coord {
    G(usize, usize),
    P(usize, usize),
}

impl CanonicalPoint {
    pub fn new(g: CMatrix, p: CMatrix) -> Result<Self> {
        Self::with_threshold(g, p, DEFAULT_DET_THRESHOLD)
    }

    pub fn with_threshold(g: CMatrix, p: CMatrix, det_threshold: f64) -> Result<Self> {
        let n = g.nrows();
        if n == 0 || !g.is_square() || p.shape() != g.shape() {
            return Err(GzError::InvalidSize(n));
        }
        let det = g.clone().determinant();
        if det.norm().is_nan() || det.norm() < det_threshold {
            return Err(GzError::Degenerate(format!("|det g| = {:e}", det.norm())));
        }
        Ok(Self { g, p })
    }

    /// Standard complex Gaussian `g` and `p`, resampling `g` when nearly singular.
    pub fn random<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Self {
        loop {
            let g = random_matrix(n, rng);
            let p = random_matrix(n, rng);
            if let Ok(pt) = Self::new(g, p) {
                if pt.g.clone().determinant().norm() > 1e-3 {
                    return pt;
                }
            }
        }
    }

    pub fn n(&self) -> usize {
        self.g.nrows()
    }

    pub fn g(&self) -> &CMatrix {
        &self.g
    }

    pub fn p(&self) -> &CMatrix {
        &self.p
    }

    pub fn coord(&self, c: Coord) -> Complex64 {
        match c {
            Coord::G(i, j) => self.g[(i, j)],
            Coord::P(i, j) => self.p[(i, j)],
        }
    }

    /// Copy with one coordinate shifted by `delta` (no determinant check).
    pub fn shifted(&self, c: Coord, delta: Complex64) -> Self {
        let mut out = self.clone();
        match c {
            Coord::G(i, j) => out.g[(i, j)] += delta,
            Coord::P(i, j) => out.p[(i, j)] += delta,
        }
        out
    }

    pub fn coords(&self) -> Vec<Coord> {
        let n = self.n();
        let mut out = Vec::with_capacity(2 * n * n);
        for i in 0..n {
            for j in 0..n {
                out.push(Coord::G(i, j));
            }
        }
        for i in 0..n {
            for j in 0..n {
                out.push(Coord::P(i, j));
            }
        }
        out
    }

    /// Matrix `U` with `U[i][j] = u^{ij}`.
    pub fn u(&self) -> CMatrix {
        -(self.g.transpose() * &self.p)
    }

    /// Matrix `Ũ` with `Ũ[i][j] = ũ^{ij}`.
    pub fn utilde(&self) -> CMatrix {
        -(&self.g * self.p.transpose())
    }

    /// `‖ũ − g uᵀ g⁻¹‖` (Frobenius).
    pub fn momentum_identity_residual(&self) -> f64 {
        let ginv = self.g.clone().try_inverse().expect("g invertible");
        (self.utilde() - &self.g * self.u().transpose() * ginv).norm()
    }

    /// Values of every generator at this point.
    pub fn values(&self) -> PointValues {
        PointValues { u: self.u(), ut: self.utilde(), g: self.g.clone() }
    }
}

pub fn random_matrix<R: Rng + ?Sized>(n: usize, rng: &mut R) -> CMatrix {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    CMatrix::from_fn(n, n, |_, _| {
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        Complex64::new(re * s, im * s)
    })
}

/// Generator values at a point, used for repeated evaluation.
#[derive(Debug, Clone)]
pub struct PointValues {
    pub u: CMatrix,
    pub ut: CMatrix,
    pub g: CMatrix,
}

impl PointValues {
    pub fn value(&self, v: Var, lambda: Complex64, mu: Complex64) -> Complex64 {
        match v {
            Var::Lambda => lambda,
            Var::Mu => mu,
            Var::Gen(gen) => {
                let (i, j) = (gen.row() - 1, gen.col() - 1);
                match gen.kind {
                    GenKind::U => self.u[(i, j)],
                    GenKind::UTilde => self.ut[(i, j)],
                    GenKind::G => self.g[(i, j)],
                }
            }
        }
    }
}

/// Evaluates `poly` at `pt` with the formal parameters set to `lambda`, `mu`.
pub fn evaluate(poly: &PoissonPoly, pt: &CanonicalPoint, lambda: Complex64, mu: Complex64) -> Result<Complex64> {
    if poly.ambient_size() != pt.n() {
        return Err(GzError::AmbientMismatch { left: poly.ambient_size(), right: pt.n() });
    }
    let vals = pt.values();
    Ok(evaluate_at(poly, &vals, lambda, mu))
}

pub fn evaluate_at(poly: &PoissonPoly, vals: &PointValues, lambda: Complex64, mu: Complex64) -> Complex64 {
    poly.eval_with(|v| vals.value(v, lambda, mu))
}

/// Central-difference partial derivative of `f` in coordinate `c`.
///
/// Functions are holomorphic in the coordinates, so a real step suffices.
pub fn partial<F>(f: &F, pt: &CanonicalPoint, c: Coord, step: f64) -> Result<Complex64>
where
    F: Fn(&CanonicalPoint) -> Complex64,
{
    let h = step * pt.coord(c).norm().max(1.0);
    let fp = f(&pt.shifted(c, Complex64::new(h, 0.0)));
    let fm = f(&pt.shifted(c, Complex64::new(-h, 0.0)));
    let d = (fp - fm) / (2.0 * h);
    if !d.re.is_finite() || !d.im.is_finite() {
        return Err(GzError::NonFinite(format!("{c:?}")));
    }
    Ok(d)
}

/// Brute-force canonical bracket
/// `{f, h} = Σ_{ij} (∂f/∂g_{ij} ∂h/∂p_{ij} − ∂f/∂p_{ij} ∂h/∂g_{ij})`.
pub fn canonical_bracket<F, H>(f: F, h: H, pt: &CanonicalPoint) -> Result<Complex64>
where
    F: Fn(&CanonicalPoint) -> Complex64,
    H: Fn(&CanonicalPoint) -> Complex64,
{
    canonical_bracket_with_step(f, h, pt, DEFAULT_FD_STEP)
}

pub fn canonical_bracket_with_step<F, H>(f: F, h: H, pt: &CanonicalPoint, step: f64) -> Result<Complex64>
where
    F: Fn(&CanonicalPoint) -> Complex64,
    H: Fn(&CanonicalPoint) -> Complex64,
{
    let n = pt.n();
    let mut acc = Complex64::new(0.0, 0.0);
    for i in 0..n {
        for j in 0..n {
            let (gc, pc) = (Coord::G(i, j), Coord::P(i, j));
            let fg = partial(&f, pt, gc, step)?;
            let fp = partial(&f, pt, pc, step)?;
            let hg = partial(&h, pt, gc, step)?;
            let hp = partial(&h, pt, pc, step)?;
            acc += fg * hp - fp * hg;
        }
    }
    Ok(acc)
}

/// Analytic gradient of a polynomial with respect to all `2N²` canonical
/// coordinates (ordered as [`CanonicalPoint::coords`]).
pub fn canonical_gradient(poly: &PoissonPoly, pt: &CanonicalPoint, lambda: Complex64, mu: Complex64) -> Vec<Complex64> {
    let n = pt.n();
    let vals = pt.values();
    let (g, p) = (pt.g(), pt.p());
    let mut dg = CMatrix::zeros(n, n);
    let mut dp = CMatrix::zeros(n, n);
    for v in poly.variables() {
        let Var::Gen(gen) = v else { continue };
        let d = evaluate_at(&poly.derivative(v), &vals, lambda, mu);
        let (i, j) = (gen.row() - 1, gen.col() - 1);
        match gen.kind {
            // u^{ij} = −Σ_k g_{ki} p_{kj}
            GenKind::U => {
                for a in 0..n {
                    dg[(a, i)] -= d * p[(a, j)];
                    dp[(a, j)] -= d * g[(a, i)];
                }
            }
            // ũ^{ij} = −Σ_l g_{il} p_{jl}
            GenKind::UTilde => {
                for b in 0..n {
                    dg[(i, b)] -= d * p[(j, b)];
                    dp[(j, b)] -= d * g[(i, b)];
                }
            }
            GenKind::G => dg[(i, j)] += d,
        }
    }
    let mut out = Vec::with_capacity(2 * n * n);
    for i in 0..n {
        for j in 0..n {
            out.push(dg[(i, j)]);
        }
    }
    for i in 0..n {
        for j in 0..n {
            out.push(dp[(i, j)]);
        }
    }
    out
}

#[derive(Serialize, Deserialize)]
struct PointJson {
    n: usize,
    g: Vec<[f64; 2]>,
    p: Vec<[f64; 2]>,
}

pub(crate) fn flatten(m: &CMatrix) -> Vec<[f64; 2]> {
    let mut out = Vec::with_capacity(m.len());
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            out.push([m[(i, j)].re, m[(i, j)].im]);
        }
    }
    out
}

pub(crate) fn unflatten(n: usize, data: &[[f64; 2]]) -> Result<CMatrix> {
    if data.len() != n * n {
        return Err(GzError::InvalidSpec(format!("expected {} entries, found {}", n * n, data.len())));
    }
    Ok(CMatrix::from_fn(n, n, |i, j| Complex64::new(data[i * n + j][0], data[i * n + j][1])))
}

impl Serialize for CanonicalPoint {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        PointJson { n: self.n(), g: flatten(&self.g), p: flatten(&self.p) }.serialize(s)
    }
}

impl<'de> Deserialize<'de> for CanonicalPoint {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error;
        let raw = PointJson::deserialize(d)?;
        let g = unflatten(raw.n, &raw.g).map_err(D::Error::custom)?;
        let p = unflatten(raw.n, &raw.p).map_err(D::Error::custom)?;
        CanonicalPoint::new(g, p).map_err(D::Error::custom)
    }
}
