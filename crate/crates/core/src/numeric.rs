//! Dense complex polynomials in one variable, characteristic minors of
//! complex matrices and polynomial root finding.

use std::collections::HashMap;
use std::ops::{Add, Mul, Neg, Sub};

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::poisson::CMatrix;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);

/// Polynomial with complex coefficients, stored lowest degree first.
#[derive(Debug, Clone, PartialEq)]
pub struct CPoly {
    coeffs: Vec<Complex64>,
}

impl CPoly {
    pub fn new(mut coeffs: Vec<Complex64>) -> Self {
        while coeffs.len() > 1 && coeffs.last() == Some(&ZERO) {
            coeffs.pop();
        }
        if coeffs.is_empty() {
            coeffs.push(ZERO);
        }
        Self { coeffs }
    }

    pub fn zero() -> Self {
        Self::new(vec![])
    }

    pub fn constant(c: Complex64) -> Self {
        Self::new(vec![c])
    }

    /// `lambda - a`
    pub fn linear(a: Complex64) -> Self {
        Self::new(vec![-a, ONE])
    }

    pub fn from_roots(roots: &[Complex64]) -> Self {
        roots.iter().fold(Self::constant(ONE), |acc, &r| &acc * &Self::linear(r))
    }

    pub fn coeffs(&self) -> &[Complex64] {
        &self.coeffs
    }

    /// Coefficient of `lambda^k` (zero beyond the degree).
    pub fn coeff(&self, k: usize) -> Complex64 {
        self.coeffs.get(k).copied().unwrap_or(ZERO)
    }

    pub fn degree(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn leading(&self) -> Complex64 {
        *self.coeffs.last().expect("nonempty")
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.len() == 1 && self.coeffs[0] == ZERO
    }

    pub fn eval(&self, z: Complex64) -> Complex64 {
        self.coeffs.iter().rev().fold(ZERO, |acc, &c| acc * z + c)
    }

    pub fn derivative(&self) -> Self {
        Self::new(self.coeffs.iter().enumerate().skip(1).map(|(k, &c)| c * k as f64).collect())
    }

    pub fn scale(&self, s: Complex64) -> Self {
        Self::new(self.coeffs.iter().map(|&c| c * s).collect())
    }

    /// Degree, ignoring leading coefficients below `tol` in magnitude.
    pub fn effective_degree(&self, tol: f64) -> usize {
        let mut d = self.degree();
        while d > 0 && self.coeffs[d].norm() <= tol {
            d -= 1;
        }
        d
    }

    /// All roots, from companion-matrix eigenvalues polished by Newton
    /// iteration, with an Aberth iteration as fallback.
    pub fn roots(&self) -> Vec<Complex64> {
        let d = self.degree();
        if d == 0 {
            return vec![];
        }
        let lead = self.leading();
        let monic: Vec<Complex64> = self.coeffs.iter().map(|&c| c / lead).collect();
        if d == 1 {
            return vec![-monic[0]];
        }
        let companion = DMatrix::from_fn(d, d, |i, j| {
            if j == d - 1 {
                -monic[i]
            } else if i == j + 1 {
                ONE
            } else {
                ZERO
            }
        });
        let eig = companion.eigenvalues().map(|v| v.iter().copied().collect::<Vec<_>>());
        let mut roots = match eig {
            Some(r) if r.len() == d && r.iter().all(|z| z.is_finite()) => r,
            _ => self.aberth(),
        };
        for r in roots.iter_mut() {
            *r = self.polish(*r);
        }
        roots
    }

    fn polish(&self, mut z: Complex64) -> Complex64 {
        let dp = self.derivative();
        for _ in 0..8 {
            let f = self.eval(z);
            let fp = dp.eval(z);
            if fp == ZERO {
                break;
            }
            let step = f / fp;
            let next = z - step;
            if !next.is_finite() || self.eval(next).norm() > f.norm() {
                break;
            }
            z = next;
            if step.norm() <= 1e-16 * z.norm().max(1.0) {
                break;
            }
        }
        z
    }

    fn aberth(&self) -> Vec<Complex64> {
        let d = self.degree();
        let dp = self.derivative();
        let radius = 1.0 + self.coeffs.iter().take(d).map(|c| (c / self.leading()).norm()).fold(0.0, f64::max);
        let mut z: Vec<Complex64> = (0..d)
            .map(|k| Complex64::from_polar(radius, 2.0 * std::f64::consts::PI * (k as f64 + 0.25) / d as f64))
            .collect();
        for _ in 0..500 {
            let mut moved = 0.0f64;
            for i in 0..d {
                let ratio = self.eval(z[i]) / dp.eval(z[i]);
                let repulsion: Complex64 = (0..d).filter(|&j| j != i).map(|j| ONE / (z[i] - z[j])).sum();
                let w = ratio / (ONE - ratio * repulsion);
                if w.is_finite() {
                    z[i] -= w;
                    moved = moved.max(w.norm());
                }
            }
            if moved < 1e-15 * radius {
                break;
            }
        }
        z
    }
}

impl Add for &CPoly {
    type Output = CPoly;
    fn add(self, o: &CPoly) -> CPoly {
        let n = self.coeffs.len().max(o.coeffs.len());
        CPoly::new((0..n).map(|k| self.coeff(k) + o.coeff(k)).collect())
    }
}

impl Sub for &CPoly {
    type Output = CPoly;
    fn sub(self, o: &CPoly) -> CPoly {
        let n = self.coeffs.len().max(o.coeffs.len());
        CPoly::new((0..n).map(|k| self.coeff(k) - o.coeff(k)).collect())
    }
}

impl Mul for &CPoly {
    type Output = CPoly;
    fn mul(self, o: &CPoly) -> CPoly {
        let mut out = vec![ZERO; self.coeffs.len() + o.coeffs.len() - 1];
        for (i, a) in self.coeffs.iter().enumerate() {
            for (j, b) in o.coeffs.iter().enumerate() {
                out[i + j] += a * b;
            }
        }
        CPoly::new(out)
    }
}

impl Neg for &CPoly {
    type Output = CPoly;
    fn neg(self) -> CPoly {
        self.scale(-ONE)
    }
}

/// Determinant of the submatrix of `lambda - u` on the given (1-based) rows and
/// columns, with `lambda` entering only where the row index equals the column
/// index.
pub fn char_minor_poly(u: &CMatrix, rows: &[usize], cols: &[usize]) -> CPoly {
    assert_eq!(rows.len(), cols.len());
    let entries: Vec<Vec<CPoly>> = rows
        .iter()
        .map(|&r| {
            cols.iter()
                .map(|&c| {
                    let x = u[(r - 1, c - 1)];
                    if r == c {
                        CPoly::linear(x)
                    } else {
                        CPoly::constant(-x)
                    }
                })
                .collect()
        })
        .collect();
    poly_matrix_det(&entries)
}

fn poly_matrix_det(m: &[Vec<CPoly>]) -> CPoly {
    fn rec(m: &[Vec<CPoly>], row: usize, cols: u32, memo: &mut HashMap<u32, CPoly>) -> CPoly {
        if cols == 0 {
            return CPoly::constant(ONE);
        }
        if let Some(v) = memo.get(&cols) {
            return v.clone();
        }
        let mut acc = CPoly::zero();
        let mut pos = 0;
        for c in 0..m.len() {
            if cols & (1 << c) == 0 {
                continue;
            }
            let term = &m[row][c] * &rec(m, row + 1, cols & !(1 << c), memo);
            acc = if pos % 2 == 0 { &acc + &term } else { &acc - &term };
            pos += 1;
        }
        memo.insert(cols, acc.clone());
        acc
    }
    rec(m, 0, (1u32 << m.len()) - 1, &mut HashMap::new())
}

/// `A_n(lambda)`, the n-th principal minor of `lambda - u` (monic of degree n).
pub fn principal_minor(u: &CMatrix, n: usize) -> CPoly {
    let idx: Vec<usize> = (1..=n).collect();
    char_minor_poly(u, &idx, &idx)
}

/// Matches `moved` to `base` by nearest neighbour. Returns `None` if the
/// matching is not a bijection.
pub fn match_nearest(base: &[Complex64], moved: &[Complex64]) -> Option<Vec<Complex64>> {
    if base.len() != moved.len() {
        return None;
    }
    let mut used = vec![false; moved.len()];
    let mut out = Vec::with_capacity(base.len());
    for b in base {
        let (k, _) = moved.iter().enumerate().map(|(k, m)| (k, (m - b).norm())).min_by(|x, y| x.1.total_cmp(&y.1))?;
        if used[k] {
            return None;
        }
        used[k] = true;
        out.push(moved[k]);
    }
    Some(out)
}

/// Smallest pairwise distance in a set (infinite for fewer than two points).
pub fn min_separation(points: &[Complex64]) -> f64 {
    let mut best = f64::INFINITY;
    for i in 0..points.len() {
        for j in i + 1..points.len() {
            best = best.min((points[i] - points[j]).norm());
        }
    }
    best
}

/// Smallest distance between two sets.
pub fn min_cross_distance(a: &[Complex64], b: &[Complex64]) -> f64 {
    a.iter().flat_map(|x| b.iter().map(move |y| (x - y).norm())).fold(f64::INFINITY, f64::min)
}

/// Sorts complex numbers by real part, then imaginary part.
pub fn sort_complex(v: &mut [Complex64]) {
    v.sort_by(|a, b| a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im)));
}

/// `z + 2πi m` closest to `reference`.
pub fn nearest_branch(z: Complex64, reference: Complex64) -> Complex64 {
    let two_pi = 2.0 * std::f64::consts::PI;
    let m = ((reference.im - z.im) / two_pi).round();
    Complex64::new(z.re, z.im + two_pi * m)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn roots_of_known_polynomial() {
        let want = [c(1.0, 0.0), c(-2.0, 0.5), c(0.3, -1.7), c(4.0, 2.0)];
        let p = CPoly::from_roots(&want);
        let mut got = p.roots();
        sort_complex(&mut got);
        let mut sorted = want.to_vec();
        sort_complex(&mut sorted);
        for (a, b) in got.iter().zip(&sorted) {
            assert!((a - b).norm() < 1e-12, "{a} vs {b}");
        }
    }

    #[test]
    fn aberth_fallback_agrees() {
        let want = [c(0.5, 0.5), c(-1.0, 0.0), c(2.0, -3.0)];
        let p = CPoly::from_roots(&want);
        let mut got: Vec<_> = p.aberth().into_iter().map(|z| p.polish(z)).collect();
        sort_complex(&mut got);
        let mut sorted = want.to_vec();
        sort_complex(&mut sorted);
        for (a, b) in got.iter().zip(&sorted) {
            assert!((a - b).norm() < 1e-10);
        }
    }

    #[test]
    fn principal_minor_matches_determinant() {
        let u = DMatrix::from_fn(3, 3, |i, j| c(i as f64 + 0.5 * j as f64, (i * j) as f64 - 1.0));
        let a3 = principal_minor(&u, 3);
        let lambda = c(0.7, -0.2);
        let direct = (DMatrix::from_diagonal_element(3, 3, lambda) - &u).determinant();
        assert!((a3.eval(lambda) - direct).norm() < 1e-12);
        assert_eq!(a3.degree(), 3);
        assert_eq!(a3.leading(), ONE);
    }

    #[test]
    fn nearest_matching() {
        let base = [c(0.0, 0.0), c(1.0, 0.0)];
        let moved = [c(1.01, 0.0), c(0.01, 0.0)];
        assert_eq!(match_nearest(&base, &moved).unwrap(), vec![moved[1], moved[0]]);
        assert!(match_nearest(&[c(0.0, 0.0), c(0.02, 0.0)], &[c(0.011, 0.0), c(5.0, 0.0)]).is_none());
    }

    #[test]
    fn branch_selection() {
        let z = c(0.0, 3.0);
        let r = nearest_branch(z, c(0.0, -3.0));
        assert!((r.im - (3.0 - 2.0 * std::f64::consts::PI)).abs() < 1e-15);
    }
}
