//! Poisson bracket on T*GL(N), extended from the generator table by
//! bilinearity and the Leibniz rule.

use num_bigint::BigInt;
use num_rational::BigRational;

use super::poly::{GenKind, Generator, Monomial, PoissonPoly, Var};
use crate::error::Result;

/// A signed linear combination of at most two generators.
pub type GenCombo = Vec<(i64, Generator)>;

fn delta(a: u8, b: u8) -> bool {
    a == b
}

/// `{x, y}` for two generators.
///
/// Both copies of `u` satisfy the `gl_N` relation
/// `{x^{ij}, x^{kl}} = δ_{jk} x^{il} − δ_{li} x^{kj}` and commute with each other.
/// The action on `g` is `{u^{ij}, g_{kl}} = δ_{jl} g_{ki}` and
/// `{ũ^{ij}, g_{kl}} = δ_{jk} g_{il}`; the first is the classical limit of
/// `∇_L^{ij} = Σ_k g_{ki} ∂/∂g_{kj}` and is the only index placement that keeps
/// the Jacobi identity (see [`super::relations`]).
pub fn generator_bracket(x: Generator, y: Generator) -> GenCombo {
    use GenKind::*;
    let (i, j, k, l) = (x.row, x.col, y.row, y.col);
    let mut out = GenCombo::new();
    match (x.kind, y.kind) {
        (U, U) | (UTilde, UTilde) => {
            if delta(j, k) {
                out.push((1, Generator { kind: x.kind, row: i, col: l }));
            }
            if delta(l, i) {
                out.push((-1, Generator { kind: x.kind, row: k, col: j }));
            }
        }
        (U, UTilde) | (UTilde, U) | (G, G) => {}
        (U, G) => {
            if delta(j, l) {
                out.push((1, Generator::g(k as usize, i as usize)));
            }
        }
        (UTilde, G) => {
            if delta(j, k) {
                out.push((1, Generator::g(i as usize, l as usize)));
            }
        }
        (G, U) | (G, UTilde) => {
            return generator_bracket(y, x).into_iter().map(|(c, g)| (-c, g)).collect();
        }
    }
    // δ_{jk} and δ_{li} hitting the same generator (i = j = k = l) cancels
    if out.len() == 2 && out[0].1 == out[1].1 {
        out.clear();
    }
    out
}

/// Exact Poisson bracket `{a, b}`.
pub fn bracket(a: &PoissonPoly, b: &PoissonPoly) -> Result<PoissonPoly> {
    bracket_with(a, b, generator_bracket)
}

/// Leibniz extension of an arbitrary antisymmetric generator table.
pub fn bracket_with<T>(a: &PoissonPoly, b: &PoissonPoly, table: T) -> Result<PoissonPoly>
where
    T: Fn(Generator, Generator) -> GenCombo,
{
    let n = a.ambient_size();
    if n != b.ambient_size() {
        return Err(crate::GzError::AmbientMismatch { left: n, right: b.ambient_size() });
    }
    let mut out = PoissonPoly::zero(n);
    for (ma, ca) in a.terms() {
        for (mb, cb) in b.terms() {
            let coeff = ca * cb;
            for &(va, _) in ma.powers() {
                let Var::Gen(ga) = va else { continue };
                let (ea, ra) = ma.remove_one(va).expect("variable present");
                for &(vb, _) in mb.powers() {
                    let Var::Gen(gb) = vb else { continue };
                    let combo = table(ga, gb);
                    if combo.is_empty() {
                        continue;
                    }
                    let (eb, rb) = mb.remove_one(vb).expect("variable present");
                    let rest = ra.mul(&rb);
                    let mult = &coeff * BigRational::from_integer(BigInt::from(ea as i64 * eb as i64));
                    for (s, g) in combo {
                        let m = rest.mul(&Monomial::var(Var::Gen(g)));
                        out.add_term(m, &mult * BigRational::from_integer(BigInt::from(s)));
                    }
                }
            }
        }
    }
    Ok(out)
}

/// Bracket of two generators as a polynomial.
pub fn generator_bracket_poly(n: usize, x: Generator, y: Generator) -> PoissonPoly {
    let mut out = PoissonPoly::zero(n);
    for (s, g) in generator_bracket(x, y) {
        out.add_term(Monomial::var(Var::Gen(g)), BigRational::from_integer(BigInt::from(s)));
    }
    out
}
