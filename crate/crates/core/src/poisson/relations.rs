//! Sweep over sign/transpose realizations of the momentum maps in canonical
//! coordinates, scoring each against the generator relations.
//!
//! The base candidates are `u₀ = gᵀp` and `ũ₀ = −p gᵀ`; a realization picks a
//! sign and optional transpose for each. No realization satisfies the action
//! `{u^{ij}, g_{kl}} = δ_{il} g_{kj}` together with the `gl_N` relation for
//! `u`, because the two are incompatible with the Jacobi identity; the
//! transposed action `δ_{jl} g_{ki}` is what the engine uses.

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::bracket::GenCombo;
use super::canonical::{canonical_bracket, CMatrix, CanonicalPoint};
use super::poly::{GenKind, Generator};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Relation {
    /// `{u^{ij}, u^{kl}} = δ_{jk} u^{il} − δ_{li} u^{kj}`
    UU,
    /// the same relation for `ũ`
    UtUt,
    /// `{u, ũ} = 0`
    UUt,
    /// `{u^{ij}, g_{kl}} = δ_{il} g_{kj}`
    UGRowAction,
    /// `{u^{ij}, g_{kl}} = δ_{jl} g_{ki}`
    UGColumnAction,
    /// `{ũ^{ij}, g_{kl}} = δ_{jk} g_{il}`
    UtG,
    /// `{g, g} = 0`
    GG,
}

impl Relation {
    pub const ALL: [Relation; 7] = [
        Relation::UU,
        Relation::UtUt,
        Relation::UUt,
        Relation::UGRowAction,
        Relation::UGColumnAction,
        Relation::UtG,
        Relation::GG,
    ];
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Realization {
    pub u_sign: i8,
    pub u_transpose: bool,
    pub ut_sign: i8,
    pub ut_transpose: bool,
}

impl Realization {
    /// The realization implemented by [`CanonicalPoint::u`] / [`CanonicalPoint::utilde`].
    pub const ADOPTED: Realization = Realization { u_sign: -1, u_transpose: false, ut_sign: 1, ut_transpose: true };

    pub fn all() -> Vec<Realization> {
        let mut out = Vec::with_capacity(16);
        for u_sign in [1, -1] {
            for u_transpose in [false, true] {
                for ut_sign in [1, -1] {
                    for ut_transpose in [false, true] {
                        out.push(Realization { u_sign, u_transpose, ut_sign, ut_transpose });
                    }
                }
            }
        }
        out
    }

    pub fn u(&self, pt: &CanonicalPoint) -> CMatrix {
        let base = pt.g().transpose() * pt.p();
        let m = if self.u_transpose { base.transpose() } else { base };
        m * Complex64::new(self.u_sign as f64, 0.0)
    }

    pub fn utilde(&self, pt: &CanonicalPoint) -> CMatrix {
        let base = -(pt.p() * pt.g().transpose());
        let m = if self.ut_transpose { base.transpose() } else { base };
        m * Complex64::new(self.ut_sign as f64, 0.0)
    }

    fn value(&self, pt: &CanonicalPoint, g: Generator) -> Complex64 {
        let (i, j) = (g.row() - 1, g.col() - 1);
        match g.kind {
            GenKind::U => self.u(pt)[(i, j)],
            GenKind::UTilde => self.utilde(pt)[(i, j)],
            GenKind::G => pt.g()[(i, j)],
        }
    }
}

/// Generator table using the row action `{u^{ij}, g_{kl}} = δ_{il} g_{kj}`
/// and otherwise identical to [`super::bracket::generator_bracket`].
pub fn row_action_table(x: Generator, y: Generator) -> GenCombo {
    match (x.kind, y.kind) {
        (GenKind::U, GenKind::G) => expected(Relation::UGRowAction, x, y),
        (GenKind::G, GenKind::U) => row_action_table(y, x).into_iter().map(|(c, g)| (-c, g)).collect(),
        _ => super::bracket::generator_bracket(x, y),
    }
}

/// Right-hand side of a relation for the generator pair `(x, y)`.
fn expected(rel: Relation, x: Generator, y: Generator) -> GenCombo {
    let (i, j, k, l) = (x.row(), x.col(), y.row(), y.col());
    let mut out = GenCombo::new();
    match rel {
        Relation::UU | Relation::UtUt => {
            let kind = x.kind;
            if j == k {
                out.push((1, Generator::new(kind, i, l)));
            }
            if l == i {
                out.push((-1, Generator::new(kind, k, j)));
            }
        }
        Relation::UGRowAction => {
            if i == l {
                out.push((1, Generator::g(k, j)));
            }
        }
        Relation::UGColumnAction => {
            if j == l {
                out.push((1, Generator::g(k, i)));
            }
        }
        Relation::UtG => {
            if j == k {
                out.push((1, Generator::g(i, l)));
            }
        }
        Relation::UUt | Relation::GG => {}
    }
    out
}

fn pairs(rel: Relation, n: usize) -> Vec<(Generator, Generator)> {
    let (kx, ky) = match rel {
        Relation::UU => (GenKind::U, GenKind::U),
        Relation::UtUt => (GenKind::UTilde, GenKind::UTilde),
        Relation::UUt => (GenKind::U, GenKind::UTilde),
        Relation::UGRowAction | Relation::UGColumnAction => (GenKind::U, GenKind::G),
        Relation::UtG => (GenKind::UTilde, GenKind::G),
        Relation::GG => (GenKind::G, GenKind::G),
    };
    let mut out = Vec::new();
    for i in 1..=n {
        for j in 1..=n {
            for k in 1..=n {
                for l in 1..=n {
                    out.push((Generator::new(kx, i, j), Generator::new(ky, k, l)));
                }
            }
        }
    }
    out
}

/// Largest deviation of a relation over all index choices at `pt`.
pub fn relation_residual(real: &Realization, rel: Relation, pt: &CanonicalPoint) -> f64 {
    let n = pt.n();
    let mut worst = 0.0f64;
    for (x, y) in pairs(rel, n) {
        let lhs =
            canonical_bracket(|q| real.value(q, x), |q| real.value(q, y), pt).unwrap_or(Complex64::new(f64::NAN, 0.0));
        let rhs: Complex64 = expected(rel, x, y).iter().map(|&(s, g)| real.value(pt, g) * s as f64).sum();
        let r = (lhs - rhs).norm();
        worst = if r.is_nan() { f64::INFINITY } else { worst.max(r) };
    }
    worst
}

#[derive(Debug, Clone, Serialize)]
pub struct RealizationScore {
    pub realization: Realization,
    pub satisfied: Vec<(Relation, bool)>,
    /// `‖ũ − s·g Xᵀ g⁻¹‖` style identities that hold, rendered as text.
    pub identities: Vec<String>,
}

impl RealizationScore {
    pub fn holds(&self, rel: Relation) -> bool {
        self.satisfied.iter().any(|&(r, ok)| r == rel && ok)
    }
}

fn identities(real: &Realization, pt: &CanonicalPoint, tol: f64) -> Vec<String> {
    let ginv = pt.g().clone().try_inverse().expect("invertible g");
    let (u, ut) = (real.u(pt), real.utilde(pt));
    let mut out = Vec::new();
    for (name, m) in [("u", u.clone()), ("u^T", u.transpose())] {
        let conj = pt.g() * m * &ginv;
        if (&ut - &conj).norm() < tol {
            out.push(format!("ut = g {name} g^-1"));
        }
        if (&ut + &conj).norm() < tol {
            out.push(format!("ut = -g {name} g^-1"));
        }
    }
    out
}

/// Scores all sixteen realizations at `samples` random points of size `n`.
pub fn sweep_realizations(n: usize, samples: usize, seed: u64, tol: f64) -> Vec<RealizationScore> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let points: Vec<CanonicalPoint> = (0..samples).map(|_| CanonicalPoint::random(n, &mut rng)).collect();
    Realization::all()
        .into_iter()
        .map(|real| {
            let satisfied = Relation::ALL
                .iter()
                .map(|&rel| (rel, points.iter().all(|pt| relation_residual(&real, rel, pt) < tol)))
                .collect();
            let mut ids: Option<Vec<String>> = None;
            for pt in &points {
                let here = identities(&real, pt, 1e-9);
                ids = Some(match ids {
                    None => here,
                    Some(prev) => prev.into_iter().filter(|s| here.contains(s)).collect(),
                });
            }
            RealizationScore { realization: real, satisfied, identities: ids.unwrap_or_default() }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::poisson::bracket::generator_bracket;

    #[test]
    fn adopted_matches_canonical_point() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let pt = CanonicalPoint::random(3, &mut rng);
        let r = Realization::ADOPTED;
        assert!((r.u(&pt) - pt.u()).norm() < 1e-14);
        assert!((r.utilde(&pt) - pt.utilde()).norm() < 1e-14);
    }

    #[test]
    fn engine_table_is_column_action() {
        for n in 1..=3 {
            for rel in
                [Relation::UU, Relation::UtUt, Relation::UUt, Relation::UGColumnAction, Relation::UtG, Relation::GG]
            {
                for (x, y) in pairs(rel, n) {
                    let mut got = generator_bracket(x, y);
                    let mut want = expected(rel, x, y);
                    if want.len() == 2 && want[0].1 == want[1].1 {
                        want.clear();
                    }
                    got.sort();
                    want.sort();
                    assert_eq!(got, want, "{rel:?} {x} {y}");
                }
            }
        }
    }
}
