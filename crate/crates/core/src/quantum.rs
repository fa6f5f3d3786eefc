//! PBW arithmetic in `U(gl_N) ⊗ U(gl_N)`, quantum determinants with
//! `ρ`-shifts, the nested quantum Gelfand-Zetlin family, and the realization
//! of both copies by first-order differential operators in `g`.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::sync::{Arc, Mutex, OnceLock};

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::classical::{Momentum, Status};
use crate::error::{GzError, Result};
use crate::poisson::{rat, GenKind, Generator, Monomial, PoissonPoly, Var};

/// Largest size checked without an explicit opt-in.
pub const DEFAULT_MAX_N: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Copy {
    L,
    R,
}

/// Polynomial in `λ` with rational coefficients, lowest degree first.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct LPoly(Vec<BigRational>);

impl LPoly {
    pub fn new(mut c: Vec<BigRational>) -> Self {
        while c.last().is_some_and(|x| x.is_zero()) {
            c.pop();
        }
        LPoly(c)
    }

    pub fn constant(c: BigRational) -> Self {
        Self::new(vec![c])
    }

    pub fn lambda() -> Self {
        Self::new(vec![BigRational::zero(), BigRational::one()])
    }

    pub fn is_zero(&self) -> bool {
        self.0.is_empty()
    }

    pub fn coeff(&self, p: usize) -> BigRational {
        self.0.get(p).cloned().unwrap_or_else(BigRational::zero)
    }

    pub fn degree(&self) -> Option<usize> {
        self.0.len().checked_sub(1)
    }

    fn add(&self, o: &LPoly) -> LPoly {
        let n = self.0.len().max(o.0.len());
        LPoly::new((0..n).map(|k| self.coeff(k) + o.coeff(k)).collect())
    }

    fn mul(&self, o: &LPoly) -> LPoly {
        if self.is_zero() || o.is_zero() {
            return LPoly::default();
        }
        let mut out = vec![BigRational::zero(); self.0.len() + o.0.len() - 1];
        for (i, a) in self.0.iter().enumerate() {
            for (j, b) in o.0.iter().enumerate() {
                out[i + j] += a * b;
            }
        }
        LPoly::new(out)
    }

    fn scale(&self, s: &BigRational) -> LPoly {
        LPoly::new(self.0.iter().map(|c| c * s).collect())
    }
}

impl fmt::Display for LPoly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self
            .0
            .iter()
            .enumerate()
            .filter(|(_, c)| !c.is_zero())
            .map(|(p, c)| match p {
                0 => c.to_string(),
                1 => format!("{c}*lambda"),
                _ => format!("{c}*lambda^{p}"),
            })
            .collect();
        if parts.is_empty() {
            write!(f, "0")
        } else {
            write!(f, "{}", parts.join(" + "))
        }
    }
}

/// A generator `E^{copy}_{ij}` (1-based indices).
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct QGen {
    pub copy: Copy,
    pub i: usize,
    pub j: usize,
}

impl QGen {
    pub fn new(copy: Copy, i: usize, j: usize) -> Self {
        Self { copy, i, j }
    }

    fn id(&self, n: usize) -> u16 {
        let c = if self.copy == Copy::L { 0 } else { 1 };
        (c * n * n + (self.i - 1) * n + (self.j - 1)) as u16
    }

    fn from_id(n: usize, id: u16) -> Self {
        let id = id as usize;
        let copy = if id < n * n { Copy::L } else { Copy::R };
        let r = id % (n * n);
        Self { copy, i: r / n + 1, j: r % n + 1 }
    }
}

impl fmt::Display for QGen {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "E{:?}{}{}", self.copy, self.i, self.j)
    }
}

/// A PBW word: generator ids in weakly increasing order of `(copy, i, j)`.
type Word = Vec<u16>;
type Combo = Vec<(Word, BigRational)>;

/// `[x, y]` for generator ids, within one copy.
fn commutator_ids(n: usize, x: u16, y: u16) -> Vec<(i64, u16)> {
    let (a, b) = (QGen::from_id(n, x), QGen::from_id(n, y));
    if a.copy != b.copy {
        return vec![];
    }
    let mut out = Vec::new();
    if a.j == b.i {
        out.push((1, QGen::new(a.copy, a.i, b.j).id(n)));
    }
    if b.j == a.i {
        out.push((-1, QGen::new(a.copy, b.i, a.j).id(n)));
    }
    if out.len() == 2 && out[0].1 == out[1].1 {
        out.clear();
    }
    out
}

type MemoKey = (usize, Word, u16);
type Memo = Mutex<HashMap<MemoKey, Arc<Combo>>>;

fn memo() -> &'static Memo {
    static MEMO: OnceLock<Memo> = OnceLock::new();
    MEMO.get_or_init(|| Mutex::new(HashMap::new()))
}

fn accumulate(acc: &mut BTreeMap<Word, BigRational>, w: Word, c: BigRational) {
    let slot = acc.entry(w).or_insert_with(BigRational::zero);
    *slot += c;
}

/// Normal form of `w · x` for a PBW word `w` and a generator `x`, memoized.
fn word_times_gen(n: usize, w: &[u16], x: u16) -> Arc<Combo> {
    if w.last().is_none_or(|&y| y <= x) {
        let mut v = w.to_vec();
        v.push(x);
        return Arc::new(vec![(v, BigRational::one())]);
    }
    let key = (n, w.to_vec(), x);
    if let Some(hit) = memo().lock().expect("memo lock").get(&key) {
        return hit.clone();
    }
    // w = w' y with y > x:  w' y x = (w' x) y + w' [y, x]
    let (head, y) = (&w[..w.len() - 1], w[w.len() - 1]);
    let mut acc = BTreeMap::new();
    for (v, c) in word_times_gen(n, head, x).iter() {
        for (v2, c2) in word_times_gen(n, v, y).iter() {
            accumulate(&mut acc, v2.clone(), c * c2);
        }
    }
    for (s, z) in commutator_ids(n, y, x) {
        for (v, c) in word_times_gen(n, head, z).iter() {
            accumulate(&mut acc, v.clone(), c * BigRational::from_integer(BigInt::from(s)));
        }
    }
    let out: Arc<Combo> = Arc::new(acc.into_iter().filter(|(_, c)| !c.is_zero()).collect());
    memo().lock().expect("memo lock").insert(key, out.clone());
    out
}

fn word_times_word(n: usize, a: &[u16], b: &[u16]) -> Combo {
    let mut cur: Combo = vec![(a.to_vec(), BigRational::one())];
    for &x in b {
        let mut acc = BTreeMap::new();
        for (w, c) in &cur {
            for (w2, c2) in word_times_gen(n, w, x).iter() {
                accumulate(&mut acc, w2.clone(), c * c2);
            }
        }
        cur = acc.into_iter().filter(|(_, c)| !c.is_zero()).collect();
    }
    cur
}

/// Element of `U(gl_N) ⊗ U(gl_N) ⊗ Q[λ]` in PBW normal form.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NCPoly {
    n: usize,
    terms: BTreeMap<Word, LPoly>,
}

impl NCPoly {
    pub fn zero(n: usize) -> Self {
        Self { n, terms: BTreeMap::new() }
    }

    pub fn scalar(n: usize, c: LPoly) -> Self {
        let mut p = Self::zero(n);
        p.add_term(vec![], c);
        p
    }

    pub fn one(n: usize) -> Self {
        Self::scalar(n, LPoly::constant(BigRational::one()))
    }

    pub fn lambda(n: usize) -> Self {
        Self::scalar(n, LPoly::lambda())
    }

    pub fn gen(n: usize, g: QGen) -> Self {
        assert!(g.i >= 1 && g.i <= n && g.j >= 1 && g.j <= n, "generator index out of range");
        let mut p = Self::zero(n);
        p.add_term(vec![g.id(n)], LPoly::constant(BigRational::one()));
        p
    }

    pub fn e(n: usize, copy: Copy, i: usize, j: usize) -> Self {
        Self::gen(n, QGen::new(copy, i, j))
    }

    pub fn ambient_size(&self) -> usize {
        self.n
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    /// No generator appears.
    pub fn is_scalar(&self) -> bool {
        self.terms.keys().all(|w| w.is_empty())
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    fn add_term(&mut self, w: Word, c: LPoly) {
        if c.is_zero() {
            return;
        }
        let sum = match self.terms.get(&w) {
            Some(prev) => prev.add(&c),
            None => c,
        };
        if sum.is_zero() {
            self.terms.remove(&w);
        } else {
            self.terms.insert(w, sum);
        }
    }

    fn check(&self, o: &NCPoly) -> Result<()> {
        if self.n != o.n {
            return Err(GzError::AmbientMismatch { left: self.n, right: o.n });
        }
        Ok(())
    }

    pub fn try_add(&self, o: &NCPoly) -> Result<NCPoly> {
        self.check(o)?;
        let mut out = self.clone();
        for (w, c) in &o.terms {
            out.add_term(w.clone(), c.clone());
        }
        Ok(out)
    }

    pub fn scale(&self, s: &BigRational) -> NCPoly {
        let mut out = NCPoly::zero(self.n);
        for (w, c) in &self.terms {
            out.add_term(w.clone(), c.scale(s));
        }
        out
    }

    pub fn try_sub(&self, o: &NCPoly) -> Result<NCPoly> {
        self.try_add(&o.scale(&-BigRational::one()))
    }

    pub fn try_mul(&self, o: &NCPoly) -> Result<NCPoly> {
        self.check(o)?;
        let mut out = NCPoly::zero(self.n);
        for (wa, ca) in &self.terms {
            for (wb, cb) in &o.terms {
                let c = ca.mul(cb);
                for (w, s) in word_times_word(self.n, wa, wb) {
                    out.add_term(w, c.scale(&s));
                }
            }
        }
        Ok(out)
    }

    /// `[a, b] = ab − ba`.
    pub fn commutator(&self, o: &NCPoly) -> Result<NCPoly> {
        self.try_mul(o)?.try_sub(&o.try_mul(self)?)
    }

    /// Coefficient of `λ^p`, a `λ`-free element.
    pub fn lambda_coefficient(&self, p: usize) -> NCPoly {
        let mut out = NCPoly::zero(self.n);
        for (w, c) in &self.terms {
            out.add_term(w.clone(), LPoly::constant(c.coeff(p)));
        }
        out
    }

    pub fn lambda_degree(&self) -> usize {
        self.terms.values().filter_map(|c| c.degree()).max().unwrap_or(0)
    }

    /// `(word, coefficient)` pairs rendered as text.
    pub fn term_list(&self) -> Vec<(String, String)> {
        self.terms.iter().map(|(w, c)| (c.to_string(), self.render_word(w))).collect()
    }

    fn render_word(&self, w: &[u16]) -> String {
        if w.is_empty() {
            return "1".into();
        }
        w.iter().map(|&id| QGen::from_id(self.n, id).to_string()).collect::<Vec<_>>().join("*")
    }

    /// Commutative image: `E^L_{ij} → u^{ij}`, `E^R_{ij} → ũ^{ij}`, `λ → λ`.
    pub fn classical_image(&self) -> PoissonPoly {
        let mut out = PoissonPoly::zero(self.n);
        for (w, c) in &self.terms {
            let vars: Vec<(Var, u32)> = w
                .iter()
                .map(|&id| {
                    let g = QGen::from_id(self.n, id);
                    let kind = if g.copy == Copy::L { GenKind::U } else { GenKind::UTilde };
                    (Var::Gen(Generator::new(kind, g.i, g.j)), 1)
                })
                .collect();
            let m = Monomial::from_powers(vars);
            for (p, coeff) in c.0.iter().enumerate() {
                if coeff.is_zero() {
                    continue;
                }
                let mono =
                    if p == 0 { m.clone() } else { m.mul(&Monomial::from_powers(vec![(Var::Lambda, p as u32)])) };
                out.add_term(mono, coeff.clone());
            }
        }
        out
    }

    /// Largest word length.
    pub fn degree(&self) -> usize {
        self.terms.keys().map(|w| w.len()).max().unwrap_or(0)
    }
}

impl fmt::Display for NCPoly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        let parts: Vec<String> = self.terms.iter().map(|(w, c)| format!("({c})*{}", self.render_word(w))).collect();
        write!(f, "{}", parts.join(" + "))
    }
}

/// Product in PBW normal form.
pub fn nc_mul(a: &NCPoly, b: &NCPoly) -> Result<NCPoly> {
    a.try_mul(b)
}

/// `ρ^{(N)}_n = (N − 2n + 1)/2`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct RhoShift {
    pub n_index: usize,
    pub value: String,
}

pub fn rho(size: usize, index: usize) -> BigRational {
    rat(size as i64 - 2 * index as i64 + 1, 2)
}

pub fn rho_shifts(size: usize) -> Vec<RhoShift> {
    (1..=size).map(|i| RhoShift { n_index: i, value: rho(size, i).to_string() }).collect()
}

/// Which shifts enter the nested `k×k` quantum minors.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RhoConvention {
    /// `ρ^{(k)}_c` for the `k×k` minor.
    Nested,
    /// `ρ^{(N)}_c` restricted to the first `k` indices.
    Ambient,
}

impl RhoConvention {
    pub const ALL: [RhoConvention; 2] = [RhoConvention::Nested, RhoConvention::Ambient];

    fn shift(self, n: usize, k: usize, c: usize) -> BigRational {
        match self {
            RhoConvention::Nested => rho(k, c),
            RhoConvention::Ambient => rho(n, c),
        }
    }
}

fn permutations(k: usize) -> Vec<(Vec<usize>, i64)> {
    fn rec(prefix: &mut Vec<usize>, used: &mut [bool], out: &mut Vec<(Vec<usize>, i64)>) {
        let k = used.len();
        if prefix.len() == k {
            let mut inv = 0;
            for a in 0..k {
                for b in a + 1..k {
                    if prefix[a] > prefix[b] {
                        inv += 1;
                    }
                }
            }
            out.push((prefix.clone(), if inv % 2 == 0 { 1 } else { -1 }));
            return;
        }
        for v in 0..k {
            if !used[v] {
                used[v] = true;
                prefix.push(v);
                rec(prefix, used, out);
                prefix.pop();
                used[v] = false;
            }
        }
    }
    let mut out = Vec::new();
    rec(&mut Vec::new(), &mut vec![false; k], &mut out);
    out
}

/// `Σ_p sign(p) ∏_{c=1..k} (λ − ρ_c − E)_{p(c), c}` over the top-left `k×k`
/// block, factors multiplied left to right in column order.
pub fn qdet(n: usize, copy: Copy, k: usize, conv: RhoConvention) -> Result<NCPoly> {
    if n == 0 {
        return Err(GzError::InvalidSize(0));
    }
    if k == 0 || k > n {
        return Err(GzError::InvalidSpec(format!("quantum minor size {k} outside 1..={n}")));
    }
    let shifts: Vec<BigRational> = (1..=k).map(|c| conv.shift(n, k, c)).collect();
    qdet_with_shifts(n, copy, &shifts)
}

/// Column-ordered determinant of the top-left block of `λ − shift_c − E`,
/// with the block size given by `shifts.len()`.
pub fn qdet_with_shifts(n: usize, copy: Copy, shifts: &[BigRational]) -> Result<NCPoly> {
    let k = shifts.len();
    if k == 0 || k > n {
        return Err(GzError::InvalidSpec(format!("quantum minor size {k} outside 1..={n}")));
    }
    let entry = |r: usize, c: usize| -> NCPoly {
        let mut e = NCPoly::e(n, copy, r + 1, c + 1).scale(&-BigRational::one());
        if r == c {
            let shift = shifts[c].clone();
            e.add_term(vec![], LPoly::new(vec![-shift, BigRational::one()]));
        }
        e
    };
    let mut total = NCPoly::zero(n);
    for (perm, sign) in permutations(k) {
        let mut prod = NCPoly::one(n);
        for (c, &r) in perm.iter().enumerate() {
            prod = prod.try_mul(&entry(r, c))?;
        }
        total = total.try_add(&prod.scale(&BigRational::from_integer(BigInt::from(sign))))?;
    }
    Ok(total)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct QLabel {
    pub copy: Copy,
    pub k: usize,
    pub power: usize,
}

impl fmt::Display for QLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "qdet{:?}[{}]@lambda^{}", self.copy, self.k, self.power)
    }
}

fn push_coefficients(q: &NCPoly, copy: Copy, k: usize, out: &mut Vec<(QLabel, NCPoly)>) {
    for p in 0..=q.lambda_degree() {
        let c = q.lambda_coefficient(p);
        if !c.is_scalar() {
            out.push((QLabel { copy, k, power: p }, c));
        }
    }
}

/// Non-scalar `λ`-coefficients of `qdet(L, k)` and `qdet(R, k)` for `k < N`
/// and of the full `qdet(L, N)`.
pub fn quantum_family(n: usize, conv: RhoConvention) -> Result<Vec<(QLabel, NCPoly)>> {
    if n == 0 {
        return Err(GzError::InvalidSize(0));
    }
    let mut out = Vec::new();
    for copy in [Copy::L, Copy::R] {
        for k in 1..n {
            push_coefficients(&qdet(n, copy, k, conv)?, copy, k, &mut out);
        }
    }
    push_coefficients(&qdet(n, Copy::L, n, conv)?, Copy::L, n, &mut out);
    Ok(out)
}

#[derive(Debug, Clone, Serialize)]
pub struct QuantumWitness {
    pub left: String,
    pub right: String,
    pub terms: Vec<(String, String)>,
}

#[derive(Debug, Clone, Serialize)]
pub struct ConventionResult {
    pub convention: RhoConvention,
    /// Coefficients of `qdet(L, N)` commute with every `E^L_{ij}`.
    pub centrality: bool,
    /// Coefficients of each nested `qdet(L, k)` commute with `E^L_{ij}`, `i, j ≤ k`.
    pub nested_centrality: bool,
    pub family_commutes: bool,
    pub generators: usize,
    pub pairs: usize,
    pub centrality_checks: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub witness: Option<QuantumWitness>,
}

impl ConventionResult {
    pub fn validated(&self) -> bool {
        self.centrality && self.nested_centrality && self.family_commutes
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct QuantumReport {
    pub family: String,
    pub n: usize,
    pub generators: usize,
    pub pairs: usize,
    pub rho: Vec<RhoShift>,
    pub sweep: Vec<ConventionResult>,
    /// First convention in the sweep that validated.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub convention: Option<RhoConvention>,
    pub status: Status,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub witness: Option<QuantumWitness>,
}

fn check_convention(n: usize, conv: RhoConvention) -> Result<ConventionResult> {
    let mut res = ConventionResult {
        convention: conv,
        centrality: true,
        nested_centrality: true,
        family_commutes: true,
        generators: 0,
        pairs: 0,
        centrality_checks: 0,
        witness: None,
    };
    let note = |res: &mut ConventionResult, l: String, r: String, c: &NCPoly| {
        if res.witness.is_none() {
            res.witness = Some(QuantumWitness { left: l, right: r, terms: c.term_list() });
        }
    };
    for k in 1..=n {
        let mut coeffs = Vec::new();
        push_coefficients(&qdet(n, Copy::L, k, conv)?, Copy::L, k, &mut coeffs);
        for (lab, c) in &coeffs {
            for i in 1..=k {
                for j in 1..=k {
                    let e = NCPoly::e(n, Copy::L, i, j);
                    let br = c.commutator(&e)?;
                    res.centrality_checks += 1;
                    if !br.is_zero() {
                        if k == n {
                            res.centrality = false;
                        } else {
                            res.nested_centrality = false;
                        }
                        note(&mut res, lab.to_string(), format!("EL{i}{j}"), &br);
                    }
                }
            }
        }
    }
    let fam = quantum_family(n, conv)?;
    res.generators = fam.len();
    for a in 0..fam.len() {
        for b in a + 1..fam.len() {
            res.pairs += 1;
            let br = fam[a].1.commutator(&fam[b].1)?;
            if !br.is_zero() {
                res.family_commutes = false;
                note(&mut res, fam[a].0.to_string(), fam[b].0.to_string(), &br);
            }
        }
    }
    Ok(res)
}

/// Centrality of the full quantum determinant and commutativity of the nested
/// family, for each `ρ` convention. Sizes above [`DEFAULT_MAX_N`] need
/// `allow_large`.
pub fn verify_quantum_commutes(n: usize, allow_large: bool) -> Result<QuantumReport> {
    if n == 0 {
        return Err(GzError::InvalidSize(0));
    }
    if n > DEFAULT_MAX_N && !allow_large {
        return Err(GzError::InvalidSpec(format!(
            "N = {n} exceeds {DEFAULT_MAX_N}; PBW rewriting cost grows steeply, opt in explicitly"
        )));
    }
    let sweep = RhoConvention::ALL.iter().map(|&c| check_convention(n, c)).collect::<Result<Vec<_>>>()?;
    let chosen = sweep.iter().find(|r| r.validated()).unwrap_or(&sweep[0]);
    let convention = chosen.validated().then_some(chosen.convention);
    Ok(QuantumReport {
        family: "quantum_gz".into(),
        n,
        generators: chosen.generators,
        pairs: chosen.pairs,
        witness: chosen.witness.clone(),
        rho: rho_shifts(n),
        status: if convention.is_some() { Status::Ok } else { Status::Violation },
        sweep,
        convention,
    })
}

/// First-order operator `Σ_t c_t(g) ∂/∂g_{a_t b_t}` on polynomials in `g`.
#[derive(Debug, Clone, PartialEq)]
pub struct PolyDiffOp {
    pub n: usize,
    pub terms: Vec<(PoissonPoly, Generator)>,
}

impl PolyDiffOp {
    pub fn apply(&self, f: &PoissonPoly) -> PoissonPoly {
        let mut out = PoissonPoly::zero(self.n);
        for (c, g) in &self.terms {
            let d = f.derivative(Var::Gen(*g));
            if !d.is_zero() {
                out = out.try_add(&c.try_mul(&d).expect("same size")).expect("same size");
            }
        }
        out
    }
}

/// `∇_L^{ij} = Σ_k g_{ki} ∂/∂g_{kj}`.
pub fn nabla_left(n: usize, i: usize, j: usize) -> PolyDiffOp {
    PolyDiffOp { n, terms: (1..=n).map(|k| (PoissonPoly::gen(n, Generator::g(k, i)), Generator::g(k, j))).collect() }
}

/// `∇_R^{ij} = −Σ_k g_{jk} ∂/∂g_{ik}`.
pub fn nabla_right(n: usize, i: usize, j: usize) -> PolyDiffOp {
    PolyDiffOp { n, terms: (1..=n).map(|k| (-PoissonPoly::gen(n, Generator::g(j, k)), Generator::g(i, k))).collect() }
}

fn nabla(n: usize, side: Momentum, i: usize, j: usize) -> PolyDiffOp {
    match side {
        Momentum::U => nabla_left(n, i, j),
        Momentum::UTilde => nabla_right(n, i, j),
    }
}

/// Random polynomial in the `g` entries of degree at most `max_deg`.
pub fn random_g_poly<R: Rng + ?Sized>(n: usize, max_deg: usize, terms: usize, rng: &mut R) -> PoissonPoly {
    let mut out = PoissonPoly::zero(n);
    for _ in 0..terms {
        let deg = rng.random_range(0..=max_deg);
        let vars: Vec<(Var, u32)> =
            (0..deg).map(|_| (Var::Gen(Generator::g(rng.random_range(1..=n), rng.random_range(1..=n))), 1)).collect();
        let c = rat(rng.random_range(-4..=4), rng.random_range(1..=3));
        out.add_term(Monomial::from_powers(vars), c);
    }
    out
}

#[derive(Debug, Clone, Serialize)]
pub struct DiffOpReport {
    pub n: usize,
    pub trials: usize,
    pub checks: usize,
    pub failures: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub witness: Option<String>,
    pub status: Status,
}

/// Checks `[∇^{ij}, ∇^{kl}] = δ_{jk}∇^{il} − δ_{li}∇^{kj}` for each side and
/// `[∇_L, ∇_R] = 0` on random polynomials in `g`, exactly.
pub fn diffop_realization_check(n: usize, trials: usize, seed: u64) -> Result<DiffOpReport> {
    if n == 0 {
        return Err(GzError::InvalidSize(0));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rep = DiffOpReport { n, trials, checks: 0, failures: 0, witness: None, status: Status::Ok };
    let idx: Vec<(usize, usize)> = (1..=n).flat_map(|i| (1..=n).map(move |j| (i, j))).collect();
    for _ in 0..trials {
        let f = random_g_poly(n, 3, 4, &mut rng);
        for side in [Momentum::U, Momentum::UTilde] {
            let applied: Vec<PoissonPoly> = idx.iter().map(|&(i, j)| nabla(n, side, i, j).apply(&f)).collect();
            for (a, &(i, j)) in idx.iter().enumerate() {
                let da = nabla(n, side, i, j);
                for (b, &(k, l)) in idx.iter().enumerate() {
                    let db = nabla(n, side, k, l);
                    let lhs = da.apply(&applied[b]).try_add(&-db.apply(&applied[a]))?;
                    let mut rhs = PoissonPoly::zero(n);
                    if j == k {
                        rhs = rhs.try_add(&applied[idx.iter().position(|&p| p == (i, l)).expect("index")])?;
                    }
                    if l == i {
                        rhs = rhs.try_add(&-&applied[idx.iter().position(|&p| p == (k, j)).expect("index")])?;
                    }
                    rep.checks += 1;
                    if lhs != rhs {
                        rep.failures += 1;
                        rep.witness.get_or_insert_with(|| format!("{side:?} [{i}{j},{k}{l}] on {f}"));
                    }
                }
            }
        }
        let left: Vec<PolyDiffOp> = idx.iter().map(|&(i, j)| nabla_left(n, i, j)).collect();
        let right: Vec<PolyDiffOp> = idx.iter().map(|&(i, j)| nabla_right(n, i, j)).collect();
        let right_applied: Vec<PoissonPoly> = right.iter().map(|r| r.apply(&f)).collect();
        for (a, l) in left.iter().enumerate() {
            let lf = l.apply(&f);
            for (b, r) in right.iter().enumerate() {
                let c = l.apply(&right_applied[b]).try_add(&-r.apply(&lf))?;
                rep.checks += 1;
                if !c.is_zero() {
                    rep.failures += 1;
                    rep.witness.get_or_insert_with(|| format!("[L{:?}, R{:?}] on {f}", idx[a], idx[b]));
                }
            }
        }
    }
    if rep.failures > 0 {
        rep.status = Status::Violation;
    }
    Ok(rep)
}

/// Checks that the commutative image of `qdet(copy, k)` agrees with the
/// classical minor in top `E`-degree at every power of `λ`, and that the
/// remaining terms have strictly lower degree.
pub fn classical_limit_holds(n: usize, copy: Copy, k: usize, conv: RhoConvention) -> Result<bool> {
    let q = qdet(n, copy, k, conv)?.classical_image();
    let momentum = if copy == Copy::L { Momentum::U } else { Momentum::UTilde };
    let c = crate::classical::char_minor(n, momentum, k, false)?;
    for p in 0..=k as u32 {
        let qc = q.coefficient(Var::Lambda, p);
        let cc = c.coefficient(Var::Lambda, p);
        let top = k - p as usize;
        if qc.generator_degree_part(top as u32) != cc {
            return Ok(false);
        }
        if qc.max_generator_degree() as usize > top {
            return Ok(false);
        }
    }
    Ok(true)
}

/// Absolute value of the largest rational coefficient, used in summaries.
pub fn max_coefficient(p: &NCPoly) -> BigRational {
    p.terms.values().flat_map(|c| c.0.iter()).map(|c| c.abs()).max().unwrap_or_else(BigRational::zero)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn e(i: usize, j: usize) -> NCPoly {
        NCPoly::e(2, Copy::L, i, j)
    }

    #[test]
    fn gl2_commutator() {
        let c = e(1, 2).commutator(&e(2, 1)).unwrap();
        assert_eq!(c, e(1, 1).try_sub(&e(2, 2)).unwrap());
    }

    #[test]
    fn unit_and_copies() {
        let a = e(1, 2).try_mul(&e(2, 1)).unwrap();
        assert_eq!(a.try_mul(&NCPoly::one(2)).unwrap(), a);
        let r = NCPoly::e(2, Copy::R, 2, 2);
        assert!(e(1, 1).commutator(&r).unwrap().is_zero());
    }

    #[test]
    fn reordering_example() {
        // E21 E12 = E12 E21 − E11 + E22
        let lhs = e(2, 1).try_mul(&e(1, 2)).unwrap();
        let rhs = e(1, 2).try_mul(&e(2, 1)).unwrap().try_sub(&e(1, 1)).unwrap().try_add(&e(2, 2)).unwrap();
        assert_eq!(lhs, rhs);
    }

    #[test]
    fn rho_values() {
        assert_eq!(rho(2, 1), rat(1, 2));
        assert_eq!(rho(2, 2), rat(-1, 2));
        assert_eq!(rho(1, 1), rat(0, 1));
    }

    #[test]
    fn qdet_k1_and_n2_constant_term() {
        let q1 = qdet(3, Copy::L, 1, RhoConvention::Nested).unwrap();
        let want = NCPoly::lambda(3).try_sub(&NCPoly::e(3, Copy::L, 1, 1)).unwrap();
        assert_eq!(q1, want);

        let q = qdet(2, Copy::L, 2, RhoConvention::Nested).unwrap();
        let c0 = q.lambda_coefficient(0);
        let half = rat(1, 2);
        let want = e(1, 1)
            .try_mul(&e(2, 2))
            .unwrap()
            .try_sub(&e(2, 1).try_mul(&e(1, 2)).unwrap())
            .unwrap()
            .try_add(&e(2, 2).try_sub(&e(1, 1)).unwrap().scale(&half))
            .unwrap()
            .try_sub(&NCPoly::one(2).scale(&rat(1, 4)))
            .unwrap();
        assert_eq!(c0, want);
        for i in 1..=2 {
            for j in 1..=2 {
                assert!(c0.commutator(&e(i, j)).unwrap().is_zero());
            }
        }
    }

    #[test]
    fn wrong_shifts_break_centrality() {
        for shifts in [vec![rat(0, 1), rat(0, 1)], vec![rat(-1, 2), rat(1, 2)]] {
            let q = qdet_with_shifts(2, Copy::L, &shifts).unwrap().lambda_coefficient(0);
            let central = (1..=2).all(|i| (1..=2).all(|j| q.commutator(&e(i, j)).unwrap().is_zero()));
            assert!(!central);
        }
        let q = qdet_with_shifts(2, Copy::L, &[rat(3, 2), rat(1, 2)]).unwrap().lambda_coefficient(0);
        assert!((1..=2).all(|i| (1..=2).all(|j| q.commutator(&e(i, j)).unwrap().is_zero())));
    }

    #[test]
    fn family_sizes() {
        assert_eq!(quantum_family(1, RhoConvention::Nested).unwrap().len(), 1);
        let f2 = quantum_family(2, RhoConvention::Nested).unwrap();
        assert_eq!(f2.len(), 4);
        assert_eq!(quantum_family(3, RhoConvention::Nested).unwrap().len(), 9);
    }

    #[test]
    fn n2_report() {
        let rep = verify_quantum_commutes(2, false).unwrap();
        assert_eq!(rep.status, Status::Ok);
        assert!(rep.sweep.iter().all(|r| r.validated()));
        assert_eq!(rep.convention, Some(RhoConvention::Nested));
        assert!(verify_quantum_commutes(5, false).is_err());
    }

    #[test]
    fn classical_limit_n3() {
        for copy in [Copy::L, Copy::R] {
            for k in 1..=3 {
                for conv in RhoConvention::ALL {
                    assert!(classical_limit_holds(3, copy, k, conv).unwrap());
                }
            }
        }
    }

    #[test]
    fn diffop_examples() {
        let n = 2;
        let g11 = PoissonPoly::gen(n, Generator::g(1, 1));
        let l12 = nabla_left(n, 1, 2);
        let l21 = nabla_left(n, 2, 1);
        let lhs = l12.apply(&l21.apply(&g11)).try_add(&-l21.apply(&l12.apply(&g11))).unwrap();
        let rhs = nabla_left(n, 1, 1).apply(&g11).try_add(&-nabla_left(n, 2, 2).apply(&g11)).unwrap();
        assert_eq!(lhs, rhs);
        assert!(nabla_left(n, 1, 2).apply(&PoissonPoly::one(n)).is_zero());
        let m = g11.try_mul(&PoissonPoly::gen(n, Generator::g(2, 1))).unwrap();
        let (l, r) = (nabla_left(n, 1, 1), nabla_right(n, 2, 2));
        assert!(l.apply(&r.apply(&m)).try_add(&-r.apply(&l.apply(&m))).unwrap().is_zero());
        let rep = diffop_realization_check(2, 3, 11).unwrap();
        assert_eq!(rep.status, Status::Ok);
    }

    #[test]
    fn mismatched_sizes() {
        assert!(NCPoly::one(2).try_mul(&NCPoly::one(3)).is_err());
    }
}
