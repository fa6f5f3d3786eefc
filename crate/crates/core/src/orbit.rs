//! Generic coadjoint orbits of `GL(N)`: sampling, Gelfand-Zetlin charts
//! `(γ, θ)`, the Lie-Poisson bracket restricted to the orbit, and checks that
//! the chart is canonical.

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{GzError, Result};
use crate::numeric::{
    char_minor_poly, match_nearest, min_cross_distance, min_separation, nearest_branch, principal_minor, sort_complex,
    CPoly,
};
use crate::poisson::canonical::{flatten, random_matrix, unflatten};
use crate::poisson::CMatrix;

pub const DEFAULT_GAP: f64 = 1e-6;
pub const DEFAULT_COND_CAP: f64 = 1e6;
pub const DEFAULT_RETRIES: usize = 100;
pub const SINGULAR_THRESHOLD: f64 = 1e-12;
pub const DEFAULT_STENCIL: f64 = 1e-5;
pub const DEFAULT_KK_STEP: f64 = 1e-6;

/// A point `u` on the orbit of `diag(spectrum)`.
#[derive(Debug, Clone, PartialEq)]
pub struct OrbitPoint {
    pub u: CMatrix,
    pub spectrum: Vec<Complex64>,
}

#[derive(Serialize, Deserialize)]
struct OrbitJson {
    n: usize,
    spectrum: Vec<Complex64>,
    u: Vec<[f64; 2]>,
}

impl Serialize for OrbitPoint {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        OrbitJson { n: self.n(), spectrum: self.spectrum.clone(), u: flatten(&self.u) }.serialize(s)
    }
}

impl<'de> Deserialize<'de> for OrbitPoint {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error;
        let raw = OrbitJson::deserialize(d)?;
        if raw.spectrum.len() != raw.n {
            return Err(D::Error::custom("spectrum length differs from n"));
        }
        let u = unflatten(raw.n, &raw.u).map_err(D::Error::custom)?;
        Ok(OrbitPoint { u, spectrum: raw.spectrum })
    }
}

impl OrbitPoint {
    pub fn n(&self) -> usize {
        self.u.nrows()
    }

    pub fn with_u(&self, u: CMatrix) -> Self {
        Self { u, spectrum: self.spectrum.clone() }
    }

    /// Largest distance between the spectrum and the roots of `det(lambda - u)`
    /// after nearest-neighbour matching.
    pub fn spectrum_residual(&self) -> f64 {
        let roots = principal_minor(&self.u, self.n()).roots();
        match match_nearest(&self.spectrum, &roots) {
            Some(m) => m.iter().zip(&self.spectrum).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max),
            None => f64::INFINITY,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SampleConfig {
    pub gap: f64,
    pub cond_cap: f64,
    pub retries: usize,
}

impl Default for SampleConfig {
    fn default() -> Self {
        Self { gap: DEFAULT_GAP, cond_cap: DEFAULT_COND_CAP, retries: DEFAULT_RETRIES }
    }
}

pub fn check_spectrum(spectrum: &[Complex64], gap: f64) -> Result<()> {
    if spectrum.is_empty() {
        return Err(GzError::InvalidSize(0));
    }
    if let Some(z) = spectrum.iter().find(|z| !z.is_finite()) {
        return Err(GzError::NonFinite(format!("spectrum entry {z}")));
    }
    for i in 0..spectrum.len() {
        for j in i + 1..spectrum.len() {
            if (spectrum[i] - spectrum[j]).norm() < gap {
                return Err(GzError::RepeatedSpectrum(i + 1, j + 1));
            }
        }
    }
    Ok(())
}

pub fn sample_orbit(spectrum: &[Complex64], seed: u64) -> Result<OrbitPoint> {
    sample_orbit_with(spectrum, seed, &SampleConfig::default())
}

/// `u = h diag(spectrum) h⁻¹` for a random complex Gaussian `h`, resampled
/// until `h` is well conditioned and `u` is regular.
pub fn sample_orbit_with(spectrum: &[Complex64], seed: u64, cfg: &SampleConfig) -> Result<OrbitPoint> {
    check_spectrum(spectrum, cfg.gap)?;
    let n = spectrum.len();
    if n == 1 {
        return Ok(OrbitPoint { u: CMatrix::from_element(1, 1, spectrum[0]), spectrum: spectrum.to_vec() });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let lambda = CMatrix::from_diagonal(&nalgebra::DVector::from_vec(spectrum.to_vec()));
    for _ in 0..cfg.retries {
        let h = random_matrix(n, &mut rng);
        let sv = h.clone().svd(false, false).singular_values;
        let (smax, smin) = (sv.max(), sv.min());
        if smin == 0.0 || smax / smin > cfg.cond_cap {
            continue;
        }
        let Some(hinv) = h.clone().try_inverse() else { continue };
        let pt = OrbitPoint { u: &h * &lambda * hinv, spectrum: spectrum.to_vec() };
        let scale = spectrum.iter().map(|z| z.norm()).fold(1.0, f64::max);
        if pt.spectrum_residual() > 1e-10 * scale {
            continue;
        }
        if check_regular(&pt.u, cfg.gap).is_ok() && gz_forward(&pt).is_ok() {
            return Ok(pt);
        }
    }
    Err(GzError::RetryExhausted(cfg.retries))
}

/// Every `A_n` square-free and coprime to `A_{n-1}`, with root separation at
/// least `gap`.
pub fn check_regular(u: &CMatrix, gap: f64) -> Result<Vec<Vec<Complex64>>> {
    let n = u.nrows();
    let mut levels: Vec<Vec<Complex64>> = Vec::with_capacity(n);
    for m in 1..=n {
        let mut roots = principal_minor(u, m).roots();
        sort_complex(&mut roots);
        if min_separation(&roots) < gap {
            return Err(GzError::NotSquareFree(m, m));
        }
        if let Some(prev) = levels.last() {
            if min_cross_distance(prev, &roots) < gap {
                return Err(GzError::NotSquareFree(m - 1, m));
            }
        }
        levels.push(roots);
    }
    Ok(levels)
}

/// Sign and transposition applied to the lowering minor `Ĉ_n`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CHatConvention {
    pub negate: bool,
    pub transpose: bool,
}

impl CHatConvention {
    /// Rows `{1..n-1, n+1}`, columns `{1..n}`, no sign change.
    pub const ADOPTED: CHatConvention = CHatConvention { negate: false, transpose: false };

    pub fn all() -> [CHatConvention; 4] {
        [
            CHatConvention { negate: false, transpose: false },
            CHatConvention { negate: true, transpose: false },
            CHatConvention { negate: false, transpose: true },
            CHatConvention { negate: true, transpose: true },
        ]
    }
}

/// `Ĉ_n(lambda)`: minor of `lambda - u` on rows `{1..n-1, n+1}` and columns
/// `{1..n}` (swapped when transposed). Requires `n < N`.
pub fn c_hat(u: &CMatrix, n: usize, conv: CHatConvention) -> CPoly {
    let mut rows: Vec<usize> = (1..n).collect();
    rows.push(n + 1);
    let cols: Vec<usize> = (1..=n).collect();
    let p = if conv.transpose { char_minor_poly(u, &cols, &rows) } else { char_minor_poly(u, &rows, &cols) };
    if conv.negate {
        -&p
    } else {
        p
    }
}

/// Triangular Gelfand-Zetlin data. `gamma[n-1]` holds the `n` roots of `A_n`
/// sorted by real then imaginary part; `theta[n-1]` the matching angles for
/// `n < N`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GZChart {
    pub gamma: Vec<Vec<Complex64>>,
    pub theta: Vec<Vec<Complex64>>,
}

impl GZChart {
    pub fn n(&self) -> usize {
        self.gamma.len()
    }
}

pub fn gz_forward(pt: &OrbitPoint) -> Result<GZChart> {
    gz_forward_with(&pt.u, CHatConvention::ADOPTED)
}

pub fn gz_forward_with(u: &CMatrix, conv: CHatConvention) -> Result<GZChart> {
    let n = u.nrows();
    if n == 0 {
        return Err(GzError::InvalidSize(0));
    }
    if u.iter().any(|z| !z.is_finite()) {
        return Err(GzError::NonFinite("orbit point".into()));
    }
    let mut gamma = Vec::with_capacity(n);
    for m in 1..=n {
        let mut roots = principal_minor(u, m).roots();
        sort_complex(&mut roots);
        gamma.push(roots);
    }
    let theta = (1..n).map(|m| thetas_at(u, m, &gamma[m - 1], conv)).collect::<Result<Vec<_>>>()?;
    Ok(GZChart { gamma, theta })
}

fn thetas_at(u: &CMatrix, level: usize, gammas: &[Complex64], conv: CHatConvention) -> Result<Vec<Complex64>> {
    let c = c_hat(u, level, conv);
    let a_prev = principal_minor(u, level - 1);
    gammas
        .iter()
        .map(|&g| {
            let (cv, av) = (c.eval(g), a_prev.eval(g));
            if cv.norm() < SINGULAR_THRESHOLD {
                return Err(GzError::SingularChart { level, reason: format!("|C(gamma)| = {:.3e}", cv.norm()) });
            }
            if av.norm() < SINGULAR_THRESHOLD {
                return Err(GzError::SingularChart { level, reason: format!("|A_prev(gamma)| = {:.3e}", av.norm()) });
            }
            Ok((-cv / av).ln())
        })
        .collect()
}

/// Largest residuals of `A_n = ∏(lambda - γ)` (compared coefficientwise) and
/// `Ĉ_n(γ) = -A_{n-1}(γ) e^θ`.
pub fn chart_residuals(u: &CMatrix, chart: &GZChart, conv: CHatConvention) -> (f64, f64) {
    let mut poly_res = 0.0f64;
    for (m, roots) in chart.gamma.iter().enumerate() {
        let a = principal_minor(u, m + 1);
        let rebuilt = CPoly::from_roots(roots);
        for k in 0..=a.degree() {
            poly_res = poly_res.max((a.coeff(k) - rebuilt.coeff(k)).norm());
        }
    }
    let mut c_res = 0.0f64;
    for (m, thetas) in chart.theta.iter().enumerate() {
        let level = m + 1;
        let c = c_hat(u, level, conv);
        let a_prev = principal_minor(u, level - 1);
        for (g, t) in chart.gamma[m].iter().zip(thetas) {
            c_res = c_res.max((c.eval(*g) + a_prev.eval(*g) * t.exp()).norm());
        }
    }
    (poly_res, c_res)
}

/// `F_{ij} = ∂f/∂u_{ij}` by central differences with step
/// `step · max(1, |u_{ij}|)`.
pub fn kk_gradient<F>(f: &F, u: &CMatrix, step: f64) -> Result<CMatrix>
where
    F: Fn(&CMatrix) -> Result<Complex64>,
{
    let n = u.nrows();
    let mut grad = CMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            let h = step * u[(i, j)].norm().max(1.0);
            let mut up = u.clone();
            up[(i, j)] += h;
            let mut dn = u.clone();
            dn[(i, j)] -= h;
            let d = (f(&up)? - f(&dn)?) / (2.0 * h);
            if !d.is_finite() {
                return Err(GzError::NonFinite(format!("derivative along u{}{}", i + 1, j + 1)));
            }
            grad[(i, j)] = d;
        }
    }
    Ok(grad)
}

/// Lie-Poisson bracket from gradients: `tr(uᵀ [F, H])` with `F_{ij} = ∂f/∂u_{ij}`.
pub fn kk_from_gradients(u: &CMatrix, f: &CMatrix, h: &CMatrix) -> Complex64 {
    (u.transpose() * (f * h - h * f)).trace()
}

/// Lie-Poisson bracket `{f, h}(u)`, normalized so that `{u_12, u_21} = u_11 - u_22`.
pub fn kk_bracket<F, H>(f: F, h: H, pt: &OrbitPoint) -> Result<Complex64>
where
    F: Fn(&CMatrix) -> Complex64,
    H: Fn(&CMatrix) -> Complex64,
{
    let gf = kk_gradient(&|u: &CMatrix| Ok(f(u)), &pt.u, DEFAULT_KK_STEP)?;
    let gh = kk_gradient(&|u: &CMatrix| Ok(h(u)), &pt.u, DEFAULT_KK_STEP)?;
    Ok(kk_from_gradients(&pt.u, &gf, &gh))
}

/// A chart coordinate, levels and indices 1-based.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ChartFunction {
    Gamma { n: usize, j: usize },
    Theta { n: usize, j: usize },
}

/// Chart at a nearby point, with roots matched to `base` and angles on the
/// branch nearest to `base`.
pub fn tracked_chart(u: &CMatrix, base: &GZChart, conv: CHatConvention, step: f64) -> Result<GZChart> {
    let n = u.nrows();
    let mut gamma = Vec::with_capacity(n);
    for m in 1..=n {
        let reference = &base.gamma[m - 1];
        if min_separation(reference) < 10.0 * step {
            return Err(GzError::TrackingAmbiguous { level: m });
        }
        let moved = principal_minor(u, m).roots();
        let matched = match_nearest(reference, &moved).ok_or(GzError::TrackingAmbiguous { level: m })?;
        gamma.push(matched);
    }
    let mut theta = Vec::with_capacity(n.saturating_sub(1));
    for m in 1..n {
        let raw = thetas_at(u, m, &gamma[m - 1], conv)?;
        theta.push(raw.iter().zip(&base.theta[m - 1]).map(|(&t, &r)| nearest_branch(t, r)).collect());
    }
    Ok(GZChart { gamma, theta })
}

/// Gradients of every chart coordinate (all `γ` including the Casimir level,
/// and all `θ`) by central differences over the entries of `u`.
pub fn chart_gradients(
    u: &CMatrix,
    conv: CHatConvention,
    step: f64,
) -> Result<(GZChart, Vec<(ChartFunction, CMatrix)>)> {
    let n = u.nrows();
    let base = gz_forward_with(u, conv)?;
    let mut labels = Vec::new();
    for m in 1..=n {
        for j in 1..=m {
            labels.push(ChartFunction::Gamma { n: m, j });
        }
    }
    for m in 1..n {
        for j in 1..=m {
            labels.push(ChartFunction::Theta { n: m, j });
        }
    }
    let pick = |c: &GZChart, f: ChartFunction| match f {
        ChartFunction::Gamma { n, j } => c.gamma[n - 1][j - 1],
        ChartFunction::Theta { n, j } => c.theta[n - 1][j - 1],
    };
    let mut grads = vec![CMatrix::zeros(n, n); labels.len()];
    for i in 0..n {
        for j in 0..n {
            let h = step * u[(i, j)].norm().max(1.0);
            let mut up = u.clone();
            up[(i, j)] += h;
            let mut dn = u.clone();
            dn[(i, j)] -= h;
            let cu = tracked_chart(&up, &base, conv, step)?;
            let cd = tracked_chart(&dn, &base, conv, step)?;
            for (g, &f) in grads.iter_mut().zip(&labels) {
                g[(i, j)] = (pick(&cu, f) - pick(&cd, f)) / (2.0 * h);
            }
        }
    }
    Ok((base, labels.into_iter().zip(grads).collect()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CheckStatus {
    Pass,
    Fail,
}

impl CheckStatus {
    pub fn from_bool(ok: bool) -> Self {
        if ok {
            CheckStatus::Pass
        } else {
            CheckStatus::Fail
        }
    }

    pub fn passed(self) -> bool {
        self == CheckStatus::Pass
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct BracketEntry {
    pub left: ChartFunction,
    pub right: ChartFunction,
    pub value: Complex64,
    pub expected: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct CanonicityReport {
    pub n: usize,
    pub convention: CHatConvention,
    pub stencil: f64,
    pub tolerance: f64,
    pub chart_residuals: (f64, f64),
    pub max_gamma_gamma: f64,
    pub max_theta_theta: f64,
    /// Largest `|{θ_{nj}, γ_{ml}} - δ_{nm}δ_{jl}|`.
    pub max_theta_gamma: f64,
    /// Largest bracket of a level-`N` root with any chart coordinate.
    pub max_casimir: f64,
    pub table: Vec<BracketEntry>,
    pub status: CheckStatus,
}

pub fn verify_canonical_chart(pt: &OrbitPoint, tolerance: f64) -> Result<CanonicityReport> {
    verify_canonical_chart_with(pt, tolerance, CHatConvention::ADOPTED, DEFAULT_STENCIL)
}

pub fn verify_canonical_chart_with(
    pt: &OrbitPoint,
    tolerance: f64,
    conv: CHatConvention,
    stencil: f64,
) -> Result<CanonicityReport> {
    let n = pt.n();
    let (base, grads) = chart_gradients(&pt.u, conv, stencil)?;
    let mut rep = CanonicityReport {
        n,
        convention: conv,
        stencil,
        tolerance,
        chart_residuals: chart_residuals(&pt.u, &base, conv),
        max_gamma_gamma: 0.0,
        max_theta_theta: 0.0,
        max_theta_gamma: 0.0,
        max_casimir: 0.0,
        table: Vec::new(),
        status: CheckStatus::Fail,
    };
    for (a, (fa, ga)) in grads.iter().enumerate() {
        for (fb, gb) in grads.iter().skip(a) {
            let value = kk_from_gradients(&pt.u, ga, gb);
            let casimir = matches!(fa, ChartFunction::Gamma { n: m, .. } if *m == n)
                || matches!(fb, ChartFunction::Gamma { n: m, .. } if *m == n);
            let expected = match (fa, fb) {
                (ChartFunction::Theta { n: n1, j: j1 }, ChartFunction::Gamma { n: n2, j: j2 })
                    if n1 == n2 && j1 == j2 =>
                {
                    1.0
                }
                (ChartFunction::Gamma { n: n1, j: j1 }, ChartFunction::Theta { n: n2, j: j2 })
                    if n1 == n2 && j1 == j2 =>
                {
                    -1.0
                }
                _ => 0.0,
            };
            let err = (value - expected).norm();
            if casimir {
                rep.max_casimir = rep.max_casimir.max(err);
            } else {
                let slot = match (fa, fb) {
                    (ChartFunction::Gamma { .. }, ChartFunction::Gamma { .. }) => &mut rep.max_gamma_gamma,
                    (ChartFunction::Theta { .. }, ChartFunction::Theta { .. }) => &mut rep.max_theta_theta,
                    _ => &mut rep.max_theta_gamma,
                };
                *slot = slot.max(err);
            }
            rep.table.push(BracketEntry { left: *fa, right: *fb, value, expected });
        }
    }
    let worst = rep.max_gamma_gamma.max(rep.max_theta_theta).max(rep.max_theta_gamma).max(rep.max_casimir);
    rep.status = CheckStatus::from_bool(worst < tolerance);
    Ok(rep)
}

#[derive(Debug, Clone, Serialize)]
pub struct ConventionOutcome {
    pub convention: CHatConvention,
    /// `±1` when `{θ, γ}` is `±δ` throughout, otherwise absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub pairing_sign: Option<i8>,
    pub canonical: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

/// Runs the canonicity check for all four `Ĉ_n` variants.
pub fn chart_convention_sweep(pt: &OrbitPoint, tolerance: f64) -> Vec<ConventionOutcome> {
    CHatConvention::all()
        .into_iter()
        .map(|conv| match verify_canonical_chart_with(pt, tolerance, conv, DEFAULT_STENCIL) {
            Ok(rep) => {
                let sign = [1.0, -1.0].into_iter().find(|s| {
                    rep.table.iter().all(|e| {
                        let want = if e.expected == 0.0 { 0.0 } else { s * e.expected };
                        (e.value - want).norm() < tolerance
                    })
                });
                ConventionOutcome {
                    convention: conv,
                    pairing_sign: sign.map(|s| s as i8),
                    canonical: rep.status.passed(),
                    error: None,
                }
            }
            Err(e) => {
                ConventionOutcome { convention: conv, pairing_sign: None, canonical: false, error: Some(e.to_string()) }
            }
        })
        .collect()
}

/// Placement of the contour for the first term of the residue form.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ContourConvention {
    /// Residues at the zeros of `C_n` only.
    CZeros,
    /// Residues at the zeros of `C_n` and at infinity.
    CZerosAndInfinity,
    /// Residues at the zeros of `A_n`.
    AZeros,
    /// Minus the residues at the zeros of `A_n`.
    AZerosNegated,
}

impl ContourConvention {
    pub const ALL: [ContourConvention; 4] = [
        ContourConvention::CZeros,
        ContourConvention::CZerosAndInfinity,
        ContourConvention::AZeros,
        ContourConvention::AZerosNegated,
    ];
}

/// A tangent vector `[x, u]` at `u`.
#[derive(Debug, Clone, PartialEq)]
pub struct OrbitTangent {
    pub x: CMatrix,
}

impl OrbitTangent {
    pub fn at(&self, u: &CMatrix) -> CMatrix {
        &self.x * u - u * &self.x
    }
}

/// The Kirillov-Kostant form paired with [`kk_bracket`]: `tr(u [y, x])`,
/// which equals `Σ δθ ∧ δγ` on the tangent pair.
pub fn kk_form(u: &CMatrix, x: &OrbitTangent, y: &OrbitTangent) -> Complex64 {
    (u * (&y.x * &x.x - &x.x * &y.x)).trace()
}

const PUSH_STEP: f64 = 1e-6;

/// Directional derivative of a polynomial-valued function of `u` along `v`.
fn push_forward<F: Fn(&CMatrix) -> CPoly>(f: &F, u: &CMatrix, v: &CMatrix) -> CPoly {
    let scale = u.norm().max(1.0) / v.norm().max(1.0);
    let h = PUSH_STEP * scale;
    let up = f(&(u + v * Complex64::new(h, 0.0)));
    let dn = f(&(u - v * Complex64::new(h, 0.0)));
    (&up - &dn).scale(Complex64::new(0.5 / h, 0.0))
}

/// `Σ Res (δ_x P δ_y Q − δ_y P δ_x Q)/(P Q)` at the zeros of `P` (simple zeros).
fn residues_at_zeros(p: &CPoly, q: &CPoly, num: &CPoly, zeros: &[Complex64], zero_of_first: bool) -> Complex64 {
    let (vanishing, other) = if zero_of_first { (p, q) } else { (q, p) };
    let d = vanishing.derivative();
    zeros.iter().map(|&z| num.eval(z) / (d.eval(z) * other.eval(z))).sum()
}

/// Value of the residue form for one contour convention on one tangent pair.
pub fn residue_form_value(
    u: &CMatrix,
    x: &OrbitTangent,
    y: &OrbitTangent,
    conv: ContourConvention,
) -> Result<Complex64> {
    let n = u.nrows();
    let (vx, vy) = (x.at(u), y.at(u));
    let zero = Complex64::new(0.0, 0.0);
    let mut total = zero;
    for level in 1..n {
        let a = principal_minor(u, level);
        let c = c_hat(u, level, CHatConvention::ADOPTED);
        let a_fn = |m: &CMatrix| principal_minor(m, level);
        let c_fn = |m: &CMatrix| c_hat(m, level, CHatConvention::ADOPTED);
        let (dax, day) = (push_forward(&a_fn, u, &vx), push_forward(&a_fn, u, &vy));
        let (dcx, dcy) = (push_forward(&c_fn, u, &vx), push_forward(&c_fn, u, &vy));
        let num = &(&dcx * &day) - &(&dcy * &dax);
        let lc = c.coeff(level - 1);
        if lc.norm() < SINGULAR_THRESHOLD {
            return Err(GzError::SingularChart { level, reason: "leading coefficient of C vanishes".into() });
        }
        let c_zeros = if level > 1 { c.roots() } else { vec![] };
        let a_zeros = a.roots();
        if min_separation(&c_zeros) < 1e-8 || min_cross_distance(&c_zeros, &a_zeros) < 1e-8 {
            return Err(GzError::TrackingAmbiguous { level });
        }
        let at_c = residues_at_zeros(&c, &a, &num, &c_zeros, true);
        let at_a = residues_at_zeros(&c, &a, &num, &a_zeros, false);
        let at_infinity = -num.coeff(2 * level - 2) / lc;
        total += match conv {
            ContourConvention::CZeros => at_c,
            ContourConvention::CZerosAndInfinity => at_c + at_infinity,
            ContourConvention::AZeros => at_a,
            ContourConvention::AZerosNegated => -at_a,
        };
        if level > 1 {
            let ap_fn = |m: &CMatrix| principal_minor(m, level - 1);
            let a_prev = principal_minor(u, level - 1);
            let (dpx, dpy) = (push_forward(&ap_fn, u, &vx), push_forward(&ap_fn, u, &vy));
            let num2 = &(&dpx * &day) - &(&dpy * &dax);
            total -= residues_at_zeros(&a_prev, &a, &num2, &a_prev.roots(), true);
        }
    }
    Ok(total)
}

#[derive(Debug, Clone, Serialize)]
pub struct ConventionScore {
    pub convention: ContourConvention,
    pub max_error: f64,
    pub matches: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct ResidueFormReport {
    pub n: usize,
    pub samples: usize,
    pub tolerance: f64,
    pub scores: Vec<ConventionScore>,
    /// Conventions matching the Kirillov-Kostant value on every sample.
    pub winners: Vec<ContourConvention>,
    pub status: CheckStatus,
}

pub fn residue_form_check(
    pt: &OrbitPoint,
    pairs: &[(OrbitTangent, OrbitTangent)],
    tolerance: f64,
) -> Result<ResidueFormReport> {
    let mut scores: Vec<ConventionScore> = ContourConvention::ALL
        .iter()
        .map(|&c| ConventionScore { convention: c, max_error: 0.0, matches: true })
        .collect();
    for (x, y) in pairs {
        let reference = kk_form(&pt.u, x, y);
        for s in scores.iter_mut() {
            let v = residue_form_value(&pt.u, x, y, s.convention)?;
            let err = (v - reference).norm();
            s.max_error = if err.is_nan() { f64::INFINITY } else { s.max_error.max(err) };
        }
    }
    for s in scores.iter_mut() {
        s.matches = s.max_error < tolerance;
    }
    let winners: Vec<_> = scores.iter().filter(|s| s.matches).map(|s| s.convention).collect();
    Ok(ResidueFormReport {
        n: pt.n(),
        samples: pairs.len(),
        tolerance,
        status: CheckStatus::from_bool(!winners.is_empty()),
        scores,
        winners,
    })
}

/// Random tangent pairs with complex Gaussian generators.
pub fn random_tangent_pairs(n: usize, count: usize, seed: u64) -> Vec<(OrbitTangent, OrbitTangent)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| (OrbitTangent { x: random_matrix(n, &mut rng) }, OrbitTangent { x: random_matrix(n, &mut rng) }))
        .collect()
}

/// Spectrum with distinct entries drawn from a complex Gaussian.
pub fn random_spectrum(n: usize, seed: u64) -> Vec<Complex64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    loop {
        let m = random_matrix(n, &mut rng);
        let v: Vec<Complex64> = m.row(0).iter().map(|z| z * 2.0).collect();
        if check_spectrum(&v, 1e-2).is_ok() {
            return v;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn sample_has_requested_spectrum() {
        let pt = sample_orbit(&[c(1.0, 0.0), c(2.0, 0.0)], 3).unwrap();
        assert!(pt.spectrum_residual() < 1e-10);
        let a = principal_minor(&pt.u, 2);
        assert!((a.eval(c(1.0, 0.0))).norm() < 1e-10);
    }

    #[test]
    fn repeated_spectrum_rejected() {
        assert_eq!(sample_orbit(&[c(1.0, 0.0), c(1.0, 0.0)], 0), Err(GzError::RepeatedSpectrum(1, 2)));
    }

    #[test]
    fn one_dimensional_orbit() {
        let pt = sample_orbit(&[c(0.5, -1.0)], 9).unwrap();
        assert_eq!(pt.u[(0, 0)], c(0.5, -1.0));
        let chart = gz_forward(&pt).unwrap();
        assert_eq!(chart.gamma, vec![vec![c(0.5, -1.0)]]);
        assert!(chart.theta.is_empty());
    }

    #[test]
    fn triangular_chart_levels() {
        let u = CMatrix::from_row_slice(2, 2, &[c(3.0, 0.0), c(1.0, 0.0), c(0.5, 0.0), c(-1.0, 0.0)]);
        let mut upper = u.clone();
        upper[(1, 0)] = c(0.0, 0.0);
        let a1 = principal_minor(&upper, 1).roots();
        assert!((a1[0] - c(3.0, 0.0)).norm() < 1e-14);
        let mut a2 = principal_minor(&upper, 2).roots();
        sort_complex(&mut a2);
        assert!((a2[0] - c(-1.0, 0.0)).norm() < 1e-12 && (a2[1] - c(3.0, 0.0)).norm() < 1e-12);
        // a strictly upper triangular u has a singular chart: C_1 = -u_21 = 0
        assert!(matches!(
            gz_forward_with(&upper, CHatConvention::ADOPTED),
            Err(GzError::SingularChart { level: 1, .. })
        ));
        assert!(gz_forward_with(&u, CHatConvention::ADOPTED).is_ok());
    }

    #[test]
    fn chart_residuals_small() {
        for seed in 0..3 {
            let pt = sample_orbit(&random_spectrum(4, seed), seed).unwrap();
            let chart = gz_forward(&pt).unwrap();
            let (a, b) = chart_residuals(&pt.u, &chart, CHatConvention::ADOPTED);
            assert!(a < 1e-9 && b < 1e-9, "{a} {b}");
            let mut top = chart.gamma[3].clone();
            sort_complex(&mut top);
            let mut spec = pt.spectrum.clone();
            sort_complex(&mut spec);
            for (x, y) in top.iter().zip(&spec) {
                assert!((x - y).norm() < 1e-9);
            }
        }
    }

    #[test]
    fn kk_examples() {
        let pt = sample_orbit(&[c(1.0, 0.5), c(-0.3, 0.0), c(2.0, -1.0)], 4).unwrap();
        let u = &pt.u;
        let b = kk_bracket(|m| m[(0, 1)], |m| m[(1, 0)], &pt).unwrap();
        assert!((b - (u[(0, 0)] - u[(1, 1)])).norm() < 1e-5);
        assert!(kk_bracket(|m| m[(0, 2)] * m[(1, 1)], |m| m[(0, 2)] * m[(1, 1)], &pt).unwrap().norm() < 1e-12);
        let tr = kk_bracket(|m| m.trace(), |m| m[(2, 0)] * m[(0, 1)], &pt).unwrap();
        assert!(tr.norm() < 1e-5);
    }

    #[test]
    fn n2_chart_is_canonical() {
        let pt = sample_orbit(&[c(1.0, 0.0), c(2.0, 0.0)], 5).unwrap();
        let rep = verify_canonical_chart(&pt, 1e-5).unwrap();
        let tg = rep
            .table
            .iter()
            .find(|e| e.left == ChartFunction::Theta { n: 1, j: 1 } && e.right == ChartFunction::Gamma { n: 1, j: 1 });
        assert!(tg.is_none(), "gamma entries precede theta entries");
        let gt = rep
            .table
            .iter()
            .find(|e| e.left == ChartFunction::Gamma { n: 1, j: 1 } && e.right == ChartFunction::Theta { n: 1, j: 1 })
            .unwrap();
        assert!((gt.value + 1.0).norm() < 1e-5);
        assert!(rep.status.passed(), "{rep:?}");
    }

    #[test]
    fn convention_sweep_selects_untransposed_minor() {
        let pt = sample_orbit(&random_spectrum(3, 1), 1).unwrap();
        let out = chart_convention_sweep(&pt, 1e-5);
        for o in &out {
            if o.convention.transpose {
                assert!(!o.canonical);
                assert_eq!(o.pairing_sign, Some(-1));
            } else {
                assert!(o.canonical);
                assert_eq!(o.pairing_sign, Some(1));
            }
        }
    }

    #[test]
    fn residue_form_trivial_cases() {
        let pt = sample_orbit(&random_spectrum(3, 2), 2).unwrap();
        let x = OrbitTangent { x: random_matrix(3, &mut ChaCha8Rng::seed_from_u64(0)) };
        for conv in ContourConvention::ALL {
            assert_eq!(residue_form_value(&pt.u, &x, &x, conv).unwrap(), c(0.0, 0.0));
            let along_u = OrbitTangent { x: pt.u.clone() };
            assert!(residue_form_value(&pt.u, &along_u, &x, conv).unwrap().norm() < 1e-8);
        }
    }

    #[test]
    fn residue_form_sweep_n2() {
        let pt = sample_orbit(&[c(1.0, 0.0), c(2.0, 0.0)], 8).unwrap();
        let rep = residue_form_check(&pt, &random_tangent_pairs(2, 5, 1), 1e-4).unwrap();
        assert_eq!(
            rep.winners,
            vec![ContourConvention::CZerosAndInfinity, ContourConvention::AZerosNegated],
            "{rep:?}"
        );
    }

    #[test]
    fn orbit_json_round_trip() {
        let pt = sample_orbit(&[c(1.0, 0.0), c(2.0, 1.0)], 1).unwrap();
        let s = serde_json::to_string(&pt).unwrap();
        assert!(s.starts_with("{\"n\":2,\"spectrum\":[[1.0,0.0],[2.0,1.0]],\"u\":[["));
        let back: OrbitPoint = serde_json::from_str(&s).unwrap();
        assert_eq!(back, pt);
    }
}
