//! Action-angle variables on a generic orbit and the spectral tower of
//! punctured rational curves `Σ_n = CP¹ \ {γ_{n1}, …, γ_{nn}}`.
//!
//! Actions are the coefficients `h_{nk}` of `A_n(λ) = Σ_k λ^{n-k} h_{nk}`.
//! Angles are Abel images of the divisor `Σ(e_{ni}) − Σ(γ_{n-1,i}) − (λ₀)` where
//! `e_{ni}` are the zeros of `Ĉ_n`, integrated against `λ^{n-k}/A_n(λ) dλ`.

use num_complex::Complex64;
use num_traits::Num;
use serde::{Deserialize, Serialize};

use crate::error::{GzError, Result};
use crate::numeric::{
    match_nearest, min_cross_distance, min_separation, nearest_branch, principal_minor, sort_complex, CPoly,
};
use crate::orbit::{
    c_hat, check_regular, gz_forward, kk_from_gradients, kk_gradient, CHatConvention, CheckStatus, OrbitPoint,
};
use crate::poisson::CMatrix;

const TWO_PI: f64 = 2.0 * std::f64::consts::PI;
pub const DEFLECTION_RADIUS: f64 = 1e-3;
pub const PUNCTURE_CLEARANCE: f64 = 1e-8;
const ARC_CHORDS: usize = 16;

/// Partial-fraction residues `r[j][k-1] = γ_j^{k-1} / A'(γ_j)` of
/// `λ^{k-1}/A(λ)` for `A = ∏(λ − γ_j)`, `k = 1..n`.
#[derive(Debug, Clone, PartialEq)]
pub struct ResidueTable<T> {
    pub gamma: Vec<T>,
    pub r: Vec<Vec<T>>,
}

pub fn residue_table<T: Num + Clone>(gamma: &[T]) -> Result<ResidueTable<T>> {
    let n = gamma.len();
    let mut r = Vec::with_capacity(n);
    for (j, gj) in gamma.iter().enumerate() {
        let mut deriv = T::one();
        for (s, gs) in gamma.iter().enumerate() {
            if s != j {
                deriv = deriv * (gj.clone() - gs.clone());
            }
        }
        if deriv.is_zero() {
            return Err(GzError::NotSquareFree(n, n));
        }
        let mut row = Vec::with_capacity(n);
        let mut power = T::one();
        for _ in 0..n {
            row.push(power.clone() / deriv.clone());
            power = power * gj.clone();
        }
        r.push(row);
    }
    Ok(ResidueTable { gamma: gamma.to_vec(), r })
}

impl<T: Num + Clone> ResidueTable<T> {
    /// `Σ_j r_{jk}` for each `k = 1..n`; equals `δ_{kn}`.
    pub fn column_sums(&self) -> Vec<T> {
        let n = self.gamma.len();
        (0..n).map(|k| self.r.iter().fold(T::zero(), |acc, row| acc + row[k].clone())).collect()
    }
}

impl ResidueTable<Complex64> {
    /// Largest deviation from the residue sum rule.
    pub fn sum_rule_residual(&self) -> f64 {
        let n = self.gamma.len();
        self.column_sums()
            .iter()
            .enumerate()
            .map(|(k, s)| (s - if k + 1 == n { 1.0 } else { 0.0 }).norm())
            .fold(0.0, f64::max)
    }

    /// `∫ λ^{k-1}/A(λ) dλ = Σ_j r_{jk} log(λ − γ_j)` on the principal branch.
    pub fn antiderivative(&self, k: usize, lambda: Complex64) -> Complex64 {
        self.r.iter().zip(&self.gamma).map(|(row, g)| row[k - 1] * (lambda - g).ln()).sum()
    }
}

/// Residue table of `Ω_n^{(k)} = λ^{k-1}/A_n(λ) dλ` for floating roots, with a
/// separation check.
pub fn differentials(gamma: &[Complex64]) -> Result<ResidueTable<Complex64>> {
    if min_separation(gamma) < PUNCTURE_CLEARANCE {
        return Err(GzError::NotSquareFree(gamma.len(), gamma.len()));
    }
    residue_table(gamma)
}

/// Polyline from `from` to `to` that keeps a distance `DEFLECTION_RADIUS` from
/// every puncture it would otherwise pass, by replacing the nearby piece of the
/// segment with a semicircle on the far side of the puncture.
pub fn integration_path(from: Complex64, to: Complex64, punctures: &[Complex64]) -> Result<Vec<Complex64>> {
    let r = DEFLECTION_RADIUS;
    let mut path = vec![from, to];
    for &p in punctures {
        for &end in [from, to].iter() {
            if (end - p).norm() < PUNCTURE_CLEARANCE {
                return Err(GzError::PathThroughPuncture(format!("endpoint {end} on puncture {p}")));
            }
        }
        let mut next = Vec::with_capacity(path.len() + ARC_CHORDS + 2);
        next.push(path[0]);
        for w in path.windows(2) {
            let (a, b) = (w[0], w[1]);
            let d = b - a;
            let len = d.norm();
            if len == 0.0 {
                next.push(b);
                continue;
            }
            let dir = d / len;
            let rel = (p - a) / dir;
            let (along, across) = (rel.re, rel.im);
            let near = across.abs() < r && along > 0.0 && along < len;
            let clear_of_ends = (a - p).norm() > r && (b - p).norm() > r;
            if near && clear_of_ends {
                let half = (r * r - across * across).sqrt();
                let entry = a + dir * (along - half);
                // arc stays on the side of the segment away from p
                let side = if across > 0.0 { -1.0 } else { 1.0 };
                let start = (entry - p).arg();
                let exit = a + dir * (along + half);
                let mut sweep = (exit - p).arg() - start;
                let want_sign = side;
                // choose the sweep direction whose midpoint lies on `side`
                let mid_of = |s: f64| {
                    let m = p + Complex64::from_polar(r, start + s / 2.0);
                    ((m - a) / dir).im
                };
                if sweep.abs() < 1e-15 {
                    sweep = TWO_PI * want_sign;
                }
                if mid_of(sweep) * want_sign < 0.0 {
                    sweep -= TWO_PI * sweep.signum();
                }
                next.push(entry);
                for c in 1..ARC_CHORDS {
                    next.push(p + Complex64::from_polar(r, start + sweep * c as f64 / ARC_CHORDS as f64));
                }
                next.push(exit);
            } else if across.abs() < PUNCTURE_CLEARANCE && along > 0.0 && along < len {
                return Err(GzError::PathThroughPuncture(format!("segment passes through {p}")));
            }
            next.push(b);
        }
        path = next;
    }
    for &p in punctures {
        for w in path.windows(2) {
            if segment_distance(w[0], w[1], p) < PUNCTURE_CLEARANCE {
                return Err(GzError::PathThroughPuncture(format!("deflected path meets {p}")));
            }
        }
    }
    Ok(path)
}

fn segment_distance(a: Complex64, b: Complex64, p: Complex64) -> f64 {
    let d = b - a;
    if d.norm() == 0.0 {
        return (p - a).norm();
    }
    let t = (((p - a) * d.conj()).re / d.norm_sqr()).clamp(0.0, 1.0);
    (a + d * t - p).norm()
}

/// `∫ dλ/(λ − γ)` along a polyline.
pub fn log_along(path: &[Complex64], gamma: Complex64) -> Complex64 {
    path.windows(2).map(|w| ((w[1] - gamma) / (w[0] - gamma)).ln()).sum()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TauConvention {
    /// Only the two divisor sums.
    Literal,
    /// Divisor sums plus `log(−lc Ĉ_n)` weighted by `Σ_j r_{jk}`, the
    /// contribution of the point at infinity.
    Augmented,
}

/// Per-level angle data. Logs are stored termwise so that branches can be
/// carried continuously between nearby points.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AngleLevel {
    pub n: usize,
    pub gamma: Vec<Complex64>,
    pub previous: Vec<Complex64>,
    pub e: Vec<Complex64>,
    /// `L(e_i, γ_j) = ∫_{λ₀}^{e_i} dλ/(λ − γ_j)`, indexed `[i][j]`.
    pub log_e: Vec<Vec<Complex64>>,
    /// `L(γ_{n-1,i}, γ_j)`, indexed `[i][j]`.
    pub log_prev: Vec<Vec<Complex64>>,
    /// `log(−lc Ĉ_n)`.
    pub log_lead: Complex64,
    /// Sheet of each `L` term relative to the principal value, `[e-terms, prev-terms]`.
    pub branches: Vec<Vec<i64>>,
}

impl AngleLevel {
    /// Weights `w_{jk} = γ_j^{n-k} / A_n'(γ_j)` of the integrand `λ^{n-k}/A_n`.
    fn weights(&self) -> Result<Vec<Vec<Complex64>>> {
        let table = residue_table(&self.gamma)?;
        let n = self.n;
        Ok(table.r.iter().map(|row| (1..=n).map(|k| row[n - k]).collect()).collect())
    }

    /// `τ_{nk}`, `k = 1..n`.
    pub fn tau(&self, conv: TauConvention) -> Result<Vec<Complex64>> {
        let w = self.weights()?;
        let n = self.n;
        let mut out = vec![Complex64::new(0.0, 0.0); n];
        for (j, wj) in w.iter().enumerate() {
            let diff: Complex64 = self.log_e.iter().map(|row| row[j]).sum::<Complex64>()
                - self.log_prev.iter().map(|row| row[j]).sum::<Complex64>();
            for k in 0..n {
                out[k] += wj[k] * diff;
                if conv == TauConvention::Augmented {
                    out[k] += wj[k] * self.log_lead;
                }
            }
        }
        Ok(out)
    }

    /// Coordinates on `J(Σ_n) = (C*)^n` in the basis with residues `2πi δ`:
    /// `∏_i (e_i − γ_j)/(γ_{n-1,i} − γ_j)`.
    pub fn jacobian(&self) -> Vec<Complex64> {
        (0..self.n)
            .map(|j| {
                let s: Complex64 = self.log_e.iter().map(|row| row[j]).sum::<Complex64>()
                    - self.log_prev.iter().map(|row| row[j]).sum::<Complex64>();
                s.exp()
            })
            .collect()
    }

    /// `Σ_i ∫_{λ₀}^{γ_{n-1,i}} Ω_n^{(k)}`, `k = 1..n`.
    pub fn zero_section(&self) -> Result<Vec<Complex64>> {
        let table = residue_table(&self.gamma)?;
        Ok((0..self.n)
            .map(|k| {
                (0..self.n).map(|j| table.r[j][k] * self.log_prev.iter().map(|row| row[j]).sum::<Complex64>()).sum()
            })
            .collect())
    }
}

/// Angle data for levels `1..N-1` at `u`. With a reference, roots are matched
/// to it by nearest neighbour and every log term is moved to the branch
/// nearest its reference value.
pub fn angle_state(u: &CMatrix, base_point: Complex64, reference: Option<&[AngleLevel]>) -> Result<Vec<AngleLevel>> {
    let n_total = u.nrows();
    let mut levels = Vec::with_capacity(n_total.saturating_sub(1));
    let mut prev_roots: Vec<Complex64> = Vec::new();
    for n in 1..=n_total {
        let mut gamma = principal_minor(u, n).roots();
        sort_complex(&mut gamma);
        if let Some(r) = reference {
            let target = if n < n_total { &r[n - 1].gamma } else { &gamma };
            gamma = match_nearest(target, &gamma).ok_or(GzError::TrackingAmbiguous { level: n })?;
        }
        if n == n_total {
            break;
        }
        let c = c_hat(u, n, CHatConvention::ADOPTED);
        let mut e = if n > 1 { c.roots() } else { vec![] };
        sort_complex(&mut e);
        if let Some(r) = reference {
            e = match_nearest(&r[n - 1].e, &e).ok_or(GzError::TrackingAmbiguous { level: n })?;
        }
        if min_cross_distance(&e, &gamma) < PUNCTURE_CLEARANCE {
            return Err(GzError::PathThroughPuncture(format!("zero of C at level {n} meets a puncture")));
        }
        let lead = c.coeff(n - 1);
        if lead.norm() < crate::orbit::SINGULAR_THRESHOLD {
            return Err(GzError::SingularChart { level: n, reason: "leading coefficient of C vanishes".into() });
        }
        let mut log_lead = (-lead).ln();
        let logs = |pts: &[Complex64], refs: Option<&Vec<Vec<Complex64>>>| -> Result<(Vec<Vec<Complex64>>, Vec<i64>)> {
            let mut table = Vec::with_capacity(pts.len());
            let mut sheets = Vec::new();
            for (i, &z) in pts.iter().enumerate() {
                let path = integration_path(base_point, z, &gamma)?;
                let mut row = Vec::with_capacity(gamma.len());
                for (j, &g) in gamma.iter().enumerate() {
                    let mut l = log_along(&path, g);
                    if let Some(refs) = refs {
                        l = nearest_branch(l, refs[i][j]);
                    }
                    let principal = (z - g).ln() - (base_point - g).ln();
                    sheets.push(((l - principal).im / TWO_PI).round() as i64);
                    row.push(l);
                }
                table.push(row);
            }
            Ok((table, sheets))
        };
        let ref_level = reference.map(|r| &r[n - 1]);
        let (log_e, be) = logs(&e, ref_level.map(|l| &l.log_e))?;
        let (log_prev, bp) = logs(&prev_roots, ref_level.map(|l| &l.log_prev))?;
        if let Some(l) = ref_level {
            log_lead = nearest_branch(log_lead, l.log_lead);
        }
        levels.push(AngleLevel {
            n,
            gamma: gamma.clone(),
            previous: prev_roots.clone(),
            e,
            log_e,
            log_prev,
            log_lead,
            branches: vec![be, bp],
        });
        prev_roots = gamma;
    }
    Ok(levels)
}

/// `τ_{nk}` for one level.
pub fn angle_variables(level: &AngleLevel, conv: TauConvention) -> Result<Vec<Complex64>> {
    level.tau(conv)
}

/// Base point at a fixed direction outside the disc holding all punctures and
/// divisor points.
pub fn default_base_point(u: &CMatrix) -> Complex64 {
    let n = u.nrows();
    let mut radius: f64 = 0.0;
    for m in 1..=n {
        for z in principal_minor(u, m).roots() {
            radius = radius.max(z.norm());
        }
        if m < n && m > 1 {
            for z in c_hat(u, m, CHatConvention::ADOPTED).roots() {
                radius = radius.max(z.norm());
            }
        }
    }
    Complex64::from_polar(radius + 1.0, 0.7)
}

/// `h_{nk}` for `k = 0..n` (`h_{n0} = 1`), from the coefficients of `A_n`.
pub fn actions(u: &CMatrix, n: usize) -> Vec<Complex64> {
    let a = principal_minor(u, n);
    (0..=n).map(|k| a.coeff(n - k)).collect()
}

/// All actions `h_{nk}`, `n = 1..N`, `k = 1..n`.
pub fn all_actions(u: &CMatrix) -> Vec<Vec<Complex64>> {
    (1..=u.nrows()).map(|n| actions(u, n)[1..].to_vec()).collect()
}

/// `(−1)^k e_k(γ)`, the elementary symmetric form of `h_{nk}`.
pub fn symmetric_actions(gamma: &[Complex64]) -> Vec<Complex64> {
    let n = gamma.len();
    let a = CPoly::from_roots(gamma);
    (0..=n).map(|k| a.coeff(n - k)).collect()
}

/// `G` with `G_{ij} = ∂h_{nk}/∂u_{ji}`: minus the Faddeev-LeVerrier matrix
/// `B_{k-1}` of the top-left `n×n` block, embedded in `N×N`.
pub fn action_gradient(u: &CMatrix, n: usize, k: usize) -> CMatrix {
    let big = u.nrows();
    let block = u.view((0, 0), (n, n)).into_owned();
    let h = actions(u, n);
    let mut b = CMatrix::identity(n, n);
    for &hm in &h[1..k] {
        b = &block * &b + CMatrix::identity(n, n) * hm;
    }
    let mut g = CMatrix::zeros(big, big);
    g.view_mut((0, 0), (n, n)).copy_from(&(-b));
    g
}

#[derive(Debug, Clone, Serialize)]
pub struct Divisor {
    pub plus: Vec<Complex64>,
    pub minus: Vec<Complex64>,
    pub base_point: Complex64,
}

#[derive(Debug, Clone, Serialize)]
pub struct TowerLevel {
    pub n: usize,
    pub gamma_punctures: Vec<Complex64>,
    /// `h_{n0} = 1, h_{n1}, …, h_{nn}`.
    pub h: Vec<Complex64>,
    pub e: Vec<Complex64>,
    pub tau: Vec<Complex64>,
    pub tau_literal: Vec<Complex64>,
    pub base_point: Complex64,
    pub residues: Vec<Vec<Complex64>>,
    pub jacobian: Vec<Complex64>,
    pub zero_section: Vec<Complex64>,
    pub divisor: Divisor,
    pub branches: Vec<Vec<i64>>,
}

#[derive(Debug, Clone, Serialize)]
pub struct TowerDescriptor {
    pub n: usize,
    pub base_point: Complex64,
    pub levels: Vec<TowerLevel>,
}

impl TowerDescriptor {
    pub fn sum_rule_residual(&self) -> f64 {
        self.levels
            .iter()
            .map(|l| ResidueTable { gamma: l.gamma_punctures.clone(), r: l.residues.clone() }.sum_rule_residual())
            .fold(0.0, f64::max)
    }
}

pub fn build_tower(pt: &OrbitPoint, base_point: Option<Complex64>) -> Result<TowerDescriptor> {
    gz_forward(pt)?;
    let n = pt.n();
    let lambda0 = base_point.unwrap_or_else(|| default_base_point(&pt.u));
    let angles = angle_state(&pt.u, lambda0, None)?;
    let mut levels = Vec::with_capacity(n);
    for m in 1..=n {
        let h = actions(&pt.u, m);
        if let Some(a) = angles.get(m - 1) {
            let table = differentials(&a.gamma)?;
            levels.push(TowerLevel {
                n: m,
                gamma_punctures: a.gamma.clone(),
                h,
                e: a.e.clone(),
                tau: a.tau(TauConvention::Augmented)?,
                tau_literal: a.tau(TauConvention::Literal)?,
                base_point: lambda0,
                residues: table.r,
                jacobian: a.jacobian(),
                zero_section: a.zero_section()?,
                divisor: Divisor { plus: a.e.clone(), minus: a.previous.clone(), base_point: lambda0 },
                branches: a.branches.clone(),
            });
        } else {
            let mut gamma = principal_minor(&pt.u, m).roots();
            sort_complex(&mut gamma);
            let table = differentials(&gamma)?;
            let prev = levels.last().map(|l: &TowerLevel| l.gamma_punctures.clone()).unwrap_or_default();
            levels.push(TowerLevel {
                n: m,
                gamma_punctures: gamma,
                h,
                e: vec![],
                tau: vec![],
                tau_literal: vec![],
                base_point: lambda0,
                residues: table.r,
                jacobian: vec![],
                zero_section: vec![],
                divisor: Divisor { plus: vec![], minus: prev, base_point: lambda0 },
                branches: vec![],
            });
        }
    }
    Ok(TowerDescriptor { n, base_point: lambda0, levels })
}

/// `∫_{λ₀}^{λ} Ω_n^{(k)}` along the deflected straight path.
pub fn abel_map(gamma: &[Complex64], k: usize, base_point: Complex64, lambda: Complex64) -> Result<Complex64> {
    let table = differentials(gamma)?;
    let path = integration_path(base_point, lambda, gamma)?;
    Ok(gamma.iter().enumerate().map(|(j, &g)| table.r[j][k - 1] * log_along(&path, g)).sum())
}

/// Selects the Hamiltonian `h_{nk}`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ActionIndex {
    pub n: usize,
    pub k: usize,
}

impl ActionIndex {
    pub fn check(&self, size: usize) -> Result<()> {
        if self.n == 0 || self.n > size || self.k == 0 || self.k > self.n {
            return Err(GzError::InvalidSpec(format!(
                "hamiltonian ({}, {}) outside 1 <= k <= n <= {size}",
                self.n, self.k
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FlowConfig {
    pub hamiltonian: ActionIndex,
    pub t_final: f64,
    pub steps: usize,
    /// Record every `sample_every`-th step (the first and last are always kept).
    pub sample_every: usize,
    pub gap: f64,
}

impl FlowConfig {
    pub fn new(hamiltonian: ActionIndex, t_final: f64, steps: usize) -> Self {
        Self { hamiltonian, t_final, steps, sample_every: 1, gap: crate::orbit::DEFAULT_GAP }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct FlowSample {
    pub t: f64,
    #[serde(skip)]
    pub u: CMatrix,
}

fn rhs(u: &CMatrix, idx: ActionIndex) -> CMatrix {
    let g = action_gradient(u, idx.n, idx.k);
    &g * u - u * &g
}

fn check_flow_point(u: &CMatrix, gap: f64, t: f64) -> Result<()> {
    if u.iter().any(|z| !z.is_finite()) {
        return Err(GzError::RegularityLost { time: t, reason: "non-finite state".into() });
    }
    check_regular(u, gap).map_err(|e| GzError::RegularityLost { time: t, reason: e.to_string() })?;
    crate::orbit::gz_forward_with(u, CHatConvention::ADOPTED)
        .map_err(|e| GzError::RegularityLost { time: t, reason: e.to_string() })?;
    Ok(())
}

/// Classical fixed-step RK4 for `u̇ = [∇h_{nk}(u), u]`, along which every
/// function evolves as `ḟ = {h_{nk}, f}`.
pub fn hamiltonian_flow(pt: &OrbitPoint, cfg: &FlowConfig) -> Result<Vec<FlowSample>> {
    cfg.hamiltonian.check(pt.n())?;
    if cfg.steps == 0 || !cfg.t_final.is_finite() {
        return Err(GzError::InvalidSpec("flow needs a finite duration and at least one step".into()));
    }
    let dt = cfg.t_final / cfg.steps as f64;
    let every = cfg.sample_every.max(1);
    let mut u = pt.u.clone();
    check_flow_point(&u, cfg.gap, 0.0)?;
    let mut out = vec![FlowSample { t: 0.0, u: u.clone() }];
    let half = Complex64::new(dt / 2.0, 0.0);
    let full = Complex64::new(dt, 0.0);
    for step in 1..=cfg.steps {
        let idx = cfg.hamiltonian;
        let k1 = rhs(&u, idx);
        let k2 = rhs(&(&u + &k1 * half), idx);
        let k3 = rhs(&(&u + &k2 * half), idx);
        let k4 = rhs(&(&u + &k3 * full), idx);
        let two = Complex64::new(2.0, 0.0);
        u += (k1 + k2 * two + k3 * two + k4) * Complex64::new(dt / 6.0, 0.0);
        let t = dt * step as f64;
        check_flow_point(&u, cfg.gap, t)?;
        if step % every == 0 || step == cfg.steps {
            out.push(FlowSample { t, u: u.clone() });
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Serialize)]
pub struct ConservationReport {
    pub max_spectrum_drift: f64,
    pub max_action_drift: f64,
}

/// Drift of the spectrum and every `h_{ml}` relative to the first sample.
pub fn conservation(traj: &[FlowSample]) -> ConservationReport {
    let first = &traj[0].u;
    let h0 = all_actions(first);
    let mut spec0 = principal_minor(first, first.nrows()).roots();
    sort_complex(&mut spec0);
    let mut rep = ConservationReport { max_spectrum_drift: 0.0, max_action_drift: 0.0 };
    for s in traj {
        let spec = principal_minor(&s.u, s.u.nrows()).roots();
        let d = match match_nearest(&spec0, &spec) {
            Some(m) => m.iter().zip(&spec0).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max),
            None => f64::INFINITY,
        };
        rep.max_spectrum_drift = rep.max_spectrum_drift.max(d);
        for (row, row0) in all_actions(&s.u).iter().zip(&h0) {
            for (a, b) in row.iter().zip(row0) {
                rep.max_action_drift = rep.max_action_drift.max((a - b).norm());
            }
        }
    }
    rep
}

#[derive(Debug, Clone, Serialize)]
pub struct TrajectoryRecord {
    pub t: f64,
    pub u: Vec<[f64; 2]>,
    pub h: Vec<Vec<Complex64>>,
    pub tau: Vec<Vec<Complex64>>,
    pub branch_flags: Vec<Vec<Vec<i64>>>,
}

/// One record per sample, angles carried continuously from sample to sample.
pub fn trajectory_records(
    traj: &[FlowSample],
    base_point: Complex64,
    conv: TauConvention,
) -> Result<Vec<TrajectoryRecord>> {
    let mut out = Vec::with_capacity(traj.len());
    let mut prev: Option<Vec<AngleLevel>> = None;
    for s in traj {
        let state = angle_state(&s.u, base_point, prev.as_deref())?;
        let tau = state.iter().map(|l| l.tau(conv)).collect::<Result<Vec<_>>>()?;
        out.push(TrajectoryRecord {
            t: s.t,
            u: crate::poisson::canonical::flatten(&s.u),
            h: all_actions(&s.u),
            tau,
            branch_flags: state.iter().map(|l| l.branches.clone()).collect(),
        });
        prev = Some(state);
    }
    Ok(out)
}

#[derive(Debug, Clone, Serialize)]
pub struct SlopeEntry {
    pub n: usize,
    pub k: usize,
    pub slope: Complex64,
    pub expected: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct LinearizationReport {
    pub hamiltonian: ActionIndex,
    pub convention: TauConvention,
    pub t_final: f64,
    pub steps: usize,
    pub samples: usize,
    pub tolerance: f64,
    pub slopes: Vec<SlopeEntry>,
    pub max_conjugate_error: f64,
    pub max_other_error: f64,
    pub status: CheckStatus,
}

fn ols_slope(t: &[f64], y: &[Complex64]) -> Complex64 {
    let m = t.len() as f64;
    let tb = t.iter().sum::<f64>() / m;
    let yb: Complex64 = y.iter().sum::<Complex64>() / m;
    let sxx: f64 = t.iter().map(|x| (x - tb) * (x - tb)).sum();
    let sxy: Complex64 = t.iter().zip(y).map(|(x, v)| (v - yb) * (x - tb)).sum();
    sxy / sxx
}

/// Least-squares slopes of every `τ_{ml}` along the `h_{nk}` flow.
pub fn linearization_check(
    pt: &OrbitPoint,
    cfg: &FlowConfig,
    conv: TauConvention,
    base_point: Option<Complex64>,
    tolerance: f64,
) -> Result<LinearizationReport> {
    let traj = hamiltonian_flow(pt, cfg)?;
    let lambda0 = base_point.unwrap_or_else(|| default_base_point(&pt.u));
    let records = trajectory_records(&traj, lambda0, conv)?;
    for w in records.windows(2) {
        for (a, b) in w[0].tau.iter().flatten().zip(w[1].tau.iter().flatten()) {
            if (b - a).norm() > std::f64::consts::PI {
                return Err(GzError::BranchJump { time: w[1].t });
            }
        }
    }
    let t: Vec<f64> = records.iter().map(|r| r.t).collect();
    let mut rep = LinearizationReport {
        hamiltonian: cfg.hamiltonian,
        convention: conv,
        t_final: cfg.t_final,
        steps: cfg.steps,
        samples: records.len(),
        tolerance,
        slopes: Vec::new(),
        max_conjugate_error: 0.0,
        max_other_error: 0.0,
        status: CheckStatus::Fail,
    };
    let levels = records[0].tau.len();
    for m in 0..levels {
        for l in 0..=m {
            let y: Vec<Complex64> = records.iter().map(|r| r.tau[m][l] - records[0].tau[m][l]).collect();
            let slope = ols_slope(&t, &y);
            let conjugate = cfg.hamiltonian.n == m + 1 && cfg.hamiltonian.k == l + 1;
            let expected = if conjugate { 1.0 } else { 0.0 };
            let err = (slope - expected).norm();
            if conjugate {
                rep.max_conjugate_error = rep.max_conjugate_error.max(err);
            } else {
                rep.max_other_error = rep.max_other_error.max(err);
            }
            rep.slopes.push(SlopeEntry { n: m + 1, k: l + 1, slope, expected });
        }
    }
    rep.status =
        CheckStatus::from_bool(records.len() >= 20 && rep.max_conjugate_error.max(rep.max_other_error) < tolerance);
    Ok(rep)
}

#[derive(Debug, Clone, Serialize)]
pub struct PairingEntry {
    pub h: ActionIndex,
    pub tau: ActionIndex,
    pub value: Complex64,
    pub expected: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct PairingReport {
    pub convention: TauConvention,
    pub entries: Vec<PairingEntry>,
    /// Largest `|{h_{nk}, τ_{ml}} − δδ|` with both levels at least 2.
    pub max_error_upper: f64,
    /// The same restricted to pairs touching level 1.
    pub max_error_level_one: f64,
    pub max_tau_tau: f64,
    pub max_h_h: f64,
}

/// `{h_{nk}, τ_{ml}}`, `{τ, τ}` and `{h, h}` for levels `1..N-1`, with analytic
/// action gradients and finite-difference angle gradients.
pub fn action_angle_pairing(
    pt: &OrbitPoint,
    conv: TauConvention,
    base_point: Option<Complex64>,
    step: f64,
) -> Result<PairingReport> {
    let n = pt.n();
    let u = &pt.u;
    let lambda0 = base_point.unwrap_or_else(|| default_base_point(u));
    let base = angle_state(u, lambda0, None)?;
    let mut labels = Vec::new();
    for m in 1..n {
        for l in 1..=m {
            labels.push(ActionIndex { n: m, k: l });
        }
    }
    let mut tau_grads = Vec::with_capacity(labels.len());
    for lab in &labels {
        let f = |v: &CMatrix| -> Result<Complex64> {
            let st = angle_state(v, lambda0, Some(&base))?;
            Ok(st[lab.n - 1].tau(conv)?[lab.k - 1])
        };
        tau_grads.push(kk_gradient(&f, u, step)?);
    }
    let h_grads: Vec<CMatrix> = labels.iter().map(|l| action_gradient(u, l.n, l.k).transpose()).collect();
    let mut rep = PairingReport {
        convention: conv,
        entries: Vec::new(),
        max_error_upper: 0.0,
        max_error_level_one: 0.0,
        max_tau_tau: 0.0,
        max_h_h: 0.0,
    };
    for (a, la) in labels.iter().enumerate() {
        for (b, lb) in labels.iter().enumerate() {
            let value = kk_from_gradients(u, &h_grads[a], &tau_grads[b]);
            let expected = if la == lb { 1.0 } else { 0.0 };
            let err = (value - expected).norm();
            if la.n >= 2 && lb.n >= 2 {
                rep.max_error_upper = rep.max_error_upper.max(err);
            } else {
                rep.max_error_level_one = rep.max_error_level_one.max(err);
            }
            rep.entries.push(PairingEntry { h: *la, tau: *lb, value, expected });
            if b > a {
                rep.max_tau_tau = rep.max_tau_tau.max(kk_from_gradients(u, &tau_grads[a], &tau_grads[b]).norm());
                rep.max_h_h = rep.max_h_h.max(kk_from_gradients(u, &h_grads[a], &h_grads[b]).norm());
            }
        }
    }
    Ok(rep)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::orbit::{random_spectrum, sample_orbit};
    use crate::poisson::rat;
    use num_rational::BigRational;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn residues_for_two_points() {
        let t = residue_table(&[c(0.0, 0.0), c(1.0, 0.0)]).unwrap();
        assert_eq!(t.r[0][0], c(-1.0, 0.0));
        assert_eq!(t.r[1][0], c(1.0, 0.0));
    }

    #[test]
    fn exact_sum_rule() {
        let gamma: Vec<BigRational> = vec![rat(1, 2), rat(-3, 1), rat(7, 5), rat(2, 9)];
        let t = residue_table(&gamma).unwrap();
        let sums = t.column_sums();
        assert_eq!(sums, vec![rat(0, 1), rat(0, 1), rat(0, 1), rat(1, 1)]);
        assert!(residue_table(&[rat(1, 1), rat(1, 1)]).is_err());
    }

    #[test]
    fn single_puncture_antiderivative() {
        let t = differentials(&[c(0.3, 0.2)]).unwrap();
        assert_eq!(t.r, vec![vec![c(1.0, 0.0)]]);
        let z = c(2.0, -1.0);
        assert!((t.antiderivative(1, z) - (z - c(0.3, 0.2)).ln()).norm() < 1e-15);
    }

    #[test]
    fn deflected_path_avoids_puncture() {
        let p = c(0.5, 2e-4);
        let path = integration_path(c(0.0, 0.0), c(1.0, 0.0), &[p]).unwrap();
        assert!(path.len() > 2);
        for w in path.windows(2) {
            assert!(segment_distance(w[0], w[1], p) > 0.9 * DEFLECTION_RADIUS);
        }
        // deflection keeps the homotopy class of the straight segment
        let straight = ((c(1.0, 0.0) - p) / (c(0.0, 0.0) - p)).ln();
        assert!((log_along(&path, p) - straight).norm() < 1e-12);
        assert!(integration_path(c(0.0, 0.0), c(1.0, 0.0), &[c(1.0, 1e-9)]).is_err());
    }

    #[test]
    fn gradient_of_actions_matches_differences() {
        let pt = sample_orbit(&random_spectrum(3, 3), 3).unwrap();
        for n in 1..=3 {
            for k in 1..=n {
                let analytic = action_gradient(&pt.u, n, k).transpose();
                let fd = kk_gradient(&|v: &CMatrix| Ok(actions(v, n)[k]), &pt.u, 1e-6).unwrap();
                assert!((analytic - fd).norm() < 1e-6, "h_{n}{k}");
            }
        }
    }

    #[test]
    fn symmetric_function_identity() {
        let pt = sample_orbit(&random_spectrum(4, 1), 1).unwrap();
        for n in 1..=4 {
            let gamma = principal_minor(&pt.u, n).roots();
            let h = actions(&pt.u, n);
            let s = symmetric_actions(&gamma);
            assert_eq!(h[0], c(1.0, 0.0));
            for (a, b) in h.iter().zip(&s) {
                assert!((a - b).norm() < 1e-10);
            }
        }
    }

    #[test]
    fn literal_angle_vanishes_at_level_one() {
        let pt = sample_orbit(&random_spectrum(2, 4), 4).unwrap();
        let st = angle_state(&pt.u, default_base_point(&pt.u), None).unwrap();
        assert_eq!(st[0].tau(TauConvention::Literal).unwrap(), vec![c(0.0, 0.0)]);
        let theta = gz_forward(&pt).unwrap().theta[0][0];
        let aug = st[0].tau(TauConvention::Augmented).unwrap()[0];
        assert!((aug - theta).norm() < 1e-12 || ((aug - theta).im.abs() - TWO_PI).abs() < 1e-9);
    }

    #[test]
    fn base_point_cancels() {
        let pt = sample_orbit(&random_spectrum(4, 6), 6).unwrap();
        let lambda0 = default_base_point(&pt.u);
        let a = angle_state(&pt.u, lambda0, None).unwrap();
        let near = angle_state(&pt.u, lambda0 + c(0.01, -0.02), None).unwrap();
        let far = angle_state(&pt.u, c(-7.0, 8.5), None).unwrap();
        for ((la, ln), lf) in a.iter().zip(&near).zip(&far) {
            let (ta, tn) = (la.tau(TauConvention::Literal).unwrap(), ln.tau(TauConvention::Literal).unwrap());
            for (x, y) in ta.iter().zip(&tn) {
                assert!((x - y).norm() < 1e-9);
            }
            // a distant base point changes each divisor sum by whole periods only
            for (ja, jf) in la.jacobian().iter().zip(lf.jacobian()) {
                assert!((ja - jf).norm() < 1e-9 * ja.norm().max(1.0));
            }
        }
    }

    #[test]
    fn coincident_divisor_gives_zero_angles() {
        let gamma = vec![c(0.0, 0.0), c(1.0, 1.0)];
        let p = c(0.4, -0.3);
        let lambda0 = c(3.0, 2.0);
        let path = integration_path(lambda0, p, &gamma).unwrap();
        let row: Vec<Complex64> = gamma.iter().map(|&g| log_along(&path, g)).collect();
        let level = AngleLevel {
            n: 2,
            gamma: gamma.clone(),
            previous: vec![p],
            e: vec![p],
            log_e: vec![row.clone()],
            log_prev: vec![row],
            log_lead: c(0.0, 0.0),
            branches: vec![],
        };
        assert_eq!(level.tau(TauConvention::Literal).unwrap(), vec![c(0.0, 0.0); 2]);
    }

    #[test]
    fn abel_map_derivative() {
        let gamma = vec![c(0.0, 0.0), c(1.0, 0.5), c(-0.7, 1.2)];
        let lambda0 = c(4.0, 3.0);
        let e = c(0.3, -0.8);
        let a = CPoly::from_roots(&gamma);
        let h = 1e-6;
        let k = gamma.len();
        let up = abel_map(&gamma, k, lambda0, e + h).unwrap().exp();
        let dn = abel_map(&gamma, k, lambda0, e - h).unwrap().exp();
        let mid = abel_map(&gamma, k, lambda0, e).unwrap().exp();
        let fd = (up - dn) / (2.0 * h) / mid;
        let exact = e.powu(k as u32 - 1) / a.eval(e);
        assert!((fd - exact).norm() < 1e-6);
    }

    #[test]
    fn tower_shapes() {
        let one = sample_orbit(&[c(2.0, 0.0)], 0).unwrap();
        let t = build_tower(&one, None).unwrap();
        assert_eq!(t.levels.len(), 1);
        assert!(t.levels[0].divisor.plus.is_empty() && t.levels[0].divisor.minus.is_empty());
        let pt = sample_orbit(&random_spectrum(3, 2), 2).unwrap();
        let t = build_tower(&pt, None).unwrap();
        assert_eq!(t.levels.len(), 3);
        assert!(t.levels.iter().flat_map(|l| l.zero_section.iter()).all(|z| z.is_finite()));
        assert!(t.sum_rule_residual() < 1e-12);
        for l in &t.levels[..2] {
            for z in &l.jacobian {
                assert!(z.norm() > 0.0 && z.is_finite());
            }
        }
    }

    #[test]
    fn casimir_flow_is_trivial() {
        let pt = sample_orbit(&random_spectrum(3, 5), 5).unwrap();
        let traj = hamiltonian_flow(&pt, &FlowConfig::new(ActionIndex { n: 3, k: 2 }, 0.5, 50)).unwrap();
        assert!((&traj.last().unwrap().u - &pt.u).norm() < 1e-10);
    }

    #[test]
    fn pairing_n2() {
        let pt = sample_orbit(&random_spectrum(2, 7), 7).unwrap();
        let lit = action_angle_pairing(&pt, TauConvention::Literal, None, 1e-6).unwrap();
        assert!(lit.max_error_level_one > 0.5);
        let aug = action_angle_pairing(&pt, TauConvention::Augmented, None, 1e-6).unwrap();
        assert!(aug.max_error_level_one < 1e-5, "{aug:?}");
    }
}
