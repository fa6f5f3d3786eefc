use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::PathBuf;

use gz_core::classical::{
    build_family, independence_rank, verify_commutes, verify_trivial_numeric, FamilyKind, FamilySpec, Side, Status,
    TRIVIAL_TOLERANCE,
};
use gz_core::orbit::{
    chart_residuals, gz_forward, random_spectrum, random_tangent_pairs, residue_form_check, sample_orbit,
    verify_canonical_chart, CHatConvention, OrbitPoint,
};
use gz_core::poisson::CanonicalPoint;
use gz_core::quantum::{diffop_realization_check, verify_quantum_commutes, DEFAULT_MAX_N};
use gz_core::tower::{
    action_angle_pairing, build_tower, conservation, default_base_point, hamiltonian_flow, linearization_check,
    trajectory_records, ActionIndex, FlowConfig, TauConvention,
};
use gz_core::{GzError, Result};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};

use crate::config::*;

/// Largest classical size run without `--allow-large`.
const CLASSICAL_MAX_N: usize = 4;

pub struct Outcome {
    pub ok: bool,
    pub result: Value,
    pub summary: Vec<String>,
}

fn to_json<T: serde::Serialize>(v: &T) -> Value {
    serde_json::to_value(v).expect("report values serialize")
}

fn verdict(ok: bool) -> &'static str {
    if ok {
        "ok"
    } else {
        "violation"
    }
}

pub fn verify_classical(args: &ClassicalArgs) -> Result<(RunConfig, Outcome)> {
    let n = require_size(args.common.n, None)?;
    guard_size(n, CLASSICAL_MAX_N, args.common.allow_large, "exact classical brackets")?;
    let mut cfg = RunConfig::new("verify-classical", &args.common, n, &[("trivial", TRIVIAL_TOLERANCE)])?;
    cfg.family = Some(args.family);
    cfg.side = Some(args.side);
    cfg.points = Some(args.points);
    let kind = family_kind(args.family);
    let shift = match (kind, args.shift_matrix.as_deref()) {
        (FamilyKind::MfShift, s) => Some(parse_shift(s.unwrap_or("random-rational"), n, args.common.seed)?),
        (_, Some(_)) => return Err(GzError::InvalidSpec("--shift-matrix applies only to --family mf".into())),
        (_, None) => None,
    };
    cfg.shift_matrix = shift.as_ref().map(|m| m.iter().map(|r| r.iter().map(|x| x.to_string()).collect()).collect());
    let spec = FamilySpec { kind, n, side: side(args.side), shift_matrix: shift };
    spec.validate()?;
    let fam = build_family(&spec)?;
    let commute = verify_commutes(&fam);

    let mut rng = ChaCha8Rng::seed_from_u64(args.common.seed);
    let mut ranks = Vec::with_capacity(args.points);
    for _ in 0..args.points {
        ranks.push(independence_rank(&fam, &CanonicalPoint::random(n, &mut rng))?);
    }
    let expected_rank = (kind == FamilyKind::GzPrincipal && spec.side == Side::Both).then_some(n * n);
    let rank_ok = expected_rank.is_none_or(|r| ranks.iter().all(|&x| x == r));

    let trivial = verify_trivial_numeric(n, args.points.max(1), args.common.seed)?;
    let trivial_ok = trivial.max_abs_bracket < cfg.tol("trivial");

    let ok = commute.status == Status::Ok && rank_ok && trivial_ok;
    let summary = vec![
        format!(
            "family {:?} N={n}: {} generators, {} pairs, {} violations",
            kind, commute.generators, commute.pairs, commute.violations
        ),
        format!(
            "independence rank {:?}{}",
            ranks,
            expected_rank.map(|r| format!(" (expected {r})")).unwrap_or_default()
        ),
        format!("trivial family max |bracket| {:.2e}", trivial.max_abs_bracket),
    ];
    let result = json!({
        "family": to_json(&spec),
        "pairs": commute.pairs,
        "status": verdict(commute.status == Status::Ok),
        "witness": commute.witness.as_ref().map(to_json),
        "commutativity": to_json(&commute),
        "rank": { "values": ranks, "expected": expected_rank, "status": verdict(rank_ok) },
        "trivial": to_json(&trivial),
    });
    Ok((cfg, Outcome { ok, result, summary }))
}

pub fn verify_quantum(args: &QuantumArgs) -> Result<(RunConfig, Outcome)> {
    let n = require_size(args.common.n, None)?;
    guard_size(n, DEFAULT_MAX_N, args.common.allow_large, "PBW rewriting")?;
    let mut cfg = RunConfig::new("verify-quantum", &args.common, n, &[])?;
    cfg.trials = Some(args.trials);
    let report = verify_quantum_commutes(n, args.common.allow_large)?;
    let diffop = diffop_realization_check(n, args.trials, args.common.seed)?;
    let ok = report.status == Status::Ok && diffop.status == Status::Ok;
    let mut summary: Vec<String> = report
        .sweep
        .iter()
        .map(|r| {
            format!(
                "rho {:?}: centrality {}, nested centrality {}, family commutes {} ({} pairs)",
                r.convention, r.centrality, r.nested_centrality, r.family_commutes, r.pairs
            )
        })
        .collect();
    summary.push(format!("validated convention: {:?}", report.convention));
    summary.push(format!("differential operators: {} checks, {} failures", diffop.checks, diffop.failures));
    let mut result = to_json(&report);
    result["diffop"] = to_json(&diffop);
    Ok((cfg, Outcome { ok, result, summary }))
}

fn orbit_point(
    n_arg: Option<usize>,
    spectrum: Option<&str>,
    seed: u64,
    cfg_spectrum: &mut Option<Vec<num_complex::Complex64>>,
) -> Result<OrbitPoint> {
    let spec = spectrum.map(parse_spectrum).transpose()?;
    let n = require_size(n_arg, spec.as_ref().map(|s| s.len()))?;
    let spec = match spec {
        Some(s) if s.len() != n => {
            return Err(GzError::InvalidSpec(format!("spectrum has {} entries but N = {n}", s.len())));
        }
        Some(s) => s,
        None => random_spectrum(n, seed),
    };
    gz_core::orbit::check_spectrum(&spec, gz_core::orbit::DEFAULT_GAP)?;
    *cfg_spectrum = Some(spec.clone());
    sample_orbit(&spec, seed)
}

pub fn orbit(args: &OrbitArgs) -> Result<(RunConfig, Outcome)> {
    let mut spectrum = None;
    let pt = orbit_point(args.common.n, args.spectrum.as_deref(), args.common.seed, &mut spectrum)?;
    let n = pt.n();
    let mut cfg = RunConfig::new(
        "orbit",
        &args.common,
        n,
        &[
            ("canonical", 1e-5),
            ("chart_residual", 1e-9),
            ("pairing", 1e-4),
            ("residue_form", 1e-4),
            ("sum_rule", 1e-12),
        ],
    )?;
    cfg.spectrum = spectrum;
    let mut checks: Vec<OrbitCheck> = args.check.clone();
    if checks.contains(&OrbitCheck::All) {
        checks = vec![OrbitCheck::Canonical, OrbitCheck::ResidueForm, OrbitCheck::Pairing];
    }
    checks.sort();
    checks.dedup();
    cfg.checks = checks.clone();

    let chart = gz_forward(&pt)?;
    let (poly_res, c_res) = chart_residuals(&pt.u, &chart, CHatConvention::ADOPTED);
    let tower = build_tower(&pt, None)?;
    let sum_rule = tower.sum_rule_residual();
    let mut ok =
        poly_res < cfg.tol("chart_residual") && c_res < cfg.tol("chart_residual") && sum_rule < cfg.tol("sum_rule");
    let mut summary =
        vec![format!("orbit N={n}: chart residuals {poly_res:.2e} / {c_res:.2e}, residue sum rule {sum_rule:.2e}")];
    let mut result = json!({
        "point": to_json(&pt),
        "chart": to_json(&chart),
        "chart_residuals": { "minors": poly_res, "c_relation": c_res },
        "tower": to_json(&tower),
    });
    if checks.contains(&OrbitCheck::Canonical) {
        let rep = verify_canonical_chart(&pt, cfg.tol("canonical"))?;
        summary.push(format!(
            "canonical chart: {:?} (gamma-gamma {:.2e}, theta-theta {:.2e}, theta-gamma {:.2e})",
            rep.status, rep.max_gamma_gamma, rep.max_theta_theta, rep.max_theta_gamma
        ));
        ok &= rep.status.passed();
        result["canonicity"] = to_json(&rep);
    }
    if checks.contains(&OrbitCheck::ResidueForm) {
        cfg.pairs = Some(args.pairs);
        let pairs = random_tangent_pairs(n, args.pairs, args.common.seed);
        let rep = residue_form_check(&pt, &pairs, cfg.tol("residue_form"))?;
        summary.push(format!("residue form: winners {:?}", rep.winners));
        ok &= rep.status.passed();
        result["residue_form"] = to_json(&rep);
    }
    if checks.contains(&OrbitCheck::Pairing) && n >= 2 {
        let aug = action_angle_pairing(&pt, TauConvention::Augmented, Some(tower.base_point), 1e-6)?;
        let lit = action_angle_pairing(&pt, TauConvention::Literal, Some(tower.base_point), 1e-6)?;
        let tol = cfg.tol("pairing");
        let upper_ok = aug.max_error_upper < tol && aug.max_h_h < tol;
        summary.push(format!(
            "action-angle pairing: levels >= 2 deviation {:.2e}; level 1 literal {:.2e}, augmented {:.2e}",
            aug.max_error_upper, lit.max_error_level_one, aug.max_error_level_one
        ));
        ok &= upper_ok;
        result["pairing"] = json!({
            "status": verdict(upper_ok),
            "augmented": to_json(&aug),
            "literal": to_json(&lit),
            "level_one": {
                "literal_passes": lit.max_error_level_one < tol,
                "augmented_passes": aug.max_error_level_one < tol,
            },
        });
    }
    Ok((cfg, Outcome { ok, result, summary }))
}

fn trajectory_path(explicit: Option<&PathBuf>, output: Option<&PathBuf>) -> PathBuf {
    if let Some(p) = explicit {
        return p.clone();
    }
    let dir = output_dir()
        .or_else(|| output.and_then(|o| o.parent().map(|p| p.to_path_buf())).filter(|p| !p.as_os_str().is_empty()))
        .unwrap_or_else(|| PathBuf::from("."));
    dir.join("flow-trajectory.jsonl")
}

fn io_error(path: &std::path::Path, e: std::io::Error) -> GzError {
    GzError::InvalidSpec(format!("cannot write {}: {e}", path.display()))
}

pub fn flow(args: &FlowArgs) -> Result<(RunConfig, Outcome)> {
    let mut spectrum = None;
    let (hn, hk) = parse_hamiltonian(&args.hamiltonian)?;
    if args.steps == 0 || !args.t_final.is_finite() {
        return Err(GzError::InvalidSpec("steps must be positive and --t finite".into()));
    }
    let pt = orbit_point(args.common.n, args.spectrum.as_deref(), args.common.seed, &mut spectrum)?;
    let n = pt.n();
    let idx = ActionIndex { n: hn, k: hk };
    idx.check(n)?;
    let mut cfg = RunConfig::new("flow", &args.common, n, &[("conservation", 1e-8), ("slope", 1e-3)])?;
    cfg.spectrum = spectrum;
    cfg.hamiltonian = Some([hn, hk]);
    cfg.t_final = Some(args.t_final);
    cfg.steps = Some(args.steps);
    let traj_path = trajectory_path(args.trajectory.as_ref(), cfg.output.as_ref());
    cfg.trajectory = Some(traj_path.clone());

    let flow_cfg = FlowConfig::new(idx, args.t_final, args.steps);
    let traj = match hamiltonian_flow(&pt, &flow_cfg) {
        Ok(t) => t,
        Err(e @ GzError::RegularityLost { .. }) => {
            let time = if let GzError::RegularityLost { time, .. } = &e { *time } else { unreachable!() };
            let summary = vec![format!("flow by h{hn}{hk}: regularity lost at t = {time}")];
            let result = json!({ "error": { "kind": "regularity_lost", "time": time, "message": e.to_string() } });
            return Ok((cfg, Outcome { ok: false, result, summary }));
        }
        Err(e) => return Err(e),
    };
    let base_point = default_base_point(&pt.u);
    let records = trajectory_records(&traj, base_point, TauConvention::Augmented)?;
    if let Some(dir) = traj_path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| io_error(dir, e))?;
    }
    let file = File::create(&traj_path).map_err(|e| io_error(&traj_path, e))?;
    let mut w = BufWriter::new(file);
    for r in &records {
        serde_json::to_writer(&mut w, r).map_err(|e| io_error(&traj_path, e.into()))?;
        w.write_all(b"\n").map_err(|e| io_error(&traj_path, e))?;
    }
    w.flush().map_err(|e| io_error(&traj_path, e))?;

    let cons = conservation(&traj);
    let cons_ok = cons.max_spectrum_drift < cfg.tol("conservation") && cons.max_action_drift < cfg.tol("conservation");
    let mut summary = vec![format!(
        "flow by h{hn}{hk} over t = {} in {} steps: spectrum drift {:.2e}, action drift {:.2e}",
        args.t_final, args.steps, cons.max_spectrum_drift, cons.max_action_drift
    )];
    let mut result = json!({
        "trajectory_file": traj_path,
        "samples": records.len(),
        "conservation": to_json(&cons),
        "conservation_status": verdict(cons_ok),
    });
    let mut ok = cons_ok;
    if n >= 2 {
        match linearization_check(&pt, &flow_cfg, TauConvention::Augmented, Some(base_point), cfg.tol("slope")) {
            Ok(rep) => {
                let conj = rep.slopes.iter().find(|s| s.expected == 1.0).map(|s| s.slope);
                summary.push(format!(
                    "linearization: conjugate slope {}, max other |slope| {:.2e}",
                    conj.map(|z| format!("{:.6}", z.re)).unwrap_or_else(|| "n/a (Casimir)".into()),
                    rep.max_other_error
                ));
                ok &= rep.status.passed();
                result["linearization"] = to_json(&rep);
            }
            Err(GzError::BranchJump { time }) => {
                summary.push(format!("linearization: branch jump at t = {time}"));
                ok = false;
                result["linearization"] = json!({ "error": { "kind": "branch_jump", "time": time } });
            }
            Err(e) => return Err(e),
        }
    }
    result["t_last"] = json!(records.last().map(|r| r.t));
    Ok((cfg, Outcome { ok, result, summary }))
}
