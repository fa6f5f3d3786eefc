//! Acceptance battery: one PASS/FAIL line per criterion, non-zero exit on any
//! failure. Runs as a plain binary so the lines are always printed.

use std::collections::BTreeSet;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::process::ExitCode;
use std::time::Instant;

use gz_core::classical::{
    build_family, independence_rank, random_rational_matrix, verify_commutes, FamilyKind, FamilySpec, Side, Status,
};
use gz_core::orbit::{random_spectrum, random_tangent_pairs, residue_form_check, sample_orbit, verify_canonical_chart};
use gz_core::poisson::canonical::evaluate_at;
use gz_core::poisson::{
    bracket, canonical_bracket, rat, CanonicalPoint, GenKind, Generator, Monomial, PoissonPoly, Var,
};
use gz_core::quantum::verify_quantum_commutes;
use gz_core::tower::{
    action_angle_pairing, build_tower, conservation, hamiltonian_flow, linearization_check, ActionIndex, FlowConfig,
    TauConvention,
};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Check = std::result::Result<String, String>;
type Criterion = (&'static str, fn() -> Check);

fn ensure(ok: bool, detail: String) -> Check {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn c1_classical_commutativity() -> Check {
    let mut notes = Vec::new();
    for n in 2..=4 {
        let t = Instant::now();
        let mut pairs = 0;
        for side in [Side::Left, Side::Right, Side::Both] {
            let fam = build_family(&FamilySpec::new(FamilyKind::GzPrincipal, n, side)).map_err(|e| e.to_string())?;
            let rep = verify_commutes(&fam);
            if rep.status != Status::Ok {
                return Err(format!("N={n} {side:?}: nonzero bracket {:?}", rep.witness));
            }
            pairs += rep.pairs;
        }
        notes.push(format!("N={n}: {pairs} pairs zero in {:.1?}", t.elapsed()));
    }
    Ok(notes.join("; "))
}

fn c2_rank() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut notes = Vec::new();
    for n in 2..=3 {
        let fam = build_family(&FamilySpec::new(FamilyKind::GzPrincipal, n, Side::Both)).map_err(|e| e.to_string())?;
        let ranks: Vec<usize> = (0..5)
            .map(|_| independence_rank(&fam, &CanonicalPoint::random(n, &mut rng)))
            .collect::<gz_core::Result<_>>()
            .map_err(|e| e.to_string())?;
        if ranks.iter().any(|&r| r != n * n) {
            return Err(format!("N={n}: ranks {ranks:?}, want {}", n * n));
        }
        notes.push(format!("N={n}: rank {} at 5 points", n * n));
    }
    Ok(notes.join("; "))
}

fn c3_shift_family() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut pairs = 0;
    for trial in 0..3 {
        let a = random_rational_matrix(3, &mut rng);
        for side in [Side::Left, Side::Right] {
            let fam = build_family(&FamilySpec::shift(3, side, a.clone())).map_err(|e| e.to_string())?;
            let rep = verify_commutes(&fam);
            if rep.status != Status::Ok {
                return Err(format!("shift matrix {trial} side {side:?}: {:?}", rep.witness));
            }
            pairs += rep.pairs;
        }
    }
    Ok(format!("N=3, 3 rational shift matrices, both sides: {pairs} pairs zero"))
}

fn c4_quantum() -> Check {
    let mut notes = Vec::new();
    for n in 2..=3 {
        let t = Instant::now();
        let rep = verify_quantum_commutes(n, false).map_err(|e| e.to_string())?;
        if rep.status != Status::Ok {
            return Err(format!("N={n}: {:?}", rep.witness));
        }
        let valid: Vec<String> =
            rep.sweep.iter().filter(|r| r.validated()).map(|r| format!("{:?}", r.convention)).collect();
        notes.push(format!(
            "N={n}: {} pairs, convention {:?} (validated: {}) in {:.1?}",
            rep.pairs,
            rep.convention.expect("validated"),
            valid.join(","),
            t.elapsed()
        ));
    }
    Ok(notes.join("; "))
}

fn random_poly<R: Rng>(n: usize, rng: &mut R) -> PoissonPoly {
    let kinds = [GenKind::U, GenKind::UTilde, GenKind::G];
    let terms = (0..rng.random_range(1..=3)).map(|_| {
        let deg = rng.random_range(1..=2);
        let vars = (0..deg)
            .map(|_| {
                let g = Generator::new(kinds[rng.random_range(0..3)], rng.random_range(1..=n), rng.random_range(1..=n));
                (Var::Gen(g), 1)
            })
            .collect();
        (Monomial::from_powers(vars), rat(rng.random_range(-3..=3), 1))
    });
    PoissonPoly::from_terms(n, terms.collect::<Vec<_>>())
}

fn c5_oracle() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let z = Complex64::new(0.0, 0.0);
    let mut worst: f64 = 0.0;
    let samples = 120;
    for s in 0..samples {
        let n = 1 + s % 3;
        let (a, b) = (random_poly(n, &mut rng), random_poly(n, &mut rng));
        let pt = CanonicalPoint::random(n, &mut rng);
        let symbolic = evaluate_at(&bracket(&a, &b).map_err(|e| e.to_string())?, &pt.values(), z, z);
        let numeric =
            canonical_bracket(|q| evaluate_at(&a, &q.values(), z, z), |q| evaluate_at(&b, &q.values(), z, z), &pt)
                .map_err(|e| e.to_string())?;
        worst = worst.max((symbolic - numeric).norm());
    }
    ensure(worst < 1e-5, format!("{samples} samples, N<=3, max deviation {worst:.2e} (tol 1e-5)"))
}

fn c6_canonical_chart() -> Check {
    let mut worst: f64 = 0.0;
    for seed in 0..5 {
        let pt = sample_orbit(&random_spectrum(3, 600 + seed), seed).map_err(|e| e.to_string())?;
        let rep = verify_canonical_chart(&pt, 1e-5).map_err(|e| e.to_string())?;
        let m = rep.max_gamma_gamma.max(rep.max_theta_theta).max(rep.max_theta_gamma);
        worst = worst.max(m);
        if !rep.status.passed() {
            return Err(format!("orbit {seed}: max deviation {m:.2e}"));
        }
    }
    Ok(format!("5 orbits, N=3, max deviation {worst:.2e} (tol 1e-5)"))
}

fn c7_residue_form() -> Check {
    let mut notes = Vec::new();
    for n in 2..=3 {
        let mut winners: Option<BTreeSet<String>> = None;
        for seed in 0..3 {
            let pt = sample_orbit(&random_spectrum(n, 700 + seed), seed).map_err(|e| e.to_string())?;
            let pairs = random_tangent_pairs(n, 20, 70 + seed);
            let rep = residue_form_check(&pt, &pairs, 1e-4).map_err(|e| e.to_string())?;
            let w: BTreeSet<String> = rep.winners.iter().map(|c| format!("{c:?}")).collect();
            if w.is_empty() {
                return Err(format!("N={n} orbit {seed}: no convention matches"));
            }
            winners = Some(match winners {
                None => w,
                Some(prev) => prev.intersection(&w).cloned().collect(),
            });
        }
        let w = winners.unwrap_or_default();
        if w.is_empty() {
            return Err(format!("N={n}: winning convention not stable across orbits"));
        }
        notes.push(format!("N={n}: {} on 3x20 pairs", w.into_iter().collect::<Vec<_>>().join(",")));
    }
    Ok(notes.join("; "))
}

fn c8_action_angle() -> Check {
    let mut upper: f64 = 0.0;
    let mut lit_one: f64 = 0.0;
    let mut aug_one: f64 = 0.0;
    for seed in 0..3 {
        let pt = sample_orbit(&random_spectrum(3, 800 + seed), seed).map_err(|e| e.to_string())?;
        let aug = action_angle_pairing(&pt, TauConvention::Augmented, None, 1e-6).map_err(|e| e.to_string())?;
        let lit = action_angle_pairing(&pt, TauConvention::Literal, None, 1e-6).map_err(|e| e.to_string())?;
        upper = upper.max(aug.max_error_upper).max(aug.max_h_h);
        aug_one = aug_one.max(aug.max_error_level_one);
        lit_one = lit_one.max(lit.max_error_level_one);
    }
    ensure(
        upper < 1e-4,
        format!(
            "N=3, levels >= 2 max deviation {upper:.2e} (tol 1e-4); level 1: literal tau deviation {lit_one:.2e}, \
             augmented tau deviation {aug_one:.2e}"
        ),
    )
}

fn c9_flows() -> Check {
    let pt = sample_orbit(&random_spectrum(3, 900), 9).map_err(|e| e.to_string())?;
    let mut drift: f64 = 0.0;
    let mut conj: f64 = 0.0;
    let mut other: f64 = 0.0;
    for n in 1..=3 {
        for k in 1..=n {
            let h = ActionIndex { n, k };
            let traj = hamiltonian_flow(&pt, &FlowConfig::new(h, 1.0, 1000)).map_err(|e| e.to_string())?;
            let c = conservation(&traj);
            drift = drift.max(c.max_spectrum_drift).max(c.max_action_drift);
            let rep = linearization_check(&pt, &FlowConfig::new(h, 0.1, 1000), TauConvention::Augmented, None, 1e-3)
                .map_err(|e| format!("h{n}{k}: {e}"))?;
            conj = conj.max(rep.max_conjugate_error);
            other = other.max(rep.max_other_error);
        }
    }
    ensure(
        drift < 1e-8 && conj < 1e-3 && other < 1e-3,
        format!("N=3, all 6 flows: drift {drift:.2e} (tol 1e-8), slope errors conjugate {conj:.2e} other {other:.2e} (tol 1e-3)"),
    )
}

fn c10_sum_rule() -> Check {
    let mut worst: f64 = 0.0;
    let mut count = 0;
    for seed in 0..24u64 {
        let n = 1 + (seed as usize % 4);
        let pt = sample_orbit(&random_spectrum(n, 1000 + seed), seed).map_err(|e| e.to_string())?;
        let tower = build_tower(&pt, None).map_err(|e| e.to_string())?;
        worst = worst.max(tower.sum_rule_residual());
        count += 1;
    }
    ensure(worst < 1e-12, format!("{count} towers, N=1..4, max residual {worst:.2e} (tol 1e-12)"))
}

fn main() -> ExitCode {
    let criteria: [Criterion; 10] = [
        ("exact classical commutativity, N=2,3,4", c1_classical_commutativity),
        ("independence rank N^2, N=2,3", c2_rank),
        ("shift-of-argument family commutes, N=3", c3_shift_family),
        ("quantum centrality and commutativity, N=2,3", c4_quantum),
        ("symbolic bracket vs canonical oracle", c5_oracle),
        ("canonical (gamma, theta) chart, N=3", c6_canonical_chart),
        ("residue form reproduces the orbit form", c7_residue_form),
        ("action-angle pairing, N=3", c8_action_angle),
        ("flow conservation and linearization, N=3", c9_flows),
        ("residue sum rule", c10_sum_rule),
    ];
    let filter: Option<String> = std::env::args().skip(1).find(|a| !a.starts_with('-'));
    let mut failed = 0;
    for (i, (title, f)) in criteria.iter().enumerate() {
        let id = i + 1;
        if let Some(sel) = &filter {
            if sel.parse::<usize>().ok() != Some(id) {
                continue;
            }
        }
        let t = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|_| Err("panicked".into()));
        let secs = t.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("PASS criterion {id:>2}: {title} [{detail}] ({secs:.1}s)"),
            Err(detail) => {
                failed += 1;
                println!("FAIL criterion {id:>2}: {title} [{detail}] ({secs:.1}s)");
            }
        }
    }
    if failed > 0 {
        ExitCode::FAILURE
    } else {
        ExitCode::SUCCESS
    }
}
