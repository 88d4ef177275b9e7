//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any
//! failure. Oracles used here are written independently of the library
//! code paths they check.

use std::time::Instant;

use nalgebra::SymmetricEigen;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use hypocert::family::ModeSet;
use hypocert::fixtures;
use hypocert::index::{build_certificate, index_by_sums, GridSpec, IndexOptions};
use hypocert::linalg::{c64, CMatrix, CVector, WeightedOperator};
use hypocert::lyapunov::build_p_eta;
use hypocert::ph::{
    decay_report, equilibrium_projector, evolve, oracle_evolve, project_initial, sample_function, DecayOptions,
};
use hypocert::shorttime::{
    decay_curve, delta_coeff, domination_violation, exponent, family_sup_curve, fit_exponent, log_times,
    mode_scaling, scaled_window, spectral_abscissa, uniform_bound, verify_expansion_identity,
};

// criterion 1
const RANDOM_FIXTURES: usize = 200;
const RANDOM_SEED: u64 = 20_240_917;
const INDEX_RUNTIME_LIMIT_S: f64 = 30.0;
// criterion 3
const CERT_ABS_TOL: f64 = 1e-6;
const CERT_REL_TOL: f64 = 1e-6;
const ORACLE_GRID_STEP: f64 = 1e-4;
// criterion 4
const P_LOWER_TOL: f64 = 1e-10;
const DISSIPATION_TOL: f64 = 1e-9;
const LYAPUNOV_MODES: u64 = 20;
// criterion 5
const EXPONENT_RTOL: f64 = 0.05;
const FIT_WINDOW: (f64, f64) = (1e-3, 1e-2);
const FIT_SAMPLES: usize = 30;
const UNIFORM_MODES: u64 = 8;
// criterion 6
const SCALING_ETAS: [f64; 5] = [1.0, 2.0, 4.0, 8.0, 16.0];
const K2_RATIO_LIMIT: f64 = 2.0;
// criterion 7
const IDENTITY_SAMPLES: usize = 50;
const IDENTITY_RTOL: f64 = 1e-8;
const DELTA_MAX_J: usize = 40;
// criterion 8
const ABSCISSA_TOL: f64 = 1e-10;
const PH_A_RANGE: (f64, f64) = (2.85, 3.15);
const ORACLE_RTOL: f64 = 1e-8;
const ORACLE_DT: f64 = 1e-3;
const ORACLE_MODES: usize = 16;
const ENERGY_SLOPE_TOL: f64 = 1e-8;
const COMMUTE_TOL: f64 = 1e-12;
// criterion 9
const CONSERVATION_RTOL: f64 = 1e-12;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

// ---- independent oracles -------------------------------------------------

/// `lambda_min` of a standard Hermitian matrix.
fn lambda_min(m: &CMatrix) -> f64 {
    let sym = (m + m.adjoint()).scale(0.5);
    SymmetricEigen::new(sym).eigenvalues.iter().copied().fold(f64::INFINITY, f64::min)
}

/// `kappa(eta)` for an unweighted operator from explicit products.
fn oracle_kappa(op: &WeightedOperator, eta: f64, m: usize) -> f64 {
    let c = op.skew().scale(eta) + op.herm();
    let mut sum = CMatrix::zeros(op.dim(), op.dim());
    for j in 0..=m {
        let mut cj = CMatrix::identity(op.dim(), op.dim());
        for _ in 0..j {
            cj = &cj * &c;
        }
        sum += cj.adjoint() * op.herm() * &cj;
    }
    lambda_min(&sum)
}

/// `lambda_min(Σ_{j<=m} (C_S^*)^j C_H C_S^j)` for an unweighted operator.
fn oracle_skew_kappa(op: &WeightedOperator, m: usize) -> f64 {
    let mut sum = CMatrix::zeros(op.dim(), op.dim());
    let mut sj = CMatrix::identity(op.dim(), op.dim());
    for _ in 0..=m {
        sum += sj.adjoint() * op.herm() * &sj;
        sj = &sj * op.skew();
    }
    lambda_min(&sum)
}

/// `K` by enumerating the words of `(C_eta^*)^l C_H C_eta^l`.
fn oracle_k(op: &WeightedOperator, m: usize) -> f64 {
    let (s, h) = (op.skew().clone(), op.herm().clone());
    let mut best: f64 = 0.0;
    for ell in 1..=m {
        let mut b = vec![CMatrix::zeros(op.dim(), op.dim()); 2 * ell + 1];
        for word in 0u32..(1 << (2 * ell)) {
            let mut prod = CMatrix::identity(op.dim(), op.dim());
            let mut skews = 0;
            for slot in 0..2 * ell {
                let skew = word >> slot & 1 == 1;
                skews += skew as usize;
                let factor = match (skew, slot < ell) {
                    (true, true) => -&s,
                    (true, false) => s.clone(),
                    (false, _) => h.clone(),
                };
                if slot == ell {
                    prod = &prod * &h;
                }
                prod = &prod * factor;
            }
            b[skews] += prod;
        }
        for bi in &b[..2 * ell] {
            best = best.max(bi.clone().singular_values().max());
        }
    }
    2.0 * m as f64 * best
}

fn rel_close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * a.abs().max(b.abs())
}

fn random_unit(rng: &mut ChaCha8Rng, n: usize) -> CVector {
    let v = CVector::from_fn(n, |_, _| c64(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5));
    let norm = v.norm();
    v / c64(norm, 0.0)
}

// ---- criteria ------------------------------------------------------------

fn criterion_1() -> Outcome {
    let start = Instant::now();
    let ops = fixtures::random_family(RANDOM_SEED, RANDOM_FIXTURES, 2..=8);
    let mut disagreements = Vec::new();
    let mut histogram = [0usize; 10];
    for (i, op) in ops.iter().enumerate() {
        let rep = index_by_sums(op, IndexOptions::default()).expect("random fixtures are accretive");
        if !rep.routes_agree() {
            disagreements.push((i, rep.m_hc, rep.m_hc_full, rep.kalman_m));
        }
        histogram[rep.m_hc.map_or(9, |m| m.min(8))] += 1;
    }
    let secs = start.elapsed().as_secs_f64();
    outcome(
        disagreements.is_empty() && secs < INDEX_RUNTIME_LIMIT_S,
        format!(
            "{RANDOM_FIXTURES} fixtures, {} disagreements {:?}, index histogram {:?}, {secs:.2}s (limit {INDEX_RUNTIME_LIMIT_S}s)",
            disagreements.len(),
            disagreements.iter().take(3).collect::<Vec<_>>(),
            &histogram[..9],
        ),
    )
}

fn criterion_2() -> Outcome {
    let found: Vec<(&str, Option<usize>, usize)> = fixtures::reference_set()
        .into_iter()
        .map(|(name, op, m)| (name, index_by_sums(&op, IndexOptions::default()).unwrap().m_hc, m))
        .collect();
    outcome(
        found.iter().all(|(_, got, want)| *got == Some(*want)),
        format!("{found:?}"),
    )
}

fn criterion_3() -> Outcome {
    let op = fixtures::rotation();
    let cert = build_certificate(&op, &GridSpec::default()).unwrap();
    let m = 1;
    // oracle path
    let kappa = oracle_skew_kappa(&op, m);
    let kappa1 = kappa / 2.0;
    let k = oracle_k(&op, m);
    let r = (2.0 * k / kappa1).max(1.0);
    if !r.is_finite() {
        return outcome(false, format!("oracle R is not finite (kappa={kappa}, K={k})"));
    }
    let steps = ((r - 1.0) / ORACLE_GRID_STEP).round() as usize;
    let inf = (0..=steps)
        .flat_map(|i| {
            let eta = 1.0 + (r - 1.0) * i as f64 / steps as f64;
            [eta, -eta]
        })
        .map(|eta| oracle_kappa(&op, eta, m))
        .fold(f64::INFINITY, f64::min);
    let mu_r = inf / r.powi(2 * m as i32);
    let sigma = kappa1.min(2.0 * mu_r);

    let closed_mu = (3.0 - 5f64.sqrt()) / 128.0;
    let closed = [
        ("kappa", cert.kappa, kappa, 1.0),
        ("kappa1", cert.kappa1, kappa1, 0.5),
        ("K", cert.k, k, 2.0),
        ("R", cert.r, r, 8.0),
        ("mu_R", cert.mu_r, mu_r, closed_mu),
        ("sigma", cert.sigma, sigma, 0.5f64.min(2.0 * closed_mu)),
    ];
    let mut pass = cert.m_hc == m;
    let mut parts = Vec::new();
    for (name, module, oracle, exact) in closed {
        let ok = (module - exact).abs() <= CERT_ABS_TOL && rel_close(module, oracle, CERT_REL_TOL);
        pass &= ok;
        parts.push(format!("{name}={module:.9} (oracle {oracle:.9})"));
    }
    outcome(pass, parts.join(", "))
}

fn lyapunov_fixtures() -> Vec<(&'static str, WeightedOperator)> {
    let mut v: Vec<(&str, WeightedOperator)> =
        fixtures::reference_set().into_iter().map(|(n, op, _)| (n, op)).collect();
    v.push(("damped-wave", fixtures::damped_wave().operator().clone()));
    v
}

fn criterion_4() -> Outcome {
    let mut pass = true;
    let mut parts = Vec::new();
    for (name, op) in lyapunov_fixtures() {
        let cert = build_certificate(&op, &GridSpec::default()).unwrap();
        let modes = ModeSet::symmetric(1, LYAPUNOV_MODES).modes();
        let (mut min_p, mut min_margin) = (f64::INFINITY, f64::INFINITY);
        for eta in modes {
            let b = build_p_eta(&op, eta, cert.m_hc).unwrap();
            min_p = min_p.min(b.lambda_min_p);
            min_margin = min_margin.min(b.dissipation - cert.sigma);
        }
        let ok = min_p >= 1.0 - P_LOWER_TOL && min_margin >= -DISSIPATION_TOL && cert.sigma > 0.0;
        pass &= ok;
        parts.push(format!(
            "{name}: sigma={:.4e} min lambda(P)={min_p:.6} min margin={min_margin:.3e}",
            cert.sigma
        ));
    }
    outcome(pass, parts.join("; "))
}

fn criterion_5() -> Outcome {
    let mut pass = true;
    let mut parts = Vec::new();
    for (name, op, m) in fixtures::reference_set() {
        let a = exponent(m) as f64;
        for eta in [1.0, 4.0] {
            let (lo, hi) = scaled_window(&op, eta, FIT_WINDOW.0, FIT_WINDOW.1).unwrap();
            let curve = decay_curve(&op, eta, &log_times(lo, hi, FIT_SAMPLES)).unwrap();
            match fit_exponent(&curve, (lo, hi)) {
                Ok(fit) => {
                    let ok = (fit.a_fit - a).abs() <= EXPONENT_RTOL * a;
                    pass &= ok;
                    parts.push(format!("{name} eta={eta}: a_fit={:.4} (want {a})", fit.a_fit));
                }
                Err(e) => {
                    pass = false;
                    parts.push(format!("{name} eta={eta}: {e}"));
                }
            }
        }
        let cert = build_certificate(&op, &GridSpec::default()).unwrap();
        let modes = ModeSet::symmetric(1, UNIFORM_MODES).modes();
        let bound = uniform_bound(&op, &cert, &modes, 1.0).unwrap();
        let times = log_times(bound.tau * 1e-4, bound.tau, 200);
        let curve = family_sup_curve(&op, &modes, &times).unwrap();
        let violation = domination_violation(&curve, &bound);
        pass &= violation <= 0.0;
        parts.push(format!(
            "{name}: c1={:.4e} c2={:.4e} tau={:.4e} worst gap={violation:.3e}",
            bound.c1, bound.c2, bound.tau
        ));
    }
    outcome(pass, parts.join("; "))
}

fn criterion_6() -> Outcome {
    let mut pass = true;
    let mut parts = Vec::new();
    for (name, op, _) in fixtures::reference_set() {
        let cert = build_certificate(&op, &GridSpec::default()).unwrap();
        let sc = mode_scaling(&op, &cert, &SCALING_ETAS).unwrap();
        let ok = sc.bounds.iter().all(|b| b.pass && b.max_violation <= 0.0) && sc.k2_ratio < K2_RATIO_LIMIT;
        pass &= ok;
        parts.push(format!(
            "{name}: k2 in [{:.4e}, {:.4e}] ratio={:.3}",
            sc.k2_min, sc.k2_max, sc.k2_ratio
        ));
    }
    outcome(pass, parts.join("; "))
}

fn criterion_7() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(RANDOM_SEED + 7);
    let mut pass = true;
    let mut parts = Vec::new();
    for (name, op, m) in fixtures::reference_set() {
        let mut worst: f64 = 0.0;
        for _ in 0..IDENTITY_SAMPLES {
            let eta = rng.random_range(1.0..10.0) * if rng.random::<bool>() { 1.0 } else { -1.0 };
            let ell = rng.random_range(0..=m);
            let y = random_unit(&mut rng, op.dim());
            let norm = op.weight().operator_norm(&op.mode(eta)).unwrap();
            let t = rng.random_range(0.01..1.0) / norm;
            let chk = verify_expansion_identity(&op, eta, ell, &y, t, None).unwrap();
            worst = worst.max(chk.residual);
        }
        pass &= worst <= IDENTITY_RTOL;
        parts.push(format!("{name}: worst residual {worst:.2e}"));
    }
    let mut delta_ok = true;
    let mut checked = 0;
    for j in 1..=DELTA_MAX_J {
        for ell in 0..=j {
            for k in 0..j {
                let d = delta_coeff(ell, j, k);
                checked += 1;
                delta_ok &= (0.0..=1.0).contains(&d);
                if ell == 0 {
                    delta_ok &= d == 1.0;
                }
            }
        }
    }
    pass &= delta_ok;
    parts.push(format!("Delta in [0,1] on {checked} triples: {delta_ok}"));
    outcome(pass, parts.join("; "))
}

fn wave_data(zeta: f64) -> CVector {
    CVector::from_vec(vec![c64(zeta.sin(), 0.0), c64(1.0 + zeta.cos(), 0.0)])
}

fn criterion_8() -> Outcome {
    let sys = fixtures::damped_wave();
    let op = sys.operator();
    let opts = DecayOptions::default();
    let mut parts = Vec::new();

    let worst_abscissa = ModeSet::symmetric(1, opts.m_max)
        .modes()
        .iter()
        .map(|&m| (spectral_abscissa(op, m).unwrap() + 0.5).abs())
        .fold(0.0, f64::max);
    let abscissa_ok = worst_abscissa <= ABSCISSA_TOL;
    parts.push(format!("abscissa error {worst_abscissa:.1e}"));

    let report = decay_report(&sys, &opts).unwrap();
    let a_fit = report.short_fit.as_ref().map_or(f64::NAN, |f| f.a_fit);
    let fit_ok = a_fit >= PH_A_RANGE.0 && a_fit <= PH_A_RANGE.1;
    parts.push(format!("a_fit={a_fit:.4}"));

    let samples = sample_function(wave_data, 4 * ORACLE_MODES + 8);
    let state = project_initial(&samples, sys.h(), ORACLE_MODES).unwrap().state;
    let exact = evolve(&state, &sys, 1.0).unwrap();
    let rk = oracle_evolve(&state, &sys, 1.0, ORACLE_DT).unwrap();
    let oracle_err = exact.rel_distance(&rk);
    let oracle_ok = oracle_err <= ORACLE_RTOL;
    parts.push(format!("RK oracle rel err {oracle_err:.2e}"));

    let times: Vec<f64> = (0..=200).map(|i| 0.05 * i as f64).collect();
    let energies: Vec<f64> = times
        .iter()
        .map(|&t| evolve(&state, &sys, t).unwrap().energy(sys.h()))
        .collect();
    let max_slope = energies
        .windows(2)
        .zip(times.windows(2))
        .map(|(e, t)| (e[1] - e[0]) / (t[1] - t[0]))
        .fold(f64::NEG_INFINITY, f64::max);
    let energy_ok = max_slope <= ENERGY_SLOPE_TOL;
    parts.push(format!("max energy slope {max_slope:.2e}"));

    let proj = equilibrium_projector(&sys).unwrap();
    let q0 = proj.apply(&state);
    let expected = CVector::from_vec(vec![c64(0.0, 0.0), c64(1.0, 0.0)]);
    let q_ok = (q0.coeff(0) - &expected).norm() <= COMMUTE_TOL;
    let mut commute_err: f64 = 0.0;
    for &t in &[0.1, 1.0, 5.0] {
        let a = proj.apply(&evolve(&state, &sys, t).unwrap());
        let b = evolve(&q0, &sys, t).unwrap();
        commute_err = commute_err.max(a.rel_distance(&b));
    }
    let commute_ok = commute_err <= COMMUTE_TOL;
    parts.push(format!("Q x0 = {:?}, commutator {commute_err:.1e}", q0.coeff(0).iter().map(|z| z.re).collect::<Vec<_>>()));

    outcome(
        abscissa_ok && fit_ok && oracle_ok && energy_ok && q_ok && commute_ok,
        parts.join(", "),
    )
}

fn criterion_9() -> Outcome {
    let sys = fixtures::undamped_wave();
    let samples = sample_function(
        |z| CVector::from_vec(vec![c64(z.sin() + 0.3 * (3.0 * z).cos(), 0.0), c64(1.0 + z.cos(), 0.2 * (2.0 * z).sin())]),
        64,
    );
    let state = project_initial(&samples, sys.h(), 8).unwrap().state;
    let e0 = state.energy(sys.h());
    let worst = (1..=100)
        .map(|i| {
            let e = evolve(&state, &sys, 0.1 * i as f64).unwrap().energy(sys.h());
            (e - e0).abs() / e0
        })
        .fold(0.0, f64::max);
    outcome(worst <= CONSERVATION_RTOL, format!("worst relative energy drift {worst:.2e} on [0, 10]"))
}

type Criterion = (&'static str, fn() -> Outcome);

fn main() {
    let criteria: [Criterion; 9] = [
        ("index agreement on random fixtures", criterion_1),
        ("reference fixture indices", criterion_2),
        ("constructive certificate on the 2x2 fixture", criterion_3),
        ("Lyapunov blocks on modes +-1..+-20", criterion_4),
        ("short-time exponent and two-sided bound", criterion_5),
        ("mode independence of k2", criterion_6),
        ("expansion identity and Delta range", criterion_7),
        ("damped-wave port-Hamiltonian system", criterion_8),
        ("energy conservation without damping", criterion_9),
    ];
    let mut failures = 0;
    // ACCEPTANCE_ONLY=3,5 runs a subset.
    let only: Option<Vec<usize>> = std::env::var("ACCEPTANCE_ONLY")
        .ok()
        .map(|v| v.split(',').filter_map(|x| x.trim().parse().ok()).collect());
    for (i, (title, run)) in criteria.iter().enumerate() {
        if only.as_ref().is_some_and(|o| !o.contains(&(i + 1))) {
            continue;
        }
        let start = Instant::now();
        let out = run();
        let tag = if out.pass { "PASS" } else { "FAIL" };
        failures += !out.pass as usize;
        println!(
            "criterion {}: {tag} {title} [{:.1}s] {}",
            i + 1,
            start.elapsed().as_secs_f64(),
            out.detail
        );
    }
    if failures > 0 {
        println!("{failures} criteria failed");
        std::process::exit(1);
    }
    println!("all criteria passed");
}
