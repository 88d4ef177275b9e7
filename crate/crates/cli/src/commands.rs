//! The four analysis pipelines. Each returns report sections and an exit code.

use std::path::Path;

use hypocert::family::{ModeFamily, ModeSet};
use hypocert::index::{certificate_from_report, index_by_sums, GridSpec, IndexOptions, IndexReport};
use hypocert::linalg::{c64, CVector, WeightedOperator};
use hypocert::lyapunov::{certify_family, DISSIPATION_TOL};
use hypocert::ph::{
    decay_report, equilibrium_projector, evolve, lyapunov_ph, oracle_evolve, project_initial, DecayOptions,
    ModalState, PhSystem,
};
use hypocert::shorttime::{
    decay_curve, domination_violation, exponent, family_sup_curve, fit_exponent, log_times, mode_scaling,
    scaled_window, uniform_bound, DecayCurve,
};
use hypocert::Error;
use serde_json::{json, Map, Value};

use crate::error::{CliError, CONDITIONING, DISAGREEMENT, NEGATIVE, PASS};
use crate::input::{load_samples, vector_json, MatrixFile};

/// Allowed relative deviation of the fitted short-time exponent from `2m + 1`.
pub const EXPONENT_RTOL: f64 = 0.10;
/// Samples of the family supremum checked against the two-sided bound.
pub const DOMINATION_POINTS: usize = 200;
/// Modes kept for the Runge-Kutta cross-check.
pub const ORACLE_MODES: usize = 16;
pub const ORACLE_TIME: f64 = 1.0;
pub const ORACLE_DT: f64 = 1e-3;
pub const ORACLE_RTOL: f64 = 1e-8;
/// Largest energy increase between consecutive samples, relative to the initial energy.
pub const ENERGY_RTOL: f64 = 1e-10;
/// Largest relative energy drift accepted as conservation.
pub const CONSERVATION_RTOL: f64 = 1e-10;
pub const COMMUTE_TOL: f64 = 1e-12;
pub const COMMUTE_TIMES: [f64; 3] = [0.1, 1.0, 5.0];

pub struct Outcome {
    pub sections: Map<String, Value>,
    pub code: u8,
}

fn to_json<T: serde::Serialize>(v: &T) -> Value {
    serde_json::to_value(v).expect("report types serialize")
}

/// `"a..b"` is `{±a, ..., ±b}`; otherwise a comma-separated list.
pub fn parse_modes(spec: &str) -> Result<ModeSet, CliError> {
    let bad = || CliError::input(format!("cannot read mode set {spec:?}"));
    let set = match spec.split_once("..") {
        Some((a, b)) => {
            let from: u64 = a.trim().parse().map_err(|_| bad())?;
            let to: u64 = b.trim().parse().map_err(|_| bad())?;
            if from > to {
                return Err(bad());
            }
            ModeSet::symmetric(from, to)
        }
        None => ModeSet::list(
            spec.split(',')
                .map(|s| s.trim().parse::<f64>().map_err(|_| bad()))
                .collect::<Result<_, _>>()?,
        ),
    };
    set.validate()?;
    Ok(set)
}

/// `"x,y"` with both parts finite.
pub fn parse_pair(flag: &str, spec: &str) -> Result<(f64, f64), CliError> {
    let bad = || CliError::input(format!("--{flag} expects two comma-separated numbers, got {spec:?}"));
    let (a, b) = spec.split_once(',').ok_or_else(bad)?;
    let a: f64 = a.trim().parse().map_err(|_| bad())?;
    let b: f64 = b.trim().parse().map_err(|_| bad())?;
    if !(a.is_finite() && b.is_finite()) {
        return Err(bad());
    }
    Ok((a, b))
}

fn check_window(window: (f64, f64)) -> Result<(), CliError> {
    if window.0 > 0.0 && window.1 > window.0 {
        Ok(())
    } else {
        Err(CliError::input(format!("window {window:?} must satisfy 0 < lo < hi")))
    }
}

fn index_checks(report: &IndexReport) -> Value {
    json!({
        "routes_agree": {
            "pass": report.routes_agree(),
            "skew_sums": report.m_hc,
            "full_sums": report.m_hc_full,
            "kalman": report.kalman_m,
            "tol": report.tol,
            "rank_tol": report.rank_tol,
        },
        "hypocoercive": {
            "pass": report.is_hypocoercive(),
            "max_m_searched": report.max_m_searched,
            "tol": report.tol,
        },
    })
}

pub fn index(op: &WeightedOperator, tol: Option<f64>, max_m: Option<usize>) -> Result<Outcome, CliError> {
    if let Some(t) = tol {
        if !(t > 0.0 && t.is_finite()) {
            return Err(CliError::input(format!("--tol must be positive, got {t}")));
        }
    }
    let report = index_by_sums(op, IndexOptions { tol, max_m })?;
    let code = if !report.routes_agree() {
        eprintln!(
            "index routes disagree: skew sums {:?}, full sums {:?}, Kalman {:?}",
            report.m_hc, report.m_hc_full, report.kalman_m
        );
        DISAGREEMENT
    } else if report.is_hypocoercive() {
        PASS
    } else {
        NEGATIVE
    };
    let mut sections = Map::new();
    sections.insert("checks".into(), index_checks(&report));
    sections.insert("index".into(), to_json(&report));
    Ok(Outcome { sections, code })
}

pub fn certify(op: &WeightedOperator, modes: &str, grid_step: f64) -> Result<Outcome, CliError> {
    let modes = parse_modes(modes)?;
    if !(grid_step > 0.0 && grid_step.is_finite()) {
        return Err(CliError::input(format!("--grid-step must be positive, got {grid_step}")));
    }
    let grid = GridSpec {
        step: grid_step,
        ..GridSpec::default()
    };
    let report = index_by_sums(op, IndexOptions::default())?;
    let mut sections = Map::new();
    sections.insert("index".into(), to_json(&report));
    if !report.is_hypocoercive() {
        sections.insert("checks".into(), index_checks(&report));
        return Ok(Outcome { sections, code: NEGATIVE });
    }
    let cert = certificate_from_report(op, &report, &grid)?;
    let family = certify_family(&ModeFamily::new(op.clone(), modes)?, &cert)?;
    let sigma_ok = family.sigma_numeric >= family.sigma_constructive - DISSIPATION_TOL;
    sections.insert(
        "checks".into(),
        json!({
            "sigma": {
                "pass": sigma_ok,
                "sigma_numeric": family.sigma_numeric,
                "sigma_constructive": family.sigma_constructive,
                "tol": DISSIPATION_TOL,
            },
            "blocks": {
                "pass": family.blocks_pass,
                "min_lambda_p": family.min_lambda_p,
                "p_lower_tol": family.p_lower_tol,
                "max_p_norm": family.max_p_norm,
                "p_norm_bound": family.p_norm_bound,
                "dissipation_tol": family.dissipation_tol,
                "hermitian_rtol": family.hermitian_rtol,
            },
        }),
    );
    sections.insert("grid".into(), to_json(&grid));
    sections.insert("certificate".into(), to_json(&cert));
    sections.insert("family".into(), to_json(&family));
    let code = if family.pass && sigma_ok { PASS } else { DISAGREEMENT };
    Ok(Outcome { sections, code })
}

fn write_csv(dir: &Path, name: &str, header: &[&str], columns: &[&[f64]]) -> Result<(), CliError> {
    let io = |e: csv::Error| CliError::input(format!("cannot write {}: {e}", dir.join(name).display()));
    std::fs::create_dir_all(dir).map_err(|e| io(e.into()))?;
    let mut w = csv::Writer::from_path(dir.join(name)).map_err(io)?;
    w.write_record(header).map_err(io)?;
    for i in 0..columns[0].len() {
        w.write_record(columns.iter().map(|c| c[i].to_string())).map_err(io)?;
    }
    w.flush().map_err(|e| io(e.into()))
}

fn write_curve(dir: &Path, name: &str, curve: &DecayCurve) -> Result<(), CliError> {
    write_csv(
        dir,
        name,
        &["time", "sq_norm", "defect", "defect_err"],
        &[&curve.times, &curve.sq_norms, &curve.defects, &curve.defect_errs],
    )
}

pub struct ShortTimeArgs<'a> {
    pub modes: &'a str,
    pub window: (f64, f64),
    pub samples: usize,
    pub csv: Option<&'a Path>,
}

pub fn shorttime(op: &WeightedOperator, args: &ShortTimeArgs) -> Result<Outcome, CliError> {
    let modes = parse_modes(args.modes)?.modes();
    check_window(args.window)?;
    if args.samples < 2 {
        return Err(CliError::input("--samples must be at least 2".into()));
    }
    let report = index_by_sums(op, IndexOptions::default())?;
    let mut sections = Map::new();
    sections.insert("index".into(), to_json(&report));
    let Some(m) = report.m_hc else {
        sections.insert("checks".into(), index_checks(&report));
        return Ok(Outcome { sections, code: NEGATIVE });
    };
    let a = exponent(m);
    let mut curves = Vec::new();
    let mut fits = Vec::new();
    let mut csv_files = Vec::new();
    let mut exponent_ok = true;
    for &eta in &modes {
        let (lo, hi) = scaled_window(op, eta, args.window.0, args.window.1)?;
        let curve = decay_curve(op, eta, &log_times(lo, hi, args.samples))?;
        let fit = fit_exponent(&curve, (lo, hi)).map_err(|e| {
            let suggested = match &e {
                Error::Conditioning {
                    suggested_lo,
                    suggested_hi,
                    ..
                } => Some((*suggested_lo, *suggested_hi)),
                _ => None,
            };
            let mut err = CliError::from(e);
            if let Some((s_lo, s_hi)) = suggested {
                // back to the units of --window
                let scale = args.window.0 / lo;
                err.detail.insert("eta".into(), json!(eta));
                err.detail.insert("suggested_window".into(), json!([s_lo * scale, s_hi * scale]));
            }
            err
        })?;
        let ok = (fit.a_fit - a as f64).abs() <= EXPONENT_RTOL * a as f64;
        exponent_ok &= ok;
        fits.push(json!({ "eta": eta, "fit": to_json(&fit), "pass": ok }));
        if let Some(dir) = args.csv {
            let name = format!("curve_eta_{eta}.csv");
            write_curve(dir, &name, &curve)?;
            csv_files.push(name);
        }
        curves.push(to_json(&curve));
    }

    let cert = certificate_from_report(op, &report, &GridSpec::default())?;
    let scaling = mode_scaling(op, &cert, &modes)?;
    let eta0 = modes.iter().copied().fold(f64::INFINITY, |x, e| x.min(e.abs()));
    let bound = uniform_bound(op, &cert, &modes, eta0)?;
    let sup = family_sup_curve(op, &modes, &log_times(bound.tau * 1e-4, bound.tau, DOMINATION_POINTS))?;
    let violation = domination_violation(&sup, &bound);

    sections.insert("certificate".into(), to_json(&cert));
    sections.insert("curves".into(), Value::Array(curves));
    sections.insert(
        "fits".into(),
        json!({ "exponent": fits, "mode_scaling": to_json(&scaling), "uniform": to_json(&bound) }),
    );
    sections.insert(
        "checks".into(),
        json!({
            "exponent": { "pass": exponent_ok, "expected": a, "rtol": EXPONENT_RTOL },
            "mode_scaling": {
                "pass": scaling.pass,
                "k2_ratio": scaling.k2_ratio,
                "ratio_limit": scaling.ratio_limit,
            },
            "domination": {
                "pass": violation <= 0.0,
                "worst_gap": violation,
                "limit": 0.0,
                "points": DOMINATION_POINTS,
            },
        }),
    );
    if args.csv.is_some() {
        sections.insert("csv".into(), json!(csv_files));
    }
    let code = if exponent_ok { PASS } else { DISAGREEMENT };
    Ok(Outcome { sections, code })
}

pub struct PhArgs<'a> {
    pub m_max: u64,
    pub t_grid: (f64, usize),
    pub window: (f64, f64),
    pub samples: usize,
    pub init: Option<&'a Path>,
    pub csv: Option<&'a Path>,
}

/// Deterministic initial state used without an initial-data file:
/// `z_m = (1, ..., 1) / (1 + m^2)`.
fn default_state(m_max: usize, n: usize) -> ModalState {
    let mut state = ModalState::zeros(m_max, n);
    for m in -(m_max as i64)..=m_max as i64 {
        *state.coeff_mut(m) = CVector::from_element(n, c64(1.0 / (1.0 + (m * m) as f64), 0.0));
    }
    state
}

fn truncate(state: &ModalState, m_max: usize) -> ModalState {
    let n = state.coeff(0).len();
    let mut out = ModalState::zeros(m_max, n);
    for m in -(m_max as i64)..=m_max as i64 {
        *out.coeff_mut(m) = state.coeff(m).clone();
    }
    out
}

pub fn ph(file: &MatrixFile, args: &PhArgs) -> Result<Outcome, CliError> {
    let sys: PhSystem = file.ph_system()?;
    let n = file.n;
    check_window(args.window)?;
    let (horizon, long_samples) = args.t_grid;
    if !(horizon > 0.0 && horizon.is_finite()) || long_samples < 8 {
        return Err(CliError::input("--t-grid needs a positive horizon and at least 8 samples".into()));
    }
    if args.m_max == 0 {
        return Err(CliError::input("--M must be at least 1".into()));
    }
    let opts = DecayOptions {
        m_max: args.m_max,
        window: args.window,
        short_samples: args.samples,
        horizon,
        long_samples,
    };
    let decay = decay_report(&sys, &opts)?;
    let proj = equilibrium_projector(&sys)?;

    let mut initial = Map::new();
    let state = match args.init {
        Some(path) => {
            let loaded = load_samples(path, n)?;
            let count = loaded.value.len();
            let m0 = ((count - 1) / 4).min(args.m_max as usize);
            if m0 == 0 {
                return Err(CliError::input(format!("{count} samples resolve no modes; need at least 5")));
            }
            let p = project_initial(&loaded.value, sys.h(), m0)?;
            initial.insert("source".into(), json!("file"));
            initial.insert("sha256".into(), json!(loaded.sha256));
            initial.insert("samples".into(), json!(count));
            initial.insert("aliasing_energy".into(), json!(p.aliasing_energy));
            p.state
        }
        None => {
            initial.insert("source".into(), json!("default"));
            default_state((args.m_max as usize).min(ORACLE_MODES), n)
        }
    };
    initial.insert("modes".into(), json!(state.m_max));
    let q0 = proj.apply(&state);
    initial.insert("equilibrium".into(), vector_json(q0.coeff(0)));

    let times: Vec<f64> = std::iter::once(0.0).chain(decay.long_times.iter().copied()).collect();
    let energies: Vec<f64> = times
        .iter()
        .map(|&t| Ok(evolve(&state, &sys, t)?.energy(sys.h())))
        .collect::<Result<_, Error>>()?;
    let e0 = energies[0];
    let scale = if e0 > 0.0 { e0 } else { 1.0 };
    let max_increase = energies.windows(2).map(|e| e[1] - e[0]).fold(f64::NEG_INFINITY, f64::max) / scale;
    let drift = energies.iter().map(|e| (e - e0).abs()).fold(0.0, f64::max) / scale;

    let small = truncate(&state, state.m_max.min(ORACLE_MODES));
    let exact = evolve(&small, &sys, ORACLE_TIME)?;
    let rk = oracle_evolve(&small, &sys, ORACLE_TIME, ORACLE_DT)?;
    let oracle_err = exact.rel_distance(&rk);

    let mut commute_err: f64 = 0.0;
    for t in COMMUTE_TIMES {
        let a = proj.apply(&evolve(&state, &sys, t)?);
        let b = evolve(&q0, &sys, t)?;
        commute_err = commute_err.max(a.rel_distance(&b));
    }

    let mut checks = Map::new();
    checks.insert(
        "oracle".into(),
        json!({ "pass": oracle_err <= ORACLE_RTOL, "rel_err": oracle_err, "rtol": ORACLE_RTOL,
                "time": ORACLE_TIME, "dt": ORACLE_DT, "modes": small.m_max }),
    );
    checks.insert(
        "energy_monotone".into(),
        json!({ "pass": max_increase <= ENERGY_RTOL, "max_rel_increase": max_increase, "rtol": ENERGY_RTOL }),
    );
    checks.insert(
        "equilibrium_commutes".into(),
        json!({ "pass": commute_err <= COMMUTE_TOL, "rel_err": commute_err, "tol": COMMUTE_TOL,
                "times": COMMUTE_TIMES }),
    );

    let conservative = sys.r().iter().all(|z| *z == c64(0.0, 0.0));
    let mut sections = Map::new();
    let code = match decay.m_hc {
        None => {
            if conservative {
                checks.insert(
                    "energy_conserved".into(),
                    json!({ "pass": drift <= CONSERVATION_RTOL, "max_rel_drift": drift, "rtol": CONSERVATION_RTOL }),
                );
            }
            NEGATIVE
        }
        Some(_) => {
            let lyap = lyapunov_ph(&sys, args.m_max)?;
            let a = decay.a_expected.expect("set with the index") as f64;
            let (exponent_ok, a_fit) = match &decay.short_fit {
                Some(f) => ((f.a_fit - a).abs() <= EXPONENT_RTOL * a, Some(f.a_fit)),
                None => (false, None),
            };
            checks.insert(
                "exponent".into(),
                json!({ "pass": exponent_ok, "a_fit": a_fit, "expected": a, "rtol": EXPONENT_RTOL }),
            );
            checks.insert(
                "lyapunov".into(),
                json!({ "pass": lyap.pass, "sigma": lyap.sigma, "p_lower_tol": lyap.family.p_lower_tol,
                        "dissipation_tol": lyap.family.dissipation_tol }),
            );
            sections.insert("certificate".into(), to_json(&lyap));
            let all = checks.values().all(|c| c["pass"] == json!(true));
            if all {
                PASS
            } else if decay.short_fit.is_none() {
                CONDITIONING
            } else {
                DISAGREEMENT
            }
        }
    };

    if let Some(dir) = args.csv {
        write_curve(dir, "short.csv", &decay.short)?;
        write_csv(dir, "long.csv", &["time", "norm"], &[&decay.long_times, &decay.long_norms])?;
        write_csv(dir, "energy.csv", &["time", "energy"], &[&times, &energies])?;
        sections.insert("csv".into(), json!(["short.csv", "long.csv", "energy.csv"]));
    }
    sections.insert("conservative".into(), json!(conservative));
    sections.insert("decay".into(), to_json(&decay));
    sections.insert("initial".into(), Value::Object(initial));
    sections.insert("curves".into(), json!({ "energy": { "times": times, "energy": energies } }));
    sections.insert("checks".into(), Value::Object(checks));
    Ok(Outcome { sections, code })
}
