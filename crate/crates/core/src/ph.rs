//! Linear port-Hamiltonian systems `x_t = (P1 d/dzeta - R) H x` on the
//! periodic interval `[0, 2 pi]`.
//!
//! Expanding in Fourier modes `phi_m = e^{i m zeta}` gives the decoupled
//! family `dz_m/dt = -C_m z_m` with `C_m = m C_S + C_H`, `C_S = -i P1 H` and
//! `C_H = R H`, all in the energy product `<x, y>_H = x* H y`. The semigroup
//! converges to the projector onto constant states with values in `ker(RH)`.

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::family::{ModeFamily, ModeSet};
use crate::index::{build_certificate, index_by_sums, GridSpec, IndexOptions};
use crate::linalg::{c64, propagator, singular_values, CMatrix, CVector, Weight, WeightedOperator, LOEWNER_RTOL};
use crate::lyapunov::{certify_family, FamilyCertificate, DISSIPATION_TOL};
use crate::shorttime::{
    exponent, family_sup_curve, fit_exponent, log_times, spectral_abscissa, uniform_bound, DecayCurve,
    NormDefect, ShortTimeFit, UniformBound,
};

/// Relative threshold below which an eigenvalue of `RH` counts as zero.
pub const KERNEL_RTOL: f64 = 1e-10;
/// Largest `dt max ||C_m||` accepted by the Runge-Kutta oracle.
pub const RK_STABILITY_LIMIT: f64 = 0.1;

#[derive(Debug, Clone)]
pub struct PhSystem {
    p1: CMatrix,
    r: CMatrix,
    op: WeightedOperator,
}

impl PhSystem {
    /// Validates `P1 = P1*` invertible, `R = R* >= 0` and `H = H* > 0`, then
    /// forms `C_S = -i P1 H` and `C_H = R H` over the weight `H`.
    pub fn new(p1: CMatrix, r: CMatrix, h: CMatrix) -> Result<Self> {
        let n = h.nrows();
        for (name, m) in [("P1", &p1), ("R", &r), ("H", &h)] {
            if m.nrows() != n || m.ncols() != n {
                return Err(Error::Dimension(format!(
                    "{name} is {}x{}, expected {n}x{n}",
                    m.nrows(),
                    m.ncols()
                )));
            }
        }
        let weight = Weight::new(h.clone())?;
        for m in [&p1, &r] {
            let residual = (m - m.adjoint()).norm();
            let tol = LOEWNER_RTOL * m.norm();
            if residual > tol {
                return Err(Error::NotHermitian { residual, tol });
            }
        }
        let sv = singular_values(&p1);
        if sv.is_empty() || sv[sv.len() - 1] <= LOEWNER_RTOL * sv[0] {
            return Err(Error::InvalidArgument("P1 is singular".into()));
        }
        let (r_values, _) = crate::linalg::eigh(&r)?;
        let r_min = r_values.first().copied().unwrap_or(0.0);
        if r_min < -LOEWNER_RTOL * r.norm() {
            return Err(Error::InvalidArgument(format!(
                "R is not positive semidefinite (smallest eigenvalue {r_min:e})"
            )));
        }
        let skew = (&p1 * &h) * c64(0.0, -1.0);
        let herm = &r * &h;
        let op = WeightedOperator::from_parts(skew, herm, weight)?;
        op.ensure_accretive()?;
        Ok(Self { p1, r, op })
    }

    pub fn dim(&self) -> usize {
        self.op.dim()
    }

    pub fn p1(&self) -> &CMatrix {
        &self.p1
    }

    pub fn r(&self) -> &CMatrix {
        &self.r
    }

    pub fn h(&self) -> &CMatrix {
        self.op.weight().matrix()
    }

    /// Base operator `C_S + C_H` over the weight `H`.
    pub fn operator(&self) -> &WeightedOperator {
        &self.op
    }

    /// `C_m = m C_S + C_H`; mode 0 is `C_H`.
    pub fn mode_matrix(&self, m: i64) -> CMatrix {
        self.op.mode(m as f64)
    }
}

/// Mode family `{±1, ..., ±M}` of the system.
pub fn build_mode_family(sys: &PhSystem, m_max: u64) -> Result<ModeFamily> {
    if m_max == 0 {
        return Err(Error::InvalidArgument("truncation M must be at least 1".into()));
    }
    ModeFamily::new(sys.op.clone(), ModeSet::symmetric(1, m_max))
}

/// Fourier coefficients `z_m`, `|m| <= M`, at time `time`.
#[derive(Debug, Clone, PartialEq)]
pub struct ModalState {
    pub m_max: usize,
    coeffs: Vec<CVector>,
    pub time: f64,
}

impl ModalState {
    pub fn zeros(m_max: usize, n: usize) -> Self {
        Self {
            m_max,
            coeffs: vec![CVector::zeros(n); 2 * m_max + 1],
            time: 0.0,
        }
    }

    pub fn coeff(&self, m: i64) -> &CVector {
        &self.coeffs[(m + self.m_max as i64) as usize]
    }

    pub fn coeff_mut(&mut self, m: i64) -> &mut CVector {
        &mut self.coeffs[(m + self.m_max as i64) as usize]
    }

    pub fn modes(&self) -> impl Iterator<Item = i64> {
        let mm = self.m_max as i64;
        -mm..=mm
    }

    /// `2 pi Σ z_m* H z_m`.
    pub fn energy(&self, h: &CMatrix) -> f64 {
        2.0 * PI * self.coeffs.iter().map(|z| z.dotc(&(h * z)).re).sum::<f64>()
    }

    /// `x(zeta) = Σ z_m e^{i m zeta}`.
    pub fn reconstruct(&self, zeta: f64) -> CVector {
        self.modes()
            .map(|m| self.coeff(m) * c64(0.0, m as f64 * zeta).exp())
            .fold(CVector::zeros(self.coeffs[0].len()), |acc, v| acc + v)
    }

    /// Largest coefficient difference, relative to the larger state.
    pub fn rel_distance(&self, other: &Self) -> f64 {
        let diff: f64 = self
            .coeffs
            .iter()
            .zip(&other.coeffs)
            .map(|(a, b)| (a - b).norm_squared())
            .sum();
        let scale = self
            .coeffs
            .iter()
            .map(|a| a.norm_squared())
            .sum::<f64>()
            .max(other.coeffs.iter().map(|a| a.norm_squared()).sum::<f64>());
        if scale == 0.0 {
            diff.sqrt()
        } else {
            (diff / scale).sqrt()
        }
    }
}

/// `count` uniform samples `x(2 pi k / count)`.
pub fn sample_function<F: Fn(f64) -> CVector>(f: F, count: usize) -> Vec<CVector> {
    (0..count).map(|k| f(2.0 * PI * k as f64 / count as f64)).collect()
}

#[derive(Debug, Clone)]
pub struct Projection {
    pub state: ModalState,
    /// Quadrature energy of the samples not captured by the retained modes.
    pub aliasing_energy: f64,
}

/// Discrete Fourier coefficients `z_m = (1/N) Σ_k x_k e^{-i m zeta_k}`.
pub fn project_initial(samples: &[CVector], h: &CMatrix, m_max: usize) -> Result<Projection> {
    let count = samples.len();
    if count < 4 * m_max + 1 {
        return Err(Error::InvalidArgument(format!(
            "{count} samples cannot resolve {m_max} modes; need at least {}",
            4 * m_max + 1
        )));
    }
    let n = h.nrows();
    if samples.iter().any(|x| x.len() != n) {
        return Err(Error::Dimension(format!("samples must have length {n}")));
    }
    let mut state = ModalState::zeros(m_max, n);
    for m in state.modes().collect::<Vec<_>>() {
        let z = samples
            .iter()
            .enumerate()
            .map(|(k, x)| x * c64(0.0, -(m as f64) * 2.0 * PI * k as f64 / count as f64).exp())
            .fold(CVector::zeros(n), |acc, v| acc + v)
            / c64(count as f64, 0.0);
        *state.coeff_mut(m) = z;
    }
    let grid_energy = 2.0 * PI / count as f64 * samples.iter().map(|x| x.dotc(&(h * x)).re).sum::<f64>();
    let aliasing_energy = (grid_energy - state.energy(h)).max(0.0);
    Ok(Projection { state, aliasing_energy })
}

/// `z_m(t) = e^{-C_m t} z_m(0)` for every retained mode.
pub fn evolve(state: &ModalState, sys: &PhSystem, t: f64) -> Result<ModalState> {
    let modes: Vec<i64> = state.modes().collect();
    let coeffs: Vec<CVector> = modes
        .par_iter()
        .map(|&m| Ok(propagator(&sys.mode_matrix(m), t)? * state.coeff(m)))
        .collect::<Result<_>>()?;
    Ok(ModalState {
        m_max: state.m_max,
        coeffs,
        time: state.time + t,
    })
}

/// Classical fourth-order Runge-Kutta for each mode with step at most `dt`.
pub fn oracle_evolve(state: &ModalState, sys: &PhSystem, t: f64, dt: f64) -> Result<ModalState> {
    if !(t >= 0.0 && dt > 0.0) {
        return Err(Error::InvalidArgument(format!("need t >= 0 and dt > 0, got {t}, {dt}")));
    }
    let w = sys.op.weight();
    let modes: Vec<i64> = state.modes().collect();
    let max_norm = modes
        .iter()
        .map(|&m| w.operator_norm(&sys.mode_matrix(m)))
        .collect::<Result<Vec<f64>>>()?
        .into_iter()
        .fold(0.0, f64::max);
    if dt * max_norm > RK_STABILITY_LIMIT {
        return Err(Error::InvalidArgument(format!(
            "dt max||C_m|| = {:e} exceeds {RK_STABILITY_LIMIT}",
            dt * max_norm
        )));
    }
    let steps = (t / dt).ceil() as usize;
    let h = if steps == 0 { 0.0 } else { t / steps as f64 };
    let coeffs = modes
        .par_iter()
        .map(|&m| {
            let a = -sys.mode_matrix(m);
            let mut z = state.coeff(m).clone();
            for _ in 0..steps {
                let k1 = &a * &z;
                let k2 = &a * (&z + &k1 * c64(0.5 * h, 0.0));
                let k3 = &a * (&z + &k2 * c64(0.5 * h, 0.0));
                let k4 = &a * (&z + &k3 * c64(h, 0.0));
                z += (k1 + k2 * c64(2.0, 0.0) + k3 * c64(2.0, 0.0) + k4) * c64(h / 6.0, 0.0);
            }
            z
        })
        .collect();
    Ok(ModalState {
        m_max: state.m_max,
        coeffs,
        time: state.time + t,
    })
}

/// `H`-orthogonal projector onto `ker(RH)`, acting on mode 0.
#[derive(Debug, Clone)]
pub struct EquilibriumProjector {
    /// `H`-orthonormal basis of `ker(RH)` as columns.
    pub kernel_basis: CMatrix,
    /// `H`-orthonormal basis of the complement.
    pub complement_basis: CMatrix,
    /// Eigenvalues of `RH` on the complement, ascending.
    pub complement_values: Vec<f64>,
    q: CMatrix,
}

pub fn equilibrium_projector(sys: &PhSystem) -> Result<EquilibriumProjector> {
    let w = sys.op.weight();
    let eig = w.hermitian_eig(sys.op.herm())?;
    let scale = eig.values.iter().fold(0.0f64, |a, &b| a.max(b.abs()));
    let cut = KERNEL_RTOL * scale.max(f64::MIN_POSITIVE);
    let n = sys.dim();
    let kernel: Vec<usize> = (0..n).filter(|&i| eig.values[i].abs() <= cut).collect();
    let complement: Vec<usize> = (0..n).filter(|&i| eig.values[i].abs() > cut).collect();
    let pick = |idx: &[usize]| CMatrix::from_fn(n, idx.len(), |r, c| eig.vectors[(r, idx[c])]);
    let kernel_basis = pick(&kernel);
    let complement_basis = pick(&complement);
    let q = &kernel_basis * kernel_basis.adjoint() * w.matrix();
    Ok(EquilibriumProjector {
        complement_values: complement.iter().map(|&i| eig.values[i]).collect(),
        kernel_basis,
        complement_basis,
        q,
    })
}

impl EquilibriumProjector {
    pub fn kernel_dim(&self) -> usize {
        self.kernel_basis.ncols()
    }

    /// Projector matrix on mode 0.
    pub fn matrix(&self) -> &CMatrix {
        &self.q
    }

    /// Smallest positive eigenvalue of `RH`, if the complement is nontrivial.
    pub fn kappa(&self) -> Option<f64> {
        self.complement_values.first().copied()
    }

    pub fn apply(&self, state: &ModalState) -> ModalState {
        let n = self.q.nrows();
        let mut out = ModalState::zeros(state.m_max, n);
        out.time = state.time;
        *out.coeff_mut(0) = &self.q * state.coeff(0);
        out
    }
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct DecayOptions {
    pub m_max: u64,
    /// Short-time fit window, in units of `1 / max_m ||C_m||`.
    pub window: (f64, f64),
    pub short_samples: usize,
    pub horizon: f64,
    pub long_samples: usize,
}

impl Default for DecayOptions {
    fn default() -> Self {
        Self {
            m_max: 64,
            window: (1e-3, 1e-2),
            short_samples: 40,
            horizon: 60.0,
            long_samples: 600,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct RateFit {
    /// `-slope` of the envelope of `log ||T(t) - Q||` on the second half of
    /// the horizon.
    pub omega: f64,
    pub intercept: f64,
    /// Largest excess of `log ||T(t) - Q||` over `intercept - (omega - slack) t`
    /// on the last quarter of the horizon minus that on the third quarter;
    /// nonpositive when the curve stays below the slackened line.
    pub envelope_excess: f64,
    pub slack: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct PhDecayReport {
    pub m_max: u64,
    pub kernel_dim: usize,
    pub m_hc: Option<usize>,
    pub a_expected: Option<u32>,
    pub short: DecayCurve,
    pub short_fit: Option<ShortTimeFit>,
    pub short_fit_error: Option<String>,
    pub long_times: Vec<f64>,
    pub long_norms: Vec<f64>,
    pub rate: Option<RateFit>,
    /// `min(min_m -abscissa(C_m), smallest positive eigenvalue of RH)`.
    pub omega_spectral: f64,
    pub uniform: Option<UniformBound>,
    /// `tau` of the two-sided bound for the modes `m != 0`.
    pub tau_family: Option<f64>,
    /// `tau_family` shrunk so the mode-0 block obeys the same upper bound.
    pub tau_with_kernel: Option<f64>,
}

/// Squared norm defects of `||T(t) - Q||` on the retained modes.
fn combined_curve(sys: &PhSystem, proj: &EquilibriumProjector, m_max: u64, times: &[f64]) -> Result<DecayCurve> {
    let modes = ModeSet::symmetric(1, m_max).modes();
    let mut curve = family_sup_curve(&sys.op, &modes, times)?;
    if let Some(kappa) = proj.kappa() {
        for (i, &t) in times.iter().enumerate() {
            // e^{-2 kappa t} on the complement of the kernel
            let d = -(-2.0 * kappa * t).exp_m1();
            if d < curve.defects[i] {
                curve.defects[i] = d;
                curve.sq_norms[i] = 1.0 - d;
                curve.defect_errs[i] = 4.0 * f64::EPSILON * d;
            }
        }
    }
    curve.label = "T-Q".into();
    Ok(curve)
}

fn max_mode_norm(sys: &PhSystem, m_max: u64) -> Result<f64> {
    let w = sys.op.weight();
    [-(m_max as i64), m_max as i64]
        .iter()
        .map(|&m| w.operator_norm(&sys.mode_matrix(m)))
        .try_fold(0.0f64, |acc, x| x.map(|v| acc.max(v)))
}

/// Short- and long-time behaviour of `||T(t) - Q||` on the truncated family.
pub fn decay_report(sys: &PhSystem, opts: &DecayOptions) -> Result<PhDecayReport> {
    let family = build_mode_family(sys, opts.m_max)?;
    let proj = equilibrium_projector(sys)?;
    let index = index_by_sums(&sys.op, IndexOptions::default())?;
    let m_hc = index.m_hc;
    let scale = max_mode_norm(sys, opts.m_max)?;
    let (lo, hi) = (opts.window.0 / scale, opts.window.1 / scale);
    let short_times = log_times(lo, hi, opts.short_samples);
    let short = combined_curve(sys, &proj, opts.m_max, &short_times)?;
    let (short_fit, short_fit_error) = match fit_exponent(&short, (lo, hi)) {
        Ok(f) => (Some(f), None),
        Err(e) => (None, Some(e.to_string())),
    };

    let long_times: Vec<f64> = (1..=opts.long_samples)
        .map(|i| opts.horizon * i as f64 / opts.long_samples as f64)
        .collect();
    let long = combined_curve(sys, &proj, opts.m_max, &long_times)?;
    let long_norms: Vec<f64> = long.sq_norms.iter().map(|s| s.max(0.0).sqrt()).collect();
    let rate = envelope_rate(&long_times, &long_norms);

    let modes = family.modes.modes();
    let abscissae: Vec<f64> = modes
        .par_iter()
        .map(|&m| spectral_abscissa(&sys.op, m))
        .collect::<Result<_>>()?;
    let mut omega_spectral = abscissae.iter().map(|a| -a).fold(f64::INFINITY, f64::min);
    if let Some(k) = proj.kappa() {
        omega_spectral = omega_spectral.min(k);
    }

    let (uniform, tau_family, tau_with_kernel) = match m_hc {
        Some(_) => {
            let cert = build_certificate(&sys.op, &GridSpec::default())?;
            let u = uniform_bound(&sys.op, &cert, &modes, 1.0)?;
            let tau_k = match proj.kappa() {
                Some(k) => kernel_window(k, u.c2, u.a, u.tau),
                None => u.tau,
            };
            (Some(u.clone()), Some(u.tau), Some(tau_k))
        }
        None => (None, None, None),
    };

    Ok(PhDecayReport {
        m_max: opts.m_max,
        kernel_dim: proj.kernel_dim(),
        m_hc,
        a_expected: m_hc.map(exponent),
        short,
        short_fit,
        short_fit_error,
        long_times,
        long_norms,
        rate,
        omega_spectral,
        uniform,
        tau_family,
        tau_with_kernel,
    })
}

/// Largest `t <= tau` with `1 - e^{-2 kappa s} >= c2 s^a` on all of `(0, t]`.
fn kernel_window(kappa: f64, c2: f64, a: u32, tau: f64) -> f64 {
    let holds = |s: f64| -(-2.0 * kappa * s).exp_m1() >= c2 * s.powi(a as i32);
    let grid = log_times(tau * 1e-6, tau, 400);
    match grid.iter().position(|&s| !holds(s)) {
        None => tau,
        Some(0) => 0.0,
        Some(i) => {
            let (mut good, mut bad) = (grid[i - 1], grid[i]);
            for _ in 0..60 {
                let mid = 0.5 * (good + bad);
                if holds(mid) {
                    good = mid;
                } else {
                    bad = mid;
                }
            }
            good
        }
    }
}

/// Fit `log ||T(t)|| ~ b - omega t` to the upper envelope of the second
/// half of the samples.
///
/// The line is a least-squares fit through the local maxima, each refined
/// to sub-sample accuracy by a parabola, when they span at least half the
/// window; otherwise a least-squares fit through all samples of the half.
/// `None` when the norm vanishes or does not decay.
pub fn envelope_rate(times: &[f64], norms: &[f64]) -> Option<RateFit> {
    if times.len() < 8 || norms.iter().any(|&x| !(x > 0.0)) {
        return None;
    }
    let logs: Vec<f64> = norms.iter().map(|x| x.ln()).collect();
    let half = times.len() / 2;
    let last = times.len() - 1;
    // local maxima (plateaus included) carry the envelope, each refined by
    // the parabola through its neighbours; a monotone tail falls back to all
    // samples
    let peaks: Vec<(f64, f64)> = (half + 1..last)
        .filter(|&i| logs[i] >= logs[i - 1] && logs[i] >= logs[i + 1])
        .map(|i| {
            let (l, c, r) = (logs[i - 1], logs[i], logs[i + 1]);
            let curv = l - 2.0 * c + r;
            let h = 0.5 * (times[i + 1] - times[i - 1]);
            if curv < 0.0 {
                let shift = 0.5 * (l - r) / curv;
                (times[i] + shift * h, c - 0.25 * (l - r) * shift)
            } else {
                (times[i], c)
            }
        })
        .collect();
    let spread = peaks.last().map_or(0.0, |p| p.0) - peaks.first().map_or(0.0, |p| p.0);
    let points = if peaks.len() >= 2 && spread >= 0.5 * (times[last] - times[half]) {
        peaks
    } else {
        (half..=last).map(|i| (times[i], logs[i])).collect()
    };
    let k = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / k;
    let my = points.iter().map(|p| p.1).sum::<f64>() / k;
    let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let omega = -sxy / sxx;
    if !(omega > 0.0) {
        return None;
    }
    let intercept = my + omega * mx;
    let slack = 1e-3;
    let excess = |range: std::ops::Range<usize>| {
        range
            .map(|i| logs[i] - (intercept - (omega - slack) * times[i]))
            .fold(f64::NEG_INFINITY, f64::max)
    };
    Some(RateFit {
        omega,
        intercept,
        envelope_excess: excess(half + (times.len() - half) / 2..times.len()) - excess(half..half + (times.len() - half) / 2),
        slack,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct PhLyapunov {
    pub family: FamilyCertificate,
    /// Smallest positive eigenvalue of `RH`; the mode-0 block dissipates at `2 kappa`.
    pub kappa: Option<f64>,
    /// `min(sigma_family, 2 kappa)`.
    pub sigma: f64,
    pub pass: bool,
}

/// Lyapunov certificate for the system: family blocks on `m != 0` and the
/// identity on mode 0.
pub fn lyapunov_ph(sys: &PhSystem, m_max: u64) -> Result<PhLyapunov> {
    let family = build_mode_family(sys, m_max)?;
    let cert = build_certificate(&sys.op, &GridSpec::default())?;
    let fc = certify_family(&family, &cert)?;
    let kappa = equilibrium_projector(sys)?.kappa();
    let sigma = match kappa {
        Some(k) => cert.sigma.min(2.0 * k),
        None => cert.sigma,
    };
    let mode0_ok = kappa.is_none_or(|k| 2.0 * k >= sigma - DISSIPATION_TOL);
    Ok(PhLyapunov {
        pass: fc.pass && mode0_ok,
        family: fc,
        kappa,
        sigma,
    })
}

/// Defect of `e^{-C_H t}` restricted to the kernel complement.
pub fn mode_zero_defect(proj: &EquilibriumProjector, t: f64) -> Option<NormDefect> {
    proj.kappa().map(|k| {
        let d = -(-2.0 * k * t).exp_m1();
        NormDefect {
            sq_norm: 1.0 - d,
            defect: d,
            err: 4.0 * f64::EPSILON * d,
            route: crate::shorttime::DefectRoute::Direct,
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::linalg::{identity, real_matrix};

    fn wave_data(zeta: f64) -> CVector {
        CVector::from_vec(vec![c64(zeta.sin(), 0.0), c64(1.0 + zeta.cos(), 0.0)])
    }

    #[test]
    fn damped_wave_split() {
        let sys = fixtures::damped_wave();
        let op = sys.operator();
        let expected_skew = real_matrix(2, 2, &[0.0, 1.0, 1.0, 0.0]) * c64(0.0, -1.0);
        assert!((op.skew() - expected_skew).norm() < 1e-15);
        assert!((op.herm() - real_matrix(2, 2, &[1.0, 0.0, 0.0, 0.0])).norm() < 1e-15);
        let rep = index_by_sums(op, IndexOptions::default()).unwrap();
        assert_eq!(rep.m_hc, Some(1));
    }

    #[test]
    fn invalid_triples_rejected() {
        let h = identity(2);
        let p1 = real_matrix(2, 2, &[0.0, 1.0, 1.0, 0.0]);
        assert!(PhSystem::new(real_matrix(2, 2, &[1.0, 0.0, 0.0, 0.0]), identity(2), h.clone()).is_err());
        assert!(PhSystem::new(p1.clone(), real_matrix(2, 2, &[-1.0, 0.0, 0.0, 0.0]), h.clone()).is_err());
        assert!(PhSystem::new(p1.clone(), identity(2), real_matrix(2, 2, &[1.0, 0.0, 0.0, -1.0])).is_err());
        assert!(PhSystem::new(p1, identity(3), h).is_err());
    }

    #[test]
    fn coercive_and_conservative_indices() {
        let p1 = real_matrix(2, 2, &[0.0, 1.0, 1.0, 0.0]);
        let sys = PhSystem::new(p1.clone(), identity(2), identity(2)).unwrap();
        assert_eq!(index_by_sums(sys.operator(), IndexOptions::default()).unwrap().m_hc, Some(0));
        let sys = fixtures::undamped_wave();
        assert_eq!(index_by_sums(sys.operator(), IndexOptions::default()).unwrap().m_hc, None);
    }

    #[test]
    fn projection_of_wave_data() {
        let sys = fixtures::damped_wave();
        let p = project_initial(&sample_function(wave_data, 64), sys.h(), 8).unwrap();
        let z = &p.state;
        assert!((z.coeff(0) - CVector::from_vec(vec![c64(0.0, 0.0), c64(1.0, 0.0)])).norm() < 1e-14);
        assert!((z.coeff(1) - CVector::from_vec(vec![c64(0.0, -0.5), c64(0.5, 0.0)])).norm() < 1e-14);
        assert!((z.coeff(-1) - CVector::from_vec(vec![c64(0.0, 0.5), c64(0.5, 0.0)])).norm() < 1e-14);
        for m in 2..=8 {
            assert!(z.coeff(m).norm() < 1e-14 && z.coeff(-m).norm() < 1e-14);
        }
        assert!(p.aliasing_energy < 1e-12);
        assert!(project_initial(&sample_function(wave_data, 16), sys.h(), 4).is_err());
    }

    #[test]
    fn single_mode_projection() {
        let f = |zeta: f64| CVector::from_vec(vec![c64(0.0, 5.0 * zeta).exp(), c64(0.0, 0.0)]);
        let p = project_initial(&sample_function(f, 41), &identity(2), 10).unwrap();
        for m in p.state.modes() {
            let expect = if m == 5 { 1.0 } else { 0.0 };
            assert!((p.state.coeff(m).norm() - expect).abs() < 1e-13);
        }
    }

    #[test]
    fn equilibrium_of_wave_data() {
        let sys = fixtures::damped_wave();
        let proj = equilibrium_projector(&sys).unwrap();
        assert_eq!(proj.kernel_dim(), 1);
        assert!((proj.kappa().unwrap() - 1.0).abs() < 1e-14);
        let state = project_initial(&sample_function(wave_data, 64), sys.h(), 8).unwrap().state;
        let q = proj.apply(&state);
        assert!((q.coeff(0) - CVector::from_vec(vec![c64(0.0, 0.0), c64(1.0, 0.0)])).norm() < 1e-14);
        assert!(proj.apply(&q).rel_distance(&q) < 1e-15);
        let coercive = PhSystem::new(real_matrix(2, 2, &[0.0, 1.0, 1.0, 0.0]), identity(2), identity(2)).unwrap();
        assert_eq!(equilibrium_projector(&coercive).unwrap().kernel_dim(), 0);
    }

    #[test]
    fn evolution_semigroup_and_oracle() {
        let sys = fixtures::damped_wave();
        let state = project_initial(&sample_function(wave_data, 64), sys.h(), 4).unwrap().state;
        let a = evolve(&evolve(&state, &sys, 0.3).unwrap(), &sys, 0.7).unwrap();
        let b = evolve(&state, &sys, 1.0).unwrap();
        assert!(a.rel_distance(&b) < 1e-12);
        let o = oracle_evolve(&state, &sys, 1.0, 1e-3).unwrap();
        assert!(o.rel_distance(&b) < 1e-10);
        assert_eq!(oracle_evolve(&state, &sys, 0.0, 1e-3).unwrap(), state);
        assert!(oracle_evolve(&state, &sys, 1.0, 0.1).is_err());
    }

    #[test]
    fn kernel_window_cases() {
        assert_eq!(kernel_window(1.0, 0.1, 3, 0.5), 0.5);
        let t = kernel_window(1.0, 10.0, 1, 1.0);
        assert_eq!(t, 0.0);
        let t = kernel_window(1.0, 1.9, 1, 1.0);
        assert!(t > 0.0 && t < 0.06);
    }

    #[test]
    fn envelope_of_damped_oscillation() {
        let times: Vec<f64> = (1..=400).map(|i| 0.1 * i as f64).collect();
        let norms: Vec<f64> = times.iter().map(|t| (-0.5 * t).exp() * (1.5 + (3.0 * t).sin())).collect();
        let r = envelope_rate(&times, &norms).unwrap();
        assert!((r.omega - 0.5).abs() < 2e-3, "{r:?}");
        assert!(r.envelope_excess <= 0.0);
        assert!(envelope_rate(&times, &vec![1.0; times.len()]).is_none());
    }
}
