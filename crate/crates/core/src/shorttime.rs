//! Short-time behaviour of `||e^{-C_eta t}||^2`.
//!
//! For an accretive hypocoercive operator with index `m` the squared norm
//! behaves like `1 - c t^a` with `a = 2m + 1`. The defect `1 - ||T(t)||^2`
//! is tiny exactly where the exponent is visible, so it is never formed by
//! subtraction there. In standard coordinates
//!
//! `1 - ||T(t)||^2 = min_{|x|=1} 2 ∫_0^t |B T(s) x|^2 ds = sigma_min(Psi)^2`,
//!
//! with `B = C_H^{1/2}` and `Psi` stacking `sqrt(2 w_k) B T(s_k)` over
//! Gauss-Legendre nodes, which keeps full relative accuracy for defects far
//! below machine epsilon.

use nalgebra::Schur;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::family::check_mode;
use crate::index::HypoCertificate;
use crate::linalg::{expm, propagator, psd_sqrt, singular_values, spectral_norm, CMatrix, CVector, WeightedOperator};

/// Defects above this are taken directly as `1 - sigma_max^2`.
pub const DIRECT_DEFECT_THRESHOLD: f64 = 1e-3;
/// A defect is usable only when it exceeds this multiple of its error estimate.
pub const CONDITIONING_FACTOR: f64 = 10.0;
/// Safety factor applied to grid-searched constants to cover the gaps
/// between grid points.
pub const GRID_MARGIN: f64 = 1e-2;
/// Number of grid points used by the constant searches.
pub const BOUND_GRID_POINTS: usize = 240;
/// Relative residual accepted for the expansion identity.
pub const IDENTITY_RTOL: f64 = 1e-8;

/// `t2 = T2_SCALE / L`. Any positive value is admissible; half the
/// reciprocal norm keeps the window inside the regime where the leading
/// power dominates, and reproduces `t2 = 1/2` for the scalar `C = [1]`.
pub const T2_SCALE: f64 = 0.5;

const GL_NODES: usize = 12;
const MAX_PANEL_SCALE: f64 = 0.5;
const MAX_GRAMIAN_SCALE: f64 = 400.0;

/// Gauss-Legendre nodes and weights on `[-1, 1]` by Newton iteration on
/// the Legendre polynomial.
fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum DefectRoute {
    Direct,
    Gramian,
}

/// `1 - ||e^{-C_eta t}||^2` with an absolute error estimate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct NormDefect {
    pub sq_norm: f64,
    pub defect: f64,
    pub err: f64,
    pub route: DefectRoute,
}

impl NormDefect {
    pub fn well_conditioned(&self) -> bool {
        self.defect > CONDITIONING_FACTOR * self.err
    }

    /// Largest value the true defect can be below, clamped at zero.
    pub fn lower(&self) -> f64 {
        (self.defect - self.err).max(0.0)
    }
}

/// One mode in standard coordinates: `A = S C_eta S^{-1}` and `B = (S C_H S^{-1})^{1/2}`.
struct ModeFrame {
    a: CMatrix,
    b: CMatrix,
    norm: f64,
}

impl ModeFrame {
    fn new(op: &WeightedOperator, eta: f64) -> Result<Self> {
        let (s, h) = op.standard_parts();
        let a = s.scale(eta) + &h;
        let b = psd_sqrt(&h)?;
        let norm = spectral_norm(&a);
        Ok(Self { a, b, norm })
    }

    fn defect(&self, t: f64) -> Result<NormDefect> {
        let eps = f64::EPSILON;
        let t_op = propagator(&self.a, t)?;
        let sigma = spectral_norm(&t_op);
        let sq_norm = sigma * sigma;
        let direct = 1.0 - sq_norm;
        if direct >= DIRECT_DEFECT_THRESHOLD || self.norm * t > MAX_GRAMIAN_SCALE || t == 0.0 {
            return Ok(NormDefect {
                sq_norm,
                defect: direct,
                err: eps,
                route: DefectRoute::Direct,
            });
        }
        let n = self.a.nrows();
        let panels = ((self.norm * t / MAX_PANEL_SCALE).ceil() as usize).max(1);
        let h = t / panels as f64;
        let (nodes, weights) = gauss_legendre(GL_NODES);
        let minus_a = -&self.a;
        let node_steps: Vec<CMatrix> = nodes
            .iter()
            .map(|&x| expm(&minus_a, 0.5 * h * (x + 1.0)))
            .collect::<Result<_>>()?;
        let panel_step = expm(&minus_a, h)?;
        let mut psi = CMatrix::zeros(panels * GL_NODES * n, n);
        let mut start = CMatrix::identity(n, n);
        for p in 0..panels {
            let b_start = &self.b * &start;
            for (k, step) in node_steps.iter().enumerate() {
                let scale = (weights[k] * h).sqrt();
                let block = (&b_start * step).scale(scale);
                psi.view_mut(((p * GL_NODES + k) * n, 0), (n, n)).copy_from(&block);
            }
            start = &start * &panel_step;
        }
        let sv = singular_values(&psi);
        let (s_max, s_min) = (sv[0], sv[sv.len() - 1]);
        let delta = 32.0 * eps * s_max * ((panels * GL_NODES) as f64).sqrt();
        let defect = s_min * s_min;
        Ok(NormDefect {
            sq_norm: 1.0 - defect,
            defect,
            err: 2.0 * s_min * delta + delta * delta,
            route: DefectRoute::Gramian,
        })
    }
}

/// `1 - ||e^{-C_eta t}||^2` in the weighted norm.
pub fn norm_defect(op: &WeightedOperator, eta: f64, t: f64) -> Result<NormDefect> {
    ModeFrame::new(op, eta)?.defect(t)
}

#[derive(Debug, Clone, Serialize)]
pub struct DecayCurve {
    /// Mode value, or `"family-sup"`.
    pub label: String,
    pub eta: Option<f64>,
    pub times: Vec<f64>,
    pub sq_norms: Vec<f64>,
    pub defects: Vec<f64>,
    pub defect_errs: Vec<f64>,
}

impl DecayCurve {
    fn from_defects(label: String, eta: Option<f64>, times: &[f64], d: &[NormDefect]) -> Self {
        Self {
            label,
            eta,
            times: times.to_vec(),
            sq_norms: d.iter().map(|x| x.sq_norm).collect(),
            defects: d.iter().map(|x| x.defect).collect(),
            defect_errs: d.iter().map(|x| x.err).collect(),
        }
    }

    fn sample(&self, i: usize) -> NormDefect {
        NormDefect {
            sq_norm: self.sq_norms[i],
            defect: self.defects[i],
            err: self.defect_errs[i],
            route: DefectRoute::Direct,
        }
    }
}

fn check_times(times: &[f64]) -> Result<()> {
    if times.is_empty() {
        return Err(Error::InvalidArgument("empty time grid".into()));
    }
    if times.iter().any(|&t| !(t > 0.0) || !t.is_finite()) {
        return Err(Error::InvalidArgument("times must be positive and finite".into()));
    }
    if times.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidArgument("times must be strictly ascending".into()));
    }
    Ok(())
}

/// `count` logarithmically spaced times in `[lo, hi]`.
pub fn log_times(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    assert!(lo > 0.0 && hi >= lo && count >= 1);
    if count == 1 {
        return vec![lo];
    }
    let (a, b) = (lo.ln(), hi.ln());
    (0..count)
        .map(|i| {
            if i + 1 == count {
                hi
            } else {
                (a + (b - a) * i as f64 / (count - 1) as f64).exp()
            }
        })
        .collect()
}

/// `(lo / ||C_eta||, hi / ||C_eta||)`.
pub fn scaled_window(op: &WeightedOperator, eta: f64, lo: f64, hi: f64) -> Result<(f64, f64)> {
    let norm = op.weight().operator_norm(&op.mode(eta))?;
    if norm == 0.0 {
        return Err(Error::InvalidArgument("zero operator has no time scale".into()));
    }
    Ok((lo / norm, hi / norm))
}

pub fn decay_curve(op: &WeightedOperator, eta: f64, times: &[f64]) -> Result<DecayCurve> {
    check_mode(eta)?;
    check_times(times)?;
    let frame = ModeFrame::new(op, eta)?;
    let d: Vec<NormDefect> = times.par_iter().map(|&t| frame.defect(t)).collect::<Result<_>>()?;
    Ok(DecayCurve::from_defects(eta.to_string(), Some(eta), times, &d))
}

/// Pointwise supremum of the squared norms over `modes`.
pub fn family_sup_curve(op: &WeightedOperator, modes: &[f64], times: &[f64]) -> Result<DecayCurve> {
    if modes.is_empty() {
        return Err(Error::EmptyModeSet);
    }
    let curves: Vec<DecayCurve> = modes
        .par_iter()
        .map(|&eta| decay_curve(op, eta, times))
        .collect::<Result<_>>()?;
    let d: Vec<NormDefect> = (0..times.len())
        .map(|i| {
            curves
                .iter()
                .map(|c| c.sample(i))
                .min_by(|x, y| x.defect.total_cmp(&y.defect))
                .unwrap()
        })
        .collect();
    Ok(DecayCurve::from_defects("family-sup".into(), None, times, &d))
}

#[derive(Debug, Clone, Serialize)]
pub struct ShortTimeFit {
    pub a_fit: f64,
    pub c_fit: f64,
    pub window: (f64, f64),
    pub points: usize,
    /// `max |c t^a / defect - 1|` over the window.
    pub max_rel_residual: f64,
    pub conditioning_factor: f64,
}

/// Least-squares line through `log(1 - sq_norm)` against `log t` on the
/// samples inside `window`.
pub fn fit_exponent(curve: &DecayCurve, window: (f64, f64)) -> Result<ShortTimeFit> {
    let (lo, hi) = window;
    if !(lo > 0.0 && hi > lo) {
        return Err(Error::InvalidArgument(format!("bad window [{lo}, {hi}]")));
    }
    let idx: Vec<usize> = (0..curve.times.len())
        .filter(|&i| curve.times[i] >= lo * (1.0 - 1e-12) && curve.times[i] <= hi * (1.0 + 1e-12))
        .collect();
    if idx.len() < 2 {
        return Err(Error::InvalidArgument(format!(
            "window [{lo:e}, {hi:e}] holds {} samples, need at least 2",
            idx.len()
        )));
    }
    if let Some(&bad) = idx.iter().find(|&&i| !curve.sample(i).well_conditioned()) {
        let usable: Vec<usize> = (0..curve.times.len())
            .filter(|&i| curve.sample(i).well_conditioned())
            .collect();
        let suggested_lo = usable
            .iter()
            .map(|&i| curve.times[i])
            .find(|&t| t > curve.times[bad])
            // nothing usable sampled: move up by one window ratio
            .unwrap_or(hi);
        return Err(Error::Conditioning {
            t: curve.times[bad],
            defect: curve.defects[bad],
            err: curve.defect_errs[bad],
            suggested_lo,
            suggested_hi: (suggested_lo * hi / lo).max(hi),
        });
    }
    let xs: Vec<f64> = idx.iter().map(|&i| curve.times[i].ln()).collect();
    let ys: Vec<f64> = idx.iter().map(|&i| curve.defects[i].ln()).collect();
    let k = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / k;
    let my = ys.iter().sum::<f64>() / k;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let a_fit = sxy / sxx;
    let log_c = my - a_fit * mx;
    let max_rel_residual = xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| ((log_c + a_fit * x - y).exp() - 1.0).abs())
        .fold(0.0, f64::max);
    Ok(ShortTimeFit {
        a_fit,
        c_fit: log_c.exp(),
        window,
        points: idx.len(),
        max_rel_residual,
        conditioning_factor: CONDITIONING_FACTOR,
    })
}

/// Binomial coefficient as a float.
pub fn binomial(n: usize, k: usize) -> f64 {
    if k > n {
        return 0.0;
    }
    let k = k.min(n - k);
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// `Delta^{(l)}_{j,k} = C(k,l) C(j-k-1,l) / (C(k+l,l) C(j-k-1+l,l))` for
/// `k < j`.
pub fn delta_coeff(ell: usize, j: usize, k: usize) -> f64 {
    assert!(k < j, "delta needs k < j");
    let r = j - k - 1;
    binomial(k, ell) * binomial(r, ell) / (binomial(k + ell, ell) * binomial(r + ell, ell))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct IdentityCheck {
    /// `(||e^{-C t} y||^2 - ||y||^2) / 2`, by quadrature of the energy
    /// dissipation along the exact trajectory.
    pub lhs: f64,
    /// Truncated series side.
    pub rhs: f64,
    pub residual: f64,
    pub truncation: usize,
    pub tail_bound: f64,
}

/// Smallest `J` with `s^J / J! e^s <= target`.
fn series_truncation(s: f64, target: f64, min: usize) -> (usize, f64) {
    let mut j = min.max(1);
    loop {
        let log_term = j as f64 * s.max(1e-300).ln() - ln_factorial(j) + s;
        let bound = log_term.exp();
        if bound <= target || j >= 400 {
            return (j, bound);
        }
        j += 1;
    }
}

fn ln_factorial(j: usize) -> f64 {
    (2..=j).map(|i| (i as f64).ln()).sum()
}

/// Evaluate both sides of the level-`l` expansion of the squared norm:
///
/// `(||e^{-Ct}y||^2 - ||y||^2)/2 =`
/// `- Σ_{j<l} t^{2j+1}/((2j+1)! C(2j,j)) <V_j y, C_H V_j y>`
/// `- t^{2l+1}/(2l+1)! C(2l,l) Delta_{2l+1,l} <C^l y, C_H C^l y>`
/// `- Σ_{j>=2l+2} t^j/j! Σ_{k=l}^{j-l-1} C(j-1,k) Delta_{j,k} <(-C)^k y, C_H (-C)^{j-k-1} y>`
///
/// with `V_j = Σ_k (2j+1)!/(k+2j+1)! C(k+j,j) t^k (-C)^{k+j}` and
/// `C = C_eta`. Both series are truncated where the tail bound
/// `s^J/J! e^s ||C_H|| / (2||C||)`, `s = 2 t ||C||`, drops below `1e-14`
/// of the left side (`truncation` overrides the choice).
pub fn verify_expansion_identity(
    op: &WeightedOperator,
    eta: f64,
    ell: usize,
    y: &CVector,
    t: f64,
    truncation: Option<usize>,
) -> Result<IdentityCheck> {
    check_mode(eta)?;
    if y.len() != op.dim() {
        return Err(Error::Dimension(format!(
            "vector of length {} for operator of size {}",
            y.len(),
            op.dim()
        )));
    }
    let w = op.weight();
    let c = op.mode(eta);
    let c_norm = w.operator_norm(&c)?;
    if !(t > 0.0) || t * c_norm > 1.0 + 1e-12 {
        return Err(Error::OutOfRegime(t * c_norm));
    }
    let h_norm = w.operator_norm(op.herm())?;
    let lhs = energy_loss(op, &c, y, t)?;
    let s = 2.0 * c_norm * t;
    let scale = if c_norm > 0.0 { h_norm / (2.0 * c_norm) } else { 0.0 };
    let target = 1e-14 * lhs.abs().max(f64::MIN_POSITIVE) / scale.max(f64::MIN_POSITIVE);
    let (jmax, tail) = match truncation {
        Some(j) => (j, (j as f64 * s.max(1e-300).ln() - ln_factorial(j) + s).exp()),
        None => series_truncation(s, target, 2 * ell + 3),
    };

    // P_k = (-C)^k y and Q_k = C_H P_k
    let minus_c = -&c;
    let mut p = vec![y.clone()];
    for k in 0..jmax + 2 * ell + 2 {
        let next = &minus_c * &p[k];
        p.push(next);
    }
    let ip = |u: &CVector, v: &CVector| w.inner(u, &(op.herm() * v));

    let mut rhs = 0.0;
    let mut fact = vec![1.0f64];
    for i in 1..=jmax + 2 * ell + 2 {
        fact.push(fact[i - 1] * i as f64);
    }
    for j in 0..ell {
        let mut v = CVector::zeros(y.len());
        for k in 0..jmax {
            let coef = fact[2 * j + 1] / fact[k + 2 * j + 1] * binomial(k + j, j) * t.powi(k as i32);
            v += p[k + j].scale(coef);
        }
        rhs -= t.powi(2 * j as i32 + 1) / fact[2 * j + 1] / binomial(2 * j, j) * ip(&v, &v).re;
    }
    let sign = if ell.is_multiple_of(2) { 1.0 } else { -1.0 };
    let c_ell = p[ell].scale(sign);
    rhs -= t.powi(2 * ell as i32 + 1) / fact[2 * ell + 1]
        * binomial(2 * ell, ell)
        * delta_coeff(ell, 2 * ell + 1, ell)
        * ip(&c_ell, &c_ell).re;
    let mut term3 = 0.0;
    for j in 2 * ell + 2..jmax {
        let inner: f64 = (ell..j - ell)
            .map(|k| binomial(j - 1, k) * delta_coeff(ell, j, k) * ip(&p[k], &p[j - k - 1]).re)
            .sum();
        term3 += t.powi(j as i32) / fact[j] * inner;
    }
    rhs -= term3;

    let denom = lhs.abs().max(rhs.abs());
    let residual = if denom == 0.0 { 0.0 } else { (rhs - lhs).abs() / lhs.abs().max(f64::MIN_POSITIVE) };
    Ok(IdentityCheck {
        lhs,
        rhs,
        residual,
        truncation: jmax,
        tail_bound: tail * scale * y.norm_squared().max(w.vector_norm(y).powi(2)),
    })
}

/// `-∫_0^t <T(s) y, C_H T(s) y> ds`, which equals `(||T(t)y||^2 - ||y||^2)/2`,
/// by composite Gauss-Legendre quadrature.
fn energy_loss(op: &WeightedOperator, c: &CMatrix, y: &CVector, t: f64) -> Result<f64> {
    let w = op.weight();
    let norm = w.operator_norm(c)?;
    let panels = ((norm * t / MAX_PANEL_SCALE).ceil() as usize).max(1);
    let h = t / panels as f64;
    let (nodes, weights) = gauss_legendre(GL_NODES);
    let minus_c = -c;
    let panel_step = expm(&minus_c, h)?;
    let mut start = y.clone();
    let mut total = 0.0;
    for _ in 0..panels {
        for (x, wk) in nodes.iter().zip(&weights) {
            let z = expm(&minus_c, 0.5 * h * (x + 1.0))? * &start;
            total += 0.5 * h * wk * w.inner(&z, &(op.herm() * &z)).re;
        }
        start = &panel_step * start;
    }
    Ok(-total)
}

/// Residuals of three readings of the level-0 binomial identity at order `j`:
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ZeroLevelReadings {
    /// `Σ C(j,k)(-C)^k(-C)^{j-k} = 2 Σ_{k<j} (-C)^k C_H (-C)^{j-k-1}`
    pub literal: f64,
    /// Adjoint on the leading factors, otherwise unchanged:
    /// `Σ C(j,k)(-C^+)^k(-C)^{j-k} = 2 Σ_{k<j} (-C^+)^k C_H (-C)^{j-k-1}`
    pub adjoint: f64,
    /// `Σ C(j,k)(-C^+)^k(-C)^{j-k} = -2 Σ_{k<j} C(j-1,k) (-C^+)^k C_H (-C)^{j-k-1}`,
    /// the `j`-th derivative at zero of `T^+ T` against that of its integral form.
    pub corrected: f64,
}

/// Relative residuals of the level-0 identity readings for `C = C_eta`.
pub fn zero_level_identity(op: &WeightedOperator, eta: f64, j: usize) -> Result<ZeroLevelReadings> {
    check_mode(eta)?;
    if j == 0 {
        return Err(Error::InvalidArgument("order must be at least 1".into()));
    }
    let w = op.weight();
    let mc = -op.mode(eta);
    let mca = w.adjoint(&mc);
    let pow = |a: &CMatrix, k: usize| (0..k).fold(CMatrix::identity(a.nrows(), a.ncols()), |acc, _| acc * a);
    let h = op.herm();
    let mut lhs_plain = CMatrix::zeros(op.dim(), op.dim());
    let mut lhs_adj = lhs_plain.clone();
    let mut rhs_plain = lhs_plain.clone();
    let mut rhs_adj = lhs_plain.clone();
    let mut rhs_corr = lhs_plain.clone();
    for k in 0..=j {
        let b = binomial(j, k);
        lhs_plain += (pow(&mc, k) * pow(&mc, j - k)).scale(b);
        lhs_adj += (pow(&mca, k) * pow(&mc, j - k)).scale(b);
        if k < j {
            rhs_plain += (pow(&mc, k) * h * pow(&mc, j - k - 1)).scale(2.0);
            let mixed = pow(&mca, k) * h * pow(&mc, j - k - 1);
            rhs_adj += mixed.scale(2.0);
            rhs_corr -= mixed.scale(2.0 * binomial(j - 1, k));
        }
    }
    let rel = |a: &CMatrix, b: &CMatrix| {
        let d = w.operator_norm(&(a - b)).unwrap_or(f64::NAN);
        let s = w.operator_norm(a).unwrap_or(f64::NAN).max(w.operator_norm(b).unwrap_or(f64::NAN));
        if s == 0.0 {
            0.0
        } else {
            d / s
        }
    };
    Ok(ZeroLevelReadings {
        literal: rel(&lhs_plain, &rhs_plain),
        adjoint: rel(&lhs_adj, &rhs_adj),
        corrected: rel(&lhs_adj, &rhs_corr),
    })
}

/// Exponent `2m + 1`.
pub fn exponent(m: usize) -> u32 {
    2 * m as u32 + 1
}

/// Empirical constants of the per-mode bound
/// `||e^{-C_eta t}||^2 <= 1 - k2 |eta|^{a-1} t^a` on `(0, t2/|eta|]`.
#[derive(Debug, Clone, Serialize)]
pub struct ModeBound {
    pub eta: f64,
    pub a: u32,
    pub k2: f64,
    pub t2: f64,
    /// Grid points where the bound was checked.
    pub points: usize,
    /// Largest `||T||^2 - (1 - k2 |eta|^{a-1} t^a)` on the grid; nonpositive when the bound holds.
    pub max_violation: f64,
    pub grid_margin: f64,
    pub pass: bool,
}

/// Times used for the bound searches on `(0, hi]`: log-spaced over three
/// decades.
fn bound_grid(hi: f64) -> Vec<f64> {
    log_times(hi * 1e-3, hi, BOUND_GRID_POINTS)
}

/// Grid search for the largest `k2` on `(0, t2/|eta|]` with `t2 = T2_SCALE/L`.
///
/// Defects are replaced by their lower error bound, so ill-conditioned
/// samples can only shrink `k2`.
pub fn verify_mode_bound(op: &WeightedOperator, cert: &HypoCertificate, eta: f64) -> Result<ModeBound> {
    check_mode(eta)?;
    let a = exponent(cert.m_hc);
    let t2 = T2_SCALE / cert.l;
    let frame = ModeFrame::new(op, eta)?;
    let times = bound_grid(t2 / eta.abs());
    let defects: Vec<NormDefect> = times.par_iter().map(|&t| frame.defect(t)).collect::<Result<_>>()?;
    let scale = |t: f64| eta.abs().powi(a as i32 - 1) * t.powi(a as i32);
    let k2_raw = times
        .iter()
        .zip(&defects)
        .map(|(&t, d)| d.lower() / scale(t))
        .fold(f64::INFINITY, f64::min);
    let k2 = k2_raw * (1.0 - GRID_MARGIN);
    let max_violation = times
        .iter()
        .zip(&defects)
        .map(|(&t, d)| d.sq_norm - (1.0 - k2 * scale(t)))
        .fold(f64::NEG_INFINITY, f64::max);
    let holds = times
        .iter()
        .zip(&defects)
        .all(|(&t, d)| d.lower() >= k2 * scale(t));
    Ok(ModeBound {
        eta,
        a,
        k2,
        t2,
        points: times.len(),
        max_violation,
        grid_margin: GRID_MARGIN,
        pass: k2 > 0.0 && holds,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct ModeScaling {
    pub bounds: Vec<ModeBound>,
    pub k2_min: f64,
    pub k2_max: f64,
    /// `k2_max / k2_min`; below 2 witnesses independence of the mode.
    pub k2_ratio: f64,
    pub ratio_limit: f64,
    pub pass: bool,
}

pub fn mode_scaling(op: &WeightedOperator, cert: &HypoCertificate, etas: &[f64]) -> Result<ModeScaling> {
    if etas.is_empty() {
        return Err(Error::EmptyModeSet);
    }
    let bounds: Vec<ModeBound> = etas
        .iter()
        .map(|&eta| verify_mode_bound(op, cert, eta))
        .collect::<Result<_>>()?;
    let k2_min = bounds.iter().map(|b| b.k2).fold(f64::INFINITY, f64::min);
    let k2_max = bounds.iter().map(|b| b.k2).fold(0.0, f64::max);
    let k2_ratio = k2_max / k2_min;
    Ok(ModeScaling {
        pass: bounds.iter().all(|b| b.pass) && k2_ratio < 2.0,
        bounds,
        k2_min,
        k2_max,
        k2_ratio,
        ratio_limit: 2.0,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct UniformExtension {
    pub c2: f64,
    pub tau2: f64,
    /// Constant in `e^{-k2 t^a} <= 1 - k2 t^a + M t^{2a}`.
    #[serde(rename = "M")]
    pub m: f64,
}

/// `c2 = k2/2`, `M = k2^2/2`, `tau2 = min(t2/2, (k2/(2M))^{1/a})`.
pub fn extend_uniform(k2: f64, t2: f64, a: u32) -> Result<UniformExtension> {
    if !(k2 > 0.0 && t2 > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "k2 and t2 must be positive, got {k2}, {t2}"
        )));
    }
    if a.is_multiple_of(2) {
        return Err(Error::InvalidArgument(format!("exponent {a} is not odd")));
    }
    let m = 0.5 * k2 * k2;
    let tau2 = (0.5 * t2).min((k2 / (2.0 * m)).powf(1.0 / a as f64));
    Ok(UniformExtension { c2: 0.5 * k2, tau2, m })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LowerFit {
    pub eta0: f64,
    pub a: u32,
    pub c1: f64,
    pub tau1: f64,
    /// Set when no positive `c1` is seen (the defect vanishes identically).
    pub degenerate: bool,
}

/// Smallest grid-searched `c1` with `1 - c1 t^a <= ||e^{-C_eta0 t}||^2` on
/// `(0, tau1]`, `tau1 = 1/||C_eta0||`.
pub fn lower_bound_fit(op: &WeightedOperator, eta0: f64, a: u32) -> Result<LowerFit> {
    check_mode(eta0)?;
    let frame = ModeFrame::new(op, eta0)?;
    if frame.norm == 0.0 {
        return Err(Error::InvalidArgument("zero operator has no time scale".into()));
    }
    let tau1 = 1.0 / frame.norm;
    let times = bound_grid(tau1);
    let defects: Vec<NormDefect> = times.par_iter().map(|&t| frame.defect(t)).collect::<Result<_>>()?;
    let c1 = times
        .iter()
        .zip(&defects)
        .map(|(&t, d)| (d.defect + d.err) / t.powi(a as i32))
        .fold(0.0, f64::max)
        * (1.0 + GRID_MARGIN);
    let degenerate = defects.iter().all(|d| !d.well_conditioned());
    Ok(LowerFit {
        eta0,
        a,
        c1,
        tau1,
        degenerate,
    })
}

/// Two-sided uniform short-time bound for a finite mode family.
#[derive(Debug, Clone, Serialize)]
pub struct UniformBound {
    pub k2: f64,
    pub t2: f64,
    pub a: u32,
    pub c2: f64,
    pub tau2: f64,
    #[serde(rename = "M")]
    pub m: f64,
    pub c1: f64,
    pub tau1: f64,
    pub tau: f64,
}

/// Combine the per-mode searches: `k2` is the smallest over `modes`, `c1`
/// is fitted at `eta0`.
pub fn uniform_bound(
    op: &WeightedOperator,
    cert: &HypoCertificate,
    modes: &[f64],
    eta0: f64,
) -> Result<UniformBound> {
    let scaling = mode_scaling(op, cert, modes)?;
    let a = exponent(cert.m_hc);
    let t2 = T2_SCALE / cert.l;
    let ext = extend_uniform(scaling.k2_min, t2, a)?;
    let lower = lower_bound_fit(op, eta0, a)?;
    Ok(UniformBound {
        k2: scaling.k2_min,
        t2,
        a,
        c2: ext.c2,
        tau2: ext.tau2,
        m: ext.m,
        c1: lower.c1,
        tau1: lower.tau1,
        tau: ext.tau2.min(lower.tau1),
    })
}

/// Largest violation of `1 - c1 t^a <= sq_norm <= 1 - c2 t^a` along
/// `curve` on `(0, tau]`, measured on the defects with their error bars;
/// nonpositive when both bounds hold.
pub fn domination_violation(curve: &DecayCurve, bound: &UniformBound) -> f64 {
    (0..curve.times.len())
        .filter(|&i| curve.times[i] <= bound.tau)
        .map(|i| {
            let ta = curve.times[i].powi(bound.a as i32);
            let d = curve.sample(i);
            let upper_gap = bound.c2 * ta - (d.defect + d.err);
            let lower_gap = (d.defect - d.err) - bound.c1 * ta;
            upper_gap.max(lower_gap) / ta
        })
        .fold(f64::NEG_INFINITY, f64::max)
}

/// Largest real part of the spectrum of `-C_eta`.
pub fn spectral_abscissa(op: &WeightedOperator, eta: f64) -> Result<f64> {
    check_mode(eta)?;
    spectral_abscissa_of(&(-op.mode(eta)))
}

/// Largest real part of the spectrum of `a`, from a complex Schur form.
pub fn spectral_abscissa_of(a: &CMatrix) -> Result<f64> {
    let schur = Schur::try_new(a.clone(), f64::EPSILON, 10_000)
        .ok_or_else(|| Error::Numerical("Schur iteration did not converge".into()))?;
    let (_, t) = schur.unpack();
    Ok((0..t.nrows()).map(|i| t[(i, i)].re).fold(f64::NEG_INFINITY, f64::max))
}
