//! Hypocoercivity index and the constructive constants of the mode-family
//! Lyapunov construction.
//!
//! The index is computed three ways that must agree:
//!
//! * the skew sums `S_m = Σ_{j<=m} (C_S^+)^j C_H C_S^j`,
//! * the full sums `Σ_{j<=m} C^j C_H (C^+)^j`,
//! * the Kalman rank of `[B, C_S B, ..., C_S^m B]` with `B = C_H^{1/2}`,
//!
//! where `^+` is the weighted adjoint. The index is the smallest `m` making
//! the sum uniformly positive (equivalently the Kalman matrix of full rank);
//! a coercive operator has index 0.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::family::check_mode;
use crate::linalg::{c64, psd_sqrt, singular_values, spectral_norm, CMatrix, CVector, WeightedOperator};

/// Default relative positivity threshold: `lambda_min >= DEFAULT_INDEX_RTOL * ||C||`.
pub const DEFAULT_INDEX_RTOL: f64 = 1e-9;

/// Default relative singular-value threshold of the rank route. The
/// singular values of the Kalman matrix are square roots of the eigenvalues
/// of the sums, so the threshold is the square root of the sum threshold;
/// it also sits well above the `sqrt(eps)` noise that the square root of a
/// rank-deficient `C_H` carries.
pub const DEFAULT_RANK_RTOL: f64 = 3.162_277_660_168_379_4e-5;

#[derive(Debug, Clone, Copy, Default)]
pub struct IndexOptions {
    /// Absolute positivity threshold; defaults to `DEFAULT_INDEX_RTOL * ||C||`.
    pub tol: Option<f64>,
    /// Largest `m` searched; defaults to the dimension.
    pub max_m: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IndexReport {
    /// Index from the skew sums; `None` when not hypocoercive up to `max_m_searched`.
    pub m_hc: Option<usize>,
    /// Index from the full sums.
    pub m_hc_full: Option<usize>,
    /// Index from the Kalman rank condition.
    pub kalman_m: Option<usize>,
    /// `lambda_min(S_m)` for `m = 0..=max_m_searched`.
    pub kappa_by_m: Vec<f64>,
    /// `lambda_min` of the full sums for `m = 0..=max_m_searched`.
    pub kappa_full_by_m: Vec<f64>,
    pub max_m_searched: usize,
    /// Absolute positivity threshold applied to both sum routes.
    pub tol: f64,
    /// Relative singular-value threshold of the rank route.
    pub rank_tol: f64,
}

impl IndexReport {
    pub fn is_hypocoercive(&self) -> bool {
        self.m_hc.is_some()
    }

    pub fn routes_agree(&self) -> bool {
        self.m_hc == self.m_hc_full && self.m_hc == self.kalman_m
    }
}

fn first_positive(values: &[f64], tol: f64) -> Option<usize> {
    values.iter().position(|&l| l >= tol && l > 0.0)
}

/// Index by the two Loewner-sum routes, with the Kalman route filled in for
/// comparison. Failure to find a positive sum is reported, not raised.
pub fn index_by_sums(op: &WeightedOperator, opts: IndexOptions) -> Result<IndexReport> {
    op.ensure_accretive()?;
    let n = op.dim();
    let max_m = opts.max_m.unwrap_or(n);
    if max_m == 0 && opts.max_m.is_some() {
        return Err(Error::InvalidArgument("max_m must be at least 1".into()));
    }
    let tol = opts.tol.unwrap_or(DEFAULT_INDEX_RTOL * op.norm());
    let w = op.weight();
    let c = op.matrix();
    let c_adj = w.adjoint(c);
    let s = op.skew();
    let s_adj = w.adjoint(s);
    let h = op.herm();

    let mut kappa_by_m = Vec::with_capacity(max_m + 1);
    let mut kappa_full_by_m = Vec::with_capacity(max_m + 1);
    let mut skew_sum = CMatrix::zeros(n, n);
    let mut full_sum = CMatrix::zeros(n, n);
    // (C_S^+)^j C_H C_S^j and C^j C_H (C^+)^j, advanced by one factor per side
    let mut skew_term = h.clone();
    let mut full_term = h.clone();
    for _ in 0..=max_m {
        skew_sum += &skew_term;
        full_sum += &full_term;
        kappa_by_m.push(w.lambda_min(&skew_sum)?);
        kappa_full_by_m.push(w.lambda_min(&full_sum)?);
        skew_term = &s_adj * skew_term * s;
        full_term = c * full_term * &c_adj;
    }

    let rank_tol = DEFAULT_RANK_RTOL;
    Ok(IndexReport {
        m_hc: first_positive(&kappa_by_m, tol),
        m_hc_full: first_positive(&kappa_full_by_m, tol),
        kalman_m: index_by_kalman(op, Some(rank_tol))?,
        kappa_by_m,
        kappa_full_by_m,
        max_m_searched: max_m,
        tol,
        rank_tol,
    })
}

/// Smallest `m < n` with `[B, J B, ..., J^m B]` of full row rank, where
/// `J = C_S` and `B` is the principal square root of `C_H`; `None` when the
/// rank never saturates.
///
/// Numerical rank counts singular values above `rank_tol * sigma_max`.
pub fn index_by_kalman(op: &WeightedOperator, rank_tol: Option<f64>) -> Result<Option<usize>> {
    op.ensure_accretive()?;
    let rank_tol = rank_tol.unwrap_or(DEFAULT_RANK_RTOL);
    let n = op.dim();
    let (j, h) = op.standard_parts();
    let b = psd_sqrt(&h)?;
    let mut blocks: Vec<CMatrix> = Vec::with_capacity(n);
    let mut block = b;
    for m in 0..n {
        blocks.push(block.clone());
        let kalman = CMatrix::from_fn(n, n * (m + 1), |r, col| blocks[col / n][(r, col % n)]);
        let sv = singular_values(&kalman);
        let sigma_max = sv.first().copied().unwrap_or(0.0);
        let rank = sv
            .iter()
            .filter(|&&x| sigma_max > 0.0 && x > rank_tol * sigma_max)
            .count();
        if rank == n {
            return Ok(Some(m));
        }
        block = &j * block;
    }
    Ok(None)
}

/// Matrix-valued polynomial `Σ_k A_k eta^k`.
#[derive(Debug, Clone)]
pub struct MatrixPolynomial {
    coeffs: Vec<CMatrix>,
}

impl MatrixPolynomial {
    pub fn new(coeffs: Vec<CMatrix>) -> Self {
        assert!(!coeffs.is_empty(), "polynomial needs at least one coefficient");
        Self { coeffs }
    }

    pub fn constant(a: CMatrix) -> Self {
        Self::new(vec![a])
    }

    pub fn coeffs(&self) -> &[CMatrix] {
        &self.coeffs
    }

    pub fn degree(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn mul(&self, other: &Self) -> Self {
        let (r, c) = (self.coeffs[0].nrows(), other.coeffs[0].ncols());
        let mut out = vec![CMatrix::zeros(r, c); self.coeffs.len() + other.coeffs.len() - 1];
        for (i, a) in self.coeffs.iter().enumerate() {
            for (j, b) in other.coeffs.iter().enumerate() {
                out[i + j] += a * b;
            }
        }
        Self::new(out)
    }

    /// Coefficient-wise adjoint, i.e. the adjoint for real arguments.
    pub fn adjoint(&self) -> Self {
        Self::new(self.coeffs.iter().map(|c| c.adjoint()).collect())
    }

    pub fn add(&self, other: &Self) -> Self {
        let len = self.coeffs.len().max(other.coeffs.len());
        let shape = self.coeffs[0].shape();
        let coeffs = (0..len)
            .map(|k| {
                let mut acc = CMatrix::zeros(shape.0, shape.1);
                if let Some(a) = self.coeffs.get(k) {
                    acc += a;
                }
                if let Some(b) = other.coeffs.get(k) {
                    acc += b;
                }
                acc
            })
            .collect();
        Self::new(coeffs)
    }

    pub fn eval(&self, eta: f64) -> CMatrix {
        // Horner
        let mut acc = self.coeffs.last().unwrap().clone();
        for a in self.coeffs.iter().rev().skip(1) {
            acc = acc.scale(eta) + a;
        }
        acc
    }
}

/// `(C_eta^+)^l C_H C_eta^l` as a polynomial in `eta`; the coefficient of
/// `eta^i` collects the products with exactly `i` skew factors.
pub fn mixing_polynomial(op: &WeightedOperator, ell: usize) -> MatrixPolynomial {
    let n = op.dim();
    let right = MatrixPolynomial::new(vec![op.herm().clone(), op.skew().clone()]);
    let left = MatrixPolynomial::new(vec![op.herm().clone(), -op.skew()]);
    let mut poly = MatrixPolynomial::constant(op.herm().clone());
    for _ in 0..ell {
        poly = left.mul(&poly).mul(&right);
    }
    debug_assert_eq!(poly.coeffs()[0].nrows(), n);
    poly
}

/// `Σ_{j<=m} (C_eta^+)^j C_H C_eta^j` as a polynomial in `eta`.
pub fn mixing_sum_polynomial(op: &WeightedOperator, m: usize) -> MatrixPolynomial {
    (1..=m).fold(mixing_polynomial(op, 0), |acc, j| {
        acc.add(&mixing_polynomial(op, j))
    })
}

/// `kappa(eta) = lambda_min(Σ_{j<=m} (C_eta^+)^j C_H C_eta^j)` in the
/// weighted sense.
pub fn kappa_eta(op: &WeightedOperator, eta: f64, m: usize) -> Result<f64> {
    check_mode(eta)?;
    kappa_eta_unchecked(op, eta, m)
}

fn kappa_eta_unchecked(op: &WeightedOperator, eta: f64, m: usize) -> Result<f64> {
    let w = op.weight();
    let c_eta = op.mode(eta);
    let c_eta_adj = w.adjoint(&c_eta);
    let mut term = op.herm().clone();
    let mut sum = term.clone();
    for _ in 0..m {
        term = &c_eta_adj * term * &c_eta;
        sum += &term;
    }
    w.lambda_min(&sum)
}

/// Mixing constant `K = 2m max_{l<=m, i<2l} ||B_i^{(l)}||`, where
/// `B_i^{(l)}` is the `eta^i` coefficient of `(C_eta^+)^l C_H C_eta^l`.
/// Zero when `m = 0`.
pub fn compute_k(op: &WeightedOperator, m: usize) -> Result<f64> {
    let w = op.weight();
    let mut max_norm: f64 = 0.0;
    for ell in 1..=m {
        let poly = mixing_polynomial(op, ell);
        for b in &poly.coeffs()[..2 * ell] {
            max_norm = max_norm.max(w.operator_norm(b)?);
        }
    }
    Ok(2.0 * m as f64 * max_norm)
}

/// Index `l` in `0..=m` maximising `<C_S^l y, C_H C_S^l y>`; the smallest
/// one on ties.
pub fn dominant_mixing_level(op: &WeightedOperator, y: &CVector, m: usize) -> usize {
    let w = op.weight();
    let mut v = y.clone();
    let mut best = (0, f64::NEG_INFINITY);
    for ell in 0..=m {
        let value = w.inner(&v, &(op.herm() * &v)).re;
        if value > best.1 {
            best = (ell, value);
        }
        v = op.skew() * v;
    }
    best.0
}

/// Sampling controls for the certified infimum of `kappa(eta)` over
/// `1 <= |eta| <= R`.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct GridSpec {
    /// Initial grid step at `|x| <= 1`; cells widen to `step * |x|` beyond,
    /// so long intervals cost a logarithmic number of samples.
    pub step: f64,
    /// Refinement stops once `upper - lower <= rel_tol * upper`.
    pub rel_tol: f64,
    pub max_evaluations: usize,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self {
            step: 0.05,
            rel_tol: 1e-8,
            max_evaluations: 400_000,
        }
    }
}

/// Two-sided enclosure of an infimum over a union of intervals.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CertifiedInfimum {
    /// Certified lower bound.
    pub lower: f64,
    /// Smallest sampled value.
    pub upper: f64,
    pub argmin: f64,
    pub evaluations: usize,
}

#[derive(Debug, Clone, Copy)]
struct Cell {
    lo: f64,
    hi: f64,
    f_lo: f64,
    f_hi: f64,
    bound: f64,
}

impl PartialEq for Cell {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for Cell {}
impl PartialOrd for Cell {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Cell {
    // reversed so BinaryHeap pops the smallest bound, ties broken by position
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .bound
            .total_cmp(&self.bound)
            .then_with(|| other.lo.total_cmp(&self.lo))
    }
}

/// Infimum of `f` over `intervals`, certified by sampling plus a local
/// Lipschitz bound.
///
/// On a cell `[a, b]` with Lipschitz modulus `L`, `f >= (f(a) + f(b))/2 -
/// L (b - a)/2`. Cells are bisected, lowest bound first, until the gap to the
/// best sample meets `grid.rel_tol` or the evaluation budget runs out; the
/// returned `lower` is valid either way.
pub fn certified_infimum<F, G>(
    f: F,
    lipschitz: G,
    intervals: &[(f64, f64)],
    grid: &GridSpec,
) -> Result<CertifiedInfimum>
where
    F: Fn(f64) -> Result<f64> + Sync,
    G: Fn(f64, f64) -> f64,
{
    certified_infimum_by(
        f,
        |lo, hi, f_lo, f_hi| 0.5 * (f_lo + f_hi) - 0.5 * lipschitz(lo, hi) * (hi - lo),
        intervals,
        grid,
    )
}

/// As [`certified_infimum`], with a caller-supplied lower bound
/// `cell_bound(a, b, f(a), f(b)) <= inf_[a, b] f`.
pub fn certified_infimum_by<F, B>(
    f: F,
    cell_bound: B,
    intervals: &[(f64, f64)],
    grid: &GridSpec,
) -> Result<CertifiedInfimum>
where
    F: Fn(f64) -> Result<f64> + Sync,
    B: Fn(f64, f64, f64, f64) -> f64,
{
    if !(grid.step > 0.0) {
        return Err(Error::InvalidArgument("grid step must be positive".into()));
    }
    let mut points: Vec<f64> = Vec::new();
    let mut spans: Vec<(usize, usize)> = Vec::new();
    for &(a, b) in intervals {
        let (a, b) = (a.min(b), a.max(b));
        let start = points.len();
        let mut x = a;
        points.push(a);
        while x < b {
            x = (x + grid.step * x.abs().max(1.0)).min(b);
            points.push(x);
        }
        spans.push((start, points.len()));
    }
    let values: Vec<f64> = points.par_iter().map(|&x| f(x)).collect::<Result<_>>()?;
    let mut evaluations = values.len();
    let (mut upper, mut argmin) = (f64::INFINITY, f64::NAN);
    for (&x, &v) in points.iter().zip(&values) {
        if v < upper {
            upper = v;
            argmin = x;
        }
    }

    let make_cell = |lo: f64, hi: f64, f_lo: f64, f_hi: f64| Cell {
        lo,
        hi,
        f_lo,
        f_hi,
        bound: cell_bound(lo, hi, f_lo, f_hi),
    };
    let mut heap = BinaryHeap::new();
    let mut lower = upper;
    for &(start, end) in &spans {
        for i in start..end.saturating_sub(1) {
            heap.push(make_cell(points[i], points[i + 1], values[i], values[i + 1]));
        }
    }

    while let Some(cell) = heap.pop() {
        lower = cell.bound.min(upper);
        let gap = upper - lower;
        if gap <= grid.rel_tol * upper.abs() || evaluations >= grid.max_evaluations {
            break;
        }
        let mid = 0.5 * (cell.lo + cell.hi);
        if mid <= cell.lo || mid >= cell.hi {
            // interval exhausted at floating-point resolution
            lower = upper.min(cell.f_lo.min(cell.f_hi));
            break;
        }
        let f_mid = f(mid)?;
        evaluations += 1;
        if f_mid < upper {
            upper = f_mid;
            argmin = mid;
        }
        heap.push(make_cell(cell.lo, mid, cell.f_lo, f_mid));
        heap.push(make_cell(mid, cell.hi, f_mid, cell.f_hi));
    }
    if heap.is_empty() && lower > upper {
        lower = upper;
    }
    Ok(CertifiedInfimum {
        lower,
        upper,
        argmin,
        evaluations,
    })
}

/// Constructive constants certifying exponential decay of the whole mode
/// family.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HypoCertificate {
    pub m_hc: usize,
    /// `lambda_min(S_m)` at the index.
    pub kappa: f64,
    /// `kappa / (m + 1)`.
    pub kappa1: f64,
    /// Mixing constant: `||(C_eta^+)^l C_H C_eta^l - eta^{2l} (C_S^+)^l C_H C_S^l|| <= K |eta|^{2l-1}`.
    #[serde(rename = "K")]
    pub k: f64,
    /// `max(2K / kappa1, 1)`.
    #[serde(rename = "R")]
    pub r: f64,
    /// `R^{-2m}` times the certified lower bound of `inf_{1<=|eta|<=R} kappa(eta)`.
    #[serde(rename = "mu_R")]
    pub mu_r: f64,
    /// `min(kappa1, 2 mu_R)`.
    pub sigma: f64,
    /// `||C_H|| + ||C_S||`.
    #[serde(rename = "L")]
    pub l: f64,
    pub inf_kappa: CertifiedInfimum,
}

/// Assemble the certificate, computing the index first.
pub fn build_certificate(op: &WeightedOperator, grid: &GridSpec) -> Result<HypoCertificate> {
    let report = index_by_sums(op, IndexOptions::default())?;
    certificate_from_report(op, &report, grid)
}

pub fn certificate_from_report(
    op: &WeightedOperator,
    report: &IndexReport,
    grid: &GridSpec,
) -> Result<HypoCertificate> {
    let m = report.m_hc.ok_or(Error::NotHypocoercive {
        max_m: report.max_m_searched,
    })?;
    let kappa = report.kappa_by_m[m];
    let kappa1 = kappa / (m as f64 + 1.0);
    let k = compute_k(op, m)?;
    let r = (2.0 * k / kappa1).max(1.0);
    let l = op.norm_bound();

    let bounds = MixingBounds::new(op, m)?;
    let inf_kappa = certified_infimum_by(
        |eta| Ok(bounds.kappa(eta)),
        |lo, hi, f_lo, f_hi| bounds.cell_bound(lo, hi, f_lo, f_hi),
        &[(-r, -1.0), (1.0, r)],
        grid,
    )?;
    let mu_r = inf_kappa.lower / r.powi(2 * m as i32);
    let sigma = kappa1.min(2.0 * mu_r);
    Ok(HypoCertificate {
        m_hc: m,
        kappa,
        kappa1,
        k,
        r,
        mu_r,
        sigma,
        l,
        inf_kappa,
    })
}

/// Cell bounds for `kappa(eta) = lambda_min(M(eta))`, `M(eta) = Σ_{j<=m}
/// (C_eta^+)^j C_H C_eta^j`, in the standard frame. Each cell takes the best
/// of three rigorous bounds:
///
/// * factor: `M = F^* F` with `F` stacking `sqrt(h) A_eta^j`, so
///   `sqrt(kappa) = sigma_min(F)` is Lipschitz with modulus `||F'||`;
/// * order: with Taylor coefficients `D_k` of `M` at the cell centre and
///   half-width `r`, `M(eta) >= D_0 - Σ_{k>=1} r^k |D_k|`, so the derivative
///   only costs where it acts on the low end of the spectrum;
/// * graded order: the same bound for `G(s) = Σ_j s^{2j} (A_eta^j)^* h
///   A_eta^j`, `s = 1/eta`, a polynomial in `s` with bounded coefficients
///   and `G <= M` for `|eta| >= 1`. It stays accurate where `||M||` is too
///   large for the plain order bound to resolve `lambda_min`.
struct MixingBounds {
    /// `F(eta) = Σ_k eta^k factor[k]`, blocks stacked by power of `A_eta`.
    factor: Vec<CMatrix>,
    /// `k ||F_k||`.
    factor_slopes: Vec<f64>,
    /// Hermitian coefficients of `M(eta)`.
    sum: Vec<CMatrix>,
    /// Hermitian coefficients of `G(s)`.
    graded: Vec<CMatrix>,
}

impl MixingBounds {
    fn new(op: &WeightedOperator, m: usize) -> Result<Self> {
        let n = op.dim();
        let (skew, herm) = op.standard_parts();
        let root = psd_sqrt(&herm)?;
        let a = MatrixPolynomial::new(vec![herm.clone(), skew.clone()]);
        // s A_{1/s} = C_S + s h
        let a_graded = MatrixPolynomial::new(vec![skew, herm]);
        let mut power = MatrixPolynomial::constant(root.clone());
        let mut power_graded = MatrixPolynomial::constant(root);
        let mut factor = vec![CMatrix::zeros(n * (m + 1), n); m + 1];
        let mut sum = MatrixPolynomial::constant(CMatrix::zeros(n, n));
        let mut graded = MatrixPolynomial::constant(CMatrix::zeros(n, n));
        for j in 0..=m {
            for (k, c) in power.coeffs().iter().enumerate() {
                factor[k].rows_mut(j * n, n).copy_from(c);
            }
            sum = sum.add(&power.adjoint().mul(&power));
            graded = graded.add(&power_graded.adjoint().mul(&power_graded));
            power = power.mul(&a);
            power_graded = power_graded.mul(&a_graded);
        }
        let factor_slopes = factor.iter().enumerate().map(|(k, c)| k as f64 * spectral_norm(c)).collect();
        let hermitian = |p: &MatrixPolynomial| p.coeffs().iter().map(|c| (c + c.adjoint()).scale(0.5)).collect();
        Ok(Self {
            factor,
            factor_slopes,
            sum: hermitian(&sum),
            graded: hermitian(&graded),
        })
    }

    /// `sigma_min(F)^2`, which unlike `lambda_min` of the assembled sum
    /// keeps its accuracy when `||M(eta)||` is large.
    fn kappa(&self, eta: f64) -> f64 {
        singular_values(&horner(&self.factor, eta)).last().map_or(0.0, |s| s * s)
    }

    fn cell_bound(&self, lo: f64, hi: f64, f_lo: f64, f_hi: f64) -> f64 {
        let top = lo.abs().max(hi.abs());
        let lip: f64 = self
            .factor_slopes
            .iter()
            .enumerate()
            .skip(1)
            .map(|(k, s)| s * top.powi(k as i32 - 1))
            .sum();
        let root = 0.5 * (f_lo.max(0.0).sqrt() + f_hi.max(0.0).sqrt()) - 0.5 * lip * (hi - lo);
        let by_factor = root.max(0.0).powi(2);
        let by_order = order_bound(&self.sum, lo, hi);
        // 1/eta is monotone on a cell that avoids zero
        let by_graded = if lo * hi > 0.0 {
            order_bound(&self.graded, 1.0 / hi, 1.0 / lo)
        } else {
            f64::NEG_INFINITY
        };
        by_factor.max(by_order).max(by_graded)
    }
}

/// Lower bound on `lambda_min(p(x))` over `[lo, hi]` for a Hermitian matrix
/// polynomial `p`, via `p(c + d) >= D_0 - Σ_{k>=1} r^k |D_k|`, less an
/// allowance for rounding in the shifted coefficients.
fn order_bound(coeffs: &[CMatrix], lo: f64, hi: f64) -> f64 {
    let (c, r) = (0.5 * (lo + hi), 0.5 * (hi - lo));
    let mut shifted = taylor_shift(coeffs, c).into_iter();
    let mut lower = shifted.next().expect("polynomial has a constant term");
    let mut magnitude = lower.norm();
    for (k, d) in shifted.enumerate() {
        let weight = r.powi(k as i32 + 1);
        magnitude += weight * d.norm();
        lower -= hermitian_abs(&d).scale(weight);
    }
    let allowance = ROUNDING_ALLOWANCE * coeffs.len() as f64 * f64::EPSILON * magnitude;
    hermitian_lambda_min(&lower) - allowance
}

/// Multiple of `eps * Σ r^k ||D_k||_F` charged to the order bound.
const ROUNDING_ALLOWANCE: f64 = 64.0;

fn horner(coeffs: &[CMatrix], x: f64) -> CMatrix {
    let mut it = coeffs.iter().rev();
    let first = it.next().expect("nonempty polynomial").clone();
    it.fold(first, |acc, c| acc.scale(x) + c)
}

/// Coefficients of `p(c + d)` in powers of `d`.
fn taylor_shift(coeffs: &[CMatrix], c: f64) -> Vec<CMatrix> {
    let mut out = coeffs.to_vec();
    let deg = out.len();
    // repeated synthetic division by (x - c)
    for i in 0..deg {
        for j in (i..deg - 1).rev() {
            let next = out[j + 1].clone();
            out[j] += next.scale(c);
        }
    }
    out
}

fn hermitian_lambda_min(m: &CMatrix) -> f64 {
    let sym = (m + m.adjoint()).scale(0.5);
    sym.symmetric_eigenvalues().iter().copied().fold(f64::INFINITY, f64::min)
}

/// `|D| = (D^2)^{1/2}` for Hermitian `D`.
fn hermitian_abs(d: &CMatrix) -> CMatrix {
    let eig = nalgebra::SymmetricEigen::new((d + d.adjoint()).scale(0.5));
    let abs = CVector::from_iterator(eig.eigenvalues.len(), eig.eigenvalues.iter().map(|l| c64(l.abs(), 0.0)));
    &eig.eigenvectors * CMatrix::from_diagonal(&abs) * eig.eigenvectors.adjoint()
}

/// `Σ_{j<=m} (C_S^+)^j C_H C_S^j`.
pub fn skew_sum(op: &WeightedOperator, m: usize) -> CMatrix {
    let w = op.weight();
    let s_adj = w.adjoint(op.skew());
    let mut term = op.herm().clone();
    let mut sum = CMatrix::zeros(op.dim(), op.dim());
    for _ in 0..=m {
        sum += &term;
        term = &s_adj * term * op.skew();
    }
    sum
}
