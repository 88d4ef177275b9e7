//! Explicit Lyapunov operators for the mode family.
//!
//! For mode `eta` and index `m` the block is
//! `P_eta = Σ_{j<=m} eta^{-2j} (C_eta^+)^j C_eta^j`. It satisfies `P_eta >= 1`
//! and `P_eta C_eta + C_eta^+ P_eta >= sigma` with the certificate's `sigma`,
//! uniformly in `|eta| >= 1`.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::family::{check_mode, ModeFamily};
use crate::index::HypoCertificate;
use crate::linalg::{identity, propagator, CMatrix, CVector, WeightedOperator};

/// Slack allowed below 1 in `lambda_min(P) >= 1`.
pub const P_LOWER_TOL: f64 = 1e-10;
/// Slack allowed below `sigma` in the dissipation check.
pub const DISSIPATION_TOL: f64 = 1e-9;
/// Relative Hermiticity residual allowed for `P`.
pub const P_HERMITIAN_RTOL: f64 = 1e-12;

#[derive(Debug, Clone, Serialize)]
pub struct LyapunovBlock {
    pub eta: f64,
    #[serde(skip)]
    pub p: CMatrix,
    pub lambda_min_p: f64,
    pub p_norm: f64,
    /// `||P - P^+|| / ||P||`.
    pub hermitian_residual: f64,
    /// Weighted `lambda_min(P C_eta + C_eta^+ P)`.
    pub dissipation: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DissipationCheck {
    pub pass: bool,
    /// `dissipation - sigma`.
    pub margin: f64,
    pub tol: f64,
}

/// `P_eta` for mode `eta`; `eta = 1` gives the unscaled operator
/// `Σ (C^+)^j C^j` of the bounded case.
pub fn build_p_eta(op: &WeightedOperator, eta: f64, m: usize) -> Result<LyapunovBlock> {
    check_mode(eta)?;
    let w = op.weight();
    let c = op.mode(eta);
    let c_adj = w.adjoint(&c);
    let n = op.dim();
    let inv_sq = 1.0 / (eta * eta);
    let mut p = identity(n);
    // (C^+)^j C^j scaled by eta^{-2j}
    let mut term = identity(n);
    for _ in 0..m {
        term = (&c_adj * term * &c).scale(inv_sq);
        p += &term;
    }
    let p_adj = w.adjoint(&p);
    let p_norm = w.operator_norm(&p)?;
    let hermitian_residual = w.operator_norm(&(&p - &p_adj))? / p_norm;
    let p = (&p + p_adj).scale(0.5);
    let lambda_min_p = w.lambda_min(&p)?;
    let dissipation = w.lambda_min(&(&p * &c + &c_adj * &p))?;
    Ok(LyapunovBlock {
        eta,
        p,
        lambda_min_p,
        p_norm,
        hermitian_residual,
        dissipation,
    })
}

pub fn verify_dissipation(block: &LyapunovBlock, sigma: f64) -> DissipationCheck {
    let margin = block.dissipation - sigma;
    DissipationCheck {
        pass: margin >= -DISSIPATION_TOL,
        margin,
        tol: DISSIPATION_TOL,
    }
}

/// `(m + 1) max(1, L^{2m})`, the uniform bound on `||P_eta||`.
pub fn p_norm_bound(m: usize, l: f64) -> f64 {
    (m as f64 + 1.0) * l.powi(2 * m as i32).max(1.0)
}

#[derive(Debug, Clone, Serialize)]
pub struct FamilyCertificate {
    pub blocks: Vec<LyapunovBlock>,
    pub mode_spec: String,
    pub sigma_numeric: f64,
    pub sigma_constructive: f64,
    pub min_lambda_p: f64,
    pub max_p_norm: f64,
    pub p_norm_bound: f64,
    /// Radius beyond which modes are covered by the uniform `kappa1` bound.
    pub r: f64,
    /// Checked modes with `|eta| >= R`.
    pub modes_beyond_r: usize,
    pub p_lower_tol: f64,
    pub dissipation_tol: f64,
    pub hermitian_rtol: f64,
    pub blocks_pass: bool,
    pub pass: bool,
}

/// Build and check every block of a finite mode family against `cert`.
pub fn certify_family(family: &ModeFamily, cert: &HypoCertificate) -> Result<FamilyCertificate> {
    let modes = family.modes.validate()?;
    let op = &family.op;
    let blocks: Vec<LyapunovBlock> = modes
        .par_iter()
        .map(|&eta| build_p_eta(op, eta, cert.m_hc))
        .collect::<Result<_>>()?;
    let sigma_numeric = blocks.iter().map(|b| b.dissipation).fold(f64::INFINITY, f64::min);
    let min_lambda_p = blocks.iter().map(|b| b.lambda_min_p).fold(f64::INFINITY, f64::min);
    let max_p_norm = blocks.iter().map(|b| b.p_norm).fold(0.0, f64::max);
    let bound = p_norm_bound(cert.m_hc, cert.l);
    let blocks_pass = blocks.iter().all(|b| {
        b.lambda_min_p >= 1.0 - P_LOWER_TOL
            && verify_dissipation(b, cert.sigma).pass
            && b.hermitian_residual <= P_HERMITIAN_RTOL
            && b.p_norm <= bound + DISSIPATION_TOL
    });
    let pass = blocks_pass && sigma_numeric >= cert.sigma - DISSIPATION_TOL;
    Ok(FamilyCertificate {
        modes_beyond_r: modes.iter().filter(|e| e.abs() >= cert.r).count(),
        blocks,
        mode_spec: family.modes.to_string(),
        sigma_numeric,
        sigma_constructive: cert.sigma,
        min_lambda_p,
        max_p_norm,
        p_norm_bound: bound,
        r: cert.r,
        p_lower_tol: P_LOWER_TOL,
        dissipation_tol: DISSIPATION_TOL,
        hermitian_rtol: P_HERMITIAN_RTOL,
        blocks_pass,
        pass,
    })
}

/// `<x, P x>`
pub fn p_energy(op: &WeightedOperator, block: &LyapunovBlock, x: &CVector) -> f64 {
    op.weight().inner(x, &(&block.p * x)).re
}

/// Relative slack in `||e^{-C_eta t} x||_P^2 <= e^{-(sigma/||P||) t} ||x||_P^2`;
/// nonnegative when the decay estimate holds.
pub fn lyapunov_decay_slack(
    op: &WeightedOperator,
    block: &LyapunovBlock,
    sigma: f64,
    t: f64,
    x: &CVector,
) -> Result<f64> {
    if x.len() != op.dim() {
        return Err(Error::Dimension(format!(
            "vector of length {} for operator of size {}",
            x.len(),
            op.dim()
        )));
    }
    let y = propagator(&op.mode(block.eta), t)? * x;
    let before = p_energy(op, block, x);
    let after = p_energy(op, block, &y);
    Ok(((-sigma / block.p_norm * t).exp() * before - after) / before)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::family::ModeSet;
    use crate::fixtures;
    use crate::index::{build_certificate, GridSpec};
    use crate::linalg::{c64, real_matrix};

    #[test]
    fn index_zero_gives_identity_block() {
        let op = fixtures::coercive();
        let b = build_p_eta(&op, -3.0, 0).unwrap();
        assert_eq!(b.p, identity(2));
        assert!((b.dissipation - 2.0).abs() < 1e-14);
        assert!(verify_dissipation(&b, 1.0).margin >= 1.0 - 1e-14);
    }

    #[test]
    fn rotation_block_at_one() {
        let b = build_p_eta(&fixtures::rotation(), 1.0, 1).unwrap();
        assert!((&b.p - real_matrix(2, 2, &[3.0, 1.0, 1.0, 2.0])).norm() < 1e-14);
        // P C + C^* P = [[4,2],[2,2]] with C = [[1,1],[-1,0]]
        let expected = 3.0 - 5f64.sqrt();
        assert!((b.dissipation - expected).abs() < 1e-13, "{}", b.dissipation);
        let check = verify_dissipation(&b, 0.011937);
        assert!(check.pass && check.margin > 0.5);
        assert!(!verify_dissipation(&b, 2.0 * b.dissipation + 1.0).pass);
    }

    #[test]
    fn rejects_inner_modes() {
        assert!(build_p_eta(&fixtures::rotation(), 0.3, 1).is_err());
        let family = ModeFamily {
            op: fixtures::rotation(),
            modes: ModeSet::list(vec![0.5]),
        };
        let cert = build_certificate(&fixtures::rotation(), &GridSpec::default()).unwrap();
        assert!(certify_family(&family, &cert).is_err());
    }

    #[test]
    fn rotation_family_certificate() {
        let op = fixtures::rotation();
        let cert = build_certificate(&op, &GridSpec::default()).unwrap();
        let family = ModeFamily::new(op, ModeSet::symmetric(1, 20)).unwrap();
        let fc = certify_family(&family, &cert).unwrap();
        assert!(fc.pass);
        assert_eq!(fc.blocks.len(), 40);
        assert!((fc.p_norm_bound - 8.0).abs() < 1e-12);
        assert!(fc.sigma_numeric >= fc.sigma_constructive);
        assert_eq!(fc.modes_beyond_r, 2 * (21 - cert.r.ceil() as usize));
    }

    #[test]
    fn lyapunov_decay_holds_on_samples() {
        let op = fixtures::rotation();
        let cert = build_certificate(&op, &GridSpec::default()).unwrap();
        let x = CVector::from_vec(vec![c64(0.3, -0.1), c64(-0.7, 0.2)]);
        for &eta in &[1.0, -4.0, 12.0] {
            let b = build_p_eta(&op, eta, 1).unwrap();
            for &t in &[0.01, 0.5, 3.0, 20.0] {
                assert!(lyapunov_decay_slack(&op, &b, cert.sigma, t, &x).unwrap() >= -1e-12);
            }
        }
    }
}
