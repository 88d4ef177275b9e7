//! Property tests over seeded random accretive operators.

use std::f64::consts::PI;

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use hypocert::fixtures;
use hypocert::index::{
    build_certificate, compute_k, dominant_mixing_level, index_by_sums, mixing_polynomial, GridSpec, IndexOptions,
};
use hypocert::linalg::{c64, eigh, expm, identity, propagator, real_matrix, split, CMatrix, CVector, WeightedOperator};
use hypocert::lyapunov::{build_p_eta, lyapunov_decay_slack, p_norm_bound};
use hypocert::ph::{
    decay_report, envelope_rate, equilibrium_projector, evolve, project_initial, sample_function, DecayOptions, ModalState,
    PhSystem,
};

const CASES: u32 = 48;

fn config(cases: u32) -> ProptestConfig {
    ProptestConfig {
        cases,
        failure_persistence: None,
        ..ProptestConfig::default()
    }
}

fn operator(seed: u64, n: usize) -> WeightedOperator {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let weighted = rng.random::<bool>();
    fixtures::random_accretive(&mut rng, n, weighted)
}

fn vector(seed: u64, n: usize) -> CVector {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
    CVector::from_fn(n, |_, _| c64(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5))
}

fn max_abs(a: &CMatrix) -> f64 {
    a.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// Same parts with the skew part scaled, i.e. the mode `eta` as an operator.
fn mode_operator(op: &WeightedOperator, eta: f64) -> WeightedOperator {
    WeightedOperator::from_parts(op.skew().scale(eta), op.herm().clone(), op.weight().clone()).unwrap()
}

proptest! {
    #![proptest_config(config(CASES))]

    #[test]
    fn split_reconstructs_and_adjoint_is_involution(seed in any::<u64>(), n in 2usize..=6) {
        let op = operator(seed, n);
        let w = op.weight();
        let again = split(op.matrix(), w).unwrap();
        let scale = op.norm().max(1.0);
        prop_assert!(max_abs(&(again.skew() + again.herm() - op.matrix())) <= 1e-12 * scale);
        prop_assert!(max_abs(&(w.adjoint(&w.adjoint(op.matrix())) - op.matrix())) <= 1e-10 * scale);
        prop_assert!(max_abs(&(w.adjoint(op.skew()) + op.skew())) <= 1e-10 * scale);
        prop_assert!(max_abs(&(w.adjoint(op.herm()) - op.herm())) <= 1e-10 * scale);
    }

    #[test]
    fn semigroup_contracts_and_is_submultiplicative(
        seed in any::<u64>(),
        n in 2usize..=6,
        t in 0.0f64..2.0,
        s in 0.0f64..2.0,
    ) {
        let op = operator(seed, n);
        let w = op.weight();
        let norm = |t: f64| w.operator_norm(&propagator(op.matrix(), t).unwrap()).unwrap();
        let (nt, ns, nts) = (norm(t), norm(s), norm(t + s));
        prop_assert!(nt <= 1.0 + 1e-10, "||T({t})|| = {nt}");
        prop_assert!(nts <= nt * ns + 1e-10);
    }

    #[test]
    fn expm_matches_eigendecomposition(seed in any::<u64>(), n in 1usize..=6, t in -3.0f64..3.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let g = CMatrix::from_fn(n, n, |_, _| c64(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5));
        let h = (&g + g.adjoint()).scale(0.5);
        let (values, vectors) = eigh(&h).unwrap();
        let diag = CMatrix::from_diagonal(&CVector::from_iterator(n, values.iter().map(|l| c64((l * t).exp(), 0.0))));
        let want = &vectors * diag * vectors.adjoint();
        let got = expm(&h, t).unwrap();
        prop_assert!(max_abs(&(got - &want)) <= 1e-12 * max_abs(&want).max(1.0));
    }

    #[test]
    fn kappa_by_m_is_nondecreasing(seed in any::<u64>(), n in 2usize..=8) {
        let op = operator(seed, n);
        let rep = index_by_sums(&op, IndexOptions::default()).unwrap();
        for pair in rep.kappa_by_m.windows(2) {
            prop_assert!(pair[1] >= pair[0] - rep.tol, "{:?}", rep.kappa_by_m);
        }
    }

    #[test]
    fn index_is_mode_invariant(seed in any::<u64>(), n in 2usize..=5) {
        let op = operator(seed, n);
        let base = index_by_sums(&op, IndexOptions::default()).unwrap().m_hc;
        for eta in [1.0, -1.0, 3.0, -3.0, 10.0, -10.0] {
            let m = index_by_sums(&mode_operator(&op, eta), IndexOptions::default()).unwrap().m_hc;
            prop_assert_eq!(m, base, "eta = {}", eta);
        }
    }

    #[test]
    fn lower_order_mixing_terms_obey_k(seed in any::<u64>(), n in 2usize..=5, eta_abs in 1.0f64..100.0, neg: bool) {
        let op = operator(seed, n);
        let Some(m) = index_by_sums(&op, IndexOptions::default()).unwrap().m_hc else {
            return Ok(());
        };
        let k = compute_k(&op, m).unwrap();
        let eta = if neg { -eta_abs } else { eta_abs };
        let w = op.weight();
        for ell in 1..=m {
            let poly = mixing_polynomial(&op, ell);
            let top = poly.coeffs()[2 * ell].scale(eta.powi(2 * ell as i32));
            let rest = w.operator_norm(&(poly.eval(eta) - top)).unwrap();
            let bound = k * eta_abs.powi(2 * ell as i32 - 1);
            prop_assert!(rest <= bound * (1.0 + 1e-9), "ell={ell}: {rest} > {bound}");
        }
    }

    #[test]
    fn dominant_level_bound_beyond_r(seed in any::<u64>(), n in 2usize..=4, stretch in 1.0f64..4.0, neg: bool) {
        let op = operator(seed, n);
        let Ok(cert) = build_certificate(&op, &GridSpec::default()) else {
            return Ok(());
        };
        let y = vector(seed, n);
        let ell = dominant_mixing_level(&op, &y, cert.m_hc);
        let eta = cert.r * stretch * if neg { -1.0 } else { 1.0 };
        let w = op.weight();
        let energy = |c: &CMatrix| {
            let mut v = y.clone();
            for _ in 0..ell {
                v = c * v;
            }
            w.inner(&v, &(op.herm() * &v)).re
        };
        let lhs = energy(&op.mode(eta));
        let rhs = 0.5 * eta.powi(2 * ell as i32) * energy(op.skew());
        prop_assert!(lhs >= rhs * (1.0 - 1e-9), "{lhs} < {rhs}");
    }

    #[test]
    fn certificate_constants_are_positive(seed in any::<u64>(), n in 2usize..=4) {
        let op = operator(seed, n);
        let cert = build_certificate(&op, &GridSpec::default()).unwrap();
        prop_assert!(cert.kappa > 0.0 && cert.kappa1 > 0.0 && cert.mu_r > 0.0 && cert.sigma > 0.0, "{cert:?}");
        prop_assert!(cert.m_hc == 0 || cert.k > 0.0);
        prop_assert!(cert.r >= 1.0);
        prop_assert!(cert.inf_kappa.lower <= cert.inf_kappa.upper);
    }

    #[test]
    fn lyapunov_block_is_bounded_below_and_decays(
        seed in any::<u64>(),
        n in 2usize..=4,
        mode in 1u32..=20,
        neg: bool,
        t in 0.0f64..3.0,
    ) {
        let op = operator(seed, n);
        let cert = build_certificate(&op, &GridSpec::default()).unwrap();
        let eta = mode as f64 * if neg { -1.0 } else { 1.0 };
        let block = build_p_eta(&op, eta, cert.m_hc).unwrap();
        prop_assert!(block.hermitian_residual <= 1e-12);
        prop_assert!(block.lambda_min_p >= 1.0 - 1e-10);
        prop_assert!(block.p_norm <= p_norm_bound(cert.m_hc, cert.l) * (1.0 + 1e-12));
        prop_assert!(block.dissipation >= cert.sigma - 1e-9);
        let slack = lyapunov_decay_slack(&op, &block, cert.sigma, t, &vector(seed, n)).unwrap();
        prop_assert!(slack >= -1e-10, "slack {slack}");
    }

    #[test]
    fn weighted_parseval(seed in any::<u64>(), m_max in 1usize..=6) {
        let sys = fixtures::damped_wave();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut state = ModalState::zeros(m_max, sys.dim());
        for m in state.modes().collect::<Vec<_>>() {
            *state.coeff_mut(m) = CVector::from_fn(sys.dim(), |_, _| c64(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5));
        }
        let count = 4 * m_max + 1;
        let samples = sample_function(|z| state.reconstruct(z), count);
        let quadrature: f64 = samples.iter().map(|x| x.dotc(&(sys.h() * x)).re).sum::<f64>() * 2.0 * PI / count as f64;
        let energy = state.energy(sys.h());
        prop_assert!((quadrature - energy).abs() <= 1e-12 * energy);
        let back = project_initial(&samples, sys.h(), m_max).unwrap();
        prop_assert!(back.state.rel_distance(&state) <= 1e-12);
    }

    #[test]
    fn equilibria_are_invariant(seed in any::<u64>(), t in 0.0f64..5.0) {
        let sys = fixtures::damped_wave();
        let proj = equilibrium_projector(&sys).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut state = ModalState::zeros(3, sys.dim());
        for m in state.modes().collect::<Vec<_>>() {
            *state.coeff_mut(m) = CVector::from_fn(sys.dim(), |_, _| c64(rng.random::<f64>() - 0.5, 0.0));
        }
        let rest = proj.apply(&state);
        let moved = evolve(&rest, &sys, t).unwrap();
        prop_assert!(moved.rel_distance(&rest) <= 1e-12);
        let later = proj.apply(&evolve(&state, &sys, t).unwrap());
        prop_assert!(later.rel_distance(&rest) <= 1e-12);
    }

    #[test]
    fn envelope_rate_recovers_slope(omega in 0.05f64..2.0, wobble in 0.05f64..0.5, freq in 1.0f64..8.0) {
        // resolved peaks: the oscillation beats the decay and every period
        // holds at least 40 samples
        prop_assume!(wobble * freq > 1.5 * omega * (1.0 + wobble));
        let count = 2 + (60.0 * freq / (2.0 * PI) * 40.0) as usize;
        let times: Vec<f64> = (0..count).map(|i| 60.0 * i as f64 / (count - 1) as f64).collect();
        let norms: Vec<f64> = times
            .iter()
            .map(|&t| (-omega * t).exp() * (1.0 + wobble * (freq * t).cos()))
            .collect();
        let fit = envelope_rate(&times, &norms).unwrap();
        prop_assert!((fit.omega - omega).abs() <= 1e-3 * omega.max(1.0), "{} vs {omega}", fit.omega);
        prop_assert!(fit.envelope_excess <= 0.0, "{fit:?}");
    }
}

proptest! {
    #![proptest_config(config(12))]

    // Damping well below 2 keeps every mode away from critical damping,
    // where a t e^{-wt} transient outlasts any finite horizon.
    #[test]
    fn damped_wave_rate_matches_spectrum(damping in 0.2f64..1.2) {
        let sys = PhSystem::new(
            real_matrix(2, 2, &[0.0, 1.0, 1.0, 0.0]),
            real_matrix(2, 2, &[damping, 0.0, 0.0, 0.0]),
            identity(2),
        )
        .unwrap();
        let opts = DecayOptions { m_max: 8, ..DecayOptions::default() };
        let report = decay_report(&sys, &opts).unwrap();
        let rate = report.rate.unwrap();
        prop_assert!((report.omega_spectral - 0.5 * damping).abs() <= 1e-10);
        prop_assert!((rate.omega / report.omega_spectral - 1.0).abs() <= 1e-2, "{rate:?}");
    }
}

#[test]
fn reference_damped_wave_stays_below_rate_line() {
    let report = decay_report(&fixtures::damped_wave(), &DecayOptions::default()).unwrap();
    let rate = report.rate.unwrap();
    assert!(rate.envelope_excess <= 0.0, "{rate:?}");
}
