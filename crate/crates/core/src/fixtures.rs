//! Reference operators with known indices, and seeded random accretive
//! operators.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::linalg::{c64, identity, real_matrix, CMatrix, Weight, WeightedOperator};
use crate::ph::PhSystem;

fn unweighted(skew: CMatrix, herm: CMatrix) -> WeightedOperator {
    let n = skew.nrows();
    WeightedOperator::from_parts(skew, herm, Weight::identity(n)).expect("fixture is well formed")
}

/// `C_S = [[0,1],[-1,0]]`, `C_H = diag(1,0)`: index 1.
pub fn rotation() -> WeightedOperator {
    unweighted(
        real_matrix(2, 2, &[0.0, 1.0, -1.0, 0.0]),
        real_matrix(2, 2, &[1.0, 0.0, 0.0, 0.0]),
    )
}

/// Tridiagonal skew chain damped at the first site: index 2.
pub fn chain() -> WeightedOperator {
    unweighted(
        real_matrix(3, 3, &[0.0, 1.0, 0.0, -1.0, 0.0, 1.0, 0.0, -1.0, 0.0]),
        real_matrix(3, 3, &[1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0]),
    )
}

/// `C_S = 0`, `C_H = I` on `C^2`: index 0.
pub fn coercive() -> WeightedOperator {
    unweighted(CMatrix::zeros(2, 2), identity(2))
}

/// `C_H = 0`: never hypocoercive.
pub fn skew_only() -> WeightedOperator {
    unweighted(real_matrix(2, 2, &[0.0, 1.0, -1.0, 0.0]), CMatrix::zeros(2, 2))
}

/// The three hypocoercive reference operators with their indices.
pub fn reference_set() -> Vec<(&'static str, WeightedOperator, usize)> {
    vec![
        ("coercive", coercive(), 0),
        ("rotation", rotation(), 1),
        ("chain", chain(), 2),
    ]
}

/// Damped wave: `P1 = [[0,1],[1,0]]`, `R = diag(1,0)`, `H = I`.
pub fn damped_wave() -> PhSystem {
    PhSystem::new(
        real_matrix(2, 2, &[0.0, 1.0, 1.0, 0.0]),
        real_matrix(2, 2, &[1.0, 0.0, 0.0, 0.0]),
        identity(2),
    )
    .expect("fixture is well formed")
}

/// Damped wave with the dissipation switched off.
pub fn undamped_wave() -> PhSystem {
    PhSystem::new(
        real_matrix(2, 2, &[0.0, 1.0, 1.0, 0.0]),
        CMatrix::zeros(2, 2),
        identity(2),
    )
    .expect("fixture is well formed")
}

fn gaussian_matrix<R: Rng>(rng: &mut R, rows: usize, cols: usize) -> CMatrix {
    CMatrix::from_fn(rows, cols, |_, _| {
        c64(rng.sample(StandardNormal), rng.sample(StandardNormal))
    })
}

/// Random accretive operator on `C^n`, in one of two shapes picked at
/// random:
///
/// * generic: `C_H = B B^*` with `B` Gaussian of rank at least `n/2`, and a
///   Gaussian skew `C_S`;
/// * chain: a tridiagonal skew coupling with random complex weights of
///   modulus in `[0.5, 1.5]`, damped on its first one or two sites, rotated
///   by a random unitary. These reach indices up to `n - 1` while keeping
///   the mixing sums well away from rounding level.
///
/// With `weighted` the parts are mapped to a random positive definite
/// weight. (Gaussian operators with low-rank damping have Krylov spaces so
/// ill-conditioned that their index is not numerically decidable.)
pub fn random_accretive<R: Rng>(rng: &mut R, n: usize, weighted: bool) -> WeightedOperator {
    let (s, h) = if rng.random::<bool>() {
        let rank = rng.random_range(n.div_ceil(2)..=n);
        let b = gaussian_matrix(rng, n, rank);
        let a = gaussian_matrix(rng, n, n);
        ((&a - a.adjoint()).scale(0.5), &b * b.adjoint())
    } else {
        random_chain(rng, n)
    };
    let weight = if weighted {
        let g = gaussian_matrix(rng, n, n).scale(1.0 / (n as f64).sqrt());
        Weight::new(&g * g.adjoint() + identity(n)).expect("shifted Gram matrix is positive definite")
    } else {
        Weight::identity(n)
    };
    let skew = weight.from_standard(&s);
    let herm = weight.from_standard(&h);
    WeightedOperator::from_parts(skew, herm, weight).expect("random parts are well formed")
}

fn random_chain<R: Rng>(rng: &mut R, n: usize) -> (CMatrix, CMatrix) {
    let mut s = CMatrix::zeros(n, n);
    for i in 0..n - 1 {
        let w = num_complex::Complex64::from_polar(
            rng.random_range(0.5..1.5),
            rng.random_range(0.0..std::f64::consts::TAU),
        );
        s[(i, i + 1)] = w;
        s[(i + 1, i)] = -w.conj();
    }
    let damped = rng.random_range(1..=2usize.min(n - 1));
    let mut h = CMatrix::zeros(n, n);
    for i in 0..damped {
        h[(i, i)] = c64(rng.random_range(0.5..1.5), 0.0);
    }
    let q = gaussian_matrix(rng, n, n).qr().q();
    (&q * s * q.adjoint(), &q * h * q.adjoint())
}

/// Deterministic stream of random accretive operators with `n` drawn from
/// `dims`; every other operator carries a random weight.
pub fn random_family(seed: u64, count: usize, dims: std::ops::RangeInclusive<usize>) -> Vec<WeightedOperator> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|i| {
            let n = rng.random_range(dims.clone());
            random_accretive(&mut rng, n, i % 2 == 1)
        })
        .collect()
}
