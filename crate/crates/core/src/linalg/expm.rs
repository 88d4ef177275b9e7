//! Matrix exponential by scaling and squaring with diagonal Padé
//! approximants of degree 3, 5, 7, 9 or 13, the degree picked from the
//! 1-norm of `At` (Higham 2005).

use num_complex::Complex64;

use super::{identity, norm_one, CMatrix};
use crate::error::{Error, Result};

/// Largest accepted `||A t||_1`. Beyond this the squaring phase can lose
/// accuracy on non-normal inputs, so [`expm`] refuses rather than return a
/// silently inaccurate result; see [`propagator`] for long horizons.
pub const EXPM_RANGE: f64 = 50.0;

const THETA_3: f64 = 1.495585217958292e-2;
const THETA_5: f64 = 2.53939833006323e-1;
const THETA_7: f64 = 9.504178996162932e-1;
const THETA_9: f64 = 2.097847961257068e0;
const THETA_13: f64 = 5.371920351148152e0;

const PADE_3: [f64; 4] = [120.0, 60.0, 12.0, 1.0];
const PADE_5: [f64; 6] = [30240.0, 15120.0, 3360.0, 420.0, 30.0, 1.0];
const PADE_7: [f64; 8] = [
    17297280.0, 8648640.0, 1995840.0, 277200.0, 25200.0, 1512.0, 56.0, 1.0,
];
const PADE_9: [f64; 10] = [
    17643225600.0,
    8821612800.0,
    2075673600.0,
    302702400.0,
    30270240.0,
    2162160.0,
    110880.0,
    3960.0,
    90.0,
    1.0,
];
const PADE_13: [f64; 14] = [
    64764752532480000.0,
    32382376266240000.0,
    7771770303897600.0,
    1187353796428800.0,
    129060195264000.0,
    10559470521600.0,
    670442572800.0,
    33522128640.0,
    1323241920.0,
    40840800.0,
    960960.0,
    16380.0,
    182.0,
    1.0,
];

fn real(x: f64) -> Complex64 {
    Complex64::new(x, 0.0)
}

/// `U` (odd part) and `V` (even part) of a low-degree Padé approximant.
fn pade_low(a: &CMatrix, b: &[f64]) -> (CMatrix, CMatrix) {
    let n = a.nrows();
    let a2 = a * a;
    let mut even = identity(n) * real(b[0]);
    let mut odd = identity(n) * real(b[1]);
    let mut power = identity(n);
    for k in 1..b.len() / 2 {
        power = &power * &a2;
        even += &power * real(b[2 * k]);
        odd += &power * real(b[2 * k + 1]);
    }
    (a * odd, even)
}

fn pade_13(a: &CMatrix) -> (CMatrix, CMatrix) {
    let n = a.nrows();
    let b = &PADE_13;
    let id = identity(n);
    let a2 = a * a;
    let a4 = &a2 * &a2;
    let a6 = &a4 * &a2;
    let inner_u = &a6 * real(b[13]) + &a4 * real(b[11]) + &a2 * real(b[9]);
    let u = a
        * (&a6 * inner_u
            + &a6 * real(b[7])
            + &a4 * real(b[5])
            + &a2 * real(b[3])
            + &id * real(b[1]));
    let inner_v = &a6 * real(b[12]) + &a4 * real(b[10]) + &a2 * real(b[8]);
    let v = &a6 * inner_v + &a6 * real(b[6]) + &a4 * real(b[4]) + &a2 * real(b[2]) + &id * real(b[0]);
    (u, v)
}

/// `e^{A t}`.
///
/// Accurate to roughly machine precision relative to `||e^{At}||` for
/// `||A t||_1 <= EXPM_RANGE`; larger arguments are refused with
/// [`Error::ExpRange`].
pub fn expm(a: &CMatrix, t: f64) -> Result<CMatrix> {
    if a.nrows() != a.ncols() {
        return Err(Error::Dimension(format!(
            "exponential needs a square matrix, got {}x{}",
            a.nrows(),
            a.ncols()
        )));
    }
    if !t.is_finite() {
        return Err(Error::InvalidArgument(format!("time {t} is not finite")));
    }
    let n = a.nrows();
    let at = a * real(t);
    let scale = norm_one(&at);
    if !scale.is_finite() || scale > EXPM_RANGE {
        return Err(Error::ExpRange {
            scale,
            limit: EXPM_RANGE,
        });
    }
    if scale == 0.0 {
        return Ok(identity(n));
    }

    let (mut squarings, (u, v)) = if scale <= THETA_3 {
        (0, pade_low(&at, &PADE_3))
    } else if scale <= THETA_5 {
        (0, pade_low(&at, &PADE_5))
    } else if scale <= THETA_7 {
        (0, pade_low(&at, &PADE_7))
    } else if scale <= THETA_9 {
        (0, pade_low(&at, &PADE_9))
    } else {
        let s = (scale / THETA_13).log2().ceil().max(0.0) as i32;
        let scaled = &at * real(0.5f64.powi(s));
        (s, pade_13(&scaled))
    };

    let numer = &v + &u;
    let denom = &v - &u;
    let mut result = denom
        .lu()
        .solve(&numer)
        .ok_or_else(|| Error::Numerical("singular Padé denominator".into()))?;
    while squarings > 0 {
        result = &result * &result;
        squarings -= 1;
    }
    Ok(result)
}

/// `e^{-C t}` for `t >= 0`, for generators whose semigroup is bounded (for
/// example accretive `C`).
///
/// Horizons with `||C t||_1` beyond the [`expm`] range are split into `k`
/// equal steps and the one-step propagator is raised to the `k`-th power
/// through the semigroup law `T(t) = T(t/k)^k`.
pub fn propagator(c: &CMatrix, t: f64) -> Result<CMatrix> {
    if !(t >= 0.0) || !t.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "propagation time must be finite and nonnegative, got {t}"
        )));
    }
    let scale = norm_one(c) * t;
    let steps = (scale / (0.8 * EXPM_RANGE)).ceil().max(1.0);
    if steps > 1e9 {
        return Err(Error::ExpRange {
            scale,
            limit: EXPM_RANGE * 1e9,
        });
    }
    let minus_c = -c;
    let step = expm(&minus_c, t / steps)?;
    Ok(matrix_power(&step, steps as u64))
}

fn matrix_power(a: &CMatrix, mut k: u64) -> CMatrix {
    let mut result = identity(a.nrows());
    let mut base = a.clone();
    while k > 0 {
        if k & 1 == 1 {
            result = &result * &base;
        }
        k >>= 1;
        if k > 0 {
            base = &base * &base;
        }
    }
    result
}
