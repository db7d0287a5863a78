//! Log-gamma, gamma ratios and `3F2(1,1,1; 2-r, 2-r; 1)`.
//!
//! Large arguments (`n` up to 10^8) make direct gamma evaluation overflow,
//! so every ratio goes through log-gamma differences. The difference
//! `ln G(x + a) - ln G(x)` is formed from the Stirling series directly,
//! avoiding the cancellation between two values of size `x ln x`.

#[allow(unused_imports)]
use num_traits::Float;

use crate::stats::Neumaier;

const HALF_LN_2PI: f64 = 0.918_938_533_204_672_8;
const SHIFT_TO: f64 = 20.0;

/// Stirling correction `ln G(z) - [(z - 1/2) ln z - z + ln(2 pi)/2]`, z >= 20.
fn stirling_tail(z: f64) -> f64 {
    let w = 1.0 / (z * z);
    (1.0 / 12.0 - w * (1.0 / 360.0 - w * (1.0 / 1260.0 - w * (1.0 / 1680.0 - w / 1188.0)))) / z
}

/// `ln G(x)` for `x > 0`.
pub fn ln_gamma(x: f64) -> f64 {
    assert!(x > 0.0, "ln_gamma needs a positive argument, got {x}");
    let mut z = x;
    let mut prod = 1.0;
    while z < SHIFT_TO {
        prod *= z;
        z += 1.0;
    }
    (z - 0.5) * z.ln() - z + HALF_LN_2PI + stirling_tail(z) - prod.ln()
}

/// `G(x)` for `0 < x < 171`.
pub fn gamma(x: f64) -> f64 {
    ln_gamma(x).exp()
}

/// `ln G(x + a) - ln G(x)` for `x > 0`, `x + a > 0`.
pub fn ln_gamma_ratio(x: f64, a: f64) -> f64 {
    assert!(
        x > 0.0 && x + a > 0.0,
        "ln_gamma_ratio outside its domain: x={x}, a={a}"
    );
    let mut z = x;
    let mut shift = Neumaier::default();
    while z.min(z + a) < SHIFT_TO {
        // ln G(z + a) - ln G(z) = [ln G(z + 1 + a) - ln G(z + 1)] - ln((z + a) / z)
        shift.add(-(a / z).ln_1p());
        z += 1.0;
    }
    let head = (z - 0.5) * (a / z).ln_1p() + a * (z + a).ln() - a;
    head + (stirling_tail(z + a) - stirling_tail(z)) + shift.sum()
}

/// `psi(x)` for `x > 0`.
pub fn digamma(x: f64) -> f64 {
    assert!(x > 0.0);
    let mut z = x;
    let mut acc = 0.0;
    while z < SHIFT_TO {
        acc -= 1.0 / z;
        z += 1.0;
    }
    let w = 1.0 / (z * z);
    acc + z.ln() - 0.5 / z - w * (1.0 / 12.0 - w * (1.0 / 120.0 - w * (1.0 / 252.0 - w / 240.0)))
}

/// Value of a truncated series together with a bound on its error.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SeriesValue {
    pub value: f64,
    pub error_bound: f64,
    /// Terms summed explicitly before the tail estimate took over.
    pub terms: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, thiserror::Error)]
pub enum SeriesError {
    #[error("3F2(1,1,1; 2-r, 2-r; 1) diverges for r >= 1/2 (got r = {0})")]
    Divergent(f64),
}

/// Default number of explicitly summed terms.
pub const HYP3F2_MAX_TERMS: u64 = 100_000;

const REL_STOP: f64 = 1e-14;

/// `3F2(1, 1, 1; 2 - r, 2 - r; 1) = sum_k (k!)^2 / ((2 - r)_k)^2` for
/// `0 <= r < 1/2`.
pub fn hyp3f2_unit(r: f64) -> Result<SeriesValue, SeriesError> {
    hyp3f2_unit_with(r, HYP3F2_MAX_TERMS)
}

/// As [`hyp3f2_unit`] with an explicit cap on summed terms (at least 1000).
///
/// Terms decay like `G(2-r)^2 k^(2r-2)`, far too slowly to sum to machine
/// precision, so the series is summed explicitly until the relative term
/// size drops below 1e-14 or `max_terms` is reached, and the remaining tail
/// is added by Euler-Maclaurin: the integral of the asymptotic expansion of
/// the summand plus endpoint corrections.
pub fn hyp3f2_unit_with(r: f64, max_terms: u64) -> Result<SeriesValue, SeriesError> {
    if !(0.0..0.5).contains(&r) {
        return Err(SeriesError::Divergent(r));
    }
    let max_terms = max_terms.max(1000);
    let b = 2.0 - r;
    let mut sum = Neumaier::default();
    let mut term = 1.0;
    let mut k = 0u64;
    loop {
        sum.add(term);
        k += 1;
        let ratio = k as f64 / (k as f64 + 1.0 - r);
        term *= ratio * ratio;
        if term < REL_STOP * sum.sum() || k == max_terms {
            break;
        }
    }
    let tail = unit_series_tail(r, k as f64);
    let direct = sum.sum();
    let rounding = 4.0 * f64::EPSILON * (k as f64).sqrt() * direct;
    Ok(SeriesValue {
        value: direct + tail.value,
        error_bound: tail.error_bound + rounding,
        terms: k,
    })
    .inspect(|_| debug_assert!(b > 1.5))
}

/// `sum_{k >= start} (G(2-r) G(k+1) / G(k+2-r))^2` by Euler-Maclaurin.
fn unit_series_tail(r: f64, start: f64) -> SeriesValue {
    // ln f(x) = ln C + (2r - 2) ln x + sum_j E_j x^-j, from the Stirling
    // series of ln G(x + 1) - ln G(x + 2 - r) in Bernoulli polynomials.
    let (alpha, beta) = (1.0, 2.0 - r);
    let b2 = |t: f64| t * t - t + 1.0 / 6.0;
    let b3 = |t: f64| t * t * t - 1.5 * t * t + 0.5 * t;
    let b4 = |t: f64| t * t * t * t - 2.0 * t * t * t + t * t - 1.0 / 30.0;
    let e1 = b2(alpha) - b2(beta);
    let e2 = -(b3(alpha) - b3(beta)) / 3.0;
    let e3 = (b4(alpha) - b4(beta)) / 6.0;
    // exp of the power series in u = 1/x
    let c = [
        1.0,
        e1,
        e2 + e1 * e1 / 2.0,
        e3 + e1 * e2 + e1 * e1 * e1 / 6.0,
    ];
    let ln_c = 2.0 * ln_gamma(2.0 - r);
    let s = 1.0 - 2.0 * r;
    let x = start;

    let integral: f64 = c
        .iter()
        .enumerate()
        .map(|(j, cj)| cj * (ln_c - (s + j as f64) * x.ln()).exp() / (s + j as f64))
        .sum();

    let f = (ln_c - 2.0 * ln_gamma_ratio(x + 1.0, 1.0 - r)).exp();
    let a = 2.0 - 2.0 * r;
    let g = -a / x - e1 / (x * x) - 2.0 * e2 / (x * x * x);
    let f1 = f * g;
    let f3 = -f * a * (a + 1.0) * (a + 2.0) / (x * x * x);
    let value = integral + f / 2.0 - f1 / 12.0 + f3 / 720.0;

    let f5 = f * a * (a + 1.0) * (a + 2.0) * (a + 3.0) * (a + 4.0) / x.powi(5);
    let next_series = (ln_c - (s + 4.0) * x.ln()).exp() / (s + 4.0)
        * (1.0 + c[1].abs() + c[2].abs() + c[3].abs());
    SeriesValue {
        value,
        error_bound: f5.abs() / 30240.0 + next_series + 8.0 * f64::EPSILON * value.abs(),
        terms: 0,
    }
}
