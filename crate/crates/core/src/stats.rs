//! Summation, moments, the normal law and the one-sample
//! Kolmogorov-Smirnov test.

use alloc::vec::Vec;

use num_traits::Float;

/// Compensated (Neumaier) running sum.
#[derive(Debug, Clone, Copy, Default)]
pub struct Neumaier {
    sum: f64,
    comp: f64,
}

impl Neumaier {
    #[inline]
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn sum(&self) -> f64 {
        self.sum + self.comp
    }
}

/// Pairwise sum in index order. The result depends only on the values and
/// their order, never on how they were produced.
pub fn pairwise_sum(xs: &[f64]) -> f64 {
    const LEAF: usize = 16;
    if xs.len() <= LEAF {
        return xs.iter().fold(0.0, |acc, x| acc + x);
    }
    let mid = xs.len() / 2;
    pairwise_sum(&xs[..mid]) + pairwise_sum(&xs[mid..])
}

/// Mean and unbiased variance by two index-ordered pairwise passes.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Moments {
    pub count: usize,
    pub mean: f64,
    pub variance: f64,
}

impl Moments {
    pub fn of(xs: &[f64]) -> Moments {
        let count = xs.len();
        if count == 0 {
            return Moments {
                count,
                mean: f64::NAN,
                variance: f64::NAN,
            };
        }
        let mean = pairwise_sum(xs) / count as f64;
        let variance = if count > 1 {
            let dev: Vec<f64> = xs.iter().map(|x| (x - mean) * (x - mean)).collect();
            pairwise_sum(&dev) / (count - 1) as f64
        } else {
            0.0
        };
        Moments {
            count,
            mean,
            variance,
        }
    }

    /// Standard error of the mean.
    pub fn std_error(&self) -> f64 {
        (self.variance / self.count as f64).sqrt()
    }
}

pub fn normal_cdf(x: f64, sd: f64) -> f64 {
    0.5 * libm::erfc(-x / (sd * core::f64::consts::SQRT_2))
}

/// Asymptotic Kolmogorov survival function `P{K > lambda}`.
pub fn kolmogorov_survival(lambda: f64) -> f64 {
    if lambda <= 0.0 {
        return 1.0;
    }
    if lambda < 1.18 {
        // small-lambda form of the CDF converges faster here
        let pi2 = core::f64::consts::PI * core::f64::consts::PI;
        let y = -pi2 / (8.0 * lambda * lambda);
        let cdf = (2.0 * core::f64::consts::PI).sqrt() / lambda
            * (1..=6)
                .map(|j| ((2 * j - 1) as f64).powi(2) * y)
                .map(Float::exp)
                .sum::<f64>();
        return (1.0 - cdf).clamp(0.0, 1.0);
    }
    let sum: f64 = (1..=100)
        .map(|k| {
            let sign = if k % 2 == 1 { 1.0 } else { -1.0 };
            sign * (-2.0 * (k * k) as f64 * lambda * lambda).exp()
        })
        .sum();
    (2.0 * sum).clamp(0.0, 1.0)
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct KsResult {
    pub distance: f64,
    pub p_value: f64,
    pub n: usize,
}

/// One-sample KS test of `samples` against a continuous CDF, with the
/// asymptotic p-value `Q(sqrt(n) D)`.
pub fn ks_one_sample<F: Fn(f64) -> f64>(samples: &[f64], cdf: F) -> KsResult {
    let mut sorted: Vec<f64> = samples.to_vec();
    sorted.sort_by(|a, b| a.total_cmp(b));
    let n = sorted.len();
    let nf = n as f64;
    let distance = sorted.iter().enumerate().fold(0.0f64, |d, (i, &x)| {
        let f = cdf(x);
        d.max(f - i as f64 / nf).max((i + 1) as f64 / nf - f)
    });
    KsResult {
        distance,
        p_value: kolmogorov_survival(nf.sqrt() * distance),
        n,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{seed_stream, unit_f64};
    use alloc::vec;

    #[test]
    fn pairwise_matches_exact_integers() {
        let xs: Vec<f64> = (1..=1000).map(|k| k as f64).collect();
        assert_eq!(pairwise_sum(&xs), 500_500.0);
        assert_eq!(pairwise_sum(&[]), 0.0);
    }

    #[test]
    fn neumaier_recovers_cancellation() {
        let mut s = Neumaier::default();
        for x in [1.0, 1e100, 1.0, -1e100] {
            s.add(x);
        }
        assert_eq!(s.sum(), 2.0);
    }

    #[test]
    fn moments_small_sample() {
        let m = Moments::of(&[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(m.mean, 2.5);
        assert!((m.variance - 5.0 / 3.0).abs() < 1e-15);
        let one = Moments::of(&[7.0]);
        assert_eq!((one.mean, one.variance), (7.0, 0.0));
    }

    #[test]
    fn kolmogorov_known_quantiles() {
        // classical critical values of the limiting distribution
        assert!((kolmogorov_survival(1.3581) - 0.05).abs() < 2e-4);
        assert!((kolmogorov_survival(1.6276) - 0.01).abs() < 1e-4);
        assert!((kolmogorov_survival(1.2238) - 0.10).abs() < 2e-4);
        assert!((kolmogorov_survival(0.5) - 0.9639).abs() < 1e-3);
        // the two series agree where they meet
        let a = kolmogorov_survival(1.18 - 1e-12);
        let b = kolmogorov_survival(1.18);
        assert!((a - b).abs() < 1e-12);
    }

    #[test]
    fn normal_cdf_values() {
        assert_eq!(normal_cdf(0.0, 2.0), 0.5);
        assert!((normal_cdf(1.959963984540054, 1.0) - 0.975).abs() < 1e-12);
        assert!((normal_cdf(-2.0, 2.0) - 0.15865525393145707).abs() < 1e-14);
    }

    #[test]
    fn ks_detects_shift_and_accepts_null() {
        let mut rng = seed_stream(21, 0);
        let xs: Vec<f64> = (0..5000).map(|_| unit_f64(&mut rng)).collect();
        let uniform = |x: f64| x.clamp(0.0, 1.0);
        assert!(ks_one_sample(&xs, uniform).p_value > 0.01);
        let shifted: Vec<f64> = xs.iter().map(|x| x * 0.9).collect();
        assert!(ks_one_sample(&shifted, uniform).p_value < 1e-6);
        let r = ks_one_sample(&[0.5], uniform);
        assert_eq!(r.distance, 0.5);
        let _ = vec![0u8];
    }
}
