//! Step-size laws for the random-step-size walk.
//!
//! Every family carries closed-form mean, variance and zero mass, so the
//! analytics never estimate model moments from samples.

use alloc::vec::Vec;

#[allow(unused_imports)]
use num_traits::Float;
use rand::RngCore;
use rand_distr::{Distribution, Exp, Gamma, LogNormal};

use crate::rng::unit_f64;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SizeError {
    #[error("invalid {family} parameters: {reason}")]
    Parameters {
        family: &'static str,
        reason: &'static str,
    },
    #[error("the first step size must be strictly positive, but the {0} law has an atom at zero")]
    FirstNotPositive(&'static str),
}

/// Law of a single step size.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(tag = "family", rename_all = "kebab-case"))]
pub enum SizeLaw {
    PointMass {
        value: f64,
    },
    /// Zero with probability `zero_prob`, otherwise `value`.
    ZeroInflated {
        zero_prob: f64,
        value: f64,
    },
    Exponential {
        rate: f64,
    },
    /// `exp(N(mu, sigma^2))`.
    LogNormal {
        mu: f64,
        sigma: f64,
    },
    Gamma {
        shape: f64,
        scale: f64,
    },
    /// Finite table; weights need not be normalised.
    Discrete {
        values: Vec<f64>,
        weights: Vec<f64>,
    },
}

impl SizeLaw {
    pub fn family(&self) -> &'static str {
        match self {
            SizeLaw::PointMass { .. } => "point-mass",
            SizeLaw::ZeroInflated { .. } => "zero-inflated",
            SizeLaw::Exponential { .. } => "exponential",
            SizeLaw::LogNormal { .. } => "log-normal",
            SizeLaw::Gamma { .. } => "gamma",
            SizeLaw::Discrete { .. } => "discrete",
        }
    }

    pub fn validate(&self) -> Result<(), SizeError> {
        let family = self.family();
        let fail = |reason| Err(SizeError::Parameters { family, reason });
        let nonneg = |x: f64| x.is_finite() && x >= 0.0;
        match self {
            SizeLaw::PointMass { value } if !nonneg(*value) => {
                fail("value must be finite and >= 0")
            }
            SizeLaw::ZeroInflated { zero_prob, value } => {
                if !(0.0..=1.0).contains(zero_prob) {
                    fail("zero_prob must lie in [0, 1]")
                } else if !(value.is_finite() && *value > 0.0) {
                    fail("value must be finite and > 0")
                } else {
                    Ok(())
                }
            }
            SizeLaw::Exponential { rate } if !(rate.is_finite() && *rate > 0.0) => {
                fail("rate must be > 0")
            }
            SizeLaw::LogNormal { mu, sigma } if !(mu.is_finite() && nonneg(*sigma)) => {
                fail("mu must be finite and sigma >= 0")
            }
            SizeLaw::Gamma { shape, scale }
                if !(shape.is_finite() && scale.is_finite() && *shape > 0.0 && *scale > 0.0) =>
            {
                fail("shape and scale must be > 0")
            }
            SizeLaw::Discrete { values, weights } => {
                if values.is_empty() || values.len() != weights.len() {
                    fail("values and weights must be non-empty and of equal length")
                } else if !values.iter().all(|&v| nonneg(v)) {
                    fail("values must be finite and >= 0")
                } else if !weights.iter().all(|&w| nonneg(w)) || weights.iter().sum::<f64>() <= 0.0
                {
                    fail("weights must be >= 0 with a positive total")
                } else {
                    Ok(())
                }
            }
            _ => Ok(()),
        }
    }

    pub fn mean(&self) -> f64 {
        match self {
            SizeLaw::PointMass { value } => *value,
            SizeLaw::ZeroInflated { zero_prob, value } => (1.0 - zero_prob) * value,
            SizeLaw::Exponential { rate } => 1.0 / rate,
            SizeLaw::LogNormal { mu, sigma } => (mu + 0.5 * sigma * sigma).exp(),
            SizeLaw::Gamma { shape, scale } => shape * scale,
            SizeLaw::Discrete { values, weights } => {
                let total: f64 = weights.iter().sum();
                values.iter().zip(weights).map(|(v, w)| v * w).sum::<f64>() / total
            }
        }
    }

    pub fn variance(&self) -> f64 {
        match self {
            SizeLaw::PointMass { .. } => 0.0,
            SizeLaw::ZeroInflated { zero_prob, value } => {
                zero_prob * (1.0 - zero_prob) * value * value
            }
            SizeLaw::Exponential { rate } => 1.0 / (rate * rate),
            SizeLaw::LogNormal { mu, sigma } => {
                let s2 = sigma * sigma;
                s2.exp_m1() * (2.0 * mu + s2).exp()
            }
            SizeLaw::Gamma { shape, scale } => shape * scale * scale,
            SizeLaw::Discrete { values, weights } => {
                let total: f64 = weights.iter().sum();
                let mean = self.mean();
                values
                    .iter()
                    .zip(weights)
                    .map(|(v, w)| w * (v - mean) * (v - mean))
                    .sum::<f64>()
                    / total
            }
        }
    }

    /// `P{Y = 0}`.
    pub fn zero_mass(&self) -> f64 {
        match self {
            SizeLaw::PointMass { value } => (*value == 0.0) as u8 as f64,
            SizeLaw::ZeroInflated { zero_prob, .. } => *zero_prob,
            SizeLaw::Exponential { .. } | SizeLaw::LogNormal { .. } | SizeLaw::Gamma { .. } => 0.0,
            SizeLaw::Discrete { values, weights } => {
                let total: f64 = weights.iter().sum();
                values
                    .iter()
                    .zip(weights)
                    .filter(|(v, _)| **v == 0.0)
                    .map(|(_, w)| w)
                    .sum::<f64>()
                    / total
            }
        }
    }

    /// All supported families have a finite third absolute moment.
    pub fn has_finite_third_moment(&self) -> bool {
        true
    }

    /// The same law conditioned on `Y > 0`.
    pub fn conditioned_positive(&self) -> Result<SizeLaw, SizeError> {
        match self {
            SizeLaw::PointMass { value } if *value == 0.0 => {
                Err(SizeError::FirstNotPositive(self.family()))
            }
            SizeLaw::ZeroInflated { zero_prob, value } => {
                if *zero_prob >= 1.0 {
                    Err(SizeError::FirstNotPositive(self.family()))
                } else {
                    Ok(SizeLaw::PointMass { value: *value })
                }
            }
            SizeLaw::Discrete { values, weights } => {
                let (values, weights): (Vec<f64>, Vec<f64>) = values
                    .iter()
                    .zip(weights)
                    .filter(|(v, w)| **v > 0.0 && **w > 0.0)
                    .map(|(v, w)| (*v, *w))
                    .unzip();
                if values.is_empty() {
                    Err(SizeError::FirstNotPositive(self.family()))
                } else {
                    Ok(SizeLaw::Discrete { values, weights })
                }
            }
            other => Ok(other.clone()),
        }
    }

    fn is_positive(&self) -> bool {
        match self {
            SizeLaw::Discrete { values, weights } => values
                .iter()
                .zip(weights)
                .all(|(v, w)| *v > 0.0 || *w == 0.0),
            other => other.zero_mass() == 0.0,
        }
    }

    pub fn sampler(&self) -> Result<SizeSampler, SizeError> {
        self.validate()?;
        let bad = |reason| SizeError::Parameters {
            family: self.family(),
            reason,
        };
        Ok(match self {
            SizeLaw::PointMass { value } => SizeSampler::Constant(*value),
            SizeLaw::ZeroInflated { zero_prob, value } => SizeSampler::ZeroInflated {
                zero_prob: *zero_prob,
                value: *value,
            },
            SizeLaw::Exponential { rate } => {
                SizeSampler::Exponential(Exp::new(*rate).map_err(|_| bad("rate"))?)
            }
            SizeLaw::LogNormal { mu, sigma } => {
                SizeSampler::LogNormal(LogNormal::new(*mu, *sigma).map_err(|_| bad("mu/sigma"))?)
            }
            SizeLaw::Gamma { shape, scale } => {
                SizeSampler::Gamma(Gamma::new(*shape, *scale).map_err(|_| bad("shape/scale"))?)
            }
            SizeLaw::Discrete { values, weights } => {
                let total: f64 = weights.iter().sum();
                let mut acc = 0.0;
                let cumulative = weights
                    .iter()
                    .map(|w| {
                        acc += w / total;
                        acc
                    })
                    .collect();
                SizeSampler::Discrete {
                    values: values.clone(),
                    cumulative,
                }
            }
        })
    }
}

/// Prepared sampler for a [`SizeLaw`].
///
/// Point masses consume no random draws; zero-inflated and discrete laws
/// consume exactly one.
#[derive(Debug, Clone)]
pub enum SizeSampler {
    Constant(f64),
    ZeroInflated {
        zero_prob: f64,
        value: f64,
    },
    Exponential(Exp<f64>),
    LogNormal(LogNormal<f64>),
    Gamma(Gamma<f64>),
    Discrete {
        values: Vec<f64>,
        cumulative: Vec<f64>,
    },
}

impl SizeSampler {
    #[inline]
    pub fn sample<R: RngCore + ?Sized>(&self, rng: &mut R) -> f64 {
        match self {
            SizeSampler::Constant(v) => *v,
            SizeSampler::ZeroInflated { zero_prob, value } => {
                if unit_f64(rng) < *zero_prob {
                    0.0
                } else {
                    *value
                }
            }
            SizeSampler::Exponential(d) => d.sample(rng),
            SizeSampler::LogNormal(d) => d.sample(rng),
            SizeSampler::Gamma(d) => d.sample(rng),
            SizeSampler::Discrete { values, cumulative } => {
                let u = unit_f64(rng);
                let i = cumulative
                    .partition_point(|&c| c <= u)
                    .min(values.len() - 1);
                values[i]
            }
        }
    }
}

/// Laws of `Y_1` and of the iid sizes `Y_n`, `n >= 2`.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct StepSizeModel {
    pub first: SizeLaw,
    pub later: SizeLaw,
}

impl StepSizeModel {
    pub fn new(first: SizeLaw, later: SizeLaw) -> Result<Self, SizeError> {
        first.validate()?;
        later.validate()?;
        if !first.is_positive() {
            return Err(SizeError::FirstNotPositive(first.family()));
        }
        Ok(StepSizeModel { first, later })
    }

    /// `Y_1` follows the later law conditioned on positivity.
    pub fn from_later(later: SizeLaw) -> Result<Self, SizeError> {
        later.validate()?;
        let first = later.conditioned_positive()?;
        Self::new(first, later)
    }

    pub fn constant(value: f64) -> Result<Self, SizeError> {
        Self::from_later(SizeLaw::PointMass { value })
    }

    pub fn validate(&self) -> Result<(), SizeError> {
        Self::new(self.first.clone(), self.later.clone()).map(|_| ())
    }

    /// `mu`
    pub fn mean(&self) -> f64 {
        self.later.mean()
    }

    /// `eta^2`
    pub fn variance(&self) -> f64 {
        self.later.variance()
    }

    /// `b = P{Y_n = 0}`, `n >= 2`.
    pub fn zero_mass(&self) -> f64 {
        self.later.zero_mass()
    }

    /// `mu_1`
    pub fn first_mean(&self) -> f64 {
        self.first.mean()
    }

    /// `eta_1^2`
    pub fn first_variance(&self) -> f64 {
        self.first.variance()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seed_stream;
    use alloc::vec;

    fn sample_moments(law: &SizeLaw, n: usize) -> (f64, f64, f64) {
        let s = law.sampler().unwrap();
        let mut rng = seed_stream(5, 0);
        let xs: Vec<f64> = (0..n).map(|_| s.sample(&mut rng)).collect();
        let mean = xs.iter().sum::<f64>() / n as f64;
        let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1) as f64;
        let zeros = xs.iter().filter(|&&x| x == 0.0).count() as f64 / n as f64;
        assert!(xs.iter().all(|&x| x >= 0.0));
        (mean, var, zeros)
    }

    #[test]
    fn declared_moments_match_samples() {
        let laws = [
            SizeLaw::PointMass { value: 2.5 },
            SizeLaw::ZeroInflated {
                zero_prob: 0.3,
                value: 2.0,
            },
            SizeLaw::Exponential { rate: 2.0 },
            SizeLaw::LogNormal {
                mu: 0.1,
                sigma: 0.4,
            },
            SizeLaw::Gamma {
                shape: 2.0,
                scale: 0.5,
            },
            SizeLaw::Discrete {
                values: vec![0.0, 1.0, 3.0],
                weights: vec![1.0, 2.0, 1.0],
            },
        ];
        let n = 200_000;
        for law in &laws {
            let (m, v, z) = sample_moments(law, n);
            let se_mean = (law.variance() / n as f64).sqrt();
            assert!(
                (m - law.mean()).abs() <= 5.0 * se_mean + 1e-12,
                "{law:?}: mean {m}"
            );
            // loose check on the variance, relative 5%
            assert!(
                (v - law.variance()).abs() <= 0.05 * law.variance() + 1e-12,
                "{law:?}: var {v}"
            );
            let b = law.zero_mass();
            assert!((z - b).abs() <= 5.0 * (b * (1.0 - b) / n as f64).sqrt() + 1e-12);
        }
    }

    #[test]
    fn bernoulli_moments() {
        let law = SizeLaw::ZeroInflated {
            zero_prob: 0.5,
            value: 1.0,
        };
        assert_eq!(law.mean(), 0.5);
        assert_eq!(law.variance(), 0.25);
        assert_eq!(law.zero_mass(), 0.5);
    }

    #[test]
    fn first_law_defaults_to_positive_part() {
        let m = StepSizeModel::from_later(SizeLaw::ZeroInflated {
            zero_prob: 0.5,
            value: 1.0,
        })
        .unwrap();
        assert_eq!(m.first, SizeLaw::PointMass { value: 1.0 });
        assert_eq!(m.first_mean(), 1.0);
        assert_eq!(m.first_variance(), 0.0);
        let d = SizeLaw::Discrete {
            values: vec![0.0, 2.0],
            weights: vec![3.0, 1.0],
        };
        let m = StepSizeModel::from_later(d).unwrap();
        assert_eq!(m.first_mean(), 2.0);
        assert!(StepSizeModel::constant(0.0).is_err());
        assert!(StepSizeModel::new(
            SizeLaw::ZeroInflated {
                zero_prob: 0.2,
                value: 1.0
            },
            SizeLaw::PointMass { value: 1.0 }
        )
        .is_err());
    }

    #[test]
    fn invalid_parameters_rejected() {
        assert!(SizeLaw::Exponential { rate: 0.0 }.validate().is_err());
        assert!(SizeLaw::ZeroInflated {
            zero_prob: 1.5,
            value: 1.0
        }
        .validate()
        .is_err());
        assert!(SizeLaw::PointMass { value: -1.0 }.validate().is_err());
        assert!(SizeLaw::Discrete {
            values: vec![1.0],
            weights: vec![]
        }
        .validate()
        .is_err());
        assert!(SizeLaw::Gamma {
            shape: 1.0,
            scale: -1.0
        }
        .sampler()
        .is_err());
    }
}
