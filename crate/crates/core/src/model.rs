//! Walk parameters, regime classification and the step-action algebra.
//!
//! A step of the walk is either the zero vector or a signed unit vector
//! `±e_i`. The random matrix applied to a remembered step is one of `±I_d`,
//! `±J_d^m` (with `J_d` the cyclic permutation matrix sending `e_i` to
//! `e_{i-1}` and `e_1` to `e_d`) or the null matrix. Matrices are never
//! materialised: an action is a sign plus a cyclic shift.

use core::fmt;
use core::ops::Mul;

use rand::RngCore;

use crate::rng::unit_f64;

/// Absolute tolerance used for the simplex constraint and for detecting
/// critical parameter values.
pub const CRITICAL_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ModelError {
    #[error("dimension must be at least 1, got {0}")]
    Dimension(usize),
    #[error("{name} must be a finite non-negative number, got {value}")]
    NegativeProbability { name: &'static str, value: f64 },
    #[error("p + r = {0} exceeds 1: no valid q exists")]
    Simplex(f64),
    #[error("the random-step-size walk has no rest action, but r = {0}")]
    RestInRandomSteps(f64),
    #[error("axis {axis} is outside 1..={dim}")]
    AxisOutOfRange { axis: u32, dim: usize },
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct WalkParams {
    d: usize,
    p: f64,
    q: f64,
    r: f64,
}

/// Validates `(d, p, r)` and derives `q = (1 - p - r) / (2d - 1)`.
pub fn validate_params(d: usize, p: f64, r: f64) -> Result<WalkParams, ModelError> {
    if d < 1 {
        return Err(ModelError::Dimension(d));
    }
    for (name, value) in [("p", p), ("r", r)] {
        if !value.is_finite() || value < 0.0 {
            return Err(ModelError::NegativeProbability { name, value });
        }
    }
    let total = p + r;
    if total > 1.0 + CRITICAL_TOL {
        return Err(ModelError::Simplex(total));
    }
    let q = ((1.0 - total) / (2 * d - 1) as f64).max(0.0);
    Ok(WalkParams { d, p, q, r })
}

impl WalkParams {
    pub fn new(d: usize, p: f64, r: f64) -> Result<Self, ModelError> {
        validate_params(d, p, r)
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn q(&self) -> f64 {
        self.q
    }

    pub fn r(&self) -> f64 {
        self.r
    }

    /// Memory exponent `(2dp - 1) / (2d - 1)`.
    pub fn gamma(&self) -> f64 {
        let d = self.d as f64;
        (2.0 * d * self.p - 1.0) / (2.0 * d - 1.0)
    }

    /// Critical memory parameter `(2d + 1) / 4d` of the random-step-size walk.
    pub fn p_critical(&self) -> f64 {
        p_critical(self.d)
    }
}

pub fn p_critical(d: usize) -> f64 {
    let d = d as f64;
    (2.0 * d + 1.0) / (4.0 * d)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "kebab-case"))]
pub enum Variant {
    Stops,
    RandomSteps,
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Variant::Stops => "stops",
            Variant::RandomSteps => "random-steps",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "kebab-case"))]
pub enum Regime {
    SubCritical,
    Critical,
    SuperCritical,
}

impl fmt::Display for Regime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Regime::SubCritical => "sub-critical",
            Regime::Critical => "critical",
            Regime::SuperCritical => "super-critical",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct RegimeLabel {
    pub variant: Variant,
    pub regime: Regime,
}

/// Stops walk: split on `r` against 1/2 (large `r` is sub-critical).
/// Random-step-size walk: split on `p` against `(2d + 1) / 4d`.
pub fn classify_regime(params: &WalkParams, variant: Variant) -> Result<RegimeLabel, ModelError> {
    let regime = match variant {
        Variant::Stops => {
            let gap = params.r - 0.5;
            if gap.abs() <= CRITICAL_TOL {
                Regime::Critical
            } else if gap > 0.0 {
                Regime::SubCritical
            } else {
                Regime::SuperCritical
            }
        }
        Variant::RandomSteps => {
            if params.r != 0.0 {
                return Err(ModelError::RestInRandomSteps(params.r));
            }
            let gap = params.p - params.p_critical();
            if gap.abs() <= CRITICAL_TOL {
                Regime::Critical
            } else if gap < 0.0 {
                Regime::SubCritical
            } else {
                Regime::SuperCritical
            }
        }
    };
    Ok(RegimeLabel { variant, regime })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum Sign {
    Minus,
    Plus,
}

impl Sign {
    pub fn value(self) -> i64 {
        match self {
            Sign::Minus => -1,
            Sign::Plus => 1,
        }
    }
}

impl Mul for Sign {
    type Output = Sign;

    fn mul(self, rhs: Sign) -> Sign {
        if self == rhs {
            Sign::Plus
        } else {
            Sign::Minus
        }
    }
}

/// `sign * J_d^shift`, or the null matrix.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum StepAction {
    Move { sign: Sign, shift: u32 },
    Rest,
}

impl StepAction {
    pub const IDENTITY: StepAction = StepAction::Move {
        sign: Sign::Plus,
        shift: 0,
    };

    /// The `j`-th of the `2d - 1` non-identity moves, in the order
    /// `-I, +J, -J, +J^2, -J^2, ..., +J^{d-1}, -J^{d-1}`.
    pub fn alternative(j: usize) -> StepAction {
        if j == 0 {
            return StepAction::Move {
                sign: Sign::Minus,
                shift: 0,
            };
        }
        let shift = j.div_ceil(2) as u32;
        let sign = if j % 2 == 1 { Sign::Plus } else { Sign::Minus };
        StepAction::Move { sign, shift }
    }

    /// Action equivalent to applying `self` first and then `next`.
    pub fn then(self, next: StepAction, dim: usize) -> StepAction {
        match (self, next) {
            (
                StepAction::Move {
                    sign: s1,
                    shift: m1,
                },
                StepAction::Move {
                    sign: s2,
                    shift: m2,
                },
            ) => StepAction::Move {
                sign: s1 * s2,
                shift: (m1 + m2) % dim as u32,
            },
            _ => StepAction::Rest,
        }
    }
}

/// A step of the walk: `±e_axis` (axis is 1-based) or the zero vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum UnitStep {
    Axis { axis: u32, sign: Sign },
    Zero,
}

impl UnitStep {
    pub fn squared_norm(self) -> u64 {
        match self {
            UnitStep::Axis { .. } => 1,
            UnitStep::Zero => 0,
        }
    }

    /// Packs the step as `sign * axis`, with 0 for the zero step.
    pub fn encode(self) -> i32 {
        match self {
            UnitStep::Axis { axis, sign } => sign.value() as i32 * axis as i32,
            UnitStep::Zero => 0,
        }
    }

    pub fn decode(code: i32) -> UnitStep {
        match code {
            0 => UnitStep::Zero,
            c if c > 0 => UnitStep::Axis {
                axis: c as u32,
                sign: Sign::Plus,
            },
            c => UnitStep::Axis {
                axis: c.unsigned_abs(),
                sign: Sign::Minus,
            },
        }
    }

    /// Uniform draw over the `2d` signed axes.
    pub fn sample_axis<R: RngCore + ?Sized>(dim: usize, rng: &mut R) -> UnitStep {
        let j = crate::rng::below(rng, 2 * dim as u64) as u32;
        let sign = if j.is_multiple_of(2) {
            Sign::Plus
        } else {
            Sign::Minus
        };
        UnitStep::Axis {
            axis: j / 2 + 1,
            sign,
        }
    }
}

/// Draws the random matrix applied to the remembered step, using one
/// uniform variate.
pub fn sample_action<R: RngCore + ?Sized>(params: &WalkParams, rng: &mut R) -> StepAction {
    let u = unit_f64(rng);
    if u < params.p {
        return StepAction::IDENTITY;
    }
    if params.r > 0.0 && u >= 1.0 - params.r {
        return StepAction::Rest;
    }
    if params.q > 0.0 {
        let j = ((u - params.p) / params.q) as usize;
        return StepAction::alternative(j.min(2 * params.d - 2));
    }
    // Only reachable through rounding at the p/r boundary when q = 0.
    if params.r > 0.0 {
        StepAction::Rest
    } else {
        StepAction::IDENTITY
    }
}

/// Applies `sign * J_d^shift` (or the null matrix) to a step.
pub fn apply_action(
    action: StepAction,
    step: UnitStep,
    dim: usize,
) -> Result<UnitStep, ModelError> {
    match (action, step) {
        (_, UnitStep::Zero) => Ok(UnitStep::Zero),
        (StepAction::Rest, UnitStep::Axis { axis, .. }) => {
            check_axis(axis, dim)?;
            Ok(UnitStep::Zero)
        }
        (StepAction::Move { sign: s, shift }, UnitStep::Axis { axis, sign }) => {
            check_axis(axis, dim)?;
            let d = dim as u64;
            let target = (axis as u64 - 1 + d - shift as u64 % d) % d + 1;
            Ok(UnitStep::Axis {
                axis: target as u32,
                sign: s * sign,
            })
        }
    }
}

fn check_axis(axis: u32, dim: usize) -> Result<(), ModelError> {
    if axis == 0 || axis as usize > dim {
        Err(ModelError::AxisOutOfRange { axis, dim })
    } else {
        Ok(())
    }
}
