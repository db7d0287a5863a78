//! Deterministic quantities behind the limit theorems: normalizers,
//! expected move counts, series limits, regime constants and the martingale
//! transforms of simulated traces.

use alloc::vec;
use alloc::vec::Vec;

#[allow(unused_imports)]
use num_traits::Float;

use crate::model::{p_critical, Variant};
use crate::sizes::StepSizeModel;
use crate::special::{ln_gamma, ln_gamma_ratio, SeriesError, SeriesValue};
use crate::stats::Neumaier;
use crate::walk::WalkTrace;

pub use crate::special::hyp3f2_unit;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum AnalyticsError {
    #[error("{name} = {value} is outside its domain {domain}")]
    Domain {
        name: &'static str,
        value: f64,
        domain: &'static str,
    },
    #[error(transparent)]
    Series(#[from] SeriesError),
    #[error("{kind} series cannot be built from a {variant} trace")]
    KindMismatch {
        kind: &'static str,
        variant: Variant,
    },
    #[error("{0} needs dense checkpoints 1..={1}")]
    SparseCheckpoints(&'static str, usize),
    #[error("the LIL bound for the step-size walk needs p < (2d+1)/4d = {p_c}, got p = {p}")]
    AtOrAboveCritical { p: f64, p_c: f64 },
    #[error("no LIL normalizer for the stops walk with r = {0} < 1/2")]
    LilRegime(f64),
}

fn check_unit(name: &'static str, value: f64) -> Result<(), AnalyticsError> {
    if (0.0..=1.0).contains(&value) {
        Ok(())
    } else {
        Err(AnalyticsError::Domain {
            name,
            value,
            domain: "[0, 1]",
        })
    }
}

fn check_length(n: usize) -> Result<(), AnalyticsError> {
    if n >= 1 {
        Ok(())
    } else {
        Err(AnalyticsError::Domain {
            name: "n",
            value: 0.0,
            domain: ">= 1",
        })
    }
}

/// Products above this index are accumulated as compensated log sums.
const LOG_SPACE_FROM: usize = 10_000;

/// Yields `a_1, a_2, ...` with `a_1 = 1` and `a_{k+1} = a_k (1 + (1-r)/k)`.
#[derive(Debug, Clone)]
struct ACoefficients {
    growth: f64,
    k: usize,
    value: f64,
    log: Neumaier,
}

impl ACoefficients {
    fn new(r: f64) -> Self {
        ACoefficients {
            growth: 1.0 - r,
            k: 0,
            value: 1.0,
            log: Neumaier::default(),
        }
    }
}

impl Iterator for ACoefficients {
    type Item = f64;

    fn next(&mut self) -> Option<f64> {
        if self.k > 0 {
            let factor = self.growth / self.k as f64;
            if self.k < LOG_SPACE_FROM {
                self.value *= 1.0 + factor;
            } else {
                if self.k == LOG_SPACE_FROM {
                    self.log.add(self.value.ln());
                }
                self.log.add(factor.ln_1p());
                self.value = self.log.sum().exp();
            }
        }
        self.k += 1;
        Some(self.value)
    }
}

/// `a_1, ..., a_n`.
pub fn a_coefficients(r: f64, n: usize) -> Result<Vec<f64>, AnalyticsError> {
    check_unit("r", r)?;
    check_length(n)?;
    Ok(ACoefficients::new(r).take(n).collect())
}

/// `E(Z_n^*) = G(n + 1 - r) / (G(2 - r) G(n))`, which equals `a_n`.
pub fn expected_moves(r: f64, n: usize) -> Result<f64, AnalyticsError> {
    check_unit("r", r)?;
    check_length(n)?;
    if n <= LOG_SPACE_FROM {
        return Ok(ACoefficients::new(r).nth(n - 1).unwrap_or(1.0));
    }
    Ok((ln_gamma_ratio(n as f64, 1.0 - r) - ln_gamma(2.0 - r)).exp())
}

/// `u_{n-1} = sum_{k=1}^{n} 1 / a_k^2`.
pub fn u_partial(r: f64, n: usize) -> Result<f64, AnalyticsError> {
    check_unit("r", r)?;
    check_length(n)?;
    let mut sum = Neumaier::default();
    for a in ACoefficients::new(r).take(n) {
        sum.add(1.0 / (a * a));
    }
    Ok(sum.sum())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "kebab-case"))]
pub enum GrowthKind {
    /// `u_{n-1} / n^(2r-1)` converges (`1/2 < r <= 1`).
    Power,
    /// `u_{n-1} / log n` converges (`r = 1/2`).
    Log,
    /// `u_{n-1}` converges (`0 <= r < 1/2`).
    Finite,
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ULimit {
    pub kind: GrowthKind,
    /// Exponent `2r - 1` of the power normalizer (0 otherwise).
    pub exponent: f64,
    pub constant: f64,
    pub error_bound: f64,
}

impl ULimit {
    pub fn normalizer(&self, n: f64) -> f64 {
        match self.kind {
            GrowthKind::Power => n.powf(self.exponent),
            GrowthKind::Log => n.ln(),
            GrowthKind::Finite => 1.0,
        }
    }

    pub fn describe_normalizer(&self) -> &'static str {
        match self.kind {
            GrowthKind::Power => "n^(2r-1)",
            GrowthKind::Log => "log n",
            GrowthKind::Finite => "1",
        }
    }
}

/// Limit of `u_{n-1}` under its regime normalizer.
pub fn u_limit(r: f64) -> Result<ULimit, AnalyticsError> {
    check_unit("r", r)?;
    let gap = r - 0.5;
    Ok(if gap.abs() <= crate::model::CRITICAL_TOL {
        ULimit {
            kind: GrowthKind::Log,
            exponent: 0.0,
            constant: core::f64::consts::FRAC_PI_4,
            error_bound: 0.0,
        }
    } else if gap > 0.0 {
        let g = ln_gamma(2.0 - r).exp();
        ULimit {
            kind: GrowthKind::Power,
            exponent: 2.0 * r - 1.0,
            constant: g * g / (2.0 * r - 1.0),
            error_bound: 0.0,
        }
    } else {
        let SeriesValue {
            value, error_bound, ..
        } = hyp3f2_unit(r)?;
        ULimit {
            kind: GrowthKind::Finite,
            exponent: 0.0,
            constant: value,
            error_bound,
        }
    })
}

/// `E(M^m) = m! G(2-r)^m / G(m - m r + 1)` for the a.s. limit `M` of
/// `Z_n^* / a_n`.
pub fn limit_moment(r: f64, m: u32) -> Result<f64, AnalyticsError> {
    if !(0.0..0.5).contains(&r) {
        return Err(AnalyticsError::Domain {
            name: "r",
            value: r,
            domain: "[0, 1/2)",
        });
    }
    if m == 0 {
        return Err(AnalyticsError::Domain {
            name: "m",
            value: 0.0,
            domain: ">= 1",
        });
    }
    let m = m as f64;
    Ok((ln_gamma(m + 1.0) + m * ln_gamma(2.0 - r) - ln_gamma(m - m * r + 1.0)).exp())
}

/// Constants the limit theorems are stated with.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct RegimeConstants {
    pub gamma: f64,
    pub p_critical: f64,
    /// LIL bound for `||S_n||`, defined for `p < p_c` with a step model.
    pub lil_bound_steps: Option<f64>,
    /// LIL bound `1 / sqrt(2r - 1)` for `Z_n^*`, defined for `r > 1/2`.
    pub lil_bound_stops: Option<f64>,
    /// LIL bound `sqrt(b(1-b))` for the centered move count.
    pub lil_bound_moves: Option<f64>,
    /// Limit variance `b(1-b)` of the move-count CLT.
    pub clt_var_moves: Option<f64>,
    /// QSL limit `eta^2 / d` of the position martingale.
    pub qsl_limit_steps: Option<f64>,
}

pub fn regime_constants(
    d: usize,
    p: f64,
    sizes: Option<&StepSizeModel>,
    r: f64,
) -> Result<RegimeConstants, AnalyticsError> {
    if d == 0 {
        return Err(AnalyticsError::Domain {
            name: "d",
            value: 0.0,
            domain: ">= 1",
        });
    }
    check_unit("p", p)?;
    check_unit("r", r)?;
    let df = d as f64;
    let p_c = p_critical(d);
    let b = sizes.map(StepSizeModel::zero_mass);
    Ok(RegimeConstants {
        gamma: (2.0 * df * p - 1.0) / (2.0 * df - 1.0),
        p_critical: p_c,
        lil_bound_steps: sizes
            .and_then(|s| lil_bound_steps(d, p, s.mean(), s.variance().sqrt()).ok()),
        lil_bound_stops: (r > 0.5 + crate::model::CRITICAL_TOL)
            .then(|| 1.0 / (2.0 * r - 1.0).sqrt()),
        lil_bound_moves: b.map(|b| (b * (1.0 - b)).sqrt()),
        clt_var_moves: b.map(|b| b * (1.0 - b)),
        qsl_limit_steps: sizes.map(|s| s.variance() / df),
    })
}

/// `eta sqrt(d) + sqrt(mu^2 (2d - 1) / (1 + 2d(1 - 2p)))`, for `p < p_c`.
pub fn lil_bound_steps(d: usize, p: f64, mu: f64, eta: f64) -> Result<f64, AnalyticsError> {
    let p_c = p_critical(d);
    if p >= p_c - crate::model::CRITICAL_TOL {
        return Err(AnalyticsError::AtOrAboveCritical { p, p_c });
    }
    let df = d as f64;
    Ok(eta * df.sqrt() + (mu * mu * (2.0 * df - 1.0) / (1.0 + 2.0 * df * (1.0 - 2.0 * p))).sqrt())
}

/// `tr <M>_n = eta_1^2 + (mu - mu_1)^2 + (n - 1) eta^2`.
pub fn trace_variation(sizes: &StepSizeModel, n: usize) -> Result<f64, AnalyticsError> {
    trace_variation_from(
        sizes.first_mean(),
        sizes.first_variance().sqrt(),
        sizes.mean(),
        sizes.variance().sqrt(),
        n,
    )
}

/// [`trace_variation`] from the means and standard deviations of `Y_1` and
/// `Y_n`, `n >= 2`.
pub fn trace_variation_from(
    mu1: f64,
    eta1: f64,
    mu: f64,
    eta: f64,
    n: usize,
) -> Result<f64, AnalyticsError> {
    check_length(n)?;
    for (name, value) in [("eta_1", eta1), ("eta", eta)] {
        if value.is_nan() || value < 0.0 {
            return Err(AnalyticsError::Domain {
                name,
                value,
                domain: ">= 0",
            });
        }
    }
    let shift = mu - mu1;
    Ok(eta1 * eta1 + shift * shift + (n - 1) as f64 * eta * eta)
}

/// Dense row-major square matrix.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SquareMatrix {
    pub dim: usize,
    pub data: Vec<f64>,
}

impl SquareMatrix {
    pub fn zeros(dim: usize) -> Self {
        SquareMatrix {
            dim,
            data: vec![0.0; dim * dim],
        }
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.dim + j]
    }

    pub fn trace(&self) -> f64 {
        (0..self.dim).map(|i| self.get(i, i)).sum()
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.dim).map(|i| self.get(i, i)).collect()
    }
}

/// `E(X_{n+1} X_{n+1}^t | F_n) = (gamma/n) Sigma_n + ((1 - gamma)/d) I_d`.
pub fn conditional_step_covariance(sigma_diag: &[f64], n: usize, d: usize, p: f64) -> SquareMatrix {
    debug_assert_eq!(sigma_diag.len(), d);
    let df = d as f64;
    let gamma = (2.0 * df * p - 1.0) / (2.0 * df - 1.0);
    let mut m = SquareMatrix::zeros(d);
    for (i, s) in sigma_diag.iter().enumerate() {
        m.data[i * d + i] = gamma / n as f64 * s + (1.0 - gamma) / df;
    }
    m
}

/// Which martingale to extract from a trace, with its parameter.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(tag = "kind", rename_all = "kebab-case"))]
pub enum MartingaleKind {
    /// `Z_n^* / a_n` (stops walk).
    Multiplicative { r: f64 },
    /// `Z_n^* - (n - 1)(1 - b)` (random-step-size walk).
    CenteredMoves { b: f64 },
    /// `S_n - mu W_n` (random-step-size walk).
    Position { mu: f64 },
}

impl MartingaleKind {
    pub fn name(&self) -> &'static str {
        match self {
            MartingaleKind::Multiplicative { .. } => "multiplicative-moves",
            MartingaleKind::CenteredMoves { .. } => "centered-moves",
            MartingaleKind::Position { .. } => "position",
        }
    }

    pub fn variant(&self) -> Variant {
        match self {
            MartingaleKind::Multiplicative { .. } => Variant::Stops,
            _ => Variant::RandomSteps,
        }
    }

    pub fn width(&self, d: usize) -> usize {
        match self {
            MartingaleKind::Position { .. } => d,
            _ => 1,
        }
    }
}

/// Martingale values at the checkpoints of one trace. Scalar series have
/// width 1; the position martingale has width `d`.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct MartingaleSeries {
    pub kind: MartingaleKind,
    pub checkpoints: Vec<usize>,
    pub width: usize,
    pub values: Vec<f64>,
}

impl MartingaleSeries {
    pub fn len(&self) -> usize {
        self.checkpoints.len()
    }

    pub fn is_empty(&self) -> bool {
        self.checkpoints.is_empty()
    }

    pub fn value(&self, i: usize) -> &[f64] {
        &self.values[i * self.width..(i + 1) * self.width]
    }
}

/// Evaluates one martingale from a single snapshot; `a_k` is only needed
/// for the multiplicative series.
pub(crate) fn martingale_value(
    kind: MartingaleKind,
    k: usize,
    moves: u64,
    w: &[i64],
    s: &[f64],
    a_k: f64,
    out: &mut Vec<f64>,
) {
    match kind {
        MartingaleKind::Multiplicative { .. } => out.push(moves as f64 / a_k),
        MartingaleKind::CenteredMoves { b } => out.push(moves as f64 - (k - 1) as f64 * (1.0 - b)),
        MartingaleKind::Position { mu } => {
            out.extend(s.iter().zip(w).map(|(s, &w)| s - mu * w as f64))
        }
    }
}

pub fn martingale_transform(
    trace: &WalkTrace,
    kind: MartingaleKind,
) -> Result<MartingaleSeries, AnalyticsError> {
    if kind.variant() != trace.variant {
        return Err(AnalyticsError::KindMismatch {
            kind: kind.name(),
            variant: trace.variant,
        });
    }
    let a = match kind {
        MartingaleKind::Multiplicative { r } => a_coefficients(r, trace.n)?,
        _ => Vec::new(),
    };
    let width = kind.width(trace.params.dim());
    let mut values = Vec::with_capacity(trace.snapshots.len() * width);
    for snap in &trace.snapshots {
        let a_k = a.get(snap.step - 1).copied().unwrap_or(1.0);
        martingale_value(
            kind,
            snap.step,
            snap.moves,
            &snap.position,
            &snap.position_real,
            a_k,
            &mut values,
        );
    }
    Ok(MartingaleSeries {
        kind,
        checkpoints: trace.checkpoints.as_slice().to_vec(),
        width,
        values,
    })
}

/// Quadratic strong law statistic: scalar for the centered move count,
/// `width x width` matrix for the position martingale.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum QslValue {
    Scalar(f64),
    Matrix(SquareMatrix),
}

impl QslValue {
    pub fn as_scalar(&self) -> Option<f64> {
        match self {
            QslValue::Scalar(x) => Some(*x),
            QslValue::Matrix(_) => None,
        }
    }
}

/// Streaming form of [`qsl_statistic`]: feed `k = 1, 2, ...` in order.
#[derive(Debug, Clone)]
pub struct QslAccumulator {
    width: usize,
    k: usize,
    sums: Vec<Neumaier>,
}

impl QslAccumulator {
    pub fn new(width: usize) -> Self {
        QslAccumulator {
            width,
            k: 0,
            sums: vec![Neumaier::default(); width * width],
        }
    }

    pub fn push(&mut self, value: &[f64]) {
        debug_assert_eq!(value.len(), self.width);
        self.k += 1;
        let weight = 1.0 / (self.k as f64 * (self.k + 1) as f64);
        for i in 0..self.width {
            for j in 0..self.width {
                self.sums[i * self.width + j].add(value[i] * value[j] * weight);
            }
        }
    }

    pub fn count(&self) -> usize {
        self.k
    }

    pub fn finish(&self) -> QslValue {
        let norm = ((self.k + 1) as f64).ln();
        if self.width == 1 {
            QslValue::Scalar(self.sums[0].sum() / norm)
        } else {
            QslValue::Matrix(SquareMatrix {
                dim: self.width,
                data: self.sums.iter().map(|s| s.sum() / norm).collect(),
            })
        }
    }
}

/// `(1 / log(n+1)) sum_{k<=n} V_k V_k^t / (k(k+1))` over the first `up_to`
/// checkpoints, which must be `1..=up_to`.
pub fn qsl_statistic(series: &MartingaleSeries, up_to: usize) -> Result<QslValue, AnalyticsError> {
    if let MartingaleKind::Multiplicative { .. } = series.kind {
        return Err(AnalyticsError::KindMismatch {
            kind: series.kind.name(),
            variant: Variant::Stops,
        });
    }
    let dense = up_to >= 1
        && series.checkpoints.len() >= up_to
        && series.checkpoints[..up_to]
            .iter()
            .enumerate()
            .all(|(i, &k)| k == i + 1);
    if !dense {
        return Err(AnalyticsError::SparseCheckpoints("qsl_statistic", up_to));
    }
    let mut acc = QslAccumulator::new(series.width);
    for i in 0..up_to {
        acc.push(series.value(i));
    }
    Ok(acc.finish())
}

/// Exact `E` of the scalar QSL statistic of the centered move count at
/// finite `n`, using `E N_k^2 = 1 + (k - 1) b (1 - b)`.
pub fn qsl_moves_expectation(b: f64, n: usize) -> Result<f64, AnalyticsError> {
    check_unit("b", b)?;
    check_length(n)?;
    let v = b * (1.0 - b);
    let nf = n as f64;
    let mut harmonic = Neumaier::default();
    for k in 1..=n {
        harmonic.add(1.0 / k as f64);
    }
    let sum = 1.0 - 1.0 / (nf + 1.0) + v * (harmonic.sum() + 2.0 / (nf + 1.0) - 2.0);
    Ok(sum / (nf + 1.0).ln())
}

/// Smallest `n` at which LIL normalizers are evaluated.
pub const LIL_MIN_N: usize = 10;
/// The innermost iterated logarithm must exceed this.
const LIL_MIN_INNER_LOG: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "kebab-case"))]
pub enum LilNormalizer {
    /// `sqrt(2 n log log n)`
    Iterated,
    /// `sqrt(2 n log n log log log n)`, stops walk at `r = 1/2`.
    CriticalStops,
}

impl LilNormalizer {
    /// `None` while `n < 10` or the innermost logarithm is at most 0.1.
    pub fn eval(self, n: usize) -> Option<f64> {
        if n < LIL_MIN_N {
            return None;
        }
        let x = n as f64;
        let ll = x.ln().ln();
        match self {
            LilNormalizer::Iterated => (ll > LIL_MIN_INNER_LOG).then(|| (2.0 * x * ll).sqrt()),
            LilNormalizer::CriticalStops => {
                let lll = ll.ln();
                (ll > 0.0 && lll > LIL_MIN_INNER_LOG).then(|| (2.0 * x * x.ln() * lll).sqrt())
            }
        }
    }
}

/// What a LIL statistic is computed for.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(tag = "target", rename_all = "kebab-case"))]
pub enum LilTarget {
    /// Raw move count `Z_n^*` of the stops walk, `r >= 1/2`.
    StopsMoves { r: f64 },
    /// Centered move count `|Z_n^* - (n-1)(1-b)|` of the step-size walk;
    /// values are passed already centered.
    CenteredMoves,
}

impl LilTarget {
    pub fn normalizer(self) -> Result<LilNormalizer, AnalyticsError> {
        match self {
            LilTarget::StopsMoves { r } => {
                let gap = r - 0.5;
                if gap.abs() <= crate::model::CRITICAL_TOL {
                    Ok(LilNormalizer::CriticalStops)
                } else if gap > 0.0 {
                    Ok(LilNormalizer::Iterated)
                } else {
                    Err(AnalyticsError::LilRegime(r))
                }
            }
            LilTarget::CenteredMoves => Ok(LilNormalizer::Iterated),
        }
    }
}

/// Normalized values and their running supremum.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct LilSeries {
    pub normalizer: LilNormalizer,
    pub steps: Vec<usize>,
    pub normalized: Vec<f64>,
    pub running_sup: Vec<f64>,
}

impl LilSeries {
    pub fn sup(&self) -> Option<f64> {
        self.running_sup.last().copied()
    }
}

/// Streaming running supremum of `|value| / normalizer(n)`.
#[derive(Debug, Clone, Copy)]
pub struct LilAccumulator {
    normalizer: LilNormalizer,
    sup: Option<f64>,
}

impl LilAccumulator {
    pub fn new(target: LilTarget) -> Result<Self, AnalyticsError> {
        Ok(LilAccumulator {
            normalizer: target.normalizer()?,
            sup: None,
        })
    }

    /// Returns the normalized value when `n` is in range.
    pub fn push(&mut self, n: usize, value: f64) -> Option<f64> {
        let norm = self.normalizer.eval(n)?;
        let v = value.abs() / norm;
        self.sup = Some(self.sup.map_or(v, |s| s.max(v)));
        Some(v)
    }

    pub fn sup(&self) -> Option<f64> {
        self.sup
    }
}

/// Normalizes `(n, value)` pairs with the regime-correct LIL normalizer and
/// tracks the running supremum. Pairs with `n` below the evaluation range
/// are skipped.
pub fn lil_statistic(
    samples: &[(usize, f64)],
    target: LilTarget,
) -> Result<LilSeries, AnalyticsError> {
    let mut acc = LilAccumulator::new(target)?;
    let mut out = LilSeries {
        normalizer: acc.normalizer,
        steps: Vec::new(),
        normalized: Vec::new(),
        running_sup: Vec::new(),
    };
    for &(n, value) in samples {
        if let Some(v) = acc.push(n, value) {
            out.steps.push(n);
            out.normalized.push(v);
            out.running_sup.push(acc.sup().unwrap_or(v));
        }
    }
    Ok(out)
}
