//! Reproducible ensembles and the statistical checks run against them.
//!
//! Replica `i` always reads stream `seed_stream(master_seed, i)`, and
//! aggregation runs over replica records in index order with pairwise
//! summation, so a summary depends only on the configuration. Executors
//! that run replicas concurrently call [`EnsemblePlan::run_replica`] and
//! hand the ordered records to [`EnsembleSummary::from_records`].

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

#[allow(unused_imports)]
use num_traits::Float;
use rand_distr::{Distribution, StandardNormal};

use crate::analytics::{
    a_coefficients, expected_moves, limit_moment, martingale_value, qsl_moves_expectation,
    AnalyticsError, LilAccumulator, LilTarget, MartingaleKind, QslAccumulator, QslValue,
    SquareMatrix,
};
use crate::model::{Variant, WalkParams};
use crate::rng::{seed_stream, unit_f64};
use crate::sizes::StepSizeModel;
use crate::stats::{ks_one_sample, normal_cdf, pairwise_sum, Moments};
use crate::walk::{Checkpoints, Snapshot, WalkError, Walker};

/// Largest `|z|` accepted by the z-tests.
pub const Z_LIMIT: f64 = 4.0;
/// Smallest KS p-value accepted.
pub const KS_ALPHA: f64 = 0.01;
/// Replicas below which the mean-moves test is inconclusive.
pub const MIN_REPLICAS_MEAN: usize = 100;
/// Replicas below which the drift test is inconclusive.
pub const MIN_REPLICAS_DRIFT: usize = 1_000;
/// Replicas below which the CLT test is inconclusive.
pub const MIN_REPLICAS_CLT: usize = 10_000;
/// Path length below which lattice effects dominate the CLT test.
pub const MIN_LENGTH_CLT: usize = 500;
/// Fraction of paths that must respect a LIL bound in a smoke test.
pub const LIL_SMOKE_FRACTION: f64 = 0.95;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum HarnessError {
    #[error("invalid ensemble configuration: {0}")]
    Config(String),
    #[error("replica {index}: {source}")]
    Replica { index: usize, source: WalkError },
    #[error(transparent)]
    Analytics(#[from] AnalyticsError),
    #[error("the ensemble does not carry {0}")]
    Missing(String),
    #[error("test precondition violated: {0}")]
    Precondition(String),
}

fn config_error<T>(msg: impl Into<String>) -> Result<T, HarnessError> {
    Err(HarnessError::Config(msg.into()))
}

/// A statistic accumulated over every step of each path, independent of the
/// checkpoint set.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(tag = "stat", rename_all = "kebab-case"))]
pub enum PathStatistic {
    Qsl { series: MartingaleKind },
    LilSup { target: LilTarget },
}

#[cfg(feature = "serde")]
fn default_parallelism() -> usize {
    1
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct EnsembleConfig {
    pub params: WalkParams,
    pub variant: Variant,
    /// Required for the random-step-size walk, absent for the stops walk.
    #[cfg_attr(feature = "serde", serde(default))]
    pub sizes: Option<StepSizeModel>,
    pub n: usize,
    pub replicas: usize,
    pub checkpoints: Checkpoints,
    pub master_seed: u64,
    /// Worker count. It cannot change any result, so it is left out of
    /// serialized summaries.
    #[cfg_attr(feature = "serde", serde(skip, default = "default_parallelism"))]
    pub parallelism: usize,
    #[cfg_attr(feature = "serde", serde(default))]
    pub series: Vec<MartingaleKind>,
    #[cfg_attr(feature = "serde", serde(default))]
    pub path_statistics: Vec<PathStatistic>,
}

impl EnsembleConfig {
    /// Stops ensemble with power-of-two checkpoints.
    pub fn stops(params: WalkParams, n: usize, replicas: usize, master_seed: u64) -> Self {
        EnsembleConfig {
            params,
            variant: Variant::Stops,
            sizes: None,
            n,
            replicas,
            checkpoints: Checkpoints::powers_of_two(n),
            master_seed,
            parallelism: 1,
            series: Vec::new(),
            path_statistics: Vec::new(),
        }
    }

    /// Random-step-size ensemble with power-of-two checkpoints.
    pub fn random_steps(
        params: WalkParams,
        sizes: StepSizeModel,
        n: usize,
        replicas: usize,
        master_seed: u64,
    ) -> Self {
        EnsembleConfig {
            variant: Variant::RandomSteps,
            sizes: Some(sizes),
            ..Self::stops(params, n, replicas, master_seed)
        }
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        if self.n == 0 {
            return config_error("n must be at least 1");
        }
        if self.replicas == 0 {
            return config_error("replicas must be at least 1");
        }
        if self.parallelism == 0 {
            return config_error("parallelism must be at least 1");
        }
        if self.checkpoints.is_empty() {
            return config_error("at least one checkpoint is required");
        }
        if let Some(k) = self.checkpoints.last().filter(|&k| k > self.n) {
            return config_error(format!("checkpoint {k} exceeds n = {}", self.n));
        }
        if self.checkpoints.as_slice()[0] == 0 {
            return config_error("checkpoints start at 1");
        }
        match (self.variant, &self.sizes) {
            (Variant::Stops, Some(_)) => {
                return config_error("the stops walk takes no step-size model")
            }
            (Variant::RandomSteps, None) => {
                return config_error("the random-step-size walk needs a step-size model")
            }
            (Variant::RandomSteps, Some(s)) => {
                s.validate()
                    .map_err(|e| HarnessError::Config(format!("{e}")))?;
                if self.params.r() != 0.0 {
                    return config_error(format!(
                        "the random-step-size walk needs r = 0, got {}",
                        self.params.r()
                    ));
                }
            }
            (Variant::Stops, None) => {}
        }
        for kind in &self.series {
            if kind.variant() != self.variant {
                return config_error(format!(
                    "{} series needs the {} walk",
                    kind.name(),
                    kind.variant()
                ));
            }
        }
        for stat in &self.path_statistics {
            match stat {
                PathStatistic::Qsl { series } => {
                    if matches!(series, MartingaleKind::Multiplicative { .. })
                        || series.variant() != self.variant
                    {
                        return config_error(format!(
                            "no QSL statistic for the {} series here",
                            series.name()
                        ));
                    }
                }
                PathStatistic::LilSup { target } => {
                    target.normalizer()?;
                    let needed = match target {
                        LilTarget::StopsMoves { .. } => Variant::Stops,
                        LilTarget::CenteredMoves => Variant::RandomSteps,
                    };
                    if needed != self.variant {
                        return config_error(format!("LIL target needs the {needed} walk"));
                    }
                }
            }
        }
        Ok(())
    }

    fn zero_mass(&self) -> f64 {
        self.sizes.as_ref().map_or(0.0, StepSizeModel::zero_mass)
    }
}

/// Everything one replica contributes to a summary.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ReplicaRecord {
    pub index: usize,
    pub snapshots: Vec<Snapshot>,
    /// One flat `checkpoints x width` array per configured series.
    pub series: Vec<Vec<f64>>,
    /// One value per configured path statistic: the QSL statistic entries,
    /// or the LIL running supremum (empty if the path never reached the
    /// normalizer's range).
    pub path_values: Vec<Vec<f64>>,
}

impl ReplicaRecord {
    pub fn last(&self) -> &Snapshot {
        self.snapshots
            .last()
            .expect("records hold at least one snapshot")
    }
}

/// Validated configuration plus the deterministic tables every replica
/// shares.
#[derive(Debug, Clone)]
pub struct EnsemblePlan {
    config: EnsembleConfig,
    /// `a_k` at each checkpoint, present when a multiplicative series is
    /// requested.
    a_at_checkpoints: Option<Vec<f64>>,
}

impl EnsemblePlan {
    pub fn new(config: EnsembleConfig) -> Result<Self, HarnessError> {
        config.validate()?;
        let r = config.series.iter().find_map(|k| match k {
            MartingaleKind::Multiplicative { r } => Some(*r),
            _ => None,
        });
        let a_at_checkpoints = match r {
            Some(r) => {
                let a = a_coefficients(r, config.n)?;
                Some(
                    config
                        .checkpoints
                        .as_slice()
                        .iter()
                        .map(|&k| a[k - 1])
                        .collect(),
                )
            }
            None => None,
        };
        Ok(EnsemblePlan {
            config,
            a_at_checkpoints,
        })
    }

    pub fn config(&self) -> &EnsembleConfig {
        &self.config
    }

    /// Runs replica `index` from its own stream.
    pub fn run_replica(&self, index: usize) -> Result<ReplicaRecord, HarnessError> {
        let cfg = &self.config;
        let wrap = |source: WalkError| HarnessError::Replica { index, source };
        let mut rng = seed_stream(cfg.master_seed, index as u64);
        let mut walker = match &cfg.sizes {
            None => Walker::stops(cfg.params),
            Some(s) => Walker::random_steps(cfg.params, s).map_err(wrap)?,
        };
        walker.reserve(cfg.n);
        let d = cfg.params.dim();
        let b = cfg.zero_mass();

        let mut qsl: Vec<(usize, QslAccumulator)> = Vec::new();
        let mut lil: Vec<(usize, LilTarget, LilAccumulator)> = Vec::new();
        for (i, stat) in cfg.path_statistics.iter().enumerate() {
            match *stat {
                PathStatistic::Qsl { series } => {
                    qsl.push((i, QslAccumulator::new(series.width(d))))
                }
                PathStatistic::LilSup { target } => {
                    lil.push((i, target, LilAccumulator::new(target)?))
                }
            }
        }
        let qsl_kinds: Vec<MartingaleKind> = cfg
            .path_statistics
            .iter()
            .filter_map(|s| match s {
                PathStatistic::Qsl { series } => Some(*series),
                _ => None,
            })
            .collect();
        let streaming = !cfg.path_statistics.is_empty();

        let cps = cfg.checkpoints.as_slice();
        let mut snapshots = Vec::with_capacity(cps.len());
        let mut series: Vec<Vec<f64>> = cfg
            .series
            .iter()
            .map(|k| Vec::with_capacity(cps.len() * k.width(d)))
            .collect();
        let mut scratch = Vec::with_capacity(d);
        let mut next = 0;
        for k in 1..=cfg.n {
            walker.step(&mut rng).map_err(wrap)?;
            if streaming {
                for ((_, acc), kind) in qsl.iter_mut().zip(&qsl_kinds) {
                    scratch.clear();
                    martingale_value(
                        *kind,
                        k,
                        walker.moves(),
                        walker.position(),
                        walker.position_real(),
                        1.0,
                        &mut scratch,
                    );
                    acc.push(&scratch);
                }
                for (_, target, acc) in lil.iter_mut() {
                    let value = match target {
                        LilTarget::StopsMoves { .. } => walker.moves() as f64,
                        LilTarget::CenteredMoves => {
                            walker.moves() as f64 - (k - 1) as f64 * (1.0 - b)
                        }
                    };
                    acc.push(k, value);
                }
            }
            if next < cps.len() && cps[next] == k {
                let snap = walker.snapshot();
                for (kind, out) in cfg.series.iter().zip(series.iter_mut()) {
                    let a_k = self.a_at_checkpoints.as_ref().map_or(1.0, |a| a[next]);
                    martingale_value(
                        *kind,
                        k,
                        snap.moves,
                        &snap.position,
                        &snap.position_real,
                        a_k,
                        out,
                    );
                }
                snapshots.push(snap);
                next += 1;
            }
        }

        let mut path_values = vec![Vec::new(); cfg.path_statistics.len()];
        for (i, acc) in qsl {
            path_values[i] = match acc.finish() {
                QslValue::Scalar(x) => vec![x],
                QslValue::Matrix(m) => m.data,
            };
        }
        for (i, _, acc) in lil {
            path_values[i] = acc.sup().into_iter().collect();
        }
        Ok(ReplicaRecord {
            index,
            snapshots,
            series,
            path_values,
        })
    }
}

/// Cross-replica mean and covariance of a vector quantity.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct VectorSummary {
    pub count: usize,
    pub mean: Vec<f64>,
    /// Unbiased sample covariance (zero for a single replica).
    pub covariance: SquareMatrix,
}

impl VectorSummary {
    /// `columns[i][j]` is component `i` of replica `j`.
    pub fn of_columns(columns: &[Vec<f64>]) -> Self {
        let w = columns.len();
        let count = columns.first().map_or(0, Vec::len);
        let mean: Vec<f64> = columns
            .iter()
            .map(|c| pairwise_sum(c) / count as f64)
            .collect();
        let mut covariance = SquareMatrix::zeros(w);
        if count > 1 {
            let mut prod = vec![0.0; count];
            for i in 0..w {
                for j in i..w {
                    for (t, p) in prod.iter_mut().enumerate() {
                        *p = (columns[i][t] - mean[i]) * (columns[j][t] - mean[j]);
                    }
                    let c = pairwise_sum(&prod) / (count - 1) as f64;
                    covariance.data[i * w + j] = c;
                    covariance.data[j * w + i] = c;
                }
            }
        }
        VectorSummary {
            count,
            mean,
            covariance,
        }
    }

    pub fn variance(&self, i: usize) -> f64 {
        self.covariance.get(i, i)
    }

    pub fn std_error(&self, i: usize) -> f64 {
        (self.variance(i) / self.count as f64).sqrt()
    }

    pub fn moments(&self, i: usize) -> Moments {
        Moments {
            count: self.count,
            mean: self.mean[i],
            variance: self.variance(i),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct CheckpointSummary {
    pub step: usize,
    pub moves: Moments,
    pub position: VectorSummary,
    pub position_real: VectorSummary,
    pub sigma_diag: VectorSummary,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SeriesSummary {
    pub kind: MartingaleKind,
    /// One entry per checkpoint.
    pub values: Vec<VectorSummary>,
    /// Entry `i` covers checkpoints `i` and `i + 1`.
    pub increments: Vec<VectorSummary>,
    pub increment_sq_norm: Vec<Moments>,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct PathStatisticSummary {
    pub statistic: PathStatistic,
    /// Paths that produced a value.
    pub count: usize,
    /// Moments of each entry over those paths.
    pub entries: Vec<Moments>,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct EnsembleSummary {
    pub config: EnsembleConfig,
    pub replicas: usize,
    pub checkpoints: Vec<CheckpointSummary>,
    pub series: Vec<SeriesSummary>,
    pub path_statistics: Vec<PathStatisticSummary>,
}

fn transpose(rows: impl Iterator<Item = impl AsRef<[f64]>>, width: usize) -> Vec<Vec<f64>> {
    let mut cols = vec![Vec::new(); width];
    for row in rows {
        for (c, x) in cols.iter_mut().zip(row.as_ref()) {
            c.push(*x);
        }
    }
    cols
}

impl EnsembleSummary {
    /// Aggregates records that must be ordered by replica index `0..R`.
    pub fn from_records(
        config: &EnsembleConfig,
        records: &[ReplicaRecord],
    ) -> Result<Self, HarnessError> {
        if records.len() != config.replicas {
            return config_error(format!(
                "expected {} records, got {}",
                config.replicas,
                records.len()
            ));
        }
        if let Some((i, _)) = records.iter().enumerate().find(|(i, r)| r.index != *i) {
            return config_error(format!("record {i} is out of order"));
        }
        let d = config.params.dim();
        let cps = config.checkpoints.as_slice();
        let checkpoints = cps
            .iter()
            .enumerate()
            .map(|(c, &step)| {
                let snaps = || records.iter().map(move |r| &r.snapshots[c]);
                let moves: Vec<f64> = snaps().map(|s| s.moves as f64).collect();
                let position: Vec<Vec<f64>> = snaps()
                    .map(|s| s.position.iter().map(|&x| x as f64).collect())
                    .collect();
                let sigma: Vec<Vec<f64>> = snaps()
                    .map(|s| s.axis_visits.iter().map(|&x| x as f64).collect())
                    .collect();
                CheckpointSummary {
                    step,
                    moves: Moments::of(&moves),
                    position: VectorSummary::of_columns(&transpose(position.iter(), d)),
                    position_real: VectorSummary::of_columns(&transpose(
                        snaps().map(|s| &s.position_real),
                        d,
                    )),
                    sigma_diag: VectorSummary::of_columns(&transpose(sigma.iter(), d)),
                }
            })
            .collect();

        let series = config
            .series
            .iter()
            .enumerate()
            .map(|(si, &kind)| {
                let w = kind.width(d);
                fn at(r: &ReplicaRecord, si: usize, w: usize, c: usize) -> &[f64] {
                    &r.series[si][c * w..(c + 1) * w]
                }
                let values = (0..cps.len())
                    .map(|c| {
                        VectorSummary::of_columns(&transpose(
                            records.iter().map(|r| at(r, si, w, c)),
                            w,
                        ))
                    })
                    .collect();
                let mut increments = Vec::new();
                let mut increment_sq_norm = Vec::new();
                for c in 1..cps.len() {
                    let deltas: Vec<Vec<f64>> = records
                        .iter()
                        .map(|r| {
                            at(r, si, w, c)
                                .iter()
                                .zip(at(r, si, w, c - 1))
                                .map(|(x, y)| x - y)
                                .collect()
                        })
                        .collect();
                    let sq: Vec<f64> = deltas
                        .iter()
                        .map(|v| v.iter().map(|x| x * x).sum())
                        .collect();
                    increments.push(VectorSummary::of_columns(&transpose(deltas.iter(), w)));
                    increment_sq_norm.push(Moments::of(&sq));
                }
                SeriesSummary {
                    kind,
                    values,
                    increments,
                    increment_sq_norm,
                }
            })
            .collect();

        let path_statistics = config
            .path_statistics
            .iter()
            .enumerate()
            .map(|(i, &statistic)| {
                let rows: Vec<&Vec<f64>> = records
                    .iter()
                    .map(|r| &r.path_values[i])
                    .filter(|v| !v.is_empty())
                    .collect();
                let width = rows.first().map_or(0, |v| v.len());
                let entries = transpose(rows.iter(), width)
                    .iter()
                    .map(|c| Moments::of(c))
                    .collect();
                PathStatisticSummary {
                    statistic,
                    count: rows.len(),
                    entries,
                }
            })
            .collect();

        Ok(EnsembleSummary {
            config: config.clone(),
            replicas: records.len(),
            checkpoints,
            series,
            path_statistics,
        })
    }

    pub fn series(&self, kind: MartingaleKind) -> Result<&SeriesSummary, HarnessError> {
        self.series
            .iter()
            .find(|s| s.kind == kind)
            .ok_or_else(|| HarnessError::Missing(format!("the {} series", kind.name())))
    }

    pub fn last(&self) -> &CheckpointSummary {
        self.checkpoints
            .last()
            .expect("summaries hold at least one checkpoint")
    }
}

/// Summary plus the per-replica records it was built from.
#[derive(Debug, Clone, PartialEq)]
pub struct Ensemble {
    pub summary: EnsembleSummary,
    pub records: Vec<ReplicaRecord>,
}

impl Ensemble {
    pub fn from_records(
        config: &EnsembleConfig,
        records: Vec<ReplicaRecord>,
    ) -> Result<Self, HarnessError> {
        Ok(Ensemble {
            summary: EnsembleSummary::from_records(config, &records)?,
            records,
        })
    }

    pub fn config(&self) -> &EnsembleConfig {
        &self.summary.config
    }

    /// Move counts at the final checkpoint, in replica order.
    pub fn endpoint_moves(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.last().moves as f64).collect()
    }

    fn series_index(&self, kind: MartingaleKind) -> Result<usize, HarnessError> {
        self.config()
            .series
            .iter()
            .position(|k| *k == kind)
            .ok_or_else(|| HarnessError::Missing(format!("the {} series", kind.name())))
    }

    fn path_statistic_index(&self, stat: PathStatistic) -> Result<usize, HarnessError> {
        self.config()
            .path_statistics
            .iter()
            .position(|s| *s == stat)
            .ok_or_else(|| HarnessError::Missing(String::from("the requested path statistic")))
    }
}

/// Runs every replica in index order on the calling thread.
pub fn run_ensemble(config: &EnsembleConfig) -> Result<Ensemble, HarnessError> {
    let plan = EnsemblePlan::new(config.clone())?;
    let records = (0..config.replicas)
        .map(|i| plan.run_replica(i))
        .collect::<Result<Vec<_>, _>>()?;
    Ensemble::from_records(config, records)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "kebab-case"))]
pub enum Verdict {
    Pass,
    Fail,
    Inconclusive,
}

/// How a check turns its recorded numbers into a verdict. Rules without a
/// parameter compare `observed` with `null_value`.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(
    feature = "serde",
    serde(tag = "rule", content = "limit", rename_all = "kebab-case")
)]
pub enum Rule {
    /// `|observed - null| / std_error <= limit`. A zero standard error
    /// passes only when observed equals null to 1e-9 relative.
    AbsZAtMost(f64),
    /// `(observed - null) / std_error >= limit`.
    ZAtLeast(f64),
    /// `p_value > limit`.
    PValueAbove(f64),
    /// `|observed - null| <= limit`.
    WithinAbs(f64),
    /// `|observed - null| <= limit * |null|`.
    WithinRel(f64),
    /// `observed < null`.
    Below,
    /// `observed >= null`.
    AtLeast,
}

const EXACT_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Check {
    pub label: String,
    pub null_value: f64,
    pub observed: f64,
    pub std_error: Option<f64>,
    pub p_value: Option<f64>,
    pub rule: Rule,
    pub verdict: Verdict,
}

impl Check {
    pub fn new(
        label: impl Into<String>,
        null_value: f64,
        observed: f64,
        std_error: Option<f64>,
        p_value: Option<f64>,
        rule: Rule,
    ) -> Self {
        let mut check = Check {
            label: label.into(),
            null_value,
            observed,
            std_error,
            p_value,
            rule,
            verdict: Verdict::Inconclusive,
        };
        check.verdict = check.evaluate();
        check
    }

    pub fn z_test(
        label: impl Into<String>,
        null_value: f64,
        observed: f64,
        std_error: f64,
    ) -> Self {
        Self::new(
            label,
            null_value,
            observed,
            Some(std_error),
            None,
            Rule::AbsZAtMost(Z_LIMIT),
        )
    }

    /// `(observed - null) / std_error`, with `0/0` read as 0.
    pub fn z(&self) -> Option<f64> {
        let se = self.std_error?;
        let diff = self.observed - self.null_value;
        if se > 0.0 {
            Some(diff / se)
        } else if diff.abs() <= EXACT_TOL * self.null_value.abs().max(1.0) {
            Some(0.0)
        } else {
            Some(f64::INFINITY.copysign(diff))
        }
    }

    /// Applies the rule to the recorded numbers.
    pub fn evaluate(&self) -> Verdict {
        let ok = match self.rule {
            Rule::AbsZAtMost(limit) => self.z().map(|z| z.abs() <= limit),
            Rule::ZAtLeast(limit) => self.z().map(|z| z >= limit),
            Rule::PValueAbove(alpha) => self.p_value.map(|p| p > alpha),
            Rule::WithinAbs(tol) => Some((self.observed - self.null_value).abs() <= tol),
            Rule::WithinRel(tol) => {
                Some((self.observed - self.null_value).abs() <= tol * self.null_value.abs())
            }
            Rule::Below => Some(self.observed < self.null_value),
            Rule::AtLeast => Some(self.observed >= self.null_value),
        };
        match ok {
            Some(true) => Verdict::Pass,
            Some(false) => Verdict::Fail,
            None => Verdict::Inconclusive,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct TestReport {
    pub name: String,
    /// Key of the closed form or theorem the null value comes from.
    pub citation: String,
    pub checks: Vec<Check>,
    pub verdict: Verdict,
    pub seed: u64,
    /// Wall-clock seconds, filled in by the caller.
    pub runtime_secs: Option<f64>,
    /// Advisory reports never count as failures.
    pub advisory: bool,
    /// Set when the verdict is inconclusive by a sample-size or range guard.
    pub inconclusive_reason: Option<String>,
    pub notes: Vec<String>,
}

impl TestReport {
    pub fn new(name: &str, citation: &str, seed: u64, checks: Vec<Check>) -> Self {
        let mut report = TestReport {
            name: name.into(),
            citation: citation.into(),
            checks,
            verdict: Verdict::Inconclusive,
            seed,
            runtime_secs: None,
            advisory: false,
            inconclusive_reason: None,
            notes: Vec::new(),
        };
        report.verdict = report.recompute();
        report
    }

    pub fn inconclusive(name: &str, citation: &str, seed: u64, reason: impl Into<String>) -> Self {
        let mut report = Self::new(name, citation, seed, Vec::new());
        report.inconclusive_reason = Some(reason.into());
        report.verdict = Verdict::Inconclusive;
        report
    }

    /// Verdict implied by the recorded checks and guard.
    pub fn recompute(&self) -> Verdict {
        if self.inconclusive_reason.is_some() || self.checks.is_empty() {
            return Verdict::Inconclusive;
        }
        let verdicts: Vec<Verdict> = self.checks.iter().map(Check::evaluate).collect();
        if verdicts.iter().all(|v| *v == Verdict::Pass) {
            Verdict::Pass
        } else if verdicts.contains(&Verdict::Fail) {
            Verdict::Fail
        } else {
            Verdict::Inconclusive
        }
    }

    /// True when the report must fail a run.
    pub fn is_hard_failure(&self) -> bool {
        !self.advisory && self.verdict != Verdict::Pass
    }

    pub fn advisory(mut self) -> Self {
        self.advisory = true;
        self
    }

    pub fn with_note(mut self, note: impl Into<String>) -> Self {
        self.notes.push(note.into());
        self
    }

    /// Largest `|z|` over the z-test checks.
    pub fn max_abs_z(&self) -> Option<f64> {
        self.checks
            .iter()
            .filter_map(Check::z)
            .map(f64::abs)
            .reduce(f64::max)
    }
}

fn require_variant(ens: &Ensemble, variant: Variant, test: &str) -> Result<(), HarnessError> {
    if ens.config().variant != variant {
        return Err(HarnessError::Precondition(format!(
            "{test} needs a {variant} ensemble"
        )));
    }
    Ok(())
}

/// Sample mean of `Z_k^*` against `G(k+1-r)/(G(2-r)G(k))` at every
/// checkpoint.
pub fn test_mean_moves(ens: &Ensemble, r: f64) -> Result<TestReport, HarnessError> {
    const NAME: &str = "mean-moves";
    const CITE: &str = "expected-moves-gamma-ratio";
    require_variant(ens, Variant::Stops, NAME)?;
    let seed = ens.config().master_seed;
    if ens.summary.replicas < MIN_REPLICAS_MEAN {
        return Ok(TestReport::inconclusive(
            NAME,
            CITE,
            seed,
            format!("fewer than {MIN_REPLICAS_MEAN} replicas"),
        ));
    }
    let checks = ens
        .summary
        .checkpoints
        .iter()
        .map(|c| {
            let null = expected_moves(r, c.step)?;
            Ok(Check::z_test(
                format!("n={}", c.step),
                null,
                c.moves.mean,
                c.moves.std_error(),
            ))
        })
        .collect::<Result<Vec<_>, AnalyticsError>>()?;
    Ok(TestReport::new(NAME, CITE, seed, checks))
}

/// Mean increment of a martingale series between consecutive checkpoints
/// against zero, component-wise.
pub fn test_martingale_drift(
    ens: &Ensemble,
    kind: MartingaleKind,
) -> Result<TestReport, HarnessError> {
    let name = format!("martingale-drift/{}", kind.name());
    let cite = match kind {
        MartingaleKind::Multiplicative { .. } => "multiplicative-moves-martingale",
        MartingaleKind::CenteredMoves { .. } => "centered-moves-martingale",
        MartingaleKind::Position { .. } => "position-martingale",
    };
    let series = ens.summary.series(kind)?;
    let seed = ens.config().master_seed;
    if ens.summary.replicas < MIN_REPLICAS_DRIFT {
        return Ok(TestReport::inconclusive(
            &name,
            cite,
            seed,
            format!("fewer than {MIN_REPLICAS_DRIFT} replicas"),
        ));
    }
    if series.values.len() < 2 {
        return Ok(TestReport::inconclusive(
            &name,
            cite,
            seed,
            "a single checkpoint has no increments",
        ));
    }
    let steps = ens.config().checkpoints.as_slice();
    let mut checks = Vec::new();
    for (i, inc) in series.increments.iter().enumerate() {
        for c in 0..inc.mean.len() {
            let label = if inc.mean.len() == 1 {
                format!("{}->{}", steps[i], steps[i + 1])
            } else {
                format!("{}->{}[{}]", steps[i], steps[i + 1], c + 1)
            };
            checks.push(Check::z_test(label, 0.0, inc.mean[c], inc.std_error(c)));
        }
    }
    Ok(TestReport::new(&name, cite, seed, checks))
}

fn clt_guard(b: f64, n: usize, count: usize) -> Result<Option<String>, HarnessError> {
    if !(b > 0.0 && b < 1.0) {
        return Err(HarnessError::Precondition(format!(
            "the move-count CLT is degenerate at b = {b}"
        )));
    }
    Ok(if n < MIN_LENGTH_CLT {
        Some(format!(
            "n = {n} < {MIN_LENGTH_CLT}: lattice effects dominate"
        ))
    } else if count < MIN_REPLICAS_CLT {
        Some(format!("fewer than {MIN_REPLICAS_CLT} replicas"))
    } else {
        None
    })
}

const CLT_CITE: &str = "move-count-clt";

/// KS test of `(Z_n^* - (n-1)(1-b)) / sqrt(n)` against `N(0, b(1-b))`.
pub fn test_clt_moves(
    endpoints: &[f64],
    b: f64,
    n: usize,
    seed: u64,
) -> Result<TestReport, HarnessError> {
    const NAME: &str = "clt-moves";
    if let Some(reason) = clt_guard(b, n, endpoints.len())? {
        return Ok(TestReport::inconclusive(NAME, CLT_CITE, seed, reason));
    }
    let nf = n as f64;
    let centre = (nf - 1.0) * (1.0 - b);
    let xs: Vec<f64> = endpoints.iter().map(|z| (z - centre) / nf.sqrt()).collect();
    Ok(ks_report(NAME, seed, &xs, (b * (1.0 - b)).sqrt()))
}

fn ks_report(name: &str, seed: u64, xs: &[f64], sd: f64) -> TestReport {
    let ks = ks_one_sample(xs, |x| normal_cdf(x, sd));
    let check = Check::new(
        "ks",
        0.0,
        ks.distance,
        None,
        Some(ks.p_value),
        Rule::PValueAbove(KS_ALPHA),
    );
    TestReport::new(name, CLT_CITE, seed, vec![check])
}

/// KS test of the move count after removing its two finite-n artifacts:
/// the exact mean `1 + (n-1)(1-b)` is subtracted and each integer count is
/// spread uniformly over its unit cell with a seeded jitter. The reference
/// law is `N(0, b(1-b)(n-1)/n + 1/(12n))`.
pub fn test_clt_moves_smoothed(
    endpoints: &[f64],
    b: f64,
    n: usize,
    seed: u64,
) -> Result<TestReport, HarnessError> {
    const NAME: &str = "clt-moves-smoothed";
    if let Some(reason) = clt_guard(b, n, endpoints.len())? {
        return Ok(TestReport::inconclusive(NAME, CLT_CITE, seed, reason));
    }
    let nf = n as f64;
    let centre = 1.0 + (nf - 1.0) * (1.0 - b);
    let mut rng = seed_stream(seed, JITTER_STREAM);
    let xs: Vec<f64> = endpoints
        .iter()
        .map(|z| (z - centre + unit_f64(&mut rng) - 0.5) / nf.sqrt())
        .collect();
    let var = b * (1.0 - b) * (nf - 1.0) / nf + 1.0 / (12.0 * nf);
    Ok(ks_report(NAME, seed, &xs, var.sqrt()))
}

/// Stream id reserved for the CLT jitter, outside any replica range.
const JITTER_STREAM: u64 = u64::MAX;

/// Outcome of repeated tests on data drawn exactly from their null.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Calibration {
    pub repetitions: usize,
    pub passes: usize,
}

/// Feeds `test_clt_moves` with `count` exact `N(0, b(1-b))` draws mapped to
/// the move-count scale, once per repetition with stream `rep`.
pub fn calibrate_clt(
    b: f64,
    n: usize,
    count: usize,
    master_seed: u64,
    repetitions: usize,
) -> Result<Calibration, HarnessError> {
    let nf = n as f64;
    let sd = (b * (1.0 - b)).sqrt();
    let mut passes = 0;
    for rep in 0..repetitions {
        let mut rng = seed_stream(master_seed, rep as u64);
        let endpoints: Vec<f64> = (0..count)
            .map(|_| {
                let g: f64 = StandardNormal.sample(&mut rng);
                (nf - 1.0) * (1.0 - b) + nf.sqrt() * sd * g
            })
            .collect();
        if test_clt_moves(&endpoints, b, n, master_seed)?.verdict == Verdict::Pass {
            passes += 1;
        }
    }
    Ok(Calibration {
        repetitions,
        passes,
    })
}

/// Pooled mean of `||M_k - M_{k-1}||^2` over `k = 2..=k_max` against
/// `eta^2`, and the mean of `||M_1||^2 + sum ||M_k - M_{k-1}||^2` against
/// `tr <M>_{k_max}`. Standard errors come from the per-replica sums.
pub fn test_variation_identity(
    ens: &Ensemble,
    sizes: &StepSizeModel,
    k_max: usize,
) -> Result<TestReport, HarnessError> {
    const NAME: &str = "variation-identity";
    const CITE: &str = "position-martingale-variation";
    require_variant(ens, Variant::RandomSteps, NAME)?;
    let mu = sizes.mean();
    let kind = MartingaleKind::Position { mu };
    let si = ens.series_index(kind)?;
    if k_max < 2 || !ens.config().checkpoints.is_dense_to(k_max) {
        return Err(HarnessError::Precondition(format!(
            "checkpoints must be consecutive over 1..={k_max}"
        )));
    }
    let seed = ens.config().master_seed;
    if ens.summary.replicas < MIN_REPLICAS_MEAN {
        return Ok(TestReport::inconclusive(
            NAME,
            CITE,
            seed,
            format!("fewer than {MIN_REPLICAS_MEAN} replicas"),
        ));
    }
    let d = ens.config().params.dim();
    let mut pooled = Vec::with_capacity(ens.records.len());
    let mut cumulative = Vec::with_capacity(ens.records.len());
    for rec in &ens.records {
        let v = &rec.series[si];
        let at = |k: usize| &v[(k - 1) * d..k * d];
        let sq = |k: usize| -> f64 {
            at(k)
                .iter()
                .zip(at(k - 1))
                .map(|(x, y)| (x - y) * (x - y))
                .sum()
        };
        let inc: Vec<f64> = (2..=k_max).map(sq).collect();
        let sum = pairwise_sum(&inc);
        let first: f64 = at(1).iter().map(|x| x * x).sum();
        pooled.push(sum / (k_max - 1) as f64);
        cumulative.push(first + sum);
    }
    let pooled = Moments::of(&pooled);
    let cumulative = Moments::of(&cumulative);
    let trace = crate::analytics::trace_variation(sizes, k_max)?;
    let checks = vec![
        Check::z_test(
            format!("pooled k=2..={k_max}"),
            sizes.variance(),
            pooled.mean,
            pooled.std_error(),
        ),
        Check::z_test(
            format!("cumulative n={k_max}"),
            trace,
            cumulative.mean,
            cumulative.std_error(),
        ),
    ];
    Ok(TestReport::new(NAME, CITE, seed, checks))
}

/// How the super-critical stops statistic is normalized.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "kebab-case"))]
pub enum LimitNormalization {
    /// `Z_n^* / a_n`, whose limit has the tabulated moments.
    Martingale,
    /// `Z_n^* / n^(1-r)`, whose limit is the above divided by `G(2-r)`.
    PowerLaw,
}

/// Law-of-large-numbers claim checked along a ladder of checkpoints.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(tag = "claim", rename_all = "kebab-case"))]
pub enum LlnClaim {
    /// `Z_n^* / n^r -> 0` for `r > 1/2`, `Z_n^* / (sqrt(n) log n) -> 0` at
    /// `r = 1/2`.
    StopsDecay { r: f64, threshold: f64 },
    /// First two moments of the super-critical stops limit (`r < 1/2`).
    StopsLimit {
        r: f64,
        normalization: LimitNormalization,
    },
    /// `Z_n^* / n -> 1 - b` for the step-size walk.
    MovesFraction { b: f64 },
    /// `S_n / n^alpha -> 0` for `p < p_c`, `S_n / (sqrt(n) (log n)^alpha)
    /// -> 0` at `p = p_c`, with `alpha > 1/2`.
    StepsDecay { alpha: f64, threshold: f64 },
    /// `S_n / n^gamma` settles to a nondegenerate limit for `p > p_c`.
    StepsLimit,
}

/// Runs an LLN claim on the checkpoints listed in `ladder` (at least three).
pub fn test_lln_endpoint(
    ens: &Ensemble,
    claim: LlnClaim,
    ladder: &[usize],
) -> Result<TestReport, HarnessError> {
    if ladder.len() < 3 {
        return Err(HarnessError::Precondition(String::from(
            "an LLN ladder needs at least 3 checkpoints",
        )));
    }
    let cps = &ens.config().checkpoints;
    let idx: Vec<usize> = ladder
        .iter()
        .map(|&k| {
            cps.position(k)
                .ok_or_else(|| HarnessError::Precondition(format!("{k} is not a checkpoint")))
        })
        .collect::<Result<_, _>>()?;
    let seed = ens.config().master_seed;
    let last = *idx.last().expect("ladder is non-empty");
    let n_last = *ladder.last().expect("ladder is non-empty");
    let params = ens.config().params;
    let critical = |x: f64, y: f64| (x - y).abs() <= crate::model::CRITICAL_TOL;
    match claim {
        LlnClaim::StopsDecay { r, threshold } => {
            require_variant(ens, Variant::Stops, "stops LLN")?;
            if r < 0.5 - crate::model::CRITICAL_TOL {
                return Err(HarnessError::Precondition(format!(
                    "r = {r} is super-critical"
                )));
            }
            let norm = move |n: f64| {
                if critical(r, 0.5) {
                    n.sqrt() * n.ln()
                } else {
                    n.powf(r)
                }
            };
            let stat = |c: usize, k: usize| {
                mean_of(
                    ens.records
                        .iter()
                        .map(|rec| rec.snapshots[c].moves as f64 / norm(k as f64)),
                )
            };
            Ok(decay_report(
                "lln-stops",
                "stops-lln-decay",
                seed,
                &idx,
                ladder,
                threshold,
                stat,
            ))
        }
        LlnClaim::StepsDecay { alpha, threshold } => {
            require_variant(ens, Variant::RandomSteps, "steps LLN")?;
            let p_c = params.p_critical();
            if params.p() > p_c + crate::model::CRITICAL_TOL || alpha <= 0.5 {
                return Err(HarnessError::Precondition(format!(
                    "needs p <= {p_c} and alpha > 1/2"
                )));
            }
            let at_critical = critical(params.p(), p_c);
            let norm = move |n: f64| {
                if at_critical {
                    n.sqrt() * n.ln().powf(alpha)
                } else {
                    n.powf(alpha)
                }
            };
            let stat = |c: usize, k: usize| {
                mean_of(
                    ens.records
                        .iter()
                        .map(|rec| norm2(&rec.snapshots[c].position_real) / norm(k as f64)),
                )
            };
            Ok(decay_report(
                "lln-steps",
                "steps-lln-decay",
                seed,
                &idx,
                ladder,
                threshold,
                stat,
            ))
        }
        LlnClaim::MovesFraction { b } => {
            require_variant(ens, Variant::RandomSteps, "moves LLN")?;
            let xs: Vec<f64> = ens
                .records
                .iter()
                .map(|rec| rec.snapshots[last].moves as f64 / n_last as f64)
                .collect();
            let m = Moments::of(&xs);
            let se = (b * (1.0 - b) / (n_last as f64 * xs.len() as f64)).sqrt();
            let check = Check::z_test(format!("n={n_last}"), 1.0 - b, m.mean, se);
            Ok(TestReport::new(
                "lln-moves",
                "move-count-lln",
                seed,
                vec![check],
            ))
        }
        LlnClaim::StopsLimit { r, normalization } => {
            require_variant(ens, Variant::Stops, "stops LLN")?;
            let scale = match normalization {
                LimitNormalization::Martingale => expected_moves(r, n_last)?,
                LimitNormalization::PowerLaw => (n_last as f64).powf(1.0 - r),
            };
            let xs: Vec<f64> = ens
                .records
                .iter()
                .map(|rec| rec.snapshots[last].moves as f64 / scale)
                .collect();
            let sq: Vec<f64> = xs.iter().map(|x| x * x).collect();
            let (m1, m2) = (Moments::of(&xs), Moments::of(&sq));
            let name = match normalization {
                LimitNormalization::Martingale => "lln-stops-limit",
                LimitNormalization::PowerLaw => "lln-stops-limit-power",
            };
            let checks = vec![
                Check::z_test(
                    format!("first moment n={n_last}"),
                    limit_moment(r, 1)?,
                    m1.mean,
                    m1.std_error(),
                ),
                Check::z_test(
                    format!("second moment n={n_last}"),
                    limit_moment(r, 2)?,
                    m2.mean,
                    m2.std_error(),
                ),
            ];
            Ok(TestReport::new(name, "stops-limit-moments", seed, checks))
        }
        LlnClaim::StepsLimit => {
            require_variant(ens, Variant::RandomSteps, "steps LLN")?;
            let gamma = params.gamma();
            if params.p() <= params.p_critical() + crate::model::CRITICAL_TOL {
                return Err(HarnessError::Precondition(String::from(
                    "needs p above the critical value",
                )));
            }
            let norms = |c: usize, k: usize| -> Vec<f64> {
                ens.records
                    .iter()
                    .map(|rec| norm2(&rec.snapshots[c].position_real) / (k as f64).powf(gamma))
                    .collect()
            };
            let prev = idx[idx.len() - 2];
            let before = Moments::of(&norms(prev, ladder[ladder.len() - 2]));
            let xs = norms(last, n_last);
            let after = Moments::of(&xs);
            let fourth: Vec<f64> = xs.iter().map(|x| (x - after.mean).powi(4)).collect();
            let m4 = pairwise_sum(&fourth) / xs.len() as f64;
            let var_se = ((m4 - after.variance * after.variance).max(0.0) / xs.len() as f64).sqrt();
            let checks = vec![
                Check::new(
                    "stabilization",
                    before.mean,
                    after.mean,
                    None,
                    None,
                    Rule::WithinRel(0.05),
                ),
                Check::new(
                    "nondegeneracy",
                    0.0,
                    after.variance,
                    Some(var_se),
                    None,
                    Rule::ZAtLeast(Z_LIMIT),
                ),
            ];
            Ok(
                TestReport::new("lln-steps-limit", "steps-lln-super-critical", seed, checks)
                    .with_note(
                    "the 5% stabilization criterion is heuristic: no convergence rate is available",
                ),
            )
        }
    }
}

fn mean_of(xs: impl Iterator<Item = f64>) -> f64 {
    let v: Vec<f64> = xs.map(f64::abs).collect();
    pairwise_sum(&v) / v.len() as f64
}

fn norm2(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn decay_report(
    name: &str,
    cite: &str,
    seed: u64,
    idx: &[usize],
    ladder: &[usize],
    threshold: f64,
    stat: impl Fn(usize, usize) -> f64,
) -> TestReport {
    let values: Vec<f64> = idx.iter().zip(ladder).map(|(&c, &k)| stat(c, k)).collect();
    let mut checks: Vec<Check> = values
        .windows(2)
        .zip(ladder.windows(2))
        .map(|(v, k)| {
            Check::new(
                format!("decrease {}->{}", k[0], k[1]),
                v[0],
                v[1],
                None,
                None,
                Rule::Below,
            )
        })
        .collect();
    let n = ladder[ladder.len() - 1];
    checks.push(Check::new(
        format!("final n={n}"),
        threshold,
        values[values.len() - 1],
        None,
        None,
        Rule::Below,
    ));
    TestReport::new(name, cite, seed, checks)
}

/// Every diagonal entry of `mean(Sigma_n) / n` within 0.01 of `1/d` at the
/// final checkpoint.
pub fn test_sigma_convergence(ens: &Ensemble) -> Result<TestReport, HarnessError> {
    let cfg = ens.config();
    if cfg.variant == Variant::Stops && cfg.params.r() != 0.0 {
        return Err(HarnessError::Precondition(String::from(
            "sigma convergence needs r = 0",
        )));
    }
    let last = ens.summary.last();
    let d = cfg.params.dim();
    let n = last.step as f64;
    let checks = (0..d)
        .map(|i| {
            Check::new(
                format!("sigma[{}]/n at n={}", i + 1, last.step),
                1.0 / d as f64,
                last.sigma_diag.mean[i] / n,
                Some(last.sigma_diag.std_error(i) / n),
                None,
                Rule::WithinAbs(0.01),
            )
        })
        .collect();
    Ok(TestReport::new(
        "sigma-convergence",
        "sigma-over-n-limit",
        cfg.master_seed,
        checks,
    ))
}

/// Mean QSL statistic of the centered move count within 10% of `b(1-b)`.
pub fn test_qsl_moves(ens: &Ensemble, b: f64) -> Result<TestReport, HarnessError> {
    let (name, mean, n) = qsl_moves_mean(ens, b)?;
    let check = Check::new(
        format!("n={n}"),
        b * (1.0 - b),
        mean,
        None,
        None,
        Rule::WithinRel(0.10),
    );
    Ok(TestReport::new(
        name,
        "move-count-qsl",
        ens.config().master_seed,
        vec![check],
    ))
}

/// Mean QSL statistic of the centered move count within 10% of its exact
/// expectation at the simulated length.
pub fn test_qsl_moves_finite(ens: &Ensemble, b: f64) -> Result<TestReport, HarnessError> {
    let (_, mean, n) = qsl_moves_mean(ens, b)?;
    let null = qsl_moves_expectation(b, n)?;
    let check = Check::new(
        format!("n={n}"),
        null,
        mean,
        None,
        None,
        Rule::WithinRel(0.10),
    );
    Ok(TestReport::new(
        "qsl-moves-finite",
        "move-count-qsl",
        ens.config().master_seed,
        vec![check],
    ))
}

fn qsl_moves_mean(ens: &Ensemble, b: f64) -> Result<(&'static str, f64, usize), HarnessError> {
    require_variant(ens, Variant::RandomSteps, "qsl-moves")?;
    let stat = PathStatistic::Qsl {
        series: MartingaleKind::CenteredMoves { b },
    };
    let i = ens.path_statistic_index(stat)?;
    let m = &ens.summary.path_statistics[i].entries[0];
    Ok(("qsl-moves", m.mean, ens.config().n))
}

/// Advisory: fraction of paths whose LIL running supremum stays within
/// `bound + margin`, against 95%.
pub fn lil_smoke(
    ens: &Ensemble,
    target: LilTarget,
    bound: f64,
    margin: f64,
) -> Result<TestReport, HarnessError> {
    let i = ens.path_statistic_index(PathStatistic::LilSup { target })?;
    let sups: Vec<f64> = ens
        .records
        .iter()
        .filter_map(|r| r.path_values[i].first().copied())
        .collect();
    let name = match target {
        LilTarget::StopsMoves { .. } => "lil-smoke/stops-moves",
        LilTarget::CenteredMoves => "lil-smoke/centered-moves",
    };
    let seed = ens.config().master_seed;
    if sups.is_empty() {
        return Ok(TestReport::inconclusive(
            name,
            "lil-bound",
            seed,
            "no path reached the normalizer range",
        )
        .advisory());
    }
    let within = sups.iter().filter(|&&s| s <= bound + margin).count();
    let fraction = within as f64 / sups.len() as f64;
    let largest = sups.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let report = TestReport::new(
        name,
        "lil-bound",
        seed,
        vec![Check::new(
            format!("paths within {bound:.6} + {margin}"),
            LIL_SMOKE_FRACTION,
            fraction,
            None,
            None,
            Rule::AtLeast,
        )],
    );
    Ok(report
        .advisory()
        .with_note(format!("largest running sup {largest:.6}")))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::validate_params;
    use crate::sizes::SizeLaw;

    fn zero_inflated(b: f64) -> StepSizeModel {
        StepSizeModel::from_later(SizeLaw::ZeroInflated {
            zero_prob: b,
            value: 1.0,
        })
        .unwrap()
    }

    #[test]
    fn single_replica_summary_equals_trace() {
        let params = validate_params(2, 0.6, 0.2).unwrap();
        let cfg = EnsembleConfig::stops(params, 300, 1, 11);
        let ens = run_ensemble(&cfg).unwrap();
        let trace =
            crate::walk::simulate_stops(&params, 300, &cfg.checkpoints, &mut seed_stream(11, 0))
                .unwrap();
        for (c, snap) in ens.summary.checkpoints.iter().zip(&trace.snapshots) {
            assert_eq!(c.moves.mean, snap.moves as f64);
            assert_eq!(c.moves.variance, 0.0);
            assert_eq!(c.position_real.mean, snap.position_real);
            assert_eq!(
                c.sigma_diag.mean,
                snap.axis_visits
                    .iter()
                    .map(|&x| x as f64)
                    .collect::<Vec<_>>()
            );
        }
    }

    #[test]
    fn r_zero_moves_are_deterministic() {
        let cfg = EnsembleConfig::stops(validate_params(3, 0.2, 0.0).unwrap(), 500, 40, 5);
        let ens = run_ensemble(&cfg).unwrap();
        for c in &ens.summary.checkpoints {
            assert_eq!(c.moves.mean, c.step as f64);
            assert_eq!(c.moves.variance, 0.0);
        }
        let report = test_mean_moves(&ens, 0.0).unwrap();
        assert_eq!(report.verdict, Verdict::Inconclusive);
    }

    #[test]
    fn summaries_are_symmetric_and_nonnegative() {
        let mut cfg = EnsembleConfig::random_steps(
            validate_params(3, 0.5, 0.0).unwrap(),
            StepSizeModel::from_later(SizeLaw::Exponential { rate: 1.5 }).unwrap(),
            256,
            64,
            3,
        );
        cfg.series = vec![MartingaleKind::Position { mu: 1.0 / 1.5 }];
        let ens = run_ensemble(&cfg).unwrap();
        let mut all = Vec::new();
        for c in &ens.summary.checkpoints {
            all.extend([&c.position, &c.position_real, &c.sigma_diag]);
        }
        for s in &ens.summary.series[0].values {
            all.push(s);
        }
        for v in all {
            let m = &v.covariance;
            for i in 0..m.dim {
                assert!(m.get(i, i) >= 0.0);
                for j in 0..m.dim {
                    assert_eq!(m.get(i, j), m.get(j, i));
                }
                // diagonal dominance bound of a PSD matrix
                for j in 0..m.dim {
                    assert!(
                        m.get(i, j).powi(2) <= m.get(i, i) * m.get(j, j) * (1.0 + 1e-9) + 1e-12
                    );
                }
            }
        }
    }

    #[test]
    fn records_rebuild_the_same_summary_in_any_execution_order() {
        let mut cfg = EnsembleConfig::stops(validate_params(2, 0.4, 0.3).unwrap(), 200, 50, 77);
        cfg.series = vec![MartingaleKind::Multiplicative { r: 0.3 }];
        let plan = EnsemblePlan::new(cfg.clone()).unwrap();
        let mut records: Vec<ReplicaRecord> = (0..50)
            .rev()
            .map(|i| plan.run_replica(i).unwrap())
            .collect();
        records.reverse();
        let a = Ensemble::from_records(&cfg, records).unwrap();
        let b = run_ensemble(&cfg).unwrap();
        assert_eq!(a, b);
        let mut shuffled = b.records.clone();
        shuffled.swap(0, 1);
        assert!(EnsembleSummary::from_records(&cfg, &shuffled).is_err());
    }

    #[test]
    fn config_validation() {
        let stops = validate_params(2, 0.4, 0.3).unwrap();
        let mut cfg = EnsembleConfig::stops(stops, 10, 0, 1);
        assert!(cfg.validate().is_err());
        cfg.replicas = 1;
        assert!(cfg.validate().is_ok());
        cfg.series = vec![MartingaleKind::CenteredMoves { b: 0.3 }];
        assert!(cfg.validate().is_err());
        let sizes = zero_inflated(0.3);
        let cfg = EnsembleConfig::random_steps(stops, sizes.clone(), 10, 1, 1);
        assert!(matches!(cfg.validate(), Err(HarnessError::Config(_))));
        let mut cfg =
            EnsembleConfig::random_steps(validate_params(2, 0.4, 0.0).unwrap(), sizes, 10, 1, 1);
        cfg.path_statistics = vec![PathStatistic::LilSup {
            target: LilTarget::StopsMoves { r: 0.8 },
        }];
        assert!(cfg.validate().is_err());
        cfg.path_statistics = vec![PathStatistic::Qsl {
            series: MartingaleKind::CenteredMoves { b: 0.3 },
        }];
        assert!(cfg.validate().is_ok());
    }

    #[test]
    fn degenerate_series_pass_drift_and_variation() {
        let mut cfg = EnsembleConfig::stops(validate_params(2, 0.3, 0.0).unwrap(), 64, 1000, 9);
        cfg.series = vec![MartingaleKind::Multiplicative { r: 0.0 }];
        let ens = run_ensemble(&cfg).unwrap();
        let report =
            test_martingale_drift(&ens, MartingaleKind::Multiplicative { r: 0.0 }).unwrap();
        assert_eq!(report.verdict, Verdict::Pass);
        assert_eq!(report.max_abs_z(), Some(0.0));

        let threes = StepSizeModel::constant(3.0).unwrap();
        let mut cfg = EnsembleConfig::random_steps(
            validate_params(2, 0.6, 0.0).unwrap(),
            threes.clone(),
            20,
            1000,
            4,
        );
        cfg.checkpoints = Checkpoints::dense(20);
        cfg.series = vec![MartingaleKind::Position { mu: 3.0 }];
        let ens = run_ensemble(&cfg).unwrap();
        assert_eq!(
            test_martingale_drift(&ens, MartingaleKind::Position { mu: 3.0 })
                .unwrap()
                .verdict,
            Verdict::Pass
        );
        let report = test_variation_identity(&ens, &threes, 20).unwrap();
        assert_eq!(report.verdict, Verdict::Pass);
        assert_eq!(report.checks[0].null_value, 0.0);
    }

    #[test]
    fn variation_identity_zero_inflated() {
        let sizes = StepSizeModel::new(
            SizeLaw::PointMass { value: 1.0 },
            SizeLaw::ZeroInflated {
                zero_prob: 0.5,
                value: 1.0,
            },
        )
        .unwrap();
        let mut cfg = EnsembleConfig::random_steps(
            validate_params(2, 0.5, 0.0).unwrap(),
            sizes.clone(),
            12,
            200,
            8,
        );
        cfg.checkpoints = Checkpoints::dense(12);
        cfg.series = vec![MartingaleKind::Position { mu: 0.5 }];
        let ens = run_ensemble(&cfg).unwrap();
        let report = test_variation_identity(&ens, &sizes, 4).unwrap();
        assert_eq!(report.checks[0].null_value, 0.25);
        assert_eq!(report.checks[1].null_value, 1.0);
        // every increment has squared norm (Y - 1/2)^2 = 1/4 exactly
        assert_eq!(report.checks[0].observed, 0.25);
        assert_eq!(report.checks[0].std_error, Some(0.0));
        assert_eq!(report.verdict, Verdict::Pass);
        cfg.checkpoints = Checkpoints::powers_of_two(12);
        let sparse = run_ensemble(&cfg).unwrap();
        assert!(matches!(
            test_variation_identity(&sparse, &sizes, 4),
            Err(HarnessError::Precondition(_))
        ));
    }

    #[test]
    fn check_rules() {
        assert_eq!(Check::z_test("x", 1.0, 1.0, 0.0).verdict, Verdict::Pass);
        assert_eq!(Check::z_test("x", 1.0, 1.1, 0.0).verdict, Verdict::Fail);
        assert_eq!(Check::z_test("x", 0.0, 3.9, 1.0).verdict, Verdict::Pass);
        assert_eq!(Check::z_test("x", 0.0, -4.1, 1.0).verdict, Verdict::Fail);
        assert_eq!(
            Check::new("p", 0.0, 0.1, None, Some(0.02), Rule::PValueAbove(0.01)).verdict,
            Verdict::Pass
        );
        assert_eq!(
            Check::new("p", 0.0, 0.1, None, Some(0.005), Rule::PValueAbove(0.01)).verdict,
            Verdict::Fail
        );
        assert_eq!(
            Check::new("p", 0.0, 0.1, None, None, Rule::PValueAbove(0.01)).verdict,
            Verdict::Inconclusive
        );
        assert_eq!(
            Check::new("r", 0.21, 0.23, None, None, Rule::WithinRel(0.1)).verdict,
            Verdict::Pass
        );
        assert_eq!(
            Check::new("r", 0.21, 0.24, None, None, Rule::WithinRel(0.1)).verdict,
            Verdict::Fail
        );
        assert_eq!(
            Check::new("b", 1.0, 0.5, None, None, Rule::Below).verdict,
            Verdict::Pass
        );
        assert_eq!(
            Check::new("a", 0.95, 0.95, None, None, Rule::AtLeast).verdict,
            Verdict::Pass
        );
        assert_eq!(
            Check::new("z", 0.0, 5.0, Some(1.0), None, Rule::ZAtLeast(4.0)).verdict,
            Verdict::Pass
        );
    }

    #[test]
    fn report_verdict_is_recomputable() {
        let mut report = TestReport::new(
            "t",
            "c",
            1,
            vec![
                Check::z_test("a", 0.0, 1.0, 1.0),
                Check::z_test("b", 0.0, 2.0, 1.0),
            ],
        );
        assert_eq!(report.verdict, Verdict::Pass);
        report.checks[1].observed = 9.0;
        assert_eq!(report.recompute(), Verdict::Fail);
        assert!(TestReport::inconclusive("t", "c", 1, "why").is_hard_failure());
        let advisory =
            TestReport::new("t", "c", 1, vec![Check::z_test("a", 0.0, 9.0, 1.0)]).advisory();
        assert_eq!(advisory.verdict, Verdict::Fail);
        assert!(!advisory.is_hard_failure());
    }

    #[test]
    fn clt_guards() {
        let xs = vec![1.0; 10_000];
        assert!(matches!(
            test_clt_moves(&xs, 0.0, 5000, 1),
            Err(HarnessError::Precondition(_))
        ));
        assert!(test_clt_moves(&xs, 1.0, 5000, 1).is_err());
        assert_eq!(
            test_clt_moves(&xs, 0.5, 2, 1).unwrap().verdict,
            Verdict::Inconclusive
        );
        assert_eq!(
            test_clt_moves(&xs[..100], 0.5, 5000, 1).unwrap().verdict,
            Verdict::Inconclusive
        );
    }

    #[test]
    fn clt_calibration_on_exact_null() {
        let cal = calibrate_clt(0.3, 5000, 10_000, 2024, 40).unwrap();
        assert!(cal.passes >= 37, "{cal:?}");
    }

    #[test]
    fn z_test_calibration_on_exact_null() {
        // z-tests of N(0,1) sample means: the |z| <= 4 rule rejects with
        // probability 6e-5 per check
        let mut passes = 0;
        for rep in 0..100u64 {
            let mut rng = seed_stream(99, rep);
            let xs: Vec<f64> = (0..1000).map(|_| StandardNormal.sample(&mut rng)).collect();
            let m = Moments::of(&xs);
            passes +=
                (Check::z_test("m", 0.0, m.mean, m.std_error()).verdict == Verdict::Pass) as usize;
        }
        assert!(passes >= 97);
    }

    #[test]
    fn lln_claims_on_small_ensembles() {
        let cfg = EnsembleConfig::stops(validate_params(1, 0.0, 1.0).unwrap(), 4096, 20, 3);
        let ens = run_ensemble(&cfg).unwrap();
        let report = test_lln_endpoint(
            &ens,
            LlnClaim::StopsDecay {
                r: 1.0,
                threshold: 0.01,
            },
            &[64, 512, 4096],
        )
        .unwrap();
        assert_eq!(report.verdict, Verdict::Pass);
        assert!((report.checks[2].observed - 1.0 / 4096.0).abs() < 1e-15);
        assert!(test_lln_endpoint(
            &ens,
            LlnClaim::StopsDecay {
                r: 1.0,
                threshold: 0.01
            },
            &[64, 4096]
        )
        .is_err());
        assert!(test_lln_endpoint(
            &ens,
            LlnClaim::StopsDecay {
                r: 1.0,
                threshold: 0.01
            },
            &[64, 100, 4096]
        )
        .is_err());

        let sizes = zero_inflated(0.3);
        let cfg = EnsembleConfig::random_steps(
            validate_params(2, 0.4, 0.0).unwrap(),
            sizes,
            4096,
            200,
            5,
        );
        let ens = run_ensemble(&cfg).unwrap();
        let report =
            test_lln_endpoint(&ens, LlnClaim::MovesFraction { b: 0.3 }, &[256, 1024, 4096])
                .unwrap();
        assert_eq!(report.verdict, Verdict::Pass);
    }

    #[test]
    fn sigma_for_one_dimension_is_the_move_fraction() {
        let cfg = EnsembleConfig::stops(validate_params(1, 0.9, 0.0).unwrap(), 1000, 3, 1);
        let report = test_sigma_convergence(&run_ensemble(&cfg).unwrap()).unwrap();
        assert_eq!(report.checks[0].observed, 1.0);
        assert_eq!(report.verdict, Verdict::Pass);
        let cfg = EnsembleConfig::stops(validate_params(1, 0.5, 0.2).unwrap(), 100, 3, 1);
        assert!(test_sigma_convergence(&run_ensemble(&cfg).unwrap()).is_err());
    }

    #[test]
    fn path_statistics_are_recorded() {
        let sizes = zero_inflated(0.3);
        let mut cfg =
            EnsembleConfig::random_steps(validate_params(2, 0.4, 0.0).unwrap(), sizes, 2000, 30, 6);
        cfg.path_statistics = vec![
            PathStatistic::Qsl {
                series: MartingaleKind::CenteredMoves { b: 0.3 },
            },
            PathStatistic::LilSup {
                target: LilTarget::CenteredMoves,
            },
        ];
        let ens = run_ensemble(&cfg).unwrap();
        assert!(ens
            .records
            .iter()
            .all(|r| r.path_values[0].len() == 1 && r.path_values[1].len() == 1));
        assert_eq!(ens.summary.path_statistics[0].count, 30);
        let qsl = test_qsl_moves_finite(&ens, 0.3).unwrap();
        assert!(qsl.checks[0].observed > 0.0);
        let lil = lil_smoke(&ens, LilTarget::CenteredMoves, 0.21f64.sqrt(), 0.3).unwrap();
        assert!(lil.advisory);
    }
}
