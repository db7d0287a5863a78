//! Exact path simulation for both walk variants.
//!
//! The walker keeps every past direction (packed as `sign * axis`), so a
//! step costs one bounded-integer draw for the remembered index, one
//! uniform for the action and, in the random-step-size walk, one size draw.
//! Aggregates are updated incrementally and copied out at checkpoints.

use alloc::vec;
use alloc::vec::Vec;

use rand::RngCore;

use crate::model::{apply_action, sample_action, ModelError, UnitStep, Variant, WalkParams};
use crate::rng::below;
use crate::sizes::{SizeError, SizeSampler, StepSizeModel};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum WalkError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Size(#[from] SizeError),
    #[error("path length must be at least 1")]
    ZeroLength,
    #[error("checkpoint {k} is outside 1..={n}")]
    CheckpointOutOfRange { k: usize, n: usize },
    #[error("step size model produced a negative size {0}")]
    NegativeSize(f64),
    #[error("{0} is not a recorded checkpoint")]
    UnknownCheckpoint(usize),
}

/// Sorted, duplicate-free step indices in `1..=n`.
#[derive(Debug, Clone, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(transparent))]
pub struct Checkpoints(Vec<usize>);

impl Checkpoints {
    pub fn new(mut indices: Vec<usize>, n: usize) -> Result<Self, WalkError> {
        if n == 0 {
            return Err(WalkError::ZeroLength);
        }
        indices.sort_unstable();
        indices.dedup();
        if let Some(&k) = indices.iter().find(|&&k| k == 0 || k > n) {
            return Err(WalkError::CheckpointOutOfRange { k, n });
        }
        Ok(Checkpoints(indices))
    }

    /// Every step `1..=n`.
    pub fn dense(n: usize) -> Self {
        Checkpoints((1..=n).collect())
    }

    /// `1, 2, 4, ...` up to `n`, plus `n` itself.
    pub fn powers_of_two(n: usize) -> Self {
        let mut v: Vec<usize> = core::iter::successors(Some(1usize), |k| k.checked_mul(2))
            .take_while(|&k| k <= n)
            .collect();
        if v.last() != Some(&n) && n > 0 {
            v.push(n);
        }
        Checkpoints(v)
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn last(&self) -> Option<usize> {
        self.0.last().copied()
    }

    pub fn position(&self, k: usize) -> Option<usize> {
        self.0.binary_search(&k).ok()
    }

    /// True when the set is exactly `1..=upto` as a prefix.
    pub fn is_dense_to(&self, upto: usize) -> bool {
        self.0.len() >= upto && self.0[..upto].iter().enumerate().all(|(i, &k)| k == i + 1)
    }
}

/// Aggregates of a path after `step` steps.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Snapshot {
    pub step: usize,
    /// `Z_n^*` (stops) or the count of nonzero sizes (random steps).
    pub moves: u64,
    /// `W_n`, the sum of unit directions.
    pub position: Vec<i64>,
    /// `S_n`, the sum of sized steps. Equals `W_n` in the stops variant.
    pub position_real: Vec<f64>,
    /// Diagonal of `Sigma_n = sum X_k X_k^t`.
    pub axis_visits: Vec<u64>,
}

impl Snapshot {
    pub fn delays(&self) -> u64 {
        self.step as u64 - self.moves
    }
}

/// One step of a path: unit direction `X_k` and size `Y_k` (1 or 0 in the
/// stops variant).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepRecord {
    pub direction: UnitStep,
    pub size: f64,
}

#[derive(Debug, Clone)]
pub struct WalkTrace {
    pub params: WalkParams,
    pub variant: Variant,
    pub n: usize,
    pub checkpoints: Checkpoints,
    pub snapshots: Vec<Snapshot>,
    /// Raw steps, kept only on request.
    pub steps: Option<Vec<StepRecord>>,
}

impl WalkTrace {
    pub fn path_statistics(&self, k: usize) -> Result<&Snapshot, WalkError> {
        self.checkpoints
            .position(k)
            .map(|i| &self.snapshots[i])
            .ok_or(WalkError::UnknownCheckpoint(k))
    }

    pub fn last(&self) -> &Snapshot {
        self.snapshots
            .last()
            .expect("trace has at least one checkpoint")
    }
}

/// Free-function form of [`WalkTrace::path_statistics`].
pub fn path_statistics(trace: &WalkTrace, k: usize) -> Result<&Snapshot, WalkError> {
    trace.path_statistics(k)
}

#[derive(Debug, Clone)]
struct Sizes {
    first: SizeSampler,
    later: SizeSampler,
}

/// Mutable state of one path.
#[derive(Debug, Clone)]
pub struct Walker {
    params: WalkParams,
    variant: Variant,
    sizes: Option<Sizes>,
    history: Vec<i32>,
    moves: u64,
    position: Vec<i64>,
    position_real: Vec<f64>,
    axis_visits: Vec<u64>,
}

impl Walker {
    pub fn stops(params: WalkParams) -> Self {
        Self::with_sizes(params, Variant::Stops, None)
    }

    pub fn random_steps(params: WalkParams, sizes: &StepSizeModel) -> Result<Self, WalkError> {
        if params.r() != 0.0 {
            return Err(ModelError::RestInRandomSteps(params.r()).into());
        }
        sizes.validate()?;
        let sizes = Sizes {
            first: sizes.first.sampler()?,
            later: sizes.later.sampler()?,
        };
        Ok(Self::with_sizes(params, Variant::RandomSteps, Some(sizes)))
    }

    fn with_sizes(params: WalkParams, variant: Variant, sizes: Option<Sizes>) -> Self {
        let d = params.dim();
        Walker {
            params,
            variant,
            sizes,
            history: Vec::new(),
            moves: 0,
            position: vec![0; d],
            position_real: vec![0.0; d],
            axis_visits: vec![0; d],
        }
    }

    pub fn reserve(&mut self, n: usize) {
        self.history.reserve(n.saturating_sub(self.history.len()));
    }

    pub fn params(&self) -> &WalkParams {
        &self.params
    }

    pub fn variant(&self) -> Variant {
        self.variant
    }

    pub fn steps_taken(&self) -> usize {
        self.history.len()
    }

    pub fn moves(&self) -> u64 {
        self.moves
    }

    pub fn position(&self) -> &[i64] {
        &self.position
    }

    pub fn position_real(&self) -> &[f64] {
        &self.position_real
    }

    pub fn axis_visits(&self) -> &[u64] {
        &self.axis_visits
    }

    /// Takes one step. Draw order: remembered index, action, size.
    #[inline]
    pub fn step<R: RngCore + ?Sized>(&mut self, rng: &mut R) -> Result<StepRecord, WalkError> {
        let d = self.params.dim();
        let k = self.history.len();
        let direction = if k == 0 {
            UnitStep::sample_axis(d, rng)
        } else {
            let remembered = self.history[below(rng, k as u64) as usize];
            let action = sample_action(&self.params, rng);
            apply_action(action, UnitStep::decode(remembered), d)?
        };
        let size = match &self.sizes {
            None => direction.squared_norm() as f64,
            Some(s) => {
                let y = if k == 0 {
                    s.first.sample(rng)
                } else {
                    s.later.sample(rng)
                };
                if y.is_nan() || y < 0.0 {
                    return Err(WalkError::NegativeSize(y));
                }
                y
            }
        };
        self.history.push(direction.encode());
        if let UnitStep::Axis { axis, sign } = direction {
            let i = axis as usize - 1;
            let s = sign.value();
            self.position[i] += s;
            self.position_real[i] += s as f64 * size;
            self.axis_visits[i] += 1;
        }
        self.moves += match self.variant {
            Variant::Stops => direction.squared_norm(),
            Variant::RandomSteps => (size != 0.0) as u64,
        };
        Ok(StepRecord { direction, size })
    }

    pub fn snapshot(&self) -> Snapshot {
        Snapshot {
            step: self.history.len(),
            moves: self.moves,
            position: self.position.clone(),
            position_real: self.position_real.clone(),
            axis_visits: self.axis_visits.clone(),
        }
    }

    /// Runs the walk to `n` steps, recording a snapshot at each checkpoint.
    pub fn run<R: RngCore + ?Sized>(
        mut self,
        n: usize,
        checkpoints: &Checkpoints,
        retain_steps: bool,
        rng: &mut R,
    ) -> Result<WalkTrace, WalkError> {
        if n == 0 {
            return Err(WalkError::ZeroLength);
        }
        if let Some(k) = checkpoints.last().filter(|&k| k > n) {
            return Err(WalkError::CheckpointOutOfRange { k, n });
        }
        self.reserve(n);
        let mut steps = retain_steps.then(|| Vec::with_capacity(n));
        let mut snapshots = Vec::with_capacity(checkpoints.len());
        let mut next = checkpoints.as_slice().iter().peekable();
        while self.history.len() < n {
            let record = self.step(rng)?;
            if let Some(s) = steps.as_mut() {
                s.push(record);
            }
            if next.peek() == Some(&&self.history.len()) {
                snapshots.push(self.snapshot());
                next.next();
            }
        }
        Ok(WalkTrace {
            params: self.params,
            variant: self.variant,
            n,
            checkpoints: checkpoints.clone(),
            snapshots,
            steps,
        })
    }
}

/// Simulates `n` steps of the walk with stops.
pub fn simulate_stops<R: RngCore + ?Sized>(
    params: &WalkParams,
    n: usize,
    checkpoints: &Checkpoints,
    rng: &mut R,
) -> Result<WalkTrace, WalkError> {
    Walker::stops(*params).run(n, checkpoints, false, rng)
}

/// Simulates `n` steps of the walk with random step sizes (requires `r = 0`).
pub fn simulate_random_steps<R: RngCore + ?Sized>(
    params: &WalkParams,
    sizes: &StepSizeModel,
    n: usize,
    checkpoints: &Checkpoints,
    rng: &mut R,
) -> Result<WalkTrace, WalkError> {
    Walker::random_steps(*params, sizes)?.run(n, checkpoints, false, rng)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{validate_params, Sign};
    use crate::rng::seed_stream;
    use crate::sizes::SizeLaw;
    use proptest::prelude::*;

    fn params(d: usize, p: f64, r: f64) -> WalkParams {
        validate_params(d, p, r).unwrap()
    }

    /// Brute-force rescan of a raw step list.
    fn rescan(steps: &[StepRecord], k: usize, d: usize, variant: Variant) -> Snapshot {
        let mut s = Snapshot {
            step: k,
            moves: 0,
            position: vec![0; d],
            position_real: vec![0.0; d],
            axis_visits: vec![0; d],
        };
        for rec in &steps[..k] {
            let mut x = vec![0i64; d];
            if let UnitStep::Axis { axis, sign } = rec.direction {
                x[axis as usize - 1] = sign.value();
            }
            for (i, &xi) in x.iter().enumerate().take(d) {
                s.position[i] += xi;
                s.position_real[i] += xi as f64 * rec.size;
                s.axis_visits[i] += (xi * xi) as u64;
            }
            s.moves += match variant {
                Variant::Stops => x.iter().map(|v| (v * v) as u64).sum::<u64>(),
                Variant::RandomSteps => (rec.size != 0.0) as u64,
            };
        }
        s
    }

    fn check_invariants(trace: &WalkTrace) {
        let mut last = 0;
        for snap in &trace.snapshots {
            let n = snap.step as u64;
            assert_eq!(snap.moves + snap.delays(), n);
            assert!(snap.moves >= 1 && snap.moves <= n);
            assert!(snap.moves >= last);
            last = snap.moves;
            assert!(snap.position.iter().map(|x| x.unsigned_abs()).sum::<u64>() <= n);
            let visits: u64 = snap.axis_visits.iter().sum();
            match trace.variant {
                Variant::Stops => assert_eq!(visits, snap.moves),
                Variant::RandomSteps => assert_eq!(visits, n),
            }
        }
    }

    #[test]
    fn checkpoint_validation() {
        assert!(matches!(
            Checkpoints::new(vec![0, 3], 5),
            Err(WalkError::CheckpointOutOfRange { k: 0, .. })
        ));
        assert!(matches!(
            Checkpoints::new(vec![6], 5),
            Err(WalkError::CheckpointOutOfRange { k: 6, .. })
        ));
        assert_eq!(
            Checkpoints::new(vec![4, 1, 4], 5).unwrap().as_slice(),
            &[1, 4]
        );
        assert_eq!(Checkpoints::powers_of_two(10).as_slice(), &[1, 2, 4, 8, 10]);
        assert_eq!(Checkpoints::powers_of_two(8).as_slice(), &[1, 2, 4, 8]);
        assert!(Checkpoints::dense(5).is_dense_to(5));
        assert!(!Checkpoints::powers_of_two(10).is_dense_to(3));
        let mut rng = seed_stream(0, 0);
        let p = params(2, 0.5, 0.0);
        assert!(matches!(
            simulate_stops(&p, 0, &Checkpoints::dense(1), &mut rng),
            Err(WalkError::ZeroLength)
        ));
        assert!(matches!(
            simulate_stops(&p, 3, &Checkpoints::dense(5), &mut rng),
            Err(WalkError::CheckpointOutOfRange { k: 5, n: 3 })
        ));
    }

    #[test]
    fn no_rest_means_every_step_moves() {
        for d in 1..5 {
            let mut rng = seed_stream(1, d as u64);
            let t = simulate_stops(
                &params(d, 0.3, 0.0),
                100,
                &Checkpoints::powers_of_two(100),
                &mut rng,
            )
            .unwrap();
            assert_eq!(t.path_statistics(100).unwrap().moves, 100);
            check_invariants(&t);
        }
    }

    #[test]
    fn always_resting_walker_stays_after_first_step() {
        let mut rng = seed_stream(2, 0);
        let t =
            simulate_stops(&params(2, 0.0, 1.0), 50, &Checkpoints::dense(50), &mut rng).unwrap();
        let first = t.path_statistics(1).unwrap().clone();
        let last = t.path_statistics(50).unwrap();
        assert_eq!(last.moves, 1);
        assert_eq!(last.position, first.position);
        assert_eq!(first.position.iter().map(|x| x.abs()).sum::<i64>(), 1);
    }

    #[test]
    fn direct_count_example() {
        // +e1, +e1, -e2 in d = 2
        let steps = [
            StepRecord {
                direction: UnitStep::Axis {
                    axis: 1,
                    sign: Sign::Plus,
                },
                size: 1.0,
            },
            StepRecord {
                direction: UnitStep::Axis {
                    axis: 1,
                    sign: Sign::Plus,
                },
                size: 1.0,
            },
            StepRecord {
                direction: UnitStep::Axis {
                    axis: 2,
                    sign: Sign::Minus,
                },
                size: 1.0,
            },
        ];
        let s = rescan(&steps, 3, 2, Variant::Stops);
        assert_eq!(s.position, vec![2, -1]);
        assert_eq!(s.axis_visits, vec![2, 1]);
        assert_eq!(s.moves, 3);
    }

    #[test]
    fn stored_aggregates_match_rescan() {
        for seed in 0..20 {
            let mut rng = seed_stream(seed, 0);
            let t = Walker::stops(params(3, 0.3, 0.25))
                .run(30, &Checkpoints::dense(30), true, &mut rng)
                .unwrap();
            let steps = t.steps.as_ref().unwrap();
            assert_eq!(t.path_statistics(1).unwrap().moves, 1);
            for k in 1..=30 {
                assert_eq!(
                    t.path_statistics(k).unwrap(),
                    &rescan(steps, k, 3, Variant::Stops)
                );
            }
            check_invariants(&t);

            let sizes = StepSizeModel::from_later(SizeLaw::Exponential { rate: 1.5 }).unwrap();
            let w = Walker::random_steps(params(3, 0.6, 0.0), &sizes).unwrap();
            let t = w.run(30, &Checkpoints::dense(30), true, &mut rng).unwrap();
            let steps = t.steps.as_ref().unwrap();
            for k in 1..=30 {
                let got = t.path_statistics(k).unwrap();
                let want = rescan(steps, k, 3, Variant::RandomSteps);
                assert_eq!(got.moves, want.moves);
                assert_eq!(got.position, want.position);
                assert_eq!(got.axis_visits, want.axis_visits);
                for (a, b) in got.position_real.iter().zip(&want.position_real) {
                    assert!((a - b).abs() <= 1e-12 * (1.0 + b.abs()));
                }
            }
        }
    }

    #[test]
    fn unit_sizes_reproduce_the_lattice_walk() {
        let sizes = StepSizeModel::constant(1.0).unwrap();
        let p = params(2, 0.6, 0.0);
        let cps = Checkpoints::powers_of_two(500);
        let a = simulate_random_steps(&p, &sizes, 500, &cps, &mut seed_stream(4, 0)).unwrap();
        let b = simulate_stops(&p, 500, &cps, &mut seed_stream(4, 0)).unwrap();
        for (x, y) in a.snapshots.iter().zip(&b.snapshots) {
            assert_eq!(x.moves, x.step as u64);
            let w: Vec<f64> = x.position.iter().map(|&v| v as f64).collect();
            assert_eq!(x.position_real, w);
            assert_eq!(x.position, y.position);
        }
    }

    #[test]
    fn repeating_walker_in_one_dimension() {
        let sizes = StepSizeModel::constant(1.0).unwrap();
        let t = simulate_random_steps(
            &params(1, 1.0, 0.0),
            &sizes,
            10,
            &Checkpoints::dense(10),
            &mut seed_stream(8, 0),
        )
        .unwrap();
        let x1 = t.path_statistics(1).unwrap().position_real[0];
        assert_eq!(t.path_statistics(10).unwrap().position_real[0], 10.0 * x1);
    }

    #[test]
    fn random_steps_rejects_rest_probability() {
        let sizes = StepSizeModel::constant(1.0).unwrap();
        assert!(matches!(
            Walker::random_steps(params(2, 0.4, 0.3), &sizes),
            Err(WalkError::Model(ModelError::RestInRandomSteps(_)))
        ));
    }

    #[test]
    fn zero_inflated_move_fraction() {
        let sizes = StepSizeModel::from_later(SizeLaw::ZeroInflated {
            zero_prob: 0.5,
            value: 1.0,
        })
        .unwrap();
        let n = 10_000;
        let mut ok = 0;
        for seed in 0..100 {
            let t = simulate_random_steps(
                &params(2, 0.5, 0.0),
                &sizes,
                n,
                &Checkpoints::powers_of_two(n),
                &mut seed_stream(seed, 0),
            )
            .unwrap();
            check_invariants(&t);
            let frac = t.last().moves as f64 / n as f64;
            if (frac - 0.5).abs() <= 5.0 * (0.25f64 / n as f64).sqrt() * 3.0 {
                ok += 1;
            }
        }
        assert!(ok >= 99);
    }

    #[test]
    fn second_step_law_in_one_dimension() {
        let p = params(1, 0.5, 0.2);
        let n = 1_000_000;
        let mut rng = seed_stream(12, 0);
        let (mut same, mut flip, mut rest) = (0u64, 0u64, 0u64);
        for _ in 0..n {
            let mut w = Walker::stops(p);
            let x1 = w.step(&mut rng).unwrap().direction;
            let x2 = w.step(&mut rng).unwrap().direction;
            match x2 {
                UnitStep::Zero => rest += 1,
                x if x == x1 => same += 1,
                _ => flip += 1,
            }
        }
        for (count, prob) in [(same, 0.5), (flip, 0.3), (rest, 0.2)] {
            let f = count as f64 / n as f64;
            assert!(
                (f - prob).abs() <= 4.0 * (prob * (1.0 - prob) / n as f64).sqrt(),
                "{f} vs {prob}"
            );
        }
    }

    #[test]
    fn same_seed_same_trace() {
        let p = params(3, 0.4, 0.1);
        let cps = Checkpoints::powers_of_two(1000);
        let a = simulate_stops(&p, 1000, &cps, &mut seed_stream(99, 5)).unwrap();
        let b = simulate_stops(&p, 1000, &cps, &mut seed_stream(99, 5)).unwrap();
        assert_eq!(a.snapshots, b.snapshots);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]
        #[test]
        fn trace_invariants_hold(d in 1usize..5, p in 0.0f64..1.0, r in 0.0f64..1.0, seed: u64, n in 1usize..400) {
            let r = r * (1.0 - p);
            let t = simulate_stops(&params(d, p, r), n, &Checkpoints::dense(n), &mut seed_stream(seed, 0)).unwrap();
            check_invariants(&t);
            // one-step increments of the move count are 0 or 1
            for w in t.snapshots.windows(2) {
                prop_assert!(w[1].moves - w[0].moves <= 1);
            }
        }
    }
}
