//! Monte-Carlo robustness against kick-to-kick fluctuations of θ.
//!
//! Every kick draws `θₙ ~ Normal(mean, variance)`. Trajectory `i` of an
//! ensemble uses its own ChaCha8 stream seeded with [`trajectory_seed`], so
//! results do not depend on scheduling or thread count. Aggregation runs in
//! trajectory-index order after all trajectories finish.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;

use crate::error::{invalid, Error, Result};
use crate::metrics::StateMetrics;
use crate::moments::{CycleMap, KickMap, MechanicalParams, MomentVector};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KickNoiseModel {
    pub mean_theta: f64,
    /// Variance (not standard deviation) of θ.
    pub variance: f64,
}

impl KickNoiseModel {
    pub fn new(mean_theta: f64, variance: f64) -> Result<Self> {
        if !mean_theta.is_finite() {
            return Err(invalid("mean_theta", "must be finite"));
        }
        if !(variance.is_finite() && variance >= 0.0) {
            return Err(invalid(
                "variance",
                format!("must be finite and >= 0, got {variance}"),
            ));
        }
        Ok(Self {
            mean_theta,
            variance,
        })
    }

    /// Endless stream of kick strengths for one trajectory seed.
    pub fn draws(&self, seed: u64) -> impl Iterator<Item = f64> {
        let dist =
            Normal::new(self.mean_theta, self.variance.sqrt()).expect("validated parameters");
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        std::iter::repeat_with(move || dist.sample(&mut rng))
    }
}

/// Sub-seed for trajectory `index`: the `index`-th output of a SplitMix64
/// generator started at `base_seed`.
pub fn trajectory_seed(base_seed: u64, index: u64) -> u64 {
    let mut z = base_seed.wrapping_add(index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrajectorySample {
    pub kick_index: u64,
    pub moments: MomentVector,
    pub metrics: StateMetrics,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryResult {
    pub seed: u64,
    pub samples: Vec<TrajectorySample>,
}

/// Stroboscopic run with a freshly drawn θ at every kick.
///
/// The free propagator is built once; the per-kick step is `M(τ) K(θₙ)`, which
/// reproduces the deterministic cycle map exactly when the variance is zero.
pub struct NoisyCycle {
    cycle: CycleMap,
    noise: KickNoiseModel,
}

impl NoisyCycle {
    pub fn new(params: &MechanicalParams, tau: f64, noise: KickNoiseModel) -> Result<Self> {
        Ok(Self {
            cycle: CycleMap::new(params, tau, noise.mean_theta)?,
            noise,
        })
    }

    pub fn cycle(&self) -> &CycleMap {
        &self.cycle
    }

    /// Runs one trajectory from the thermal state, calling `record` on every
    /// sampled index (0, multiples of `stride`, and the final index).
    fn run_with(
        &self,
        n_kicks: u64,
        stride: u64,
        seed: u64,
        mut record: impl FnMut(u64, &MomentVector),
    ) -> Result<()> {
        if stride == 0 {
            return Err(invalid("stride", "must be >= 1"));
        }
        let mut thetas = self.noise.draws(seed);
        let free = &self.cycle.free;
        let mut v = self.cycle.params().thermal_state();
        record(0, &v);
        for n in 1..=n_kicks {
            let theta = thetas.next().expect("endless stream");
            let step = free.transfer * KickMap::new(theta).matrix;
            v = MomentVector::from_vector(&(step * v.to_vector() + free.inhomogeneous));
            if !v.is_finite() {
                return Err(Error::Divergence { kick_index: n });
            }
            if n % stride == 0 || n == n_kicks {
                record(n, &v);
            }
        }
        Ok(())
    }

    pub fn trajectory(&self, n_kicks: u64, stride: u64, seed: u64) -> Result<TrajectoryResult> {
        let mut samples = Vec::with_capacity((n_kicks / stride.max(1) + 2) as usize);
        let mut failure = None;
        self.run_with(n_kicks, stride, seed, |kick_index, v| {
            if failure.is_some() {
                return;
            }
            match StateMetrics::from_moments(v) {
                Ok(metrics) => samples.push(TrajectorySample {
                    kick_index,
                    moments: *v,
                    metrics,
                }),
                Err(e) => failure = Some(e),
            }
        })?;
        if let Some(e) = failure {
            return Err(e);
        }
        Ok(TrajectoryResult { seed, samples })
    }
}

/// Single noisy trajectory starting from the thermal state.
pub fn run_trajectory(
    params: &MechanicalParams,
    tau: f64,
    noise: KickNoiseModel,
    n_kicks: u64,
    stride: u64,
    seed: u64,
) -> Result<TrajectoryResult> {
    NoisyCycle::new(params, tau, noise)?.trajectory(n_kicks, stride, seed)
}

/// Per-sample ensemble statistics. Standard deviations are population values.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnsembleRow {
    pub kick_index: u64,
    pub sigma_min_mean: f64,
    pub sigma_min_std: f64,
    /// `10 log10(2 ⟨σ_min⟩)`: variances averaged first.
    pub squeezing_db_of_mean: f64,
    /// `⟨10 log10(2 σ_min)⟩`: dB values averaged.
    pub squeezing_db_mean: f64,
    pub squeezing_db_std: f64,
    pub purity_mean: f64,
    pub purity_std: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleStats {
    pub trajectories: usize,
    pub base_seed: u64,
    pub rows: Vec<EnsembleRow>,
}

impl EnsembleStats {
    pub fn last(&self) -> &EnsembleRow {
        self.rows.last().expect("index 0 is always sampled")
    }
}

#[derive(Clone, Copy)]
struct Compact {
    sigma_min: f64,
    db: f64,
    purity: f64,
}

/// Runs `n_traj` independent noisy trajectories and aggregates them per
/// sampled kick index.
pub fn run_ensemble(
    params: &MechanicalParams,
    tau: f64,
    noise: KickNoiseModel,
    n_kicks: u64,
    stride: u64,
    n_traj: usize,
    base_seed: u64,
) -> Result<EnsembleStats> {
    if n_traj == 0 {
        return Err(invalid("n_traj", "must be >= 1"));
    }
    let runner = NoisyCycle::new(params, tau, noise)?;
    let per_traj: Vec<Result<(Vec<u64>, Vec<Compact>)>> = (0..n_traj as u64)
        .into_par_iter()
        .map(|i| {
            let seed = trajectory_seed(base_seed, i);
            let mut index = Vec::new();
            let mut compact = Vec::new();
            let mut failure = None;
            runner.run_with(n_kicks, stride, seed, |k, v| {
                if failure.is_some() {
                    return;
                }
                match StateMetrics::from_moments(v) {
                    Ok(m) => {
                        index.push(k);
                        compact.push(Compact {
                            sigma_min: m.sigma_min,
                            db: m.squeezing_db,
                            purity: m.purity,
                        });
                    }
                    Err(e) => failure = Some(e),
                }
            })?;
            match failure {
                Some(e) => Err(e),
                None => Ok((index, compact)),
            }
        })
        .collect();

    let mut trajectories = Vec::with_capacity(n_traj);
    for r in per_traj {
        trajectories.push(r?);
    }
    let kick_indices = trajectories[0].0.clone();
    let n = n_traj as f64;
    let rows = kick_indices
        .iter()
        .enumerate()
        .map(|(j, &kick_index)| {
            let column = || trajectories.iter().map(|(_, c)| c[j]);
            let (sm, sm_sd) = mean_std(column().map(|c| c.sigma_min), n);
            let (db, db_sd) = mean_std(column().map(|c| c.db), n);
            let (pu, pu_sd) = mean_std(column().map(|c| c.purity), n);
            EnsembleRow {
                kick_index,
                sigma_min_mean: sm,
                sigma_min_std: sm_sd,
                squeezing_db_of_mean: 10.0 * (2.0 * sm).log10(),
                squeezing_db_mean: db,
                squeezing_db_std: db_sd,
                purity_mean: pu,
                purity_std: pu_sd,
            }
        })
        .collect();
    Ok(EnsembleStats {
        trajectories: n_traj,
        base_seed,
        rows,
    })
}

/// Mean and population standard deviation in iteration order, shifted by
/// the first element so identical inputs give exactly zero spread.
fn mean_std<I: Iterator<Item = f64> + Clone>(xs: I, n: f64) -> (f64, f64) {
    let first = xs.clone().next().unwrap_or(0.0);
    let mean = first + xs.clone().map(|x| x - first).sum::<f64>() / n;
    let var = xs.map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}
