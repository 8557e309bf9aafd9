//! Second-moment dynamics of the kicked, damped resonator.
//!
//! The state is the vector `v = (σ_q, σ_qp, σ_p)` of a zero-mean Gaussian
//! state. Between kicks it obeys the linear drift `v̇ = B v + b`; a kick of
//! strength θ maps `v → K(θ) v`. One period of duration τ is kick first, then
//! free evolution: `v ← M(τ) K v + v_inh(τ)`.

use nalgebra::{Matrix2, Matrix3, Matrix4, Vector3};

use crate::error::{invalid, Error, Result};
use crate::expm::matrix_exponential;
use crate::metrics::min_quadrature_variance;

/// Tolerance on the uncertainty relation `σ_q σ_p − σ_qp² ≥ 1/4`.
pub const UNCERTAINTY_TOLERANCE: f64 = 1e-9;

/// Mechanical resonator and bath parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MechanicalParams {
    omega_m: f64,
    gamma_m: f64,
    n_bar: f64,
}

impl MechanicalParams {
    pub fn new(omega_m: f64, gamma_m: f64, n_bar: f64) -> Result<Self> {
        if !(omega_m.is_finite() && omega_m > 0.0) {
            return Err(invalid(
                "omega_m",
                format!("must be finite and > 0, got {omega_m}"),
            ));
        }
        if !(gamma_m.is_finite() && gamma_m >= 0.0) {
            return Err(invalid(
                "gamma_m",
                format!("must be finite and >= 0, got {gamma_m}"),
            ));
        }
        if !(n_bar.is_finite() && n_bar >= 0.0) {
            return Err(invalid(
                "n_bar",
                format!("must be finite and >= 0, got {n_bar}"),
            ));
        }
        Ok(Self {
            omega_m,
            gamma_m,
            n_bar,
        })
    }

    /// Resonance angular frequency (rad/s).
    pub fn omega_m(&self) -> f64 {
        self.omega_m
    }

    /// Damping rate (1/s).
    pub fn gamma_m(&self) -> f64 {
        self.gamma_m
    }

    /// Mean thermal phonon number of the bath.
    pub fn n_bar(&self) -> f64 {
        self.n_bar
    }

    /// Thermal equilibrium moments `(n̄+½, 0, n̄+½)`.
    pub fn thermal_state(&self) -> MomentVector {
        let s = self.n_bar + 0.5;
        MomentVector::new_unchecked(s, 0.0, s)
    }
}

/// Second moments `σ_q = ⟨q²⟩`, `σ_qp = ⟨qp+pq⟩/2`, `σ_p = ⟨p²⟩`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MomentVector {
    pub sigma_q: f64,
    pub sigma_qp: f64,
    pub sigma_p: f64,
}

impl MomentVector {
    /// Builds a validated state (positive variances, uncertainty relation).
    pub fn new(sigma_q: f64, sigma_qp: f64, sigma_p: f64) -> Result<Self> {
        let v = Self::new_unchecked(sigma_q, sigma_qp, sigma_p);
        v.validate()?;
        Ok(v)
    }

    pub const fn new_unchecked(sigma_q: f64, sigma_qp: f64, sigma_p: f64) -> Self {
        Self {
            sigma_q,
            sigma_qp,
            sigma_p,
        }
    }

    pub fn vacuum() -> Self {
        Self::new_unchecked(0.5, 0.0, 0.5)
    }

    /// `σ_q σ_p − σ_qp²`, a quarter of the covariance-matrix determinant scale.
    pub fn determinant(&self) -> f64 {
        self.sigma_q * self.sigma_p - self.sigma_qp * self.sigma_qp
    }

    pub fn is_finite(&self) -> bool {
        self.sigma_q.is_finite() && self.sigma_qp.is_finite() && self.sigma_p.is_finite()
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |reason| Error::NonPhysical {
            sigma_q: self.sigma_q,
            sigma_qp: self.sigma_qp,
            sigma_p: self.sigma_p,
            reason,
        };
        if !self.is_finite() {
            return Err(fail("non-finite moment"));
        }
        if self.sigma_q <= 0.0 || self.sigma_p <= 0.0 {
            return Err(fail("variances must be positive"));
        }
        if self.determinant() < 0.25 - UNCERTAINTY_TOLERANCE {
            return Err(fail("violates the uncertainty relation"));
        }
        Ok(())
    }

    pub fn to_vector(self) -> Vector3<f64> {
        Vector3::new(self.sigma_q, self.sigma_qp, self.sigma_p)
    }

    pub fn from_vector(v: &Vector3<f64>) -> Self {
        Self::new_unchecked(v[0], v[1], v[2])
    }
}

/// Linear drift `v̇ = B v + b` of the second moments between kicks.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DriftModel {
    pub params: MechanicalParams,
    pub matrix: Matrix3<f64>,
    pub source: Vector3<f64>,
}

impl DriftModel {
    pub fn new(params: &MechanicalParams) -> Self {
        let w = params.omega_m;
        let g = params.gamma_m;
        #[rustfmt::skip]
        let matrix = Matrix3::new(
            0.0,       2.0 * w,  0.0,
            -w,        -g,       w,
            0.0,       -2.0 * w, -2.0 * g,
        );
        let source = Vector3::new(0.0, 0.0, g * (2.0 * params.n_bar + 1.0));
        Self {
            params: *params,
            matrix,
            source,
        }
    }

    /// Free-evolution propagator over `duration` seconds.
    ///
    /// `M` and `v_inh` come from one exponential of the augmented generator
    /// `[[B, b], [0, 0]]`, whose top-right column is `∫₀ᵗ e^{Bs} b ds`. That
    /// column carries rounding of order `ε ω t` from scaling and squaring,
    /// while `(I − M) v_th` is off by about `ε / γt` relative to `v_inh`; the
    /// second route is taken once it is the more accurate one. It also keeps
    /// the thermal state fixed to rounding.
    pub fn propagator(&self, duration: f64) -> Result<Propagator> {
        if !(duration.is_finite() && duration >= 0.0) {
            return Err(invalid(
                "duration",
                format!("must be finite and >= 0, got {duration}"),
            ));
        }
        let mut augmented = Matrix4::zeros();
        augmented
            .fixed_view_mut::<3, 3>(0, 0)
            .copy_from(&self.matrix);
        augmented
            .fixed_view_mut::<3, 1>(0, 3)
            .copy_from(&self.source);
        let e = matrix_exponential(&augmented, duration)?;
        let transfer = e.fixed_view::<3, 3>(0, 0).into_owned();
        let (w, g) = (self.params.omega_m, self.params.gamma_m);
        let inhomogeneous = if w.max(g) * duration * (g * duration).min(1.0) >= 1.0 {
            (Matrix3::identity() - transfer) * self.params.thermal_state().to_vector()
        } else {
            e.fixed_view::<3, 1>(0, 3).into_owned()
        };
        Ok(Propagator {
            duration,
            transfer,
            inhomogeneous,
        })
    }

    /// `(I − M) v_th`: the inhomogeneous term obtained from the thermal fixed
    /// point.
    pub fn inhomogeneous_via_thermal(&self, propagator: &Propagator) -> Vector3<f64> {
        let v_th = self.params.thermal_state().to_vector();
        (Matrix3::identity() - propagator.transfer) * v_th
    }
}

/// Free evolution `v(t) = M(t) v(0) + v_inh(t)` for a fixed duration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Propagator {
    pub duration: f64,
    pub transfer: Matrix3<f64>,
    pub inhomogeneous: Vector3<f64>,
}

impl Propagator {
    pub fn apply(&self, v: &MomentVector) -> MomentVector {
        MomentVector::from_vector(&(self.transfer * v.to_vector() + self.inhomogeneous))
    }
}

/// Covariance action of the kick unitary `exp(iθq²)`: `q → q`, `p → p − 2θq`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KickMap {
    pub theta: f64,
    pub matrix: Matrix3<f64>,
}

impl KickMap {
    pub fn new(theta: f64) -> Self {
        #[rustfmt::skip]
        let matrix = Matrix3::new(
            1.0,                 0.0,          0.0,
            -2.0 * theta,        1.0,          0.0,
            4.0 * theta * theta, -4.0 * theta, 1.0,
        );
        Self { theta, matrix }
    }

    pub fn apply(&self, v: &MomentVector) -> MomentVector {
        let t = self.theta;
        MomentVector::new_unchecked(
            v.sigma_q,
            v.sigma_qp - 2.0 * t * v.sigma_q,
            v.sigma_p - 4.0 * t * v.sigma_qp + 4.0 * t * t * v.sigma_q,
        )
    }
}

/// One full period: kick at the start, then free evolution for τ.
#[derive(Debug, Clone, PartialEq)]
pub struct CycleMap {
    pub tau: f64,
    pub drift: DriftModel,
    pub kick: KickMap,
    pub free: Propagator,
    /// `A = M(τ) K`.
    pub step: Matrix3<f64>,
    /// Phase-space map `T = e^{Fτ} S_θ` of one period; `A v` is `T Σ Tᵀ`.
    phase_step: Matrix2<f64>,
    spectral_radius: f64,
}

impl CycleMap {
    pub fn new(params: &MechanicalParams, tau: f64, theta: f64) -> Result<Self> {
        if !(tau.is_finite() && tau > 0.0) {
            return Err(invalid("tau", format!("must be finite and > 0, got {tau}")));
        }
        if !theta.is_finite() {
            return Err(invalid("theta", format!("must be finite, got {theta}")));
        }
        let drift = DriftModel::new(params);
        let free = drift.propagator(tau)?;
        Ok(Self::from_parts(drift, KickMap::new(theta), free))
    }

    /// Assembles a cycle from a precomputed free propagator.
    pub fn from_parts(drift: DriftModel, kick: KickMap, free: Propagator) -> Self {
        let (w, g) = (drift.params.omega_m, drift.params.gamma_m);
        let flow = Matrix2::new(0.0, w, -w, -g);
        let shear = Matrix2::new(1.0, 0.0, -2.0 * kick.theta, 1.0);
        // The same exponential already succeeded in 3×3 form.
        let phase_step = matrix_exponential(&flow, free.duration)
            .expect("finite generator and duration")
            * shear;
        let step = free.transfer * kick.matrix;
        let spectral_radius = spectral_radius(&step);
        Self {
            tau: free.duration,
            drift,
            kick,
            free,
            step,
            phase_step,
            spectral_radius,
        }
    }

    pub fn theta(&self) -> f64 {
        self.kick.theta
    }

    pub fn params(&self) -> &MechanicalParams {
        &self.drift.params
    }

    /// Largest eigenvalue modulus of `A`.
    pub fn spectral_radius(&self) -> f64 {
        self.spectral_radius
    }

    /// One period: `v ← A v + v_inh`.
    #[inline]
    pub fn advance(&self, v: &MomentVector) -> MomentVector {
        MomentVector::from_vector(&(self.step * v.to_vector() + self.free.inhomogeneous))
    }

    /// Iterates the map `n_kicks` times from `v0`, calling `visit` with every
    /// state including index 0. Aborts on the first non-finite state.
    pub fn walk(
        &self,
        v0: &MomentVector,
        n_kicks: u64,
        mut visit: impl FnMut(u64, &MomentVector),
    ) -> Result<MomentVector> {
        visit(0, v0);
        let mut v = *v0;
        for n in 1..=n_kicks {
            v = self.advance(&v);
            if !v.is_finite() {
                return Err(Error::Divergence { kick_index: n });
            }
            visit(n, &v);
        }
        Ok(v)
    }

    /// Iterates the map `n_kicks` times from `v0`.
    ///
    /// Records index 0, every `sample_stride`-th index and always the final
    /// state. Index `n` is the state just before kick `n + 1`.
    pub fn evolve(
        &self,
        v0: &MomentVector,
        n_kicks: u64,
        sample_stride: u64,
    ) -> Result<Vec<(u64, MomentVector)>> {
        if sample_stride == 0 {
            return Err(invalid("sample_stride", "must be >= 1"));
        }
        let mut out = Vec::with_capacity((n_kicks / sample_stride + 2) as usize);
        self.walk(v0, n_kicks, |n, v| {
            if n % sample_stride == 0 || n == n_kicks {
                out.push((n, *v));
            }
        })?;
        Ok(out)
    }

    /// First index from which every state up to `n_kicks` is squeezed below
    /// vacuum, or `None` if the state at `n_kicks` is not squeezed.
    pub fn squeezing_onset(&self, v0: &MomentVector, n_kicks: u64) -> Result<Option<u64>> {
        let mut onset = None;
        self.walk(v0, n_kicks, |n, v| {
            if min_quadrature_variance(v) < 0.5 {
                onset.get_or_insert(n);
            } else {
                onset = None;
            }
        })?;
        Ok(onset)
    }

    /// Closed form `Aⁿ v0 + (I − Aⁿ)(I − A)⁻¹ v_inh`.
    ///
    /// Evaluated on 2×2 covariance matrices: `A` acts as `Σ → T Σ Tᵀ`, so the
    /// result is `Tⁿ Σ₀ Tⁿᵀ + Σ_{k<n} Tᵏ D Tᵏᵀ` with `D` the matrix of
    /// `v_inh`, built up by binary doubling. Powers of the 2×2 `T` stay far
    /// more accurate than powers of `A` when `A` is strongly non-normal. No
    /// inverse is formed, so `I − A` may be ill-conditioned or singular
    /// (undamped motion always leaves A with an eigenvalue 1).
    pub fn closed_form(&self, v0: &MomentVector, n: u64) -> Result<MomentVector> {
        let cov = |v: &Vector3<f64>| -> Matrix2<f64> { Matrix2::new(v.x, v.y, v.y, v.z) };
        // (Tᵐ, Σ_{k<m} Tᵏ D Tᵏᵀ) for the bits consumed so far and for the
        // current block of length 2ʲ.
        let (mut pow, mut sum) = (Matrix2::<f64>::identity(), Matrix2::zeros());
        let (mut block_pow, mut block_sum) = (self.phase_step, cov(&self.free.inhomogeneous));
        let mut bits = n;
        while bits > 0 {
            if bits & 1 == 1 {
                sum += pow * block_sum * pow.transpose();
                pow *= block_pow;
            }
            block_sum += block_pow * block_sum * block_pow.transpose();
            block_pow *= block_pow;
            bits >>= 1;
        }
        let s = pow * cov(&v0.to_vector()) * pow.transpose() + sum;
        let v = MomentVector::new_unchecked(s[(0, 0)], 0.5 * (s[(0, 1)] + s[(1, 0)]), s[(1, 1)]);
        if v.is_finite() {
            Ok(v)
        } else {
            Err(Error::NonFinite)
        }
    }

    /// Samples `M(s)(K v) + v_inh(s)` at `s = jτ/(n−1)`, `j = 0..n`.
    ///
    /// `v_at_kick` is the state just before the kick; the last sample is the
    /// next stroboscopic state.
    pub fn intra_period_trace(
        &self,
        v_at_kick: &MomentVector,
        n_samples: usize,
    ) -> Result<Vec<(f64, MomentVector)>> {
        if n_samples < 2 {
            return Err(invalid("n_samples", "must be >= 2"));
        }
        let kicked = self.kick.apply(v_at_kick);
        let last = n_samples - 1;
        (0..n_samples)
            .map(|j| {
                let s = if j == last {
                    self.tau
                } else {
                    self.tau * j as f64 / last as f64
                };
                let prop = if j == last {
                    self.free
                } else {
                    self.drift.propagator(s)?
                };
                Ok((s, prop.apply(&kicked)))
            })
            .collect()
    }

    /// Stationary stroboscopic state `(I − A)⁻¹ v_inh`.
    pub fn steady_state(&self) -> Result<MomentVector> {
        #[allow(clippy::neg_cmp_op_on_partial_ord)] // NaN must fail
        if !(self.spectral_radius < 1.0) {
            return Err(Error::NoStationaryState {
                spectral_radius: self.spectral_radius,
            });
        }
        let system = Matrix3::identity() - self.step;
        let lu = system.lu();
        let b = &self.free.inhomogeneous;
        let mut x = lu.solve(b).ok_or(Error::Singular)?;
        // One round of iterative refinement for strongly kicked maps, where
        // ‖A‖ reaches 10³–10⁴.
        if let Some(dx) = lu.solve(&(b - system * x)) {
            x += dx;
        }
        Ok(MomentVector::from_vector(&x))
    }

    /// Cross-check mode: iterate until the relative change over one period is
    /// at most `rel_tol`, or `max_kicks` is reached. Returns the state and the
    /// number of periods taken.
    pub fn iterate_to_convergence(
        &self,
        v0: &MomentVector,
        rel_tol: f64,
        max_kicks: u64,
    ) -> Result<(MomentVector, u64)> {
        let mut v = *v0;
        for n in 1..=max_kicks {
            let next = self.advance(&v);
            if !next.is_finite() {
                return Err(Error::Divergence { kick_index: n });
            }
            let change = (next.to_vector() - v.to_vector()).norm();
            v = next;
            if change <= rel_tol * v.to_vector().norm() {
                return Ok((v, n));
            }
        }
        Ok((v, max_kicks))
    }
}

/// Largest modulus among the eigenvalues of a real 3×3 matrix.
pub fn spectral_radius(m: &Matrix3<f64>) -> f64 {
    m.complex_eigenvalues()
        .iter()
        .map(|z| z.norm())
        .fold(0.0, f64::max)
}
