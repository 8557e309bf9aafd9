//! Observables derived from a moment vector.

use crate::error::{Error, Result};
use crate::moments::{MomentVector, UNCERTAINTY_TOLERANCE};

/// Purity may exceed one by this much before the state is rejected.
pub const PURITY_TOLERANCE: f64 = 1e-9;

/// Below this distance from unit purity the entropy uses its series form.
const ENTROPY_SERIES_THRESHOLD: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StateMetrics {
    /// Minimum quadrature variance over all phases.
    pub sigma_min: f64,
    /// Phase of the minimum-variance quadrature, in (−π/2, π/2].
    pub phi_min: f64,
    /// `10 log10(2 σ_min)`; negative means squeezed below vacuum.
    pub squeezing_db: f64,
    pub purity: f64,
    /// Von Neumann entropy in nats.
    pub entropy: f64,
    /// `(σ_q + σ_p − 1)/2`.
    pub n_eff: f64,
}

impl StateMetrics {
    pub fn from_moments(v: &MomentVector) -> Result<Self> {
        let nonphysical = |reason| Error::NonPhysical {
            sigma_q: v.sigma_q,
            sigma_qp: v.sigma_qp,
            sigma_p: v.sigma_p,
            reason,
        };
        if !v.is_finite() {
            return Err(nonphysical("non-finite moment"));
        }
        let det = v.determinant();
        #[allow(clippy::neg_cmp_op_on_partial_ord)] // NaN must fail
        if !(det >= 0.25 - UNCERTAINTY_TOLERANCE) || v.sigma_q <= 0.0 {
            return Err(nonphysical("violates the uncertainty relation"));
        }
        let purity = 1.0 / (4.0 * det).sqrt();
        if purity > 1.0 + PURITY_TOLERANCE {
            return Err(nonphysical("purity exceeds one"));
        }

        let sigma_min = min_quadrature_variance(v);
        Ok(Self {
            sigma_min,
            phi_min: min_variance_phase(v),
            squeezing_db: 10.0 * (2.0 * sigma_min).log10(),
            purity,
            entropy: entropy_from_purity(purity),
            n_eff: (v.sigma_p + v.sigma_q - 1.0) / 2.0,
        })
    }
}

/// `½[σ_p + σ_q − √((σ_p − σ_q)² + 4σ_qp²)]`.
pub fn min_quadrature_variance(v: &MomentVector) -> f64 {
    let diff = v.sigma_p - v.sigma_q;
    0.5 * (v.sigma_p + v.sigma_q - diff.hypot(2.0 * v.sigma_qp))
}

/// Variance of `q cos φ + p sin φ`.
pub fn quadrature_variance(v: &MomentVector, phi: f64) -> f64 {
    let (s, c) = phi.sin_cos();
    v.sigma_q * c * c + v.sigma_p * s * s + 2.0 * v.sigma_qp * s * c
}

/// Phase minimizing [`quadrature_variance`], folded into (−π/2, π/2].
/// Isotropic states return 0.
pub fn min_variance_phase(v: &MomentVector) -> f64 {
    let y = -2.0 * v.sigma_qp;
    // atan2(-0.0, x<0) = -π would land outside the half-open range
    let y = if y == 0.0 { 0.0 } else { y };
    0.5 * y.atan2(v.sigma_p - v.sigma_q)
}

/// Entropy (nats) of a single-mode Gaussian state with purity `p`:
/// `[(1−P)/2P] ln[(1+P)/(1−P)] − ln[2P/(1+P)]`.
pub fn entropy_from_purity(p: f64) -> f64 {
    let eps = (1.0 - p).max(0.0);
    if eps == 0.0 {
        return 0.0;
    }
    if eps < ENTROPY_SERIES_THRESHOLD {
        // leading terms of the expansion in ε = 1 − P
        return 0.5 * eps * ((2.0 / eps).ln() + 1.0);
    }
    eps / (2.0 * p) * ((1.0 + p) / eps).ln() - (-eps / (1.0 + p)).ln_1p()
}
