//! Physical inputs to the kick model.
//!
//! Derives the quadratic coupling `g₂`, the classical intracavity amplitude
//! `α(t)` driven by a laser pulse, the resulting kick strength
//! `θ = 2 g₂ ∫ |α|² dt`, and checks the timescale hierarchy under which a
//! pulse acts as an instantaneous kick.

use std::f64::consts::PI;

use crate::error::{invalid, Error, Result};
use crate::moments::MechanicalParams;

/// Speed of light in vacuum (m/s).
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;
/// Reduced Planck constant (J·s).
pub const HBAR: f64 = 1.054_571_817e-34;
/// Boltzmann constant (J/K).
pub const BOLTZMANN: f64 = 1.380_649e-23;

/// Finest grid step allowed relative to `min(τ_p, 1/κ)`.
pub const MIN_POINTS_PER_TIMESCALE: f64 = 50.0;
/// Default grid step relative to `min(τ_p, 1/κ)`.
pub const DEFAULT_POINTS_PER_TIMESCALE: f64 = 500.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CavityParams {
    /// Cavity length (m).
    pub length: f64,
    /// Decay rate through the input mirror (1/s).
    pub kappa_0: f64,
    /// Decay rate from all other losses (1/s).
    pub kappa_loss: f64,
    /// Drive wavelength (m).
    pub wavelength: f64,
}

impl CavityParams {
    pub fn new(length: f64, kappa_0: f64, kappa_loss: f64, wavelength: f64) -> Result<Self> {
        positive("length", length)?;
        positive("kappa_0", kappa_0)?;
        if !(kappa_loss.is_finite() && kappa_loss >= 0.0) {
            return Err(invalid(
                "kappa_loss",
                format!("must be finite and >= 0, got {kappa_loss}"),
            ));
        }
        positive("wavelength", wavelength)?;
        Ok(Self {
            length,
            kappa_0,
            kappa_loss,
            wavelength,
        })
    }

    /// Single-sided cavity: all decay goes through the input mirror.
    pub fn single_sided(length: f64, kappa: f64, wavelength: f64) -> Result<Self> {
        Self::new(length, kappa, 0.0, wavelength)
    }

    /// Total decay rate `κ = κ₀ + κ_L`.
    pub fn kappa(&self) -> f64 {
        self.kappa_0 + self.kappa_loss
    }

    /// Optical angular frequency `2πc/λ`.
    pub fn omega_c(&self) -> f64 {
        2.0 * PI * SPEED_OF_LIGHT / self.wavelength
    }

    pub fn free_spectral_range(&self) -> f64 {
        SPEED_OF_LIGHT / (2.0 * self.length)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MembraneParams {
    /// kg
    pub mass: f64,
    pub reflectivity: f64,
}

impl MembraneParams {
    pub fn new(mass: f64, reflectivity: f64) -> Result<Self> {
        positive("mass", mass)?;
        if !(reflectivity.is_finite() && (0.0..1.0).contains(&reflectivity)) {
            return Err(invalid(
                "reflectivity",
                format!("must lie in [0, 1), got {reflectivity}"),
            ));
        }
        Ok(Self { mass, reflectivity })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PulseShape {
    #[default]
    Rectangular,
    /// Gaussian power envelope with FWHM equal to the pulse duration,
    /// centred at half the duration.
    Gaussian,
}

impl std::str::FromStr for PulseShape {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "rectangular" => Ok(Self::Rectangular),
            "gaussian" => Ok(Self::Gaussian),
            other => Err(format!(
                "unknown pulse shape `{other}` (rectangular|gaussian)"
            )),
        }
    }
}

impl std::fmt::Display for PulseShape {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::Rectangular => "rectangular",
            Self::Gaussian => "gaussian",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PulseSpec {
    pub shape: PulseShape,
    /// Pulse duration τ_p (s).
    pub duration: f64,
    /// W
    pub peak_power: f64,
    /// Repetition period τ (s).
    pub period: f64,
}

impl PulseSpec {
    pub fn new(shape: PulseShape, duration: f64, peak_power: f64, period: f64) -> Result<Self> {
        positive("duration", duration)?;
        positive("period", period)?;
        if duration >= period {
            return Err(invalid(
                "duration",
                format!("must be shorter than the period {period}"),
            ));
        }
        if !(peak_power.is_finite() && peak_power >= 0.0) {
            return Err(invalid(
                "peak_power",
                format!("must be finite and >= 0, got {peak_power}"),
            ));
        }
        Ok(Self {
            shape,
            duration,
            peak_power,
            period,
        })
    }

    /// Input power `P₀(t)` at time `t` after the pulse start.
    pub fn power(&self, t: f64) -> f64 {
        match self.shape {
            PulseShape::Rectangular => {
                if (0.0..self.duration).contains(&t) {
                    self.peak_power
                } else {
                    0.0
                }
            }
            PulseShape::Gaussian => {
                if t < 0.0 {
                    return 0.0;
                }
                let x = (t - self.duration / 2.0) / self.duration;
                self.peak_power * (-4.0 * std::f64::consts::LN_2 * x * x).exp()
            }
        }
    }

    /// Time after which the drive is negligible.
    fn drive_end(&self) -> f64 {
        match self.shape {
            PulseShape::Rectangular => self.duration,
            // amplitude ∝ √P is below e^-20 of peak here
            PulseShape::Gaussian => 4.5 * self.duration,
        }
    }

    /// Points where `P₀(t)` is discontinuous.
    fn breakpoints(&self) -> &'static [f64] {
        match self.shape {
            PulseShape::Rectangular => &[1.0],
            PulseShape::Gaussian => &[],
        }
    }
}

fn positive(field: &'static str, x: f64) -> Result<()> {
    if x.is_finite() && x > 0.0 {
        Ok(())
    } else {
        Err(invalid(field, format!("must be finite and > 0, got {x}")))
    }
}

/// Quadratic coupling for a membrane at a field node:
/// `g₂ = (16π² c ħ / λ² L m ω_m) √(R/(1−R))`.
pub fn coupling_g2(cavity: &CavityParams, membrane: &MembraneParams, omega_m: f64) -> Result<f64> {
    positive("omega_m", omega_m)?;
    let r = membrane.reflectivity;
    #[allow(clippy::neg_cmp_op_on_partial_ord)] // NaN must fail
    if !(r < 1.0) {
        return Err(invalid("reflectivity", "must be < 1"));
    }
    let prefactor = 16.0 * PI * PI * SPEED_OF_LIGHT * HBAR
        / (cavity.wavelength.powi(2) * cavity.length * membrane.mass * omega_m);
    Ok(prefactor * (r / (1.0 - r)).sqrt())
}

/// Drive amplitude `E₀(t) = √(2 P₀(t) κ₀ / ħω_c)` in s^-1/2.
pub fn drive_amplitude(pulse: &PulseSpec, cavity: &CavityParams, t: f64) -> f64 {
    (2.0 * pulse.power(t) * cavity.kappa_0 / (HBAR * cavity.omega_c())).sqrt()
}

/// `∫ E₀(t) dt` over one period, the quantity that fixes the kick in the
/// short-pulse limit.
pub fn pulse_area(pulse: &PulseSpec, cavity: &CavityParams, step: f64) -> f64 {
    let end = pulse.period.min(pulse.drive_end());
    let n = (end / step).ceil().max(1.0) as usize;
    let h = end / n as f64;
    let mut sum = 0.0;
    for i in 0..n {
        let a = i as f64 * h;
        sum += simpson_pieces(pulse, a, a + h, |s| drive_amplitude(pulse, cavity, s));
    }
    sum
}

/// Uniformly sampled intracavity field from `t = 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct PhotonTrace {
    pub step: f64,
    /// Real amplitude α(tᵢ) at `tᵢ = i·step` (the drive is resonant).
    pub amplitude: Vec<f64>,
    /// |α(tᵢ)|².
    pub photons: Vec<f64>,
}

impl PhotonTrace {
    /// Wraps an externally sampled |α|² sequence.
    pub fn from_photons(step: f64, photons: Vec<f64>) -> Self {
        let amplitude = photons.iter().map(|n| n.max(0.0).sqrt()).collect();
        Self {
            step,
            amplitude,
            photons,
        }
    }

    pub fn time(&self, i: usize) -> f64 {
        i as f64 * self.step
    }

    pub fn peak_photons(&self) -> f64 {
        self.photons.iter().copied().fold(0.0, f64::max)
    }

    /// Trapezoidal `∫ |α|² dt`.
    pub fn integrated_photons(&self) -> f64 {
        match self.photons.len() {
            0 | 1 => 0.0,
            n => {
                let inner: f64 = self.photons[1..n - 1].iter().sum();
                self.step * (inner + 0.5 * (self.photons[0] + self.photons[n - 1]))
            }
        }
    }
}

/// Uniform sampling grid starting at `t = 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeGrid {
    pub step: f64,
    pub end: f64,
}

impl TimeGrid {
    /// Covers the pulse and sixteen cavity lifetimes after it, clipped to one
    /// period, at [`DEFAULT_POINTS_PER_TIMESCALE`] points per shortest timescale.
    pub fn default_for(pulse: &PulseSpec, cavity: &CavityParams) -> Self {
        let kappa = cavity.kappa();
        let step = pulse.duration.min(1.0 / kappa) / DEFAULT_POINTS_PER_TIMESCALE;
        let end = pulse.period.min(pulse.drive_end() + 16.0 / kappa);
        Self { step, end }
    }

    pub fn refined(&self, factor: usize) -> Self {
        Self {
            step: self.step / factor as f64,
            end: self.end,
        }
    }

    pub fn len(&self) -> usize {
        (self.end / self.step).round() as usize + 1
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Integrates `α̇ = −κα + E₀(t)` from an empty cavity on `grid`.
///
/// Each step applies the exact exponential decay and integrates the drive
/// term by Simpson's rule, split at discontinuities of the pulse envelope.
pub fn intracavity_amplitude(
    pulse: &PulseSpec,
    cavity: &CavityParams,
    grid: &TimeGrid,
) -> Result<PhotonTrace> {
    let kappa = cavity.kappa();
    let max_step = pulse.duration.min(1.0 / kappa) / MIN_POINTS_PER_TIMESCALE;
    if !(grid.step > 0.0 && grid.step <= max_step * (1.0 + 1e-12)) {
        return Err(Error::GridTooCoarse {
            step: grid.step,
            max_step,
        });
    }
    if !(grid.end > 0.0 && grid.end <= pulse.period * (1.0 + 1e-12)) {
        return Err(invalid("grid.end", "must lie within one period"));
    }
    let n = grid.len();
    let h = grid.step;
    let decay = (-kappa * h).exp();
    let mut amplitude = Vec::with_capacity(n);
    let mut alpha = 0.0;
    amplitude.push(alpha);
    let drive_end = pulse.drive_end();
    for i in 1..n {
        let t0 = (i - 1) as f64 * h;
        let t1 = i as f64 * h;
        let source = if t0 >= drive_end {
            0.0
        } else {
            simpson_pieces(pulse, t0, t1, |s| {
                drive_amplitude(pulse, cavity, s) * (-kappa * (t1 - s)).exp()
            })
        };
        alpha = alpha * decay + source;
        amplitude.push(alpha);
    }
    let photons = amplitude.iter().map(|a| a * a).collect();
    Ok(PhotonTrace {
        step: h,
        amplitude,
        photons,
    })
}

/// Simpson's rule on `[a, b]`, split at the pulse's discontinuities.
fn simpson_pieces(pulse: &PulseSpec, a: f64, b: f64, f: impl Fn(f64) -> f64) -> f64 {
    let simpson = |lo: f64, hi: f64| {
        // evaluate just inside the piece so one-sided limits are used at edges
        let nudge = (hi - lo) * 1e-9;
        let mid = 0.5 * (lo + hi);
        (hi - lo) / 6.0 * (f(lo + nudge) + 4.0 * f(mid) + f(hi - nudge))
    };
    let mut lo = a;
    let mut total = 0.0;
    for &frac in pulse.breakpoints() {
        let bp = frac * pulse.duration;
        if bp > lo && bp < b {
            total += simpson(lo, bp);
            lo = bp;
        }
    }
    total + simpson(lo, b)
}

/// `θ = 2 g₂ ∫ |α(t)|² dt`.
pub fn kick_strength(g2: f64, trace: &PhotonTrace) -> f64 {
    2.0 * g2 * trace.integrated_photons()
}

/// Bath description used by the Markov-limit checks.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BathSpec {
    /// Reservoir frequency cutoff Ω_c (rad/s); the check is skipped when unknown.
    pub cutoff: Option<f64>,
    /// Bath temperature (K); derived from the resonator occupancy when absent.
    pub temperature: Option<f64>,
}

impl BathSpec {
    pub fn temperature(&self, mech: &MechanicalParams) -> f64 {
        self.temperature
            .unwrap_or_else(|| Self::temperature_for(mech.n_bar(), mech.omega_m()))
    }

    /// Temperature at which a mode of frequency `omega_m` has occupancy `n_bar`.
    pub fn temperature_for(n_bar: f64, omega_m: f64) -> f64 {
        if n_bar <= 0.0 {
            return 0.0;
        }
        HBAR * omega_m / (BOLTZMANN * (1.0 + 1.0 / n_bar).ln())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Relation {
    /// Strict `<` read as ratio > 1.
    Less,
    /// `≫`
    MuchGreater,
    /// `≳`
    AtLeastOrder,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    Pass,
    Marginal,
    Fail,
    NotEvaluated,
}

impl std::fmt::Display for Verdict {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::Pass => "pass",
            Self::Marginal => "marginal",
            Self::Fail => "FAIL",
            Self::NotEvaluated => "not evaluated",
        })
    }
}

/// `≫` passes at ratio ≥ 10 and is marginal in [3, 10).
pub const MUCH_GREATER_PASS: f64 = 10.0;
pub const MUCH_GREATER_MARGINAL: f64 = 3.0;

impl Relation {
    pub fn judge(self, ratio: f64) -> Verdict {
        if ratio.is_nan() {
            return Verdict::NotEvaluated;
        }
        // products like 1e8 * 1e-7 land a few ulps from the threshold
        let at_least = |x: f64| ratio >= x * (1.0 - 1e-12);
        match self {
            Relation::Less if ratio > 1.0 => Verdict::Pass,
            Relation::Less => Verdict::Fail,
            Relation::MuchGreater if at_least(MUCH_GREATER_PASS) => Verdict::Pass,
            Relation::MuchGreater if at_least(MUCH_GREATER_MARGINAL) => Verdict::Marginal,
            Relation::MuchGreater => Verdict::Fail,
            Relation::AtLeastOrder if at_least(1.0) => Verdict::Pass,
            Relation::AtLeastOrder => Verdict::Fail,
        }
    }

    fn symbol(self) -> &'static str {
        match self {
            Relation::Less => "<",
            Relation::MuchGreater => ">>",
            Relation::AtLeastOrder => ">~",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RegimeCheck {
    pub name: &'static str,
    pub relation: Relation,
    /// Left side over right side, oriented so larger is safer.
    pub ratio: f64,
    pub verdict: Verdict,
    /// Hard checks guard the delta-kick reduction itself; soft ones are the
    /// Markov-limit and weak-coupling conditions, reported but not fatal.
    pub hard: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RegimeReport {
    pub checks: Vec<RegimeCheck>,
}

impl RegimeReport {
    pub fn all_hard_pass(&self) -> bool {
        self.checks
            .iter()
            .filter(|c| c.hard)
            .all(|c| c.verdict == Verdict::Pass)
    }

    pub fn get(&self, name: &str) -> Option<&RegimeCheck> {
        self.checks.iter().find(|c| c.name == name)
    }
}

impl std::fmt::Display for RegimeReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        for c in &self.checks {
            writeln!(
                f,
                "{:<28} {:>2}  ratio={:<12.4e} {}{}",
                c.name,
                c.relation.symbol(),
                c.ratio,
                c.verdict,
                if c.hard { "" } else { " (advisory)" }
            )?;
        }
        Ok(())
    }
}

/// Evaluates the timescale hierarchy `c/2L > 1/τ_p ≫ κ ≫ 1/τ`, the Markov
/// conditions `Ω_c τ ≳ 1`, `k_B T τ/ħ ≳ 1` and weak coupling `κ ≫ g₂⟨q²⟩`.
pub fn regime_check(
    pulse: &PulseSpec,
    cavity: &CavityParams,
    mech: &MechanicalParams,
    bath: &BathSpec,
    g2: f64,
    q2_estimate: f64,
) -> RegimeReport {
    let kappa = cavity.kappa();
    let tau = pulse.period;
    let mut checks = Vec::with_capacity(6);
    let mut push = |name, relation: Relation, ratio: f64, hard| {
        checks.push(RegimeCheck {
            name,
            relation,
            ratio,
            verdict: relation.judge(ratio),
            hard,
        })
    };
    push(
        "1/tau_p < c/2L",
        Relation::Less,
        cavity.free_spectral_range() * pulse.duration,
        true,
    );
    push(
        "1/tau_p >> kappa",
        Relation::MuchGreater,
        1.0 / (pulse.duration * kappa),
        true,
    );
    push("kappa >> 1/tau", Relation::MuchGreater, kappa * tau, true);
    push(
        "Omega_c tau >~ 1",
        Relation::AtLeastOrder,
        bath.cutoff.map_or(f64::NAN, |c| c * tau),
        false,
    );
    push(
        "k_B T tau/hbar >~ 1",
        Relation::AtLeastOrder,
        BOLTZMANN * bath.temperature(mech) * tau / HBAR,
        false,
    );
    let shift = g2 * q2_estimate;
    push(
        "kappa >> g2 <q^2>",
        Relation::MuchGreater,
        if shift > 0.0 {
            kappa / shift
        } else {
            f64::INFINITY
        },
        false,
    );
    RegimeReport { checks }
}
