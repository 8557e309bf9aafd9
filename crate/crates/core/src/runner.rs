//! Scenario orchestration: presets, CSV trajectories and the run summary.

use std::fmt::Write as _;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::config::{
    BathConfig, ConfigErrors, EnsembleConfig, KickSource, PhysicalKick, RunConfig, Schedule,
};
use crate::ensemble::{run_ensemble, trajectory_seed, EnsembleStats, KickNoiseModel, NoisyCycle};
use crate::metrics::StateMetrics;
use crate::moments::{CycleMap, MechanicalParams, MomentVector};
use crate::pulse::{
    coupling_g2, intracavity_amplitude, kick_strength, regime_check, BathSpec, CavityParams,
    MembraneParams, PulseShape, RegimeReport, TimeGrid,
};

/// Column order of trajectory CSV files.
pub const CSV_COLUMNS: [&str; 11] = [
    "kick_index",
    "time_s",
    "sigma_q",
    "sigma_qp",
    "sigma_p",
    "sigma_min",
    "squeezing_db",
    "phi_min_rad",
    "purity",
    "entropy_nats",
    "n_eff",
];

/// Extra columns appended for ensemble runs.
pub const ENSEMBLE_COLUMNS: [&str; 7] = [
    "sigma_min_mean",
    "sigma_min_std",
    "squeezing_db_of_mean",
    "squeezing_db_mean",
    "squeezing_db_std",
    "purity_mean",
    "purity_std",
];

#[derive(Debug, Error)]
pub enum RunError {
    #[error("{0}")]
    Config(#[from] ConfigErrors),
    #[error("{context} `{}`: {source}", path.display())]
    Io {
        context: &'static str,
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("numerical failure: {0}")]
    Numerical(#[from] crate::Error),
}

impl RunError {
    /// 1 for bad input or I/O, 2 for numerical failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::Config(_) | RunError::Io { .. } => 1,
            RunError::Numerical(_) => 2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scenario {
    Fig1,
    Fig2,
    Fig3,
}

impl std::str::FromStr for Scenario {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "fig1" => Ok(Self::Fig1),
            "fig2" => Ok(Self::Fig2),
            "fig3" => Ok(Self::Fig3),
            other => Err(format!("unknown scenario `{other}` (fig1|fig2|fig3)")),
        }
    }
}

impl Scenario {
    pub fn name(self) -> &'static str {
        match self {
            Self::Fig1 => "fig1",
            Self::Fig2 => "fig2",
            Self::Fig3 => "fig3",
        }
    }

    /// Preset parameters: ω_m = 5e5 s⁻¹, γ_m = 1e2 s⁻¹, τ = 1e-7 s, θ = 10;
    /// n̄ = 10 (fig1, fig3) or 200 (fig2); fig3 adds Gaussian θ noise of
    /// variance 1e-3 over 100 trajectories.
    pub fn config(self) -> RunConfig {
        let n_bar = match self {
            Self::Fig2 => 200.0,
            _ => 10.0,
        };
        let mechanical = MechanicalParams::new(5e5, 1e2, n_bar).expect("preset parameters");
        let ensemble = (self == Self::Fig3).then_some(EnsembleConfig {
            enabled: true,
            mean_theta: None,
            variance: 1e-3,
            trajectories: 100,
            base_seed: 0,
        });
        RunConfig {
            mechanical,
            kick: KickSource::Direct { theta: 10.0 },
            bath: BathConfig::default(),
            schedule: Schedule {
                tau: 1e-7,
                n_kicks: 1_000_000,
                stride: 100,
                intra_samples: 201,
            },
            ensemble,
            output: Some(PathBuf::from(format!("{}.csv", self.name()))),
        }
    }
}

/// Membrane-in-the-middle apparatus: L = 0.1 mm, κ = 1e8 s⁻¹, λ = 1550 nm,
/// 0.1 ns rectangular pulses of 1 W peak, m = 0.25e-11 kg, R = 0.2.
pub fn reference_apparatus() -> PhysicalKick {
    PhysicalKick {
        shape: PulseShape::Rectangular,
        duration: 1e-10,
        peak_power: 1.0,
        cavity: CavityParams::single_sided(1e-4, 1e8, 1550e-9).expect("preset parameters"),
        membrane: MembraneParams::new(0.25e-11, 0.2).expect("preset parameters"),
    }
}

/// Command-line overrides applied on top of a configuration.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,
    pub trajectories: Option<usize>,
    pub kicks: Option<u64>,
    pub stride: Option<u64>,
}

impl Overrides {
    pub fn apply(&self, config: &mut RunConfig) -> Result<(), RunError> {
        let mut errors = Vec::new();
        let mut err = |field: &str, message: &str| {
            errors.push(crate::config::ConfigError {
                line: None,
                field: field.into(),
                message: message.into(),
            })
        };
        if let Some(out) = &self.out {
            config.output = Some(out.clone());
        }
        if let Some(k) = self.kicks {
            config.schedule.n_kicks = k;
        }
        if let Some(s) = self.stride {
            if s == 0 {
                err("--stride", "must be >= 1");
            }
            config.schedule.stride = s;
        }
        if self.seed.is_some() || self.trajectories.is_some() {
            match config.ensemble.as_mut() {
                Some(e) => {
                    if let Some(seed) = self.seed {
                        e.base_seed = seed;
                    }
                    if let Some(n) = self.trajectories {
                        if n == 0 {
                            err("--trajectories", "must be >= 1");
                        }
                        e.trajectories = n;
                    }
                }
                None => err(
                    "--seed/--trajectories",
                    "only apply to runs with an [ensemble] section",
                ),
            }
        }
        if errors.is_empty() {
            Ok(())
        } else {
            Err(RunError::Config(ConfigErrors(errors)))
        }
    }
}

/// Quantities derived from a physical pulse description.
#[derive(Debug, Clone, PartialEq)]
pub struct ApparatusReport {
    pub g2: f64,
    pub peak_photons: f64,
    pub integrated_photons: f64,
    pub theta: f64,
    pub regime: RegimeReport,
}

fn evaluate_apparatus(
    apparatus: &PhysicalKick,
    mech: &MechanicalParams,
    bath: &BathConfig,
    tau: f64,
    q2_estimate: f64,
) -> crate::Result<ApparatusReport> {
    let pulse = apparatus.pulse(tau)?;
    let g2 = coupling_g2(&apparatus.cavity, &apparatus.membrane, mech.omega_m())?;
    let grid = TimeGrid::default_for(&pulse, &apparatus.cavity);
    let trace = intracavity_amplitude(&pulse, &apparatus.cavity, &grid)?;
    let bath = BathSpec {
        cutoff: bath.cutoff,
        temperature: bath.temperature,
    };
    Ok(ApparatusReport {
        g2,
        peak_photons: trace.peak_photons(),
        integrated_photons: trace.integrated_photons(),
        theta: kick_strength(g2, &trace),
        regime: regime_check(&pulse, &apparatus.cavity, mech, &bath, g2, q2_estimate),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct Summary {
    pub label: String,
    pub params: MechanicalParams,
    pub tau: f64,
    pub theta: f64,
    pub n_kicks: u64,
    pub spectral_radius: f64,
    /// `None` when the cycle map has no stationary state.
    pub steady: Option<(MomentVector, StateMetrics)>,
    pub last: (u64, MomentVector, StateMetrics),
    /// Deterministic runs only.
    pub squeezing_onset: Option<Option<u64>>,
    pub ensemble: Option<(KickNoiseModel, EnsembleStats)>,
    pub apparatus: Option<ApparatusReport>,
}

fn write_metrics(s: &mut String, prefix: &str, v: &MomentVector, m: &StateMetrics) {
    let _ = writeln!(s, "{prefix}.sigma_q = {}", v.sigma_q);
    let _ = writeln!(s, "{prefix}.sigma_qp = {}", v.sigma_qp);
    let _ = writeln!(s, "{prefix}.sigma_p = {}", v.sigma_p);
    let _ = writeln!(s, "{prefix}.sigma_min = {}", m.sigma_min);
    let _ = writeln!(s, "{prefix}.squeezing_db = {}", m.squeezing_db);
    let _ = writeln!(s, "{prefix}.phi_min_rad = {}", m.phi_min);
    let _ = writeln!(s, "{prefix}.purity = {}", m.purity);
    let _ = writeln!(s, "{prefix}.entropy_nats = {}", m.entropy);
    let _ = writeln!(s, "{prefix}.n_eff = {}", m.n_eff);
}

impl Summary {
    /// `key = value` lines with round-trip float formatting; regime checks are
    /// listed as `regime: ...` lines.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "# optospring run summary");
        let _ = writeln!(s, "label = {}", self.label);
        let _ = writeln!(s, "omega_m = {}", self.params.omega_m());
        let _ = writeln!(s, "gamma_m = {}", self.params.gamma_m());
        let _ = writeln!(s, "n_bar = {}", self.params.n_bar());
        let _ = writeln!(s, "tau = {}", self.tau);
        let _ = writeln!(s, "theta = {}", self.theta);
        let _ = writeln!(s, "n_kicks = {}", self.n_kicks);
        let _ = writeln!(s, "spectral_radius = {}", self.spectral_radius);
        match &self.steady {
            Some((v, m)) => write_metrics(&mut s, "steady", v, m),
            None => {
                let _ = writeln!(s, "steady = none");
            }
        }
        let (k, v, m) = &self.last;
        let _ = writeln!(s, "final.kick_index = {k}");
        write_metrics(&mut s, "final", v, m);
        if let Some(onset) = self.squeezing_onset {
            match onset {
                Some(n) => {
                    let _ = writeln!(s, "squeezing_onset_kick = {n}");
                }
                None => {
                    let _ = writeln!(s, "squeezing_onset_kick = none");
                }
            }
        }
        if let Some((noise, stats)) = &self.ensemble {
            let last = stats.last();
            let _ = writeln!(s, "ensemble.mean_theta = {}", noise.mean_theta);
            let _ = writeln!(s, "ensemble.variance = {}", noise.variance);
            let _ = writeln!(s, "ensemble.trajectories = {}", stats.trajectories);
            let _ = writeln!(s, "ensemble.base_seed = {}", stats.base_seed);
            let _ = writeln!(s, "ensemble.final.sigma_min_mean = {}", last.sigma_min_mean);
            let _ = writeln!(s, "ensemble.final.sigma_min_std = {}", last.sigma_min_std);
            let _ = writeln!(
                s,
                "ensemble.final.squeezing_db_of_mean = {}",
                last.squeezing_db_of_mean
            );
            let _ = writeln!(
                s,
                "ensemble.final.squeezing_db_mean = {}",
                last.squeezing_db_mean
            );
            let _ = writeln!(s, "ensemble.final.purity_mean = {}", last.purity_mean);
        }
        if let Some(a) = &self.apparatus {
            let _ = writeln!(s, "apparatus.g2 = {}", a.g2);
            let _ = writeln!(s, "apparatus.peak_photons = {}", a.peak_photons);
            let _ = writeln!(s, "apparatus.integrated_photons = {}", a.integrated_photons);
            let _ = writeln!(s, "apparatus.theta = {}", a.theta);
            for line in a.regime.to_string().lines() {
                let _ = writeln!(s, "regime: {line}");
            }
        }
        s
    }
}

/// Looks up `key = value` in summary text.
pub fn summary_value<'a>(text: &'a str, key: &str) -> Option<&'a str> {
    text.lines().find_map(|l| {
        let (k, v) = l.split_once('=')?;
        (k.trim() == key).then(|| v.trim())
    })
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub csv: PathBuf,
    pub summary_path: PathBuf,
    pub intra: Option<PathBuf>,
    pub summary: Summary,
}

/// Path of the summary written next to a trajectory CSV.
pub fn summary_path(csv: &Path) -> PathBuf {
    csv.with_extension("summary.txt")
}

pub fn intra_path(csv: &Path) -> PathBuf {
    csv.with_extension("intra.csv")
}

fn push_row(line: &mut String, kick_index: u64, time: f64, v: &MomentVector, m: &StateMetrics) {
    let _ = write!(
        line,
        "{kick_index},{time},{},{},{},{},{},{},{},{},{}",
        v.sigma_q,
        v.sigma_qp,
        v.sigma_p,
        m.sigma_min,
        m.squeezing_db,
        m.phi_min,
        m.purity,
        m.entropy,
        m.n_eff
    );
}

fn write_file(path: &Path, content: &str) -> Result<(), RunError> {
    let io = |source| RunError::Io {
        context: "cannot write",
        path: path.to_path_buf(),
        source,
    };
    let mut w = BufWriter::new(File::create(path).map_err(io)?);
    w.write_all(content.as_bytes()).map_err(io)?;
    w.flush().map_err(io)
}

/// Runs a configuration and writes the trajectory CSV, the summary and, when
/// requested, the fine-grained trace of the final period.
///
/// `reference` supplies an apparatus for the regime report when the kick is
/// given directly as θ.
pub fn run(
    config: &RunConfig,
    label: &str,
    reference: Option<&PhysicalKick>,
) -> Result<RunOutcome, RunError> {
    let csv = config
        .output
        .clone()
        .unwrap_or_else(|| PathBuf::from(format!("{label}.csv")));
    // Fail early on an unwritable destination, before any long computation.
    File::create(&csv).map_err(|source| RunError::Io {
        context: "cannot write",
        path: csv.clone(),
        source,
    })?;

    let params = config.mechanical;
    let Schedule {
        tau,
        n_kicks,
        stride,
        intra_samples,
    } = config.schedule;
    let thermal = params.thermal_state();

    let (theta, apparatus_spec) = match &config.kick {
        KickSource::Direct { theta } => (*theta, reference.copied()),
        KickSource::Physical(p) => {
            let r = evaluate_apparatus(p, &params, &config.bath, tau, thermal.sigma_q)?;
            (r.theta, Some(*p))
        }
    };
    let cycle = CycleMap::new(&params, tau, theta)?;
    let steady = match cycle.steady_state() {
        Ok(v) => Some((v, StateMetrics::from_moments(&v)?)),
        Err(crate::Error::NoStationaryState { .. }) => None,
        Err(e) => return Err(e.into()),
    };
    let q2_estimate = steady
        .map(|(v, _)| v.sigma_q)
        .unwrap_or(0.0)
        .max(thermal.sigma_q);
    let apparatus = apparatus_spec
        .map(|p| evaluate_apparatus(&p, &params, &config.bath, tau, q2_estimate))
        .transpose()?;

    let mut text = CSV_COLUMNS.join(",");
    let ensemble_cfg = config.ensemble.filter(|e| e.enabled);
    let (last, squeezing_onset, ensemble) = match ensemble_cfg {
        None => {
            let mut samples = Vec::with_capacity((n_kicks / stride + 2) as usize);
            let mut onset = None;
            let last = cycle.walk(&thermal, n_kicks, |n, v| {
                if crate::metrics::min_quadrature_variance(v) < 0.5 {
                    onset.get_or_insert(n);
                } else {
                    onset = None;
                }
                if n % stride == 0 || n == n_kicks {
                    samples.push((n, *v));
                }
            })?;
            text.push('\n');
            for (n, v) in &samples {
                let m = StateMetrics::from_moments(v)?;
                push_row(&mut text, *n, *n as f64 * tau, v, &m);
                text.push('\n');
            }
            let m = StateMetrics::from_moments(&last)?;
            ((n_kicks, last, m), Some(onset), None)
        }
        Some(e) => {
            let noise = KickNoiseModel::new(e.mean_theta.unwrap_or(theta), e.variance)?;
            let stats = run_ensemble(
                &params,
                tau,
                noise,
                n_kicks,
                stride,
                e.trajectories,
                e.base_seed,
            )?;
            let single = NoisyCycle::new(&params, tau, noise)?.trajectory(
                n_kicks,
                stride,
                trajectory_seed(e.base_seed, 0),
            )?;
            for c in ENSEMBLE_COLUMNS {
                text.push(',');
                text.push_str(c);
            }
            text.push('\n');
            for (s, row) in single.samples.iter().zip(&stats.rows) {
                debug_assert_eq!(s.kick_index, row.kick_index);
                push_row(
                    &mut text,
                    s.kick_index,
                    s.kick_index as f64 * tau,
                    &s.moments,
                    &s.metrics,
                );
                let _ = writeln!(
                    text,
                    ",{},{},{},{},{},{},{}",
                    row.sigma_min_mean,
                    row.sigma_min_std,
                    row.squeezing_db_of_mean,
                    row.squeezing_db_mean,
                    row.squeezing_db_std,
                    row.purity_mean,
                    row.purity_std
                );
            }
            let tail = single.samples.last().expect("index 0 is always sampled");
            (
                (tail.kick_index, tail.moments, tail.metrics),
                None,
                Some((noise, stats)),
            )
        }
    };
    write_file(&csv, &text)?;

    let intra = if intra_samples >= 2 {
        let trace = cycle.intra_period_trace(&last.1, intra_samples)?;
        let mut t = String::from("offset_s");
        for c in &CSV_COLUMNS[2..] {
            t.push(',');
            t.push_str(c);
        }
        t.push('\n');
        for (s, v) in &trace {
            let m = StateMetrics::from_moments(v)?;
            let mut row = String::new();
            push_row(&mut row, 0, *s, v, &m);
            // drop the kick_index column
            t.push_str(row.split_once(',').map(|x| x.1).unwrap_or(""));
            t.push('\n');
        }
        let p = intra_path(&csv);
        write_file(&p, &t)?;
        Some(p)
    } else {
        None
    };

    let summary = Summary {
        label: label.to_string(),
        params,
        tau,
        theta,
        n_kicks,
        spectral_radius: cycle.spectral_radius(),
        steady,
        last,
        squeezing_onset,
        ensemble,
        apparatus,
    };
    let summary_file = summary_path(&csv);
    write_file(&summary_file, &summary.to_text())?;
    Ok(RunOutcome {
        csv,
        summary_path: summary_file,
        intra,
        summary,
    })
}

/// Runs a preset scenario, reporting the reference apparatus regime.
pub fn run_scenario(scenario: Scenario, overrides: &Overrides) -> Result<RunOutcome, RunError> {
    let mut config = scenario.config();
    overrides.apply(&mut config)?;
    run(&config, scenario.name(), Some(&reference_apparatus()))
}

/// Reads, parses and runs a configuration file.
pub fn run_config_file(path: &Path, overrides: &Overrides) -> Result<RunOutcome, RunError> {
    let text = std::fs::read_to_string(path).map_err(|source| RunError::Io {
        context: "cannot read",
        path: path.to_path_buf(),
        source,
    })?;
    let mut config = crate::config::parse_config(&text)?;
    overrides.apply(&mut config)?;
    let label = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "run".into());
    run(&config, &label, None)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scenario_names_round_trip() {
        for s in [Scenario::Fig1, Scenario::Fig2, Scenario::Fig3] {
            assert_eq!(s.name().parse::<Scenario>().unwrap(), s);
        }
        assert!("fig4".parse::<Scenario>().is_err());
    }

    #[test]
    fn preset_configs_reparse() {
        for s in [Scenario::Fig1, Scenario::Fig2, Scenario::Fig3] {
            let c = s.config();
            assert_eq!(crate::config::parse_config(&c.to_config_text()).unwrap(), c);
        }
    }

    #[test]
    fn seed_override_requires_ensemble() {
        let mut c = Scenario::Fig1.config();
        let o = Overrides {
            seed: Some(3),
            ..Default::default()
        };
        assert_eq!(o.apply(&mut c).unwrap_err().exit_code(), 1);
    }

    #[test]
    fn summary_lookup() {
        let text = "a = 1\nsteady.squeezing_db = -13.6\n";
        assert_eq!(summary_value(text, "steady.squeezing_db"), Some("-13.6"));
        assert_eq!(summary_value(text, "b"), None);
    }
}
