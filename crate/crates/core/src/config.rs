//! Run configuration, written as a flat TOML document.
//!
//! ```text
//! # 13 dB squeezing preset
//! [mechanical]
//! omega_m = 5e5
//! gamma_m = 1e2
//! n_bar = 10
//!
//! [kick]
//! theta = 10
//!
//! [schedule]
//! tau = 1e-7
//! n_kicks = 1000000
//! stride = 100
//! ```
//!
//! The kick is given either directly (`[kick] theta`) or through a physical
//! description (`[pulse]`, `[cavity]`, `[membrane]`), never both. Parsing
//! reports every problem found, each with the offending line when there is one.
//! Unknown sections and keys are errors.

use std::collections::BTreeMap;
use std::fmt::{self, Write as _};
use std::path::PathBuf;

use toml::de::{DeTable, DeValue};

use crate::moments::MechanicalParams;
use crate::pulse::{CavityParams, MembraneParams, PulseShape, PulseSpec};

pub const DEFAULT_STRIDE: u64 = 100;

#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError {
    pub line: Option<usize>,
    /// `section.key` or just `section`.
    pub field: String,
    pub message: String,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.line {
            Some(l) => write!(f, "line {l}: {}: {}", self.field, self.message),
            None => write!(f, "{}: {}", self.field, self.message),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConfigErrors(pub Vec<ConfigError>);

impl fmt::Display for ConfigErrors {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "{} configuration error(s):", self.0.len())?;
        for e in &self.0 {
            writeln!(f, "  {e}")?;
        }
        Ok(())
    }
}

impl std::error::Error for ConfigErrors {}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhysicalKick {
    pub shape: PulseShape,
    pub duration: f64,
    pub peak_power: f64,
    pub cavity: CavityParams,
    pub membrane: MembraneParams,
}

impl PhysicalKick {
    pub fn pulse(&self, tau: f64) -> crate::Result<PulseSpec> {
        PulseSpec::new(self.shape, self.duration, self.peak_power, tau)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum KickSource {
    Direct { theta: f64 },
    Physical(PhysicalKick),
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct BathConfig {
    /// Reservoir cutoff Ω_c (rad/s).
    pub cutoff: Option<f64>,
    /// K
    pub temperature: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Schedule {
    pub tau: f64,
    pub n_kicks: u64,
    pub stride: u64,
    /// Points in the fine-grained trace of the final period; 0 disables it.
    pub intra_samples: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnsembleConfig {
    pub enabled: bool,
    /// Defaults to the kick θ when absent.
    pub mean_theta: Option<f64>,
    pub variance: f64,
    pub trajectories: usize,
    pub base_seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub mechanical: MechanicalParams,
    pub kick: KickSource,
    pub bath: BathConfig,
    pub schedule: Schedule,
    pub ensemble: Option<EnsembleConfig>,
    pub output: Option<PathBuf>,
}

struct Entry {
    /// Literal text of the value; string contents for strings.
    value: String,
    line: usize,
}

const SECTIONS: &[(&str, &[&str])] = &[
    ("mechanical", &["omega_m", "gamma_m", "n_bar"]),
    ("kick", &["theta"]),
    ("pulse", &["shape", "duration", "peak_power"]),
    ("cavity", &["length", "kappa_0", "kappa_loss", "wavelength"]),
    ("membrane", &["mass", "reflectivity"]),
    ("bath", &["cutoff", "temperature"]),
    ("schedule", &["tau", "n_kicks", "stride", "intra_samples"]),
    (
        "ensemble",
        &[
            "enabled",
            "mean_theta",
            "variance",
            "trajectories",
            "base_seed",
        ],
    ),
    ("output", &["path"]),
];

/// TOML type each key must have.
fn expected_type(key: &str) -> &'static str {
    match key {
        "shape" | "path" => "string",
        "enabled" => "boolean",
        _ => "number",
    }
}

struct Document {
    sections: BTreeMap<String, (usize, BTreeMap<String, Entry>)>,
    errors: Vec<ConfigError>,
}

impl Document {
    fn lex(text: &str) -> Self {
        let mut doc = Document {
            sections: BTreeMap::new(),
            errors: Vec::new(),
        };
        let line_of = |offset: usize| text[..offset.min(text.len())].matches('\n').count() + 1;
        let (root, syntax) = DeTable::parse_recoverable(text);
        for e in &syntax {
            let line = e.span().map(|s| line_of(s.start));
            doc.error(line, "syntax", e.message());
        }
        for (name, value) in root.get_ref() {
            let line = line_of(name.span().start);
            let name = name.get_ref().as_ref();
            let Some(allowed) = SECTIONS.iter().find(|(s, _)| *s == name).map(|(_, k)| *k) else {
                doc.error(Some(line), name, "unknown section");
                continue;
            };
            let Some(table) = value.get_ref().as_table() else {
                doc.error(Some(line), name, "expected a [section] table");
                continue;
            };
            let mut entries = BTreeMap::new();
            for (key, value) in table {
                let line = line_of(key.span().start);
                let key = key.get_ref().as_ref();
                let field = format!("{name}.{key}");
                if !allowed.contains(&key) {
                    doc.error(
                        Some(line),
                        &field,
                        &format!("unknown key (expected one of: {})", allowed.join(", ")),
                    );
                    continue;
                }
                let want = expected_type(key);
                let got = value.get_ref();
                let literal = match got {
                    DeValue::String(s) if want == "string" => Some(s.to_string()),
                    DeValue::Boolean(b) if want == "boolean" => Some(b.to_string()),
                    DeValue::Float(f) if want == "number" => Some(f.as_str().to_string()),
                    DeValue::Integer(i) if want == "number" => {
                        i128::from_str_radix(i.as_str(), i.radix())
                            .ok()
                            .map(|v| v.to_string())
                    }
                    _ => None,
                };
                match literal {
                    Some(value) => {
                        entries.insert(key.to_string(), Entry { value, line });
                    }
                    None => doc.error(
                        Some(line),
                        &field,
                        &format!("expected a {want}, got a {}", got.type_str()),
                    ),
                }
            }
            doc.sections.insert(name.to_string(), (line, entries));
        }
        doc
    }

    fn error(&mut self, line: Option<usize>, field: &str, message: &str) {
        self.errors.push(ConfigError {
            line,
            field: field.to_string(),
            message: message.to_string(),
        });
    }

    fn has_section(&self, section: &str) -> bool {
        self.sections.contains_key(section)
    }

    fn section_line(&self, section: &str) -> Option<usize> {
        self.sections.get(section).map(|(l, _)| *l)
    }

    fn raw(&self, section: &str, key: &str) -> Option<(String, usize)> {
        let entry = self.sections.get(section)?.1.get(key)?;
        Some((entry.value.clone(), entry.line))
    }

    fn parse<T: std::str::FromStr>(&mut self, section: &str, key: &str, what: &str) -> Option<T> {
        let (value, line) = self.raw(section, key)?;
        match value.parse() {
            Ok(v) => Some(v),
            Err(_) => {
                self.error(
                    Some(line),
                    &format!("{section}.{key}"),
                    &format!("expected {what}, got `{value}`"),
                );
                None
            }
        }
    }

    fn required<T: std::str::FromStr>(
        &mut self,
        section: &str,
        key: &str,
        what: &str,
    ) -> Option<T> {
        if self.raw(section, key).is_none() {
            let line = self.section_line(section);
            self.error(line, &format!("{section}.{key}"), "missing required key");
            return None;
        }
        self.parse(section, key, what)
    }

    /// Checks a parsed number with `ok`, reporting `rule` on failure.
    fn checked_f64(
        &mut self,
        section: &str,
        key: &str,
        required: bool,
        rule: &str,
        ok: impl Fn(f64) -> bool,
    ) -> Option<f64> {
        let v: f64 = if required {
            self.required(section, key, "a number")?
        } else {
            self.parse(section, key, "a number")?
        };
        if v.is_finite() && ok(v) {
            Some(v)
        } else {
            let line = self.raw(section, key).map(|(_, l)| l);
            self.error(
                line,
                &format!("{section}.{key}"),
                &format!("must be {rule}, got {v}"),
            );
            None
        }
    }
}

/// Parses and validates a configuration document.
pub fn parse_config(text: &str) -> Result<RunConfig, ConfigErrors> {
    let mut doc = Document::lex(text);

    for section in ["mechanical", "schedule"] {
        if !doc.has_section(section) {
            doc.error(None, section, "missing required section");
        }
    }

    let omega_m = doc.checked_f64("mechanical", "omega_m", true, "> 0", |x| x > 0.0);
    let gamma_m = doc.checked_f64("mechanical", "gamma_m", true, ">= 0", |x| x >= 0.0);
    let n_bar = doc.checked_f64("mechanical", "n_bar", true, ">= 0", |x| x >= 0.0);

    let tau = doc.checked_f64("schedule", "tau", true, "> 0", |x| x > 0.0);
    let n_kicks: Option<u64> = doc.required("schedule", "n_kicks", "a non-negative integer");
    let stride: Option<u64> = if doc.raw("schedule", "stride").is_some() {
        match doc.parse::<u64>("schedule", "stride", "a positive integer") {
            Some(0) => {
                let line = doc.raw("schedule", "stride").map(|(_, l)| l);
                doc.error(line, "schedule.stride", "must be >= 1");
                None
            }
            other => other,
        }
    } else {
        Some(DEFAULT_STRIDE)
    };
    let intra_samples: Option<usize> = if doc.raw("schedule", "intra_samples").is_some() {
        match doc.parse::<usize>("schedule", "intra_samples", "a non-negative integer") {
            Some(1) => {
                let line = doc.raw("schedule", "intra_samples").map(|(_, l)| l);
                doc.error(line, "schedule.intra_samples", "must be 0 (off) or >= 2");
                None
            }
            other => other,
        }
    } else {
        Some(0)
    };

    let physical_sections = ["pulse", "cavity", "membrane"];
    let has_direct = doc.has_section("kick");
    let has_physical = physical_sections.iter().any(|s| doc.has_section(s));
    let kick = match (has_direct, has_physical) {
        (true, true) => {
            let line = doc.section_line("kick");
            doc.error(
                line,
                "kick",
                "exactly one kick source: give either [kick] theta or [pulse]/[cavity]/[membrane], not both",
            );
            None
        }
        (false, false) => {
            doc.error(
                None,
                "kick",
                "exactly one kick source: missing [kick] theta or [pulse]/[cavity]/[membrane]",
            );
            None
        }
        (true, false) => doc
            .checked_f64("kick", "theta", true, "finite", |_| true)
            .map(|theta| KickSource::Direct { theta }),
        (false, true) => parse_physical(&mut doc, tau).map(KickSource::Physical),
    };

    let bath = BathConfig {
        cutoff: doc.checked_f64("bath", "cutoff", false, "> 0", |x| x > 0.0),
        temperature: doc.checked_f64("bath", "temperature", false, ">= 0", |x| x >= 0.0),
    };

    let ensemble = if doc.has_section("ensemble") {
        let enabled: Option<bool> = if doc.raw("ensemble", "enabled").is_some() {
            doc.parse("ensemble", "enabled", "true or false")
        } else {
            Some(true)
        };
        let mean_theta = doc.checked_f64("ensemble", "mean_theta", false, "finite", |_| true);
        let variance = doc.checked_f64("ensemble", "variance", true, ">= 0", |x| x >= 0.0);
        let trajectories: Option<usize> =
            match doc.required::<usize>("ensemble", "trajectories", "a positive integer") {
                Some(0) => {
                    let line = doc.raw("ensemble", "trajectories").map(|(_, l)| l);
                    doc.error(line, "ensemble.trajectories", "must be >= 1");
                    None
                }
                other => other,
            };
        let base_seed: Option<u64> = if doc.raw("ensemble", "base_seed").is_some() {
            doc.parse("ensemble", "base_seed", "an unsigned 64-bit integer")
        } else {
            Some(0)
        };
        match (enabled, variance, trajectories, base_seed) {
            (Some(enabled), Some(variance), Some(trajectories), Some(base_seed)) => {
                Some(Some(EnsembleConfig {
                    enabled,
                    mean_theta,
                    variance,
                    trajectories,
                    base_seed,
                }))
            }
            _ => None,
        }
    } else {
        Some(None)
    };

    let output = doc.raw("output", "path").map(|(p, _)| PathBuf::from(p));

    let mechanical = match (omega_m, gamma_m, n_bar) {
        (Some(w), Some(g), Some(n)) => MechanicalParams::new(w, g, n).ok(),
        _ => None,
    };

    if !doc.errors.is_empty() {
        return Err(ConfigErrors(doc.errors));
    }
    match (
        mechanical,
        kick,
        tau,
        n_kicks,
        stride,
        intra_samples,
        ensemble,
    ) {
        (
            Some(mechanical),
            Some(kick),
            Some(tau),
            Some(n_kicks),
            Some(stride),
            Some(intra),
            Some(ensemble),
        ) => Ok(RunConfig {
            mechanical,
            kick,
            bath,
            schedule: Schedule {
                tau,
                n_kicks,
                stride,
                intra_samples: intra,
            },
            ensemble,
            output,
        }),
        _ => Err(ConfigErrors(vec![ConfigError {
            line: None,
            field: "config".into(),
            message: "incomplete configuration".into(),
        }])),
    }
}

fn parse_physical(doc: &mut Document, tau: Option<f64>) -> Option<PhysicalKick> {
    for s in ["pulse", "cavity", "membrane"] {
        if !doc.has_section(s) {
            doc.error(
                None,
                s,
                "physical kick source needs [pulse], [cavity] and [membrane]",
            );
        }
    }
    let shape: Option<PulseShape> = if doc.raw("pulse", "shape").is_some() {
        doc.parse("pulse", "shape", "`rectangular` or `gaussian`")
    } else {
        Some(PulseShape::default())
    };
    let duration = doc.checked_f64("pulse", "duration", true, "> 0", |x| x > 0.0);
    let peak_power = doc.checked_f64("pulse", "peak_power", true, ">= 0", |x| x >= 0.0);
    if let (Some(d), Some(t)) = (duration, tau) {
        if d >= t {
            let line = doc.raw("pulse", "duration").map(|(_, l)| l);
            doc.error(line, "pulse.duration", "must be shorter than schedule.tau");
        }
    }
    let length = doc.checked_f64("cavity", "length", true, "> 0", |x| x > 0.0);
    let kappa_0 = doc.checked_f64("cavity", "kappa_0", true, "> 0", |x| x > 0.0);
    let kappa_loss = if doc.raw("cavity", "kappa_loss").is_some() {
        doc.checked_f64("cavity", "kappa_loss", false, ">= 0", |x| x >= 0.0)
    } else {
        Some(0.0)
    };
    let wavelength = doc.checked_f64("cavity", "wavelength", true, "> 0", |x| x > 0.0);
    let mass = doc.checked_f64("membrane", "mass", true, "> 0", |x| x > 0.0);
    let reflectivity = doc.checked_f64("membrane", "reflectivity", true, "in [0, 1)", |x| {
        (0.0..1.0).contains(&x)
    });

    let cavity = CavityParams::new(length?, kappa_0?, kappa_loss?, wavelength?).ok()?;
    let membrane = MembraneParams::new(mass?, reflectivity?).ok()?;
    Some(PhysicalKick {
        shape: shape?,
        duration: duration?,
        peak_power: peak_power?,
        cavity,
        membrane,
    })
}

impl RunConfig {
    /// Direct-θ configuration with default schedule settings.
    pub fn direct(mechanical: MechanicalParams, theta: f64, tau: f64, n_kicks: u64) -> Self {
        Self {
            mechanical,
            kick: KickSource::Direct { theta },
            bath: BathConfig::default(),
            schedule: Schedule {
                tau,
                n_kicks,
                stride: DEFAULT_STRIDE,
                intra_samples: 0,
            },
            ensemble: None,
            output: None,
        }
    }

    /// Renders the configuration in the format accepted by [`parse_config`].
    pub fn to_config_text(&self) -> String {
        let mut s = String::new();
        let m = &self.mechanical;
        let _ = writeln!(
            s,
            "[mechanical]\nomega_m = {:?}\ngamma_m = {:?}\nn_bar = {:?}\n",
            m.omega_m(),
            m.gamma_m(),
            m.n_bar()
        );
        match &self.kick {
            KickSource::Direct { theta } => {
                let _ = writeln!(s, "[kick]\ntheta = {theta:?}\n");
            }
            KickSource::Physical(p) => {
                let _ = writeln!(
                    s,
                    "[pulse]\nshape = \"{}\"\nduration = {:?}\npeak_power = {:?}\n",
                    p.shape, p.duration, p.peak_power
                );
                let _ = writeln!(
                    s,
                    "[cavity]\nlength = {:?}\nkappa_0 = {:?}\nkappa_loss = {:?}\nwavelength = {:?}\n",
                    p.cavity.length, p.cavity.kappa_0, p.cavity.kappa_loss, p.cavity.wavelength
                );
                let _ = writeln!(
                    s,
                    "[membrane]\nmass = {:?}\nreflectivity = {:?}\n",
                    p.membrane.mass, p.membrane.reflectivity
                );
            }
        }
        if self.bath.cutoff.is_some() || self.bath.temperature.is_some() {
            s.push_str("[bath]\n");
            if let Some(c) = self.bath.cutoff {
                let _ = writeln!(s, "cutoff = {c:?}");
            }
            if let Some(t) = self.bath.temperature {
                let _ = writeln!(s, "temperature = {t:?}");
            }
            s.push('\n');
        }
        let sch = &self.schedule;
        let _ = writeln!(
            s,
            "[schedule]\ntau = {:?}\nn_kicks = {}\nstride = {}\nintra_samples = {}\n",
            sch.tau, sch.n_kicks, sch.stride, sch.intra_samples
        );
        if let Some(e) = &self.ensemble {
            let _ = writeln!(s, "[ensemble]\nenabled = {}", e.enabled);
            if let Some(mt) = e.mean_theta {
                let _ = writeln!(s, "mean_theta = {mt:?}");
            }
            let _ = writeln!(
                s,
                "variance = {:?}\ntrajectories = {}\nbase_seed = {}\n",
                e.variance, e.trajectories, e.base_seed
            );
        }
        if let Some(p) = &self.output {
            let path = p
                .display()
                .to_string()
                .replace('\\', "\\\\")
                .replace('"', "\\\"");
            let _ = writeln!(s, "[output]\npath = \"{path}\"");
        }
        s
    }
}
