use std::fs;
use std::path::Path;

use optospring::config::{
    parse_config, BathConfig, EnsembleConfig, KickSource, PhysicalKick, RunConfig, Schedule,
};
use optospring::pulse::{CavityParams, MembraneParams, PulseShape};
use optospring::runner::{self, summary_value, RunError, CSV_COLUMNS, ENSEMBLE_COLUMNS};
use optospring::{CycleMap, MechanicalParams, StateMetrics};
use proptest::prelude::*;

fn reference() -> MechanicalParams {
    MechanicalParams::new(5e5, 1e2, 10.0).unwrap()
}

fn read_csv(path: &Path) -> (Vec<String>, Vec<Vec<f64>>) {
    let text = fs::read_to_string(path).unwrap();
    let mut lines = text.lines();
    let header = lines
        .next()
        .unwrap()
        .split(',')
        .map(str::to_string)
        .collect();
    let rows = lines
        .map(|l| l.split(',').map(|x| x.parse().unwrap()).collect())
        .collect();
    (header, rows)
}

fn direct_run(dir: &Path, n_kicks: u64, stride: u64) -> RunConfig {
    let mut config = RunConfig::direct(reference(), 10.0, 1e-7, n_kicks);
    config.schedule.stride = stride;
    config.schedule.intra_samples = 11;
    config.output = Some(dir.join("run.csv"));
    config
}

#[test]
fn trajectory_csv_layout() {
    let dir = tempfile::tempdir().unwrap();
    let config = direct_run(dir.path(), 12_345, 1000);
    let out = runner::run(&config, "layout", None).unwrap();
    let (header, rows) = read_csv(&out.csv);
    assert_eq!(header, CSV_COLUMNS);
    assert!(rows.iter().all(|r| r.len() == CSV_COLUMNS.len()));

    let idx: Vec<u64> = rows.iter().map(|r| r[0] as u64).collect();
    assert_eq!(idx.first(), Some(&0));
    assert_eq!(idx.last(), Some(&12_345));
    assert!(idx.windows(2).all(|w| w[0] < w[1]));
    for r in &rows {
        assert_eq!(r[1], (r[0] as u64) as f64 * 1e-7);
    }

    // Values survive the text round trip exactly.
    let cycle = CycleMap::new(&reference(), 1e-7, 10.0).unwrap();
    let states = cycle
        .evolve(&reference().thermal_state(), 12_345, 1000)
        .unwrap();
    assert_eq!(states.len(), rows.len());
    for ((k, v), r) in states.iter().zip(&rows) {
        let m = StateMetrics::from_moments(v).unwrap();
        assert_eq!(*k, r[0] as u64);
        assert_eq!([v.sigma_q, v.sigma_qp, v.sigma_p], [r[2], r[3], r[4]]);
        assert_eq!(
            [
                m.sigma_min,
                m.squeezing_db,
                m.phi_min,
                m.purity,
                m.entropy,
                m.n_eff
            ],
            [r[5], r[6], r[7], r[8], r[9], r[10]]
        );
    }
}

#[test]
fn summary_reports_exact_steady_state() {
    let dir = tempfile::tempdir().unwrap();
    let out = runner::run(&direct_run(dir.path(), 500, 100), "steady", None).unwrap();
    let text = fs::read_to_string(&out.summary_path).unwrap();
    let cycle = CycleMap::new(&reference(), 1e-7, 10.0).unwrap();
    let v = cycle.steady_state().unwrap();
    let m = StateMetrics::from_moments(&v).unwrap();
    let get = |k: &str| -> f64 { summary_value(&text, k).unwrap().parse().unwrap() };
    assert_eq!(get("steady.sigma_q"), v.sigma_q);
    assert_eq!(get("steady.sigma_qp"), v.sigma_qp);
    assert_eq!(get("steady.sigma_p"), v.sigma_p);
    assert_eq!(get("steady.squeezing_db"), m.squeezing_db);
    assert_eq!(get("steady.purity"), m.purity);
    assert_eq!(get("spectral_radius"), cycle.spectral_radius());
    assert_eq!(summary_value(&text, "final.kick_index"), Some("500"));
    assert_eq!(summary_value(&text, "label"), Some("steady"));
}

#[test]
fn intra_period_trace_spans_one_period() {
    let dir = tempfile::tempdir().unwrap();
    let out = runner::run(&direct_run(dir.path(), 300, 100), "intra", None).unwrap();
    let (header, rows) = read_csv(out.intra.as_ref().unwrap());
    assert_eq!(header[0], "offset_s");
    assert_eq!(&header[1..], &CSV_COLUMNS[2..]);
    assert_eq!(rows.len(), 11);
    assert_eq!(rows[0][0], 0.0);
    assert!((rows[10][0] - 1e-7).abs() <= 1e-22);
    assert!(rows.windows(2).all(|w| w[0][0] < w[1][0]));

    let cycle = CycleMap::new(&reference(), 1e-7, 10.0).unwrap();
    let last = out.summary.last.1;
    let next = cycle.advance(&last);
    let end = &rows[10];
    for (a, b) in [
        (end[1], next.sigma_q),
        (end[2], next.sigma_qp),
        (end[3], next.sigma_p),
    ] {
        assert!((a - b).abs() <= 1e-12 * next.sigma_p.abs(), "{a} vs {b}");
    }
}

#[test]
fn ensemble_csv_carries_statistics() {
    let dir = tempfile::tempdir().unwrap();
    let mut config = direct_run(dir.path(), 2000, 500);
    config.ensemble = Some(EnsembleConfig {
        enabled: true,
        mean_theta: None,
        variance: 1e-3,
        trajectories: 4,
        base_seed: 9,
    });
    let out = runner::run(&config, "ens", None).unwrap();
    let (header, rows) = read_csv(&out.csv);
    let expected: Vec<&str> = CSV_COLUMNS
        .iter()
        .chain(&ENSEMBLE_COLUMNS)
        .copied()
        .collect();
    assert_eq!(header, expected);
    assert_eq!(rows.len(), 5);
    let text = fs::read_to_string(&out.summary_path).unwrap();
    assert_eq!(summary_value(&text, "ensemble.trajectories"), Some("4"));
    assert_eq!(summary_value(&text, "ensemble.base_seed"), Some("9"));
    assert_eq!(summary_value(&text, "squeezing_onset_kick"), None);
}

#[test]
fn unwritable_output_is_an_io_error() {
    let dir = tempfile::tempdir().unwrap();
    let mut config = direct_run(dir.path(), 10, 1);
    config.output = Some(dir.path().join("missing").join("run.csv"));
    let err = runner::run(&config, "io", None).unwrap_err();
    assert!(matches!(err, RunError::Io { .. }), "{err}");
    assert_eq!(err.exit_code(), 1);
}

#[test]
fn config_file_errors_name_lines() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.toml");
    fs::write(
        &path,
        "[mechanical]\nomega_m = -1\ngamma_m = 1e2\nn_bar = 10\n",
    )
    .unwrap();
    let err = runner::run_config_file(&path, &Default::default()).unwrap_err();
    assert_eq!(err.exit_code(), 1);
    let RunError::Config(errors) = &err else {
        panic!("expected a configuration error, got {err}");
    };
    let omega = errors
        .0
        .iter()
        .find(|e| e.field == "mechanical.omega_m")
        .unwrap();
    assert_eq!(omega.line, Some(2));
    assert!(errors.0.iter().any(|e| e.field == "schedule"));
    assert!(errors.0.iter().any(|e| e.field == "kick"));

    let missing = runner::run_config_file(&dir.path().join("nope.toml"), &Default::default());
    assert_eq!(missing.unwrap_err().exit_code(), 1);
}

#[test]
fn diverging_run_is_a_numerical_error() {
    let dir = tempfile::tempdir().unwrap();
    let undamped = MechanicalParams::new(5e5, 0.0, 10.0).unwrap();
    let mut config = RunConfig::direct(undamped, 1e3, 1e-7, 1_000_000);
    config.output = Some(dir.path().join("run.csv"));
    let err = runner::run(&config, "diverge", None).unwrap_err();
    assert!(matches!(err, RunError::Numerical(_)), "{err}");
    assert_eq!(err.exit_code(), 2);
}

fn mechanical() -> impl Strategy<Value = MechanicalParams> {
    (1e-3f64..1e9, 0.0f64..1e6, 0.0f64..1e4)
        .prop_map(|(w, g, n)| MechanicalParams::new(w, g, n).unwrap())
}

fn kick(tau: f64) -> impl Strategy<Value = KickSource> {
    let direct = (-1e3f64..1e3).prop_map(|theta| KickSource::Direct { theta });
    let physical = (
        prop_oneof![Just(PulseShape::Rectangular), Just(PulseShape::Gaussian)],
        0.01f64..0.99,
        0.0f64..1e3,
        (1e-6f64..1.0, 1e3f64..1e10, 0.0f64..1e9, 1e-7f64..1e-5),
        (1e-15f64..1e-6, 0.0f64..0.999),
    )
        .prop_map(
            move |(shape, frac, peak_power, (l, k0, kl, wl), (mass, r))| {
                KickSource::Physical(PhysicalKick {
                    shape,
                    duration: frac * tau,
                    peak_power,
                    cavity: CavityParams::new(l, k0, kl, wl).unwrap(),
                    membrane: MembraneParams::new(mass, r).unwrap(),
                })
            },
        );
    prop_oneof![direct, physical]
}

fn run_config() -> impl Strategy<Value = RunConfig> {
    (1e-12f64..1.0).prop_flat_map(|tau| {
        (
            mechanical(),
            kick(tau),
            (
                proptest::option::of(1e-3f64..1e12),
                proptest::option::of(0.0f64..1e3),
            ),
            (
                any::<u64>(),
                1u64..u64::MAX,
                prop_oneof![Just(0usize), 2usize..100_000],
            ),
            proptest::option::of((
                any::<bool>(),
                proptest::option::of(-1e3f64..1e3),
                0.0f64..1.0,
                1usize..100_000,
                any::<u64>(),
            )),
            proptest::option::of("[a-zA-Z0-9_ ./\\\\\"-]{1,40}"),
        )
            .prop_map(
                move |(
                    mechanical,
                    kick,
                    (cutoff, temperature),
                    (n_kicks, stride, intra),
                    ens,
                    out,
                )| {
                    RunConfig {
                        mechanical,
                        kick,
                        bath: BathConfig {
                            cutoff,
                            temperature,
                        },
                        schedule: Schedule {
                            tau,
                            n_kicks,
                            stride,
                            intra_samples: intra,
                        },
                        ensemble: ens.map(
                            |(enabled, mean_theta, variance, trajectories, base_seed)| {
                                EnsembleConfig {
                                    enabled,
                                    mean_theta,
                                    variance,
                                    trajectories,
                                    base_seed,
                                }
                            },
                        ),
                        output: out.map(Into::into),
                    }
                },
            )
    })
}

proptest! {
    #[test]
    fn config_text_round_trips(config in run_config()) {
        let text = config.to_config_text();
        let parsed = parse_config(&text).map_err(|e| TestCaseError::fail(format!("{e}\n{text}")))?;
        prop_assert_eq!(parsed, config);
    }
}
