mod common;

use optospring::metrics::{min_quadrature_variance, min_variance_phase};
use optospring::{CycleMap, DriftModel, KickMap, MechanicalParams, MomentVector, StateMetrics};
use proptest::prelude::*;

use common::{as_array, rel_err, rk4, rk4_steps, squeezed};

const THETAS: [f64; 6] = [-100.0, -1.0, 0.0, 0.5, 10.0, 100.0];

/// Valid states: a pure squeezed state scaled by a thermal factor `2m + 1`.
fn valid_state() -> impl Strategy<Value = MomentVector> {
    (-2.5f64..-0.31, -1.5f64..1.5, 0.0f64..20.0).prop_map(|(log_s, phi, m)| {
        let s = squeezed(10f64.powf(log_s), phi);
        let k = 2.0 * m + 1.0;
        MomentVector::new(k * s.sigma_q, k * s.sigma_qp, k * s.sigma_p).unwrap()
    })
}

fn mechanical() -> impl Strategy<Value = MechanicalParams> {
    (2.0f64..8.0, -6.0f64..0.0, 0.0f64..1000.0).prop_map(|(lw, lg, n_bar)| {
        let omega = 10f64.powf(lw);
        MechanicalParams::new(omega, omega * 10f64.powf(lg), n_bar).unwrap()
    })
}

fn reference(n_bar: f64) -> MechanicalParams {
    MechanicalParams::new(5e5, 1e2, n_bar).unwrap()
}

#[test]
fn kick_preserves_determinant_exactly_in_exact_arithmetic() {
    // Dyadic entries keep every product exact, so any drift would be algebraic.
    let states = [(0.5, 0.25, 1.0), (2.0, -0.75, 4.5), (0.125, 0.0, 2.0)];
    for (q, qp, p) in states {
        let v = MomentVector::new(q, qp, p).unwrap();
        for theta in THETAS {
            assert_eq!(
                KickMap::new(theta).apply(&v).determinant(),
                v.determinant(),
                "theta {theta}"
            );
        }
    }
}

#[test]
fn kick_matrix_has_unit_determinant() {
    for theta in THETAS {
        assert_eq!(KickMap::new(theta).matrix.determinant(), 1.0);
    }
}

proptest! {
    #![proptest_config(ProptestConfig { max_global_rejects: 1 << 20, ..ProptestConfig::with_cases(256) })]

    /// Floating-point check: the change in det stays within a few roundings of
    /// the products that form it.
    #[test]
    fn kick_determinant_within_rounding(v in valid_state(), i in 0usize..THETAS.len()) {
        let k = KickMap::new(THETAS[i]).apply(&v);
        let scale = v.sigma_q * v.sigma_p + v.sigma_qp.powi(2) + k.sigma_q * k.sigma_p + k.sigma_qp.powi(2);
        let change = (k.determinant() - v.determinant()).abs();
        prop_assert!(change <= 8.0 * f64::EPSILON * scale, "change {change:e}, scale {scale:e}");
    }

    #[test]
    fn thermal_state_is_fixed(p in mechanical(), log_t in -9.0f64..1.0) {
        let th = p.thermal_state();
        let prop = DriftModel::new(&p).propagator(10f64.powf(log_t)).unwrap();
        let err = rel_err(as_array(&prop.apply(&th)), as_array(&th));
        prop_assert!(err <= 1e-10, "relative error {err:e}");
    }

    #[test]
    fn undamped_full_turn_is_identity(log_w in 0.0f64..8.0, n_bar in 0.0f64..100.0, v in valid_state()) {
        let omega = 10f64.powf(log_w);
        let p = MechanicalParams::new(omega, 0.0, n_bar).unwrap();
        let prop = DriftModel::new(&p).propagator(2.0 * std::f64::consts::PI / omega).unwrap();
        let dev = (prop.transfer - nalgebra::Matrix3::identity()).amax();
        prop_assert!(dev <= 1e-9, "transfer deviates by {dev:e}");
        prop_assert!(prop.inhomogeneous.amax() <= 1e-9);
        prop_assert!(rel_err(as_array(&prop.apply(&v)), as_array(&v)) <= 1e-9);
    }

    #[test]
    fn steady_state_is_a_fixed_point(p in mechanical(), theta in -20.0f64..20.0, log_wt in -3.0f64..0.5) {
        let tau = 10f64.powf(log_wt) / p.omega_m();
        let cycle = CycleMap::new(&p, tau, theta).unwrap();
        prop_assume!(cycle.spectral_radius() < 1.0 - 1e-12);
        let s = cycle.steady_state().unwrap();
        let err = rel_err(as_array(&cycle.advance(&s)), as_array(&s));
        prop_assert!(err <= 1e-10, "residual {err:e}");
    }

    /// Minimum of a 10⁴-point scan of ⟨q(φ)²⟩, polished by golden-section
    /// search inside the winning grid cell.
    #[test]
    fn minimum_variance_matches_phase_scan(v in valid_state()) {
        let q2 = |phi: f64| {
            let (s, c) = phi.sin_cos();
            v.sigma_q * c * c + v.sigma_p * s * s + 2.0 * v.sigma_qp * s * c
        };
        let n = 10_000;
        let h = std::f64::consts::PI / n as f64;
        let grid = |i: usize| -std::f64::consts::FRAC_PI_2 + h * i as f64;
        let best = (0..n).min_by(|&a, &b| q2(grid(a)).total_cmp(&q2(grid(b)))).unwrap();
        let (mut a, mut b) = (grid(best) - h, grid(best) + h);
        let g = (5f64.sqrt() - 1.0) / 2.0;
        for _ in 0..100 {
            let (x1, x2) = (b - g * (b - a), a + g * (b - a));
            if q2(x1) < q2(x2) { b = x2 } else { a = x1 }
        }
        let scanned = q2(0.5 * (a + b));
        prop_assert!((scanned - min_quadrature_variance(&v)).abs() <= 1e-9);
        let phi = min_variance_phase(&v);
        prop_assert!((q2(phi) - scanned).abs() <= 1e-9);
    }
}

proptest! {
    #![proptest_config(ProptestConfig { max_global_rejects: 1 << 20, ..ProptestConfig::with_cases(20) })]

    #[test]
    fn propagator_matches_rk4(p in mechanical(), log_wt in -3.0f64..1.0, v in valid_state()) {
        let (w, g, n) = (p.omega_m(), p.gamma_m(), p.n_bar());
        let tau = 10f64.powf(log_wt) / w;
        let prop = DriftModel::new(&p).propagator(tau).unwrap();
        for v0 in [v, p.thermal_state()] {
            let want = rk4(w, g, n, as_array(&v0), tau, rk4_steps(w, g, tau));
            let err = rel_err(as_array(&prop.apply(&v0)), want);
            prop_assert!(err <= 1e-9, "relative error {err:e}");
        }
    }

    /// The two evaluations round differently, and their gap grows with the
    /// transient amplification of the trajectory (about 2.5e-11 per unit of
    /// max |vₙ| / |v₀|); the comparison is made where that stays below 100.
    #[test]
    fn closed_form_matches_iteration(p in mechanical(), theta in -20.0f64..20.0, log_wt in -3.0f64..0.5) {
        let tau = 10f64.powf(log_wt) / p.omega_m();
        let cycle = CycleMap::new(&p, tau, theta).unwrap();
        // Growing maps overflow long before n = 1000.
        prop_assume!(cycle.spectral_radius() <= 1.0);
        let v0 = p.thermal_state();
        let scale = v0.to_vector().amax();
        let mut v = v0;
        let mut checks = Vec::new();
        let mut amplification = 1.0f64;
        for n in 1..=1000u64 {
            v = cycle.advance(&v);
            amplification = amplification.max(v.to_vector().amax() / scale);
            if [1, 10, 100, 1000].contains(&n) {
                checks.push((n, v));
            }
        }
        prop_assume!(amplification <= 100.0);
        for (n, v) in checks {
            let c = cycle.closed_form(&v0, n).unwrap();
            let err = rel_err(as_array(&c), as_array(&v));
            prop_assert!(err <= 1e-8, "n={n}: relative error {err:e}");
        }
    }

    /// Kicks at the preset period with θ fluctuating around 10 (ten times the
    /// spread of the noisy ensemble), in a bath at least as warm as n̄ = 10,
    /// keep the uncertainty bound. Much wider θ ranges pump the variances
    /// exponentially until det is lost to cancellation.
    #[test]
    fn uncertainty_bound_under_random_kicks(
        n_bar in 10.0f64..1000.0,
        thetas in proptest::collection::vec(9.9f64..10.1, 1..2000),
    ) {
        let p = reference(n_bar);
        let free = DriftModel::new(&p).propagator(1e-7).unwrap();
        let mut v = p.thermal_state();
        for theta in thetas {
            v = KickMap::new(theta).apply(&v);
            prop_assert!(v.determinant() >= 0.25 - 1e-9);
            v = free.apply(&v);
            prop_assert!(v.determinant() >= 0.25 - 1e-9, "det {}", v.determinant());
        }
    }
}

#[test]
fn uncertainty_bound_on_reference_trajectory() {
    for n_bar in [10.0, 200.0] {
        let p = reference(n_bar);
        let cycle = CycleMap::new(&p, 1e-7, 10.0).unwrap();
        cycle
            .walk(&p.thermal_state(), 200_000, |n, v| {
                assert!(v.determinant() >= 0.25 - 1e-9, "n_bar {n_bar}, kick {n}");
            })
            .unwrap();
    }
}

/// The Markovian moment equations give d(det)/dt = −2γ det + γ(2n̄+1)σ_q, so a
/// pure state squeezed below σ_q = 1/(2(2n̄+1)) loses the uncertainty bound.
#[test]
fn cold_bath_breaks_uncertainty_bound() {
    let p = MechanicalParams::new(5e5, 1e2, 0.0).unwrap();
    let v = squeezed(0.1, 0.0);
    let drift = DriftModel::new(&p);
    let dt = 1e-9;
    let later = drift.propagator(dt).unwrap().apply(&v);
    let rate = (later.determinant() - v.determinant()) / dt;
    let predicted = -2.0 * p.gamma_m() * v.determinant() + p.gamma_m() * v.sigma_q;
    assert!(
        (rate - predicted).abs() <= 1e-3 * predicted.abs(),
        "{rate} vs {predicted}"
    );
    assert!(later.determinant() < 0.25);

    // The stationary state scales with 2n̄+1, so its det scales with (2n̄+1)².
    let det = |n_bar: f64| {
        CycleMap::new(&reference(n_bar), 1e-7, 10.0)
            .unwrap()
            .steady_state()
            .unwrap()
            .determinant()
    };
    assert!(det(10.0) >= 0.25);
    let ratio = det(0.0) * 21.0 * 21.0 / det(10.0);
    assert!((ratio - 1.0).abs() < 1e-9);
    assert!(det(0.0) < 0.25);
}

#[test]
fn cold_bath_relaxes_thermal_states_toward_vacuum() {
    let p = MechanicalParams::new(5e5, 1e2, 0.0).unwrap();
    let vacuum = MomentVector::vacuum();
    let drift = DriftModel::new(&p);
    let fixed = drift.propagator(1.0).unwrap().apply(&vacuum);
    assert!(rel_err(as_array(&fixed), as_array(&vacuum)) <= 1e-10);
    for m in [0.5, 3.0, 50.0] {
        let v0 = MomentVector::new(m + 0.5, 0.0, m + 0.5).unwrap();
        let mut last = StateMetrics::from_moments(&v0).unwrap().purity;
        for k in 1..=60 {
            let t = 1e-5 * 1.25f64.powi(k);
            let v = drift.propagator(t).unwrap().apply(&v0);
            let purity = StateMetrics::from_moments(&v).unwrap().purity;
            assert!(purity >= last - 1e-9, "m {m}: purity fell at t = {t:e}");
            assert!(purity <= 1.0 + 1e-9);
            last = purity;
        }
        assert!(last > 0.99);
    }
}

#[test]
fn stronger_kicks_squeeze_more() {
    let p = reference(10.0);
    let mut previous = f64::INFINITY;
    for i in 0..=20 {
        let theta = 0.5 * i as f64;
        let s = CycleMap::new(&p, 1e-7, theta)
            .unwrap()
            .steady_state()
            .unwrap();
        let sigma_min = min_quadrature_variance(&s);
        assert!(
            sigma_min <= previous,
            "theta {theta}: {sigma_min} > {previous}"
        );
        previous = sigma_min;
    }
}
