#![allow(dead_code)]

use optospring::MomentVector;

/// Right-hand side of the second-moment equations, written out by hand.
pub fn moment_rhs(omega: f64, gamma: f64, n_bar: f64, v: [f64; 3]) -> [f64; 3] {
    let [q, qp, p] = v;
    [
        2.0 * omega * qp,
        -omega * q - gamma * qp + omega * p,
        -2.0 * omega * qp - 2.0 * gamma * p + gamma * (2.0 * n_bar + 1.0),
    ]
}

/// Classic fourth-order Runge-Kutta over `[0, t]` with `steps` equal steps.
pub fn rk4(omega: f64, gamma: f64, n_bar: f64, v0: [f64; 3], t: f64, steps: usize) -> [f64; 3] {
    let h = t / steps as f64;
    let f = |v: [f64; 3]| moment_rhs(omega, gamma, n_bar, v);
    let axpy =
        |v: [f64; 3], k: [f64; 3], s: f64| [v[0] + s * k[0], v[1] + s * k[1], v[2] + s * k[2]];
    let mut v = v0;
    for _ in 0..steps {
        let k1 = f(v);
        let k2 = f(axpy(v, k1, h / 2.0));
        let k3 = f(axpy(v, k2, h / 2.0));
        let k4 = f(axpy(v, k3, h));
        for i in 0..3 {
            v[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
    }
    v
}

/// Step count keeping `ω h` and `γ h` below 1e-3, and at least 10⁴ steps.
pub fn rk4_steps(omega: f64, gamma: f64, t: f64) -> usize {
    ((2.0 * omega.max(gamma) * t / 1e-3).ceil() as usize).max(10_000)
}

pub fn as_array(v: &MomentVector) -> [f64; 3] {
    [v.sigma_q, v.sigma_qp, v.sigma_p]
}

/// Largest component difference relative to the largest reference component.
pub fn rel_err(got: [f64; 3], want: [f64; 3]) -> f64 {
    let scale = want.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    got.iter()
        .zip(want)
        .fold(0.0f64, |m, (g, w)| m.max((g - w).abs()))
        / scale
}

/// Pure squeezed state with variance `s` along the angle `phi`.
pub fn squeezed(s: f64, phi: f64) -> MomentVector {
    let big = 0.25 / s;
    let (c, sn) = (phi.cos(), phi.sin());
    MomentVector::new(
        s * c * c + big * sn * sn,
        (s - big) * c * sn,
        s * sn * sn + big * c * c,
    )
    .unwrap()
}
