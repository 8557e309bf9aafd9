//! Dense matrix exponential for small fixed-size matrices.
//!
//! Degree-13 diagonal Padé approximant with scaling and squaring (Higham, 2005).
//! The scaling keeps `‖A/2^s‖₁ ≤ 5.37`, where the approximant is accurate to
//! unit roundoff in exact arithmetic.

use nalgebra::SMatrix;

use crate::error::{Error, Result};

const PADE_13: [f64; 14] = [
    64_764_752_532_480_000.0,
    32_382_376_266_240_000.0,
    7_771_770_303_897_600.0,
    1_187_353_796_428_800.0,
    129_060_195_264_000.0,
    10_559_470_521_600.0,
    670_442_572_800.0,
    33_522_128_640.0,
    1_323_241_920.0,
    40_840_800.0,
    960_960.0,
    16_380.0,
    182.0,
    1.0,
];

const THETA_13: f64 = 5.371_920_351_148_152;

fn norm_1<const D: usize>(a: &SMatrix<f64, D, D>) -> f64 {
    a.column_iter()
        .map(|c| c.iter().map(|x| x.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// Computes `exp(generator · t)`.
///
/// Returns the identity exactly for `t == 0`. Rejects negative or non-finite
/// `t` and non-finite matrix entries.
pub fn matrix_exponential<const D: usize>(
    generator: &SMatrix<f64, D, D>,
    t: f64,
) -> Result<SMatrix<f64, D, D>> {
    if !t.is_finite() || generator.iter().any(|x| !x.is_finite()) {
        return Err(Error::NonFinite);
    }
    if t < 0.0 {
        return Err(crate::error::invalid("t", format!("must be >= 0, got {t}")));
    }
    if t == 0.0 {
        return Ok(SMatrix::identity());
    }
    expm(&(generator * t))
}

/// Exponential of an already-scaled matrix.
pub fn expm<const D: usize>(a: &SMatrix<f64, D, D>) -> Result<SMatrix<f64, D, D>> {
    if a.iter().any(|x| !x.is_finite()) {
        return Err(Error::NonFinite);
    }
    let norm = norm_1(a);
    let squarings = if norm > THETA_13 {
        (norm / THETA_13).log2().ceil() as i32
    } else {
        0
    };
    let a = a * 2f64.powi(-squarings);

    let b = &PADE_13;
    let ident = SMatrix::<f64, D, D>::identity();
    let a2 = a * a;
    let a4 = a2 * a2;
    let a6 = a4 * a2;

    let u_inner = a6 * (a6 * b[13] + a4 * b[11] + a2 * b[9])
        + a6 * b[7]
        + a4 * b[5]
        + a2 * b[3]
        + ident * b[1];
    let u = a * u_inner;
    let v = a6 * (a6 * b[12] + a4 * b[10] + a2 * b[8])
        + a6 * b[6]
        + a4 * b[4]
        + a2 * b[2]
        + ident * b[0];

    let mut r = solve(v - u, v + u).ok_or(Error::Singular)?;
    for _ in 0..squarings {
        r = r * r;
    }
    Ok(r)
}

/// Solves `a x = b` by Gaussian elimination with partial pivoting.
fn solve<const D: usize>(
    mut a: SMatrix<f64, D, D>,
    mut b: SMatrix<f64, D, D>,
) -> Option<SMatrix<f64, D, D>> {
    for col in 0..D {
        let pivot = (col..D).max_by(|&i, &j| a[(i, col)].abs().total_cmp(&a[(j, col)].abs()))?;
        if a[(pivot, col)] == 0.0 {
            return None;
        }
        a.swap_rows(col, pivot);
        b.swap_rows(col, pivot);
        for row in col + 1..D {
            let f = a[(row, col)] / a[(col, col)];
            if f != 0.0 {
                for k in col..D {
                    a[(row, k)] -= f * a[(col, k)];
                }
                for k in 0..D {
                    b[(row, k)] -= f * b[(col, k)];
                }
            }
        }
    }
    for col in (0..D).rev() {
        for k in 0..D {
            let mut x = b[(col, k)];
            for j in col + 1..D {
                x -= a[(col, j)] * b[(j, k)];
            }
            b[(col, k)] = x / a[(col, col)];
        }
    }
    Some(b)
}
