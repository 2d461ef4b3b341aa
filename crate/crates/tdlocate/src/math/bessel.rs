use crate::error::{invalid, Result};

/// Spherical Bessel function of the first kind `jₙ(x)` for `n ∈ {0, 1, 2}`.
///
/// Closed forms are used for moderate and large arguments. Below `1e-3` a
/// four-term Taylor polynomial takes over. For orders 1 and 2 the closed
/// forms lose digits to cancellation well above that, so `x < 1` is
/// evaluated from the power series.
pub fn spherical_bessel(order: u32, x: f64) -> Result<f64> {
    if order > 2 {
        return Err(invalid(format!("spherical_bessel order {order} not in {{0,1,2}}")));
    }
    Ok(match order {
        0 => j0(x),
        1 => j1(x),
        _ => j2(x),
    })
}

pub(crate) fn j0(x: f64) -> f64 {
    if x.abs() < 1e-3 {
        taylor(0, x.abs())
    } else {
        x.sin() / x
    }
}

pub(crate) fn j1(x: f64) -> f64 {
    let ax = x.abs();
    let v = if ax < 1e-3 {
        taylor(1, ax)
    } else if ax < 1.0 {
        series(1, ax)
    } else {
        closed(1, ax)
    };
    if x < 0.0 {
        -v
    } else {
        v
    }
}

pub(crate) fn j2(x: f64) -> f64 {
    let ax = x.abs();
    if ax < 1e-3 {
        taylor(2, ax)
    } else if ax < 1.0 {
        series(2, ax)
    } else {
        closed(2, ax)
    }
}

fn taylor(order: u32, x: f64) -> f64 {
    let x2 = x * x;
    match order {
        0 => 1.0 - x2 / 6.0 * (1.0 - x2 / 20.0 * (1.0 - x2 / 42.0)),
        1 => x / 3.0 * (1.0 - x2 / 10.0 * (1.0 - x2 / 28.0 * (1.0 - x2 / 54.0))),
        _ => x2 / 15.0 * (1.0 - x2 / 14.0 * (1.0 - x2 / 36.0 * (1.0 - x2 / 66.0))),
    }
}

// jₙ(x) = Σₖ (-x²/2)ᵏ / k! · xⁿ / (2n+2k+1)!!
fn series(order: u32, x: f64) -> f64 {
    let n = order as f64;
    let mut dfact = 1.0;
    for k in 1..=order {
        dfact *= (2 * k + 1) as f64;
    }
    let mut term = x.powi(order as i32) / dfact;
    let mut sum = term;
    let x2 = x * x;
    for k in 1..30 {
        let kf = k as f64;
        term *= -x2 / (2.0 * kf * (2.0 * n + 2.0 * kf + 1.0));
        sum += term;
        if term.abs() < 1e-18 * sum.abs() {
            break;
        }
    }
    sum
}

fn closed(order: u32, x: f64) -> f64 {
    let (s, c) = x.sin_cos();
    match order {
        0 => s / x,
        1 => s / (x * x) - c / x,
        _ => (3.0 / (x * x * x) - 1.0 / x) * s - 3.0 / (x * x) * c,
    }
}
