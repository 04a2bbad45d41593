//! Bessel functions of the first kind, orders 0, 1 and 2, for `x ≥ 0`.
//!
//! Three regimes:
//! - ascending power series for `x ≤ 8`,
//! - Miller backward recurrence normalised by `J₀ + 2ΣJ₂ₖ = 1` for `8 < x ≤ 25`,
//! - Hankel asymptotic expansion above 25.
//!
//! `J₂` uses the recurrence `2J₁(x)/x − J₀(x)` outside the series range.

use std::f64::consts::{FRAC_1_SQRT_2, PI};

use crate::error::{Error, Result};

const SERIES_MAX: f64 = 8.0;
const MILLER_MAX: f64 = 25.0;

/// `J_n(x)` for `n ∈ {0, 1, 2}` and `x ≥ 0`.
pub fn bessel_j(order: u32, x: f64) -> Result<f64> {
    if order > 2 {
        return Err(Error::Domain(format!("unsupported Bessel order {order}")));
    }
    if !(x >= 0.0) || !x.is_finite() {
        return Err(Error::Domain(format!("Bessel argument must be finite and >= 0, got {x}")));
    }
    Ok(match order {
        0 => j0(x),
        1 => j1(x),
        _ => j2(x),
    })
}

pub fn j0(x: f64) -> f64 {
    if x <= SERIES_MAX {
        series(0, x)
    } else if x <= MILLER_MAX {
        miller(x).0
    } else {
        hankel(0, x)
    }
}

pub fn j1(x: f64) -> f64 {
    if x <= SERIES_MAX {
        series(1, x)
    } else if x <= MILLER_MAX {
        miller(x).1
    } else {
        hankel(1, x)
    }
}

pub fn j2(x: f64) -> f64 {
    if x <= SERIES_MAX {
        series(2, x)
    } else {
        2.0 * j1(x) / x - j0(x)
    }
}

/// `J₁(x)/x`, equal to `1/2` at the origin.
pub fn j1_over_x(x: f64) -> f64 {
    if x <= SERIES_MAX {
        series_scaled(1, x)
    } else {
        j1(x) / x
    }
}

/// `J₂(x)/x`, equal to `0` at the origin.
pub fn j2_over_x(x: f64) -> f64 {
    if x <= SERIES_MAX {
        x * series_scaled(2, x)
    } else {
        j2(x) / x
    }
}

/// `Σ_k (−1)^k (x/2)^{2k+n} / (k!(k+n)!)`.
fn series(n: u32, x: f64) -> f64 {
    series_scaled(n, x) * if n == 0 { 1.0 } else { x.powi(n as i32) }
}

/// `J_n(x) / x^n` from the ascending series.
fn series_scaled(n: u32, x: f64) -> f64 {
    let q = 0.25 * x * x;
    // k = 0 term: 1 / (2^n n!)
    let mut term = match n {
        0 => 1.0,
        1 => 0.5,
        _ => 0.125,
    };
    let mut sum = term;
    for k in 1..60 {
        term *= -q / ((k * (k + n as i32)) as f64);
        sum += term;
        if term.abs() < 1e-18 * sum.abs().max(1e-300) {
            break;
        }
    }
    sum
}

/// `(J₀(x), J₁(x))` by backward recurrence.
fn miller(x: f64) -> (f64, f64) {
    let start = 2 * (((x + 40.0 + 10.0 * x.cbrt()) / 2.0).ceil() as usize);
    let mut next = 0.0; // J_{k+1}
    let mut cur = 1e-30; // J_k
    let mut norm = 0.0;
    let mut j0 = 0.0;
    let mut j1 = 0.0;
    for k in (1..=start).rev() {
        let prev = 2.0 * k as f64 / x * cur - next; // J_{k-1}
        next = cur;
        cur = prev;
        if cur.abs() > 1e250 {
            next *= 1e-250;
            cur *= 1e-250;
            norm *= 1e-250;
            j1 *= 1e-250;
        }
        let idx = k - 1;
        if idx == 1 {
            j1 = cur;
        }
        if idx == 0 {
            j0 = cur;
        } else if idx % 2 == 0 {
            norm += 2.0 * cur;
        }
    }
    norm += j0;
    (j0 / norm, j1 / norm)
}

fn hankel(n: u32, x: f64) -> f64 {
    let mu = 4.0 * (n * n) as f64;
    let mut p = 1.0;
    let mut q = 0.0;
    let mut term = 1.0;
    let mut prev_abs = f64::INFINITY;
    for k in 1..60 {
        let odd = (2 * k - 1) as f64;
        term *= (mu - odd * odd) / (k as f64 * 8.0 * x);
        if term.abs() > prev_abs {
            break;
        }
        prev_abs = term.abs();
        match k % 4 {
            1 => q += term,
            2 => p -= term,
            3 => q -= term,
            _ => p += term,
        }
        if term.abs() < 1e-17 {
            break;
        }
    }
    let (s, c) = x.sin_cos();
    // chi = x - (n/2 + 1/4) pi
    let (cos_chi, sin_chi) = match n {
        0 => ((c + s) * FRAC_1_SQRT_2, (s - c) * FRAC_1_SQRT_2),
        1 => ((s - c) * FRAC_1_SQRT_2, -(s + c) * FRAC_1_SQRT_2),
        _ => unreachable!("hankel is used for orders 0 and 1"),
    };
    (2.0 / (PI * x)).sqrt() * (p * cos_chi - q * sin_chi)
}
