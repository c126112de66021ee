//! Exact transmission efficiency of a Gaussian beam through a displaced
//! circular aperture.
//!
//! Three independent routes are provided:
//!
//! * [`hp_exact_radial`]: one-dimensional radial integral with the Bessel
//!   kernel in exponentially scaled form,
//! * [`hp_exact_cartesian`]: nested quadrature of the Gaussian over the disk,
//! * [`hp_exact_marcum`]: `1 - Q1(2r/wz, 2Ra/wz)` via a Bessel series that
//!   shares no code with the quadrature routes.

use std::f64::consts::{FRAC_PI_2, PI};

use crate::error::{ensure_non_negative, ensure_positive, Result};
use crate::quadrature::integrate_with_breaks;
use crate::special::bessel_i0e;

pub use crate::quadrature::QuadratureSpec;

fn check_inputs(r: f64, wz: f64, ra: f64) -> Result<()> {
    ensure_non_negative("r", r)?;
    ensure_positive("wz", wz)?;
    ensure_positive("ra", ra)
}

/// Closed form at zero displacement: `1 - exp(-2 Ra^2 / wz^2)`.
pub fn hp_at_zero(wz: f64, ra: f64) -> Result<f64> {
    ensure_positive("wz", wz)?;
    ensure_positive("ra", ra)?;
    Ok(collected_fraction(wz, ra))
}

/// `eta = 1 - exp(-2 Ra^2 / wz^2)` without validation.
#[inline]
pub(crate) fn collected_fraction(wz: f64, ra: f64) -> f64 {
    -(-2.0 * ra * ra / (wz * wz)).exp_m1()
}

/// Exact `h_p(r)` from the radial (incomplete Weber) integral.
///
/// The integrand `exp(-2 r^2/wz^2) exp(-2 p^2/wz^2) I0(4 r p / wz^2)` is
/// evaluated as `exp(-2 (r - p)^2 / wz^2) * [e^(-x) I0(x)]`, which stays
/// finite for any geometry.
pub fn hp_exact_radial(r: f64, wz: f64, ra: f64, spec: &QuadratureSpec) -> Result<f64> {
    check_inputs(r, wz, ra)?;
    spec.validate()?;
    if r == 0.0 {
        return Ok(collected_fraction(wz, ra));
    }
    let w2 = wz * wz;
    let integrand = |p: f64| {
        let d = r - p;
        4.0 / w2 * p * (-2.0 * d * d / w2).exp() * bessel_i0e(4.0 * r * p / w2)
    };
    // The integrand is concentrated within a few wz of p = r.
    let breaks = [
        r - 8.0 * wz,
        r - 4.0 * wz,
        r - 2.0 * wz,
        r - wz,
        r,
        r + wz,
        r + 2.0 * wz,
        r + 4.0 * wz,
        r + 8.0 * wz,
    ];
    let hp = integrate_with_breaks(integrand, 0.0, ra, &breaks, spec)?;
    Ok(hp.clamp(0.0, 1.0))
}

/// Exact `h_p(r)` by nested quadrature of the beam over the aperture disk.
///
/// The outer variable is `x = Ra sin(theta)` so that the chord half-length
/// `Ra cos(theta)` is smooth at the rim.
pub fn hp_exact_cartesian(r: f64, wz: f64, ra: f64, spec: &QuadratureSpec) -> Result<f64> {
    check_inputs(r, wz, ra)?;
    spec.validate()?;
    let w2 = wz * wz;
    let norm = 2.0 / (PI * w2);

    let inner_spec = spec.with_rel_tol(spec.rel_tol * 0.1);
    let chord = |half: f64| -> Result<f64> {
        let g = |y: f64| (-2.0 * y * y / w2).exp();
        let breaks = [wz, 2.0 * wz, 4.0 * wz, 8.0 * wz];
        Ok(2.0 * integrate_with_breaks(g, 0.0, half, &breaks, &inner_spec)?)
    };

    // First inner failure is carried out of the closure.
    let failure = std::cell::RefCell::new(None);
    let outer = |theta: f64| {
        let (s, c) = theta.sin_cos();
        let x = ra * s;
        let d = x - r;
        let gx = (-2.0 * d * d / w2).exp();
        if gx == 0.0 {
            return 0.0;
        }
        match chord(ra * c) {
            Ok(v) => norm * gx * v * ra * c,
            Err(e) => {
                failure.borrow_mut().get_or_insert(e);
                0.0
            }
        }
    };
    let angle = |x: f64| (x / ra).clamp(-1.0, 1.0).asin();
    let breaks: Vec<f64> = [-8.0, -4.0, -2.0, -1.0, 0.0, 1.0, 2.0, 4.0, 8.0]
        .iter()
        .map(|m| angle(r + m * wz))
        .collect();
    let hp = integrate_with_breaks(outer, -FRAC_PI_2, FRAC_PI_2, &breaks, spec)?;
    if let Some(e) = failure.into_inner() {
        return Err(e);
    }
    Ok(hp.clamp(0.0, 1.0))
}

/// Generalized Marcum Q function of order one, `Q1(a, b)`.
///
/// Defined as `int_b^inf t exp(-(t^2 + a^2)/2) I0(a t) dt`.
pub fn marcum_q1(a: f64, b: f64) -> Result<f64> {
    ensure_non_negative("a", a)?;
    ensure_non_negative("b", b)?;
    Ok(marcum_q1_pair(a, b).0)
}

/// Exact `h_p(r) = 1 - Q1(2r/wz, 2Ra/wz)`.
pub fn hp_exact_marcum(r: f64, wz: f64, ra: f64) -> Result<f64> {
    check_inputs(r, wz, ra)?;
    Ok(marcum_q1_pair(2.0 * r / wz, 2.0 * ra / wz).1)
}

/// Returns `(Q1(a, b), 1 - Q1(a, b))`, each computed without cancellation
/// on the side where it is small.
fn marcum_q1_pair(a: f64, b: f64) -> (f64, f64) {
    if b == 0.0 {
        return (1.0, 0.0);
    }
    if a == 0.0 {
        let e = -0.5 * b * b;
        return (e.exp(), -e.exp_m1());
    }
    let x = a * b;
    let scaled = scaled_bessel_sequence(x);
    if a < b {
        // Q1 = exp(-(b-a)^2/2) sum_{k>=0} (a/b)^k e^{-x} I_k(x)
        let ratio = a / b;
        let prefactor = (-0.5 * (b - a) * (b - a)).exp();
        let q = (prefactor * power_series(ratio, &scaled, 0)).min(1.0);
        (q, 1.0 - q)
    } else {
        // 1 - Q1 = exp(-(a-b)^2/2) sum_{k>=1} (b/a)^k e^{-x} I_k(x)
        let ratio = b / a;
        let prefactor = (-0.5 * (a - b) * (a - b)).exp();
        let p = (prefactor * power_series(ratio, &scaled, 1)).min(1.0);
        (1.0 - p, p)
    }
}

fn power_series(ratio: f64, terms: &[f64], start: usize) -> f64 {
    let mut weight = ratio.powi(start as i32);
    let mut sum = 0.0;
    for &t in &terms[start..] {
        let term = weight * t;
        sum += term;
        if term < 1e-18 * sum && weight < 1e-18 {
            break;
        }
        weight *= ratio;
    }
    sum
}

/// `e^{-x} I_k(x)` for `k = 0..=n` with `n` large enough that the tail is
/// negligible, from Miller's backward recurrence normalized with
/// `e^{-x} (I_0 + 2 sum_{k>=1} I_k) = 1`.
fn scaled_bessel_sequence(x: f64) -> Vec<f64> {
    if x < 1e-3 {
        return small_argument_sequence(x);
    }
    let n = 40 + (10.0 * x.sqrt()).ceil() as usize;
    let start = n + 20;
    let mut u = vec![0.0; start + 2];
    u[start] = 1.0;
    for k in (1..=start).rev() {
        u[k - 1] = (2.0 * k as f64 / x) * u[k] + u[k + 1];
        if u[k - 1] > 1e250 {
            for v in &mut u[k - 1..] {
                *v *= 1e-250;
            }
        }
    }
    let norm = u[0] + 2.0 * u[1..].iter().sum::<f64>();
    u.truncate(n + 1);
    for v in &mut u {
        *v /= norm;
    }
    u
}

fn small_argument_sequence(x: f64) -> Vec<f64> {
    // I_k(x) = (x/2)^k / k! * (1 + q/(k+1) + q^2/(2 (k+1)(k+2))), q = x^2/4
    let half = 0.5 * x;
    let q = half * half;
    let damp = (-x).exp();
    let mut lead = 1.0;
    let mut out = Vec::with_capacity(24);
    for k in 0..24 {
        let kf = k as f64;
        if k > 0 {
            lead *= half / kf;
        }
        let series = 1.0 + q / (kf + 1.0) + q * q / (2.0 * (kf + 1.0) * (kf + 2.0));
        out.push(damp * lead * series);
        if lead == 0.0 {
            break;
        }
    }
    out
}
