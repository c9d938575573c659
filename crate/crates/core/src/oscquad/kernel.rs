//! The propagation kernel `K = i Integral_{|p|<1/a} exp(-i p^2 tau + i p.r) d^3p`.
//!
//! After the angular integration only `tau` and `d = |r|` remain:
//! `K = i (4 pi / d) Integral_0^{1/a} p sin(p d) exp(-i p^2 tau) dp`.
//! [`kernel_k`] evaluates that radial integral adaptively. [`kernel_k_closed`]
//! integrates it by parts into a Fresnel integral written with `erf`, and is
//! the fast path used inside double sums.

use std::f64::consts::PI;

use errorfunctions::ComplexErrorFunctions;
use num_complex::Complex64;

use super::{gauss, oscillatory_1d, QuadratureConfig};
use crate::error::{Error, Result};

const I: Complex64 = Complex64::new(0.0, 1.0);

/// Below this separation the `d -> 0` limit branch is used.
pub const SMALL_D: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelSample {
    pub tau: f64,
    pub d: f64,
    pub value: Complex64,
}

/// Volume of the cutoff ball, an upper bound for `|K|`.
pub fn ball_volume(a: f64) -> f64 {
    4.0 * PI / (3.0 * a * a * a)
}

fn check(tau: f64, d: f64, a: f64) -> Result<()> {
    if !(tau >= 0.0 && tau.is_finite()) {
        return Err(Error::invalid("tau", "must be finite and non-negative"));
    }
    if !(d >= 0.0 && d.is_finite()) {
        return Err(Error::invalid("d", "must be finite and non-negative"));
    }
    if !(a > 0.0) {
        return Err(Error::invalid("a", "must be positive"));
    }
    Ok(())
}

/// Radial quadrature of the kernel.
pub fn kernel_k(tau: f64, d: f64, a: f64, quad: &QuadratureConfig) -> Result<KernelSample> {
    check(tau, d, a)?;
    let p_max = 1.0 / a;
    let value = if d < SMALL_D {
        let v = oscillatory_1d(
            |p| Complex64::new(p * p, 0.0),
            |p| -p * p * tau,
            |p| -2.0 * p * tau,
            0.0,
            p_max,
            quad,
        )?;
        I * 4.0 * PI * v
    } else {
        // sin(pd) = (e^{ipd} - e^{-ipd}) / 2i, one phase-aware integral per branch.
        let plus = oscillatory_1d(
            |p| Complex64::new(p, 0.0),
            |p| p * d - p * p * tau,
            |p| d - 2.0 * p * tau,
            0.0,
            p_max,
            quad,
        )?;
        let minus = oscillatory_1d(
            |p| Complex64::new(p, 0.0),
            |p| -p * d - p * p * tau,
            |p| -d - 2.0 * p * tau,
            0.0,
            p_max,
            quad,
        )?;
        I * (4.0 * PI / d) * (plus - minus) / (2.0 * I)
    };
    Ok(KernelSample { tau, d, value })
}

fn sinc(x: f64) -> f64 {
    if x.abs() < 1e-4 {
        1.0 - x * x / 6.0
    } else {
        x.sin() / x
    }
}

/// `Integral_{-P}^{P} exp(-i tau p^2 + i p d) dp` through the error function.
fn fresnel_window(tau: f64, d: f64, p_max: f64) -> Complex64 {
    let alpha = (I * tau).sqrt();
    let p0 = d / (2.0 * tau);
    let bracket = if p0 > p_max {
        // Both erf terms approach +-1; the erfc form keeps the small difference.
        (alpha * (p0 - p_max)).erfc() - (alpha * (p0 + p_max)).erfc()
    } else {
        (alpha * (p_max - p0)).erf() + (alpha * (p_max + p0)).erf()
    };
    Complex64::from_polar(1.0, tau * p0 * p0) * bracket * (PI.sqrt() / (2.0 * alpha))
}

/// Closed form `K = (pi / tau) [G - 2 P exp(-i tau P^2) sinc(P d)]`, with the
/// Fresnel window `G`. For `tau P^2 < 1/2` the bracket cancels, so a fixed
/// Gauss rule on the radial integral is used instead.
pub fn kernel_k_closed(tau: f64, d: f64, a: f64) -> Complex64 {
    let p_max = 1.0 / a;
    if tau * p_max * p_max < 0.5 {
        return kernel_small_tau(tau, d, p_max);
    }
    let g = fresnel_window(tau, d, p_max);
    let edge = Complex64::from_polar(2.0 * p_max * sinc(p_max * d), -tau * p_max * p_max);
    (g - edge) * (PI / tau)
}

fn kernel_small_tau(tau: f64, d: f64, p_max: f64) -> Complex64 {
    let rule = gauss::rule(20);
    let panels = ((p_max * d.max(1e-300)) / 2.0).ceil().clamp(1.0, 1e6) as usize;
    let h = p_max / panels as f64;
    let mut acc = Complex64::new(0.0, 0.0);
    for k in 0..panels {
        let lo = k as f64 * h;
        acc += rule.integrate(lo, lo + h, |p| {
            // p sin(pd)/d, written to stay finite as d -> 0.
            let radial = p * p * sinc(p * d);
            Complex64::from_polar(radial, -p * p * tau)
        });
    }
    I * 4.0 * PI * acc
}
