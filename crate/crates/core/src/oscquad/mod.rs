//! Oscillatory-integral primitives.
//!
//! [`oscillatory_1d`] sizes its initial panels from the analytic phase rate and
//! then bisects adaptively. [`filon`] integrates a smooth amplitude against an
//! exact linear phase. The kernel and the source field live in [`kernel`] and
//! [`source`].

pub mod bessel;
pub mod filon;
pub mod gauss;
pub mod kernel;
pub mod source;

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::error::{Error, Result};

pub use bessel::{bessel_j0, bessel_j1};
pub use kernel::{kernel_k, kernel_k_closed, KernelSample};
pub use source::{i0_eval, FastSource};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadratureConfig {
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub max_panels: usize,
    pub panel_rule_order: usize,
}

impl Default for QuadratureConfig {
    fn default() -> Self {
        QuadratureConfig {
            abs_tol: 1e-10,
            rel_tol: 1e-8,
            max_panels: 20_000,
            panel_rule_order: 10,
        }
    }
}

impl QuadratureConfig {
    /// Validated constructor. `max_panels` only needs to be positive here; a
    /// budget too small for an integrand surfaces as a quadrature failure.
    pub fn new(abs_tol: f64, rel_tol: f64, max_panels: usize, panel_rule_order: usize) -> Result<Self> {
        let q = QuadratureConfig {
            abs_tol,
            rel_tol,
            max_panels,
            panel_rule_order,
        };
        q.validate()?;
        Ok(q)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.abs_tol > 0.0 && self.abs_tol.is_finite()) {
            return Err(Error::invalid("abs_tol", "must be positive"));
        }
        if !(self.rel_tol > 0.0 && self.rel_tol.is_finite()) {
            return Err(Error::invalid("rel_tol", "must be positive"));
        }
        if self.max_panels == 0 {
            return Err(Error::invalid("max_panels", "must be at least 1"));
        }
        if !(2..=gauss::MAX_ORDER).contains(&self.panel_rule_order) {
            return Err(Error::invalid(
                "panel_rule_order",
                format!("must lie in 2..={}", gauss::MAX_ORDER),
            ));
        }
        Ok(())
    }

    /// The same configuration with both tolerances multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Self {
        QuadratureConfig {
            abs_tol: self.abs_tol * factor,
            rel_tol: self.rel_tol * factor,
            ..*self
        }
    }

    fn target(&self, estimate: f64) -> f64 {
        self.abs_tol.max(self.rel_tol * estimate)
    }
}

pub(crate) fn failure(lo: f64, hi: f64, panels: usize) -> Error {
    Error::QuadratureFailure {
        lo,
        hi,
        panels,
        context: String::new(),
    }
}

/// Splits `[lo, hi]` into panels no longer than `pi / max(|rate|, 1)`,
/// honouring the given interior breakpoints.
pub(crate) fn phase_panels(
    rate: impl Fn(f64) -> f64,
    lo: f64,
    hi: f64,
    breaks: &[f64],
    max_panels: usize,
) -> Result<Vec<(f64, f64)>> {
    let mut cuts: Vec<f64> = breaks.iter().copied().filter(|&b| b > lo && b < hi).collect();
    cuts.sort_by(f64::total_cmp);
    cuts.dedup();
    cuts.push(hi);
    let limit = |x: f64| PI / rate(x).abs().max(1.0);
    let mut panels = Vec::new();
    let mut a = lo;
    for &b in &cuts {
        while a < b {
            let mut h = limit(a);
            for _ in 0..8 {
                let end = (a + h).min(b);
                let h2 = limit(end).min(limit(0.5 * (a + end)));
                if h2 >= h * 0.999 || (end - a) <= h2 {
                    break;
                }
                h = h2;
            }
            let end = if a + h >= b || b - (a + h) < 1e-12 * (b - a) { b } else { a + h };
            panels.push((a, end));
            if panels.len() > max_panels {
                return Err(failure(lo, hi, panels.len()));
            }
            a = end;
        }
    }
    Ok(panels)
}

/// `Integral_lo^hi amplitude(x) exp(i phase(x)) dx`.
///
/// `phase_rate` must be the derivative of `phase`; it only sizes the initial
/// panels. Each panel is compared against its two halves with the configured
/// Gauss rule and bisected until the discrepancy meets its share of
/// `max(abs_tol, rel_tol |estimate|)`.
pub fn oscillatory_1d<A, P, R>(
    amplitude: A,
    phase: P,
    phase_rate: R,
    lo: f64,
    hi: f64,
    quad: &QuadratureConfig,
) -> Result<Complex64>
where
    A: Fn(f64) -> Complex64,
    P: Fn(f64) -> f64,
    R: Fn(f64) -> f64,
{
    oscillatory_1d_with_breaks(amplitude, phase, phase_rate, lo, hi, &[], quad)
}

/// [`oscillatory_1d`] with interior points where the amplitude may have kinks.
pub fn oscillatory_1d_with_breaks<A, P, R>(
    amplitude: A,
    phase: P,
    phase_rate: R,
    lo: f64,
    hi: f64,
    breaks: &[f64],
    quad: &QuadratureConfig,
) -> Result<Complex64>
where
    A: Fn(f64) -> Complex64,
    P: Fn(f64) -> f64,
    R: Fn(f64) -> f64,
{
    if !(lo.is_finite() && hi.is_finite()) {
        return Err(Error::invalid("interval", "must be finite"));
    }
    if hi == lo {
        return Ok(Complex64::new(0.0, 0.0));
    }
    if hi < lo {
        return oscillatory_1d_with_breaks(amplitude, phase, phase_rate, hi, lo, breaks, quad)
            .map(|v| -v);
    }
    let panels = phase_panels(&phase_rate, lo, hi, breaks, quad.max_panels)?;
    let rule = gauss::rule(quad.panel_rule_order);
    let f = |x: f64| amplitude(x) * Complex64::from_polar(1.0, phase(x));
    adaptive(&f, rule, &panels, lo, hi, quad)
}

const ROUNDOFF: f64 = 64.0 * f64::EPSILON;

/// Adaptive bisection over an initial partition.
pub(crate) fn adaptive(
    f: &impl Fn(f64) -> Complex64,
    rule: &gauss::GaussRule,
    initial: &[(f64, f64)],
    lo: f64,
    hi: f64,
    quad: &QuadratureConfig,
) -> Result<Complex64> {
    // Each panel carries its value and the integral of |f|, which sets the
    // round-off floor below which bisection cannot improve the estimate.
    let panel = |a: f64, b: f64| -> (Complex64, f64) {
        let (m, h) = (0.5 * (a + b), 0.5 * (b - a));
        let mut acc = Complex64::new(0.0, 0.0);
        let mut mag = 0.0;
        for (x, w) in rule.iter() {
            let v = f(m + h * x);
            acc += v * w;
            mag += v.norm() * w;
        }
        (acc * h, mag * h)
    };
    let length = hi - lo;
    let mut stack: Vec<(f64, f64, Complex64)> = initial
        .iter()
        .rev()
        .map(|&(a, b)| (a, b, panel(a, b).0))
        .collect();
    let mut total: Complex64 = stack.iter().map(|p| p.2).sum();
    let mut count = stack.len();
    let mut result = Complex64::new(0.0, 0.0);
    while let Some((a, b, whole)) = stack.pop() {
        let m = 0.5 * (a + b);
        let ((left, lmag), (right, rmag)) = (panel(a, m), panel(m, b));
        let refined = left + right;
        let tol = (quad.target(total.norm()) * (b - a) / length).max(ROUNDOFF * (lmag + rmag));
        if (refined - whole).norm() <= tol {
            result += refined;
            total += refined - whole;
            continue;
        }
        if m <= a || m >= b {
            return Err(failure(lo, hi, count));
        }
        count += 1;
        if count > quad.max_panels {
            return Err(failure(lo, hi, count));
        }
        total += refined - whole;
        stack.push((m, b, right));
        stack.push((a, m, left));
    }
    Ok(result)
}

/// Adaptive integral of a smooth real function.
pub fn integrate_real(f: impl Fn(f64) -> f64, lo: f64, hi: f64, quad: &QuadratureConfig) -> Result<f64> {
    oscillatory_1d(|x| Complex64::new(f(x), 0.0), |_| 0.0, |_| 0.0, lo, hi, quad).map(|v| v.re)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn quad() -> QuadratureConfig {
        QuadratureConfig::default()
    }

    #[test]
    fn constant_integrand() {
        let v = oscillatory_1d(|_| Complex64::new(1.0, 0.0), |_| 0.0, |_| 0.0, 0.0, 1.0, &quad())
            .unwrap();
        assert!((v - Complex64::new(1.0, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn full_periods_vanish() {
        for k in [5.0, 50.0, 500.0] {
            let v = oscillatory_1d(
                |_| Complex64::new(1.0, 0.0),
                |x| k * x,
                |_| k,
                0.0,
                2.0 * PI / k,
                &quad(),
            )
            .unwrap();
            assert!(v.norm() < quad().abs_tol, "k={k} v={v}");
        }
    }

    #[test]
    fn gaussian_fourier_transform() {
        let v = oscillatory_1d(
            |x| Complex64::new((-x * x).exp(), 0.0),
            |x| 10.0 * x,
            |_| 10.0,
            -6.0,
            6.0,
            &quad(),
        )
        .unwrap();
        // sqrt(pi) exp(-25), frozen from high-precision arithmetic.
        let exact = 2.461573958461511e-11;
        assert!((v.re - exact).abs() < 1e-15, "{v}");
        assert!(v.im.abs() < 1e-15);

        // Brute-force midpoint oracle with 10^6 points.
        let n = 1_000_000;
        let h = 12.0 / n as f64;
        let riemann: f64 = (0..n)
            .map(|k| {
                let x = -6.0 + (k as f64 + 0.5) * h;
                (-x * x).exp() * (10.0 * x).cos()
            })
            .sum::<f64>()
            * h;
        assert!((v.re - riemann).abs() < 1e-14, "{} {riemann}", v.re);
    }

    #[test]
    fn reversed_interval_negates() {
        let f = |x: f64| Complex64::new(x.cos(), 0.0);
        let a = oscillatory_1d(f, |x| x * x, |x| 2.0 * x, 0.0, 3.0, &quad()).unwrap();
        let b = oscillatory_1d(f, |x| x * x, |x| 2.0 * x, 3.0, 0.0, &quad()).unwrap();
        assert!((a + b).norm() < 1e-14);
    }

    #[test]
    fn budget_exhaustion_is_reported() {
        let q = QuadratureConfig {
            max_panels: 1,
            ..quad()
        };
        let r = oscillatory_1d(|_| Complex64::new(1.0, 0.0), |x| 50.0 * x, |_| 50.0, 0.0, 10.0, &q);
        assert!(matches!(r, Err(Error::QuadratureFailure { .. })));
    }

    #[test]
    fn breakpoints_handle_kinks() {
        let v = oscillatory_1d_with_breaks(
            |x| Complex64::new((x - 0.3).abs(), 0.0),
            |_| 0.0,
            |_| 0.0,
            0.0,
            1.0,
            &[0.3],
            &quad(),
        )
        .unwrap();
        assert!((v.re - (0.045 + 0.245)).abs() < 1e-14);
    }

    #[test]
    fn halving_tolerance_is_consistent() {
        let q = quad();
        let f = |x: f64| Complex64::new(1.0 / (1.0 + x * x), 0.0);
        let a = oscillatory_1d(f, |x| 30.0 * x.sin(), |x| 30.0 * x.cos(), -2.0, 5.0, &q).unwrap();
        let b = oscillatory_1d(f, |x| 30.0 * x.sin(), |x| 30.0 * x.cos(), -2.0, 5.0, &q.scaled(0.5))
            .unwrap();
        assert!((a - b).norm() < q.target(a.norm()));
    }

    #[test]
    fn config_validation() {
        assert!(QuadratureConfig::new(0.0, 1e-8, 100, 10).is_err());
        assert!(QuadratureConfig::new(1e-10, 1e-8, 0, 10).is_err());
        assert!(QuadratureConfig::new(1e-10, 1e-8, 100, 1).is_err());
        assert!(QuadratureConfig::new(1e-10, 1e-8, 100, 10).is_ok());
    }
}
