//! The separable string potential
//! `<p|V(t)|p'> = eps_a chi(p) chi(p') Integral exp(-i (p - p').x(s,t)) g(s) ds`.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::geometry::{CurveFamily, Vec3};
use crate::oscquad::{gauss, oscillatory_1d_with_breaks, QuadratureConfig};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PotentialParams {
    /// Cutoff length; momenta are restricted to `|p| < 1/a`.
    pub a: f64,
    pub eps_a: f64,
    /// Half-length of the plateau where `g = 1`.
    pub r: f64,
    /// Width of the smooth transition from 1 to 0.
    pub w: f64,
}

impl PotentialParams {
    pub fn new(a: f64, eps_a: f64, r: f64, w: f64) -> Result<Self> {
        let p = PotentialParams { a, eps_a, r, w };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.a > 0.0 && self.a.is_finite()) {
            return Err(Error::invalid("a", "must be positive"));
        }
        if !(self.eps_a < 0.0) || !self.eps_a.is_finite() {
            return Err(Error::InvalidCoupling(self.eps_a));
        }
        if !(self.r >= 1.0 && self.r.is_finite()) {
            return Err(Error::invalid("R", "must be at least 1"));
        }
        if !(self.w > 0.0 && self.w.is_finite()) {
            return Err(Error::invalid("w", "must be positive"));
        }
        Ok(())
    }

    pub fn p_cut(&self) -> f64 {
        1.0 / self.a
    }

    /// Half-length of the support of `g`.
    pub fn support(&self) -> f64 {
        self.r + self.w
    }

    pub fn g(&self, s: f64) -> f64 {
        form_factor(s, self.r, self.w)
    }
}

/// Sharp momentum cutoff; the sphere `|p| = 1/a` itself is excluded.
pub fn chi(p: Vec3, a: f64) -> f64 {
    if p.norm() * a < 1.0 {
        1.0
    } else {
        0.0
    }
}

fn bump(x: f64) -> f64 {
    if x > 0.0 {
        (-1.0 / x).exp()
    } else {
        0.0
    }
}

/// Smooth step from 0 at `xi <= 0` to 1 at `xi >= 1`.
pub fn smooth_step(xi: f64) -> f64 {
    if xi <= 0.0 {
        0.0
    } else if xi >= 1.0 {
        1.0
    } else {
        let (u, v) = (bump(xi), bump(1.0 - xi));
        u / (u + v)
    }
}

/// Longitudinal form factor: 1 on `[-R, R]`, 0 beyond `R + w`, infinitely smooth.
pub fn form_factor(s: f64, r: f64, w: f64) -> f64 {
    let x = s.abs();
    if x <= r {
        1.0
    } else if x >= r + w {
        0.0
    } else {
        1.0 - smooth_step((x - r) / w)
    }
}

/// Fourier transform `Integral g(s) exp(-i k s) ds`, real because `g` is even.
///
/// The plateau contributes `2 sin(kR)/k`; the transition is integrated with a
/// fixed Gauss rule on panels short against both `w` and `1/|k|`.
pub fn form_factor_transform(k: f64, r: f64, w: f64) -> f64 {
    let plateau = if k.abs() * r < 1e-8 {
        2.0 * r
    } else {
        2.0 * (k * r).sin() / k
    };
    let rule = gauss::rule(24);
    let panels = ((k.abs() * w / 2.0).ceil() as usize).max(4);
    let h = w / panels as f64;
    let mut edge = 0.0;
    for j in 0..panels {
        let lo = j as f64 * h;
        edge += rule.integrate(lo, lo + h, |x| (1.0 - smooth_step(x / w)) * (k * (r + x)).cos());
    }
    plateau + 2.0 * edge
}

/// `<p|V(t)|p'>` with the line integral over `|s| <= R + w` done by
/// phase-aware quadrature.
pub fn matrix_element(
    p: Vec3,
    p_prime: Vec3,
    t: f64,
    curve: &CurveFamily,
    params: &PotentialParams,
    quad: &QuadratureConfig,
) -> Result<Complex64> {
    if chi(p, params.a) == 0.0 || chi(p_prime, params.a) == 0.0 {
        return Ok(Complex64::new(0.0, 0.0));
    }
    let q = p - p_prime;
    let l = params.support();
    let line = oscillatory_1d_with_breaks(
        |s| Complex64::new(params.g(s), 0.0),
        |s| -q.dot(curve.position(s, t)),
        |s| -q.dot(curve.tangent(s, t)),
        -l,
        l,
        &[-params.r, params.r],
        quad,
    )
    .map_err(|e| e.at(format!("matrix element t={t}")))?;
    Ok(line * params.eps_a)
}
