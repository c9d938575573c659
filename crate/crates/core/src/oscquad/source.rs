//! The free-evolution source
//! `I0(x, t) = Integral_{|p|<1/a} exp(i p.x - i p^2 t) phi_kappa(p) d^3p`.
//!
//! After the azimuthal integral the source depends on `x` only through
//! `r_perp = |(x1, x2)|` and `x3`:
//! `I0 = 2 pi Integral dp3 C(p3) exp(i p3 x3 - i p3^2 t)
//!       Integral_0^{rho_max} rho J0(rho r_perp) exp(-i rho^2 t) / (kappa^2 + p^2) drho`.
//!
//! [`i0_eval`] evaluates that double integral directly. [`FastSource`] uses
//! `kappa^2 + p3^2 = c (1/a^2 - p3^2)` with `c = 1/(e^beta - 1)`: writing
//! `rho^2 = u (1/a^2 - p3^2)` turns the denominator into `(c + u)(1/a^2 - p3^2)`
//! and the phase into `u t / a^2 + p3^2 (1 - u) t`. The `p3` integral becomes a
//! Gaussian moment series via `J0(z sqrt(1 - e)) = sum (e z / 2)^k J_k(z) / k!`,
//! and the remaining `u` integral is done by Filon panels.

use std::cell::RefCell;
use std::f64::consts::PI;

use num_complex::Complex64;

use super::bessel::{bessel_j0, bessel_j1};
use super::filon::filon_integrate;
use super::{oscillatory_1d_with_breaks, QuadratureConfig};
use crate::error::Result;
use crate::geometry::{CurveFamily, Vec3};
use crate::spectrum::BoundState;

/// `I0(s, t)` at the curve point `x(s, t)` by nested phase-aware quadrature.
pub fn i0_eval(
    s: f64,
    t: f64,
    curve: &CurveFamily,
    state: &BoundState,
    quad: &QuadratureConfig,
) -> Result<Complex64> {
    i0_at(curve.position(s, t), t, state, quad).map_err(|e| e.at(format!("I0(s={s}, t={t})")))
}

/// Reference evaluation of the source at an arbitrary point.
pub fn i0_at(x: Vec3, t: f64, state: &BoundState, quad: &QuadratureConfig) -> Result<Complex64> {
    let r_perp = x.perp();
    let inv_a2 = 1.0 / (state.a * state.a);
    let edge = (1.0 / state.a).min(state.p3_max + 6.0 * state.packet.sigma3);
    let failure = RefCell::new(None);
    let outer = oscillatory_1d_with_breaks(
        |p3| {
            let Some(k2) = state.kappa_sq(p3) else {
                return Complex64::new(0.0, 0.0);
            };
            let rho_max = (inv_a2 - p3 * p3).max(0.0).sqrt();
            let base = k2 + p3 * p3;
            // J0 zeros are natural breakpoints for the radial amplitude.
            let breaks: Vec<f64> = if r_perp > 0.0 {
                let step = PI / r_perp;
                (1..)
                    .map(|k| k as f64 * step)
                    .take_while(|&b| b < rho_max)
                    .take(10_000)
                    .collect()
            } else {
                Vec::new()
            };
            let inner = oscillatory_1d_with_breaks(
                |rho| Complex64::new(rho * bessel_j0(rho * r_perp) / (base + rho * rho), 0.0),
                |rho| -rho * rho * t,
                |rho| -2.0 * rho * t,
                0.0,
                rho_max,
                &breaks,
                quad,
            );
            match inner {
                Ok(v) => v * state.c(p3),
                Err(e) => {
                    failure.borrow_mut().get_or_insert(e);
                    Complex64::new(0.0, 0.0)
                }
            }
        },
        |p3| p3 * x.x3 - p3 * p3 * t,
        |p3| x.x3 - 2.0 * p3 * t,
        -edge,
        edge,
        &[-state.p3_max, state.p3_max],
        quad,
    )?;
    if let Some(e) = failure.into_inner() {
        return Err(e);
    }
    Ok(outer * (2.0 * PI))
}

/// Number of terms kept in the `J0` multiplication series.
const SERIES_TERMS: usize = 10;

/// Filon panels resolve any frequency, so a high order keeps the panel count
/// low even when `t / a^2` is in the thousands.
const FILON_ORDER: usize = 16;

/// Cylindrical/Filon evaluation of the source, valid when the packet sits
/// well inside the existence region and the multiplication series converges
/// quickly (see [`FastSource::applicable`]).
#[derive(Debug, Clone, Copy)]
pub struct FastSource {
    state: BoundState,
    quad: QuadratureConfig,
}

impl FastSource {
    pub fn new(state: BoundState, quad: QuadratureConfig) -> Self {
        FastSource { state, quad }
    }

    pub fn state(&self) -> &BoundState {
        &self.state
    }

    /// Both truncations (Gaussian beyond `p3_max`, series beyond its tenth
    /// term) stay below about `1e-13` relative.
    pub fn applicable(state: &BoundState, r_perp: f64, x3: f64) -> bool {
        let sig = state.packet.sigma3;
        if state.p3_max < 8.5 * sig {
            return false;
        }
        let a = state.a;
        let scale = sig * sig + (x3 * sig * sig).powi(2);
        let eta = a * a * scale * (r_perp / a).max(1.0);
        eta <= 0.05
    }

    /// `I0` at cylindrical coordinates `(r_perp, x3)` and time `t`.
    pub fn eval(&self, r_perp: f64, x3: f64, t: f64) -> Result<Complex64> {
        let st = &self.state;
        let a = st.a;
        let c = st.cone_ratio();
        let half_inv_var = 0.5 / (st.packet.sigma3 * st.packet.sigma3);
        let amp = st.packet.amplitude;
        let g = |u: f64| -> Complex64 {
            let y = u.max(0.0).sqrt();
            let z0 = r_perp * y / a;
            let gamma = Complex64::new(half_inv_var, t * (1.0 - u));
            // Moments M_n = Integral p^n exp(-gamma p^2 + i p x3) dp by the recurrence
            // M_n = ((n-1) M_{n-2} + i x3 M_{n-1}) / (2 gamma).
            let inv2g = 0.5 / gamma;
            let m0 = (PI / gamma).sqrt() * (-(x3 * x3) * 0.5 * inv2g).exp();
            let ix = Complex64::new(0.0, x3);
            let mut moments = [Complex64::new(0.0, 0.0); 2 * SERIES_TERMS];
            moments[0] = m0;
            moments[1] = ix * m0 * inv2g;
            for n in 2..2 * SERIES_TERMS {
                moments[n] = (moments[n - 2] * (n - 1) as f64 + ix * moments[n - 1]) * inv2g;
            }
            // c_k = z0^k J_k(z0) by upward recurrence c_{k+1} = 2k c_k - z0^2 c_{k-1}.
            let (j0, j1) = (bessel_j0(z0), bessel_j1(z0));
            let mut ck = [0.0; SERIES_TERMS];
            ck[0] = j0;
            ck[1] = z0 * j1;
            for k in 1..SERIES_TERMS - 1 {
                ck[k + 1] = 2.0 * k as f64 * ck[k] - z0 * z0 * ck[k - 1];
            }
            let mut f = Complex64::new(0.0, 0.0);
            let mut coef = 1.0;
            for k in 0..SERIES_TERMS {
                if k > 0 {
                    coef *= a * a / (2.0 * k as f64);
                }
                f += moments[2 * k] * (coef * ck[k]);
            }
            f / (c + u)
        };
        let breaks: Vec<f64> = if r_perp > 0.0 {
            (1..)
                .map(|k| (k as f64 * PI * a / r_perp).powi(2))
                .take_while(|&b| b < 1.0)
                .collect()
        } else {
            Vec::new()
        };
        let mut cuts = breaks;
        cuts.extend([0.25, 0.5, 0.75]);
        let quad = QuadratureConfig {
            panel_rule_order: self.quad.panel_rule_order.max(FILON_ORDER),
            ..self.quad
        };
        let v = filon_integrate(g, -t / (a * a), 0.0, 1.0, &cuts, &quad)
            .map_err(|e| e.at(format!("fast source r_perp={r_perp} x3={x3} t={t}")))?;
        Ok(v * (PI * amp))
    }

    /// Source at `x`, falling back to the reference quadrature outside the
    /// fast path's domain.
    pub fn at(&self, x: Vec3, t: f64) -> Result<Complex64> {
        let (r, x3) = (x.perp(), x.x3);
        if Self::applicable(&self.state, r, x3) {
            self.eval(r, x3, t)
        } else {
            i0_at(x, t, &self.state, &self.quad)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectrum::PacketProfile;

    fn state(a: f64, beta: f64, sigma3: f64) -> BoundState {
        let eps = -1.0 / (2.0 * PI * PI * beta);
        BoundState::new(
            a,
            eps,
            PacketProfile {
                sigma3,
                amplitude: 1.0,
            },
        )
        .unwrap()
    }

    fn quad() -> QuadratureConfig {
        QuadratureConfig {
            abs_tol: 1e-13,
            rel_tol: 1e-11,
            ..QuadratureConfig::default()
        }
    }

    #[test]
    fn straight_static_source_is_real_on_axis() {
        let st = state(0.1, 1.0, 1.0);
        let v = i0_eval(0.7, 0.0, &CurveFamily::StraightLine, &st, &quad()).unwrap();
        assert!(v.im.abs() < 1e-9 * v.norm(), "{v}");
    }

    #[test]
    fn on_axis_matches_tensor_grid() {
        // r_perp = 0: J0 = 1. Dense tensor Gauss grid in (p3, rho) as oracle.
        let st = state(0.1, 1.0, 1.0);
        let (x3, t) = (0.4, 0.05);
        let got = i0_at(Vec3::new(0.0, 0.0, x3), t, &st, &quad()).unwrap();
        let rule = crate::oscquad::gauss::rule(64);
        let mut oracle = Complex64::new(0.0, 0.0);
        let np = 48;
        let h = 2.0 * st.p3_max / np as f64;
        for i in 0..np {
            let lo = -st.p3_max + i as f64 * h;
            oracle += rule.integrate(lo, lo + h, |p3| {
                let k2 = st.kappa_sq(p3).unwrap_or(0.0);
                let rho_max = (100.0 - p3 * p3).sqrt();
                let nr = 40;
                let hr = rho_max / nr as f64;
                let mut inner = Complex64::new(0.0, 0.0);
                for j in 0..nr {
                    let r0 = j as f64 * hr;
                    inner += rule.integrate(r0, r0 + hr, |rho| {
                        Complex64::from_polar(rho / (k2 + p3 * p3 + rho * rho), -rho * rho * t)
                    });
                }
                inner * st.c(p3) * Complex64::from_polar(1.0, p3 * x3 - p3 * p3 * t)
            });
        }
        oracle *= 2.0 * PI;
        assert!((got - oracle).norm() < 1e-7 * oracle.norm(), "{got} {oracle}");
    }

    #[test]
    fn fast_source_matches_reference() {
        let st = state(0.05, 0.5, 0.8);
        let fast = FastSource::new(st, quad());
        for &(r, x3, t) in &[(0.0, 0.0, 0.0), (0.0, 0.6, 0.02), (0.2, -0.3, 0.1), (0.45, 1.5, 0.3), (0.1, 0.0, 1.0)] {
            assert!(FastSource::applicable(&st, r, x3), "({r},{x3})");
            let f = fast.eval(r, x3, t).unwrap();
            let x = Vec3::new(r * 0.6, r * 0.8, x3);
            let g = i0_at(x, t, &st, &quad()).unwrap();
            assert!((f - g).norm() < 1e-8 * g.norm().max(1e-3), "({r},{x3},{t}): {f} vs {g}");
        }
    }

    #[test]
    fn wide_packets_use_the_reference_path() {
        let st = state(0.1, 1.0, 1.0);
        assert!(!FastSource::applicable(&st, 0.0, 0.0));
    }
}
