//! Transverse bound state of the straight static string.
//!
//! With `beta = -1 / (2 pi^2 eps_a)` the binding condition integrates to
//! `ln((kappa^2 + 1/a^2) / (kappa^2 + p3^2)) = beta`, so
//! `kappa^2(p3) = (1/a^2 - e^beta p3^2) / (e^beta - 1)`, positive for
//! `|p3| < e^{-beta/2} / a`.

use std::cell::RefCell;
use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::geometry::Vec3;
use crate::oscquad::{gauss, integrate_real, QuadratureConfig};

pub fn beta(eps_a: f64) -> Result<f64> {
    if !(eps_a < 0.0) || !eps_a.is_finite() {
        return Err(Error::InvalidCoupling(eps_a));
    }
    Ok(-1.0 / (2.0 * PI * PI * eps_a))
}

fn check_a(a: f64) -> Result<()> {
    if !(a > 0.0 && a.is_finite()) {
        return Err(Error::invalid("a", "must be positive"));
    }
    Ok(())
}

/// Existence threshold `e^{-beta/2} / a`.
pub fn p3_threshold(a: f64, eps_a: f64) -> Result<f64> {
    check_a(a)?;
    Ok((-0.5 * beta(eps_a)?).exp() / a)
}

pub fn kappa_sq(p3: f64, a: f64, eps_a: f64) -> Result<f64> {
    check_a(a)?;
    let b = beta(eps_a)?;
    let eb = b.exp();
    let k2 = (1.0 / (a * a) - eb * p3 * p3) / b.exp_m1();
    if !(k2 > 0.0) {
        return Err(Error::NoBoundState {
            p3,
            threshold: (-0.5 * b).exp() / a,
        });
    }
    Ok(k2)
}

/// Root of `F(k2) = 1 + 2 pi^2 eps_a ln((k2 + 1/a^2) / (k2 + p3^2))` by
/// bisection safeguarded secant steps.
///
/// `F` increases from `F(0+)` towards 1, so the bracket starts at `(0, 1/a^2]`
/// and its upper end doubles until `F` turns positive; for `beta < ln 2` the
/// root lies above `1/a^2`.
pub fn kappa_sq_numeric(p3: f64, a: f64, eps_a: f64, tol: f64) -> Result<f64> {
    check_a(a)?;
    let b = beta(eps_a)?;
    if !(tol > 0.0) {
        return Err(Error::invalid("tol", "must be positive"));
    }
    let inv_a2 = 1.0 / (a * a);
    let f = |k2: f64| 1.0 + 2.0 * PI * PI * eps_a * ((k2 + inv_a2) / (k2 + p3 * p3)).ln();
    let no_root = || Error::NoBoundState {
        p3,
        threshold: (-0.5 * b).exp() / a,
    };
    let mut lo = 0.0;
    let flo0 = if p3 == 0.0 { f64::NEG_INFINITY } else { f(0.0) };
    if !(flo0 < 0.0) {
        return Err(no_root());
    }
    let mut hi = inv_a2;
    let mut fhi = f(hi);
    let mut doublings = 0;
    while fhi <= 0.0 {
        hi *= 2.0;
        fhi = f(hi);
        doublings += 1;
        if doublings > 200 {
            return Err(no_root());
        }
    }
    let mut flo = flo0;
    // Illinois: halve the stale endpoint's value when one side is kept twice,
    // otherwise the secant creeps in from the side of the root.
    let mut last_side = 0i8;
    for _ in 0..400 {
        let secant = if flo.is_finite() {
            hi - fhi * (hi - lo) / (fhi - flo)
        } else {
            f64::NAN
        };
        let x = if secant > lo && secant < hi {
            secant
        } else {
            0.5 * (lo + hi)
        };
        let fx = f(x);
        if fx == 0.0 {
            return Ok(x);
        }
        if fx < 0.0 {
            lo = x;
            flo = fx;
            if last_side == -1 {
                fhi *= 0.5;
            }
            last_side = -1;
        } else {
            hi = x;
            fhi = fx;
            if last_side == 1 && flo.is_finite() {
                flo *= 0.5;
            }
            last_side = 1;
        }
        if hi - lo <= tol * hi {
            break;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// `Integral_{p1^2 + p2^2 < 1/a^2 - p3^2} dp1 dp2 / (kappa^2 + p^2)` on a
/// tensor Gauss grid over the disk, for cross-checking the closed
/// `pi ln((kappa^2 + 1/a^2) / (kappa^2 + p3^2))`.
pub fn disk_integral_tensor(k2: f64, p3: f64, a: f64, nodes: usize) -> f64 {
    let rho_max2 = 1.0 / (a * a) - p3 * p3;
    if rho_max2 <= 0.0 {
        return 0.0;
    }
    let rho_max = rho_max2.sqrt();
    let rule = gauss::rule(nodes);
    let base = k2 + p3 * p3;
    // Substituting p1 = rho_max sin(theta) removes the square-root edge.
    rule.integrate(-0.5 * PI, 0.5 * PI, |th: f64| {
        let p1 = rho_max * th.sin();
        let half = rho_max * th.cos();
        let inner = rule.integrate(-half, half, |p2: f64| 1.0 / (base + p1 * p1 + p2 * p2));
        inner * rho_max * th.cos()
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PacketProfile {
    pub sigma3: f64,
    pub amplitude: f64,
}

pub fn packet_c(p3: f64, packet: &PacketProfile) -> f64 {
    packet.amplitude * (-p3 * p3 / (2.0 * packet.sigma3 * packet.sigma3)).exp()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundState {
    pub beta: f64,
    pub a: f64,
    pub eps_a: f64,
    pub p3_max: f64,
    pub packet: PacketProfile,
}

impl BoundState {
    pub fn new(a: f64, eps_a: f64, packet: PacketProfile) -> Result<Self> {
        check_a(a)?;
        let beta = beta(eps_a)?;
        let p3_max = (-0.5 * beta).exp() / a;
        if !(packet.sigma3 > 0.0) {
            return Err(Error::invalid("sigma3", "must be positive"));
        }
        if packet.sigma3 > 0.25 * p3_max {
            return Err(Error::invalid(
                "sigma3",
                format!("must not exceed p3_max/4 = {}", 0.25 * p3_max),
            ));
        }
        if !packet.amplitude.is_finite() || packet.amplitude == 0.0 {
            return Err(Error::invalid("amplitude", "must be finite and non-zero"));
        }
        Ok(BoundState {
            beta,
            a,
            eps_a,
            p3_max,
            packet,
        })
    }

    /// Bound state whose amplitude makes `phi_norm` equal to one.
    pub fn normalized(a: f64, eps_a: f64, sigma3: f64, quad: &QuadratureConfig) -> Result<Self> {
        let mut state = BoundState::new(
            a,
            eps_a,
            PacketProfile {
                sigma3,
                amplitude: 1.0,
            },
        )?;
        let n = phi_norm(&state, quad)?;
        state.packet.amplitude = 1.0 / n.sqrt();
        Ok(state)
    }

    /// `kappa^2(p3)` or `None` outside the existence region.
    pub fn kappa_sq(&self, p3: f64) -> Option<f64> {
        let inv_a2 = 1.0 / (self.a * self.a);
        let k2 = (inv_a2 - self.beta.exp() * p3 * p3) / self.beta.exp_m1();
        (k2 > 0.0).then_some(k2)
    }

    /// `1 / (e^beta - 1)`, the ratio `(kappa^2 + p3^2) / (1/a^2 - p3^2)`.
    pub fn cone_ratio(&self) -> f64 {
        1.0 / self.beta.exp_m1()
    }

    pub fn c(&self, p3: f64) -> f64 {
        packet_c(p3, &self.packet)
    }
}

/// `chi(p) C(p3) / (kappa^2(p3) + p^2)`, zero outside the ball or the existence region.
pub fn phi_kappa(p: Vec3, state: &BoundState) -> f64 {
    let p2 = p.dot(p);
    if p2 * state.a * state.a >= 1.0 {
        return 0.0;
    }
    match state.kappa_sq(p.x3) {
        Some(k2) => state.c(p.x3) / (k2 + p2),
        None => 0.0,
    }
}

/// `(2 pi)^-3 Integral |phi|^2 d^3p` by nested quadrature in `(p3, rho)`.
pub fn phi_norm(state: &BoundState, quad: &QuadratureConfig) -> Result<f64> {
    let inv_a2 = 1.0 / (state.a * state.a);
    let edge = state.p3_max.min(1.0 / state.a);
    let failure = RefCell::new(None);
    let outer = integrate_real(
        |p3| {
            let Some(k2) = state.kappa_sq(p3) else {
                return 0.0;
            };
            let rho_max = (inv_a2 - p3 * p3).max(0.0).sqrt();
            let base = k2 + p3 * p3;
            let inner = integrate_real(
                |rho| {
                    let d = base + rho * rho;
                    2.0 * PI * rho / (d * d)
                },
                0.0,
                rho_max,
                quad,
            );
            match inner {
                Ok(v) => state.c(p3).powi(2) * v,
                Err(e) => {
                    failure.borrow_mut().get_or_insert(e);
                    0.0
                }
            }
        },
        -edge,
        edge,
        quad,
    )?;
    if let Some(e) = failure.into_inner() {
        return Err(e);
    }
    Ok(outer / (8.0 * PI * PI * PI))
}
