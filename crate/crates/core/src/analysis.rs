//! Observables: momentum and position tail exponents, the cone of
//! non-critical directions before the cusp, and the residual of the exact
//! straight-string solution.

use std::cell::RefCell;
use std::f64::consts::PI;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::evolve::Evolution;
use crate::geometry::{critical_point_scan, CriticalScan, CurveFamily, Vec3, Window};
use crate::oscquad::{integrate_real, oscillatory_1d_with_breaks, QuadratureConfig};
use crate::potential::{chi, form_factor_transform, PotentialParams};
use crate::spectrum::{phi_kappa, BoundState};

/// Fits below this `r^2` are reported but flagged non-conclusive.
pub const R2_GATE: f64 = 0.95;

/// Minimum number of samples for a power-law fit.
pub const MIN_SAMPLES: usize = 8;

/// Least-squares line through `(ln x, ln y)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PowerLawFit {
    pub slope: f64,
    /// `ln` of the prefactor.
    pub intercept: f64,
    pub stderr: f64,
    pub r_squared: f64,
    pub n_samples: usize,
}

pub fn fit_power_law(samples: &[(f64, f64)]) -> Result<PowerLawFit> {
    let n = samples.len();
    if n < MIN_SAMPLES {
        return Err(Error::DegenerateFit(format!("{n} samples, need at least {MIN_SAMPLES}")));
    }
    for (k, &(x, y)) in samples.iter().enumerate() {
        if !(x > 0.0 && x.is_finite()) {
            return Err(Error::DegenerateFit(format!("abscissa {x} is not positive")));
        }
        if !(y > 0.0 && y.is_finite()) {
            return Err(Error::DegenerateFit(format!("magnitude {y} at x = {x} is not positive")));
        }
        if k > 0 && x <= samples[k - 1].0 {
            return Err(Error::DegenerateFit("abscissae must increase strictly".into()));
        }
    }
    let lx: Vec<f64> = samples.iter().map(|s| s.0.ln()).collect();
    let ly: Vec<f64> = samples.iter().map(|s| s.1.ln()).collect();
    let nf = n as f64;
    let mx = lx.iter().sum::<f64>() / nf;
    let my = ly.iter().sum::<f64>() / nf;
    let sxx: f64 = lx.iter().map(|x| (x - mx).powi(2)).sum();
    if sxx <= 0.0 {
        return Err(Error::DegenerateFit("all abscissae coincide".into()));
    }
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let syy: f64 = ly.iter().map(|y| (y - my).powi(2)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let sse: f64 = lx
        .iter()
        .zip(&ly)
        .map(|(x, y)| (y - intercept - slope * x).powi(2))
        .sum();
    let stderr = (sse / (nf - 2.0) / sxx).sqrt();
    let r_squared = if syy > 0.0 { 1.0 - sse / syy } else { 1.0 };
    Ok(PowerLawFit {
        slope,
        intercept,
        stderr,
        r_squared,
        n_samples: n,
    })
}

/// `n` points from `lo` to `hi` with constant ratio.
pub fn geometric_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![lo];
    }
    let ratio = (hi / lo).ln() / (n - 1) as f64;
    (0..n)
        .map(|k| if k + 1 == n { hi } else { lo * (ratio * k as f64).exp() })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct TailFitResult {
    pub direction: Vec3,
    pub time: f64,
    pub window: (f64, f64),
    pub slope: f64,
    pub stderr: f64,
    pub r_squared: f64,
    pub n_samples: usize,
    /// `ln` of the fitted prefactor; reported, never tested.
    pub log_prefactor: f64,
    /// Sampled `(abscissa, magnitude)` pairs.
    pub samples: Vec<(f64, f64)>,
}

impl TailFitResult {
    fn from_fit(direction: Vec3, time: f64, samples: Vec<(f64, f64)>) -> Result<Self> {
        let fit = fit_power_law(&samples)?;
        Ok(TailFitResult {
            direction,
            time,
            window: (samples[0].0, samples[samples.len() - 1].0),
            slope: fit.slope,
            stderr: fit.stderr,
            r_squared: fit.r_squared,
            n_samples: fit.n_samples,
            log_prefactor: fit.intercept,
            samples,
        })
    }

    pub fn conclusive(&self) -> bool {
        self.r_squared >= R2_GATE
    }
}

/// Power-law fit of `|delta psi(p u, t)|` over the momentum grid.
///
/// When every sample sits below ten times the absolute quadrature tolerance
/// there is no tail to fit, and `DegenerateFit` is returned.
pub fn tail_scan(ev: &Evolution, direction: Vec3, t: f64, p_grid: &[f64]) -> Result<TailFitResult> {
    let u = unit(direction)?;
    let p_cut = ev.params.p_cut();
    if let Some(&bad) = p_grid.iter().find(|&&p| !(p > 0.0 && p < p_cut)) {
        return Err(Error::invalid("p_grid", format!("{bad} lies outside (0, 1/a = {p_cut})")));
    }
    let mut samples = Vec::with_capacity(p_grid.len());
    for &p in p_grid {
        let d = ev.psi(u * p, t)?.delta_psi;
        samples.push((p, d.norm()));
    }
    let floor = 10.0 * ev.quad.abs_tol;
    if samples.iter().all(|s| s.1 < floor) {
        return Err(Error::DegenerateFit(format!(
            "no tail: |delta psi| below {floor:e} across the grid"
        )));
    }
    TailFitResult::from_fit(u, t, samples)
}

fn unit(v: Vec3) -> Result<Vec3> {
    let n = v.norm();
    if !(n > 0.0 && n.is_finite()) {
        return Err(Error::invalid("direction", "must be a non-zero finite vector"));
    }
    Ok(v * (1.0 / n))
}

/// Resolution and budget of the kernel-route position probe.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PositionProbeConfig {
    /// Gauss points per field cell along each axis.
    pub order: usize,
    /// Largest admissible number of kernel evaluations over all radii.
    pub max_kernel_evals: usize,
}

impl Default for PositionProbeConfig {
    fn default() -> Self {
        PositionProbeConfig {
            order: 2,
            max_kernel_evals: 2_000_000_000,
        }
    }
}

impl PositionProbeConfig {
    /// Kernel evaluations needed for one probe point at time `t`.
    pub fn evals_per_point(&self, ev: &Evolution, t: f64) -> usize {
        let f = ev.field;
        let rows = ((t / f.dt()).ceil() as usize).clamp(1, f.n_t() - 1);
        rows * (f.n_s() - 1) * self.order * self.order
    }
}

/// Power-law fit of `|delta psi(origin + r u, t)|` against `r`.
pub fn position_exponent(
    ev: &Evolution,
    origin: Vec3,
    direction: Vec3,
    radii: &[f64],
    t: f64,
    probe: &PositionProbeConfig,
) -> Result<TailFitResult> {
    let u = unit(direction)?;
    let a = ev.params.a;
    if let Some(&bad) = radii.iter().find(|&&r| !(r >= 5.0 * a * (1.0 - 1e-12) && r <= 0.5 * (1.0 + 1e-12))) {
        return Err(Error::invalid("radii", format!("{bad} lies outside [5a, 0.5]")));
    }
    let needed = probe.evals_per_point(ev, t).saturating_mul(radii.len());
    if needed > probe.max_kernel_evals {
        return Err(Error::BudgetExceeded {
            what: "position probe kernel evaluations",
            requested: needed,
            limit: probe.max_kernel_evals,
        });
    }
    let mut samples = Vec::with_capacity(radii.len());
    for &r in radii {
        let v = ev.position_probe_kernel(origin + u * r, t, probe.order)?;
        samples.push((r, v.norm()));
    }
    TailFitResult::from_fit(u, t, samples)
}

/// Sampling of the cone search.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DomainScan {
    pub s_range: Window,
    pub n_s: usize,
    /// Time samples in `[0, epsilon1]`.
    pub n_t: usize,
    /// Polar angles per cone, from the axis to the rim.
    pub n_polar: usize,
    pub n_azimuth: usize,
    /// Reported when no sampled direction is ever critical.
    pub q_max: f64,
}

impl Default for DomainScan {
    fn default() -> Self {
        DomainScan {
            s_range: Window::new(-4.0, 4.0),
            n_s: 401,
            n_t: 41,
            n_polar: 6,
            n_azimuth: 12,
            q_max: 1e12,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DomainQSpec {
    pub epsilon1: f64,
    /// Cone ratio: no critical point for `p1^2 + p2^2 < q p3^2`.
    pub q_estimate: f64,
    /// `q_estimate` is the `q_max` sentinel.
    pub unbounded: bool,
}

/// Below this ratio the cone is treated as empty.
const Q_MIN: f64 = 1e-8;

/// Largest cone ratio `q` whose sampled directions have no critical point of
/// `s -> p.x'(s,t)` for any sampled `t` in `[0, epsilon1]`, by bisection in `ln q`.
pub fn estimate_domain_q(curve: &CurveFamily, epsilon1: f64, scan: &DomainScan) -> Result<DomainQSpec> {
    if !(epsilon1 > 0.0 && epsilon1.is_finite()) {
        return Err(Error::invalid("epsilon1", "must be positive"));
    }
    if let CurveFamily::SyntheticCusp(c) = curve {
        if epsilon1 > c.t1() {
            return Err(Error::invalid("epsilon1", format!("must not exceed t1 = {}", c.t1())));
        }
    }
    if scan.n_t < 2 || scan.n_polar < 1 || scan.n_azimuth < 1 || !(scan.q_max > Q_MIN) {
        return Err(Error::invalid("domain scan", "grid too coarse"));
    }
    let times: Vec<f64> = (0..scan.n_t).map(|k| Window::new(0.0, epsilon1).node(k, scan.n_t)).collect();
    let clear = |u: Vec3| {
        times
            .iter()
            .all(|&t| matches!(critical_point_scan(curve, u, t, scan.s_range, scan.n_s), CriticalScan::Roots(r) if r.is_empty()))
    };
    // Every sampled direction inside the cone tan(theta) <= sqrt(q).
    let cone_clear = |q: f64| {
        let theta_max = q.sqrt().atan();
        (1..=scan.n_polar).all(|k| {
            let theta = theta_max * k as f64 / scan.n_polar as f64;
            (0..scan.n_azimuth).all(|m| {
                let phi = 2.0 * PI * m as f64 / scan.n_azimuth as f64;
                clear(Vec3::from_angles(theta, phi))
            })
        })
    };
    if !clear(Vec3::E3) {
        return Err(Error::ConeEmpty(epsilon1));
    }
    if cone_clear(scan.q_max) {
        return Ok(DomainQSpec {
            epsilon1,
            q_estimate: scan.q_max,
            unbounded: true,
        });
    }
    if !cone_clear(Q_MIN) {
        return Err(Error::ConeEmpty(epsilon1));
    }
    let (mut lo, mut hi) = (Q_MIN.ln(), scan.q_max.ln());
    for _ in 0..40 {
        let mid = 0.5 * (lo + hi);
        if cone_clear(mid.exp()) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(DomainQSpec {
        epsilon1,
        q_estimate: lo.exp(),
        unbounded: false,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResidualReport {
    pub sample_points: Vec<(Vec3, f64)>,
    /// `|RHS - psi_exact|` per sample.
    pub residuals: Vec<f64>,
    pub max_abs_residual: f64,
    /// `abs_tol + rel_tol max |psi_exact|` over the samples.
    pub quad_tolerance_budget: f64,
}

/// Residual of `psi = exp(i kappa^2 t) phi` in the evolution equation of a
/// straight static string.
///
/// With `x = s n3` the field of the exact solution is
/// `I(s,t) = Integral dq exp(i q s + i kappa^2(q) t) C(q) D(q)` with the disk
/// integral `D(q) = Integral_{|p_perp|^2 < 1/a^2 - q^2} d^2p / (kappa^2 + q^2 + p_perp^2)`.
/// The `s'` and `t'` integrals of the Born term are then exact, leaving
/// `RHS = e^{-i p^2 t} phi - i eps chi(p) Integral dq C(q) D(q) g^(p3 - q)
///        e^{-i p^2 t} (e^{i (p^2 + kappa^2(q)) t} - 1) / (i (p^2 + kappa^2(q)))`,
/// where `g^` is the transform of the form factor. `D` is computed by
/// quadrature, so the bound-state condition enters only through `kappa^2`.
pub fn verify_static_identity(
    params: &PotentialParams,
    state: &BoundState,
    quad: &QuadratureConfig,
    samples: &[(Vec3, f64)],
) -> Result<ResidualReport> {
    params.validate()?;
    quad.validate()?;
    let mut residuals = Vec::with_capacity(samples.len());
    let mut scale: f64 = 0.0;
    for &(p, t) in samples {
        let phi = phi_kappa(p, state);
        let exact = match state.kappa_sq(p.x3) {
            Some(k2) => Complex64::from_polar(phi, k2 * t),
            None => Complex64::new(0.0, 0.0),
        };
        scale = scale.max(exact.norm());
        let rhs = static_rhs(p, t, phi, params, state, quad)
            .map_err(|e| e.at(format!("static identity at p=({}, {}, {}), t={t}", p.x1, p.x2, p.x3)))?;
        residuals.push((rhs - exact).norm());
    }
    let max_abs_residual = residuals.iter().copied().fold(0.0, f64::max);
    Ok(ResidualReport {
        sample_points: samples.to_vec(),
        residuals,
        max_abs_residual,
        quad_tolerance_budget: quad.abs_tol + quad.rel_tol * scale,
    })
}

fn static_rhs(
    p: Vec3,
    t: f64,
    phi: f64,
    params: &PotentialParams,
    state: &BoundState,
    quad: &QuadratureConfig,
) -> Result<Complex64> {
    let p2 = p.dot(p);
    let free = Complex64::from_polar(phi, -p2 * t);
    if t == 0.0 || chi(p, params.a) == 0.0 {
        return Ok(free);
    }
    let inv_a2 = 1.0 / (state.a * state.a);
    let edge = state.p3_max.min(1.0 / state.a);
    let failure = RefCell::new(None);
    let integrand = |q: f64| -> Complex64 {
        let Some(k2) = state.kappa_sq(q) else {
            return Complex64::new(0.0, 0.0);
        };
        let rho_max = (inv_a2 - q * q).max(0.0).sqrt();
        let disk = integrate_real(|rho| 2.0 * PI * rho / (k2 + q * q + rho * rho), 0.0, rho_max, quad)
            .unwrap_or_else(|e| {
                failure.borrow_mut().get_or_insert(e);
                0.0
            });
        let lam = p2 + k2;
        // (e^{i lam t} - 1) / (i lam), evaluated without cancellation.
        let growth = Complex64::new(0.0, 0.5 * lam * t).exp() * (2.0 * (0.5 * lam * t).sin() / lam);
        growth * (state.c(q) * disk * form_factor_transform(p.x3 - q, params.r, params.w))
    };
    // g^ oscillates with period 2 pi / R in q.
    let step = PI / params.r;
    let breaks: Vec<f64> = (1..)
        .map(|k| p.x3 - k as f64 * step)
        .take_while(|&b| b > -edge)
        .chain((1..).map(|k| p.x3 + k as f64 * step).take_while(|&b| b < edge))
        .chain([p.x3])
        .collect();
    let born = oscillatory_1d_with_breaks(integrand, |_| 0.0, |_| 0.0, -edge, edge, &breaks, quad)?;
    if let Some(e) = failure.into_inner() {
        return Err(e);
    }
    Ok(free + Complex64::new(0.0, -params.eps_a) * Complex64::from_polar(1.0, -p2 * t) * born)
}
