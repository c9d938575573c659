//! Time evolution of the captured state.
//!
//! The field `I(s,t) = Integral chi(p) exp(i p.x(s,t)) psi(p,t) d^3p` lives on a
//! uniform `(s, t)` grid. The Born field is the free source `I0`; Picard steps
//! of the Volterra equation
//! `I(s,t) = I0(s,t) - eps Integral_0^t dt' Integral ds' g(s') K(t-t', |x - x'|) I(s',t')`
//! add the higher orders. The momentum-space correction is
//! `born = -i eps chi(p) Integral_0^t dt' exp(-i p^2 (t-t')) Integral ds' g(s') exp(-i p.x(s',t')) I(s',t')`.

use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::geometry::{CurveFamily, Vec3};
use crate::oscquad::{gauss, kernel_k_closed, oscillatory_1d_with_breaks, FastSource, QuadratureConfig};
use crate::potential::{chi, PotentialParams};
use crate::spectrum::{phi_kappa, BoundState};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Highest supported Picard order.
pub const MAX_ORDER: usize = 4;

/// Node counts and final time of a field grid. The `s` range is always the
/// support of the form factor.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    pub n_s: usize,
    pub n_t: usize,
    pub t_max: f64,
}

impl GridSpec {
    /// Coarsest grid with `ds <= pi a / 4` and `dt <= pi a^2 / 4`.
    pub fn minimal(params: &PotentialParams, t_max: f64) -> Result<Self> {
        if !(t_max > 0.0 && t_max.is_finite()) {
            return Err(Error::invalid("t_max", "must be positive"));
        }
        let (ds, dt) = max_spacing(params);
        let span = 2.0 * params.support();
        let spec = GridSpec {
            n_s: (span / ds).ceil() as usize + 1,
            n_t: ((t_max / dt).ceil() as usize).max(1) + 1,
            t_max,
        };
        Ok(spec)
    }

    /// Every cell split into `factor` along both axes.
    pub fn refined(&self, factor: usize) -> Self {
        GridSpec {
            n_s: (self.n_s - 1) * factor + 1,
            n_t: (self.n_t - 1) * factor + 1,
            t_max: self.t_max,
        }
    }

    pub fn validate(&self, params: &PotentialParams) -> Result<()> {
        if self.n_s < 2 || self.n_t < 2 {
            return Err(Error::invalid("grid", "needs at least two nodes per axis"));
        }
        if !(self.t_max > 0.0 && self.t_max.is_finite()) {
            return Err(Error::invalid("t_max", "must be positive"));
        }
        let (ds_max, dt_max) = max_spacing(params);
        let ds = 2.0 * params.support() / (self.n_s - 1) as f64;
        let dt = self.t_max / (self.n_t - 1) as f64;
        let slack = 1.0 + 1e-12;
        if ds > ds_max * slack {
            return Err(Error::invalid("grid.n_s", format!("ds = {ds} exceeds pi a / 4 = {ds_max}")));
        }
        if dt > dt_max * slack {
            return Err(Error::invalid("grid.n_t", format!("dt = {dt} exceeds pi a^2 / 4 = {dt_max}")));
        }
        Ok(())
    }

    pub fn nodes(&self) -> usize {
        self.n_s * self.n_t
    }
}

fn max_spacing(params: &PotentialParams) -> (f64, f64) {
    let a = params.a;
    (0.25 * PI * a, 0.25 * PI * a * a)
}

/// Samples of `I(s,t)`, row-major in `t`, with bilinear interpolation.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldGrid {
    s_lo: f64,
    s_hi: f64,
    t_max: f64,
    n_s: usize,
    n_t: usize,
    values: Vec<Complex64>,
}

impl FieldGrid {
    pub fn new(s_lo: f64, s_hi: f64, t_max: f64, n_s: usize, n_t: usize, values: Vec<Complex64>) -> Result<Self> {
        if n_s < 2 || n_t < 2 || values.len() != n_s * n_t {
            return Err(Error::invalid("field", "value count does not match the grid"));
        }
        if !(s_hi > s_lo && t_max > 0.0) {
            return Err(Error::invalid("field", "empty grid window"));
        }
        Ok(FieldGrid {
            s_lo,
            s_hi,
            t_max,
            n_s,
            n_t,
            values,
        })
    }

    pub fn zeros(spec: &GridSpec, params: &PotentialParams) -> Self {
        let h = params.support();
        FieldGrid {
            s_lo: -h,
            s_hi: h,
            t_max: spec.t_max,
            n_s: spec.n_s,
            n_t: spec.n_t,
            values: vec![ZERO; spec.nodes()],
        }
    }

    pub fn n_s(&self) -> usize {
        self.n_s
    }

    pub fn n_t(&self) -> usize {
        self.n_t
    }

    pub fn t_max(&self) -> f64 {
        self.t_max
    }

    pub fn s_range(&self) -> (f64, f64) {
        (self.s_lo, self.s_hi)
    }

    pub fn ds(&self) -> f64 {
        (self.s_hi - self.s_lo) / (self.n_s - 1) as f64
    }

    pub fn dt(&self) -> f64 {
        self.t_max / (self.n_t - 1) as f64
    }

    pub fn s_node(&self, i: usize) -> f64 {
        if i + 1 == self.n_s {
            self.s_hi
        } else {
            self.s_lo + i as f64 * self.ds()
        }
    }

    pub fn t_node(&self, j: usize) -> f64 {
        if j + 1 == self.n_t {
            self.t_max
        } else {
            j as f64 * self.dt()
        }
    }

    pub fn value(&self, i: usize, j: usize) -> Complex64 {
        self.values[j * self.n_s + i]
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn row(&self, j: usize) -> &[Complex64] {
        &self.values[j * self.n_s..(j + 1) * self.n_s]
    }

    /// Cell index and fractional offset of `s`, or `None` outside the grid.
    fn locate_s(&self, s: f64) -> Option<(usize, f64)> {
        if !(s >= self.s_lo && s <= self.s_hi) {
            return None;
        }
        let x = (s - self.s_lo) / self.ds();
        let i = (x.floor() as usize).min(self.n_s - 2);
        Some((i, x - i as f64))
    }

    /// Linear interpolation in `s` along row `j`; zero outside the grid.
    pub fn interpolate_row(&self, j: usize, s: f64) -> Complex64 {
        match self.locate_s(s) {
            Some((i, f)) => {
                let row = self.row(j);
                row[i] * (1.0 - f) + row[i + 1] * f
            }
            None => ZERO,
        }
    }

    /// Bilinear interpolation; zero outside the `s` range, `t` clamped to `[0, t_max]`.
    pub fn interpolate(&self, s: f64, t: f64) -> Complex64 {
        let Some((i, fs)) = self.locate_s(s) else {
            return ZERO;
        };
        let y = (t.clamp(0.0, self.t_max)) / self.dt();
        let j = (y.floor() as usize).min(self.n_t - 2);
        let ft = y - j as f64;
        let lo = self.value(i, j) * (1.0 - fs) + self.value(i + 1, j) * fs;
        let hi = self.value(i, j + 1) * (1.0 - fs) + self.value(i + 1, j + 1) * fs;
        lo * (1.0 - ft) + hi * ft
    }

    pub fn scaled(&self, factor: Complex64) -> Self {
        FieldGrid {
            values: self.values.iter().map(|v| v * factor).collect(),
            ..self.clone()
        }
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    /// `max |self - other|` over nodes; the grids must share their layout.
    pub fn sup_diff(&self, other: &FieldGrid) -> f64 {
        assert_eq!((self.n_s, self.n_t), (other.n_s, other.n_t), "grid layouts differ");
        self.values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }
}

/// Picard order and final time of an evolution run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BornConfig {
    /// 0 keeps the free source.
    pub order: usize,
    pub t_max: f64,
}

impl BornConfig {
    pub fn validate(&self) -> Result<()> {
        if self.order > MAX_ORDER {
            return Err(Error::invalid("order", format!("must not exceed {MAX_ORDER}")));
        }
        if !(self.t_max > 0.0 && self.t_max.is_finite()) {
            return Err(Error::invalid("T", "must be positive"));
        }
        Ok(())
    }
}

/// The free source `I0` at every node of the grid.
pub fn compute_i0_grid(
    curve: &CurveFamily,
    state: &BoundState,
    params: &PotentialParams,
    spec: &GridSpec,
    quad: &QuadratureConfig,
) -> Result<FieldGrid> {
    spec.validate(params)?;
    quad.validate()?;
    let mut field = FieldGrid::zeros(spec, params);
    let source = FastSource::new(*state, *quad);
    let rows: Vec<Result<Vec<Complex64>>> = (0..spec.n_t)
        .into_par_iter()
        .map(|j| {
            let t = field.t_node(j);
            (0..spec.n_s)
                .map(|i| {
                    let s = field.s_node(i);
                    source
                        .at(curve.position(s, t), t)
                        .map_err(|e| e.at(format!("I0 node (s={s}, t={t})")))
                })
                .collect()
        })
        .collect();
    for (j, row) in rows.into_iter().enumerate() {
        let row = row?;
        field.values[j * spec.n_s..(j + 1) * spec.n_s].copy_from_slice(&row);
    }
    Ok(field)
}

/// Result of a Picard run.
#[derive(Debug, Clone)]
pub struct VolterraOutcome {
    pub field: FieldGrid,
    /// `sup |I(k+1) - I(k)|` for each step taken.
    pub increments: Vec<f64>,
    /// Set when an increment fails to shrink.
    pub diverging: bool,
}

/// Picard iterates of the Volterra equation starting from `source`, with the
/// double integral done by the trapezoid rule on the grid nodes.
pub fn volterra_iterate(
    source: &FieldGrid,
    curve: &CurveFamily,
    params: &PotentialParams,
    order: usize,
) -> Result<VolterraOutcome> {
    if order > MAX_ORDER {
        return Err(Error::invalid("order", format!("must not exceed {MAX_ORDER}")));
    }
    params.validate()?;
    let (ns, nt) = (source.n_s, source.n_t);
    let positions: Vec<Vec3> = (0..nt)
        .flat_map(|j| (0..ns).map(move |i| (i, j)))
        .map(|(i, j)| curve.position(source.s_node(i), source.t_node(j)))
        .collect();
    let (ds, dt) = (source.ds(), source.dt());
    let s_weight: Vec<f64> = (0..ns)
        .map(|i| {
            let end = if i == 0 || i + 1 == ns { 0.5 } else { 1.0 };
            end * ds * params.g(source.s_node(i))
        })
        .collect();

    let mut current = source.clone();
    let mut increments = Vec::with_capacity(order);
    for _ in 0..order {
        let values: Vec<Complex64> = (0..ns * nt)
            .into_par_iter()
            .map(|node| {
                let (i, j) = (node % ns, node / ns);
                let x = positions[node];
                let t = source.t_node(j);
                let mut acc = ZERO;
                // At t = 0 the time integral is empty.
                for jp in (0..=j).filter(|_| j > 0) {
                    let wt = if jp == 0 || jp == j { 0.5 * dt } else { dt };
                    let tau = t - source.t_node(jp);
                    let mut row_acc = ZERO;
                    for ip in 0..ns {
                        let w = s_weight[ip];
                        if w == 0.0 {
                            continue;
                        }
                        let d = (x - positions[jp * ns + ip]).norm();
                        row_acc += kernel_k_closed(tau, d, params.a) * current.value(ip, jp) * w;
                    }
                    acc += row_acc * wt;
                }
                source.value(i, j) - acc * params.eps_a
            })
            .collect();
        let next = FieldGrid {
            values,
            ..source.clone()
        };
        increments.push(next.sup_diff(&current));
        current = next;
    }
    let diverging = increments.windows(2).any(|w| w[1] >= w[0]);
    Ok(VolterraOutcome {
        field: current,
        increments,
        diverging,
    })
}

/// `Integral_0^1 y^m exp(i theta y) dy` for `m = 0` (weighted by `1 - y`) and `m = 1`.
fn linear_filon_weights(theta: f64) -> (Complex64, Complex64) {
    if theta.abs() < 1.0 {
        // Series: sum (i theta)^n / (n! (n+1)(n+2)) and sum (i theta)^n / (n! (n+2)).
        let mut w0 = ZERO;
        let mut w1 = ZERO;
        let mut term = Complex64::new(1.0, 0.0);
        for n in 0..24 {
            let nf = n as f64;
            w0 += term / ((nf + 1.0) * (nf + 2.0));
            w1 += term / (nf + 2.0);
            term *= Complex64::new(0.0, theta) / (nf + 1.0);
        }
        (w0, w1)
    } else {
        let e = Complex64::from_polar(1.0, theta);
        let it = Complex64::new(0.0, theta);
        let w1 = e / it + (e - 1.0) / (theta * theta);
        let w0 = (e - 1.0) / it - w1;
        (w0, w1)
    }
}

/// `J(t') = Integral ds g(s) exp(-i p.x(s,t')) I(s,t')` with `I` supplied per `s`.
fn line_transform(
    p: Vec3,
    t: f64,
    field_at: impl Fn(f64) -> Complex64,
    curve: &CurveFamily,
    params: &PotentialParams,
    breaks: &[f64],
    (lo, hi): (f64, f64),
    quad: &QuadratureConfig,
) -> Result<Complex64> {
    oscillatory_1d_with_breaks(
        |s| field_at(s) * params.g(s),
        |s| -p.dot(curve.position(s, t)),
        |s| -p.dot(curve.tangent(s, t)),
        lo,
        hi,
        breaks,
        quad,
    )
}

/// The Born correction to `psi(p,t)`.
///
/// The `s'` integral runs over every grid row (with the nodes as breakpoints,
/// where the interpolated field has kinks); in `t'` the row integrals are
/// taken piecewise linear and integrated exactly against `exp(i p^2 t')`.
pub fn born_delta_psi(
    p: Vec3,
    t: f64,
    field: &FieldGrid,
    curve: &CurveFamily,
    params: &PotentialParams,
    quad: &QuadratureConfig,
) -> Result<Complex64> {
    check_time(t, field)?;
    if t == 0.0 || chi(p, params.a) == 0.0 {
        return Ok(ZERO);
    }
    let dt = field.dt();
    let last = ((t / dt).floor() as usize).min(field.n_t - 1);
    let breaks: Vec<f64> = (1..field.n_s - 1).map(|i| field.s_node(i)).collect();
    let range = field.s_range();
    let mut times: Vec<f64> = (0..=last).map(|j| field.t_node(j)).collect();
    let partial = t - times[last] > 1e-12 * dt;
    if partial {
        times.push(t);
    }
    let rows: Vec<Result<Complex64>> = (0..times.len())
        .into_par_iter()
        .map(|k| {
            let tk = times[k];
            let r = if k <= last {
                line_transform(p, tk, |s| field.interpolate_row(k, s), curve, params, &breaks, range, quad)
            } else {
                line_transform(p, tk, |s| field.interpolate(s, tk), curve, params, &breaks, range, quad)
            };
            r.map_err(|e| e.at(format!("born row t'={tk}, p=({}, {}, {})", p.x1, p.x2, p.x3)))
        })
        .collect();
    let rows: Vec<Complex64> = rows.into_iter().collect::<Result<_>>()?;
    let omega = p.dot(p);
    let mut acc = ZERO;
    for k in 0..rows.len() - 1 {
        let (ta, tb) = (times[k], times[k + 1]);
        let h = tb - ta;
        let (w0, w1) = linear_filon_weights(omega * h);
        acc += Complex64::from_polar(h, omega * ta) * (rows[k] * w0 + rows[k + 1] * w1);
    }
    Ok(Complex64::new(0.0, -params.eps_a) * Complex64::from_polar(1.0, -omega * t) * acc)
}

fn check_time(t: f64, field: &FieldGrid) -> Result<()> {
    if !(t >= 0.0 && t <= field.t_max * (1.0 + 1e-12)) {
        return Err(Error::invalid(
            "t",
            format!("must lie in [0, {}] covered by the field", field.t_max),
        ));
    }
    Ok(())
}

/// `psi(p,t)` and its split against the initial state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PsiSample {
    pub psi: Complex64,
    /// `psi(p,t) - psi(p,0)`.
    pub delta_psi: Complex64,
    pub born: Complex64,
}

/// Everything needed to evaluate `psi` and `delta psi` from a field grid.
#[derive(Debug, Clone, Copy)]
pub struct Evolution<'a> {
    pub curve: &'a CurveFamily,
    pub state: &'a BoundState,
    pub params: &'a PotentialParams,
    pub field: &'a FieldGrid,
    pub quad: &'a QuadratureConfig,
}

/// Node counts of the spherical momentum grid used by [`Evolution::position_probe`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProbeGrid {
    pub n_radial: usize,
    pub n_polar: usize,
    pub n_azimuth: usize,
    /// Largest admissible `n_radial * n_polar * n_azimuth`.
    pub max_nodes: usize,
}

impl ProbeGrid {
    pub fn nodes(&self) -> usize {
        self.n_radial * self.n_polar * self.n_azimuth
    }
}

impl Evolution<'_> {
    pub fn born_delta_psi(&self, p: Vec3, t: f64) -> Result<Complex64> {
        born_delta_psi(p, t, self.field, self.curve, self.params, self.quad)
    }

    pub fn psi(&self, p: Vec3, t: f64) -> Result<PsiSample> {
        let born = self.born_delta_psi(p, t)?;
        let phi = phi_kappa(p, self.state);
        let free = Complex64::from_polar(1.0, -p.dot(p) * t);
        Ok(PsiSample {
            psi: free * phi + born,
            delta_psi: (free - 1.0) * phi + born,
            born,
        })
    }

    /// `(2 pi)^-3 Integral_{|p|<1/a} delta psi(p,t) exp(i p.x) d^3p` on a
    /// Gauss-Legendre grid in `|p|` and `cos theta`, uniform in azimuth.
    pub fn position_probe(&self, x: Vec3, t: f64, grid: &ProbeGrid) -> Result<Complex64> {
        if !(t > 0.0) {
            return Err(Error::invalid("t", "must be positive"));
        }
        if grid.nodes() > grid.max_nodes {
            return Err(Error::BudgetExceeded {
                what: "position probe momentum nodes",
                requested: grid.nodes(),
                limit: grid.max_nodes,
            });
        }
        if grid.n_radial == 0 || grid.n_polar == 0 || grid.n_azimuth == 0 {
            return Err(Error::invalid("probe grid", "node counts must be positive"));
        }
        let p_cut = self.params.p_cut();
        let radial = gauss::rule(grid.n_radial.min(gauss::MAX_ORDER));
        let polar = gauss::rule(grid.n_polar.min(gauss::MAX_ORDER));
        if grid.n_radial > gauss::MAX_ORDER || grid.n_polar > gauss::MAX_ORDER {
            return Err(Error::invalid("probe grid", format!("at most {} Gauss nodes per axis", gauss::MAX_ORDER)));
        }
        let d_phi = 2.0 * PI / grid.n_azimuth as f64;
        let nodes: Vec<(Vec3, f64)> = radial
            .iter()
            .flat_map(|(xr, wr)| {
                let rho = 0.5 * p_cut * (xr + 1.0);
                polar.iter().flat_map(move |(c, wc)| {
                    let sin = (1.0 - c * c).max(0.0).sqrt();
                    (0..grid.n_azimuth).map(move |k| {
                        let phi = k as f64 * d_phi;
                        let p = Vec3::new(rho * sin * phi.cos(), rho * sin * phi.sin(), rho * c);
                        (p, rho * rho * 0.5 * p_cut * wr * wc * d_phi)
                    })
                })
            })
            .collect();
        let terms: Vec<Result<Complex64>> = nodes
            .par_iter()
            .map(|&(p, w)| {
                let d = self.psi(p, t)?.delta_psi;
                Ok(d * Complex64::from_polar(w, p.dot(x)))
            })
            .collect();
        let mut acc = ZERO;
        for term in terms {
            acc += term?;
        }
        Ok(acc / (2.0 * PI).powi(3))
    }

    /// The same transform with the momentum integral done analytically:
    /// `delta psi(x,t) = (2 pi)^-3 [I0(x,t) - I0(x,0) -
    ///   eps Integral dt' Integral ds' g(s') I(s',t') K(t-t', |x - x(s',t')|)]`.
    /// Each grid cell is integrated with an `order x order` Gauss product rule
    /// over the bilinear field.
    pub fn position_probe_kernel(&self, x: Vec3, t: f64, order: usize) -> Result<Complex64> {
        if !(t > 0.0) {
            return Err(Error::invalid("t", "must be positive"));
        }
        check_time(t, self.field)?;
        if !(1..=gauss::MAX_ORDER).contains(&order) {
            return Err(Error::invalid("order", "must lie in 1..=128"));
        }
        let field = self.field;
        let rule = gauss::rule(order);
        let source = FastSource::new(*self.state, *self.quad);
        let free = source.at(x, t)? - source.at(x, 0.0)?;

        let dt = field.dt();
        let last = ((t / dt).ceil() as usize).clamp(1, field.n_t - 1);
        let (ds, a) = (field.ds(), self.params.a);
        let rows: Vec<Complex64> = (0..last)
            .into_par_iter()
            .map(|j| {
                let t_lo = field.t_node(j);
                let t_hi = field.t_node(j + 1).min(t);
                let h_t = t_hi - t_lo;
                let mut acc = ZERO;
                if h_t <= 0.0 {
                    return acc;
                }
                for (xt, wt) in rule.iter() {
                    let tp = t_lo + 0.5 * h_t * (xt + 1.0);
                    let tau = t - tp;
                    for i in 0..field.n_s - 1 {
                        let s_lo = field.s_node(i);
                        for (xs, ws) in rule.iter() {
                            let sp = s_lo + 0.5 * ds * (xs + 1.0);
                            let g = self.params.g(sp);
                            if g == 0.0 {
                                continue;
                            }
                            let d = (x - self.curve.position(sp, tp)).norm();
                            let k = kernel_k_closed(tau, d, a);
                            acc += k * field.interpolate(sp, tp) * (g * ws * wt);
                        }
                    }
                }
                acc * (0.25 * h_t * ds)
            })
            .collect();
        let born: Complex64 = rows.iter().sum();
        Ok((free - born * self.params.eps_a) / (2.0 * PI).powi(3))
    }
}

/// `(2 pi)^-3 Integral |exp(-i p^2 t) phi(p)|^2 d^3p` by nested quadrature in `(p3, rho)`.
pub fn free_evolution_norm(state: &BoundState, t: f64, quad: &QuadratureConfig) -> Result<f64> {
    use crate::oscquad::integrate_real;
    use std::cell::RefCell;
    let inv_a2 = 1.0 / (state.a * state.a);
    let edge = state.p3_max.min(1.0 / state.a);
    let failure = RefCell::new(None);
    let outer = integrate_real(
        |p3| {
            let rho_max = (inv_a2 - p3 * p3).max(0.0).sqrt();
            let inner = integrate_real(
                |rho| {
                    let p = Vec3::new(rho, 0.0, p3);
                    let v = Complex64::from_polar(phi_kappa(p, state), -p.dot(p) * t);
                    2.0 * PI * rho * v.norm_sqr()
                },
                0.0,
                rho_max,
                quad,
            );
            inner.unwrap_or_else(|e| {
                failure.borrow_mut().get_or_insert(e);
                0.0
            })
        },
        -edge,
        edge,
        quad,
    )?;
    if let Some(e) = failure.into_inner() {
        return Err(e);
    }
    Ok(outer / (2.0 * PI).powi(3))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::SyntheticCusp;
    use crate::spectrum::{phi_norm, PacketProfile};

    fn params(a: f64) -> PotentialParams {
        PotentialParams::new(a, -1.0 / (2.0 * PI * PI), 1.0, 0.5).unwrap()
    }

    fn state(a: f64) -> BoundState {
        BoundState::new(
            a,
            -1.0 / (2.0 * PI * PI),
            PacketProfile {
                sigma3: 1.0,
                amplitude: 1.0,
            },
        )
        .unwrap()
    }

    fn small_field(curve: &CurveFamily, t_max: f64) -> (PotentialParams, FieldGrid) {
        let p = params(0.1);
        let spec = GridSpec::minimal(&p, t_max).unwrap();
        let f = compute_i0_grid(curve, &state(0.1), &p, &spec, &QuadratureConfig::default()).unwrap();
        (p, f)
    }

    #[test]
    fn minimal_grid_meets_spacing() {
        let p = params(0.1);
        let spec = GridSpec::minimal(&p, 0.3).unwrap();
        spec.validate(&p).unwrap();
        assert_eq!(spec.n_s, 40);
        assert_eq!(spec.n_t, 40);
        let coarse = GridSpec { n_s: 30, ..spec };
        assert!(coarse.validate(&p).is_err());
        assert_eq!(spec.refined(2).n_t, 79);
    }

    #[test]
    fn static_field_is_real_at_start() {
        let (_, f) = small_field(&CurveFamily::StraightLine, 0.05);
        for i in 0..f.n_s() {
            let v = f.value(i, 0);
            assert!(v.im.abs() <= 1e-9 * v.norm().max(1e-300), "{v}");
        }
    }

    #[test]
    fn boundary_nodes_are_direct_evaluations() {
        let curve = CurveFamily::StraightLine;
        let (p, f) = small_field(&curve, 0.05);
        let q = QuadratureConfig::default();
        let fast = FastSource::new(state(0.1), q);
        let j = f.n_t() - 1;
        for &(i, s) in &[(0, -p.support()), (f.n_s() - 1, p.support())] {
            let direct = fast.at(curve.position(s, f.t_node(j)), f.t_node(j)).unwrap();
            assert_eq!(f.value(i, j), direct);
            assert_eq!(f.interpolate(s, f.t_max()), direct);
        }
    }

    #[test]
    fn refinement_changes_mid_cell_values_little() {
        // The source carries every frequency up to 1/a^2 in t, so the bilinear
        // error only falls below 1e-4 of the field scale from 16x the minimal
        // density; it shrinks 4x per doubling.
        let curve = CurveFamily::SyntheticCusp(SyntheticCusp::new(1.0, 0.1, 0.5).unwrap());
        let p = params(0.1);
        let mut st = state(0.1);
        st.packet.sigma3 = 0.5;
        let q = QuadratureConfig::default();
        let spec = GridSpec::minimal(&p, 0.05).unwrap().refined(16);
        let coarse = compute_i0_grid(&curve, &st, &p, &spec, &q).unwrap();
        let fine = compute_i0_grid(&curve, &st, &p, &spec.refined(2), &q).unwrap();
        let scale = fine.sup_norm();
        let mut worst: f64 = 0.0;
        for &(i, j) in &[(1, 0), (12, 4), (200, 40), (320, 64), (500, 80), (600, 111)] {
            let s = 0.5 * (coarse.s_node(i) + coarse.s_node(i + 1));
            let t = 0.5 * (coarse.t_node(j) + coarse.t_node(j + 1));
            let (c, f) = (coarse.interpolate(s, t), fine.interpolate(s, t));
            worst = worst.max((c - f).norm() / scale);
        }
        assert!(worst < 1e-4, "{worst}");
    }

    #[test]
    fn order_zero_is_identity() {
        let curve = CurveFamily::StraightLine;
        let (p, f) = small_field(&curve, 0.03);
        let out = volterra_iterate(&f, &curve, &p, 0).unwrap();
        assert_eq!(out.field, f);
        assert!(out.increments.is_empty());
        assert!(!out.diverging);
        assert!(volterra_iterate(&f, &curve, &p, MAX_ORDER + 1).is_err());
    }

    #[test]
    fn first_increment_is_linear_in_coupling() {
        let curve = CurveFamily::StraightLine;
        let (p, f) = small_field(&curve, 0.03);
        let half = PotentialParams {
            eps_a: 0.5 * p.eps_a,
            ..p
        };
        let d1 = volterra_iterate(&f, &curve, &p, 1).unwrap().increments[0];
        let d2 = volterra_iterate(&f, &curve, &half, 1).unwrap().increments[0];
        assert!(d1 > 0.0);
        assert!((d1 / d2 - 2.0).abs() < 1e-9, "{}", d1 / d2);
    }

    #[test]
    fn filon_weights_match_both_branches() {
        for &theta in &[0.999, 1.001, 0.3, 5.0] {
            let (w0, w1) = linear_filon_weights(theta);
            let rule = gauss::rule(40);
            let e0 = rule.integrate(0.0, 1.0, |y| Complex64::from_polar(1.0 - y, theta * y));
            let e1 = rule.integrate(0.0, 1.0, |y| Complex64::from_polar(y, theta * y));
            assert!((w0 - e0).norm() < 1e-14 && (w1 - e1).norm() < 1e-14, "{theta}");
        }
    }

    #[test]
    fn born_trivial_cases() {
        let curve = CurveFamily::StraightLine;
        let (p, f) = small_field(&curve, 0.03);
        let q = QuadratureConfig::default();
        let k = Vec3::new(1.0, 0.5, 2.0);
        assert_eq!(born_delta_psi(k, 0.0, &f, &curve, &p, &q).unwrap(), ZERO);
        assert_eq!(born_delta_psi(Vec3::new(0.0, 0.0, 10.0), 0.02, &f, &curve, &p, &q).unwrap(), ZERO);
        let b1 = born_delta_psi(k, 0.025, &f, &curve, &p, &q).unwrap();
        let b2 = born_delta_psi(k, 0.025, &f.scaled(Complex64::new(2.0, 0.0)), &curve, &p, &q).unwrap();
        assert!(b1.norm() > 0.0);
        assert!((b2 - b1 * 2.0).norm() <= 1e-12 * b1.norm());
        assert!(born_delta_psi(k, 0.5, &f, &curve, &p, &q).is_err());
    }

    #[test]
    fn psi_starts_at_bound_state() {
        let curve = CurveFamily::StraightLine;
        let (p, f) = small_field(&curve, 0.03);
        let st = state(0.1);
        let q = QuadratureConfig::default();
        let ev = Evolution {
            curve: &curve,
            state: &st,
            params: &p,
            field: &f,
            quad: &q,
        };
        let k = Vec3::new(0.3, -1.0, 0.8);
        let s = ev.psi(k, 0.0).unwrap();
        assert_eq!(s.psi, Complex64::new(phi_kappa(k, &st), 0.0));
        assert_eq!(s.delta_psi, ZERO);
    }

    #[test]
    fn free_norm_is_conserved() {
        let st = state(0.1);
        let q = QuadratureConfig::default();
        let n0 = phi_norm(&st, &q).unwrap();
        let n1 = free_evolution_norm(&st, 0.0, &q).unwrap();
        let n2 = free_evolution_norm(&st, 0.7, &q).unwrap();
        assert!((n1 - n0).abs() < 1e-10 * n0 && (n2 - n0).abs() < 1e-10 * n0);
    }

    #[test]
    fn probe_budget_is_enforced() {
        let curve = CurveFamily::StraightLine;
        let (p, f) = small_field(&curve, 0.03);
        let st = state(0.1);
        let q = QuadratureConfig::default();
        let ev = Evolution {
            curve: &curve,
            state: &st,
            params: &p,
            field: &f,
            quad: &q,
        };
        let grid = ProbeGrid {
            n_radial: 10,
            n_polar: 10,
            n_azimuth: 10,
            max_nodes: 999,
        };
        assert!(matches!(
            ev.position_probe(Vec3::new(0.1, 0.0, 0.0), 0.02, &grid),
            Err(Error::BudgetExceeded { .. })
        ));
    }
}
