//! Moving infinite curves `x(s, t)` and their cusp structure.
//!
//! Three families are provided: the straight line along the third axis, a
//! kinematic family with exactly one cusp at `(0, t1)`, and a gauge-exact
//! left/right mover construction `x = (A(s+t) + B(s-t)) / 2` with unit-speed
//! movers. Every tangent is obtained by analytic differentiation.

use std::ops::{Add, AddAssign, Mul, Neg, Sub};

use crate::error::{Error, Result};
use crate::oscquad::gauss;

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Vec3 {
    pub x1: f64,
    pub x2: f64,
    pub x3: f64,
}

impl Vec3 {
    pub const ZERO: Vec3 = Vec3::new(0.0, 0.0, 0.0);
    pub const E1: Vec3 = Vec3::new(1.0, 0.0, 0.0);
    pub const E2: Vec3 = Vec3::new(0.0, 1.0, 0.0);
    pub const E3: Vec3 = Vec3::new(0.0, 0.0, 1.0);

    pub const fn new(x1: f64, x2: f64, x3: f64) -> Self {
        Vec3 { x1, x2, x3 }
    }

    /// Unit vector from a polar angle measured off the third axis and an azimuth.
    pub fn from_angles(theta: f64, phi: f64) -> Self {
        let (st, ct) = theta.sin_cos();
        let (sp, cp) = phi.sin_cos();
        Vec3::new(st * cp, st * sp, ct)
    }

    pub fn dot(self, other: Vec3) -> f64 {
        self.x1 * other.x1 + self.x2 * other.x2 + self.x3 * other.x3
    }

    pub fn norm(self) -> f64 {
        self.dot(self).sqrt()
    }

    /// Distance from the third axis.
    pub fn perp(self) -> f64 {
        self.x1.hypot(self.x2)
    }

    pub fn normalized(self) -> Self {
        self * (1.0 / self.norm())
    }

    pub fn is_finite(self) -> bool {
        self.x1.is_finite() && self.x2.is_finite() && self.x3.is_finite()
    }
}

impl Add for Vec3 {
    type Output = Vec3;
    fn add(self, o: Vec3) -> Vec3 {
        Vec3::new(self.x1 + o.x1, self.x2 + o.x2, self.x3 + o.x3)
    }
}

impl AddAssign for Vec3 {
    fn add_assign(&mut self, o: Vec3) {
        *self = *self + o;
    }
}

impl Sub for Vec3 {
    type Output = Vec3;
    fn sub(self, o: Vec3) -> Vec3 {
        Vec3::new(self.x1 - o.x1, self.x2 - o.x2, self.x3 - o.x3)
    }
}

impl Mul<f64> for Vec3 {
    type Output = Vec3;
    fn mul(self, k: f64) -> Vec3 {
        Vec3::new(self.x1 * k, self.x2 * k, self.x3 * k)
    }
}

impl Neg for Vec3 {
    type Output = Vec3;
    fn neg(self) -> Vec3 {
        Vec3::new(-self.x1, -self.x2, -self.x3)
    }
}

/// Kinematic curve with a single cusp:
/// `x = (A mu(t) e^{-s^2}, 0, s - mu(t) s e^{-s^2})`, `mu = exp(-(t-t1)^2/sigma_t^2)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticCusp {
    t1: f64,
    sigma_t: f64,
    amplitude: f64,
}

impl SyntheticCusp {
    /// The curve must be straight to machine precision at `t = 0`, hence `t1 >= 10 sigma_t`.
    pub fn new(t1: f64, sigma_t: f64, amplitude: f64) -> Result<Self> {
        if !(sigma_t > 0.0 && sigma_t.is_finite()) {
            return Err(Error::invalid("sigma_t", "must be positive"));
        }
        if amplitude == 0.0 || !amplitude.is_finite() {
            return Err(Error::invalid("amplitude", "must be finite and non-zero"));
        }
        if !(t1 >= 10.0 * sigma_t) {
            return Err(Error::invalid(
                "t1",
                format!("must satisfy t1 >= 10 sigma_t (t1 = {t1}, sigma_t = {sigma_t})"),
            ));
        }
        Ok(SyntheticCusp {
            t1,
            sigma_t,
            amplitude,
        })
    }

    pub fn t1(&self) -> f64 {
        self.t1
    }

    pub fn sigma_t(&self) -> f64 {
        self.sigma_t
    }

    pub fn amplitude(&self) -> f64 {
        self.amplitude
    }

    pub fn mu(&self, t: f64) -> f64 {
        let z = (t - self.t1) / self.sigma_t;
        (-z * z).exp()
    }

    fn mu_dot(&self, t: f64) -> f64 {
        -2.0 * (t - self.t1) / (self.sigma_t * self.sigma_t) * self.mu(t)
    }
}

/// One unit-speed mover path: `n3` rotated by `theta(u) = theta0 exp(-(u-center)^2/width^2)`
/// towards the azimuth `azimuth`.
#[derive(Debug, Clone, PartialEq)]
pub struct MoverPath {
    pub theta0: f64,
    pub center: f64,
    pub width: f64,
    pub azimuth: f64,
}

impl MoverPath {
    pub fn straight() -> Self {
        MoverPath {
            theta0: 0.0,
            center: 0.0,
            width: 1.0,
            azimuth: 0.0,
        }
    }

    fn theta(&self, u: f64) -> (f64, f64) {
        let z = (u - self.center) / self.width;
        let th = self.theta0 * (-z * z).exp();
        let dth = -2.0 * z / self.width * th;
        (th, dth)
    }

    /// Unit tangent of the mover at `u`.
    pub fn direction(&self, u: f64) -> Vec3 {
        let (th, _) = self.theta(u);
        Vec3::from_angles(th, self.azimuth)
    }

    /// Derivative of [`direction`](Self::direction) with respect to `u`.
    pub fn direction_prime(&self, u: f64) -> Vec3 {
        let (th, dth) = self.theta(u);
        let (st, ct) = th.sin_cos();
        let (sp, cp) = self.azimuth.sin_cos();
        Vec3::new(ct * cp, ct * sp, -st) * dth
    }

    /// Half-width of the window outside which the excursion is below double precision.
    fn support(&self) -> f64 {
        8.0 * self.width
    }
}

/// Cached antiderivative of a mover path, anchored at `A(0) = 0`.
///
/// Values come from Gauss-Legendre integration over a uniform node grid and are
/// interpolated with quintic Hermite polynomials that use the exact first and
/// second derivatives at the nodes.
#[derive(Debug, Clone, PartialEq)]
struct MoverTable {
    lo: f64,
    h: f64,
    values: Vec<Vec3>,
    anchor: Vec3,
}

impl MoverTable {
    fn build(path: &MoverPath) -> Self {
        if path.theta0 == 0.0 {
            return MoverTable {
                lo: 0.0,
                h: 1.0,
                values: vec![Vec3::ZERO, Vec3::E3],
                anchor: Vec3::ZERO,
            };
        }
        let half = path.support();
        let lo = path.center - half;
        let h = path.width / 64.0;
        let n = (2.0 * half / h).ceil() as usize;
        let rule = gauss::rule(10);
        let mut values = Vec::with_capacity(n + 1);
        let mut acc = Vec3::ZERO;
        values.push(acc);
        for k in 0..n {
            let a = lo + k as f64 * h;
            let mid = a + 0.5 * h;
            let mut seg = Vec3::ZERO;
            for (x, w) in rule.iter() {
                seg += path.direction(mid + 0.5 * h * x) * (0.5 * h * w);
            }
            acc += seg;
            values.push(acc);
        }
        let mut table = MoverTable {
            lo,
            h,
            values,
            anchor: Vec3::ZERO,
        };
        table.anchor = table.raw(path, 0.0);
        table
    }

    fn hi(&self) -> f64 {
        self.lo + self.h * (self.values.len() - 1) as f64
    }

    /// Integral of the path from `lo` to `u`.
    fn raw(&self, path: &MoverPath, u: f64) -> Vec3 {
        let hi = self.hi();
        if u <= self.lo {
            return Vec3::E3 * (u - self.lo);
        }
        if u >= hi {
            return self.values[self.values.len() - 1] + Vec3::E3 * (u - hi);
        }
        let pos = (u - self.lo) / self.h;
        let k = (pos.floor() as usize).min(self.values.len() - 2);
        let x = pos - k as f64;
        let u0 = self.lo + k as f64 * self.h;
        let u1 = u0 + self.h;
        let (f0, f1) = (self.values[k], self.values[k + 1]);
        let (d0, d1) = (path.direction(u0), path.direction(u1));
        let (s0, s1) = (path.direction_prime(u0), path.direction_prime(u1));
        let (x2, x3) = (x * x, x * x * x);
        let (x4, x5) = (x3 * x, x3 * x2);
        let h0 = 1.0 - 10.0 * x3 + 15.0 * x4 - 6.0 * x5;
        let h1 = 10.0 * x3 - 15.0 * x4 + 6.0 * x5;
        let g0 = x - 6.0 * x3 + 8.0 * x4 - 3.0 * x5;
        let g1 = -4.0 * x3 + 7.0 * x4 - 3.0 * x5;
        let k0 = 0.5 * (x2 - 3.0 * x3 + 3.0 * x4 - x5);
        let k1 = 0.5 * (x3 - 2.0 * x4 + x5);
        let h = self.h;
        f0 * h0 + f1 * h1 + (d0 * g0 + d1 * g1) * h + (s0 * k0 + s1 * k1) * (h * h)
    }

    fn eval(&self, path: &MoverPath, u: f64) -> Vec3 {
        if path.theta0 == 0.0 {
            return Vec3::E3 * u;
        }
        self.raw(path, u) - self.anchor
    }
}

/// Gauge-exact string `x(s,t) = (A(s+t) + B(s-t)) / 2` built from two unit-speed movers.
#[derive(Debug, Clone, PartialEq)]
pub struct MoverCurve {
    left: MoverPath,
    right: MoverPath,
    left_table: MoverTable,
    right_table: MoverTable,
}

impl MoverCurve {
    pub fn new(left: MoverPath, right: MoverPath) -> Result<Self> {
        for p in [&left, &right] {
            if !(p.width > 0.0) || !p.theta0.is_finite() || !p.center.is_finite() {
                return Err(Error::invalid("mover", "width must be positive, angles finite"));
            }
        }
        let left_table = MoverTable::build(&left);
        let right_table = MoverTable::build(&right);
        Ok(MoverCurve {
            left,
            right,
            left_table,
            right_table,
        })
    }

    pub fn left(&self) -> &MoverPath {
        &self.left
    }

    pub fn right(&self) -> &MoverPath {
        &self.right
    }

    /// Antiderivative `A(u)` of the left mover, anchored at the origin.
    pub fn left_integral(&self, u: f64) -> Vec3 {
        self.left_table.eval(&self.left, u)
    }

    /// Antiderivative `B(u)` of the right mover, anchored at the origin.
    pub fn right_integral(&self, u: f64) -> Vec3 {
        self.right_table.eval(&self.right, u)
    }
}

/// The curve variants addressable from scenarios.
#[derive(Debug, Clone, PartialEq)]
pub enum CurveFamily {
    StraightLine,
    SyntheticCusp(SyntheticCusp),
    Mover(MoverCurve),
}

impl CurveFamily {
    pub fn name(&self) -> &'static str {
        match self {
            CurveFamily::StraightLine => "straight",
            CurveFamily::SyntheticCusp(_) => "synthetic-cusp",
            CurveFamily::Mover(_) => "mover",
        }
    }

    pub fn position(&self, s: f64, t: f64) -> Vec3 {
        match self {
            CurveFamily::StraightLine => Vec3::new(0.0, 0.0, s),
            CurveFamily::SyntheticCusp(c) => {
                let m = c.mu(t) * (-s * s).exp();
                Vec3::new(c.amplitude * m, 0.0, s - m * s)
            }
            CurveFamily::Mover(m) => (m.left_integral(s + t) + m.right_integral(s - t)) * 0.5,
        }
    }

    /// Spatial tangent `dx/ds`.
    pub fn tangent(&self, s: f64, t: f64) -> Vec3 {
        match self {
            CurveFamily::StraightLine => Vec3::E3,
            CurveFamily::SyntheticCusp(c) => {
                let m = c.mu(t) * (-s * s).exp();
                Vec3::new(
                    -2.0 * c.amplitude * m * s,
                    0.0,
                    1.0 - m * (1.0 - 2.0 * s * s),
                )
            }
            CurveFamily::Mover(m) => {
                (m.left.direction(s + t) + m.right.direction(s - t)) * 0.5
            }
        }
    }

    /// Second spatial derivative `d^2x/ds^2`.
    pub fn tangent_ds(&self, s: f64, t: f64) -> Vec3 {
        match self {
            CurveFamily::StraightLine => Vec3::ZERO,
            CurveFamily::SyntheticCusp(c) => {
                let m = c.mu(t) * (-s * s).exp();
                Vec3::new(
                    -2.0 * c.amplitude * m * (1.0 - 2.0 * s * s),
                    0.0,
                    m * (6.0 * s - 4.0 * s * s * s),
                )
            }
            CurveFamily::Mover(m) => {
                (m.left.direction_prime(s + t) + m.right.direction_prime(s - t)) * 0.5
            }
        }
    }

    /// Mixed derivative `d^2x/(ds dt)`.
    pub fn tangent_dt(&self, s: f64, t: f64) -> Vec3 {
        match self {
            CurveFamily::StraightLine => Vec3::ZERO,
            CurveFamily::SyntheticCusp(c) => {
                let e = (-s * s).exp();
                let md = c.mu_dot(t);
                Vec3::new(
                    -2.0 * c.amplitude * md * s * e,
                    0.0,
                    -md * (1.0 - 2.0 * s * s) * e,
                )
            }
            CurveFamily::Mover(m) => {
                (m.left.direction_prime(s + t) - m.right.direction_prime(s - t)) * 0.5
            }
        }
    }

    /// Velocity `dx/dt`.
    pub fn velocity(&self, s: f64, t: f64) -> Vec3 {
        match self {
            CurveFamily::StraightLine => Vec3::ZERO,
            CurveFamily::SyntheticCusp(c) => {
                let m = c.mu_dot(t) * (-s * s).exp();
                Vec3::new(c.amplitude * m, 0.0, -m * s)
            }
            CurveFamily::Mover(m) => {
                (m.left.direction(s + t) - m.right.direction(s - t)) * 0.5
            }
        }
    }

    /// `x(s,t) - n3 s`, evaluated without cancellation where a closed form exists.
    pub fn deviation(&self, s: f64, t: f64) -> Vec3 {
        match self {
            CurveFamily::StraightLine => Vec3::ZERO,
            CurveFamily::SyntheticCusp(c) => {
                let m = c.mu(t) * (-s * s).exp();
                Vec3::new(c.amplitude * m, 0.0, -m * s)
            }
            CurveFamily::Mover(_) => self.position(s, t) - Vec3::E3 * s,
        }
    }

    /// Second derivative of `|x'|^2 / 2` along `s` and `t`, used by the cusp polisher.
    fn half_speed_gradient(&self, s: f64, t: f64) -> (f64, f64) {
        let x1 = self.tangent(s, t);
        (x1.dot(self.tangent_ds(s, t)), x1.dot(self.tangent_dt(s, t)))
    }
}

/// `s^n |x(s,t) - n3 s|` for every sample.
pub fn asymptotic_deviation(curve: &CurveFamily, t: f64, n: u32, s_list: &[f64]) -> Vec<f64> {
    s_list
        .iter()
        .map(|&s| s.abs().powi(n as i32) * curve.deviation(s, t).norm())
        .collect()
}

/// A zero of the spatial tangent.
#[derive(Debug, Clone, PartialEq)]
pub struct CuspEvent {
    pub s1: f64,
    pub t1: f64,
    pub location: Vec3,
    pub tangent_residual: f64,
    /// `false` when the event is one sample of a continuous cusp locus.
    pub isolated: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Window {
    pub lo: f64,
    pub hi: f64,
}

impl Window {
    pub fn new(lo: f64, hi: f64) -> Self {
        Window { lo, hi }
    }

    pub fn contains(&self, x: f64) -> bool {
        x >= self.lo && x <= self.hi
    }

    /// Node `k` of `n` evenly spaced points covering the window.
    pub fn node(&self, k: usize, n: usize) -> f64 {
        self.lo + (self.hi - self.lo) * k as f64 / (n - 1) as f64
    }
}

/// Sampling resolution of the cusp search.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CuspGrid {
    pub n_s: usize,
    pub n_t: usize,
}

impl Default for CuspGrid {
    fn default() -> Self {
        CuspGrid { n_s: 241, n_t: 201 }
    }
}

fn speed(curve: &CurveFamily, s: f64, t: f64) -> f64 {
    curve.tangent(s, t).norm()
}

/// Bisection on the sign of `g` inside `[lo, hi]`; returns the minimiser of a
/// function whose derivative is `g` when the signs bracket, else the better end.
fn bisect_derivative(mut lo: f64, mut hi: f64, g: impl Fn(f64) -> f64) -> f64 {
    let (glo, ghi) = (g(lo), g(hi));
    if glo >= 0.0 && ghi >= 0.0 {
        return lo;
    }
    if glo <= 0.0 && ghi <= 0.0 {
        return hi;
    }
    let increasing = glo < 0.0;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let gm = g(mid);
        if gm == 0.0 {
            return mid;
        }
        if (gm < 0.0) == increasing {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Damped Gauss-Newton on the tangent components followed by coordinate
/// bisection on the gradient of `|x'|^2`.
fn refine_cusp(
    curve: &CurveFamily,
    mut s: f64,
    mut t: f64,
    ds: f64,
    dt: f64,
    s_win: Window,
    t_win: Window,
) -> (f64, f64) {
    let mut lambda = 1e-6;
    let mut f = speed(curve, s, t);
    for _ in 0..100 {
        if f == 0.0 {
            return (s, t);
        }
        let r = curve.tangent(s, t);
        let js = curve.tangent_ds(s, t);
        let jt = curve.tangent_dt(s, t);
        let (a11, a12, a22) = (js.dot(js), js.dot(jt), jt.dot(jt));
        let (b1, b2) = (-js.dot(r), -jt.dot(r));
        let mut accepted = false;
        for _ in 0..30 {
            let m11 = a11 * (1.0 + lambda) + 1e-300;
            let m22 = a22 * (1.0 + lambda) + 1e-300;
            let det = m11 * m22 - a12 * a12;
            if det == 0.0 || !det.is_finite() {
                lambda *= 10.0;
                continue;
            }
            let step_s = (b1 * m22 - b2 * a12) / det;
            let step_t = (m11 * b2 - a12 * b1) / det;
            let ns = (s + step_s).clamp(s - ds, s + ds).clamp(s_win.lo, s_win.hi);
            let nt = (t + step_t).clamp(t - dt, t + dt).clamp(t_win.lo, t_win.hi);
            let nf = speed(curve, ns, nt);
            if nf < f {
                s = ns;
                t = nt;
                f = nf;
                lambda = (lambda * 0.1).max(1e-12);
                accepted = true;
                break;
            }
            lambda *= 10.0;
        }
        if !accepted {
            break;
        }
    }
    // Coordinate polish: the minimiser of |x'|^2 along each axis.
    let (mut hs, mut ht) = (ds, dt);
    for _ in 0..60 {
        let ns = bisect_derivative(
            (s - hs).max(s_win.lo),
            (s + hs).min(s_win.hi),
            |x| curve.half_speed_gradient(x, t).0,
        );
        let nt = bisect_derivative(
            (t - ht).max(t_win.lo),
            (t + ht).min(t_win.hi),
            |y| curve.half_speed_gradient(ns, y).1,
        );
        let moved = (ns - s).abs() + (nt - t).abs();
        s = ns;
        t = nt;
        hs = (hs * 0.5).max(4.0 * f64::EPSILON * (1.0 + s.abs()));
        ht = (ht * 0.5).max(4.0 * f64::EPSILON * (1.0 + t.abs()));
        if moved == 0.0 {
            break;
        }
    }
    (s, t)
}

/// Locates the zeros of `|dx/ds|` inside the window.
///
/// Each time row is scanned for local minima of the speed, which are chained
/// into tracks. A track that stays on the zero set for consecutive rows is a
/// cusp locus and reports one non-isolated event per row; otherwise the
/// track's minimum is refined in both variables.
pub fn find_cusps(
    curve: &CurveFamily,
    s_window: Window,
    t_window: Window,
    grid: CuspGrid,
    tol: f64,
) -> Result<Vec<CuspEvent>> {
    if !(tol > 0.0) {
        return Err(Error::invalid("tol", "must be positive"));
    }
    if !(s_window.hi > s_window.lo && t_window.hi >= t_window.lo) || grid.n_s < 3 || grid.n_t < 2 {
        return Err(Error::invalid("window", "empty window or grid too coarse"));
    }
    let (ns, nt) = (grid.n_s, grid.n_t);
    let ds = (s_window.hi - s_window.lo) / (ns - 1) as f64;
    let dt = if nt > 1 {
        (t_window.hi - t_window.lo) / (nt - 1) as f64
    } else {
        0.0
    };
    let speeds: Vec<f64> = (0..nt)
        .flat_map(|j| {
            let t = t_window.node(j, nt);
            (0..ns).map(move |i| (i, t))
        })
        .map(|(i, t)| speed(curve, s_window.node(i, ns), t))
        .collect();
    let at = |i: usize, j: usize| speeds[j * ns + i];

    // A whole sampled cell with vanishing tangent means the variant is ill-posed.
    let flat = 1e-13;
    for j in 0..nt.saturating_sub(1) {
        for i in 0..ns - 1 {
            if at(i, j) < flat && at(i + 1, j) < flat && at(i, j + 1) < flat && at(i + 1, j + 1) < flat {
                return Err(Error::DegenerateCurve {
                    s: s_window.node(i, ns),
                    t: t_window.node(j, nt),
                });
            }
        }
    }

    // Row minima refined in s.
    struct RowMin {
        row: usize,
        s: f64,
        value: f64,
    }
    let mut rows: Vec<Vec<RowMin>> = Vec::with_capacity(nt);
    for j in 0..nt {
        let t = t_window.node(j, nt);
        let mut mins = Vec::new();
        for i in 0..ns {
            let left = if i > 0 { at(i - 1, j) } else { f64::INFINITY };
            let right = if i + 1 < ns { at(i + 1, j) } else { f64::INFINITY };
            let v = at(i, j);
            if v <= left && v < right {
                let s0 = s_window.node(i, ns);
                let s = bisect_derivative(
                    (s0 - ds).max(s_window.lo),
                    (s0 + ds).min(s_window.hi),
                    |x| curve.half_speed_gradient(x, t).0,
                );
                mins.push(RowMin {
                    row: j,
                    s,
                    value: speed(curve, s, t),
                });
            }
        }
        rows.push(mins);
    }

    // Chain row minima into tracks.
    let mut tracks: Vec<Vec<RowMin>> = Vec::new();
    let mut open: Vec<usize> = Vec::new();
    for mins in rows.into_iter() {
        let mut next_open = Vec::new();
        for m in mins {
            let link = open.iter().copied().find(|&k| {
                let last = tracks[k].last().unwrap();
                last.row + 1 == m.row && (last.s - m.s).abs() <= 3.0 * ds.max(dt)
            });
            match link {
                Some(k) => {
                    open.retain(|&o| o != k);
                    tracks[k].push(m);
                    next_open.push(k);
                }
                None => {
                    tracks.push(vec![m]);
                    next_open.push(tracks.len() - 1);
                }
            }
        }
        open = next_open;
    }

    let mut events = Vec::new();
    let mut isolated_tracks = Vec::new();
    for track in &tracks {
        let zero_rows: Vec<&RowMin> = track.iter().filter(|m| m.value < tol).collect();
        let locus = track
            .windows(2)
            .any(|w| w[0].value < tol && w[1].value < tol);
        if locus {
            for m in zero_rows {
                let t = t_window.node(m.row, nt);
                events.push(CuspEvent {
                    s1: m.s,
                    t1: t,
                    location: curve.position(m.s, t),
                    tangent_residual: m.value,
                    isolated: false,
                });
            }
            continue;
        }
        isolated_tracks.push(track);
    }
    for track in isolated_tracks {
        for k in 0..track.len() {
            let v = track[k].value;
            let prev = if k > 0 { track[k - 1].value } else { f64::INFINITY };
            let next = if k + 1 < track.len() {
                track[k + 1].value
            } else {
                f64::INFINITY
            };
            if !(v <= prev && v < next) {
                continue;
            }
            let t0 = t_window.node(track[k].row, nt);
            let (s, t) = refine_cusp(curve, track[k].s, t0, ds, dt.max(ds), s_window, t_window);
            let res = speed(curve, s, t);
            if res < tol && s_window.contains(s) && t_window.contains(t) {
                // A stray row minimum next to a locus refines back onto it.
                let dup = events.iter().any(|e: &CuspEvent| {
                    let (rs, rt) = if e.isolated { (1e-6, 1e-6) } else { (ds.max(dt), dt.max(ds)) };
                    (e.s1 - s).abs() <= rs && (e.t1 - t).abs() <= rt
                });
                if !dup {
                    events.push(CuspEvent {
                        s1: s,
                        t1: t,
                        location: curve.position(s, t),
                        tangent_residual: res,
                        isolated: true,
                    });
                }
            }
        }
    }
    events.sort_by(|a, b| a.t1.total_cmp(&b.t1).then(a.s1.total_cmp(&b.s1)));
    Ok(events)
}

/// Outcome of scanning `s -> u . x'(s,t)` for sign changes.
#[derive(Debug, Clone, PartialEq)]
pub enum CriticalScan {
    Roots(Vec<f64>),
    /// `u . x'` vanishes identically on the sampled grid.
    Degenerate,
}

impl CriticalScan {
    pub fn is_clear(&self) -> bool {
        matches!(self, CriticalScan::Roots(r) if r.is_empty())
    }
}

/// Roots of `s -> u . x'(s,t)` on `s_range` by sign-change bisection on a dense grid.
pub fn critical_point_scan(
    curve: &CurveFamily,
    u: Vec3,
    t: f64,
    s_range: Window,
    n_grid: usize,
) -> CriticalScan {
    let n = n_grid.max(3);
    let f = |s: f64| u.dot(curve.tangent(s, t));
    let vals: Vec<f64> = (0..n).map(|k| f(s_range.node(k, n))).collect();
    if vals.iter().all(|v| v.abs() < 1e-14) {
        return CriticalScan::Degenerate;
    }
    let mut roots = Vec::new();
    for k in 0..n {
        let s = s_range.node(k, n);
        if vals[k] == 0.0 {
            roots.push(s);
            continue;
        }
        if k + 1 < n && vals[k] * vals[k + 1] < 0.0 {
            let (mut lo, mut hi) = (s, s_range.node(k + 1, n));
            let mut flo = vals[k];
            for _ in 0..100 {
                let mid = 0.5 * (lo + hi);
                if mid <= lo || mid >= hi {
                    break;
                }
                let fm = f(mid);
                if fm == 0.0 {
                    lo = mid;
                    hi = mid;
                    break;
                }
                if fm * flo < 0.0 {
                    hi = mid;
                } else {
                    lo = mid;
                    flo = fm;
                }
            }
            roots.push(0.5 * (lo + hi));
        }
    }
    CriticalScan::Roots(roots)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn synthetic() -> CurveFamily {
        CurveFamily::SyntheticCusp(SyntheticCusp::new(1.0, 0.1, 0.5).unwrap())
    }

    #[test]
    fn straight_line_values() {
        let c = CurveFamily::StraightLine;
        assert_eq!(c.position(2.5, 7.0), Vec3::new(0.0, 0.0, 2.5));
        assert_eq!(c.tangent(-3.0, 1.0), Vec3::E3);
    }

    #[test]
    fn synthetic_closed_forms() {
        let c = synthetic();
        assert_eq!(c.position(0.0, 1.0), Vec3::new(0.5, 0.0, 0.0));
        let p0 = c.position(0.0, 0.0);
        assert!((p0.x1 - 0.5 * (-100.0f64).exp()).abs() < 1e-300);
        assert!(p0.norm() < 1e-40);
        assert_eq!(c.tangent(0.0, 1.0), Vec3::ZERO);
        for t in [0.9, 1.1] {
            let v = c.tangent(0.0, t);
            assert!((v.x3 - (1.0 - (-1.0f64).exp())).abs() < 1e-15);
            assert_eq!(v.x1, 0.0);
        }
    }

    #[test]
    fn synthetic_rejects_bad_parameters() {
        assert!(SyntheticCusp::new(1.0, 0.0, 0.5).is_err());
        assert!(SyntheticCusp::new(1.0, 0.1, 0.0).is_err());
        assert!(SyntheticCusp::new(0.5, 0.1, 0.5).is_err());
    }

    #[test]
    fn synthetic_deviation_examples() {
        let c = synthetic();
        let d = asymptotic_deviation(&c, 1.0, 4, &[6.0]);
        let expect = 1296.0 * (-36.0f64).exp() * (0.25f64 + 36.0).sqrt();
        assert!((d[0] - expect).abs() < 1e-25);
        assert!(d[0] < 1e-11);
        assert_eq!(asymptotic_deviation(&c, 1.0, 0, &[0.0])[0], 0.5);
        assert!(asymptotic_deviation(&CurveFamily::StraightLine, 0.3, 3, &[1.0, 5.0])
            .iter()
            .all(|&v| v == 0.0));
    }

    #[test]
    fn straight_line_has_no_cusps() {
        let ev = find_cusps(
            &CurveFamily::StraightLine,
            Window::new(-3.0, 3.0),
            Window::new(0.0, 2.0),
            CuspGrid::default(),
            1e-10,
        )
        .unwrap();
        assert!(ev.is_empty());
    }

    #[test]
    fn synthetic_cusp_is_located() {
        let ev = find_cusps(
            &synthetic(),
            Window::new(-3.0, 3.0),
            Window::new(0.0, 2.0),
            CuspGrid::default(),
            1e-10,
        )
        .unwrap();
        assert_eq!(ev.len(), 1, "{ev:?}");
        assert!(ev[0].s1.abs() < 1e-8 && (ev[0].t1 - 1.0).abs() < 1e-8, "{ev:?}");
        assert!(ev[0].tangent_residual < 1e-10);
        assert!(ev[0].isolated);
    }

    #[test]
    fn synthetic_window_without_cusp_is_empty() {
        let ev = find_cusps(
            &synthetic(),
            Window::new(-3.0, 3.0),
            Window::new(0.0, 0.8),
            CuspGrid::default(),
            1e-10,
        )
        .unwrap();
        assert!(ev.is_empty(), "{ev:?}");
    }

    #[test]
    fn mover_south_pole_gives_cusp_locus() {
        let left = MoverPath {
            theta0: std::f64::consts::PI,
            center: 0.0,
            width: 0.5,
            azimuth: 0.0,
        };
        let curve = CurveFamily::Mover(MoverCurve::new(left, MoverPath::straight()).unwrap());
        let ev = find_cusps(
            &curve,
            Window::new(-2.0, 2.0),
            Window::new(-1.0, 1.0),
            CuspGrid { n_s: 161, n_t: 21 },
            1e-8,
        )
        .unwrap();
        assert!(ev.len() >= 15, "{ev:?}");
        for e in &ev {
            assert!(!e.isolated, "{ev:?}");
            assert!((e.s1 + e.t1).abs() < 1e-7, "{e:?}");
        }
    }

    #[test]
    fn mover_tables_match_direct_integration() {
        let path = MoverPath {
            theta0: 2.0,
            center: 1.5,
            width: 0.4,
            azimuth: 0.7,
        };
        let curve = MoverCurve::new(path.clone(), MoverPath::straight()).unwrap();
        let rule = gauss::rule(20);
        for &u in &[-1.0, 0.3, 1.2, 1.5, 1.77, 2.9, 6.0] {
            // 2000 fixed panels of a 20-point rule from 0 to u.
            let n = 2000;
            let h = u / n as f64;
            let mut acc = Vec3::ZERO;
            for k in 0..n {
                let mid = (k as f64 + 0.5) * h;
                for (x, w) in rule.iter() {
                    acc += path.direction(mid + 0.5 * h * x) * (0.5 * h * w);
                }
            }
            let err = (curve.left_integral(u) - acc).norm();
            assert!(err < 1e-10, "u={u} err={err}");
        }
    }

    #[test]
    fn degenerate_curve_is_rejected() {
        // Left mover equal to -n3 everywhere near the origin: theta0 = pi with a
        // huge width keeps A' = -n3 on the whole window, B' = n3, so x' = 0.
        let left = MoverPath {
            theta0: std::f64::consts::PI,
            center: 0.0,
            width: 1e6,
            azimuth: 0.0,
        };
        let curve = CurveFamily::Mover(MoverCurve::new(left, MoverPath::straight()).unwrap());
        let r = find_cusps(
            &curve,
            Window::new(-0.5, 0.5),
            Window::new(0.0, 0.1),
            CuspGrid { n_s: 11, n_t: 5 },
            1e-9,
        );
        assert!(matches!(r, Err(Error::DegenerateCurve { .. })), "{r:?}");
    }

    #[test]
    fn critical_scan_examples() {
        let w = Window::new(-5.0, 5.0);
        let straight = CurveFamily::StraightLine;
        assert_eq!(
            critical_point_scan(&straight, Vec3::E3, 0.0, w, 1001),
            CriticalScan::Roots(vec![])
        );
        assert_eq!(
            critical_point_scan(&straight, Vec3::E1, 0.0, w, 1001),
            CriticalScan::Degenerate
        );
        assert_eq!(
            critical_point_scan(&synthetic(), Vec3::E2, 1.0, w, 1001),
            CriticalScan::Degenerate
        );
        // Tilted direction at the cusp time: roots at s = 0 and s ~ 2 u1 A / (3 u3).
        let u = Vec3::from_angles(0.1, 0.0);
        match critical_point_scan(&synthetic(), u, 1.0, w, 2001) {
            CriticalScan::Roots(r) => {
                assert!(r.len() >= 2, "{r:?}");
                assert!(r.iter().any(|s| s.abs() < 1e-9));
            }
            other => panic!("{other:?}"),
        }
    }
}
