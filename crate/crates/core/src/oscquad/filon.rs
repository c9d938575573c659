//! Filon-Legendre quadrature for `Integral g(u) exp(i omega u) du`.
//!
//! On each panel `g` is expanded in Legendre polynomials from its values at
//! the Gauss nodes, and every term is integrated exactly against the
//! exponential through `Integral_{-1}^{1} P_k(x) exp(i k x) dx = 2 i^k j_k(kappa)`.
//! The tail of the expansion serves as the panel error estimate, so each
//! panel costs one batch of `g` evaluations.

use std::sync::OnceLock;

use num_complex::Complex64;

use super::gauss::{self, legendre};
use super::{failure, QuadratureConfig};
use crate::error::Result;

const MAX_FILON_ORDER: usize = 64;

/// `(2k+1)/2 w_i P_k(x_i)`, row-major in `k`.
struct Analysis {
    n: usize,
    matrix: Vec<f64>,
}

static ANALYSIS: [OnceLock<Analysis>; MAX_FILON_ORDER + 1] =
    [const { OnceLock::new() }; MAX_FILON_ORDER + 1];

fn analysis(n: usize) -> &'static Analysis {
    ANALYSIS[n].get_or_init(|| {
        let rule = gauss::rule(n);
        let mut matrix = vec![0.0; n * n];
        for (i, (x, w)) in rule.iter().enumerate() {
            for k in 0..n {
                let (pk, _) = legendre(k, x);
                matrix[k * n + i] = 0.5 * (2 * k + 1) as f64 * w * pk;
            }
        }
        Analysis { n, matrix }
    })
}

/// Spherical Bessel functions `j_0..j_{n-1}` at `x` written into `out`.
pub fn spherical_bessel(x: f64, out: &mut [f64]) {
    let n = out.len();
    if n == 0 {
        return;
    }
    let ax = x.abs();
    if ax < 1e-3 {
        // Three terms of the power series.
        let x2 = ax * ax;
        let mut lead = 1.0;
        for (k, o) in out.iter_mut().enumerate() {
            if k > 0 {
                lead *= ax / (2 * k + 1) as f64;
            }
            let m = (2 * k + 3) as f64;
            *o = lead * (1.0 - x2 / (2.0 * m) + x2 * x2 / (8.0 * m * (m + 2.0)));
        }
    } else if ax >= n as f64 {
        let (s, c) = ax.sin_cos();
        out[0] = s / ax;
        if n > 1 {
            out[1] = s / (ax * ax) - c / ax;
        }
        for k in 1..n - 1 {
            out[k + 1] = (2 * k + 1) as f64 / ax * out[k] - out[k - 1];
        }
    } else {
        // Miller's backward recurrence, scaled to the closed form of j_0 or j_1.
        let start = n + 20 + ax as usize;
        let (mut hi, mut mid) = (0.0f64, 1e-300f64);
        for k in (0..=start).rev() {
            // mid holds j_k, hi holds j_{k+1}, both unnormalised.
            if k < n {
                out[k] = mid;
            }
            let lo = (2 * k + 1) as f64 / ax * mid - hi;
            hi = mid;
            mid = lo;
            if mid.abs() > 1e150 {
                mid *= 1e-150;
                hi *= 1e-150;
                for o in out.iter_mut() {
                    *o *= 1e-150;
                }
            }
        }
        let (s, c) = ax.sin_cos();
        let j0 = s / ax;
        let j1 = s / (ax * ax) - c / ax;
        let scale = if j0.abs() >= j1.abs() || n < 2 { j0 / out[0] } else { j1 / out[1] };
        for o in out.iter_mut() {
            *o *= scale;
        }
    }
    if x < 0.0 {
        for (k, o) in out.iter_mut().enumerate() {
            if k % 2 == 1 {
                *o = -*o;
            }
        }
    }
}

/// Integral and tail estimate over `[a, b]`.
fn panel(g: &impl Fn(f64) -> Complex64, omega: f64, a: f64, b: f64, n: usize, jbuf: &mut [f64]) -> (Complex64, f64) {
    let rule = gauss::rule(n);
    let an = analysis(n);
    let (m, h) = (0.5 * (a + b), 0.5 * (b - a));
    let vals: Vec<Complex64> = rule.nodes.iter().map(|&x| g(m + h * x)).collect();
    spherical_bessel(omega * h, jbuf);
    let mut acc = Complex64::new(0.0, 0.0);
    let mut tail = 0.0;
    // i^k cycles through 1, i, -1, -i.
    let phases = [
        Complex64::new(1.0, 0.0),
        Complex64::new(0.0, 1.0),
        Complex64::new(-1.0, 0.0),
        Complex64::new(0.0, -1.0),
    ];
    for k in 0..an.n {
        let row = &an.matrix[k * n..(k + 1) * n];
        let ck: Complex64 = row.iter().zip(&vals).map(|(w, v)| v * *w).sum();
        acc += ck * phases[k % 4] * (2.0 * jbuf[k]);
        if k + 4 >= n {
            tail += ck.norm() * 2.0 / ((2 * k + 1) as f64).sqrt();
        }
    }
    (acc * Complex64::from_polar(h, omega * m), tail * h)
}

/// `Integral_lo^hi g(u) exp(i omega u) du` for smooth `g`, starting from the
/// partition given by `breaks` and bisecting panels whose Legendre tail
/// exceeds their share of the tolerance.
pub fn filon_integrate(
    g: impl Fn(f64) -> Complex64,
    omega: f64,
    lo: f64,
    hi: f64,
    breaks: &[f64],
    quad: &QuadratureConfig,
) -> Result<Complex64> {
    let n = quad.panel_rule_order.clamp(4, MAX_FILON_ORDER);
    let mut jbuf = vec![0.0; n];
    let mut cuts: Vec<f64> = breaks.iter().copied().filter(|&b| b > lo && b < hi).collect();
    cuts.sort_by(f64::total_cmp);
    cuts.dedup();
    let mut edges = vec![lo];
    edges.extend(cuts);
    edges.push(hi);
    let mut stack: Vec<(f64, f64, Complex64, f64)> = Vec::with_capacity(edges.len() + 32);
    for w in edges.windows(2).rev() {
        let (v, e) = panel(&g, omega, w[0], w[1], n, &mut jbuf);
        stack.push((w[0], w[1], v, e));
    }
    let mut total: Complex64 = stack.iter().map(|p| p.2).sum();
    let mut count = stack.len();
    let length = hi - lo;
    let mut result = Complex64::new(0.0, 0.0);
    while let Some((a, b, v, err)) = stack.pop() {
        if err <= quad.abs_tol.max(quad.rel_tol * total.norm()) * (b - a) / length {
            result += v;
            continue;
        }
        let m = 0.5 * (a + b);
        if m <= a || m >= b {
            return Err(failure(lo, hi, count));
        }
        count += 1;
        if count > quad.max_panels {
            return Err(failure(lo, hi, count));
        }
        let (lv, le) = panel(&g, omega, a, m, n, &mut jbuf);
        let (rv, re) = panel(&g, omega, m, b, n, &mut jbuf);
        total += lv + rv - v;
        stack.push((m, b, rv, re));
        stack.push((a, m, lv, le));
    }
    Ok(result)
}
