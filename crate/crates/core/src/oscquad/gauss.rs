//! Gauss-Legendre rules on `[-1, 1]`, computed once per order and cached.

use std::sync::OnceLock;

pub const MAX_ORDER: usize = 128;

#[derive(Debug)]
pub struct GaussRule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GaussRule {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.nodes.iter().copied().zip(self.weights.iter().copied())
    }

    /// Integral of `f` over `[lo, hi]`.
    pub fn integrate<T, F>(&self, lo: f64, hi: f64, mut f: F) -> T
    where
        T: std::ops::Add<Output = T> + std::ops::Mul<f64, Output = T> + Default,
        F: FnMut(f64) -> T,
    {
        let (m, h) = (0.5 * (lo + hi), 0.5 * (hi - lo));
        let mut acc = T::default();
        for (x, w) in self.iter() {
            acc = acc + f(m + h * x) * w;
        }
        acc * h
    }
}

static RULES: [OnceLock<GaussRule>; MAX_ORDER + 1] = [const { OnceLock::new() }; MAX_ORDER + 1];

/// The `n`-point rule; `n` is clamped to `1..=MAX_ORDER`.
pub fn rule(n: usize) -> &'static GaussRule {
    let n = n.clamp(1, MAX_ORDER);
    RULES[n].get_or_init(|| build(n))
}

/// `P_n(x)` and `P_n'(x)` by the three-term recurrence.
pub(crate) fn legendre(n: usize, x: f64) -> (f64, f64) {
    let (mut p0, mut p1) = (1.0, x);
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, dp)
}

fn build(n: usize) -> GaussRule {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let half = n.div_ceil(2);
    for i in 0..half {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        for _ in 0..100 {
            let (p, dp) = legendre(n, x);
            let dx = p / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, dp) = legendre(n, x);
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.0;
    }
    GaussRule { nodes, weights }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn weights_sum_to_two_and_nodes_are_sorted() {
        for n in [1, 2, 3, 7, 10, 20, 64, 128] {
            let r = rule(n);
            let s: f64 = r.weights.iter().sum();
            assert!((s - 2.0).abs() < 1e-13, "n={n} sum={s}");
            assert!(r.nodes.windows(2).all(|w| w[0] < w[1]));
        }
    }

    #[test]
    fn exact_for_polynomials_up_to_degree_2n_minus_1() {
        for n in [2, 5, 12, 30] {
            let r = rule(n);
            for deg in 0..2 * n {
                let got = r.integrate(-1.0, 1.0, |x: f64| x.powi(deg as i32));
                let exact = if deg % 2 == 1 { 0.0 } else { 2.0 / (deg as f64 + 1.0) };
                assert!((got - exact).abs() < 1e-13, "n={n} deg={deg}");
            }
        }
    }

    #[test]
    fn known_three_point_rule() {
        let r = rule(3);
        assert!((r.nodes[2] - 0.6f64.sqrt()).abs() < 1e-15);
        assert!((r.weights[1] - 8.0 / 9.0).abs() < 1e-15);
    }
}
