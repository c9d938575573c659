//! The position-space transform by explicit momentum quadrature against the
//! route through the closed-form kernel.

use cusp_transfer::evolve::{compute_i0_grid, volterra_iterate, Evolution, GridSpec, ProbeGrid};
use cusp_transfer::geometry::{CurveFamily, SyntheticCusp, Vec3};
use cusp_transfer::oscquad::QuadratureConfig;
use cusp_transfer::potential::PotentialParams;
use cusp_transfer::spectrum::BoundState;
use num_complex::Complex64;

const EPS1: f64 = -0.050_660_591_821_168_89;

#[test]
fn product_grid_and_kernel_routes_agree() {
    let quad = QuadratureConfig::default();
    let params = PotentialParams::new(0.2, EPS1, 1.0, 2.0).unwrap();
    let state = BoundState::normalized(0.2, EPS1, 0.5, &quad).unwrap();
    let curve = CurveFamily::SyntheticCusp(SyntheticCusp::new(0.1, 0.01, 0.5).unwrap());
    let t = 0.12;
    let spec = GridSpec::minimal(&params, t).unwrap().refined(4);
    let field = compute_i0_grid(&curve, &state, &params, &spec, &quad).unwrap();
    let ev = Evolution { curve: &curve, state: &state, params: &params, field: &field, quad: &quad };
    let x = curve.position(0.0, t) + Vec3::new(0.0, 0.3, 0.0);
    let kernel = ev.position_probe_kernel(x, t, 4).unwrap();
    let grid = ProbeGrid { n_radial: 16, n_polar: 16, n_azimuth: 32, max_nodes: 10_000 };
    let product = ev.position_probe(x, t, &grid).unwrap();
    assert!((kernel - product).norm() < 5e-3 * kernel.norm(), "{kernel} vs {product}");
}

// Exact straight-string delta psi(x) at a = 0.1, sigma3 = 1, t = 0.005 on the
// transverse axis, from a direct (p3, rho) quadrature of (e^{i kappa^2 t} - 1) phi.
const STRAIGHT_EXACT: [(f64, f64, f64); 3] = [
    (0.0, -0.080_834_985_830, 0.566_403_099_421),
    (0.1, -0.072_775_196_114, 0.509_956_461_254),
    (0.3, -0.027_167_165_770, 0.190_486_372_960),
];

#[test]
fn kernel_route_reproduces_exact_straight_string_profile() {
    let quad = QuadratureConfig::default();
    let params = PotentialParams::new(0.1, EPS1, 10.0, 2.0).unwrap();
    let state = BoundState::normalized(0.1, EPS1, 1.0, &quad).unwrap();
    let curve = CurveFamily::StraightLine;
    let t = 0.005;
    let spec = GridSpec::minimal(&params, t).unwrap();
    let source = compute_i0_grid(&curve, &state, &params, &spec, &quad).unwrap();
    let scale = Complex64::new(STRAIGHT_EXACT[0].1, STRAIGHT_EXACT[0].2).norm();
    let worst = |order: usize| {
        let field = volterra_iterate(&source, &curve, &params, order).unwrap().field;
        let ev = Evolution { curve: &curve, state: &state, params: &params, field: &field, quad: &quad };
        STRAIGHT_EXACT
            .iter()
            .map(|&(r, re, im)| {
                let got = ev.position_probe_kernel(Vec3::new(0.0, r, 0.0), t, 4).unwrap();
                (got - Complex64::new(re, im)).norm() / scale
            })
            .fold(0.0, f64::max)
    };
    // First Born is far off at kappa^2 t ~ 1; two Picard iterates close the gap.
    let (e0, e2) = (worst(0), worst(2));
    assert!(e0 > 0.2, "{e0}");
    assert!(e2 < 0.03, "{e2}");
}
