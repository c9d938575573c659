//! Picard iterates on the straight string converge to the exact bound state
//! `exp(i kappa^2 t) phi`, which the first Born term alone only approximates.

use cusp_transfer::evolve::{compute_i0_grid, volterra_iterate, Evolution, GridSpec};
use cusp_transfer::geometry::{CurveFamily, Vec3};
use cusp_transfer::oscquad::QuadratureConfig;
use cusp_transfer::potential::PotentialParams;
use cusp_transfer::spectrum::{phi_kappa, BoundState};
use cusp_transfer::Complex64;

const EPS1: f64 = -0.050_660_591_821_168_89;

#[test]
fn iterates_approach_the_exact_static_solution() {
    let quad = QuadratureConfig::default();
    let params = PotentialParams::new(0.1, EPS1, 10.0, 2.0).unwrap();
    let state = BoundState::normalized(0.1, EPS1, 1.0, &quad).unwrap();
    let curve = CurveFamily::StraightLine;
    let t = 0.005;
    let spec = GridSpec::minimal(&params, t).unwrap();
    let source = compute_i0_grid(&curve, &state, &params, &spec, &quad).unwrap();
    let momenta = [Vec3::new(1.0, 0.5, 0.3), Vec3::new(3.0, 0.0, -0.5), Vec3::new(0.2, 6.0, 1.0)];
    let worst_error = |order: usize| {
        let field = volterra_iterate(&source, &curve, &params, order).unwrap().field;
        let ev = Evolution { curve: &curve, state: &state, params: &params, field: &field, quad: &quad };
        momenta
            .iter()
            .map(|&p| {
                let exact = Complex64::from_polar(phi_kappa(p, &state), state.kappa_sq(p.x3).unwrap() * t);
                (ev.psi(p, t).unwrap().psi - exact).norm() / exact.norm()
            })
            .fold(0.0, f64::max)
    };
    let (e0, e1, e2) = (worst_error(0), worst_error(1), worst_error(2));
    assert!(e0 > 0.05 && e0 < 0.2, "{e0}");
    assert!(e1 < 0.5 * e0 && e2 < 0.5 * e1, "{e0} {e1} {e2}");
    assert!(e2 < 1e-2, "{e2}");
}
