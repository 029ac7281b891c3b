//! Reference values from independent high-precision computations (mpmath and scipy shooting).

#![allow(clippy::excessive_precision)]

use vrlab::green::{g1, j_elliptic, j_quadrature, GreenConfig, HalfPlanePoint};
use vrlab::ground_state::solve_ground_state;

fn close(got: f64, want: f64, rel: f64) -> bool {
    (got - want).abs() <= rel * want.abs()
}

// p, first zero of the unit-start solution, U(0), U'(1), Λ_p, ∫U^{p+1}, U(1/2)
const GROUND_STATES: [[f64; 7]; 4] = [
    [2.0, 2.92132072378173, 8.53411477119663, -7.8970710131102, 49.6187605593278, 293.88215678964, 4.95997340575332],
    [2.5, 3.22875923369608, 4.77215141531054, -3.92215326855212, 24.6436157894731, 84.5740334404533, 2.56555510483888],
    [3.0, 3.57390098192753, 3.57390098192753, -2.64512317334823, 16.6197990584619, 43.9614156259507, 1.77443754656175],
    [4.0, 4.39526585728007, 2.68322298980284, -1.65995860308927, 10.4298275054569, 21.6413523705576, 1.14000521284292],
];

#[test]
fn ground_state_constants() {
    for row in GROUND_STATES {
        let gs = solve_ground_state(row[0], 1e-10).unwrap();
        let got = [gs.first_zero, gs.center_value, gs.u_prime_1, gs.lambda_p, gs.energy_integral, gs.evaluate(0.5)];
        for (k, (g, w)) in got.iter().zip(&row[1..]).enumerate() {
            assert!(close(*g, *w, 1e-9), "p = {}, column {k}: {g} vs {w}", row[0]);
        }
    }
}

#[test]
fn cubic_ground_state_center_equals_its_first_zero() {
    // U(0) = r0^{2/(p-1)} and the exponent is 1 at p = 3
    let gs = solve_ground_state(3.0, 1e-10).unwrap();
    assert!(close(gs.center_value, gs.first_zero, 1e-10));
}

// x, y, G1(x, y)
type Pair = ((f64, f64), (f64, f64), f64);

const GREEN: [Pair; 7] = [
    ((1.0, 0.0), (1.0, 1.0), 0.06257576836429391804),
    ((1.0, 0.0), (1.0, 1e-3), 1.112047170609025571),
    ((2.0, 0.0), (1.0, 3.0), 0.019862255431230565773),
    ((0.5, 0.2), (1.5, -0.4), 0.033678383109778651228),
    ((1.0, 0.0), (30.0, 0.0), 0.0083368079687762701285),
    ((1.0, 0.0), (1.0, 100.0), 2.4992502342984633309e-7),
    ((3.0, 1.0), (3.01, 1.02), 2.3818483189512333938),
];

#[test]
fn green_function_values() {
    let cfg = GreenConfig::default();
    for (x, y, want) in GREEN {
        let a = HalfPlanePoint::new(x.0, x.1).unwrap();
        let b = HalfPlanePoint::new(y.0, y.1).unwrap();
        let got = g1(a, b, &cfg).unwrap();
        assert!(close(got, want, 1e-12), "{x:?} {y:?}: {got} vs {want}");
        let swapped = g1(b, a, &cfg).unwrap();
        assert!(close(swapped, got, 1e-14));
    }
}

#[test]
fn theta_integral_at_large_separation() {
    let want = 3.1406504702218487596e-6;
    assert!(close(j_quadrature(1e4, 16), want, 1e-12));
    assert!(close(j_elliptic(1e4), want, 1e-10));
}
