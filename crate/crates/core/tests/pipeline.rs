use vrlab::acceptance::canonical_spec;
use vrlab::asymptotics::{asymptotic_seed, measure_ring, solve_ring_parameters};
use vrlab::evolution::{Drift, EvolveOptions, Evolver};
use vrlab::fields::{circulation, AxisymGrid};
use vrlab::ground_state::solve_ground_state;
use vrlab::steady::{patch_seed, solve_steady, uniqueness_probe, SteadyOptions, SteadyRing};
use vrlab::variational::{phi_from_potential, recover_profile_fields};

fn ring(eps: f64, n: usize) -> SteadyRing {
    let gs = solve_ground_state(2.0, 1e-10).unwrap();
    let spec = canonical_spec(eps).unwrap();
    let params = solve_ring_parameters(&spec, &gs).unwrap();
    let grid = AxisymGrid::around_ring(1.0, n, n).unwrap();
    solve_steady(spec, &asymptotic_seed(&gs, &params, grid).unwrap(), &SteadyOptions::default()).unwrap()
}

#[test]
fn patch_and_asymptotic_seeds_reach_the_same_ring() {
    let a = ring(0.05, 256);
    let gs = solve_ground_state(2.0, 1e-10).unwrap();
    let params = solve_ring_parameters(&a.spec, &gs).unwrap();
    let seed = patch_seed(*a.grid(), params.r_star, 0.0, params.s_star, 1.0).unwrap();
    let b = solve_steady(a.spec, &seed, &SteadyOptions::default()).unwrap();
    assert!(b.defect <= 1e-10);
    let probe = uniqueness_probe(&a, &b, 1e-2).unwrap();
    assert!(probe.same, "distance {}", probe.distance);
}

#[test]
fn steady_vorticity_is_a_monotone_function_of_the_potential() {
    let r = ring(0.05, 256);
    let phi = phi_from_potential(&r.psi, r.spec.speed());
    let fit = recover_profile_fields(&r.zeta, &phi);
    assert!(fit.defect_rel <= 1e-12, "{}", fit.defect_rel);
    // the level below which vorticity vanishes is μ; the free boundary lies between grid cells
    assert!(fit.mu_tilde <= r.mu + 1e-12 && fit.phi_min_support >= r.mu);
    assert!(fit.mu_tilde >= 0.0);
}

#[test]
fn held_radius_search_converges_on_a_thin_core() {
    let gs = solve_ground_state(2.0, 1e-10).unwrap();
    let spec = canonical_spec(2e-3).unwrap();
    let params = solve_ring_parameters(&spec, &gs).unwrap();
    let d = 8.0 * params.s_star;
    let grid = AxisymGrid::new(params.r_star - d, params.r_star + d, -d, d, 512, 512).unwrap();
    let r = solve_steady(spec, &asymptotic_seed(&gs, &params, grid).unwrap(), &SteadyOptions::default()).unwrap();
    assert!(r.defect <= 1e-10, "{}", r.defect);
    assert!((circulation(&r.zeta) - 1.0).abs() <= 1e-10);
    let m = measure_ring(&r).unwrap();
    assert!((m.centroid.0 - params.r_star).abs() <= 0.1 * params.s_star, "{:?}", m.centroid);
    assert!((m.core_radius / params.s_star - 1.0).abs() <= 0.05);
}

#[test]
fn steady_ring_stays_put_in_its_own_frame() {
    let r = ring(0.05, 256);
    let opts = EvolveOptions { far_field: r.far_field, frame_speed: r.spec.speed(), ..Default::default() };
    let mut ev = Evolver::new(*r.grid(), opts).with_reference(r.zeta.clone());
    let mut state = ev.start(&r.zeta).unwrap();
    let dt = ev.max_dt(&state) / 1.1;
    for _ in 0..50 {
        state = ev.step(&state, dt).unwrap();
    }
    assert!(state.zeta.values.iter().all(|v| *v >= 0.0));
    assert!(state.zeta.sup_norm() <= r.zeta.sup_norm() * (1.0 + 1e-12));
    assert!(Drift::of(&state.monitors).max() <= 2e-3);
    let last = state.monitors.last().unwrap();
    assert!(last.ring_distance.unwrap() <= 1e-2, "{:?}", last.ring_distance);
    let (c0, c1) = (r.zeta.centroid().unwrap(), state.zeta.centroid().unwrap());
    assert!((c1.1 - c0.1).abs() <= 0.5 * r.grid().hz(), "{c0:?} -> {c1:?}");
}
