//! The killed-density kernel against simulation and against the limit laws.

use std::f64::consts::PI;

use passage::asymptotics::{
    doney_regime_density, meander_density_q, prop2_density, tau_tail_value, theorem1_value, DoneyRegime, Prop2Branch,
};
use passage::density_kernel::{bridge_survival, propagate_killed, propagate_killed_from};
use passage::estimators::{estimate_conditional_survival_bridge, estimate_lg};
use passage::increments::{make_centered_exponential, make_gaussian, make_uniform_centered};
use passage::stats::{run_replicates, Moments};
use passage::walk_sim::{estimate_ladder_stats, run_killed};
use passage::{BoundarySequence, GridConfig};

#[test]
fn survival_mass_matches_simulation() {
    let cases = [
        (make_gaussian(), BoundarySequence::constant(-1.0).unwrap()),
        (make_centered_exponential(), BoundarySequence::power(1.0, 0.25).unwrap()),
        (make_uniform_centered(), BoundarySequence::log(1.0).unwrap()),
    ];
    let k = 50;
    for (i, (model, b)) in cases.iter().enumerate() {
        let kernel = propagate_killed(model, b, k, &GridConfig::default()).unwrap().survival_mass;
        let mc = run_replicates(400_000, 20 + i as u64, Moments::default, |m, _, rng| {
            m.push(f64::from(run_killed(model, b, k, 0.0, rng).killed_at.is_none()));
        });
        let z = (mc.mean() - kernel) / mc.std_error();
        assert!(z.abs() < 4.0, "{} {b}: kernel {kernel} mc {} (z={z:.2})", model.name(), mc.mean());
    }
}

#[test]
fn gaussian_bridge_kernel_matches_direct_sampling() {
    let g = make_gaussian();
    let b = BoundarySequence::constant(-1.0).unwrap();
    let kernel = bridge_survival(&g, &b, 200, 100, &GridConfig::default()).unwrap();
    let mc = estimate_conditional_survival_bridge(&g, &b, 200, 100, 400_000, 12).unwrap();
    let z = (mc.value - kernel.probability) / mc.std_error;
    assert!(z.abs() < 4.0, "{} vs {} (z={z:.2})", kernel.probability, mc.value);

    let r = bridge_survival(&g, &b, 400, 100, &GridConfig::default()).unwrap();
    let ratio = r.probability / theorem1_value(400, 100, r.l_hat).unwrap();
    assert!((0.8..=1.2).contains(&ratio), "{ratio}");
}

#[test]
fn lower_boundary_gives_larger_density() {
    let g = make_gaussian();
    let cfg = GridConfig::default();
    let low = propagate_killed(&g, &BoundarySequence::constant(-1.0).unwrap(), 100, &cfg).unwrap();
    let high = propagate_killed(&g, &BoundarySequence::constant(-0.5).unwrap(), 100, &cfg).unwrap();
    assert_eq!(low.h, high.h);
    for x in high.nodes() {
        assert!(low.density_at(x) >= high.density_at(x) - 1e-15, "x={x}");
    }
    assert!(low.survival_mass > high.survival_mass);
}

#[test]
fn tau_tail_uses_the_excess() {
    let k = 10_000;
    let grid = propagate_killed(&make_gaussian(), &BoundarySequence::constant(0.0).unwrap(), k, &GridConfig::default()).unwrap();
    let ratio = grid.survival_mass / tau_tail_value(k, grid.expected_excess(0.0)).unwrap();
    assert!((0.97..=1.03).contains(&ratio), "{ratio}");
}

#[test]
fn mass_near_the_boundary_shrinks_toward_the_bound() {
    // The bound x²/√(2π)·L/k^{3/2} ignores the renewal shift of the local
    // density, a relative excess of order 1/x_k = k^{-0.2}. At these depths
    // the ratio is still above 1.1 but falls steadily.
    let g = make_gaussian();
    let b = BoundarySequence::constant(-1.0).unwrap();
    let mut ratios = Vec::new();
    for k in [1_000usize, 4_000, 10_000] {
        let grid = propagate_killed(&g, &b, k, &GridConfig::default()).unwrap();
        let x = (k as f64).powf(0.2);
        let lhs = grid.mass_below(-1.0 + x);
        let bound = x * x / (2.0 * PI).sqrt() * grid.expected_excess(-1.0) / (k as f64).powf(1.5);
        ratios.push(lhs / bound);
    }
    eprintln!("near-boundary mass / bound: {ratios:?}");
    assert!(ratios.windows(2).all(|w| w[1] < w[0]), "{ratios:?}");
    assert!(ratios[2] < 1.25);
}

#[test]
fn doney_regime_one_matches_the_kernel() {
    let g = make_gaussian();
    let n = 10_000;
    let ladder = estimate_ladder_stats(&g, 100_000, 40.0, 3).unwrap();
    let grid = propagate_killed_from(&g, &BoundarySequence::constant(0.0).unwrap(), n, 2.0, &GridConfig::default()).unwrap();
    let kernel = grid.integrate_density(3.0, 3.1);
    let approx = doney_regime_density(DoneyRegime::I, 2.0, 3.0, n, 0.1, &ladder).unwrap();
    assert!((kernel / approx - 1.0).abs() < 0.15, "{kernel:e} vs {approx:e}");
}

#[test]
fn killed_density_near_boundary_matches_small_t_form() {
    let g = make_gaussian();
    let k = 10_000;
    let b = BoundarySequence::constant(-1.0).unwrap();
    let ladder = estimate_ladder_stats(&g, 100_000, 40.0, 4).unwrap();
    let grid = propagate_killed(&g, &b, k, &GridConfig::default()).unwrap();
    // L from simulation, as a caller without the kernel would have it
    let l = estimate_lg(&g, &b, k, 100_000, 6).unwrap().primary().value;
    let t = (k as f64).powf(0.3);
    let approx = prop2_density(t, k, l, -1.0, &ladder, Prop2Branch::SmallT).unwrap();
    let kernel = grid.density_at(t);
    assert!((kernel / approx - 1.0).abs() < 0.2, "{kernel:e} vs {approx:e}");
}

#[test]
fn meander_mass_is_the_brownian_survival() {
    for u in [0.2, 1.0, 2.5] {
        let step = 1e-3;
        let mass: f64 = (1..12_000).map(|i| meander_density_q(u, i as f64 * step).unwrap()).sum::<f64>() * step;
        // P(B stays positive on [0, 1] | B_0 = u) = erf(u/√2)
        let want = libm::erf(u / 2f64.sqrt());
        assert!((mass - want).abs() < 1e-5, "u={u}: {mass} vs {want}");
    }
}

#[test]
fn exponential_walk_few_steps_on_the_kernel() {
    // P(τ_0 > 2) = (a_1² + a_2)/2 with a_j = P(Γ(j) < j)
    let a1 = 1.0 - (-1.0f64).exp();
    let a2 = 1.0 - 3.0 * (-2.0f64).exp();
    let want = (a1 * a1 + a2) / 2.0;
    let cfg = GridConfig::default().with_spacing(0.005);
    let got = propagate_killed(&make_centered_exponential(), &BoundarySequence::constant(0.0).unwrap(), 2, &cfg).unwrap().survival_mass;
    assert!((got - want).abs() < 1e-4, "{got} vs {want}");
}
