//! Increment laws, n-fold densities and plain walk simulation checked
//! against closed forms written out here.

use passage::density_kernel::unkilled_density;
use passage::increments::{clt_sup_distance, make_centered_exponential, make_gaussian, make_uniform_centered};
use passage::stats::{ks_critical_coefficient, ks_one_sample, ks_two_sample, ks_two_sample_critical, run_replicates, Moments};
use passage::walk_sim::{estimate_ladder_stats, run_killed, sample_gaussian_bridge};
use passage::{BoundarySequence, GridConfig, IncrementModel};

fn models() -> [IncrementModel; 3] {
    [make_gaussian(), make_centered_exponential(), make_uniform_centered()]
}

fn factorial(m: usize) -> f64 {
    (1..=m).map(|i| i as f64).product()
}

fn binom(m: usize, j: usize) -> f64 {
    factorial(m) / (factorial(j) * factorial(m - j))
}

/// Density of a sum of `m` uniforms on `[-√3, √3]` (Irwin-Hall, rescaled).
fn irwin_hall(m: usize, x: f64) -> f64 {
    let w = 2.0 * 3f64.sqrt();
    let u = (x + m as f64 * 3f64.sqrt()) / w;
    if u <= 0.0 || u >= m as f64 {
        return 0.0;
    }
    let s: f64 = (0..=u.floor() as usize)
        .map(|j| if j % 2 == 0 { 1.0 } else { -1.0 } * binom(m, j) * (u - j as f64).powi(m as i32 - 1))
        .sum();
    s / factorial(m - 1) / w
}

/// Density of `m - Γ(m, 1)`, the sum of `m` centered exponential steps `1 - E`.
fn centered_gamma(m: usize, x: f64) -> f64 {
    let y = m as f64 - x;
    if y <= 0.0 {
        return 0.0;
    }
    y.powi(m as i32 - 1) * (-y).exp() / factorial(m - 1)
}

#[test]
fn uniform_fourfold_density_is_irwin_hall() {
    let grid = unkilled_density(&make_uniform_centered(), 4, &GridConfig::default()).unwrap();
    let worst = (-60..=60).map(|i| i as f64 * 0.1).map(|x| (grid.density_at(x) - irwin_hall(4, x)).abs()).fold(0.0, f64::max);
    assert!(worst < 2e-4, "sup error {worst:.3e}");
}

#[test]
fn exponential_fivefold_density_is_gamma() {
    let grid = unkilled_density(&make_centered_exponential(), 5, &GridConfig::default()).unwrap();
    let worst = (-150..=49).map(|i| i as f64 * 0.1).map(|x| (grid.density_at(x) - centered_gamma(5, x)).abs()).fold(0.0, f64::max);
    assert!(worst < 2e-4, "sup error {worst:.3e}");
}

#[test]
fn convolution_of_tabulated_densities_is_consistent() {
    let cfg = GridConfig::default();
    let m = make_uniform_centered();
    let f3 = unkilled_density(&m, 3, &cfg).unwrap();
    let f5 = unkilled_density(&m, 5, &cfg).unwrap();
    let f8 = unkilled_density(&m, 8, &cfg).unwrap();
    let step = 0.005;
    let lim = 3.0 * 3f64.sqrt();
    for y in [-6.0, -2.5, 0.0, 1.3, 4.0] {
        // f_3 vanishes beyond ±3√3, so a finite range suffices
        let conv: f64 = (0..=(2.0 * lim / step) as usize).map(|i| -lim + i as f64 * step).map(|x| f3.density_at(x) * f5.density_at(y - x)).sum::<f64>() * step;
        assert!((conv - f8.density_at(y)).abs() < 5e-4, "y={y}: {conv} vs {}", f8.density_at(y));
    }
}

#[test]
fn local_clt_distance_shrinks() {
    let cfg = GridConfig::default();
    for model in models() {
        let d: Vec<f64> = [8, 32, 128].iter().map(|&m| clt_sup_distance(&model, m, &cfg).unwrap()).collect();
        assert!(d[0] > d[1] && d[1] > d[2], "{}: {d:?}", model.name());
        assert!(clt_sup_distance(&model, 64, &cfg).unwrap() < d[0]);
    }
}

#[test]
fn sampled_sums_follow_the_tabulated_density() {
    let cfg = GridConfig::default();
    for (seed, model) in models().into_iter().enumerate() {
        let grid = unkilled_density(&model, 4, &cfg).unwrap();
        // cumulative table on a fine mesh, interpolated linearly
        let (lo, step) = (-30.0, 0.01);
        let mut table = vec![0.0];
        for i in 0..6000 {
            let a = lo + i as f64 * step;
            table.push(table[i] + grid.integrate_density(a, a + step));
        }
        let cdf = |x: f64| {
            let t = ((x - lo) / step).clamp(0.0, 5999.999);
            let i = t.floor() as usize;
            table[i] + (t - i as f64) * (table[i + 1] - table[i])
        };
        let reps = 100_000u64;
        let mut xs = run_replicates(reps, 40 + seed as u64, Vec::new, |v: &mut Vec<f64>, _, rng| {
            v.push((0..4).map(|_| model.sample(rng)).sum());
        });
        let d = ks_one_sample(&mut xs, cdf);
        let crit = ks_critical_coefficient(1e-3) / (reps as f64).sqrt();
        assert!(d < crit, "{}: KS {d:.4} vs {crit:.4}", model.name());
    }
}

/// `P(τ_0 > m)` for `m = 0..=len` from `P(S_j > 0)` by the Sparre Andersen
/// recursion `m p_m = Σ_{j ≤ m} P(S_j > 0) p_{m-j}`.
fn sparre_andersen(positive: &[f64]) -> Vec<f64> {
    let mut p = vec![1.0];
    for m in 1..=positive.len() {
        let s: f64 = (1..=m).map(|j| positive[j - 1] * p[m - j]).sum();
        p.push(s / m as f64);
    }
    p
}

/// `P(Γ(j, 1) < j)`.
fn gamma_below_mean(j: usize) -> f64 {
    let x = j as f64;
    let head: f64 = (0..j).map(|i| x.powi(i as i32) / factorial(i)).sum();
    1.0 - (-x).exp() * head
}

#[test]
fn survival_of_a_few_steps_follows_sparre_andersen() {
    let zero = BoundarySequence::constant(0.0).unwrap();
    let exp_positive: Vec<f64> = (1..=4).map(gamma_below_mean).collect();
    let cases = [(make_gaussian(), vec![0.5; 4]), (make_centered_exponential(), exp_positive), (make_uniform_centered(), vec![0.5; 4])];
    for (model, positive) in cases {
        let p = sparre_andersen(&positive);
        let reps = 1_000_000u64;
        let (two, four) = run_replicates(
            reps,
            7,
            || (Moments::default(), Moments::default()),
            |(two, four), _, rng| {
                let r = run_killed(&model, &zero, 4, 0.0, rng);
                two.push(f64::from(r.killed_at.is_none_or(|t| t > 2)));
                four.push(f64::from(r.killed_at.is_none()));
            },
        );
        for (m, est) in [(2, &two), (4, &four)] {
            let z = (est.mean() - p[m]).abs() / est.std_error();
            assert!(z < 5.0, "{} P(τ>{m}) = {} vs {} (z={z:.2})", model.name(), est.mean(), p[m]);
        }
    }
    // the symmetric value 3/8 does not carry over to the skewed law
    let p = sparre_andersen(&(1..=2).map(gamma_below_mean).collect::<Vec<_>>());
    assert!((p[2] - 0.49679).abs() < 1e-5, "{}", p[2]);
}

#[test]
fn bridge_midpoint_variance_and_reversal() {
    let n = 100;
    let reps = 100_000u64;
    let mid = run_replicates(reps, 3, Moments::default, |m, _, rng| m.push(sample_gaussian_bridge(n, rng).unwrap().s(n / 2)));
    // Var S_i = i(n-i)/n for the bridge
    let se = 25.0 * (2.0 / reps as f64).sqrt();
    assert!((mid.variance() - 25.0).abs() < 5.0 * se, "{}", mid.variance());

    // S_30 against the reversed walk -S_70, on separate streams
    let mut fwd = run_replicates(20_000, 4, Vec::new, |v: &mut Vec<f64>, _, rng| v.push(sample_gaussian_bridge(n, rng).unwrap().s(30)));
    let mut rev = run_replicates(20_000, 5, Vec::new, |v: &mut Vec<f64>, _, rng| v.push(-sample_gaussian_bridge(n, rng).unwrap().s(70)));
    let d = ks_two_sample(&mut fwd, &mut rev);
    assert!(d < ks_two_sample_critical(1e-3, 20_000, 20_000), "{d}");
}

#[test]
fn exponential_descending_renewal_is_poisson() {
    // undershoots below 0 are Exp(1), so the descending ladder points form a
    // unit-rate Poisson process and V(t) = 1 + t
    let st = estimate_ladder_stats(&make_centered_exponential(), 100_000, 20.0, 9).unwrap();
    assert!((st.mean_descending - 1.0).abs() < 5.0 * st.se_descending);
    for t in [0.5, 2.0, 5.0, 12.0] {
        let v = st.v(t);
        assert!((v / (1.0 + t) - 1.0).abs() < 0.02, "V({t}) = {v}");
    }
    // symmetric and continuous: both ladder heights have mean 1/√2
    let st = estimate_ladder_stats(&make_gaussian(), 100_000, 20.0, 10).unwrap();
    let r = std::f64::consts::FRAC_1_SQRT_2;
    assert!((st.mean_descending - r).abs() < 5.0 * st.se_descending);
    assert!((st.mean_ascending_dual - r).abs() < 5.0 * st.se_ascending_dual);
    assert!(st.u_table.windows(2).all(|w| w[0] <= w[1]));
}
