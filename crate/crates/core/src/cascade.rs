//! Cascading failures among `n` components with uniform capacities.
//!
//! Component capacities are iid uniform. After `i - 1` failures the load on
//! each survivor puts it at the curve value `(θ + i - 1 - g(i))/n`, and the
//! cascade size `A_n` is the largest `k` with `U_(i) ≤ curve(i)` for all
//! `i ≤ k`. The same event is the centered-exponential walk
//! `S_i = i - (E_1 + ... + E_i)` staying above `1 - θ + g(i)` up to `k`,
//! given `S_{n+1} = 1`.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;

use rand::Rng;
use serde::Serialize;

use crate::asymptotics::theorem1_value;
use crate::boundaries::BoundarySequence;
use crate::density_kernel::{bridge_survival_to, propagate_killed, BridgeSurvival, GridConfig};
use crate::error::{domain, Error, Result};
use crate::estimators::{estimate_conditional_survival_weighted, EstimateRecord, Method};
use crate::increments::make_centered_exponential;
use crate::special::ln_gamma;
use crate::stats::{run_replicates, Moments};

/// Largest `n` accepted by [`exact_crossing_probability`].
pub const EXACT_MAX_N: usize = 2000;

#[derive(Debug, Clone, PartialEq)]
pub struct CascadeConfig {
    pub n: usize,
    pub theta: f64,
    /// `g(i)`; `None` is the unperturbed cascade.
    pub perturbation: Option<BoundarySequence>,
}

impl CascadeConfig {
    /// `θ` may be any finite nonnegative value so that the clamped edge cases
    /// stay reachable; see [`CascadeConfig::in_scaling_regime`].
    pub fn new(n: usize, theta: f64) -> Result<Self> {
        if n == 0 {
            return Err(domain("a cascade needs at least one component"));
        }
        if !(theta >= 0.0 && theta.is_finite()) {
            return Err(domain(format!("theta must be finite and nonnegative, got {theta}")));
        }
        Ok(CascadeConfig { n, theta, perturbation: None })
    }

    pub fn with_perturbation(mut self, g: BoundarySequence) -> Self {
        self.perturbation = Some(g);
        self
    }

    /// `0 < θ ≤ n`, where the asymptotic law applies.
    pub fn in_scaling_regime(&self) -> bool {
        self.theta > 0.0 && self.theta <= self.n as f64
    }

    pub fn perturbation_at(&self, i: usize) -> f64 {
        self.perturbation.as_ref().map_or(0.0, |g| g.g(i))
    }

    /// `F(l_n(i)) = (θ + i - 1 - g(i))/n`, clamped to `[0, 1]`.
    pub fn curve(&self, i: usize) -> f64 {
        ((self.theta + i as f64 - 1.0 - self.perturbation_at(i)) / self.n as f64).clamp(0.0, 1.0)
    }

    /// Boundary `1 - θ + g(i)` of the equivalent exponential walk.
    pub fn walk_boundary(&self) -> Result<BoundarySequence> {
        match &self.perturbation {
            None => BoundarySequence::constant(1.0 - self.theta),
            Some(g) => Ok(g.shifted(1.0 - self.theta)),
        }
    }
}

/// `A_n` from `n` sorted uniforms.
pub fn simulate_cascade_size<R: Rng + ?Sized>(cfg: &CascadeConfig, rng: &mut R) -> usize {
    let mut u: Vec<f64> = (0..cfg.n).map(|_| rng.random::<f64>()).collect();
    u.sort_by(|a, b| a.total_cmp(b));
    u.iter().enumerate().take_while(|(i, &x)| x <= cfg.curve(i + 1)).count()
}

/// `A_n ∧ cap`, drawing order statistics one at a time from the top of the
/// previous one and stopping at the first one above the curve.
pub fn simulate_cascade_size_sequential<R: Rng + ?Sized>(cfg: &CascadeConfig, cap: usize, rng: &mut R) -> usize {
    let n = cfg.n;
    let mut u = 0.0f64;
    for i in 0..cap.min(n) {
        let v: f64 = rng.random();
        // U_(i+1) = 1 - (1 - U_(i)) V^{1/(n-i)}
        u = 1.0 - (1.0 - u) * v.powf(1.0 / (n - i) as f64);
        if u > cfg.curve(i + 1) {
            return i;
        }
    }
    cap.min(n)
}

/// Monte Carlo `P(A_n ≥ k)`.
pub fn estimate_cascade_probability(cfg: &CascadeConfig, k: usize, reps: u64, seed: u64) -> Result<EstimateRecord> {
    if k > cfg.n {
        return Err(domain(format!("k={k} exceeds n={}", cfg.n)));
    }
    if reps < 2 {
        return Err(domain("at least two runs are needed for an error bar"));
    }
    let m = run_replicates(reps, seed, Moments::default, |m, _, rng| {
        m.push(f64::from(simulate_cascade_size_sequential(cfg, k, rng) >= k));
    });
    Ok(EstimateRecord {
        value: m.mean(),
        std_error: m.std_error(),
        samples: m.count,
        method: Method::OrderStatistics,
        seed: Some(seed),
        model: "uniform_capacities".into(),
        boundary: cfg.walk_boundary()?.to_string(),
        n: Some(cfg.n),
        k,
        quadrature_loss: None,
    })
}

fn ln_binomial_pmf(m: usize, i: usize, ln_p: f64, ln_q: f64) -> f64 {
    let (mf, fi) = (m as f64, i as f64);
    ln_gamma(mf + 1.0) - ln_gamma(fi + 1.0) - ln_gamma(mf - fi + 1.0) + fi * ln_p + (mf - fi) * ln_q
}

/// `P(Bin(m, p) = i)` for `i < limit`, and `P(Bin(m, p) ≥ limit)`.
fn binomial_head_and_tail(m: usize, p: f64, limit: usize) -> (Vec<f64>, f64) {
    let head_len = limit.min(m + 1);
    if p <= 0.0 {
        let mut head = vec![0.0; head_len];
        if head_len > 0 {
            head[0] = 1.0;
        }
        return (head, if limit == 0 { 1.0 } else { 0.0 });
    }
    if p >= 1.0 {
        let mut head = vec![0.0; head_len];
        if m < limit {
            head[m] = 1.0;
            return (head, 0.0);
        }
        return (head, 1.0);
    }
    let (ln_p, ln_q) = (p.ln(), (-p).ln_1p());
    let head: Vec<f64> = (0..head_len).map(|i| ln_binomial_pmf(m, i, ln_p, ln_q).exp()).collect();
    let mode = ((m + 1) as f64 * p).floor() as usize;
    let mut tail = 0.0;
    for i in limit..=m {
        let t = ln_binomial_pmf(m, i, ln_p, ln_q).exp();
        tail += t;
        if i > mode && t <= 1e-18 * tail {
            break;
        }
    }
    (head, tail.min(1.0))
}

/// Exact `P(A_n ≥ k) = P(U_(i) ≤ a_i, i ≤ k)`.
///
/// With `a` replaced by its running minimum from the right, the event is
/// `N(a_j) ≥ j` for every `j ≤ k`, where `N(t)` counts uniforms below `t`.
/// The increments of `N` between consecutive levels are binomial given the
/// count so far, so the probability is a sum of nonnegative terms over count
/// paths, with counts of `k` or more merged into one absorbing state.
/// Cost is `O(k^3)`.
pub fn exact_crossing_probability(cfg: &CascadeConfig, k: usize) -> Result<f64> {
    let n = cfg.n;
    if n > EXACT_MAX_N {
        return Err(domain(format!("exact recursion is capped at n={EXACT_MAX_N}, got {n}")));
    }
    if k > n {
        return Err(domain(format!("k={k} exceeds n={n}")));
    }
    if k == 0 {
        return Ok(1.0);
    }
    let mut a: Vec<f64> = (1..=k).map(|i| cfg.curve(i)).collect();
    for i in (0..k - 1).rev() {
        a[i] = a[i].min(a[i + 1]);
    }
    // prob[c] = P(count = c, constraints so far hold) for c < k
    let mut prob = vec![0.0f64; k];
    prob[0] = 1.0;
    let mut done = 0.0f64;
    let mut prev = 0.0f64;
    for (j0, &level) in a.iter().enumerate() {
        let j = j0 + 1;
        if level >= 1.0 {
            // every remaining uniform is below 1
            return Ok((done + prob.iter().sum::<f64>()).min(1.0));
        }
        let p = if level > prev { (level - prev) / (1.0 - prev) } else { 0.0 };
        let mut next = vec![0.0f64; k];
        for c in 0..k {
            let w = prob[c];
            if w == 0.0 {
                continue;
            }
            let (head, tail) = binomial_head_and_tail(n - c, p, k - c);
            for (i, h) in head.iter().enumerate() {
                let c2 = c + i;
                if c2 >= j {
                    next[c2] += w * h;
                }
            }
            done += w * tail;
        }
        prob = next;
        prev = level.max(prev);
    }
    Ok(done.min(1.0))
}

/// `P(A_n ≥ k)` from the killed density of the exponential walk,
/// conditioned on `S_{n+1} = 1`.
pub fn kernel_crossing_probability(cfg: &CascadeConfig, k: usize, grid: &GridConfig) -> Result<BridgeSurvival> {
    if k == 0 || k > cfg.n {
        return Err(domain(format!("need 1 <= k <= n, got k={k}, n={}", cfg.n)));
    }
    let model = make_centered_exponential();
    let boundary = cfg.walk_boundary()?;
    let killed = propagate_killed(&model, &boundary, k, grid)?;
    bridge_survival_to(&model, &killed, cfg.n + 1, 1.0, grid)
}

#[derive(Debug, Clone, Serialize)]
pub struct CascadeComparison {
    pub order_statistics: EstimateRecord,
    /// Weighted estimator on the exponential walk given `S_n = 0`.
    pub weighted_bridge: EstimateRecord,
    /// Limit law with `L = θ`, or the kernel `L̂_g(k)` when perturbed.
    pub asymptotic: f64,
    pub prefactor: f64,
    /// `1/n`, for the gap between conditioning on `S_n = 0` and `S_{n+1} = 1`.
    pub drift_allowance: f64,
    pub tolerance: f64,
    pub agree: bool,
}

impl CascadeComparison {
    pub fn ratio_to_asymptotic(&self) -> f64 {
        self.order_statistics.value / self.asymptotic
    }
}

/// Order-statistics Monte Carlo against the weighted bridge estimator and
/// the limit law. Agreement means within 5 joint s.e. plus `1/n`.
pub fn cascade_vs_bridge(cfg: &CascadeConfig, k: usize, reps: u64, seed: u64, grid: &GridConfig) -> Result<CascadeComparison> {
    let n = cfg.n;
    if k == 0 || k >= n {
        return Err(domain(format!("need 1 <= k < n, got k={k}, n={n}")));
    }
    let model = make_centered_exponential();
    let boundary = cfg.walk_boundary()?;
    let order_statistics = estimate_cascade_probability(cfg, k, reps, seed)?;
    let weighted_bridge = estimate_conditional_survival_weighted(&model, &boundary, n, k, reps, seed ^ 0x5eed_b41d, grid)?;
    let prefactor = match cfg.perturbation {
        None => cfg.theta,
        Some(_) => {
            let killed = propagate_killed(&model, &boundary, k, grid)?;
            killed.expected_excess(boundary.g(k))
        }
    };
    let asymptotic = theorem1_value(n, k, prefactor)?;
    let drift_allowance = 1.0 / n as f64;
    let tolerance = 5.0 * order_statistics.std_error.hypot(weighted_bridge.std_error) + drift_allowance;
    let agree = (order_statistics.value - weighted_bridge.value).abs() <= tolerance;
    Ok(CascadeComparison { order_statistics, weighted_bridge, asymptotic, prefactor, drift_allowance, tolerance, agree })
}

/// Contents of a cascade config file.
#[derive(Debug, Clone, PartialEq)]
pub struct CascadeFile {
    pub config: CascadeConfig,
    pub k: Option<usize>,
    pub reps: Option<u64>,
    pub seed: Option<u64>,
}

pub const CASCADE_KEYS: [&str; 6] = ["n", "theta", "perturbation", "k", "reps", "seed"];

/// Parses `key = value` lines. `#` starts a comment; keys outside
/// [`CASCADE_KEYS`] and repeated keys are errors. `perturbation` uses the
/// boundary syntax and is read as `g(i)` directly.
pub fn parse_cascade_config(text: &str) -> Result<CascadeFile> {
    let mut map = BTreeMap::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("line {}: expected key = value", lineno + 1)))?;
        let key = key.trim();
        if !CASCADE_KEYS.contains(&key) {
            return Err(Error::Config(format!("line {}: unknown key `{key}`", lineno + 1)));
        }
        if map.insert(key.to_string(), value.trim().to_string()).is_some() {
            return Err(Error::Config(format!("line {}: repeated key `{key}`", lineno + 1)));
        }
    }
    fn field<T: std::str::FromStr>(map: &BTreeMap<String, String>, key: &str) -> Result<Option<T>> {
        map.get(key)
            .map(|v| v.parse::<T>().map_err(|_| Error::Config(format!("bad value `{v}` for `{key}`"))))
            .transpose()
    }
    let n: usize = field(&map, "n")?.ok_or_else(|| Error::Config("missing key `n`".into()))?;
    let theta: f64 = field(&map, "theta")?.unwrap_or(1.0);
    let mut config = CascadeConfig::new(n, theta)?;
    if let Some(p) = map.get("perturbation") {
        config = config.with_perturbation(p.parse()?);
    }
    Ok(CascadeFile { config, k: field(&map, "k")?, reps: field(&map, "reps")?, seed: field(&map, "seed")? })
}

pub fn read_cascade_config(path: impl AsRef<Path>) -> Result<CascadeFile> {
    parse_cascade_config(&std::fs::read_to_string(path)?)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CascadeRow {
    pub n: usize,
    pub k: usize,
    pub theta: f64,
    pub method: String,
    pub value: f64,
    pub se: f64,
}

pub const CASCADE_HEADER: [&str; 6] = ["n", "k", "theta", "method", "value", "se"];

pub fn write_cascade_csv<W: Write>(w: W, rows: &[CascadeRow]) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(CASCADE_HEADER)?;
    for r in rows {
        out.write_record([
            r.n.to_string(),
            r.k.to_string(),
            r.theta.to_string(),
            r.method.clone(),
            format!("{:.10e}", r.value),
            format!("{:.6e}", r.se),
        ])?;
    }
    out.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::replicate_rng;

    fn plain(n: usize, theta: f64) -> CascadeConfig {
        CascadeConfig::new(n, theta).unwrap()
    }

    #[test]
    fn large_theta_takes_everything() {
        let cfg = plain(20, 21.0);
        let mut rng = replicate_rng(1, 0);
        for _ in 0..100 {
            assert_eq!(simulate_cascade_size(&cfg, &mut rng), 20);
        }
        assert_eq!(exact_crossing_probability(&cfg, 20).unwrap(), 1.0);
    }

    #[test]
    fn zero_theta_never_starts() {
        let cfg = plain(20, 0.0);
        let mut rng = replicate_rng(1, 0);
        for _ in 0..100 {
            assert_eq!(simulate_cascade_size(&cfg, &mut rng), 0);
        }
        assert_eq!(exact_crossing_probability(&cfg, 1).unwrap(), 0.0);
    }

    #[test]
    fn exact_single_step_is_first_order_statistic() {
        // P(U_(1) ≤ a) = 1 - (1-a)^n
        let cfg = plain(7, 0.5);
        let a: f64 = 0.5 / 7.0;
        let want = 1.0 - (1.0 - a).powi(7);
        assert!((exact_crossing_probability(&cfg, 1).unwrap() - want).abs() < 1e-14);
    }

    #[test]
    fn exact_two_points_matches_closed_form() {
        // n = 2: P(U_(1) ≤ a, U_(2) ≤ b) = b^2 - (b-a)^2 for a ≤ b
        let cfg = plain(2, 0.6);
        let (a, b) = (0.3f64, 0.8f64);
        let want = b * b - (b - a) * (b - a);
        assert!((exact_crossing_probability(&cfg, 2).unwrap() - want).abs() < 1e-14);
    }

    #[test]
    fn sequential_matches_sorted_on_average() {
        let cfg = plain(30, 1.0);
        let reps = 40_000u64;
        let sorted = run_replicates(reps, 5, Moments::default, |m, _, rng| m.push(simulate_cascade_size(&cfg, rng) as f64));
        let seq = run_replicates(reps, 6, Moments::default, |m, _, rng| {
            m.push(simulate_cascade_size_sequential(&cfg, 30, rng) as f64)
        });
        let se = sorted.std_error().hypot(seq.std_error());
        assert!((sorted.mean() - seq.mean()).abs() < 5.0 * se);
    }

    #[test]
    fn kernel_agrees_with_exact() {
        let grid = GridConfig::default().with_spacing(0.005);
        for (n, k, theta) in [(50, 10, 1.0), (40, 20, 0.5), (60, 30, 2.0)] {
            let cfg = plain(n, theta);
            let exact = exact_crossing_probability(&cfg, k).unwrap();
            let kern = kernel_crossing_probability(&cfg, k, &grid).unwrap().probability;
            // second-order in the spacing
            assert!((exact - kern).abs() < 5e-5 * exact, "n={n} k={k}: {exact} vs {kern}");
        }
    }

    #[test]
    fn config_file_round_trip() {
        let f = parse_cascade_config("# cascade\nn = 50\ntheta = 1.5\nk = 10 # threshold\nperturbation = power:-1:0.25\n").unwrap();
        assert_eq!(f.config.n, 50);
        assert_eq!(f.k, Some(10));
        assert!((f.config.perturbation_at(16) - 2.0).abs() < 1e-12);
        assert!(parse_cascade_config("n = 5\ncolour = red\n").is_err());
        assert!(parse_cascade_config("theta = 1\n").is_err());
        assert!(parse_cascade_config("n = 5\nn = 6\n").is_err());
    }

    #[test]
    fn results_csv_header() {
        let mut buf = Vec::new();
        let rows = [CascadeRow { n: 5, k: 2, theta: 1.0, method: "exact".into(), value: 0.5, se: 0.0 }];
        write_cascade_csv(&mut buf, &rows).unwrap();
        assert!(String::from_utf8(buf).unwrap().starts_with("n,k,theta,method,value,se\n5,2,1,exact,"));
    }
}
