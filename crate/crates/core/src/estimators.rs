//! Monte Carlo and kernel estimators, and convergence sweeps against the
//! asymptotic laws.

use std::fmt;
use std::io::Write;
use std::str::FromStr;

use serde::Serialize;

use crate::asymptotics::{regime_value, RegimeLabel};
use crate::boundaries::BoundarySequence;
use crate::density_kernel::{bridge_survival_from_grid, propagate_killed_snapshots, GridConfig};
use crate::error::{domain, Error, Result};
use crate::increments::{IncrementModel, ModelKind, NfoldDensity};
use crate::stats::{run_replicates, Moments, PairMoments};
use crate::walk_sim::{bridge_step, gaussian_bridge_survives, run_killed};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    BridgeDirect,
    Weighted,
    Window,
    Kernel,
    /// Plain simulation of the killed walk.
    Killed,
    /// Uniform order statistics of the cascade model.
    OrderStatistics,
}

impl Method {
    pub fn as_str(&self) -> &'static str {
        match self {
            Method::BridgeDirect => "bridge_direct",
            Method::Weighted => "weighted",
            Method::Window => "window",
            Method::Kernel => "kernel",
            Method::Killed => "killed",
            Method::OrderStatistics => "order_statistics",
        }
    }

    pub fn is_monte_carlo(&self) -> bool {
        !matches!(self, Method::Kernel)
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "bridge_direct" | "bridge" => Ok(Method::BridgeDirect),
            "weighted" => Ok(Method::Weighted),
            "window" => Ok(Method::Window),
            "kernel" => Ok(Method::Kernel),
            "killed" => Ok(Method::Killed),
            "order_statistics" => Ok(Method::OrderStatistics),
            other => Err(Error::Config(format!("unknown method `{other}`"))),
        }
    }
}

/// A point estimate with its uncertainty and provenance.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EstimateRecord {
    pub value: f64,
    /// Zero for the kernel, which reports `quadrature_loss` instead.
    pub std_error: f64,
    pub samples: u64,
    pub method: Method,
    pub seed: Option<u64>,
    pub model: String,
    pub boundary: String,
    pub n: Option<usize>,
    pub k: usize,
    pub quadrature_loss: Option<f64>,
}

impl EstimateRecord {
    fn mc(m: &Moments, method: Method, seed: u64, model: &IncrementModel, boundary: &BoundarySequence, n: Option<usize>, k: usize) -> Self {
        EstimateRecord {
            value: m.mean(),
            std_error: m.std_error(),
            samples: m.count,
            method,
            seed: Some(seed),
            model: model.name().to_string(),
            boundary: boundary.to_string(),
            n,
            k,
            quadrature_loss: None,
        }
    }

    /// `|self - other|` in units of the joint standard error.
    pub fn z_distance(&self, other: &EstimateRecord) -> f64 {
        let se = self.std_error.hypot(other.std_error);
        let d = (self.value - other.value).abs();
        if se == 0.0 {
            if d == 0.0 {
                0.0
            } else {
                f64::INFINITY
            }
        } else {
            d / se
        }
    }
}

fn check_nk(n: usize, k: usize) -> Result<()> {
    if k == 0 || k >= n {
        return Err(domain(format!("need 1 <= k < n, got n={n}, k={k}")));
    }
    Ok(())
}

fn check_reps(reps: u64) -> Result<()> {
    if reps < 2 {
        return Err(domain("at least two replicates are needed for an error bar"));
    }
    Ok(())
}

/// Fraction of exact Gaussian bridges staying above `g` up to `k`.
pub fn estimate_conditional_survival_bridge(
    model: &IncrementModel,
    boundary: &BoundarySequence,
    n: usize,
    k: usize,
    reps: u64,
    seed: u64,
) -> Result<EstimateRecord> {
    if model.kind() != ModelKind::Gaussian {
        return Err(Error::ModelMismatch(format!("direct bridge sampling needs the Gaussian model, got {model}")));
    }
    check_nk(n, k)?;
    check_reps(reps)?;
    let m = run_replicates(reps, seed, Moments::default, |m, _, rng| {
        m.push(f64::from(gaussian_bridge_survives(boundary, n, k, rng)));
    });
    Ok(EstimateRecord::mc(&m, Method::BridgeDirect, seed, model, boundary, Some(n), k))
}

/// `E[1{τ_g > k} f_{n-k}(-S_k)] / f_n(0)` over free killed walks.
pub fn estimate_conditional_survival_weighted(
    model: &IncrementModel,
    boundary: &BoundarySequence,
    n: usize,
    k: usize,
    reps: u64,
    seed: u64,
    cfg: &GridConfig,
) -> Result<EstimateRecord> {
    check_nk(n, k)?;
    check_reps(reps)?;
    let fn0 = NfoldDensity::new(model, n, cfg)?.eval(0.0);
    if !(fn0 >= 1e-15) {
        return Err(domain(format!("f_{n}(0) = {fn0:e} is below 1e-15")));
    }
    let tail = NfoldDensity::new(model, n - k, cfg)?;
    let m = run_replicates(reps, seed, Moments::default, |m, _, rng| {
        let run = run_killed(model, boundary, k, 0.0, rng);
        m.push(if run.killed_at.is_none() { tail.eval(-run.last) / fn0 } else { 0.0 });
    });
    Ok(EstimateRecord::mc(&m, Method::Weighted, seed, model, boundary, Some(n), k))
}

/// `P(τ_g > k; |S_n| ≤ δ) / P(|S_n| ≤ δ)`. Biased by the window width; kept
/// as a cross-check.
pub fn estimate_conditional_survival_window(
    model: &IncrementModel,
    boundary: &BoundarySequence,
    n: usize,
    k: usize,
    delta: f64,
    reps: u64,
    seed: u64,
) -> Result<EstimateRecord> {
    check_nk(n, k)?;
    check_reps(reps)?;
    if !(delta > 0.0) {
        return Err(domain("window half-width must be positive"));
    }
    let pm = run_replicates(reps, seed, PairMoments::default, |pm, _, rng| {
        let run = run_killed(model, boundary, k, 0.0, rng);
        let mut s = run.last;
        let alive = run.killed_at.is_none();
        if run.killed_at.is_some() {
            // the remaining steps still decide the conditioning event
            let done = run.killed_at.unwrap_or(k);
            for _ in done..k {
                s += model.sample(rng);
            }
        }
        for _ in k..n {
            s += model.sample(rng);
        }
        let hit = f64::from(s.abs() <= delta);
        pm.push(hit * f64::from(alive), hit);
    });
    if pm.y.sum < 2.0 {
        return Err(Error::Degenerate(format!("only {} walks ended in the window", pm.y.sum)));
    }
    let (value, std_error) = pm.ratio();
    Ok(EstimateRecord {
        value,
        std_error,
        samples: pm.x.count,
        method: Method::Window,
        seed: Some(seed),
        model: model.name().to_string(),
        boundary: boundary.to_string(),
        n: Some(n),
        k,
        quadrature_loss: None,
    })
}

/// Both displays of `L_g(k)` from one set of killed walks.
#[derive(Debug, Clone)]
pub struct LgEstimate {
    /// `E(-S_{τ_g}; τ_g ≤ k)`.
    pub undershoot: EstimateRecord,
    /// `E(S_k - g_k; τ_g > k)`.
    pub excess: EstimateRecord,
    /// Standard error of `undershoot - excess` from the paired samples.
    pub difference_se: f64,
}

impl LgEstimate {
    /// The lower-variance undershoot display.
    pub fn primary(&self) -> &EstimateRecord {
        &self.undershoot
    }

    pub fn difference(&self) -> f64 {
        self.undershoot.value - self.excess.value
    }
}

pub fn estimate_lg(model: &IncrementModel, boundary: &BoundarySequence, k: usize, reps: u64, seed: u64) -> Result<LgEstimate> {
    if k == 0 {
        return Err(domain("k must be positive"));
    }
    check_reps(reps)?;
    let gk = boundary.g(k);
    let (pair, diff) = run_replicates(
        reps,
        seed,
        || (PairMoments::default(), Moments::default()),
        |(pair, diff), _, rng| {
            let run = run_killed(model, boundary, k, 0.0, rng);
            let (u, e) = match run.killed_at {
                Some(_) => (-run.last, 0.0),
                None => (0.0, run.last - gk),
            };
            pair.push(u, e);
            diff.push(u - e);
        },
    );
    Ok(LgEstimate {
        undershoot: EstimateRecord::mc(&pair.x, Method::Killed, seed, model, boundary, None, k),
        excess: EstimateRecord::mc(&pair.y, Method::Killed, seed, model, boundary, None, k),
        difference_se: diff.std_error(),
    })
}

/// Fewest survivors for which a conditional tail is reported.
pub const MIN_SURVIVORS: u64 = 1000;

/// `P(S_n > g_n + v sqrt(n) | τ_g > n)` for each `v`, from one set of walks.
pub fn estimate_rayleigh_tails(
    model: &IncrementModel,
    boundary: &BoundarySequence,
    n: usize,
    vs: &[f64],
    reps: u64,
    seed: u64,
) -> Result<Vec<EstimateRecord>> {
    if n == 0 {
        return Err(domain("n must be positive"));
    }
    if let Some(v) = vs.iter().find(|v| !(**v >= 0.0)) {
        return Err(domain(format!("v must be nonnegative, got {v}")));
    }
    let gn = boundary.g(n);
    let scale = (n as f64).sqrt();
    let survivors: Vec<f64> = run_replicates(reps, seed, Vec::new, |acc, _, rng| {
        let run = run_killed(model, boundary, n, 0.0, rng);
        if run.killed_at.is_none() {
            acc.push((run.last - gn) / scale);
        }
    });
    let count = survivors.len() as u64;
    if count < MIN_SURVIVORS {
        return Err(Error::Degenerate(format!("{count} of {reps} walks survived to {n}; need {MIN_SURVIVORS}")));
    }
    Ok(vs
        .iter()
        .map(|&v| {
            let mut m = Moments::default();
            survivors.iter().for_each(|&z| m.push(f64::from(z > v)));
            EstimateRecord::mc(&m, Method::Killed, seed, model, boundary, Some(n), n)
        })
        .collect())
}

pub fn estimate_rayleigh_tail(
    model: &IncrementModel,
    boundary: &BoundarySequence,
    n: usize,
    v: f64,
    reps: u64,
    seed: u64,
) -> Result<EstimateRecord> {
    Ok(estimate_rayleigh_tails(model, boundary, n, &[v], reps, seed)?.remove(0))
}

/// How the threshold `k` is derived from `n`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum KRule {
    /// `k = ⌊f n⌋`.
    Fraction(f64),
    /// `k = n - ⌈n^p⌉`.
    NMinusPower(f64),
}

impl KRule {
    pub fn k_for(&self, n: usize) -> Result<usize> {
        let nf = n as f64;
        let k = match *self {
            KRule::Fraction(f) => (f * nf).floor() as i64,
            KRule::NMinusPower(p) => n as i64 - nf.powf(p).ceil() as i64,
        };
        if k < 1 || k >= n as i64 {
            return Err(domain(format!("rule {self} gives k={k} for n={n}")));
        }
        Ok(k as usize)
    }
}

impl fmt::Display for KRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            KRule::Fraction(x) => write!(f, "frac:{x}"),
            KRule::NMinusPower(p) => write!(f, "pow:{p}"),
        }
    }
}

impl FromStr for KRule {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::Config(format!("bad k rule `{s}` (expected frac:F or pow:P)"));
        let (kind, val) = s.trim().split_once(':').ok_or_else(bad)?;
        let v: f64 = val.parse().map_err(|_| bad())?;
        match kind {
            "frac" if v > 0.0 && v < 1.0 => Ok(KRule::Fraction(v)),
            "pow" | "nminus" if v > 0.0 && v < 1.0 => Ok(KRule::NMinusPower(v)),
            _ => Err(bad()),
        }
    }
}

#[derive(Debug, Clone)]
pub struct SweepConfig {
    pub model: IncrementModel,
    pub boundary: BoundarySequence,
    pub ns: Vec<usize>,
    pub k_rule: KRule,
    pub regime: RegimeLabel,
    /// `Kernel`, `BridgeDirect` or `Weighted`.
    pub method: Method,
    pub reps: u64,
    pub seed: u64,
    pub grid: GridConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub model: String,
    pub boundary: String,
    pub n: usize,
    pub k: usize,
    pub regime: String,
    pub method: String,
    pub estimate: f64,
    pub se: f64,
    pub asymptotic: f64,
    pub ratio: f64,
    pub seed: u64,
    /// Kernel value of `E(S_k - g_k; τ_g > k)` used in the asymptotic law.
    #[serde(skip)]
    pub l_hat: f64,
}

pub const SWEEP_HEADER: [&str; 11] = ["model", "boundary", "n", "k", "regime", "method", "estimate", "se", "asymptotic", "ratio", "seed"];

#[derive(Debug, Clone, Default)]
pub struct SweepTable {
    pub rows: Vec<SweepRow>,
    /// `(n, message)` for rows that could not be produced.
    pub failures: Vec<(usize, String)>,
}

impl SweepTable {
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(SWEEP_HEADER)?;
        for r in &self.rows {
            out.write_record([
                r.model.clone(),
                r.boundary.clone(),
                r.n.to_string(),
                r.k.to_string(),
                r.regime.clone(),
                r.method.clone(),
                format!("{:.10e}", r.estimate),
                format!("{:.6e}", r.se),
                format!("{:.10e}", r.asymptotic),
                format!("{:.8}", r.ratio),
                r.seed.to_string(),
            ])?;
        }
        out.flush()?;
        Ok(())
    }

    /// `|ratio - 1|` along the rows.
    pub fn ratio_gaps(&self) -> Vec<f64> {
        self.rows.iter().map(|r| (r.ratio - 1.0).abs()).collect()
    }
}

/// Estimates and asymptotic values along an `n`-ladder.
///
/// `L_g(k)` is taken from the kernel, as `E(S_k - g_k; τ_g > k)` on the
/// grid, for every method. One propagation serves all rows; a failing row is
/// recorded and the sweep moves on.
pub fn convergence_sweep(cfg: &SweepConfig) -> SweepTable {
    let mut table = SweepTable::default();
    let mut jobs = Vec::new();
    for &n in &cfg.ns {
        match cfg.k_rule.k_for(n) {
            Ok(k) => jobs.push((n, k)),
            Err(e) => table.failures.push((n, e.to_string())),
        }
    }
    if jobs.is_empty() {
        return table;
    }
    if !matches!(cfg.method, Method::Kernel | Method::BridgeDirect | Method::Weighted) {
        for (n, _) in jobs {
            table.failures.push((n, format!("method {} is not available in sweeps", cfg.method)));
        }
        return table;
    }
    let ks: Vec<usize> = jobs.iter().map(|&(_, k)| k).collect();
    let grids = match propagate_killed_snapshots(&cfg.model, &cfg.boundary, &ks, &cfg.grid) {
        Ok(g) => g,
        Err(e) => {
            for (n, _) in jobs {
                table.failures.push((n, e.to_string()));
            }
            return table;
        }
    };
    for (idx, &(n, k)) in jobs.iter().enumerate() {
        let grid = grids.iter().find(|g| g.m == k).expect("snapshot for every k");
        let row = (|| -> Result<SweepRow> {
            let gk = cfg.boundary.g(k);
            let l_hat = grid.expected_excess(gk);
            let asymptotic = regime_value(n, k, l_hat, gk, cfg.regime)?;
            let row_seed = cfg.seed.wrapping_add(idx as u64);
            let (estimate, se, seed) = match cfg.method {
                Method::Kernel => (bridge_survival_from_grid(&cfg.model, grid, n, &cfg.grid)?.probability, 0.0, cfg.seed),
                Method::BridgeDirect => {
                    let r = estimate_conditional_survival_bridge(&cfg.model, &cfg.boundary, n, k, cfg.reps, row_seed)?;
                    (r.value, r.std_error, row_seed)
                }
                _ => {
                    let r = estimate_conditional_survival_weighted(&cfg.model, &cfg.boundary, n, k, cfg.reps, row_seed, &cfg.grid)?;
                    (r.value, r.std_error, row_seed)
                }
            };
            Ok(SweepRow {
                model: cfg.model.name().to_string(),
                boundary: cfg.boundary.to_string(),
                n,
                k,
                regime: cfg.regime.to_string(),
                method: cfg.method.to_string(),
                estimate,
                se,
                asymptotic,
                ratio: estimate / asymptotic,
                seed,
                l_hat,
            })
        })();
        match row {
            Ok(r) => table.rows.push(r),
            Err(e) => table.failures.push((n, e.to_string())),
        }
    }
    table
}

/// Position of a Gaussian bridge at step `m`, for distributional checks.
pub fn gaussian_bridge_position(n: usize, m: usize, reps: u64, seed: u64) -> Result<Vec<f64>> {
    if n < 2 || m > n {
        return Err(domain(format!("need n >= 2 and m <= n, got n={n}, m={m}")));
    }
    Ok(run_replicates(reps, seed, Vec::new, |acc, _, rng| {
        let mut s = 0.0;
        for i in 0..m {
            s = if i + 1 == n { 0.0 } else { bridge_step(s, i, n, rng) };
        }
        acc.push(s);
    }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::density_kernel::bridge_survival;
    use crate::increments::{make_centered_exponential, make_gaussian, make_uniform_centered};

    #[test]
    fn unreachable_boundary_bridge_is_one() {
        let b = BoundarySequence::constant(-1e9).unwrap();
        let r = estimate_conditional_survival_bridge(&make_gaussian(), &b, 50, 20, 1000, 1).unwrap();
        assert_eq!(r.value, 1.0);
        assert_eq!(r.std_error, 0.0);
    }

    #[test]
    fn bridge_rejects_other_models() {
        let b = BoundarySequence::constant(-1.0).unwrap();
        let r = estimate_conditional_survival_bridge(&make_centered_exponential(), &b, 50, 20, 1000, 1);
        assert!(matches!(r, Err(Error::ModelMismatch(_))));
    }

    #[test]
    fn weighted_is_unbiased_without_killing() {
        let b = BoundarySequence::constant(f64::NEG_INFINITY).unwrap();
        let cfg = GridConfig::default();
        for model in [make_gaussian(), make_centered_exponential(), make_uniform_centered()] {
            let r = estimate_conditional_survival_weighted(&model, &b, 40, 20, 20_000, 3, &cfg).unwrap();
            assert!((r.value - 1.0).abs() < 4.0 * r.std_error, "{model}: {} ± {}", r.value, r.std_error);
        }
    }

    #[test]
    fn weighted_and_kernel_agree() {
        let g = make_gaussian();
        let b = BoundarySequence::constant(-1.0).unwrap();
        let r = estimate_conditional_survival_weighted(&g, &b, 60, 30, 40_000, 5, &GridConfig::default()).unwrap();
        let k = bridge_survival(&g, &b, 60, 30, &GridConfig::default()).unwrap();
        assert!((r.value - k.probability).abs() < 4.0 * r.std_error);
    }

    #[test]
    fn lg_displays_agree_for_constant_boundary() {
        let b = BoundarySequence::constant(0.0).unwrap();
        let r = estimate_lg(&make_gaussian(), &b, 200, 20_000, 9).unwrap();
        assert!(r.difference().abs() < 5.0 * r.difference_se);
        assert!((r.primary().value - 0.5f64.sqrt()).abs() < 0.05);
    }

    #[test]
    fn rayleigh_at_zero_is_one_and_few_survivors_is_degenerate() {
        let b = BoundarySequence::constant(0.0).unwrap();
        let r = estimate_rayleigh_tail(&make_gaussian(), &b, 50, 0.0, 20_000, 2).unwrap();
        assert_eq!(r.value, 1.0);
        let r = estimate_rayleigh_tail(&make_gaussian(), &b, 50, 1.0, 2_000, 2);
        assert!(matches!(r, Err(Error::Degenerate(_))));
    }

    #[test]
    fn k_rules() {
        assert_eq!(KRule::Fraction(0.5).k_for(200).unwrap(), 100);
        assert_eq!(KRule::NMinusPower(0.6).k_for(200).unwrap(), 175);
        assert_eq!(KRule::NMinusPower(0.5).k_for(6400).unwrap(), 6320);
        assert_eq!("frac:0.5".parse::<KRule>().unwrap(), KRule::Fraction(0.5));
        assert_eq!("pow:0.6".parse::<KRule>().unwrap(), KRule::NMinusPower(0.6));
        assert!("frac:2".parse::<KRule>().is_err());
        assert!(KRule::Fraction(0.001).k_for(10).is_err());
    }

    #[test]
    fn sweep_records_failures_without_aborting() {
        let cfg = SweepConfig {
            model: make_gaussian(),
            boundary: BoundarySequence::constant(-1.0).unwrap(),
            ns: vec![1, 200],
            k_rule: KRule::Fraction(0.5),
            regime: RegimeLabel::Far,
            method: Method::Kernel,
            reps: 0,
            seed: 7,
            grid: GridConfig::default(),
        };
        let t = convergence_sweep(&cfg);
        assert_eq!(t.rows.len(), 1);
        assert_eq!(t.failures.len(), 1);
        let mut buf = Vec::new();
        t.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("model,boundary,n,k,regime,method,estimate,se,asymptotic,ratio,seed\n"));
    }

    #[test]
    fn window_estimator_is_close_to_kernel() {
        let g = make_gaussian();
        let b = BoundarySequence::constant(-1.0).unwrap();
        let r = estimate_conditional_survival_window(&g, &b, 40, 20, 0.1, 200_000, 4).unwrap();
        let k = bridge_survival(&g, &b, 40, 20, &GridConfig::default()).unwrap();
        // δ-bias is O(δ²/n); far below the noise here
        assert!((r.value - k.probability).abs() < 5.0 * r.std_error, "{} vs {}", r.value, k.probability);
    }
}
