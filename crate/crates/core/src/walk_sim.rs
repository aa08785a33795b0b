//! Path-level simulation: killed walks, Gaussian bridges and ladder heights.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use rand::Rng;
use rand_distr::StandardNormal;

use crate::boundaries::BoundarySequence;
use crate::error::{domain, Result};
use crate::increments::IncrementModel;
use crate::rng::{derive_seed, replicate_rng};
use crate::stats::{run_replicates, Accumulator, Moments};

/// One simulated path `S_1..S_m`, truncated at the kill time.
#[derive(Debug, Clone, PartialEq)]
pub struct WalkPath {
    /// Master seed and replicate index the path was drawn from, when known.
    pub seed: Option<(u64, u64)>,
    pub values: Vec<f64>,
    /// First `i` with `S_i ≤ g_i`.
    pub killed_at: Option<usize>,
}

impl WalkPath {
    /// `S_i` for `1 ≤ i ≤ len`; `S_0 = 0`.
    pub fn s(&self, i: usize) -> f64 {
        if i == 0 {
            0.0
        } else {
            self.values[i - 1]
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Writes `step,value,killed` rows.
    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut w = BufWriter::new(File::create(path)?);
        if let Some((seed, rep)) = self.seed {
            writeln!(w, "# seed={seed} replicate={rep}")?;
        }
        writeln!(w, "step,value,killed")?;
        for (i, v) in self.values.iter().enumerate() {
            let killed = self.killed_at == Some(i + 1);
            writeln!(w, "{},{v},{}", i + 1, u8::from(killed))?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Walk from 0 until the first `i` with `S_i ≤ g_i`, or until `horizon`.
pub fn simulate_killed<R: Rng + ?Sized>(
    model: &IncrementModel,
    boundary: &BoundarySequence,
    horizon: usize,
    rng: &mut R,
) -> WalkPath {
    let mut values = Vec::with_capacity(horizon.min(1 << 16));
    let mut s = 0.0;
    let mut killed_at = None;
    for i in 1..=horizon {
        s += model.sample(rng);
        values.push(s);
        if s <= boundary.g(i) {
            killed_at = Some(i);
            break;
        }
    }
    WalkPath { seed: None, values, killed_at }
}

/// [`simulate_killed`] on the stream of replicate `rep` of `seed`.
pub fn simulate_killed_seeded(
    model: &IncrementModel,
    boundary: &BoundarySequence,
    horizon: usize,
    seed: u64,
    rep: u64,
) -> WalkPath {
    let mut rng = replicate_rng(seed, rep);
    let mut path = simulate_killed(model, boundary, horizon, &mut rng);
    path.seed = Some((seed, rep));
    path
}

/// Outcome of a walk run without storing the path.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KilledRun {
    pub killed_at: Option<usize>,
    /// `S_{τ_g}` if killed, else `S_horizon`.
    pub last: f64,
}

/// Like [`simulate_killed`] but from `start` and without allocation.
#[inline]
pub fn run_killed<R: Rng + ?Sized>(
    model: &IncrementModel,
    boundary: &BoundarySequence,
    horizon: usize,
    start: f64,
    rng: &mut R,
) -> KilledRun {
    let mut s = start;
    for i in 1..=horizon {
        s += model.sample(rng);
        if s <= boundary.g(i) {
            return KilledRun { killed_at: Some(i), last: s };
        }
    }
    KilledRun { killed_at: None, last: s }
}

/// Exact Gaussian bridge `S_1..S_n` with `S_n = 0`.
pub fn sample_gaussian_bridge<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Result<WalkPath> {
    if n < 2 {
        return Err(domain(format!("a bridge needs n >= 2, got {n}")));
    }
    let mut values = Vec::with_capacity(n);
    let mut s = 0.0;
    for i in 0..n - 1 {
        s = bridge_step(s, i, n, rng);
        values.push(s);
    }
    values.push(0.0);
    Ok(WalkPath { seed: None, values, killed_at: None })
}

/// Draws `S_{i+1}` given `S_i = s` for the Gaussian bridge of length `n`.
#[inline]
pub fn bridge_step<R: Rng + ?Sized>(s: f64, i: usize, n: usize, rng: &mut R) -> f64 {
    let left = (n - i) as f64;
    let z: f64 = rng.sample(StandardNormal);
    s - s / left + z * ((left - 1.0) / left).sqrt()
}

/// Whether a Gaussian bridge of length `n` stays above `g` up to `k`; only
/// the first `k` steps are drawn.
#[inline]
pub fn gaussian_bridge_survives<R: Rng + ?Sized>(
    boundary: &BoundarySequence,
    n: usize,
    k: usize,
    rng: &mut R,
) -> bool {
    let mut s = 0.0;
    for i in 0..k.min(n) {
        s = if i + 1 == n { 0.0 } else { bridge_step(s, i, n, rng) };
        if s <= boundary.g(i + 1) {
            return false;
        }
    }
    true
}

/// Step cap for ladder epochs.
pub const LADDER_STEP_CAP: usize = 1_000_000;

/// Estimated ladder constants and renewal functions.
#[derive(Debug, Clone)]
pub struct LadderStats {
    /// Estimate of `E(-S_{T_0})`.
    pub mean_descending: f64,
    /// Estimate of `E(-S̃_{T_0})` for the walk with increments `-X_i`.
    pub mean_ascending_dual: f64,
    pub se_descending: f64,
    pub se_ascending_dual: f64,
    /// `U` on `heights`: expected number of ascending ladder points at or
    /// below each height, counting the origin.
    pub u_table: Vec<f64>,
    pub v_table: Vec<f64>,
    pub height_max: f64,
    pub samples_descending: u64,
    pub samples_ascending: u64,
    /// Fraction of epochs that ran into [`LADDER_STEP_CAP`] and were redrawn.
    pub capped_fraction: f64,
    pub warnings: Vec<String>,
}

impl LadderStats {
    /// Tables built from the linear asymptotes `U(t) = t/E(-S̃_{T_0})`,
    /// `V(t) = t/E(-S_{T_0})`.
    pub fn asymptotic(mean_descending: f64, mean_ascending_dual: f64, height_max: f64, points: usize) -> Self {
        let points = points.max(2);
        let step = height_max / (points - 1) as f64;
        let grid = (0..points).map(|i| i as f64 * step);
        LadderStats {
            mean_descending,
            mean_ascending_dual,
            se_descending: 0.0,
            se_ascending_dual: 0.0,
            u_table: grid.clone().map(|t| t / mean_ascending_dual).collect(),
            v_table: grid.map(|t| t / mean_descending).collect(),
            height_max,
            samples_descending: 0,
            samples_ascending: 0,
            capped_fraction: 0.0,
            warnings: Vec::new(),
        }
    }

    pub fn product(&self) -> f64 {
        self.mean_descending * self.mean_ascending_dual
    }

    /// Delta-method standard error of [`LadderStats::product`]; the two
    /// means come from independent samples.
    pub fn product_se(&self) -> f64 {
        (self.mean_ascending_dual.powi(2) * self.se_descending.powi(2)
            + self.mean_descending.powi(2) * self.se_ascending_dual.powi(2))
        .sqrt()
    }

    pub fn heights(&self) -> impl Iterator<Item = f64> + '_ {
        let step = self.step();
        (0..self.u_table.len()).map(move |i| i as f64 * step)
    }

    fn step(&self) -> f64 {
        self.height_max / (self.u_table.len() - 1) as f64
    }

    fn lookup(table: &[f64], step: f64, slope: f64, t: f64) -> f64 {
        if t < 0.0 {
            return 0.0;
        }
        let last = table.len() - 1;
        let pos = t / step;
        if pos >= last as f64 {
            return table[last] + (t - last as f64 * step) * slope;
        }
        let i = pos.floor() as usize;
        let f = pos - i as f64;
        table[i] * (1.0 - f) + table[i + 1] * f
    }

    /// Renewal function of the ascending ladder heights. Past the table the
    /// linear asymptote's slope is used.
    pub fn u(&self, t: f64) -> f64 {
        Self::lookup(&self.u_table, self.step(), 1.0 / self.mean_ascending_dual, t)
    }

    pub fn v(&self, t: f64) -> f64 {
        Self::lookup(&self.v_table, self.step(), 1.0 / self.mean_descending, t)
    }

    /// `∫_a^b U(w) dw` for the piecewise-linear `U`.
    pub fn u_integral(&self, a: f64, b: f64) -> f64 {
        if b <= a {
            return 0.0;
        }
        let step = self.step();
        let mut cuts = vec![a];
        let first = (a / step).floor() as i64 + 1;
        let mut i = first.max(0);
        while (i as f64) * step < b && (i as usize) < self.u_table.len() {
            if (i as f64) * step > a {
                cuts.push(i as f64 * step);
            }
            i += 1;
        }
        if a < 0.0 && b > 0.0 && !cuts.contains(&0.0) {
            cuts.push(0.0);
            cuts.sort_by(f64::total_cmp);
        }
        cuts.push(b);
        cuts.windows(2).map(|w| 0.5 * (w[1] - w[0]) * (self.u(w[0]) + self.u(w[1]))).sum()
    }
}

#[derive(Default)]
struct LadderSamples {
    descending: Vec<f64>,
    ascending: Vec<f64>,
    capped: u64,
}

impl Accumulator for LadderSamples {
    fn merge(&mut self, mut other: Self) {
        self.descending.append(&mut other.descending);
        self.ascending.append(&mut other.ascending);
        self.capped += other.capped;
    }
}

/// Height `-S_T` at `T = min{i ≥ 1: sign·S_i ≤ 0}`, redrawn while the epoch
/// exceeds `cap` steps. Returns the height and the number of redraws.
fn ladder_height<R: Rng + ?Sized>(model: &IncrementModel, sign: f64, cap: usize, rng: &mut R) -> (f64, u64) {
    let mut redraws = 0;
    loop {
        let mut s = 0.0;
        for _ in 0..cap {
            s += sign * model.sample(rng);
            if s <= 0.0 {
                return (-s, redraws);
            }
        }
        redraws += 1;
    }
}

/// Renewal function `t ↦ E #{j ≥ 0: H_1 + … + H_j ≤ t}` on a grid, from iid
/// heights chained into independent renewal sequences that each run past
/// the top of the grid. The unfinished last chain is dropped.
fn renewal_table(heights: &[f64], height_max: f64, points: usize) -> Vec<f64> {
    let step = height_max / (points - 1) as f64;
    let mut counts = vec![0u64; points];
    let mut chains = 0u64;
    let mut it = heights.iter();
    'outer: loop {
        // points of the current chain, origin included
        let mut level = 0.0;
        let mut chain_points = vec![0.0];
        loop {
            match it.next() {
                None => break 'outer,
                Some(&hgt) => {
                    level += hgt;
                    if level > height_max {
                        break;
                    }
                    chain_points.push(level);
                }
            }
        }
        chains += 1;
        for p in chain_points {
            // first grid index whose height is ≥ p
            let idx = (p / step).ceil() as usize;
            if idx < points {
                counts[idx] += 1;
            }
        }
    }
    let chains = chains.max(1) as f64;
    let mut acc = 0u64;
    counts
        .iter()
        .map(|&c| {
            acc += c;
            acc as f64 / chains
        })
        .collect()
}

/// Estimates `E(-S_{T_0})`, `E(-S̃_{T_0})` and the renewal functions from
/// `paths` independent epochs of each walk.
pub fn estimate_ladder_stats(model: &IncrementModel, paths: u64, height_grid_max: f64, seed: u64) -> Result<LadderStats> {
    estimate_ladder_stats_with_cap(model, paths, height_grid_max, seed, LADDER_STEP_CAP)
}

pub fn estimate_ladder_stats_with_cap(
    model: &IncrementModel,
    paths: u64,
    height_grid_max: f64,
    seed: u64,
    cap: usize,
) -> Result<LadderStats> {
    if paths < 10_000 {
        return Err(domain(format!("ladder estimation needs at least 10^4 paths, got {paths}")));
    }
    if !(height_grid_max > 0.0) {
        return Err(domain("height grid must extend above 0"));
    }
    let stream = derive_seed(seed, 0x1add);
    let samples = run_replicates(paths, stream, LadderSamples::default, |acc, _, rng| {
        let (d, rd) = ladder_height(model, 1.0, cap, rng);
        let (a, ra) = ladder_height(model, -1.0, cap, rng);
        acc.descending.push(d);
        acc.ascending.push(a);
        acc.capped += rd + ra;
    });
    let mut md = Moments::default();
    samples.descending.iter().for_each(|&x| md.push(x));
    let mut ma = Moments::default();
    samples.ascending.iter().for_each(|&x| ma.push(x));

    let points = 401;
    let capped_fraction = samples.capped as f64 / (2 * paths + samples.capped) as f64;
    let mut warnings = Vec::new();
    if capped_fraction > 0.01 {
        warnings.push(format!(
            "{:.2}% of ladder epochs exceeded {cap} steps and were redrawn; heights are biased",
            100.0 * capped_fraction
        ));
    }
    Ok(LadderStats {
        mean_descending: md.mean(),
        mean_ascending_dual: ma.mean(),
        se_descending: md.std_error(),
        se_ascending_dual: ma.std_error(),
        u_table: renewal_table(&samples.ascending, height_grid_max, points),
        v_table: renewal_table(&samples.descending, height_grid_max, points),
        height_max: height_grid_max,
        samples_descending: md.count,
        samples_ascending: ma.count,
        capped_fraction,
        warnings,
    })
}
