//! Deterministic propagation of the killed sub-density `P(S_m ∈ du; τ_g > m)`
//! and the bridge survival probability built on it.
//!
//! Mass is lumped on nodes `x_i = i·h` aligned to the origin. One step moves
//! the mass of node `s` to node `j` with weight `w_{j-s}`, then removes every
//! node at or below the boundary. The first surviving node receives the exact
//! one-step survival mass minus what the lattice already placed above it, so
//! the boundary need not sit on a node and killing loses no mass to rounding.
//!
//! The weights are `2·cell_d - hat_d`, where `cell_d = P(X ∈ ((d-½)h, (d+½)h])`
//! and `hat_d` integrates the density against the unit tent centred at `dh`.
//! Plain cell masses inflate the variance of each step by about `h²/12` and the
//! tent by `h²/6`; the combination keeps the lattice step at unit variance.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;
use std::sync::Arc;

use rayon::prelude::*;
use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

use crate::boundaries::BoundarySequence;
use crate::error::{domain, Error, Result};
use crate::increments::{IncrementModel, NfoldDensity};
use crate::quadrature::kronrod21;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConvolutionMethod {
    Direct,
    Fft,
    /// Picks whichever of the two is cheaper for the current step.
    Auto,
}

#[derive(Debug, Clone)]
pub struct GridConfig {
    /// Preferred node spacing. Widened when the node budget demands it.
    pub spacing: f64,
    /// Half-width of the retained region in standard deviations of `S_m`.
    pub width_sd: f64,
    /// Tail probability below which the increment kernel is truncated.
    pub tail_eps: f64,
    pub method: ConvolutionMethod,
    /// Upper bound on the number of nodes at the final time.
    pub max_nodes: usize,
    /// Largest spacing accepted before giving up.
    pub max_spacing: f64,
    /// Accumulated truncation loss that triggers a grid-too-coarse error.
    pub loss_tolerance: f64,
}

impl Default for GridConfig {
    fn default() -> Self {
        GridConfig {
            spacing: 0.02,
            width_sd: 12.0,
            tail_eps: 1e-16,
            method: ConvolutionMethod::Auto,
            max_nodes: 30_000,
            max_spacing: 0.5,
            loss_tolerance: 1e-4,
        }
    }
}

impl GridConfig {
    pub fn with_spacing(mut self, h: f64) -> Self {
        self.spacing = h;
        self
    }

    pub fn with_method(mut self, method: ConvolutionMethod) -> Self {
        self.method = method;
        self
    }

    pub fn with_max_nodes(mut self, nodes: usize) -> Self {
        self.max_nodes = nodes;
        self
    }

    fn validate(&self) -> Result<()> {
        if !(self.spacing > 0.0 && self.spacing.is_finite()) {
            return Err(Error::Config(format!("grid spacing must be positive, got {}", self.spacing)));
        }
        if !(self.width_sd > 0.0) || !(self.tail_eps > 0.0 && self.tail_eps < 0.5) {
            return Err(Error::Config("grid width and tail cut must be positive".into()));
        }
        if self.max_nodes < 16 {
            return Err(Error::Config(format!("node budget {} is too small", self.max_nodes)));
        }
        Ok(())
    }

    /// Spacing for a propagation of `k` steps from `origin` with boundary
    /// never below `lowest`.
    pub fn resolve_spacing(&self, model: &IncrementModel, k: usize, origin: f64, lowest: f64) -> Result<f64> {
        self.validate()?;
        let (lo_r, hi_r) = model.tail_bounds(self.tail_eps);
        let spread = self.width_sd * (k as f64).sqrt();
        let top = origin + spread + hi_r;
        let bottom = (origin - spread + lo_r).max(lowest);
        let h = self.spacing.max((top - bottom) / self.max_nodes as f64);
        if h > self.max_spacing {
            return Err(Error::GridTooCoarse(format!(
                "{} nodes cannot cover {k} steps; spacing would be {h:.3}",
                self.max_nodes
            )));
        }
        Ok(h)
    }
}

/// Discretised `u ↦ P(S_m ∈ du; τ_g > m)/du` on nodes `lo + i·h`.
#[derive(Debug, Clone)]
pub struct KilledDensityGrid {
    pub m: usize,
    pub lo: f64,
    pub hi: f64,
    pub h: f64,
    pub values: Vec<f64>,
    pub survival_mass: f64,
    /// Mass dropped by truncation so far (not counting killed mass).
    pub quadrature_loss: f64,
    /// `g_m`, or `-inf` when nothing is killed.
    pub boundary: f64,
    /// Starting position `S_0`.
    pub origin: f64,
    lo_idx: i64,
}

impl KilledDensityGrid {
    pub fn nodes(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.values.len()).map(move |i| self.node(i))
    }

    #[inline]
    fn node(&self, i: usize) -> f64 {
        (self.lo_idx + i as i64) as f64 * self.h
    }

    /// Lumped node masses.
    pub fn masses(&self) -> impl Iterator<Item = f64> + '_ {
        self.values.iter().map(move |v| v * self.h)
    }

    /// Linear interpolation between nodes, zero outside the grid.
    pub fn density_at(&self, x: f64) -> f64 {
        if self.values.is_empty() {
            return 0.0;
        }
        let t = x / self.h - self.lo_idx as f64;
        if t < 0.0 || t > (self.values.len() - 1) as f64 {
            return 0.0;
        }
        let i = t.floor() as usize;
        if i + 1 >= self.values.len() {
            return self.values[i];
        }
        let f = t - i as f64;
        self.values[i] * (1.0 - f) + self.values[i + 1] * f
    }

    /// Lumped mass of the cells overlapping `(a, b]`, pro rata for partial
    /// overlap.
    pub fn integrate_density(&self, a: f64, b: f64) -> f64 {
        if b <= a {
            return 0.0;
        }
        self.values
            .iter()
            .enumerate()
            .map(|(i, v)| {
                let x = self.node(i);
                let overlap = (b.min(x + 0.5 * self.h) - a.max(x - 0.5 * self.h)).max(0.0);
                v * overlap
            })
            .sum()
    }

    /// `P(S_m ≤ x; τ_g > m)`.
    pub fn mass_below(&self, x: f64) -> f64 {
        self.integrate_density(f64::NEG_INFINITY, x)
    }

    /// `E(S_m - level; τ_g > m)`.
    pub fn expected_excess(&self, level: f64) -> f64 {
        self.values
            .iter()
            .enumerate()
            .map(|(i, v)| v * self.h * (self.node(i) - level))
            .sum()
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut w = BufWriter::new(File::create(path)?);
        writeln!(w, "node,value")?;
        for (x, v) in self.nodes().zip(&self.values) {
            writeln!(w, "{x},{v:e}")?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Truncated increment kernel on the node lattice.
struct Kernel {
    /// `weights[t]` is the mass of offset `d = t - left`.
    weights: Vec<f64>,
    left: i64,
    right: i64,
    /// `suffix[t] = Σ_{u ≥ t} weights[u]`.
    suffix: Vec<f64>,
    prefix: Vec<f64>,
    deficit: f64,
    lo_reach: f64,
    hi_reach: f64,
}

impl Kernel {
    fn new(model: &IncrementModel, h: f64, tail_eps: f64) -> Self {
        let (lo_r, hi_r) = model.tail_bounds(tail_eps);
        let left = (-lo_r / h + 0.5).ceil().max(0.0) as i64;
        let right = (hi_r / h + 0.5).ceil().max(0.0) as i64;
        let breaks = model.breakpoints();
        let weights: Vec<f64> = (-left..=right)
            .map(|d| {
                let x = d as f64 * h;
                let cell = model.interval_mass(x - 0.5 * h, x + 0.5 * h);
                let hat = tent_integral(model, &breaks, x, h);
                (2.0 * cell - hat).max(0.0)
            })
            .collect();
        let total: f64 = weights.iter().sum();
        let mut suffix = vec![0.0; weights.len() + 1];
        for t in (0..weights.len()).rev() {
            suffix[t] = suffix[t + 1] + weights[t];
        }
        let mut prefix = vec![0.0; weights.len() + 1];
        for t in 0..weights.len() {
            prefix[t + 1] = prefix[t] + weights[t];
        }
        Kernel { weights, left, right, suffix, prefix, deficit: (1.0 - total).max(0.0), lo_reach: lo_r, hi_reach: hi_r }
    }

    fn len(&self) -> usize {
        self.weights.len()
    }
}

/// `∫ f(y) (1 - |y - x|/h)⁺ dy`, split at the density's jumps.
fn tent_integral(model: &IncrementModel, breaks: &[f64], x: f64, h: f64) -> f64 {
    let mut total = 0.0;
    for (a, b) in [(x - h, x), (x, x + h)] {
        let mut cuts = vec![a];
        cuts.extend(breaks.iter().copied().filter(|&c| c > a && c < b));
        cuts.push(b);
        for w in cuts.windows(2) {
            total += kronrod21(|y| model.pdf(y) * (1.0 - (y - x).abs() / h), w[0], w[1]);
        }
    }
    total
}

/// Cached spectra and plans for FFT convolution.
struct FftCache {
    planner: FftPlanner<f64>,
    spectra: HashMap<usize, Arc<Vec<Complex<f64>>>>,
    buffer: Vec<Complex<f64>>,
}

impl FftCache {
    fn new() -> Self {
        FftCache { planner: FftPlanner::new(), spectra: HashMap::new(), buffer: Vec::new() }
    }

    fn spectrum(&mut self, kernel: &Kernel, n: usize) -> Arc<Vec<Complex<f64>>> {
        if let Some(s) = self.spectra.get(&n) {
            return s.clone();
        }
        let mut buf = vec![Complex::new(0.0, 0.0); n];
        for (b, &w) in buf.iter_mut().zip(&kernel.weights) {
            b.re = w;
        }
        self.planner.plan_fft_forward(n).process(&mut buf);
        let s = Arc::new(buf);
        self.spectra.insert(n, s.clone());
        s
    }

    /// Full linear convolution of `src` with the kernel, written to `out`.
    fn convolve(&mut self, kernel: &Kernel, src: &[f64], out: &mut Vec<f64>) -> f64 {
        let len = src.len() + kernel.len() - 1;
        let n = fft_size(len);
        let spec = self.spectrum(kernel, n);
        self.buffer.clear();
        self.buffer.extend(src.iter().map(|&v| Complex::new(v, 0.0)));
        self.buffer.resize(n, Complex::new(0.0, 0.0));
        self.planner.plan_fft_forward(n).process(&mut self.buffer);
        for (b, s) in self.buffer.iter_mut().zip(spec.iter()) {
            *b *= s;
        }
        self.planner.plan_fft_inverse(n).process(&mut self.buffer);
        let scale = 1.0 / n as f64;
        out.clear();
        let mut clipped = 0.0;
        out.extend(self.buffer[..len].iter().map(|c| {
            let v = c.re * scale;
            if v < 0.0 {
                clipped -= v;
                0.0
            } else {
                v
            }
        }));
        clipped
    }
}

/// Smallest `2^a 3^b ≥ len`.
fn fft_size(len: usize) -> usize {
    let mut best = len.next_power_of_two();
    let mut p3 = 1usize;
    while p3 < best {
        let mut v = p3;
        while v < len {
            v *= 2;
        }
        best = best.min(v);
        p3 *= 3;
    }
    best
}

/// Index of the smallest node strictly above `g`.
fn first_alive(g: f64, h: f64) -> i64 {
    let mut i = (g / h).floor() as i64 + 1;
    while (i as f64) * h <= g {
        i += 1;
    }
    while ((i - 1) as f64) * h > g {
        i -= 1;
    }
    i
}

/// Step-by-step propagator for the killed walk.
pub struct KernelPropagator {
    model: IncrementModel,
    cfg: GridConfig,
    h: f64,
    kernel: Kernel,
    fft: FftCache,
    m: usize,
    origin: f64,
    lo_idx: i64,
    mass: Vec<f64>,
    loss: f64,
    boundary: f64,
    scratch: Vec<f64>,
}

impl KernelPropagator {
    /// Point mass at `origin`, split linearly between the two nearest nodes.
    pub fn start(model: &IncrementModel, cfg: &GridConfig, h: f64, origin: f64) -> Result<Self> {
        cfg.validate()?;
        if !(h > 0.0) || !origin.is_finite() {
            return Err(domain("spacing must be positive and the start finite"));
        }
        let t = origin / h;
        let base = t.floor();
        let frac = t - base;
        let mass = if frac == 0.0 { vec![1.0] } else { vec![1.0 - frac, frac] };
        Ok(KernelPropagator {
            model: model.clone(),
            cfg: cfg.clone(),
            h,
            kernel: Kernel::new(model, h, cfg.tail_eps),
            fft: FftCache::new(),
            m: 0,
            origin,
            lo_idx: base as i64,
            mass,
            loss: 0.0,
            boundary: f64::NEG_INFINITY,
            scratch: Vec::new(),
        })
    }

    /// Continues from an earlier snapshot on the same lattice.
    pub fn resume(model: &IncrementModel, cfg: &GridConfig, grid: &KilledDensityGrid) -> Result<Self> {
        let mut p = KernelPropagator::start(model, cfg, grid.h, grid.origin)?;
        p.m = grid.m;
        p.lo_idx = grid.lo_idx;
        p.mass = grid.values.iter().map(|v| v * grid.h).collect();
        p.loss = grid.quadrature_loss;
        p.boundary = grid.boundary;
        Ok(p)
    }

    pub fn time(&self) -> usize {
        self.m
    }

    pub fn spacing(&self) -> f64 {
        self.h
    }

    pub fn survival(&self) -> f64 {
        self.mass.iter().sum()
    }

    pub fn loss(&self) -> f64 {
        self.loss
    }

    /// Advances one step and kills at or below `g` (`-inf` kills nothing).
    pub fn step(&mut self, g: f64) -> Result<()> {
        let m = self.m + 1;
        let h = self.h;
        let k = &self.kernel;
        let src_lo = self.lo_idx;
        let src_hi = src_lo + self.mass.len() as i64 - 1;

        let spread = self.cfg.width_sd * (m as f64).sqrt();
        let cap_hi = ((self.origin + spread + k.hi_reach) / h).floor() as i64;
        let cap_lo = ((self.origin - spread + k.lo_reach) / h).ceil() as i64;
        let j0 = if g == f64::NEG_INFINITY { i64::MIN } else { first_alive(g, h) };

        let out_hi = (src_hi + k.right).min(cap_hi);
        let out_lo = (src_lo - k.left).max(cap_lo).max(j0);

        // Mass carried past the retained window.
        let mut lost = k.deficit * self.survival();
        for (i, &p) in self.mass.iter().enumerate() {
            if p == 0.0 {
                continue;
            }
            let s = src_lo + i as i64;
            if s + k.right > cap_hi {
                let t = (cap_hi - s + 1 + k.left).clamp(0, k.len() as i64) as usize;
                lost += p * k.suffix[t];
            }
            if j0 == i64::MIN && s - k.left < cap_lo {
                let t = (cap_lo - s + k.left).clamp(0, k.len() as i64) as usize;
                lost += p * k.prefix[t];
            }
        }

        if out_lo > out_hi {
            self.mass.clear();
            self.lo_idx = out_lo;
            self.m = m;
            self.boundary = g;
            self.loss += lost;
            return self.check_loss();
        }

        let n_out = (out_hi - out_lo + 1) as usize;
        let use_fft = match self.cfg.method {
            ConvolutionMethod::Direct => false,
            ConvolutionMethod::Fft => true,
            ConvolutionMethod::Auto => {
                let len = self.mass.len() + k.len() - 1;
                let n = fft_size(len) as f64;
                (n_out as f64) * (k.len().min(self.mass.len()) as f64) > 8.0 * n * n.log2()
            }
        };

        let mut out = vec![0.0; n_out];
        if use_fft {
            let mut full = std::mem::take(&mut self.scratch);
            lost += self.fft.convolve(&self.kernel, &self.mass, &mut full);
            // full[t] sits at node src_lo - left + t
            let shift = (out_lo - (src_lo - self.kernel.left)) as usize;
            out.copy_from_slice(&full[shift..shift + n_out]);
            self.scratch = full;
        } else {
            let mass = &self.mass;
            let k = &self.kernel;
            out.par_chunks_mut(512).enumerate().for_each(|(c, chunk)| {
                for (o, slot) in chunk.iter_mut().enumerate() {
                    let j = out_lo + (c * 512 + o) as i64;
                    let s_lo = (j - k.right).max(src_lo);
                    let s_hi = (j + k.left).min(src_hi);
                    let mut acc = 0.0;
                    for s in s_lo..=s_hi {
                        acc += mass[(s - src_lo) as usize] * k.weights[(j - s + k.left) as usize];
                    }
                    *slot = acc;
                }
            });
        }

        if out_lo == j0 {
            out[0] = self.partial_cell(g, j0);
        }

        self.mass = out;
        self.lo_idx = out_lo;
        self.m = m;
        self.boundary = g;
        self.loss += lost;
        self.check_loss()
    }

    /// Exact mass landing above `g` minus the lattice mass above node `j0`.
    fn partial_cell(&self, g: f64, j0: i64) -> f64 {
        let h = self.h;
        let top = (j0 as f64 + 0.5) * h;
        let k = &self.kernel;
        let s_min = (((g - k.hi_reach) / h).floor() as i64).max(self.lo_idx);
        let s_max = (((top - k.lo_reach) / h).ceil() as i64).min(self.lo_idx + self.mass.len() as i64 - 1);
        (s_min..=s_max)
            .map(|s| {
                let p = self.mass[(s - self.lo_idx) as usize];
                if p == 0.0 {
                    return 0.0;
                }
                let x = s as f64 * h;
                let above = k.suffix[(j0 + 1 - s + k.left).clamp(0, k.len() as i64) as usize];
                p * (self.model.interval_mass(g - x, f64::INFINITY) - above)
            })
            .sum::<f64>()
            .max(0.0)
    }

    fn check_loss(&self) -> Result<()> {
        if self.loss > self.cfg.loss_tolerance {
            return Err(Error::GridTooCoarse(format!(
                "truncation lost {:.3e} of mass by step {}, above {:.1e}",
                self.loss, self.m, self.cfg.loss_tolerance
            )));
        }
        Ok(())
    }

    pub fn snapshot(&self) -> KilledDensityGrid {
        let h = self.h;
        let killed = self.boundary > f64::NEG_INFINITY;
        // A zero node below the first survivor keeps the killed region visible.
        let (lo_idx, values) = if killed {
            let mut v = Vec::with_capacity(self.mass.len() + 1);
            v.push(0.0);
            v.extend(self.mass.iter().map(|p| p / h));
            (self.lo_idx - 1, v)
        } else {
            (self.lo_idx, self.mass.iter().map(|p| p / h).collect())
        };
        KilledDensityGrid {
            m: self.m,
            lo: lo_idx as f64 * h,
            hi: (lo_idx + values.len() as i64 - 1) as f64 * h,
            h,
            survival_mass: self.survival(),
            quadrature_loss: self.loss,
            boundary: self.boundary,
            origin: self.origin,
            values,
            lo_idx,
        }
    }
}

fn check_boundary_values(boundary: &BoundarySequence, k: usize) -> Result<()> {
    if (1..=k.min(10)).any(|i| boundary.g(i).is_nan()) {
        return Err(domain("boundary evaluates to NaN"));
    }
    Ok(())
}

/// Killed sub-density at time `k` for a walk started at `origin`.
pub fn propagate_killed_from(
    model: &IncrementModel,
    boundary: &BoundarySequence,
    k: usize,
    origin: f64,
    cfg: &GridConfig,
) -> Result<KilledDensityGrid> {
    Ok(propagate_killed_snapshots_from(model, boundary, &[k], origin, cfg)?.pop().expect("one snapshot"))
}

pub fn propagate_killed(
    model: &IncrementModel,
    boundary: &BoundarySequence,
    k: usize,
    cfg: &GridConfig,
) -> Result<KilledDensityGrid> {
    propagate_killed_from(model, boundary, k, 0.0, cfg)
}

/// One pass up to `max(ks)`, returning a snapshot at each requested time in
/// ascending order. All snapshots share one lattice.
pub fn propagate_killed_snapshots(
    model: &IncrementModel,
    boundary: &BoundarySequence,
    ks: &[usize],
    cfg: &GridConfig,
) -> Result<Vec<KilledDensityGrid>> {
    propagate_killed_snapshots_from(model, boundary, ks, 0.0, cfg)
}

pub fn propagate_killed_snapshots_from(
    model: &IncrementModel,
    boundary: &BoundarySequence,
    ks: &[usize],
    origin: f64,
    cfg: &GridConfig,
) -> Result<Vec<KilledDensityGrid>> {
    let mut ks = ks.to_vec();
    ks.sort_unstable();
    ks.dedup();
    let kmax = *ks.last().ok_or_else(|| domain("no propagation times given"))?;
    if ks[0] == 0 {
        return Err(domain("propagation needs k >= 1"));
    }
    check_boundary_values(boundary, kmax)?;
    let h = cfg.resolve_spacing(model, kmax, origin, boundary.min_up_to(kmax))?;
    let mut prop = KernelPropagator::start(model, cfg, h, origin)?;
    let mut out = Vec::with_capacity(ks.len());
    let mut next = 0;
    for m in 1..=kmax {
        prop.step(boundary.g(m))?;
        if m == ks[next] {
            out.push(prop.snapshot());
            next += 1;
        }
    }
    Ok(out)
}

/// Continues a snapshot to time `k` on its own lattice.
pub fn continue_killed(
    model: &IncrementModel,
    boundary: &BoundarySequence,
    grid: &KilledDensityGrid,
    k: usize,
    cfg: &GridConfig,
) -> Result<KilledDensityGrid> {
    if k < grid.m {
        return Err(domain(format!("cannot continue from time {} back to {k}", grid.m)));
    }
    let mut prop = KernelPropagator::resume(model, cfg, grid)?;
    for m in grid.m + 1..=k {
        prop.step(boundary.g(m))?;
    }
    Ok(prop.snapshot())
}

/// Density of `S_m` with no killing.
pub fn unkilled_density(model: &IncrementModel, m: usize, cfg: &GridConfig) -> Result<KilledDensityGrid> {
    propagate_killed(model, &BoundarySequence::unreachable(), m, cfg)
}

#[derive(Debug, Clone)]
pub struct BridgeSurvival {
    /// `P(τ_g > k | S_n = 0)`.
    pub probability: f64,
    /// `∫ h_k(u) f_{n-k}(-u) du`.
    pub numerator: f64,
    /// `f_n(0)`.
    pub fn0: f64,
    pub quadrature_loss: f64,
    pub spacing: f64,
    /// `E(S_k - g_k; τ_g > k)` on the same grid.
    pub l_hat: f64,
}

/// `P(τ_g > k | S_n = 0) = (1/f_n(0)) ∫_{u > g_k} h_k(u) f_{n-k}(-u) du`.
pub fn bridge_survival(
    model: &IncrementModel,
    boundary: &BoundarySequence,
    n: usize,
    k: usize,
    cfg: &GridConfig,
) -> Result<BridgeSurvival> {
    if k == 0 || k >= n {
        return Err(domain(format!("bridge survival needs 1 <= k < n, got k={k}, n={n}")));
    }
    let grid = propagate_killed(model, boundary, k, cfg)?;
    bridge_survival_from_grid(model, &grid, n, cfg)
}

/// Bridge survival from a precomputed killed grid at time `k = grid.m`.
pub fn bridge_survival_from_grid(
    model: &IncrementModel,
    grid: &KilledDensityGrid,
    n: usize,
    cfg: &GridConfig,
) -> Result<BridgeSurvival> {
    bridge_survival_to(model, grid, n, 0.0, cfg)
}

/// `P(τ_g > k | S_n = end)` from a killed grid at time `k = grid.m`.
pub fn bridge_survival_to(
    model: &IncrementModel,
    grid: &KilledDensityGrid,
    n: usize,
    end: f64,
    cfg: &GridConfig,
) -> Result<BridgeSurvival> {
    let k = grid.m;
    if k == 0 || k >= n {
        return Err(domain(format!("bridge survival needs 1 <= k < n, got k={k}, n={n}")));
    }
    if grid.origin != 0.0 {
        return Err(domain("bridge survival needs a walk started at 0"));
    }
    let fn0 = NfoldDensity::new(model, n, cfg)?.eval(end);
    if !(fn0 >= 1e-15) {
        return Err(domain(format!("f_{n}({end}) = {fn0:e} is below 1e-15")));
    }
    let tail = NfoldDensity::new(model, n - k, cfg)?;
    let numerator: f64 = grid.nodes().zip(grid.masses()).map(|(x, p)| if p > 0.0 { p * tail.eval(end - x) } else { 0.0 }).sum();
    let level = if grid.boundary.is_finite() { grid.boundary } else { 0.0 };
    Ok(BridgeSurvival {
        probability: (numerator / fn0).min(1.0),
        numerator,
        fn0,
        quadrature_loss: grid.quadrature_loss,
        spacing: grid.h,
        l_hat: grid.expected_excess(level),
    })
}
