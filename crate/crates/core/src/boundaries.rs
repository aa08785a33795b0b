//! Boundary sequences `g_1, g_2, ...` and their admissibility diagnostics.

use std::fmt;
use std::path::Path;
use std::str::FromStr;
use std::sync::Arc;

use crate::error::{domain, Error, Result};

/// Parametric shape of a boundary sequence.
#[derive(Debug, Clone, PartialEq)]
pub enum BoundaryFamily {
    /// `g_i = c`. `c = -∞` is allowed and never kills.
    Constant(f64),
    /// `g_i = -c · i^α` with `α < 1/2`.
    Power { c: f64, alpha: f64 },
    /// `g_i = -c · log(i + 1)`.
    Log(f64),
    /// Explicit values `g_1..g_N`; indices past `N` repeat `g_N`.
    Table(Arc<[f64]>),
}

/// A boundary `g_i = offset + family(i)`.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundarySequence {
    family: BoundaryFamily,
    offset: f64,
}

impl BoundarySequence {
    pub fn constant(c: f64) -> Result<Self> {
        if c.is_nan() || c == f64::INFINITY {
            return Err(domain(format!("constant boundary must be below +inf, got {c}")));
        }
        Ok(Self::from_family(BoundaryFamily::Constant(c)))
    }

    /// A boundary the walk can never reach.
    pub fn unreachable() -> Self {
        Self::from_family(BoundaryFamily::Constant(f64::NEG_INFINITY))
    }

    pub fn power(c: f64, alpha: f64) -> Result<Self> {
        if !c.is_finite() || !alpha.is_finite() {
            return Err(domain("power boundary parameters must be finite"));
        }
        if alpha >= 0.5 {
            return Err(domain(format!(
                "power boundary needs alpha < 1/2 to stay o(sqrt(i)), got {alpha}"
            )));
        }
        Ok(Self::from_family(BoundaryFamily::Power { c, alpha }))
    }

    pub fn log(c: f64) -> Result<Self> {
        if !c.is_finite() {
            return Err(domain("log boundary scale must be finite"));
        }
        Ok(Self::from_family(BoundaryFamily::Log(c)))
    }

    pub fn table(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(domain("table boundary needs at least one value"));
        }
        if let Some(v) = values.iter().find(|v| !v.is_finite()) {
            return Err(domain(format!("table boundary value {v} is not finite")));
        }
        Ok(Self::from_family(BoundaryFamily::Table(values.into())))
    }

    /// Loads `g_1..g_N` from a one-column CSV. A non-numeric first row is
    /// treated as a header.
    pub fn from_csv(path: impl AsRef<Path>) -> Result<Self> {
        let mut reader = csv::ReaderBuilder::new()
            .has_headers(false)
            .comment(Some(b'#'))
            .trim(csv::Trim::All)
            .from_path(path.as_ref())?;
        let mut values = Vec::new();
        for (row, record) in reader.records().enumerate() {
            let record = record?;
            if record.len() != 1 {
                return Err(Error::Config(format!(
                    "boundary table row {} has {} columns, expected 1",
                    row + 1,
                    record.len()
                )));
            }
            match record[0].parse::<f64>() {
                Ok(v) => values.push(v),
                Err(_) if row == 0 => continue,
                Err(e) => {
                    return Err(Error::Config(format!("boundary table row {}: {e}", row + 1)));
                }
            }
        }
        Self::table(values)
    }

    fn from_family(family: BoundaryFamily) -> Self {
        BoundarySequence { family, offset: 0.0 }
    }

    /// The same sequence shifted by `delta`.
    pub fn shifted(&self, delta: f64) -> Self {
        BoundarySequence { family: self.family.clone(), offset: self.offset + delta }
    }

    pub fn family(&self) -> &BoundaryFamily {
        &self.family
    }

    pub fn offset(&self) -> f64 {
        self.offset
    }

    /// Boundary value at step `i ≥ 1`.
    pub fn g(&self, i: usize) -> f64 {
        debug_assert!(i >= 1, "boundary is indexed from 1");
        let i = i.max(1);
        let raw = match &self.family {
            BoundaryFamily::Constant(c) => *c,
            BoundaryFamily::Power { c, alpha } => -c * (i as f64).powf(*alpha),
            BoundaryFamily::Log(c) => -c * ((i + 1) as f64).ln(),
            BoundaryFamily::Table(v) => v[(i - 1).min(v.len() - 1)],
        };
        raw + self.offset
    }

    /// Minimum of `g_1..g_k`.
    pub fn min_up_to(&self, k: usize) -> f64 {
        match &self.family {
            BoundaryFamily::Constant(c) => c + self.offset,
            _ => (1..=k.max(1)).map(|i| self.g(i)).fold(f64::INFINITY, f64::min),
        }
    }

    pub fn is_unreachable(&self) -> bool {
        matches!(self.family, BoundaryFamily::Constant(c) if c == f64::NEG_INFINITY)
    }

    /// Whether `g` is known to be non-increasing in `i`.
    pub fn is_non_increasing(&self) -> bool {
        match &self.family {
            BoundaryFamily::Constant(_) => true,
            BoundaryFamily::Power { c, alpha } => *c * *alpha >= 0.0,
            BoundaryFamily::Log(c) => *c >= 0.0,
            BoundaryFamily::Table(v) => v.windows(2).all(|w| w[1] <= w[0]),
        }
    }

    /// Whether `L_g(∞) < ∞` is known analytically for this family.
    ///
    /// Non-increasing concave families are settled by the summability of
    /// `Σ -g_n / n^{3/2}`; for the power family that holds iff `α < 1/2`,
    /// which construction already enforces.
    pub fn analytic_l_finite(&self) -> Option<bool> {
        match &self.family {
            BoundaryFamily::Constant(c) => Some(c.is_finite()),
            BoundaryFamily::Power { c, alpha } if *c >= 0.0 && (0.0..=1.0).contains(alpha) => Some(true),
            BoundaryFamily::Log(c) if *c >= 0.0 => Some(true),
            _ => None,
        }
    }

    /// `max |g_i| / sqrt(i)` over the window `N/10 < i ≤ N`, a finite-horizon
    /// proxy for `|g_i| = o(sqrt(i))`.
    pub fn sqrt_ratio_window_max(&self, horizon: usize) -> f64 {
        let start = horizon / 10 + 1;
        (start..=horizon.max(start))
            .map(|i| self.g(i).abs() / (i as f64).sqrt())
            .fold(0.0, f64::max)
    }
}

impl fmt::Display for BoundarySequence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.family {
            BoundaryFamily::Constant(c) => write!(f, "const:{c}")?,
            BoundaryFamily::Power { c, alpha } => write!(f, "power:{c}:{alpha}")?,
            BoundaryFamily::Log(c) => write!(f, "log:{c}")?,
            BoundaryFamily::Table(v) => write!(f, "table[{}]", v.len())?,
        }
        if self.offset != 0.0 {
            write!(f, "{:+}", self.offset)?;
        }
        Ok(())
    }
}

/// Parses `const:C`, `power:C:ALPHA`, `log:C`, `table:PATH` and `none`.
impl FromStr for BoundarySequence {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if let Some(path) = s.strip_prefix("table:") {
            return Self::from_csv(path);
        }
        let parts: Vec<&str> = s.splitn(3, ':').collect();
        let num = |t: &str| -> Result<f64> {
            t.trim()
                .parse::<f64>()
                .map_err(|_| Error::Config(format!("boundary `{s}`: `{t}` is not a number")))
        };
        match parts.as_slice() {
            ["none"] => Ok(Self::unreachable()),
            ["const", c] => Self::constant(num(c)?),
            ["power", c, a] => Self::power(num(c)?, num(a)?),
            ["log", c] => Self::log(num(c)?),
            _ => Err(Error::Config(format!(
                "unrecognised boundary `{s}` (expected const:C, power:C:ALPHA, log:C, table:PATH or none)"
            ))),
        }
    }
}

/// `sup_{⌈(1-ε)k⌉ ≤ j ≤ k} |g_j - g_k| / |g_k|`.
///
/// Returns `+∞` when `g_k = 0` but the boundary moves inside the window, and
/// `0` when it does not.
pub fn fluctuation_ratio(b: &BoundarySequence, k: usize, eps: f64) -> Result<f64> {
    if !(eps > 0.0 && eps < 1.0) {
        return Err(domain(format!("epsilon must lie in (0, 1), got {eps}")));
    }
    if k == 0 {
        return Err(domain("k must be positive"));
    }
    let gk = b.g(k);
    let first = (((1.0 - eps) * k as f64).ceil() as usize).max(1);
    let sup = (first..=k).map(|j| (b.g(j) - gk).abs()).fold(0.0, f64::max);
    if gk == 0.0 {
        Ok(if sup > 0.0 { f64::INFINITY } else { 0.0 })
    } else {
        Ok(sup / gk.abs())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LVerdict {
    Finite,
    Infinite,
    /// No analytic statement; only the partial sums are reported.
    EvidenceOnly,
}

impl fmt::Display for LVerdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            LVerdict::Finite => "L_g(inf) finite",
            LVerdict::Infinite => "L_g(inf) infinite",
            LVerdict::EvidenceOnly => "evidence only",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LInfinityReport {
    pub verdict: LVerdict,
    /// `(N, Σ_{n≤N} -g_n / n^{3/2})`
    pub greenwood_partial_sums: Vec<(usize, f64)>,
    /// `(N, Σ_{n≤N} sqrt(log n) (-g_n) / n^{3/2})`
    pub wachtel_partial_sums: Vec<(usize, f64)>,
}

/// Summability evidence for the finiteness of `L_g(∞)`.
pub fn l_infinity_criterion(b: &BoundarySequence, horizon: usize) -> Result<LInfinityReport> {
    if horizon < 1000 {
        return Err(domain(format!("horizon must be at least 1000, got {horizon}")));
    }
    if b.is_unreachable() {
        return Err(domain("an unreachable boundary has no first-passage time"));
    }
    let checkpoints = [100, 1000, horizon];
    let mut greenwood = Vec::new();
    let mut wachtel = Vec::new();
    let (mut gs, mut ws) = (0.0, 0.0);
    let mut next = 0;
    for n in 1..=horizon {
        let nf = n as f64;
        let term = -b.g(n) / (nf * nf.sqrt());
        gs += term;
        ws += nf.ln().sqrt() * term;
        while next < checkpoints.len() && checkpoints[next] == n {
            greenwood.push((n, gs));
            wachtel.push((n, ws));
            next += 1;
        }
    }
    let verdict = match b.analytic_l_finite() {
        Some(true) => LVerdict::Finite,
        Some(false) => LVerdict::Infinite,
        None => LVerdict::EvidenceOnly,
    };
    Ok(LInfinityReport { verdict, greenwood_partial_sums: greenwood, wachtel_partial_sums: wachtel })
}
