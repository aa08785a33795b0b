//! Command-line flags, the optional config file, and their validated merge.

use std::collections::BTreeMap;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use passage::asymptotics::RegimeLabel;
use passage::{BoundarySequence, GridConfig, IncrementModel, KRule, Method};

use crate::table::Format;

#[derive(Debug, Parser)]
#[command(name = "passage", version, about = "First-passage experiments for random walk bridges")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Conditional survival of the bridge by Monte Carlo or the kernel.
    Survival(Flags),
    /// Estimates against the asymptotic law along an n-ladder.
    Sweep(Flags),
    /// Ladder-height means and their product.
    Ladder(Flags),
    /// Both displays of the boundary constant L_g(k).
    Lg(Flags),
    /// Survivor-conditioned tails against the Rayleigh limit.
    Rayleigh(Flags),
    /// Cascade size probabilities by four routes and the limit law.
    Cascade(Flags),
    /// Deterministic kernel value of the bridge survival probability.
    Oracle(Flags),
    /// Closed forms of the auxiliary integrals against quadrature.
    Identities(Flags),
}

impl Command {
    pub fn split(self) -> (&'static str, Flags) {
        match self {
            Command::Survival(f) => ("survival", f),
            Command::Sweep(f) => ("sweep", f),
            Command::Ladder(f) => ("ladder", f),
            Command::Lg(f) => ("lg", f),
            Command::Rayleigh(f) => ("rayleigh", f),
            Command::Cascade(f) => ("cascade", f),
            Command::Oracle(f) => ("oracle", f),
            Command::Identities(f) => ("identities", f),
        }
    }
}

#[derive(Debug, Clone, Default, Args)]
pub struct Flags {
    /// gaussian, exponential or uniform.
    #[arg(long)]
    pub model: Option<String>,
    /// const:C, power:C:A, log:C, none or table:PATH.
    #[arg(long)]
    pub boundary: Option<String>,
    /// Comma-separated list.
    #[arg(long)]
    pub n: Option<String>,
    /// Integer list, frac:F or pow:P.
    #[arg(long)]
    pub k: Option<String>,
    #[arg(long)]
    pub reps: Option<u64>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Node budget of the kernel grid.
    #[arg(long)]
    pub grid_nodes: Option<usize>,
    /// Kernel grid spacing.
    #[arg(long)]
    pub spacing: Option<f64>,
    #[arg(long, value_enum)]
    pub format: Option<Format>,
    #[arg(long)]
    pub threads: Option<usize>,
    /// File of `key = value` lines using the flag names; flags win.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// far, near_small, near_critical or near_large.
    #[arg(long)]
    pub regime: Option<String>,
    /// bridge_direct, weighted, window or kernel.
    #[arg(long)]
    pub method: Option<String>,
    /// Comma-separated tail points for `rayleigh`.
    #[arg(long)]
    pub v: Option<String>,
    /// Cascade offset.
    #[arg(long)]
    pub theta: Option<f64>,
    /// Cascade perturbation g(i), in boundary syntax.
    #[arg(long)]
    pub perturbation: Option<String>,
    /// Largest tabulated ladder height.
    #[arg(long)]
    pub height_max: Option<f64>,
    /// Half-width for the window estimator.
    #[arg(long)]
    pub delta: Option<f64>,
}

pub const CONFIG_KEYS: [&str; 19] = [
    "model", "boundary", "n", "k", "reps", "seed", "out", "grid-nodes", "spacing", "format", "threads", "regime", "method", "v",
    "theta", "perturbation", "height-max", "delta", "command",
];

#[derive(Debug, thiserror::Error)]
pub enum SettingsError {
    #[error("{0}")]
    Invalid(String),
    #[error("numerical diagnostic: {0}")]
    Numerical(String),
    #[error(transparent)]
    Core(#[from] passage::Error),
}

impl SettingsError {
    pub fn exit_code(&self) -> u8 {
        match self {
            SettingsError::Invalid(_) => 2,
            SettingsError::Numerical(_) => 3,
            SettingsError::Core(e) if e.is_numerical() => 3,
            SettingsError::Core(_) => 2,
        }
    }
}

fn invalid(msg: impl Into<String>) -> SettingsError {
    SettingsError::Invalid(msg.into())
}

/// Which `k` to use for each `n`.
#[derive(Debug, Clone, PartialEq)]
pub enum KSpec {
    Rule(KRule),
    Fixed(Vec<usize>),
}

impl KSpec {
    fn parse(s: &str) -> Result<Self, SettingsError> {
        if s.contains(':') {
            return Ok(KSpec::Rule(s.parse()?));
        }
        Ok(KSpec::Fixed(parse_list(s, "k")?))
    }

    /// A single fixed `k` applies to every `n`; a list pairs up with `ns`.
    pub fn pair_with(&self, ns: &[usize]) -> Result<Vec<(usize, usize)>, SettingsError> {
        match self {
            KSpec::Rule(rule) => ns.iter().map(|&n| Ok((n, rule.k_for(n)?))).collect(),
            KSpec::Fixed(ks) if ks.len() == 1 => Ok(ns.iter().map(|&n| (n, ks[0])).collect()),
            KSpec::Fixed(ks) if ks.len() == ns.len() => Ok(ns.iter().copied().zip(ks.iter().copied()).collect()),
            KSpec::Fixed(ks) => Err(invalid(format!("--k has {} values but --n has {}", ks.len(), ns.len()))),
        }
    }
}

impl std::fmt::Display for KSpec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            KSpec::Rule(r) => write!(f, "{r}"),
            KSpec::Fixed(ks) => {
                let parts: Vec<String> = ks.iter().map(|k| k.to_string()).collect();
                f.write_str(&parts.join(","))
            }
        }
    }
}

fn parse_list<T: std::str::FromStr>(s: &str, key: &str) -> Result<Vec<T>, SettingsError> {
    let items: Result<Vec<T>, _> = s.split(',').map(|p| p.trim().parse::<T>()).collect();
    match items {
        Ok(v) if !v.is_empty() => Ok(v),
        _ => Err(invalid(format!("bad list `{s}` for --{key}"))),
    }
}

/// Everything a command needs, validated.
#[derive(Debug, Clone)]
pub struct Settings {
    pub command: &'static str,
    pub model: IncrementModel,
    pub boundary: BoundarySequence,
    pub ns: Option<Vec<usize>>,
    pub k: Option<KSpec>,
    pub reps: u64,
    pub seed: u64,
    pub out: Option<PathBuf>,
    pub grid: GridConfig,
    pub format: Format,
    pub threads: Option<usize>,
    pub regime: RegimeLabel,
    pub method: Option<Method>,
    pub vs: Vec<f64>,
    pub theta: f64,
    pub perturbation: Option<BoundarySequence>,
    pub height_max: f64,
    pub delta: f64,
}

impl Settings {
    pub fn ns(&self) -> Result<&[usize], SettingsError> {
        self.ns.as_deref().ok_or_else(|| invalid(format!("`{}` needs --n", self.command)))
    }

    pub fn pairs(&self, default: KRule) -> Result<Vec<(usize, usize)>, SettingsError> {
        let k = self.k.clone().unwrap_or(KSpec::Rule(default));
        k.pair_with(self.ns()?)
    }

    /// Seed and inputs for the CSV comment line.
    pub fn metadata(&self) -> String {
        let mut parts = vec![
            format!("passage {}", env!("CARGO_PKG_VERSION")),
            format!("command={}", self.command),
            format!("seed={}", self.seed),
            format!("model={}", self.model),
            format!("boundary={}", self.boundary),
        ];
        if let Some(ns) = &self.ns {
            let ns: Vec<String> = ns.iter().map(|n| n.to_string()).collect();
            parts.push(format!("n={}", ns.join(";")));
        }
        if let Some(k) = &self.k {
            parts.push(format!("k={}", k.to_string().replace(',', ";")));
        }
        parts.push(format!("reps={}", self.reps));
        parts.join(" ")
    }
}

/// Reads `key = value` lines; `#` starts a comment.
pub fn read_config(text: &str) -> Result<BTreeMap<String, String>, SettingsError> {
    let mut map = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| invalid(format!("config line {}: expected key = value", i + 1)))?;
        let key = key.trim().replace('_', "-");
        if !CONFIG_KEYS.contains(&key.as_str()) {
            return Err(invalid(format!("config line {}: unknown key `{key}`", i + 1)));
        }
        if map.insert(key.clone(), value.trim().to_string()).is_some() {
            return Err(invalid(format!("config line {}: repeated key `{key}`", i + 1)));
        }
    }
    Ok(map)
}

fn pick<T: std::str::FromStr>(flag: Option<T>, file: &BTreeMap<String, String>, key: &str) -> Result<Option<T>, SettingsError> {
    if flag.is_some() {
        return Ok(flag);
    }
    file.get(key)
        .map(|v| v.parse::<T>().map_err(|_| invalid(format!("bad value `{v}` for `{key}` in config"))))
        .transpose()
}

fn pick_str(flag: Option<String>, file: &BTreeMap<String, String>, key: &str) -> Option<String> {
    flag.or_else(|| file.get(key).cloned())
}

impl std::str::FromStr for Format {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        <Format as clap::ValueEnum>::from_str(s, true)
    }
}

/// Merges flags over the config file and validates every field.
pub fn resolve(command: &'static str, flags: Flags) -> Result<Settings, SettingsError> {
    let file = match &flags.config {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| invalid(format!("cannot read {}: {e}", path.display())))?;
            read_config(&text)?
        }
        None => BTreeMap::new(),
    };
    if let Some(c) = file.get("command") {
        if c != command {
            return Err(invalid(format!("config is for `{c}`, not `{command}`")));
        }
    }
    let model: IncrementModel = pick_str(flags.model, &file, "model").unwrap_or_else(|| "gaussian".into()).parse()?;
    let boundary: BoundarySequence = pick_str(flags.boundary, &file, "boundary").unwrap_or_else(|| "const:-1".into()).parse()?;
    let ns = pick_str(flags.n, &file, "n").map(|s| parse_list::<usize>(&s, "n")).transpose()?;
    if let Some(ns) = &ns {
        if ns.contains(&0) {
            return Err(invalid("--n values must be positive"));
        }
    }
    let k = pick_str(flags.k, &file, "k").map(|s| KSpec::parse(&s)).transpose()?;
    let reps = pick(flags.reps, &file, "reps")?.unwrap_or(100_000);
    if reps < 2 {
        return Err(invalid("--reps must be at least 2"));
    }
    let seed = pick(flags.seed, &file, "seed")?.unwrap_or(1);
    let out = pick_str(flags.out.map(|p| p.display().to_string()), &file, "out").map(PathBuf::from);
    let mut grid = GridConfig::default();
    if let Some(nodes) = pick(flags.grid_nodes, &file, "grid-nodes")? {
        if nodes < 100 {
            return Err(invalid("--grid-nodes must be at least 100"));
        }
        grid = grid.with_max_nodes(nodes);
    }
    if let Some(h) = pick(flags.spacing, &file, "spacing")? {
        if !(h > 0.0 && h <= grid.max_spacing) {
            return Err(invalid(format!("--spacing must lie in (0, {}]", grid.max_spacing)));
        }
        grid = grid.with_spacing(h);
    }
    let format = pick(flags.format, &file, "format")?.unwrap_or(Format::Csv);
    let threads = pick(flags.threads, &file, "threads")?;
    if threads == Some(0) {
        return Err(invalid("--threads must be positive"));
    }
    let regime: RegimeLabel = pick_str(flags.regime, &file, "regime").unwrap_or_else(|| "far".into()).parse()?;
    let method = pick_str(flags.method, &file, "method").map(|m| m.parse::<Method>()).transpose()?;
    let vs = match pick_str(flags.v, &file, "v") {
        Some(s) => parse_list::<f64>(&s, "v")?,
        None => vec![0.5, 1.0, 2.0],
    };
    if vs.iter().any(|v| !(*v >= 0.0)) {
        return Err(invalid("--v values must be nonnegative"));
    }
    let theta = pick(flags.theta, &file, "theta")?.unwrap_or(1.0);
    if !(theta >= 0.0 && theta.is_finite()) {
        return Err(invalid("--theta must be finite and nonnegative"));
    }
    let perturbation = pick_str(flags.perturbation, &file, "perturbation").map(|s| s.parse::<BoundarySequence>()).transpose()?;
    let height_max = pick(flags.height_max, &file, "height-max")?.unwrap_or(10.0);
    if !(height_max > 0.0) {
        return Err(invalid("--height-max must be positive"));
    }
    let delta = pick(flags.delta, &file, "delta")?.unwrap_or(0.1);
    if !(delta > 0.0) {
        return Err(invalid("--delta must be positive"));
    }
    Ok(Settings {
        command,
        model,
        boundary,
        ns,
        k,
        reps,
        seed,
        out,
        grid,
        format,
        threads,
        regime,
        method,
        vs,
        theta,
        perturbation,
        height_max,
        delta,
    })
}
