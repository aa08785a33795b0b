//! Closed-form asymptotic laws and the auxiliary integral identities.

use std::f64::consts::FRAC_2_PI;
use std::fmt;
use std::str::FromStr;

use crate::error::{domain, Error, Result};
use crate::quadrature::{integrate, Tolerance};
use crate::special::{gauss_integral, SQRT_2PI};
use crate::walk_sim::LadderStats;

/// Regime of the threshold `k` relative to the return time `n`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum RegimeLabel {
    /// `lim k/n < 1`.
    Far,
    /// `|g_k| = o(sqrt(n-k))`.
    NearSmall,
    /// `|g_k| = Θ(sqrt(n-k))`.
    NearCritical,
    /// `|g_k| = ω(sqrt(n-k))` with `g_k < 0`.
    NearLarge,
}

impl RegimeLabel {
    pub fn as_str(&self) -> &'static str {
        match self {
            RegimeLabel::Far => "far",
            RegimeLabel::NearSmall => "near_small",
            RegimeLabel::NearCritical => "near_critical",
            RegimeLabel::NearLarge => "near_large",
        }
    }
}

impl fmt::Display for RegimeLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for RegimeLabel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().replace('-', "_").as_str() {
            "far" => Ok(RegimeLabel::Far),
            "near_small" | "small" => Ok(RegimeLabel::NearSmall),
            "near_critical" | "critical" => Ok(RegimeLabel::NearCritical),
            "near_large" | "large" => Ok(RegimeLabel::NearLarge),
            other => Err(Error::Config(format!("unknown regime `{other}`"))),
        }
    }
}

/// `γ(y) = e^{-y²/2} - y ∫_y^∞ e^{-x²/2} dx` for `y ≥ 0`.
pub fn gamma_fn(y: f64) -> Result<f64> {
    if !(y >= 0.0) {
        return Err(domain(format!("γ is defined here for y >= 0, got {y}")));
    }
    Ok(gamma_signed(y))
}

/// The same expression for any real `y`. For `y < 0` it grows like
/// `sqrt(2π)|y|`.
pub fn gamma_signed(y: f64) -> f64 {
    if y.is_infinite() {
        return if y > 0.0 { 0.0 } else { f64::INFINITY };
    }
    if y <= 3.0 {
        return (-0.5 * y * y).exp() - y * gauss_integral(y, f64::INFINITY);
    }
    // Mills ratio R(y) = 1/(y + T), T = 1/(y + 2/(y + 3/(y + …))), so that
    // 1 - yR(y) = T/(y + T) without cancellation.
    let mut t = 0.0;
    for j in (2..=80).rev() {
        t = j as f64 / (y + t);
    }
    let tail = 1.0 / (y + t);
    (-0.5 * y * y).exp() * tail / (y + tail)
}

fn check_nk(n: usize, k: usize) -> Result<()> {
    if k == 0 || k >= n {
        return Err(domain(format!("need 1 <= k < n, got n={n}, k={k}")));
    }
    Ok(())
}

/// `sqrt(2/π) L sqrt((n-k)/n) / sqrt(k)`.
pub fn theorem1_value(n: usize, k: usize, l: f64) -> Result<f64> {
    check_nk(n, k)?;
    let (n, k) = (n as f64, k as f64);
    Ok(FRAC_2_PI.sqrt() * l * ((n - k) / n).sqrt() / k.sqrt())
}

/// The near-threshold law for the given regime.
///
/// The critical line is evaluated at the signed argument `g_k/sqrt(n-k)`.
/// For `g_k ≤ 0` this matches `γ(|g_k|/sqrt(n-k))` only at `g_k = 0`; the
/// signed form is what joins the small and large regimes (`γ(-η) ~
/// sqrt(2π) η`), and it reduces to the absolute-value form for `g_k > 0`.
pub fn theorem2_value(n: usize, k: usize, l: f64, g_k: f64, regime: RegimeLabel) -> Result<f64> {
    check_nk(n, k)?;
    let m = (n - k) as f64;
    let k = k as f64;
    match regime {
        RegimeLabel::Far => Err(Error::RegimeMismatch("the near-threshold law does not cover the far regime".into())),
        RegimeLabel::NearSmall => Ok(FRAC_2_PI.sqrt() * l * m.sqrt() / k),
        RegimeLabel::NearCritical => Ok(FRAC_2_PI.sqrt() * l * gamma_signed(g_k / m.sqrt()) * m.sqrt() / k),
        RegimeLabel::NearLarge => {
            if !(g_k < 0.0) {
                return Err(Error::RegimeMismatch(format!("large regime needs g_k < 0, got {g_k}")));
            }
            Ok(2.0 * l * g_k.abs() / k)
        }
    }
}

/// The critical line exactly as displayed, with `γ(|g_k|/sqrt(n-k))`.
pub fn theorem2_critical_abs(n: usize, k: usize, l: f64, g_k: f64) -> Result<f64> {
    check_nk(n, k)?;
    let m = (n - k) as f64;
    Ok(FRAC_2_PI.sqrt() * l * gamma_signed(g_k.abs() / m.sqrt()) * m.sqrt() / k as f64)
}

/// [`theorem1_value`] for the far regime, [`theorem2_value`] otherwise.
pub fn regime_value(n: usize, k: usize, l: f64, g_k: f64, regime: RegimeLabel) -> Result<f64> {
    match regime {
        RegimeLabel::Far => theorem1_value(n, k, l),
        _ => theorem2_value(n, k, l, g_k, regime),
    }
}

/// `e^{-v²/2}`.
pub fn rayleigh_tail(v: f64) -> Result<f64> {
    if !(v >= 0.0) {
        return Err(domain(format!("v must be nonnegative, got {v}")));
    }
    Ok((-0.5 * v * v).exp())
}

/// `sqrt(2/π) L / sqrt(k)`.
pub fn tau_tail_value(k: usize, l: f64) -> Result<f64> {
    if k == 0 {
        return Err(domain("k must be positive"));
    }
    Ok(FRAC_2_PI.sqrt() * l / (k as f64).sqrt())
}

/// Transition density of Brownian motion killed at 0 over unit time.
pub fn meander_density_q(u: f64, v: f64) -> Result<f64> {
    if !(u > 0.0 && v > 0.0) {
        return Err(domain(format!("q(u, v) needs u, v > 0, got ({u}, {v})")));
    }
    // e^{-(u-v)²/2} (1 - e^{-2uv})
    Ok(-(-0.5 * (u - v).powi(2)).exp() * (-2.0 * u * v).exp_m1() / SQRT_2PI)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DoneyRegime {
    /// Start and end both `o(sqrt(n))`.
    I,
    /// Start `o(sqrt(n))`, end of order `sqrt(n)`.
    IIa,
    /// Start of order `sqrt(n)`, end `o(sqrt(n))`.
    IIb,
    /// Both of order `sqrt(n)`.
    III,
}

impl FromStr for DoneyRegime {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "i" => Ok(DoneyRegime::I),
            "ii_a" | "iia" => Ok(DoneyRegime::IIa),
            "ii_b" | "iib" => Ok(DoneyRegime::IIb),
            "iii" => Ok(DoneyRegime::III),
            other => Err(Error::Config(format!("unknown Doney regime `{other}`"))),
        }
    }
}

/// Approximate `P(S_n ∈ [y, y+Δ), T_0 > n | S_0 = x)` in the given regime.
///
/// Positions beyond `sqrt(n)` are rejected where the regime needs them to be
/// small; the scaling itself is the caller's assertion.
pub fn doney_regime_density(
    regime: DoneyRegime,
    x: f64,
    y: f64,
    n: usize,
    delta: f64,
    ladder: &LadderStats,
) -> Result<f64> {
    if n == 0 || !(delta > 0.0) || !(x >= 0.0) || !(y >= 0.0) {
        return Err(domain("need n >= 1, Δ > 0 and x, y >= 0"));
    }
    let nf = n as f64;
    let sn = nf.sqrt();
    let small = |z: f64| z <= sn;
    let mismatch = |what: &str| Err(Error::RegimeMismatch(format!("regime {regime:?} needs {what}")));
    match regime {
        DoneyRegime::I => {
            if !(small(x) && small(y)) {
                return mismatch("x, y = o(sqrt(n))");
            }
            Ok(ladder.v(x) * ladder.u_integral(y, y + delta) / (SQRT_2PI * nf.powf(1.5)))
        }
        DoneyRegime::IIa => {
            if !small(x) {
                return mismatch("x = o(sqrt(n))");
            }
            Ok(FRAC_2_PI.sqrt() * ladder.mean_descending * ladder.v(x) * delta / sn * (y / nf) * (-y * y / (2.0 * nf)).exp())
        }
        DoneyRegime::IIb => {
            if !small(y) {
                return mismatch("y = o(sqrt(n))");
            }
            Ok(FRAC_2_PI.sqrt() * ladder.mean_ascending_dual * ladder.u(y) * delta / sn * (x / nf) * (-x * x / (2.0 * nf)).exp())
        }
        DoneyRegime::III => {
            if !(x > 0.0 && y > 0.0) {
                return mismatch("x, y > 0");
            }
            Ok(delta * meander_density_q(x / sn, y / sn)? / sn)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Prop2Branch {
    /// `t = o(sqrt(k))`.
    SmallT,
    /// `t` of order `sqrt(k)`.
    LargeT,
}

/// Approximate density `P(S_k ∈ dt; τ_g > k)/dt`.
pub fn prop2_density(t: f64, k: usize, l: f64, g_k: f64, ladder: &LadderStats, branch: Prop2Branch) -> Result<f64> {
    if k == 0 || !(t >= g_k) {
        return Err(domain(format!("need k >= 1 and t >= g_k, got t={t}, g_k={g_k}")));
    }
    let kf = k as f64;
    let pre = FRAC_2_PI.sqrt() * l / kf.powf(1.5);
    match branch {
        Prop2Branch::SmallT => {
            if t > kf.sqrt() {
                return Err(Error::RegimeMismatch(format!("small-t branch needs t = o(sqrt(k)), got t={t}")));
            }
            Ok(pre * ladder.mean_ascending_dual * ladder.u(t - g_k))
        }
        Prop2Branch::LargeT => {
            if t < 0.1 * kf.sqrt() {
                return Err(Error::RegimeMismatch(format!("large-t branch needs t of order sqrt(k), got t={t}")));
            }
            Ok(pre * t * (-t * t / (2.0 * kf)).exp())
        }
    }
}

fn check_eps(eps: f64) -> Result<f64> {
    if !(eps > 0.0 && eps < 1.0) {
        return Err(domain(format!("ε must lie in (0, 1), got {eps}")));
    }
    Ok(eps * (1.0 - eps))
}

/// `∫_x^∞ y² e^{-y²/(2ε(1-ε))} dy` in closed form.
pub fn lemma_b1(x: f64, eps: f64) -> Result<f64> {
    let s = check_eps(eps)?;
    if !(x >= 0.0) {
        return Err(domain(format!("x must be nonnegative, got {x}")));
    }
    let r = s.sqrt();
    Ok(x * s * (-x * x / (2.0 * s)).exp() + s * r * gauss_integral(x / r, f64::INFINITY))
}

fn b2_integrand(y: f64, c: f64, eps: f64) -> f64 {
    let w = y / (1.0 - eps) * (-y * y / (2.0 * (1.0 - eps))).exp();
    // e^{-(y-c)²/2ε} - e^{-(y+c)²/2ε} = e^{-(y-c)²/2ε} (1 - e^{-2yc/ε})
    w * -(-(y - c).powi(2) / (2.0 * eps)).exp() * (-2.0 * y * c / eps).exp_m1()
}

/// `∫_0^∞ y/(1-ε) e^{-y²/(2(1-ε))} (e^{-(y-c)²/2ε} - e^{-(y+c)²/2ε}) dy`.
pub fn lemma_b2_full(c: f64, eps: f64) -> Result<f64> {
    let s = check_eps(eps)?;
    if !(c > 0.0) {
        return Err(domain(format!("c must be positive, got {c}")));
    }
    Ok(SQRT_2PI * s.sqrt() * c * (-0.5 * c * c).exp())
}

/// The same integral over `[0, x]`.
pub fn lemma_b2_partial(x: f64, c: f64, eps: f64) -> Result<f64> {
    let s = check_eps(eps)?;
    if !(c > 0.0) || !(x >= 0.0) {
        return Err(domain(format!("need c > 0 and x >= 0, got c={c}, x={x}")));
    }
    if x == f64::INFINITY {
        return lemma_b2_full(c, eps);
    }
    // Completing the square gives e^{-c²/2}/(1-ε) ∫_0^x y (e^{-(y-μ)²/2s} - e^{-(y+μ)²/2s}) dy
    // with μ = (1-ε)c and s = ε(1-ε).
    let mu = (1.0 - eps) * c;
    let r = s.sqrt();
    let exps = s * (-(x - mu).powi(2) / (2.0 * s)).exp() * (-2.0 * x * mu / s).exp_m1();
    let gauss = mu * r * (gauss_integral(-mu / r, (x - mu) / r) + gauss_integral(mu / r, (x + mu) / r));
    Ok((-0.5 * c * c).exp() / (1.0 - eps) * (exps + gauss))
}

/// `1 - e^{-x²/(2(1-ε))}`, an upper bound for [`lemma_b2_partial`].
pub fn lemma_b2_bound(x: f64, eps: f64) -> Result<f64> {
    check_eps(eps)?;
    if !(x >= 0.0) {
        return Err(domain(format!("x must be nonnegative, got {x}")));
    }
    Ok(-(-x * x / (2.0 * (1.0 - eps))).exp_m1())
}

/// `∫_a^b y e^{-(y+g_k)²/(2(n-k))} dy` for `0 ≤ a ≤ b ≤ ∞`.
pub fn lemma_b3(a: f64, b: f64, g_k: f64, n: usize, k: usize) -> Result<f64> {
    check_nk(n, k)?;
    if !(a >= 0.0 && a <= b) {
        return Err(domain(format!("need 0 <= a <= b, got a={a}, b={b}")));
    }
    let m = (n - k) as f64;
    let r = m.sqrt();
    let ea = (-(a + g_k).powi(2) / (2.0 * m)).exp();
    let eb = if b.is_infinite() { 0.0 } else { (-(b + g_k).powi(2) / (2.0 * m)).exp() };
    Ok(m * (ea - eb) - g_k * r * gauss_integral((a + g_k) / r, (b + g_k) / r))
}

/// One closed-form evaluation checked against quadrature.
#[derive(Debug, Clone)]
pub struct IdentityCase {
    pub lemma: &'static str,
    pub params: Vec<f64>,
    pub closed_form: f64,
    pub quadrature: f64,
    pub rel_error: f64,
}

#[derive(Debug, Clone)]
pub struct IdentityReport {
    pub cases: Vec<IdentityCase>,
    pub max_rel_error: f64,
    /// Cases where the partial B2 integral exceeds its bound.
    pub bound_violations: usize,
}

impl IdentityReport {
    pub fn worst(&self) -> Option<&IdentityCase> {
        self.cases.iter().max_by(|a, b| a.rel_error.total_cmp(&b.rel_error))
    }
}

fn oracle(f: impl FnMut(f64) -> f64, a: f64, b: f64) -> f64 {
    integrate(f, a, b, Tolerance { abs: 0.0, rel: 1e-14, max_intervals: 4000 }).value
}

fn lattice(lo: f64, hi: f64) -> impl Iterator<Item = f64> + Clone {
    (0..10).map(move |i| lo + (hi - lo) * i as f64 / 9.0)
}

/// Closed forms of the integral identities against adaptive quadrature of
/// their left-hand sides, each over a 10×10 parameter lattice.
pub fn appendix_b_lattice_check() -> IdentityReport {
    let mut cases = Vec::new();
    let mut push = |lemma, params: Vec<f64>, closed: f64, quad: f64| {
        let rel_error = ((closed - quad) / quad).abs();
        cases.push(IdentityCase { lemma, params, closed_form: closed, quadrature: quad, rel_error });
    };
    let eps_grid = lattice(0.05, 0.95);

    for eps in eps_grid.clone() {
        let s = eps * (1.0 - eps);
        for x in lattice(0.0, 2.0) {
            let quad = oracle(|y| y * y * (-y * y / (2.0 * s)).exp(), x, f64::INFINITY);
            push("B1", vec![x, eps], lemma_b1(x, eps).unwrap(), quad);
        }
    }
    for eps in eps_grid.clone() {
        for c in lattice(0.25, 4.0) {
            let quad = oracle(|y| b2_integrand(y, c, eps), 0.0, f64::INFINITY);
            push("B2", vec![c, eps], lemma_b2_full(c, eps).unwrap(), quad);
        }
    }
    let mut bound_violations = 0;
    for eps in [0.2, 0.5, 0.8] {
        for c in lattice(0.25, 4.0) {
            for x in lattice(0.2, 5.0) {
                let quad = oracle(|y| b2_integrand(y, c, eps), 0.0, x);
                let closed = lemma_b2_partial(x, c, eps).unwrap();
                if closed > lemma_b2_bound(x, eps).unwrap() {
                    bound_violations += 1;
                }
                push("B2 partial", vec![x, c, eps], closed, quad);
            }
        }
    }
    for m in [4usize, 9, 25, 64, 100, 225, 400, 900, 1600, 3600] {
        let n = m + 100;
        let r = (m as f64).sqrt();
        for g in lattice(-2.5, 2.5) {
            let g = g * r;
            let f = |y: f64| y * (-(y + g).powi(2) / (2.0 * m as f64)).exp();
            push("B3", vec![0.0, f64::INFINITY, g, n as f64, 100.0], lemma_b3(0.0, f64::INFINITY, g, n, 100).unwrap(), oracle(f, 0.0, f64::INFINITY));
            let (a, b) = (0.3 * r, 2.0 * r);
            push("B3", vec![a, b, g, n as f64, 100.0], lemma_b3(a, b, g, n, 100).unwrap(), oracle(f, a, b));
        }
    }
    let max_rel_error = cases.iter().map(|c| c.rel_error).fold(0.0, f64::max);
    IdentityReport { cases, max_rel_error, bound_violations }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quadrature::quad;
    use std::f64::consts::PI;

    #[test]
    fn gamma_values() {
        assert_eq!(gamma_fn(0.0).unwrap(), 1.0);
        assert!(gamma_fn(8.0).unwrap() < 1e-10);
        assert!(gamma_fn(8.0).unwrap() > 0.0);
        assert!(gamma_fn(-0.1).is_err());
        let oracle = (-0.5f64).exp() - quad(|x| (-0.5 * x * x).exp(), 1.0, f64::INFINITY);
        assert!((gamma_fn(1.0).unwrap() - oracle).abs() < 1e-12);
        assert!((gamma_fn(1.0).unwrap() - 0.208_84).abs() < 1e-5);
    }

    #[test]
    fn gamma_branches_join() {
        // direct and continued-fraction forms agree near the switch
        let y: f64 = 3.0;
        let direct = (-0.5 * y * y).exp() - y * gauss_integral(y, f64::INFINITY);
        let mut t = 0.0;
        for j in (2..=80).rev() {
            t = j as f64 / (y + t);
        }
        let tail = 1.0 / (y + t);
        let cf = (-0.5 * y * y).exp() * tail / (y + tail);
        assert!(((direct - cf) / cf).abs() < 1e-11);
    }

    #[test]
    fn gamma_large_argument_against_quadrature() {
        for y in [3.5, 5.0, 7.0, 10.0] {
            // γ(y) = ∫_y^∞ (x - y) e^{-x²/2} dx
            let q = quad(|x| (x - y) * (-0.5 * x * x).exp(), y, f64::INFINITY);
            assert!(((gamma_signed(y) - q) / q).abs() < 1e-10, "y={y}");
        }
    }

    #[test]
    fn signed_gamma_grows_linearly() {
        let eta = 40.0;
        let ratio = gamma_signed(-eta) / (SQRT_2PI * eta);
        assert!((ratio - 1.0).abs() < 1e-3);
    }

    #[test]
    fn theorem_values() {
        let k = 100;
        let v = theorem1_value(2 * k, k, 1.3).unwrap();
        assert!((v - 1.3 / (PI * k as f64).sqrt()).abs() < 1e-15);
        let a = theorem1_value(400, 100, 2.0).unwrap();
        let b = theorem1_value(1600, 400, 2.0).unwrap();
        assert!((a / b - 2.0).abs() < 1e-14);
        assert!(theorem1_value(10, 10, 1.0).is_err());
        let (n, k) = (10_000, 9_900);
        let r = theorem2_value(n, k, 1.0, -1.0, RegimeLabel::NearSmall).unwrap() / theorem1_value(n, k, 1.0).unwrap();
        assert!((0.99..=1.01).contains(&r));
        assert!(theorem2_value(n, k, 1.0, 1.0, RegimeLabel::NearLarge).is_err());
        assert!(theorem2_value(n, k, 1.0, 1.0, RegimeLabel::Far).is_err());
    }

    #[test]
    fn critical_line_joins_neighbours() {
        let (n, k) = (1_000_000, 999_900);
        let small = theorem2_value(n, k, 1.0, -1e-9, RegimeLabel::NearSmall).unwrap();
        let crit = theorem2_value(n, k, 1.0, -1e-9, RegimeLabel::NearCritical).unwrap();
        assert!((crit / small - 1.0).abs() < 1e-9);
        let g = -500.0; // η = 50
        let crit = theorem2_value(n, k, 1.0, g, RegimeLabel::NearCritical).unwrap();
        let large = theorem2_value(n, k, 1.0, g, RegimeLabel::NearLarge).unwrap();
        assert!((crit / large - 1.0).abs() < 1e-3);
    }

    #[test]
    fn tails_and_meander() {
        assert_eq!(rayleigh_tail(0.0).unwrap(), 1.0);
        assert!((rayleigh_tail((2.0 * 2f64.ln()).sqrt()).unwrap() - 0.5).abs() < 1e-15);
        assert!(rayleigh_tail(-1.0).is_err());
        assert!((tau_tail_value(1, 1.0).unwrap() - FRAC_2_PI.sqrt()).abs() < 1e-15);
        assert!((tau_tail_value(400, 1.0).unwrap() * 2.0 - tau_tail_value(100, 1.0).unwrap()).abs() < 1e-15);
        let q = meander_density_q(1.0, 1.0).unwrap();
        assert!((q - (1.0 - (-2.0f64).exp()) / SQRT_2PI).abs() < 1e-15);
        assert!((meander_density_q(0.4, 2.2).unwrap() - meander_density_q(2.2, 0.4).unwrap()).abs() < 1e-16);
        assert!(meander_density_q(0.0, 1.0).is_err());
        for u in [0.3, 1.0, 2.5] {
            let total = quad(|v| if v > 0.0 { meander_density_q(u, v).unwrap() } else { 0.0 }, 0.0, f64::INFINITY);
            let expected = 2.0 * crate::special::normal_cdf(u) - 1.0;
            assert!((total - expected).abs() < 1e-10);
        }
    }

    #[test]
    fn doney_plug_ins() {
        let ladder = LadderStats::asymptotic(0.5f64.sqrt(), 0.5f64.sqrt(), 50.0, 501);
        let n = 10_000;
        let sn = 100.0;
        let v = doney_regime_density(DoneyRegime::III, sn, sn, n, 0.1, &ladder).unwrap();
        assert!((v - 0.1 * meander_density_q(1.0, 1.0).unwrap() / sn).abs() < 1e-15);
        assert!(doney_regime_density(DoneyRegime::I, 500.0, 1.0, n, 0.1, &ladder).is_err());
    }

    #[test]
    fn prop2_plug_ins() {
        let ladder = LadderStats::asymptotic(1.0, 0.5, 100.0, 1001);
        let k = 10_000;
        let v = prop2_density(100.0, k, 1.5, -1.0, &ladder, Prop2Branch::LargeT).unwrap();
        assert!((v - FRAC_2_PI.sqrt() * 1.5 * (-0.5f64).exp() / k as f64).abs() < 1e-15);
        let t = 10.0;
        let v = prop2_density(t, k, 1.5, -1.0, &ladder, Prop2Branch::SmallT).unwrap();
        let lin = FRAC_2_PI.sqrt() * 1.5 * (t + 1.0) / (k as f64).powf(1.5);
        assert!((v / lin - 1.0).abs() < 1e-12);
        assert!(prop2_density(500.0, k, 1.0, 0.0, &ladder, Prop2Branch::SmallT).is_err());
        assert!(prop2_density(-2.0, k, 1.0, 0.0, &ladder, Prop2Branch::LargeT).is_err());
    }

    #[test]
    fn lemma_plug_ins() {
        let s: f64 = 0.25 * 0.75;
        assert!((lemma_b1(0.0, 0.25).unwrap() - s.powf(1.5) * (PI / 2.0).sqrt()).abs() < 1e-15);
        let v = lemma_b2_full(1.0, 0.5).unwrap();
        assert!((v - SQRT_2PI * 0.5 * (-0.5f64).exp()).abs() < 1e-15);
        let full = lemma_b3(0.0, f64::INFINITY, -3.0, 110, 100).unwrap();
        let m = 10.0f64;
        let display = m * (-9.0 / (2.0 * m)).exp() + 3.0 * m.sqrt() * gauss_integral(-3.0 / m.sqrt(), f64::INFINITY);
        assert!((full - display).abs() < 1e-12);
        // the particular case is m·γ(g/sqrt(m))
        assert!((full - m * gamma_signed(-3.0 / m.sqrt())).abs() < 1e-12);
        assert!((lemma_b2_partial(f64::INFINITY, 1.0, 0.5).unwrap() - v).abs() < 1e-15);
        assert!((lemma_b2_partial(50.0, 1.0, 0.5).unwrap() - v).abs() < 1e-14);
        assert!(lemma_b1(1.0, 1.0).is_err());
        assert!(lemma_b3(2.0, 1.0, 0.0, 10, 5).is_err());
    }

    #[test]
    fn lattice_check_passes() {
        let report = appendix_b_lattice_check();
        assert!(report.max_rel_error <= 1e-10, "{:?}", report.worst());
        assert_eq!(report.bound_violations, 0);
        assert!(report.cases.len() >= 400);
    }
}
