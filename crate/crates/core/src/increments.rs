//! Increment laws with zero mean, unit variance and a density.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use rand::Rng;
use rand_distr::{Exp1, StandardNormal};

use crate::density_kernel::{unkilled_density, GridConfig, KilledDensityGrid};
use crate::error::{domain, Error, Result};
use crate::quadrature::{integrate, Tolerance};
use crate::special::{gamma_pdf, normal_cdf, normal_pdf, normal_pdf_scaled, normal_sf};

const SQRT_3: f64 = 1.732_050_807_568_877_2;

type RealFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// A user-supplied law, validated on construction.
#[derive(Clone)]
pub struct CustomLaw {
    pdf: RealFn,
    cdf: RealFn,
    quantile: RealFn,
    support: (f64, f64),
    symmetric: bool,
}

#[derive(Clone)]
enum Law {
    Gaussian,
    CenteredExponential,
    UniformCentered,
    Custom(CustomLaw),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModelKind {
    Gaussian,
    CenteredExponential,
    UniformCentered,
    Custom,
}

/// The law of one increment `X_i`. Cheap to clone and safe to share.
#[derive(Clone)]
pub struct IncrementModel {
    name: Arc<str>,
    law: Law,
}

impl fmt::Debug for IncrementModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("IncrementModel").field("name", &self.name).finish()
    }
}

impl fmt::Display for IncrementModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name)
    }
}

impl PartialEq for IncrementModel {
    fn eq(&self, other: &Self) -> bool {
        self.name == other.name && self.kind() == other.kind()
    }
}

pub fn make_gaussian() -> IncrementModel {
    IncrementModel { name: "gaussian".into(), law: Law::Gaussian }
}

/// `X = 1 - E` with `E ~ Exp(1)`.
pub fn make_centered_exponential() -> IncrementModel {
    IncrementModel { name: "exponential".into(), law: Law::CenteredExponential }
}

/// Uniform on `[-sqrt(3), sqrt(3)]`.
pub fn make_uniform_centered() -> IncrementModel {
    IncrementModel { name: "uniform".into(), law: Law::UniformCentered }
}

impl FromStr for IncrementModel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "gaussian" | "normal" => Ok(make_gaussian()),
            "exponential" | "centered-exponential" | "exp" => Ok(make_centered_exponential()),
            "uniform" | "uniform-centered" => Ok(make_uniform_centered()),
            other => Err(Error::Config(format!(
                "unknown model `{other}` (expected gaussian, exponential or uniform)"
            ))),
        }
    }
}

impl IncrementModel {
    /// Builds a model from a `(pdf, cdf, quantile)` triple.
    ///
    /// The triple is checked by quadrature over `support`: total mass, mean
    /// and variance must match `1, 0, 1` to `1e-6`, and the CDF and quantile
    /// must agree with the density. Boundedness of some convolution power of
    /// the density is assumed, not checked.
    pub fn custom(
        name: &str,
        pdf: impl Fn(f64) -> f64 + Send + Sync + 'static,
        cdf: impl Fn(f64) -> f64 + Send + Sync + 'static,
        quantile: impl Fn(f64) -> f64 + Send + Sync + 'static,
        support: (f64, f64),
    ) -> Result<Self> {
        if support.0 >= support.1 {
            return Err(domain("support must be a non-empty interval"));
        }
        let tol = Tolerance { abs: 1e-12, rel: 1e-10, max_intervals: 2000 };
        let mass = integrate(&pdf, support.0, support.1, tol).value;
        let mean = integrate(|x| x * pdf(x), support.0, support.1, tol).value;
        let second = integrate(|x| x * x * pdf(x), support.0, support.1, tol).value;
        if (mass - 1.0).abs() > 1e-6 {
            return Err(domain(format!("custom law `{name}` has total mass {mass}")));
        }
        if mean.abs() > 1e-6 {
            return Err(domain(format!("custom law `{name}` has mean {mean}, expected 0")));
        }
        if (second - 1.0).abs() > 1e-6 {
            return Err(domain(format!("custom law `{name}` has variance {second}, expected 1")));
        }
        for p in [0.05, 0.25, 0.5, 0.75, 0.95] {
            let x = quantile(p);
            let back = cdf(x);
            if (back - p).abs() > 1e-6 {
                return Err(domain(format!("custom law `{name}`: cdf(quantile({p})) = {back}")));
            }
            let lo = support.0.max(x - 50.0);
            let integrated = integrate(&pdf, lo, x, tol).value;
            if (integrated - back).abs() > 1e-6 {
                return Err(domain(format!("custom law `{name}`: cdf disagrees with pdf at {x}")));
            }
        }
        let symmetric = [0.3, 0.9, 1.7].iter().all(|&x| (pdf(x) - pdf(-x)).abs() < 1e-12);
        Ok(IncrementModel {
            name: name.into(),
            law: Law::Custom(CustomLaw {
                pdf: Arc::new(pdf),
                cdf: Arc::new(cdf),
                quantile: Arc::new(quantile),
                support,
                symmetric,
            }),
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn kind(&self) -> ModelKind {
        match self.law {
            Law::Gaussian => ModelKind::Gaussian,
            Law::CenteredExponential => ModelKind::CenteredExponential,
            Law::UniformCentered => ModelKind::UniformCentered,
            Law::Custom(_) => ModelKind::Custom,
        }
    }

    #[inline]
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match &self.law {
            Law::Gaussian => rng.sample(StandardNormal),
            Law::CenteredExponential => {
                let e: f64 = rng.sample(Exp1);
                1.0 - e
            }
            Law::UniformCentered => rng.random_range(-SQRT_3..SQRT_3),
            Law::Custom(c) => (c.quantile)(rng.random::<f64>()),
        }
    }

    pub fn pdf(&self, x: f64) -> f64 {
        match &self.law {
            Law::Gaussian => normal_pdf(x),
            Law::CenteredExponential => {
                if x < 1.0 {
                    (x - 1.0).exp()
                } else {
                    0.0
                }
            }
            Law::UniformCentered => {
                if x.abs() <= SQRT_3 {
                    0.5 / SQRT_3
                } else {
                    0.0
                }
            }
            Law::Custom(c) => (c.pdf)(x),
        }
    }

    pub fn cdf(&self, x: f64) -> f64 {
        match &self.law {
            Law::Gaussian => normal_cdf(x),
            Law::CenteredExponential => {
                if x < 1.0 {
                    (x - 1.0).exp()
                } else {
                    1.0
                }
            }
            Law::UniformCentered => ((x + SQRT_3) / (2.0 * SQRT_3)).clamp(0.0, 1.0),
            Law::Custom(c) => (c.cdf)(x),
        }
    }

    /// `P(a < X ≤ b)`, computed on whichever side keeps relative precision.
    pub fn interval_mass(&self, a: f64, b: f64) -> f64 {
        if b <= a {
            return 0.0;
        }
        match &self.law {
            Law::Gaussian => {
                if a >= 0.0 {
                    normal_sf(a) - normal_sf(b)
                } else if b <= 0.0 {
                    normal_cdf(b) - normal_cdf(a)
                } else {
                    1.0 - normal_sf(b) - normal_cdf(a)
                }
            }
            Law::CenteredExponential => {
                let (a, b) = (a.min(1.0), b.min(1.0));
                // e^{b-1} (1 - e^{a-b})
                -(b - 1.0).exp() * (a - b).exp_m1()
            }
            Law::UniformCentered => {
                let lo = a.max(-SQRT_3);
                let hi = b.min(SQRT_3);
                ((hi - lo) / (2.0 * SQRT_3)).max(0.0)
            }
            Law::Custom(c) => ((c.cdf)(b) - (c.cdf)(a)).max(0.0),
        }
    }

    pub fn mean(&self) -> f64 {
        0.0
    }

    pub fn variance(&self) -> f64 {
        1.0
    }

    pub fn is_symmetric(&self) -> bool {
        match &self.law {
            Law::Gaussian | Law::UniformCentered => true,
            Law::CenteredExponential => false,
            Law::Custom(c) => c.symmetric,
        }
    }

    /// `(E(-S_{T_0}), E(-S̃_{T_0}))` when known in closed form: the mean
    /// descending ladder height of the walk and of the walk with increments
    /// `-X_i`. Their product is always `σ²/2 = 1/2`.
    pub fn ladder_constants_exact(&self) -> Option<(f64, f64)> {
        match &self.law {
            Law::Gaussian => Some((std::f64::consts::FRAC_1_SQRT_2, std::f64::consts::FRAC_1_SQRT_2)),
            // Downward jumps are exponential, so the undershoot below 0 is Exp(1).
            Law::CenteredExponential => Some((1.0, 0.5)),
            _ => None,
        }
    }

    /// Support of the law (possibly infinite).
    pub fn support(&self) -> (f64, f64) {
        match &self.law {
            Law::Gaussian => (f64::NEG_INFINITY, f64::INFINITY),
            Law::CenteredExponential => (f64::NEG_INFINITY, 1.0),
            Law::UniformCentered => (-SQRT_3, SQRT_3),
            Law::Custom(c) => c.support,
        }
    }

    /// Points where the density may jump.
    pub fn breakpoints(&self) -> Vec<f64> {
        match &self.law {
            Law::Gaussian => vec![],
            Law::CenteredExponential => vec![1.0],
            Law::UniformCentered => vec![-SQRT_3, SQRT_3],
            Law::Custom(c) => [c.support.0, c.support.1].into_iter().filter(|x| x.is_finite()).collect(),
        }
    }

    /// Finite `(lo, hi)` with `P(X < lo) ≤ eps` and `P(X > hi) ≤ eps`.
    pub fn tail_bounds(&self, eps: f64) -> (f64, f64) {
        let eps = eps.clamp(1e-300, 0.5);
        match &self.law {
            Law::Gaussian => {
                let z = bisect(|z| normal_sf(z) - eps, 0.0, 40.0);
                (-z, z)
            }
            Law::CenteredExponential => (1.0 + eps.ln(), 1.0),
            Law::UniformCentered => (-SQRT_3, SQRT_3),
            Law::Custom(c) => {
                let lo = if c.support.0.is_finite() { c.support.0 } else { (c.quantile)(eps) };
                let hi = if c.support.1.is_finite() { c.support.1 } else { (c.quantile)(1.0 - eps) };
                (lo, hi)
            }
        }
    }

    /// Closed-form density of `S_m` at `x`, where one is available.
    pub fn nfold_pdf_exact(&self, m: usize, x: f64) -> Option<f64> {
        if m == 1 {
            return Some(self.pdf(x));
        }
        match &self.law {
            Law::Gaussian => Some(normal_pdf_scaled(x, m as f64)),
            // S_m = m - Gamma(m, 1)
            Law::CenteredExponential => Some(gamma_pdf(m as f64, m as f64 - x)),
            _ => None,
        }
    }

    pub fn has_exact_nfold(&self) -> bool {
        matches!(self.law, Law::Gaussian | Law::CenteredExponential)
    }
}

fn bisect(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> f64 {
    // f decreasing, f(lo) > 0 > f(hi)
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if f(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    hi
}

/// The density `f_m` of `S_m`, either closed form or tabulated on a grid.
#[derive(Debug, Clone)]
pub enum NfoldDensity {
    Exact { model: IncrementModel, m: usize },
    Grid(KilledDensityGrid),
}

impl NfoldDensity {
    pub fn new(model: &IncrementModel, m: usize, cfg: &GridConfig) -> Result<Self> {
        if m == 0 {
            return Err(domain("the n-fold density needs m >= 1"));
        }
        if m == 1 || model.has_exact_nfold() {
            return Ok(NfoldDensity::Exact { model: model.clone(), m });
        }
        Ok(NfoldDensity::Grid(unkilled_density(model, m, cfg)?))
    }

    pub fn eval(&self, x: f64) -> f64 {
        match self {
            NfoldDensity::Exact { model, m } => model.nfold_pdf_exact(*m, x).expect("exact density"),
            NfoldDensity::Grid(g) => g.density_at(x),
        }
    }
}

/// Density of `S_m` at `x`. Closed forms are used where they exist, grid
/// self-convolution otherwise.
pub fn nfold_density(model: &IncrementModel, m: usize, x: f64, cfg: &GridConfig) -> Result<f64> {
    Ok(NfoldDensity::new(model, m, cfg)?.eval(x))
}

/// `sup_x |sqrt(m) f_m(sqrt(m) x) - φ(x)|` over the nodes of the convolution
/// grid for `S_m`.
pub fn clt_sup_distance(model: &IncrementModel, m: usize, cfg: &GridConfig) -> Result<f64> {
    let grid = unkilled_density(model, m, cfg)?;
    let s = (m as f64).sqrt();
    Ok(grid
        .nodes()
        .zip(grid.values.iter())
        .map(|(x, &v)| (s * v - normal_pdf(x / s)).abs())
        .fold(0.0, f64::max))
}
