//! One function per subcommand, each producing a [`Table`].

use passage::asymptotics::{appendix_b_lattice_check, rayleigh_tail};
use passage::cascade::{
    cascade_vs_bridge, exact_crossing_probability, kernel_crossing_probability, CascadeConfig, EXACT_MAX_N,
};
use passage::density_kernel::bridge_survival;
use passage::estimators::{
    convergence_sweep, estimate_conditional_survival_bridge, estimate_conditional_survival_weighted,
    estimate_conditional_survival_window, estimate_lg, estimate_rayleigh_tails, SweepConfig, SWEEP_HEADER,
};
use passage::increments::ModelKind;
use passage::walk_sim::estimate_ladder_stats;
use passage::{Error, KRule, Method};

use crate::settings::{KSpec, Settings, SettingsError};
use crate::table::Table;

/// Rows produced so far plus the first error that stopped or spoiled the run.
pub struct Outcome {
    pub table: Table,
    pub failure: Option<SettingsError>,
}

impl From<Table> for Outcome {
    fn from(table: Table) -> Self {
        Outcome { table, failure: None }
    }
}

type CmdResult = Result<Outcome, SettingsError>;

pub fn run(s: &Settings) -> CmdResult {
    match s.command {
        "survival" => survival(s),
        "sweep" => sweep(s),
        "ladder" => ladder(s),
        "lg" => lg(s),
        "rayleigh" => rayleigh(s),
        "cascade" => cascade(s),
        "oracle" => oracle(s),
        "identities" => identities(),
        other => unreachable!("unknown command {other}"),
    }
}

fn survival(s: &Settings) -> CmdResult {
    let method = s.method.unwrap_or(if s.model.kind() == ModelKind::Gaussian { Method::BridgeDirect } else { Method::Weighted });
    let mut t = Table::new(&["model", "boundary", "n", "k", "method", "estimate", "se", "samples", "seed"]);
    for (n, k) in s.pairs(KRule::Fraction(0.5))? {
        let (value, se, samples) = match method {
            Method::BridgeDirect => {
                let r = estimate_conditional_survival_bridge(&s.model, &s.boundary, n, k, s.reps, s.seed)?;
                (r.value, r.std_error, r.samples)
            }
            Method::Weighted => {
                let r = estimate_conditional_survival_weighted(&s.model, &s.boundary, n, k, s.reps, s.seed, &s.grid)?;
                (r.value, r.std_error, r.samples)
            }
            Method::Window => {
                let r = estimate_conditional_survival_window(&s.model, &s.boundary, n, k, s.delta, s.reps, s.seed)?;
                (r.value, r.std_error, r.samples)
            }
            Method::Kernel => (bridge_survival(&s.model, &s.boundary, n, k, &s.grid)?.probability, 0.0, 0),
            other => return Err(Error::Config(format!("method {other} does not estimate bridge survival")).into()),
        };
        t.push(vec![
            s.model.name().into(),
            s.boundary.to_string().into(),
            n.into(),
            k.into(),
            method.as_str().into(),
            value.into(),
            se.into(),
            samples.into(),
            s.seed.into(),
        ]);
    }
    Ok(t.into())
}

fn sweep(s: &Settings) -> CmdResult {
    let k_rule = match &s.k {
        None => KRule::Fraction(0.5),
        Some(KSpec::Rule(r)) => *r,
        Some(KSpec::Fixed(_)) => return Err(Error::Config("sweep needs a k rule (frac:F or pow:P)".into()).into()),
    };
    let cfg = SweepConfig {
        model: s.model.clone(),
        boundary: s.boundary.clone(),
        ns: s.ns()?.to_vec(),
        k_rule,
        regime: s.regime,
        method: s.method.unwrap_or(Method::Kernel),
        reps: s.reps,
        seed: s.seed,
        grid: s.grid.clone(),
    };
    let result = convergence_sweep(&cfg);
    let mut t = Table::new(&SWEEP_HEADER);
    for r in &result.rows {
        t.push(vec![
            r.model.clone().into(),
            r.boundary.clone().into(),
            r.n.into(),
            r.k.into(),
            r.regime.clone().into(),
            r.method.clone().into(),
            r.estimate.into(),
            r.se.into(),
            r.asymptotic.into(),
            r.ratio.into(),
            r.seed.into(),
        ]);
    }
    for (n, msg) in &result.failures {
        eprintln!("sweep: n={n}: {msg}");
    }
    // a failed row is a numerical diagnostic unless nothing could run at all
    let failure = result.failures.first().map(|(n, msg)| {
        let msg = format!("n={n}: {msg}");
        if result.rows.is_empty() { SettingsError::Invalid(msg) } else { SettingsError::Numerical(msg) }
    });
    Ok(Outcome { table: t, failure })
}

fn ladder(s: &Settings) -> CmdResult {
    let st = estimate_ladder_stats(&s.model, s.reps, s.height_max, s.seed)?;
    for w in &st.warnings {
        eprintln!("ladder: {w}");
    }
    let mut t = Table::new(&["model", "quantity", "value", "se", "samples", "seed"]);
    let name = s.model.name();
    let rows = [
        ("mean_descending", st.mean_descending, st.se_descending, st.samples_descending),
        ("mean_ascending_dual", st.mean_ascending_dual, st.se_ascending_dual, st.samples_ascending),
        ("product", st.product(), st.product_se(), st.samples_descending.min(st.samples_ascending)),
        ("capped_fraction", st.capped_fraction, 0.0, st.samples_descending),
    ];
    for (q, v, se, n) in rows {
        t.push(vec![name.into(), q.into(), v.into(), se.into(), n.into(), s.seed.into()]);
    }
    Ok(t.into())
}

fn lg(s: &Settings) -> CmdResult {
    let ks = match &s.k {
        Some(KSpec::Fixed(ks)) => ks.clone(),
        _ => return Err(Error::Config("lg needs --k as a list of integers".into()).into()),
    };
    let mut t = Table::new(&["model", "boundary", "k", "display", "value", "se", "seed"]);
    for k in ks {
        let r = estimate_lg(&s.model, &s.boundary, k, s.reps, s.seed)?;
        let rows = [
            ("undershoot", r.undershoot.value, r.undershoot.std_error),
            ("excess", r.excess.value, r.excess.std_error),
            ("difference", r.difference(), r.difference_se),
        ];
        for (d, v, se) in rows {
            t.push(vec![s.model.name().into(), s.boundary.to_string().into(), k.into(), d.into(), v.into(), se.into(), s.seed.into()]);
        }
    }
    Ok(t.into())
}

fn rayleigh(s: &Settings) -> CmdResult {
    let mut t = Table::new(&["model", "boundary", "n", "v", "estimate", "se", "limit", "survivors", "seed"]);
    for &n in s.ns()? {
        let recs = estimate_rayleigh_tails(&s.model, &s.boundary, n, &s.vs, s.reps, s.seed)?;
        for (v, r) in s.vs.iter().zip(recs) {
            t.push(vec![
                s.model.name().into(),
                s.boundary.to_string().into(),
                n.into(),
                (*v).into(),
                r.value.into(),
                r.std_error.into(),
                rayleigh_tail(*v)?.into(),
                r.samples.into(),
                s.seed.into(),
            ]);
        }
    }
    Ok(t.into())
}

fn cascade(s: &Settings) -> CmdResult {
    let mut t = Table::new(&["n", "k", "theta", "method", "value", "se"]);
    for (n, k) in s.pairs(KRule::Fraction(0.5))? {
        let mut cfg = CascadeConfig::new(n, s.theta)?;
        if let Some(g) = &s.perturbation {
            cfg = cfg.with_perturbation(g.clone());
        }
        let cmp = cascade_vs_bridge(&cfg, k, s.reps, s.seed, &s.grid)?;
        let mut push = |method: &str, value: f64, se: f64| {
            t.push(vec![n.into(), k.into(), s.theta.into(), method.into(), value.into(), se.into()]);
        };
        push("order_statistics", cmp.order_statistics.value, cmp.order_statistics.std_error);
        push("weighted", cmp.weighted_bridge.value, cmp.weighted_bridge.std_error);
        if n <= EXACT_MAX_N {
            push("exact", exact_crossing_probability(&cfg, k)?, 0.0);
        }
        push("kernel", kernel_crossing_probability(&cfg, k, &s.grid)?.probability, 0.0);
        push("asymptotic", cmp.asymptotic, 0.0);
        if !cmp.agree {
            eprintln!(
                "cascade: n={n} k={k}: order statistics and weighted bridge differ by more than {:.3e}",
                cmp.tolerance
            );
        }
    }
    Ok(t.into())
}

fn oracle(s: &Settings) -> CmdResult {
    let mut t = Table::new(&["model", "boundary", "n", "k", "probability", "l_hat", "fn0", "quadrature_loss", "spacing"]);
    for (n, k) in s.pairs(KRule::Fraction(0.5))? {
        let r = bridge_survival(&s.model, &s.boundary, n, k, &s.grid)?;
        t.push(vec![
            s.model.name().into(),
            s.boundary.to_string().into(),
            n.into(),
            k.into(),
            r.probability.into(),
            r.l_hat.into(),
            r.fn0.into(),
            r.quadrature_loss.into(),
            r.spacing.into(),
        ]);
    }
    Ok(t.into())
}

/// Largest accepted relative error of the closed forms.
pub const IDENTITY_TOLERANCE: f64 = 1e-10;

fn identities() -> CmdResult {
    let report = appendix_b_lattice_check();
    let mut t = Table::new(&["identity", "params", "closed_form", "quadrature", "rel_error"]);
    for c in &report.cases {
        let params: Vec<String> = c.params.iter().map(|p| p.to_string()).collect();
        t.push(vec![c.lemma.into(), params.join(";").into(), c.closed_form.into(), c.quadrature.into(), c.rel_error.into()]);
    }
    eprintln!("identities: {} cases, max relative error {:.3e}", report.cases.len(), report.max_rel_error);
    let failure = if report.max_rel_error > IDENTITY_TOLERANCE || report.bound_violations > 0 {
        Some(SettingsError::Numerical(format!(
            "max relative error {:.3e} above {IDENTITY_TOLERANCE:e}, {} bound violations",
            report.max_rel_error, report.bound_violations
        )))
    } else {
        None
    };
    Ok(Outcome { table: t, failure })
}
