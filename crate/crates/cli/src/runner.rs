use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde_json::json;

use hypoflow::analysis::{
    estimate_spectral_constant, fit_decay_rate, scaling_exponent, streamline_rates,
    write_rates_csv, write_spectral_csv, write_streamline_csv, RateRow, SpectralRow,
};
use hypoflow::functional::{audit_gronwall, calibrate_beta, check_equivalence, HypoParams};
use hypoflow::io::save_trajectory;
use hypoflow::solver::{make_initial, resolution_for_data, solve};
use hypoflow::weights::{check_w_lemma, WCheckOptions};
use hypoflow::functional::write_ledger_csv;
use hypoflow::{Grid, InitialData, ShearProfile, SolveConfig, Trajectory};

use crate::config::ExperimentConfig;
use crate::Failure;

struct JobOutcome {
    nu: f64,
    rate: Option<RateRow>,
    delta_fit: Option<f64>,
    gronwall: Option<bool>,
    equivalence: Option<bool>,
    weight_bounds: Option<bool>,
    spectral: Option<bool>,
    error: Option<String>,
}

fn nu_dir(out: &Path, nu: f64) -> PathBuf {
    out.join(format!("nu_{nu:e}"))
}

/// Monotone-bump rates live in the early mixing window; everything else is
/// fitted on [ν^{-1/2}, 3ν^{-1/2}].
fn fit_window(data: &InitialData, nu: f64, t_end: f64) -> (f64, f64) {
    match data {
        InitialData::MonotoneBump { .. } => (2.0 / nu.cbrt(), (3.0 / nu.cbrt()).min(t_end)),
        _ => (1.0 / nu.sqrt(), (3.0 / nu.sqrt()).min(t_end)),
    }
}

fn slope_target(profile: &ShearProfile, data: &InitialData) -> Option<(f64, f64)> {
    if profile.norm_u1() == 0.0 {
        return Some((1.0, 0.01));
    }
    match data {
        InitialData::CriticalBump => Some((0.5, 0.07)),
        InitialData::MonotoneBump { .. } => Some((1.0 / 3.0, 0.07)),
        _ => None,
    }
}

fn write_json(path: &Path, value: &serde_json::Value) -> Result<(), Failure> {
    let mut text = serde_json::to_string_pretty(value)
        .map_err(|e| Failure::Check(format!("serialize {}: {e}", path.display())))?;
    text.push('\n');
    std::fs::write(path, text)
        .map_err(|e| Failure::Check(format!("write {}: {e}", path.display())))
}

fn status(enabled: bool, pass: Option<bool>) -> &'static str {
    match (enabled, pass) {
        (false, _) => "disabled",
        (true, Some(true)) => "pass",
        (true, Some(false)) => "fail",
        (true, None) => "error",
    }
}

fn summary_value(
    delta_fit: Option<f64>,
    beta_used: f64,
    scaling_slopes: Option<&BTreeMap<String, f64>>,
    gronwall: (bool, Option<bool>),
    lemma_a2: (bool, Option<bool>),
    equivalence: (bool, Option<bool>),
    extra_checks: &BTreeMap<&str, &str>,
) -> serde_json::Value {
    let mut checks = BTreeMap::new();
    checks.insert("gronwall", status(gronwall.0, gronwall.1));
    checks.insert("lemmaA2", status(lemma_a2.0, lemma_a2.1));
    checks.insert("equivalence", status(equivalence.0, equivalence.1));
    for (k, v) in extra_checks {
        checks.insert(k, v);
    }
    json!({
        "delta_fit": delta_fit,
        "beta_used": beta_used,
        "scaling_slopes": scaling_slopes,
        "gronwall_pass": gronwall.1,
        "lemmaA2_pass": lemma_a2.1,
        "equivalence_pass": equivalence.1,
        "checks": checks,
    })
}

#[allow(clippy::too_many_arguments)]
fn job(
    cfg: &ExperimentConfig,
    profile: &ShearProfile,
    data: &InitialData,
    params: &HypoParams,
    beta_used: f64,
    nu: f64,
    premade: Option<&Trajectory>,
) -> Result<JobOutcome, hypoflow::Error> {
    let dir = nu_dir(&cfg.out, nu);
    std::fs::create_dir_all(&dir)?;

    let traj = match premade {
        Some(t) => t.clone(),
        None => {
            let n = cfg.n.unwrap_or_else(|| resolution_for_data(profile, nu, data));
            let grid = Grid::new(n)?;
            let f0 = make_initial(data, &grid, profile, nu)?;
            let sc = SolveConfig {
                nu,
                dt: cfg.dt.unwrap_or(0.05 / profile.norm_u().max(1.0)),
                t_end: cfg.t_end.unwrap_or(4.0 / nu.sqrt()),
                output_every: 10,
                profile: cfg.profile.clone(),
                seed: cfg.seed,
            };
            solve(profile, &sc, &f0)?
        }
    };
    save_trajectory(&traj, &dir.join("trajectory"))?;

    let audit = audit_gronwall(profile, &traj, params)?;
    write_ledger_csv(&audit.rows, &dir.join("ledger.csv"))?;

    let phi_series: Vec<(f64, f64)> = audit.rows.iter().map(|r| (r.t, r.phi)).collect();
    let t_last = phi_series.last().map(|p| p.0).unwrap_or(0.0);
    let window = fit_window(data, nu, t_last);
    let rate = match fit_decay_rate(&phi_series, window) {
        Ok(fit) => Some(RateRow {
            nu,
            data_kind: cfg.data.clone(),
            lambda: fit.lambda,
            r2: fit.r2,
            window,
        }),
        Err(_) => None,
    };
    write_rates_csv(rate.as_slice(), &dir.join("rates.csv"))?;

    let sr = streamline_rates(profile, &traj)?;
    write_streamline_csv(&sr, &dir.join("streamline.csv"))?;

    let spectral = if cfg.enabled("spectral") {
        let grid = Grid::new(traj.n)?;
        let est = estimate_spectral_constant(&grid, profile, nu, params.sigma, 1.0 / nu.sqrt())?;
        let row = SpectralRow { nu, t: est.t, c_min: est.c, n: est.n };
        write_spectral_csv(&[row], &dir.join("spectral.csv"))?;
        Some(est.c.is_finite())
    } else {
        write_spectral_csv(&[], &dir.join("spectral.csv"))?;
        None
    };

    let gronwall = cfg
        .enabled("gronwall")
        .then(|| audit.pass && audit.delta_cert.is_some_and(|d| d > 0.0));
    let equivalence = cfg
        .enabled("equivalence")
        .then(|| audit.rows.iter().all(|r| check_equivalence(&r.parts, r.t).is_ok()));
    let weight_bounds = if cfg.enabled("lemmaA2") {
        Some(check_w_lemma(profile, nu, params.sigma, WCheckOptions::default())?.pass)
    } else {
        None
    };

    let mut extra = BTreeMap::new();
    if cfg.enabled("spectral") {
        extra.insert("spectral", status(true, spectral));
    }
    let summary = summary_value(
        audit.delta_ls,
        beta_used,
        None,
        (cfg.enabled("gronwall"), gronwall),
        (cfg.enabled("lemmaA2"), weight_bounds),
        (cfg.enabled("equivalence"), equivalence),
        &extra,
    );
    write_json(&dir.join("summary.json"), &summary)
        .map_err(|e| hypoflow::Error::InvalidParameter(e.to_string()))?;

    Ok(JobOutcome {
        nu,
        rate,
        delta_fit: audit.delta_ls,
        gronwall,
        equivalence,
        weight_bounds,
        spectral,
        error: None,
    })
}

fn combine(outcomes: &[JobOutcome], pick: impl Fn(&JobOutcome) -> Option<bool>) -> Option<bool> {
    let mut seen = false;
    for o in outcomes {
        match pick(o) {
            Some(false) => return Some(false),
            Some(true) => seen = true,
            None => {}
        }
    }
    seen.then_some(true)
}

pub fn run(cfg: &ExperimentConfig, sweep: bool) -> Result<(), Failure> {
    cfg.validate()?;
    let mut cfg = cfg.clone();
    if sweep && !cfg.enabled("scaling") {
        cfg.checks.push("scaling".into());
    }
    let cfg = cfg;

    if cfg.enabled("scaling") {
        let lo = cfg.nu.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = cfg.nu.iter().cloned().fold(0.0f64, f64::max);
        let decades = (hi / lo).log10();
        if cfg.nu.len() < 4 || decades < 3.0 - 1e-9 {
            return Err(Failure::Config(
                "scaling needs at least 4 viscosities spanning 3 decades".into(),
            ));
        }
    }

    let profile = ShearProfile::from_spec(&cfg.profile).map_err(|e| Failure::Config(e.to_string()))?;
    let data = InitialData::from_spec(&cfg.data).map_err(|e| Failure::Config(e.to_string()))?;
    if cfg.enabled("spectral") && profile.critical_points().is_empty() {
        return Err(Failure::Config(
            "the spectral check requires a profile with nondegenerate critical points".into(),
        ));
    }

    std::fs::create_dir_all(&cfg.out)
        .map_err(|e| Failure::Config(format!("cannot create {}: {e}", cfg.out.display())))?;
    std::fs::write(cfg.out.join("config.json"), cfg.canonical_json())
        .map_err(|e| Failure::Config(format!("cannot write config.json: {e}")))?;

    // "auto" β: calibrate once on the smallest viscosity, reuse everywhere
    let smallest = cfg.nu.iter().cloned().fold(f64::INFINITY, f64::min);
    let mut premade: Option<(f64, Trajectory)> = None;
    let beta_used = match cfg.beta.value() {
        Some(b) => b,
        None => {
            let n = cfg.n.unwrap_or_else(|| resolution_for_data(&profile, smallest, &data));
            let grid = Grid::new(n).map_err(|e| Failure::Config(e.to_string()))?;
            let f0 = make_initial(&data, &grid, &profile, smallest)
                .map_err(|e| Failure::Config(e.to_string()))?;
            let sc = SolveConfig {
                nu: smallest,
                dt: cfg.dt.unwrap_or(0.05 / profile.norm_u().max(1.0)),
                t_end: cfg.t_end.unwrap_or(4.0 / smallest.sqrt()),
                output_every: 10,
                profile: cfg.profile.clone(),
                seed: cfg.seed,
            };
            let traj = solve(&profile, &sc, &f0).map_err(|e| Failure::Check(e.to_string()))?;
            let cal = calibrate_beta(&profile, &[&traj]).map_err(|e| Failure::Check(e.to_string()))?;
            premade = Some((smallest, traj));
            cal.beta
        }
    };
    let mut params = HypoParams::from_beta(beta_used).map_err(|e| Failure::Config(e.to_string()))?;
    if let Some(s) = cfg.sigma.value() {
        params.sigma = s;
    }

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.workers)
        .build()
        .map_err(|e| Failure::Config(e.to_string()))?;
    let outcomes: Vec<JobOutcome> = pool.install(|| {
        cfg.nu
            .par_iter()
            .map(|&nu| {
                let pre = premade.as_ref().filter(|(pnu, _)| *pnu == nu).map(|(_, t)| t);
                job(&cfg, &profile, &data, &params, beta_used, nu, pre).unwrap_or_else(|e| {
                    JobOutcome {
                        nu,
                        rate: None,
                        delta_fit: None,
                        gronwall: None,
                        equivalence: None,
                        weight_bounds: None,
                        spectral: None,
                        error: Some(e.to_string()),
                    }
                })
            })
            .collect()
    });

    let mut failures: Vec<String> = Vec::new();
    for o in &outcomes {
        if let Some(e) = &o.error {
            failures.push(format!("nu={:e}: {e}", o.nu));
        }
    }

    // cross-ν scaling
    let mut scaling_slopes: Option<BTreeMap<String, f64>> = None;
    let mut scaling_pass: Option<bool> = None;
    if cfg.enabled("scaling") {
        let pts: Vec<(f64, f64)> = outcomes
            .iter()
            .filter_map(|o| o.rate.as_ref().map(|r| (r.nu, r.lambda)))
            .collect();
        let fit = scaling_exponent(&pts).map_err(|e| Failure::Check(e.to_string()))?;
        let target = slope_target(&profile, &data);
        let pass = match target {
            Some((want, tol)) => (fit.slope - want).abs() <= tol,
            None => true,
        };
        scaling_pass = Some(pass && outcomes.iter().all(|o| o.error.is_none()));
        let mut slopes = BTreeMap::new();
        slopes.insert(cfg.data.clone(), fit.slope);
        scaling_slopes = Some(slopes);
        let points: Vec<serde_json::Value> = outcomes
            .iter()
            .map(|o| {
                json!({
                    "nu": o.nu,
                    "lambda": o.rate.as_ref().map(|r| r.lambda),
                    "r2": o.rate.as_ref().map(|r| r.r2),
                    "status": o.error.clone().unwrap_or_else(|| "ok".into()),
                })
            })
            .collect();
        let report = json!({
            "profile": cfg.profile,
            "data_kind": cfg.data,
            "slope": fit.slope,
            "r2": fit.r2,
            "target": target.map(|t| t.0),
            "tolerance": target.map(|t| t.1),
            "pass": scaling_pass,
            "points": points,
        });
        write_json(&cfg.out.join("scaling.json"), &report)?;
    }

    let gronwall = combine(&outcomes, |o| o.gronwall);
    let equivalence = combine(&outcomes, |o| o.equivalence);
    let weight_bounds = combine(&outcomes, |o| o.weight_bounds);
    let spectral = combine(&outcomes, |o| o.spectral);
    let delta_fit = outcomes
        .iter()
        .filter_map(|o| o.delta_fit)
        .fold(f64::INFINITY, f64::min);
    let delta_fit = delta_fit.is_finite().then_some(delta_fit);

    let mut extra = BTreeMap::new();
    let spectral_status = status(cfg.enabled("spectral"), spectral);
    let scaling_status = status(cfg.enabled("scaling"), scaling_pass);
    extra.insert("spectral", spectral_status);
    extra.insert("scaling", scaling_status);
    let summary = summary_value(
        delta_fit,
        beta_used,
        scaling_slopes.as_ref(),
        (cfg.enabled("gronwall"), gronwall),
        (cfg.enabled("lemmaA2"), weight_bounds),
        (cfg.enabled("equivalence"), equivalence),
        &extra,
    );
    write_json(&cfg.out.join("summary.json"), &summary)?;

    for (name, got) in [
        ("gronwall", gronwall),
        ("equivalence", equivalence),
        ("lemmaA2", weight_bounds),
        ("spectral", spectral),
        ("scaling", scaling_pass),
    ] {
        let s = status(cfg.enabled(name), got);
        println!("check {name}: {s}");
        if cfg.enabled(name) && got == Some(false) {
            failures.push(name.to_string());
        }
    }
    println!("artifacts: {}", cfg.out.display());

    if failures.is_empty() {
        Ok(())
    } else {
        Err(Failure::Check(failures.join("; ")))
    }
}
