//! Rate extraction and the discrete spectral-constant estimator.
//!
//! Global decay rates come from least squares on the log of a recorded
//! scalar series. Scaling exponents regress log(rate) on log(nu) across a
//! viscosity sweep. Streamline rates fit the envelope of |f(t, y)| per
//! grid node against the local prediction ν^{1/3} B^{2/3}(y).

use std::io::Write as _;
use std::path::Path;

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::functional::least_squares_slope;
use crate::grid::Grid;
use crate::shear::ShearProfile;
use crate::solver::Trajectory;
use crate::weights::WeightSet;

pub const UNDERFLOW_FLOOR: f64 = 1e-280;
pub const SPECTRAL_C_MAX: f64 = 1048576.0;
pub const SPECTRAL_REL_TOL: f64 = 1e-3;
const SMOOTH_CELLS: usize = 5;

/// Least-squares exponential fit of a positive series over a time window.
#[derive(Debug, Clone, Copy)]
pub struct DecayFit {
    /// decay rate: the series behaves like exp(-lambda t)
    pub lambda: f64,
    pub log_intercept: f64,
    pub r2: f64,
    pub window: (f64, f64),
    pub n: usize,
}

pub fn fit_decay_rate(series: &[(f64, f64)], window: (f64, f64)) -> Result<DecayFit> {
    let mut pts = Vec::new();
    for &(t, v) in series {
        if t < window.0 || t > window.1 {
            continue;
        }
        if !v.is_finite() {
            return Err(Error::NonFinite("decay series"));
        }
        if v < UNDERFLOW_FLOOR {
            return Err(Error::Underflow);
        }
        pts.push((t, v.ln()));
    }
    if pts.len() < 3 {
        return Err(Error::InsufficientPoints { need: 3, decades: 0.0, got: pts.len() });
    }
    let (slope, intercept, r2) = line_fit(&pts);
    Ok(DecayFit { lambda: -slope, log_intercept: intercept, r2, window, n: pts.len() })
}

fn line_fit(pts: &[(f64, f64)]) -> (f64, f64, f64) {
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let slope = least_squares_slope(pts);
    let intercept = my - slope * mx;
    let ss_tot = pts.iter().map(|p| (p.1 - my) * (p.1 - my)).sum::<f64>();
    let ss_res = pts
        .iter()
        .map(|p| {
            let e = p.1 - (intercept + slope * p.0);
            e * e
        })
        .sum::<f64>();
    let r2 = if ss_tot == 0.0 { 1.0 } else { 1.0 - ss_res / ss_tot };
    (slope, intercept, r2)
}

/// ‖f(t) W(t)‖² along a trajectory.
pub fn weighted_norm_series(
    profile: &ShearProfile,
    traj: &Trajectory,
    sigma: f64,
) -> Result<Vec<(f64, f64)>> {
    let grid = Grid::new(traj.n)?;
    let mut out = Vec::with_capacity(traj.samples.len());
    for s in &traj.samples {
        let ws = WeightSet::new(&grid, profile, traj.nu, sigma, s.t)?;
        let mut acc = 0.0;
        for (v, w) in s.values.iter().zip(&ws.w) {
            acc += v.norm_sqr() * w * w;
        }
        out.push((s.t, acc * grid.spacing()));
    }
    Ok(out)
}

/// Power-law fit lambda ≈ C nu^slope across a sweep. Requires at least four
/// viscosities spanning three decades.
#[derive(Debug, Clone, Copy)]
pub struct ScalingFit {
    pub slope: f64,
    pub log_intercept: f64,
    pub r2: f64,
    pub n: usize,
}

pub fn scaling_exponent(rates: &[(f64, f64)]) -> Result<ScalingFit> {
    let good: Vec<(f64, f64)> = rates
        .iter()
        .filter(|&&(nu, lam)| nu > 0.0 && lam > 0.0)
        .map(|&(nu, lam)| (nu.ln(), lam.ln()))
        .collect();
    let decades = if good.is_empty() {
        0.0
    } else {
        let lo = good.iter().map(|p| p.0).fold(f64::INFINITY, f64::min);
        let hi = good.iter().map(|p| p.0).fold(f64::NEG_INFINITY, f64::max);
        (hi - lo) / std::f64::consts::LN_10
    };
    if good.len() < 4 || decades < 3.0 - 1e-9 {
        return Err(Error::InsufficientPoints { need: 4, decades, got: good.len() });
    }
    let (slope, intercept, r2) = line_fit(&good);
    Ok(ScalingFit { slope, log_intercept: intercept, r2, n: good.len() })
}

/// Per-node decay rates of |f(t, y)| against the local prediction.
#[derive(Debug, Clone)]
pub struct StreamlineRates {
    pub y: Vec<f64>,
    /// smoothed fitted rate; None where the node had no usable samples
    pub rate: Vec<Option<f64>>,
    /// ν^{1/3} B^{2/3}(y)
    pub predicted: Vec<f64>,
    pub ratio: Vec<Option<f64>>,
    pub skipped: Vec<usize>,
}

/// Fit each node's modulus series on the window
/// [2 ν^{-1/3} B^{-2/3}, max(ν^{-1/2}, 4 ν^{-1/3} B^{-2/3})], preferring the
/// envelope of local maxima so phase beats do not pollute the log fit, and
/// smooth the fitted rates over five neighbouring cells.
pub fn streamline_rates(profile: &ShearProfile, traj: &Trajectory) -> Result<StreamlineRates> {
    let grid = Grid::new(traj.n)?;
    let nu = traj.nu;
    let n = grid.len();
    let times = traj.times();

    let mut raw: Vec<Option<f64>> = Vec::with_capacity(n);
    let mut predicted = Vec::with_capacity(n);
    for i in 0..n {
        let y = grid.nodes()[i];
        let (b, _) = crate::weights::eval_b(profile, nu, y);
        let local = nu.cbrt() * b.powf(2.0 / 3.0);
        predicted.push(local);
        let lo = 2.0 / local;
        let hi = (1.0 / nu.sqrt()).max(4.0 / local);

        let mut idx = Vec::new();
        for (j, &t) in times.iter().enumerate() {
            if t >= lo && t <= hi && traj.samples[j].values[i].norm() > UNDERFLOW_FLOOR {
                idx.push(j);
            }
        }
        let value = |j: usize| traj.samples[j].values[i].norm();
        let mut peaks = Vec::new();
        for w in 1..idx.len().saturating_sub(1) {
            let (a, b_, c) = (value(idx[w - 1]), value(idx[w]), value(idx[w + 1]));
            if b_ >= a && b_ >= c && (b_ > a || b_ > c) {
                peaks.push(idx[w]);
            }
        }
        let chosen = if peaks.len() >= 3 { peaks } else { idx };
        if chosen.len() < 2 {
            raw.push(None);
            continue;
        }
        let pts: Vec<(f64, f64)> = chosen.iter().map(|&j| (times[j], value(j).ln())).collect();
        raw.push(Some(-least_squares_slope(&pts)));
    }

    // circular moving average over SMOOTH_CELLS, skipping empty nodes
    let half = SMOOTH_CELLS / 2;
    let mut rate = Vec::with_capacity(n);
    let mut ratio = Vec::with_capacity(n);
    let mut skipped = Vec::new();
    for i in 0..n {
        if raw[i].is_none() {
            skipped.push(i);
            rate.push(None);
            ratio.push(None);
            continue;
        }
        let mut acc = 0.0;
        let mut cnt = 0usize;
        for d in -(half as isize)..=(half as isize) {
            let j = (i as isize + d).rem_euclid(n as isize) as usize;
            if let Some(r) = raw[j] {
                acc += r;
                cnt += 1;
            }
        }
        let r = acc / cnt as f64;
        rate.push(Some(r));
        ratio.push(Some(r / predicted[i]));
    }
    Ok(StreamlineRates { y: grid.nodes().to_vec(), rate, predicted, ratio, skipped })
}

/// Smallest c such that  c·M + D - A ⪰ 0  for the weighted forms
///
/// ```text
/// A = ν^{1/3} ∫ B^{2/3} φ² W² |f|²      (enhanced-decay side)
/// D = ν ∫ W² |∂_y f|²                    (dissipation)
/// M = ν^{1/3} ∫ |U'|² B^{-4/3} φ² W² |f|² (shear control)
/// ```
///
/// located by bisection over [0, 2^20] to 0.1% relative precision. The
/// derivative form is assembled once per call through spectral matvecs;
/// positivity over complex fields reduces to the real symmetric pencil.
#[derive(Debug, Clone, Copy)]
pub struct SpectralEstimate {
    pub c: f64,
    pub lambda_min_at_c: f64,
    pub n: usize,
    pub t: f64,
}

pub fn estimate_spectral_constant(
    grid: &Grid,
    profile: &ShearProfile,
    nu: f64,
    sigma: f64,
    t: f64,
) -> Result<SpectralEstimate> {
    if profile.critical_points().is_empty() {
        return Err(Error::NoCriticalPoints);
    }
    let pencil = SpectralPencil::new(grid, profile, nu, sigma, t)?;
    if t == 0.0 {
        return Ok(SpectralEstimate { c: 0.0, lambda_min_at_c: pencil.lambda_min(0.0), n: grid.len(), t });
    }
    let tol = -1e-12 * pencil.scale;
    if pencil.lambda_min(0.0) >= tol {
        return Ok(SpectralEstimate { c: 0.0, lambda_min_at_c: pencil.lambda_min(0.0), n: grid.len(), t });
    }
    let mut hi = SPECTRAL_C_MAX;
    if pencil.lambda_min(hi) < tol {
        return Err(Error::Unbounded);
    }
    let mut lo = 0.0;
    while hi - lo > SPECTRAL_REL_TOL * hi {
        let mid = 0.5 * (lo + hi);
        if pencil.lambda_min(mid) >= tol {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(SpectralEstimate { c: hi, lambda_min_at_c: pencil.lambda_min(hi), n: grid.len(), t })
}

/// The assembled pencil  H(c) = D - A + c·M; exposed for direct inspection.
pub struct SpectralPencil {
    base: DMatrix<f64>,
    m_diag: Vec<f64>,
    pub scale: f64,
}

impl SpectralPencil {
    pub fn new(
        grid: &Grid,
        profile: &ShearProfile,
        nu: f64,
        sigma: f64,
        t: f64,
    ) -> Result<Self> {
        let n = grid.len();
        let ws = WeightSet::new(grid, profile, nu, sigma, t)?;
        let nu13 = nu.cbrt();

        // real spectral derivative matrix, one FFT matvec per column
        let mut g = DMatrix::<f64>::zeros(n, n);
        let mut col = vec![Complex64::new(0.0, 0.0); n];
        for j in 0..n {
            for v in col.iter_mut() {
                *v = Complex64::new(0.0, 0.0);
            }
            col[j] = Complex64::new(1.0, 0.0);
            let d = grid.derivative(&col, 1);
            for i in 0..n {
                g[(i, j)] = d[i].re;
            }
        }
        let w2: Vec<f64> = ws.w.iter().map(|w| w * w).collect();
        let mut base = DMatrix::<f64>::zeros(n, n);
        // D = nu Gᵀ diag(W²) G
        for i in 0..n {
            for j in 0..n {
                let mut acc = 0.0;
                for k in 0..n {
                    acc += g[(k, i)] * w2[k] * g[(k, j)];
                }
                base[(i, j)] = nu * acc;
            }
        }
        let mut m_diag = Vec::with_capacity(n);
        let mut scale = 0.0f64;
        for i in 0..n {
            let y = grid.nodes()[i];
            let b23 = ws.b[i].powf(2.0 / 3.0);
            let phi2 = ws.phi[i] * ws.phi[i];
            let a = nu13 * b23 * phi2 * w2[i];
            let u1 = profile.u1(y);
            let m = nu13 * u1 * u1 / (b23 * b23) * phi2 * w2[i];
            base[(i, i)] -= a;
            m_diag.push(m);
            scale = scale.max(a.abs()).max(m).max(base[(i, i)].abs());
        }
        // symmetrize away the matvec roundoff
        let base = (&base + base.transpose()) * 0.5;
        Ok(SpectralPencil { base, m_diag, scale })
    }

    pub fn lambda_min(&self, c: f64) -> f64 {
        let mut h = self.base.clone();
        for i in 0..self.m_diag.len() {
            h[(i, i)] += c * self.m_diag[i];
        }
        h.symmetric_eigenvalues().min()
    }
}

#[derive(Debug, Clone)]
pub struct RateRow {
    pub nu: f64,
    pub data_kind: String,
    pub lambda: f64,
    pub r2: f64,
    pub window: (f64, f64),
}

pub fn write_rates_csv(rows: &[RateRow], path: &Path) -> Result<()> {
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(out, "nu,data_kind,lambda,r2,window")?;
    for r in rows {
        writeln!(
            out,
            "{:.17e},{},{:.17e},{:.17e},{:.17e}:{:.17e}",
            r.nu, r.data_kind, r.lambda, r.r2, r.window.0, r.window.1
        )?;
    }
    out.flush()?;
    Ok(())
}

pub fn write_streamline_csv(rates: &StreamlineRates, path: &Path) -> Result<()> {
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(out, "y,rate,predicted,ratio")?;
    for i in 0..rates.y.len() {
        if let (Some(r), Some(q)) = (rates.rate[i], rates.ratio[i]) {
            writeln!(
                out,
                "{:.17e},{:.17e},{:.17e},{:.17e}",
                rates.y[i], r, rates.predicted[i], q
            )?;
        }
    }
    out.flush()?;
    Ok(())
}

#[derive(Debug, Clone, Copy)]
pub struct SpectralRow {
    pub nu: f64,
    pub t: f64,
    pub c_min: f64,
    pub n: usize,
}

pub fn write_spectral_csv(rows: &[SpectralRow], path: &Path) -> Result<()> {
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(out, "nu,t,c_min,n")?;
    for r in rows {
        writeln!(out, "{:.17e},{:.17e},{:.17e},{}", r.nu, r.t, r.c_min, r.n)?;
    }
    out.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::solver::{make_initial, solve, InitialData, SolveConfig};
    use approx::assert_relative_eq;

    #[test]
    fn fit_recovers_exact_exponential() {
        let series: Vec<(f64, f64)> =
            (0..200).map(|i| (0.5 * i as f64, 3.0 * (-0.37 * 0.5 * i as f64).exp())).collect();
        let fit = fit_decay_rate(&series, (10.0, 80.0)).unwrap();
        assert_relative_eq!(fit.lambda, 0.37, max_relative = 1e-10);
        assert_relative_eq!(fit.log_intercept, 3.0f64.ln(), max_relative = 1e-9);
        assert!(fit.r2 > 1.0 - 1e-12);
        assert!(fit.n > 100);
    }

    #[test]
    fn fit_flags_underflow_and_thin_windows() {
        let tiny: Vec<(f64, f64)> = (0..50).map(|i| (i as f64, 1e-300)).collect();
        assert!(matches!(fit_decay_rate(&tiny, (0.0, 50.0)), Err(Error::Underflow)));
        let short: Vec<(f64, f64)> = (0..50).map(|i| (i as f64, 1.0)).collect();
        assert!(matches!(
            fit_decay_rate(&short, (100.0, 200.0)),
            Err(Error::InsufficientPoints { .. })
        ));
    }

    #[test]
    fn scaling_recovers_synthetic_power_law() {
        let rates: Vec<(f64, f64)> =
            [1e-3, 1e-4, 1e-5, 1e-6].iter().map(|&nu| (nu, 3.2 * f64::powf(nu, 0.5))).collect();
        let fit = scaling_exponent(&rates).unwrap();
        assert_relative_eq!(fit.slope, 0.5, max_relative = 1e-6);
        assert_relative_eq!(fit.log_intercept, 3.2f64.ln(), max_relative = 1e-6);
        assert!(fit.r2 > 1.0 - 1e-12);
    }

    #[test]
    fn scaling_demands_span_and_count() {
        let narrow: Vec<(f64, f64)> =
            [1e-3, 3e-4, 1e-4, 3e-5].iter().map(|&nu| (nu, nu)).collect();
        assert!(matches!(
            scaling_exponent(&narrow),
            Err(Error::InsufficientPoints { need: 4, .. })
        ));
        let few: Vec<(f64, f64)> = [1e-3, 1e-5, 1e-6].iter().map(|&nu| (nu, nu)).collect();
        assert!(matches!(scaling_exponent(&few), Err(Error::InsufficientPoints { .. })));
    }

    #[test]
    fn streamline_rates_on_flat_profile_recover_heat_decay() {
        let profile = ShearProfile::zero();
        let grid = Grid::new(32).unwrap();
        let nu: f64 = 1e-2;
        let f0 = make_initial(&InitialData::FourierMode(1), &grid, &profile, nu).unwrap();
        let config = SolveConfig {
            nu,
            dt: 0.05,
            t_end: 45.0,
            output_every: 10,
            profile: "zero".into(),
            seed: 0,
        };
        let traj = solve(&profile, &config, &f0).unwrap();
        let rates = streamline_rates(&profile, &traj).unwrap();
        assert!(rates.skipped.is_empty());
        for i in 0..rates.y.len() {
            // |f| = e^{-nu t} uniformly; prediction is nu^{1/2} at the floor B
            assert_relative_eq!(rates.rate[i].unwrap(), nu, max_relative = 1e-6);
            assert_relative_eq!(rates.predicted[i], nu.sqrt(), max_relative = 1e-12);
            assert_relative_eq!(rates.ratio[i].unwrap(), nu.sqrt(), max_relative = 1e-6);
        }
    }

    #[test]
    fn spectral_constant_vanishes_before_the_ramp() {
        let profile = ShearProfile::sine();
        let grid = Grid::new(64).unwrap();
        let est = estimate_spectral_constant(&grid, &profile, 1e-2, 0.5, 0.0).unwrap();
        assert_eq!(est.c, 0.0);
        // the dissipation form alone, PSD up to eigensolver roundoff
        assert!(est.lambda_min_at_c >= -1e-10);
    }

    #[test]
    fn spectral_constant_is_a_tight_threshold() {
        let profile = ShearProfile::sine();
        let grid = Grid::new(64).unwrap();
        let nu: f64 = 1e-2;
        let t = 1.0 / nu.sqrt();
        let est = estimate_spectral_constant(&grid, &profile, nu, 0.5, t).unwrap();
        assert!(est.c > 0.0 && est.c < SPECTRAL_C_MAX);
        let pencil = SpectralPencil::new(&grid, &profile, nu, 0.5, t).unwrap();
        let tol = 1e-12 * pencil.scale;
        assert!(pencil.lambda_min(est.c) >= -tol);
        assert!(pencil.lambda_min(est.c * 0.99) < -tol, "threshold should be tight to 1%");
    }

    #[test]
    fn spectral_estimator_requires_critical_points() {
        let profile = ShearProfile::zero();
        let grid = Grid::new(32).unwrap();
        assert!(matches!(
            estimate_spectral_constant(&grid, &profile, 1e-2, 0.5, 10.0),
            Err(Error::NoCriticalPoints)
        ));
    }

    #[test]
    fn csv_writers_emit_declared_schemas() {
        let dir = tempfile::tempdir().unwrap();
        let rp = dir.path().join("rates.csv");
        write_rates_csv(
            &[RateRow {
                nu: 1e-3,
                data_kind: "critical_bump".into(),
                lambda: 0.02,
                r2: 0.999,
                window: (31.6, 94.9),
            }],
            &rp,
        )
        .unwrap();
        let text = std::fs::read_to_string(&rp).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), "nu,data_kind,lambda,r2,window");
        let row: Vec<&str> = lines.next().unwrap().split(',').collect();
        assert_eq!(row.len(), 5);
        assert!(row[4].contains(':'));

        let sp = dir.path().join("spectral.csv");
        write_spectral_csv(&[SpectralRow { nu: 1e-2, t: 10.0, c_min: 2.5, n: 64 }], &sp).unwrap();
        let text = std::fs::read_to_string(&sp).unwrap();
        assert_eq!(text.lines().next().unwrap(), "nu,t,c_min,n");
        assert_eq!(text.lines().nth(1).unwrap().split(',').count(), 4);
    }
}
