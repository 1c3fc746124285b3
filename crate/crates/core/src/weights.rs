//! The rate weight B, the ramp phi and the exponential weight W.
//!
//! For a profile U and viscosity nu:
//!
//!   B(y)      = max(|U'(y)|, nu^{1/4})
//!   phi(t,y)  = min(1, nu^{1/3} B^{2/3} t)
//!   log W     = ς · max(1, nu^{1/3} B^{2/3} · min(t, nu^{-1/2}))
//!
//! so W ramps from e^ς up to e^{ς nu^{1/3} B^{2/3} nu^{-1/2}} and freezes at
//! t = nu^{-1/2}; inside the critical layer (B = nu^{1/4}) it never moves.
//! `check_w_lemma` verifies the almost-everywhere derivative envelopes
//!
//!   |dW/dt| ≤ ς nu^{1/3} B^{2/3} 1{ramp ≤ t ≤ cap} W
//!   |dW/dy| ≤ (2ς/3) 1{t ≥ ramp} nu^{1/3} B^{-1/3} min(t, cap) sup|U''| W
//!
//! by central differences away from the kink sets.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::shear::ShearProfile;

/// B(y) and its a.e. derivative; B' is declared zero on the clip set.
pub fn eval_b(profile: &ShearProfile, nu: f64, y: f64) -> (f64, f64) {
    let floor = nu.powf(0.25);
    let u1 = profile.u1(y);
    if u1.abs() >= floor {
        (u1.abs(), u1.signum() * profile.u2(y))
    } else {
        (floor, 0.0)
    }
}

pub fn eval_phi(nu: f64, b: f64, t: f64) -> f64 {
    (nu.cbrt() * b.powf(2.0 / 3.0) * t).min(1.0)
}

pub fn eval_log_w(nu: f64, sigma: f64, b: f64, t: f64) -> f64 {
    let cap = 1.0 / nu.sqrt();
    sigma * (nu.cbrt() * b.powf(2.0 / 3.0) * t.min(cap)).max(1.0)
}

pub fn eval_w(nu: f64, sigma: f64, b: f64, t: f64) -> f64 {
    eval_log_w(nu, sigma, b, t).exp()
}

/// All weight fields sampled on a grid at a fixed time.
#[derive(Debug, Clone)]
pub struct WeightSet {
    pub nu: f64,
    pub sigma: f64,
    pub t: f64,
    pub b: Vec<f64>,
    pub bprime: Vec<f64>,
    pub phi: Vec<f64>,
    pub log_w: Vec<f64>,
    pub w: Vec<f64>,
    /// envelope for |dW/dt| at (t, y_j)
    pub dt_w_bound: Vec<f64>,
    /// envelope for |dW/dy| at (t, y_j)
    pub dy_w_bound: Vec<f64>,
}

impl WeightSet {
    pub fn new(grid: &Grid, profile: &ShearProfile, nu: f64, sigma: f64, t: f64) -> Result<Self> {
        if !(nu > 0.0 && nu <= 1.0) {
            return Err(Error::InvalidParameter(format!("nu = {nu} outside (0, 1]")));
        }
        if !(sigma > 0.0 && sigma <= 1.0) {
            return Err(Error::InvalidParameter(format!("sigma = {sigma} outside (0, 1]")));
        }
        if !(t >= 0.0) {
            return Err(Error::InvalidParameter(format!("t = {t} negative")));
        }
        let n = grid.len();
        let nu13 = nu.cbrt();
        let cap = 1.0 / nu.sqrt();
        let sup_u2 = profile.norm_u2();
        let mut b = Vec::with_capacity(n);
        let mut bprime = Vec::with_capacity(n);
        let mut phi = Vec::with_capacity(n);
        let mut log_w = Vec::with_capacity(n);
        let mut w = Vec::with_capacity(n);
        let mut dt_w_bound = Vec::with_capacity(n);
        let mut dy_w_bound = Vec::with_capacity(n);
        for &y in grid.nodes() {
            let (bv, bp) = eval_b(profile, nu, y);
            let b23 = bv.powf(2.0 / 3.0);
            let ramp_reached = nu13 * b23 * t >= 1.0;
            let in_growth = ramp_reached && t <= cap;
            let lw = sigma * (nu13 * b23 * t.min(cap)).max(1.0);
            if lw >= 700.0 {
                return Err(Error::NonFinite("weight W overflows"));
            }
            let wv = lw.exp();
            b.push(bv);
            bprime.push(bp);
            phi.push((nu13 * b23 * t).min(1.0));
            log_w.push(lw);
            w.push(wv);
            dt_w_bound.push(if in_growth { sigma * nu13 * b23 * wv } else { 0.0 });
            dy_w_bound.push(if ramp_reached {
                (2.0 * sigma / 3.0) * nu13 * bv.powf(-1.0 / 3.0) * t.min(cap) * sup_u2 * wv
            } else {
                0.0
            });
        }
        Ok(WeightSet { nu, sigma, t, b, bprime, phi, log_w, w, dt_w_bound, dy_w_bound })
    }
}

/// Sampling plan for `check_w_lemma`.
#[derive(Debug, Clone, Copy)]
pub struct WCheckOptions {
    pub nt: usize,
    pub ny: usize,
    /// defaults to 2 nu^{-1/2}
    pub t_max: Option<f64>,
    /// central-difference step; defaults to min(1e-6, 1e-4 nu^{1/2})
    pub fd_step: Option<f64>,
    pub tol: f64,
}

impl Default for WCheckOptions {
    fn default() -> Self {
        WCheckOptions { nt: 160, ny: 256, t_max: None, fd_step: None, tol: 1e-6 }
    }
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct WLemmaReport {
    /// max over samples of (|dW/dt|_fd - envelope)/W
    pub max_violation_t: f64,
    /// max over samples of (|dW/dy|_fd - envelope)/W
    pub max_violation_y: f64,
    pub tol: f64,
    pub pass: bool,
}

/// Central-difference audit of the derivative envelopes of W on a uniform
/// (t, y) grid, excluding a 2-cell neighborhood of the three kink sets
/// {t = ramp(y)}, {t = nu^{-1/2}} and {|U'| = nu^{1/4}}.
pub fn check_w_lemma(
    profile: &ShearProfile,
    nu: f64,
    sigma: f64,
    opts: WCheckOptions,
) -> Result<WLemmaReport> {
    if !(nu > 0.0 && nu <= 1.0) || !(sigma > 0.0 && sigma <= 1.0) {
        return Err(Error::InvalidParameter("nu and sigma must lie in (0, 1]".into()));
    }
    let cap = 1.0 / nu.sqrt();
    let nu13 = nu.cbrt();
    let sup_u2 = profile.norm_u2();
    let t_max = opts.t_max.unwrap_or(2.0 * cap);
    let h = opts.fd_step.unwrap_or_else(|| (1e-4 * nu.sqrt()).min(1e-6));
    let limit = 1e-3 * nu.sqrt();
    if h > limit {
        return Err(Error::GridTooCoarse { h, limit });
    }
    let dt = t_max / opts.nt as f64;
    let dy = crate::TWO_PI / opts.ny as f64;

    // y-kinks: roots of |U'| - nu^{1/4}
    let floor = nu.powf(0.25);
    let mut y_kinks = Vec::new();
    let fine = 4 * opts.ny;
    let fh = crate::TWO_PI / fine as f64;
    let mut prev = profile.u1(0.0).abs() - floor;
    for j in 1..=fine {
        let y = j as f64 * fh;
        let cur = profile.u1(y).abs() - floor;
        if prev * cur < 0.0 {
            y_kinks.push(y - 0.5 * fh);
        }
        prev = cur;
    }

    let mut max_violation_t = f64::NEG_INFINITY;
    let mut max_violation_y = f64::NEG_INFINITY;
    let mut checked = 0usize;
    for i in 1..opts.nt {
        let t = i as f64 * dt;
        if (t - cap).abs() <= 2.0 * dt || t <= 2.0 * h {
            continue;
        }
        for j in 0..opts.ny {
            let y = j as f64 * dy;
            if y_kinks.iter().any(|&yk| crate::grid::periodic_distance(y, yk) <= 2.0 * dy) {
                continue;
            }
            let (b, _) = eval_b(profile, nu, y);
            let b23 = b.powf(2.0 / 3.0);
            let ramp = 1.0 / (nu13 * b23);
            if (t - ramp).abs() <= 2.0 * dt {
                continue;
            }
            let w = eval_w(nu, sigma, b, t);
            let in_growth = nu13 * b23 * t >= 1.0 && t <= cap;
            let rhs_t = if in_growth { sigma * nu13 * b23 * w } else { 0.0 };
            let fd_t = (eval_w(nu, sigma, b, t + h) - eval_w(nu, sigma, b, t - h)) / (2.0 * h);
            max_violation_t = max_violation_t.max((fd_t.abs() - rhs_t) / w);

            let rhs_y = if nu13 * b23 * t >= 1.0 {
                (2.0 * sigma / 3.0) * nu13 * b.powf(-1.0 / 3.0) * t.min(cap) * sup_u2 * w
            } else {
                0.0
            };
            let (b_plus, _) = eval_b(profile, nu, y + h);
            let (b_minus, _) = eval_b(profile, nu, y - h);
            let fd_y =
                (eval_w(nu, sigma, b_plus, t) - eval_w(nu, sigma, b_minus, t)) / (2.0 * h);
            max_violation_y = max_violation_y.max((fd_y.abs() - rhs_y) / w);
            checked += 1;
        }
    }
    if checked == 0 {
        return Err(Error::InvalidParameter("no smooth sample points survived exclusion".into()));
    }
    let pass = max_violation_t < opts.tol && max_violation_y < opts.tol;
    Ok(WLemmaReport { max_violation_t, max_violation_y, tol: opts.tol, pass })
}
