//! Uniform periodic grid with cached FFT plans and spectral calculus.

use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};
use crate::TWO_PI;

/// Uniform grid on [0, 2π) with n a power of two. Immutable after
/// construction and cheap to clone (plans are shared).
#[derive(Clone)]
pub struct Grid {
    n: usize,
    h: f64,
    y: Vec<f64>,
    /// signed wavenumbers in FFT layout, Nyquist = -n/2
    k: Vec<f64>,
    /// wavenumbers for odd-order derivatives: Nyquist zeroed
    k_odd: Vec<f64>,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for Grid {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Grid").field("n", &self.n).finish()
    }
}

impl Grid {
    pub fn new(n: usize) -> Result<Self> {
        if n < 16 || !n.is_power_of_two() {
            return Err(Error::BadGridSize(n));
        }
        let h = TWO_PI / n as f64;
        let y = (0..n).map(|j| j as f64 * h).collect();
        // FFT layout; index n/2 stores the Nyquist mode as -n/2. The sign is
        // irrelevant for even derivative orders and it is dropped for odd ones.
        let k: Vec<f64> = (0..n)
            .map(|m| if m < n / 2 { m as f64 } else { m as f64 - n as f64 })
            .collect();
        let k_odd = k
            .iter()
            .map(|&k| if k.abs() >= (n / 2) as f64 { 0.0 } else { k })
            .collect();
        let mut planner = FftPlanner::new();
        let fwd = planner.plan_fft_forward(n);
        let inv = planner.plan_fft_inverse(n);
        Ok(Grid { n, h, y, k, k_odd, fwd, inv })
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        false
    }

    #[inline]
    pub fn spacing(&self) -> f64 {
        self.h
    }

    #[inline]
    pub fn nodes(&self) -> &[f64] {
        &self.y
    }

    #[inline]
    pub fn wavenumbers(&self) -> &[f64] {
        &self.k
    }

    /// Forward transform in place (unnormalized).
    pub fn fft(&self, buf: &mut [Complex64]) {
        debug_assert_eq!(buf.len(), self.n);
        self.fwd.process(buf);
    }

    /// Inverse transform in place, including the 1/n normalization.
    pub fn ifft(&self, buf: &mut [Complex64]) {
        debug_assert_eq!(buf.len(), self.n);
        self.inv.process(buf);
        let s = 1.0 / self.n as f64;
        for v in buf.iter_mut() {
            *v *= s;
        }
    }

    pub fn to_spectrum(&self, f: &[Complex64]) -> Vec<Complex64> {
        let mut hat = f.to_vec();
        self.fft(&mut hat);
        hat
    }

    /// Spectral derivative of the given order.
    pub fn derivative(&self, f: &[Complex64], order: u32) -> Vec<Complex64> {
        let mut hat = f.to_vec();
        self.fft(&mut hat);
        self.derivative_from_spectrum_inplace(&mut hat, order);
        self.ifft(&mut hat);
        hat
    }

    /// Multiply a spectrum by (ik)^order in place.
    pub fn derivative_from_spectrum_inplace(&self, hat: &mut [Complex64], order: u32) {
        let ks = if order % 2 == 1 { &self.k_odd } else { &self.k };
        for (v, &k) in hat.iter_mut().zip(ks) {
            let ik = Complex64::new(0.0, k);
            *v *= ik.powu(order);
        }
    }

    /// Trapezoid quadrature of a real sample vector; on a periodic uniform
    /// grid this is the plain h-weighted sum and is spectrally accurate.
    #[inline]
    pub fn quad(&self, vals: impl Iterator<Item = f64>) -> f64 {
        self.h * vals.sum::<f64>()
    }

    pub fn l2_norm_sq(&self, f: &[Complex64]) -> f64 {
        self.quad(f.iter().map(|v| v.norm_sqr()))
    }

    pub fn l2_norm(&self, f: &[Complex64]) -> f64 {
        self.l2_norm_sq(f).sqrt()
    }

    /// Energy fraction carried by the top quartile of wavenumbers
    /// (|k| ≥ 3n/8), measured on a physical-space field.
    pub fn tail_fraction(&self, f: &[Complex64]) -> f64 {
        let hat = self.to_spectrum(f);
        self.tail_fraction_of_spectrum(&hat)
    }

    pub fn tail_fraction_of_spectrum(&self, hat: &[Complex64]) -> f64 {
        let cut = 3.0 * self.n as f64 / 8.0;
        let mut tail = 0.0;
        let mut total = 0.0;
        for (v, &k) in hat.iter().zip(&self.k) {
            let e = v.norm_sqr();
            total += e;
            if k.abs() >= cut {
                tail += e;
            }
        }
        if total == 0.0 {
            0.0
        } else {
            tail / total
        }
    }
}

/// Distance on the circle of circumference 2π.
pub fn periodic_distance(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(TWO_PI);
    d.min(TWO_PI - d)
}

/// Smallest admissible grid for viscosity `nu` and shear slope `sup_u1`:
/// the next power of two at or above 8·(sup|U'|·nu^{-1/3} + nu^{-1/4}),
/// never below 16.
pub fn resolution_for(sup_u1: f64, nu: f64) -> usize {
    let target = 8.0 * (sup_u1 * nu.powf(-1.0 / 3.0) + nu.powf(-0.25));
    let mut n = 16usize;
    while (n as f64) < target {
        n *= 2;
    }
    n
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn rejects_bad_sizes() {
        assert!(Grid::new(12).is_err());
        assert!(Grid::new(8).is_err());
        assert!(Grid::new(48).is_err());
        assert!(Grid::new(16).is_ok());
    }

    #[test]
    fn derivative_of_plane_wave_is_exact() {
        let g = Grid::new(64).unwrap();
        for m in [1i32, 3, -5, 7] {
            let f: Vec<Complex64> = g
                .nodes()
                .iter()
                .map(|&y| (Complex64::new(0.0, m as f64 * y)).exp())
                .collect();
            let df = g.derivative(&f, 1);
            for (v, w) in df.iter().zip(&f) {
                let expect = Complex64::new(0.0, m as f64) * w;
                assert!((v - expect).norm() < 1e-12, "m = {m}");
            }
            let d2f = g.derivative(&f, 2);
            for (v, w) in d2f.iter().zip(&f) {
                let expect = -((m * m) as f64) * w;
                assert!((v - expect).norm() < 1e-11, "m = {m}");
            }
        }
    }

    #[test]
    fn third_derivative_matches_analytic() {
        let g = Grid::new(128).unwrap();
        let f: Vec<Complex64> = g.nodes().iter().map(|&y| Complex64::new((2.0 * y).sin(), 0.0)).collect();
        let d3 = g.derivative(&f, 3);
        for (v, &y) in d3.iter().zip(g.nodes()) {
            assert_relative_eq!(v.re, -8.0 * (2.0 * y).cos(), epsilon = 1e-9);
            assert!(v.im.abs() < 1e-9);
        }
    }

    #[test]
    fn quadrature_is_spectrally_accurate() {
        let g = Grid::new(32).unwrap();
        // ∫ (2 + cos y)² dy = 2π(4 + 1/2)
        let int = g.quad(g.nodes().iter().map(|&y| (2.0 + y.cos()).powi(2)));
        assert_relative_eq!(int, TWO_PI * 4.5, epsilon = 1e-12);
    }

    #[test]
    fn parseval_holds() {
        let g = Grid::new(64).unwrap();
        let f: Vec<Complex64> = g
            .nodes()
            .iter()
            .map(|&y| Complex64::new(y.sin() + 0.3 * (3.0 * y).cos(), 0.2 * (2.0 * y).sin()))
            .collect();
        let hat = g.to_spectrum(&f);
        let phys = g.l2_norm_sq(&f);
        let spec: f64 = hat.iter().map(|v| v.norm_sqr()).sum::<f64>() * g.spacing() / g.len() as f64;
        assert_relative_eq!(phys, spec, max_relative = 1e-13);
    }

    #[test]
    fn tail_fraction_detects_high_modes() {
        let g = Grid::new(64).unwrap();
        let smooth: Vec<Complex64> = g.nodes().iter().map(|&y| Complex64::new(y.cos(), 0.0)).collect();
        assert!(g.tail_fraction(&smooth) < 1e-28);
        let rough: Vec<Complex64> = g
            .nodes()
            .iter()
            .map(|&y| Complex64::new((30.0 * y).cos(), 0.0))
            .collect();
        assert!(g.tail_fraction(&rough) > 0.99);
    }

    #[test]
    fn periodic_distance_wraps() {
        assert_relative_eq!(periodic_distance(0.1, TWO_PI - 0.1), 0.2, epsilon = 1e-14);
        assert_relative_eq!(periodic_distance(1.0, 4.0), 3.0, epsilon = 1e-14);
        assert_eq!(periodic_distance(2.0, 2.0), 0.0);
    }

    #[test]
    fn resolution_rule_examples() {
        // sup|U'| = 1: 8·(nu^{-1/3} + nu^{-1/4})
        assert_eq!(resolution_for(1.0, 1e-2), 64);
        assert_eq!(resolution_for(1.0, 1e-3), 128);
        assert_eq!(resolution_for(1.0, 1e-4), 256);
        assert_eq!(resolution_for(1.0, 1e-6), 2048);
        assert_eq!(resolution_for(0.0, 1.0), 16);
    }
}
