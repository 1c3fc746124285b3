//! Shear profiles U(y) on the circle: evaluation, derivatives, critical
//! points and sup-norms.
//!
//! Tabulated profiles are interpolated trigonometrically, so derivatives of
//! band-limited tables are exact up to roundoff. Critical points are located
//! by a sign-change scan of U' refined by bisection; profiles whose located
//! critical points carry |U''| below 1e-8 are rejected as degenerate.

use num_complex::Complex64;
use rustfft::FftPlanner;

use crate::error::{Error, Result};
use crate::grid::periodic_distance;
use crate::TWO_PI;

pub const DEGENERACY_TOL: f64 = 1e-8;
const CRITICAL_SCAN: usize = 4096;
const BISECTION_STEPS: usize = 60;
const NORM_SCAN: usize = 16384;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProfileKind {
    Sine,
    Cosine,
    PolynomialTrig,
    Tabulated,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CriticalPoint {
    pub y: f64,
    /// |U''| at the critical point.
    pub curvature: f64,
}

#[derive(Clone)]
enum Repr {
    Sine,
    Cosine,
    /// U = Σ cos_c[m]·cos(my) + Σ sin_c[m]·sin(my)
    Trig { cos_c: Vec<f64>, sin_c: Vec<f64> },
    /// DFT coefficients of a uniform table, FFT index layout.
    Table { hat: Vec<Complex64> },
}

#[derive(Clone)]
pub struct ShearProfile {
    kind: ProfileKind,
    name: String,
    repr: Repr,
    critical: Vec<CriticalPoint>,
    norm_u: f64,
    norm_u1: f64,
    norm_u2: f64,
}

impl std::fmt::Debug for ShearProfile {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ShearProfile")
            .field("kind", &self.kind)
            .field("name", &self.name)
            .field("critical", &self.critical)
            .finish()
    }
}

impl ShearProfile {
    pub fn sine() -> Self {
        // norms known in closed form
        ShearProfile {
            kind: ProfileKind::Sine,
            name: "sine".into(),
            repr: Repr::Sine,
            critical: locate_critical(&Repr::Sine).expect("sine is nondegenerate"),
            norm_u: 1.0,
            norm_u1: 1.0,
            norm_u2: 1.0,
        }
    }

    pub fn cosine() -> Self {
        ShearProfile {
            kind: ProfileKind::Cosine,
            name: "cosine".into(),
            repr: Repr::Cosine,
            critical: locate_critical(&Repr::Cosine).expect("cosine is nondegenerate"),
            norm_u: 1.0,
            norm_u1: 1.0,
            norm_u2: 1.0,
        }
    }

    /// Trigonometric-polynomial profile Σ cos_c[m]·cos(my) + sin_c[m]·sin(my).
    pub fn trig(name: &str, cos_c: Vec<f64>, sin_c: Vec<f64>) -> Result<Self> {
        let repr = Repr::Trig { cos_c, sin_c };
        Self::finish(ProfileKind::PolynomialTrig, name, repr)
    }

    /// U = sin(2y).
    pub fn sin2() -> Self {
        Self::trig("sin2", vec![], vec![0.0, 0.0, 1.0]).expect("sin2 is nondegenerate")
    }

    /// U identically zero (no shear; pure diffusion).
    pub fn zero() -> Self {
        Self::trig("zero", vec![], vec![]).expect("zero profile has no critical points")
    }

    /// Profile from uniform samples (y_j, U_j) on [0, 2π). A trailing row at
    /// y = 2π is accepted as a periodicity witness: it must repeat the first
    /// value to within 1e-10 and is then dropped.
    pub fn from_table(name: &str, rows: &[(f64, f64)]) -> Result<Self> {
        let mut rows = rows.to_vec();
        if rows.len() < 2 {
            return Err(Error::BadTable("need at least 8 rows".into()));
        }
        let last = rows[rows.len() - 1];
        if (last.0 - TWO_PI).abs() < 1e-6 {
            let mismatch = (last.1 - rows[0].1).abs();
            if mismatch > 1e-10 {
                return Err(Error::NonPeriodic { mismatch });
            }
            rows.pop();
        }
        let n = rows.len();
        if n < 8 {
            return Err(Error::BadTable("need at least 8 rows".into()));
        }
        let h = TWO_PI / n as f64;
        for (j, &(y, _)) in rows.iter().enumerate() {
            if (y - j as f64 * h).abs() > 1e-8 {
                return Err(Error::BadTable(format!(
                    "row {j}: y = {y:.12} is not on the uniform grid (expected {:.12})",
                    j as f64 * h
                )));
            }
        }
        let mut hat: Vec<Complex64> = rows.iter().map(|&(_, u)| Complex64::new(u, 0.0)).collect();
        if hat.iter().any(|v| !v.re.is_finite()) {
            return Err(Error::BadTable("non-finite table value".into()));
        }
        FftPlanner::new().plan_fft_forward(n).process(&mut hat);
        Self::finish(ProfileKind::Tabulated, name, Repr::Table { hat })
    }

    /// Parse a CSV of `y,U` rows (optional header, `#` comments allowed).
    pub fn from_csv_path(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let mut rows = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let mut it = line.split(',').map(str::trim);
            let (a, b) = (it.next().unwrap_or(""), it.next().unwrap_or(""));
            match (a.parse::<f64>(), b.parse::<f64>()) {
                (Ok(y), Ok(u)) => rows.push((y, u)),
                _ if lineno == 0 => continue, // header
                _ => {
                    return Err(Error::BadTable(format!("line {}: `{line}`", lineno + 1)));
                }
            }
        }
        let name = format!("table:{}", path.display());
        Self::from_table(&name, &rows)
    }

    /// Resolve a profile by its config name: `sine`, `cosine`, `sin2`,
    /// `zero`, or `table:<path>`.
    pub fn from_spec(spec: &str) -> Result<Self> {
        match spec {
            "sine" => Ok(Self::sine()),
            "cosine" => Ok(Self::cosine()),
            "sin2" => Ok(Self::sin2()),
            "zero" => Ok(Self::zero()),
            s if s.starts_with("table:") => Self::from_csv_path(std::path::Path::new(&s[6..])),
            other => Err(Error::InvalidParameter(format!("unknown profile `{other}`"))),
        }
    }

    fn finish(kind: ProfileKind, name: &str, repr: Repr) -> Result<Self> {
        let critical = locate_critical(&repr)?;
        let norm_u = sup_abs(|y| eval(&repr, y, 0));
        let norm_u1 = sup_abs(|y| eval(&repr, y, 1));
        let norm_u2 = sup_abs(|y| eval(&repr, y, 2));
        Ok(ShearProfile { kind, name: name.into(), repr, critical, norm_u, norm_u1, norm_u2 })
    }

    #[inline]
    pub fn kind(&self) -> ProfileKind {
        self.kind
    }

    #[inline]
    pub fn name(&self) -> &str {
        &self.name
    }

    #[inline]
    pub fn u(&self, y: f64) -> f64 {
        eval(&self.repr, y, 0)
    }

    #[inline]
    pub fn u1(&self, y: f64) -> f64 {
        eval(&self.repr, y, 1)
    }

    #[inline]
    pub fn u2(&self, y: f64) -> f64 {
        eval(&self.repr, y, 2)
    }

    /// (U, U', U'') in one call.
    pub fn derivatives(&self, y: f64) -> (f64, f64, f64) {
        (self.u(y), self.u1(y), self.u2(y))
    }

    /// Critical points sorted by position, with |U''| attached.
    pub fn critical_points(&self) -> &[CriticalPoint] {
        &self.critical
    }

    /// sup |U|
    pub fn norm_u(&self) -> f64 {
        self.norm_u
    }

    /// sup |U'|
    pub fn norm_u1(&self) -> f64 {
        self.norm_u1
    }

    /// sup |U''|
    pub fn norm_u2(&self) -> f64 {
        self.norm_u2
    }

    /// Periodic distance from y to the nearest critical point.
    pub fn distance_to_critical(&self, y: f64) -> Result<f64> {
        if self.critical.is_empty() {
            return Err(Error::NoCriticalPoints);
        }
        Ok(self
            .critical
            .iter()
            .map(|c| periodic_distance(y, c.y))
            .fold(f64::INFINITY, f64::min))
    }
}

fn eval(repr: &Repr, y: f64, order: u32) -> f64 {
    match repr {
        Repr::Sine => match order {
            0 => y.sin(),
            1 => y.cos(),
            2 => -y.sin(),
            _ => unreachable!(),
        },
        Repr::Cosine => match order {
            0 => y.cos(),
            1 => -y.sin(),
            2 => -y.cos(),
            _ => unreachable!(),
        },
        Repr::Trig { cos_c, sin_c } => {
            let mut acc = 0.0;
            for (m, &a) in cos_c.iter().enumerate() {
                let m = m as f64;
                acc += a * match order {
                    0 => (m * y).cos(),
                    1 => -m * (m * y).sin(),
                    2 => -m * m * (m * y).cos(),
                    _ => unreachable!(),
                };
            }
            for (m, &b) in sin_c.iter().enumerate() {
                let m = m as f64;
                acc += b * match order {
                    0 => (m * y).sin(),
                    1 => m * (m * y).cos(),
                    2 => -m * m * (m * y).sin(),
                    _ => unreachable!(),
                };
            }
            acc
        }
        Repr::Table { hat } => {
            let n = hat.len();
            let z = Complex64::new(0.0, y).exp();
            let zc = z.conj();
            let mut acc = Complex64::new(0.0, 0.0);
            // positive wavenumbers 0..n/2
            let mut e = Complex64::new(1.0, 0.0);
            for (m, &c) in hat.iter().enumerate().take(n / 2 + n % 2) {
                acc += c * mult(m as f64, order, n) * e;
                e *= z;
            }
            // negative wavenumbers -n/2..-1 live at indices n/2..n
            let mut e = Complex64::new(1.0, 0.0);
            for step in 1..=(n / 2) {
                e *= zc;
                let idx = n - step;
                let k = -(step as f64);
                acc += hat[idx] * mult(k, order, n) * e;
            }
            acc.re / n as f64
        }
    }
}

/// Derivative multiplier (ik)^order; the Nyquist mode is dropped for odd
/// orders, matching the solver's convention.
fn mult(k: f64, order: u32, n: usize) -> Complex64 {
    let nyquist = k.abs() >= (n / 2) as f64 && n % 2 == 0;
    match order {
        0 => Complex64::new(1.0, 0.0),
        _ if nyquist && order % 2 == 1 => Complex64::new(0.0, 0.0),
        o => Complex64::new(0.0, k).powu(o),
    }
}

fn sign(x: f64) -> i8 {
    if x > 0.0 {
        1
    } else if x < 0.0 {
        -1
    } else {
        0
    }
}

/// Scan U' for sign changes on a uniform grid and refine each bracket by
/// bisection; degenerate roots (|U''| < 1e-8) are rejected.
fn locate_critical(repr: &Repr) -> Result<Vec<CriticalPoint>> {
    let n = CRITICAL_SCAN;
    let h = TWO_PI / n as f64;
    let u1: Vec<f64> = (0..n).map(|j| eval(repr, j as f64 * h, 1)).collect();
    let s: Vec<i8> = u1.iter().map(|&v| sign(v)).collect();
    if s.iter().all(|&v| v == 0) {
        return Ok(vec![]); // no shear variation anywhere
    }
    let mut roots: Vec<f64> = Vec::new();
    for i in 0..n {
        let j = (i + 1) % n;
        if s[i] as i16 * s[j] as i16 == -1 {
            let (mut a, mut b) = (i as f64 * h, (i + 1) as f64 * h);
            let (mut fa, _fb) = (u1[i], u1[j]);
            for _ in 0..BISECTION_STEPS {
                let m = 0.5 * (a + b);
                let fm = eval(repr, m, 1);
                if fm == 0.0 {
                    a = m;
                    b = m;
                    break;
                }
                if (fa > 0.0) == (fm > 0.0) {
                    a = m;
                    fa = fm;
                } else {
                    b = m;
                }
            }
            roots.push((0.5 * (a + b)).rem_euclid(TWO_PI));
        } else if s[i] == 0 && s[(i + n - 1) % n] != 0 {
            // run of exact zeros: a root only if the sign flips across it
            let before = s[(i + n - 1) % n];
            let mut j = i;
            let mut len = 0usize;
            while s[j] == 0 && len < n {
                j = (j + 1) % n;
                len += 1;
            }
            if before * s[j] == -1 {
                let mid = (i as f64 + (len as f64 - 1.0) / 2.0) * h;
                roots.push(mid.rem_euclid(TWO_PI));
            }
        }
    }
    roots.sort_by(|a, b| a.partial_cmp(b).unwrap());
    roots.dedup_by(|a, b| periodic_distance(*a, *b) < 1e-9);
    if roots.len() > 1 && periodic_distance(roots[0], *roots.last().unwrap()) < 1e-9 {
        roots.pop();
    }
    let mut out = Vec::with_capacity(roots.len());
    for y in roots {
        let u2 = eval(repr, y, 2).abs();
        if u2 < DEGENERACY_TOL {
            return Err(Error::DegenerateCritical { y, u2, tol: DEGENERACY_TOL });
        }
        out.push(CriticalPoint { y, curvature: u2 });
    }
    Ok(out)
}

/// sup |g| over the circle: dense scan plus ternary refinement of g².
fn sup_abs(g: impl Fn(f64) -> f64) -> f64 {
    let n = NORM_SCAN;
    let h = TWO_PI / n as f64;
    let mut best = 0.0f64;
    let mut best_j = 0usize;
    for j in 0..n {
        let v = g(j as f64 * h).abs();
        if v > best {
            best = v;
            best_j = j;
        }
    }
    let (mut a, mut b) = ((best_j as f64 - 1.0) * h, (best_j as f64 + 1.0) * h);
    for _ in 0..BISECTION_STEPS {
        let m1 = a + (b - a) / 3.0;
        let m2 = b - (b - a) / 3.0;
        if g(m1).abs() < g(m2).abs() {
            a = m1;
        } else {
            b = m2;
        }
    }
    best.max(g(0.5 * (a + b)).abs())
}
