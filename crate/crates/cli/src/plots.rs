use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use hypoflow::functional::HypoParams;
use hypoflow::io::TrajectoryHeader;
use hypoflow::weights::WeightSet;
use hypoflow::{Grid, ShearProfile};

use crate::config::{fnv1a, ExperimentConfig};
use crate::Failure;

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 420.0;
const MARGIN: f64 = 56.0;
const MESH: usize = 128;

fn missing(path: &Path) -> Failure {
    Failure::Config(format!("missing data: {}", path.display()))
}

fn read(path: &Path) -> Result<String, Failure> {
    std::fs::read_to_string(path).map_err(|_| missing(path))
}

fn parse_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T, Failure> {
    serde_json::from_str(&read(path)?)
        .map_err(|e| Failure::Config(format!("{}: {e}", path.display())))
}

/// (t, Φ) pairs out of a ledger file.
fn read_ledger(path: &Path) -> Result<Vec<(f64, f64)>, Failure> {
    let text = read(path)?;
    let mut rows = Vec::new();
    for line in text.lines().skip(1) {
        let mut cols = line.split(',');
        let (Some(t), Some(phi)) = (cols.next(), cols.next()) else { continue };
        match (t.parse(), phi.parse()) {
            (Ok(t), Ok(phi)) => rows.push((t, phi)),
            _ => return Err(Failure::Config(format!("{}: malformed row", path.display()))),
        }
    }
    if rows.is_empty() {
        return Err(missing(path));
    }
    Ok(rows)
}

struct Frame {
    x0: f64,
    x1: f64,
    y0: f64,
    y1: f64,
}

impl Frame {
    fn x(&self, v: f64) -> f64 {
        MARGIN + (v - self.x0) / (self.x1 - self.x0) * (WIDTH - 2.0 * MARGIN)
    }

    fn y(&self, v: f64) -> f64 {
        HEIGHT - MARGIN - (v - self.y0) / (self.y1 - self.y0) * (HEIGHT - 2.0 * MARGIN)
    }
}

fn svg_open(svg: &mut String, hash: u64) {
    let _ = writeln!(
        svg,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{WIDTH}\" height=\"{HEIGHT}\" viewBox=\"0 0 {WIDTH} {HEIGHT}\">"
    );
    let _ = writeln!(svg, "<!-- config-hash: {hash:016x} -->");
    let _ = writeln!(svg, "<rect width=\"{WIDTH}\" height=\"{HEIGHT}\" fill=\"#ffffff\"/>");
}

fn axes(svg: &mut String, f: &Frame, xlabel: &str, ylabel: &str) {
    let (l, r) = (MARGIN, WIDTH - MARGIN);
    let (t, b) = (MARGIN, HEIGHT - MARGIN);
    let _ = writeln!(
        svg,
        "<path d=\"M {l:.1} {t:.1} L {l:.1} {b:.1} L {r:.1} {b:.1}\" fill=\"none\" stroke=\"#000000\" stroke-width=\"1\"/>"
    );
    for i in 0..=4 {
        let xv = f.x0 + (f.x1 - f.x0) * i as f64 / 4.0;
        let yv = f.y0 + (f.y1 - f.y0) * i as f64 / 4.0;
        let xp = f.x(xv);
        let yp = f.y(yv);
        let _ = writeln!(svg, "<line x1=\"{xp:.1}\" y1=\"{b:.1}\" x2=\"{xp:.1}\" y2=\"{:.1}\" stroke=\"#000000\"/>", b + 4.0);
        let _ = writeln!(
            svg,
            "<text x=\"{xp:.1}\" y=\"{:.1}\" font-size=\"11\" text-anchor=\"middle\" font-family=\"monospace\">{xv:.3e}</text>",
            b + 16.0
        );
        let _ = writeln!(svg, "<line x1=\"{:.1}\" y1=\"{yp:.1}\" x2=\"{l:.1}\" y2=\"{yp:.1}\" stroke=\"#000000\"/>", l - 4.0);
        let _ = writeln!(
            svg,
            "<text x=\"{:.1}\" y=\"{:.1}\" font-size=\"11\" text-anchor=\"end\" font-family=\"monospace\">{yv:.2}</text>",
            l - 6.0,
            yp + 4.0
        );
    }
    let _ = writeln!(
        svg,
        "<text x=\"{:.1}\" y=\"{:.1}\" font-size=\"12\" text-anchor=\"middle\" font-family=\"monospace\">{xlabel}</text>",
        WIDTH / 2.0,
        HEIGHT - 12.0
    );
    let _ = writeln!(
        svg,
        "<text x=\"14\" y=\"{:.1}\" font-size=\"12\" text-anchor=\"middle\" font-family=\"monospace\" transform=\"rotate(-90 14 {:.1})\">{ylabel}</text>",
        HEIGHT / 2.0,
        HEIGHT / 2.0
    );
}

fn polyline(svg: &mut String, f: &Frame, pts: &[(f64, f64)], stroke: &str, dash: bool) {
    let mut s = String::new();
    for &(x, y) in pts {
        let _ = write!(s, "{:.2},{:.2} ", f.x(x), f.y(y));
    }
    let dash = if dash { " stroke-dasharray=\"6 4\"" } else { "" };
    let _ = writeln!(
        svg,
        "<polyline fill=\"none\" stroke=\"{stroke}\" stroke-width=\"1.5\"{dash} points=\"{}\"/>",
        s.trim_end()
    );
}

/// log10 Φ(t) with the fitted envelope overlaid when a rate was certified.
fn decay_svg(
    ledger: &[(f64, f64)],
    nu: f64,
    sigma: f64,
    delta: Option<f64>,
    hash: u64,
) -> String {
    let pts: Vec<(f64, f64)> = ledger
        .iter()
        .filter(|&&(_, p)| p > 0.0)
        .map(|&(t, p)| (t, p.log10()))
        .collect();
    let x1 = pts.last().map(|p| p.0).unwrap_or(1.0).max(1e-12);
    let ylo = pts.iter().map(|p| p.1).fold(f64::INFINITY, f64::min);
    let yhi = pts.iter().map(|p| p.1).fold(f64::NEG_INFINITY, f64::max);
    let pad = (yhi - ylo).max(1e-3) * 0.05;
    let f = Frame { x0: 0.0, x1, y0: ylo - pad, y1: yhi + 3.0 + pad };

    let mut svg = String::new();
    svg_open(&mut svg, hash);
    axes(&mut svg, &f, "t", "log10 Phi");
    if let (Some(d), Some(&(_, phi0))) = (delta, ledger.first()) {
        let log_bound = |t: f64| (3.0 + phi0.ln() - 2.0 * sigma - d * nu.sqrt() * t) / std::f64::consts::LN_10;
        let env: Vec<(f64, f64)> = (0..=64)
            .map(|i| {
                let t = x1 * i as f64 / 64.0;
                (t, log_bound(t))
            })
            .collect();
        polyline(&mut svg, &f, &env, "#d62728", true);
    }
    polyline(&mut svg, &f, &pts, "#1f77b4", false);
    svg.push_str("</svg>\n");
    svg
}

fn heat_color(v: f64) -> String {
    let v = v.clamp(0.0, 1.0);
    let r = (255.0 * v).round() as u8;
    let g = (64.0 + 128.0 * v).round() as u8;
    let b = (192.0 - 160.0 * v).round() as u8;
    format!("#{r:02x}{g:02x}{b:02x}")
}

/// log W(t, y) heat map through twice the saturation time.
fn logw_svg(profile: &ShearProfile, nu: f64, sigma: f64, n: usize, hash: u64) -> Result<String, Failure> {
    let rows = n.min(MESH);
    let grid = Grid::new(rows).map_err(|e| Failure::Config(e.to_string()))?;
    let cols = MESH;
    let t_max = 2.0 / nu.sqrt();
    let mut field = vec![0.0f64; rows * cols];
    let mut vmax = 0.0f64;
    for j in 0..cols {
        let t = t_max * j as f64 / (cols - 1) as f64;
        let ws = WeightSet::new(&grid, profile, nu, sigma, t).map_err(|e| Failure::Config(e.to_string()))?;
        for i in 0..rows {
            field[i * cols + j] = ws.log_w[i];
            vmax = vmax.max(ws.log_w[i]);
        }
    }
    let vmax = vmax.max(1e-12);

    let f = Frame { x0: 0.0, x1: t_max, y0: 0.0, y1: 2.0 * std::f64::consts::PI };
    let mut svg = String::new();
    svg_open(&mut svg, hash);
    let cw = (WIDTH - 2.0 * MARGIN) / cols as f64;
    let ch = (HEIGHT - 2.0 * MARGIN) / rows as f64;
    for i in 0..rows {
        let y = grid.nodes()[i];
        for j in 0..cols {
            let v = field[i * cols + j] / vmax;
            let _ = writeln!(
                svg,
                "<rect x=\"{:.2}\" y=\"{:.2}\" width=\"{:.2}\" height=\"{:.2}\" fill=\"{}\"/>",
                MARGIN + j as f64 * cw,
                f.y(y) - ch,
                cw + 0.1,
                ch + 0.1,
                heat_color(v)
            );
        }
    }
    axes(&mut svg, &f, "t", "y");
    let _ = writeln!(
        svg,
        "<text x=\"{:.1}\" y=\"{:.1}\" font-size=\"11\" text-anchor=\"end\" font-family=\"monospace\">max log W = {vmax:.4}</text>",
        WIDTH - MARGIN,
        MARGIN - 8.0
    );
    let _ = writeln!(
        svg,
        "<text x=\"{:.1}\" y=\"{:.1}\" font-size=\"11\" text-anchor=\"start\" font-family=\"monospace\">critical-band plateau = sigma = {sigma:.4}</text>",
        MARGIN,
        MARGIN - 8.0
    );
    svg.push_str("</svg>\n");
    Ok(svg)
}

#[derive(serde::Deserialize)]
struct SummaryBits {
    delta_fit: Option<f64>,
    beta_used: f64,
}

pub fn emit(out: &Path) -> Result<(), Failure> {
    let config_path = out.join("config.json");
    let config_text = read(&config_path)?;
    let hash = fnv1a(config_text.as_bytes());
    let cfg: ExperimentConfig = parse_json(&config_path)?;
    let profile = ShearProfile::from_spec(&cfg.profile).map_err(|e| Failure::Config(e.to_string()))?;

    let mut dirs: Vec<PathBuf> = std::fs::read_dir(out)
        .map_err(|_| missing(out))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_dir() && p.file_name().is_some_and(|n| n.to_string_lossy().starts_with("nu_")))
        .collect();
    dirs.sort();
    if dirs.is_empty() {
        return Err(Failure::Config(format!("missing data: no nu_* directories under {}", out.display())));
    }

    for dir in &dirs {
        let header: TrajectoryHeader = parse_json(&dir.join("trajectory.json"))?;
        let summary: SummaryBits = parse_json(&dir.join("summary.json"))?;
        let sigma = match cfg.sigma.value() {
            Some(s) => s,
            None => {
                HypoParams::from_beta(summary.beta_used)
                    .map_err(|e| Failure::Config(e.to_string()))?
                    .sigma
            }
        };
        let ledger = read_ledger(&dir.join("ledger.csv"))?;
        let decay = decay_svg(&ledger, header.nu, sigma, summary.delta_fit, hash);
        std::fs::write(dir.join("decay.svg"), decay)
            .map_err(|e| Failure::Config(format!("write decay.svg: {e}")))?;
        let logw = logw_svg(&profile, header.nu, sigma, header.n, hash)?;
        std::fs::write(dir.join("logw.svg"), logw)
            .map_err(|e| Failure::Config(format!("write logw.svg: {e}")))?;
        println!("plots: {}", dir.display());
    }
    Ok(())
}
