//! Batch jobs behind the `al-lab` binary: configuration resolution
//! (flags over file over defaults), the six commands and their output files.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use crate::acceptance::{self, CriterionReport, MONITOR_Z};
use crate::darboux::{
    asymptotic_phase_shift, even_heteroclinic_orbit, even_melnikov_vector, fitted_phase, sample_orbit, Ear,
    OrbitParams,
};
use crate::error::Error;
use crate::evolve::{
    fit_decay_rate, integrate, monitor_invariants, pack, unpack, DecayFit, Field, IntegratorSpec, InvariantDrift,
    InvariantDriftReport, Trajectory,
};
use crate::floquet::uniform::UniformSpectrum;
use crate::floquet::{
    default_seeds, discriminant, find_critical_points, uniform_spectral_points, CatalogEntry, ClassifyTolerances,
    SpectralPoint,
};
use crate::io::{float, json_with_meta, parse_key_values, CsvWriter, Meta};
use crate::lattice::{
    amplitude_window, from_block_coords, vtheta_angle, AmplitudeWindow, BlockCoords, LatticeSize, LatticeState,
    PerturbationParams,
};
use crate::linalg::C64;
use crate::melnikov::{kappa, melnikov_coefficients, transversality_scan, ScanCell, ZeroSurfaceSample};
use crate::resonance::{
    leading_fixed_points, phase_portrait, refine_fixed_points, rescaled_hamiltonian, separatrix_levels,
    AnnulusFixedPoint, AnnulusParams, ContourGrid,
};

/// Failure of a command, mapped onto the process exit code.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("numerical failure: {0}")]
    Numerical(Error),
    #[error("i/o error: {0}")]
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) | CliError::Io(_) => 2,
            CliError::Numerical(_) => 3,
        }
    }

    /// JSON failure report for stderr.
    pub fn report(&self) -> String {
        let kind = match self {
            CliError::Config(_) => "config",
            CliError::Numerical(_) => "numerical",
            CliError::Io(_) => "io",
        };
        serde_json::json!({
            "status": "error",
            "kind": kind,
            "exit_code": self.exit_code(),
            "message": self.to_string(),
        })
        .to_string()
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        match e {
            Error::InvalidParameter(_)
            | Error::LatticeTooSmall(_)
            | Error::NotEven { .. }
            | Error::LengthMismatch { .. } => CliError::Config(e.to_string()),
            other => CliError::Numerical(other),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;

pub const COMMANDS: [&str; 6] = ["spectrum", "orbit", "melnikov", "resonance", "evolve", "verify"];

fn defaults(command: &str) -> CliResult<Vec<(&'static str, &'static str)>> {
    let mut d = vec![("out", "."), ("threads", "auto")];
    d.extend(match command {
        "spectrum" => vec![
            ("n", "6"),
            ("a", "auto"),
            ("window_cap", "12"),
            ("grid", "512"),
            ("zero_state", "false"),
            ("require_window", "false"),
            ("z_min", "0.25"),
            ("z_max", "4"),
        ],
        "orbit" => vec![
            ("n", "6"),
            ("a", "auto"),
            ("omega", "auto"),
            ("gamma", "0"),
            ("p", "0"),
            ("ear", "1"),
            ("t_range", "auto"),
            ("t_samples", "241"),
            ("window_cap", "12"),
        ],
        "melnikov" => vec![
            ("n", "6"),
            ("omega", "1.3"),
            ("ear", "1"),
            ("alpha1", "0.2"),
            ("alpha2", "1"),
            ("gamma", "0.8"),
            ("a_range", "auto"),
            ("a_samples", "8"),
            ("gamma_samples", "8"),
            ("a_equals_omega", "false"),
            ("window_cap", "12"),
        ],
        "resonance" => vec![
            ("n", "3"),
            ("omega", "1"),
            ("alpha1", "1"),
            ("alpha2", "1"),
            ("eta", "0.1"),
            ("delta0", "0.05"),
            ("steps", "8"),
            ("y_range", "auto"),
            ("nxi", "256"),
            ("ny", "128"),
            ("portrait_nxi", "128"),
            ("portrait_ny", "101"),
        ],
        "evolve" => vec![
            ("field", "integrable"),
            ("init", "perturbed"),
            ("n", "6"),
            ("a", "auto"),
            ("omega", "auto"),
            ("gamma", "0"),
            ("p", "0"),
            ("ear", "1"),
            ("b1", "0.01"),
            ("epsilon", "0"),
            ("alpha1", "1"),
            ("alpha2", "1"),
            ("eta", "0.1"),
            ("y0", "0.3"),
            ("xi0", "1"),
            ("t_start", "0"),
            ("t_end", "1"),
            ("rel_tol", "1e-10"),
            ("abs_tol", "1e-12"),
            ("samples", "101"),
            ("window_cap", "12"),
        ],
        "verify" => vec![("quick", "false")],
        other => return Err(CliError::Config(format!("unknown command '{other}'"))),
    });
    Ok(d)
}

/// Fully resolved key/value configuration of one job.
#[derive(Debug, Clone, PartialEq)]
pub struct JobConfig {
    pub command: String,
    pub values: BTreeMap<String, String>,
}

impl JobConfig {
    /// Merge defaults, then the config file, then flags. Unknown keys are
    /// rejected.
    pub fn resolve(command: &str, file: Option<&Path>, flags: &BTreeMap<String, String>) -> CliResult<Self> {
        let mut values: BTreeMap<String, String> =
            defaults(command)?.into_iter().map(|(k, v)| (k.to_string(), v.to_string())).collect();
        let mut layers = Vec::new();
        if let Some(path) = file {
            let text = fs::read_to_string(path)
                .map_err(|e| CliError::Config(format!("cannot read config {}: {e}", path.display())))?;
            layers.push(parse_key_values(&text)?);
        }
        layers.push(flags.iter().map(|(k, v)| (k.replace('-', "_"), v.clone())).collect());
        for layer in layers {
            for (k, v) in layer {
                if !values.contains_key(&k) {
                    return Err(CliError::Config(format!("unknown key '{k}' for command '{command}'")));
                }
                values.insert(k, v);
            }
        }
        Ok(JobConfig {
            command: command.to_string(),
            values,
        })
    }

    fn raw(&self, key: &str) -> &str {
        self.values.get(key).map(String::as_str).unwrap_or("")
    }

    fn is_auto(&self, key: &str) -> bool {
        self.raw(key) == "auto"
    }

    fn set(&mut self, key: &str, v: String) {
        self.values.insert(key.to_string(), v);
    }

    pub fn f64(&self, key: &str) -> CliResult<f64> {
        let s = self.raw(key);
        s.parse::<f64>()
            .ok()
            .filter(|v| v.is_finite())
            .ok_or_else(|| CliError::Config(format!("{key} = '{s}' is not a finite number")))
    }

    pub fn usize(&self, key: &str) -> CliResult<usize> {
        let s = self.raw(key);
        s.parse::<usize>()
            .map_err(|_| CliError::Config(format!("{key} = '{s}' is not a nonnegative integer")))
    }

    pub fn bool(&self, key: &str) -> CliResult<bool> {
        match self.raw(key) {
            "true" | "1" | "yes" => Ok(true),
            "false" | "0" | "no" => Ok(false),
            s => Err(CliError::Config(format!("{key} = '{s}' is not a boolean"))),
        }
    }

    pub fn pair(&self, key: &str) -> CliResult<(f64, f64)> {
        let s = self.raw(key);
        let parts: Vec<f64> = s
            .split([',', ' '])
            .filter(|p| !p.is_empty())
            .map(|p| p.parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|_| CliError::Config(format!("{key} = '{s}' is not a pair of numbers")))?;
        match parts[..] {
            [a, b] if a.is_finite() && b.is_finite() => Ok((a, b)),
            _ => Err(CliError::Config(format!("{key} = '{s}' must hold exactly two numbers"))),
        }
    }

    pub fn ear(&self) -> CliResult<Ear> {
        let s = self.raw("ear");
        let v: i32 = s.parse().map_err(|_| CliError::Config(format!("ear = '{s}' must be 1 or -1")))?;
        Ok(Ear::from_sign(v)?)
    }

    fn n(&self) -> CliResult<usize> {
        let n = self.usize("n")?;
        if n < 3 {
            return Err(CliError::Config(format!("n = {n} must be at least 3")));
        }
        Ok(n)
    }

    fn positive(&self, key: &str) -> CliResult<f64> {
        let v = self.f64(key)?;
        if v <= 0.0 {
            return Err(CliError::Config(format!("{key} = {v} must be positive")));
        }
        Ok(v)
    }

    /// Resolve `a = auto` to the window midpoint (capped by window_cap).
    fn amplitude(&mut self, n: usize) -> CliResult<f64> {
        if self.is_auto("a") {
            let cap = self.f64("window_cap")?;
            let a = amplitude_window(n).midpoint(cap);
            self.set("a", float(a));
        }
        self.f64("a")
    }

    fn omega_or(&mut self, fallback: f64) -> CliResult<f64> {
        if self.is_auto("omega") {
            self.set("omega", float(fallback));
        }
        self.f64("omega")
    }

    pub fn out_dir(&self) -> PathBuf {
        PathBuf::from(self.raw("out"))
    }

    /// Thread count from the config, else AL_LAB_THREADS, else all cores.
    pub fn threads(&self) -> CliResult<Option<usize>> {
        let raw = if self.is_auto("threads") {
            std::env::var("AL_LAB_THREADS").ok()
        } else {
            Some(self.raw("threads").to_string())
        };
        match raw {
            None => Ok(None),
            Some(s) => match s.trim().parse::<usize>() {
                Ok(n) if n > 0 => Ok(Some(n)),
                _ => Err(CliError::Config(format!("threads = '{s}' must be a positive integer"))),
            },
        }
    }

    pub fn meta(&self) -> Meta {
        let mut cfg = self.values.clone();
        cfg.remove("out");
        cfg.remove("threads");
        Meta::new(&self.command, cfg)
    }
}

/// Install the global thread pool once; later calls keep the first pool.
pub fn init_threads(n: Option<usize>) {
    if let Some(n) = n {
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
}

fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![a],
        _ => (0..n).map(|k| a + (b - a) * k as f64 / (n - 1) as f64).collect(),
    }
}

fn create(dir: &Path, name: &str) -> CliResult<BufWriter<File>> {
    fs::create_dir_all(dir)?;
    Ok(BufWriter::new(File::create(dir.join(name))?))
}

fn csv(dir: &Path, name: &str, meta: &Meta, cols: &[&str]) -> CliResult<CsvWriter<BufWriter<File>>> {
    Ok(CsvWriter::new(create(dir, name)?, Some(meta), cols)?)
}

fn write_json<T: serde::Serialize>(dir: &Path, name: &str, value: &T, meta: &Meta) -> CliResult<PathBuf> {
    let mut f = create(dir, name)?;
    writeln!(f, "{}", json_with_meta(value, meta)?)?;
    f.flush()?;
    Ok(dir.join(name))
}

/// Files written by a command.
#[derive(Debug, Clone, PartialEq)]
pub struct Outputs {
    pub files: Vec<PathBuf>,
}

#[derive(serde::Serialize)]
struct SpectrumPoints {
    n: usize,
    a: f64,
    zero_state: bool,
    window: AmplitudeWindow,
    catalog: Vec<CatalogEntry>,
    critical_points: Vec<SpectralPoint>,
    failed_seeds: Vec<(C64, String)>,
}

/// Discriminant along the unit circle and the positive real axis, plus the
/// closed-form catalog and a critical-point search.
pub fn cmd_spectrum(cfg: &mut JobConfig) -> CliResult<Outputs> {
    let n = cfg.n()?;
    let zero_state = cfg.bool("zero_state")?;
    let window = amplitude_window(n);
    let a = if zero_state { 0.0 } else { cfg.amplitude(n)? };
    if cfg.bool("require_window")? && !window.contains(a) {
        return Err(CliError::Config(format!(
            "a = {a} lies outside the amplitude window (N tan(π/N), N tan(2π/N)) = ({}, {}) for N = {n}",
            window.lower, window.upper
        )));
    }
    if a < 0.0 {
        return Err(CliError::Config(format!("a = {a} must be nonnegative")));
    }
    let grid = cfg.usize("grid")?.max(2);
    let (z_min, z_max) = (cfg.positive("z_min")?, cfg.positive("z_max")?);
    if z_max <= z_min {
        return Err(CliError::Config("z_max must exceed z_min".into()));
    }
    let size = LatticeSize::new(n)?;
    let state = if zero_state {
        LatticeState::zeros(size)
    } else {
        LatticeState::uniform(size, C64::new(a, 0.0))
    };
    let meta = cfg.meta();
    let dir = cfg.out_dir();
    let mut w = csv(
        &dir,
        "spectrum.csv",
        &meta,
        &["path", "s", "re_z", "im_z", "re_delta", "im_delta", "d", "re_delta_tilde", "im_delta_tilde"],
    )?;
    let circle = (0..grid).map(|k| {
        let th = 2.0 * PI * k as f64 / grid as f64;
        ("circle", th, C64::from_polar(1.0, th))
    });
    let real = linspace(z_min.ln(), z_max.ln(), grid)
        .into_iter()
        .map(|l| ("real", l.exp(), C64::new(l.exp(), 0.0)));
    for (path, s, z) in circle.chain(real) {
        let d = discriminant(z, &state)?;
        w.row(&[
            path.to_string(),
            float(s),
            float(z.re),
            float(z.im),
            float(d.delta.re),
            float(d.delta.im),
            float(d.d),
            float(d.delta_tilde.re),
            float(d.delta_tilde.im),
        ])?;
    }
    w.finish()?;
    let catalog = if zero_state { Vec::new() } else { uniform_spectral_points(a, n)? };
    let seeds = if zero_state {
        (0..2 * n).map(|k| C64::from_polar(1.0, PI * (k as f64 + 0.5) / n as f64)).collect()
    } else {
        default_seeds(&state)
    };
    let search = find_critical_points(&state, &seeds, &ClassifyTolerances::default())?;
    let points = SpectrumPoints {
        n,
        a,
        zero_state,
        window,
        catalog,
        critical_points: search.points,
        failed_seeds: search.failures.into_iter().map(|(z, e)| (z, e.to_string())).collect(),
    };
    let pj = write_json(&dir, "points.json", &points, &meta)?;
    Ok(Outputs {
        files: vec![dir.join("spectrum.csv"), pj],
    })
}

#[derive(serde::Serialize)]
struct Asymptotics {
    mu: f64,
    two_mu: f64,
    z: f64,
    phi: f64,
    vtheta: f64,
    decay_fit: DecayFit,
    fit_window: (f64, f64),
    theta_plus: f64,
    theta_minus: f64,
    fitted_phase_plus: f64,
    fitted_phase_minus: f64,
}

fn orbit_params(cfg: &mut JobConfig) -> CliResult<OrbitParams> {
    let n = cfg.n()?;
    let a = cfg.amplitude(n)?;
    let omega = cfg.omega_or(a)?;
    Ok(OrbitParams::new(a, omega, cfg.f64("gamma")?, cfg.f64("p")?, cfg.ear()?, n)?)
}

/// Even heteroclinic orbit, its Melnikov vector and the t → ±∞ asymptotics.
pub fn cmd_orbit(cfg: &mut JobConfig) -> CliResult<Outputs> {
    let p = orbit_params(cfg)?;
    if cfg.is_auto("t_range") {
        cfg.set("t_range", format!("{},{}", float(-6.0 / p.mu), float(6.0 / p.mu)));
    }
    let (t0, t1) = cfg.pair("t_range")?;
    let times = if t0 == t1 { vec![t0] } else { linspace(t0, t1, cfg.usize("t_samples")?.max(2)) };
    let meta = cfg.meta();
    let dir = cfg.out_dir();
    let samples = sample_orbit(&p, &times)?;
    let mut w = csv(&dir, "orbit.csv", &meta, &["t", "n", "re_q", "im_q", "distance_to_circle"])?;
    for s in &samples {
        for (k, q) in s.q.iter().enumerate() {
            w.row(&[float(s.t), k.to_string(), float(q.re), float(q.im), float(s.distance_to_circle)])?;
        }
    }
    w.finish()?;
    let mut w = csv(&dir, "melnikov_vector.csv", &meta, &["t", "n", "re_dq", "im_dq", "re_dr", "im_dr"])?;
    for &t in &times {
        let g = even_melnikov_vector(&p, t);
        for k in 0..p.n {
            w.row(&[
                float(t),
                k.to_string(),
                float(g.dq[k].re),
                float(g.dq[k].im),
                float(g.dr[k].re),
                float(g.dr[k].im),
            ])?;
        }
    }
    w.finish()?;
    let fit_window = (2.0 / p.mu, 5.0 / p.mu);
    let fit_times = linspace(fit_window.0, fit_window.1, 31);
    let fit_samples: Vec<(f64, f64)> = sample_orbit(&p, &fit_times)?
        .into_iter()
        .map(|s| (s.t, s.distance_to_circle))
        .collect();
    let (theta_plus, theta_minus) = asymptotic_phase_shift(&p);
    let far = 8.0 / p.mu;
    let phase = |t: f64| -> CliResult<f64> {
        Ok(fitted_phase(&even_heteroclinic_orbit(&p, t)?, p.q_c(t)).rem_euclid(2.0 * PI))
    };
    let asym = Asymptotics {
        mu: p.mu,
        two_mu: 2.0 * p.mu,
        z: p.z,
        phi: p.phi,
        vtheta: p.vtheta(),
        decay_fit: fit_decay_rate(&fit_samples)?,
        fit_window,
        theta_plus,
        theta_minus,
        fitted_phase_plus: phase(far)?,
        fitted_phase_minus: phase(-far)?,
    };
    let aj = write_json(&dir, "asymptotics.json", &asym, &meta)?;
    Ok(Outputs {
        files: vec![dir.join("orbit.csv"), dir.join("melnikov_vector.csv"), aj],
    })
}

#[derive(serde::Serialize)]
struct TransversalitySummary {
    alpha: (f64, f64),
    omega: Option<f64>,
    a_equals_omega: bool,
    n: usize,
    ear: Ear,
    total_cells: usize,
    transversal_cells: usize,
    failed_cells: usize,
    transversal_a0_range: Option<(f64, f64)>,
}

/// κ scan, zero surface and transversality scan over an (a₀, γ) grid.
pub fn cmd_melnikov(cfg: &mut JobConfig) -> CliResult<Outputs> {
    let n = cfg.n()?;
    let ear = cfg.ear()?;
    let alpha = (cfg.f64("alpha1")?, cfg.f64("alpha2")?);
    let gamma = cfg.f64("gamma")?;
    let a_eq = cfg.bool("a_equals_omega")?;
    let omega = cfg.f64("omega")?;
    if cfg.is_auto("a_range") {
        let w = amplitude_window(n);
        let hi = w.upper.min(cfg.f64("window_cap")?);
        let pad = 0.05 * (hi - w.lower);
        cfg.set("a_range", format!("{},{}", float(w.lower + pad), float(hi - pad)));
    }
    let (a_lo, a_hi) = cfg.pair("a_range")?;
    let a_grid = linspace(a_lo, a_hi, cfg.usize("a_samples")?.max(1));
    let gs = cfg.usize("gamma_samples")?.max(1);
    let g_grid: Vec<f64> = (0..gs).map(|j| 2.0 * PI * (j as f64 + 0.5) / gs as f64).collect();
    let meta = cfg.meta();
    let dir = cfg.out_dir();
    let om = |a: f64| if a_eq { a } else { omega };

    let mut w = csv(&dir, "kappa_scan.csv", &meta, &["a", "omega", "gamma", "f1", "f2", "kappa"])?;
    for &a in &a_grid {
        let p = OrbitParams::new(a, om(a), gamma, 0.0, ear, n)?;
        let c = melnikov_coefficients(&p, 1e-11)?;
        let k = kappa(&c).map(float).unwrap_or_else(|_| "nan".into());
        w.row(&[float(a), float(om(a)), float(gamma), float(c.f1), float(c.f2), k])?;
    }
    w.finish()?;

    let cells: Vec<ScanCell> = if a_eq {
        let mut all = Vec::new();
        for &a in &a_grid {
            all.extend(transversality_scan(&[a], &g_grid, alpha, a, n, ear)?.cells);
        }
        all
    } else {
        transversality_scan(&a_grid, &g_grid, alpha, omega, n, ear)?.cells
    };
    let mut grid = csv(
        &dir,
        "melnikov_grid.csv",
        &meta,
        &["a0", "gamma", "m", "dm_dgamma", "transversal", "error"],
    )?;
    let mut zs = csv(
        &dir,
        "zero_surface.csv",
        &meta,
        &["a0", "gamma_seed", "gamma0", "residual_m", "dm_dgamma0", "scale", "iterations"],
    )?;
    for c in &cells {
        grid.row(&[
            float(c.a0),
            float(c.gamma),
            float(c.m),
            float(c.dm_dgamma),
            c.transversal.to_string(),
            c.error.clone().unwrap_or_default().replace(',', ";"),
        ])?;
        if let Some(ZeroSurfaceSample {
            a0,
            gamma0,
            residual_m,
            dm_dgamma0,
            scale,
            iterations,
        }) = c.root
        {
            zs.row(&[
                float(a0),
                float(c.gamma),
                float(gamma0),
                float(residual_m),
                float(dm_dgamma0),
                float(scale),
                iterations.to_string(),
            ])?;
        }
    }
    grid.finish()?;
    zs.finish()?;
    let good: Vec<f64> = a_grid
        .iter()
        .filter(|&&a| cells.iter().filter(|c| c.a0 == a).all(|c| c.transversal))
        .copied()
        .collect();
    let summary = TransversalitySummary {
        alpha,
        omega: if a_eq { None } else { Some(omega) },
        a_equals_omega: a_eq,
        n,
        ear,
        total_cells: cells.len(),
        transversal_cells: cells.iter().filter(|c| c.transversal).count(),
        failed_cells: cells.iter().filter(|c| c.root.is_none()).count(),
        transversal_a0_range: good.first().map(|&lo| (lo, *good.last().unwrap())),
    };
    let tj = write_json(&dir, "transversality.json", &summary, &meta)?;
    Ok(Outputs {
        files: vec![dir.join("kappa_scan.csv"), dir.join("melnikov_grid.csv"), dir.join("zero_surface.csv"), tj],
    })
}

#[derive(serde::Serialize)]
struct FixedPointsDoc {
    params: AnnulusParams,
    count: usize,
    leading: Vec<AnnulusFixedPoint>,
    refined: Vec<AnnulusFixedPoint>,
}

/// Fixed points, phase portrait and separatrices of the resonant annulus.
pub fn cmd_resonance(cfg: &mut JobConfig) -> CliResult<Outputs> {
    let n = cfg.n()?;
    let eta = cfg.f64("eta")?;
    if eta < 0.0 {
        return Err(CliError::Config(format!("eta = {eta} must be nonnegative")));
    }
    let p = AnnulusParams::new(eta, (cfg.f64("alpha1")?, cfg.f64("alpha2")?), cfg.positive("omega")?, n)?;
    let delta0 = cfg.positive("delta0")?;
    let leading = leading_fixed_points(&p.with_eta(0.0), delta0)?;
    let refined = refine_fixed_points(&p, cfg.usize("steps")?.max(1), delta0)?;
    let grid = ContourGrid {
        nxi: cfg.usize("nxi")?,
        ny: cfg.usize("ny")?,
    };
    let contours = separatrix_levels(&p, grid)?;
    if cfg.is_auto("y_range") {
        let ymax = contours
            .iter()
            .flat_map(|c| c.polylines.iter().flatten())
            .map(|pt| pt[0].abs())
            .fold(1.0f64, f64::max);
        let mut lo = -1.2 * ymax;
        if eta > 0.0 {
            lo = lo.max(-0.99 * p.omega / eta);
        }
        cfg.set("y_range", format!("{},{}", float(lo), float(1.2 * ymax)));
    }
    let y_range = cfg.pair("y_range")?;
    let meta = cfg.meta();
    let dir = cfg.out_dir();
    let doc = FixedPointsDoc {
        params: p,
        count: refined.len(),
        leading,
        refined,
    };
    let fj = write_json(&dir, "fixed_points.json", &doc, &meta)?;
    let portrait = phase_portrait(&p, y_range, cfg.usize("portrait_ny")?, cfg.usize("portrait_nxi")?)?;
    let mut w = csv(&dir, "phase_portrait.csv", &meta, &["y", "xi", "h"])?;
    for s in &portrait {
        w.row(&[float(s.y), float(s.xi), float(s.h)])?;
    }
    w.finish()?;
    let mut w = csv(&dir, "separatrix.csv", &meta, &["saddle_j", "level", "polyline", "index", "y", "xi"])?;
    for c in &contours {
        for (k, pl) in c.polylines.iter().enumerate() {
            for (i, pt) in pl.iter().enumerate() {
                w.row(&[
                    c.saddle.j.to_string(),
                    float(c.level),
                    k.to_string(),
                    i.to_string(),
                    float(pt[0]),
                    float(pt[1]),
                ])?;
            }
        }
    }
    w.finish()?;
    Ok(Outputs {
        files: vec![fj, dir.join("phase_portrait.csv"), dir.join("separatrix.csv")],
    })
}

#[derive(serde::Serialize)]
struct EvolveReport {
    field: String,
    accepted: usize,
    rejected: usize,
    evaluations: usize,
    max_projection_residual: f64,
    drift: Option<InvariantDriftReport>,
    f1_error: Option<String>,
}

fn pert(cfg: &JobConfig) -> CliResult<PerturbationParams> {
    Ok(PerturbationParams {
        epsilon: cfg.f64("epsilon")?,
        alpha1: cfg.f64("alpha1")?,
        alpha2: cfg.f64("alpha2")?,
    })
}

fn lattice_init(cfg: &mut JobConfig, n: usize, a: f64, omega: f64) -> CliResult<LatticeState> {
    let size = LatticeSize::new(n)?;
    let gamma = cfg.f64("gamma")?;
    match cfg.raw("init") {
        "uniform" => Ok(LatticeState::uniform(size, C64::from_polar(a, gamma))),
        "perturbed" => {
            let bc = BlockCoords {
                a,
                gamma,
                b1: cfg.f64("b1")?,
                b2: 0.0,
                c: vec![C64::new(0.0, 0.0); size.m() - 1],
                vtheta: vtheta_angle(a, n)?,
            };
            Ok(from_block_coords(&bc, size)?)
        }
        "orbit" => {
            let p = OrbitParams::new(a, omega, gamma, cfg.f64("p")?, cfg.ear()?, n)?;
            Ok(even_heteroclinic_orbit(&p, cfg.f64("t_start")?)?)
        }
        other => Err(CliError::Config(format!("init = '{other}' must be uniform, perturbed or orbit"))),
    }
}

/// Integrate one of the four fields and report invariant drift.
pub fn cmd_evolve(cfg: &mut JobConfig) -> CliResult<Outputs> {
    let n = cfg.n()?;
    let (t0, t1) = (cfg.f64("t_start")?, cfg.f64("t_end")?);
    let spec = IntegratorSpec {
        rel_tol: cfg.positive("rel_tol")?,
        abs_tol: cfg.positive("abs_tol")?,
        ..Default::default()
    };
    let samples = cfg.usize("samples")?.max(2);
    let field_name = cfg.raw("field").to_string();
    let (field, init): (Field, Vec<f64>) = match field_name.as_str() {
        "integrable" | "perturbed" => {
            let a = cfg.amplitude(n)?;
            let omega = cfg.omega_or(a)?;
            let field = if field_name == "integrable" {
                Field::Integrable { omega }
            } else {
                Field::Perturbed {
                    omega,
                    pert: pert(cfg)?,
                }
            };
            (field, pack(&lattice_init(cfg, n, a, omega)?))
        }
        "plane" => {
            let a = cfg.amplitude(n)?;
            let omega = cfg.omega_or(a)?;
            let q = C64::from_polar(a, cfg.f64("gamma")?);
            (
                Field::Plane {
                    omega,
                    n,
                    pert: pert(cfg)?,
                },
                vec![q.re, q.im],
            )
        }
        "annulus" => {
            let omega = cfg.omega_or(1.0)?;
            let p = AnnulusParams::new(cfg.f64("eta")?, (cfg.f64("alpha1")?, cfg.f64("alpha2")?), omega, n)?;
            (Field::Annulus(p), vec![cfg.f64("y0")?, cfg.f64("xi0")?])
        }
        other => {
            return Err(CliError::Config(format!(
                "field = '{other}' must be integrable, perturbed, plane or annulus"
            )))
        }
    };
    let traj = integrate(&field, &init, (t0, t1), &spec)?;
    let meta = cfg.meta();
    let dir = cfg.out_dir();
    let times = linspace(t0, t1, samples);
    let states = traj.sample(&times)?;
    write_trajectory(&dir, &meta, &field, &times, &states)?;
    let (drift, f1_error) = drift_for(cfg, &field, &traj)?;
    let report = EvolveReport {
        field: field_name,
        accepted: traj.accepted,
        rejected: traj.rejected,
        evaluations: traj.evaluations,
        max_projection_residual: traj.max_projection_residual,
        drift,
        f1_error,
    };
    let dj = write_json(&dir, "drift_report.json", &report, &meta)?;
    Ok(Outputs {
        files: vec![dir.join("trajectory.csv"), dj],
    })
}

fn write_trajectory(dir: &Path, meta: &Meta, field: &Field, times: &[f64], states: &[Vec<f64>]) -> CliResult<()> {
    if let Field::Annulus(p) = field {
        let mut w = csv(dir, "trajectory.csv", meta, &["t", "y", "xi", "h_hat"])?;
        for (t, s) in times.iter().zip(states) {
            w.row(&[float(*t), float(s[0]), float(s[1]), float(rescaled_hamiltonian(s[0], s[1], p)?)])?;
        }
        w.finish()?;
        return Ok(());
    }
    let mut w = csv(dir, "trajectory.csv", meta, &["t", "n", "re_q", "im_q"])?;
    for (t, s) in times.iter().zip(states) {
        for (k, q) in unpack(s).iter().enumerate() {
            w.row(&[float(*t), k.to_string(), float(q.re), float(q.im)])?;
        }
    }
    w.finish()?;
    Ok(())
}

fn drift_for(
    cfg: &JobConfig,
    field: &Field,
    traj: &Trajectory,
) -> CliResult<(Option<InvariantDriftReport>, Option<String>)> {
    match field {
        Field::Integrable { .. } | Field::Perturbed { .. } => {
            let eps = if let Field::Perturbed { pert, .. } = field { pert.epsilon } else { 0.0 };
            let q0 = unpack(&traj.states[0]);
            let amp = q0.iter().map(|q| q.norm()).sum::<f64>() / q0.len() as f64;
            let seed = UniformSpectrum::new(amp, q0.len()).z_s(1);
            match monitor_invariants(traj, &MONITOR_Z, Some(seed), eps) {
                Ok(r) => Ok((Some(r), None)),
                Err(e) => Ok((Some(monitor_invariants(traj, &MONITOR_Z, None, eps)?), Some(e.to_string()))),
            }
        }
        Field::Annulus(p) => {
            let h: Vec<C64> = traj
                .states
                .iter()
                .map(|s| rescaled_hamiltonian(s[0], s[1], p).map(|v| C64::new(v, 0.0)))
                .collect::<crate::Result<_>>()?;
            let reference = h[0];
            let max_drift = h.iter().map(|v| (v - reference).norm()).fold(0.0, f64::max);
            let _ = cfg;
            Ok((
                Some(InvariantDriftReport {
                    epsilon: p.eta,
                    t_start: traj.t_start(),
                    t_end: traj.t_end(),
                    samples: h.len(),
                    invariants: vec![InvariantDrift {
                        name: "H_hat".into(),
                        reference,
                        max_drift,
                        relative_drift: if reference.norm() > 0.0 { max_drift / reference.norm() } else { max_drift },
                    }],
                }),
                None,
            ))
        }
        Field::Plane { .. } => Ok((None, None)),
    }
}

#[derive(serde::Serialize)]
struct VerifyDoc<'a> {
    passed: bool,
    quick: bool,
    criteria: &'a [CriterionReport],
}

/// Run the acceptance suite; returns the reports and whether all passed.
pub fn cmd_verify(cfg: &mut JobConfig) -> CliResult<(Vec<CriterionReport>, bool)> {
    let quick = cfg.bool("quick")?;
    let reports = acceptance::run_all(quick);
    let passed = reports.iter().all(|r| r.passed);
    let meta = cfg.meta();
    write_json(
        &cfg.out_dir(),
        "verify.json",
        &VerifyDoc {
            passed,
            quick,
            criteria: &reports,
        },
        &meta,
    )?;
    Ok((reports, passed))
}

/// Dispatch one command; returns the process exit code.
pub fn run(command: &str, config_file: Option<&Path>, flags: &BTreeMap<String, String>) -> i32 {
    let result = (|| -> CliResult<i32> {
        let mut cfg = JobConfig::resolve(command, config_file, flags)?;
        init_threads(cfg.threads()?);
        let outputs = match command {
            "spectrum" => cmd_spectrum(&mut cfg)?,
            "orbit" => cmd_orbit(&mut cfg)?,
            "melnikov" => cmd_melnikov(&mut cfg)?,
            "resonance" => cmd_resonance(&mut cfg)?,
            "evolve" => cmd_evolve(&mut cfg)?,
            "verify" => {
                let (reports, passed) = cmd_verify(&mut cfg)?;
                for r in &reports {
                    println!("{r}");
                }
                if !passed {
                    let failed: Vec<u8> = reports.iter().filter(|r| !r.passed).map(|r| r.id).collect();
                    eprintln!(
                        "{}",
                        serde_json::json!({"status": "error", "kind": "acceptance", "exit_code": 3, "failed": failed})
                    );
                    return Ok(3);
                }
                return Ok(0);
            }
            other => return Err(CliError::Config(format!("unknown command '{other}'"))),
        };
        for f in &outputs.files {
            println!("{}", f.display());
        }
        Ok(0)
    })();
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("{}", e.report());
            e.exit_code()
        }
    }
}
