//! Orchestration of the CLI subcommands over the solver library.

use std::io::Write;
use std::path::{Path, PathBuf};

use postmatch::network::frequency_sweep;
use postmatch::validation::{collocation_smatrix, Collocation};
use postmatch::{DiscPolicy, Discretization, Numerics, PointOutcome, SweepPoint};

use crate::config::{ConfigError, RunConfig};
use crate::output::{render_csv, render_touchstone, SParam};

/// Top-level failure of a subcommand, mapped to the process exit code.
#[derive(Debug)]
pub enum CliError {
    /// Parse or validation problem (exit code 1).
    Config(ConfigError),
    /// Numerical failure (exit code 2).
    Solver(postmatch::Error),
    /// Filesystem problem (exit code 2).
    Io(std::io::Error),
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Config(e) => write!(f, "{e}"),
            CliError::Solver(e) => write!(f, "solver error: {e}"),
            CliError::Io(e) => write!(f, "i/o error: {e}"),
        }
    }
}

impl std::error::Error for CliError {}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 1,
            CliError::Solver(_) => 2,
            CliError::Io(_) => 2,
        }
    }
}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        CliError::Config(e)
    }
}

impl From<postmatch::Error> for CliError {
    fn from(e: postmatch::Error) -> Self {
        CliError::Solver(e)
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e)
    }
}

/// Which output files a sweep writes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OutputFormat {
    Csv,
    Touchstone,
    Both,
}

/// Optional command-line overrides on top of the config file.
#[derive(Debug, Default, Clone)]
pub struct Overrides {
    pub output: Option<PathBuf>,
    pub touchstone: Option<PathBuf>,
    /// Defaults to CSV, or both when the config names a Touchstone path.
    pub format: Option<OutputFormat>,
    pub quadrature_order: Option<usize>,
}

fn numerics_with(cfg: &RunConfig, quadrature_order: Option<usize>) -> Numerics {
    let mut num = cfg.numerics();
    if let Some(q) = quadrature_order {
        num.quadrature_order = q;
    }
    num
}

#[derive(Debug)]
pub struct SweepArtifacts {
    pub csv_path: Option<PathBuf>,
    pub touchstone_path: Option<PathBuf>,
    pub points: usize,
    pub failed_points: usize,
}

/// Run the configured sweep and write the output files. Identical inputs
/// produce byte-identical files; per-point failures become flagged rows
/// instead of aborting.
pub fn run_sweep(cfg: &RunConfig, over: &Overrides) -> Result<SweepArtifacts, CliError> {
    let net = cfg.network()?;
    let num = numerics_with(cfg, over.quadrature_order);
    let points = frequency_sweep(
        &net,
        &num,
        cfg.f_start_hz(),
        cfg.f_stop_hz(),
        cfg.sweep.points,
    )?;

    let params: Vec<SParam> = cfg
        .output
        .s_params
        .iter()
        .map(|p| SParam::parse(p).expect("validated"))
        .collect();

    let format = over.format.unwrap_or(match (&over.touchstone, &cfg.output.touchstone) {
        (None, None) => OutputFormat::Csv,
        _ => OutputFormat::Both,
    });

    let csv_path = over
        .output
        .clone()
        .unwrap_or_else(|| PathBuf::from(&cfg.output.csv));
    let wrote_csv = format != OutputFormat::Touchstone;
    if wrote_csv {
        write_atomically(&csv_path, render_csv(&points, &params).as_bytes())?;
    }

    let touchstone_path = if format == OutputFormat::Csv {
        None
    } else {
        Some(
            over.touchstone
                .clone()
                .or_else(|| cfg.output.touchstone.as_ref().map(PathBuf::from))
                .unwrap_or_else(|| csv_path.with_extension("s2p")),
        )
    };
    if let Some(path) = &touchstone_path {
        write_atomically(path, render_touchstone(&points).as_bytes())?;
    }

    let failed_points = points
        .iter()
        .filter(|p| !matches!(p.outcome, PointOutcome::Solved(_)))
        .count();
    Ok(SweepArtifacts {
        csv_path: wrote_csv.then_some(csv_path),
        touchstone_path,
        points: points.len(),
        failed_points,
    })
}

fn write_atomically(path: &Path, bytes: &[u8]) -> Result<(), std::io::Error> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent)?;
        }
    }
    let mut file = std::fs::File::create(path)?;
    file.write_all(bytes)?;
    Ok(())
}

/// Per-mode-count sweep comparison.
#[derive(Debug)]
pub struct ConvergenceReport {
    pub modes: Vec<usize>,
    pub f_hz: Vec<f64>,
    /// `s21_db[i][k]`: fundamental |S21| in dB for modes `modes[i]` at
    /// frequency `f_hz[k]`; `None` where the point did not solve.
    pub s21_db: Vec<Vec<Option<f64>>>,
    /// Max |delta dB| between consecutive mode counts (over points solved
    /// by both).
    pub deltas_db: Vec<f64>,
    pub threshold_db: f64,
    /// First mode count whose delta from its predecessor is within the
    /// threshold.
    pub converged_at: Option<usize>,
}

fn s21_db_column(points: &[SweepPoint], modes: usize) -> Vec<Option<f64>> {
    points
        .iter()
        .map(|p| match &p.outcome {
            PointOutcome::Solved(s) => Some(20.0 * s.get(modes, 0).norm().log10()),
            _ => None,
        })
        .collect()
}

/// Sweep the structure at each mode count and compare fundamental-mode
/// transmission between consecutive counts.
pub fn run_convergence(
    cfg: &RunConfig,
    m_list: &[usize],
    threshold_db: f64,
    quadrature_order: Option<usize>,
) -> Result<ConvergenceReport, CliError> {
    if m_list.is_empty() {
        return Err(CliError::Config(ConfigError::Validation(vec![
            "mode list must not be empty".into(),
        ])));
    }
    if m_list.windows(2).any(|w| w[0] >= w[1]) {
        return Err(CliError::Config(ConfigError::Validation(vec![
            "mode list must be strictly ascending".into(),
        ])));
    }
    if !(threshold_db > 0.0) {
        return Err(CliError::Config(ConfigError::Validation(vec![
            "threshold must be positive".into(),
        ])));
    }
    // Explicit discretizations must stay definite for every requested M.
    if let DiscPolicy::Explicit(disc) = cfg.numerics().disc {
        for &m in m_list {
            if let Err(e) = disc.check_definiteness(m) {
                return Err(CliError::Config(ConfigError::Validation(vec![format!(
                    "modes = {m}: {e}"
                )])));
            }
        }
    }

    let net = cfg.network()?;
    let mut f_hz = Vec::new();
    let mut s21_db = Vec::new();
    for &m in m_list {
        let mut num = numerics_with(cfg, quadrature_order);
        num.modes = m;
        let points = frequency_sweep(
            &net,
            &num,
            cfg.f_start_hz(),
            cfg.f_stop_hz(),
            cfg.sweep.points,
        )?;
        if f_hz.is_empty() {
            f_hz = points.iter().map(|p| p.f_hz).collect();
        }
        s21_db.push(s21_db_column(&points, m));
    }

    let mut deltas_db = Vec::new();
    for pair in s21_db.windows(2) {
        let delta = pair[0]
            .iter()
            .zip(&pair[1])
            .filter_map(|(a, b)| match (a, b) {
                (Some(a), Some(b)) => Some((a - b).abs()),
                _ => None,
            })
            .fold(0.0f64, f64::max);
        deltas_db.push(delta);
    }

    let converged_at = deltas_db
        .iter()
        .position(|&d| d <= threshold_db)
        .map(|i| m_list[i + 1]);

    Ok(ConvergenceReport {
        modes: m_list.to_vec(),
        f_hz,
        s21_db,
        deltas_db,
        threshold_db,
        converged_at,
    })
}

impl ConvergenceReport {
    pub fn render_text(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!(
            "convergence over modes {:?} ({} frequency points)\n",
            self.modes,
            self.f_hz.len()
        ));
        for (i, delta) in self.deltas_db.iter().enumerate() {
            out.push_str(&format!(
                "  M = {:3} -> {:3}: max |dS21| = {:.6} dB\n",
                self.modes[i],
                self.modes[i + 1],
                delta
            ));
        }
        match self.converged_at {
            Some(m) if !self.deltas_db.is_empty() => out.push_str(&format!(
                "converged at M = {m} (threshold {} dB)\n",
                self.threshold_db
            )),
            _ if self.modes.len() == 1 => {
                out.push_str("single mode count: no deltas, no convergence claim\n")
            }
            _ => out.push_str(&format!(
                "not converged within threshold {} dB\n",
                self.threshold_db
            )),
        }
        out
    }
}

/// One comparison row of the `validate` subcommand.
#[derive(Debug)]
pub struct ValidateRow {
    pub junction: usize,
    pub f_hz: f64,
    pub projection_s11: f64,
    pub collocation_s11: f64,
    pub projection_s21: f64,
    pub collocation_s21: f64,
}

impl ValidateRow {
    pub fn max_delta(&self) -> f64 {
        (self.projection_s11 - self.collocation_s11)
            .abs()
            .max((self.projection_s21 - self.collocation_s21).abs())
    }
}

#[derive(Debug)]
pub struct ValidateReport {
    pub rows: Vec<ValidateRow>,
    pub tolerance: f64,
}

impl ValidateReport {
    pub fn max_delta(&self) -> f64 {
        self.rows
            .iter()
            .map(ValidateRow::max_delta)
            .fold(0.0, f64::max)
    }

    pub fn pass(&self) -> bool {
        self.max_delta() <= self.tolerance
    }

    pub fn render_text(&self) -> String {
        let mut out = String::new();
        out.push_str(
            "junction     f_GHz   |S11| proj   |S11| coll   |S21| proj   |S21| coll      delta\n",
        );
        for r in &self.rows {
            out.push_str(&format!(
                "{:8} {:9.4} {:12.6} {:12.6} {:12.6} {:12.6} {:10.2e}\n",
                r.junction,
                r.f_hz / 1e9,
                r.projection_s11,
                r.collocation_s11,
                r.projection_s21,
                r.collocation_s21,
                r.max_delta()
            ));
        }
        out.push_str(&format!(
            "max delta = {:.3e} (tolerance {:.1e}): {}\n",
            self.max_delta(),
            self.tolerance,
            if self.pass() { "PASS" } else { "FAIL" }
        ));
        out
    }
}

/// Cross-check every distinct post junction of the configured structure
/// against the collocation oracle at uniformly spaced frequencies.
pub fn run_validate(
    cfg: &RunConfig,
    frequencies: usize,
    tolerance: f64,
    quadrature_order: Option<usize>,
) -> Result<ValidateReport, CliError> {
    if frequencies < 1 {
        return Err(CliError::Config(ConfigError::Validation(vec![
            "need at least one comparison frequency".into(),
        ])));
    }
    if !(tolerance > 0.0) {
        return Err(CliError::Config(ConfigError::Validation(vec![
            "tolerance must be positive".into(),
        ])));
    }
    let junctions = cfg.junctions()?;
    let num = numerics_with(cfg, quadrature_order);

    let mut distinct = Vec::new();
    for j in junctions {
        if !distinct.iter().any(|d: &postmatch::PostJunction| {
            d.h.to_bits() == j.h.to_bits() && d.r.to_bits() == j.r.to_bits()
        }) {
            distinct.push(j);
        }
    }

    let freqs =
        postmatch::network::sweep_frequencies(cfg.f_start_hz(), cfg.f_stop_hz(), frequencies)?;

    let mut rows = Vec::new();
    for (idx, j) in distinct.iter().enumerate() {
        let disc = match num.disc {
            DiscPolicy::Auto { factor } => {
                Discretization::for_modes_with_factor(j, num.modes, factor)?
            }
            DiscPolicy::Explicit(d) => d,
        };
        let pts = Collocation::doubled_from(&disc);
        for &f in &freqs {
            let rule = postmatch::quadrature::GaussLegendre::new(num.quadrature_order)?;
            let proj =
                postmatch::junction::solve_junction_with_rule(j, &disc, num.modes, f, &rule)?;
            let coll = collocation_smatrix(j, num.modes, &pts, f)?;
            rows.push(ValidateRow {
                junction: idx,
                f_hz: f,
                projection_s11: proj.smatrix.get(0, 0).norm(),
                collocation_s11: coll.smatrix.get(0, 0).norm(),
                projection_s21: proj.smatrix.get(num.modes, 0).norm(),
                collocation_s21: coll.smatrix.get(num.modes, 0).norm(),
            });
        }
    }

    Ok(ValidateReport { rows, tolerance })
}
