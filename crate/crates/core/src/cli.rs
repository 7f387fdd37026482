//! Experiment driver: single runs, table sweeps and verification studies.

use std::f64::consts::PI;
use std::path::PathBuf;
use std::time::Instant;

use clap::{Parser, ValueEnum};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::assembly::{patch_error, ErrorNorms};
use crate::error::{Error, Result};
use crate::extension_lab::{bound_csv, verify_bound, BoundRow};
use crate::geometry::{builtin_domain, load_multipatch, save_multipatch, DomainName, MultiPatch, Point};
use crate::ieti::{monolithic_solve, solve_discretization, Discretization, IetiOptions, Preconditioner};
use crate::linalg::{PcgOptions, ResidualNorm};

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutputFormat {
    Json,
    Csv,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Study {
    Table,
    Convergence,
    Extension,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub domain: DomainName,
    pub splits: usize,
    pub degree: usize,
    pub refine: u32,
    pub precond: Preconditioner,
    pub tol: f64,
    pub max_iter: usize,
    pub residual: ResidualNorm,
    pub scaling: f64,
    pub oracle: bool,
    pub seed: u64,
    /// Geometry file replacing the built-in domain.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub geometry: Option<PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            domain: DomainName::QuarterAnnulus,
            splits: 4,
            degree: 2,
            refine: 3,
            precond: Preconditioner::Scaled,
            tol: 1e-6,
            max_iter: 500,
            residual: ResidualNorm::Unpreconditioned,
            scaling: 0.25,
            oracle: false,
            seed: 0,
            geometry: None,
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidConfig(m));
        if self.degree < 2 {
            return bad(format!("degree must be at least 2, got {}", self.degree));
        }
        if self.refine < 2 {
            return bad(format!("refinement must be at least 2 (mesh size 1/4), got {}", self.refine));
        }
        if self.splits == 0 {
            return bad("splits must be at least 1".into());
        }
        if !(self.tol > 0.0 && self.tol < 1.0) {
            return bad(format!("tolerance must lie in (0, 1), got {}", self.tol));
        }
        if self.max_iter == 0 {
            return bad("max_iter must be positive".into());
        }
        if !(self.scaling > 0.0) {
            return bad(format!("scaling must be positive, got {}", self.scaling));
        }
        Ok(())
    }

    pub fn multipatch(&self) -> Result<MultiPatch> {
        Ok(match &self.geometry {
            Some(path) => load_multipatch(path)?,
            None => builtin_domain(self.domain.as_str(), self.splits)?,
        })
    }

    pub fn ieti_options(&self) -> IetiOptions {
        IetiOptions {
            precond: self.precond,
            pcg: PcgOptions { tol: self.tol, max_iter: self.max_iter, residual_norm: self.residual },
            scaling: self.scaling,
            ..IetiOptions::default()
        }
    }

    /// Load of the built-in problem on this domain; loaded geometries use `f = 1`.
    pub fn source(&self) -> fn(Point) -> f64 {
        match (&self.geometry, self.domain) {
            (None, DomainName::QuarterAnnulus) => annulus_source,
            (None, DomainName::UnitSquare) => manufactured_source,
            _ => unit_source,
        }
    }
}

pub fn annulus_source([x, y]: Point) -> f64 {
    PI.powi(4) / 8.0 * (PI * x / 2.0).sin() * (PI * y / 2.0).sin()
}

pub fn unit_source(_: Point) -> f64 {
    1.0
}

/// `Δ²u` for `u = (sin πx sin πy)²`.
pub fn manufactured_source([x, y]: Point) -> f64 {
    let (cx, cy) = ((2.0 * PI * x).cos(), (2.0 * PI * y).cos());
    4.0 * PI.powi(4) * (4.0 * cx * cy - cx - cy)
}

/// `[u, u_x, u_y, u_xx, u_xy, u_yy]` for `u = (sin πx sin πy)²`.
pub fn manufactured_exact([x, y]: Point) -> [f64; 6] {
    let (sx, sy) = ((PI * x).sin(), (PI * y).sin());
    let (s2x, s2y) = ((2.0 * PI * x).sin(), (2.0 * PI * y).sin());
    let (c2x, c2y) = ((2.0 * PI * x).cos(), (2.0 * PI * y).cos());
    [
        sx * sx * sy * sy,
        PI * s2x * sy * sy,
        PI * sx * sx * s2y,
        2.0 * PI * PI * c2x * sy * sy,
        PI * PI * s2x * s2y,
        2.0 * PI * PI * sx * sx * c2y,
    ]
}

/// Wall-clock seconds per phase.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Timings {
    pub assembly: f64,
    pub factorization: f64,
    pub solve: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunResult {
    pub config: RunConfig,
    pub patches: usize,
    pub dofs: usize,
    pub n_lambda: usize,
    pub n_primal: usize,
    pub iterations: usize,
    pub kappa: f64,
    pub relative_residual: f64,
    pub converged: bool,
    /// `‖Σ B u‖_∞ / ‖u‖_∞` of the recovered solution.
    pub constraint_residual: f64,
    /// `H²` seminorm error against the manufactured solution.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub h2_error: Option<f64>,
    /// Relative ℓ² distance to the conforming direct solve.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub oracle_discrepancy: Option<f64>,
    pub timings: Timings,
}

const CSV_HEADER: &str = "domain,splits,degree,refine,precond,dofs,n_lambda,n_primal,iterations,kappa,\
relative_residual,converged,constraint_residual,h2_error,oracle_discrepancy,t_assembly,t_factorization,t_solve";

impl RunResult {
    pub fn csv_header() -> &'static str {
        CSV_HEADER
    }

    pub fn csv_row(&self) -> String {
        let opt = |v: Option<f64>| v.map(|x| format!("{x:.6e}")).unwrap_or_default();
        let c = &self.config;
        format!(
            "{},{},{},{},{},{},{},{},{},{:.4},{:.3e},{},{:.3e},{},{},{:.3},{:.3},{:.3}",
            c.domain,
            c.splits,
            c.degree,
            c.refine,
            c.precond.as_str(),
            self.dofs,
            self.n_lambda,
            self.n_primal,
            self.iterations,
            self.kappa,
            self.relative_residual,
            self.converged,
            self.constraint_residual,
            opt(self.h2_error),
            opt(self.oracle_discrepancy),
            self.timings.assembly,
            self.timings.factorization,
            self.timings.solve
        )
    }

    /// Copy with wall times zeroed, for comparing runs.
    pub fn without_timings(&self) -> Self {
        Self { timings: Timings::default(), ..self.clone() }
    }
}

fn h2_error(mp: &MultiPatch, disc: &Discretization, coeffs: &[Vec<f64>]) -> Result<f64> {
    let mut total = ErrorNorms::default();
    for (k, g) in mp.patches.iter().enumerate() {
        let c = disc.tensor_coeffs(k, &coeffs[k]);
        total = total.add(patch_error(g, &disc.bases[k], &c, Some(&manufactured_exact), None)?);
    }
    Ok(total.h2_semi_sq.sqrt())
}

fn relative_l2(a: &[Vec<f64>], b: &[Vec<f64>]) -> f64 {
    let (mut d, mut n) = (0.0, 0.0);
    for (x, y) in a.iter().flatten().zip(b.iter().flatten()) {
        d += (x - y) * (x - y);
        n += y * y;
    }
    if n > 0.0 {
        (d / n).sqrt()
    } else {
        d.sqrt()
    }
}

/// Full pipeline for one configuration. A solve that runs out of iterations
/// still yields a result with `converged = false`.
pub fn run(cfg: &RunConfig) -> Result<RunResult> {
    cfg.validate()?;
    Ok(run_on(cfg, &cfg.multipatch()?)?.0)
}

/// Runs `cfg` on an already built geometry; also returns the tensor
/// coefficients of every patch.
pub fn run_on(cfg: &RunConfig, mp: &MultiPatch) -> Result<(RunResult, Vec<Vec<f64>>)> {
    cfg.validate()?;
    let opts = cfg.ieti_options();
    let source = cfg.source();
    let t0 = Instant::now();
    let disc = Discretization::new(mp, cfg.degree, cfg.refine, &source, &opts.assembly)?;
    let assembly = t0.elapsed().as_secs_f64();
    let sol = solve_discretization(&disc, &opts)?;
    let manufactured = cfg.geometry.is_none() && cfg.domain == DomainName::UnitSquare;
    let h2 = if manufactured { Some(h2_error(mp, &disc, &sol.coeffs)?) } else { None };
    let oracle = if cfg.oracle { Some(relative_l2(&sol.coeffs, &monolithic_solve(&disc)?)) } else { None };
    let tensor = sol.coeffs.iter().enumerate().map(|(k, c)| disc.tensor_coeffs(k, c)).collect();
    let result = RunResult {
        config: cfg.clone(),
        patches: mp.num_patches(),
        dofs: disc.total_free(),
        n_lambda: sol.n_lambda,
        n_primal: sol.n_primal,
        iterations: sol.report.iterations,
        kappa: sol.report.kappa_estimate,
        relative_residual: sol.report.relative_residual(),
        converged: sol.report.converged,
        constraint_residual: sol.constraint_residual,
        h2_error: h2,
        oracle_discrepancy: oracle,
        timings: Timings { assembly, factorization: sol.timings.setup, solve: sol.timings.solve },
    };
    Ok((result, tensor))
}

/// Runs `f` on a pool of at most `jobs` threads (0 keeps the current pool).
pub fn with_jobs<T: Send>(jobs: usize, f: impl FnOnce() -> T + Send) -> T {
    if jobs == 0 {
        return f();
    }
    match rayon::ThreadPoolBuilder::new().num_threads(jobs).build() {
        Ok(pool) => pool.install(f),
        Err(_) => f(),
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct TableCell {
    pub p: usize,
    pub r: u32,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub result: Option<RunResult>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Clone, Debug, Serialize)]
pub struct TableStudy {
    pub degrees: Vec<usize>,
    pub refinements: Vec<u32>,
    pub cells: Vec<TableCell>,
}

impl TableStudy {
    pub fn cell(&self, p: usize, r: u32) -> Option<&RunResult> {
        self.cells.iter().find(|c| c.p == p && c.r == r).and_then(|c| c.result.as_ref())
    }

    pub fn all_converged(&self) -> bool {
        self.cells.iter().all(|c| c.result.as_ref().is_some_and(|r| r.converged))
    }

    /// Rows `r`, a `κ`/`it` column pair per degree. Failed cells read `err`;
    /// cells that hit the iteration cap carry a `>` before the count.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("r");
        for p in &self.degrees {
            s.push_str(&format!(",p{p}_kappa,p{p}_it"));
        }
        s.push('\n');
        for &r in &self.refinements {
            s.push_str(&r.to_string());
            for &p in &self.degrees {
                match self.cells.iter().find(|c| c.p == p && c.r == r).and_then(|c| c.result.as_ref()) {
                    Some(res) => {
                        let mark = if res.converged { "" } else { ">" };
                        s.push_str(&format!(",{:.2},{mark}{}", res.kappa, res.iterations));
                    }
                    None => s.push_str(",err,err"),
                }
            }
            s.push('\n');
        }
        s
    }
}

/// Sweeps `degrees × refinements` with `base` for everything else; up to
/// `jobs` cells run at once.
pub fn table_study(base: &RunConfig, degrees: &[usize], refinements: &[u32], jobs: usize) -> TableStudy {
    let grid: Vec<(usize, u32)> = refinements.iter().flat_map(|&r| degrees.iter().map(move |&p| (p, r))).collect();
    let cells = with_jobs(jobs, || {
        grid.par_iter()
            .map(|&(p, r)| {
                let cfg = RunConfig { degree: p, refine: r, ..base.clone() };
                match run(&cfg) {
                    Ok(res) => TableCell { p, r, result: Some(res), error: None },
                    Err(e) => TableCell { p, r, result: None, error: Some(e.to_string()) },
                }
            })
            .collect()
    });
    TableStudy { degrees: degrees.to_vec(), refinements: refinements.to_vec(), cells }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ConvergenceRow {
    pub r: u32,
    pub dofs: usize,
    pub h2_error: f64,
    /// `log₂` of the error ratio to the previous row.
    pub rate: Option<f64>,
    pub converged: bool,
}

/// `H²` errors of the manufactured solution on the unit square split as in
/// `base`. The PCG tolerance is tightened to `1e-10` so that algebraic error
/// stays below discretization error.
pub fn convergence_study(base: &RunConfig, p: usize, refinements: &[u32]) -> Result<Vec<ConvergenceRow>> {
    let mut rows: Vec<ConvergenceRow> = Vec::with_capacity(refinements.len());
    for &r in refinements {
        let cfg = RunConfig {
            domain: DomainName::UnitSquare,
            geometry: None,
            degree: p,
            refine: r,
            tol: base.tol.min(1e-10),
            ..base.clone()
        };
        let res = run(&cfg)?;
        let err = res.h2_error.unwrap_or(f64::NAN);
        let rate = rows.last().map(|prev: &ConvergenceRow| {
            (prev.h2_error / err).log2() / (r as f64 - prev.r as f64)
        });
        rows.push(ConvergenceRow { r, dofs: res.dofs, h2_error: err, rate, converged: res.converged });
    }
    Ok(rows)
}

pub fn convergence_csv(p: usize, rows: &[ConvergenceRow]) -> String {
    let mut s = String::from("p,r,dofs,h2_error,rate\n");
    for row in rows {
        let rate = row.rate.map(|v| format!("{v:.4}")).unwrap_or_default();
        s.push_str(&format!("{p},{},{},{:.6e},{rate}\n", row.r, row.dofs, row.h2_error));
    }
    s
}

/// Extension bound sweep over both profile kinds.
pub fn extension_study(degrees: &[usize], refinements: &[u32], samples: usize, seed: u64) -> Result<Vec<BoundRow>> {
    let mut rows = verify_bound(0, degrees, refinements, samples, seed)?;
    rows.extend(verify_bound(1, degrees, refinements, samples, seed)?);
    Ok(rows)
}

fn parse_residual(s: &str) -> std::result::Result<ResidualNorm, String> {
    match s {
        "unpreconditioned" => Ok(ResidualNorm::Unpreconditioned),
        "preconditioned" => Ok(ResidualNorm::Preconditioned),
        _ => Err(format!("unknown residual norm '{s}' (expected unpreconditioned or preconditioned)")),
    }
}

/// Command-line interface.
#[derive(Parser, Debug, Clone)]
#[command(name = "biharmonic-ieti", version, about = "IETI-DP solver for the clamped biharmonic plate on C1 multi-patch domains")]
pub struct Cli {
    /// unit_square, quarter_annulus, lamella or two_squares.
    #[arg(long, default_value = "quarter_annulus")]
    pub domain: DomainName,
    /// Patches per direction of each base patch (domain default if omitted).
    #[arg(long)]
    pub splits: Option<usize>,
    /// Spline degree; a comma-separated list for studies.
    #[arg(long, value_delimiter = ',', default_value = "2")]
    pub degree: Vec<usize>,
    /// Uniform refinement level r (2^r cells per patch edge); a list for studies.
    #[arg(long, value_delimiter = ',', default_value = "3")]
    pub refine: Vec<u32>,
    #[arg(long, default_value = "scaled")]
    pub precond: Preconditioner,
    #[arg(long, default_value_t = 1e-6)]
    pub tol: f64,
    #[arg(long, default_value_t = 500)]
    pub max_iter: usize,
    /// unpreconditioned or preconditioned residual for the stopping test.
    #[arg(long, default_value = "unpreconditioned", value_parser = parse_residual)]
    pub residual: ResidualNorm,
    /// Factor in front of the scaled Dirichlet preconditioner.
    #[arg(long, default_value_t = 0.25)]
    pub scaling: f64,
    #[arg(long, value_enum, default_value_t = OutputFormat::Json)]
    pub output: OutputFormat,
    /// Compare against the conforming direct solve.
    #[arg(long)]
    pub oracle: bool,
    /// Table cells solved concurrently (0: one per thread).
    #[arg(long, default_value_t = 0)]
    pub jobs: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Random traces per case in the extension study.
    #[arg(long, default_value_t = 30)]
    pub samples: usize,
    #[arg(long, value_enum)]
    pub study: Option<Study>,
    /// Write output here instead of stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Load the multi-patch geometry from a JSON file.
    #[arg(long)]
    pub geometry: Option<PathBuf>,
    /// Write the multi-patch geometry of the run to a JSON file.
    #[arg(long)]
    pub save_geometry: Option<PathBuf>,
    /// Worker thread cap.
    #[arg(long, env = "BIHARMONIC_IETI_THREADS")]
    pub threads: Option<usize>,
}

/// Rendered output and whether every requested solve converged.
#[derive(Clone, Debug)]
pub struct Outcome {
    pub text: String,
    pub converged: bool,
}

impl Cli {
    pub fn base_config(&self) -> RunConfig {
        RunConfig {
            domain: self.domain,
            splits: self.splits.unwrap_or_else(|| self.domain.default_splits()),
            degree: self.degree[0],
            refine: self.refine[0],
            precond: self.precond,
            tol: self.tol,
            max_iter: self.max_iter,
            residual: self.residual,
            scaling: self.scaling,
            oracle: self.oracle,
            seed: self.seed,
            geometry: self.geometry.clone(),
        }
    }

    pub fn execute(&self) -> Result<Outcome> {
        let base = self.base_config();
        if let Some(path) = &self.save_geometry {
            save_multipatch(&base.multipatch()?, path)?;
        }
        match self.study {
            None => {
                if self.degree.len() != 1 || self.refine.len() != 1 {
                    return Err(Error::InvalidConfig("single runs take one --degree and one --refine".into()));
                }
                let res = run(&base)?;
                let text = match self.output {
                    OutputFormat::Json => render_json(&res),
                    OutputFormat::Csv => format!("{}\n{}\n", RunResult::csv_header(), res.csv_row()),
                };
                Ok(Outcome { converged: res.converged, text })
            }
            Some(Study::Table) => {
                let t = table_study(&base, &self.degree, &self.refine, self.jobs);
                let text = match self.output {
                    OutputFormat::Json => render_json(&t),
                    OutputFormat::Csv => t.to_csv(),
                };
                Ok(Outcome { converged: t.all_converged(), text })
            }
            Some(Study::Convergence) => {
                let mut text = String::new();
                let mut converged = true;
                let mut all = Vec::new();
                for &p in &self.degree {
                    let rows = convergence_study(&base, p, &self.refine)?;
                    converged &= rows.iter().all(|r| r.converged);
                    if self.output == OutputFormat::Csv {
                        let csv = convergence_csv(p, &rows);
                        text.push_str(if text.is_empty() { &csv } else { csv.split_once('\n').map_or("", |x| x.1) });
                    }
                    all.push(serde_json::json!({ "p": p, "rows": rows }));
                }
                if self.output == OutputFormat::Json {
                    text = render_json(&all);
                }
                Ok(Outcome { text, converged })
            }
            Some(Study::Extension) => {
                let rows = extension_study(&self.degree, &self.refine, self.samples, self.seed)?;
                let text = match self.output {
                    OutputFormat::Json => render_json(&rows),
                    OutputFormat::Csv => bound_csv(&rows),
                };
                Ok(Outcome { text, converged: true })
            }
        }
    }
}

fn render_json<T: Serialize>(v: &T) -> String {
    let mut s = serde_json::to_string_pretty(v).unwrap_or_else(|e| format!("{{\"error\": \"{e}\"}}"));
    s.push('\n');
    s
}
