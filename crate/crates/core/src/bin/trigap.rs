//! Command-line front end. Every command writes CSV (stdout or `--out`),
//! a short summary on stdout, and exits nonzero when its checks fail.

use std::collections::HashMap;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::str::FromStr;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};

use trigap::deformation::{self, DeformationDirection};
use trigap::eigensolver::{gap_with_error, ErrorModel, GapOptions, EIGEN_CSV_HEADER};
use trigap::geometry::{Triangle, EQUILATERAL_GAP};
use trigap::lame::{self, TableStatus};
use trigap::study;
use trigap::sweep::{
    coverage_audit, run_sweep, AccuracyPolicy, RunControl, Stepping, SweepConfig, SweepOutput,
    SweepStatus, Window, AUDIT_SPACING,
};
use trigap::{GapError, Result};

const THREADS_ENV: &str = "TRIGAP_THREADS";
const DEFAULT_WINDOW: &str = "0.5,1.0,0.3,0.95";

#[derive(Parser)]
#[command(name = "trigap", version, about = "Fundamental gap of triangles")]
struct Cli {
    /// File of key=value lines supplying defaults for any flag.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone, Default)]
struct Common {
    /// Target error on ξ (sweep: accuracy floor).
    #[arg(long)]
    accuracy: Option<f64>,
    /// Finest mesh level.
    #[arg(long)]
    max_level: Option<u32>,
    /// Worker threads (falls back to TRIGAP_THREADS).
    #[arg(long)]
    threads: Option<usize>,
    /// CSV output path (stdout when absent).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Continue an interrupted sweep.
    #[arg(long)]
    resume: bool,
    /// Sweep window x0,x1,y0,y1.
    #[arg(long)]
    window: Option<String>,
    /// fine-level or extrapolated.
    #[arg(long)]
    error_model: Option<String>,
}

#[derive(Subcommand)]
enum Command {
    /// λ₁, λ₂ and ξ for one apex.
    Eigen {
        #[arg(long, allow_hyphen_values = true)]
        x: Option<f64>,
        #[arg(long, allow_hyphen_values = true)]
        y: Option<f64>,
        #[command(flatten)]
        common: Common,
    },
    /// Certification sweep with coverage audit.
    Sweep {
        /// covering or paper.
        #[arg(long)]
        stepping: Option<String>,
        /// Stop after this many rows or tiles, as if interrupted.
        #[arg(long)]
        stop_after: Option<usize>,
        #[command(flatten)]
        common: Common,
    },
    /// ξ for thin triangles at apex (x0, h).
    Scaling {
        /// Descending heights, comma separated.
        #[arg(long)]
        heights: Option<String>,
        #[arg(long)]
        x0: Option<f64>,
        #[command(flatten)]
        common: Common,
    },
    /// Integral tables of the equilateral eigenfunctions.
    LameVerify {
        #[arg(long)]
        quad_degree: Option<usize>,
        #[command(flatten)]
        common: Common,
    },
    /// Distinct equilateral eigenvalues with multiplicities.
    LameSpectrum {
        #[arg(long)]
        count: Option<usize>,
        #[command(flatten)]
        common: Common,
    },
    /// Minimum of the gap slope over directions and eigenspace mixes.
    DeformMinimize {
        #[arg(long)]
        grid: Option<usize>,
        #[command(flatten)]
        common: Common,
    },
    /// Solver ξ along a deformation of the equilateral triangle.
    DeformSlope {
        #[arg(long, allow_hyphen_values = true)]
        a: Option<f64>,
        #[arg(long, allow_hyphen_values = true)]
        b: Option<f64>,
        /// Deformation sizes, comma separated.
        #[arg(long)]
        ts: Option<String>,
        #[command(flatten)]
        common: Common,
    },
    /// log ξ over a (τ, ν) lattice.
    PlotGrid {
        #[arg(long)]
        tau_steps: Option<usize>,
        #[arg(long)]
        nu_steps: Option<usize>,
        #[command(flatten)]
        common: Common,
    },
}

/// Flag values backed by the config file.
struct Settings {
    file: HashMap<String, String>,
}

impl Settings {
    fn load(path: Option<&Path>) -> Result<Self> {
        let mut file = HashMap::new();
        if let Some(p) = path {
            for (k, line) in std::fs::read_to_string(p)?.lines().enumerate() {
                let line = line.trim();
                if line.is_empty() || line.starts_with('#') {
                    continue;
                }
                let (key, value) = line.split_once('=').ok_or_else(|| {
                    GapError::Parse(format!("{}:{}: expected key=value", p.display(), k + 1))
                })?;
                file.insert(key.trim().replace('_', "-"), value.trim().to_string());
            }
        }
        Ok(Self { file })
    }

    fn get<T: FromStr>(&self, flag: Option<T>, key: &str) -> Result<Option<T>> {
        if flag.is_some() {
            return Ok(flag);
        }
        match self.file.get(key) {
            None => Ok(None),
            Some(v) => v
                .parse()
                .map(Some)
                .map_err(|_| GapError::Parse(format!("config key {key}: bad value '{v}'"))),
        }
    }

    fn or<T: FromStr>(&self, flag: Option<T>, key: &str, default: T) -> Result<T> {
        Ok(self.get(flag, key)?.unwrap_or(default))
    }

    fn flag(&self, flag: bool, key: &str) -> Result<bool> {
        Ok(flag || self.get(None::<bool>, key)?.unwrap_or(false))
    }

    fn threads(&self, flag: Option<usize>) -> Result<usize> {
        let env = std::env::var(THREADS_ENV).ok().map(|v| {
            v.parse::<usize>()
                .map_err(|_| GapError::Parse(format!("{THREADS_ENV}: bad value '{v}'")))
        });
        let n = match self.get(flag, "threads")? {
            Some(n) => n,
            None => match env {
                Some(v) => v?,
                None => std::thread::available_parallelism().map_or(1, |n| n.get()),
            },
        };
        if n == 0 {
            return Err(GapError::InvalidInput("thread count must be positive".into()));
        }
        Ok(n)
    }

    fn error_model(&self, flag: Option<String>, default: ErrorModel) -> Result<ErrorModel> {
        match self.get(flag, "error-model")? {
            Some(s) => ErrorModel::parse(&s),
            None => Ok(default),
        }
    }

    fn gap_options(
        &self,
        c: &Common,
        default_target: f64,
        default_max: u32,
        default_model: ErrorModel,
    ) -> Result<GapOptions> {
        let target = self.or(c.accuracy, "accuracy", default_target)?;
        if !(target > 0.0) {
            return Err(GapError::InvalidInput(format!("accuracy must be positive, got {target}")));
        }
        Ok(GapOptions::new(target)
            .with_max_level(self.or(c.max_level, "max-level", default_max)?)
            .with_error_model(self.error_model(c.error_model.clone(), default_model)?))
    }
}

fn parse_list(s: &str) -> Result<Vec<f64>> {
    s.split(',')
        .map(|v| v.trim().parse().map_err(|_| GapError::Parse(format!("bad number '{v}'"))))
        .collect()
}

/// Writes CSV to `out`, or to stdout when no path is given.
fn emit(out: Option<&Path>, csv: &str) -> Result<()> {
    match out {
        Some(p) => Ok(std::fs::write(p, csv)?),
        None => {
            print!("{csv}");
            Ok(())
        }
    }
}

fn status(ok: bool) -> ExitCode {
    if ok {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}

fn install_threads(n: usize) {
    // A second install fails harmlessly; the first pool stays in use.
    let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
}

fn run(cli: Cli) -> Result<ExitCode> {
    let s = Settings::load(cli.config.as_deref())?;
    let start = Instant::now();
    match cli.command {
        Command::Eigen { x, y, common } => {
            install_threads(s.threads(common.threads)?);
            let (ax, ay) = trigap::geometry::EQUILATERAL_APEX;
            let tri = Triangle::new(s.or(x, "x", ax)?, s.or(y, "y", ay)?)?;
            let default_max = GapOptions::default_max_level(tri.apex_y());
            let opts = s.gap_options(&common, 1e-2, default_max, ErrorModel::FineLevel)?;
            let r = gap_with_error(&tri, &opts)?;
            let out = s.get(common.out, "out")?;
            emit(out.as_deref(), &format!("{EIGEN_CSV_HEADER}\n{}\n", r.csv_row()))?;
            println!(
                "lambda1 {:.10} lambda2 {:.10} xi {:.10} err {:.3e} level {} ({:.2} s)",
                r.lambda1,
                r.lambda2,
                r.xi,
                r.err,
                r.level(),
                start.elapsed().as_secs_f64()
            );
            if !r.converged {
                eprintln!("error target {} not met by level {}", opts.target, r.level());
            }
            Ok(status(r.converged))
        }
        Command::Sweep { stepping, stop_after, common } => {
            let window = Window::parse(&s.or(common.window.clone(), "window", DEFAULT_WINDOW.into())?)?;
            let mut policy = AccuracyPolicy::desk();
            policy.floor = s.or(common.accuracy, "accuracy", policy.floor)?;
            if !(policy.floor > 0.0) {
                return Err(GapError::InvalidInput("accuracy floor must be positive".into()));
            }
            policy.initial = policy.initial.max(policy.floor);
            policy.max_level = s.or(common.max_level, "max-level", policy.max_level)?;
            policy.error_model = s.error_model(common.error_model.clone(), policy.error_model)?;
            let stepping = match s.get(stepping, "stepping")? {
                Some(v) => Stepping::parse(&v)?,
                None => Stepping::default(),
            };
            let cfg = SweepConfig::new(window, policy)
                .with_stepping(stepping)
                .with_threads(s.threads(common.threads)?);
            let out = SweepOutput::new(s.or(common.out, "out", PathBuf::from("sweep.csv"))?);
            let ctl = RunControl {
                resume: s.flag(common.resume, "resume")?,
                stop_after_rows: s.get(stop_after, "stop-after")?,
                stop_after_seeds: None,
            };
            let report = run_sweep(&cfg, &out, ctl)?;
            let cells = &report.cells;
            println!(
                "{} units, {} cells, status {}, {:.1} s",
                report.state.rows_written,
                cells.len(),
                match &report.state.status {
                    SweepStatus::Running => "running".to_string(),
                    SweepStatus::Complete => "complete".to_string(),
                    SweepStatus::Failed(m) => format!("failed ({m})"),
                },
                start.elapsed().as_secs_f64()
            );
            if report.state.status != SweepStatus::Complete {
                eprintln!("sweep stopped before completion; rerun with --resume");
                return Ok(ExitCode::FAILURE);
            }
            let margin_ok = cells.iter().all(|c| c.xi > EQUILATERAL_GAP + 2.0 * c.err);
            let met = cells.iter().filter(|c| c.accuracy_met).count();
            let audit = coverage_audit(cells, &window, AUDIT_SPACING);
            println!(
                "margin check {}, {} of {} cells meet the digit rule",
                if margin_ok { "passed" } else { "FAILED" },
                met,
                cells.len()
            );
            println!(
                "audit: {} lattice points, {} covered, {} uncovered",
                audit.lattice_points,
                audit.covered_by_cells,
                audit.uncovered.len()
            );
            for (x, y) in audit.uncovered.iter().take(10) {
                eprintln!("uncovered ({x:.6}, {y:.6})");
            }
            Ok(status(margin_ok && audit.passed()))
        }
        Command::Scaling { heights, x0, common } => {
            install_threads(s.threads(common.threads)?);
            let heights = parse_list(&s.or(heights, "heights", "0.1,0.05,0.02".into())?)?;
            let opts = s.gap_options(&common, 1.0, trigap::eigensolver::THIN_MAX_LEVEL, ErrorModel::Extrapolated)?;
            let r = study::scaling_study(&heights, s.or(x0, "x0", 0.5)?, &opts)?;
            emit(s.get(common.out, "out")?.as_deref(), &r.to_csv())?;
            let slope = r.slope.map_or("n/a".to_string(), |v| format!("{v:.4}"));
            println!(
                "slope of log xi vs log h {slope}, min xi*h^(4/3) {:.6}, increasing {}, converged {}",
                r.min_scaled(),
                r.strictly_increasing(),
                r.all_converged()
            );
            for row in r.rows.iter().filter(|row| !row.result.converged) {
                eprintln!("h = {}: error target not met", row.h);
            }
            Ok(status(r.strictly_increasing() && r.min_scaled() > 0.0 && r.all_converged()))
        }
        Command::LameVerify { quad_degree, common } => {
            let report = lame::verify_integral_tables(
                s.or(quad_degree, "quad-degree", lame::DEFAULT_QUAD_DEGREE)?,
            )?;
            emit(s.get(common.out, "out")?.as_deref(), &report.to_csv())?;
            let mut ok = true;
            for r in report.mismatches() {
                match r.status {
                    TableStatus::Mismatch => println!(
                        "{}: printed {} but computed {} (flagged as a typo)",
                        r.name, r.paper_value, r.computed_value
                    ),
                    _ => {
                        ok = false;
                        eprintln!("{}: quadrature did not settle", r.name);
                    }
                }
            }
            println!(
                "{} integrals, {} flagged, product-form constant {}",
                report.rows.len(),
                report.mismatches().count(),
                report.phi1_product_constant
            );
            if let Some(d) = &report.third_diagnostic {
                println!("third eigenfunction: {d}");
            }
            Ok(status(ok))
        }
        Command::LameSpectrum { count, common } => {
            let mut csv = String::from("index,lambda,multiplicity,pairs\n");
            for (k, e) in lame::distinct_spectrum(s.or(count, "count", 3)?).iter().enumerate() {
                let pairs: Vec<String> =
                    e.representative_pairs.iter().map(|p| format!("({} {})", p.m, p.n)).collect();
                csv.push_str(&format!(
                    "{},{:.17e},{},{}\n",
                    k + 1,
                    e.value,
                    e.multiplicity,
                    pairs.join(" ")
                ));
            }
            emit(s.get(common.out, "out")?.as_deref(), &csv)?;
            Ok(ExitCode::SUCCESS)
        }
        Command::DeformMinimize { grid, common } => {
            let m = deformation::minimize_I_with_grid(s.or(grid, "grid", deformation::MINIMIZE_GRID)?);
            let csv = format!(
                "value,alpha,beta,a,b\n{:.17e},{:.17e},{:.17e},{:.17e},{:.17e}\n",
                m.value, m.coeffs.alpha, m.coeffs.beta, m.direction.a, m.direction.b
            );
            emit(s.get(common.out, "out")?.as_deref(), &csv)?;
            let exact = deformation::slope_minimum_closed_form();
            println!("minimum {:.8} (closed form {:.8}, difference {:.2e})", m.value, exact, (m.value - exact).abs());
            Ok(status(m.value > 0.0))
        }
        Command::DeformSlope { a, b, ts, common } => {
            install_threads(s.threads(common.threads)?);
            let (da, db) = (3f64.sqrt() / 2.0, -0.5);
            let dir = DeformationDirection::new(s.or(a, "a", da)?, s.or(b, "b", db)?)?;
            let ts = parse_list(&s.or(ts, "ts", "0.005,0.01,0.02".into())?)?;
            let opts = s.gap_options(
                &common,
                1e-3,
                trigap::eigensolver::DEFAULT_MAX_LEVEL,
                ErrorModel::Extrapolated,
            )?;
            let rows = study::slope_rows(&dir, &ts, &opts)?;
            let mut csv = format!("{}\n", study::SLOPE_CSV_HEADER);
            for r in &rows {
                csv.push_str(&r.csv_row());
                csv.push('\n');
            }
            let ok = rows.iter().all(|r| r.passes(2.0));
            emit(s.get(common.out, "out")?.as_deref(), &csv)?;
            println!("difference quotients >= 2 within error: {ok}");
            Ok(status(ok))
        }
        Command::PlotGrid { tau_steps, nu_steps, common } => {
            install_threads(s.threads(common.threads)?);
            let opts = s.gap_options(&common, 1e-1, 8, ErrorModel::FineLevel)?;
            let cells = study::plot_grid(
                s.or(tau_steps, "tau-steps", 21)?,
                s.or(nu_steps, "nu-steps", 20)?,
                &opts,
            )?;
            emit(s.get(common.out, "out")?.as_deref(), &study::plot_csv(&cells))?;
            let missing = cells.iter().filter(|c| c.log_xi.is_none()).count();
            let min = cells
                .iter()
                .filter_map(|c| c.log_xi.map(|v| (v, c.tau, c.nu)))
                .min_by(|p, q| p.0.total_cmp(&q.0));
            if let Some((v, tau, nu)) = min {
                println!("{} cells, {missing} missing, min log xi {v:.6} at ({tau:.4}, {nu:.4})", cells.len());
            }
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
