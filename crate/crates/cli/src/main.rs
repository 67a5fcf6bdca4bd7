//! Command line front end: single runs, sweep tables, the verification
//! suite, and mesh/matrix dumps for external inspection.

use clap::{Args, Parser, Subcommand};
use crfve::{
    build_problem, emit_residual_plot_data, run, run_table, verify, DiagonalOrientation,
    ExperimentConfig, SweepSpec, Variant, CHECK_NAMES,
};
use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "crfve", version, about = "Finite volume element solver with edge-based Schwarz preconditioning")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve one problem and report iterations, estimates and timings.
    Run {
        #[command(flatten)]
        flags: ConfigFlags,
        /// Write the full JSON report here.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Write residual histories as whitespace-separated plot data.
        #[arg(long)]
        plot: Option<PathBuf>,
    },
    /// Sweep mesh sizes and subdomain grids (or coefficient jumps) into a
    /// CSV table.
    Table {
        #[command(flatten)]
        flags: ConfigFlags,
        /// Mesh sizes to sweep, comma separated.
        #[arg(long, value_delimiter = ',')]
        ns: Vec<usize>,
        /// Subdomain grids to sweep, comma separated.
        #[arg(long, value_delimiter = ',')]
        ms: Vec<usize>,
        /// Coefficient multipliers to sweep at fixed geometry; mutually
        /// exclusive with --ns/--ms.
        #[arg(long, value_delimiter = ',', conflicts_with_all = ["ns", "ms"])]
        alphas: Vec<f64>,
        /// Write the CSV here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run internal consistency checks on the discretization and solver.
    Verify {
        /// Subset of checks to run, comma separated; defaults to all.
        #[arg(long, value_delimiter = ',')]
        checks: Vec<String>,
        /// Seed for randomized probes.
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Write the JSON outcomes here.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Print a structured triangulation as plain text records.
    DumpMesh {
        /// Cells per side.
        #[arg(long)]
        n: usize,
        /// Diagonal orientation: bltr or brtl.
        #[arg(long, default_value = "bltr")]
        diag: DiagonalOrientation,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Print an assembled matrix in coordinate text form.
    DumpMatrix {
        #[command(flatten)]
        flags: ConfigFlags,
        /// One of a_fe, b_fv (free unknowns) or a_fe_full, b_fv_full.
        #[arg(long)]
        which: String,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

/// Experiment description: defaults, then a JSON config file, then a named
/// preset, then explicit flags, each layer overriding the previous one.
#[derive(Args)]
struct ConfigFlags {
    /// JSON file with an experiment config; missing fields take defaults.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Built-in problem name: problem1, problem2 or problem3.
    #[arg(long)]
    preset: Option<String>,
    /// Cells per side of the structured mesh.
    #[arg(long)]
    n: Option<usize>,
    /// Subdomains per side.
    #[arg(long)]
    m: Option<usize>,
    /// Oscillation frequency of the background coefficient.
    #[arg(long)]
    freq: Option<f64>,
    /// Multiplier on the marked subdomains.
    #[arg(long)]
    alpha1: Option<f64>,
    /// Marked subdomain indices (row-major), comma separated.
    #[arg(long, value_delimiter = ',')]
    marked: Option<Vec<usize>>,
    /// Preconditioner variant: sym or nsym.
    #[arg(long)]
    variant: Option<Variant>,
    /// Relative residual tolerance.
    #[arg(long)]
    tol: Option<f64>,
    /// Iteration cap.
    #[arg(long)]
    maxit: Option<usize>,
    /// Constant right-hand side value.
    #[arg(long)]
    f_const: Option<f64>,
    /// Diagonal orientation: bltr or brtl.
    #[arg(long)]
    diag: Option<DiagonalOrientation>,
    /// Seed for randomized probes.
    #[arg(long)]
    seed: Option<u64>,
}

impl ConfigFlags {
    fn resolve(&self) -> Result<ExperimentConfig, Box<dyn std::error::Error>> {
        let mut cfg = match &self.config {
            Some(path) => serde_json::from_str(&fs::read_to_string(path)?)?,
            None => ExperimentConfig::default(),
        };
        if let Some(name) = &self.preset {
            let p = ExperimentConfig::from_preset(name)?;
            cfg.n = p.n;
            cfg.m = p.m;
            cfg.freq = p.freq;
            cfg.marked = p.marked;
            cfg.preset = p.preset;
        }
        if let Some(n) = self.n {
            cfg.n = n;
        }
        if let Some(m) = self.m {
            cfg.m = m;
        }
        if let Some(freq) = self.freq {
            cfg.freq = freq;
        }
        if let Some(alpha1) = self.alpha1 {
            cfg.alpha1 = alpha1;
        }
        if let Some(marked) = &self.marked {
            cfg.marked = marked.clone();
        }
        if let Some(variant) = self.variant {
            cfg.variant = variant;
        }
        if let Some(tol) = self.tol {
            cfg.tol = tol;
        }
        if let Some(maxit) = self.maxit {
            cfg.maxit = maxit;
        }
        if let Some(f_const) = self.f_const {
            cfg.f_const = f_const;
        }
        if let Some(diag) = self.diag {
            cfg.diag = diag;
        }
        if let Some(seed) = self.seed {
            cfg.seed = seed;
        }
        Ok(cfg)
    }
}

fn write_or_print(out: &Option<PathBuf>, text: &str) -> Result<(), Box<dyn std::error::Error>> {
    match out {
        Some(path) => fs::write(path, text)?,
        None => print!("{text}"),
    }
    Ok(())
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| format!("{x:.3e}")).unwrap_or_else(|| "-".into())
}

fn execute(cli: Cli) -> Result<u8, Box<dyn std::error::Error>> {
    match cli.command {
        Command::Run { flags, out, plot } => {
            let cfg = flags.resolve()?;
            let report = run(&cfg)?;
            println!(
                "n={} m={} freq={} alpha1={} variant={} marked={:?}",
                cfg.n, cfg.m, cfg.freq, cfg.alpha1, cfg.variant, cfg.marked
            );
            println!(
                "free dofs {}, interfaces {}",
                report.free_dofs, report.interface_count
            );
            println!(
                "{} after {} iterations, final residual {:.3e} (cp {}, Cp {})",
                if report.converged { "converged" } else { "NOT CONVERGED" },
                report.iterations,
                report.res_l2.last().copied().unwrap_or(f64::NAN),
                fmt_opt(report.cp_est),
                fmt_opt(report.cp_upper_est),
            );
            println!(
                "assembly {:.3}s, setup {:.3}s, solve {:.3}s",
                report.seconds.assembly, report.seconds.setup, report.seconds.solve
            );
            if let Some(path) = &out {
                fs::write(path, serde_json::to_string_pretty(&report)?)?;
            }
            if let Some(path) = &plot {
                fs::write(path, emit_residual_plot_data(&report))?;
            }
            Ok(if report.converged { 0 } else { 2 })
        }
        Command::Table {
            flags,
            ns,
            ms,
            alphas,
            out,
        } => {
            let base = flags.resolve()?;
            let spec = if !alphas.is_empty() {
                SweepSpec::Alpha { alphas, base }
            } else {
                SweepSpec::Grid { ns, ms, base }
            };
            let table = run_table(&spec)?;
            write_or_print(&out, &table)?;
            Ok(0)
        }
        Command::Verify { checks, seed, out } => {
            let names: Vec<&str> = if checks.is_empty() {
                CHECK_NAMES.to_vec()
            } else {
                checks.iter().map(|s| s.as_str()).collect()
            };
            let report = verify(&names, seed)?;
            print!("{}", report.to_text());
            if let Some(path) = &out {
                fs::write(path, serde_json::to_string_pretty(&report)?)?;
            }
            Ok(if report.all_passed() { 0 } else { 2 })
        }
        Command::DumpMesh { n, diag, out } => {
            let mesh = crfve::build_structured_mesh(n, diag)?;
            write_or_print(&out, &mesh.to_text())?;
            Ok(0)
        }
        Command::DumpMatrix { flags, which, out } => {
            let cfg = flags.resolve()?;
            let p = build_problem(&cfg)?;
            let matrix = match which.as_str() {
                "a_fe" => &p.sys.a_fe,
                "b_fv" => &p.sys.b_fv,
                "a_fe_full" => &p.sys.a_fe_full,
                "b_fv_full" => &p.sys.b_fv_full,
                other => {
                    return Err(format!(
                        "unknown matrix '{other}'; expected a_fe, b_fv, a_fe_full or b_fv_full"
                    )
                    .into())
                }
            };
            write_or_print(&out, &matrix.to_coord_text())?;
            Ok(0)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli) {
        Ok(code) => ExitCode::from(code),
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(1)
        }
    }
}
