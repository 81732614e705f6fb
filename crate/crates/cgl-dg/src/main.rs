use cgl_dg::assembly::IPVariant;
use cgl_dg::cli::{cmd_probe, cmd_run, cmd_sweep, cmd_verify, RunArtifacts, EXIT_CONFIG};
use clap::{Parser, Subcommand};
use std::path::PathBuf;
use std::process::ExitCode;

/// Interior-penalty DG solver for the 2D complex Ginzburg-Landau equation.
#[derive(Parser, Debug)]
#[command(name = "cgl-dg", version, about)]
struct Cli {
    /// Output directory for CSVs and plots.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,

    /// Worker threads for sweeps (default: all cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run one time integration from a `key = value` config file.
    Run {
        /// Path to the run config.
        config: PathBuf,

        /// Also write the mesh as plain text.
        #[arg(long)]
        dump_mesh: Option<PathBuf>,

        /// Also write the stiffness matrix in `row col value` form.
        #[arg(long)]
        dump_matrix: Option<PathBuf>,
    },
    /// Run a parameter grid from a sweep spec file (lists allowed).
    Sweep {
        /// Path to the sweep spec.
        spec: PathBuf,
    },
    /// Manufactured-solution convergence gate.
    Verify {
        /// Mesh subdivisions, finest last.
        #[arg(long, value_delimiter = ',', default_values_t = [6usize, 12, 24])]
        n: Vec<usize>,
    },
    /// Coercivity/continuity/symmetry diagnostics of the operator.
    Probe {
        /// Variants to probe.
        #[arg(long, value_delimiter = ',', default_values_t =
            ["sipg".to_string(), "nipg".to_string(), "iipg".to_string()])]
        variant: Vec<String>,

        /// Penalty values to probe.
        #[arg(long, value_delimiter = ',', default_values_t = [1e3, 1e8])]
        sigma: Vec<f64>,

        /// Mesh subdivisions for the probe space.
        #[arg(long, default_value_t = 6)]
        n: usize,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(jobs) = cli.jobs {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(jobs).build_global() {
            eprintln!("error: cannot configure {jobs} worker threads: {e}");
            return ExitCode::from(EXIT_CONFIG as u8);
        }
    }
    let code = match &cli.command {
        Command::Run { config, dump_mesh, dump_matrix } => {
            let artifacts = RunArtifacts {
                dump_mesh: dump_mesh.clone(),
                dump_matrix: dump_matrix.clone(),
            };
            cmd_run(config, &cli.out, &artifacts)
        }
        Command::Sweep { spec } => cmd_sweep(spec, &cli.out),
        Command::Verify { n } => cmd_verify(n, &cli.out),
        Command::Probe { variant, sigma, n } => {
            let mut variants = Vec::new();
            for name in variant {
                match IPVariant::parse(name) {
                    Some(v) => variants.push(v),
                    None => {
                        eprintln!("error: unknown variant `{name}` (expected sipg, nipg, iipg)");
                        return ExitCode::from(EXIT_CONFIG as u8);
                    }
                }
            }
            cmd_probe(&variants, sigma, *n, &cli.out)
        }
    };
    ExitCode::from(code as u8)
}
