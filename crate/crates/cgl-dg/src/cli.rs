//! Implementations of the command-line subcommands.
//!
//! Each `cmd_*` function does the work of one subcommand and returns the
//! process exit code: 0 ok, 1 config/usage error, 2 blow-up, 3 verification
//! failure. All file outputs land under a caller-chosen directory and are
//! byte-deterministic for fixed inputs.

use crate::analysis::{
    classify_stability, coercivity_probe, convergence_study, exact_spacetime_norms, run_level,
    NormReport, RunStatus,
};
use crate::assembly::{assemble_stiffness, IPVariant};
use crate::config::{parse_run_config, parse_sweep_spec};
use crate::evolve::RunConfig;
use crate::mesh::Mesh;
use crate::plot::{energy_vs_t_svg, norm_vs_h_svg};
use crate::space::DGSpace;
use std::fs;
use std::io::Write as IoWrite;
use std::path::{Path, PathBuf};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 1;
pub const EXIT_BLOWUP: i32 = 2;
pub const EXIT_VERIFY: i32 = 3;

/// Relative tolerance on the finest-level norms in `verify`.
pub const VERIFY_NORM_RTOL: f64 = 0.03;
/// Minimum acceptable L2 convergence rate in `verify`.
pub const VERIFY_MIN_RATE: f64 = 1.7;

fn ensure_dir(dir: &Path) -> std::io::Result<()> {
    fs::create_dir_all(dir)
}

fn write_file(path: &Path, contents: &str) -> std::io::Result<()> {
    fs::write(path, contents)
}

/// Writes a sparse matrix as `row col value` coordinate lines (0-based,
/// row-major order) with a `% rows cols nnz` header.
fn write_matrix_coordinate(path: &Path, matrix: &crate::sparse::SparseMatrix) -> std::io::Result<()> {
    let mut out = String::new();
    out.push_str(&format!("% {} {} {}\n", matrix.nrows(), matrix.ncols(), matrix.nnz()));
    for (row, col, value) in matrix.entries() {
        out.push_str(&format!("{row} {col} {value:.16e}\n"));
    }
    write_file(path, &out)
}

/// Extra artifacts `run` can emit next to the trajectory.
#[derive(Debug, Default, Clone)]
pub struct RunArtifacts {
    pub dump_mesh: Option<PathBuf>,
    pub dump_matrix: Option<PathBuf>,
}

/// `run <config>`: one time integration, trajectory CSV + energy plot, and
/// a one-line summary on stdout.
pub fn cmd_run(config_path: &Path, out_dir: &Path, artifacts: &RunArtifacts) -> i32 {
    let text = match fs::read_to_string(config_path) {
        Ok(t) => t,
        Err(e) => {
            eprintln!("error: cannot read {}: {e}", config_path.display());
            return EXIT_CONFIG;
        }
    };
    let config = match parse_run_config(&text) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_CONFIG;
        }
    };
    if let Err(e) = ensure_dir(out_dir) {
        eprintln!("error: cannot create {}: {e}", out_dir.display());
        return EXIT_CONFIG;
    }
    if let Some(path) = &artifacts.dump_mesh {
        let mesh = match Mesh::unit_square(config.n) {
            Ok(m) => m,
            Err(e) => {
                eprintln!("error: {e}");
                return EXIT_CONFIG;
            }
        };
        let mut buffer = Vec::new();
        if mesh.write_text(&mut buffer).is_err()
            || fs::write(path, &buffer).is_err()
        {
            eprintln!("error: cannot write {}", path.display());
            return EXIT_CONFIG;
        }
    }
    if let Some(path) = &artifacts.dump_matrix {
        let space = match Mesh::unit_square(config.n)
            .map_err(|e| e.to_string())
            .and_then(|m| DGSpace::new(m, config.degree).map_err(|e| e.to_string()))
        {
            Ok(s) => s,
            Err(e) => {
                eprintln!("error: {e}");
                return EXIT_CONFIG;
            }
        };
        let stiffness = match assemble_stiffness(&space, config.variant, config.sigma) {
            Ok(m) => m,
            Err(e) => {
                eprintln!("error: {e}");
                return EXIT_CONFIG;
            }
        };
        if let Err(e) = write_matrix_coordinate(path, &stiffness) {
            eprintln!("error: cannot write {}: {e}", path.display());
            return EXIT_CONFIG;
        }
    }

    let (trajectory, record) = match run_level(&config) {
        Ok(pair) => pair,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_CONFIG;
        }
    };

    let mut csv = Vec::new();
    if trajectory.write_csv(&mut csv).is_err() {
        eprintln!("error: trajectory serialization failed");
        return EXIT_CONFIG;
    }
    let traj_path = out_dir.join("trajectory.csv");
    if let Err(e) = fs::write(&traj_path, &csv) {
        eprintln!("error: cannot write {}: {e}", traj_path.display());
        return EXIT_CONFIG;
    }
    let svg_path = out_dir.join("energy.svg");
    if let Err(e) = write_file(&svg_path, &energy_vs_t_svg(&trajectory)) {
        eprintln!("error: cannot write {}: {e}", svg_path.display());
        return EXIT_CONFIG;
    }

    println!(
        "norm_u1={:.16e} norm_u2={:.16e} classification_input={:.16e}",
        record.norm_u1,
        record.norm_u2,
        trajectory.max_norm()
    );
    if trajectory.blown_up {
        eprintln!("blow-up detected at step {}", trajectory.records.len() - 1);
        EXIT_BLOWUP
    } else {
        EXIT_OK
    }
}

/// `sweep <spec>`: runs every cell of the grid (in parallel when a rayon
/// pool with more than one thread is active) and writes one CSV row per
/// cell in spec order.
pub fn cmd_sweep(spec_path: &Path, out_dir: &Path) -> i32 {
    let text = match fs::read_to_string(spec_path) {
        Ok(t) => t,
        Err(e) => {
            eprintln!("error: cannot read {}: {e}", spec_path.display());
            return EXIT_CONFIG;
        }
    };
    let spec = match parse_sweep_spec(&text) {
        Ok(s) => s,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_CONFIG;
        }
    };
    if let Err(e) = ensure_dir(out_dir) {
        eprintln!("error: cannot create {}: {e}", out_dir.display());
        return EXIT_CONFIG;
    }
    let cells = spec.cells();
    let rows: Vec<String> = {
        use rayon::prelude::*;
        cells.par_iter().map(|config| sweep_row(config)).collect()
    };
    let mut csv = String::from("method,a,b,sigma,n,h,dt,norm_u1,norm_u2,err_l2_final,status\n");
    for row in rows {
        csv.push_str(&row);
        csv.push('\n');
    }
    let path = out_dir.join("sweep.csv");
    if let Err(e) = write_file(&path, &csv) {
        eprintln!("error: cannot write {}: {e}", path.display());
        return EXIT_CONFIG;
    }
    println!("{} cells -> {}", cells.len(), path.display());
    EXIT_OK
}

/// One sweep CSV row; solver failures are recorded in the status column
/// rather than aborting the sweep.
fn sweep_row(config: &RunConfig) -> String {
    let h = std::f64::consts::SQRT_2 / config.n as f64;
    match run_level(config) {
        Ok((_, record)) => format!(
            "{},{:.16e},{:.16e},{:.16e},{},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{}",
            config.variant.name(),
            config.a,
            config.b,
            config.sigma,
            record.n,
            record.h,
            record.dt,
            record.norm_u1,
            record.norm_u2,
            record.err_l2_final,
            record.status,
        ),
        Err(_) => format!(
            "{},{:.16e},{:.16e},{:.16e},{},{:.16e},{:.16e},NaN,NaN,NaN,{}",
            config.variant.name(),
            config.a,
            config.b,
            config.sigma,
            config.n,
            h,
            config.dt(),
            RunStatus::Blowup,
        ),
    }
}

/// `verify`: manufactured-solution gate. Runs the benign-dispersion
/// convergence study and checks rates and finest-level norms against the
/// closed-form values.
pub fn cmd_verify(ns: &[usize], out_dir: &Path) -> i32 {
    if ns.len() < 2 {
        eprintln!("error: verify needs at least two mesh levels, got {:?} (rates undefined)", ns);
        return EXIT_CONFIG;
    }
    if let Err(e) = ensure_dir(out_dir) {
        eprintln!("error: cannot create {}: {e}", out_dir.display());
        return EXIT_CONFIG;
    }
    let base = RunConfig::default();
    let report = match convergence_study(&base, ns) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_CONFIG;
        }
    };
    let mut csv = Vec::new();
    if report.write_csv(&mut csv).is_err() {
        eprintln!("error: report serialization failed");
        return EXIT_CONFIG;
    }
    let csv_path = out_dir.join("convergence.csv");
    if fs::write(&csv_path, &csv).is_err() {
        eprintln!("error: cannot write {}", csv_path.display());
        return EXIT_CONFIG;
    }
    let svg_path = out_dir.join("norm_vs_h.svg");
    if write_file(&svg_path, &norm_vs_h_svg(&report)).is_err() {
        eprintln!("error: cannot write {}", svg_path.display());
        return EXIT_CONFIG;
    }

    let (exact_u1, exact_u2) = exact_spacetime_norms(&Default::default(), base.t_final);
    let finest = report.levels.last().expect("ns nonempty");
    let mut failures = Vec::new();
    for level in report.levels.iter().skip(1) {
        match level.rate {
            Some(rate) if rate >= VERIFY_MIN_RATE => {}
            Some(rate) => failures.push(format!(
                "rate at n={}: measured {rate:.3}, required >= {VERIFY_MIN_RATE}",
                level.n
            )),
            None => failures.push(format!("rate at n={}: undefined", level.n)),
        }
    }
    for (name, measured, expected) in [
        ("norm_u1", finest.norm_u1, exact_u1),
        ("norm_u2", finest.norm_u2, exact_u2),
    ] {
        let rel = (measured - expected).abs() / expected;
        if !(rel <= VERIFY_NORM_RTOL) {
            failures.push(format!(
                "{name} at n={}: measured {measured:.6}, expected {expected:.6} \
                 (rel err {rel:.4} > {VERIFY_NORM_RTOL})",
                finest.n
            ));
        }
    }

    let mut stdout = std::io::stdout();
    for level in &report.levels {
        let _ = writeln!(
            stdout,
            "n={:<3} norm_u1={:.6} norm_u2={:.6} err_l2_final={:.3e} rate={}",
            level.n,
            level.norm_u1,
            level.norm_u2,
            level.err_l2_final,
            level.rate.map(|r| format!("{r:.3}")).unwrap_or_else(|| "-".into()),
        );
    }
    if failures.is_empty() {
        println!(
            "verify: PASS (rates >= {VERIFY_MIN_RATE}, finest norms within {:.0}% of exact)",
            VERIFY_NORM_RTOL * 100.0
        );
        EXIT_OK
    } else {
        for f in &failures {
            eprintln!("verify: FAIL {f}");
        }
        EXIT_VERIFY
    }
}

/// `probe`: coercivity/continuity/symmetry diagnostics of the assembled
/// operator per (variant, sigma).
pub fn cmd_probe(variants: &[IPVariant], sigmas: &[f64], n: usize, out_dir: &Path) -> i32 {
    if variants.is_empty() || sigmas.is_empty() {
        eprintln!("error: probe needs at least one variant and one sigma");
        return EXIT_CONFIG;
    }
    if let Err(e) = ensure_dir(out_dir) {
        eprintln!("error: cannot create {}: {e}", out_dir.display());
        return EXIT_CONFIG;
    }
    let mesh = match Mesh::unit_square(n) {
        Ok(m) => m,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_CONFIG;
        }
    };
    let space = match DGSpace::new(mesh, 1) {
        Ok(s) => s,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_CONFIG;
        }
    };
    let mut csv = String::from("variant,sigma,min_rayleigh,max_continuity,symmetry_defect\n");
    for &variant in variants {
        for &sigma in sigmas {
            let result = match coercivity_probe(&space, variant, sigma, 64) {
                Ok(r) => r,
                Err(e) => {
                    eprintln!("error: {e}");
                    return EXIT_CONFIG;
                }
            };
            csv.push_str(&format!(
                "{},{:.16e},{:.16e},{:.16e},{:.16e}\n",
                variant.name(),
                sigma,
                result.min_rayleigh,
                result.max_continuity,
                result.symmetry_defect
            ));
        }
    }
    let path = out_dir.join("probe.csv");
    if let Err(e) = write_file(&path, &csv) {
        eprintln!("error: cannot write {}: {e}", path.display());
        return EXIT_CONFIG;
    }
    print!("{csv}");
    EXIT_OK
}

/// Classification of a finished report, exposed for the summary line of
/// sweep-style callers.
pub fn classification_line(report: &NormReport) -> String {
    format!("classification={}", classify_stability(report))
}
