//! `regenera`: solve, mesh, verify and tabulate doubly periodic minimal surfaces.

mod config;
mod run;
mod verify;

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{anyhow, Context};
use clap::{Parser, Subcommand};
use num_complex::Complex64 as C;
use regenera::continuation::continue_family_partial;
use regenera::geometry::{export_obj, integrate_sphere, integrate_surface, self_intersections, Basepoint, ClosureReport};
use regenera::residuals::golden_entries;
use regenera::surface_model::build_config;
use regenera::tolerances::CYCLE_DEFECT_TOL;
use regenera::weierstrass::assemble_triple;
use regenera::{Error, Execution};

use config::RunConfig;
use run::{find_step, load_manifest, load_steps, run_name, step_file, write_json, Manifest, RunLock, StepEntry, MANIFEST};

const EXIT_CONFIG: u8 = 2;
const EXIT_SOLVE: u8 = 3;
const EXIT_MESH: u8 = 4;
const EXIT_VERIFY: u8 = 5;

#[derive(Parser)]
#[command(name = "regenera", version, about = "Doubly periodic minimal surfaces from a chain of noded spheres")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve the period and conformality equations along the x schedule.
    Solve { config: PathBuf },
    /// Integrate a solved step into OBJ meshes.
    Mesh {
        run_dir: PathBuf,
        #[arg(long, allow_negative_numbers = true)]
        x: f64,
        /// Lattice copies, e.g. 3x2.
        #[arg(long, default_value = "1x1", value_parser = parse_replicate)]
        replicate: (usize, usize),
    },
    /// Run the invariant suites on every solved step.
    Verify { run_dir: PathBuf },
    /// Tabulate the closed-form Jacobian entries at x = 0 against finite differences.
    Goldens {
        #[arg(long, value_delimiter = ',', required = true, allow_negative_numbers = true)]
        t2: Vec<f64>,
        #[arg(long, default_value_t = 2)]
        n: usize,
        /// Write the CSV here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn parse_replicate(s: &str) -> Result<(usize, usize), String> {
    let (a, b) = s.split_once(['x', 'X']).ok_or_else(|| format!("expected AxB, got {s}"))?;
    let a: usize = a.trim().parse().map_err(|_| format!("bad count {a}"))?;
    let b: usize = b.trim().parse().map_err(|_| format!("bad count {b}"))?;
    if a == 0 || b == 0 {
        return Err("replication counts must be positive".into());
    }
    Ok((a, b))
}

/// A failure together with the exit code it maps to.
struct Failure {
    code: u8,
    error: anyhow::Error,
}

trait ExitWith<T> {
    fn exit_with(self, code: u8) -> Result<T, Failure>;
}

impl<T, E: Into<anyhow::Error>> ExitWith<T> for Result<T, E> {
    fn exit_with(self, code: u8) -> Result<T, Failure> {
        self.map_err(|e| Failure { code, error: e.into() })
    }
}

fn fail<T>(code: u8, error: anyhow::Error) -> Result<T, Failure> {
    Err(Failure { code, error })
}

/// Caps the rayon pool at REGENERA_THREADS when set.
fn configure_threads() -> anyhow::Result<()> {
    let Ok(value) = std::env::var("REGENERA_THREADS") else {
        return Ok(());
    };
    let threads: usize = value.trim().parse().ok().filter(|&t| t > 0).ok_or_else(|| anyhow!("REGENERA_THREADS must be a positive integer, got {value:?}"))?;
    #[cfg(feature = "parallel")]
    rayon::ThreadPoolBuilder::new().num_threads(threads).build_global().context("cannot configure the thread pool")?;
    #[cfg(not(feature = "parallel"))]
    let _ = threads;
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = configure_threads().exit_with(EXIT_CONFIG).and_then(|()| match cli.command {
        Command::Solve { config } => solve(&config),
        Command::Mesh { run_dir, x, replicate } => mesh(&run_dir, x, replicate),
        Command::Verify { run_dir } => verify_cmd(&run_dir),
        Command::Goldens { t2, n, out } => goldens(&t2, n, out.as_deref()),
    });
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {:#}", f.error);
            ExitCode::from(f.code)
        }
    }
}

fn solve(path: &Path) -> Result<(), Failure> {
    let cfg = RunConfig::load(path).exit_with(EXIT_CONFIG)?;
    let noded = cfg.noded().exit_with(EXIT_CONFIG)?;
    let base = path.parent().unwrap_or(Path::new(".")).join(cfg.output_dir.as_deref().unwrap_or("runs"));
    let name = run_name(&cfg);
    let dir = base.join(&name);
    std::fs::create_dir_all(&dir).with_context(|| format!("cannot create {}", dir.display())).exit_with(EXIT_CONFIG)?;
    let _lock = RunLock::acquire(&dir).exit_with(EXIT_CONFIG)?;

    let schedule = cfg.schedule();
    let opts = cfg.newton();
    let start = Instant::now();
    let (steps, failure) = continue_family_partial(&noded, &schedule, cfg.free_values(), &opts);
    let mut manifest = Manifest {
        name,
        config: cfg.clone(),
        schedule,
        tolerance: opts.tol,
        status: String::new(),
        failed_x: None,
        error: None,
        steps: Vec::new(),
        elapsed_ms: 0.0,
    };
    for step in &steps {
        let file = step_file(step.x);
        write_json(&dir.join(&file), step).exit_with(EXIT_SOLVE)?;
        manifest.steps.push(StepEntry {
            x: step.x,
            file,
            final_residual: step.report.final_residual,
            iterations: step.report.iterations,
            converged: step.report.final_residual <= opts.tol,
        });
    }
    let worst = steps.iter().map(|s| s.report.final_residual).fold(0.0, f64::max);
    let result = match failure {
        None if manifest.steps.iter().all(|s| s.converged) => {
            manifest.status = "converged".into();
            Ok(())
        }
        None => {
            manifest.status = "failed".into();
            Err(anyhow!("final residual {worst:e} exceeds tolerance {:e}", opts.tol))
        }
        Some(e) => {
            manifest.status = "failed".into();
            // the first x of the schedule that was not reached
            manifest.failed_x = match e {
                Error::ContinuationStalled { x, .. } => Some(x),
                _ => manifest.schedule.get(steps.len()).copied(),
            };
            manifest.error = Some(e.to_string());
            Err(anyhow!(e))
        }
    };
    manifest.elapsed_ms = start.elapsed().as_secs_f64() * 1e3;
    write_json(&dir.join(MANIFEST), &manifest).exit_with(EXIT_SOLVE)?;
    println!("{}", dir.display());
    result.exit_with(EXIT_SOLVE)
}

fn print_closures(report: &ClosureReport) {
    for c in &report.cycles {
        println!(
            "{:<8} closure ({:+.9}, {:+.9}, {:+.9})  defect {:.3e}",
            c.label, c.closure[0], c.closure[1], c.closure[2], c.defect
        );
    }
    println!("max defect {:.3e}, edge audit {:.3e} over {} non-tree edges", report.max_defect, report.audit_defect, report.non_tree_edges);
}

fn mesh(dir: &Path, x: f64, replicate: (usize, usize)) -> Result<(), Failure> {
    let manifest = load_manifest(dir).exit_with(EXIT_CONFIG)?;
    let step = find_step(dir, &manifest, x).exit_with(EXIT_CONFIG)?;
    let cfg = &manifest.config;
    let noded = cfg.noded().exit_with(EXIT_CONFIG)?;
    let opts = cfg.mesh_options();
    let _lock = RunLock::acquire(dir).exit_with(EXIT_CONFIG)?;
    let out = dir.join("meshes");
    std::fs::create_dir_all(&out).exit_with(EXIT_MESH)?;
    let config = noded.at_x(step.x);
    let triple = assemble_triple(&config, &step.params).exit_with(EXIT_MESH)?;
    let tag = format!("x{:.6}", step.x);
    if step.x == 0.0 {
        for m in 0..2 * noded.n {
            let (mesh, _) = integrate_sphere(&triple, &step.params, m, noded.epsilon, C::new(0.0, 1.0), &opts).exit_with(EXIT_MESH)?;
            let path = out.join(format!("sphere-{}-{tag}.obj", m + 1));
            export_obj(&mesh, &path, replicate).exit_with(EXIT_MESH)?;
            println!("{}", path.display());
        }
        return Ok(());
    }
    let (mesh, report) = integrate_surface(&triple, &step.params, Basepoint::default(), &opts).exit_with(EXIT_MESH)?;
    write_json(&out.join(format!("closure-{tag}.json")), &report).exit_with(EXIT_MESH)?;
    print_closures(&report);
    if report.max_defect > CYCLE_DEFECT_TOL {
        return fail(EXIT_MESH, anyhow!(Error::PeriodNotClosed { defect: report.max_defect, tolerance: CYCLE_DEFECT_TOL }));
    }
    let crossings = self_intersections(&mesh, Execution::default());
    write_json(&out.join(format!("intersections-{tag}.json")), &crossings).exit_with(EXIT_MESH)?;
    println!(
        "self-intersection sampling (heuristic): {} crossing pairs among {} tested",
        crossings.intersections, crossings.pairs_tested
    );
    let path = out.join(format!("mesh-{tag}.obj"));
    export_obj(&mesh, &path, replicate).exit_with(EXIT_MESH)?;
    println!("{}", path.display());
    Ok(())
}

fn verify_cmd(dir: &Path) -> Result<(), Failure> {
    let manifest = load_manifest(dir).exit_with(EXIT_CONFIG)?;
    let steps = load_steps(dir, &manifest).exit_with(EXIT_CONFIG)?;
    if steps.is_empty() {
        return fail(EXIT_VERIFY, anyhow!("run has no solved steps"));
    }
    let noded = manifest.config.noded().exit_with(EXIT_CONFIG)?;
    let _lock = RunLock::acquire(dir).exit_with(EXIT_CONFIG)?;
    let report = verify::verify_run(&manifest.name, &noded, &steps, manifest.tolerance, Execution::default()).exit_with(EXIT_VERIFY)?;
    write_json(&dir.join("verify.json"), &report).exit_with(EXIT_VERIFY)?;
    for s in &report.suites {
        let at = s.x.map(|x| format!(" x={x:.6}")).unwrap_or_default();
        println!("{} {}{}: {}", if s.passed { "PASS" } else { "FAIL" }, s.suite, at, s.detail);
    }
    if report.passed {
        return Ok(());
    }
    let mut failed: Vec<&str> = report.suites.iter().filter(|s| !s.passed).map(|s| s.suite.as_str()).collect();
    failed.dedup();
    fail(EXIT_VERIFY, anyhow!("failed suites: {}", failed.join(", ")))
}

/// Complex value with seven decimals, e.g. `0.5235988i` or `1.0000000-2.0000000i`.
fn format_value(v: C) -> String {
    let (re, im) = (v.re, v.im);
    let tiny = 1e-12 * v.norm().max(1.0);
    match (re.abs() <= tiny, im.abs() <= tiny) {
        (true, true) => "0.0000000".into(),
        (true, false) => format!("{im:.7}i"),
        (false, true) => format!("{re:.7}"),
        (false, false) => format!("{re:.7}{im:+.7}i"),
    }
}

fn goldens(t2s: &[f64], n: usize, out: Option<&Path>) -> Result<(), Failure> {
    let mut configs = Vec::new();
    for &t2 in t2s {
        configs.push(build_config(n, t2, 0.0, &[], None).exit_with(EXIT_CONFIG)?);
    }
    let sink: Box<dyn std::io::Write> = match out {
        Some(p) => Box::new(std::fs::File::create(p).with_context(|| format!("cannot write {}", p.display())).exit_with(EXIT_CONFIG)?),
        None => Box::new(std::io::stdout().lock()),
    };
    let mut w = csv::Writer::from_writer(sink);
    let header = ["id", "formula", "T2", "value", "value_re", "value_im", "fd_re", "fd_im", "rel_error"];
    w.write_record(header).exit_with(EXIT_CONFIG)?;
    let mut worst: f64 = 0.0;
    for config in &configs {
        let rows = golden_entries(config, Execution::default()).exit_with(EXIT_SOLVE)?;
        for g in rows {
            worst = worst.max(g.rel_error);
            w.write_record([
                g.id.clone(),
                g.formula.clone(),
                g.t2.to_string(),
                format_value(g.value),
                format!("{:e}", g.value.re),
                format!("{:e}", g.value.im),
                format!("{:e}", g.fd.re),
                format!("{:e}", g.fd.im),
                format!("{:.3e}", g.rel_error),
            ])
            .exit_with(EXIT_CONFIG)?;
        }
    }
    w.flush().exit_with(EXIT_CONFIG)?;
    if !worst.is_finite() {
        return fail(EXIT_SOLVE, anyhow!("finite differences produced a non-finite value"));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn replicate_argument() {
        assert_eq!(parse_replicate("3x2"), Ok((3, 2)));
        assert_eq!(parse_replicate("1X1"), Ok((1, 1)));
        assert!(parse_replicate("0x2").is_err());
        assert!(parse_replicate("3").is_err());
    }

    #[test]
    fn value_formatting() {
        assert_eq!(format_value(C::new(0.0, 0.5235987755982988)), "0.5235988i");
        assert_eq!(format_value(C::new(0.0, -5.585053606381854)), "-5.5850536i");
        assert_eq!(format_value(C::new(4.0 * std::f64::consts::PI, 0.0)), "12.5663706");
        assert_eq!(format_value(C::new(1.0, -2.0)), "1.0000000-2.0000000i");
    }
}
