use clap::{Parser, Subcommand};
use ritzlab::harness::{
    run_convergence, run_gh_study, run_mesh_generation, run_stability, run_weight_audit,
    ExperimentConfig, HarnessError,
};
use std::path::PathBuf;
use std::process::ExitCode;

/// Finite element laboratory for weighted W^{1,1} stability of the Ritz
/// projection on convex polygons.
#[derive(Parser)]
#[command(name = "ritzlab", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Stability-ratio refinement study: rho(h) = |∇R_h u|_w / |∇u|_w.
    Stability {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Green's-function error study: the mollifier-normalized supremum.
    Gh {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Maximal-operator, A1-constant and convolution audits.
    Weights {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Manufactured-solution convergence sanity study.
    Convergence {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Triangulate a convex polygon file and write the mesh format.
    Mesh {
        /// Polygon file: one `x y` vertex per line, counterclockwise.
        #[arg(long)]
        polygon: PathBuf,
        /// Target mesh size (h_max bound).
        #[arg(long)]
        h: f64,
        #[arg(long)]
        out: PathBuf,
    },
}

fn run(cli: Cli) -> Result<(), HarnessError> {
    match cli.command {
        Command::Stability { config, out } => {
            let cfg = ExperimentConfig::load(&config)?;
            let report = run_stability(&cfg, &out)?;
            println!(
                "stability: {} levels, max rho {:.6}, slope {:.4} -> {}",
                report.rows.len(),
                report.max_rho,
                report.slope,
                out.display()
            );
        }
        Command::Gh { config, out } => {
            let cfg = ExperimentConfig::load(&config)?;
            let report = run_gh_study(&cfg, &out)?;
            let max = report
                .runs
                .iter()
                .map(|r| r.gh_estimate)
                .fold(0.0f64, f64::max);
            println!(
                "gh: {} runs, max estimate {:.6} -> {}",
                report.runs.len(),
                max,
                out.display()
            );
        }
        Command::Weights { config, out } => {
            let cfg = ExperimentConfig::load(&config)?;
            let report = run_weight_audit(&cfg, &out)?;
            println!(
                "weights: a1 estimate {:.6} over {} samples -> {}",
                report.a1.constant,
                report.a1.samples_used,
                out.display()
            );
        }
        Command::Convergence { config, out } => {
            let cfg = ExperimentConfig::load(&config)?;
            let report = run_convergence(&cfg, &out)?;
            println!(
                "convergence: {} levels, l2 rate {:?}, energy rate {:?} -> {}",
                report.rows.len(),
                report.l2_rate,
                report.energy_rate,
                out.display()
            );
        }
        Command::Mesh { polygon, h, out } => {
            let mesh = run_mesh_generation(&polygon, h, &out)?;
            println!(
                "mesh: {} vertices, {} triangles, h_max {:.6} -> {}",
                mesh.n_vertices(),
                mesh.n_triangles(),
                mesh.h_max(),
                out.display()
            );
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
