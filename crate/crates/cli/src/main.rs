use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Result;
use clap::{Parser, Subcommand};
use tlsctl_core::harness::{self, FileConfig, BASELINE_ERROR};
use tlsctl_core::{build_operators, diagonal_reachability, kak_decompose, matrix_io, Error};

/// Optimal level-shift control of a qudit coupled to two-level defects.
#[derive(Parser)]
#[command(name = "tlsctl", version)]
struct Cli {
    /// Experiment file (TOML). Without it the built-in single-TLS setup is used.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides the optimization seed of the config.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads; defaults to the available cores.
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Optimize a pulse for the configured target.
    Optimize,
    /// Optimize over the grid in the [sweep] section.
    Sweep,
    /// Add each second TLS of the two-TLS table and optimize.
    Table1,
    /// Optimize random diagonal targets and compare with the configured one.
    RandomTargets,
    /// Channel determinant over the gate for a pulse (zero pulse by default).
    Nonmarkov {
        #[arg(long)]
        pulse: Option<PathBuf>,
    },
    /// Factor a unitary from a text matrix file as k1 · A · k2.
    Cartan { matrix: PathBuf },
    /// Number of diagonal qudit directions the control reaches.
    LieRank,
    /// Evaluate a pulse against the configured target.
    Simulate {
        #[arg(long)]
        pulse: PathBuf,
    },
}

fn load(cli: &Cli) -> Result<FileConfig> {
    let mut cfg = match &cli.config {
        Some(p) => FileConfig::load(p)?,
        None => FileConfig::single_tls(),
    };
    if let Some(s) = cli.seed {
        cfg.optimization.seed = s;
    }
    Ok(cfg)
}

fn workers(cli: &Cli) -> usize {
    cli.workers
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
}

fn show(x: Option<f64>) -> String {
    x.map_or("failed".into(), |e| format!("{e:.4e}"))
}

fn run(cli: &Cli) -> Result<()> {
    let out = cli.out.as_path();
    match &cli.command {
        Command::Optimize => {
            let cfg = load(cli)?;
            let o = harness::run_optimize(&cfg, workers(cli), out)?;
            let r = &o.result;
            println!("final_error {:.6e}", r.final_error);
            println!("iterations {} ({:?})", r.iterations, r.stop_reason);
            println!("nonmarkovian_intervals {}", o.determinant.nonmarkovian_intervals.len());
            if !o.beats_baseline {
                println!("warning: error does not beat the {BASELINE_ERROR} baseline");
            }
            println!("wrote {}", out.display());
        }
        Command::Sweep => {
            let cfg = load(cli)?;
            for row in harness::run_sweep(&cfg, workers(cli), Some(out))? {
                let p: Vec<String> = row.params.iter().map(|v| format!("{v}")).collect();
                println!("{:>4} [{}] {}", row.point.index, p.join(", "), show(row.point.error()));
            }
            println!("wrote {}", out.join("sweep.csv").display());
        }
        Command::Table1 => {
            let cfg = load(cli)?;
            println!("spacing coupling t1      error       reference");
            for r in harness::run_table1(&cfg, workers(cli), Some(out))? {
                println!(
                    "{:>7} {:>8} {:>7} {:>11} {:.3e}",
                    r.spacing_mhz,
                    r.coupling_mhz,
                    r.t1_ns,
                    show(r.point.error()),
                    r.reference_error
                );
            }
            println!("wrote {}", out.join("table1.csv").display());
        }
        Command::RandomTargets => {
            let cfg = load(cli)?;
            let r = harness::run_random_targets(&cfg, workers(cli), Some(out))?;
            println!("min {:.4e} median {:.4e} max {:.4e}", r.min, r.median, r.max);
            println!("spread {:.3} ratio_to_reference {:.3}", r.spread, r.ratio_to_reference);
        }
        Command::Nonmarkov { pulse } => {
            let cfg = load(cli)?;
            let control = pulse.as_deref().map(harness::read_pulse_csv).transpose()?;
            let tr = harness::run_nonmarkov(&cfg, control.as_ref(), Some(out))?;
            println!("final |det| {:.6e}", tr.det_abs.last().copied().unwrap_or(f64::NAN));
            if tr.nonmarkovian_intervals.is_empty() {
                println!("markovian: no increase of |det|");
            }
            for (a, b) in &tr.nonmarkovian_intervals {
                println!("increase on [{a:.3}, {b:.3}] ns");
            }
        }
        Command::Cartan { matrix } => {
            let u = matrix_io::read_matrix(matrix)?;
            let d = kak_decompose(&u)?;
            std::fs::create_dir_all(out)?;
            let real = |m: &tlsctl_core::RMatrix| m.map(|v| tlsctl_core::C64::new(v, 0.0));
            matrix_io::write_matrix(&out.join("k1.txt"), &real(&d.k1))?;
            matrix_io::write_matrix(&out.join("a.txt"), &d.a_matrix())?;
            matrix_io::write_matrix(&out.join("k2.txt"), &real(&d.k2))?;
            println!("residual {:.3e}", d.residual);
            println!("phases {:?}", d.a_phases);
            println!("wrote {}", out.display());
        }
        Command::LieRank => {
            let cfg = load(cli)?;
            let ops = build_operators(&cfg.model()?)?;
            let rank = diagonal_reachability(&ops)?;
            println!("diagonal_rank {rank} of {}", ops.n_levels - 1);
        }
        Command::Simulate { pulse } => {
            let cfg = load(cli)?;
            let control = harness::read_pulse_csv(pulse)?;
            let r = harness::simulate(&cfg, &control)?;
            println!("gate_error {:.6e}", r.gate_error);
            println!("process_fidelity {:.9}", r.process_fidelity);
            println!("average_fidelity {:.9}", r.average_fidelity);
            println!("channel_trace_defect {:.3e}", r.channel_trace_defect);
            println!("channel_det_abs {:.6e}", r.channel_det_abs);
        }
    }
    Ok(())
}

/// 2 for invalid input, 1 for anything else.
fn exit_code(e: &anyhow::Error) -> u8 {
    match e.downcast_ref::<Error>() {
        Some(
            Error::Config { .. }
            | Error::Parse(_)
            | Error::InvalidModel(_)
            | Error::InvalidControl(_)
            | Error::NonUnitaryTarget(_)
            | Error::NonUnitary(_)
            | Error::DimensionMismatch(_),
        ) => 2,
        _ => 1,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
