use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use cfsg::experiments::{Scale, load_config, load_sweep, render_config, reproduce_figure, run_sweep};
use cfsg::SystemConfig;

#[global_allocator]
static GLOBAL: mimalloc::MiMalloc = mimalloc::MiMalloc;

/// Cell-free massive MIMO over PPP-deployed APs: simulation and closed-form bounds.
#[derive(Parser)]
#[command(name = "cfsg", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a parameter sweep and write CSV, SVG and JSON results.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        sweep: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Overrides the master seed of the config file.
        #[arg(long)]
        seed: Option<u64>,
        /// Worker threads; overrides CFSG_THREADS.
        #[arg(long)]
        threads: Option<usize>,
    },
    /// Reproduce one of the standard figures (fig1, fig2, fig3, fig4, fig5a, fig5b).
    Figure {
        name: String,
        #[arg(long, default_value = "desk")]
        scale: String,
        #[arg(long)]
        out: PathBuf,
        /// Optional base config; figure-specific parameters override it.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        threads: Option<usize>,
    },
    /// Check a config file and print its fully resolved form.
    Validate {
        #[arg(long)]
        config: PathBuf,
    },
}

fn thread_count(flag: Option<usize>) -> Result<usize, String> {
    if let Some(n) = flag {
        return Ok(n);
    }
    match std::env::var("CFSG_THREADS") {
        Ok(v) => v
            .trim()
            .parse()
            .map_err(|_| format!("CFSG_THREADS must be a non-negative integer, got `{v}`")),
        Err(_) => Ok(0),
    }
}

fn run(cli: Cli) -> Result<(), String> {
    match cli.command {
        Command::Run {
            config,
            sweep,
            out,
            seed,
            threads,
        } => {
            let mut c = load_config(&config).map_err(|e| e.to_string())?;
            if let Some(s) = seed {
                c.seed = s;
            }
            let spec = load_sweep(&sweep, c.mc).map_err(|e| e.to_string())?;
            let r = run_sweep(&c, &spec, &out, "sweep", thread_count(threads)?)
                .map_err(|e| e.to_string())?;
            for f in &r.files {
                println!("wrote {}", f.display());
            }
            if r.truncated {
                eprintln!(
                    "time budget exhausted: {} of {} points evaluated",
                    r.completed_points,
                    spec.values.len()
                );
            }
            Ok(())
        }
        Command::Figure {
            name,
            scale,
            out,
            config,
            seed,
            threads,
        } => {
            let scale = Scale::parse(&scale)
                .ok_or_else(|| format!("unknown scale `{scale}`; expected desk or paper"))?;
            let mut base = match config {
                Some(p) => load_config(&p).map_err(|e| e.to_string())?,
                None => SystemConfig::default(),
            };
            if let Some(s) = seed {
                base.seed = s;
            }
            let fig = reproduce_figure(&name, scale, &base, &out, thread_count(threads)?)
                .map_err(|e| e.to_string())?;
            for (_, r) in &fig.series {
                for f in &r.files {
                    println!("wrote {}", f.display());
                }
            }
            println!("wrote {}", fig.svg.display());
            Ok(())
        }
        Command::Validate { config } => {
            let c = load_config(&config).map_err(|e| e.to_string())?;
            print!("{}", render_config(&c));
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
