use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use fdnet::io::{self, ParsedConfig, RunMetadata};
use fdnet::models::ModelKind;
use fdnet::reference::{self, MusclConfig};
use fdnet::trainer;
use fdnet::{ConservationLaw, Error, Result};

#[derive(Parser)]
#[command(name = "fdnet", version, about = "Neural and classical solvers for 1D conservation laws")]
struct Cli {
    /// Override the training seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Override the output directory.
    #[arg(long, global = true)]
    out_dir: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct ConfigArgs {
    /// TOML run configuration.
    #[arg(long, conflicts_with = "preset")]
    config: Option<PathBuf>,
    /// Named configuration (wave, euler-single, euler-multi, euler-single-100).
    #[arg(long)]
    preset: Option<String>,
    /// Override any configuration key, e.g. `--set train.n_inner=200`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Method {
    Upwind,
    Muscl,
}

#[derive(Subcommand)]
enum Command {
    /// Train the network through the time loop and write the trajectory.
    Solve(ConfigArgs),
    /// Run a classical solver on the configured grid and times.
    Reference {
        #[arg(long, value_enum)]
        method: Method,
        /// CFL number of the MUSCL solver.
        #[arg(long, default_value_t = 0.4)]
        cfl: f64,
        #[command(flatten)]
        config: ConfigArgs,
    },
    /// Difference norms between two trajectory files (the second is the reference).
    Compare {
        a: PathBuf,
        b: PathBuf,
        #[arg(long, value_delimiter = ',', required = true)]
        times: Vec<f64>,
        /// Also write the report as JSON.
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Render one column of a trajectory file as SVG.
    Plot {
        input: PathBuf,
        #[arg(long)]
        component: String,
        #[arg(long)]
        output: PathBuf,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    let mut globals = Vec::new();
    if let Some(seed) = cli.seed {
        globals.push(format!("train.seed={seed}"));
    }
    if let Some(dir) = &cli.out_dir {
        globals.push(format!("output_dir={}", toml_string(&dir.to_string_lossy())));
    }
    match cli.command {
        Command::Solve(args) => solve(&load(&args, &globals)?),
        Command::Reference { method, cfl, config } => reference_run(&load(&config, &globals)?, method, cfl),
        Command::Compare { a, b, times, output } => {
            let ta = io::read_trajectory(&a)?;
            let tb = io::read_trajectory(&b)?;
            let report = io::compare_tables(&ta, &tb, &times)?;
            println!("{:>10} {:>8} {:>12} {:>12} {:>12} {:>12}", "t", "column", "L1", "L2", "Linf", "rel L1");
            for e in &report.entries {
                let rel = e.rel_l1.map_or("-".to_string(), |r| format!("{r:.4e}"));
                println!(
                    "{:>10.4} {:>8} {:>12.4e} {:>12.4e} {:>12.4e} {:>12}",
                    e.time, e.component, e.l1, e.l2, e.linf, rel
                );
            }
            if let Some(path) = output {
                let text = serde_json::to_string_pretty(&report)
                    .map_err(|e| Error::Usage(format!("cannot serialize report: {e}")))?;
                io::write_text(&path, &(text + "\n"))?;
            }
            Ok(())
        }
        Command::Plot {
            input,
            component,
            output,
        } => {
            let table = io::read_trajectory(&input)?;
            io::emit_plot(&table, &component, &output)?;
            println!("wrote {}", output.display());
            Ok(())
        }
    }
}

fn toml_string(s: &str) -> String {
    toml::Value::String(s.to_string()).to_string()
}

fn load(args: &ConfigArgs, globals: &[String]) -> Result<ParsedConfig> {
    let text = match (&args.config, &args.preset) {
        (Some(path), _) => std::fs::read_to_string(path).map_err(|e| Error::Io {
            path: path.clone(),
            source: e,
        })?,
        (None, Some(name)) => format!("preset = {}\n", toml_string(name)),
        (None, None) => return Err(Error::Usage("give --config or --preset".into())),
    };
    let mut overrides = args.overrides.clone();
    overrides.extend_from_slice(globals);
    io::parse_config_with_overrides(&text, &overrides).map_err(|e| match (&args.config, e) {
        (Some(path), Error::Config(msg)) => Error::Config(format!("{}: {msg}", path.display())),
        (_, e) => e,
    })
}

fn solve(parsed: &ParsedConfig) -> Result<()> {
    let cfg = &parsed.config;
    let grid = cfg.grid.build()?;
    let initial = cfg.model.initial_state(&grid)?;
    println!(
        "solving {} on {} points, dt = {}, {} steps of {} iterations",
        cfg.preset.as_deref().unwrap_or("custom run"),
        grid.n_points(),
        cfg.train.dt,
        cfg.train.n_steps(),
        cfg.train.n_inner
    );
    log_model(cfg);
    let mut traj = trainer::solve_with(&cfg.model, initial, &cfg.train, |p| {
        println!(
            "step {:>4}/{} t = {:.6} loss {:.3e} -> {:.3e}",
            p.step, p.n_steps, p.time, p.first_loss, p.last_loss
        );
    })?;
    if !cfg.snapshot_times.is_empty() {
        traj.retain_times(&cfg.snapshot_times);
    }
    let dir = &cfg.output_dir;
    let traj_path = dir.join("trajectory.csv");
    let loss_path = dir.join("loss_history.csv");
    ensure_dir(dir)?;
    io::write_trajectory(&traj, &traj_path)?;
    io::write_loss_history(&traj.reports, &loss_path)?;
    write_meta(parsed, "solve", vec![traj_path, loss_path], None)
}

fn reference_run(parsed: &ParsedConfig, method: Method, cfl: f64) -> Result<()> {
    let cfg = &parsed.config;
    let grid = cfg.grid.build()?;
    let initial = cfg.model.initial_state(&grid)?;
    log_model(cfg);
    let (name, traj, extra) = match method {
        Method::Upwind => {
            if cfg.model.kind != ModelKind::OneWayWave {
                return Err(Error::Usage("the upwind scheme only runs the wave model".into()));
            }
            let mut traj = reference::upwind_solve(&initial, cfg.train.dt, cfg.train.t_final, cfg.train.snapshot_stride)?;
            if !cfg.snapshot_times.is_empty() {
                traj.retain_times(&cfg.snapshot_times);
            }
            ("upwind", traj, None)
        }
        Method::Muscl => {
            let mcfg = MusclConfig {
                cfl,
                ..Default::default()
            };
            let run = reference::muscl_solve(&cfg.model, &initial, cfg.train.t_final, &cfg.snapshot_times, &mcfg)?;
            println!("MUSCL: {} steps to t = {}", run.steps, cfg.train.t_final);
            let extra = serde_json::json!({ "muscl": mcfg, "steps": run.steps, "boundary_inflow": run.boundary_inflow });
            ("muscl", run.trajectory, Some(extra))
        }
    };
    let dir = &cfg.output_dir;
    ensure_dir(dir)?;
    let path = dir.join(format!("reference_{name}.csv"));
    io::write_trajectory(&traj, &path)?;
    println!("{} snapshots of {} written", traj.snapshots.len(), cfg.model.component_names().join(","));
    write_meta(parsed, &format!("reference {name}"), vec![path], extra)
}

fn log_model(cfg: &io::RunConfig) {
    if cfg.model.kind == ModelKind::Euler1D {
        println!("Euler model with gamma = {}", fdnet::models::GAMMA);
    }
}

fn ensure_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::Io {
        path: dir.to_path_buf(),
        source: e,
    })
}

fn write_meta(parsed: &ParsedConfig, command: &str, outputs: Vec<PathBuf>, extra: Option<serde_json::Value>) -> Result<()> {
    for p in &outputs {
        println!("wrote {}", p.display());
    }
    let stem = if command == "solve" { "metadata".to_string() } else { command.replace(' ', "_") + "_metadata" };
    let path = parsed.config.output_dir.join(format!("{stem}.json"));
    let meta = RunMetadata {
        command,
        version: env!("CARGO_PKG_VERSION"),
        config: &parsed.config,
        defaulted: &parsed.defaulted,
        decisions: io::DECLARED_DECISIONS,
        outputs: outputs.iter().map(|p| p.display().to_string()).collect(),
        extra,
    };
    io::write_metadata(&meta, &path)?;
    println!("wrote {}", path.display());
    Ok(())
}
