use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, CommandFactory, Parser, Subcommand};
use collide_cli::scenarios::RunOutput;
use collide_cli::{
    builtin_config, builtin_names, check_family, gallery, output, parse_config, resolve_seed, scenarios, set_n_traj,
    ConfigError, Family, RunContext, ScenarioConfig, SEED_ENV,
};

const EXIT_VALIDATION: u8 = 1;
const EXIT_RUNTIME: u8 = 2;

#[derive(Parser)]
#[command(name = "collide", version, about = "Run quantum collision-model scenarios and write CSV time series")]
struct Cli {
    /// Run every bundled scenario and report its checks
    #[arg(long)]
    self_test: bool,

    /// List bundled scenarios
    #[arg(long)]
    list: bool,

    /// Output directory (default: collide-out/<name>; with --self-test, one subdirectory per scenario)
    #[arg(long, global = true, value_name = "DIR")]
    out_dir: Option<PathBuf>,

    #[command(subcommand)]
    command: Option<Command>,
}

#[derive(Subcommand)]
enum Command {
    /// Deterministic collision maps and master equations
    Simulate(RunArgs),
    /// Measurement-conditioned trajectories and ensembles
    Trajectories(TrajectoryArgs),
    /// Energy and entropy ledgers
    Thermo(RunArgs),
    /// Collision models with memory
    Nonmarkov(RunArgs),
    /// Check configs without running them
    Validate {
        #[arg(required = true, value_name = "CONFIG")]
        configs: Vec<PathBuf>,
    },
}

#[derive(Args)]
struct RunArgs {
    /// Scenario config (TOML)
    #[arg(value_name = "CONFIG", required_unless_present = "scenario")]
    config: Option<PathBuf>,

    /// Bundled scenario to run instead of a config file
    #[arg(long, conflicts_with = "config", value_name = "NAME")]
    scenario: Option<String>,

    /// Seed (overrides COLLIDE_SEED and the config)
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
struct TrajectoryArgs {
    #[command(flatten)]
    run: RunArgs,

    /// Number of trajectories (overrides numerics.n_traj)
    #[arg(long, value_name = "N")]
    n_traj: Option<usize>,
}

enum Failure {
    Validation(String),
    Runtime(String),
}

impl Failure {
    fn report(self) -> ExitCode {
        let (msg, code) = match self {
            Failure::Validation(m) => (m, EXIT_VALIDATION),
            Failure::Runtime(m) => (m, EXIT_RUNTIME),
        };
        for line in msg.lines() {
            eprintln!("error: {line}");
        }
        ExitCode::from(code)
    }
}

fn env_seed() -> Option<String> {
    std::env::var(SEED_ENV).ok().filter(|s| !s.trim().is_empty())
}

fn load(args: &RunArgs) -> Result<(String, String), Failure> {
    match (&args.config, &args.scenario) {
        (Some(path), _) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| Failure::Validation(format!("{}: {e}", path.display())))?;
            let label = path.file_stem().map_or("run".into(), |s| s.to_string_lossy().into_owned());
            Ok((text, label))
        }
        (None, Some(name)) => builtin_config(name).map(|t| (t, name.clone())).ok_or_else(|| {
            Failure::Validation(format!("unknown scenario '{name}'; available scenarios: {}", builtin_names().join(", ")))
        }),
        (None, None) => Err(Failure::Validation("give a config file or --scenario NAME".into())),
    }
}

fn parse(text: &str, origin: &str) -> Result<ScenarioConfig, Failure> {
    parse_config(text).map_err(|e| match e {
        ConfigError::Parse { .. } => Failure::Validation(format!("{origin}: {e}")),
        ConfigError::Invalid(vs) => {
            Failure::Validation(vs.iter().map(|v| format!("{origin}: {v}")).collect::<Vec<_>>().join("\n"))
        }
    })
}

struct Completed {
    output: RunOutput,
    files: Vec<String>,
    seconds: f64,
}

fn execute(config: &ScenarioConfig, seed_flag: Option<u64>, dir: Option<&Path>) -> Result<Completed, Failure> {
    let (seed, source) = resolve_seed(seed_flag, env_seed().as_deref(), config.seed).map_err(Failure::Validation)?;
    let start = Instant::now();
    let output = (config.def.run)(config, &RunContext { seed })
        .map_err(|e| Failure::Runtime(format!("scenario '{}': {e}", config.def.name)))?;
    let seconds = start.elapsed().as_secs_f64();
    let files = match dir {
        Some(dir) => output::write_run(dir, config, &output, seed, source, seconds)
            .map_err(|e| Failure::Runtime(format!("writing {}: {e}", dir.display())))?,
        None => Vec::new(),
    };
    Ok(Completed { output, files, seconds })
}

fn print_checks(output: &RunOutput) {
    for c in &output.checks {
        println!("  {} {}: {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
    }
}

fn run_command(family: Family, args: &RunArgs, n_traj: Option<usize>, out_dir: Option<&Path>) -> Result<(), Failure> {
    let (text, label) = load(args)?;
    let origin = args.config.as_ref().map_or(label.clone(), |p| p.display().to_string());
    let mut config = parse(&text, &origin)?;
    check_family(&config, family).map_err(|v| Failure::Validation(format!("{origin}: {v}")))?;
    if let Some(n) = n_traj {
        set_n_traj(&mut config, n).map_err(|v| Failure::Validation(v.to_string()))?;
    }
    let dir = out_dir.map_or_else(|| Path::new("collide-out").join(&label), Path::to_path_buf);
    let done = execute(&config, args.seed, Some(&dir))?;
    println!("{} ({:.2} s): wrote {} to {}", config.def.name, done.seconds, done.files.join(", "), dir.display());
    // checks are reported, not enforced: they assume the bundled parameter regimes
    print_checks(&done.output);
    Ok(())
}

fn validate(paths: &[PathBuf]) -> ExitCode {
    let mut ok = true;
    for path in paths {
        let origin = path.display().to_string();
        let parsed = std::fs::read_to_string(path)
            .map_err(|e| Failure::Validation(format!("{origin}: {e}")))
            .and_then(|text| parse(&text, &origin));
        match parsed {
            Ok(cfg) => println!("ok: {origin} (scenario {}, run with `collide {}`)", cfg.def.name, cfg.def.family),
            Err(Failure::Validation(msg) | Failure::Runtime(msg)) => {
                ok = false;
                for line in msg.lines() {
                    eprintln!("error: {line}");
                }
            }
        }
    }
    if ok {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(EXIT_VALIDATION)
    }
}

fn self_test(out_dir: Option<&Path>) -> ExitCode {
    let mut failed = Vec::new();
    for entry in gallery::GALLERY {
        let dir = out_dir.map(|d| d.join(entry.name));
        let result = parse(entry.text, entry.name).and_then(|cfg| execute(&cfg, None, dir.as_deref()));
        match result {
            Ok(done) => {
                let ok = done.output.checks.iter().all(|c| c.passed);
                println!("{} {} ({:.2} s)", if ok { "PASS" } else { "FAIL" }, entry.name, done.seconds);
                print_checks(&done.output);
                if !ok {
                    failed.push(entry.name);
                }
            }
            Err(Failure::Validation(msg) | Failure::Runtime(msg)) => {
                println!("FAIL {}: {msg}", entry.name);
                failed.push(entry.name);
            }
        }
    }
    let total = gallery::GALLERY.len();
    println!("{} of {total} scenarios passed", total - failed.len());
    if failed.is_empty() {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(EXIT_RUNTIME)
    }
}

fn list() {
    println!("bundled configs:");
    for entry in gallery::GALLERY {
        let cfg = parse_config(entry.text).expect("bundled configs validate");
        println!("  {:<22} {:<13} {}", entry.name, cfg.def.family.command(), cfg.def.summary);
    }
    println!("scenarios:");
    for s in scenarios::SCENARIOS {
        let keys: Vec<&str> = s.model.iter().map(|p| p.key).collect();
        println!("  {:<22} {:<13} model: {}", s.name, s.family.command(), keys.join(", "));
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let out_dir = cli.out_dir.as_deref();
    if cli.list {
        list();
        return ExitCode::SUCCESS;
    }
    if cli.self_test {
        return self_test(out_dir);
    }
    let result = match &cli.command {
        None => {
            let _ = Cli::command().print_help();
            return ExitCode::from(EXIT_RUNTIME);
        }
        Some(Command::Validate { configs }) => return validate(configs),
        Some(Command::Simulate(args)) => run_command(Family::Simulate, args, None, out_dir),
        Some(Command::Trajectories(t)) => run_command(Family::Trajectories, &t.run, t.n_traj, out_dir),
        Some(Command::Thermo(args)) => run_command(Family::Thermo, args, None, out_dir),
        Some(Command::Nonmarkov(args)) => run_command(Family::NonMarkov, args, None, out_dir),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => f.report(),
    }
}
