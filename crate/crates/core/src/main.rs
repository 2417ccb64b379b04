use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use scfloer::config::ExperimentConfig;
use scfloer::report::{write_artifacts, SuiteReport};
use scfloer::suite::{run, Suite};

#[derive(Parser)]
#[command(name = "scfloer", version, about = "Verification suites for weighted scale spaces and gluing of Floer trajectories")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// TOML experiment config; the built-in default is used when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory (overrides output.dir).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Random seed (overrides run.seed).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads for the linear algebra.
    #[arg(long, global = true)]
    jobs: Option<usize>,
}

#[derive(Subcommand, Clone, Copy)]
enum Command {
    ScalesCheck,
    LinopIndex,
    FloerSolve,
    GlueIdentities,
    VerifyIia,
    VerifyIib,
    IndexSweep,
    GermBuild,
    Contraction,
    PicardGlue,
    FullReport,
}

impl Command {
    fn suites(self) -> Vec<Suite> {
        let one = match self {
            Command::ScalesCheck => Suite::ScalesCheck,
            Command::LinopIndex => Suite::LinopIndex,
            Command::FloerSolve => Suite::FloerSolve,
            Command::GlueIdentities => Suite::GlueIdentities,
            Command::VerifyIia => Suite::VerifyIia,
            Command::VerifyIib => Suite::VerifyIib,
            Command::IndexSweep => Suite::IndexSweep,
            Command::GermBuild => Suite::GermBuild,
            Command::Contraction => Suite::Contraction,
            Command::PicardGlue => Suite::PicardGlue,
            Command::FullReport => return Suite::ALL.to_vec(),
        };
        vec![one]
    }
}

const CONFIG_ERROR: u8 = 2;

fn load(cli: &Cli) -> scfloer::Result<ExperimentConfig> {
    let mut cfg = match &cli.config {
        Some(p) => ExperimentConfig::load(p)?,
        None => ExperimentConfig::default(),
    };
    if let Some(s) = cli.seed {
        cfg.run.seed = s;
    }
    if let Some(o) = &cli.out {
        cfg.output.dir = o.display().to_string();
    }
    cfg.validate()?;
    cfg.grid()?;
    cfg.weights()?;
    cfg.model()?;
    cfg.profiles()?;
    Ok(cfg)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let cfg = match load(&cli) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(CONFIG_ERROR);
        }
    };
    if let Some(n) = cli.jobs {
        if n == 0 {
            eprintln!("error: --jobs: must be at least 1");
            return ExitCode::from(CONFIG_ERROR);
        }
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global().expect("thread pool is configured once");
    }
    let dir = PathBuf::from(&cfg.output.dir);
    println!("config {} -> {}", cfg.hash(), dir.display());
    let mut code = 0u8;
    for suite in cli.command.suites() {
        let rep = match run(suite, &cfg) {
            Ok(r) => r,
            Err(e) => {
                let mut r = SuiteReport::new(suite.name());
                r.check("run", false, e.to_string());
                r
            }
        };
        for l in rep.summary_lines() {
            println!("[{}] {l}", suite.name());
        }
        println!("[{}] {:.1} s", suite.name(), rep.runtime_seconds);
        if let Err(e) = write_artifacts(&dir, &cfg, &rep) {
            eprintln!("error: writing artifacts: {e}");
            return ExitCode::FAILURE;
        }
        if !rep.passed() && code == 0 {
            code = suite.exit_code() as u8;
        }
    }
    ExitCode::from(code)
}
