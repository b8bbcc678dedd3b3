use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use levypot::{builtins, run_scenario, run_suite, Overrides, Status, OUT_DIR_ENV};

#[derive(Parser)]
#[command(name = "levypot", version, about = "Run Monte Carlo potential-theory scenarios")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one scenario file or `builtin:<name>`.
    Run {
        config: String,
        #[command(flatten)]
        common: Common,
    },
    /// Run every scenario listed in a manifest.
    Suite {
        manifest: PathBuf,
        /// Scenarios run at the same time.
        #[arg(long, default_value_t = 1)]
        jobs: usize,
        #[command(flatten)]
        common: Common,
    },
    /// Print the names of the built-in scenarios.
    ListBuiltins,
}

#[derive(Args)]
struct Common {
    /// Override the budget seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Override every path count.
    #[arg(long)]
    n: Option<u64>,
    /// Override the Euler time step.
    #[arg(long)]
    dt: Option<f64>,
    /// Output directory [default: $LEVYPOT_OUT_DIR or ./levypot-out].
    #[arg(long)]
    out_dir: Option<PathBuf>,
}

impl Common {
    fn overrides(&self) -> Overrides {
        Overrides {
            seed: self.seed,
            n: self.n,
            dt: self.dt,
        }
    }

    fn out_dir(&self) -> PathBuf {
        self.out_dir
            .clone()
            .or_else(|| std::env::var_os(OUT_DIR_ENV).map(PathBuf::from))
            .unwrap_or_else(|| PathBuf::from("levypot-out"))
    }
}

fn exit(status: Status) -> ExitCode {
    ExitCode::from(status.code() as u8)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::ListBuiltins => {
            for name in builtins::names() {
                println!("{name}");
            }
            ExitCode::SUCCESS
        }
        Command::Run { config, common } => {
            let out = run_scenario(&config, &common.overrides(), &common.out_dir());
            for m in &out.messages {
                eprintln!("{m}");
            }
            if let Some(dir) = &out.report_dir {
                println!("{} {:?} {}", out.id, out.status, dir.join("report.json").display());
            }
            exit(out.status)
        }
        Command::Suite { manifest, jobs, common } => {
            let out = run_suite(&manifest, jobs, &common.overrides(), &common.out_dir());
            for m in &out.messages {
                eprintln!("{m}");
            }
            for r in &out.runs {
                println!("{} {:?}", r.id, r.status);
            }
            if let Some(s) = &out.summary {
                println!("summary {}", s.display());
            }
            exit(out.status)
        }
    }
}
