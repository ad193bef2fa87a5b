use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use ibs::Variant;
use ibs_cli::commands::{self, Overrides};
use ibs_cli::selftest::{self, SelftestOptions};
use ibs_cli::{CliError, CliResult, RunConfig};

#[derive(Parser)]
#[command(
    name = "ibs",
    version,
    about = "Inverse Born series simulation and reconstruction"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum VariantArg {
    Theorem,
    Proposition,
}

impl From<VariantArg> for Variant {
    fn from(v: VariantArg) -> Self {
        match v {
            VariantArg::Theorem => Variant::Theorem,
            VariantArg::Proposition => Variant::Proposition,
        }
    }
}

#[derive(clap::Args)]
struct Common {
    #[arg(long, value_name = "PATH")]
    config: PathBuf,
    /// Output directory (overrides `output_dir` in the config).
    #[arg(long, value_name = "PATH")]
    out: Option<PathBuf>,
    /// Forward order for `simulate`, inverse order otherwise.
    #[arg(long, value_name = "N", value_parser = clap::value_parser!(u64).range(1..))]
    order: Option<u64>,
    #[arg(long, value_enum)]
    variant: Option<VariantArg>,
    /// Proceed when the forward or inverse series looks divergent.
    #[arg(long)]
    override_divergence: bool,
}

impl Common {
    fn overrides(&self) -> Overrides {
        Overrides {
            order: self.order.map(|n| n as usize),
            variant: self.variant.map(Into::into),
            allow_divergence: self.override_divergence,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Evaluate the forward series for the configured contrast.
    Simulate(#[command(flatten)] Common),
    /// Run the inverse series on a data file.
    Reconstruct {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_name = "PATH")]
        data: PathBuf,
    },
    /// Print convergence constants as JSON.
    Analyze {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_name = "PATH")]
        data: Option<PathBuf>,
    },
    /// Run the built-in oracle suites.
    Selftest {
        #[arg(long, hide = true)]
        inject_sign_fault: bool,
    },
}

fn load(common: &Common) -> CliResult<RunConfig> {
    RunConfig::load(&common.config)
}

fn run(cli: Cli) -> CliResult<()> {
    match cli.command {
        Command::Simulate(common) => {
            let config = load(&common)?;
            let out = config.output_dir(common.out.as_deref());
            let written = commands::simulate(&config, &out, &common.overrides())?;
            for path in [&written.data, &written.sidecar, &written.truth] {
                println!("wrote {}", path.display());
            }
        }
        Command::Reconstruct { common, data } => {
            let config = load(&common)?;
            let out = config.output_dir(common.out.as_deref());
            let report = commands::reconstruct(&config, &data, &out, &common.overrides())?;
            println!("wrote {}", out.join("reconstruction.csv").display());
            println!("wrote {}", out.join("report.json").display());
            println!(
                "order {}: eta1_norm {:e}, r {:e}, converges {}, trend {:?}, plateau order {}",
                report.inverse_order,
                report.convergence.eta1_norm,
                report.convergence.r,
                report.convergence.converges,
                report.monitor.trend,
                report.plateau_order
            );
        }
        Command::Analyze { common, data } => {
            let config = load(&common)?;
            let report =
                commands::analyze(&config, data.as_deref().map(Path::new), &common.overrides())?;
            let text = serde_json::to_string_pretty(&report)
                .map_err(|e| CliError::Usage(e.to_string()))?;
            println!("{text}");
        }
        Command::Selftest { inject_sign_fault } => {
            let report = selftest::run(&SelftestOptions { inject_sign_fault });
            print!("{}", report.render());
            if report.failures() > 0 {
                return Err(CliError::Selftest(report.failures()));
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
