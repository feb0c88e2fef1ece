use std::path::PathBuf;
use std::process::ExitCode;

use chorin_cli::commands::{self, SingleRun};
use chorin_cli::config::{self, RunConfig};
use chorin_cli::runner::THREADS_ENV;
use chorin_cli::CliError;
use chorin_core::scheme::Variant;
use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Parser)]
#[command(name = "chorin", version, about = "Monte Carlo convergence studies for Chorin projection schemes")]
struct Cli {
    /// More log output (-v info, -vv debug)
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct ConfigArgs {
    /// Named study definition (fig5_1, fig5_3, fig5_4, fig5_5, fig5_6, fig5_7)
    #[arg(long)]
    preset: Option<String>,
    /// TOML configuration file, applied on top of the preset
    #[arg(long)]
    config: Option<PathBuf>,
    /// `section.key=value` overrides, applied last
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    #[arg(long)]
    output_dir: Option<PathBuf>,
    /// Worker threads (0 = all cores)
    #[arg(long, env = THREADS_ENV, default_value_t = 0)]
    threads: usize,
}

impl ConfigArgs {
    fn load(&self, default_preset: Option<&str>) -> Result<RunConfig, CliError> {
        let preset = self
            .preset
            .as_deref()
            .or(if self.config.is_none() { default_preset } else { None });
        let mut cfg = config::load(preset, self.config.as_deref(), &self.overrides)?;
        if let Some(dir) = &self.output_dir {
            cfg.output.dir = dir.display().to_string();
        }
        Ok(cfg)
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum VariantArg {
    Standard,
    Modified,
}

impl From<VariantArg> for Variant {
    fn from(v: VariantArg) -> Self {
        match v {
            VariantArg::Standard => Variant::Standard,
            VariantArg::Modified => Variant::Modified,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Run a Monte Carlo convergence study and write CSV, JSON and gnuplot output
    RunStudy {
        #[command(flatten)]
        cfg: ConfigArgs,
        /// Shrinks realizations and refinement levels, in (0, 1]
        #[arg(long, default_value_t = 1.0)]
        scale: f64,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Run one trajectory and write its per-step norms
    SingleRun {
        #[command(flatten)]
        cfg: ConfigArgs,
        #[arg(long, value_enum, default_value = "standard")]
        variant: VariantArg,
        /// Cells per side (h = 1/N)
        #[arg(long = "N", default_value_t = 16)]
        n: usize,
        /// Time step; must divide the final time
        #[arg(long, default_value_t = 0.0625)]
        k: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Also write every step's nodal fields to fields.csv
        #[arg(long)]
        dump_fields: bool,
    },
    /// Run the invariant suite; exits with status 3 if any check fails
    Validate {
        #[command(flatten)]
        cfg: ConfigArgs,
    },
    /// Regenerate the gnuplot script of a finished study
    PlotEmit {
        /// Study output directory containing summary.json
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        output: Option<PathBuf>,
    },
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::RunStudy { cfg, scale, seed } => {
            if cfg.preset.is_none() && cfg.config.is_none() {
                return Err(CliError::config("run-study needs --preset or --config"));
            }
            let mut config = cfg.load(None)?.scaled(scale)?;
            if let Some(seed) = seed {
                config.study.master_seed = seed;
            }
            for p in commands::run_study(&config, cfg.threads)? {
                println!("{}", p.display());
            }
        }
        Command::SingleRun {
            cfg,
            variant,
            n,
            k,
            seed,
            dump_fields,
        } => {
            let config = cfg.load(Some("fig5_1"))?;
            let run = SingleRun {
                variant: variant.into(),
                n_cells: n,
                k,
                seed,
                dump_fields,
            };
            for p in commands::single_run(&config, &run)? {
                println!("{}", p.display());
            }
        }
        Command::Validate { cfg } => {
            commands::validate(&cfg.load(Some("fig5_1"))?)?;
        }
        Command::PlotEmit { input, output } => {
            println!("{}", commands::plot_emit(&input, output.as_deref())?.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let _ = e.print();
            eprintln!("error[E_CONFIG]: invalid command line");
            return ExitCode::from(1);
        }
    };
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error[{}]: {e}", e.code());
            e.exit_code()
        }
    }
}
