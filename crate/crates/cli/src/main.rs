use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use wgbound::asymptotics::Regime;
use wgbound_cli::config::Emit;
use wgbound_cli::emit::Table;
use wgbound_cli::run::{self, Experiment};
use wgbound_cli::verify::verify;
use wgbound_cli::{CliError, ExperimentConfig, Result};

/// Threshold eigenvalues of thin perturbations in straight waveguides.
#[derive(Debug, Parser)]
#[command(name = "wgbound", version)]
struct Cli {
    /// Experiment file (TOML).
    #[arg(short, long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Override a config entry, e.g. `scaling.alpha=0.5`. Repeatable.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    set: Vec<String>,
    /// Comma-separated h values, replacing `scaling.h` and `scaling.h_range`.
    #[arg(long, global = true, value_delimiter = ',', value_name = "LIST")]
    h: Option<Vec<f64>>,
    #[arg(long, global = true, allow_hyphen_values = true)]
    alpha: Option<f64>,
    #[arg(long, global = true, value_enum)]
    emit: Option<Emit>,
    /// Output directory; stdout when absent.
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Transverse eigenpairs of the cross-section.
    Modes {
        #[arg(long, default_value_t = 10)]
        count: usize,
    },
    /// Potential moments and the sign conditions they imply.
    Moments,
    /// Asymptotic predictions per h.
    Predict,
    /// Threshold-equation solutions per h.
    Solve,
    /// Independent direct eigenvalue computation per h.
    Oracle {
        /// CSV file for the ground-mode profile; `{h}` is replaced by the h value.
        #[arg(long, value_name = "PATH")]
        profile: Option<String>,
    },
    /// Prediction, solve and optional oracle per h.
    Sweep,
    /// Built-in fixture checks for one regime.
    Verify {
        #[arg(value_enum)]
        regime: RegimeArg,
    },
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum RegimeArg {
    Main,
    DeBaseline,
    CriticalAlphaNeg,
    StripCritical,
}

impl From<RegimeArg> for Regime {
    fn from(r: RegimeArg) -> Self {
        match r {
            RegimeArg::Main => Regime::Main,
            RegimeArg::DeBaseline => Regime::DeBaseline,
            RegimeArg::CriticalAlphaNeg => Regime::CriticalAlphaNeg,
            RegimeArg::StripCritical => Regime::StripCritical,
        }
    }
}

fn load(cli: &Cli) -> Result<ExperimentConfig> {
    let path = cli
        .config
        .as_ref()
        .ok_or_else(|| CliError::Usage("this command needs --config PATH".into()))?;
    let mut overrides = cli.set.clone();
    if let Some(h) = &cli.h {
        let list: Vec<String> = h.iter().map(|x| format!("{x:?}")).collect();
        overrides.push("scaling.h_range=".into());
        overrides.push(format!("scaling.h=[{}]", list.join(", ")));
    }
    if let Some(a) = cli.alpha {
        overrides.push(format!("scaling.alpha={a:?}"));
    }
    ExperimentConfig::load(path, &overrides)
}

fn emit(cli: &Cli, cfg: &ExperimentConfig, table: &Table) -> Result<()> {
    let how = cli.emit.unwrap_or(cfg.output.emit);
    let dir = cli.out.clone().or_else(|| cfg.output.dir.as_ref().map(PathBuf::from));
    table.emit(how, dir.as_deref(), &cfg.output.stem)
}

fn run(cli: &Cli) -> Result<()> {
    if let Command::Verify { regime } = cli.command {
        let lines = verify(regime.into())?;
        let failed = lines.iter().filter(|l| !l.pass).count();
        for l in &lines {
            println!("{}", l.line());
        }
        if failed > 0 {
            return Err(CliError::Check(format!("{failed} of {} checks failed", lines.len())));
        }
        return Ok(());
    }
    let cfg = load(cli)?;
    let exp = Experiment::from_config(&cfg)?;
    let table = match &cli.command {
        Command::Modes { count } => run::modes_table(&exp.cs, *count),
        Command::Moments => run::moments_table(&exp)?,
        Command::Predict => run::predict_table(&exp)?,
        Command::Solve => run::solve_table(&exp)?,
        Command::Oracle { profile } => {
            let profile = profile.as_deref().or(cfg.oracle.profile.as_deref());
            run::oracle_table(&exp, profile)?
        }
        Command::Sweep => run::sweep_table(&exp.sweep()),
        Command::Verify { .. } => unreachable!("handled above"),
    };
    emit(cli, &cfg, &table)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let msg = e.to_string();
            let first = msg.lines().next().unwrap_or("").trim_start_matches("error:").trim();
            eprintln!("{}", CliError::Usage(first.to_string()).report_line());
            return ExitCode::from(2);
        }
    };
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", e.report_line());
            ExitCode::from(e.exit_code())
        }
    }
}
