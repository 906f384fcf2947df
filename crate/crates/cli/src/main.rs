mod args;
mod commands;
mod error;
mod io;

use args::{merge, Cli, Command};
use clap::error::ErrorKind;
use clap::Parser;
use error::{usage, CliError, Result};
use std::process::ExitCode;

fn load_config(path: &std::path::Path) -> Result<serde_json::Value> {
    let text = std::fs::read_to_string(path).map_err(|e| usage(format!("config {}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| usage(format!("config {}: {e}", path.display())))
}

fn run(cli: Cli) -> Result<()> {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(usage("--threads must be at least 1"));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| usage(format!("thread pool: {e}")))?;
    }
    let config = cli.config.as_deref().map(load_config).transpose()?;
    let cfg = config.as_ref();
    let name = cli.command.name();
    match cli.command {
        Command::Datagen(a) => commands::datagen(merge(&a, cfg, name)?),
        Command::Project(a) => commands::project_cmd(merge(&a, cfg, name)?),
        Command::Deform(a) => commands::deform(merge(&a, cfg, name)?),
        Command::Fit(a) => commands::fit(merge(&a, cfg, name)?),
        Command::Train(a) => commands::train_cmd(merge(&a, cfg, name)?),
        Command::Infer(a) => commands::infer(merge(&a, cfg, name)?),
        Command::Eval(a) => commands::eval(merge(&a, cfg, name)?),
        Command::Validate(a) => commands::validate(merge(&a, cfg, name)?),
        Command::Templates(a) => commands::templates_cmd(merge(&a, cfg, name)?),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let result = match Cli::try_parse() {
        Ok(cli) => run(cli),
        Err(e) if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) if e.kind() == ErrorKind::DisplayHelpOnMissingArgumentOrSubcommand => {
            Err(usage("a subcommand is required (see --help)"))
        }
        Err(e) => {
            let rendered = e.render().to_string();
            let first = rendered.lines().find(|l| !l.trim().is_empty()).unwrap_or("invalid arguments");
            Err(CliError::Usage(first.trim_start_matches("error: ").to_string()))
        }
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", e.to_line());
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
