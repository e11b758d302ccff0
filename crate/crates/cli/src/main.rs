use std::process::ExitCode;

use clap::Parser;
use vppfr_cli::{run, Cli, RunConfig};

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.common.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    let config = RunConfig::from(cli);
    match run(&config) {
        Ok(manifest) => {
            log::info!("{} done in {:.2} s", manifest.subcommand, manifest.wall_clock_s);
            ExitCode::SUCCESS
        }
        Err(e) => {
            let body = serde_json::json!({ "error": e.category(), "message": e.to_string() });
            eprintln!("{body}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
