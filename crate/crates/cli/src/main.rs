use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::Parser;
use nudge_cli::commands::{run, Cli};
use serde_json::json;

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) => {
            print!("{e}");
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let message = e.render().to_string();
            eprintln!("{}", json!({ "error": { "kind": "usage", "message": message.trim() } }));
            return ExitCode::from(2);
        }
    };
    match run(cli) {
        Ok(Some(summary)) => {
            println!("{}", serde_json::to_string_pretty(&summary).expect("summary serializes"));
            ExitCode::SUCCESS
        }
        Ok(None) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", nudge_cli::error_json(&e));
            ExitCode::FAILURE
        }
    }
}
