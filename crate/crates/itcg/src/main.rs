use std::process::ExitCode;

use clap::Parser;
use itcg::Cli;

fn main() -> ExitCode {
    let cli = Cli::parse();
    match itcg::run_cli(&cli) {
        Ok(out) => {
            for name in out.names() {
                println!("{}", cli.common.out.join(name).display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
