use clap::error::ErrorKind;
use clap::Parser;
use periodic_bnn::cli::{run, Cli};

fn main() {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) => {
            print!("{e}");
            return;
        }
        Err(e) => {
            let msg = e.to_string();
            let first = msg.lines().next().unwrap_or("invalid arguments").trim_start_matches("error: ");
            eprintln!("error[usage]: {first}");
            std::process::exit(2);
        }
    };
    if let Err(e) = run(cli) {
        eprintln!("error[{}]: {}", e.category(), e.to_string().replace('\n', " "));
        std::process::exit(1);
    }
}
