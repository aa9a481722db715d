use clap::Parser;

use optomech_cli::{run, Cli};

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(&cli) {
        Ok(files) => {
            for f in files {
                println!("{}", f.display());
            }
        }
        Err(e) => {
            eprintln!("optomech {}: {e}", cli.command.name());
            std::process::exit(e.exit_code());
        }
    }
}
