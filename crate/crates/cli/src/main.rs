use clap::Parser;

fn main() {
    let cli = mlpvo_cli::Cli::parse();
    if let Err(e) = mlpvo_cli::run(cli) {
        eprintln!("error: {e}");
        std::process::exit(e.exit_code());
    }
}
