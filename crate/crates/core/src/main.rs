use clap::Parser;

fn main() {
    let cli = tsfrac::cli::Cli::parse();
    let code = tsfrac::cli::run(
        &cli,
        &mut std::io::stdout().lock(),
        &mut std::io::stderr().lock(),
    );
    std::process::exit(code);
}
