use clap::Parser;

fn main() {
    let cli = quadinv_cli::Cli::parse();
    let code = quadinv_cli::run(
        cli,
        &mut std::io::stdout().lock(),
        &mut std::io::stderr().lock(),
    );
    std::process::exit(code);
}
