use clap::Parser;

fn main() {
    // clap exits with 2 on usage errors and 0 for --help/--version.
    let cli = vgbench_cli::Cli::parse();
    if let Err(e) = vgbench_cli::run(cli) {
        eprintln!("vgbench: {e}");
        std::process::exit(e.exit_code());
    }
}
