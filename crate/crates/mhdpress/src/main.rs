use clap::Parser;

fn main() {
    env_logger::Builder::from_env(
        env_logger::Env::new()
            .filter_or("MHDPRESS_LOG", "warn")
            .write_style("MHDPRESS_LOG_STYLE"),
    )
    .init();
    let cli = mhdpress::cli::Cli::parse();
    std::process::exit(mhdpress::cli::run(cli));
}
