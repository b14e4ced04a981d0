use clap::Parser;

fn main() -> anyhow::Result<()> {
    occsim::cli::run(occsim::cli::Cli::parse())
}
