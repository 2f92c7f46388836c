use clap::{Parser, Subcommand};
use std::process::ExitCode;

mod commands;

use commands::{BenchArgs, FeaturesArgs, GenerateArgs, GraphArgs};

#[derive(Parser)]
#[command(
    name = "geomgraph",
    about = "Point-cloud geometric descriptors and constrained neighborhood graphs",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic cloud and write it to disk
    Generate(GenerateArgs),
    /// Compute 9D geometric descriptors and export them as CSV
    Features(FeaturesArgs),
    /// Build a neighborhood graph and export edge list + stats
    Graph(GraphArgs),
    /// Run the paired knn/constrained coverage benchmark grid
    Bench(BenchArgs),
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Generate(args) => commands::generate(args),
        Command::Features(args) => commands::features(args),
        Command::Graph(args) => commands::graph(args),
        Command::Bench(args) => commands::bench(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(msg) => {
            eprintln!("error: {msg}");
            ExitCode::FAILURE
        }
    }
}
