use std::process::ExitCode;

use actr_confluence::{Command, OutputFormat, RunConfig};
use clap::{Parser, Subcommand, ValueEnum};

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Format {
    Text,
    Json,
}

#[derive(Debug, Parser)]
#[command(
    name = "actr-confluence",
    about = "Confluence analyzer for ACT-R cognitive models",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Debug, clap::Args)]
struct CommonArgs {
    /// Model file to analyze
    file: String,
    /// Bound on search expansions (joinability / simulation)
    #[arg(long, default_value_t = 1000)]
    max_steps: usize,
    /// Fresh constants added to the grounding universe
    #[arg(long, default_value_t = 2)]
    universe_padding: usize,
    /// Report format
    #[arg(long, value_enum, default_value_t = Format::Text)]
    format: Format,
    /// Accepted for compatibility with ACT-R implementations that copy
    /// cleared chunks into declarative memory; the unified-store
    /// semantics always retains cleared chunks, so results do not change
    #[arg(long)]
    clear_to_dm: bool,
    /// Report every overlap, including duplicates up to state equivalence
    #[arg(long)]
    all_overlaps: bool,
}

#[derive(Debug, Subcommand)]
enum Cmd {
    /// Decide confluence: enumerate critical pairs, prune by the ACT-R
    /// invariant, test joinability
    Check(CommonArgs),
    /// Print the CHR translation of the model's rules
    Translate(CommonArgs),
    /// Run the reference interpreter from the initial state and print the
    /// derivation tree
    Simulate(CommonArgs),
    /// Parse and validate the model, printing a summary
    Validate(CommonArgs),
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (command, args) = match cli.command {
        Cmd::Check(a) => (Command::Check, a),
        Cmd::Translate(a) => (Command::Translate, a),
        Cmd::Simulate(a) => (Command::Simulate, a),
        Cmd::Validate(a) => (Command::Validate, a),
    };
    let config = RunConfig {
        command,
        input_path: args.file,
        max_steps: args.max_steps.max(1),
        universe_padding: args.universe_padding,
        output_format: match args.format {
            Format::Text => OutputFormat::Text,
            Format::Json => OutputFormat::Json,
        },
        clear_to_dm: args.clear_to_dm,
        show_all_overlaps: args.all_overlaps,
    };
    let (output, code) = actr_confluence::run(&config);
    print!("{output}");
    ExitCode::from(code)
}
