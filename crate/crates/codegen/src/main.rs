use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use dslgen::{emit, generate, parse_spec, ParseOptions, SpecError};

/// Generate active DSL types and adjoint expression objects from an XML
/// language description.
#[derive(Parser, Debug)]
#[command(name = "dslgen", version)]
struct Cli {
    /// XML language description.
    #[arg(long)]
    spec: PathBuf,
    /// Output directory.
    #[arg(long, required_unless_present = "check")]
    out: Option<PathBuf>,
    /// Value type of structures that have no `valueType` attribute.
    #[arg(long)]
    value_type: Option<String>,
    /// Validate the description without writing files.
    #[arg(long)]
    check: bool,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let text = match std::fs::read_to_string(&cli.spec) {
        Ok(t) => t,
        Err(e) => {
            eprintln!("error: {}: {e}", cli.spec.display());
            return ExitCode::from(2);
        }
    };
    let opts = ParseOptions {
        default_value_type: cli.value_type,
    };
    let spec = match parse_spec(&text, &opts) {
        Ok(s) => s,
        Err(SpecError::Invalid(diags)) => {
            for d in diags {
                eprintln!("{}:{d}", cli.spec.display());
            }
            return ExitCode::from(1);
        }
        Err(e) => {
            eprintln!("{}: {e}", cli.spec.display());
            return ExitCode::from(1);
        }
    };
    if cli.check {
        return ExitCode::SUCCESS;
    }
    let out = cli.out.expect("clap enforces --out without --check");
    match emit(&generate(&spec), &out) {
        Ok(files) => {
            for f in files {
                println!("{}", f.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
