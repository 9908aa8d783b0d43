use clap::{Parser, Subcommand};

use bellwire_cli::commands::{self, BoundsArgs, ScanArgs, SimulateArgs, TomoArgs, WireArgs};
use bellwire_cli::report::CliResult;

#[derive(Parser)]
#[command(name = "bellwire", version, about = "Bell functionals, wired monogamy relations and the swap protocol")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Classical, no-signaling and seesaw bounds of a functional.
    Bounds(BoundsArgs),
    /// Wire a base functional across n parties.
    Wire(WireArgs),
    /// Exact and sampled correlators of the swap protocol.
    Simulate(SimulateArgs),
    /// Bell value along a sin 2θ grid and its threshold.
    Scan(ScanArgs),
    /// Synthetic tomography and visibility fringes.
    Tomo(TomoArgs),
}

fn run(cli: &Cli) -> CliResult<()> {
    match &cli.command {
        Command::Bounds(a) => commands::bounds(a)?.emit(&a.output),
        Command::Wire(a) => commands::wire(a)?.emit(&a.output),
        Command::Simulate(a) => commands::simulate(a)?.emit(&a.output),
        Command::Scan(a) => commands::scan(a)?.emit(&a.output),
        Command::Tomo(a) => commands::tomo(a)?.emit(&a.output),
    }
}

fn main() {
    let cli = Cli::parse();
    if let Err(e) = run(&cli) {
        eprintln!("error: {e}");
        std::process::exit(e.code);
    }
}
