use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use menuconnect::{run, Command, ConnectMode, Invocation};

#[derive(Parser, Debug)]
#[command(
    name = "menuconnect",
    version,
    about = "Train, connect and audit auction menus"
)]
struct Args {
    #[arg(value_enum)]
    command: Command,

    /// JSON run file
    #[arg(long)]
    config: PathBuf,

    /// Overrides the seed in the run file
    #[arg(long)]
    seed: Option<u64>,

    /// Output directory (default: `out` from the run file, else ./out)
    #[arg(long)]
    out: Option<PathBuf>,

    /// Connection mode for `connect`
    #[arg(long, value_enum)]
    mode: Option<ConnectMode>,
}

fn threads() -> Result<(), String> {
    let Ok(v) = std::env::var("MENUCONNECT_THREADS") else {
        return Ok(());
    };
    let n: usize = v
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| format!("MENUCONNECT_THREADS must be a positive integer, got {v:?}"))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| e.to_string())
}

fn main() -> ExitCode {
    // clap's own usage errors would exit with 2, which is reserved for a
    // failed audit
    let args = match Args::try_parse() {
        Ok(a) => a,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(1);
        }
    };
    if let Err(e) = threads() {
        eprintln!("error: {e}");
        return ExitCode::from(1);
    }
    let inv = Invocation {
        command: args.command,
        config: args.config,
        seed: args.seed,
        out: args.out,
        mode: args.mode,
    };
    match run(&inv) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
