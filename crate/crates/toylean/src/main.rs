use std::io::{self, BufReader};
use std::path::PathBuf;
use std::process::ExitCode;

use toylean::World;

fn main() -> ExitCode {
    let mut args = std::env::args().skip(1);
    let mut world_path = std::env::var_os("TOYLEAN_WORLD").map(PathBuf::from);
    while let Some(a) = args.next() {
        match a.as_str() {
            "--world" => world_path = args.next().map(PathBuf::from),
            other => {
                eprintln!("toylean-repl: unknown argument {other}");
                return ExitCode::from(2);
            }
        }
    }
    let world = match world_path {
        Some(p) => match World::load(&p) {
            Ok(w) => w,
            Err(e) => {
                eprintln!("toylean-repl: cannot load {}: {e}", p.display());
                return ExitCode::from(2);
            }
        },
        None => World::default(),
    };
    let stdin = io::stdin();
    match toylean::serve(BufReader::new(stdin.lock()), io::stdout().lock(), world) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("toylean-repl: {e}");
            ExitCode::FAILURE
        }
    }
}
