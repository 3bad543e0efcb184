//! Command-line front end for the Wei-Norman reduction library.
//!
//! Subcommands: `structure | equations | solve | verify`. Exit codes:
//! 0 success, 1 usage/config error, 2 numerical failure, 3 verification
//! failure.

mod commands;
mod config;
mod rng;

use commands::{cmd_equations, cmd_solve, cmd_structure, cmd_verify, CmdError, EXIT_USAGE};
use config::RunConfig;

const USAGE: &str = "\
usage: weinorman <structure|equations|solve|verify> [flags]

flags:
  --algebra A|B|C|D|G2    algebra family
  --rank N                rank (G2 is fixed at 2)
  --format FMT            structure: text|json; equations: text|latex|machine
  --config PATH           key = value configuration file
  --output PATH           solve: trajectory output file (csv or json)
  --mode staged|monolithic
  --reanchor              restart the chart at numerical breakdowns
  --trials K              verify: number of random round-trip solves
  --seed S                verify: random seed
  --tol X                 verify: oracle error tolerance
  --structure-only        verify: skip the numeric trials
  --t0 X / --t1 X         solve/verify time span (default [0, 1])

configuration file keys: algebra, rank, t0, t1, mode, rtol, atol, max_step,
reanchor, output, format (csv|json), stride, trials, tol, seed, and sparse
coefficients `coeff.K = <expression in t>` (missing entries are zero).
Expressions use numbers, t, + - * / ^, sin, cos, exp, parentheses.
";

fn main() {
    std::process::exit(real_main());
}

fn real_main() -> i32 {
    let args: Vec<String> = std::env::args().skip(1).collect();
    if args.is_empty() {
        eprint!("{}", USAGE);
        return EXIT_USAGE;
    }
    let command = args[0].clone();
    let mut config = RunConfig::default();
    let mut format: Option<String> = None;

    let mut i = 1;
    let next_value = |i: &mut usize, flag: &str| -> Result<String, String> {
        *i += 1;
        args.get(*i)
            .cloned()
            .ok_or_else(|| format!("flag {} expects a value", flag))
    };
    while i < args.len() {
        let flag = args[i].clone();
        let result: Result<(), String> = match flag.as_str() {
            "--algebra" => next_value(&mut i, &flag)
                .and_then(|v| config.set("algebra", &v).map_err(|e| e.0)),
            "--rank" => {
                next_value(&mut i, &flag).and_then(|v| config.set("rank", &v).map_err(|e| e.0))
            }
            "--format" => next_value(&mut i, &flag).map(|v| {
                format = Some(v);
            }),
            "--config" => next_value(&mut i, &flag).and_then(|v| {
                config.load_file(&v).map_err(|e| e.0)
            }),
            "--output" => {
                next_value(&mut i, &flag).and_then(|v| config.set("output", &v).map_err(|e| e.0))
            }
            "--mode" => {
                next_value(&mut i, &flag).and_then(|v| config.set("mode", &v).map_err(|e| e.0))
            }
            "--reanchor" => config.set("reanchor", "true").map_err(|e| e.0),
            "--trials" => {
                next_value(&mut i, &flag).and_then(|v| config.set("trials", &v).map_err(|e| e.0))
            }
            "--seed" => {
                next_value(&mut i, &flag).and_then(|v| config.set("seed", &v).map_err(|e| e.0))
            }
            "--tol" => {
                next_value(&mut i, &flag).and_then(|v| config.set("tol", &v).map_err(|e| e.0))
            }
            "--structure-only" => {
                config.structure_only = true;
                Ok(())
            }
            "--t0" => {
                next_value(&mut i, &flag).and_then(|v| config.set("t0", &v).map_err(|e| e.0))
            }
            "--t1" => {
                next_value(&mut i, &flag).and_then(|v| config.set("t1", &v).map_err(|e| e.0))
            }
            "--help" | "-h" => {
                print!("{}", USAGE);
                return 0;
            }
            other => Err(format!("unknown flag `{}`", other)),
        };
        if let Err(msg) = result {
            eprintln!("error: {}", msg);
            return EXIT_USAGE;
        }
        i += 1;
    }

    let result = (|| -> Result<String, CmdError> {
        match command.as_str() {
            "structure" => {
                let (family, rank) = config.algebra().map_err(|e| CmdError::Usage(e.0))?;
                cmd_structure(family, rank, format.as_deref().unwrap_or("text"))
            }
            "equations" => {
                let (family, rank) = config.algebra().map_err(|e| CmdError::Usage(e.0))?;
                cmd_equations(family, rank, format.as_deref().unwrap_or("text"))
            }
            "solve" => {
                if let Some(f) = format.as_deref() {
                    config.set("format", f).map_err(|e| CmdError::Usage(e.0))?;
                }
                cmd_solve(&config)
            }
            "verify" => cmd_verify(&config),
            other => Err(CmdError::Usage(format!(
                "unknown command `{}` (expected structure|equations|solve|verify)",
                other
            ))),
        }
    })();

    match result {
        Ok(text) => {
            print!("{}", text);
            0
        }
        Err(err) => {
            if matches!(err, CmdError::Verify(_)) {
                // Verification output is the report itself.
                print!("{}", err.message());
                eprintln!("error: verification failed");
            } else {
                eprintln!("error: {}", err.message());
            }
            err.exit_code()
        }
    }
}
