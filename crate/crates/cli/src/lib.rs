//! The `lowmult` command line: argument parsing, dispatch to the core
//! library, output formatting and the result store.
//!
//! Exit codes: 0 on success, 1 for usage and input errors, 2 when a checked
//! invariant fails.

pub mod args;
pub mod commands;
pub mod output;
pub mod store;

use std::ffi::OsString;
use std::io::Write;
use std::time::Instant;

use clap::Parser;
use serde_json::{json, Value};

use args::{Cli, Command, StoreCommand};
use commands::Context;
use store::ResultRecord;

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_INVARIANT: i32 = 2;

pub fn run<I, T>(argv: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let text = e.render().to_string();
            let _ = if e.use_stderr() { write!(err, "{text}") } else { write!(out, "{text}") };
            return code;
        }
    };
    match execute(&cli, out, err) {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            if e.is_invariant_violation() {
                EXIT_INVARIANT
            } else {
                EXIT_USAGE
            }
        }
    }
}

/// The configuration that identifies a run in the store.
pub fn config_value(cli: &Cli) -> Value {
    json!({
        "command": cli.command,
        "seed": cli.global.seed,
        "precision_bits": cli.global.precision_bits,
    })
}

fn execute(cli: &Cli, out: &mut dyn Write, err: &mut dyn Write) -> lowmult_core::Result<i32> {
    let ctx = Context {
        seed: cli.global.seed,
        precision_bits: cli.global.precision_bits,
    };
    match &cli.command {
        Command::Store(StoreCommand::Append { args }) => {
            let path = cli.global.store.as_ref().ok_or_else(|| {
                lowmult_core::Error::InvalidParameter("no store: pass --store or set LOWMULT_STORE".into())
            })?;
            let mut argv: Vec<String> = vec![
                "lowmult".into(),
                "--seed".into(),
                cli.global.seed.to_string(),
            ];
            if let Some(b) = cli.global.precision_bits {
                argv.extend(["--precision-bits".into(), b.to_string()]);
            }
            argv.extend(args.iter().cloned());
            let inner = match Cli::try_parse_from(&argv) {
                Ok(c) => c,
                Err(e) => {
                    write!(err, "{}", e.render())?;
                    return Ok(EXIT_USAGE);
                }
            };
            if matches!(inner.command, Command::Store(_)) {
                writeln!(err, "error: store commands cannot be nested")?;
                return Ok(EXIT_USAGE);
            }
            let started = Instant::now();
            let outcome = commands::dispatch(&inner.command, &ctx_of(&inner))?;
            log::info!("finished in {:.3}s", started.elapsed().as_secs_f64());
            let record = ResultRecord::new(config_value(&inner), outcome.value.clone());
            store::append(path, &record)?;
            serde_json::to_writer_pretty(&mut *out, &record).map_err(std::io::Error::other)?;
            writeln!(out)?;
            Ok(finish(&outcome, err)?)
        }
        Command::Store(StoreCommand::Query { fingerprint }) => {
            let path = cli.global.store.as_ref().ok_or_else(|| {
                lowmult_core::Error::InvalidParameter("no store: pass --store or set LOWMULT_STORE".into())
            })?;
            for rec in store::query(path, fingerprint.as_deref())? {
                serde_json::to_writer(&mut *out, &rec).map_err(std::io::Error::other)?;
                writeln!(out)?;
            }
            Ok(EXIT_OK)
        }
        command => {
            let started = Instant::now();
            let outcome = commands::dispatch(command, &ctx)?;
            output::emit(out, &outcome, cli.global.format)?;
            writeln!(err, "elapsed: {:.3}s", started.elapsed().as_secs_f64())?;
            Ok(finish(&outcome, err)?)
        }
    }
}

fn ctx_of(cli: &Cli) -> Context {
    Context {
        seed: cli.global.seed,
        precision_bits: cli.global.precision_bits,
    }
}

fn finish(outcome: &output::Outcome, err: &mut dyn Write) -> std::io::Result<i32> {
    match &outcome.violation {
        Some(what) => {
            writeln!(err, "invariant violated: {what}")?;
            Ok(EXIT_INVARIANT)
        }
        None => Ok(EXIT_OK),
    }
}
