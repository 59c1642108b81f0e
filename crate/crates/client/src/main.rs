use std::ffi::OsString;
use std::io::{self, IsTerminal};
use std::process::ExitCode;

use clap::{ArgAction, Parser};
use miniredis_client::cli::{self, ClientConfig, Helper, Interrupt};
use miniredis_client::OutputFormat;

static INTERRUPT: Interrupt = Interrupt::new();

/// Command-line client for miniredis and other RESP2 servers.
#[derive(Debug, Parser)]
#[command(name = "miniredis-cli", version, disable_help_flag = true)]
struct Args {
    /// Server hostname.
    #[arg(short = 'h', default_value = "localhost")]
    host: String,
    /// Server port.
    #[arg(short = 'p', default_value_t = 6379)]
    port: u16,
    /// Server as HOST:PORT; overrides -h and -p.
    #[arg(long, value_name = "HOST:PORT")]
    target: Option<String>,
    /// Print bare replies (the default when stdout is not a terminal).
    #[arg(long, conflicts_with = "no_raw")]
    raw: bool,
    /// Print decorated replies even when stdout is not a terminal.
    #[arg(long)]
    no_raw: bool,
    /// Print help.
    #[arg(long, action = ArgAction::Help)]
    help: Option<bool>,
    /// Command and arguments; with none, start an interactive prompt.
    #[arg(trailing_var_arg = true, allow_hyphen_values = true)]
    command: Vec<OsString>,
}

#[derive(Debug, Parser)]
#[command(no_binary_name = true)]
struct HelperArgs {
    #[command(subcommand)]
    helper: Helper,
}

fn split_target(target: &str) -> Option<(String, u16)> {
    let (host, port) = target.rsplit_once(':')?;
    let host = host.trim_start_matches('[').trim_end_matches(']');
    Some((host.to_string(), port.parse().ok()?))
}

fn to_bytes(arg: OsString) -> Vec<u8> {
    #[cfg(unix)]
    {
        use std::os::unix::ffi::OsStringExt;
        arg.into_vec()
    }
    #[cfg(not(unix))]
    {
        arg.to_string_lossy().into_owned().into_bytes()
    }
}

fn main() -> ExitCode {
    let args = Args::parse();
    let (host, port) = match &args.target {
        Some(t) => match split_target(t) {
            Some(hp) => hp,
            None => {
                eprintln!("miniredis-cli: --target must be HOST:PORT, got '{t}'");
                return ExitCode::from(cli::EXIT_FAILURE as u8);
            }
        },
        None => (args.host.clone(), args.port),
    };
    let format = if args.raw || (!args.no_raw && !io::stdout().is_terminal()) {
        OutputFormat::Raw
    } else {
        OutputFormat::Human
    };
    let config = ClientConfig { host, port, format };

    if let Err(e) = ctrlc::set_handler(|| {
        if !INTERRUPT.trigger() {
            std::process::exit(130);
        }
    }) {
        eprintln!("miniredis-cli: cannot install interrupt handler: {e}");
    }

    let stdout = io::stdout();
    let stderr = io::stderr();
    let code = match args.command.first().and_then(|c| c.to_str()) {
        Some(name) if Helper::NAMES.contains(&name) => {
            match HelperArgs::try_parse_from(&args.command) {
                Ok(h) => cli::run_helper(
                    &config,
                    &h.helper,
                    &mut io::stdin().lock(),
                    &mut stdout.lock(),
                    &mut stderr.lock(),
                ),
                Err(e) => {
                    let _ = e.print();
                    cli::EXIT_FAILURE
                }
            }
        }
        _ if !args.command.is_empty() => {
            let parts: Vec<Vec<u8>> = args.command.into_iter().map(to_bytes).collect();
            cli::run_once(
                &config,
                &parts,
                &mut stdout.lock(),
                &mut stderr.lock(),
                &INTERRUPT,
            )
        }
        _ => cli::repl(
            &config,
            &mut io::stdin().lock(),
            &mut stdout.lock(),
            &mut stderr.lock(),
            &INTERRUPT,
        ),
    };
    ExitCode::from(code as u8)
}
