use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use miniredis_server::{LogLevel, ServerConfig};
use tracing::error;
use tracing_subscriber::EnvFilter;

/// In-memory data-structure server speaking the Redis protocol.
#[derive(Debug, Parser)]
#[command(name = "miniredis-server", version)]
struct Args {
    /// Config file with one `directive value` pair per line.
    config: Option<PathBuf>,
    /// Address to listen on.
    #[arg(long)]
    bind: Option<String>,
    /// TCP port (1-65535).
    #[arg(long)]
    port: Option<u16>,
    /// Maximum number of connected clients.
    #[arg(long)]
    maxclients: Option<usize>,
    /// One of debug, verbose, notice, warning.
    #[arg(long, value_parser = parse_level)]
    loglevel: Option<LogLevel>,
}

fn parse_level(s: &str) -> Result<LogLevel, String> {
    LogLevel::parse(s).ok_or_else(|| format!("unknown log level '{s}'"))
}

fn build_config(args: Args) -> Result<ServerConfig, String> {
    let mut config = match &args.config {
        Some(path) => ServerConfig::from_file(path).map_err(|e| e.to_string())?,
        None => ServerConfig::default(),
    };
    if let Some(bind) = args.bind {
        config.bind = bind;
    }
    if let Some(port) = args.port {
        config.port = port;
    }
    if let Some(n) = args.maxclients {
        config.max_clients = n;
    }
    if let Some(level) = args.loglevel {
        config.log_level = level;
    }
    config.validate().map_err(|e| e.to_string())?;
    Ok(config)
}

fn main() -> ExitCode {
    let config = match build_config(Args::parse()) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("miniredis-server: {e}");
            return ExitCode::FAILURE;
        }
    };
    let filter = EnvFilter::try_from_default_env()
        .unwrap_or_else(|_| EnvFilter::new(config.log_level.as_filter()));
    tracing_subscriber::fmt().with_env_filter(filter).init();

    let runtime = match tokio::runtime::Runtime::new() {
        Ok(rt) => rt,
        Err(e) => {
            error!(%e, "could not start runtime");
            return ExitCode::FAILURE;
        }
    };
    match runtime.block_on(miniredis_server::serve(config)) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            error!(%e, "server failed");
            eprintln!("miniredis-server: {e}");
            ExitCode::FAILURE
        }
    }
}
