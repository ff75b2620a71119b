use std::io::IsTerminal;
use std::path::PathBuf;
use std::process::ExitCode;
use std::sync::Arc;

use clap::Parser;
use qfaas_core::config::Config;
use qfaas_core::gateway::Gateway;
use tokio::net::TcpListener;
use tracing_subscriber::EnvFilter;

/// Quantum function-as-a-service gateway.
#[derive(Parser)]
#[command(version)]
struct Args {
    /// TOML config file. `QFAAS_*` environment variables override it.
    #[arg(long, env = "QFAAS_CONFIG")]
    config: Option<PathBuf>,
    /// Listen address, e.g. 127.0.0.1:8080.
    #[arg(long)]
    listen: Option<String>,
}

fn load(args: &Args) -> Result<Config, String> {
    let mut config = match &args.config {
        Some(path) => Config::load(path).map_err(|e| e.to_string())?,
        None => Config::default(),
    };
    config.apply_env(|k| std::env::var(k).ok()).map_err(|e| e.to_string())?;
    if let Some(listen) = &args.listen {
        config.listen = listen.clone();
    }
    Ok(config)
}

#[tokio::main]
async fn main() -> ExitCode {
    tracing_subscriber::fmt()
        .with_writer(std::io::stderr)
        .with_ansi(std::io::stderr().is_terminal())
        .with_env_filter(EnvFilter::try_from_default_env().unwrap_or_else(|_| EnvFilter::new("info")))
        .init();
    let args = Args::parse();
    let config = match load(&args) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("qfaas-server: {e}");
            return ExitCode::from(1);
        }
    };
    let supplied = config.admin_password.is_some();
    let listen = config.listen.clone();
    let (gateway, admin_password) = match tokio::task::spawn_blocking(move || Gateway::open(config)).await {
        Ok(Ok(opened)) => opened,
        Ok(Err(e)) => {
            eprintln!("qfaas-server: startup failed: {e}");
            return ExitCode::from(1);
        }
        Err(e) => {
            eprintln!("qfaas-server: startup failed: {e}");
            return ExitCode::from(1);
        }
    };
    if let (Some(pw), false) = (admin_password, supplied) {
        tracing::warn!("created user `admin` with password {pw} (shown once)");
    }
    let listener = match TcpListener::bind(&listen).await {
        Ok(l) => l,
        Err(e) => {
            eprintln!("qfaas-server: cannot listen on {listen}: {e}");
            return ExitCode::from(1);
        }
    };
    tracing::info!(addr = %listen, "listening");
    let shutdown = async {
        let _ = tokio::signal::ctrl_c().await;
        tracing::info!("shutting down");
    };
    match qfaas_server::serve(listener, Arc::new(gateway), shutdown).await {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("qfaas-server: {e}");
            ExitCode::from(1)
        }
    }
}
