//! `qfaas`: command-line client for the qfaas gateway.
//!
//! Exit codes: 0 success, 1 authentication or configuration problem,
//! 2 error reported by the server, 3 server unreachable.

mod client;
mod config;
mod output;

use std::io::BufRead;
use std::path::PathBuf;
use std::process::ExitCode;
use std::thread;
use std::time::{Duration, Instant};

use base64::engine::general_purpose::STANDARD as B64;
use base64::Engine;
use clap::{Parser, Subcommand, ValueEnum};
use client::{Api, CallError};
use config::{CliConfig, OutputMode, DEFAULT_SERVER};
use serde_json::{json, Map, Value};

#[derive(Parser)]
#[command(name = "qfaas", version, about = "Deploy and invoke quantum functions on a qfaas gateway")]
struct Cli {
    /// Gateway base URL.
    #[arg(long, global = true, env = "QFAAS_SERVER")]
    server: Option<String>,
    /// Output format.
    #[arg(long, global = true, value_enum)]
    output: Option<OutputMode>,
    /// Config file; defaults to the platform config directory.
    #[arg(long, global = true, env = "QFAAS_CONFIG")]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum BackendType {
    Qpu,
    Simulator,
}

#[derive(Subcommand)]
enum Command {
    /// Log in and store the access token.
    Login {
        username: String,
        /// Read the password from the first line of stdin.
        #[arg(long)]
        password_stdin: bool,
    },
    /// Forget the stored token.
    Logout,
    /// Create a function from a source file and follow its pipeline.
    Deploy {
        #[arg(long)]
        name: String,
        #[arg(long, default_value = "qiskit")]
        template: String,
        #[arg(long)]
        file: PathBuf,
        /// Optional requirements file stored alongside the source.
        #[arg(long)]
        requirements: Option<PathBuf>,
        #[arg(long)]
        public: bool,
    },
    /// Invoke a deployed function.
    Invoke {
        identifier: String,
        /// Input value; parsed as JSON when possible, else sent as a string.
        #[arg(long)]
        input: Option<String>,
        #[arg(long)]
        shots: Option<u64>,
        /// Run on this backend, skipping automatic selection.
        #[arg(long)]
        backend: Option<String>,
        #[arg(long)]
        provider: Option<String>,
        #[arg(long = "type", value_enum)]
        backend_type: Option<BackendType>,
        #[arg(long)]
        seed: Option<u64>,
        /// Return at once with the job id.
        #[arg(long)]
        no_wait: bool,
        /// Re-run post-processing on the counts of an earlier job.
        #[arg(long)]
        job: Option<String>,
    },
    /// Show one job.
    Job { id: String },
    /// List jobs.
    Jobs {
        #[arg(long)]
        status: Option<String>,
        #[arg(long)]
        function: Option<String>,
        #[arg(long)]
        owner: Option<String>,
        #[arg(long, default_value_t = 50)]
        limit: usize,
    },
    /// List backends.
    Backends,
    /// List functions visible to you.
    Functions,
}

struct Ctx {
    api: Api,
    mode: OutputMode,
}

enum Failure {
    Config(String),
    Call(CallError),
    Deploy(String),
}

impl From<CallError> for Failure {
    fn from(e: CallError) -> Self {
        Failure::Call(e)
    }
}

type Outcome = Result<(), Failure>;

fn emit(ctx: &Ctx, value: &Value, table: impl FnOnce() -> String) {
    match ctx.mode {
        OutputMode::Json => println!("{value}"),
        OutputMode::Table => println!("{}", table()),
    }
}

fn parse_input(raw: &str) -> Value {
    serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()))
}

fn read_b64(path: &PathBuf) -> Result<String, Failure> {
    std::fs::read(path)
        .map(|bytes| B64.encode(bytes))
        .map_err(|e| Failure::Config(format!("{}: {e}", path.display())))
}

fn deploy(ctx: &Ctx, name: &str, template: &str, file: &PathBuf, requirements: Option<&PathBuf>, public: bool) -> Outcome {
    let body = json!({
        "name": name,
        "template": template,
        "fnCode": {
            "requirements": requirements.map(read_b64).transpose()?.unwrap_or_default(),
            "handlerPy": read_b64(file)?,
            "handlerQs": "",
        },
        "public": public,
    });
    let created = ctx.api.post(&["api", "functions"], &body)?;
    let id = created["identifier"].as_str().unwrap_or(name).to_string();
    let version = created["version"].as_u64().unwrap_or(1);
    if ctx.mode == OutputMode::Table {
        println!("{id} v{version} registered");
    }

    let deadline = Instant::now() + Duration::from_secs(300);
    let mut shown = 0;
    loop {
        let deployments = ctx.api.get(&["api", "functions", &id, "deployments"], &[])?;
        let current = deployments
            .as_array()
            .and_then(|all| all.iter().find(|d| d["version"].as_u64() == Some(version)))
            .cloned()
            .unwrap_or(Value::Null);
        let stages = current["stages"].as_array().cloned().unwrap_or_default();
        let finished: Vec<&Value> = stages
            .iter()
            .take_while(|s| !matches!(s["status"].as_str(), Some("pending" | "running")))
            .collect();
        if ctx.mode == OutputMode::Table {
            for s in &finished[shown..] {
                println!("  {:<8} {:<7} {}", output::cell(&s["stage"]), output::cell(&s["status"]), output::cell(&s["log"]));
            }
        }
        shown = finished.len();
        if let Some(failed) = stages.iter().find(|s| s["status"] == "failed") {
            if ctx.mode == OutputMode::Json {
                println!("{current}");
            }
            return Err(Failure::Deploy(format!(
                "{id} FailedDeploy at {}: {}",
                output::cell(&failed["stage"]),
                output::cell(&failed["log"])
            )));
        }
        if !stages.is_empty() && stages.iter().all(|s| s["status"] == "passed") {
            let record = ctx.api.get(&["api", "functions", &id], &[])?;
            if record["status"] == "Ready" {
                emit(ctx, &record, || format!("{id} Ready"));
                return Ok(());
            }
        }
        if Instant::now() > deadline {
            return Err(Failure::Deploy(format!("{id} did not finish deploying within 300 s")));
        }
        thread::sleep(Duration::from_millis(100));
    }
}

#[allow(clippy::too_many_arguments)]
fn invoke(
    ctx: &Ctx,
    identifier: &str,
    input: Option<&str>,
    shots: Option<u64>,
    backend: Option<&str>,
    provider: Option<&str>,
    backend_type: Option<BackendType>,
    seed: Option<u64>,
    no_wait: bool,
    job: Option<&str>,
) -> Outcome {
    let mut body = Map::new();
    if let Some(raw) = input {
        body.insert("input".into(), parse_input(raw));
    }
    if let Some(s) = shots {
        body.insert("shots".into(), json!(s));
    }
    if let Some(b) = backend {
        body.insert("autoSelect".into(), json!(false));
        body.insert("backendName".into(), json!(b));
    }
    if let Some(p) = provider {
        body.insert("provider".into(), json!(p));
    }
    if let Some(t) = backend_type {
        let t = match t {
            BackendType::Qpu => "qpu",
            BackendType::Simulator => "simulator",
        };
        body.insert("backendType".into(), json!(t));
    }
    if let Some(s) = seed {
        body.insert("seed".into(), json!(s));
    }
    if no_wait {
        body.insert("waitForResult".into(), json!(false));
    }
    if let Some(j) = job {
        body.insert("postProcessOnly".into(), json!(true));
        body.insert("jobId".into(), json!(j));
    }
    let resp = ctx.api.post(&["api", "function", identifier], &Value::Object(body))?;
    emit(ctx, &resp, || {
        if no_wait {
            output::cell(&resp["details"]["jobId"])
        } else {
            serde_json::to_string_pretty(&resp).expect("response serializes")
        }
    });
    Ok(())
}

const JOB_FIELDS: &[&str] = &[
    "job_id",
    "function_identifier",
    "owner",
    "status",
    "backend_name",
    "provider",
    "shots",
    "seed",
    "submitted_at",
    "started_at",
    "finished_at",
    "waiting_ms",
    "running_ms",
    "counts",
    "result_data",
    "error",
];

fn run(cli: Cli) -> Outcome {
    let path = cli
        .config
        .clone()
        .or_else(config::default_path)
        .ok_or_else(|| Failure::Config("no config directory; pass --config".into()))?;
    let mut stored = CliConfig::load(&path).map_err(Failure::Config)?;
    let server = cli
        .server
        .clone()
        .or_else(|| stored.server.clone())
        .unwrap_or_else(|| DEFAULT_SERVER.to_string());
    let token = std::env::var("QFAAS_TOKEN").ok().or_else(|| stored.token.clone());
    let mode = cli.output.or(stored.output).unwrap_or_default();
    let ctx = Ctx {
        api: Api::new(&server, token)?,
        mode,
    };

    match cli.command {
        Command::Login { username, password_stdin } => {
            let password = if password_stdin {
                let mut line = String::new();
                std::io::stdin()
                    .lock()
                    .read_line(&mut line)
                    .map_err(|e| Failure::Config(format!("reading password: {e}")))?;
                line.trim_end_matches(['\r', '\n']).to_string()
            } else {
                rpassword::prompt_password(format!("Password for {username}: "))
                    .map_err(|e| Failure::Config(format!("reading password: {e}")))?
            };
            let token = ctx.api.login(&username, &password)?;
            stored.server = Some(server);
            stored.token = token["access_token"].as_str().map(str::to_string);
            stored.save(&path).map_err(Failure::Config)?;
            emit(&ctx, &token, || {
                format!("logged in as {username}; token expires in {} s", output::cell(&token["expires_in"]))
            });
        }
        Command::Logout => {
            stored.token = None;
            stored.save(&path).map_err(Failure::Config)?;
        }
        Command::Deploy {
            name,
            template,
            file,
            requirements,
            public,
        } => deploy(&ctx, &name, &template, &file, requirements.as_ref(), public)?,
        Command::Invoke {
            identifier,
            input,
            shots,
            backend,
            provider,
            backend_type,
            seed,
            no_wait,
            job,
        } => invoke(
            &ctx,
            &identifier,
            input.as_deref(),
            shots,
            backend.as_deref(),
            provider.as_deref(),
            backend_type,
            seed,
            no_wait,
            job.as_deref(),
        )?,
        Command::Job { id } => {
            let job = ctx.api.get(&["api", "job", &id], &[])?;
            emit(&ctx, &job, || output::record(&job, JOB_FIELDS));
        }
        Command::Jobs {
            status,
            function,
            owner,
            limit,
        } => {
            let limit = limit.to_string();
            let mut query: Vec<(&str, &str)> = vec![("limit", &limit)];
            for (k, v) in [("status", &status), ("function", &function), ("owner", &owner)] {
                if let Some(v) = v {
                    query.push((k, v));
                }
            }
            let page = ctx.api.get(&["api", "jobs"], &query)?;
            emit(&ctx, &page, || {
                let items = page["items"].as_array().cloned().unwrap_or_default();
                let fields = ["job_id", "status", "function_identifier", "backend_name", "owner", "submitted_at"];
                let headers = ["JOB", "STATUS", "FUNCTION", "BACKEND", "OWNER", "SUBMITTED"];
                format!(
                    "{}\n{} of {} jobs",
                    output::table(&headers, &output::rows(&items, &fields)),
                    items.len(),
                    output::cell(&page["total"])
                )
            });
        }
        Command::Backends => {
            let list = ctx.api.get(&["api", "backends"], &[])?;
            emit(&ctx, &list, || {
                let items = list.as_array().cloned().unwrap_or_default();
                let fields = ["name", "provider", "kind", "qubits", "queue_length", "operational"];
                let headers = ["NAME", "PROVIDER", "KIND", "QUBITS", "QUEUE", "OPERATIONAL"];
                output::table(&headers, &output::rows(&items, &fields))
            });
        }
        Command::Functions => {
            let list = ctx.api.get(&["api", "functions"], &[])?;
            emit(&ctx, &list, || {
                let items = list.as_array().cloned().unwrap_or_default();
                let fields = ["identifier", "template", "status", "version", "public", "author"];
                let headers = ["IDENTIFIER", "TEMPLATE", "STATUS", "VERSION", "PUBLIC", "AUTHOR"];
                output::table(&headers, &output::rows(&items, &fields))
            });
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Config(m)) => {
            eprintln!("qfaas: {m}");
            ExitCode::from(1)
        }
        Err(Failure::Call(e)) => {
            eprintln!("qfaas: {}", e.message());
            ExitCode::from(e.exit_code())
        }
        Err(Failure::Deploy(m)) => {
            eprintln!("qfaas: {m}");
            ExitCode::from(2)
        }
    }
}
