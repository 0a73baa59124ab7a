use std::io::Write;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use provisim_client::{Client, ClientError};
use provisim_core::api::*;
use provisim_core::experiment::Files;
use tracing_subscriber::EnvFilter;

const DEFAULT_OUT: &str = "provisim-out";

/// Robust CPU provisioning experiments: run, compare, sweep and replay
/// simulated two-tier workloads under Kalman, H-infinity and MCC-KF
/// controllers.
#[derive(Parser)]
#[command(name = "provisim", version)]
struct Cli {
    /// Service to send work to. Without it an embedded server is started.
    #[arg(long, global = true, env = "PROVISIM_SERVER", value_name = "URL")]
    server: Option<String>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct ScenarioArgs {
    /// Scenario file (`key = value` lines). Omit for all defaults.
    scenario: Option<PathBuf>,

    /// Override a scenario key; repeatable, applied after the file.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,

    /// Workload seed, overriding `workload.seed`.
    #[arg(long)]
    seed: Option<u64>,

    /// Output directory [default: run.output, else provisim-out]
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Run one scenario: trace.csv, metrics.csv, timeline.svg.
    Run(ScenarioArgs),
    /// Run several controllers on the same workload and seed.
    Compare {
        #[command(flatten)]
        args: ScenarioArgs,
        /// Controllers such as hinf-siso, kalman (both topologies) or all.
        #[arg(long, value_delimiter = ',', default_value = "all")]
        controllers: Vec<String>,
    },
    /// One run per parameter value: sweep.csv, sweep.svg.
    Sweep {
        #[command(flatten)]
        args: ScenarioArgs,
        /// c, theta, sigma or T.
        #[arg(long)]
        param: String,
        /// Comma-separated values.
        #[arg(long, value_delimiter = ',', required = true, allow_hyphen_values = true)]
        values: Vec<String>,
    },
    /// Feed a recorded trace's observations through a controller.
    Replay {
        /// Trace CSV (k,component,demand,usage,observation,allocation,backlog,mrt,cr).
        trace: PathBuf,
        /// Scenario file supplying the controller.* settings.
        #[arg(long)]
        scenario: Option<PathBuf>,
        #[arg(long = "set", value_name = "KEY=VALUE")]
        set: Vec<String>,
        #[arg(long, value_name = "DIR")]
        out: Option<PathBuf>,
    },
    /// Run the HTTP service in the foreground.
    Serve {
        #[arg(long, env = "PROVISIM_BIND", default_value = "127.0.0.1:8087")]
        bind: SocketAddr,
    },
}

enum Failure {
    /// Bad arguments, scenario or input data: exit 2.
    Usage(String),
    /// Anything that went wrong while doing valid work: exit 1.
    Runtime(String),
}

impl From<ClientError> for Failure {
    fn from(e: ClientError) -> Self {
        let msg = match e.api_error() {
            Some(body) => body.to_string(),
            None => e.to_string(),
        };
        if e.is_usage() {
            Failure::Usage(msg)
        } else {
            Failure::Runtime(msg)
        }
    }
}

fn read_input(path: &Path, what: &str) -> Result<String, Failure> {
    std::fs::read_to_string(path)
        .map_err(|e| Failure::Usage(format!("cannot read {what} '{}': {e}", path.display())))
}

fn source(args: &ScenarioArgs) -> Result<ScenarioSource, Failure> {
    Ok(ScenarioSource {
        scenario: match &args.scenario {
            Some(p) => read_input(p, "scenario")?,
            None => String::new(),
        },
        overrides: args.set.clone(),
        seed: args.seed,
    })
}

/// Writes every file through a temporary in the target directory, so readers
/// never see a partial file. Refuses to replace any of `inputs`.
fn write_files(dir: &Path, files: &Files, inputs: &[&Path]) -> Result<Vec<PathBuf>, Failure> {
    std::fs::create_dir_all(dir)
        .map_err(|e| Failure::Runtime(format!("cannot create '{}': {e}", dir.display())))?;
    let protected: Vec<PathBuf> = inputs.iter().filter_map(|p| p.canonicalize().ok()).collect();
    let mut written = Vec::new();
    for (name, contents) in files {
        let target = dir.join(name);
        if target
            .canonicalize()
            .is_ok_and(|t| protected.contains(&t))
        {
            return Err(Failure::Usage(format!(
                "refusing to overwrite input file '{}'",
                target.display()
            )));
        }
        let io = |e: std::io::Error| Failure::Runtime(format!("cannot write '{}': {e}", target.display()));
        let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(io)?;
        tmp.write_all(contents.as_bytes()).map_err(io)?;
        tmp.as_file().sync_all().map_err(io)?;
        tmp.persist(&target).map_err(|e| io(e.error))?;
        written.push(target);
    }
    Ok(written)
}

fn out_dir(flag: &Option<PathBuf>, from_scenario: &Option<String>) -> PathBuf {
    flag.clone()
        .or_else(|| from_scenario.as_ref().map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from(DEFAULT_OUT))
}

fn report_written(paths: &[PathBuf]) {
    for p in paths {
        println!("wrote {}", p.display());
    }
}

async fn execute(client: &Client, command: Command) -> Result<(), Failure> {
    match command {
        Command::Run(args) => {
            let resp = client.run(&RunRequest { source: source(&args)? }).await?;
            let m = &resp.metrics;
            println!(
                "CR {}  avg VM1 {:.1}%  avg VM2 {:.1}%  AmRT {:.4} s  SLOO {:.3}  flagged {}",
                m.completed_requests,
                m.avg_vm1_cpu,
                m.avg_vm2_cpu,
                m.avg_mrt,
                m.slo_obedience,
                resp.flagged_steps
            );
            let inputs: Vec<&Path> = args.scenario.iter().map(PathBuf::as_path).collect();
            report_written(&write_files(&out_dir(&args.out, &resp.output), &resp.files, &inputs)?);
        }
        Command::Compare { args, controllers } => {
            let req = CompareRequest {
                source: source(&args)?,
                controllers,
            };
            let resp = client.compare(&req).await?;
            println!("{:<12} {:>7} {:>7} {:>7} {:>9} {:>6}", "controller", "CR", "VM1%", "VM2%", "AmRT", "SLOO");
            for r in &resp.rows {
                let m = &r.metrics;
                println!(
                    "{:<12} {:>7} {:>7.1} {:>7.1} {:>9.4} {:>6.3}",
                    r.controller, m.completed_requests, m.avg_vm1_cpu, m.avg_vm2_cpu, m.avg_mrt, m.slo_obedience
                );
            }
            let inputs: Vec<&Path> = args.scenario.iter().map(PathBuf::as_path).collect();
            report_written(&write_files(&out_dir(&args.out, &resp.output), &resp.files, &inputs)?);
        }
        Command::Sweep { args, param, values } => {
            let values = values
                .iter()
                .map(|v| v.trim())
                .filter(|v| !v.is_empty())
                .map(|v| {
                    v.parse::<f64>()
                        .map_err(|_| Failure::Usage(format!("sweep value '{v}' is not a number")))
                })
                .collect::<Result<Vec<_>, _>>()?;
            let req = SweepRequest {
                source: source(&args)?,
                parameter: param,
                values,
            };
            let resp = client.sweep(&req).await?;
            println!("{:>10} {:>9} {:>6} {:>7}", resp.parameter, "AmRT", "SLOO", "CR");
            for r in &resp.rows {
                println!(
                    "{:>10} {:>9.4} {:>6.3} {:>7}",
                    r.value, r.metrics.avg_mrt, r.metrics.slo_obedience, r.metrics.completed_requests
                );
            }
            let inputs: Vec<&Path> = args.scenario.iter().map(PathBuf::as_path).collect();
            report_written(&write_files(&out_dir(&args.out, &resp.output), &resp.files, &inputs)?);
        }
        Command::Replay {
            trace,
            scenario,
            set,
            out,
        } => {
            let req = ReplayRequest {
                trace: read_input(&trace, "trace")?,
                source: ScenarioSource {
                    scenario: match &scenario {
                        Some(p) => read_input(p, "scenario")?,
                        None => String::new(),
                    },
                    overrides: set,
                    seed: None,
                },
            };
            let resp = client.replay(&req).await?;
            let t = &resp.telemetry;
            println!(
                "{} steps, {} warm-up, {} rejected",
                t.steps, t.warmup_steps, t.feasibility_rejections
            );
            let mut inputs = vec![trace.as_path()];
            inputs.extend(scenario.as_deref());
            report_written(&write_files(&out_dir(&out, &resp.output), &resp.files, &inputs)?);
        }
        Command::Serve { .. } => unreachable!("handled before a client exists"),
    }
    Ok(())
}

async fn main_async(cli: Cli) -> Result<(), Failure> {
    if let Command::Serve { bind } = cli.command {
        let listener = tokio::net::TcpListener::bind(bind)
            .await
            .map_err(|e| Failure::Runtime(format!("cannot bind {bind}: {e}")))?;
        let addr = listener.local_addr().map_err(|e| Failure::Runtime(e.to_string()))?;
        eprintln!("listening on http://{addr}");
        let shutdown = async {
            let _ = tokio::signal::ctrl_c().await;
        };
        return provisim_service::serve_until(listener, shutdown)
            .await
            .map_err(|e| Failure::Runtime(e.to_string()));
    }
    let client = match &cli.server {
        Some(url) => Client::new(url).map_err(|e| Failure::Usage(e.to_string()))?,
        None => {
            let (addr, _handle) = provisim_service::spawn(([127, 0, 0, 1], 0).into())
                .await
                .map_err(|e| Failure::Runtime(format!("cannot start embedded server: {e}")))?;
            Client::new(&format!("http://{addr}")).map_err(|e| Failure::Runtime(e.to_string()))?
        }
    };
    execute(&client, cli.command).await
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    tracing_subscriber::fmt()
        .with_env_filter(EnvFilter::try_from_default_env().unwrap_or_else(|_| EnvFilter::new("warn")))
        .with_writer(std::io::stderr)
        .init();
    let runtime = match tokio::runtime::Runtime::new() {
        Ok(rt) => rt,
        Err(e) => {
            eprintln!("error: cannot start runtime: {e}");
            return ExitCode::from(1);
        }
    };
    match runtime.block_on(main_async(cli)) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Runtime(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
    }
}
