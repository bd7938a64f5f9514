use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};
use officegate::clock::SystemClock;
use officegate::config::ControllerConfig;
use officegate::doorunit::{
    spawn_door_unit, CaptureDevice, DeviceKind, DoorUnitConfig, KioskBridge,
};
use officegate::harness::{report_render, run_scenario, ReportFormat, Scenario};
use officegate::notify::{JsonlSink, NotificationSink, WebhookSink};
use officegate::protocol::{run_notifier, ControllerServer, NotifierLink};
use officegate::{CipherKey, Directory};
use std::net::SocketAddr;
use std::path::PathBuf;
use std::process::ExitCode;
use std::sync::Arc;

#[derive(Parser)]
#[command(name = "officegate", version, about = "Office door access control")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Indoor controller server.
    Controller {
        #[command(subcommand)]
        action: ControllerCmd,
    },
    /// Outdoor door unit: devices, controller link and kiosk gateway.
    Doorunit {
        #[command(subcommand)]
        action: DoorunitCmd,
    },
    /// Notifier client relaying NOTIFY messages to a webhook or a file.
    Notifier {
        #[command(subcommand)]
        action: NotifierCmd,
    },
    /// Offline replay of scripted trials through a loopback stack.
    Scenario {
        #[command(subcommand)]
        action: ScenarioCmd,
    },
    /// Employee directory tools.
    Directory {
        #[command(subcommand)]
        action: DirectoryCmd,
    },
}

#[derive(Subcommand)]
enum ControllerCmd {
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Overrides `bind` from the config file.
        #[arg(long)]
        bind: Option<String>,
    },
}

#[derive(Subcommand)]
enum DoorunitCmd {
    Run(DoorunitArgs),
}

#[derive(Args)]
struct DoorunitArgs {
    #[arg(long)]
    controller_addr: String,
    #[arg(long, default_value_t = 8080)]
    http_port: u16,
    #[arg(long, default_value = "127.0.0.1")]
    http_host: std::net::IpAddr,
    /// Images served in name order, one per capture.
    #[arg(long)]
    camera_dir: PathBuf,
    #[arg(long)]
    audio_dir: PathBuf,
    #[arg(long, env = "OFFICEGATE_KEY_HEX", hide_env_values = true)]
    key_hex: String,
    /// Built kiosk UI to serve at `/`.
    #[arg(long)]
    static_dir: Option<PathBuf>,
}

#[derive(Subcommand)]
enum NotifierCmd {
    Run {
        #[arg(long)]
        controller_addr: String,
        #[arg(long, conflicts_with = "dump")]
        webhook_url: Option<String>,
        /// Append notifications as JSON lines. Defaults to stdout.
        #[arg(long)]
        dump: Option<PathBuf>,
    },
}

#[derive(Subcommand)]
enum ScenarioCmd {
    Run {
        file: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value = "text")]
        format: String,
    },
}

#[derive(Subcommand)]
enum DirectoryCmd {
    /// Validates a directory file and lists who was loaded.
    Load { file: PathBuf },
}

#[tokio::main]
async fn main() -> ExitCode {
    let cli = Cli::parse();
    // Replays log every simulated unlock; keep them quiet unless asked.
    let default = match cli.command {
        Command::Scenario { .. } | Command::Directory { .. } => "warn",
        _ => "info",
    };
    tracing_subscriber::fmt()
        .with_env_filter(
            tracing_subscriber::EnvFilter::try_from_default_env()
                .unwrap_or_else(|_| default.into()),
        )
        .with_writer(std::io::stderr)
        .init();
    match run(cli).await {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

async fn run(cli: Cli) -> anyhow::Result<ExitCode> {
    match cli.command {
        Command::Controller {
            action: ControllerCmd::Run { config, bind },
        } => {
            let cfg = ControllerConfig::load(&config)?;
            let link = Arc::new(NotifierLink::new(cfg.ack_timeout()));
            let controller = cfg.controller(link.clone())?;
            let addr = bind.unwrap_or_else(|| cfg.bind.clone());
            let server = ControllerServer::bind(&addr, controller, link, cfg.server())
                .await
                .with_context(|| format!("binding {addr}"))?;
            tracing::info!(addr = %server.local_addr()?, "controller listening");
            tokio::select! {
                r = server.run() => r?,
                _ = tokio::signal::ctrl_c() => {}
            }
        }
        Command::Doorunit {
            action: DoorunitCmd::Run(a),
        } => {
            let key = CipherKey::from_hex(&a.key_hex).context("--key-hex")?;
            let camera = CaptureDevice::from_dir(DeviceKind::Camera, &a.camera_dir)
                .with_context(|| format!("reading {}", a.camera_dir.display()))?;
            let mic = CaptureDevice::from_dir(DeviceKind::Microphone, &a.audio_dir)
                .with_context(|| format!("reading {}", a.audio_dir.display()))?;
            let bridge = KioskBridge::new(key, camera, mic, Arc::new(SystemClock::new()));
            let mut cfg =
                DoorUnitConfig::new(a.controller_addr, SocketAddr::new(a.http_host, a.http_port));
            cfg.static_dir = a.static_dir;
            let unit = spawn_door_unit(cfg, bridge).await?;
            tracing::info!(addr = %unit.http_addr(), "kiosk gateway listening");
            tokio::signal::ctrl_c().await?;
            unit.shutdown().await;
        }
        Command::Notifier {
            action:
                NotifierCmd::Run {
                    controller_addr,
                    webhook_url,
                    dump,
                },
        } => {
            let sink: Arc<dyn NotificationSink> = match (webhook_url, dump) {
                (Some(url), _) => Arc::new(WebhookSink::new(url)?),
                (None, Some(path)) => {
                    let file = std::fs::OpenOptions::new()
                        .create(true)
                        .append(true)
                        .open(&path)
                        .with_context(|| format!("opening {}", path.display()))?;
                    Arc::new(JsonlSink::new(file))
                }
                (None, None) => Arc::new(JsonlSink::new(std::io::stdout())),
            };
            tokio::select! {
                r = run_notifier(controller_addr.as_str(), sink) => r?,
                _ = tokio::signal::ctrl_c() => {}
            }
        }
        Command::Scenario {
            action: ScenarioCmd::Run { file, seed, format },
        } => {
            let format: ReportFormat = format.parse()?;
            let text = std::fs::read_to_string(&file)
                .with_context(|| format!("reading {}", file.display()))?;
            let scenario = Scenario::from_json(&text)?;
            let report = run_scenario(&scenario, seed).await?;
            print!("{}", report_render(&report, format));
            if report.mismatches > 0 {
                return Ok(ExitCode::FAILURE);
            }
        }
        Command::Directory {
            action: DirectoryCmd::Load { file },
        } => {
            let f = std::fs::File::open(&file)
                .with_context(|| format!("opening {}", file.display()))?;
            let dir = Directory::load(std::io::BufReader::new(f))?;
            if dir.is_empty() {
                bail!("{} holds no employees", file.display());
            }
            for e in dir.iter() {
                let handle = e.notify_handle.as_deref().unwrap_or("-");
                println!(
                    "{}\t{}\t{}\t{} image(s)",
                    e.id,
                    e.full_name,
                    handle,
                    e.image_refs.len()
                );
            }
            println!("{} employee(s)", dir.len());
        }
    }
    Ok(ExitCode::SUCCESS)
}
