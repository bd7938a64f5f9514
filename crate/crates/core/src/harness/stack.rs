use super::Rig;
use crate::flows::{Controller, ControllerDeps, FlowConfig};
use crate::protocol::{run_notifier, ControllerServer, NotifierLink, ServerConfig, ServerHandle};
use std::net::SocketAddr;
use std::sync::Arc;
use std::time::Duration;

/// A controller server on 127.0.0.1 plus an in-process notifier client
/// that forwards to the rig's recording sink.
pub struct LoopbackStack {
    pub server: ServerHandle,
    notifier: tokio::task::JoinHandle<()>,
}

impl LoopbackStack {
    pub async fn start(
        rig: &Rig,
        flow: FlowConfig,
        cfg: ServerConfig,
        seed: Option<u64>,
    ) -> std::io::Result<Self> {
        Self::start_with("127.0.0.1:0", rig, flow, cfg, seed, |_| {}).await
    }

    /// Like [`start`](Self::start) with a fixed bind address and a hook to
    /// swap controller dependencies.
    pub async fn start_with(
        addr: &str,
        rig: &Rig,
        flow: FlowConfig,
        cfg: ServerConfig,
        seed: Option<u64>,
        customize: impl FnOnce(&mut ControllerDeps),
    ) -> std::io::Result<Self> {
        let link = Arc::new(NotifierLink::new(Duration::from_secs(5)));
        let mut deps = rig.deps_with_notifier(link.clone());
        customize(&mut deps);
        let controller = Controller::new(flow, deps, seed);
        let server = ControllerServer::bind(addr, controller, link, cfg)
            .await?
            .spawn()?;
        let addr = server.local_addr();
        let sink = rig.sink.clone();
        let notifier = tokio::spawn(async move {
            if let Err(e) = run_notifier(addr, sink).await {
                tracing::warn!(error = %e, "notifier client stopped");
            }
        });
        let stack = Self { server, notifier };
        stack.wait_for(|s| s.notifier_connected()).await?;
        Ok(stack)
    }

    pub fn addr(&self) -> SocketAddr {
        self.server.local_addr()
    }

    /// Kills the notifier client, closing its connection.
    pub async fn stop_notifier(&self) -> std::io::Result<()> {
        self.notifier.abort();
        self.wait_for(|s| !s.notifier_connected()).await
    }

    /// Polls the server state until `ready` holds, for up to five seconds.
    pub async fn wait_for(&self, ready: impl Fn(&ServerHandle) -> bool) -> std::io::Result<()> {
        for _ in 0..500 {
            if ready(&self.server) {
                return Ok(());
            }
            tokio::time::sleep(Duration::from_millis(10)).await;
        }
        Err(std::io::Error::new(
            std::io::ErrorKind::TimedOut,
            "loopback stack not ready",
        ))
    }

    pub async fn shutdown(self) {
        self.notifier.abort();
        self.server.shutdown().await;
    }
}
