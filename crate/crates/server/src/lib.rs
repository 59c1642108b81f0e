//! TCP front end for the miniredis engine.
//!
//! Each connection gets a reader task that frames requests and a writer task
//! that drains its output queue. A single executor task owns the keyspace and
//! the pub/sub broker, so commands from all clients are applied one at a time.

pub mod config;
mod executor;
mod session;

use std::future::Future;
use std::io;
use std::net::SocketAddr;
use std::sync::Arc;
use std::thread;

use miniredis_core::SessionId;
use thiserror::Error;
use tokio::io::AsyncWriteExt;
use tokio::net::TcpListener;
use tokio::sync::{mpsc, oneshot, watch, Semaphore};
use tokio::task::JoinSet;
use tracing::{info, warn};

pub use config::{ConfigError, LogLevel, ServerConfig};

const JOB_QUEUE: usize = 4096;

#[derive(Debug, Error)]
pub enum ServerError {
    #[error("could not listen on {addr}: {source}")]
    Bind { addr: String, source: io::Error },
    #[error(transparent)]
    Io(#[from] io::Error),
}

/// A bound listener, ready to serve.
pub struct Server {
    listener: TcpListener,
    config: ServerConfig,
}

impl Server {
    /// Binds the configured address. Port 0 picks a free port.
    pub async fn bind(config: ServerConfig) -> Result<Self, ServerError> {
        let addr = config.address();
        let listener = TcpListener::bind(&addr)
            .await
            .map_err(|source| ServerError::Bind { addr, source })?;
        Ok(Self { listener, config })
    }

    pub fn local_addr(&self) -> io::Result<SocketAddr> {
        self.listener.local_addr()
    }

    /// Accepts clients until `shutdown` resolves, then stops accepting, lets
    /// in-flight replies flush and returns once every session has ended.
    pub async fn run_until(self, shutdown: impl Future<Output = ()>) -> io::Result<()> {
        let Server { listener, config } = self;
        info!(addr = %listener.local_addr()?, "ready to accept connections");
        let (jobs_tx, jobs_rx) = mpsc::channel(JOB_QUEUE);
        let executor = tokio::spawn(executor::run(jobs_rx, config.output_queue_cap));
        let (stop_tx, stop_rx) = watch::channel(false);
        let slots = Arc::new(Semaphore::new(config.max_clients));
        let mut sessions = JoinSet::new();
        let mut next_id = 0u64;
        tokio::pin!(shutdown);
        loop {
            let (mut stream, _) = tokio::select! {
                accepted = listener.accept() => match accepted {
                    Ok(pair) => pair,
                    Err(e) => {
                        warn!(%e, "accept failed");
                        continue;
                    }
                },
                _ = &mut shutdown => break,
            };
            while sessions.try_join_next().is_some() {}
            let Ok(permit) = slots.clone().try_acquire_owned() else {
                warn!("max number of clients reached; refusing connection");
                tokio::spawn(async move {
                    let _ = stream
                        .write_all(b"-ERR max number of clients reached\r\n")
                        .await;
                    let _ = stream.shutdown().await;
                });
                continue;
            };
            next_id += 1;
            let id = SessionId(next_id);
            let jobs = jobs_tx.clone();
            let stop = stop_rx.clone();
            let limits = config.decode_limits;
            sessions.spawn(async move {
                session::run(stream, id, jobs, limits, stop).await;
                drop(permit);
            });
        }
        info!("shutting down");
        drop(listener);
        stop_tx.send_replace(true);
        drop(jobs_tx);
        while sessions.join_next().await.is_some() {}
        let _ = executor.await;
        Ok(())
    }
}

/// Binds and serves until Ctrl-C.
pub async fn serve(config: ServerConfig) -> Result<(), ServerError> {
    let server = Server::bind(config).await?;
    server
        .run_until(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await?;
    Ok(())
}

/// A server running on its own thread and runtime. Stops when dropped.
pub struct BackgroundServer {
    addr: SocketAddr,
    stop: Option<oneshot::Sender<()>>,
    thread: Option<thread::JoinHandle<io::Result<()>>>,
}

impl BackgroundServer {
    pub fn start(config: ServerConfig) -> Result<Self, ServerError> {
        let runtime = tokio::runtime::Builder::new_multi_thread()
            .worker_threads(2)
            .enable_all()
            .build()?;
        let server = runtime.block_on(Server::bind(config))?;
        let addr = server.local_addr()?;
        let (stop, stopped) = oneshot::channel::<()>();
        let thread = thread::Builder::new()
            .name("miniredis-server".into())
            .spawn(move || {
                runtime.block_on(server.run_until(async {
                    let _ = stopped.await;
                }))
            })?;
        Ok(Self {
            addr,
            stop: Some(stop),
            thread: Some(thread),
        })
    }

    /// Binds 127.0.0.1 on a free port with default settings.
    pub fn start_local() -> Result<Self, ServerError> {
        Self::start(ServerConfig {
            port: 0,
            ..ServerConfig::default()
        })
    }

    pub fn addr(&self) -> SocketAddr {
        self.addr
    }

    /// Stops accepting, waits for sessions to finish and joins the thread.
    pub fn shutdown(mut self) -> io::Result<()> {
        self.stop_and_join()
    }

    fn stop_and_join(&mut self) -> io::Result<()> {
        if let Some(stop) = self.stop.take() {
            let _ = stop.send(());
        }
        match self.thread.take() {
            Some(t) => t
                .join()
                .unwrap_or_else(|_| Err(io::Error::other("server thread panicked"))),
            None => Ok(()),
        }
    }
}

impl Drop for BackgroundServer {
    fn drop(&mut self) {
        let _ = self.stop_and_join();
    }
}
