//! Per-connection reader and writer tasks.

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;

use miniredis_core::request::{Request, RequestDecoder};
use miniredis_core::{DecodeLimits, SessionId, Value};
use tokio::io::{AsyncReadExt, AsyncWriteExt};
use tokio::net::tcp::{OwnedReadHalf, OwnedWriteHalf};
use tokio::net::TcpStream;
use tokio::sync::{mpsc, watch};
use tracing::{debug, warn};

use crate::executor::{Job, Outbound, Outbox};

const READ_CHUNK: usize = 16 * 1024;
/// Upper bound on bytes coalesced into one socket write.
const WRITE_BATCH: usize = 64 * 1024;

pub(crate) async fn run(
    stream: TcpStream,
    id: SessionId,
    jobs: mpsc::Sender<Job>,
    limits: DecodeLimits,
    shutdown: watch::Receiver<bool>,
) {
    let peer = stream.peer_addr().ok();
    debug!(session = id.0, ?peer, "client connected");
    let _ = stream.set_nodelay(true);
    let (rd, wr) = stream.into_split();
    let (tx, rx) = mpsc::unbounded_channel();
    let queued = Arc::new(AtomicUsize::new(0));
    let kill = Arc::new(watch::channel(false).0);
    let outbox = Outbox {
        tx,
        queued: queued.clone(),
        kill: kill.clone(),
    };
    if jobs.send(Job::Connect { id, outbox }).await.is_err() {
        return;
    }
    let writer = tokio::spawn(write_loop(wr, rx, queued, kill.clone()));
    read_loop(rd, id, &jobs, limits, kill.subscribe(), shutdown).await;
    let _ = jobs.send(Job::Disconnect { id }).await;
    drop(jobs);
    let _ = writer.await;
    debug!(session = id.0, ?peer, "client disconnected");
}

async fn read_loop(
    mut rd: OwnedReadHalf,
    id: SessionId,
    jobs: &mpsc::Sender<Job>,
    limits: DecodeLimits,
    mut kill: watch::Receiver<bool>,
    mut shutdown: watch::Receiver<bool>,
) {
    let mut decoder = RequestDecoder::new(limits);
    let mut buf = vec![0u8; READ_CHUNK];
    loop {
        let n = tokio::select! {
            r = rd.read(&mut buf) => match r {
                Ok(0) | Err(_) => return,
                Ok(n) => n,
            },
            _ = kill.wait_for(|k| *k) => return,
            _ = shutdown.wait_for(|s| *s) => return,
        };
        decoder.extend(&buf[..n]);
        loop {
            let job = match decoder.next_request() {
                Ok(None) => break,
                Ok(Some(Request::Command(parts))) => Job::Command { id, parts },
                Ok(Some(Request::Rejected(msg))) => Job::Reply {
                    id,
                    value: Value::Error(msg),
                    close: false,
                },
                Err(e) => {
                    warn!(session = id.0, %e, "protocol error; closing connection");
                    let value = Value::Error(format!("ERR Protocol error: {}", e.kind));
                    let _ = jobs
                        .send(Job::Reply {
                            id,
                            value,
                            close: true,
                        })
                        .await;
                    return;
                }
            };
            if jobs.send(job).await.is_err() {
                return;
            }
        }
    }
}

async fn write_loop(
    mut wr: OwnedWriteHalf,
    mut rx: mpsc::UnboundedReceiver<Outbound>,
    queued: Arc<AtomicUsize>,
    kill: Arc<watch::Sender<bool>>,
) {
    let mut killed = kill.subscribe();
    let mut batch = Vec::with_capacity(WRITE_BATCH);
    loop {
        let first = tokio::select! {
            item = rx.recv() => item,
            _ = killed.wait_for(|k| *k) => return,
        };
        let Some(mut item) = first else { break };
        let mut closing = false;
        loop {
            match item {
                Outbound::Frame(frame) => {
                    batch.extend_from_slice(&frame);
                    queued.fetch_sub(frame.len(), Ordering::AcqRel);
                }
                Outbound::Close => {
                    closing = true;
                    break;
                }
            }
            if batch.len() >= WRITE_BATCH {
                break;
            }
            match rx.try_recv() {
                Ok(next) => item = next,
                Err(_) => break,
            }
        }
        tokio::select! {
            r = wr.write_all(&batch) => if r.is_err() { break },
            _ = killed.wait_for(|k| *k) => return,
        }
        batch.clear();
        if closing {
            break;
        }
    }
    let _ = wr.shutdown().await;
    // Stops the reader and any further queueing for this session.
    kill.send_replace(true);
}
