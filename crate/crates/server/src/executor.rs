//! The single executor task. It owns the [`Engine`] and every session's
//! output queue, so commands run one at a time in arrival order.

use std::collections::HashMap;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;

use miniredis_core::resp::encode;
use miniredis_core::{Engine, SessionId, Value};
use tokio::sync::{mpsc, watch};
use tracing::{debug, error, warn};

/// Item on a session's output queue.
#[derive(Debug)]
pub(crate) enum Outbound {
    Frame(Arc<[u8]>),
    /// Flush what is queued, then close the connection.
    Close,
}

/// Executor-side handle on a session's writer.
pub(crate) struct Outbox {
    pub tx: mpsc::UnboundedSender<Outbound>,
    /// Bytes queued but not yet written.
    pub queued: Arc<AtomicUsize>,
    /// Set to drop the connection without flushing.
    pub kill: Arc<watch::Sender<bool>>,
}

pub(crate) enum Job {
    Connect {
        id: SessionId,
        outbox: Outbox,
    },
    Command {
        id: SessionId,
        parts: Vec<Vec<u8>>,
    },
    /// A reply produced before the engine, such as a protocol error.
    Reply {
        id: SessionId,
        value: Value,
        close: bool,
    },
    Disconnect {
        id: SessionId,
    },
}

pub(crate) async fn run(mut jobs: mpsc::Receiver<Job>, output_cap: usize) {
    let mut exec = Executor {
        engine: Engine::new(),
        sessions: HashMap::new(),
        output_cap,
    };
    while let Some(job) = jobs.recv().await {
        exec.handle(job);
    }
    debug!("executor stopped");
}

struct Executor {
    engine: Engine,
    sessions: HashMap<SessionId, Outbox>,
    output_cap: usize,
}

impl Executor {
    fn handle(&mut self, job: Job) {
        match job {
            Job::Connect { id, outbox } => {
                self.sessions.insert(id, outbox);
            }
            Job::Command { id, parts } => {
                if !self.sessions.contains_key(&id) {
                    return;
                }
                let outcome = self.engine.execute(id, parts);
                for reply in &outcome.replies {
                    let frame = frame(reply);
                    self.push(id, frame);
                }
                for delivery in &outcome.deliveries {
                    let frame = frame(&delivery.frame);
                    for &recipient in &delivery.recipients {
                        self.push(recipient, frame.clone());
                    }
                }
                if outcome.close {
                    self.close(id);
                }
            }
            Job::Reply { id, value, close } => {
                self.push(id, frame(&value));
                if close {
                    self.close(id);
                }
            }
            Job::Disconnect { id } => {
                self.engine.disconnect(id);
                self.sessions.remove(&id);
            }
        }
    }

    /// Queues `frame` for `id`, dropping the session if it would exceed its
    /// output cap.
    fn push(&mut self, id: SessionId, frame: Arc<[u8]>) {
        let Some(outbox) = self.sessions.get(&id) else {
            return;
        };
        let queued = outbox.queued.fetch_add(frame.len(), Ordering::AcqRel) + frame.len();
        if queued > self.output_cap {
            warn!(
                session = id.0,
                queued, "output queue over limit; dropping client"
            );
            outbox.kill.send_replace(true);
            self.sessions.remove(&id);
            self.engine.disconnect(id);
            return;
        }
        if outbox.tx.send(Outbound::Frame(frame)).is_err() {
            self.sessions.remove(&id);
            self.engine.disconnect(id);
        }
    }

    fn close(&mut self, id: SessionId) {
        if let Some(outbox) = self.sessions.get(&id) {
            let _ = outbox.tx.send(Outbound::Close);
        }
    }
}

fn frame(value: &Value) -> Arc<[u8]> {
    match encode(value) {
        Ok(bytes) => bytes.into(),
        Err(e) => {
            error!(%e, "reply could not be encoded");
            Arc::from(&b"-ERR internal error\r\n"[..])
        }
    }
}
