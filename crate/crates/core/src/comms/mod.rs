//! Synchronous neighbor exchange over pluggable transports.
//!
//! Every frame uses the binary layout of [`Message::encode`], so the
//! in-process and TCP transports carry identical bytes.

mod inproc;
mod message;
mod tcp;

pub use inproc::{InProcNetwork, InProcTransport};
pub use message::{Message, Tensor, MAGIC, VERSION};
pub use tcp::{Roster, RosterEntry, TcpTransport};

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::sync::mpsc::{Receiver, RecvTimeoutError};
use std::time::{Duration, Instant};

use thiserror::Error;

/// Reserved kind for barrier traffic.
pub const KIND_CONTROL: u8 = 0xFF;
/// Default kind for algorithm payloads.
pub const KIND_DATA: u8 = 1;
pub const DEFAULT_TIMEOUT: Duration = Duration::from_secs(30);

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CommsError {
    #[error("timed out after {secs:.1} s waiting for agent {from} (round {round})")]
    Timeout { from: usize, round: u64, secs: f64 },
    #[error("protocol error: {0}")]
    Protocol(String),
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("decode error: {0}")]
    Decode(String),
    #[error("i/o error: {0}")]
    Io(String),
    #[error("agent {0} disconnected")]
    Disconnected(usize),
}

impl From<std::io::Error> for CommsError {
    fn from(e: std::io::Error) -> Self {
        CommsError::Io(e.to_string())
    }
}

/// Reliable, per-sender FIFO point-to-point delivery between `n` agents.
pub trait Transport: Send {
    fn id(&self) -> usize;
    fn n(&self) -> usize;
    fn send(&mut self, to: usize, msg: &Message) -> Result<(), CommsError>;
    /// Blocks until the next data message from `from` arrives; it must carry
    /// `round`.
    fn receive_from(&mut self, from: usize, round: u64) -> Result<Message, CommsError>;
    /// Next control message from `from`.
    fn receive_control(&mut self, from: usize, round: u64) -> Result<Message, CommsError>;

    /// Returns once all `n` agents have entered the barrier for `round`.
    /// Coordinated by agent 0; differing rounds are a protocol error at
    /// every participant.
    fn barrier(&mut self, round: u64) -> Result<(), CommsError> {
        let (id, n) = (self.id(), self.n());
        if n == 1 {
            return Ok(());
        }
        if id == 0 {
            let mut mismatch = None;
            for j in 1..n {
                let m = self.receive_control(j, round)?;
                if m.round != round && mismatch.is_none() {
                    mismatch = Some((j, m.round));
                }
            }
            let flag = if mismatch.is_some() { 1.0 } else { 0.0 };
            for j in 1..n {
                self.send(j, &Message::new(0, round, KIND_CONTROL, vec![Tensor::scalar(flag)]))?;
            }
            if let Some((j, r)) = mismatch {
                return Err(CommsError::Protocol(format!("barrier round {round} but agent {j} is at round {r}")));
            }
        } else {
            self.send(0, &Message::new(id, round, KIND_CONTROL, vec![Tensor::scalar(0.0)]))?;
            let m = self.receive_control(0, round)?;
            let aborted = m.payload.first().map(|t| t.data()[0] != 0.0).unwrap_or(true);
            if m.round != round || aborted {
                return Err(CommsError::Protocol(format!("barrier round {round} released as round {} (aborted: {aborted})", m.round)));
            }
        }
        Ok(())
    }
}

/// Receive-side buffering shared by the transports: one inbox fed in arrival
/// order, sorted into per-sender queues on demand.
pub(crate) struct Mailbox {
    inbox: Receiver<Result<Message, CommsError>>,
    pending: Vec<VecDeque<Message>>,
    pub(crate) timeout: Duration,
}

impl Mailbox {
    pub(crate) fn new(n: usize, inbox: Receiver<Result<Message, CommsError>>, timeout: Duration) -> Self {
        Self { inbox, pending: vec![VecDeque::new(); n], timeout }
    }

    fn take(&mut self, from: usize, round: u64, control: bool) -> Result<Message, CommsError> {
        let n = self.pending.len();
        if from >= n {
            return Err(CommsError::Precondition(format!("agent {from} out of range (n = {n})")));
        }
        let deadline = Instant::now() + self.timeout;
        loop {
            if let Some(pos) = self.pending[from].iter().position(|m| (m.kind == KIND_CONTROL) == control) {
                let m = self.pending[from].remove(pos).expect("position is valid");
                if !control && m.round != round {
                    return Err(CommsError::Protocol(format!(
                        "expected round {round} from agent {from}, got round {}",
                        m.round
                    )));
                }
                return Ok(m);
            }
            let left = deadline.saturating_duration_since(Instant::now());
            match self.inbox.recv_timeout(left) {
                Ok(Ok(m)) => {
                    let s = m.sender as usize;
                    if s >= n {
                        return Err(CommsError::Protocol(format!("message from unknown agent {s}")));
                    }
                    self.pending[s].push_back(m);
                }
                Ok(Err(e)) => return Err(e),
                Err(RecvTimeoutError::Timeout) => {
                    return Err(CommsError::Timeout { from, round, secs: self.timeout.as_secs_f64() })
                }
                Err(RecvTimeoutError::Disconnected) => return Err(CommsError::Disconnected(from)),
            }
        }
    }

    pub(crate) fn data(&mut self, from: usize, round: u64) -> Result<Message, CommsError> {
        self.take(from, round, false)
    }

    pub(crate) fn control(&mut self, from: usize, round: u64) -> Result<Message, CommsError> {
        self.take(from, round, true)
    }
}

/// Sends the same payload to every out-neighbor and collects one payload per
/// in-neighbor, all tagged `round`.
pub fn neighbors_exchange(
    t: &mut dyn Transport,
    in_nbrs: &BTreeSet<usize>,
    out_nbrs: &BTreeSet<usize>,
    kind: u8,
    payload: &[Tensor],
    round: u64,
) -> Result<BTreeMap<usize, Vec<Tensor>>, CommsError> {
    let msg = Message::new(t.id(), round, kind, payload.to_vec());
    for &j in out_nbrs {
        t.send(j, &msg)?;
    }
    collect(t, in_nbrs, kind, round)
}

/// As [`neighbors_exchange`] with a distinct payload per out-neighbor. Every
/// out-neighbor must have an entry; this is checked before anything is sent.
pub fn neighbors_exchange_keyed(
    t: &mut dyn Transport,
    in_nbrs: &BTreeSet<usize>,
    out_nbrs: &BTreeSet<usize>,
    kind: u8,
    payloads: &BTreeMap<usize, Vec<Tensor>>,
    round: u64,
) -> Result<BTreeMap<usize, Vec<Tensor>>, CommsError> {
    if let Some(j) = out_nbrs.iter().find(|j| !payloads.contains_key(j)) {
        return Err(CommsError::Precondition(format!("no payload for out-neighbor {j}")));
    }
    if let Some(j) = payloads.keys().find(|j| !out_nbrs.contains(j)) {
        return Err(CommsError::Precondition(format!("payload for {j}, which is not an out-neighbor")));
    }
    let id = t.id();
    for (&j, p) in payloads {
        t.send(j, &Message::new(id, round, kind, p.clone()))?;
    }
    collect(t, in_nbrs, kind, round)
}

fn collect(
    t: &mut dyn Transport,
    in_nbrs: &BTreeSet<usize>,
    kind: u8,
    round: u64,
) -> Result<BTreeMap<usize, Vec<Tensor>>, CommsError> {
    let mut out = BTreeMap::new();
    for &j in in_nbrs {
        let m = t.receive_from(j, round)?;
        if m.kind != kind {
            return Err(CommsError::Protocol(format!("expected kind {kind} from agent {j}, got {}", m.kind)));
        }
        out.insert(j, m.payload);
    }
    Ok(out)
}
