use std::sync::mpsc::{channel, Sender};
use std::time::Duration;

use super::{CommsError, Mailbox, Message, Transport, DEFAULT_TIMEOUT};

/// Builder for a fully connected set of in-process transports.
pub struct InProcNetwork;

impl InProcNetwork {
    #[allow(clippy::new_ret_no_self)]
    pub fn new(n: usize) -> Vec<InProcTransport> {
        Self::with_timeout(n, DEFAULT_TIMEOUT)
    }

    pub fn with_timeout(n: usize, timeout: Duration) -> Vec<InProcTransport> {
        let (txs, rxs): (Vec<_>, Vec<_>) = (0..n).map(|_| channel()).unzip();
        rxs.into_iter()
            .enumerate()
            .map(|(id, rx)| InProcTransport { id, n, peers: txs.clone(), mailbox: Mailbox::new(n, rx, timeout) })
            .collect()
    }
}

/// Channel-backed transport. Messages travel as encoded frames so that the
/// bytes agree with the TCP transport.
pub struct InProcTransport {
    id: usize,
    n: usize,
    peers: Vec<Sender<Result<Message, CommsError>>>,
    pub(crate) mailbox: Mailbox,
}

impl Transport for InProcTransport {
    fn id(&self) -> usize {
        self.id
    }

    fn n(&self) -> usize {
        self.n
    }

    fn send(&mut self, to: usize, msg: &Message) -> Result<(), CommsError> {
        let peer = self.peers.get(to).ok_or_else(|| CommsError::Precondition(format!("agent {to} out of range")))?;
        let wire = Message::decode(&msg.encode())?;
        peer.send(Ok(wire)).map_err(|_| CommsError::Disconnected(to))
    }

    fn receive_from(&mut self, from: usize, round: u64) -> Result<Message, CommsError> {
        self.mailbox.data(from, round)
    }

    fn receive_control(&mut self, from: usize, round: u64) -> Result<Message, CommsError> {
        self.mailbox.control(from, round)
    }
}
