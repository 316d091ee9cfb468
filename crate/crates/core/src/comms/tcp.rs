use std::io::{ErrorKind, Read, Write};
use std::net::{TcpListener, TcpStream};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::mpsc::{channel, Sender};
use std::sync::Arc;
use std::thread::{self, JoinHandle};
use std::time::{Duration, Instant};

use super::{CommsError, Mailbox, Message, Transport};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RosterEntry {
    pub id: usize,
    pub host: String,
    pub port: u16,
}

/// Peer addresses, one `id host port` line per agent, ids `0..n`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Roster {
    entries: Vec<RosterEntry>,
}

impl Roster {
    pub fn new(mut entries: Vec<RosterEntry>) -> Result<Self, CommsError> {
        entries.sort_by_key(|e| e.id);
        for (k, e) in entries.iter().enumerate() {
            if e.id != k {
                return Err(CommsError::Precondition(format!("roster ids must be 0..n without gaps; missing {k}")));
            }
        }
        Ok(Self { entries })
    }

    /// `n` agents on 127.0.0.1 listening on `base_port + id`.
    pub fn localhost(n: usize, base_port: u16) -> Result<Self, CommsError> {
        let entries = (0..n)
            .map(|id| {
                let port = u16::try_from(base_port as usize + id)
                    .map_err(|_| CommsError::Precondition(format!("port {base_port}+{id} out of range")))?;
                Ok(RosterEntry { id, host: "127.0.0.1".into(), port })
            })
            .collect::<Result<_, CommsError>>()?;
        Self::new(entries)
    }

    pub fn parse(text: &str) -> Result<Self, CommsError> {
        let mut entries = Vec::new();
        for (k, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let bad = |what: &str| CommsError::Precondition(format!("roster line {}: {what}", k + 1));
            let parts: Vec<&str> = line.split_whitespace().collect();
            if parts.len() != 3 {
                return Err(bad("expected `id host port`"));
            }
            let id = parts[0].parse().map_err(|_| bad("bad id"))?;
            let port = parts[2].parse().map_err(|_| bad("bad port"))?;
            entries.push(RosterEntry { id, host: parts[1].to_string(), port });
        }
        Self::new(entries)
    }

    pub fn to_text(&self) -> String {
        self.entries.iter().map(|e| format!("{} {} {}\n", e.id, e.host, e.port)).collect()
    }

    pub fn n(&self) -> usize {
        self.entries.len()
    }

    pub fn addr(&self, id: usize) -> String {
        let e = &self.entries[id];
        format!("{}:{}", e.host, e.port)
    }
}

/// One listening socket per agent plus lazily opened outgoing connections.
pub struct TcpTransport {
    id: usize,
    roster: Roster,
    out: Vec<Option<TcpStream>>,
    mailbox: Mailbox,
    stop: Arc<AtomicBool>,
    listener: Option<JoinHandle<()>>,
}

impl TcpTransport {
    pub fn bind(id: usize, roster: Roster, timeout: Duration) -> Result<Self, CommsError> {
        let n = roster.n();
        if id >= n {
            return Err(CommsError::Precondition(format!("agent id {id} not in roster of {n}")));
        }
        let listener = TcpListener::bind(roster.addr(id))?;
        listener.set_nonblocking(true)?;
        let (tx, rx) = channel();
        let stop = Arc::new(AtomicBool::new(false));
        let stop_flag = stop.clone();
        let handle = thread::spawn(move || accept_loop(listener, tx, stop_flag));
        Ok(Self { id, out: (0..n).map(|_| None).collect(), roster, mailbox: Mailbox::new(n, rx, timeout), stop, listener: Some(handle) })
    }

    fn stream(&mut self, to: usize, round: u64) -> Result<&mut TcpStream, CommsError> {
        if self.out[to].is_none() {
            let deadline = Instant::now() + self.mailbox.timeout;
            let addr = self.roster.addr(to);
            let s = loop {
                match TcpStream::connect(&addr) {
                    Ok(s) => break s,
                    Err(_) if Instant::now() < deadline => thread::sleep(Duration::from_millis(20)),
                    Err(_) => {
                        return Err(CommsError::Timeout { from: to, round, secs: self.mailbox.timeout.as_secs_f64() })
                    }
                }
            };
            s.set_nodelay(true)?;
            self.out[to] = Some(s);
        }
        Ok(self.out[to].as_mut().expect("just connected"))
    }
}

fn accept_loop(listener: TcpListener, tx: Sender<Result<Message, CommsError>>, stop: Arc<AtomicBool>) {
    while !stop.load(Ordering::Relaxed) {
        match listener.accept() {
            Ok((s, _)) => {
                let tx = tx.clone();
                thread::spawn(move || read_loop(s, tx));
            }
            Err(e) if e.kind() == ErrorKind::WouldBlock => thread::sleep(Duration::from_millis(2)),
            Err(e) => {
                let _ = tx.send(Err(e.into()));
                return;
            }
        }
    }
}

fn read_loop(mut s: TcpStream, tx: Sender<Result<Message, CommsError>>) {
    if s.set_nonblocking(false).is_err() {
        return;
    }
    loop {
        let mut len = [0u8; 4];
        match s.read_exact(&mut len) {
            Ok(()) => {}
            Err(e) if e.kind() == ErrorKind::UnexpectedEof => return,
            Err(e) => {
                let _ = tx.send(Err(e.into()));
                return;
            }
        }
        let mut body = vec![0u8; u32::from_le_bytes(len) as usize];
        let res = s.read_exact(&mut body).map_err(CommsError::from).and_then(|_| Message::decode_body(&body));
        let failed = res.is_err();
        if tx.send(res).is_err() || failed {
            return;
        }
    }
}

impl Transport for TcpTransport {
    fn id(&self) -> usize {
        self.id
    }

    fn n(&self) -> usize {
        self.roster.n()
    }

    fn send(&mut self, to: usize, msg: &Message) -> Result<(), CommsError> {
        if to >= self.n() {
            return Err(CommsError::Precondition(format!("agent {to} out of range")));
        }
        let frame = msg.encode();
        self.stream(to, msg.round)?.write_all(&frame)?;
        Ok(())
    }

    fn receive_from(&mut self, from: usize, round: u64) -> Result<Message, CommsError> {
        self.mailbox.data(from, round)
    }

    fn receive_control(&mut self, from: usize, round: u64) -> Result<Message, CommsError> {
        self.mailbox.control(from, round)
    }
}

impl Drop for TcpTransport {
    fn drop(&mut self) {
        for s in self.out.iter_mut().flatten() {
            let _ = s.flush();
        }
        self.stop.store(true, Ordering::Relaxed);
        if let Some(h) = self.listener.take() {
            let _ = h.join();
        }
    }
}
