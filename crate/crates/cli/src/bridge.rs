//! WebSocket bridge for remote dashboards.
//!
//! Client threads own the sockets. The scheduler thread calls
//! [`Bridge::pump`] to move bus traffic out to clients, so the simulation
//! never blocks on the network. Joystick input from clients goes through
//! [`LatestJoy`]; the last writer wins when several clients publish.

use std::collections::{BTreeMap, BTreeSet};
use std::io::ErrorKind;
use std::net::{SocketAddr, TcpListener, TcpStream};
use std::sync::atomic::{AtomicBool, AtomicU64, Ordering};
use std::sync::mpsc::{self, Receiver, Sender};
use std::sync::{Arc, Mutex, MutexGuard};
use std::thread::{self, JoinHandle};
use std::time::Duration;

use log::{debug, info, warn};
use serde::Deserialize;
use serde_json::json;
use tungstenite::{Message as WsMessage, WebSocket};

use mir_core::bus::{Bus, BusError, NodeHandle, Subscription};
use mir_core::msgs::{topics, JoyState, Message, Timestamp};
use mir_core::teleop::{JoyEvent, LatestJoy};

pub const NODE_NAME: &str = "bridge";

const QUEUE_DEPTH: u16 = 100;
const POLL: Duration = Duration::from_millis(10);
const HANDSHAKE_TIMEOUT: Duration = Duration::from_secs(5);

#[derive(Debug, thiserror::Error)]
pub enum BridgeError {
    #[error("cannot listen on 127.0.0.1:{port}: {source}")]
    Bind {
        port: u16,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Bus(#[from] BusError),
}

/// One client request. Anything else is answered with an error reply.
#[derive(Debug, Deserialize)]
#[serde(tag = "op", rename_all = "lowercase", deny_unknown_fields)]
enum Request {
    Subscribe { topic: String },
    Unsubscribe { topic: String },
    Publish { topic: String, msg: JoyInput },
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct JoyInput {
    axes: Vec<f64>,
    #[serde(default)]
    buttons: Vec<u8>,
}

/// Counters for tests and shutdown logs.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct BridgeStats {
    pub clients: usize,
    pub joy_received: u64,
    pub pushed: u64,
}

struct Client {
    id: u64,
    topics: BTreeSet<String>,
    tx: Sender<String>,
}

#[derive(Default)]
struct Hub {
    clients: Vec<Client>,
    next_id: u64,
}

struct Shared {
    hub: Mutex<Hub>,
    stop: AtomicBool,
    joy_received: AtomicU64,
    bus: Bus,
    joy: LatestJoy,
}

impl Shared {
    fn hub(&self) -> MutexGuard<'_, Hub> {
        self.hub.lock().unwrap_or_else(|e| e.into_inner())
    }
}

/// The `bridge` node plus its listener. Subscribes to a topic only while
/// some client wants it.
pub struct Bridge {
    node: NodeHandle,
    shared: Arc<Shared>,
    subs: BTreeMap<String, Subscription>,
    addr: SocketAddr,
    pushed: u64,
    acceptor: Option<JoinHandle<()>>,
}

impl Bridge {
    /// Listens on loopback. Port 0 picks a free port; see [`Bridge::addr`].
    pub fn start(bus: &Bus, port: u16, joy: LatestJoy) -> Result<Self, BridgeError> {
        let listener = TcpListener::bind(("127.0.0.1", port)).map_err(|source| BridgeError::Bind { port, source })?;
        let addr = listener.local_addr().map_err(|source| BridgeError::Bind { port, source })?;
        listener.set_nonblocking(true).map_err(|source| BridgeError::Bind { port, source })?;
        let node = bus.node(NODE_NAME)?;
        let shared = Arc::new(Shared {
            hub: Mutex::new(Hub::default()),
            stop: AtomicBool::new(false),
            joy_received: AtomicU64::new(0),
            bus: bus.clone(),
            joy,
        });
        let acceptor = {
            let shared = shared.clone();
            thread::spawn(move || accept_loop(listener, shared))
        };
        info!("bridge listening on ws://{addr}");
        Ok(Bridge { node, shared, subs: BTreeMap::new(), addr, pushed: 0, acceptor: Some(acceptor) })
    }

    pub fn addr(&self) -> SocketAddr {
        self.addr
    }

    pub fn stats(&self) -> BridgeStats {
        BridgeStats {
            clients: self.shared.hub().clients.len(),
            joy_received: self.shared.joy_received.load(Ordering::Relaxed),
            pushed: self.pushed,
        }
    }

    /// Brings bus subscriptions in line with client interest and forwards
    /// everything queued since the last call. Returns messages forwarded.
    pub fn pump(&mut self) -> usize {
        let mut hub = self.shared.hub();
        let wanted: BTreeSet<String> = hub.clients.iter().flat_map(|c| c.topics.iter().cloned()).collect();
        self.subs.retain(|t, _| wanted.contains(t));
        for topic in wanted {
            if !self.subs.contains_key(&topic) {
                match self.node.subscribe(&topic, QUEUE_DEPTH) {
                    Ok(sub) => {
                        debug!("bridge subscribed to {topic}");
                        self.subs.insert(topic, sub);
                    }
                    Err(e) => warn!("bridge cannot subscribe to {topic}: {e}"),
                }
            }
        }
        let mut forwarded = 0;
        for (topic, sub) in &self.subs {
            for env in sub.drain() {
                let text = push_text(topic, &env.msg);
                hub.clients.retain(|c| !c.topics.contains(topic) || c.tx.send(text.clone()).is_ok());
                forwarded += 1;
            }
        }
        self.pushed += forwarded as u64;
        forwarded
    }

    /// Closes every client and removes the node from the bus.
    pub fn shutdown(mut self) {
        self.stop_threads();
    }

    fn stop_threads(&mut self) {
        self.shared.stop.store(true, Ordering::Relaxed);
        if let Some(h) = self.acceptor.take() {
            let _ = h.join();
        }
    }
}

impl Drop for Bridge {
    fn drop(&mut self) {
        self.stop_threads();
    }
}

/// Server push: `{"topic", "t", "msg"}` with the message as plain JSON.
pub fn push_text(topic: &str, msg: &Message) -> String {
    json!({ "topic": topic, "t": msg.stamp().0, "msg": msg }).to_string()
}

fn error_text(reason: impl std::fmt::Display) -> String {
    json!({ "op": "error", "reason": reason.to_string() }).to_string()
}

fn accept_loop(listener: TcpListener, shared: Arc<Shared>) {
    let mut workers = Vec::new();
    while !shared.stop.load(Ordering::Relaxed) {
        match listener.accept() {
            Ok((stream, peer)) => {
                let shared = shared.clone();
                workers.push(thread::spawn(move || serve(stream, peer, shared)));
            }
            Err(e) if e.kind() == ErrorKind::WouldBlock => thread::sleep(POLL),
            Err(e) => {
                warn!("bridge accept failed: {e}");
                thread::sleep(POLL);
            }
        }
        workers.retain(|w| !w.is_finished());
    }
    for w in workers {
        let _ = w.join();
    }
}

fn serve(stream: TcpStream, peer: SocketAddr, shared: Arc<Shared>) {
    let setup = stream.set_nonblocking(false).and_then(|_| stream.set_read_timeout(Some(HANDSHAKE_TIMEOUT)));
    if let Err(e) = setup {
        warn!("bridge client {peer}: {e}");
        return;
    }
    let mut ws = match tungstenite::accept(stream) {
        Ok(ws) => ws,
        Err(e) => {
            warn!("bridge handshake with {peer} failed: {e}");
            return;
        }
    };
    if let Err(e) = ws.get_ref().set_read_timeout(Some(POLL)) {
        warn!("bridge client {peer}: {e}");
        return;
    }
    let (tx, rx) = mpsc::channel();
    let id = {
        let mut hub = shared.hub();
        let id = hub.next_id;
        hub.next_id += 1;
        hub.clients.push(Client { id, topics: BTreeSet::new(), tx: tx.clone() });
        id
    };
    info!("bridge client {peer} connected");
    let published = session(&mut ws, id, &tx, &rx, &shared);
    shared.hub().clients.retain(|c| c.id != id);
    if published {
        // The client's stick is gone; do not keep driving on its last input.
        shared.joy.put(JoyEvent::Disconnected);
    }
    let _ = ws.close(None);
    let _ = ws.flush();
    info!("bridge client {peer} disconnected");
}

/// Runs one connection until it closes or the bridge stops. Returns whether
/// the client ever published joystick input.
fn session(
    ws: &mut WebSocket<TcpStream>,
    id: u64,
    tx: &Sender<String>,
    rx: &Receiver<String>,
    shared: &Shared,
) -> bool {
    let mut published = false;
    while !shared.stop.load(Ordering::Relaxed) {
        match ws.read() {
            Ok(WsMessage::Text(text)) => {
                match handle(&text, id, shared) {
                    Ok(true) => published = true,
                    Ok(false) => {}
                    Err(reason) => {
                        let _ = tx.send(error_text(reason));
                    }
                }
            }
            Ok(WsMessage::Close(_)) => break,
            Ok(_) => {}
            Err(tungstenite::Error::Io(e)) if matches!(e.kind(), ErrorKind::WouldBlock | ErrorKind::TimedOut) => {}
            Err(tungstenite::Error::ConnectionClosed | tungstenite::Error::AlreadyClosed) => break,
            Err(e) => {
                debug!("bridge client {id}: {e}");
                break;
            }
        }
        while let Ok(text) = rx.try_recv() {
            if ws.send(WsMessage::Text(text)).is_err() {
                return published;
            }
        }
    }
    published
}

/// Applies one request. `Ok(true)` means joystick input was published.
fn handle(text: &str, id: u64, shared: &Shared) -> Result<bool, String> {
    let req: Request = serde_json::from_str(text).map_err(|e| format!("bad request: {e}"))?;
    match req {
        Request::Subscribe { topic } => {
            if shared.bus.topic_schema(&topic).is_none() {
                return Err(format!("unknown topic {topic}"));
            }
            if let Some(c) = shared.hub().clients.iter_mut().find(|c| c.id == id) {
                c.topics.insert(topic);
            }
            Ok(false)
        }
        Request::Unsubscribe { topic } => {
            if let Some(c) = shared.hub().clients.iter_mut().find(|c| c.id == id) {
                c.topics.remove(&topic);
            }
            Ok(false)
        }
        Request::Publish { topic, msg } => {
            if topic != topics::JOY {
                return Err(format!("clients may only publish {}, not {topic}", topics::JOY));
            }
            if msg.axes.iter().any(|a| !a.is_finite()) {
                return Err("axes must be finite".into());
            }
            // The scheduler restamps input with the sim clock on delivery.
            shared.joy.put(JoyEvent::State(JoyState { axes: msg.axes, buttons: msg.buttons, stamp: Timestamp::ZERO }));
            shared.joy_received.fetch_add(1, Ordering::Relaxed);
            Ok(true)
        }
    }
}
