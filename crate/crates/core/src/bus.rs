//! In-process publish/subscribe node graph.
//!
//! All state lives behind one lock, so a publish is atomic and every
//! subscriber of a topic sees messages in the same global order. Handles may
//! be moved across threads. Subscriber queues are bounded and drop their
//! oldest message on overflow.

use std::collections::{BTreeMap, BTreeSet, HashMap, VecDeque};
use std::sync::{Arc, Mutex, MutexGuard};

use thiserror::Error;

use crate::msgs::{Message, SchemaId};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum BusError {
    #[error("node name {0:?} is already in use")]
    DuplicateNode(String),
    #[error("topic {topic} carries {existing:?}, cannot advertise it as {requested:?}")]
    SchemaConflict { topic: String, existing: SchemaId, requested: SchemaId },
    #[error("topic {topic} expects {expected:?}, got {got:?}")]
    SchemaMismatch { topic: String, expected: SchemaId, got: SchemaId },
    #[error("queue depth must be at least 1")]
    ZeroDepth,
    #[error("handle belongs to a node that has shut down")]
    Closed,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TopicSpec {
    pub name: String,
    pub schema: SchemaId,
    /// Late subscribers immediately receive the last published message.
    pub latch: bool,
}

impl TopicSpec {
    pub fn new(name: impl Into<String>, schema: SchemaId) -> Self {
        TopicSpec { name: name.into(), schema, latch: false }
    }

    pub fn latched(mut self) -> Self {
        self.latch = true;
        self
    }

    /// The canonical topic for `schema`.
    pub fn canonical(schema: SchemaId) -> Self {
        TopicSpec::new(schema.canonical_topic(), schema)
    }
}

/// A message as delivered to a subscriber.
#[derive(Debug, Clone, PartialEq)]
pub struct Envelope {
    pub topic: Arc<str>,
    /// Per-topic publish sequence number, starting at 0.
    pub seq: u32,
    pub msg: Arc<Message>,
}

/// Bipartite node/topic graph. Edges run node -> topic for publishers and
/// topic -> node for subscribers.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Graph {
    pub nodes: BTreeSet<String>,
    pub topics: BTreeSet<String>,
    pub edges: BTreeSet<(String, String)>,
}

impl Graph {
    /// Edges touching any of `topics`.
    pub fn edges_on(&self, topics: &[&str]) -> BTreeSet<(String, String)> {
        self.edges
            .iter()
            .filter(|(a, b)| topics.contains(&a.as_str()) || topics.contains(&b.as_str()))
            .cloned()
            .collect()
    }

    /// Graphviz rendering.
    pub fn to_dot(&self) -> String {
        let mut s = String::from("digraph mir {\n");
        for n in &self.nodes {
            s.push_str(&format!("  \"{n}\" [shape=ellipse];\n"));
        }
        for t in &self.topics {
            s.push_str(&format!("  \"{t}\" [shape=box];\n"));
        }
        for (a, b) in &self.edges {
            s.push_str(&format!("  \"{a}\" -> \"{b}\";\n"));
        }
        s.push_str("}\n");
        s
    }
}

#[derive(Debug, Default)]
struct TopicState {
    schema: Option<SchemaId>,
    latch: bool,
    next_seq: u32,
    last: Option<Envelope>,
    publishers: BTreeSet<u64>,
    subscribers: BTreeSet<u64>,
}

#[derive(Debug)]
struct SubState {
    node: String,
    topic: String,
    depth: usize,
    queue: VecDeque<Envelope>,
    dropped: u64,
}

#[derive(Debug)]
struct PubState {
    node: String,
    topic: String,
}

#[derive(Debug, Default)]
struct BusState {
    nodes: BTreeSet<String>,
    topics: BTreeMap<String, TopicState>,
    subs: HashMap<u64, SubState>,
    pubs: HashMap<u64, PubState>,
    next_id: u64,
}

impl BusState {
    fn id(&mut self) -> u64 {
        self.next_id += 1;
        self.next_id
    }

    fn remove_pub(&mut self, id: u64) {
        if let Some(p) = self.pubs.remove(&id) {
            if let Some(t) = self.topics.get_mut(&p.topic) {
                t.publishers.remove(&id);
            }
        }
    }

    fn remove_sub(&mut self, id: u64) {
        if let Some(s) = self.subs.remove(&id) {
            if let Some(t) = self.topics.get_mut(&s.topic) {
                t.subscribers.remove(&id);
            }
        }
    }
}

/// Shared handle to one bus instance. Cloning is cheap.
#[derive(Debug, Clone, Default)]
pub struct Bus {
    state: Arc<Mutex<BusState>>,
}

impl Bus {
    pub fn new() -> Self {
        Bus::default()
    }

    fn lock(&self) -> MutexGuard<'_, BusState> {
        // A panic while holding the lock leaves the maps consistent, so the
        // poisoned state is still usable.
        self.state.lock().unwrap_or_else(|e| e.into_inner())
    }

    pub fn node(&self, name: impl Into<String>) -> Result<NodeHandle, BusError> {
        let name = name.into();
        let mut st = self.lock();
        if !st.nodes.insert(name.clone()) {
            return Err(BusError::DuplicateNode(name));
        }
        Ok(NodeHandle { bus: self.clone(), name, alive: true })
    }

    pub fn graph(&self) -> Graph {
        let st = self.lock();
        let mut g = Graph { nodes: st.nodes.clone(), ..Graph::default() };
        for (name, t) in &st.topics {
            if t.publishers.is_empty() && t.subscribers.is_empty() {
                continue;
            }
            g.topics.insert(name.clone());
            for id in &t.publishers {
                g.edges.insert((st.pubs[id].node.clone(), name.clone()));
            }
            for id in &t.subscribers {
                g.edges.insert((name.clone(), st.subs[id].node.clone()));
            }
        }
        g
    }

    /// Schema registered for a topic, if it has ever been advertised.
    pub fn topic_schema(&self, topic: &str) -> Option<SchemaId> {
        self.lock().topics.get(topic).and_then(|t| t.schema)
    }
}

/// A named participant. Dropping or shutting it down removes all of its
/// publishers and subscriptions from the graph.
#[derive(Debug)]
pub struct NodeHandle {
    bus: Bus,
    name: String,
    alive: bool,
}

impl NodeHandle {
    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn bus(&self) -> &Bus {
        &self.bus
    }

    pub fn advertise(&self, spec: TopicSpec) -> Result<Publisher, BusError> {
        let mut st = self.bus.lock();
        let id = st.id();
        let topic = st.topics.entry(spec.name.clone()).or_default();
        match topic.schema {
            Some(existing) if existing != spec.schema => {
                return Err(BusError::SchemaConflict {
                    topic: spec.name,
                    existing,
                    requested: spec.schema,
                });
            }
            _ => topic.schema = Some(spec.schema),
        }
        topic.latch |= spec.latch;
        topic.publishers.insert(id);
        st.pubs.insert(id, PubState { node: self.name.clone(), topic: spec.name.clone() });
        Ok(Publisher { bus: self.bus.clone(), id, topic: spec.name.into(), schema: spec.schema })
    }

    pub fn subscribe(&self, topic: &str, queue_depth: u16) -> Result<Subscription, BusError> {
        if queue_depth == 0 {
            return Err(BusError::ZeroDepth);
        }
        let mut st = self.bus.lock();
        let id = st.id();
        let t = st.topics.entry(topic.to_string()).or_default();
        t.subscribers.insert(id);
        let mut queue = VecDeque::new();
        if t.latch {
            queue.extend(t.last.clone());
        }
        st.subs.insert(
            id,
            SubState {
                node: self.name.clone(),
                topic: topic.to_string(),
                depth: queue_depth as usize,
                queue,
                dropped: 0,
            },
        );
        Ok(Subscription { bus: self.bus.clone(), id, topic: topic.to_string() })
    }

    pub fn shutdown(mut self) {
        self.close();
    }

    fn close(&mut self) {
        if !self.alive {
            return;
        }
        self.alive = false;
        let mut st = self.bus.lock();
        let pubs: Vec<u64> = st.pubs.iter().filter(|(_, p)| p.node == self.name).map(|(id, _)| *id).collect();
        let subs: Vec<u64> = st.subs.iter().filter(|(_, s)| s.node == self.name).map(|(id, _)| *id).collect();
        for id in pubs {
            st.remove_pub(id);
        }
        for id in subs {
            st.remove_sub(id);
        }
        st.nodes.remove(&self.name);
    }
}

impl Drop for NodeHandle {
    fn drop(&mut self) {
        self.close();
    }
}

#[derive(Debug)]
pub struct Publisher {
    bus: Bus,
    id: u64,
    topic: Arc<str>,
    schema: SchemaId,
}

impl Publisher {
    pub fn topic(&self) -> &str {
        &self.topic
    }

    pub fn schema(&self) -> SchemaId {
        self.schema
    }

    /// Delivers `msg` to every current subscriber and returns its sequence
    /// number on the topic.
    pub fn publish(&self, msg: impl Into<Message>) -> Result<u32, BusError> {
        self.publish_arc(Arc::new(msg.into()))
    }

    pub fn publish_arc(&self, msg: Arc<Message>) -> Result<u32, BusError> {
        if msg.schema() != self.schema {
            return Err(BusError::SchemaMismatch {
                topic: self.topic.to_string(),
                expected: self.schema,
                got: msg.schema(),
            });
        }
        let mut guard = self.bus.lock();
        let st = &mut *guard;
        if !st.pubs.contains_key(&self.id) {
            return Err(BusError::Closed);
        }
        let topic = st.topics.get_mut(&*self.topic).ok_or(BusError::Closed)?;
        let seq = topic.next_seq;
        topic.next_seq = topic.next_seq.wrapping_add(1);
        let env = Envelope { topic: self.topic.clone(), seq, msg };
        for id in &topic.subscribers {
            if let Some(sub) = st.subs.get_mut(id) {
                if sub.queue.len() == sub.depth {
                    sub.queue.pop_front();
                    sub.dropped += 1;
                }
                sub.queue.push_back(env.clone());
            }
        }
        if topic.latch {
            topic.last = Some(env);
        }
        Ok(seq)
    }
}

impl Drop for Publisher {
    fn drop(&mut self) {
        self.bus.lock().remove_pub(self.id);
    }
}

#[derive(Debug)]
pub struct Subscription {
    bus: Bus,
    id: u64,
    topic: String,
}

impl Subscription {
    pub fn topic(&self) -> &str {
        &self.topic
    }

    pub fn try_recv(&self) -> Option<Envelope> {
        self.bus.lock().subs.get_mut(&self.id).and_then(|s| s.queue.pop_front())
    }

    /// Everything queued, oldest first.
    pub fn drain(&self) -> Vec<Envelope> {
        self.bus
            .lock()
            .subs
            .get_mut(&self.id)
            .map(|s| s.queue.drain(..).collect())
            .unwrap_or_default()
    }

    /// Messages lost to queue overflow so far.
    pub fn dropped(&self) -> u64 {
        self.bus.lock().subs.get(&self.id).map_or(0, |s| s.dropped)
    }

    pub fn is_open(&self) -> bool {
        self.bus.lock().subs.contains_key(&self.id)
    }
}

impl Drop for Subscription {
    fn drop(&mut self) {
        self.bus.lock().remove_sub(self.id);
    }
}
