//! Per-session event log with live fan-out.
//!
//! Every event is appended to `events.jsonl` before it is broadcast, so a
//! subscriber that reconnects with `Last-Event-ID` can always be served from
//! the log.

use std::path::PathBuf;
use std::sync::Mutex;

use chrono::{DateTime, Utc};
use cofac_core::jsonl;
use tokio::sync::broadcast;

use crate::model::{Event, EventBody};

const CHANNEL_CAPACITY: usize = 256;

#[derive(Debug)]
pub struct EventHub {
    inner: Mutex<HubInner>,
}

#[derive(Debug)]
struct HubInner {
    path: PathBuf,
    session_id: String,
    events: Vec<Event>,
    tx: broadcast::Sender<Event>,
    closed: bool,
}

/// What a new subscriber gets: the backlog after its cursor and, unless the
/// session is closed, a receiver for everything newer.
pub struct Subscription {
    pub backlog: Vec<Event>,
    pub live: Option<broadcast::Receiver<Event>>,
}

impl EventHub {
    /// Opens the log, dropping a torn final line.
    pub fn open(path: PathBuf, session_id: &str) -> std::io::Result<Self> {
        jsonl::truncate_torn_tail(&path)?;
        let events: Vec<Event> = jsonl::read_all(&path)?;
        for (i, e) in events.iter().enumerate() {
            if e.seq != i as u64 + 1 {
                return Err(std::io::Error::new(
                    std::io::ErrorKind::InvalidData,
                    format!("{}: event {} has seq {}", path.display(), i + 1, e.seq),
                ));
            }
        }
        let closed = events.last().is_some_and(|e| e.body == EventBody::SessionClosed);
        let (tx, _) = broadcast::channel(CHANNEL_CAPACITY);
        Ok(Self {
            inner: Mutex::new(HubInner {
                path,
                session_id: session_id.to_string(),
                events,
                tx,
                closed,
            }),
        })
    }

    fn lock(&self) -> std::sync::MutexGuard<'_, HubInner> {
        self.inner.lock().unwrap_or_else(|p| p.into_inner())
    }

    pub fn last_seq(&self) -> u64 {
        self.lock().events.last().map_or(0, |e| e.seq)
    }

    /// Persists then broadcasts the bodies in order, returning the sequenced events.
    pub fn publish(&self, at: DateTime<Utc>, bodies: Vec<EventBody>) -> std::io::Result<Vec<Event>> {
        let mut hub = self.lock();
        let mut out = Vec::with_capacity(bodies.len());
        for body in bodies {
            let closing = body == EventBody::SessionClosed;
            let event = Event {
                seq: hub.events.last().map_or(0, |e| e.seq) + 1,
                session_id: hub.session_id.clone(),
                at,
                body,
            };
            jsonl::append(&hub.path, &event)?;
            hub.events.push(event.clone());
            // no receivers is fine
            let _ = hub.tx.send(event.clone());
            out.push(event);
            if closing {
                hub.closed = true;
            }
        }
        Ok(out)
    }

    /// Events with `seq > after`, plus a live receiver if the session is open.
    pub fn subscribe(&self, after: u64) -> Subscription {
        let hub = self.lock();
        let start = (after as usize).min(hub.events.len());
        Subscription {
            backlog: hub.events[start..].to_vec(),
            live: (!hub.closed).then(|| hub.tx.subscribe()),
        }
    }
}
