//! Live questionnaire sessions with idle expiry.

use std::collections::HashMap;
use std::sync::{Arc, Mutex};
use std::time::{Duration, Instant};

use kbts_core::inference::Session;

struct Entry {
    session: Arc<tokio::sync::Mutex<Session>>,
    last_used: Instant,
}

/// Sessions by id. Each session sits behind its own async mutex so
/// concurrent answers to one session are serialized while other sessions
/// proceed independently.
pub struct SessionRegistry {
    entries: Mutex<HashMap<String, Entry>>,
    idle_timeout: Duration,
}

impl SessionRegistry {
    pub fn new(idle_timeout: Duration) -> Self {
        Self {
            entries: Mutex::new(HashMap::new()),
            idle_timeout,
        }
    }

    pub fn insert(&self, session: Session) -> String {
        let id = session.id().to_string();
        let entry = Entry {
            session: Arc::new(tokio::sync::Mutex::new(session)),
            last_used: Instant::now(),
        };
        self.entries.lock().unwrap().insert(id.clone(), entry);
        id
    }

    /// Looks up a live session and refreshes its idle clock.
    pub fn get(&self, id: &str) -> Option<Arc<tokio::sync::Mutex<Session>>> {
        let mut entries = self.entries.lock().unwrap();
        let now = Instant::now();
        match entries.get_mut(id) {
            Some(entry) if now.duration_since(entry.last_used) < self.idle_timeout => {
                entry.last_used = now;
                Some(entry.session.clone())
            }
            Some(_) => {
                entries.remove(id);
                None
            }
            None => None,
        }
    }

    /// Drops sessions idle for longer than the timeout; returns how many.
    pub fn purge_expired(&self) -> usize {
        let mut entries = self.entries.lock().unwrap();
        let before = entries.len();
        let timeout = self.idle_timeout;
        entries.retain(|_, e| e.last_used.elapsed() < timeout);
        before - entries.len()
    }

    pub fn len(&self) -> usize {
        self.entries.lock().unwrap().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}
