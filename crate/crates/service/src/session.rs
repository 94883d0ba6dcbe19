//! Paused hypothesis searches, keyed by generation token.

use std::collections::HashMap;
use std::sync::Arc;
use std::time::{Duration, Instant};

use hypforge_core::model::{ModelSpec, Trace};
use hypforge_core::search::HypothesisStream;
use parking_lot::Mutex;
use uuid::Uuid;

pub struct Session {
    pub model_id: String,
    pub model: Arc<ModelSpec>,
    pub trace: Trace,
    pub stream: HypothesisStream,
    pub pages_served: usize,
}

struct Entry {
    session: Arc<Mutex<Session>>,
    last_used: Instant,
}

/// Sessions idle for longer than the ttl are dropped, frontier and all.
pub struct SessionTable {
    ttl: Duration,
    entries: Mutex<HashMap<Uuid, Entry>>,
}

impl SessionTable {
    pub fn new(ttl: Duration) -> Self {
        Self { ttl, entries: Mutex::new(HashMap::new()) }
    }

    pub fn insert(&self, session: Session) -> (Uuid, Arc<Mutex<Session>>) {
        let token = Uuid::new_v4();
        let session = Arc::new(Mutex::new(session));
        let mut entries = self.entries.lock();
        self.sweep_locked(&mut entries);
        entries.insert(token, Entry { session: session.clone(), last_used: Instant::now() });
        (token, session)
    }

    /// Looks up a live session and refreshes its idle clock.
    pub fn get(&self, token: &Uuid) -> Option<Arc<Mutex<Session>>> {
        let mut entries = self.entries.lock();
        self.sweep_locked(&mut entries);
        let entry = entries.get_mut(token)?;
        entry.last_used = Instant::now();
        Some(entry.session.clone())
    }

    pub fn touch(&self, token: &Uuid) {
        if let Some(e) = self.entries.lock().get_mut(token) {
            e.last_used = Instant::now();
        }
    }

    pub fn remove(&self, token: &Uuid) {
        self.entries.lock().remove(token);
    }

    pub fn sweep(&self) {
        self.sweep_locked(&mut self.entries.lock());
    }

    pub fn len(&self) -> usize {
        self.entries.lock().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn sweep_locked(&self, entries: &mut HashMap<Uuid, Entry>) {
        let ttl = self.ttl;
        entries.retain(|_, e| e.last_used.elapsed() <= ttl);
    }
}
