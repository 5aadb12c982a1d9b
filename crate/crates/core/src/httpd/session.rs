use std::collections::{BTreeMap, HashMap};
use std::sync::Arc;
use std::time::{Duration, Instant, SystemTime};

use base64::engine::general_purpose::URL_SAFE_NO_PAD;
use base64::Engine;
use parking_lot::Mutex;
use rand::RngCore;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SessionOptions {
    /// Idle time after which a session is discarded.
    pub timeout: Duration,
    pub cookie_name: String,
    pub path: String,
}

impl Default for SessionOptions {
    fn default() -> Self {
        SessionOptions { timeout: Duration::from_secs(600), cookie_name: "tk_session".into(), path: "/".into() }
    }
}

/// Per-client data shared by all requests presenting the same cookie.
#[derive(Debug)]
pub struct Session {
    id: String,
    created: SystemTime,
    last_access: Mutex<Instant>,
    data: Mutex<BTreeMap<String, String>>,
}

impl Session {
    fn new(id: String) -> Session {
        Session {
            id,
            created: SystemTime::now(),
            last_access: Mutex::new(Instant::now()),
            data: Mutex::new(BTreeMap::new()),
        }
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn created(&self) -> SystemTime {
        self.created
    }

    pub fn last_access(&self) -> Instant {
        *self.last_access.lock()
    }

    pub fn get(&self, key: &str) -> Option<String> {
        self.data.lock().get(key).cloned()
    }

    pub fn put(&self, key: impl Into<String>, value: impl Into<String>) {
        self.data.lock().insert(key.into(), value.into());
    }

    pub fn delete(&self, key: &str) -> Option<String> {
        self.data.lock().remove(key)
    }

    /// Replaces the value of `key` atomically with respect to other requests
    /// of this session.
    pub fn update<F>(&self, key: &str, f: F) -> Option<String>
    where
        F: FnOnce(Option<&str>) -> Option<String>,
    {
        let mut data = self.data.lock();
        match f(data.get(key).map(String::as_str)) {
            Some(v) => {
                data.insert(key.to_string(), v.clone());
                Some(v)
            }
            None => {
                data.remove(key);
                None
            }
        }
    }

    pub fn data(&self) -> BTreeMap<String, String> {
        self.data.lock().clone()
    }

    fn expired(&self, now: Instant, timeout: Duration) -> bool {
        now.duration_since(*self.last_access.lock()) > timeout
    }
}

/// 128 random bits as unpadded URL-safe base64.
pub fn new_session_id() -> String {
    let mut bytes = [0u8; 16];
    rand::rng().fill_bytes(&mut bytes);
    URL_SAFE_NO_PAD.encode(bytes)
}

/// The session table of one server.
#[derive(Debug)]
pub struct SessionManager {
    options: SessionOptions,
    table: Mutex<HashMap<String, Arc<Session>>>,
}

impl SessionManager {
    pub fn new(options: SessionOptions) -> SessionManager {
        SessionManager { options, table: Mutex::new(HashMap::new()) }
    }

    pub fn options(&self) -> &SessionOptions {
        &self.options
    }

    /// Live session for `id`, touching its access time. Expired sessions are
    /// removed and never returned.
    pub fn get(&self, id: &str) -> Option<Arc<Session>> {
        let now = Instant::now();
        let mut table = self.table.lock();
        let session = table.get(id)?.clone();
        if session.expired(now, self.options.timeout) {
            table.remove(id);
            return None;
        }
        *session.last_access.lock() = now;
        Some(session)
    }

    /// Starts a new session, dropping expired ones.
    pub fn create(&self) -> Arc<Session> {
        let now = Instant::now();
        let mut table = self.table.lock();
        table.retain(|_, s| !s.expired(now, self.options.timeout));
        loop {
            let id = new_session_id();
            if !table.contains_key(&id) {
                let session = Arc::new(Session::new(id.clone()));
                table.insert(id, session.clone());
                return session;
            }
        }
    }

    /// The first live session among `ids`, or a new one. The flag is true for
    /// a new session.
    pub fn resolve<'a>(&self, ids: impl IntoIterator<Item = &'a str>) -> (Arc<Session>, bool) {
        for id in ids {
            if let Some(s) = self.get(id) {
                return (s, false);
            }
        }
        (self.create(), true)
    }

    pub fn remove(&self, id: &str) -> bool {
        self.table.lock().remove(id).is_some()
    }

    /// Sessions currently held, including expired ones not yet swept.
    pub fn len(&self) -> usize {
        self.table.lock().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub(crate) fn set_cookie(&self, session: &Session) -> String {
        format!("{}={}; Path={}; HttpOnly; SameSite=Lax", self.options.cookie_name, session.id, self.options.path)
    }
}

#[cfg(test)]
mod tests {
    use std::collections::HashSet;
    use std::thread;

    use super::*;

    #[test]
    fn ids_are_unique_and_url_safe() {
        let ids: HashSet<String> = (0..1000).map(|_| new_session_id()).collect();
        assert_eq!(ids.len(), 1000);
        assert!(ids.iter().all(|id| id.len() == 22 && id.bytes().all(|b| b.is_ascii_alphanumeric() || b == b'-' || b == b'_')));
    }

    #[test]
    fn resolve_and_expire() {
        let m = SessionManager::new(SessionOptions { timeout: Duration::from_millis(50), ..Default::default() });
        let (a, new) = m.resolve(None);
        assert!(new);
        a.put("k", "v");
        let (b, new) = m.resolve(["bogus", a.id()]);
        assert!(!new);
        assert_eq!(b.id(), a.id());
        assert_eq!(b.get("k").as_deref(), Some("v"));
        thread::sleep(Duration::from_millis(80));
        let (c, new) = m.resolve([a.id()]);
        assert!(new);
        assert_ne!(c.id(), a.id());
        assert!(c.data().is_empty());
        assert_eq!(m.len(), 1);
    }

    #[test]
    fn concurrent_updates_are_not_lost() {
        let m = SessionManager::new(SessionOptions::default());
        let s = m.create();
        thread::scope(|scope| {
            for _ in 0..8 {
                scope.spawn(|| {
                    for _ in 0..500 {
                        s.update("n", |v| Some((v.map_or(0, |v| v.parse::<u32>().unwrap()) + 1).to_string()));
                    }
                });
            }
        });
        assert_eq!(s.get("n").as_deref(), Some("4000"));
        assert_eq!(s.update("n", |_| None), None);
        assert_eq!(s.get("n"), None);
    }
}
