//! Durable storage for a [`Store`].
//!
//! Each source has two files in the database directory: `<name>.snap`, a
//! binary snapshot, and `<name>.journal`, the changes committed since. The
//! name is the percent-encoded source. [`Persistence::attach`] loads the
//! snapshots, replays the journals and then journals every commit through
//! a store monitor.

mod journal;
mod snapshot;

use std::collections::{BTreeMap, BTreeSet};
use std::fs::{self, File, OpenOptions};
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::{SystemTime, UNIX_EPOCH};

use parking_lot::Mutex;
use percent_encoding::{percent_decode_str, utf8_percent_encode, AsciiSet, NON_ALPHANUMERIC};
use thiserror::Error;

use crate::rdfio::Triple;
use crate::store::{Event, EventMask, MonitorId, Pattern, Store, StoreError, StoredTriple, Transaction};

pub use journal::{read_journal, JournalContents, JournalRecord};
pub use snapshot::{decode_snapshot, encode_snapshot, SnapshotError, MAGIC, VERSION};

const SNAPSHOT_EXT: &str = "snap";
const JOURNAL_EXT: &str = "journal";

const FILE_NAME: &AsciiSet = &NON_ALPHANUMERIC.remove(b'-').remove(b'_');

#[derive(Debug, Error)]
pub enum PersistError {
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: io::Error },
    #[error("{}: corrupt snapshot at byte {offset}: {message}", path.display())]
    Snapshot { path: PathBuf, offset: usize, message: String },
    #[error("{}:{line}: {message}", path.display())]
    Journal { path: PathBuf, line: usize, message: String },
    #[error(transparent)]
    Store(#[from] StoreError),
    #[error("store is not attached")]
    Detached,
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> PersistError + '_ {
    move |source| PersistError::Io { path: path.to_path_buf(), source }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PersistOptions {
    /// Sync journal appends and snapshots to disk before returning.
    pub fsync: bool,
}

impl Default for PersistOptions {
    fn default() -> Self {
        PersistOptions { fsync: true }
    }
}

/// What was found for one source while attaching or verifying.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct SourceReport {
    pub source: String,
    pub snapshot_triples: usize,
    pub journal_transactions: usize,
    /// A trailing transaction was incomplete and skipped.
    pub partial: bool,
}

pub fn file_stem(source: &str) -> String {
    utf8_percent_encode(source, FILE_NAME).to_string()
}

pub fn snapshot_path(dir: &Path, source: &str) -> PathBuf {
    dir.join(format!("{}.{SNAPSHOT_EXT}", file_stem(source)))
}

pub fn journal_path(dir: &Path, source: &str) -> PathBuf {
    dir.join(format!("{}.{JOURNAL_EXT}", file_stem(source)))
}

/// Sources with a snapshot or journal in `dir`, sorted.
fn sources_in(dir: &Path) -> Result<Vec<String>, PersistError> {
    let mut out = BTreeSet::new();
    for entry in fs::read_dir(dir).map_err(io_err(dir))? {
        let path = entry.map_err(io_err(dir))?.path();
        let ext = path.extension().and_then(|e| e.to_str());
        if !matches!(ext, Some(SNAPSHOT_EXT | JOURNAL_EXT)) {
            continue;
        }
        if let Some(stem) = path.file_stem().and_then(|s| s.to_str()) {
            if let Ok(name) = percent_decode_str(stem).decode_utf8() {
                out.insert(name.into_owned());
            }
        }
    }
    Ok(out.into_iter().collect())
}

fn read_snapshot(path: &Path, source: &str) -> Result<Option<crate::store::BulkLoad>, PersistError> {
    let bytes = match fs::read(path) {
        Ok(b) => b,
        Err(e) if e.kind() == io::ErrorKind::NotFound => return Ok(None),
        Err(e) => return Err(io_err(path)(e)),
    };
    let bulk = decode_snapshot(&bytes).map_err(|e| PersistError::Snapshot {
        path: path.to_path_buf(),
        offset: e.offset,
        message: e.message,
    })?;
    if bulk.source != source {
        return Err(PersistError::Snapshot {
            path: path.to_path_buf(),
            offset: 6,
            message: format!("snapshot is for source {:?}", bulk.source),
        });
    }
    Ok(Some(bulk))
}

fn read_journal_file(path: &Path) -> Result<JournalContents, PersistError> {
    let bytes = match fs::read(path) {
        Ok(b) => b,
        Err(e) if e.kind() == io::ErrorKind::NotFound => return Ok(JournalContents::default()),
        Err(e) => return Err(io_err(path)(e)),
    };
    let text = match std::str::from_utf8(&bytes) {
        Ok(t) => t,
        // A cut in the middle of a character only affects the last line.
        Err(e) if e.error_len().is_none() => std::str::from_utf8(&bytes[..e.valid_up_to()]).expect("valid prefix"),
        Err(e) => {
            let line = bytes[..e.valid_up_to()].iter().filter(|b| **b == b'\n').count() + 1;
            return Err(PersistError::Journal { path: path.to_path_buf(), line, message: "invalid UTF-8".into() });
        }
    };
    let mut contents = read_journal(text)
        .map_err(|(line, message)| PersistError::Journal { path: path.to_path_buf(), line, message })?;
    if text.len() < bytes.len() {
        contents.partial = true;
    }
    Ok(contents)
}

/// Checks every snapshot and journal in `dir` without loading a store.
pub fn verify(dir: &Path) -> Result<Vec<SourceReport>, PersistError> {
    let mut out = Vec::new();
    for source in sources_in(dir)? {
        let snap = read_snapshot(&snapshot_path(dir, &source), &source)?;
        let journal = read_journal_file(&journal_path(dir, &source))?;
        out.push(SourceReport {
            snapshot_triples: snap.map_or(0, |b| b.triples.len()),
            journal_transactions: journal.transactions.len(),
            partial: journal.partial,
            source,
        });
    }
    Ok(out)
}

fn replay(txn: &mut Transaction<'_>, source: &str, records: &[JournalRecord]) -> Result<(), StoreError> {
    for r in records {
        match r {
            JournalRecord::Assert { triple, line } => txn.assert(triple.clone(), source, *line)?,
            JournalRecord::Retract(t) => {
                txn.retract(&exact(t).source(source))?;
            }
            JournalRecord::Update { old, new } => {
                txn.update(old, source, new.clone())?;
            }
            JournalRecord::Begin { .. } | JournalRecord::End { .. } => {}
        }
    }
    Ok(())
}

fn exact(t: &Triple) -> Pattern {
    Pattern::new(Some(t.subject.clone()), Some(t.predicate.clone()), Some(t.object.clone()))
}

fn now() -> f64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map_or(0.0, |d| d.as_secs_f64())
}

struct JournalState {
    files: BTreeMap<String, File>,
    /// Records of the transaction being delivered, by source.
    pending: BTreeMap<String, Vec<JournalRecord>>,
    next_id: u64,
    last_error: Option<String>,
}

struct Shared {
    dir: PathBuf,
    options: PersistOptions,
    state: Mutex<JournalState>,
}

impl Shared {
    fn on_event(&self, event: &Event) -> Result<(), PersistError> {
        let mut state = self.state.lock();
        match event {
            Event::TransactionBegin { .. } => state.pending.clear(),
            Event::Assert(st) => state
                .pending
                .entry(st.source.clone())
                .or_default()
                .push(JournalRecord::Assert { triple: st.triple.clone(), line: st.line }),
            Event::Retract(st) => {
                state.pending.entry(st.source.clone()).or_default().push(JournalRecord::Retract(st.triple.clone()))
            }
            Event::Update { old, new } => state
                .pending
                .entry(old.source.clone())
                .or_default()
                .push(JournalRecord::Update { old: old.triple.clone(), new: new.triple.clone() }),
            Event::TransactionEnd { .. } => {
                let pending = std::mem::take(&mut state.pending);
                if pending.is_empty() {
                    return Ok(());
                }
                let id = state.next_id;
                state.next_id += 1;
                let time = now();
                for (source, records) in pending {
                    let mut text = JournalRecord::Begin { id, time }.to_string();
                    text.push('\n');
                    for r in &records {
                        text.push_str(&r.to_string());
                        text.push('\n');
                    }
                    text.push_str(&JournalRecord::End { id }.to_string());
                    text.push('\n');
                    self.append(&mut state, &source, text.as_bytes())?;
                }
            }
            _ => {}
        }
        Ok(())
    }

    fn append(&self, state: &mut JournalState, source: &str, bytes: &[u8]) -> Result<(), PersistError> {
        let path = journal_path(&self.dir, source);
        if !state.files.contains_key(source) {
            let f = OpenOptions::new().create(true).append(true).open(&path).map_err(io_err(&path))?;
            state.files.insert(source.to_string(), f);
        }
        let f = state.files.get_mut(source).expect("opened above");
        f.write_all(bytes).map_err(io_err(&path))?;
        f.flush().map_err(io_err(&path))?;
        if self.options.fsync {
            f.sync_data().map_err(io_err(&path))?;
        }
        Ok(())
    }
}

/// A store attached to a database directory.
pub struct Persistence {
    store: Store,
    shared: Arc<Shared>,
    monitor: Option<MonitorId>,
    report: Vec<SourceReport>,
}

impl Persistence {
    pub fn attach(store: &Store, dir: impl AsRef<Path>) -> Result<Persistence, PersistError> {
        Persistence::attach_with(store, dir, PersistOptions::default())
    }

    /// Loads every source in `dir` into `store`, replaying each journalled
    /// transaction as one store transaction, then starts journalling.
    pub fn attach_with(
        store: &Store,
        dir: impl AsRef<Path>,
        options: PersistOptions,
    ) -> Result<Persistence, PersistError> {
        let dir = dir.as_ref().to_path_buf();
        if !dir.is_dir() {
            return Err(PersistError::Io {
                path: dir,
                source: io::Error::new(io::ErrorKind::NotFound, "database directory does not exist"),
            });
        }
        let mut report = Vec::new();
        let mut last_id = 0;
        for source in sources_in(&dir)? {
            let snap_path = snapshot_path(&dir, &source);
            let jrn_path = journal_path(&dir, &source);
            let snap = read_snapshot(&snap_path, &source)?;
            let journal = read_journal_file(&jrn_path)?;
            let snapshot_triples = snap.as_ref().map_or(0, |b| b.triples.len());
            if let Some(bulk) = snap {
                store.transaction(|txn| {
                    txn.begin_load(&source)?;
                    txn.bulk_load(bulk)?;
                    txn.end_load(&source)
                })?;
            }
            for records in &journal.transactions {
                store.transaction(|txn| replay(txn, &source, records))?;
            }
            if journal.partial {
                log::warn!("{}: ignoring incomplete trailing transaction", jrn_path.display());
            }
            last_id = last_id.max(journal.last_id);
            report.push(SourceReport {
                source,
                snapshot_triples,
                journal_transactions: journal.transactions.len(),
                partial: journal.partial,
            });
        }

        let shared = Arc::new(Shared {
            dir,
            options,
            state: Mutex::new(JournalState {
                files: BTreeMap::new(),
                pending: BTreeMap::new(),
                next_id: last_id + 1,
                last_error: None,
            }),
        });
        let sink = shared.clone();
        let mask = EventMask::TRANSACTION | EventMask::ASSERT | EventMask::RETRACT | EventMask::UPDATE;
        let monitor = store.monitor(mask, move |event, _| {
            sink.on_event(event).map_err(|e| {
                sink.state.lock().last_error = Some(e.to_string());
                Box::new(e) as _
            })
        });
        Ok(Persistence { store: store.clone(), shared, monitor: Some(monitor), report })
    }

    pub fn directory(&self) -> &Path {
        &self.shared.dir
    }

    pub fn is_attached(&self) -> bool {
        self.monitor.is_some()
    }

    /// Per-source summary of what attach loaded.
    pub fn report(&self) -> &[SourceReport] {
        &self.report
    }

    /// The most recent journal write failure, cleared on read.
    pub fn take_error(&self) -> Option<String> {
        self.shared.state.lock().last_error.take()
    }

    /// Writes a snapshot of `source` and empties its journal. Runs with
    /// writers excluded so no commit falls between the two steps.
    pub fn save_snapshot(&self, source: &str) -> Result<(), PersistError> {
        if !self.is_attached() {
            return Err(PersistError::Detached);
        }
        let dir = &self.shared.dir;
        self.store.transaction(|_| {
            let triples: Vec<StoredTriple> = {
                let view = self.store.read();
                let found = view.match_pattern(&Pattern::any().source(source))?.collect();
                found
            };
            let bytes = encode_snapshot(source, &triples);
            let path = snapshot_path(dir, source);
            let tmp = path.with_extension(format!("{SNAPSHOT_EXT}.tmp"));
            {
                let mut f = File::create(&tmp).map_err(io_err(&tmp))?;
                f.write_all(&bytes).map_err(io_err(&tmp))?;
                if self.shared.options.fsync {
                    f.sync_all().map_err(io_err(&tmp))?;
                }
            }
            fs::rename(&tmp, &path).map_err(io_err(&path))?;
            if self.shared.options.fsync {
                if let Ok(d) = File::open(dir) {
                    let _ = d.sync_all();
                }
            }
            let jrn = journal_path(dir, source);
            let state = self.shared.state.lock();
            match state.files.get(source) {
                Some(f) => f.set_len(0).map_err(io_err(&jrn))?,
                None => match fs::remove_file(&jrn) {
                    Err(e) if e.kind() != io::ErrorKind::NotFound => return Err(io_err(&jrn)(e)),
                    _ => {}
                },
            }
            Ok(())
        })
    }

    /// Snapshots every source in the store or on disk.
    pub fn save_all(&self) -> Result<(), PersistError> {
        let mut sources: BTreeSet<String> = self.store.read().sources().into_iter().map(|(s, _)| s).collect();
        sources.extend(sources_in(&self.shared.dir)?);
        for s in sources {
            self.save_snapshot(&s)?;
        }
        Ok(())
    }

    /// Stops journalling and closes the journal files. The store stays
    /// usable in memory. A second call does nothing.
    pub fn detach(&mut self) {
        if let Some(id) = self.monitor.take() {
            self.store.unmonitor(id);
            let mut state = self.shared.state.lock();
            for f in state.files.values_mut() {
                let _ = f.flush();
            }
            state.files.clear();
        }
    }
}

impl Drop for Persistence {
    fn drop(&mut self) {
        self.detach();
    }
}

#[cfg(test)]
mod tests;
