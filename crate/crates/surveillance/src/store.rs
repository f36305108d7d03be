use std::collections::HashSet;
use std::fs::{self, File, OpenOptions};
use std::io::{Read, Seek, SeekFrom, Write};
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex, RwLock};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};

use crate::report::{RejectReason, SurveillanceReport};
use crate::SurveillanceError;

pub const LOG_FORMAT_VERSION: u32 = 1;
pub const LOG_FILE_NAME: &str = "reports.ndjson";
const SEGMENT_LEN: usize = 1024;

pub type Clock = Arc<dyn Fn() -> i64 + Send + Sync>;

pub fn system_clock() -> Clock {
    Arc::new(|| SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs() as i64).unwrap_or(0))
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct LogRecord {
    v: u32,
    seq: u64,
    report: SurveillanceReport,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum IngestOutcome {
    Accepted { seq: u64 },
    /// Same `(app_uid, timestamp)` as an earlier report; not counted again.
    Duplicate,
    Rejected { reason: RejectReason },
}

/// Immutable view of every accepted report at some point in time.
#[derive(Clone, Debug, Default)]
pub struct Snapshot {
    sealed: Vec<Arc<[SurveillanceReport]>>,
    tail: Arc<[SurveillanceReport]>,
}

impl Snapshot {
    pub fn len(&self) -> usize {
        self.sealed.iter().map(|s| s.len()).sum::<usize>() + self.tail.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Reports in ingestion order.
    pub fn iter(&self) -> impl Iterator<Item = &SurveillanceReport> + Clone {
        self.sealed.iter().flat_map(|s| s.iter()).chain(self.tail.iter())
    }

    /// Reports carrying `uid`, oldest first.
    pub fn trajectory(&self, uid: &str) -> Vec<SurveillanceReport> {
        let mut out: Vec<SurveillanceReport> =
            self.iter().filter(|r| r.app_uid.as_deref() == Some(uid)).cloned().collect();
        out.sort_by_key(|r| r.timestamp);
        out
    }
}

struct Writer {
    file: File,
    next_seq: u64,
    seen: HashSet<(String, i64)>,
    sealed: Vec<Arc<[SurveillanceReport]>>,
    tail: Vec<SurveillanceReport>,
}

impl Writer {
    fn push(&mut self, report: SurveillanceReport) {
        self.tail.push(report);
        if self.tail.len() == SEGMENT_LEN {
            self.sealed.push(std::mem::take(&mut self.tail).into());
        }
    }

    fn snapshot(&self) -> Snapshot {
        Snapshot { sealed: self.sealed.clone(), tail: self.tail.as_slice().into() }
    }
}

/// Append-only report log with an in-memory index.
///
/// Appends are serialized through one writer; readers take the latest
/// published [`Snapshot`] and never wait on the log.
pub struct Store {
    path: PathBuf,
    sync: bool,
    clock: Clock,
    writer: Mutex<Writer>,
    snapshot: RwLock<Arc<Snapshot>>,
}

impl Store {
    pub fn open(dir: impl AsRef<Path>) -> Result<Self, SurveillanceError> {
        Self::open_with(dir, system_clock(), false)
    }

    /// `sync` forces every append to stable storage before it is
    /// acknowledged; otherwise appends are flushed to the OS only.
    pub fn open_with(dir: impl AsRef<Path>, clock: Clock, sync: bool) -> Result<Self, SurveillanceError> {
        fs::create_dir_all(dir.as_ref())?;
        let path = dir.as_ref().join(LOG_FILE_NAME);
        let mut file = OpenOptions::new().read(true).write(true).create(true).truncate(false).open(&path)?;
        let mut text = String::new();
        file.read_to_string(&mut text)?;

        let mut writer = Writer { file, next_seq: 0, seen: HashSet::new(), sealed: Vec::new(), tail: Vec::new() };
        let mut good_len = 0usize;
        for (lineno, line) in text.split_inclusive('\n').enumerate() {
            if !line.ends_with('\n') {
                // Torn final write: drop it.
                break;
            }
            let record: LogRecord = serde_json::from_str(line.trim_end()).map_err(|e| SurveillanceError::Corrupt {
                line: lineno + 1,
                detail: e.to_string(),
            })?;
            if record.v != LOG_FORMAT_VERSION {
                return Err(SurveillanceError::Corrupt {
                    line: lineno + 1,
                    detail: format!("unsupported record version {}", record.v),
                });
            }
            good_len += line.len();
            writer.next_seq = writer.next_seq.max(record.seq + 1);
            if let Some(uid) = &record.report.app_uid {
                if !writer.seen.insert((uid.clone(), record.report.timestamp)) {
                    continue;
                }
            }
            writer.push(record.report);
        }
        if good_len < text.len() {
            writer.file.set_len(good_len as u64)?;
        }
        writer.file.seek(SeekFrom::End(0))?;

        let snapshot = RwLock::new(Arc::new(writer.snapshot()));
        Ok(Store { path, sync, clock, writer: Mutex::new(writer), snapshot })
    }

    pub fn log_path(&self) -> &Path {
        &self.path
    }

    pub fn now(&self) -> i64 {
        (self.clock)()
    }

    pub fn snapshot(&self) -> Arc<Snapshot> {
        self.snapshot.read().expect("snapshot lock").clone()
    }

    pub fn ingest(&self, report: SurveillanceReport) -> Result<IngestOutcome, SurveillanceError> {
        Ok(self.ingest_batch(vec![report])?.pop().expect("one outcome per report"))
    }

    /// Validates, logs and indexes a batch, publishing one new snapshot at
    /// the end.
    pub fn ingest_batch(&self, reports: Vec<SurveillanceReport>) -> Result<Vec<IngestOutcome>, SurveillanceError> {
        let now = self.now();
        let mut w = self.writer.lock().expect("writer lock");
        let mut outcomes = Vec::with_capacity(reports.len());
        let mut changed = false;
        for report in reports {
            if let Err(reason) = report.validate(now) {
                outcomes.push(IngestOutcome::Rejected { reason });
                continue;
            }
            if let Some(uid) = &report.app_uid {
                if w.seen.contains(&(uid.clone(), report.timestamp)) {
                    outcomes.push(IngestOutcome::Duplicate);
                    continue;
                }
            }
            let seq = w.next_seq;
            let record = LogRecord { v: LOG_FORMAT_VERSION, seq, report };
            let mut line = serde_json::to_string(&record).expect("reports serialize");
            line.push('\n');
            w.file.write_all(line.as_bytes())?;
            w.file.flush()?;
            if self.sync {
                w.file.sync_data()?;
            }
            let report = record.report;
            if let Some(uid) = &report.app_uid {
                w.seen.insert((uid.clone(), report.timestamp));
            }
            w.next_seq += 1;
            w.push(report);
            changed = true;
            outcomes.push(IngestOutcome::Accepted { seq });
        }
        if changed {
            *self.snapshot.write().expect("snapshot lock") = Arc::new(w.snapshot());
        }
        Ok(outcomes)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::report::AgeGroup;

    fn fixed_clock() -> Clock {
        Arc::new(|| 1_000_000)
    }

    fn report(uid: Option<&str>, t: i64) -> SurveillanceReport {
        SurveillanceReport {
            p_covid: 0.25,
            latitude: 1.0,
            longitude: 2.0,
            age_group: AgeGroup::Over65,
            timestamp: t,
            app_uid: uid.map(String::from),
        }
    }

    #[test]
    fn duplicates_and_rejections() {
        let dir = tempfile::tempdir().unwrap();
        let store = Store::open_with(dir.path(), fixed_clock(), false).unwrap();
        assert_eq!(store.ingest(report(Some("a"), 5)).unwrap(), IngestOutcome::Accepted { seq: 0 });
        assert_eq!(store.ingest(report(Some("a"), 5)).unwrap(), IngestOutcome::Duplicate);
        assert_eq!(store.ingest(report(None, 5)).unwrap(), IngestOutcome::Accepted { seq: 1 });
        assert_eq!(store.ingest(report(None, 5)).unwrap(), IngestOutcome::Accepted { seq: 2 });
        let future = report(None, 1_000_000 + 2 * 86_400);
        assert_eq!(
            store.ingest(future).unwrap(),
            IngestOutcome::Rejected { reason: RejectReason::FutureTimestamp }
        );
        assert_eq!(store.snapshot().len(), 3);
    }

    #[test]
    fn replay_restores_state_and_drops_torn_tail() {
        let dir = tempfile::tempdir().unwrap();
        {
            let store = Store::open_with(dir.path(), fixed_clock(), false).unwrap();
            for t in 0..3000 {
                store.ingest(report(Some("u"), t)).unwrap();
            }
        }
        let path = dir.path().join(LOG_FILE_NAME);
        let mut f = OpenOptions::new().append(true).open(&path).unwrap();
        f.write_all(br#"{"v":1,"seq":3000,"rep"#).unwrap();
        drop(f);

        let store = Store::open_with(dir.path(), fixed_clock(), false).unwrap();
        assert_eq!(store.snapshot().len(), 3000);
        assert_eq!(store.ingest(report(Some("u"), 10)).unwrap(), IngestOutcome::Duplicate);
        assert_eq!(store.ingest(report(Some("u"), 3000)).unwrap(), IngestOutcome::Accepted { seq: 3000 });
        drop(store);
        let again = Store::open_with(dir.path(), fixed_clock(), false).unwrap();
        assert_eq!(again.snapshot().len(), 3001);
        let traj = again.snapshot().trajectory("u");
        assert!(traj.windows(2).all(|w| w[0].timestamp <= w[1].timestamp));
    }

    #[test]
    fn corrupt_middle_line_is_an_error() {
        let dir = tempfile::tempdir().unwrap();
        fs::write(dir.path().join(LOG_FILE_NAME), "not json\n").unwrap();
        assert!(matches!(Store::open(dir.path()), Err(SurveillanceError::Corrupt { line: 1, .. })));
    }

    #[test]
    fn old_snapshots_stay_unchanged() {
        let dir = tempfile::tempdir().unwrap();
        let store = Store::open_with(dir.path(), fixed_clock(), false).unwrap();
        store.ingest(report(None, 1)).unwrap();
        let before = store.snapshot();
        store.ingest(report(None, 2)).unwrap();
        assert_eq!(before.len(), 1);
        assert_eq!(store.snapshot().len(), 2);
    }
}
