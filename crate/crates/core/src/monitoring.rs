//! Snapshot history and trend reports.
//!
//! Each scope has one append-only store file holding one JSON record per line.
//! A record carries the assessment input it was computed from, so every read
//! re-checks the input digest and recomputes the result. A line without its
//! trailing newline is an interrupted append: readers skip it and the next
//! writer truncates it away.

use std::fs::{self, File, OpenOptions};
use std::io::{Read, Seek, SeekFrom, Write};
use std::path::{Path, PathBuf};

use chrono::{DateTime, SecondsFormat, Utc};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::assessment::{assess, Aspect, AssessmentInput, AssessmentResult};
use crate::error::{Error, Result};
use crate::taxonomy::CharacteristicId;

pub const STORE_SCHEMA_VERSION: u32 = 1;

/// Largest allowed difference between a stored result and its recomputation.
pub const RECOMPUTE_TOLERANCE: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Snapshot {
    pub scope_id: String,
    pub characteristic: CharacteristicId,
    pub taken_at: DateTime<Utc>,
    /// Hex SHA-256 of the JSON encoding of the input.
    pub input_digest: String,
    pub result: AssessmentResult,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StoredSnapshot {
    pub schema_version: u32,
    #[serde(flatten)]
    pub snapshot: Snapshot,
    pub input: AssessmentInput,
}

pub fn input_digest(input: &AssessmentInput) -> String {
    let bytes = serde_json::to_vec(input).expect("assessment inputs always serialize");
    Sha256::digest(&bytes)
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

fn same(a: f64, b: f64) -> bool {
    (a - b).abs() <= RECOMPUTE_TOLERANCE
}

impl StoredSnapshot {
    /// Checks the digest and that the stored result matches a fresh assessment.
    pub fn verify(&self) -> std::result::Result<(), String> {
        if self.schema_version != STORE_SCHEMA_VERSION {
            return Err(format!("unsupported schema version {}", self.schema_version));
        }
        if self.input.characteristic != self.snapshot.characteristic {
            return Err("input characteristic differs from the snapshot's".into());
        }
        if input_digest(&self.input) != self.snapshot.input_digest {
            return Err("input digest mismatch".into());
        }
        let fresh = assess(&self.input).map_err(|e| e.to_string())?;
        let stored = self.snapshot.result;
        if Aspect::ALL
            .into_iter()
            .all(|a| same(fresh.get(a), stored.get(a)))
        {
            Ok(())
        } else {
            Err(format!("stored result {stored:?} differs from recomputed {fresh:?}"))
        }
    }
}

/// Append-only snapshot file.
#[derive(Clone, Debug)]
pub struct SnapshotStore {
    path: PathBuf,
}

impl SnapshotStore {
    pub fn new(path: impl Into<PathBuf>) -> Self {
        SnapshotStore { path: path.into() }
    }

    /// Conventional location of a scope's store under a data directory.
    pub fn for_scope(home: &Path, scope_id: &str) -> Self {
        SnapshotStore::new(home.join("snapshots").join(format!("{scope_id}.jsonl")))
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    /// Every complete, verified record in append order. A missing file is an empty store.
    pub fn read_all(&self) -> Result<Vec<StoredSnapshot>> {
        let text = match fs::read_to_string(&self.path) {
            Ok(t) => t,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(Vec::new()),
            Err(e) => return Err(e.into()),
        };
        parse_records(&text)
    }

    pub fn read_stream(
        &self,
        scope_id: &str,
        characteristic: CharacteristicId,
    ) -> Result<Vec<StoredSnapshot>> {
        Ok(self
            .read_all()?
            .into_iter()
            .filter(|r| r.snapshot.scope_id == scope_id && r.snapshot.characteristic == characteristic)
            .collect())
    }

    /// Appends one record under an exclusive lock on the store file.
    fn append(&self, record: &StoredSnapshot) -> Result<()> {
        if let Some(dir) = self.path.parent().filter(|d| !d.as_os_str().is_empty()) {
            fs::create_dir_all(dir)?;
        }
        let mut file = OpenOptions::new()
            .read(true)
            .append(true)
            .create(true)
            .open(&self.path)?;
        file.lock()?;
        let result = self.append_locked(&mut file, record);
        file.unlock()?;
        result
    }

    fn append_locked(&self, file: &mut File, record: &StoredSnapshot) -> Result<()> {
        let mut text = String::new();
        file.seek(SeekFrom::Start(0))?;
        file.read_to_string(&mut text)?;
        let complete = text.rfind('\n').map_or(0, |i| i + 1);
        if complete < text.len() {
            file.set_len(complete as u64)?;
        }

        let snap = &record.snapshot;
        let previous = parse_records(&text[..complete])?
            .into_iter()
            .rev()
            .find(|r| {
                r.snapshot.scope_id == snap.scope_id
                    && r.snapshot.characteristic == snap.characteristic
            });
        if let Some(prev) = previous {
            if snap.taken_at <= prev.snapshot.taken_at {
                return Err(Error::Ordering {
                    taken_at: format_timestamp(&snap.taken_at),
                    previous: format_timestamp(&prev.snapshot.taken_at),
                });
            }
        }

        let mut line = serde_json::to_string(record)
            .map_err(|e| Error::invalid("snapshot", e.to_string()))?;
        line.push('\n');
        file.write_all(line.as_bytes())?;
        file.sync_data()?;
        Ok(())
    }
}

fn parse_records(text: &str) -> Result<Vec<StoredSnapshot>> {
    let complete = text.rfind('\n').map_or("", |i| &text[..i]);
    complete
        .split('\n')
        .enumerate()
        .filter(|(_, line)| !line.trim().is_empty())
        .map(|(i, line)| {
            let corrupt = |reason: String| Error::CorruptRecord { line: i + 1, reason };
            let record: StoredSnapshot =
                serde_json::from_str(line).map_err(|e| corrupt(e.to_string()))?;
            record.verify().map_err(corrupt)?;
            Ok(record)
        })
        .collect()
}

/// Assesses `input` and appends the snapshot to `store`.
///
/// `taken_at` defaults to now and must be later than the stream's last snapshot.
pub fn record_snapshot(
    store: &SnapshotStore,
    scope_id: &str,
    characteristic: CharacteristicId,
    input: &AssessmentInput,
    label: Option<String>,
    taken_at: Option<DateTime<Utc>>,
) -> Result<Snapshot> {
    if input.characteristic != characteristic {
        return Err(Error::invalid(
            "characteristic",
            format!("input assesses {} but the snapshot is for {characteristic}", input.characteristic),
        ));
    }
    let result = assess(input)?;
    let record = StoredSnapshot {
        schema_version: STORE_SCHEMA_VERSION,
        snapshot: Snapshot {
            scope_id: scope_id.to_string(),
            characteristic,
            taken_at: taken_at.unwrap_or_else(Utc::now),
            input_digest: input_digest(input),
            result,
            label,
        },
        input: input.clone(),
    };
    store.append(&record)?;
    Ok(record.snapshot)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrendPoint {
    pub taken_at: DateTime<Utc>,
    pub qp: f64,
    pub dc: f64,
    pub po: f64,
    pub ratqual: f64,
}

impl TrendPoint {
    fn get(&self, aspect: Aspect) -> f64 {
        match aspect {
            Aspect::Qp => self.qp,
            Aspect::Dc => self.dc,
            Aspect::Po => self.po,
            Aspect::RatQual => self.ratqual,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct AspectDeltas {
    pub qp: f64,
    pub dc: f64,
    pub po: f64,
    pub ratqual: f64,
}

/// A decrease of one aspect between two consecutive snapshots.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Regression {
    pub aspect: Aspect,
    pub from: DateTime<Utc>,
    pub to: DateTime<Utc>,
    pub before: f64,
    pub after: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrendReport {
    pub scope_id: String,
    pub characteristic: CharacteristicId,
    pub series: Vec<TrendPoint>,
    /// Last minus first value of each aspect; zero with fewer than two points.
    pub deltas: AspectDeltas,
    pub flags: Vec<Regression>,
}

impl TrendReport {
    pub fn from_series(
        scope_id: &str,
        characteristic: CharacteristicId,
        mut series: Vec<TrendPoint>,
    ) -> Self {
        series.sort_by_key(|p| p.taken_at);
        let deltas = match (series.first(), series.last()) {
            (Some(first), Some(last)) => AspectDeltas {
                qp: last.qp - first.qp,
                dc: last.dc - first.dc,
                po: last.po - first.po,
                ratqual: last.ratqual - first.ratqual,
            },
            _ => AspectDeltas::default(),
        };
        let flags = series
            .windows(2)
            .flat_map(|pair| {
                let (a, b) = (pair[0], pair[1]);
                Aspect::ALL
                    .into_iter()
                    .filter(move |&aspect| b.get(aspect) < a.get(aspect))
                    .map(move |aspect| Regression {
                        aspect,
                        from: a.taken_at,
                        to: b.taken_at,
                        before: a.get(aspect),
                        after: b.get(aspect),
                    })
            })
            .collect();
        TrendReport {
            scope_id: scope_id.to_string(),
            characteristic,
            series,
            deltas,
            flags,
        }
    }
}

/// Snapshots of one stream within `[from, to]` (both optional, inclusive).
pub fn trend_report(
    store: &SnapshotStore,
    scope_id: &str,
    characteristic: CharacteristicId,
    from: Option<DateTime<Utc>>,
    to: Option<DateTime<Utc>>,
) -> Result<TrendReport> {
    if let (Some(f), Some(t)) = (from, to) {
        if f > t {
            return Err(Error::invalid(
                "window",
                format!(
                    "start {} is after end {}",
                    format_timestamp(&f),
                    format_timestamp(&t)
                ),
            ));
        }
    }
    let series = store
        .read_stream(scope_id, characteristic)?
        .into_iter()
        .map(|r| r.snapshot)
        .filter(|s| from.is_none_or(|f| s.taken_at >= f) && to.is_none_or(|t| s.taken_at <= t))
        .map(|s| TrendPoint {
            taken_at: s.taken_at,
            qp: s.result.qp,
            dc: s.result.dc,
            po: s.result.po,
            ratqual: s.result.ratqual,
        })
        .collect();
    Ok(TrendReport::from_series(scope_id, characteristic, series))
}

pub fn format_timestamp(t: &DateTime<Utc>) -> String {
    t.to_rfc3339_opts(SecondsFormat::AutoSi, true)
}

pub const CSV_HEADER: [&str; 5] = ["taken_at", "qp", "dc", "po", "ratqual"];

/// CSV with a header row and one row per point, numbers at full precision.
pub fn export_csv(report: &TrendReport) -> String {
    let mut writer = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(Vec::new());
    writer.write_record(CSV_HEADER).expect("writing to memory");
    for p in &report.series {
        writer
            .write_record([
                format_timestamp(&p.taken_at),
                p.qp.to_string(),
                p.dc.to_string(),
                p.po.to_string(),
                p.ratqual.to_string(),
            ])
            .expect("writing to memory");
    }
    let bytes = writer.into_inner().expect("writing to memory");
    String::from_utf8(bytes).expect("CSV output is UTF-8")
}

pub fn parse_csv(text: &str) -> Result<Vec<TrendPoint>> {
    let mut reader = csv::Reader::from_reader(text.as_bytes());
    let header = reader
        .headers()
        .map_err(|e| Error::invalid("csv", e.to_string()))?;
    if header.iter().ne(CSV_HEADER) {
        return Err(Error::invalid("csv", format!("unexpected header {header:?}")));
    }
    reader
        .records()
        .enumerate()
        .map(|(i, row)| {
            let row = row.map_err(|e| Error::invalid(format!("csv row {}", i + 1), e.to_string()))?;
            let bad = |what: &str| Error::invalid(format!("csv row {}", i + 1), format!("bad {what}"));
            let num = |k: usize| -> Result<f64> {
                row.get(k)
                    .and_then(|v| v.parse().ok())
                    .ok_or_else(|| bad(CSV_HEADER[k]))
            };
            Ok(TrendPoint {
                taken_at: row
                    .get(0)
                    .and_then(|v| DateTime::parse_from_rfc3339(v).ok())
                    .ok_or_else(|| bad("taken_at"))?
                    .with_timezone(&Utc),
                qp: num(1)?,
                dc: num(2)?,
                po: num(3)?,
                ratqual: num(4)?,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::assessment::{
        AggregationWeights, CompatibilityMatrix, MaturityLevel, OperationalRates, OrgMaturity,
    };

    fn input(ds: f64) -> AssessmentInput {
        AssessmentInput {
            characteristic: CharacteristicId::Security,
            org_maturities: vec![
                OrgMaturity {
                    org_id: "a".into(),
                    characteristic: CharacteristicId::Security,
                    qmml: MaturityLevel::new(3).unwrap(),
                },
                OrgMaturity {
                    org_id: "b".into(),
                    characteristic: CharacteristicId::Security,
                    qmml: MaturityLevel::new(4).unwrap(),
                },
            ],
            matrix: CompatibilityMatrix::compatible(),
            rates: OperationalRates::new(ds, 0.9, 0.8).unwrap(),
            weights: AggregationWeights::default(),
        }
    }

    fn at(s: &str) -> Option<DateTime<Utc>> {
        Some(s.parse().unwrap())
    }

    fn record(store: &SnapshotStore, ds: f64, when: &str) -> Result<Snapshot> {
        record_snapshot(store, "s1", CharacteristicId::Security, &input(ds), None, at(when))
    }

    #[test]
    fn snapshots_append_in_order() {
        let dir = tempfile::tempdir().unwrap();
        let store = SnapshotStore::for_scope(dir.path(), "s1");
        record(&store, 0.5, "2026-01-01T00:00:00Z").unwrap();
        assert_eq!(store.read_all().unwrap().len(), 1);
        record(&store, 0.6, "2026-02-01T00:00:00Z").unwrap();
        let all = store.read_all().unwrap();
        assert_eq!(all.len(), 2);
        assert!(all[0].snapshot.taken_at < all[1].snapshot.taken_at);

        let err = record(&store, 0.7, "2026-02-01T00:00:00Z").unwrap_err();
        assert!(matches!(err, Error::Ordering { .. }), "{err}");
        assert_eq!(store.read_all().unwrap().len(), 2);

        // Streams are independent: another characteristic may go back in time.
        let mut other = input(0.5);
        other.characteristic = CharacteristicId::Compliance;
        for m in &mut other.org_maturities {
            m.characteristic = CharacteristicId::Compliance;
        }
        record_snapshot(&store, "s1", CharacteristicId::Compliance, &other, None, at("2025-01-01T00:00:00Z"))
            .unwrap();
    }

    #[test]
    fn trend_flags_regressions() {
        let dir = tempfile::tempdir().unwrap();
        let store = SnapshotStore::for_scope(dir.path(), "s1");
        let empty = trend_report(&store, "s1", CharacteristicId::Security, None, None).unwrap();
        assert!(empty.series.is_empty());
        assert_eq!(empty.deltas, AspectDeltas::default());
        assert_eq!(export_csv(&empty), "taken_at,qp,dc,po,ratqual\n");

        record(&store, 0.5, "2026-01-01T00:00:00Z").unwrap();
        record(&store, 0.9, "2026-02-01T00:00:00Z").unwrap();
        let up = trend_report(&store, "s1", CharacteristicId::Security, None, None).unwrap();
        assert!(up.flags.is_empty());
        assert!(up.deltas.ratqual > 0.0);
        assert_eq!(up.deltas.qp, 0.0);

        record(&store, 0.4, "2026-03-01T00:00:00Z").unwrap();
        let down = trend_report(&store, "s1", CharacteristicId::Security, at("2026-02-01T00:00:00Z"), None)
            .unwrap();
        assert_eq!(down.series.len(), 2);
        let flagged: Vec<Aspect> = down.flags.iter().map(|f| f.aspect).collect();
        assert_eq!(flagged, [Aspect::Po, Aspect::RatQual]);

        assert!(trend_report(
            &store,
            "s1",
            CharacteristicId::Security,
            at("2026-03-01T00:00:00Z"),
            at("2026-01-01T00:00:00Z")
        )
        .is_err());
    }

    #[test]
    fn report_deltas_from_series() {
        let t = |s: &str| s.parse::<DateTime<Utc>>().unwrap();
        let point = |when: &str, r: f64| TrendPoint {
            taken_at: t(when),
            qp: 0.6,
            dc: 0.5,
            po: 0.5,
            ratqual: r,
        };
        let report = TrendReport::from_series(
            "s",
            CharacteristicId::Security,
            vec![point("2026-01-01T00:00:00Z", 0.5), point("2026-01-02T00:00:00Z", 0.6)],
        );
        assert!((report.deltas.ratqual - 0.1).abs() < 1e-12);
        assert!(report.flags.is_empty());

        let report = TrendReport::from_series(
            "s",
            CharacteristicId::Security,
            vec![point("2026-01-01T00:00:00Z", 0.6), point("2026-01-02T00:00:00Z", 0.5)],
        );
        assert_eq!(report.flags.len(), 1);
        assert_eq!(report.flags[0].aspect, Aspect::RatQual);
    }

    #[test]
    fn csv_round_trips() {
        let dir = tempfile::tempdir().unwrap();
        let store = SnapshotStore::for_scope(dir.path(), "s1");
        record(&store, 0.7, "2026-01-01T10:00:00.123456789Z").unwrap();
        let report = trend_report(&store, "s1", CharacteristicId::Security, None, None).unwrap();
        let csv = export_csv(&report);
        assert_eq!(csv.lines().count(), 2);
        assert_eq!(parse_csv(&csv).unwrap(), report.series);
    }

    #[test]
    fn interrupted_append_is_ignored_and_repaired() {
        let dir = tempfile::tempdir().unwrap();
        let store = SnapshotStore::for_scope(dir.path(), "s1");
        record(&store, 0.5, "2026-01-01T00:00:00Z").unwrap();
        let mut f = OpenOptions::new().append(true).open(store.path()).unwrap();
        f.write_all(b"{\"schema_version\":1,\"scope_id\":\"s1\",\"chara").unwrap();
        drop(f);
        assert_eq!(store.read_all().unwrap().len(), 1);
        record(&store, 0.6, "2026-01-02T00:00:00Z").unwrap();
        assert_eq!(store.read_all().unwrap().len(), 2);
    }

    #[test]
    fn tampered_record_fails_verification() {
        let dir = tempfile::tempdir().unwrap();
        let store = SnapshotStore::for_scope(dir.path(), "s1");
        record(&store, 0.5, "2026-01-01T00:00:00Z").unwrap();
        let text = fs::read_to_string(store.path()).unwrap();
        let tampered = text.replace("\"ds\":0.5", "\"ds\":0.6");
        assert_ne!(text, tampered);
        fs::write(store.path(), tampered).unwrap();
        assert!(matches!(store.read_all(), Err(Error::CorruptRecord { line: 1, .. })));
    }
}
