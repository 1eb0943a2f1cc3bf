//! Append-only log of finished pages.
//!
//! ```text
//! # wikitables checkpoint v1 snapshot_date=2021-09-13
//! 42 3 done 1c291ca3
//! 43 0 missing 9a0e1f07
//! ```
//!
//! Record fields are separated by tabs.
//! Every record carries a CRC-32 of the text before it. A final line that is cut
//! short or fails its checksum is a torn append and is dropped; anywhere else it
//! means the log is damaged. Header lines may repeat (logs of several chunk runs
//! concatenated) as long as they name the same snapshot date.

use std::collections::BTreeMap;
use std::fmt;
use std::fs::{File, OpenOptions};
use std::io::{Read, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::error::IoContext;
use crate::{Error, Result};

const HEADER_PREFIX: &str = "# wikitables checkpoint v1 snapshot_date=";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PageStatus {
    Done,
    Missing,
    ParseError,
}

impl fmt::Display for PageStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PageStatus::Done => "done",
            PageStatus::Missing => "missing",
            PageStatus::ParseError => "parse_error",
        })
    }
}

impl FromStr for PageStatus {
    type Err = ();

    fn from_str(s: &str) -> std::result::Result<Self, ()> {
        match s {
            "done" => Ok(PageStatus::Done),
            "missing" => Ok(PageStatus::Missing),
            "parse_error" => Ok(PageStatus::ParseError),
            _ => Err(()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CheckpointRecord {
    pub page_id: u64,
    pub table_count: u32,
    pub status: PageStatus,
}

impl CheckpointRecord {
    pub fn encode(&self) -> String {
        let body = format!("{}\t{}\t{}", self.page_id, self.table_count, self.status);
        let crc = crc32fast::hash(body.as_bytes());
        format!("{body}\t{crc:08x}\n")
    }

    fn decode(line: &str) -> Option<Self> {
        let (body, crc) = line.rsplit_once('\t')?;
        if crc.len() != 8 || u32::from_str_radix(crc, 16).ok()? != crc32fast::hash(body.as_bytes())
        {
            return None;
        }
        let mut f = body.split('\t');
        let rec = CheckpointRecord {
            page_id: f.next()?.parse().ok()?,
            table_count: f.next()?.parse().ok()?,
            status: f.next()?.parse().ok()?,
        };
        f.next().is_none().then_some(rec)
    }
}

fn header_line(date: NaiveDate) -> String {
    format!("{HEADER_PREFIX}{date}\n")
}

/// Parsed contents of a checkpoint log.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Checkpoint {
    /// Last record per page.
    pub records: BTreeMap<u64, CheckpointRecord>,
    pub snapshot_date: Option<NaiveDate>,
    /// Length of the valid prefix; anything after it is a torn tail.
    pub valid_len: u64,
    pub torn_tail: bool,
}

impl Checkpoint {
    pub fn contains(&self, page_id: u64) -> bool {
        self.records.contains_key(&page_id)
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Parse a log image. `expected` rejects logs of another snapshot.
    pub fn parse(bytes: &[u8], path: &Path, expected: Option<NaiveDate>) -> Result<Self> {
        let mut cp = Checkpoint::default();
        let corrupt = |line: usize, reason: String| Error::CheckpointCorrupt {
            path: path.to_path_buf(),
            line,
            reason,
        };
        let mut pos = 0usize;
        let mut lineno = 0usize;
        while pos < bytes.len() {
            lineno += 1;
            let Some(nl) = bytes[pos..].iter().position(|&b| b == b'\n') else {
                cp.torn_tail = true;
                break;
            };
            let end = pos + nl + 1;
            let is_last = end == bytes.len();
            let line = std::str::from_utf8(&bytes[pos..end - 1]);
            let parsed = match line {
                Ok(l) if l.starts_with(HEADER_PREFIX) => {
                    match NaiveDate::parse_from_str(&l[HEADER_PREFIX.len()..], "%Y-%m-%d") {
                        Ok(date) => {
                            if let Some(exp) = expected {
                                if exp != date {
                                    return Err(Error::CorpusMismatch {
                                        root: path.to_path_buf(),
                                        reason: format!(
                                            "checkpoint is for snapshot {date}, job is for {exp}"
                                        ),
                                    });
                                }
                            }
                            if let Some(prev) = cp.snapshot_date {
                                if prev != date {
                                    return Err(corrupt(
                                        lineno,
                                        format!("mixes snapshots {prev} and {date}"),
                                    ));
                                }
                            }
                            cp.snapshot_date = Some(date);
                            true
                        }
                        Err(_) => false,
                    }
                }
                Ok(l) => match CheckpointRecord::decode(l) {
                    Some(rec) => {
                        cp.records.insert(rec.page_id, rec);
                        true
                    }
                    None => false,
                },
                Err(_) => false,
            };
            if !parsed {
                if is_last {
                    cp.torn_tail = true;
                    break;
                }
                return Err(corrupt(lineno, "bad record or checksum".into()));
            }
            pos = end;
        }
        cp.valid_len = pos as u64;
        Ok(cp)
    }
}

/// Read the checkpoint at `path`; a missing file is an empty checkpoint.
pub fn load_checkpoint(path: &Path, expected: Option<NaiveDate>) -> Result<Checkpoint> {
    match std::fs::read(path) {
        Ok(bytes) => Checkpoint::parse(&bytes, path, expected),
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(Checkpoint::default()),
        Err(e) => Err(Error::io(format!("reading {}", path.display()), e)),
    }
}

/// Single writer appending to the log. Each append is flushed and synced before it
/// returns.
pub struct CheckpointLog {
    path: PathBuf,
    file: File,
}

impl CheckpointLog {
    /// Open for appending, creating the file with a header when needed and cutting
    /// off a torn tail left by an interrupted append.
    pub fn open(path: &Path, snapshot_date: NaiveDate) -> Result<(Self, Checkpoint)> {
        let mut bytes = Vec::new();
        match File::open(path) {
            Ok(mut f) => {
                f.read_to_end(&mut bytes)
                    .ctx(|| format!("reading {}", path.display()))?;
            }
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => {}
            Err(e) => return Err(Error::io(format!("opening {}", path.display()), e)),
        }
        let mut cp = Checkpoint::parse(&bytes, path, Some(snapshot_date))?;
        let file = OpenOptions::new()
            .create(true)
            .append(true)
            .open(path)
            .ctx(|| format!("opening {}", path.display()))?;
        if cp.torn_tail {
            log::warn!(
                "{}: dropping torn tail of {} bytes",
                path.display(),
                bytes.len() as u64 - cp.valid_len
            );
            file.set_len(cp.valid_len)
                .ctx(|| format!("truncating {}", path.display()))?;
        }
        let mut log = CheckpointLog {
            path: path.to_path_buf(),
            file,
        };
        if cp.snapshot_date.is_none() {
            log.write_raw(header_line(snapshot_date).as_bytes())?;
            cp.snapshot_date = Some(snapshot_date);
        }
        cp.torn_tail = false;
        Ok((log, cp))
    }

    fn write_raw(&mut self, bytes: &[u8]) -> Result<()> {
        let ctx = || format!("appending to {}", self.path.display());
        self.file.write_all(bytes).ctx(ctx)?;
        self.file.flush().ctx(ctx)?;
        self.file.sync_data().ctx(ctx)
    }

    pub fn append(&mut self, rec: CheckpointRecord) -> Result<()> {
        self.write_raw(rec.encode().as_bytes())
    }

    /// Write only the first `keep` bytes of a record, as a crash mid-append would.
    #[doc(hidden)]
    pub fn append_torn(&mut self, rec: CheckpointRecord, keep: usize) -> Result<()> {
        let line = rec.encode();
        self.write_raw(&line.as_bytes()[..keep.min(line.len() - 1)])
    }
}
