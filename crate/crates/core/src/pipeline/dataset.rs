use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::mask::MaskPlan;
use super::{Encoded, SkipReason, Triplet};
use crate::error::DatasetError;
use crate::transform::{AppliedTransform, BugFamily, BugTag, TransformKind};

/// One triplet member as stored on disk.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Member {
    pub text: String,
    pub code_ids: Vec<u32>,
    pub type_ids: Vec<u32>,
    pub token_of: Vec<i32>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub transforms: Vec<AppliedTransform>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bug: Option<BugTag>,
}

impl Member {
    fn from_encoded(e: &Encoded) -> Self {
        Self {
            text: e.unit.text.clone(),
            code_ids: e.code.ids.clone(),
            type_ids: e.types.ids.clone(),
            token_of: e.code.token_of.clone(),
            transforms: Vec::new(),
            bug: None,
        }
    }
}

/// A triplet plus the mask plan of its original, self-contained.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetRecord {
    pub id: String,
    pub seed: u64,
    pub x: Member,
    pub x_pos: Member,
    pub x_neg: Member,
    pub mask: MaskPlan,
}

impl DatasetRecord {
    pub fn new(t: &Triplet, mask: MaskPlan) -> Self {
        let x_pos = Member {
            transforms: t.positive.clone(),
            ..Member::from_encoded(&t.x_pos)
        };
        let x_neg = Member {
            transforms: t.negative.clone(),
            bug: Some(t.bug.clone()),
            ..Member::from_encoded(&t.x_neg)
        };
        Self {
            id: t.x.unit.id.clone(),
            seed: t.seed,
            x: Member::from_encoded(&t.x),
            x_pos,
            x_neg,
            mask,
        }
    }

    pub fn members(&self) -> [&Member; 3] {
        [&self.x, &self.x_pos, &self.x_neg]
    }
}

/// Counts for one augmentation run.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunStats {
    pub ingested: usize,
    pub emitted: usize,
    pub skipped: BTreeMap<String, usize>,
    pub transform_kinds: BTreeMap<String, usize>,
    pub bug_families: BTreeMap<String, usize>,
    pub io_errors: usize,
}

impl Default for RunStats {
    fn default() -> Self {
        let zeroed = |labels: Vec<&str>| labels.into_iter().map(|l| (l.to_owned(), 0)).collect();
        Self {
            ingested: 0,
            emitted: 0,
            skipped: zeroed(SkipReason::ALL.iter().map(|r| r.label()).collect()),
            transform_kinds: zeroed(TransformKind::ALL.iter().map(|k| k.label()).collect()),
            bug_families: zeroed(BugFamily::ALL.iter().map(|f| f.label()).collect()),
            io_errors: 0,
        }
    }
}

impl RunStats {
    pub fn skipped_total(&self) -> usize {
        self.skipped.values().sum()
    }

    pub fn count_skip(&mut self, reason: SkipReason) {
        *self.skipped.entry(reason.label().to_owned()).or_default() += 1;
    }

    pub fn count_record(&mut self, r: &DatasetRecord) {
        self.emitted += 1;
        for t in r.x_pos.transforms.iter().chain(&r.x_neg.transforms) {
            *self.transform_kinds.entry(t.kind.label().to_owned()).or_default() += 1;
        }
        if let Some(bug) = &r.x_neg.bug {
            *self.bug_families.entry(bug.family.label().to_owned()).or_default() += 1;
        }
    }
}

/// Write records as JSON lines. The returned stats count the records only;
/// skips are the caller's to add.
pub fn emit_dataset(records: &[DatasetRecord], out: &Path) -> Result<RunStats, DatasetError> {
    let io = |source| DatasetError::Io {
        path: out.display().to_string(),
        source,
    };
    let mut w = BufWriter::new(File::create(out).map_err(io)?);
    let mut stats = RunStats::default();
    for r in records {
        let line = serde_json::to_string(r).expect("records serialize");
        writeln!(w, "{line}").map_err(io)?;
        stats.count_record(r);
    }
    w.flush().map_err(io)?;
    Ok(stats)
}

pub fn load_dataset(path: &Path) -> Result<Vec<DatasetRecord>, DatasetError> {
    let io = |source| DatasetError::Io {
        path: path.display().to_string(),
        source,
    };
    let reader = BufReader::new(File::open(path).map_err(io)?);
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line.map_err(io)?;
        if line.trim().is_empty() {
            continue;
        }
        let r = serde_json::from_str(&line).map_err(|source| DatasetError::Json {
            line: i + 1,
            source,
        })?;
        out.push(r);
    }
    Ok(out)
}
