use std::collections::BTreeMap;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::FormatError;

const STANDARD_MAP: &str = include_str!("../../data/cwe_map.tsv");

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BugFamily {
    DataType,
    Pointer,
    Conditional,
    VarMisuse,
    ValueMisuse,
    CallMutation,
}

impl BugFamily {
    pub const ALL: [BugFamily; 6] = [
        BugFamily::DataType,
        BugFamily::Pointer,
        BugFamily::Conditional,
        BugFamily::VarMisuse,
        BugFamily::ValueMisuse,
        BugFamily::CallMutation,
    ];

    pub fn label(self) -> &'static str {
        match self {
            BugFamily::DataType => "data_type",
            BugFamily::Pointer => "pointer",
            BugFamily::Conditional => "conditional",
            BugFamily::VarMisuse => "var_misuse",
            BugFamily::ValueMisuse => "value_misuse",
            BugFamily::CallMutation => "call_mutation",
        }
    }
}

impl FromStr for BugFamily {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        BugFamily::ALL
            .into_iter()
            .find(|f| f.label() == s)
            .ok_or_else(|| format!("unknown bug family `{s}`"))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BugTag {
    pub family: BugFamily,
    #[serde(rename = "cwes")]
    pub cwe_ids: Vec<String>,
}

/// Bug family to CWE ids, read from a tab-separated data file.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CweMap {
    rows: BTreeMap<BugFamily, Vec<String>>,
}

impl CweMap {
    /// The map shipped with the crate.
    pub fn standard() -> Self {
        Self::parse(STANDARD_MAP).expect("bundled CWE map is well formed")
    }

    /// Parse `family<TAB>CWE-a,CWE-b` lines; `#` starts a comment line.
    /// Every family must have a non-empty row.
    pub fn parse(text: &str) -> Result<Self, FormatError> {
        let mut rows = BTreeMap::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let err = |message: String| FormatError {
                line: i + 1,
                message,
            };
            let (family, ids) = line
                .split_once('\t')
                .ok_or_else(|| err("expected `family<TAB>ids`".into()))?;
            let family: BugFamily = family.parse().map_err(err)?;
            let ids: Vec<String> = ids.split(',').map(|s| s.trim().to_owned()).collect();
            if ids.iter().any(|id| !is_cwe_id(id)) {
                return Err(err(format!("malformed CWE id in `{line}`")));
            }
            if rows.insert(family, ids).is_some() {
                return Err(err(format!("duplicate row for {}", family.label())));
            }
        }
        if let Some(missing) = BugFamily::ALL.iter().find(|f| !rows.contains_key(f)) {
            return Err(FormatError {
                line: 0,
                message: format!("no row for {}", missing.label()),
            });
        }
        Ok(Self { rows })
    }

    pub fn cwes(&self, family: BugFamily) -> &[String] {
        &self.rows[&family]
    }

    pub fn tag(&self, family: BugFamily) -> BugTag {
        BugTag {
            family,
            cwe_ids: self.cwes(family).to_vec(),
        }
    }
}

fn is_cwe_id(id: &str) -> bool {
    id.strip_prefix("CWE-")
        .is_some_and(|n| !n.is_empty() && n.bytes().all(|b| b.is_ascii_digit()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bundled_map_matches_the_family_table() {
        let expected: [(BugFamily, &[u32]); 6] = [
            (BugFamily::DataType, &[190, 191, 680, 686, 704, 843]),
            (BugFamily::Pointer, &[476, 824, 825]),
            (
                BugFamily::Conditional,
                &[120, 121, 122, 124, 125, 126, 129, 787, 788, 823],
            ),
            (BugFamily::VarMisuse, &[688]),
            (BugFamily::ValueMisuse, &[369, 456, 457, 908]),
            (BugFamily::CallMutation, &[683, 685, 686, 687, 688]),
        ];
        let map = CweMap::standard();
        for (family, ids) in expected {
            let want: Vec<String> = ids.iter().map(|n| format!("CWE-{n}")).collect();
            assert_eq!(map.cwes(family), want.as_slice(), "{family:?}");
        }
    }

    #[test]
    fn malformed_maps_are_rejected() {
        assert!(CweMap::parse("data_type\tCWE-190").is_err());
        assert!(CweMap::parse(&STANDARD_MAP.replace("CWE-476", "476")).is_err());
        assert!(CweMap::parse(&format!("{STANDARD_MAP}pointer\tCWE-1\n")).is_err());
    }

    #[test]
    fn family_labels_round_trip() {
        for f in BugFamily::ALL {
            assert_eq!(f.label().parse::<BugFamily>(), Ok(f));
        }
    }
}
