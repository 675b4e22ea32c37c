//! The Locator: a tabular catalog with one row per data file.
//!
//! Values stored in a row take precedence over whatever the source file's
//! header says; see [`effective_metadata`].

mod io;
mod predicate;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::formats::FormatKind;
use crate::recording::{Event, Unit};

pub use io::{load_locator, save_locator, to_csv_string, HEADERS};
pub use predicate::{CmpOp, Column, Condition, Predicate};

#[derive(Debug, Error)]
pub enum LocatorError {
    #[error("locator is missing required column {0:?}")]
    MissingColumn(String),
    #[error("cannot read locator {path}: {source}")]
    Unreadable {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("cannot write locator {path}: {source}")]
    Unwritable {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed locator CSV: {0}")]
    Csv(#[from] csv::Error),
    #[error("duplicate locator entry ({domain_tag}, {file_path})")]
    DuplicateEntry {
        file_path: String,
        domain_tag: String,
    },
    #[error("unknown locator column {0:?}")]
    UnknownColumn(String),
    #[error("invalid filter expression {0:?}")]
    BadPredicate(String),
    #[error("merge needs at least one table")]
    NothingToMerge,
}

/// Three-level readiness classification of a file.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Completeness {
    Completed,
    Acceptable,
    Unavailable,
}

impl Completeness {
    pub fn as_str(self) -> &'static str {
        match self {
            Completeness::Completed => "Completed",
            Completeness::Acceptable => "Acceptable",
            Completeness::Unavailable => "Unavailable",
        }
    }
}

impl fmt::Display for Completeness {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Completeness {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "completed" => Ok(Completeness::Completed),
            "acceptable" => Ok(Completeness::Acceptable),
            "unavailable" => Ok(Completeness::Unavailable),
            other => Err(format!("unknown completeness level {other:?}")),
        }
    }
}

/// One catalog entry.
///
/// Basic attributes come first; the optional fields are advanced attributes
/// filled by later processing steps. Columns the library does not know about
/// are kept verbatim in `extra`.
#[derive(Debug, Clone, PartialEq)]
pub struct LocatorRow {
    pub file_path: String,
    pub domain_tag: String,
    pub file_type: FormatKind,
    pub channel_names: Vec<String>,
    pub sampling_rate: Option<f64>,
    pub duration: Option<f64>,
    pub completeness: Completeness,
    pub quality_score: Option<f64>,
    pub norm_mean: Option<Vec<f64>>,
    pub norm_std: Option<Vec<f64>>,
    pub units: Option<Vec<Unit>>,
    pub events: Option<Vec<Event>>,
    pub extra: BTreeMap<String, String>,
}

impl LocatorRow {
    /// A row for a file nothing is known about yet.
    pub fn unavailable(file_path: impl Into<String>, domain_tag: impl Into<String>) -> Self {
        LocatorRow {
            file_path: file_path.into(),
            domain_tag: domain_tag.into(),
            file_type: FormatKind::Unknown,
            channel_names: Vec::new(),
            sampling_rate: None,
            duration: None,
            completeness: Completeness::Unavailable,
            quality_score: None,
            norm_mean: None,
            norm_std: None,
            units: None,
            events: None,
            extra: BTreeMap::new(),
        }
    }

    /// Checks the row invariants, returning one message per violation.
    pub fn validate(&self) -> Result<(), Vec<String>> {
        let mut problems = Vec::new();
        match self.sampling_rate {
            Some(sr) if !(sr.is_finite() && sr > 0.0) => {
                problems.push(format!("sampling rate {sr} is not positive"))
            }
            None if self.completeness != Completeness::Unavailable => {
                problems.push(format!("a {} row needs a sampling rate", self.completeness))
            }
            _ => {}
        }
        if let Some(d) = self.duration {
            if !(d.is_finite() && d >= 0.0) {
                problems.push(format!("duration {d} is negative"));
            }
        }
        if let Some(q) = self.quality_score {
            if !(0.0..=100.0).contains(&q) {
                problems.push(format!("quality score {q} outside [0, 100]"));
            }
        }
        let n = self.channel_names.len();
        for (what, len) in [
            ("norm mean", self.norm_mean.as_ref().map(Vec::len)),
            ("norm std", self.norm_std.as_ref().map(Vec::len)),
            ("units", self.units.as_ref().map(Vec::len)),
        ] {
            if let Some(len) = len {
                if len != n {
                    problems.push(format!("{what} has {len} entries for {n} channels"));
                }
            }
        }
        for name in &self.channel_names {
            if name.is_empty() || name.contains(';') {
                problems.push(format!("invalid channel name {name:?}"));
            }
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(problems)
        }
    }

    fn key(&self) -> (&str, &str) {
        (&self.domain_tag, &self.file_path)
    }
}

/// Ordered, duplicate-free collection of rows.
///
/// Rows are always sorted by `(domain_tag, file_path)`. Tables are values:
/// every operation returns a new table.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct LocatorTable {
    rows: Vec<LocatorRow>,
    provenance: Vec<String>,
}

impl LocatorTable {
    pub fn new(rows: Vec<LocatorRow>) -> Result<Self, LocatorError> {
        Self::with_provenance(rows, Vec::new())
    }

    pub fn with_provenance(
        mut rows: Vec<LocatorRow>,
        provenance: Vec<String>,
    ) -> Result<Self, LocatorError> {
        rows.sort_by(|a, b| a.key().cmp(&b.key()));
        if let Some(w) = rows.windows(2).find(|w| w[0].key() == w[1].key()) {
            return Err(LocatorError::DuplicateEntry {
                file_path: w[0].file_path.clone(),
                domain_tag: w[0].domain_tag.clone(),
            });
        }
        Ok(LocatorTable { rows, provenance })
    }

    pub fn rows(&self) -> &[LocatorRow] {
        &self.rows
    }

    pub fn provenance(&self) -> &[String] {
        &self.provenance
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn into_rows(self) -> Vec<LocatorRow> {
        self.rows
    }

    /// Names of all non-standard columns present in any row, sorted.
    pub fn extra_columns(&self) -> Vec<String> {
        let set: BTreeSet<&String> = self.rows.iter().flat_map(|r| r.extra.keys()).collect();
        set.into_iter().cloned().collect()
    }

    /// Builds a new table from `rows`, keeping this table's provenance.
    pub fn replace_rows(&self, rows: Vec<LocatorRow>) -> Result<Self, LocatorError> {
        LocatorTable::with_provenance(rows, self.provenance.clone())
    }

    /// Keeps the rows for which `keep` returns true.
    pub fn filter_by(&self, keep: impl Fn(&LocatorRow) -> bool) -> LocatorTable {
        LocatorTable {
            rows: self.rows.iter().filter(|r| keep(r)).cloned().collect(),
            provenance: self.provenance.clone(),
        }
    }
}

/// Unions several tables. Two rows with the same `(file_path, domain_tag)`
/// are an error rather than being silently deduplicated.
pub fn merge_locators(tables: &[LocatorTable]) -> Result<LocatorTable, LocatorError> {
    if tables.is_empty() {
        return Err(LocatorError::NothingToMerge);
    }
    let rows = tables.iter().flat_map(|t| t.rows.iter().cloned()).collect();
    let provenance = tables
        .iter()
        .flat_map(|t| t.provenance.iter().cloned())
        .collect();
    LocatorTable::with_provenance(rows, provenance)
}

/// Keeps rows satisfying `predicate`. Column names are checked against the
/// table before any row is evaluated.
pub fn filter_rows(
    table: &LocatorTable,
    predicate: &Predicate,
) -> Result<LocatorTable, LocatorError> {
    predicate.check_columns(&table.extra_columns())?;
    Ok(table.filter_by(|row| predicate.matches(row)))
}

/// Metadata as read from a source file (or as resolved against a row).
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SourceMetadata {
    pub file_type: Option<FormatKind>,
    pub channel_names: Option<Vec<String>>,
    pub sampling_rate: Option<f64>,
    pub duration: Option<f64>,
    pub units: Option<Vec<Unit>>,
    pub events: Option<Vec<Event>>,
}

/// Resolves metadata for a file: every field present in the row wins, and
/// absent fields fall back to what the file itself reports.
pub fn effective_metadata(row: &LocatorRow, parsed: Option<&SourceMetadata>) -> SourceMetadata {
    let fallback = parsed.cloned().unwrap_or_default();
    SourceMetadata {
        file_type: (row.file_type != FormatKind::Unknown)
            .then_some(row.file_type)
            .or(fallback.file_type),
        channel_names: (!row.channel_names.is_empty())
            .then(|| row.channel_names.clone())
            .or(fallback.channel_names),
        sampling_rate: row.sampling_rate.or(fallback.sampling_rate),
        duration: row.duration.or(fallback.duration),
        units: row
            .units
            .clone()
            .filter(|u| !u.is_empty())
            .or(fallback.units),
        events: row
            .events
            .clone()
            .filter(|e| !e.is_empty())
            .or(fallback.events),
    }
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;

    pub(crate) fn row(path: &str, tag: &str) -> LocatorRow {
        LocatorRow {
            file_type: FormatKind::Edf,
            channel_names: vec!["Cz".into(), "C3".into()],
            sampling_rate: Some(256.0),
            duration: Some(10.0),
            completeness: Completeness::Completed,
            ..LocatorRow::unavailable(path, tag)
        }
    }

    fn table(rows: &[(&str, &str)]) -> LocatorTable {
        LocatorTable::new(rows.iter().map(|(p, t)| row(p, t)).collect()).unwrap()
    }

    #[test]
    fn rows_are_sorted_by_tag_then_path() {
        let t = table(&[("/b", "x"), ("/a", "y"), ("/a", "x")]);
        let keys: Vec<_> = t
            .rows()
            .iter()
            .map(|r| (r.domain_tag.as_str(), r.file_path.as_str()))
            .collect();
        assert_eq!(keys, vec![("x", "/a"), ("x", "/b"), ("y", "/a")]);
    }

    #[test]
    fn merge_disjoint_sums_rows() {
        let a = table(&[("/a1", "A"), ("/a2", "A")]);
        let b = table(&[("/b1", "B"), ("/b2", "B"), ("/b3", "B")]);
        assert_eq!(merge_locators(&[a, b]).unwrap().len(), 5);
    }

    #[test]
    fn merge_duplicate_is_error() {
        let a = table(&[("/a1", "A"), ("/a2", "A")]);
        let err = merge_locators(&[a.clone(), a]).unwrap_err();
        assert!(matches!(err, LocatorError::DuplicateEntry { .. }));
    }

    #[test]
    fn merge_single_is_identity() {
        let a = table(&[("/a1", "A"), ("/a2", "A")]);
        assert_eq!(merge_locators(std::slice::from_ref(&a)).unwrap(), a);
        assert!(matches!(
            merge_locators(&[]),
            Err(LocatorError::NothingToMerge)
        ));
    }

    #[test]
    fn merge_is_associative() {
        let a = table(&[("/a1", "A"), ("/z", "B")]);
        let b = table(&[("/b1", "B"), ("/b2", "A")]);
        let c = table(&[("/c1", "C")]);
        let left = merge_locators(&[merge_locators(&[a.clone(), b.clone()]).unwrap(), c.clone()]);
        let right = merge_locators(&[a, merge_locators(&[b, c]).unwrap()]);
        assert_eq!(left.unwrap(), right.unwrap());
    }

    #[test]
    fn same_file_under_two_tags_is_kept_twice() {
        let a = table(&[("/f", "A")]);
        let b = table(&[("/f", "B")]);
        assert_eq!(merge_locators(&[a, b]).unwrap().len(), 2);
    }

    #[test]
    fn row_values_take_precedence() {
        let mut r = row("/f.edf", "t");
        r.sampling_rate = Some(128.0);
        r.channel_names = vec!["Cz".into()];
        let parsed = SourceMetadata {
            sampling_rate: Some(256.0),
            channel_names: Some(vec!["EEG Cz-REF".into()]),
            ..Default::default()
        };
        let resolved = effective_metadata(&r, Some(&parsed));
        assert_eq!(resolved.sampling_rate, Some(128.0));
        assert_eq!(resolved.channel_names, Some(vec!["Cz".to_string()]));

        r.sampling_rate = None;
        assert_eq!(
            effective_metadata(&r, Some(&parsed)).sampling_rate,
            Some(256.0)
        );
    }

    #[test]
    fn resolution_is_idempotent() {
        let mut r = row("/f.edf", "t");
        r.sampling_rate = None;
        r.events = Some(vec![Event::new(1.0, 0.0, "x")]);
        let parsed = SourceMetadata {
            sampling_rate: Some(500.0),
            duration: Some(3.0),
            units: Some(vec![Unit::Microvolt; 2]),
            ..Default::default()
        };
        let once = effective_metadata(&r, Some(&parsed));
        let twice = effective_metadata(&r, Some(&once));
        assert_eq!(once, twice);
        assert_eq!(effective_metadata(&r, None).sampling_rate, None);
    }

    #[test]
    fn validate_reports_violations() {
        let mut r = row("/f", "t");
        assert!(r.validate().is_ok());
        r.quality_score = Some(120.0);
        r.norm_mean = Some(vec![0.0]);
        r.sampling_rate = None;
        let problems = r.validate().unwrap_err();
        assert_eq!(problems.len(), 3, "{problems:?}");
    }
}
