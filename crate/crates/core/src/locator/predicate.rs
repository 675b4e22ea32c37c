use std::cmp::Ordering;
use std::fmt;

use super::{LocatorError, LocatorRow, HEADERS};

/// A locator column addressed by its header name.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Column {
    FilePath,
    DomainTag,
    FileType,
    ChannelNames,
    SamplingRate,
    Duration,
    Completeness,
    QualityScore,
    NormMean,
    NormStd,
    Units,
    Events,
    Extra(String),
}

impl Column {
    /// Resolves a header name (case-insensitive). Names that are not
    /// standard headers resolve to [`Column::Extra`].
    pub fn from_name(name: &str) -> Column {
        let name = name.trim().trim_matches(|c| c == '\'' || c == '"');
        let standard = [
            Column::FilePath,
            Column::DomainTag,
            Column::FileType,
            Column::ChannelNames,
            Column::SamplingRate,
            Column::Duration,
            Column::Completeness,
            Column::QualityScore,
            Column::NormMean,
            Column::NormStd,
            Column::Units,
            Column::Events,
        ];
        HEADERS
            .iter()
            .position(|h| h.eq_ignore_ascii_case(name))
            .map(|i| standard[i].clone())
            .unwrap_or_else(|| Column::Extra(name.to_string()))
    }

    fn text(&self, row: &LocatorRow) -> Option<String> {
        let join = |v: Vec<String>| Some(v.join(";"));
        match self {
            Column::FilePath => Some(row.file_path.clone()),
            Column::DomainTag => Some(row.domain_tag.clone()),
            Column::FileType => Some(row.file_type.to_string()),
            Column::ChannelNames => Some(row.channel_names.join(";")),
            Column::SamplingRate => row.sampling_rate.map(|v| v.to_string()),
            Column::Duration => row.duration.map(|v| v.to_string()),
            Column::Completeness => Some(row.completeness.to_string()),
            Column::QualityScore => row.quality_score.map(|v| v.to_string()),
            Column::NormMean => row
                .norm_mean
                .as_ref()
                .and_then(|v| join(v.iter().map(f64::to_string).collect())),
            Column::NormStd => row
                .norm_std
                .as_ref()
                .and_then(|v| join(v.iter().map(f64::to_string).collect())),
            Column::Units => row
                .units
                .as_ref()
                .and_then(|v| join(v.iter().map(|u| u.to_string()).collect())),
            Column::Events => row
                .events
                .as_ref()
                .map(|e| serde_json::to_string(e).unwrap_or_default()),
            Column::Extra(name) => row.extra.get(name).cloned(),
        }
    }

    fn number(&self, row: &LocatorRow) -> Option<f64> {
        match self {
            Column::SamplingRate => row.sampling_rate,
            Column::Duration => row.duration,
            Column::QualityScore => row.quality_score,
            _ => self.text(row)?.trim().parse().ok(),
        }
    }

    fn items(&self, row: &LocatorRow) -> Vec<String> {
        match self {
            Column::Events => row
                .events
                .iter()
                .flatten()
                .map(|e| e.label.clone())
                .collect(),
            _ => self
                .text(row)
                .map(|t| t.split(';').map(str::to_string).collect())
                .unwrap_or_default(),
        }
    }
}

impl fmt::Display for Column {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            Column::Extra(name) => name.as_str(),
            other => {
                let i = [
                    Column::FilePath,
                    Column::DomainTag,
                    Column::FileType,
                    Column::ChannelNames,
                    Column::SamplingRate,
                    Column::Duration,
                    Column::Completeness,
                    Column::QualityScore,
                    Column::NormMean,
                    Column::NormStd,
                    Column::Units,
                    Column::Events,
                ]
                .iter()
                .position(|c| c == other)
                .expect("standard column");
                HEADERS[i]
            }
        };
        f.write_str(name)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CmpOp {
    Eq,
    Ne,
    Gt,
    Ge,
    Lt,
    Le,
    /// Membership in a `;`-separated list cell (or event labels).
    Contains,
}

impl CmpOp {
    fn accepts(self, ord: Ordering) -> bool {
        match self {
            CmpOp::Eq => ord == Ordering::Equal,
            CmpOp::Ne => ord != Ordering::Equal,
            CmpOp::Gt => ord == Ordering::Greater,
            CmpOp::Ge => ord != Ordering::Less,
            CmpOp::Lt => ord == Ordering::Less,
            CmpOp::Le => ord != Ordering::Greater,
            CmpOp::Contains => false,
        }
    }
}

/// `column op value`, e.g. `Quality Score > 80`.
#[derive(Debug, Clone, PartialEq)]
pub struct Condition {
    pub column: Column,
    pub op: CmpOp,
    pub value: String,
}

impl Condition {
    pub fn new(column: Column, op: CmpOp, value: impl Into<String>) -> Self {
        Condition {
            column,
            op,
            value: value.into(),
        }
    }

    pub fn parse(expr: &str) -> Result<Condition, LocatorError> {
        const OPS: [(&str, CmpOp); 8] = [
            (" contains ", CmpOp::Contains),
            ("==", CmpOp::Eq),
            ("!=", CmpOp::Ne),
            (">=", CmpOp::Ge),
            ("<=", CmpOp::Le),
            (">", CmpOp::Gt),
            ("<", CmpOp::Lt),
            ("=", CmpOp::Eq),
        ];
        let lower = expr.to_ascii_lowercase();
        for (token, op) in OPS {
            if let Some(at) = lower.find(token) {
                let column = expr[..at].trim();
                let value = expr[at + token.len()..]
                    .trim()
                    .trim_matches(|c| c == '\'' || c == '"');
                if column.is_empty() {
                    break;
                }
                return Ok(Condition::new(Column::from_name(column), op, value));
            }
        }
        Err(LocatorError::BadPredicate(expr.to_string()))
    }

    pub fn matches(&self, row: &LocatorRow) -> bool {
        if self.op == CmpOp::Contains {
            return self.column.items(row).iter().any(|i| i == &self.value);
        }
        if let (Some(lhs), Ok(rhs)) = (self.column.number(row), self.value.parse::<f64>()) {
            return lhs
                .partial_cmp(&rhs)
                .is_some_and(|ord| self.op.accepts(ord));
        }
        match self.column.text(row) {
            Some(lhs) => self.op.accepts(lhs.as_str().cmp(self.value.as_str())),
            None => false,
        }
    }
}

/// Conjunction of conditions. The empty predicate matches every row.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Predicate {
    conditions: Vec<Condition>,
}

impl Predicate {
    pub fn all(conditions: Vec<Condition>) -> Self {
        Predicate { conditions }
    }

    /// Parses `cond [AND cond]...`.
    pub fn parse(expr: &str) -> Result<Predicate, LocatorError> {
        let mut conditions = Vec::new();
        let mut rest = expr;
        loop {
            let lower = rest.to_ascii_lowercase();
            match lower.find(" and ") {
                Some(at) => {
                    conditions.push(Condition::parse(&rest[..at])?);
                    rest = &rest[at + 5..];
                }
                None => {
                    conditions.push(Condition::parse(rest)?);
                    break;
                }
            }
        }
        Ok(Predicate { conditions })
    }

    pub fn and(mut self, other: Predicate) -> Predicate {
        self.conditions.extend(other.conditions);
        self
    }

    pub fn conditions(&self) -> &[Condition] {
        &self.conditions
    }

    pub(crate) fn check_columns(&self, extra_columns: &[String]) -> Result<(), LocatorError> {
        for c in &self.conditions {
            if let Column::Extra(name) = &c.column {
                if !extra_columns.iter().any(|e| e == name) {
                    return Err(LocatorError::UnknownColumn(name.clone()));
                }
            }
        }
        Ok(())
    }

    pub fn matches(&self, row: &LocatorRow) -> bool {
        self.conditions.iter().all(|c| c.matches(row))
    }
}
