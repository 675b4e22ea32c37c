use std::collections::HashMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{ensure_dir, svg, write_text, MetricsError};
use crate::cleaning::ChannelQuality;
use crate::locator::{LocatorRow, LocatorTable};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tally {
    pub value: String,
    pub count: usize,
    pub ratio: f64,
}

/// Categorical composition of a locator table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetReport {
    pub total: usize,
    pub file_type: Vec<Tally>,
    pub domain_tag: Vec<Tally>,
    pub channel_configuration: Vec<Tally>,
    pub sampling_rate: Vec<Tally>,
    pub completeness_check: Vec<Tally>,
}

impl DatasetReport {
    pub fn categories(&self) -> [(&'static str, &[Tally]); 5] {
        [
            ("file_type", &self.file_type),
            ("domain_tag", &self.domain_tag),
            ("channel_configuration", &self.channel_configuration),
            ("sampling_rate", &self.sampling_rate),
            ("completeness_check", &self.completeness_check),
        ]
    }
}

/// Channel count plus the sorted name set, so channel order does not matter.
pub fn channel_signature(row: &LocatorRow) -> String {
    let mut names: Vec<&str> = row.channel_names.iter().map(String::as_str).collect();
    names.sort_unstable();
    format!("{}: {}", names.len(), names.join(","))
}

fn tally<'a>(values: impl Iterator<Item = String> + 'a, total: usize) -> Vec<Tally> {
    let mut counts: HashMap<String, usize> = HashMap::new();
    for v in values {
        *counts.entry(v).or_default() += 1;
    }
    let mut out: Vec<Tally> = counts
        .into_iter()
        .map(|(value, count)| Tally {
            value,
            count,
            ratio: count as f64 / total as f64,
        })
        .collect();
    out.sort_by(|a, b| b.count.cmp(&a.count).then_with(|| a.value.cmp(&b.value)));
    out
}

pub fn report(table: &LocatorTable) -> Result<DatasetReport, MetricsError> {
    if table.is_empty() {
        return Err(MetricsError::EmptyTable);
    }
    let rows = table.rows();
    let total = rows.len();
    Ok(DatasetReport {
        total,
        file_type: tally(rows.iter().map(|r| r.file_type.to_string()), total),
        domain_tag: tally(rows.iter().map(|r| r.domain_tag.clone()), total),
        channel_configuration: tally(rows.iter().map(channel_signature), total),
        sampling_rate: tally(
            rows.iter().map(|r| {
                r.sampling_rate
                    .map_or_else(|| "missing".to_string(), |s| s.to_string())
            }),
            total,
        ),
        completeness_check: tally(rows.iter().map(|r| r.completeness.to_string()), total),
    })
}

/// Writes `report.json` and one pie chart per category into `dir`.
pub fn write_report(
    report: &DatasetReport,
    dir: &Path,
) -> Result<Vec<std::path::PathBuf>, MetricsError> {
    let dir = ensure_dir(dir)?;
    let mut written = Vec::new();
    let json_path = dir.join("report.json");
    let json = serde_json::to_string_pretty(report).expect("report serialises");
    write_text(&json_path, &(json + "\n"))?;
    written.push(json_path);
    for (name, tallies) in report.categories() {
        let slices: Vec<(String, f64)> =
            tallies.iter().map(|t| (t.value.clone(), t.ratio)).collect();
        let path = dir.join(format!("report_{name}.svg"));
        write_text(&path, &svg::pie_chart(name, &slices))?;
        written.push(path);
    }
    Ok(written)
}

/// One scored file: path, domain tag and its channels' sub-scores.
pub type ScoredFile<'a> = (&'a str, &'a str, &'a [ChannelQuality]);

/// Writes the per-channel quality breakdown as CSV, one line per channel.
pub fn write_quality_breakdown(files: &[ScoredFile<'_>], path: &Path) -> Result<(), MetricsError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let fail = |e: csv::Error| MetricsError::Unwritable {
        path: path.display().to_string(),
        source: std::io::Error::other(e),
    };
    w.write_record([
        "File Path",
        "Domain Tag",
        "Channel",
        "Clipping",
        "Flatline",
        "Line Noise",
        "High Frequency",
    ])
    .map_err(fail)?;
    for (file, tag, channels) in files {
        for c in *channels {
            let score = |v: f64| format!("{:.4}", 100.0 * v);
            w.write_record([
                file.to_string(),
                tag.to_string(),
                c.channel.clone(),
                score(c.s_clip),
                score(c.s_flat),
                score(c.s_line),
                score(c.s_hf),
            ])
            .map_err(fail)?;
        }
    }
    let bytes = w.into_inner().expect("in-memory writer");
    write_text(
        path,
        &String::from_utf8(bytes).expect("csv of utf-8 fields"),
    )
}
