use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use super::{Completeness, LocatorError, LocatorRow, LocatorTable};
use crate::formats::FormatKind;
use crate::recording::{Event, Unit};

/// Column headers, in file order. The first seven are required on load.
pub const HEADERS: [&str; 12] = [
    "File Path",
    "Domain Tag",
    "File Type",
    "Channel Names",
    "Sampling Rate",
    "Duration",
    "Completeness Check",
    "Quality Score",
    "Norm Mean",
    "Norm Std",
    "Units",
    "Events",
];

const REQUIRED: usize = 7;

/// Reads a locator CSV. Relative paths in the file are resolved against the
/// directory that contains it.
pub fn load_locator(path: impl AsRef<Path>) -> Result<LocatorTable, LocatorError> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|source| LocatorError::Unreadable {
        path: path.display().to_string(),
        source,
    })?;
    let bytes = bytes.strip_prefix(b"\xEF\xBB\xBF").unwrap_or(&bytes);
    let base = locator_dir(path);

    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .from_reader(bytes);
    let headers = reader.headers()?.clone();

    let mut column_of = [None; HEADERS.len()];
    let mut extras = Vec::new();
    for (i, h) in headers.iter().enumerate() {
        match HEADERS
            .iter()
            .position(|known| known.eq_ignore_ascii_case(h.trim()))
        {
            Some(k) => column_of[k] = Some(i),
            None if !h.trim().is_empty() => extras.push((i, h.to_string())),
            None => {}
        }
    }
    if let Some(k) = column_of[..REQUIRED].iter().position(Option::is_none) {
        return Err(LocatorError::MissingColumn(HEADERS[k].to_string()));
    }

    let mut rows = Vec::new();
    for record in reader.records() {
        let record = record?;
        if record.iter().all(|c| c.trim().is_empty()) {
            continue;
        }
        let cell = |k: usize| -> &str {
            column_of[k]
                .and_then(|i| record.get(i))
                .map(str::trim)
                .unwrap_or("")
        };
        let mut extra = BTreeMap::new();
        for (i, name) in &extras {
            let v = record.get(*i).unwrap_or("");
            if !v.is_empty() {
                extra.insert(name.clone(), v.to_string());
            }
        }
        rows.push(parse_row(&cell, &base, extra));
    }
    LocatorTable::with_provenance(rows, vec![path.display().to_string()])
}

fn parse_row<'a>(
    cell: &dyn Fn(usize) -> &'a str,
    base: &Path,
    extra: BTreeMap<String, String>,
) -> LocatorRow {
    let mut malformed = false;

    let raw_path = cell(0);
    let file_path = if raw_path.is_empty() || Path::new(raw_path).is_absolute() {
        raw_path.to_string()
    } else {
        base.join(raw_path).to_string_lossy().into_owned()
    };
    if raw_path.is_empty() {
        malformed = true;
    }

    let file_type = match cell(2).parse::<FormatKind>() {
        Ok(k) => k,
        Err(_) => {
            malformed = true;
            FormatKind::Unknown
        }
    };
    let channel_names = split_list(cell(3));
    let sampling_rate = match parse_number(cell(4)) {
        Ok(Some(sr)) if sr > 0.0 => Some(sr),
        Ok(None) => None,
        _ => {
            malformed = true;
            None
        }
    };
    let duration = match parse_number(cell(5)) {
        Ok(Some(d)) if d >= 0.0 => Some(d),
        Ok(None) => None,
        _ => {
            malformed = true;
            None
        }
    };
    let mut completeness = cell(6).parse::<Completeness>().unwrap_or_else(|_| {
        malformed = true;
        Completeness::Unavailable
    });
    if malformed || sampling_rate.is_none() {
        completeness = Completeness::Unavailable;
    }

    let n = channel_names.len();
    let quality_score = parse_number(cell(7))
        .ok()
        .flatten()
        .filter(|q| (0.0..=100.0).contains(q));
    let norm_mean = parse_float_list(cell(8)).filter(|v| v.len() == n);
    let norm_std = parse_float_list(cell(9)).filter(|v| v.len() == n);
    let units = parse_units(cell(10)).filter(|v| v.len() == n);
    let events = parse_events(cell(11));

    LocatorRow {
        file_path,
        domain_tag: cell(1).to_string(),
        file_type,
        channel_names,
        sampling_rate,
        duration,
        completeness,
        quality_score,
        norm_mean,
        norm_std,
        units,
        events,
        extra,
    }
}

fn parse_number(s: &str) -> Result<Option<f64>, ()> {
    if s.is_empty() {
        return Ok(None);
    }
    match s.parse::<f64>() {
        Ok(v) if v.is_finite() => Ok(Some(v)),
        _ => Err(()),
    }
}

fn split_list(s: &str) -> Vec<String> {
    if s.trim().is_empty() {
        return Vec::new();
    }
    s.split(';').map(|x| x.trim().to_string()).collect()
}

fn parse_float_list(s: &str) -> Option<Vec<f64>> {
    if s.is_empty() {
        return None;
    }
    s.split(';')
        .map(|x| x.trim().parse::<f64>().ok().filter(|v| v.is_finite()))
        .collect()
}

fn parse_units(s: &str) -> Option<Vec<Unit>> {
    if s.is_empty() {
        return None;
    }
    s.split(';').map(|x| x.parse::<Unit>().ok()).collect()
}

fn parse_events(s: &str) -> Option<Vec<Event>> {
    if s.is_empty() {
        return None;
    }
    let events: Vec<Event> = serde_json::from_str(s).ok()?;
    events
        .iter()
        .all(|e| {
            e.onset.is_finite() && e.onset >= 0.0 && e.duration.is_finite() && e.duration >= 0.0
        })
        .then_some(events)
}

/// Writes `table` as a locator CSV (UTF-8, LF line endings). Paths beneath
/// the locator's directory are stored relative to it.
pub fn save_locator(table: &LocatorTable, path: impl AsRef<Path>) -> Result<(), LocatorError> {
    let path = path.as_ref();
    let text = to_csv_string(table, Some(&locator_dir(path)))?;
    std::fs::write(path, text).map_err(|source| LocatorError::Unwritable {
        path: path.display().to_string(),
        source,
    })
}

/// Serialises `table`; when `base` is given, absolute paths beneath it are
/// written relative to it.
pub fn to_csv_string(table: &LocatorTable, base: Option<&Path>) -> Result<String, LocatorError> {
    let extras = table.extra_columns();
    let mut writer = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(Vec::new());
    writer.write_record(
        HEADERS
            .iter()
            .copied()
            .chain(extras.iter().map(String::as_str)),
    )?;
    for row in table.rows() {
        let mut cells = vec![
            relative_path(&row.file_path, base),
            row.domain_tag.clone(),
            row.file_type.to_string(),
            row.channel_names.join(";"),
            fmt_opt(row.sampling_rate),
            fmt_opt(row.duration),
            row.completeness.to_string(),
            fmt_opt(row.quality_score),
            fmt_list(row.norm_mean.as_deref()),
            fmt_list(row.norm_std.as_deref()),
            row.units
                .as_ref()
                .map(|u| u.iter().map(|x| x.as_str()).collect::<Vec<_>>().join(";"))
                .unwrap_or_default(),
            row.events
                .as_ref()
                .map(|e| serde_json::to_string(e).expect("events serialise"))
                .unwrap_or_default(),
        ];
        cells.extend(
            extras
                .iter()
                .map(|k| row.extra.get(k).cloned().unwrap_or_default()),
        );
        writer.write_record(&cells)?;
    }
    let bytes = writer
        .into_inner()
        .map_err(|e| LocatorError::Csv(e.into_error().into()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn fmt_list(v: Option<&[f64]>) -> String {
    v.map(|xs| {
        xs.iter()
            .map(|x| x.to_string())
            .collect::<Vec<_>>()
            .join(";")
    })
    .unwrap_or_default()
}

fn relative_path(file_path: &str, base: Option<&Path>) -> String {
    let p = Path::new(file_path);
    match base {
        Some(base) if p.is_absolute() => match p.strip_prefix(base) {
            Ok(rel) if !rel.as_os_str().is_empty() => rel.to_string_lossy().into_owned(),
            _ => file_path.to_string(),
        },
        _ => file_path.to_string(),
    }
}

fn locator_dir(path: &Path) -> PathBuf {
    let parent = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    std::path::absolute(parent).unwrap_or_else(|_| parent.to_path_buf())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::locator::tests::row;

    fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
        let p = dir.join(name);
        std::fs::write(&p, text).unwrap();
        p
    }

    #[test]
    fn empty_file_is_missing_column() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(dir.path(), "loc.csv", "");
        assert!(matches!(
            load_locator(&p),
            Err(LocatorError::MissingColumn(c)) if c == "File Path"
        ));
    }

    #[test]
    fn missing_required_header_is_reported() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(
            dir.path(),
            "loc.csv",
            "File Path,Domain Tag,File Type,Channel Names,Sampling Rate,Duration\n",
        );
        assert!(matches!(
            load_locator(&p),
            Err(LocatorError::MissingColumn(c)) if c == "Completeness Check"
        ));
    }

    #[test]
    fn unreadable_path() {
        assert!(matches!(
            load_locator("/nonexistent/loc.csv"),
            Err(LocatorError::Unreadable { .. })
        ));
    }

    #[test]
    fn two_rows_load_sorted_by_path() {
        let dir = tempfile::tempdir().unwrap();
        let text = "File Path,Domain Tag,File Type,Channel Names,Sampling Rate,Duration,Completeness Check\n\
                    /data/b.edf,t,edf,Cz;C3,256,10,Completed\n\
                    /data/a.edf,t,edf,Cz;C3,256,10,Completed\n";
        let t = load_locator(write(dir.path(), "loc.csv", text)).unwrap();
        assert_eq!(t.len(), 2);
        assert_eq!(t.rows()[0].file_path, "/data/a.edf");
        assert_eq!(t.rows()[1].channel_names, vec!["Cz", "C3"]);
        assert_eq!(t.rows()[1].quality_score, None);
    }

    #[test]
    fn malformed_required_cell_marks_row_unavailable() {
        let dir = tempfile::tempdir().unwrap();
        let text = "File Path,Domain Tag,File Type,Channel Names,Sampling Rate,Duration,Completeness Check,Quality Score\n\
                    /d/a.edf,t,edf,Cz,abc,10,Completed,90\n\
                    /d/b.edf,t,edf,Cz,256,10,Completed,not-a-number\n";
        let t = load_locator(write(dir.path(), "loc.csv", text)).unwrap();
        assert_eq!(t.rows()[0].completeness, Completeness::Unavailable);
        assert_eq!(t.rows()[0].sampling_rate, None);
        // Optional column malformed: the value is dropped, the row stays.
        assert_eq!(t.rows()[1].completeness, Completeness::Completed);
        assert_eq!(t.rows()[1].quality_score, None);
    }

    #[test]
    fn empty_table_is_header_only() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("loc.csv");
        save_locator(&LocatorTable::default(), &p).unwrap();
        let text = std::fs::read_to_string(&p).unwrap();
        assert_eq!(text, format!("{}\n", HEADERS.join(",")));
    }

    #[test]
    fn events_cell_is_quoted_json() {
        let mut r = row("/x/a.edf", "t");
        r.events = Some(vec![
            Event::new(2.5, 0.0, "blink"),
            Event::new(7.0, 1.0, "say \"hi\", twice"),
        ]);
        let t = LocatorTable::new(vec![r.clone()]).unwrap();
        let text = to_csv_string(&t, None).unwrap();
        assert!(!text.contains('\r'));

        // Independent reader: split the data line per RFC 4180 by hand.
        let line = text.lines().nth(1).unwrap();
        let fields = rfc4180_split(line);
        assert_eq!(fields.len(), HEADERS.len());
        let events: Vec<Event> = serde_json::from_str(&fields[11]).unwrap();
        assert_eq!(events, r.events.unwrap());
        assert!(line.ends_with('"'));
    }

    fn rfc4180_split(line: &str) -> Vec<String> {
        let mut out = vec![String::new()];
        let mut quoted = false;
        let mut chars = line.chars().peekable();
        while let Some(c) = chars.next() {
            match (c, quoted) {
                ('"', false) => quoted = true,
                ('"', true) if chars.peek() == Some(&'"') => {
                    chars.next();
                    out.last_mut().unwrap().push('"');
                }
                ('"', true) => quoted = false,
                (',', false) => out.push(String::new()),
                (c, _) => out.last_mut().unwrap().push(c),
            }
        }
        out
    }

    #[test]
    fn paths_beneath_locator_are_relative() {
        let dir = tempfile::tempdir().unwrap();
        let base = std::path::absolute(dir.path()).unwrap();
        let inside = base.join("sub/a.edf").to_string_lossy().into_owned();
        let t = LocatorTable::new(vec![row(&inside, "t"), row("/elsewhere/b.edf", "t")]).unwrap();
        let p = base.join("loc.csv");
        save_locator(&t, &p).unwrap();
        let text = std::fs::read_to_string(&p).unwrap();
        assert!(text.contains("\nsub/a.edf,"));
        assert!(text.contains("\n/elsewhere/b.edf,"));
        assert_eq!(load_locator(&p).unwrap().rows(), t.rows());
    }

    #[test]
    fn extra_columns_survive() {
        let dir = tempfile::tempdir().unwrap();
        let text = "File Path,Domain Tag,File Type,Channel Names,Sampling Rate,Duration,Completeness Check,Subject\n\
                    /d/a.edf,t,edf,Cz,256,10,Completed,s01\n";
        let p = write(dir.path(), "loc.csv", text);
        let t = load_locator(&p).unwrap();
        assert_eq!(
            t.rows()[0].extra.get("Subject").map(String::as_str),
            Some("s01")
        );
        let out = to_csv_string(&t, None).unwrap();
        assert!(out.lines().next().unwrap().ends_with(",Events,Subject"));
    }
}
