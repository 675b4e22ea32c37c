//! Applying a pipeline of operations to every row of a locator, one file
//! at a time, with per-row isolation and deterministic outputs.

mod ops;
mod spec;

use std::collections::HashSet;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use rayon::prelude::*;
use serde::Serialize;
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::cleaning::ChannelQuality;
use crate::formats::{load_recording, rawsidecar, write_edf, FormatKind};
use crate::locator::{Completeness, LocatorError, LocatorRow, LocatorTable};
use crate::recording::{Recording, Unit};
use crate::unification::write_epochs;

pub use ops::{output_format, OpKind, Operation, Registry, RowState, StepOutput};
pub use spec::{ParamReader, Params, PipelineSpec, Step};

#[derive(Debug, Error)]
pub enum BatchError {
    #[error("invalid pipeline: {0}")]
    SpecInvalid(String),
    #[error("cannot create output directory {path}: {source}")]
    OutputUnwritable {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("operation {0:?} is already registered")]
    DuplicateName(String),
    #[error("cannot start worker pool: {0}")]
    WorkerPool(String),
    #[error(transparent)]
    Locator(#[from] LocatorError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BatchOptions {
    pub jobs: usize,
    pub seed: u64,
}

impl Default for BatchOptions {
    fn default() -> Self {
        BatchOptions {
            jobs: std::thread::available_parallelism().map_or(1, |n| n.get()),
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "status", content = "reason", rename_all = "lowercase")]
pub enum RowOutcome {
    Ok,
    Skipped,
    Failed(String),
}

#[derive(Debug, Clone, Serialize)]
pub struct RowReport {
    pub file_path: String,
    pub domain_tag: String,
    #[serde(flatten)]
    pub outcome: RowOutcome,
    /// Files written for this row, in step order.
    pub outputs: Vec<String>,
    /// Epoch count for each epoching step.
    pub epochs: Vec<usize>,
    /// Events dropped by event epoching because their window ran off the end.
    pub dropped_events: usize,
    /// Per-channel quality sub-scores from the last quality step.
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub channel_quality: Vec<ChannelQuality>,
    #[serde(rename = "wall_ms", serialize_with = "millis")]
    pub wall_time: Duration,
    /// The row as it stands after this run.
    #[serde(skip)]
    pub row: LocatorRow,
}

fn millis<S: serde::Serializer>(d: &Duration, s: S) -> Result<S::Ok, S::Error> {
    s.serialize_f64(d.as_secs_f64() * 1e3)
}

#[derive(Debug, Clone)]
pub struct BatchResult {
    pub table: LocatorTable,
    /// One report per input row, in the input table's order.
    pub rows: Vec<RowReport>,
}

impl BatchResult {
    pub fn count(&self, pred: impl Fn(&RowOutcome) -> bool) -> usize {
        self.rows.iter().filter(|r| pred(&r.outcome)).count()
    }

    pub fn any_failed(&self) -> bool {
        self.count(|o| matches!(o, RowOutcome::Failed(_))) > 0
    }
}

/// Seed for one row: the first 8 bytes of SHA-256(run seed, file path).
pub fn row_seed(run_seed: u64, file_path: &str) -> u64 {
    let mut h = Sha256::new();
    h.update(run_seed.to_le_bytes());
    h.update(file_path.as_bytes());
    let digest = h.finalize();
    u64::from_le_bytes(digest[..8].try_into().expect("digest has 32 bytes"))
}

fn extension(kind: FormatKind) -> &'static str {
    match kind {
        FormatKind::Edf => "edf",
        _ => rawsidecar::DATA_EXTENSION,
    }
}

/// Checks every step against the registry before anything runs.
pub fn validate_spec(spec: &PipelineSpec, registry: &Registry) -> Result<(), BatchError> {
    let mut unsaved: Option<usize> = None;
    for (i, step) in spec.steps.iter().enumerate() {
        let op = registry.get(&step.op).ok_or_else(|| {
            BatchError::SpecInvalid(format!("step {}: unknown operation {:?}", i + 1, step.op))
        })?;
        op.validate(&step.params)
            .map_err(|e| BatchError::SpecInvalid(format!("step {} ({}): {e}", i + 1, step.op)))?;
        match op.kind() {
            OpKind::Epoch if step.out.is_none() => {
                return Err(BatchError::SpecInvalid(format!(
                    "step {} ({}) produces files and needs an output directory",
                    i + 1,
                    step.op
                )))
            }
            OpKind::Transform if step.out.is_some() => unsaved = None,
            OpKind::Transform => unsaved = Some(i),
            _ => {}
        }
        if step.op == "save-as" && step.out.is_none() {
            return Err(BatchError::SpecInvalid(format!(
                "step {} (save-as) needs an output directory",
                i + 1
            )));
        }
    }
    if let Some(i) = unsaved {
        return Err(BatchError::SpecInvalid(format!(
            "step {} ({}) changes the data but no later step writes it out",
            i + 1,
            spec.steps[i].op
        )));
    }
    Ok(())
}

/// `<out>/<domain_tag>/<stem><suffix>.<ext>` per (step, row), with `_1`,
/// `_2` appended on collision, decided before execution.
fn plan_outputs(
    spec: &PipelineSpec,
    registry: &Registry,
    rows: &[LocatorRow],
    active: &[bool],
) -> Result<Vec<Vec<Option<PathBuf>>>, BatchError> {
    let mut used: HashSet<PathBuf> = HashSet::new();
    let mut plan = vec![vec![None; spec.steps.len()]; rows.len()];
    for (s, step) in spec.steps.iter().enumerate() {
        let Some(out) = &step.out else { continue };
        let out = std::path::absolute(out).unwrap_or_else(|_| out.clone());
        let op = registry.get(&step.op).expect("validated");
        let ext = match op.kind() {
            OpKind::Epoch => rawsidecar::DATA_EXTENSION,
            _ => extension(output_format(&step.params).expect("validated")),
        };
        for (r, row) in rows.iter().enumerate() {
            if !active[r] {
                continue;
            }
            let dir = out.join(&row.domain_tag);
            let stem = Path::new(&row.file_path).file_stem().map_or_else(
                || "recording".to_string(),
                |s| s.to_string_lossy().into_owned(),
            );
            let base = format!("{stem}{}", op.output_suffix());
            let mut candidate = dir.join(format!("{base}.{ext}"));
            let mut k = 0;
            while used.contains(&candidate) {
                k += 1;
                candidate = dir.join(format!("{base}_{k}.{ext}"));
            }
            used.insert(candidate.clone());
            plan[r][s] = Some(candidate);
        }
    }
    for dir in plan.iter().flatten().flatten().filter_map(|p| p.parent()) {
        std::fs::create_dir_all(dir).map_err(|source| BatchError::OutputUnwritable {
            path: dir.display().to_string(),
            source,
        })?;
    }
    Ok(plan)
}

/// Files written to a private directory next to their destination and moved
/// into place only once the whole row has succeeded.
struct Staging {
    dirs: Vec<tempfile::TempDir>,
}

impl Staging {
    fn new() -> Self {
        Staging { dirs: Vec::new() }
    }

    /// Returns the staged path to write `dest` to.
    fn stage(&mut self, dest: &Path) -> Result<PathBuf, String> {
        let parent = dest.parent().expect("planned outputs have a parent");
        let dir = tempfile::Builder::new()
            .prefix(".staging-")
            .tempdir_in(parent)
            .map_err(|e| format!("cannot stage output in {}: {e}", parent.display()))?;
        let staged = dir
            .path()
            .join(dest.file_name().expect("planned outputs have a name"));
        self.dirs.push(dir);
        Ok(staged)
    }

    /// Moves every staged file (and its sidecar, if any) into place.
    fn commit(self) -> Result<(), String> {
        for dir in &self.dirs {
            let entries = std::fs::read_dir(dir.path()).map_err(|e| e.to_string())?;
            let parent = dir.path().parent().expect("staging dirs have a parent");
            for entry in entries {
                let entry = entry.map_err(|e| e.to_string())?;
                let dest = parent.join(entry.file_name());
                std::fs::rename(entry.path(), &dest)
                    .map_err(|e| format!("cannot move output to {}: {e}", dest.display()))?;
            }
        }
        Ok(())
    }
}

fn write_recording(rec: &Recording, path: &Path, kind: FormatKind) -> Result<(), String> {
    match kind {
        FormatKind::Edf => write_edf(rec, path),
        _ => rawsidecar::write_rawsidecar(rec, path),
    }
    .map_err(|e| e.to_string())
}

/// Points a row at a freshly written file and refreshes its attributes.
fn sync_row(
    row: &mut LocatorRow,
    rec: &Recording,
    path: &Path,
    kind: FormatKind,
    data_changed: bool,
) {
    row.file_path = path.to_string_lossy().into_owned();
    row.file_type = kind;
    row.channel_names = rec.channel_names().to_vec();
    row.sampling_rate = Some(rec.sampling_rate());
    row.duration = Some(rec.duration());
    row.completeness = Completeness::Completed;
    row.units = rec
        .units()
        .iter()
        .any(|u| *u != Unit::Unknown)
        .then(|| rec.units().to_vec());
    row.events = (row.events.is_some() || !rec.events().is_empty()).then(|| rec.events().to_vec());
    if data_changed {
        // Scores and statistics of the old data no longer apply.
        row.quality_score = None;
        row.norm_mean = None;
        row.norm_std = None;
    }
}

struct RowRun {
    row: LocatorRow,
    report: RowReport,
}

fn run_row(
    row: &LocatorRow,
    spec: &PipelineSpec,
    registry: &Registry,
    plan: &[Option<PathBuf>],
    run_seed: u64,
) -> RowRun {
    let started = Instant::now();
    let mut report = RowReport {
        file_path: row.file_path.clone(),
        domain_tag: row.domain_tag.clone(),
        outcome: RowOutcome::Ok,
        outputs: Vec::new(),
        epochs: Vec::new(),
        dropped_events: 0,
        channel_quality: Vec::new(),
        wall_time: Duration::ZERO,
        row: row.clone(),
    };
    if row.completeness == Completeness::Unavailable {
        report.outcome = RowOutcome::Skipped;
        return RowRun {
            row: row.clone(),
            report,
        };
    }
    // Fills `done` as steps complete; it replaces `report` only on success.
    let attempt = |done: &mut RowReport| -> Result<LocatorRow, String> {
        let recording = load_recording(row).map_err(|e| e.to_string())?;
        let mut state = RowState {
            row: row.clone(),
            recording,
            seed: row_seed(run_seed, &row.file_path),
        };
        let mut staging = Staging::new();
        // Whether the samples differ from those the row's statistics describe.
        let mut changed = false;
        for (step, dest) in spec.steps.iter().zip(plan) {
            let op = registry.get(&step.op).expect("validated");
            let produced = op
                .apply(&mut state, &step.params)
                .map_err(|e| format!("{}: {e}", step.op))?;
            changed |= op.kind() == OpKind::Transform && !op.keeps_data();
            match (produced, dest) {
                (StepOutput::Epochs(set), Some(dest)) => {
                    let staged = staging.stage(dest)?;
                    write_epochs(&set, &staged, &row.file_path)
                        .map_err(|e| format!("{}: {e}", step.op))?;
                    done.epochs.push(set.len());
                    done.dropped_events += set.dropped;
                    done.outputs.push(dest.to_string_lossy().into_owned());
                }
                (StepOutput::Done, Some(dest)) => {
                    let kind = output_format(&step.params)?;
                    let staged = staging.stage(dest)?;
                    write_recording(&state.recording, &staged, kind)
                        .map_err(|e| format!("{}: {e}", step.op))?;
                    sync_row(
                        &mut state.row,
                        &state.recording,
                        dest,
                        kind,
                        std::mem::take(&mut changed),
                    );
                    done.outputs.push(dest.to_string_lossy().into_owned());
                }
                (StepOutput::Scored(q), _) => done.channel_quality = q.channels,
                (StepOutput::Epochs(_), None) => {
                    unreachable!("validated: epoch steps have outputs")
                }
                (StepOutput::Done, None) => {}
            }
        }
        staging.commit()?;
        Ok(state.row)
    };
    let mut done = report.clone();
    let new_row = match attempt(&mut done) {
        Ok(new_row) => {
            report = done;
            new_row
        }
        Err(reason) => {
            report.outcome = RowOutcome::Failed(reason);
            row.clone()
        }
    };
    report.wall_time = started.elapsed();
    report.row = new_row.clone();
    RowRun {
        row: new_row,
        report,
    }
}

/// Runs `spec` over every row of `table` on `opts.jobs` workers.
///
/// Unavailable rows are skipped. A failing row keeps its original locator
/// values and leaves nothing at its output paths.
pub fn run_batch(
    table: &LocatorTable,
    spec: &PipelineSpec,
    registry: &Registry,
    opts: BatchOptions,
) -> Result<BatchResult, BatchError> {
    validate_spec(spec, registry)?;
    let rows = table.rows();
    let active: Vec<bool> = rows
        .iter()
        .map(|r| r.completeness != Completeness::Unavailable)
        .collect();
    let plan = plan_outputs(spec, registry, rows, &active)?;

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(opts.jobs.max(1))
        .build()
        .map_err(|e| BatchError::WorkerPool(e.to_string()))?;
    let runs: Vec<RowRun> = pool.install(|| {
        rows.par_iter()
            .zip(plan.par_iter())
            .map(|(row, p)| run_row(row, spec, registry, p, opts.seed))
            .collect()
    });

    let (new_rows, reports): (Vec<LocatorRow>, Vec<RowReport>) =
        runs.into_iter().map(|r| (r.row, r.report)).unzip();
    Ok(BatchResult {
        table: table.replace_rows(new_rows)?,
        rows: reports,
    })
}
