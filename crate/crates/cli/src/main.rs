mod args;

use std::io::Read;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::Parser;
use serde_json::{json, Value};

use eegunify::batch::{RowReport, Step};
use eegunify::llm::{apply_suggestion, LlmClient, MetadataSuggestion, MAX_HEADER_BYTES};
use eegunify::locator::{CmpOp, Column, Condition};
use eegunify::metrics::{
    band_curves, correlation_grid, report, write_quality_breakdown, write_report, CurveOptions,
    ScoredFile,
};
use eegunify::{
    filter_rows, load_locator, merge_locators, run_batch, save_locator, scan_dataset, BatchOptions,
    BatchResult, LocatorRow, LocatorTable, PipelineSpec, Predicate, ReadHints, Registry,
    RowOutcome,
};

use args::{Cli, Command, CompletenessArg, EpochOutput, FilterType, Hints, Output, Source};

/// Process exit status. Usage and pre-flight errors exit 1 via `Err`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Status {
    Success,
    Partial,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(cli) {
        Ok(Status::Success) => ExitCode::SUCCESS,
        Ok(Status::Partial) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

fn run(cli: Cli) -> Result<Status> {
    let ctx = Ctx {
        json: cli.json,
        opts: BatchOptions {
            jobs: cli.jobs.unwrap_or_else(|| BatchOptions::default().jobs),
            seed: cli.seed,
        },
    };
    if ctx.opts.jobs == 0 {
        bail!("--jobs must be at least 1");
    }
    match cli.command {
        Command::Scan {
            dataset_path,
            domain_tag,
            hints,
            out,
        } => {
            let table = scan_dataset(&dataset_path, &domain_tag, &read_hints(&hints))?;
            for row in table.rows() {
                ctx.print_row(row);
            }
            save(&table, &out)?;
            Ok(Status::Success)
        }
        Command::Merge {
            locator,
            dataset_path,
            domain_tag,
            hints,
            out,
        } => {
            if dataset_path.len() != domain_tag.len() {
                bail!(
                    "each --dataset-path needs its own --domain-tag ({} paths, {} tags)",
                    dataset_path.len(),
                    domain_tag.len()
                );
            }
            if locator.len() + dataset_path.len() == 0 {
                bail!("nothing to merge: give --locator or --dataset-path");
            }
            let hints = read_hints(&hints);
            let mut tables = Vec::new();
            for path in &locator {
                tables.push(load_locator(path)?);
            }
            for (dir, tag) in dataset_path.iter().zip(&domain_tag) {
                tables.push(scan_dataset(dir, tag, &hints)?);
            }
            let merged = merge_locators(&tables)?;
            for row in merged.rows() {
                ctx.print_row(row);
            }
            save(&merged, &out)?;
            Ok(Status::Success)
        }
        Command::Report { source, out } => {
            let loaded = Loaded::from_source(&source)?;
            let rep = report(&loaded.selected)?;
            let files = write_report(&rep, &out)?;
            if ctx.json {
                println!("{}", serde_json::to_string(&rep)?);
            } else {
                println!("total: {} files", rep.total);
                for (name, tallies) in rep.categories() {
                    let parts: Vec<String> = tallies
                        .iter()
                        .map(|t| format!("{} {} ({:.1}%)", t.value, t.count, 100.0 * t.ratio))
                        .collect();
                    println!("{name}: {}", parts.join(", "));
                }
            }
            eprintln!("wrote {} files to {}", files.len(), out.display());
            Ok(Status::Success)
        }
        Command::VizFreq {
            source,
            max_sample,
            normalize,
            out,
        } => {
            let loaded = Loaded::from_source(&source)?;
            let opts = CurveOptions {
                max_sample,
                seed: ctx.opts.seed,
                normalize,
            };
            let curves = band_curves(&loaded.selected, opts, Some(&out))?;
            for c in &curves.curves {
                let (lo, hi) = c.band.range();
                let peak = c
                    .freqs
                    .iter()
                    .zip(&c.mean)
                    .max_by(|a, b| a.1.total_cmp(b.1))
                    .map_or(f64::NAN, |(f, _)| *f);
                if ctx.json {
                    println!(
                        "{}",
                        json!({"band": c.band.name(), "low_hz": lo, "high_hz": hi,
                               "samples": c.samples.len(), "mean_peak_hz": peak})
                    );
                } else {
                    println!(
                        "{:<6} {lo}-{hi} Hz  samples={}  mean peak at {peak} Hz",
                        c.band.name(),
                        c.samples.len()
                    );
                }
            }
            eprintln!("wrote {} files to {}", curves.files.len(), out.display());
            Ok(Status::Success)
        }
        Command::VizCorr {
            source,
            max_sample,
            out,
        } => {
            let loaded = Loaded::from_source(&source)?;
            let grid = correlation_grid(&loaded.selected, max_sample, ctx.opts.seed, Some(&out))?;
            for (path, corr) in &grid.panels {
                let n = corr.channel_names.len();
                let off: Vec<f64> = corr
                    .matrix
                    .indexed_iter()
                    .filter(|((i, j), _)| i != j)
                    .map(|(_, v)| v.abs())
                    .collect();
                let mean = if off.is_empty() {
                    0.0
                } else {
                    off.iter().sum::<f64>() / off.len() as f64
                };
                if ctx.json {
                    println!(
                        "{}",
                        json!({"file_path": path, "channels": n, "mean_abs_offdiag": mean})
                    );
                } else {
                    println!("{path}  channels={n}  mean|r|={mean:.3}");
                }
            }
            eprintln!(
                "{}x{} grid; wrote {} files to {}",
                grid.columns,
                grid.rows,
                grid.files.len(),
                out.display()
            );
            Ok(Status::Success)
        }
        Command::SampleFilter {
            source,
            completeness_check,
            conditions,
            save: target,
        } => {
            let loaded = Loaded::from_source(&source)?;
            let dest = loaded.default_target(target.save_locator.as_deref())?;
            let mut predicate = Predicate::default();
            for expr in &conditions {
                predicate = predicate.and(Predicate::parse(expr)?);
            }
            if let Some(level) = completeness_check {
                let value = match level {
                    CompletenessArg::Completed => "Completed",
                    CompletenessArg::Acceptable => "Acceptable",
                    CompletenessArg::Unavailable => "Unavailable",
                };
                predicate = predicate.and(Predicate::all(vec![Condition::new(
                    Column::Completeness,
                    CmpOp::Eq,
                    value,
                )]));
            }
            let kept = filter_rows(&loaded.selected, &predicate)?;
            for row in kept.rows() {
                ctx.print_row(row);
            }
            eprintln!("kept {} of {} rows", kept.len(), loaded.selected.len());
            let table = loaded.recombine(kept)?;
            save(&table, &dest)?;
            Ok(Status::Success)
        }
        Command::Quality {
            source,
            save,
            report,
        } => {
            let steps = vec![Step::new("quality")];
            let (status, result) =
                ctx.run_steps(&source, steps, Target::InPlace(save.save_locator))?;
            if let Some(path) = report {
                let files: Vec<ScoredFile> = result
                    .rows
                    .iter()
                    .filter(|r| r.outcome == RowOutcome::Ok)
                    .map(|r| {
                        (
                            r.file_path.as_str(),
                            r.domain_tag.as_str(),
                            &r.channel_quality[..],
                        )
                    })
                    .collect();
                write_quality_breakdown(&files, &path)?;
                eprintln!("wrote {}", path.display());
            }
            Ok(status)
        }
        Command::InferUnits { source, save } => {
            let steps = vec![Step::new("infer-units")];
            ctx.batch(&source, steps, Target::InPlace(save.save_locator))
        }
        Command::Events { source, save } => {
            let steps = vec![Step::new("events")];
            ctx.batch(&source, steps, Target::InPlace(save.save_locator))
        }
        Command::Filter {
            source,
            filter_type,
            l_freq,
            h_freq,
            order,
            output,
        } => {
            let kind = match filter_type {
                FilterType::Bandpass => "bandpass",
                FilterType::Lowpass => "lowpass",
                FilterType::Highpass => "highpass",
            };
            let mut step = Step::new("filter")
                .param("type", kind)
                .param("order", order);
            if let Some(l) = l_freq {
                step = step.param("l_freq", l);
            }
            if let Some(h) = h_freq {
                step = step.param("h_freq", h);
            }
            ctx.written(&source, step, output)
        }
        Command::Ica {
            source,
            max_components,
            method: _,
            kurtosis_threshold,
            tol,
            max_iter,
            output,
        } => {
            let step = Step::new("ica")
                .param("max_components", max_components)
                .param("method", "fastica")
                .param("kurtosis_threshold", kurtosis_threshold)
                .param("tol", tol)
                .param("max_iter", max_iter);
            ctx.written(&source, step, output)
        }
        Command::Resample {
            source,
            new_sfreq,
            output,
        } => ctx.written(
            &source,
            Step::new("resample").param("new_sfreq", new_sfreq),
            output,
        ),
        Command::Align {
            source,
            channel_order,
            output,
        } => ctx.written(
            &source,
            Step::new("align").param("channel_order", channel_order),
            output,
        ),
        Command::SaveAs { source, output } => ctx.written(&source, Step::new("save-as"), output),
        Command::EpochByEvent {
            source,
            seg_sec,
            output,
        } => ctx.epochs(
            &source,
            Step::new("epoch-by-event").param("seg_sec", seg_sec),
            output,
        ),
        Command::EpochPretrain {
            source,
            seg_sec,
            stride_sec,
            output,
        } => {
            let mut step = Step::new("epoch-pretrain").param("seg_sec", seg_sec);
            if let Some(s) = stride_sec {
                step = step.param("stride_sec", s);
            }
            ctx.epochs(&source, step, output)
        }
        Command::Pipeline { source, spec, save } => {
            let spec = PipelineSpec::load(&spec)?;
            ctx.batch(&source, spec.steps, Target::InPlace(save.save_locator))
        }
        Command::LlmSuggest {
            description,
            header,
            context,
            apply,
            target,
        } => {
            let client = LlmClient::from_env()?;
            let suggestion = match (&description, &header) {
                (Some(path), _) => {
                    let text = std::fs::read_to_string(path)
                        .with_context(|| format!("cannot read {}", path.display()))?;
                    client.infer_metadata_from_text(&text)?
                }
                (None, Some(path)) => {
                    let bytes = read_prefix(path, MAX_HEADER_BYTES)?;
                    client.suggest_header_parse(&bytes, &context)?
                }
                (None, None) => unreachable!("clap requires one of them"),
            };
            ctx.print_suggestion(&suggestion);
            if !apply {
                return Ok(Status::Success);
            }
            let locator = target
                .locator
                .expect("clap requires --locator with --apply");
            let full = load_locator(&locator)?;
            let mut rejected = 0;
            let rows: Vec<LocatorRow> = full
                .rows()
                .iter()
                .map(|row| {
                    if target
                        .domain_tag
                        .as_ref()
                        .is_some_and(|t| *t != row.domain_tag)
                    {
                        return row.clone();
                    }
                    match apply_suggestion(row, &suggestion) {
                        Ok(new) => new,
                        Err(problems) => {
                            rejected += 1;
                            eprintln!("rejected for {}: {}", row.file_path, problems.join("; "));
                            row.clone()
                        }
                    }
                })
                .collect();
            let table = full.replace_rows(rows)?;
            save(&table, target.save_locator.as_deref().unwrap_or(&locator))?;
            Ok(if rejected > 0 {
                Status::Partial
            } else {
                Status::Success
            })
        }
    }
}

fn read_hints(h: &Hints) -> ReadHints {
    ReadHints {
        sampling_rate: h.sampling_rate,
        channel_names: (!h.channel_names.is_empty()).then(|| h.channel_names.clone()),
    }
}

fn read_prefix(path: &Path, limit: usize) -> Result<Vec<u8>> {
    let file =
        std::fs::File::open(path).with_context(|| format!("cannot read {}", path.display()))?;
    let mut buf = Vec::new();
    // One byte over the limit so the client can tell the header was cut.
    file.take(limit as u64 + 1)
        .read_to_end(&mut buf)
        .with_context(|| format!("cannot read {}", path.display()))?;
    Ok(buf)
}

fn save(table: &LocatorTable, path: &Path) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).with_context(|| format!("cannot create {}", dir.display()))?;
    }
    save_locator(table, path)?;
    eprintln!(
        "locator: {} rows written to {}",
        table.len(),
        path.display()
    );
    Ok(())
}

/// `<dir>.csv` next to an output directory.
fn sibling_csv(dir: &Path) -> PathBuf {
    let mut s = dir.as_os_str().to_os_string();
    while s.len() > 1 && (s.to_string_lossy().ends_with('/') || s.to_string_lossy().ends_with('\\'))
    {
        let t = s.to_string_lossy();
        s = t[..t.len() - 1].into();
    }
    s.push(".csv");
    PathBuf::from(s)
}

/// The rows a command works on, plus the table they came from.
struct Loaded {
    full: LocatorTable,
    selected: LocatorTable,
    /// Tag restriction applied to `full`, if any.
    tag: Option<String>,
    locator: Option<PathBuf>,
}

impl Loaded {
    fn from_source(src: &Source) -> Result<Loaded> {
        if let Some(dir) = &src.origin.dataset_path {
            let Some(tag) = &src.domain_tag else {
                bail!("--dataset-path needs --domain-tag");
            };
            let table = scan_dataset(dir, tag, &read_hints(&src.hints))?;
            return Ok(Loaded {
                full: table.clone(),
                selected: table,
                tag: None,
                locator: None,
            });
        }
        let path = src
            .origin
            .locator
            .clone()
            .expect("clap requires one origin");
        let full = load_locator(&path)?;
        let selected = match &src.domain_tag {
            Some(tag) => {
                let sel = full.filter_by(|r| r.domain_tag == *tag);
                if sel.is_empty() {
                    bail!("no rows tagged {tag:?} in {}", path.display());
                }
                sel
            }
            None => full.clone(),
        };
        Ok(Loaded {
            full,
            selected,
            tag: src.domain_tag.clone(),
            locator: Some(path),
        })
    }

    /// Puts processed rows back among the rows that were not selected.
    fn recombine(&self, processed: LocatorTable) -> Result<LocatorTable> {
        let Some(tag) = &self.tag else {
            return Ok(processed);
        };
        let rest = self.full.filter_by(|r| r.domain_tag != *tag);
        Ok(merge_locators(&[rest, processed])?)
    }

    /// Explicit destination, else the loaded locator itself.
    fn default_target(&self, explicit: Option<&Path>) -> Result<PathBuf> {
        match (explicit, &self.locator) {
            (Some(p), _) => Ok(p.to_path_buf()),
            (None, Some(p)) => Ok(p.clone()),
            (None, None) => bail!("with --dataset-path, give --save-locator to keep the results"),
        }
    }
}

enum Target {
    /// Updates metadata only: write to the given path or back to --locator.
    InPlace(Option<PathBuf>),
    /// Writes new files: the locator goes to the given path.
    Fixed(PathBuf),
    /// Locator unchanged: only written when asked.
    Optional(Option<PathBuf>),
}

struct Ctx {
    json: bool,
    opts: BatchOptions,
}

impl Ctx {
    fn written(&self, source: &Source, step: Step, output: Output) -> Result<Status> {
        let dest = output
            .save_locator
            .unwrap_or_else(|| sibling_csv(&output.out));
        let step = step.param("format", output.format.as_str()).out(output.out);
        self.batch(source, vec![step], Target::Fixed(dest))
    }

    fn epochs(&self, source: &Source, step: Step, output: EpochOutput) -> Result<Status> {
        self.batch(
            source,
            vec![step.out(output.out)],
            Target::Optional(output.save_locator),
        )
    }

    fn batch(&self, source: &Source, steps: Vec<Step>, target: Target) -> Result<Status> {
        Ok(self.run_steps(source, steps, target)?.0)
    }

    fn run_steps(
        &self,
        source: &Source,
        steps: Vec<Step>,
        target: Target,
    ) -> Result<(Status, BatchResult)> {
        let loaded = Loaded::from_source(source)?;
        let dest = match target {
            Target::InPlace(explicit) => Some(loaded.default_target(explicit.as_deref())?),
            Target::Fixed(p) => Some(p),
            Target::Optional(p) => p,
        };
        let spec = PipelineSpec::new(steps);
        let result = run_batch(
            &loaded.selected,
            &spec,
            &Registry::with_builtins(),
            self.opts,
        )?;
        for r in &result.rows {
            let before = loaded
                .selected
                .rows()
                .iter()
                .find(|row| row.file_path == r.file_path);
            self.print_report(r, before);
        }
        let (ok, skipped, failed) = (
            result.count(|o| *o == RowOutcome::Ok),
            result.count(|o| *o == RowOutcome::Skipped),
            result.count(|o| matches!(o, RowOutcome::Failed(_))),
        );
        eprintln!("{ok} ok, {skipped} skipped, {failed} failed");
        if let Some(dest) = dest {
            save(&loaded.recombine(result.table.clone())?, &dest)?;
        }
        let status = if result.any_failed() {
            Status::Partial
        } else {
            Status::Success
        };
        Ok((status, result))
    }

    fn print_row(&self, row: &LocatorRow) {
        let sr = row
            .sampling_rate
            .map_or_else(|| "?".into(), |v| format!("{v}"));
        let dur = row.duration.map_or_else(|| "?".into(), |v| format!("{v}"));
        if self.json {
            println!(
                "{}",
                json!({
                    "file_path": row.file_path,
                    "domain_tag": row.domain_tag,
                    "file_type": row.file_type.as_str(),
                    "channels": row.channel_names.len(),
                    "sampling_rate": row.sampling_rate,
                    "duration": row.duration,
                    "completeness": row.completeness.as_str(),
                    "quality_score": row.quality_score,
                })
            );
        } else {
            println!(
                "{:<11} {}  {}  {}  {}ch  {sr} Hz  {dur} s",
                row.completeness.as_str(),
                row.domain_tag,
                row.file_path,
                row.file_type,
                row.channel_names.len()
            );
        }
    }

    fn print_report(&self, r: &RowReport, before: Option<&LocatorRow>) {
        if self.json {
            let mut v = serde_json::to_value(r).unwrap_or(Value::Null);
            if let Value::Object(m) = &mut v {
                if let Some(q) = r.row.quality_score {
                    m.insert("quality_score".into(), json!(q));
                }
                if let Some(u) = &r.row.units {
                    let u: Vec<&str> = u.iter().map(|u| u.as_str()).collect();
                    m.insert("units".into(), json!(u));
                }
                if let Some(e) = &r.row.events {
                    m.insert("events".into(), json!(e.len()));
                }
            }
            println!("{v}");
            return;
        }
        let mut line = match &r.outcome {
            RowOutcome::Ok => format!("ok       {}  {}", r.domain_tag, r.file_path),
            RowOutcome::Skipped => {
                format!("skipped  {}  {}  (unavailable)", r.domain_tag, r.file_path)
            }
            RowOutcome::Failed(why) => format!("failed   {}  {}  {why}", r.domain_tag, r.file_path),
        };
        if r.outcome == RowOutcome::Ok {
            let changed =
                |f: &dyn Fn(&LocatorRow) -> String| before.is_none_or(|b| f(b) != f(&r.row));
            if let Some(q) = r
                .row
                .quality_score
                .filter(|_| changed(&|x| format!("{:?}", x.quality_score)))
            {
                line.push_str(&format!("  quality={q:.1}"));
            }
            if let Some(u) = r
                .row
                .units
                .as_ref()
                .filter(|_| changed(&|x| format!("{:?}", x.units)))
            {
                let u: Vec<&str> = u.iter().map(|u| u.as_str()).collect();
                line.push_str(&format!("  units={}", u.join(",")));
            }
            if let Some(e) = r
                .row
                .events
                .as_ref()
                .filter(|_| changed(&|x| format!("{:?}", x.events)))
            {
                line.push_str(&format!("  events={}", e.len()));
            }
            for n in &r.epochs {
                line.push_str(&format!("  epochs={n}"));
            }
            if r.dropped_events > 0 {
                line.push_str(&format!("  dropped={}", r.dropped_events));
            }
            for out in &r.outputs {
                line.push_str(&format!("  -> {out}"));
            }
            line.push_str(&format!("  ({:.1} ms)", r.wall_time.as_secs_f64() * 1e3));
        }
        println!("{line}");
    }

    fn print_suggestion(&self, s: &MetadataSuggestion) {
        if self.json {
            println!("{}", serde_json::to_string(s).unwrap_or_default());
            return;
        }
        let names = s
            .channel_names
            .as_ref()
            .map_or_else(|| "-".into(), |n| n.join(","));
        let sr = s
            .sampling_rate
            .map_or_else(|| "-".into(), |v| format!("{v}"));
        let conf = match s.confidence {
            eegunify::llm::Confidence::High => "high",
            eegunify::llm::Confidence::Low => "low",
        };
        println!("confidence={conf}  sampling_rate={sr}  channel_names={names}");
    }
}
