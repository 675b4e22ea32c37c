use std::collections::BTreeMap;
use std::sync::Arc;

use super::spec::{ParamReader, Params};
use super::BatchError;
use crate::cleaning::{
    bandpass_filter, ica_denoise, quality_score, FastIcaOptions, FilterKind, QualityReport,
};
use crate::formats::FormatKind;
use crate::locator::LocatorRow;
use crate::montage::Montage;
use crate::recording::{Recording, Unit};
use crate::unification::{
    align_channels, compute_norm_factors, convert_units, epoch_by_event, epoch_for_pretraining,
    get_events, infer_units, resample, EpochSet,
};

/// What a step does to a row.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OpKind {
    /// Replaces the recording; may write it out.
    Transform,
    /// Updates locator attributes (and labels on the recording).
    Annotate,
    /// Produces an epoch batch; requires an output directory.
    Epoch,
}

/// Mutable per-row state threaded through the steps.
#[derive(Debug, Clone)]
pub struct RowState {
    pub row: LocatorRow,
    pub recording: Recording,
    /// Row seed derived from the run seed and the file path.
    pub seed: u64,
}

pub enum StepOutput {
    Done,
    Epochs(Box<EpochSet>),
    /// Quality was scored; carries the per-channel breakdown.
    Scored(QualityReport),
}

pub trait Operation: Send + Sync {
    fn kind(&self) -> OpKind;

    /// Checks parameters before any file is touched.
    fn validate(&self, params: &Params) -> Result<(), String>;

    fn apply(&self, state: &mut RowState, params: &Params) -> Result<StepOutput, String>;

    /// Suffix appended to the source stem of written outputs.
    fn output_suffix(&self) -> &'static str {
        ""
    }

    /// True when a transform only rewrites the container, leaving samples as
    /// they were.
    fn keeps_data(&self) -> bool {
        false
    }
}

/// Named operations available to pipelines.
#[derive(Clone)]
pub struct Registry {
    ops: BTreeMap<String, Arc<dyn Operation>>,
}

impl Default for Registry {
    fn default() -> Self {
        Registry::with_builtins()
    }
}

impl Registry {
    pub fn empty() -> Self {
        Registry {
            ops: BTreeMap::new(),
        }
    }

    /// filter, ica, resample, align, infer-units, convert-units, quality,
    /// norm, events, epoch-by-event, epoch-pretrain and save-as.
    pub fn with_builtins() -> Self {
        let mut r = Registry::empty();
        let builtins: [(&str, Arc<dyn Operation>); 12] = [
            ("filter", Arc::new(Filter)),
            ("ica", Arc::new(Ica)),
            ("resample", Arc::new(Resample)),
            ("align", Arc::new(Align)),
            ("infer-units", Arc::new(InferUnits)),
            ("convert-units", Arc::new(ConvertUnits)),
            ("quality", Arc::new(Quality)),
            ("norm", Arc::new(Norm)),
            ("events", Arc::new(Events)),
            ("epoch-by-event", Arc::new(EpochByEvent)),
            ("epoch-pretrain", Arc::new(EpochPretrain)),
            ("save-as", Arc::new(SaveAs)),
        ];
        for (name, op) in builtins {
            r.register(name, op).expect("built-in names are unique");
        }
        r
    }

    pub fn register(&mut self, name: &str, op: Arc<dyn Operation>) -> Result<(), BatchError> {
        if self.ops.contains_key(name) {
            return Err(BatchError::DuplicateName(name.to_string()));
        }
        self.ops.insert(name.to_string(), op);
        Ok(())
    }

    /// Registers a parameterless transform.
    pub fn register_fn<F>(&mut self, name: &str, f: F) -> Result<(), BatchError>
    where
        F: Fn(&Recording) -> Result<Recording, String> + Send + Sync + 'static,
    {
        self.register(name, Arc::new(FnOperation(f)))
    }

    pub fn get(&self, name: &str) -> Option<&Arc<dyn Operation>> {
        self.ops.get(name)
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.ops.keys().map(String::as_str)
    }
}

struct FnOperation<F>(F);

impl<F> Operation for FnOperation<F>
where
    F: Fn(&Recording) -> Result<Recording, String> + Send + Sync,
{
    fn kind(&self) -> OpKind {
        OpKind::Transform
    }

    fn validate(&self, params: &Params) -> Result<(), String> {
        ParamReader(params).only(&["format"])
    }

    fn apply(&self, state: &mut RowState, _: &Params) -> Result<StepOutput, String> {
        state.recording = (self.0)(&state.recording)?;
        Ok(StepOutput::Done)
    }
}

/// `format` is accepted by every transform: it picks the file type written
/// when the step has an output directory.
pub fn output_format(params: &Params) -> Result<FormatKind, String> {
    match ParamReader(params).str("format")? {
        None => Ok(FormatKind::RawSidecar),
        Some(s) => match s.parse::<FormatKind>()? {
            k @ (FormatKind::RawSidecar | FormatKind::Edf) => Ok(k),
            other => Err(format!("cannot write {other} files; use rawsidecar or edf")),
        },
    }
}

struct Filter;

impl Filter {
    fn read(params: &Params) -> Result<(FilterKind, Option<f64>, Option<f64>, usize), String> {
        let p = ParamReader(params);
        p.only(&["type", "l_freq", "h_freq", "order", "format"])?;
        output_format(params)?;
        let kind = p.str("type")?.unwrap_or("bandpass").parse::<FilterKind>()?;
        let (l, h) = (p.positive("l_freq")?, p.positive("h_freq")?);
        let order = p.usize("order")?.unwrap_or(4);
        if order == 0 {
            return Err("order must be at least 1".into());
        }
        match kind {
            FilterKind::Bandpass => match (l, h) {
                (Some(l), Some(h)) if l < h => {}
                (Some(_), Some(_)) => return Err("l_freq must be below h_freq".into()),
                _ => return Err("bandpass needs l_freq and h_freq".into()),
            },
            FilterKind::Lowpass if h.is_none() => return Err("lowpass needs h_freq".into()),
            FilterKind::Highpass if l.is_none() => return Err("highpass needs l_freq".into()),
            _ => {}
        }
        Ok((kind, l, h, order))
    }
}

impl Operation for Filter {
    fn kind(&self) -> OpKind {
        OpKind::Transform
    }

    fn validate(&self, params: &Params) -> Result<(), String> {
        Self::read(params).map(|_| ())
    }

    fn apply(&self, state: &mut RowState, params: &Params) -> Result<StepOutput, String> {
        let (kind, l, h, order) = Self::read(params)?;
        state.recording =
            bandpass_filter(&state.recording, kind, l, h, order).map_err(|e| e.to_string())?;
        Ok(StepOutput::Done)
    }
}

struct Ica;

impl Ica {
    fn read(params: &Params) -> Result<(FastIcaOptions, f64), String> {
        let p = ParamReader(params);
        p.only(&[
            "max_components",
            "method",
            "kurtosis_threshold",
            "tol",
            "max_iter",
            "format",
        ])?;
        output_format(params)?;
        if let Some(m) = p.str("method")? {
            if !m.eq_ignore_ascii_case("fastica") {
                return Err(format!("unsupported ICA method {m:?}; only fastica"));
            }
        }
        let defaults = FastIcaOptions::default();
        let opts = FastIcaOptions {
            max_components: p
                .usize("max_components")?
                .unwrap_or(defaults.max_components),
            tol: p.positive("tol")?.unwrap_or(defaults.tol),
            max_iter: p.usize("max_iter")?.unwrap_or(defaults.max_iter),
            seed: 0,
        };
        if opts.max_components == 0 {
            return Err("max_components must be at least 1".into());
        }
        let threshold = p.positive("kurtosis_threshold")?.unwrap_or(5.0);
        Ok((opts, threshold))
    }
}

impl Operation for Ica {
    fn kind(&self) -> OpKind {
        OpKind::Transform
    }

    fn validate(&self, params: &Params) -> Result<(), String> {
        Self::read(params).map(|_| ())
    }

    fn apply(&self, state: &mut RowState, params: &Params) -> Result<StepOutput, String> {
        let (opts, threshold) = Self::read(params)?;
        let opts = FastIcaOptions {
            seed: state.seed,
            ..opts
        };
        let denoised = ica_denoise(&state.recording, opts, threshold).map_err(|e| e.to_string())?;
        state.recording = denoised.recording;
        Ok(StepOutput::Done)
    }
}

struct Resample;

impl Operation for Resample {
    fn kind(&self) -> OpKind {
        OpKind::Transform
    }

    fn validate(&self, params: &Params) -> Result<(), String> {
        let p = ParamReader(params);
        p.only(&["new_sfreq", "format"])?;
        output_format(params)?;
        p.positive("new_sfreq")?
            .ok_or("missing parameter new_sfreq")?;
        Ok(())
    }

    fn apply(&self, state: &mut RowState, params: &Params) -> Result<StepOutput, String> {
        let sfreq = ParamReader(params).required_f64("new_sfreq")?;
        state.recording = resample(&state.recording, sfreq).map_err(|e| e.to_string())?;
        Ok(StepOutput::Done)
    }
}

struct Align;

impl Operation for Align {
    fn kind(&self) -> OpKind {
        OpKind::Transform
    }

    fn validate(&self, params: &Params) -> Result<(), String> {
        let p = ParamReader(params);
        p.only(&["channel_order", "format"])?;
        output_format(params)?;
        match p.str_list("channel_order")? {
            Some(names) if !names.is_empty() => Ok(()),
            _ => Err("channel_order must list at least one channel".into()),
        }
    }

    fn apply(&self, state: &mut RowState, params: &Params) -> Result<StepOutput, String> {
        let order = ParamReader(params)
            .str_list("channel_order")?
            .unwrap_or_default();
        state.recording = align_channels(&state.recording, &order, Montage::standard_1010())
            .map_err(|e| e.to_string())?;
        Ok(StepOutput::Done)
    }
}

struct InferUnits;

impl Operation for InferUnits {
    fn kind(&self) -> OpKind {
        OpKind::Annotate
    }

    fn validate(&self, params: &Params) -> Result<(), String> {
        ParamReader(params).only(&[])
    }

    fn apply(&self, state: &mut RowState, _: &Params) -> Result<StepOutput, String> {
        let units = infer_units(&state.recording);
        state.recording = state
            .recording
            .clone()
            .with_units(units.clone())
            .map_err(|e| e.to_string())?;
        state.row.units = Some(units);
        Ok(StepOutput::Done)
    }
}

struct ConvertUnits;

impl Operation for ConvertUnits {
    fn kind(&self) -> OpKind {
        OpKind::Transform
    }

    fn validate(&self, params: &Params) -> Result<(), String> {
        let p = ParamReader(params);
        p.only(&["target", "format"])?;
        output_format(params)?;
        match p.str("target")?.map(str::parse::<Unit>) {
            Some(Ok(u)) if u != Unit::Unknown => Ok(()),
            _ => Err("target must be one of V, mV, uV".into()),
        }
    }

    fn apply(&self, state: &mut RowState, params: &Params) -> Result<StepOutput, String> {
        let target: Unit = ParamReader(params)
            .str("target")?
            .unwrap_or_default()
            .parse()
            .map_err(|e: String| e)?;
        state.recording = convert_units(&state.recording, target).map_err(|e| e.to_string())?;
        Ok(StepOutput::Done)
    }
}

struct Quality;

impl Operation for Quality {
    fn kind(&self) -> OpKind {
        OpKind::Annotate
    }

    fn validate(&self, params: &Params) -> Result<(), String> {
        ParamReader(params).only(&[])
    }

    fn apply(&self, state: &mut RowState, _: &Params) -> Result<StepOutput, String> {
        let q = quality_score(&state.recording).map_err(|e| e.to_string())?;
        state.row.quality_score = Some(q.score);
        Ok(StepOutput::Scored(q))
    }
}

struct Norm;

impl Operation for Norm {
    fn kind(&self) -> OpKind {
        OpKind::Annotate
    }

    fn validate(&self, params: &Params) -> Result<(), String> {
        ParamReader(params).only(&[])
    }

    fn apply(&self, state: &mut RowState, _: &Params) -> Result<StepOutput, String> {
        let f = compute_norm_factors(&state.recording).map_err(|e| e.to_string())?;
        state.row.norm_mean = Some(f.mean);
        state.row.norm_std = Some(f.std);
        Ok(StepOutput::Done)
    }
}

struct Events;

impl Operation for Events {
    fn kind(&self) -> OpKind {
        OpKind::Annotate
    }

    fn validate(&self, params: &Params) -> Result<(), String> {
        ParamReader(params).only(&[])
    }

    fn apply(&self, state: &mut RowState, _: &Params) -> Result<StepOutput, String> {
        let events = get_events(&state.recording, Some(&state.row));
        state.recording = state.recording.clone().with_events(events.clone());
        state.row.events = Some(events);
        Ok(StepOutput::Done)
    }
}

struct EpochByEvent;

impl Operation for EpochByEvent {
    fn kind(&self) -> OpKind {
        OpKind::Epoch
    }

    fn validate(&self, params: &Params) -> Result<(), String> {
        let p = ParamReader(params);
        p.only(&["seg_sec"])?;
        p.positive("seg_sec")?.ok_or("missing parameter seg_sec")?;
        Ok(())
    }

    fn apply(&self, state: &mut RowState, params: &Params) -> Result<StepOutput, String> {
        let seg = ParamReader(params).required_f64("seg_sec")?;
        let events = get_events(&state.recording, Some(&state.row));
        let set = epoch_by_event(&state.recording, &events, seg).map_err(|e| e.to_string())?;
        Ok(StepOutput::Epochs(Box::new(set)))
    }

    fn output_suffix(&self) -> &'static str {
        "_event_epochs"
    }
}

struct EpochPretrain;

impl Operation for EpochPretrain {
    fn kind(&self) -> OpKind {
        OpKind::Epoch
    }

    fn validate(&self, params: &Params) -> Result<(), String> {
        let p = ParamReader(params);
        p.only(&["seg_sec", "stride_sec"])?;
        p.positive("seg_sec")?.ok_or("missing parameter seg_sec")?;
        p.positive("stride_sec")?;
        Ok(())
    }

    fn apply(&self, state: &mut RowState, params: &Params) -> Result<StepOutput, String> {
        let p = ParamReader(params);
        let seg = p.required_f64("seg_sec")?;
        let set = epoch_for_pretraining(&state.recording, seg, p.f64("stride_sec")?)
            .map_err(|e| e.to_string())?;
        Ok(StepOutput::Epochs(Box::new(set)))
    }

    fn output_suffix(&self) -> &'static str {
        "_pretrain_epochs"
    }
}

/// Identity transform; with an output directory it rewrites the file in
/// the requested format.
struct SaveAs;

impl Operation for SaveAs {
    fn kind(&self) -> OpKind {
        OpKind::Transform
    }

    fn validate(&self, params: &Params) -> Result<(), String> {
        ParamReader(params).only(&["format"])?;
        output_format(params).map(|_| ())
    }

    fn apply(&self, _: &mut RowState, _: &Params) -> Result<StepOutput, String> {
        Ok(StepOutput::Done)
    }

    fn keeps_data(&self) -> bool {
        true
    }
}
