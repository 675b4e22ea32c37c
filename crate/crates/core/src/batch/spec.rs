use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use super::BatchError;

pub type Params = Map<String, Value>;

/// One pipeline step: an operation, its parameters and, optionally, the
/// directory its output is written to.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Step {
    pub op: String,
    #[serde(default)]
    pub params: Params,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
}

impl Step {
    pub fn new(op: impl Into<String>) -> Step {
        Step {
            op: op.into(),
            params: Params::new(),
            out: None,
        }
    }

    pub fn param(mut self, key: &str, value: impl Into<Value>) -> Step {
        self.params.insert(key.to_string(), value.into());
        self
    }

    pub fn out(mut self, dir: impl Into<PathBuf>) -> Step {
        self.out = Some(dir.into());
        self
    }
}

/// Ordered steps; serialised as a JSON array of `{op, params, out}`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct PipelineSpec {
    pub steps: Vec<Step>,
}

impl PipelineSpec {
    pub fn new(steps: Vec<Step>) -> Self {
        PipelineSpec { steps }
    }

    pub fn from_json(text: &str) -> Result<Self, BatchError> {
        serde_json::from_str(text)
            .map_err(|e| BatchError::SpecInvalid(format!("pipeline JSON: {e}")))
    }

    pub fn load(path: &Path) -> Result<Self, BatchError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| BatchError::SpecInvalid(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text)
    }
}

/// Typed access to a parameter map.
#[derive(Debug, Clone, Copy)]
pub struct ParamReader<'a>(pub &'a Params);

impl<'a> ParamReader<'a> {
    pub fn f64(&self, key: &str) -> Result<Option<f64>, String> {
        match self.0.get(key) {
            None | Some(Value::Null) => Ok(None),
            Some(v) => v
                .as_f64()
                .filter(|x| x.is_finite())
                .map(Some)
                .ok_or_else(|| format!("{key} must be a number")),
        }
    }

    pub fn required_f64(&self, key: &str) -> Result<f64, String> {
        self.f64(key)?
            .ok_or_else(|| format!("missing parameter {key}"))
    }

    pub fn positive(&self, key: &str) -> Result<Option<f64>, String> {
        match self.f64(key)? {
            Some(v) if v <= 0.0 => Err(format!("{key} must be positive")),
            other => Ok(other),
        }
    }

    pub fn usize(&self, key: &str) -> Result<Option<usize>, String> {
        match self.0.get(key) {
            None | Some(Value::Null) => Ok(None),
            Some(v) => v
                .as_u64()
                .map(|x| Some(x as usize))
                .ok_or_else(|| format!("{key} must be a non-negative integer")),
        }
    }

    pub fn str(&self, key: &str) -> Result<Option<&'a str>, String> {
        match self.0.get(key) {
            None | Some(Value::Null) => Ok(None),
            Some(Value::String(s)) => Ok(Some(s)),
            Some(_) => Err(format!("{key} must be a string")),
        }
    }

    pub fn str_list(&self, key: &str) -> Result<Option<Vec<String>>, String> {
        match self.0.get(key) {
            None | Some(Value::Null) => Ok(None),
            Some(Value::Array(items)) => items
                .iter()
                .map(|v| v.as_str().map(str::to_string))
                .collect::<Option<Vec<_>>>()
                .map(Some)
                .ok_or_else(|| format!("{key} must be a list of strings")),
            Some(_) => Err(format!("{key} must be a list of strings")),
        }
    }

    /// Rejects keys outside `allowed`.
    pub fn only(&self, allowed: &[&str]) -> Result<(), String> {
        match self.0.keys().find(|k| !allowed.contains(&k.as_str())) {
            Some(k) => Err(format!(
                "unknown parameter {k:?} (accepted: {})",
                allowed.join(", ")
            )),
            None => Ok(()),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn json_shape() {
        let spec = PipelineSpec::from_json(
            r#"[{"op":"filter","params":{"l_freq":1,"h_freq":49},"out":"f"},{"op":"quality"}]"#,
        )
        .unwrap();
        assert_eq!(spec.steps.len(), 2);
        assert_eq!(spec.steps[0].out.as_deref(), Some(Path::new("f")));
        assert_eq!(
            ParamReader(&spec.steps[0].params).f64("l_freq").unwrap(),
            Some(1.0)
        );
        assert!(spec.steps[1].params.is_empty());
        let back = PipelineSpec::from_json(&serde_json::to_string(&spec).unwrap()).unwrap();
        assert_eq!(back, spec);
        assert!(PipelineSpec::from_json(r#"[{"op":"x","bogus":1}]"#).is_err());
    }

    #[test]
    fn reader_types() {
        let p: Params = serde_json::from_str(r#"{"a":"s","b":[1],"c":-1,"d":["x"]}"#).unwrap();
        let r = ParamReader(&p);
        assert!(r.f64("a").is_err());
        assert!(r.str_list("b").is_err());
        assert!(r.usize("c").is_err());
        assert!(r.positive("c").is_err());
        assert_eq!(r.str_list("d").unwrap(), Some(vec!["x".to_string()]));
        assert!(r.only(&["a", "b", "c"]).is_err());
    }
}
