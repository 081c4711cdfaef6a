//! Run configuration: a single JSON document naming the model, the design
//! settings, an optional scenario and the outputs.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use tsobs::lmi::DesignSpec;
use tsobs::model_io::{ParamAffineDoc, TsModelDoc};
use tsobs::simulator::SimScenario;
use tsobs::tsmodel::{snl_decompose, ParamAffineModel, TsModel};

use crate::error::CliError;

/// A model given either as a path (relative to the config file) or inline.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ModelSource {
    Path(PathBuf),
    Inline(serde_json::Value),
}

fn default_directory() -> PathBuf {
    PathBuf::from("tsobs-out")
}

fn yes() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Outputs {
    #[serde(default = "default_directory")]
    pub directory: PathBuf,
    #[serde(default = "yes")]
    pub emit_csv: bool,
    #[serde(default = "yes")]
    pub emit_plots: bool,
    #[serde(default = "yes")]
    pub emit_report: bool,
}

impl Default for Outputs {
    fn default() -> Self {
        Outputs { directory: default_directory(), emit_csv: true, emit_plots: true, emit_report: true }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub param_affine_model: Option<ModelSource>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ts_model: Option<ModelSource>,
    #[serde(default)]
    pub design: DesignSpec,
    /// Previously written `design.json`, used by `simulate` and `certify`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub design_file: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scenario: Option<SimScenario>,
    #[serde(default)]
    pub outputs: Outputs,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

/// A loaded model; the parameter-affine source is kept when one was given.
#[derive(Debug, Clone)]
pub struct LoadedModel {
    pub ts: TsModel,
    pub param_affine: Option<ParamAffineModel>,
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        serde_json::from_str(text).map_err(|e| CliError::invalid(format!("config: {e}")))
    }

    /// Reads a config file; relative paths inside it resolve against its directory.
    pub fn load(path: &Path) -> Result<(Self, PathBuf), CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::io(format!("cannot read config {}: {e}", path.display())))?;
        let cfg = Self::parse(&text)?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok((cfg, base))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn model(&self, base: &Path) -> Result<LoadedModel, CliError> {
        match (&self.param_affine_model, &self.ts_model) {
            (Some(src), None) => {
                let doc: ParamAffineDoc = read_source(src, base, "param_affine_model")?;
                let pam = doc.to_model().map_err(|e| CliError::invalid(format!("param_affine_model: {e}")))?;
                let ts = snl_decompose(&pam).map_err(|e| CliError::invalid(format!("param_affine_model: {e}")))?;
                Ok(LoadedModel { ts, param_affine: Some(pam) })
            }
            (None, Some(src)) => {
                let doc: TsModelDoc = read_source(src, base, "ts_model")?;
                let ts = doc.to_model().map_err(|e| CliError::invalid(format!("ts_model: {e}")))?;
                Ok(LoadedModel { ts, param_affine: None })
            }
            (None, None) => Err(CliError::invalid("config must give one of param_affine_model or ts_model")),
            (Some(_), Some(_)) => Err(CliError::invalid("config gives both param_affine_model and ts_model; keep exactly one")),
        }
    }
}

pub fn resolve(base: &Path, p: &Path) -> PathBuf {
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        base.join(p)
    }
}

fn read_source<T: for<'de> Deserialize<'de>>(src: &ModelSource, base: &Path, field: &str) -> Result<T, CliError> {
    match src {
        ModelSource::Path(p) => {
            let path = resolve(base, p);
            let text = std::fs::read_to_string(&path)
                .map_err(|e| CliError::io(format!("{field}: cannot read {}: {e}", path.display())))?;
            tsobs::model_io::parse_json(&text).map_err(|e| CliError::invalid(format!("{field} ({}): {e}", path.display())))
        }
        ModelSource::Inline(v) => {
            T::deserialize(v).map_err(|e| CliError::invalid(format!("{field}: {e}")))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use tsobs::example;

    fn inline_example() -> RunConfig {
        let doc = ParamAffineDoc::from_model(&example::param_affine_model());
        RunConfig {
            param_affine_model: Some(ModelSource::Inline(serde_json::to_value(doc).unwrap())),
            ts_model: None,
            design: example::design_spec(),
            design_file: None,
            scenario: Some(example::scenario(10.0, 0.01)),
            outputs: Outputs::default(),
            seed: Some(7),
        }
    }

    #[test]
    fn round_trip() {
        let cfg = inline_example();
        assert_eq!(RunConfig::parse(&cfg.to_json()).unwrap(), cfg);
    }

    #[test]
    fn exactly_one_model() {
        let mut cfg = inline_example();
        cfg.ts_model = cfg.param_affine_model.clone();
        assert!(cfg.model(Path::new(".")).is_err());
        cfg.ts_model = None;
        cfg.param_affine_model = None;
        assert!(cfg.model(Path::new(".")).is_err());
    }

    #[test]
    fn unknown_field_rejected() {
        assert!(RunConfig::parse(r#"{"modle": 1}"#).is_err());
    }

    #[test]
    fn path_source_is_a_string() {
        let cfg = RunConfig::parse(r#"{"ts_model": "model.json"}"#).unwrap();
        assert_eq!(cfg.ts_model, Some(ModelSource::Path(PathBuf::from("model.json"))));
    }
}
