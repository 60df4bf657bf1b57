use std::path::Path;

use super::{CbmModel, ClassifierError};

pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, Default)]
pub struct LoadOptions {
    /// Schema version the caller expects; `None` accepts any.
    pub expected_schema_version: Option<String>,
    /// Load even when the schema version differs.
    pub allow_schema_mismatch: bool,
}

pub fn save_model(model: &CbmModel, path: &Path) -> Result<(), ClassifierError> {
    let json = serde_json::to_string_pretty(model).map_err(|e| ClassifierError::CorruptArtifact(e.to_string()))?;
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    let tmp = path.with_extension("json.tmp");
    std::fs::write(&tmp, json + "\n")?;
    std::fs::rename(&tmp, path)?;
    Ok(())
}

pub fn load_model(path: &Path, opts: &LoadOptions) -> Result<CbmModel, ClassifierError> {
    let text = std::fs::read_to_string(path)?;
    let model: CbmModel =
        serde_json::from_str(&text).map_err(|e| ClassifierError::CorruptArtifact(format!("{}: {e}", path.display())))?;
    if model.format_version != FORMAT_VERSION {
        return Err(ClassifierError::CorruptArtifact(format!(
            "unsupported format_version {}",
            model.format_version
        )));
    }
    let k = model.concepts.len();
    let dims = [
        model.coefficients.len(),
        model.scaler.means.len(),
        model.scaler.stds.len(),
    ];
    if dims.iter().any(|&d| d != k) || model.scaler.stds.iter().any(|s| s.is_nan() || *s <= 0.0) {
        return Err(ClassifierError::CorruptArtifact("inconsistent dimensions or scaler".into()));
    }
    if let Some(expected) = &opts.expected_schema_version {
        if *expected != model.schema_version && !opts.allow_schema_mismatch {
            return Err(ClassifierError::SchemaVersionMismatch {
                expected: expected.clone(),
                found: model.schema_version.clone(),
            });
        }
    }
    Ok(model)
}
