//! Dataset CSV persistence with a JSON metadata sidecar.
//!
//! The CSV carries a header row of feature columns plus a final `label`
//! column. The sidecar (`<stem>.meta.json`) records domain tag, attribute
//! spec, and the empirical property at write time.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::data::{AttributeSpec, DomainTag, LabeledDataset, PropertyDistribution};
use crate::error::{CoreError, Result};

#[derive(Serialize, Deserialize)]
struct DatasetMeta {
    domain: DomainTag,
    attribute: AttributeSpec,
    empirical_property: Vec<f64>,
    n_samples: usize,
    n_features: usize,
}

/// Path of the metadata sidecar for a dataset CSV.
pub fn sidecar_path(csv_path: &Path) -> PathBuf {
    let mut p = csv_path.to_path_buf();
    p.set_extension("meta.json");
    p
}

pub fn write_csv(dataset: &LabeledDataset, path: &Path) -> Result<()> {
    let mut writer = csv::Writer::from_path(path)?;
    let dim = dataset.dim();
    let mut header: Vec<String> = (0..dim).map(|i| format!("f{i}")).collect();
    header.push("label".into());
    writer.write_record(&header)?;
    for (sample, label) in dataset.samples.iter().zip(&dataset.labels) {
        let mut record: Vec<String> = sample.iter().map(|v| v.to_string()).collect();
        record.push(label.to_string());
        writer.write_record(&record)?;
    }
    writer.flush()?;

    let meta = DatasetMeta {
        domain: dataset.domain,
        attribute: dataset.attribute.clone(),
        empirical_property: dataset.empirical_property().probs().to_vec(),
        n_samples: dataset.len(),
        n_features: dim,
    };
    std::fs::write(sidecar_path(path), serde_json::to_string_pretty(&meta)?)?;
    Ok(())
}

pub fn read_csv(path: &Path) -> Result<LabeledDataset> {
    let meta_text = std::fs::read_to_string(sidecar_path(path)).map_err(|e| {
        CoreError::InvalidConfig(format!(
            "missing dataset sidecar {}: {e}",
            sidecar_path(path).display()
        ))
    })?;
    let meta: DatasetMeta = serde_json::from_str(&meta_text)?;

    let mut reader = csv::Reader::from_path(path)?;
    let mut samples = Vec::new();
    let mut labels = Vec::new();
    for record in reader.records() {
        let record = record?;
        let n = record.len();
        if n != meta.n_features + 1 {
            return Err(CoreError::ShapeMismatch {
                context: format!("csv row in {}", path.display()),
                expected: meta.n_features + 1,
                found: n,
            });
        }
        let mut sample = Vec::with_capacity(n - 1);
        for field in record.iter().take(n - 1) {
            sample.push(field.parse::<f64>().map_err(|e| {
                CoreError::InvalidConfig(format!("bad feature value '{field}': {e}"))
            })?);
        }
        let label: usize = record[n - 1]
            .parse()
            .map_err(|e| CoreError::InvalidConfig(format!("bad label: {e}")))?;
        if label >= meta.attribute.n_classes {
            return Err(CoreError::InvalidConfig(format!(
                "label {label} out of range for {} classes",
                meta.attribute.n_classes
            )));
        }
        samples.push(sample);
        labels.push(label);
    }

    Ok(LabeledDataset {
        samples,
        labels,
        domain: meta.domain,
        attribute: meta.attribute,
    })
}

/// Empirical property recorded in a dataset's sidecar.
pub fn sidecar_property(path: &Path) -> Result<PropertyDistribution> {
    let meta: DatasetMeta = serde_json::from_str(&std::fs::read_to_string(sidecar_path(path))?)?;
    PropertyDistribution::new(meta.empirical_property)
}
