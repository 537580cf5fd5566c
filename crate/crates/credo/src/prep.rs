//! Fitted preprocessing state: everything needed to replay the training
//! transform on new raw rows.

use credo_core::frame::{ColumnKind, Encoder, Frame, Imputer, ScalerParams};
use credo_core::lda::ProjectionLda;
use credo_core::Matrix;

use crate::error::{CliError, Result};

#[derive(Debug, Clone)]
pub struct Preprocessor {
    pub target: String,
    /// Every non-target column of the training CSV.
    pub input_columns: Vec<String>,
    /// Columns that survived null filtering, in order, with their kinds.
    pub columns: Vec<(String, ColumnKind)>,
    pub imputer: Imputer,
    pub encoder: Encoder,
    pub scaler: ScalerParams,
    pub projection: Option<ProjectionLda>,
}

impl Preprocessor {
    pub fn class_names(&self) -> &[String] {
        &self.encoder.class_names
    }

    /// Names of the model's input features.
    pub fn feature_names(&self) -> Vec<String> {
        match &self.projection {
            Some(p) => (1..=p.n_components()).map(|k| format!("LD{k}")).collect(),
            None => self.scaler.columns.clone(),
        }
    }

    /// Missing and unexpected columns of a raw frame, target excluded.
    pub fn schema_diff(&self, raw: &Frame) -> (Vec<String>, Vec<String>) {
        let present: Vec<&String> = raw.names().iter().filter(|n| **n != self.target).collect();
        let missing = self.columns.iter().map(|(n, _)| n).filter(|n| !present.contains(n)).cloned().collect();
        let extra = present.into_iter().filter(|n| !self.input_columns.contains(n)).cloned().collect();
        (missing, extra)
    }

    /// Raw rows to model inputs. Columns dropped at training time are
    /// ignored; a target column, if present, is ignored too.
    pub fn transform(&self, raw: &Frame) -> Result<Matrix> {
        let (missing, extra) = self.schema_diff(raw);
        if !missing.is_empty() || !extra.is_empty() {
            return Err(CliError::Data(format!(
                "schema mismatch: missing columns [{}], unexpected columns [{}]",
                missing.join(", "),
                extra.join(", ")
            )));
        }
        let mut keep = Vec::with_capacity(self.columns.len());
        for (name, kind) in &self.columns {
            let j = raw.position(name).expect("checked above");
            if raw.columns()[j].kind() != *kind {
                return Err(CliError::Data(format!("column '{name}' changed kind since training")));
            }
            keep.push(j);
        }
        let f = self.imputer.apply(&raw.select_columns(&keep))?;
        let f = self.scaler.apply(&self.encoder.apply(&f)?)?;
        let x = f.feature_matrix()?;
        Ok(match &self.projection {
            Some(p) => p.transform(&x)?,
            None => x,
        })
    }
}
