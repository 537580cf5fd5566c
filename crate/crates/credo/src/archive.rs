//! Model archives: a directory holding `manifest.json`, a flat blob of
//! little-endian doubles (`arrays.bin`) and its shape index (`index.json`).

use std::path::Path;

use credo_core::frame::{ColumnKind, Encoder, Fill, Imputer, ScalerMode, ScalerParams};
use credo_core::lda::ProjectionLda;
use credo_core::params::{ParamArray, ParamSet, Persist};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{CliError, Result};
use crate::models::Fitted;
use crate::prep::Preprocessor;

pub const FORMAT: &str = "credo-archive";
pub const VERSION: u32 = 1;
const BLOB: &str = "arrays.bin";
const INDEX: &str = "index.json";
const MANIFEST: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    pub format: String,
    pub version: u32,
    pub model_kind: String,
    pub schema_hash: String,
    pub target: String,
    pub class_names: Vec<String>,
    pub input_columns: Vec<String>,
    pub columns: Vec<ColumnEntry>,
    pub feature_names: Vec<String>,
    pub projection: bool,
    pub imputer: Vec<FillEntry>,
    pub encoder: Vec<GroupEntry>,
    pub scaler: ScalerEntry,
    pub blob: String,
    pub index: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ColumnEntry {
    pub name: String,
    pub kind: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FillEntry {
    pub column: String,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub numeric: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub categorical: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GroupEntry {
    pub column: String,
    pub categories: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScalerEntry {
    pub mode: String,
    pub columns: Vec<String>,
    pub location: Vec<f64>,
    pub scale: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IndexEntry {
    pub name: String,
    pub shape: Vec<usize>,
    /// Byte offset into the blob.
    pub offset: usize,
}

fn kind_name(k: ColumnKind) -> &'static str {
    match k {
        ColumnKind::Numeric => "numeric",
        ColumnKind::Categorical => "categorical",
    }
}

fn parse_kind(s: &str) -> Result<ColumnKind> {
    match s {
        "numeric" => Ok(ColumnKind::Numeric),
        "categorical" => Ok(ColumnKind::Categorical),
        _ => Err(CliError::Data(format!("unknown column kind '{s}' in archive"))),
    }
}

/// SHA-256 over everything that fixes the input and output layout.
pub fn schema_hash(
    target: &str,
    class_names: &[String],
    inputs: &[String],
    columns: &[ColumnEntry],
    features: &[String],
) -> String {
    let mut h = Sha256::new();
    let mut field = |s: &str| {
        h.update((s.len() as u64).to_le_bytes());
        h.update(s.as_bytes());
    };
    field(target);
    class_names.iter().for_each(|c| field(c));
    field("|");
    inputs.iter().for_each(|c| field(c));
    field("|");
    for c in columns {
        field(&c.name);
        field(&c.kind);
    }
    field("|");
    features.iter().for_each(|f| field(f));
    h.finalize().iter().map(|b| format!("{b:02x}")).collect()
}

/// Everything an archive holds.
#[derive(Debug, Clone)]
pub struct Archive {
    pub prep: Preprocessor,
    pub model: Fitted,
}

impl Archive {
    pub fn manifest(&self) -> Manifest {
        let p = &self.prep;
        let columns: Vec<ColumnEntry> =
            p.columns.iter().map(|(n, k)| ColumnEntry { name: n.clone(), kind: kind_name(*k).into() }).collect();
        let feature_names = p.feature_names();
        Manifest {
            format: FORMAT.into(),
            version: VERSION,
            model_kind: self.model.kind().into(),
            schema_hash: schema_hash(&p.target, p.class_names(), &p.input_columns, &columns, &feature_names),
            target: p.target.clone(),
            class_names: p.class_names().to_vec(),
            input_columns: p.input_columns.clone(),
            columns,
            feature_names,
            projection: p.projection.is_some(),
            imputer: p
                .imputer
                .fills
                .iter()
                .map(|(c, f)| match f {
                    Fill::Numeric(v) => FillEntry { column: c.clone(), numeric: Some(*v), categorical: None },
                    Fill::Categorical(s) => FillEntry { column: c.clone(), numeric: None, categorical: Some(s.clone()) },
                })
                .collect(),
            encoder: p.encoder.groups.iter().map(|(c, cats)| GroupEntry { column: c.clone(), categories: cats.clone() }).collect(),
            scaler: ScalerEntry {
                mode: match p.scaler.mode {
                    ScalerMode::ZScore => "zscore".into(),
                    ScalerMode::MinMax => "minmax".into(),
                },
                columns: p.scaler.columns.clone(),
                location: p.scaler.location.clone(),
                scale: p.scaler.scale.clone(),
            },
            blob: BLOB.into(),
            index: INDEX.into(),
        }
    }

    fn params(&self) -> ParamSet {
        let mut all = ParamSet::new();
        all.extend_prefixed("model", self.model.to_params());
        if let Some(p) = &self.prep.projection {
            all.extend_prefixed("projection", p.to_params());
        }
        all
    }

    /// Serialized files as (file name, bytes).
    pub fn files(&self) -> Vec<(&'static str, Vec<u8>)> {
        let mut blob = Vec::new();
        let mut index = Vec::new();
        for a in self.params().arrays {
            index.push(IndexEntry { name: a.name, shape: a.shape, offset: blob.len() });
            for v in a.data {
                blob.extend_from_slice(&v.to_le_bytes());
            }
        }
        vec![(MANIFEST, pretty(&self.manifest())), (INDEX, pretty(&index)), (BLOB, blob)]
    }

    pub fn save(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
        for (name, bytes) in self.files() {
            let path = dir.join(name);
            std::fs::write(&path, bytes).map_err(|e| CliError::io(path, e))?;
        }
        Ok(())
    }

    pub fn load(dir: &Path) -> Result<Archive> {
        let read = |name: &str| {
            let path = dir.join(name);
            std::fs::read(&path).map_err(|e| CliError::io(path, e))
        };
        let manifest: Manifest = parse_json(&read(MANIFEST)?, MANIFEST)?;
        if manifest.format != FORMAT || manifest.version != VERSION {
            return Err(CliError::Data(format!(
                "unsupported archive {} v{} (expected {FORMAT} v{VERSION})",
                manifest.format, manifest.version
            )));
        }
        let expected = schema_hash(
            &manifest.target,
            &manifest.class_names,
            &manifest.input_columns,
            &manifest.columns,
            &manifest.feature_names,
        );
        if manifest.schema_hash != expected {
            return Err(CliError::Data("archive schema hash does not match its manifest".into()));
        }
        let index: Vec<IndexEntry> = parse_json(&read(&manifest.index)?, INDEX)?;
        let blob = read(&manifest.blob)?;
        let params = unpack(&index, &blob)?;

        let projection = if manifest.projection {
            Some(ProjectionLda::from_params(&params.sub("projection"))?)
        } else {
            None
        };
        let model = Fitted::from_params(&manifest.model_kind, &params.sub("model"))?;
        let prep = Preprocessor {
            target: manifest.target.clone(),
            input_columns: manifest.input_columns.clone(),
            columns: manifest.columns.iter().map(|c| Ok((c.name.clone(), parse_kind(&c.kind)?))).collect::<Result<_>>()?,
            imputer: Imputer {
                fills: manifest
                    .imputer
                    .iter()
                    .map(|f| match (&f.numeric, &f.categorical) {
                        (Some(v), None) => Ok((f.column.clone(), Fill::Numeric(*v))),
                        (None, Some(s)) => Ok((f.column.clone(), Fill::Categorical(s.clone()))),
                        _ => Err(CliError::Data(format!("bad imputer entry for '{}'", f.column))),
                    })
                    .collect::<Result<_>>()?,
            },
            encoder: Encoder {
                target: manifest.target.clone(),
                class_names: manifest.class_names.clone(),
                groups: manifest.encoder.iter().map(|g| (g.column.clone(), g.categories.clone())).collect(),
            },
            scaler: ScalerParams {
                mode: match manifest.scaler.mode.as_str() {
                    "zscore" => ScalerMode::ZScore,
                    "minmax" => ScalerMode::MinMax,
                    m => return Err(CliError::Data(format!("unknown scaler mode '{m}' in archive"))),
                },
                columns: manifest.scaler.columns.clone(),
                location: manifest.scaler.location.clone(),
                scale: manifest.scaler.scale.clone(),
            },
            projection,
        };
        let archive = Archive { prep, model };
        if archive.prep.feature_names() != manifest.feature_names
            || archive.model.model().n_features() != manifest.feature_names.len()
        {
            return Err(CliError::Data("archive feature layout is inconsistent".into()));
        }
        Ok(archive)
    }
}

fn parse_json<T: serde::de::DeserializeOwned>(bytes: &[u8], what: &str) -> Result<T> {
    let de = &mut serde_json::Deserializer::from_slice(bytes);
    serde_path_to_error::deserialize(de).map_err(|e| CliError::Data(format!("{what}: at '{}': {}", e.path(), e.inner())))
}

fn unpack(index: &[IndexEntry], blob: &[u8]) -> Result<ParamSet> {
    let mut arrays = Vec::with_capacity(index.len());
    let mut expected_offset = 0;
    for e in index {
        let n: usize = e.shape.iter().product();
        if e.offset != expected_offset || e.offset + 8 * n > blob.len() {
            return Err(CliError::Data(format!("array '{}' does not fit the blob", e.name)));
        }
        let data = blob[e.offset..e.offset + 8 * n]
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
            .collect();
        arrays.push(ParamArray { name: e.name.clone(), shape: e.shape.clone(), data });
        expected_offset += 8 * n;
    }
    if expected_offset != blob.len() {
        return Err(CliError::Data("blob has trailing bytes".into()));
    }
    Ok(ParamSet { arrays })
}

fn pretty<T: Serialize>(v: &T) -> Vec<u8> {
    serde_json::to_vec_pretty(v).expect("archive metadata serializes")
}
