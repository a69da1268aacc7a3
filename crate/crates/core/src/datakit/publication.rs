use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use base64::engine::general_purpose::STANDARD as B64;
use base64::Engine;
use serde::{Deserialize, Serialize};

use super::labels::LabelSpace;
use crate::error::{Error, Result};
use crate::numcore::Tensor;

/// Grids with more values than this are written as base64 `f32` blobs.
pub const BLOB_THRESHOLD: usize = 256;

#[derive(Debug, Clone, PartialEq)]
pub enum Visual {
    /// `[H, W, C]` grid.
    Grid(Tensor),
    /// Precomputed feature vector.
    Features(Vec<f64>),
}

/// One post: optional visual content, text, optional caption and label.
#[derive(Debug, Clone, PartialEq)]
pub struct Publication {
    pub id: String,
    pub visual: Option<Visual>,
    pub text: String,
    pub caption: Option<String>,
    pub entity_features: Option<Vec<f64>>,
    pub label: usize,
}

impl Publication {
    pub fn validate(&self, labels: &LabelSpace) -> Result<()> {
        if self.visual.is_none() && self.text.trim().is_empty() {
            return Err(Error::Schema(format!("publication {:?} has neither visual nor text", self.id)));
        }
        labels.name(self.label)?;
        if let Some(Visual::Grid(g)) = &self.visual {
            if g.shape().len() != 3 || g.numel() == 0 {
                return Err(Error::Schema(format!("publication {:?}: grid shape {:?} is not H×W×C", self.id, g.shape())));
            }
        }
        let finite = |v: &[f64]| v.iter().all(|x| x.is_finite());
        let ok = match &self.visual {
            Some(Visual::Grid(g)) => g.is_finite(),
            Some(Visual::Features(f)) => finite(f),
            None => true,
        } && self.entity_features.as_deref().is_none_or(finite);
        if !ok {
            return Err(Error::Schema(format!("publication {:?} has non-finite values", self.id)));
        }
        Ok(())
    }

    /// Text followed by the caption when present.
    pub fn full_text(&self) -> String {
        match &self.caption {
            Some(c) if !c.is_empty() => format!("{} {}", self.text, c),
            _ => self.text.clone(),
        }
    }
}

/// Publications together with their label space.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub publications: Vec<Publication>,
    pub labels: LabelSpace,
}

impl Dataset {
    pub fn new(publications: Vec<Publication>, labels: LabelSpace) -> Result<Self> {
        labels.validate()?;
        for p in &publications {
            p.validate(&labels)?;
        }
        Ok(Self { publications, labels })
    }

    pub fn len(&self) -> usize {
        self.publications.len()
    }

    pub fn is_empty(&self) -> bool {
        self.publications.is_empty()
    }

    /// Count of publications per class id.
    pub fn label_histogram(&self) -> Vec<usize> {
        let mut h = vec![0; self.labels.len()];
        for p in &self.publications {
            h[p.label] += 1;
        }
        h
    }

    pub fn subset(&self, indices: &[usize]) -> Dataset {
        Dataset {
            publications: indices.iter().map(|&i| self.publications[i].clone()).collect(),
            labels: self.labels.clone(),
        }
    }

    /// Relabels every publication into the binary `[Hate, NoHate]` space.
    pub fn binarized(&self) -> Result<Dataset> {
        let publications = self
            .publications
            .iter()
            .map(|p| {
                Ok(Publication {
                    label: super::merge_to_binary(p.label, &self.labels)?,
                    ..p.clone()
                })
            })
            .collect::<Result<_>>()?;
        Ok(Dataset {
            publications,
            labels: LabelSpace::binary(),
        })
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Header {
    labels: LabelSpace,
}

#[derive(Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
enum VisualRecord {
    Grid(Vec<Vec<Vec<f64>>>),
    GridBlob { shape: [usize; 3], data: String },
    Features(Vec<f64>),
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Record {
    id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    visual: Option<VisualRecord>,
    #[serde(default)]
    text: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    caption: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    entity_features: Option<Vec<f64>>,
    label: LabelRef,
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum LabelRef {
    Name(String),
    Id(usize),
}

fn visual_to_record(v: &Visual) -> VisualRecord {
    match v {
        Visual::Features(f) => VisualRecord::Features(f.clone()),
        Visual::Grid(g) => {
            let &[h, w, c] = g.shape() else { unreachable!("validated grid") };
            if g.numel() > BLOB_THRESHOLD {
                let bytes: Vec<u8> = g.data().iter().flat_map(|&x| (x as f32).to_le_bytes()).collect();
                VisualRecord::GridBlob {
                    shape: [h, w, c],
                    data: B64.encode(bytes),
                }
            } else {
                let d = g.data();
                VisualRecord::Grid(
                    (0..h)
                        .map(|i| (0..w).map(|j| d[(i * w + j) * c..(i * w + j + 1) * c].to_vec()).collect())
                        .collect(),
                )
            }
        }
    }
}

fn visual_from_record(r: VisualRecord) -> std::result::Result<Visual, String> {
    match r {
        VisualRecord::Features(f) => Ok(Visual::Features(f)),
        VisualRecord::Grid(rows) => {
            let h = rows.len();
            let w = rows.first().map_or(0, Vec::len);
            let c = rows.first().and_then(|r| r.first()).map_or(0, Vec::len);
            if rows.iter().any(|r| r.len() != w || r.iter().any(|px| px.len() != c)) {
                return Err("ragged grid".into());
            }
            let data = rows.into_iter().flatten().flatten().collect();
            Tensor::new(vec![h, w, c], data).map(Visual::Grid).map_err(|e| e.to_string())
        }
        VisualRecord::GridBlob { shape, data } => {
            let bytes = B64.decode(data.as_bytes()).map_err(|e| format!("bad base64 grid: {e}"))?;
            let n: usize = shape.iter().product();
            if bytes.len() != 4 * n {
                return Err(format!("grid blob has {} bytes, shape {shape:?} needs {}", bytes.len(), 4 * n));
            }
            let values = bytes
                .chunks_exact(4)
                .map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]]) as f64)
                .collect();
            Tensor::new(shape.to_vec(), values).map(Visual::Grid).map_err(|e| e.to_string())
        }
    }
}

/// Reads a JSON Lines dataset. An optional first line `{"labels": {...}}`
/// declares the label space; otherwise `default_labels` is used, falling back
/// to the binary space.
pub fn load_jsonl_with(path: &Path, default_labels: Option<LabelSpace>) -> Result<Dataset> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut labels = default_labels;
    let mut publications = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line_no = i + 1;
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let value: serde_json::Value = serde_json::from_str(&line).map_err(|e| Error::Parse {
            line: line_no,
            message: e.to_string(),
        })?;
        if publications.is_empty() && value.get("labels").is_some() && value.get("id").is_none() {
            let h: Header = serde_json::from_value(value).map_err(|e| Error::Parse {
                line: line_no,
                message: e.to_string(),
            })?;
            h.labels.validate()?;
            labels = Some(h.labels);
            continue;
        }
        let space = labels.get_or_insert_with(LabelSpace::binary);
        let rec: Record = serde_json::from_value(value).map_err(|e| Error::Parse {
            line: line_no,
            message: e.to_string(),
        })?;
        let label = match rec.label {
            LabelRef::Name(n) => space.index_of(&n),
            LabelRef::Id(id) => space.name(id).map(|_| id),
        }
        .map_err(|e| Error::Schema(format!("line {line_no}: {e}")))?;
        let visual = rec
            .visual
            .map(visual_from_record)
            .transpose()
            .map_err(|message| Error::Parse { line: line_no, message })?;
        let p = Publication {
            id: rec.id,
            visual,
            text: rec.text,
            caption: rec.caption,
            entity_features: rec.entity_features,
            label,
        };
        p.validate(space).map_err(|e| Error::Schema(format!("line {line_no}: {e}")))?;
        publications.push(p);
    }
    Ok(Dataset {
        publications,
        labels: labels.unwrap_or_else(LabelSpace::binary),
    })
}

pub fn load_jsonl(path: &Path) -> Result<Dataset> {
    load_jsonl_with(path, None)
}

/// Writes a header line with the label space, then one record per line.
pub fn write_jsonl(dataset: &Dataset, path: &Path) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = BufWriter::new(file);
    let mut emit = |v: String| writeln!(out, "{v}").map_err(|e| Error::io(path, e));
    let header = Header {
        labels: dataset.labels.clone(),
    };
    emit(serde_json::to_string(&header).expect("header serializes"))?;
    for p in &dataset.publications {
        let rec = Record {
            id: p.id.clone(),
            visual: p.visual.as_ref().map(visual_to_record),
            text: p.text.clone(),
            caption: p.caption.clone(),
            entity_features: p.entity_features.clone(),
            label: LabelRef::Name(dataset.labels.name(p.label)?.to_string()),
        };
        emit(serde_json::to_string(&rec).map_err(|e| Error::Format(e.to_string()))?)?;
    }
    drop(emit);
    out.flush().map_err(|e| Error::io(path, e))
}
