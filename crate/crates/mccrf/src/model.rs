//! Model files: the unary network, the pattern table and how they were trained.

use std::path::Path;

use mccrf_core::crf::PatternTable;
use mccrf_core::learn::{TrainConfig, UnaryModel};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::instance::from_json;

pub const MODEL_FORMAT: &str = "mccrf-model/1";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Stage {
    Unary,
    End2end,
}

impl Stage {
    pub fn name(self) -> &'static str {
        match self {
            Stage::Unary => "unary",
            Stage::End2end => "end2end",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Layer {
    pub name: String,
    /// `[rows, cols]`; `weights` is row-major, one row per output unit.
    pub shape: [usize; 2],
    pub weights: Vec<Vec<f64>>,
    pub bias: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PatternDoc {
    pub gamma_000: f64,
    pub gamma_110: f64,
    pub gamma_111: f64,
    pub gamma_max: f64,
}

impl From<PatternTable> for PatternDoc {
    fn from(t: PatternTable) -> Self {
        Self { gamma_000: t.gamma[0], gamma_110: t.gamma[1], gamma_111: t.gamma[2], gamma_max: t.gamma_max }
    }
}

impl From<PatternDoc> for PatternTable {
    fn from(d: PatternDoc) -> Self {
        PatternTable { gamma: [d.gamma_000, d.gamma_110, d.gamma_111], gamma_max: d.gamma_max }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainConfigDoc {
    pub unary_rate: f64,
    pub end_to_end_rate: f64,
    pub pattern_rate_scale: f64,
    pub unary_epochs: usize,
    pub end_to_end_epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
    pub iterations: usize,
    pub validation_fraction: f64,
}

impl From<TrainConfig> for TrainConfigDoc {
    fn from(c: TrainConfig) -> Self {
        Self {
            unary_rate: c.unary_rate,
            end_to_end_rate: c.end_to_end_rate,
            pattern_rate_scale: c.pattern_rate_scale,
            unary_epochs: c.unary_epochs,
            end_to_end_epochs: c.end_to_end_epochs,
            batch_size: c.batch_size,
            seed: c.seed,
            iterations: c.iterations,
            validation_fraction: c.validation_fraction,
        }
    }
}

impl From<TrainConfigDoc> for TrainConfig {
    fn from(c: TrainConfigDoc) -> Self {
        TrainConfig {
            unary_rate: c.unary_rate,
            end_to_end_rate: c.end_to_end_rate,
            pattern_rate_scale: c.pattern_rate_scale,
            unary_epochs: c.unary_epochs,
            end_to_end_epochs: c.end_to_end_epochs,
            batch_size: c.batch_size,
            seed: c.seed,
            iterations: c.iterations,
            validation_fraction: c.validation_fraction,
        }
    }
}

/// One training stage as it was run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainingRecord {
    pub stage: Stage,
    /// Dataset location as given on the command line.
    pub data: String,
    pub instances: usize,
    pub config: TrainConfigDoc,
    pub best_epoch: usize,
    pub clamped_probabilities: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelFile {
    pub format: String,
    pub stage: Stage,
    pub input_dim: usize,
    pub hidden: usize,
    pub layers: Vec<Layer>,
    pub pattern: PatternDoc,
    /// Oldest first.
    pub history: Vec<TrainingRecord>,
}

fn split_layer(name: &str, flat: &[f64], rows: usize, cols: usize) -> Layer {
    let (w, b) = flat.split_at(rows * cols);
    Layer {
        name: name.into(),
        shape: [rows, cols],
        weights: w.chunks(cols.max(1)).map(<[f64]>::to_vec).take(rows).collect(),
        bias: b.to_vec(),
    }
}

impl ModelFile {
    pub fn new(model: &UnaryModel, table: PatternTable, stage: Stage, history: Vec<TrainingRecord>) -> Self {
        let (d, h, p) = (model.input_dim(), model.hidden(), model.params());
        let layers = if h == 0 {
            vec![split_layer("output", p, 2, d)]
        } else {
            let first = (d + 1) * h;
            vec![split_layer("hidden", &p[..first], h, d), split_layer("output", &p[first..], 2, h)]
        };
        Self { format: MODEL_FORMAT.into(), stage, input_dim: d, hidden: h, layers, pattern: table.into(), history }
    }

    /// Rebuilds the network, checking every layer shape.
    pub fn unary_model(&self) -> Result<UnaryModel> {
        let (d, h) = (self.input_dim, self.hidden);
        let expected: Vec<(&str, [usize; 2])> =
            if h == 0 { vec![("output", [2, d])] } else { vec![("hidden", [h, d]), ("output", [2, h])] };
        if self.layers.len() != expected.len() {
            return Err(Error::schema("layers", format!("expected {} layers, found {}", expected.len(), self.layers.len())));
        }
        let mut params = Vec::with_capacity(UnaryModel::parameter_count(d, h));
        for (i, (layer, (name, shape))) in self.layers.iter().zip(&expected).enumerate() {
            if layer.name != *name || layer.shape != *shape {
                return Err(Error::schema(
                    format!("layers[{i}]"),
                    format!("expected `{name}` with shape {shape:?}, found `{}` with shape {:?}", layer.name, layer.shape),
                ));
            }
            if layer.weights.len() != shape[0] {
                return Err(Error::schema(format!("layers[{i}].weights"), format!("expected {} rows", shape[0])));
            }
            for (r, row) in layer.weights.iter().enumerate() {
                if row.len() != shape[1] {
                    return Err(Error::schema(format!("layers[{i}].weights[{r}]"), format!("expected {} columns", shape[1])));
                }
                params.extend_from_slice(row);
            }
            if layer.bias.len() != shape[0] {
                return Err(Error::schema(format!("layers[{i}].bias"), format!("expected {} entries", shape[0])));
            }
            params.extend_from_slice(&layer.bias);
        }
        Ok(UnaryModel::from_parts(d, h, params)?)
    }

    pub fn table(&self) -> PatternTable {
        self.pattern.into()
    }

    pub fn to_json(&self) -> String {
        let mut text = serde_json::to_string_pretty(self).expect("model serializes");
        text.push('\n');
        text
    }

    pub fn parse(text: &str) -> Result<Self> {
        let file: ModelFile = from_json(text)?;
        if file.format != MODEL_FORMAT {
            return Err(Error::schema("format", format!("unsupported format `{}`, expected `{MODEL_FORMAT}`", file.format)));
        }
        file.unary_model()?;
        if !file.table().is_finite() {
            return Err(Error::schema("pattern", "non-finite pattern parameter"));
        }
        Ok(file)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text).map_err(|e| e.in_file(path))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()).map_err(|e| Error::io(path, e))
    }
}
