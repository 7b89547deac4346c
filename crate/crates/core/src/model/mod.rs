//! The localizer: per-class feature extractors, a shared graph-attention
//! aggregator and a shared scoring head.

mod batch;
mod config;

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub use batch::{ClassGroup, GraphBatch};
pub use config::{Ablation, ModelConfig};

use crate::autodiff::init::{orthogonal, xavier_uniform};
use crate::autodiff::{Checkpoint, ParamStore, Tape, Tensor, Var};
use crate::dataset::FailureRecord;
use crate::error::{Error, Result};
use crate::fdg::{FailureClass, SystemCatalog};
use crate::ranking::{Ranking, RankingProducer};
use crate::scalar::Real;

pub const MANIFEST_FORMAT_VERSION: u32 = 1;

/// A failure class as the model sees it: its id and metric column order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassSpec {
    pub id: String,
    pub metrics: Vec<String>,
}

impl From<&FailureClass> for ClassSpec {
    fn from(c: &FailureClass) -> Self {
        Self { id: c.id.clone(), metrics: c.metric_names.clone() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelManifest {
    pub format_version: u32,
    pub config: ModelConfig,
    pub classes: Vec<ClassSpec>,
}

/// Tape handles produced by one forward pass, all in batch vertex order.
#[derive(Debug, Clone, Copy)]
pub struct ForwardVars {
    /// `[N, Z]`
    pub unit_features: Var,
    /// `[N, Z*H]`; absent when aggregation is ablated.
    pub aggregated: Option<Var>,
    /// `[N, 1]`
    pub scores: Var,
}

#[derive(Debug, Clone, PartialEq)]
pub struct UnitFeature {
    pub unit_id: String,
    pub vector: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AggregatedFeature {
    pub unit_id: String,
    pub vector: Vec<f64>,
}

/// Everything a single forward pass yields for one failure.
#[derive(Debug, Clone, PartialEq)]
pub struct Inference {
    pub failure_id: String,
    pub scores: BTreeMap<String, f64>,
    pub unit_features: BTreeMap<String, Vec<f64>>,
    pub aggregated: BTreeMap<String, Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LocalizerModel<T> {
    config: ModelConfig,
    classes: Vec<ClassSpec>,
    params: ParamStore<T>,
}

fn extractor_param(class: &str, name: &str) -> String {
    format!("extractor/{class}/{name}")
}

fn layer_param(layer: usize, name: &str) -> String {
    format!("aggregator/layer{layer:02}/{name}")
}

impl<T: Real> LocalizerModel<T> {
    /// Freshly initialised model for the given classes.
    pub fn new(config: ModelConfig, classes: Vec<ClassSpec>, seed: u64) -> Result<Self> {
        config.validate()?;
        if classes.is_empty() {
            return Err(Error::InvalidArgument("model needs at least one failure class".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut params = ParamStore::new();
        let (z, g, ch, k) = (config.feature_dim, config.gru_hidden, config.conv_channels, config.kernel_width);
        let d = config.aggregated_dim();
        for class in &classes {
            let m = class.metrics.len();
            if m == 0 {
                return Err(Error::InvalidArgument(format!("class {} has no metrics", class.id)));
            }
            let conv_in = if config.ablation.no_gru {
                m
            } else {
                params.insert(extractor_param(&class.id, "gru.w_ih"), xavier_uniform(&[m, 3 * g], m, g, &mut rng));
                let mut w_hh = vec![T::zero(); g * 3 * g];
                for gate in 0..3 {
                    let q: Vec<T> = orthogonal(g, &mut rng);
                    for r in 0..g {
                        for c in 0..g {
                            w_hh[r * 3 * g + gate * g + c] = q[r * g + c];
                        }
                    }
                }
                params.insert(extractor_param(&class.id, "gru.w_hh"), Tensor::new(vec![g, 3 * g], w_hh)?);
                params.insert(extractor_param(&class.id, "gru.b_ih"), Tensor::zeros(&[3 * g]));
                params.insert(extractor_param(&class.id, "gru.b_hh"), Tensor::zeros(&[3 * g]));
                g
            };
            params.insert(extractor_param(&class.id, "conv.kernel"), xavier_uniform(&[k, conv_in, ch], k * conv_in, k * ch, &mut rng));
            params.insert(extractor_param(&class.id, "conv.bias"), Tensor::zeros(&[ch]));
            let flat = config.conv_len() * ch;
            params.insert(extractor_param(&class.id, "dense.weight"), xavier_uniform(&[flat, z], flat, z, &mut rng));
            params.insert(extractor_param(&class.id, "dense.bias"), Tensor::zeros(&[z]));
        }
        let head_in = if config.ablation.no_agg {
            z
        } else {
            params.insert("aggregator/input.weight", xavier_uniform(&[z, d], z, d, &mut rng));
            params.insert("aggregator/input.bias", Tensor::zeros(&[d]));
            for l in 0..config.layers {
                params.insert(layer_param(l, "weight"), xavier_uniform(&[d, d], d, d, &mut rng));
                params.insert(layer_param(l, "bias"), Tensor::zeros(&[d]));
                params.insert(layer_param(l, "attention"), xavier_uniform(&[config.heads, 2 * z], 2 * z, 1, &mut rng));
            }
            d
        };
        params.insert("classifier/hidden.weight", xavier_uniform(&[head_in, d], head_in, d, &mut rng));
        params.insert("classifier/hidden.bias", Tensor::zeros(&[d]));
        params.insert("classifier/output.weight", xavier_uniform(&[d, 1], d, 1, &mut rng));
        params.insert("classifier/output.bias", Tensor::zeros(&[1]));
        Ok(Self { config, classes, params })
    }

    pub fn from_catalog(config: ModelConfig, catalog: &SystemCatalog, seed: u64) -> Result<Self> {
        Self::new(config, catalog.classes.iter().map(ClassSpec::from).collect(), seed)
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn classes(&self) -> &[ClassSpec] {
        &self.classes
    }

    pub fn params(&self) -> &ParamStore<T> {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut ParamStore<T> {
        &mut self.params
    }

    pub fn set_params(&mut self, params: ParamStore<T>) -> Result<()> {
        for (name, p) in self.params.iter() {
            let other = params.value(name)?;
            if other.shape() != p.value.shape() {
                return Err(Error::Shape(format!("parameter {name}: {:?} vs {:?}", other.shape(), p.value.shape())));
            }
        }
        if params.len() != self.params.len() {
            return Err(Error::Validation("parameter sets differ".into()));
        }
        self.params = params;
        Ok(())
    }

    pub fn batch(&self, records: &[&FailureRecord], unit_classes: &BTreeMap<String, String>) -> Result<GraphBatch<T>> {
        GraphBatch::build(records, &self.classes, unit_classes, self.config.window)
    }

    /// Unit-level features `[N, Z]` in batch vertex order.
    pub fn extract(&self, tape: &mut Tape<T>, batch: &GraphBatch<T>) -> Result<Var> {
        let mut outputs = Vec::with_capacity(batch.groups.len());
        for group in &batch.groups {
            let class = &self.classes[group.class_index].id;
            outputs.push(self.extract_group(tape, class, group.windows.clone())?);
        }
        let stacked = tape.concat_rows(&outputs)?;
        tape.gather_rows(stacked, &batch.gather)
    }

    /// Runs one class extractor on stacked windows `[n, W, M]`.
    pub fn extract_group(&self, tape: &mut Tape<T>, class: &str, windows: Tensor<T>) -> Result<Var> {
        let n = windows.shape()[0];
        let p = |tape: &mut Tape<T>, name: &str| tape.param(&self.params, &extractor_param(class, name));
        let x = tape.input(windows);
        let seq = if self.config.ablation.no_gru {
            x
        } else {
            let (wi, wh) = (p(tape, "gru.w_ih")?, p(tape, "gru.w_hh")?);
            let (bi, bh) = (p(tape, "gru.b_ih")?, p(tape, "gru.b_hh")?);
            tape.gru(x, wi, wh, bi, bh)?
        };
        let (ck, cb) = (p(tape, "conv.kernel")?, p(tape, "conv.bias")?);
        let conv = tape.conv1d(seq, ck, cb)?;
        let act = tape.gelu(conv);
        let flat = tape.reshape(act, &[n, self.config.conv_len() * self.config.conv_channels])?;
        let (dw, db) = (p(tape, "dense.weight")?, p(tape, "dense.bias")?);
        tape.dense(flat, dw, db)
    }

    /// Projection to `Z*H` followed by the stacked attention layers.
    pub fn aggregate(&self, tape: &mut Tape<T>, features: Var, batch: &GraphBatch<T>) -> Result<Var> {
        let w = tape.param(&self.params, "aggregator/input.weight")?;
        let b = tape.param(&self.params, "aggregator/input.bias")?;
        let mut h = tape.dense(features, w, b)?;
        for l in 0..self.config.layers {
            let w = tape.param(&self.params, &layer_param(l, "weight"))?;
            let b = tape.param(&self.params, &layer_param(l, "bias"))?;
            let a = tape.param(&self.params, &layer_param(l, "attention"))?;
            let g = tape.dense(h, w, b)?;
            let mixed = tape.graph_attention(g, a, batch.neighborhoods.clone(), self.config.heads, self.config.attention_slope)?;
            h = tape.add(h, mixed)?;
        }
        Ok(h)
    }

    /// `sigmoid(Dense(GELU(Dense(x))))`, one score per row.
    pub fn classify(&self, tape: &mut Tape<T>, x: Var) -> Result<Var> {
        let w1 = tape.param(&self.params, "classifier/hidden.weight")?;
        let b1 = tape.param(&self.params, "classifier/hidden.bias")?;
        let w2 = tape.param(&self.params, "classifier/output.weight")?;
        let b2 = tape.param(&self.params, "classifier/output.bias")?;
        let h = tape.dense(x, w1, b1)?;
        let h = tape.gelu(h);
        let logit = tape.dense(h, w2, b2)?;
        Ok(tape.sigmoid(logit))
    }

    pub fn forward(&self, tape: &mut Tape<T>, batch: &GraphBatch<T>) -> Result<ForwardVars> {
        let unit_features = self.extract(tape, batch)?;
        if self.config.ablation.no_agg {
            let scores = self.classify(tape, unit_features)?;
            return Ok(ForwardVars { unit_features, aggregated: None, scores });
        }
        let aggregated = self.aggregate(tape, unit_features, batch)?;
        let scores = self.classify(tape, aggregated)?;
        Ok(ForwardVars { unit_features, aggregated: Some(aggregated), scores })
    }

    /// Scores and intermediate features for each record.
    pub fn infer(&self, records: &[&FailureRecord], unit_classes: &BTreeMap<String, String>) -> Result<Vec<Inference>> {
        let batch = self.batch(records, unit_classes)?;
        let mut tape = Tape::new();
        let vars = self.forward(&mut tape, &batch)?;
        let z = self.config.feature_dim;
        let d = self.config.aggregated_dim();
        let scores = tape.value(vars.scores).to_f64_vec();
        let feats = tape.value(vars.unit_features).to_f64_vec();
        let agg = vars.aggregated.map(|a| tape.value(a).to_f64_vec());
        let mut out = Vec::with_capacity(records.len());
        for (record, range) in records.iter().zip(&batch.records) {
            let mut inf = Inference {
                failure_id: record.failure_id.clone(),
                scores: BTreeMap::new(),
                unit_features: BTreeMap::new(),
                aggregated: BTreeMap::new(),
            };
            for i in range.clone() {
                let id = batch.unit_ids[i].clone();
                inf.scores.insert(id.clone(), scores[i]);
                inf.unit_features.insert(id.clone(), feats[i * z..(i + 1) * z].to_vec());
                if let Some(a) = &agg {
                    inf.aggregated.insert(id, a[i * d..(i + 1) * d].to_vec());
                }
            }
            out.push(inf);
        }
        Ok(out)
    }

    /// [`Self::infer`] over `records` in batches of `chunk` failures.
    pub fn infer_all(
        &self,
        records: &[FailureRecord],
        unit_classes: &BTreeMap<String, String>,
        chunk: usize,
    ) -> Result<Vec<Inference>> {
        let mut out = Vec::with_capacity(records.len());
        for part in records.chunks(chunk.max(1)) {
            let refs: Vec<&FailureRecord> = part.iter().collect();
            out.extend(self.infer(&refs, unit_classes)?);
        }
        Ok(out)
    }

    pub fn localize(&self, record: &FailureRecord, unit_classes: &BTreeMap<String, String>) -> Result<Ranking> {
        let inf = self.infer(&[record], unit_classes)?.remove(0);
        Ranking::from_scores(inf.scores)
    }

    pub fn unit_features(&self, record: &FailureRecord, unit_classes: &BTreeMap<String, String>) -> Result<Vec<UnitFeature>> {
        let inf = self.infer(&[record], unit_classes)?.remove(0);
        Ok(inf.unit_features.into_iter().map(|(unit_id, vector)| UnitFeature { unit_id, vector }).collect())
    }

    pub fn aggregated_features(
        &self,
        record: &FailureRecord,
        unit_classes: &BTreeMap<String, String>,
    ) -> Result<Vec<AggregatedFeature>> {
        let inf = self.infer(&[record], unit_classes)?.remove(0);
        Ok(inf.aggregated.into_iter().map(|(unit_id, vector)| AggregatedFeature { unit_id, vector }).collect())
    }

    pub fn manifest(&self) -> ModelManifest {
        ModelManifest { format_version: MANIFEST_FORMAT_VERSION, config: self.config, classes: self.classes.clone() }
    }

    /// Writes the parameter checkpoint to `path` and the manifest next to it.
    pub fn save(&self, path: &Path) -> Result<()> {
        Checkpoint::from_store(&self.params).save(path)?;
        std::fs::write(manifest_path(path), serde_json::to_string_pretty(&self.manifest())?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let manifest: ModelManifest = serde_json::from_str(&std::fs::read_to_string(manifest_path(path))?)?;
        if manifest.format_version != MANIFEST_FORMAT_VERSION {
            return Err(Error::Validation(format!("unsupported manifest version {}", manifest.format_version)));
        }
        let mut model = Self::new(manifest.config, manifest.classes, 0)?;
        model.set_params(Checkpoint::load(path)?.to_store()?)?;
        Ok(model)
    }

    /// Fails unless every class in `catalog` has an extractor with the same
    /// metric order.
    pub fn check_catalog(&self, catalog: &SystemCatalog) -> Result<()> {
        for class in &catalog.classes {
            match self.classes.iter().find(|c| c.id == class.id) {
                Some(spec) if spec.metrics == class.metric_names => {}
                Some(_) => return Err(Error::Validation(format!("metric order of class {} differs from the model", class.id))),
                None => return Err(Error::Validation(format!("model has no extractor for failure class {}", class.id))),
            }
        }
        Ok(())
    }
}

/// `model.json` -> `model.manifest.json`.
pub fn manifest_path(checkpoint: &Path) -> PathBuf {
    let stem = checkpoint.file_stem().and_then(|s| s.to_str()).unwrap_or("model");
    checkpoint.with_file_name(format!("{stem}.manifest.json"))
}

/// A frozen model bound to a unit-to-class map, usable by the evaluation
/// harness.
#[derive(Debug, Clone)]
pub struct Localizer<T> {
    pub model: LocalizerModel<T>,
    pub unit_classes: BTreeMap<String, String>,
}

impl<T: Real> Localizer<T> {
    pub fn new(model: LocalizerModel<T>, catalog: &SystemCatalog) -> Self {
        Self { model, unit_classes: catalog.unit_class_map() }
    }
}

impl<T: Real> RankingProducer for Localizer<T> {
    fn name(&self) -> &str {
        "dejavu"
    }

    fn rank(&self, record: &FailureRecord) -> Result<Ranking> {
        self.model.localize(record, &self.unit_classes)
    }
}
