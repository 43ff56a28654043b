use std::collections::BTreeMap;

use log::warn;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::model::{statistical_labels, ModelDims, Params, TaggerModel};
use super::{LabelSet, NerError, Tag};
use crate::annotations::AnnotationSet;
use crate::schema::VersionId;
use crate::text::Corpus;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Optimizer {
    Sgd,
    Adam,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub epochs: usize,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub rng_seed: u64,
    pub dropout: f64,
    pub optimizer: Optimizer,
    pub dims: ModelDims,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 20,
            learning_rate: 0.01,
            batch_size: 8,
            rng_seed: 0,
            dropout: 0.2,
            optimizer: Optimizer::Adam,
            dims: ModelDims::default(),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), NerError> {
        let bad = |m: &str| Err(NerError::InvalidConfig(m.into()));
        if self.epochs == 0 {
            return bad("epochs must be at least 1");
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad("learning_rate must be positive");
        }
        if self.batch_size == 0 {
            return bad("batch_size must be at least 1");
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return bad("dropout must be in [0, 1)");
        }
        if self.dims.rows == 0 || self.dims.dim == 0 {
            return bad("dims must be positive");
        }
        Ok(())
    }
}

/// Recorded in the model file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingMeta {
    pub seed: u64,
    pub epochs: usize,
    pub lr: f64,
    pub batch_size: usize,
    pub dropout: f64,
    pub optimizer: Optimizer,
    /// mean token loss on the training set after each epoch, without dropout
    pub loss_curve: Vec<f64>,
}

/// One training sentence: token surfaces and gold label indices.
#[derive(Debug, Clone, PartialEq)]
pub struct Example {
    pub tokens: Vec<String>,
    pub tags: Vec<usize>,
}

/// Converts annotated documents into per-sentence BILOU examples.
///
/// Spans that do not fall on token boundaries are widened to the tokens they
/// touch, and spans crossing a sentence end are cut at it; both are logged.
pub fn examples_from(corpus: &Corpus, set: &AnnotationSet, labels: &LabelSet) -> Result<Vec<Example>, NerError> {
    let mut out = Vec::new();
    for (doc_id, mentions) in set.iter() {
        let doc = corpus.get(doc_id).ok_or_else(|| NerError::UnknownDoc(doc_id.to_string()))?;
        let mut types = Vec::with_capacity(mentions.len());
        for m in mentions {
            types.push(labels.type_index(&m.label).ok_or_else(|| NerError::LabelOutsideSchema(m.label.clone()))?);
        }
        for (sent, tokens) in doc.sentences().iter().zip(doc.sentence_tokens()) {
            if tokens.is_empty() {
                continue;
            }
            let mut tags = vec![Tag::O; tokens.len()];
            for (m, &ty) in mentions.iter().zip(&types) {
                if m.start < sent.0 || m.start >= sent.1 {
                    continue;
                }
                let covered: Vec<usize> =
                    (0..tokens.len()).filter(|&i| tokens[i].start < m.end && tokens[i].end > m.start).collect();
                let (Some(&first), Some(&last)) = (covered.first(), covered.last()) else {
                    warn!("{doc_id}: span {}..{} covers no token, skipped", m.start, m.end);
                    continue;
                };
                if tokens[first].start != m.start || tokens[last].end != m.end {
                    warn!(
                        "{doc_id}: span {}..{} snapped to tokens {}..{}",
                        m.start, m.end, tokens[first].start, tokens[last].end
                    );
                }
                if m.end > sent.1 {
                    warn!("{doc_id}: span {}..{} crosses a sentence end, cut", m.start, m.end);
                }
                if tags[first..=last].iter().any(|t| *t != Tag::O) {
                    warn!("{doc_id}: span {}..{} collides after snapping, skipped", m.start, m.end);
                    continue;
                }
                if first == last {
                    tags[first] = Tag::U(ty);
                } else {
                    tags[first] = Tag::B(ty);
                    for t in &mut tags[first + 1..last] {
                        *t = Tag::I(ty);
                    }
                    tags[last] = Tag::L(ty);
                }
            }
            out.push(Example {
                tokens: tokens.into_iter().map(|t| t.surface).collect(),
                tags: tags.into_iter().map(|t| labels.index(t)).collect(),
            });
        }
    }
    Ok(out)
}

/// Trains a tagger over all statistical types of `version`.
pub fn train(
    corpus: &Corpus,
    set: &AnnotationSet,
    version: VersionId,
    config: &TrainConfig,
) -> Result<TaggerModel, NerError> {
    let labels = statistical_labels(version);
    let examples = examples_from(corpus, set, &labels)?;
    train_examples(version, labels, &examples, config)
}

struct Adam {
    m: Params,
    v: Params,
    step: i32,
}

const BETA1: f64 = 0.9;
const BETA2: f64 = 0.999;
const ADAM_EPS: f64 = 1e-8;

/// Seeded minibatch training on prepared examples. Deterministic given the
/// examples and config: one ChaCha8 stream drives initialisation, shuffling
/// and dropout, and all reductions run in a fixed order.
pub fn train_examples(
    version: VersionId,
    labels: LabelSet,
    examples: &[Example],
    config: &TrainConfig,
) -> Result<TaggerModel, NerError> {
    config.validate()?;
    let examples: Vec<&Example> = examples.iter().filter(|e| !e.tokens.is_empty()).collect();
    if examples.is_empty() {
        return Err(NerError::EmptyDataset);
    }
    if let Some(bad) = examples.iter().flat_map(|e| &e.tags).find(|&&t| t >= labels.len()) {
        return Err(NerError::LabelOutsideSchema(format!("label index {bad}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.rng_seed);
    let mut model = TaggerModel::init(version, labels, config.dims, &mut rng);
    let n_labels = model.labels.len();
    let rows: Vec<Vec<_>> =
        examples.iter().map(|e| e.tokens.iter().map(|t| model.hash_rows(t)).collect()).collect();
    let mut order: Vec<usize> = (0..examples.len()).collect();
    let mut adam = Adam { m: Params::zeros(config.dims, n_labels), v: Params::zeros(config.dims, n_labels), step: 0 };
    let mut grad = Params::zeros(config.dims, n_labels);
    let mut loss_curve = Vec::with_capacity(config.epochs);

    for _ in 0..config.epochs {
        order.shuffle(&mut rng);
        for batch in order.chunks(config.batch_size) {
            for g in grad.groups_mut() {
                g.fill(0.0);
            }
            let n_tokens: usize = batch.iter().map(|&i| examples[i].tokens.len()).sum();
            let scale = 1.0 / n_tokens as f64;
            for &i in batch {
                let trace = model.forward(rows[i].clone(), Some((config.dropout, &mut rng)));
                model.backward(&trace, &examples[i].tags, scale, &mut grad, false);
            }
            match config.optimizer {
                Optimizer::Sgd => {
                    for (p, g) in model.params.groups_mut().into_iter().zip(grad.groups()) {
                        for (pi, gi) in p.iter_mut().zip(g) {
                            *pi -= config.learning_rate * gi;
                        }
                    }
                }
                Optimizer::Adam => {
                    adam.step += 1;
                    let c1 = 1.0 - BETA1.powi(adam.step);
                    let c2 = 1.0 - BETA2.powi(adam.step);
                    let groups = model.params.groups_mut().into_iter().zip(grad.groups());
                    for ((p, g), (m, v)) in groups.zip(adam.m.groups_mut().into_iter().zip(adam.v.groups_mut())) {
                        for (((pi, gi), mi), vi) in p.iter_mut().zip(g).zip(m.iter_mut()).zip(v.iter_mut()) {
                            *mi = BETA1 * *mi + (1.0 - BETA1) * gi;
                            *vi = BETA2 * *vi + (1.0 - BETA2) * gi * gi;
                            *pi -= config.learning_rate * (*mi / c1) / ((*vi / c2).sqrt() + ADAM_EPS);
                        }
                    }
                }
            }
        }
        let (mut total, mut count) = (0.0, 0usize);
        for (i, e) in examples.iter().enumerate() {
            let trace = model.forward(rows[i].clone(), None);
            total += model.loss(&trace, &e.tags);
            count += e.tags.len();
        }
        loss_curve.push(total / count as f64);
    }
    if !model.is_finite() {
        return Err(NerError::InvalidConfig("training diverged to non-finite weights".into()));
    }
    model.meta = Some(TrainingMeta {
        seed: config.rng_seed,
        epochs: config.epochs,
        lr: config.learning_rate,
        batch_size: config.batch_size,
        dropout: config.dropout,
        optimizer: config.optimizer,
        loss_curve,
    });
    Ok(model)
}

/// Maximum relative error between analytic and central-difference gradients.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GradCheckReport {
    pub per_group: BTreeMap<String, f64>,
    pub max_relative_error: f64,
    pub coordinates_checked: usize,
    /// largest analytic gradient magnitude seen
    pub max_abs_gradient: f64,
}

/// Per-group cap on checked coordinates; larger groups are sampled at a fixed stride.
const MAX_COORDS_PER_GROUP: usize = 2048;
/// Differences are taken relative to `|a| + |n|`, floored so that two
/// gradients that are both ~0 compare absolutely.
const REL_FLOOR: f64 = 1e-6;

/// Compares the backward pass with central finite differences of the mean
/// token loss, without dropout. Embedding coordinates are checked on the rows
/// the example selects (all others have zero gradient by construction).
pub fn gradient_check(model: &TaggerModel, example: &Example, epsilon: f64) -> GradCheckReport {
    check(model, example, epsilon, false)
}

/// [`gradient_check`] against a deliberately broken backward pass.
pub fn gradient_check_mutant(model: &TaggerModel, example: &Example, epsilon: f64) -> GradCheckReport {
    check(model, example, epsilon, true)
}

fn check(model: &TaggerModel, example: &Example, epsilon: f64, mutant: bool) -> GradCheckReport {
    assert!((1e-6..=1e-3).contains(&epsilon), "epsilon must be in [1e-6, 1e-3]");
    assert!(!example.tokens.is_empty() && example.tokens.len() == example.tags.len());
    let rows: Vec<_> = example.tokens.iter().map(|t| model.hash_rows(t)).collect();
    let n = example.tokens.len() as f64;
    let mut analytic = Params::zeros(model.dims, model.labels.len());
    let trace = model.forward(rows.clone(), None);
    model.backward(&trace, &example.tags, 1.0 / n, &mut analytic, mutant);

    let d = model.dims.dim;
    let mut embed_coords: Vec<usize> =
        rows.iter().flatten().flat_map(|&r| r * d..(r + 1) * d).collect();
    embed_coords.sort_unstable();
    embed_coords.dedup();

    let mut probe = model.clone();
    let loss_at = |probe: &mut TaggerModel, g: usize, c: usize, value: f64| {
        probe.params.groups_mut()[g][c] = value;
        let tr = probe.forward(rows.clone(), None);
        probe.loss(&tr, &example.tags) / n
    };

    let names = Params::group_names();
    let mut report = GradCheckReport {
        per_group: BTreeMap::new(),
        max_relative_error: 0.0,
        coordinates_checked: 0,
        max_abs_gradient: 0.0,
    };
    for (g, name) in names.iter().enumerate() {
        let len = model.params.groups()[g].len();
        let coords: Vec<usize> = if g == 0 {
            embed_coords.clone()
        } else {
            let stride = len.div_ceil(MAX_COORDS_PER_GROUP).max(1);
            (0..len).step_by(stride).collect()
        };
        let mut worst: f64 = 0.0;
        for c in coords {
            let orig = model.params.groups()[g][c];
            let plus = loss_at(&mut probe, g, c, orig + epsilon);
            let minus = loss_at(&mut probe, g, c, orig - epsilon);
            probe.params.groups_mut()[g][c] = orig;
            let numeric = (plus - minus) / (2.0 * epsilon);
            let a = analytic.groups()[g][c];
            let rel = (a - numeric).abs() / (a.abs() + numeric.abs()).max(REL_FLOOR);
            worst = worst.max(rel);
            report.max_abs_gradient = report.max_abs_gradient.max(a.abs());
            report.coordinates_checked += 1;
        }
        report.max_relative_error = report.max_relative_error.max(worst);
        report.per_group.insert(name.clone(), worst);
    }
    report
}
