use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::decode::decode;
use super::embed::rows_for;
use super::train::TrainingMeta;
use super::{LabelSet, NerError};
use crate::annotations::AnnotationSet;
use crate::mention::{Mention, Provenance};
use crate::schema::{Category, SchemaVersion, VersionId};
use crate::text::Document;

pub const NUM_SEEDS: usize = 4;
pub const CONV_LAYERS: usize = 2;
pub const CONV_WINDOW: usize = 3;

/// Embedding table rows and vector width.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelDims {
    pub rows: usize,
    pub dim: usize,
}

impl Default for ModelDims {
    fn default() -> Self {
        ModelDims { rows: 5000, dim: 64 }
    }
}

/// All trainable weights. Matrices are row-major: `conv_w[l]` is
/// `(CONV_WINDOW * dim) x dim`, `out_w` is `dim x labels`.
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct Params {
    pub embed: Vec<f64>,
    pub conv_w: Vec<Vec<f64>>,
    pub conv_b: Vec<Vec<f64>>,
    pub out_w: Vec<f64>,
    pub out_b: Vec<f64>,
}

impl Params {
    pub fn zeros(dims: ModelDims, n_labels: usize) -> Self {
        let d = dims.dim;
        Params {
            embed: vec![0.0; dims.rows * d],
            conv_w: vec![vec![0.0; CONV_WINDOW * d * d]; CONV_LAYERS],
            conv_b: vec![vec![0.0; d]; CONV_LAYERS],
            out_w: vec![0.0; d * n_labels],
            out_b: vec![0.0; n_labels],
        }
    }

    pub fn group_names() -> Vec<String> {
        let mut names = vec!["embed".to_string()];
        for l in 0..CONV_LAYERS {
            names.push(format!("conv{l}.w"));
            names.push(format!("conv{l}.b"));
        }
        names.push("output.w".into());
        names.push("output.b".into());
        names
    }

    /// Groups in [`Params::group_names`] order.
    pub fn groups(&self) -> Vec<&[f64]> {
        let mut out: Vec<&[f64]> = vec![&self.embed];
        for l in 0..CONV_LAYERS {
            out.push(&self.conv_w[l]);
            out.push(&self.conv_b[l]);
        }
        out.push(&self.out_w);
        out.push(&self.out_b);
        out
    }

    pub fn groups_mut(&mut self) -> Vec<&mut [f64]> {
        let mut out: Vec<&mut [f64]> = vec![&mut self.embed];
        for (w, b) in self.conv_w.iter_mut().zip(self.conv_b.iter_mut()) {
            out.push(w);
            out.push(b);
        }
        out.push(&mut self.out_w);
        out.push(&mut self.out_b);
        out
    }
}

/// Forward activations kept for the backward pass.
pub(crate) struct Trace {
    pub rows: Vec<[usize; NUM_SEEDS]>,
    /// layer inputs: `xs[0]` embeddings (after dropout), `xs[CONV_LAYERS]` encoder output
    pub xs: Vec<Vec<f64>>,
    /// tanh activations per layer
    pub hs: Vec<Vec<f64>>,
    pub mask: Option<Vec<f64>>,
    pub probs: Vec<f64>,
}

/// Hashed-embedding BILOU tagger.
#[derive(Debug, Clone, PartialEq)]
pub struct TaggerModel {
    pub(crate) schema_version: VersionId,
    pub(crate) labels: LabelSet,
    pub(crate) dims: ModelDims,
    pub(crate) seeds: [u64; NUM_SEEDS],
    pub(crate) params: Params,
    pub(crate) meta: Option<TrainingMeta>,
}

fn uniform(rng: &mut ChaCha8Rng, v: &mut [f64], scale: f64) {
    for x in v {
        *x = (rng.gen::<f64>() * 2.0 - 1.0) * scale;
    }
}

/// The statistical types of a schema version, in schema order.
pub(crate) fn statistical_labels(version: VersionId) -> LabelSet {
    let names = SchemaVersion::get(version).names_in(Category::Statistical);
    LabelSet::new(names.into_iter().map(String::from).collect())
}

impl TaggerModel {
    /// A randomly initialised model over every statistical type of `version`.
    pub fn new(version: VersionId, dims: ModelDims, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Self::init(version, statistical_labels(version), dims, &mut rng)
    }

    /// A randomly initialised model over a subset of statistical types.
    pub fn with_types(version: VersionId, types: &[&str], dims: ModelDims, seed: u64) -> Result<Self, NerError> {
        let schema = SchemaVersion::get(version);
        for t in types {
            match schema.lookup(t) {
                Ok(et) if et.category == Category::Statistical => {}
                _ => return Err(NerError::LabelOutsideSchema(t.to_string())),
            }
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let labels = LabelSet::new(types.iter().map(|t| t.to_string()).collect());
        Ok(Self::init(version, labels, dims, &mut rng))
    }

    pub(crate) fn init(version: VersionId, labels: LabelSet, dims: ModelDims, rng: &mut ChaCha8Rng) -> Self {
        let seeds = [(); NUM_SEEDS].map(|_| rng.gen::<u64>());
        let d = dims.dim as f64;
        let n_labels = labels.len();
        let mut params = Params::zeros(dims, n_labels);
        uniform(rng, &mut params.embed, 0.1);
        for w in &mut params.conv_w {
            uniform(rng, w, (6.0 / (CONV_WINDOW as f64 * d + d)).sqrt());
        }
        uniform(rng, &mut params.out_w, (6.0 / (d + n_labels as f64)).sqrt());
        TaggerModel { schema_version: version, labels, dims, seeds, params, meta: None }
    }

    pub fn schema_version(&self) -> VersionId {
        self.schema_version
    }

    pub fn labels(&self) -> &LabelSet {
        &self.labels
    }

    pub fn label_list(&self) -> Vec<String> {
        self.labels.names()
    }

    pub fn dims(&self) -> ModelDims {
        self.dims
    }

    pub fn seeds(&self) -> [u64; NUM_SEEDS] {
        self.seeds
    }

    pub fn training_meta(&self) -> Option<&TrainingMeta> {
        self.meta.as_ref()
    }

    /// Names of the weight groups: `embed`, `conv{l}.w`, `conv{l}.b`, `output.w`, `output.b`.
    pub fn weight_group_names() -> Vec<String> {
        Params::group_names()
    }

    pub fn weight_group(&self, name: &str) -> Option<&[f64]> {
        let i = Params::group_names().iter().position(|n| n == name)?;
        Some(self.params.groups()[i])
    }

    pub fn weight_group_mut(&mut self, name: &str) -> Option<&mut [f64]> {
        let i = Params::group_names().iter().position(|n| n == name)?;
        self.params.groups_mut().into_iter().nth(i)
    }

    pub fn is_finite(&self) -> bool {
        self.params.groups().iter().all(|g| g.iter().all(|x| x.is_finite()))
    }

    /// Embedding rows selected for a token, one per seed.
    pub fn hash_rows(&self, surface: &str) -> [usize; NUM_SEEDS] {
        rows_for(surface, &self.seeds, self.dims.rows)
    }

    pub fn embedding_row(&self, row: usize) -> &[f64] {
        let d = self.dims.dim;
        &self.params.embed[row * d..(row + 1) * d]
    }

    /// Sum of the token's selected embedding rows.
    pub fn hash_embed(&self, surface: &str) -> Vec<f64> {
        let mut out = vec![0.0; self.dims.dim];
        for r in self.hash_rows(surface) {
            for (o, x) in out.iter_mut().zip(self.embedding_row(r)) {
                *o += x;
            }
        }
        out
    }

    /// Runs the residual convolution stack over token vectors.
    pub fn encode(&self, vectors: &[Vec<f64>]) -> Vec<Vec<f64>> {
        let d = self.dims.dim;
        let mut x: Vec<f64> = vectors.iter().flat_map(|v| v.iter().copied()).collect();
        assert_eq!(x.len(), vectors.len() * d, "vectors must have the model width");
        for l in 0..CONV_LAYERS {
            x = self.conv_layer(l, &x).1;
        }
        x.chunks(d).map(<[f64]>::to_vec).collect()
    }

    /// One layer: returns `(tanh activations, x + activations)`.
    fn conv_layer(&self, l: usize, x: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let d = self.dims.dim;
        let n = x.len() / d;
        let w = &self.params.conv_w[l];
        let b = &self.params.conv_b[l];
        let mut h = vec![0.0; n * d];
        for t in 0..n {
            let z = &mut h[t * d..(t + 1) * d];
            z.copy_from_slice(b);
            for k in 0..CONV_WINDOW {
                let Some(src) = (t + k).checked_sub(CONV_WINDOW / 2).filter(|&s| s < n) else { continue };
                for (i, &xi) in x[src * d..(src + 1) * d].iter().enumerate() {
                    if xi == 0.0 {
                        continue;
                    }
                    let row = &w[(k * d + i) * d..(k * d + i + 1) * d];
                    for (zj, wj) in z.iter_mut().zip(row) {
                        *zj += xi * wj;
                    }
                }
            }
            for zj in z.iter_mut() {
                *zj = zj.tanh();
            }
        }
        let next = x.iter().zip(&h).map(|(a, b)| a + b).collect();
        (h, next)
    }

    pub(crate) fn forward(&self, rows: Vec<[usize; NUM_SEEDS]>, dropout: Option<(f64, &mut ChaCha8Rng)>) -> Trace {
        let d = self.dims.dim;
        let n = rows.len();
        let n_labels = self.labels.len();
        let mut x0 = vec![0.0; n * d];
        for (t, rs) in rows.iter().enumerate() {
            for &r in rs {
                for (o, e) in x0[t * d..(t + 1) * d].iter_mut().zip(self.embedding_row(r)) {
                    *o += e;
                }
            }
        }
        let mask = dropout.filter(|(p, _)| *p > 0.0).map(|(p, rng)| {
            let keep = 1.0 / (1.0 - p);
            let m: Vec<f64> = (0..n * d).map(|_| if rng.gen::<f64>() < p { 0.0 } else { keep }).collect();
            for (x, mi) in x0.iter_mut().zip(&m) {
                *x *= mi;
            }
            m
        });
        let mut xs = vec![x0];
        let mut hs = Vec::with_capacity(CONV_LAYERS);
        for l in 0..CONV_LAYERS {
            let (h, next) = self.conv_layer(l, &xs[l]);
            hs.push(h);
            xs.push(next);
        }
        let top = &xs[CONV_LAYERS];
        let mut probs = vec![0.0; n * n_labels];
        for t in 0..n {
            let z = &mut probs[t * n_labels..(t + 1) * n_labels];
            z.copy_from_slice(&self.params.out_b);
            for (i, &xi) in top[t * d..(t + 1) * d].iter().enumerate() {
                let row = &self.params.out_w[i * n_labels..(i + 1) * n_labels];
                for (zj, wj) in z.iter_mut().zip(row) {
                    *zj += xi * wj;
                }
            }
            softmax_in_place(z);
        }
        Trace { rows, xs, hs, mask, probs }
    }

    /// Sum of token cross-entropies for a traced sequence.
    pub(crate) fn loss(&self, trace: &Trace, targets: &[usize]) -> f64 {
        let l = self.labels.len();
        targets.iter().enumerate().map(|(t, &y)| -trace.probs[t * l + y].max(f64::MIN_POSITIVE).ln()).sum()
    }

    /// Adds `scale * d(sum of token losses)/d(params)` into `grad`. With
    /// `mutant` set the tanh derivative is skipped, a deliberately wrong
    /// backward pass used to calibrate the gradient check.
    pub(crate) fn backward(&self, trace: &Trace, targets: &[usize], scale: f64, grad: &mut Params, mutant: bool) {
        let d = self.dims.dim;
        let n_labels = self.labels.len();
        let n = targets.len();
        let top = &trace.xs[CONV_LAYERS];
        let mut dx = vec![0.0; n * d];
        let mut dl = vec![0.0; n_labels];
        for t in 0..n {
            dl.copy_from_slice(&trace.probs[t * n_labels..(t + 1) * n_labels]);
            dl[targets[t]] -= 1.0;
            for v in dl.iter_mut() {
                *v *= scale;
            }
            for (g, v) in grad.out_b.iter_mut().zip(&dl) {
                *g += v;
            }
            for i in 0..d {
                let xi = top[t * d + i];
                let row = i * n_labels..(i + 1) * n_labels;
                let mut acc = 0.0;
                for ((g, w), v) in grad.out_w[row.clone()].iter_mut().zip(&self.params.out_w[row]).zip(&dl) {
                    *g += xi * v;
                    acc += w * v;
                }
                dx[t * d + i] += acc;
            }
        }
        for l in (0..CONV_LAYERS).rev() {
            let x = &trace.xs[l];
            let h = &trace.hs[l];
            let w = &self.params.conv_w[l];
            let dz: Vec<f64> = if mutant {
                dx.clone()
            } else {
                dx.iter().zip(h).map(|(g, hj)| g * (1.0 - hj * hj)).collect()
            };
            let mut dprev = dx;
            for t in 0..n {
                let dzt = &dz[t * d..(t + 1) * d];
                for (g, v) in grad.conv_b[l].iter_mut().zip(dzt) {
                    *g += v;
                }
                for k in 0..CONV_WINDOW {
                    let Some(src) = (t + k).checked_sub(CONV_WINDOW / 2).filter(|&s| s < n) else { continue };
                    for i in 0..d {
                        let xi = x[src * d + i];
                        let row = (k * d + i) * d..(k * d + i + 1) * d;
                        let mut acc = 0.0;
                        for ((g, wj), v) in grad.conv_w[l][row.clone()].iter_mut().zip(&w[row]).zip(dzt) {
                            *g += xi * v;
                            acc += wj * v;
                        }
                        dprev[src * d + i] += acc;
                    }
                }
            }
            dx = dprev;
        }
        if let Some(m) = &trace.mask {
            for (g, mi) in dx.iter_mut().zip(m) {
                *g *= mi;
            }
        }
        for (t, rs) in trace.rows.iter().enumerate() {
            for &r in rs {
                for (g, v) in grad.embed[r * d..(r + 1) * d].iter_mut().zip(&dx[t * d..(t + 1) * d]) {
                    *g += v;
                }
            }
        }
    }

    /// Per-token label distributions for a token sequence.
    pub fn probabilities<S: AsRef<str>>(&self, tokens: &[S]) -> Vec<Vec<f64>> {
        if tokens.is_empty() {
            return Vec::new();
        }
        let rows = tokens.iter().map(|t| self.hash_rows(t.as_ref())).collect();
        let trace = self.forward(rows, None);
        trace.probs.chunks(self.labels.len()).map(<[f64]>::to_vec).collect()
    }

    /// Tags each sentence independently and returns char-offset mentions.
    pub fn predict(&self, doc: &Document) -> Vec<Mention> {
        let mut out = Vec::new();
        for tokens in doc.sentence_tokens() {
            let surfaces: Vec<&str> = tokens.iter().map(|t| t.surface.as_str()).collect();
            let probs = self.probabilities(&surfaces);
            for span in decode(&probs, &self.labels) {
                let label = &self.labels.types()[span.type_index];
                out.push(
                    Mention::new(tokens[span.start].start, tokens[span.end - 1].end, label.clone(), Provenance::Model)
                        .with_score(span.score),
                );
            }
        }
        out
    }

    /// Predictions for every document, as annotator `model`.
    pub fn predict_all<'a>(&self, docs: impl IntoIterator<Item = &'a Document>) -> AnnotationSet {
        let mut set = AnnotationSet::new("model");
        for doc in docs {
            set.insert(doc.doc_id.clone(), self.predict(doc));
        }
        set
    }
}

pub(crate) fn softmax_in_place(z: &mut [f64]) {
    let max = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for v in z.iter_mut() {
        *v = (*v - max).exp();
        sum += *v;
    }
    for v in z.iter_mut() {
        *v /= sum;
    }
}
