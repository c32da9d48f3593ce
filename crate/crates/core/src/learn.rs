//! Reverse-mode gradients through unrolled mean-field inference and the
//! feature-to-unary network, and the two-stage training schedule.
//!
//! Stage one fits the unary network alone on the cross-entropy of the initial
//! marginals. Stage two trains the network and the pattern table jointly
//! through `T` mean-field steps.

use alloc::vec;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::crf::{
    self, init_marginals, run_inference, Cliques, InferenceConfig, MarginalTrace, Pattern,
    PatternTable, UnaryPotentials,
};
use crate::data::ClusteringInstance;
use crate::graph::{enumerate_chordless_cycles, EdgeLabeling};
use crate::objective::ClampCounter;
use crate::{math, Error, Result};

/// Two affine layers with a rectifier in between, mapping an edge feature to
/// `(psi(0), psi(1))`. With `hidden == 0` the model is a single affine layer,
/// i.e. logistic regression on the features.
///
/// Parameters are stored flat as `[w1 (hidden x input), b1, w2 (2 x width), b2]`
/// where `width` is `hidden`, or `input` when there is no hidden layer.
#[derive(Debug, Clone, PartialEq)]
pub struct UnaryModel {
    input_dim: usize,
    hidden: usize,
    params: Vec<f64>,
}

/// Activations kept from the forward pass: the hidden pre-activations per edge.
#[derive(Debug, Clone)]
pub struct ForwardCache {
    pre_activations: Vec<Vec<f64>>,
}

pub const DEFAULT_HIDDEN: usize = 16;

impl UnaryModel {
    pub fn parameter_count(input_dim: usize, hidden: usize) -> usize {
        if hidden == 0 {
            (input_dim + 1) * 2
        } else {
            (input_dim + 1) * hidden + (hidden + 1) * 2
        }
    }

    /// Uniform fan-in scaled initialization, zero biases.
    pub fn new(input_dim: usize, hidden: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut params = vec![0.0; Self::parameter_count(input_dim, hidden)];
        let mut model = Self { input_dim, hidden, params: Vec::new() };
        if hidden > 0 {
            let bound = math::sqrt(6.0 / input_dim.max(1) as f64);
            for w in &mut params[..hidden * input_dim] {
                *w = rng.random_range(-bound..bound);
            }
        }
        let (w2, _) = model.second_layer_range();
        let bound = math::sqrt(6.0 / (model.width() + 2) as f64);
        for w in &mut params[w2] {
            *w = rng.random_range(-bound..bound);
        }
        model.params = params;
        model
    }

    pub fn from_parts(input_dim: usize, hidden: usize, params: Vec<f64>) -> Result<Self> {
        let expected = Self::parameter_count(input_dim, hidden);
        if params.len() != expected {
            return Err(Error::LengthMismatch {
                what: "model parameters",
                expected,
                actual: params.len(),
            });
        }
        if params.iter().any(|p| !p.is_finite()) {
            return Err(Error::NonFinite("model parameters"));
        }
        Ok(Self { input_dim, hidden, params })
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn hidden(&self) -> usize {
        self.hidden
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    /// Width of the layer feeding the output.
    fn width(&self) -> usize {
        if self.hidden == 0 {
            self.input_dim
        } else {
            self.hidden
        }
    }

    fn second_layer_range(&self) -> (core::ops::Range<usize>, core::ops::Range<usize>) {
        let start = if self.hidden == 0 { 0 } else { (self.input_dim + 1) * self.hidden };
        let w = start..start + 2 * self.width();
        let b = w.end..w.end + 2;
        (w, b)
    }

    fn check_features(&self, features: &[Vec<f64>]) -> Result<()> {
        if let Some(f) = features.iter().find(|f| f.len() != self.input_dim) {
            return Err(Error::LengthMismatch {
                what: "edge feature",
                expected: self.input_dim,
                actual: f.len(),
            });
        }
        Ok(())
    }

    pub fn forward(&self, features: &[Vec<f64>]) -> Result<(UnaryPotentials, ForwardCache)> {
        self.check_features(features)?;
        let (d, h) = (self.input_dim, self.hidden);
        let (w2r, b2r) = self.second_layer_range();
        let (w2, b2) = (&self.params[w2r], &self.params[b2r]);
        let mut pre_activations = Vec::with_capacity(if h == 0 { 0 } else { features.len() });
        let mut out = Vec::with_capacity(features.len());
        let mut act = vec![0.0; self.width()];
        for f in features {
            if h == 0 {
                act.copy_from_slice(f);
            } else {
                let (w1, b1) = (&self.params[..h * d], &self.params[h * d..h * d + h]);
                let pre: Vec<f64> = (0..h)
                    .map(|r| b1[r] + w1[r * d..(r + 1) * d].iter().zip(f).map(|(w, x)| w * x).sum::<f64>())
                    .collect();
                for (a, &z) in act.iter_mut().zip(&pre) {
                    *a = z.max(0.0);
                }
                pre_activations.push(pre);
            }
            let width = act.len();
            let psi = [0, 1].map(|o| {
                b2[o] + w2[o * width..(o + 1) * width].iter().zip(&act).map(|(w, a)| w * a).sum::<f64>()
            });
            out.push(psi);
        }
        Ok((UnaryPotentials::new(out)?, ForwardCache { pre_activations }))
    }

    /// Gradient of the loss with respect to the flat parameter vector, given
    /// `d_unary[e] = dL/dpsi_e`.
    pub fn backward(&self, features: &[Vec<f64>], cache: &ForwardCache, d_unary: &[[f64; 2]]) -> Result<Vec<f64>> {
        self.check_features(features)?;
        if d_unary.len() != features.len() {
            return Err(Error::LengthMismatch {
                what: "unary gradient",
                expected: features.len(),
                actual: d_unary.len(),
            });
        }
        let (d, h) = (self.input_dim, self.hidden);
        let width = self.width();
        let (w2r, b2r) = self.second_layer_range();
        let mut grad = vec![0.0; self.params.len()];
        let mut act = vec![0.0; width];
        for (e, (f, dpsi)) in features.iter().zip(d_unary).enumerate() {
            if h == 0 {
                act.copy_from_slice(f);
            } else {
                for (a, &z) in act.iter_mut().zip(&cache.pre_activations[e]) {
                    *a = z.max(0.0);
                }
            }
            for o in 0..2 {
                grad[b2r.start + o] += dpsi[o];
                for (r, a) in act.iter().enumerate() {
                    grad[w2r.start + o * width + r] += dpsi[o] * a;
                }
            }
            if h == 0 {
                continue;
            }
            for r in 0..h {
                if cache.pre_activations[e][r] <= 0.0 {
                    continue;
                }
                let dz = dpsi[0] * self.params[w2r.start + r] + dpsi[1] * self.params[w2r.start + width + r];
                grad[h * d + r] += dz;
                for (c, x) in f.iter().enumerate() {
                    grad[r * d + c] += dz * x;
                }
            }
        }
        Ok(grad)
    }
}

/// Mean binary cross-entropy of cut marginals against ground truth, with its
/// gradient `dL/dq`. Marginals are clamped into `[eps, 1 - eps]` first.
pub fn cross_entropy_loss(q: &[f64], gt: &EdgeLabeling, clamps: &mut ClampCounter) -> Result<(f64, Vec<f64>)> {
    if q.len() != gt.len() {
        return Err(Error::LengthMismatch {
            what: "ground-truth labeling",
            expected: q.len(),
            actual: gt.len(),
        });
    }
    if q.is_empty() {
        return Ok((0.0, Vec::new()));
    }
    let n = q.len() as f64;
    let mut loss = 0.0;
    let grad = q
        .iter()
        .zip(gt.as_slice())
        .map(|(&q, &cut)| {
            let q = clamps.clamp(q);
            if cut {
                loss -= math::ln(q);
                -1.0 / (q * n)
            } else {
                loss -= math::ln(1.0 - q);
                1.0 / ((1.0 - q) * n)
            }
        })
        .collect();
    Ok((loss / n, grad))
}

/// Gradients of a scalar loss with respect to the inference inputs.
#[derive(Debug, Clone, PartialEq)]
pub struct MeanFieldGradient {
    pub unary: Vec<[f64; 2]>,
    pub gamma: [f64; 3],
    pub gamma_max: f64,
}

/// Back-propagates `dL/dq_T` through all mean-field steps of `trace` and the
/// initial softmax.
///
/// The trace must come from [`run_inference`] with the same unaries, table and
/// cliques; its first snapshot is checked against the unaries.
pub fn backward_mean_field(
    trace: &MarginalTrace,
    unary: &UnaryPotentials,
    table: &PatternTable,
    cliques: &Cliques,
    d_final: &[f64],
) -> Result<MeanFieldGradient> {
    let n = unary.len();
    if trace.edge_count() != n || cliques.edge_count() != n || d_final.len() != n {
        return Err(Error::TraceMismatch("edge counts differ"));
    }
    if trace.snapshot(0) != init_marginals(unary).as_slice() {
        return Err(Error::TraceMismatch("initial snapshot was not produced by these unaries"));
    }
    let mut grad = MeanFieldGradient { unary: vec![[0.0; 2]; n], gamma: [0.0; 3], gamma_max: 0.0 };
    let mut dq = d_final.to_vec();
    for t in (1..=trace.iterations()).rev() {
        let (prev, cur) = (trace.snapshot(t - 1), trace.snapshot(t));
        let mut dq_prev = vec![0.0; n];
        for i in 0..n {
            // q_i = logistic((psi0 - psi1) + (m0 - m1))
            let dz = dq[i] * cur[i] * (1.0 - cur[i]);
            if dz == 0.0 {
                continue;
            }
            grad.unary[i][0] += dz;
            grad.unary[i][1] -= dz;
            for &(_, j, k) in cliques.incident(i) {
                for (label, up) in [(0usize, dz), (1, -dz)] {
                    grad.gamma_max += up;
                    let pj = [1.0 - prev[j], prev[j]];
                    let pk = [1.0 - prev[k], prev[k]];
                    for a in 0..2 {
                        for b in 0..2 {
                            let Some(p) = Pattern::from_cut_count(label + a + b) else {
                                continue;
                            };
                            let diff = table.gamma_of(p) - table.gamma_max;
                            let w = pj[a] * pk[b];
                            grad.gamma[p as usize] += up * w;
                            grad.gamma_max -= up * w;
                            let (sa, sb) = (if a == 1 { 1.0 } else { -1.0 }, if b == 1 { 1.0 } else { -1.0 });
                            dq_prev[j] += up * sa * pk[b] * diff;
                            dq_prev[k] += up * pj[a] * sb * diff;
                        }
                    }
                }
            }
        }
        dq = dq_prev;
    }
    let q0 = trace.snapshot(0);
    for i in 0..n {
        let dz = dq[i] * q0[i] * (1.0 - q0[i]);
        grad.unary[i][0] += dz;
        grad.unary[i][1] -= dz;
    }
    Ok(grad)
}

/// An instance prepared for training or evaluation.
#[derive(Debug, Clone)]
pub struct Example {
    pub features: Vec<Vec<f64>>,
    pub cliques: Cliques,
    pub gt: Option<EdgeLabeling>,
}

impl Example {
    /// Uses the triangles of the instance graph as cliques.
    pub fn from_instance(instance: &ClusteringInstance) -> Result<Self> {
        let graph = instance.graph();
        let cycles = enumerate_chordless_cycles(graph, 3)?;
        Ok(Self {
            features: instance.edge_features().to_vec(),
            cliques: Cliques::new(&cycles, graph.edge_count())?,
            gt: instance.gt_labeling().cloned(),
        })
    }

    fn labels(&self, index: usize) -> Result<&EdgeLabeling> {
        self.gt.as_ref().ok_or(Error::Unlabeled(index))
    }
}

/// Loss and gradients of one example through network and inference.
#[derive(Debug, Clone, PartialEq)]
pub struct ParameterGradients {
    pub loss: f64,
    pub model: Vec<f64>,
    pub mean_field: MeanFieldGradient,
}

/// Marginal trace of `example` under `model` and `table`.
pub fn predict(model: &UnaryModel, table: &PatternTable, example: &Example, iterations: usize) -> Result<MarginalTrace> {
    let (unary, _) = model.forward(&example.features)?;
    run_inference(&unary, table, &example.cliques, InferenceConfig { iterations })
}

/// Forward and backward pass for one labeled example. With `iterations == 0`
/// this is the unary-only pipeline.
pub fn loss_and_gradients(
    model: &UnaryModel,
    table: &PatternTable,
    example: &Example,
    iterations: usize,
    clamps: &mut ClampCounter,
) -> Result<ParameterGradients> {
    let gt = example.labels(0)?;
    let (unary, cache) = model.forward(&example.features)?;
    let trace = run_inference(&unary, table, &example.cliques, InferenceConfig { iterations })?;
    let (loss, dq) = cross_entropy_loss(trace.last(), gt, clamps)?;
    let mean_field = backward_mean_field(&trace, &unary, table, &example.cliques, &dq)?;
    let model_grad = model.backward(&example.features, &cache, &mean_field.unary)?;
    Ok(ParameterGradients { loss, model: model_grad, mean_field })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainConfig {
    pub unary_rate: f64,
    pub end_to_end_rate: f64,
    /// Rate for the pattern table, relative to `end_to_end_rate`.
    pub pattern_rate_scale: f64,
    pub unary_epochs: usize,
    pub end_to_end_epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
    pub iterations: usize,
    pub validation_fraction: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            unary_rate: 0.1,
            end_to_end_rate: 0.01,
            pattern_rate_scale: 1.0,
            unary_epochs: 200,
            end_to_end_epochs: 60,
            batch_size: 8,
            seed: 0,
            iterations: crf::DEFAULT_ITERATIONS,
            validation_fraction: 0.1,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let rates = [self.unary_rate, self.end_to_end_rate, self.pattern_rate_scale];
        if rates.iter().any(|r| !r.is_finite() || *r <= 0.0) {
            return Err(Error::InvalidConfig("learning rates must be positive"));
        }
        if self.batch_size == 0 {
            return Err(Error::InvalidConfig("batch size must be positive"));
        }
        if !(0.0..1.0).contains(&self.validation_fraction) {
            return Err(Error::InvalidConfig("validation fraction must lie in [0, 1)"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochStats {
    pub epoch: usize,
    pub train_loss: f64,
    pub validation_loss: f64,
    /// Edge accuracy of the thresholded final marginals on the validation split.
    pub validation_accuracy: f64,
    /// Mean invalid-clique ratio of the thresholded final marginals on the validation split.
    pub validation_invalid_ratio: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub model: UnaryModel,
    pub table: PatternTable,
    pub curve: Vec<EpochStats>,
    /// Epoch whose parameters were kept (lowest validation loss), 0 = initial.
    pub best_epoch: usize,
    pub clamped: usize,
}

/// Stage one: fit the unary network on the cross-entropy of the initial marginals.
pub fn train_unary(examples: &[Example], model: UnaryModel, cfg: &TrainConfig) -> Result<TrainOutcome> {
    let stage = Stage { rate: cfg.unary_rate, epochs: cfg.unary_epochs, iterations: 0, learn_table: false };
    train(examples, model, PatternTable::neutral(), cfg, stage)
}

/// Stage two: joint descent on network and pattern table through `cfg.iterations`
/// mean-field steps. `model` should come from [`train_unary`].
pub fn train_end_to_end(
    examples: &[Example],
    model: UnaryModel,
    table: PatternTable,
    cfg: &TrainConfig,
) -> Result<TrainOutcome> {
    let stage = Stage {
        rate: cfg.end_to_end_rate,
        epochs: cfg.end_to_end_epochs,
        iterations: cfg.iterations,
        learn_table: true,
    };
    train(examples, model, table, cfg, stage)
}

#[derive(Clone, Copy)]
struct Stage {
    rate: f64,
    epochs: usize,
    iterations: usize,
    learn_table: bool,
}

/// Deterministic train/validation split: a seeded shuffle, the tail is validation.
pub fn split_indices(count: usize, fraction: f64, seed: u64) -> (Vec<usize>, Vec<usize>) {
    let mut order: Vec<usize> = (0..count).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed ^ SPLIT_SALT));
    let held = if count < 2 || fraction == 0.0 {
        0
    } else {
        (libm::ceil(count as f64 * fraction) as usize).clamp(1, count - 1)
    };
    let validation = order.split_off(count - held);
    (order, validation)
}

/// Keeps the split shuffle independent of the minibatch shuffle for the same seed.
const SPLIT_SALT: u64 = 0x9e37_79b9_7f4a_7c15;

fn train(
    examples: &[Example],
    mut model: UnaryModel,
    mut table: PatternTable,
    cfg: &TrainConfig,
    stage: Stage,
) -> Result<TrainOutcome> {
    cfg.validate()?;
    if examples.is_empty() {
        return Err(Error::InvalidConfig("training needs at least one example"));
    }
    for (i, ex) in examples.iter().enumerate() {
        ex.labels(i)?;
    }
    let (train_idx, val_idx) = split_indices(examples.len(), cfg.validation_fraction, cfg.seed);
    let val_idx = if val_idx.is_empty() { train_idx.clone() } else { val_idx };
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut clamps = ClampCounter::default();

    let mut curve = Vec::with_capacity(stage.epochs + 1);
    let initial = evaluate(&model, &table, examples, &train_idx, &val_idx, stage.iterations, 0, &mut clamps)?;
    let mut best = (initial.validation_loss, 0, model.clone(), table);
    curve.push(initial);

    let mut order = train_idx.clone();
    for epoch in 1..=stage.epochs {
        order.shuffle(&mut rng);
        for batch in order.chunks(cfg.batch_size) {
            let mut g_model = vec![0.0; model.params().len()];
            let mut g_gamma = [0.0; 3];
            let mut g_max = 0.0;
            for &i in batch {
                let g = loss_and_gradients(&model, &table, &examples[i], stage.iterations, &mut clamps)
                    .map_err(|e| match e {
                        Error::Unlabeled(_) => Error::Unlabeled(i),
                        other => other,
                    })?;
                if !g.loss.is_finite() {
                    return Err(Error::Diverged { epoch });
                }
                for (acc, v) in g_model.iter_mut().zip(&g.model) {
                    *acc += v;
                }
                for p in 0..3 {
                    g_gamma[p] += g.mean_field.gamma[p];
                }
                g_max += g.mean_field.gamma_max;
            }
            let scale = stage.rate / batch.len() as f64;
            for (p, g) in model.params_mut().iter_mut().zip(&g_model) {
                *p -= scale * g;
            }
            if stage.learn_table {
                let scale = scale * cfg.pattern_rate_scale;
                for p in 0..3 {
                    table.gamma[p] -= scale * g_gamma[p];
                }
                table.gamma_max -= scale * g_max;
            }
            if model.params().iter().any(|p| !p.is_finite()) || !table.is_finite() {
                return Err(Error::Diverged { epoch });
            }
        }
        let stats = evaluate(&model, &table, examples, &train_idx, &val_idx, stage.iterations, epoch, &mut clamps)?;
        if !stats.train_loss.is_finite() || !stats.validation_loss.is_finite() {
            return Err(Error::Diverged { epoch });
        }
        if stats.validation_loss < best.0 {
            best = (stats.validation_loss, epoch, model.clone(), table);
        }
        curve.push(stats);
    }
    let (_, best_epoch, model, table) = best;
    Ok(TrainOutcome { model, table, curve, best_epoch, clamped: clamps.clamped })
}

#[allow(clippy::too_many_arguments)]
fn evaluate(
    model: &UnaryModel,
    table: &PatternTable,
    examples: &[Example],
    train_idx: &[usize],
    val_idx: &[usize],
    iterations: usize,
    epoch: usize,
    clamps: &mut ClampCounter,
) -> Result<EpochStats> {
    let mean_loss = |idx: &[usize], clamps: &mut ClampCounter| -> Result<(f64, f64, Option<f64>)> {
        let (mut loss, mut acc, mut invalid, mut with_cliques) = (0.0, 0.0, 0.0, 0usize);
        for &i in idx {
            let ex = &examples[i];
            let trace = predict(model, table, ex, iterations)?;
            let gt = ex.labels(i)?;
            loss += cross_entropy_loss(trace.last(), gt, clamps)?.0;
            let hard = crf::hard_labeling(trace.last());
            acc += edge_accuracy(&hard, gt);
            if let Some(r) = crf::invalid_cycle_ratio(&hard, &ex.cliques) {
                invalid += r;
                with_cliques += 1;
            }
        }
        let n = idx.len().max(1) as f64;
        let invalid = (with_cliques > 0).then(|| invalid / with_cliques as f64);
        Ok((loss / n, acc / n, invalid))
    };
    let (train_loss, _, _) = mean_loss(train_idx, clamps)?;
    let (validation_loss, validation_accuracy, validation_invalid_ratio) = mean_loss(val_idx, clamps)?;
    Ok(EpochStats { epoch, train_loss, validation_loss, validation_accuracy, validation_invalid_ratio })
}

/// Fraction of edges whose labels agree.
pub fn edge_accuracy(predicted: &EdgeLabeling, gt: &EdgeLabeling) -> f64 {
    if gt.is_empty() {
        return 1.0;
    }
    let agree = predicted.as_slice().iter().zip(gt.as_slice()).filter(|(a, b)| a == b).count();
    agree as f64 / gt.len() as f64
}
