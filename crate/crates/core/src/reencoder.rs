//! The second-hop query re-encoder.
//!
//! A one-hidden-layer feedforward map from the original query embedding and
//! a first-hop fact embedding to a new query embedding:
//!
//! ```text
//! q_r = W2 · relu(W1 · [q ; d1] + b1) + b2
//! ```
//!
//! Training is plain mini-batch gradient descent on the mean squared distance
//! between `q_r` and the embedding of the gold second fact. Backpropagation is
//! written out by hand and verified against central finite differences by
//! [`gradient_check`].

use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dense_index::{dot, Embedding};
use crate::error::{Error, Result};
use crate::io;

/// Gradients whose magnitude is below this in both the analytic and the
/// numerical route are compared against this floor instead of their own size.
pub const GRADIENT_CHECK_FLOOR: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReEncoderModel {
    pub dim: usize,
    pub hidden: usize,
    /// `hidden x 2·dim`, row-major.
    pub w1: Vec<f64>,
    pub b1: Vec<f64>,
    /// `dim x hidden`, row-major.
    pub w2: Vec<f64>,
    pub b2: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Objective {
    /// Mean squared distance to the target embedding.
    #[default]
    Mse,
    /// Negated inner product with the target embedding. Unbounded without
    /// negatives; offered for experimentation only.
    InnerProduct,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    /// Not part of config files; the engine derives it from the run seed.
    #[serde(skip)]
    pub seed: u64,
    /// Hidden width; `None` means four times the embedding dimension.
    pub hidden: Option<usize>,
    pub objective: Objective,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 0.05,
            epochs: 500,
            batch_size: 16,
            seed: 0,
            hidden: None,
            objective: Objective::Mse,
        }
    }
}

/// One training example: query, first gold fact, second gold fact.
#[derive(Debug, Clone, PartialEq)]
pub struct ChainTriple {
    pub q_qa: Embedding,
    pub d1: Embedding,
    pub d2_target: Embedding,
}

impl ChainTriple {
    pub fn new(q_qa: Embedding, d1: Embedding, d2_target: Embedding) -> Self {
        ChainTriple { q_qa, d1, d2_target }
    }
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub model: ReEncoderModel,
    /// Training-set loss after each epoch.
    pub epoch_losses: Vec<f64>,
}

// Intermediate values of one forward pass.
struct Forward {
    input: Vec<f64>,
    pre: Vec<f64>,
    act: Vec<f64>,
    out: Vec<f64>,
}

impl ReEncoderModel {
    pub fn zeros(dim: usize, hidden: usize) -> Self {
        ReEncoderModel {
            dim,
            hidden,
            w1: vec![0.0; hidden * 2 * dim],
            b1: vec![0.0; hidden],
            w2: vec![0.0; dim * hidden],
            b2: vec![0.0; dim],
        }
    }

    /// Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) per layer, biases included.
    pub fn init<R: Rng>(dim: usize, hidden: usize, rng: &mut R) -> Self {
        let mut m = ReEncoderModel::zeros(dim, hidden);
        let a1 = 1.0 / ((2 * dim) as f64).sqrt();
        let a2 = 1.0 / (hidden as f64).sqrt();
        m.w1.iter_mut().for_each(|w| *w = rng.random_range(-a1..a1));
        m.b1.iter_mut().for_each(|w| *w = rng.random_range(-a1..a1));
        m.w2.iter_mut().for_each(|w| *w = rng.random_range(-a2..a2));
        m.b2.iter_mut().for_each(|w| *w = rng.random_range(-a2..a2));
        m
    }

    pub fn param_count(&self) -> usize {
        self.w1.len() + self.b1.len() + self.w2.len() + self.b2.len()
    }

    fn param_mut(&mut self, mut k: usize) -> &mut f64 {
        for block in [&mut self.w1, &mut self.b1, &mut self.w2, &mut self.b2] {
            if k < block.len() {
                return &mut block[k];
            }
            k -= block.len();
        }
        panic!("parameter index out of range")
    }

    pub fn is_finite(&self) -> bool {
        [&self.w1, &self.b1, &self.w2, &self.b2]
            .iter()
            .all(|b| b.iter().all(|v| v.is_finite()))
    }

    fn check_shapes(&self) -> Result<()> {
        let ok = self.dim > 0
            && self.hidden > 0
            && self.w1.len() == self.hidden * 2 * self.dim
            && self.b1.len() == self.hidden
            && self.w2.len() == self.dim * self.hidden
            && self.b2.len() == self.dim;
        if !ok {
            return Err(Error::Precondition(format!(
                "re-encoder parameter shapes disagree with dim={} hidden={}",
                self.dim, self.hidden
            )));
        }
        if !self.is_finite() {
            return Err(Error::Precondition("re-encoder has non-finite parameters".into()));
        }
        Ok(())
    }

    fn check_dim(&self, e: &Embedding) -> Result<()> {
        if e.dim() != self.dim {
            return Err(Error::Dimension {
                expected: self.dim,
                found: e.dim(),
            });
        }
        Ok(())
    }

    fn forward(&self, q: &[f64], d1: &[f64]) -> Forward {
        let mut input = Vec::with_capacity(2 * self.dim);
        input.extend_from_slice(q);
        input.extend_from_slice(d1);
        let width = 2 * self.dim;
        let pre: Vec<f64> = (0..self.hidden)
            .map(|i| dot(&self.w1[i * width..(i + 1) * width], &input) + self.b1[i])
            .collect();
        let act: Vec<f64> = pre.iter().map(|&z| z.max(0.0)).collect();
        let out = (0..self.dim)
            .map(|o| dot(&self.w2[o * self.hidden..(o + 1) * self.hidden], &act) + self.b2[o])
            .collect();
        Forward { input, pre, act, out }
    }

    /// Re-encodes a first-hop fact into a second-hop query embedding.
    pub fn reencode(&self, q_qa: &Embedding, d1: &Embedding) -> Result<Embedding> {
        self.check_dim(q_qa)?;
        self.check_dim(d1)?;
        Ok(Embedding(self.forward(&q_qa.0, &d1.0).out))
    }

    fn sample_loss(&self, t: &ChainTriple, objective: Objective) -> f64 {
        let f = self.forward(&t.q_qa.0, &t.d1.0);
        match objective {
            Objective::Mse => f.out.iter().zip(&t.d2_target.0).map(|(y, d)| (y - d) * (y - d)).sum(),
            Objective::InnerProduct => -dot(&f.out, &t.d2_target.0),
        }
    }

    /// Mean loss over `triples`.
    pub fn loss(&self, triples: &[ChainTriple], objective: Objective) -> f64 {
        if triples.is_empty() {
            return 0.0;
        }
        triples.iter().map(|t| self.sample_loss(t, objective)).sum::<f64>() / triples.len() as f64
    }

    /// Mean of `‖g(q, d1) − d2‖²` over `triples`.
    pub fn mse(&self, triples: &[ChainTriple]) -> f64 {
        self.loss(triples, Objective::Mse)
    }

    /// Mean loss and its gradient over `batch`.
    #[allow(clippy::needless_range_loop)]
    pub fn loss_and_gradient(&self, batch: &[ChainTriple], objective: Objective) -> (f64, ReEncoderModel) {
        let mut grad = ReEncoderModel::zeros(self.dim, self.hidden);
        let mut total = 0.0;
        let width = 2 * self.dim;
        let scale = 1.0 / batch.len() as f64;
        let mut d_act = vec![0.0; self.hidden];
        for t in batch {
            let f = self.forward(&t.q_qa.0, &t.d1.0);
            let d_out: Vec<f64> = match objective {
                Objective::Mse => {
                    total += f
                        .out
                        .iter()
                        .zip(&t.d2_target.0)
                        .map(|(y, d)| (y - d) * (y - d))
                        .sum::<f64>();
                    f.out
                        .iter()
                        .zip(&t.d2_target.0)
                        .map(|(y, d)| 2.0 * (y - d) * scale)
                        .collect()
                }
                Objective::InnerProduct => {
                    total -= dot(&f.out, &t.d2_target.0);
                    t.d2_target.0.iter().map(|d| -d * scale).collect()
                }
            };
            d_act.iter_mut().for_each(|v| *v = 0.0);
            for (o, &g) in d_out.iter().enumerate() {
                grad.b2[o] += g;
                let row = o * self.hidden;
                for h in 0..self.hidden {
                    grad.w2[row + h] += g * f.act[h];
                    d_act[h] += self.w2[row + h] * g;
                }
            }
            for h in 0..self.hidden {
                if f.pre[h] <= 0.0 {
                    continue;
                }
                let g = d_act[h];
                grad.b1[h] += g;
                let row = h * width;
                for (j, x) in f.input.iter().enumerate() {
                    grad.w1[row + j] += g * x;
                }
            }
        }
        (total * scale, grad)
    }

    fn step(&mut self, grad: &ReEncoderModel, lr: f64) {
        let pairs = [
            (&mut self.w1, &grad.w1),
            (&mut self.b1, &grad.b1),
            (&mut self.w2, &grad.w2),
            (&mut self.b2, &grad.b2),
        ];
        for (p, g) in pairs {
            p.iter_mut().zip(g).for_each(|(p, g)| *p -= lr * g);
        }
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string(&ModelFile {
            config_digest: None,
            model: self.clone(),
        })
        .expect("model serializes");
        s.push('\n');
        s
    }

    pub fn save(&self, path: &Path, config_digest: &str) -> Result<()> {
        let mut s = serde_json::to_string(&ModelFile {
            config_digest: Some(config_digest.to_string()),
            model: self.clone(),
        })
        .expect("model serializes");
        s.push('\n');
        io::write_atomic(path, s.as_bytes())
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: ModelFile = serde_json::from_str(text).map_err(|e| Error::parse(e.line(), e.to_string()))?;
        file.model.check_shapes()?;
        Ok(file.model)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&io::read_to_string(path)?)
    }
}

#[derive(Serialize, Deserialize)]
struct ModelFile {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    config_digest: Option<String>,
    #[serde(flatten)]
    model: ReEncoderModel,
}

fn triple_dim(triples: &[ChainTriple]) -> Result<usize> {
    let dim = triples
        .first()
        .ok_or_else(|| Error::Precondition("no training triples".into()))?
        .q_qa
        .dim();
    if dim == 0 {
        return Err(Error::Precondition("embedding dimension must be positive".into()));
    }
    for t in triples {
        for e in [&t.q_qa, &t.d1, &t.d2_target] {
            if e.dim() != dim {
                return Err(Error::Dimension {
                    expected: dim,
                    found: e.dim(),
                });
            }
        }
    }
    Ok(dim)
}

/// Trains a re-encoder by mini-batch gradient descent. Deterministic for a
/// fixed `config` (including its seed) and triple order.
pub fn train(triples: &[ChainTriple], config: &TrainConfig) -> Result<TrainOutcome> {
    let dim = triple_dim(triples)?;
    if config.epochs == 0 || config.batch_size == 0 || !config.learning_rate.is_finite() || config.learning_rate <= 0.0
    {
        return Err(Error::Precondition(
            "epochs, batch_size and learning_rate must be positive".into(),
        ));
    }
    let hidden = config.hidden.unwrap_or(4 * dim);
    if hidden == 0 {
        return Err(Error::Precondition("hidden width must be positive".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut model = ReEncoderModel::init(dim, hidden, &mut rng);
    let mut order: Vec<usize> = (0..triples.len()).collect();
    let mut batch = Vec::with_capacity(config.batch_size);
    let mut epoch_losses = Vec::with_capacity(config.epochs);
    for epoch in 1..=config.epochs {
        order.shuffle(&mut rng);
        for chunk in order.chunks(config.batch_size) {
            batch.clear();
            batch.extend(chunk.iter().map(|&i| triples[i].clone()));
            let (_, grad) = model.loss_and_gradient(&batch, config.objective);
            model.step(&grad, config.learning_rate);
        }
        let loss = model.loss(triples, config.objective);
        if !loss.is_finite() || !model.is_finite() {
            return Err(Error::Divergence { epoch });
        }
        epoch_losses.push(loss);
    }
    Ok(TrainOutcome { model, epoch_losses })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradientCheckReport {
    pub max_relative_error: f64,
    /// Parameters compared.
    pub checked: usize,
    /// Parameters skipped because a ±epsilon step crossed a relu kink, where
    /// the finite difference does not estimate the derivative.
    pub skipped_at_kinks: usize,
}

/// Maximum relative error between the analytic MSE gradient and central
/// finite differences, over all parameters.
///
/// Relative error is `|a − n| / max(|a|, |n|, GRADIENT_CHECK_FLOOR)`, so two
/// vanishing gradients compare as equal.
pub fn gradient_check(model: &ReEncoderModel, triple: &ChainTriple, epsilon: f64) -> Result<f64> {
    gradient_check_report(model, triple, epsilon).map(|r| r.max_relative_error)
}

pub fn gradient_check_report(
    model: &ReEncoderModel,
    triple: &ChainTriple,
    epsilon: f64,
) -> Result<GradientCheckReport> {
    if !(epsilon > 0.0 && epsilon <= 1e-2) {
        return Err(Error::Precondition(format!(
            "epsilon must be in (0, 1e-2], got {epsilon}"
        )));
    }
    model.check_shapes()?;
    for e in [&triple.q_qa, &triple.d1, &triple.d2_target] {
        model.check_dim(e)?;
    }
    let batch = std::slice::from_ref(triple);
    let (_, analytic) = model.loss_and_gradient(batch, Objective::Mse);
    let mut analytic_flat = analytic;
    let mask = |m: &ReEncoderModel| -> Vec<bool> {
        m.forward(&triple.q_qa.0, &triple.d1.0)
            .pre
            .iter()
            .map(|&z| z > 0.0)
            .collect()
    };
    let base_mask = mask(model);
    let mut probe = model.clone();
    let mut report = GradientCheckReport {
        max_relative_error: 0.0,
        checked: 0,
        skipped_at_kinks: 0,
    };
    for k in 0..model.param_count() {
        let orig = *probe.param_mut(k);
        *probe.param_mut(k) = orig + epsilon;
        let (plus, mask_plus) = (probe.mse(batch), mask(&probe));
        *probe.param_mut(k) = orig - epsilon;
        let (minus, mask_minus) = (probe.mse(batch), mask(&probe));
        *probe.param_mut(k) = orig;
        if mask_plus != base_mask || mask_minus != base_mask {
            report.skipped_at_kinks += 1;
            continue;
        }
        let numeric = (plus - minus) / (2.0 * epsilon);
        let a = *analytic_flat.param_mut(k);
        let denom = a.abs().max(numeric.abs()).max(GRADIENT_CHECK_FLOOR);
        report.max_relative_error = report.max_relative_error.max((a - numeric).abs() / denom);
        report.checked += 1;
    }
    Ok(report)
}
