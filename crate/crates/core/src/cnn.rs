//! Convolution + max-pooling scorer over attention-weighted sentence
//! matrices, trained from scratch with mini-batch SGD on binary
//! cross-entropy.
//!
//! Both sentences share one filter bank. Each filter slides over the token
//! axis (stride 1, windows starting on a true token), goes through ReLU
//! and is max-pooled over positions, giving feature vectors `fa` and `fb`.
//! The head sees `[|fa - fb|, fa * fb]`, so the score is exactly symmetric
//! in its two arguments.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::corpus::{Dataset, Label};
use crate::embedding::{EmbeddingTable, SentenceMatrix};
use crate::error::{Error, Result};
use crate::params_io::{self, Lines};

pub const FORMAT_TAG: &str = "simfuse-cnn v1";

/// Layer sizes: filter count, kernel width, embedding width, hidden units.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CnnShape {
    pub filters: usize,
    pub width: usize,
    pub dim: usize,
    pub hidden: usize,
}

impl CnnShape {
    pub const DEFAULT_FILTERS: usize = 32;
    pub const DEFAULT_WIDTH: usize = 3;
    pub const DEFAULT_HIDDEN: usize = 16;

    pub fn with_dim(dim: usize) -> Self {
        CnnShape {
            filters: Self::DEFAULT_FILTERS,
            width: Self::DEFAULT_WIDTH,
            dim,
            hidden: Self::DEFAULT_HIDDEN,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.filters == 0 || self.width == 0 || self.dim == 0 || self.hidden == 0 {
            return Err(Error::Config(format!("degenerate CNN shape {self:?}")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CnnParams {
    pub shape: CnnShape,
    /// `filters x (width * dim)`, row-major over (offset, component).
    pub conv_w: Vec<f64>,
    pub conv_b: Vec<f64>,
    /// `hidden x (2 * filters)`.
    pub dense_w: Vec<f64>,
    pub dense_b: Vec<f64>,
    pub out_w: Vec<f64>,
    pub out_b: f64,
    pub rng_seed: u64,
}

/// Gradient buffers laid out like [`CnnParams`].
#[derive(Debug, Clone, PartialEq)]
pub struct CnnGradients {
    pub conv_w: Vec<f64>,
    pub conv_b: Vec<f64>,
    pub dense_w: Vec<f64>,
    pub dense_b: Vec<f64>,
    pub out_w: Vec<f64>,
    pub out_b: f64,
}

impl CnnGradients {
    fn zeros(shape: &CnnShape) -> Self {
        let CnnShape {
            filters: f,
            width: k,
            dim: d,
            hidden: h,
        } = *shape;
        CnnGradients {
            conv_w: vec![0.0; f * k * d],
            conv_b: vec![0.0; f],
            dense_w: vec![0.0; h * 2 * f],
            dense_b: vec![0.0; h],
            out_w: vec![0.0; h],
            out_b: 0.0,
        }
    }

    pub fn tensors(&self) -> [&[f64]; 6] {
        [
            &self.conv_w,
            &self.conv_b,
            &self.dense_w,
            &self.dense_b,
            &self.out_w,
            std::slice::from_ref(&self.out_b),
        ]
    }

    pub fn tensors_mut(&mut self) -> [&mut [f64]; 6] {
        [
            &mut self.conv_w,
            &mut self.conv_b,
            &mut self.dense_w,
            &mut self.dense_b,
            &mut self.out_w,
            std::slice::from_mut(&mut self.out_b),
        ]
    }

    fn add_scaled(&mut self, other: &CnnGradients, scale: f64) {
        for (dst, src) in self.tensors_mut().into_iter().zip(other.tensors()) {
            dst.iter_mut().zip(src).for_each(|(d, s)| *d += scale * s);
        }
    }
}

// Cached activations of one sentence through the conv + pool stage.
struct Pooled {
    features: Vec<f64>,
    // window start of each filter's maximum; None when the ReLU is inactive
    argmax: Vec<Option<usize>>,
}

struct Forward {
    fa: Pooled,
    fb: Pooled,
    z: Vec<f64>,
    hidden_pre: Vec<f64>,
    hidden: Vec<f64>,
    logit: f64,
}

#[derive(Debug, PartialEq)]
struct ActivationPattern {
    argmax_a: Vec<Option<usize>>,
    argmax_b: Vec<Option<usize>>,
    order: Vec<Option<std::cmp::Ordering>>,
    hidden_active: Vec<bool>,
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// `-[y ln p + (1-y) ln(1-p)]` with `p = sigmoid(logit)`, computed stably.
pub fn bce_with_logit(logit: f64, label: bool) -> f64 {
    let softplus = logit.max(0.0) + (-logit.abs()).exp().ln_1p();
    softplus - if label { logit } else { 0.0 }
}

impl CnnParams {
    /// Uniform init in `±1/sqrt(fan_in)` for weights; zero biases.
    pub fn init(shape: CnnShape, seed: u64) -> Result<Self> {
        shape.validate()?;
        let CnnShape {
            filters: f,
            width: k,
            dim: d,
            hidden: h,
        } = shape;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut uniform = |n: usize, fan_in: usize| -> Vec<f64> {
            let bound = 1.0 / (fan_in as f64).sqrt();
            (0..n).map(|_| rng.gen_range(-bound..bound)).collect()
        };
        let conv_w = uniform(f * k * d, k * d);
        let dense_w = uniform(h * 2 * f, 2 * f);
        let out_w = uniform(h, h);
        Ok(CnnParams {
            shape,
            conv_w,
            conv_b: vec![0.0; f],
            dense_w,
            dense_b: vec![0.0; h],
            out_w,
            out_b: 0.0,
            rng_seed: seed,
        })
    }

    pub fn parameter_count(&self) -> usize {
        self.tensors().iter().map(|t| t.len()).sum()
    }

    pub fn tensors(&self) -> [&[f64]; 6] {
        [
            &self.conv_w,
            &self.conv_b,
            &self.dense_w,
            &self.dense_b,
            &self.out_w,
            std::slice::from_ref(&self.out_b),
        ]
    }

    pub fn tensors_mut(&mut self) -> [&mut [f64]; 6] {
        [
            &mut self.conv_w,
            &mut self.conv_b,
            &mut self.dense_w,
            &mut self.dense_b,
            &mut self.out_w,
            std::slice::from_mut(&mut self.out_b),
        ]
    }

    fn check_input(&self, m: &SentenceMatrix) -> Result<()> {
        if m.true_length == 0 {
            return Err(Error::EmptySentence);
        }
        if m.dim() != self.shape.dim {
            return Err(Error::Dimension(format!(
                "CNN expects width {}, got {}",
                self.shape.dim,
                m.dim()
            )));
        }
        Ok(())
    }

    fn conv_at(&self, m: &SentenceMatrix, filter: usize, start: usize) -> f64 {
        let CnnShape {
            width: k, dim: d, ..
        } = self.shape;
        let kernel = &self.conv_w[filter * k * d..(filter + 1) * k * d];
        let mut acc = self.conv_b[filter];
        for r in 0..k {
            let t = start + r;
            if t >= m.true_length {
                break;
            }
            acc += kernel[r * d..(r + 1) * d]
                .iter()
                .zip(&m.rows[t])
                .map(|(w, x)| w * x)
                .sum::<f64>();
        }
        acc
    }

    // Windows start on true tokens only; shorter sentences get one
    // zero-padded window.
    fn pool(&self, m: &SentenceMatrix) -> Pooled {
        let positions = m.true_length.max(self.shape.width) - self.shape.width + 1;
        let mut features = Vec::with_capacity(self.shape.filters);
        let mut argmax = Vec::with_capacity(self.shape.filters);
        for f in 0..self.shape.filters {
            let (best_t, best) = (0..positions).map(|t| (t, self.conv_at(m, f, t))).fold(
                (0, f64::NEG_INFINITY),
                |acc, cur| if cur.1 > acc.1 { cur } else { acc },
            );
            if best > 0.0 {
                features.push(best);
                argmax.push(Some(best_t));
            } else {
                features.push(0.0);
                argmax.push(None);
            }
        }
        Pooled { features, argmax }
    }

    fn forward_cached(&self, a: &SentenceMatrix, b: &SentenceMatrix) -> Forward {
        let CnnShape {
            filters: f,
            hidden: h,
            ..
        } = self.shape;
        let fa = self.pool(a);
        let fb = self.pool(b);
        let mut z = Vec::with_capacity(2 * f);
        z.extend(
            fa.features
                .iter()
                .zip(&fb.features)
                .map(|(x, y)| (x - y).abs()),
        );
        z.extend(fa.features.iter().zip(&fb.features).map(|(x, y)| x * y));
        let hidden_pre: Vec<f64> = (0..h)
            .map(|j| {
                self.dense_b[j]
                    + self.dense_w[j * 2 * f..(j + 1) * 2 * f]
                        .iter()
                        .zip(&z)
                        .map(|(w, x)| w * x)
                        .sum::<f64>()
            })
            .collect();
        let hidden: Vec<f64> = hidden_pre.iter().map(|x| x.max(0.0)).collect();
        let logit = self.out_b
            + self
                .out_w
                .iter()
                .zip(&hidden)
                .map(|(w, x)| w * x)
                .sum::<f64>();
        Forward {
            fa,
            fb,
            z,
            hidden_pre,
            hidden,
            logit,
        }
    }

    pub fn logit(&self, a: &SentenceMatrix, b: &SentenceMatrix) -> Result<f64> {
        self.check_input(a)?;
        self.check_input(b)?;
        Ok(self.forward_cached(a, b).logit)
    }

    /// Loss together with the piecewise-linear branch taken by every
    /// nonlinearity.
    fn probe(&self, ex: &CnnExample) -> Result<(f64, ActivationPattern)> {
        self.check_input(&ex.a)?;
        self.check_input(&ex.b)?;
        let fw = self.forward_cached(&ex.a, &ex.b);
        let pattern = ActivationPattern {
            argmax_a: fw.fa.argmax.clone(),
            argmax_b: fw.fb.argmax.clone(),
            order: fw
                .fa
                .features
                .iter()
                .zip(&fw.fb.features)
                .map(|(x, y)| x.partial_cmp(y))
                .collect(),
            hidden_active: fw.hidden_pre.iter().map(|&x| x > 0.0).collect(),
        };
        Ok((bce_with_logit(fw.logit, ex.label), pattern))
    }

    /// Cross-entropy loss on one example.
    pub fn loss(&self, ex: &CnnExample) -> Result<f64> {
        Ok(bce_with_logit(self.logit(&ex.a, &ex.b)?, ex.label))
    }

    /// Loss and its gradient with respect to every parameter.
    pub fn backward(&self, ex: &CnnExample) -> Result<(f64, CnnGradients)> {
        self.check_input(&ex.a)?;
        self.check_input(&ex.b)?;
        let CnnShape {
            filters: f,
            width: k,
            dim: d,
            hidden: h,
        } = self.shape;
        let fw = self.forward_cached(&ex.a, &ex.b);
        let y = if ex.label { 1.0 } else { 0.0 };
        let loss = bce_with_logit(fw.logit, ex.label);
        let dlogit = sigmoid(fw.logit) - y;

        let mut g = CnnGradients::zeros(&self.shape);
        g.out_b = dlogit;
        let mut dz = vec![0.0; 2 * f];
        for j in 0..h {
            g.out_w[j] = dlogit * fw.hidden[j];
            if fw.hidden_pre[j] <= 0.0 {
                continue;
            }
            let dpre = dlogit * self.out_w[j];
            g.dense_b[j] = dpre;
            let row = j * 2 * f;
            for (i, d) in dz.iter_mut().enumerate() {
                g.dense_w[row + i] = dpre * fw.z[i];
                *d += dpre * self.dense_w[row + i];
            }
        }

        for i in 0..f {
            let (xa, xb) = (fw.fa.features[i], fw.fb.features[i]);
            let sign = if xa > xb {
                1.0
            } else if xa < xb {
                -1.0
            } else {
                0.0
            };
            let dfa = dz[i] * sign + dz[f + i] * xb;
            let dfb = -dz[i] * sign + dz[f + i] * xa;
            for (pooled, m, df) in [(&fw.fa, &ex.a, dfa), (&fw.fb, &ex.b, dfb)] {
                let Some(t0) = pooled.argmax[i] else { continue };
                g.conv_b[i] += df;
                let kernel = i * k * d;
                for r in 0..k {
                    let t = t0 + r;
                    if t >= m.true_length {
                        break;
                    }
                    for c in 0..d {
                        g.conv_w[kernel + r * d + c] += df * m.rows[t][c];
                    }
                }
            }
        }
        Ok((loss, g))
    }

    pub fn to_text(&self) -> String {
        let CnnShape {
            filters: f,
            width: k,
            dim: d,
            hidden: h,
        } = self.shape;
        let mut out = format!("{FORMAT_TAG} {f} {k} {d} {h}\nseed {}\n", self.rng_seed);
        params_io::write_tensor(&mut out, "conv_weight", f, k * d, &self.conv_w);
        params_io::write_tensor(&mut out, "conv_bias", 1, f, &self.conv_b);
        params_io::write_tensor(&mut out, "dense_weight", h, 2 * f, &self.dense_w);
        params_io::write_tensor(&mut out, "dense_bias", 1, h, &self.dense_b);
        params_io::write_tensor(&mut out, "output_weight", 1, h, &self.out_w);
        params_io::write_tensor(&mut out, "output_bias", 1, 1, &[self.out_b]);
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = Lines::new(text);
        let (n, header) = lines.next_line()?;
        let dims = header
            .strip_prefix(FORMAT_TAG)
            .ok_or_else(|| Error::format_at(n, format!("expected `{FORMAT_TAG}` header")))?;
        let dims: Vec<usize> = dims
            .split_whitespace()
            .map(|s| params_io::parse_usize(n, s))
            .collect::<Result<_>>()?;
        let [f, k, d, h] = dims[..] else {
            return Err(Error::format_at(n, "header needs F k d h"));
        };
        let shape = CnnShape {
            filters: f,
            width: k,
            dim: d,
            hidden: h,
        };
        shape
            .validate()
            .map_err(|e| Error::format_at(n, e.to_string()))?;
        let (n, seed) = lines.keyed("seed")?;
        let rng_seed = seed.parse().map_err(|_| Error::format_at(n, "bad seed"))?;
        let conv_w = lines.tensor("conv_weight", f, k * d)?;
        let conv_b = lines.tensor("conv_bias", 1, f)?;
        let dense_w = lines.tensor("dense_weight", h, 2 * f)?;
        let dense_b = lines.tensor("dense_bias", 1, h)?;
        let out_w = lines.tensor("output_weight", 1, h)?;
        let out_b = lines.tensor("output_bias", 1, 1)?[0];
        if !lines.at_end() {
            return Err(Error::format("trailing content after output_bias"));
        }
        Ok(CnnParams {
            shape,
            conv_w,
            conv_b,
            dense_w,
            dense_b,
            out_w,
            out_b,
            rng_seed,
        })
    }
}

/// Similarity in `(0, 1)` of two attention-weighted sentence matrices.
pub fn cnn_forward(params: &CnnParams, a: &SentenceMatrix, b: &SentenceMatrix) -> Result<f64> {
    params.logit(a, b).map(sigmoid)
}

/// One training example: attention-weighted matrices and a similar/different label.
#[derive(Debug, Clone, PartialEq)]
pub struct CnnExample {
    pub a: SentenceMatrix,
    pub b: SentenceMatrix,
    pub label: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainConfig {
    learning_rate: f64,
    epochs: usize,
    batch_size: usize,
    seed: u64,
}

impl TrainConfig {
    pub const DEFAULT_LEARNING_RATE: f64 = 0.05;
    pub const DEFAULT_EPOCHS: usize = 60;
    pub const DEFAULT_BATCH_SIZE: usize = 16;

    pub fn new(learning_rate: f64, epochs: usize, batch_size: usize, seed: u64) -> Result<Self> {
        if !(learning_rate > 0.0 && learning_rate.is_finite()) {
            return Err(Error::Config(format!(
                "learning_rate must be positive, got {learning_rate}"
            )));
        }
        if epochs == 0 {
            return Err(Error::Config("epochs must be at least 1".into()));
        }
        if batch_size == 0 {
            return Err(Error::Config("batch_size must be at least 1".into()));
        }
        Ok(TrainConfig {
            learning_rate,
            epochs,
            batch_size,
            seed,
        })
    }

    pub fn learning_rate(&self) -> f64 {
        self.learning_rate
    }

    pub fn epochs(&self) -> usize {
        self.epochs
    }

    pub fn batch_size(&self) -> usize {
        self.batch_size
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: Self::DEFAULT_LEARNING_RATE,
            epochs: Self::DEFAULT_EPOCHS,
            batch_size: Self::DEFAULT_BATCH_SIZE,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainedCnn {
    pub params: CnnParams,
    /// Mean cross-entropy over each epoch's mini-batches, before the update.
    pub epoch_losses: Vec<f64>,
}

impl TrainedCnn {
    pub fn final_loss(&self) -> f64 {
        self.epoch_losses.last().copied().unwrap_or(f64::NAN)
    }
}

/// Attention-weighted training examples for a binary dataset.
pub fn prepare_examples(
    dataset: &Dataset,
    table: &EmbeddingTable,
    n_max: usize,
) -> Result<Vec<CnnExample>> {
    dataset
        .pairs()
        .iter()
        .map(|p| {
            let label = match p.label {
                Label::Binary(b) => b,
                Label::Graded(_) => return Err(Error::LabelKind),
            };
            let att = crate::attention::attend(table, &p.a, &p.b, n_max)?;
            Ok(CnnExample {
                a: att.a,
                b: att.b,
                label,
            })
        })
        .collect()
}

/// Mini-batch SGD on prepared examples. Deterministic for a fixed seed.
pub fn train_examples(
    examples: &[CnnExample],
    shape: CnnShape,
    config: &TrainConfig,
) -> Result<TrainedCnn> {
    train_examples_with(examples, shape, config, |_, _| {})
}

/// [`train_examples`] with a callback after each epoch `(epoch, mean_loss)`.
pub fn train_examples_with(
    examples: &[CnnExample],
    shape: CnnShape,
    config: &TrainConfig,
    mut on_epoch: impl FnMut(usize, f64),
) -> Result<TrainedCnn> {
    if examples.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    let mut params = CnnParams::init(shape, config.seed)?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed.wrapping_add(1));
    let mut order: Vec<usize> = (0..examples.len()).collect();
    let mut epoch_losses = Vec::with_capacity(config.epochs);
    for epoch in 0..config.epochs {
        order.shuffle(&mut rng);
        let mut total = 0.0;
        for batch in order.chunks(config.batch_size) {
            let mut acc = CnnGradients::zeros(&shape);
            for &i in batch {
                let (loss, g) = params.backward(&examples[i])?;
                total += loss;
                acc.add_scaled(&g, 1.0 / batch.len() as f64);
            }
            for (p, g) in params.tensors_mut().into_iter().zip(acc.tensors()) {
                p.iter_mut()
                    .zip(g)
                    .for_each(|(p, g)| *p -= config.learning_rate * g);
            }
        }
        let mean = total / examples.len() as f64;
        on_epoch(epoch + 1, mean);
        epoch_losses.push(mean);
    }
    Ok(TrainedCnn {
        params,
        epoch_losses,
    })
}

/// Train on a binary dataset: embed, attend, then run SGD.
pub fn cnn_train(
    dataset: &Dataset,
    table: &EmbeddingTable,
    n_max: usize,
    config: &TrainConfig,
) -> Result<TrainedCnn> {
    let examples = prepare_examples(dataset, table, n_max)?;
    train_examples(&examples, CnnShape::with_dim(table.dim()), config)
}

/// Outcome of a finite-difference gradient check.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradientCheck {
    /// Largest `|g_analytic - g_numeric| / max(|g_analytic|, |g_numeric|, 1e-12)`
    /// over the checked parameters.
    pub max_relative_error: f64,
    pub checked: usize,
    /// Parameters whose `±epsilon` probe changed the activation pattern
    /// (a ReLU switching, a different max-pool window, or `fa - fb`
    /// changing sign), where the loss is not differentiable on the probe
    /// interval and central differences say nothing about backprop.
    pub skipped: usize,
}

/// Largest relative error between backprop and central differences.
/// See [`gradient_check_report`] for which parameters are compared.
pub fn gradient_check(params: &CnnParams, example: &CnnExample, epsilon: f64) -> Result<f64> {
    Ok(gradient_check_report(params, example, epsilon, |_| {})?.max_relative_error)
}

/// Central-difference check of every parameter after `tamper` has had a
/// chance to modify the analytic gradient.
pub fn gradient_check_report(
    params: &CnnParams,
    example: &CnnExample,
    epsilon: f64,
    tamper: impl FnOnce(&mut CnnGradients),
) -> Result<GradientCheck> {
    if epsilon.is_nan() || epsilon <= 0.0 {
        return Err(Error::Config("epsilon must be positive".into()));
    }
    let (_, mut analytic) = params.backward(example)?;
    tamper(&mut analytic);
    let pattern = params.probe(example)?.1;
    let mut probe = params.clone();
    let mut report = GradientCheck {
        max_relative_error: 0.0,
        checked: 0,
        skipped: 0,
    };
    for (t, grads) in analytic.tensors().iter().enumerate() {
        for (i, &ga) in grads.iter().enumerate() {
            let original = probe.tensors()[t][i];
            probe.tensors_mut()[t][i] = original + epsilon;
            let (plus, plus_pattern) = probe.probe(example)?;
            probe.tensors_mut()[t][i] = original - epsilon;
            let (minus, minus_pattern) = probe.probe(example)?;
            probe.tensors_mut()[t][i] = original;
            if plus_pattern != pattern || minus_pattern != pattern {
                report.skipped += 1;
                continue;
            }
            let gn = (plus - minus) / (2.0 * epsilon);
            let err = (ga - gn).abs() / ga.abs().max(gn.abs()).max(1e-12);
            report.max_relative_error = report.max_relative_error.max(err);
            report.checked += 1;
        }
    }
    Ok(report)
}
