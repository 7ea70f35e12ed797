//! Combining the three similarity scores.
//!
//! Per-model weights come from a softmax over each model's validation
//! metric. The weighted scores are either summed directly or fed to a
//! small ReLU network with a sigmoid output.

use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::attention::softmax;
use crate::cnn::{bce_with_logit, TrainConfig};
use crate::error::{Error, Result};
use crate::params_io::{self, Lines};

pub const FORMAT_TAG: &str = "simfuse-fusion v1";
pub const FUSION_HIDDEN: usize = 4;

/// Weights for the (Jaccard, word2vec-CNN, TF-IDF) scores.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FusionWeights {
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
}

impl FusionWeights {
    /// Accuracy-derived weights used when no calibration has run.
    pub const DEFAULT: FusionWeights = FusionWeights {
        alpha: 0.38,
        beta: 0.40,
        gamma: 0.22,
    };

    pub fn new(alpha: f64, beta: f64, gamma: f64) -> Result<Self> {
        let in_range = |x: f64| x > 0.0 && x < 1.0;
        if !(in_range(alpha) && in_range(beta) && in_range(gamma)) {
            return Err(Error::Config(format!(
                "fusion weights must lie in (0,1), got ({alpha}, {beta}, {gamma})"
            )));
        }
        if (alpha + beta + gamma - 1.0).abs() > 1e-9 {
            return Err(Error::Config(format!(
                "fusion weights must sum to 1, got {}",
                alpha + beta + gamma
            )));
        }
        Ok(FusionWeights { alpha, beta, gamma })
    }

    pub fn as_array(&self) -> [f64; 3] {
        [self.alpha, self.beta, self.gamma]
    }

    fn weigh(&self, s: ScoreTriple) -> [f64; 3] {
        [
            self.alpha * s.jaccard,
            self.beta * s.w2vcnn,
            self.gamma * s.tfidf,
        ]
    }
}

impl Default for FusionWeights {
    fn default() -> Self {
        Self::DEFAULT
    }
}

/// Softmax over the three models' metrics, in (Jaccard, CNN, TF-IDF) order.
pub fn calibrate_weights(
    metric_jaccard: f64,
    metric_w2vcnn: f64,
    metric_tfidf: f64,
) -> FusionWeights {
    let w = softmax(&[metric_jaccard, metric_w2vcnn, metric_tfidf]);
    FusionWeights {
        alpha: w[0],
        beta: w[1],
        gamma: w[2],
    }
}

/// The three per-model scores of a pair, each in `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScoreTriple {
    pub jaccard: f64,
    pub w2vcnn: f64,
    pub tfidf: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum FusionMode {
    WeightedSum,
    #[default]
    Learned,
}

impl FusionMode {
    pub fn as_str(self) -> &'static str {
        match self {
            FusionMode::WeightedSum => "weighted_sum",
            FusionMode::Learned => "learned",
        }
    }
}

impl fmt::Display for FusionMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for FusionMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "weighted_sum" => Ok(FusionMode::WeightedSum),
            "learned" => Ok(FusionMode::Learned),
            other => Err(Error::Config(format!("unknown fusion mode `{other}`"))),
        }
    }
}

/// Shallow combiner `3 -> hidden -> 1` over the weighted score triple.
#[derive(Debug, Clone, PartialEq)]
pub struct FusionNet {
    pub hidden: usize,
    /// `hidden x 3`.
    pub w: Vec<f64>,
    pub b: Vec<f64>,
    pub out_w: Vec<f64>,
    pub out_b: f64,
}

impl FusionNet {
    pub fn init(hidden: usize, seed: u64) -> Result<Self> {
        if hidden == 0 {
            return Err(Error::Config(
                "fusion net needs at least one hidden unit".into(),
            ));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let b3 = 1.0 / 3f64.sqrt();
        let bh = 1.0 / (hidden as f64).sqrt();
        Ok(FusionNet {
            hidden,
            w: (0..hidden * 3).map(|_| rng.gen_range(-b3..b3)).collect(),
            b: vec![0.0; hidden],
            out_w: (0..hidden).map(|_| rng.gen_range(-bh..bh)).collect(),
            out_b: 0.0,
        })
    }

    fn hidden_pre(&self, x: [f64; 3]) -> Vec<f64> {
        (0..self.hidden)
            .map(|j| self.b[j] + (0..3).map(|i| self.w[j * 3 + i] * x[i]).sum::<f64>())
            .collect()
    }

    pub fn logit(&self, x: [f64; 3]) -> f64 {
        let pre = self.hidden_pre(x);
        self.out_b
            + pre
                .iter()
                .zip(&self.out_w)
                .map(|(p, w)| p.max(0.0) * w)
                .sum::<f64>()
    }

    // loss and gradient laid out as (w, b, out_w, out_b)
    fn backward(&self, x: [f64; 3], label: bool) -> (f64, Vec<f64>) {
        let h = self.hidden;
        let pre = self.hidden_pre(x);
        let logit = self.out_b
            + pre
                .iter()
                .zip(&self.out_w)
                .map(|(p, w)| p.max(0.0) * w)
                .sum::<f64>();
        let loss = bce_with_logit(logit, label);
        let dlogit = sigmoid(logit) - if label { 1.0 } else { 0.0 };
        let mut g = vec![0.0; 5 * h + 1];
        for j in 0..h {
            g[4 * h + j] = dlogit * pre[j].max(0.0);
            if pre[j] > 0.0 {
                let dpre = dlogit * self.out_w[j];
                for i in 0..3 {
                    g[j * 3 + i] = dpre * x[i];
                }
                g[3 * h + j] = dpre;
            }
        }
        g[5 * h] = dlogit;
        (loss, g)
    }

    fn step(&mut self, grad: &[f64], lr: f64) {
        let h = self.hidden;
        self.w
            .iter_mut()
            .zip(&grad[..3 * h])
            .for_each(|(p, g)| *p -= lr * g);
        self.b
            .iter_mut()
            .zip(&grad[3 * h..4 * h])
            .for_each(|(p, g)| *p -= lr * g);
        self.out_w
            .iter_mut()
            .zip(&grad[4 * h..5 * h])
            .for_each(|(p, g)| *p -= lr * g);
        self.out_b -= lr * grad[5 * h];
    }
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FusionParams {
    pub mode: FusionMode,
    pub net: Option<FusionNet>,
}

impl FusionParams {
    pub fn weighted_sum() -> Self {
        FusionParams {
            mode: FusionMode::WeightedSum,
            net: None,
        }
    }

    pub fn learned(net: FusionNet) -> Self {
        FusionParams {
            mode: FusionMode::Learned,
            net: Some(net),
        }
    }
}

/// Fused similarity in `[0, 1]`.
pub fn fuse(scores: ScoreTriple, weights: &FusionWeights, params: &FusionParams) -> Result<f64> {
    let x = weights.weigh(scores);
    match params.mode {
        FusionMode::WeightedSum => Ok((x[0] + x[1] + x[2]).clamp(0.0, 1.0)),
        FusionMode::Learned => {
            let net = params
                .net
                .as_ref()
                .ok_or_else(|| Error::Config("learned fusion mode without a trained net".into()))?;
            Ok(sigmoid(net.logit(x)))
        }
    }
}

/// Fit the shallow combiner on weighted score triples with SGD.
pub fn train_fusion(
    samples: &[(ScoreTriple, bool)],
    weights: &FusionWeights,
    config: &TrainConfig,
) -> Result<FusionParams> {
    let positives = samples.iter().filter(|(_, y)| *y).count();
    if positives == 0 || positives == samples.len() {
        return Err(Error::DegenerateData);
    }
    let inputs: Vec<([f64; 3], bool)> = samples
        .iter()
        .map(|(s, y)| (weights.weigh(*s), *y))
        .collect();
    let mut net = FusionNet::init(FUSION_HIDDEN, config.seed())?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed().wrapping_add(1));
    let mut order: Vec<usize> = (0..inputs.len()).collect();
    for _ in 0..config.epochs() {
        order.shuffle(&mut rng);
        for batch in order.chunks(config.batch_size()) {
            let mut acc = vec![0.0; 5 * FUSION_HIDDEN + 1];
            for &i in batch {
                let (_, g) = net.backward(inputs[i].0, inputs[i].1);
                acc.iter_mut()
                    .zip(&g)
                    .for_each(|(a, g)| *a += g / batch.len() as f64);
            }
            net.step(&acc, config.learning_rate());
        }
    }
    Ok(FusionParams::learned(net))
}

/// Similar when the score is at least as close to 1 as to 0.
pub fn classify(score: f64) -> bool {
    (score - 1.0).abs() <= (score - 0.0).abs()
}

/// Map a `[0, 1]` similarity onto the 0–5 STS scale.
pub fn scale_to_sts(score: f64) -> f64 {
    5.0 * score
}

/// `simfuse-fusion v1`, the weight line, the mode line and, when present,
/// the combiner tensors.
pub fn write_fusion(weights: &FusionWeights, params: &FusionParams) -> String {
    let f = params_io::fmt_f64;
    let mut out = format!(
        "{FORMAT_TAG}\n{} {} {}\nmode {}\n",
        f(weights.alpha),
        f(weights.beta),
        f(weights.gamma),
        params.mode
    );
    if let Some(net) = &params.net {
        let h = net.hidden;
        out.push_str(&format!("net {h}\n"));
        params_io::write_tensor(&mut out, "fusion_weight", h, 3, &net.w);
        params_io::write_tensor(&mut out, "fusion_bias", 1, h, &net.b);
        params_io::write_tensor(&mut out, "fusion_output_weight", 1, h, &net.out_w);
        params_io::write_tensor(&mut out, "fusion_output_bias", 1, 1, &[net.out_b]);
    }
    out
}

pub fn read_fusion(text: &str) -> Result<(FusionWeights, FusionParams)> {
    let mut lines = Lines::new(text);
    let (n, header) = lines.next_line()?;
    if header.trim() != FORMAT_TAG {
        return Err(Error::format_at(
            n,
            format!("expected `{FORMAT_TAG}` header"),
        ));
    }
    let (n, wline) = lines.next_line()?;
    let ws: Vec<f64> = wline
        .split_whitespace()
        .map(|s| {
            s.parse::<f64>()
                .map_err(|_| Error::format_at(n, format!("bad weight `{s}`")))
        })
        .collect::<Result<_>>()?;
    let [alpha, beta, gamma] = ws[..] else {
        return Err(Error::format_at(n, "expected `alpha beta gamma`"));
    };
    let weights =
        FusionWeights::new(alpha, beta, gamma).map_err(|e| Error::format_at(n, e.to_string()))?;
    let (n, mode) = lines.keyed("mode")?;
    let mode: FusionMode = mode
        .parse()
        .map_err(|e: Error| Error::format_at(n, e.to_string()))?;
    let net = if lines.at_end() {
        None
    } else {
        let (n, h) = lines.keyed("net")?;
        let hidden = params_io::parse_usize(n, h)?;
        let w = lines.tensor("fusion_weight", hidden, 3)?;
        let b = lines.tensor("fusion_bias", 1, hidden)?;
        let out_w = lines.tensor("fusion_output_weight", 1, hidden)?;
        let out_b = lines.tensor("fusion_output_bias", 1, 1)?[0];
        if !lines.at_end() {
            return Err(Error::format("trailing content after fusion tensors"));
        }
        Some(FusionNet {
            hidden,
            w,
            b,
            out_w,
            out_b,
        })
    };
    if mode == FusionMode::Learned && net.is_none() {
        return Err(Error::format("learned fusion mode without net tensors"));
    }
    Ok((weights, FusionParams { mode, net }))
}
