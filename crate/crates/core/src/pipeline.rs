//! End-to-end scoring: the three scorers, calibration, fusion and
//! evaluation, plus the on-disk model bundle.

use std::fs;
use std::io::BufReader;
use std::path::Path;

use serde::Serialize;

use crate::attention::attend;
use crate::cnn::{self, cnn_forward, CnnExample, CnnParams, CnnShape, TrainConfig};
use crate::corpus::{Dataset, Label, LabelKind, Sentence};
use crate::embedding::{load_text_embeddings, EmbeddingTable, DEFAULT_N_MAX};
use crate::error::{Error, Result};
use crate::fusion::{
    calibrate_weights, classify, fuse, read_fusion, scale_to_sts, train_fusion, write_fusion,
    FusionMode, FusionParams, FusionWeights, ScoreTriple,
};
use crate::jaccard::jaccard_score;
use crate::metrics::{
    confusion_counts, prf_metrics, rank_correlations, MetricFactor, MetricReport,
};
use crate::tfidf::{build_stats, tfidf_score, CorpusStats};

pub const EMBEDDINGS_FILE: &str = "embeddings.txt";
pub const CNN_FILE: &str = "cnn.params";
pub const FUSION_FILE: &str = "fusion.params";
pub const STATS_FILE: &str = "stats.tsv";

/// Graded labels at or above this count as "similar" for the confusion
/// counts of a graded evaluation.
pub const GRADED_SIMILAR_THRESHOLD: f64 = 2.5;

/// Everything needed to score a pair.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelBundle {
    pub stats: CorpusStats,
    pub table: EmbeddingTable,
    pub cnn: CnnParams,
    pub weights: FusionWeights,
    pub fusion: FusionParams,
    pub n_max: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PairScores {
    pub jaccard: f64,
    pub w2vcnn: f64,
    pub tfidf: f64,
    pub fused: f64,
    pub predicted: bool,
}

impl PairScores {
    pub fn triple(&self) -> ScoreTriple {
        ScoreTriple {
            jaccard: self.jaccard,
            w2vcnn: self.w2vcnn,
            tfidf: self.tfidf,
        }
    }
}

/// The three standalone scores of a pair.
pub fn component_scores(
    a: &Sentence,
    b: &Sentence,
    stats: &CorpusStats,
    table: &EmbeddingTable,
    cnn: &CnnParams,
    n_max: usize,
) -> Result<ScoreTriple> {
    let att = attend(table, a, b, n_max)?;
    Ok(ScoreTriple {
        jaccard: jaccard_score(a, b),
        w2vcnn: cnn_forward(cnn, &att.a, &att.b)?,
        tfidf: tfidf_score(a, b, stats),
    })
}

pub fn score_pair(a: &Sentence, b: &Sentence, bundle: &ModelBundle) -> Result<PairScores> {
    let s = component_scores(
        a,
        b,
        &bundle.stats,
        &bundle.table,
        &bundle.cnn,
        bundle.n_max,
    )?;
    let fused = fuse(s, &bundle.weights, &bundle.fusion)?;
    Ok(PairScores {
        jaccard: s.jaccard,
        w2vcnn: s.w2vcnn,
        tfidf: s.tfidf,
        fused,
        predicted: classify(fused),
    })
}

pub fn score_dataset(dataset: &Dataset, bundle: &ModelBundle) -> Result<Vec<PairScores>> {
    dataset
        .pairs()
        .iter()
        .map(|p| score_pair(&p.a, &p.b, bundle))
        .collect()
}

fn binary_labels(dataset: &Dataset) -> Result<Vec<bool>> {
    dataset
        .pairs()
        .iter()
        .map(|p| p.label.as_binary().ok_or(Error::LabelKind))
        .collect()
}

/// Binary datasets: classification metrics of the fused score. Graded
/// datasets: Pearson/Spearman of `5 * fused` against gold, plus
/// confusion counts with gold binarized at [`GRADED_SIMILAR_THRESHOLD`].
pub fn evaluate(dataset: &Dataset, bundle: &ModelBundle) -> Result<MetricReport> {
    if dataset.is_empty() {
        return Err(Error::EmptyEval);
    }
    let scores = score_dataset(dataset, bundle)?;
    report_from_scores(dataset, &scores)
}

/// Metrics for already-computed fused scores, aligned with `dataset`.
pub fn report_from_scores(dataset: &Dataset, scores: &[PairScores]) -> Result<MetricReport> {
    if dataset.is_empty() {
        return Err(Error::EmptyEval);
    }
    let predicted: Vec<bool> = scores.iter().map(|s| s.predicted).collect();
    match dataset.label_kind() {
        LabelKind::Binary => prf_metrics(confusion_counts(&predicted, &binary_labels(dataset)?)?),
        LabelKind::Graded => {
            let gold: Vec<f64> = dataset
                .pairs()
                .iter()
                .map(|p| match p.label {
                    Label::Graded(g) => Ok(g),
                    Label::Binary(_) => Err(Error::LabelKind),
                })
                .collect::<Result<_>>()?;
            let labels: Vec<bool> = gold
                .iter()
                .map(|g| *g >= GRADED_SIMILAR_THRESHOLD)
                .collect();
            let mut report = prf_metrics(confusion_counts(&predicted, &labels)?)?;
            let sts: Vec<f64> = scores.iter().map(|s| scale_to_sts(s.fused)).collect();
            let (p, s) = rank_correlations(&sts, &gold)?;
            report.pearson = Some(p);
            report.spearman = Some(s);
            Ok(report)
        }
    }
}

/// Standalone metrics of each scorer, in (Jaccard, CNN, TF-IDF) order.
pub fn per_model_reports(triples: &[ScoreTriple], labels: &[bool]) -> Result<[MetricReport; 3]> {
    if triples.is_empty() {
        return Err(Error::EmptyEval);
    }
    let report = |pick: fn(&ScoreTriple) -> f64| -> Result<MetricReport> {
        let preds: Vec<bool> = triples.iter().map(|t| classify(pick(t))).collect();
        prf_metrics(confusion_counts(&preds, labels)?)
    };
    Ok([
        report(|t| t.jaccard)?,
        report(|t| t.w2vcnn)?,
        report(|t| t.tfidf)?,
    ])
}

/// Weights from already-measured per-model metrics.
pub fn calibrate_from_reports(reports: &[MetricReport; 3], factor: MetricFactor) -> FusionWeights {
    calibrate_weights(
        factor.pick(&reports[0]),
        factor.pick(&reports[1]),
        factor.pick(&reports[2]),
    )
}

/// Score every validation pair with each model alone, classify with the
/// 0.5 rule, and turn the chosen metric into fusion weights.
pub fn calibrate(
    validation: &Dataset,
    bundle: &ModelBundle,
    factor: MetricFactor,
) -> Result<FusionWeights> {
    if validation.is_empty() {
        return Err(Error::EmptyEval);
    }
    let labels = binary_labels(validation)?;
    let triples = validation
        .pairs()
        .iter()
        .map(|p| {
            component_scores(
                &p.a,
                &p.b,
                &bundle.stats,
                &bundle.table,
                &bundle.cnn,
                bundle.n_max,
            )
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(calibrate_from_reports(
        &per_model_reports(&triples, &labels)?,
        factor,
    ))
}

#[derive(Debug, Clone)]
pub struct TrainOptions {
    pub cnn: TrainConfig,
    pub fusion: TrainConfig,
    pub n_max: usize,
    pub fusion_mode: FusionMode,
    pub factor: MetricFactor,
}

impl Default for TrainOptions {
    fn default() -> Self {
        TrainOptions {
            cnn: TrainConfig::default(),
            fusion: TrainConfig::default(),
            n_max: DEFAULT_N_MAX,
            fusion_mode: FusionMode::default(),
            factor: MetricFactor::default(),
        }
    }
}

/// Progress records emitted by [`train_bundle`].
#[derive(Debug, Clone, PartialEq)]
pub enum TrainEvent {
    CnnEpoch { epoch: usize, loss: f64 },
    ModelMetric { model: &'static str, value: f64 },
    Weights(FusionWeights),
}

/// Build stats, train the CNN, calibrate weights on the training pairs,
/// then fit the fusion combiner.
pub fn train_bundle(
    dataset: &Dataset,
    table: EmbeddingTable,
    options: &TrainOptions,
    mut on_event: impl FnMut(TrainEvent),
) -> Result<ModelBundle> {
    if dataset.label_kind() != LabelKind::Binary {
        return Err(Error::LabelKind);
    }
    let stats = build_stats(dataset)?;
    let labels = binary_labels(dataset)?;
    let examples: Vec<CnnExample> = cnn::prepare_examples(dataset, &table, options.n_max)?;
    let trained = cnn::train_examples_with(
        &examples,
        CnnShape::with_dim(table.dim()),
        &options.cnn,
        |epoch, loss| on_event(TrainEvent::CnnEpoch { epoch, loss }),
    )?;
    let cnn = trained.params;

    let triples = dataset
        .pairs()
        .iter()
        .zip(&examples)
        .map(|(p, ex)| {
            Ok(ScoreTriple {
                jaccard: jaccard_score(&p.a, &p.b),
                w2vcnn: cnn_forward(&cnn, &ex.a, &ex.b)?,
                tfidf: tfidf_score(&p.a, &p.b, &stats),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let reports = per_model_reports(&triples, &labels)?;
    for (model, r) in ["jaccard", "w2vcnn", "tfidf"].into_iter().zip(&reports) {
        on_event(TrainEvent::ModelMetric {
            model,
            value: options.factor.pick(r),
        });
    }
    let weights = calibrate_from_reports(&reports, options.factor);
    on_event(TrainEvent::Weights(weights));

    let samples: Vec<(ScoreTriple, bool)> = triples.into_iter().zip(labels).collect();
    let fusion = match train_fusion(&samples, &weights, &options.fusion) {
        Ok(mut p) => {
            p.mode = options.fusion_mode;
            p
        }
        Err(Error::DegenerateData) if options.fusion_mode == FusionMode::WeightedSum => {
            FusionParams::weighted_sum()
        }
        Err(e) => return Err(e),
    };
    Ok(ModelBundle {
        stats,
        table,
        cnn,
        weights,
        fusion,
        n_max: options.n_max,
    })
}

fn read_file(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path.display().to_string(), e))
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    fs::write(path, contents).map_err(|e| Error::io(path.display().to_string(), e))
}

impl ModelBundle {
    /// Write the four bundle files into `dir`, creating it if needed.
    /// `n_max` and the OOV seed ride along as `#` header lines of
    /// `stats.tsv`.
    pub fn save(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir.display().to_string(), e))?;
        write_file(&dir.join(EMBEDDINGS_FILE), &self.table.to_text())?;
        write_file(&dir.join(CNN_FILE), &self.cnn.to_text())?;
        write_file(
            &dir.join(FUSION_FILE),
            &write_fusion(&self.weights, &self.fusion),
        )?;
        let stats = format!(
            "#n_max={}\n#oov_seed={}\n{}",
            self.n_max,
            self.table.oov_seed(),
            self.stats.to_tsv()
        );
        write_file(&dir.join(STATS_FILE), &stats)
    }

    pub fn load(dir: &Path) -> Result<Self> {
        let stats_text = read_file(&dir.join(STATS_FILE))?;
        let stats = CorpusStats::from_tsv(stats_text.as_bytes())?;
        let header = |key: &str| -> Result<Option<u64>> {
            let prefix = format!("#{key}=");
            stats_text
                .lines()
                .find_map(|l| l.strip_prefix(prefix.as_str()))
                .map(|v| {
                    v.trim()
                        .parse::<u64>()
                        .map_err(|_| Error::format(format!("bad {key} in {STATS_FILE}")))
                })
                .transpose()
        };
        let n_max = header("n_max")?.unwrap_or(DEFAULT_N_MAX as u64) as usize;
        if n_max == 0 {
            return Err(Error::Config("n_max must be at least 1".into()));
        }
        let oov_seed = header("oov_seed")?.unwrap_or(0);

        let emb_path = dir.join(EMBEDDINGS_FILE);
        let file =
            fs::File::open(&emb_path).map_err(|e| Error::io(emb_path.display().to_string(), e))?;
        let table = load_text_embeddings(BufReader::new(file), oov_seed)?;
        let cnn = CnnParams::from_text(&read_file(&dir.join(CNN_FILE))?)?;
        if cnn.shape.dim != table.dim() {
            return Err(Error::Dimension(format!(
                "CNN expects {}-dim embeddings, bundle has {}",
                cnn.shape.dim,
                table.dim()
            )));
        }
        let (weights, fusion) = read_fusion(&read_file(&dir.join(FUSION_FILE))?)?;
        Ok(ModelBundle {
            stats,
            table,
            cnn,
            weights,
            fusion,
            n_max,
        })
    }
}
