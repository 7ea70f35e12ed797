//! `simfuse` command line: `train`, `score` and `eval`.
//!
//! Exit codes: 0 on success, 1 for data or model errors, 2 for usage
//! errors.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::fs;
use std::io::{BufReader, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::cnn::TrainConfig;
use crate::corpus::{parse_pair_file, Dataset, Label, LabelConvention, LabelKind};
use crate::embedding::{load_text_embeddings, DEFAULT_N_MAX};
use crate::error::{Error, Result};
use crate::fusion::FusionMode;
use crate::metrics::MetricFactor;
use crate::pipeline::{
    evaluate, score_dataset, train_bundle, ModelBundle, TrainEvent, TrainOptions,
};

pub const EMBEDDINGS_ENV: &str = "SIMFUSE_EMBEDDINGS";

/// Learning rate of the fusion combiner. Its inputs are weighted scores
/// well below 1, so it needs a larger step than the CNN.
const FUSION_LEARNING_RATE: f64 = 0.5;
const FUSION_EPOCHS: usize = 200;

#[derive(Debug, Parser)]
#[command(
    name = "simfuse",
    version,
    about = "Sentence-pair similarity by multi-model fusion"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Train the CNN and fusion combiner, calibrate weights, write a model bundle.
    Train(TrainArgs),
    /// Score sentence pairs with a trained bundle.
    Score(ScoreArgs),
    /// Evaluate a bundle on labeled pairs.
    Eval(EvalArgs),
}

#[derive(Debug, Args)]
struct TrainArgs {
    #[arg(long)]
    pairs: PathBuf,
    /// Word vectors in word2vec text format (falls back to SIMFUSE_EMBEDDINGS).
    #[arg(long)]
    embeddings: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
    /// Flat `key = value` file; flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    learning_rate: Option<f64>,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long)]
    n_max: Option<usize>,
    #[arg(long)]
    fusion_mode: Option<String>,
    #[arg(long)]
    weighting_factor: Option<String>,
    #[command(flatten)]
    labels: LabelArgs,
}

#[derive(Debug, Args)]
struct LabelArgs {
    /// Treat label 0 as "similar" and 1 as "different".
    #[arg(long)]
    zero_is_similar: bool,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum OutputFormat {
    Tsv,
    Json,
}

#[derive(Debug, Args)]
struct ScoreArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    pairs: PathBuf,
    #[arg(long, value_enum, default_value = "tsv")]
    format: OutputFormat,
}

#[derive(Debug, Args)]
struct EvalArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    pairs: PathBuf,
    /// Pairs carry 0–5 graded labels; report Pearson/Spearman x100.
    #[arg(long)]
    graded: bool,
    #[command(flatten)]
    labels: LabelArgs,
}

/// Validated training settings.
#[derive(Debug, Clone, PartialEq)]
pub struct CliConfig {
    pub embedding_path: Option<PathBuf>,
    pub n_max: usize,
    pub seed: u64,
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub label_convention: LabelConvention,
    pub fusion_mode: FusionMode,
    pub weighting_factor: MetricFactor,
}

impl Default for CliConfig {
    fn default() -> Self {
        CliConfig {
            embedding_path: None,
            n_max: DEFAULT_N_MAX,
            seed: 0,
            learning_rate: TrainConfig::DEFAULT_LEARNING_RATE,
            epochs: TrainConfig::DEFAULT_EPOCHS,
            batch_size: TrainConfig::DEFAULT_BATCH_SIZE,
            label_convention: LabelConvention::default(),
            fusion_mode: FusionMode::default(),
            weighting_factor: MetricFactor::default(),
        }
    }
}

fn parse_value<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::Config(format!("invalid value `{value}` for `{key}`")))
}

impl CliConfig {
    /// Parse `key = value` lines; `#` starts a comment line.
    pub fn parse(text: &str) -> Result<BTreeMap<String, String>> {
        let mut out = BTreeMap::new();
        for (idx, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| {
                Error::Config(format!("line {}: expected `key = value`", idx + 1))
            })?;
            out.insert(k.trim().to_owned(), v.trim().to_owned());
        }
        Ok(out)
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        match key {
            "embedding_path" => self.embedding_path = Some(PathBuf::from(value)),
            "n_max" => self.n_max = parse_value(key, value)?,
            "seed" => self.seed = parse_value(key, value)?,
            "learning_rate" => self.learning_rate = parse_value(key, value)?,
            "epochs" => self.epochs = parse_value(key, value)?,
            "batch_size" => self.batch_size = parse_value(key, value)?,
            "label_convention" => self.label_convention = value.parse()?,
            "fusion_mode" => self.fusion_mode = value.parse()?,
            "weighting_factor" => self.weighting_factor = value.parse()?,
            other => return Err(Error::Config(format!("unknown config key `{other}`"))),
        }
        Ok(())
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut cfg = CliConfig::default();
        for (k, v) in CliConfig::parse(text)? {
            cfg.set(&k, &v)?;
        }
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_max == 0 {
            return Err(Error::Config("n_max must be at least 1".into()));
        }
        TrainConfig::new(self.learning_rate, self.epochs, self.batch_size, self.seed)?;
        Ok(())
    }

    fn train_options(&self) -> Result<TrainOptions> {
        Ok(TrainOptions {
            cnn: TrainConfig::new(self.learning_rate, self.epochs, self.batch_size, self.seed)?,
            fusion: TrainConfig::new(
                FUSION_LEARNING_RATE,
                FUSION_EPOCHS,
                self.batch_size,
                self.seed,
            )?,
            n_max: self.n_max,
            fusion_mode: self.fusion_mode,
            factor: self.weighting_factor,
        })
    }
}

fn convention(args: &LabelArgs) -> Option<LabelConvention> {
    args.zero_is_similar
        .then_some(LabelConvention::ZeroIsSimilar)
}

fn read_pairs(path: &Path, kind: LabelKind, convention: LabelConvention) -> Result<Dataset> {
    let file = fs::File::open(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    parse_pair_file(BufReader::new(file), kind, convention).map_err(|e| match e {
        Error::Format { line, message } => Error::Format {
            line,
            message: format!("{}: {message}", path.display()),
        },
        other => other,
    })
}

fn io_err(e: std::io::Error) -> Error {
    Error::io("<stdout>", e)
}

fn cmd_train(args: TrainArgs, out: &mut dyn Write) -> Result<()> {
    let mut cfg = match &args.config {
        Some(path) => CliConfig::from_text(
            &fs::read_to_string(path).map_err(|e| Error::io(path.display().to_string(), e))?,
        )?,
        None => CliConfig::default(),
    };
    if let Some(v) = args.seed {
        cfg.seed = v;
    }
    if let Some(v) = args.epochs {
        cfg.epochs = v;
    }
    if let Some(v) = args.learning_rate {
        cfg.learning_rate = v;
    }
    if let Some(v) = args.batch_size {
        cfg.batch_size = v;
    }
    if let Some(v) = args.n_max {
        cfg.n_max = v;
    }
    if let Some(v) = &args.fusion_mode {
        cfg.fusion_mode = v.parse()?;
    }
    if let Some(v) = &args.weighting_factor {
        cfg.weighting_factor = v.parse()?;
    }
    if let Some(c) = convention(&args.labels) {
        cfg.label_convention = c;
    }
    if let Some(p) = args.embeddings {
        cfg.embedding_path = Some(p);
    }
    if cfg.embedding_path.is_none() {
        cfg.embedding_path = std::env::var_os(EMBEDDINGS_ENV).map(PathBuf::from);
    }
    cfg.validate()?;
    let emb_path = cfg.embedding_path.clone().ok_or_else(|| {
        Error::Config(format!(
            "no embeddings given (--embeddings, embedding_path or {EMBEDDINGS_ENV})"
        ))
    })?;

    let dataset = read_pairs(&args.pairs, LabelKind::Binary, cfg.label_convention)?;
    let file =
        fs::File::open(&emb_path).map_err(|e| Error::io(emb_path.display().to_string(), e))?;
    let table = load_text_embeddings(BufReader::new(file), cfg.seed)?;

    let mut write_err = None;
    let bundle = train_bundle(&dataset, table, &cfg.train_options()?, |event| {
        let line = match event {
            TrainEvent::CnnEpoch { epoch, loss } => format!("epoch\t{epoch}\tloss\t{loss}"),
            TrainEvent::ModelMetric { model, value } => format!("metric\t{model}\t{value}"),
            TrainEvent::Weights(w) => format!("weights\t{}\t{}\t{}", w.alpha, w.beta, w.gamma),
        };
        if let Err(e) = writeln!(out, "{line}") {
            write_err.get_or_insert(e);
        }
    })?;
    if let Some(e) = write_err {
        return Err(io_err(e));
    }
    bundle.save(&args.out)?;
    writeln!(out, "bundle\t{}", args.out.display()).map_err(io_err)
}

#[derive(Serialize)]
struct ScoreRecord<'a> {
    id: &'a str,
    jaccard: f64,
    w2vcnn: f64,
    tfidf: f64,
    fused: f64,
    predicted: &'static str,
}

fn label_name(similar: bool) -> &'static str {
    if similar {
        "similar"
    } else {
        "different"
    }
}

fn cmd_score(args: ScoreArgs, out: &mut dyn Write) -> Result<()> {
    let bundle = ModelBundle::load(&args.model)?;
    // labels are not used for scoring; graded parsing accepts 0/1 too
    let dataset = read_pairs(&args.pairs, LabelKind::Graded, LabelConvention::default())?;
    let scores = score_dataset(&dataset, &bundle)?;
    if let OutputFormat::Tsv = args.format {
        writeln!(out, "id\tjaccard\tw2vcnn\ttfidf\tfused\tpredicted").map_err(io_err)?;
    }
    for (pair, s) in dataset.pairs().iter().zip(&scores) {
        let rec = ScoreRecord {
            id: &pair.id,
            jaccard: s.jaccard,
            w2vcnn: s.w2vcnn,
            tfidf: s.tfidf,
            fused: s.fused,
            predicted: label_name(s.predicted),
        };
        match args.format {
            OutputFormat::Tsv => writeln!(
                out,
                "{}\t{}\t{}\t{}\t{}\t{}",
                rec.id, rec.jaccard, rec.w2vcnn, rec.tfidf, rec.fused, rec.predicted
            ),
            OutputFormat::Json => writeln!(
                out,
                "{}",
                serde_json::to_string(&rec).expect("score records serialize")
            ),
        }
        .map_err(io_err)?;
    }
    Ok(())
}

fn cmd_eval(args: EvalArgs, out: &mut dyn Write) -> Result<()> {
    let bundle = ModelBundle::load(&args.model)?;
    let conv = convention(&args.labels).unwrap_or_default();
    let kind = if args.graded {
        LabelKind::Graded
    } else {
        LabelKind::Binary
    };
    let dataset = read_pairs(&args.pairs, kind, conv)?;
    if dataset.is_empty() {
        return Err(Error::EmptyEval);
    }
    if args.graded
        && dataset
            .pairs()
            .iter()
            .all(|p| matches!(p.label, Label::Graded(g) if g == 0.0 || g == 1.0))
    {
        return Err(Error::Config(
            "--graded given but every label is 0 or 1; this looks like a binary file".into(),
        ));
    }
    let report = evaluate(&dataset, &bundle)?;
    let w = |out: &mut dyn Write, s: String| writeln!(out, "{s}").map_err(io_err);
    w(out, format!("pairs\t{}", dataset.len()))?;
    match (report.pearson, report.spearman) {
        (Some(p), Some(s)) => {
            w(out, format!("pearson\t{p}"))?;
            w(out, format!("spearman\t{s}"))?;
            w(
                out,
                format!(
                    "pearson / spearman (x100)\t{:.1} / {:.1}",
                    p * 100.0,
                    s * 100.0
                ),
            )?;
        }
        _ => {
            w(
                out,
                format!(
                    "tp\t{}\ntn\t{}\nfp\t{}\nfn\t{}",
                    report.tp, report.tn, report.fp, report.fn_
                ),
            )?;
            w(out, format!("accuracy\t{}", report.accuracy))?;
            w(out, format!("precision\t{}", report.precision))?;
            w(out, format!("recall\t{}", report.recall))?;
            w(out, format!("f1\t{}", report.f1))?;
        }
    }
    Ok(())
}

/// Run the CLI on `args` (including the program name) and return the
/// process exit code.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = e.exit_code();
            let rendered = e.render().to_string();
            if code == 0 {
                let _ = write!(out, "{rendered}");
            } else {
                let _ = write!(err, "{rendered}");
            }
            return code;
        }
    };
    let result = match cli.command {
        Command::Train(a) => cmd_train(a, out),
        Command::Score(a) => cmd_score(a, out),
        Command::Eval(a) => cmd_eval(a, out),
    };
    match result {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            1
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_parsing() {
        let cfg = CliConfig::from_text(
            "# comment\nseed = 9\nepochs=3\nlabel_convention = zero_is_similar\nfusion_mode = weighted_sum\nweighting_factor = f1\n",
        )
        .unwrap();
        assert_eq!(cfg.seed, 9);
        assert_eq!(cfg.epochs, 3);
        assert_eq!(cfg.label_convention, LabelConvention::ZeroIsSimilar);
        assert_eq!(cfg.fusion_mode, FusionMode::WeightedSum);
        assert_eq!(cfg.weighting_factor, MetricFactor::F1);
    }

    #[test]
    fn config_rejects_unknown_and_invalid() {
        assert!(matches!(
            CliConfig::from_text("colour = red"),
            Err(Error::Config(_))
        ));
        assert!(CliConfig::from_text("epochs = many").is_err());
        assert!(CliConfig::from_text("just words").is_err());
        let cfg = CliConfig::from_text("epochs = 0").unwrap();
        assert!(cfg.validate().is_err());
        let cfg = CliConfig::from_text("learning_rate = -1").unwrap();
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn usage_errors_exit_2() {
        let (mut out, mut err) = (Vec::new(), Vec::new());
        let code = run(
            ["simfuse", "train", "--embeddings", "e.txt", "--out", "x"],
            &mut out,
            &mut err,
        );
        assert_eq!(code, 2);
        assert!(String::from_utf8_lossy(&err).contains("--pairs"));
        assert_eq!(run(["simfuse"], &mut out, &mut err), 2);
        assert_eq!(run(["simfuse", "--help"], &mut out, &mut err), 0);
    }
}
