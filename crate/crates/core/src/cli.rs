//! Command-line surface: corpus preprocessing, training, tagging, and
//! evaluation, plus the line-oriented config file.
//!
//! Exit codes: 0 success, 1 usage/config error, 2 data error, 3 divergence.

use crate::corpus::{
    fold_non_roman, normalize_word, read_conll, read_tokens, stride_split, write_conll,
    LabeledSentence, Token,
};
use crate::error::{Error, Result};
use crate::evaluation::{evaluate, report_table, EvalReport};
use crate::features::{load_word2vec_text, EmbeddingTable};
use crate::persist::{load_model, save_model};
use crate::scorer::VariantKind;
use crate::trainer::{train, Hyperparameters};
use clap::{Args, Parser, Subcommand};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

/// Parsed config file: ordered `key=value` pairs with validated keys.
#[derive(Debug, Clone, Default)]
pub struct ConfigFile {
    entries: Vec<(String, String)>,
}

const CONFIG_KEYS: [&str; 17] = [
    "variant",
    "seed",
    "lr",
    "epochs",
    "freeze_embeddings",
    "decode_mask",
    "lr_decay",
    "word_dim",
    "word_window",
    "char_dim",
    "char_window",
    "conv_units",
    "hidden_units",
    "feature_dim",
    "suffix_length",
    "capitalization",
    "suffix",
];

impl ConfigFile {
    /// Parses `key=value` lines. Blank lines and `#` comments are skipped;
    /// unknown keys are errors.
    pub fn parse(text: &str) -> Result<Self> {
        let mut entries = Vec::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| Error::Config(format!(
                "config line {}: expected key=value, got {line:?}",
                i + 1
            )))?;
            let key = key.trim();
            let value = value.trim();
            if !CONFIG_KEYS.contains(&key) {
                return Err(Error::Config(format!(
                    "config line {}: unknown key {key:?}",
                    i + 1
                )));
            }
            entries.push((key.to_string(), value.to_string()));
        }
        Ok(ConfigFile { entries })
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    fn get(&self, key: &str) -> Option<&str> {
        self.entries
            .iter()
            .rev()
            .find(|(k, _)| k == key)
            .map(|(_, v)| v.as_str())
    }
}

fn parse_value<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::Config(format!("bad value for {key}: {value:?}")))
}

/// Command-line overrides that beat config-file values.
#[derive(Debug, Clone, Default)]
pub struct TrainOverrides {
    pub variant: Option<VariantKind>,
    pub seed: Option<u64>,
    pub learning_rate: Option<f64>,
    pub epochs: Option<usize>,
    pub freeze_embeddings: bool,
    pub decode_mask: bool,
    pub lr_decay: bool,
}

/// Resolves the effective hyperparameters: command-line flag beats config
/// file beats the chosen variant's defaults.
pub fn resolve_hyperparameters(
    overrides: &TrainOverrides,
    config: Option<&ConfigFile>,
) -> Result<Hyperparameters> {
    let kind = match overrides.variant {
        Some(kind) => kind,
        None => match config.and_then(|c| c.get("variant")) {
            Some(v) => VariantKind::parse(v)
                .ok_or_else(|| Error::Config(format!("unknown variant {v:?}")))?,
            None => VariantKind::CharWnn,
        },
    };
    let mut hp = Hyperparameters::for_variant(kind);
    let mut features = hp.variant.handcrafted;

    if let Some(config) = config {
        for (key, value) in &config.entries {
            match key.as_str() {
                "variant" => {}
                "seed" => hp.seed = parse_value(key, value)?,
                "lr" => hp.learning_rate = parse_value(key, value)?,
                "epochs" => hp.max_epochs = parse_value(key, value)?,
                "freeze_embeddings" => hp.freeze_word_embeddings = parse_value(key, value)?,
                "decode_mask" => hp.decode_mask = parse_value(key, value)?,
                "lr_decay" => hp.lr_decay = parse_value(key, value)?,
                "word_dim" => hp.word_dim = parse_value(key, value)?,
                "word_window" => hp.word_window = parse_value(key, value)?,
                "char_dim" => hp.char_dim = parse_value(key, value)?,
                "char_window" => hp.char_window = parse_value(key, value)?,
                "conv_units" => hp.conv_units = parse_value(key, value)?,
                "hidden_units" => hp.hidden_units = parse_value(key, value)?,
                "feature_dim" => features.feature_dim = parse_value(key, value)?,
                "suffix_length" => features.suffix_length = parse_value(key, value)?,
                "capitalization" => features.capitalization = parse_value(key, value)?,
                "suffix" => features.suffix = parse_value(key, value)?,
                other => unreachable!("validated key {other}"),
            }
        }
    }
    if kind == VariantKind::Wnn {
        hp.variant = crate::scorer::ModelVariant::wnn(features);
    }

    if let Some(seed) = overrides.seed {
        hp.seed = seed;
    }
    if let Some(lr) = overrides.learning_rate {
        hp.learning_rate = lr;
    }
    if let Some(epochs) = overrides.epochs {
        hp.max_epochs = epochs;
    }
    if overrides.freeze_embeddings {
        hp.freeze_word_embeddings = true;
    }
    if overrides.decode_mask {
        hp.decode_mask = true;
    }
    if overrides.lr_decay {
        hp.lr_decay = true;
    }
    hp.validate()?;
    Ok(hp)
}

#[derive(Parser)]
#[command(
    name = "charwnn",
    version,
    about = "Neural sequence labeling: joint word- and character-level embeddings with Viterbi decoding"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Rewrite a corpus with normalized tokens (lowercase, digits folded)
    Preprocess(PreprocessArgs),
    /// Train a model and persist the best-dev-F1 epoch snapshot
    Train(TrainArgs),
    /// Tag a corpus with a trained model
    Tag(TagArgs),
    /// Score predictions against gold chunks
    Evaluate(EvaluateArgs),
}

#[derive(Args)]
struct PreprocessArgs {
    /// Input corpus (token TAG columns)
    #[arg(long)]
    input: PathBuf,
    /// Output path for the normalized corpus
    #[arg(long)]
    output: PathBuf,
    /// Also replace characters outside the roman alphabet
    #[arg(long)]
    fold_non_roman: bool,
    /// Substitute character used with --fold-non-roman
    #[arg(long, default_value_t = '#')]
    substitute: char,
    /// Column separator
    #[arg(long, default_value_t = ' ')]
    separator: char,
}

#[derive(Args)]
struct TrainArgs {
    /// Training corpus
    #[arg(long)]
    train: PathBuf,
    /// Development corpus for model selection
    #[arg(long)]
    dev: Option<PathBuf>,
    /// Instead of --dev, hold out every Nth training sentence (20 = 5%)
    #[arg(long, conflicts_with = "dev")]
    dev_stride: Option<usize>,
    /// Pre-trained word embeddings in word2vec text format
    #[arg(long)]
    embeddings: Option<PathBuf>,
    /// Where to write the trained model
    #[arg(long)]
    model: PathBuf,
    /// Also write the training report as key=value lines
    #[arg(long)]
    report: Option<PathBuf>,
    /// Model variant: charwnn, wnn, or charnn
    #[arg(long)]
    variant: Option<String>,
    /// Seed for initialization and epoch shuffling
    #[arg(long)]
    seed: Option<u64>,
    /// Learning rate
    #[arg(long)]
    lr: Option<f64>,
    /// Number of training epochs
    #[arg(long)]
    epochs: Option<usize>,
    /// Keep pre-trained word embeddings fixed during training
    #[arg(long)]
    freeze_embeddings: bool,
    /// Decode with the IOB2 consistency mask
    #[arg(long)]
    decode_mask: bool,
    /// Decay the learning rate per epoch
    #[arg(long)]
    lr_decay: bool,
    /// key=value config file (flags given here still win)
    #[arg(long)]
    config: Option<PathBuf>,
    /// Column separator
    #[arg(long, default_value_t = ' ')]
    separator: char,
}

#[derive(Args)]
struct TagArgs {
    /// Trained model file
    #[arg(long)]
    model: PathBuf,
    /// Corpus to tag: token-only lines, or token+tag to carry gold through
    #[arg(long, visible_alias = "input")]
    test: PathBuf,
    /// Output path (stdout when omitted)
    #[arg(long)]
    output: Option<PathBuf>,
    /// Decode with the IOB2 consistency mask
    #[arg(long)]
    decode_mask: bool,
    /// Column separator
    #[arg(long, default_value_t = ' ')]
    separator: char,
}

#[derive(Args)]
struct EvaluateArgs {
    /// Gold corpus (token TAG)
    #[arg(long, requires = "pred")]
    gold: Option<PathBuf>,
    /// Predictions (token TAG), aligned with --gold
    #[arg(long, requires = "gold")]
    pred: Option<PathBuf>,
    /// Single file in `token gold predicted` column format
    #[arg(long, conflicts_with_all = ["gold", "pred"])]
    merged: Option<PathBuf>,
    /// Column separator
    #[arg(long, default_value_t = ' ')]
    separator: char,
}

/// Entry point: parses arguments, dispatches, maps errors to exit codes.
pub fn run() -> i32 {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let result = match cli.command {
        Command::Preprocess(args) => cmd_preprocess(&args),
        Command::Train(args) => cmd_train(&args),
        Command::Tag(args) => cmd_tag(&args),
        Command::Evaluate(args) => cmd_evaluate(&args),
    };
    match result {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn open(path: &Path) -> Result<BufReader<File>> {
    File::open(path)
        .map(BufReader::new)
        .map_err(|e| Error::Data(format!("cannot open {}: {e}", path.display())))
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| Error::Data(format!("cannot create {}: {e}", path.display())))
}

fn cmd_preprocess(args: &PreprocessArgs) -> Result<()> {
    let sentences = read_conll(open(&args.input)?, args.separator)?;
    let normalized: Vec<LabeledSentence> = sentences
        .iter()
        .map(|s| {
            let tokens = s
                .tokens()
                .iter()
                .map(|t| {
                    let surface = if args.fold_non_roman {
                        fold_non_roman(t.surface(), args.substitute)
                    } else {
                        t.surface().to_string()
                    };
                    Token::new(normalize_word(&surface))
                })
                .collect::<Result<Vec<_>>>()?;
            LabeledSentence::new(tokens, s.tags().to_vec())
        })
        .collect::<Result<_>>()?;
    let mut out = create(&args.output)?;
    write_conll(&normalized, &mut out, args.separator)?;
    out.flush()?;
    Ok(())
}

fn cmd_train(args: &TrainArgs) -> Result<()> {
    let overrides = TrainOverrides {
        variant: match &args.variant {
            Some(v) => Some(
                VariantKind::parse(v)
                    .ok_or_else(|| Error::Config(format!("unknown variant {v:?}")))?,
            ),
            None => None,
        },
        seed: args.seed,
        learning_rate: args.lr,
        epochs: args.epochs,
        freeze_embeddings: args.freeze_embeddings,
        decode_mask: args.decode_mask,
        lr_decay: args.lr_decay,
    };
    let config = match &args.config {
        Some(path) => Some(ConfigFile::load(path)?),
        None => None,
    };
    let hp = resolve_hyperparameters(&overrides, config.as_ref())?;

    let train_corpus = read_conll(open(&args.train)?, args.separator)?;
    let (train_corpus, dev_corpus) = match (&args.dev, args.dev_stride) {
        (Some(dev), None) => (train_corpus, read_conll(open(dev)?, args.separator)?),
        (None, Some(stride)) => {
            if stride < 2 {
                return Err(Error::Config("--dev-stride must be at least 2".into()));
            }
            stride_split(train_corpus, stride)
        }
        (None, None) => {
            return Err(Error::Config(
                "training needs --dev FILE or --dev-stride N".into(),
            ));
        }
        (Some(_), Some(_)) => unreachable!("clap conflicts_with"),
    };

    let pretrained: Option<EmbeddingTable<f64>> = match &args.embeddings {
        Some(path) => {
            // Reserved-column draws come from a seed derived from the run
            // seed, keeping the training stream untouched.
            let mut rng = ChaCha8Rng::seed_from_u64(hp.seed.wrapping_add(1));
            Some(load_word2vec_text(open(path)?, &mut rng)?)
        }
        None => None,
    };

    let (model, report) = train(&train_corpus, &dev_corpus, &hp, pretrained.as_ref())?;
    print!("{}", report.to_text());
    let mut out = create(&args.model)?;
    save_model(&model, &mut out)?;
    out.flush()?;
    if let Some(path) = &args.report {
        let mut out = create(path)?;
        out.write_all(report.to_kv().as_bytes())?;
        out.flush()?;
    }
    Ok(())
}

fn cmd_tag(args: &TagArgs) -> Result<()> {
    let model = load_model::<f64>(open(&args.model)?)?;
    let sentences = read_tokens(open(&args.test)?, args.separator)?;
    let mask = (args.decode_mask || model.hp.decode_mask).then(|| model.iob2_mask());

    let mut out: Box<dyn Write> = match &args.output {
        Some(path) => Box::new(create(path)?),
        None => Box::new(std::io::stdout().lock()),
    };
    let sep = args.separator;
    for (tokens, gold) in &sentences {
        let predicted = model.tag_sentence(tokens, mask.as_ref())?;
        for (i, token) in tokens.iter().enumerate() {
            match gold {
                Some(gold_tags) => writeln!(
                    out,
                    "{}{sep}{}{sep}{}",
                    token.surface(),
                    gold_tags[i],
                    predicted[i]
                )?,
                None => writeln!(out, "{}{sep}{}", token.surface(), predicted[i])?,
            }
        }
        writeln!(out)?;
    }
    out.flush()?;
    Ok(())
}

/// Reads the `token gold predicted` convention: at least three columns,
/// gold second-to-last, prediction last.
fn read_merged(
    reader: impl std::io::BufRead,
    separator: char,
) -> Result<(Vec<LabeledSentence>, Vec<Vec<String>>)> {
    let mut gold_sentences = Vec::new();
    let mut predictions = Vec::new();
    let mut tokens: Vec<Token> = Vec::new();
    let mut gold: Vec<String> = Vec::new();
    let mut pred: Vec<String> = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line_no = i + 1;
        let line = line?;
        let line = line.trim_end_matches(['\r', '\n']);
        if line.trim().is_empty() {
            if !tokens.is_empty() {
                gold_sentences.push(LabeledSentence::new(
                    std::mem::take(&mut tokens),
                    std::mem::take(&mut gold),
                )?);
                predictions.push(std::mem::take(&mut pred));
            }
            continue;
        }
        let fields: Vec<&str> = line.split(separator).filter(|f| !f.is_empty()).collect();
        if fields.len() < 3 {
            return Err(Error::Parse {
                line: line_no,
                message: format!("expected `token gold predicted`, got {} columns", fields.len()),
            });
        }
        tokens.push(Token::new(fields[0]).map_err(|e| Error::Parse {
            line: line_no,
            message: e.to_string(),
        })?);
        gold.push(fields[fields.len() - 2].to_string());
        pred.push(fields[fields.len() - 1].to_string());
    }
    if !tokens.is_empty() {
        gold_sentences.push(LabeledSentence::new(tokens, gold)?);
        predictions.push(pred);
    }
    Ok((gold_sentences, predictions))
}

fn render_evaluation(report: &EvalReport) -> String {
    let mut out = String::new();
    out.push_str(&format!(
        "tokens={} accuracy={:.2}\n",
        report.token_total,
        report.token_accuracy()
    ));
    out.push_str(&format!(
        "overall precision={:.2} recall={:.2} f1={:.2} gold={} predicted={} correct={}\n",
        report.overall.precision(),
        report.overall.recall(),
        report.overall.f1(),
        report.overall.gold,
        report.overall.predicted,
        report.overall.correct
    ));
    out.push_str(&report_table(&[("charwnn", report)], true));
    out
}

fn cmd_evaluate(args: &EvaluateArgs) -> Result<()> {
    let report = match (&args.gold, &args.pred, &args.merged) {
        (Some(gold), Some(pred), None) => {
            let gold_sentences = read_conll(open(gold)?, args.separator)?;
            let pred_sentences = read_conll(open(pred)?, args.separator)?;
            let predictions: Vec<Vec<String>> = pred_sentences
                .iter()
                .map(|s| s.tags().to_vec())
                .collect();
            evaluate(&gold_sentences, &predictions)?
        }
        (None, None, Some(merged)) => {
            let (gold_sentences, predictions) = read_merged(open(merged)?, args.separator)?;
            evaluate(&gold_sentences, &predictions)?
        }
        _ => {
            return Err(Error::Config(
                "evaluate needs --gold FILE --pred FILE, or --merged FILE".into(),
            ));
        }
    };
    print!("{}", render_evaluation(&report));
    Ok(())
}
