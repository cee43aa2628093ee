mod range;

use std::fmt::Write as _;
use std::fs;
use std::io::{self, Read, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use fofe::corpus::{parse_token_table, tokenize, TokenizedCorpus, Vocabulary};
use fofe::encoding::{decode, encode, DEFAULT_DECODE_TOL};
use fofe::nnlm::{
    load_model, perplexity, save_model, train, InputMode, ModelConfig, ModelParams, PerplexityReport, TrainConfig,
};
use fofe::toy::{generate, ToyConfig};
use fofe::uniqueness::{
    collision_reports_tsv, enumerate_collisions, find_critical_alphas, scan_corpus_collisions, LengthMode,
};
use fofe::{ForgettingFactor, TokenSequence};

#[derive(Debug, Clone)]
struct Alphas(Vec<ForgettingFactor>);

#[derive(Debug, Clone)]
struct Values(Vec<f64>);

#[derive(Debug, Clone)]
struct Dims(Vec<usize>);

fn alphas(s: &str) -> Result<Alphas, String> {
    range::parse_alphas(s).map(Alphas)
}

fn epsilons(s: &str) -> Result<Values, String> {
    range::parse_epsilons(s).map(Values)
}

fn dims(s: &str) -> Result<Dims, String> {
    range::parse_dims(s).map(Dims)
}

/// Fixed-size ordinally-forgetting encoding: codes, uniqueness analysis and
/// FOFE language models.
///
/// Reports are tab-separated with a header row. FOFE_THREADS caps the worker
/// threads (0 or unset = one per core).
#[derive(Debug, Parser)]
#[command(name = "fofe", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Print the FOFE code of a token sequence as one TSV row.
    Encode {
        #[arg(long, value_parser = range::parse_alpha)]
        alpha: ForgettingFactor,
        /// Symbol table: `id  token  [frequency]` per line.
        #[arg(long)]
        vocab: PathBuf,
        /// Space-separated tokens; read from stdin when absent.
        text: Option<String>,
    },
    /// Recover the token sequence from a code.
    Decode {
        #[arg(long, value_parser = range::parse_alpha)]
        alpha: ForgettingFactor,
        #[arg(long)]
        vocab: PathBuf,
        /// Longest sequence to consider.
        #[arg(long, default_value_t = 100)]
        max_len: usize,
        #[arg(long, default_value_t = DEFAULT_DECODE_TOL)]
        tol: f64,
        /// Tab- or space-separated code entries; read from stdin when absent.
        code: Option<String>,
    },
    /// Count colliding codes over every sequence of a given length.
    Collide {
        #[arg(long)]
        k: usize,
        #[arg(long)]
        t: usize,
        /// `start:stop:step` or comma list.
        #[arg(long, value_parser = alphas)]
        alphas: Alphas,
        #[arg(long, value_parser = epsilons)]
        eps: Values,
        /// `exact` (length T only) or `up-to` (lengths 1..T).
        #[arg(long, default_value = "exact")]
        lengths: LengthMode,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// List forgetting factors in (0.5, 1) where codes of order T can collide.
    CriticalAlphas {
        #[arg(long)]
        t: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Count colliding prefix codes in a text corpus.
    Scan {
        /// One sentence per line.
        #[arg(long)]
        corpus: PathBuf,
        /// Vocabulary TSV; built from the corpus when absent.
        #[arg(long)]
        vocab: Option<PathBuf>,
        #[arg(long, default_value_t = 2000)]
        vocab_cap: usize,
        #[arg(long = "alpha", alias = "alphas", value_parser = alphas)]
        alphas: Alphas,
        #[arg(long, value_parser = epsilons)]
        eps: Values,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Build a frequency-capped vocabulary from a corpus.
    Vocab {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long, default_value_t = 10_000)]
        cap: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Write a synthetic corpus (train.txt, valid.txt, test.txt).
    GenToy {
        #[arg(long)]
        out_dir: PathBuf,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        #[arg(long, default_value_t = 100_000)]
        train_tokens: usize,
        #[arg(long, default_value_t = 10_000)]
        valid_tokens: usize,
        #[arg(long, default_value_t = 10_000)]
        test_tokens: usize,
        #[arg(long, default_value_t = 1998)]
        word_types: usize,
    },
    /// Train a language model and save it with its training log.
    Train {
        #[command(flatten)]
        model: ModelArgs,
        #[command(flatten)]
        data: DataArgs,
        #[arg(long)]
        model_out: PathBuf,
        /// Training log TSV.
        #[arg(long)]
        log_out: Option<PathBuf>,
        /// Where to write the vocabulary built from the training split.
        #[arg(long)]
        vocab_out: Option<PathBuf>,
    },
    /// Report perplexity of a saved model on a corpus.
    Eval {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        vocab: PathBuf,
        #[arg(long)]
        corpus: PathBuf,
        /// Dataset name in the report.
        #[arg(long)]
        name: Option<String>,
    },
    /// Train one FOFE model per forgetting factor and report perplexities.
    SweepAlpha {
        #[arg(long, value_parser = alphas)]
        alphas: Alphas,
        /// fofe1 or fofe2.
        #[arg(long, default_value = "fofe1")]
        mode: InputMode,
        #[command(flatten)]
        net: NetArgs,
        #[command(flatten)]
        data: DataArgs,
        #[arg(long)]
        test: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Debug, Args)]
struct ModelArgs {
    /// fofe1, fofe2, bigram, trigram or ngramN.
    #[arg(long)]
    mode: InputMode,
    /// Required by the FOFE modes.
    #[arg(long, value_parser = range::parse_alpha)]
    alpha: Option<ForgettingFactor>,
    #[command(flatten)]
    net: NetArgs,
}

#[derive(Debug, Args)]
struct NetArgs {
    #[arg(long, default_value_t = 32)]
    embed: usize,
    /// Hidden layer widths, comma-separated.
    #[arg(long, default_value = "64,64", value_parser = dims)]
    hidden: Dims,
    #[arg(long, default_value_t = 0.4)]
    lr: f64,
    /// Mini-batch capacity in words.
    #[arg(long, default_value_t = 200)]
    batch: usize,
    #[arg(long, default_value_t = 100)]
    max_epochs: usize,
    #[arg(long, default_value_t = 6)]
    halving_epochs: usize,
    /// Validation perplexity gain needed to keep the learning rate.
    #[arg(long, default_value_t = 1.0)]
    min_gain: f64,
    #[arg(long, default_value_t = 42)]
    seed: u64,
}

#[derive(Debug, Args)]
struct DataArgs {
    #[arg(long)]
    train: PathBuf,
    #[arg(long)]
    valid: PathBuf,
    /// Vocabulary TSV; built from the training split when absent.
    #[arg(long)]
    vocab: Option<PathBuf>,
    #[arg(long, default_value_t = 2000)]
    vocab_cap: usize,
}

impl NetArgs {
    fn train_config(&self) -> TrainConfig {
        TrainConfig {
            initial_lr: self.lr,
            batch_capacity_words: self.batch,
            seed: self.seed,
            min_valid_ppl_gain: self.min_gain,
            final_halving_epochs: self.halving_epochs,
            max_epochs: self.max_epochs,
        }
    }
}

fn require_file(path: &Path) -> Result<()> {
    if !path.is_file() {
        bail!("input file {} does not exist", path.display());
    }
    Ok(())
}

fn require_parent(path: &Path) -> Result<()> {
    match path.parent() {
        Some(dir) if !dir.as_os_str().is_empty() && !dir.is_dir() => {
            bail!("output directory {} does not exist", dir.display())
        }
        _ => Ok(()),
    }
}

fn read_lines(path: &Path) -> Result<Vec<String>> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(text.lines().map(str::to_string).collect())
}

fn emit(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(path) => fs::write(path, text).with_context(|| format!("writing {}", path.display())),
        None => io::stdout().write_all(text.as_bytes()).context("writing stdout"),
    }
}

fn positional_or_stdin(arg: Option<String>) -> Result<String> {
    match arg {
        Some(s) => Ok(s),
        None => {
            let mut s = String::new();
            io::stdin().read_to_string(&mut s).context("reading stdin")?;
            Ok(s)
        }
    }
}

fn symbol_table(path: &Path) -> Result<Vec<String>> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(parse_token_table(&text)?.0)
}

fn load_vocab(path: &Path) -> Result<Vocabulary> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(Vocabulary::from_tsv(&text)?)
}

fn cmd_encode(alpha: ForgettingFactor, vocab: &Path, text: Option<String>) -> Result<()> {
    require_file(vocab)?;
    let symbols = symbol_table(vocab)?;
    let text = positional_or_stdin(text)?;
    let ids = text
        .split_whitespace()
        .map(|w| {
            symbols
                .iter()
                .position(|s| s == w)
                .ok_or_else(|| anyhow!("token '{w}' is not in {}", vocab.display()))
        })
        .collect::<Result<Vec<_>>>()?;
    let code = encode(&TokenSequence::new(ids, symbols.len())?, alpha);
    let row: Vec<String> = code.entries().iter().map(f64::to_string).collect();
    println!("{}", row.join("\t"));
    Ok(())
}

fn cmd_decode(alpha: ForgettingFactor, vocab: &Path, max_len: usize, tol: f64, code: Option<String>) -> Result<()> {
    require_file(vocab)?;
    let symbols = symbol_table(vocab)?;
    let text = positional_or_stdin(code)?;
    let entries = text
        .split_whitespace()
        .map(|v| v.parse::<f64>().map_err(|_| anyhow!("malformed: '{v}' is not a number")))
        .collect::<Result<Vec<_>>>()?;
    if entries.len() != symbols.len() {
        bail!("malformed: code has {} entries, vocabulary has {}", entries.len(), symbols.len());
    }
    let seq = decode(&entries, alpha, max_len, tol)?;
    let words: Vec<&str> = seq.ids().iter().map(|&i| symbols[i].as_str()).collect();
    println!("{}", words.join(" "));
    Ok(())
}

fn cmd_collide(k: usize, t: usize, alphas: &[ForgettingFactor], eps: &[f64], mode: LengthMode, out: Option<&Path>) -> Result<()> {
    if let Some(p) = out {
        require_parent(p)?;
    }
    let mut reports = Vec::new();
    for &alpha in alphas {
        for &e in eps {
            reports.push(enumerate_collisions(k, t, alpha, e, mode)?);
        }
    }
    emit(out, &collision_reports_tsv(&reports))
}

fn corpus_vocab(lines: &[String], vocab: Option<&Path>, cap: usize) -> Result<Vocabulary> {
    match vocab {
        Some(path) => load_vocab(path),
        None => Ok(Vocabulary::build(lines, cap)?),
    }
}

fn cmd_scan(corpus: &Path, vocab: Option<&Path>, cap: usize, alphas: &[ForgettingFactor], eps: &[f64], out: Option<&Path>) -> Result<()> {
    require_file(corpus)?;
    if let Some(v) = vocab {
        require_file(v)?;
    }
    if let Some(p) = out {
        require_parent(p)?;
    }
    let lines = read_lines(corpus)?;
    let vocab = corpus_vocab(&lines, vocab, cap)?;
    let tokens = tokenize(&lines, &vocab);
    let mut reports = Vec::new();
    for &alpha in alphas {
        for &e in eps {
            reports.push(scan_corpus_collisions(&tokens, alpha, e)?);
        }
    }
    emit(out, &collision_reports_tsv(&reports))
}

fn cmd_gen_toy(out_dir: &Path, cfg: ToyConfig) -> Result<()> {
    if !out_dir.is_dir() {
        fs::create_dir_all(out_dir).with_context(|| format!("creating {}", out_dir.display()))?;
    }
    let toy = generate(&cfg);
    for (name, lines) in [("train", &toy.train), ("valid", &toy.valid), ("test", &toy.test)] {
        let mut text = lines.join("\n");
        text.push('\n');
        let path = out_dir.join(format!("{name}.txt"));
        fs::write(&path, text).with_context(|| format!("writing {}", path.display()))?;
    }
    Ok(())
}

struct Splits {
    vocab: Vocabulary,
    train: TokenizedCorpus,
    valid: TokenizedCorpus,
}

fn check_data(data: &DataArgs) -> Result<()> {
    require_file(&data.train)?;
    require_file(&data.valid)?;
    if let Some(v) = &data.vocab {
        require_file(v)?;
    }
    Ok(())
}

fn load_splits(data: &DataArgs) -> Result<Splits> {
    let train_lines = read_lines(&data.train)?;
    let vocab = corpus_vocab(&train_lines, data.vocab.as_deref(), data.vocab_cap)?;
    let train = tokenize(&train_lines, &vocab);
    let valid = tokenize(&read_lines(&data.valid)?, &vocab);
    Ok(Splits { vocab, train, valid })
}

fn train_model(
    mode: InputMode,
    alpha: Option<ForgettingFactor>,
    net: &NetArgs,
    splits: &Splits,
) -> Result<(ModelParams<f32>, ModelConfig, fofe::nnlm::TrainLog)> {
    let config = ModelConfig::new(mode, splits.vocab.len(), net.embed, net.hidden.0.clone(), alpha)?;
    let (params, log) = train::<f32>(&config, &net.train_config(), &splits.train, &splits.valid)?;
    Ok((params, config, log))
}

fn cmd_train(
    model: &ModelArgs,
    data: &DataArgs,
    model_out: &Path,
    log_out: Option<&Path>,
    vocab_out: Option<&Path>,
) -> Result<()> {
    check_data(data)?;
    for p in [Some(model_out), log_out, vocab_out].into_iter().flatten() {
        require_parent(p)?;
    }
    if model.mode.is_fofe() && model.alpha.is_none() {
        bail!("--mode {} needs --alpha", model.mode);
    }
    let splits = load_splits(data)?;
    let (params, config, log) = train_model(model.mode, model.alpha, &model.net, &splits)?;
    save_model(model_out, &params, &config)?;
    if let Some(p) = log_out {
        fs::write(p, log.to_tsv()).with_context(|| format!("writing {}", p.display()))?;
    }
    if let Some(p) = vocab_out {
        fs::write(p, splits.vocab.to_tsv()).with_context(|| format!("writing {}", p.display()))?;
    }
    eprintln!(
        "trained {} for {} epochs, valid ppl {:.2}",
        config.input_mode,
        log.epochs.len(),
        log.final_valid_ppl().unwrap_or(f64::NAN)
    );
    Ok(())
}

fn report_row(r: &PerplexityReport) -> String {
    format!("{}\t{}\t{:.4}\t{:.2}", r.name, r.tokens, r.nll, r.ppl)
}

fn cmd_eval(model: &Path, vocab: &Path, corpus: &Path, name: Option<String>) -> Result<()> {
    for p in [model, vocab, corpus] {
        require_file(p)?;
    }
    let (params, config) = load_model(model)?;
    let vocab = load_vocab(vocab)?;
    if vocab.len() != config.vocab_size {
        bail!("vocab-mismatch: model has {} tokens, vocabulary file has {}", config.vocab_size, vocab.len());
    }
    let tokens = tokenize(&read_lines(corpus)?, &vocab);
    let name = name.unwrap_or_else(|| corpus.file_stem().map_or("corpus".into(), |s| s.to_string_lossy().into_owned()));
    let report = perplexity(&params, &config, &tokens, &name)?;
    println!("{}\n{}", PerplexityReport::TSV_HEADER, report_row(&report));
    Ok(())
}

fn cmd_sweep_alpha(
    alphas: &[ForgettingFactor],
    mode: InputMode,
    net: &NetArgs,
    data: &DataArgs,
    test: &Path,
    out: Option<&Path>,
) -> Result<()> {
    if !mode.is_fofe() {
        bail!("sweep-alpha needs a FOFE mode, got {mode}");
    }
    check_data(data)?;
    require_file(test)?;
    if let Some(p) = out {
        require_parent(p)?;
    }
    let splits = load_splits(data)?;
    let test_split = tokenize(&read_lines(test)?, &splits.vocab);
    let mut tsv = String::from("alpha\tvalid_ppl\ttest_ppl\n");
    for &alpha in alphas {
        let (params, config, log) = train_model(mode, Some(alpha), net, &splits)?;
        let test_ppl = perplexity(&params, &config, &test_split, "test")?.ppl;
        let valid_ppl = log.final_valid_ppl().unwrap_or(f64::NAN);
        eprintln!("alpha {alpha}: valid {valid_ppl:.2} test {test_ppl:.2}");
        writeln!(tsv, "{alpha}\t{valid_ppl}\t{test_ppl}").unwrap();
    }
    emit(out, &tsv)
}

fn configure_threads() -> Result<()> {
    let threads = match std::env::var("FOFE_THREADS") {
        Ok(v) => v
            .trim()
            .parse::<usize>()
            .map_err(|_| anyhow!("FOFE_THREADS must be a non-negative integer, got '{v}'"))?,
        Err(_) => 0,
    };
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .context("configuring worker threads")
}

fn run(cli: Cli) -> Result<()> {
    configure_threads()?;
    match cli.command {
        Command::Encode { alpha, vocab, text } => cmd_encode(alpha, &vocab, text),
        Command::Decode { alpha, vocab, max_len, tol, code } => cmd_decode(alpha, &vocab, max_len, tol, code),
        Command::Collide { k, t, alphas, eps, lengths, out } => {
            cmd_collide(k, t, &alphas.0, &eps.0, lengths, out.as_deref())
        }
        Command::CriticalAlphas { t, out } => {
            if let Some(p) = &out {
                require_parent(p)?;
            }
            emit(out.as_deref(), &find_critical_alphas(t)?.to_tsv())
        }
        Command::Scan { corpus, vocab, vocab_cap, alphas, eps, out } => {
            cmd_scan(&corpus, vocab.as_deref(), vocab_cap, &alphas.0, &eps.0, out.as_deref())
        }
        Command::Vocab { corpus, cap, out } => {
            require_file(&corpus)?;
            if let Some(p) = &out {
                require_parent(p)?;
            }
            let vocab = Vocabulary::build(&read_lines(&corpus)?, cap)?;
            emit(out.as_deref(), &vocab.to_tsv())
        }
        Command::GenToy { out_dir, seed, train_tokens, valid_tokens, test_tokens, word_types } => cmd_gen_toy(
            &out_dir,
            ToyConfig {
                seed,
                train_tokens,
                valid_tokens,
                test_tokens,
                word_types,
                ..Default::default()
            },
        ),
        Command::Train { model, data, model_out, log_out, vocab_out } => {
            cmd_train(&model, &data, &model_out, log_out.as_deref(), vocab_out.as_deref())
        }
        Command::Eval { model, vocab, corpus, name } => cmd_eval(&model, &vocab, &corpus, name),
        Command::SweepAlpha { alphas, mode, net, data, test, out } => {
            cmd_sweep_alpha(&alphas.0, mode, &net, &data, &test, out.as_deref())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
