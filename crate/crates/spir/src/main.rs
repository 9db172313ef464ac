use clap::{Parser, Subcommand, ValueEnum};
use spir::centrality::{self, ColumnSet, Metric, Strategy, SupportSetConfig};
use spir::corpus::{self, CorpusConfig};
use spir::eval::{self, SummarySize, SweepConfig};
use spir::protocol::{self, PrivateMapping};
use spir::sbe::{self, SbeParams};
use spir::text;
use std::path::PathBuf;
use std::process::ExitCode;

/// All randomness flows from --seed; the default is a fixed constant, not
/// the clock, so default runs reproduce byte-identically.
const DEFAULT_SEED: u64 = 42;

#[derive(Parser)]
#[command(name = "spir", version, about = "Privacy-preserving important passage retrieval")]
struct Cli {
    /// Master seed for every random draw.
    #[arg(long, global = true, default_value_t = DEFAULT_SEED)]
    seed: u64,
    /// Corpus config file (key=value); SPIR_CONFIG is used when absent.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Print extra progress information to stderr.
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum MetricArg {
    Cosine,
    Euclidean,
    Hamming,
}

impl From<MetricArg> for Metric {
    fn from(m: MetricArg) -> Self {
        match m {
            MetricArg::Cosine => Metric::Cosine,
            MetricArg::Euclidean => Metric::Euclidean,
            MetricArg::Hamming => Metric::Hamming,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum StrategyArg {
    MeanThreshold,
    KNearest,
}

#[derive(Clone, Copy, ValueEnum)]
enum FormatArg {
    Text,
    Csv,
}

#[derive(Subcommand)]
enum Command {
    /// Generate SBE parameters and write them as an SBEP file.
    Genparams {
        #[arg(long)]
        dim: usize,
        #[arg(long)]
        bits: usize,
        #[arg(long, default_value_t = 1.0)]
        delta: f64,
        #[arg(long, default_value_t = 1.0)]
        sigma: f64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Rank the important passages of one document.
    Retrieve {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        doc: String,
        #[arg(long, default_value_t = 3)]
        n: usize,
        #[arg(long, value_enum, default_value_t = MetricArg::Cosine)]
        metric: MetricArg,
        #[arg(long)]
        kp_count: Option<usize>,
        /// SBEP parameter file; required for the hamming metric.
        #[arg(long)]
        params: Option<PathBuf>,
        /// Bucket terms into the params dimension instead of requiring an
        /// exact vocabulary match.
        #[arg(long, default_value_t = false)]
        feature_hash: bool,
        #[arg(long, value_enum, default_value_t = StrategyArg::MeanThreshold)]
        strategy: StrategyArg,
        #[arg(long, default_value_t = 1)]
        k: usize,
        #[arg(long, value_enum, default_value_t = FormatArg::Text)]
        format: FormatArg,
    },
    /// Run the untrusted retrieval server.
    Serve {
        #[arg(long, default_value = "127.0.0.1")]
        addr: String,
        #[arg(long)]
        port: u16,
    },
    /// Hash a document, send it to a server, resolve the reply locally.
    Client {
        #[arg(long)]
        addr: String,
        #[arg(long)]
        port: u16,
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        doc: String,
        #[arg(long, default_value_t = 3)]
        n: usize,
        #[arg(long)]
        params: PathBuf,
        #[arg(long)]
        kp_count: Option<usize>,
        #[arg(long, default_value_t = false)]
        feature_hash: bool,
        #[arg(long, value_enum, default_value_t = StrategyArg::MeanThreshold)]
        strategy: StrategyArg,
        #[arg(long, default_value_t = 1)]
        k: usize,
    },
    /// Plaintext ROUGE-1 baseline over a corpus with references.
    Eval {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long, value_enum, default_value_t = MetricArg::Cosine)]
        metric: MetricArg,
        #[arg(long, conflicts_with = "ratio")]
        n: Option<usize>,
        #[arg(long)]
        ratio: Option<f64>,
        #[arg(long)]
        kp_count: Option<usize>,
    },
    /// Leakage x bits-per-coefficient sweep; emits CSV.
    Sweep {
        #[arg(long)]
        corpus: PathBuf,
        /// Comma-separated leakage targets in (0, 1].
        #[arg(long, value_delimiter = ',', default_values_t = vec![0.05, 0.25, 0.50, 0.75, 0.95])]
        leakages: Vec<f64>,
        /// Comma-separated bits-per-coefficient ratios.
        #[arg(long, value_delimiter = ',', default_values_t = vec![4.0, 8.0, 16.0])]
        bpcs: Vec<f64>,
        #[arg(long, default_value_t = 1)]
        trials: usize,
        #[arg(long, conflicts_with = "ratio")]
        n: Option<usize>,
        #[arg(long)]
        ratio: Option<f64>,
        #[arg(long, default_value_t = 0.05)]
        gamma: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Sample (euclidean, hamming) distance pairs for plotting.
    Characterize {
        #[arg(long)]
        dim: usize,
        #[arg(long)]
        bits: usize,
        #[arg(long, default_value_t = 1000)]
        pairs: usize,
        #[arg(long, default_value_t = 1.0)]
        delta: f64,
        #[arg(long, default_value_t = 1.0)]
        sigma: f64,
        #[arg(long, default_value_t = 3.0)]
        max_distance: f64,
        /// Also emit one duplicate pair (d_E = 0).
        #[arg(long, default_value_t = false)]
        inject_duplicate: bool,
    },
}

#[derive(Debug)]
enum CliError {
    Usage(String),
    Io(String),
    Internal(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Io(_) => 2,
            CliError::Internal(_) => 3,
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Usage(m) | CliError::Io(m) | CliError::Internal(m) => m,
        }
    }
}

impl From<sbe::SbeError> for CliError {
    fn from(e: sbe::SbeError) -> Self {
        match e {
            sbe::SbeError::Io(_) | sbe::SbeError::BadMagic | sbe::SbeError::BadVersion(_) => {
                CliError::Io(e.to_string())
            }
            sbe::SbeError::InvalidDimension
            | sbe::SbeError::InvalidParameter(_)
            | sbe::SbeError::EmptyInput
            | sbe::SbeError::UnreachableTarget => CliError::Usage(e.to_string()),
            _ => CliError::Internal(e.to_string()),
        }
    }
}

impl From<corpus::CorpusError> for CliError {
    fn from(e: corpus::CorpusError) -> Self {
        match e {
            corpus::CorpusError::Io(_) | corpus::CorpusError::NoDocuments(_) => {
                CliError::Io(e.to_string())
            }
            _ => CliError::Usage(e.to_string()),
        }
    }
}

impl From<text::TextError> for CliError {
    fn from(e: text::TextError) -> Self {
        CliError::Usage(e.to_string())
    }
}

impl From<centrality::CentralityError> for CliError {
    fn from(e: centrality::CentralityError) -> Self {
        CliError::Internal(e.to_string())
    }
}

impl From<protocol::ProtocolError> for CliError {
    fn from(e: protocol::ProtocolError) -> Self {
        match e {
            protocol::ProtocolError::Io(_)
            | protocol::ProtocolError::Remote { .. }
            | protocol::ProtocolError::MalformedFrame(_)
            | protocol::ProtocolError::VersionMismatch(_)
            | protocol::ProtocolError::FrameTooLarge(_) => CliError::Io(e.to_string()),
            protocol::ProtocolError::DimensionMismatch { .. } => CliError::Usage(e.to_string()),
            _ => CliError::Internal(e.to_string()),
        }
    }
}

impl From<eval::EvalError> for CliError {
    fn from(e: eval::EvalError) -> Self {
        match e {
            eval::EvalError::MissingReference(_) | eval::EvalError::NoTrials => {
                CliError::Usage(e.to_string())
            }
            eval::EvalError::Corpus(c) => c.into(),
            eval::EvalError::Protocol(p) => p.into(),
            _ => CliError::Internal(e.to_string()),
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(1),
            };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message());
            ExitCode::from(e.exit_code())
        }
    }
}

fn load_config(cli_config: &Option<PathBuf>) -> Result<CorpusConfig, CliError> {
    if let Some(path) = cli_config {
        return Ok(CorpusConfig::load(path)?);
    }
    if let Ok(path) = std::env::var("SPIR_CONFIG") {
        return Ok(CorpusConfig::load(path)?);
    }
    Ok(CorpusConfig::default())
}

fn support_config(strategy: StrategyArg, k: usize) -> Result<SupportSetConfig, CliError> {
    let strategy = match strategy {
        StrategyArg::MeanThreshold => Strategy::MeanThreshold,
        StrategyArg::KNearest => Strategy::KNearest,
    };
    if strategy == Strategy::KNearest && k == 0 {
        return Err(CliError::Usage("--k must be at least 1 for k-nearest".into()));
    }
    Ok(SupportSetConfig { strategy, k: k.max(1), include_keyphrases_as_members: true })
}

fn size_rule(n: Option<usize>, ratio: Option<f64>, default_n: usize) -> Result<SummarySize, CliError> {
    match (n, ratio) {
        (Some(n), None) => {
            if n == 0 {
                return Err(CliError::Usage("--n must be at least 1".into()));
            }
            Ok(SummarySize::Fixed(n))
        }
        (None, Some(r)) => {
            if !(r > 0.0 && r <= 1.0) {
                return Err(CliError::Usage("--ratio must be in (0, 1]".into()));
            }
            Ok(SummarySize::Ratio(r))
        }
        (None, None) => Ok(SummarySize::Fixed(default_n)),
        (Some(_), Some(_)) => Err(CliError::Usage("--n and --ratio are mutually exclusive".into())),
    }
}

/// Builds passages, key phrases and the compact matrix for one corpus doc.
fn prepare_doc(
    corpus_dir: &PathBuf,
    doc_id: &str,
    config: &CorpusConfig,
    kp_count: Option<usize>,
) -> Result<(Vec<text::Passage>, text::CompactMatrix), CliError> {
    let mut config = config.clone();
    if let Some(c) = kp_count {
        config.kp_count = c;
    }
    let corpus = corpus::load_corpus(corpus_dir)?;
    let doc = corpus.doc(doc_id)?;
    let passages = doc.passages(&config)?;
    let stopwords = config.stopwords()?;
    let key_phrases = doc.key_phrases(&passages, &config, &stopwords);
    let matrix =
        text::build_compact_matrix(&passages, &key_phrases, config.weighting, config.normalize)
            .map_err(|e| CliError::Usage(e.to_string()))?;
    Ok((passages, matrix))
}

fn print_ranked(
    ranked: &[(usize, usize)],
    passages: &[text::Passage],
    format: FormatArg,
) {
    match format {
        FormatArg::Text => {
            for (rank, &(index, score)) in ranked.iter().enumerate() {
                println!("{}\t{}\t{}", rank + 1, score, passages[index].text);
            }
        }
        FormatArg::Csv => {
            println!("rank,score,passage");
            for (rank, &(index, score)) in ranked.iter().enumerate() {
                let escaped = passages[index].text.replace('"', "\"\"");
                println!("{},{},\"{}\"", rank + 1, score, escaped);
            }
        }
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Genparams { dim, bits, delta, sigma, out } => {
            eprintln!(
                "config: cmd=genparams seed={} dim={dim} bits={bits} delta={delta} sigma={sigma} out={}",
                cli.seed,
                out.display()
            );
            let params = SbeParams::generate(cli.seed, dim, bits, delta, sigma)?;
            params.write_file(&out)?;
            Ok(())
        }
        Command::Retrieve {
            corpus: corpus_dir,
            doc,
            n,
            metric,
            kp_count,
            params,
            feature_hash,
            strategy,
            k,
            format,
        } => {
            if n == 0 {
                return Err(CliError::Usage("--n must be at least 1".into()));
            }
            let config = load_config(&cli.config)?;
            let support = support_config(strategy, k)?;
            let metric: Metric = metric.into();
            eprintln!(
                "config: cmd=retrieve seed={} corpus={} doc={doc} n={n} metric={metric:?} strategy={:?} k={} feature_hash={feature_hash}",
                cli.seed,
                corpus_dir.display(),
                support.strategy,
                support.k
            );
            let (passages, matrix) = prepare_doc(&corpus_dir, &doc, &config, kp_count)?;
            let ranked = match metric {
                Metric::Cosine | Metric::Euclidean => centrality::retrieve(
                    &ColumnSet::Real(matrix.columns()),
                    passages.len(),
                    n,
                    metric,
                    &support,
                )?,
                Metric::Hamming => {
                    let params_path = params.ok_or_else(|| {
                        CliError::Usage("--metric hamming requires --params".into())
                    })?;
                    let params = SbeParams::read_file(&params_path)?;
                    let feature_dim = if feature_hash { Some(params.l) } else { None };
                    let mut mapping = PrivateMapping::default();
                    let bundle = protocol::alice_prepare_matrix(
                        &doc, &matrix, &params, n, &support, feature_dim, &mut mapping,
                    )?;
                    let result = protocol::bob_retrieve(&bundle)?;
                    centrality::RankedPassages(
                        result.ranked.iter().map(|&(i, s)| (i as usize, s as usize)).collect(),
                    )
                }
            };
            print_ranked(&ranked.0, &passages, format);
            Ok(())
        }
        Command::Serve { addr, port } => {
            eprintln!("config: cmd=serve addr={addr} port={port}");
            let server = protocol::serve(&addr, port)?;
            eprintln!("listening on {}", server.local_addr());
            // foreground until killed
            loop {
                std::thread::sleep(std::time::Duration::from_secs(3600));
            }
        }
        Command::Client {
            addr,
            port,
            corpus: corpus_dir,
            doc,
            n,
            params,
            kp_count,
            feature_hash,
            strategy,
            k,
        } => {
            let config = load_config(&cli.config)?;
            let support = support_config(strategy, k)?;
            eprintln!(
                "config: cmd=client seed={} addr={addr} port={port} corpus={} doc={doc} n={n}",
                cli.seed,
                corpus_dir.display()
            );
            let (_passages, matrix) = prepare_doc(&corpus_dir, &doc, &config, kp_count)?;
            let params = SbeParams::read_file(&params)?;
            let feature_dim = if feature_hash { Some(params.l) } else { None };
            let mut mapping = PrivateMapping::default();
            let bundle = protocol::alice_prepare_matrix(
                &doc, &matrix, &params, n, &support, feature_dim, &mut mapping,
            )?;
            let result = protocol::request((addr.as_str(), port), &bundle)?;
            let resolved = protocol::alice_resolve(&result, &mapping)?;
            for (rank, passage) in resolved.iter().enumerate() {
                let score = result.ranked[rank].1;
                println!("{}\t{}\t{}", rank + 1, score, passage.text);
            }
            Ok(())
        }
        Command::Eval { corpus: corpus_dir, metric, n, ratio, kp_count } => {
            let mut config = load_config(&cli.config)?;
            if let Some(c) = kp_count {
                config.kp_count = c;
            }
            let size = size_rule(n, ratio, 3)?;
            let metric: Metric = metric.into();
            if metric == Metric::Hamming {
                return Err(CliError::Usage("eval runs plaintext baselines; use sweep for hashed runs".into()));
            }
            eprintln!(
                "config: cmd=eval seed={} corpus={} metric={metric:?} size={size:?} kp={}",
                cli.seed,
                corpus_dir.display(),
                config.kp_count
            );
            let corpus = corpus::load_corpus(&corpus_dir)?;
            let report = eval::run_baseline(
                &corpus,
                &config,
                metric,
                size,
                &SupportSetConfig::default(),
            )?;
            println!("doc,rouge1");
            for (id, score) in &report.per_doc {
                println!("{id},{score}");
            }
            println!("mean,{}", report.mean);
            Ok(())
        }
        Command::Sweep { corpus: corpus_dir, leakages, bpcs, trials, n, ratio, gamma, out } => {
            let config = load_config(&cli.config)?;
            let size = size_rule(n, ratio, 3)?;
            if !(gamma > 0.0 && gamma <= 0.25) {
                return Err(CliError::Usage("--gamma must be in (0, 0.25]".into()));
            }
            for &t in &leakages {
                if !(t > 0.0 && t <= 1.0) {
                    return Err(CliError::Usage(format!("leakage target {t} not in (0, 1]")));
                }
            }
            eprintln!(
                "config: cmd=sweep seed={} corpus={} leakages={leakages:?} bpcs={bpcs:?} trials={trials} gamma={gamma} size={size:?}",
                cli.seed,
                corpus_dir.display()
            );
            let corpus = corpus::load_corpus(&corpus_dir)?;
            let sweep = SweepConfig {
                leakage_targets: leakages,
                bpc_values: bpcs,
                trials,
                seed: cli.seed,
                gamma,
                sigma: 1.0,
                size,
                support: SupportSetConfig::default(),
            };
            let rows = eval::run_sweep(&corpus, &config, &sweep)?;
            let csv = eval::emit_csv(&rows);
            match out {
                Some(path) => std::fs::write(path, csv).map_err(|e| CliError::Io(e.to_string()))?,
                None => print!("{csv}"),
            }
            Ok(())
        }
        Command::Characterize { dim, bits, pairs, delta, sigma, max_distance, inject_duplicate } => {
            eprintln!(
                "config: cmd=characterize seed={} dim={dim} bits={bits} pairs={pairs} delta={delta} sigma={sigma} max_distance={max_distance} inject_duplicate={inject_duplicate}",
                cli.seed
            );
            let params = SbeParams::generate(cli.seed, dim, bits, delta, sigma)?;
            let samples = sbe::characterize(&params, pairs, cli.seed ^ 0x1, max_distance)?;
            println!("d_e,d_h");
            if inject_duplicate {
                println!("0,0");
            }
            for (d_e, d_h) in samples {
                println!("{d_e},{d_h}");
            }
            Ok(())
        }
    }
}
