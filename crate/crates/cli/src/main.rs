use std::fs::File;
use std::io::{self, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use fasttbl::bench::{run_bench, write_iteration_csv, write_scalability_csv, BenchConfig};
use fasttbl::eval::{
    accuracy_tags, chunk_f1_tags, read_tagged, sign_test_tags, ApplyMode, EvalReport, SignLevel,
    TagSeqs,
};
use fasttbl::predicates::parse_templates_with_max;
use fasttbl::synth::{write_synth, SynthSpec, SYNTH_STATIC_TEMPLATES, SYNTH_TEMPLATES};
use fasttbl::{
    apply_rule_list, gen_synth, train, Algo, Corpus, InitMode, InitModel, RuleList, Schema,
    TblError, TrainConfig,
};

const EXIT_USAGE: u8 = 1;
const EXIT_IO: u8 = 2;
const EXIT_CONSISTENCY: u8 = 3;

#[derive(Parser)]
#[command(name = "fasttbl", version, about = "Transformation-based learning toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Learn a rule list from a labelled corpus.
    Train(TrainArgs),
    /// Apply a rule list to a corpus and write it with predicted classes.
    Apply(ApplyArgs),
    /// Score tagged corpora.
    Eval(EvalArgs),
    /// Write a synthetic corpus.
    GenSynth(SynthArgs),
    /// Time learners against corpus size and iteration number.
    Bench(BenchArgs),
}

#[derive(Args)]
struct TrainArgs {
    #[arg(long, default_value = "fast")]
    algo: Algo,
    #[arg(long)]
    corpus: PathBuf,
    /// Column names, class column last; `*` marks an initial-class column.
    #[arg(long)]
    schema: String,
    #[arg(long)]
    templates: PathBuf,
    #[arg(long, default_value_t = 1)]
    threshold: i64,
    /// global, column:NAME or copy:NAME. Required unless the schema marks an
    /// initial column.
    #[arg(long)]
    init: Option<InitMode>,
    #[arg(long, default_value_t = 3)]
    max_offset: i32,
    #[arg(long)]
    max_iterations: Option<usize>,
    #[arg(long)]
    out: PathBuf,
    /// Per-iteration CSV.
    #[arg(long)]
    report: Option<PathBuf>,
    /// Recount all rules after every iteration (fast only).
    #[arg(long)]
    check_oracle: bool,
    /// Training is always single-threaded; accepted for scripts.
    #[arg(long)]
    single_thread: bool,
}

#[derive(Args)]
struct ApplyArgs {
    #[arg(long)]
    rules: PathBuf,
    #[arg(long)]
    corpus: PathBuf,
    /// Defaults to the schema recorded in the rule list.
    #[arg(long)]
    schema: Option<String>,
    #[arg(long, default_value = "sequential")]
    mode: ApplyMode,
    /// Overrides the initial assignment recorded in the rule list.
    #[arg(long)]
    init: Option<InitMode>,
    /// Fit a column:NAME or global initial assignment on this corpus instead
    /// of the corpus being tagged.
    #[arg(long)]
    init_from: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long)]
    metric: Metric,
    /// Tagged corpus: true class second to last, predicted class last.
    #[arg(long)]
    pred: PathBuf,
    /// Gold corpus whose last column replaces the true classes in --pred.
    #[arg(long)]
    gold: Option<PathBuf>,
    /// Second system's tagged corpus (signtest).
    #[arg(long)]
    pred_b: Option<PathBuf>,
    #[arg(long, default_value = "token")]
    level: SignLevel,
    /// Print key=value lines instead of a sentence.
    #[arg(long)]
    kv: bool,
}

#[derive(Clone, Copy, clap::ValueEnum)]
enum Metric {
    Accuracy,
    Chunk,
    Signtest,
}

#[derive(Args, Clone)]
struct SynthFlags {
    #[arg(long, default_value_t = 8)]
    classes: usize,
    #[arg(long, default_value_t = 1000)]
    vocab: usize,
    #[arg(long, default_value_t = 1000)]
    sequences: usize,
    #[arg(long, default_value_t = 5)]
    min_len: usize,
    #[arg(long, default_value_t = 25)]
    max_len: usize,
    #[arg(long, default_value_t = 60)]
    patterns: usize,
    #[arg(long, default_value_t = 0.3)]
    noise: f64,
    #[arg(long, default_value_t = 0.0)]
    ambiguity: f64,
    #[arg(long, default_value_t = 1.0)]
    zipf: f64,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Plant previous-word patterns instead of previous-class ones.
    #[arg(long)]
    static_only: bool,
}

impl SynthFlags {
    fn spec(&self) -> SynthSpec {
        SynthSpec {
            num_classes: self.classes,
            vocab_size: self.vocab,
            num_sequences: self.sequences,
            min_len: self.min_len,
            max_len: self.max_len,
            pattern_rules: self.patterns,
            noise: self.noise,
            seed: self.seed,
            zipf: self.zipf,
            static_only: self.static_only,
            ambiguity: self.ambiguity,
        }
    }
}

#[derive(Args)]
struct SynthArgs {
    #[command(flatten)]
    synth: SynthFlags,
    #[arg(long)]
    out: PathBuf,
    /// Also write a template file matching the planted structure.
    #[arg(long)]
    templates_out: Option<PathBuf>,
}

#[derive(Args)]
struct BenchArgs {
    #[arg(long, value_delimiter = ',', default_value = "regular,fast,ica")]
    algos: Vec<Algo>,
    /// Corpus to benchmark on; a synthetic one is generated otherwise.
    #[arg(long)]
    corpus: Option<PathBuf>,
    #[arg(long)]
    schema: Option<String>,
    #[arg(long)]
    init: Option<InitMode>,
    /// Defaults to the synthetic templates when no corpus is given.
    #[arg(long)]
    templates: Option<PathBuf>,
    #[command(flatten)]
    synth: SynthFlags,
    #[arg(long, value_delimiter = ',', default_value = "0.125,0.25,0.5,1.0")]
    sizes: Vec<f64>,
    #[arg(long, default_value_t = 4)]
    trials: usize,
    #[arg(long, default_value_t = 1)]
    threshold: i64,
    #[arg(long, default_value = "scalability.csv")]
    scalability_out: PathBuf,
    #[arg(long, default_value = "iterations.csv")]
    iterations_out: PathBuf,
    /// Benchmarks always run single-threaded; accepted for scripts.
    #[arg(long)]
    single_thread: bool,
}

enum Failure {
    Usage(String),
    Tbl(TblError),
}

impl From<TblError> for Failure {
    fn from(e: TblError) -> Self {
        Failure::Tbl(e)
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Failure::Tbl(TblError::Io(e))
    }
}

type CliResult<T> = std::result::Result<T, Failure>;

fn open(path: &Path) -> CliResult<BufReader<File>> {
    File::open(path)
        .map(BufReader::new)
        .map_err(|e| Failure::Tbl(TblError::Io(io::Error::new(e.kind(), format!("{}: {e}", path.display())))))
}

fn create(path: &Path) -> CliResult<BufWriter<File>> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| Failure::Tbl(TblError::Io(io::Error::new(e.kind(), format!("{}: {e}", path.display())))))
}

fn read_to_string(path: &Path) -> CliResult<String> {
    std::fs::read_to_string(path)
        .map_err(|e| Failure::Tbl(TblError::Io(io::Error::new(e.kind(), format!("{}: {e}", path.display())))))
}

fn load_corpus(path: &Path, schema: &Schema) -> CliResult<Corpus> {
    Ok(Corpus::load(open(path)?, schema.clone())?)
}

fn initialize(corpus: &mut Corpus, init: Option<&InitMode>, fit_on: Option<&Corpus>) -> CliResult<()> {
    match init {
        Some(mode) => {
            let model = InitModel::fit(fit_on.unwrap_or(corpus), mode)?;
            model.apply(corpus)?;
        }
        None if corpus.is_assigned() => {}
        None => {
            return Err(Failure::Usage(
                "no initial classes: pass --init or mark a schema column with `*`".into(),
            ))
        }
    }
    Ok(())
}

fn cmd_train(args: TrainArgs) -> CliResult<()> {
    if args.check_oracle && args.algo != Algo::Fast {
        return Err(Failure::Usage("--check-oracle requires --algo fast".into()));
    }
    let schema = Schema::parse(&args.schema)?;
    let mut corpus = load_corpus(&args.corpus, &schema)?;
    initialize(&mut corpus, args.init.as_ref(), None)?;
    let templates =
        parse_templates_with_max(&read_to_string(&args.templates)?, &schema, args.max_offset)?;
    let config = TrainConfig {
        threshold: args.threshold,
        check_oracle: args.check_oracle,
        max_iterations: args.max_iterations,
    };
    let (mut list, report) = train(args.algo, &mut corpus, &templates, &config)?;
    list.init = args.init.clone();
    list.write(create(&args.out)?)?;
    if let Some(path) = &args.report {
        report.write_csv(create(path)?)?;
    }
    let n = corpus.len() as f64;
    println!(
        "{}: {} rules, errors {} -> {}, accuracy {:.4} -> {:.4}, {:.3}s",
        args.algo,
        list.len(),
        report.initial_errors,
        report.final_errors,
        1.0 - report.initial_errors as f64 / n,
        1.0 - report.final_errors as f64 / n,
        report.total_seconds
    );
    if args.check_oracle {
        println!("oracle check passed after each of {} iterations", list.len());
    }
    Ok(())
}

fn cmd_apply(args: ApplyArgs) -> CliResult<()> {
    let list = RuleList::read(open(&args.rules)?)?;
    let descriptor = args.schema.as_deref().unwrap_or(&list.schema);
    let schema = Schema::parse(descriptor)?;
    let mut corpus = load_corpus(&args.corpus, &schema)?;
    let init = args.init.as_ref().or(list.init.as_ref());
    let fit_on = match &args.init_from {
        Some(path) => Some(load_corpus(path, &schema)?),
        None => None,
    };
    initialize(&mut corpus, init, fit_on.as_ref())?;
    apply_rule_list(&mut corpus, &list, args.mode)?;
    corpus.write_tagged(create(&args.out)?)?;
    Ok(())
}

fn read_pair(pred: &Path, gold: Option<&Path>) -> CliResult<(TagSeqs, TagSeqs)> {
    let (mut g, p) = read_tagged(open(pred)?)?;
    if let Some(gold) = gold {
        // the gold file's last column holds the reference classes
        let (_, reference) = read_tagged(open(gold)?)?;
        g = reference;
    }
    Ok((g, p))
}

fn cmd_eval(args: EvalArgs) -> CliResult<()> {
    let (gold, pred) = read_pair(&args.pred, args.gold.as_deref())?;
    let report: EvalReport = match args.metric {
        Metric::Accuracy => accuracy_tags(&pred, &gold)?,
        Metric::Chunk => chunk_f1_tags(&pred, &gold)?,
        Metric::Signtest => {
            let Some(b) = &args.pred_b else {
                return Err(Failure::Usage("signtest needs --pred-b".into()));
            };
            let (gold_b, pred_b) = read_pair(b, args.gold.as_deref())?;
            if gold_b != gold {
                return Err(TblError::Misaligned("the two systems disagree on the true classes".into()).into());
            }
            sign_test_tags(&pred, &pred_b, &gold, args.level)?
        }
    };
    if args.kv {
        print!("{}", report.key_values());
    } else {
        println!("{report}");
    }
    Ok(())
}

fn cmd_gen_synth(args: SynthArgs) -> CliResult<()> {
    let spec = args.synth.spec();
    let corpus = gen_synth(&spec)?;
    write_synth(&corpus, create(&args.out)?)?;
    if let Some(path) = &args.templates_out {
        let text = if spec.static_only {
            SYNTH_STATIC_TEMPLATES
        } else {
            SYNTH_TEMPLATES
        };
        let mut out = create(path)?;
        out.write_all(text.as_bytes())?;
        out.flush()?;
    }
    println!(
        "{} samples in {} sequences, {} initial errors",
        corpus.len(),
        corpus.num_sequences(),
        corpus.error_count()?
    );
    Ok(())
}

fn cmd_bench(args: BenchArgs) -> CliResult<()> {
    let (corpus, templates) = match &args.corpus {
        Some(path) => {
            let Some(descriptor) = &args.schema else {
                return Err(Failure::Usage("--corpus needs --schema".into()));
            };
            let Some(tpath) = &args.templates else {
                return Err(Failure::Usage("--corpus needs --templates".into()));
            };
            let schema = Schema::parse(descriptor)?;
            let mut corpus = load_corpus(path, &schema)?;
            initialize(&mut corpus, args.init.as_ref(), None)?;
            let templates = parse_templates_with_max(&read_to_string(tpath)?, &schema, 3)?;
            (corpus, templates)
        }
        None => {
            let spec = args.synth.spec();
            let corpus = gen_synth(&spec)?;
            let text = match &args.templates {
                Some(p) => read_to_string(p)?,
                None if spec.static_only => SYNTH_STATIC_TEMPLATES.to_string(),
                None => SYNTH_TEMPLATES.to_string(),
            };
            let templates = parse_templates_with_max(&text, corpus.schema(), 3)?;
            (corpus, templates)
        }
    };
    let config = BenchConfig {
        algos: args.algos.clone(),
        sizes: args.sizes.clone(),
        trials: args.trials,
        threshold: args.threshold,
    };
    let records = run_bench(&corpus, &templates, &config)?;
    for r in records.iter().filter(|r| !r.ok()) {
        eprintln!(
            "warning: {} at size {} trial {} failed: {}",
            r.algo,
            r.size,
            r.trial,
            r.failed.as_deref().unwrap_or("")
        );
    }
    write_scalability_csv(&records, create(&args.scalability_out)?)?;
    write_iteration_csv(&records, create(&args.iterations_out)?)?;
    for ((algo, size), secs) in fasttbl::bench::mean_totals(&records) {
        println!("{algo}\t{size}\t{secs:.3}s");
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(EXIT_USAGE)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    let result = match cli.command {
        Command::Train(a) => cmd_train(a),
        Command::Apply(a) => cmd_apply(a),
        Command::Eval(a) => cmd_eval(a),
        Command::GenSynth(a) => cmd_gen_synth(a),
        Command::Bench(a) => cmd_bench(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(EXIT_USAGE)
        }
        Err(Failure::Tbl(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn exit_code(e: &TblError) -> u8 {
    match e {
        _ if e.is_consistency() => EXIT_CONSISTENCY,
        TblError::Io(_)
        | TblError::Csv(_)
        | TblError::EmptyInput
        | TblError::RaggedRow { .. }
        | TblError::Parse { .. }
        | TblError::MalformedTag(_)
        | TblError::Misaligned(_) => EXIT_IO,
        _ => EXIT_USAGE,
    }
}
