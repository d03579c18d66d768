use std::io::{BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand, ValueEnum};

use seqtag::pipeline::{self, parse_key_values, TrainConfig};
use seqtag::{load_corpus, ModelBundle};

#[derive(Parser)]
#[command(
    name = "seqtag",
    version,
    about = "Part-of-speech tagging with sequential transducers"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train a model bundle (and the HMM baseline) from a tagged corpus.
    Train(TrainArgs),
    /// Tag pre-tokenized text, one sentence per line.
    Tag(TagArgs),
    /// Tag a gold corpus and report accuracy and throughput.
    Eval(EvalArgs),
    /// Compare decode throughput of the transducers and the HMM.
    Bench(BenchArgs),
}

#[derive(Args)]
struct TrainArgs {
    /// Two-column `word<TAB>tag` corpus, blank line between sentences.
    #[arg(long)]
    corpus: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = seqtag::context::DEFAULT_TAU)]
    tau: f64,
    #[arg(long, default_value_t = seqtag::classes::DEFAULT_THETA)]
    theta: f64,
    /// Tags in the unknown-word class.
    #[arg(long, default_value_t = seqtag::classes::DEFAULT_UNKNOWN_TAGS)]
    m: usize,
    /// Longest suffix used by the unknown-word guesser; 0 disables it.
    #[arg(long, default_value_t = seqtag::classes::DEFAULT_SUFFIX_LEN)]
    suffix_len: usize,
    #[arg(long, default_value_t = seqtag::classes::DEFAULT_MIN_SUFFIX_COUNT)]
    min_suffix_count: usize,
    #[arg(long, default_value_t = seqtag::corpus::DEFAULT_FLOOR)]
    floor: f64,
}

#[derive(Args)]
struct TagArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    input: PathBuf,
    #[arg(long, default_value_t = 1)]
    workers: usize,
    /// Write `word<TAB>tag` lines instead of one tag sequence per line.
    #[arg(long)]
    columns: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum ReportFormat {
    Table,
    Kv,
    Both,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    gold: PathBuf,
    #[arg(long, default_value_t = 3)]
    runs: usize,
    #[arg(long, value_enum, default_value_t = ReportFormat::Both)]
    format: ReportFormat,
}

#[derive(Args)]
struct BenchArgs {
    #[arg(long)]
    model: PathBuf,
    /// Directory holding `hmm.txt`; usually the same as --model.
    #[arg(long)]
    hmm: PathBuf,
    #[arg(long)]
    corpus: PathBuf,
    #[arg(long, default_value_t = 100_000)]
    min_tokens: usize,
    #[arg(long, default_value_t = 3)]
    runs: usize,
    #[arg(long, value_enum, default_value_t = ReportFormat::Both)]
    format: ReportFormat,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    let result = match cli.command {
        Command::Train(args) => train(args),
        Command::Tag(args) => tag(args),
        Command::Eval(args) => eval(args),
        Command::Bench(args) => bench(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            let data = e.chain().any(|c| {
                c.downcast_ref::<seqtag::Error>()
                    .is_some_and(seqtag::Error::is_data_error)
            });
            ExitCode::from(if data { 2 } else { 1 })
        }
    }
}

fn print_report(format: ReportFormat, table: String, kv: String) {
    match format {
        ReportFormat::Table => print!("{table}"),
        ReportFormat::Kv => print!("{kv}"),
        ReportFormat::Both => print!("{table}\n{kv}"),
    }
}

fn train(args: TrainArgs) -> anyhow::Result<()> {
    let config = TrainConfig {
        tau: args.tau,
        theta: args.theta,
        unknown_tags: args.m,
        suffix_len: args.suffix_len,
        min_suffix_count: args.min_suffix_count,
        floor: args.floor,
    };
    let corpus = load_corpus(&args.corpus)?;
    let trained = pipeline::train(&corpus, &config)?;
    trained.bundle.save(&args.out)?;
    pipeline::save_hmm(&trained.hmm, &args.out)?;
    let b = &trained.bundle;
    eprintln!(
        "trained on {} tokens: {} classes, {} reduced classes, T1 {} states, T2 {} states",
        corpus.token_count(),
        b.classes.len(),
        b.reduced.len(),
        b.t1.num_states(),
        b.t2.num_states()
    );
    Ok(())
}

fn tag(args: TagArgs) -> anyhow::Result<()> {
    let bundle = ModelBundle::load(&args.model)?;
    let text = std::fs::read_to_string(&args.input)
        .with_context(|| format!("reading {}", args.input.display()))?;
    let sentences = pipeline::parse_plain_text(&text);
    let tags = pipeline::tag(&bundle, &sentences, args.workers)?;
    let mut out = BufWriter::new(std::io::stdout().lock());
    for (words, tags) in sentences.iter().zip(&tags) {
        if args.columns {
            for (w, t) in words.iter().zip(tags) {
                writeln!(out, "{w}\t{t}")?;
            }
            writeln!(out)?;
        } else {
            writeln!(out, "{}", tags.join(" "))?;
        }
    }
    out.flush()?;
    Ok(())
}

fn eval(args: EvalArgs) -> anyhow::Result<()> {
    let bundle = ModelBundle::load(&args.model)?;
    let gold = load_corpus(&args.gold)?;
    let report = pipeline::evaluate(&bundle, &gold, args.runs)?;
    if report.gold_is_training {
        eprintln!("warning: gold corpus is identical to the training corpus");
    }
    print_report(args.format, report.to_table(10), report.to_key_values());
    Ok(())
}

fn bench(args: BenchArgs) -> anyhow::Result<()> {
    let bundle = ModelBundle::load(&args.model)?;
    let hmm = pipeline::load_hmm(&args.hmm)?;
    if args.hmm != args.model {
        let manifest = std::fs::read_to_string(args.hmm.join("manifest.txt")).ok();
        let checksum = manifest.map(|m| parse_key_values(&m).remove("corpus_checksum"));
        if checksum.flatten().as_deref() != Some(bundle.metadata.corpus_checksum.as_str()) {
            eprintln!("warning: HMM may not be trained on the same corpus as the bundle");
        }
    }
    let corpus = load_corpus(&args.corpus)?;
    let report = pipeline::bench(&bundle, &hmm, &corpus, args.min_tokens, args.runs)?;
    print_report(args.format, report.to_table(), report.to_key_values());
    Ok(())
}
