//! `schemakg`: build evolving-schema benchmarks, decode, score and prompt.
//!
//! Exit codes: 0 success, 1 data or validation error, 2 usage error.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use serde::Deserialize;

use schemakg::corpus::{
    load_jsonl, load_predictions_jsonl, to_jsonl_line, Annotation, Example, SplitSet,
};
use schemakg::decode::{
    oracle_scorer_with, Decoder, HashScorer, Scorer, UniformScorer, DEFAULT_MAX_LEN,
};
use schemakg::embed::{build_cooc, EmbeddingStore};
use schemakg::evolve::{build_benchmark, BenchmarkInputs, EvolutionConfig};
use schemakg::llmclient::{
    build_icl_prompt, parse_llm_response, send_all, ChatTransport, Demonstration, EndpointConfig,
    HttpTransport, PromptSpec,
};
use schemakg::metrics::{
    micro_f1, render_report, IterationScore, MetricKind, MetricsError, MetricsReport,
};
use schemakg::presets::{toy_dataset, Dataset, ToySizes};
use schemakg::schema::{LabelProjection, SchemaGraph};

#[derive(Debug, Parser)]
#[command(
    name = "schemakg",
    version,
    about = "Schema-adaptable knowledge graph construction toolkit"
)]
struct Cli {
    /// More log output (repeatable).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Build per-iteration schemas and dev/test splits from a run config.
    Build {
        #[arg(long)]
        config: PathBuf,
        /// Overrides the config's seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Overrides the config's output directory.
        #[arg(long)]
        output: Option<PathBuf>,
        #[arg(long)]
        force: bool,
    },
    /// Decode a split under a schema with a named scorer.
    Extract {
        #[arg(long)]
        schema: PathBuf,
        #[arg(long)]
        input: PathBuf,
        /// Predictions JSONL; linearized sequences go beside it as `.txt`.
        #[arg(long)]
        output: PathBuf,
        #[arg(long, value_enum, default_value_t = ScorerKind::Oracle)]
        scorer: ScorerKind,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = DEFAULT_MAX_LEN)]
        max_len: usize,
        #[arg(long)]
        force: bool,
    },
    /// Score predictions against gold; writes a JSON report and a table.
    Eval {
        #[arg(long)]
        gold: PathBuf,
        #[arg(long)]
        pred: PathBuf,
        #[arg(long, value_parser = parse_metric)]
        metric: MetricKind,
        #[arg(long, default_value_t = 1)]
        iteration: usize,
        #[arg(long, default_value = "model")]
        model: String,
        /// Report JSON; the rendered table goes beside it as `.md`.
        #[arg(long)]
        output: PathBuf,
        #[arg(long)]
        force: bool,
    },
    /// Merge eval reports into one table.
    Report {
        #[arg(long, num_args = 1.., required = true)]
        inputs: Vec<PathBuf>,
        /// Markdown table.
        #[arg(long)]
        output: PathBuf,
        /// Merged reports as JSON.
        #[arg(long)]
        json: Option<PathBuf>,
        #[arg(long)]
        force: bool,
    },
    /// Write few-shot relation-extraction prompts and optionally send them.
    Prompt {
        #[arg(long)]
        schema: PathBuf,
        /// Demonstrations (gold JSONL).
        #[arg(long)]
        demos: PathBuf,
        /// Queries (JSONL; annotations ignored).
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        output: PathBuf,
        #[arg(long, default_value_t = 20)]
        shots: usize,
        /// Post the prompts and store raw and parsed replies.
        #[arg(long)]
        send: bool,
        /// Endpoint config JSON, required with --send.
        #[arg(long)]
        endpoint: Option<PathBuf>,
        #[arg(long)]
        force: bool,
    },
    /// Generate toy raw inputs for one dataset's taxonomy.
    Toy {
        #[arg(long, value_parser = parse_dataset)]
        dataset: Dataset,
        #[arg(long)]
        output: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = ToySizes::default().train)]
        train: usize,
        #[arg(long, default_value_t = ToySizes::default().dev)]
        dev: usize,
        #[arg(long, default_value_t = ToySizes::default().test)]
        test: usize,
        #[arg(long)]
        force: bool,
    },
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum ScorerKind {
    Oracle,
    Uniform,
    Hash,
}

fn parse_metric(s: &str) -> Result<MetricKind, String> {
    s.parse().map_err(|e: MetricsError| e.to_string())
}

fn parse_dataset(s: &str) -> Result<Dataset, String> {
    s.parse()
}

/// Run config. Relative paths resolve against the config file's directory.
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RunConfig {
    raw_schema: PathBuf,
    train: PathBuf,
    dev: PathBuf,
    test: PathBuf,
    #[serde(default)]
    embeddings: Option<PathBuf>,
    /// One tokenized sentence per line.
    #[serde(default)]
    corpus: Option<PathBuf>,
    /// One replacement word per line.
    #[serde(default)]
    lexicon: Option<PathBuf>,
    output: PathBuf,
    evolution: EvolutionConfig,
}

impl RunConfig {
    fn load(path: &Path) -> Result<RunConfig> {
        let text = fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        let mut cfg: RunConfig = serde_json::from_str(&text)
            .with_context(|| format!("parsing config {}", path.display()))?;
        let base = path.parent().unwrap_or(Path::new("."));
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        for p in [
            &mut cfg.raw_schema,
            &mut cfg.train,
            &mut cfg.dev,
            &mut cfg.test,
            &mut cfg.output,
        ] {
            fix(p);
        }
        for p in [&mut cfg.embeddings, &mut cfg.corpus, &mut cfg.lexicon]
            .into_iter()
            .flatten()
        {
            fix(p);
        }
        for p in [
            Some(&cfg.raw_schema),
            Some(&cfg.train),
            Some(&cfg.dev),
            Some(&cfg.test),
        ]
        .into_iter()
        .flatten()
        .chain(cfg.embeddings.iter())
        .chain(cfg.corpus.iter())
        .chain(cfg.lexicon.iter())
        {
            if !p.exists() {
                bail!("config references missing file {}", p.display());
            }
        }
        Ok(cfg)
    }
}

fn guard(path: &Path, force: bool) -> Result<()> {
    if path.exists() && !force {
        bail!("{} exists; pass --force to overwrite", path.display());
    }
    Ok(())
}

fn fresh_dir(path: &Path, force: bool) -> Result<()> {
    guard(path, force)?;
    if path.exists() {
        if !path.is_dir() {
            bail!("{} is not a directory", path.display());
        }
        fs::remove_dir_all(path).with_context(|| format!("clearing {}", path.display()))?;
    }
    fs::create_dir_all(path).with_context(|| format!("creating {}", path.display()))?;
    Ok(())
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent)?;
    }
    fs::write(path, contents).with_context(|| format!("writing {}", path.display()))
}

fn jsonl(examples: &[Example]) -> String {
    examples.iter().map(|e| to_jsonl_line(e) + "\n").collect()
}

fn read_lines(path: &Path) -> Result<Vec<String>> {
    Ok(fs::read_to_string(path)
        .with_context(|| format!("reading {}", path.display()))?
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty())
        .map(str::to_string)
        .collect())
}

fn build(config: &Path, seed: Option<u64>, output: Option<PathBuf>, force: bool) -> Result<()> {
    let mut cfg = RunConfig::load(config)?;
    if let Some(s) = seed {
        cfg.evolution.seed = s;
    }
    let out = output.unwrap_or(cfg.output.clone());
    let raw = SchemaGraph::load(&cfg.raw_schema)?;
    let splits = SplitSet {
        train: load_jsonl(&cfg.train)?,
        dev: load_jsonl(&cfg.dev)?,
        test: load_jsonl(&cfg.test)?,
    };
    let store = cfg
        .embeddings
        .as_ref()
        .map(EmbeddingStore::load)
        .transpose()?;
    let cooc = match &cfg.corpus {
        Some(p) => {
            let sentences: Vec<Vec<String>> = read_lines(p)?
                .iter()
                .map(|l| l.split_whitespace().map(str::to_string).collect())
                .collect();
            Some(build_cooc(&sentences, cfg.evolution.window))
        }
        None => None,
    };
    let lexicon = cfg.lexicon.as_ref().map(|p| read_lines(p)).transpose()?;
    let bench = build_benchmark(
        BenchmarkInputs {
            raw: &raw,
            splits: &splits,
            store: store.as_ref(),
            cooc: cooc.as_ref(),
            lexicon: lexicon.as_deref(),
        },
        &cfg.evolution,
    )?;
    fresh_dir(&out, force)?;
    bench.write(&out)?;
    for a in &bench.artifacts {
        log::info!(
            "iteration {}: {} sub nodes",
            a.index,
            a.schema.primary_subs().count()
        );
    }
    eprintln!(
        "wrote {} iterations to {}",
        bench.artifacts.len(),
        out.display()
    );
    Ok(())
}

fn extract(
    schema: &Path,
    input: &Path,
    output: &Path,
    kind: ScorerKind,
    seed: u64,
    max_len: usize,
    force: bool,
) -> Result<()> {
    let txt = output.with_extension("txt");
    guard(output, force)?;
    guard(&txt, force)?;
    let schema = SchemaGraph::load(schema)?;
    let mut examples = load_jsonl(input)?;
    examples.sort_by(|a, b| a.id.cmp(&b.id));
    let decoder = Decoder::new(&schema);
    let identity = LabelProjection::new(&schema, &schema);
    let outputs = decoder.decode_all(
        &examples,
        |ex| -> Result<Box<dyn Scorer>, _> {
            Ok(match kind {
                ScorerKind::Oracle => Box::new(oracle_scorer_with(ex, &identity, &schema)?),
                ScorerKind::Uniform => Box::new(UniformScorer),
                ScorerKind::Hash => Box::new(HashScorer::new(seed)),
            })
        },
        max_len,
    );
    let (mut preds, mut seqs) = (Vec::new(), String::new());
    let (mut flagged, mut diagnostics) = (0, 0);
    for (ex, out) in examples.iter().zip(outputs) {
        let out = out.with_context(|| format!("decoding example {}", ex.id))?;
        for d in &out.diagnostics {
            log::debug!("example {}: {d}", ex.id);
        }
        flagged += usize::from(!out.diagnostics.is_empty());
        diagnostics += out.diagnostics.len();
        seqs.push_str(&format!("{}\t{}\n", ex.id, out.sequence));
        preds.push(Example {
            id: ex.id.clone(),
            text: ex.text.clone(),
            annotations: out.annotations,
        });
    }
    write_file(output, &jsonl(&preds))?;
    write_file(&txt, &seqs)?;
    if diagnostics > 0 {
        log::warn!("{diagnostics} decode diagnostics in {flagged} examples (-vv lists them)");
    }
    eprintln!("decoded {} examples to {}", preds.len(), output.display());
    Ok(())
}

fn mismatch_message(e: &MetricsError) -> Option<String> {
    let MetricsError::IdMismatch {
        pred_only,
        gold_only,
    } = e
    else {
        return None;
    };
    let first: Vec<String> = pred_only
        .iter()
        .map(|id| format!("{id} (pred only)"))
        .chain(gold_only.iter().map(|id| format!("{id} (gold only)")))
        .take(5)
        .collect();
    Some(format!(
        "{} example ids do not match; first unmatched: {}",
        pred_only.len() + gold_only.len(),
        first.join(", ")
    ))
}

#[allow(clippy::too_many_arguments)]
fn eval(
    gold: &Path,
    pred: &Path,
    metric: MetricKind,
    iteration: usize,
    model: &str,
    output: &Path,
    force: bool,
) -> Result<()> {
    let table_path = output.with_extension("md");
    guard(output, force)?;
    guard(&table_path, force)?;
    let gold = load_jsonl(gold)?;
    let pred = load_predictions_jsonl(pred)?;
    let prf = match micro_f1(&pred, &gold, metric) {
        Ok(p) => p,
        Err(e) => bail!(mismatch_message(&e).unwrap_or_else(|| e.to_string())),
    };
    let report = MetricsReport::new(model, metric, vec![IterationScore::new(iteration, &prf)])?;
    let table = render_report(std::slice::from_ref(&report))?;
    write_file(output, &report.to_json_string())?;
    write_file(&table_path, &table)?;
    eprint!("{table}");
    Ok(())
}

fn report(inputs: &[PathBuf], output: &Path, json: Option<&Path>, force: bool) -> Result<()> {
    guard(output, force)?;
    if let Some(j) = json {
        guard(j, force)?;
    }
    let mut reports = Vec::new();
    for p in inputs {
        let text = fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
        let r: MetricsReport =
            serde_json::from_str(&text).with_context(|| format!("parsing {}", p.display()))?;
        reports.push(r);
    }
    let merged = MetricsReport::merge(reports)?;
    let table = render_report(&merged)?;
    write_file(output, &table)?;
    if let Some(j) = json {
        write_file(j, &(serde_json::to_string_pretty(&merged)? + "\n"))?;
    }
    eprint!("{table}");
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn prompt(
    schema: &Path,
    demos: &Path,
    input: &Path,
    output: &Path,
    shots: usize,
    send: bool,
    endpoint: Option<&Path>,
    force: bool,
) -> Result<()> {
    let endpoint = match (send, endpoint) {
        (true, Some(p)) => {
            let text = fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            Some(
                serde_json::from_str::<EndpointConfig>(&text)
                    .with_context(|| format!("parsing {}", p.display()))?,
            )
        }
        (true, None) => bail!("--send needs --endpoint"),
        (false, _) => None,
    };
    let schema = SchemaGraph::load(schema)?;
    let mut demo_examples = load_jsonl(demos)?;
    demo_examples.sort_by(|a, b| a.id.cmp(&b.id));
    let demos: Vec<Demonstration> = demo_examples
        .iter()
        .take(shots)
        .map(Demonstration::from_example)
        .collect();
    let mut queries = load_jsonl(input)?;
    queries.sort_by(|a, b| a.id.cmp(&b.id));
    let prompts: Vec<String> = queries
        .iter()
        .map(|q| {
            build_icl_prompt(&PromptSpec::for_schema(
                &schema,
                demos.clone(),
                q.text.clone(),
            ))
        })
        .collect::<Result<_, _>>()?;
    fresh_dir(output, force)?;
    for (q, p) in queries.iter().zip(&prompts) {
        write_file(&output.join("prompts").join(format!("{}.txt", q.id)), p)?;
    }
    if let Some(cfg) = endpoint {
        let concurrency = cfg.concurrency;
        let transport = HttpTransport::new(cfg);
        let replies = send_all(&transport as &dyn ChatTransport, &prompts, concurrency);
        let mut parsed = Vec::new();
        let mut failures = 0;
        for (q, reply) in queries.iter().zip(replies) {
            let reply = match reply {
                Ok(r) => r,
                Err(e) => {
                    log::error!("example {}: {e}", q.id);
                    failures += 1;
                    continue;
                }
            };
            write_file(
                &output.join("responses").join(format!("{}.txt", q.id)),
                &reply,
            )?;
            let p = parse_llm_response(&reply, &schema, &q.text);
            for d in &p.diagnostics {
                log::warn!("example {}: {d:?}", q.id);
            }
            parsed.push(Example {
                id: q.id.clone(),
                text: q.text.clone(),
                annotations: p.relations.into_iter().map(Annotation::Relation).collect(),
            });
        }
        write_file(&output.join("parsed.jsonl"), &jsonl(&parsed))?;
        if failures > 0 {
            bail!("{failures} of {} requests failed", queries.len());
        }
    }
    eprintln!("wrote {} prompts to {}", prompts.len(), output.display());
    Ok(())
}

fn toy(dataset: Dataset, output: &Path, seed: u64, sizes: ToySizes, force: bool) -> Result<()> {
    let data = toy_dataset(dataset, seed, sizes);
    fresh_dir(output, force)?;
    data.raw.save(output.join("schema.json"))?;
    write_file(&output.join("train.jsonl"), &jsonl(&data.splits.train))?;
    write_file(&output.join("dev.jsonl"), &jsonl(&data.splits.dev))?;
    write_file(&output.join("test.jsonl"), &jsonl(&data.splits.test))?;
    write_file(&output.join("vectors.txt"), &data.store.to_text())?;
    let corpus: String = data.corpus.iter().map(|s| s.join(" ") + "\n").collect();
    write_file(&output.join("corpus.txt"), &corpus)?;
    eprintln!("wrote toy {dataset} data to {}", output.display());
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Build {
            config,
            seed,
            output,
            force,
        } => build(&config, seed, output, force),
        Command::Extract {
            schema,
            input,
            output,
            scorer,
            seed,
            max_len,
            force,
        } => extract(&schema, &input, &output, scorer, seed, max_len, force),
        Command::Eval {
            gold,
            pred,
            metric,
            iteration,
            model,
            output,
            force,
        } => eval(&gold, &pred, metric, iteration, &model, &output, force),
        Command::Report {
            inputs,
            output,
            json,
            force,
        } => report(&inputs, &output, json.as_deref(), force),
        Command::Prompt {
            schema,
            demos,
            input,
            output,
            shots,
            send,
            endpoint,
            force,
        } => prompt(
            &schema,
            &demos,
            &input,
            &output,
            shots,
            send,
            endpoint.as_deref(),
            force,
        ),
        Command::Toy {
            dataset,
            output,
            seed,
            train,
            dev,
            test,
            force,
        } => {
            let sizes = ToySizes {
                train,
                dev,
                test,
                ..ToySizes::default()
            };
            toy(dataset, &output, seed, sizes, force)
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .target(env_logger::Target::Stderr)
        .init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let _ = writeln!(std::io::stderr(), "error: {e:#}");
            ExitCode::from(1)
        }
    }
}
