use std::fs::File;
use std::io::{self, BufRead, BufReader, BufWriter, Write};

use anyhow::{anyhow, Context};
use topicgraph::corpus::{load_libsvm, Corpus, TokenGraph};
use topicgraph::engine::{EngineError, SparseInit, TrainConfig, Trainer};
use topicgraph::kernels::{HyperParams, KernelOptions};
use topicgraph::metrics::IterationRecord;
use topicgraph::model_io::{
    dedup_topics, infer_document, load_checkpoint, parse_infer_line, remap_topics, resume_state,
    save_checkpoint,
};
use topicgraph::partition::{assign, partition_metrics, Strategy};
use topicgraph::synth::{lda_corpus, power_law_corpus, LdaParams};

use crate::args::{
    BenchArgs, DedupArgs, HyperArgs, InferArgs, PartitionArgs, SparseInitArg, TrainArgs,
};
use crate::CliError;

type Result<T> = std::result::Result<T, CliError>;

fn usage<T>(msg: impl ToString) -> Result<T> {
    Err(CliError::Usage(msg.to_string()))
}

fn hyper(a: &HyperArgs) -> Result<HyperParams> {
    HyperParams::new(a.topics, a.alpha, a.beta, a.alpha_as).or_else(usage)
}

fn load_corpus(path: &std::path::Path) -> Result<Corpus> {
    Ok(load_libsvm(path).with_context(|| format!("reading {}", path.display()))?)
}

fn train_config(a: &TrainArgs) -> Result<TrainConfig> {
    let mut c = TrainConfig::new(hyper(&a.hyper)?);
    c.kernel = a.kernel;
    c.kernel_options = KernelOptions {
        remedy: !a.no_remedy,
        mh_steps: a.mh_steps,
        beta_boost: a.beta_boost,
    };
    c.strategy = Strategy::parse(&a.partitioner, a.dbh_threshold).or_else(usage)?;
    c.parts = a.parts;
    c.workers = a.workers;
    c.max_iterations = a.iters;
    c.target_perplexity = a.target_perplexity;
    c.sparse_init = match a.sparse_init {
        SparseInitArg::None => SparseInit::None,
        SparseInitArg::Word => SparseInit::Word(a.sparse_deg),
        SparseInitArg::Doc => SparseInit::Doc(a.sparse_deg),
    };
    c.exclusion_start = a.exclude_start;
    c.delta_aggregation = a.delta_agg;
    c.seed = a.seed;
    c.checkpoint_every = a.checkpoint_every;
    c.checkpoint_dir = Some(a.output_dir.clone());
    c.eval_every = a.eval_every;
    c.verify_snapshot = a.verify_snapshot;
    match c.validate() {
        Ok(()) => Ok(c),
        Err(EngineError::Config(m)) => usage(m),
        Err(e) => usage(e),
    }
}

fn emit(out: &mut impl Write, record: &IterationRecord, omit_timings: bool) -> io::Result<()> {
    let mut r = record.clone();
    if omit_timings {
        r.stats.seconds_per_step = [0.0; 5];
    }
    let line = serde_json::to_string(&r).map_err(io::Error::other)?;
    writeln!(out, "{line}")
}

pub fn train(a: TrainArgs) -> Result<()> {
    let config = train_config(&a)?;
    let corpus = load_corpus(&a.input)?;
    log::info!(
        "corpus: {} docs, {} words, {} tokens",
        corpus.doc_count(),
        corpus.vocab_size(),
        corpus.total_tokens()
    );
    let mut trainer = match &a.resume {
        None => Trainer::new(&corpus, config).map_err(anyhow::Error::from)?,
        Some(path) => {
            let ck = load_checkpoint(path).with_context(|| format!("loading {}", path.display()))?;
            let (graph, state, meta) =
                resume_state(&ck, &corpus, config.hyper.k, config.seed).map_err(anyhow::Error::from)?;
            log::info!("resuming at iteration {}", state.iteration());
            Trainer::from_parts(config, graph, state, meta, ck.history).map_err(anyhow::Error::from)?
        }
    };
    let stdout = io::stdout();
    let mut out = BufWriter::new(stdout.lock());
    let mut write_err: Option<io::Error> = None;
    trainer
        .run(|r| {
            if write_err.is_none() {
                if let Err(e) = emit(&mut out, r, a.omit_timings).and_then(|_| out.flush()) {
                    write_err = Some(e);
                }
            }
        })
        .map_err(anyhow::Error::from)?;
    if let Some(e) = write_err {
        return Err(anyhow!(e).context("writing metrics").into());
    }
    let final_path = a.output_dir.join("model.ckpt");
    trainer.save(&final_path).map_err(anyhow::Error::from)?;
    log::info!("wrote {}", final_path.display());
    Ok(())
}

pub fn infer(a: InferArgs) -> Result<()> {
    let ck = load_checkpoint(&a.model).with_context(|| format!("loading {}", a.model.display()))?;
    let reader: Box<dyn BufRead> = if a.input.as_os_str() == "-" {
        Box::new(BufReader::new(io::stdin()))
    } else {
        Box::new(BufReader::new(
            File::open(&a.input).with_context(|| format!("opening {}", a.input.display()))?,
        ))
    };
    let stdout = io::stdout();
    let mut out = BufWriter::new(stdout.lock());
    for (i, line) in reader.lines().enumerate() {
        let line = line.context("reading input")?;
        if line.trim().is_empty() {
            continue;
        }
        let doc = parse_infer_line(&line).map_err(|m| anyhow!("line {}: {m}", i + 1))?;
        let theta = infer_document(&ck.state, &ck.header.hyper, &doc, a.iters, a.mode, a.seed)
            .with_context(|| format!("line {}", i + 1))?;
        let cells: Vec<String> = theta.iter().map(|t| t.to_string()).collect();
        writeln!(out, "{}\t{}", i + 1, cells.join("\t")).context("writing output")?;
    }
    out.flush().context("writing output")?;
    Ok(())
}

pub fn partition_stats(a: PartitionArgs) -> Result<()> {
    let mut strategies = Vec::new();
    for name in &a.partitioners {
        strategies.push(Strategy::parse(name, a.dbh_threshold).or_else(usage)?);
    }
    if a.parts.contains(&0) {
        return usage("partition counts must be at least 1");
    }
    let corpus = match &a.input {
        Some(p) => load_corpus(p)?,
        None => {
            let n = (a.power_law_edges / 5).max(1);
            power_law_corpus(a.power_law_edges, n, n, a.power_law_exponent, a.seed)
        }
    };
    let graph = TokenGraph::from_corpus(&corpus);
    let stdout = io::stdout();
    let mut out = BufWriter::new(stdout.lock());
    let mut row = |s: String| writeln!(out, "{s}").context("writing output");
    row("partitioner\tparts\tedges\tmax_edges\tedge_balance\treplication\tword_replication\tdoc_replication\tmax_replication".into())?;
    for &s in &strategies {
        for &p in &a.parts {
            let m = partition_metrics(&assign(&graph, s, p, a.seed), &graph);
            row(format!(
                "{}\t{p}\t{}\t{}\t{:.4}\t{:.4}\t{:.4}\t{:.4}\t{}",
                s.name(),
                graph.edges().len(),
                m.edges_per_partition.iter().max().copied().unwrap_or(0),
                m.edge_balance,
                m.replication_factor,
                m.word_replication_factor,
                m.doc_replication_factor,
                m.max_replication
            ))?;
        }
    }
    out.flush().context("writing output")?;
    Ok(())
}

pub fn dedup(a: DedupArgs) -> Result<()> {
    if !(0.0..=2.0).contains(&a.threshold) {
        return usage("--threshold must be in [0, 2]");
    }
    let mut ck = load_checkpoint(&a.model).with_context(|| format!("loading {}", a.model.display()))?;
    let (merged, report) =
        dedup_topics(&ck.state, ck.header.hyper.beta, a.threshold).map_err(anyhow::Error::from)?;
    println!("survivor\tabsorbed");
    for g in &report.groups {
        let rest: Vec<String> = g[1..].iter().map(|t| t.to_string()).collect();
        println!("{}\t{}", g[0], rest.join(","));
    }
    log::info!("{} topics absorbed", report.merged_topics());
    if let Some(path) = &a.output {
        remap_topics(&mut ck.graph, &report.mapping);
        merged.check_invariants(&ck.graph).map_err(anyhow::Error::from)?;
        let mut config = TrainConfig::new(ck.header.hyper);
        config.kernel = ck.header.kernel;
        config.seed = ck.header.seed;
        save_checkpoint(path, &merged, &ck.graph, &config, ck.meta.as_deref(), &ck.history)
            .map_err(anyhow::Error::from)?;
    }
    Ok(())
}

pub fn bench(a: BenchArgs) -> Result<()> {
    let h = HyperParams::new(a.topics, a.alpha, a.beta, a.alpha_as).or_else(usage)?;
    if a.kernels.is_empty() {
        return usage("--kernels needs at least one kernel");
    }
    let corpus = match &a.input {
        Some(p) => load_corpus(p)?,
        None => lda_corpus(&LdaParams {
            docs: a.synthetic_docs,
            vocab: a.synthetic_vocab,
            mean_doc_len: a.synthetic_doc_len,
            ..LdaParams::convergence(a.seed)
        }),
    };
    let stdout = io::stdout();
    let mut out = BufWriter::new(stdout.lock());
    writeln!(out, "kernel\titer\tsample_seconds\titer_seconds\ttokens_sampled\ttopics_changed")
        .context("writing output")?;
    for &kernel in &a.kernels {
        let mut c = TrainConfig::new(h);
        c.kernel = kernel;
        c.parts = a.parts;
        c.workers = a.workers;
        c.max_iterations = a.iters;
        c.seed = a.seed;
        c.eval_every = 0;
        c.checkpoint_every = 0;
        if let Err(e) = c.validate() {
            return usage(e);
        }
        let mut trainer = Trainer::new(&corpus, c).map_err(anyhow::Error::from)?;
        while !trainer.is_done() {
            let r = trainer.step().map_err(anyhow::Error::from)?;
            let s = &r.stats;
            writeln!(
                out,
                "{kernel}\t{}\t{:.6}\t{:.6}\t{}\t{}",
                s.iter,
                s.seconds_per_step[2],
                s.seconds_per_step.iter().sum::<f64>(),
                s.tokens_sampled,
                s.topics_changed
            )
            .context("writing output")?;
            out.flush().context("writing output")?;
        }
    }
    Ok(())
}
