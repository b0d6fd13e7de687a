use std::path::{Path, PathBuf};

use super::{
    init_random, init_sparse_doc, init_sparse_word, initial_supports, run_iteration, EngineError,
    ModelState, PartitionPlan, SparseInit, TokenMeta, TrainConfig,
};
use crate::corpus::{Corpus, TokenGraph};
use crate::metrics::{
    check_termination, log_likelihood_split, log_likelihood_total, perplexity, IterationRecord,
    MetricHistory,
};
use crate::model_io::save_checkpoint;

/// Owns everything a training run needs between iterations.
#[derive(Debug)]
pub struct Trainer {
    config: TrainConfig,
    graph: TokenGraph,
    state: ModelState,
    meta: Vec<TokenMeta>,
    plan: PartitionPlan,
    support: Option<Vec<Vec<u32>>>,
    history: MetricHistory,
}

impl Trainer {
    /// Builds the token graph and initializes topics per `config.sparse_init`.
    pub fn new(corpus: &Corpus, config: TrainConfig) -> Result<Self, EngineError> {
        config.validate()?;
        let mut graph = TokenGraph::from_corpus(corpus);
        let k = config.hyper.k;
        let (state, support) = match config.sparse_init {
            SparseInit::None => (init_random(&mut graph, k, config.seed)?, None),
            SparseInit::Word(deg) => {
                let (s, sup) = init_sparse_word(&mut graph, k, deg, config.seed)?;
                (s, Some(sup))
            }
            SparseInit::Doc(deg) => (init_sparse_doc(&mut graph, k, deg, config.seed)?.0, None),
        };
        let meta = Self::fresh_meta(&config, &graph);
        Self::assemble(config, graph, state, meta, support, MetricHistory::default())
    }

    /// Continues from existing topics and counts. `meta` may be empty, in
    /// which case exclusion bookkeeping restarts from zero.
    pub fn from_parts(
        config: TrainConfig,
        graph: TokenGraph,
        state: ModelState,
        meta: Vec<TokenMeta>,
        history: MetricHistory,
    ) -> Result<Self, EngineError> {
        config.validate()?;
        if state.k() != config.hyper.k {
            return Err(EngineError::Config(format!(
                "model has K = {} but the configuration asks for {}",
                state.k(),
                config.hyper.k
            )));
        }
        state.check_invariants(&graph)?;
        let meta = if config.exclusion_start.is_none() {
            Vec::new()
        } else if meta.len() == graph.topics().len() {
            meta
        } else {
            Self::fresh_meta(&config, &graph)
        };
        let support = match config.sparse_init {
            SparseInit::Word(_) => initial_supports(
                config.sparse_init,
                graph.vocab_size(),
                0,
                config.hyper.k,
                config.seed,
            ),
            _ => None,
        };
        Self::assemble(config, graph, state, meta, support, history)
    }

    fn fresh_meta(config: &TrainConfig, graph: &TokenGraph) -> Vec<TokenMeta> {
        if config.exclusion_start.is_some() {
            vec![TokenMeta::default(); graph.topics().len()]
        } else {
            Vec::new()
        }
    }

    fn assemble(
        config: TrainConfig,
        graph: TokenGraph,
        state: ModelState,
        meta: Vec<TokenMeta>,
        support: Option<Vec<Vec<u32>>>,
        history: MetricHistory,
    ) -> Result<Self, EngineError> {
        let plan = PartitionPlan::new(&graph, config.strategy, config.parts, config.seed);
        Ok(Trainer {
            config,
            graph,
            state,
            meta,
            plan,
            support,
            history,
        })
    }

    pub fn config(&self) -> &TrainConfig {
        &self.config
    }

    pub fn graph(&self) -> &TokenGraph {
        &self.graph
    }

    pub fn state(&self) -> &ModelState {
        &self.state
    }

    pub fn meta(&self) -> &[TokenMeta] {
        &self.meta
    }

    pub fn plan(&self) -> &PartitionPlan {
        &self.plan
    }

    pub fn history(&self) -> &MetricHistory {
        &self.history
    }

    pub fn into_parts(self) -> (TokenGraph, ModelState, MetricHistory) {
        (self.graph, self.state, self.history)
    }

    pub fn is_done(&self) -> bool {
        check_termination(
            self.state.iteration(),
            self.config.max_iterations,
            &self.history,
            self.config.target_perplexity,
        )
    }

    /// `(llh_total, llh_word, llh_doc, perplexity)` of the current state.
    pub fn evaluate(&self) -> (f64, f64, f64, f64) {
        let total = log_likelihood_total(&self.state, &self.graph, &self.config.hyper);
        let (word, doc) = log_likelihood_split(&self.state, &self.config.hyper);
        let n = self.graph.total_tokens().max(1);
        (total, word, doc, perplexity(total, n))
    }

    /// Runs one iteration, evaluates if due, and writes a checkpoint if due.
    pub fn step(&mut self) -> Result<IterationRecord, EngineError> {
        let stats = run_iteration(
            &mut self.state,
            &mut self.graph,
            &mut self.meta,
            &self.plan,
            &self.config,
            self.support.as_deref(),
        )?;
        let iter = stats.iter;
        let last = iter >= self.config.max_iterations;
        let eval_due = self.config.eval_every > 0 && (iter % self.config.eval_every == 0 || last);
        let mut record = IterationRecord {
            stats,
            llh_total: None,
            llh_word: None,
            llh_doc: None,
            perplexity: None,
        };
        if eval_due {
            let (total, word, doc, ppl) = self.evaluate();
            record.llh_total = Some(total);
            record.llh_word = Some(word);
            record.llh_doc = Some(doc);
            record.perplexity = Some(ppl);
        }
        self.history.push(record.clone());
        if let Some(dir) = &self.config.checkpoint_dir {
            let every = self.config.checkpoint_every;
            if every > 0 && iter % every == 0 {
                let path = checkpoint_path(dir, iter);
                self.save(&path)?;
            }
        }
        Ok(record)
    }

    /// Steps until termination, handing each record to `on_record`.
    pub fn run(
        &mut self,
        mut on_record: impl FnMut(&IterationRecord),
    ) -> Result<(), EngineError> {
        while !self.is_done() {
            let record = self.step()?;
            on_record(&record);
        }
        Ok(())
    }

    pub fn save(&self, path: &Path) -> Result<(), EngineError> {
        let meta = (!self.meta.is_empty()).then_some(self.meta.as_slice());
        save_checkpoint(
            path,
            &self.state,
            &self.graph,
            &self.config,
            meta,
            &self.history,
        )
    }
}

/// `<dir>/checkpoint-<iter>.ckpt`, zero-padded to six digits.
pub fn checkpoint_path(dir: &Path, iteration: u64) -> PathBuf {
    dir.join(format!("checkpoint-{iteration:06}.ckpt"))
}

/// Initializes and trains to termination.
pub fn train(
    corpus: &Corpus,
    config: TrainConfig,
) -> Result<(ModelState, MetricHistory), EngineError> {
    let mut trainer = Trainer::new(corpus, config)?;
    trainer.run(|_| {})?;
    let (_, state, history) = trainer.into_parts();
    Ok((state, history))
}
