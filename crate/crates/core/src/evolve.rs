//! Seeded schema evolution and per-iteration benchmark construction.
//!
//! Iteration 1 samples an initial schema from the raw taxonomy; every later
//! iteration applies one expansion step. Growth strategies (horizontal,
//! vertical, hybrid) add sub nodes of the task's primary role; the analogous
//! strategy renames them. Nodes of the auxiliary roles (entity types for RE,
//! argument roles for EE) are always present.
//!
//! All randomness comes from ChaCha8 seeded with `seed_from_u64(seed)` and
//! switched to stream `i` for iteration `i`, so each iteration's draws are
//! independent of how many draws earlier iterations made.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::Path;

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{filter_with, save_jsonl, CorpusError, Example, SplitSet};
use crate::embed::{cosine, node_vector, npmi, CoocTable, EmbedError, EmbeddingStore};
use crate::schema::{
    LabelProjection, Level, Name, NodeId, SchemaError, SchemaGraph, SchemaNode, RESERVED_SURFACES,
};

/// Identifier of the random stream construction, recorded in manifests.
pub const PRNG_ID: &str = "chacha8/rand_chacha-0.3/seed_from_u64(seed)/stream=iteration";

#[derive(Debug, Error)]
pub enum EvolveError {
    #[error("invalid config: {0}")]
    Config(String),
    #[error("raw schema is invalid: {0}")]
    InvalidRaw(String),
    #[error("need {needed} {what} but only {available} available (short by {})", .needed - .available)]
    Insufficient {
        what: &'static str,
        needed: usize,
        available: usize,
    },
    #[error("no candidate has an embedding for any of its name tokens")]
    NoEmbeddings,
    #[error("{0} strategy needs {1}")]
    MissingInput(Strategy, &'static str),
    #[error(transparent)]
    Schema(#[from] SchemaError),
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error(transparent)]
    Embed(#[from] EmbedError),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Strategy {
    Horizontal,
    Vertical,
    Hybrid,
    Analogous,
}

impl Strategy {
    pub const ALL: [Strategy; 4] = [
        Strategy::Horizontal,
        Strategy::Vertical,
        Strategy::Hybrid,
        Strategy::Analogous,
    ];

    pub fn is_growth(self) -> bool {
        self != Strategy::Analogous
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Strategy::Horizontal => "horizontal",
            Strategy::Vertical => "vertical",
            Strategy::Hybrid => "hybrid",
            Strategy::Analogous => "analogous",
        })
    }
}

impl std::str::FromStr for Strategy {
    type Err = EvolveError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Strategy::ALL
            .into_iter()
            .find(|x| x.to_string() == s)
            .ok_or_else(|| EvolveError::Config(format!("unknown strategy {s:?}")))
    }
}

/// How a horizontal candidate's similarities to the current nodes combine.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Aggregation {
    #[default]
    Max,
    Mean,
}

fn default_alpha() -> f64 {
    0.5
}
fn default_threshold() -> f64 {
    0.3
}
fn default_eps() -> f64 {
    crate::embed::DEFAULT_EPS
}
fn default_gamma() -> f64 {
    crate::embed::DEFAULT_GAMMA
}
fn default_window() -> usize {
    crate::embed::DEFAULT_WINDOW
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvolutionConfig {
    pub strategy: Strategy,
    pub seed: u64,
    pub iterations: usize,
    pub n_init: usize,
    /// Sub nodes added (growth) or renamed (analogous) per iteration.
    pub n_iter: usize,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    #[serde(default = "default_threshold")]
    pub analogous_threshold: f64,
    #[serde(default = "default_eps")]
    pub eps: f64,
    #[serde(default = "default_gamma")]
    pub gamma: f64,
    #[serde(default = "default_window")]
    pub window: usize,
    #[serde(default)]
    pub aggregation: Aggregation,
}

impl EvolutionConfig {
    pub fn new(
        strategy: Strategy,
        seed: u64,
        iterations: usize,
        n_init: usize,
        n_iter: usize,
    ) -> Self {
        EvolutionConfig {
            strategy,
            seed,
            iterations,
            n_init,
            n_iter,
            alpha: default_alpha(),
            analogous_threshold: default_threshold(),
            eps: default_eps(),
            gamma: default_gamma(),
            window: default_window(),
            aggregation: Aggregation::Max,
        }
    }

    /// Checks the config against the raw taxonomy it will run on.
    pub fn validate(&self, raw: &SchemaGraph) -> Result<(), EvolveError> {
        let subs = raw.primary_subs().count();
        if self.iterations == 0 {
            return Err(EvolveError::Config("iterations must be positive".into()));
        }
        if self.n_init == 0 || self.n_iter == 0 {
            return Err(EvolveError::Config(
                "n_init and n_iter must be positive".into(),
            ));
        }
        if !(0.0..=1.0).contains(&self.alpha) {
            return Err(EvolveError::Config(format!(
                "alpha {} outside [0, 1]",
                self.alpha
            )));
        }
        if self.window == 0 {
            return Err(EvolveError::Config("window must be at least 1".into()));
        }
        let needed = if self.strategy.is_growth() {
            self.n_init + (self.iterations - 1) * self.n_iter
        } else {
            self.n_init.max(self.n_iter)
        };
        if needed > subs {
            return Err(EvolveError::Insufficient {
                what: "sub nodes",
                needed,
                available: subs,
            });
        }
        Ok(())
    }
}

/// The random stream for iteration `i`.
pub fn iteration_rng(seed: u64, i: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(i as u64);
    rng
}

/// Uniform integer in `0..n` by rejection on 64-bit draws. `n > 0`.
pub fn uniform_index(rng: &mut impl RngCore, n: usize) -> usize {
    let n = n as u64;
    let zone = u64::MAX - (u64::MAX % n + 1) % n;
    loop {
        let x = rng.next_u64();
        if x <= zone {
            return (x % n) as usize;
        }
    }
}

/// Uniform real in `[0, 1)` from the top 53 bits of one draw.
pub fn uniform01(rng: &mut impl RngCore) -> f64 {
    (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// `k` distinct items by partial Fisher-Yates, in draw order. `k <= items.len()`.
pub fn sample_k<T: Clone>(rng: &mut impl RngCore, items: &[T], k: usize) -> Vec<T> {
    let mut pool = items.to_vec();
    for i in 0..k {
        let j = i + uniform_index(rng, pool.len() - i);
        pool.swap(i, j);
    }
    pool.truncate(k);
    pool
}

/// Sort key that makes candidate order independent of map iteration order.
fn by_name(nodes: &mut [&SchemaNode]) {
    nodes.sort_by(|a, b| a.name.cmp(&b.name).then_with(|| a.id.cmp(&b.id)));
}

fn auxiliary_ids(raw: &SchemaGraph) -> impl Iterator<Item = NodeId> + '_ {
    let primary = raw.task().primary_role();
    raw.nodes()
        .filter(move |n| n.role.is_some() && n.role != Some(primary))
        .map(|n| n.id.clone())
}

/// `current` plus `added` and their parents, as a restriction of `raw`.
fn grow(raw: &SchemaGraph, current: &SchemaGraph, added: &[NodeId], version: u32) -> SchemaGraph {
    let mut keep: BTreeSet<NodeId> = current.nodes().map(|n| n.id.clone()).collect();
    for id in added {
        keep.extend(
            raw.chain(id)
                .into_iter()
                .filter(|n| n.level != Level::Root)
                .map(|n| n.id.clone()),
        );
    }
    raw.restrict(&keep, version)
}

/// S_1: a seeded sample of `n_init` primary sub nodes with their parents.
/// Vertical runs start from every primary major instead of only the
/// parents of the sample. Analogous runs sample like horizontal ones.
pub fn init_schema(raw: &SchemaGraph, cfg: &EvolutionConfig) -> Result<SchemaGraph, EvolveError> {
    let mut subs: Vec<&SchemaNode> = raw.primary_subs().collect();
    if cfg.n_init > subs.len() {
        return Err(EvolveError::Insufficient {
            what: "sub nodes for initialization",
            needed: cfg.n_init,
            available: subs.len(),
        });
    }
    by_name(&mut subs);
    let mut rng = iteration_rng(cfg.seed, 1);
    let chosen = sample_k(&mut rng, &subs, cfg.n_init);
    let mut keep: BTreeSet<NodeId> = auxiliary_ids(raw).collect();
    for n in chosen {
        keep.insert(n.id.clone());
        keep.extend(
            n.parent
                .iter()
                .filter(|p| raw.node(p).is_some_and(|p| p.level == Level::Major))
                .cloned(),
        );
    }
    if cfg.strategy == Strategy::Vertical {
        keep.extend(raw.majors(raw.task().primary_role()).map(|n| n.id.clone()));
    }
    Ok(raw.restrict(&keep, 1))
}

/// Which branch produced an iteration.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Branch {
    Horizontal,
    Vertical,
    Analogous,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Expansion {
    pub schema: SchemaGraph,
    /// Sub nodes added, in selection order.
    pub added: Vec<NodeId>,
    pub branch: Branch,
}

fn unused_subs<'a>(s: &SchemaGraph, raw: &'a SchemaGraph) -> Vec<&'a SchemaNode> {
    let mut v: Vec<&SchemaNode> = raw.primary_subs().filter(|n| !s.contains(&n.id)).collect();
    by_name(&mut v);
    v
}

/// Adds the `n_iter` unused sub nodes most similar to the current schema.
/// A candidate's score is the max (or mean) cosine between its name vector
/// and those of the current primary-role nodes; ties go to the smaller name.
/// Candidates without any embedded token are skipped.
pub fn expand_horizontal(
    s: &SchemaGraph,
    raw: &SchemaGraph,
    store: &EmbeddingStore,
    n_iter: usize,
    aggregation: Aggregation,
) -> Result<Expansion, EvolveError> {
    let candidates = unused_subs(s, raw);
    if candidates.len() < n_iter {
        return Err(EvolveError::Insufficient {
            what: "unused sub nodes",
            needed: n_iter,
            available: candidates.len(),
        });
    }
    let anchors: Vec<Vec<f64>> = s
        .nodes_with_role(s.task().primary_role())
        .filter_map(|n| node_vector(n, store).ok().map(|v| v.vector))
        .collect();
    let scored: Vec<(f64, &SchemaNode)> = candidates
        .par_iter()
        .filter_map(|c| {
            let v = match node_vector(c, store) {
                Ok(v) => v.vector,
                Err(e) => {
                    log::warn!("skipping candidate {}: {e}", c.name);
                    return None;
                }
            };
            let sims: Vec<f64> = anchors.iter().filter_map(|a| cosine(&v, a).ok()).collect();
            let score = match (sims.is_empty(), aggregation) {
                (true, _) => f64::NEG_INFINITY,
                (false, Aggregation::Max) => sims.iter().copied().fold(f64::NEG_INFINITY, f64::max),
                (false, Aggregation::Mean) => sims.iter().sum::<f64>() / sims.len() as f64,
            };
            Some((score, *c))
        })
        .collect();
    if scored.is_empty() {
        return Err(EvolveError::NoEmbeddings);
    }
    if scored.len() < n_iter {
        return Err(EvolveError::Insufficient {
            what: "embeddable candidates",
            needed: n_iter,
            available: scored.len(),
        });
    }
    let mut scored = scored;
    scored.sort_by(|(sa, a), (sb, b)| {
        sb.total_cmp(sa)
            .then_with(|| a.name.cmp(&b.name))
            .then_with(|| a.id.cmp(&b.id))
    });
    let added: Vec<NodeId> = scored
        .iter()
        .take(n_iter)
        .map(|(_, n)| n.id.clone())
        .collect();
    Ok(Expansion {
        schema: grow(raw, s, &added, s.version() + 1),
        added,
        branch: Branch::Horizontal,
    })
}

fn vertical_eligible<'a>(s: &SchemaGraph, raw: &'a SchemaGraph) -> Vec<&'a SchemaNode> {
    unused_subs(s, raw)
        .into_iter()
        .filter(|n| n.parent.as_ref().is_some_and(|p| s.contains(p)))
        .collect()
}

/// Adds `n_iter` unused sub nodes drawn uniformly from those whose parent is
/// already present.
pub fn expand_vertical(
    s: &SchemaGraph,
    raw: &SchemaGraph,
    rng: &mut impl RngCore,
    n_iter: usize,
) -> Result<Expansion, EvolveError> {
    let eligible = vertical_eligible(s, raw);
    if eligible.len() < n_iter {
        return Err(EvolveError::Insufficient {
            what: "sub nodes under present parents",
            needed: n_iter,
            available: eligible.len(),
        });
    }
    let added: Vec<NodeId> = sample_k(rng, &eligible, n_iter)
        .into_iter()
        .map(|n| n.id.clone())
        .collect();
    Ok(Expansion {
        schema: grow(raw, s, &added, s.version() + 1),
        added,
        branch: Branch::Vertical,
    })
}

/// One draw `u`; `u < alpha` takes the horizontal branch, otherwise the
/// vertical one. A branch without enough eligible nodes falls back to the
/// other.
pub fn expand_hybrid(
    s: &SchemaGraph,
    raw: &SchemaGraph,
    store: &EmbeddingStore,
    rng: &mut impl RngCore,
    n_iter: usize,
    alpha: f64,
    aggregation: Aggregation,
) -> Result<Expansion, EvolveError> {
    let u = uniform01(rng);
    let horizontal_first = u < alpha;
    let vertical_ok = vertical_eligible(s, raw).len() >= n_iter;
    if horizontal_first || !vertical_ok {
        match expand_horizontal(s, raw, store, n_iter, aggregation) {
            Ok(e) => Ok(e),
            Err(e) if vertical_ok => {
                log::warn!("horizontal branch unavailable ({e}); using vertical");
                expand_vertical(s, raw, rng, n_iter)
            }
            Err(e) => Err(e),
        }
    } else {
        expand_vertical(s, raw, rng, n_iter)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Renaming {
    pub schema: SchemaGraph,
    pub mapping: BTreeMap<Name, Name>,
}

fn lexicon_word_ok(w: &str) -> bool {
    !RESERVED_SURFACES.contains(&w)
        && w.chars().all(|c| c.is_alphabetic() && !c.is_uppercase())
        && !w.is_empty()
}

/// Renames up to `n_iter` sub nodes drawn uniformly from those not in
/// `renamed` (nodes renamed by earlier iterations). Each takes the lexicon
/// word with the highest summed NPMI against its name tokens, provided the
/// score reaches `threshold`, the word is not one of its own tokens, and no
/// node is already (or is about to be) called that. Nodes without such a
/// word keep their name. The node count never changes.
#[allow(clippy::too_many_arguments)]
pub fn expand_analogous<S: AsRef<str>>(
    s: &SchemaGraph,
    renamed: &BTreeSet<NodeId>,
    lexicon: &[S],
    cooc: &CoocTable,
    rng: &mut impl RngCore,
    n_iter: usize,
    eps: f64,
    gamma: f64,
    threshold: f64,
) -> Result<Renaming, EvolveError> {
    let total = s.primary_subs().count();
    if total < n_iter {
        return Err(EvolveError::Insufficient {
            what: "sub nodes to rename",
            needed: n_iter,
            available: total,
        });
    }
    let mut subs: Vec<&SchemaNode> = s
        .primary_subs()
        .filter(|n| !renamed.contains(&n.id))
        .collect();
    by_name(&mut subs);
    let chosen = sample_k(rng, &subs, n_iter.min(subs.len()));
    let mut taken: BTreeSet<String> = s.nodes().map(|n| n.name.to_string()).collect();
    let mut mapping = BTreeMap::new();
    for node in chosen {
        let own = node.name.tokens();
        let mut best: Option<(f64, &str)> = None;
        for w in lexicon.iter().map(AsRef::as_ref) {
            if !lexicon_word_ok(w) || own.iter().any(|t| t == w) || taken.contains(w) {
                continue;
            }
            let score: Result<f64, EmbedError> =
                own.iter().map(|t| npmi(t, w, cooc, eps, gamma)).sum();
            let score = match score {
                Ok(x) => x,
                Err(e) => {
                    log::debug!("no score for {} -> {w}: {e}", node.name);
                    continue;
                }
            };
            if score >= threshold && best.is_none_or(|(b, bw)| score > b || (score == b && w < bw))
            {
                best = Some((score, w));
            }
        }
        if let Some((_, w)) = best {
            let new = Name::parse(w)?;
            taken.insert(w.to_string());
            mapping.insert(node.name.clone(), new);
        }
    }
    Ok(Renaming {
        schema: s.apply_rename(&mapping)?,
        mapping,
    })
}

/// One iteration of a built benchmark.
#[derive(Debug, Clone, PartialEq)]
pub struct IterationArtifact {
    pub index: usize,
    pub schema: SchemaGraph,
    pub dev: Vec<Example>,
    pub test: Vec<Example>,
    /// Present for iteration 1 only.
    pub train: Option<Vec<Example>>,
    pub added: Vec<NodeId>,
    pub renamed: BTreeMap<Name, Name>,
    pub branch: Option<Branch>,
}

/// Everything a build reads besides the config.
#[derive(Debug, Clone, Copy)]
pub struct BenchmarkInputs<'a> {
    pub raw: &'a SchemaGraph,
    pub splits: &'a SplitSet,
    pub store: Option<&'a EmbeddingStore>,
    pub cooc: Option<&'a CoocTable>,
    /// Replacement words for analogous runs; defaults to the cooc vocabulary.
    pub lexicon: Option<&'a [String]>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Benchmark {
    pub config: EvolutionConfig,
    pub artifacts: Vec<IterationArtifact>,
}

fn project_split(
    examples: &[Example],
    projection: &LabelProjection,
    schema: &SchemaGraph,
    drop_empty: bool,
) -> Result<Vec<Example>, EvolveError> {
    let mut out = filter_with(examples, projection, schema, drop_empty)?;
    out.sort_by(|a, b| a.id.cmp(&b.id));
    Ok(out)
}

/// Runs the configured strategy for `cfg.iterations` iterations and projects
/// the raw splits onto each schema. Train data is emitted for iteration 1
/// only (examples left without annotations are dropped); dev and test keep
/// every sentence so their id sets match across iterations.
pub fn build_benchmark(
    inputs: BenchmarkInputs<'_>,
    cfg: &EvolutionConfig,
) -> Result<Benchmark, EvolveError> {
    let raw = inputs.raw;
    let problems = raw.validate();
    if !problems.is_empty() {
        let list: Vec<String> = problems.iter().map(ToString::to_string).collect();
        return Err(EvolveError::InvalidRaw(list.join("; ")));
    }
    cfg.validate(raw)?;
    let need_store =
        matches!(cfg.strategy, Strategy::Horizontal | Strategy::Hybrid) && cfg.iterations > 1;
    if need_store && inputs.store.is_none() {
        return Err(EvolveError::MissingInput(
            cfg.strategy,
            "an embedding store",
        ));
    }
    let vocabulary: Vec<String>;
    let lexicon: &[String] = match (cfg.strategy, inputs.lexicon, inputs.cooc) {
        (Strategy::Analogous, _, None) if cfg.iterations > 1 => {
            return Err(EvolveError::MissingInput(
                cfg.strategy,
                "a co-occurrence table",
            ));
        }
        (_, Some(l), _) => l,
        (_, None, Some(c)) => {
            vocabulary = c.vocabulary().map(str::to_string).collect();
            &vocabulary
        }
        (_, None, None) => &[],
    };

    let mut artifacts = Vec::with_capacity(cfg.iterations);
    let mut schema = init_schema(raw, cfg)?;
    let mut renamed_ids: BTreeSet<NodeId> = BTreeSet::new();
    for i in 1..=cfg.iterations {
        let (mut added, mut renamed, mut branch) = (Vec::new(), BTreeMap::new(), None);
        if i == 1 {
            added = schema.primary_subs().map(|n| n.id.clone()).collect();
        } else {
            let mut rng = iteration_rng(cfg.seed, i);
            match cfg.strategy {
                Strategy::Analogous => {
                    let cooc = inputs.cooc.expect("checked above");
                    let r = expand_analogous(
                        &schema,
                        &renamed_ids,
                        lexicon,
                        cooc,
                        &mut rng,
                        cfg.n_iter,
                        cfg.eps,
                        cfg.gamma,
                        cfg.analogous_threshold,
                    )?;
                    renamed_ids.extend(
                        r.mapping
                            .keys()
                            .filter_map(|old| schema.find_by_name(old))
                            .map(|n| n.id.clone()),
                    );
                    schema = r.schema;
                    renamed = r.mapping;
                    branch = Some(Branch::Analogous);
                }
                strategy => {
                    let store = inputs.store.expect("checked above");
                    let e = match strategy {
                        Strategy::Horizontal => {
                            expand_horizontal(&schema, raw, store, cfg.n_iter, cfg.aggregation)?
                        }
                        Strategy::Vertical => expand_vertical(&schema, raw, &mut rng, cfg.n_iter)?,
                        _ => expand_hybrid(
                            &schema,
                            raw,
                            store,
                            &mut rng,
                            cfg.n_iter,
                            cfg.alpha,
                            cfg.aggregation,
                        )?,
                    };
                    schema = e.schema;
                    added = e.added;
                    branch = Some(e.branch);
                }
            }
        }
        debug_assert_eq!(schema.version() as usize, i);
        let projection = LabelProjection::new(raw, &schema);
        let train = if i == 1 {
            Some(project_split(
                &inputs.splits.train,
                &projection,
                &schema,
                true,
            )?)
        } else {
            None
        };
        artifacts.push(IterationArtifact {
            index: i,
            dev: project_split(&inputs.splits.dev, &projection, &schema, false)?,
            test: project_split(&inputs.splits.test, &projection, &schema, false)?,
            train,
            schema: schema.clone(),
            added,
            renamed,
            branch,
        });
    }
    Ok(Benchmark {
        config: cfg.clone(),
        artifacts,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestIteration {
    pub i: usize,
    pub version: u32,
    pub branch: Option<Branch>,
    pub subs: usize,
    pub added: Vec<String>,
    pub renamed: BTreeMap<String, String>,
    pub nodes: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub prng: String,
    pub seed: u64,
    pub config: EvolutionConfig,
    pub iterations: Vec<ManifestIteration>,
}

impl Benchmark {
    pub fn manifest(&self) -> Manifest {
        let iterations = self
            .artifacts
            .iter()
            .map(|a| ManifestIteration {
                i: a.index,
                version: a.schema.version(),
                branch: a.branch,
                subs: a.schema.primary_subs().count(),
                added: a
                    .added
                    .iter()
                    .filter_map(|id| a.schema.node(id).map(|n| n.name.to_string()))
                    .collect(),
                renamed: a
                    .renamed
                    .iter()
                    .map(|(o, n)| (o.to_string(), n.to_string()))
                    .collect(),
                nodes: a.schema.nodes().map(|n| n.id.to_string()).collect(),
            })
            .collect();
        Manifest {
            prng: PRNG_ID.to_string(),
            seed: self.config.seed,
            config: self.config.clone(),
            iterations,
        }
    }

    /// Writes `iter_<i>/{schema.json,dev.jsonl,test.jsonl}`, `iter_1/train.jsonl`
    /// and `manifest.json` under `dir`, creating it if needed.
    pub fn write(&self, dir: impl AsRef<Path>) -> Result<(), EvolveError> {
        let dir = dir.as_ref();
        std::fs::create_dir_all(dir)?;
        for a in &self.artifacts {
            let sub = dir.join(format!("iter_{}", a.index));
            std::fs::create_dir_all(&sub)?;
            a.schema.save(sub.join("schema.json"))?;
            save_jsonl(&a.dev, sub.join("dev.jsonl"))?;
            save_jsonl(&a.test, sub.join("test.jsonl"))?;
            if let Some(train) = &a.train {
                save_jsonl(train, sub.join("train.jsonl"))?;
            }
        }
        let mut m = serde_json::to_string_pretty(&self.manifest()).expect("manifest serializes");
        m.push('\n');
        std::fs::write(dir.join("manifest.json"), m)?;
        Ok(())
    }
}
