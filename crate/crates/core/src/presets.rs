//! Raw taxonomies, dataset profiles and a seeded toy-data generator.
//!
//! The generator produces small but complete inputs for a benchmark build:
//! a raw schema, annotated train/dev/test splits, an embedding store that
//! covers every name token, and a co-occurrence corpus in which each sub
//! node's name tokens keep company with one analog word.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use rand_core::RngCore;
use serde::{Deserialize, Serialize};

use crate::corpus::{Annotation, Argument, Entity, Event, Example, Mention, Relation, SplitSet};
use crate::embed::EmbeddingStore;
use crate::evolve::{iteration_rng, uniform01, uniform_index, EvolutionConfig, Strategy};
use crate::schema::{Role, SchemaBuilder, SchemaError, SchemaGraph, Task, SYNTHETIC_ENTITY_TYPE};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Dataset {
    Nerd,
    Nyt,
    Ace,
}

impl Dataset {
    pub const ALL: [Dataset; 3] = [Dataset::Nerd, Dataset::Nyt, Dataset::Ace];

    pub fn task(self) -> Task {
        match self {
            Dataset::Nerd => Task::Ner,
            Dataset::Nyt => Task::Re,
            Dataset::Ace => Task::Ee,
        }
    }

    pub fn raw_schema(self) -> SchemaGraph {
        match self {
            Dataset::Nerd => nerd_schema(),
            Dataset::Nyt => nyt_schema(),
            Dataset::Ace => ace_schema(),
        }
    }

    /// Published split sizes and taxonomy shape.
    pub fn profile(self) -> DatasetProfile {
        match self {
            Dataset::Nerd => DatasetProfile {
                majors: 8,
                subs: 66,
                train: 131_767,
                dev: 18_824,
                test: 37_648,
            },
            Dataset::Nyt => DatasetProfile {
                majors: 4,
                subs: 24,
                train: 56_196,
                dev: 5_000,
                test: 5_000,
            },
            Dataset::Ace => DatasetProfile {
                majors: 8,
                subs: 33,
                train: 19_216,
                dev: 901,
                test: 676,
            },
        }
    }

    /// Published (#Init, #Add, #N) for one strategy. Analogous rows have no
    /// #Add; the rename count per iteration defaults to 3.
    pub fn schedule(self, strategy: Strategy) -> Schedule {
        let growth = match self {
            Dataset::Nerd => Schedule {
                n_init: 30,
                n_iter: 6,
                iterations: 7,
            },
            Dataset::Nyt => Schedule {
                n_init: 10,
                n_iter: 2,
                iterations: 8,
            },
            Dataset::Ace => Schedule {
                n_init: 15,
                n_iter: 3,
                iterations: 7,
            },
        };
        match strategy {
            Strategy::Analogous => Schedule {
                n_init: self.profile().subs,
                n_iter: ANALOGOUS_RENAMES,
                iterations: 7,
            },
            _ => growth,
        }
    }

    pub fn config(self, strategy: Strategy, seed: u64) -> EvolutionConfig {
        let s = self.schedule(strategy);
        EvolutionConfig::new(strategy, seed, s.iterations, s.n_init, s.n_iter)
    }
}

/// Renames per analogous iteration.
pub const ANALOGOUS_RENAMES: usize = 3;

impl fmt::Display for Dataset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Dataset::Nerd => "nerd",
            Dataset::Nyt => "nyt",
            Dataset::Ace => "ace",
        })
    }
}

impl FromStr for Dataset {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        Dataset::ALL
            .into_iter()
            .find(|d| d.to_string() == s.to_lowercase())
            .ok_or_else(|| format!("unknown dataset {s:?}; expected nerd, nyt or ace"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DatasetProfile {
    pub majors: usize,
    pub subs: usize,
    pub train: usize,
    pub dev: usize,
    pub test: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Schedule {
    pub n_init: usize,
    pub n_iter: usize,
    pub iterations: usize,
}

const NERD: &[(&str, &[&str])] = &[
    (
        "art",
        &[
            "broadcastprogram",
            "film",
            "music",
            "art other",
            "painting",
            "writtenart",
        ],
    ),
    (
        "building",
        &[
            "airport",
            "hospital",
            "hotel",
            "library",
            "building other",
            "restaurant",
            "sportsfacility",
            "theater",
        ],
    ),
    (
        "event",
        &[
            "attack/battle/war/militaryconflict",
            "disaster",
            "election",
            "event other",
            "protest",
            "sportsevent",
        ],
    ),
    (
        "location",
        &[
            "gpe",
            "bodiesofwater",
            "island",
            "mountain",
            "location other",
            "park",
            "road/railway/highway/transit",
        ],
    ),
    (
        "organization",
        &[
            "company",
            "education",
            "government/governmentagency",
            "media/newspaper",
            "organization other",
            "politicalparty",
            "religion",
            "showorganization",
            "sportsleague",
            "sportsteam",
        ],
    ),
    (
        "other",
        &[
            "astronomything",
            "award",
            "biologything",
            "chemicalthing",
            "currency",
            "disease",
            "educationaldegree",
            "god",
            "language",
            "law",
            "livingthing",
            "medical",
        ],
    ),
    (
        "person",
        &[
            "actor",
            "artist/author",
            "athlete",
            "director",
            "person other",
            "politician",
            "scholar",
            "soldier",
        ],
    ),
    (
        "product",
        &[
            "airplane",
            "car",
            "food",
            "game",
            "product other",
            "ship",
            "software",
            "train",
            "weapon",
        ],
    ),
];

const NYT: &[(&str, &[&str])] = &[
    (
        "geography",
        &[
            "contains",
            "capital",
            "neighborhood of",
            "administrative divisions",
            "country",
        ],
    ),
    (
        "person",
        &[
            "nationality",
            "place lived",
            "birth place",
            "place of death",
            "children",
            "religion",
            "ethnicity",
            "geographic distribution",
            "people",
            "profession",
        ],
    ),
    (
        "business",
        &[
            "company",
            "founders",
            "place founded",
            "major shareholders",
            "major shareholder of",
            "advisors",
            "industry",
        ],
    ),
    ("sports", &["location", "teams"]),
];

const ACE: &[(&str, &[&str])] = &[
    ("life", &["be born", "marry", "divorce", "injure", "die"]),
    ("movement", &["transport"]),
    ("transaction", &["transfer ownership", "transfer money"]),
    (
        "business",
        &[
            "start organization",
            "merge organization",
            "declare bankruptcy",
            "end organization",
        ],
    ),
    ("conflict", &["attack", "demonstrate"]),
    ("contact", &["meet", "phone write"]),
    (
        "personnel",
        &["start position", "end position", "nominate", "elect"],
    ),
    (
        "justice",
        &[
            "arrest jail",
            "release parole",
            "trial hearing",
            "charge indict",
            "sue",
            "convict",
            "sentence",
            "fine",
            "execute",
            "extradite",
            "acquit",
            "appeal",
            "pardon",
        ],
    ),
];

const ACE_ROLES: &[(&str, &[&str])] = &[
    ("be born", &["person", "place"]),
    ("marry", &["person", "place"]),
    ("divorce", &["person", "place"]),
    ("injure", &["agent", "victim", "instrument", "place"]),
    ("die", &["agent", "victim", "instrument", "place"]),
    (
        "transport",
        &["artifact", "vehicle", "agent", "origin", "destination"],
    ),
    (
        "transfer ownership",
        &["buyer", "seller", "beneficiary", "artifact", "place"],
    ),
    (
        "transfer money",
        &["giver", "recipient", "beneficiary", "place"],
    ),
    ("start organization", &["agent", "org", "place"]),
    ("merge organization", &["org", "place"]),
    ("declare bankruptcy", &["org", "place"]),
    ("end organization", &["org", "place"]),
    ("attack", &["attacker", "target", "instrument", "place"]),
    ("demonstrate", &["entity", "place"]),
    ("meet", &["entity", "place"]),
    ("phone write", &["entity"]),
    ("start position", &["person", "entity", "place"]),
    ("end position", &["person", "entity", "place"]),
    ("nominate", &["person", "agent"]),
    ("elect", &["person", "entity", "place"]),
    ("arrest jail", &["person", "agent", "place"]),
    ("release parole", &["person", "entity", "place"]),
    (
        "trial hearing",
        &["defendant", "prosecutor", "adjudicator", "place"],
    ),
    (
        "charge indict",
        &["defendant", "prosecutor", "adjudicator", "place"],
    ),
    ("sue", &["plaintiff", "defendant", "adjudicator", "place"]),
    ("convict", &["defendant", "adjudicator", "place"]),
    ("sentence", &["defendant", "adjudicator", "place"]),
    ("fine", &["entity", "adjudicator", "place"]),
    ("execute", &["person", "agent", "place"]),
    ("extradite", &["agent", "person", "destination", "origin"]),
    ("acquit", &["defendant", "adjudicator"]),
    ("appeal", &["plaintiff", "adjudicator", "place"]),
    ("pardon", &["defendant", "adjudicator", "place"]),
];

/// Single-word analogs for ACE event types, used by the toy corpus.
const ACE_ANALOGS: &[(&str, &str)] = &[
    ("start position", "begin"),
    ("transport", "carry"),
    ("divorce", "separate"),
    ("charge indict", "prosecute"),
    ("transfer money", "remittance"),
    ("die", "perish"),
    ("execute", "perform"),
    ("sentence", "condemn"),
    ("meet", "encounter"),
    ("transfer ownership", "giveaway"),
    ("demonstrate", "parade"),
    ("elect", "vote"),
    ("injure", "hurt"),
    ("phone write", "communication"),
    ("marry", "wed"),
];

fn taxonomy(
    task: Task,
    role: Role,
    majors: &[(&str, &[&str])],
) -> Result<SchemaBuilder, SchemaError> {
    let mut b = SchemaBuilder::new(task);
    for (major, subs) in majors {
        b = b.major(major, role)?;
        for s in *subs {
            b = b.sub(s, major)?;
        }
    }
    Ok(b)
}

/// NERD: 8 coarse and 66 fine entity types.
pub fn nerd_schema() -> SchemaGraph {
    taxonomy(Task::Ner, Role::EntityType, NERD)
        .and_then(SchemaBuilder::build)
        .expect("NERD taxonomy is well formed")
}

/// NYT: 4 relation groups over 24 relations. Entity types are not
/// annotated, so the single synthetic type stands in for all of them.
pub fn nyt_schema() -> SchemaGraph {
    taxonomy(Task::Re, Role::Relation, NYT)
        .and_then(SchemaBuilder::build)
        .expect("NYT taxonomy is well formed")
}

/// ACE 2005: 8 event categories over 33 event types, with argument roles.
pub fn ace_schema() -> SchemaGraph {
    let mut roles: BTreeSet<&str> = BTreeSet::new();
    for (_, rs) in ACE_ROLES {
        roles.extend(rs.iter());
    }
    let build = || -> Result<SchemaGraph, SchemaError> {
        let mut b = taxonomy(Task::Ee, Role::EventType, ACE)?;
        for r in &roles {
            b = b.major(r, Role::ArgRole)?;
        }
        for (evt, rs) in ACE_ROLES {
            b = b.event_roles(evt, rs);
        }
        b.build()
    };
    build().expect("ACE taxonomy is well formed")
}

/// Sizes of a generated toy dataset.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ToySizes {
    pub train: usize,
    pub dev: usize,
    pub test: usize,
    /// Co-occurrence sentences per sub node.
    pub corpus_per_node: usize,
}

impl Default for ToySizes {
    fn default() -> Self {
        ToySizes {
            train: 80,
            dev: 40,
            test: 40,
            corpus_per_node: 4,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ToyData {
    pub raw: SchemaGraph,
    pub splits: SplitSet,
    pub store: EmbeddingStore,
    /// Tokenized sentences for co-occurrence counting.
    pub corpus: Vec<Vec<String>>,
}

pub const TOY_DIM: usize = 8;

const SYLLABLES: [&str; 16] = [
    "ka", "lo", "mi", "nu", "pe", "ra", "si", "to", "vu", "xe", "zo", "bri", "dag", "fen", "gul",
    "hap",
];

fn gauss(rng: &mut impl RngCore) -> f64 {
    let (u1, u2) = (uniform01(rng).max(1e-12), uniform01(rng));
    (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
}

fn pseudo_word(rng: &mut impl RngCore, syllables: usize) -> String {
    (0..syllables)
        .map(|_| SYLLABLES[uniform_index(rng, SYLLABLES.len())])
        .collect()
}

struct Words<'a, R: RngCore> {
    rng: &'a mut R,
    used: BTreeSet<String>,
    counter: usize,
}

impl<R: RngCore> Words<'_, R> {
    /// A capitalized token never handed out before.
    fn mention_token(&mut self) -> String {
        self.counter += 1;
        let mut w = pseudo_word(self.rng, 2);
        w[..1].make_ascii_uppercase();
        format!("{w}{}", self.counter)
    }

    /// A lowercase word that is neither a schema token nor seen before.
    fn fresh(&mut self) -> String {
        loop {
            let w = pseudo_word(self.rng, 3);
            if self.used.insert(w.clone()) {
                return w;
            }
        }
    }
}

struct SentenceBuilder {
    tokens: Vec<String>,
}

impl SentenceBuilder {
    fn push_filler(&mut self, w: &str) {
        self.tokens.push(w.to_string());
    }

    fn push_mention(&mut self, words: Vec<String>) -> (usize, usize, String) {
        let start: usize = self.tokens.iter().map(|t| t.chars().count() + 1).sum();
        let text = words.join(" ");
        let end = start + text.chars().count();
        self.tokens.extend(words);
        (start, end, text)
    }

    fn text(&self) -> String {
        self.tokens.join(" ")
    }
}

fn mention(sb: &mut SentenceBuilder, w: &mut Words<'_, impl RngCore>, max_len: usize) -> Mention {
    let n = 1 + uniform_index(w.rng, max_len);
    let words = (0..n).map(|_| w.mention_token()).collect();
    let (s, e, t) = sb.push_mention(words);
    Mention::new(t, s, e)
}

/// Deterministic toy inputs for one dataset's raw taxonomy.
pub fn toy_dataset(dataset: Dataset, seed: u64, sizes: ToySizes) -> ToyData {
    let raw = dataset.raw_schema();
    let task = raw.task();
    let mut rng = iteration_rng(seed, 0);
    let mut schema_tokens: BTreeSet<String> = BTreeSet::new();
    for n in raw.nodes() {
        schema_tokens.extend(n.name.tokens().iter().cloned());
    }

    // embeddings: each major gets a base direction, subs sit near it
    let mut store = EmbeddingStore::new(TOY_DIM);
    let mut nodes: Vec<_> = raw.nodes().filter(|n| n.role.is_some()).collect();
    nodes.sort_by(|a, b| a.id.cmp(&b.id));
    let mut bases = std::collections::BTreeMap::new();
    for n in nodes
        .iter()
        .filter(|n| n.parent.as_ref().is_some_and(|p| p.as_str() == "root"))
    {
        let base: Vec<f64> = (0..TOY_DIM).map(|_| gauss(&mut rng)).collect();
        bases.insert(n.id.clone(), base);
    }
    for n in &nodes {
        let base = n
            .parent
            .as_ref()
            .and_then(|p| bases.get(p))
            .or_else(|| bases.get(&n.id))
            .cloned()
            .unwrap_or_else(|| vec![0.0; TOY_DIM]);
        for tok in n.name.tokens() {
            if store.get(tok).is_none() {
                let v: Vec<f64> = base.iter().map(|b| b + 0.35 * gauss(&mut rng)).collect();
                store.insert(tok.clone(), v).expect("finite toy vector");
            }
        }
    }

    let mut words = Words {
        rng: &mut rng,
        used: schema_tokens.clone(),
        counter: 0,
    };
    let fillers: Vec<String> = (0..24).map(|_| words.fresh()).collect();

    // co-occurrence corpus
    let mut corpus = Vec::new();
    let mut subs: Vec<_> = raw.primary_subs().collect();
    subs.sort_by(|a, b| a.id.cmp(&b.id));
    for n in &subs {
        let name = n.name.to_string();
        let analog = ACE_ANALOGS
            .iter()
            .find(|(k, _)| *k == name && dataset == Dataset::Ace)
            .map(|(_, v)| v.to_string())
            .filter(|v| !words.used.contains(v))
            .unwrap_or_else(|| words.fresh());
        words.used.insert(analog.clone());
        for _ in 0..sizes.corpus_per_node {
            let mut s: Vec<String> = Vec::new();
            s.push(fillers[uniform_index(words.rng, fillers.len())].clone());
            s.extend(n.name.tokens().iter().cloned());
            s.push(analog.clone());
            s.push(fillers[uniform_index(words.rng, fillers.len())].clone());
            corpus.push(s);
        }
    }
    for _ in 0..subs.len() {
        let len = 4 + uniform_index(words.rng, 4);
        corpus.push(
            (0..len)
                .map(|_| fillers[uniform_index(words.rng, fillers.len())].clone())
                .collect(),
        );
    }

    let sub_names: Vec<String> = subs.iter().map(|n| n.name.to_string()).collect();
    let make_split = |prefix: &str, count: usize, words: &mut Words<'_, _>| -> Vec<Example> {
        (0..count)
            .map(|k| {
                let mut sb = SentenceBuilder { tokens: Vec::new() };
                let mut anns = Vec::new();
                let records = 1 + uniform_index(words.rng, 2);
                for _ in 0..records {
                    let label = sub_names[uniform_index(words.rng, sub_names.len())].clone();
                    sb.push_filler(&fillers[uniform_index(words.rng, fillers.len())]);
                    match task {
                        Task::Ner => {
                            let m = mention(&mut sb, words, 2);
                            anns.push(Annotation::Entity(Entity { mention: m, label }));
                        }
                        Task::Re => {
                            let head = mention(&mut sb, words, 2);
                            sb.push_filler(&fillers[uniform_index(words.rng, fillers.len())]);
                            let tail = mention(&mut sb, words, 2);
                            anns.push(Annotation::Relation(Relation {
                                head,
                                head_type: SYNTHETIC_ENTITY_TYPE.into(),
                                relation: label,
                                tail,
                                tail_type: SYNTHETIC_ENTITY_TYPE.into(),
                            }));
                        }
                        Task::Ee => {
                            let trigger = mention(&mut sb, words, 1);
                            let roles: Vec<String> = ACE_ROLES
                                .iter()
                                .find(|(e, _)| *e == label)
                                .map(|(_, rs)| rs.iter().map(|r| r.to_string()).collect())
                                .unwrap_or_default();
                            let n_args = uniform_index(words.rng, roles.len().min(2) + 1);
                            let mut args = Vec::new();
                            for role in roles.iter().take(n_args) {
                                sb.push_filler(&fillers[uniform_index(words.rng, fillers.len())]);
                                let m = mention(&mut sb, words, 2);
                                args.push(Argument {
                                    mention: m,
                                    role: role.clone(),
                                });
                            }
                            anns.push(Annotation::Event(Event {
                                trigger,
                                label,
                                args,
                            }));
                        }
                    }
                }
                sb.push_filler(".");
                let mut ex = Example::new(format!("{prefix}-{k:05}"), sb.text());
                ex.annotations = anns;
                ex.validate(true).expect("generated example is valid");
                ex
            })
            .collect()
    };
    let splits = SplitSet {
        train: make_split("train", sizes.train, &mut words),
        dev: make_split("dev", sizes.dev, &mut words),
        test: make_split("test", sizes.test, &mut words),
    };
    ToyData {
        raw,
        splits,
        store,
        corpus,
    }
}
