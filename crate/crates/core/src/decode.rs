//! Schema-conditioned greedy decoding.
//!
//! A [`TypeTrie`] built from the current schema restricts every type
//! position to complete schema names, and a grammar state machine following
//! the [`crate::lineal`] grammar restricts every other position. Scores come
//! from a pluggable [`Scorer`]; the decoder takes the best admissible token.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;

use rayon::prelude::*;
use thiserror::Error;

use crate::corpus::{filter_with, Annotation, Example};
use crate::lineal::{delinearize, linearize, Diagnostic, LinealError, LinearSequence, StructToken};
use crate::schema::{LabelProjection, NodeId, Role, SchemaError, SchemaGraph, Task};

pub const DEFAULT_MAX_LEN: usize = 256;

#[derive(Debug, Error)]
pub enum DecodeError {
    #[error("dead end in state {state}; partial sequence: {partial}")]
    DeadEnd {
        state: String,
        partial: LinearSequence,
    },
    #[error("token {token:?} is not admissible in state {state}")]
    Inadmissible { token: String, state: String },
    #[error("scorer returned a non-finite score for {0:?}")]
    NonFiniteScore(String),
    #[error("max_len must be at least 2, got {0}")]
    MaxLenTooSmall(usize),
    #[error(transparent)]
    Lineal(#[from] LinealError),
    #[error(transparent)]
    Schema(#[from] SchemaError),
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
struct TrieNode {
    children: BTreeMap<String, TrieNode>,
    terminal: Option<NodeId>,
}

impl TrieNode {
    fn insert(&mut self, tokens: &[String], id: NodeId) {
        let mut cur = self;
        for t in tokens {
            cur = cur.children.entry(t.clone()).or_default();
        }
        cur.terminal = Some(id);
    }

    fn viable(&self, keep: &dyn Fn(&NodeId) -> bool) -> bool {
        self.terminal.as_ref().is_some_and(keep) || self.children.values().any(|c| c.viable(keep))
    }

    fn paths(&self, prefix: &mut Vec<String>, out: &mut BTreeSet<Vec<String>>) {
        if self.terminal.is_some() {
            out.insert(prefix.clone());
        }
        for (t, c) in &self.children {
            prefix.push(t.clone());
            c.paths(prefix, out);
            prefix.pop();
        }
    }
}

/// Per-category token tries over the names of one schema snapshot, with the
/// relation-triple and event-role tables of that snapshot.
#[derive(Debug, Clone)]
pub struct TypeTrie {
    task: Task,
    roots: HashMap<Role, TrieNode>,
    version: u32,
    /// Declared triples are exhaustive once there is at least one.
    constrained: bool,
    triples: BTreeSet<(NodeId, NodeId, NodeId)>,
    roles: BTreeMap<NodeId, BTreeSet<NodeId>>,
}

impl TypeTrie {
    pub fn build(schema: &SchemaGraph) -> TypeTrie {
        let mut roots: HashMap<Role, TrieNode> = HashMap::new();
        for role in [
            Role::EntityType,
            Role::Relation,
            Role::EventType,
            Role::ArgRole,
        ] {
            let root = roots.entry(role).or_default();
            for n in schema.nodes_with_role(role) {
                root.insert(n.name.tokens(), n.id.clone());
            }
        }
        TypeTrie {
            task: schema.task(),
            roots,
            version: schema.version(),
            constrained: !schema.re_constraints().is_empty(),
            triples: schema.re_constraints().clone(),
            roles: schema
                .ee_roles()
                .iter()
                .map(|(e, rs)| (e.clone(), rs.iter().cloned().collect()))
                .collect(),
        }
    }

    pub fn version(&self) -> u32 {
        self.version
    }

    pub fn task(&self) -> Task {
        self.task
    }

    /// Root-to-terminal token paths of one category.
    pub fn paths(&self, role: Role) -> BTreeSet<Vec<String>> {
        let mut out = BTreeSet::new();
        if let Some(r) = self.roots.get(&role) {
            r.paths(&mut Vec::new(), &mut out);
        }
        out
    }

    fn cursor(&self, role: Role, path: &[String]) -> Option<&TrieNode> {
        let mut cur = self.roots.get(&role)?;
        for t in path {
            cur = cur.children.get(t)?;
        }
        Some(cur)
    }

    fn relation_ok(&self, head: &NodeId, rel: &NodeId) -> bool {
        !self.constrained || self.triples.iter().any(|(h, r, _)| h == head && r == rel)
    }

    fn head_ok(&self, head: &NodeId) -> bool {
        let rels = self.roots.get(&Role::Relation);
        rels.is_some_and(|r| r.viable(&|rel| self.relation_ok(head, rel)))
    }

    fn tail_ok(&self, head: &NodeId, rel: &NodeId, tail: &NodeId) -> bool {
        !self.constrained
            || self
                .triples
                .contains(&(head.clone(), rel.clone(), tail.clone()))
    }

    fn role_ok(&self, event: &NodeId, role: &NodeId) -> bool {
        self.roles.get(event).is_some_and(|r| r.contains(role))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Slot {
    Type(Role),
    Mention,
}

fn template(task: Task) -> &'static [Slot] {
    match task {
        Task::Ner => &[Slot::Type(Role::EntityType), Slot::Mention],
        Task::Re => &[
            Slot::Type(Role::EntityType),
            Slot::Mention,
            Slot::Type(Role::Relation),
            Slot::Type(Role::EntityType),
            Slot::Mention,
        ],
        Task::Ee => &[
            Slot::Type(Role::EventType),
            Slot::Mention,
            Slot::Type(Role::ArgRole),
            Slot::Mention,
        ],
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Position {
    ExpectRecOrEos,
    InType { slot: usize, path: Vec<String> },
    InMention { slot: usize, len: usize },
    Done,
}

/// Where the decoder is in the record grammar, plus the types accepted so
/// far in the current record.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GrammarState {
    pub task: Task,
    pub position: Position,
    accepted: Vec<Option<NodeId>>,
}

impl GrammarState {
    pub fn new(task: Task) -> Self {
        GrammarState {
            task,
            position: Position::ExpectRecOrEos,
            accepted: vec![None; template(task).len()],
        }
    }

    pub fn is_done(&self) -> bool {
        self.position == Position::Done
    }

    fn type_filter<'a>(
        &'a self,
        trie: &'a TypeTrie,
        slot: usize,
    ) -> Box<dyn Fn(&NodeId) -> bool + 'a> {
        let acc = |i: usize| self.accepted[i].as_ref();
        match (self.task, slot) {
            (Task::Re, 0) => Box::new(move |h| trie.head_ok(h)),
            (Task::Re, 2) => match acc(0) {
                Some(h) => Box::new(move |r| trie.relation_ok(h, r)),
                None => Box::new(|_| false),
            },
            (Task::Re, 3) => match (acc(0), acc(2)) {
                (Some(h), Some(r)) => Box::new(move |t| trie.tail_ok(h, r, t)),
                _ => Box::new(|_| false),
            },
            (Task::Ee, 2) => match acc(0) {
                Some(e) => Box::new(move |r| trie.role_ok(e, r)),
                None => Box::new(|_| false),
            },
            _ => Box::new(|_| true),
        }
    }

    fn record_feasible(&self, trie: &TypeTrie, source_nonempty: bool) -> bool {
        let Slot::Type(role) = template(self.task)[0] else {
            unreachable!()
        };
        let filter = GrammarState::new(self.task);
        let keep = filter.type_filter(trie, 0);
        source_nonempty && trie.roots.get(&role).is_some_and(|r| r.viable(&*keep))
    }

    fn args_possible(&self, trie: &TypeTrie) -> bool {
        self.task == Task::Ee
            && self.accepted[0]
                .as_ref()
                .is_some_and(|e| trie.roles.get(e).is_some_and(|r| !r.is_empty()))
    }

    /// Tokens that close the mention in `slot`.
    fn closers(&self, trie: &TypeTrie, slot: usize, source_nonempty: bool) -> Vec<StructToken> {
        let last = slot + 1 == template(self.task).len();
        match self.task {
            Task::Ee => {
                let mut v = vec![StructToken::Eos];
                if self.record_feasible(trie, source_nonempty) {
                    v.push(StructToken::Rec);
                }
                if self.args_possible(trie) {
                    v.push(StructToken::Arg);
                }
                v
            }
            _ if last => {
                let mut v = vec![StructToken::Eos];
                if self.record_feasible(trie, source_nonempty) {
                    v.push(StructToken::Rec);
                }
                v
            }
            _ => vec![StructToken::Sep],
        }
    }
}

impl fmt::Display for GrammarState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.position {
            Position::ExpectRecOrEos => write!(f, "{}:expect-rec-or-eos", self.task),
            Position::InType { slot, path } => {
                let role = match template(self.task)[*slot] {
                    Slot::Type(r) => r.to_string(),
                    Slot::Mention => "?".into(),
                };
                write!(f, "{}:in-type({role}, {:?})", self.task, path.join(" "))
            }
            Position::InMention { slot, len } => {
                write!(f, "{}:in-mention(slot {slot}, {len} tokens)", self.task)
            }
            Position::Done => write!(f, "{}:done", self.task),
        }
    }
}

fn sort_tokens(v: &mut Vec<StructToken>) {
    v.sort_by(|a, b| a.tie_rank().cmp(&b.tie_rank()));
    v.dedup();
}

/// Tokens the grammar and the schema allow next, in tie-break order.
pub fn admissible_tokens(
    state: &GrammarState,
    trie: &TypeTrie,
    source: &[&str],
) -> Result<Vec<StructToken>, String> {
    let mut out = Vec::new();
    match &state.position {
        Position::Done => {}
        Position::ExpectRecOrEos => {
            out.push(StructToken::Eos);
            if state.record_feasible(trie, !source.is_empty()) {
                out.push(StructToken::Rec);
            }
        }
        Position::InType { slot, path } => {
            let Slot::Type(role) = template(state.task)[*slot] else {
                unreachable!()
            };
            let keep = state.type_filter(trie, *slot);
            if let Some(cur) = trie.cursor(role, path) {
                for (tok, child) in &cur.children {
                    if child.viable(&*keep) {
                        out.push(StructToken::word(tok.clone()));
                    }
                }
                if cur.terminal.as_ref().is_some_and(keep) {
                    out.push(StructToken::Sep);
                }
            }
        }
        Position::InMention { slot, len } => {
            out.extend(source.iter().map(|t| StructToken::word(*t)));
            if *len > 0 {
                out.extend(state.closers(trie, *slot, !source.is_empty()));
            }
        }
    }
    sort_tokens(&mut out);
    if out.is_empty() && !state.is_done() {
        return Err(state.to_string());
    }
    Ok(out)
}

/// Advances the state by one token. The token must be admissible.
pub fn advance(
    state: &GrammarState,
    trie: &TypeTrie,
    source: &[&str],
    token: &StructToken,
) -> Result<GrammarState, DecodeError> {
    let admissible = admissible_tokens(state, trie, source).unwrap_or_default();
    if !admissible.contains(token) {
        return Err(DecodeError::Inadmissible {
            token: token.surface().to_string(),
            state: state.to_string(),
        });
    }
    let slots = template(state.task);
    let mut next = state.clone();
    next.position = match (&state.position, token) {
        (_, StructToken::Eos) => Position::Done,
        (_, StructToken::Rec) => {
            next.accepted = vec![None; slots.len()];
            Position::InType {
                slot: 0,
                path: Vec::new(),
            }
        }
        (Position::InType { slot, path }, StructToken::Sep) => {
            let Slot::Type(role) = slots[*slot] else {
                unreachable!()
            };
            next.accepted[*slot] = trie.cursor(role, path).and_then(|c| c.terminal.clone());
            Position::InMention {
                slot: slot + 1,
                len: 0,
            }
            .pipe(|p| {
                if slots[slot + 1] == Slot::Mention {
                    p
                } else {
                    Position::InType {
                        slot: slot + 1,
                        path: Vec::new(),
                    }
                }
            })
        }
        (Position::InType { slot, path }, StructToken::Word(w)) => {
            let mut path = path.clone();
            path.push(w.clone());
            Position::InType { slot: *slot, path }
        }
        (Position::InMention { slot, .. }, StructToken::Sep) => Position::InType {
            slot: slot + 1,
            path: Vec::new(),
        },
        (Position::InMention { .. }, StructToken::Arg) => {
            next.accepted[2] = None;
            Position::InType {
                slot: 2,
                path: Vec::new(),
            }
        }
        (Position::InMention { slot, len }, StructToken::Word(_)) => Position::InMention {
            slot: *slot,
            len: len + 1,
        },
        _ => unreachable!("admissibility checked above"),
    };
    Ok(next)
}

trait Pipe: Sized {
    fn pipe<R>(self, f: impl FnOnce(Self) -> R) -> R {
        f(self)
    }
}
impl<T> Pipe for T {}

/// Next-token scores. Implementations must be pure functions of their
/// arguments and return finite values.
pub trait Scorer: Sync {
    fn score_next(&self, source: &[&str], prefix: &[StructToken], token: &StructToken) -> f64;
}

impl<F> Scorer for F
where
    F: Fn(&[&str], &[StructToken], &StructToken) -> f64 + Sync,
{
    fn score_next(&self, source: &[&str], prefix: &[StructToken], token: &StructToken) -> f64 {
        self(source, prefix, token)
    }
}

/// Scores every token 0, so decoding follows the tie-break order.
#[derive(Debug, Clone, Copy, Default)]
pub struct UniformScorer;

impl Scorer for UniformScorer {
    fn score_next(&self, _: &[&str], _: &[StructToken], _: &StructToken) -> f64 {
        0.0
    }
}

/// Strongly prefers a fixed set of surfaces (for example out-of-schema type
/// names) and otherwise defers to a hash scorer.
#[derive(Debug, Clone)]
pub struct AdversarialScorer {
    pub preferred: BTreeSet<String>,
    pub fallback: HashScorer,
}

impl Scorer for AdversarialScorer {
    fn score_next(&self, source: &[&str], prefix: &[StructToken], token: &StructToken) -> f64 {
        if self.preferred.contains(token.surface()) {
            1e9
        } else {
            self.fallback.score_next(source, prefix, token)
        }
    }
}

/// Deterministic pseudo-random scores in `[0, 1)` keyed on the seed, the
/// prefix length, the last emitted token and the candidate.
#[derive(Debug, Clone, Copy)]
pub struct HashScorer {
    pub seed: u64,
    /// Multiplier on the `[eos]` score; values below 1 lengthen outputs.
    pub eos_weight: f64,
}

impl HashScorer {
    pub fn new(seed: u64) -> Self {
        HashScorer {
            seed,
            eos_weight: 1.0,
        }
    }
}

fn fnv1a(mut h: u64, bytes: &[u8]) -> u64 {
    for b in bytes {
        h ^= u64::from(*b);
        h = h.wrapping_mul(0x0100_0000_01b3);
    }
    h
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

impl Scorer for HashScorer {
    fn score_next(&self, _: &[&str], prefix: &[StructToken], token: &StructToken) -> f64 {
        let mut h = fnv1a(
            0xcbf2_9ce4_8422_2325 ^ self.seed,
            &(prefix.len() as u64).to_le_bytes(),
        );
        if let Some(last) = prefix.last() {
            h = fnv1a(h, last.surface().as_bytes());
        }
        h = fnv1a(h, &[0xff]);
        h = fnv1a(h, token.surface().as_bytes());
        let u = (splitmix(h) >> 11) as f64 / (1u64 << 53) as f64;
        if *token == StructToken::Eos {
            u * self.eos_weight
        } else {
            u
        }
    }
}

/// Scores 1 for the next token of a fixed target sequence and 0 otherwise.
#[derive(Debug, Clone)]
pub struct OracleScorer {
    target: Vec<StructToken>,
}

impl OracleScorer {
    pub fn new(target: LinearSequence) -> Self {
        OracleScorer { target: target.0 }
    }

    pub fn target(&self) -> LinearSequence {
        LinearSequence(self.target.clone())
    }
}

impl Scorer for OracleScorer {
    fn score_next(&self, _: &[&str], prefix: &[StructToken], token: &StructToken) -> f64 {
        let on_track = prefix.len() < self.target.len() && self.target[..prefix.len()] == *prefix;
        if on_track && self.target[prefix.len()] == *token {
            1.0
        } else {
            0.0
        }
    }
}

/// A scorer that reproduces the projection of `gold` onto `schema`: its
/// target is the linearization of the projected gold annotations.
pub fn oracle_scorer(
    gold: &Example,
    raw: &SchemaGraph,
    schema: &SchemaGraph,
) -> Result<OracleScorer, DecodeError> {
    oracle_scorer_with(gold, &LabelProjection::new(raw, schema), schema)
}

pub fn oracle_scorer_with(
    gold: &Example,
    projection: &LabelProjection,
    schema: &SchemaGraph,
) -> Result<OracleScorer, DecodeError> {
    let projected = filter_with(std::slice::from_ref(gold), projection, schema, false)?;
    let seq = linearize(&projected[0].annotations, schema.task())?;
    Ok(OracleScorer::new(seq))
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DecodeOutput {
    pub annotations: Vec<Annotation>,
    pub sequence: LinearSequence,
    pub diagnostics: Vec<Diagnostic>,
}

/// Greedy decoder over one schema snapshot. Read-only; share freely.
#[derive(Debug, Clone)]
pub struct Decoder<'s> {
    schema: &'s SchemaGraph,
    trie: TypeTrie,
}

impl<'s> Decoder<'s> {
    pub fn new(schema: &'s SchemaGraph) -> Self {
        Decoder {
            schema,
            trie: TypeTrie::build(schema),
        }
    }

    pub fn trie(&self) -> &TypeTrie {
        &self.trie
    }

    pub fn schema(&self) -> &SchemaGraph {
        self.schema
    }

    /// Emits the highest-scoring admissible token at each step (ties by
    /// [`StructToken::tie_rank`]) until `[eos]` or `max_len` tokens, then
    /// parses the sequence back against the source text.
    pub fn decode_greedy(
        &self,
        source_text: &str,
        scorer: &dyn Scorer,
        max_len: usize,
    ) -> Result<DecodeOutput, DecodeError> {
        if max_len < 2 {
            return Err(DecodeError::MaxLenTooSmall(max_len));
        }
        let source: Vec<&str> = source_text.split_whitespace().collect();
        let mut prefix = vec![StructToken::Bos];
        let mut state = GrammarState::new(self.schema.task());
        let mut diagnostics = Vec::new();
        while !state.is_done() {
            if prefix.len() + 1 >= max_len {
                prefix.push(StructToken::Eos);
                diagnostics.push(Diagnostic::Truncated);
                break;
            }
            let admissible = admissible_tokens(&state, &self.trie, &source).map_err(|state| {
                DecodeError::DeadEnd {
                    state,
                    partial: LinearSequence(prefix.clone()),
                }
            })?;
            let mut best: Option<(f64, &StructToken)> = None;
            for tok in &admissible {
                let s = scorer.score_next(&source, &prefix, tok);
                if !s.is_finite() {
                    return Err(DecodeError::NonFiniteScore(tok.surface().to_string()));
                }
                if best.is_none_or(|(b, _)| s > b) {
                    best = Some((s, tok));
                }
            }
            let tok = best.expect("admissible set is non-empty").1.clone();
            state = advance(&state, &self.trie, &source, &tok)?;
            prefix.push(tok);
        }
        let sequence = LinearSequence(prefix);
        let parsed = delinearize(&sequence, self.schema.task(), self.schema, source_text);
        diagnostics.extend(parsed.diagnostics);
        Ok(DecodeOutput {
            annotations: parsed.annotations,
            sequence,
            diagnostics,
        })
    }

    /// Decodes every example in parallel; output order follows input order.
    pub fn decode_all<F>(
        &self,
        examples: &[Example],
        make_scorer: F,
        max_len: usize,
    ) -> Vec<Result<DecodeOutput, DecodeError>>
    where
        F: Fn(&Example) -> Result<Box<dyn Scorer>, DecodeError> + Sync,
    {
        examples
            .par_iter()
            .map(|ex| {
                let scorer = make_scorer(ex)?;
                self.decode_greedy(&ex.text, scorer.as_ref(), max_len)
            })
            .collect()
    }
}

/// [`Decoder::decode_greedy`] with a trie built for this call.
pub fn decode_greedy(
    source_text: &str,
    scorer: &dyn Scorer,
    schema: &SchemaGraph,
    max_len: usize,
) -> Result<DecodeOutput, DecodeError> {
    Decoder::new(schema).decode_greedy(source_text, scorer, max_len)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{Mention, Relation};
    use crate::schema::{flat_schema, SchemaBuilder};

    fn words(v: &[StructToken]) -> Vec<&str> {
        v.iter().map(StructToken::surface).collect()
    }

    #[test]
    fn trie_paths_match_schema_names() {
        let g = flat_schema(Task::Ee, Role::EventType, &["meet", "merge organization"]).unwrap();
        let t = TypeTrie::build(&g);
        let want: BTreeSet<Vec<String>> = [
            vec!["meet".to_string()],
            vec!["merge".into(), "organization".into()],
        ]
        .into();
        assert_eq!(t.paths(Role::EventType), want);
        assert!(t.paths(Role::ArgRole).is_empty());
    }

    #[test]
    fn rebuilt_trie_gains_new_name() {
        let g1 = flat_schema(Task::Ee, Role::EventType, &["meet", "marry"]).unwrap();
        let g2 = flat_schema(Task::Ee, Role::EventType, &["meet", "marry", "divorce"])
            .unwrap()
            .with_version(1);
        let (a, b) = (TypeTrie::build(&g1), TypeTrie::build(&g2));
        let gained: Vec<_> = b
            .paths(Role::EventType)
            .difference(&a.paths(Role::EventType))
            .cloned()
            .collect();
        assert_eq!(gained, vec![vec!["divorce".to_string()]]);
        assert_eq!(b.version(), 1);
    }

    #[test]
    fn admissible_sets() {
        let g = flat_schema(
            Task::Ee,
            Role::EventType,
            &["meet", "transport", "merge organization"],
        )
        .unwrap();
        let t = TypeTrie::build(&g);
        let src = ["Kelly", "arrived", "in", "Seoul"];
        let s = advance(&GrammarState::new(Task::Ee), &t, &src, &StructToken::Rec).unwrap();
        assert_eq!(
            words(&admissible_tokens(&s, &t, &src).unwrap()),
            vec!["meet", "merge", "transport"]
        );
        let s2 = advance(&s, &t, &src, &StructToken::word("merge")).unwrap();
        assert_eq!(
            words(&admissible_tokens(&s2, &t, &src).unwrap()),
            vec!["organization"]
        );
        let s3 = advance(&s, &t, &src, &StructToken::word("meet")).unwrap();
        assert_eq!(
            words(&admissible_tokens(&s3, &t, &src).unwrap()),
            vec!["[sep]"]
        );
        let m = advance(&s3, &t, &src, &StructToken::Sep).unwrap();
        // no mention token yet, so no closer
        assert_eq!(
            words(&admissible_tokens(&m, &t, &src).unwrap()),
            vec!["Kelly", "Seoul", "arrived", "in"]
        );
    }

    #[test]
    fn mention_admits_source_tokens_and_closer() {
        let g = SchemaBuilder::new(Task::Re)
            .major("person", Role::EntityType)
            .unwrap()
            .major("location", Role::EntityType)
            .unwrap()
            .major("place lived", Role::Relation)
            .unwrap()
            .constraint("person", "place lived", "location")
            .build()
            .unwrap();
        let t = TypeTrie::build(&g);
        let src = ["Kelly", "arrived", "in", "Seoul"];
        let mut s = GrammarState::new(Task::Re);
        for tok in ["[rec]", "person", "[sep]", "Kelly"] {
            s = advance(&s, &t, &src, &StructToken::parse(tok)).unwrap();
        }
        assert_eq!(
            words(&admissible_tokens(&s, &t, &src).unwrap()),
            vec!["[sep]", "Kelly", "Seoul", "arrived", "in"]
        );
    }

    #[test]
    fn relation_constraints_restrict_types() {
        let g = SchemaBuilder::new(Task::Re)
            .major("person", Role::EntityType)
            .unwrap()
            .major("location", Role::EntityType)
            .unwrap()
            .major("rels", Role::Relation)
            .unwrap()
            .sub("place lived", "rels")
            .unwrap()
            .sub("contains", "rels")
            .unwrap()
            .constraint("person", "place lived", "location")
            .constraint("location", "contains", "location")
            .build()
            .unwrap();
        let t = TypeTrie::build(&g);
        let src = ["a", "b"];
        let mut s = GrammarState::new(Task::Re);
        for tok in ["[rec]", "person", "[sep]", "a", "[sep]"] {
            s = advance(&s, &t, &src, &StructToken::parse(tok)).unwrap();
        }
        // declared triples are exhaustive: "rels" has none, so it is closed
        assert_eq!(
            words(&admissible_tokens(&s, &t, &src).unwrap()),
            vec!["place"]
        );
        for tok in ["place", "lived", "[sep]"] {
            s = advance(&s, &t, &src, &StructToken::parse(tok)).unwrap();
        }
        assert_eq!(
            words(&admissible_tokens(&s, &t, &src).unwrap()),
            vec!["location"]
        );
        assert!(advance(&s, &t, &src, &StructToken::word("person")).is_err());
    }

    #[test]
    fn empty_category_never_starts_a_record() {
        let g = flat_schema(Task::Ee, Role::EventType, &[]).unwrap();
        let t = TypeTrie::build(&g);
        let s = GrammarState::new(Task::Ee);
        assert_eq!(
            words(&admissible_tokens(&s, &t, &["x"]).unwrap()),
            vec!["[eos]"]
        );
        // a state inside an empty trie is a dead end
        let inside = GrammarState {
            task: Task::Ee,
            position: Position::InType {
                slot: 0,
                path: vec![],
            },
            accepted: vec![None; 4],
        };
        let err = admissible_tokens(&inside, &t, &["x"]).unwrap_err();
        assert!(err.contains("in-type"), "{err}");
    }

    #[test]
    fn adversarial_scorer_cannot_leave_schema() {
        let g = flat_schema(Task::Ee, Role::EventType, &["meet", "transport"]).unwrap();
        let scorer = AdversarialScorer {
            preferred: ["attack".to_string(), "[rec]".to_string()].into(),
            fallback: HashScorer::new(7),
        };
        let out = decode_greedy("the attack on Seoul", &scorer, &g, 64).unwrap();
        // "attack" is a source token, so it can only ever appear as a mention
        for a in &out.annotations {
            assert!(["meet", "transport"].contains(&a.primary_label()));
        }
        assert!(!out.annotations.is_empty());
    }

    #[test]
    fn uniform_scorer_with_single_type() {
        let g = flat_schema(Task::Ee, Role::EventType, &["meet"]).unwrap();
        let out = decode_greedy(
            "a b c",
            &HashScorer {
                seed: 3,
                eos_weight: 0.2,
            },
            &g,
            40,
        )
        .unwrap();
        assert!(out.annotations.iter().all(|a| a.primary_label() == "meet"));
        let out = decode_greedy("a b c", &UniformScorer, &g, 40).unwrap();
        assert_eq!(out.sequence.to_string(), "[bos] [eos]");
    }

    #[test]
    fn truncation_force_closes() {
        let g = flat_schema(Task::Ner, Role::EntityType, &["person"]).unwrap();
        let scorer = |_: &[&str], _: &[StructToken], t: &StructToken| {
            if *t == StructToken::Eos {
                0.0
            } else {
                1.0
            }
        };
        let out = decode_greedy("Kim Lee", &scorer, &g, 6).unwrap();
        assert_eq!(out.sequence.tokens().len(), 6);
        assert_eq!(out.sequence.tokens().last(), Some(&StructToken::Eos));
        assert!(out.diagnostics.contains(&Diagnostic::Truncated));
        assert!(matches!(
            decode_greedy("x", &scorer, &g, 1),
            Err(DecodeError::MaxLenTooSmall(1))
        ));
    }

    #[test]
    fn non_finite_scores_error() {
        let g = flat_schema(Task::Ner, Role::EntityType, &["person"]).unwrap();
        let scorer = |_: &[&str], _: &[StructToken], _: &StructToken| f64::NAN;
        assert!(matches!(
            decode_greedy("x", &scorer, &g, 8),
            Err(DecodeError::NonFiniteScore(_))
        ));
    }

    #[test]
    fn oracle_reproduces_gold() {
        let g = SchemaBuilder::new(Task::Re)
            .major("location", Role::EntityType)
            .unwrap()
            .major("geo", Role::Relation)
            .unwrap()
            .sub("contains", "geo")
            .unwrap()
            .constraint("location", "contains", "location")
            .build()
            .unwrap();
        let text = "In Queens , a quarry in Douglaston .";
        let ex = Example::new("1", text).with(Annotation::Relation(Relation {
            head: Mention::located_in(text, "Queens").unwrap(),
            head_type: "location".into(),
            relation: "contains".into(),
            tail: Mention::located_in(text, "Douglaston").unwrap(),
            tail_type: "location".into(),
        }));
        let scorer = oracle_scorer(&ex, &g, &g).unwrap();
        let out = decode_greedy(text, &scorer, &g, DEFAULT_MAX_LEN).unwrap();
        assert_eq!(out.annotations, ex.annotations);
        assert_eq!(out.sequence, scorer.target());
    }
}
