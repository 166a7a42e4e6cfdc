//! Annotated sentences for NER, RE and EE, their JSONL layout, and
//! projection of gold annotations onto a schema.

use std::collections::{BTreeMap, HashSet};
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::schema::{
    normalize_label, LabelProjection, Role, SchemaError, SchemaGraph, Task, RESERVED_SURFACES,
};

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("line {line}: {source}")]
    Line {
        line: usize,
        #[source]
        source: serde_json::Error,
    },
    #[error("example {id}: {detail}")]
    Offset { id: String, detail: String },
    #[error("example {id}: reserved token {token:?} in input")]
    Reserved { id: String, token: String },
    #[error("duplicate example id: {0}")]
    DuplicateId(String),
    #[error(transparent)]
    Schema(#[from] SchemaError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Character offsets, end exclusive.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Span {
    pub start: usize,
    pub end: usize,
}

/// A surface string and, when known, where it sits in the sentence.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(into = "MentionRepr", from = "MentionRepr")]
pub struct Mention {
    pub text: String,
    pub span: Option<Span>,
}

impl Mention {
    pub fn new(text: impl Into<String>, start: usize, end: usize) -> Self {
        Mention {
            text: text.into(),
            span: Some(Span { start, end }),
        }
    }

    pub fn unlocated(text: impl Into<String>) -> Self {
        Mention {
            text: text.into(),
            span: None,
        }
    }

    /// Locates `surface` in `text`, see [`locate`].
    pub fn located_in(text: &str, surface: &str) -> Result<Mention, Unresolved> {
        locate(text, surface).map(|span| Mention {
            text: char_slice(text, span).to_string(),
            span: Some(span),
        })
    }
}

#[derive(Serialize, Deserialize)]
struct MentionRepr {
    text: String,
    start: i64,
    end: i64,
}

impl From<Mention> for MentionRepr {
    fn from(m: Mention) -> Self {
        let (start, end) = m.span.map_or((-1, -1), |s| (s.start as i64, s.end as i64));
        MentionRepr {
            text: m.text,
            start,
            end,
        }
    }
}

impl From<MentionRepr> for Mention {
    fn from(r: MentionRepr) -> Self {
        let span = (r.start >= 0 && r.end >= 0).then_some(Span {
            start: r.start as usize,
            end: r.end as usize,
        });
        Mention { text: r.text, span }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Entity {
    #[serde(flatten)]
    pub mention: Mention,
    #[serde(rename = "type")]
    pub label: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Relation {
    pub head: Mention,
    pub head_type: String,
    pub relation: String,
    pub tail: Mention,
    pub tail_type: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Argument {
    pub mention: Mention,
    pub role: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Event {
    pub trigger: Mention,
    #[serde(rename = "type")]
    pub label: String,
    #[serde(default)]
    pub args: Vec<Argument>,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Annotation {
    Entity(Entity),
    Relation(Relation),
    Event(Event),
}

impl Annotation {
    /// Whether this annotation kind is extracted by `task`.
    pub fn belongs_to(&self, task: Task) -> bool {
        matches!(
            (self, task),
            (Annotation::Entity(_), Task::Ner)
                | (Annotation::Relation(_), Task::Re)
                | (Annotation::Event(_), Task::Ee)
        )
    }

    /// The entity type, relation or event type.
    pub fn primary_label(&self) -> &str {
        match self {
            Annotation::Entity(e) => &e.label,
            Annotation::Relation(r) => &r.relation,
            Annotation::Event(e) => &e.label,
        }
    }

    fn mentions(&self) -> Vec<&Mention> {
        match self {
            Annotation::Entity(e) => vec![&e.mention],
            Annotation::Relation(r) => vec![&r.head, &r.tail],
            Annotation::Event(e) => std::iter::once(&e.trigger)
                .chain(e.args.iter().map(|a| &a.mention))
                .collect(),
        }
    }

    fn labels(&self) -> Vec<&str> {
        match self {
            Annotation::Entity(e) => vec![&e.label],
            Annotation::Relation(r) => vec![&r.head_type, &r.relation, &r.tail_type],
            Annotation::Event(e) => std::iter::once(e.label.as_str())
                .chain(e.args.iter().map(|a| a.role.as_str()))
                .collect(),
        }
    }

    fn normalize_labels(&mut self) {
        match self {
            Annotation::Entity(e) => e.label = normalize_label(&e.label),
            Annotation::Relation(r) => {
                r.head_type = normalize_label(&r.head_type);
                r.relation = normalize_label(&r.relation);
                r.tail_type = normalize_label(&r.tail_type);
            }
            Annotation::Event(e) => {
                e.label = normalize_label(&e.label);
                for a in &mut e.args {
                    a.role = normalize_label(&a.role);
                }
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Example {
    pub id: String,
    pub text: String,
    pub annotations: Vec<Annotation>,
}

impl Example {
    pub fn new(id: impl Into<String>, text: impl Into<String>) -> Self {
        Example {
            id: id.into(),
            text: text.into(),
            annotations: Vec::new(),
        }
    }

    pub fn with(mut self, a: Annotation) -> Self {
        self.annotations.push(a);
        self
    }

    /// Annotations sorted and deduplicated (event arguments likewise), for
    /// set comparison.
    pub fn canonical_annotations(&self) -> Vec<Annotation> {
        let mut v: Vec<Annotation> = self
            .annotations
            .iter()
            .cloned()
            .map(|mut a| {
                if let Annotation::Event(e) = &mut a {
                    e.args.sort();
                    e.args.dedup();
                }
                a
            })
            .collect();
        v.sort();
        v.dedup();
        v
    }

    /// Checks offsets, reserved tokens and label normalization; drops
    /// exact duplicate annotations. With `strict`, every mention must
    /// carry a span.
    pub fn validate(&mut self, strict: bool) -> Result<(), CorpusError> {
        for tok in self.text.split_whitespace() {
            if RESERVED_SURFACES.contains(&tok.to_lowercase().as_str()) {
                return Err(CorpusError::Reserved {
                    id: self.id.clone(),
                    token: tok.to_string(),
                });
            }
        }
        let len = self.text.chars().count();
        for a in &mut self.annotations {
            a.normalize_labels();
            for label in a.labels() {
                if label.is_empty() {
                    return Err(CorpusError::Offset {
                        id: self.id.clone(),
                        detail: "empty label".into(),
                    });
                }
                if label.split(' ').any(|t| RESERVED_SURFACES.contains(&t)) {
                    return Err(CorpusError::Reserved {
                        id: self.id.clone(),
                        token: label.to_string(),
                    });
                }
            }
            for m in a.mentions() {
                match m.span {
                    None if strict => {
                        return Err(CorpusError::Offset {
                            id: self.id.clone(),
                            detail: format!("mention {:?} has no offsets", m.text),
                        })
                    }
                    None => {}
                    Some(s)
                        if s.start >= s.end
                            || s.end > len
                            || char_slice(&self.text, s) != m.text =>
                    {
                        return Err(CorpusError::Offset {
                            id: self.id.clone(),
                            detail: format!(
                                "mention {:?} does not match text at {}..{}",
                                m.text, s.start, s.end
                            ),
                        });
                    }
                    Some(_) => {}
                }
            }
        }
        let mut seen = HashSet::new();
        self.annotations.retain(|a| seen.insert(a.clone()));
        Ok(())
    }
}

#[derive(Serialize, Deserialize)]
struct ExampleRecord {
    id: String,
    text: String,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    entities: Vec<Entity>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    relations: Vec<Relation>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    events: Vec<Event>,
}

impl From<&Example> for ExampleRecord {
    fn from(e: &Example) -> Self {
        let mut r = ExampleRecord {
            id: e.id.clone(),
            text: e.text.clone(),
            entities: Vec::new(),
            relations: Vec::new(),
            events: Vec::new(),
        };
        for a in &e.annotations {
            match a {
                Annotation::Entity(x) => r.entities.push(x.clone()),
                Annotation::Relation(x) => r.relations.push(x.clone()),
                Annotation::Event(x) => r.events.push(x.clone()),
            }
        }
        r
    }
}

impl From<ExampleRecord> for Example {
    fn from(r: ExampleRecord) -> Self {
        let annotations = r
            .entities
            .into_iter()
            .map(Annotation::Entity)
            .chain(r.relations.into_iter().map(Annotation::Relation))
            .chain(r.events.into_iter().map(Annotation::Event))
            .collect();
        Example {
            id: r.id,
            text: r.text,
            annotations,
        }
    }
}

/// The three raw splits.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SplitSet {
    pub train: Vec<Example>,
    pub dev: Vec<Example>,
    pub test: Vec<Example>,
}

/// Parses JSONL from a reader. Blank lines are skipped.
pub fn read_jsonl(reader: impl BufRead, strict: bool) -> Result<Vec<Example>, CorpusError> {
    let mut out = Vec::new();
    let mut ids = HashSet::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: ExampleRecord =
            serde_json::from_str(&line).map_err(|source| CorpusError::Line {
                line: i + 1,
                source,
            })?;
        let mut ex = Example::from(rec);
        ex.validate(strict)?;
        if !ids.insert(ex.id.clone()) {
            return Err(CorpusError::DuplicateId(ex.id));
        }
        out.push(ex);
    }
    Ok(out)
}

/// Loads gold data; every mention must carry valid offsets.
pub fn load_jsonl(path: impl AsRef<Path>) -> Result<Vec<Example>, CorpusError> {
    read_jsonl(BufReader::new(File::open(path)?), true)
}

/// Loads predictions, where unresolved mentions carry offsets of -1.
pub fn load_predictions_jsonl(path: impl AsRef<Path>) -> Result<Vec<Example>, CorpusError> {
    read_jsonl(BufReader::new(File::open(path)?), false)
}

pub fn to_jsonl_line(example: &Example) -> String {
    serde_json::to_string(&ExampleRecord::from(example)).expect("example serializes")
}

pub fn write_jsonl(examples: &[Example], mut w: impl Write) -> std::io::Result<()> {
    for e in examples {
        writeln!(w, "{}", to_jsonl_line(e))?;
    }
    Ok(())
}

pub fn save_jsonl(examples: &[Example], path: impl AsRef<Path>) -> Result<(), CorpusError> {
    let mut w = BufWriter::new(File::create(path)?);
    write_jsonl(examples, &mut w)?;
    w.flush()?;
    Ok(())
}

/// Replaces every label with its projection onto `schema`.
///
/// Only annotation kinds extracted by the schema's task are kept.
/// Annotations whose type (or, for relations, whose argument entity types)
/// project to nothing are removed, as are relations whose projected triple
/// the schema does not declare (when it declares any) and event arguments
/// whose role is not among the projected event type's roles. With
/// `drop_empty`, examples left without annotations are removed.
pub fn filter_with(
    examples: &[Example],
    projection: &LabelProjection,
    schema: &SchemaGraph,
    drop_empty: bool,
) -> Result<Vec<Example>, SchemaError> {
    let task = schema.task();
    let mut out = Vec::with_capacity(examples.len());
    for ex in examples {
        let mut kept = Vec::new();
        for a in ex.annotations.iter().filter(|a| a.belongs_to(task)) {
            if let Some(p) = project_annotation(a, projection, schema)? {
                if !kept.contains(&p) {
                    kept.push(p);
                }
            }
        }
        if drop_empty && kept.is_empty() {
            continue;
        }
        out.push(Example {
            id: ex.id.clone(),
            text: ex.text.clone(),
            annotations: kept,
        });
    }
    Ok(out)
}

/// [`filter_with`] using a fresh projection from `raw` onto `schema`.
pub fn filter_to_schema(
    examples: &[Example],
    raw: &SchemaGraph,
    schema: &SchemaGraph,
    drop_empty: bool,
) -> Result<Vec<Example>, SchemaError> {
    filter_with(
        examples,
        &LabelProjection::new(raw, schema),
        schema,
        drop_empty,
    )
}

/// A schema that declares any triple declares all of them.
fn licensed(schema: &SchemaGraph, head: &str, relation: &str, tail: &str) -> bool {
    let triples = schema.re_constraints();
    if triples.is_empty() {
        return true;
    }
    let id = |name: &str| schema.find_label(name).map(|n| n.id.clone());
    match (id(head), id(relation), id(tail)) {
        (Some(h), Some(r), Some(t)) => triples.contains(&(h, r, t)),
        _ => false,
    }
}

fn project_annotation(
    a: &Annotation,
    p: &LabelProjection,
    schema: &SchemaGraph,
) -> Result<Option<Annotation>, SchemaError> {
    let name = |label: &str, role: Role| -> Result<Option<String>, SchemaError> {
        Ok(p.project_label(label, role)?.map(|n| n.to_string()))
    };
    Ok(match a {
        Annotation::Entity(e) => name(&e.label, Role::EntityType)?.map(|label| {
            Annotation::Entity(Entity {
                mention: e.mention.clone(),
                label,
            })
        }),
        Annotation::Relation(r) => {
            let relation = name(&r.relation, Role::Relation)?;
            let head_type = name(&r.head_type, Role::EntityType)?;
            let tail_type = name(&r.tail_type, Role::EntityType)?;
            match (relation, head_type, tail_type) {
                (Some(relation), Some(head_type), Some(tail_type))
                    if licensed(schema, &head_type, &relation, &tail_type) =>
                {
                    Some(Annotation::Relation(Relation {
                        head: r.head.clone(),
                        head_type,
                        relation,
                        tail: r.tail.clone(),
                        tail_type,
                    }))
                }
                _ => None,
            }
        }
        Annotation::Event(e) => match name(&e.label, Role::EventType)? {
            None => None,
            Some(label) => {
                let node = schema
                    .find_label(&label)
                    .expect("projected label is in schema");
                let allowed: Vec<String> = schema
                    .roles_of(&node.id)
                    .iter()
                    .filter_map(|r| schema.node(r).map(|n| n.name.to_string()))
                    .collect();
                let mut args = Vec::new();
                for arg in &e.args {
                    if let Some(role) = name(&arg.role, Role::ArgRole)? {
                        let arg = Argument {
                            mention: arg.mention.clone(),
                            role,
                        };
                        if allowed.contains(&arg.role) && !args.contains(&arg) {
                            args.push(arg);
                        }
                    }
                }
                Some(Annotation::Event(Event {
                    trigger: e.trigger.clone(),
                    label,
                    args,
                }))
            }
        },
    })
}

/// Sentence count and per-label annotation counts for one split.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct SplitStats {
    pub sentences: usize,
    pub annotations: usize,
    pub per_label: BTreeMap<String, usize>,
}

pub fn stats(examples: &[Example]) -> SplitStats {
    let mut s = SplitStats {
        sentences: examples.len(),
        ..Default::default()
    };
    for a in examples.iter().flat_map(|e| &e.annotations) {
        s.annotations += 1;
        *s.per_label
            .entry(a.primary_label().to_string())
            .or_default() += 1;
    }
    s
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct CorpusStats {
    pub train: SplitStats,
    pub dev: SplitStats,
    pub test: SplitStats,
}

pub fn split_stats(splits: &SplitSet) -> CorpusStats {
    CorpusStats {
        train: stats(&splits.train),
        dev: stats(&splits.dev),
        test: stats(&splits.test),
    }
}

/// Whitespace tokens with their character spans.
pub fn token_spans(text: &str) -> Vec<(Span, &str)> {
    let mut out = Vec::new();
    let mut start: Option<(usize, usize)> = None;
    let mut n_chars = 0;
    for (ci, (bi, ch)) in text.char_indices().enumerate() {
        n_chars = ci + 1;
        if ch.is_whitespace() {
            if let Some((cs, bs)) = start.take() {
                out.push((Span { start: cs, end: ci }, &text[bs..bi]));
            }
        } else if start.is_none() {
            start = Some((ci, bi));
        }
    }
    if let Some((cs, bs)) = start {
        out.push((
            Span {
                start: cs,
                end: n_chars,
            },
            &text[bs..],
        ));
    }
    out
}

pub fn char_slice(text: &str, span: Span) -> &str {
    let mut idx = text
        .char_indices()
        .map(|(b, _)| b)
        .chain(std::iter::once(text.len()));
    let start = idx.nth(span.start).unwrap_or(text.len());
    let end = if span.end > span.start {
        idx.nth(span.end - span.start - 1).unwrap_or(text.len())
    } else {
        start
    };
    &text[start..end]
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Unresolved {
    NotFound,
    Ambiguous,
}

/// Finds the unique occurrence of `surface` in `text`: first as a run of
/// whole whitespace tokens, then as a plain substring.
pub fn locate(text: &str, surface: &str) -> Result<Span, Unresolved> {
    let want: Vec<&str> = surface.split_whitespace().collect();
    if want.is_empty() {
        return Err(Unresolved::NotFound);
    }
    let toks = token_spans(text);
    let hits: Vec<Span> = toks
        .windows(want.len())
        .filter(|w| w.iter().map(|(_, t)| *t).eq(want.iter().copied()))
        .map(|w| Span {
            start: w[0].0.start,
            end: w[w.len() - 1].0.end,
        })
        .collect();
    match hits.len() {
        1 => return Ok(hits[0]),
        n if n > 1 => return Err(Unresolved::Ambiguous),
        _ => {}
    }
    let surface = surface.trim();
    let mut found = text.match_indices(surface);
    match (found.next(), found.next()) {
        (Some((b, _)), None) => {
            let start = text[..b].chars().count();
            Ok(Span {
                start,
                end: start + surface.chars().count(),
            })
        }
        (Some(_), Some(_)) => Err(Unresolved::Ambiguous),
        _ => Err(Unresolved::NotFound),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::schema::{flat_schema, SchemaBuilder};

    const NYT_LINE: &str = r#"{"id":"s1","text":"In Queens , housing replaced a gravel quarry in Douglaston .","relations":[{"head":{"text":"Queens","start":3,"end":9},"head_type":"location","relation":"contains","tail":{"text":"Douglaston","start":48,"end":58},"tail_type":"location"}]}"#;

    #[test]
    fn nyt_line_loads_one_relation() {
        let v = read_jsonl(NYT_LINE.as_bytes(), true).unwrap();
        assert_eq!(v.len(), 1);
        assert_eq!(v[0].annotations.len(), 1);
        let Annotation::Relation(r) = &v[0].annotations[0] else {
            panic!()
        };
        assert_eq!(
            (
                r.head.text.as_str(),
                r.relation.as_str(),
                r.tail.text.as_str()
            ),
            ("Queens", "contains", "Douglaston")
        );
        assert_eq!(to_jsonl_line(&v[0]), NYT_LINE);
    }

    #[test]
    fn empty_input_is_empty_list() {
        assert!(read_jsonl(&b""[..], true).unwrap().is_empty());
    }

    #[test]
    fn malformed_line_reports_line_number() {
        let input = format!("{NYT_LINE}\n{{not json\n");
        let err = read_jsonl(input.as_bytes(), true).unwrap_err();
        assert!(matches!(err, CorpusError::Line { line: 2, .. }), "{err}");
    }

    #[test]
    fn offset_violation_names_example() {
        let line =
            r#"{"id":"bad","text":"abc","entities":[{"text":"abd","start":0,"end":3,"type":"x"}]}"#;
        let err = read_jsonl(line.as_bytes(), true).unwrap_err();
        assert!(err.to_string().starts_with("example bad:"), "{err}");
        let line =
            r#"{"id":"bad","text":"abc","entities":[{"text":"abc","start":0,"end":9,"type":"x"}]}"#;
        assert!(read_jsonl(line.as_bytes(), true).is_err());
    }

    #[test]
    fn unlocated_mentions_only_in_lenient_mode() {
        let line =
            r#"{"id":"p","text":"abc","entities":[{"text":"abc","start":-1,"end":-1,"type":"x"}]}"#;
        assert!(read_jsonl(line.as_bytes(), true).is_err());
        let v = read_jsonl(line.as_bytes(), false).unwrap();
        assert_eq!(to_jsonl_line(&v[0]), line);
    }

    #[test]
    fn reserved_tokens_are_rejected() {
        let line = r#"{"id":"r","text":"a [sep] b"}"#;
        assert!(matches!(
            read_jsonl(line.as_bytes(), true),
            Err(CorpusError::Reserved { .. })
        ));
    }

    #[test]
    fn duplicates_are_dropped_and_labels_normalized() {
        let line = r#"{"id":"d","text":"Kelly met","entities":[{"text":"Kelly","start":0,"end":5,"type":"Person"},{"text":"Kelly","start":0,"end":5,"type":"person"}]}"#;
        let v = read_jsonl(line.as_bytes(), true).unwrap();
        assert_eq!(v[0].annotations.len(), 1);
        assert_eq!(v[0].annotations[0].primary_label(), "person");
    }

    #[test]
    fn duplicate_ids_error() {
        let input = format!("{NYT_LINE}\n{NYT_LINE}\n");
        assert!(matches!(
            read_jsonl(input.as_bytes(), true),
            Err(CorpusError::DuplicateId(_))
        ));
    }

    fn justice_raw() -> SchemaGraph {
        SchemaBuilder::new(Task::Ee)
            .major("justice", Role::EventType)
            .unwrap()
            .sub("sentence", "justice")
            .unwrap()
            .sub("trial hearing", "justice")
            .unwrap()
            .sub("charge indict", "justice")
            .unwrap()
            .major("defendant", Role::ArgRole)
            .unwrap()
            .major("place", Role::ArgRole)
            .unwrap()
            .event_roles("sentence", &["defendant"])
            .event_roles("trial hearing", &["defendant", "place"])
            .build()
            .unwrap()
    }

    fn event(text: &str, surface: &str, label: &str) -> Annotation {
        Annotation::Event(Event {
            trigger: Mention::located_in(text, surface).unwrap(),
            label: label.into(),
            args: vec![],
        })
    }

    #[test]
    fn filter_keeps_only_in_schema_events() {
        let text = "Markovic will be tried on charges that carry a sentence";
        let ex = Example::new("t8", text)
            .with(event(text, "sentence", "sentence"))
            .with(event(text, "tried", "trial hearing"))
            .with(event(text, "charges", "charge indict"));
        let raw = justice_raw();
        let s1 = flat_schema(Task::Ee, Role::EventType, &["attack", "sentence", "die"]).unwrap();
        let out = filter_to_schema(std::slice::from_ref(&ex), &raw, &s1, false).unwrap();
        let labels: Vec<&str> = out[0]
            .annotations
            .iter()
            .map(|a| a.primary_label())
            .collect();
        assert_eq!(labels, vec!["sentence"]);

        let s6 = flat_schema(
            Task::Ee,
            Role::EventType,
            &["sentence", "trial hearing", "charge indict"],
        )
        .unwrap();
        let out = filter_to_schema(std::slice::from_ref(&ex), &raw, &s6, false).unwrap();
        assert_eq!(out[0].annotations.len(), 3);

        let out = filter_to_schema(std::slice::from_ref(&ex), &raw, &raw, false).unwrap();
        assert_eq!(out[0], ex);
    }

    #[test]
    fn filter_drops_args_outside_role_list() {
        let text = "He was tried in Belgrade";
        let ex = Example::new("a", text).with(Annotation::Event(Event {
            trigger: Mention::located_in(text, "tried").unwrap(),
            label: "trial hearing".into(),
            args: vec![
                Argument {
                    mention: Mention::located_in(text, "He").unwrap(),
                    role: "defendant".into(),
                },
                Argument {
                    mention: Mention::located_in(text, "Belgrade").unwrap(),
                    role: "place".into(),
                },
            ],
        }));
        let raw = justice_raw();
        let keep = ["justice", "sentence", "defendant", "place"]
            .iter()
            .map(|n| raw.find_label(n).unwrap().id.clone())
            .collect();
        // trial hearing projects to justice, whose roles are the union of its subs'
        let s = raw.restrict(&keep, 1);
        let out = filter_to_schema(std::slice::from_ref(&ex), &raw, &s, false).unwrap();
        let Annotation::Event(e) = &out[0].annotations[0] else {
            panic!()
        };
        assert_eq!(e.label, "justice");
        assert_eq!(e.args.len(), 2);

        let keep = ["justice", "sentence", "defendant"]
            .iter()
            .map(|n| raw.find_label(n).unwrap().id.clone())
            .collect();
        let s = raw.restrict(&keep, 1);
        let out = filter_to_schema(&[ex], &raw, &s, false).unwrap();
        let Annotation::Event(e) = &out[0].annotations[0] else {
            panic!()
        };
        assert_eq!(e.args.len(), 1);
        assert_eq!(e.args[0].role, "defendant");
    }

    #[test]
    fn drop_empty_controls_unannotated_sentences() {
        let raw = justice_raw();
        let s = flat_schema(Task::Ee, Role::EventType, &["attack"]).unwrap();
        let ex = Example::new("e", "tried").with(event("tried", "tried", "trial hearing"));
        assert_eq!(
            filter_to_schema(std::slice::from_ref(&ex), &raw, &s, false)
                .unwrap()
                .len(),
            1
        );
        assert!(filter_to_schema(&[ex], &raw, &s, true).unwrap().is_empty());
    }

    #[test]
    fn undeclared_triples_are_dropped_once_any_is_declared() {
        let raw = SchemaBuilder::new(Task::Re)
            .major("person", Role::EntityType)
            .unwrap()
            .major("location", Role::EntityType)
            .unwrap()
            .major("place lived", Role::Relation)
            .unwrap()
            .major("contains", Role::Relation)
            .unwrap()
            .constraint("person", "place lived", "location")
            .build()
            .unwrap();
        let rel = |h: &str, r: &str, t: &str| {
            Annotation::Relation(Relation {
                head: Mention::new("A", 0, 1),
                head_type: h.into(),
                relation: r.into(),
                tail: Mention::new("B", 2, 3),
                tail_type: t.into(),
            })
        };
        let ex = Example::new("r", "A B")
            .with(rel("person", "place lived", "location"))
            .with(rel("location", "contains", "location"))
            .with(rel("location", "place lived", "person"));
        let out = filter_to_schema(&[ex], &raw, &raw, false).unwrap();
        assert_eq!(
            out[0].annotations,
            vec![rel("person", "place lived", "location")]
        );
    }

    #[test]
    fn stats_count_sentences_and_labels() {
        assert_eq!(stats(&[]), SplitStats::default());
        let ent = |t: &str| {
            Annotation::Entity(Entity {
                mention: Mention::new("a", 0, 1),
                label: t.into(),
            })
        };
        let v = vec![
            Example::new("1", "a").with(ent("person")),
            Example::new("2", "a").with(ent("person")),
            Example::new("3", "a").with(ent("location")),
        ];
        let s = stats(&v);
        assert_eq!(s.sentences, 3);
        assert_eq!(s.per_label["person"], 2);
        assert_eq!(s.per_label["location"], 1);
    }

    #[test]
    fn locate_prefers_whole_tokens() {
        let text = "in Reykjavik , Iceland .";
        assert_eq!(locate(text, "Iceland"), Ok(Span { start: 15, end: 22 }));
        assert_eq!(
            locate("Reykjavik, Iceland", "Reykjavik"),
            Ok(Span { start: 0, end: 9 })
        );
        assert_eq!(locate("a b a", "a"), Err(Unresolved::Ambiguous));
        assert_eq!(locate("a b", "c"), Err(Unresolved::NotFound));
        assert_eq!(
            char_slice("héllo wörld", Span { start: 6, end: 11 }),
            "wörld"
        );
    }
}
