//! Flat token sequences for structured annotations.
//!
//! Grammar, one record per annotation between `[bos]` and `[eos]`:
//!
//! ```text
//! NER  [rec] type [sep] mention
//! RE   [rec] head-type [sep] head [sep] relation [sep] tail-type [sep] tail
//! EE   [rec] event-type [sep] trigger ( [arg] role [sep] mention )*
//! ```
//!
//! Type names and mentions are emitted as their whitespace tokens.

use std::fmt;

use thiserror::Error;

use crate::corpus::{Annotation, Argument, Entity, Event, Mention, Relation, Unresolved};
use crate::schema::{Role, SchemaGraph, Task, RESERVED_SURFACES};

#[derive(Debug, Error)]
pub enum LinealError {
    #[error("reserved token in {0:?}")]
    Reserved(String),
    #[error("empty field in annotation")]
    EmptyField,
    #[error("schema prompt needs {required} tokens, pad length is {pad_len}")]
    PadTooShort { required: usize, pad_len: usize },
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum StructToken {
    Bos,
    Eos,
    Rec,
    Sep,
    Arg,
    Pad,
    Word(String),
}

impl StructToken {
    pub fn word(s: impl Into<String>) -> Self {
        StructToken::Word(s.into())
    }

    pub fn surface(&self) -> &str {
        match self {
            StructToken::Bos => "[bos]",
            StructToken::Eos => "[eos]",
            StructToken::Rec => "[rec]",
            StructToken::Sep => "[sep]",
            StructToken::Arg => "[arg]",
            StructToken::Pad => "[pad]",
            StructToken::Word(w) => w,
        }
    }

    pub fn parse(s: &str) -> StructToken {
        match s {
            "[bos]" => StructToken::Bos,
            "[eos]" => StructToken::Eos,
            "[rec]" => StructToken::Rec,
            "[sep]" => StructToken::Sep,
            "[arg]" => StructToken::Arg,
            "[pad]" => StructToken::Pad,
            w => StructToken::Word(w.to_string()),
        }
    }

    pub fn is_word(&self) -> bool {
        matches!(self, StructToken::Word(_))
    }

    /// Tie-break order for decoding: `[eos] < [rec] < [sep] < [arg]`, other
    /// structural tokens after those, then words by surface.
    pub fn tie_rank(&self) -> (u8, &str) {
        match self {
            StructToken::Eos => (0, ""),
            StructToken::Rec => (1, ""),
            StructToken::Sep => (2, ""),
            StructToken::Arg => (3, ""),
            StructToken::Bos => (4, ""),
            StructToken::Pad => (5, ""),
            StructToken::Word(w) => (6, w),
        }
    }
}

impl fmt::Display for StructToken {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.surface())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct LinearSequence(pub Vec<StructToken>);

impl LinearSequence {
    pub fn tokens(&self) -> &[StructToken] {
        &self.0
    }

    /// Parses a space-joined line.
    pub fn parse_line(line: &str) -> LinearSequence {
        LinearSequence(line.split_whitespace().map(StructToken::parse).collect())
    }
}

impl fmt::Display for LinearSequence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, t) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str(" ")?;
            }
            f.write_str(t.surface())?;
        }
        Ok(())
    }
}

fn words(s: &str) -> Result<Vec<StructToken>, LinealError> {
    let toks: Vec<&str> = s.split_whitespace().collect();
    if toks.is_empty() {
        return Err(LinealError::EmptyField);
    }
    if toks
        .iter()
        .any(|t| RESERVED_SURFACES.contains(&t.to_lowercase().as_str()))
    {
        return Err(LinealError::Reserved(s.to_string()));
    }
    Ok(toks.into_iter().map(StructToken::word).collect())
}

type RecordKey = (Option<usize>, String, Vec<String>);

fn record(a: &Annotation) -> Result<(RecordKey, Vec<StructToken>), LinealError> {
    let mut out = vec![StructToken::Rec];
    let (anchor, label) = match a {
        Annotation::Entity(e) => {
            out.extend(words(&e.label)?);
            out.push(StructToken::Sep);
            out.extend(words(&e.mention.text)?);
            (&e.mention, &e.label)
        }
        Annotation::Relation(r) => {
            out.extend(words(&r.head_type)?);
            out.push(StructToken::Sep);
            out.extend(words(&r.head.text)?);
            out.push(StructToken::Sep);
            out.extend(words(&r.relation)?);
            out.push(StructToken::Sep);
            out.extend(words(&r.tail_type)?);
            out.push(StructToken::Sep);
            out.extend(words(&r.tail.text)?);
            (&r.head, &r.head_type)
        }
        Annotation::Event(e) => {
            out.extend(words(&e.label)?);
            out.push(StructToken::Sep);
            out.extend(words(&e.trigger.text)?);
            let mut args: Vec<&Argument> = e.args.iter().collect();
            args.sort_by(|a, b| {
                (a.mention.span, &a.role, &a.mention.text).cmp(&(
                    b.mention.span,
                    &b.role,
                    &b.mention.text,
                ))
            });
            args.dedup();
            for arg in args {
                out.push(StructToken::Arg);
                out.extend(words(&arg.role)?);
                out.push(StructToken::Sep);
                out.extend(words(&arg.mention.text)?);
            }
            (&e.trigger, &e.label)
        }
    };
    let key = (
        anchor.span.map(|s| s.start),
        label.clone(),
        out.iter().map(|t| t.surface().to_string()).collect(),
    );
    Ok((key, out))
}

/// Serializes the annotations of `task`'s kind. Records are ordered by
/// anchor start offset (head, trigger or entity), then type name; the
/// output does not depend on input order.
pub fn linearize(annotations: &[Annotation], task: Task) -> Result<LinearSequence, LinealError> {
    let mut records = annotations
        .iter()
        .filter(|a| a.belongs_to(task))
        .map(record)
        .collect::<Result<Vec<_>, _>>()?;
    records.sort_by(|a, b| a.0.cmp(&b.0));
    records.dedup_by(|a, b| a.0 == b.0);
    let mut seq = vec![StructToken::Bos];
    for (_, toks) in records {
        seq.extend(toks);
    }
    seq.push(StructToken::Eos);
    Ok(LinearSequence(seq))
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Diagnostic {
    MissingBos,
    Unterminated,
    TrailingTokens(usize),
    Malformed { position: usize, detail: String },
    OutOfSchema { role: Role, name: String },
    UnresolvedMention { text: String, reason: Unresolved },
    Truncated,
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Diagnostic::MissingBos => f.write_str("missing [bos]"),
            Diagnostic::Unterminated => f.write_str("unterminated"),
            Diagnostic::TrailingTokens(n) => write!(f, "{n} tokens after [eos]"),
            Diagnostic::Malformed { position, detail } => {
                write!(f, "malformed record at {position}: {detail}")
            }
            Diagnostic::OutOfSchema { role, name } => {
                write!(f, "out-of-schema type: {role} {name:?}")
            }
            Diagnostic::UnresolvedMention { text, reason } => {
                let why = match reason {
                    Unresolved::NotFound => "not found",
                    Unresolved::Ambiguous => "ambiguous",
                };
                write!(f, "mention {text:?} {why} in source")
            }
            Diagnostic::Truncated => f.write_str("truncated at max length"),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Delinearized {
    pub annotations: Vec<Annotation>,
    pub diagnostics: Vec<Diagnostic>,
}

struct Reader<'a> {
    schema: &'a SchemaGraph,
    source: &'a str,
    diagnostics: Vec<Diagnostic>,
}

impl Reader<'_> {
    fn type_name(&mut self, toks: &[&str], role: Role) -> Option<String> {
        let name = toks.join(" ");
        match self.schema.find_label(&name) {
            Some(n) if n.role == Some(role) => Some(n.name.to_string()),
            _ => {
                self.diagnostics
                    .push(Diagnostic::OutOfSchema { role, name });
                None
            }
        }
    }

    fn mention(&mut self, toks: &[&str]) -> Mention {
        let text = toks.join(" ");
        match Mention::located_in(self.source, &text) {
            Ok(m) => m,
            Err(reason) => {
                self.diagnostics.push(Diagnostic::UnresolvedMention {
                    text: text.clone(),
                    reason,
                });
                Mention::unlocated(text)
            }
        }
    }

    fn malformed(&mut self, position: usize, detail: &str) {
        self.diagnostics.push(Diagnostic::Malformed {
            position,
            detail: detail.to_string(),
        });
    }

    fn record(&mut self, task: Task, body: &[StructToken], position: usize) -> Option<Annotation> {
        match task {
            Task::Ner => {
                let f = self.fields(body, 2, position)?;
                let label = self.type_name(&f[0], Role::EntityType)?;
                Some(Annotation::Entity(Entity {
                    mention: self.mention(&f[1]),
                    label,
                }))
            }
            Task::Re => {
                let f = self.fields(body, 5, position)?;
                let head_type = self.type_name(&f[0], Role::EntityType);
                let relation = self.type_name(&f[2], Role::Relation);
                let tail_type = self.type_name(&f[3], Role::EntityType);
                let (head_type, relation, tail_type) = (head_type?, relation?, tail_type?);
                Some(Annotation::Relation(Relation {
                    head: self.mention(&f[1]),
                    head_type,
                    relation,
                    tail: self.mention(&f[4]),
                    tail_type,
                }))
            }
            Task::Ee => {
                let mut parts = body.split(|t| *t == StructToken::Arg);
                let head = parts.next().unwrap_or_default();
                let f = self.fields(head, 2, position)?;
                let label = self.type_name(&f[0], Role::EventType)?;
                let trigger = self.mention(&f[1]);
                let mut args = Vec::new();
                for part in parts {
                    let Some(g) = self.fields(part, 2, position) else {
                        continue;
                    };
                    let Some(role) = self.type_name(&g[0], Role::ArgRole) else {
                        continue;
                    };
                    let arg = Argument {
                        mention: self.mention(&g[1]),
                        role,
                    };
                    if !args.contains(&arg) {
                        args.push(arg);
                    }
                }
                Some(Annotation::Event(Event {
                    trigger,
                    label,
                    args,
                }))
            }
        }
    }

    /// Splits a record body on `[sep]` into exactly `n` non-empty word runs.
    fn fields<'t>(
        &mut self,
        body: &'t [StructToken],
        n: usize,
        position: usize,
    ) -> Option<Vec<Vec<&'t str>>> {
        let mut out = Vec::new();
        for seg in body.split(|t| *t == StructToken::Sep) {
            if seg.is_empty() || !seg.iter().all(StructToken::is_word) {
                self.malformed(position, "empty or non-word field");
                return None;
            }
            out.push(seg.iter().map(StructToken::surface).collect());
        }
        if out.len() != n {
            self.malformed(
                position,
                &format!("expected {n} fields, found {}", out.len()),
            );
            return None;
        }
        Some(out)
    }
}

/// Parses a sequence back into annotations. Never fails: records with
/// out-of-schema types are dropped, unresolvable mentions keep no offsets,
/// and every irregularity is reported as a diagnostic.
pub fn delinearize(
    seq: &LinearSequence,
    task: Task,
    schema: &SchemaGraph,
    source: &str,
) -> Delinearized {
    let mut r = Reader {
        schema,
        source,
        diagnostics: Vec::new(),
    };
    let toks = seq.tokens();
    let mut i = 0;
    if toks.first() == Some(&StructToken::Bos) {
        i = 1;
    } else {
        r.diagnostics.push(Diagnostic::MissingBos);
    }
    let mut annotations = Vec::new();
    let mut terminated = false;
    while i < toks.len() {
        match &toks[i] {
            StructToken::Eos => {
                terminated = true;
                if i + 1 < toks.len() {
                    r.diagnostics
                        .push(Diagnostic::TrailingTokens(toks.len() - i - 1));
                }
                break;
            }
            StructToken::Rec => {
                let start = i + 1;
                let end = toks[start..]
                    .iter()
                    .position(|t| matches!(t, StructToken::Rec | StructToken::Eos))
                    .map_or(toks.len(), |p| start + p);
                if let Some(a) = r.record(task, &toks[start..end], i) {
                    if !annotations.contains(&a) {
                        annotations.push(a);
                    }
                }
                i = end;
            }
            _ => {
                r.malformed(i, "expected [rec] or [eos]");
                i += 1;
                while i < toks.len() && !matches!(toks[i], StructToken::Rec | StructToken::Eos) {
                    i += 1;
                }
            }
        }
    }
    if !terminated {
        r.diagnostics.push(Diagnostic::Unterminated);
    }
    Delinearized {
        annotations,
        diagnostics: r.diagnostics,
    }
}

/// The textual schema prefix padded with `[pad]` to exactly `pad_len` tokens.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SchemaPrompt(pub Vec<StructToken>);

impl fmt::Display for SchemaPrompt {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(&LinearSequence(self.0.clone()), f)
    }
}

fn name_words(s: &str) -> impl Iterator<Item = StructToken> + '_ {
    s.split(' ').map(StructToken::word)
}

/// Renders the schema as `[sep]`-joined items: relation triples `h r t` in
/// lexicographic order (plus relations without any triple), or type names
/// (event types followed by their role names), then pads.
pub fn build_schema_prompt(
    schema: &SchemaGraph,
    pad_len: usize,
) -> Result<SchemaPrompt, LinealError> {
    let name = |id| {
        schema
            .node(id)
            .map(|n| n.name.to_string())
            .unwrap_or_default()
    };
    let items: Vec<Vec<String>> = match schema.task() {
        Task::Re => {
            let mut v: Vec<Vec<String>> = schema
                .re_constraints()
                .iter()
                .map(|(h, r, t)| vec![name(h), name(r), name(t)])
                .collect();
            for rel in schema.nodes_with_role(Role::Relation) {
                if !schema.re_constraints().iter().any(|(_, r, _)| *r == rel.id) {
                    v.push(vec![rel.name.to_string()]);
                }
            }
            v.sort();
            v
        }
        Task::Ner => schema
            .names_with_role(Role::EntityType)
            .into_iter()
            .map(|n| vec![n])
            .collect(),
        Task::Ee => {
            let mut v: Vec<Vec<String>> = schema
                .nodes_with_role(Role::EventType)
                .map(|e| {
                    std::iter::once(e.name.to_string())
                        .chain(schema.roles_of(&e.id).iter().map(name))
                        .collect()
                })
                .collect();
            v.sort();
            v
        }
    };
    let mut out = Vec::new();
    for (i, item) in items.iter().enumerate() {
        if i > 0 {
            out.push(StructToken::Sep);
        }
        for n in item {
            out.extend(name_words(n));
        }
    }
    if out.len() > pad_len {
        return Err(LinealError::PadTooShort {
            required: out.len(),
            pad_len,
        });
    }
    out.resize(pad_len, StructToken::Pad);
    Ok(SchemaPrompt(out))
}
