//! Typed schema graphs: a rooted two-level taxonomy of extraction types plus
//! the task constraints (relation triples, event role lists), label
//! projection onto an evolving schema, and node renaming.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Structural tokens that may never appear inside a name or a source text.
pub const RESERVED_SURFACES: [&str; 6] = ["[bos]", "[eos]", "[rec]", "[sep]", "[arg]", "[pad]"];

/// Name of the entity type registered for relation schemas that ship without
/// an entity taxonomy.
pub const SYNTHETIC_ENTITY_TYPE: &str = "entity";

#[derive(Debug, Error)]
pub enum SchemaError {
    #[error("label not in raw taxonomy: {0}")]
    UnknownLabel(String),
    #[error("invalid name {0:?}: {1}")]
    InvalidName(String, &'static str),
    #[error("invalid schema: {}", join_violations(.0))]
    Invalid(Vec<Violation>),
    #[error("unknown name: {0}")]
    UnknownName(String),
    #[error("rename collision: {0}")]
    RenameCollision(String),
    #[error("unknown node reference: {0}")]
    UnknownReference(String),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

fn join_violations(v: &[Violation]) -> String {
    v.iter()
        .map(|x| x.to_string())
        .collect::<Vec<_>>()
        .join("; ")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Task {
    #[serde(rename = "NER")]
    Ner,
    #[serde(rename = "RE")]
    Re,
    #[serde(rename = "EE")]
    Ee,
}

impl Task {
    /// The role whose sub nodes are sampled and grown by evolution.
    pub fn primary_role(self) -> Role {
        match self {
            Task::Ner => Role::EntityType,
            Task::Re => Role::Relation,
            Task::Ee => Role::EventType,
        }
    }
}

impl fmt::Display for Task {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Task::Ner => "NER",
            Task::Re => "RE",
            Task::Ee => "EE",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Level {
    Root,
    Major,
    Sub,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Role {
    EntityType,
    Relation,
    EventType,
    ArgRole,
}

impl fmt::Display for Role {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Role::EntityType => "entity-type",
            Role::Relation => "relation",
            Role::EventType => "event-type",
            Role::ArgRole => "arg-role",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct NodeId(pub String);

impl NodeId {
    pub fn new(s: impl Into<String>) -> Self {
        NodeId(s.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// A lowercase, whitespace-tokenized type name such as `trial hearing`.
///
/// Equality is on the token sequence, so `"Trial  Hearing"` and
/// `"trial hearing"` are the same name.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Name(Vec<String>);

impl Name {
    pub fn parse(s: &str) -> Result<Name, SchemaError> {
        let tokens: Vec<String> = s.split_whitespace().map(str::to_lowercase).collect();
        if tokens.is_empty() {
            return Err(SchemaError::InvalidName(s.to_string(), "empty name"));
        }
        if tokens
            .iter()
            .any(|t| RESERVED_SURFACES.contains(&t.as_str()))
        {
            return Err(SchemaError::InvalidName(
                s.to_string(),
                "contains a reserved token",
            ));
        }
        Ok(Name(tokens))
    }

    pub fn tokens(&self) -> &[String] {
        &self.0
    }

    /// Node id derived from the name (`trial hearing` -> `trial_hearing`).
    pub fn slug(&self) -> NodeId {
        NodeId(self.0.join("_"))
    }
}

impl fmt::Display for Name {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0.join(" "))
    }
}

impl Serialize for Name {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for Name {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        Name::parse(&s).map_err(serde::de::Error::custom)
    }
}

/// Canonical string form of a label: lowercase tokens joined by one space.
pub fn normalize_label(s: &str) -> String {
    s.split_whitespace()
        .map(str::to_lowercase)
        .collect::<Vec<_>>()
        .join(" ")
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SchemaNode {
    pub id: NodeId,
    pub name: Name,
    pub parent: Option<NodeId>,
    pub level: Level,
    /// `None` only for the root.
    pub role: Option<Role>,
}

/// `(head type, relation, tail type)` node ids.
pub type Constraint = (NodeId, NodeId, NodeId);

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Violation {
    DanglingParent(NodeId),
    DuplicateName(String),
    RootCount(usize),
    LevelMismatch(NodeId),
    RoleMismatch(NodeId),
    Cycle(NodeId),
    DanglingReference(String),
    DuplicateId(NodeId),
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::DanglingParent(id) => write!(f, "dangling parent: {id}"),
            Violation::DuplicateName(n) => write!(f, "duplicate name: {n}"),
            Violation::RootCount(n) => write!(f, "expected exactly one root, found {n}"),
            Violation::LevelMismatch(id) => write!(f, "level mismatch: {id}"),
            Violation::RoleMismatch(id) => write!(f, "role mismatch: {id}"),
            Violation::Cycle(id) => write!(f, "parent cycle through: {id}"),
            Violation::DanglingReference(r) => write!(f, "dangling reference: {r}"),
            Violation::DuplicateId(id) => write!(f, "duplicate id: {id}"),
        }
    }
}

/// An immutable schema snapshot.
#[derive(Debug, Clone)]
pub struct SchemaGraph {
    task: Task,
    nodes: BTreeMap<NodeId, SchemaNode>,
    re_constraints: BTreeSet<Constraint>,
    ee_roles: BTreeMap<NodeId, Vec<NodeId>>,
    version: u32,
    by_name: HashMap<Name, NodeId>,
}

impl PartialEq for SchemaGraph {
    fn eq(&self, other: &Self) -> bool {
        self.task == other.task
            && self.nodes == other.nodes
            && self.re_constraints == other.re_constraints
            && self.ee_roles == other.ee_roles
            && self.version == other.version
    }
}

impl SchemaGraph {
    /// Assembles a graph without checking invariants; see [`SchemaGraph::validate`].
    pub fn from_parts(
        task: Task,
        nodes: impl IntoIterator<Item = SchemaNode>,
        re_constraints: BTreeSet<Constraint>,
        ee_roles: BTreeMap<NodeId, Vec<NodeId>>,
        version: u32,
    ) -> Self {
        let nodes: BTreeMap<NodeId, SchemaNode> =
            nodes.into_iter().map(|n| (n.id.clone(), n)).collect();
        let mut by_name = HashMap::new();
        for n in nodes.values() {
            by_name
                .entry(n.name.clone())
                .or_insert_with(|| n.id.clone());
        }
        SchemaGraph {
            task,
            nodes,
            re_constraints,
            ee_roles,
            version,
            by_name,
        }
    }

    /// Like [`SchemaGraph::from_parts`] but rejects graphs with violations.
    pub fn checked(
        task: Task,
        nodes: impl IntoIterator<Item = SchemaNode>,
        re_constraints: BTreeSet<Constraint>,
        ee_roles: BTreeMap<NodeId, Vec<NodeId>>,
        version: u32,
    ) -> Result<Self, SchemaError> {
        let g = Self::from_parts(task, nodes, re_constraints, ee_roles, version);
        let violations = g.validate();
        if violations.is_empty() {
            Ok(g)
        } else {
            Err(SchemaError::Invalid(violations))
        }
    }

    pub fn task(&self) -> Task {
        self.task
    }

    pub fn version(&self) -> u32 {
        self.version
    }

    pub fn with_version(mut self, version: u32) -> Self {
        self.version = version;
        self
    }

    pub fn node(&self, id: &NodeId) -> Option<&SchemaNode> {
        self.nodes.get(id)
    }

    pub fn contains(&self, id: &NodeId) -> bool {
        self.nodes.contains_key(id)
    }

    /// Nodes in id order.
    pub fn nodes(&self) -> impl Iterator<Item = &SchemaNode> {
        self.nodes.values()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn root(&self) -> Option<&SchemaNode> {
        self.nodes.values().find(|n| n.level == Level::Root)
    }

    pub fn find_by_name(&self, name: &Name) -> Option<&SchemaNode> {
        self.by_name.get(name).and_then(|id| self.nodes.get(id))
    }

    /// Looks up a label string, normalizing case and whitespace.
    pub fn find_label(&self, label: &str) -> Option<&SchemaNode> {
        Name::parse(label).ok().and_then(|n| self.find_by_name(&n))
    }

    pub fn re_constraints(&self) -> &BTreeSet<Constraint> {
        &self.re_constraints
    }

    pub fn ee_roles(&self) -> &BTreeMap<NodeId, Vec<NodeId>> {
        &self.ee_roles
    }

    pub fn roles_of(&self, event_type: &NodeId) -> &[NodeId] {
        self.ee_roles
            .get(event_type)
            .map(Vec::as_slice)
            .unwrap_or(&[])
    }

    /// Non-root nodes carrying `role`, in id order.
    pub fn nodes_with_role(&self, role: Role) -> impl Iterator<Item = &SchemaNode> {
        self.nodes.values().filter(move |n| n.role == Some(role))
    }

    pub fn subs(&self, role: Role) -> impl Iterator<Item = &SchemaNode> {
        self.nodes_with_role(role).filter(|n| n.level == Level::Sub)
    }

    pub fn majors(&self, role: Role) -> impl Iterator<Item = &SchemaNode> {
        self.nodes_with_role(role)
            .filter(|n| n.level == Level::Major)
    }

    /// Sub nodes of the task's primary role.
    pub fn primary_subs(&self) -> impl Iterator<Item = &SchemaNode> {
        self.subs(self.task.primary_role())
    }

    /// Names of every node with `role`, sorted.
    pub fn names_with_role(&self, role: Role) -> Vec<String> {
        let mut v: Vec<String> = self
            .nodes_with_role(role)
            .map(|n| n.name.to_string())
            .collect();
        v.sort();
        v
    }

    pub fn children<'a>(&'a self, id: &'a NodeId) -> impl Iterator<Item = &'a SchemaNode> + 'a {
        self.nodes
            .values()
            .filter(move |n| n.parent.as_ref() == Some(id))
    }

    /// Ancestor-or-self chain, deepest first. Stops at missing parents and
    /// at cycles.
    pub fn chain(&self, id: &NodeId) -> Vec<&SchemaNode> {
        let mut out = Vec::new();
        let mut cur = self.nodes.get(id);
        while let Some(n) = cur {
            if out.iter().any(|m: &&SchemaNode| m.id == n.id) {
                break;
            }
            out.push(n);
            cur = n.parent.as_ref().and_then(|p| self.nodes.get(p));
        }
        out
    }

    /// All invariant violations, empty for a well-formed graph.
    pub fn validate(&self) -> Vec<Violation> {
        let mut out = Vec::new();
        let roots: Vec<&SchemaNode> = self
            .nodes
            .values()
            .filter(|n| n.level == Level::Root)
            .collect();
        if roots.len() != 1 {
            out.push(Violation::RootCount(roots.len()));
        }

        let mut seen: BTreeMap<&Name, usize> = BTreeMap::new();
        for n in self.nodes.values() {
            *seen.entry(&n.name).or_default() += 1;
        }
        for (name, count) in seen {
            if count > 1 {
                out.push(Violation::DuplicateName(name.to_string()));
            }
        }

        for n in self.nodes.values() {
            match (n.level, &n.parent) {
                (Level::Root, None) => {
                    if n.role.is_some() {
                        out.push(Violation::RoleMismatch(n.id.clone()));
                    }
                }
                (Level::Root, Some(_)) => out.push(Violation::LevelMismatch(n.id.clone())),
                (_, None) => out.push(Violation::DanglingParent(n.id.clone())),
                (level, Some(pid)) => match self.nodes.get(pid) {
                    None => out.push(Violation::DanglingParent(pid.clone())),
                    Some(p) => {
                        let expected = if level == Level::Major {
                            Level::Root
                        } else {
                            Level::Major
                        };
                        if p.level != expected {
                            out.push(Violation::LevelMismatch(n.id.clone()));
                        }
                        if n.role.is_none() || (level == Level::Sub && p.role != n.role) {
                            out.push(Violation::RoleMismatch(n.id.clone()));
                        }
                    }
                },
            }
        }

        for n in self.nodes.values() {
            let chain = self.chain(&n.id);
            if let Some(last) = chain.last() {
                if let Some(p) = &last.parent {
                    if chain.iter().any(|c| &c.id == p) {
                        out.push(Violation::Cycle(n.id.clone()));
                    }
                }
            }
        }

        let check =
            |id: &NodeId, want: Role, ctx: &str, out: &mut Vec<Violation>| match self.nodes.get(id)
            {
                Some(n) if n.role == Some(want) => {}
                _ => out.push(Violation::DanglingReference(format!("{ctx} -> {id}"))),
            };
        for (h, r, t) in &self.re_constraints {
            let ctx = format!("constraint ({h}, {r}, {t})");
            check(h, Role::EntityType, &ctx, &mut out);
            check(r, Role::Relation, &ctx, &mut out);
            check(t, Role::EntityType, &ctx, &mut out);
        }
        for (evt, roles) in &self.ee_roles {
            check(evt, Role::EventType, "ee_roles", &mut out);
            for r in roles {
                check(r, Role::ArgRole, &format!("ee_roles[{evt}]"), &mut out);
            }
        }
        out
    }

    /// The sub-graph over `keep` (the root is always kept). Constraints and
    /// role lists are the images of this graph's constraints under label
    /// projection onto the kept nodes.
    pub fn restrict(&self, keep: &BTreeSet<NodeId>, version: u32) -> SchemaGraph {
        let nodes: Vec<SchemaNode> = self
            .nodes
            .values()
            .filter(|n| n.level == Level::Root || keep.contains(&n.id))
            .cloned()
            .collect();
        let bare =
            SchemaGraph::from_parts(self.task, nodes, BTreeSet::new(), BTreeMap::new(), version);
        let proj = LabelProjection::new(self, &bare);
        let mut constraints = BTreeSet::new();
        for (h, r, t) in &self.re_constraints {
            if let (Some(h), Some(r), Some(t)) =
                (proj.project_id(h), proj.project_id(r), proj.project_id(t))
            {
                constraints.insert((h.clone(), r.clone(), t.clone()));
            }
        }
        let mut roles: BTreeMap<NodeId, Vec<NodeId>> = BTreeMap::new();
        for (evt, rs) in &self.ee_roles {
            let Some(target) = proj.project_id(evt) else {
                continue;
            };
            let entry = roles.entry(target.clone()).or_default();
            for r in rs {
                if let Some(r) = proj.project_id(r) {
                    if !entry.contains(r) {
                        entry.push(r.clone());
                    }
                }
            }
        }
        roles.retain(|_, v| !v.is_empty());
        let SchemaGraph { nodes, .. } = bare;
        SchemaGraph::from_parts(self.task, nodes.into_values(), constraints, roles, version)
    }

    /// Renames nodes by name. Ids, parents and constraints are untouched.
    /// The version is bumped by one.
    pub fn apply_rename(&self, mapping: &BTreeMap<Name, Name>) -> Result<SchemaGraph, SchemaError> {
        for old in mapping.keys() {
            if self.find_by_name(old).is_none() {
                return Err(SchemaError::UnknownName(old.to_string()));
            }
        }
        let mut targets = BTreeSet::new();
        for new in mapping.values() {
            if !targets.insert(new) {
                return Err(SchemaError::RenameCollision(new.to_string()));
            }
            if self.find_by_name(new).is_some() && !mapping.contains_key(new) {
                return Err(SchemaError::RenameCollision(new.to_string()));
            }
        }
        let nodes = self.nodes.values().map(|n| {
            let mut n = n.clone();
            if let Some(new) = mapping.get(&n.name) {
                n.name = new.clone();
            }
            n
        });
        Ok(SchemaGraph::from_parts(
            self.task,
            nodes,
            self.re_constraints.clone(),
            self.ee_roles.clone(),
            self.version + 1,
        ))
    }

    pub fn from_json_str(s: &str) -> Result<SchemaGraph, SchemaError> {
        let file: SchemaFile = serde_json::from_str(s)?;
        file.into_graph()
    }

    pub fn load(path: impl AsRef<Path>) -> Result<SchemaGraph, SchemaError> {
        Self::from_json_str(&std::fs::read_to_string(path)?)
    }

    pub fn to_json_string(&self) -> String {
        let mut s =
            serde_json::to_string_pretty(&SchemaFile::from_graph(self)).expect("schema serializes");
        s.push('\n');
        s
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), SchemaError> {
        std::fs::write(path, self.to_json_string())?;
        Ok(())
    }
}

/// On-disk schema layout. Constraints and role lists refer to nodes by name.
#[derive(Debug, Serialize, Deserialize)]
struct SchemaFile {
    task: Task,
    nodes: Vec<NodeRecord>,
    #[serde(default)]
    re_constraints: Vec<[String; 3]>,
    #[serde(default)]
    ee_roles: BTreeMap<String, Vec<String>>,
    #[serde(default)]
    version: u32,
}

#[derive(Debug, Serialize, Deserialize)]
struct NodeRecord {
    id: String,
    name: Name,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    parent: Option<String>,
    level: Level,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    role: Option<Role>,
}

impl SchemaFile {
    fn from_graph(g: &SchemaGraph) -> Self {
        let name = |id: &NodeId| {
            g.node(id)
                .map(|n| n.name.to_string())
                .unwrap_or_else(|| id.0.clone())
        };
        SchemaFile {
            task: g.task,
            nodes: g
                .nodes()
                .map(|n| NodeRecord {
                    id: n.id.0.clone(),
                    name: n.name.clone(),
                    parent: n.parent.as_ref().map(|p| p.0.clone()),
                    level: n.level,
                    role: n.role,
                })
                .collect(),
            re_constraints: g
                .re_constraints
                .iter()
                .map(|(h, r, t)| [name(h), name(r), name(t)])
                .collect(),
            ee_roles: g
                .ee_roles
                .iter()
                .map(|(e, rs)| (name(e), rs.iter().map(name).collect()))
                .collect(),
            version: g.version,
        }
    }

    fn into_graph(self) -> Result<SchemaGraph, SchemaError> {
        let mut nodes: Vec<SchemaNode> = self
            .nodes
            .into_iter()
            .map(|r| SchemaNode {
                id: NodeId(r.id),
                name: r.name,
                parent: r.parent.map(NodeId),
                level: r.level,
                role: r.role,
            })
            .collect();
        let mut seen = HashSet::new();
        let dupes: Vec<Violation> = nodes
            .iter()
            .filter(|n| !seen.insert(&n.id))
            .map(|n| Violation::DuplicateId(n.id.clone()))
            .collect();
        if !dupes.is_empty() {
            return Err(SchemaError::Invalid(dupes));
        }
        if self.task == Task::Re && !nodes.iter().any(|n| n.role == Some(Role::EntityType)) {
            if let Some(root) = nodes.iter().find(|n| n.level == Level::Root) {
                nodes.push(synthetic_entity_node(root.id.clone()));
            }
        }
        let bare = SchemaGraph::from_parts(
            self.task,
            nodes,
            BTreeSet::new(),
            BTreeMap::new(),
            self.version,
        );
        let resolve = |label: &str, role: Role| -> Result<NodeId, SchemaError> {
            match bare.find_label(label) {
                Some(n) if n.role == Some(role) => Ok(n.id.clone()),
                _ => Err(SchemaError::UnknownReference(format!("{role} {label:?}"))),
            }
        };
        let mut constraints = BTreeSet::new();
        for [h, r, t] in &self.re_constraints {
            constraints.insert((
                resolve(h, Role::EntityType)?,
                resolve(r, Role::Relation)?,
                resolve(t, Role::EntityType)?,
            ));
        }
        let mut roles = BTreeMap::new();
        for (e, rs) in &self.ee_roles {
            let rs = rs
                .iter()
                .map(|r| resolve(r, Role::ArgRole))
                .collect::<Result<Vec<_>, _>>()?;
            roles.insert(resolve(e, Role::EventType)?, rs);
        }
        let SchemaGraph { nodes, .. } = bare;
        SchemaGraph::checked(
            self.task,
            nodes.into_values(),
            constraints,
            roles,
            self.version,
        )
    }
}

fn synthetic_entity_node(root: NodeId) -> SchemaNode {
    SchemaNode {
        id: NodeId::new(SYNTHETIC_ENTITY_TYPE),
        name: Name(vec![SYNTHETIC_ENTITY_TYPE.to_string()]),
        parent: Some(root),
        level: Level::Major,
        role: Some(Role::EntityType),
    }
}

/// Incremental construction of a well-formed schema. Node ids are derived
/// from names.
#[derive(Debug)]
pub struct SchemaBuilder {
    task: Task,
    nodes: Vec<SchemaNode>,
    constraints: Vec<(String, String, String)>,
    roles: Vec<(String, Vec<String>)>,
    version: u32,
}

impl SchemaBuilder {
    pub fn new(task: Task) -> Self {
        SchemaBuilder {
            task,
            nodes: vec![SchemaNode {
                id: NodeId::new("root"),
                name: Name(vec!["root".into()]),
                parent: None,
                level: Level::Root,
                role: None,
            }],
            constraints: Vec::new(),
            roles: Vec::new(),
            version: 0,
        }
    }

    pub fn version(mut self, v: u32) -> Self {
        self.version = v;
        self
    }

    pub fn major(mut self, name: &str, role: Role) -> Result<Self, SchemaError> {
        let name = Name::parse(name)?;
        self.nodes.push(SchemaNode {
            id: name.slug(),
            name,
            parent: Some(NodeId::new("root")),
            level: Level::Major,
            role: Some(role),
        });
        Ok(self)
    }

    pub fn sub(mut self, name: &str, parent: &str) -> Result<Self, SchemaError> {
        let pname = Name::parse(parent)?;
        let p = self
            .nodes
            .iter()
            .find(|n| n.name == pname)
            .ok_or_else(|| SchemaError::UnknownName(parent.to_string()))?;
        let (pid, role) = (p.id.clone(), p.role);
        let name = Name::parse(name)?;
        self.nodes.push(SchemaNode {
            id: name.slug(),
            name,
            parent: Some(pid),
            level: Level::Sub,
            role,
        });
        Ok(self)
    }

    pub fn constraint(mut self, head: &str, relation: &str, tail: &str) -> Self {
        self.constraints
            .push((head.into(), relation.into(), tail.into()));
        self
    }

    pub fn event_roles(mut self, event: &str, roles: &[&str]) -> Self {
        self.roles
            .push((event.into(), roles.iter().map(|r| r.to_string()).collect()));
        self
    }

    pub fn build(self) -> Result<SchemaGraph, SchemaError> {
        let file = SchemaFile {
            task: self.task,
            nodes: self
                .nodes
                .into_iter()
                .map(|n| NodeRecord {
                    id: n.id.0,
                    name: n.name,
                    parent: n.parent.map(|p| p.0),
                    level: n.level,
                    role: n.role,
                })
                .collect(),
            re_constraints: self
                .constraints
                .into_iter()
                .map(|(h, r, t)| [h, r, t])
                .collect(),
            ee_roles: self.roles.into_iter().collect(),
            version: self.version,
        };
        file.into_graph()
    }
}

/// A schema containing every name in `names` as a major node directly under
/// the root. Used to encode schemas that are given only as a list of names.
pub fn flat_schema(task: Task, role: Role, names: &[&str]) -> Result<SchemaGraph, SchemaError> {
    let mut b = SchemaBuilder::new(task);
    for n in names {
        b = b.major(n, role)?;
    }
    b.build()
}

/// Memoized mapping from raw-taxonomy nodes to the deepest present node on
/// their ancestor-or-self chain in a current schema.
///
/// A chain node is present when the current schema holds a node with the
/// same id and role (ids survive renames), or failing that a node with the
/// same name and role.
#[derive(Debug, Clone)]
pub struct LabelProjection {
    by_id: HashMap<NodeId, Option<NodeId>>,
    by_label: HashMap<String, (Role, Option<Name>)>,
    version: u32,
}

impl LabelProjection {
    pub fn new(raw: &SchemaGraph, current: &SchemaGraph) -> Self {
        let mut by_id = HashMap::new();
        let mut by_label = HashMap::new();
        for n in raw.nodes() {
            let Some(role) = n.role else { continue };
            let target = raw
                .chain(&n.id)
                .into_iter()
                .filter(|c| c.role.is_some())
                .find_map(|c| match current.node(&c.id) {
                    Some(m) if m.role == c.role => Some(m),
                    _ => current.find_by_name(&c.name).filter(|m| m.role == c.role),
                });
            by_id.insert(n.id.clone(), target.map(|t| t.id.clone()));
            by_label.insert(n.name.to_string(), (role, target.map(|t| t.name.clone())));
        }
        LabelProjection {
            by_id,
            by_label,
            version: current.version(),
        }
    }

    /// Version of the schema this projection targets.
    pub fn version(&self) -> u32 {
        self.version
    }

    /// Projection of a raw node id; `None` when the id is unknown or
    /// nothing on its chain is present.
    pub fn project_id(&self, raw: &NodeId) -> Option<&NodeId> {
        self.by_id.get(raw).and_then(Option::as_ref)
    }

    /// Projects a raw label string of the given role to the current name.
    pub fn project_label(&self, label: &str, role: Role) -> Result<Option<&Name>, SchemaError> {
        match self.by_label.get(&normalize_label(label)) {
            Some((r, target)) if *r == role => Ok(target.as_ref()),
            _ => Err(SchemaError::UnknownLabel(label.to_string())),
        }
    }
}

/// Deepest node on `raw_label`'s ancestor-or-self chain present in `current`.
pub fn project_label(
    raw_label: &NodeId,
    raw: &SchemaGraph,
    current: &SchemaGraph,
) -> Result<Option<NodeId>, SchemaError> {
    if !raw.contains(raw_label) {
        return Err(SchemaError::UnknownLabel(raw_label.to_string()));
    }
    Ok(LabelProjection::new(raw, current)
        .project_id(raw_label)
        .cloned())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ace_mini() -> SchemaGraph {
        SchemaBuilder::new(Task::Ee)
            .major("contact", Role::EventType)
            .unwrap()
            .sub("meet", "contact")
            .unwrap()
            .sub("phone write", "contact")
            .unwrap()
            .major("justice", Role::EventType)
            .unwrap()
            .sub("sentence", "justice")
            .unwrap()
            .sub("trial hearing", "justice")
            .unwrap()
            .major("life", Role::EventType)
            .unwrap()
            .sub("divorce", "life")
            .unwrap()
            .sub("marry", "life")
            .unwrap()
            .major("place", Role::ArgRole)
            .unwrap()
            .major("entity", Role::ArgRole)
            .unwrap()
            .event_roles("meet", &["entity", "place"])
            .event_roles("phone write", &["entity"])
            .build()
            .unwrap()
    }

    fn keep(g: &SchemaGraph, names: &[&str]) -> BTreeSet<NodeId> {
        names
            .iter()
            .map(|n| g.find_label(n).unwrap().id.clone())
            .collect()
    }

    #[test]
    fn well_formed_graph_has_no_violations() {
        assert!(ace_mini().validate().is_empty());
    }

    #[test]
    fn missing_parent_is_reported() {
        let g = ace_mini();
        let mut nodes: Vec<SchemaNode> = g.nodes().cloned().collect();
        nodes.push(SchemaNode {
            id: NodeId::new("orphan"),
            name: Name::parse("orphan").unwrap(),
            parent: Some(NodeId::new("X")),
            level: Level::Sub,
            role: Some(Role::EventType),
        });
        let g = SchemaGraph::from_parts(Task::Ee, nodes, BTreeSet::new(), BTreeMap::new(), 0);
        let v: Vec<String> = g.validate().iter().map(|v| v.to_string()).collect();
        assert_eq!(v, vec!["dangling parent: X"]);
    }

    #[test]
    fn duplicate_names_are_reported() {
        let g = ace_mini();
        let mut nodes: Vec<SchemaNode> = g.nodes().cloned().collect();
        nodes.push(SchemaNode {
            id: NodeId::new("meet2"),
            name: Name::parse("Meet").unwrap(),
            parent: Some(NodeId::new("contact")),
            level: Level::Sub,
            role: Some(Role::EventType),
        });
        let g = SchemaGraph::from_parts(Task::Ee, nodes, BTreeSet::new(), BTreeMap::new(), 0);
        // oracle: linear scan counting names
        let names: Vec<String> = g.nodes().map(|n| n.name.to_string()).collect();
        let dups: Vec<&String> = names
            .iter()
            .filter(|n| names.iter().filter(|m| m == n).count() > 1)
            .collect();
        assert_eq!(dups.len(), 2);
        let v: Vec<String> = g.validate().iter().map(|v| v.to_string()).collect();
        assert_eq!(v, vec!["duplicate name: meet"]);
    }

    #[test]
    fn deeper_hierarchies_are_rejected() {
        let err = SchemaBuilder::new(Task::Ner)
            .major("person", Role::EntityType)
            .unwrap()
            .sub("artist", "person")
            .unwrap()
            .sub("painter", "artist")
            .unwrap()
            .build()
            .unwrap_err();
        assert!(err.to_string().contains("level mismatch: painter"), "{err}");
    }

    #[test]
    fn dangling_constraint_reference_is_reported() {
        let g = ace_mini();
        let nodes: Vec<SchemaNode> = g.nodes().cloned().collect();
        let mut roles = BTreeMap::new();
        roles.insert(NodeId::new("meet"), vec![NodeId::new("ghost")]);
        let g = SchemaGraph::from_parts(Task::Ee, nodes, BTreeSet::new(), roles, 0);
        assert_eq!(g.validate().len(), 1);
    }

    #[test]
    fn projection_climbs_to_present_major() {
        let raw = ace_mini();
        let s1 = raw.restrict(&keep(&raw, &["contact", "justice", "sentence"]), 1);
        let meet = raw.find_label("meet").unwrap().id.clone();
        assert_eq!(
            project_label(&meet, &raw, &s1).unwrap(),
            Some(NodeId::new("contact"))
        );
        let s2 = raw.restrict(&keep(&raw, &["contact", "meet"]), 2);
        assert_eq!(
            project_label(&meet, &raw, &s2).unwrap(),
            Some(NodeId::new("meet"))
        );
    }

    #[test]
    fn projection_with_empty_chain_is_none() {
        let raw = ace_mini();
        let s = raw.restrict(&keep(&raw, &["contact", "meet"]), 1);
        let sentence = raw.find_label("sentence").unwrap().id.clone();
        assert_eq!(project_label(&sentence, &raw, &s).unwrap(), None);
    }

    #[test]
    fn projection_of_unknown_label_errors() {
        let raw = ace_mini();
        let err = project_label(&NodeId::new("nope"), &raw, &raw).unwrap_err();
        assert_eq!(err.to_string(), "label not in raw taxonomy: nope");
        let p = LabelProjection::new(&raw, &raw);
        assert!(p.project_label("attack", Role::EventType).is_err());
        assert!(p.project_label("meet", Role::ArgRole).is_err());
    }

    #[test]
    fn restrict_projects_role_lists() {
        let raw = ace_mini();
        let s = raw.restrict(&keep(&raw, &["contact", "place", "entity"]), 1);
        assert_eq!(
            s.roles_of(&NodeId::new("contact")),
            &[NodeId::new("entity"), NodeId::new("place")]
        );
        assert!(s.validate().is_empty());
    }

    #[test]
    fn rename_keeps_shape_and_bumps_version() {
        let raw = ace_mini();
        let mut m = BTreeMap::new();
        m.insert(
            Name::parse("divorce").unwrap(),
            Name::parse("separate").unwrap(),
        );
        let g = raw.apply_rename(&m).unwrap();
        assert_eq!(g.len(), raw.len());
        assert_eq!(g.version(), raw.version() + 1);
        assert!(g.find_label("divorce").is_none());
        assert_eq!(g.find_label("separate").unwrap().id, NodeId::new("divorce"));
        assert!(g.validate().is_empty());
    }

    #[test]
    fn empty_rename_is_identity_up_to_version() {
        let raw = ace_mini();
        let g = raw.apply_rename(&BTreeMap::new()).unwrap();
        assert_eq!(g.clone().with_version(raw.version()), raw);
        assert_eq!(g.version(), raw.version() + 1);
    }

    #[test]
    fn rename_and_back_restores_names() {
        let raw = ace_mini();
        let fwd: BTreeMap<Name, Name> =
            [(Name::parse("marry").unwrap(), Name::parse("wed").unwrap())].into();
        let back: BTreeMap<Name, Name> = fwd.iter().map(|(a, b)| (b.clone(), a.clone())).collect();
        let g = raw.apply_rename(&fwd).unwrap().apply_rename(&back).unwrap();
        let names = |g: &SchemaGraph| {
            g.nodes()
                .map(|n| n.name.to_string())
                .collect::<BTreeSet<_>>()
        };
        assert_eq!(names(&g), names(&raw));
    }

    #[test]
    fn rename_collisions_and_unknowns_error() {
        let raw = ace_mini();
        let m: BTreeMap<Name, Name> = [(
            Name::parse("marry").unwrap(),
            Name::parse("divorce").unwrap(),
        )]
        .into();
        assert!(
            matches!(raw.apply_rename(&m), Err(SchemaError::RenameCollision(n)) if n == "divorce")
        );
        let m: BTreeMap<Name, Name> =
            [(Name::parse("elope").unwrap(), Name::parse("x").unwrap())].into();
        assert!(matches!(raw.apply_rename(&m), Err(SchemaError::UnknownName(n)) if n == "elope"));
        // swapping two names is not a collision
        let m: BTreeMap<Name, Name> = [
            (
                Name::parse("marry").unwrap(),
                Name::parse("divorce").unwrap(),
            ),
            (
                Name::parse("divorce").unwrap(),
                Name::parse("marry").unwrap(),
            ),
        ]
        .into();
        assert!(raw.apply_rename(&m).is_ok());
    }

    #[test]
    fn json_round_trip() {
        let raw = ace_mini();
        let s = raw.to_json_string();
        let back = SchemaGraph::from_json_str(&s).unwrap();
        assert_eq!(back, raw);
        assert_eq!(back.to_json_string(), s);
    }

    #[test]
    fn json_with_named_constraints_loads() {
        let s = r#"{"task":"RE","nodes":[
            {"id":"n0","name":"root","level":"root"},
            {"id":"e","name":"entity types","parent":"n0","level":"major","role":"entity-type"},
            {"id":"p","name":"person","parent":"e","level":"sub","role":"entity-type"},
            {"id":"l","name":"location","parent":"e","level":"sub","role":"entity-type"},
            {"id":"r","name":"people","parent":"n0","level":"major","role":"relation"},
            {"id":"n1","name":"place lived","parent":"r","level":"sub","role":"relation"}],
            "re_constraints":[["person","place lived","location"]],"version":3}"#;
        let g = SchemaGraph::from_json_str(s).unwrap();
        assert_eq!(g.version(), 3);
        assert_eq!(
            g.re_constraints().iter().next().unwrap(),
            &(NodeId::new("p"), NodeId::new("n1"), NodeId::new("l"))
        );
    }

    #[test]
    fn relation_schema_without_entity_types_gets_synthetic_type() {
        let g = SchemaBuilder::new(Task::Re)
            .major("business", Role::Relation)
            .unwrap()
            .sub("founders", "business")
            .unwrap()
            .constraint("entity", "founders", "entity")
            .build()
            .unwrap();
        let e = g.find_label(SYNTHETIC_ENTITY_TYPE).unwrap();
        assert_eq!((e.level, e.role), (Level::Major, Some(Role::EntityType)));
        assert_eq!(g.re_constraints().len(), 1);
    }

    #[test]
    fn names_are_case_and_space_insensitive() {
        assert_eq!(
            Name::parse("Trial  Hearing").unwrap(),
            Name::parse("trial hearing").unwrap()
        );
        assert!(Name::parse("  ").is_err());
        assert!(Name::parse("a [sep]").is_err());
    }
}
