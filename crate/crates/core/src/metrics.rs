//! Span-level micro-F1 and per-iteration report aggregation.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{Annotation, Example};

#[derive(Debug, Error, PartialEq)]
pub enum MetricsError {
    #[error("example ids differ: {} only in predictions [{}], {} only in gold [{}]",
        .pred_only.len(), .pred_only.join(", "), .gold_only.len(), .gold_only.join(", "))]
    IdMismatch {
        pred_only: Vec<String>,
        gold_only: Vec<String>,
    },
    #[error("duplicate example id {0}")]
    DuplicateId(String),
    #[error("rows cover different iterations (row lengths {0:?})")]
    Ragged(Vec<usize>),
    #[error("no iterations to average")]
    Empty,
    #[error("unknown metric {0:?}; expected entity, rel_strict, evt_tri or evt_arg")]
    UnknownMetric(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MetricKind {
    Entity,
    RelStrict,
    EvtTri,
    EvtArg,
}

impl MetricKind {
    pub const ALL: [MetricKind; 4] = [
        MetricKind::Entity,
        MetricKind::RelStrict,
        MetricKind::EvtTri,
        MetricKind::EvtArg,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            MetricKind::Entity => "entity",
            MetricKind::RelStrict => "rel_strict",
            MetricKind::EvtTri => "evt_tri",
            MetricKind::EvtArg => "evt_arg",
        }
    }

    /// Column label used in rendered tables.
    pub fn display_name(self) -> &'static str {
        match self {
            MetricKind::Entity => "Ent-F1",
            MetricKind::RelStrict => "Rel-S",
            MetricKind::EvtTri => "Evt-Tri",
            MetricKind::EvtArg => "Evt-Arg",
        }
    }
}

impl fmt::Display for MetricKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for MetricKind {
    type Err = MetricsError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        MetricKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| MetricsError::UnknownMetric(s.to_string()))
    }
}

/// What a prediction must reproduce to count as correct. Mentions compare by
/// surface string only; offsets are not scored.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum MatchKey {
    Entity {
        text: String,
        label: String,
    },
    Relation {
        head: String,
        head_type: String,
        relation: String,
        tail: String,
        tail_type: String,
    },
    Trigger {
        text: String,
        label: String,
    },
    Argument {
        text: String,
        role: String,
        event: String,
    },
}

pub fn match_keys(annotations: &[Annotation], kind: MetricKind) -> Vec<MatchKey> {
    let mut out = Vec::new();
    for a in annotations {
        match (a, kind) {
            (Annotation::Entity(e), MetricKind::Entity) => out.push(MatchKey::Entity {
                text: e.mention.text.clone(),
                label: e.label.clone(),
            }),
            (Annotation::Relation(r), MetricKind::RelStrict) => out.push(MatchKey::Relation {
                head: r.head.text.clone(),
                head_type: r.head_type.clone(),
                relation: r.relation.clone(),
                tail: r.tail.text.clone(),
                tail_type: r.tail_type.clone(),
            }),
            (Annotation::Event(e), MetricKind::EvtTri) => out.push(MatchKey::Trigger {
                text: e.trigger.text.clone(),
                label: e.label.clone(),
            }),
            (Annotation::Event(e), MetricKind::EvtArg) => {
                out.extend(e.args.iter().map(|arg| MatchKey::Argument {
                    text: arg.mention.text.clone(),
                    role: arg.role.clone(),
                    event: e.label.clone(),
                }))
            }
            _ => {}
        }
    }
    out
}

/// How repeated keys within one example are counted.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub enum Matching {
    /// Keys are deduplicated per example before counting.
    #[default]
    Set,
    /// Each repeat counts; a match consumes one copy on each side.
    Multiset,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Counts {
    pub n_pred: usize,
    pub n_gold: usize,
    pub n_correct: usize,
}

impl std::ops::Add for Counts {
    type Output = Counts;
    fn add(self, o: Counts) -> Counts {
        Counts {
            n_pred: self.n_pred + o.n_pred,
            n_gold: self.n_gold + o.n_gold,
            n_correct: self.n_correct + o.n_correct,
        }
    }
}

fn tally(pred: Vec<MatchKey>, gold: Vec<MatchKey>, matching: Matching) -> Counts {
    match matching {
        Matching::Set => {
            let p: BTreeSet<_> = pred.into_iter().collect();
            let g: BTreeSet<_> = gold.into_iter().collect();
            Counts {
                n_pred: p.len(),
                n_gold: g.len(),
                n_correct: p.intersection(&g).count(),
            }
        }
        Matching::Multiset => {
            let mut g: BTreeMap<&MatchKey, usize> = BTreeMap::new();
            for k in &gold {
                *g.entry(k).or_default() += 1;
            }
            let mut correct = 0;
            for k in &pred {
                if let Some(c) = g.get_mut(k).filter(|c| **c > 0) {
                    *c -= 1;
                    correct += 1;
                }
            }
            Counts {
                n_pred: pred.len(),
                n_gold: gold.len(),
                n_correct: correct,
            }
        }
    }
}

/// Precision, recall and F1 with the counts they came from.
/// Invariant: f1 = 2PR/(P+R) when P+R > 0, else 0.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Prf {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub n_pred: usize,
    pub n_gold: usize,
    pub n_correct: usize,
}

impl Prf {
    pub fn from_counts(c: Counts) -> Prf {
        let ratio = |n: usize, d: usize| if d == 0 { 0.0 } else { n as f64 / d as f64 };
        let precision = ratio(c.n_correct, c.n_pred);
        let recall = ratio(c.n_correct, c.n_gold);
        let f1 = if precision + recall > 0.0 {
            2.0 * precision * recall / (precision + recall)
        } else {
            0.0
        };
        Prf {
            precision,
            recall,
            f1,
            n_pred: c.n_pred,
            n_gold: c.n_gold,
            n_correct: c.n_correct,
        }
    }
}

fn index_by_id(examples: &[Example]) -> Result<HashMap<&str, &Example>, MetricsError> {
    let mut out = HashMap::with_capacity(examples.len());
    for e in examples {
        if out.insert(e.id.as_str(), e).is_some() {
            return Err(MetricsError::DuplicateId(e.id.clone()));
        }
    }
    Ok(out)
}

/// Micro-pooled P/R/F1 over examples aligned by id.
pub fn micro_f1(pred: &[Example], gold: &[Example], kind: MetricKind) -> Result<Prf, MetricsError> {
    micro_f1_with(pred, gold, kind, Matching::Set)
}

pub fn micro_f1_with(
    pred: &[Example],
    gold: &[Example],
    kind: MetricKind,
    matching: Matching,
) -> Result<Prf, MetricsError> {
    let p = index_by_id(pred)?;
    let g = index_by_id(gold)?;
    let mut pred_only: Vec<String> = p
        .keys()
        .filter(|id| !g.contains_key(*id))
        .map(|s| s.to_string())
        .collect();
    let mut gold_only: Vec<String> = g
        .keys()
        .filter(|id| !p.contains_key(*id))
        .map(|s| s.to_string())
        .collect();
    if !pred_only.is_empty() || !gold_only.is_empty() {
        pred_only.sort();
        gold_only.sort();
        return Err(MetricsError::IdMismatch {
            pred_only,
            gold_only,
        });
    }
    let counts = gold
        .par_iter()
        .map(|ge| {
            let pe = p[ge.id.as_str()];
            tally(
                match_keys(&pe.annotations, kind),
                match_keys(&ge.annotations, kind),
                matching,
            )
        })
        .reduce(Counts::default, |a, b| a + b);
    Ok(Prf::from_counts(counts))
}

/// Arithmetic mean of per-iteration scores.
pub fn iteration_average(f1s: &[f64]) -> Result<f64, MetricsError> {
    if f1s.is_empty() {
        return Err(MetricsError::Empty);
    }
    Ok(f1s.iter().sum::<f64>() / f1s.len() as f64)
}

/// Two decimals, halves rounded up. The small bias absorbs binary
/// representation error in values such as 57.555.
pub fn format_2dp(x: f64) -> String {
    let cents = (x * 100.0 + 0.5 + 1e-9).floor();
    format!("{:.2}", cents / 100.0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationScore {
    pub i: usize,
    pub p: f64,
    pub r: f64,
    pub f1: f64,
    #[serde(default)]
    pub n_pred: usize,
    #[serde(default)]
    pub n_gold: usize,
    #[serde(default)]
    pub n_correct: usize,
}

impl IterationScore {
    pub fn new(i: usize, prf: &Prf) -> Self {
        IterationScore {
            i,
            p: prf.precision,
            r: prf.recall,
            f1: prf.f1,
            n_pred: prf.n_pred,
            n_gold: prf.n_gold,
            n_correct: prf.n_correct,
        }
    }

    /// A score known only by its F1, as when transcribing published rows.
    pub fn f1_only(i: usize, f1: f64) -> Self {
        IterationScore {
            i,
            p: 0.0,
            r: 0.0,
            f1,
            n_pred: 0,
            n_gold: 0,
            n_correct: 0,
        }
    }
}

/// One (model, metric) row: per-iteration scores in [0, 1] and their mean.
/// Invariant: `ave` is the mean of the listed f1 values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub metric: MetricKind,
    #[serde(default)]
    pub model: String,
    pub iterations: Vec<IterationScore>,
    pub ave: f64,
}

impl MetricsReport {
    pub fn new(
        model: impl Into<String>,
        metric: MetricKind,
        mut iterations: Vec<IterationScore>,
    ) -> Result<Self, MetricsError> {
        iterations.sort_by_key(|s| s.i);
        let f1s: Vec<f64> = iterations.iter().map(|s| s.f1).collect();
        Ok(MetricsReport {
            metric,
            model: model.into(),
            ave: iteration_average(&f1s)?,
            iterations,
        })
    }

    /// Merges rows of the same model and metric, later scores replacing
    /// earlier ones for the same iteration.
    pub fn merge(reports: Vec<MetricsReport>) -> Result<Vec<MetricsReport>, MetricsError> {
        let mut grouped: BTreeMap<(String, MetricKind), BTreeMap<usize, IterationScore>> =
            BTreeMap::new();
        for r in reports {
            let slot = grouped.entry((r.model, r.metric)).or_default();
            for s in r.iterations {
                slot.insert(s.i, s);
            }
        }
        grouped
            .into_iter()
            .map(|((model, metric), its)| {
                MetricsReport::new(model, metric, its.into_values().collect())
            })
            .collect()
    }

    pub fn to_json_string(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }
}

/// Markdown table with one row per (model, metric), F1 x100 to two decimals.
/// Every row must cover the same iteration indices.
pub fn render_report(reports: &[MetricsReport]) -> Result<String, MetricsError> {
    let first = reports.first().ok_or(MetricsError::Empty)?;
    let indices: Vec<usize> = first.iterations.iter().map(|s| s.i).collect();
    if reports
        .iter()
        .any(|r| !r.iterations.iter().map(|s| s.i).eq(indices.iter().copied()))
    {
        return Err(MetricsError::Ragged(
            reports.iter().map(|r| r.iterations.len()).collect(),
        ));
    }
    let mut rows: Vec<Vec<String>> = Vec::with_capacity(reports.len() + 1);
    let mut header = vec!["Model".to_string(), "Metric".to_string()];
    header.extend(indices.iter().map(|i| format!("Iter {i}")));
    header.push("AVE".into());
    rows.push(header);
    for r in reports {
        let mut row = vec![r.model.clone(), r.metric.display_name().to_string()];
        row.extend(r.iterations.iter().map(|s| format_2dp(s.f1 * 100.0)));
        row.push(format_2dp(r.ave * 100.0));
        rows.push(row);
    }
    let widths: Vec<usize> = (0..rows[0].len())
        .map(|c| {
            rows.iter()
                .map(|r| r[c].chars().count())
                .max()
                .unwrap_or(0)
                .max(3)
        })
        .collect();
    let line = |cells: &[String]| {
        let padded: Vec<String> = cells
            .iter()
            .zip(&widths)
            .enumerate()
            .map(|(c, (s, w))| {
                if c < 2 {
                    format!("{s:<w$}")
                } else {
                    format!("{s:>w$}")
                }
            })
            .collect();
        format!("| {} |\n", padded.join(" | "))
    };
    let mut out = line(&rows[0]);
    let rule: Vec<String> = widths
        .iter()
        .enumerate()
        .map(|(c, w)| {
            if c < 2 {
                "-".repeat(*w)
            } else {
                format!("{}:", "-".repeat(w - 1))
            }
        })
        .collect();
    out.push_str(&format!("| {} |\n", rule.join(" | ")));
    for r in &rows[1..] {
        out.push_str(&line(r));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{Entity, Mention, Relation};

    fn ent(text: &str, label: &str) -> Annotation {
        Annotation::Entity(Entity {
            mention: Mention::unlocated(text),
            label: label.into(),
        })
    }

    fn rel(h: &str, ht: &str, r: &str, t: &str, tt: &str) -> Annotation {
        Annotation::Relation(Relation {
            head: Mention::unlocated(h),
            head_type: ht.into(),
            relation: r.into(),
            tail: Mention::unlocated(t),
            tail_type: tt.into(),
        })
    }

    fn ex(id: &str, anns: Vec<Annotation>) -> Example {
        let mut e = Example::new(id, "text");
        e.annotations = anns;
        e
    }

    #[test]
    fn perfect_prediction() {
        let g = vec![ex("1", vec![ent("Kim", "person")])];
        let prf = micro_f1(&g, &g, MetricKind::Entity).unwrap();
        assert_eq!((prf.precision, prf.recall, prf.f1), (1.0, 1.0, 1.0));
    }

    #[test]
    fn hand_case_four_sevenths() {
        let gold = vec![ex(
            "1",
            vec![ent("a", "x"), ent("b", "x"), ent("c", "x"), ent("d", "x")],
        )];
        let pred = vec![ex("1", vec![ent("a", "x"), ent("b", "x"), ent("e", "x")])];
        let prf = micro_f1(&pred, &gold, MetricKind::Entity).unwrap();
        assert!((prf.precision - 2.0 / 3.0).abs() < 1e-12);
        assert!((prf.recall - 0.5).abs() < 1e-12);
        assert!((prf.f1 - 4.0 / 7.0).abs() < 1e-12);
    }

    #[test]
    fn wrong_tail_type_is_incorrect_under_strict() {
        let gold = vec![ex(
            "1",
            vec![rel(
                "Queens",
                "location",
                "contains",
                "Douglaston",
                "location",
            )],
        )];
        let pred = vec![ex(
            "1",
            vec![rel(
                "Queens",
                "location",
                "contains",
                "Douglaston",
                "person",
            )],
        )];
        assert_eq!(
            micro_f1(&pred, &gold, MetricKind::RelStrict)
                .unwrap()
                .n_correct,
            0
        );
    }

    #[test]
    fn set_and_multiset_matching() {
        let gold = vec![ex("1", vec![ent("a", "x")])];
        let pred = vec![ex("1", vec![ent("a", "x"), ent("a", "x")])];
        let set = micro_f1(&pred, &gold, MetricKind::Entity).unwrap();
        assert_eq!((set.n_pred, set.n_correct), (1, 1));
        let multi = micro_f1_with(&pred, &gold, MetricKind::Entity, Matching::Multiset).unwrap();
        assert_eq!((multi.n_pred, multi.n_correct), (2, 1));
    }

    #[test]
    fn empty_denominators_are_zero() {
        let g = vec![ex("1", vec![])];
        let prf = micro_f1(&g, &g, MetricKind::EvtArg).unwrap();
        assert_eq!((prf.precision, prf.recall, prf.f1), (0.0, 0.0, 0.0));
    }

    #[test]
    fn id_mismatch_lists_ids() {
        let gold = vec![ex("1", vec![]), ex("2", vec![])];
        let pred = vec![ex("1", vec![]), ex("3", vec![])];
        let err = micro_f1(&pred, &gold, MetricKind::Entity).unwrap_err();
        assert_eq!(
            err,
            MetricsError::IdMismatch {
                pred_only: vec!["3".into()],
                gold_only: vec!["2".into()]
            }
        );
        assert!(err.to_string().contains("[3]"));
    }

    #[test]
    fn rounding_half_up() {
        assert_eq!(format_2dp(57.555), "57.56");
        assert_eq!(format_2dp(59.2243), "59.22");
        assert_eq!(format_2dp(0.0), "0.00");
        assert_eq!(format_2dp(100.0), "100.00");
    }

    #[test]
    fn published_rows_average() {
        let uie = [72.72, 66.78, 62.24, 58.29, 55.08, 51.42, 48.04];
        assert_eq!(format_2dp(iteration_average(&uie).unwrap()), "59.22");
        assert_eq!(format_2dp(iteration_average(&[42.5]).unwrap()), "42.50");
        assert!(iteration_average(&[]).is_err());
    }

    #[test]
    fn rendered_table_layout() {
        let row = |model: &str, f: &[f64]| {
            let its = f
                .iter()
                .enumerate()
                .map(|(i, x)| IterationScore::f1_only(i + 1, x / 100.0))
                .collect();
            MetricsReport::new(model, MetricKind::Entity, its).unwrap()
        };
        let uie = row("UIE", &[72.72, 66.78, 62.24, 58.29, 55.08, 51.42, 48.04]);
        let tanl = row("TANL", &[71.52, 65.21, 60.38, 56.37, 53.21, 49.66, 46.55]);
        let table = render_report(&[tanl, uie.clone()]).unwrap();
        let lines: Vec<&str> = table.lines().collect();
        assert_eq!(lines.len(), 4);
        assert!(
            lines[0].contains("Iter 1")
                && lines[0].contains("Iter 7")
                && lines[0].trim_end().ends_with("AVE |")
        );
        assert!(lines[2].contains("57.56"));
        for cell in [
            "72.72", "66.78", "62.24", "58.29", "55.08", "51.42", "48.04", "59.22",
        ] {
            assert!(lines[3].contains(cell), "{cell} missing from {}", lines[3]);
        }
        let short = row("X", &[1.0]);
        assert!(matches!(
            render_report(&[uie, short]),
            Err(MetricsError::Ragged(_))
        ));
    }

    #[test]
    fn json_report_shape() {
        let prf = Prf::from_counts(Counts {
            n_pred: 3,
            n_gold: 4,
            n_correct: 2,
        });
        let r = MetricsReport::new(
            "T5",
            MetricKind::RelStrict,
            vec![IterationScore::new(1, &prf)],
        )
        .unwrap();
        let v: serde_json::Value = serde_json::from_str(&r.to_json_string()).unwrap();
        assert_eq!(v["metric"], "rel_strict");
        assert_eq!(v["iterations"][0]["i"], 1);
        assert!(v["ave"].as_f64().unwrap() > 0.57);
        let back: MetricsReport = serde_json::from_value(v).unwrap();
        assert_eq!(back, r);
    }

    #[test]
    fn merge_groups_rows() {
        let a = MetricsReport::new(
            "M",
            MetricKind::Entity,
            vec![IterationScore::f1_only(2, 0.4)],
        )
        .unwrap();
        let b = MetricsReport::new(
            "M",
            MetricKind::Entity,
            vec![IterationScore::f1_only(1, 0.6)],
        )
        .unwrap();
        let merged = MetricsReport::merge(vec![a, b]).unwrap();
        assert_eq!(merged.len(), 1);
        assert_eq!(
            merged[0].iterations.iter().map(|s| s.i).collect::<Vec<_>>(),
            vec![1, 2]
        );
        assert!((merged[0].ave - 0.5).abs() < 1e-12);
    }
}
