use std::collections::BTreeSet;

use proptest::prelude::*;

use schemakg::corpus::{Annotation, Entity, Example, Mention};
use schemakg::decode::{Decoder, HashScorer};
use schemakg::embed::{cosine, npmi, CoocTable};
use schemakg::evolve::{
    build_benchmark, iteration_rng, sample_k, BenchmarkInputs, EvolutionConfig, Strategy,
};
use schemakg::lineal::{delinearize, linearize};
use schemakg::metrics::{format_2dp, micro_f1, MetricKind};
use schemakg::presets::{ace_schema, nerd_schema, nyt_schema, toy_dataset, Dataset, ToySizes};
use schemakg::schema::{flat_schema, Level, NodeId, Role, SchemaGraph, Task};

fn presets() -> [SchemaGraph; 3] {
    [nerd_schema(), nyt_schema(), ace_schema()]
}

/// A parent-closed node set: the chosen subs, their majors, and everything
/// outside the primary role.
fn closed_subset(raw: &SchemaGraph, mask: &[bool]) -> BTreeSet<NodeId> {
    let primary = raw.task().primary_role();
    let mut keep = BTreeSet::new();
    for n in raw
        .nodes()
        .filter(|n| n.role.is_some() && n.role != Some(primary))
    {
        keep.insert(n.id.clone());
    }
    for (n, on) in raw.primary_subs().zip(mask.iter().cycle()) {
        if *on {
            keep.insert(n.id.clone());
            keep.extend(n.parent.clone());
        }
    }
    keep.remove(&NodeId::new("root"));
    keep
}

fn entity(text: &str, label: &str) -> Annotation {
    Annotation::Entity(Entity {
        mention: Mention::unlocated(text),
        label: label.into(),
    })
}

fn examples(sets: &[Vec<(u8, u8)>]) -> Vec<Example> {
    sets.iter()
        .enumerate()
        .map(|(i, anns)| {
            let mut e = Example::new(format!("e{i}"), "text");
            e.annotations = anns
                .iter()
                .map(|(t, l)| entity(&format!("m{t}"), &format!("l{l}")))
                .collect();
            e
        })
        .collect()
}

fn annotation_sets() -> impl proptest::strategy::Strategy<Value = Vec<Vec<(u8, u8)>>> {
    prop::collection::vec(prop::collection::vec((0u8..4, 0u8..3), 0..6), 1..5)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn restriction_of_a_closed_subset_is_valid(which in 0usize..3, mask in prop::collection::vec(any::<bool>(), 1..80)) {
        let raw = &presets()[which];
        let keep = closed_subset(raw, &mask);
        let s = raw.restrict(&keep, 3);
        prop_assert!(s.validate().is_empty(), "{:?}", s.validate());
        prop_assert_eq!(s.version(), 3);
        let ids: BTreeSet<NodeId> = s.nodes().filter(|n| n.level != Level::Root).map(|n| n.id.clone()).collect();
        prop_assert_eq!(ids, keep);
        let back = SchemaGraph::from_json_str(&s.to_json_string()).unwrap();
        prop_assert_eq!(back, s);
    }

    #[test]
    fn projection_lands_on_the_ancestor_chain(which in 0usize..3, mask in prop::collection::vec(any::<bool>(), 1..80)) {
        let raw = &presets()[which];
        let s = raw.restrict(&closed_subset(raw, &mask), 2);
        for n in raw.nodes().filter(|n| n.role.is_some()) {
            let chain: Vec<&NodeId> = raw.chain(&n.id).into_iter().map(|c| &c.id).collect();
            let deepest_present = chain.iter().find(|id| s.contains(id)).filter(|id| id.as_str() != "root");
            let got = schemakg::schema::project_label(&n.id, raw, &s).unwrap();
            prop_assert_eq!(got.as_ref(), deepest_present.copied());
        }
    }

    #[test]
    fn linearization_round_trips(spans in prop::collection::vec((0usize..10, 1usize..3, 0usize..8), 0..6)) {
        let raw = nerd_schema();
        let labels = raw.names_with_role(Role::EntityType);
        let text: Vec<String> = (0..12).map(|k| format!("W{k:02}")).collect();
        let text = text.join(" ");
        let anns: Vec<Annotation> = spans
            .iter()
            .map(|&(start, len, label)| {
                let surface: Vec<String> = (start..start + len).map(|k| format!("W{k:02}")).collect();
                Annotation::Entity(Entity {
                    mention: Mention::located_in(&text, &surface.join(" ")).unwrap(),
                    label: labels[label * 7 % labels.len()].clone(),
                })
            })
            .collect();
        let seq = linearize(&anns, Task::Ner).unwrap();
        let back = delinearize(&seq, Task::Ner, &raw, &text);
        prop_assert!(back.diagnostics.is_empty());
        let canon = |a: Vec<Annotation>| Example { id: "x".into(), text: text.clone(), annotations: a }.canonical_annotations();
        prop_assert_eq!(canon(back.annotations), canon(anns.clone()));
        // record order does not depend on input order
        let mut reversed = anns;
        reversed.reverse();
        prop_assert_eq!(linearize(&reversed, Task::Ner).unwrap(), seq);
    }

    #[test]
    fn micro_f1_is_symmetric_and_bounded(gold in annotation_sets(), pred in annotation_sets()) {
        let n = gold.len().min(pred.len());
        let (g, p) = (examples(&gold[..n]), examples(&pred[..n]));
        let a = micro_f1(&p, &g, MetricKind::Entity).unwrap();
        let b = micro_f1(&g, &p, MetricKind::Entity).unwrap();
        prop_assert_eq!(a.precision, b.recall);
        prop_assert_eq!(a.recall, b.precision);
        prop_assert!((a.f1 - b.f1).abs() < 1e-15);
        prop_assert!((0.0..=1.0).contains(&a.f1));
        prop_assert!(a.n_correct <= a.n_pred.min(a.n_gold));
    }

    #[test]
    fn duplicate_predictions_do_not_change_set_f1(gold in annotation_sets(), pred in annotation_sets()) {
        let n = gold.len().min(pred.len());
        let (g, p) = (examples(&gold[..n]), examples(&pred[..n]));
        let mut doubled = p.clone();
        for e in &mut doubled {
            let copy = e.annotations.clone();
            e.annotations.extend(copy);
        }
        prop_assert_eq!(micro_f1(&p, &g, MetricKind::Entity).unwrap(), micro_f1(&doubled, &g, MetricKind::Entity).unwrap());
    }

    #[test]
    fn perfect_prediction_scores_one(gold in annotation_sets()) {
        let g = examples(&gold);
        let prf = micro_f1(&g, &g, MetricKind::Entity).unwrap();
        let any = g.iter().any(|e| !e.annotations.is_empty());
        prop_assert_eq!(prf.f1, if any { 1.0 } else { 0.0 });
    }

    #[test]
    fn cosine_is_scale_invariant_and_bounded(
        a in prop::collection::vec(-10.0f64..10.0, 4),
        b in prop::collection::vec(-10.0f64..10.0, 4),
        k in 0.01f64..100.0,
    ) {
        prop_assume!(a.iter().any(|x| x.abs() > 1e-3) && b.iter().any(|x| x.abs() > 1e-3));
        let c = cosine(&a, &b).unwrap();
        let scaled: Vec<f64> = b.iter().map(|x| x * k).collect();
        prop_assert!((cosine(&a, &scaled).unwrap() - c).abs() < 1e-9);
        prop_assert!((-1.0 - 1e-12..=1.0 + 1e-12).contains(&c));
        prop_assert!((cosine(&b, &a).unwrap() - c).abs() < 1e-15);
    }

    #[test]
    fn npmi_is_symmetric_and_bounded(
        total in 10u64..1000,
        fa in 0.01f64..1.0,
        fb in 0.01f64..1.0,
        fp in 0.0f64..1.0,
        eps in prop_oneof![Just(0.0), Just(1e-12), Just(1e-6)],
        gamma in prop_oneof![Just(1.0), Just(0.5), Just(2.0)],
    ) {
        let ua = ((total as f64 * fa) as u64).max(1);
        let ub = ((total as f64 * fb) as u64).max(1);
        let pair = (ua.min(ub) as f64 * fp) as u64;
        let t = CoocTable::from_counts(5, total, [("a".to_string(), ua), ("b".to_string(), ub)], [(("b".to_string(), "a".to_string()), pair)]);
        let ab = npmi("a", "b", &t, eps, gamma).unwrap();
        let ba = npmi("b", "a", &t, eps, gamma).unwrap();
        prop_assert_eq!(ab, ba);
        prop_assert!(ab.is_finite() && (-1.0 - 1e-9..=1.0 + 1e-9).contains(&ab), "{}", ab);
    }

    #[test]
    fn format_2dp_matches_integer_cents(cents in 0u64..1_000_000) {
        let x = cents as f64 / 100.0;
        prop_assert_eq!(format_2dp(x), format!("{}.{:02}", cents / 100, cents % 100));
    }

    #[test]
    fn sample_k_draws_distinct_items(seed in any::<u64>(), n in 1usize..60, k_frac in 0.0f64..=1.0) {
        let items: Vec<usize> = (0..n).collect();
        let k = (n as f64 * k_frac) as usize;
        let a = sample_k(&mut iteration_rng(seed, 1), &items, k);
        let b = sample_k(&mut iteration_rng(seed, 1), &items, k);
        prop_assert_eq!(&a, &b);
        prop_assert_eq!(a.iter().collect::<BTreeSet<_>>().len(), k);
    }

    #[test]
    fn decoding_stays_inside_a_random_schema(seed in any::<u64>(), mask in prop::collection::vec(any::<bool>(), 1..40)) {
        let raw = ace_schema();
        let s = raw.restrict(&closed_subset(&raw, &mask), 1);
        let names: BTreeSet<String> = s.nodes().map(|n| n.name.to_string()).collect();
        let text = "Troops attack the Town and Ann meets Bob .";
        let out = Decoder::new(&s).decode_greedy(text, &HashScorer { seed, eos_weight: 0.3 }, 64).unwrap();
        for a in &out.annotations {
            let Annotation::Event(e) = a else { panic!("non-event record {a:?}") };
            prop_assert!(names.contains(&e.label));
            for arg in &e.args {
                prop_assert!(names.contains(&arg.role));
            }
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn growth_only_adds_and_renaming_only_renames(seed in any::<u64>(), pick in 0usize..4) {
        let toy = toy_dataset(Dataset::Ace, 5, ToySizes { train: 10, dev: 5, test: 5, corpus_per_node: 4 });
        let cooc = schemakg::embed::build_cooc(&toy.corpus, 5);
        let strategy = Strategy::ALL[pick];
        let cfg = EvolutionConfig::new(strategy, seed, 5, 12, 3);
        let inputs = BenchmarkInputs { raw: &toy.raw, splits: &toy.splits, store: Some(&toy.store), cooc: Some(&cooc), lexicon: None };
        let b = build_benchmark(inputs, &cfg).unwrap();
        for w in b.artifacts.windows(2) {
            let before: BTreeSet<&NodeId> = w[0].schema.nodes().map(|n| &n.id).collect();
            let after: BTreeSet<&NodeId> = w[1].schema.nodes().map(|n| &n.id).collect();
            if strategy.is_growth() {
                prop_assert!(before.is_subset(&after));
                prop_assert_eq!(after.len() - before.len() >= 3, true);
            } else {
                prop_assert_eq!(before, after);
            }
            prop_assert!(w[1].schema.validate().is_empty());
            prop_assert_eq!(w[1].schema.version(), w[0].schema.version() + 1);
        }
    }
}

#[test]
fn duplicate_ids_are_rejected() {
    assert!(flat_schema(Task::Ner, Role::EntityType, &["person", "Person"]).is_err());
    let json = r#"{"task":"NER","nodes":[
        {"id":"root","name":"root","parent":null,"level":"root","role":null},
        {"id":"n1","name":"person","parent":"root","level":"major","role":"entity-type"},
        {"id":"n1","name":"place","parent":"root","level":"major","role":"entity-type"}],"version":0}"#;
    let err = SchemaGraph::from_json_str(json).unwrap_err().to_string();
    assert!(err.contains("duplicate id: n1"), "{err}");
}
