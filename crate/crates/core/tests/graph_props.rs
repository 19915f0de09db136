mod common;

use std::collections::{BTreeMap, HashSet};

use proptest::prelude::*;
use semkge::graph::{load_triples, read_triples, KnowledgeGraph, SplitRatios, Triple};
use semkge::matrix::Matrix;
use semkge::resources::{ClassVectors, SemanticClass, SemanticResourceSet};
use semkge::Error;

fn per_relation_counts(triples: &[Triple]) -> BTreeMap<usize, usize> {
    let mut m = BTreeMap::new();
    for t in triples {
        *m.entry(t.rel.0).or_insert(0) += 1;
    }
    m
}

#[test]
fn load_examples() {
    let g = read_triples("victory\tCauses\tcelebration\nvictory\tCauses\tcelebration\n".as_bytes(), "t").unwrap();
    assert_eq!((g.len(), g.num_concepts(), g.num_relations()), (1, 2, 1));

    let g = read_triples("a\tr1\tb\nb\tr2\tc\n".as_bytes(), "t").unwrap();
    assert_eq!((g.len(), g.num_concepts(), g.num_relations()), (2, 3, 2));

    match read_triples("a\tr1\n".as_bytes(), "t") {
        Err(Error::Parse { line, .. }) => assert_eq!(line, 1),
        other => panic!("expected parse error, got {other:?}"),
    }
    assert!(matches!(read_triples("# only a comment\n\n".as_bytes(), "t"), Err(Error::EmptyInput(_))));
}

#[test]
fn load_from_disk_normalizes_labels() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("kb.tsv");
    std::fs::write(&path, "# header\nHigh Fashion\tIsA\tbrand\nhigh fashion\tIsA\tBrand\n").unwrap();
    let g = load_triples(&path).unwrap();
    assert_eq!(g.len(), 1);
    assert_eq!(g.concepts().label(0), "high_fashion");
    assert!(matches!(load_triples(dir.path().join("missing.tsv")), Err(Error::Io { .. })));
}

#[test]
fn split_counts_follow_floor_rule() {
    let ten: String = (0..10).map(|i| format!("a{i}\tr\tb{i}\n")).collect();
    let (g, s) = read_triples(ten.as_bytes(), "t").unwrap().split_per_relation(SplitRatios::DEFAULT, 1).unwrap();
    assert_eq!((g.train().len(), g.valid().len(), g.test().len()), (6, 2, 2));
    assert_eq!(s.totals(), (6, 2, 2));

    // 5 * 0.2 = 1 for valid and test, remaining 3 go to train
    let five: String = (0..5).map(|i| format!("a{i}\tr\tb{i}\n")).collect();
    let (g, _) = read_triples(five.as_bytes(), "t").unwrap().split_per_relation(SplitRatios::DEFAULT, 1).unwrap();
    assert_eq!((g.train().len(), g.valid().len(), g.test().len()), (3, 1, 1));

    // 7 * 0.2 = 1.4 floors to 1; remainder 5 to train
    let seven: String = (0..7).map(|i| format!("a{i}\tr\tb{i}\n")).collect();
    let (g, _) = read_triples(seven.as_bytes(), "t").unwrap().split_per_relation(SplitRatios::DEFAULT, 1).unwrap();
    assert_eq!((g.train().len(), g.valid().len(), g.test().len()), (5, 1, 1));
}

#[test]
fn undersized_relation_goes_to_train() {
    let text = "a\trare\tb\nc\trare\td\n".to_string() + &(0..10).map(|i| format!("x{i}\tr\ty{i}\n")).collect::<String>();
    let (g, s) = read_triples(text.as_bytes(), "t").unwrap().split_per_relation(SplitRatios::DEFAULT, 3).unwrap();
    assert_eq!(s.undersized, vec!["rare".to_string()]);
    let rare = g.relations().id("rare").unwrap();
    assert_eq!(g.train().iter().filter(|t| t.rel.0 == rare).count(), 2);
}

#[test]
fn invalid_ratios_rejected() {
    assert!(matches!(SplitRatios::new(0.5, 0.5, 0.5), Err(Error::Config(_))));
    assert!(SplitRatios::new(0.6, 0.2, 0.2).is_ok());
    assert!(SplitRatios::new(1.0, 0.0, 0.0).is_err());
}

#[test]
fn contains_examples() {
    let g = common::random_graph(4, 20, 3, 80);
    assert!(g.contains(&g.train()[0]).unwrap());
    assert!(g.contains(&g.valid()[0]).unwrap());
    let absent = (0..20)
        .map(|t| Triple::new(0, 0, t))
        .find(|t| !g.is_known(t))
        .unwrap();
    assert!(!g.contains(&absent).unwrap());
    assert!(matches!(g.contains(&Triple::new(20, 0, 0)), Err(Error::Domain(_))));
    assert!(matches!(g.contains(&Triple::new(0, 3, 0)), Err(Error::Domain(_))));
}

fn covering(g: &KnowledgeGraph, covered: &[&str]) -> SemanticResourceSet {
    let n = g.num_concepts();
    let mask: Vec<bool> = (0..n).map(|c| covered.contains(&g.concepts().label(c))).collect();
    let mut set = SemanticResourceSet::new(2, n);
    set.insert(SemanticClass::Txt, ClassVectors::new(Matrix::zeros(n, 2), mask).unwrap())
        .unwrap();
    set
}

#[test]
fn restriction_examples() {
    let g = read_triples("a\tr\tb\nb\tr\tc\nc\tr\ta\n".as_bytes(), "t").unwrap();
    let (sub, old) = g.restrict_to_covered(&covering(&g, &["a", "b"])).unwrap();
    assert_eq!(sub.num_concepts(), 2);
    assert_eq!(sub.len(), 1);
    assert_eq!(old.len(), 2);

    let (same, _) = g.restrict_to_covered(&covering(&g, &["a", "b", "c"])).unwrap();
    assert_eq!(same.len(), 3);
    assert_eq!(same.concepts().labels(), g.concepts().labels());

    let g = read_triples("a\tr\tb\nb\tr\tc\nc\ts\tb\n".as_bytes(), "t").unwrap();
    match g.restrict_to_covered(&covering(&g, &["a"])) {
        Err(Error::EmptyCoverage { coverage }) => assert_eq!(coverage, vec![("TXT".to_string(), 1)]),
        other => panic!("expected empty coverage, got {other:?}"),
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn split_partitions_each_relation(
        seed in any::<u64>(),
        n in 1usize..300,
        rels in 1usize..6,
        ratios in (1u32..10, 1u32..10, 1u32..10),
    ) {
        let total = (ratios.0 + ratios.1 + ratios.2) as f64;
        let ratios = SplitRatios::new(ratios.0 as f64 / total, ratios.1 as f64 / total, 1.0 - (ratios.0 + ratios.1) as f64 / total);
        prop_assume!(ratios.is_ok());
        let ratios = ratios.unwrap();
        let pool = common::random_graph(seed, 40, rels, n);
        let (g, summary) = pool.split_per_relation(ratios, seed ^ 7).unwrap();

        let tr: HashSet<_> = g.train().iter().copied().collect();
        let va: HashSet<_> = g.valid().iter().copied().collect();
        let te: HashSet<_> = g.test().iter().copied().collect();
        prop_assert_eq!(tr.len(), g.train().len());
        prop_assert_eq!(va.len(), g.valid().len());
        prop_assert_eq!(te.len(), g.test().len());
        prop_assert!(tr.is_disjoint(&va) && tr.is_disjoint(&te) && va.is_disjoint(&te));

        let before: HashSet<_> = pool.pool().into_iter().collect();
        let after: HashSet<_> = tr.iter().chain(&va).chain(&te).copied().collect();
        prop_assert_eq!(&before, &after);

        let counts = per_relation_counts(&pool.pool());
        let (vc, tc) = (per_relation_counts(g.valid()), per_relation_counts(g.test()));
        for (&rel, &n_rel) in &counts {
            let (ev, et) = if n_rel < 3 {
                (0, 0)
            } else {
                ((n_rel as f64 * ratios.valid).floor() as usize, (n_rel as f64 * ratios.test).floor() as usize)
            };
            prop_assert_eq!(vc.get(&rel).copied().unwrap_or(0), ev);
            prop_assert_eq!(tc.get(&rel).copied().unwrap_or(0), et);
        }
        let (a, b, c) = summary.totals();
        prop_assert_eq!(a + b + c, before.len());

        for t in &after {
            prop_assert!(g.contains(t).unwrap());
        }
    }

    #[test]
    fn split_is_byte_identical_for_a_seed(seed in any::<u64>()) {
        let dir = tempfile::tempdir().unwrap();
        let pool = common::random_graph(seed, 30, 4, 120);
        let text = pool.format_triples(&pool.pool());
        let path = dir.path().join("kb.tsv");
        std::fs::write(&path, &text).unwrap();

        let run = |sub: &str| {
            let g = load_triples(&path).unwrap();
            let (s, _) = g.split_per_relation(SplitRatios::DEFAULT, seed).unwrap();
            s.write_splits(dir.path().join(sub), "kb").unwrap()
                .iter()
                .map(|p| std::fs::read(p).unwrap())
                .collect::<Vec<_>>()
        };
        prop_assert_eq!(run("a"), run("b"));
    }

    #[test]
    fn absent_triples_are_not_contained(seed in any::<u64>(), h in 0usize..30, r in 0usize..4, t in 0usize..30) {
        let g = common::random_graph(seed, 30, 4, 100);
        let probe = Triple::new(h, r, t);
        let in_source = g.pool().contains(&probe);
        prop_assert_eq!(g.contains(&probe).unwrap(), in_source);
    }

    #[test]
    fn restriction_is_idempotent(seed in any::<u64>(), keep in proptest::collection::vec(any::<bool>(), 25)) {
        let g = common::random_graph(seed, 25, 3, 90);
        let n = g.num_concepts();
        let mut set = SemanticResourceSet::new(1, n);
        let m = Matrix::from_vec(n, 1, (0..n).map(|i| i as f64).collect());
        set.insert(SemanticClass::Ck, ClassVectors::new(m, keep.clone()).unwrap()).unwrap();
        match g.restrict_to_covered(&set) {
            Err(Error::EmptyCoverage { .. }) => {}
            Err(e) => prop_assert!(false, "unexpected error {e}"),
            Ok((once, old)) => {
                let reindexed = set.reindex(&old);
                for (new, o) in old.iter().enumerate() {
                    prop_assert!(keep[o.0]);
                    prop_assert_eq!(once.concepts().label(new), g.concepts().label(o.0));
                }
                let (twice, old2) = once.restrict_to_covered(&reindexed).unwrap();
                prop_assert_eq!(twice.concepts().labels(), once.concepts().labels());
                prop_assert_eq!(twice.relations().labels(), once.relations().labels());
                prop_assert_eq!(twice.train(), once.train());
                prop_assert_eq!(twice.valid(), once.valid());
                prop_assert_eq!(twice.test(), once.test());
                prop_assert_eq!(old2.iter().map(|c| c.0).collect::<Vec<_>>(), (0..once.num_concepts()).collect::<Vec<_>>());
            }
        }
    }
}
