mod common;

use std::collections::BTreeSet;

use common::{c, edge_lists, kg, tsv, Naive};
use proptest::prelude::*;
use ptvi_core::kg::{CueScope, Direction, KgFormat, LoadOptions};
use ptvi_core::load_kg;

#[test]
fn toy_examples() {
    let g = kg("IsA\tegg\tfood\t2.0\n");
    assert_eq!(g.assertions().len(), 1);
    assert_eq!(g.assertions()[0].weight, 2.0);

    let g = kg("AtLocation\tegg\tplate\t1.0\n");
    assert_eq!(g.assertion_strength(&c("egg"), &c("plate")), 1.0);
    assert_eq!(g.assertion_strength(&c("x"), &c("y")), 0.0);

    let g = kg("IsA\ta\tb\t0.5\nRelatedTo\ta\tb\t-2.0\n");
    assert_eq!(g.assertion_strength(&c("a"), &c("b")), -2.0);

    let g = kg("AtLocation\tegg\tplate\t1.0\nUsedFor\tplate\tput\t0.5\n");
    let cues = g.find_cues(&c("egg"), &c("put"), 5, CueScope::Forward);
    assert_eq!(cues.len(), 1);
    assert_eq!(cues[0].0, c("plate"));
    assert!((cues[0].1 - (1.0f64.tanh() + 0.5f64.tanh())).abs() < 1e-15);
}

#[test]
fn tanh_values() {
    // values from an independent tanh evaluation
    let g = kg("IsA\ta\tb\t2.0\nIsA\tb\ta\t-2.0\n");
    assert!((g.semantic_bond_energy(&c("a"), &c("b")) - 0.964_027_580_075_816_9).abs() < 1e-15);
    assert!((g.semantic_bond_energy(&c("b"), &c("a")) + 0.964_027_580_075_816_9).abs() < 1e-15);
    assert_eq!(g.semantic_bond_energy(&c("a"), &c("zzz")), 0.0);
}

#[test]
fn egg_out_neighbors() {
    let g = kg("HasProperty\tegg\twhite\t1.5\nIsA\tegg\tfood\t2.0\nRelatedTo\tchicken\tegg\t1.0\n");
    let out: Vec<_> = g
        .neighbors(&c("egg"), Direction::Out)
        .into_iter()
        .map(|(r, o, _)| (r.to_string(), o.to_string()))
        .collect();
    assert_eq!(
        out,
        [
            ("HasProperty".to_string(), "white".to_string()),
            ("IsA".into(), "food".into())
        ]
    );
    assert!(g.neighbors(&c("unknown"), Direction::In).is_empty());
}

#[test]
fn random_200_edge_graph_top3_matches_brute_force() {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(200);
    let lines: Vec<_> = (0..200)
        .map(|_| {
            (
                rng.gen_range(0..common::RELATIONS.len()),
                rng.gen_range(0..40),
                rng.gen_range(0..40),
                (rng.gen_range(-300..=300) as f64) / 100.0,
            )
        })
        .collect();
    let g = kg(&tsv(&lines));
    let naive = Naive::new(&lines);
    let mut checked = 0;
    for i in 0..40 {
        for j in 0..40 {
            if i == j {
                continue;
            }
            let (ci, cj) = (c(&format!("n{i}")), c(&format!("n{j}")));
            let mut want = naive.cues(&ci, &cj, CueScope::Forward);
            want.truncate(3);
            assert_eq!(g.find_cues(&ci, &cj, 3, CueScope::Forward), want);
            checked += usize::from(!want.is_empty());
        }
    }
    assert!(checked > 0);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn cues_match_two_hop_enumeration(lines in edge_lists(12, 80), either in any::<bool>()) {
        let g = kg(&tsv(&lines));
        let naive = Naive::new(&lines);
        let scope = if either { CueScope::EitherDirection } else { CueScope::Forward };
        for i in 0..12 {
            for j in 0..12 {
                if i == j {
                    continue;
                }
                let (ci, cj) = (c(&format!("n{i}")), c(&format!("n{j}")));
                let got = g.find_cues(&ci, &cj, usize::MAX, scope);
                let want = naive.cues(&ci, &cj, scope);
                prop_assert_eq!(&got, &want);
                for (k, _) in &got {
                    prop_assert!(k != &ci && k != &cj);
                    prop_assert!(g.has_direct(&ci, k) && g.has_direct(k, &cj));
                    prop_assert!(!g.has_direct(&ci, &cj));
                }
            }
        }
    }

    #[test]
    fn cue_limits_are_prefixes(lines in edge_lists(8, 60), limit in 0usize..6) {
        let g = kg(&tsv(&lines));
        for i in 0..8 {
            for j in 0..8 {
                let (ci, cj) = (c(&format!("n{i}")), c(&format!("n{j}")));
                let short = g.find_cues(&ci, &cj, limit, CueScope::Forward);
                let long = g.find_cues(&ci, &cj, limit + 1, CueScope::Forward);
                prop_assert!(short.len() <= limit);
                prop_assert_eq!(&long[..short.len()], &short[..]);
            }
        }
    }

    #[test]
    fn strength_and_energy_match_linear_scan(lines in edge_lists(8, 60)) {
        let g = kg(&tsv(&lines));
        let naive = Naive::new(&lines);
        for i in 0..8 {
            for j in 0..8 {
                let (ci, cj) = (c(&format!("n{i}")), c(&format!("n{j}")));
                let phi = g.assertion_strength(&ci, &cj);
                prop_assert_eq!(phi, naive.strength(&ci, &cj));
                // direction sensitivity: the reverse query reads the reverse edges
                prop_assert_eq!(g.assertion_strength(&cj, &ci), naive.strength(&cj, &ci));
                let e = g.semantic_bond_energy(&ci, &cj);
                prop_assert!(e > -1.0 && e < 1.0);
                prop_assert_eq!(e == 0.0, phi == 0.0);
            }
        }
    }

    #[test]
    fn neighbors_match_linear_scan(lines in edge_lists(8, 60)) {
        let g = kg(&tsv(&lines));
        let naive = Naive::new(&lines);
        for i in 0..8 {
            let ci = c(&format!("n{i}"));
            let out: BTreeSet<(String, String, u64)> = g
                .neighbors(&ci, Direction::Out)
                .into_iter()
                .map(|(r, o, w)| (r.to_string(), o.to_string(), w.to_bits()))
                .collect();
            let want: BTreeSet<(String, String, u64)> = naive
                .triples
                .iter()
                .filter(|((_, s, _), _)| s == &ci)
                .map(|((r, _, e), w)| (r.clone(), e.to_string(), w.to_bits()))
                .collect();
            prop_assert_eq!(out, want);
            let incoming = g.neighbors(&ci, Direction::In);
            let want_in = naive.triples.keys().filter(|(_, _, e)| e == &ci).count();
            prop_assert_eq!(incoming.len(), want_in);
        }
    }

    #[test]
    fn duplicates_are_counted_and_loading_is_deterministic(lines in edge_lists(5, 60)) {
        let text = tsv(&lines);
        let (a, report) = load_kg(text.as_bytes(), KgFormat::Tsv, &LoadOptions::default()).unwrap();
        let (b, _) = load_kg(text.as_bytes(), KgFormat::Tsv, &LoadOptions::default()).unwrap();
        let naive = Naive::new(&lines);
        prop_assert_eq!(report.assertions, naive.triples.len());
        prop_assert_eq!(report.duplicates_merged, lines.len() - naive.triples.len());
        for i in 0..5 {
            for j in 0..5 {
                let (ci, cj) = (c(&format!("n{i}")), c(&format!("n{j}")));
                prop_assert_eq!(a.assertion_strength(&ci, &cj), b.assertion_strength(&ci, &cj));
                prop_assert_eq!(
                    a.find_cues(&ci, &cj, 5, CueScope::Forward),
                    b.find_cues(&ci, &cj, 5, CueScope::Forward)
                );
            }
        }
    }
}
