mod common;

use std::collections::{BTreeMap, BTreeSet};

use common::{hyp, kg};
use regex::Regex;
use serde_json::Value;

use ptvi_core::inference::{initialize, oracle_interpretations};
use ptvi_core::render::{from_json, to_caption_with, Inflector, NgramScorer, UniformScorer};
use ptvi_core::{
    oracle_search, to_caption, to_dot, to_json, to_label, Configuration, HypothesisSet, InferenceParams,
    KnowledgeGraph, RenderError, Role,
};

fn kitchen() -> (KnowledgeGraph, HypothesisSet) {
    let g = kg("IsA\toil\tliquid\t2.0\nReceivesAction\tliquid\tpour\t1.5\n\
                UsedFor\toil\tfuel\t1.2\nRelatedTo\tfuel\tpour\t1.0\n\
                HasProperty\toil\tblack\t1.0\nCapableOf\tblack\tpour\t0.5\n");
    let h = hyp(&[
        (Role::Action, &[("stir", 0.9), ("pour", 0.6)]),
        (Role::Object, &[("oil", 0.8), ("water", 0.6)]),
        (Role::Subject, &[("man", 0.9), ("woman", 0.5)]),
    ]);
    (g, h)
}

fn slicing() -> Configuration {
    let g = kg("AtLocation\tonion\tkitchen\t1.0\n");
    let h = hyp(&[
        (Role::Action, &[("slice", 1.2)]),
        (Role::Object, &[("onion", 1.0)]),
        (Role::Subject, &[("man", 0.9)]),
    ]);
    initialize(&h, &g, &InferenceParams::default()).unwrap()
}

fn oracle_top(g: &KnowledgeGraph, h: &HypothesisSet, n: usize) -> Vec<ptvi_core::Interpretation> {
    let params = InferenceParams::default();
    let out = oracle_search(h, g, &params, 1_000_000).unwrap();
    oracle_interpretations(h, g, &params, &out, n).unwrap()
}

/// Every sentence the templates can produce for "man slice onion", spelled
/// out by hand.
fn slicing_sentences() -> BTreeSet<String> {
    let mut out = BTreeSet::new();
    for d1 in ["A", "The"] {
        for verb in ["slices", "is slicing"] {
            for prep in ["", " on", " in", " with", " into", " to"] {
                for d2 in ["a", "the"] {
                    out.insert(format!("{d1} man {verb}{prep} {d2} onion"));
                }
            }
        }
    }
    out
}

/// Mean of log relative frequencies over unigrams and bigrams, unseen
/// n-grams counted as one half.
fn reference_score(unigrams: &BTreeMap<&str, f64>, bigrams: &BTreeMap<(&str, &str), f64>, sentence: &str) -> f64 {
    let lower = sentence.to_lowercase();
    let tokens: Vec<&str> = lower.split(' ').collect();
    let (ut, bt): (f64, f64) = (unigrams.values().sum(), bigrams.values().sum());
    let mut logs: Vec<f64> = tokens
        .iter()
        .map(|t| (unigrams.get(t).copied().unwrap_or(0.0).max(0.5) / ut).ln())
        .collect();
    logs.extend(
        tokens
            .windows(2)
            .map(|w| (bigrams.get(&(w[0], w[1])).copied().unwrap_or(0.0).max(0.5) / bt).ln()),
    );
    logs.iter().sum::<f64>() / logs.len() as f64
}

#[test]
fn captions_follow_the_template() {
    let conf = slicing();
    let caption = to_caption(&conf, &UniformScorer).unwrap();
    let pattern = Regex::new(r"^(A|The) man (slices|is slicing)( \w+)? (a|the) onion$").unwrap();
    assert_eq!(caption.candidates.len(), 48);
    for (s, _) in &caption.candidates {
        assert!(pattern.is_match(s), "{s}");
    }
    let got: BTreeSet<String> = caption.candidates.iter().map(|(s, _)| s.clone()).collect();
    assert_eq!(got, slicing_sentences());
    // uniform scores leave the lexicographic minimum
    assert_eq!(caption.sentence, "A man is slicing a onion");
}

#[test]
fn counts_pick_the_most_frequent_phrasing() {
    let counts = "# toy counts\nthe\t10\nman\t5\nis\t3\nslicing\t3\nonion\t4\na\t2\non\t1\n\
                  the man\t4\nman is\t3\nis slicing\t3\nslicing the\t2\nthe onion\t3\n";
    let scorer = NgramScorer::from_counts(counts.as_bytes()).unwrap();
    let unigrams: BTreeMap<&str, f64> = [
        ("the", 10.0),
        ("man", 5.0),
        ("is", 3.0),
        ("slicing", 3.0),
        ("onion", 4.0),
        ("a", 2.0),
        ("on", 1.0),
    ]
    .into();
    let bigrams: BTreeMap<(&str, &str), f64> = [
        (("the", "man"), 4.0),
        (("man", "is"), 3.0),
        (("is", "slicing"), 3.0),
        (("slicing", "the"), 2.0),
        (("the", "onion"), 3.0),
    ]
    .into();
    let want = slicing_sentences()
        .into_iter()
        .map(|s| (reference_score(&unigrams, &bigrams, &s), s))
        .min_by(|a, b| b.0.total_cmp(&a.0).then_with(|| a.1.cmp(&b.1)))
        .unwrap();
    let caption = to_caption(&slicing(), &scorer).unwrap();
    assert_eq!(caption.sentence, want.1);
    assert_eq!(caption.sentence, "The man is slicing the onion");
    assert!((caption.score - want.0).abs() < 1e-12);
}

#[test]
fn injected_scorer_decides() {
    let prefers_with = |s: &str| if s.contains(" with ") { 1.0 } else { 0.0 };
    let caption = to_caption(&slicing(), &prefers_with).unwrap();
    assert_eq!(caption.sentence, "A man is slicing with a onion");
    let overrides = Inflector::with_overrides("slice\tslicez\tslicering\n".as_bytes()).unwrap();
    let caption = to_caption_with(&slicing(), &|s: &str| -(s.len() as f64), &overrides).unwrap();
    assert_eq!(caption.sentence, "A man slicez a onion");
}

#[test]
fn captions_need_all_three_roles() {
    let g = kg("IsA\ta\tb\t1.0\n");
    let h = hyp(&[(Role::Action, &[("tidy", 1.0)]), (Role::Object, &[("cabinet", 1.0)])]);
    let conf = initialize(&h, &g, &InferenceParams::default()).unwrap();
    assert!(matches!(
        to_caption(&conf, &UniformScorer),
        Err(RenderError::MissingRole(Role::Subject))
    ));
    assert_eq!(to_label(&conf).unwrap(), "tidy cabinet");

    let h = hyp(&[(Role::Action, &[("tidy", 1.0)])]);
    let conf = initialize(&h, &g, &InferenceParams::default()).unwrap();
    assert!(matches!(to_label(&conf), Err(RenderError::MissingRole(Role::Object))));
    assert!(matches!(
        to_caption(&conf, &UniformScorer),
        Err(RenderError::MissingRole(_))
    ));
}

#[test]
fn kitchen_scene_reads_pour_oil() {
    let (g, h) = kitchen();
    let top = oracle_top(&g, &h, 1);
    assert_eq!(to_label(&top[0].configuration).unwrap(), "pour oil");
    assert_eq!(
        top[0].configuration.content_string(),
        "pour oil man (liquid) (fuel) (black)"
    );
    let want = -(0.6f64.tanh() + 0.8f64.tanh() + 0.9f64.tanh())
        - [2.0f64, 1.5, 1.2, 1.0, 1.0, 0.5].iter().map(|w| w.tanh()).sum::<f64>();
    assert!((top[0].energy.total - want).abs() < 1e-12);
}

#[test]
fn labels_ignore_cues() {
    let (g, h) = kitchen();
    let all = oracle_top(&g, &h, usize::MAX);
    let mut by_labels: BTreeMap<Vec<String>, BTreeSet<String>> = BTreeMap::new();
    for i in &all {
        let names: Vec<String> = i.key.labels.iter().map(|c| c.to_string()).collect();
        by_labels
            .entry(names)
            .or_default()
            .insert(to_label(&i.configuration).unwrap());
    }
    assert!(all.len() > by_labels.len());
    for (names, labels) in by_labels {
        assert_eq!(
            labels.into_iter().collect::<Vec<_>>(),
            [format!("{} {}", names[0], names[1])]
        );
    }
}

#[test]
fn json_round_trips_exactly() {
    let (g, h) = kitchen();
    for i in oracle_top(&g, &h, 8) {
        let text = to_json(&i.configuration);
        let back = from_json(&text).unwrap();
        assert!((back.energy().total - i.configuration.energy().total).abs() < 1e-12);
        assert_eq!(to_json(&back), text);
        assert!(back.validate().is_empty());
    }
    let empty = to_json(&Configuration::default());
    assert_eq!(from_json(&empty).unwrap().len(), 0);
}

#[test]
fn tampered_json_is_rejected() {
    let (g, h) = kitchen();
    let conf = oracle_top(&g, &h, 1).remove(0).configuration;
    let doc: Value = serde_json::from_str(&to_json(&conf)).unwrap();
    let edit = |f: &dyn Fn(&mut Value)| {
        let mut d = doc.clone();
        f(&mut d);
        from_json(&d.to_string())
    };
    assert!(edit(&|_| {}).is_ok());
    // recorded energy disagrees with the edges
    assert!(edit(&|d| d["energy"]["total"] = Value::from(d["energy"]["total"].as_f64().unwrap() + 1.0)).is_err());
    // an edge disappears but the bonds still name their peers
    assert!(edit(&|d| {
        d["edges"].as_array_mut().unwrap().pop();
    })
    .is_err());
    // edge energy no longer matches its recorded value
    assert!(edit(&|d| d["edges"][0]["energy"] = Value::from(5.0)).is_err());
    // a grounded generator loses its feature bond
    assert!(edit(&|d| {
        let sites = d["sites"].as_array_mut().unwrap();
        let grounded = sites.iter_mut().find(|s| s["kind"] == "grounded").unwrap();
        grounded["bonds"].as_array_mut().unwrap().remove(0);
    })
    .is_err());
    assert!(matches!(from_json("{\"sites\": 3}"), Err(RenderError::Json(_))));
}

type DotGraph = (BTreeSet<String>, Vec<(String, String)>);

/// Minimal DOT reader: `digraph ID { stmt* }` with attribute, node and edge
/// statements. Returns declared node ids and edges.
fn parse_dot(text: &str) -> Result<DotGraph, String> {
    let mut tokens = Vec::new();
    let mut chars = text.chars().peekable();
    while let Some(&ch) = chars.peek() {
        if ch.is_whitespace() {
            chars.next();
        } else if ch == '"' {
            chars.next();
            let mut s = String::new();
            loop {
                match chars.next() {
                    Some('\\') => s.push(chars.next().ok_or("dangling escape")?),
                    Some('"') => break,
                    Some(c) => s.push(c),
                    None => return Err("unterminated string".into()),
                }
            }
            tokens.push(format!("\"{s}"));
        } else if ch == '-' {
            chars.next();
            if chars.next() != Some('>') {
                return Err("expected ->".into());
            }
            tokens.push("->".into());
        } else if "{}[]=;,".contains(ch) {
            chars.next();
            tokens.push(ch.to_string());
        } else if ch.is_ascii_alphanumeric() || ch == '_' || ch == '.' {
            let mut s = String::new();
            while let Some(&c) = chars.peek() {
                if c.is_ascii_alphanumeric() || c == '_' || c == '.' {
                    s.push(c);
                    chars.next();
                } else {
                    break;
                }
            }
            tokens.push(s);
        } else {
            return Err(format!("unexpected character {ch:?}"));
        }
    }
    let id = |t: &str| t.starts_with('"') || t.chars().all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '.');
    let mut pos = 0;
    let mut next = |want: Option<&str>| -> Result<String, String> {
        let t = tokens.get(pos).cloned().ok_or("unexpected end")?;
        pos += 1;
        match want {
            Some(w) if t != w => Err(format!("expected {w}, found {t}")),
            _ => Ok(t),
        }
    };
    next(Some("digraph"))?;
    let name = next(None)?;
    if !id(&name) {
        return Err("graph name".into());
    }
    next(Some("{"))?;
    let (mut nodes, mut edges) = (BTreeSet::new(), Vec::new());
    loop {
        let head = next(None)?;
        if head == "}" {
            break;
        }
        if !id(&head) {
            return Err(format!("statement starts with {head}"));
        }
        let mut t = next(None)?;
        let mut target = None;
        if t == "=" {
            if !id(&next(None)?) {
                return Err("attribute value".into());
            }
            next(Some(";"))?;
            continue;
        }
        if t == "->" {
            let to = next(None)?;
            if !id(&to) {
                return Err("edge target".into());
            }
            target = Some(to);
            t = next(None)?;
        }
        if t == "[" {
            loop {
                let k = next(None)?;
                if k == "]" {
                    break;
                }
                next(Some("="))?;
                if !id(&k) || !id(&next(None)?) {
                    return Err("attribute".into());
                }
                let sep = next(None)?;
                if sep == "]" {
                    break;
                }
                if sep != "," {
                    return Err(format!("attribute separator {sep}"));
                }
            }
            t = next(None)?;
        }
        if t != ";" {
            return Err(format!("expected ;, found {t}"));
        }
        match target {
            Some(to) => edges.push((head, to)),
            None if head != "node" && head != "edge" && head != "graph" => {
                nodes.insert(head);
            }
            None => {}
        }
    }
    if pos != tokens.len() {
        return Err("trailing tokens".into());
    }
    Ok((nodes, edges))
}

#[test]
fn dot_output_is_well_formed() {
    let (g, h) = kitchen();
    for i in oracle_top(&g, &h, 5) {
        let text = to_dot(&i.configuration, "kitchen \"scene\"");
        let (nodes, edges) = parse_dot(&text).unwrap_or_else(|e| panic!("{e}\n{text}"));
        assert_eq!(nodes.len(), i.configuration.len());
        assert_eq!(edges.len(), i.configuration.edge_count());
        for (a, b) in &edges {
            assert!(nodes.contains(a) && nodes.contains(b));
        }
    }
    let (nodes, edges) = parse_dot(&to_dot(&Configuration::default(), "empty")).unwrap();
    assert!(nodes.is_empty() && edges.is_empty());
    assert!(parse_dot("digraph x { a -> ; }").is_err());
}
