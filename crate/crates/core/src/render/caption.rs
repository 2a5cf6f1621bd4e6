//! Template captions and "verb object" activity labels.

use std::collections::HashMap;
use std::io::BufRead;

use super::scorer::SentenceScorer;
use super::RenderError;
use crate::configuration::Configuration;
use crate::generator::Role;
use crate::kg::ConceptId;

pub const DETERMINERS: [&str; 2] = ["A", "The"];
pub const PREPOSITIONS: [Option<&str>; 6] = [None, Some("on"), Some("in"), Some("with"), Some("into"), Some("to")];

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Tense {
    Present,
    PresentContinuous,
}

/// One filling of `Determiner Subject Verb [Preposition] Determiner Object`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CaptionTemplate {
    pub subject_determiner: &'static str,
    pub subject: String,
    pub verb: String,
    pub tense: Tense,
    pub preposition: Option<&'static str>,
    pub object_determiner: &'static str,
    pub object: String,
}

impl CaptionTemplate {
    pub fn render(&self, inflector: &Inflector) -> String {
        let verb = match self.tense {
            Tense::Present => inflector.third_person(&self.verb),
            Tense::PresentContinuous => format!("is {}", inflector.participle(&self.verb)),
        };
        let mut words = vec![self.subject_determiner.to_string(), self.subject.clone(), verb];
        if let Some(p) = self.preposition {
            words.push(p.to_string());
        }
        words.push(self.object_determiner.to_lowercase());
        words.push(self.object.clone());
        words.join(" ")
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Caption {
    pub sentence: String,
    pub score: f64,
    /// Every rendered candidate with its score, in enumeration order.
    pub candidates: Vec<(String, f64)>,
}

/// Verb inflection: built-in suffix rules plus per-verb overrides.
#[derive(Clone, Debug, Default)]
pub struct Inflector {
    overrides: HashMap<String, (String, String)>,
}

fn is_vowel(c: char) -> bool {
    matches!(c, 'a' | 'e' | 'i' | 'o' | 'u')
}

impl Inflector {
    /// Reads `base<TAB>third-person<TAB>participle` lines.
    pub fn with_overrides<R: BufRead>(source: R) -> Result<Self, RenderError> {
        let mut overrides = HashMap::new();
        for (n, line) in source.lines().enumerate() {
            let line = line.map_err(|e| RenderError::Overrides {
                line: n + 1,
                reason: e.to_string(),
            })?;
            let trimmed = line.trim();
            if trimmed.is_empty() || trimmed.starts_with('#') {
                continue;
            }
            let fields: Vec<&str> = trimmed.split('\t').map(str::trim).collect();
            if fields.len() != 3 || fields.iter().any(|f| f.is_empty()) {
                return Err(RenderError::Overrides {
                    line: n + 1,
                    reason: "expected `base<TAB>third-person<TAB>participle`".into(),
                });
            }
            overrides.insert(fields[0].to_lowercase(), (fields[1].to_string(), fields[2].to_string()));
        }
        Ok(Inflector { overrides })
    }

    fn split(verb: &str) -> (&str, &str) {
        match verb.split_once(' ') {
            Some((head, rest)) => (head, rest),
            None => (verb, ""),
        }
    }

    fn join(head: String, rest: &str) -> String {
        if rest.is_empty() {
            head
        } else {
            format!("{head} {rest}")
        }
    }

    /// "slice" -> "slices", "wash" -> "washes", "tidy" -> "tidies".
    pub fn third_person(&self, verb: &str) -> String {
        let (head, rest) = Self::split(verb);
        if let Some((third, _)) = self.overrides.get(head) {
            return Self::join(third.clone(), rest);
        }
        let chars: Vec<char> = head.chars().collect();
        let n = chars.len();
        let inflected = if ["s", "sh", "ch", "x", "z", "o"].iter().any(|s| head.ends_with(s)) {
            format!("{head}es")
        } else if n >= 2 && chars[n - 1] == 'y' && !is_vowel(chars[n - 2]) {
            format!("{}ies", &head[..head.len() - 1])
        } else {
            format!("{head}s")
        };
        Self::join(inflected, rest)
    }

    /// "slice" -> "slicing", "stir" -> "stirring", "tie" -> "tying".
    pub fn participle(&self, verb: &str) -> String {
        let (head, rest) = Self::split(verb);
        if let Some((_, participle)) = self.overrides.get(head) {
            return Self::join(participle.clone(), rest);
        }
        let chars: Vec<char> = head.chars().collect();
        let n = chars.len();
        let inflected = if let Some(stem) = head.strip_suffix("ie") {
            format!("{stem}ying")
        } else if n >= 2 && chars[n - 1] == 'e' && !matches!(chars[n - 2], 'e' | 'o' | 'y') {
            format!("{}ing", &head[..head.len() - 1])
        } else if n >= 3
            && !is_vowel(chars[n - 1])
            && !matches!(chars[n - 1], 'w' | 'x' | 'y')
            && is_vowel(chars[n - 2])
            && !is_vowel(chars[n - 3])
            && vowel_groups(&chars) == 1
        {
            format!("{head}{}ing", chars[n - 1])
        } else {
            format!("{head}ing")
        };
        Self::join(inflected, rest)
    }
}

fn vowel_groups(chars: &[char]) -> usize {
    let mut groups = 0;
    let mut prev = false;
    for &c in chars {
        let v = is_vowel(c);
        if v && !prev {
            groups += 1;
        }
        prev = v;
    }
    groups
}

fn first_with_role(c: &Configuration, role: Role) -> Option<ConceptId> {
    c.grounded()
        .into_iter()
        .find(|(_, g)| g.role() == Some(role))
        .map(|(_, g)| g.concept().clone())
}

fn required(c: &Configuration, role: Role) -> Result<ConceptId, RenderError> {
    first_with_role(c, role).ok_or(RenderError::MissingRole(role))
}

/// All template fillings for one subject, verb and object.
pub fn caption_templates(subject: &str, verb: &str, object: &str) -> Vec<CaptionTemplate> {
    let mut out = Vec::new();
    for d1 in DETERMINERS {
        for tense in [Tense::Present, Tense::PresentContinuous] {
            for prep in PREPOSITIONS {
                for d2 in DETERMINERS {
                    out.push(CaptionTemplate {
                        subject_determiner: d1,
                        subject: subject.to_string(),
                        verb: verb.to_string(),
                        tense,
                        preposition: prep,
                        object_determiner: d2,
                        object: object.to_string(),
                    });
                }
            }
        }
    }
    out
}

/// Best-scoring caption for the configuration's grounded subject, action
/// and object. Cue concepts never appear in captions. Ties go to the
/// lexicographically smallest sentence.
pub fn to_caption(c: &Configuration, scorer: &dyn SentenceScorer) -> Result<Caption, RenderError> {
    to_caption_with(c, scorer, &Inflector::default())
}

pub fn to_caption_with(
    c: &Configuration,
    scorer: &dyn SentenceScorer,
    inflector: &Inflector,
) -> Result<Caption, RenderError> {
    let verb = required(c, Role::Action)?;
    let subject = required(c, Role::Subject)?;
    let object = required(c, Role::Object)?;
    let candidates: Vec<(String, f64)> = caption_templates(&subject.to_words(), &verb.to_words(), &object.to_words())
        .iter()
        .map(|t| {
            let s = t.render(inflector);
            let score = scorer.score(&s);
            (s, score)
        })
        .collect();
    let (sentence, score) = candidates
        .iter()
        .min_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)))
        .cloned()
        .expect("template always yields candidates");
    Ok(Caption {
        sentence,
        score,
        candidates,
    })
}

/// `"<verb> <object>"` from the grounded action and object.
pub fn to_label(c: &Configuration) -> Result<String, RenderError> {
    let verb = required(c, Role::Action)?;
    let object = required(c, Role::Object)?;
    Ok(format!("{} {}", verb.to_words(), object.to_words()).to_lowercase())
}
