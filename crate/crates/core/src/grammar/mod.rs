//! Skill-template grammar, ontology, and plan types.
//!
//! A plan step instantiates exactly one surface template such as
//! `Put [object] on [location].` Templates are matched case-sensitively on
//! their fixed words after whitespace normalization; slot text is captured
//! greedily between fixed words. The trailing period is optional when parsing
//! and mandatory when rendering.

mod parse;
mod prompt;

pub use parse::{parse_plan, parse_response, FormatError, PlanParseError, StepParseError, TagKind};
pub use prompt::{render_prompt, render_response, PromptKind};

use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;
use thiserror::Error;

/// Slot kinds a template may declare. `Object` orders before `Location`,
/// which fixes the canonical positional alignment used by the reward.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SlotName {
    Object,
    Location,
}

impl fmt::Display for SlotName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SlotName::Object => write!(f, "object"),
            SlotName::Location => write!(f, "location"),
        }
    }
}

/// Index of a template within its grammar.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct TemplateId(pub usize);

#[derive(Debug, Clone, PartialEq, Eq)]
pub(crate) enum PatternToken {
    Word(String),
    Slot(SlotName),
}

/// One executable skill template.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SkillTemplate {
    /// Canonical action lexeme: the fixed words of the pattern minus
    /// prepositions, e.g. `Put`, `Pick up`, `Pick up and pour`.
    pub verb: String,
    /// Slot names in surface order.
    pub slots: Vec<SlotName>,
    /// Display form with bracketed slots, e.g. `Put [object] on [location].`
    pub surface_pattern: String,
    pub(crate) tokens: Vec<PatternToken>,
    pub(crate) trailing_period: bool,
}

/// Words treated as template structure rather than part of the verb lexeme.
const PREPOSITIONS: &[&str] = &[
    "on", "into", "onto", "in", "at", "to", "from", "over", "under", "beside", "near", "with",
];

fn normalize_ws(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ")
}

impl SkillTemplate {
    /// Build a template from its surface pattern, deriving the verb lexeme
    /// from the fixed words.
    pub fn from_pattern(pattern: &str) -> Result<Self, GrammarError> {
        Self::build(pattern, None)
    }

    /// Build a template with an explicit verb lexeme override.
    pub fn with_verb(pattern: &str, verb: &str) -> Result<Self, GrammarError> {
        Self::build(pattern, Some(verb))
    }

    fn build(pattern: &str, verb_override: Option<&str>) -> Result<Self, GrammarError> {
        let surface = normalize_ws(pattern);
        if surface.is_empty() {
            return Err(GrammarError::EmptyPattern);
        }
        let trailing_period = surface.ends_with('.');
        let body = if trailing_period {
            surface[..surface.len() - 1].trim_end().to_string()
        } else {
            surface.clone()
        };

        let mut tokens = Vec::new();
        let mut slots = Vec::new();
        for word in body.split_whitespace() {
            match word {
                "[object]" => {
                    tokens.push(PatternToken::Slot(SlotName::Object));
                    slots.push(SlotName::Object);
                }
                "[location]" => {
                    tokens.push(PatternToken::Slot(SlotName::Location));
                    slots.push(SlotName::Location);
                }
                w if w.contains('[') || w.contains(']') => {
                    return Err(GrammarError::BadPlaceholder {
                        pattern: surface,
                        word: w.to_string(),
                    });
                }
                w => tokens.push(PatternToken::Word(w.to_string())),
            }
        }
        let mut seen = Vec::new();
        for s in &slots {
            if seen.contains(s) {
                return Err(GrammarError::DuplicateSlot {
                    pattern: surface,
                    slot: *s,
                });
            }
            seen.push(*s);
        }

        let verb = match verb_override {
            Some(v) => {
                let v = normalize_ws(v);
                if v.is_empty() {
                    return Err(GrammarError::EmptyVerb { pattern: surface });
                }
                v
            }
            None => {
                let words: Vec<&str> = tokens
                    .iter()
                    .filter_map(|t| match t {
                        PatternToken::Word(w) if !PREPOSITIONS.contains(&w.as_str()) => {
                            Some(w.as_str())
                        }
                        _ => None,
                    })
                    .collect();
                if words.is_empty() {
                    return Err(GrammarError::EmptyVerb { pattern: surface });
                }
                words.join(" ")
            }
        };

        Ok(SkillTemplate {
            verb,
            slots,
            surface_pattern: surface,
            tokens,
            trailing_period,
        })
    }

    /// Render the template with the given arguments. Arguments must cover the
    /// template's slots exactly; the rendered step keeps the surface pattern's
    /// trailing period.
    pub fn render(&self, args: &BTreeMap<SlotName, String>) -> String {
        let mut out = Vec::new();
        for token in &self.tokens {
            match token {
                PatternToken::Word(w) => out.push(w.clone()),
                PatternToken::Slot(s) => out.push(args[s].clone()),
            }
        }
        let mut text = out.join(" ");
        if self.trailing_period {
            text.push('.');
        }
        text
    }

    /// Number of fixed (non-slot) words; the specificity key for resolving
    /// overlapping template matches.
    pub(crate) fn fixed_word_count(&self) -> usize {
        self.tokens
            .iter()
            .filter(|t| matches!(t, PatternToken::Word(_)))
            .count()
    }

    /// Match a normalized step body (no list numbering, trailing period
    /// already handled) against this template. Slots capture greedily.
    pub(crate) fn match_words(&self, words: &[&str], allow_empty: bool) -> Option<Vec<(SlotName, String)>> {
        fn go(
            tokens: &[PatternToken],
            words: &[&str],
            allow_empty: bool,
            acc: &mut Vec<(SlotName, String)>,
        ) -> bool {
            match tokens.first() {
                None => words.is_empty(),
                Some(PatternToken::Word(w)) => {
                    if words.first() == Some(&w.as_str()) {
                        go(&tokens[1..], &words[1..], allow_empty, acc)
                    } else {
                        false
                    }
                }
                Some(PatternToken::Slot(name)) => {
                    let min_take = usize::from(!allow_empty);
                    for take in (min_take..=words.len()).rev() {
                        acc.push((*name, words[..take].join(" ")));
                        if go(&tokens[1..], &words[take..], allow_empty, acc) {
                            return true;
                        }
                        acc.pop();
                    }
                    false
                }
            }
        }
        let mut acc = Vec::new();
        if go(&self.tokens, words, allow_empty, &mut acc) {
            Some(acc)
        } else {
            None
        }
    }
}

/// An ordered set of skill templates.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SkillGrammar {
    templates: Vec<SkillTemplate>,
}

impl SkillGrammar {
    pub fn new(templates: Vec<SkillTemplate>) -> Result<Self, GrammarError> {
        if templates.is_empty() {
            return Err(GrammarError::EmptyGrammar);
        }
        for (i, a) in templates.iter().enumerate() {
            for b in &templates[..i] {
                if a.surface_pattern == b.surface_pattern {
                    return Err(GrammarError::DuplicatePattern {
                        pattern: a.surface_pattern.clone(),
                    });
                }
            }
        }
        Ok(SkillGrammar { templates })
    }

    /// The nine-template desk manipulation grammar used throughout the crate.
    pub fn default_desk() -> Self {
        let patterns = [
            "Put [object] on [location].",
            "Put [object] into [location].",
            "Pick up [object] and pour into [location].",
            "Pick up [object].",
            "Open [object].",
            "Push [object].",
            "Pour into [location].",
            "Place on [location].",
            "Place into [location].",
        ];
        let templates = patterns
            .iter()
            .map(|p| SkillTemplate::from_pattern(p).expect("default template"))
            .collect();
        SkillGrammar::new(templates).expect("default grammar")
    }

    /// Parse the plain-text grammar format: one surface pattern per line,
    /// `#` comments, optional `verb=<lexeme>|` prefix to override the verb.
    pub fn parse_str(text: &str) -> Result<Self, GrammarError> {
        let mut templates = Vec::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let template = if let Some(rest) = line.strip_prefix("verb=") {
                let (verb, pattern) = rest.split_once('|').ok_or(GrammarError::BadVerbOverride {
                    line: idx + 1,
                })?;
                SkillTemplate::with_verb(pattern, verb)
            } else {
                SkillTemplate::from_pattern(line)
            };
            templates.push(template.map_err(|source| GrammarError::AtLine {
                line: idx + 1,
                source: Box::new(source),
            })?);
        }
        SkillGrammar::new(templates)
    }

    pub fn from_file(path: &Path) -> Result<Self, GrammarError> {
        let text = std::fs::read_to_string(path).map_err(|e| GrammarError::Io {
            path: path.display().to_string(),
            message: e.to_string(),
        })?;
        Self::parse_str(&text)
    }

    pub fn templates(&self) -> &[SkillTemplate] {
        &self.templates
    }

    pub fn len(&self) -> usize {
        self.templates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.templates.is_empty()
    }

    pub fn template(&self, id: TemplateId) -> &SkillTemplate {
        &self.templates[id.0]
    }

    /// Find the template with the given surface pattern.
    pub fn find_pattern(&self, pattern: &str) -> Option<TemplateId> {
        let wanted = normalize_ws(pattern);
        self.templates
            .iter()
            .position(|t| t.surface_pattern == wanted)
            .map(TemplateId)
    }
}

/// One parsed plan step: a template plus its slot arguments.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PlanStep {
    pub template: TemplateId,
    pub args: BTreeMap<SlotName, String>,
}

impl PlanStep {
    /// Construct a step, validating the arguments against the template.
    pub fn new(
        grammar: &SkillGrammar,
        template: TemplateId,
        args: BTreeMap<SlotName, String>,
    ) -> Result<Self, GrammarError> {
        let t = grammar.template(template);
        let mut expected: Vec<SlotName> = t.slots.clone();
        expected.sort();
        let got: Vec<SlotName> = args.keys().copied().collect();
        if expected != got || args.values().any(|v| v.trim().is_empty()) {
            return Err(GrammarError::BadStepArgs {
                pattern: t.surface_pattern.clone(),
            });
        }
        let args = args
            .into_iter()
            .map(|(k, v)| (k, normalize_ws(&v)))
            .collect();
        Ok(PlanStep { template, args })
    }

    /// Render as step text, e.g. `Put apple into basket.`
    pub fn render(&self, grammar: &SkillGrammar) -> String {
        grammar.template(self.template).render(&self.args)
    }

    /// Slot arguments in canonical positional order: object first, then
    /// location.
    pub fn positional_args(&self) -> Vec<&str> {
        self.args.values().map(String::as_str).collect()
    }
}

/// An ordered skill sequence. Generated plans may be empty; ground-truth
/// plans must have at least one step (enforced where they are consumed).
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Plan {
    pub steps: Vec<PlanStep>,
}

impl Plan {
    pub fn new(steps: Vec<PlanStep>) -> Self {
        Plan { steps }
    }

    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    /// Render as a numbered list, one step per line.
    pub fn render(&self, grammar: &SkillGrammar) -> String {
        self.steps
            .iter()
            .enumerate()
            .map(|(i, s)| format!("{}. {}", i + 1, s.render(grammar)))
            .collect::<Vec<_>>()
            .join("\n")
    }
}

/// The two sections of a well-formed model response.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ResponseParts {
    pub think: String,
    pub answer: String,
}

/// Named semantic-equivalence sets over object/location strings.
/// Membership lookup is case-insensitive after whitespace trimming.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Ontology {
    sets: Vec<(String, Vec<String>)>,
}

impl Ontology {
    pub fn empty() -> Self {
        Ontology::default()
    }

    pub fn new(sets: Vec<(String, Vec<String>)>) -> Result<Self, OntologyError> {
        for (name, members) in &sets {
            if members.len() < 2 {
                return Err(OntologyError::SetTooSmall { name: name.clone() });
            }
        }
        Ok(Ontology {
            sets: sets
                .into_iter()
                .map(|(name, members)| {
                    let members = members
                        .into_iter()
                        .map(|m| m.trim().to_lowercase())
                        .collect();
                    (name, members)
                })
                .collect(),
        })
    }

    /// Parse the plain-text ontology format: `setname: member1, member2, ...`
    /// per line, `#` comments.
    pub fn parse_str(text: &str) -> Result<Self, OntologyError> {
        let mut sets = Vec::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (name, members) = line
                .split_once(':')
                .ok_or(OntologyError::BadLine { line: idx + 1 })?;
            let members: Vec<String> = members
                .split(',')
                .map(|m| m.trim().to_string())
                .filter(|m| !m.is_empty())
                .collect();
            if members.len() < 2 {
                return Err(OntologyError::SetTooSmall {
                    name: name.trim().to_string(),
                });
            }
            sets.push((name.trim().to_string(), members));
        }
        Ontology::new(sets)
    }

    pub fn from_file(path: &Path) -> Result<Self, OntologyError> {
        let text = std::fs::read_to_string(path).map_err(|e| OntologyError::Io {
            path: path.display().to_string(),
            message: e.to_string(),
        })?;
        Self::parse_str(&text)
    }

    pub fn sets(&self) -> &[(String, Vec<String>)] {
        &self.sets
    }

    /// True when some set contains both strings.
    pub fn same_set(&self, a: &str, b: &str) -> bool {
        let a = a.trim().to_lowercase();
        let b = b.trim().to_lowercase();
        self.sets
            .iter()
            .any(|(_, members)| members.contains(&a) && members.contains(&b))
    }
}

#[derive(Debug, Error)]
pub enum GrammarError {
    #[error("grammar has no templates")]
    EmptyGrammar,
    #[error("empty surface pattern")]
    EmptyPattern,
    #[error("pattern {pattern:?}: malformed placeholder {word:?}")]
    BadPlaceholder { pattern: String, word: String },
    #[error("pattern {pattern:?}: slot [{slot}] appears more than once")]
    DuplicateSlot { pattern: String, slot: SlotName },
    #[error("pattern {pattern:?}: no verb words outside slots and prepositions")]
    EmptyVerb { pattern: String },
    #[error("duplicate surface pattern {pattern:?}")]
    DuplicatePattern { pattern: String },
    #[error("line {line}: verb= override requires `verb=<lexeme>|<pattern>`")]
    BadVerbOverride { line: usize },
    #[error("line {line}: {source}")]
    AtLine {
        line: usize,
        source: Box<GrammarError>,
    },
    #[error("step args do not fit template {pattern:?}")]
    BadStepArgs { pattern: String },
    #[error("{path}: {message}")]
    Io { path: String, message: String },
}

#[derive(Debug, Error)]
pub enum OntologyError {
    #[error("line {line}: expected `setname: member1, member2, ...`")]
    BadLine { line: usize },
    #[error("semantic set {name:?} needs at least 2 members")]
    SetTooSmall { name: String },
    #[error("{path}: {message}")]
    Io { path: String, message: String },
}
