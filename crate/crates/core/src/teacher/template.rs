//! Prompt templates for the four teacher roles.
//!
//! Bodies use `{stem}`, `{choices}`, `{answer}`, `{explanation}` and
//! `{critique}` placeholders. Substitution is a single left-to-right pass, so
//! a bound value that itself contains placeholder syntax is copied verbatim.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::corpus::MCQuestion;

pub const PLACEHOLDERS: [&str; 5] = ["stem", "choices", "answer", "explanation", "critique"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PromptRole {
    Explain,
    Critique,
    Revise,
    Counterfactual,
}

impl PromptRole {
    pub const ALL: [PromptRole; 4] = [Self::Explain, Self::Critique, Self::Revise, Self::Counterfactual];

    /// Placeholders the role's render rule needs.
    pub fn required_placeholders(self) -> &'static [&'static str] {
        match self {
            Self::Explain | Self::Counterfactual => &["stem", "choices", "answer"],
            Self::Critique => &["stem", "choices", "answer", "explanation"],
            Self::Revise => &["stem", "choices", "answer", "explanation", "critique"],
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Self::Explain => "explain",
            Self::Critique => "critique",
            Self::Revise => "revise",
            Self::Counterfactual => "counterfactual",
        }
    }
}

impl fmt::Display for PromptRole {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for PromptRole {
    type Err = TemplateError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .into_iter()
            .find(|r| r.as_str() == s)
            .ok_or_else(|| TemplateError::UnknownRole(s.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum TemplateError {
    #[error("missing binding for placeholder `{0}`")]
    MissingBinding(String),
    #[error("{role} template body does not reference `{{{placeholder}}}`")]
    BodyMissingPlaceholder { role: PromptRole, placeholder: String },
    #[error("{role} exemplar {index} still contains placeholder `{{{placeholder}}}`")]
    UnfilledExemplar { role: PromptRole, index: usize, placeholder: String },
    #[error("no template for role `{0}`")]
    MissingRole(PromptRole),
    #[error("unknown prompt role `{0}`")]
    UnknownRole(String),
    #[error("cannot read template file: {0}")]
    Io(String),
    #[error("invalid template file: {0}")]
    Parse(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptTemplate {
    pub role: PromptRole,
    pub body: String,
    #[serde(default)]
    pub few_shot_exemplars: Vec<String>,
}

/// Finds `{name}` occurrences of known placeholders as (start, end, name).
fn placeholder_spans(text: &str) -> Vec<(usize, usize, &'static str)> {
    let mut spans = Vec::new();
    let mut i = 0;
    while let Some(open) = text[i..].find('{') {
        let start = i + open;
        let rest = &text[start + 1..];
        let hit = PLACEHOLDERS
            .iter()
            .find(|name| rest.starts_with(*name) && rest[name.len()..].starts_with('}'));
        match hit {
            Some(name) => {
                let end = start + name.len() + 2;
                spans.push((start, end, *name));
                i = end;
            }
            None => i = start + 1,
        }
    }
    spans
}

impl PromptTemplate {
    pub fn new(role: PromptRole, body: impl Into<String>) -> Self {
        Self { role, body: body.into(), few_shot_exemplars: Vec::new() }
    }

    pub fn with_exemplars(mut self, exemplars: impl IntoIterator<Item = impl Into<String>>) -> Self {
        self.few_shot_exemplars = exemplars.into_iter().map(Into::into).collect();
        self
    }

    /// Placeholders referenced by the body, in first-use order.
    pub fn placeholders(&self) -> Vec<&'static str> {
        let mut names = Vec::new();
        for (_, _, name) in placeholder_spans(&self.body) {
            if !names.contains(&name) {
                names.push(name);
            }
        }
        names
    }

    pub fn validate(&self) -> Result<(), TemplateError> {
        let used = self.placeholders();
        for required in self.role.required_placeholders() {
            if !used.contains(required) {
                return Err(TemplateError::BodyMissingPlaceholder {
                    role: self.role,
                    placeholder: (*required).to_string(),
                });
            }
        }
        for (index, exemplar) in self.few_shot_exemplars.iter().enumerate() {
            if let Some((_, _, name)) = placeholder_spans(exemplar).first() {
                return Err(TemplateError::UnfilledExemplar {
                    role: self.role,
                    index,
                    placeholder: (*name).to_string(),
                });
            }
        }
        Ok(())
    }
}

/// Renders `template`: exemplars in order, each followed by a blank line, then
/// the body with every placeholder substituted.
pub fn render_prompt(template: &PromptTemplate, bindings: &BTreeMap<String, String>) -> Result<String, TemplateError> {
    for required in template.role.required_placeholders() {
        if !bindings.contains_key(*required) {
            return Err(TemplateError::MissingBinding((*required).to_string()));
        }
    }
    let mut out = String::new();
    for exemplar in &template.few_shot_exemplars {
        out.push_str(exemplar);
        out.push_str("\n\n");
    }
    let body = &template.body;
    let mut cursor = 0;
    for (start, end, name) in placeholder_spans(body) {
        let value = bindings.get(name).ok_or_else(|| TemplateError::MissingBinding(name.to_string()))?;
        out.push_str(&body[cursor..start]);
        out.push_str(value);
        cursor = end;
    }
    out.push_str(&body[cursor..]);
    Ok(out)
}

/// Standard bindings for a question and a (possibly incorrect) answer label.
pub fn question_bindings(q: &MCQuestion, answer: char) -> BTreeMap<String, String> {
    let mut b = BTreeMap::new();
    b.insert("stem".into(), q.stem.trim().to_string());
    b.insert("choices".into(), q.render_choices_inline());
    let text = q.choice_text(answer).unwrap_or_default();
    b.insert("answer".into(), format!("({answer}) {}", text.trim()));
    b
}

/// One template per role.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TemplateSet {
    pub templates: Vec<PromptTemplate>,
}

const DEFAULT_TEMPLATES: &str = include_str!("../../fixtures/templates/default.toml");

impl TemplateSet {
    /// The shipped two-exemplar default set.
    pub fn default_set() -> Self {
        Self::from_toml(DEFAULT_TEMPLATES).expect("bundled templates are valid")
    }

    pub fn from_toml(text: &str) -> Result<Self, TemplateError> {
        let set: TemplateSet = toml::from_str(text).map_err(|e| TemplateError::Parse(e.to_string()))?;
        set.validate()?;
        Ok(set)
    }

    pub fn from_file(path: impl AsRef<Path>) -> Result<Self, TemplateError> {
        let text = std::fs::read_to_string(path.as_ref()).map_err(|e| TemplateError::Io(e.to_string()))?;
        Self::from_toml(&text)
    }

    pub fn validate(&self) -> Result<(), TemplateError> {
        for t in &self.templates {
            t.validate()?;
        }
        Ok(())
    }

    pub fn get(&self, role: PromptRole) -> Result<&PromptTemplate, TemplateError> {
        self.templates.iter().find(|t| t.role == role).ok_or(TemplateError::MissingRole(role))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn bind(pairs: &[(&str, &str)]) -> BTreeMap<String, String> {
        pairs.iter().map(|(k, v)| (k.to_string(), v.to_string())).collect()
    }

    #[test]
    fn direct_substitution() {
        let t = PromptTemplate::new(PromptRole::Explain, "Q: {stem}\nA: {answer}\nExplain.");
        let b = bind(&[("stem", "Why?"), ("answer", "B"), ("choices", "")]);
        assert_eq!(render_prompt(&t, &b).unwrap(), "Q: Why?\nA: B\nExplain.");
    }

    #[test]
    fn exemplars_come_first_in_order() {
        let t = PromptTemplate::new(PromptRole::Explain, "Q: {stem} {choices} {answer}")
            .with_exemplars(["EX ONE", "EX TWO"]);
        let out = render_prompt(&t, &bind(&[("stem", "s"), ("choices", "c"), ("answer", "a")])).unwrap();
        assert_eq!(out, "EX ONE\n\nEX TWO\n\nQ: s c a");
    }

    #[test]
    fn missing_critique_binding_is_named() {
        let t = PromptTemplate::new(PromptRole::Revise, "{stem}{choices}{answer}{explanation}{critique}");
        let err = render_prompt(&t, &bind(&[("stem", "s"), ("choices", "c"), ("answer", "a"), ("explanation", "e")]))
            .unwrap_err();
        assert_eq!(err, TemplateError::MissingBinding("critique".into()));
        assert!(err.to_string().contains("critique"));
    }

    #[test]
    fn validation_catches_body_and_exemplar_problems() {
        let t = PromptTemplate::new(PromptRole::Critique, "{stem}{choices}{answer}");
        assert!(matches!(t.validate(), Err(TemplateError::BodyMissingPlaceholder { .. })));
        let t = PromptTemplate::new(PromptRole::Explain, "{stem}{choices}{answer}").with_exemplars(["Q: {stem}"]);
        assert!(matches!(t.validate(), Err(TemplateError::UnfilledExemplar { index: 0, .. })));
    }

    #[test]
    fn values_with_placeholder_syntax_are_not_re_expanded() {
        let t = PromptTemplate::new(PromptRole::Explain, "{stem}|{choices}|{answer}");
        let out = render_prompt(&t, &bind(&[("stem", "{answer}"), ("choices", "c"), ("answer", "a")])).unwrap();
        assert_eq!(out, "{answer}|c|a");
    }

    #[test]
    fn default_set_covers_every_role_with_two_exemplars() {
        let set = TemplateSet::default_set();
        for role in PromptRole::ALL {
            let t = set.get(role).unwrap();
            assert_eq!(t.few_shot_exemplars.len(), 2, "{role}");
        }
    }

    proptest! {
        #[test]
        fn render_is_injective_in_bindings(a in "[a-z ]{0,12}", b in "[a-z ]{0,12}", c in "[a-z ]{0,12}", d in "[a-z ]{0,12}") {
            let t = PromptTemplate::new(PromptRole::Explain, "S<{stem}> C<{choices}> A<{answer}>");
            let r1 = render_prompt(&t, &bind(&[("stem", &a), ("choices", "x"), ("answer", &b)])).unwrap();
            let r2 = render_prompt(&t, &bind(&[("stem", &c), ("choices", "x"), ("answer", &d)])).unwrap();
            prop_assert_eq!(r1 == r2, a == c && b == d);
        }
    }
}
