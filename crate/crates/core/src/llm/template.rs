use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

pub type Variables = BTreeMap<String, String>;

/// Convenience constructor for [`Variables`].
pub fn vars<'a>(pairs: impl IntoIterator<Item = (&'a str, &'a str)>) -> Variables {
    pairs
        .into_iter()
        .map(|(k, v)| (k.to_string(), v.to_string()))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    System,
    User,
    Assistant,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Message {
    pub role: Role,
    pub content: String,
}

impl Message {
    pub fn system(content: impl Into<String>) -> Self {
        Message {
            role: Role::System,
            content: content.into(),
        }
    }

    pub fn user(content: impl Into<String>) -> Self {
        Message {
            role: Role::User,
            content: content.into(),
        }
    }

    pub fn assistant(content: impl Into<String>) -> Self {
        Message {
            role: Role::Assistant,
            content: content.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Decoding {
    #[serde(default)]
    pub temperature: f64,
    #[serde(default = "default_max_tokens")]
    pub max_tokens: u32,
}

fn default_max_tokens() -> u32 {
    512
}

impl Default for Decoding {
    fn default() -> Self {
        Decoding {
            temperature: 0.0,
            max_tokens: default_max_tokens(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum FieldKind {
    String,
    Enum { values: Vec<String> },
    List,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FieldSpec {
    pub name: String,
    #[serde(flatten)]
    pub kind: FieldKind,
}

impl FieldSpec {
    pub fn string(name: &str) -> Self {
        FieldSpec {
            name: name.into(),
            kind: FieldKind::String,
        }
    }

    pub fn list(name: &str) -> Self {
        FieldSpec {
            name: name.into(),
            kind: FieldKind::List,
        }
    }

    pub fn one_of(name: &str, values: &[&str]) -> Self {
        FieldSpec {
            name: name.into(),
            kind: FieldKind::Enum {
                values: values.iter().map(|v| v.to_string()).collect(),
            },
        }
    }
}

/// Ordered set of required output fields.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct OutputSchema(pub Vec<FieldSpec>);

impl OutputSchema {
    pub fn fields(&self) -> &[FieldSpec] {
        &self.0
    }

    /// Human-readable field list used in repair prompts.
    pub fn describe(&self) -> String {
        self.0
            .iter()
            .map(|f| match &f.kind {
                FieldKind::String => format!("\"{}\": string", f.name),
                FieldKind::List => format!("\"{}\": list of strings", f.name),
                FieldKind::Enum { values } => {
                    format!("\"{}\": one of {}", f.name, values.join("|"))
                }
            })
            .collect::<Vec<_>>()
            .join("; ")
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum FieldValue {
    Text(String),
    List(Vec<String>),
}

/// A parsed structured output: field name to value.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Record(pub BTreeMap<String, FieldValue>);

impl Record {
    pub fn new() -> Self {
        Record::default()
    }

    pub fn with_text(mut self, field: &str, value: impl Into<String>) -> Self {
        self.0.insert(field.into(), FieldValue::Text(value.into()));
        self
    }

    pub fn with_list<S: Into<String>>(mut self, field: &str, values: impl IntoIterator<Item = S>) -> Self {
        self.0.insert(
            field.into(),
            FieldValue::List(values.into_iter().map(Into::into).collect()),
        );
        self
    }

    pub fn text(&self, field: &str) -> Option<&str> {
        match self.0.get(field) {
            Some(FieldValue::Text(s)) => Some(s),
            _ => None,
        }
    }

    pub fn list(&self, field: &str) -> Option<&[String]> {
        match self.0.get(field) {
            Some(FieldValue::List(v)) => Some(v),
            _ => None,
        }
    }

    /// JSON object text with keys in schema order.
    pub fn to_json_in_order(&self, schema: &OutputSchema) -> String {
        let mut parts = Vec::new();
        for f in schema.fields() {
            if let Some(v) = self.0.get(&f.name) {
                let value = match v {
                    FieldValue::Text(s) => Value::String(s.clone()),
                    FieldValue::List(items) => {
                        Value::Array(items.iter().cloned().map(Value::String).collect())
                    }
                };
                parts.push(format!(
                    "{}:{}",
                    Value::String(f.name.clone()),
                    value
                ));
            }
        }
        format!("{{{}}}", parts.join(","))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FewShotExample {
    pub input: String,
    pub output: Record,
}

/// A chat prompt: persona preamble, worked examples, an instruction with
/// `{placeholder}` slots and the schema its answer must satisfy.
///
/// `{{` and `}}` render as literal braces; a `{` not followed by an
/// identifier and `}` is literal too, so JSON snippets need no escaping.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PromptTemplate {
    pub template_id: String,
    pub role_preamble: String,
    pub instructions: String,
    #[serde(default)]
    pub few_shot: Vec<FewShotExample>,
    pub output_schema: OutputSchema,
    #[serde(default)]
    pub decoding: Decoding,
}

#[derive(Debug, Clone, Error, PartialEq)]
pub enum RenderError {
    #[error("unbound placeholder {0}")]
    Unbound(String),
}

#[derive(Debug, Error)]
pub enum TemplateError {
    #[error("template file: {0}")]
    Io(#[from] std::io::Error),
    #[error("template syntax: {0}")]
    Syntax(#[from] toml::de::Error),
    #[error("template {id}: {reason}")]
    Invalid { id: String, reason: String },
}

enum Piece<'a> {
    Literal(&'a str),
    Char(char),
    Slot(&'a str),
}

fn is_ident_start(b: u8) -> bool {
    b.is_ascii_alphabetic() || b == b'_'
}

fn is_ident(b: u8) -> bool {
    b.is_ascii_alphanumeric() || b == b'_'
}

fn pieces(text: &str) -> Vec<Piece<'_>> {
    let bytes = text.as_bytes();
    let mut out = Vec::new();
    let mut start = 0;
    let mut i = 0;
    while i < bytes.len() {
        let b = bytes[i];
        let escape = (b == b'{' || b == b'}') && bytes.get(i + 1) == Some(&b);
        if escape {
            out.push(Piece::Literal(&text[start..i]));
            out.push(Piece::Char(b as char));
            i += 2;
            start = i;
            continue;
        }
        if b == b'{' && bytes.get(i + 1).copied().is_some_and(is_ident_start) {
            let mut j = i + 1;
            while j < bytes.len() && is_ident(bytes[j]) {
                j += 1;
            }
            if bytes.get(j) == Some(&b'}') {
                out.push(Piece::Literal(&text[start..i]));
                out.push(Piece::Slot(&text[i + 1..j]));
                i = j + 1;
                start = i;
                continue;
            }
        }
        i += 1;
    }
    out.push(Piece::Literal(&text[start..]));
    out
}

/// Placeholder names used by `text`.
pub fn placeholders(text: &str) -> BTreeSet<String> {
    pieces(text)
        .into_iter()
        .filter_map(|p| match p {
            Piece::Slot(s) => Some(s.to_string()),
            _ => None,
        })
        .collect()
}

/// Substitute placeholders in `text`.
pub fn fill(text: &str, variables: &Variables) -> Result<String, RenderError> {
    let mut out = String::with_capacity(text.len());
    for piece in pieces(text) {
        match piece {
            Piece::Literal(s) => out.push_str(s),
            Piece::Char(c) => out.push(c),
            Piece::Slot(name) => out.push_str(
                variables
                    .get(name)
                    .ok_or_else(|| RenderError::Unbound(name.to_string()))?,
            ),
        }
    }
    Ok(out)
}

impl PromptTemplate {
    pub fn from_toml(text: &str) -> Result<PromptTemplate, TemplateError> {
        let t: PromptTemplate = toml::from_str(text)?;
        t.validate()?;
        Ok(t)
    }

    pub fn load(path: &Path) -> Result<PromptTemplate, TemplateError> {
        Self::from_toml(&std::fs::read_to_string(path)?)
    }

    pub fn placeholders(&self) -> BTreeSet<String> {
        placeholders(&self.instructions)
    }

    pub fn validate(&self) -> Result<(), TemplateError> {
        let invalid = |reason: String| TemplateError::Invalid {
            id: self.template_id.clone(),
            reason,
        };
        if self.template_id.trim().is_empty() {
            return Err(invalid("empty template_id".into()));
        }
        if self.output_schema.0.is_empty() {
            return Err(invalid("empty output schema".into()));
        }
        let mut names = BTreeSet::new();
        for f in self.output_schema.fields() {
            if !names.insert(f.name.as_str()) {
                return Err(invalid(format!("duplicate schema field {}", f.name)));
            }
            if let FieldKind::Enum { values } = &f.kind {
                if values.is_empty() {
                    return Err(invalid(format!("enum field {} has no values", f.name)));
                }
            }
        }
        if self.decoding.temperature.is_nan() || self.decoding.temperature < 0.0 || self.decoding.max_tokens == 0 {
            return Err(invalid("decoding needs temperature >= 0 and max_tokens > 0".into()));
        }
        for (i, ex) in self.few_shot.iter().enumerate() {
            let text = ex.output.to_json_in_order(&self.output_schema);
            super::parse_structured(&text, &self.output_schema)
                .map_err(|e| invalid(format!("few-shot example {} does not fit schema: {e}", i + 1)))?;
        }
        Ok(())
    }

    /// Render the full message list: preamble, one user/assistant pair per
    /// few-shot example, then the filled instruction.
    pub fn render(&self, variables: &Variables) -> Result<Vec<Message>, RenderError> {
        let mut messages = Vec::with_capacity(2 + 2 * self.few_shot.len());
        messages.push(Message::system(self.role_preamble.clone()));
        for ex in &self.few_shot {
            messages.push(Message::user(ex.input.clone()));
            messages.push(Message::assistant(ex.output.to_json_in_order(&self.output_schema)));
        }
        messages.push(Message::user(fill(&self.instructions, variables)?));
        Ok(messages)
    }
}

impl fmt::Display for PromptTemplate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "template {}", self.template_id)
    }
}

pub fn render_prompt(
    template: &PromptTemplate,
    variables: &Variables,
) -> Result<Vec<Message>, RenderError> {
    template.render(variables)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn template(examples: usize) -> PromptTemplate {
        PromptTemplate {
            template_id: "t".into(),
            role_preamble: "You are an analyst.".into(),
            instructions: "Classify: {text}".into(),
            few_shot: (0..examples)
                .map(|i| FewShotExample {
                    input: format!("Classify: example {i}"),
                    output: Record::new().with_text("sentiment", "positive"),
                })
                .collect(),
            output_schema: OutputSchema(vec![FieldSpec::one_of(
                "sentiment",
                &["positive", "negative", "neutral"],
            )]),
            decoding: Decoding::default(),
        }
    }

    #[test]
    fn message_counts() {
        let m = template(0).render(&vars([("text", "hi")])).unwrap();
        assert_eq!(m.len(), 2);
        assert_eq!(m[1].content, "Classify: hi");
        let m = template(2).render(&vars([("text", "hi")])).unwrap();
        assert_eq!(m.len(), 6);
        assert_eq!(m[2].content, r#"{"sentiment":"positive"}"#);
        assert_eq!(m[2].role, Role::Assistant);
    }

    #[test]
    fn unbound_placeholder_is_named() {
        let err = template(0).render(&Variables::new()).unwrap_err();
        assert_eq!(err.to_string(), "unbound placeholder text");
    }

    #[test]
    fn braces_and_json_are_literal() {
        let v = vars([("x", "1")]);
        assert_eq!(fill("{{x}} {x} {\"a\": 2} { x }", &v).unwrap(), "{x} 1 {\"a\": 2} { x }");
        assert_eq!(
            placeholders("{a} {{b}} {c_1} {9} {"),
            ["a", "c_1"].iter().map(|s| s.to_string()).collect()
        );
    }

    #[test]
    fn toml_round_trip_and_validation() {
        let text = r#"
template_id = "sent-v1"
role_preamble = "You are a review analyst."
instructions = "Sentence: {sentence}\nAspect: {aspect}"

[[few_shot]]
input = "Sentence: it is great\nAspect: app"
output = { sentiment = "positive" }

[[output_schema]]
name = "sentiment"
type = "enum"
values = ["positive", "negative", "neutral"]
"#;
        let t = PromptTemplate::from_toml(text).unwrap();
        assert_eq!(t.decoding, Decoding::default());
        assert_eq!(t.placeholders().len(), 2);

        let bad = text.replace("sentiment = \"positive\"", "sentiment = \"great\"");
        assert!(matches!(
            PromptTemplate::from_toml(&bad),
            Err(TemplateError::Invalid { .. })
        ));
    }
}
