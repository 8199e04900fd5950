use serde_json::{Map, Value};
use thiserror::Error;

use super::template::{FieldKind, FieldValue, OutputSchema, Record};

#[derive(Debug, Clone, Error, PartialEq, Eq)]
pub enum ParseError {
    #[error("no JSON object found in response")]
    NoRecord,
    #[error("missing field {field}")]
    MissingField { field: String },
    #[error("field {field}: {value:?} is not one of {allowed:?}")]
    EnumViolation {
        field: String,
        value: String,
        allowed: Vec<String>,
    },
    #[error("field {field}: expected {expected}")]
    TypeMismatch { field: String, expected: &'static str },
}

/// Find the first JSON object in `response` that satisfies `schema`.
///
/// Every `{` is tried as the start of an object, so prose, code fences and
/// wrapper objects around the record are tolerated. When no candidate fits,
/// the error of the first candidate object is returned.
pub fn parse_structured(response: &str, schema: &OutputSchema) -> Result<Record, ParseError> {
    let mut first_error = None;
    for (i, _) in response.match_indices('{') {
        let mut stream = serde_json::Deserializer::from_str(&response[i..]).into_iter::<Value>();
        let Some(Ok(Value::Object(obj))) = stream.next() else {
            continue;
        };
        match validate_object(&obj, schema) {
            Ok(record) => return Ok(record),
            Err(e) => {
                first_error.get_or_insert(e);
            }
        }
    }
    Err(first_error.unwrap_or(ParseError::NoRecord))
}

pub fn validate_object(obj: &Map<String, Value>, schema: &OutputSchema) -> Result<Record, ParseError> {
    let mut record = Record::new();
    for field in schema.fields() {
        let missing = || ParseError::MissingField {
            field: field.name.clone(),
        };
        let value = match obj.get(&field.name) {
            None | Some(Value::Null) => return Err(missing()),
            Some(v) => v,
        };
        let parsed = match &field.kind {
            FieldKind::String => FieldValue::Text(scalar_text(value).ok_or(ParseError::TypeMismatch {
                field: field.name.clone(),
                expected: "string",
            })?),
            FieldKind::Enum { values } => {
                let Value::String(s) = value else {
                    return Err(ParseError::TypeMismatch {
                        field: field.name.clone(),
                        expected: "string",
                    });
                };
                let wanted = s.trim().to_lowercase();
                let hit = values.iter().find(|v| v.to_lowercase() == wanted);
                match hit {
                    Some(v) => FieldValue::Text(v.clone()),
                    None => {
                        return Err(ParseError::EnumViolation {
                            field: field.name.clone(),
                            value: s.clone(),
                            allowed: values.clone(),
                        })
                    }
                }
            }
            FieldKind::List => {
                let mismatch = || ParseError::TypeMismatch {
                    field: field.name.clone(),
                    expected: "list of strings",
                };
                let Value::Array(items) = value else {
                    return Err(mismatch());
                };
                let items = items
                    .iter()
                    .map(|v| scalar_text(v).ok_or_else(mismatch))
                    .collect::<Result<Vec<_>, _>>()?;
                FieldValue::List(items)
            }
        };
        record.0.insert(field.name.clone(), parsed);
    }
    Ok(record)
}

fn scalar_text(v: &Value) -> Option<String> {
    match v {
        Value::String(s) => Some(s.clone()),
        Value::Number(n) => Some(n.to_string()),
        Value::Bool(b) => Some(b.to_string()),
        _ => None,
    }
}
