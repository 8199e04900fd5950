//! Minimal dotted field paths over JSON values.
//!
//! A path is a `.`-separated list of segments. A segment is an object key, an
//! array index, or `*` which fans out over every array element (or object
//! value). `choices.0.message.content` and `data.*.embedding` are typical.

use serde_json::Value;

pub fn select<'a>(value: &'a Value, path: &str) -> Vec<&'a Value> {
    let mut current = vec![value];
    if path.is_empty() {
        return current;
    }
    for segment in path.split('.') {
        let mut next = Vec::new();
        for v in current {
            match (segment, v) {
                ("*", Value::Array(items)) => next.extend(items.iter()),
                ("*", Value::Object(map)) => next.extend(map.values()),
                (key, Value::Object(map)) => next.extend(map.get(key)),
                (idx, Value::Array(items)) => {
                    if let Some(item) = idx.parse::<usize>().ok().and_then(|i| items.get(i)) {
                        next.push(item);
                    }
                }
                _ => {}
            }
        }
        current = next;
    }
    current
}
