use std::path::Path;

use serde_json::{json, Map, Value};

use super::{detokenize, tokenize, ExamplePair};
use crate::error::{Error, Result};

fn string_array(obj: &Map<String, Value>, field: &'static str, line: usize) -> Result<Vec<String>> {
    let value = obj.get(field).ok_or(Error::MissingField { field, line })?;
    let arr = value.as_array().ok_or_else(|| Error::MalformedLine {
        line,
        message: format!("{field} must be an array of strings"),
    })?;
    arr.iter()
        .map(|v| {
            v.as_str().map(str::to_string).ok_or_else(|| Error::MalformedLine {
                line,
                message: format!("{field} must be an array of strings"),
            })
        })
        .collect()
}

fn parse_line(text: &str, line: usize) -> Result<ExamplePair> {
    let value: Value = serde_json::from_str(text).map_err(|e| Error::MalformedLine {
        line,
        message: e.to_string(),
    })?;
    let obj = value.as_object().ok_or_else(|| Error::MalformedLine {
        line,
        message: "expected a JSON object".into(),
    })?;
    let id = match obj.get("id") {
        Some(Value::String(s)) => s.clone(),
        Some(Value::Number(n)) => n.to_string(),
        Some(_) => {
            return Err(Error::MalformedLine {
                line,
                message: "id must be a string".into(),
            })
        }
        None => return Err(Error::MissingField { field: "id", line }),
    };
    let src = string_array(obj, "src_sents", line)?;
    let tgt = string_array(obj, "tgt_sents", line)?;
    let mut pair = ExamplePair::new(
        id,
        src.iter().map(|s| tokenize(s)).collect(),
        tgt.iter().map(|s| tokenize(s)).collect(),
    )
    .map_err(|e| Error::MalformedLine {
        line,
        message: e.to_string(),
    })?;
    if let Some(labels) = obj.get("copy_labels") {
        let labels: Vec<u8> = serde_json::from_value(labels.clone()).map_err(|e| Error::MalformedLine {
            line,
            message: format!("copy_labels: {e}"),
        })?;
        pair.set_labels(labels).map_err(|e| Error::MalformedLine {
            line,
            message: e.to_string(),
        })?;
    }
    Ok(pair)
}

/// Parses JSON-lines text; blank lines are skipped, line numbers are 1-based.
pub fn parse_dataset(text: &str) -> Result<Vec<ExamplePair>> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| parse_line(l, i + 1))
        .collect()
}

pub fn load_dataset(path: &Path) -> Result<Vec<ExamplePair>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_dataset(&text)
}

pub fn render_dataset(pairs: &[ExamplePair]) -> Result<String> {
    let mut out = String::new();
    for p in pairs {
        let mut obj = json!({
            "id": p.id,
            "src_sents": p.source_sentences.iter().map(detokenize).collect::<Vec<_>>(),
            "tgt_sents": p.target_sentences.iter().map(detokenize).collect::<Vec<_>>(),
        });
        if let Some(labels) = &p.copy_labels {
            obj["copy_labels"] = json!(labels);
        }
        out.push_str(&serde_json::to_string(&obj)?);
        out.push('\n');
    }
    Ok(out)
}

pub fn write_dataset(pairs: &[ExamplePair], path: &Path) -> Result<()> {
    std::fs::write(path, render_dataset(pairs)?).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn one_valid_line() {
        let pairs = parse_dataset(r#"{"id":"a","src_sents":["Hello there.","More"],"tgt_sents":["hello"]}"#).unwrap();
        assert_eq!(pairs.len(), 1);
        assert_eq!(pairs[0].source_len(), 4);
        assert_eq!(pairs[0].source_sentences.len(), 2);
    }

    #[test]
    fn missing_field_names_it() {
        let err = parse_dataset(r#"{"id":"a","tgt_sents":["x"]}"#).unwrap_err();
        assert_eq!(err.to_string(), "missing field src_sents at line 1");
    }

    #[test]
    fn malformed_line_carries_number() {
        let text = "{\"id\":\"a\",\"src_sents\":[\"x\"],\"tgt_sents\":[\"y\"]}\n{oops";
        match parse_dataset(text).unwrap_err() {
            Error::MalformedLine { line, .. } => assert_eq!(line, 2),
            e => panic!("{e}"),
        }
    }

    #[test]
    fn round_trip_through_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("d.jsonl");
        let pairs = vec![
            ExamplePair::from_text("1", &["A b, c.", "d"], &["b c"]).unwrap().with_labels(),
            ExamplePair::from_text("2", &["e f"], &["g"]).unwrap(),
        ];
        write_dataset(&pairs, &path).unwrap();
        let back = load_dataset(&path).unwrap();
        assert_eq!(back, pairs);
        let text = std::fs::read_to_string(&path).unwrap();
        assert_eq!(render_dataset(&back).unwrap(), text);
    }
}
