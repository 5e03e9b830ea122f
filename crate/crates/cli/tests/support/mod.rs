#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

pub fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_gcir"))
}

pub fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("gcir runs")
}

pub fn stdout(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).expect("utf-8 output")
}

pub fn write(dir: &Path, name: &str, text: &str) -> String {
    let path = dir.join(name);
    std::fs::write(&path, text).unwrap();
    path.to_str().unwrap().to_string()
}

fn schema_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../schemas")
}

pub fn load_schema(name: &str) -> Value {
    let text = std::fs::read_to_string(schema_dir().join(name)).expect("schema exists");
    serde_json::from_str(&text).expect("schema is JSON")
}

/// Validates `value` against the subset of JSON Schema used by the shipped
/// schemas: `type`, `enum`, `required`, `properties`,
/// `additionalProperties: false`, `items`, `minItems`, `minimum`,
/// `maximum`, `exclusiveMinimum`, `oneOf` and file `$ref`s.
pub fn validate(value: &Value, schema: &Value) -> Result<(), String> {
    check(value, schema, "$")
}

fn type_matches(value: &Value, ty: &str) -> bool {
    match ty {
        "object" => value.is_object(),
        "array" => value.is_array(),
        "string" => value.is_string(),
        "boolean" => value.is_boolean(),
        "null" => value.is_null(),
        "number" => value.is_number(),
        "integer" => value.is_i64() || value.is_u64(),
        other => panic!("unsupported type {other}"),
    }
}

fn check(value: &Value, schema: &Value, at: &str) -> Result<(), String> {
    let obj = schema.as_object().expect("schema is an object");
    if let Some(r) = obj.get("$ref") {
        return check(value, &load_schema(r.as_str().unwrap()), at);
    }
    if let Some(ty) = obj.get("type") {
        let ok = match ty {
            Value::String(t) => type_matches(value, t),
            Value::Array(ts) => ts.iter().any(|t| type_matches(value, t.as_str().unwrap())),
            _ => panic!("bad type keyword"),
        };
        if !ok {
            return Err(format!("{at}: {value} is not of type {ty}"));
        }
    }
    if let Some(Value::Array(options)) = obj.get("enum") {
        if !options.contains(value) {
            return Err(format!("{at}: {value} not in {options:?}"));
        }
    }
    if let Some(Value::Array(options)) = obj.get("oneOf") {
        let passing = options.iter().filter(|s| check(value, s, at).is_ok()).count();
        if passing != 1 {
            return Err(format!("{at}: {passing} oneOf branches match {value}"));
        }
    }
    if let Some(x) = value.as_f64() {
        if let Some(m) = obj.get("minimum").and_then(Value::as_f64) {
            if x < m {
                return Err(format!("{at}: {x} < minimum {m}"));
            }
        }
        if let Some(m) = obj.get("maximum").and_then(Value::as_f64) {
            if x > m {
                return Err(format!("{at}: {x} > maximum {m}"));
            }
        }
        if let Some(m) = obj.get("exclusiveMinimum").and_then(Value::as_f64) {
            if x <= m {
                return Err(format!("{at}: {x} <= exclusiveMinimum {m}"));
            }
        }
    }
    if let Value::Object(map) = value {
        if let Some(Value::Array(required)) = obj.get("required") {
            for key in required {
                if !map.contains_key(key.as_str().unwrap()) {
                    return Err(format!("{at}: missing {key}"));
                }
            }
        }
        let props = obj.get("properties").and_then(Value::as_object);
        for (key, v) in map {
            match props.and_then(|p| p.get(key)) {
                Some(s) => check(v, s, &format!("{at}.{key}"))?,
                None if obj.get("additionalProperties") == Some(&Value::Bool(false)) => {
                    return Err(format!("{at}: unexpected property {key}"));
                }
                None => {}
            }
        }
    }
    if let Value::Array(items) = value {
        if let Some(n) = obj.get("minItems").and_then(Value::as_u64) {
            if (items.len() as u64) < n {
                return Err(format!("{at}: fewer than {n} items"));
            }
        }
        if let Some(s) = obj.get("items") {
            for (i, v) in items.iter().enumerate() {
                check(v, s, &format!("{at}[{i}]"))?;
            }
        }
    }
    Ok(())
}
