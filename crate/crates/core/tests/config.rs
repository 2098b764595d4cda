use ofu_diffusion::harness::ExperimentConfig;
use ofu_diffusion::model::load_document;
use serde_json::Value;
use std::path::PathBuf;

fn root() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../..")
}

fn schema() -> Value {
    serde_json::from_str(&std::fs::read_to_string(root().join("docs/config.schema.json")).unwrap())
        .unwrap()
}

fn resolve<'a>(schema: &'a Value, node: &'a Value) -> &'a Value {
    match node.get("$ref").and_then(Value::as_str) {
        Some(r) => resolve(schema, &schema["$defs"][r.trim_start_matches("#/$defs/")]),
        None => node,
    }
}

/// Key-level conformance: every object key is declared, required keys are
/// present, tagged unions match a branch by their constant tag.
fn conforms(schema: &Value, node: &Value, value: &Value, path: &str) -> Result<(), String> {
    let node = resolve(schema, node);
    if let Some(branches) = node.get("oneOf").and_then(Value::as_array) {
        let ok: Vec<_> = branches
            .iter()
            .filter(|b| conforms(schema, b, value, path).is_ok())
            .collect();
        return if ok.len() == 1 {
            Ok(())
        } else {
            Err(format!("{path}: {} matching branches", ok.len()))
        };
    }
    if let Some(c) = node.get("const") {
        return if c == value {
            Ok(())
        } else {
            Err(format!("{path}: expected {c}"))
        };
    }
    if let Some(t) = node.get("type") {
        let kind = match value {
            Value::Null => "null",
            Value::Bool(_) => "boolean",
            Value::Number(n) if n.is_u64() || n.is_i64() => "integer",
            Value::Number(_) => "number",
            Value::String(_) => "string",
            Value::Array(_) => "array",
            Value::Object(_) => "object",
        };
        let allowed: Vec<&str> = match t {
            Value::Array(v) => v.iter().filter_map(Value::as_str).collect(),
            other => other.as_str().into_iter().collect(),
        };
        let ok = allowed.contains(&kind) || (kind == "integer" && allowed.contains(&"number"));
        if !ok {
            return Err(format!("{path}: {kind} is not {t}"));
        }
    }
    match value {
        Value::Object(map) => {
            let props = node
                .get("properties")
                .and_then(Value::as_object)
                .ok_or(format!("{path}: not an object in the schema"))?;
            for (k, v) in map {
                let sub = props.get(k).ok_or(format!("{path}.{k}: undeclared"))?;
                conforms(schema, sub, v, &format!("{path}.{k}"))?;
            }
            for r in node
                .get("required")
                .and_then(Value::as_array)
                .into_iter()
                .flatten()
            {
                if !map.contains_key(r.as_str().unwrap()) {
                    return Err(format!("{path}: missing {r}"));
                }
            }
            Ok(())
        }
        Value::Array(items) => match node.get("items") {
            Some(sub) => items
                .iter()
                .enumerate()
                .try_for_each(|(i, v)| conforms(schema, sub, v, &format!("{path}[{i}]"))),
            None => Err(format!("{path}: unexpected array")),
        },
        _ => Ok(()),
    }
}

#[test]
fn defaults_conform_to_the_schema() {
    let s = schema();
    let value = serde_json::to_value(ExperimentConfig::default()).unwrap();
    conforms(&s, &s, &value, "$").unwrap();
    let bad = serde_json::json!({ "sweep": { "unknown": 1 } });
    assert!(conforms(&s, &s, &bad, "$").is_err());
}

#[test]
fn example_configs_load_and_conform() {
    let s = schema();
    let mut seen = 0;
    for entry in std::fs::read_dir(root().join("configs")).unwrap() {
        let path = entry.unwrap().path();
        let cfg: ExperimentConfig =
            load_document(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
        let model = cfg.model.build().unwrap();
        cfg.agent.validate(&model).unwrap();
        cfg.sweep.validate().unwrap();
        conforms(&s, &s, &serde_json::to_value(&cfg).unwrap(), "$").unwrap();
        seen += 1;
    }
    assert!(seen >= 3);
}

#[test]
fn documented_benchmark_is_the_default() {
    let cfg: ExperimentConfig = load_document(&root().join("configs/benchmark.json")).unwrap();
    assert_eq!(cfg, ExperimentConfig::default());
}
