//! Flat `key = value` configuration files.
//!
//! Keys are the [`RunConfig`] field names. `g` is accepted in place of `u`
//! and converted with `u = g / (n_total - 1)`. Blank lines and lines starting
//! with `#` are ignored.

use std::path::Path;

use anyhow::{bail, Context, Result};
use fourwell::RunConfig;
use serde_json::{Map, Number, Value};

/// Parses a configuration text, reporting every bad line at once.
pub fn parse(text: &str) -> Result<RunConfig> {
    let defaults = match serde_json::to_value(RunConfig::default())? {
        Value::Object(map) => map,
        _ => unreachable!("RunConfig serializes to an object"),
    };
    let mut resolved = defaults.clone();
    let mut seen = Vec::new();
    let mut errors = Vec::new();
    let mut g = None;

    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let lineno = lineno + 1;
        let Some((key, value)) = line.split_once('=') else {
            errors.push(format!("line {lineno}: expected `key = value`, got `{line}`"));
            continue;
        };
        let (key, value) = (key.trim(), value.trim());
        if seen.iter().any(|k| k == key) {
            errors.push(format!("line {lineno}: duplicate key `{key}`"));
            continue;
        }
        seen.push(key.to_string());
        if key == "g" {
            match value.parse::<f64>() {
                Ok(v) => g = Some(v),
                Err(_) => errors.push(format!("line {lineno}: `g` expects a number, got `{value}`")),
            }
            continue;
        }
        let Some(default) = defaults.get(key) else {
            errors.push(format!("line {lineno}: unknown key `{key}`"));
            continue;
        };
        match parse_like(default, value) {
            Some(v) => {
                resolved.insert(key.to_string(), v);
            }
            None => errors.push(format!("line {lineno}: `{key}` expects {}, got `{value}`", kind(default))),
        }
    }

    if let Some(g) = g {
        if seen.iter().any(|k| k == "u") {
            errors.push("both `u` and `g` given; set only one".into());
        } else {
            let n = resolved["n_total"].as_u64().unwrap_or(0) as f64;
            if n < 2.0 {
                errors.push("`g` needs n_total >= 2 to define u = g / (n_total - 1)".into());
            } else if let Some(u) = Number::from_f64(g / (n - 1.0)) {
                resolved.insert("u".into(), Value::Number(u));
            } else {
                errors.push(format!("`g` = {g} gives a non-finite u"));
            }
        }
    }
    if !errors.is_empty() {
        bail!("invalid configuration:\n  {}", errors.join("\n  "));
    }
    let config: RunConfig = serde_json::from_value(Value::Object(resolved))?;
    if let Err(e) = config.validate() {
        match e {
            fourwell::Error::InvalidConfig(list) => bail!("invalid configuration:\n  {}", list.join("\n  ")),
            other => bail!(other),
        }
    }
    Ok(config)
}

pub fn load(path: &Path) -> Result<RunConfig> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    parse(&text).with_context(|| format!("in {}", path.display()))
}

/// Sets one field from its text form, as a config line would.
pub fn set(config: &RunConfig, key: &str, value: &str) -> Result<RunConfig> {
    let mut text = render(config);
    if key == "g" {
        text = text.lines().filter(|l| !l.starts_with("u =")).collect::<Vec<_>>().join("\n");
    } else {
        text = text.lines().filter(|l| l.split('=').next().map(str::trim) != Some(key)).collect::<Vec<_>>().join("\n");
    }
    text.push_str(&format!("\n{key} = {value}\n"));
    parse(&text)
}

/// Every field as `key = value`, sorted by key; parses back to `config`.
pub fn render(config: &RunConfig) -> String {
    let Ok(Value::Object(map)) = serde_json::to_value(config) else {
        unreachable!("RunConfig serializes to an object")
    };
    let map: Map<String, Value> = map;
    let mut keys: Vec<&String> = map.keys().collect();
    keys.sort();
    keys.iter().map(|k| format!("{k} = {}\n", map[k.as_str()])).collect()
}

fn parse_like(default: &Value, text: &str) -> Option<Value> {
    match default {
        Value::Bool(_) => text.parse::<bool>().ok().map(Value::Bool),
        Value::Number(n) if n.is_u64() => text.parse::<u64>().ok().map(|v| Value::Number(v.into())),
        Value::Number(_) => text.parse::<f64>().ok().and_then(Number::from_f64).map(Value::Number),
        _ => None,
    }
}

fn kind(default: &Value) -> &'static str {
    match default {
        Value::Bool(_) => "true or false",
        Value::Number(n) if n.is_u64() => "a non-negative integer",
        _ => "a finite number",
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_gives_defaults() {
        assert_eq!(parse("# nothing\n\n").unwrap(), RunConfig::default());
    }

    #[test]
    fn render_round_trips() {
        let config = RunConfig { gamma: 0.25, seed: 9, tolerance: 3e-11, complex_perturbation: false, ..Default::default() };
        assert_eq!(parse(&render(&config)).unwrap(), config);
    }

    #[test]
    fn g_sets_u() {
        let config = parse("g = 2.1\n").unwrap();
        assert!((config.u - 0.1).abs() < 1e-15);
        assert!(parse("g = 2.1\nu = 0.1\n").is_err());
    }

    #[test]
    fn every_bad_line_is_reported() {
        let err = parse("colour = red\nseed = -1\ngamma\nd = 0.1\nd = 0.2\n").unwrap_err().to_string();
        for needle in ["unknown key `colour`", "`seed` expects", "line 3", "duplicate key `d`"] {
            assert!(err.contains(needle), "{needle} missing from {err}");
        }
    }

    #[test]
    fn invariant_violations_are_listed() {
        let err = parse("gamma = 1.5\nn = 6\n").unwrap_err().to_string();
        assert!(err.contains("gamma exceeds j"));
        assert!(err.contains("does not equal n_total"));
    }

    #[test]
    fn set_overrides_one_field() {
        let config = set(&RunConfig::default(), "d", "0.032").unwrap();
        assert_eq!(config, RunConfig { d: 0.032, ..Default::default() });
        assert!(set(&RunConfig::default(), "nope", "1").is_err());
    }
}
