//! Flat `key = value` config files, merged into argv beneath the real flags.

use std::collections::BTreeSet;
use std::path::Path;

use clap::CommandFactory;

use crate::args::Cli;
use crate::CliError;

const GLOBAL_VALUE_FLAGS: [&str; 4] = ["--seed", "--workers", "--out", "--config"];
const FILE_GLOBALS: [&str; 3] = ["seed", "workers", "out"];

/// Returns `argv` extended with flags from the `--config` file, if one is named.
/// Keys already given on the command line are skipped, so flags win.
pub fn merge_config(argv: Vec<String>) -> Result<Vec<String>, CliError> {
    let Some(path) = flag_value(&argv, "--config") else {
        return Ok(argv);
    };
    let entries = load_config(Path::new(&path))?;
    let path_names = subcommand_path(&argv);
    let known = known_keys(&path_names)?;

    let mut merged = argv.clone();
    for (key, value) in entries {
        let flag_name = key.replace('_', "-");
        let Some(takes_value) = known.get(&flag_name) else {
            return Err(CliError::Usage(format!("unknown config key: {key}")));
        };
        let flag = format!("--{flag_name}");
        if given(&argv, &flag) {
            continue;
        }
        match (takes_value, value) {
            (false, toml::Value::Boolean(true)) => merged.push(flag),
            (false, toml::Value::Boolean(false)) => {}
            (false, _) => {
                return Err(CliError::Usage(format!(
                    "config key {key} expects true or false"
                )))
            }
            (true, v) => {
                merged.push(flag);
                merged.push(scalar_text(&key, &v)?);
            }
        }
    }
    Ok(merged)
}

/// Parses a flat TOML document, rejecting duplicates and nested tables.
pub fn load_config(path: &Path) -> Result<Vec<(String, toml::Value)>, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", path.display())))?;
    if let Some(key) = duplicate_key(&text) {
        return Err(CliError::Usage(format!(
            "duplicate config key {key} in {}",
            path.display()
        )));
    }
    let table: toml::Table = text.parse().map_err(|e: toml::de::Error| {
        CliError::Usage(format!(
            "invalid config {}: {}",
            path.display(),
            e.message().replace('\n', " ")
        ))
    })?;
    let mut out = Vec::with_capacity(table.len());
    for (k, v) in table {
        if matches!(v, toml::Value::Table(_)) {
            return Err(CliError::Usage(format!(
                "config key {k} is a table; only flat keys are allowed"
            )));
        }
        out.push((k, v));
    }
    Ok(out)
}

/// First bare key assigned twice, found by a line scan so the diagnostic can name it.
fn duplicate_key(text: &str) -> Option<String> {
    let mut seen = BTreeSet::new();
    for line in text.lines() {
        let line = line.trim();
        if line.starts_with('#') || line.starts_with('[') {
            continue;
        }
        if let Some((k, _)) = line.split_once('=') {
            let k = k.trim().trim_matches('"').to_string();
            if !k.is_empty() && !seen.insert(k.clone()) {
                return Some(k);
            }
        }
    }
    None
}

fn scalar_text(key: &str, v: &toml::Value) -> Result<String, CliError> {
    Ok(match v {
        toml::Value::String(s) => s.clone(),
        toml::Value::Integer(i) => i.to_string(),
        toml::Value::Float(f) => f.to_string(),
        toml::Value::Boolean(b) => b.to_string(),
        toml::Value::Array(items) => items
            .iter()
            .map(|i| scalar_text(key, i))
            .collect::<Result<Vec<_>, _>>()?
            .join(","),
        _ => {
            return Err(CliError::Usage(format!(
                "config key {key} has an unsupported value"
            )))
        }
    })
}

fn flag_value(argv: &[String], flag: &str) -> Option<String> {
    let prefix = format!("{flag}=");
    let mut it = argv.iter().skip(1);
    while let Some(a) = it.next() {
        if a == flag {
            return it.next().cloned();
        }
        if let Some(v) = a.strip_prefix(&prefix) {
            return Some(v.to_string());
        }
    }
    None
}

fn given(argv: &[String], flag: &str) -> bool {
    let prefix = format!("{flag}=");
    argv.iter()
        .skip(1)
        .any(|a| a == flag || a.starts_with(&prefix))
}

/// Leading positional tokens, skipping global flags and their values.
fn subcommand_path(argv: &[String]) -> Vec<String> {
    let mut names = Vec::new();
    let mut it = argv.iter().skip(1);
    while let Some(a) = it.next() {
        if GLOBAL_VALUE_FLAGS.contains(&a.as_str()) {
            it.next();
        } else if a.starts_with('-') {
            if !a.contains('=') {
                break;
            }
        } else {
            names.push(a.clone());
            if names.len() == 2 {
                break;
            }
        }
    }
    names
}

/// Long flag names accepted by the addressed subcommand, with whether each takes a value.
fn known_keys(path: &[String]) -> Result<std::collections::BTreeMap<String, bool>, CliError> {
    let root = Cli::command();
    let mut cmd = &root;
    for name in path {
        match cmd.find_subcommand(name) {
            Some(sub) => cmd = sub,
            None => break,
        }
    }
    if cmd.has_subcommands() {
        return Err(CliError::Usage(
            "a config file needs a complete subcommand on the command line".into(),
        ));
    }
    let mut known: std::collections::BTreeMap<String, bool> = cmd
        .get_arguments()
        .filter_map(|a| {
            a.get_long()
                .map(|l| (l.to_string(), a.get_action().takes_values()))
        })
        .collect();
    for g in FILE_GLOBALS {
        known.insert(g.to_string(), true);
    }
    known.remove("config");
    Ok(known)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn argv(s: &str) -> Vec<String> {
        s.split_whitespace().map(String::from).collect()
    }

    #[test]
    fn duplicates_are_named() {
        assert_eq!(duplicate_key("a = 1\nb = 2\n a = 3"), Some("a".into()));
        assert_eq!(duplicate_key("# a = 1\na = 2"), None);
    }

    #[test]
    fn path_skips_global_values() {
        assert_eq!(
            subcommand_path(&argv("ud --seed 3 --out x.csv simulate ctrw --mu 0.5")),
            vec!["simulate", "ctrw"]
        );
        assert_eq!(
            subcommand_path(&argv("ud --seed=3 fit msd")),
            vec!["fit", "msd"]
        );
    }

    #[test]
    fn flag_detection() {
        let a = argv("ud simulate ctrw --mu=0.5 --seed 7");
        assert!(given(&a, "--mu"));
        assert!(given(&a, "--seed"));
        assert!(!given(&a, "--walkers"));
        assert_eq!(flag_value(&a, "--seed").as_deref(), Some("7"));
    }

    #[test]
    fn keys_for_leaf_command() {
        let k = known_keys(&["simulate".into(), "ctrw".into()]).unwrap();
        assert_eq!(k.get("mu"), Some(&true));
        assert_eq!(k.get("seed"), Some(&true));
        assert!(!k.contains_key("config"));
        let k = known_keys(&["fit".into(), "msd".into()]).unwrap();
        assert_eq!(k.get("weighted"), Some(&false));
        assert!(known_keys(&["simulate".into()]).is_err());
    }
}
