//! `--config FILE` support. Keys from the file become ordinary flags placed
//! right after the subcommand name, so anything given on the command line
//! (which comes later) overrides them.
//!
//! Keys may use `-` or `_`. Keys in the unnamed section apply to every
//! subcommand that has them; a `[train]` (etc.) section applies to that
//! subcommand only. A key no subcommand knows is an error.

use crate::Cli;
use anyhow::{bail, Context, Result};
use clap::{ArgAction, Command, CommandFactory};
use ini::Ini;
use std::collections::HashMap;
use std::ffi::OsString;
use std::path::PathBuf;

fn config_path(args: &[OsString]) -> Option<PathBuf> {
    let mut iter = args.iter().skip(1);
    while let Some(a) = iter.next() {
        let s = a.to_string_lossy();
        if s == "--config" {
            return iter.next().map(PathBuf::from);
        }
        if let Some(rest) = s.strip_prefix("--config=") {
            return Some(PathBuf::from(rest));
        }
    }
    None
}

/// long flag -> whether it takes a value
fn flags(cmd: &Command) -> HashMap<String, bool> {
    cmd.get_arguments()
        .filter_map(|a| {
            let takes_value = !matches!(a.get_action(), ArgAction::SetTrue | ArgAction::SetFalse | ArgAction::Count);
            a.get_long().map(|l| (l.to_string(), takes_value))
        })
        .collect()
}

fn truthy(value: &str) -> Result<bool> {
    match value.trim().to_ascii_lowercase().as_str() {
        "true" | "yes" | "on" | "1" => Ok(true),
        "false" | "no" | "off" | "0" => Ok(false),
        other => bail!("expected a boolean, got {other:?}"),
    }
}

pub fn apply_config(args: Vec<OsString>) -> Result<Vec<OsString>> {
    let Some(path) = config_path(&args) else {
        return Ok(args);
    };
    let root = Cli::command();
    let names: Vec<String> = root.get_subcommands().map(|c| c.get_name().to_string()).collect();
    let Some(pos) = args.iter().position(|a| names.iter().any(|n| a == n.as_str())) else {
        return Ok(args);
    };
    let sub_name = args[pos].to_string_lossy().into_owned();
    let ini = Ini::load_from_file(&path).with_context(|| format!("cannot read config file {}", path.display()))?;

    let global = flags(&root);
    let mut own = global.clone();
    own.extend(flags(root.find_subcommand(&sub_name).expect("known subcommand")));
    let mut anywhere = global;
    for sub in root.get_subcommands() {
        anywhere.extend(flags(sub));
    }

    let mut injected: Vec<OsString> = Vec::new();
    for (section, props) in ini.iter() {
        match section {
            None => {}
            Some(s) if s == sub_name => {}
            Some(s) if names.iter().any(|n| n == s) => continue,
            Some(s) => bail!("{}: unknown section [{s}]", path.display()),
        }
        for (key, value) in props.iter() {
            let key = key.trim().replace('_', "-");
            if key == "config" {
                bail!("{}: a config file cannot name another config file", path.display());
            }
            let takes_value = match own.get(&key) {
                Some(&t) => t,
                None if section.is_none() && anywhere.contains_key(&key) => continue,
                None => bail!("{}: unknown key {key:?} for `{sub_name}`", path.display()),
            };
            if takes_value {
                injected.push(format!("--{key}").into());
                injected.push(value.trim().into());
            } else if truthy(value).with_context(|| format!("{}: key {key:?}", path.display()))? {
                injected.push(format!("--{key}").into());
            }
        }
    }
    let mut out = args[..=pos].to_vec();
    out.extend(injected);
    out.extend_from_slice(&args[pos + 1..]);
    Ok(out)
}
