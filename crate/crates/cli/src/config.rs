//! `--config` files: `key=value` lines turned into flags placed before the
//! command-line flags, so explicit flags override them.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};

/// Finds `--config <path>` / `--config=<path>` in raw arguments.
pub fn find_config(args: &[OsString]) -> Option<PathBuf> {
    let mut it = args.iter();
    while let Some(a) = it.next() {
        let s = a.to_string_lossy();
        if s == "--config" {
            return it.next().map(PathBuf::from);
        }
        if let Some(p) = s.strip_prefix("--config=") {
            return Some(PathBuf::from(p));
        }
    }
    None
}

/// Parses `key=value` lines; `#` starts a comment. `key=true` becomes a bare
/// flag and `key=false` is dropped.
pub fn config_args(path: &Path) -> Result<Vec<OsString>> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
    parse_config(&text).with_context(|| format!("in config {}", path.display()))
}

pub fn parse_config(text: &str) -> Result<Vec<OsString>> {
    let mut out = Vec::new();
    for (k, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            bail!("line {}: expected key=value, got `{line}`", k + 1);
        };
        let key = key.trim().replace('_', "-");
        let value = value.trim();
        if key.is_empty() || key == "config" {
            bail!("line {}: invalid key `{key}`", k + 1);
        }
        match value {
            "true" => out.push(format!("--{key}").into()),
            "false" => {}
            v => {
                out.push(format!("--{key}").into());
                out.push(v.into());
            }
        }
    }
    Ok(out)
}

/// Inserts config-derived flags right after the subcommand name.
pub fn merge(args: Vec<OsString>, config: Vec<OsString>) -> Vec<OsString> {
    // args[0] is the program; the first non-flag token after global options
    // is the subcommand.
    let mut i = 1;
    while i < args.len() {
        let s = args[i].to_string_lossy();
        if s == "--threads" || s == "--config" || s == "--manifest" {
            i += 2;
        } else if s.starts_with("--") {
            i += 1;
        } else {
            break;
        }
    }
    let at = (i + 1).min(args.len());
    let mut out = args[..at].to_vec();
    out.extend(config);
    out.extend_from_slice(&args[at..]);
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn os(v: &[&str]) -> Vec<OsString> {
        v.iter().map(OsString::from).collect()
    }

    #[test]
    fn parses_pairs_and_booleans() {
        let a = parse_config("seed=3\n# comment\nrestrict_to_zeros=true\nhard=false\n  beta = 0.3 \n").unwrap();
        assert_eq!(a, os(&["--seed", "3", "--restrict-to-zeros", "--beta", "0.3"]));
    }

    #[test]
    fn rejects_garbage() {
        assert!(parse_config("novalue\n").is_err());
        assert!(parse_config("config=x\n").is_err());
    }

    #[test]
    fn config_lands_after_subcommand() {
        let args = os(&["prog", "--threads", "2", "gen", "--seed", "9"]);
        let merged = merge(args, os(&["--seed", "1"]));
        assert_eq!(merged, os(&["prog", "--threads", "2", "gen", "--seed", "1", "--seed", "9"]));
    }

    #[test]
    fn finds_config_path() {
        assert_eq!(find_config(&os(&["p", "gen", "--config", "a.cfg"])), Some(PathBuf::from("a.cfg")));
        assert_eq!(find_config(&os(&["p", "--config=b.cfg", "gen"])), Some(PathBuf::from("b.cfg")));
        assert_eq!(find_config(&os(&["p", "gen"])), None);
    }
}
