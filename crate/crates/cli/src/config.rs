//! `--config` files: `flag-name = value` lines, `#` comments.

use std::ffi::OsString;
use std::fs;
use std::path::Path;

/// Parses a config file body into `--key=value` arguments.
pub fn parse(text: &str) -> Result<Vec<OsString>, String> {
    let mut args = Vec::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) =
            line.split_once('=').ok_or_else(|| format!("line {}: expected `key = value`", lineno + 1))?;
        let key = key.trim().trim_start_matches("--");
        if key.is_empty() || key.contains(char::is_whitespace) {
            return Err(format!("line {}: bad key '{key}'", lineno + 1));
        }
        if key == "config" {
            return Err(format!("line {}: config files cannot include other config files", lineno + 1));
        }
        args.push(format!("--{key}={}", value.trim()).into());
    }
    Ok(args)
}

fn config_path(argv: &[OsString]) -> Option<OsString> {
    let mut it = argv.iter();
    while let Some(arg) = it.next() {
        let s = arg.to_string_lossy();
        if s == "--config" {
            return it.next().cloned();
        }
        if let Some(p) = s.strip_prefix("--config=") {
            return Some(p.into());
        }
        if s == "--" {
            break;
        }
    }
    None
}

/// Splices the arguments from a `--config` file right after the subcommand,
/// so that anything given on the command line overrides them.
pub fn expand(argv: Vec<OsString>) -> Result<Vec<OsString>, String> {
    let Some(path) = config_path(&argv) else {
        return Ok(argv);
    };
    let path = Path::new(&path);
    let text = fs::read_to_string(path).map_err(|e| format!("cannot read config {}: {e}", path.display()))?;
    let extra = parse(&text).map_err(|e| format!("{}: {e}", path.display()))?;
    let Some(sub) = argv.iter().skip(1).position(|a| !a.to_string_lossy().starts_with('-')) else {
        return Ok(argv);
    };
    let at = sub + 2;
    let mut out = argv[..at].to_vec();
    out.extend(extra);
    out.extend_from_slice(&argv[at..]);
    Ok(out)
}
