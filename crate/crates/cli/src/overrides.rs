//! Config keys given as ordinary flags (`--lr 0.01`, `--train.lr=0.01`,
//! `--batch-size 8`) are pulled out of the argument list before clap sees it.

use music_auditor::config::ExperimentConfig;

/// Flags that belong to a subcommand and must not be read as config keys.
const RESERVED: &[&str] = &["config", "manifest", "tensors", "out", "checkpoint", "format", "help"];

/// Split `args` into the ones for clap and `(key, value)` config overrides.
pub fn extract(args: Vec<String>) -> Result<(Vec<String>, Vec<(String, String)>), String> {
    let mut rest = Vec::with_capacity(args.len());
    let mut overrides = Vec::new();
    let mut it = args.into_iter();
    while let Some(arg) = it.next() {
        let Some(flag) = arg.strip_prefix("--").filter(|f| !f.is_empty()) else {
            rest.push(arg);
            continue;
        };
        let (name, inline) = match flag.split_once('=') {
            Some((n, v)) => (n.to_string(), Some(v.to_string())),
            None => (flag.to_string(), None),
        };
        if RESERVED.contains(&name.as_str()) {
            rest.push(arg);
            continue;
        }
        let Ok(key) = ExperimentConfig::resolve_key(&name) else {
            rest.push(arg);
            continue;
        };
        let value = match inline {
            Some(v) => v,
            None => it
                .next()
                .ok_or_else(|| format!("flag --{name} needs a value"))?,
        };
        overrides.push((key, value));
    }
    Ok((rest, overrides))
}
