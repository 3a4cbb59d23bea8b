use crate::error::{Error, Result};
use crate::trainer::ExperimentConfig;

/// Rewrites `--a.b value` and `--a.b=value` into `--set a.b=value` so the
/// parser only sees declared flags.
pub fn expand_dotted(args: Vec<String>) -> Vec<String> {
    let mut out = Vec::with_capacity(args.len());
    let mut it = args.into_iter();
    while let Some(a) = it.next() {
        let Some(flag) = a.strip_prefix("--") else {
            out.push(a);
            continue;
        };
        let (key, inline) = match flag.split_once('=') {
            Some((k, v)) => (k.to_string(), Some(v.to_string())),
            None => (flag.to_string(), None),
        };
        if !key.contains('.') {
            out.push(a);
            continue;
        }
        let value = inline.or_else(|| it.next()).unwrap_or_default();
        out.push("--set".into());
        out.push(format!("{key}={value}"));
    }
    out
}

/// Splits `key=value`.
pub fn parse_assignment(s: &str) -> Result<(String, String)> {
    let (k, v) = s
        .split_once('=')
        .ok_or_else(|| Error::config(format!("override `{s}` must look like key=value")))?;
    if k.is_empty() || k.split('.').any(str::is_empty) {
        return Err(Error::config(format!("override key `{k}` is malformed")));
    }
    Ok((k.to_string(), v.to_string()))
}

/// TOML literal if it parses as one, otherwise a bare string.
fn literal(raw: &str) -> toml::Value {
    toml::from_str::<toml::Table>(&format!("v = {raw}"))
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.to_string()))
}

pub fn apply(table: &mut toml::Table, key: &str, raw: &str) -> Result<()> {
    let parts: Vec<&str> = key.split('.').collect();
    let mut cur = table;
    for p in &parts[..parts.len() - 1] {
        let entry = cur.entry(p.to_string()).or_insert_with(|| toml::Value::Table(toml::Table::new()));
        cur = entry
            .as_table_mut()
            .ok_or_else(|| Error::config(format!("override `{key}`: `{p}` is not a table")))?;
    }
    cur.insert(parts[parts.len() - 1].to_string(), literal(raw));
    Ok(())
}

/// Parses `text`, applies the overrides in order and validates the result.
pub fn resolve_config(text: &str, overrides: &[(String, String)]) -> Result<ExperimentConfig> {
    let mut table: toml::Table = toml::from_str(text).map_err(|e| Error::config(e.to_string()))?;
    for (k, v) in overrides {
        apply(&mut table, k, v)?;
    }
    let config: ExperimentConfig = toml::Value::Table(table).try_into().map_err(|e: toml::de::Error| Error::config(e.to_string()))?;
    config.validate()?;
    Ok(config)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn strings(xs: &[&str]) -> Vec<String> {
        xs.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn dotted_flags_become_assignments() {
        let got = expand_dotted(strings(&["train", "--config", "c.toml", "--schedule.sigma", "0.25", "--grpo.lr=2"]));
        assert_eq!(got, strings(&["train", "--config", "c.toml", "--set", "schedule.sigma=0.25", "--set", "grpo.lr=2"]));
    }

    #[test]
    fn overrides_are_typed() {
        let base = "version = 1\nfamily = \"countdown\"\n";
        let c = resolve_config(
            base,
            &[
                ("schedule.sigma".into(), "0.25".into()),
                ("steps".into(), "10".into()),
                ("schedule.kind".into(), "cosine".into()),
                ("level_subset".into(), "[\"hard\"]".into()),
            ],
        )
        .unwrap();
        assert_eq!(c.schedule.sigma, 0.25);
        assert_eq!(c.steps, 10);
        assert_eq!(c.level_subset, Some(vec![crate::envs::Level::Hard]));
        let e = resolve_config(base, &[("schedule.sigma".into(), "0".into())]).unwrap_err();
        assert!(e.to_string().contains("schedule.sigma"), "{e}");
        assert!(resolve_config(base, &[("nope".into(), "1".into())]).is_err());
        assert!(parse_assignment("a..b=1").is_err());
        assert!(parse_assignment("novalue").is_err());
    }
}
