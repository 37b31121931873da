//! Input plumbing: the flat key=value configuration file, pay-off loading
//! and partition parsing.

use std::collections::BTreeMap;
use std::fmt::Display;
use std::path::Path;
use std::str::FromStr;

use anyhow::{bail, Context, Result};
use diswap::payoffs::parse_payoff_spec;
use diswap::{Partition, SwapPayoff};

/// Key=value pairs loaded from `--config`. Values fill in for flags the user
/// did not pass; explicit flags always win.
#[derive(Debug, Default)]
pub struct Config {
    values: BTreeMap<String, String>,
}

impl Config {
    /// Load a config file, or return an empty config when no path is given.
    ///
    /// The format is one `key = value` pair per line; blank lines and lines
    /// starting with `#` are ignored. Later occurrences of a key override
    /// earlier ones.
    pub fn load(path: Option<&Path>) -> Result<Self> {
        let Some(path) = path else {
            return Ok(Self::default());
        };
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("cannot read config file {}", path.display()))?;
        let mut values = BTreeMap::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                bail!(
                    "{}:{}: expected `key = value`, got `{line}`",
                    path.display(),
                    lineno + 1
                );
            };
            values.insert(key.trim().to_string(), value.trim().to_string());
        }
        Ok(Self { values })
    }

    fn lookup<T>(&self, key: &str) -> Result<Option<T>>
    where
        T: FromStr,
        T::Err: Display,
    {
        match self.values.get(key) {
            None => Ok(None),
            Some(raw) => raw
                .parse()
                .map(Some)
                .map_err(|e| anyhow::anyhow!("config key `{key}`: cannot parse `{raw}`: {e}")),
        }
    }

    /// Flag value if given, else the config value, else the default.
    pub fn resolve<T>(&self, flag: Option<T>, key: &str, default: T) -> Result<T>
    where
        T: FromStr,
        T::Err: Display,
    {
        Ok(flag.or(self.lookup(key)?).unwrap_or(default))
    }

    /// Flag value if given, else the config value, else an error naming the
    /// missing flag.
    pub fn require<T>(&self, flag: Option<T>, key: &str) -> Result<T>
    where
        T: FromStr,
        T::Err: Display,
    {
        flag.or(self.lookup(key)?)
            .ok_or_else(|| anyhow::anyhow!("missing required value: pass --{key} or set `{key}` in the config"))
    }
}

/// Load a pay-off from `--payoff`: inline JSON when the argument starts with
/// `{`, otherwise the path of a JSON file.
pub fn load_payoff(spec: &str) -> Result<SwapPayoff> {
    let json = if spec.trim_start().starts_with('{') {
        spec.to_string()
    } else {
        std::fs::read_to_string(spec)
            .with_context(|| format!("cannot read pay-off file {spec}"))?
    };
    parse_payoff_spec(&json).context("invalid pay-off spec")
}

/// Parse a comma-separated list of partition tokens, all at the same maturity.
pub fn parse_partitions(tokens: &str, maturity: f64) -> Result<Vec<Partition>> {
    let mut out = Vec::new();
    for token in tokens.split(',') {
        let token = token.trim();
        if token.is_empty() {
            continue;
        }
        out.push(
            Partition::parse(token, maturity)
                .with_context(|| format!("invalid partition token `{token}`"))?,
        );
    }
    if out.is_empty() {
        bail!("no partitions given");
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    #[test]
    fn config_precedence_flag_over_file_over_default() {
        let mut file = tempfile::NamedTempFile::new().unwrap();
        writeln!(file, "# comment\nsigma = 0.3\n\npaths= 77").unwrap();
        let cfg = Config::load(Some(file.path())).unwrap();
        let got: f64 = cfg.resolve(Some(0.5), "sigma", 0.2).unwrap();
        assert_eq!(got, 0.5);
        let got: f64 = cfg.resolve(None, "sigma", 0.2).unwrap();
        assert_eq!(got, 0.3);
        let got: f64 = cfg.resolve(None, "f0", 100.0).unwrap();
        assert_eq!(got, 100.0);
        let got: usize = cfg.require(None, "paths").unwrap();
        assert_eq!(got, 77);
        assert!(cfg.require::<u64>(None, "seed").is_err());
    }

    #[test]
    fn config_rejects_malformed_lines() {
        let mut file = tempfile::NamedTempFile::new().unwrap();
        writeln!(file, "sigma 0.3").unwrap();
        let err = Config::load(Some(file.path())).unwrap_err();
        assert!(err.to_string().contains("expected `key = value`"));
    }

    #[test]
    fn inline_payoff_and_partition_lists_parse() {
        let payoff = load_payoff(r#"{"classic": "log-variance"}"#).unwrap();
        assert!(matches!(payoff, SwapPayoff::Classic(_)));
        let parts = parse_partitions("1, monthly ,252", 1.0).unwrap();
        assert_eq!(parts.len(), 3);
        assert_eq!(parts[1].n_steps(), 12);
        assert!(parse_partitions(" , ", 1.0).is_err());
    }
}
