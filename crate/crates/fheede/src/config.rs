//! Text form of a parameter profile: one `key = value` per line, `#` comments.

use std::fs;
use std::path::Path;

use fheede_core::params::{self, InvalidProfile, ParamProfile};

/// Environment variable naming the default profile.
pub const PROFILE_ENV: &str = "FHEDE_PROFILE";

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("line {line}: {reason}")]
    Syntax { line: usize, reason: String },
    #[error("missing key `{0}`")]
    Missing(&'static str),
    #[error(transparent)]
    Invalid(#[from] InvalidProfile),
    #[error("cannot read profile {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
}

pub fn to_config(p: &ParamProfile) -> String {
    format!(
        "n = {}\nq = {}\nd = {}\nbeta = {}\nepsilon = {}\nsigma = {}\nkey_sigma = {}\nrefresh_mult_interval = {}\nrefresh_add_interval = {}\n",
        p.n,
        p.q,
        p.d,
        p.beta,
        p.epsilon,
        p.sigma,
        p.key_sigma,
        p.refresh_mult_interval,
        p.refresh_add_interval
    )
}

fn num<T: std::str::FromStr>(line: usize, key: &str, v: &str) -> Result<T, ConfigError> {
    v.parse().map_err(|_| ConfigError::Syntax {
        line,
        reason: format!("bad value `{v}` for `{key}`"),
    })
}

/// Parse and validate. `beta` may be omitted (derived from `q`); `key_sigma`
/// and the refresh intervals default to the shipped values.
pub fn parse_config(text: &str) -> Result<ParamProfile, ConfigError> {
    let defaults = params::toy_profile();
    let mut n = None;
    let mut q = None;
    let mut d = None;
    let mut beta = None;
    let mut epsilon = None;
    let mut sigma = None;
    let mut key_sigma = defaults.key_sigma;
    let mut mult = defaults.refresh_mult_interval;
    let mut add = defaults.refresh_add_interval;
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let body = raw.split('#').next().unwrap_or("").trim();
        if body.is_empty() {
            continue;
        }
        let Some((k, v)) = body.split_once('=') else {
            return Err(ConfigError::Syntax {
                line,
                reason: "expected key = value".into(),
            });
        };
        let (k, v) = (k.trim(), v.trim());
        match k {
            "n" => n = Some(num(line, k, v)?),
            "q" => q = Some(num(line, k, v)?),
            "d" => d = Some(num(line, k, v)?),
            "beta" => beta = Some(num(line, k, v)?),
            "epsilon" => epsilon = Some(num(line, k, v)?),
            "sigma" => sigma = Some(num(line, k, v)?),
            "key_sigma" => key_sigma = num(line, k, v)?,
            "refresh_mult_interval" => mult = num(line, k, v)?,
            "refresh_add_interval" => add = num(line, k, v)?,
            _ => {
                return Err(ConfigError::Syntax {
                    line,
                    reason: format!("unknown key `{k}`"),
                })
            }
        }
    }
    let q: u32 = q.ok_or(ConfigError::Missing("q"))?;
    let p = ParamProfile {
        n: n.ok_or(ConfigError::Missing("n"))?,
        q,
        d: d.ok_or(ConfigError::Missing("d"))?,
        beta: beta.unwrap_or_else(|| params::ceil_log2(q)),
        epsilon: epsilon.ok_or(ConfigError::Missing("epsilon"))?,
        sigma: sigma.ok_or(ConfigError::Missing("sigma"))?,
        key_sigma,
        refresh_mult_interval: mult,
        refresh_add_interval: add,
    };
    p.validate()?;
    Ok(p)
}

/// `paper`, `toy`, or a path to a config file.
pub fn resolve_profile(name: &str) -> Result<ParamProfile, ConfigError> {
    match name {
        "paper" => Ok(params::paper_profile()),
        "toy" => Ok(params::toy_profile()),
        path => {
            let text = fs::read_to_string(Path::new(path)).map_err(|source| ConfigError::Io {
                path: path.to_string(),
                source,
            })?;
            parse_config(&text)
        }
    }
}

/// The `--profile` flag if given, else `FHEDE_PROFILE`, else `toy`.
pub fn profile_from_flag_or_env(flag: Option<&str>) -> Result<ParamProfile, ConfigError> {
    let env = std::env::var(PROFILE_ENV).ok();
    resolve_profile(flag.or(env.as_deref()).unwrap_or("toy"))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn roundtrip_shipped() {
        for p in [params::paper_profile(), params::toy_profile()] {
            assert_eq!(parse_config(&to_config(&p)).unwrap(), p);
        }
    }

    #[test]
    fn minimal_with_comments() {
        let p =
            parse_config("# toy\nn=40\nq = 2053 # prime\nd=560\nepsilon=0.2\nsigma=0.1\n").unwrap();
        assert_eq!(p.beta, 12);
        assert_eq!(p.refresh_mult_interval, 10);
    }

    #[test]
    fn errors() {
        assert!(matches!(
            parse_config("n=40"),
            Err(ConfigError::Missing("q"))
        ));
        assert!(matches!(
            parse_config("n 40"),
            Err(ConfigError::Syntax { line: 1, .. })
        ));
        assert!(matches!(
            parse_config("n=40\nfoo=1"),
            Err(ConfigError::Syntax { line: 2, .. })
        ));
        assert!(matches!(
            parse_config("n=40\nq=4099\nd=100\nepsilon=0.2\nsigma=1"),
            Err(ConfigError::Invalid(_))
        ));
        assert!(resolve_profile("/nonexistent/profile.cfg").is_err());
    }
}
