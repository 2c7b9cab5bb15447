//! Plain-text experiment files.
//!
//! ```text
//! # comments start with '#'
//! preset = desk
//!
//! [system]
//! devices = 100        # or N
//! antennas = 64        # or M
//! subcarriers = 32     # or L
//! taps = 4             # or P
//! noise_var = 0.1      # or sigma2
//! activity_prob = 0.07
//! gains = 1.0          # one value for all devices, or a comma list
//!
//! [sweep]
//! param = P
//! values = 1, 2, 4
//! trials = 100
//! schemes = mle-direct, mle-virtual, bl-mle
//! seed = 1
//! rho = default        # default | sweep | <k>x | <value>
//!
//! [detect]
//! max_sweeps = 20
//! tol = 1e-4
//!
//! [output]
//! out = results.csv
//! threads = 4
//! ```
//!
//! Before the first section header, keys may be bare (`trials = 10`) or fully
//! qualified (`sweep.trials = 10`). `preset` is applied first wherever it
//! appears; every other key overrides it in file order.

use std::collections::HashMap;
use std::path::PathBuf;
use std::str::FromStr;

use crate::harness::{parse_schemes, ExperimentSpec, RhoPolicy, SweepParam};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Preset {
    Desk,
    Full,
}

impl Preset {
    pub fn spec(self) -> ExperimentSpec {
        match self {
            Preset::Desk => ExperimentSpec::desk(),
            Preset::Full => ExperimentSpec::full(),
        }
    }
}

impl FromStr for Preset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "desk" => Ok(Preset::Desk),
            "full" => Ok(Preset::Full),
            other => Err(Error::InvalidConfig(format!("unknown preset '{other}'"))),
        }
    }
}

/// Parsed experiment file.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub spec: ExperimentSpec,
    pub out: Option<PathBuf>,
    pub threads: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
enum Key {
    Preset,
    Devices,
    Antennas,
    Subcarriers,
    Taps,
    NoiseVar,
    ActivityProb,
    Gains,
    Param,
    Values,
    Trials,
    Schemes,
    Seed,
    Rho,
    MaxSweeps,
    Tol,
    Out,
    Threads,
}

fn lookup(section: &str, key: &str) -> Option<Key> {
    let k = match (section, key) {
        ("", "preset") => Key::Preset,
        ("system", "devices" | "N") => Key::Devices,
        ("system", "antennas" | "M") => Key::Antennas,
        ("system", "subcarriers" | "L") => Key::Subcarriers,
        ("system", "taps" | "P") => Key::Taps,
        ("system", "noise_var" | "sigma2") => Key::NoiseVar,
        ("system", "activity_prob" | "activity") => Key::ActivityProb,
        ("system", "gains") => Key::Gains,
        ("sweep", "param") => Key::Param,
        ("sweep", "values") => Key::Values,
        ("sweep", "trials") => Key::Trials,
        ("sweep", "schemes") => Key::Schemes,
        ("sweep", "seed") => Key::Seed,
        ("sweep", "rho") => Key::Rho,
        ("detect", "max_sweeps") => Key::MaxSweeps,
        ("detect", "tol") => Key::Tol,
        ("output", "out") => Key::Out,
        ("output", "threads") => Key::Threads,
        _ => return None,
    };
    Some(k)
}

const SECTIONS: [&str; 4] = ["system", "sweep", "detect", "output"];

struct Entry<'a> {
    line: usize,
    key: Key,
    value: &'a str,
}

fn err(line: usize, msg: impl Into<String>) -> Error {
    Error::Config {
        line,
        msg: msg.into(),
    }
}

fn number<T: FromStr>(line: usize, what: &str, v: &str) -> Result<T> {
    v.parse()
        .map_err(|_| err(line, format!("{what}: cannot parse '{v}'")))
}

fn list(line: usize, what: &str, v: &str) -> Result<Vec<f64>> {
    let out: Vec<f64> = v
        .split(',')
        .map(str::trim)
        .filter(|t| !t.is_empty())
        .map(|t| number(line, what, t))
        .collect::<Result<_>>()?;
    if out.is_empty() {
        return Err(err(line, format!("{what}: empty list")));
    }
    Ok(out)
}

fn tokenize(text: &str) -> Result<Vec<Entry<'_>>> {
    let mut section = String::new();
    let mut seen: HashMap<Key, usize> = HashMap::new();
    let mut out = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let body = raw.split('#').next().unwrap_or("").trim();
        if body.is_empty() {
            continue;
        }
        if let Some(rest) = body.strip_prefix('[') {
            let name = rest
                .strip_suffix(']')
                .ok_or_else(|| err(line, "unterminated section header"))?
                .trim();
            if !SECTIONS.contains(&name) {
                return Err(err(line, format!("unknown section [{name}]")));
            }
            section = name.to_string();
            continue;
        }
        let (k, v) = body
            .split_once('=')
            .ok_or_else(|| err(line, format!("expected key = value, got '{body}'")))?;
        let (k, v) = (k.trim(), v.trim());
        let key = match k.split_once('.') {
            Some((sec, name)) if section.is_empty() => lookup(sec, name),
            Some(_) => None,
            None if section.is_empty() => std::iter::once("")
                .chain(SECTIONS)
                .find_map(|sec| lookup(sec, k)),
            None => lookup(&section, k).or_else(|| lookup("", k)),
        }
        .ok_or_else(|| err(line, format!("unknown key '{k}'")))?;
        if v.is_empty() {
            return Err(err(line, format!("'{k}' has no value")));
        }
        if let Some(prev) = seen.insert(key, line) {
            return Err(err(line, format!("'{k}' already set on line {prev}")));
        }
        out.push(Entry {
            line,
            key,
            value: v,
        });
    }
    Ok(out)
}

/// Parse an experiment file. The returned spec is validated.
pub fn parse_config(text: &str) -> Result<RunConfig> {
    let entries = tokenize(text)?;
    let preset = match entries.iter().find(|e| e.key == Key::Preset) {
        Some(e) => e
            .value
            .parse::<Preset>()
            .map_err(|x| err(e.line, x.to_string()))?,
        None => Preset::Desk,
    };
    let mut cfg = RunConfig {
        spec: preset.spec(),
        out: None,
        threads: None,
    };
    let mut gains: Option<(usize, Vec<f64>)> = None;
    for e in &entries {
        let (line, v) = (e.line, e.value);
        let spec = &mut cfg.spec;
        let wrap = |x: Error| err(line, x.to_string());
        match e.key {
            Key::Preset => {}
            Key::Devices => spec.base = spec.base.with_devices(number(line, "devices", v)?),
            Key::Antennas => spec.base.antennas = number(line, "antennas", v)?,
            Key::Subcarriers => spec.base.subcarriers = number(line, "subcarriers", v)?,
            Key::Taps => spec.base.taps = number(line, "taps", v)?,
            Key::NoiseVar => spec.base.noise_var = number(line, "noise_var", v)?,
            Key::ActivityProb => spec.base.activity_prob = number(line, "activity_prob", v)?,
            Key::Gains => gains = Some((line, list(line, "gains", v)?)),
            Key::Param => spec.param = v.parse().map_err(wrap)?,
            Key::Values => spec.values = list(line, "values", v)?,
            Key::Trials => spec.trials = number(line, "trials", v)?,
            Key::Schemes => spec.schemes = parse_schemes(v).map_err(wrap)?,
            Key::Seed => spec.seed = number(line, "seed", v)?,
            Key::Rho => spec.rho = v.parse::<RhoPolicy>().map_err(wrap)?,
            Key::MaxSweeps => spec.options.max_sweeps = number(line, "max_sweeps", v)?,
            Key::Tol => spec.options.tol = number(line, "tol", v)?,
            Key::Out => cfg.out = Some(PathBuf::from(v)),
            Key::Threads => {
                let t: usize = number(line, "threads", v)?;
                if t == 0 {
                    return Err(err(line, "threads must be at least 1"));
                }
                cfg.threads = Some(t);
            }
        }
    }
    if let Some((line, g)) = gains {
        let n = cfg.spec.base.devices;
        cfg.spec.base.gains = match g.len() {
            1 => vec![g[0]; n],
            len if len == n => g,
            len => {
                return Err(err(
                    line,
                    format!("gains: expected 1 or {n} values, got {len}"),
                ))
            }
        };
        if cfg.spec.param == SweepParam::Devices {
            return Err(err(
                line,
                "per-device gains cannot be combined with a device-count sweep",
            ));
        }
    }
    if !(cfg.spec.options.tol >= 0.0) {
        return Err(Error::InvalidConfig("tol must be nonnegative".into()));
    }
    cfg.spec.base.validate()?;
    cfg.spec.validate()?;
    Ok(cfg)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::Scheme;

    #[test]
    fn empty_file_is_desk_preset() {
        let c = parse_config("# nothing\n\n").unwrap();
        assert_eq!(c.spec, ExperimentSpec::desk());
        assert_eq!(c.out, None);
    }

    #[test]
    fn sections_aliases_and_qualified_keys() {
        let text = "\
[system]
N = 40   # devices
L = 16
sigma2 = 0.5
[sweep]
param = L
values = 16, 24
schemes = mle-direct
rho = 3x
[output]
out = r.csv
";
        let c = parse_config(text).unwrap();
        assert_eq!(c.spec.base.devices, 40);
        assert_eq!(c.spec.base.gains.len(), 40);
        assert_eq!(c.spec.base.subcarriers, 16);
        assert_eq!(c.spec.base.noise_var, 0.5);
        assert_eq!(c.spec.param, SweepParam::Subcarriers);
        assert_eq!(c.spec.values, vec![16.0, 24.0]);
        assert_eq!(c.spec.schemes, vec![Scheme::MleDirect]);
        assert_eq!(c.spec.rho, RhoPolicy::Scaled(3.0));
        assert_eq!(c.out, Some(PathBuf::from("r.csv")));

        let q = parse_config("sweep.trials = 7\ntol = 0\npreset = full\n").unwrap();
        assert_eq!(q.spec.trials, 7);
        assert_eq!(q.spec.options.tol, 0.0);
        assert_eq!(q.spec.base.devices, 1000);
    }

    #[test]
    fn gains_broadcast_after_device_change() {
        let c = parse_config("[system]\ngains = 0.5\nN = 3\n[sweep]\nparam = P\n").unwrap();
        assert_eq!(c.spec.base.gains, vec![0.5; 3]);
        assert!(parse_config("[system]\nN = 3\ngains = 1, 2\n").is_err());
    }

    #[test]
    fn errors_carry_line_numbers() {
        let cases = [
            ("[system]\nfoo = 1\n", 2),
            ("\n\n[nope]\n", 3),
            ("[system]\nN = x\n", 2),
            ("[sweep]\ntrials = 1\ntrials = 2\n", 3),
            ("just words\n", 1),
            ("[sweep\n", 1),
            ("preset = big\n", 1),
            ("[sweep]\nschemes = foo\n", 2),
            ("[output]\nthreads = 0\n", 2),
            ("[system]\nN =\n", 2),
        ];
        for (text, line) in cases {
            match parse_config(text) {
                Err(Error::Config { line: l, .. }) => assert_eq!(l, line, "{text:?}"),
                other => panic!("{text:?} gave {other:?}"),
            }
        }
    }

    #[test]
    fn semantic_validation() {
        assert!(parse_config("[system]\nP = 40\n").is_err());
        assert!(parse_config("[sweep]\ntrials = 0\n").is_err());
        assert!(parse_config("[detect]\ntol = -1\n").is_err());
    }
}
