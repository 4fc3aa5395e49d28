//! Run configuration: inline flags, a flat `key = value` config file, or a
//! preset, resolved into an exact-rational model and an anchor state.
//!
//! ```text
//! # comments start with '#'
//! model.r = 2
//! model.s = 1
//! model.k = 1, 1, 1
//! model.w = 0.5, -1, 1/3
//! model.wq.1.3 = 0.25      # 1-based mode indices, either order
//! model.g = 1
//! sector.occ = 0, 0, 1
//! ```

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use multiboson::models::{default_occupations, preset, PresetId};
use multiboson::scalar::int;
use multiboson::{ModelSpec, Rational};
use num_bigint::BigInt;
use num_traits::{One, Pow, Zero};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("{field}: {message}")]
    Field { field: String, message: String },
    #[error("{path}: {message}")]
    File { path: String, message: String },
}

impl ConfigError {
    pub fn field(field: impl Into<String>, message: impl Into<String>) -> Self {
        ConfigError::Field { field: field.into(), message: message.into() }
    }
}

type Result<T> = std::result::Result<T, ConfigError>;

/// Parses `-1.25`, `3e-2`, `7/3` or an integer into an exact rational.
pub fn parse_rational(text: &str) -> Option<Rational> {
    let t = text.trim();
    if t.contains('/') {
        return Rational::from_str(t).ok().filter(|q| !q.denom().is_zero());
    }
    let (mantissa, exp) = match t.find(['e', 'E']) {
        Some(i) => (&t[..i], t[i + 1..].parse::<i32>().ok()?),
        None => (t, 0),
    };
    let (sign, digits) = match mantissa.strip_prefix('-') {
        Some(rest) => (-1, rest),
        None => (1, mantissa.strip_prefix('+').unwrap_or(mantissa)),
    };
    let (int_part, frac_part) = digits.split_once('.').unwrap_or((digits, ""));
    if int_part.is_empty() && frac_part.is_empty() {
        return None;
    }
    if !int_part.chars().chain(frac_part.chars()).all(|c| c.is_ascii_digit()) {
        return None;
    }
    let numer = BigInt::from_str(&format!("{int_part}{frac_part}")).ok()?;
    let scale = exp - frac_part.len() as i32;
    let ten = Rational::from_integer(BigInt::from(10));
    let factor: Rational = if scale >= 0 { Pow::pow(ten, scale as u32) } else { Pow::pow(ten, -scale as u32).recip() };
    Some(Rational::from_integer(numer) * factor * int(sign))
}

fn split_list(text: &str) -> Vec<&str> {
    let t = text.trim().trim_start_matches('[').trim_end_matches(']');
    if t.trim().is_empty() {
        return Vec::new();
    }
    t.split(',').map(str::trim).collect()
}

pub fn parse_rational_list(field: &str, text: &str) -> Result<Vec<Rational>> {
    split_list(text)
        .into_iter()
        .map(|v| parse_rational(v).ok_or_else(|| ConfigError::field(field, format!("'{v}' is not a number"))))
        .collect()
}

pub fn parse_uint_list<T: FromStr>(field: &str, text: &str) -> Result<Vec<T>> {
    split_list(text)
        .into_iter()
        .map(|v| v.parse().map_err(|_| ConfigError::field(field, format!("'{v}' is not a nonnegative integer"))))
        .collect()
}

/// Quadratic couplings: `zero`, or the upper triangle row-major.
#[derive(Clone, Debug, PartialEq)]
pub enum WqSpec {
    Zero,
    Upper(Vec<Rational>),
}

impl WqSpec {
    pub fn parse(field: &str, text: &str) -> Result<Self> {
        if text.trim().eq_ignore_ascii_case("zero") {
            Ok(WqSpec::Zero)
        } else {
            parse_rational_list(field, text).map(WqSpec::Upper)
        }
    }
}

/// Model and sector flags as given on the command line.
#[derive(Clone, Debug, Default)]
pub struct ModelArgs {
    pub config: Option<String>,
    pub preset: Option<String>,
    pub r: Option<usize>,
    pub s: Option<usize>,
    pub k: Option<String>,
    pub w: Option<String>,
    pub wq: Option<String>,
    pub g: Option<String>,
    pub occ: Option<String>,
}

/// Flat dotted-key file contents, keys in file order of last assignment.
#[derive(Clone, Debug, Default)]
pub struct ConfigFile {
    entries: BTreeMap<String, String>,
}

impl ConfigFile {
    pub fn parse(path: &str, text: &str) -> Result<Self> {
        let mut entries = BTreeMap::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(ConfigError::File {
                    path: path.to_string(),
                    message: format!("line {}: expected 'key = value'", lineno + 1),
                });
            };
            entries.insert(key.trim().to_string(), value.trim().to_string());
        }
        Ok(ConfigFile { entries })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| ConfigError::File {
            path: path.display().to_string(),
            message: e.to_string(),
        })?;
        Self::parse(&path.display().to_string(), &text)
    }

    fn get(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(String::as_str)
    }
}

/// A resolved model with its anchor state.
#[derive(Clone, Debug)]
pub struct Resolved {
    pub model: ModelSpec<Rational>,
    pub occupations: Vec<u64>,
    pub preset: Option<PresetId>,
}

fn parse_usize(field: &str, text: &str) -> Result<usize> {
    text.trim().parse().map_err(|_| ConfigError::field(field, format!("'{}' is not a positive integer", text.trim())))
}

/// Parses a 1-based `model.wq.i.j` key into 0-based indices.
fn wq_key(key: &str) -> Option<Result<(usize, usize)>> {
    let rest = key.strip_prefix("model.wq.")?;
    let parsed = rest.split_once('.').and_then(|(i, j)| Some((i.parse::<usize>().ok()?, j.parse::<usize>().ok()?)));
    Some(match parsed {
        Some((i, j)) if i >= 1 && j >= 1 => Ok((i - 1, j - 1)),
        _ => Err(ConfigError::field(key, "expected model.wq.<i>.<j> with 1-based mode indices")),
    })
}

impl ModelArgs {
    /// Resolves flags over file values. The model structure `(r, s, k)` must
    /// come from exactly one source: a preset, a config file, or inline
    /// `--r/--s/--k`.
    pub fn resolve(&self) -> Result<Resolved> {
        let file = match &self.config {
            Some(p) => Some(ConfigFile::load(Path::new(p))?),
            None => None,
        };
        let lookup = |flag: &Option<String>, key: &str| -> Option<(String, String)> {
            match flag {
                Some(v) => Some((key.to_string(), v.clone())),
                None => file.as_ref().and_then(|f| f.get(key)).map(|v| (key.to_string(), v.to_string())),
            }
        };

        let file_preset = file.as_ref().and_then(|f| f.get("model.preset"));
        let file_structure = file.as_ref().is_some_and(|f| ["model.r", "model.s", "model.k"].iter().any(|k| f.get(k).is_some()));
        let inline_structure = self.r.is_some() || self.s.is_some() || self.k.is_some();
        if file_preset.is_some() && file_structure {
            return Err(ConfigError::field("model.preset", "conflicts with model.r/model.s/model.k in the same file"));
        }
        let sources = [self.preset.is_some(), file_preset.is_some() || file_structure, inline_structure];
        match sources.iter().filter(|&&b| b).count() {
            0 => return Err(ConfigError::field("model", "no model given: use --preset, --config or --r/--s/--k")),
            1 => {}
            _ => {
                return Err(ConfigError::field(
                    "model",
                    "model structure given by more than one of preset, config file and inline --r/--s/--k",
                ))
            }
        }

        let preset_id = match self.preset.as_deref().or(file_preset) {
            Some(p) => Some(PresetId::from_str(p).map_err(|_| ConfigError::field("model.preset", format!("unknown preset '{p}' (expected A, B or C)")))?),
            None => None,
        };

        let (r, s, k) = match preset_id {
            Some(id) => (id.r(), id.s(), id.k()),
            None => {
                let r = lookup(&self.r.map(|v| v.to_string()), "model.r").ok_or_else(|| ConfigError::field("model.r", "missing"))?;
                let s = lookup(&self.s.map(|v| v.to_string()), "model.s").ok_or_else(|| ConfigError::field("model.s", "missing"))?;
                let k = lookup(&self.k, "model.k").ok_or_else(|| ConfigError::field("model.k", "missing"))?;
                let r = parse_usize(&r.0, &r.1)?;
                let s = parse_usize(&s.0, &s.1)?;
                if r == 0 {
                    return Err(ConfigError::field("model.r", "must be at least 1"));
                }
                if s == 0 {
                    return Err(ConfigError::field("model.s", "must be at least 1"));
                }
                let k: Vec<u32> = parse_uint_list(&k.0, &k.1)?;
                if k.len() != r + s {
                    return Err(ConfigError::field("model.k", format!("has {} entries, expected r+s = {}", k.len(), r + s)));
                }
                if k.contains(&0) {
                    return Err(ConfigError::field("model.k", "every power must be at least 1"));
                }
                (r, s, k)
            }
        };
        let modes = r + s;

        let w = match lookup(&self.w, "model.w") {
            Some((key, v)) => {
                let w = parse_rational_list(&key, &v)?;
                if w.len() != modes {
                    return Err(ConfigError::field("model.w", format!("has {} entries, expected {modes}", w.len())));
                }
                w
            }
            None => vec![Rational::zero(); modes],
        };

        let tri = modes * (modes + 1) / 2;
        let mut wq = match lookup(&self.wq, "model.wq") {
            Some((key, v)) => match WqSpec::parse(&key, &v)? {
                WqSpec::Zero => vec![Rational::zero(); tri],
                WqSpec::Upper(vals) if vals.len() == tri => vals,
                WqSpec::Upper(vals) => {
                    return Err(ConfigError::field(
                        "model.wq",
                        format!("has {} entries, expected {tri} (upper triangle) or 'zero'", vals.len()),
                    ))
                }
            },
            None => vec![Rational::zero(); tri],
        };
        // Individual file entries apply unless the whole matrix came inline.
        if let (Some(f), None) = (&file, &self.wq) {
            for (key, value) in &f.entries {
                let Some(idx) = wq_key(key) else { continue };
                let (i, j) = idx?;
                if i >= modes || j >= modes {
                    return Err(ConfigError::field(key.as_str(), format!("mode index out of range 1..={modes}")));
                }
                let (i, j) = if i <= j { (i, j) } else { (j, i) };
                let v = parse_rational(value).ok_or_else(|| ConfigError::field(key.as_str(), format!("'{value}' is not a number")))?;
                wq[i * modes - i * (i + 1) / 2 + j] = v;
            }
        }

        let g = match lookup(&self.g, "model.g") {
            Some((key, v)) => parse_rational(&v).ok_or_else(|| ConfigError::field(key, format!("'{v}' is not a number")))?,
            None => Rational::one(),
        };

        let model = match preset_id {
            Some(id) => preset(id, w, wq, g),
            None => ModelSpec::new(r, s, k, w, wq, g),
        }
        .map_err(|e| ConfigError::field("model", e.to_string()))?;

        let occupations = match lookup(&self.occ, "sector.occ") {
            Some((key, v)) => {
                let occ: Vec<u64> = parse_uint_list(&key, &v)?;
                if occ.len() != modes {
                    return Err(ConfigError::field("sector.occ", format!("has {} entries, expected r+s = {modes}", occ.len())));
                }
                occ
            }
            None => match preset_id {
                Some(id) => default_occupations(id),
                None => return Err(ConfigError::field("sector.occ", "missing")),
            },
        };
        Ok(Resolved { model, occupations, preset: preset_id })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use multiboson::rational;

    #[test]
    fn decimals_are_exact() {
        assert_eq!(parse_rational("0.1"), Some(rational(1, 10)));
        assert_eq!(parse_rational("-2.5e-1"), Some(rational(-1, 4)));
        assert_eq!(parse_rational("7/3"), Some(rational(7, 3)));
        assert_eq!(parse_rational("+3"), Some(int(3)));
        assert_eq!(parse_rational(".5"), Some(rational(1, 2)));
        assert_eq!(parse_rational("1e3"), Some(int(1000)));
        assert_eq!(parse_rational("abc"), None);
        assert_eq!(parse_rational("1/0"), None);
        assert_eq!(parse_rational("."), None);
    }

    #[test]
    fn flags_override_file() {
        let dir = std::env::temp_dir().join(format!("multiboson-cfg-{}", std::process::id()));
        fs::create_dir_all(&dir).unwrap();
        let path = dir.join("model.cfg");
        fs::write(&path, "model.r = 2\nmodel.s = 1\nmodel.k = 1,1,1\nmodel.w = 1,2,3 # linear\nmodel.wq.3.1 = 0.5\nmodel.g = 2\nsector.occ = 0,0,1\n").unwrap();
        let args = ModelArgs { config: Some(path.display().to_string()), g: Some("0.25".into()), ..Default::default() };
        let res = args.resolve().unwrap();
        assert_eq!(res.model.g(), &rational(1, 4));
        assert_eq!(res.model.w(), &[int(1), int(2), int(3)]);
        assert_eq!(res.model.wq(0, 2), &rational(1, 2));
        assert_eq!(res.occupations, vec![0, 0, 1]);
        fs::remove_dir_all(&dir).unwrap();
    }

    #[test]
    fn errors_name_the_field() {
        let bad_w = ModelArgs { preset: Some("A".into()), w: Some("1,2".into()), ..Default::default() };
        assert!(bad_w.resolve().unwrap_err().to_string().starts_with("model.w:"));
        let bad_occ = ModelArgs { preset: Some("C".into()), occ: Some("1,x,0,0".into()), ..Default::default() };
        assert!(bad_occ.resolve().unwrap_err().to_string().starts_with("sector.occ:"));
        let two = ModelArgs { preset: Some("A".into()), r: Some(2), ..Default::default() };
        assert!(two.resolve().unwrap_err().to_string().starts_with("model:"));
        let dir = std::env::temp_dir().join(format!("multiboson-cfg2-{}", std::process::id()));
        fs::create_dir_all(&dir).unwrap();
        let path = dir.join("preset.cfg");
        fs::write(&path, "model.preset = C\n").unwrap();
        let two = ModelArgs { config: Some(path.display().to_string()), preset: Some("A".into()), ..Default::default() };
        assert!(two.resolve().unwrap_err().to_string().starts_with("model:"));
        fs::remove_dir_all(&dir).unwrap();
        let bad_preset = ModelArgs { preset: Some("Q".into()), ..Default::default() };
        assert!(bad_preset.resolve().unwrap_err().to_string().starts_with("model.preset:"));
    }

    #[test]
    fn preset_defaults() {
        let res = ModelArgs { preset: Some("b".into()), ..Default::default() }.resolve().unwrap();
        assert_eq!(res.preset, Some(PresetId::B));
        assert_eq!(res.occupations, default_occupations(PresetId::B));
        assert_eq!(res.model.g(), &int(1));
    }
}
