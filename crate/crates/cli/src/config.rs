//! JSON configuration files and their merge with inline flags.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use iadof_core::SystemConfig;
use serde::{Deserialize, Serialize};

use crate::Failure;

/// An antenna or stream count given once for every user, or per user.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Counts {
    One(usize),
    Many(Vec<usize>),
}

impl Counts {
    /// Expands to one entry per user. A single value is repeated.
    pub fn expand(&self, users: usize, name: &str) -> Result<Vec<usize>, Failure> {
        match self {
            Counts::One(v) => Ok(vec![*v; users]),
            Counts::Many(v) if v.len() == 1 => Ok(vec![v[0]; users]),
            Counts::Many(v) if v.len() == users => Ok(v.clone()),
            Counts::Many(v) => Err(Failure::usage(format!(
                "{name} has {} entries but K = {users}",
                v.len()
            ))),
        }
    }
}

impl From<Vec<usize>> for Counts {
    fn from(v: Vec<usize>) -> Self {
        Counts::Many(v)
    }
}

/// Configuration file contents. Every key is optional; inline flags win.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    #[serde(rename = "K", default, skip_serializing_if = "Option::is_none")]
    pub users: Option<usize>,
    #[serde(rename = "M", default, skip_serializing_if = "Option::is_none")]
    pub tx: Option<Counts>,
    #[serde(rename = "N", default, skip_serializing_if = "Option::is_none")]
    pub rx: Option<Counts>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub d: Option<Counts>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub snr_grid_db: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trials: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

impl FileConfig {
    pub fn load(path: &Path) -> Result<Self, Failure> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Failure::usage(format!("cannot read {}: {e}", path.display())))?;
        serde_json::from_str(&text)
            .map_err(|e| Failure::usage(format!("invalid config {}: {e}", path.display())))
    }
}

/// A user count or an inclusive range of user counts (`a..b`).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Users {
    pub lo: usize,
    pub hi: usize,
}

impl Users {
    pub fn single(k: usize) -> Self {
        Self { lo: k, hi: k }
    }

    pub fn is_range(&self) -> bool {
        self.lo != self.hi
    }

    pub fn exactly_one(&self) -> Result<usize, Failure> {
        if self.is_range() {
            return Err(Failure::usage("a range of K is only accepted by `bound`"));
        }
        Ok(self.lo)
    }
}

impl FromStr for Users {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let parse = |t: &str| {
            t.trim()
                .parse::<usize>()
                .map_err(|e| format!("invalid K `{t}`: {e}"))
        };
        let users = match s.split_once("..") {
            Some((a, b)) => {
                let b = b.strip_prefix('=').unwrap_or(b);
                Users {
                    lo: parse(a)?,
                    hi: parse(b)?,
                }
            }
            None => Users::single(parse(s)?),
        };
        if users.lo == 0 || users.lo > users.hi {
            return Err(format!("invalid K `{s}`: need 1 <= lo <= hi"));
        }
        Ok(users)
    }
}

impl fmt::Display for Users {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_range() {
            write!(f, "{}..{}", self.lo, self.hi)
        } else {
            write!(f, "{}", self.lo)
        }
    }
}

/// Inline overrides collected from the command line.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub users: Option<Users>,
    pub tx: Option<Vec<usize>>,
    pub rx: Option<Vec<usize>>,
    pub d: Option<Vec<usize>>,
    pub snr_grid_db: Option<Vec<f64>>,
    pub trials: Option<usize>,
    pub seed: Option<u64>,
}

/// Effective parameters after merging the file with inline flags.
#[derive(Debug, Clone, PartialEq)]
pub struct Params {
    pub users: Option<Users>,
    pub tx: Option<Counts>,
    pub rx: Option<Counts>,
    pub d: Option<Counts>,
    pub snr_grid_db: Option<Vec<f64>>,
    pub trials: Option<usize>,
    pub seed: u64,
}

impl Params {
    pub fn merge(file: FileConfig, inline: Overrides) -> Self {
        Self {
            users: inline.users.or(file.users.map(Users::single)),
            tx: inline.tx.map(Counts::from).or(file.tx),
            rx: inline.rx.map(Counts::from).or(file.rx),
            d: inline.d.map(Counts::from).or(file.d),
            snr_grid_db: inline.snr_grid_db.or(file.snr_grid_db),
            trials: inline.trials.or(file.trials),
            seed: inline.seed.or(file.seed).unwrap_or(0),
        }
    }

    pub fn users(&self) -> Result<Users, Failure> {
        self.users
            .ok_or_else(|| Failure::usage("K is required (--K or the config file)"))
    }

    /// Antenna counts for `users` users.
    pub fn antennas(&self, users: usize) -> Result<(Vec<usize>, Vec<usize>), Failure> {
        let tx = self
            .tx
            .as_ref()
            .ok_or_else(|| Failure::usage("M is required"))?;
        let rx = self
            .rx
            .as_ref()
            .ok_or_else(|| Failure::usage("N is required"))?;
        Ok((tx.expand(users, "M")?, rx.expand(users, "N")?))
    }

    pub fn system(&self) -> Result<SystemConfig, Failure> {
        let users = self.users()?.exactly_one()?;
        let (tx, rx) = self.antennas(users)?;
        let d = self
            .d
            .as_ref()
            .ok_or_else(|| Failure::usage("d is required"))?
            .expand(users, "d")?;
        SystemConfig::new(users, tx, rx, d).map_err(|e| Failure::usage(e.to_string()))
    }
}
