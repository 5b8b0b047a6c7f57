use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Duration;

use super::{
    BlendRestorer, DirectoryGroundTruth, IdentityRestorer, OracleRestorer, RemoteRestorer, RestoreError, Restorer,
};

/// Textual backend selection: `identity`, `oracle:DIR`, `blend:BETA:DIR` or
/// `remote:DIR`. Oracle and blend read ground truth from `DIR/<pose_id>.png`.
#[derive(Clone, Debug, PartialEq)]
pub enum RestorerSpec {
    Identity,
    Oracle(PathBuf),
    Blend(f64, PathBuf),
    Remote(PathBuf),
}

impl FromStr for RestorerSpec {
    type Err = RestoreError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || RestoreError::Config(format!("unrecognized restorer `{s}`"));
        let nonempty = |p: &str| if p.is_empty() { Err(bad()) } else { Ok(PathBuf::from(p)) };
        match s.split_once(':') {
            None if s == "identity" => Ok(RestorerSpec::Identity),
            Some(("oracle", path)) => Ok(RestorerSpec::Oracle(nonempty(path)?)),
            Some(("remote", path)) => Ok(RestorerSpec::Remote(nonempty(path)?)),
            Some(("blend", rest)) => {
                let (beta, path) = rest.split_once(':').ok_or_else(bad)?;
                let beta: f64 = beta.parse().map_err(|_| bad())?;
                if !(0.0..=1.0).contains(&beta) {
                    return Err(RestoreError::Config(format!("blend beta {beta} outside [0, 1]")));
                }
                Ok(RestorerSpec::Blend(beta, nonempty(path)?))
            }
            _ => Err(bad()),
        }
    }
}

impl fmt::Display for RestorerSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RestorerSpec::Identity => write!(f, "identity"),
            RestorerSpec::Oracle(p) => write!(f, "oracle:{}", p.display()),
            RestorerSpec::Blend(b, p) => write!(f, "blend:{b}:{}", p.display()),
            RestorerSpec::Remote(p) => write!(f, "remote:{}", p.display()),
        }
    }
}

impl RestorerSpec {
    /// Instantiate the backend; relative paths resolve against `base`.
    pub fn build(&self, base: &Path, poll_interval: Duration, timeout: Duration) -> Result<Box<dyn Restorer>, RestoreError> {
        let resolve = |p: &PathBuf| if p.is_absolute() { p.clone() } else { base.join(p) };
        Ok(match self {
            RestorerSpec::Identity => Box::new(IdentityRestorer),
            RestorerSpec::Oracle(p) => Box::new(OracleRestorer::new(DirectoryGroundTruth { dir: resolve(p) })),
            RestorerSpec::Blend(b, p) => Box::new(BlendRestorer::new(*b, DirectoryGroundTruth { dir: resolve(p) })?),
            RestorerSpec::Remote(p) => Box::new(RemoteRestorer::new(resolve(p)).with_timing(poll_interval, timeout)),
        })
    }
}
