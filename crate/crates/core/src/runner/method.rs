use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Feature space of a nearest-prototype classifier.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum NmcVariant {
    Base,
    Norm,
    Rp,
    RpNorm,
    Hyp,
    HypNorm,
    Pca,
    PcaNorm,
    Lda,
}

impl NmcVariant {
    pub const ALL: [NmcVariant; 9] = [
        NmcVariant::Base,
        NmcVariant::Norm,
        NmcVariant::Rp,
        NmcVariant::RpNorm,
        NmcVariant::Hyp,
        NmcVariant::HypNorm,
        NmcVariant::Pca,
        NmcVariant::PcaNorm,
        NmcVariant::Lda,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            NmcVariant::Base => "base",
            NmcVariant::Norm => "norm",
            NmcVariant::Rp => "rp",
            NmcVariant::RpNorm => "rp_norm",
            NmcVariant::Hyp => "hyp",
            NmcVariant::HypNorm => "hyp_norm",
            NmcVariant::Pca => "pca",
            NmcVariant::PcaNorm => "pca_norm",
            NmcVariant::Lda => "lda",
        }
    }

    /// Whether embeddings are l2-normalized before the variant's map.
    pub fn normalizes(self) -> bool {
        matches!(self, NmcVariant::Norm | NmcVariant::RpNorm | NmcVariant::HypNorm | NmcVariant::PcaNorm)
    }
}

/// A runnable pipeline: `mlp`, `nmc:<variant>`, `single` or `joint`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum Method {
    Mlp,
    Nmc(NmcVariant),
    Single,
    Joint,
}

impl Method {
    pub fn is_reference(self) -> bool {
        matches!(self, Method::Single | Method::Joint)
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Method::Mlp => f.write_str("mlp"),
            Method::Nmc(v) => write!(f, "nmc:{}", v.as_str()),
            Method::Single => f.write_str("single"),
            Method::Joint => f.write_str("joint"),
        }
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mlp" => return Ok(Method::Mlp),
            "single" => return Ok(Method::Single),
            "joint" => return Ok(Method::Joint),
            _ => {}
        }
        if let Some(v) = s.strip_prefix("nmc:") {
            if let Some(variant) = NmcVariant::ALL.into_iter().find(|x| x.as_str() == v) {
                return Ok(Method::Nmc(variant));
            }
        }
        Err(Error::Config(format!(
            "unknown method '{s}' (expected mlp, single, joint or nmc:<base|norm|rp|rp_norm|hyp|hyp_norm|pca|pca_norm|lda>)"
        )))
    }
}

impl TryFrom<String> for Method {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<Method> for String {
    fn from(m: Method) -> Self {
        m.to_string()
    }
}
