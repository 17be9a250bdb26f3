use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hyperbolic::{distance_unchecked, hyp_project, hyp_prototype, BallPoint, HypProjParams};
use crate::projections::{l2_normalize, LdaModel, PcaModel, RandomProj};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SpaceKind {
    Identity,
    RandomProjection,
    Pca,
    Lda,
    Hyperbolic,
}

/// Identifies the feature space a prototype bank lives in.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SpaceId {
    pub kind: SpaceKind,
    /// Embeddings are l2-normalized before the space's map.
    pub normalized: bool,
}

impl fmt::Display for SpaceId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let base = match self.kind {
            SpaceKind::Identity if self.normalized => return f.write_str("normalized"),
            SpaceKind::Identity => "identity",
            SpaceKind::RandomProjection => "random_projection",
            SpaceKind::Pca => "pca",
            SpaceKind::Lda => "lda",
            SpaceKind::Hyperbolic => "hyperbolic",
        };
        if self.normalized {
            write!(f, "{base}+norm")
        } else {
            f.write_str(base)
        }
    }
}

/// Map from raw embeddings into a prototype space, with the matching
/// distance and averaging rule.
#[derive(Debug, Clone, PartialEq)]
pub enum FeatureTransform {
    Identity { normalize: bool },
    RandomProjection { proj: RandomProj, normalize: bool },
    Pca { model: PcaModel, normalize: bool },
    Lda { model: LdaModel, normalize: bool },
    /// Normalization is governed by `HypProjParams::normalize_input`.
    Hyperbolic(HypProjParams),
}

impl FeatureTransform {
    pub fn space_id(&self) -> SpaceId {
        let (kind, normalized) = match self {
            FeatureTransform::Identity { normalize } => (SpaceKind::Identity, *normalize),
            FeatureTransform::RandomProjection { normalize, .. } => (SpaceKind::RandomProjection, *normalize),
            FeatureTransform::Pca { normalize, .. } => (SpaceKind::Pca, *normalize),
            FeatureTransform::Lda { normalize, .. } => (SpaceKind::Lda, *normalize),
            FeatureTransform::Hyperbolic(p) => (SpaceKind::Hyperbolic, p.normalize_input),
        };
        SpaceId { kind, normalized }
    }

    fn prepare<'a>(z: &'a [f64], normalize: bool) -> Result<std::borrow::Cow<'a, [f64]>> {
        Ok(if normalize { l2_normalize(z)?.into() } else { z.into() })
    }

    pub fn apply(&self, z: &[f64]) -> Result<Vec<f64>> {
        match self {
            FeatureTransform::Identity { normalize } => Ok(Self::prepare(z, *normalize)?.into_owned()),
            FeatureTransform::RandomProjection { proj, normalize } => proj.apply(&Self::prepare(z, *normalize)?),
            FeatureTransform::Pca { model, normalize } => model.apply(&Self::prepare(z, *normalize)?),
            FeatureTransform::Lda { model, normalize } => model.apply(&Self::prepare(z, *normalize)?),
            FeatureTransform::Hyperbolic(params) => Ok(hyp_project(params, z)?.into_coords()),
        }
    }

    /// The space's map alone, for inputs already in the pre-map space
    /// (normalized when the space normalizes).
    pub fn apply_prepared(&self, z: &[f64]) -> Result<Vec<f64>> {
        match self {
            FeatureTransform::Identity { .. } => Ok(z.to_vec()),
            FeatureTransform::RandomProjection { proj, .. } => proj.apply(z),
            FeatureTransform::Pca { model, .. } => model.apply(z),
            FeatureTransform::Lda { model, .. } => model.apply(z),
            FeatureTransform::Hyperbolic(p) => {
                let raw = HypProjParams { normalize_input: false, ..p.clone() };
                Ok(hyp_project(&raw, z)?.into_coords())
            }
        }
    }

    /// Euclidean distance, or geodesic distance on the ball.
    pub fn distance(&self, a: &[f64], b: &[f64]) -> f64 {
        match self {
            FeatureTransform::Hyperbolic(p) => distance_unchecked(a, b, p.curvature),
            _ => a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt(),
        }
    }

    /// Arithmetic mean, or the tangent-space mean on the ball.
    pub fn prototype(&self, points: &[Vec<f64>]) -> Result<Vec<f64>> {
        let first = points.first().ok_or_else(|| Error::Argument("no points to average".into()))?;
        if let FeatureTransform::Hyperbolic(p) = self {
            let pts = points
                .iter()
                .map(|x| BallPoint::new(x.clone(), p.curvature))
                .collect::<Result<Vec<_>>>()?;
            return Ok(hyp_prototype(&pts)?.into_coords());
        }
        let mut acc = vec![0.0; first.len()];
        for x in points {
            if x.len() != acc.len() {
                return Err(Error::dim(acc.len(), x.len()));
            }
            acc.iter_mut().zip(x).for_each(|(a, v)| *a += v);
        }
        let n = points.len() as f64;
        Ok(acc.into_iter().map(|a| a / n).collect())
    }

    /// The l2-normalization stage applied before the space's map, if any.
    pub fn normalizes_input(&self) -> bool {
        self.space_id().normalized
    }
}
