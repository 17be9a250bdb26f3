//! Class prototypes and nearest-mean classification in a chosen feature space.

mod bank;
mod transform;

pub use bank::{fit_prototypes, nmc_predict, PrototypeBank, PrototypeEntry, PrototypeSet};
pub use transform::{FeatureTransform, SpaceId, SpaceKind};
