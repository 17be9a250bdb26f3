use std::collections::BTreeMap;

use sha2::{Digest, Sha256};

use super::transform::{FeatureTransform, SpaceId};
use crate::dataio::DatasetView;
use crate::error::{Error, Result};

/// One class's aggregate: its prototype in the bank's space, sample count
/// and mean raw embedding.
#[derive(Debug, Clone, PartialEq)]
pub struct PrototypeEntry {
    pub class: usize,
    pub prototype: Vec<f64>,
    pub count: u64,
    pub raw_mean: Vec<f64>,
}

/// Prototypes fitted from one task, tagged with their space.
#[derive(Debug, Clone, PartialEq)]
pub struct PrototypeSet {
    pub space: SpaceId,
    pub entries: Vec<PrototypeEntry>,
}

/// Averages `transform(z)` per class over `view` (transform applied per
/// sample, before averaging). Entries come out in ascending class order.
pub fn fit_prototypes(view: &DatasetView<'_>, transform: &FeatureTransform) -> Result<PrototypeSet> {
    if view.is_empty() {
        return Err(Error::Data("no samples to fit prototypes from".into()));
    }
    let mut grouped: BTreeMap<usize, (Vec<Vec<f64>>, Vec<f64>)> = BTreeMap::new();
    for rec in view.iter() {
        let z: Vec<f64> = rec.embedding.iter().map(|&x| f64::from(x)).collect();
        let feature = transform.apply(&z)?;
        let (features, raw_sum) = grouped.entry(rec.label).or_insert_with(|| (Vec::new(), vec![0.0; z.len()]));
        features.push(feature);
        raw_sum.iter_mut().zip(&z).for_each(|(a, b)| *a += b);
    }
    let entries = grouped
        .into_iter()
        .map(|(class, (features, raw_sum))| {
            let n = features.len();
            Ok(PrototypeEntry {
                class,
                prototype: transform.prototype(&features)?,
                count: n as u64,
                raw_mean: raw_sum.into_iter().map(|s| s / n as f64).collect(),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(PrototypeSet { space: transform.space_id(), entries })
}

/// Memory bank of per-class prototypes accumulated over tasks. Holds only
/// aggregates, never samples.
#[derive(Debug, Clone, PartialEq)]
pub struct PrototypeBank {
    space: SpaceId,
    entries: BTreeMap<usize, PrototypeEntry>,
}

impl PrototypeBank {
    pub fn new(space: SpaceId) -> Self {
        Self { space, entries: BTreeMap::new() }
    }

    pub fn space(&self) -> SpaceId {
        self.space
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, class: usize) -> Option<&PrototypeEntry> {
        self.entries.get(&class)
    }

    /// Entries in ascending class order.
    pub fn entries(&self) -> impl Iterator<Item = &PrototypeEntry> {
        self.entries.values()
    }

    pub fn classes(&self) -> Vec<usize> {
        self.entries.keys().copied().collect()
    }

    fn prototype_dim(&self) -> Option<usize> {
        self.entries.values().next().map(|e| e.prototype.len())
    }

    /// Adds a task's prototypes. Nothing is modified unless every check passes.
    pub fn add_task(&mut self, set: PrototypeSet) -> Result<()> {
        if set.space != self.space {
            return Err(Error::Config(format!("bank lives in {} but prototypes are in {}", self.space, set.space)));
        }
        let mut dim = self.prototype_dim();
        let mut incoming = std::collections::BTreeSet::new();
        for e in &set.entries {
            if self.entries.contains_key(&e.class) || !incoming.insert(e.class) {
                return Err(Error::Conflict(format!("class {} already has a prototype", e.class)));
            }
            if e.count == 0 {
                return Err(Error::Data(format!("class {} has a zero sample count", e.class)));
            }
            match dim {
                Some(d) if d != e.prototype.len() => return Err(Error::dim(d, e.prototype.len())),
                _ => dim = Some(e.prototype.len()),
            }
        }
        for e in set.entries {
            self.entries.insert(e.class, e);
        }
        Ok(())
    }

    /// Replaces every prototype with `f(entry)`; counts and raw means stay.
    /// Used when a refit linear map re-projects stored aggregates.
    pub fn reproject(&mut self, mut f: impl FnMut(&PrototypeEntry) -> Result<Vec<f64>>) -> Result<()> {
        let updated = self.entries.values().map(&mut f).collect::<Result<Vec<_>>>()?;
        for (e, p) in self.entries.values_mut().zip(updated) {
            e.prototype = p;
        }
        Ok(())
    }

    /// Class of the prototype nearest to an already-transformed feature.
    /// Ties go to the lowest class index.
    pub fn nearest(&self, transform: &FeatureTransform, feature: &[f64]) -> Result<usize> {
        let mut best: Option<(f64, usize)> = None;
        for (&class, e) in &self.entries {
            if e.prototype.len() != feature.len() {
                return Err(Error::dim(e.prototype.len(), feature.len()));
            }
            let d = transform.distance(feature, &e.prototype);
            // strict < keeps the earlier (lower) class on ties
            if best.is_none_or(|(bd, _)| d < bd) {
                best = Some((d, class));
            }
        }
        best.map(|(_, c)| c).ok_or_else(|| Error::State("prototype bank is empty".into()))
    }

    /// SHA-256 over the entries of `classes` (prototype, count, raw mean bits).
    pub fn digest(&self, classes: &[usize]) -> [u8; 32] {
        let mut h = Sha256::new();
        for c in classes {
            h.update((*c as u64).to_le_bytes());
            if let Some(e) = self.entries.get(c) {
                h.update(e.count.to_le_bytes());
                for v in e.prototype.iter().chain(&e.raw_mean) {
                    h.update(v.to_bits().to_le_bytes());
                }
            }
        }
        h.finalize().into()
    }

    /// Like [`PrototypeBank::digest`] but over counts and raw means only.
    pub fn aggregate_digest(&self, classes: &[usize]) -> [u8; 32] {
        let mut h = Sha256::new();
        for c in classes {
            h.update((*c as u64).to_le_bytes());
            if let Some(e) = self.entries.get(c) {
                h.update(e.count.to_le_bytes());
                for v in &e.raw_mean {
                    h.update(v.to_bits().to_le_bytes());
                }
            }
        }
        h.finalize().into()
    }
}

/// Nearest-prototype class of `z` over every class in the bank.
pub fn nmc_predict(bank: &PrototypeBank, transform: &FeatureTransform, z: &[f64]) -> Result<usize> {
    if transform.space_id() != bank.space() {
        return Err(Error::Config(format!(
            "transform space {} does not match bank space {}",
            transform.space_id(),
            bank.space()
        )));
    }
    if bank.is_empty() {
        return Err(Error::State("prototype bank is empty".into()));
    }
    let feature = transform.apply(z)?;
    bank.nearest(transform, &feature)
}
