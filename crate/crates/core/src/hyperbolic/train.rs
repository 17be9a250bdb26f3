use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::ball::{clip_to_ball, distance_unchecked, BallPoint, ATANH_CLAMP, BALL_EPS};
use super::projection::{hyp_project, hyp_prototype, HypProjParams};
use crate::dataio::DatasetView;
use crate::error::{Error, Result};
use crate::mlp::{adam_step, AdamState};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HypTrainConfig {
    pub epochs: usize,
    pub lr: f64,
    pub batch_size: usize,
    pub seed: u64,
    /// Before training, rescale `A` so the median tangent norm `|A z|` over
    /// the training set equals this value. `None` keeps `A` as given.
    pub init_tangent_norm: Option<f64>,
}

impl Default for HypTrainConfig {
    fn default() -> Self {
        Self { epochs: 30, lr: 0.001, batch_size: 200, seed: 0, init_tangent_norm: Some(1.0) }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct HypHistory {
    /// Mean minibatch loss per epoch.
    pub train_loss: Vec<f64>,
    /// Loss on the validation view against the epoch's prototypes.
    pub val_loss: Vec<Option<f64>>,
}

/// Forward state of one projected sample, kept for backprop.
struct Projected {
    z: DVector<f64>,
    v: DVector<f64>,
    x: Vec<f64>,
    clipped: bool,
}

fn project(params: &HypProjParams, z: &[f64]) -> Result<Projected> {
    let z = params.prepare(z)?;
    let v = &params.a * &z;
    let c = params.curvature;
    let r = v.norm();
    let (mut x, clipped) = if r == 0.0 {
        (vec![0.0; v.len()], false)
    } else {
        let sc = c.sqrt() * r;
        let t = sc.tanh();
        if t > 1.0 - BALL_EPS {
            let radius = (1.0 - BALL_EPS) / c.sqrt();
            (v.iter().map(|e| e * radius / r).collect(), true)
        } else {
            (v.iter().map(|e| e * t / sc).collect(), false)
        }
    };
    clip_to_ball(&mut x, c);
    Ok(Projected { z, v, x, clipped })
}

/// d/dx of the Poincaré distance to a fixed `mu`, from the equivalent
/// closed form `arcosh(1 + 2c|x-mu|^2 / ((1-c|x|^2)(1-c|mu|^2))) / sqrt(c)`.
fn distance_grad_x(x: &[f64], mu: &[f64], c: f64) -> Option<Vec<f64>> {
    let diff: Vec<f64> = x.iter().zip(mu).map(|(a, b)| a - b).collect();
    let a2: f64 = diff.iter().map(|d| d * d).sum();
    let alpha = 1.0 - c * x.iter().map(|v| v * v).sum::<f64>();
    let beta = 1.0 - c * mu.iter().map(|v| v * v).sum::<f64>();
    let u = 1.0 + 2.0 * c * a2 / (alpha * beta);
    if u - 1.0 <= 1e-15 {
        return None;
    }
    let coef = 4.0 * c / (alpha * beta) / (c.sqrt() * (u * u - 1.0).sqrt());
    let k = c * a2 / alpha;
    Some(diff.iter().zip(x).map(|(d, xi)| coef * (d + k * xi)).collect())
}

/// Pulls a gradient w.r.t. the ball point back to the tangent vector `v`.
fn exp_map_backward(p: &Projected, gx: &[f64], c: f64) -> DVector<f64> {
    let gx = DVector::from_column_slice(gx);
    let r = p.v.norm();
    if r == 0.0 {
        return gx;
    }
    let vg = p.v.dot(&gx);
    if p.clipped {
        let radius = (1.0 - BALL_EPS) / c.sqrt();
        return (gx - &p.v * (vg / (r * r))) * (radius / r);
    }
    let sc = c.sqrt() * r;
    let t = sc.tanh();
    let (s, ds_over_r) = if sc < 1e-4 {
        let sc2 = sc * sc;
        (1.0 - sc2 / 3.0, c * (-2.0 / 3.0 + 8.0 * sc2 / 15.0))
    } else {
        (t / sc, (1.0 - t * t) / (r * r) - t / (c.sqrt() * r * r * r))
    };
    gx * s + &p.v * (ds_over_r * vg)
}

/// Mean prototype cross-entropy over `batch` with logits
/// `-d(project(z), mu_c) / temperature`, and its gradient w.r.t. `A`
/// (column-major, same layout as `params.a`). Prototypes are held fixed.
pub fn prototype_loss_and_grad(
    params: &HypProjParams,
    batch: &[(&[f64], usize)],
    prototypes: &[BallPoint],
) -> Result<(f64, DMatrix<f64>)> {
    if batch.is_empty() {
        return Err(Error::Argument("empty batch".into()));
    }
    let c = params.curvature;
    for mu in prototypes {
        if mu.curvature() != c {
            return Err(Error::Config("prototype curvature differs from the projection's".into()));
        }
        if mu.dim() != params.ball_dim() {
            return Err(Error::dim(params.ball_dim(), mu.dim()));
        }
    }
    let inv_b = 1.0 / batch.len() as f64;
    let mut grad = DMatrix::zeros(params.a.nrows(), params.a.ncols());
    let mut loss = 0.0;
    for &(z, label) in batch {
        if label >= prototypes.len() {
            return Err(Error::Label { label, num_classes: prototypes.len() });
        }
        let p = project(params, z)?;
        let mut clamped = Vec::with_capacity(prototypes.len());
        let logits: Vec<f64> = prototypes
            .iter()
            .map(|mu| {
                let d = distance_unchecked(&p.x, mu.coords(), c);
                clamped.push(d >= 2.0 / c.sqrt() * ATANH_CLAMP.atanh());
                -d / params.temperature
            })
            .collect();
        let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let exps: Vec<f64> = logits.iter().map(|l| (l - max).exp()).collect();
        let sum: f64 = exps.iter().sum();
        loss += sum.ln() + max - logits[label];

        let mut gx = vec![0.0; p.x.len()];
        for (k, mu) in prototypes.iter().enumerate() {
            let prob = exps[k] / sum;
            let dl_dd = -(prob - if k == label { 1.0 } else { 0.0 }) / params.temperature;
            if dl_dd == 0.0 || clamped[k] {
                continue;
            }
            if let Some(g) = distance_grad_x(&p.x, mu.coords(), c) {
                gx.iter_mut().zip(g).for_each(|(a, b)| *a += dl_dd * b);
            }
        }
        let gv = exp_map_backward(&p, &gx, c);
        grad.ger(inv_b, &gv, &p.z, 1.0);
    }
    Ok((loss * inv_b, grad))
}

/// Loss only; see [`prototype_loss_and_grad`].
pub fn prototype_loss(params: &HypProjParams, batch: &[(&[f64], usize)], prototypes: &[BallPoint]) -> Result<f64> {
    Ok(prototype_loss_and_grad(params, batch, prototypes)?.0)
}

/// Tangent-mean prototypes of every class in `samples`, in ascending class order.
pub fn class_prototypes(params: &HypProjParams, samples: &[(Vec<f64>, usize)]) -> Result<BTreeMap<usize, BallPoint>> {
    let mut grouped: BTreeMap<usize, Vec<BallPoint>> = BTreeMap::new();
    for (z, label) in samples {
        grouped.entry(*label).or_default().push(hyp_project(params, z)?);
    }
    grouped.into_iter().map(|(c, pts)| Ok((c, hyp_prototype(&pts)?))).collect()
}

fn to_local(samples: &[(Vec<f64>, usize)], classes: &[usize]) -> Vec<(Vec<f64>, usize)> {
    samples
        .iter()
        .filter_map(|(z, y)| classes.iter().position(|c| c == y).map(|i| (z.clone(), i)))
        .collect()
}

fn view_samples(view: &DatasetView<'_>) -> Vec<(Vec<f64>, usize)> {
    view.iter().map(|r| (r.embedding.iter().map(|&x| f64::from(x)).collect(), r.label)).collect()
}

fn median(mut xs: Vec<f64>) -> f64 {
    xs.sort_by(f64::total_cmp);
    let n = xs.len();
    if n % 2 == 1 {
        xs[n / 2]
    } else {
        0.5 * (xs[n / 2 - 1] + xs[n / 2])
    }
}

/// Fits `A` with Adam on the prototype cross-entropy. Prototypes are
/// recomputed from the current projection at the start of every epoch and
/// held fixed within it.
pub fn train_hyp_projection(
    mut params: HypProjParams,
    train: &DatasetView<'_>,
    val: &DatasetView<'_>,
    cfg: &HypTrainConfig,
) -> Result<(HypProjParams, HypHistory)> {
    params.validate()?;
    if train.is_empty() {
        return Err(Error::Data("empty training view for the hyperbolic projection".into()));
    }
    if cfg.batch_size == 0 || !(cfg.lr > 0.0) {
        return Err(Error::Config("hyperbolic training needs batch_size >= 1 and lr > 0".into()));
    }
    let train_samples = view_samples(train);
    let val_samples = view_samples(val);

    if let Some(target) = cfg.init_tangent_norm {
        let norms = train_samples
            .iter()
            .map(|(z, _)| Ok((&params.a * params.prepare(z)?).norm()))
            .collect::<Result<Vec<f64>>>()?;
        let m = median(norms);
        if m > 0.0 {
            params.a *= target / m;
        }
    }

    let mut adam = AdamState::new(params.a.len(), cfg.lr);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut history = HypHistory::default();
    let mut order: Vec<usize> = (0..train_samples.len()).collect();

    for epoch in 1..=cfg.epochs {
        let protos = class_prototypes(&params, &train_samples)?;
        let classes: Vec<usize> = protos.keys().copied().collect();
        let proto_list: Vec<BallPoint> = protos.into_values().collect();
        let local = to_local(&train_samples, &classes);

        order.shuffle(&mut rng);
        let mut loss_sum = 0.0;
        for chunk in order.chunks(cfg.batch_size) {
            let batch: Vec<(&[f64], usize)> = chunk.iter().map(|&i| (local[i].0.as_slice(), local[i].1)).collect();
            let (loss, grad) = prototype_loss_and_grad(&params, &batch, &proto_list)?;
            loss_sum += loss * chunk.len() as f64;
            adam_step(params.a.as_mut_slice(), grad.as_slice(), &mut adam)?;
        }
        let train_loss = loss_sum / local.len() as f64;
        if !train_loss.is_finite() {
            return Err(Error::Numerical(format!("hyperbolic projection loss diverged at epoch {epoch}")));
        }
        history.train_loss.push(train_loss);

        let val_local = to_local(&val_samples, &classes);
        let val_loss = if val_local.is_empty() {
            None
        } else {
            let batch: Vec<(&[f64], usize)> = val_local.iter().map(|(z, y)| (z.as_slice(), *y)).collect();
            Some(prototype_loss(&params, &batch, &proto_list)?)
        };
        history.val_loss.push(val_loss);
    }
    Ok((params, history))
}
