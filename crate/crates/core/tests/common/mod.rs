//! Independent oracles and whole-system checks shared by the integration
//! tests and the acceptance target. Nothing here calls into the library's
//! own numerics when computing an expected value.

#![allow(dead_code)]

use std::collections::BTreeMap;
use std::time::{Duration, Instant};

use frozencil::dataio::{generate_synthetic, EmbeddingDataset, EmbeddingRecord, Split, SynthSpec};
use frozencil::hyperbolic::{
    exp_map0, log_map0, mobius_add, poincare_distance, prototype_loss, prototype_loss_and_grad, BallPoint,
    HypProjParams,
};
use frozencil::metrics::{balanced_accuracy, forgetting, AccuracyMatrix};
use frozencil::mlp::MlpHead;
use frozencil::projections::{lda_fit, pca_fit, StreamStats};
use frozencil::prototypes::{fit_prototypes, nmc_predict, FeatureTransform, PrototypeBank};
use frozencil::runner::{
    run_experiment_on, AccessTracker, ExperimentConfig, Method, NmcVariant, ResultsBundle, ScheduleConfig,
};
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

pub type Check = Result<String, String>;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn gauss(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| StandardNormal.sample(rng)).collect()
}

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn within_time(start: Instant, limit: Duration, what: &str) -> Result<(), String> {
    let took = start.elapsed();
    ensure(took < limit, || format!("{what} took {took:?}, limit {limit:?}"))
}

// ---------------------------------------------------------------- data

/// Dataset from explicit `(label, embedding)` rows; every row in `split`.
pub fn dataset_from(dim: usize, rows: Vec<(usize, Vec<f64>)>, split: Split) -> EmbeddingDataset {
    let n_classes = rows.iter().map(|r| r.0).max().map_or(0, |m| m + 1);
    let records = rows
        .into_iter()
        .enumerate()
        .map(|(i, (label, z))| EmbeddingRecord {
            sample_id: i as u64,
            embedding: z.into_iter().map(|v| v as f32).collect(),
            label,
            split,
        })
        .collect();
    let names = (0..n_classes).map(|c| format!("class{c}")).collect();
    EmbeddingDataset::new(dim, names, records).expect("valid dataset")
}

pub fn synthetic(seed: u64) -> EmbeddingDataset {
    generate_synthetic(&SynthSpec { seed, ..SynthSpec::default() }).expect("synthetic dataset")
}

pub fn synthetic_with(n_classes: usize, dim: usize, seed: u64) -> EmbeddingDataset {
    generate_synthetic(&SynthSpec { n_classes, dim, seed, ..SynthSpec::default() }).expect("synthetic dataset")
}

pub fn as_f64(r: &EmbeddingRecord) -> Vec<f64> {
    r.embedding.iter().map(|&v| f64::from(v)).collect()
}

// ------------------------------------------------------------- oracles

/// Cyclic Jacobi eigen-solver for a symmetric matrix. Returns
/// `(eigenvalue, eigenvector)` pairs sorted by descending eigenvalue.
pub fn jacobi_eigen(m: &[Vec<f64>]) -> Vec<(f64, Vec<f64>)> {
    let n = m.len();
    let mut a: Vec<Vec<f64>> = m.to_vec();
    let mut v: Vec<Vec<f64>> = (0..n).map(|i| (0..n).map(|j| f64::from(u8::from(i == j))).collect()).collect();
    for _sweep in 0..100 {
        let off: f64 = (0..n).flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j))).map(|(i, j)| a[i][j] * a[i][j]).sum();
        if off < 1e-30 {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                if a[p][q].abs() < 1e-300 {
                    continue;
                }
                let theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let (akp, akq) = (a[k][p], a[k][q]);
                    a[k][p] = c * akp - s * akq;
                    a[k][q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let (apk, aqk) = (a[p][k], a[q][k]);
                    a[p][k] = c * apk - s * aqk;
                    a[q][k] = s * apk + c * aqk;
                }
                for row in v.iter_mut() {
                    let (vp, vq) = (row[p], row[q]);
                    row[p] = c * vp - s * vq;
                    row[q] = s * vp + c * vq;
                }
            }
        }
    }
    let mut pairs: Vec<(f64, Vec<f64>)> = (0..n).map(|j| (a[j][j], v.iter().map(|row| row[j]).collect())).collect();
    pairs.sort_by(|x, y| y.0.total_cmp(&x.0));
    pairs
}

/// Flips `v` so its largest-magnitude entry is positive.
pub fn sign_fixed(mut v: Vec<f64>) -> Vec<f64> {
    let mut best = 0;
    for i in 1..v.len() {
        if v[i].abs() > v[best].abs() {
            best = i;
        }
    }
    if v[best] < 0.0 {
        v.iter_mut().for_each(|x| *x = -*x);
    }
    v
}

/// Population covariance by the two-pass formula.
pub fn two_pass_covariance(xs: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let d = xs[0].len();
    let n = xs.len() as f64;
    let mut mean = vec![0.0; d];
    for x in xs {
        for j in 0..d {
            mean[j] += x[j];
        }
    }
    mean.iter_mut().for_each(|m| *m /= n);
    let mut cov = vec![vec![0.0; d]; d];
    for x in xs {
        for a in 0..d {
            for b in 0..d {
                cov[a][b] += (x[a] - mean[a]) * (x[b] - mean[b]);
            }
        }
    }
    cov.iter_mut().flatten().for_each(|c| *c /= n);
    cov
}

/// Solves `a x = b` by Gaussian elimination with partial pivoting.
pub fn gauss_solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Vec<f64> {
    let n = b.len();
    for col in 0..n {
        let piv = (col..n).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs())).unwrap();
        a.swap(col, piv);
        b.swap(col, piv);
        for row in col + 1..n {
            let f = a[row][col] / a[col][col];
            for k in col..n {
                a[row][k] -= f * a[col][k];
            }
            b[row] -= f * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for row in (0..n).rev() {
        let s: f64 = (row + 1..n).map(|k| a[row][k] * x[k]).sum();
        x[row] = (b[row] - s) / a[row][row];
    }
    x
}

/// Mean per-class recall, written independently of the library.
pub fn recall_mean(pairs: &[(usize, usize)]) -> f64 {
    let mut per: BTreeMap<usize, (usize, usize)> = BTreeMap::new();
    for &(label, pred) in pairs {
        let e = per.entry(label).or_default();
        e.1 += 1;
        if label == pred {
            e.0 += 1;
        }
    }
    per.values().map(|&(ok, n)| ok as f64 / n as f64).sum::<f64>() / per.len() as f64
}

/// Index of the minimum, first one on ties.
pub fn argmin(xs: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in xs.iter().enumerate() {
        if x < xs[best] {
            best = i;
        }
    }
    best
}

fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb: f64 = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    dot / (na * nb)
}

// --------------------------------------------------------------- checks

/// Max relative error between analytic MLP gradients and central
/// differences over every coordinate of several random heads.
pub fn mlp_gradient_errors(h: f64) -> (usize, f64) {
    let mut coords = 0;
    let mut worst: f64 = 0.0;
    for seed in 0..3 {
        let mut r = rng(100 + seed);
        let mut head = MlpHead::init(6, (5, 4), vec![0, 1, 2], seed).unwrap();
        // nonzero biases so every parameter has a generic gradient
        for p in head.params_mut() {
            *p += 0.1 * r.random_range(-1.0..1.0);
        }
        let inputs: Vec<Vec<f64>> = (0..5).map(|_| gauss(&mut r, 6)).collect();
        let batch: Vec<(&[f64], usize)> = inputs.iter().enumerate().map(|(i, z)| (z.as_slice(), i % 3)).collect();
        let grads = head.loss_and_grad(&batch).unwrap().grads;
        for idx in 0..grads.len() {
            let orig = head.params()[idx];
            head.params_mut()[idx] = orig + h;
            let up = head.loss(&batch).unwrap();
            head.params_mut()[idx] = orig - h;
            let down = head.loss(&batch).unwrap();
            head.params_mut()[idx] = orig;
            let fd = (up - down) / (2.0 * h);
            let rel = (fd - grads[idx]).abs() / fd.abs().max(grads[idx].abs()).max(1e-6);
            worst = worst.max(rel);
            coords += 1;
        }
    }
    (coords, worst)
}

/// Same for the hyperbolic prototype loss w.r.t. `A` (unclipped regime).
pub fn hyp_gradient_errors(h: f64) -> (usize, f64) {
    let mut coords = 0;
    let mut worst: f64 = 0.0;
    for seed in 0..3 {
        let mut r = rng(200 + seed);
        let params = HypProjParams::init(5, 4, 1.0, 0.5, seed % 2 == 1, seed).unwrap();
        let inputs: Vec<Vec<f64>> = (0..8).map(|_| gauss(&mut r, 5)).collect();
        let batch: Vec<(&[f64], usize)> = inputs.iter().enumerate().map(|(i, z)| (z.as_slice(), i % 3)).collect();
        let protos: Vec<BallPoint> =
            (0..3).map(|_| BallPoint::new(gauss(&mut r, 4).iter().map(|v| 0.25 * v).collect(), 1.0).unwrap()).collect();
        let (_, grad) = prototype_loss_and_grad(&params, &batch, &protos).unwrap();
        for idx in 0..params.a.len() {
            let mut plus = params.clone();
            plus.a.as_mut_slice()[idx] += h;
            let mut minus = params.clone();
            minus.a.as_mut_slice()[idx] -= h;
            let fd = (prototype_loss(&plus, &batch, &protos).unwrap() - prototype_loss(&minus, &batch, &protos).unwrap())
                / (2.0 * h);
            let an = grad.as_slice()[idx];
            worst = worst.max((fd - an).abs() / fd.abs().max(an.abs()).max(1e-6));
            coords += 1;
        }
    }
    (coords, worst)
}

pub fn check_gradients() -> Check {
    let start = Instant::now();
    let (n_mlp, e_mlp) = mlp_gradient_errors(1e-5);
    let (n_hyp, e_hyp) = hyp_gradient_errors(1e-5);
    ensure(n_mlp >= 100, || format!("only {n_mlp} MLP coordinates"))?;
    ensure(e_mlp <= 1e-4, || format!("MLP max rel error {e_mlp:e}"))?;
    ensure(e_hyp <= 1e-3, || format!("hyperbolic max rel error {e_hyp:e}"))?;
    within_time(start, Duration::from_secs(30), "gradient checks")?;
    Ok(format!("mlp {n_mlp} coords max rel {e_mlp:.1e}; hyperbolic {n_hyp} coords max rel {e_hyp:.1e}"))
}

/// A random point with `|x| < radius`.
pub fn ball_point(r: &mut ChaCha8Rng, dim: usize, radius: f64) -> BallPoint {
    let dir = gauss(r, dim);
    let n: f64 = dir.iter().map(|v| v * v).sum::<f64>().sqrt();
    let len = radius * r.random_range(0.0..1.0f64);
    BallPoint::new(dir.iter().map(|v| v * len / n).collect(), 1.0).unwrap()
}

pub fn check_geometry() -> Check {
    let start = Instant::now();
    let mut r = rng(7);
    let mut worst_round: f64 = 0.0;
    for _ in 0..1000 {
        let v: Vec<f64> = gauss(&mut r, 4).iter().map(|x| x * 0.8).collect();
        let back = log_map0(&exp_map0(&v, 1.0).unwrap());
        worst_round = worst_round.max(v.iter().zip(&back).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max));
        let x = ball_point(&mut r, 4, 0.95);
        let again = exp_map0(&log_map0(&x), 1.0).unwrap();
        worst_round = worst_round.max(x.coords().iter().zip(again.coords()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max));
    }
    ensure(worst_round <= 1e-9, || format!("exp/log round trip error {worst_round:e}"))?;

    let origin = BallPoint::origin(2, 1.0).unwrap();
    let half = BallPoint::new(vec![0.5, 0.0], 1.0).unwrap();
    let d = poincare_distance(&origin, &half).unwrap();
    ensure((d - 3f64.ln()).abs() <= 1e-9, || format!("d(0,(0.5,0)) = {d}, expected ln 3"))?;

    let mut worst_id: f64 = 0.0;
    let mut worst_inv: f64 = 0.0;
    let mut worst_sym: f64 = 0.0;
    for _ in 0..1000 {
        let x = ball_point(&mut r, 5, 0.99);
        let y = ball_point(&mut r, 5, 0.99);
        let zero = BallPoint::origin(5, 1.0).unwrap();
        let id = mobius_add(&x, &zero).unwrap();
        worst_id = worst_id.max(x.coords().iter().zip(id.coords()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max));
        let inv = mobius_add(&x.neg(), &x).unwrap();
        worst_inv = worst_inv.max(inv.norm());
        let sum = mobius_add(&x, &y).unwrap();
        ensure(sum.norm() < 1.0, || format!("closure violated: |x (+) y| = {}", sum.norm()))?;
        let dxy = poincare_distance(&x, &y).unwrap();
        let dyx = poincare_distance(&y, &x).unwrap();
        worst_sym = worst_sym.max((dxy - dyx).abs());
    }
    ensure(worst_id <= 1e-12, || format!("identity error {worst_id:e}"))?;
    ensure(worst_inv <= 1e-9, || format!("inverse error {worst_inv:e}"))?;
    ensure(worst_sym <= 1e-12, || format!("symmetry error {worst_sym:e}"))?;
    within_time(start, Duration::from_secs(10), "geometry suite")?;
    Ok(format!(
        "round trip {worst_round:.1e}; ln3 err {:.1e}; identity {worst_id:.1e}, inverse {worst_inv:.1e}, symmetry {worst_sym:.1e} over 1000 pairs",
        (d - 3f64.ln()).abs()
    ))
}

/// Random labelled rows: `per_class` samples around a random centre per class.
pub fn random_rows(r: &mut ChaCha8Rng, classes: usize, per_class: usize, dim: usize) -> Vec<(usize, Vec<f64>)> {
    let centres: Vec<Vec<f64>> = (0..classes).map(|_| gauss(r, dim).iter().map(|v| 3.0 * v).collect()).collect();
    let mut rows = Vec::new();
    for _ in 0..per_class {
        for (c, centre) in centres.iter().enumerate() {
            let z = centre.iter().zip(gauss(r, dim)).map(|(m, e)| m + e).collect();
            rows.push((c, z));
        }
    }
    rows
}

/// Returns the worst prototype deviation from an accumulate-then-divide loop.
pub fn prototype_mean_error(seed: u64) -> f64 {
    let mut r = rng(seed);
    let ds = dataset_from(6, random_rows(&mut r, 5, 50, 6), Split::Train);
    let view = ds.view_of(&[0, 1, 2, 3, 4], Split::Train);
    let set = fit_prototypes(&view, &FeatureTransform::Identity { normalize: false }).unwrap();
    let mut sums: BTreeMap<usize, (Vec<f64>, usize)> = BTreeMap::new();
    for rec in ds.records() {
        let e = sums.entry(rec.label).or_insert((vec![0.0; 6], 0));
        for (s, v) in e.0.iter_mut().zip(&rec.embedding) {
            *s += f64::from(*v);
        }
        e.1 += 1;
    }
    let mut worst: f64 = 0.0;
    for entry in &set.entries {
        let (sum, n) = &sums[&entry.class];
        assert_eq!(entry.count, *n as u64);
        for j in 0..6 {
            let expect = sum[j] / *n as f64;
            worst = worst.max((entry.prototype[j] - expect).abs()).max((entry.raw_mean[j] - expect).abs());
        }
    }
    worst
}

/// Number of queries where `nmc_predict` disagrees with a naive distance table.
pub fn nmc_disagreements(seed: u64, normalize: bool) -> usize {
    let mut r = rng(seed);
    let rows = random_rows(&mut r, 5, 10, 4);
    let ds = dataset_from(4, rows, Split::Train);
    let transform = FeatureTransform::Identity { normalize };
    let set = fit_prototypes(&ds.view_of(&[0, 1, 2, 3, 4], Split::Train), &transform).unwrap();
    let mut bank = PrototypeBank::new(transform.space_id());
    bank.add_task(set.clone()).unwrap();
    let unit = |z: &[f64]| -> Vec<f64> {
        let n = z.iter().map(|v| v * v).sum::<f64>().sqrt();
        z.iter().map(|v| v / n).collect()
    };
    let mut wrong = 0;
    for _ in 0..20 {
        let q: Vec<f64> = gauss(&mut r, 4).iter().map(|v| 3.0 * v).collect();
        let qq = if normalize { unit(&q) } else { q.clone() };
        let table: Vec<f64> = set
            .entries
            .iter()
            .map(|e| e.prototype.iter().zip(&qq).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt())
            .collect();
        let expect = set.entries[argmin(&table)].class;
        if nmc_predict(&bank, &transform, &q).unwrap() != expect {
            wrong += 1;
        }
    }
    wrong
}

/// Worst relative deviation of streamed covariance from the two-pass one.
pub fn covariance_error(seed: u64) -> f64 {
    let mut r = rng(seed);
    let d = 8;
    let xs: Vec<Vec<f64>> = (0..1000).map(|_| gauss(&mut r, d).iter().enumerate().map(|(j, v)| 5.0 + (j + 1) as f64 * v).collect()).collect();
    let mut stats = StreamStats::new(d);
    let mut start = 0;
    while start < xs.len() {
        let len = r.random_range(1..=97).min(xs.len() - start);
        let chunk = &xs[start..start + len];
        let m = DMatrix::from_fn(d, len, |i, j| chunk[j][i]);
        stats.update(&m, &vec![0; len]).unwrap();
        start += len;
    }
    let got = stats.covariance().unwrap();
    let want = two_pass_covariance(&xs);
    let scale = want.iter().flatten().fold(0.0f64, |m, v| m.max(v.abs()));
    let mut worst: f64 = 0.0;
    for a in 0..d {
        for b in 0..d {
            worst = worst.max((got[(a, b)] - want[a][b]).abs() / scale);
        }
    }
    worst
}

/// Worst coordinate gap between PCA components and the Jacobi oracle.
pub fn pca_error(seed: u64) -> f64 {
    let mut r = rng(seed);
    let d = 8;
    let k = 3;
    let xs: Vec<Vec<f64>> = (0..200).map(|_| gauss(&mut r, d).iter().enumerate().map(|(j, v)| (d - j) as f64 * v).collect()).collect();
    let mut stats = StreamStats::new(d);
    for x in &xs {
        stats.push(x, 0).unwrap();
    }
    let model = pca_fit(&stats, k).unwrap();
    let oracle = jacobi_eigen(&two_pass_covariance(&xs));
    let mut worst: f64 = 0.0;
    for (i, (lambda, vec)) in oracle.into_iter().take(k).enumerate() {
        let v = sign_fixed(vec);
        for j in 0..d {
            worst = worst.max((model.components[(i, j)] - v[j]).abs());
        }
        worst = worst.max((model.eigenvalues[i] - lambda).abs() / lambda);
    }
    worst
}

/// `1 - |cos|` between the fitted 2-class LDA direction and `S_W^-1 dmu`.
pub fn lda_gap(seed: u64) -> f64 {
    let mut r = rng(seed);
    let d = 5;
    let shift = gauss(&mut r, d);
    let mix: Vec<Vec<f64>> = (0..d).map(|_| gauss(&mut r, d)).collect();
    let sample = |r: &mut ChaCha8Rng, c: usize| -> Vec<f64> {
        let e = gauss(r, d);
        (0..d).map(|i| (0..d).map(|j| mix[i][j] * e[j]).sum::<f64>() + if c == 1 { shift[i] } else { 0.0 }).collect()
    };
    let rows: Vec<(usize, Vec<f64>)> = (0..300).map(|i| (i % 2, sample(&mut r, i % 2))).collect();
    let mut stats = StreamStats::new(d);
    for (c, x) in &rows {
        stats.push(x, *c).unwrap();
    }
    let model = lda_fit(&stats, Some(0.0)).unwrap();
    assert_eq!(model.output_dim(), 1);

    let mut means = vec![vec![0.0; d]; 2];
    let mut counts = [0.0; 2];
    for (c, x) in &rows {
        counts[*c] += 1.0;
        for j in 0..d {
            means[*c][j] += x[j];
        }
    }
    for c in 0..2 {
        means[c].iter_mut().for_each(|m| *m /= counts[c]);
    }
    let mut sw = vec![vec![0.0; d]; d];
    for (c, x) in &rows {
        for a in 0..d {
            for b in 0..d {
                sw[a][b] += (x[a] - means[*c][a]) * (x[b] - means[*c][b]);
            }
        }
    }
    let dmu: Vec<f64> = (0..d).map(|j| means[1][j] - means[0][j]).collect();
    let w = gauss_solve(sw, dmu);
    let got: Vec<f64> = model.directions.row(0).iter().copied().collect();
    1.0 - cosine(&got, &w).abs()
}

/// Config for the synthetic runs; the dataset itself is passed in memory.
pub fn synthetic_config(methods: Vec<Method>, tasks: usize, seeds: Vec<u64>) -> ExperimentConfig {
    let mut config = ExperimentConfig::new("synthetic.embd", ScheduleConfig::contiguous(tasks), methods);
    config.seeds = seeds;
    config
}

pub fn incremental_methods() -> Vec<Method> {
    let mut m = vec![Method::Mlp];
    m.extend(NmcVariant::ALL.iter().map(|&v| Method::Nmc(v)));
    m
}

pub fn all_methods() -> Vec<Method> {
    let mut m = incremental_methods();
    m.extend([Method::Single, Method::Joint]);
    m
}

/// Number of `a_{k,i}` cells checked against a replay of their logs.
pub fn replay_cells() -> Result<usize, String> {
    let ds = synthetic_with(6, 8, 11);
    let mut config = synthetic_config(all_methods(), 3, vec![0]);
    config.dump_predictions = true;
    let bundle = run_experiment_on(&config, &ds, None, None).map_err(|e| e.to_string())?;
    let mut checked = 0;
    for run in &bundle.runs {
        let cells = run.predictions.as_ref().ok_or("predictions were not dumped")?;
        for cell in cells {
            let stored = run.accuracy_matrix.get(cell.k, cell.i).ok_or("logged cell missing from matrix")?;
            let test_classes: Vec<usize> = (2 * (cell.i - 1)..2 * cell.i).collect();
            let expected_ids: Vec<u64> =
                ds.view_of(&test_classes, Split::Test).iter().map(|r| r.sample_id).collect();
            let ids: Vec<u64> = cell.log.iter().map(|p| p.sample_id).collect();
            ensure(ids == expected_ids, || format!("{} cell ({},{}) logs the wrong samples", run.method, cell.k, cell.i))?;
            let pairs: Vec<(usize, usize)> = cell.log.iter().map(|p| (p.label, p.prediction)).collect();
            let replay = recall_mean(&pairs);
            ensure((replay - stored).abs() <= 1e-12, || {
                format!("{} a_({},{}) = {stored} but its log replays to {replay}", run.method, cell.k, cell.i)
            })?;
            checked += 1;
        }
    }
    Ok(checked)
}

pub fn check_oracles() -> Check {
    let start = Instant::now();
    let mut proto: f64 = 0.0;
    let mut nmc = 0;
    let mut cov: f64 = 0.0;
    let mut pca: f64 = 0.0;
    let mut lda: f64 = 0.0;
    for seed in 0..5 {
        proto = proto.max(prototype_mean_error(seed));
        nmc += nmc_disagreements(seed, false) + nmc_disagreements(seed, true);
        cov = cov.max(covariance_error(seed));
        pca = pca.max(pca_error(seed));
        lda = lda.max(lda_gap(seed));
    }
    ensure(proto <= 1e-9, || format!("prototype mean error {proto:e}"))?;
    ensure(nmc == 0, || format!("{nmc} NMC predictions disagree with the distance table"))?;
    ensure(cov <= 1e-7, || format!("streaming covariance relative error {cov:e}"))?;
    ensure(pca <= 1e-5, || format!("PCA component error {pca:e}"))?;
    ensure(lda <= 1e-9, || format!("LDA direction 1-|cos| = {lda:e}"))?;
    let cells = replay_cells()?;
    within_time(start, Duration::from_secs(60), "oracle suite")?;
    Ok(format!(
        "prototype {proto:.1e}; nmc 0/200 disagreements; covariance {cov:.1e}; pca {pca:.1e}; lda 1-|cos| {lda:.1e}; {cells} a_ki cells replayed"
    ))
}

pub fn check_metric_formulas() -> Check {
    let all = balanced_accuracy(&[0, 1, 1, 2], &[0, 1, 1, 2]).map_err(|e| e.to_string())?;
    ensure(all == 1.0, || format!("all-correct BAAC {all}"))?;
    let half = balanced_accuracy(&[0, 0, 1, 0], &[0, 0, 1, 1]).map_err(|e| e.to_string())?;
    ensure(half == 0.75, || format!("recalls 1.0/0.5 give {half}"))?;
    let m = AccuracyMatrix::from_rows(vec![vec![0.9], vec![0.8, 0.95], vec![0.7, 0.85, 0.6]]).map_err(|e| e.to_string())?;
    let f = forgetting(&m).ok_or("F undefined for T=3")?;
    ensure((f - 0.15).abs() <= 1e-12, || format!("worked example F = {f}"))?;
    let constant = AccuracyMatrix::from_rows(vec![vec![0.6], vec![0.6, 0.6], vec![0.6, 0.6, 0.6]]).map_err(|e| e.to_string())?;
    let f0 = forgetting(&constant).ok_or("F undefined")?;
    ensure(f0 == 0.0, || format!("constant matrix F = {f0}"))?;
    Ok(format!("BAAC {all} / {half}; worked F {f:.15}; constant F {f0}"))
}

/// The synthetic experiment every end-to-end check uses: all methods, two
/// tasks, three seeds.
pub fn synthetic_experiment(tracker: Option<&AccessTracker>) -> Result<ResultsBundle, String> {
    let ds = synthetic(0);
    let config = synthetic_config(all_methods(), 2, vec![0, 1, 2]);
    run_experiment_on(&config, &ds, tracker, None).map_err(|e| e.to_string())
}

pub fn check_end_to_end() -> Check {
    let start = Instant::now();
    let bundle = synthetic_experiment(None)?;
    within_time(start, Duration::from_secs(120), "synthetic experiment")?;
    let mut failures = Vec::new();
    let mut summary = Vec::new();
    for method in incremental_methods() {
        let name = method.to_string();
        let runs: Vec<_> = bundle.runs.iter().filter(|r| r.method == name).collect();
        if runs.len() != 3 {
            failures.push(format!("{name}: {} seeds", runs.len()));
            continue;
        }
        let min_baac = runs.iter().map(|r| r.baac).fold(f64::INFINITY, f64::min);
        let max_f = runs.iter().map(|r| r.forgetting.map_or(f64::INFINITY, f64::abs)).fold(0.0, f64::max);
        summary.push(format!("{name} {min_baac:.3}/{max_f:.3}"));
        let floor = match method {
            Method::Mlp | Method::Nmc(NmcVariant::Base) | Method::Nmc(NmcVariant::Norm) => 0.99,
            _ => 0.95,
        };
        if min_baac < floor {
            failures.push(format!("{name} BAAC {min_baac:.4} < {floor}"));
        }
        if matches!(method, Method::Mlp | Method::Nmc(NmcVariant::Base)) && max_f > 0.01 {
            failures.push(format!("{name} |F| {max_f:.4} > 0.01"));
        }
    }
    for run in &bundle.runs {
        if run.frozen_past_verified == Some(false) {
            failures.push(format!("{}@{} frozen-past hash changed", run.method, run.seed));
        }
    }
    if failures.is_empty() {
        Ok(format!("min BAAC/max |F|: {}", summary.join(", ")))
    } else {
        Err(failures.join("; "))
    }
}

pub fn check_no_replay() -> Check {
    let tracker = AccessTracker::new();
    synthetic_experiment(Some(&tracker))?;
    let events = tracker.events();
    ensure(!events.is_empty(), || "tracker saw no data requests".into())?;
    let bad = tracker.prior_task_train_reads();
    ensure(bad.is_empty(), || format!("{} prior-task train reads, first {:?}", bad.len(), bad[0]))?;
    let refused = events.iter().filter(|e| !e.granted).count();
    ensure(refused == 0, || format!("{refused} refused requests"))?;
    Ok(format!("{} tracked requests, 0 prior-task train reads", events.len()))
}

pub fn check_determinism() -> Check {
    let a = synthetic_experiment(None)?.to_json();
    let b = synthetic_experiment(None)?.to_json();
    ensure(a == b, || "report JSON differs between runs".into())?;
    Ok(format!("{} identical bytes", a.len()))
}
