use std::collections::HashSet;

use nalgebra::{DMatrix, DMatrixView, DVectorView};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

/// Layer sizes of a head: input, two hidden widths, output classes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct HeadShape {
    pub input: usize,
    pub hidden1: usize,
    pub hidden2: usize,
    pub classes: usize,
}

impl HeadShape {
    fn blocks(&self) -> [(usize, usize); 6] {
        let HeadShape { input, hidden1, hidden2, classes } = *self;
        [(hidden1, input), (hidden1, 1), (hidden2, hidden1), (hidden2, 1), (classes, hidden2), (classes, 1)]
    }

    /// Offsets of W1, b1, W2, b2, W3, b3 in the flat parameter vector,
    /// plus the total length.
    fn offsets(&self) -> ([usize; 6], usize) {
        let mut offs = [0; 6];
        let mut at = 0;
        for (i, (r, c)) in self.blocks().into_iter().enumerate() {
            offs[i] = at;
            at += r * c;
        }
        (offs, at)
    }

    pub fn num_params(&self) -> usize {
        self.offsets().1
    }
}

/// One task's classifier: two ReLU hidden layers and a softmax output over
/// the task's classes.
///
/// Parameters live in one flat `Vec<f64>` (W1, b1, W2, b2, W3, b3, matrices
/// column-major) so the optimizer and gradient checks can address them by
/// coordinate.
#[derive(Debug, Clone, PartialEq)]
pub struct MlpHead {
    shape: HeadShape,
    class_ids: Vec<usize>,
    params: Vec<f64>,
}

/// Mean cross-entropy and its gradient, laid out like [`MlpHead::params`].
#[derive(Debug, Clone)]
pub struct LossGrad {
    pub loss: f64,
    pub grads: Vec<f64>,
}

struct Activations {
    a1: DMatrix<f64>,
    h1: DMatrix<f64>,
    a2: DMatrix<f64>,
    h2: DMatrix<f64>,
    probs: DMatrix<f64>,
}

fn relu(m: &DMatrix<f64>) -> DMatrix<f64> {
    m.map(|x| x.max(0.0))
}

fn add_bias(m: &mut DMatrix<f64>, b: DVectorView<'_, f64>) {
    for mut col in m.column_iter_mut() {
        col += &b;
    }
}

/// Column-wise softmax with max subtraction.
fn softmax_columns(logits: &mut DMatrix<f64>) {
    for mut col in logits.column_iter_mut() {
        let max = col.max();
        col.apply(|x| *x = (*x - max).exp());
        let sum = col.sum();
        col /= sum;
    }
}

fn check_unique(class_ids: &[usize]) -> Result<()> {
    let mut seen = HashSet::new();
    if let Some(c) = class_ids.iter().find(|c| !seen.insert(**c)) {
        return Err(Error::Config(format!("class {c} listed twice in one head")));
    }
    Ok(())
}

impl MlpHead {
    /// Kaiming-normal weights (variance 2/fan_in), zero biases.
    pub fn init(input: usize, hidden: (usize, usize), class_ids: Vec<usize>, seed: u64) -> Result<Self> {
        if class_ids.is_empty() {
            return Err(Error::Config("a head needs at least one class".into()));
        }
        if input == 0 || hidden.0 == 0 || hidden.1 == 0 {
            return Err(Error::Config("head dimensions must be positive".into()));
        }
        check_unique(&class_ids)?;
        let shape = HeadShape { input, hidden1: hidden.0, hidden2: hidden.1, classes: class_ids.len() };
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut params = Vec::with_capacity(shape.num_params());
        for (i, (rows, cols)) in shape.blocks().into_iter().enumerate() {
            if i % 2 == 1 {
                params.extend(std::iter::repeat_n(0.0, rows));
                continue;
            }
            let normal = Normal::new(0.0, (2.0 / cols as f64).sqrt()).expect("positive std");
            params.extend((0..rows * cols).map(|_| normal.sample(&mut rng)));
        }
        Ok(Self { shape, class_ids, params })
    }

    /// Builds a head from explicit parameters (flat layout of [`MlpHead::params`]).
    pub fn from_params(shape: HeadShape, class_ids: Vec<usize>, params: Vec<f64>) -> Result<Self> {
        if class_ids.len() != shape.classes || class_ids.is_empty() {
            return Err(Error::dim(shape.classes, class_ids.len()));
        }
        check_unique(&class_ids)?;
        if params.len() != shape.num_params() {
            return Err(Error::dim(shape.num_params(), params.len()));
        }
        Ok(Self { shape, class_ids, params })
    }

    /// A head whose parameters are all zero.
    pub fn zeros(input: usize, hidden: (usize, usize), class_ids: Vec<usize>) -> Result<Self> {
        let shape = HeadShape { input, hidden1: hidden.0, hidden2: hidden.1, classes: class_ids.len() };
        Self::from_params(shape, class_ids, vec![0.0; shape.num_params()])
    }

    pub fn shape(&self) -> HeadShape {
        self.shape
    }

    pub fn input_dim(&self) -> usize {
        self.shape.input
    }

    pub fn class_ids(&self) -> &[usize] {
        &self.class_ids
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    fn block(&self, i: usize) -> DMatrixView<'_, f64> {
        let (offs, _) = self.shape.offsets();
        let (r, c) = self.shape.blocks()[i];
        DMatrixView::from_slice(&self.params[offs[i]..offs[i] + r * c], r, c)
    }

    fn bias(&self, i: usize) -> DVectorView<'_, f64> {
        let (offs, _) = self.shape.offsets();
        let r = self.shape.blocks()[i].0;
        DVectorView::from_slice(&self.params[offs[i]..offs[i] + r], r)
    }

    pub fn w1(&self) -> DMatrixView<'_, f64> {
        self.block(0)
    }
    pub fn b1(&self) -> DVectorView<'_, f64> {
        self.bias(1)
    }
    pub fn w2(&self) -> DMatrixView<'_, f64> {
        self.block(2)
    }
    pub fn b2(&self) -> DVectorView<'_, f64> {
        self.bias(3)
    }
    pub fn w3(&self) -> DMatrixView<'_, f64> {
        self.block(4)
    }
    pub fn b3(&self) -> DVectorView<'_, f64> {
        self.bias(5)
    }

    fn activations(&self, inputs: &DMatrix<f64>) -> Activations {
        let mut a1 = self.w1() * inputs;
        add_bias(&mut a1, self.b1());
        let h1 = relu(&a1);
        let mut a2 = self.w2() * &h1;
        add_bias(&mut a2, self.b2());
        let h2 = relu(&a2);
        let mut probs = self.w3() * &h2;
        add_bias(&mut probs, self.b3());
        softmax_columns(&mut probs);
        Activations { a1, h1, a2, h2, probs }
    }

    /// Class probabilities for a `d x B` matrix of column inputs; result is `k x B`.
    pub fn forward_batch(&self, inputs: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        if inputs.nrows() != self.shape.input {
            return Err(Error::dim(self.shape.input, inputs.nrows()));
        }
        Ok(self.activations(inputs).probs)
    }

    /// Softmax output for one embedding.
    pub fn forward(&self, z: &[f64]) -> Result<Vec<f64>> {
        if z.len() != self.shape.input {
            return Err(Error::dim(self.shape.input, z.len()));
        }
        let input = DMatrix::from_column_slice(z.len(), 1, z);
        Ok(self.activations(&input).probs.as_slice().to_vec())
    }

    /// Mean cross-entropy over a batch of (embedding, local label) pairs and
    /// its exact backpropagated gradient.
    pub fn loss_and_grad(&self, batch: &[(&[f64], usize)]) -> Result<LossGrad> {
        if batch.is_empty() {
            return Err(Error::Argument("empty batch".into()));
        }
        let d = self.shape.input;
        let mut inputs = DMatrix::zeros(d, batch.len());
        let mut labels = Vec::with_capacity(batch.len());
        for (j, (z, y)) in batch.iter().enumerate() {
            if z.len() != d {
                return Err(Error::dim(d, z.len()));
            }
            if *y >= self.shape.classes {
                return Err(Error::Label { label: *y, num_classes: self.shape.classes });
            }
            inputs.column_mut(j).copy_from_slice(z);
            labels.push(*y);
        }
        Ok(self.loss_and_grad_matrix(&inputs, &labels))
    }

    /// As [`MlpHead::loss_and_grad`], with inputs already packed as `d x B`
    /// columns. Callers guarantee shapes and label bounds.
    pub(crate) fn loss_and_grad_matrix(&self, inputs: &DMatrix<f64>, labels: &[usize]) -> LossGrad {
        let batch = labels.len() as f64;
        let act = self.activations(inputs);

        // log p computed from probabilities would underflow; recompute stably
        let mut logits = self.w3() * &act.h2;
        add_bias(&mut logits, self.b3());
        let mut loss = 0.0;
        for (j, &y) in labels.iter().enumerate() {
            let col = logits.column(j);
            let max = col.max();
            let lse = col.iter().map(|l| (l - max).exp()).sum::<f64>().ln() + max;
            loss += lse - col[y];
        }
        loss /= batch;

        let mut g3 = act.probs;
        for (j, &y) in labels.iter().enumerate() {
            g3[(y, j)] -= 1.0;
        }
        g3 /= batch;

        let dw3 = &g3 * act.h2.transpose();
        let db3 = g3.column_sum();
        let mut da2 = self.w3().transpose() * &g3;
        da2.zip_apply(&act.a2, |g, a| {
            if a <= 0.0 {
                *g = 0.0
            }
        });
        let dw2 = &da2 * act.h1.transpose();
        let db2 = da2.column_sum();
        let mut da1 = self.w2().transpose() * &da2;
        da1.zip_apply(&act.a1, |g, a| {
            if a <= 0.0 {
                *g = 0.0
            }
        });
        let dw1 = &da1 * inputs.transpose();
        let db1 = da1.column_sum();

        let mut grads = Vec::with_capacity(self.params.len());
        for block in [dw1.as_slice(), db1.as_slice(), dw2.as_slice(), db2.as_slice(), dw3.as_slice(), db3.as_slice()] {
            grads.extend_from_slice(block);
        }
        LossGrad { loss, grads }
    }

    /// Mean cross-entropy only.
    pub fn loss(&self, batch: &[(&[f64], usize)]) -> Result<f64> {
        Ok(self.loss_and_grad(batch)?.loss)
    }

    /// SHA-256 over the shape, class ids and parameter bits.
    pub fn digest(&self) -> [u8; 32] {
        let mut h = Sha256::new();
        let s = self.shape;
        for v in [s.input, s.hidden1, s.hidden2, s.classes] {
            h.update((v as u64).to_le_bytes());
        }
        for &c in &self.class_ids {
            h.update((c as u64).to_le_bytes());
        }
        for p in &self.params {
            h.update(p.to_bits().to_le_bytes());
        }
        h.finalize().into()
    }
}
