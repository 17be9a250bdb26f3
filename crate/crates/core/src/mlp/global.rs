use std::collections::HashSet;

use nalgebra::DMatrix;

use super::head::MlpHead;
use super::train::argmax_by_class;
use crate::error::{Error, Result};

fn check_disjoint(heads: &[MlpHead]) -> Result<()> {
    if heads.is_empty() {
        return Err(Error::Config("no heads to predict with".into()));
    }
    let mut seen = HashSet::new();
    for head in heads {
        for &c in head.class_ids() {
            if !seen.insert(c) {
                return Err(Error::Config(format!("class {c} is covered by more than one head")));
            }
        }
    }
    Ok(())
}

/// Concatenates every head's softmax output (no renormalization across
/// heads) and returns the global class with the highest probability, ties
/// resolved to the lowest class index.
pub fn predict_global(heads: &[MlpHead], z: &[f64]) -> Result<(usize, Vec<f64>)> {
    check_disjoint(heads)?;
    let mut concat = Vec::new();
    let mut classes = Vec::new();
    for head in heads {
        concat.extend(head.forward(z)?);
        classes.extend_from_slice(head.class_ids());
    }
    let best = argmax_by_class(concat.iter().copied(), &classes);
    Ok((classes[best], concat))
}

/// Batched [`predict_global`] over `d x N` column inputs.
pub fn predict_global_batch(heads: &[MlpHead], inputs: &DMatrix<f64>) -> Result<Vec<usize>> {
    check_disjoint(heads)?;
    let blocks = heads.iter().map(|h| h.forward_batch(inputs)).collect::<Result<Vec<_>>>()?;
    let classes: Vec<usize> = heads.iter().flat_map(|h| h.class_ids().iter().copied()).collect();
    let mut out = Vec::with_capacity(inputs.ncols());
    for j in 0..inputs.ncols() {
        let scores = blocks.iter().flat_map(|b| b.column(j).iter().copied().collect::<Vec<_>>());
        out.push(classes[argmax_by_class(scores, &classes)]);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mlp::HeadShape;

    /// Head whose output is a fixed distribution, via b3 logits.
    fn constant_head(class_ids: Vec<usize>, probs: &[f64]) -> MlpHead {
        let shape = HeadShape { input: 2, hidden1: 1, hidden2: 1, classes: class_ids.len() };
        let mut params = vec![0.0; shape.num_params()];
        let n = params.len();
        for (i, p) in probs.iter().enumerate() {
            params[n - probs.len() + i] = p.ln();
        }
        MlpHead::from_params(shape, class_ids, params).unwrap()
    }

    #[test]
    fn cross_head_argmax() {
        let h1 = constant_head(vec![0, 1], &[0.6, 0.4]);
        let h2 = constant_head(vec![2, 3], &[0.1, 0.9]);
        let (c, concat) = predict_global(&[h1, h2], &[0.0, 0.0]).unwrap();
        assert_eq!(c, 3);
        assert_eq!(concat.len(), 4);
        assert!((concat[..2].iter().sum::<f64>() - 1.0).abs() < 1e-9);
        assert!((concat.iter().sum::<f64>() - 2.0).abs() < 1e-9);
    }

    #[test]
    fn single_head_matches_forward_argmax() {
        let head = MlpHead::init(3, (5, 4), vec![4, 2, 7], 11).unwrap();
        let z = [0.3, -1.2, 2.0];
        let p = head.forward(&z).unwrap();
        let (c, concat) = predict_global(std::slice::from_ref(&head), &z).unwrap();
        assert_eq!(concat, p);
        let best = p.iter().enumerate().max_by(|a, b| a.1.partial_cmp(b.1).unwrap()).unwrap().0;
        assert_eq!(c, head.class_ids()[best]);
    }

    #[test]
    fn ties_go_to_lowest_global_class() {
        let h1 = constant_head(vec![5], &[1.0]);
        let h2 = constant_head(vec![2], &[1.0]);
        assert_eq!(predict_global(&[h1, h2], &[0.0, 0.0]).unwrap().0, 2);
    }

    #[test]
    fn overlapping_heads_rejected() {
        let h1 = constant_head(vec![0, 1], &[0.5, 0.5]);
        let h2 = constant_head(vec![1, 2], &[0.5, 0.5]);
        assert!(matches!(predict_global(&[h1, h2], &[0.0, 0.0]), Err(Error::Config(_))));
        assert!(matches!(predict_global(&[], &[0.0]), Err(Error::Config(_))));
    }
}
