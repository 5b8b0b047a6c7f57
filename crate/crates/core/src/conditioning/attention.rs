use ndarray::{Array2, Axis};
use rand::Rng;
use rand_distr::{Distribution, Normal};

use super::{ConditioningError, TokenMatrix};

/// Query, key, value and output projections of one attention head, each `D × D`.
#[derive(Clone, Debug)]
pub struct AttentionWeights {
    pub wq: Array2<f64>,
    pub wk: Array2<f64>,
    pub wv: Array2<f64>,
    pub wo: Array2<f64>,
}

impl AttentionWeights {
    pub fn random(dim: usize, rng: &mut impl Rng) -> Self {
        let dist = Normal::new(0.0, (1.0 / dim as f64).sqrt()).unwrap();
        let mut dense = || Array2::from_shape_simple_fn((dim, dim), || dist.sample(rng));
        Self { wq: dense(), wk: dense(), wv: dense(), wo: dense() }
    }

    pub fn dim(&self) -> usize {
        self.wq.nrows()
    }

    fn validate(&self) -> Result<(), ConditioningError> {
        let d = self.dim();
        for (name, w) in [("wq", &self.wq), ("wk", &self.wk), ("wv", &self.wv), ("wo", &self.wo)] {
            if w.dim() != (d, d) {
                return Err(ConditioningError::Shape(format!(
                    "{name} is {}x{}, expected {d}x{d}",
                    w.nrows(),
                    w.ncols()
                )));
            }
        }
        Ok(())
    }

    fn check_inputs(&self, t_view: &TokenMatrix, t_fusion: &TokenMatrix) -> Result<(), ConditioningError> {
        self.validate()?;
        let d = self.dim();
        if t_view.cols() != d || t_fusion.cols() != d {
            return Err(ConditioningError::Shape(format!(
                "token widths {} and {} must both equal {d}",
                t_view.cols(),
                t_fusion.cols()
            )));
        }
        if t_fusion.rows() == 0 {
            return Err(ConditioningError::Shape("no fusion tokens".into()));
        }
        Ok(())
    }
}

/// Row-stochastic `N × M` attention of view queries over fusion keys.
pub fn attention_probabilities(
    t_view: &TokenMatrix,
    t_fusion: &TokenMatrix,
    weights: &AttentionWeights,
) -> Result<Array2<f64>, ConditioningError> {
    weights.check_inputs(t_view, t_fusion)?;
    let q = t_view.view().dot(&weights.wq);
    let k = t_fusion.view().dot(&weights.wk);
    let mut logits = q.dot(&k.t()) / (weights.dim() as f64).sqrt();
    for mut row in logits.axis_iter_mut(Axis(0)) {
        let max = row.fold(f64::NEG_INFINITY, |a, &b| a.max(b));
        row.mapv_inplace(|v| (v - max).exp());
        let sum = row.sum();
        row /= sum;
    }
    Ok(logits)
}

/// View tokens updated by attending to fusion tokens (keys and values),
/// returned as `t_view + attention(t_view, t_fusion)`.
pub fn cross_attention(
    t_view: &TokenMatrix,
    t_fusion: &TokenMatrix,
    weights: &AttentionWeights,
) -> Result<TokenMatrix, ConditioningError> {
    let probs = attention_probabilities(t_view, t_fusion, weights)?;
    let values = t_fusion.view().dot(&weights.wv);
    let update = probs.dot(&values).dot(&weights.wo);
    TokenMatrix::new(&t_view.view() + &update)
}
