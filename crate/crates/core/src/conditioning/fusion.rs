use ndarray::{Array1, Array2, ArrayView2, Axis};
use rand::Rng;
use rand_distr::{Distribution, Normal};

use super::{ConditioningError, TokenMatrix, FUSION_DIM, GEOMETRIC_DIM, SEMANTIC_DIM};

pub const LAYER_NORM_EPS: f64 = 1e-5;

/// Linear projections of geometric and semantic tokens into the fusion space,
/// each followed by its own layer normalization.
#[derive(Clone, Debug)]
pub struct FusionProjector {
    w3d: Array2<f64>,
    b3d: Array1<f64>,
    w2d: Array2<f64>,
    b2d: Array1<f64>,
    norm3d: (Array1<f64>, Array1<f64>),
    norm2d: (Array1<f64>, Array1<f64>),
}

impl FusionProjector {
    /// Seeded random init: weights `N(0, 1/fan_in)`, zero biases, unit norm
    /// scales and zero norm shifts.
    pub fn random(rng: &mut impl Rng) -> Self {
        let mut dense = |rows: usize| {
            let dist = Normal::new(0.0, (1.0 / rows as f64).sqrt()).unwrap();
            Array2::from_shape_simple_fn((rows, FUSION_DIM), || dist.sample(rng))
        };
        let w3d = dense(GEOMETRIC_DIM);
        let w2d = dense(SEMANTIC_DIM);
        let identity_norm = || (Array1::ones(FUSION_DIM), Array1::zeros(FUSION_DIM));
        Self {
            w3d,
            b3d: Array1::zeros(FUSION_DIM),
            w2d,
            b2d: Array1::zeros(FUSION_DIM),
            norm3d: identity_norm(),
            norm2d: identity_norm(),
        }
    }

    /// Assemble from explicit parameters; every shape must match the dimension contract.
    #[allow(clippy::too_many_arguments)]
    pub fn from_parts(
        w3d: Array2<f64>,
        b3d: Array1<f64>,
        w2d: Array2<f64>,
        b2d: Array1<f64>,
        norm3d: (Array1<f64>, Array1<f64>),
        norm2d: (Array1<f64>, Array1<f64>),
    ) -> Result<Self, ConditioningError> {
        let proj = Self { w3d, b3d, w2d, b2d, norm3d, norm2d };
        proj.validate()?;
        Ok(proj)
    }

    pub fn validate(&self) -> Result<(), ConditioningError> {
        expect_matrix("w3d", self.w3d.dim(), (GEOMETRIC_DIM, FUSION_DIM))?;
        expect_matrix("w2d", self.w2d.dim(), (SEMANTIC_DIM, FUSION_DIM))?;
        for (name, v) in [
            ("b3d", &self.b3d),
            ("b2d", &self.b2d),
            ("norm3d scale", &self.norm3d.0),
            ("norm3d shift", &self.norm3d.1),
            ("norm2d scale", &self.norm2d.0),
            ("norm2d shift", &self.norm2d.1),
        ] {
            if v.len() != FUSION_DIM {
                return Err(ConditioningError::Shape(format!(
                    "{name} has length {}, expected {FUSION_DIM}",
                    v.len()
                )));
            }
        }
        Ok(())
    }

    pub fn norm3d_mut(&mut self) -> (&mut Array1<f64>, &mut Array1<f64>) {
        (&mut self.norm3d.0, &mut self.norm3d.1)
    }

    pub fn norm2d_mut(&mut self) -> (&mut Array1<f64>, &mut Array1<f64>) {
        (&mut self.norm2d.0, &mut self.norm2d.1)
    }

    pub fn norm3d(&self) -> (&Array1<f64>, &Array1<f64>) {
        (&self.norm3d.0, &self.norm3d.1)
    }

    pub fn norm2d(&self) -> (&Array1<f64>, &Array1<f64>) {
        (&self.norm2d.0, &self.norm2d.1)
    }

    /// Projected and normalized geometric branch, `L × 3072`.
    pub fn branch3d(&self, t3d: &TokenMatrix) -> Result<Array2<f64>, ConditioningError> {
        expect_cols("t3d", t3d, GEOMETRIC_DIM)?;
        let z = t3d.view().dot(&self.w3d) + &self.b3d;
        Ok(layer_normalize(z.view(), &self.norm3d.0, &self.norm3d.1))
    }

    /// Projected and normalized semantic branch, `L × 3072`.
    pub fn branch2d(&self, t2d: &TokenMatrix) -> Result<Array2<f64>, ConditioningError> {
        expect_cols("t2d", t2d, SEMANTIC_DIM)?;
        let z = t2d.view().dot(&self.w2d) + &self.b2d;
        Ok(layer_normalize(z.view(), &self.norm2d.0, &self.norm2d.1))
    }
}

/// Per-row normalization over the feature axis with biased variance.
pub fn layer_normalize(x: ArrayView2<'_, f64>, scale: &Array1<f64>, shift: &Array1<f64>) -> Array2<f64> {
    let mut out = x.to_owned();
    for mut row in out.axis_iter_mut(Axis(0)) {
        let n = row.len() as f64;
        let mean = row.sum() / n;
        let var = row.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
        let inv = 1.0 / (var + LAYER_NORM_EPS).sqrt();
        for ((v, g), b) in row.iter_mut().zip(scale).zip(shift) {
            *v = (*v - mean) * inv * g + b;
        }
    }
    out
}

/// Fuse geometric (`L × 2048`) and semantic (`L × 1024`) tokens into `L × 3072`.
pub fn project_and_fuse(
    t3d: &TokenMatrix,
    t2d: &TokenMatrix,
    proj: &FusionProjector,
) -> Result<TokenMatrix, ConditioningError> {
    if t3d.rows() != t2d.rows() {
        return Err(ConditioningError::Shape(format!(
            "token counts differ: t3d has {} rows, t2d has {}",
            t3d.rows(),
            t2d.rows()
        )));
    }
    let fused = proj.branch3d(t3d)? + proj.branch2d(t2d)?;
    TokenMatrix::new(fused)
}

fn expect_cols(name: &str, t: &TokenMatrix, cols: usize) -> Result<(), ConditioningError> {
    if t.cols() != cols {
        return Err(ConditioningError::Shape(format!(
            "{name} has {} features, expected {cols}",
            t.cols()
        )));
    }
    Ok(())
}

fn expect_matrix(name: &str, got: (usize, usize), want: (usize, usize)) -> Result<(), ConditioningError> {
    if got != want {
        return Err(ConditioningError::Shape(format!(
            "{name} is {}x{}, expected {}x{}",
            got.0, got.1, want.0, want.1
        )));
    }
    Ok(())
}
