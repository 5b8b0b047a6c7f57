use serde::{Deserialize, Serialize};

use super::{check_shape, ssim_with_grad, OptimError};
use crate::image::Image;

/// PSNR reported when the MSE is below `1e-10`.
pub const PSNR_CAP_DB: f64 = 100.0;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LossWeights {
    pub lambda_l1: f64,
    pub lambda_ssim: f64,
    pub lambda_gen_start: f64,
    pub lambda_gen_end: f64,
    /// Iterations over which λ ramps linearly from start to end.
    pub anneal_span: usize,
}

impl Default for LossWeights {
    fn default() -> Self {
        Self {
            lambda_l1: 0.8,
            lambda_ssim: 0.2,
            lambda_gen_start: 0.0,
            lambda_gen_end: 1.0,
            anneal_span: 250,
        }
    }
}

impl LossWeights {
    pub fn validate(&self) -> Result<(), OptimError> {
        let all = [self.lambda_l1, self.lambda_ssim, self.lambda_gen_start, self.lambda_gen_end];
        if all.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(OptimError::Config("loss weights must be finite and non-negative".into()));
        }
        if self.lambda_gen_start > self.lambda_gen_end {
            return Err(OptimError::Config("lambda_gen_start must not exceed lambda_gen_end".into()));
        }
        Ok(())
    }
}

/// Mean absolute difference over all pixels and channels.
pub fn l1_loss(a: &Image, b: &Image) -> Result<f64, OptimError> {
    check_shape(a, b)?;
    let sum: f64 = a.data.iter().zip(&b.data).map(|(x, y)| (x - y).abs()).sum();
    Ok(sum / a.data.len() as f64)
}

/// L1 loss and its (sub)gradient with respect to `a`; zero where `a == b`.
pub fn l1_loss_with_grad(a: &Image, b: &Image) -> Result<(f64, Image), OptimError> {
    let value = l1_loss(a, b)?;
    let n = a.data.len() as f64;
    let data = a
        .data
        .iter()
        .zip(&b.data)
        .map(|(x, y)| match x.partial_cmp(y) {
            Some(std::cmp::Ordering::Greater) => 1.0 / n,
            Some(std::cmp::Ordering::Less) => -1.0 / n,
            _ => 0.0,
        })
        .collect();
    Ok((value, Image { width: a.width, height: a.height, data }))
}

/// `10·log10(1 / MSE)` on unit range, capped at [`PSNR_CAP_DB`].
pub fn psnr(a: &Image, b: &Image) -> Result<f64, OptimError> {
    check_shape(a, b)?;
    let mse = compensated_sum(a.data.iter().zip(&b.data).map(|(x, y)| (x - y) * (x - y))) / a.data.len() as f64;
    if mse < 1e-10 {
        Ok(PSNR_CAP_DB)
    } else {
        Ok(-10.0 * mse.log10())
    }
}

/// Neumaier summation.
fn compensated_sum(values: impl Iterator<Item = f64>) -> f64 {
    let (mut sum, mut carry) = (0.0f64, 0.0f64);
    for v in values {
        let t = sum + v;
        carry += if sum.abs() >= v.abs() { (sum - t) + v } else { (v - t) + sum };
        sum = t;
    }
    sum + carry
}

/// `λ_l1·L1 + λ_ssim·(1 − SSIM)` and its gradient with respect to `render`.
pub fn photometric_loss(render: &Image, target: &Image, weights: &LossWeights) -> Result<(f64, Image), OptimError> {
    let (l1, mut grad) = l1_loss_with_grad(render, target)?;
    let (s, g_ssim) = ssim_with_grad(render, target)?;
    for (g, gs) in grad.data.iter_mut().zip(&g_ssim.data) {
        *g = weights.lambda_l1 * *g - weights.lambda_ssim * gs;
    }
    Ok((weights.lambda_l1 * l1 + weights.lambda_ssim * (1.0 - s), grad))
}

/// Generative-loss weight at `iter`: linear ramp over `anneal_span`, constant after.
pub fn anneal_lambda(iter: usize, weights: &LossWeights) -> f64 {
    let (a, b) = (weights.lambda_gen_start, weights.lambda_gen_end);
    if weights.anneal_span == 0 || iter >= weights.anneal_span {
        return b;
    }
    let t = iter as f64 / weights.anneal_span as f64;
    a + (b - a) * t
}

#[derive(Clone, Copy, Debug)]
pub struct ImagePair<'a> {
    pub render: &'a Image,
    pub target: &'a Image,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TotalLoss {
    pub value: f64,
    pub recon: f64,
    pub gen: f64,
    pub lambda: f64,
    /// Factor each reference-pair loss enters the total with (`1 / n_ref`).
    pub ref_scale: f64,
    /// Factor each generative-pair loss enters the total with (`λ / n_gen`).
    pub gen_scale: f64,
    /// `∂ total / ∂ render` per reference pair.
    pub ref_grads: Vec<Image>,
    /// `∂ total / ∂ render` per generative pair.
    pub gen_grads: Vec<Image>,
}

fn mean_loss(pairs: &[ImagePair<'_>], weights: &LossWeights, scale: f64) -> Result<(f64, Vec<Image>), OptimError> {
    let mut sum = 0.0;
    let mut grads = Vec::with_capacity(pairs.len());
    for p in pairs {
        let (v, mut g) = photometric_loss(p.render, p.target, weights)?;
        sum += v;
        g.data.iter_mut().for_each(|x| *x *= scale);
        grads.push(g);
    }
    Ok((if pairs.is_empty() { 0.0 } else { sum / pairs.len() as f64 }, grads))
}

/// `ℒ = ℒ_recon + λ(iter)·ℒ_gen`, each term the mean photometric loss over its pairs.
pub fn total_loss(
    reference: &[ImagePair<'_>],
    generative: &[ImagePair<'_>],
    iter: usize,
    weights: &LossWeights,
) -> Result<TotalLoss, OptimError> {
    weights.validate()?;
    let lambda = anneal_lambda(iter, weights);
    let ref_scale = if reference.is_empty() { 0.0 } else { 1.0 / reference.len() as f64 };
    let gen_scale = if generative.is_empty() { 0.0 } else { lambda / generative.len() as f64 };
    let (recon, ref_grads) = mean_loss(reference, weights, ref_scale)?;
    let (gen, gen_grads) = mean_loss(generative, weights, gen_scale)?;
    let value = if generative.is_empty() { recon } else { recon + lambda * gen };
    Ok(TotalLoss {
        value,
        recon,
        gen,
        lambda,
        ref_scale,
        gen_scale,
        ref_grads,
        gen_grads,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::optim::ssim;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_image(rng: &mut ChaCha8Rng, w: usize, h: usize) -> Image {
        Image::from_data(w, h, (0..3 * w * h).map(|_| rng.random_range(0.0..1.0)).collect()).unwrap()
    }

    #[test]
    fn l1_trivial_cases() {
        let z = Image::filled(4, 3, [0.0; 3]);
        let o = Image::filled(4, 3, [1.0; 3]);
        assert_eq!(l1_loss(&z, &z).unwrap(), 0.0);
        assert_eq!(l1_loss(&z, &o).unwrap(), 1.0);
    }

    #[test]
    fn l1_matches_elementwise_sum() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let a = random_image(&mut rng, 6, 5);
        let b = random_image(&mut rng, 6, 5);
        let mut want = 0.0;
        for i in 0..a.data.len() {
            want += (a.data[i] - b.data[i]).abs();
        }
        want /= 90.0;
        assert!((l1_loss(&a, &b).unwrap() - want).abs() < 1e-9);
    }

    #[test]
    fn psnr_cases() {
        let a = Image::filled(10, 10, [0.5; 3]);
        let b = Image::filled(10, 10, [0.6; 3]);
        // MSE = 0.01 up to the rounding of 0.6 - 0.5.
        let mse = (0.6f64 - 0.5).powi(2);
        assert!((psnr(&a, &b).unwrap() - 10.0 * (1.0 / mse).log10()).abs() < 1e-12);
        assert_eq!(psnr(&a, &a).unwrap(), PSNR_CAP_DB);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let (x, y) = (random_image(&mut rng, 7, 7), random_image(&mut rng, 7, 7));
        let mse: f64 = x.data.iter().zip(&y.data).map(|(p, q)| (p - q).powi(2)).sum::<f64>() / 147.0;
        assert!((psnr(&x, &y).unwrap() + 10.0 * mse.log10()).abs() < 1e-9);
    }

    #[test]
    fn psnr_is_exactly_twenty_db_at_mse_one_hundredth() {
        for (w, h) in [(1, 1), (8, 8), (33, 17), (64, 64), (256, 200)] {
            let p = psnr(&Image::filled(w, h, [0.0; 3]), &Image::filled(w, h, [0.1; 3])).unwrap();
            assert_eq!(p, 20.0, "{w}x{h}");
        }
    }

    #[test]
    fn anneal_endpoints_midpoint_and_saturation() {
        let w = LossWeights { lambda_gen_start: 0.2, lambda_gen_end: 0.8, anneal_span: 100, ..Default::default() };
        assert_eq!(anneal_lambda(0, &w), 0.2);
        assert_eq!(anneal_lambda(100, &w), 0.8);
        assert!((anneal_lambda(50, &w) - 0.5).abs() < 1e-12);
        assert_eq!(anneal_lambda(10_000, &w), 0.8);
    }

    #[test]
    fn total_loss_cases() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let (r1, t1) = (random_image(&mut rng, 12, 12), random_image(&mut rng, 12, 12));
        let (r2, t2) = (random_image(&mut rng, 12, 12), random_image(&mut rng, 12, 12));
        let w = LossWeights { anneal_span: 10, ..Default::default() };
        let refs = [ImagePair { render: &r1, target: &t1 }];
        let only = total_loss(&refs, &[], 3, &w).unwrap();
        assert_eq!(only.value, only.recon);

        let perfect = [ImagePair { render: &r1, target: &r1 }];
        let zero = total_loss(&perfect, &[ImagePair { render: &r2, target: &r2 }], 5, &w).unwrap();
        assert!(zero.value.abs() < 1e-9);

        let gens = [ImagePair { render: &r2, target: &t2 }];
        let got = total_loss(&refs, &gens, 5, &w).unwrap();
        let hand = |a: &Image, b: &Image| 0.8 * l1_loss(a, b).unwrap() + 0.2 * (1.0 - ssim(a, b).unwrap());
        let want = hand(&r1, &t1) + 0.5 * hand(&r2, &t2);
        assert!((got.lambda - 0.5).abs() < 1e-12);
        assert!((got.value - want).abs() < 1e-9);
    }

    #[test]
    fn total_loss_gradient_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let r = random_image(&mut rng, 8, 8);
        let t = random_image(&mut rng, 8, 8);
        let g = random_image(&mut rng, 8, 8);
        let gt = random_image(&mut rng, 8, 8);
        let w = LossWeights { anneal_span: 4, ..Default::default() };
        let eval = |r: &Image, g: &Image| {
            total_loss(&[ImagePair { render: r, target: &t }], &[ImagePair { render: g, target: &gt }], 2, &w)
                .unwrap()
        };
        let base = eval(&r, &g);
        let h = 1e-7;
        for i in [0, 17, 100, 191] {
            let (mut p, mut m) = (g.clone(), g.clone());
            p.data[i] += h;
            m.data[i] -= h;
            let fd = (eval(&r, &p).value - eval(&r, &m).value) / (2.0 * h);
            assert!((fd - base.gen_grads[0].data[i]).abs() < 1e-6);
        }
    }

    #[test]
    fn weights_are_validated() {
        let w = LossWeights { lambda_gen_start: 2.0, lambda_gen_end: 1.0, ..Default::default() };
        assert!(w.validate().is_err());
        let w = LossWeights { lambda_l1: -0.1, ..Default::default() };
        assert!(w.validate().is_err());
    }
}
