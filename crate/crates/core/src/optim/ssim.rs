use super::{check_shape, OptimError};
use crate::image::Image;

pub const SSIM_WINDOW: usize = 11;
pub const SSIM_SIGMA: f64 = 1.5;
pub const SSIM_C1: f64 = 0.01 * 0.01;
pub const SSIM_C2: f64 = 0.03 * 0.03;

fn kernel() -> [f64; SSIM_WINDOW] {
    let r = (SSIM_WINDOW / 2) as f64;
    let mut k = [0.0; SSIM_WINDOW];
    for (i, v) in k.iter_mut().enumerate() {
        let x = i as f64 - r;
        *v = (-x * x / (2.0 * SSIM_SIGMA * SSIM_SIGMA)).exp();
    }
    let s: f64 = k.iter().sum();
    k.map(|v| v / s)
}

/// Half-sample symmetric reflection (`d c b a | a b c d | d c b a`).
#[inline]
fn fold(i: isize, n: usize) -> usize {
    let n = n as isize;
    let m = i.rem_euclid(2 * n);
    (if m < n { m } else { 2 * n - 1 - m }) as usize
}

/// Separable Gaussian blur of a single-channel plane with reflect padding.
struct Blur {
    w: usize,
    h: usize,
    k: [f64; SSIM_WINDOW],
}

impl Blur {
    fn apply(&self, src: &[f64]) -> Vec<f64> {
        let r = (SSIM_WINDOW / 2) as isize;
        let (w, h) = (self.w, self.h);
        let mut tmp = vec![0.0; w * h];
        for y in 0..h {
            for x in 0..w {
                let mut acc = 0.0;
                for (j, kv) in self.k.iter().enumerate() {
                    acc += kv * src[y * w + fold(x as isize + j as isize - r, w)];
                }
                tmp[y * w + x] = acc;
            }
        }
        let mut out = vec![0.0; w * h];
        for y in 0..h {
            for x in 0..w {
                let mut acc = 0.0;
                for (j, kv) in self.k.iter().enumerate() {
                    acc += kv * tmp[fold(y as isize + j as isize - r, h) * w + x];
                }
                out[y * w + x] = acc;
            }
        }
        out
    }

    /// Adjoint of [`Blur::apply`].
    fn adjoint(&self, g: &[f64]) -> Vec<f64> {
        let r = (SSIM_WINDOW / 2) as isize;
        let (w, h) = (self.w, self.h);
        let mut tmp = vec![0.0; w * h];
        for y in 0..h {
            for x in 0..w {
                let v = g[y * w + x];
                for (j, kv) in self.k.iter().enumerate() {
                    tmp[fold(y as isize + j as isize - r, h) * w + x] += kv * v;
                }
            }
        }
        let mut out = vec![0.0; w * h];
        for y in 0..h {
            for x in 0..w {
                let v = tmp[y * w + x];
                for (j, kv) in self.k.iter().enumerate() {
                    out[y * w + fold(x as isize + j as isize - r, w)] += kv * v;
                }
            }
        }
        out
    }
}

fn channel(img: &Image, ch: usize) -> Vec<f64> {
    img.data.iter().skip(ch).step_by(3).copied().collect()
}

/// Mean SSIM over all pixels and channels: 11×11 Gaussian window (σ = 1.5),
/// `C1 = 0.01²`, `C2 = 0.03²`, reflect padding.
pub fn ssim(a: &Image, b: &Image) -> Result<f64, OptimError> {
    ssim_impl(a, b, false).map(|(v, _)| v)
}

/// SSIM together with its gradient with respect to `a`.
pub fn ssim_with_grad(a: &Image, b: &Image) -> Result<(f64, Image), OptimError> {
    ssim_impl(a, b, true).map(|(v, g)| (v, g.expect("gradient requested")))
}

fn ssim_impl(a: &Image, b: &Image, want_grad: bool) -> Result<(f64, Option<Image>), OptimError> {
    check_shape(a, b)?;
    let (w, h) = (a.width, a.height);
    let n = (w * h) as f64 * 3.0;
    let blur = Blur { w, h, k: kernel() };
    let mut total = 0.0;
    let mut grad = want_grad.then(|| Image::new(w, h));
    for ch in 0..3 {
        let pa = channel(a, ch);
        let pb = channel(b, ch);
        let sq = |x: &[f64], y: &[f64]| x.iter().zip(y).map(|(p, q)| p * q).collect::<Vec<_>>();
        let mu_a = blur.apply(&pa);
        let mu_b = blur.apply(&pb);
        let e_aa = blur.apply(&sq(&pa, &pa));
        let e_bb = blur.apply(&sq(&pb, &pb));
        let e_ab = blur.apply(&sq(&pa, &pb));
        let len = w * h;
        let (mut d_mu, mut d_aa, mut d_ab) = if want_grad {
            (vec![0.0; len], vec![0.0; len], vec![0.0; len])
        } else {
            (Vec::new(), Vec::new(), Vec::new())
        };
        for i in 0..len {
            let (ma, mb) = (mu_a[i], mu_b[i]);
            let var_a = e_aa[i] - ma * ma;
            let var_b = e_bb[i] - mb * mb;
            let cov = e_ab[i] - ma * mb;
            let l1 = 2.0 * ma * mb + SSIM_C1;
            let l2 = ma * ma + mb * mb + SSIM_C1;
            let s1 = 2.0 * cov + SSIM_C2;
            let s2 = var_a + var_b + SSIM_C2;
            let s = (l1 * s1) / (l2 * s2);
            total += s;
            if want_grad {
                let denom = l2 * s2;
                d_mu[i] = ((2.0 * mb * s1 - 2.0 * l1 * mb) / denom - s * (2.0 * ma / l2 - 2.0 * ma / s2)) / n;
                d_aa[i] = -s / s2 / n;
                d_ab[i] = 2.0 * l1 / denom / n;
            }
        }
        if let Some(g) = grad.as_mut() {
            let g_mu = blur.adjoint(&d_mu);
            let g_aa = blur.adjoint(&d_aa);
            let g_ab = blur.adjoint(&d_ab);
            for i in 0..len {
                g.data[3 * i + ch] = g_mu[i] + 2.0 * pa[i] * g_aa[i] + pb[i] * g_ab[i];
            }
        }
    }
    Ok((total / n, grad))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_image(rng: &mut ChaCha8Rng, w: usize, h: usize) -> Image {
        Image::from_data(w, h, (0..3 * w * h).map(|_| rng.random_range(0.0..1.0)).collect()).unwrap()
    }

    #[test]
    fn identical_images_score_one() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let x = random_image(&mut rng, 17, 13);
        assert!((ssim(&x, &x).unwrap() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn constant_images_match_closed_form() {
        let a = Image::filled(16, 16, [0.3; 3]);
        let b = Image::filled(16, 16, [0.7; 3]);
        let want = (2.0 * 0.3 * 0.7 + SSIM_C1) / (0.3f64.powi(2) + 0.7f64.powi(2) + SSIM_C1);
        assert!((ssim(&a, &b).unwrap() - want).abs() < 1e-9);
    }

    #[test]
    fn symmetric_in_arguments() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let a = random_image(&mut rng, 20, 9);
        let b = random_image(&mut rng, 20, 9);
        assert!((ssim(&a, &b).unwrap() - ssim(&b, &a).unwrap()).abs() < 1e-12);
    }

    #[test]
    fn tiny_images_fold_repeatedly() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let a = random_image(&mut rng, 3, 2);
        let v = ssim(&a, &a).unwrap();
        assert!((v - 1.0).abs() < 1e-9);
    }

    #[test]
    fn shape_mismatch_is_an_error() {
        assert!(ssim(&Image::new(4, 4), &Image::new(4, 5)).is_err());
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let a = random_image(&mut rng, 9, 7);
        let b = random_image(&mut rng, 9, 7);
        let (_, g) = ssim_with_grad(&a, &b).unwrap();
        let h = 1e-6;
        for i in 0..a.data.len() {
            let mut p = a.clone();
            let mut m = a.clone();
            p.data[i] += h;
            m.data[i] -= h;
            let fd = (ssim(&p, &b).unwrap() - ssim(&m, &b).unwrap()) / (2.0 * h);
            assert!((fd - g.data[i]).abs() < 1e-8, "{i}: {fd} vs {}", g.data[i]);
        }
    }

    #[test]
    fn blur_adjoint_satisfies_inner_product_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let blur = Blur { w: 7, h: 5, k: kernel() };
        let x: Vec<f64> = (0..35).map(|_| rng.random_range(-1.0..1.0)).collect();
        let y: Vec<f64> = (0..35).map(|_| rng.random_range(-1.0..1.0)).collect();
        let lhs: f64 = blur.apply(&x).iter().zip(&y).map(|(a, b)| a * b).sum();
        let rhs: f64 = x.iter().zip(blur.adjoint(&y)).map(|(a, b)| a * b).sum();
        assert!((lhs - rhs).abs() < 1e-12);
    }
}
