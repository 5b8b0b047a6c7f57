use nalgebra::Matrix3;

use super::SceneError;

/// Rotation matrix of a unit quaternion `(w, x, y, z)`.
pub fn rotation_matrix(q: [f64; 4]) -> Matrix3<f64> {
    let [w, x, y, z] = q;
    Matrix3::new(
        1.0 - 2.0 * (y * y + z * z),
        2.0 * (x * y - w * z),
        2.0 * (x * z + w * y),
        2.0 * (x * y + w * z),
        1.0 - 2.0 * (x * x + z * z),
        2.0 * (y * z - w * x),
        2.0 * (x * z - w * y),
        2.0 * (y * z + w * x),
        1.0 - 2.0 * (x * x + y * y),
    )
}

pub(crate) fn normalized(raw: [f64; 4]) -> Result<([f64; 4], f64), SceneError> {
    let n = raw.iter().map(|v| v * v).sum::<f64>().sqrt();
    if !(n > 1e-12) {
        return Err(SceneError::InvalidPrimitive(format!(
            "degenerate rotation quaternion (norm {n:e})"
        )));
    }
    Ok((raw.map(|v| v / n), n))
}

/// `Σ = R S Sᵀ Rᵀ` with `S = diag(exp(scale_raw))` and `R` from the
/// normalized quaternion.
pub fn build_covariance(scale_raw: [f64; 3], rotation_raw: [f64; 4]) -> Result<Matrix3<f64>, SceneError> {
    let (q, _) = normalized(rotation_raw)?;
    let m = rotation_matrix(q) * Matrix3::from_diagonal(&scale_raw.map(f64::exp).into());
    let sigma = m * m.transpose();
    // Symmetrize so the result is exactly symmetric regardless of rounding.
    Ok((sigma + sigma.transpose()) * 0.5)
}

/// Gradient of a scalar with respect to the unit quaternion, given its
/// gradient `g` with respect to the rotation matrix entries.
pub(crate) fn rotation_matrix_grad(q: [f64; 4], g: &Matrix3<f64>) -> [f64; 4] {
    let [w, x, y, z] = q;
    let g = |r: usize, c: usize| g[(r, c)];
    let dw = 2.0
        * (-z * g(0, 1) + y * g(0, 2) + z * g(1, 0) - x * g(1, 2) - y * g(2, 0) + x * g(2, 1));
    let dx = 2.0
        * (y * g(0, 1) + z * g(0, 2) + y * g(1, 0) - 2.0 * x * g(1, 1) - w * g(1, 2)
            + z * g(2, 0)
            + w * g(2, 1)
            - 2.0 * x * g(2, 2));
    let dy = 2.0
        * (-2.0 * y * g(0, 0) + x * g(0, 1) + w * g(0, 2) + x * g(1, 0) + z * g(1, 2)
            - w * g(2, 0)
            + z * g(2, 1)
            - 2.0 * y * g(2, 2));
    let dz = 2.0
        * (-2.0 * z * g(0, 0) - w * g(0, 1) + x * g(0, 2) + w * g(1, 0) - 2.0 * z * g(1, 1)
            + y * g(1, 2)
            + x * g(2, 0)
            + y * g(2, 1));
    [dw, dx, dy, dz]
}

/// Pull a gradient on `q / |q|` back to the raw quaternion.
pub(crate) fn normalize_quaternion_grad(raw: [f64; 4], g_unit: [f64; 4]) -> [f64; 4] {
    let n = raw.iter().map(|v| v * v).sum::<f64>().sqrt();
    let q = raw.map(|v| v / n);
    let dot: f64 = q.iter().zip(&g_unit).map(|(a, b)| a * b).sum();
    [0, 1, 2, 3].map(|i| (g_unit[i] - q[i] * dot) / n)
}

/// Backpropagate `dL/dΣ` (symmetric) to `(scale_raw, rotation_raw)`.
pub(crate) fn covariance_backward(
    scale_raw: [f64; 3],
    rotation_raw: [f64; 4],
    d_sigma: &Matrix3<f64>,
) -> ([f64; 3], [f64; 4]) {
    let (q, _) = normalized(rotation_raw).expect("validated before backward");
    let r = rotation_matrix(q);
    let s = scale_raw.map(f64::exp);
    let m = r * Matrix3::from_diagonal(&s.into());
    // Σ = M Mᵀ  ⇒  dM = (G + Gᵀ) M
    let d_m = (d_sigma + d_sigma.transpose()) * m;
    let mut d_scale = [0.0; 3];
    for (j, ds) in d_scale.iter_mut().enumerate() {
        let col: f64 = (0..3).map(|i| d_m[(i, j)] * r[(i, j)]).sum();
        *ds = col * s[j];
    }
    let d_r = d_m * Matrix3::from_diagonal(&s.into());
    let d_q = rotation_matrix_grad(q, &d_r);
    (d_scale, normalize_quaternion_grad(rotation_raw, d_q))
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::{SymmetricEigen, UnitQuaternion};
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn identity_inputs_give_identity() {
        let s = build_covariance([0.0; 3], [1.0, 0.0, 0.0, 0.0]).unwrap();
        assert_eq!(s, Matrix3::identity());
        let s = build_covariance([2f64.ln(), 0.0, 0.0], [1.0, 0.0, 0.0, 0.0]).unwrap();
        assert!((s - Matrix3::from_diagonal(&[4.0, 1.0, 1.0].into())).abs().max() < 1e-15);
    }

    #[test]
    fn degenerate_quaternion_is_an_error() {
        assert!(build_covariance([0.0; 3], [0.0, 1e-13, 0.0, 0.0]).is_err());
    }

    #[test]
    fn eigenvalues_are_squared_scales() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..20 {
            let q = [0; 4].map(|_| rng.random_range(-1.0..1.0));
            let abc = [0; 3].map(|_| rng.random_range(0.2..3.0));
            let sigma = build_covariance(abc.map(f64::ln), q).unwrap();
            let mut eig: Vec<f64> = SymmetricEigen::new(sigma).eigenvalues.iter().copied().collect();
            eig.sort_by(f64::total_cmp);
            let mut want: Vec<f64> = abc.iter().map(|v| v * v).collect();
            want.sort_by(f64::total_cmp);
            for (e, w) in eig.iter().zip(&want) {
                assert!((e - w).abs() < 1e-9, "{eig:?} vs {want:?}");
            }
        }
    }

    #[test]
    fn rotation_matches_nalgebra() {
        let q = UnitQuaternion::from_euler_angles(0.4, -0.7, 1.3);
        let ours = rotation_matrix([q.w, q.i, q.j, q.k]);
        assert!((ours - q.to_rotation_matrix().matrix()).abs().max() < 1e-14);
    }

    #[test]
    fn covariance_backward_matches_finite_differences() {
        let scale_raw = [-0.3, 0.2, 0.5];
        let rot = [0.9, -0.2, 0.35, 0.1];
        let g = Matrix3::new(0.3, -0.1, 0.7, 0.2, 0.5, -0.4, 0.9, 0.1, -0.6);
        let loss = |s: [f64; 3], q: [f64; 4]| (build_covariance(s, q).unwrap().component_mul(&g)).sum();
        let (ds, dq) = covariance_backward(scale_raw, rot, &g);
        let h = 1e-6;
        for k in 0..3 {
            let (mut p, mut m) = (scale_raw, scale_raw);
            p[k] += h;
            m[k] -= h;
            let fd = (loss(p, rot) - loss(m, rot)) / (2.0 * h);
            assert!((fd - ds[k]).abs() < 1e-7, "scale {k}: {fd} vs {}", ds[k]);
        }
        for k in 0..4 {
            let (mut p, mut m) = (rot, rot);
            p[k] += h;
            m[k] -= h;
            let fd = (loss(scale_raw, p) - loss(scale_raw, m)) / (2.0 * h);
            assert!((fd - dq[k]).abs() < 1e-7, "rot {k}: {fd} vs {}", dq[k]);
        }
    }

    proptest! {
        #[test]
        fn symmetric_positive_definite_and_sign_invariant(
            w in -1.0f64..1.0, x in -1.0f64..1.0, y in -1.0f64..1.0, z in -1.0f64..1.0,
            a in -2.0f64..1.0, b in -2.0f64..1.0, c in -2.0f64..1.0,
        ) {
            prop_assume!((w * w + x * x + y * y + z * z).sqrt() > 1e-3);
            let s = build_covariance([a, b, c], [w, x, y, z]).unwrap();
            let neg = build_covariance([a, b, c], [-w, -x, -y, -z]).unwrap();
            prop_assert!((s - s.transpose()).abs().max() <= 1e-12);
            prop_assert!(SymmetricEigen::new(s).eigenvalues.iter().all(|&e| e > 0.0));
            prop_assert!((s - neg).abs().max() <= 1e-15);
        }
    }
}
