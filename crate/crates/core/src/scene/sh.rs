//! Real spherical harmonics up to degree 3, using the sign convention of the
//! common splatting PLY layout (`f_dc`, `f_rest`).

use super::{sh_basis_len, SceneError, MAX_SH_DEGREE};

pub const SH_C0: f64 = 0.282_094_791_773_878_14;
pub const SH_C1: f64 = 0.488_602_511_902_919_9;
pub const SH_C2: [f64; 5] = [
    1.092_548_430_592_079_2,
    -1.092_548_430_592_079_2,
    0.315_391_565_252_520_05,
    -1.092_548_430_592_079_2,
    0.546_274_215_296_039_6,
];
pub const SH_C3: [f64; 7] = [
    -0.590_043_589_926_643_5,
    2.890_611_442_640_554,
    -0.457_045_799_464_465_8,
    0.373_176_332_590_115_4,
    -0.457_045_799_464_465_8,
    1.445_305_721_320_277,
    -0.590_043_589_926_643_5,
];

/// Offset added to the SH sum so that zero coefficients render mid-gray.
pub const COLOR_OFFSET: f64 = 0.5;

/// DC coefficient producing `rgb` at degree 0.
pub fn rgb_to_dc(rgb: f64) -> f64 {
    (rgb - COLOR_OFFSET) / SH_C0
}

pub fn dc_to_rgb(dc: f64) -> f64 {
    dc * SH_C0 + COLOR_OFFSET
}

/// Basis values `Y_k(dir)` for `k < (degree+1)²`, ordered `l = 0..=degree`,
/// `m = -l..=l`. Unused trailing entries are zero.
pub fn basis(degree: usize, dir: [f64; 3]) -> [f64; 16] {
    let [x, y, z] = dir;
    let mut b = [0.0; 16];
    b[0] = SH_C0;
    if degree >= 1 {
        b[1] = -SH_C1 * y;
        b[2] = SH_C1 * z;
        b[3] = -SH_C1 * x;
    }
    if degree >= 2 {
        let (xx, yy, zz) = (x * x, y * y, z * z);
        b[4] = SH_C2[0] * x * y;
        b[5] = SH_C2[1] * y * z;
        b[6] = SH_C2[2] * (2.0 * zz - xx - yy);
        b[7] = SH_C2[3] * x * z;
        b[8] = SH_C2[4] * (xx - yy);
        if degree >= 3 {
            b[9] = SH_C3[0] * y * (3.0 * xx - yy);
            b[10] = SH_C3[1] * x * y * z;
            b[11] = SH_C3[2] * y * (4.0 * zz - xx - yy);
            b[12] = SH_C3[3] * z * (2.0 * zz - 3.0 * xx - 3.0 * yy);
            b[13] = SH_C3[4] * x * (4.0 * zz - xx - yy);
            b[14] = SH_C3[5] * z * (xx - yy);
            b[15] = SH_C3[6] * x * (xx - 3.0 * yy);
        }
    }
    b
}

/// Partial derivatives of each basis polynomial with respect to `(x, y, z)`.
pub(crate) fn basis_grad(degree: usize, dir: [f64; 3]) -> [[f64; 3]; 16] {
    let [x, y, z] = dir;
    let mut g = [[0.0; 3]; 16];
    if degree >= 1 {
        g[1] = [0.0, -SH_C1, 0.0];
        g[2] = [0.0, 0.0, SH_C1];
        g[3] = [-SH_C1, 0.0, 0.0];
    }
    if degree >= 2 {
        g[4] = [SH_C2[0] * y, SH_C2[0] * x, 0.0];
        g[5] = [0.0, SH_C2[1] * z, SH_C2[1] * y];
        g[6] = [-2.0 * SH_C2[2] * x, -2.0 * SH_C2[2] * y, 4.0 * SH_C2[2] * z];
        g[7] = [SH_C2[3] * z, 0.0, SH_C2[3] * x];
        g[8] = [2.0 * SH_C2[4] * x, -2.0 * SH_C2[4] * y, 0.0];
        if degree >= 3 {
            let (xx, yy, zz) = (x * x, y * y, z * z);
            g[9] = [
                SH_C3[0] * 6.0 * x * y,
                SH_C3[0] * (3.0 * xx - 3.0 * yy),
                0.0,
            ];
            g[10] = [SH_C3[1] * y * z, SH_C3[1] * x * z, SH_C3[1] * x * y];
            g[11] = [
                SH_C3[2] * (-2.0 * x * y),
                SH_C3[2] * (4.0 * zz - xx - 3.0 * yy),
                SH_C3[2] * 8.0 * y * z,
            ];
            g[12] = [
                SH_C3[3] * (-6.0 * x * z),
                SH_C3[3] * (-6.0 * y * z),
                SH_C3[3] * (6.0 * zz - 3.0 * xx - 3.0 * yy),
            ];
            g[13] = [
                SH_C3[4] * (4.0 * zz - 3.0 * xx - yy),
                SH_C3[4] * (-2.0 * x * y),
                SH_C3[4] * 8.0 * x * z,
            ];
            g[14] = [SH_C3[5] * 2.0 * x * z, -SH_C3[5] * 2.0 * y * z, SH_C3[5] * (xx - yy)];
            g[15] = [SH_C3[6] * (3.0 * xx - 3.0 * yy), SH_C3[6] * (-6.0 * x * y), 0.0];
        }
    }
    g
}

/// Evaluate view-dependent color: `0.5 + Σ c_lm Y_lm(dir)` per channel.
/// No clamping is applied here.
pub fn eval_sh(sh: &[f64], view_dir: [f64; 3], degree: usize) -> Result<[f64; 3], SceneError> {
    if degree > MAX_SH_DEGREE {
        return Err(SceneError::ShDegree(degree));
    }
    let n = sh_basis_len(degree);
    if sh.len() != 3 * n {
        return Err(SceneError::Shape {
            expected: 3 * n,
            actual: sh.len(),
        });
    }
    Ok(eval_unchecked(sh, &basis(degree, view_dir), n))
}

#[inline]
pub(crate) fn eval_unchecked(sh: &[f64], basis: &[f64; 16], n: usize) -> [f64; 3] {
    let mut rgb = [COLOR_OFFSET; 3];
    for (k, &y) in basis.iter().take(n).enumerate() {
        rgb[0] += sh[3 * k] * y;
        rgb[1] += sh[3 * k + 1] * y;
        rgb[2] += sh[3 * k + 2] * y;
    }
    rgb
}
