use crate::scene::{GaussianSplat, Scene};

/// The five optimizable parameter groups of a splat.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ParamGroup {
    Mean,
    Scale,
    Rotation,
    Opacity,
    Sh,
}

impl ParamGroup {
    pub const ALL: [ParamGroup; 5] = [
        ParamGroup::Mean,
        ParamGroup::Scale,
        ParamGroup::Rotation,
        ParamGroup::Opacity,
        ParamGroup::Sh,
    ];

    /// Values per splat in this group.
    pub fn stride(self, sh_len: usize) -> usize {
        match self {
            ParamGroup::Mean | ParamGroup::Scale => 3,
            ParamGroup::Rotation => 4,
            ParamGroup::Opacity => 1,
            ParamGroup::Sh => sh_len,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            ParamGroup::Mean => "mean",
            ParamGroup::Scale => "scale_raw",
            ParamGroup::Rotation => "rotation_raw",
            ParamGroup::Opacity => "opacity_raw",
            ParamGroup::Sh => "sh",
        }
    }

    pub fn slice(self, splat: &GaussianSplat) -> &[f64] {
        match self {
            ParamGroup::Mean => &splat.mean,
            ParamGroup::Scale => &splat.scale_raw,
            ParamGroup::Rotation => &splat.rotation_raw,
            ParamGroup::Opacity => std::slice::from_ref(&splat.opacity_raw),
            ParamGroup::Sh => &splat.sh,
        }
    }

    pub fn slice_mut(self, splat: &mut GaussianSplat) -> &mut [f64] {
        match self {
            ParamGroup::Mean => &mut splat.mean,
            ParamGroup::Scale => &mut splat.scale_raw,
            ParamGroup::Rotation => &mut splat.rotation_raw,
            ParamGroup::Opacity => std::slice::from_mut(&mut splat.opacity_raw),
            ParamGroup::Sh => &mut splat.sh,
        }
    }
}

/// Gradients with respect to the raw (stored) parameters of every splat.
#[derive(Clone, Debug, PartialEq)]
pub struct GradientBuffer {
    pub sh_len: usize,
    pub mean: Vec<f64>,
    pub scale_raw: Vec<f64>,
    pub rotation_raw: Vec<f64>,
    pub opacity_raw: Vec<f64>,
    pub sh: Vec<f64>,
    /// Gradient with respect to the projected pixel-space mean, kept for
    /// densification statistics.
    pub mean2d: Vec<f64>,
}

impl GradientBuffer {
    pub fn zeros(splats: usize, sh_len: usize) -> Self {
        Self {
            sh_len,
            mean: vec![0.0; 3 * splats],
            scale_raw: vec![0.0; 3 * splats],
            rotation_raw: vec![0.0; 4 * splats],
            opacity_raw: vec![0.0; splats],
            sh: vec![0.0; sh_len * splats],
            mean2d: vec![0.0; 2 * splats],
        }
    }

    pub fn for_scene(scene: &Scene) -> Self {
        Self::zeros(scene.len(), scene.sh_len())
    }

    pub fn len(&self) -> usize {
        self.opacity_raw.len()
    }

    pub fn is_empty(&self) -> bool {
        self.opacity_raw.is_empty()
    }

    pub fn group(&self, group: ParamGroup) -> &[f64] {
        match group {
            ParamGroup::Mean => &self.mean,
            ParamGroup::Scale => &self.scale_raw,
            ParamGroup::Rotation => &self.rotation_raw,
            ParamGroup::Opacity => &self.opacity_raw,
            ParamGroup::Sh => &self.sh,
        }
    }

    pub fn group_mut(&mut self, group: ParamGroup) -> &mut [f64] {
        match group {
            ParamGroup::Mean => &mut self.mean,
            ParamGroup::Scale => &mut self.scale_raw,
            ParamGroup::Rotation => &mut self.rotation_raw,
            ParamGroup::Opacity => &mut self.opacity_raw,
            ParamGroup::Sh => &mut self.sh,
        }
    }

    /// `self += factor * other`.
    pub fn add_scaled(&mut self, other: &GradientBuffer, factor: f64) {
        assert_eq!(self.len(), other.len(), "gradient buffers differ in splat count");
        for group in ParamGroup::ALL {
            for (a, b) in self.group_mut(group).iter_mut().zip(other.group(group)) {
                *a += factor * b;
            }
        }
        for (a, b) in self.mean2d.iter_mut().zip(&other.mean2d) {
            *a += factor * b;
        }
    }

    pub fn is_all_zero(&self) -> bool {
        ParamGroup::ALL
            .iter()
            .all(|&g| self.group(g).iter().all(|&v| v == 0.0))
    }
}
