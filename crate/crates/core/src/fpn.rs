//! Feature pyramid over the backbone stages: 1×1 lateral projections, a
//! nearest-neighbour top-down pathway, 3×3 smoothing, and an extra coarsest
//! level by 2×2 max-pooling.

use crate::error::{Error, Result};
use crate::swin::FeatureHierarchy;
use crate::tensor::{conv2d, dims3, maxpool2, upsample_nearest2x, Tensor};
use crate::weights::{ParamSpec, Weights};

pub const FPN_CHANNELS: usize = 256;

/// Pyramid levels P2..P6, finest first, all with the same channel count.
#[derive(Clone, Debug, PartialEq)]
pub struct FeaturePyramid {
    pub levels: Vec<Tensor>,
}

impl FeaturePyramid {
    /// Level `k` in 2..=6.
    pub fn level(&self, k: usize) -> &Tensor {
        &self.levels[k - 2]
    }

    pub fn channels(&self) -> usize {
        self.levels[0].shape()[0]
    }

    /// Spatial sides, finest first.
    pub fn sides(&self) -> Vec<usize> {
        self.levels.iter().map(|t| t.shape()[1]).collect()
    }
}

fn inner_name(i: usize, part: &str) -> String {
    format!("fpn.inner.{i}.{part}")
}

fn layer_name(i: usize, part: &str) -> String {
    format!("fpn.layer.{i}.{part}")
}

/// Parameters for lateral convs from `in_channels[i]` and the smoothing convs.
pub fn param_specs(in_channels: &[usize; 4], channels: usize) -> Vec<ParamSpec> {
    let mut v = Vec::new();
    for (i, &c) in in_channels.iter().enumerate() {
        v.push(ParamSpec::fan_in(inner_name(i, "weight"), &[channels, c, 1, 1], c));
        v.push(ParamSpec::fan_in(inner_name(i, "bias"), &[channels], c));
        let fan = channels * 9;
        v.push(ParamSpec::fan_in(layer_name(i, "weight"), &[channels, channels, 3, 3], fan));
        v.push(ParamSpec::fan_in(layer_name(i, "bias"), &[channels], fan));
    }
    v
}

/// Build P2..P6 from the four stage outputs.
///
/// With `Lᵢ` the lateral projection of stage `i`, the merged maps are
/// `M₅ = L₅`, `Mᵢ = Lᵢ + up2(Mᵢ₊₁)`; then `Pᵢ = smooth(Mᵢ)` and
/// `P₆ = maxpool2(P₅)`.
pub fn build_pyramid(h: &FeatureHierarchy, weights: &Weights) -> Result<FeaturePyramid> {
    let mut merged: Vec<Option<Tensor>> = vec![None; 4];
    for i in (0..4).rev() {
        let x = &h.levels[i];
        let [c, _, _] = dims3(x, "build_pyramid")?;
        let w = weights.get(&inner_name(i, "weight"))?;
        if w.shape().len() != 4 || w.shape()[1] != c {
            return Err(Error::shape(
                "build_pyramid",
                format!("stage {i} has {c} channels but lateral weight is {:?}", w.shape()),
            ));
        }
        let mut lateral = conv2d(x, w, weights.get(&inner_name(i, "bias"))?, 1, 0)?;
        if let Some(coarser) = merged.get(i + 1).and_then(Option::as_ref) {
            let up = upsample_nearest2x(coarser)?;
            lateral.add_assign(&up).map_err(|_| {
                Error::shape(
                    "build_pyramid",
                    format!(
                        "stage {i} side {:?} is not twice stage {} side {:?}",
                        &x.shape()[1..],
                        i + 1,
                        &coarser.shape()[1..]
                    ),
                )
            })?;
        }
        merged[i] = Some(lateral);
    }
    let mut levels = Vec::with_capacity(5);
    for (i, m) in merged.iter().enumerate() {
        let m = m.as_ref().expect("every stage merged");
        levels.push(conv2d(
            m,
            weights.get(&layer_name(i, "weight"))?,
            weights.get(&layer_name(i, "bias"))?,
            1,
            1,
        )?);
    }
    let p6 = maxpool2(&levels[3])?;
    levels.push(p6);
    Ok(FeaturePyramid { levels })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::weights::{seeded_weights, zero_weights};

    fn hierarchy(chans: [usize; 4], side: usize, f: impl Fn(usize) -> f32) -> FeatureHierarchy {
        let levels = [0, 1, 2, 3].map(|i| {
            let s = side >> i;
            Tensor::from_fn(&[chans[i], s, s], |j| f(j + 1000 * i))
        });
        FeatureHierarchy { levels }
    }

    #[test]
    fn shapes_and_channel_count() {
        let chans = [4, 8, 16, 32];
        let w = seeded_weights(&param_specs(&chans, 6), 1);
        let h = hierarchy(chans, 16, |j| (j % 13) as f32 * 0.1);
        let p = build_pyramid(&h, &w).unwrap();
        assert_eq!(p.sides(), [16, 8, 4, 2, 1]);
        assert!(p.levels.iter().all(|l| l.shape()[0] == 6));
        assert_eq!(p.channels(), 6);
    }

    #[test]
    fn zero_input_zero_bias_gives_zero() {
        let chans = [2, 4, 8, 16];
        let mut w = seeded_weights(&param_specs(&chans, 3), 2);
        for s in param_specs(&chans, 3) {
            if s.name.ends_with("bias") {
                w.insert(s.name, Tensor::zeros(&s.shape));
            }
        }
        let p = build_pyramid(&hierarchy(chans, 8, |_| 0.0), &w).unwrap();
        assert!(p.levels.iter().all(|l| l.data().iter().all(|&v| v == 0.0)));
        let z = zero_weights(&param_specs(&chans, 3));
        let p = build_pyramid(&hierarchy(chans, 8, |j| j as f32), &z).unwrap();
        assert!(p.levels.iter().all(|l| l.data().iter().all(|&v| v == 0.0)));
    }

    #[test]
    fn channel_mismatch_is_an_error() {
        let w = seeded_weights(&param_specs(&[2, 4, 8, 16], 3), 2);
        let h = hierarchy([3, 4, 8, 16], 8, |_| 1.0);
        assert!(matches!(build_pyramid(&h, &w), Err(Error::Shape { .. })));
    }
}
