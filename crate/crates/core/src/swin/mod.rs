//! Swin-Tiny backbone: patch embedding, four stages of (shifted) window
//! attention blocks with patch merging between them, and a layer norm on each
//! stage output.
//!
//! Token grids are carried as `[H, W, C]` tensors. Stage outputs are
//! returned channel-first, `[C, H, W]`.

mod attention;
mod window;

pub use attention::{relative_index, window_attention, AttentionWeights};
pub use window::{
    attention_mask, crop_hw, pad_hw, roll, shift_regions, window_partition, window_reverse,
    MASK_VALUE,
};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::{dims3, gelu, layer_norm, linear, Tensor};
use crate::weights::{Init, ParamSpec, Weights};

pub const LN_EPS: f32 = 1e-5;

/// Backbone hyperparameters. Defaults are the Swin-T settings.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SwinConfig {
    pub img_size: usize,
    pub patch: usize,
    pub embed_dim: usize,
    pub depths: [usize; 4],
    pub heads: [usize; 4],
    pub window: usize,
    pub mlp_ratio: usize,
    pub in_channels: usize,
}

impl Default for SwinConfig {
    fn default() -> Self {
        SwinConfig {
            img_size: 512,
            patch: 4,
            embed_dim: 96,
            depths: [2, 2, 6, 2],
            heads: [3, 6, 12, 24],
            window: 7,
            mlp_ratio: 4,
            in_channels: 3,
        }
    }
}

impl SwinConfig {
    /// Channels of stage `i`: `C·2^i`.
    pub fn stage_channels(&self, i: usize) -> usize {
        self.embed_dim << i
    }

    /// Spatial side of stage `i` for an input side `side`.
    pub fn stage_side(&self, side: usize, i: usize) -> usize {
        side / (self.patch << i)
    }

    /// Total number of transformer blocks.
    pub fn block_count(&self) -> usize {
        self.depths.iter().sum()
    }

    /// Input sides must be divisible by this.
    pub fn stride_multiple(&self) -> usize {
        self.patch << 3
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.patch == 0 || self.embed_dim == 0 || self.window == 0 || self.mlp_ratio == 0 {
            return bad("swin: patch, embed_dim, window and mlp_ratio must be positive".into());
        }
        for i in 0..4 {
            if self.heads[i] == 0 || !self.stage_channels(i).is_multiple_of(self.heads[i]) {
                return bad(format!(
                    "swin: stage {i} has {} channels, not divisible by {} heads",
                    self.stage_channels(i),
                    self.heads[i]
                ));
            }
        }
        if !self.img_size.is_multiple_of(self.stride_multiple()) {
            return bad(format!(
                "swin: img_size {} must be a multiple of {}",
                self.img_size,
                self.stride_multiple()
            ));
        }
        Ok(())
    }
}

/// Stage outputs, finest first: `[C·2^i, S/(4·2^i), S/(4·2^i)]`.
#[derive(Clone, Debug, PartialEq)]
pub struct FeatureHierarchy {
    pub levels: [Tensor; 4],
}

const PREFIX: &str = "backbone";

fn block_prefix(stage: usize, block: usize) -> String {
    format!("{PREFIX}.layers.{stage}.blocks.{block}")
}

/// Every backbone parameter with its shape and seeded initializer.
pub fn param_specs(cfg: &SwinConfig) -> Vec<ParamSpec> {
    let mut v = Vec::new();
    let c0 = cfg.embed_dim;
    let patch_in = cfg.in_channels * cfg.patch * cfg.patch;
    v.push(ParamSpec::fan_in(format!("{PREFIX}.patch_embed.proj.weight"), &[patch_in, c0], patch_in));
    v.push(ParamSpec::fan_in(format!("{PREFIX}.patch_embed.proj.bias"), &[c0], patch_in));
    layer_norm_specs(&mut v, &format!("{PREFIX}.patch_embed.norm"), c0);
    let table = (2 * cfg.window - 1) * (2 * cfg.window - 1);
    for s in 0..4 {
        let c = cfg.stage_channels(s);
        if s > 0 {
            let cp = cfg.stage_channels(s - 1);
            let p = format!("{PREFIX}.layers.{s}.downsample");
            layer_norm_specs(&mut v, &format!("{p}.norm"), 4 * cp);
            v.push(ParamSpec::fan_in(format!("{p}.reduction.weight"), &[4 * cp, 2 * cp], 4 * cp));
        }
        let hidden = cfg.mlp_ratio * c;
        for b in 0..cfg.depths[s] {
            let p = block_prefix(s, b);
            layer_norm_specs(&mut v, &format!("{p}.norm1"), c);
            v.push(ParamSpec::fan_in(format!("{p}.attn.qkv.weight"), &[c, 3 * c], c));
            v.push(ParamSpec::fan_in(format!("{p}.attn.qkv.bias"), &[3 * c], c));
            v.push(ParamSpec::fan_in(format!("{p}.attn.proj.weight"), &[c, c], c));
            v.push(ParamSpec::fan_in(format!("{p}.attn.proj.bias"), &[c], c));
            v.push(ParamSpec::new(
                format!("{p}.attn.relative_position_bias_table"),
                &[table, cfg.heads[s]],
                Init::Uniform(0.02),
            ));
            layer_norm_specs(&mut v, &format!("{p}.norm2"), c);
            v.push(ParamSpec::fan_in(format!("{p}.mlp.fc1.weight"), &[c, hidden], c));
            v.push(ParamSpec::fan_in(format!("{p}.mlp.fc1.bias"), &[hidden], c));
            v.push(ParamSpec::fan_in(format!("{p}.mlp.fc2.weight"), &[hidden, c], hidden));
            v.push(ParamSpec::fan_in(format!("{p}.mlp.fc2.bias"), &[c], hidden));
        }
        layer_norm_specs(&mut v, &format!("{PREFIX}.norm{s}"), c);
    }
    v
}

fn layer_norm_specs(v: &mut Vec<ParamSpec>, prefix: &str, c: usize) {
    v.push(ParamSpec::new(format!("{prefix}.weight"), &[c], Init::Ones));
    v.push(ParamSpec::new(format!("{prefix}.bias"), &[c], Init::Zeros));
}

/// Flatten non-overlapping `patch × patch` patches of `[C, H, W]` into
/// tokens `[(H/p)·(W/p), C·p·p]`. Patches are row-major; within a patch the
/// order is channel, then row, then column.
pub fn patch_partition(image: &Tensor, patch: usize) -> Result<Tensor> {
    let [c, h, w] = dims3(image, "patch_partition")?;
    if patch == 0 || h % patch != 0 || w % patch != 0 {
        return Err(Error::shape(
            "patch_partition",
            format!("{h}x{w} is not divisible by patch {patch}"),
        ));
    }
    let (gh, gw) = (h / patch, w / patch);
    let len = c * patch * patch;
    let mut out = Vec::with_capacity(gh * gw * len);
    let d = image.data();
    for py in 0..gh {
        for px in 0..gw {
            for ch in 0..c {
                for ky in 0..patch {
                    let row = (ch * h + py * patch + ky) * w + px * patch;
                    out.extend_from_slice(&d[row..row + patch]);
                }
            }
        }
    }
    Tensor::new(vec![gh * gw, len], out)
}

/// Inverse of [`patch_partition`].
pub fn patch_unpartition(tokens: &Tensor, c: usize, h: usize, w: usize, patch: usize) -> Result<Tensor> {
    let (gh, gw) = (h / patch, w / patch);
    let len = c * patch * patch;
    if tokens.shape() != [gh * gw, len] || !h.is_multiple_of(patch) || !w.is_multiple_of(patch) {
        return Err(Error::shape(
            "patch_unpartition",
            format!("{:?} does not tile [{c}, {h}, {w}]", tokens.shape()),
        ));
    }
    let mut out = vec![0.0; c * h * w];
    let t = tokens.data();
    for py in 0..gh {
        for px in 0..gw {
            let tok = &t[(py * gw + px) * len..(py * gw + px + 1) * len];
            for ch in 0..c {
                for ky in 0..patch {
                    let row = (ch * h + py * patch + ky) * w + px * patch;
                    let src = (ch * patch + ky) * patch;
                    out[row..row + patch].copy_from_slice(&tok[src..src + patch]);
                }
            }
        }
    }
    Tensor::new(vec![c, h, w], out)
}

/// Per-token affine embedding `[N, C·p²] → [N, embed_dim]`.
pub fn linear_embed(tokens: &Tensor, w: &Tensor, b: &Tensor) -> Result<Tensor> {
    linear(tokens, w, Some(b))
}

/// Concatenate each 2×2 neighbourhood of `[H, W, C]` to `4C` channels
/// (order: (0,0), (1,0), (0,1), (1,1) as (row, col) offsets), layer-norm,
/// and project to `2C`: result `[H/2, W/2, 2C]`.
pub fn patch_merge(x: &Tensor, gamma: &Tensor, beta: &Tensor, reduction: &Tensor) -> Result<Tensor> {
    let [h, w, c] = dims3(x, "patch_merge")?;
    if h % 2 != 0 || w % 2 != 0 {
        return Err(Error::shape("patch_merge", format!("odd spatial size {h}x{w}")));
    }
    let (oh, ow) = (h / 2, w / 2);
    let mut cat = Vec::with_capacity(x.len());
    let d = x.data();
    for y in 0..oh {
        for xx in 0..ow {
            for (dy, dx) in [(0, 0), (1, 0), (0, 1), (1, 1)] {
                let s = ((2 * y + dy) * w + 2 * xx + dx) * c;
                cat.extend_from_slice(&d[s..s + c]);
            }
        }
    }
    let cat = Tensor::new(vec![oh, ow, 4 * c], cat)?;
    let normed = layer_norm(&cat, gamma, beta, LN_EPS)?;
    linear(&normed, reduction, None)
}

/// One transformer block on `[H, W, C]`: pre-norm windowed attention with
/// a cyclic shift of `shift` (0 for a regular block), residual, then
/// pre-norm MLP with residual. The grid is zero-padded to a multiple of
/// `window`; padded tokens are masked as keys and cropped afterwards.
pub fn swin_block(
    x: &Tensor,
    weights: &Weights,
    prefix: &str,
    heads: usize,
    window: usize,
    table_window: usize,
    shift: usize,
) -> Result<Tensor> {
    swin_block_with_probs(x, weights, prefix, heads, window, table_window, shift, None)
}

#[allow(clippy::too_many_arguments)]
pub(crate) fn swin_block_with_probs(
    x: &Tensor,
    weights: &Weights,
    prefix: &str,
    heads: usize,
    window: usize,
    table_window: usize,
    shift: usize,
    probs: Option<&mut Vec<f32>>,
) -> Result<Tensor> {
    let [h, w, c] = dims3(x, "swin_block")?;
    let g = |n: &str| weights.get(&format!("{prefix}.{n}"));
    let normed = layer_norm(x, g("norm1.weight")?, g("norm1.bias")?, LN_EPS)?;
    let hp = h.div_ceil(window) * window;
    let wp = w.div_ceil(window) * window;
    let padded = pad_hw(&normed, hp, wp)?;
    let s = shift as isize;
    let shifted = roll(&padded, -s, -s)?;
    let windows = window_partition(&shifted, window)?;
    let mask = attention_mask(h, w, window, shift);
    let attn = AttentionWeights {
        heads,
        qkv_w: g("attn.qkv.weight")?,
        qkv_b: g("attn.qkv.bias")?,
        proj_w: g("attn.proj.weight")?,
        proj_b: g("attn.proj.bias")?,
        rel_bias: Some(g("attn.relative_position_bias_table")?),
        table_window,
    };
    let attended = window_attention(&windows, window, &attn, mask.as_ref(), probs)?;
    let merged = window_reverse(&attended, window, hp, wp)?;
    let unshifted = roll(&merged, s, s)?;
    let mut out = crop_hw(&unshifted, h, w)?;
    out.add_assign(x)?;

    let normed = layer_norm(&out, g("norm2.weight")?, g("norm2.bias")?, LN_EPS)?;
    let hidden = gelu(&linear(&normed, g("mlp.fc1.weight")?, Some(g("mlp.fc1.bias")?))?);
    let mlp = linear(&hidden, g("mlp.fc2.weight")?, Some(g("mlp.fc2.bias")?))?;
    out.add_assign(&mlp)?;
    debug_assert_eq!(out.shape(), [h, w, c]);
    Ok(out)
}

/// Prepare a 12-bit slice for the backbone: scale to `[0, 1]` and replicate
/// the single channel `channels` times → `[channels, H, W]`.
pub fn image_from_gray(pixels: &[u16], width: usize, height: usize, channels: usize) -> Result<Tensor> {
    if pixels.len() != width * height {
        return Err(Error::shape(
            "image_from_gray",
            format!("{} pixels for {width}x{height}", pixels.len()),
        ));
    }
    let plane: Vec<f32> = pixels
        .iter()
        .map(|&p| p as f32 / crate::preprocess::MAX_12BIT as f32)
        .collect();
    let mut data = Vec::with_capacity(channels * plane.len());
    for _ in 0..channels {
        data.extend_from_slice(&plane);
    }
    Tensor::new(vec![channels, height, width], data)
}

/// Run the backbone on `[in_channels, S, S']` with both sides divisible by 32.
pub fn swin_forward(image: &Tensor, weights: &Weights, cfg: &SwinConfig) -> Result<FeatureHierarchy> {
    let [cin, h, w] = dims3(image, "swin_forward")?;
    let m = cfg.stride_multiple();
    if cin != cfg.in_channels || h % m != 0 || w % m != 0 || h == 0 || w == 0 {
        return Err(Error::shape(
            "swin_forward",
            format!(
                "input {:?}, expected [{}, H, W] with H, W multiples of {m}",
                image.shape(),
                cfg.in_channels
            ),
        ));
    }
    weights.check(&param_specs(cfg))?;
    let g = |n: String| weights.get(&n);

    let tokens = patch_partition(image, cfg.patch)?;
    let embedded = linear_embed(
        &tokens,
        g(format!("{PREFIX}.patch_embed.proj.weight"))?,
        g(format!("{PREFIX}.patch_embed.proj.bias"))?,
    )?;
    let (mut gh, mut gw) = (h / cfg.patch, w / cfg.patch);
    let mut x = layer_norm(
        &embedded,
        g(format!("{PREFIX}.patch_embed.norm.weight"))?,
        g(format!("{PREFIX}.patch_embed.norm.bias"))?,
        LN_EPS,
    )?
    .reshape(&[gh, gw, cfg.embed_dim])?;

    let mut outs = Vec::with_capacity(4);
    for s in 0..4 {
        if s > 0 {
            let p = format!("{PREFIX}.layers.{s}.downsample");
            x = patch_merge(
                &x,
                g(format!("{p}.norm.weight"))?,
                g(format!("{p}.norm.bias"))?,
                g(format!("{p}.reduction.weight"))?,
            )?;
            gh /= 2;
            gw /= 2;
        }
        for b in 0..cfg.depths[s] {
            let shift = if b % 2 == 1 { cfg.window / 2 } else { 0 };
            x = swin_block(&x, weights, &block_prefix(s, b), cfg.heads[s], cfg.window, cfg.window, shift)?;
        }
        let normed = layer_norm(
            &x,
            g(format!("{PREFIX}.norm{s}.weight"))?,
            g(format!("{PREFIX}.norm{s}.bias"))?,
            LN_EPS,
        )?;
        debug_assert_eq!(normed.shape(), [gh, gw, cfg.stage_channels(s)]);
        outs.push(normed.hwc_to_chw()?);
    }
    let levels: [Tensor; 4] = outs.try_into().expect("four stages");
    Ok(FeatureHierarchy { levels })
}
