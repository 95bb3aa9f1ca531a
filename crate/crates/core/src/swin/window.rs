//! Token-grid plumbing for windowed attention: padding, cyclic shifts,
//! window partitioning and the shifted-window attention mask.

use crate::error::{Error, Result};
use crate::tensor::{dims3, Tensor};

/// Score added to attention logits of forbidden query/key pairs.
pub const MASK_VALUE: f32 = -1e9;

/// Zero-pad `[H, W, C]` on the bottom/right to `[hp, wp, C]`.
pub fn pad_hw(x: &Tensor, hp: usize, wp: usize) -> Result<Tensor> {
    let [h, w, c] = dims3(x, "pad_hw")?;
    if hp < h || wp < w {
        return Err(Error::shape("pad_hw", format!("cannot pad {h}x{w} to {hp}x{wp}")));
    }
    if (hp, wp) == (h, w) {
        return Ok(x.clone());
    }
    let mut out = vec![0.0; hp * wp * c];
    for y in 0..h {
        out[y * wp * c..(y * wp + w) * c].copy_from_slice(&x.data()[y * w * c..(y + 1) * w * c]);
    }
    Tensor::new(vec![hp, wp, c], out)
}

/// Top-left `[h, w, C]` crop of `[H, W, C]`.
pub fn crop_hw(x: &Tensor, h: usize, w: usize) -> Result<Tensor> {
    let [hp, wp, c] = dims3(x, "crop_hw")?;
    if h > hp || w > wp {
        return Err(Error::shape("crop_hw", format!("cannot crop {hp}x{wp} to {h}x{w}")));
    }
    if (hp, wp) == (h, w) {
        return Ok(x.clone());
    }
    let mut out = Vec::with_capacity(h * w * c);
    for y in 0..h {
        out.extend_from_slice(&x.data()[y * wp * c..(y * wp + w) * c]);
    }
    Tensor::new(vec![h, w, c], out)
}

/// Cyclic shift of the spatial axes: `out[(y + dy) mod H][(x + dx) mod W] = in[y][x]`.
pub fn roll(x: &Tensor, dy: isize, dx: isize) -> Result<Tensor> {
    let [h, w, c] = dims3(x, "roll")?;
    if dy == 0 && dx == 0 {
        return Ok(x.clone());
    }
    let mut out = vec![0.0; x.len()];
    for y in 0..h {
        let ty = (y as isize + dy).rem_euclid(h as isize) as usize;
        for xx in 0..w {
            let tx = (xx as isize + dx).rem_euclid(w as isize) as usize;
            out[(ty * w + tx) * c..(ty * w + tx + 1) * c]
                .copy_from_slice(&x.data()[(y * w + xx) * c..(y * w + xx + 1) * c]);
        }
    }
    Tensor::new(vec![h, w, c], out)
}

/// Split `[H, W, C]` into `[nW, ws·ws, C]` non-overlapping windows, windows
/// and tokens both in row-major order. `H` and `W` must be multiples of `ws`.
pub fn window_partition(x: &Tensor, ws: usize) -> Result<Tensor> {
    let [h, w, c] = dims3(x, "window_partition")?;
    if ws == 0 || h % ws != 0 || w % ws != 0 {
        return Err(Error::shape(
            "window_partition",
            format!("{h}x{w} is not a multiple of window {ws}"),
        ));
    }
    let (nh, nw) = (h / ws, w / ws);
    let mut out = Vec::with_capacity(x.len());
    for wy in 0..nh {
        for wx in 0..nw {
            for ty in 0..ws {
                let y = wy * ws + ty;
                let start = (y * w + wx * ws) * c;
                out.extend_from_slice(&x.data()[start..start + ws * c]);
            }
        }
    }
    Tensor::new(vec![nh * nw, ws * ws, c], out)
}

/// Inverse of [`window_partition`].
pub fn window_reverse(windows: &Tensor, ws: usize, h: usize, w: usize) -> Result<Tensor> {
    let [n_win, n_tok, c] = dims3(windows, "window_reverse")?;
    if ws == 0 || !h.is_multiple_of(ws) || !w.is_multiple_of(ws) || n_tok != ws * ws || n_win != (h / ws) * (w / ws) {
        return Err(Error::shape(
            "window_reverse",
            format!("{:?} cannot tile {h}x{w} with window {ws}", windows.shape()),
        ));
    }
    let nw = w / ws;
    let mut out = vec![0.0; h * w * c];
    for (wi, win) in windows.data().chunks_exact(n_tok * c).enumerate() {
        let (wy, wx) = (wi / nw, wi % nw);
        for ty in 0..ws {
            let y = wy * ws + ty;
            let dst = (y * w + wx * ws) * c;
            out[dst..dst + ws * c].copy_from_slice(&win[ty * ws * c..(ty + 1) * ws * c]);
        }
    }
    Tensor::new(vec![h, w, c], out)
}

/// Region label of every cell on an `hp × wp` canvas for a cyclic shift of
/// `shift`: rows and columns are each cut at `[0, n−ws)`, `[n−ws, n−shift)`,
/// `[n−shift, n)`.
pub fn shift_regions(hp: usize, wp: usize, ws: usize, shift: usize) -> Vec<u32> {
    let band = |i: usize, n: usize| -> u32 {
        if shift == 0 || i < n.saturating_sub(ws) {
            0
        } else if i < n - shift {
            1
        } else {
            2
        }
    };
    let mut labels = vec![0; hp * wp];
    for y in 0..hp {
        for x in 0..wp {
            labels[y * wp + x] = band(y, hp) * 3 + band(x, wp);
        }
    }
    labels
}

/// Additive attention mask `[nW, N, N]` for windows of the shifted, padded
/// canvas, or `None` when nothing needs masking.
///
/// A pair is masked when the two tokens come from different shift regions,
/// or when the key is padding (outside the original `h × w`). Labels and
/// padding flags are laid out on the rolled canvas the same way the tokens are.
pub fn attention_mask(h: usize, w: usize, ws: usize, shift: usize) -> Option<Tensor> {
    let hp = h.div_ceil(ws) * ws;
    let wp = w.div_ceil(ws) * ws;
    if shift == 0 && hp == h && wp == w {
        return None;
    }
    // Labels are defined on the rolled canvas directly.
    let labels = shift_regions(hp, wp, ws, shift);
    // Padding is at the far edge before the roll by −shift.
    let mut pad = vec![false; hp * wp];
    for y in 0..hp {
        for x in 0..wp {
            let sy = (y + shift) % hp;
            let sx = (x + shift) % wp;
            pad[y * wp + x] = sy >= h || sx >= w;
        }
    }
    let (nh, nw, n) = (hp / ws, wp / ws, ws * ws);
    let mut mask = vec![0.0f32; nh * nw * n * n];
    for wy in 0..nh {
        for wx in 0..nw {
            let base = (wy * nw + wx) * n * n;
            let cell = |t: usize| (wy * ws + t / ws) * wp + wx * ws + t % ws;
            for i in 0..n {
                for j in 0..n {
                    let (ci, cj) = (cell(i), cell(j));
                    if labels[ci] != labels[cj] || pad[cj] {
                        mask[base + i * n + j] = MASK_VALUE;
                    }
                }
            }
        }
    }
    Some(Tensor::new(vec![nh * nw, n, n], mask).expect("mask shape"))
}
