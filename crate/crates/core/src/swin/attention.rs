//! Multi-head self-attention inside non-overlapping windows.

use crate::error::{Error, Result};
use crate::tensor::{dims3, linear, softmax_rows_inplace, Tensor};

/// Parameters of one window-attention layer. Linear weights are `[in, out]`.
pub struct AttentionWeights<'a> {
    pub heads: usize,
    pub qkv_w: &'a Tensor,
    pub qkv_b: &'a Tensor,
    pub proj_w: &'a Tensor,
    pub proj_b: &'a Tensor,
    /// `[(2·table_window − 1)², heads]`, or `None` for no positional bias.
    pub rel_bias: Option<&'a Tensor>,
    /// Window size the bias table was built for (≥ the window in use).
    pub table_window: usize,
}

/// Index into the relative position table for tokens `i`, `j` of a
/// `ws × ws` window, using a table sized for `table_window`.
pub fn relative_index(i: usize, j: usize, ws: usize, table_window: usize) -> usize {
    let off = table_window as isize - 1;
    let side = 2 * table_window - 1;
    let (yi, xi) = ((i / ws) as isize, (i % ws) as isize);
    let (yj, xj) = ((j / ws) as isize, (j % ws) as isize);
    ((yi - yj + off) as usize) * side + (xi - xj + off) as usize
}

/// Attention over `windows: [nW, ws², C]`.
///
/// Per head: `softmax(q·kᵀ/√d + bias + mask)·v`, heads concatenated, then the
/// output projection. `mask`, when given, is `[nW, ws², ws²]` and added to
/// the scores. If `probs` is given it receives every probability row
/// (`[nW, heads, N, N]`, flattened).
pub fn window_attention(
    windows: &Tensor,
    ws: usize,
    p: &AttentionWeights<'_>,
    mask: Option<&Tensor>,
    mut probs: Option<&mut Vec<f32>>,
) -> Result<Tensor> {
    let [n_win, n, c] = dims3(windows, "window_attention")?;
    if p.heads == 0 || c % p.heads != 0 {
        return Err(Error::shape(
            "window_attention",
            format!("{c} channels not divisible by {} heads", p.heads),
        ));
    }
    if n != ws * ws {
        return Err(Error::shape(
            "window_attention",
            format!("{n} tokens per window, expected {}", ws * ws),
        ));
    }
    if let Some(m) = mask {
        if m.shape() != [n_win, n, n] {
            return Err(Error::shape(
                "window_attention",
                format!("mask {:?}, expected [{n_win}, {n}, {n}]", m.shape()),
            ));
        }
    }
    let table_side = 2 * p.table_window - 1;
    if let Some(t) = p.rel_bias {
        if p.table_window < ws || t.shape() != [table_side * table_side, p.heads] {
            return Err(Error::shape(
                "window_attention",
                format!("relative bias table {:?} for window {ws}", t.shape()),
            ));
        }
    }
    let heads = p.heads;
    let d = c / heads;
    let scale = 1.0 / (d as f32).sqrt();

    let flat = windows.clone().reshape(&[n_win * n, c])?;
    let qkv = linear(&flat, p.qkv_w, Some(p.qkv_b))?;
    let qkv = qkv.data();

    // bias[h][i][j], shared by every window
    let bias: Option<Vec<f32>> = p.rel_bias.map(|t| {
        let mut b = vec![0.0; heads * n * n];
        for i in 0..n {
            for j in 0..n {
                let r = relative_index(i, j, ws, p.table_window);
                for h in 0..heads {
                    b[(h * n + i) * n + j] = t.data()[r * heads + h];
                }
            }
        }
        b
    });

    if let Some(pr) = probs.as_deref_mut() {
        pr.clear();
        pr.reserve(n_win * heads * n * n);
    }
    let mut attended = vec![0.0f32; n_win * n * c];
    let mut q = vec![0.0f32; n * d];
    let mut k = vec![0.0f32; n * d];
    let mut v = vec![0.0f32; n * d];
    let mut scores = vec![0.0f32; n * n];
    for w in 0..n_win {
        let rows = &qkv[w * n * 3 * c..(w + 1) * n * 3 * c];
        for h in 0..heads {
            for t in 0..n {
                let row = &rows[t * 3 * c..(t + 1) * 3 * c];
                q[t * d..(t + 1) * d].copy_from_slice(&row[h * d..(h + 1) * d]);
                k[t * d..(t + 1) * d].copy_from_slice(&row[c + h * d..c + (h + 1) * d]);
                v[t * d..(t + 1) * d].copy_from_slice(&row[2 * c + h * d..2 * c + (h + 1) * d]);
            }
            for i in 0..n {
                let qi = &q[i * d..(i + 1) * d];
                for j in 0..n {
                    let kj = &k[j * d..(j + 1) * d];
                    let mut s = 0.0f32;
                    for e in 0..d {
                        s += qi[e] * kj[e];
                    }
                    scores[i * n + j] = s * scale;
                }
            }
            if let Some(b) = &bias {
                for (s, bv) in scores.iter_mut().zip(&b[h * n * n..(h + 1) * n * n]) {
                    *s += bv;
                }
            }
            if let Some(m) = mask {
                for (s, mv) in scores.iter_mut().zip(&m.data()[w * n * n..(w + 1) * n * n]) {
                    *s += mv;
                }
            }
            softmax_rows_inplace(&mut scores, n);
            if let Some(pr) = probs.as_deref_mut() {
                pr.extend_from_slice(&scores);
            }
            for i in 0..n {
                let out = &mut attended[(w * n + i) * c + h * d..(w * n + i) * c + (h + 1) * d];
                for j in 0..n {
                    let a = scores[i * n + j];
                    let vj = &v[j * d..(j + 1) * d];
                    for e in 0..d {
                        out[e] += a * vj[e];
                    }
                }
            }
        }
    }
    let attended = Tensor::new(vec![n_win * n, c], attended)?;
    linear(&attended, p.proj_w, Some(p.proj_b))?.reshape(&[n_win, n, c])
}
