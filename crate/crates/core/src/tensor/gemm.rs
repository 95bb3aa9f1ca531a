//! Single-precision matrix multiply with a packed right-hand side.
//!
//! Every output element is accumulated as `((0 + a0*b0) + a1*b1) + ...`
//! in increasing `k` order, identical to a naive triple loop. Blocking over
//! `k` only spills and reloads the running sum, so results are bitwise equal
//! to the sequential order.

const MR: usize = 4;
const NR: usize = 8;
const KC: usize = 256;
const MC: usize = 64;

/// Right-hand matrix `[k, n]` rearranged into column panels of width `NR`,
/// each panel stored `k`-major. The last panel is zero padded.
pub(crate) struct PackedB {
    k: usize,
    n: usize,
    panels: Vec<f32>,
}

impl PackedB {
    pub(crate) fn pack(b: &[f32], k: usize, n: usize) -> Self {
        debug_assert_eq!(b.len(), k * n);
        let n_panels = n.div_ceil(NR);
        let mut panels = vec![0.0f32; n_panels * k * NR];
        for jp in 0..n_panels {
            let j0 = jp * NR;
            let width = NR.min(n - j0);
            let panel = &mut panels[jp * k * NR..(jp + 1) * k * NR];
            for p in 0..k {
                let src = &b[p * n + j0..p * n + j0 + width];
                panel[p * NR..p * NR + width].copy_from_slice(src);
            }
        }
        PackedB { k, n, panels }
    }

    /// Pack the transpose of a row-major `[n, k]` matrix, i.e. `bᵀ` as `[k, n]`.
    pub(crate) fn pack_transposed(bt: &[f32], n: usize, k: usize) -> Self {
        debug_assert_eq!(bt.len(), k * n);
        let n_panels = n.div_ceil(NR);
        let mut panels = vec![0.0f32; n_panels * k * NR];
        for j in 0..n {
            let jp = j / NR;
            let c = j % NR;
            let panel = &mut panels[jp * k * NR..(jp + 1) * k * NR];
            let row = &bt[j * k..(j + 1) * k];
            for (p, &v) in row.iter().enumerate() {
                panel[p * NR + c] = v;
            }
        }
        PackedB { k, n, panels }
    }

    pub(crate) fn n(&self) -> usize {
        self.n
    }

    pub(crate) fn k(&self) -> usize {
        self.k
    }

    fn panel(&self, jp: usize) -> &[f32] {
        &self.panels[jp * self.k * NR..(jp + 1) * self.k * NR]
    }
}

/// `out[m, n] = a[m, k] · b`, overwriting `out`.
pub(crate) fn gemm(a: &[f32], m: usize, b: &PackedB, out: &mut [f32]) {
    let k = b.k;
    let n = b.n;
    debug_assert_eq!(a.len(), m * k);
    debug_assert_eq!(out.len(), m * n);
    if k == 0 {
        out.fill(0.0);
        return;
    }
    let n_panels = n.div_ceil(NR);
    let mut pc = 0;
    while pc < k {
        let kc = KC.min(k - pc);
        let first = pc == 0;
        let mut ic = 0;
        while ic < m {
            let mc = MC.min(m - ic);
            for jp in 0..n_panels {
                let j0 = jp * NR;
                let width = NR.min(n - j0);
                let bp = &b.panel(jp)[pc * NR..(pc + kc) * NR];
                let mut ir = 0;
                while ir < mc {
                    let i0 = ic + ir;
                    let rows = MR.min(mc - ir);
                    let mut acc = [[0.0f32; NR]; MR];
                    if !first {
                        for r in 0..rows {
                            let o = &out[(i0 + r) * n + j0..(i0 + r) * n + j0 + width];
                            acc[r][..width].copy_from_slice(o);
                        }
                    }
                    if rows == MR {
                        kernel_full(&a[i0 * k + pc..], k, bp, kc, &mut acc);
                    } else {
                        kernel_partial(&a[i0 * k + pc..], k, rows, bp, kc, &mut acc);
                    }
                    for r in 0..rows {
                        let o = &mut out[(i0 + r) * n + j0..(i0 + r) * n + j0 + width];
                        o.copy_from_slice(&acc[r][..width]);
                    }
                    ir += MR;
                }
            }
            ic += mc;
        }
        pc += kc;
    }
}

#[inline(always)]
fn kernel_full(a: &[f32], lda: usize, bp: &[f32], kc: usize, acc: &mut [[f32; NR]; MR]) {
    let a0 = &a[..kc];
    let a1 = &a[lda..lda + kc];
    let a2 = &a[2 * lda..2 * lda + kc];
    let a3 = &a[3 * lda..3 * lda + kc];
    let mut c0 = acc[0];
    let mut c1 = acc[1];
    let mut c2 = acc[2];
    let mut c3 = acc[3];
    for (p, b) in bp.chunks_exact(NR).take(kc).enumerate() {
        let (x0, x1, x2, x3) = (a0[p], a1[p], a2[p], a3[p]);
        for c in 0..NR {
            c0[c] += x0 * b[c];
            c1[c] += x1 * b[c];
            c2[c] += x2 * b[c];
            c3[c] += x3 * b[c];
        }
    }
    acc[0] = c0;
    acc[1] = c1;
    acc[2] = c2;
    acc[3] = c3;
}

fn kernel_partial(
    a: &[f32],
    lda: usize,
    rows: usize,
    bp: &[f32],
    kc: usize,
    acc: &mut [[f32; NR]; MR],
) {
    for (r, row_acc) in acc.iter_mut().enumerate().take(rows) {
        let ar = &a[r * lda..r * lda + kc];
        for (p, b) in bp.chunks_exact(NR).take(kc).enumerate() {
            let x = ar[p];
            for c in 0..NR {
                row_acc[c] += x * b[c];
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn naive(a: &[f32], b: &[f32], m: usize, k: usize, n: usize) -> Vec<f32> {
        let mut out = vec![0.0f32; m * n];
        for i in 0..m {
            for j in 0..n {
                let mut s = 0.0f32;
                for p in 0..k {
                    s += a[i * k + p] * b[p * n + j];
                }
                out[i * n + j] = s;
            }
        }
        out
    }

    #[test]
    fn blocked_matches_sequential_order_bitwise() {
        // k > KC and m > MC exercise the spill/reload path.
        let (m, k, n) = (67, 600, 21);
        let a: Vec<f32> = (0..m * k).map(|i| ((i * 37 % 101) as f32 - 50.0) / 17.0).collect();
        let b: Vec<f32> = (0..k * n).map(|i| ((i * 53 % 97) as f32 - 48.0) / 13.0).collect();
        let packed = PackedB::pack(&b, k, n);
        let mut out = vec![0.0; m * n];
        gemm(&a, m, &packed, &mut out);
        let expect = naive(&a, &b, m, k, n);
        for (x, y) in out.iter().zip(&expect) {
            assert_eq!(x.to_bits(), y.to_bits());
        }
    }

    #[test]
    fn transposed_pack_agrees() {
        let (k, n) = (5, 11);
        let b: Vec<f32> = (0..k * n).map(|i| i as f32).collect();
        let mut bt = vec![0.0; k * n];
        for p in 0..k {
            for j in 0..n {
                bt[j * k + p] = b[p * n + j];
            }
        }
        assert_eq!(PackedB::pack(&b, k, n).panels, PackedB::pack_transposed(&bt, n, k).panels);
    }
}
