//! Show how the shifted-window mask splits a padded token grid into
//! regions, and check that masked attention weights vanish.

use lungdet::swin::{attention_mask, pad_hw, roll, shift_regions, window_attention, window_partition, AttentionWeights};
use lungdet::Tensor;

fn main() -> lungdet::Result<()> {
    let (h, w, ws, shift) = (12, 12, 7, 3);
    let (hp, wp) = (14, 14);
    let labels = shift_regions(hp, wp, ws, shift);
    println!("region labels on the rolled {hp}x{wp} canvas:");
    for row in labels.chunks(wp) {
        println!("  {}", row.iter().map(|l| l.to_string()).collect::<Vec<_>>().join(" "));
    }

    let c = 8;
    let x = Tensor::from_fn(&[h, w, c], |i| ((i * 37) % 17) as f32 / 17.0 - 0.5);
    let windows = window_partition(&roll(&pad_hw(&x, hp, wp)?, -(shift as isize), -(shift as isize))?, ws)?;
    let mask = attention_mask(h, w, ws, shift).expect("shifted grid needs a mask");
    let qkv_w = Tensor::from_fn(&[c, 3 * c], |i| ((i % 11) as f32 - 5.0) * 0.05);
    let zeros3 = Tensor::zeros(&[3 * c]);
    let eye = Tensor::eye(c);
    let zeros = Tensor::zeros(&[c]);
    let p = AttentionWeights {
        heads: 2,
        qkv_w: &qkv_w,
        qkv_b: &zeros3,
        proj_w: &eye,
        proj_b: &zeros,
        rel_bias: None,
        table_window: ws,
    };
    let mut probs = Vec::new();
    window_attention(&windows, ws, &p, Some(&mask), Some(&mut probs))?;
    let n = ws * ws;
    let mut masked = 0;
    let mut worst: f32 = 0.0;
    for (k, &pr) in probs.iter().enumerate() {
        let (win, i, j) = (k / (2 * n * n), (k / n) % n, k % n);
        if mask.data()[(win * n + i) * n + j] != 0.0 {
            masked += 1;
            worst = worst.max(pr);
        }
    }
    println!("{masked} masked pairs, largest attention weight among them {worst:e}");
    Ok(())
}
