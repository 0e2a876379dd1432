//! Register-blocked multi-channel correlation.
//!
//! Every convolution pass (forward, input gradient and weight gradient, for
//! both the plain and the transposed layer) reduces to
//!
//! ```text
//! out[m][t] += sum_c sum_j w[m][c][j] * x[c][t + j]    for t in 0..out_len
//! ```
//!
//! The same generic body is compiled once per instruction set and picked at
//! run time. Every path uses fused multiply-add, which is correctly rounded
//! whether done in hardware or in software, so all of them produce
//! bit-identical results.

use std::ops::Range;

const LANES: usize = 8;
const ROWS: usize = 4;

/// `w` is laid out `[m][c][taps]`, `out` is `m` rows of `out_len`, and each
/// `x[c]` holds at least `out_len + taps - 1` samples.
#[cfg(test)]
pub(crate) fn correlate_accumulate(w: &[f64], m: usize, taps: usize, x: &[&[f64]], out: &mut [f64], out_len: usize) {
    let support = 0..out_len + taps - 1;
    correlate_accumulate_within(w, m, taps, x, support, out, out_len);
}

/// As [`correlate_accumulate`], for rows known to be zero outside `support`.
/// Taps that only reach zeros are skipped; the result is unchanged.
pub(crate) fn correlate_accumulate_within(
    w: &[f64],
    m: usize,
    taps: usize,
    x: &[&[f64]],
    support: Range<usize>,
    out: &mut [f64],
    out_len: usize,
) {
    let c = x.len();
    debug_assert_eq!(w.len(), m * c * taps);
    debug_assert_eq!(out.len(), m * out_len);
    debug_assert!(x.iter().all(|r| r.len() + 1 >= out_len + taps));
    #[cfg(target_arch = "x86_64")]
    {
        if std::arch::is_x86_feature_detected!("avx512f") && std::arch::is_x86_feature_detected!("fma") {
            // SAFETY: the required instruction set was detected above.
            unsafe { correlate_avx512(w, m, taps, x, support, out, out_len) };
            return;
        }
        if std::arch::is_x86_feature_detected!("avx2") && std::arch::is_x86_feature_detected!("fma") {
            // SAFETY: as above.
            unsafe { correlate_avx2(w, m, taps, x, support, out, out_len) };
            return;
        }
    }
    correlate_generic(w, m, taps, x, support, out, out_len);
}

#[cfg(target_arch = "x86_64")]
#[target_feature(enable = "avx512f,fma")]
unsafe fn correlate_avx512(
    w: &[f64],
    m: usize,
    taps: usize,
    x: &[&[f64]],
    support: Range<usize>,
    out: &mut [f64],
    out_len: usize,
) {
    correlate_generic(w, m, taps, x, support, out, out_len);
}

#[cfg(target_arch = "x86_64")]
#[target_feature(enable = "avx2,fma")]
unsafe fn correlate_avx2(
    w: &[f64],
    m: usize,
    taps: usize,
    x: &[&[f64]],
    support: Range<usize>,
    out: &mut [f64],
    out_len: usize,
) {
    correlate_generic(w, m, taps, x, support, out, out_len);
}

const BLOCK: usize = 2 * LANES;

#[inline(always)]
fn correlate_generic(
    w: &[f64],
    m: usize,
    taps: usize,
    x: &[&[f64]],
    support: Range<usize>,
    out: &mut [f64],
    out_len: usize,
) {
    let blocks = out_len / BLOCK;
    let tail = out_len - blocks * BLOCK;
    // the last partial block runs on zero-extended copies of the inputs
    let tail_rows: Vec<Vec<f64>> = if tail > 0 {
        x.iter()
            .map(|r| {
                let mut row = vec![0.0; BLOCK + taps - 1];
                let avail = &r[blocks * BLOCK..out_len + taps - 1];
                row[..avail.len()].copy_from_slice(avail);
                row
            })
            .collect()
    } else {
        Vec::new()
    };
    let tail_x: Vec<&[f64]> = tail_rows.iter().map(Vec::as_slice).collect();
    let mut m0 = 0;
    while m0 < m {
        let rows = (m - m0).min(ROWS);
        for b in 0..blocks {
            let acc = block_dispatch(rows, w, m0, taps, x, b * BLOCK, tap_range(&support, b * BLOCK, taps));
            for (mm, row) in acc.iter().take(rows).enumerate() {
                let dst = &mut out[(m0 + mm) * out_len + b * BLOCK..][..BLOCK];
                dst.iter_mut().zip(row).for_each(|(d, a)| *d += a);
            }
        }
        if tail > 0 {
            let acc = block_dispatch(rows, w, m0, taps, &tail_x, 0, tap_range(&support, blocks * BLOCK, taps));
            for (mm, row) in acc.iter().take(rows).enumerate() {
                let dst = &mut out[(m0 + mm) * out_len + blocks * BLOCK..][..tail];
                dst.iter_mut().zip(row).for_each(|(d, a)| *d += a);
            }
        }
        m0 += rows;
    }
}

/// Taps that reach the support for some output in `[t0, t0 + BLOCK)`.
fn tap_range(support: &Range<usize>, t0: usize, taps: usize) -> Range<usize> {
    let lo = (support.start + 1).saturating_sub(t0 + BLOCK);
    let hi = support.end.saturating_sub(t0).min(taps);
    lo..hi.max(lo)
}

#[inline(always)]
fn block_dispatch(
    rows: usize,
    w: &[f64],
    m0: usize,
    taps: usize,
    x: &[&[f64]],
    t0: usize,
    active: Range<usize>,
) -> [[f64; BLOCK]; ROWS] {
    let mut out = [[0.0; BLOCK]; ROWS];
    match rows {
        4 => out = block::<4>(w, m0, taps, x, t0, active),
        3 => out[..3].copy_from_slice(&block::<3>(w, m0, taps, x, t0, active.clone())),
        2 => out[..2].copy_from_slice(&block::<2>(w, m0, taps, x, t0, active.clone())),
        _ => out[..1].copy_from_slice(&block::<1>(w, m0, taps, x, t0, active.clone())),
    }
    out
}

#[inline(always)]
fn block<const M: usize>(
    w: &[f64],
    m0: usize,
    taps: usize,
    x: &[&[f64]],
    t0: usize,
    active: Range<usize>,
) -> [[f64; BLOCK]; M] {
    let c = x.len();
    // two independent accumulator sets hide the multiply-add latency
    let mut lo = [[0.0f64; LANES]; M];
    let mut hi = [[0.0f64; LANES]; M];
    let n = active.len();
    for (ci, xr) in x.iter().enumerate() {
        // slicing to the active taps up front lets the loop run unchecked
        let xr = &xr[t0 + active.start..t0 + active.end + BLOCK - 1];
        let wr: [&[f64]; M] = std::array::from_fn(|mm| &w[((m0 + mm) * c + ci) * taps..][active.clone()]);
        assert!(xr.len() == n + BLOCK - 1 && wr.iter().all(|r| r.len() == n));
        for (j, win) in xr.windows(BLOCK).enumerate() {
            let win: &[f64; BLOCK] = win.try_into().expect("block width");
            let (xa, xb) = win.split_at(LANES);
            for mm in 0..M {
                let wv = wr[mm][j];
                for l in 0..LANES {
                    lo[mm][l] = wv.mul_add(xa[l], lo[mm][l]);
                    hi[mm][l] = wv.mul_add(xb[l], hi[mm][l]);
                }
            }
        }
    }
    std::array::from_fn(|mm| std::array::from_fn(|l| if l < LANES { lo[mm][l] } else { hi[mm][l - LANES] }))
}
