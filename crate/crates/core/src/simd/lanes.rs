//! Lane permutations over plain arrays.
//!
//! These are the reference semantics of every data-movement operation. They
//! are generic over the lane type so shuffle plans can be evaluated on
//! symbolic labels as well as on numbers.

use super::{Half, Parity};

#[inline(always)]
pub fn blend<T: Copy, const VL: usize>(a: [T; VL], b: [T; VL], mask: u32) -> [T; VL] {
    let mut out = a;
    for l in 0..VL {
        if mask >> l & 1 == 1 {
            out[l] = b[l];
        }
    }
    out
}

/// Right-circular shift: lane `l` of the result is lane `l - k (mod VL)` of `a`.
#[inline(always)]
pub fn rotate<T: Copy, const VL: usize>(a: [T; VL], k: usize) -> [T; VL] {
    let mut out = a;
    for l in 0..VL {
        out[l] = a[(l + VL - k % VL) % VL];
    }
    out
}

/// Splits both inputs into groups of `2*width` lanes; within each group the
/// result takes the low (or high) `width` lanes of `a` followed by the
/// matching lanes of `b`.
#[inline(always)]
pub fn block_exchange<T: Copy, const VL: usize>(a: [T; VL], b: [T; VL], width: usize, parity: Parity) -> [T; VL] {
    let mut out = a;
    let shift = match parity {
        Parity::Low => 0,
        Parity::High => width,
    };
    let mut g = 0;
    while g < VL {
        for i in 0..width {
            out[g + i] = a[g + shift + i];
            out[g + width + i] = b[g + shift + i];
        }
        g += 2 * width;
    }
    out
}

/// Chosen half of `a` followed by chosen half of `b`.
#[inline(always)]
pub fn half_exchange<T: Copy, const VL: usize>(a: [T; VL], b: [T; VL], sel: (Half, Half)) -> [T; VL] {
    let h = VL / 2;
    let from = |half: Half| match half {
        Half::Low => 0,
        Half::High => h,
    };
    let (sa, sb) = (from(sel.0), from(sel.1));
    let mut out = a;
    for i in 0..h {
        out[i] = a[sa + i];
        out[h + i] = b[sb + i];
    }
    out
}

#[inline(always)]
pub fn interleave<T: Copy, const VL: usize>(a: [T; VL], b: [T; VL], parity: Parity) -> [T; VL] {
    block_exchange(a, b, 1, parity)
}

/// Lanes `k..k+VL` of the concatenation `a ++ b`.
#[inline(always)]
pub fn concat_shift<T: Copy, const VL: usize>(a: [T; VL], b: [T; VL], k: usize) -> [T; VL] {
    let mut out = a;
    for l in 0..VL {
        out[l] = if l + k < VL { a[l + k] } else { b[l + k - VL] };
    }
    out
}
