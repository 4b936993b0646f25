//! AVX2 (4 lanes) and AVX-512F (8 lanes) bindings of the lane operations.
//!
//! Callers must make sure the target features are available, either because
//! the crate is compiled with them or after runtime detection.

use std::arch::x86_64::*;

use super::{Half, Parity};

macro_rules! imm4 {
    ($f:ident, $sel:expr, $($args:expr),+) => {
        match $sel & 0xF {
            0 => $f::<0>($($args),+),
            1 => $f::<1>($($args),+),
            2 => $f::<2>($($args),+),
            3 => $f::<3>($($args),+),
            4 => $f::<4>($($args),+),
            5 => $f::<5>($($args),+),
            6 => $f::<6>($($args),+),
            7 => $f::<7>($($args),+),
            8 => $f::<8>($($args),+),
            9 => $f::<9>($($args),+),
            10 => $f::<10>($($args),+),
            11 => $f::<11>($($args),+),
            12 => $f::<12>($($args),+),
            13 => $f::<13>($($args),+),
            14 => $f::<14>($($args),+),
            _ => $f::<15>($($args),+),
        }
    };
}

#[inline]
#[target_feature(enable = "avx2")]
pub unsafe fn load4(p: *const f64) -> __m256d {
    _mm256_loadu_pd(p)
}

#[inline]
#[target_feature(enable = "avx2")]
pub unsafe fn store4(p: *mut f64, v: __m256d) {
    _mm256_storeu_pd(p, v)
}

#[inline]
#[target_feature(enable = "avx2")]
pub unsafe fn blend4(a: __m256d, b: __m256d, mask: u32) -> __m256d {
    imm4!(_mm256_blend_pd, mask, a, b)
}

#[inline]
#[target_feature(enable = "avx2")]
pub unsafe fn rotate4(a: __m256d, k: usize) -> __m256d {
    match k % 4 {
        0 => a,
        1 => _mm256_permute4x64_pd::<0x93>(a),
        2 => _mm256_permute4x64_pd::<0x4E>(a),
        _ => _mm256_permute4x64_pd::<0x39>(a),
    }
}

#[inline]
#[target_feature(enable = "avx2")]
pub unsafe fn half_exchange4(a: __m256d, b: __m256d, sel: (Half, Half)) -> __m256d {
    match sel {
        (Half::Low, Half::Low) => _mm256_permute2f128_pd::<0x20>(a, b),
        (Half::High, Half::High) => _mm256_permute2f128_pd::<0x31>(a, b),
        (Half::Low, Half::High) => _mm256_permute2f128_pd::<0x30>(a, b),
        (Half::High, Half::Low) => _mm256_permute2f128_pd::<0x21>(a, b),
    }
}

#[inline]
#[target_feature(enable = "avx2")]
pub unsafe fn interleave4(a: __m256d, b: __m256d, parity: Parity) -> __m256d {
    match parity {
        Parity::Low => _mm256_unpacklo_pd(a, b),
        Parity::High => _mm256_unpackhi_pd(a, b),
    }
}

#[inline]
#[target_feature(enable = "avx2,fma")]
pub unsafe fn fma4(a: __m256d, b: __m256d, c: __m256d) -> __m256d {
    _mm256_fmadd_pd(a, b, c)
}

#[inline]
#[target_feature(enable = "avx512f")]
pub unsafe fn load8(p: *const f64) -> __m512d {
    _mm512_loadu_pd(p)
}

#[inline]
#[target_feature(enable = "avx512f")]
pub unsafe fn store8(p: *mut f64, v: __m512d) {
    _mm512_storeu_pd(p, v)
}

#[inline]
#[target_feature(enable = "avx512f")]
unsafe fn index8(idx: [i64; 8]) -> __m512i {
    _mm512_loadu_si512(idx.as_ptr() as *const _)
}

#[inline]
#[target_feature(enable = "avx512f")]
pub unsafe fn blend8(a: __m512d, b: __m512d, mask: u32) -> __m512d {
    _mm512_mask_blend_pd(mask as u8, a, b)
}

#[inline]
#[target_feature(enable = "avx512f")]
pub unsafe fn rotate8(a: __m512d, k: usize) -> __m512d {
    let mut idx = [0i64; 8];
    for (l, v) in idx.iter_mut().enumerate() {
        *v = ((l + 8 - k % 8) % 8) as i64;
    }
    _mm512_permutexvar_pd(index8(idx), a)
}

#[inline]
#[target_feature(enable = "avx512f")]
pub unsafe fn half_exchange8(a: __m512d, b: __m512d, sel: (Half, Half)) -> __m512d {
    match sel {
        (Half::Low, Half::Low) => _mm512_shuffle_f64x2::<0x44>(a, b),
        (Half::High, Half::High) => _mm512_shuffle_f64x2::<0xEE>(a, b),
        (Half::Low, Half::High) => _mm512_shuffle_f64x2::<0xE4>(a, b),
        (Half::High, Half::Low) => _mm512_shuffle_f64x2::<0x4E>(a, b),
    }
}

#[inline]
#[target_feature(enable = "avx512f")]
pub unsafe fn pair_exchange8(a: __m512d, b: __m512d, parity: Parity) -> __m512d {
    let idx = match parity {
        Parity::Low => [0, 1, 8, 9, 4, 5, 12, 13],
        Parity::High => [2, 3, 10, 11, 6, 7, 14, 15],
    };
    _mm512_permutex2var_pd(a, index8(idx), b)
}

#[inline]
#[target_feature(enable = "avx512f")]
pub unsafe fn interleave8(a: __m512d, b: __m512d, parity: Parity) -> __m512d {
    match parity {
        Parity::Low => _mm512_unpacklo_pd(a, b),
        Parity::High => _mm512_unpackhi_pd(a, b),
    }
}

#[inline]
#[target_feature(enable = "avx512f")]
pub unsafe fn concat_shift8(a: __m512d, b: __m512d, k: usize) -> __m512d {
    let mut idx = [0i64; 8];
    for (l, v) in idx.iter_mut().enumerate() {
        *v = (l + k) as i64;
    }
    _mm512_permutex2var_pd(a, index8(idx), b)
}

#[inline]
#[target_feature(enable = "avx512f")]
pub unsafe fn fma8(a: __m512d, b: __m512d, c: __m512d) -> __m512d {
    _mm512_fmadd_pd(a, b, c)
}
