//! Fixed-width vectors of 64-bit floats and their data-movement operations.
//!
//! `Vector<VL>` is a plain array of lanes. When the crate is compiled with
//! AVX2 (for 4 lanes) or AVX-512F (for 8 lanes) the lane operations and the
//! fused multiply-add are bound to the matching instructions; otherwise the
//! portable definitions in [`lanes`] are used. Both are value-identical for
//! every lane operation. The portable `mul_add` rounds twice.

pub mod lanes;
#[cfg(target_arch = "x86_64")]
pub mod x86;

use std::ops::{Add, Mul};

#[cfg(all(target_arch = "x86_64", any(target_feature = "avx2", target_feature = "avx512f")))]
use std::arch::x86_64::*;

/// Which half of a vector an exchange takes.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Half {
    Low,
    High,
}

/// Even (low) or odd (high) element selection of an interleave.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Parity {
    Low,
    High,
}

/// Latency class of a data-movement instruction.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum LaneClass {
    InLane,
    CrossLane,
}

/// Issue and latency parameters of the data-movement unit.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct LatencyModel {
    pub in_lane_latency: u32,
    pub cross_lane_latency: u32,
    /// Data-movement instructions issued per cycle.
    pub issue_width: u32,
}

impl Default for LatencyModel {
    fn default() -> Self {
        LatencyModel {
            in_lane_latency: 1,
            cross_lane_latency: 3,
            issue_width: 1,
        }
    }
}

impl LatencyModel {
    pub fn latency(&self, class: LaneClass) -> u32 {
        match class {
            LaneClass::InLane => self.in_lane_latency,
            LaneClass::CrossLane => self.cross_lane_latency,
        }
    }
}

/// `VL` lanes of `f64`; lane 0 is the lowest address on load.
#[derive(Clone, Copy, Debug, PartialEq)]
#[repr(C)]
pub struct Vector<const VL: usize>(pub [f64; VL]);

pub type F64x4 = Vector<4>;
pub type F64x8 = Vector<8>;

impl<const VL: usize> Vector<VL> {
    pub const LANES: usize = VL;

    #[inline(always)]
    pub fn splat(v: f64) -> Self {
        Vector([v; VL])
    }

    #[inline(always)]
    pub fn zero() -> Self {
        Self::splat(0.0)
    }

    #[inline(always)]
    pub fn lane(self, l: usize) -> f64 {
        self.0[l]
    }

    /// # Safety
    /// `p` must be valid for reading `VL` consecutive `f64`.
    #[inline(always)]
    pub unsafe fn load(p: *const f64) -> Self {
        Vector(std::ptr::read_unaligned(p as *const [f64; VL]))
    }

    /// # Safety
    /// `p` must be valid for writing `VL` consecutive `f64`.
    #[inline(always)]
    pub unsafe fn store(self, p: *mut f64) {
        std::ptr::write_unaligned(p as *mut [f64; VL], self.0)
    }

    pub fn from_slice(s: &[f64]) -> Self {
        let mut out = Self::zero();
        out.0.copy_from_slice(&s[..VL]);
        out
    }

    #[cfg(all(target_arch = "x86_64", target_feature = "avx2"))]
    #[inline(always)]
    fn m256(self) -> __m256d {
        // SAFETY: only reached when VL == 4.
        unsafe { x86::load4(self.0.as_ptr()) }
    }

    #[cfg(all(target_arch = "x86_64", target_feature = "avx2"))]
    #[inline(always)]
    fn from_m256(v: __m256d) -> Self {
        let mut out = Self::zero();
        unsafe { x86::store4(out.0.as_mut_ptr(), v) };
        out
    }

    #[cfg(all(target_arch = "x86_64", target_feature = "avx512f"))]
    #[inline(always)]
    fn m512(self) -> __m512d {
        // SAFETY: only reached when VL == 8.
        unsafe { x86::load8(self.0.as_ptr()) }
    }

    #[cfg(all(target_arch = "x86_64", target_feature = "avx512f"))]
    #[inline(always)]
    fn from_m512(v: __m512d) -> Self {
        let mut out = Self::zero();
        unsafe { x86::store8(out.0.as_mut_ptr(), v) };
        out
    }

    /// Lane `l` is `b[l]` where bit `l` of `mask` is set, else `a[l]`. In-lane.
    #[inline(always)]
    pub fn blend(self, b: Self, mask: u32) -> Self {
        #[cfg(all(target_arch = "x86_64", target_feature = "avx2"))]
        if VL == 4 {
            return Self::from_m256(unsafe { x86::blend4(self.m256(), b.m256(), mask) });
        }
        #[cfg(all(target_arch = "x86_64", target_feature = "avx512f"))]
        if VL == 8 {
            return Self::from_m512(unsafe { x86::blend8(self.m512(), b.m512(), mask) });
        }
        Vector(lanes::blend(self.0, b.0, mask))
    }

    /// Right-circular lane shift by `k`. Cross-lane.
    #[inline(always)]
    pub fn rotate_lanes(self, k: usize) -> Self {
        #[cfg(all(target_arch = "x86_64", target_feature = "avx2"))]
        if VL == 4 {
            return Self::from_m256(unsafe { x86::rotate4(self.m256(), k) });
        }
        #[cfg(all(target_arch = "x86_64", target_feature = "avx512f"))]
        if VL == 8 {
            return Self::from_m512(unsafe { x86::rotate8(self.m512(), k) });
        }
        Vector(lanes::rotate(self.0, k))
    }

    /// Selected half of `self` followed by selected half of `b`. Cross-lane.
    #[inline(always)]
    pub fn half_exchange(self, b: Self, sel: (Half, Half)) -> Self {
        #[cfg(all(target_arch = "x86_64", target_feature = "avx2"))]
        if VL == 4 {
            return Self::from_m256(unsafe { x86::half_exchange4(self.m256(), b.m256(), sel) });
        }
        #[cfg(all(target_arch = "x86_64", target_feature = "avx512f"))]
        if VL == 8 {
            return Self::from_m512(unsafe { x86::half_exchange8(self.m512(), b.m512(), sel) });
        }
        Vector(lanes::half_exchange(self.0, b.0, sel))
    }

    /// Exchange of 2-lane pairs inside each half. Cross-lane.
    #[inline(always)]
    pub fn pair_exchange(self, b: Self, parity: Parity) -> Self {
        #[cfg(all(target_arch = "x86_64", target_feature = "avx512f"))]
        if VL == 8 {
            return Self::from_m512(unsafe { x86::pair_exchange8(self.m512(), b.m512(), parity) });
        }
        Vector(lanes::block_exchange(self.0, b.0, 2, parity))
    }

    /// Even (low) or odd (high) lanes of `self` and `b`, interleaved. In-lane.
    #[inline(always)]
    pub fn interleave(self, b: Self, parity: Parity) -> Self {
        #[cfg(all(target_arch = "x86_64", target_feature = "avx2"))]
        if VL == 4 {
            return Self::from_m256(unsafe { x86::interleave4(self.m256(), b.m256(), parity) });
        }
        #[cfg(all(target_arch = "x86_64", target_feature = "avx512f"))]
        if VL == 8 {
            return Self::from_m512(unsafe { x86::interleave8(self.m512(), b.m512(), parity) });
        }
        Vector(lanes::interleave(self.0, b.0, parity))
    }

    /// Lanes `k..k+VL` of `self ++ b`.
    #[inline(always)]
    pub fn concat_shift(self, b: Self, k: usize) -> Self {
        #[cfg(all(target_arch = "x86_64", target_feature = "avx512f"))]
        if VL == 8 {
            return Self::from_m512(unsafe { x86::concat_shift8(self.m512(), b.m512(), k) });
        }
        Vector(lanes::concat_shift(self.0, b.0, k))
    }

    /// `self * b + c`, fused when bound to hardware.
    #[inline(always)]
    pub fn mul_add(self, b: Self, c: Self) -> Self {
        #[cfg(all(target_arch = "x86_64", target_feature = "avx2", target_feature = "fma"))]
        if VL == 4 {
            return Self::from_m256(unsafe { x86::fma4(self.m256(), b.m256(), c.m256()) });
        }
        #[cfg(all(target_arch = "x86_64", target_feature = "avx512f"))]
        if VL == 8 {
            return Self::from_m512(unsafe { x86::fma8(self.m512(), b.m512(), c.m512()) });
        }
        self * b + c
    }
}

impl<const VL: usize> Add for Vector<VL> {
    type Output = Self;

    #[inline(always)]
    fn add(self, rhs: Self) -> Self {
        let mut out = self;
        for l in 0..VL {
            out.0[l] += rhs.0[l];
        }
        out
    }
}

impl<const VL: usize> Mul for Vector<VL> {
    type Output = Self;

    #[inline(always)]
    fn mul(self, rhs: Self) -> Self {
        let mut out = self;
        for l in 0..VL {
            out.0[l] *= rhs.0[l];
        }
        out
    }
}

/// Lane-wise `a*b + c`; the free-function form of [`Vector::mul_add`].
#[inline(always)]
pub fn fma<const VL: usize>(a: Vector<VL>, b: Vector<VL>, c: Vector<VL>) -> Vector<VL> {
    a.mul_add(b, c)
}

/// Whether the lane operations of `Vector<VL>` run on hardware vector units
/// in this build.
pub const fn hardware_bound(vl: usize) -> bool {
    match vl {
        4 => cfg!(all(target_arch = "x86_64", target_feature = "avx2")),
        8 => cfg!(all(target_arch = "x86_64", target_feature = "avx512f")),
        _ => false,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn v4(a: [f64; 4]) -> F64x4 {
        Vector(a)
    }

    #[test]
    fn blend_examples() {
        let a = v4([1., 2., 3., 4.]);
        let b = v4([5., 6., 7., 8.]);
        assert_eq!(a.blend(b, 0b0111).0, [5., 6., 7., 4.]);
        assert_eq!(a.blend(b, 0).0, a.0);
        // (W,X,Y,Z) with (D,H,L,P), lanes 0..2 from the second operand
        let wxyz = v4([23., 24., 25., 26.]);
        let dhlp = v4([3., 7., 11., 15.]);
        assert_eq!(wxyz.blend(dhlp, 0b0111).0, [3., 7., 11., 26.]);
    }

    #[test]
    fn rotate_examples() {
        let dhlz = v4([3., 7., 11., 26.]);
        assert_eq!(dhlz.rotate_lanes(1).0, [26., 3., 7., 11.]);
        let a = v4([1., 2., 3., 4.]);
        assert_eq!(a.rotate_lanes(0).0, a.0);
        assert_eq!(a.rotate_lanes(3).0, [2., 3., 4., 1.]);
    }

    #[test]
    fn half_exchange_examples() {
        let abcd = v4([0., 1., 2., 3.]);
        let ijkl = v4([8., 9., 10., 11.]);
        assert_eq!(abcd.half_exchange(ijkl, (Half::Low, Half::Low)).0, [0., 1., 8., 9.]);
        assert_eq!(abcd.half_exchange(ijkl, (Half::High, Half::High)).0, [2., 3., 10., 11.]);
        let a = v4([1., 2., 3., 4.]);
        assert_eq!(a.half_exchange(a, (Half::Low, Half::High)).0, a.0);
    }

    #[test]
    fn interleave_examples() {
        let abij = v4([0., 1., 8., 9.]);
        let efmn = v4([4., 5., 12., 13.]);
        assert_eq!(abij.interleave(efmn, Parity::Low).0, [0., 4., 8., 12.]);
        assert_eq!(abij.interleave(efmn, Parity::High).0, [1., 5., 9., 13.]);
        let x = F64x4::splat(7.0);
        assert_eq!(x.interleave(x, Parity::Low).0, x.0);
    }

    #[test]
    fn fma_examples() {
        let one = F64x4::splat(1.0);
        let two = F64x4::splat(2.0);
        let three = F64x4::splat(3.0);
        assert_eq!(fma(one, two, three).0, [5.0; 4]);
        assert_eq!(fma(three, F64x4::zero(), two).0, two.0);
    }

    #[test]
    fn fma_within_one_ulp_of_scalar() {
        use rand::{RngExt, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        for _ in 0..1000 {
            let mut a = [0.0; 8];
            let mut b = [0.0; 8];
            let mut c = [0.0; 8];
            for l in 0..8 {
                a[l] = rng.random::<f64>();
                b[l] = rng.random::<f64>();
                c[l] = rng.random::<f64>();
            }
            let r = fma(Vector(a), Vector(b), Vector(c));
            for l in 0..8 {
                let s = a[l] * b[l] + c[l];
                let ulp = f64::EPSILON * s.abs();
                assert!((r.0[l] - s).abs() <= ulp, "lane {l}");
            }
        }
    }

    #[test]
    fn rotate_round_trip() {
        let a = Vector([0., 1., 2., 3., 4., 5., 6., 7.]);
        for k in 0..8 {
            assert_eq!(a.rotate_lanes(k).rotate_lanes((8 - k) % 8), a);
        }
    }

    #[test]
    fn interleave_pair_enumerates_every_lane() {
        let a = Vector([0., 1., 2., 3., 4., 5., 6., 7.]);
        let b = Vector([8., 9., 10., 11., 12., 13., 14., 15.]);
        let mut seen: Vec<f64> = a.interleave(b, Parity::Low).0.to_vec();
        seen.extend(a.interleave(b, Parity::High).0);
        seen.sort_by(f64::total_cmp);
        assert_eq!(seen, (0..16).map(|x| x as f64).collect::<Vec<_>>());
    }

    /// Every lane operation agrees between the portable definitions and the
    /// hardware bindings, on labelled lanes, for every immediate.
    #[cfg(target_arch = "x86_64")]
    #[test]
    fn hardware_matches_portable() {
        use std::arch::x86_64::*;
        let halves = [
            (Half::Low, Half::Low),
            (Half::Low, Half::High),
            (Half::High, Half::Low),
            (Half::High, Half::High),
        ];
        if is_x86_feature_detected!("avx2") {
            let a = [0., 1., 2., 3.];
            let b = [10., 11., 12., 13.];
            unsafe {
                let ha = x86::load4(a.as_ptr());
                let hb = x86::load4(b.as_ptr());
                let out = |v: __m256d| {
                    let mut o = [0.0; 4];
                    x86::store4(o.as_mut_ptr(), v);
                    o
                };
                for mask in 0..16 {
                    assert_eq!(out(x86::blend4(ha, hb, mask)), lanes::blend(a, b, mask));
                }
                for k in 0..4 {
                    assert_eq!(out(x86::rotate4(ha, k)), lanes::rotate(a, k));
                }
                for sel in halves {
                    assert_eq!(out(x86::half_exchange4(ha, hb, sel)), lanes::half_exchange(a, b, sel));
                }
                for p in [Parity::Low, Parity::High] {
                    assert_eq!(out(x86::interleave4(ha, hb, p)), lanes::interleave(a, b, p));
                }
            }
        }
        if is_x86_feature_detected!("avx512f") {
            let a = [0., 1., 2., 3., 4., 5., 6., 7.];
            let b = [10., 11., 12., 13., 14., 15., 16., 17.];
            unsafe {
                let ha = x86::load8(a.as_ptr());
                let hb = x86::load8(b.as_ptr());
                let out = |v: __m512d| {
                    let mut o = [0.0; 8];
                    x86::store8(o.as_mut_ptr(), v);
                    o
                };
                for mask in 0..256 {
                    assert_eq!(out(x86::blend8(ha, hb, mask)), lanes::blend(a, b, mask));
                }
                for k in 0..8 {
                    assert_eq!(out(x86::rotate8(ha, k)), lanes::rotate(a, k));
                    assert_eq!(out(x86::concat_shift8(ha, hb, k)), lanes::concat_shift(a, b, k));
                }
                for sel in halves {
                    assert_eq!(out(x86::half_exchange8(ha, hb, sel)), lanes::half_exchange(a, b, sel));
                }
                for p in [Parity::Low, Parity::High] {
                    assert_eq!(out(x86::interleave8(ha, hb, p)), lanes::interleave(a, b, p));
                    assert_eq!(out(x86::pair_exchange8(ha, hb, p)), lanes::block_exchange(a, b, 2, p));
                }
            }
        }
    }
}
