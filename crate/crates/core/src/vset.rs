//! The vector set: a `vl x vl` block held as `vl` transposed vectors.

use crate::simd::Vector;

/// `vl` vectors covering `vl*vl` consecutive natural elements starting at
/// `base`, with `rows[j].lane(l)` = element `base + l*vl + j`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct VectorSet<const VL: usize> {
    pub rows: [Vector<VL>; VL],
    pub base: usize,
}

impl<const VL: usize> VectorSet<VL> {
    pub fn splat(v: f64, base: usize) -> Self {
        VectorSet {
            rows: [Vector::splat(v); VL],
            base,
        }
    }

    /// Builds the set from `vl*vl` natural-order values.
    pub fn from_natural(values: &[f64], base: usize) -> Self {
        assert_eq!(values.len(), VL * VL);
        let mut rows = [Vector::zero(); VL];
        for (j, row) in rows.iter_mut().enumerate() {
            for l in 0..VL {
                row.0[l] = values[l * VL + j];
            }
        }
        VectorSet { rows, base }
    }

    /// The covered elements back in natural order.
    pub fn to_natural(&self) -> Vec<f64> {
        let mut out = vec![0.0; VL * VL];
        for (j, row) in self.rows.iter().enumerate() {
            for l in 0..VL {
                out[l * VL + j] = row.0[l];
            }
        }
        out
    }

    /// Reads a stored (block-transposed) set.
    ///
    /// # Safety
    /// `p` must be valid for reading `VL*VL` values.
    #[inline(always)]
    pub unsafe fn load(p: *const f64, base: usize) -> Self {
        let mut rows = [Vector::zero(); VL];
        for (j, row) in rows.iter_mut().enumerate() {
            *row = Vector::load(p.add(j * VL));
        }
        VectorSet { rows, base }
    }

    /// # Safety
    /// `p` must be valid for writing `VL*VL` values.
    #[inline(always)]
    pub unsafe fn store(&self, p: *mut f64) {
        for (j, row) in self.rows.iter().enumerate() {
            row.store(p.add(j * VL));
        }
    }

    /// Lane mask of row `j` selecting the lanes whose natural index is `< limit`.
    #[inline]
    pub fn lanes_below(&self, j: usize, limit: usize) -> u32 {
        let mut m = 0;
        for l in 0..VL {
            if self.base + l * VL + j < limit {
                m |= 1 << l;
            }
        }
        m
    }
}
