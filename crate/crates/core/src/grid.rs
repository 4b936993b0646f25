//! Aligned grid storage with halos and the three data layouts.
//!
//! Storage is row-major with the last dimension unit-stride. Every row has the
//! same pitch: a leading pad that holds the left halo, the interior padded up
//! to a multiple of `vl*vl`, and a trailing pad that holds the right halo.
//! Pitch and leading pad are multiples of `vl`, and the allocation starts on a
//! 64-byte boundary, so every row and every vector set is `vl*8`-byte aligned.
//!
//! Layouts only permute elements inside the unit-stride interior of a row:
//!
//! * `Natural`: element `x` at offset `x`.
//! * `BlockTranspose(vl)`: each aligned block of `vl*vl` elements is stored as
//!   a transposed `vl x vl` matrix, so stored row `j` of a block holds natural
//!   elements `base + l*vl + j` for lanes `l`.
//! * `Dlt(vl)`: the interior of length `n` is viewed as a `vl x (n/vl)` matrix
//!   and globally transposed; natural `q*(n/vl) + c` lives at `c*vl + q`.
//!
//! Halo and padding cells always stay in natural order.

use crate::error::{Error, Result};
use crate::stencil::StencilSpec;

/// Largest unrolling factor the halo is sized for.
pub const K_MAX: usize = 2;

const ALIGN_BYTES: usize = 64;

/// Data layout tag of a grid.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Layout {
    Natural,
    BlockTranspose(usize),
    Dlt(usize),
}

impl Layout {
    pub fn name(self) -> &'static str {
        match self {
            Layout::Natural => "natural",
            Layout::BlockTranspose(_) => "block-transpose",
            Layout::Dlt(_) => "dlt",
        }
    }
}

/// Half-open box of interior coordinates, one range per dimension.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Region {
    pub d: usize,
    pub lo: [isize; 3],
    pub hi: [isize; 3],
}

impl Region {
    pub fn is_empty(&self) -> bool {
        (0..self.d).any(|k| self.lo[k] >= self.hi[k])
    }

    pub fn len(&self) -> usize {
        if self.is_empty() {
            return 0;
        }
        (0..self.d).map(|k| (self.hi[k] - self.lo[k]) as usize).product()
    }

    /// Outer (non unit-stride) coordinates of every row crossing the region.
    pub fn rows(&self) -> Vec<[isize; 2]> {
        let mut out = Vec::new();
        if self.is_empty() {
            return out;
        }
        match self.d {
            1 => out.push([0, 0]),
            2 => {
                for a in self.lo[0]..self.hi[0] {
                    out.push([a, 0]);
                }
            }
            _ => {
                for a in self.lo[0]..self.hi[0] {
                    for b in self.lo[1]..self.hi[1] {
                        out.push([a, b]);
                    }
                }
            }
        }
        out
    }

    /// Unit-stride range.
    pub fn unit(&self) -> (isize, isize) {
        (self.lo[self.d - 1], self.hi[self.d - 1])
    }
}

/// Shape and addressing of a grid, independent of its storage.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Geometry {
    pub(crate) d: usize,
    pub(crate) dims: [usize; 3],
    pub(crate) halo: [usize; 3],
    pub(crate) vl: usize,
    pub(crate) lead: usize,
    pub(crate) padded: usize,
    pub(crate) pitch: usize,
    pub(crate) layout: Layout,
    pub(crate) rows_total: usize,
    /// Row strides of the outer dimensions, in rows.
    pub(crate) row_stride: [usize; 2],
    pub(crate) len: usize,
}

fn round_up(x: usize, m: usize) -> Option<usize> {
    x.checked_add(m - 1).map(|v| v / m * m)
}

impl Geometry {
    pub fn new(d: usize, r: usize, dims: &[usize], layout: Layout, vl: usize) -> Result<Self> {
        if vl != 4 && vl != 8 {
            return Err(Error::UnsupportedVectorLength(vl));
        }
        if dims.len() != d || dims.iter().any(|&n| n == 0) {
            return Err(Error::InvalidExtents { dims: dims.to_vec(), d });
        }
        match layout {
            Layout::Natural => {}
            Layout::BlockTranspose(v) | Layout::Dlt(v) if v != vl => {
                return Err(Error::InvalidLayout {
                    layout,
                    reason: format!("layout lane count {v} differs from grid vl {vl}"),
                })
            }
            Layout::Dlt(v) if dims[d - 1] % v != 0 => {
                return Err(Error::InvalidLayout {
                    layout,
                    reason: format!("unit-stride extent {} is not divisible by {v}", dims[d - 1]),
                })
            }
            _ => {}
        }
        let mut g = Geometry {
            d,
            dims: [0; 3],
            halo: [0; 3],
            vl,
            lead: 0,
            padded: 0,
            pitch: 0,
            layout,
            rows_total: 1,
            row_stride: [0; 2],
            len: 0,
        };
        g.dims[..d].copy_from_slice(dims);
        for k in 0..d {
            g.halo[k] = if k == d - 1 { r * K_MAX } else { r };
        }
        let hx = g.halo[d - 1];
        let nx = dims[d - 1];
        g.lead = round_up(hx, vl).ok_or(Error::SizeOverflow)?.max(vl);
        g.padded = round_up(nx, vl * vl).ok_or(Error::SizeOverflow)?;
        g.pitch = g
            .lead
            .checked_add(g.padded)
            .and_then(|p| p.checked_add(g.lead))
            .ok_or(Error::SizeOverflow)?;
        let outer: Vec<usize> = (0..d - 1)
            .map(|k| dims[k].checked_add(2 * g.halo[k]).ok_or(Error::SizeOverflow))
            .collect::<Result<_>>()?;
        match d {
            2 => g.row_stride = [1, 0],
            3 => g.row_stride = [outer[1], 1],
            _ => {}
        }
        g.rows_total = outer
            .iter()
            .try_fold(1usize, |acc, &e| acc.checked_mul(e))
            .ok_or(Error::SizeOverflow)?;
        g.len = g.rows_total.checked_mul(g.pitch).ok_or(Error::SizeOverflow)?;
        if g.len.checked_mul(8).is_none() || g.len > isize::MAX as usize / 8 {
            return Err(Error::SizeOverflow);
        }
        Ok(g)
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims[..self.d]
    }

    pub fn halo(&self) -> &[usize] {
        &self.halo[..self.d]
    }

    pub fn vl(&self) -> usize {
        self.vl
    }

    pub fn layout(&self) -> Layout {
        self.layout
    }

    /// Unit-stride interior extent.
    pub fn nx(&self) -> usize {
        self.dims[self.d - 1]
    }

    /// Unit-stride extent padded to a multiple of `vl*vl`.
    pub fn padded(&self) -> usize {
        self.padded
    }

    pub fn pitch(&self) -> usize {
        self.pitch
    }

    /// Offset of unit-stride element 0 from the start of its row.
    pub fn lead(&self) -> usize {
        self.lead
    }

    pub fn blocks_per_row(&self) -> usize {
        self.padded / (self.vl * self.vl)
    }

    pub fn interior_points(&self) -> usize {
        self.dims().iter().product()
    }

    pub fn full_region(&self) -> Region {
        let mut hi = [0isize; 3];
        for k in 0..self.d {
            hi[k] = self.dims[k] as isize;
        }
        Region { d: self.d, lo: [0; 3], hi }
    }

    /// Storage row index of the row with the given outer interior coordinates.
    #[inline]
    pub fn row_index(&self, outer: [isize; 2]) -> usize {
        let mut row = 0isize;
        for k in 0..self.d - 1 {
            row += (outer[k] + self.halo[k] as isize) * self.row_stride[k] as isize;
        }
        row as usize
    }

    /// Signed row distance of a neighbor offset.
    #[inline]
    pub fn row_delta(&self, off: &[isize; 3]) -> isize {
        (0..self.d - 1).map(|k| off[k] * self.row_stride[k] as isize).sum()
    }

    /// Position within a row of unit-stride natural index `x`.
    #[inline]
    pub fn unit_offset(&self, x: isize) -> usize {
        let lead = self.lead as isize;
        match self.layout {
            Layout::BlockTranspose(vl) if x >= 0 && (x as usize) < self.padded => {
                let x = x as usize;
                let bs = vl * vl;
                let (blk, o) = (x / bs, x % bs);
                self.lead + blk * bs + (o % vl) * vl + o / vl
            }
            Layout::Dlt(vl) if x >= 0 && (x as usize) < self.nx() => {
                let m = self.nx() / vl;
                let x = x as usize;
                self.lead + (x % m) * vl + x / m
            }
            _ => (lead + x) as usize,
        }
    }

    /// Storage index of a cell given by interior coordinates (halo cells have
    /// negative or `>= n` coordinates).
    #[inline]
    pub fn index(&self, coords: &[isize]) -> usize {
        let mut outer = [0isize; 2];
        outer[..self.d - 1].copy_from_slice(&coords[..self.d - 1]);
        self.row_index(outer) * self.pitch + self.unit_offset(coords[self.d - 1])
    }

    pub(crate) fn with_layout(mut self, layout: Layout) -> Self {
        self.layout = layout;
        self
    }
}

/// A grid of 64-bit floats with halos, an alignment guarantee and a layout tag.
pub struct GridBuffer {
    storage: Vec<f64>,
    start: usize,
    geom: Geometry,
}

impl Clone for GridBuffer {
    fn clone(&self) -> Self {
        let mut out = GridBuffer::zeroed(self.geom);
        out.as_mut_slice().copy_from_slice(self.as_slice());
        out
    }
}

impl std::fmt::Debug for GridBuffer {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("GridBuffer")
            .field("dims", &self.geom.dims())
            .field("layout", &self.geom.layout)
            .field("vl", &self.geom.vl)
            .finish()
    }
}

impl GridBuffer {
    pub fn zeroed(geom: Geometry) -> Self {
        let extra = ALIGN_BYTES / std::mem::size_of::<f64>();
        let storage = vec![0.0f64; geom.len + extra];
        let misalign = storage.as_ptr() as usize % ALIGN_BYTES;
        let start = if misalign == 0 {
            0
        } else {
            (ALIGN_BYTES - misalign) / std::mem::size_of::<f64>()
        };
        GridBuffer { storage, start, geom }
    }

    pub fn geometry(&self) -> &Geometry {
        &self.geom
    }

    pub fn layout(&self) -> Layout {
        self.geom.layout
    }

    pub fn vl(&self) -> usize {
        self.geom.vl
    }

    pub fn dims(&self) -> &[usize] {
        self.geom.dims()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.storage[self.start..self.start + self.geom.len]
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        let len = self.geom.len;
        &mut self.storage[self.start..self.start + len]
    }

    pub(crate) fn as_ptr(&self) -> *const f64 {
        self.as_slice().as_ptr()
    }

    pub(crate) fn as_mut_ptr(&mut self) -> *mut f64 {
        self.as_mut_slice().as_mut_ptr()
    }

    pub(crate) fn set_layout(&mut self, layout: Layout) {
        self.geom = self.geom.with_layout(layout);
    }

    /// Value of the cell at interior coordinates `coords` (halo allowed).
    pub fn get(&self, coords: &[isize]) -> f64 {
        self.as_slice()[self.geom.index(coords)]
    }

    pub fn set(&mut self, coords: &[isize], v: f64) {
        let i = self.geom.index(coords);
        self.as_mut_slice()[i] = v;
    }

    /// Calls `f` with the coordinates of every interior and halo cell.
    pub fn for_each_cell(&self, mut f: impl FnMut(&[isize], bool)) {
        let g = &self.geom;
        let mut lo = [0isize; 3];
        let mut hi = [1isize; 3];
        for k in 0..g.d {
            lo[k] = -(g.halo[k] as isize);
            hi[k] = (g.dims[k] + g.halo[k]) as isize;
        }
        let mut c = lo;
        loop {
            let interior = (0..g.d).all(|k| c[k] >= 0 && c[k] < g.dims[k] as isize);
            f(&c[..g.d], interior);
            let mut k = g.d;
            loop {
                if k == 0 {
                    return;
                }
                k -= 1;
                c[k] += 1;
                if c[k] < hi[k] {
                    break;
                }
                c[k] = lo[k];
            }
        }
    }

    /// Fills interior and halo from a generator called in natural order.
    pub fn fill_with(&mut self, mut f: impl FnMut(&[isize], bool) -> f64) {
        let mut cells = Vec::new();
        self.for_each_cell(|c, interior| cells.push((c.to_vec(), interior)));
        for (c, interior) in cells {
            let v = f(&c, interior);
            self.set(&c, v);
        }
    }

    /// Interior values in natural row-major order, whatever the layout.
    pub fn interior_values(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.geom.interior_points());
        self.for_each_cell(|c, interior| {
            if interior {
                out.push(self.get(c));
            }
        });
        out
    }

    /// Halo values in natural order, whatever the layout.
    pub fn halo_values(&self) -> Vec<f64> {
        let mut out = Vec::new();
        self.for_each_cell(|c, interior| {
            if !interior {
                out.push(self.get(c));
            }
        });
        out
    }

    pub fn same_shape(&self, other: &GridBuffer) -> bool {
        self.geom.with_layout(Layout::Natural) == other.geom.with_layout(Layout::Natural)
    }
}

/// Allocates a zeroed grid for `spec` with halo `r*K_MAX` on the unit-stride
/// dimension and `r` elsewhere.
pub fn alloc_grid(spec: &StencilSpec, dims: &[usize], layout: Layout, vl: usize) -> Result<GridBuffer> {
    let geom = Geometry::new(spec.d(), spec.r(), dims, layout, vl)?;
    Ok(GridBuffer::zeroed(geom))
}

/// Largest `|a-b| / |b|` over the interiors (0 when both are 0).
pub fn max_relative_error(actual: &GridBuffer, expected: &GridBuffer) -> f64 {
    let a = actual.interior_values();
    let b = expected.interior_values();
    assert_eq!(a.len(), b.len(), "grids differ in size");
    a.iter()
        .zip(&b)
        .map(|(&x, &y)| {
            let diff = (x - y).abs();
            if diff == 0.0 {
                0.0
            } else {
                diff / y.abs().max(f64::MIN_POSITIVE)
            }
        })
        .fold(0.0, f64::max)
}

/// Raw view used by kernels that write disjoint parts of a grid from several
/// execution streams.
#[derive(Clone, Copy, Debug)]
pub(crate) struct GridPtr {
    pub base: *mut f64,
    pub geom: Geometry,
}

// SAFETY: a GridPtr is only dereferenced under the disjoint-write contract of
// the tile schedules (see `tiling`), or while its owner is exclusively borrowed.
unsafe impl Send for GridPtr {}
unsafe impl Sync for GridPtr {}

impl GridPtr {
    pub fn new(grid: &mut GridBuffer) -> Self {
        GridPtr {
            base: grid.as_mut_ptr(),
            geom: grid.geom,
        }
    }

    pub fn read_only(grid: &GridBuffer) -> Self {
        GridPtr {
            base: grid.as_ptr() as *mut f64,
            geom: grid.geom,
        }
    }

    /// Pointer to the start of the storage row holding outer coordinates `outer`.
    #[inline]
    pub fn row(&self, outer: [isize; 2]) -> *mut f64 {
        // SAFETY: row_index is within rows_total for coordinates inside the halo box.
        unsafe { self.base.add(self.geom.row_index(outer) * self.geom.pitch) }
    }

    #[inline]
    pub unsafe fn get(&self, row: *const f64, x: isize) -> f64 {
        *row.add(self.geom.unit_offset(x))
    }

    #[inline]
    pub unsafe fn set(&self, row: *mut f64, x: isize, v: f64) {
        *row.add(self.geom.unit_offset(x)) = v;
    }
}
