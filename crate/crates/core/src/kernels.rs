//! Single-step sweeps: the scalar oracle and the four vectorized methods, plus
//! the vector-set primitives the multi-step pipeline and the tiles reuse.
//!
//! Every sweep reads `src` and writes the interior of `dst`; halo cells are
//! never written. Vectorized methods accumulate in weight order with fused
//! multiply-adds, so they differ from the oracle only by rounding.

use std::fmt;
use std::iter::Sum;
use std::ops::AddAssign;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::exec;
use crate::grid::{GridBuffer, GridPtr, Layout, Region};
use crate::simd::Vector;
use crate::stencil::StencilSpec;
use crate::vset::VectorSet;

/// The single-step methods.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Method {
    Scalar,
    Multiload,
    Reorg,
    Dlt,
    Transpose,
}

impl Method {
    pub const ALL: [Method; 5] = [
        Method::Scalar,
        Method::Multiload,
        Method::Reorg,
        Method::Dlt,
        Method::Transpose,
    ];

    pub fn label(self) -> &'static str {
        match self {
            Method::Scalar => "scalar",
            Method::Multiload => "multiload",
            Method::Reorg => "reorg",
            Method::Dlt => "dlt",
            Method::Transpose => "transpose",
        }
    }

    /// Layout a grid must be in for this method.
    pub fn layout(self, vl: usize) -> Layout {
        match self {
            Method::Dlt => Layout::Dlt(vl),
            Method::Transpose => Layout::BlockTranspose(vl),
            _ => Layout::Natural,
        }
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.label().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::Usage(format!("unknown method `{s}` (expected scalar, multiload, reorg, dlt or transpose)")))
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

/// A method together with the vector length it runs at.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct KernelMethod {
    pub tag: Method,
    pub vl: usize,
}

impl KernelMethod {
    pub fn new(tag: Method, vl: usize) -> Result<Self> {
        if vl != 4 && vl != 8 {
            return Err(Error::UnsupportedVectorLength(vl));
        }
        Ok(KernelMethod { tag, vl })
    }

    pub fn layout(&self) -> Layout {
        self.tag.layout(self.vl)
    }
}

/// Operation meters. Vector loads and stores move `vl` elements each.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct Counters {
    pub vector_loads: u64,
    pub vector_stores: u64,
    pub scalar_loads: u64,
    pub scalar_stores: u64,
    /// Register data-movement operations (blend, rotate, concatenate-shift).
    pub reorg_ops: u64,
    /// Dependency vectors built from two registers.
    pub assembled: u64,
    /// Vector sets processed (one per set per time level).
    pub vector_sets: u64,
    pub point_updates: u64,
}

impl Counters {
    pub fn element_loads(&self, vl: usize) -> u64 {
        self.vector_loads * vl as u64 + self.scalar_loads
    }

    pub fn element_stores(&self, vl: usize) -> u64 {
        self.vector_stores * vl as u64 + self.scalar_stores
    }
}

impl AddAssign for Counters {
    fn add_assign(&mut self, o: Self) {
        self.vector_loads += o.vector_loads;
        self.vector_stores += o.vector_stores;
        self.scalar_loads += o.scalar_loads;
        self.scalar_stores += o.scalar_stores;
        self.reorg_ops += o.reorg_ops;
        self.assembled += o.assembled;
        self.vector_sets += o.vector_sets;
        self.point_updates += o.point_updates;
    }
}

impl Sum for Counters {
    fn sum<I: Iterator<Item = Counters>>(iter: I) -> Self {
        let mut c = Counters::default();
        for x in iter {
            c += x;
        }
        c
    }
}

/// Taps reading from one neighboring row (same outer offset).
#[derive(Clone, Debug, PartialEq)]
pub struct TapRow {
    /// Offset in the outer (non unit-stride) dimensions.
    pub outer: [isize; 2],
    /// `(dx, weight)` along the unit-stride dimension, ascending `dx`.
    pub taps: Vec<(isize, f64)>,
    /// Largest `|dx|` of the row.
    pub reach: usize,
}

/// The weight table regrouped by source row, in the spec's summation order.
#[derive(Clone, Debug, PartialEq)]
pub struct TapPlan {
    pub d: usize,
    pub r: usize,
    pub rows: Vec<TapRow>,
    /// `(tap row, dx)` of every weight, in summation order.
    pub flat: Vec<(usize, isize)>,
    pub weights: Vec<f64>,
}

impl TapPlan {
    pub fn new(spec: &StencilSpec) -> Self {
        let d = spec.d();
        let mut rows: Vec<TapRow> = Vec::new();
        let mut flat = Vec::new();
        let mut weights = Vec::new();
        for (off, w) in spec.weights() {
            let mut outer = [0isize; 2];
            outer[..d - 1].copy_from_slice(&off[..d - 1]);
            let dx = off[d - 1];
            if rows.last().map(|r| r.outer) != Some(outer) {
                rows.push(TapRow {
                    outer,
                    taps: Vec::new(),
                    reach: 0,
                });
            }
            let t = rows.len() - 1;
            let row = &mut rows[t];
            row.taps.push((dx, *w));
            row.reach = row.reach.max(dx.unsigned_abs());
            flat.push((t, dx));
            weights.push(*w);
        }
        TapPlan {
            d,
            r: spec.r(),
            rows,
            flat,
            weights,
        }
    }

    /// Index of the tap row reading the updated row itself.
    pub fn center_row(&self) -> usize {
        self.rows.iter().position(|r| r.outer == [0, 0]).expect("zero offset present")
    }
}

/// Largest order the vectorized methods support.
pub(crate) const EXT: usize = 2;
pub(crate) const MAX_TAP_ROWS: usize = 9;
pub(crate) const EXT_LEN: usize = 12;

/// Rows `-EXT .. VL+EXT` of one tap row around a vector set; index `EXT + i`.
pub(crate) type Ext<const VL: usize> = [Vector<VL>; EXT_LEN];

/// Tap plan with weights splatted to vectors.
#[derive(Clone)]
pub(crate) struct Kern<const VL: usize> {
    pub plan: TapPlan,
    pub wv: Vec<Vector<VL>>,
}

impl<const VL: usize> Kern<VL> {
    pub fn new(spec: &StencilSpec) -> Result<Self> {
        let plan = TapPlan::new(spec);
        if plan.r > EXT || plan.rows.len() > MAX_TAP_ROWS {
            return Err(Error::InvalidCombination {
                method: "vectorized".into(),
                what: format!("stencil `{}` of order {}", spec.name(), plan.r),
            });
        }
        let wv = plan.weights.iter().map(|&w| Vector::splat(w)).collect();
        Ok(Kern { plan, wv })
    }
}

#[inline(always)]
pub(crate) fn fmadd(a: f64, b: f64, c: f64) -> f64 {
    if cfg!(target_feature = "fma") {
        a.mul_add(b, c)
    } else {
        a * b + c
    }
}

#[inline(always)]
pub(crate) fn add_outer(a: [isize; 2], b: [isize; 2]) -> [isize; 2] {
    [a[0] + b[0], a[1] + b[1]]
}

/// Left dependency of row 0: blend the last lane of the left neighbor's last
/// row into the current last row, then rotate right by one lane.
#[inline(always)]
pub fn assemble_left<const VL: usize>(prev_last: Vector<VL>, cur_last: Vector<VL>) -> Vector<VL> {
    prev_last.blend(cur_last, (1u32 << (VL - 1)) - 1).rotate_lanes(1)
}

/// Right dependency of the last row: blend lane 0 of the right neighbor's
/// first row into the current first row, then rotate left by one lane.
#[inline(always)]
pub fn assemble_right<const VL: usize>(cur_first: Vector<VL>, next_first: Vector<VL>) -> Vector<VL> {
    cur_first.blend(next_first, 1).rotate_lanes(VL - 1)
}

/// Fills the extended rows of one tap row. `prev_tail[s-1]` is row `VL-s` of
/// the left neighbor, `next_head[s-1]` row `s-1` of the right neighbor.
#[inline(always)]
pub(crate) fn fill_ext<const VL: usize>(
    ext: &mut Ext<VL>,
    cur: &[Vector<VL>; VL],
    prev_tail: &[Vector<VL>; EXT],
    next_head: &[Vector<VL>; EXT],
    reach: usize,
) {
    ext[EXT..EXT + VL].copy_from_slice(cur);
    for s in 1..=reach {
        ext[EXT - s] = assemble_left(prev_tail[s - 1], cur[VL - s]);
        ext[EXT + VL - 1 + s] = assemble_right(cur[s - 1], next_head[s - 1]);
    }
}

/// One time step of the `VL` rows given the extended rows of every tap row.
#[inline(always)]
pub(crate) fn compute_rows<const VL: usize>(k: &Kern<VL>, ext: &[Ext<VL>]) -> [Vector<VL>; VL] {
    let mut out = [Vector::zero(); VL];
    let flat = &k.plan.flat;
    for (j, o) in out.iter_mut().enumerate() {
        let at = |i: usize| {
            let (t, dx) = flat[i];
            ext[t][(EXT as isize + j as isize + dx) as usize]
        };
        let mut acc = k.wv[0] * at(0);
        for i in 1..flat.len() {
            acc = k.wv[i].mul_add(at(i), acc);
        }
        *o = acc;
    }
    out
}

/// `compute_rows` for a 1D stencil with `N` taps at `-N/2..=N/2`, which is
/// the order the tap plan sums them in.
#[inline(always)]
pub(crate) fn rows_1d<const VL: usize, const N: usize>(w: &[Vector<VL>; N], e: &Ext<VL>) -> [Vector<VL>; VL] {
    let mut out = [Vector::zero(); VL];
    for (j, o) in out.iter_mut().enumerate() {
        let mut acc = w[0] * e[EXT + j - N / 2];
        for i in 1..N {
            acc = w[i].mul_add(e[EXT + j + i - N / 2], acc);
        }
        *o = acc;
    }
    out
}

/// Tap count of a 1D plan with a monomorphized fast path.
pub(crate) fn fast_taps<const VL: usize>(k: &Kern<VL>) -> Option<usize> {
    (k.plan.d == 1 && matches!(k.plan.flat.len(), 3 | 5)).then_some(k.plan.flat.len())
}

pub(crate) fn weights_1d<const VL: usize, const N: usize>(k: &Kern<VL>) -> [Vector<VL>; N] {
    std::array::from_fn(|i| k.wv[i])
}

#[inline(always)]
pub(crate) fn tail_of<const VL: usize>(rows: &[Vector<VL>; VL]) -> [Vector<VL>; EXT] {
    let mut t = [Vector::zero(); EXT];
    for (s, v) in t.iter_mut().enumerate() {
        if s < VL {
            *v = rows[VL - 1 - s];
        }
    }
    t
}

#[inline(always)]
pub(crate) fn head_of<const VL: usize>(rows: &[Vector<VL>; VL]) -> [Vector<VL>; EXT] {
    let mut h = [Vector::zero(); EXT];
    h.copy_from_slice(&rows[..EXT]);
    h
}

/// Dependencies of one vector set, indexed like [`TapPlan::rows`].
#[derive(Clone, Debug)]
pub struct VsDeps<const VL: usize> {
    /// Co-located rows of each tap row's vector set; `None` for the set's own row.
    pub sets: Vec<Option<[Vector<VL>; VL]>>,
    /// Assembled left neighbors; entry `s-1` sits at row offset `-s`.
    pub left: Vec<Vec<Vector<VL>>>,
    /// Assembled right neighbors; entry `s-1` sits at row offset `VL-1+s`.
    pub right: Vec<Vec<Vector<VL>>>,
}

impl<const VL: usize> VsDeps<VL> {
    /// Dependencies of a 1D set from its two neighbor sets.
    pub fn one_d(prev: &VectorSet<VL>, cur: &VectorSet<VL>, next: &VectorSet<VL>, r: usize) -> Self {
        let left = (1..=r).map(|s| assemble_left(prev.rows[VL - s], cur.rows[VL - s])).collect();
        let right = (1..=r).map(|s| assemble_right(cur.rows[s - 1], next.rows[s - 1])).collect();
        VsDeps {
            sets: vec![None],
            left: vec![left],
            right: vec![right],
        }
    }
}

/// Advances one vector set by one time step.
pub fn vs_step<const VL: usize>(vs: &VectorSet<VL>, deps: &VsDeps<VL>, spec: &StencilSpec) -> Result<VectorSet<VL>> {
    let k = Kern::<VL>::new(spec)?;
    let plan = &k.plan;
    if plan.r > VL {
        return Err(Error::InvalidCombination {
            method: "transpose".into(),
            what: format!("order {} above the vector length", plan.r),
        });
    }
    let mut ext = vec![[Vector::zero(); EXT_LEN]; plan.rows.len()];
    for (t, row) in plan.rows.iter().enumerate() {
        let rows = match deps.sets.get(t).copied().flatten() {
            Some(r) => r,
            None if row.outer == [0, 0] => vs.rows,
            None => return Err(Error::MissingDependency(format!("vector set of tap row {:?}", row.outer))),
        };
        let side = |v: &Vec<Vec<Vector<VL>>>, what: &str| -> Result<[Vector<VL>; EXT]> {
            let got = v.get(t).map_or(&[][..], |x| &x[..]);
            if got.len() < row.reach {
                return Err(Error::MissingDependency(format!(
                    "{what} dependency {} of tap row {:?}",
                    got.len() + 1,
                    row.outer
                )));
            }
            let mut a = [Vector::zero(); EXT];
            a[..row.reach].copy_from_slice(&got[..row.reach]);
            Ok(a)
        };
        let left = side(&deps.left, "left")?;
        let right = side(&deps.right, "right")?;
        ext[t][EXT..EXT + VL].copy_from_slice(&rows);
        for s in 1..=row.reach {
            ext[t][EXT - s] = left[s - 1];
            ext[t][EXT + VL - 1 + s] = right[s - 1];
        }
    }
    Ok(VectorSet {
        rows: compute_rows(&k, &ext),
        base: vs.base,
    })
}

// ---------------------------------------------------------------------------
// Row segments. Each updates the cells `lo..hi` of one row and reads exactly
// the cells the stencil needs, so disjoint tiles never touch each other's
// pending cells.

/// The oracle arithmetic: plain multiply then add, starting from zero.
pub(crate) unsafe fn oracle_segment(plan: &TapPlan, src: &GridPtr, dst: &GridPtr, outer: [isize; 2], lo: isize, hi: isize) {
    let lead = src.geom.lead as isize;
    let ins: Vec<(*const f64, f64)> = plan
        .flat
        .iter()
        .zip(&plan.weights)
        .map(|(&(t, dx), &w)| (src.row(add_outer(outer, plan.rows[t].outer)).offset(lead + dx) as *const f64, w))
        .collect();
    let out = dst.row(outer).offset(lead);
    for x in lo..hi {
        let mut acc = 0.0;
        for &(p, w) in &ins {
            acc += w * *p.offset(x);
        }
        *out.offset(x) = acc;
    }
}

/// Fused-order point updates with layout-aware element access.
pub(crate) unsafe fn point_segment(
    plan: &TapPlan,
    src: &GridPtr,
    dst: &GridPtr,
    outer: [isize; 2],
    lo: isize,
    hi: isize,
    c: &mut Counters,
) {
    if lo >= hi {
        return;
    }
    let mut rows = [std::ptr::null::<f64>(); MAX_TAP_ROWS];
    for (t, row) in plan.rows.iter().enumerate() {
        rows[t] = src.row(add_outer(outer, row.outer));
    }
    let out = dst.row(outer);
    for x in lo..hi {
        let (t0, dx0) = plan.flat[0];
        let mut acc = plan.weights[0] * src.get(rows[t0], x + dx0);
        for i in 1..plan.flat.len() {
            let (t, dx) = plan.flat[i];
            acc = fmadd(plan.weights[i], src.get(rows[t], x + dx), acc);
        }
        dst.set(out, x, acc);
    }
    let n = (hi - lo) as u64;
    c.scalar_loads += n * plan.flat.len() as u64;
    c.scalar_stores += n;
    c.point_updates += n;
}

unsafe fn multiload_segment<const VL: usize>(
    k: &Kern<VL>,
    src: &GridPtr,
    dst: &GridPtr,
    outer: [isize; 2],
    lo: isize,
    hi: isize,
    c: &mut Counters,
) {
    let plan = &k.plan;
    let lead = src.geom.lead as isize;
    let mut rows = [std::ptr::null::<f64>(); MAX_TAP_ROWS];
    for (t, row) in plan.rows.iter().enumerate() {
        rows[t] = src.row(add_outer(outer, row.outer)).offset(lead);
    }
    let out = dst.row(outer).offset(lead);
    let vl = VL as isize;
    let mut x = lo;
    while x + vl <= hi {
        let (t0, dx0) = plan.flat[0];
        let mut acc = k.wv[0] * Vector::load(rows[t0].offset(x + dx0));
        for i in 1..plan.flat.len() {
            let (t, dx) = plan.flat[i];
            acc = k.wv[i].mul_add(Vector::load(rows[t].offset(x + dx)), acc);
        }
        acc.store(out.offset(x));
        x += vl;
    }
    let chunks = ((x - lo) / vl) as u64;
    c.vector_loads += chunks * plan.flat.len() as u64;
    c.vector_stores += chunks;
    c.point_updates += chunks * VL as u64;
    point_segment(plan, src, dst, outer, x, hi, c);
}

unsafe fn reorg_segment<const VL: usize>(
    k: &Kern<VL>,
    src: &GridPtr,
    dst: &GridPtr,
    outer: [isize; 2],
    lo: isize,
    hi: isize,
    c: &mut Counters,
) {
    let plan = &k.plan;
    let vl = VL as isize;
    let nch = if hi > lo { ((hi - lo) / vl) as usize } else { 0 };
    if nch > 0 {
        let lead = src.geom.lead as isize;
        let nt = plan.rows.len();
        let mut p = [std::ptr::null::<f64>(); MAX_TAP_ROWS];
        let mut prev = [Vector::<VL>::zero(); MAX_TAP_ROWS];
        let mut cur = [Vector::<VL>::zero(); MAX_TAP_ROWS];
        let mut next = [Vector::<VL>::zero(); MAX_TAP_ROWS];
        let mut gathered = 0u64;
        for (t, row) in plan.rows.iter().enumerate() {
            p[t] = src.row(add_outer(outer, row.outer)).offset(lead);
            cur[t] = Vector::load(p[t].offset(lo));
            for l in VL - row.reach..VL {
                prev[t].0[l] = *p[t].offset(lo - vl + l as isize);
            }
            gathered += row.reach as u64;
        }
        let shifted = plan.flat.iter().filter(|f| f.1 != 0).count() as u64;
        let out = dst.row(outer).offset(lead);
        for ch in 0..nch {
            let x = lo + ch as isize * vl;
            let last = ch + 1 == nch;
            for (t, row) in plan.rows.iter().enumerate() {
                if row.reach > 0 {
                    if !last {
                        next[t] = Vector::load(p[t].offset(x + vl));
                    } else {
                        for l in 0..row.reach {
                            next[t].0[l] = *p[t].offset(x + vl + l as isize);
                        }
                        gathered += row.reach as u64;
                    }
                }
            }
            let at = |i: usize| {
                let (t, dx) = plan.flat[i];
                match dx {
                    0 => cur[t],
                    d if d < 0 => prev[t].concat_shift(cur[t], (vl + d) as usize),
                    d => cur[t].concat_shift(next[t], d as usize),
                }
            };
            let mut acc = k.wv[0] * at(0);
            for i in 1..plan.flat.len() {
                acc = k.wv[i].mul_add(at(i), acc);
            }
            acc.store(out.offset(x));
            for (t, row) in plan.rows.iter().enumerate().take(nt) {
                if row.reach > 0 {
                    prev[t] = cur[t];
                    cur[t] = next[t];
                } else if !last {
                    cur[t] = Vector::load(p[t].offset(x + vl));
                }
            }
        }
        let n = nch as u64;
        c.vector_loads += n * nt as u64;
        c.scalar_loads += gathered;
        c.vector_stores += n;
        c.reorg_ops += n * shifted;
        c.point_updates += n * VL as u64;
    }
    point_segment(plan, src, dst, outer, lo + (nch * VL) as isize, hi, c);
}

unsafe fn dlt_row<const VL: usize>(k: &Kern<VL>, src: &GridPtr, dst: &GridPtr, outer: [isize; 2], c: &mut Counters) {
    const W: usize = 2 * EXT + 1;
    let plan = &k.plan;
    let g = &src.geom;
    let n = g.nx() as isize;
    let m = n / VL as isize;
    let lead = g.lead as isize;
    let nt = plan.rows.len();
    let mut base = [std::ptr::null::<f64>(); MAX_TAP_ROWS];
    let mut p = [std::ptr::null::<f64>(); MAX_TAP_ROWS];
    // win[t][i] holds group cc - reach + i
    let mut win = [[Vector::<VL>::zero(); W]; MAX_TAP_ROWS];
    let mut loads = 0u64;
    for (t, row) in plan.rows.iter().enumerate() {
        base[t] = src.row(add_outer(outer, row.outer));
        p[t] = base[t].offset(lead);
        let reach = row.reach as isize;
        for i in 0..=2 * reach {
            let gi = i - reach;
            if (0..m).contains(&gi) {
                win[t][i as usize] = Vector::load(p[t].offset(gi * VL as isize));
                loads += 1;
            }
        }
    }
    let out = dst.row(outer).offset(lead);
    let mut edge_loads = 0u64;
    let mut reorg = 0u64;
    for cc in 0..m {
        let mut vecs = [Vector::<VL>::zero(); 27];
        for (i, &(t, dx)) in plan.flat.iter().enumerate() {
            let gi = cc + dx;
            let reach = plan.rows[t].reach as isize;
            vecs[i] = if (0..m).contains(&gi) {
                win[t][(reach + dx) as usize]
            } else if gi < 0 {
                // lanes q >= 1 come from group m + gi one lane down; lane 0 is halo
                let v = Vector::load(p[t].offset((m + gi) * VL as isize));
                let h = src.get(base[t], gi);
                edge_loads += 1;
                v.rotate_lanes(1).blend(Vector::splat(h), 1)
            } else {
                let v = Vector::load(p[t].offset((gi - m) * VL as isize));
                let h = src.get(base[t], n + gi - m);
                edge_loads += 1;
                v.rotate_lanes(VL - 1).blend(Vector::splat(h), 1 << (VL - 1))
            };
            if !(0..m).contains(&gi) {
                reorg += 2;
            }
        }
        let mut acc = k.wv[0] * vecs[0];
        for i in 1..plan.flat.len() {
            acc = k.wv[i].mul_add(vecs[i], acc);
        }
        acc.store(out.offset(cc * VL as isize));
        for (t, row) in plan.rows.iter().enumerate().take(nt) {
            let reach = row.reach;
            for i in 0..2 * reach {
                win[t][i] = win[t][i + 1];
            }
            let gi = cc + 1 + reach as isize;
            if gi < m {
                win[t][2 * reach] = Vector::load(p[t].offset(gi * VL as isize));
                loads += 1;
            }
        }
    }
    c.vector_loads += loads + edge_loads;
    c.scalar_loads += edge_loads;
    c.vector_stores += m as u64;
    c.reorg_ops += reorg;
    c.point_updates += n as u64;
}

/// Left neighbor rows of block `b0`, gathered element-wise: only lane
/// `VL-1` of rows `VL-s` is meaningful.
#[inline]
pub(crate) unsafe fn gather_tail<const VL: usize>(src: &GridPtr, row: *const f64, x0: isize, reach: usize) -> [Vector<VL>; EXT] {
    let mut t = [Vector::zero(); EXT];
    for s in 1..=reach {
        t[s - 1].0[VL - 1] = src.get(row, x0 - s as isize);
    }
    t
}

/// Right neighbor rows of a block ending at `x1`: only lane 0 of rows `s-1`.
#[inline]
pub(crate) unsafe fn gather_head<const VL: usize>(src: &GridPtr, row: *const f64, x1: isize, reach: usize) -> [Vector<VL>; EXT] {
    let mut h = [Vector::zero(); EXT];
    for s in 1..=reach {
        h[s - 1].0[0] = src.get(row, x1 + s as isize - 1);
    }
    h
}

/// Stores a set, skipping lanes at or beyond natural index `limit`.
#[inline(always)]
pub(crate) unsafe fn store_set<const VL: usize>(rows: &[Vector<VL>; VL], p: *mut f64, base: isize, limit: isize, c: &mut Counters) {
    if base + (VL * VL) as isize <= limit {
        for (j, r) in rows.iter().enumerate() {
            r.store(p.add(j * VL));
        }
        c.vector_stores += VL as u64;
    } else {
        for (j, r) in rows.iter().enumerate() {
            for l in 0..VL {
                if base + ((l * VL + j) as isize) < limit {
                    *p.add(j * VL + l) = r.0[l];
                    c.scalar_stores += 1;
                }
            }
        }
    }
}

/// One step over whole blocks `b0..b1` of a block-transposed row. Neighbors
/// outside the block range are gathered element-wise; lanes at or beyond
/// `limit` are computed but not stored.
pub(crate) unsafe fn vs_segment<const VL: usize>(
    k: &Kern<VL>,
    src: &GridPtr,
    dst: &GridPtr,
    outer: [isize; 2],
    b0: usize,
    b1: usize,
    limit: isize,
    c: &mut Counters,
) {
    if b0 >= b1 {
        return;
    }
    match fast_taps(k) {
        Some(3) => return vs_segment_1d::<VL, 3>(k, src, dst, outer, b0, b1, limit, c),
        Some(5) => return vs_segment_1d::<VL, 5>(k, src, dst, outer, b0, b1, limit, c),
        _ => {}
    }
    let plan = &k.plan;
    let bs = VL * VL;
    let lead = src.geom.lead;
    let nt = plan.rows.len();
    let mut rowp = [std::ptr::null::<f64>(); MAX_TAP_ROWS];
    let mut p = [std::ptr::null::<f64>(); MAX_TAP_ROWS];
    let mut cur = [[Vector::<VL>::zero(); VL]; MAX_TAP_ROWS];
    let mut nxt = [[Vector::<VL>::zero(); VL]; MAX_TAP_ROWS];
    let mut tail = [[Vector::<VL>::zero(); EXT]; MAX_TAP_ROWS];
    let mut ext = [[Vector::<VL>::zero(); EXT_LEN]; MAX_TAP_ROWS];
    let mut gathered = 0u64;
    let mut assembled = 0u64;
    for (t, row) in plan.rows.iter().enumerate() {
        rowp[t] = src.row(add_outer(outer, row.outer));
        p[t] = rowp[t].add(lead);
        cur[t] = VectorSet::<VL>::load(p[t].add(b0 * bs), 0).rows;
        tail[t] = gather_tail(src, rowp[t], (b0 * bs) as isize, row.reach);
        gathered += row.reach as u64;
        assembled += 2 * row.reach as u64;
    }
    let out = dst.row(outer).add(lead);
    for b in b0..b1 {
        let last = b + 1 == b1;
        for (t, row) in plan.rows.iter().enumerate() {
            let head = if !last {
                nxt[t] = VectorSet::<VL>::load(p[t].add((b + 1) * bs), 0).rows;
                head_of(&nxt[t])
            } else {
                gathered += row.reach as u64;
                gather_head(src, rowp[t], (b1 * bs) as isize, row.reach)
            };
            fill_ext(&mut ext[t], &cur[t], &tail[t], &head, row.reach);
        }
        let res = compute_rows(k, &ext[..nt]);
        store_set(&res, out.add(b * bs), (b * bs) as isize, limit, c);
        for t in 0..nt {
            tail[t] = tail_of(&cur[t]);
            cur[t] = nxt[t];
        }
    }
    let n = (b1 - b0) as u64;
    c.vector_loads += n * (nt * VL) as u64;
    c.scalar_loads += gathered;
    c.vector_sets += n;
    c.assembled += n * assembled;
    c.reorg_ops += n * 2 * assembled;
    let full = (b1 * bs).min(limit.max(0) as usize).saturating_sub(b0 * bs);
    c.point_updates += full as u64;
}

#[allow(clippy::too_many_arguments)]
unsafe fn vs_segment_1d<const VL: usize, const N: usize>(
    k: &Kern<VL>,
    src: &GridPtr,
    dst: &GridPtr,
    outer: [isize; 2],
    b0: usize,
    b1: usize,
    limit: isize,
    c: &mut Counters,
) {
    let w = weights_1d::<VL, N>(k);
    let reach = N / 2;
    let bs = VL * VL;
    let row = src.row(outer);
    let p = row.add(src.geom.lead);
    let out = dst.row(outer).add(dst.geom.lead);
    let mut tail = gather_tail(src, row, (b0 * bs) as isize, reach);
    let mut cur = VectorSet::<VL>::load(p.add(b0 * bs), 0).rows;
    let mut nxt = cur;
    let mut ext = [Vector::<VL>::zero(); EXT_LEN];
    for b in b0..b1 {
        let head = if b + 1 < b1 {
            nxt = VectorSet::<VL>::load(p.add((b + 1) * bs), 0).rows;
            head_of(&nxt)
        } else {
            gather_head(src, row, (b1 * bs) as isize, reach)
        };
        fill_ext(&mut ext, &cur, &tail, &head, reach);
        let res = rows_1d(&w, &ext);
        store_set(&res, out.add(b * bs), (b * bs) as isize, limit, c);
        tail = tail_of(&cur);
        cur = nxt;
    }
    let n = (b1 - b0) as u64;
    c.vector_loads += n * VL as u64;
    c.scalar_loads += 2 * reach as u64;
    c.vector_sets += n;
    c.assembled += n * 2 * reach as u64;
    c.reorg_ops += n * 4 * reach as u64;
    let full = (b1 * bs).min(limit.max(0) as usize).saturating_sub(b0 * bs);
    c.point_updates += full as u64;
}

// ---------------------------------------------------------------------------
// Region sweeps and the public single-step entry points.

/// Updates `region` of `dst` from `src` with `tag`. Regions need not be
/// aligned; unaligned edges fall back to element-wise updates.
pub(crate) unsafe fn step_region<const VL: usize>(
    tag: Method,
    k: &Kern<VL>,
    src: &GridPtr,
    dst: &GridPtr,
    region: &Region,
    c: &mut Counters,
) {
    let (lo, hi) = region.unit();
    for outer in region.rows() {
        match tag {
            Method::Scalar => {
                oracle_segment(&k.plan, src, dst, outer, lo, hi);
                let n = (hi - lo).max(0) as u64;
                c.scalar_loads += n * k.plan.flat.len() as u64;
                c.scalar_stores += n;
                c.point_updates += n;
            }
            Method::Multiload => multiload_segment(k, src, dst, outer, lo, hi, c),
            Method::Reorg => reorg_segment(k, src, dst, outer, lo, hi, c),
            Method::Transpose => {
                let bs = (VL * VL) as isize;
                let jb0 = (lo + bs - 1).div_euclid(bs);
                let jb1 = hi.div_euclid(bs);
                if jb0 < jb1 {
                    point_segment(&k.plan, src, dst, outer, lo, jb0 * bs, c);
                    vs_segment(k, src, dst, outer, jb0 as usize, jb1 as usize, hi, c);
                    point_segment(&k.plan, src, dst, outer, jb1 * bs, hi, c);
                } else {
                    point_segment(&k.plan, src, dst, outer, lo, hi, c);
                }
            }
            Method::Dlt => unreachable!("dlt sweeps whole rows"),
        }
    }
}

pub(crate) fn check_pair(src: &GridBuffer, dst: &GridBuffer, spec: &StencilSpec, layout: Layout, what: &'static str) -> Result<()> {
    if !src.same_shape(dst) {
        return Err(Error::ShapeMismatch);
    }
    if src.geometry().d() != spec.d() || src.geometry().halo().iter().any(|&h| h < spec.r()) {
        return Err(Error::ShapeMismatch);
    }
    for g in [src, dst] {
        if g.layout() != layout {
            return Err(Error::LayoutMismatch {
                expected: what,
                found: g.layout(),
            });
        }
    }
    Ok(())
}

fn for_rows(src: &GridBuffer, dst: &mut GridBuffer, f: impl Fn(&GridPtr, &GridPtr, [isize; 2]) -> Counters + Send + Sync) -> Counters {
    let s = GridPtr::read_only(src);
    let d = GridPtr::new(dst);
    let rows = src.geometry().full_region().rows();
    exec::map_indices(rows.len(), |i| f(&s, &d, rows[i])).into_iter().sum()
}

/// Copies every halo cell of `src` into `dst` (natural layout).
fn copy_halo(src: &GridBuffer, dst: &mut GridBuffer) {
    let g = *src.geometry();
    let (lead, n, pitch) = (g.lead(), g.nx(), g.pitch());
    let s = src.as_slice();
    let d = dst.as_mut_slice();
    let outer_ext: Vec<usize> = (0..g.d() - 1).map(|k| g.dims()[k] + 2 * g.halo()[k]).collect();
    for row in 0..g.rows_total {
        let mut rem = row;
        let mut interior = true;
        for k in (0..g.d() - 1).rev() {
            let c = rem % outer_ext[k];
            rem /= outer_ext[k];
            interior &= c >= g.halo()[k] && c < g.halo()[k] + g.dims()[k];
        }
        let r = row * pitch..(row + 1) * pitch;
        let (sr, dr) = (&s[r.clone()], &mut d[r]);
        if interior {
            dr[..lead].copy_from_slice(&sr[..lead]);
            dr[lead + n..].copy_from_slice(&sr[lead + n..]);
        } else {
            dr.copy_from_slice(sr);
        }
    }
}

/// The correctness oracle: `dst[p] = sum_o w_o * src[p + o]` on the interior,
/// halo copied from `src`.
pub fn scalar_step(src: &GridBuffer, dst: &mut GridBuffer, spec: &StencilSpec) -> Result<Counters> {
    check_pair(src, dst, spec, Layout::Natural, "natural")?;
    copy_halo(src, dst);
    let plan = TapPlan::new(spec);
    let n = src.geometry().nx() as isize;
    let mut c = for_rows(src, dst, |s, d, outer| {
        // SAFETY: rows are disjoint; reads stay within the halo box.
        unsafe { oracle_segment(&plan, s, d, outer, 0, n) };
        Counters::default()
    });
    let pts = src.geometry().interior_points() as u64;
    c.scalar_loads = pts * plan.flat.len() as u64;
    c.scalar_stores = pts;
    c.point_updates = pts;
    Ok(c)
}

macro_rules! dispatch_vl {
    ($vl:expr, $f:ident ( $($a:expr),* )) => {
        match $vl {
            4 => $f::<4>($($a),*),
            8 => $f::<8>($($a),*),
            v => Err(Error::UnsupportedVectorLength(v)),
        }
    };
}
pub(crate) use dispatch_vl;

fn natural_step<const VL: usize>(tag: Method, src: &GridBuffer, dst: &mut GridBuffer, spec: &StencilSpec) -> Result<Counters> {
    let k = Kern::<VL>::new(spec)?;
    let n = src.geometry().nx() as isize;
    Ok(for_rows(src, dst, |s, d, outer| {
        let mut c = Counters::default();
        // SAFETY: each row is written by one task; reads stay within the halo box.
        unsafe {
            match tag {
                Method::Multiload => multiload_segment(&k, s, d, outer, 0, n, &mut c),
                _ => reorg_segment(&k, s, d, outer, 0, n, &mut c),
            }
        }
        c
    }))
}

/// One vector load per tap per output vector.
pub fn multiload_step(src: &GridBuffer, dst: &mut GridBuffer, spec: &StencilSpec) -> Result<Counters> {
    check_pair(src, dst, spec, Layout::Natural, "natural")?;
    dispatch_vl!(src.vl(), natural_step(Method::Multiload, src, dst, spec))
}

/// Each input vector loaded once; shifted neighbors built in registers.
pub fn reorg_step(src: &GridBuffer, dst: &mut GridBuffer, spec: &StencilSpec) -> Result<Counters> {
    check_pair(src, dst, spec, Layout::Natural, "natural")?;
    dispatch_vl!(src.vl(), natural_step(Method::Reorg, src, dst, spec))
}

fn dlt_impl<const VL: usize>(src: &GridBuffer, dst: &mut GridBuffer, spec: &StencilSpec) -> Result<Counters> {
    let k = Kern::<VL>::new(spec)?;
    Ok(for_rows(src, dst, |s, d, outer| {
        let mut c = Counters::default();
        // SAFETY: each row is written by one task.
        unsafe { dlt_row(&k, s, d, outer, &mut c) };
        c
    }))
}

/// Sweep over the dimension-lifted layout; groups at the two ends of a row
/// assemble their neighbors by a rotate and a blend with the halo.
pub fn dlt_step(src: &GridBuffer, dst: &mut GridBuffer, spec: &StencilSpec) -> Result<Counters> {
    check_pair(src, dst, spec, Layout::Dlt(src.vl()), "dlt")?;
    if src.geometry().nx() / src.vl() < spec.r() {
        return Err(Error::InvalidLayout {
            layout: src.layout(),
            reason: "substreams shorter than the stencil order".into(),
        });
    }
    dispatch_vl!(src.vl(), dlt_impl(src, dst, spec))
}

fn transpose_impl<const VL: usize>(src: &GridBuffer, dst: &mut GridBuffer, spec: &StencilSpec) -> Result<Counters> {
    let k = Kern::<VL>::new(spec)?;
    let g = src.geometry();
    let (nb, n) = (g.blocks_per_row(), g.nx() as isize);
    Ok(for_rows(src, dst, |s, d, outer| {
        let mut c = Counters::default();
        // SAFETY: each row is written by one task; the padded tail of a row is
        // readable and lanes past the interior are not stored.
        unsafe { vs_segment(&k, s, d, outer, 0, nb, n, &mut c) };
        c
    }))
}

/// Sweep over the block-transposed layout: per vector set, `2r` assembled
/// dependency vectors (two reorganization ops each) and `vl` row updates.
pub fn transpose_layout_step(src: &GridBuffer, dst: &mut GridBuffer, spec: &StencilSpec) -> Result<Counters> {
    check_pair(src, dst, spec, Layout::BlockTranspose(src.vl()), "block-transpose")?;
    dispatch_vl!(src.vl(), transpose_impl(src, dst, spec))
}

/// One step with any method; grids must already be in the method's layout.
pub fn step(tag: Method, src: &GridBuffer, dst: &mut GridBuffer, spec: &StencilSpec) -> Result<Counters> {
    match tag {
        Method::Scalar => scalar_step(src, dst, spec),
        Method::Multiload => multiload_step(src, dst, spec),
        Method::Reorg => reorg_step(src, dst, spec),
        Method::Dlt => dlt_step(src, dst, spec),
        Method::Transpose => transpose_layout_step(src, dst, spec),
    }
}
