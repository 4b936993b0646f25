//! Unroll-and-jam of the time loop over the block-transposed layout.
//!
//! A ring of `k+1` vector sets slides over the blocks of a row. Each
//! iteration loads one block, advances every live set by one level (the
//! newest first, so each set's right neighbor is still at its level), stores
//! the set that reached level `k`, and shifts the ring. Before a set is
//! advanced, its last `r` rows are saved as `vrl`: they are the left
//! dependency its right neighbor needs at the same level one iteration later.
//! Sets with no neighbor in the ring read their dependency from memory, which
//! under the Dirichlet contract is the halo.

use crate::error::{Error, Result};
use crate::grid::{GridBuffer, GridPtr, Layout};
use crate::kernels::{
    self, compute_rows, fast_taps, fill_ext, gather_head, gather_tail, head_of, rows_1d, store_set, tail_of, weights_1d,
    Counters, Kern, EXT, EXT_LEN,
};
use crate::simd::Vector;
use crate::stencil::StencilSpec;
use crate::vset::VectorSet;

/// Vector registers the pipeline needs: `k` live sets plus one `vrl` row
/// each, and one register per weight.
pub fn register_need(k: usize, vl: usize, weights: usize) -> usize {
    k * (vl + 1) + weights
}

/// Checks the register budget (`4*vl` registers) and the supported
/// configurations: 1D stencils, `k` in {1, 2}.
pub fn check_jam(spec: &StencilSpec, k: usize, vl: usize) -> Result<usize> {
    let needed = register_need(k, vl, spec.weights().len());
    let available = 4 * vl;
    if needed > available {
        return Err(Error::RegisterBudget { needed, available });
    }
    if !(1..=2).contains(&k) {
        return Err(Error::UnsupportedJam(format!("unrolling factor {k} (supported: 1, 2)")));
    }
    if spec.d() != 1 {
        return Err(Error::UnsupportedJam(format!("{}-dimensional stencil `{}`", spec.d(), spec.name())));
    }
    if spec.r() > EXT {
        return Err(Error::UnsupportedJam(format!("order {}", spec.r())));
    }
    Ok(needed)
}

#[derive(Clone, Copy, Debug)]
struct Slot<const VL: usize> {
    rows: [Vector<VL>; VL],
    /// As loaded; lanes past the interior are restored from here.
    loaded: [Vector<VL>; VL],
    block: usize,
    level: usize,
}

/// Where the pipeline reads and writes. Level-0 dependencies outside the
/// block range come from `src`, level-1 ones from `mid_src`.
#[derive(Clone, Copy)]
pub(crate) struct JamIo {
    pub src: GridPtr,
    pub mid_src: GridPtr,
    pub dst: GridPtr,
    /// Receives every set at level 1 when present.
    pub mid_dst: Option<GridPtr>,
    pub outer: [isize; 2],
}

/// Pipeline state over the blocks `b0..b1` of one row.
pub struct JamState<const VL: usize> {
    k: usize,
    kern: Kern<VL>,
    ring: Vec<Option<Slot<VL>>>,
    vrl: Vec<Option<[Vector<VL>; EXT]>>,
    cursor: usize,
    b0: usize,
    b1: usize,
    /// Natural index where the interior ends; lanes at or past it are not
    /// updated in memory.
    limit: isize,
    stored_levels: Vec<Option<usize>>,
    counters: Counters,
}

impl<const VL: usize> JamState<VL> {
    pub(crate) fn new(spec: &StencilSpec, k: usize, b0: usize, b1: usize, limit: isize) -> Result<Self> {
        check_jam(spec, k, VL)?;
        Ok(JamState {
            k,
            kern: Kern::new(spec)?,
            ring: vec![None; k + 1],
            vrl: vec![None; k],
            cursor: b0,
            b0,
            b1,
            limit,
            stored_levels: vec![None; b1 - b0],
            counters: Counters::default(),
        })
    }

    /// For callers that already validated the configuration.
    pub(crate) fn new_unchecked(kern: &Kern<VL>, k: usize, b0: usize, b1: usize, limit: isize) -> Self {
        JamState {
            k,
            kern: kern.clone(),
            ring: vec![None; k + 1],
            vrl: vec![None; k],
            cursor: b0,
            b0,
            b1,
            limit,
            stored_levels: vec![None; b1 - b0],
            counters: Counters::default(),
        }
    }

    pub fn k(&self) -> usize {
        self.k
    }

    /// Next block to load.
    pub fn cursor(&self) -> usize {
        self.cursor
    }

    pub fn exhausted(&self) -> bool {
        self.cursor >= self.b1
    }

    /// Time level of every ring slot, oldest first.
    pub fn levels(&self) -> Vec<Option<usize>> {
        self.ring.iter().map(|s| s.map(|s| s.level)).collect()
    }

    /// Level each block was last stored at, relative to the sweep start.
    pub fn stored_levels(&self) -> &[Option<usize>] {
        &self.stored_levels
    }

    pub fn counters(&self) -> Counters {
        self.counters
    }

    pub fn is_empty(&self) -> bool {
        self.ring.iter().all(Option::is_none)
    }

    fn store(&mut self, to: &GridPtr, outer: [isize; 2], slot: &Slot<VL>) {
        let bs = VL * VL;
        // SAFETY: block index within the row's padded extent.
        unsafe {
            let p = to.row(outer).add(to.geom.lead + slot.block * bs);
            store_set(&slot.rows, p, (slot.block * bs) as isize, self.limit, &mut self.counters);
        }
    }

    /// One pipeline iteration: optional load, advance all live sets, store
    /// the finished one, shift.
    pub(crate) fn iterate(&mut self, io: &JamIo, load: bool) {
        let bs = VL * VL;
        let k = self.k;
        if load && self.cursor < self.b1 {
            // SAFETY: block within the padded row.
            let rows = unsafe {
                let p = io.src.row(io.outer).add(io.src.geom.lead + self.cursor * bs);
                VectorSet::<VL>::load(p, self.cursor * bs).rows
            };
            self.counters.vector_loads += VL as u64;
            self.ring[k] = Some(Slot {
                rows,
                loaded: rows,
                block: self.cursor,
                level: 0,
            });
            self.cursor += 1;
        }
        let reach = self.kern.plan.rows[0].reach;
        for i in (0..k).rev() {
            let Some(mut slot) = self.ring[i] else { continue };
            let from = if slot.level == 0 { &io.src } else { &io.mid_src };
            // SAFETY: gathers read single cells of the row (halo included).
            let row = from.row(io.outer);
            let head = match &self.ring[i + 1] {
                Some(nb) => {
                    assert!(
                        nb.level == slot.level && nb.block == slot.block + 1,
                        "right neighbor of block {} at level {} is block {} at level {}",
                        slot.block,
                        slot.level,
                        nb.block,
                        nb.level
                    );
                    head_of(&nb.rows)
                }
                None => {
                    assert_eq!(slot.block + 1, self.b1, "right dependency missing inside the row");
                    self.counters.scalar_loads += reach as u64;
                    unsafe { gather_head(from, row, (self.b1 * bs) as isize, reach) }
                }
            };
            let tail = match self.vrl[i].take() {
                Some(t) => t,
                None => {
                    assert_eq!(slot.block, self.b0, "left dependency missing inside the row");
                    self.counters.scalar_loads += reach as u64;
                    unsafe { gather_tail(from, row, (self.b0 * bs) as isize, reach) }
                }
            };
            self.vrl[i] = Some(tail_of(&slot.rows));
            let mut ext = [[Vector::<VL>::zero(); 12]; 1];
            fill_ext(&mut ext[0], &slot.rows, &tail, &head, reach);
            let mut rows = compute_rows(&self.kern, &ext);
            let base = (slot.block * bs) as isize;
            if base + bs as isize > self.limit {
                for (j, r) in rows.iter_mut().enumerate() {
                    for l in 0..VL {
                        if base + ((l * VL + j) as isize) >= self.limit {
                            r.0[l] = slot.loaded[j].0[l];
                        }
                    }
                }
            }
            slot.rows = rows;
            slot.level += 1;
            self.counters.vector_sets += 1;
            self.counters.assembled += 2 * reach as u64;
            self.counters.reorg_ops += 4 * reach as u64;
            self.counters.point_updates += (self.limit - base).clamp(0, bs as isize) as u64;
            if slot.level == 1 && k > 1 {
                if let Some(mid) = io.mid_dst {
                    self.store(&mid, io.outer, &slot);
                }
            }
            self.ring[i] = Some(slot);
        }
        if let Some(done) = self.ring[0] {
            if done.level == k {
                self.store(&io.dst, io.outer, &done);
                self.stored_levels[done.block - self.b0] = Some(done.level);
                self.ring[0] = None;
            }
        }
        for i in 0..k {
            self.ring[i] = self.ring[i + 1].take();
        }
    }

    /// Booting: the first `k` iterations, which load blocks without storing.
    pub(crate) fn boot_io(&mut self, io: &JamIo) {
        for _ in 0..self.k {
            self.iterate(io, true);
        }
    }

    /// Epilogue: iterations without loads until every set is stored.
    pub(crate) fn drain_io(&mut self, io: &JamIo) {
        for _ in 0..self.k {
            self.iterate(io, false);
        }
        assert!(self.is_empty());
        assert!(
            self.stored_levels.iter().all(|l| *l == Some(self.k)),
            "a block was not stored at level {}",
            self.k
        );
    }

    /// Runs the whole sweep: boot, steady state, drain.
    pub(crate) fn run(&mut self, io: &JamIo) {
        self.boot_io(io);
        while !self.exhausted() {
            if !self.steady_fast(io) {
                self.iterate(io, true);
            }
        }
        self.drain_io(io);
    }

    /// Runs the steady state with the ring held in locals, for as long as
    /// every loaded block lies inside the interior. Returns false when the
    /// state does not qualify (warm-up of `vrl`, tail blocks, other shapes).
    fn steady_fast(&mut self, io: &JamIo) -> bool {
        let bs = VL * VL;
        let end = self.b1.min((self.limit.max(0) as usize) / bs);
        if self.cursor >= end || self.ring[..self.k].iter().any(Option::is_none) || self.vrl.iter().any(Option::is_none) {
            return false;
        }
        // SAFETY: blocks below `end` lie within the row.
        unsafe {
            match (self.k, fast_taps(&self.kern)) {
                (1, Some(3)) => self.fast_k1::<3>(io, end),
                (1, Some(5)) => self.fast_k1::<5>(io, end),
                (2, Some(3)) => self.fast_k2::<3>(io, end),
                (2, Some(5)) => self.fast_k2::<5>(io, end),
                _ => return false,
            }
        }
        true
    }

    unsafe fn fast_k1<const N: usize>(&mut self, io: &JamIo, end: usize) {
        let (w, reach, bs) = (weights_1d::<VL, N>(&self.kern), N / 2, VL * VL);
        let src = io.src.row(io.outer).add(io.src.geom.lead);
        let dst = io.dst.row(io.outer).add(io.dst.geom.lead);
        let s0 = self.ring[0].unwrap();
        let (mut r0, mut v0) = (s0.rows, self.vrl[0].unwrap());
        let mut ext = [Vector::<VL>::zero(); EXT_LEN];
        let start = self.cursor;
        for c in start..end {
            let cur = VectorSet::<VL>::load(src.add(c * bs), 0).rows;
            fill_ext(&mut ext, &r0, &v0, &head_of(&cur), reach);
            v0 = tail_of(&r0);
            let out = rows_1d(&w, &ext);
            for (j, r) in out.iter().enumerate() {
                r.store(dst.add((c - 1) * bs + j * VL));
            }
            self.stored_levels[c - 1 - self.b0] = Some(1);
            r0 = cur;
        }
        let n = (end - start) as u64;
        self.finish_fast(n, 1);
        self.ring[0] = Some(Slot { rows: r0, loaded: r0, block: end - 1, level: 0 });
        self.vrl[0] = Some(v0);
        self.cursor = end;
    }

    unsafe fn fast_k2<const N: usize>(&mut self, io: &JamIo, end: usize) {
        let (w, reach, bs) = (weights_1d::<VL, N>(&self.kern), N / 2, VL * VL);
        let src = io.src.row(io.outer).add(io.src.geom.lead);
        let dst = io.dst.row(io.outer).add(io.dst.geom.lead);
        let mid = io.mid_dst.map(|m| m.row(io.outer).add(m.geom.lead));
        let (s0, s1) = (self.ring[0].unwrap(), self.ring[1].unwrap());
        assert!(s0.level == 1 && s1.level == 0 && s1.block == self.cursor - 1);
        let (mut r0, mut r1) = (s0.rows, s1.rows);
        let (mut v0, mut v1) = (self.vrl[0].unwrap(), self.vrl[1].unwrap());
        let mut ext = [Vector::<VL>::zero(); EXT_LEN];
        let start = self.cursor;
        for c in start..end {
            let cur = VectorSet::<VL>::load(src.add(c * bs), 0).rows;
            fill_ext(&mut ext, &r1, &v1, &head_of(&cur), reach);
            v1 = tail_of(&r1);
            let r1n = rows_1d(&w, &ext);
            if let Some(m) = mid {
                for (j, r) in r1n.iter().enumerate() {
                    r.store(m.add((c - 1) * bs + j * VL));
                }
            }
            fill_ext(&mut ext, &r0, &v0, &head_of(&r1n), reach);
            v0 = tail_of(&r0);
            let out = rows_1d(&w, &ext);
            for (j, r) in out.iter().enumerate() {
                r.store(dst.add((c - 2) * bs + j * VL));
            }
            self.stored_levels[c - 2 - self.b0] = Some(2);
            r0 = r1n;
            r1 = cur;
        }
        let n = (end - start) as u64;
        self.finish_fast(n, 2);
        if mid.is_some() {
            self.counters.vector_stores += n * VL as u64;
        }
        self.ring[0] = Some(Slot { rows: r0, loaded: r0, block: end - 2, level: 1 });
        self.ring[1] = Some(Slot { rows: r1, loaded: r1, block: end - 1, level: 0 });
        self.vrl = vec![Some(v0), Some(v1)];
        self.cursor = end;
    }

    /// Counters for `n` fast iterations of a `k`-deep pipeline.
    fn finish_fast(&mut self, n: u64, k: u64) {
        let (vl, reach) = (VL as u64, self.kern.plan.rows[0].reach as u64);
        self.counters.vector_loads += n * vl;
        self.counters.vector_stores += n * vl;
        self.counters.vector_sets += n * k;
        self.counters.assembled += n * k * 2 * reach;
        self.counters.reorg_ops += n * k * 4 * reach;
        self.counters.point_updates += n * k * vl * vl;
    }
}

fn in_place_io(grid: &mut GridBuffer) -> JamIo {
    let p = GridPtr::new(grid);
    JamIo {
        src: p,
        mid_src: p,
        dst: p,
        mid_dst: None,
        outer: [0, 0],
    }
}

fn check_grid(grid: &GridBuffer, spec: &StencilSpec, vl: usize) -> Result<()> {
    if grid.layout() != Layout::BlockTranspose(vl) {
        return Err(Error::LayoutMismatch {
            expected: "block-transpose",
            found: grid.layout(),
        });
    }
    if grid.geometry().d() != 1 || grid.geometry().halo()[0] < spec.r() * 2 {
        return Err(Error::ShapeMismatch);
    }
    Ok(())
}

/// Starts an in-place sweep of a 1D block-transposed grid and runs the
/// booting phase.
pub fn boot<const VL: usize>(grid: &mut GridBuffer, spec: &StencilSpec, k: usize) -> Result<JamState<VL>> {
    check_grid(grid, spec, VL)?;
    let g = grid.geometry();
    let mut st = JamState::new(spec, k, 0, g.blocks_per_row(), g.nx() as isize)?;
    st.boot_io(&in_place_io(grid));
    Ok(st)
}

/// One steady-state iteration. Returns `false` without doing anything once
/// every block was loaded; the caller must then [`drain`].
pub fn pipeline_advance<const VL: usize>(state: &mut JamState<VL>, grid: &mut GridBuffer, spec: &StencilSpec) -> Result<bool> {
    check_grid(grid, spec, VL)?;
    if state.exhausted() {
        return Ok(false);
    }
    state.iterate(&in_place_io(grid), true);
    Ok(true)
}

/// Epilogue: advances and stores the remaining sets.
pub fn drain<const VL: usize>(state: &mut JamState<VL>, grid: &mut GridBuffer, spec: &StencilSpec) -> Result<()> {
    check_grid(grid, spec, VL)?;
    state.drain_io(&in_place_io(grid));
    Ok(())
}

fn sweep_impl<const VL: usize>(grid: &mut GridBuffer, spec: &StencilSpec, k: usize, steps: usize) -> Result<Counters> {
    let mut total = Counters::default();
    let g = *grid.geometry();
    for _ in 0..steps / k {
        let mut st = JamState::<VL>::new(spec, k, 0, g.blocks_per_row(), g.nx() as isize)?;
        st.run(&in_place_io(grid));
        total += st.counters();
    }
    Ok(total)
}

/// Advances a 1D block-transposed grid `steps` steps in place, `k` levels
/// per pass over memory.
pub fn jam_sweep(grid: &mut GridBuffer, spec: &StencilSpec, k: usize, steps: usize) -> Result<Counters> {
    let vl = grid.vl();
    check_jam(spec, k, vl)?;
    if steps % k != 0 {
        return Err(Error::StepsNotDivisible { steps, k });
    }
    check_grid(grid, spec, vl)?;
    kernels::dispatch_vl!(vl, sweep_impl(grid, spec, k, steps))
}
