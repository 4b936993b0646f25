//! Tessellate tiling: space-time tiles run stage by stage.
//!
//! In 1D, stage 0 holds shrinking triangles over blocks `[kB, (k+1)B]` and
//! stage 1 the expanding inverted triangles centered on block boundaries.
//! Higher dimensions take products of the per-dimension profiles; stage `s`
//! holds the products with exactly `s` expanding dimensions. Level `t` of the
//! grid lives in buffer `t % 2`, so a tile reads level `t-1` from one buffer
//! and writes level `t` into the other.

use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::exec::Workers;
use crate::grid::{GridBuffer, GridPtr, Layout, Region};
use crate::kernels::{self, dispatch_vl, point_segment, step_region, Counters, Kern, KernelMethod, Method};
use crate::stencil::StencilSpec;
use crate::timejam::{JamIo, JamState};

/// Extent of a tile along one dimension: at local step `j` (from 1) it covers
/// `[lo - growth*j, hi + growth*j)`, clipped to the grid.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct DimSpan {
    pub lo: isize,
    pub hi: isize,
    /// `-r` shrinking, `+r` expanding, `0` flat.
    pub growth: isize,
}

impl DimSpan {
    pub fn at(&self, j: usize, n: usize) -> (isize, isize) {
        let g = self.growth * j as isize;
        ((self.lo - g).max(0), (self.hi + g).min(n as isize))
    }

    pub fn expands(&self) -> bool {
        self.growth > 0
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Tile {
    pub stage: usize,
    pub spans: Vec<DimSpan>,
}

impl Tile {
    /// Cells updated at local step `j` (1-based).
    pub fn region(&self, j: usize, dims: &[usize]) -> Region {
        let d = self.spans.len();
        let mut lo = [0; 3];
        let mut hi = [0; 3];
        for k in 0..d {
            (lo[k], hi[k]) = self.spans[k].at(j, dims[k]);
        }
        Region { d, lo, hi }
    }
}

/// Tiles of one cycle grouped by stage. Cycles repeat every `height` steps;
/// the last one is cut short when `steps` is not a multiple of `height`.
#[derive(Clone, Debug)]
pub struct TileSchedule {
    pub stages: Vec<Vec<Tile>>,
    pub dims: Vec<usize>,
    pub block: Vec<usize>,
    pub height: usize,
    pub r: usize,
    pub steps: usize,
}

impl TileSchedule {
    pub fn d(&self) -> usize {
        self.dims.len()
    }

    /// `(first level, steps)` of every cycle.
    pub fn cycles(&self) -> Vec<(usize, usize)> {
        if self.height == 0 {
            return Vec::new();
        }
        (0..self.steps)
            .step_by(self.height)
            .map(|t0| (t0, self.height.min(self.steps - t0)))
            .collect()
    }

    /// Sets the total number of steps (one cycle by default).
    pub fn with_steps(mut self, steps: usize) -> Self {
        self.steps = steps;
        self
    }
}

fn broadcast(block: &[usize], d: usize) -> Result<Vec<usize>> {
    match block.len() {
        1 => Ok(vec![block[0]; d]),
        n if n == d => Ok(block.to_vec()),
        n => Err(Error::TileConstraint(format!("{n} block sizes given for {d} dimensions"))),
    }
}

/// Per-dimension profiles: shrinking triangles, then inverted triangles.
fn profiles(n: usize, b: usize, height: usize, r: usize) -> Result<(Vec<DimSpan>, Vec<DimSpan>)> {
    if b == 0 || n % b != 0 {
        return Err(Error::TileConstraint(format!("block size {b} must divide extent {n}")));
    }
    if b < 2 * r * height {
        return Err(Error::TileConstraint(format!(
            "B >= 2*r*T_b violated: {b} < 2*{r}*{height}"
        )));
    }
    let (b, r) = (b as isize, r as isize);
    let shrink = (0..n as isize / b)
        .map(|k| DimSpan {
            lo: k * b,
            hi: (k + 1) * b + 1,
            growth: -r,
        })
        .collect();
    let expand = (0..=n as isize / b)
        .map(|k| DimSpan {
            lo: k * b + 1,
            hi: k * b,
            growth: r,
        })
        .collect();
    Ok((shrink, expand))
}

/// Product tessellation over any number of dimensions: `d + 1` stages.
pub fn build_tessellation(dims: &[usize], block: &[usize], height: usize, r: usize) -> Result<TileSchedule> {
    let d = dims.len();
    let block = broadcast(block, d)?;
    let per_dim = dims
        .iter()
        .zip(&block)
        .map(|(&n, &b)| profiles(n, b, height, r))
        .collect::<Result<Vec<_>>>()?;
    let mut stages = vec![Vec::new(); d + 1];
    let mut partial: Vec<Vec<DimSpan>> = vec![Vec::new()];
    for (shrink, expand) in &per_dim {
        partial = partial
            .into_iter()
            .flat_map(|p| {
                shrink.iter().chain(expand).map(move |s| {
                    let mut q = p.clone();
                    q.push(*s);
                    q
                })
            })
            .collect();
    }
    for spans in partial {
        let stage = spans.iter().filter(|s| s.expands()).count();
        stages[stage].push(Tile { stage, spans });
    }
    Ok(TileSchedule {
        stages,
        dims: dims.to_vec(),
        block,
        height,
        r,
        steps: height,
    })
}

pub fn build_tessellation_1d(n: usize, block: usize, height: usize, r: usize) -> Result<TileSchedule> {
    build_tessellation(&[n], &[block], height, r)
}

pub fn build_tessellation_2d(dims: [usize; 2], block: usize, height: usize, r: usize) -> Result<TileSchedule> {
    build_tessellation(&dims, &[block], height, r)
}

/// Plain spatial blocking, one step per cycle, one stage. Edge blocks may be
/// partial.
pub fn build_spatial_blocking(dims: &[usize], block: &[usize], r: usize) -> Result<TileSchedule> {
    let d = dims.len();
    let block = broadcast(block, d)?;
    if block.contains(&0) {
        return Err(Error::TileConstraint("block size must be positive".into()));
    }
    let mut partial: Vec<Vec<DimSpan>> = vec![Vec::new()];
    for (&n, &b) in dims.iter().zip(&block) {
        partial = partial
            .into_iter()
            .flat_map(|p| {
                (0..n.div_ceil(b)).map(move |k| {
                    let mut q = p.clone();
                    q.push(DimSpan {
                        lo: (k * b) as isize,
                        hi: ((k + 1) * b).min(n) as isize,
                        growth: 0,
                    });
                    q
                })
            })
            .collect();
    }
    let tiles = partial.into_iter().map(|spans| Tile { stage: 0, spans }).collect();
    Ok(TileSchedule {
        stages: vec![tiles],
        dims: dims.to_vec(),
        block,
        height: 1,
        r,
        steps: 1,
    })
}

/// Temporal tessellation in 1D and 2D, spatial blocking in 3D.
pub fn build_schedule(dims: &[usize], block: &[usize], height: usize, r: usize, steps: usize) -> Result<TileSchedule> {
    let s = if dims.len() >= 3 {
        build_spatial_blocking(dims, block, r)?
    } else {
        build_tessellation(dims, block, height, r)?
    };
    Ok(s.with_steps(steps))
}

// ---------------------------------------------------------------------------
// Simulation.

fn flat_index(c: &[isize], dims: &[usize]) -> usize {
    c.iter().zip(dims).fold(0, |acc, (&x, &n)| acc * n + x as usize)
}

fn unflat(mut i: usize, dims: &[usize]) -> Vec<usize> {
    let mut c = vec![0; dims.len()];
    for k in (0..dims.len()).rev() {
        c[k] = i % dims[k];
        i /= dims[k];
    }
    c
}

fn region_cells(reg: &Region) -> Vec<Vec<isize>> {
    let mut out = vec![Vec::new()];
    for k in 0..reg.d {
        out = out
            .into_iter()
            .flat_map(|p| {
                (reg.lo[k]..reg.hi[k]).map(move |x| {
                    let mut q = p.clone();
                    q.push(x);
                    q
                })
            })
            .collect();
    }
    if reg.is_empty() {
        out.clear();
    }
    out
}

/// Per-cell update counts after running the first `max_stages` stage
/// executions of `schedule` (counting across cycles).
///
/// Besides counting, the simulation checks that every (cell, level) is
/// computed once and in order, that every read of level `t-1` finds it still
/// in its buffer, and that no two tiles of a stage touch the same
/// (cell, buffer) when one of them writes it.
pub fn update_counts_after(schedule: &TileSchedule, max_stages: usize) -> Result<Vec<usize>> {
    let dims = &schedule.dims;
    let total: usize = dims.iter().product();
    let r = schedule.r as isize;
    let mut level = vec![0usize; total];
    let mut writer = vec![[u32::MAX; 2]; total];
    let mut readers: Vec<[Vec<u32>; 2]> = vec![[Vec::new(), Vec::new()]; total];
    let mut stamp = vec![[usize::MAX; 2]; total];
    let mut executed = 0;
    let mut offsets = vec![Vec::new()];
    for _ in 0..dims.len() {
        offsets = offsets
            .into_iter()
            .flat_map(|p: Vec<isize>| {
                (-r..=r).map(move |o| {
                    let mut q = p.clone();
                    q.push(o);
                    q
                })
            })
            .collect();
    }
    'outer: for (t0, h) in schedule.cycles() {
        for stage in &schedule.stages {
            if executed == max_stages {
                break 'outer;
            }
            executed += 1;
            for (ti, tile) in stage.iter().enumerate() {
                let ti = ti as u32;
                for j in 1..=h {
                    let lvl = t0 + j;
                    let (pw, pr) = (lvl % 2, (lvl - 1) % 2);
                    for cell in region_cells(&tile.region(j, dims)) {
                        let i = flat_index(&cell, dims);
                        if level[i] >= lvl {
                            return Err(Error::DoubleUpdate {
                                coords: cell.iter().map(|&x| x as usize).collect(),
                                level: lvl,
                            });
                        }
                        if level[i] + 1 != lvl {
                            return Err(Error::TileConstraint(format!(
                                "cell {cell:?} computed at level {lvl} while at level {}",
                                level[i]
                            )));
                        }
                        for off in &offsets {
                            let nb: Vec<isize> = cell.iter().zip(off).map(|(a, b)| a + b).collect();
                            if nb.iter().zip(dims).any(|(&x, &n)| x < 0 || x >= n as isize) {
                                continue;
                            }
                            let y = flat_index(&nb, dims);
                            if level[y] + 1 != lvl && level[y] != lvl {
                                return Err(Error::TileConstraint(format!(
                                    "cell {cell:?} at level {lvl} reads {nb:?} at level {}",
                                    level[y]
                                )));
                            }
                            if stamp[y][pr] != executed {
                                stamp[y][pr] = executed;
                                writer[y][pr] = u32::MAX;
                                readers[y][pr].clear();
                            }
                            if writer[y][pr] != u32::MAX && writer[y][pr] != ti {
                                return Err(Error::TileConstraint(format!(
                                    "tiles {} and {ti} of stage {} race on cell {nb:?}",
                                    writer[y][pr], tile.stage
                                )));
                            }
                            if readers[y][pr].last() != Some(&ti) {
                                readers[y][pr].push(ti);
                            }
                        }
                        if stamp[i][pw] != executed {
                            stamp[i][pw] = executed;
                            writer[i][pw] = u32::MAX;
                            readers[i][pw].clear();
                        }
                        if (writer[i][pw] != u32::MAX && writer[i][pw] != ti) || readers[i][pw].iter().any(|&t| t != ti) {
                            return Err(Error::TileConstraint(format!(
                                "tile {ti} of stage {} writes cell {cell:?} touched by another tile",
                                tile.stage
                            )));
                        }
                        writer[i][pw] = ti;
                        level[i] = lvl;
                    }
                }
            }
        }
    }
    Ok(level)
}

/// Per-cell update counts after the whole schedule.
pub fn update_count_map(schedule: &TileSchedule) -> Result<Vec<usize>> {
    update_counts_after(schedule, usize::MAX)
}

/// Coordinates of flat cell `i` in an update-count map.
pub fn count_coords(i: usize, dims: &[usize]) -> Vec<usize> {
    unflat(i, dims)
}

/// Human-readable schedule summary.
pub fn schedule_dump(schedule: &TileSchedule, jam_k: usize) -> String {
    let mut s = String::new();
    let cycles = schedule.cycles();
    let _ = writeln!(
        s,
        "tile schedule: dims {:?}, block {:?}, height {}, r {}, steps {}, {} cycle(s), {} stage(s)",
        schedule.dims,
        schedule.block,
        schedule.height,
        schedule.r,
        schedule.steps,
        cycles.len(),
        schedule.stages.len()
    );
    for (k, stage) in schedule.stages.iter().enumerate() {
        let _ = write!(s, "stage {k}: {} tiles", stage.len());
        if let Some(t) = stage.iter().find(|t| !t.region(1, &schedule.dims).is_empty()).or(stage.first()) {
            let spans: Vec<String> = t
                .spans
                .iter()
                .map(|d| format!("[{}, {}) growth {:+}", d.lo, d.hi, d.growth))
                .collect();
            let _ = write!(s, "; sample {}", spans.join(" x "));
        }
        s.push('\n');
    }
    if jam_k > 1 {
        let odd = cycles.iter().filter(|(_, h)| h % jam_k != 0).count();
        let _ = writeln!(s, "jam k={jam_k} per step pair inside tiles");
        if odd > 0 {
            let _ = writeln!(s, "fallback: {odd} cycle(s) with an odd height finish with a single k=1 step");
        }
    }
    s
}

// ---------------------------------------------------------------------------
// Execution.

/// Element-wise update of the cells of `tile` at local step `step` that lie in
/// vector sets the tile only partly covers. Full blocks are left alone.
pub fn boundary_vs_pass(tile: &Tile, src: &GridBuffer, dst: &mut GridBuffer, spec: &StencilSpec, step: usize) -> Result<Counters> {
    let vl = src.vl();
    kernels::check_pair(src, dst, spec, Layout::BlockTranspose(vl), "block-transpose")?;
    let plan = kernels::TapPlan::new(spec);
    let reg = tile.region(step, src.dims());
    let s = GridPtr::read_only(src);
    let d = GridPtr::new(dst);
    let mut c = Counters::default();
    for outer in reg.rows() {
        for (lo, hi) in edge_parts(reg.unit(), (vl * vl) as isize) {
            // SAFETY: cells within the interior of both buffers.
            unsafe { point_segment(&plan, &s, &d, outer, lo, hi, &mut c) };
        }
    }
    Ok(c)
}

/// Full blocks inside `[lo, hi)`, as a block range.
fn full_blocks((lo, hi): (isize, isize), bs: isize) -> (isize, isize) {
    let b0 = (lo + bs - 1).div_euclid(bs);
    let b1 = hi.div_euclid(bs);
    if b0 < b1 { (b0, b1) } else { (0, 0) }
}

fn edge_parts((lo, hi): (isize, isize), bs: isize) -> Vec<(isize, isize)> {
    let (b0, b1) = full_blocks((lo, hi), bs);
    if b0 == b1 {
        return if lo < hi { vec![(lo, hi)] } else { Vec::new() };
    }
    vec![(lo, b0 * bs), (b1 * bs, hi)]
}

/// One tile of one cycle. `bufs[t % 2]` holds level `t`.
#[allow(clippy::too_many_arguments)]
unsafe fn run_tile<const VL: usize>(
    kern: &Kern<VL>,
    tag: Method,
    jam_k: usize,
    tile: &Tile,
    dims: &[usize],
    t0: usize,
    h: usize,
    bufs: &[GridPtr; 2],
) -> Counters {
    let mut c = Counters::default();
    let bs = (VL * VL) as isize;
    let mut j = 1;
    if tag == Method::Transpose && jam_k == 2 {
        while j + 1 <= h {
            let (a, b) = (&bufs[(t0 + j - 1) % 2], &bufs[(t0 + j) % 2]);
            let r0 = tile.region(j, dims).unit();
            let r1 = tile.region(j + 1, dims).unit();
            let (jb0, jb1) = full_blocks((r0.0.max(r1.0), r0.1.min(r1.1)), bs);
            let (jlo, jhi) = (jb0 * bs, jb1 * bs);
            let parts = |(lo, hi): (isize, isize)| {
                if jlo == jhi { vec![(lo, hi)] } else { vec![(lo, jlo.max(lo)), (jhi.min(hi), hi)] }
            };
            for (lo, hi) in parts(r0) {
                point_segment(&kern.plan, a, b, [0, 0], lo, hi, &mut c);
            }
            if jb0 < jb1 {
                let mut st = JamState::<VL>::new_unchecked(kern, 2, jb0 as usize, jb1 as usize, r0.1);
                st.run(&JamIo {
                    src: *a,
                    mid_src: *b,
                    dst: *a,
                    mid_dst: Some(*b),
                    outer: [0, 0],
                });
                c += st.counters();
            }
            for (lo, hi) in parts(r1) {
                point_segment(&kern.plan, b, a, [0, 0], lo, hi, &mut c);
            }
            j += 2;
        }
    }
    while j <= h {
        let (a, b) = (&bufs[(t0 + j - 1) % 2], &bufs[(t0 + j) % 2]);
        step_region(tag, kern, a, b, &tile.region(j, dims), &mut c);
        j += 1;
    }
    c
}

fn run_impl<const VL: usize>(
    grid: &mut GridBuffer,
    spec: &StencilSpec,
    schedule: &TileSchedule,
    tag: Method,
    jam_k: usize,
    workers: usize,
) -> Result<Counters> {
    let kern = Kern::<VL>::new(spec)?;
    let mut other = grid.clone();
    let bufs = [GridPtr::new(grid), GridPtr::new(&mut other)];
    let pool = Workers::new(workers);
    let dims = schedule.dims.clone();
    let mut total = Counters::default();
    for (t0, h) in schedule.cycles() {
        for stage in &schedule.stages {
            // SAFETY: tiles of a stage write disjoint (cell, buffer) pairs and
            // never read what another tile of the stage writes; `map` returns
            // only after every tile finished.
            let parts = pool.map(stage.len(), |i| unsafe { run_tile(&kern, tag, jam_k, &stage[i], &dims, t0, h, &bufs) });
            total += parts.into_iter().sum();
        }
    }
    if schedule.steps % 2 == 1 {
        std::mem::swap(grid, &mut other);
    }
    Ok(total)
}

/// Advances `grid` by `schedule.steps` steps tile by tile.
pub fn run_tiled(
    grid: &mut GridBuffer,
    spec: &StencilSpec,
    schedule: &TileSchedule,
    method: KernelMethod,
    jam_k: usize,
    workers: usize,
) -> Result<Counters> {
    if grid.layout() != method.layout() {
        return Err(Error::LayoutMismatch {
            expected: method.layout().name(),
            found: grid.layout(),
        });
    }
    if method.tag == Method::Dlt {
        return Err(Error::InvalidCombination {
            method: "dlt".into(),
            what: "tiling".into(),
        });
    }
    if jam_k != 1 {
        if method.tag != Method::Transpose {
            return Err(Error::InvalidCombination {
                method: method.tag.label().into(),
                what: format!("jam-k {jam_k}"),
            });
        }
        crate::timejam::check_jam(spec, jam_k, method.vl)?;
    }
    if schedule.dims != grid.dims() || schedule.r != spec.r() || spec.d() != grid.geometry().d() {
        return Err(Error::ShapeMismatch);
    }
    dispatch_vl!(method.vl, run_impl(grid, spec, schedule, method.tag, jam_k, workers))
}
