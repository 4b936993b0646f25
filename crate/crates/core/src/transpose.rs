//! Register transpose networks, their schedule, and layout conversions.
//!
//! A transpose plan for `vl` lanes has `log2(vl)` stages. The stage of width
//! `w` pairs value `i` with value `i + w` (for `i & w == 0`) and exchanges
//! `w`-lane groups between them, the low groups landing at `i` and the high
//! groups at `i + w`. Any order of the widths realizes the transpose; the
//! preferred plan runs the widest (cross-lane) exchanges first so the final
//! in-lane stage hides their latency.

use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::exec;
use crate::grid::{GridBuffer, Layout};
use crate::simd::{lanes, Half, LaneClass, LatencyModel, Parity, Vector};
use crate::vset::VectorSet;

/// Data-movement operation of a plan, with its immediate.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum OpKind {
    HalfExchange(Half, Half),
    /// Exchange of 2-lane groups (8-lane vectors only).
    PairExchange(Parity),
    Interleave(Parity),
    Blend(u32),
    Rotate(usize),
}

impl OpKind {
    pub fn latency_class(self) -> LaneClass {
        match self {
            OpKind::HalfExchange(..) | OpKind::PairExchange(_) | OpKind::Rotate(_) => LaneClass::CrossLane,
            OpKind::Interleave(_) | OpKind::Blend(_) => LaneClass::InLane,
        }
    }

    fn label(self) -> String {
        let p = |p: Parity| match p {
            Parity::Low => "lo",
            Parity::High => "hi",
        };
        let h = |h: Half| match h {
            Half::Low => "lo",
            Half::High => "hi",
        };
        match self {
            OpKind::HalfExchange(a, b) => format!("half_exchange({},{})", h(a), h(b)),
            OpKind::PairExchange(x) => format!("pair_exchange({})", p(x)),
            OpKind::Interleave(x) => format!("interleave({})", p(x)),
            OpKind::Blend(m) => format!("blend({m:#b})"),
            OpKind::Rotate(k) => format!("rotate({k})"),
        }
    }

    fn apply<T: Copy, const VL: usize>(self, a: [T; VL], b: [T; VL]) -> [T; VL] {
        match self {
            OpKind::HalfExchange(x, y) => lanes::half_exchange(a, b, (x, y)),
            OpKind::PairExchange(p) => lanes::block_exchange(a, b, 2, p),
            OpKind::Interleave(p) => lanes::interleave(a, b, p),
            OpKind::Blend(m) => lanes::blend(a, b, m),
            OpKind::Rotate(k) => lanes::rotate(a, k),
        }
    }

    fn apply_vector<const VL: usize>(self, a: Vector<VL>, b: Vector<VL>) -> Vector<VL> {
        match self {
            OpKind::HalfExchange(x, y) => a.half_exchange(b, (x, y)),
            OpKind::PairExchange(p) => a.pair_exchange(b, p),
            OpKind::Interleave(p) => a.interleave(b, p),
            OpKind::Blend(m) => a.blend(b, m),
            OpKind::Rotate(k) => a.rotate_lanes(k),
        }
    }
}

/// One edge of a shuffle network. Value ids are single-assignment.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ShuffleOp {
    pub kind: OpKind,
    pub sources: [usize; 2],
    pub dest: usize,
    pub stage: usize,
}

impl ShuffleOp {
    pub fn latency_class(&self) -> LaneClass {
        self.kind.latency_class()
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ShufflePlan {
    pub vl: usize,
    pub ops: Vec<ShuffleOp>,
    pub inputs: Vec<usize>,
    pub outputs: Vec<usize>,
}

fn exchange_kind(vl: usize, width: usize, parity: Parity) -> OpKind {
    if width == vl / 2 {
        let h = match parity {
            Parity::Low => Half::Low,
            Parity::High => Half::High,
        };
        OpKind::HalfExchange(h, h)
    } else if width == 2 {
        OpKind::PairExchange(parity)
    } else {
        OpKind::Interleave(parity)
    }
}

/// Builds a transpose network running the exchange widths in the given order.
fn plan_with_widths(vl: usize, widths: &[usize]) -> ShufflePlan {
    let mut ops = Vec::with_capacity(vl * widths.len());
    let inputs: Vec<usize> = (0..vl).collect();
    let mut cur = inputs.clone();
    let mut next_id = vl;
    for (s, &w) in widths.iter().enumerate() {
        let mut next = cur.clone();
        for pos in 0..vl {
            let (lo, parity) = if pos & w == 0 {
                (pos, Parity::Low)
            } else {
                (pos - w, Parity::High)
            };
            ops.push(ShuffleOp {
                kind: exchange_kind(vl, w, parity),
                sources: [cur[lo], cur[lo + w]],
                dest: next_id,
                stage: s + 1,
            });
            next[pos] = next_id;
            next_id += 1;
        }
        cur = next;
    }
    ShufflePlan {
        vl,
        ops,
        inputs,
        outputs: cur,
    }
}

fn check_vl(vl: usize) -> Result<()> {
    if vl == 4 || vl == 8 {
        Ok(())
    } else {
        Err(Error::UnsupportedVectorLength(vl))
    }
}

fn widths(vl: usize) -> Vec<usize> {
    let mut out = Vec::new();
    let mut w = vl / 2;
    while w >= 1 {
        out.push(w);
        w /= 2;
    }
    out
}

/// The `vl*log2(vl)`-op transpose network with cross-lane stages first and
/// the in-lane stage last.
pub fn build_transpose_plan(vl: usize) -> Result<ShufflePlan> {
    check_vl(vl)?;
    Ok(plan_with_widths(vl, &widths(vl)))
}

/// Same network with the stage order reversed: in-lane stage first.
pub fn build_stage_swapped_plan(vl: usize) -> Result<ShufflePlan> {
    check_vl(vl)?;
    let mut w = widths(vl);
    w.reverse();
    Ok(plan_with_widths(vl, &w))
}

impl ShufflePlan {
    pub fn stages(&self) -> usize {
        self.ops.iter().map(|o| o.stage).max().unwrap_or(0)
    }

    /// Checks single assignment: every source is defined before use and
    /// every destination is fresh.
    pub fn validate(&self) -> Result<()> {
        let mut defined = vec![false; self.value_count()];
        for &i in &self.inputs {
            defined[i] = true;
        }
        for (k, op) in self.ops.iter().enumerate() {
            for &s in &op.sources {
                if !defined.get(s).copied().unwrap_or(false) {
                    return Err(Error::CyclicPlan { op: k, value: s });
                }
            }
            if defined[op.dest] {
                return Err(Error::CyclicPlan { op: k, value: op.dest });
            }
            defined[op.dest] = true;
        }
        for &o in &self.outputs {
            if !defined.get(o).copied().unwrap_or(false) {
                return Err(Error::CyclicPlan {
                    op: self.ops.len(),
                    value: o,
                });
            }
        }
        Ok(())
    }

    fn value_count(&self) -> usize {
        let m = self.ops.iter().flat_map(|o| [o.sources[0], o.sources[1], o.dest]);
        m.chain(self.inputs.iter().copied())
            .chain(self.outputs.iter().copied())
            .max()
            .map_or(0, |x| x + 1)
    }

    /// Evaluates the plan on arbitrary lane labels.
    pub fn evaluate<T: Copy + Default, const VL: usize>(&self, inputs: [[T; VL]; VL]) -> Result<[[T; VL]; VL]> {
        if self.vl != VL {
            return Err(Error::PlanLaneMismatch { plan: self.vl, set: VL });
        }
        self.validate()?;
        let mut vals = vec![[T::default(); VL]; self.value_count()];
        for (j, &id) in self.inputs.iter().enumerate() {
            vals[id] = inputs[j];
        }
        for op in &self.ops {
            vals[op.dest] = op.kind.apply(vals[op.sources[0]], vals[op.sources[1]]);
        }
        let mut out = [[T::default(); VL]; VL];
        for (j, &id) in self.outputs.iter().enumerate() {
            out[j] = vals[id];
        }
        Ok(out)
    }
}

/// Runs `plan` on the rows of `vs` with the vector operations.
pub fn apply_plan<const VL: usize>(plan: &ShufflePlan, vs: &VectorSet<VL>) -> Result<VectorSet<VL>> {
    if plan.vl != VL {
        return Err(Error::PlanLaneMismatch { plan: plan.vl, set: VL });
    }
    plan.validate()?;
    let mut vals = vec![Vector::<VL>::zero(); plan.value_count()];
    for (j, &id) in plan.inputs.iter().enumerate() {
        vals[id] = vs.rows[j];
    }
    for op in &plan.ops {
        vals[op.dest] = op.kind.apply_vector(vals[op.sources[0]], vals[op.sources[1]]);
    }
    let mut out = *vs;
    for (j, &id) in plan.outputs.iter().enumerate() {
        out.rows[j] = vals[id];
    }
    Ok(out)
}

/// Result of simulating a plan under a [`LatencyModel`].
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ScheduleReport {
    /// Cycle in which the last op issued.
    pub issue_cycles: u32,
    /// Cycle in which the last result became available.
    pub makespan: u32,
    pub stall_free: bool,
    pub issue: Vec<u32>,
    pub complete: Vec<u32>,
}

/// In-order issue simulation. Op `i` has program slot `i / issue_width + 1`
/// and issues at the first cycle, not before its slot nor before its
/// predecessor, at which its sources are complete and an issue port is free.
pub fn schedule_cost(plan: &ShufflePlan, model: &LatencyModel) -> Result<ScheduleReport> {
    plan.validate()?;
    let width = model.issue_width.max(1);
    let mut ready = vec![0u32; plan.value_count()];
    let mut issue = Vec::with_capacity(plan.ops.len());
    let mut complete = Vec::with_capacity(plan.ops.len());
    let mut stall_free = true;
    let mut last_cycle = 0u32;
    let mut used_in_last = 0u32;
    for (i, op) in plan.ops.iter().enumerate() {
        let slot = i as u32 / width + 1;
        let deps = op.sources.iter().map(|&s| ready[s]).max().unwrap_or(0);
        let mut c = slot.max(deps).max(last_cycle);
        if c == last_cycle && used_in_last >= width {
            c += 1;
        }
        if c > slot {
            stall_free = false;
        }
        if c == last_cycle {
            used_in_last += 1;
        } else {
            last_cycle = c;
            used_in_last = 1;
        }
        let done = c + model.latency(op.latency_class());
        ready[op.dest] = done;
        issue.push(c);
        complete.push(done);
    }
    Ok(ScheduleReport {
        issue_cycles: issue.iter().copied().max().unwrap_or(0),
        makespan: complete.iter().copied().max().unwrap_or(0),
        stall_free,
        issue,
        complete,
    })
}

/// Text listing of the plan and its schedule.
pub fn plan_dump(plan: &ShufflePlan, model: &LatencyModel) -> Result<String> {
    let rep = schedule_cost(plan, model)?;
    let mut s = String::new();
    let _ = writeln!(
        s,
        "transpose plan vl={}: {} ops in {} stages (latency in-lane {}, cross-lane {}, issue width {})",
        plan.vl,
        plan.ops.len(),
        plan.stages(),
        model.in_lane_latency,
        model.cross_lane_latency,
        model.issue_width
    );
    let inputs: Vec<String> = plan.inputs.iter().map(|v| format!("v{v}")).collect();
    let _ = writeln!(s, "inputs  {}", inputs.join(" "));
    let _ = writeln!(
        s,
        "{:>3} {:>5}  {:<22} {:<10} {:<5} {:<10} {:>5} {:>5}",
        "op", "stage", "kind", "sources", "dest", "class", "issue", "done"
    );
    for (i, op) in plan.ops.iter().enumerate() {
        let class = match op.latency_class() {
            LaneClass::InLane => "in-lane",
            LaneClass::CrossLane => "cross-lane",
        };
        let _ = writeln!(
            s,
            "{:>3} {:>5}  {:<22} {:<10} {:<5} {:<10} {:>5} {:>5}",
            i,
            op.stage,
            op.kind.label(),
            format!("v{} v{}", op.sources[0], op.sources[1]),
            format!("v{}", op.dest),
            class,
            rep.issue[i],
            rep.complete[i]
        );
    }
    let outputs: Vec<String> = plan.outputs.iter().map(|v| format!("v{v}")).collect();
    let _ = writeln!(s, "outputs {}", outputs.join(" "));
    let _ = writeln!(
        s,
        "issue cycles {}, makespan {}, stall-free {}",
        rep.issue_cycles,
        rep.makespan,
        if rep.stall_free { "yes" } else { "no" }
    );
    Ok(s)
}

#[inline(always)]
fn exchange<const VL: usize>(a: Vector<VL>, b: Vector<VL>, width: usize, p: Parity) -> Vector<VL> {
    if width == VL / 2 {
        let h = match p {
            Parity::Low => Half::Low,
            Parity::High => Half::High,
        };
        a.half_exchange(b, (h, h))
    } else if width == 2 {
        a.pair_exchange(b, p)
    } else {
        a.interleave(b, p)
    }
}

/// The preferred network, unrolled: `out[j].lane(l) == rows[l].lane(j)`.
#[inline(always)]
pub fn transpose_rows<const VL: usize>(rows: [Vector<VL>; VL]) -> [Vector<VL>; VL] {
    let mut cur = rows;
    let mut w = VL / 2;
    while w >= 1 {
        let mut next = cur;
        for i in 0..VL {
            if i & w == 0 {
                next[i] = exchange(cur[i], cur[i + w], w, Parity::Low);
                next[i + w] = exchange(cur[i], cur[i + w], w, Parity::High);
            }
        }
        cur = next;
        w /= 2;
    }
    cur
}

/// Transposes one stored `VL x VL` block in place.
#[inline]
pub(crate) fn transpose_block<const VL: usize>(block: &mut [f64]) {
    debug_assert_eq!(block.len(), VL * VL);
    let mut rows = [Vector::<VL>::zero(); VL];
    for (j, r) in rows.iter_mut().enumerate() {
        *r = Vector::from_slice(&block[j * VL..]);
    }
    let out = transpose_rows(rows);
    for (j, r) in out.iter().enumerate() {
        block[j * VL..(j + 1) * VL].copy_from_slice(&r.0);
    }
}

fn transpose_all_blocks(grid: &mut GridBuffer) {
    let g = *grid.geometry();
    let (lead, padded, vl) = (g.lead(), g.padded(), g.vl());
    exec::for_each_chunk_mut(grid.as_mut_slice(), g.pitch(), |_, row| {
        for block in row[lead..lead + padded].chunks_exact_mut(vl * vl) {
            match vl {
                4 => transpose_block::<4>(block),
                _ => transpose_block::<8>(block),
            }
        }
    });
}

fn check_vl_matches(grid: &GridBuffer, vl: usize) -> Result<()> {
    if grid.vl() != vl {
        return Err(Error::InvalidLayout {
            layout: Layout::BlockTranspose(vl),
            reason: format!("grid was allocated for vl={}", grid.vl()),
        });
    }
    Ok(())
}

/// Transposes every aligned `vl*vl` block of every unit-stride row in place.
pub fn to_block_transpose(grid: &mut GridBuffer, vl: usize) -> Result<()> {
    check_vl_matches(grid, vl)?;
    if grid.layout() != Layout::Natural {
        return Err(Error::LayoutMismatch {
            expected: "natural",
            found: grid.layout(),
        });
    }
    transpose_all_blocks(grid);
    grid.set_layout(Layout::BlockTranspose(vl));
    Ok(())
}

pub fn from_block_transpose(grid: &mut GridBuffer) -> Result<()> {
    if !matches!(grid.layout(), Layout::BlockTranspose(_)) {
        return Err(Error::LayoutMismatch {
            expected: "block-transpose",
            found: grid.layout(),
        });
    }
    transpose_all_blocks(grid);
    grid.set_layout(Layout::Natural);
    Ok(())
}

/// Natural `q*m + c` moves to `c*vl + q`, with `m = n / vl`, in every row.
pub fn to_dlt(grid: &mut GridBuffer, vl: usize) -> Result<()> {
    check_vl_matches(grid, vl)?;
    if grid.layout() != Layout::Natural {
        return Err(Error::LayoutMismatch {
            expected: "natural",
            found: grid.layout(),
        });
    }
    let g = *grid.geometry();
    let n = g.nx();
    if n % vl != 0 {
        return Err(Error::InvalidLayout {
            layout: Layout::Dlt(vl),
            reason: format!("unit-stride extent {n} is not divisible by {vl}"),
        });
    }
    let m = n / vl;
    let lead = g.lead();
    exec::for_each_chunk_mut(grid.as_mut_slice(), g.pitch(), |_, row| {
        let shadow = row[lead..lead + n].to_vec();
        let out = &mut row[lead..lead + n];
        for q in 0..vl {
            for c in 0..m {
                out[c * vl + q] = shadow[q * m + c];
            }
        }
    });
    grid.set_layout(Layout::Dlt(vl));
    Ok(())
}

pub fn from_dlt(grid: &mut GridBuffer) -> Result<()> {
    let Layout::Dlt(vl) = grid.layout() else {
        return Err(Error::LayoutMismatch {
            expected: "dlt",
            found: grid.layout(),
        });
    };
    let g = *grid.geometry();
    let n = g.nx();
    let m = n / vl;
    let lead = g.lead();
    exec::for_each_chunk_mut(grid.as_mut_slice(), g.pitch(), |_, row| {
        let shadow = row[lead..lead + n].to_vec();
        let out = &mut row[lead..lead + n];
        for q in 0..vl {
            for c in 0..m {
                out[q * m + c] = shadow[c * vl + q];
            }
        }
    });
    grid.set_layout(Layout::Natural);
    Ok(())
}

/// Smallest row size `m` whose arithmetic work per middle vector,
/// `(2r+1)(m-1)+1`, covers the `4r` reorganization operations of a block.
pub fn m_min(r: usize) -> usize {
    assert!(r >= 1, "order must be positive");
    let mut m = 1;
    while (2 * r + 1) * (m - 1) + 1 < 4 * r {
        m += 1;
    }
    m
}

#[cfg(test)]
mod tests {
    use super::*;

    fn labels<const VL: usize>() -> [[u32; VL]; VL] {
        let mut a = [[0u32; VL]; VL];
        for (j, row) in a.iter_mut().enumerate() {
            for (l, v) in row.iter_mut().enumerate() {
                *v = (j * VL + l) as u32;
            }
        }
        a
    }

    fn is_transpose<const VL: usize>(out: [[u32; VL]; VL]) -> bool {
        (0..VL).all(|j| (0..VL).all(|l| out[j][l] == (l * VL + j) as u32))
    }

    #[test]
    fn plan_sizes_and_permutation() {
        let p4 = build_transpose_plan(4).unwrap();
        assert_eq!(p4.ops.len(), 8);
        assert_eq!(p4.stages(), 2);
        assert!(p4.ops[..4].iter().all(|o| matches!(o.kind, OpKind::HalfExchange(..))));
        assert!(p4.ops[4..].iter().all(|o| matches!(o.kind, OpKind::Interleave(_))));
        assert!(is_transpose(p4.evaluate(labels::<4>()).unwrap()));

        let p8 = build_transpose_plan(8).unwrap();
        assert_eq!(p8.ops.len(), 24);
        assert_eq!(p8.stages(), 3);
        assert!(p8.ops[16..].iter().all(|o| o.latency_class() == LaneClass::InLane));
        assert!(p8.ops[..16].iter().all(|o| o.latency_class() == LaneClass::CrossLane));
        assert!(is_transpose(p8.evaluate(labels::<8>()).unwrap()));

        for vl in [4, 8] {
            let s = build_stage_swapped_plan(vl).unwrap();
            assert_eq!(s.ops.len(), vl * vl.trailing_zeros() as usize);
        }
        assert!(is_transpose(build_stage_swapped_plan(4).unwrap().evaluate(labels::<4>()).unwrap()));
        assert!(is_transpose(build_stage_swapped_plan(8).unwrap().evaluate(labels::<8>()).unwrap()));
        assert!(matches!(build_transpose_plan(16), Err(Error::UnsupportedVectorLength(16))));
    }

    #[test]
    fn letters_example() {
        let p = build_transpose_plan(4).unwrap();
        let rows = [['A', 'B', 'C', 'D'], ['E', 'F', 'G', 'H'], ['I', 'J', 'K', 'L'], ['M', 'N', 'O', 'P']];
        let out = p.evaluate(rows).unwrap();
        assert_eq!(out, [['A', 'E', 'I', 'M'], ['B', 'F', 'J', 'N'], ['C', 'G', 'K', 'O'], ['D', 'H', 'L', 'P']]);
        // the first stage produces (A,B,I,J), (E,F,M,N), (C,D,K,L), (G,H,O,P)
        let a = lanes::half_exchange(rows[0], rows[2], (Half::Low, Half::Low));
        assert_eq!(a, ['A', 'B', 'I', 'J']);
    }

    #[test]
    fn schedules() {
        let m = LatencyModel::default();
        let good = schedule_cost(&build_transpose_plan(4).unwrap(), &m).unwrap();
        assert_eq!((good.issue_cycles, good.makespan, good.stall_free), (8, 9, true));
        let bad = schedule_cost(&build_stage_swapped_plan(4).unwrap(), &m).unwrap();
        assert_eq!(bad.makespan, 11);

        let good8 = schedule_cost(&build_transpose_plan(8).unwrap(), &m).unwrap();
        assert_eq!((good8.issue_cycles, good8.makespan, good8.stall_free), (24, 25, true));
        let bad8 = schedule_cost(&build_stage_swapped_plan(8).unwrap(), &m).unwrap();
        assert!(bad8.makespan > good8.makespan);

        let wide = LatencyModel {
            issue_width: 2,
            ..m
        };
        let w = schedule_cost(&build_transpose_plan(4).unwrap(), &wide).unwrap();
        assert!(w.issue_cycles >= 4);
        assert!(w.issue.windows(2).all(|p| p[0] <= p[1]));
    }

    #[test]
    fn cyclic_plan_rejected() {
        let mut p = build_transpose_plan(4).unwrap();
        p.ops.swap(0, 4);
        assert!(matches!(schedule_cost(&p, &LatencyModel::default()), Err(Error::CyclicPlan { .. })));
    }

    #[test]
    fn dump_lists_every_op() {
        let d = plan_dump(&build_transpose_plan(4).unwrap(), &LatencyModel::default()).unwrap();
        assert_eq!(d.lines().filter(|l| l.contains("half_exchange")).count(), 4);
        assert!(d.contains("issue cycles 8, makespan 9, stall-free yes"));
    }

    #[test]
    fn apply_plan_matches_network() {
        let vals: Vec<f64> = (0..16).map(f64::from).collect();
        let vs = VectorSet::<4>::from_natural(&vals, 0);
        let p = build_transpose_plan(4).unwrap();
        let t = apply_plan(&p, &vs).unwrap();
        assert_eq!(t.rows, transpose_rows(vs.rows));
        assert_eq!(apply_plan(&p, &t).unwrap(), vs);
        let p8 = build_transpose_plan(8).unwrap();
        assert!(matches!(apply_plan(&p8, &vs), Err(Error::PlanLaneMismatch { plan: 8, set: 4 })));
    }

    #[test]
    fn block_transpose_stored_order() {
        let spec = crate::stencil::make_stencil_spec("1d3p").unwrap();
        let mut g = crate::grid::alloc_grid(&spec, &[16], Layout::Natural, 4).unwrap();
        g.fill_with(|c, i| if i { c[0] as f64 } else { -1.0 });
        to_block_transpose(&mut g, 4).unwrap();
        let lead = g.geometry().lead();
        let stored = &g.as_slice()[lead..lead + 16];
        let want = [0., 4., 8., 12., 1., 5., 9., 13., 2., 6., 10., 14., 3., 7., 11., 15.];
        assert_eq!(stored, &want);
        assert_eq!(g.get(&[1]), 1.0);
        assert!(to_block_transpose(&mut g, 4).is_err());
        from_block_transpose(&mut g).unwrap();
        assert_eq!(&g.as_slice()[lead..lead + 16], &(0..16).map(f64::from).collect::<Vec<_>>()[..]);
    }

    #[test]
    fn dlt_positions() {
        let spec = crate::stencil::make_stencil_spec("1d3p").unwrap();
        let mut g = crate::grid::alloc_grid(&spec, &[28], Layout::Natural, 4).unwrap();
        g.fill_with(|c, i| if i { c[0] as f64 } else { -1.0 });
        to_dlt(&mut g, 4).unwrap();
        let lead = g.geometry().lead();
        let s = &g.as_slice()[lead..lead + 28];
        assert_eq!(&s[4..8], &[1., 8., 15., 22.]);
        assert_eq!(&s[0..4], &[0., 7., 14., 21.]);
        from_dlt(&mut g).unwrap();
        assert_eq!(g.interior_values(), (0..28).map(f64::from).collect::<Vec<_>>());

        let mut bad = crate::grid::alloc_grid(&spec, &[30], Layout::Natural, 4).unwrap();
        assert!(to_dlt(&mut bad, 4).is_err());
    }

    #[test]
    fn m_min_values() {
        assert_eq!(m_min(1), 2);
        assert_eq!(m_min(2), 3);
        assert!((1..=16).all(|r| m_min(r) <= 3));
    }
}
