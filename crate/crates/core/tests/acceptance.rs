//! Acceptance criteria 1-9, one PASS/FAIL line each. Runs without the libtest
//! harness so the lines always show and the timing check runs alone.

use std::process::ExitCode;
use std::time::Instant;

use rand::{RngExt, SeedableRng};
use vstencil::kernels::{self, KernelMethod, Method};
use vstencil::simd::LatencyModel;
use vstencil::stencil::Preset;
use vstencil::tiling::{self, build_schedule, run_tiled, update_count_map, update_counts_after};
use vstencil::timejam::{check_jam, jam_sweep};
use vstencil::transpose::{self, apply_plan, build_stage_swapped_plan, build_transpose_plan, schedule_cost};
use vstencil::{alloc_grid, max_relative_error, GridBuffer, Layout, StencilSpec, VectorSet};

type Outcome = Result<String, String>;

fn ensure(ok: bool, msg: impl Into<String>) -> Result<(), String> {
    if ok { Ok(()) } else { Err(msg.into()) }
}

fn random_grid(spec: &StencilSpec, dims: &[usize], vl: usize, seed: u64) -> GridBuffer {
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let mut g = alloc_grid(spec, dims, Layout::Natural, vl).unwrap();
    g.fill_with(|_, _| rng.random::<f64>());
    g
}

fn problem_dims(d: usize) -> Vec<usize> {
    match d {
        1 => vec![16384],
        2 => vec![256, 256],
        _ => vec![64, 64, 64],
    }
}

/// A way of advancing a grid: layout, optional tiling, jam factor.
#[derive(Clone, Copy, Debug)]
struct Pipeline {
    method: Method,
    jam_k: usize,
    tiled: bool,
}

impl Pipeline {
    fn label(&self) -> String {
        format!(
            "{}{}{}",
            self.method,
            if self.jam_k > 1 { format!("+jam{}", self.jam_k) } else { String::new() },
            if self.tiled { "+tiled" } else { "" }
        )
    }
}

fn pipelines(d: usize) -> Vec<Pipeline> {
    let mut v = Vec::new();
    for method in [Method::Multiload, Method::Reorg, Method::Dlt, Method::Transpose] {
        v.push(Pipeline { method, jam_k: 1, tiled: false });
        if method != Method::Dlt {
            v.push(Pipeline { method, jam_k: 1, tiled: true });
        }
    }
    if d == 1 {
        v.push(Pipeline { method: Method::Transpose, jam_k: 2, tiled: false });
        v.push(Pipeline { method: Method::Transpose, jam_k: 2, tiled: true });
    }
    v
}

fn tile_params(d: usize) -> (Vec<usize>, usize) {
    match d {
        1 => (vec![2048], 64),
        2 => (vec![64], 16),
        _ => (vec![16], 1),
    }
}

/// Advances a grid held in the pipeline's layout.
fn advance(g: &mut GridBuffer, spec: &StencilSpec, p: Pipeline, vl: usize, steps: usize) -> Result<(), String> {
    let e = |e: vstencil::Error| e.to_string();
    if p.tiled {
        let (block, h) = tile_params(spec.d());
        let s = build_schedule(g.dims(), &block, h, spec.r(), steps).map_err(e)?;
        run_tiled(g, spec, &s, KernelMethod::new(p.method, vl).map_err(e)?, p.jam_k, 2).map_err(e)?;
    } else if p.jam_k > 1 {
        jam_sweep(g, spec, p.jam_k, steps).map_err(e)?;
    } else {
        let mut other = g.clone();
        for _ in 0..steps {
            kernels::step(p.method, g, &mut other, spec).map_err(e)?;
            std::mem::swap(g, &mut other);
        }
    }
    Ok(())
}

fn natural_copy(g: &GridBuffer) -> GridBuffer {
    let mut c = g.clone();
    match c.layout() {
        Layout::BlockTranspose(_) => transpose::from_block_transpose(&mut c).unwrap(),
        Layout::Dlt(_) => transpose::from_dlt(&mut c).unwrap(),
        Layout::Natural => {}
    }
    c
}

fn criterion_1() -> Outcome {
    let checkpoints = [2usize, 16, 128];
    let vl = 4;
    let mut runs = 0;
    let mut worst = 0.0f64;
    for preset in Preset::ALL {
        let spec = StencilSpec::preset(preset);
        let dims = problem_dims(spec.d());
        let start = random_grid(&spec, &dims, vl, 1);
        let mut oracle = Vec::new();
        let (mut a, mut b) = (start.clone(), start.clone());
        let mut t = 0;
        for &cp in &checkpoints {
            while t < cp {
                kernels::scalar_step(&a, &mut b, &spec).map_err(|e| e.to_string())?;
                std::mem::swap(&mut a, &mut b);
                t += 1;
            }
            oracle.push(a.clone());
        }
        for p in pipelines(spec.d()) {
            let mut g = start.clone();
            match p.method {
                Method::Transpose => transpose::to_block_transpose(&mut g, vl).unwrap(),
                Method::Dlt => transpose::to_dlt(&mut g, vl).unwrap(),
                _ => {}
            }
            let mut t = 0;
            for (i, &cp) in checkpoints.iter().enumerate() {
                advance(&mut g, &spec, p, vl, cp - t)?;
                t = cp;
                let err = max_relative_error(&natural_copy(&g), &oracle[i]);
                worst = worst.max(err / cp as f64);
                ensure(
                    err <= 1e-13 * cp as f64,
                    format!("{preset} {} T={cp}: max rel err {err:.3e}", p.label()),
                )?;
                runs += 1;
            }
        }
    }
    Ok(format!("{runs} preset/pipeline/T checks, worst err/T {worst:.2e}"))
}

fn criterion_2() -> Outcome {
    for (vl, ops) in [(4usize, 8usize), (8, 24)] {
        let plan = build_transpose_plan(vl).map_err(|e| e.to_string())?;
        ensure(plan.ops.len() == ops, format!("vl={vl}: {} ops", plan.ops.len()))?;
        ensure(ops == vl * vl.ilog2() as usize, "op count is not vl*log2(vl)")?;
        let ok = if vl == 4 {
            let m: [[usize; 4]; 4] = std::array::from_fn(|i| std::array::from_fn(|j| i * 4 + j));
            let out = plan.evaluate(m).map_err(|e| e.to_string())?;
            (0..4).all(|i| (0..4).all(|j| out[i][j] == m[j][i]))
        } else {
            let m: [[usize; 8]; 8] = std::array::from_fn(|i| std::array::from_fn(|j| i * 8 + j));
            let out = plan.evaluate(m).map_err(|e| e.to_string())?;
            (0..8).all(|i| (0..8).all(|j| out[i][j] == m[j][i]))
        };
        ensure(ok, format!("vl={vl}: plan does not transpose"))?;
    }
    Ok("8 ops (vl=4), 24 ops (vl=8), both transpose symbolically".into())
}

fn criterion_3() -> Outcome {
    let t = Instant::now();
    let model = LatencyModel::default();
    let good = schedule_cost(&build_transpose_plan(4).unwrap(), &model).map_err(|e| e.to_string())?;
    let bad = schedule_cost(&build_stage_swapped_plan(4).unwrap(), &model).map_err(|e| e.to_string())?;
    ensure(good.stall_free && good.issue_cycles == 8, format!("improved plan: {good:?}"))?;
    ensure(good.makespan == 9 && bad.makespan == 11, format!("makespans {} vs {}", good.makespan, bad.makespan))?;
    ensure(t.elapsed().as_secs_f64() < 1.0, "scheduling took over 1 s")?;
    Ok(format!(
        "improved: {} issue cycles, makespan {}, stall-free; swapped makespan {}",
        good.issue_cycles, good.makespan, bad.makespan
    ))
}

fn criterion_4() -> Outcome {
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(4);
    for i in 0..1000 {
        let preset = Preset::ALL[i % 6];
        let spec = StencilSpec::preset(preset);
        let vl = if i % 2 == 0 { 4 } else { 8 };
        let dims: Vec<usize> = (0..spec.d())
            .map(|k| if k + 1 == spec.d() { rng.random_range(1..300) } else { rng.random_range(1..6) })
            .collect();
        let g = random_grid(&spec, &dims, vl, i as u64);
        let mut bt = g.clone();
        transpose::to_block_transpose(&mut bt, vl).unwrap();
        transpose::from_block_transpose(&mut bt).unwrap();
        ensure(bt.as_slice() == g.as_slice(), format!("block-transpose round trip failed on {dims:?}"))?;
        // The lifted layout needs the unit-stride extent to be a multiple of vl.
        let dims_dlt: Vec<usize> = dims.iter().enumerate().map(|(k, &n)| if k + 1 == dims.len() { n.div_ceil(vl) * vl } else { n }).collect();
        let g = random_grid(&spec, &dims_dlt, vl, i as u64);
        let mut dl = g.clone();
        transpose::to_dlt(&mut dl, vl).unwrap();
        transpose::from_dlt(&mut dl).unwrap();
        ensure(dl.as_slice() == g.as_slice(), format!("dlt round trip failed on {dims_dlt:?}"))?;
    }
    let plan = build_transpose_plan(4).unwrap();
    let vals: Vec<f64> = (0..16).map(|_| rng.random::<f64>()).collect();
    let vs = VectorSet::<4>::from_natural(&vals, 0);
    let twice = apply_plan(&plan, &apply_plan(&plan, &vs).unwrap()).unwrap();
    ensure(twice == vs, "apply_plan twice is not the identity")?;
    Ok("1000 random grids round-trip bit-identically; plan applied twice is identity".into())
}

fn criterion_5() -> Outcome {
    let spec = StencilSpec::preset(Preset::OneD3P);
    let n = 16384;
    let g = random_grid(&spec, &[n], 4, 5);
    let mut t = g.clone();
    transpose::to_block_transpose(&mut t, 4).unwrap();
    let c2 = jam_sweep(&mut t, &spec, 2, 100).map_err(|e| e.to_string())?;
    transpose::from_block_transpose(&mut t).unwrap();
    let (mut a, mut b) = (g.clone(), g.clone());
    for _ in 0..100 {
        kernels::scalar_step(&a, &mut b, &spec).unwrap();
        std::mem::swap(&mut a, &mut b);
    }
    let err = max_relative_error(&t, &a);
    ensure(err <= 1e-11, format!("jam k=2 T=100 error {err:.3e}"))?;
    let need = check_jam(&spec, 2, 4).map_err(|e| e.to_string())?;
    ensure(need == 13, format!("budget for k=2 is {need}"))?;
    ensure(check_jam(&spec, 3, 4).is_err(), "k=3 accepted")?;
    let rounds = 100 / 2;
    ensure(
        c2.vector_loads * 4 == (rounds * n) as u64 && c2.element_stores(4) == (rounds * n) as u64,
        format!("traffic {} loads / {} stores for {rounds} rounds of {n}", c2.vector_loads * 4, c2.element_stores(4)),
    )?;
    Ok(format!("err {err:.2e}; budget 13 <= 16, k=3 rejected; {rounds} load+store rounds for T=100"))
}

fn criterion_6() -> Outcome {
    let fig = tiling::build_tessellation_1d(16, 8, 4, 1).map_err(|e| e.to_string())?;
    let c = update_counts_after(&fig, 1).map_err(|e| e.to_string())?;
    ensure(c[..9] == [0, 1, 2, 3, 4, 3, 2, 1, 0], format!("triangle profile {:?}", &c[..9]))?;
    let mut tested = 0;
    for (n, b, h, r) in [(16, 8, 4, 1), (8, 8, 2, 1), (256, 64, 32, 1), (256, 64, 16, 2), (300, 60, 7, 2), (4096, 512, 64, 1)] {
        let s = tiling::build_tessellation_1d(n, b, h, r).map_err(|e| e.to_string())?;
        let counts = update_count_map(&s).map_err(|e| e.to_string())?;
        ensure(counts.iter().all(|&x| x == h), format!("1D n={n} B={b} T_b={h} r={r}"))?;
        tested += 1;
    }
    for (n, b, h, r) in [(16, 16, 2, 1), (32, 8, 4, 1), (48, 24, 6, 2), (64, 32, 16, 1)] {
        let s = tiling::build_tessellation_2d([n, n], b, h, r).map_err(|e| e.to_string())?;
        ensure(s.stages.len() == 3, "2D schedule without 3 stages")?;
        let counts = update_count_map(&s).map_err(|e| e.to_string())?;
        ensure(counts.iter().all(|&x| x == h), format!("2D n={n} B={b} T_b={h} r={r}"))?;
        tested += 1;
    }
    // Blocking rows of the benchmark table: (B, T_b, r).
    for (b, h, r) in [(2000, 1000, 1), (2000, 500, 2), (200, 50, 1), (120, 60, 1), (23, 10, 1)] {
        ensure(b >= 2 * r * h, format!("table row B={b} T_b={h} r={r}"))?;
    }
    Ok(format!("{tested} schedules exact-once with final count T_b; triangle profile 0..4..0; table rows satisfy B >= 2rT_b"))
}

fn criterion_7() -> Outcome {
    let cases: [(Preset, Vec<usize>, Vec<usize>, usize, Method, usize); 4] = [
        (Preset::OneD3P, vec![16384], vec![2048], 64, Method::Transpose, 2),
        (Preset::OneD5P, vec![8192], vec![1024], 32, Method::Reorg, 1),
        (Preset::TwoD9P, vec![128, 128], vec![32], 8, Method::Transpose, 1),
        (Preset::ThreeD27P, vec![24, 24, 32], vec![8], 1, Method::Multiload, 1),
    ];
    for (preset, dims, block, h, method, k) in cases {
        let spec = StencilSpec::preset(preset);
        let s = build_schedule(&dims, &block, h, spec.r(), 4 * h).map_err(|e| e.to_string())?;
        let mut outs = Vec::new();
        for w in [1, 2, 4, 8] {
            let mut g = random_grid(&spec, &dims, 4, 7);
            if method == Method::Transpose {
                transpose::to_block_transpose(&mut g, 4).unwrap();
            }
            run_tiled(&mut g, &spec, &s, KernelMethod::new(method, 4).unwrap(), k, w).map_err(|e| e.to_string())?;
            outs.push(g);
        }
        ensure(
            outs.windows(2).all(|p| p[0].as_slice() == p[1].as_slice()),
            format!("{preset} {method}: outputs differ across worker counts"),
        )?;
    }
    Ok("4 tiled configurations bit-identical for workers 1, 2, 4, 8".into())
}

fn criterion_8() -> Outcome {
    let mut notes = Vec::new();
    for preset in [Preset::OneD3P, Preset::OneD5P] {
        let spec = StencilSpec::preset(preset);
        let n = 16384;
        let g = random_grid(&spec, &[n], 4, 8);
        let mut out = g.clone();
        let ml = kernels::multiload_step(&g, &mut out, &spec).map_err(|e| e.to_string())?;
        let mut bt = g.clone();
        transpose::to_block_transpose(&mut bt, 4).unwrap();
        let mut out = bt.clone();
        let tr = kernels::transpose_layout_step(&bt, &mut out, &spec).map_err(|e| e.to_string())?;
        let taps = spec.weights().len() as u64;
        ensure(
            ml.vector_loads == taps * tr.vector_loads,
            format!("{preset}: multiload {} vs transpose {} vector loads", ml.vector_loads, tr.vector_loads),
        )?;
        let per_vs = tr.reorg_ops as f64 / tr.vector_sets as f64;
        ensure(per_vs == 4.0 * spec.r() as f64, format!("{preset}: {per_vs} reorganization ops per set"))?;
        notes.push(format!("{preset}: loads x{}, {per_vs} reorg ops/set", ml.vector_loads / tr.vector_loads));
    }
    Ok(notes.join("; "))
}

fn criterion_9() -> Outcome {
    let spec = StencilSpec::preset(Preset::OneD3P);
    let (n, steps) = (10_240_000, 100);
    let g = random_grid(&spec, &[n], 4, 9);
    let time = |f: &mut dyn FnMut()| {
        let t = Instant::now();
        f();
        t.elapsed().as_secs_f64()
    };
    let mut bt = g.clone();
    let tr = time(&mut || {
        transpose::to_block_transpose(&mut bt, 4).unwrap();
        jam_sweep(&mut bt, &spec, 2, steps).unwrap();
        transpose::from_block_transpose(&mut bt).unwrap();
    });
    let mut a = g.clone();
    let mut b = g;
    let ml = time(&mut || {
        for _ in 0..steps {
            kernels::multiload_step(&a, &mut b, &spec).unwrap();
            std::mem::swap(&mut a, &mut b);
        }
    });
    let hw = vstencil::simd::hardware_bound(4);
    let line = format!("transpose+jam2 {tr:.3} s vs multiload {ml:.3} s ({:.2}x)", ml / tr);
    if !hw {
        return Ok(format!("{line}; informational, no vector hardware"));
    }
    ensure(tr <= ml, line.clone())?;
    Ok(line)
}

fn main() -> ExitCode {
    let criteria: [(&str, fn() -> Outcome); 9] = [
        ("oracle equivalence", criterion_1),
        ("transpose network", criterion_2),
        ("schedule", criterion_3),
        ("layout round trips", criterion_4),
        ("jam semantics and budget", criterion_5),
        ("tessellation coverage", criterion_6),
        ("parallel determinism", criterion_7),
        ("counter claims", criterion_8),
        ("timing (soft)", criterion_9),
    ];
    let started = Instant::now();
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let t = Instant::now();
        let res = std::panic::catch_unwind(f).unwrap_or_else(|_| Err("panicked".into()));
        let secs = t.elapsed().as_secs_f64();
        match res {
            Ok(msg) => println!("criterion {}: PASS  {name} [{secs:.2} s] {msg}", i + 1),
            Err(msg) => {
                failed += 1;
                println!("criterion {}: FAIL  {name} [{secs:.2} s] {msg}", i + 1);
            }
        }
    }
    println!("{} of 9 criteria passed in {:.1} s", 9 - failed, started.elapsed().as_secs_f64());
    if failed == 0 { ExitCode::SUCCESS } else { ExitCode::FAILURE }
}
