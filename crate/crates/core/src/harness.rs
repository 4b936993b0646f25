//! Command-line front end: configuration, timed runs, oracle verification and
//! CSV output.

use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use rand::{RngExt, SeedableRng};

use crate::error::{Error, Result};
use crate::exec::Workers;
use crate::grid::{alloc_grid, max_relative_error, GridBuffer, Layout};
use crate::kernels::{self, Counters, KernelMethod, Method};
use crate::simd::LatencyModel;
use crate::stencil::{Preset, StencilSpec};
use crate::tiling::{build_schedule, run_tiled, schedule_dump, TileSchedule};
use crate::timejam::{check_jam, jam_sweep};
use crate::transpose::{self, build_stage_swapped_plan, build_transpose_plan, plan_dump, schedule_cost};

pub const CSV_HEADER: [&str; 16] = [
    "stencil",
    "method",
    "vl",
    "jam_k",
    "size",
    "steps",
    "block",
    "tile_height",
    "threads",
    "seconds",
    "layout_seconds",
    "gflops",
    "max_rel_err",
    "loads",
    "stores",
    "reorg_ops",
];

/// Largest `points * steps` the verifier will run the oracle for.
pub const VERIFY_LIMIT: u128 = 1 << 33;

#[derive(Parser, Debug)]
#[command(name = "vstencil", version, about = "Vectorized stencil sweeps and benchmarks")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Time a configuration.
    Run(CommonArgs),
    /// Run a configuration and compare it with the scalar oracle; exits 1 on mismatch.
    Verify(CommonArgs),
    /// Print the shuffle plan and, with --block, the tile schedule.
    Plan(CommonArgs),
}

#[derive(Args, Debug, Clone)]
pub struct CommonArgs {
    /// 1d3p, 1d5p, 2d5p, 2d9p, 3d7p or 3d27p.
    #[arg(long, default_value = "1d3p")]
    pub stencil: String,
    /// Interior extent: one number for every dimension, or `AxB[xC]`.
    /// Defaults to 16384, 256x256 or 64x64x64.
    #[arg(long)]
    pub size: Option<String>,
    #[arg(long, default_value_t = 16)]
    pub steps: usize,
    /// scalar, multiload, reorg, dlt or transpose.
    #[arg(long, default_value = "transpose")]
    pub method: String,
    /// Time levels per pass (transpose, 1D only).
    #[arg(long, default_value_t = 1)]
    pub jam_k: usize,
    /// 4 or 8.
    #[arg(long, default_value_t = 4)]
    pub vl: usize,
    /// Tile size, one number or one per dimension. Enables tiling.
    #[arg(long)]
    pub block: Option<String>,
    /// Tile time height; defaults to the largest the block allows.
    #[arg(long)]
    pub tile_height: Option<usize>,
    #[arg(long, default_value_t = 1)]
    pub threads: usize,
    #[arg(long, default_value_t = 42)]
    pub seed: u64,
    #[arg(long)]
    pub csv: Option<PathBuf>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct BenchConfig {
    pub stencil: Preset,
    pub dims: Vec<usize>,
    pub steps: usize,
    pub method: Method,
    pub vl: usize,
    pub jam_k: usize,
    /// `None` runs untiled.
    pub block: Option<Vec<usize>>,
    pub tile_height: Option<usize>,
    pub threads: usize,
    pub seed: u64,
    pub csv: Option<PathBuf>,
}

#[derive(Clone, Debug)]
pub struct BenchResult {
    pub config: BenchConfig,
    pub seconds: f64,
    pub layout_seconds: f64,
    pub gflops: f64,
    pub max_rel_err: Option<f64>,
    pub counters: Counters,
}

fn usage(msg: impl Into<String>) -> Error {
    Error::Usage(msg.into())
}

fn parse_extents(s: &str, d: usize, what: &str) -> Result<Vec<usize>> {
    let parts = s
        .split(['x', 'X', ','])
        .map(|p| p.trim().parse::<usize>().map_err(|_| usage(format!("bad {what} `{s}`"))))
        .collect::<Result<Vec<_>>>()?;
    match parts.len() {
        1 => Ok(vec![parts[0]; d]),
        n if n == d => Ok(parts),
        n => Err(usage(format!("{what} `{s}` has {n} extents for a {d}-dimensional stencil"))),
    }
}

fn default_size(d: usize) -> Vec<usize> {
    match d {
        1 => vec![16384],
        2 => vec![256; 2],
        _ => vec![64; 3],
    }
}

impl BenchConfig {
    pub fn from_args(a: &CommonArgs) -> Result<Self> {
        let stencil: Preset = a.stencil.parse()?;
        let spec = StencilSpec::preset(stencil);
        let d = spec.d();
        let dims = match &a.size {
            Some(s) => parse_extents(s, d, "size")?,
            None => default_size(d),
        };
        let method: Method = a.method.parse()?;
        let block = a.block.as_deref().map(|b| parse_extents(b, d, "block")).transpose()?;
        let cfg = BenchConfig {
            stencil,
            dims,
            steps: a.steps,
            method,
            vl: a.vl,
            jam_k: a.jam_k,
            block,
            tile_height: a.tile_height,
            threads: a.threads,
            seed: a.seed,
            csv: a.csv.clone(),
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn spec(&self) -> StencilSpec {
        StencilSpec::preset(self.stencil)
    }

    /// Tile height used under tiling: the given one, else the largest with
    /// `B >= 2*r*T_b` capped at the step count. Always 1 in 3D.
    pub fn effective_tile_height(&self) -> Option<usize> {
        let block = self.block.as_ref()?;
        if self.dims.len() >= 3 {
            return Some(1);
        }
        let r = self.spec().r();
        Some(
            self.tile_height
                .unwrap_or_else(|| (block.iter().min().unwrap() / (2 * r)).min(self.steps).max(1)),
        )
    }

    pub fn validate(&self) -> Result<()> {
        let spec = self.spec();
        if self.vl != 4 && self.vl != 8 {
            return Err(Error::UnsupportedVectorLength(self.vl));
        }
        if self.dims.iter().any(|&n| n == 0) {
            return Err(usage("size must be positive"));
        }
        if self.threads == 0 {
            return Err(usage("--threads must be at least 1"));
        }
        if self.jam_k == 0 {
            return Err(usage("--jam-k must be at least 1"));
        }
        if self.jam_k > 1 {
            if self.method != Method::Transpose {
                return Err(usage(format!(
                    "--method {} cannot be combined with --jam-k {} (only transpose pipelines time steps)",
                    self.method, self.jam_k
                )));
            }
            check_jam(&spec, self.jam_k, self.vl).map_err(|e| usage(format!("--jam-k {}: {e}", self.jam_k)))?;
            if self.steps % self.jam_k != 0 {
                return Err(usage(format!(
                    "--steps {} is not divisible by --jam-k {}",
                    self.steps, self.jam_k
                )));
            }
        }
        if self.tile_height.is_some() && self.block.is_none() {
            return Err(usage("--tile-height needs --block"));
        }
        if self.block.is_some() {
            if self.method == Method::Dlt {
                return Err(usage("--method dlt cannot be combined with --block (the layout is global)"));
            }
            if self.dims.len() >= 3 && self.tile_height.is_some_and(|h| h != 1) {
                return Err(usage("3D stencils are blocked spatially; --tile-height must be 1"));
            }
            self.schedule()?;
        }
        Ok(())
    }

    pub fn schedule(&self) -> Result<Option<TileSchedule>> {
        let Some(block) = &self.block else { return Ok(None) };
        let h = self.effective_tile_height().unwrap();
        build_schedule(&self.dims, block, h, self.spec().r(), self.steps)
            .map(Some)
            .map_err(|e| usage(format!("--block/--tile-height: {e}")))
    }

    pub fn points(&self) -> usize {
        self.dims.iter().product()
    }
}

pub fn parse_cli<I, T>(argv: I) -> Result<Cli>
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    Cli::try_parse_from(argv).map_err(|e| usage(e.render().to_string()))
}

/// Seeded uniform(0, 1) interior and halo.
pub fn seeded_grid(cfg: &BenchConfig) -> Result<GridBuffer> {
    let spec = cfg.spec();
    let mut g = alloc_grid(&spec, &cfg.dims, Layout::Natural, cfg.vl)?;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(cfg.seed);
    g.fill_with(|_, _| rng.random::<f64>());
    Ok(g)
}

fn to_layout(g: &mut GridBuffer, cfg: &BenchConfig) -> Result<()> {
    match cfg.method {
        Method::Transpose => transpose::to_block_transpose(g, cfg.vl),
        Method::Dlt => transpose::to_dlt(g, cfg.vl),
        _ => Ok(()),
    }
}

fn from_layout(g: &mut GridBuffer) -> Result<()> {
    match g.layout() {
        Layout::BlockTranspose(_) => transpose::from_block_transpose(g),
        Layout::Dlt(_) => transpose::from_dlt(g),
        Layout::Natural => Ok(()),
    }
}

/// Advances a grid already in the method's layout.
fn advance(g: &mut GridBuffer, cfg: &BenchConfig, steps: usize, sched: Option<&TileSchedule>) -> Result<Counters> {
    let spec = cfg.spec();
    if let Some(s) = sched {
        let s = s.clone().with_steps(steps);
        return run_tiled(g, &spec, &s, KernelMethod::new(cfg.method, cfg.vl)?, cfg.jam_k, cfg.threads);
    }
    if cfg.jam_k > 1 {
        return jam_sweep(g, &spec, cfg.jam_k, steps);
    }
    let mut other = g.clone();
    let mut total = Counters::default();
    for _ in 0..steps {
        total += kernels::step(cfg.method, g, &mut other, &spec)?;
        std::mem::swap(g, &mut other);
    }
    Ok(total)
}

/// Times the configured pipeline after one short warm-up run.
pub fn run_benchmark(cfg: &BenchConfig) -> Result<BenchResult> {
    timed_run(cfg).map(|(r, _)| r)
}

fn timed_run(cfg: &BenchConfig) -> Result<(BenchResult, GridBuffer)> {
    cfg.validate()?;
    let sched = cfg.schedule()?;
    let pool = Workers::new(cfg.threads);
    let start = seeded_grid(cfg)?;
    pool.install(|| -> Result<(BenchResult, GridBuffer)> {
        let mut warm = start.clone();
        to_layout(&mut warm, cfg)?;
        advance(&mut warm, cfg, cfg.jam_k.min(cfg.steps), sched.as_ref())?;
        drop(warm);

        let mut g = start.clone();
        let t0 = Instant::now();
        to_layout(&mut g, cfg)?;
        let t1 = Instant::now();
        let counters = advance(&mut g, cfg, cfg.steps, sched.as_ref())?;
        let t2 = Instant::now();
        from_layout(&mut g)?;
        let t3 = Instant::now();
        let seconds = (t3 - t0).as_secs_f64();
        let layout_seconds = (t1 - t0).as_secs_f64() + (t3 - t2).as_secs_f64();
        let flops = counters.point_updates as f64 * cfg.spec().flops_per_point() as f64;
        let res = BenchResult {
            config: cfg.clone(),
            seconds,
            layout_seconds,
            gflops: flops / seconds.max(f64::MIN_POSITIVE) / 1e9,
            max_rel_err: None,
            counters,
        };
        Ok((res, g))
    })
}

/// Runs the pipeline and the oracle from the same seed; returns the result
/// with its error filled in.
pub fn verify(cfg: &BenchConfig) -> Result<BenchResult> {
    let work = cfg.points() as u128 * cfg.steps.max(1) as u128;
    if work > VERIFY_LIMIT {
        return Err(usage(format!(
            "verification of {} points x {} steps exceeds the oracle budget of {VERIFY_LIMIT} point updates",
            cfg.points(),
            cfg.steps
        )));
    }
    let (mut res, out) = timed_run(cfg)?;
    let spec = cfg.spec();
    let mut a = seeded_grid(cfg)?;
    let mut b = a.clone();
    for _ in 0..cfg.steps {
        kernels::scalar_step(&a, &mut b, &spec)?;
        std::mem::swap(&mut a, &mut b);
    }
    res.max_rel_err = Some(max_relative_error(&out, &a));
    Ok(res)
}

/// Pass threshold for `verify`.
pub fn verify_threshold(steps: usize) -> f64 {
    1e-13 * steps.max(1) as f64
}

fn join(v: &[usize]) -> String {
    v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join("x")
}

fn float(x: f64) -> String {
    format!("{x:.16e}")
}

/// The CSV fields of one result, in header order.
pub fn csv_record(r: &BenchResult) -> Vec<String> {
    let c = &r.config;
    let vl = c.vl;
    vec![
        c.stencil.label().to_string(),
        c.method.label().to_string(),
        vl.to_string(),
        c.jam_k.to_string(),
        join(&c.dims),
        c.steps.to_string(),
        c.block.as_deref().map(join).unwrap_or_default(),
        c.effective_tile_height().map(|h| h.to_string()).unwrap_or_default(),
        c.threads.to_string(),
        float(r.seconds),
        float(r.layout_seconds),
        float(r.gflops),
        r.max_rel_err.map(float).unwrap_or_default(),
        r.counters.element_loads(vl).to_string(),
        r.counters.element_stores(vl).to_string(),
        r.counters.reorg_ops.to_string(),
    ]
}

pub fn emit_csv(results: &[BenchResult], path: &Path) -> Result<()> {
    let err = |source| Error::Csv {
        path: path.to_path_buf(),
        source,
    };
    let mut w = csv::Writer::from_path(path).map_err(err)?;
    w.write_record(CSV_HEADER).map_err(err)?;
    for r in results {
        w.write_record(csv_record(r)).map_err(err)?;
    }
    w.flush().map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Text for the `plan` subcommand.
pub fn plan_report(cfg: &BenchConfig) -> Result<String> {
    let model = LatencyModel::default();
    let plan = build_transpose_plan(cfg.vl)?;
    let mut s = format!("transpose plan, vl={}\n", cfg.vl);
    s += &plan_dump(&plan, &model)?;
    let swapped = schedule_cost(&build_stage_swapped_plan(cfg.vl)?, &model)?;
    s += &format!(
        "\nstage-swapped order: issue cycles {}, makespan {}\n",
        swapped.issue_cycles, swapped.makespan
    );
    if let Some(sched) = cfg.schedule()? {
        s.push('\n');
        s += &schedule_dump(&sched, cfg.jam_k);
    }
    Ok(s)
}

pub fn summary_line(r: &BenchResult) -> String {
    let c = &r.config;
    let mut s = format!(
        "{} {} vl={} k={} size={} steps={}: {:.6} s (layout {:.6} s), {:.3} GFlop/s",
        c.stencil,
        c.method,
        c.vl,
        c.jam_k,
        join(&c.dims),
        c.steps,
        r.seconds,
        r.layout_seconds,
        r.gflops
    );
    if let Some(e) = r.max_rel_err {
        s += &format!(", max rel err {e:.3e}");
    }
    s
}
