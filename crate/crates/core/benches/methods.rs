use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion, Throughput};
use vstencil::kernels::{self, Method};
use vstencil::stencil::Preset;
use vstencil::timejam::jam_sweep;
use vstencil::{alloc_grid, transpose, GridBuffer, Layout, StencilSpec};

fn layout_grid(spec: &StencilSpec, dims: &[usize], m: Method, vl: usize) -> GridBuffer {
    let mut g = alloc_grid(spec, dims, Layout::Natural, vl).unwrap();
    g.fill_with(|c, _| (c.iter().sum::<isize>() % 13) as f64 * 0.25);
    match m {
        Method::Transpose => transpose::to_block_transpose(&mut g, vl).unwrap(),
        Method::Dlt => transpose::to_dlt(&mut g, vl).unwrap(),
        _ => {}
    }
    g
}

fn one_step(c: &mut Criterion) {
    let cases = [
        (Preset::OneD3P, vec![1usize << 20]),
        (Preset::OneD5P, vec![1 << 20]),
        (Preset::TwoD9P, vec![1024, 1024]),
        (Preset::ThreeD27P, vec![96, 96, 96]),
    ];
    for (p, dims) in cases {
        let spec = StencilSpec::preset(p);
        let mut group = c.benchmark_group(format!("step/{}", p.label()));
        group.sample_size(10);
        group.throughput(Throughput::Elements(dims.iter().product::<usize>() as u64));
        for m in [Method::Scalar, Method::Multiload, Method::Reorg, Method::Dlt, Method::Transpose] {
            for vl in [4, 8] {
                if m == Method::Scalar && vl == 8 {
                    continue;
                }
                let src = layout_grid(&spec, &dims, m, vl);
                let mut dst = src.clone();
                group.bench_function(BenchmarkId::new(m.label(), vl), |b| {
                    b.iter(|| kernels::step(m, &src, &mut dst, &spec).unwrap())
                });
            }
        }
        group.finish();
    }
}

fn jam(c: &mut Criterion) {
    let spec = StencilSpec::preset(Preset::OneD3P);
    let n = 1 << 20;
    let steps = 8;
    let mut group = c.benchmark_group("jam/1d3p");
    group.sample_size(10);
    group.throughput(Throughput::Elements((n * steps) as u64));
    for vl in [4, 8] {
        let start = layout_grid(&spec, &[n], Method::Transpose, vl);
        for k in [1, 2] {
            group.bench_function(BenchmarkId::new(format!("k{k}"), vl), |b| {
                b.iter_batched_ref(|| start.clone(), |g| jam_sweep(g, &spec, k, steps).unwrap(), criterion::BatchSize::LargeInput)
            });
        }
    }
    group.finish();
}

criterion_group!(benches, one_step, jam);
criterion_main!(benches);
