//! Benchmarks of the data-parallel hot paths.
//!
//! With the default `parallel` feature the same workload runs inside a
//! 1-thread rayon pool and a pool sized to the machine, so one report
//! compares the sequential and parallel execution of identical code.
//! Built with `--no-default-features` the suite times the plain
//! sequential fallback instead.

use criterion::{criterion_group, criterion_main, BatchSize, Criterion};
use e3dtv_core::cs::{self, CompressiveOperator, CsSolver};
use e3dtv_core::denoise::DenoiseSolver;
use e3dtv_core::fft::{build_fft_denominator, solve_x_system, Fft3, LinearSystemRhs, SolveWeights};
use e3dtv_core::harness::{add_impulse, gen_phantom};
use e3dtv_core::metrics::ssim;
use e3dtv_core::solver::SolverConfig;
use std::hint::black_box;

struct Runner {
    #[cfg(feature = "parallel")]
    pools: Vec<(String, rayon::ThreadPool)>,
}

impl Runner {
    fn new() -> Self {
        #[cfg(feature = "parallel")]
        {
            let max = std::thread::available_parallelism()
                .map(|n| n.get())
                .unwrap_or(1);
            let mut pools = Vec::new();
            for threads in [1, max] {
                let name = format!("threads-{threads}");
                if pools.iter().any(|(n, _)| *n == name) {
                    continue;
                }
                pools.push((
                    name,
                    rayon::ThreadPoolBuilder::new()
                        .num_threads(threads)
                        .build()
                        .unwrap(),
                ));
            }
            Runner { pools }
        }
        #[cfg(not(feature = "parallel"))]
        {
            Runner {}
        }
    }

    /// Benchmark `op` under each execution mode.
    fn bench<Setup, In, Op, Out>(&self, c: &mut Criterion, group: &str, setup: Setup, op: Op)
    where
        Setup: Fn() -> In + Copy + Sync + Send,
        Op: Fn(In) -> Out + Copy + Sync + Send,
        In: Send,
        Out: Send,
    {
        let mut g = c.benchmark_group(group);
        #[cfg(feature = "parallel")]
        for (name, pool) in &self.pools {
            g.bench_function(name, |b| {
                pool.install(|| {
                    b.iter_batched(setup, |input| black_box(op(input)), BatchSize::SmallInput)
                });
            });
        }
        #[cfg(not(feature = "parallel"))]
        g.bench_function("sequential", |b| {
            b.iter_batched(setup, |input| black_box(op(input)), BatchSize::SmallInput)
        });
        g.finish();
    }
}

fn bench_fft_solve(c: &mut Criterion, runner: &Runner) {
    let (h, w, s) = (64, 64, 32);
    let tx = build_fft_denominator(h, w, s);
    let fft = Fft3::new(h, w, s);
    let phantom = gen_phantom(h, w, s, 4, 2.0, 3).unwrap();
    let hx = phantom.unfold3().clone();
    let weights = SolveWeights::uniform(0.5).unwrap();
    runner.bench(
        c,
        "fft_solve_64x64x32",
        || (),
        |_| {
            let rhs = LinearSystemRhs::new(hx.clone(), &tx).unwrap();
            solve_x_system(&rhs, &weights, &fft).unwrap()
        },
    );
}

fn bench_fwht(c: &mut Criterion, runner: &Runner) {
    let data: Vec<f64> = (0..1 << 16).map(|i| (i as f64 * 0.37).sin()).collect();
    runner.bench(
        c,
        "fwht_65536",
        || data.clone(),
        |mut buf| {
            cs::fwht(&mut buf);
            buf
        },
    );
}

fn bench_denoise_step(c: &mut Criterion, runner: &Runner) {
    let clean = gen_phantom(32, 32, 16, 3, 2.0, 2024).unwrap();
    let noisy = add_impulse(&clean, &vec![0.15; 16], 5).unwrap();
    let cfg = SolverConfig::for_dims(32, 32, 0.001, 3);
    runner.bench(
        c,
        "denoise_step_32x32x16",
        || DenoiseSolver::new(&noisy, &cfg).unwrap(),
        |mut solver| {
            solver.step().unwrap();
            solver.state.mu
        },
    );
}

fn bench_cs_step(c: &mut Criterion, runner: &Runner) {
    let clean = gen_phantom(32, 32, 16, 3, 2.0, 4242).unwrap();
    let op = CompressiveOperator::build(32, 32, 16, 0.2, 39).unwrap();
    let y = cs::sample(&clean, &op).unwrap();
    let mut cfg = SolverConfig::for_dims(32, 32, 1.0, 3);
    cfg.tau = 0.005;
    runner.bench(
        c,
        "cs_step_32x32x16",
        || CsSolver::new(&y, &op, &cfg).unwrap(),
        |mut solver| {
            solver.step().unwrap();
            solver.state.mu
        },
    );
}

fn bench_ssim(c: &mut Criterion, runner: &Runner) {
    let a = gen_phantom(64, 64, 16, 3, 2.0, 7).unwrap();
    let b = add_impulse(&a, &vec![0.1; 16], 9).unwrap();
    runner.bench(c, "ssim_64x64x16", || (), |_| ssim(&a, &b).unwrap().mean);
}

fn benches(c: &mut Criterion) {
    let runner = Runner::new();
    bench_fft_solve(c, &runner);
    bench_fwht(c, &runner);
    bench_denoise_step(c, &runner);
    bench_cs_step(c, &runner);
    bench_ssim(c, &runner);
}

criterion_group!(parallel_vs_sequential, benches);
criterion_main!(parallel_vs_sequential);
