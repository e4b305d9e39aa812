use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use lrl_core::operator_calculus::{identity_normalization, random_fields, sample_points, symmetry_pairs, symmetry_sweep, OperatorContext};
use lrl_core::parallel::{self, ExecMode};
use lrl_core::radial_solver::{build_system, solve_bound_states, Grid, Units};
use lrl_core::SpinValue;

const MODES: [(&str, ExecMode); 2] = [("parallel", ExecMode::Parallel), ("sequential", ExecMode::Sequential)];

fn commutator_sweep(c: &mut Criterion) {
    let s = SpinValue::new(3);
    let ctx = OperatorContext::new(s, 1.0, 1.0, identity_normalization(s)).unwrap();
    let fields = random_fields(s, 8, 5);
    let pts = sample_points(12, 6);
    let pairs = symmetry_pairs();
    let mut g = c.benchmark_group("symmetry_sweep_s3/2");
    g.sample_size(10);
    for (name, mode) in MODES {
        g.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| symmetry_sweep(&ctx, &fields, &pts, &pairs, mode).unwrap())
        });
    }
    g.finish();
}

fn channel_solves(c: &mut Criterion) {
    let units = Units::Physical { mass: 1.0, alpha: 1.0 };
    let systems: Vec<_> = [0.5, 1.5, 2.5, 3.5]
        .iter()
        .flat_map(|&j| [build_system(SpinValue::new(1), j, units).unwrap(), build_system(SpinValue::new(3), j, units).unwrap()])
        .collect();
    let grid = Grid::new(200.0, 4000).unwrap();
    let mut g = c.benchmark_group("bound_states_8_channels");
    g.sample_size(10);
    for (name, mode) in MODES {
        g.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| parallel::map(mode, &systems, |sys| solve_bound_states(sys, grid, 3).unwrap().energies()))
        });
    }
    g.finish();
}

criterion_group!(benches, commutator_sweep, channel_solves);
criterion_main!(benches);
