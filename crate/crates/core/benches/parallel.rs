//! Parallel vs sequential timing of the hot kernels. The two paths produce
//! bit-identical numbers; only time differs.
//!
//! Run with `cargo bench -p rodamage-core`. Without the default `parallel`
//! feature both groups take the sequential path.

use criterion::{criterion_group, criterion_main, Criterion};
use std::hint::black_box;

use rodamage_core::energy::{energy_3d, grad_energy_3d};
use rodamage_core::exec;
use rodamage_core::fields::Field3D;
use rodamage_core::material::{ConstitutiveLaw, MaterialParams};
use rodamage_core::mesh::build_cylinder;
use rodamage_core::rng::SplitMix64;
use rodamage_core::solver::{solve_u_3d, SolverConfig};

fn setup() -> (
    MaterialParams,
    ConstitutiveLaw,
    rodamage_core::mesh::CylinderMesh,
    Field3D,
) {
    let p = MaterialParams {
        lambda: 1.0,
        mu: 1.0,
        eta: 0.1,
        w1: 1.0,
        ell: 0.15,
        rod_length: 1.0,
        eps_z: 0.8,
    };
    let law = ConstitutiveLaw::standard(&p, false);
    let mesh = build_cylinder(24, 16).unwrap();
    let mut rng = SplitMix64::new(42);
    let mut f = Field3D::uniaxial_test(&mesh, 0.2, p.eps_z, p.poisson_ratio());
    for i in 0..mesh.n_nodes() {
        f.alpha[i] = rng.uniform(0.0, 0.6);
        f.u1[i] += rng.uniform(-0.01, 0.01);
        f.u2[i] += rng.uniform(-0.01, 0.01);
    }
    (p, law, mesh, f)
}

fn bench_energy(c: &mut Criterion) {
    let (p, law, mesh, f) = setup();
    let mut group = c.benchmark_group("energy_3d");
    group.sample_size(20);
    for (name, par) in [("sequential", false), ("parallel", true)] {
        group.bench_function(name, |b| {
            exec::set_parallel(par);
            b.iter(|| black_box(energy_3d(&p, &law, &mesh, black_box(&f)).unwrap()))
        });
    }
    exec::set_parallel(true);
    group.finish();
}

fn bench_gradient(c: &mut Criterion) {
    let (p, law, mesh, f) = setup();
    let mut group = c.benchmark_group("grad_energy_3d");
    group.sample_size(20);
    for (name, par) in [("sequential", false), ("parallel", true)] {
        group.bench_function(name, |b| {
            exec::set_parallel(par);
            b.iter(|| black_box(grad_energy_3d(&p, &law, &mesh, black_box(&f)).unwrap()))
        });
    }
    exec::set_parallel(true);
    group.finish();
}

fn bench_elastic_solve(c: &mut Criterion) {
    let (p, law, mesh, f) = setup();
    let cfg = SolverConfig {
        cg_tol: 1e-6,
        ..SolverConfig::default()
    };
    let mut group = c.benchmark_group("solve_u_3d");
    group.sample_size(10);
    for (name, par) in [("sequential", false), ("parallel", true)] {
        group.bench_function(name, |b| {
            exec::set_parallel(par);
            b.iter(|| {
                let mut trial = f.clone();
                solve_u_3d(&p, &law, &mesh, &mut trial, &cfg).unwrap();
                black_box(trial.u3[0])
            })
        });
    }
    exec::set_parallel(true);
    group.finish();
}

fn bench_modes_agree(c: &mut Criterion) {
    // not a timing benchmark: asserts the two paths match bitwise, then
    // times the cheap comparison so the harness has something to measure
    let (p, law, mesh, f) = setup();
    exec::set_parallel(false);
    let seq = energy_3d(&p, &law, &mesh, &f).unwrap().total;
    exec::set_parallel(true);
    let par = energy_3d(&p, &law, &mesh, &f).unwrap().total;
    assert_eq!(seq.to_bits(), par.to_bits());
    c.bench_function("modes_bitwise_equal", |b| {
        b.iter(|| black_box(seq.to_bits() == par.to_bits()))
    });
}

criterion_group!(
    benches,
    bench_energy,
    bench_gradient,
    bench_elastic_solve,
    bench_modes_agree
);
criterion_main!(benches);
