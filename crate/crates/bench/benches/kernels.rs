//! Hot-path benchmarks: one engine generation, one auxiliary transition
//! row, and a small one-step rate lattice.

use criterion::{criterion_group, criterion_main, Criterion};
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;

use sga_core::auxchain::{self, AuxParams};
use sga_core::chromosome::Population;
use sga_core::engine::{self, GAConfig};
use sga_core::landscape::FitnessLandscape;
use sga_core::selection::SelectionScheme;
use sga_core::theory::rate;

fn engine_step(c: &mut Criterion) {
    let config = GAConfig {
        ell: 100,
        m: 100,
        scheme: SelectionScheme::tournament(2).unwrap(),
        p_c: 0.1,
        p_m: 0.01,
        landscape: FitnessLandscape::SharpPeak,
        seed: 0,
        horizon: 0,
    };
    let x0 = Population::master_seeded(100, 100).unwrap();
    let mut rng = ChaCha12Rng::seed_from_u64(1);
    c.bench_function("engine step ell=100 m=100", |b| {
        b.iter(|| {
            let block = engine::draw_block(&config, &mut rng);
            engine::step(&config, &x0, &block).unwrap()
        })
    });
}

fn aux_transition_row(c: &mut Criterion) {
    let params =
        AuxParams::new(1000, SelectionScheme::tournament(2).unwrap(), 0.1, 0.9).unwrap();
    c.bench_function("aux transition row m=1000", |b| {
        b.iter(|| {
            let mut total = 0.0;
            for j in 0..=1000 {
                total += auxchain::transition_prob(&params, 500, j).unwrap();
            }
            total
        })
    });
}

fn rate_lattice(c: &mut Criterion) {
    let scheme = SelectionScheme::tournament(2).unwrap();
    c.bench_function("v1 lattice 16", |b| {
        b.iter(|| rate::build_v1_grid(&scheme, 1.6, 16, 1.0 / 16.0).unwrap())
    });
}

criterion_group!(benches, engine_step, aux_transition_row, rate_lattice);
criterion_main!(benches);
