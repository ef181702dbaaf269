use criterion::{criterion_group, criterion_main, Criterion, Throughput};
use dirac_core::runner::initial_field;
use dirac_core::stepper::Simulation;
use dirac_core::{parse_scenario, FourPotential};

fn scenario(cells: usize, potential: &str) -> String {
    format!(
        r#"
[run]
name = "bench"
steps = 1

[grid]
cells = [{cells}, {cells}, {cells}]
delta_nm = 2.0e-4
center_nm = [0.0, 0.0, 0.0]

[packet]
momentum_mev_c = [0.53, 0.0, 0.0]
center_nm = [0.0, 0.0, 0.0]
width_nm = 6.0e-4

{potential}
"#
    )
}

fn simulation(text: &str) -> Simulation {
    let s = parse_scenario(text).unwrap();
    let pot = FourPotential::from_descriptor(&s.potential).unwrap();
    let field = initial_field(&s, &pot).unwrap();
    Simulation::new(field, pot, s.stepper).unwrap()
}

fn step_kernel(c: &mut Criterion) {
    let cells = 64;
    let mut group = c.benchmark_group("step");
    group.throughput(Throughput::Elements((cells * cells * cells) as u64));
    for (label, potential) in [
        ("free", ""),
        (
            "uniform_b",
            "[potential]\nkind = \"uniform_b\"\nfield_t = 1.0e6\ngauge = \"symmetric\"",
        ),
    ] {
        let mut sim = simulation(&scenario(cells, potential));
        group.bench_function(label, |b| b.iter(|| sim.step().unwrap()));
    }
    group.finish();
}

criterion_group! {
    name = benches;
    config = Criterion::default().sample_size(10);
    targets = step_kernel
}
criterion_main!(benches);
