use criterion::{black_box, criterion_group, criterion_main, Criterion};
use tropwall::lattice::{int, Point, RelativeClass};
use tropwall::refined::{RefinedAutomorphism, RefinedTransform};
use tropwall::omega_trop;
use tropwall_bench::{context, initial_diagram, pentagon_base, theta, three_base};

fn pentagon_identity(c: &mut Criterion) {
    for order in [6, 10] {
        let ctx = context(order);
        let (a, b) = (theta(&ctx, [0, 1]), theta(&ctx, [1, 0]));
        c.bench_function(&format!("compose/pentagon/order{order}"), |bch| bch.iter(|| black_box(a.compose(&b).unwrap())));
    }
}

fn completion(c: &mut Criterion) {
    let mut g = c.benchmark_group("complete");
    g.sample_size(10);
    let p = initial_diagram(&pentagon_base(), 8);
    g.bench_function("pentagon/order8", |b| b.iter(|| black_box(p.complete().unwrap())));
    let t = initial_diagram(&three_base(), 4);
    g.bench_function("three/order4", |b| b.iter(|| black_box(t.complete().unwrap())));
    g.finish();
}

fn disc_counts(c: &mut Criterion) {
    let b = pentagon_base();
    let u = Point::from_ints(1, 1);
    c.bench_function("omega_trop/pentagon/(2,2)", |bch| bch.iter(|| black_box(omega_trop(&b, &u, &RelativeClass::new([2, 2]), &int(10)).unwrap())));
    let d = initial_diagram(&b, 6).complete().unwrap();
    let pts = d.crossing_points();
    c.bench_function("loop_product/pentagon/order6", |bch| {
        bch.iter(|| black_box(d.loop_product(&d.default_probe(&pts[0])).unwrap()))
    });
}

fn refined(c: &mut Criterion) {
    let ctx = context(5);
    let t = |v: [i64; 2]| RefinedTransform::focus_focus(RelativeClass::new(v), 5).unwrap();
    let a = RefinedAutomorphism::from_factors(&ctx, vec![t([0, 1]), t([1, 0])]);
    c.bench_function("refined/pentagon/order5", |b| b.iter(|| black_box(a.images().unwrap())));
}

criterion_group!(benches, pentagon_identity, completion, disc_counts, refined);
criterion_main!(benches);
