//! End-to-end acceptance checks. Runs without the libtest harness so every line is printed.

mod common;

use std::collections::BTreeMap;
use std::sync::Arc;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tropwall::dt::{focus_focus_count, refine_vec};
use tropwall::lattice::{int, rat, ChargeLattice, GaussianRational, Point, Rat, RelativeClass, Sector};
use tropwall::pipeline::{run_text, Command, RunConfig};
use tropwall::refined::{q_int, specialize, RefinedAutomorphism, RefinedTransform};
use tropwall::series::max_multiple;
use tropwall::tropical::{omega_from_scattering, sector_product};
use tropwall::{
    check_symplectic, counts_from_slab, multiple_cover, omega_trop, refined_omega, slab_from_counts, slab_to_dt, Automorphism,
    Coefficient, ElementaryTransform, QLaurent, ScatteringDiagram, SeriesContext, SlabFunction,
};

use common::*;

type Outcome = Result<String, String>;

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

fn e<E: std::fmt::Display>(x: E) -> String {
    x.to_string()
}

fn ctx2(order: i64) -> Arc<SeriesContext> {
    let lat = Arc::new(ChargeLattice::standard());
    Arc::new(SeriesContext::new(lat, vec![GaussianRational::one(), GaussianRational::one()], int(order) + rat(1, 2)).unwrap())
}

fn theta(ctx: &Arc<SeriesContext>, v: [i64; 2]) -> Automorphism {
    let s = SlabFunction::from_coefficients(ctx, RelativeClass::new(v), &BTreeMap::from([(1, int(1))])).unwrap();
    ElementaryTransform::new(s).to_automorphism().unwrap()
}

fn compose(fs: &[Automorphism]) -> Automorphism {
    let mut r = Automorphism::identity(fs[0].ctx());
    for f in fs.iter().rev() {
        r = f.compose(&r).unwrap();
    }
    r
}

fn focus_focus_counts(max_d: i64) -> Result<BTreeMap<u64, Rat>, String> {
    let b = focus_focus();
    let u = Point::from_ints(1, 0);
    let lam = int(max_d + 1);
    (1..=max_d).map(|d| Ok((d as u64, omega_trop(&b, &u, &class(&[d]), &lam).map_err(e)?))).collect()
}

fn c1() -> Outcome {
    let t = Instant::now();
    let counts = focus_focus_counts(8)?;
    let el = t.elapsed();
    for (d, w) in &counts {
        ensure(*w == focus_focus_count(*d), || format!("d={d}: got {w}"))?;
    }
    ensure(el < Duration::from_secs(1), || format!("took {el:?}"))?;
    Ok(format!("d=1..8 exact, {el:.2?}"))
}

fn c2() -> Outcome {
    let counts = focus_focus_counts(12)?;
    let lat = Arc::new(ChargeLattice::new(vec![[1, 0]]).unwrap());
    let ctx = Arc::new(SeriesContext::new(lat, vec![GaussianRational::one()], rat(25, 2)).unwrap());
    let slab = slab_from_counts(&ctx, &counts, &class(&[1])).map_err(e)?;
    let want = BTreeMap::from([(1u64, int(1))]);
    ensure(slab.coefficients() == want, || format!("slab coefficients {:?}", slab.coefficients()))?;
    ensure(slab.series().len() == 2, || "extra terms".into())?;
    Ok("slab = 1 + z through order 12".into())
}

fn c3() -> Outcome {
    let t = Instant::now();
    for order in [4, 8, 12] {
        let c = ctx2(order);
        let (g1, g2, g12) = (theta(&c, [0, 1]), theta(&c, [1, 0]), theta(&c, [1, 1]));
        ensure(compose(&[g1.clone(), g2.clone()]) == compose(&[g2.clone(), g12, g1.clone()]), || format!("pentagon fails at order {order}"))?;
        ensure(compose(&[g1.clone(), g2.clone()]) != compose(&[g2, g1]), || "factors commute".into())?;
    }
    let text = include_str!("../../../diagrams/pentagon_walls.diagram");
    for order in [4, 12] {
        let f = tropwall::DiagramFile::parse(text).map_err(e)?;
        let d = f.diagram(None, Some(ScatteringDiagram::order_cutoff(order))).map_err(e)?;
        let done = d.complete().map_err(e)?;
        let added: Vec<_> = done.walls()[d.walls().len()..].to_vec();
        ensure(added.len() == 1, || format!("added {} rays", added.len()))?;
        ensure(added[0].class == class(&[1, 1]) && added[0].slab == BTreeMap::from([(1, int(1))]), || format!("added {:?}", added[0]))?;
    }
    let el = t.elapsed();
    ensure(el < Duration::from_secs(10), || format!("took {el:?}"))?;
    Ok(format!("orders 4/8/12 exact, one ray 1+xy, {el:.2?}"))
}

fn c4() -> Outcome {
    let mut n = 0;
    for (name, d) in scattering_corpus(6) {
        let done = d.complete().map_err(e)?;
        for p in done.crossing_points() {
            let probe = done.default_probe(&p);
            for probe in [probe.clone(), tropwall::LoopProbe { radius: &probe.radius / int(2), ..probe }] {
                let l = done.loop_product(&probe).map_err(e)?;
                ensure(l.is_identity(), || format!("{name}: loop at {p} is not the identity"))?;
                n += 1;
            }
        }
    }
    Ok(format!("{n} loops are the identity"))
}

fn c5() -> Outcome {
    let lam = int(4);
    let mut n = 0;
    for (name, b, pts) in base_corpus() {
        for u in pts {
            for k in b.classes_below(&u, &lam).map_err(e)? {
                let t = omega_trop(&b, &u, &k, &lam).map_err(|x| format!("{name} {k} at {u}: {x}"))?;
                let s = omega_from_scattering(&b, &u, &k).map_err(e)?;
                ensure(t == s, || format!("{name}: class {k} at {u}: trop {t} vs scattering {s}"))?;
                n += 1;
            }
        }
    }
    Ok(format!("{n} (class, point) pairs agree"))
}

fn c6() -> Outcome {
    let lat = Arc::new(ChargeLattice::standard());
    let ctx = Arc::new(SeriesContext::new(lat.clone(), vec![GaussianRational::one(), GaussianRational::from_ints(1, 1)], rat(17, 2)).unwrap());
    let g = class(&[1, 0]);
    let f = SlabFunction::from_coefficients(&ctx, g.clone(), &BTreeMap::from([(1, int(1))])).map_err(e)?;
    let omega = slab_to_dt(&f);
    for d in 1..=8u64 {
        let want = if d == 1 { int(1) } else { int(0) };
        ensure(omega.get(&d).cloned().unwrap_or_else(|| int(0)) == want, || format!("Omega({d}) = {:?}", omega.get(&d)))?;
        let back = multiple_cover(&lat, &g, &omega, d).map_err(e)?;
        ensure(back == focus_focus_count(d), || format!("multiple cover at {d}: {back}"))?;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    let dirs = [[1, 0], [0, 1], [1, 1], [2, 1], [1, 2], [3, 1]];
    for _ in 0..100 {
        let dir = RelativeClass::new(dirs[rng.gen_range(0..dirs.len())]);
        let n = max_multiple(&ctx, &dir).min(8);
        let table: BTreeMap<u64, Rat> = (1..=n).map(|d| (d, int(rng.gen_range(-5..=5)))).collect();
        let tilde: BTreeMap<u64, Rat> = (1..=n).map(|d| Ok((d, multiple_cover(&lat, &dir, &table, d).map_err(e)?))).collect::<Result<_, String>>()?;
        let slab = slab_from_counts(&ctx, &tilde, &dir).map_err(e)?;
        let back = counts_from_slab(&slab).map_err(e)?;
        let nz = |m: &BTreeMap<u64, Rat>| -> BTreeMap<u64, Rat> { m.iter().filter(|(_, v)| !v.is_zero()).map(|(k, v)| (*k, v.clone())).collect() };
        ensure(nz(&back) == nz(&tilde), || format!("counts round trip on {dir}: {back:?} vs {tilde:?}"))?;
        let got: BTreeMap<u64, Rat> = slab_to_dt(&slab).into_iter().filter(|(_, v)| !v.is_zero()).collect();
        let want: BTreeMap<u64, Rat> = table.into_iter().filter(|(_, v)| !v.is_zero()).collect();
        ensure(got == want, || format!("round trip on {dir}: {got:?} vs {want:?}"))?;
    }
    Ok("focus-focus dictionary and 100 random round trips".into())
}

fn c7() -> Outcome {
    let mut n = 0;
    for a1 in -8..=8i64 {
        for a2 in -8..=8i64 {
            for b1 in -8..=8i64 {
                for b2 in -8..=8i64 {
                    let pair = a1 * b2 - a2 * b1;
                    let s = if pair.rem_euclid(2) == 0 { 1 } else { -1 };
                    ensure(refine_vec([a1 + b1, a2 + b2]) == s * refine_vec([a1, a2]) * refine_vec([b1, b2]), || format!("cocycle at {a1},{a2} / {b1},{b2}"))?;
                    n += 1;
                }
            }
            if num_integer::Integer::gcd(&a1, &a2) == 1 {
                ensure(refine_vec([a1, a2]) == -1, || format!("c({a1},{a2}) != -1"))?;
            }
        }
    }
    Ok(format!("{n} pairs"))
}

fn c8() -> Outcome {
    let two = q_int(2).map_err(e)?;
    ensure(two == QLaurent::from_terms([(1, int(1)), (-1, int(1))]), || format!("[2]_q = {two}"))?;
    let c = ctx2(6);
    let t = |v: [i64; 2]| RefinedTransform::focus_focus(RelativeClass::new(v), 6).unwrap();
    let lhs = RefinedAutomorphism::from_factors(&c, vec![t([0, 1]), t([1, 0])]);
    let rhs = RefinedAutomorphism::from_factors(&c, vec![t([1, 0]), t([1, 1]), t([0, 1])]);
    ensure(lhs.equals(&rhs).map_err(e)?, || "refined pentagon fails".into())?;
    let classical = compose(&[theta(&c, [0, 1]), theta(&c, [1, 0])]);
    let im = lhs.images().map_err(e)?;
    for (i, s) in im.iter().enumerate() {
        ensure(specialize(s).map_err(e)? == classical.images()[i], || "q = 1 image differs".into())?;
    }
    let lam = int(3);
    let mut n = 0;
    for (name, b, pts) in base_corpus() {
        for u in pts {
            for k in b.classes_below(&u, &lam).map_err(e)? {
                let q = refined_omega(&b, &u, &k, &lam).map_err(e)?;
                let w = omega_trop(&b, &u, &k, &lam).map_err(e)?;
                ensure(q.at_one().map_err(e)? == w, || format!("{name}: {k} at {u}: {q} vs {w}"))?;
                n += 1;
            }
        }
    }
    for d in 1..=6 {
        let q = refined_omega(&focus_focus(), &Point::from_ints(1, 0), &class(&[d]), &int(7)).map_err(e)?;
        ensure(q.at_one().map_err(e)? == focus_focus_count(d as u64), || format!("focus-focus d={d}"))?;
        n += 1;
    }
    Ok(format!("[2]_q, refined pentagon, {n} q=1 specializations"))
}

fn c9() -> Outcome {
    let mut n = 0;
    for (name, d) in scattering_corpus(8) {
        let done = d.complete().map_err(e)?;
        for p in done.crossing_points() {
            let ctx = done.context_at(&p).map_err(e)?;
            for w in done.walls().iter().filter(|w| w.passes_through(&p)) {
                let a = w.transform(&ctx).map_err(e)?.to_automorphism().map_err(e)?;
                ensure(check_symplectic(&a).map_err(e)?, || format!("{name}: wall {} at {p}", w.class))?;
                n += 1;
            }
            let l = done.loop_product(&done.default_probe(&p)).map_err(e)?;
            ensure(check_symplectic(&l).map_err(e)?, || format!("{name}: loop at {p}"))?;
            n += 1;
        }
        for w in done.walls() {
            // a point on the wall past any crossing
            let q = w.base.add_scaled(&w.direction, &int(1));
            let ctx = done.context_at(&q).map_err(e)?;
            let a = w.transform(&ctx).map_err(e)?.to_automorphism().map_err(e)?;
            ensure(check_symplectic(&a).map_err(e)?, || format!("{name}: wall {}", w.class))?;
            n += 1;
        }
    }
    Ok(format!("{n} transforms and products preserve the form"))
}

/// Upper bound |re| + |im| on the modulus.
fn modulus_bound(z: &GaussianRational) -> Rat {
    use num_traits::Signed;
    z.re.abs() + z.im.abs()
}

fn c10() -> Outcome {
    let slack = GaussianRational::new(int(1), rat(1, 100));
    let mut n = 0;
    let pairs: Vec<(&str, tropwall::SingularBase, Point, Point, Rat)> = vec![
        ("pentagon", pentagon(), Point::new(rat(-1, 2), rat(-1, 3)), Point::new(rat(1, 3), rat(1, 4)), int(5)),
        ("pentagon", pentagon(), Point::new(rat(1, 3), rat(1, 4)), Point::new(rat(3, 2), rat(-1, 2)), int(5)),
        ("three", three(), Point::new(rat(-1, 5), rat(3, 4)), Point::new(rat(1, 2), rat(1, 3)), int(7)),
    ];
    for (name, b, u1, u2, lam) in pairs {
        let mut vals = b.charge().values_at(&u1);
        vals.extend(b.charge().values_at(&u2));
        let s0 = tropwall::scattering::enclosing_sector(&vals).ok_or("charges not in a half-plane")?;
        let sector = Sector::closed(s0.lo() * &slack.conj(), s0.hi() * &slack).map_err(e)?;
        let t1 = sector_product(&b, &u1, &sector, &lam).map_err(|x| format!("{name} at {u1}: {x}"))?;
        let t2 = sector_product(&b, &u2, &sector, &lam).map_err(|x| format!("{name} at {u2}: {x}"))?;
        let energy = vals.iter().map(modulus_bound).max().unwrap();
        let lam2 = &lam - &energy;
        ensure(lam2 > int(0), || format!("{name}: lambda' = {lam2} is not positive"))?;
        let common = Arc::new(SeriesContext::at_point(b.lattice().clone(), b.charge(), &u2, lam2.clone()).map_err(e)?);
        let moved = t1.recontext(&common);
        let here = t2.recontext(&common);
        ensure(moved == here, || format!("{name}: {u1} -> {u2} differ mod lambda' = {lam2}"))?;
        ensure(!here.is_identity(), || format!("{name}: trivial product"))?;
        n += 1;
    }
    Ok(format!("{n} probe pairs agree after transport"))
}

fn c11() -> Outcome {
    let inputs = [
        ("pentagon", include_str!("../../../diagrams/pentagon.diagram")),
        ("squared", include_str!("../../../diagrams/squared.diagram")),
        ("three", include_str!("../../../diagrams/three.diagram")),
    ];
    let commands = [
        Command::Complete,
        Command::Invariants,
        Command::Enumerate { point: Point::new(rat(1, 2), rat(1, 3)), class: None },
    ];
    let run_all = |threads: usize| -> Result<Vec<String>, String> {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().map_err(e)?;
        pool.install(|| {
            let mut out = Vec::new();
            for (name, text) in &inputs {
                for cmd in &commands {
                    if matches!(cmd, Command::Enumerate { .. }) && *name == "squared" {
                        continue;
                    }
                    let cfg = RunConfig {
                        input: name.into(),
                        command: cmd.clone(),
                        order: Some(4),
                        energy: None,
                        sector: None,
                        refined: matches!(cmd, Command::Enumerate { .. }),
                        out_dir: Some("out".into()),
                        svg: None,
                        convention: None,
                    };
                    let r = run_text(text, name, &cfg).map_err(|x| format!("{name}: {x}"))?;
                    out.push(r.stdout);
                    out.extend(r.files.into_values());
                }
            }
            Ok(out)
        })
    };
    let a = run_all(1)?;
    let b = run_all(1)?;
    let c = run_all(4)?;
    ensure(a == b, || "two runs differ".into())?;
    ensure(a == c, || "4 threads differ from 1 thread".into())?;
    Ok(format!("{} outputs byte-identical across runs and thread counts", a.len()))
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 11] = [
        ("focus-focus multiple covers", c1),
        ("focus-focus slab", c2),
        ("pentagon identity", c3),
        ("loop consistency", c4),
        ("tropical/scattering correspondence", c5),
        ("DT dictionary", c6),
        ("quadratic refinement", c7),
        ("refined suite", c8),
        ("symplectomorphism property", c9),
        ("wall invariance", c10),
        ("determinism", c11),
    ];
    let filter: Option<String> = std::env::args().skip(1).find(|a| !a.starts_with('-'));
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let label = format!("criterion {:>2} {name}", i + 1);
        if filter.as_ref().is_some_and(|s| !label.contains(s.as_str())) {
            continue;
        }
        let t = Instant::now();
        let r = std::panic::catch_unwind(f).unwrap_or_else(|p| {
            Err(p.downcast_ref::<String>().cloned().or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string())).unwrap_or_default())
        });
        match r {
            Ok(msg) => println!("PASS {label}: {msg} [{:.2?}]", t.elapsed()),
            Err(msg) => {
                failed += 1;
                println!("FAIL {label}: {msg} [{:.2?}]", t.elapsed());
            }
        }
    }
    if failed > 0 {
        println!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}
