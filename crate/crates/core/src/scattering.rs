//! Planar scattering diagrams: walls, loop products, consistent completion.

use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, Signed, Zero};
use rayon::prelude::*;
use thiserror::Error;

use crate::lattice::{int, CentralCharge, ChargeLattice, GaussianRational, LatticeError, PhaseOrdering, Point, Rat, RelativeClass, Sector};
use crate::series::{multiple_of, SeriesContext, SeriesError, SlabFunction, TruncatedSeries};
use crate::wallcross::{factorize_with_keys, Automorphism, ElementaryTransform, WallCrossError};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ScatteringError {
    #[error(transparent)]
    Lattice(#[from] LatticeError),
    #[error(transparent)]
    Series(#[from] SeriesError),
    #[error(transparent)]
    WallCross(#[from] WallCrossError),
    #[error("wall {index}: {msg}")]
    InvalidWall { index: usize, msg: String },
    #[error("genericity failure at {point}: {msg}")]
    Genericity { point: Point, msg: String },
    #[error("probe is tangent to wall {0}")]
    ProbeTangent(usize),
    #[error("base point of wall {0} lies on the probe")]
    BaseOnProbe(usize),
    #[error("probe radius must be positive")]
    BadProbe,
    #[error("weight vector {0} is not sorted ascending")]
    Unsorted(usize),
    #[error("automorphism weight overflows")]
    Overflow,
    #[error("completion did not stabilise")]
    NoConvergence,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum WallKind {
    Line,
    Ray,
}

/// A wall: support, primitive class label and slab 1 + sum_d c_d z^{d label}.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Wall {
    pub base: Point,
    pub direction: Point,
    pub class: RelativeClass,
    pub slab: BTreeMap<u64, Rat>,
    pub kind: WallKind,
}

impl Wall {
    pub fn ray(base: Point, direction: Point, class: RelativeClass, slab: BTreeMap<u64, Rat>) -> Self {
        Wall { base, direction, class, slab, kind: WallKind::Ray }
    }

    pub fn line(base: Point, direction: Point, class: RelativeClass, slab: BTreeMap<u64, Rat>) -> Self {
        Wall { base, direction, class, slab, kind: WallKind::Line }
    }

    /// Slab 1 + z^class.
    pub fn unit_slab() -> BTreeMap<u64, Rat> {
        BTreeMap::from([(1, int(1))])
    }

    /// Parameter t with p = base + t direction, if p is on the supporting line.
    pub fn param_of(&self, p: &Point) -> Option<Rat> {
        let v = p.sub(&self.base);
        if !self.direction.cross(&v).is_zero() {
            return None;
        }
        Some(v.dot(&self.direction) / self.direction.dot(&self.direction))
    }

    /// Whether p lies in the relative interior of the support.
    pub fn passes_through(&self, p: &Point) -> bool {
        match (self.param_of(p), self.kind) {
            (Some(_), WallKind::Line) => true,
            (Some(t), WallKind::Ray) => t.is_positive(),
            _ => false,
        }
    }

    pub fn lowest_multiple(&self) -> u64 {
        self.slab.iter().find(|(_, c)| !c.is_zero()).map(|(d, _)| *d).unwrap_or(0)
    }

    pub fn transform(&self, ctx: &Arc<SeriesContext>) -> Result<ElementaryTransform, ScatteringError> {
        Ok(ElementaryTransform::new(SlabFunction::from_coefficients(ctx, self.class.clone(), &self.slab)?))
    }
}

/// Closed square probe [c - r, c + r]^2 traversed counterclockwise.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LoopProbe {
    pub center: Point,
    pub radius: Rat,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScatteringDiagram {
    lattice: Arc<ChargeLattice>,
    charge: CentralCharge,
    walls: Vec<Wall>,
    cutoff: Rat,
}

fn complex(p: &Point) -> GaussianRational {
    p.as_complex()
}

/// Shortest integer vector along a rational direction.
pub fn primitive_direction(d: &Point) -> Point {
    let l = d.x.denom().lcm(d.y.denom());
    let lr = Rat::from_integer(l);
    let (x, y) = ((&d.x * &lr).to_integer(), (&d.y * &lr).to_integer());
    let g = x.gcd(&y);
    if g.is_zero() {
        return d.clone();
    }
    Point::new(Rat::from_integer(&x / &g), Rat::from_integer(&y / &g))
}

/// Smallest sector containing all keys, or None if they do not fit in an open half-plane.
pub fn enclosing_sector(keys: &[GaussianRational]) -> Option<Sector> {
    let nonzero: Vec<&GaussianRational> = keys.iter().filter(|k| !k.is_zero()).collect();
    let first = *nonzero.first()?;
    let lo = nonzero.iter().find(|k| nonzero.iter().all(|o| !k.cross(o).is_negative() && !(k.cross(o).is_zero() && k.dot(o).is_negative())))?;
    let hi = nonzero.iter().find(|k| nonzero.iter().all(|o| !o.cross(k).is_negative() && !(o.cross(k).is_zero() && o.dot(k).is_negative())))?;
    let _ = first;
    let s = Sector::closed((*lo).clone(), (*hi).clone()).ok()?;
    nonzero.iter().all(|k| s.contains(k)).then_some(s)
}

/// One local scattering problem: lines through a point with given keys and slabs.
pub struct LocalScattering<'a> {
    pub ctx: &'a Arc<SeriesContext>,
    /// class, ordering key (charge gradient), slab coefficients
    pub lines: Vec<(RelativeClass, GaussianRational, BTreeMap<u64, Rat>)>,
}

impl LocalScattering<'_> {
    /// Factor slabs of every primitive class (lines' own slabs divided out), keyed by class.
    pub fn outgoing(
        &self,
        key: &dyn Fn(&RelativeClass) -> Result<GaussianRational, LatticeError>,
        point: &Point,
    ) -> Result<BTreeMap<RelativeClass, BTreeMap<u64, Rat>>, ScatteringError> {
        let ctx = self.ctx;
        let gen_err = |msg: String| ScatteringError::Genericity { point: point.clone(), msg };
        let keys: Vec<GaussianRational> = self.lines.iter().map(|l| l.1.clone()).collect();
        if self.lines.is_empty() {
            return Ok(BTreeMap::new());
        }
        let sector = enclosing_sector(&keys).ok_or_else(|| gen_err("forward directions do not span a strictly convex cone".into()))?;
        // lines in ascending key order, leftmost applied last
        let mut order: Vec<usize> = (0..self.lines.len()).collect();
        order.sort_by(|&a, &b| sector.angle_cmp(&keys[a], &keys[b]).then(a.cmp(&b)));
        let mut prod = Automorphism::identity(ctx);
        let mut incoming: BTreeMap<RelativeClass, TruncatedSeries> = BTreeMap::new();
        for &i in order.iter().rev() {
            let (cls, _, slab) = &self.lines[i];
            let t = ElementaryTransform::new(SlabFunction::from_coefficients(ctx, cls.clone(), slab)?);
            prod = t.to_automorphism()?.compose(&prod)?;
            let e = incoming.entry(cls.clone()).or_insert_with(|| TruncatedSeries::one(ctx));
            *e = e.mul(t.slab().series())?;
        }
        let line_classes: Vec<RelativeClass> = self.lines.iter().map(|l| l.0.clone()).collect();
        let candidates = monoid_primitives(ctx, &line_classes);
        let keyf = |g: &RelativeClass| key(g).unwrap_or_else(|_| GaussianRational::zero());
        let fact = factorize_with_keys(&prod, &sector, &candidates, keyf).map_err(|e| match e {
            WallCrossError::NonCommutingEqualPhase(a, b) => gen_err(format!("classes {a} and {b} have parallel rays but do not commute")),
            WallCrossError::NoAdmissibleRay(c) => gen_err(format!("no admissible outgoing ray for class {c}")),
            other => other.into(),
        })?;
        let mut out = BTreeMap::new();
        for f in fact.factors() {
            let cls = f.transform.direction();
            let mut s = f.transform.slab().series().clone();
            if let Some(inc) = incoming.get(cls) {
                s = s.mul(&inc.inverse()?)?;
            }
            if s.len() > 1 {
                let coeffs: BTreeMap<u64, Rat> =
                    s.terms().iter().filter(|(g, _)| !g.is_zero()).map(|(g, c)| (multiple_of(g, cls).unwrap(), c.clone())).collect();
                out.insert(cls.clone(), coeffs);
            }
        }
        Ok(out)
    }
}

/// Primitive parts of all nonzero nonnegative combinations of `gens` below the context cutoff.
pub fn monoid_primitives(ctx: &SeriesContext, gens: &[RelativeClass]) -> Vec<RelativeClass> {
    let mut seen: BTreeSet<RelativeClass> = BTreeSet::new();
    let mut frontier: Vec<RelativeClass> = Vec::new();
    let mut gens: Vec<RelativeClass> = gens.to_vec();
    gens.sort();
    gens.dedup();
    for g in &gens {
        if ctx.admits(g) && seen.insert(g.clone()) {
            frontier.push(g.clone());
        }
    }
    while let Some(c) = frontier.pop() {
        for g in &gens {
            let n = &c + g;
            if ctx.admits(&n) && !n.is_zero() && seen.insert(n.clone()) {
                frontier.push(n);
            }
            if seen.len() > 200_000 {
                break;
            }
        }
    }
    let mut prims: BTreeSet<RelativeClass> = seen.iter().filter_map(|c| c.primitive().map(|p| p.0)).collect();
    for g in &gens {
        if let Some((p, _)) = g.primitive() {
            prims.insert(p);
        }
    }
    prims.into_iter().collect()
}

impl ScatteringDiagram {
    pub fn new(lattice: Arc<ChargeLattice>, charge: CentralCharge, walls: Vec<Wall>, cutoff: Rat) -> Result<Self, ScatteringError> {
        if !cutoff.is_positive() {
            return Err(SeriesError::NonPositiveCutoff.into());
        }
        if charge.rank() != lattice.rank() {
            return Err(LatticeError::DimensionMismatch { expected: lattice.rank(), got: charge.rank() }.into());
        }
        let d = ScatteringDiagram { lattice, charge, walls, cutoff };
        for (i, w) in d.walls.iter().enumerate() {
            d.validate_wall(i, w)?;
        }
        Ok(d)
    }

    fn validate_wall(&self, index: usize, w: &Wall) -> Result<(), ScatteringError> {
        let bad = |msg: &str| ScatteringError::InvalidWall { index, msg: msg.to_string() };
        if w.class.rank() != self.lattice.rank() {
            return Err(bad("label has the wrong rank"));
        }
        if !w.class.is_primitive() {
            return Err(bad("label is not primitive"));
        }
        if w.direction.is_zero() {
            return Err(bad("zero direction"));
        }
        if w.slab.contains_key(&0) {
            return Err(bad("slab coefficient at multiple 0"));
        }
        let g = self.charge.class_gradient(&w.class)?;
        let along = &g * &complex(&w.direction);
        if !along.im.is_zero() || !along.re.is_positive() {
            return Err(bad("direction is not the increasing constant-phase direction of the label"));
        }
        let z = self.charge.charge(&w.class, &w.base);
        if !z.im.is_zero() || (w.kind == WallKind::Ray && z.re.is_negative()) {
            return Err(bad("label charge is not on the positive real axis along the wall"));
        }
        Ok(())
    }

    pub fn lattice(&self) -> &Arc<ChargeLattice> {
        &self.lattice
    }

    pub fn charge(&self) -> &CentralCharge {
        &self.charge
    }

    pub fn walls(&self) -> &[Wall] {
        &self.walls
    }

    pub fn cutoff(&self) -> &Rat {
        &self.cutoff
    }

    pub fn with_cutoff(&self, cutoff: Rat) -> Result<Self, ScatteringError> {
        Self::new(self.lattice.clone(), self.charge.clone(), self.walls.clone(), cutoff)
    }

    /// Cutoff for truncation order N: N + 1/2.
    pub fn order_cutoff(order: u32) -> Rat {
        int(order as i64) + Rat::new(BigInt::one(), BigInt::from(2))
    }

    pub fn context_at(&self, p: &Point) -> Result<Arc<SeriesContext>, ScatteringError> {
        Ok(Arc::new(SeriesContext::at_point(self.lattice.clone(), &self.charge, p, self.cutoff.clone())?))
    }

    fn present_at(&self, w: &Wall, p: &Point) -> bool {
        let d = w.lowest_multiple();
        if d == 0 {
            return false;
        }
        self.charge.charge(&w.class.scale(d as i64), p).norm_sqr() < &self.cutoff * &self.cutoff
    }

    fn intersection(a: &Wall, b: &Wall) -> Option<Point> {
        let den = a.direction.cross(&b.direction);
        if den.is_zero() {
            return None;
        }
        let v = b.base.sub(&a.base);
        let s = v.cross(&b.direction) / &den;
        let t = v.cross(&a.direction) / &den;
        if (a.kind == WallKind::Ray && !s.is_positive()) || (b.kind == WallKind::Ray && !t.is_positive()) {
            return None;
        }
        Some(a.base.add_scaled(&a.direction, &s))
    }

    /// Points where two non-parallel walls cross in their relative interiors, both below the cutoff there.
    pub fn crossing_points(&self) -> Vec<Point> {
        let mut pts = BTreeSet::new();
        for i in 0..self.walls.len() {
            for j in i + 1..self.walls.len() {
                if let Some(p) = Self::intersection(&self.walls[i], &self.walls[j]) {
                    if self.present_at(&self.walls[i], &p) && self.present_at(&self.walls[j], &p) {
                        pts.insert(p);
                    }
                }
            }
        }
        pts.into_iter().collect()
    }

    fn key(&self, g: &RelativeClass) -> Result<GaussianRational, LatticeError> {
        self.charge.class_gradient(g)
    }

    /// Outgoing slabs forced at `p` by the walls passing through it.
    fn outgoing_at(&self, p: &Point) -> Result<BTreeMap<RelativeClass, BTreeMap<u64, Rat>>, ScatteringError> {
        let ctx = self.context_at(p)?;
        let mut lines = Vec::new();
        for w in &self.walls {
            if w.passes_through(p) && self.present_at(w, p) {
                lines.push((w.class.clone(), self.key(&w.class)?, w.slab.clone()));
            }
        }
        LocalScattering { ctx: &ctx, lines }.outgoing(&|g| self.key(g), p)
    }

    fn outgoing_direction(&self, g: &RelativeClass) -> Result<Point, ScatteringError> {
        let k = self.key(g)?.conj();
        Ok(primitive_direction(&Point::from_complex(&k)))
    }

    /// Insert outgoing rays until every crossing is locally consistent.
    pub fn complete(&self) -> Result<ScatteringDiagram, ScatteringError> {
        let mut d = self.clone();
        for _pass in 0..10_000 {
            let pts = d.crossing_points();
            let results: Vec<Result<BTreeMap<RelativeClass, BTreeMap<u64, Rat>>, ScatteringError>> =
                pts.par_iter().map(|p| d.outgoing_at(p)).collect();
            let mut changed = false;
            let mut walls = d.walls.clone();
            for (p, res) in pts.iter().zip(results) {
                let out = res?;
                let mut existing: BTreeMap<RelativeClass, usize> = BTreeMap::new();
                for (i, w) in walls.iter().enumerate() {
                    if w.kind == WallKind::Ray && w.base == *p {
                        existing.insert(w.class.clone(), i);
                    }
                }
                let mut remove = Vec::new();
                for (cls, i) in &existing {
                    match out.get(cls) {
                        Some(s) if *s == walls[*i].slab => {}
                        Some(s) => {
                            walls[*i].slab = s.clone();
                            changed = true;
                        }
                        None => {
                            remove.push(*i);
                            changed = true;
                        }
                    }
                }
                remove.sort_unstable();
                for i in remove.into_iter().rev() {
                    walls.remove(i);
                }
                for (cls, s) in &out {
                    if !existing.contains_key(cls) {
                        walls.push(Wall::ray(p.clone(), d.outgoing_direction(cls)?, cls.clone(), s.clone()));
                        changed = true;
                    }
                }
            }
            let initial = self.walls.len();
            let mut created: Vec<Wall> = walls.split_off(initial.min(walls.len()));
            created.sort_by(|a, b| a.base.cmp(&b.base).then_with(|| a.class.cmp(&b.class)));
            walls.extend(created);
            d.walls = walls;
            if !changed {
                return Ok(d);
            }
        }
        Err(ScatteringError::NoConvergence)
    }

    /// Complete at truncation order N.
    pub fn complete_to_order(&self, order: u32) -> Result<ScatteringDiagram, ScatteringError> {
        self.with_cutoff(Self::order_cutoff(order))?.complete()
    }

    /// Path-ordered product around the probe; the first crossing is the leftmost factor.
    pub fn loop_product(&self, probe: &LoopProbe) -> Result<Automorphism, ScatteringError> {
        if !probe.radius.is_positive() {
            return Err(ScatteringError::BadProbe);
        }
        let ctx = self.context_at(&probe.center)?;
        let r = &probe.radius;
        let c = &probe.center;
        let (x0, x1) = (&c.x - r, &c.x + r);
        let (y0, y1) = (&c.y - r, &c.y + r);
        let side = r * int(2);
        // edges in counterclockwise order starting at the lower-right corner
        let corners = [
            Point::new(x1.clone(), y0.clone()),
            Point::new(x1.clone(), y1.clone()),
            Point::new(x0.clone(), y1.clone()),
            Point::new(x0.clone(), y0.clone()),
        ];
        let tangents = [Point::from_ints(0, 1), Point::from_ints(-1, 0), Point::from_ints(0, -1), Point::from_ints(1, 0)];
        let on_boundary = |p: &Point| {
            let inside = p.x >= x0 && p.x <= x1 && p.y >= y0 && p.y <= y1;
            inside && (p.x == x0 || p.x == x1 || p.y == y0 || p.y == y1)
        };
        let mut crossings: Vec<(Rat, usize, i64)> = Vec::new();
        for (wi, w) in self.walls.iter().enumerate() {
            if w.kind == WallKind::Ray && on_boundary(&w.base) {
                return Err(ScatteringError::BaseOnProbe(wi));
            }
            let mut hits: BTreeMap<Rat, i64> = BTreeMap::new();
            for e in 0..4 {
                let a = &corners[e];
                let t = &tangents[e];
                let den = w.direction.cross(t);
                let v = a.sub(&w.base);
                if den.is_zero() {
                    if w.direction.cross(&v).is_zero() {
                        return Err(ScatteringError::ProbeTangent(wi));
                    }
                    continue;
                }
                // base + s dir = a + u t
                let s = v.cross(t) / &den;
                let u = v.cross(&w.direction) / &den;
                if u.is_negative() || u > side || (w.kind == WallKind::Ray && !s.is_positive()) {
                    continue;
                }
                let pos = int(e as i64) * &side + &u;
                let pos = if pos == int(4) * &side { int(0) } else { pos };
                let tangent = if u.is_zero() {
                    let prev = &tangents[(e + 3) % 4];
                    Point::new(&prev.x + &t.x, &prev.y + &t.y)
                } else if u == side {
                    let next = &tangents[(e + 1) % 4];
                    Point::new(&next.x + &t.x, &next.y + &t.y)
                } else {
                    t.clone()
                };
                let eps = w.direction.cross(&tangent);
                if eps.is_zero() {
                    continue; // grazes a corner without entering
                }
                hits.insert(pos, if eps.is_positive() { 1 } else { -1 });
            }
            for (pos, eps) in hits {
                crossings.push((pos, wi, eps));
            }
        }
        crossings.sort_by(|a, b| a.0.cmp(&b.0).then(a.1.cmp(&b.1)));
        let mut prod = Automorphism::identity(&ctx);
        for (_, wi, eps) in crossings.iter().rev() {
            let t = self.walls[*wi].transform(&ctx)?;
            let t = if *eps > 0 { t } else { t.inverse()? };
            prod = t.to_automorphism()?.compose(&prod)?;
        }
        Ok(prod)
    }

    /// A probe around `p` small enough to meet only the walls through `p`.
    pub fn default_probe(&self, p: &Point) -> LoopProbe {
        let mut r = int(1);
        let mut consider = |d: Rat| {
            if d.is_positive() && d < r {
                r = d;
            }
        };
        for q in self.crossing_points() {
            consider(q.linf_dist(p));
        }
        for w in &self.walls {
            if w.kind == WallKind::Ray && w.base != *p {
                consider(w.base.linf_dist(p));
            }
            if w.passes_through(p) || w.base == *p {
                continue;
            }
            let v = p.sub(&w.base);
            let l1 = w.direction.x.abs() + w.direction.y.abs();
            let line_d = w.direction.cross(&v).abs() / l1;
            if w.kind == WallKind::Line || !v.dot(&w.direction).is_negative() {
                consider(line_d);
            } else {
                consider(w.base.linf_dist(p) / int(2));
            }
        }
        LoopProbe { center: p.clone(), radius: r / int(3) }
    }

    /// Loop product around every crossing point, with the default probe.
    pub fn consistency_report(&self) -> Result<Vec<(Point, bool)>, ScatteringError> {
        let pts = self.crossing_points();
        pts.par_iter()
            .map(|p| Ok((p.clone(), self.loop_product(&self.default_probe(p))?.is_identity())))
            .collect()
    }

    pub fn with_walls(&self, walls: Vec<Wall>) -> Result<Self, ScatteringError> {
        Self::new(self.lattice.clone(), self.charge.clone(), walls, self.cutoff.clone())
    }
}

fn factorial(n: u64) -> Option<u128> {
    (1..=n as u128).try_fold(1u128, |a, k| a.checked_mul(k))
}

/// |Aut(w)| = prod_i prod_n (a^i_n)! * prod_l (b_l)!.
pub fn aut_weight(w: &[Vec<u64>], charges: &[GaussianRational]) -> Result<u128, ScatteringError> {
    let mut total: u128 = 1;
    for (i, wi) in w.iter().enumerate() {
        if wi.windows(2).any(|p| p[0] > p[1]) {
            return Err(ScatteringError::Unsorted(i));
        }
        let mut counts: BTreeMap<u64, u64> = BTreeMap::new();
        for x in wi {
            *counts.entry(*x).or_default() += 1;
        }
        for a in counts.values() {
            total = total.checked_mul(factorial(*a).ok_or(ScatteringError::Overflow)?).ok_or(ScatteringError::Overflow)?;
        }
    }
    let mut rays: Vec<(&GaussianRational, u64)> = Vec::new();
    for z in charges {
        let mut found = false;
        for (r, n) in rays.iter_mut() {
            if crate::lattice::phase_compare(r, z)? == PhaseOrdering::EqualPhase {
                *n += 1;
                found = true;
                break;
            }
        }
        if !found {
            rays.push((z, 1));
        }
    }
    for (_, b) in rays {
        total = total.checked_mul(factorial(b).ok_or(ScatteringError::Overflow)?).ok_or(ScatteringError::Overflow)?;
    }
    Ok(total)
}
