//! Affine base with focus-focus singularities, monodromy, and tropical disc enumeration.
//!
//! Discs for (gamma, u) live at the phase zeta = Z_gamma(u): every edge of class k lies on
//! the half-line R_k = { x : Z_k(x) in R_{>0} zeta }. A disc is an initial segment from a
//! singularity, or a trivalent vertex joining two discs, or (at non-generic vertices where
//! several rays meet) a junction node whose weight is fixed by local consistency.

use std::cell::RefCell;
use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::sync::Arc;

use num_traits::Signed;
use thiserror::Error;

use crate::lattice::{int, rat, CentralCharge, ChargeLattice, GaussianRational, LatticeError, Point, Rat, RelativeClass, SignConvention};
use crate::scattering::{enclosing_sector, primitive_direction, LocalScattering, ScatteringDiagram, ScatteringError, Wall};
use crate::series::{counts_from_slab, slab_from_counts, Coefficient, SeriesContext, SeriesError, SlabFunction};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TropicalError {
    #[error(transparent)]
    Lattice(#[from] LatticeError),
    #[error(transparent)]
    Series(#[from] SeriesError),
    #[error(transparent)]
    Scattering(#[from] ScatteringError),
    #[error(transparent)]
    WallCross(#[from] crate::wallcross::WallCrossError),
    #[error("invalid singular base: {0}")]
    InvalidBase(String),
    #[error("path passes through singular point {0}")]
    PathThroughSingularity(usize),
    #[error("path meets the branch cut of singularity {0} non-transversally")]
    PathOnCut(usize),
    #[error("point {point} lies on a wall for {class}: {left} + {right} meet there")]
    OnWall { class: RelativeClass, point: Point, left: RelativeClass, right: RelativeClass },
    #[error("Z of {0} vanishes at the stop point")]
    ZeroCharge(RelativeClass),
    #[error("|Z| of {0} is not below the cutoff")]
    AboveCutoff(RelativeClass),
    #[error("disc contains a non-generic junction; use the scattering path")]
    NonGeneric,
    #[error("edges are parallel at a claimed trivalent vertex")]
    NotTransverse,
    #[error("malformed disc: {0}")]
    Malformed(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Singularity {
    pub position: Point,
    /// Primitive monodromy-invariant direction, the boundary of the thimble class.
    pub invariant: [i64; 2],
    /// Direction of the branch cut ray from the singular point.
    pub cut: Point,
}

/// Plane with focus-focus singularities; the thimble class of singularity s is the unit vector e_s.
#[derive(Debug, Clone, PartialEq)]
pub struct SingularBase {
    lattice: Arc<ChargeLattice>,
    charge: CentralCharge,
    singularities: Vec<Singularity>,
}

fn gcd(a: i64, b: i64) -> i64 {
    num_integer::Integer::gcd(&a, &b)
}

impl SingularBase {
    /// Z_{e_s}(u) = conj(m_s) (u - p_s); cuts along m_s (the |Z|-increasing invariant ray).
    pub fn new(points: Vec<(Point, [i64; 2])>, convention: SignConvention) -> Result<Self, TropicalError> {
        let lattice = Arc::new(ChargeLattice::new(points.iter().map(|p| p.1).collect())?.with_convention(convention));
        let mut b = Vec::new();
        let mut g = Vec::new();
        for (p, m) in &points {
            let gm = GaussianRational::from_ints(m[0], -m[1]);
            b.push(-&(&gm * &p.as_complex()));
            g.push(gm);
        }
        let charge = CentralCharge::holomorphic(b, g)?;
        let sing = points
            .into_iter()
            .map(|(p, m)| Singularity { position: p, invariant: m, cut: Point::from_ints(m[0], m[1]) })
            .collect();
        Self::from_parts(lattice, charge, sing)
    }

    pub fn from_parts(lattice: Arc<ChargeLattice>, charge: CentralCharge, singularities: Vec<Singularity>) -> Result<Self, TropicalError> {
        let bad = |m: String| Err(TropicalError::InvalidBase(m));
        let n = singularities.len();
        if n == 0 {
            return bad("no singularities".into());
        }
        if lattice.rank() != n || charge.rank() != n {
            return bad("the lattice must have one thimble generator per singularity".into());
        }
        let mut kappa: Option<GaussianRational> = None;
        let mut ms = Vec::new();
        for (s, sg) in singularities.iter().enumerate() {
            let m = sg.invariant;
            if gcd(m[0], m[1]) != 1 {
                return bad(format!("invariant direction of singularity {s} is not primitive"));
            }
            if lattice.boundary_columns()[s] != m {
                return bad(format!("boundary of thimble {s} differs from its invariant direction"));
            }
            if sg.cut.is_zero() {
                return bad(format!("zero cut direction at singularity {s}"));
            }
            let e = RelativeClass::unit(n, s);
            if !charge.charge(&e, &sg.position).is_zero() {
                return bad(format!("Z of thimble {s} does not vanish at its singular point"));
            }
            let g = charge.complex_gradient(s)?;
            let cm = GaussianRational::from_ints(m[0], -m[1]);
            // g = kappa * conj(m)
            let k = &g * &cm.inv().unwrap();
            match &kappa {
                None => {
                    if k.is_zero() {
                        return bad("degenerate charge gradient".into());
                    }
                    kappa = Some(k)
                }
                Some(k0) if *k0 != k => return bad("charge gradients are not a common multiple of conj(boundary)".into()),
                _ => {}
            }
            ms.push(GaussianRational::from_ints(m[0], m[1]));
        }
        match enclosing_sector(&ms) {
            Some(s) if !s.lo().cross(s.hi()).is_zero() || ms.iter().all(|m| m.same_phase(s.lo())) => {}
            _ => return bad("invariant directions must lie in an open half-plane".into()),
        }
        Ok(SingularBase { lattice, charge, singularities })
    }

    pub fn with_cut(mut self, s: usize, dir: Point) -> Result<Self, TropicalError> {
        if dir.is_zero() || s >= self.singularities.len() {
            return Err(TropicalError::InvalidBase("bad cut".into()));
        }
        self.singularities[s].cut = dir;
        Ok(self)
    }

    pub fn lattice(&self) -> &Arc<ChargeLattice> {
        &self.lattice
    }

    pub fn charge(&self) -> &CentralCharge {
        &self.charge
    }

    pub fn singularities(&self) -> &[Singularity] {
        &self.singularities
    }

    pub fn rank(&self) -> usize {
        self.singularities.len()
    }

    pub fn thimble(&self, s: usize) -> RelativeClass {
        RelativeClass::unit(self.rank(), s)
    }

    /// Charge rotated so that phase `zeta` becomes the positive real axis.
    pub fn rotated_charge(&self, zeta: &GaussianRational) -> CentralCharge {
        self.charge.multiplied(&zeta.conj())
    }

    /// Initial scattering diagram at phase `zeta`: one focus-focus ray per singularity.
    pub fn diagram_at_phase(&self, zeta: &GaussianRational, cutoff: Rat) -> Result<ScatteringDiagram, TropicalError> {
        let rot = self.rotated_charge(zeta);
        let mut walls = Vec::new();
        for (s, sg) in self.singularities.iter().enumerate() {
            let g = rot.complex_gradient(s)?;
            let d = primitive_direction(&Point::from_complex(&g.conj()));
            walls.push(Wall::ray(sg.position.clone(), d, self.thimble(s), Wall::unit_slab()));
        }
        Ok(ScatteringDiagram::new(self.lattice.clone(), rot, walls, cutoff)?)
    }

    /// Carry a class along a polyline, applying the monodromy at each signed cut crossing.
    pub fn monodromy_transport(&self, gamma: &RelativeClass, path: &[Point]) -> Result<RelativeClass, TropicalError> {
        let sign = self.lattice.convention().sign();
        let mut g = gamma.clone();
        for seg in path.windows(2) {
            let (a, b) = (&seg[0], &seg[1]);
            let dir = b.sub(a);
            let mut hits: Vec<(Rat, usize, i64)> = Vec::new();
            for (s, sg) in self.singularities.iter().enumerate() {
                let p = &sg.position;
                let ap = p.sub(a);
                if dir.cross(&ap).is_zero() {
                    let t = if dir.is_zero() { int(0) } else { ap.dot(&dir) / dir.dot(&dir) };
                    if !t.is_negative() && t <= int(1) {
                        return Err(TropicalError::PathThroughSingularity(s));
                    }
                }
                let den = dir.cross(&sg.cut);
                if den.is_zero() {
                    // parallel: only a problem if the segment runs along the cut
                    if ap.cross(&sg.cut).is_zero() && !dir.is_zero() {
                        let ta = a.sub(p).dot(&sg.cut);
                        let tb = b.sub(p).dot(&sg.cut);
                        if ta.is_positive() || tb.is_positive() {
                            return Err(TropicalError::PathOnCut(s));
                        }
                    }
                    continue;
                }
                let u = ap.cross(&sg.cut) / &den;
                let t = ap.cross(&dir) / &den;
                if !t.is_positive() || u.is_negative() || u > int(1) {
                    continue;
                }
                if u.is_zero() || u == int(1) {
                    return Err(TropicalError::PathOnCut(s));
                }
                let orient = if sg.cut.cross(&dir).is_positive() { 1 } else { -1 };
                hits.push((u, s, orient));
            }
            hits.sort_by(|x, y| x.0.cmp(&y.0));
            for (_, s, orient) in hits {
                let e = self.thimble(s);
                let k = self.lattice.pairing(&e, &g)? * sign * orient;
                g = &g - &e.scale(k);
            }
        }
        Ok(g)
    }

    /// All nonzero nonnegative classes with |Z_gamma(u)| < lambda.
    pub fn classes_below(&self, u: &Point, lambda: &Rat) -> Result<Vec<RelativeClass>, TropicalError> {
        let vals = self.charge.values_at(u);
        let sector = enclosing_sector(&vals)
            .filter(|s| vals.iter().all(|v| !v.is_zero() && s.contains(v)))
            .ok_or_else(|| TropicalError::InvalidBase("thimble charges at the point do not lie in a half-plane".into()))?;
        let gens: Vec<RelativeClass> = (0..self.rank()).map(|s| self.thimble(s)).collect();
        Ok(crate::lattice::sublevel_classes(&self.charge, u, &sector, lambda, &gens)?)
    }
}

/// Mult = w1 w2 |det(v1, v2)|.
pub fn vertex_multiplicity(w1: u64, v1: [i64; 2], w2: u64, v2: [i64; 2]) -> Result<u64, TropicalError> {
    let det = (v1[0] * v2[1] - v1[1] * v2[0]).unsigned_abs();
    if det == 0 && w1 != 0 && w2 != 0 {
        return Err(TropicalError::NotTransverse);
    }
    Ok(w1 * w2 * det)
}

fn split_boundary(m: [i64; 2]) -> (u64, [i64; 2]) {
    let g = gcd(m[0], m[1]).unsigned_abs();
    if g == 0 {
        return (0, m);
    }
    (g, [m[0] / g as i64, m[1] / g as i64])
}

#[derive(Debug, Clone, PartialEq)]
pub enum DiscNode<W = Rat> {
    /// Initial segment of weight `weight` from a singular point.
    Leaf { singularity: usize, weight: u64 },
    /// Trivalent vertex where two discs meet.
    Vertex { point: Point, multiplicity: u64, children: [Arc<TropicalDisc<W>>; 2] },
    /// Non-generic vertex: the part of the local output not carried by trivalent splittings.
    Junction { point: Point, weight: W },
}

#[derive(Debug, Clone, PartialEq)]
pub struct TropicalDisc<W = Rat> {
    pub class: RelativeClass,
    pub stop: Point,
    pub node: DiscNode<W>,
}

impl<W: Coefficient> TropicalDisc<W> {
    pub fn is_generic(&self) -> bool {
        match &self.node {
            DiscNode::Leaf { .. } => true,
            DiscNode::Vertex { children, .. } => children.iter().all(|c| c.is_generic()),
            DiscNode::Junction { .. } => false,
        }
    }

    pub fn total_weight<R: LocalRule<W = W>>(&self, rule: &R) -> W {
        match &self.node {
            DiscNode::Leaf { weight, .. } => rule.leaf(*weight),
            DiscNode::Vertex { multiplicity, children, .. } => {
                rule.vertex(*multiplicity).mul(&children[0].total_weight(rule)).mul(&children[1].total_weight(rule))
            }
            DiscNode::Junction { weight, .. } => weight.clone(),
        }
    }

    fn write_tree(&self, f: &mut fmt::Formatter<'_>, depth: usize) -> fmt::Result {
        let pad = "  ".repeat(depth);
        match &self.node {
            DiscNode::Leaf { singularity, weight } => writeln!(f, "{pad}leaf {} -> {} singularity={singularity} weight={weight}", self.class, self.stop),
            DiscNode::Vertex { point, multiplicity, children } => {
                writeln!(f, "{pad}vertex {} at {point} -> {} mult={multiplicity}", self.class, self.stop)?;
                children[0].write_tree(f, depth + 1)?;
                children[1].write_tree(f, depth + 1)
            }
            DiscNode::Junction { point, weight } => writeln!(f, "{pad}junction {} at {point} -> {} weight={weight}", self.class, self.stop),
        }
    }
}

impl<W: Coefficient> fmt::Display for TropicalDisc<W> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.write_tree(f, 0)
    }
}

/// Product of vertex multiplicities and leaf factors (-1)^{w-1}/w^2; junctions are rejected.
pub fn disc_weight(d: &TropicalDisc) -> Result<Rat, TropicalError> {
    if !d.is_generic() {
        return Err(TropicalError::NonGeneric);
    }
    Ok(d.total_weight(&ClassicalRule))
}

/// Weights and the local consistency rule used by the disc recursion.
pub trait LocalRule: Sync {
    type W: Coefficient;
    /// Weight of an initial segment of multiplicity d.
    fn leaf(&self, d: u64) -> Self::W;
    /// Weight of a trivalent vertex of multiplicity m.
    fn vertex(&self, m: u64) -> Self::W;
    /// Outgoing counts at a vertex given incoming counts (primitive class -> multiple -> count).
    fn outgoing(
        &self,
        ctx: &Arc<SeriesContext>,
        keys: &dyn Fn(&RelativeClass) -> Result<GaussianRational, LatticeError>,
        incoming: &BTreeMap<RelativeClass, BTreeMap<u64, Self::W>>,
        point: &Point,
    ) -> Result<BTreeMap<RelativeClass, Self::W>, TropicalError>;
}

/// Numerical (q = 1) counts.
#[derive(Debug, Clone, Copy, Default)]
pub struct ClassicalRule;

impl LocalRule for ClassicalRule {
    type W = Rat;

    fn leaf(&self, d: u64) -> Rat {
        let s = if d % 2 == 1 { 1 } else { -1 };
        rat(s, (d * d) as i64)
    }

    fn vertex(&self, m: u64) -> Rat {
        int(m as i64)
    }

    fn outgoing(
        &self,
        ctx: &Arc<SeriesContext>,
        keys: &dyn Fn(&RelativeClass) -> Result<GaussianRational, LatticeError>,
        incoming: &BTreeMap<RelativeClass, BTreeMap<u64, Rat>>,
        point: &Point,
    ) -> Result<BTreeMap<RelativeClass, Rat>, TropicalError> {
        let mut lines = Vec::new();
        for (b, counts) in incoming {
            let s = slab_from_counts(ctx, counts, b)?;
            lines.push((b.clone(), keys(b)?, s.coefficients()));
        }
        let out = LocalScattering { ctx, lines }.outgoing(keys, point)?;
        let mut res = BTreeMap::new();
        for (b, coeffs) in out {
            let f = SlabFunction::from_coefficients(ctx, b.clone(), &coeffs)?;
            for (d, w) in counts_from_slab(&f)? {
                if !w.is_zero() {
                    res.insert(b.scale(d as i64), w);
                }
            }
        }
        Ok(res)
    }
}

/// Disc recursion at a fixed phase.
pub struct PhaseSolver<'a, R: LocalRule> {
    base: &'a SingularBase,
    rule: &'a R,
    rot: CentralCharge,
    omega: RefCell<HashMap<(RelativeClass, Point), R::W>>,
    out: RefCell<HashMap<(Point, RelativeClass), R::W>>,
    discs: RefCell<HashMap<(RelativeClass, Point), Arc<Vec<Arc<TropicalDisc<R::W>>>>>>,
}

impl<'a, R: LocalRule> PhaseSolver<'a, R> {
    pub fn new(base: &'a SingularBase, rule: &'a R, zeta: &GaussianRational) -> Self {
        PhaseSolver {
            base,
            rule,
            rot: base.rotated_charge(zeta),
            omega: RefCell::new(HashMap::new()),
            out: RefCell::new(HashMap::new()),
            discs: RefCell::new(HashMap::new()),
        }
    }

    fn z(&self, k: &RelativeClass, x: &Point) -> GaussianRational {
        self.rot.charge(k, x)
    }

    /// Rotated energy of k at x when x lies on R_k.
    fn energy(&self, k: &RelativeClass, x: &Point) -> Option<Rat> {
        let z = self.z(k, x);
        (z.im.is_zero() && z.re.is_positive()).then_some(z.re)
    }

    fn below(k: &RelativeClass) -> Vec<RelativeClass> {
        let mut out = vec![RelativeClass::zero(k.rank())];
        for (i, &ki) in k.coords().iter().enumerate() {
            let mut next = Vec::with_capacity(out.len() * (ki as usize + 1));
            for c in &out {
                for j in 0..=ki.max(0) {
                    next.push(c + &RelativeClass::unit(k.rank(), i).scale(j));
                }
            }
            out = next;
        }
        out.into_iter().filter(|c| !c.is_zero() && c != k).collect()
    }

    fn intersect(&self, a: &RelativeClass, b: &RelativeClass) -> Option<Point> {
        // Im(Z'_c(v)) = Im(b_c) + Im(g_c) x + Re(g_c) y
        let line = |c: &RelativeClass| -> Option<(Rat, Rat, Rat)> {
            let g = self.rot.class_gradient(c).ok()?;
            let b0 = self.z(c, &Point::origin());
            Some((g.im.clone(), g.re.clone(), -b0.im))
        };
        let (a1, b1, c1) = line(a)?;
        let (a2, b2, c2) = line(b)?;
        let det = &a1 * &b2 - &a2 * &b1;
        if det.is_zero() {
            return None;
        }
        Some(Point::new((&c1 * &b2 - &c2 * &b1) / &det, (&a1 * &c2 - &a2 * &c1) / &det))
    }

    /// Vertex points on R_k up to and including x: point -> a witnessing pair.
    fn candidates(&self, k: &RelativeClass, x: &Point, ex: &Rat) -> Result<BTreeMap<Point, (RelativeClass, RelativeClass)>, TropicalError> {
        let lat = self.base.lattice();
        let below = Self::below(k);
        let mut pts: BTreeMap<Point, (RelativeClass, RelativeClass)> = BTreeMap::new();
        for (i, a) in below.iter().enumerate() {
            for b in &below[i + 1..] {
                let s = a + b;
                if !s.le(k) || lat.pairing(a, b)? == 0 {
                    continue;
                }
                let Some(v) = self.intersect(a, b) else { continue };
                if pts.contains_key(&v) {
                    continue;
                }
                let Some(ev) = self.energy(k, &v) else { continue };
                if ev > *ex || (ev == *ex && v != *x) {
                    continue;
                }
                if self.energy(a, &v).is_none() || self.energy(b, &v).is_none() {
                    continue;
                }
                if self.omega_in(a, &v)?.is_zero() || self.omega_in(b, &v)?.is_zero() {
                    continue;
                }
                pts.insert(v, (a.clone(), b.clone()));
            }
        }
        Ok(pts)
    }

    /// Count of k carried by the rays leaving v.
    fn vertex_out(&self, v: &Point, k: &RelativeClass) -> Result<R::W, TropicalError> {
        let key = (v.clone(), k.clone());
        if let Some(w) = self.out.borrow().get(&key) {
            return Ok(w.clone());
        }
        let ek = self.energy(k, v).expect("vertex lies on R_k");
        let mut incoming: BTreeMap<RelativeClass, BTreeMap<u64, R::W>> = BTreeMap::new();
        let mut emin = ek.clone();
        for d in Self::below(k) {
            let Some(e) = self.energy(&d, v) else { continue };
            let w = self.omega_in(&d, v)?;
            if w.is_zero() {
                continue;
            }
            if e < emin {
                emin = e;
            }
            let (p, m) = d.primitive().expect("nonzero");
            incoming.entry(p).or_default().insert(m, w);
        }
        let res = if incoming.is_empty() {
            R::W::zero()
        } else {
            let cutoff = &ek + &emin / int(2);
            let ctx = Arc::new(SeriesContext::new(self.base.lattice().clone(), self.rot.values_at(v), cutoff)?);
            let rot = &self.rot;
            let out = self.rule.outgoing(&ctx, &|c| rot.class_gradient(c), &incoming, v)?;
            out.get(k).cloned().unwrap_or_else(R::W::zero)
        };
        self.out.borrow_mut().insert(key, res.clone());
        Ok(res)
    }

    fn leaf_term(&self, k: &RelativeClass) -> Option<(usize, u64)> {
        let (p, d) = k.primitive()?;
        let s = p.coords().iter().position(|&c| c != 0)?;
        (p == self.base.thimble(s)).then_some((s, d))
    }

    /// Count of discs of class k ending at x, using only vertices strictly before x.
    pub fn omega_in(&self, k: &RelativeClass, x: &Point) -> Result<R::W, TropicalError> {
        let key = (k.clone(), x.clone());
        if let Some(w) = self.omega.borrow().get(&key) {
            return Ok(w.clone());
        }
        let mut total = R::W::zero();
        if let Some(ex) = self.energy(k, x) {
            if let Some((_, d)) = self.leaf_term(k) {
                total = total.add(&self.rule.leaf(d));
            }
            for v in self.candidates(k, x, &ex)?.into_keys() {
                if v != *x {
                    total = total.add(&self.vertex_out(&v, k)?);
                }
            }
        }
        self.omega.borrow_mut().insert(key, total.clone());
        Ok(total)
    }

    /// omega_in plus the wall-membership check at the stop point.
    pub fn omega_at(&self, k: &RelativeClass, u: &Point) -> Result<R::W, TropicalError> {
        if self.z(k, u).is_zero() {
            return Err(TropicalError::ZeroCharge(k.clone()));
        }
        let ex = self.energy(k, u).ok_or_else(|| TropicalError::Malformed("stop point is not on the ray of its class".into()))?;
        if let Some((a, b)) = self.candidates(k, u, &ex)?.remove(u) {
            if !self.vertex_out(u, k)?.is_zero() {
                return Err(TropicalError::OnWall { class: k.clone(), point: u.clone(), left: a, right: b });
            }
        }
        self.omega_in(k, u)
    }

    /// All discs of class k ending at x (junction nodes included).
    pub fn discs(&self, k: &RelativeClass, x: &Point) -> Result<Arc<Vec<Arc<TropicalDisc<R::W>>>>, TropicalError> {
        let key = (k.clone(), x.clone());
        if let Some(d) = self.discs.borrow().get(&key) {
            return Ok(d.clone());
        }
        let lat = self.base.lattice();
        let mut out = Vec::new();
        if let Some(ex) = self.energy(k, x) {
            if let Some((s, d)) = self.leaf_term(k) {
                out.push(Arc::new(TropicalDisc { class: k.clone(), stop: x.clone(), node: DiscNode::Leaf { singularity: s, weight: d } }));
            }
            for v in self.candidates(k, x, &ex)?.into_keys() {
                if v == *x {
                    continue;
                }
                let mut generic = R::W::zero();
                for a in Self::below(k) {
                    let b = k - &a;
                    if a >= b || !b.is_nonnegative() {
                        continue;
                    }
                    let p = lat.pairing(&a, &b)?;
                    if p == 0 || self.energy(&a, &v).is_none() || self.energy(&b, &v).is_none() {
                        continue;
                    }
                    let (wa, va) = split_boundary(lat.boundary(&a));
                    let (wb, vb) = split_boundary(lat.boundary(&b));
                    let mult = vertex_multiplicity(wa, va, wb, vb)?;
                    let (oa, ob) = (self.omega_in(&a, &v)?, self.omega_in(&b, &v)?);
                    if oa.is_zero() || ob.is_zero() {
                        continue;
                    }
                    generic = generic.add(&self.rule.vertex(mult).mul(&oa).mul(&ob));
                    let (la, lb) = (self.discs(&a, &v)?, self.discs(&b, &v)?);
                    for da in la.iter() {
                        for db in lb.iter() {
                            out.push(Arc::new(TropicalDisc {
                                class: k.clone(),
                                stop: x.clone(),
                                node: DiscNode::Vertex { point: v.clone(), multiplicity: mult, children: [da.clone(), db.clone()] },
                            }));
                        }
                    }
                }
                let corr = self.vertex_out(&v, k)?.sub(&generic);
                if !corr.is_zero() {
                    out.push(Arc::new(TropicalDisc { class: k.clone(), stop: x.clone(), node: DiscNode::Junction { point: v, weight: corr } }));
                }
            }
        }
        let out = Arc::new(out);
        self.discs.borrow_mut().insert(key, out.clone());
        Ok(out)
    }

    /// Balancing, constant phase and orientation of every edge.
    pub fn check_disc(&self, d: &TropicalDisc<R::W>) -> Result<(), TropicalError> {
        let lat = self.base.lattice();
        let bad = |m: &str| Err(TropicalError::Malformed(m.to_string()));
        let dir = |k: &RelativeClass| -> Result<Point, TropicalError> { Ok(Point::from_complex(&self.rot.class_gradient(k)?.conj())) };
        let along = |from: &Point, to: &Point, k: &RelativeClass| -> Result<bool, TropicalError> {
            let v = to.sub(from);
            let dk = dir(k)?;
            Ok(v.cross(&dk).is_zero() && v.dot(&dk).is_positive())
        };
        if self.energy(&d.class, &d.stop).is_none() {
            return bad("stop is off the constant-phase ray");
        }
        match &d.node {
            DiscNode::Leaf { singularity, weight } => {
                if d.class != self.base.thimble(*singularity).scale(*weight as i64) {
                    return bad("leaf class is not a thimble multiple");
                }
                if !along(&self.base.singularities()[*singularity].position, &d.stop, &d.class)? {
                    return bad("leaf edge is not on the thimble ray");
                }
            }
            DiscNode::Vertex { point, multiplicity, children } => {
                let [a, b] = children;
                if &a.class + &b.class != d.class || a.stop != *point || b.stop != *point {
                    return bad("unbalanced vertex");
                }
                let (wa, va) = split_boundary(lat.boundary(&a.class));
                let (wb, vb) = split_boundary(lat.boundary(&b.class));
                if vertex_multiplicity(wa, va, wb, vb)? != *multiplicity {
                    return bad("wrong multiplicity");
                }
                if !along(point, &d.stop, &d.class)? {
                    return bad("outgoing edge leaves the constant-phase ray");
                }
                self.check_disc(a)?;
                self.check_disc(b)?;
            }
            DiscNode::Junction { point, .. } => {
                if !along(point, &d.stop, &d.class)? {
                    return bad("junction edge leaves the constant-phase ray");
                }
            }
        }
        Ok(())
    }
}

fn precheck(base: &SingularBase, u: &Point, gamma: &RelativeClass, lambda: &Rat) -> Result<GaussianRational, TropicalError> {
    if gamma.rank() != base.rank() || !gamma.is_nonnegative() || gamma.is_zero() {
        return Err(TropicalError::Malformed(format!("class {gamma} is not a nonzero nonnegative thimble combination")));
    }
    let z = base.charge().charge(gamma, u);
    if z.is_zero() {
        return Err(TropicalError::ZeroCharge(gamma.clone()));
    }
    if z.norm_sqr() >= lambda * lambda {
        return Err(TropicalError::AboveCutoff(gamma.clone()));
    }
    Ok(z)
}

pub fn enumerate_discs_with<R: LocalRule>(
    rule: &R,
    base: &SingularBase,
    u: &Point,
    gamma: &RelativeClass,
    lambda: &Rat,
) -> Result<Vec<TropicalDisc<R::W>>, TropicalError> {
    let zeta = precheck(base, u, gamma, lambda)?;
    let solver = PhaseSolver::new(base, rule, &zeta);
    solver.omega_at(gamma, u)?;
    Ok(solver.discs(gamma, u)?.iter().map(|d| (**d).clone()).collect())
}

pub fn omega_trop_with<R: LocalRule>(rule: &R, base: &SingularBase, u: &Point, gamma: &RelativeClass, lambda: &Rat) -> Result<R::W, TropicalError> {
    let zeta = precheck(base, u, gamma, lambda)?;
    PhaseSolver::new(base, rule, &zeta).omega_at(gamma, u)
}

/// Discs with stop u and class gamma at phase Z_gamma(u).
pub fn enumerate_discs(base: &SingularBase, u: &Point, gamma: &RelativeClass, lambda: &Rat) -> Result<Vec<TropicalDisc>, TropicalError> {
    enumerate_discs_with(&ClassicalRule, base, u, gamma, lambda)
}

/// Sum of disc weights.
pub fn omega_trop(base: &SingularBase, u: &Point, gamma: &RelativeClass, lambda: &Rat) -> Result<Rat, TropicalError> {
    omega_trop_with(&ClassicalRule, base, u, gamma, lambda)
}

/// Omega-tilde(gamma; u) read from the completed scattering diagram at the phase of Z_gamma(u).
pub fn omega_from_scattering(base: &SingularBase, u: &Point, gamma: &RelativeClass) -> Result<Rat, TropicalError> {
    let zeta = base.charge().charge(gamma, u);
    if zeta.is_zero() {
        return Err(TropicalError::ZeroCharge(gamma.clone()));
    }
    let e = zeta.norm_sqr();
    let cutoff = &e + &e / int(8) + int(1) / int(8);
    // |Z'| = |zeta|^2 at u; anything above works
    let d = base.diagram_at_phase(&zeta, cutoff)?.complete()?;
    let (p, m) = gamma.primitive().expect("nonzero");
    let ctx = d.context_at(u)?;
    let mut slab = SlabFunction::trivial(&ctx, p.clone())?;
    for w in d.walls() {
        if w.class == p && w.passes_through(u) {
            slab = slab.mul(&SlabFunction::from_coefficients(&ctx, p.clone(), &w.slab)?)?;
        }
    }
    Ok(counts_from_slab(&slab)?.get(&m).cloned().unwrap_or_else(<Rat as Coefficient>::zero))
}

/// Theta_S(u): phase-ordered product of the walls built from the disc counts of every class
/// with Z_gamma(u) in the sector and |Z_gamma(u)| < lambda, in the charge context at u.
pub fn sector_product(base: &SingularBase, u: &Point, sector: &crate::lattice::Sector, lambda: &Rat) -> Result<crate::wallcross::Automorphism, TropicalError> {
    use crate::wallcross::{ElementaryTransform, Factor, OrderedProduct};
    let ctx = Arc::new(SeriesContext::at_point(base.lattice().clone(), base.charge(), u, lambda.clone())?);
    let mut counts: BTreeMap<RelativeClass, BTreeMap<u64, Rat>> = BTreeMap::new();
    for g in base.classes_below(u, lambda)? {
        if !sector.contains(&base.charge().charge(&g, u)) {
            continue;
        }
        let w = omega_trop(base, u, &g, lambda)?;
        if !w.is_zero() {
            let (p, m) = g.primitive().expect("nonzero");
            counts.entry(p).or_default().insert(m, w);
        }
    }
    let mut factors = Vec::new();
    for (p, c) in counts {
        let key = base.charge().charge(&p, u);
        factors.push(Factor { key, transform: ElementaryTransform::new(slab_from_counts(&ctx, &c, &p)?) });
    }
    Ok(OrderedProduct::with_keys(sector.clone(), factors)?.evaluate(&ctx)?)
}
