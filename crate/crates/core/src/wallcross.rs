//! Elementary wall-crossing transforms, ordered products and KS factorization.

use std::collections::{BTreeMap, HashMap};
use std::sync::Arc;

use num_traits::Zero;
use thiserror::Error;

use crate::lattice::{int, GaussianRational, LatticeError, Rat, RelativeClass, Sector};
use crate::series::{counts_from_slab, multiple_of, rational_series_to_table, SeriesContext, SeriesError, SlabFunction, TruncatedSeries};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum WallCrossError {
    #[error(transparent)]
    Series(#[from] SeriesError),
    #[error(transparent)]
    Lattice(#[from] LatticeError),
    #[error("charge of {0} lies outside the sector")]
    OutsideSector(RelativeClass),
    #[error("classes {0} and {1} have equal phase but do not commute")]
    NonCommutingEqualPhase(RelativeClass, RelativeClass),
    #[error("residual at class {0} has no admissible ray")]
    NoAdmissibleRay(RelativeClass),
    #[error("class {0} has zero boundary and cannot carry a wall")]
    ZeroBoundary(RelativeClass),
    #[error("residual at class {0} is inconsistent with a single elementary transform")]
    Inconsistent(RelativeClass),
    #[error("factorization did not converge")]
    NoProgress,
}

/// theta_g: z^{g'} -> z^{g'} f^{<g', g>} (sign per lattice convention).
#[derive(Debug, Clone, PartialEq)]
pub struct ElementaryTransform {
    slab: SlabFunction,
}

impl ElementaryTransform {
    pub fn new(slab: SlabFunction) -> Self {
        ElementaryTransform { slab }
    }

    pub fn direction(&self) -> &RelativeClass {
        self.slab.direction()
    }

    pub fn slab(&self) -> &SlabFunction {
        &self.slab
    }

    pub fn ctx(&self) -> &Arc<SeriesContext> {
        self.slab.ctx()
    }

    pub fn inverse(&self) -> Result<Self, WallCrossError> {
        Ok(ElementaryTransform { slab: self.slab.inverse()? })
    }

    fn exponent(&self, m: [i64; 2]) -> i64 {
        self.ctx().lattice().transform_exponent_vec(m, self.direction())
    }

    pub fn apply(&self, s: &TruncatedSeries) -> Result<TruncatedSeries, WallCrossError> {
        if s.ctx() != self.ctx() {
            return Err(SeriesError::ContextMismatch.into());
        }
        let lat = self.ctx().lattice().clone();
        let mut groups: BTreeMap<i64, TruncatedSeries> = BTreeMap::new();
        for (g, c) in s.terms() {
            let e = self.exponent(lat.boundary(g));
            groups.entry(e).or_insert_with(|| TruncatedSeries::zero(s.ctx())).add_term(g.clone(), c.clone());
        }
        let mut out = TruncatedSeries::zero(s.ctx());
        for (e, part) in groups {
            let p = if e == 0 { part } else { part.mul(&self.slab.series().pow_int(e)?)? };
            out = out.add(&p)?;
        }
        Ok(out)
    }

    pub fn to_automorphism(&self) -> Result<Automorphism, WallCrossError> {
        let f = self.slab.series();
        let h1 = f.pow_int(self.exponent([1, 0]))?;
        let h2 = f.pow_int(self.exponent([0, 1]))?;
        Ok(Automorphism { ctx: self.ctx().clone(), images: [h1, h2] })
    }
}

/// Automorphism acting through the boundary map, stored as F(z^{e_j}) = z^{e_j} h_j.
#[derive(Debug, Clone, PartialEq)]
pub struct Automorphism {
    ctx: Arc<SeriesContext>,
    images: [TruncatedSeries; 2],
}

impl Automorphism {
    pub fn identity(ctx: &Arc<SeriesContext>) -> Self {
        Automorphism { ctx: ctx.clone(), images: [TruncatedSeries::one(ctx), TruncatedSeries::one(ctx)] }
    }

    /// From the relative images h_1, h_2 (constant term 1).
    pub fn from_images(h1: TruncatedSeries, h2: TruncatedSeries) -> Result<Self, WallCrossError> {
        if h1.ctx() != h2.ctx() {
            return Err(SeriesError::ContextMismatch.into());
        }
        for h in [&h1, &h2] {
            if !h.constant_term().eq(&int(1)) {
                return Err(SeriesError::WrongConstantTerm { expected: "1" }.into());
            }
        }
        Ok(Automorphism { ctx: h1.ctx().clone(), images: [h1, h2] })
    }

    pub fn ctx(&self) -> &Arc<SeriesContext> {
        &self.ctx
    }

    pub fn images(&self) -> &[TruncatedSeries; 2] {
        &self.images
    }

    pub fn is_identity(&self) -> bool {
        self.images.iter().all(|h| h.len() == 1 && h.constant_term() == int(1))
    }

    fn twist(&self, m: [i64; 2], cache: &mut HashMap<[i64; 2], TruncatedSeries>) -> Result<TruncatedSeries, WallCrossError> {
        if let Some(t) = cache.get(&m) {
            return Ok(t.clone());
        }
        let t = self.images[0].pow_int(m[0])?.mul(&self.images[1].pow_int(m[1])?)?;
        cache.insert(m, t.clone());
        Ok(t)
    }

    pub fn apply(&self, s: &TruncatedSeries) -> Result<TruncatedSeries, WallCrossError> {
        if s.ctx() != &self.ctx {
            return Err(SeriesError::ContextMismatch.into());
        }
        let lat = self.ctx.lattice().clone();
        let mut groups: BTreeMap<[i64; 2], TruncatedSeries> = BTreeMap::new();
        for (g, c) in s.terms() {
            groups.entry(lat.boundary(g)).or_insert_with(|| TruncatedSeries::zero(s.ctx())).add_term(g.clone(), c.clone());
        }
        let mut cache = HashMap::new();
        let mut out = TruncatedSeries::zero(s.ctx());
        for (m, part) in groups {
            let p = if m == [0, 0] { part } else { part.mul(&self.twist(m, &mut cache)?)? };
            out = out.add(&p)?;
        }
        Ok(out)
    }

    /// (self o other)(z) = self(other(z)).
    pub fn compose(&self, other: &Automorphism) -> Result<Automorphism, WallCrossError> {
        if self.ctx != other.ctx {
            return Err(SeriesError::ContextMismatch.into());
        }
        let mut imgs = Vec::with_capacity(2);
        for j in 0..2 {
            imgs.push(self.images[j].mul(&self.apply(&other.images[j])?)?);
        }
        let h2 = imgs.pop().unwrap();
        let h1 = imgs.pop().unwrap();
        Ok(Automorphism { ctx: self.ctx.clone(), images: [h1, h2] })
    }

    /// Solve self(s) = t order by order.
    pub fn solve(&self, t: &TruncatedSeries) -> Result<TruncatedSeries, WallCrossError> {
        let mut s = t.clone();
        for _ in 0..=(t.len() + self.ctx.rank() * 64 + 64) {
            let r = t.sub(&self.apply(&s)?)?;
            if r.is_zero() {
                return Ok(s);
            }
            s = s.add(&r)?;
        }
        Err(WallCrossError::NoProgress)
    }

    pub fn inverse(&self) -> Result<Automorphism, WallCrossError> {
        let mut imgs = Vec::with_capacity(2);
        for j in 0..2 {
            imgs.push(self.solve(&self.images[j].inverse()?)?);
        }
        let h2 = imgs.pop().unwrap();
        let h1 = imgs.pop().unwrap();
        Ok(Automorphism { ctx: self.ctx.clone(), images: [h1, h2] })
    }

    /// Parallel transport: re-base the charge context, coefficients unchanged.
    pub fn transport(&self, dz: &[GaussianRational]) -> Result<Automorphism, WallCrossError> {
        let ctx = Arc::new(self.ctx.transported(dz)?);
        Ok(self.recontext(&ctx))
    }

    pub fn recontext(&self, ctx: &Arc<SeriesContext>) -> Automorphism {
        Automorphism { ctx: ctx.clone(), images: [self.images[0].recontext(ctx), self.images[1].recontext(ctx)] }
    }

    /// Two series tables: the relative images of z^{e1} and z^{e2}.
    pub fn to_tables(&self) -> String {
        format!("# image of z^e1\n{}# image of z^e2\n{}", rational_series_to_table(&self.images[0]), rational_series_to_table(&self.images[1]))
    }
}

/// z_k d/dz_k log h, as a series.
fn log_derivative(h: &TruncatedSeries, k: usize) -> Result<TruncatedSeries, WallCrossError> {
    let lat = h.ctx().lattice().clone();
    let mut d = TruncatedSeries::zero(h.ctx());
    for (g, c) in h.terms() {
        let m = lat.boundary(g)[k];
        if m != 0 {
            d.add_term(g.clone(), c * int(m));
        }
    }
    Ok(d.mul(&h.inverse()?)?)
}

/// dlog F(z1) ^ dlog F(z2) = dlog z1 ^ dlog z2.
pub fn check_symplectic(a: &Automorphism) -> Result<bool, WallCrossError> {
    let [h1, h2] = a.images();
    let ctx = a.ctx();
    let one = TruncatedSeries::one(ctx);
    let d11 = log_derivative(h1, 0)?;
    let d12 = log_derivative(h1, 1)?;
    let d21 = log_derivative(h2, 0)?;
    let d22 = log_derivative(h2, 1)?;
    let lhs = one.add(&d11)?.mul(&one.add(&d22)?)?.sub(&d12.mul(&d21)?)?;
    Ok(lhs == one)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Factor {
    pub key: GaussianRational,
    pub transform: ElementaryTransform,
}

/// Phase-ordered product: the largest phase is leftmost, the smallest is applied first.
#[derive(Debug, Clone, PartialEq)]
pub struct OrderedProduct {
    sector: Sector,
    factors: Vec<Factor>,
}

impl OrderedProduct {
    /// Keys are the central charges Z_g at the context's base point.
    pub fn by_charge(sector: Sector, transforms: Vec<ElementaryTransform>) -> Result<Self, WallCrossError> {
        let factors = transforms.into_iter().map(|t| Factor { key: t.ctx().charge_of(t.direction()), transform: t }).collect();
        Self::with_keys(sector, factors)
    }

    /// Explicit additive ordering keys (e.g. charge gradients at a scattering vertex).
    pub fn with_keys(sector: Sector, mut factors: Vec<Factor>) -> Result<Self, WallCrossError> {
        for f in &factors {
            if !sector.contains(&f.key) {
                return Err(WallCrossError::OutsideSector(f.transform.direction().clone()));
            }
        }
        factors.sort_by(|a, b| {
            sector
                .angle_cmp(&a.key, &b.key)
                .then_with(|| a.key.norm_sqr().cmp(&b.key.norm_sqr()))
                .then_with(|| a.transform.direction().cmp(b.transform.direction()))
        });
        for w in factors.windows(2) {
            if sector.angle_cmp(&w[0].key, &w[1].key).is_eq() {
                let lat = w[0].transform.ctx().lattice();
                if lat.pairing(w[0].transform.direction(), w[1].transform.direction())? != 0 {
                    return Err(WallCrossError::NonCommutingEqualPhase(
                        w[0].transform.direction().clone(),
                        w[1].transform.direction().clone(),
                    ));
                }
            }
        }
        Ok(OrderedProduct { sector, factors })
    }

    pub fn sector(&self) -> &Sector {
        &self.sector
    }

    /// Factors in increasing phase.
    pub fn factors(&self) -> &[Factor] {
        &self.factors
    }

    pub fn slab(&self, direction: &RelativeClass) -> Option<&SlabFunction> {
        self.factors.iter().find(|f| f.transform.direction() == direction).map(|f| f.transform.slab())
    }

    pub fn evaluate(&self, ctx: &Arc<SeriesContext>) -> Result<Automorphism, WallCrossError> {
        let mut r = Automorphism::identity(ctx);
        for f in &self.factors {
            r = f.transform.to_automorphism()?.compose(&r)?;
        }
        Ok(r)
    }

    /// Omega-tilde of `g` read off the slab of its primitive direction (0 if absent).
    pub fn omega(&self, g: &RelativeClass) -> Result<Rat, WallCrossError> {
        let (p, d) = match g.primitive() {
            Some(x) => x,
            None => return Ok(Rat::zero()),
        };
        match self.slab(&p) {
            None => Ok(Rat::zero()),
            Some(s) => Ok(counts_from_slab(s)?.get(&d).cloned().unwrap_or_else(Rat::zero)),
        }
    }
}

/// Phase-ordered factorization, keyed by the central charge.
pub fn factorize(a: &Automorphism, sector: &Sector, rays: &[RelativeClass]) -> Result<OrderedProduct, WallCrossError> {
    let ctx = a.ctx().clone();
    factorize_with_keys(a, sector, rays, |g| ctx.charge_of(g))
}

/// Unique ordered product of elementary transforms equal to `a`, peeling levels of an additive positive functional.
pub fn factorize_with_keys(
    a: &Automorphism,
    sector: &Sector,
    rays: &[RelativeClass],
    key: impl Fn(&RelativeClass) -> GaussianRational,
) -> Result<OrderedProduct, WallCrossError> {
    let ctx = a.ctx().clone();
    let lat = ctx.lattice().clone();
    let mut slabs: BTreeMap<RelativeClass, TruncatedSeries> = BTreeMap::new();
    for r in rays {
        let p = r.primitive().ok_or_else(|| WallCrossError::ZeroBoundary(r.clone()))?.0;
        if !sector.contains(&key(&p)) {
            return Err(WallCrossError::OutsideSector(p));
        }
        slabs.entry(p).or_insert_with(|| TruncatedSeries::one(&ctx));
    }
    let build = |slabs: &BTreeMap<RelativeClass, TruncatedSeries>| -> Result<OrderedProduct, WallCrossError> {
        let mut factors = Vec::with_capacity(slabs.len());
        for (p, s) in slabs {
            factors.push(Factor { key: key(p), transform: ElementaryTransform::new(SlabFunction::new(p.clone(), s.clone())?) });
        }
        OrderedProduct::with_keys(sector.clone(), factors)
    };
    let mut last_level: Option<Rat> = None;
    loop {
        let prod = build(&slabs)?;
        let p = prod.evaluate(&ctx)?;
        let d = [a.images()[0].sub(&p.images()[0])?, a.images()[1].sub(&p.images()[1])?];
        if d[0].is_zero() && d[1].is_zero() {
            return Ok(prod);
        }
        let level = d
            .iter()
            .flat_map(|s| s.terms().keys())
            .map(|g| sector.functional(&key(g)))
            .min()
            .expect("nonzero residual");
        if let Some(l) = &last_level {
            if level <= *l {
                return Err(WallCrossError::NoProgress);
            }
        }
        let mut at_level: Vec<RelativeClass> =
            d.iter().flat_map(|s| s.terms().keys()).filter(|g| sector.functional(&key(g)) == level).cloned().collect();
        at_level.sort();
        at_level.dedup();
        for g in at_level {
            let (p, _) = g.primitive().ok_or_else(|| WallCrossError::NoAdmissibleRay(g.clone()))?;
            if !slabs.contains_key(&p) {
                return Err(WallCrossError::NoAdmissibleRay(g));
            }
            let e = [lat.transform_exponent_vec([1, 0], &p), lat.transform_exponent_vec([0, 1], &p)];
            let j = if e[0] != 0 {
                0
            } else if e[1] != 0 {
                1
            } else {
                return Err(WallCrossError::ZeroBoundary(g));
            };
            let c = d[j].coefficient(&g) / int(e[j]);
            let other = 1 - j;
            if d[other].coefficient(&g) != &c * int(e[other]) {
                return Err(WallCrossError::Inconsistent(g));
            }
            slabs.get_mut(&p).unwrap().add_term(g, c);
        }
        last_level = Some(level);
    }
}

/// Omega-tilde(g; u+) - Omega-tilde(g; u-).
pub fn jump(before: &OrderedProduct, after: &OrderedProduct, g: &RelativeClass) -> Result<Rat, WallCrossError> {
    Ok(after.omega(g)? - before.omega(g)?)
}

/// Generator h with exp(ad h) = theta under {z^a, z^b} = <a,b> z^{a+b}.
pub fn to_dilog_generator(theta: &ElementaryTransform) -> Result<TruncatedSeries, WallCrossError> {
    let ctx = theta.ctx();
    let s = ctx.lattice().convention().sign();
    let l = theta.slab().series().log()?;
    let mut h = TruncatedSeries::zero(ctx);
    for (g, c) in l.terms() {
        let k = multiple_of(g, theta.direction()).ok_or_else(|| SeriesError::MalformedSupport(g.clone()))?;
        h.add_term(g.clone(), -c * int(s) / int(k as i64));
    }
    Ok(h)
}

/// Inverse of `to_dilog_generator`.
pub fn from_dilog_generator(direction: &RelativeClass, h: &TruncatedSeries) -> Result<ElementaryTransform, WallCrossError> {
    let ctx = h.ctx();
    let s = ctx.lattice().convention().sign();
    let mut l = TruncatedSeries::zero(ctx);
    for (g, c) in h.terms() {
        let k = multiple_of(g, direction).ok_or_else(|| SeriesError::MalformedSupport(g.clone()))?;
        l.add_term(g.clone(), -c * int(s) * int(k as i64));
    }
    Ok(ElementaryTransform::new(SlabFunction::new(direction.clone(), l.exp()?)?))
}

/// (1/d) Li_2(c z^g) = sum_k c^k z^{k g} / (d k^2).
pub fn dilog_series(ctx: &Arc<SeriesContext>, g: &RelativeClass, c: i64, d: u64) -> TruncatedSeries {
    let mut s = TruncatedSeries::zero(ctx);
    let mut k = 1i64;
    while ctx.admits(&g.scale(k)) {
        s.add_term(g.scale(k), int(c.pow(k as u32)) / int(k * k * d as i64));
        k += 1;
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::{rat, ChargeLattice, SignConvention};

    fn ctx(cut: Rat, conv: SignConvention) -> Arc<SeriesContext> {
        let lat = Arc::new(ChargeLattice::standard().with_convention(conv));
        Arc::new(SeriesContext::new(lat, vec![GaussianRational::one(), GaussianRational::one()], cut).unwrap())
    }

    fn theta(ctx: &Arc<SeriesContext>, g: [i64; 2]) -> ElementaryTransform {
        let g = RelativeClass::new(g);
        let f = TruncatedSeries::one(ctx).add(&TruncatedSeries::monomial(ctx, g.clone(), int(1))).unwrap();
        ElementaryTransform::new(SlabFunction::new(g, f).unwrap())
    }

    #[test]
    fn focus_focus_sign() {
        // Crossing the thimble ray g_e with boundary (1,0): z2 -> z2 (1 + z1)^{-1}, z1 fixed.
        let c = ctx(rat(9, 2), SignConvention::Plus);
        let t = theta(&c, [1, 0]);
        let z2 = TruncatedSeries::monomial(&c, RelativeClass::new([0, 1]), int(1));
        let img = t.apply(&z2).unwrap();
        for k in 0..=3i64 {
            let s = if k % 2 == 0 { 1 } else { -1 };
            assert_eq!(img.coefficient(&RelativeClass::new([k, 1])), int(s));
        }
        let z1 = TruncatedSeries::monomial(&c, RelativeClass::new([1, 0]), int(1));
        assert_eq!(t.apply(&z1).unwrap(), z1);
        let m = ctx(rat(9, 2), SignConvention::Minus);
        let img = theta(&m, [1, 0]).apply(&TruncatedSeries::monomial(&m, RelativeClass::new([0, 1]), int(1))).unwrap();
        assert_eq!(img.coefficient(&RelativeClass::new([1, 1])), int(1));
        assert_eq!(img.coefficient(&RelativeClass::new([2, 1])), int(0));
    }

    #[test]
    fn apply_example_from_thimble_y() {
        let c = ctx(rat(9, 2), SignConvention::Minus);
        let t = theta(&c, [0, 1]);
        let z = TruncatedSeries::monomial(&c, RelativeClass::new([1, 0]), int(1));
        let img = t.apply(&z).unwrap();
        for k in 0..=3i64 {
            let s = if k % 2 == 0 { 1 } else { -1 };
            assert_eq!(img.coefficient(&RelativeClass::new([1, k])), int(s));
        }
    }

    #[test]
    fn pentagon_and_inverse() {
        for order in [4i64, 8, 12] {
            let c = ctx(int(order) + rat(1, 2), SignConvention::Plus);
            let a = theta(&c, [0, 1]).to_automorphism().unwrap();
            let b = theta(&c, [1, 0]).to_automorphism().unwrap();
            let ab = theta(&c, [1, 1]).to_automorphism().unwrap();
            // with <g1, g2> = det((0,1),(1,0)) = -1 the written form holds
            let lhs = a.compose(&b).unwrap();
            let rhs = b.compose(&ab).unwrap().compose(&a).unwrap();
            assert_eq!(lhs, rhs, "order {order}");
            let inv = a.inverse().unwrap();
            assert!(a.compose(&inv).unwrap().is_identity());
        }
    }

    #[test]
    fn factorize_pentagon() {
        let c = ctx(rat(13, 2), SignConvention::Plus);
        let sector = Sector::closed(GaussianRational::from_ints(1, -1), GaussianRational::from_ints(1, 1)).unwrap();
        let t1 = theta(&c, [1, 0]).to_automorphism().unwrap();
        let t2 = theta(&c, [0, 1]).to_automorphism().unwrap();
        let a = t2.compose(&t1).unwrap();
        // keys: x above the real axis, y below, so x is the larger phase
        let key = |g: &RelativeClass| GaussianRational::from_ints(g.coords()[0] + g.coords()[1], g.coords()[0] - g.coords()[1]);
        let rays = [RelativeClass::new([1, 0]), RelativeClass::new([0, 1]), RelativeClass::new([1, 1]), RelativeClass::new([1, 2])];
        let p = factorize_with_keys(&a, &sector, &rays, key).unwrap();
        assert_eq!(p.evaluate(&c).unwrap(), a);
        let lin = |g: [i64; 2]| p.slab(&RelativeClass::new(g)).unwrap().coefficients();
        assert_eq!(lin([1, 1]), BTreeMap::from([(1, int(1))]));
        assert_eq!(lin([1, 0]), BTreeMap::from([(1, int(1))]));
        assert!(lin([1, 2]).is_empty());
        let id = factorize_with_keys(&Automorphism::identity(&c), &sector, &rays, key).unwrap();
        assert!(id.factors().iter().all(|f| f.transform.slab().is_trivial()));
        let missing = factorize_with_keys(&a, &sector, &rays[..2], key);
        assert_eq!(missing.unwrap_err(), WallCrossError::NoAdmissibleRay(RelativeClass::new([1, 1])));
    }

    #[test]
    fn symplectic_checks() {
        let c = ctx(rat(17, 2), SignConvention::Plus);
        assert!(check_symplectic(&Automorphism::identity(&c)).unwrap());
        assert!(check_symplectic(&theta(&c, [1, 2]).to_automorphism().unwrap()).unwrap());
        let z1 = RelativeClass::new([1, 0]);
        let bad = TruncatedSeries::one(&c).add(&TruncatedSeries::monomial(&c, z1, int(1))).unwrap();
        let a = Automorphism::from_images(bad, TruncatedSeries::one(&c)).unwrap();
        assert!(!check_symplectic(&a).unwrap());
    }

    #[test]
    fn dilog_generator_of_thimble() {
        let c = ctx(rat(17, 2), SignConvention::Plus);
        let t = theta(&c, [1, 0]);
        let h = to_dilog_generator(&t).unwrap();
        assert_eq!(h, dilog_series(&c, &RelativeClass::new([1, 0]), -1, 1));
        assert_eq!(from_dilog_generator(&RelativeClass::new([1, 0]), &h).unwrap(), t);
        let triv = ElementaryTransform::new(SlabFunction::trivial(&c, RelativeClass::new([1, 0])).unwrap());
        assert!(to_dilog_generator(&triv).unwrap().is_zero());
    }

    #[test]
    fn transport_round_trip() {
        let c = ctx(rat(9, 2), SignConvention::Plus);
        let a = theta(&c, [1, 1]).to_automorphism().unwrap();
        let zero = vec![GaussianRational::zero(); 2];
        assert_eq!(a.transport(&zero).unwrap(), a);
        let dz = vec![GaussianRational::new(rat(1, 3), rat(-1, 5)), GaussianRational::new(rat(-1, 7), int(0))];
        let back: Vec<_> = dz.iter().map(|z| -z).collect();
        assert_eq!(a.transport(&dz).unwrap().transport(&back).unwrap(), a);
    }

    #[test]
    fn jump_examples() {
        let c = ctx(rat(13, 2), SignConvention::Plus);
        let sector = Sector::closed(GaussianRational::from_ints(1, -1), GaussianRational::from_ints(1, 1)).unwrap();
        let key = |g: &RelativeClass| GaussianRational::from_ints(g.coords()[0] + g.coords()[1], g.coords()[0] - g.coords()[1]);
        let f = |g: [i64; 2]| Factor { key: key(&RelativeClass::new(g)), transform: theta(&c, g) };
        let before = OrderedProduct::with_keys(sector.clone(), vec![f([1, 0]), f([0, 1])]).unwrap();
        let after = OrderedProduct::with_keys(sector.clone(), vec![f([1, 0]), f([1, 1]), f([0, 1])]).unwrap();
        assert_eq!(jump(&before, &before, &RelativeClass::new([1, 1])).unwrap(), int(0));
        assert_eq!(jump(&before, &after, &RelativeClass::new([1, 1])).unwrap(), int(1));
        assert_eq!(jump(&before, &after, &RelativeClass::new([2, 1])).unwrap(), int(0));
    }

    #[test]
    fn equal_phase_noncommuting_rejected() {
        let c = ctx(rat(9, 2), SignConvention::Plus);
        let sector = Sector::closed(GaussianRational::from_ints(1, -1), GaussianRational::from_ints(1, 1)).unwrap();
        let k = GaussianRational::one();
        let r = OrderedProduct::with_keys(
            sector,
            vec![Factor { key: k.clone(), transform: theta(&c, [1, 0]) }, Factor { key: k, transform: theta(&c, [0, 1]) }],
        );
        assert!(matches!(r, Err(WallCrossError::NonCommutingEqualPhase(..))));
    }
}
