//! q-deformed counts: Laurent polynomials in q^{1/2}, their fraction field, quantum torus
//! products, quantum dilogarithm transforms and refined disc weights.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use thiserror::Error;

use crate::lattice::{int, GaussianRational, LatticeError, Point, Rat, RelativeClass, Sector};
use crate::scattering::{enclosing_sector, monoid_primitives};
use crate::series::{Coefficient, SeriesContext, SeriesError, TruncatedSeries};
use crate::tropical::{enumerate_discs_with, omega_trop_with, LocalRule, SingularBase, TropicalDisc, TropicalError};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RefinedError {
    #[error(transparent)]
    Series(#[from] SeriesError),
    #[error(transparent)]
    Lattice(#[from] LatticeError),
    #[error(transparent)]
    Tropical(#[from] TropicalError),
    #[error("q-integer of a non-positive number")]
    NonPositive,
    #[error("pole at q = 1")]
    Pole,
    #[error("division by zero")]
    DivisionByZero,
    #[error("class {0} has no admissible ray")]
    NoAdmissibleRay(RelativeClass),
    #[error("class {0} has zero boundary")]
    ZeroBoundary(RelativeClass),
    #[error("inconsistent discrepancy at {0}")]
    Inconsistent(RelativeClass),
    #[error("factorization made no progress")]
    NoProgress,
    #[error("keys do not fit in a half-plane")]
    Sector,
}

/// Laurent polynomial in s = q^{1/2}: key n means q^{n/2}.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default)]
pub struct QLaurent(BTreeMap<i64, Rat>);

impl QLaurent {
    pub fn from_terms(terms: impl IntoIterator<Item = (i64, Rat)>) -> Self {
        let mut m = BTreeMap::new();
        for (k, c) in terms {
            let e: &mut Rat = m.entry(k).or_insert_with(Rat::zero);
            *e += c;
        }
        m.retain(|_, c: &mut Rat| !c.is_zero());
        QLaurent(m)
    }

    pub fn constant(c: Rat) -> Self {
        Self::from_terms([(0, c)])
    }

    /// c q^{half/2}.
    pub fn monomial(half: i64, c: Rat) -> Self {
        Self::from_terms([(half, c)])
    }

    pub fn terms(&self) -> &BTreeMap<i64, Rat> {
        &self.0
    }

    pub fn at_one(&self) -> Rat {
        self.0.values().fold(Rat::zero(), |a, b| a + b)
    }

    /// q -> q^{-1}.
    pub fn bar(&self) -> Self {
        QLaurent(self.0.iter().map(|(k, c)| (-k, c.clone())).collect())
    }

    pub fn shift(&self, half: i64) -> Self {
        QLaurent(self.0.iter().map(|(k, c)| (k + half, c.clone())).collect())
    }

    fn lowest(&self) -> Option<i64> {
        self.0.keys().next().copied()
    }

    /// Coefficient vector in s after removing the lowest power.
    fn to_poly(&self) -> (i64, Vec<Rat>) {
        let Some(lo) = self.lowest() else { return (0, vec![]) };
        let hi = *self.0.keys().next_back().unwrap();
        let mut v = vec![Rat::zero(); (hi - lo + 1) as usize];
        for (k, c) in &self.0 {
            v[(k - lo) as usize] = c.clone();
        }
        (lo, v)
    }

    fn from_poly(shift: i64, p: &[Rat]) -> Self {
        Self::from_terms(p.iter().enumerate().map(|(i, c)| (i as i64 + shift, c.clone())))
    }
}

impl fmt::Display for QLaurent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.is_empty() {
            return write!(f, "0:0");
        }
        let parts: Vec<String> = self
            .0
            .iter()
            .map(|(k, c)| {
                let e = if k % 2 == 0 { (k / 2).to_string() } else { format!("{k}/2") };
                format!("{e}:{c}")
            })
            .collect();
        write!(f, "{}", parts.join(" "))
    }
}

impl Coefficient for QLaurent {
    fn zero() -> Self {
        QLaurent(BTreeMap::new())
    }
    fn one() -> Self {
        Self::constant(Rat::one())
    }
    fn is_zero(&self) -> bool {
        self.0.is_empty()
    }
    fn add(&self, o: &Self) -> Self {
        Self::from_terms(self.0.iter().chain(o.0.iter()).map(|(k, c)| (*k, c.clone())))
    }
    fn mul(&self, o: &Self) -> Self {
        let mut m: BTreeMap<i64, Rat> = BTreeMap::new();
        for (a, ca) in &self.0 {
            for (b, cb) in &o.0 {
                *m.entry(a + b).or_insert_with(Rat::zero) += ca * cb;
            }
        }
        m.retain(|_, c| !c.is_zero());
        QLaurent(m)
    }
    fn neg(&self) -> Self {
        QLaurent(self.0.iter().map(|(k, c)| (*k, -c)).collect())
    }
    fn scale(&self, r: &Rat) -> Self {
        if r.is_zero() {
            return Self::zero();
        }
        QLaurent(self.0.iter().map(|(k, c)| (*k, c * r)).collect())
    }
    fn from_rat(r: Rat) -> Self {
        Self::constant(r)
    }
}

/// [n]_q = (q^{n/2} - q^{-n/2}) / (q^{1/2} - q^{-1/2}) for n >= 1.
pub fn q_int(n: i64) -> Result<QLaurent, RefinedError> {
    if n <= 0 {
        return Err(RefinedError::NonPositive);
    }
    Ok(q_int_signed(n))
}

/// [m]_q for any integer m, with [-m] = -[m] and [0] = 0.
pub fn q_int_signed(m: i64) -> QLaurent {
    let n = m.abs();
    let s = if m < 0 { -1 } else { 1 };
    QLaurent::from_terms((0..n).map(|j| (n - 1 - 2 * j, int(s))))
}

fn poly_trim(p: &mut Vec<Rat>) {
    while p.last().is_some_and(|c| c.is_zero()) {
        p.pop();
    }
}

fn poly_divrem(a: &[Rat], b: &[Rat]) -> (Vec<Rat>, Vec<Rat>) {
    let mut r = a.to_vec();
    poly_trim(&mut r);
    let db = b.len() - 1;
    let lead = b[db].clone();
    if r.len() < b.len() {
        return (vec![], r);
    }
    let mut q = vec![Rat::zero(); r.len() - db];
    while r.len() > db && !r.is_empty() {
        let k = r.len() - 1 - db;
        let c = &r[r.len() - 1] / &lead;
        for (i, bc) in b.iter().enumerate() {
            let t = &r[k + i] - &c * bc;
            r[k + i] = t;
        }
        q[k] = c;
        poly_trim(&mut r);
    }
    (q, r)
}

fn poly_gcd(a: &[Rat], b: &[Rat]) -> Vec<Rat> {
    let (mut x, mut y) = (a.to_vec(), b.to_vec());
    poly_trim(&mut x);
    poly_trim(&mut y);
    while !y.is_empty() {
        let (_, r) = poly_divrem(&x, &y);
        x = y;
        y = r;
    }
    if let Some(l) = x.last().cloned() {
        for c in x.iter_mut() {
            *c = &*c / &l;
        }
    }
    x
}

/// num / den over Q[q^{1/2}, q^{-1/2}], stored in lowest terms with monic den of lowest power 0.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct QFraction {
    num: QLaurent,
    den: QLaurent,
}

impl QFraction {
    pub fn new(num: QLaurent, den: QLaurent) -> Result<Self, RefinedError> {
        if den.0.is_empty() {
            return Err(RefinedError::DivisionByZero);
        }
        Ok(Self::normalized(num, den))
    }

    fn normalized(num: QLaurent, den: QLaurent) -> Self {
        if num.0.is_empty() {
            return QFraction { num, den: QLaurent::one() };
        }
        let (sn, pn) = num.to_poly();
        let (sd, pd) = den.to_poly();
        let g = poly_gcd(&pn, &pd);
        let (mut qn, _) = poly_divrem(&pn, &g);
        let (mut qd, _) = poly_divrem(&pd, &g);
        let lead = qd.last().unwrap().clone();
        for c in qn.iter_mut().chain(qd.iter_mut()) {
            *c = &*c / &lead;
        }
        QFraction { num: QLaurent::from_poly(sn - sd, &qn), den: QLaurent::from_poly(0, &qd) }
    }

    pub fn from_laurent(l: QLaurent) -> Self {
        QFraction { num: l, den: QLaurent::one() }.renorm()
    }

    fn renorm(self) -> Self {
        Self::normalized(self.num, self.den)
    }

    pub fn num(&self) -> &QLaurent {
        &self.num
    }

    pub fn den(&self) -> &QLaurent {
        &self.den
    }

    pub fn inv(&self) -> Result<Self, RefinedError> {
        Self::new(self.den.clone(), self.num.clone())
    }

    pub fn div(&self, o: &Self) -> Result<Self, RefinedError> {
        Ok(self.mul(&o.inv()?))
    }

    pub fn at_one(&self) -> Result<Rat, RefinedError> {
        let d = self.den.at_one();
        if d.is_zero() {
            // a removable singularity cannot survive normalization, so this is a genuine pole
            return Err(RefinedError::Pole);
        }
        Ok(self.num.at_one() / d)
    }

    pub fn bar(&self) -> Self {
        Self::normalized(self.num.bar(), self.den.bar())
    }

    /// Multiply by q^{half/2}.
    pub fn q_shift(&self, half: i64) -> Self {
        QFraction { num: self.num.shift(half), den: self.den.clone() }
    }

    /// Laurent polynomial if the denominator is trivial.
    pub fn as_laurent(&self) -> Option<&QLaurent> {
        (self.den == QLaurent::one()).then_some(&self.num)
    }
}

impl fmt::Display for QFraction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.den == QLaurent::one() {
            write!(f, "{}", self.num)
        } else {
            write!(f, "({}) / ({})", self.num, self.den)
        }
    }
}

impl Coefficient for QFraction {
    fn zero() -> Self {
        QFraction { num: QLaurent::zero(), den: QLaurent::one() }
    }
    fn one() -> Self {
        QFraction { num: QLaurent::one(), den: QLaurent::one() }
    }
    fn is_zero(&self) -> bool {
        self.num.0.is_empty()
    }
    fn add(&self, o: &Self) -> Self {
        if self.is_zero() {
            return o.clone();
        }
        if o.is_zero() {
            return self.clone();
        }
        if self.den == o.den {
            return Self::normalized(self.num.add(&o.num), self.den.clone());
        }
        Self::normalized(self.num.mul(&o.den).add(&o.num.mul(&self.den)), self.den.mul(&o.den))
    }
    fn mul(&self, o: &Self) -> Self {
        if self.is_zero() || o.is_zero() {
            return Self::zero();
        }
        if self.den == QLaurent::one() && o.den == QLaurent::one() {
            return QFraction { num: self.num.mul(&o.num), den: QLaurent::one() };
        }
        Self::normalized(self.num.mul(&o.num), self.den.mul(&o.den))
    }
    fn neg(&self) -> Self {
        QFraction { num: self.num.neg(), den: self.den.clone() }
    }
    fn scale(&self, r: &Rat) -> Self {
        QFraction { num: self.num.scale(r), den: self.den.clone() }
    }
    fn from_rat(r: Rat) -> Self {
        QFraction { num: QLaurent::constant(r), den: QLaurent::one() }
    }
}

/// Coefficients that can absorb a power of q^{1/2}.
pub trait QCoefficient: Coefficient {
    fn q_shift(&self, half: i64) -> Self;
}

impl QCoefficient for QLaurent {
    fn q_shift(&self, half: i64) -> Self {
        self.shift(half)
    }
}

impl QCoefficient for QFraction {
    fn q_shift(&self, half: i64) -> Self {
        QFraction::q_shift(self, half)
    }
}

/// Quantum torus product: z^a * z^b = q^{<a,b>/2} z^{a+b}.
pub fn q_mul<C: QCoefficient>(a: &TruncatedSeries<C>, b: &TruncatedSeries<C>) -> Result<TruncatedSeries<C>, RefinedError> {
    if a.ctx() != b.ctx() && **a.ctx() != **b.ctx() {
        return Err(SeriesError::ContextMismatch.into());
    }
    let ctx = a.ctx();
    let lat = ctx.lattice();
    let mut out = TruncatedSeries::zero(ctx);
    for (x, cx) in a.terms() {
        for (y, cy) in b.terms() {
            let g = x + y;
            if ctx.admits(&g) {
                out.add_term(g, cx.mul(cy).q_shift(lat.pairing(x, y)?));
            }
        }
    }
    Ok(out)
}

/// (1/d) Li_2(q^{1/2} z^g; q) = (1/d) sum_k q^{k/2} z^{kg} / (k (1 - q^k)).
pub fn q_dilog(ctx: &Arc<SeriesContext>, g: &RelativeClass, d: u64) -> Result<TruncatedSeries<QFraction>, RefinedError> {
    let mut out = TruncatedSeries::zero(ctx);
    let mut k = 1i64;
    while ctx.admits(&g.scale(k)) {
        let den = QLaurent::from_terms([(0, int(k * d as i64)), (2 * k, int(-k * d as i64))]);
        out.add_term(g.scale(k), QFraction::new(QLaurent::monomial(k, int(1)), den)?);
        k += 1;
        if k > 100_000 {
            return Err(SeriesError::NotNilpotent.into());
        }
    }
    Ok(out)
}

/// Refined wall: z^e -> z^e exp(sum_k Omega_q(k b) [k <e,b>]_q z^{k b}) in normal-ordered form.
#[derive(Debug, Clone, PartialEq)]
pub struct RefinedTransform {
    pub direction: RelativeClass,
    pub counts: BTreeMap<u64, QFraction>,
}

impl RefinedTransform {
    pub fn new(direction: RelativeClass, counts: BTreeMap<u64, QFraction>) -> Result<Self, RefinedError> {
        if !direction.is_primitive() {
            return Err(SeriesError::NonPrimitive(direction).into());
        }
        Ok(RefinedTransform { direction, counts })
    }

    /// Omega_q(k) = (-1)^{k-1} / (k [k]_q).
    pub fn focus_focus(direction: RelativeClass, max_k: u64) -> Result<Self, RefinedError> {
        let counts = (1..=max_k).map(|k| (k, refined_leaf(k))).collect();
        Self::new(direction, counts)
    }

    pub fn inverse(&self) -> Self {
        RefinedTransform { direction: self.direction.clone(), counts: self.counts.iter().map(|(k, c)| (*k, c.neg())).collect() }
    }

    /// Read counts off an Ad-generator h = sum_k h_k z^{k b}: Omega_k = -s (q^{1/2} - q^{-1/2}) h_k.
    pub fn from_generator(direction: RelativeClass, h: &TruncatedSeries<QFraction>) -> Result<Self, RefinedError> {
        let s = h.ctx().lattice().convention().sign();
        let factor = QFraction::from_laurent(QLaurent::from_terms([(1, int(-s)), (-1, int(s))]));
        let mut counts = BTreeMap::new();
        for (g, c) in h.terms() {
            let k = crate::series::multiple_of(g, &direction).ok_or_else(|| RefinedError::Inconsistent(g.clone()))?;
            counts.insert(k, c.mul(&factor));
        }
        Self::new(direction, counts)
    }

    fn factor(&self, ctx: &Arc<SeriesContext>, e: i64) -> Result<TruncatedSeries<QFraction>, RefinedError> {
        let mut l = TruncatedSeries::zero(ctx);
        if e == 0 {
            return Ok(TruncatedSeries::one(ctx));
        }
        for (k, c) in &self.counts {
            l.add_term(self.direction.scale(*k as i64), c.mul(&QFraction::from_laurent(q_int_signed(*k as i64 * e))));
        }
        Ok(l.exp()?)
    }

    /// Apply to z^{eps} * phi, eps virtual with boundary v; returns the new factor.
    fn apply(&self, v: [i64; 2], phi: &TruncatedSeries<QFraction>) -> Result<TruncatedSeries<QFraction>, RefinedError> {
        let ctx = phi.ctx();
        let lat = ctx.lattice();
        let mut groups: BTreeMap<i64, TruncatedSeries<QFraction>> = BTreeMap::new();
        for (g, c) in phi.terms() {
            let b = lat.boundary(g);
            let e = lat.transform_exponent_vec([v[0] + b[0], v[1] + b[1]], &self.direction);
            groups.entry(e).or_insert_with(|| TruncatedSeries::zero(ctx)).add_term(g.clone(), c.clone());
        }
        let mut out = TruncatedSeries::zero(ctx);
        for (e, part) in groups {
            out = out.add(&part.mul(&self.factor(ctx, e)?)?)?;
        }
        Ok(out)
    }
}

/// Composition theta_1 o theta_2 o ... (first factor applied last).
#[derive(Debug, Clone)]
pub struct RefinedAutomorphism {
    ctx: Arc<SeriesContext>,
    factors: Vec<RefinedTransform>,
}

impl RefinedAutomorphism {
    pub fn identity(ctx: &Arc<SeriesContext>) -> Self {
        RefinedAutomorphism { ctx: ctx.clone(), factors: vec![] }
    }

    pub fn from_factors(ctx: &Arc<SeriesContext>, factors: Vec<RefinedTransform>) -> Self {
        RefinedAutomorphism { ctx: ctx.clone(), factors }
    }

    pub fn ctx(&self) -> &Arc<SeriesContext> {
        &self.ctx
    }

    pub fn factors(&self) -> &[RefinedTransform] {
        &self.factors
    }

    pub fn compose(&self, o: &Self) -> Self {
        let mut f = self.factors.clone();
        f.extend(o.factors.iter().cloned());
        RefinedAutomorphism { ctx: self.ctx.clone(), factors: f }
    }

    pub fn inverse(&self) -> Self {
        RefinedAutomorphism { ctx: self.ctx.clone(), factors: self.factors.iter().rev().map(|t| t.inverse()).collect() }
    }

    /// Factor F with image z^{eps} F for a virtual class of boundary v.
    pub fn image(&self, v: [i64; 2]) -> Result<TruncatedSeries<QFraction>, RefinedError> {
        let mut phi = TruncatedSeries::one(&self.ctx);
        for t in self.factors.iter().rev() {
            phi = t.apply(v, &phi)?;
        }
        Ok(phi)
    }

    pub fn images(&self) -> Result<[TruncatedSeries<QFraction>; 2], RefinedError> {
        Ok([self.image([1, 0])?, self.image([0, 1])?])
    }

    pub fn equals(&self, o: &Self) -> Result<bool, RefinedError> {
        Ok(self.images()? == o.images()?)
    }

    pub fn is_identity(&self) -> Result<bool, RefinedError> {
        let one = TruncatedSeries::one(&self.ctx);
        let [a, b] = self.images()?;
        Ok(a == one && b == one)
    }
}

/// Ordered refined factorization: largest key leftmost. Returns (class, counts) in increasing key order.
pub fn refined_factorize_with_keys(
    a: &RefinedAutomorphism,
    sector: &Sector,
    rays: &[RelativeClass],
    key: impl Fn(&RelativeClass) -> GaussianRational,
) -> Result<Vec<RefinedTransform>, RefinedError> {
    let ctx = a.ctx().clone();
    let lat = ctx.lattice().clone();
    let target = a.images()?;
    let mut counts: BTreeMap<RelativeClass, BTreeMap<u64, QFraction>> = BTreeMap::new();
    for r in rays {
        let p = r.primitive().ok_or_else(|| RefinedError::ZeroBoundary(r.clone()))?.0;
        counts.entry(p).or_default();
    }
    let build = |counts: &BTreeMap<RelativeClass, BTreeMap<u64, QFraction>>| -> Vec<RefinedTransform> {
        let mut v: Vec<RefinedTransform> =
            counts.iter().map(|(p, c)| RefinedTransform { direction: p.clone(), counts: c.clone() }).collect();
        v.sort_by(|x, y| sector.angle_cmp(&key(&x.direction), &key(&y.direction)).then_with(|| x.direction.cmp(&y.direction)));
        v
    };
    let mut last: Option<Rat> = None;
    loop {
        let asc = build(&counts);
        let prod = RefinedAutomorphism::from_factors(&ctx, asc.iter().rev().cloned().collect());
        let im = prod.images()?;
        let d = [target[0].sub(&im[0])?, target[1].sub(&im[1])?];
        if d[0].is_zero() && d[1].is_zero() {
            return Ok(asc);
        }
        let level = d.iter().flat_map(|s| s.terms().keys()).map(|g| sector.functional(&key(g))).min().unwrap();
        if last.as_ref().is_some_and(|l| level <= *l) {
            return Err(RefinedError::NoProgress);
        }
        let mut at: Vec<RelativeClass> = d.iter().flat_map(|s| s.terms().keys()).filter(|g| sector.functional(&key(g)) == level).cloned().collect();
        at.sort();
        at.dedup();
        for g in at {
            let (p, k) = g.primitive().ok_or_else(|| RefinedError::NoAdmissibleRay(g.clone()))?;
            if !counts.contains_key(&p) {
                return Err(RefinedError::NoAdmissibleRay(g));
            }
            let e = [lat.transform_exponent_vec([1, 0], &p), lat.transform_exponent_vec([0, 1], &p)];
            let j = if e[0] != 0 { 0 } else if e[1] != 0 { 1 } else { return Err(RefinedError::ZeroBoundary(g)) };
            let qj = QFraction::from_laurent(q_int_signed(k as i64 * e[j]));
            let omega = d[j].coefficient(&g).div(&qj)?;
            let qo = QFraction::from_laurent(q_int_signed(k as i64 * e[1 - j]));
            if d[1 - j].coefficient(&g) != omega.mul(&qo) {
                return Err(RefinedError::Inconsistent(g));
            }
            let slot = counts.get_mut(&p).unwrap().entry(k).or_insert_with(QFraction::zero);
            *slot = slot.add(&omega);
        }
        last = Some(level);
    }
}

/// (-1)^{w-1} / (w [w]_q).
pub fn refined_leaf(w: u64) -> QFraction {
    let s = if w % 2 == 1 { 1 } else { -1 };
    QFraction::new(QLaurent::constant(int(s)), q_int_signed(w as i64).scale(&int(w as i64))).expect("nonzero")
}

/// Refined weights: [Mult]_q at vertices, refined multiple-cover factors at leaves.
#[derive(Debug, Clone, Copy, Default)]
pub struct RefinedRule;

impl LocalRule for RefinedRule {
    type W = QFraction;

    fn leaf(&self, d: u64) -> QFraction {
        refined_leaf(d)
    }

    fn vertex(&self, m: u64) -> QFraction {
        QFraction::from_laurent(q_int_signed(m as i64))
    }

    fn outgoing(
        &self,
        ctx: &Arc<SeriesContext>,
        keys: &dyn Fn(&RelativeClass) -> Result<GaussianRational, LatticeError>,
        incoming: &BTreeMap<RelativeClass, BTreeMap<u64, QFraction>>,
        _point: &Point,
    ) -> Result<BTreeMap<RelativeClass, QFraction>, TropicalError> {
        refined_local_scattering(ctx, keys, incoming).map_err(|e| match e {
            RefinedError::Tropical(t) => t,
            other => TropicalError::Malformed(other.to_string()),
        })
    }
}

/// Outgoing refined counts forced by lines with the given counts through one point.
pub fn refined_local_scattering(
    ctx: &Arc<SeriesContext>,
    keys: &dyn Fn(&RelativeClass) -> Result<GaussianRational, LatticeError>,
    incoming: &BTreeMap<RelativeClass, BTreeMap<u64, QFraction>>,
) -> Result<BTreeMap<RelativeClass, QFraction>, RefinedError> {
    let mut ks = Vec::new();
    let mut lines = Vec::new();
    for (b, c) in incoming {
        let k = keys(b)?;
        ks.push(k.clone());
        lines.push((k, RefinedTransform::new(b.clone(), c.clone())?));
    }
    if lines.is_empty() {
        return Ok(BTreeMap::new());
    }
    let sector = enclosing_sector(&ks).ok_or(RefinedError::Sector)?;
    lines.sort_by(|a, b| sector.angle_cmp(&a.0, &b.0).then_with(|| a.1.direction.cmp(&b.1.direction)));
    // ascending keys, leftmost applied last
    let prod = RefinedAutomorphism::from_factors(ctx, lines.iter().map(|l| l.1.clone()).collect());
    let classes: Vec<RelativeClass> = incoming.keys().cloned().collect();
    let cands = monoid_primitives(ctx, &classes);
    let keyf = |g: &RelativeClass| keys(g).unwrap_or_else(|_| GaussianRational::zero());
    let fact = refined_factorize_with_keys(&prod, &sector, &cands, keyf)?;
    let mut out = BTreeMap::new();
    for t in fact {
        for (k, c) in &t.counts {
            let inc = incoming.get(&t.direction).and_then(|m| m.get(k)).cloned().unwrap_or_else(QFraction::zero);
            let o = c.sub(&inc);
            if !o.is_zero() {
                out.insert(t.direction.scale(*k as i64), o);
            }
        }
    }
    Ok(out)
}

/// Product of [Mult_v]_q and refined leaf factors; junction nodes are rejected.
pub fn refined_weight(d: &TropicalDisc<QFraction>) -> Result<QFraction, RefinedError> {
    if !d.is_generic() {
        return Err(TropicalError::NonGeneric.into());
    }
    Ok(d.total_weight(&RefinedRule))
}

pub fn refined_enumerate(base: &SingularBase, u: &Point, g: &RelativeClass, lambda: &Rat) -> Result<Vec<TropicalDisc<QFraction>>, RefinedError> {
    Ok(enumerate_discs_with(&RefinedRule, base, u, g, lambda)?)
}

/// Sum of refined disc weights (junctions included).
pub fn refined_omega(base: &SingularBase, u: &Point, g: &RelativeClass, lambda: &Rat) -> Result<QFraction, RefinedError> {
    Ok(omega_trop_with(&RefinedRule, base, u, g, lambda)?)
}

/// Coefficientwise q = 1 specialization.
pub fn specialize(s: &TruncatedSeries<QFraction>) -> Result<TruncatedSeries<Rat>, RefinedError> {
    let mut out = TruncatedSeries::zero(s.ctx());
    for (g, c) in s.terms() {
        out.add_term(g.clone(), c.at_one()?);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::{rat, ChargeLattice, SignConvention};
    use crate::tropical::omega_trop;
    use crate::wallcross::{ElementaryTransform, Automorphism};
    use crate::series::SlabFunction;

    fn ctx(order: i64) -> Arc<SeriesContext> {
        let lat = Arc::new(ChargeLattice::standard());
        let one = GaussianRational::one();
        Arc::new(SeriesContext::new(lat, vec![one.clone(), one], int(order) + rat(1, 2)).unwrap())
    }

    fn l(terms: &[(i64, i64)]) -> QLaurent {
        QLaurent::from_terms(terms.iter().map(|(k, c)| (*k, int(*c))))
    }

    #[test]
    fn q_integers() {
        assert_eq!(q_int(1).unwrap(), l(&[(0, 1)]));
        assert_eq!(q_int(2).unwrap(), l(&[(1, 1), (-1, 1)]));
        assert_eq!(q_int(3).unwrap().at_one(), int(3));
        assert_eq!(q_int(0).unwrap_err(), RefinedError::NonPositive);
        for n in 1..=20 {
            let q = q_int(n).unwrap();
            assert_eq!(q.bar(), q);
        }
        assert_eq!(q_int(2).unwrap().to_string(), "-1/2:1 1/2:1");
    }

    #[test]
    fn fractions_normalize() {
        // (q - 1) / (q^{1/2} - q^{-1/2}) = q^{1/2}
        let a = QFraction::new(l(&[(2, 1), (0, -1)]), l(&[(1, 1), (-1, -1)])).unwrap();
        assert_eq!(a.as_laurent().unwrap(), &l(&[(1, 1)]));
        let b = QFraction::new(l(&[(0, 1)]), q_int(2).unwrap()).unwrap();
        assert_eq!(b.add(&b.neg()), QFraction::zero());
        assert_eq!(b.mul(&b.inv().unwrap()), QFraction::one());
        assert_eq!(b.at_one().unwrap(), rat(1, 2));
        let pole = QFraction::new(l(&[(0, 1)]), l(&[(0, 1), (2, -1)])).unwrap();
        assert_eq!(pole.at_one().unwrap_err(), RefinedError::Pole);
    }

    #[test]
    fn star_product_relations() {
        let c = ctx(4);
        let x = TruncatedSeries::monomial(&c, RelativeClass::new([1, 0]), QLaurent::one());
        let y = TruncatedSeries::monomial(&c, RelativeClass::new([0, 1]), QLaurent::one());
        let one = TruncatedSeries::one(&c);
        assert_eq!(q_mul(&x, &one).unwrap(), x);
        let xy = q_mul(&x, &y).unwrap();
        let yx = q_mul(&y, &x).unwrap();
        let g = RelativeClass::new([1, 1]);
        assert_eq!(xy.coefficient(&g), yx.coefficient(&g).shift(2));
        let s = x.add(&y).unwrap();
        let lhs = q_mul(&q_mul(&s, &xy).unwrap(), &s).unwrap();
        let rhs = q_mul(&s, &q_mul(&xy, &s).unwrap()).unwrap();
        assert_eq!(lhs, rhs);
    }

    #[test]
    fn dilog_generator() {
        let c = ctx(6);
        let g = RelativeClass::new([1, 0]);
        let li = q_dilog(&c, &g, 1).unwrap();
        let lead = li.coefficient(&g);
        assert_eq!(lead, QFraction::new(l(&[(1, 1)]), l(&[(0, 1), (2, -1)])).unwrap());
        // -Li_2(-q^{1/2} x; q) generates the focus-focus refined wall
        let h = TruncatedSeries::from_terms(
            &c,
            li.terms().iter().map(|(cl, co)| {
                let k = cl.coords()[0];
                (cl.clone(), if k % 2 == 0 { co.neg() } else { co.clone() })
            }),
        );
        let t = RefinedTransform::from_generator(g.clone(), &h).unwrap();
        let ff = RefinedTransform::focus_focus(g.clone(), 6).unwrap();
        assert_eq!(t, ff);
        // central element acts trivially
        let a = RefinedAutomorphism::from_factors(&c, vec![RefinedTransform::focus_focus(RelativeClass::new([1, 0]), 6).unwrap()]);
        let v = a.image([1, 0]).unwrap();
        assert_eq!(v, TruncatedSeries::one(&c));
    }

    #[test]
    fn refined_pentagon() {
        for order in [4, 6] {
            let c = ctx(order);
            let g1 = RelativeClass::new([0, 1]);
            let g2 = RelativeClass::new([1, 0]);
            let g12 = RelativeClass::new([1, 1]);
            let n = order as u64;
            let t = |g: &RelativeClass| RefinedTransform::focus_focus(g.clone(), n).unwrap();
            let lhs = RefinedAutomorphism::from_factors(&c, vec![t(&g1), t(&g2)]);
            let rhs = RefinedAutomorphism::from_factors(&c, vec![t(&g2), t(&g12), t(&g1)]);
            assert!(lhs.equals(&rhs).unwrap());
            let wrong = RefinedAutomorphism::from_factors(&c, vec![t(&g2), t(&g1)]);
            assert!(!lhs.equals(&wrong).unwrap());
            // classical limit
            let classical = |g: &RelativeClass| {
                ElementaryTransform::new(SlabFunction::from_coefficients(&c, g.clone(), &BTreeMap::from([(1, int(1))])).unwrap())
                    .to_automorphism()
                    .unwrap()
            };
            let cl: Automorphism = classical(&g1).compose(&classical(&g2)).unwrap();
            let [a, b] = lhs.images().unwrap();
            assert_eq!(specialize(&a).unwrap(), cl.images()[0]);
            assert_eq!(specialize(&b).unwrap(), cl.images()[1]);
        }
    }

    #[test]
    fn refined_local_pentagon() {
        let c = ctx(5);
        let keys = |g: &RelativeClass| -> Result<GaussianRational, LatticeError> {
            let v = g.coords();
            Ok(GaussianRational::from_ints(v[0] + v[1], v[0] - v[1]))
        };
        let inc = BTreeMap::from([
            (RelativeClass::new([1, 0]), (1..=5).map(|k| (k, refined_leaf(k))).collect()),
            (RelativeClass::new([0, 1]), (1..=5).map(|k| (k, refined_leaf(k))).collect()),
        ]);
        let out = refined_local_scattering(&c, &keys, &inc).unwrap();
        let expect: BTreeMap<RelativeClass, QFraction> = (1..=2).map(|k| (RelativeClass::new([k, k]), refined_leaf(k as u64))).collect();
        assert_eq!(out, expect);
    }

    #[test]
    fn refined_weights_and_counts() {
        let b = SingularBase::new(vec![(Point::from_ints(-1, 0), [1, 0]), (Point::from_ints(0, -1), [0, 1])], SignConvention::Plus).unwrap();
        let lam = int(10);
        let u = Point::from_ints(1, 1);
        let e = RelativeClass::new([1, 0]);
        assert_eq!(refined_omega(&b, &Point::from_ints(2, 0), &e, &lam).unwrap(), QFraction::one());
        let two = refined_omega(&b, &Point::from_ints(2, 0), &e.scale(2), &lam).unwrap();
        assert_eq!(two, QFraction::new(l(&[(0, -1)]), l(&[(1, 2), (-1, 2)])).unwrap());
        assert_eq!(two.at_one().unwrap(), rat(-1, 4));
        let discs = refined_enumerate(&b, &u, &RelativeClass::new([1, 1]), &lam).unwrap();
        assert_eq!(discs.len(), 1);
        assert_eq!(refined_weight(&discs[0]).unwrap(), QFraction::one());
        for k in b.classes_below(&u, &int(4)).unwrap() {
            let r = refined_omega(&b, &u, &k, &lam).unwrap();
            assert_eq!(r.at_one().unwrap(), omega_trop(&b, &u, &k, &lam).unwrap(), "class {k}");
        }
    }
}
