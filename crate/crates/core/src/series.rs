//! Energy-truncated commutative series over the charge lattice.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use num_traits::Signed;
use thiserror::Error;

use crate::lattice::{int, ChargeLattice, CentralCharge, GaussianRational, Point, Rat, RelativeClass};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SeriesError {
    #[error("series live in different charge contexts")]
    ContextMismatch,
    #[error("cutoff must be positive")]
    NonPositiveCutoff,
    #[error("expected constant term {expected}")]
    WrongConstantTerm { expected: &'static str },
    #[error("class {0} is not primitive")]
    NonPrimitive(RelativeClass),
    #[error("slab support contains {0}, which is not a positive multiple of the direction")]
    MalformedSupport(RelativeClass),
    #[error("series is not nilpotent in the truncated ring")]
    NotNilpotent,
    #[error("charge context has {got} values for a lattice of rank {expected}")]
    RankMismatch { expected: usize, got: usize },
    #[error("table parse error on line {line}: {msg}")]
    Table { line: usize, msg: String },
}

/// Coefficient ring for truncated series: a commutative Q-algebra.
pub trait Coefficient: Clone + PartialEq + fmt::Debug + fmt::Display + Send + Sync + 'static {
    fn zero() -> Self;
    fn one() -> Self;
    fn is_zero(&self) -> bool;
    fn add(&self, o: &Self) -> Self;
    fn mul(&self, o: &Self) -> Self;
    fn neg(&self) -> Self;
    fn scale(&self, r: &Rat) -> Self;
    fn from_rat(r: Rat) -> Self;

    fn sub(&self, o: &Self) -> Self {
        self.add(&o.neg())
    }
    fn is_one(&self) -> bool {
        *self == Self::one()
    }
}

impl Coefficient for Rat {
    fn zero() -> Self {
        num_traits::Zero::zero()
    }
    fn one() -> Self {
        num_traits::One::one()
    }
    fn is_zero(&self) -> bool {
        num_traits::Zero::is_zero(self)
    }
    fn add(&self, o: &Self) -> Self {
        self + o
    }
    fn mul(&self, o: &Self) -> Self {
        self * o
    }
    fn neg(&self) -> Self {
        -self
    }
    fn scale(&self, r: &Rat) -> Self {
        self * r
    }
    fn from_rat(r: Rat) -> Self {
        r
    }
    fn sub(&self, o: &Self) -> Self {
        self - o
    }
}

/// Where a series lives: charges of the generators at a base point, and the energy cutoff.
#[derive(Debug, Clone)]
pub struct SeriesContext {
    lattice: Arc<ChargeLattice>,
    values: Vec<GaussianRational>,
    cutoff: Rat,
    cutoff_sqr: Rat,
}

impl PartialEq for SeriesContext {
    fn eq(&self, o: &Self) -> bool {
        (Arc::ptr_eq(&self.lattice, &o.lattice) || self.lattice == o.lattice) && self.values == o.values && self.cutoff == o.cutoff
    }
}

impl SeriesContext {
    pub fn new(lattice: Arc<ChargeLattice>, values: Vec<GaussianRational>, cutoff: Rat) -> Result<Self, SeriesError> {
        if !cutoff.is_positive() {
            return Err(SeriesError::NonPositiveCutoff);
        }
        if values.len() != lattice.rank() {
            return Err(SeriesError::RankMismatch { expected: lattice.rank(), got: values.len() });
        }
        let cutoff_sqr = &cutoff * &cutoff;
        Ok(SeriesContext { lattice, values, cutoff, cutoff_sqr })
    }

    pub fn at_point(lattice: Arc<ChargeLattice>, charge: &CentralCharge, u: &Point, cutoff: Rat) -> Result<Self, SeriesError> {
        Self::new(lattice, charge.values_at(u), cutoff)
    }

    pub fn lattice(&self) -> &Arc<ChargeLattice> {
        &self.lattice
    }

    pub fn values(&self) -> &[GaussianRational] {
        &self.values
    }

    pub fn cutoff(&self) -> &Rat {
        &self.cutoff
    }

    pub fn rank(&self) -> usize {
        self.values.len()
    }

    pub fn charge_of(&self, c: &RelativeClass) -> GaussianRational {
        let mut re = int(0);
        let mut im = int(0);
        for (k, v) in c.coords().iter().zip(&self.values) {
            if *k != 0 {
                let k = int(*k);
                re += &v.re * &k;
                im += &v.im * &k;
            }
        }
        GaussianRational::new(re, im)
    }

    pub fn energy_sqr(&self, c: &RelativeClass) -> Rat {
        self.charge_of(c).norm_sqr()
    }

    /// Whether z^c survives the quotient by F^lambda.
    pub fn admits(&self, c: &RelativeClass) -> bool {
        c.is_zero() || self.energy_sqr(c) < self.cutoff_sqr
    }

    /// Shift every generator's charge by `dz` (parallel transport).
    pub fn transported(&self, dz: &[GaussianRational]) -> Result<Self, SeriesError> {
        if dz.len() != self.values.len() {
            return Err(SeriesError::RankMismatch { expected: self.values.len(), got: dz.len() });
        }
        let values = self.values.iter().zip(dz).map(|(a, b)| a + b).collect();
        Self::new(self.lattice.clone(), values, self.cutoff.clone())
    }

    pub fn with_cutoff(&self, cutoff: Rat) -> Result<Self, SeriesError> {
        Self::new(self.lattice.clone(), self.values.clone(), cutoff)
    }

    pub fn with_values(&self, values: Vec<GaussianRational>) -> Result<Self, SeriesError> {
        Self::new(self.lattice.clone(), values, self.cutoff.clone())
    }
}

/// Finitely supported series sum c_g z^g, with every surviving g below the energy cutoff.
#[derive(Clone)]
pub struct TruncatedSeries<C: Coefficient = Rat> {
    ctx: Arc<SeriesContext>,
    terms: BTreeMap<RelativeClass, C>,
}

impl<C: Coefficient> PartialEq for TruncatedSeries<C> {
    fn eq(&self, o: &Self) -> bool {
        self.terms == o.terms && (Arc::ptr_eq(&self.ctx, &o.ctx) || *self.ctx == *o.ctx)
    }
}

impl<C: Coefficient> fmt::Debug for TruncatedSeries<C> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self)
    }
}

impl<C: Coefficient> fmt::Display for TruncatedSeries<C> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        for (i, (k, c)) in self.terms.iter().enumerate() {
            if i > 0 {
                write!(f, " + ")?;
            }
            write!(f, "[{c}]z^{k}")?;
        }
        Ok(())
    }
}

impl<C: Coefficient> TruncatedSeries<C> {
    pub fn zero(ctx: &Arc<SeriesContext>) -> Self {
        TruncatedSeries { ctx: ctx.clone(), terms: BTreeMap::new() }
    }

    pub fn one(ctx: &Arc<SeriesContext>) -> Self {
        Self::constant(ctx, C::one())
    }

    pub fn constant(ctx: &Arc<SeriesContext>, c: C) -> Self {
        Self::monomial(ctx, RelativeClass::zero(ctx.rank()), c)
    }

    /// c z^g, or zero when g is cut off.
    pub fn monomial(ctx: &Arc<SeriesContext>, g: RelativeClass, c: C) -> Self {
        let mut s = Self::zero(ctx);
        if !c.is_zero() && ctx.admits(&g) {
            s.terms.insert(g, c);
        }
        s
    }

    pub fn from_terms(ctx: &Arc<SeriesContext>, terms: impl IntoIterator<Item = (RelativeClass, C)>) -> Self {
        let mut s = Self::zero(ctx);
        for (g, c) in terms {
            s.add_term(g, c);
        }
        s
    }

    pub fn ctx(&self) -> &Arc<SeriesContext> {
        &self.ctx
    }

    pub fn terms(&self) -> &BTreeMap<RelativeClass, C> {
        &self.terms
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn coefficient(&self, g: &RelativeClass) -> C {
        self.terms.get(g).cloned().unwrap_or_else(C::zero)
    }

    pub fn constant_term(&self) -> C {
        self.coefficient(&RelativeClass::zero(self.ctx.rank()))
    }

    /// Add c z^g in place (dropped if cut off).
    pub fn add_term(&mut self, g: RelativeClass, c: C) {
        if c.is_zero() || !self.ctx.admits(&g) {
            return;
        }
        match self.terms.entry(g) {
            std::collections::btree_map::Entry::Vacant(e) => {
                e.insert(c);
            }
            std::collections::btree_map::Entry::Occupied(mut e) => {
                let s = e.get().add(&c);
                if s.is_zero() {
                    e.remove();
                } else {
                    *e.get_mut() = s;
                }
            }
        }
    }

    fn check_ctx(&self, o: &Self) -> Result<(), SeriesError> {
        if Arc::ptr_eq(&self.ctx, &o.ctx) || *self.ctx == *o.ctx {
            Ok(())
        } else {
            Err(SeriesError::ContextMismatch)
        }
    }

    pub fn add(&self, o: &Self) -> Result<Self, SeriesError> {
        self.check_ctx(o)?;
        let mut out = self.clone();
        for (g, c) in &o.terms {
            out.add_term(g.clone(), c.clone());
        }
        Ok(out)
    }

    pub fn sub(&self, o: &Self) -> Result<Self, SeriesError> {
        self.add(&o.neg())
    }

    pub fn neg(&self) -> Self {
        TruncatedSeries { ctx: self.ctx.clone(), terms: self.terms.iter().map(|(g, c)| (g.clone(), c.neg())).collect() }
    }

    pub fn scale(&self, r: &Rat) -> Self {
        self.map_coefficients(|c| c.scale(r))
    }

    pub fn scale_coeff(&self, k: &C) -> Self {
        self.map_coefficients(|c| c.mul(k))
    }

    pub fn map_coefficients(&self, f: impl Fn(&C) -> C) -> Self {
        let mut out = Self::zero(&self.ctx);
        for (g, c) in &self.terms {
            let v = f(c);
            if !v.is_zero() {
                out.terms.insert(g.clone(), v);
            }
        }
        out
    }

    /// Multiply by the monomial z^g.
    pub fn shift(&self, g: &RelativeClass) -> Self {
        let mut out = Self::zero(&self.ctx);
        for (k, c) in &self.terms {
            out.add_term(k + g, c.clone());
        }
        out
    }

    pub fn mul(&self, o: &Self) -> Result<Self, SeriesError> {
        self.check_ctx(o)?;
        let mut out = Self::zero(&self.ctx);
        for (a, ca) in &self.terms {
            for (b, cb) in &o.terms {
                let g = a + b;
                if self.ctx.admits(&g) {
                    out.add_term(g, ca.mul(cb));
                }
            }
        }
        Ok(out)
    }

    /// Re-express in another context (same lattice), dropping terms beyond its cutoff.
    pub fn recontext(&self, ctx: &Arc<SeriesContext>) -> Self {
        let mut out = Self::zero(ctx);
        for (g, c) in &self.terms {
            out.add_term(g.clone(), c.clone());
        }
        out
    }

    fn without_constant(&self) -> Self {
        let mut s = self.clone();
        s.terms.remove(&RelativeClass::zero(self.ctx.rank()));
        s
    }

    fn power_sum(g: &Self, coeff: impl Fn(usize) -> Rat) -> Result<Self, SeriesError> {
        // sum_{n>=1} coeff(n) g^n; g has no constant term, so powers die out.
        let mut out = Self::zero(&g.ctx);
        let mut p = g.clone();
        let mut n = 1usize;
        while !p.is_zero() {
            out = out.add(&p.scale(&coeff(n)))?;
            p = p.mul(g)?;
            n += 1;
            if n > 100_000 {
                return Err(SeriesError::NotNilpotent);
            }
        }
        Ok(out)
    }

    pub fn exp(&self) -> Result<Self, SeriesError> {
        if !self.constant_term().is_zero() {
            return Err(SeriesError::WrongConstantTerm { expected: "0" });
        }
        let mut out = Self::one(&self.ctx);
        let mut term = Self::one(&self.ctx);
        let mut n = 1i64;
        loop {
            term = term.mul(self)?.scale(&Rat::new(1.into(), n.into()));
            if term.is_zero() {
                break;
            }
            out = out.add(&term)?;
            n += 1;
            if n > 100_000 {
                return Err(SeriesError::NotNilpotent);
            }
        }
        Ok(out)
    }

    /// log f for f with constant term 1.
    pub fn log(&self) -> Result<Self, SeriesError> {
        if !self.constant_term().is_one() {
            return Err(SeriesError::WrongConstantTerm { expected: "1" });
        }
        let g = self.without_constant();
        Self::power_sum(&g, |n| {
            let s = if n % 2 == 1 { 1 } else { -1 };
            Rat::new(s.into(), (n as i64).into())
        })
    }

    /// Multiplicative inverse of a series with constant term 1.
    pub fn inverse(&self) -> Result<Self, SeriesError> {
        if !self.constant_term().is_one() {
            return Err(SeriesError::WrongConstantTerm { expected: "1" });
        }
        let g = self.without_constant().neg();
        let tail = Self::power_sum(&g, |_| int(1))?;
        tail.add(&Self::one(&self.ctx))
    }

    /// f^e by repeated squaring; negative exponents go through the inverse.
    pub fn pow_int(&self, e: i64) -> Result<Self, SeriesError> {
        if e < 0 {
            return self.inverse()?.pow_int(-e);
        }
        let mut result = Self::one(&self.ctx);
        let mut base = self.clone();
        let mut k = e as u64;
        while k > 0 {
            if k & 1 == 1 {
                result = result.mul(&base)?;
            }
            k >>= 1;
            if k > 0 {
                base = base.mul(&base)?;
            }
        }
        Ok(result)
    }

    /// exp(e log f).
    pub fn pow(&self, e: &Rat) -> Result<Self, SeriesError> {
        if !self.constant_term().is_one() {
            return Err(SeriesError::WrongConstantTerm { expected: "1" });
        }
        if e.is_zero() {
            return Ok(Self::one(&self.ctx));
        }
        self.log()?.scale(e).exp()
    }

    /// Terms sorted by (|Z|^2, lex).
    pub fn sorted_terms(&self) -> Vec<(&RelativeClass, &C)> {
        let mut v: Vec<(Rat, &RelativeClass, &C)> = self.terms.iter().map(|(g, c)| (self.ctx.energy_sqr(g), g, c)).collect();
        v.sort_by(|a, b| a.0.cmp(&b.0).then_with(|| a.1.cmp(b.1)));
        v.into_iter().map(|(_, g, c)| (g, c)).collect()
    }
}

/// "coords TAB coefficient" lines, sorted by (|Z|^2, lex).
pub fn series_to_table<C: Coefficient>(s: &TruncatedSeries<C>) -> String {
    let mut out = String::new();
    for (g, c) in s.sorted_terms() {
        out.push_str(&class_to_field(g));
        out.push('\t');
        out.push_str(&c.to_string());
        out.push('\n');
    }
    out
}

pub fn class_to_field(g: &RelativeClass) -> String {
    g.coords().iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",")
}

pub fn rat_to_string(r: &Rat) -> String {
    format!("{}/{}", r.numer(), r.denom())
}

pub fn parse_rat(s: &str) -> Option<Rat> {
    let s = s.trim();
    if let Some((n, d)) = s.split_once('/') {
        let n: num_bigint::BigInt = n.trim().parse().ok()?;
        let d: num_bigint::BigInt = d.trim().parse().ok()?;
        if num_traits::Zero::is_zero(&d) {
            return None;
        }
        Some(Rat::new(n, d))
    } else {
        let n: num_bigint::BigInt = s.parse().ok()?;
        Some(Rat::from_integer(n))
    }
}

/// Exact rational table (coefficients printed as p/q).
pub fn rational_series_to_table(s: &TruncatedSeries<Rat>) -> String {
    let mut out = String::new();
    for (g, c) in s.sorted_terms() {
        out.push_str(&class_to_field(g));
        out.push('\t');
        out.push_str(&rat_to_string(c));
        out.push('\n');
    }
    out
}

pub fn rational_series_from_table(ctx: &Arc<SeriesContext>, text: &str) -> Result<TruncatedSeries<Rat>, SeriesError> {
    let mut s = TruncatedSeries::zero(ctx);
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let err = |msg: &str| SeriesError::Table { line: i + 1, msg: msg.to_string() };
        let (k, v) = line.split_once('\t').ok_or_else(|| err("missing tab"))?;
        let coords: Result<Vec<i64>, _> = k.split(',').map(|x| x.trim().parse::<i64>()).collect();
        let coords = coords.map_err(|_| err("bad class coordinates"))?;
        if coords.len() != ctx.rank() {
            return Err(err("wrong rank"));
        }
        let c = parse_rat(v).ok_or_else(|| err("bad rational"))?;
        s.add_term(RelativeClass::new(coords), c);
    }
    Ok(s)
}

/// Series supported on multiples of a primitive class, constant term 1.
#[derive(Clone, PartialEq, Debug)]
pub struct SlabFunction {
    direction: RelativeClass,
    series: TruncatedSeries<Rat>,
}

impl SlabFunction {
    pub fn new(direction: RelativeClass, series: TruncatedSeries<Rat>) -> Result<Self, SeriesError> {
        if !direction.is_primitive() {
            return Err(SeriesError::NonPrimitive(direction));
        }
        if !series.constant_term().is_one() {
            return Err(SeriesError::WrongConstantTerm { expected: "1" });
        }
        for g in series.terms().keys() {
            if g.is_zero() {
                continue;
            }
            if multiple_of(g, &direction).is_none() {
                return Err(SeriesError::MalformedSupport(g.clone()));
            }
        }
        Ok(SlabFunction { direction, series })
    }

    pub fn trivial(ctx: &Arc<SeriesContext>, direction: RelativeClass) -> Result<Self, SeriesError> {
        Self::new(direction, TruncatedSeries::one(ctx))
    }

    /// 1 + sum_d c_d z^{d g}.
    pub fn from_coefficients(ctx: &Arc<SeriesContext>, direction: RelativeClass, coeffs: &BTreeMap<u64, Rat>) -> Result<Self, SeriesError> {
        let mut s = TruncatedSeries::one(ctx);
        for (d, c) in coeffs {
            if *d == 0 {
                continue;
            }
            s.add_term(direction.scale(*d as i64), c.clone());
        }
        Self::new(direction, s)
    }

    pub fn direction(&self) -> &RelativeClass {
        &self.direction
    }

    pub fn series(&self) -> &TruncatedSeries<Rat> {
        &self.series
    }

    pub fn ctx(&self) -> &Arc<SeriesContext> {
        self.series.ctx()
    }

    /// Coefficients c_d of z^{d g}, d >= 1.
    pub fn coefficients(&self) -> BTreeMap<u64, Rat> {
        self.series
            .terms()
            .iter()
            .filter(|(g, _)| !g.is_zero())
            .map(|(g, c)| (multiple_of(g, &self.direction).unwrap(), c.clone()))
            .collect()
    }

    pub fn is_trivial(&self) -> bool {
        self.series.len() == 1
    }

    pub fn recontext(&self, ctx: &Arc<SeriesContext>) -> Self {
        SlabFunction { direction: self.direction.clone(), series: self.series.recontext(ctx) }
    }

    pub fn mul(&self, o: &Self) -> Result<Self, SeriesError> {
        if self.direction != o.direction {
            return Err(SeriesError::MalformedSupport(o.direction.clone()));
        }
        Ok(SlabFunction { direction: self.direction.clone(), series: self.series.mul(&o.series)? })
    }

    pub fn inverse(&self) -> Result<Self, SeriesError> {
        Ok(SlabFunction { direction: self.direction.clone(), series: self.series.inverse()? })
    }

    /// Largest d with z^{d g} below the cutoff.
    pub fn max_multiple(&self) -> u64 {
        max_multiple(self.ctx(), &self.direction)
    }
}

/// Largest d >= 0 such that z^{d g} survives (0 if even z^g is cut off).
pub fn max_multiple(ctx: &SeriesContext, g: &RelativeClass) -> u64 {
    let mut d = 0u64;
    while ctx.admits(&g.scale(d as i64 + 1)) {
        d += 1;
        if d > 1_000_000 {
            break;
        }
    }
    d
}

/// k with g = k * dir, k >= 1.
pub fn multiple_of(g: &RelativeClass, dir: &RelativeClass) -> Option<u64> {
    let (p, k) = g.primitive()?;
    (p == *dir).then_some(k)
}

/// f = exp(sum_d d * omega(d) z^{d g}).
pub fn slab_from_counts(ctx: &Arc<SeriesContext>, counts: &BTreeMap<u64, Rat>, direction: &RelativeClass) -> Result<SlabFunction, SeriesError> {
    if !direction.is_primitive() {
        return Err(SeriesError::NonPrimitive(direction.clone()));
    }
    let mut l = TruncatedSeries::zero(ctx);
    for (d, w) in counts {
        if *d == 0 {
            continue;
        }
        l.add_term(direction.scale(*d as i64), w * int(*d as i64));
    }
    SlabFunction::new(direction.clone(), l.exp()?)
}

/// Inverse of `slab_from_counts`: omega(d) = [z^{d g}] log f / d, for every surviving d.
pub fn counts_from_slab(f: &SlabFunction) -> Result<BTreeMap<u64, Rat>, SeriesError> {
    let l = f.series().log()?;
    let mut out = BTreeMap::new();
    for d in 1..=f.max_multiple() {
        let c = l.coefficient(&f.direction().scale(d as i64));
        out.insert(d, c / int(d as i64));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::rat;

    fn ctx2(cut: Rat) -> Arc<SeriesContext> {
        Arc::new(
            SeriesContext::new(Arc::new(ChargeLattice::standard()), vec![GaussianRational::from_ints(1, 0), GaussianRational::from_ints(1, 0)], cut)
                .unwrap(),
        )
    }

    fn x(ctx: &Arc<SeriesContext>) -> TruncatedSeries {
        TruncatedSeries::monomial(ctx, RelativeClass::new([1, 0]), int(1))
    }
    fn y(ctx: &Arc<SeriesContext>) -> TruncatedSeries {
        TruncatedSeries::monomial(ctx, RelativeClass::new([0, 1]), int(1))
    }

    #[test]
    fn mul_examples() {
        let c = ctx2(rat(9, 2));
        let one = TruncatedSeries::one(&c);
        let f = one.add(&x(&c)).unwrap();
        assert_eq!(f.mul(&one).unwrap(), f);
        let g = one.sub(&x(&c)).unwrap();
        let expect = one.sub(&x(&c).mul(&x(&c)).unwrap()).unwrap();
        assert_eq!(f.mul(&g).unwrap(), expect);
        let h = one.add(&y(&c)).unwrap();
        let prod = f.mul(&h).unwrap();
        assert_eq!(prod.len(), 4);
        assert_eq!(prod.coefficient(&RelativeClass::new([1, 1])), int(1));
    }

    #[test]
    fn truncation_drops_high_energy() {
        let c = ctx2(rat(5, 2));
        let f = TruncatedSeries::one(&c).add(&x(&c)).unwrap();
        let cube = f.pow_int(3).unwrap();
        assert_eq!(cube.len(), 3);
        assert_eq!(cube.coefficient(&RelativeClass::new([2, 0])), int(3));
    }

    #[test]
    fn exp_log_examples() {
        let c = ctx2(rat(11, 2));
        let z = TruncatedSeries::<Rat>::zero(&c);
        assert_eq!(z.exp().unwrap(), TruncatedSeries::one(&c));
        let f = TruncatedSeries::one(&c).add(&x(&c)).unwrap();
        let l = f.log().unwrap();
        for d in 1..=5i64 {
            let s = if d % 2 == 1 { 1 } else { -1 };
            assert_eq!(l.coefficient(&RelativeClass::new([d, 0])), rat(s, d));
        }
        assert_eq!(l.exp().unwrap(), f);
        assert!(matches!(f.exp(), Err(SeriesError::WrongConstantTerm { .. })));
        assert!(matches!(x(&c).log(), Err(SeriesError::WrongConstantTerm { .. })));
    }

    #[test]
    fn pow_examples() {
        let c = ctx2(rat(11, 2));
        let f = TruncatedSeries::one(&c).add(&x(&c)).unwrap();
        assert_eq!(f.pow(&int(0)).unwrap(), TruncatedSeries::one(&c));
        let sq = f.pow(&int(2)).unwrap();
        assert_eq!(sq, f.mul(&f).unwrap());
        assert_eq!(sq.coefficient(&RelativeClass::new([1, 0])), int(2));
        let h = f.pow(&rat(1, 2)).unwrap();
        assert_eq!(h.pow(&int(2)).unwrap(), f);
        assert_eq!(f.pow(&int(-3)).unwrap(), f.pow_int(-3).unwrap());
    }

    #[test]
    fn slab_examples() {
        let c = ctx2(rat(25, 2));
        let g = RelativeClass::new([1, 0]);
        let ff: BTreeMap<u64, Rat> = (1..=12).map(|d| (d, rat(if d % 2 == 1 { 1 } else { -1 }, (d * d) as i64))).collect();
        let f = slab_from_counts(&c, &ff, &g).unwrap();
        assert_eq!(f.series().len(), 2);
        assert_eq!(f.series().coefficient(&g), int(1));
        assert_eq!(counts_from_slab(&f).unwrap(), ff);
        let empty = slab_from_counts(&c, &BTreeMap::new(), &g).unwrap();
        assert!(empty.is_trivial());
        let e = slab_from_counts(&c, &BTreeMap::from([(1, int(1))]), &g).unwrap();
        let mut fact = int(1);
        for d in 1..=12i64 {
            fact *= int(d);
            assert_eq!(e.series().coefficient(&g.scale(d)), int(1) / &fact);
        }
        assert!(matches!(slab_from_counts(&c, &ff, &RelativeClass::new([2, 0])), Err(SeriesError::NonPrimitive(_))));
    }

    #[test]
    fn malformed_slab_support() {
        let c = ctx2(rat(9, 2));
        let s = TruncatedSeries::one(&c).add(&y(&c)).unwrap();
        assert!(matches!(SlabFunction::new(RelativeClass::new([1, 0]), s), Err(SeriesError::MalformedSupport(_))));
    }

    #[test]
    fn table_round_trip() {
        let c = ctx2(rat(7, 2));
        let f = TruncatedSeries::one(&c).add(&x(&c).scale(&rat(-3, 4))).unwrap().mul(&TruncatedSeries::one(&c).add(&y(&c)).unwrap()).unwrap();
        let t = rational_series_to_table(&f);
        assert!(t.starts_with("0,0\t1/1\n"));
        assert_eq!(rational_series_from_table(&c, &t).unwrap(), f);
    }

    #[test]
    fn cutoff_must_be_positive() {
        let l = Arc::new(ChargeLattice::standard());
        assert_eq!(
            SeriesContext::new(l, vec![GaussianRational::one(), GaussianRational::one()], int(0)).unwrap_err(),
            SeriesError::NonPositiveCutoff
        );
    }
}
