//! Charge lattice, skew pairing, central charges and phase geometry.

use std::cmp::Ordering;
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{Signed, Zero};
use smallvec::SmallVec;
use thiserror::Error;

pub type Rat = BigRational;

pub fn rat(n: i64, d: i64) -> Rat {
    Rat::new(n.into(), d.into())
}

pub fn int(n: i64) -> Rat {
    Rat::from_integer(n.into())
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum LatticeError {
    #[error("dimension mismatch: expected rank {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("zero charge has no phase")]
    ZeroCharge,
    #[error("sector angle must be strictly less than pi")]
    SectorTooWide,
    #[error("generator {0} has zero central charge")]
    ZeroGenerator(usize),
    #[error("generator {0} has charge outside the sector")]
    GeneratorOutsideSector(usize),
    #[error("lattice must have positive rank")]
    EmptyLattice,
    #[error("charge is not holomorphic in the chart coordinate for generator {0}")]
    NotHolomorphic(usize),
}

/// Which sign the exponent of an elementary transform carries.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum SignConvention {
    /// z^{g'} -> z^{g'} f^{<g', g>}
    #[default]
    Plus,
    /// z^{g'} -> z^{g'} f^{-<g', g>}
    Minus,
}

impl SignConvention {
    pub fn sign(self) -> i64 {
        match self {
            SignConvention::Plus => 1,
            SignConvention::Minus => -1,
        }
    }
}

/// Element of the charge lattice, stored by its coordinates.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct RelativeClass(SmallVec<[i64; 4]>);

impl RelativeClass {
    pub fn new(coords: impl IntoIterator<Item = i64>) -> Self {
        RelativeClass(coords.into_iter().collect())
    }

    pub fn zero(rank: usize) -> Self {
        RelativeClass(SmallVec::from_elem(0, rank))
    }

    pub fn unit(rank: usize, i: usize) -> Self {
        let mut c = Self::zero(rank);
        c.0[i] = 1;
        c
    }

    pub fn coords(&self) -> &[i64] {
        &self.0
    }

    pub fn rank(&self) -> usize {
        self.0.len()
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(|&x| x == 0)
    }

    pub fn scale(&self, k: i64) -> Self {
        RelativeClass(self.0.iter().map(|&x| x * k).collect())
    }

    /// Gcd of the coordinates (0 for the zero class).
    pub fn divisibility(&self) -> u64 {
        self.0.iter().fold(0i64, |g, &x| g.gcd(&x)).unsigned_abs()
    }

    /// Primitive part and multiplicity; `None` for zero.
    pub fn primitive(&self) -> Option<(RelativeClass, u64)> {
        let d = self.divisibility();
        if d == 0 {
            return None;
        }
        let di = d as i64;
        Some((RelativeClass(self.0.iter().map(|&x| x / di).collect()), d))
    }

    pub fn is_primitive(&self) -> bool {
        self.divisibility() == 1
    }

    /// Componentwise `<=`.
    pub fn le(&self, other: &Self) -> bool {
        self.0.len() == other.0.len() && self.0.iter().zip(&other.0).all(|(a, b)| a <= b)
    }

    pub fn is_nonnegative(&self) -> bool {
        self.0.iter().all(|&x| x >= 0)
    }

    pub fn total_degree(&self) -> i64 {
        self.0.iter().sum()
    }

    fn check_rank(&self, other: &Self) -> Result<(), LatticeError> {
        if self.0.len() != other.0.len() {
            return Err(LatticeError::DimensionMismatch { expected: self.0.len(), got: other.0.len() });
        }
        Ok(())
    }
}

impl fmt::Debug for RelativeClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self)
    }
}

impl fmt::Display for RelativeClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (i, x) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{x}")?;
        }
        write!(f, ")")
    }
}

impl Add for &RelativeClass {
    type Output = RelativeClass;
    fn add(self, o: &RelativeClass) -> RelativeClass {
        assert_eq!(self.0.len(), o.0.len(), "rank mismatch");
        RelativeClass(self.0.iter().zip(&o.0).map(|(a, b)| a + b).collect())
    }
}

impl Sub for &RelativeClass {
    type Output = RelativeClass;
    fn sub(self, o: &RelativeClass) -> RelativeClass {
        assert_eq!(self.0.len(), o.0.len(), "rank mismatch");
        RelativeClass(self.0.iter().zip(&o.0).map(|(a, b)| a - b).collect())
    }
}

impl Neg for &RelativeClass {
    type Output = RelativeClass;
    fn neg(self) -> RelativeClass {
        RelativeClass(self.0.iter().map(|a| -a).collect())
    }
}

/// Integer lattice with a boundary map to Z^2.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ChargeLattice {
    boundary: Vec<[i64; 2]>,
    labels: Vec<Option<String>>,
    convention: SignConvention,
}

impl ChargeLattice {
    /// `boundary[i]` is the image of the i-th generator in Z^2.
    pub fn new(boundary: Vec<[i64; 2]>) -> Result<Self, LatticeError> {
        if boundary.is_empty() {
            return Err(LatticeError::EmptyLattice);
        }
        let n = boundary.len();
        Ok(ChargeLattice { boundary, labels: vec![None; n], convention: SignConvention::Plus })
    }

    /// Rank-2 lattice with the identity boundary map.
    pub fn standard() -> Self {
        Self::new(vec![[1, 0], [0, 1]]).unwrap()
    }

    pub fn with_labels(mut self, labels: Vec<Option<String>>) -> Self {
        assert_eq!(labels.len(), self.boundary.len());
        self.labels = labels;
        self
    }

    pub fn with_convention(mut self, convention: SignConvention) -> Self {
        self.convention = convention;
        self
    }

    pub fn rank(&self) -> usize {
        self.boundary.len()
    }

    pub fn convention(&self) -> SignConvention {
        self.convention
    }

    pub fn labels(&self) -> &[Option<String>] {
        &self.labels
    }

    pub fn boundary_columns(&self) -> &[[i64; 2]] {
        &self.boundary
    }

    pub fn class(&self, coords: &[i64]) -> Result<RelativeClass, LatticeError> {
        self.check(&RelativeClass::new(coords.iter().copied()))
    }

    fn check(&self, c: &RelativeClass) -> Result<RelativeClass, LatticeError> {
        if c.rank() != self.rank() {
            return Err(LatticeError::DimensionMismatch { expected: self.rank(), got: c.rank() });
        }
        Ok(c.clone())
    }

    pub fn boundary(&self, c: &RelativeClass) -> [i64; 2] {
        debug_assert_eq!(c.rank(), self.rank());
        let mut out = [0i64; 2];
        for (x, col) in c.coords().iter().zip(&self.boundary) {
            out[0] += x * col[0];
            out[1] += x * col[1];
        }
        out
    }

    /// det(d a, d b).
    pub fn pairing(&self, a: &RelativeClass, b: &RelativeClass) -> Result<i64, LatticeError> {
        self.check(a)?;
        self.check(b)?;
        a.check_rank(b)?;
        let (x, y) = (self.boundary(a), self.boundary(b));
        Ok(x[0] * y[1] - x[1] * y[0])
    }

    /// Exponent `e` with theta_g(z^{g'}) = z^{g'} f^e, under the lattice's sign convention.
    pub fn transform_exponent(&self, moved: &RelativeClass, wall: &RelativeClass) -> i64 {
        let (x, y) = (self.boundary(moved), self.boundary(wall));
        self.convention.sign() * (x[0] * y[1] - x[1] * y[0])
    }

    /// Same as `transform_exponent` for a Z^2 vector that need not be a lattice class.
    pub fn transform_exponent_vec(&self, moved: [i64; 2], wall: &RelativeClass) -> i64 {
        let y = self.boundary(wall);
        self.convention.sign() * (moved[0] * y[1] - moved[1] * y[0])
    }
}

/// Exact complex number with rational parts.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct GaussianRational {
    pub re: Rat,
    pub im: Rat,
}

impl GaussianRational {
    pub fn new(re: Rat, im: Rat) -> Self {
        GaussianRational { re, im }
    }

    pub fn from_ints(re: i64, im: i64) -> Self {
        Self::new(int(re), int(im))
    }

    pub fn zero() -> Self {
        Self::from_ints(0, 0)
    }

    pub fn one() -> Self {
        Self::from_ints(1, 0)
    }

    pub fn i() -> Self {
        Self::from_ints(0, 1)
    }

    pub fn is_zero(&self) -> bool {
        self.re.is_zero() && self.im.is_zero()
    }

    pub fn conj(&self) -> Self {
        Self::new(self.re.clone(), -self.im.clone())
    }

    pub fn norm_sqr(&self) -> Rat {
        &self.re * &self.re + &self.im * &self.im
    }

    /// re1*im2 - im1*re2; positive when `other` is counterclockwise of `self`.
    pub fn cross(&self, other: &Self) -> Rat {
        &self.re * &other.im - &self.im * &other.re
    }

    pub fn dot(&self, other: &Self) -> Rat {
        &self.re * &other.re + &self.im * &other.im
    }

    pub fn scale(&self, r: &Rat) -> Self {
        Self::new(&self.re * r, &self.im * r)
    }

    pub fn inv(&self) -> Option<Self> {
        let n = self.norm_sqr();
        if n.is_zero() {
            return None;
        }
        Some(Self::new(&self.re / &n, -&self.im / &n))
    }

    /// Same ray from the origin (both nonzero, positive multiples).
    pub fn same_phase(&self, other: &Self) -> bool {
        !self.is_zero() && !other.is_zero() && self.cross(other).is_zero() && self.dot(other).is_positive()
    }

    /// Lies on the open ray through `dir`.
    pub fn is_positive_multiple_of(&self, dir: &Self) -> bool {
        self.same_phase(dir)
    }

    pub fn to_f64(&self) -> (f64, f64) {
        (rat_to_f64(&self.re), rat_to_f64(&self.im))
    }
}

pub fn rat_to_f64(r: &Rat) -> f64 {
    use num_traits::ToPrimitive;
    r.to_f64().unwrap_or(f64::NAN)
}

impl fmt::Debug for GaussianRational {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self)
    }
}

impl fmt::Display for GaussianRational {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}{}{}i", self.re, if self.im.is_negative() { "-" } else { "+" }, self.im.abs())
    }
}

impl Add for &GaussianRational {
    type Output = GaussianRational;
    fn add(self, o: &GaussianRational) -> GaussianRational {
        GaussianRational::new(&self.re + &o.re, &self.im + &o.im)
    }
}

impl Sub for &GaussianRational {
    type Output = GaussianRational;
    fn sub(self, o: &GaussianRational) -> GaussianRational {
        GaussianRational::new(&self.re - &o.re, &self.im - &o.im)
    }
}

impl Mul for &GaussianRational {
    type Output = GaussianRational;
    fn mul(self, o: &GaussianRational) -> GaussianRational {
        GaussianRational::new(&self.re * &o.re - &self.im * &o.im, &self.re * &o.im + &self.im * &o.re)
    }
}

impl Neg for &GaussianRational {
    type Output = GaussianRational;
    fn neg(self) -> GaussianRational {
        GaussianRational::new(-&self.re, -&self.im)
    }
}

/// Point of the affine chart, Q^2.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Point {
    pub x: Rat,
    pub y: Rat,
}

impl Point {
    pub fn new(x: Rat, y: Rat) -> Self {
        Point { x, y }
    }

    pub fn from_ints(x: i64, y: i64) -> Self {
        Point::new(int(x), int(y))
    }

    pub fn origin() -> Self {
        Self::from_ints(0, 0)
    }

    /// The point viewed as the complex number x + iy.
    pub fn as_complex(&self) -> GaussianRational {
        GaussianRational::new(self.x.clone(), self.y.clone())
    }

    pub fn from_complex(z: &GaussianRational) -> Self {
        Point::new(z.re.clone(), z.im.clone())
    }

    pub fn add_scaled(&self, dir: &Point, t: &Rat) -> Point {
        Point::new(&self.x + &dir.x * t, &self.y + &dir.y * t)
    }

    pub fn sub(&self, o: &Point) -> Point {
        Point::new(&self.x - &o.x, &self.y - &o.y)
    }

    pub fn cross(&self, o: &Point) -> Rat {
        &self.x * &o.y - &self.y * &o.x
    }

    pub fn dot(&self, o: &Point) -> Rat {
        &self.x * &o.x + &self.y * &o.y
    }

    pub fn is_zero(&self) -> bool {
        self.x.is_zero() && self.y.is_zero()
    }

    pub fn linf_dist(&self, o: &Point) -> Rat {
        let dx = (&self.x - &o.x).abs();
        let dy = (&self.y - &o.y).abs();
        if dx > dy {
            dx
        } else {
            dy
        }
    }

    pub fn to_f64(&self) -> (f64, f64) {
        (rat_to_f64(&self.x), rat_to_f64(&self.y))
    }
}

impl fmt::Debug for Point {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self)
    }
}

impl fmt::Display for Point {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.x, self.y)
    }
}

/// Affine central charge: Z_i(u) = base_i + grad_i[0] u.x + grad_i[1] u.y.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CentralCharge {
    base: Vec<GaussianRational>,
    gradient: Vec<[GaussianRational; 2]>,
}

impl CentralCharge {
    pub fn new(base: Vec<GaussianRational>, gradient: Vec<[GaussianRational; 2]>) -> Result<Self, LatticeError> {
        if base.len() != gradient.len() {
            return Err(LatticeError::DimensionMismatch { expected: base.len(), got: gradient.len() });
        }
        Ok(CentralCharge { base, gradient })
    }

    pub fn constant(values: Vec<GaussianRational>) -> Self {
        let n = values.len();
        CentralCharge { base: values, gradient: vec![[GaussianRational::zero(), GaussianRational::zero()]; n] }
    }

    /// Z_i(u) = b_i + g_i u with u read as a complex number.
    pub fn holomorphic(b: Vec<GaussianRational>, g: Vec<GaussianRational>) -> Result<Self, LatticeError> {
        let grad = g.iter().map(|gi| [gi.clone(), gi * &GaussianRational::i()]).collect();
        Self::new(b, grad)
    }

    pub fn rank(&self) -> usize {
        self.base.len()
    }

    pub fn base_values(&self) -> &[GaussianRational] {
        &self.base
    }

    pub fn gradients(&self) -> &[[GaussianRational; 2]] {
        &self.gradient
    }

    pub fn generator_value(&self, i: usize, u: &Point) -> GaussianRational {
        let g = &self.gradient[i];
        let mut z = self.base[i].clone();
        z = &z + &g[0].scale(&u.x);
        &z + &g[1].scale(&u.y)
    }

    pub fn values_at(&self, u: &Point) -> Vec<GaussianRational> {
        (0..self.rank()).map(|i| self.generator_value(i, u)).collect()
    }

    pub fn charge(&self, c: &RelativeClass, u: &Point) -> GaussianRational {
        let mut z = GaussianRational::zero();
        for (i, &k) in c.coords().iter().enumerate() {
            if k != 0 {
                z = &z + &self.generator_value(i, u).scale(&int(k));
            }
        }
        z
    }

    /// Complex derivative g_i when Z_i is holomorphic in u = x + iy.
    pub fn complex_gradient(&self, i: usize) -> Result<GaussianRational, LatticeError> {
        let [gx, gy] = &self.gradient[i];
        if *gy != gx * &GaussianRational::i() {
            return Err(LatticeError::NotHolomorphic(i));
        }
        Ok(gx.clone())
    }

    pub fn class_gradient(&self, c: &RelativeClass) -> Result<GaussianRational, LatticeError> {
        let mut g = GaussianRational::zero();
        for (i, &k) in c.coords().iter().enumerate() {
            if k != 0 {
                g = &g + &self.complex_gradient(i)?.scale(&int(k));
            }
        }
        Ok(g)
    }

    /// The charge multiplied by a fixed complex number (used to rotate phases).
    pub fn multiplied(&self, w: &GaussianRational) -> Self {
        CentralCharge {
            base: self.base.iter().map(|b| b * w).collect(),
            gradient: self.gradient.iter().map(|[a, b]| [a * w, b * w]).collect(),
        }
    }
}

/// Result of comparing arguments in [0, 2pi).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PhaseOrdering {
    Less,
    EqualPhase,
    Greater,
}

fn half_plane(z: &GaussianRational) -> u8 {
    if z.im.is_positive() || (z.im.is_zero() && z.re.is_positive()) {
        0
    } else {
        1
    }
}

pub fn phase_compare(z1: &GaussianRational, z2: &GaussianRational) -> Result<PhaseOrdering, LatticeError> {
    if z1.is_zero() || z2.is_zero() {
        return Err(LatticeError::ZeroCharge);
    }
    let (h1, h2) = (half_plane(z1), half_plane(z2));
    Ok(match h1.cmp(&h2) {
        Ordering::Less => PhaseOrdering::Less,
        Ordering::Greater => PhaseOrdering::Greater,
        Ordering::Equal => {
            let c = z1.cross(z2);
            if c.is_positive() {
                PhaseOrdering::Less
            } else if c.is_negative() {
                PhaseOrdering::Greater
            } else {
                PhaseOrdering::EqualPhase
            }
        }
    })
}

/// Closed (or partly open) sector of angle < pi, or a single ray when lo and hi agree.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Sector {
    lo: GaussianRational,
    hi: GaussianRational,
    lo_open: bool,
    hi_open: bool,
}

impl Sector {
    pub fn new(lo: GaussianRational, hi: GaussianRational, lo_open: bool, hi_open: bool) -> Result<Self, LatticeError> {
        if lo.is_zero() || hi.is_zero() {
            return Err(LatticeError::ZeroCharge);
        }
        let c = lo.cross(&hi);
        if c.is_negative() || (c.is_zero() && !lo.same_phase(&hi)) {
            return Err(LatticeError::SectorTooWide);
        }
        Ok(Sector { lo, hi, lo_open, hi_open })
    }

    pub fn closed(lo: GaussianRational, hi: GaussianRational) -> Result<Self, LatticeError> {
        Self::new(lo, hi, false, false)
    }

    pub fn ray(dir: GaussianRational) -> Result<Self, LatticeError> {
        Self::new(dir.clone(), dir, false, false)
    }

    pub fn lo(&self) -> &GaussianRational {
        &self.lo
    }

    pub fn hi(&self) -> &GaussianRational {
        &self.hi
    }

    pub fn is_ray(&self) -> bool {
        self.lo.cross(&self.hi).is_zero()
    }

    pub fn contains(&self, z: &GaussianRational) -> bool {
        if z.is_zero() {
            return false;
        }
        if self.is_ray() {
            return !self.lo_open && !self.hi_open && z.same_phase(&self.lo);
        }
        let a = self.lo.cross(z);
        let b = z.cross(&self.hi);
        let lo_ok = if self.lo_open { a.is_positive() } else { !a.is_negative() };
        let hi_ok = if self.hi_open { b.is_positive() } else { !b.is_negative() };
        // a >= 0 and b >= 0 already exclude the opposite cone when the angle is < pi,
        // except for -lo / -hi on the boundary lines, which the dot test removes.
        lo_ok && hi_ok && (a.is_positive() || self.lo.dot(z).is_positive()) && (b.is_positive() || self.hi.dot(z).is_positive())
    }

    /// Additive functional, strictly positive on nonzero points of the closed sector.
    pub fn functional(&self, z: &GaussianRational) -> Rat {
        if self.is_ray() {
            self.lo.dot(z)
        } else {
            self.lo.cross(z) + z.cross(&self.hi)
        }
    }

    /// Angular order inside the sector (clockwise-most first).
    pub fn angle_cmp(&self, a: &GaussianRational, b: &GaussianRational) -> Ordering {
        let c = a.cross(b);
        if c.is_positive() {
            Ordering::Less
        } else if c.is_negative() {
            Ordering::Greater
        } else {
            Ordering::Equal
        }
    }
}

/// Nonnegative integer combinations of `generators` with |Z|^2 < lambda^2, sorted by (phase, |Z|^2).
pub fn sublevel_classes(
    charge: &CentralCharge,
    u: &Point,
    sector: &Sector,
    lambda: &Rat,
    generators: &[RelativeClass],
) -> Result<Vec<RelativeClass>, LatticeError> {
    let rank = charge.rank();
    let mut zs = Vec::with_capacity(generators.len());
    let mut ell = Vec::with_capacity(generators.len());
    for (i, g) in generators.iter().enumerate() {
        if g.rank() != rank {
            return Err(LatticeError::DimensionMismatch { expected: rank, got: g.rank() });
        }
        let z = charge.charge(g, u);
        if z.is_zero() {
            return Err(LatticeError::ZeroGenerator(i));
        }
        if !sector.contains(&z) {
            return Err(LatticeError::GeneratorOutsideSector(i));
        }
        ell.push(sector.functional(&z));
        zs.push(z);
    }
    // l(z)^2 <= |z|^2 (|lo| + |hi|)^2 <= 2 |z|^2 (|lo|^2 + |hi|^2)
    let bound = lambda * lambda * int(2) * (sector.lo.norm_sqr() + sector.hi.norm_sqr());
    let lam2 = lambda * lambda;
    let mut found = std::collections::BTreeSet::new();
    let mut coeffs = vec![0i64; generators.len()];
    fn dfs(
        i: usize,
        acc_l: &Rat,
        acc_z: &GaussianRational,
        coeffs: &mut Vec<i64>,
        ctx: (&[GaussianRational], &[Rat], &Rat, &Rat, &[RelativeClass], usize),
        found: &mut std::collections::BTreeSet<RelativeClass>,
    ) {
        let (zs, ell, bound, lam2, gens, rank) = ctx;
        if i == zs.len() {
            if coeffs.iter().any(|&c| c != 0) && acc_z.norm_sqr() < *lam2 {
                let mut c = RelativeClass::zero(rank);
                for (k, g) in coeffs.iter().zip(gens) {
                    if *k != 0 {
                        c = &c + &g.scale(*k);
                    }
                }
                found.insert(c);
            }
            return;
        }
        let mut l = acc_l.clone();
        let mut z = acc_z.clone();
        loop {
            if &(&l * &l) >= bound && !l.is_zero() {
                break;
            }
            dfs(i + 1, &l, &z, coeffs, ctx, found);
            coeffs[i] += 1;
            l = &l + &ell[i];
            z = &z + &zs[i];
        }
        coeffs[i] = 0;
    }
    dfs(0, &Rat::zero(), &GaussianRational::zero(), &mut coeffs, (&zs, &ell, &bound, &lam2, generators, rank), &mut found);
    let mut out: Vec<(GaussianRational, RelativeClass)> = found.into_iter().map(|c| (charge.charge(&c, u), c)).collect();
    out.sort_by(|(za, ca), (zb, cb)| {
        sector
            .angle_cmp(za, zb)
            .then_with(|| za.norm_sqr().cmp(&zb.norm_sqr()))
            .then_with(|| ca.cmp(cb))
    });
    Ok(out.into_iter().map(|(_, c)| c).collect())
}
