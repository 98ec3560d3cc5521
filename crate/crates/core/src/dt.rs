//! Quadratic refinement and integer invariants from slab functions.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use num_bigint::BigInt;
use num_traits::{One, Zero};
use thiserror::Error;

use crate::lattice::{int, ChargeLattice, Rat, RelativeClass};
use crate::scattering::ScatteringDiagram;
use crate::series::{class_to_field, rat_to_string, SeriesError, SlabFunction};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum DtError {
    #[error(transparent)]
    Series(#[from] SeriesError),
    #[error("missing invariant for multiple {0}")]
    MissingDivisor(u64),
    #[error("multiple must be positive")]
    ZeroMultiple,
    #[error("slab must start with constant term 1")]
    BadConstant,
}

/// c(v) = (-1)^{v1 v2 + v1 + v2}.
pub fn refine_vec(v: [i64; 2]) -> i64 {
    let e = v[0].rem_euclid(2) * v[1].rem_euclid(2) + v[0] + v[1];
    if e.rem_euclid(2) == 0 {
        1
    } else {
        -1
    }
}

/// Quadratic refinement of a class, through its boundary.
pub fn refine(lat: &ChargeLattice, g: &RelativeClass) -> i64 {
    refine_vec(lat.boundary(g))
}

/// Truncated univariate series in x, index = power.
#[derive(Debug, Clone, PartialEq)]
struct Uni(Vec<Rat>);

impl Uni {
    fn one(n: usize) -> Self {
        let mut v = vec![Rat::zero(); n + 1];
        v[0] = Rat::one();
        Uni(v)
    }

    fn mul(&self, o: &Uni) -> Uni {
        let n = self.0.len();
        let mut out = vec![Rat::zero(); n];
        for (i, a) in self.0.iter().enumerate() {
            if a.is_zero() {
                continue;
            }
            for (j, b) in o.0.iter().enumerate().take(n - i) {
                if !b.is_zero() {
                    out[i + j] += a * b;
                }
            }
        }
        Uni(out)
    }

    /// (1 - c x^m)^e for rational e.
    fn binomial(n: usize, c: i64, m: usize, e: &Rat) -> Uni {
        let mut u = Uni(vec![Rat::zero(); n + 1]);
        let mut coef = Rat::one();
        let mut j = 0usize;
        while j * m <= n {
            u.0[j * m] = coef.clone();
            // binom(e, j+1) (-c)^{j+1} from binom(e, j) (-c)^j
            coef = coef * (e - int(j as i64)) / int(j as i64 + 1) * int(-c);
            j += 1;
        }
        u
    }
}

/// Solve f = prod_d (1 - c(d g) x^d)^{d Omega(d)} order by order, for d = 1..=n.
pub fn dt_from_coefficients(lat: &ChargeLattice, dir: &RelativeClass, coeffs: &BTreeMap<u64, Rat>, n: u64) -> BTreeMap<u64, Rat> {
    let n = n as usize;
    let mut g = Uni::one(n);
    for (d, c) in coeffs {
        if (*d as usize) <= n && *d > 0 {
            g.0[*d as usize] = c.clone();
        }
    }
    let mut out = BTreeMap::new();
    for d in 1..=n {
        let a = g.0[d].clone();
        let c = refine(lat, &dir.scale(d as i64));
        let omega = -&a / int(d as i64 * c);
        if !omega.is_zero() {
            let e = &omega * int(d as i64);
            g = g.mul(&Uni::binomial(n, c, d, &(-e)));
        }
        out.insert(d as u64, omega);
    }
    out
}

/// Integer-invariant exponents of a slab function, for every surviving multiple.
pub fn slab_to_dt(f: &SlabFunction) -> BTreeMap<u64, Rat> {
    let lat = f.ctx().lattice();
    dt_from_coefficients(lat, f.direction(), &f.coefficients(), f.max_multiple())
}

fn multiple_cover_impl(lat: &ChargeLattice, g: &RelativeClass, omega: &BTreeMap<u64, Rat>, d: u64, power_d: bool) -> Result<Rat, DtError> {
    if d == 0 {
        return Err(DtError::ZeroMultiple);
    }
    let mut s = Rat::zero();
    for k in 1..=d {
        if d % k != 0 {
            continue;
        }
        let m = d / k;
        let w = omega.get(&m).ok_or(DtError::MissingDivisor(m))?;
        let c = refine(lat, &g.scale(m as i64));
        let sign = if c == 1 || (if power_d { d } else { k }) % 2 == 0 { 1 } else { -1 };
        s += w * int(sign) / int((k * k) as i64);
    }
    Ok(-s)
}

/// Omega-tilde(d g) = - sum_{k | d} c((d/k) g)^d Omega((d/k) g) / k^2.
pub fn multiple_cover(lat: &ChargeLattice, g: &RelativeClass, omega: &BTreeMap<u64, Rat>, d: u64) -> Result<Rat, DtError> {
    multiple_cover_impl(lat, g, omega, d, true)
}

/// Same sum with exponent k on the sign (the reading obtained by expanding the product formula).
pub fn multiple_cover_k(lat: &ChargeLattice, g: &RelativeClass, omega: &BTreeMap<u64, Rat>, d: u64) -> Result<Rat, DtError> {
    multiple_cover_impl(lat, g, omega, d, false)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InvariantRow {
    pub class: RelativeClass,
    pub chamber: usize,
    pub omega_tilde: Rat,
    pub omega: Rat,
}

impl InvariantRow {
    pub fn is_integral(&self) -> bool {
        self.omega.is_integer()
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct InvariantTable {
    pub rows: Vec<InvariantRow>,
}

impl InvariantTable {
    /// One block of rows per wall (chamber id = wall index), rows where Omega != 0.
    pub fn from_diagram(d: &ScatteringDiagram, d_cap: u64) -> Result<Self, DtError> {
        let lat = d.lattice();
        let mut rows = Vec::new();
        for (i, w) in d.walls().iter().enumerate() {
            let ctx = d.context_at(&w.base).map_err(|_| DtError::BadConstant)?;
            let n = (1..=d_cap).take_while(|m| ctx.admits(&w.class.scale(*m as i64))).count() as u64;
            let omega = dt_from_coefficients(lat, &w.class, &w.slab, n);
            for (m, o) in &omega {
                let ot = multiple_cover(lat, &w.class, &omega, *m)?;
                if !o.is_zero() {
                    rows.push(InvariantRow { class: w.class.scale(*m as i64), chamber: i, omega_tilde: ot, omega: o.clone() });
                }
            }
        }
        Ok(InvariantTable { rows })
    }

    /// TSV: class, chamber, Omega-tilde, Omega, integral flag.
    pub fn to_tsv(&self) -> String {
        let mut s = String::from("class\tchamber\tomega_tilde\tomega\tintegral\n");
        for r in &self.rows {
            let _ = writeln!(
                s,
                "{}\t{}\t{}\t{}\t{}",
                class_to_field(&r.class),
                r.chamber,
                rat_to_string(&r.omega_tilde),
                rat_to_string(&r.omega),
                if r.is_integral() { "yes" } else { "no" }
            );
        }
        s
    }

    /// Pairs (g, -g) in the same chamber whose Omega-tilde differ.
    pub fn reality_violations(&self) -> Vec<(RelativeClass, usize)> {
        let map: BTreeMap<(RelativeClass, usize), &Rat> = self.rows.iter().map(|r| ((r.class.clone(), r.chamber), &r.omega_tilde)).collect();
        let mut out = Vec::new();
        for ((c, ch), v) in &map {
            if let Some(w) = map.get(&(-c, *ch)) {
                if v != w {
                    out.push((c.clone(), *ch));
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct IntegralityReport {
    pub non_integral: Vec<(RelativeClass, usize, Rat)>,
    /// (primitive class, chamber) -> largest multiple with Omega != 0
    pub support: BTreeMap<(RelativeClass, usize), u64>,
}

impl IntegralityReport {
    pub fn is_clean(&self) -> bool {
        self.non_integral.is_empty()
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for (c, ch, o) in &self.non_integral {
            let _ = writeln!(s, "non-integral\t{}\t{}\t{}", class_to_field(c), ch, rat_to_string(o));
        }
        for ((c, ch), d) in &self.support {
            let _ = writeln!(s, "support\t{}\t{}\t{}", class_to_field(c), ch, d);
        }
        s
    }
}

/// Reports non-integer Omega and the support in d; never asserts integrality.
pub fn integrality_report(table: &InvariantTable, d_max: u64) -> IntegralityReport {
    let mut r = IntegralityReport::default();
    for row in &table.rows {
        let Some((p, d)) = row.class.primitive() else { continue };
        if d > d_max {
            continue;
        }
        if !row.is_integral() {
            r.non_integral.push((row.class.clone(), row.chamber, row.omega.clone()));
        }
        if !row.omega.is_zero() {
            let e = r.support.entry((p, row.chamber)).or_insert(0);
            *e = (*e).max(d);
        }
    }
    r
}

/// The multiple-cover numbers (-1)^{d-1}/d^2.
pub fn focus_focus_count(d: u64) -> Rat {
    let s: i64 = if d % 2 == 1 { 1 } else { -1 };
    Rat::new(BigInt::from(s), BigInt::from(d) * BigInt::from(d))
}

/// Whether every Omega in the map is an integer.
pub fn all_integral(omega: &BTreeMap<u64, Rat>) -> bool {
    omega.values().all(|o| o.is_integer())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::GaussianRational;
    use crate::series::{counts_from_slab, slab_from_counts, SeriesContext};
    use std::sync::Arc;

    fn ctx(n: i64) -> Arc<SeriesContext> {
        let lat = Arc::new(ChargeLattice::standard());
        Arc::new(SeriesContext::new(lat, vec![GaussianRational::one(), GaussianRational::i()], int(n) + Rat::new(1.into(), 2.into())).unwrap())
    }

    #[test]
    fn refine_examples() {
        assert_eq!(refine_vec([1, 0]), -1);
        assert_eq!(refine_vec([0, 0]), 1);
        assert_eq!(refine_vec([1, 1]), -1);
        assert_eq!(refine_vec([2, 0]), 1);
        assert_eq!(refine_vec([-3, 5]), -1);
    }

    #[test]
    fn focus_focus_dictionary() {
        let c = ctx(8);
        let x = RelativeClass::new([1, 0]);
        let f = SlabFunction::from_coefficients(&c, x.clone(), &BTreeMap::from([(1, int(1))])).unwrap();
        let om = slab_to_dt(&f);
        assert_eq!(om.len(), 8);
        assert_eq!(om[&1], int(1));
        assert!((2..=8).all(|d| om[&d].is_zero()));
        for d in 1..=8 {
            assert_eq!(multiple_cover(c.lattice(), &x, &om, d).unwrap(), focus_focus_count(d));
        }
        let sq = SlabFunction::from_coefficients(&c, x.clone(), &BTreeMap::from([(1, int(2)), (2, int(1))])).unwrap();
        let om = slab_to_dt(&sq);
        assert_eq!(om[&1], int(2));
        assert!((2..=8).all(|d| om[&d].is_zero()));
        assert!(slab_to_dt(&SlabFunction::trivial(&c, x).unwrap()).values().all(|v| v.is_zero()));
    }

    #[test]
    fn inverse_of_slab_from_counts() {
        let c = ctx(6);
        let g = RelativeClass::new([1, 1]);
        let om = BTreeMap::from([(1, int(3)), (2, int(-1)), (3, int(5))]);
        let om_full: BTreeMap<u64, Rat> = (1..=6).map(|d| (d, om.get(&d).cloned().unwrap_or_else(Rat::zero))).collect();
        let tilde_full: BTreeMap<u64, Rat> = (1..=3).map(|d| (d, multiple_cover(c.lattice(), &g, &om_full, d).unwrap())).collect();
        let f = slab_from_counts(&c, &tilde_full, &g).unwrap();
        let back = slab_to_dt(&f);
        for d in 1..=3 {
            assert_eq!(back[&d], om_full[&d]);
        }
        assert_eq!(multiple_cover(c.lattice(), &g, &om, 4).unwrap_err(), DtError::MissingDivisor(4));
        assert_eq!(counts_from_slab(&f).unwrap()[&1], tilde_full[&1]);
    }

    #[test]
    fn report_flags_non_integers() {
        let t = InvariantTable {
            rows: vec![
                InvariantRow { class: RelativeClass::new([1, 0]), chamber: 0, omega_tilde: int(1), omega: int(1) },
                InvariantRow { class: RelativeClass::new([2, 0]), chamber: 0, omega_tilde: int(0), omega: Rat::new(1.into(), 2.into()) },
            ],
        };
        let r = integrality_report(&t, 8);
        assert!(!r.is_clean());
        assert_eq!(r.support[&(RelativeClass::new([1, 0]), 0)], 2);
        assert!(t.to_tsv().contains("2,0\t0\t0/1\t1/2\tno"));
    }
}
