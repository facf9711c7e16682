//! Truncated polynomial rings over ℚ in named even-degree generators.
//!
//! A [`GradedRing`] fixes the generators (with their cohomological degrees) and a
//! truncation degree; a [`GradedPoly`] is a sparse map from exponent vectors to
//! nonzero rationals. Every generator has even degree, so the ring is strictly
//! commutative. Monomials above the truncation degree are never stored.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};
use thiserror::Error;

use crate::expr::{self, Algebra, ExprError};
use crate::rational;

/// Truncation used when a caller has no better choice: a 10-manifold plus slack.
pub const DEFAULT_TRUNCATION: u32 = 16;

#[derive(Clone, Debug, Error, PartialEq, Eq)]
pub enum RingError {
    #[error("polynomials live in different rings")]
    RingMismatch,
    #[error("generator `{name}` has degree {degree}; degrees must be even and at least 2")]
    BadDegree { name: String, degree: u32 },
    #[error("generator `{0}` declared twice")]
    DuplicateGenerator(String),
    #[error("invalid generator name `{0}`")]
    BadName(String),
    #[error("unknown generator `{0}`")]
    UnknownGenerator(String),
    #[error("degree-0 part is {0}, not 1; the polynomial is not an invertible unit")]
    NotUnit(String),
    #[error("substituting into `{generator}` (degree {degree}) would lower the grading")]
    GradingViolation { generator: String, degree: u32 },
    #[error("{0}")]
    Parse(#[from] ExprError),
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Generator {
    pub name: String,
    pub degree: u32,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct GradedRing {
    generators: Vec<Generator>,
    truncation: u32,
}

pub(crate) fn valid_identifier(name: &str) -> bool {
    let mut chars = name.chars();
    matches!(chars.next(), Some(c) if c.is_ascii_alphabetic() || c == '_')
        && chars.all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '.')
}

impl GradedRing {
    pub fn new<S: Into<String>>(
        generators: impl IntoIterator<Item = (S, u32)>,
        truncation: u32,
    ) -> Result<Arc<Self>, RingError> {
        let mut gens: Vec<Generator> = Vec::new();
        for (name, degree) in generators {
            let name = name.into();
            if !valid_identifier(&name) {
                return Err(RingError::BadName(name));
            }
            if degree < 2 || degree % 2 != 0 {
                return Err(RingError::BadDegree { name, degree });
            }
            if gens.iter().any(|g| g.name == name) {
                return Err(RingError::DuplicateGenerator(name));
            }
            gens.push(Generator { name, degree });
        }
        Ok(Arc::new(Self {
            generators: gens,
            truncation,
        }))
    }

    pub fn generators(&self) -> &[Generator] {
        &self.generators
    }

    pub fn truncation(&self) -> u32 {
        self.truncation
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.generators.iter().position(|g| g.name == name)
    }

    pub fn monomial_degree(&self, exps: &[u32]) -> u32 {
        exps.iter()
            .zip(&self.generators)
            .map(|(e, g)| e * g.degree)
            .sum()
    }

    pub fn zero(self: &Arc<Self>) -> GradedPoly {
        GradedPoly {
            ring: Arc::clone(self),
            terms: BTreeMap::new(),
        }
    }

    pub fn one(self: &Arc<Self>) -> GradedPoly {
        self.constant(BigRational::one())
    }

    pub fn constant(self: &Arc<Self>, c: BigRational) -> GradedPoly {
        let mut p = self.zero();
        if !c.is_zero() {
            p.terms.insert(vec![0; self.generators.len()], c);
        }
        p
    }

    pub fn generator(self: &Arc<Self>, name: &str) -> Result<GradedPoly, RingError> {
        let i = self
            .index_of(name)
            .ok_or_else(|| RingError::UnknownGenerator(name.to_string()))?;
        let mut p = self.zero();
        if self.generators[i].degree <= self.truncation {
            let mut exps = vec![0; self.generators.len()];
            exps[i] = 1;
            p.terms.insert(exps, BigRational::one());
        }
        Ok(p)
    }

    /// Reads a polynomial such as `1/24*c1^4 - c4/6` in this ring's generators.
    pub fn parse(self: &Arc<Self>, text: &str) -> Result<GradedPoly, RingError> {
        let e = expr::parse(text)?;
        Ok(expr::evaluate(&self.zero(), &e)?)
    }
}

impl Algebra for GradedPoly {
    fn from_rational(&self, r: BigRational) -> Self {
        self.ring.constant(r)
    }
    fn variable(&self, name: &str, offset: usize) -> Result<Self, ExprError> {
        self.ring
            .generator(name)
            .map_err(|_| ExprError::new(offset, format!("unknown generator `{name}`")))
    }
    fn add(&self, a: Self, b: Self) -> Result<Self, ExprError> {
        Ok(&a + &b)
    }
    fn mul(&self, a: Self, b: Self, _: usize) -> Result<Self, ExprError> {
        Ok(&a * &b)
    }
    fn neg(&self, a: Self) -> Self {
        -&a
    }
    fn as_constant(&self, a: &Self) -> Option<BigRational> {
        a.as_constant()
    }
}

/// Sparse element of a [`GradedRing`].
#[derive(Clone, Debug)]
pub struct GradedPoly {
    ring: Arc<GradedRing>,
    terms: BTreeMap<Vec<u32>, BigRational>,
}

impl PartialEq for GradedPoly {
    fn eq(&self, other: &Self) -> bool {
        same_ring(&self.ring, &other.ring) && self.terms == other.terms
    }
}

impl Eq for GradedPoly {}

fn same_ring(a: &Arc<GradedRing>, b: &Arc<GradedRing>) -> bool {
    Arc::ptr_eq(a, b) || **a == **b
}

impl GradedPoly {
    pub fn ring(&self) -> &Arc<GradedRing> {
        &self.ring
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn terms(&self) -> impl Iterator<Item = (&[u32], &BigRational)> {
        self.terms.iter().map(|(k, v)| (k.as_slice(), v))
    }

    pub fn num_terms(&self) -> usize {
        self.terms.len()
    }

    /// Coefficient of the monomial with the given exponents (zero if absent).
    pub fn coefficient(&self, exps: &[u32]) -> BigRational {
        self.terms
            .get(exps)
            .cloned()
            .unwrap_or_else(BigRational::zero)
    }

    pub fn constant_term(&self) -> BigRational {
        self.coefficient(&vec![0; self.ring.generators.len()])
    }

    pub fn as_constant(&self) -> Option<BigRational> {
        match self.terms.len() {
            0 => Some(BigRational::zero()),
            1 => {
                let (k, v) = self.terms.iter().next().expect("one term");
                k.iter().all(|e| *e == 0).then(|| v.clone())
            }
            _ => None,
        }
    }

    /// Smallest total degree among the stored monomials, `None` for zero.
    pub fn min_degree(&self) -> Option<u32> {
        self.terms
            .keys()
            .map(|k| self.ring.monomial_degree(k))
            .min()
    }

    pub fn max_degree(&self) -> Option<u32> {
        self.terms
            .keys()
            .map(|k| self.ring.monomial_degree(k))
            .max()
    }

    /// True if every monomial has total degree exactly `d` (zero is homogeneous of every degree).
    pub fn is_homogeneous_of(&self, d: u32) -> bool {
        self.terms.keys().all(|k| self.ring.monomial_degree(k) == d)
    }

    fn insert(&mut self, exps: Vec<u32>, c: BigRational) {
        if c.is_zero() {
            return;
        }
        match self.terms.entry(exps) {
            std::collections::btree_map::Entry::Vacant(v) => {
                v.insert(c);
            }
            std::collections::btree_map::Entry::Occupied(mut o) => {
                *o.get_mut() += c;
                if o.get().is_zero() {
                    o.remove();
                }
            }
        }
    }

    fn check_ring(&self, other: &Self) -> Result<(), RingError> {
        if same_ring(&self.ring, &other.ring) {
            Ok(())
        } else {
            Err(RingError::RingMismatch)
        }
    }

    pub fn add(&self, other: &Self) -> Result<Self, RingError> {
        self.check_ring(other)?;
        let mut out = self.clone();
        for (k, v) in &other.terms {
            out.insert(k.clone(), v.clone());
        }
        Ok(out)
    }

    pub fn sub(&self, other: &Self) -> Result<Self, RingError> {
        self.add(&-other)
    }

    pub fn scale(&self, c: &BigRational) -> Self {
        let mut out = self.ring.zero();
        if c.is_zero() {
            return out;
        }
        out.terms = self.terms.iter().map(|(k, v)| (k.clone(), v * c)).collect();
        out
    }

    /// Product with every monomial above the truncation degree discarded.
    pub fn multiply(&self, other: &Self) -> Result<Self, RingError> {
        self.check_ring(other)?;
        let trunc = self.ring.truncation;
        let mut out = self.ring.zero();
        let rhs: Vec<(&Vec<u32>, &BigRational, u32)> = other
            .terms
            .iter()
            .map(|(k, v)| (k, v, self.ring.monomial_degree(k)))
            .collect();
        for (ka, va) in &self.terms {
            let da = self.ring.monomial_degree(ka);
            for (kb, vb, db) in &rhs {
                if da + db > trunc {
                    continue;
                }
                let exps: Vec<u32> = ka.iter().zip(kb.iter()).map(|(a, b)| a + b).collect();
                out.insert(exps, va * *vb);
            }
        }
        Ok(out)
    }

    pub fn pow(&self, k: u32) -> Self {
        let mut acc = self.ring.one();
        for _ in 0..k {
            acc = &acc * self;
        }
        acc
    }

    /// Inverse of a polynomial whose degree-0 part is 1, by the geometric series.
    pub fn invert_unit(&self) -> Result<Self, RingError> {
        let c0 = self.constant_term();
        if !c0.is_one() {
            return Err(RingError::NotUnit(rational::render(&c0)));
        }
        let one = self.ring.one();
        // Every generator has degree >= 2, so powers of the augmentation ideal vanish
        // past truncation / 2.
        let rest = self.sub(&one)?;
        let neg_rest = -&rest;
        let mut acc = one.clone();
        let mut power = one;
        for _ in 0..=self.ring.truncation / 2 {
            power = &power * &neg_rest;
            if power.is_zero() {
                break;
            }
            acc = &acc + &power;
        }
        Ok(acc)
    }

    /// Sum of the monomials of total degree exactly `d`.
    pub fn homogeneous_part(&self, d: u32) -> Self {
        let mut out = self.ring.zero();
        out.terms = self
            .terms
            .iter()
            .filter(|(k, _)| self.ring.monomial_degree(k) == d)
            .map(|(k, v)| (k.clone(), v.clone()))
            .collect();
        out
    }

    /// Simultaneous substitution of generators by polynomials of the same ring.
    pub fn substitute(&self, bindings: &BTreeMap<String, GradedPoly>) -> Result<Self, RingError> {
        self.map_into(&self.ring, bindings)
    }

    /// Ring homomorphism into `target`: bound generators go to their binding,
    /// unbound ones to the generator of the same name in `target`.
    pub fn map_into(
        &self,
        target: &Arc<GradedRing>,
        bindings: &BTreeMap<String, GradedPoly>,
    ) -> Result<Self, RingError> {
        for name in bindings.keys() {
            if self.ring.index_of(name).is_none() {
                return Err(RingError::UnknownGenerator(name.clone()));
            }
        }
        let mut images = Vec::with_capacity(self.ring.generators.len());
        for g in &self.ring.generators {
            let image = match bindings.get(&g.name) {
                Some(v) => {
                    if !same_ring(v.ring(), target) {
                        return Err(RingError::RingMismatch);
                    }
                    v.clone()
                }
                None => {
                    let j = target
                        .index_of(&g.name)
                        .ok_or_else(|| RingError::UnknownGenerator(g.name.clone()))?;
                    if target.generators[j].degree != g.degree {
                        return Err(RingError::GradingViolation {
                            generator: g.name.clone(),
                            degree: g.degree,
                        });
                    }
                    target.generator(&g.name)?
                }
            };
            if let Some(d) = image.min_degree() {
                if d < g.degree {
                    return Err(RingError::GradingViolation {
                        generator: g.name.clone(),
                        degree: g.degree,
                    });
                }
            }
            images.push(image);
        }

        let mut powers: Vec<Vec<GradedPoly>> = images
            .iter()
            .map(|p| vec![target.one(), p.clone()])
            .collect();
        let mut out = target.zero();
        for (exps, c) in &self.terms {
            let mut term = target.constant(c.clone());
            for (i, &e) in exps.iter().enumerate() {
                if e == 0 {
                    continue;
                }
                while powers[i].len() <= e as usize {
                    let next = powers[i].last().expect("nonempty") * &images[i];
                    powers[i].push(next);
                }
                term = &term * &powers[i][e as usize];
                if term.is_zero() {
                    break;
                }
            }
            out = &out + &term;
        }
        Ok(out)
    }

    /// Monomials in canonical order: ascending total degree, then lexicographically
    /// descending exponents in generator declaration order.
    pub fn sorted_terms(&self) -> Vec<(&Vec<u32>, &BigRational)> {
        let mut v: Vec<_> = self.terms.iter().collect();
        v.sort_by(|(a, _), (b, _)| {
            self.ring
                .monomial_degree(a)
                .cmp(&self.ring.monomial_degree(b))
                .then_with(|| b.cmp(a))
        });
        v
    }

    fn render_monomial(&self, exps: &[u32]) -> String {
        exps.iter()
            .zip(&self.ring.generators)
            .filter(|(e, _)| **e > 0)
            .map(|(e, g)| {
                if *e == 1 {
                    g.name.clone()
                } else {
                    format!("{}^{}", g.name, e)
                }
            })
            .collect::<Vec<_>>()
            .join("*")
    }

    fn render_with(&self, coeff_of: impl Fn(&BigRational) -> BigRational) -> String {
        let terms = self.sorted_terms();
        if terms.is_empty() {
            return "0".to_string();
        }
        let mut out = String::new();
        for (i, (exps, c)) in terms.into_iter().enumerate() {
            let c = coeff_of(c);
            let mono = self.render_monomial(exps);
            let neg = c.is_negative();
            let mag = c.abs();
            if i == 0 {
                if neg {
                    out.push('-');
                }
            } else {
                out.push_str(if neg { " - " } else { " + " });
            }
            match (mono.is_empty(), mag.is_one()) {
                (true, _) => out.push_str(&rational::render(&mag)),
                (false, true) => out.push_str(&mono),
                (false, false) => {
                    out.push_str(&rational::render(&mag));
                    out.push('*');
                    out.push_str(&mono);
                }
            }
        }
        out
    }

    /// Canonical text: sorted monomials with explicit `a/b` coefficients.
    pub fn render(&self) -> String {
        self.render_with(|c| c.clone())
    }

    /// The same polynomial written as `(integer combination)/D`, or plainly when `D = 1`.
    pub fn render_over_common_denominator(&self) -> String {
        let d = rational::common_denominator(self.terms.values());
        if d.is_one() {
            return self.render();
        }
        let dq = BigRational::from_integer(d.clone());
        format!("({})/{}", self.render_with(|c| c * &dq), d)
    }
}

impl fmt::Display for GradedPoly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.render())
    }
}

// Operator forms panic on ring mismatch; use the named methods for fallible code.

impl std::ops::Add for &GradedPoly {
    type Output = GradedPoly;
    fn add(self, rhs: &GradedPoly) -> GradedPoly {
        GradedPoly::add(self, rhs).expect("ring mismatch in +")
    }
}

impl std::ops::Sub for &GradedPoly {
    type Output = GradedPoly;
    fn sub(self, rhs: &GradedPoly) -> GradedPoly {
        GradedPoly::sub(self, rhs).expect("ring mismatch in -")
    }
}

impl std::ops::Mul for &GradedPoly {
    type Output = GradedPoly;
    fn mul(self, rhs: &GradedPoly) -> GradedPoly {
        self.multiply(rhs).expect("ring mismatch in *")
    }
}

impl std::ops::Neg for &GradedPoly {
    type Output = GradedPoly;
    fn neg(self) -> GradedPoly {
        let mut out = self.clone();
        for v in out.terms.values_mut() {
            *v = -v.clone();
        }
        out
    }
}

impl GradedPoly {
    /// Integer multiple, a convenience for the many integer coefficients in formulas.
    pub fn times(&self, n: i64) -> Self {
        self.scale(&BigRational::from_integer(BigInt::from(n)))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::{int, q};

    fn ring(gens: &[(&str, u32)], trunc: u32) -> Arc<GradedRing> {
        GradedRing::new(gens.iter().map(|(n, d)| (*n, *d)), trunc).unwrap()
    }

    #[test]
    fn binomial_square() {
        let r = ring(&[("x", 2)], 4);
        let x = r.generator("x").unwrap();
        let p = &r.one() + &x;
        assert_eq!((&p * &p).render(), "1 + 2*x + x^2");
        assert_eq!(&p * &r.one(), p);
    }

    #[test]
    fn truncation_kills_products() {
        let r = ring(&[("x", 4), ("y", 4)], 6);
        let x = r.generator("x").unwrap();
        let y = r.generator("y").unwrap();
        assert!((&x * &y).is_zero());
    }

    #[test]
    fn generator_above_truncation_is_zero() {
        let r = ring(&[("x", 8)], 6);
        assert!(r.generator("x").unwrap().is_zero());
    }

    #[test]
    fn invert_geometric_series() {
        let r = ring(&[("x", 4)], 8);
        let x = r.generator("x").unwrap();
        let inv = (&r.one() + &x).invert_unit().unwrap();
        assert_eq!(inv.render(), "1 - x + x^2");
        assert_eq!(r.one().invert_unit().unwrap(), r.one());
    }

    #[test]
    fn invert_total_chern_class() {
        let r = ring(&[("c1", 2), ("c2", 4)], 4);
        let c = r.parse("1 + c1 + c2").unwrap();
        let inv = c.invert_unit().unwrap();
        assert_eq!(inv, r.parse("1 - c1 + c1^2 - c2").unwrap());
        assert_eq!(&c * &inv, r.one());
    }

    #[test]
    fn non_units_are_rejected() {
        let r = ring(&[("x", 2)], 4);
        let p = r.parse("2 + x").unwrap();
        assert!(matches!(p.invert_unit(), Err(RingError::NotUnit(s)) if s == "2"));
        assert!(r.generator("x").unwrap().invert_unit().is_err());
    }

    #[test]
    fn homogeneous_parts() {
        let r = ring(&[("x", 2)], 4);
        let p = r.parse("1 + 2*x + x^2").unwrap();
        assert_eq!(p.homogeneous_part(2).render(), "2*x");
        assert_eq!(p.homogeneous_part(0), r.one());
        let sum = (0..=4).fold(r.zero(), |acc, d| &acc + &p.homogeneous_part(d));
        assert_eq!(sum, p);
    }

    #[test]
    fn substitution() {
        let r = ring(&[("x", 2), ("y", 2), ("z", 2)], 8);
        let p = r.parse("x^2").unwrap();
        let mut b = BTreeMap::new();
        b.insert("x".to_string(), r.parse("y + z").unwrap());
        assert_eq!(
            p.substitute(&b).unwrap(),
            r.parse("y^2 + 2*y*z + z^2").unwrap()
        );
        assert_eq!(p.substitute(&BTreeMap::new()).unwrap(), p);
    }

    #[test]
    fn anomaly_specialization() {
        let r = ring(&[("p1", 4), ("p2", 8), ("ch2", 4), ("ch4", 8)], 16);
        let dh7 = r.parse("ch4 - 1/48*p1*ch2 + 1/64*p1^2 - 1/48*p2").unwrap();
        let mut b = BTreeMap::new();
        b.insert("p1".to_string(), r.zero());
        b.insert("ch2".to_string(), r.zero());
        let reduced = dh7.substitute(&b).unwrap();
        assert_eq!(reduced, r.parse("ch4 - p2/48").unwrap());
        assert_eq!(reduced.render(), "-1/48*p2 + ch4");
    }

    #[test]
    fn grading_violation() {
        let r = ring(&[("x", 2), ("y", 4)], 8);
        let mut b = BTreeMap::new();
        b.insert("y".to_string(), r.generator("x").unwrap());
        assert!(matches!(
            r.generator("y").unwrap().substitute(&b),
            Err(RingError::GradingViolation { .. })
        ));
        b.insert("y".to_string(), r.parse("x^2 + x^3").unwrap());
        assert!(r.generator("y").unwrap().substitute(&b).is_ok());
    }

    #[test]
    fn ring_mismatch() {
        let a = ring(&[("x", 2)], 4);
        let b = ring(&[("x", 2)], 6);
        assert_eq!(a.one().multiply(&b.one()), Err(RingError::RingMismatch));
    }

    #[test]
    fn bad_generators() {
        assert!(GradedRing::new([("x", 3)], 8).is_err());
        assert!(GradedRing::new([("x", 0)], 8).is_err());
        assert!(GradedRing::new([("x", 2), ("x", 4)], 8).is_err());
        assert!(GradedRing::new([("2x", 2)], 8).is_err());
    }

    #[test]
    fn rendering() {
        let r = ring(&[("c1", 2), ("c2", 4), ("c3", 6), ("c4", 8)], 8);
        let ch4 = r
            .parse("(c1^4 - 4*c1^2*c2 + 4*c1*c3 + 2*c2^2 - 4*c4)/24")
            .unwrap();
        assert_eq!(
            ch4.render(),
            "1/24*c1^4 - 1/6*c1^2*c2 + 1/6*c1*c3 + 1/12*c2^2 - 1/6*c4"
        );
        assert_eq!(
            ch4.render_over_common_denominator(),
            "(c1^4 - 4*c1^2*c2 + 4*c1*c3 + 2*c2^2 - 4*c4)/24"
        );
        assert_eq!(r.parse(&ch4.render()).unwrap(), ch4);
        assert_eq!(r.zero().render(), "0");
        assert_eq!(r.constant(q(-1, 2)).render(), "-1/2");
        assert_eq!(r.constant(int(3)).render(), "3");
    }

    #[test]
    fn parse_errors() {
        let r = ring(&[("x", 2)], 4);
        assert!(matches!(r.parse("y"), Err(RingError::Parse(_))));
        assert!(matches!(r.parse("1/x"), Err(RingError::Parse(_))));
    }
}
