//! Base spaces with user-supplied integral cohomology groups, integral classes, and
//! real or complex vector bundles carrying such classes.
//!
//! Cup products are not part of the input data. A product of classes is known only
//! when one factor vanishes or the target group is trivial; anything else is
//! reported as [`BundleError::UndeterminedProduct`].

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use thiserror::Error;

use crate::abelian::{AbelianGroup, GroupError};
use crate::char_calc::{self, CharError, ClassKind, TotalClass, Validity};
use crate::graded_ring::{valid_identifier, GradedPoly, GradedRing, RingError};
use crate::rational;

type WhitneyOp =
    fn(ClassKind, &TotalClass, &TotalClass) -> Result<(TotalClass, Validity), CharError>;

#[derive(Clone, Debug, Error, PartialEq, Eq)]
pub enum BundleError {
    #[error("bundles live over different base spaces (`{0}` vs `{1}`)")]
    BaseMismatch(String, String),
    #[error("expected a {expected} bundle, `{bundle}` is {got}")]
    FieldMismatch {
        bundle: String,
        expected: Field,
        got: Field,
    },
    #[error("`{key}` is not a characteristic class of a {field} bundle")]
    BadClassKey { key: String, field: Field },
    #[error("`{key}` lives in degree {expected}, got a degree-{got} class")]
    DegreeMismatch {
        key: String,
        expected: u32,
        got: u32,
    },
    #[error("class in degree {degree} exceeds the dimension {dimension} of `{space}`")]
    AboveDimension {
        space: String,
        degree: u32,
        dimension: u32,
    },
    #[error("invalid space: {0}")]
    InvalidSpace(String),
    #[error("unknown generator `{0}`")]
    UnknownGenerator(String),
    #[error("class `{key}` of `{bundle}` is not known")]
    MissingClass { bundle: String, key: String },
    #[error("the product `{0}` needs cup-product data that the presentation does not carry")]
    UndeterminedProduct(String),
    #[error("classes from different groups cannot be combined")]
    GroupMismatch,
    #[error(transparent)]
    Group(#[from] GroupError),
    #[error(transparent)]
    Ring(#[from] RingError),
    #[error(transparent)]
    Char(#[from] CharError),
}

/// One degree of the cohomology of a base space: the group and its generator names
/// (free generators first, then one per torsion summand).
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct CohGroup {
    pub degree: u32,
    pub group: AbelianGroup,
    pub names: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BaseSpace {
    name: String,
    dimension: u32,
    groups: BTreeMap<u32, Arc<CohGroup>>,
}

impl BaseSpace {
    /// A space with only H⁰ = ℤ (generator `1`) declared.
    pub fn new(name: impl Into<String>, dimension: u32) -> Self {
        let mut groups = BTreeMap::new();
        groups.insert(
            0,
            Arc::new(CohGroup {
                degree: 0,
                group: AbelianGroup::new(1, vec![]).expect("valid"),
                names: vec!["1".to_string()],
            }),
        );
        Self {
            name: name.into(),
            dimension,
            groups,
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn dimension(&self) -> u32 {
        self.dimension
    }

    /// Declares Hᵈ. Names default to `h<d>_<i>` when `names` is empty.
    pub fn declare(
        &mut self,
        degree: u32,
        group: AbelianGroup,
        names: Vec<String>,
    ) -> Result<(), BundleError> {
        if degree > self.dimension {
            return Err(BundleError::AboveDimension {
                space: self.name.clone(),
                degree,
                dimension: self.dimension,
            });
        }
        if degree == 0 && (group.free_rank() != 1 || !group.torsion().is_empty()) {
            return Err(BundleError::InvalidSpace("H0 must be Z".into()));
        }
        let names = if names.is_empty() {
            (1..=group.num_generators())
                .map(|i| format!("h{degree}_{i}"))
                .collect()
        } else {
            names
        };
        if names.len() != group.num_generators() {
            return Err(BundleError::InvalidSpace(format!(
                "H{degree} has {} generators but {} names",
                group.num_generators(),
                names.len()
            )));
        }
        for n in &names {
            if degree > 0 && !valid_identifier(n) {
                return Err(BundleError::InvalidSpace(format!(
                    "invalid generator name `{n}`"
                )));
            }
            let clash = self
                .groups
                .values()
                .filter(|g| g.degree != degree)
                .any(|g| g.names.contains(n));
            if clash || names.iter().filter(|m| *m == n).count() > 1 {
                return Err(BundleError::InvalidSpace(format!(
                    "generator `{n}` declared twice"
                )));
            }
        }
        self.groups.insert(
            degree,
            Arc::new(CohGroup {
                degree,
                group,
                names,
            }),
        );
        Ok(())
    }

    pub fn is_declared(&self, degree: u32) -> bool {
        self.groups.contains_key(&degree)
    }

    pub fn declared_degrees(&self) -> impl Iterator<Item = u32> + '_ {
        self.groups.keys().copied()
    }

    /// Hᵈ; undeclared degrees are the trivial group.
    pub fn group(&self, degree: u32) -> Arc<CohGroup> {
        self.groups.get(&degree).cloned().unwrap_or_else(|| {
            Arc::new(CohGroup {
                degree,
                group: AbelianGroup::trivial(),
                names: vec![],
            })
        })
    }

    pub fn zero(&self, degree: u32) -> CohClass {
        CohClass::zero(self.group(degree))
    }

    /// Finds a generator by name: its degree and coordinate index.
    pub fn find_generator(&self, name: &str) -> Option<(u32, usize)> {
        self.groups.values().find_map(|g| {
            g.names
                .iter()
                .position(|n| n == name)
                .map(|i| (g.degree, i))
        })
    }

    /// The class of a single named generator.
    pub fn generator_class(&self, name: &str) -> Result<CohClass, BundleError> {
        let (degree, i) = self
            .find_generator(name)
            .ok_or_else(|| BundleError::UnknownGenerator(name.to_string()))?;
        let mut c = self.zero(degree);
        c.add_basis(i, &BigInt::one());
        Ok(c)
    }

    /// Inverts the given primes in the coefficients of every group.
    pub fn localize(&self, primes: &[u64]) -> BaseSpace {
        let groups = self
            .groups
            .iter()
            .map(|(&d, g)| {
                let local = g.group.localized(primes);
                // Drop names of torsion summands that die.
                let mut names: Vec<String> = g.names[..g.group.free_rank()].to_vec();
                let mut inverted: Vec<u64> = local.inverted_primes().to_vec();
                inverted.sort_unstable();
                for (k, &n) in g.group.torsion().iter().enumerate() {
                    let mut m = n;
                    for &p in &inverted {
                        while m % p == 0 {
                            m /= p;
                        }
                    }
                    if m > 1 {
                        names.push(g.names[g.group.free_rank() + k].clone());
                    }
                }
                (
                    d,
                    Arc::new(CohGroup {
                        degree: d,
                        group: local,
                        names,
                    }),
                )
            })
            .collect();
        BaseSpace {
            name: self.name.clone(),
            dimension: self.dimension,
            groups,
        }
    }
}

/// An element of Hᵈ: rational free coordinates (integral unless primes are
/// inverted) and torsion residues reduced into `[0, order)`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct CohClass {
    group: Arc<CohGroup>,
    free: Vec<BigRational>,
    torsion: Vec<u64>,
}

impl CohClass {
    pub fn zero(group: Arc<CohGroup>) -> Self {
        let free = vec![BigRational::zero(); group.group.free_rank()];
        let torsion = vec![0; group.group.torsion().len()];
        Self {
            group,
            free,
            torsion,
        }
    }

    pub fn new(
        group: Arc<CohGroup>,
        free: Vec<BigRational>,
        torsion: Vec<BigInt>,
    ) -> Result<Self, BundleError> {
        let g = &group.group;
        if free.len() != g.free_rank() || torsion.len() != g.torsion().len() {
            return Err(GroupError::Shape {
                expected: g.num_generators(),
                got: free.len() + torsion.len(),
            }
            .into());
        }
        if let Some(bad) = free.iter().find(|x| !g.admits(x)) {
            return Err(GroupError::NonIntegral(rational::render(bad)).into());
        }
        let torsion = torsion
            .iter()
            .zip(g.torsion())
            .map(|(t, &n)| reduce(t, n))
            .collect();
        Ok(Self {
            group,
            free,
            torsion,
        })
    }

    pub fn degree(&self) -> u32 {
        self.group.degree
    }

    pub fn group(&self) -> &Arc<CohGroup> {
        &self.group
    }

    pub fn free(&self) -> &[BigRational] {
        &self.free
    }

    pub fn torsion(&self) -> &[u64] {
        &self.torsion
    }

    pub fn is_zero(&self) -> bool {
        self.free.iter().all(Zero::is_zero) && self.torsion.iter().all(|t| *t == 0)
    }

    pub fn is_torsion(&self) -> bool {
        self.free.iter().all(Zero::is_zero)
    }

    fn add_basis(&mut self, i: usize, k: &BigInt) {
        let r = self.group.group.free_rank();
        if i < r {
            self.free[i] += BigRational::from_integer(k.clone());
        } else {
            let n = self.group.group.torsion()[i - r];
            let t = BigInt::from(self.torsion[i - r]) + k;
            self.torsion[i - r] = reduce(&t, n);
        }
    }

    fn check(&self, other: &Self) -> Result<(), BundleError> {
        if Arc::ptr_eq(&self.group, &other.group) || self.group == other.group {
            Ok(())
        } else {
            Err(BundleError::GroupMismatch)
        }
    }

    pub fn add(&self, other: &Self) -> Result<Self, BundleError> {
        self.check(other)?;
        let orders = self.group.group.torsion();
        Ok(Self {
            group: Arc::clone(&self.group),
            free: self
                .free
                .iter()
                .zip(&other.free)
                .map(|(a, b)| a + b)
                .collect(),
            torsion: self
                .torsion
                .iter()
                .zip(&other.torsion)
                .zip(orders)
                .map(|((a, b), n)| (a + b) % n)
                .collect(),
        })
    }

    pub fn neg(&self) -> Self {
        self.scale(&BigInt::from(-1))
    }

    pub fn sub(&self, other: &Self) -> Result<Self, BundleError> {
        self.add(&other.neg())
    }

    pub fn scale(&self, k: &BigInt) -> Self {
        let kq = BigRational::from_integer(k.clone());
        Self {
            group: Arc::clone(&self.group),
            free: self.free.iter().map(|a| a * &kq).collect(),
            torsion: self
                .torsion
                .iter()
                .zip(self.group.group.torsion())
                .map(|(a, &n)| reduce(&(BigInt::from(*a) * k), n))
                .collect(),
        }
    }

    /// Image of this class in a localized version of its group (same names for
    /// surviving summands).
    pub fn localize(&self, target: &Arc<CohGroup>) -> Result<Self, BundleError> {
        let src = &self.group;
        let mut out = CohClass::zero(Arc::clone(target));
        out.free = self.free.clone();
        for (k, &t) in self.torsion.iter().enumerate() {
            let name = &src.names[src.group.free_rank() + k];
            if let Some(j) = target.names.iter().position(|n| n == name) {
                let n = target.group.torsion()[j - target.group.free_rank()];
                out.torsion[j - target.group.free_rank()] = t % n;
            }
        }
        Ok(out)
    }

    /// `6*u8 + t2` style rendering in the generator names, `0` for zero.
    pub fn render(&self) -> String {
        let mut terms: Vec<(bool, String)> = Vec::new();
        for (x, name) in self.free.iter().zip(&self.group.names) {
            if x.is_zero() {
                continue;
            }
            let mag = x.abs();
            let s = if mag.is_one() {
                name.clone()
            } else {
                format!("{}*{}", rational::render(&mag), name)
            };
            terms.push((x.is_negative(), s));
        }
        let r = self.group.group.free_rank();
        for (k, &t) in self.torsion.iter().enumerate() {
            if t == 0 {
                continue;
            }
            let name = &self.group.names[r + k];
            let s = if t == 1 {
                name.clone()
            } else {
                format!("{t}*{name}")
            };
            terms.push((false, s));
        }
        if terms.is_empty() {
            return "0".into();
        }
        let mut out = String::new();
        for (i, (neg, s)) in terms.into_iter().enumerate() {
            match (i, neg) {
                (0, true) => out.push('-'),
                (0, false) => {}
                (_, true) => out.push_str(" - "),
                (_, false) => out.push_str(" + "),
            }
            out.push_str(&s);
        }
        out
    }
}

impl fmt::Display for CohClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.render())
    }
}

fn reduce(t: &BigInt, n: u64) -> u64 {
    t.mod_floor(&BigInt::from(n))
        .to_u64()
        .expect("residue fits")
}

/// Every y with m·y = x. Empty when x is not divisible; otherwise a torsor over the
/// m-torsion subgroup, so the size is either 0 or that subgroup's order.
pub fn divide_class(x: &CohClass, m: u64) -> Vec<CohClass> {
    assert!(m > 0, "division by zero");
    let g = &x.group.group;
    let mq = BigRational::from_integer(BigInt::from(m));
    let free: Vec<BigRational> = x.free.iter().map(|a| a / &mq).collect();
    if free.iter().any(|y| !g.admits(y)) {
        return Vec::new();
    }
    let mb = BigInt::from(m);
    let per_factor: Vec<Vec<u64>> = x
        .torsion
        .iter()
        .enumerate()
        .map(|(i, &a)| g.solve_torsion(i, &mb, a))
        .collect();
    if per_factor.iter().any(Vec::is_empty) {
        return Vec::new();
    }
    let mut out = vec![Vec::new()];
    for choices in &per_factor {
        let mut next = Vec::with_capacity(out.len() * choices.len());
        for prefix in &out {
            for &t in choices {
                let mut v: Vec<u64> = prefix.clone();
                v.push(t);
                next.push(v);
            }
        }
        out = next;
    }
    out.into_iter()
        .map(|torsion| CohClass {
            group: Arc::clone(&x.group),
            free: free.clone(),
            torsion,
        })
        .collect()
}

/// Size of [`divide_class`] without enumerating it.
pub fn division_count(x: &CohClass, m: u64) -> BigInt {
    let g = &x.group.group;
    let mq = BigRational::from_integer(BigInt::from(m));
    if x.free.iter().any(|a| !g.admits(&(a / &mq))) {
        return BigInt::zero();
    }
    let mut count = BigInt::one();
    for (&a, &n) in x.torsion.iter().zip(g.torsion()) {
        let gcd = m.gcd(&n);
        if a % gcd != 0 {
            return BigInt::zero();
        }
        count *= gcd;
    }
    count
}

/// A class known only up to a denominator: the value is `numerator / denominator`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RationalClass {
    pub numerator: CohClass,
    pub denominator: BigInt,
}

impl RationalClass {
    pub fn integral(c: CohClass) -> Self {
        Self {
            numerator: c,
            denominator: BigInt::one(),
        }
    }

    /// Free coordinates as exact rationals; torsion carries no rational information.
    pub fn free_part(&self) -> Vec<BigRational> {
        let d = BigRational::from_integer(self.denominator.clone());
        self.numerator.free.iter().map(|a| a / &d).collect()
    }

    /// Integral classes y with denominator·y = numerator.
    pub fn integral_solutions(&self) -> Vec<CohClass> {
        let d = self.denominator.to_u64().expect("denominator fits in u64");
        divide_class(&self.numerator, d)
    }

    pub fn solution_count(&self) -> BigInt {
        division_count(&self.numerator, self.denominator.to_u64().expect("fits"))
    }

    /// The unique integral representative, if there is exactly one.
    pub fn unique_integral(&self) -> Option<CohClass> {
        let sols = self.integral_solutions();
        (sols.len() == 1).then(|| sols.into_iter().next().expect("one"))
    }

    pub fn add(&self, other: &Self) -> Result<Self, BundleError> {
        let l = self.denominator.lcm(&other.denominator);
        let a = self.numerator.scale(&(&l / &self.denominator));
        let b = other.numerator.scale(&(&l / &other.denominator));
        Ok(Self {
            numerator: a.add(&b)?,
            denominator: l,
        })
    }

    /// Free part rendered with rational coefficients, e.g. `-1/8*u8`.
    pub fn render_free(&self) -> String {
        let g = &self.numerator.group;
        let mut c = CohClass::zero(Arc::clone(g));
        c.free = self.free_part();
        c.render()
    }

    pub fn render(&self) -> String {
        if self.denominator.is_one() || self.numerator.is_zero() {
            self.numerator.render()
        } else {
            format!("({})/{}", self.numerator.render(), self.denominator)
        }
    }
}

/// Evaluates a homogeneous polynomial whose generators name classes. `lookup` returns
/// `None` for unknown classes. Products need one vanishing factor or a trivial target.
pub fn evaluate_poly(
    space: &BaseSpace,
    poly: &GradedPoly,
    degree: u32,
    lookup: &dyn Fn(&str) -> Option<RationalClass>,
) -> Result<RationalClass, BundleError> {
    let target = space.group(degree);
    let ring = poly.ring();
    let mut acc = RationalClass::integral(CohClass::zero(Arc::clone(&target)));
    for (exps, coeff) in poly.terms() {
        let mdeg = ring.monomial_degree(exps);
        if mdeg != degree {
            return Err(BundleError::DegreeMismatch {
                key: render_monomial(ring, exps),
                expected: degree,
                got: mdeg,
            });
        }
        let factors: Vec<(usize, u32)> = exps
            .iter()
            .enumerate()
            .filter(|(_, e)| **e > 0)
            .map(|(i, e)| (i, *e))
            .collect();
        let value: RationalClass = match factors.as_slice() {
            [] => {
                let mut one = CohClass::zero(Arc::clone(&target));
                if degree == 0 {
                    one.add_basis(0, &BigInt::one());
                }
                RationalClass::integral(one)
            }
            [(i, 1)] => {
                let name = &ring.generators()[*i].name;
                let v = lookup(name).ok_or_else(|| BundleError::MissingClass {
                    bundle: String::new(),
                    key: name.clone(),
                })?;
                if v.numerator.degree() != degree {
                    return Err(BundleError::DegreeMismatch {
                        key: name.clone(),
                        expected: degree,
                        got: v.numerator.degree(),
                    });
                }
                v
            }
            _ => {
                if !target.group.is_trivial() {
                    let mut any_zero = false;
                    let mut missing = None;
                    for (i, _) in &factors {
                        let name = &ring.generators()[*i].name;
                        match lookup(name) {
                            Some(v) if v.numerator.is_zero() => any_zero = true,
                            Some(_) => {}
                            None => missing = Some(name.clone()),
                        }
                    }
                    if !any_zero {
                        return Err(match missing {
                            Some(key) => BundleError::MissingClass {
                                bundle: String::new(),
                                key,
                            },
                            None => BundleError::UndeterminedProduct(render_monomial(ring, exps)),
                        });
                    }
                }
                RationalClass::integral(CohClass::zero(Arc::clone(&target)))
            }
        };
        let scaled = RationalClass {
            numerator: value.numerator.scale(coeff.numer()),
            denominator: value.denominator * coeff.denom(),
        };
        acc = acc.add(&scaled)?;
    }
    Ok(acc)
}

fn render_monomial(ring: &GradedRing, exps: &[u32]) -> String {
    let parts: Vec<String> = exps
        .iter()
        .zip(ring.generators())
        .filter(|(e, _)| **e > 0)
        .map(|(e, g)| {
            if *e == 1 {
                g.name.clone()
            } else {
                format!("{}^{}", g.name, e)
            }
        })
        .collect();
    if parts.is_empty() {
        "1".into()
    } else {
        parts.join("*")
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Field {
    Real,
    Complex,
}

impl fmt::Display for Field {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Field::Real => "real",
            Field::Complex => "complex",
        })
    }
}

/// User-asserted Stiefel–Whitney data; the mod-2 cohomology ring is not modeled.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash)]
pub enum StiefelWhitney {
    #[default]
    Unknown,
    Vanishes,
    /// Known not to vanish, optionally with a name for the class in reports.
    NonVanishing(Option<String>),
}

impl StiefelWhitney {
    pub fn vanishes(&self) -> Option<bool> {
        match self {
            StiefelWhitney::Unknown => None,
            StiefelWhitney::Vanishes => Some(true),
            StiefelWhitney::NonVanishing(_) => Some(false),
        }
    }

    /// Sum of two classes given only vanishing information.
    fn plus(&self, other: &Self) -> Self {
        match (self.vanishes(), other.vanishes()) {
            (Some(true), Some(true)) => StiefelWhitney::Vanishes,
            (Some(true), Some(false)) => other.clone(),
            (Some(false), Some(true)) => self.clone(),
            _ => StiefelWhitney::Unknown,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ClassEntry {
    pub class: CohClass,
    pub validity: Validity,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Bundle {
    pub name: String,
    pub base: Arc<BaseSpace>,
    pub field: Field,
    /// Real rank for real bundles, complex rank for complex ones; negative for virtual bundles.
    pub rank: i64,
    pub w1: StiefelWhitney,
    pub w2: StiefelWhitney,
    classes: BTreeMap<String, ClassEntry>,
}

/// Cohomological degree of a class key for the given field, e.g. `p2` ↦ 8 for real
/// bundles, `c3` ↦ 6 for complex ones.
pub fn class_degree(field: Field, key: &str) -> Option<u32> {
    let indexed = |prefix: &str| -> Option<u32> {
        let rest = key.strip_prefix(prefix)?;
        if rest.is_empty() || rest.starts_with('0') || !rest.bytes().all(|b| b.is_ascii_digit()) {
            return None;
        }
        rest.parse::<u32>().ok().filter(|k| *k <= 64)
    };
    match field {
        Field::Real => match key {
            "half_p1" | "Q1" => Some(4),
            "sixth_p2" | "Q2" => Some(8),
            _ => indexed("p").map(|j| 4 * j),
        },
        Field::Complex => indexed("ch")
            .map(|k| 2 * k)
            .or_else(|| indexed("c").map(|i| 2 * i)),
    }
}

impl Bundle {
    pub fn new(name: impl Into<String>, base: Arc<BaseSpace>, field: Field, rank: i64) -> Self {
        Self {
            name: name.into(),
            base,
            field,
            rank,
            w1: StiefelWhitney::Unknown,
            w2: StiefelWhitney::Unknown,
            classes: BTreeMap::new(),
        }
    }

    /// A bundle with every class known to vanish.
    pub fn trivial(name: impl Into<String>, base: Arc<BaseSpace>, field: Field, rank: i64) -> Self {
        let mut b = Self::new(name, base, field, rank);
        b.w1 = StiefelWhitney::Vanishes;
        b.w2 = StiefelWhitney::Vanishes;
        let keys: Vec<String> = match field {
            Field::Real => (1..=b.base.dimension / 4)
                .map(|j| format!("p{j}"))
                .collect(),
            Field::Complex => (1..=b.base.dimension / 2)
                .map(|i| format!("c{i}"))
                .collect(),
        };
        for k in keys {
            let d = class_degree(field, &k).expect("valid key");
            let z = b.base.zero(d);
            b.classes.insert(
                k,
                ClassEntry {
                    class: z,
                    validity: Validity::Exact,
                },
            );
        }
        b
    }

    pub fn set_class(&mut self, key: &str, class: CohClass) -> Result<(), BundleError> {
        self.set_class_with(key, class, Validity::Exact)
    }

    pub fn set_class_with(
        &mut self,
        key: &str,
        class: CohClass,
        validity: Validity,
    ) -> Result<(), BundleError> {
        let expected = class_degree(self.field, key).ok_or_else(|| BundleError::BadClassKey {
            key: key.to_string(),
            field: self.field,
        })?;
        if class.degree() != expected {
            return Err(BundleError::DegreeMismatch {
                key: key.to_string(),
                expected,
                got: class.degree(),
            });
        }
        let target = self.base.group(expected);
        if *class.group() != target {
            return Err(BundleError::GroupMismatch);
        }
        self.classes
            .insert(key.to_string(), ClassEntry { class, validity });
        Ok(())
    }

    pub fn remove_class(&mut self, key: &str) -> Option<ClassEntry> {
        self.classes.remove(key)
    }

    /// Explicitly stored classes.
    pub fn classes(&self) -> &BTreeMap<String, ClassEntry> {
        &self.classes
    }

    pub fn entry(&self, key: &str) -> Option<&ClassEntry> {
        self.classes.get(key)
    }

    /// A class if it is stored or forced: classes above the base dimension, beyond
    /// the rank, or in a trivial group vanish.
    pub fn lookup(&self, key: &str) -> Option<CohClass> {
        if let Some(e) = self.classes.get(key) {
            return Some(e.class.clone());
        }
        let d = class_degree(self.field, key)?;
        let zero = || Some(self.base.zero(d));
        if d > self.base.dimension || self.base.group(d).group.is_trivial() {
            return zero();
        }
        // Beyond the rank; only meaningful for honest (non-virtual) bundles.
        if self.rank >= 0 {
            let r = self.rank as u32;
            let beyond = match self.field {
                Field::Real => key
                    .strip_prefix('p')
                    .and_then(|j| j.parse::<u32>().ok())
                    .is_some_and(|j| 2 * j > r),
                Field::Complex => key
                    .strip_prefix('c')
                    .and_then(|i| i.parse::<u32>().ok())
                    .is_some_and(|i| i > r),
            };
            if beyond {
                return zero();
            }
        }
        None
    }

    pub fn validity(&self) -> Validity {
        self.classes
            .values()
            .fold(Validity::Exact, |v, e| v.combine(e.validity))
    }

    /// ch_k of a complex bundle: stored, or derived from the Chern classes.
    pub fn chern_character(&self, k: u32) -> Result<RationalClass, BundleError> {
        self.expect_field(Field::Complex)?;
        if let Some(e) = self.classes.get(&format!("ch{k}")) {
            return Ok(RationalClass::integral(e.class.clone()));
        }
        let ring = char_calc::chern_ring(k.max(1), 2 * k.max(1))?;
        let c = char_calc::chern_generators(&ring, k.max(1))?;
        let chk = char_calc::ch_from_chern(&c, k)?;
        if k == 0 {
            let mut one = self.base.zero(0);
            one.add_basis(0, &BigInt::from(self.rank));
            return Ok(RationalClass::integral(one));
        }
        evaluate_poly(&self.base, &chk, 2 * k, &|name| {
            self.lookup(name).map(RationalClass::integral)
        })
        .map_err(|e| self.attribute(e))
    }

    fn attribute(&self, e: BundleError) -> BundleError {
        match e {
            BundleError::MissingClass { key, .. } => BundleError::MissingClass {
                bundle: self.name.clone(),
                key,
            },
            other => other,
        }
    }

    pub fn expect_field(&self, field: Field) -> Result<(), BundleError> {
        if self.field == field {
            Ok(())
        } else {
            Err(BundleError::FieldMismatch {
                bundle: self.name.clone(),
                expected: field,
                got: self.field,
            })
        }
    }

    fn check_compatible(&self, other: &Bundle) -> Result<(), BundleError> {
        if !(Arc::ptr_eq(&self.base, &other.base) || self.base == other.base) {
            return Err(BundleError::BaseMismatch(
                self.base.name.clone(),
                other.base.name.clone(),
            ));
        }
        other.expect_field(self.field)
    }

    /// Multiplicative class keys of this field up to the base dimension.
    fn multiplicative_keys(&self) -> Vec<(String, u32)> {
        let dim = self.base.dimension;
        match self.field {
            Field::Real => (1..=dim / 4).map(|j| (format!("p{j}"), 4 * j)).collect(),
            Field::Complex => (1..=dim / 2).map(|i| (format!("c{i}"), 2 * i)).collect(),
        }
    }

    /// Combines the classes of `self` and `other` through a total-class formula, mapping
    /// each component back onto the base. Components that cannot be evaluated are dropped.
    fn combine_totals(
        &self,
        other: &Bundle,
        kind: ClassKind,
        keys: &[(String, u32)],
        op: WhitneyOp,
    ) -> Result<BTreeMap<String, ClassEntry>, BundleError> {
        let mut gens = Vec::new();
        for side in ["a", "b"] {
            for (k, d) in keys {
                gens.push((format!("{side}.{k}"), *d));
            }
        }
        let trunc = keys.iter().map(|(_, d)| *d).max().unwrap_or(0);
        let ring = GradedRing::new(gens, trunc)?;
        let total = |side: &str| -> Result<TotalClass, BundleError> {
            let mut t = ring.one();
            for (k, _) in keys {
                t = t.add(&ring.generator(&format!("{side}.{k}"))?)?;
            }
            Ok(TotalClass::new(kind, t))
        };
        let (result, validity) = op(kind, &total("a")?, &total("b")?)?;
        let validity = keys
            .iter()
            .filter_map(|(k, _)| {
                self.classes
                    .get(k)
                    .into_iter()
                    .chain(other.classes.get(k))
                    .next()
            })
            .fold(validity, |v, e| v.combine(e.validity));
        let lookup = |name: &str| -> Option<RationalClass> {
            let (side, key) = name.split_once('.')?;
            let b = if side == "a" { self } else { other };
            b.lookup(key).map(RationalClass::integral)
        };
        let mut out = BTreeMap::new();
        for (k, d) in keys {
            let comp = result.component(*d);
            let Ok(value) = evaluate_poly(&self.base, &comp, *d, &lookup) else {
                continue;
            };
            if let Some(class) = value.unique_integral() {
                out.insert(k.clone(), ClassEntry { class, validity });
            }
        }
        Ok(out)
    }

    fn combine(
        &self,
        other: &Bundle,
        name: String,
        rank: i64,
        op: WhitneyOp,
        ch_sign: i64,
    ) -> Result<Bundle, BundleError> {
        self.check_compatible(other)?;
        let mut out = Bundle::new(name, Arc::clone(&self.base), self.field, rank);
        out.w1 = self.w1.plus(&other.w1);
        out.w2 = if self.w1.vanishes() == Some(true) && other.w1.vanishes() == Some(true) {
            self.w2.plus(&other.w2)
        } else {
            StiefelWhitney::Unknown
        };
        let kind = match self.field {
            Field::Real => ClassKind::Pontrjagin,
            Field::Complex => ClassKind::Chern,
        };
        let keys = self.multiplicative_keys();
        out.classes = self.combine_totals(other, kind, &keys, op)?;

        match self.field {
            Field::Complex => {
                for k in 1..=self.base.dimension / 2 {
                    let key = format!("ch{k}");
                    if !self.classes.contains_key(&key) && !other.classes.contains_key(&key) {
                        continue;
                    }
                    let a = self
                        .chern_character(k)
                        .ok()
                        .and_then(|r| r.unique_integral());
                    let b = other
                        .chern_character(k)
                        .ok()
                        .and_then(|r| r.unique_integral());
                    if let (Some(a), Some(b)) = (a, b) {
                        let class = a.add(&b.scale(&BigInt::from(ch_sign)))?;
                        out.classes.insert(
                            key,
                            ClassEntry {
                                class,
                                validity: Validity::Exact,
                            },
                        );
                    }
                }
            }
            Field::Real => {
                let q_keys = vec![("Q1".to_string(), 4), ("Q2".to_string(), 8)];
                let has_q = |b: &Bundle| {
                    q_keys.iter().all(|(k, _)| b.lookup(k).is_some())
                        && q_keys.iter().all(|(_, d)| *d <= b.base.dimension)
                };
                if has_q(self) && has_q(other) {
                    let q = self.combine_totals(other, ClassKind::SpinQ, &q_keys, op)?;
                    out.classes.extend(q);
                }
            }
        }
        Ok(out)
    }

    /// Whitney sum E ⊕ F. Pontrjagin classes of the sum are only known modulo
    /// 2-torsion and are flagged accordingly; Chern, Q and ch classes are exact.
    pub fn direct_sum(&self, other: &Bundle) -> Result<Bundle, BundleError> {
        self.combine(
            other,
            format!("{}+{}", self.name, other.name),
            self.rank + other.rank,
            char_calc::whitney_sum,
            1,
        )
    }

    /// Virtual difference E − F, with total classes total(E)·total(F)⁻¹.
    pub fn virtual_difference(&self, other: &Bundle) -> Result<Bundle, BundleError> {
        self.combine(
            other,
            format!("{}-{}", self.name, other.name),
            self.rank - other.rank,
            char_calc::whitney_difference,
            -1,
        )
    }

    /// V ⊗ ℂ: c_{2j} = (−1)^j p_j, odd Chern classes dropped (they are 2-torsion) and flagged.
    pub fn complexify(&self) -> Result<Bundle, BundleError> {
        self.expect_field(Field::Real)?;
        let mut out = Bundle::new(
            format!("{}_C", self.name),
            Arc::clone(&self.base),
            Field::Complex,
            self.rank,
        );
        out.w1 = StiefelWhitney::Vanishes;
        out.w2 = match self.w1.vanishes() {
            Some(true) => StiefelWhitney::Vanishes,
            _ => StiefelWhitney::Unknown,
        };
        for i in 1..=self.base.dimension / 2 {
            let key = format!("c{i}");
            if i % 2 == 1 {
                let z = self.base.zero(2 * i);
                out.classes.insert(
                    key,
                    ClassEntry {
                        class: z,
                        validity: Validity::Mod2Torsion,
                    },
                );
                continue;
            }
            let j = i / 2;
            if let Some(p) = self.lookup(&format!("p{j}")) {
                let validity = self
                    .classes
                    .get(&format!("p{j}"))
                    .map_or(Validity::Exact, |e| e.validity);
                let class = if j % 2 == 1 { p.neg() } else { p };
                out.classes.insert(key, ClassEntry { class, validity });
            }
        }
        Ok(out)
    }

    /// Complex conjugate bundle: c_i ↦ (−1)^i c_i.
    pub fn conjugate(&self) -> Result<Bundle, BundleError> {
        self.expect_field(Field::Complex)?;
        let mut out = self.clone();
        out.name = format!("{}_bar", self.name);
        for (k, e) in out.classes.iter_mut() {
            let degree = class_degree(Field::Complex, k).expect("valid key");
            let i = degree / 2;
            if i % 2 == 1 {
                e.class = e.class.neg();
            }
        }
        Ok(out)
    }

    /// Underlying real bundle, with p_j = (−1)^j c_{2j}(V ⊕ V̄).
    pub fn realify(&self) -> Result<Bundle, BundleError> {
        self.expect_field(Field::Complex)?;
        let doubled = self.direct_sum(&self.conjugate()?)?;
        let mut out = Bundle::new(
            format!("{}_R", self.name),
            Arc::clone(&self.base),
            Field::Real,
            2 * self.rank,
        );
        out.w1 = StiefelWhitney::Vanishes;
        out.w2 = match self.lookup("c1") {
            Some(c1) if !divide_class(&c1, 2).is_empty() => StiefelWhitney::Vanishes,
            Some(_) => StiefelWhitney::NonVanishing(Some(format!("{}.c1 mod 2", self.name))),
            None => StiefelWhitney::Unknown,
        };
        for j in 1..=self.base.dimension / 4 {
            if let Some(e) = doubled.classes.get(&format!("c{}", 2 * j)) {
                let class = if j % 2 == 1 {
                    e.class.neg()
                } else {
                    e.class.clone()
                };
                out.classes.insert(
                    format!("p{j}"),
                    ClassEntry {
                        class,
                        validity: e.validity,
                    },
                );
            }
        }
        Ok(out)
    }

    /// The same bundle over `base.localize(primes)`.
    pub fn localize(&self, local_base: Arc<BaseSpace>) -> Result<Bundle, BundleError> {
        let mut out = self.clone();
        out.base = Arc::clone(&local_base);
        for e in out.classes.values_mut() {
            let target = local_base.group(e.class.degree());
            e.class = e.class.localize(&target)?;
        }
        Ok(out)
    }
}
