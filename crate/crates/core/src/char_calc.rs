//! Symbolic characteristic-class calculus.
//!
//! Chern characters come from the Newton recurrence for power sums of Chern roots;
//! [`splitting_oracle`] computes the same quantities directly from explicit roots and
//! is kept independent of the recurrence so the two can be checked against each other.

use std::sync::Arc;

use num_bigint::BigInt;
use num_rational::BigRational;
use thiserror::Error;

use crate::graded_ring::{GradedPoly, GradedRing, RingError};
use crate::rational::{factorial, int, q};

#[derive(Clone, Debug, Error, PartialEq, Eq)]
pub enum CharError {
    #[error("c{index} must be homogeneous of degree {expected}")]
    DegreeMismatch { index: usize, expected: u32 },
    #[error("cannot combine a {0:?} class with a {1:?} class")]
    KindMismatch(ClassKind, ClassKind),
    #[error("k must be at least 1")]
    BadIndex,
    #[error(transparent)]
    Ring(#[from] RingError),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum ClassKind {
    Chern,
    Pontrjagin,
    ChernCharacter,
    SpinQ,
}

/// Whether an identity holds exactly or only modulo elements of order two.
///
/// `Mod2Torsion` is sticky: combining anything with it stays `Mod2Torsion`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Validity {
    #[default]
    Exact,
    Mod2Torsion,
}

impl Validity {
    pub fn combine(self, other: Validity) -> Validity {
        self.max(other)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Validity::Exact => "exact",
            Validity::Mod2Torsion => "mod_2_torsion",
        }
    }
}

/// A total class: 1 + c₁ + c₂ + …, 1 + p₁ + p₂ + …, rank + ch₁ + ch₂ + …, or 1 + Q₁ + Q₂.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TotalClass {
    pub kind: ClassKind,
    pub value: GradedPoly,
}

impl TotalClass {
    pub fn new(kind: ClassKind, value: GradedPoly) -> Self {
        Self { kind, value }
    }

    /// The component of cohomological degree `d`.
    pub fn component(&self, d: u32) -> GradedPoly {
        self.value.homogeneous_part(d)
    }
}

fn check_chern_list(c: &[GradedPoly]) -> Result<(), CharError> {
    for (i, ci) in c.iter().enumerate() {
        let expected = 2 * (i as u32 + 1);
        if !ci.is_homogeneous_of(expected) {
            return Err(CharError::DegreeMismatch {
                index: i + 1,
                expected,
            });
        }
    }
    Ok(())
}

/// Power sums s₀ = n, s₁, …, s_k of the Chern roots of a rank-`n` bundle whose
/// Chern classes are `c = [c₁, …, c_n]`, by the Newton recurrence
/// s_k = c₁s_{k−1} − c₂s_{k−2} + … + (−1)^{k−1} k c_k.
pub fn power_sums(
    ring: &Arc<GradedRing>,
    c: &[GradedPoly],
    k: u32,
) -> Result<Vec<GradedPoly>, CharError> {
    check_chern_list(c)?;
    let n = c.len();
    let mut s: Vec<GradedPoly> = vec![ring.constant(int(n as i64))];
    for m in 1..=k as usize {
        let mut acc = ring.zero();
        for i in 1..=m.min(n) {
            let term = if i == m {
                c[i - 1].times(m as i64)
            } else {
                c[i - 1].multiply(&s[m - i])?
            };
            acc = if i % 2 == 1 {
                acc.add(&term)?
            } else {
                acc.sub(&term)?
            };
        }
        s.push(acc);
    }
    Ok(s)
}

/// ch_k = s_k / k! in terms of the Chern classes `c = [c₁, …, c_n]`; ch₀ is the rank n.
pub fn ch_from_chern(c: &[GradedPoly], k: u32) -> Result<GradedPoly, CharError> {
    let ring = chern_list_ring(c);
    let s = power_sums(&ring, c, k)?;
    let denom = BigRational::from_integer(factorial(k));
    Ok(s[k as usize].scale(&denom.recip()))
}

fn chern_list_ring(c: &[GradedPoly]) -> Arc<GradedRing> {
    match c.first() {
        Some(p) => Arc::clone(p.ring()),
        None => GradedRing::new(Vec::<(String, u32)>::new(), 0).expect("empty ring"),
    }
}

/// Total Chern character rank + ch₁ + … + ch_k up to the ring's truncation.
pub fn total_chern_character(
    ring: &Arc<GradedRing>,
    c: &[GradedPoly],
) -> Result<TotalClass, CharError> {
    let kmax = ring.truncation() / 2;
    let s = power_sums(ring, c, kmax)?;
    let mut total = ring.zero();
    for (k, sk) in s.iter().enumerate() {
        let f = BigRational::from_integer(factorial(k as u32)).recip();
        total = total.add(&sk.scale(&f))?;
    }
    Ok(TotalClass::new(ClassKind::ChernCharacter, total))
}

/// Total class 1 + c₁ + … from a list of components.
pub fn total_from_components(
    ring: &Arc<GradedRing>,
    kind: ClassKind,
    components: &[GradedPoly],
) -> Result<TotalClass, CharError> {
    let mut total = ring.one();
    for p in components {
        total = total.add(p)?;
    }
    Ok(TotalClass::new(kind, total))
}

/// Independent check of the Newton engine: Chern classes as elementary symmetric
/// polynomials of explicit roots (summed over subsets) and ch_k as a direct power sum.
pub fn splitting_oracle(
    roots: &[GradedPoly],
    k: u32,
) -> Result<(Vec<GradedPoly>, GradedPoly), CharError> {
    let ring = chern_list_ring(roots);
    for (i, r) in roots.iter().enumerate() {
        if !r.is_homogeneous_of(2) {
            return Err(CharError::DegreeMismatch {
                index: i + 1,
                expected: 2,
            });
        }
    }
    let n = roots.len();
    let mut chern = vec![ring.zero(); n];
    // Roots are few (the oracle is for testing), so brute-force all subsets.
    for mask in 1u64..(1u64 << n) {
        let size = mask.count_ones() as usize;
        let mut prod = ring.one();
        for (j, r) in roots.iter().enumerate() {
            if mask >> j & 1 == 1 {
                prod = prod.multiply(r)?;
            }
        }
        chern[size - 1] = chern[size - 1].add(&prod)?;
    }
    let mut sum = if k == 0 {
        ring.constant(int(n as i64))
    } else {
        ring.zero()
    };
    if k > 0 {
        for r in roots {
            sum = sum.add(&r.pow(k))?;
        }
    }
    let ch = sum.scale(&BigRational::from_integer(factorial(k)).recip());
    Ok((chern, ch))
}

/// p_j = (−1)^j c_{2j} of the complexification. Odd Chern classes of a complexified
/// real bundle are 2-torsion and carry no rational information, so they are ignored.
pub fn pontrjagin_from_complexification(c_of_complexified: &[GradedPoly]) -> Vec<GradedPoly> {
    c_of_complexified
        .iter()
        .enumerate()
        .filter(|(i, _)| (i + 1) % 2 == 0)
        .map(|(i, c)| {
            let j = i.div_ceil(2);
            if j % 2 == 0 {
                c.clone()
            } else {
                -c
            }
        })
        .collect()
}

/// Inverse direction: c_{2j} = (−1)^j p_j, odd classes zero (index i holds c_{i+1}).
pub fn complexification_from_pontrjagin(p: &[GradedPoly]) -> Vec<GradedPoly> {
    let mut out = Vec::with_capacity(2 * p.len());
    for (j, pj) in p.iter().enumerate() {
        out.push(pj.ring().zero());
        out.push(if (j + 1) % 2 == 0 { pj.clone() } else { -pj });
    }
    out
}

/// Whitney sum formula for total classes.
///
/// Chern and Spin Q totals multiply; Chern characters add. The Pontrjagin product
/// formula only holds modulo 2-torsion, which is what the returned flag records.
/// Q classes are only defined through degree 8, so their product is cut there.
pub fn whitney_sum(
    kind: ClassKind,
    a: &TotalClass,
    b: &TotalClass,
) -> Result<(TotalClass, Validity), CharError> {
    for t in [a, b] {
        if t.kind != kind {
            return Err(CharError::KindMismatch(kind, t.kind));
        }
    }
    let (value, validity) = match kind {
        ClassKind::Chern => (a.value.multiply(&b.value)?, Validity::Exact),
        ClassKind::Pontrjagin => (a.value.multiply(&b.value)?, Validity::Mod2Torsion),
        ClassKind::ChernCharacter => (a.value.add(&b.value)?, Validity::Exact),
        ClassKind::SpinQ => {
            let prod = a.value.multiply(&b.value)?;
            let mut cut = prod.ring().zero();
            for d in 0..=8 {
                cut = cut.add(&prod.homogeneous_part(d))?;
            }
            (cut, Validity::Exact)
        }
    };
    Ok((TotalClass::new(kind, value), validity))
}

/// Total class of a virtual difference A − B: product with the inverse for the
/// multiplicative kinds, difference for the Chern character.
pub fn whitney_difference(
    kind: ClassKind,
    a: &TotalClass,
    b: &TotalClass,
) -> Result<(TotalClass, Validity), CharError> {
    for t in [a, b] {
        if t.kind != kind {
            return Err(CharError::KindMismatch(kind, t.kind));
        }
    }
    if kind == ClassKind::ChernCharacter {
        return Ok((
            TotalClass::new(kind, a.value.sub(&b.value)?),
            Validity::Exact,
        ));
    }
    let inv = TotalClass::new(kind, b.value.invert_unit()?);
    whitney_sum(kind, a, &inv)
}

/// Rational solution of p₁ = 2Q₁, p₂ = Q₁² + 2Q₂: Q₁ = p₁/2, Q₂ = p₂/2 − p₁²/8.
pub fn spin_classes(
    p1: &GradedPoly,
    p2: &GradedPoly,
) -> Result<(GradedPoly, GradedPoly), CharError> {
    if !p1.is_homogeneous_of(4) {
        return Err(CharError::DegreeMismatch {
            index: 1,
            expected: 4,
        });
    }
    if !p2.is_homogeneous_of(8) {
        return Err(CharError::DegreeMismatch {
            index: 2,
            expected: 8,
        });
    }
    let q1 = p1.scale(&q(1, 2));
    let q2 = p2.scale(&q(1, 2)).sub(&p1.multiply(p1)?.scale(&q(1, 8)))?;
    Ok((q1, q2))
}

/// Pontrjagin classes from Spin classes: p₁ = 2Q₁, p₂ = Q₁² + 2Q₂.
pub fn pontrjagin_from_spin(
    q1: &GradedPoly,
    q2: &GradedPoly,
) -> Result<(GradedPoly, GradedPoly), CharError> {
    Ok((q1.times(2), q1.multiply(q1)?.add(&q2.times(2))?))
}

/// Value of c_k on the generator of π_{2k}(BU): (k − 1)!.
pub fn generator_pairing_constant(k: u32) -> Result<BigInt, CharError> {
    if k == 0 {
        return Err(CharError::BadIndex);
    }
    Ok(factorial(k - 1))
}

/// The coefficient of c_k in ch_k when c₁ … c_{k−1} vanish, read off the Newton
/// engine. Equals (−1)^{k−1}/(k−1)!, i.e. ± the inverse of the pairing constant.
pub fn ch_top_coefficient(k: u32) -> Result<BigRational, CharError> {
    if k == 0 {
        return Err(CharError::BadIndex);
    }
    let ring = chern_ring(k, 2 * k)?;
    let mut c: Vec<GradedPoly> = (1..k).map(|_| ring.zero()).collect();
    let ck = ring.generator(&format!("c{k}"))?;
    c.push(ck);
    let chk = ch_from_chern(&c, k)?;
    let mut exps = vec![0; k as usize];
    exps[k as usize - 1] = 1;
    Ok(chk.coefficient(&exps))
}

/// The ring ℚ[c₁, …, c_n] truncated at `truncation`.
pub fn chern_ring(n: u32, truncation: u32) -> Result<Arc<GradedRing>, CharError> {
    Ok(GradedRing::new(
        (1..=n).map(|i| (format!("c{i}"), 2 * i)),
        truncation,
    )?)
}

/// The generic Chern classes [c₁, …, c_n] of [`chern_ring`].
pub fn chern_generators(ring: &Arc<GradedRing>, n: u32) -> Result<Vec<GradedPoly>, CharError> {
    (1..=n)
        .map(|i| Ok(ring.generator(&format!("c{i}"))?))
        .collect()
}

/// ch_k in generic Chern classes c₁ … c_k.
pub fn ch_expand(k: u32) -> Result<GradedPoly, CharError> {
    let n = k.max(1);
    let ring = chern_ring(n, 2 * n)?;
    let c = chern_generators(&ring, n)?;
    ch_from_chern(&c, k)
}
