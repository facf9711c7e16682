//! Rational cohomology of connected covers of BU and BSO, and a small free
//! graded-commutative dga engine used to check the Serre spectral sequence page.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use num_rational::BigRational;
use num_traits::{One, Zero};
use thiserror::Error;

use crate::graded_ring::{GradedRing, RingError};

#[derive(Clone, Debug, Error, PartialEq, Eq)]
pub enum CoverError {
    #[error("`{stage}` is not a stage of the {series} tower")]
    InvalidStage { series: Series, stage: String },
    #[error("unknown series `{0}` (expected bu or bso)")]
    UnknownSeries(String),
    #[error("degree inconsistency: {0}")]
    Degree(String),
    #[error("d^2 != 0 on `{0}`")]
    NotADifferential(String),
    #[error(transparent)]
    Ring(#[from] RingError),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Series {
    Bu,
    Bso,
}

impl fmt::Display for Series {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Series::Bu => "BU",
            Series::Bso => "BSO",
        })
    }
}

impl FromStr for Series {
    type Err = CoverError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "bu" => Ok(Series::Bu),
            "bso" | "bo" => Ok(Series::Bso),
            _ => Err(CoverError::UnknownSeries(s.to_string())),
        }
    }
}

impl Series {
    fn prefix(self) -> &'static str {
        match self {
            Series::Bu => "c",
            Series::Bso => "p",
        }
    }

    fn generator_degree(self, i: u32) -> u32 {
        match self {
            Series::Bu => 2 * i,
            Series::Bso => 4 * i,
        }
    }

    /// Whether π_n of the classifying space is nonzero, i.e. n is the bottom of a cover.
    fn has_homotopy(self, n: u32) -> bool {
        match self {
            Series::Bu => n >= 2 && n.is_multiple_of(2),
            Series::Bso => n >= 1 && matches!(n % 8, 0 | 1 | 2 | 4),
        }
    }

    /// Parses a stage: a number n (the cover X⟨n⟩ with π_{<n} killed) or, for BSO,
    /// one of o, so, spin, string, fivebrane.
    pub fn parse_stage(self, stage: &str) -> Result<u32, CoverError> {
        let invalid = || CoverError::InvalidStage {
            series: self,
            stage: stage.to_string(),
        };
        let n = match (self, stage.to_ascii_lowercase().as_str()) {
            (Series::Bso, "o") => 1,
            (Series::Bso, "so") => 2,
            (Series::Bso, "spin") => 4,
            (Series::Bso, "string") => 8,
            (Series::Bso, "fivebrane") => 9,
            (_, s) => s.parse::<u32>().map_err(|_| invalid())?,
        };
        // Stage 1 is the space itself; for BU that is stage 2 as π₁ = 0.
        if self.has_homotopy(n) || (self == Series::Bso && n == 1) {
            Ok(n)
        } else {
            Err(invalid())
        }
    }
}

/// One Gysin step: the sphere-like fibre K(ℚ, d−1) with Euler class the generator
/// of degree d, which is not a zero divisor, so the step is a quotient.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GysinStep {
    pub fibre_degree: u32,
    pub killed: String,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CoverRing {
    pub series: Series,
    pub stage: u32,
    pub generators: Vec<(String, u32)>,
    pub steps: Vec<GysinStep>,
    pub max_degree: u32,
}

/// Starts from P[c₁, c₂, …] or P[p₁, p₂, …] and quotients by each generator whose
/// homotopy group lies below the stage.
pub fn rational_cover_cohomology(
    series: Series,
    stage: u32,
    max_degree: u32,
) -> Result<CoverRing, CoverError> {
    series.parse_stage(&stage.to_string())?;
    let mut generators: Vec<(String, u32)> = (1..)
        .map(|i| {
            (
                format!("{}{}", series.prefix(), i),
                series.generator_degree(i),
            )
        })
        .take_while(|(_, d)| *d <= max_degree.max(stage))
        .collect();
    let mut steps = Vec::new();
    while let Some((name, d)) = generators.first().cloned() {
        if d >= stage {
            break;
        }
        generators.remove(0);
        steps.push(GysinStep {
            fibre_degree: d - 1,
            killed: name,
        });
    }
    generators.retain(|(_, d)| *d <= max_degree);
    Ok(CoverRing {
        series,
        stage,
        generators,
        steps,
        max_degree,
    })
}

impl CoverRing {
    /// The surviving polynomial ring, truncated at `max_degree`.
    pub fn polynomial_ring(&self) -> Result<Arc<GradedRing>, CoverError> {
        Ok(GradedRing::new(self.generators.clone(), self.max_degree)?)
    }

    /// `P[p2, p3, p4]`, with a trailing `, ...` since the ring continues past max_degree.
    pub fn render(&self) -> String {
        let names: Vec<&str> = self.generators.iter().map(|(n, _)| n.as_str()).collect();
        if names.is_empty() {
            "P[...]".into()
        } else {
            format!("P[{}, ...]", names.join(", "))
        }
    }

    pub fn degrees(&self) -> Vec<u32> {
        self.generators.iter().map(|(_, d)| *d).collect()
    }
}

/// Number of monomials in each degree 0..=up_to.
pub fn betti_table(ring: &CoverRing, up_to: u32) -> BTreeMap<u32, u64> {
    betti_numbers(&ring.degrees(), up_to)
        .into_iter()
        .enumerate()
        .map(|(d, b)| (d as u32, b))
        .collect()
}

/// Coin-change count of multisets of generator degrees summing to each degree.
pub fn betti_numbers(degrees: &[u32], up_to: u32) -> Vec<u64> {
    let n = up_to as usize;
    let mut b = vec![0u64; n + 1];
    b[0] = 1;
    for &g in degrees {
        let g = g as usize;
        if g == 0 {
            continue;
        }
        for d in g..=n {
            b[d] += b[d - g];
        }
    }
    b
}

/// A free graded-commutative algebra on even (polynomial) and odd (exterior)
/// generators with a differential fixed on generators.
#[derive(Clone, Debug)]
pub struct FreeCdga {
    names: Vec<String>,
    degrees: Vec<u32>,
    differential: Vec<Element>,
}

/// Sparse element: monomial exponents → coefficient.
pub type Element = BTreeMap<Vec<u32>, BigRational>;

impl FreeCdga {
    pub fn new(generators: &[(&str, u32)]) -> Self {
        Self {
            names: generators.iter().map(|(n, _)| n.to_string()).collect(),
            degrees: generators.iter().map(|(_, d)| *d).collect(),
            differential: vec![Element::new(); generators.len()],
        }
    }

    pub fn index(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    pub fn generator(&self, name: &str) -> Option<Element> {
        let i = self.index(name)?;
        let mut e = vec![0; self.names.len()];
        e[i] = 1;
        Some(Element::from([(e, BigRational::one())]))
    }

    fn degree_of(&self, m: &[u32]) -> u32 {
        m.iter().zip(&self.degrees).map(|(e, d)| e * d).sum()
    }

    /// Sets d(gen) = value, checking that d has degree +1.
    pub fn set_differential(&mut self, name: &str, value: Element) -> Result<(), CoverError> {
        let i = self
            .index(name)
            .ok_or_else(|| CoverError::Degree(format!("unknown generator `{name}`")))?;
        for m in value.keys() {
            if self.degree_of(m) != self.degrees[i] + 1 {
                return Err(CoverError::Degree(format!(
                    "d({name}) must have degree {}",
                    self.degrees[i] + 1
                )));
            }
        }
        self.differential[i] = value;
        Ok(())
    }

    /// Checks d∘d = 0 on every generator.
    pub fn check_square_zero(&self) -> Result<(), CoverError> {
        for (i, dx) in self.differential.iter().enumerate() {
            if !self.d(dx).is_empty() {
                return Err(CoverError::NotADifferential(self.names[i].clone()));
            }
        }
        Ok(())
    }

    fn monomial_product(&self, a: &[u32], b: &[u32]) -> Option<(Vec<u32>, bool)> {
        // Sign from moving each odd generator of b past the odd generators of a with
        // larger index.
        let mut negative = false;
        for (j, &eb) in b.iter().enumerate() {
            if eb == 0 || self.degrees[j].is_multiple_of(2) {
                continue;
            }
            if a[j] > 0 {
                return None;
            }
            let passed: u32 = a
                .iter()
                .enumerate()
                .skip(j + 1)
                .filter(|(i, e)| **e > 0 && self.degrees[*i] % 2 == 1)
                .count() as u32;
            negative ^= passed % 2 == 1;
        }
        let m = a.iter().zip(b).map(|(x, y)| x + y).collect();
        Some((m, negative))
    }

    pub fn multiply(&self, a: &Element, b: &Element) -> Element {
        let mut out = Element::new();
        for (ma, ca) in a {
            for (mb, cb) in b {
                if let Some((m, neg)) = self.monomial_product(ma, mb) {
                    let c = ca * cb;
                    let c = if neg { -c } else { c };
                    add_term(&mut out, m, c);
                }
            }
        }
        out
    }

    /// The differential of a monomial by the graded Leibniz rule.
    pub fn d_monomial(&self, m: &[u32]) -> Element {
        let mut out = Element::new();
        let n = m.len();
        let mut prefix_degree = 0;
        for i in 0..n {
            if m[i] == 0 {
                continue;
            }
            let mut prefix = vec![0; n];
            prefix[..i].copy_from_slice(&m[..i]);
            let mut rest = vec![0; n];
            rest[i + 1..].copy_from_slice(&m[i + 1..]);
            // d(x^e) = e·x^{e-1}·dx for even x; odd x has e = 1.
            let mut power = vec![0; n];
            power[i] = m[i] - 1;
            let coeff = BigRational::from_integer(m[i].into());
            let mut piece: Element = self.differential[i]
                .iter()
                .map(|(k, v)| (k.clone(), v * &coeff))
                .collect();
            piece = self.multiply(&Element::from([(power, BigRational::one())]), &piece);
            let left = Element::from([(prefix, BigRational::one())]);
            let right = Element::from([(rest, BigRational::one())]);
            let term = self.multiply(&self.multiply(&left, &piece), &right);
            let sign_negative = prefix_degree % 2 == 1;
            for (k, v) in term {
                add_term(&mut out, k, if sign_negative { -v } else { v });
            }
            prefix_degree += m[i] * self.degrees[i];
        }
        out
    }

    pub fn d(&self, x: &Element) -> Element {
        let mut out = Element::new();
        for (m, c) in x {
            for (k, v) in self.d_monomial(m) {
                add_term(&mut out, k, v * c);
            }
        }
        out
    }

    /// Monomials of degree `d`.
    pub fn basis(&self, d: u32) -> Vec<Vec<u32>> {
        let mut out = Vec::new();
        let mut cur = vec![0; self.names.len()];
        self.enumerate(0, d, &mut cur, &mut out);
        out
    }

    fn enumerate(&self, i: usize, remaining: u32, cur: &mut Vec<u32>, out: &mut Vec<Vec<u32>>) {
        if i == self.names.len() {
            if remaining == 0 {
                out.push(cur.clone());
            }
            return;
        }
        let g = self.degrees[i];
        let max = if g == 0 {
            0
        } else if g % 2 == 1 {
            1.min(remaining / g)
        } else {
            remaining / g
        };
        for e in 0..=max {
            cur[i] = e;
            self.enumerate(i + 1, remaining - e * g, cur, out);
        }
        cur[i] = 0;
    }

    fn rank_of_d(&self, d: u32) -> usize {
        let rows: Vec<Vec<BigRational>> = {
            let target = self.basis(d + 1);
            let index: BTreeMap<&Vec<u32>, usize> =
                target.iter().enumerate().map(|(i, m)| (m, i)).collect();
            self.basis(d)
                .iter()
                .map(|m| {
                    let mut row = vec![BigRational::zero(); target.len()];
                    for (k, v) in self.d_monomial(m) {
                        row[index[&k]] = v;
                    }
                    row
                })
                .collect()
        };
        rank(rows)
    }

    /// dim Hᵈ for d = 0..=max_degree.
    pub fn cohomology_dims(&self, max_degree: u32) -> Vec<usize> {
        let ranks: Vec<usize> = (0..=max_degree).map(|d| self.rank_of_d(d)).collect();
        (0..=max_degree as usize)
            .map(|d| {
                let dim = self.basis(d as u32).len();
                let into = if d == 0 { 0 } else { ranks[d - 1] };
                dim - ranks[d] - into
            })
            .collect()
    }

    pub fn render(&self, x: &Element) -> String {
        if x.is_empty() {
            return "0".into();
        }
        let terms: Vec<String> = x
            .iter()
            .map(|(m, c)| {
                let mono: Vec<String> = m
                    .iter()
                    .zip(&self.names)
                    .filter(|(e, _)| **e > 0)
                    .map(|(e, n)| {
                        if *e == 1 {
                            n.clone()
                        } else {
                            format!("{n}^{e}")
                        }
                    })
                    .collect();
                let mono = if mono.is_empty() {
                    "1".to_string()
                } else {
                    mono.join("*")
                };
                format!("{}*{}", crate::rational::render(c), mono)
            })
            .collect();
        terms.join(" + ")
    }
}

fn add_term(out: &mut Element, m: Vec<u32>, c: BigRational) {
    if c.is_zero() {
        return;
    }
    let e = out.entry(m).or_insert_with(BigRational::zero);
    *e += c;
    if e.is_zero() {
        out.retain(|_, v| !v.is_zero());
    }
}

/// Rank over ℚ by Gaussian elimination.
pub fn rank(mut rows: Vec<Vec<BigRational>>) -> usize {
    let cols = rows.first().map_or(0, Vec::len);
    let mut r = 0;
    for c in 0..cols {
        let Some(p) = (r..rows.len()).find(|&i| !rows[i][c].is_zero()) else {
            continue;
        };
        rows.swap(r, p);
        let pivot = rows[r][c].clone();
        let pivot_row: Vec<BigRational> = rows[r].iter().map(|x| x / &pivot).collect();
        for (i, row) in rows.iter_mut().enumerate() {
            if i != r && !row[c].is_zero() {
                let f = row[c].clone();
                for (x, y) in row.iter_mut().zip(&pivot_row) {
                    *x -= &f * y;
                }
            }
        }
        rows[r] = pivot_row;
        r += 1;
    }
    r
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SerreReport {
    /// dim Hᵈ of the page for d = 0..=max_degree.
    pub cohomology: Vec<usize>,
    /// dim of the page itself in each degree.
    pub page: Vec<usize>,
}

impl SerreReport {
    /// Whether the only surviving class is the unit in degree 0.
    pub fn concentrated_in_degree_zero(&self) -> bool {
        self.cohomology.first() == Some(&1) && self.cohomology[1..].iter().all(|&h| h == 0)
    }
}

/// The page ΛV ⊗ ℚ[y] with y of degree 2 and d(y) the given combination of degree-3
/// exterior generators, extended as a derivation. Returns the algebra and its cohomology.
pub fn serre_page_check(
    exterior: &[(&str, u32)],
    transgression: &[(&str, BigRational)],
    max_degree: u32,
) -> Result<(FreeCdga, SerreReport), CoverError> {
    for (name, d) in exterior {
        if d % 2 == 0 {
            return Err(CoverError::Degree(format!("`{name}` must have odd degree")));
        }
    }
    let mut gens: Vec<(&str, u32)> = exterior.to_vec();
    gens.push(("y", 2));
    let mut alg = FreeCdga::new(&gens);
    let mut dy = Element::new();
    for (name, c) in transgression {
        let g = alg
            .generator(name)
            .ok_or_else(|| CoverError::Degree(format!("unknown generator `{name}`")))?;
        for (m, _) in g {
            add_term(&mut dy, m, c.clone());
        }
    }
    alg.set_differential("y", dy)?;
    alg.check_square_zero()?;
    let cohomology = alg.cohomology_dims(max_degree);
    let page = (0..=max_degree).map(|d| alg.basis(d).len()).collect();
    Ok((alg, SerreReport { cohomology, page }))
}
