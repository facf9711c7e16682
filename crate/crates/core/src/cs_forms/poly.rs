//! Polynomials over ℚ in the coordinates x1..xn of a patch (n ≤ 8), and square
//! matrices of them.

use std::collections::HashMap;
use std::fmt;

use num_rational::BigRational;
use num_traits::{One, Signed, Zero};

use crate::expr::{self, Algebra, ExprError};
use crate::rational;

pub const MAX_PATCH_DIM: u8 = 8;

/// Packed monomial: the exponent of x_{k+1} sits in byte k.
pub type Monomial = u64;

fn exponent(m: Monomial, k: usize) -> u32 {
    ((m >> (8 * k)) & 0xff) as u32
}

fn total_degree(m: Monomial) -> u32 {
    (0..8).map(|k| exponent(m, k)).sum()
}

/// Sparse polynomial; terms sorted by monomial with no zero coefficients.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct CoordPoly {
    dim: u8,
    terms: Vec<(Monomial, BigRational)>,
}

impl CoordPoly {
    pub fn zero(dim: u8) -> Self {
        assert!(
            dim <= MAX_PATCH_DIM,
            "patch dimension above {MAX_PATCH_DIM}"
        );
        Self {
            dim,
            terms: Vec::new(),
        }
    }

    pub fn constant(dim: u8, c: BigRational) -> Self {
        let mut p = Self::zero(dim);
        if !c.is_zero() {
            p.terms.push((0, c));
        }
        p
    }

    pub fn one(dim: u8) -> Self {
        Self::constant(dim, BigRational::one())
    }

    /// The coordinate x_{k+1}.
    pub fn coordinate(dim: u8, k: usize) -> Self {
        assert!(k < dim as usize, "coordinate out of range");
        Self {
            dim,
            terms: vec![(1u64 << (8 * k), BigRational::one())],
        }
    }

    /// c · ∏ x_{k+1}^{exps[k]}.
    pub fn monomial(dim: u8, exps: &[u32], c: BigRational) -> Self {
        assert!(exps.len() <= dim as usize);
        let mut m = 0u64;
        for (k, &e) in exps.iter().enumerate() {
            assert!(e < 256, "exponent too large");
            m |= (e as u64) << (8 * k);
        }
        let mut p = Self::zero(dim);
        if !c.is_zero() {
            p.terms.push((m, c));
        }
        p
    }

    pub fn dim(&self) -> u8 {
        self.dim
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn num_terms(&self) -> usize {
        self.terms.len()
    }

    pub fn terms(&self) -> impl Iterator<Item = (Vec<u32>, &BigRational)> {
        let n = self.dim as usize;
        self.terms
            .iter()
            .map(move |(m, c)| ((0..n).map(|k| exponent(*m, k)).collect(), c))
    }

    pub fn degree(&self) -> u32 {
        self.terms
            .iter()
            .map(|(m, _)| total_degree(*m))
            .max()
            .unwrap_or(0)
    }

    pub fn as_constant(&self) -> Option<BigRational> {
        match self.terms.as_slice() {
            [] => Some(BigRational::zero()),
            [(0, c)] => Some(c.clone()),
            _ => None,
        }
    }

    pub fn add(&self, other: &Self) -> Self {
        debug_assert_eq!(self.dim, other.dim);
        let mut terms = Vec::with_capacity(self.terms.len() + other.terms.len());
        let (mut i, mut j) = (0, 0);
        let (a, b) = (&self.terms, &other.terms);
        while i < a.len() && j < b.len() {
            match a[i].0.cmp(&b[j].0) {
                std::cmp::Ordering::Less => {
                    terms.push(a[i].clone());
                    i += 1;
                }
                std::cmp::Ordering::Greater => {
                    terms.push(b[j].clone());
                    j += 1;
                }
                std::cmp::Ordering::Equal => {
                    let c = &a[i].1 + &b[j].1;
                    if !c.is_zero() {
                        terms.push((a[i].0, c));
                    }
                    i += 1;
                    j += 1;
                }
            }
        }
        terms.extend_from_slice(&a[i..]);
        terms.extend_from_slice(&b[j..]);
        Self {
            dim: self.dim,
            terms,
        }
    }

    pub fn neg(&self) -> Self {
        Self {
            dim: self.dim,
            terms: self.terms.iter().map(|(m, c)| (*m, -c)).collect(),
        }
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.add(&other.neg())
    }

    pub fn scale(&self, c: &BigRational) -> Self {
        if c.is_zero() {
            return Self::zero(self.dim);
        }
        Self {
            dim: self.dim,
            terms: self.terms.iter().map(|(m, x)| (*m, x * c)).collect(),
        }
    }

    pub fn mul(&self, other: &Self) -> Self {
        debug_assert_eq!(self.dim, other.dim);
        if self.is_zero() || other.is_zero() {
            return Self::zero(self.dim);
        }
        assert!(
            self.degree() + other.degree() < 256,
            "coordinate degree overflow"
        );
        if let [(0, c)] = self.terms.as_slice() {
            return other.scale(c);
        }
        if let [(0, c)] = other.terms.as_slice() {
            return self.scale(c);
        }
        let mut acc: HashMap<Monomial, BigRational> =
            HashMap::with_capacity(self.terms.len() * other.terms.len());
        for (ma, ca) in &self.terms {
            for (mb, cb) in &other.terms {
                let c = ca * cb;
                acc.entry(ma + mb).and_modify(|x| *x += &c).or_insert(c);
            }
        }
        let mut terms: Vec<(Monomial, BigRational)> =
            acc.into_iter().filter(|(_, c)| !c.is_zero()).collect();
        terms.sort_unstable_by_key(|(m, _)| *m);
        Self {
            dim: self.dim,
            terms,
        }
    }

    /// ∂/∂x_{k+1}.
    pub fn derivative(&self, k: usize) -> Self {
        let shift = 8 * k;
        let terms = self
            .terms
            .iter()
            .filter_map(|(m, c)| {
                let e = (m >> shift) & 0xff;
                (e > 0).then(|| (m - (1u64 << shift), c * BigRational::from_integer(e.into())))
            })
            .collect::<Vec<_>>();
        // Lowering one exponent preserves the order of the remaining monomials.
        Self {
            dim: self.dim,
            terms,
        }
    }

    /// Parses a polynomial in x1..xn.
    pub fn parse(dim: u8, text: &str) -> Result<Self, ExprError> {
        expr::evaluate(&Self::zero(dim), &expr::parse(text)?)
    }

    pub fn render(&self) -> String {
        if self.terms.is_empty() {
            return "0".into();
        }
        let mut sorted: Vec<&(Monomial, BigRational)> = self.terms.iter().collect();
        sorted.sort_by_key(|(m, _)| (total_degree(*m), std::cmp::Reverse(m.swap_bytes())));
        let mut out = String::new();
        for (i, (m, c)) in sorted.into_iter().enumerate() {
            let mono: Vec<String> = (0..self.dim as usize)
                .filter(|&k| exponent(*m, k) > 0)
                .map(|k| match exponent(*m, k) {
                    1 => format!("x{}", k + 1),
                    e => format!("x{}^{}", k + 1, e),
                })
                .collect();
            let mag = c.abs();
            let body = match (mono.is_empty(), mag.is_one()) {
                (true, _) => rational::render(&mag),
                (false, true) => mono.join("*"),
                (false, false) => format!("{}*{}", rational::render(&mag), mono.join("*")),
            };
            match (i, c.is_negative()) {
                (0, true) => out.push('-'),
                (0, false) => {}
                (_, true) => out.push_str(" - "),
                (_, false) => out.push_str(" + "),
            }
            out.push_str(&body);
        }
        out
    }
}

impl fmt::Display for CoordPoly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.render())
    }
}

/// Bound on term pairs per product while reading text, so hostile input fails fast.
const MAX_PARSE_PRODUCT: usize = 1 << 20;

impl Algebra for CoordPoly {
    fn from_rational(&self, r: BigRational) -> Self {
        Self::constant(self.dim, r)
    }

    fn variable(&self, name: &str, offset: usize) -> Result<Self, ExprError> {
        let k = name
            .strip_prefix('x')
            .filter(|s| !s.starts_with('0'))
            .and_then(|s| s.parse::<usize>().ok())
            .filter(|k| (1..=self.dim as usize).contains(k))
            .ok_or_else(|| {
                ExprError::new(
                    offset,
                    format!("unknown coordinate `{name}` (patch has x1..x{})", self.dim),
                )
            })?;
        Ok(Self::coordinate(self.dim, k - 1))
    }

    fn add(&self, a: Self, b: Self) -> Result<Self, ExprError> {
        Ok(CoordPoly::add(&a, &b))
    }

    fn mul(&self, a: Self, b: Self, offset: usize) -> Result<Self, ExprError> {
        if a.degree() + b.degree() >= 256 {
            return Err(ExprError::new(offset, "polynomial degree too large"));
        }
        if a.num_terms().saturating_mul(b.num_terms()) > MAX_PARSE_PRODUCT {
            return Err(ExprError::new(offset, "polynomial too large"));
        }
        Ok(CoordPoly::mul(&a, &b))
    }

    fn neg(&self, a: Self) -> Self {
        CoordPoly::neg(&a)
    }

    fn as_constant(&self, a: &Self) -> Option<BigRational> {
        CoordPoly::as_constant(a)
    }
}

/// Square matrix of coordinate polynomials, row-major.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct PolyMatrix {
    size: usize,
    entries: Vec<CoordPoly>,
}

impl PolyMatrix {
    pub fn zero(dim: u8, size: usize) -> Self {
        Self {
            size,
            entries: vec![CoordPoly::zero(dim); size * size],
        }
    }

    pub fn identity(dim: u8, size: usize) -> Self {
        let mut m = Self::zero(dim, size);
        for i in 0..size {
            m.entries[i * size + i] = CoordPoly::one(dim);
        }
        m
    }

    pub fn from_rows(rows: Vec<Vec<CoordPoly>>) -> Option<Self> {
        let size = rows.len();
        if size == 0 || rows.iter().any(|r| r.len() != size) {
            return None;
        }
        let dim = rows[0][0].dim;
        if rows.iter().flatten().any(|p| p.dim != dim) {
            return None;
        }
        Some(Self {
            size,
            entries: rows.into_iter().flatten().collect(),
        })
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn dim(&self) -> u8 {
        self.entries[0].dim
    }

    pub fn get(&self, i: usize, j: usize) -> &CoordPoly {
        &self.entries[i * self.size + j]
    }

    pub fn set(&mut self, i: usize, j: usize, p: CoordPoly) {
        self.entries[i * self.size + j] = p;
    }

    pub fn rows(&self) -> impl Iterator<Item = &[CoordPoly]> {
        self.entries.chunks(self.size)
    }

    pub fn is_zero(&self) -> bool {
        self.entries.iter().all(CoordPoly::is_zero)
    }

    pub fn add(&self, other: &Self) -> Self {
        Self {
            size: self.size,
            entries: self
                .entries
                .iter()
                .zip(&other.entries)
                .map(|(a, b)| a.add(b))
                .collect(),
        }
    }

    pub fn neg(&self) -> Self {
        Self {
            size: self.size,
            entries: self.entries.iter().map(CoordPoly::neg).collect(),
        }
    }

    pub fn scale(&self, c: &BigRational) -> Self {
        Self {
            size: self.size,
            entries: self.entries.iter().map(|p| p.scale(c)).collect(),
        }
    }

    pub fn mul(&self, other: &Self) -> Self {
        let n = self.size;
        let dim = self.dim();
        let mut entries = Vec::with_capacity(n * n);
        for i in 0..n {
            for j in 0..n {
                let mut acc = CoordPoly::zero(dim);
                for k in 0..n {
                    let a = self.get(i, k);
                    let b = other.get(k, j);
                    if !a.is_zero() && !b.is_zero() {
                        acc = acc.add(&a.mul(b));
                    }
                }
                entries.push(acc);
            }
        }
        Self { size: n, entries }
    }

    pub fn derivative(&self, k: usize) -> Self {
        Self {
            size: self.size,
            entries: self.entries.iter().map(|p| p.derivative(k)).collect(),
        }
    }

    pub fn trace(&self) -> CoordPoly {
        (0..self.size).fold(CoordPoly::zero(self.dim()), |acc, i| {
            acc.add(self.get(i, i))
        })
    }

    pub fn render(&self) -> String {
        let rows: Vec<String> = self
            .rows()
            .map(|r| {
                let cells: Vec<String> = r.iter().map(CoordPoly::render).collect();
                format!("[{}]", cells.join(", "))
            })
            .collect();
        format!("[{}]", rows.join(", "))
    }
}
