//! Matrix-valued differential forms on a coordinate patch.

use std::collections::BTreeMap;
use std::fmt;

use num_rational::BigRational;

use super::poly::{CoordPoly, PolyMatrix, MAX_PATCH_DIM};
use super::FormError;
use crate::par::{self, Execution};

/// Index set of a basis form dx_{i1}∧…∧dx_{iq}, bit k standing for dx_{k+1}.
pub type IndexSet = u16;

/// Sign of dx_I ∧ dx_J after sorting into dx_{I∪J}; `None` when they overlap.
fn merge_sign(i: IndexSet, j: IndexSet) -> Option<bool> {
    if i & j != 0 {
        return None;
    }
    // Count pairs (a ∈ I, b ∈ J) with a > b.
    let mut inversions = 0u32;
    let mut bits = j;
    while bits != 0 {
        let b = bits.trailing_zeros();
        inversions += (i >> (b + 1)).count_ones();
        bits &= bits - 1;
    }
    Some(inversions % 2 == 1)
}

/// A homogeneous q-form whose coefficients are m×m polynomial matrices. Scalar forms
/// have m = 1. Only nonzero components are stored.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MatrixPolyForm {
    dim: u8,
    size: usize,
    degree: u32,
    components: BTreeMap<IndexSet, PolyMatrix>,
}

impl MatrixPolyForm {
    pub fn zero(dim: u8, size: usize, degree: u32) -> Self {
        assert!(
            dim <= MAX_PATCH_DIM,
            "patch dimension above {MAX_PATCH_DIM}"
        );
        Self {
            dim,
            size,
            degree,
            components: BTreeMap::new(),
        }
    }

    /// A 0-form.
    pub fn function(m: PolyMatrix) -> Self {
        let mut f = Self::zero(m.dim(), m.size(), 0);
        f.insert(0, m);
        f
    }

    /// The 1-form Σ A_k dx_{k+1}.
    pub fn one_form(
        dim: u8,
        size: usize,
        coefficients: Vec<PolyMatrix>,
    ) -> Result<Self, FormError> {
        if coefficients.len() != dim as usize {
            return Err(FormError::Shape(format!(
                "a 1-form on a {dim}-dimensional patch needs {dim} components"
            )));
        }
        let mut f = Self::zero(dim, size, 1);
        for (k, m) in coefficients.into_iter().enumerate() {
            if m.size() != size || m.dim() != dim {
                return Err(FormError::Shape("component shape mismatch".into()));
            }
            f.insert(1 << k, m);
        }
        Ok(f)
    }

    /// Builds a form from (index list, matrix) pairs; indices are 1-based and may be
    /// in any order (the sign of the permutation is applied).
    pub fn from_components(
        dim: u8,
        size: usize,
        degree: u32,
        parts: Vec<(Vec<usize>, PolyMatrix)>,
    ) -> Result<Self, FormError> {
        let mut f = Self::zero(dim, size, degree);
        for (idx, m) in parts {
            if idx.len() != degree as usize {
                return Err(FormError::Shape(format!("expected {degree} indices")));
            }
            if m.size() != size || m.dim() != dim {
                return Err(FormError::Shape("component shape mismatch".into()));
            }
            let mut mask: IndexSet = 0;
            let mut negative = false;
            for &i in &idx {
                if i == 0 || i > dim as usize {
                    return Err(FormError::Shape(format!("index {i} outside 1..{dim}")));
                }
                let bit = 1 << (i - 1);
                match merge_sign(mask, bit) {
                    None => {
                        mask = 0;
                        break;
                    }
                    Some(s) => {
                        negative ^= s;
                        mask |= bit;
                    }
                }
            }
            if mask == 0 && degree > 0 {
                continue; // repeated index
            }
            let m = if negative { m.neg() } else { m };
            f.accumulate(mask, m);
        }
        Ok(f)
    }

    fn insert(&mut self, mask: IndexSet, m: PolyMatrix) {
        if !m.is_zero() {
            self.components.insert(mask, m);
        }
    }

    fn accumulate(&mut self, mask: IndexSet, m: PolyMatrix) {
        let sum = match self.components.remove(&mask) {
            Some(old) => old.add(&m),
            None => m,
        };
        self.insert(mask, sum);
    }

    pub fn dim(&self) -> u8 {
        self.dim
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn degree(&self) -> u32 {
        self.degree
    }

    pub fn is_zero(&self) -> bool {
        self.components.is_empty()
    }

    pub fn components(&self) -> &BTreeMap<IndexSet, PolyMatrix> {
        &self.components
    }

    /// The coefficient of dx_I for 1-based sorted indices.
    pub fn component(&self, indices: &[usize]) -> Option<&PolyMatrix> {
        let mask = indices.iter().fold(0, |m, i| m | (1 << (i - 1)));
        self.components.get(&mask)
    }

    fn same_shape(&self, other: &Self) -> Result<(), FormError> {
        if self.dim != other.dim || self.size != other.size {
            return Err(FormError::Shape(
                "forms live on different patches or bundles".into(),
            ));
        }
        Ok(())
    }

    pub fn add(&self, other: &Self) -> Result<Self, FormError> {
        self.same_shape(other)?;
        if self.degree != other.degree && !self.is_zero() && !other.is_zero() {
            return Err(FormError::Degree {
                expected: self.degree,
                got: other.degree,
            });
        }
        let mut out = if self.is_zero() {
            other.clone()
        } else {
            self.clone()
        };
        let rest = if self.is_zero() { self } else { other };
        for (&k, m) in &rest.components {
            out.accumulate(k, m.clone());
        }
        Ok(out)
    }

    pub fn neg(&self) -> Self {
        Self {
            components: self.components.iter().map(|(k, m)| (*k, m.neg())).collect(),
            ..self.clone()
        }
    }

    pub fn sub(&self, other: &Self) -> Result<Self, FormError> {
        self.add(&other.neg())
    }

    pub fn scale(&self, c: &BigRational) -> Self {
        let mut out = Self::zero(self.dim, self.size, self.degree);
        for (&k, m) in &self.components {
            out.insert(k, m.scale(c));
        }
        out
    }

    /// Exterior derivative.
    pub fn d(&self) -> Self {
        let mut out = Self::zero(self.dim, self.size, self.degree + 1);
        for (&mask, m) in &self.components {
            for k in 0..self.dim as usize {
                let bit: IndexSet = 1 << k;
                let Some(negative) = merge_sign(bit, mask) else {
                    continue;
                };
                let dm = m.derivative(k);
                if dm.is_zero() {
                    continue;
                }
                out.accumulate(mask | bit, if negative { dm.neg() } else { dm });
            }
        }
        out
    }

    /// α ∧ β with matrix multiplication of coefficients.
    pub fn wedge(&self, other: &Self) -> Result<Self, FormError> {
        self.wedge_with(other, Execution::default())
    }

    pub fn wedge_with(&self, other: &Self, exec: Execution) -> Result<Self, FormError> {
        self.same_shape(other)?;
        let degree = self.degree + other.degree;
        let pairs: Vec<(IndexSet, bool, &PolyMatrix, &PolyMatrix)> = self
            .components
            .iter()
            .flat_map(|(&i, a)| {
                other
                    .components
                    .iter()
                    .filter_map(move |(&j, b)| merge_sign(i, j).map(|s| (i | j, s, a, b)))
            })
            .collect();
        let products = par::map(exec, &pairs, |(mask, negative, a, b)| {
            let p = a.mul(b);
            (*mask, if *negative { p.neg() } else { p })
        });
        let mut out = Self::zero(self.dim, self.size, degree);
        for (mask, p) in products {
            out.accumulate(mask, p);
        }
        Ok(out)
    }

    /// Componentwise trace, giving a scalar form.
    pub fn trace(&self) -> Self {
        let mut out = Self::zero(self.dim, 1, self.degree);
        for (&k, m) in &self.components {
            let t = m.trace();
            out.insert(k, PolyMatrix::from_rows(vec![vec![t]]).expect("1x1"));
        }
        out
    }

    /// Left and right multiplication by 0-form matrices: g ω h.
    pub fn conjugate_by(&self, left: &PolyMatrix, right: &PolyMatrix) -> Self {
        let mut out = Self::zero(self.dim, self.size, self.degree);
        for (&k, m) in &self.components {
            out.insert(k, left.mul(m).mul(right));
        }
        out
    }

    /// The single coefficient of a scalar form of top degree.
    pub fn scalar_terms(&self) -> Vec<(Vec<usize>, CoordPoly)> {
        self.components
            .iter()
            .map(|(&mask, m)| (indices(mask), m.get(0, 0).clone()))
            .collect()
    }

    pub fn num_terms(&self) -> usize {
        self.components
            .values()
            .flat_map(|m| {
                m.rows()
                    .flatten()
                    .map(CoordPoly::num_terms)
                    .collect::<Vec<_>>()
            })
            .sum()
    }

    pub fn render(&self) -> String {
        if self.components.is_empty() {
            return "0".into();
        }
        let parts: Vec<String> = self
            .components
            .iter()
            .map(|(&mask, m)| {
                let basis = basis_name(mask);
                let coeff = if self.size == 1 {
                    format!("({})", m.get(0, 0).render())
                } else {
                    m.render()
                };
                if basis.is_empty() {
                    coeff
                } else {
                    format!("{coeff} {basis}")
                }
            })
            .collect();
        parts.join(" + ")
    }
}

impl fmt::Display for MatrixPolyForm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.render())
    }
}

pub fn indices(mask: IndexSet) -> Vec<usize> {
    (0..16)
        .filter(|k| mask & (1 << k) != 0)
        .map(|k| k + 1)
        .collect()
}

fn basis_name(mask: IndexSet) -> String {
    indices(mask)
        .iter()
        .map(|i| format!("dx{i}"))
        .collect::<Vec<_>>()
        .join("^")
}
