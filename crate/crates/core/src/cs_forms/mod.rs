//! Exact exterior calculus for connections on a coordinate patch: curvature,
//! Chern character forms and Chern–Simons transgressions.
//!
//! A connection is a matrix-valued 1-form A with polynomial coefficients, its
//! curvature is F = dA + A∧A. The transgression of Tr(F^j) is computed from the
//! homotopy A_t = tA, F_t = tF + (t² − t)A∧A:
//!
//! ```text
//! T_{2j-1} = j ∫₀¹ Tr(A ∧ F_t^{j-1}) dt,     dT_{2j-1} = Tr(F^j).
//! ```
//!
//! Expanding F_t^{j-1} into words with a copies of F and b copies of A∧A, the
//! t-integral of t^{a+b}(t − 1)^b is (−1)^b (a+b)! b! / (a+2b+1)!, so the integral is
//! done in closed form and only the word sums are formed.

mod form;
mod poly;

use std::fmt;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::One;
use thiserror::Error;

pub use form::{indices, IndexSet, MatrixPolyForm};
pub use poly::{CoordPoly, Monomial, PolyMatrix, MAX_PATCH_DIM};

use crate::par::Execution;
use crate::rational::factorial;

#[derive(Clone, Debug, Error, PartialEq, Eq)]
pub enum FormError {
    #[error("expected a {expected}-form, got a {got}-form")]
    Degree { expected: u32, got: u32 },
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("g * g^-1 is not the identity")]
    NotInverse,
    #[error("transgression index must be at least 1")]
    BadIndex,
}

/// A normalization constant r · i^k / (2π)^n, kept symbolic so all arithmetic stays in ℚ.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Prefactor {
    pub rational: BigRational,
    /// Power of i, reduced mod 4.
    pub i_power: u32,
    pub two_pi_power: u32,
}

impl Prefactor {
    /// r · (i/2π)^j with i^j folded into the sign where it is real.
    pub fn new(rational: BigRational, j: u32) -> Self {
        let (sign, i_power) = match j % 4 {
            0 => (1, 0),
            1 => (1, 1),
            2 => (-1, 0),
            _ => (-1, 1),
        };
        Self {
            rational: rational * BigRational::from_integer(sign.into()),
            i_power,
            two_pi_power: j,
        }
    }
}

impl fmt::Display for Prefactor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let num = self.rational.numer();
        let den = self.rational.denom();
        let mut top = num.to_string();
        if self.i_power == 1 {
            top = if num.is_one() {
                "i".into()
            } else if *num == BigInt::from(-1) {
                "-i".into()
            } else {
                format!("{num}*i")
            };
        }
        let mut bottom = Vec::new();
        if !den.is_one() {
            bottom.push(den.to_string());
        }
        match self.two_pi_power {
            0 => {}
            1 => bottom.push("(2*pi)".into()),
            n => bottom.push(format!("(2*pi)^{n}")),
        }
        if bottom.is_empty() {
            f.write_str(&top)
        } else if bottom.len() == 1 {
            write!(f, "{top}/{}", bottom[0])
        } else {
            write!(f, "{top}/({})", bottom.join("*"))
        }
    }
}

fn expect_degree(form: &MatrixPolyForm, degree: u32) -> Result<(), FormError> {
    if form.degree() != degree {
        return Err(FormError::Degree {
            expected: degree,
            got: form.degree(),
        });
    }
    Ok(())
}

/// F = dA + A∧A.
pub fn curvature(a: &MatrixPolyForm) -> Result<MatrixPolyForm, FormError> {
    curvature_with(a, Execution::default())
}

pub fn curvature_with(a: &MatrixPolyForm, exec: Execution) -> Result<MatrixPolyForm, FormError> {
    expect_degree(a, 1)?;
    a.d().add(&a.wedge_with(a, exec)?)
}

/// ω^k for a matrix form; ω⁰ is the identity 0-form.
pub fn power(omega: &MatrixPolyForm, k: u32, exec: Execution) -> Result<MatrixPolyForm, FormError> {
    let mut acc = MatrixPolyForm::function(PolyMatrix::identity(omega.dim(), omega.size()));
    for _ in 0..k {
        acc = acc.wedge_with(omega, exec)?;
    }
    Ok(acc)
}

/// Tr(F^j) together with the normalization (1/j!)(i/2π)^j of ch_j.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CharacterForm {
    pub j: u32,
    pub trace_power: MatrixPolyForm,
    pub prefactor: Prefactor,
}

/// Unnormalized ch_j form. Forms of degree above the patch dimension are zero.
pub fn chern_character_form(f: &MatrixPolyForm, j: u32) -> Result<CharacterForm, FormError> {
    chern_character_form_with(f, j, Execution::default())
}

pub fn chern_character_form_with(
    f: &MatrixPolyForm,
    j: u32,
    exec: Execution,
) -> Result<CharacterForm, FormError> {
    expect_degree(f, 2)?;
    let prefactor = Prefactor::new(BigRational::new(BigInt::one(), factorial(j)), j);
    let trace_power = if 2 * j > f.dim() as u32 {
        MatrixPolyForm::zero(f.dim(), 1, 2 * j)
    } else {
        power(f, j, exec)?.trace()
    };
    Ok(CharacterForm {
        j,
        trace_power,
        prefactor,
    })
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Transgression {
    pub j: u32,
    /// T = j ∫₀¹ Tr(A ∧ F_t^{j-1}) dt, a scalar (2j−1)-form with dT = Tr(F^j).
    pub unnormalized_form: MatrixPolyForm,
    /// Multiplies `unnormalized_form`: (1/j!)(i/2π)^j.
    pub prefactor: Prefactor,
    /// Multiplies ∫₀¹ Tr(A ∧ F_t^{j-1}) dt: (1/(j−1)!)(i/2π)^j.
    pub integral_prefactor: Prefactor,
}

/// (−1)^b (a+b)! b! / (a+2b+1)! = ∫₀¹ t^{a+b} (t−1)^b dt.
pub fn word_weight(a: u32, b: u32) -> BigRational {
    let num = factorial(a + b) * factorial(b);
    let r = BigRational::new(num, factorial(a + 2 * b + 1));
    if b % 2 == 1 {
        -r
    } else {
        r
    }
}

pub fn cs_transgression(a: &MatrixPolyForm, j: u32) -> Result<Transgression, FormError> {
    cs_transgression_with(a, j, Execution::default())
}

pub fn cs_transgression_with(
    a: &MatrixPolyForm,
    j: u32,
    exec: Execution,
) -> Result<Transgression, FormError> {
    expect_degree(a, 1)?;
    if j == 0 {
        return Err(FormError::BadIndex);
    }
    let prefactor = Prefactor::new(BigRational::new(BigInt::one(), factorial(j)), j);
    let integral_prefactor = Prefactor::new(BigRational::new(BigInt::one(), factorial(j - 1)), j);
    let (dim, size) = (a.dim(), a.size());
    let out_degree = 2 * j - 1;
    if out_degree > dim as u32 {
        return Ok(Transgression {
            j,
            unnormalized_form: MatrixPolyForm::zero(dim, 1, out_degree),
            prefactor,
            integral_prefactor,
        });
    }
    let f = curvature_with(a, exec)?;
    let a2 = a.wedge_with(a, exec)?;
    let n = (j - 1) as usize;
    // words[a][b]: sum of all products of a copies of F and b copies of A∧A.
    let mut words: Vec<Vec<Option<MatrixPolyForm>>> = vec![vec![None; n + 1]; n + 1];
    words[0][0] = Some(MatrixPolyForm::function(PolyMatrix::identity(dim, size)));
    for total in 1..=n {
        for na in 0..=total {
            let nb = total - na;
            let mut acc: Option<MatrixPolyForm> = None;
            if na > 0 {
                let w = words[na - 1][nb]
                    .as_ref()
                    .expect("filled")
                    .wedge_with(&f, exec)?;
                acc = Some(w);
            }
            if nb > 0 {
                let w = words[na][nb - 1]
                    .as_ref()
                    .expect("filled")
                    .wedge_with(&a2, exec)?;
                acc = Some(match acc {
                    Some(x) => x.add(&w)?,
                    None => w,
                });
            }
            words[na][nb] = acc;
        }
    }
    let jq = BigRational::from_integer(j.into());
    let mut t = MatrixPolyForm::zero(dim, 1, out_degree);
    for na in 0..=n {
        let nb = n - na;
        let w = words[na][nb].as_ref().expect("filled");
        let term = a.wedge_with(w, exec)?.trace();
        let weight = word_weight(na as u32, nb as u32) * &jq;
        t = t.add(&term.scale(&weight))?;
    }
    Ok(Transgression {
        j,
        unnormalized_form: t,
        prefactor,
        integral_prefactor,
    })
}

/// Outcome of checking dT = Tr(F^j).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TransgressionCheck {
    pub j: u32,
    pub exact: bool,
    pub transgression: Transgression,
    pub character: CharacterForm,
}

pub fn verify_transgression(
    a: &MatrixPolyForm,
    j: u32,
    exec: Execution,
) -> Result<TransgressionCheck, FormError> {
    let transgression = cs_transgression_with(a, j, exec)?;
    let f = curvature_with(a, exec)?;
    let character = chern_character_form_with(&f, j, exec)?;
    let exact = transgression.unnormalized_form.d() == character.trace_power;
    Ok(TransgressionCheck {
        j,
        exact,
        transgression,
        character,
    })
}

/// A^g = g⁻¹ A g + g⁻¹ dg. Fails unless g · g⁻¹ = g⁻¹ · g = 1 exactly.
pub fn gauge_transform(
    a: &MatrixPolyForm,
    g: &PolyMatrix,
    g_inv: &PolyMatrix,
) -> Result<MatrixPolyForm, FormError> {
    expect_degree(a, 1)?;
    let id = PolyMatrix::identity(a.dim(), a.size());
    if g.size() != a.size() || g_inv.size() != a.size() {
        return Err(FormError::Shape(
            "gauge transformation has the wrong size".into(),
        ));
    }
    if g.mul(g_inv) != id || g_inv.mul(g) != id {
        return Err(FormError::NotInverse);
    }
    let dg = MatrixPolyForm::function(g.clone()).d();
    let maurer_cartan = MatrixPolyForm::function(g_inv.clone()).wedge(&dg)?;
    a.conjugate_by(g_inv, g).add(&maurer_cartan)
}

/// The pure-gauge connection g⁻¹dg.
pub fn pure_gauge(g: &PolyMatrix, g_inv: &PolyMatrix) -> Result<MatrixPolyForm, FormError> {
    let zero = MatrixPolyForm::zero(g.dim(), g.size(), 1);
    gauge_transform(&zero, g, g_inv)
}

/// Result of the decomposable transgression check d(T_P ∧ P′) = P ∧ P′.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SuspensionVerdict {
    pub transgresses: bool,
    pub closed_factor: bool,
    pub product_identity: bool,
}

impl SuspensionVerdict {
    pub fn holds(&self) -> bool {
        self.transgresses && self.closed_factor && self.product_identity
    }
}

/// Given dT = P and a closed P′, checks that T ∧ P′ transgresses P ∧ P′, so the
/// product contributes no new transgression.
pub fn suspension_strip(
    t: &MatrixPolyForm,
    p: &MatrixPolyForm,
    p_prime: &MatrixPolyForm,
) -> Result<SuspensionVerdict, FormError> {
    let transgresses = t.d() == *p;
    let closed_factor = p_prime.d().is_zero();
    let lhs = t.wedge(p_prime)?.d();
    let rhs = p.wedge(p_prime)?;
    Ok(SuspensionVerdict {
        transgresses,
        closed_factor,
        product_identity: lhs == rhs,
    })
}
