//! Random inputs for property tests, the acceptance suite and benchmarks.

use std::sync::Arc;

use num_bigint::BigInt;
use rand::Rng;

use crate::abelian::AbelianGroup;
use crate::bundle_model::{BaseSpace, Bundle, Field, StiefelWhitney};
use crate::cs_forms::{CoordPoly, MatrixPolyForm, PolyMatrix};
use crate::graded_ring::{GradedPoly, GradedRing};
use crate::rational::{int, q};

/// Shape of a random sparse connection.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ConnectionSpec {
    pub dim: u8,
    pub size: usize,
    /// Maximal total degree of a coefficient polynomial.
    pub max_degree: u32,
    /// Probability that a matrix entry of a component is nonzero.
    pub density: f64,
    /// Maximal number of monomials per entry.
    pub max_terms: usize,
}

impl ConnectionSpec {
    pub fn new(dim: u8, size: usize) -> Self {
        Self {
            dim,
            size,
            max_degree: 2,
            density: 0.5,
            max_terms: 2,
        }
    }
}

/// A polynomial with up to `max_terms` monomials of degree ≤ `max_degree` and small
/// nonzero rational coefficients.
pub fn random_poly<R: Rng + ?Sized>(
    rng: &mut R,
    dim: u8,
    max_degree: u32,
    max_terms: usize,
) -> CoordPoly {
    let mut p = CoordPoly::zero(dim);
    let terms = rng.random_range(1..=max_terms.max(1));
    for _ in 0..terms {
        let deg = rng.random_range(0..=max_degree);
        let mut exps = vec![0u32; dim as usize];
        for _ in 0..deg {
            exps[rng.random_range(0..dim as usize)] += 1;
        }
        let mut num = rng.random_range(-3i64..=3);
        if num == 0 {
            num = 1;
        }
        let den = if rng.random_bool(0.2) { 2 } else { 1 };
        p = p.add(&CoordPoly::monomial(dim, &exps, q(num, den)));
    }
    p
}

pub fn random_connection<R: Rng + ?Sized>(rng: &mut R, spec: ConnectionSpec) -> MatrixPolyForm {
    let comps = (0..spec.dim)
        .map(|_| {
            let mut m = PolyMatrix::zero(spec.dim, spec.size);
            for i in 0..spec.size {
                for j in 0..spec.size {
                    if rng.random_bool(spec.density) {
                        m.set(
                            i,
                            j,
                            random_poly(rng, spec.dim, spec.max_degree, spec.max_terms),
                        );
                    }
                }
            }
            m
        })
        .collect();
    MatrixPolyForm::one_form(spec.dim, spec.size, comps).expect("well-shaped")
}

/// A random polynomial gauge transformation and its exact inverse, built from
/// elementary matrices 1 + p·e_ij (i ≠ j) and constant diagonal scalings.
pub fn random_gauge<R: Rng + ?Sized>(
    rng: &mut R,
    dim: u8,
    size: usize,
    factors: usize,
    max_degree: u32,
) -> (PolyMatrix, PolyMatrix) {
    let mut g = PolyMatrix::identity(dim, size);
    let mut g_inv = PolyMatrix::identity(dim, size);
    for _ in 0..factors {
        let (e, e_inv) = if size > 1 && rng.random_bool(0.8) {
            let i = rng.random_range(0..size);
            let mut j = rng.random_range(0..size - 1);
            if j >= i {
                j += 1;
            }
            let p = random_poly(rng, dim, max_degree, 2);
            let mut e = PolyMatrix::identity(dim, size);
            let mut e_inv = PolyMatrix::identity(dim, size);
            e.set(i, j, p.clone());
            e_inv.set(i, j, p.neg());
            (e, e_inv)
        } else {
            let i = rng.random_range(0..size);
            let c = [int(2), int(-1), q(1, 3), q(-3, 2)][rng.random_range(0..4)].clone();
            let mut e = PolyMatrix::identity(dim, size);
            let mut e_inv = PolyMatrix::identity(dim, size);
            e.set(i, i, CoordPoly::constant(dim, c.clone()));
            e_inv.set(i, i, CoordPoly::constant(dim, c.recip()));
            (e, e_inv)
        };
        g = g.mul(&e);
        g_inv = e_inv.mul(&g_inv);
    }
    (g, g_inv)
}

/// The ring of formal degree-2 generators x1..xr, truncated at degree 2k.
pub fn formal_root_ring(r: usize, k: u32) -> Arc<GradedRing> {
    GradedRing::new((1..=r).map(|i| (format!("x{i}"), 2)), 2 * k).expect("valid ring")
}

/// `len` roots, each a nonzero integer multiple of one formal generator.
pub fn random_roots<R: Rng + ?Sized>(
    rng: &mut R,
    ring: &Arc<GradedRing>,
    len: usize,
) -> Vec<GradedPoly> {
    let gens = ring.generators().len();
    (0..len)
        .map(|_| {
            let g = ring
                .generator(&format!("x{}", rng.random_range(1..=gens)))
                .expect("generator");
            let mut m = rng.random_range(-4i64..=4);
            if m == 0 {
                m = 1;
            }
            g.times(m)
        })
        .collect()
}

/// A random base with torsion, a tangent-like real bundle and, sometimes, a gauge bundle.
pub fn random_ladder_input<R: Rng + ?Sized>(
    rng: &mut R,
) -> (Arc<BaseSpace>, Bundle, Option<Bundle>) {
    let torsion_choices: [u64; 5] = [2, 3, 4, 6, 8];
    let random_group = |rng: &mut R| {
        let free = rng.random_range(0..=2usize);
        let t: Vec<u64> = (0..rng.random_range(0..=2usize))
            .map(|_| torsion_choices[rng.random_range(0..torsion_choices.len())])
            .collect();
        AbelianGroup::new(free, t).expect("valid orders")
    };
    let mut x = BaseSpace::new("X", 10);
    for d in [3u32, 4, 7, 8] {
        if rng.random_bool(0.8) {
            x.declare(d, random_group(rng), vec![])
                .expect("valid declaration");
        }
    }
    let x = Arc::new(x);
    let random_class = |rng: &mut R, d: u32| {
        let g = x.group(d);
        let free = (0..g.group.free_rank())
            .map(|_| int(rng.random_range(-3i64..=3) * [1, 2, 6, 48][rng.random_range(0..4)]))
            .collect();
        let torsion = g
            .group
            .torsion()
            .iter()
            .map(|&n| BigInt::from(rng.random_range(0..n)))
            .collect();
        crate::bundle_model::CohClass::new(Arc::clone(&g), free, torsion).expect("valid class")
    };
    let sw = |rng: &mut R| match rng.random_range(0..5) {
        0 => StiefelWhitney::Unknown,
        1 => StiefelWhitney::NonVanishing(None),
        _ => StiefelWhitney::Vanishes,
    };
    let mut tx = Bundle::new("TX", Arc::clone(&x), Field::Real, 10);
    tx.w1 = sw(rng);
    tx.w2 = sw(rng);
    for (key, d) in [("p1", 4), ("p2", 8)] {
        if rng.random_bool(0.9) {
            let c = if rng.random_bool(0.3) {
                x.zero(d)
            } else {
                random_class(rng, d)
            };
            tx.set_class(key, c).expect("degree matches");
        }
    }
    if let Some(p2) = tx.lookup("p2") {
        if rng.random_bool(0.3) {
            let sols = crate::bundle_model::divide_class(&p2, 6);
            if !sols.is_empty() {
                let pick = sols[rng.random_range(0..sols.len())].clone();
                tx.set_class("sixth_p2", pick).expect("degree matches");
            }
        }
    }
    let e = rng.random_bool(0.6).then(|| {
        let mut e = Bundle::new("E", Arc::clone(&x), Field::Complex, 8);
        for (key, d) in [("ch2", 4), ("ch4", 8)] {
            if rng.random_bool(0.8) {
                let c = if rng.random_bool(0.3) {
                    x.zero(d)
                } else {
                    random_class(rng, d)
                };
                e.set_class(key, c).expect("degree matches");
            }
        }
        e
    });
    (x, tx, e)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::rngs::StdRng;
    use rand::SeedableRng;

    #[test]
    fn gauge_inverse_is_exact() {
        let mut rng = StdRng::seed_from_u64(7);
        for size in 1..=3 {
            let (g, gi) = random_gauge(&mut rng, 4, size, 4, 2);
            assert_eq!(g.mul(&gi), PolyMatrix::identity(4, size));
            assert_eq!(gi.mul(&g), PolyMatrix::identity(4, size));
        }
    }

    #[test]
    fn deterministic_given_seed() {
        let spec = ConnectionSpec::new(4, 2);
        let a = random_connection(&mut StdRng::seed_from_u64(1), spec);
        let b = random_connection(&mut StdRng::seed_from_u64(1), spec);
        assert_eq!(a, b);
        let (_, tx, _) = random_ladder_input(&mut StdRng::seed_from_u64(3));
        assert_eq!(tx.field, Field::Real);
    }
}
