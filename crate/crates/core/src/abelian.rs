//! Finitely generated abelian groups ℤ^r ⊕ ℤ/n₁ ⊕ … ⊕ ℤ/n_t, optionally with some
//! primes inverted, and the Smith normal form used to present their quotients.

use std::fmt;

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use thiserror::Error;

#[derive(Clone, Debug, Error, PartialEq, Eq)]
pub enum GroupError {
    #[error("torsion order {0} is invalid; orders must be at least 2")]
    BadOrder(u64),
    #[error("element has {got} coordinates, group needs {expected}")]
    Shape { expected: usize, got: usize },
    #[error("quotients are only supported before localization")]
    Localized,
    #[error("free coordinate {0} is not integral")]
    NonIntegral(String),
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Hash)]
pub struct AbelianGroup {
    free_rank: usize,
    torsion: Vec<u64>,
    inverted_primes: Vec<u64>,
}

impl AbelianGroup {
    pub fn new(free_rank: usize, torsion: Vec<u64>) -> Result<Self, GroupError> {
        if let Some(&bad) = torsion.iter().find(|&&n| n < 2) {
            return Err(GroupError::BadOrder(bad));
        }
        Ok(Self {
            free_rank,
            torsion,
            inverted_primes: Vec::new(),
        })
    }

    pub fn trivial() -> Self {
        Self::default()
    }

    pub fn free_rank(&self) -> usize {
        self.free_rank
    }

    pub fn torsion(&self) -> &[u64] {
        &self.torsion
    }

    pub fn inverted_primes(&self) -> &[u64] {
        &self.inverted_primes
    }

    pub fn is_trivial(&self) -> bool {
        self.free_rank == 0 && self.torsion.is_empty()
    }

    /// Number of coordinates of an element: free ones first, then torsion ones.
    pub fn num_generators(&self) -> usize {
        self.free_rank + self.torsion.len()
    }

    /// Tensoring with ℤ[1/p] for each p in `primes`: torsion orders lose those prime
    /// factors (orders reduced to 1 disappear) and the free part gains denominators.
    pub fn localized(&self, primes: &[u64]) -> Self {
        let mut inverted: Vec<u64> = self
            .inverted_primes
            .iter()
            .chain(primes)
            .copied()
            .filter(|p| *p >= 2)
            .collect();
        inverted.sort_unstable();
        inverted.dedup();
        let torsion = self
            .torsion
            .iter()
            .map(|&n| strip_primes(n, &inverted))
            .filter(|&n| n > 1)
            .collect();
        Self {
            free_rank: self.free_rank,
            torsion,
            inverted_primes: inverted,
        }
    }

    /// Whether `d` becomes a unit in the coefficient ring ℤ[1/inverted primes].
    pub fn is_unit(&self, d: &BigInt) -> bool {
        let mut d = d.abs();
        if d.is_zero() {
            return false;
        }
        for &p in &self.inverted_primes {
            let p = BigInt::from(p);
            while (&d % &p).is_zero() {
                d /= &p;
            }
        }
        d.is_one()
    }

    /// Whether `x` is a legal free coordinate (its denominator is a unit).
    pub fn admits(&self, x: &BigRational) -> bool {
        self.is_unit(x.denom())
    }

    /// Order of the m-torsion subgroup {y : m·y = 0}. The free part contributes nothing.
    pub fn m_torsion_order(&self, m: u64) -> BigInt {
        self.torsion
            .iter()
            .map(|&n| BigInt::from(m.gcd(&n)))
            .product()
    }

    /// Quotient by the subgroup generated by `generators`, each given by integral
    /// free coordinates followed by torsion residues, presented in invariant-factor form.
    pub fn quotient(&self, generators: &[(Vec<BigInt>, Vec<u64>)]) -> Result<Self, GroupError> {
        if !self.inverted_primes.is_empty() {
            return Err(GroupError::Localized);
        }
        let cols = self.num_generators();
        let mut rows: Vec<Vec<BigInt>> = Vec::new();
        for (i, &n) in self.torsion.iter().enumerate() {
            let mut row = vec![BigInt::zero(); cols];
            row[self.free_rank + i] = BigInt::from(n);
            rows.push(row);
        }
        for (free, tors) in generators {
            if free.len() != self.free_rank || tors.len() != self.torsion.len() {
                return Err(GroupError::Shape {
                    expected: cols,
                    got: free.len() + tors.len(),
                });
            }
            let mut row: Vec<BigInt> = free.clone();
            row.extend(tors.iter().map(|&t| BigInt::from(t)));
            rows.push(row);
        }
        let diag = smith_normal_form(rows, cols);
        let rank = diag.len();
        let torsion: Vec<u64> = diag
            .iter()
            .filter(|d| !d.is_one())
            .map(|d| d.to_u64().expect("invariant factor fits in u64"))
            .collect();
        Ok(Self {
            free_rank: cols - rank,
            torsion,
            inverted_primes: Vec::new(),
        })
    }

    /// All t in ℤ/n with m·t ≡ a (mod n), for the i-th torsion factor.
    pub fn solve_torsion(&self, i: usize, m: &BigInt, a: u64) -> Vec<u64> {
        solve_linear_congruence(m, a, self.torsion[i])
    }
}

impl fmt::Display for AbelianGroup {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_trivial() {
            return f.write_str("0");
        }
        let ring = if self.inverted_primes.is_empty() {
            "Z".to_string()
        } else {
            let ps: Vec<String> = self.inverted_primes.iter().map(|p| p.to_string()).collect();
            format!("Z[1/{}]", ps.join(","))
        };
        let mut parts = Vec::new();
        match self.free_rank {
            0 => {}
            1 => parts.push(ring),
            r => parts.push(format!("{ring}^{r}")),
        }
        parts.extend(self.torsion.iter().map(|n| format!("Z/{n}")));
        f.write_str(&parts.join(" + "))
    }
}

fn strip_primes(mut n: u64, primes: &[u64]) -> u64 {
    for &p in primes {
        while n.is_multiple_of(p) {
            n /= p;
        }
    }
    n
}

/// Solutions of m·t ≡ a (mod n) in [0, n): gcd(m, n) of them or none.
pub fn solve_linear_congruence(m: &BigInt, a: u64, n: u64) -> Vec<u64> {
    let nb = BigInt::from(n);
    let mm = m.mod_floor(&nb);
    let g = mm.gcd(&nb);
    let g = if g.is_zero() { nb.clone() } else { g };
    let a_b = BigInt::from(a);
    if !(&a_b % &g).is_zero() {
        return Vec::new();
    }
    let step = &nb / &g;
    let m_red = (&mm / &g).mod_floor(&step);
    let a_red = (&a_b / &g).mod_floor(&step);
    let t0 = if step.is_one() {
        BigInt::zero()
    } else {
        let inv = mod_inverse(&m_red, &step).expect("coprime after dividing by gcd");
        (a_red * inv).mod_floor(&step)
    };
    let g = g.to_u64().expect("gcd divides n");
    let step = step.to_u64().expect("step divides n");
    let t0 = t0.to_u64().expect("residue below n");
    (0..g).map(|k| t0 + k * step).collect()
}

fn mod_inverse(a: &BigInt, n: &BigInt) -> Option<BigInt> {
    let e = a.extended_gcd(n);
    e.gcd.is_one().then(|| e.x.mod_floor(n))
}

/// Invariant factors of an integer matrix (the nonzero diagonal entries of its
/// Smith normal form, each dividing the next), by elementary row and column moves.
pub fn smith_normal_form(mut m: Vec<Vec<BigInt>>, cols: usize) -> Vec<BigInt> {
    let rows = m.len();
    let mut diag = Vec::new();
    let mut t = 0;
    while t < rows && t < cols {
        // pivot: smallest nonzero |entry| in the remaining block
        let pivot = (t..rows)
            .flat_map(|i| (t..cols).map(move |j| (i, j)))
            .filter(|&(i, j)| !m[i][j].is_zero())
            .min_by(|&(a, b), &(c, d)| m[a][b].abs().cmp(&m[c][d].abs()));
        let Some((pi, pj)) = pivot else { break };
        m.swap(t, pi);
        for row in m.iter_mut() {
            row.swap(t, pj);
        }
        loop {
            let mut changed = false;
            for i in t + 1..rows {
                if m[i][t].is_zero() {
                    continue;
                }
                let qt = m[i][t].div_floor(&m[t][t]);
                for j in t..cols {
                    let v = &m[t][j] * &qt;
                    m[i][j] -= v;
                }
                if !m[i][t].is_zero() {
                    m.swap(t, i);
                    changed = true;
                }
            }
            for j in t + 1..cols {
                if m[t][j].is_zero() {
                    continue;
                }
                let qt = m[t][j].div_floor(&m[t][t]);
                for row in m.iter_mut().skip(t) {
                    let v = &row[t] * &qt;
                    row[j] -= v;
                }
                if !m[t][j].is_zero() {
                    for row in m.iter_mut() {
                        row.swap(t, j);
                    }
                    changed = true;
                }
            }
            if changed {
                continue;
            }
            // Divisibility: fold any entry not divisible by the pivot into row t.
            let bad = (t + 1..rows)
                .flat_map(|i| (t + 1..cols).map(move |j| (i, j)))
                .find(|&(i, j)| !(&m[i][j] % &m[t][t]).is_zero());
            match bad {
                Some((i, _)) => {
                    for j in t..cols {
                        let v = m[i][j].clone();
                        m[t][j] += v;
                    }
                }
                None => break,
            }
        }
        diag.push(m[t][t].abs());
        t += 1;
    }
    diag
}

#[cfg(test)]
mod tests {
    use super::*;

    fn b(n: i64) -> BigInt {
        BigInt::from(n)
    }

    #[test]
    fn congruences_match_brute_force() {
        for n in 2..=24u64 {
            for m in -30i64..=30 {
                for a in 0..n {
                    let mut brute: Vec<u64> = (0..n)
                        .filter(|t| (m * *t as i64 - a as i64).rem_euclid(n as i64) == 0)
                        .collect();
                    brute.sort_unstable();
                    let mut got = solve_linear_congruence(&b(m), a, n);
                    got.sort_unstable();
                    assert_eq!(got, brute, "m={m} a={a} n={n}");
                }
            }
        }
    }

    #[test]
    fn localization_strips_primes() {
        let g = AbelianGroup::new(1, vec![2, 3, 9]).unwrap();
        assert_eq!(g.localized(&[2, 3]).torsion(), &[] as &[u64]);
        let h = AbelianGroup::new(0, vec![2, 3]).unwrap();
        assert_eq!(h.localized(&[2]).torsion(), &[3]);
        assert_eq!(h.localized(&[]), h);
        assert_eq!(
            AbelianGroup::new(0, vec![12])
                .unwrap()
                .localized(&[2])
                .torsion(),
            &[3]
        );
        assert!(g.localized(&[2, 3]).is_unit(&b(6)));
        assert!(!g.localized(&[2]).is_unit(&b(6)));
        assert_eq!(g.localized(&[3, 2]).to_string(), "Z[1/2,3]");
    }

    #[test]
    fn snf_examples() {
        assert_eq!(
            smith_normal_form(vec![vec![b(2), b(4)], vec![b(6), b(8)]], 2),
            vec![b(2), b(4)]
        );
        assert_eq!(
            smith_normal_form(vec![vec![b(2), b(0)], vec![b(0), b(3)]], 2),
            vec![b(1), b(6)]
        );
        assert_eq!(
            smith_normal_form(vec![vec![b(0), b(0)]], 2),
            Vec::<BigInt>::new()
        );
    }

    #[test]
    fn snf_determinant_is_preserved() {
        // |det| equals the product of invariant factors for square nonsingular matrices.
        let cases = [
            vec![
                vec![b(3), b(1), b(4)],
                vec![b(1), b(5), b(9)],
                vec![b(2), b(6), b(5)],
            ],
            vec![
                vec![b(6), b(0), b(0)],
                vec![b(0), b(10), b(0)],
                vec![b(0), b(0), b(15)],
            ],
        ];
        for c in cases {
            let det = det3(&c);
            let diag = smith_normal_form(c, 3);
            assert_eq!(diag.len(), 3);
            assert_eq!(diag.iter().product::<BigInt>(), det.abs());
            for w in diag.windows(2) {
                assert!((&w[1] % &w[0]).is_zero());
            }
        }
    }

    fn det3(m: &[Vec<BigInt>]) -> BigInt {
        &m[0][0] * (&m[1][1] * &m[2][2] - &m[1][2] * &m[2][1])
            - &m[0][1] * (&m[1][0] * &m[2][2] - &m[1][2] * &m[2][0])
            + &m[0][2] * (&m[1][0] * &m[2][1] - &m[1][1] * &m[2][0])
    }

    #[test]
    fn quotients() {
        let g = AbelianGroup::new(1, vec![2]).unwrap();
        assert_eq!(g.quotient(&[]).unwrap(), g);
        assert_eq!(
            g.quotient(&[(vec![b(2)], vec![0])]).unwrap().to_string(),
            "Z/2 + Z/2"
        );
        assert_eq!(
            g.quotient(&[(vec![b(1)], vec![1])]).unwrap().to_string(),
            "Z/2"
        );
        assert_eq!(
            g.quotient(&[(vec![b(0)], vec![1])]).unwrap().to_string(),
            "Z"
        );
        assert!(g.localized(&[2]).quotient(&[]).is_err());
        assert!(g.quotient(&[(vec![], vec![1])]).is_err());
    }

    #[test]
    fn m_torsion() {
        let g = AbelianGroup::new(1, vec![2, 3]).unwrap();
        assert_eq!(g.m_torsion_order(6), b(6));
        assert_eq!(g.m_torsion_order(8), b(2));
        assert_eq!(
            AbelianGroup::new(0, vec![8]).unwrap().m_torsion_order(8),
            b(8)
        );
    }

    #[test]
    fn rejects_bad_orders() {
        assert_eq!(AbelianGroup::new(0, vec![1]), Err(GroupError::BadOrder(1)));
        assert_eq!(
            AbelianGroup::new(0, vec![2, 0]),
            Err(GroupError::BadOrder(0))
        );
    }

    #[test]
    fn display() {
        assert_eq!(AbelianGroup::trivial().to_string(), "0");
        assert_eq!(
            AbelianGroup::new(2, vec![2, 3]).unwrap().to_string(),
            "Z^2 + Z/2 + Z/3"
        );
    }
}
