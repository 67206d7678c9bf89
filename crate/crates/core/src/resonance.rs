//! Resonant quartic monomials `a_{j1} conj(a_{j2}) b_{l1} conj(b_{l2})`.
//!
//! A quadruple is resonant when both its momentum `j1 - j2 + l1 - l2` and its
//! frequency combination `j1^2 - j2^2 + l1^2 - l2^2` vanish; these are exactly
//! the monomials that commute with the quadratic part `sum j^2 (I_j + J_j)`.
//! Enumeration here is a literal scan (momentum fixes the last index, nothing
//! else is assumed), so that the closed-form characterization and the closed
//! form of the resonant polynomial can be checked against it.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::par::{self, Execution};
use crate::spectral::ModeVector;

/// Default cap on quadruple evaluations for one enumeration.
pub const DEFAULT_BUDGET: u128 = 1_000_000_000;

/// Indices `(j1, j2, l1, l2)` of a quartic monomial.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Quadruple {
    pub j1: i64,
    pub j2: i64,
    pub l1: i64,
    pub l2: i64,
}

impl Quadruple {
    pub const fn new(j1: i64, j2: i64, l1: i64, l2: i64) -> Self {
        Self { j1, j2, l1, l2 }
    }

    pub fn momentum(&self) -> i64 {
        self.j1 - self.j2 + self.l1 - self.l2
    }

    pub fn divisor(&self) -> i64 {
        self.j1 * self.j1 - self.j2 * self.j2 + self.l1 * self.l1 - self.l2 * self.l2
    }

    /// `{j1, l1} = {j2, l2}` as multisets.
    pub fn is_resonant_characterization(&self) -> bool {
        (self.j1 == self.j2 && self.l1 == self.l2) || (self.j1 == self.l2 && self.l1 == self.j2)
    }

    /// `a_{j1} conj(a_{j2}) b_{l1} conj(b_{l2})`.
    pub fn monomial(&self, u: &ModeVector, v: &ModeVector) -> Complex64 {
        u.get(self.j1) * u.get(self.j2).conj() * v.get(self.l1) * v.get(self.l2).conj()
    }
}

impl std::fmt::Display for Quadruple {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "({}, {}, {}, {})", self.j1, self.j2, self.l1, self.l2)
    }
}

pub fn momentum(q: Quadruple) -> i64 {
    q.momentum()
}

pub fn divisor(q: Quadruple) -> i64 {
    q.divisor()
}

pub fn is_resonant_characterization(q: Quadruple) -> bool {
    q.is_resonant_characterization()
}

fn check_budget(radius: i64, budget: u128) -> Result<()> {
    if radius < 0 {
        return Err(Error::Domain(format!("enumeration radius must be >= 0, got {radius}")));
    }
    let side = (2 * radius + 1) as u128;
    let required = side.pow(4);
    if required > budget {
        return Err(Error::Budget {
            radius,
            required,
            budget,
        });
    }
    Ok(())
}

/// Every momentum-zero quadruple with first index `j1` and components in
/// `[-radius, radius]`, in lexicographic order.
fn momentum_zero_slice(j1: i64, radius: i64) -> impl Iterator<Item = Quadruple> {
    (-radius..=radius).flat_map(move |j2| {
        (-radius..=radius).filter_map(move |l1| {
            let l2 = j1 - j2 + l1;
            (l2.abs() <= radius).then_some(Quadruple::new(j1, j2, l1, l2))
        })
    })
}

/// All resonant quadruples in `[-J, J]^4`, lexicographically ordered.
pub fn enumerate_resonant(radius: i64) -> Result<Vec<Quadruple>> {
    enumerate_resonant_with(radius, DEFAULT_BUDGET, Execution::default())
}

pub fn enumerate_resonant_with(radius: i64, budget: u128, exec: Execution) -> Result<Vec<Quadruple>> {
    check_budget(radius, budget)?;
    let slices = par::map_range(exec, -radius, radius, |j1| {
        momentum_zero_slice(j1, radius)
            .filter(|q| q.divisor() == 0)
            .collect::<Vec<_>>()
    });
    Ok(slices.into_iter().flatten().collect())
}

/// Smallest nonzero `|divisor|` over momentum-zero quadruples, with the
/// lexicographically first quadruple attaining it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DivisorScan {
    pub radius: i64,
    pub min_nonzero_divisor: i64,
    pub witness: Quadruple,
}

pub fn small_divisor_scan(radius: i64) -> Result<DivisorScan> {
    small_divisor_scan_with(radius, DEFAULT_BUDGET, Execution::default())
}

pub fn small_divisor_scan_with(radius: i64, budget: u128, exec: Execution) -> Result<DivisorScan> {
    if radius < 1 {
        return Err(Error::Domain(format!(
            "small-divisor scan needs radius >= 1, got {radius}"
        )));
    }
    check_budget(radius, budget)?;
    let per_slice = par::map_range(exec, -radius, radius, |j1| {
        momentum_zero_slice(j1, radius)
            .filter(|q| q.divisor() != 0)
            .min_by_key(|q| (q.divisor().abs(), *q))
    });
    let (min, witness) = per_slice
        .into_iter()
        .flatten()
        .map(|q| (q.divisor().abs(), q))
        .min()
        .expect("radius >= 1 always has an off-resonant quadruple");
    Ok(DivisorScan {
        radius,
        min_nonzero_divisor: min,
        witness,
    })
}

/// Resonant polynomial summed monomial by monomial over the enumerated set.
pub fn z4_direct(u: &ModeVector, v: &ModeVector, radius: i64) -> Result<Complex64> {
    z4_direct_with(u, v, radius, Execution::default())
}

pub fn z4_direct_with(u: &ModeVector, v: &ModeVector, radius: i64, exec: Execution) -> Result<Complex64> {
    let support = u.support_radius().max(v.support_radius());
    if radius < support as i64 {
        return Err(Error::Coverage { radius, support });
    }
    let set = enumerate_resonant_with(radius, DEFAULT_BUDGET, exec)?;
    Ok(set.iter().map(|q| q.monomial(u, v)).sum())
}

/// `I J + |S|^2 - sum_n |u_n|^2 |v_n|^2` with `I = sum |u_n|^2`,
/// `J = sum |v_n|^2`, `S = sum u_n conj(v_n)`.
pub fn z4_closed(u: &ModeVector, v: &ModeVector) -> f64 {
    let radius = u.truncation().max(v.truncation()) as i64;
    let mut mass_u = 0.0;
    let mut mass_v = 0.0;
    let mut overlap = Complex64::new(0.0, 0.0);
    let mut diagonal = 0.0;
    for n in -radius..=radius {
        let (a, b) = (u.get(n), v.get(n));
        mass_u += a.norm_sqr();
        mass_v += b.norm_sqr();
        overlap += a * b.conj();
        diagonal += a.norm_sqr() * b.norm_sqr();
    }
    mass_u * mass_v + overlap.norm_sqr() - diagonal
}

/// Seeded pair of mode vectors with independent uniform real and imaginary
/// parts in `[-1, 1)`.
pub fn seeded_pair(seed: u64, truncation: usize) -> (ModeVector, ModeVector) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut draw = || {
        ModeVector::from_fn(truncation, |_| {
            Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
        })
    };
    let u = draw();
    let v = draw();
    (u, v)
}

/// Outcome of comparing the direct and closed forms on one pair.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Z4Comparison {
    pub seed: u64,
    pub direct_re: f64,
    pub direct_im: f64,
    pub closed: f64,
}

impl Z4Comparison {
    pub fn scale(&self) -> f64 {
        1.0 + self.closed.abs()
    }

    pub fn real_gap(&self) -> f64 {
        (Complex64::new(self.direct_re, self.direct_im) - self.closed).norm()
    }

    /// Holds at `|direct - closed| <= 1e-10 (1 + |closed|)` and
    /// `|Im direct| <= 1e-12 (1 + |closed|)`.
    pub fn passes(&self) -> bool {
        self.real_gap() <= 1e-10 * self.scale() && self.direct_im.abs() <= 1e-12 * self.scale()
    }
}

/// Direct vs closed form over `count` seeded pairs, one pair per work item.
pub fn z4_identity_batch(
    first_seed: u64,
    count: usize,
    truncation: usize,
    radius: i64,
    exec: Execution,
) -> Result<Vec<Z4Comparison>> {
    let set = enumerate_resonant_with(radius, DEFAULT_BUDGET, exec)?;
    if radius < truncation as i64 {
        return Err(Error::Coverage {
            radius,
            support: truncation,
        });
    }
    let seeds: Vec<u64> = (0..count as u64).map(|k| first_seed + k).collect();
    Ok(par::map_ordered(exec, &seeds, |&seed| {
        let (u, v) = seeded_pair(seed, truncation);
        let direct: Complex64 = set.iter().map(|q| q.monomial(&u, &v)).sum();
        Z4Comparison {
            seed,
            direct_re: direct.re,
            direct_im: direct.im,
            closed: z4_closed(&u, &v),
        }
    }))
}

/// Independent descriptions of the resonant set, used to cross-check
/// [`enumerate_resonant`].
pub mod oracle {
    use super::Quadruple;

    /// Plain four-fold loop over `[-J, J]^4` testing both defining equations.
    pub fn literal_scan(radius: i64) -> Vec<Quadruple> {
        let r = -radius..=radius;
        let mut out = Vec::new();
        for j1 in r.clone() {
            for j2 in r.clone() {
                for l1 in r.clone() {
                    for l2 in r.clone() {
                        let q = Quadruple::new(j1, j2, l1, l2);
                        if q.momentum() == 0 && q.divisor() == 0 {
                            out.push(q);
                        }
                    }
                }
            }
        }
        out
    }

    /// Quadruples in `[-J, J]^4` with `{j1, l1} = {j2, l2}` as multisets.
    pub fn characterization_filter(radius: i64) -> Vec<Quadruple> {
        let r = -radius..=radius;
        let mut out = Vec::new();
        for j1 in r.clone() {
            for j2 in r.clone() {
                for l1 in r.clone() {
                    for l2 in r.clone() {
                        let q = Quadruple::new(j1, j2, l1, l2);
                        if q.is_resonant_characterization() {
                            out.push(q);
                        }
                    }
                }
            }
        }
        out
    }
}

/// Three-way comparison of the enumerated set with both oracles.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SetEquality {
    pub radius: i64,
    pub enumerated: usize,
    pub literal: usize,
    pub characterized: usize,
    pub equal: bool,
}

pub fn three_way_set_equality(radius: i64, exec: Execution) -> Result<SetEquality> {
    let enumerated = enumerate_resonant_with(radius, DEFAULT_BUDGET, exec)?;
    let literal = oracle::literal_scan(radius);
    let characterized = oracle::characterization_filter(radius);
    Ok(SetEquality {
        radius,
        enumerated: enumerated.len(),
        literal: literal.len(),
        characterized: characterized.len(),
        equal: enumerated == literal && literal == characterized,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::BTreeSet;

    fn q(j1: i64, j2: i64, l1: i64, l2: i64) -> Quadruple {
        Quadruple::new(j1, j2, l1, l2)
    }

    #[test]
    fn momentum_and_divisor_examples() {
        assert_eq!(q(3, 1, 1, 3).momentum(), 0);
        assert_eq!(q(0, 0, 0, 0).momentum(), 0);
        assert_eq!(q(2, 1, 0, 1).momentum(), 0);
        assert_eq!(q(3, 1, 1, 3).divisor(), 0);
        assert_eq!(q(2, 1, 0, 1).divisor(), 2);
        assert_eq!(q(0, 0, 0, 0).divisor(), 0);
    }

    #[test]
    fn characterization_examples() {
        assert!(q(3, 1, 1, 3).is_resonant_characterization());
        assert!(!q(2, 1, 0, 1).is_resonant_characterization());
        assert!(q(5, 5, 7, 7).is_resonant_characterization());
    }

    #[test]
    fn radius_zero_has_only_origin() {
        assert_eq!(enumerate_resonant(0).unwrap(), vec![q(0, 0, 0, 0)]);
    }

    #[test]
    fn radius_two_count_matches_exhaustive_scan() {
        let mut count = 0;
        for j1 in -2i64..=2 {
            for j2 in -2i64..=2 {
                for l1 in -2i64..=2 {
                    for l2 in -2i64..=2 {
                        if j1 - j2 + l1 - l2 == 0 && j1 * j1 - j2 * j2 + l1 * l1 - l2 * l2 == 0 {
                            count += 1;
                        }
                    }
                }
            }
        }
        // 2 * 5^2 - 5: pairs with j1 = j2, l1 = l2 plus pairs with j1 = l2,
        // l1 = j2, minus the 5 counted twice
        assert_eq!(count, 45);
        assert_eq!(enumerate_resonant(2).unwrap().len(), count);
    }

    #[test]
    fn enumerated_set_is_sorted_and_characterized() {
        let set = enumerate_resonant(5).unwrap();
        assert!(set.windows(2).all(|w| w[0] < w[1]));
        assert!(set.iter().all(|q| q.is_resonant_characterization()));
    }

    #[test]
    fn three_way_equality_small_radii() {
        for r in 0..=4 {
            let eq = three_way_set_equality(r, Execution::Sequential).unwrap();
            assert!(eq.equal, "radius {r}: {eq:?}");
            let set: BTreeSet<_> = enumerate_resonant(r).unwrap().into_iter().collect();
            assert_eq!(set.len(), eq.literal);
        }
    }

    #[test]
    fn budget_is_enforced() {
        let err = enumerate_resonant_with(10, 1000, Execution::Sequential).unwrap_err();
        assert!(matches!(err, Error::Budget { required: 194_481, .. }));
        assert!(small_divisor_scan_with(3, 100, Execution::Sequential).is_err());
        assert!(enumerate_resonant(-1).is_err());
    }

    #[test]
    fn small_divisor_minimum_is_two() {
        for r in 1..=6 {
            let scan = small_divisor_scan(r).unwrap();
            let mut literal = i64::MAX;
            for j1 in -r..=r {
                for j2 in -r..=r {
                    for l1 in -r..=r {
                        for l2 in -r..=r {
                            let d = j1 * j1 - j2 * j2 + l1 * l1 - l2 * l2;
                            if j1 - j2 + l1 - l2 == 0 && d != 0 {
                                literal = literal.min(d.abs());
                            }
                        }
                    }
                }
            }
            assert_eq!(scan.min_nonzero_divisor, literal);
            assert_eq!(scan.min_nonzero_divisor, 2);
            assert!(scan.min_nonzero_divisor >= 1);
            assert_eq!(scan.witness.divisor().abs(), 2);
            assert_eq!(scan.witness.momentum(), 0);
        }
        assert!(small_divisor_scan(0).is_err());
    }

    proptest::proptest! {
        #[test]
        fn divisor_factors_on_zero_momentum(j1 in -50i64..50, j2 in -50i64..50, l1 in -50i64..50) {
            let quad = q(j1, j2, l1, j1 - j2 + l1);
            proptest::prop_assert_eq!(quad.momentum(), 0);
            proptest::prop_assert_eq!(quad.divisor(), 2 * (j1 - j2) * (j2 - l1));
        }
    }

    #[test]
    fn z4_single_mode_examples() {
        let one = Complex64::new(1.0, 0.0);
        let u = ModeVector::single(3, 2, one);
        let z = z4_direct(&u, &u, 3).unwrap();
        assert!((z - one).norm() < 1e-15);
        assert_eq!(z4_closed(&u, &u), 1.0);

        let u = ModeVector::single(2, 0, one);
        let v = ModeVector::single(2, 1, one);
        assert!((z4_direct(&u, &v, 2).unwrap() - one).norm() < 1e-15);
        assert_eq!(z4_closed(&u, &v), 1.0);
    }

    #[test]
    fn z4_coverage_error() {
        let u = ModeVector::single(5, 4, Complex64::new(1.0, 0.0));
        assert!(matches!(z4_direct(&u, &u, 3), Err(Error::Coverage { support: 4, .. })));
        // zero padding beyond the support is fine
        assert!(z4_direct(&u, &u, 4).is_ok());
    }

    #[test]
    fn z4_forms_agree_on_seeded_pairs() {
        let batch = z4_identity_batch(7, 20, 8, 8, Execution::Sequential).unwrap();
        assert!(batch.iter().all(Z4Comparison::passes));
    }

    #[test]
    fn parallel_and_sequential_enumerations_agree() {
        let a = enumerate_resonant_with(6, DEFAULT_BUDGET, Execution::Sequential).unwrap();
        let b = enumerate_resonant_with(6, DEFAULT_BUDGET, Execution::Parallel).unwrap();
        assert_eq!(a, b);
    }

    proptest::proptest! {
        #[test]
        fn z4_closed_symmetric(seed in 0u64..100_000, n in 0usize..9) {
            let (u, v) = seeded_pair(seed, n);
            proptest::prop_assert_eq!(z4_closed(&u, &v), z4_closed(&v, &u));
        }

        #[test]
        fn characterization_implies_resonance(j1 in -50i64..50, j2 in -50i64..50, l1 in -50i64..50) {
            let l2 = j1 - j2 + l1;
            let q = Quadruple::new(j1, j2, l1, l2);
            proptest::prop_assert_eq!(q.divisor() == 0, q.is_resonant_characterization());
        }
    }
}
