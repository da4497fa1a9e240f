//! Finite-support probability distributions with exact rational weights.

use std::collections::BTreeMap;
use std::fmt;

use num_bigint::{BigInt, BigUint};
use num_integer::Integer;
use num_traits::{One, Zero};
use rand::RngCore;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::rational::Rat;
use super::{support_cap, KernelError, Value};

/// Build a rational from an integer pair.
pub fn rat(num: i64, den: i64) -> Rat {
    Rat::new(BigInt::from(num), BigInt::from(den))
}

/// Render a rational as `num/den`, always including the denominator.
pub fn rat_string(r: &Rat) -> String {
    r.to_string()
}

/// The seedable random source used for sampling. The algorithm is pinned:
/// ChaCha8 seeded via `seed_from_u64`, with weighted choices drawn by
/// rejection sampling of uniform big integers below the common denominator.
/// Replaying a seed reproduces the exact trace on any platform.
pub struct SampleRng(ChaCha8Rng);

impl SampleRng {
    pub fn from_seed(seed: u64) -> Self {
        SampleRng(ChaCha8Rng::seed_from_u64(seed))
    }

    pub fn next_u64(&mut self) -> u64 {
        self.0.next_u64()
    }

    /// Uniform in `[0, n)` without modulo bias.
    pub fn gen_below(&mut self, n: u64) -> u64 {
        assert!(n > 0);
        let zone = u64::MAX - (u64::MAX % n);
        loop {
            let r = self.0.next_u64();
            if r < zone {
                return r % n;
            }
        }
    }

    /// Uniform big integer in `[0, bound)`, `bound > 0`.
    fn below(&mut self, bound: &BigUint) -> BigUint {
        let bits = bound.bits();
        let bytes = ((bits + 7) / 8) as usize;
        let excess_bits = (bytes as u64) * 8 - bits;
        loop {
            let mut buf = vec![0u8; bytes];
            self.0.fill_bytes(&mut buf);
            // Mask the high byte so the candidate has at most `bits` bits.
            if excess_bits > 0 {
                buf[0] >>= excess_bits;
            }
            let candidate = BigUint::from_bytes_be(&buf);
            if &candidate < bound {
                return candidate;
            }
        }
    }
}

/// A finite-support distribution over [`Value`]s: every weight is strictly
/// positive and the weights sum to exactly one.
#[derive(Clone, PartialEq, Eq)]
pub struct Dist {
    weights: BTreeMap<Value, Rat>,
}

impl Dist {
    /// Point mass.
    pub fn dirac(v: Value) -> Dist {
        let mut weights = BTreeMap::new();
        weights.insert(v, Rat::one());
        Dist { weights }
    }

    /// Uniform over a nonempty list; duplicates merge their weight.
    pub fn uniform(values: &[Value]) -> Result<Dist, KernelError> {
        if values.is_empty() {
            return Err(KernelError::EmptySupport);
        }
        let n = BigInt::from(values.len());
        let w = Rat::new(BigInt::one(), n);
        let mut weights: BTreeMap<Value, Rat> = BTreeMap::new();
        for v in values {
            *weights.entry(v.clone()).or_insert_with(Rat::zero) += w.clone();
        }
        Ok(Dist { weights })
    }

    /// Construct from an explicit weight table, validating the invariants.
    pub fn from_weights(
        entries: impl IntoIterator<Item = (Value, Rat)>,
    ) -> Result<Dist, KernelError> {
        let mut weights: BTreeMap<Value, Rat> = BTreeMap::new();
        for (v, w) in entries {
            if w.is_negative() {
                return Err(KernelError::NegativeWeight(rat_string(&w)));
            }
            if w.is_zero() {
                continue;
            }
            *weights.entry(v).or_insert_with(Rat::zero) += w;
        }
        let total: Rat = weights.values().cloned().sum();
        if !total.is_one() {
            return Err(KernelError::WeightsDoNotSumToOne(rat_string(&total)));
        }
        if weights.len() > support_cap() {
            return Err(KernelError::SupportOverflow {
                limit: support_cap(),
                attempted: weights.len(),
            });
        }
        Ok(Dist { weights })
    }

    /// Internal constructor for weight tables whose invariants hold by
    /// construction (partitions of an existing distribution).
    pub(crate) fn from_weights_unchecked(weights: BTreeMap<Value, Rat>) -> Dist {
        debug_assert!(weights.values().cloned().sum::<Rat>().is_one());
        Dist { weights }
    }

    /// Kleisli extension: the weight of `z` in the result is
    /// `Σ_y k(y)(z) · d(y)`, computed exactly; zero weights never appear.
    pub fn bind<F>(&self, mut k: F) -> Result<Dist, KernelError>
    where
        F: FnMut(&Value) -> Result<Dist, KernelError>,
    {
        let cap = support_cap();
        let mut weights: BTreeMap<Value, Rat> = BTreeMap::new();
        for (y, wy) in &self.weights {
            let inner = k(y)?;
            for (z, wz) in &inner.weights {
                let add = wy.clone() * wz.clone();
                *weights.entry(z.clone()).or_insert_with(Rat::zero) += add;
                if weights.len() > cap {
                    return Err(KernelError::SupportOverflow {
                        limit: cap,
                        attempted: weights.len(),
                    });
                }
            }
        }
        Ok(Dist { weights })
    }

    /// Pushforward along a total function; collapsing values add weight.
    pub fn map<F>(&self, mut f: F) -> Dist
    where
        F: FnMut(&Value) -> Value,
    {
        let mut weights: BTreeMap<Value, Rat> = BTreeMap::new();
        for (v, w) in &self.weights {
            *weights.entry(f(v)).or_insert_with(Rat::zero) += w.clone();
        }
        Dist { weights }
    }

    /// Marginal of a distribution over equal-length tuples: keep the listed
    /// coordinates in order. A single kept index yields bare values.
    pub fn marginal(&self, keep: &[usize]) -> Result<Dist, KernelError> {
        let mut weights: BTreeMap<Value, Rat> = BTreeMap::new();
        for (v, w) in &self.weights {
            let parts = match v {
                Value::Tuple(parts) => parts,
                other => {
                    return Err(KernelError::IllTyped(format!(
                        "marginal over a non-tuple value {other}"
                    )))
                }
            };
            for &i in keep {
                if i >= parts.len() {
                    return Err(KernelError::IndexOutOfRange { index: i, len: parts.len() });
                }
            }
            let projected = if keep.len() == 1 {
                parts[keep[0]].clone()
            } else {
                Value::Tuple(keep.iter().map(|&i| parts[i].clone()).collect())
            };
            *weights.entry(projected).or_insert_with(Rat::zero) += w.clone();
        }
        Ok(Dist { weights })
    }

    /// Independent product: pairs `(a, b)` weighted `p(a)·q(b)`, with tuple
    /// supports concatenated so that kernels tensor flatly.
    pub fn product(&self, other: &Dist) -> Result<Dist, KernelError> {
        let cap = support_cap();
        let mut weights: BTreeMap<Value, Rat> = BTreeMap::new();
        for (a, wa) in &self.weights {
            for (b, wb) in &other.weights {
                let joined = match (a, b) {
                    (Value::Tuple(xs), Value::Tuple(ys)) => {
                        let mut v = xs.clone();
                        v.extend(ys.iter().cloned());
                        Value::Tuple(v)
                    }
                    _ => Value::Tuple(vec![a.clone(), b.clone()]),
                };
                *weights.entry(joined).or_insert_with(Rat::zero) += wa.clone() * wb.clone();
                if weights.len() > cap {
                    return Err(KernelError::SupportOverflow {
                        limit: cap,
                        attempted: weights.len(),
                    });
                }
            }
        }
        Ok(Dist { weights })
    }

    /// Draw one support value; replaying the same seed replays the value.
    pub fn sample(&self, rng: &mut SampleRng) -> Value {
        if self.weights.len() == 1 {
            return self.weights.keys().next().unwrap().clone();
        }
        // Clear denominators: weights become integers summing to the lcm.
        let denom: BigInt = self
            .weights
            .values()
            .fold(BigInt::one(), |acc, w| acc.lcm(&w.denom()));
        let total: BigUint = denom.to_biguint().expect("positive lcm");
        let ticket = rng.below(&total);
        let mut acc = BigUint::zero();
        for (v, w) in &self.weights {
            let scaled = (w.clone() * Rat::from_integer(denom.clone()))
                .to_integer()
                .to_biguint()
                .expect("positive weight");
            acc += scaled;
            if ticket < acc {
                return v.clone();
            }
        }
        unreachable!("weights sum to one");
    }

    pub fn support_len(&self) -> usize {
        self.weights.len()
    }

    pub fn weight(&self, v: &Value) -> Rat {
        self.weights.get(v).cloned().unwrap_or_else(Rat::zero)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Value, &Rat)> {
        self.weights.iter()
    }

    pub fn total(&self) -> Rat {
        self.weights.values().cloned().sum()
    }

    pub fn is_dirac(&self) -> Option<&Value> {
        if self.weights.len() == 1 {
            self.weights.keys().next()
        } else {
            None
        }
    }
}

impl fmt::Display for Dist {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{")?;
        for (i, (v, w)) in self.weights.iter().enumerate() {
            if i > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{v} -> {}", rat_string(w))?;
        }
        write!(f, "}}")
    }
}

impl fmt::Debug for Dist {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_traits::ToPrimitive;

    fn vi(n: i64) -> Value {
        Value::int(n)
    }

    #[test]
    fn dirac_point_mass() {
        assert_eq!(Dist::dirac(vi(3)).weight(&vi(3)), rat(1, 1));
        assert_eq!(Dist::dirac(Value::Unit).weight(&Value::Unit), rat(1, 1));
        let t = Value::tuple(vec![vi(1), vi(2)]);
        assert_eq!(Dist::dirac(t.clone()).weight(&t), rat(1, 1));
    }

    #[test]
    fn uniform_two_point_and_range() {
        let d = Dist::uniform(&[vi(-1), vi(1)]).unwrap();
        assert_eq!(d.weight(&vi(-1)), rat(1, 2));
        assert_eq!(d.weight(&vi(1)), rat(1, 2));
        let d = Dist::uniform(&[vi(1), vi(2), vi(3), vi(4)]).unwrap();
        for k in 1..=4 {
            assert_eq!(d.weight(&vi(k)), rat(1, 4));
        }
        // Singleton support degenerates to a point mass.
        assert_eq!(Dist::uniform(&[vi(7)]).unwrap(), Dist::dirac(vi(7)));
        // Duplicates merge weight instead of erroring.
        let d = Dist::uniform(&[vi(0), vi(0), vi(1), vi(2)]).unwrap();
        assert_eq!(d.weight(&vi(0)), rat(1, 2));
    }

    #[test]
    fn uniform_empty_support_is_an_error() {
        assert!(matches!(Dist::uniform(&[]), Err(KernelError::EmptySupport)));
    }

    #[test]
    fn bind_unit_laws() {
        let k = |v: &Value| {
            let n = v.as_int().unwrap().to_i64().unwrap();
            Dist::uniform(&[vi(n), vi(n + 1)])
        };
        // Left unit: bind(dirac(v), k) = k(v).
        let left = Dist::dirac(vi(5)).bind(k).unwrap();
        assert_eq!(left, k(&vi(5)).unwrap());
        // Right unit: bind(d, dirac) = d.
        let d = Dist::uniform(&[vi(0), vi(1), vi(2)]).unwrap();
        assert_eq!(d.bind(|v| Ok(Dist::dirac(v.clone()))).unwrap(), d);
    }

    #[test]
    fn bind_sums_weighted_paths() {
        // bind({0 -> 1/2, 1 -> 1/2}, x -> uniform([x, x+1]))
        //   = {0 -> 1/4, 1 -> 1/2, 2 -> 1/4}, summing the four paths by hand.
        let d = Dist::uniform(&[vi(0), vi(1)]).unwrap();
        let out = d
            .bind(|v| {
                let n = v.as_int().unwrap().to_i64().unwrap();
                Dist::uniform(&[vi(n), vi(n + 1)])
            })
            .unwrap();
        assert_eq!(out.weight(&vi(0)), rat(1, 4));
        assert_eq!(out.weight(&vi(1)), rat(1, 2));
        assert_eq!(out.weight(&vi(2)), rat(1, 4));
        assert_eq!(out.total(), rat(1, 1));
    }

    #[test]
    fn marginal_projects_and_collapses() {
        let d = Dist::from_weights([
            (Value::tuple(vec![vi(0), vi(1)]), rat(1, 2)),
            (Value::tuple(vec![vi(0), vi(2)]), rat(1, 2)),
        ])
        .unwrap();
        assert_eq!(d.marginal(&[0]).unwrap(), Dist::dirac(vi(0)));

        let quarters = Dist::from_weights([
            (Value::tuple(vec![vi(-1), vi(-1)]), rat(1, 4)),
            (Value::tuple(vec![vi(-1), vi(1)]), rat(1, 4)),
            (Value::tuple(vec![vi(1), vi(-1)]), rat(1, 4)),
            (Value::tuple(vec![vi(1), vi(1)]), rat(1, 4)),
        ])
        .unwrap();
        let m = quarters.marginal(&[1]).unwrap();
        assert_eq!(m.weight(&vi(-1)), rat(1, 2));
        assert_eq!(m.weight(&vi(1)), rat(1, 2));

        // Keeping every index reproduces the distribution.
        assert_eq!(quarters.marginal(&[0, 1]).unwrap(), quarters);
        assert!(matches!(
            quarters.marginal(&[2]),
            Err(KernelError::IndexOutOfRange { .. })
        ));
    }

    #[test]
    fn sample_is_deterministic_per_seed() {
        let d = Dist::uniform(&[vi(1), vi(2), vi(3), vi(4)]).unwrap();
        let a = d.sample(&mut SampleRng::from_seed(42));
        let b = d.sample(&mut SampleRng::from_seed(42));
        assert_eq!(a, b);
        assert_eq!(Dist::dirac(vi(9)).sample(&mut SampleRng::from_seed(7)), vi(9));
    }

    #[test]
    fn sample_frequencies_concentrate() {
        // Binomial concentration: 10000 fair draws land within [0.47, 0.53].
        let d = Dist::uniform(&[vi(-1), vi(1)]).unwrap();
        let mut rng = SampleRng::from_seed(1);
        let n = 10_000;
        let ones = (0..n).filter(|_| d.sample(&mut rng) == vi(1)).count();
        let freq = ones as f64 / n as f64;
        assert!((0.47..=0.53).contains(&freq), "frequency {freq} out of bounds");
    }

    #[test]
    fn from_weights_validates() {
        assert!(Dist::from_weights([(vi(0), rat(1, 2))]).is_err());
        assert!(Dist::from_weights([(vi(0), rat(-1, 2)), (vi(1), rat(3, 2))]).is_err());
        // Zero weights are dropped before validation.
        let d = Dist::from_weights([(vi(0), rat(0, 1)), (vi(1), rat(1, 1))]).unwrap();
        assert_eq!(d.support_len(), 1);
    }
}
