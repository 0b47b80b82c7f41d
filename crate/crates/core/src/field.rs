//! Arithmetic over the prime field F_q and derivation of NTT parameters.
//!
//! Elements are plain `u64` values in `[0, q)`. Moduli are limited to 32
//! bits so that every product fits in a `u64` and every Barrett
//! intermediate fits in a `u128`.

use crate::error::{Error, Result};

/// Largest supported coefficient bit width.
pub const MAX_BITWIDTH: u32 = 32;

/// Field element. Always reduced, `0 <= value < q`.
pub type FieldElement = u64;

/// `base^exp mod q` by square-and-multiply. `exp == 0` yields 1.
pub fn pow_mod(base: u64, mut exp: u64, q: u64) -> u64 {
    debug_assert!(q >= 2);
    let q = q as u128;
    let mut base = base as u128 % q;
    let mut acc = 1u128;
    while exp > 0 {
        if exp & 1 == 1 {
            acc = acc * base % q;
        }
        base = base * base % q;
        exp >>= 1;
    }
    acc as u64
}

/// `(a + b) mod q` with a single conditional subtraction.
#[inline]
pub fn mod_add(a: u64, b: u64, q: u64) -> u64 {
    debug_assert!(a < q && b < q);
    let s = a + b;
    if s >= q {
        s - q
    } else {
        s
    }
}

/// `(a - b) mod q` with a single conditional addition of `q`.
#[inline]
pub fn mod_sub(a: u64, b: u64, q: u64) -> u64 {
    debug_assert!(a < q && b < q);
    if a >= b {
        a - b
    } else {
        a + q - b
    }
}

/// Deterministic primality test by trial division. Adequate for `q < 2^32`.
pub fn is_prime(q: u64) -> bool {
    if q < 2 {
        return false;
    }
    if q < 4 {
        return true;
    }
    if q.is_multiple_of(2) || q.is_multiple_of(3) {
        return false;
    }
    let mut d = 5u64;
    while d * d <= q {
        if q.is_multiple_of(d) || q.is_multiple_of(d + 2) {
            return false;
        }
        d += 6;
    }
    true
}

/// Single-word Barrett reducer with `k = L` and `mu = floor(2^(2k) / q)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Barrett {
    q: u64,
    k: u32,
    mu: u64,
}

impl Barrett {
    /// Requires `2 <= q < 2^k` and `k <= 32`.
    pub fn new(q: u64, k: u32) -> Result<Self> {
        if !(2..=MAX_BITWIDTH).contains(&k) {
            return Err(Error::UnsupportedBitwidth(k));
        }
        if q < 2 || q >= 1u64 << k {
            return Err(Error::BitwidthTooSmall { q, bitwidth: k });
        }
        let mu = ((1u128 << (2 * k)) / q as u128) as u64;
        Ok(Self { q, k, mu })
    }

    pub fn modulus(&self) -> u64 {
        self.q
    }

    pub fn k(&self) -> u32 {
        self.k
    }

    pub fn mu(&self) -> u64 {
        self.mu
    }

    /// `(a * b) mod q`. The quotient estimate is short by at most two, so at
    /// most two corrections run.
    #[inline]
    pub fn mul(&self, a: u64, b: u64) -> u64 {
        debug_assert!(a < self.q && b < self.q);
        let t = a as u128 * b as u128;
        let estimate = (t * self.mu as u128) >> (2 * self.k);
        let mut r = (t - estimate * self.q as u128) as u64;
        if r >= self.q {
            r -= self.q;
        }
        if r >= self.q {
            r -= self.q;
        }
        debug_assert!(r < self.q);
        r
    }
}

/// The algebraic contract shared by every transform and by the simulator.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct NttParams {
    n: usize,
    q: u64,
    bitwidth: u32,
    omega: u64,
    omega_inv: u64,
    n_inv: u64,
    barrett: Barrett,
}

impl NttParams {
    /// Validates `(n, q, L)` and derives the smallest primitive `n`-th root of
    /// unity together with its inverse, `1/n` and the Barrett constants.
    pub fn derive(n: usize, q: u64, bitwidth: u32) -> Result<Self> {
        if n < 2 || !n.is_power_of_two() {
            return Err(Error::InvalidSize(n));
        }
        if !(2..=MAX_BITWIDTH).contains(&bitwidth) {
            return Err(Error::UnsupportedBitwidth(bitwidth));
        }
        if q >= 1u64 << bitwidth {
            return Err(Error::BitwidthTooSmall { q, bitwidth });
        }
        if !is_prime(q) {
            return Err(Error::NotPrime(q));
        }
        if !(q - 1).is_multiple_of(n as u64) {
            return Err(Error::NoRootOfUnity { q, n });
        }

        let omega = smallest_primitive_root(n, q);
        let omega_inv = pow_mod(omega, q - 2, q);
        let n_inv = pow_mod(n as u64 % q, q - 2, q);
        let barrett = Barrett::new(q, bitwidth)?;
        Ok(Self {
            n,
            q,
            bitwidth,
            omega,
            omega_inv,
            n_inv,
            barrett,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn q(&self) -> u64 {
        self.q
    }

    pub fn bitwidth(&self) -> u32 {
        self.bitwidth
    }

    pub fn log_n(&self) -> u32 {
        self.n.trailing_zeros()
    }

    pub fn omega(&self) -> u64 {
        self.omega
    }

    pub fn omega_inv(&self) -> u64 {
        self.omega_inv
    }

    pub fn n_inv(&self) -> u64 {
        self.n_inv
    }

    pub fn barrett(&self) -> &Barrett {
        &self.barrett
    }

    pub fn barrett_mu(&self) -> u64 {
        self.barrett.mu
    }

    pub fn barrett_k(&self) -> u32 {
        self.barrett.k
    }

    pub fn mul(&self, a: u64, b: u64) -> u64 {
        self.barrett.mul(a, b)
    }

    pub fn add(&self, a: u64, b: u64) -> u64 {
        mod_add(a, b, self.q)
    }

    pub fn sub(&self, a: u64, b: u64) -> u64 {
        mod_sub(a, b, self.q)
    }

    /// Checks that `value` is a reduced element of this field.
    pub fn check_element(&self, value: u64) -> Result<u64> {
        if value < self.q {
            Ok(value)
        } else {
            Err(Error::ValueOutOfRange { value, q: self.q })
        }
    }
}

/// Free-function form of [`Barrett::mul`] against a parameter set.
pub fn barrett_mul(a: u64, b: u64, params: &NttParams) -> u64 {
    params.barrett.mul(a, b)
}

/// Free-function form of [`NttParams::derive`].
pub fn derive_params(n: usize, q: u64, bitwidth: u32) -> Result<NttParams> {
    NttParams::derive(n, q, bitwidth)
}

// Any primitive n-th root r gives all of them as r^j for odd j < n (n is a
// power of two), so the minimum over that orbit is the smallest root.
fn smallest_primitive_root(n: usize, q: u64) -> u64 {
    let exp = (q - 1) / n as u64;
    let half = n as u64 / 2;
    let root = (2..q)
        .map(|g| pow_mod(g, exp, q))
        .find(|&w| pow_mod(w, half, q) != 1)
        .expect("a generator exists for every prime modulus");

    let step = pow_mod(root, 2, q);
    let mut w = root;
    let mut best = root;
    for _ in 1..half {
        w = (w as u128 * step as u128 % q as u128) as u64;
        best = best.min(w);
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn wide_mul(a: u64, b: u64, q: u64) -> u64 {
        (a as u128 * b as u128 % q as u128) as u64
    }

    #[test]
    fn pow_mod_examples() {
        assert_eq!(pow_mod(4, 4, 17), 1);
        assert_eq!(pow_mod(4, 2, 17), 16);
        for x in [0, 1, 5, 16, 12288] {
            assert_eq!(pow_mod(x, 0, 17), 1);
            assert_eq!(pow_mod(x, 0, 12289), 1);
        }
        // repeated multiplication
        let mut acc = 1u64;
        for e in 0..40 {
            assert_eq!(pow_mod(3, e, 12289), acc);
            acc = acc * 3 % 12289;
        }
    }

    #[test]
    fn add_sub_examples() {
        assert_eq!(mod_add(12288, 1, 12289), 0);
        assert_eq!(mod_add(0, 5, 17), 5);
        assert_eq!(mod_add(10, 9, 17), 2);
        assert_eq!(mod_sub(0, 1, 12289), 12288);
        assert_eq!(mod_sub(7, 7, 17), 0);
        assert_eq!(mod_sub(3, 5, 17), 15);
    }

    #[test]
    fn add_sub_round_trip_exhaustive_small() {
        for q in [2u64, 3, 5, 17, 97] {
            for a in 0..q {
                for b in 0..q {
                    assert_eq!(mod_sub(mod_add(a, b, q), b, q), a);
                    assert_eq!(mod_add(a, b, q), (a + b) % q);
                }
            }
        }
    }

    #[test]
    fn barrett_examples() {
        let p = NttParams::derive(256, 12289, 14).unwrap();
        assert_eq!(barrett_mul(0, 9999, &p), 0);
        assert_eq!(barrett_mul(12288, 12288, &p), 1);
        assert_eq!(barrett_mul(5000, 7000, &p), 928);
        assert_eq!(wide_mul(5000, 7000, 12289), 928);
        assert_eq!(p.barrett_mu(), (1u64 << 28) / 12289);
        assert_eq!(p.barrett_k(), 14);
    }

    #[test]
    fn barrett_exhaustive_small_primes() {
        let primes = (2u64..=257).filter(|&q| is_prime(q));
        for q in primes {
            let bits = 64 - q.leading_zeros();
            for k in [bits.max(2), 9, 16] {
                if q >= 1 << k {
                    continue;
                }
                let br = Barrett::new(q, k).unwrap();
                for a in 0..q {
                    for b in 0..q {
                        assert_eq!(br.mul(a, b), wide_mul(a, b, q), "q={q} k={k} a={a} b={b}");
                    }
                }
            }
        }
    }

    #[test]
    fn barrett_randomized_12289() {
        let br = Barrett::new(12289, 14).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0xba77e77);
        for _ in 0..1_000_000 {
            let a = rng.gen_range(0..12289);
            let b = rng.gen_range(0..12289);
            assert_eq!(br.mul(a, b), wide_mul(a, b, 12289));
        }
    }

    #[test]
    fn barrett_32_bit_modulus() {
        let q = 4_294_967_291u64; // largest prime below 2^32
        let br = Barrett::new(q, 32).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..100_000 {
            let a = rng.gen_range(0..q);
            let b = rng.gen_range(0..q);
            assert_eq!(br.mul(a, b), wide_mul(a, b, q));
        }
        assert_eq!(br.mul(q - 1, q - 1), 1);
    }

    #[test]
    fn derive_small_example() {
        let p = NttParams::derive(4, 17, 5).unwrap();
        assert_eq!(p.omega(), 4);
        assert_eq!(p.omega_inv(), 13);
        assert_eq!(p.n_inv(), 13);
    }

    #[test]
    fn smallest_root_matches_exhaustive_search() {
        for (n, q) in [(2, 5), (4, 5), (4, 17), (8, 17), (16, 17), (16, 97), (256, 12289), (1024, 12289)] {
            let exhaustive = (2..q)
                .find(|&w| {
                    pow_mod(w, n as u64, q) == 1 && (1..n as u64).all(|i| pow_mod(w, i, q) != 1)
                })
                .unwrap();
            let bits = 64 - q.leading_zeros();
            assert_eq!(NttParams::derive(n, q, bits).unwrap().omega(), exhaustive, "n={n} q={q}");
        }
    }

    #[test]
    fn derive_checks_invariants() {
        for n in [2usize, 4, 8, 16, 32, 64, 128, 256, 512, 1024, 2048, 4096] {
            let p = NttParams::derive(n, 12289, 14).unwrap();
            let (q, w) = (p.q(), p.omega());
            assert_eq!(pow_mod(w, n as u64, q), 1);
            assert_eq!(pow_mod(w, n as u64 / 2, q), q - 1);
            for i in 1..n as u64 {
                assert_ne!(pow_mod(w, i, q), 1);
            }
            assert_eq!(wide_mul(w, p.omega_inv(), q), 1);
            assert_eq!(wide_mul(n as u64, p.n_inv(), q), 1);
        }
    }

    #[test]
    fn derive_rejects_bad_inputs() {
        assert_eq!(NttParams::derive(4, 15, 5), Err(Error::NotPrime(15)));
        assert_eq!(NttParams::derive(3, 13, 5), Err(Error::InvalidSize(3)));
        assert_eq!(NttParams::derive(1, 13, 5), Err(Error::InvalidSize(1)));
        assert_eq!(
            NttParams::derive(8, 13, 5),
            Err(Error::NoRootOfUnity { q: 13, n: 8 })
        );
        assert_eq!(
            NttParams::derive(256, 12289, 13),
            Err(Error::BitwidthTooSmall {
                q: 12289,
                bitwidth: 13
            })
        );
        assert_eq!(
            NttParams::derive(4, 17, 40),
            Err(Error::UnsupportedBitwidth(40))
        );
        // q ≡ 1 (mod 256): 12289 = 48 * 256 + 1
        assert!(NttParams::derive(256, 12289, 14).is_ok());
        assert!(NttParams::derive(8192, 12289, 14).is_err());
    }

    #[test]
    fn primality() {
        let small: Vec<u64> = (0..50).filter(|&x| is_prime(x)).collect();
        assert_eq!(small, [2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47]);
        assert!(is_prime(12289));
        assert!(!is_prime(12287 * 3));
    }
}
