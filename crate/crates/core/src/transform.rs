//! Untimed NTT/INTT and cyclic polynomial multiplication.
//!
//! [`Ntt::dft_reference`] evaluates the transform sum directly in O(n²) and
//! serves as the golden model. [`Ntt::ntt_ct`] and [`Ntt::intt_gs`] are the
//! in-place Cooley-Tukey and Gentleman-Sande transforms driven by one
//! bit-reverse-ordered twiddle table, which the simulator's twiddle ROM
//! also loads.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::NttParams;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Forward,
    Inverse,
}

/// A length-`n` vector of reduced field elements.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Polynomial {
    coeffs: Vec<u64>,
}

impl Polynomial {
    /// Validates length against `params.n()` and every value against `q`.
    pub fn new(coeffs: Vec<u64>, params: &NttParams) -> Result<Self> {
        if coeffs.len() != params.n() {
            return Err(Error::LengthMismatch {
                expected: params.n(),
                found: coeffs.len(),
            });
        }
        for &c in &coeffs {
            params.check_element(c)?;
        }
        Ok(Self { coeffs })
    }

    pub fn zero(params: &NttParams) -> Self {
        Self {
            coeffs: vec![0; params.n()],
        }
    }

    pub(crate) fn from_raw(coeffs: Vec<u64>) -> Self {
        Self { coeffs }
    }

    pub fn coeffs(&self) -> &[u64] {
        &self.coeffs
    }

    pub fn into_coeffs(self) -> Vec<u64> {
        self.coeffs
    }

    pub fn len(&self) -> usize {
        self.coeffs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coeffs.is_empty()
    }
}

/// Reverses the low `bits` bits of `index`.
#[inline]
pub fn bit_reverse(index: usize, bits: u32) -> usize {
    if bits == 0 {
        0
    } else {
        index.reverse_bits() >> (usize::BITS - bits)
    }
}

/// Moves element `i` to `rev(i)`. Involutive; length must be a power of two.
pub fn bit_reverse_permute<T: Clone>(values: &[T]) -> Result<Vec<T>> {
    let n = values.len();
    if !n.is_power_of_two() {
        return Err(Error::NotPowerOfTwo(n));
    }
    let bits = n.trailing_zeros();
    Ok((0..n).map(|i| values[bit_reverse(i, bits)].clone()).collect())
}

/// Powers of ω and ω⁻¹ in bit-reversed order: `forward[b] = ω^rev(b)` over
/// `log2(n/2)` bits, for `b < n/2`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TwiddleTable {
    forward: Vec<u64>,
    inverse: Vec<u64>,
}

impl TwiddleTable {
    pub fn new(params: &NttParams) -> Self {
        let half = params.n() / 2;
        let bits = half.trailing_zeros();
        let powers = |root: u64| {
            let mut natural = Vec::with_capacity(half);
            let mut w = 1u64;
            for _ in 0..half {
                natural.push(w);
                w = params.mul(w, root);
            }
            (0..half)
                .map(|b| natural[bit_reverse(b, bits)])
                .collect::<Vec<_>>()
        };
        Self {
            forward: powers(params.omega()),
            inverse: powers(params.omega_inv()),
        }
    }

    pub fn get(&self, direction: Direction) -> &[u64] {
        match direction {
            Direction::Forward => &self.forward,
            Direction::Inverse => &self.inverse,
        }
    }
}

/// Parameters plus their precomputed twiddle table.
#[derive(Clone, Debug)]
pub struct Ntt {
    params: NttParams,
    twiddles: TwiddleTable,
}

impl Ntt {
    pub fn new(params: NttParams) -> Self {
        let twiddles = TwiddleTable::new(&params);
        Self { params, twiddles }
    }

    pub fn params(&self) -> &NttParams {
        &self.params
    }

    pub fn twiddles(&self) -> &TwiddleTable {
        &self.twiddles
    }

    fn check_len(&self, p: &Polynomial) -> Result<()> {
        if p.len() != self.params.n() {
            return Err(Error::LengthMismatch {
                expected: self.params.n(),
                found: p.len(),
            });
        }
        Ok(())
    }

    /// Direct evaluation of the transform sum. Inverse includes the `1/n`
    /// scaling. Uses plain wide-integer reduction, not Barrett.
    pub fn dft_reference(&self, p: &Polynomial, direction: Direction) -> Result<Polynomial> {
        self.check_len(p)?;
        let n = self.params.n();
        let q = self.params.q() as u128;
        let root = match direction {
            Direction::Forward => self.params.omega(),
            Direction::Inverse => self.params.omega_inv(),
        } as u128;
        let mut powers = vec![1u128; n];
        for k in 1..n {
            powers[k] = powers[k - 1] * root % q;
        }
        let mut out = Vec::with_capacity(n);
        for i in 0..n {
            let mut acc = 0u128;
            for (j, &a) in p.coeffs.iter().enumerate() {
                acc = (acc + a as u128 * powers[(i * j) % n]) % q;
            }
            if direction == Direction::Inverse {
                acc = acc * self.params.n_inv() as u128 % q;
            }
            out.push(acc as u64);
        }
        Ok(Polynomial::from_raw(out))
    }

    /// Cooley-Tukey NTT: natural-order input, `log2(n)` in-place layers, then
    /// one bit-reversal to return the spectrum in natural order.
    pub fn ntt_ct(&self, p: &Polynomial) -> Result<Polynomial> {
        self.check_len(p)?;
        let n = self.params.n();
        let table = self.twiddles.get(Direction::Forward);
        let mut x = p.coeffs.clone();
        let mut len = n / 2;
        let mut blocks = 1;
        while len > 0 {
            for (b, &w) in table.iter().enumerate().take(blocks) {
                let start = 2 * b * len;
                for j in start..start + len {
                    let t = x[j];
                    let u = self.params.mul(x[j + len], w);
                    x[j] = self.params.add(t, u);
                    x[j + len] = self.params.sub(t, u);
                }
            }
            len /= 2;
            blocks *= 2;
        }
        Ok(Polynomial::from_raw(bit_reverse_permute(&x)?))
    }

    /// Gentleman-Sande INTT: bit-reverse the input, undo the Cooley-Tukey
    /// layers in reverse order with inverse twiddles, then scale by `1/n`.
    pub fn intt_gs(&self, p: &Polynomial) -> Result<Polynomial> {
        self.check_len(p)?;
        let n = self.params.n();
        let table = self.twiddles.get(Direction::Inverse);
        let mut x = bit_reverse_permute(&p.coeffs)?;
        let mut len = 1;
        let mut blocks = n / 2;
        while len < n {
            for (b, &w) in table.iter().enumerate().take(blocks) {
                let start = 2 * b * len;
                for j in start..start + len {
                    let t = x[j];
                    let u = x[j + len];
                    x[j] = self.params.add(t, u);
                    x[j + len] = self.params.mul(self.params.sub(t, u), w);
                }
            }
            len *= 2;
            blocks /= 2;
        }
        let n_inv = self.params.n_inv();
        for c in &mut x {
            *c = self.params.mul(*c, n_inv);
        }
        Ok(Polynomial::from_raw(x))
    }

    pub fn transform(&self, p: &Polynomial, direction: Direction) -> Result<Polynomial> {
        match direction {
            Direction::Forward => self.ntt_ct(p),
            Direction::Inverse => self.intt_gs(p),
        }
    }

    pub fn pointwise_mul(&self, a: &Polynomial, b: &Polynomial) -> Result<Polynomial> {
        self.check_len(a)?;
        self.check_len(b)?;
        let coeffs = a
            .coeffs
            .iter()
            .zip(&b.coeffs)
            .map(|(&x, &y)| self.params.mul(x, y))
            .collect();
        Ok(Polynomial::from_raw(coeffs))
    }

    /// `a · b mod (x^n − 1, q)` through the transform domain.
    pub fn polymul_cyclic(&self, a: &Polynomial, b: &Polynomial) -> Result<Polynomial> {
        let fa = self.ntt_ct(a)?;
        let fb = self.ntt_ct(b)?;
        self.intt_gs(&self.pointwise_mul(&fa, &fb)?)
    }

    /// Schoolbook cyclic convolution, O(n²).
    pub fn schoolbook_cyclic(&self, a: &Polynomial, b: &Polynomial) -> Result<Polynomial> {
        self.check_len(a)?;
        self.check_len(b)?;
        let n = self.params.n();
        let q = self.params.q() as u128;
        let mut acc = vec![0u128; n];
        for (i, &x) in a.coeffs.iter().enumerate() {
            for (j, &y) in b.coeffs.iter().enumerate() {
                let k = (i + j) % n;
                acc[k] = (acc[k] + x as u128 * y as u128) % q;
            }
        }
        Ok(Polynomial::from_raw(acc.into_iter().map(|c| c as u64).collect()))
    }
}
