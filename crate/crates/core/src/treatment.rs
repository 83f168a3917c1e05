use std::fmt;

use crate::error::{Error, Result};

const WORD_BITS: usize = 64;

/// Binary treatment assignment `w ∈ {0,1}^n`, stored one bit per unit.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct TreatmentVector {
    n: usize,
    words: Vec<u64>,
}

impl TreatmentVector {
    pub fn zeros(n: usize) -> Self {
        Self {
            n,
            words: vec![0; n.div_ceil(WORD_BITS)],
        }
    }

    /// Builds a vector from 0/1 entries; any other value is rejected.
    pub fn from_bits(bits: &[u8]) -> Result<Self> {
        let mut w = Self::zeros(bits.len());
        for (index, &value) in bits.iter().enumerate() {
            match value {
                0 => {}
                1 => w.set(index, true),
                _ => return Err(Error::InvalidTreatment { index, value }),
            }
        }
        Ok(w)
    }

    pub fn from_bools(bits: &[bool]) -> Self {
        let mut w = Self::zeros(bits.len());
        for (i, &b) in bits.iter().enumerate() {
            w.set(i, b);
        }
        w
    }

    /// Unit `i` treated iff bit `i` of `mask` is set. Requires `n <= 64`.
    pub fn from_mask(n: usize, mask: u64) -> Self {
        assert!(n <= WORD_BITS, "from_mask supports at most 64 units");
        let mut w = Self::zeros(n);
        if n > 0 {
            let keep = if n == WORD_BITS { u64::MAX } else { (1u64 << n) - 1 };
            w.words[0] = mask & keep;
        }
        w
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    #[inline]
    pub fn get(&self, i: usize) -> bool {
        debug_assert!(i < self.n);
        (self.words[i / WORD_BITS] >> (i % WORD_BITS)) & 1 == 1
    }

    #[inline]
    pub fn set(&mut self, i: usize, value: bool) {
        debug_assert!(i < self.n);
        let bit = 1u64 << (i % WORD_BITS);
        if value {
            self.words[i / WORD_BITS] |= bit;
        } else {
            self.words[i / WORD_BITS] &= !bit;
        }
    }

    /// Copy of `self` with unit `i` set to `value`; `self` is untouched.
    pub fn flip(&self, i: usize, value: bool) -> Result<Self> {
        if i >= self.n {
            return Err(Error::IndexOutOfRange { index: i, n: self.n });
        }
        let mut out = self.clone();
        out.set(i, value);
        Ok(out)
    }

    pub fn count_treated(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }

    /// Number of treated units among `units`.
    #[inline]
    pub fn count_treated_in(&self, units: &[usize]) -> usize {
        units.iter().filter(|&&j| self.get(j)).count()
    }

    pub fn iter(&self) -> impl Iterator<Item = bool> + '_ {
        (0..self.n).map(move |i| self.get(i))
    }

    pub fn to_bits(&self) -> Vec<u8> {
        self.iter().map(u8::from).collect()
    }
}

impl fmt::Debug for TreatmentVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "TreatmentVector{self}")
    }
}

impl fmt::Display for TreatmentVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("(")?;
        for i in 0..self.n {
            if i > 0 {
                f.write_str(",")?;
            }
            f.write_str(if self.get(i) { "1" } else { "0" })?;
        }
        f.write_str(")")
    }
}

/// Per-unit treatment probabilities, each strictly inside (0, 1).
#[derive(Debug, Clone, PartialEq)]
pub struct ProbabilityVector {
    values: Vec<f64>,
}

impl ProbabilityVector {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        for (index, &value) in values.iter().enumerate() {
            if !(value > 0.0 && value < 1.0) {
                return Err(Error::ProbabilityOutOfRange { index, value });
            }
        }
        Ok(Self { values })
    }

    pub fn constant(n: usize, p: f64) -> Result<Self> {
        Self::new(vec![p; n])
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn get(&self, i: usize) -> f64 {
        self.values[i]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.values
    }

    /// The common value when every unit shares one probability.
    pub fn constant_value(&self) -> Option<f64> {
        let first = *self.values.first()?;
        self.values.iter().all(|&p| p == first).then_some(first)
    }

    /// `π + delta·1`, rejected if any coordinate leaves (0, 1).
    pub fn shifted(&self, delta: f64) -> Result<Self> {
        Self::new(self.values.iter().map(|p| p + delta).collect())
    }
}
