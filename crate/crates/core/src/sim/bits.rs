//! Packed bit strings and Toeplitz-matrix hashing.

use rand::RngCore;

use crate::rng::rng_from_seed;

/// Bits packed little-endian into `u64` words: bit `i` is bit `i % 64` of word `i / 64`.
/// Bits past `len` are always zero.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash)]
pub struct BitString {
    words: Vec<u64>,
    len: usize,
}

impl BitString {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn zeros(len: usize) -> Self {
        Self {
            words: vec![0; len.div_ceil(64)],
            len,
        }
    }

    pub fn random(len: usize, rng: &mut impl RngCore) -> Self {
        let mut words: Vec<u64> = (0..len.div_ceil(64)).map(|_| rng.next_u64()).collect();
        if !len.is_multiple_of(64) {
            if let Some(last) = words.last_mut() {
                *last &= (1u64 << (len % 64)) - 1;
            }
        }
        Self { words, len }
    }

    pub fn from_bits(bits: &[bool]) -> Self {
        let mut s = Self::new();
        for &b in bits {
            s.push(b);
        }
        s
    }

    /// Encodes each symbol `s ∈ 1..=2^d` as `s − 1` in `d` bits, most significant first.
    pub fn from_symbols(symbols: &[u32], d: u32) -> Self {
        let mut s = Self::zeros(0);
        s.words.reserve((symbols.len() * d as usize).div_ceil(64));
        for &sym in symbols {
            let v = sym - 1;
            for k in (0..d).rev() {
                s.push((v >> k) & 1 == 1);
            }
        }
        s
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn words(&self) -> &[u64] {
        &self.words
    }

    pub fn get(&self, i: usize) -> bool {
        assert!(i < self.len, "bit index {i} out of range {}", self.len);
        (self.words[i / 64] >> (i % 64)) & 1 == 1
    }

    pub fn set(&mut self, i: usize, bit: bool) {
        assert!(i < self.len, "bit index {i} out of range {}", self.len);
        let mask = 1u64 << (i % 64);
        if bit {
            self.words[i / 64] |= mask;
        } else {
            self.words[i / 64] &= !mask;
        }
    }

    pub fn push(&mut self, bit: bool) {
        if self.len.is_multiple_of(64) {
            self.words.push(0);
        }
        self.len += 1;
        self.set(self.len - 1, bit);
    }

    pub fn count_ones(&self) -> u32 {
        self.words.iter().map(|w| w.count_ones()).sum()
    }

    /// The 64 bits starting at `start`, zero past the end.
    fn window(&self, start: usize) -> u64 {
        let (w, o) = (start / 64, start % 64);
        let lo = self.words.get(w).copied().unwrap_or(0) >> o;
        if o == 0 {
            lo
        } else {
            lo | (self.words.get(w + 1).copied().unwrap_or(0) << (64 - o))
        }
    }

    /// Lowercase hex of the packed words, least significant word first.
    pub fn to_hex(&self) -> String {
        let nibbles = self.len.div_ceil(4);
        let mut out = String::with_capacity(nibbles);
        for i in 0..nibbles {
            let v = (self.words[i / 16] >> (4 * (i % 16))) & 0xf;
            out.push(char::from_digit(v as u32, 16).unwrap());
        }
        out
    }
}

/// Binary Toeplitz-family hash from `in_len` to `out_len` bits.
///
/// The matrix is defined by `in_len + out_len − 1` seed bits `r`; output bit `k`
/// is the parity of `x AND r[k .. k + in_len]`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ToeplitzHash {
    seed_bits: BitString,
    in_len: usize,
    out_len: usize,
}

impl ToeplitzHash {
    pub fn from_seed(in_len: usize, out_len: usize, seed: u64) -> Self {
        let mut rng = rng_from_seed(seed);
        let r = if in_len == 0 || out_len == 0 {
            BitString::new()
        } else {
            BitString::random(in_len + out_len - 1, &mut rng)
        };
        Self {
            seed_bits: r,
            in_len,
            out_len,
        }
    }

    pub fn in_len(&self) -> usize {
        self.in_len
    }

    pub fn out_len(&self) -> usize {
        self.out_len
    }

    /// Accumulates, for every set input bit `j`, the seed window starting at `j`.
    /// Windows are materialized one bit offset (mod 64) at a time so the inner
    /// loop is a plain word-wise XOR.
    pub fn hash(&self, x: &BitString) -> BitString {
        assert_eq!(x.len(), self.in_len, "hash input length mismatch");
        let mut out = BitString::zeros(self.out_len);
        if self.in_len == 0 || self.out_len == 0 {
            return out;
        }
        let out_words = out.words.len();
        let mut shifted = vec![0u64; x.words().len() + out_words];
        for s in 0..64 {
            if x.words().iter().all(|w| (w >> s) & 1 == 0) {
                continue;
            }
            for (w, slot) in shifted.iter_mut().enumerate() {
                *slot = self.seed_bits.window(64 * w + s);
            }
            for (q, &xw) in x.words().iter().enumerate() {
                if (xw >> s) & 1 == 1 {
                    for (o, &r) in out.words.iter_mut().zip(&shifted[q..q + out_words]) {
                        *o ^= r;
                    }
                }
            }
        }
        if !self.out_len.is_multiple_of(64) {
            out.words[out_words - 1] &= (1u64 << (self.out_len % 64)) - 1;
        }
        out
    }
}
