//! Packed Rademacher signs and the kernels that consume them.
//!
//! Bit `j` of a row lives in word `j / 64` at bit `j % 64`; a set bit means
//! the sign is negative.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Counter-based sign generator: row `i` of seed `s` is the ChaCha8 stream `i`
/// keyed by `s`, so any row is reproducible on its own.
#[derive(Debug, Clone, Copy)]
pub struct SignSource {
    seed: u64,
}

impl SignSource {
    pub fn new(seed: u64) -> Self {
        Self { seed }
    }

    /// `len` signs for stream `stream`, packed into `words_for(len)` words with
    /// the unused high bits of the last word cleared.
    pub fn row(&self, stream: u64, len: usize) -> Vec<u64> {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(stream);
        let mut out: Vec<u64> = (0..words_for(len)).map(|_| rng.next_u64()).collect();
        clear_tail(&mut out, len);
        out
    }
}

pub fn words_for(len: usize) -> usize {
    len.div_ceil(64)
}

pub(crate) fn clear_tail(words: &mut [u64], len: usize) {
    let rem = len % 64;
    if rem != 0 {
        if let Some(last) = words.last_mut() {
            *last &= (1u64 << rem) - 1;
        }
    }
}

#[inline]
pub fn bit(words: &[u64], j: usize) -> bool {
    (words[j / 64] >> (j % 64)) & 1 == 1
}

#[inline]
pub fn sign(words: &[u64], j: usize) -> f64 {
    if bit(words, j) {
        -1.0
    } else {
        1.0
    }
}

const fn build_table() -> [[f64; 8]; 256] {
    let mut t = [[0.0; 8]; 256];
    let mut b = 0;
    while b < 256 {
        let mut k = 0;
        while k < 8 {
            t[b][k] = if (b >> k) & 1 == 1 { -1.0 } else { 1.0 };
            k += 1;
        }
        b += 1;
    }
    t
}

static BYTE_SIGNS: [[f64; 8]; 256] = build_table();

#[inline]
fn accumulate_word(acc: &mut [f64; 8], word: u64, xs: &[f64]) {
    for (byte, xb) in xs.chunks_exact(8).enumerate() {
        let s = &BYTE_SIGNS[((word >> (8 * byte)) & 0xff) as usize];
        for k in 0..8 {
            acc[k] += xb[k] * s[k];
        }
    }
}

#[inline]
fn reduce(acc: &[f64; 8]) -> f64 {
    ((acc[0] + acc[1]) + (acc[2] + acc[3])) + ((acc[4] + acc[5]) + (acc[6] + acc[7]))
}

/// `sum_j s_j x_j` for the signs in `words` over `x.len()` coordinates.
pub fn signed_sum(words: &[u64], x: &[f64]) -> f64 {
    let mut acc = [0.0; 8];
    let full = x.len() / 64;
    for w in 0..full {
        accumulate_word(&mut acc, words[w], &x[64 * w..64 * w + 64]);
    }
    let mut tail = 0.0;
    for j in 64 * full..x.len() {
        tail += sign(words, j) * x[j];
    }
    reduce(&acc) + tail
}

/// [`signed_sum`] for several rows sharing the same coordinates, in one pass
/// over `x`.
pub fn signed_sums(rows: &[&[u64]], x: &[f64]) -> Vec<f64> {
    let mut acc = vec![[0.0; 8]; rows.len()];
    let full = x.len() / 64;
    for w in 0..full {
        let xs = &x[64 * w..64 * w + 64];
        for (a, row) in acc.iter_mut().zip(rows) {
            accumulate_word(a, row[w], xs);
        }
    }
    rows.iter()
        .zip(&acc)
        .map(|(row, a)| {
            let mut tail = 0.0;
            for j in 64 * full..x.len() {
                tail += sign(row, j) * x[j];
            }
            reduce(a) + tail
        })
        .collect()
}

/// Number of coordinates among the first `len` where two sign rows differ.
pub fn disagreements(a: &[u64], b: &[u64], len: usize) -> u64 {
    let mut n = 0u64;
    let words = words_for(len);
    for w in 0..words {
        let mut diff = a[w] ^ b[w];
        if w + 1 == words && len % 64 != 0 {
            diff &= (1u64 << (len % 64)) - 1;
        }
        n += u64::from(diff.count_ones());
    }
    n
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rows_are_reproducible_and_independent() {
        let s = SignSource::new(42);
        assert_eq!(s.row(3, 200), s.row(3, 200));
        assert_ne!(s.row(3, 200), s.row(4, 200));
        assert_ne!(s.row(3, 200), SignSource::new(43).row(3, 200));
        // A shorter row is a prefix of a longer one.
        let long = s.row(7, 256);
        let short = s.row(7, 70);
        assert_eq!(short[0], long[0]);
        assert_eq!(short[1], long[1] & 0x3f);
    }

    #[test]
    fn kernels_match_naive_sums() {
        let s = SignSource::new(5);
        let n = 64 * 3 + 17;
        let x: Vec<f64> = (0..n).map(|j| (j as f64 * 0.37).sin()).collect();
        let rows: Vec<Vec<u64>> = (1..=4).map(|i| s.row(i, n)).collect();
        let refs: Vec<&[u64]> = rows.iter().map(|r| r.as_slice()).collect();
        let many = signed_sums(&refs, &x);
        for (row, got) in rows.iter().zip(&many) {
            let naive: f64 = (0..n).map(|j| sign(row, j) * x[j]).sum();
            assert!((naive - got).abs() < 1e-12);
            assert!((signed_sum(row, &x) - got).abs() == 0.0);
        }
    }

    #[test]
    fn disagreement_count_matches_naive() {
        let s = SignSource::new(9);
        let n = 130;
        let (a, b) = (s.row(1, n), s.row(2, n));
        let naive = (0..n).filter(|&j| bit(&a, j) != bit(&b, j)).count() as u64;
        assert_eq!(disagreements(&a, &b, n), naive);
    }
}
