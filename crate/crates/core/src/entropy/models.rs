//! Probability models for the range coder: an adaptive frequency model and a
//! quantized zero-mean Laplacian keyed by a shared sigma grid.

use super::range::{RangeDecoder, RangeEncoder, MAX_TOTAL};
use super::CodingError;

/// Signed values with |v| <= VALUE_CLIP are coded directly; anything larger
/// goes through the escape symbol followed by a raw 32-bit payload.
pub const VALUE_CLIP: i32 = 255;

/// Alphabet for signed coding: zigzag-mapped [-255, 255] plus one escape.
pub const SIGNED_ALPHABET: usize = 2 * VALUE_CLIP as usize + 2;
const ESCAPE: usize = SIGNED_ALPHABET - 1;
const ESCAPE_RAW_BITS: f64 = 32.0;

pub const SIGMA_MIN: f64 = 0.05;
pub const SIGMA_MAX: f64 = 256.0;
pub const SIGMA_GRID_LEN: usize = 64;

#[inline]
pub fn zigzag(v: i32) -> usize {
    if v > 0 {
        (2 * v - 1) as usize
    } else {
        (-2 * v) as usize
    }
}

#[inline]
pub fn unzigzag(n: usize) -> i32 {
    if n % 2 == 1 {
        ((n + 1) / 2) as i32
    } else {
        -((n / 2) as i32)
    }
}

/// Geometric sigma grid shared by encoder and decoder so both derive
/// identical Laplacian tables from coded data.
pub fn sigma_grid_value(idx: usize) -> f64 {
    debug_assert!(idx < SIGMA_GRID_LEN);
    let t = idx as f64 / (SIGMA_GRID_LEN - 1) as f64;
    SIGMA_MIN * (SIGMA_MAX / SIGMA_MIN).powf(t)
}

/// Nearest grid slot in log space, clamping outside [SIGMA_MIN, SIGMA_MAX].
pub fn sigma_grid_index(sigma: f64) -> usize {
    let s = sigma.clamp(SIGMA_MIN, SIGMA_MAX);
    let steps = (SIGMA_GRID_LEN - 1) as f64;
    let t = (s / SIGMA_MIN).ln() / (SIGMA_MAX / SIGMA_MIN).ln();
    (t * steps).round().clamp(0.0, steps) as usize
}

fn laplace_cdf(x: f64, b: f64) -> f64 {
    if x < 0.0 {
        0.5 * (x / b).exp()
    } else {
        1.0 - 0.5 * (-x / b).exp()
    }
}

fn raw_bin_prob(value: i32, sigma: f64) -> f64 {
    let b = sigma / std::f64::consts::SQRT_2;
    // Evaluate on |value| so the symmetry prob(v) == prob(-v) holds exactly
    // in floating point, not just mathematically.
    let v = value.abs() as f64;
    if value == 0 {
        laplace_cdf(0.5, b) - laplace_cdf(-0.5, b)
    } else {
        0.5 * ((-(v - 0.5) / b).exp() - (-(v + 0.5) / b).exp())
    }
}

/// P(value - 0.5 < X <= value + 0.5) for X ~ Laplace(0, sigma/sqrt(2)),
/// renormalized so the probabilities over [-255, 255] sum to one.
pub fn laplacian_bin_prob(value: i32, sigma: f64) -> f64 {
    debug_assert!((-VALUE_CLIP..=VALUE_CLIP).contains(&value));
    let sigma = sigma.clamp(SIGMA_MIN, SIGMA_MAX);
    let mut total = 0.0;
    for v in -VALUE_CLIP..=VALUE_CLIP {
        total += raw_bin_prob(v, sigma);
    }
    raw_bin_prob(value, sigma) / total
}

/// Adaptive frequency model with per-symbol increment and periodic rescale.
/// Every frequency stays >= 1 and the total stays within the coder's
/// precision bound.
///
/// The default profile (initial count 1, increment 32) adapts aggressively,
/// which suits the skewed residual-style streams in the codec. Call sites
/// coding near-stationary data can pick a stronger prior via
/// [`AdaptiveModel::with_params`].
#[derive(Debug, Clone)]
pub struct AdaptiveModel {
    freqs: Vec<u32>,
    total: u32,
    increment: u32,
}

impl AdaptiveModel {
    pub fn new(alphabet: usize) -> Self {
        Self::with_params(alphabet, 1, 32)
    }

    pub fn with_params(alphabet: usize, initial: u32, increment: u32) -> Self {
        assert!(alphabet >= 1 && initial >= 1 && increment >= 1);
        assert!(alphabet as u64 * initial as u64 <= MAX_TOTAL as u64 / 2);
        AdaptiveModel {
            freqs: vec![initial; alphabet],
            total: alphabet as u32 * initial,
            increment,
        }
    }

    /// Fresh 512-symbol model for zigzag-plus-escape signed coding.
    pub fn new_signed() -> Self {
        Self::new(SIGNED_ALPHABET)
    }

    pub fn alphabet(&self) -> usize {
        self.freqs.len()
    }

    fn cum(&self, sym: usize) -> u32 {
        self.freqs[..sym].iter().sum()
    }

    fn update(&mut self, sym: usize) {
        self.freqs[sym] += self.increment;
        self.total += self.increment;
        if self.total > MAX_TOTAL {
            self.total = 0;
            for f in &mut self.freqs {
                *f = (*f + 1) / 2;
                self.total += *f;
            }
        }
    }

    /// Ideal code length of `sym` under the current table, in bits.
    pub fn bits(&self, sym: usize) -> f64 {
        -((self.freqs[sym] as f64 / self.total as f64).log2())
    }

    /// Encodes one raw alphabet symbol; returns the ideal bits it cost.
    pub fn encode_symbol(&mut self, enc: &mut RangeEncoder, sym: usize) -> f64 {
        assert!(sym < self.freqs.len(), "symbol {sym} out of alphabet");
        let bits = self.bits(sym);
        enc.encode(self.cum(sym), self.freqs[sym], self.total);
        self.update(sym);
        bits
    }

    pub fn decode_symbol(&mut self, dec: &mut RangeDecoder) -> Result<(usize, f64), CodingError> {
        let dv = dec.decode_freq(self.total);
        let mut cum = 0u32;
        let mut sym = self.freqs.len() - 1;
        for (i, &f) in self.freqs.iter().enumerate() {
            if cum + f > dv {
                sym = i;
                break;
            }
            cum += f;
        }
        let bits = self.bits(sym);
        dec.consume(cum, self.freqs[sym])?;
        self.update(sym);
        Ok((sym, bits))
    }

    /// Encodes a signed value over a [`Self::new_signed`] model, escaping to
    /// a raw 32-bit payload outside the clip range.
    pub fn encode_signed(&mut self, enc: &mut RangeEncoder, value: i32) -> f64 {
        debug_assert_eq!(self.freqs.len(), SIGNED_ALPHABET);
        if value.abs() <= VALUE_CLIP {
            self.encode_symbol(enc, zigzag(value))
        } else {
            let bits = self.encode_symbol(enc, ESCAPE);
            for byte in (value as u32).to_le_bytes() {
                enc.encode(byte as u32, 1, 256);
            }
            bits + ESCAPE_RAW_BITS
        }
    }

    pub fn decode_signed(&mut self, dec: &mut RangeDecoder) -> Result<(i32, f64), CodingError> {
        debug_assert_eq!(self.freqs.len(), SIGNED_ALPHABET);
        let (sym, bits) = self.decode_symbol(dec)?;
        if sym != ESCAPE {
            return Ok((unzigzag(sym), bits));
        }
        let mut raw = [0u8; 4];
        for b in &mut raw {
            let dv = dec.decode_freq(256);
            dec.consume(dv, 1)?;
            *b = dv as u8;
        }
        Ok((u32::from_le_bytes(raw) as i32, bits + ESCAPE_RAW_BITS))
    }
}

/// One frozen Laplacian frequency table at a grid sigma.
#[derive(Debug, Clone)]
struct LapTable {
    freqs: Vec<u32>,
    cum: Vec<u32>,
    bits: Vec<f64>,
}

impl LapTable {
    fn build(sigma: f64) -> Self {
        let mut probs = Vec::with_capacity(SIGNED_ALPHABET);
        let mut sum = 0.0;
        for n in 0..SIGNED_ALPHABET - 1 {
            let p = raw_bin_prob(unzigzag(n), sigma);
            sum += p;
            probs.push(p);
        }
        probs.push((1.0 - sum).max(1e-12)); // escape tail mass

        let mut freqs: Vec<u32> = probs
            .iter()
            .map(|p| ((p * MAX_TOTAL as f64).round() as u32).max(1))
            .collect();
        let mut total: i64 = freqs.iter().map(|&f| f as i64).sum();
        let mut diff = MAX_TOTAL as i64 - total;
        if diff > 0 {
            let argmax = (0..freqs.len()).max_by_key(|&i| freqs[i]).unwrap();
            freqs[argmax] += diff as u32;
        } else {
            // Shave the excess off the largest entries, never below 1.
            while diff < 0 {
                let argmax = (0..freqs.len()).max_by_key(|&i| freqs[i]).unwrap();
                let take = (-diff).min(freqs[argmax] as i64 - 1);
                freqs[argmax] -= take as u32;
                diff += take;
            }
        }
        total = freqs.iter().map(|&f| f as i64).sum();
        debug_assert_eq!(total, MAX_TOTAL as i64);

        let mut cum = Vec::with_capacity(SIGNED_ALPHABET + 1);
        let mut acc = 0u32;
        for &f in &freqs {
            cum.push(acc);
            acc += f;
        }
        cum.push(acc);
        let bits = freqs
            .iter()
            .map(|&f| -((f as f64 / MAX_TOTAL as f64).log2()))
            .collect();
        LapTable { freqs, cum, bits }
    }
}

/// Quantized-Laplacian coder over the 64-slot sigma grid; tables are frozen
/// at construction so encode and decode see identical models.
#[derive(Debug, Clone)]
pub struct LaplacianCoder {
    tables: Vec<LapTable>,
}

impl Default for LaplacianCoder {
    fn default() -> Self {
        Self::new()
    }
}

impl LaplacianCoder {
    pub fn new() -> Self {
        LaplacianCoder {
            tables: (0..SIGMA_GRID_LEN)
                .map(|i| LapTable::build(sigma_grid_value(i)))
                .collect(),
        }
    }

    /// Ideal bits for coding `value` at grid slot `sigma_idx`, including the
    /// escape payload when the value is outside the clip range.
    pub fn value_bits(&self, value: i32, sigma_idx: usize) -> f64 {
        let t = &self.tables[sigma_idx];
        if value.abs() <= VALUE_CLIP {
            t.bits[zigzag(value)]
        } else {
            t.bits[ESCAPE] + ESCAPE_RAW_BITS
        }
    }

    pub fn encode_value(&self, enc: &mut RangeEncoder, value: i32, sigma_idx: usize) -> f64 {
        let t = &self.tables[sigma_idx];
        if value.abs() <= VALUE_CLIP {
            let sym = zigzag(value);
            enc.encode(t.cum[sym], t.freqs[sym], MAX_TOTAL);
            t.bits[sym]
        } else {
            enc.encode(t.cum[ESCAPE], t.freqs[ESCAPE], MAX_TOTAL);
            for byte in (value as u32).to_le_bytes() {
                enc.encode(byte as u32, 1, 256);
            }
            t.bits[ESCAPE] + ESCAPE_RAW_BITS
        }
    }

    pub fn decode_value(
        &self,
        dec: &mut RangeDecoder,
        sigma_idx: usize,
    ) -> Result<(i32, f64), CodingError> {
        let t = &self.tables[sigma_idx];
        let dv = dec.decode_freq(MAX_TOTAL);
        let sym = match t.cum.binary_search(&dv) {
            Ok(i) => i,
            Err(i) => i - 1,
        };
        let sym = sym.min(ESCAPE);
        dec.consume(t.cum[sym], t.freqs[sym])?;
        if sym != ESCAPE {
            return Ok((unzigzag(sym), t.bits[sym]));
        }
        let mut raw = [0u8; 4];
        for b in &mut raw {
            let dv = dec.decode_freq(256);
            dec.consume(dv, 1)?;
            *b = dv as u8;
        }
        Ok((
            u32::from_le_bytes(raw) as i32,
            t.bits[ESCAPE] + ESCAPE_RAW_BITS,
        ))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zigzag_is_a_bijection() {
        for v in -300..=300 {
            assert_eq!(unzigzag(zigzag(v)), v);
        }
        assert_eq!(zigzag(0), 0);
        assert_eq!(zigzag(1), 1);
        assert_eq!(zigzag(-1), 2);
    }

    #[test]
    fn sigma_grid_round_trips_and_clamps() {
        for i in 0..SIGMA_GRID_LEN {
            assert_eq!(sigma_grid_index(sigma_grid_value(i)), i);
        }
        assert_eq!(sigma_grid_index(1e-9), 0);
        assert_eq!(sigma_grid_index(1e9), SIGMA_GRID_LEN - 1);
        assert!((sigma_grid_value(0) - SIGMA_MIN).abs() < 1e-12);
        assert!((sigma_grid_value(SIGMA_GRID_LEN - 1) - SIGMA_MAX).abs() < 1e-9);
    }

    #[test]
    fn bin_prob_center_matches_closed_form() {
        for sigma in [0.1, 0.7, 3.0, 40.0] {
            let b = sigma / std::f64::consts::SQRT_2;
            let unnorm = 1.0 - (-1.0 / (2.0 * b)).exp();
            // Renormalization only rescales; compare against the raw value
            // scaled by the alphabet mass.
            let mass: f64 = (-VALUE_CLIP..=VALUE_CLIP)
                .map(|v| raw_bin_prob(v, sigma))
                .sum();
            let got = laplacian_bin_prob(0, sigma);
            assert!((got - unnorm / mass).abs() < 1e-12);
        }
    }

    #[test]
    fn bin_prob_symmetry_and_normalization() {
        for sigma in [0.05, 0.5, 8.0, 256.0] {
            for v in [1, 2, 17, 255] {
                assert_eq!(laplacian_bin_prob(v, sigma), laplacian_bin_prob(-v, sigma));
            }
            let total: f64 = (-VALUE_CLIP..=VALUE_CLIP)
                .map(|v| laplacian_bin_prob(v, sigma))
                .sum();
            assert!((total - 1.0).abs() < 1e-12, "sigma {sigma}: sum {total}");
        }
    }

    #[test]
    fn lap_tables_are_exact_and_positive() {
        let coder = LaplacianCoder::new();
        for t in &coder.tables {
            assert_eq!(t.freqs.iter().sum::<u32>(), MAX_TOTAL);
            assert!(t.freqs.iter().all(|&f| f >= 1));
            assert_eq!(*t.cum.last().unwrap(), MAX_TOTAL);
        }
    }

    #[test]
    fn adaptive_rescale_keeps_frequencies_positive() {
        let mut m = AdaptiveModel::new(3);
        let mut enc = RangeEncoder::new();
        for _ in 0..10_000 {
            m.encode_symbol(&mut enc, 2);
        }
        assert!(m.freqs.iter().all(|&f| f >= 1));
        assert!(m.total <= MAX_TOTAL);
        // The repeated symbol dominates the table.
        assert!(m.bits(2) < 0.1);
    }
}
