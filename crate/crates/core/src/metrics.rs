//! Language metrics: expressivity, stability and the compositionality
//! proxy with its Bernoulli(0.5) background normalization.

use crate::agent::Signal;
use crate::error::CoreError;
use crate::glyphset::GlyphId;
use itertools::Itertools;
use rand::Rng;
use std::collections::HashSet;

/// Fraction of distinct signals over the 128 base glyphs.
pub fn expressivity(table: &[Signal]) -> f64 {
    let distinct: HashSet<&Signal> = table.iter().collect();
    distinct.len() as f64 / table.len() as f64
}

/// Fraction of glyphs whose signal is unchanged between two tables.
pub fn stability(table: &[Signal], prev: &[Signal]) -> Result<f64, CoreError> {
    if table.len() != prev.len() || table.iter().zip(prev).any(|(a, b)| a.len() != b.len()) {
        return Err(CoreError::Dimension(
            "language tables have different shapes".into(),
        ));
    }
    let same = table.iter().zip(prev).filter(|(a, b)| a == b).count();
    Ok(same as f64 / table.len() as f64)
}

/// The signals of the seven one-hot glyphs as an n_l x 7 bit matrix;
/// row i is bit i across the seven signals, column j is the signal of the
/// glyph with only segment j lit.
pub fn one_hot_matrix(table: &[Signal]) -> Vec<[u8; 7]> {
    let signals: Vec<&Signal> = GlyphId::one_hot()
        .iter()
        .map(|id| &table[id.index()])
        .collect();
    let n_l = signals[0].len();
    (0..n_l)
        .map(|row| {
            let mut r = [0u8; 7];
            for (j, s) in signals.iter().enumerate() {
                r[j] = s.bits()[row];
            }
            r
        })
        .collect()
}

/// A bit can code a segment actively or inverted; canonicalize by flipping
/// any row with four or more ones.
pub fn flip_rows(rows: &mut [[u8; 7]]) {
    for row in rows {
        if row.iter().filter(|&&b| b == 1).count() >= 4 {
            for b in row.iter_mut() {
                *b = 1 - *b;
            }
        }
    }
}

fn phi(v: u32) -> f64 {
    if v > 0 {
        1.0 / v as f64
    } else {
        0.0
    }
}

/// Rectified-reciprocal score of a 7x7 bit matrix (already row-flipped):
/// (1/14) * sum over rows and columns of phi(sum).
pub fn composition_score(rows: &[[u8; 7]; 7]) -> f64 {
    let mut total = 0.0;
    let mut col_sums = [0u32; 7];
    for row in rows {
        let mut r = 0u32;
        for (j, &b) in row.iter().enumerate() {
            r += b as u32;
            col_sums[j] += b as u32;
        }
        total += phi(r);
    }
    for c in col_sums {
        total += phi(c);
    }
    total / 14.0
}

/// Raw compositionality: best row-flipped score over every choice of seven
/// of the n_l bit-rows.
pub fn compositionality_raw(rows: &[[u8; 7]]) -> Result<f64, CoreError> {
    let n_l = rows.len();
    if n_l < 7 {
        return Err(CoreError::InvalidConfig(format!(
            "compositionality needs n_l >= 7, got {n_l}"
        )));
    }
    let mut best = 0.0f64;
    for subset in (0..n_l).combinations(7) {
        let mut m = [[0u8; 7]; 7];
        for (k, &ri) in subset.iter().enumerate() {
            m[k] = rows[ri];
        }
        flip_rows(&mut m);
        best = best.max(composition_score(&m));
    }
    Ok(best)
}

/// Raw compositionality of a full language table (uses the one-hot glyphs).
pub fn compositionality_raw_of_table(table: &[Signal]) -> Result<f64, CoreError> {
    compositionality_raw(&one_hot_matrix(table))
}

/// Monte Carlo estimate of the raw compositionality of random signal sets:
/// seven n_l-bit signals with Bernoulli(0.5) components per sample.
pub fn background_c0<R: Rng + ?Sized>(n_l: usize, n_samples: usize, rng: &mut R) -> f64 {
    background_c0_with_stderr(n_l, n_samples, rng).0
}

/// Same estimate plus its standard error.
pub fn background_c0_with_stderr<R: Rng + ?Sized>(
    n_l: usize,
    n_samples: usize,
    rng: &mut R,
) -> (f64, f64) {
    assert!(n_samples >= 1);
    let mut sum = 0.0;
    let mut sum_sq = 0.0;
    let mut rows = vec![[0u8; 7]; n_l];
    for _ in 0..n_samples {
        for row in rows.iter_mut() {
            for b in row.iter_mut() {
                *b = u8::from(rng.random::<bool>());
            }
        }
        let v = compositionality_raw(&rows).expect("n_l >= 7");
        sum += v;
        sum_sq += v * v;
    }
    let n = n_samples as f64;
    let mean = sum / n;
    let var = (sum_sq / n - mean * mean).max(0.0);
    let stderr = (var / n).sqrt();
    (mean, stderr)
}

/// Normalized compositionality c = (raw - c0)/(1 - c0); may be negative.
pub fn compositionality(raw: f64, c0: f64) -> Result<f64, CoreError> {
    if !(0.0..1.0).contains(&c0) {
        return Err(CoreError::InvalidConfig(format!(
            "c0 must be in [0,1), got {c0}"
        )));
    }
    Ok((raw - c0) / (1.0 - c0))
}
