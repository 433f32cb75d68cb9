//! The subset-search compositionality against an independent brute-force
//! enumeration, plus its symmetry properties.

use rand::Rng;
use segilm::metrics::compositionality_raw;
use segilm::StreamKey;

/// Independent oracle: enumerate 7-row subsets by bitmask and redo the
/// flip/score arithmetic from scratch.
fn brute_force_raw(rows: &[[u8; 7]]) -> f64 {
    let n = rows.len();
    assert!((7..=31).contains(&n));
    let mut best = 0.0f64;
    for mask in 0u32..(1 << n) {
        if mask.count_ones() != 7 {
            continue;
        }
        let mut sub: Vec<[u8; 7]> = (0..n)
            .filter(|i| mask & (1 << i) != 0)
            .map(|i| rows[i])
            .collect();
        for row in sub.iter_mut() {
            let ones: u8 = row.iter().sum();
            if ones >= 4 {
                for b in row.iter_mut() {
                    *b = 1 - *b;
                }
            }
        }
        let mut score = 0.0;
        for row in &sub {
            let s: u8 = row.iter().sum();
            if s > 0 {
                score += 1.0 / s as f64;
            }
        }
        for col in 0..7 {
            let s: u8 = sub.iter().map(|r| r[col]).sum();
            if s > 0 {
                score += 1.0 / s as f64;
            }
        }
        best = best.max(score / 14.0);
    }
    best
}

fn random_rows(rng: &mut impl Rng, n_l: usize) -> Vec<[u8; 7]> {
    (0..n_l)
        .map(|_| {
            let mut row = [0u8; 7];
            for b in row.iter_mut() {
                *b = u8::from(rng.random::<bool>());
            }
            row
        })
        .collect()
}

#[test]
fn subset_search_matches_brute_force() {
    let key = StreamKey::from_seed(0x0b);
    for n_l in 7..=12 {
        let mut rng = key.child(n_l as u64).rng();
        // ~34 cases per width; 200 total across widths.
        for case in 0..200 / 6 {
            let rows = random_rows(&mut rng, n_l);
            let got = compositionality_raw(&rows).unwrap();
            let want = brute_force_raw(&rows);
            assert!(
                (got - want).abs() < 1e-12,
                "n_l={n_l} case={case}: {got} vs {want}"
            );
        }
    }
}

#[test]
fn fixed_random_8_row_case_matches_oracle() {
    let mut rng = StreamKey::from_seed(0x88).rng();
    let rows = random_rows(&mut rng, 8);
    assert_eq!(compositionality_raw(&rows).unwrap(), brute_force_raw(&rows));
}

#[test]
fn complementing_a_row_never_changes_the_score() {
    let mut rng = StreamKey::from_seed(0xcc).rng();
    for _ in 0..100 {
        let n_l = rng.random_range(7..=10);
        let mut rows = random_rows(&mut rng, n_l);
        let base = compositionality_raw(&rows).unwrap();
        let victim = rng.random_range(0..n_l);
        for b in rows[victim].iter_mut() {
            *b = 1 - *b;
        }
        assert_eq!(compositionality_raw(&rows).unwrap(), base);
    }
}

#[test]
fn row_permutation_invariance() {
    use rand::seq::SliceRandom;
    let mut rng = StreamKey::from_seed(0xab).rng();
    for _ in 0..50 {
        let mut rows = random_rows(&mut rng, 9);
        let base = compositionality_raw(&rows).unwrap();
        rows.shuffle(&mut rng);
        // Summation order of the 1/s terms changes, so allow an ulp or two.
        assert!((compositionality_raw(&rows).unwrap() - base).abs() < 1e-12);
    }
}

#[test]
fn column_permutation_invariance() {
    // A different one-hot glyph ordering permutes the columns of C; the
    // row/column-sum arithmetic cannot see that.
    use rand::seq::SliceRandom;
    let mut rng = StreamKey::from_seed(0xba).rng();
    for _ in 0..50 {
        let rows = random_rows(&mut rng, 8);
        let base = compositionality_raw(&rows).unwrap();
        let mut perm: Vec<usize> = (0..7).collect();
        perm.shuffle(&mut rng);
        let permuted: Vec<[u8; 7]> = rows
            .iter()
            .map(|r| {
                let mut p = [0u8; 7];
                for (k, &src) in perm.iter().enumerate() {
                    p[k] = r[src];
                }
                p
            })
            .collect();
        assert!((compositionality_raw(&permuted).unwrap() - base).abs() < 1e-12);
    }
}

#[test]
fn raw_score_stays_in_unit_interval() {
    let mut rng = StreamKey::from_seed(0xee).rng();
    for _ in 0..500 {
        let n_l = rng.random_range(7..=12);
        let rows = random_rows(&mut rng, n_l);
        let v = compositionality_raw(&rows).unwrap();
        assert!((0.0..=1.0).contains(&v), "score {v}");
    }
}
