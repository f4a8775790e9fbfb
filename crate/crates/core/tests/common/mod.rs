#![allow(dead_code)]

//! Brute-force reference computations and sample builders shared by the
//! integration tests. Nothing here calls into the bound engines.

use ivbounds::{Observation, Sample};
use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use statrs::distribution::{ContinuousCDF, Normal};

pub type Row = (f64, u8, u8);

pub fn sample(rows: &[Row]) -> Sample {
    Sample::new(
        rows.iter()
            .map(|&(y, d, z)| Observation::new(y, d, z))
            .collect(),
    )
    .unwrap()
}

/// `P(Y <= y, D = d | Z = z)` by counting rows.
pub fn sub(rows: &[Row], y: f64, d: u8, z: u8) -> f64 {
    let arm = rows.iter().filter(|r| r.2 == z).count() as f64;
    rows.iter()
        .filter(|r| r.2 == z && r.1 == d && r.0 <= y)
        .count() as f64
        / arm
}

pub fn share(rows: &[Row], d: u8, z: u8) -> f64 {
    let arm = rows.iter().filter(|r| r.2 == z).count() as f64;
    rows.iter().filter(|r| r.2 == z && r.1 == d).count() as f64 / arm
}

pub fn cell(rows: &[Row], d: u8, z: u8) -> Vec<f64> {
    let mut v: Vec<f64> = rows
        .iter()
        .filter(|r| r.1 == d && r.2 == z)
        .map(|r| r.0)
        .collect();
    v.sort_by(f64::total_cmp);
    v
}

pub fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

/// Mean of the `k` smallest values.
pub fn lowest(v: &[f64], k: usize) -> f64 {
    mean(&v[..k])
}

/// Mean of the `k` largest values.
pub fn highest(v: &[f64], k: usize) -> f64 {
    mean(&v[v.len() - k..])
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn uniform(r: &mut ChaCha8Rng) -> f64 {
    ((r.next_u64() >> 11) as f64 + 0.5) / (1u64 << 53) as f64
}

pub fn normal(r: &mut ChaCha8Rng) -> f64 {
    Normal::new(0.0, 1.0).unwrap().inverse_cdf(uniform(r))
}

/// Design where exclusion and monotonicity hold: `Z ~ Bern(1/2)`, types
/// a/c/n with shares 0.2/0.4/0.4, `Y = D + type shift + N(0, 1)`.
pub fn er_true(n: usize, seed: u64) -> Vec<Row> {
    let mut r = rng(seed);
    (0..n)
        .map(|_| {
            let z = (uniform(&mut r) < 0.5) as u8;
            let u = uniform(&mut r);
            let (d, shift) = if u < 0.2 {
                (1, 0.5)
            } else if u < 0.6 {
                (z, 0.0)
            } else {
                (0, -0.5)
            };
            (d as f64 + shift + normal(&mut r), d, z)
        })
        .collect()
}

/// Small random sample with type shares, exclusion violations and outcome
/// scale drawn from the seed. Both arms and all four cells are nonempty.
/// About one draw in five copies the first arm into the second, which makes
/// the instrument independent of `(Y, D)`.
pub fn random_design(seed: u64, n: usize) -> Vec<Row> {
    let mut r = rng(seed);
    let mut w = [0.0; 4];
    for x in w.iter_mut() {
        *x = 0.05 + uniform(&mut r);
    }
    let total: f64 = w.iter().sum();
    let cum = [
        w[0] / total,
        (w[0] + w[1]) / total,
        (w[0] + w[1] + w[2]) / total,
    ];
    let violation = 2.0 * uniform(&mut r) - 1.0;
    let discrete = uniform(&mut r) < 0.3;
    let mirrored = uniform(&mut r) < 0.2;
    loop {
        let rows: Vec<Row> = (0..n)
            .map(|i| {
                let z = (i % 2) as u8;
                let u = uniform(&mut r);
                let (d0, d1) = if u < cum[0] {
                    (1, 1)
                } else if u < cum[1] {
                    (0, 1)
                } else if u < cum[2] {
                    (1, 0)
                } else {
                    (0, 0)
                };
                let d = if z == 1 { d1 } else { d0 };
                let mut y = d as f64 + violation * z as f64 + normal(&mut r);
                if discrete {
                    y = y.round();
                }
                (y, d, z)
            })
            .collect();
        let rows: Vec<Row> = if mirrored {
            let arm: Vec<Row> = rows.iter().filter(|x| x.2 == 0).copied().collect();
            arm.iter()
                .chain(arm.iter())
                .enumerate()
                .map(|(i, x)| (x.0, x.1, (i >= arm.len()) as u8))
                .collect()
        } else {
            rows
        };
        let full = (0..2u8).all(|d| (0..2u8).all(|z| rows.iter().any(|x| x.1 == d && x.2 == z)));
        if full {
            return rows;
        }
    }
}
