//! Synthetic benchmark signals.
//!
//! * Examples 1 and 2: real part of an `n`-term scattering sum sampled along
//!   an arc, classes distinguished by the number of scatterers.
//! * Example 3: noisy convex mixtures of shifted triangles, three classes.
//!
//! Randomness comes from ChaCha8 substreams: every signal draws from its own
//! stream keyed by `(example, realization, split, class, index)`, so datasets
//! are reproducible bit for bit and can be generated in any order.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use rand::distr::{Distribution, Open01};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::par;

/// Distance to the scatterers.
pub const RANGE_R: f64 = 1.0e4;
/// Wave number.
pub const WAVE_K: f64 = 100.0;
/// Angular step between samples, `2 pi / 16k`.
pub const ANGLE_STEP: f64 = 2.0 * PI / 1600.0;
pub const EX12_LENGTH: usize = 1024;
pub const EX3_LENGTH: usize = 32;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Example {
    Ex1,
    Ex2,
    Ex3,
}

impl Example {
    pub fn signal_length(self) -> usize {
        match self {
            Example::Ex1 | Example::Ex2 => EX12_LENGTH,
            Example::Ex3 => EX3_LENGTH,
        }
    }

    /// Class labels used in generated datasets.
    pub fn classes(self) -> &'static [u32] {
        match self {
            Example::Ex1 | Example::Ex2 => &[1, 2],
            Example::Ex3 => &[1, 2, 3],
        }
    }

    /// Number of scatterers behind each class label (Examples 1 and 2).
    pub fn scatterers(self, label: u32) -> Option<usize> {
        let base = match self {
            Example::Ex1 => 3,
            Example::Ex2 => 4,
            Example::Ex3 => return None,
        };
        Some(base + label as usize - 1)
    }

    fn tag(self) -> u64 {
        match self {
            Example::Ex1 => 1,
            Example::Ex2 => 2,
            Example::Ex3 => 3,
        }
    }
}

impl fmt::Display for Example {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "ex{}", self.tag())
    }
}

impl FromStr for Example {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "ex1" | "1" => Ok(Example::Ex1),
            "ex2" | "2" => Ok(Example::Ex2),
            "ex3" | "3" => Ok(Example::Ex3),
            other => Err(Error::InvalidParams(format!("unknown example {other:?}"))),
        }
    }
}

/// Root seed plus substream derivation.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RngSpec {
    pub seed: u64,
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

impl RngSpec {
    pub fn new(seed: u64) -> Self {
        RngSpec { seed }
    }

    /// Independent generator for the given key path.
    pub fn stream(&self, key: &[u64]) -> ChaCha8Rng {
        let id = key
            .iter()
            .fold(0x6c64_6273_7472_6d00u64, |h, &k| splitmix64(h ^ k));
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(id);
        rng
    }
}

fn normalize(mut v: Vec<f64>) -> Vec<f64> {
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm > 0.0 {
        v.iter_mut().for_each(|x| *x /= norm);
    }
    v
}

/// Normalized samples of `Re sum_j (1/n) exp(i k (r_j²/2R - r_j cos(theta - theta_j)))`
/// at `theta_s = offset + s * ANGLE_STEP`, for scatterers `(r_j, theta_j)`.
pub fn scattering_waveform(scatterers: &[(f64, f64)], length: usize, offset: f64) -> Vec<f64> {
    let amp = 1.0 / scatterers.len() as f64;
    let s: Vec<f64> = (0..length)
        .map(|s| {
            let theta = offset + s as f64 * ANGLE_STEP;
            scatterers
                .iter()
                .map(|&(r, tj)| {
                    amp * (WAVE_K * (r * r / (2.0 * RANGE_R) - r * (theta - tj).cos())).cos()
                })
                .sum()
        })
        .collect();
    normalize(s)
}

fn draw_scatterers(n: usize, rng: &mut impl Rng) -> Vec<(f64, f64)> {
    (1..=n)
        .map(|j| {
            let r = 1.0 + 9.0 * rng.random::<f64>();
            let start = 2.0 * PI * j as f64 / n as f64;
            let theta = start + (PI / 4.0) * rng.random::<f64>();
            (r, theta)
        })
        .collect()
}

/// `count` scattering signals with `n` terms drawn sequentially from `rng`.
pub fn gen_ex12(n: usize, count: usize, offset: f64, rng: &mut impl Rng) -> Result<Vec<Vec<f64>>> {
    if !(3..=5).contains(&n) {
        return Err(Error::InvalidN(n));
    }
    Ok((0..count)
        .map(|_| scattering_waveform(&draw_scatterers(n, rng), EX12_LENGTH, offset))
        .collect())
}

/// `h1(i) = max(6 - |i - 7|, 0)` for one-based `i`.
pub fn triangle(i: i64) -> f64 {
    (6 - (i - 7).abs()).max(0) as f64
}

/// The two triangle shifts mixed by class `class_id`.
fn class_shapes(class_id: u32) -> Result<(i64, i64)> {
    // h1 = shift 0, h2 = shift 8, h3 = shift 4
    match class_id {
        1 => Ok((0, 8)),
        2 => Ok((0, 4)),
        3 => Ok((8, 4)),
        c => Err(Error::InvalidClass(c)),
    }
}

/// `u h_a + (1-u) h_b + noise`, normalized, for class `class_id`.
pub fn triangle_waveform(class_id: u32, u: f64, noise: &[f64]) -> Result<Vec<f64>> {
    let (a, b) = class_shapes(class_id)?;
    if noise.len() != EX3_LENGTH {
        return Err(Error::DimensionMismatch {
            expected: EX3_LENGTH,
            actual: noise.len(),
        });
    }
    let v = (1..=EX3_LENGTH as i64)
        .zip(noise)
        .map(|(i, e)| u * triangle(i - a) + (1.0 - u) * triangle(i - b) + e)
        .collect();
    Ok(normalize(v))
}

fn draw_triangle(class_id: u32, rng: &mut impl Rng) -> Result<Vec<f64>> {
    let u: f64 = Open01.sample(rng);
    let noise: Vec<f64> = (0..EX3_LENGTH)
        .map(|_| StandardNormal.sample(rng))
        .collect();
    triangle_waveform(class_id, u, &noise)
}

pub fn gen_ex3(class_id: u32, count: usize, rng: &mut impl Rng) -> Result<Vec<Vec<f64>>> {
    class_shapes(class_id)?;
    (0..count).map(|_| draw_triangle(class_id, rng)).collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitSizes {
    pub train_per_class: usize,
    pub test_per_class: usize,
}

impl Default for SplitSizes {
    fn default() -> Self {
        SplitSizes {
            train_per_class: 100,
            test_per_class: 1000,
        }
    }
}

const TRAIN: u64 = 0;
const TEST: u64 = 1;

fn gen_split(
    example: Example,
    realization: u64,
    split: u64,
    per_class: usize,
    rng: &RngSpec,
    offset: f64,
) -> Result<Dataset> {
    let mut ds = Dataset::new(example.signal_length());
    for &label in example.classes() {
        let signals = par::try_map_range(per_class, |i| {
            let mut r = rng.stream(&[example.tag(), realization, split, label as u64, i as u64]);
            match example.scatterers(label) {
                Some(n) => Ok(scattering_waveform(
                    &draw_scatterers(n, &mut r),
                    EX12_LENGTH,
                    offset,
                )),
                None => draw_triangle(label, &mut r),
            }
        })?;
        ds.extend(label, signals)?;
    }
    Ok(ds)
}

/// Training and test sets of one realization of an experiment.
pub fn gen_experiment(
    example: Example,
    realization: u64,
    rng: &RngSpec,
    sizes: SplitSizes,
    phase_offset: f64,
) -> Result<(Dataset, Dataset)> {
    if sizes.train_per_class == 0 || sizes.test_per_class == 0 {
        return Err(Error::InvalidParams(
            "per-class counts must be at least 1".into(),
        ));
    }
    Ok((
        gen_split(
            example,
            realization,
            TRAIN,
            sizes.train_per_class,
            rng,
            phase_offset,
        )?,
        gen_split(
            example,
            realization,
            TEST,
            sizes.test_per_class,
            rng,
            phase_offset,
        )?,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn norm(v: &[f64]) -> f64 {
        v.iter().map(|x| x * x).sum::<f64>().sqrt()
    }

    #[test]
    fn triangle_values() {
        assert_eq!(triangle(7), 6.0);
        assert_eq!(triangle(1), 0.0);
        assert_eq!(triangle(13), 0.0);
        assert_eq!(triangle(10), 3.0);
        let argmax = |shift: i64| {
            (1..=32)
                .max_by(|&a, &b| triangle(a - shift).total_cmp(&triangle(b - shift)))
                .unwrap()
        };
        assert_eq!(argmax(8), 15);
        assert_eq!(argmax(4), 11);
    }

    #[test]
    fn degenerate_triangle_draw() {
        let s = triangle_waveform(1, 1.0, &[0.0; 32]).unwrap();
        let h: Vec<f64> = (1..=32).map(triangle).collect();
        let n = norm(&h);
        for (a, b) in s.iter().zip(&h) {
            assert!((a - b / n).abs() < 1e-15);
        }
        assert!(matches!(
            triangle_waveform(4, 0.5, &[0.0; 32]),
            Err(Error::InvalidClass(4))
        ));
    }

    #[test]
    fn single_scatterer_closed_form() {
        let (r, th) = (4.5, 1.2);
        let s = scattering_waveform(&[(r, th), (r, th), (r, th)], 1024, 0.0);
        let direct: Vec<f64> = (0..1024)
            .map(|s| {
                let t = s as f64 * 2.0 * PI / 1600.0;
                (WAVE_K * r * (t - th).cos() - WAVE_K * r * r / (2.0 * RANGE_R)).cos()
            })
            .collect();
        let n = norm(&direct);
        for (a, b) in s.iter().zip(&direct) {
            assert!((a - b / n).abs() < 1e-12);
        }
    }

    #[test]
    fn generated_signals_are_unit_norm() {
        let mut rng = RngSpec::new(7).stream(&[9]);
        for n in 3..=5 {
            for s in gen_ex12(n, 5, 0.0, &mut rng).unwrap() {
                assert_eq!(s.len(), 1024);
                assert!((norm(&s) - 1.0).abs() < 1e-12);
            }
        }
        for c in 1..=3 {
            for s in gen_ex3(c, 20, &mut rng).unwrap() {
                assert_eq!(s.len(), 32);
                assert!((norm(&s) - 1.0).abs() < 1e-12);
            }
        }
        assert!(matches!(
            gen_ex12(6, 1, 0.0, &mut rng),
            Err(Error::InvalidN(6))
        ));
        assert!(matches!(
            gen_ex3(0, 1, &mut rng),
            Err(Error::InvalidClass(0))
        ));
    }

    #[test]
    fn scatterer_draw_ranges() {
        let mut rng = RngSpec::new(11).stream(&[1]);
        let mut sum = 0.0;
        let mut count = 0;
        while count < 10_000 {
            let n = 3 + count % 3;
            for (j, (r, th)) in draw_scatterers(n, &mut rng).into_iter().enumerate() {
                let lo = 2.0 * PI * (j + 1) as f64 / n as f64;
                assert!((1.0..=10.0).contains(&r));
                assert!(th >= lo && th <= lo + PI / 4.0);
                sum += r;
                count += 1;
            }
        }
        let mean = sum / count as f64;
        assert!((mean - 5.5).abs() < 0.1, "{mean}");
    }

    #[test]
    fn experiment_sizes_and_reproducibility() {
        let rng = RngSpec::new(3);
        let sizes = SplitSizes {
            train_per_class: 10,
            test_per_class: 25,
        };
        let (tr, te) = gen_experiment(Example::Ex3, 0, &rng, sizes, 0.0).unwrap();
        assert_eq!(
            tr.class_counts().into_values().collect::<Vec<_>>(),
            vec![10, 10, 10]
        );
        assert_eq!(te.len(), 75);
        let (tr2, te2) = gen_experiment(Example::Ex3, 0, &rng, sizes, 0.0).unwrap();
        assert_eq!(tr, tr2);
        assert_eq!(te, te2);
        let (tr3, _) = gen_experiment(Example::Ex3, 1, &rng, sizes, 0.0).unwrap();
        assert_ne!(tr, tr3);
        assert_ne!(tr, te);
    }

    #[test]
    fn example_metadata() {
        assert_eq!(Example::Ex1.scatterers(1), Some(3));
        assert_eq!(Example::Ex1.scatterers(2), Some(4));
        assert_eq!(Example::Ex2.scatterers(2), Some(5));
        assert_eq!("ex2".parse::<Example>().unwrap(), Example::Ex2);
        assert_eq!(Example::Ex3.to_string(), "ex3");
    }
}
