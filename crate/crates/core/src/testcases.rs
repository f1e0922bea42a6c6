//! Deterministic node sets for the three benchmark distributions.
//!
//! Randomness comes from a counter-based SplitMix64 stream: value `i` of a
//! stream with key `k` is `mix(k + (i + 1) * 0x9E3779B97F4A7C15)`, where `mix`
//! is the SplitMix64 finalizer (shifts 30, 27, 31 with multipliers
//! `0xBF58476D1CE4E5B9` and `0x94D049BB133111EB`). A stream's key is
//! `mix(seed ^ mix(tag))` for a fixed per-purpose tag, so every coordinate of
//! every node can be regenerated independently of the others.

use std::collections::HashMap;
use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::nodes::NodeSet;
use crate::Point3;

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

pub const TAG_POINTS: u64 = 1;
pub const TAG_VALUES: u64 = 2;
pub const TAG_COMPONENT: u64 = 3;
pub const TAG_NORMAL: u64 = 4;
pub const TAG_NOISE: u64 = 5;

/// Minimum separation below which both nodes of a pair are dropped from the
/// V-plane set.
pub const VPLANE_MIN_SEPARATION: f64 = 1e-4;
/// Opening angle between the two V-plane half planes, in degrees.
pub const VPLANE_ANGLE_DEG: f64 = 135.0;
pub const BIMODAL_SIGMA: f64 = 0.25;
pub const BIMODAL_MEANS: [Point3; 2] = [[0.0, 0.5, 0.5], [1.0, 0.5, 0.5]];

pub fn mix(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Stream {
    key: u64,
}

impl Stream {
    pub fn new(seed: u64, tag: u64) -> Self {
        Self {
            key: mix(seed ^ mix(tag)),
        }
    }

    pub fn bits(&self, i: u64) -> u64 {
        mix(self.key.wrapping_add((i.wrapping_add(1)).wrapping_mul(GOLDEN)))
    }

    /// Uniform on `[0, 1)` with 53 random bits.
    pub fn uniform(&self, i: u64) -> f64 {
        (self.bits(i) >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Standard normal from uniforms `2i` and `2i + 1` (cosine branch of
    /// Box-Muller).
    pub fn normal(&self, i: u64) -> f64 {
        let u1 = 1.0 - self.uniform(2 * i);
        let u2 = self.uniform(2 * i + 1);
        (-2.0 * u1.ln()).sqrt() * (2.0 * PI * u2).cos()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TestCase {
    UniformCube,
    VPlane,
    BimodalGaussian,
}

impl TestCase {
    pub fn name(self) -> &'static str {
        match self {
            TestCase::UniformCube => "uniform",
            TestCase::VPlane => "vplane",
            TestCase::BimodalGaussian => "bimodal",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "uniform" | "1" => Ok(TestCase::UniformCube),
            "vplane" | "2" => Ok(TestCase::VPlane),
            "bimodal" | "3" => Ok(TestCase::BimodalGaussian),
            _ => Err(Error::Config(format!(
                "unknown test case {s:?}; expected uniform, vplane or bimodal"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GeneratorSpec {
    pub case: TestCase,
    pub n: usize,
    pub seed: u64,
}

impl GeneratorSpec {
    pub fn generate(&self) -> Result<NodeSet> {
        if self.n == 0 {
            return Err(Error::EmptyInput("generator needs N >= 1"));
        }
        Ok(match self.case {
            TestCase::UniformCube => gen_uniform_cube(self.n, self.seed),
            TestCase::VPlane => gen_vplane(self.n, self.seed),
            TestCase::BimodalGaussian => gen_bimodal(self.n, self.seed),
        })
    }
}

fn uniform_values(n: usize, seed: u64) -> Vec<f64> {
    let s = Stream::new(seed, TAG_VALUES);
    (0..n as u64).map(|i| s.uniform(i)).collect()
}

fn cube_points(n: usize, seed: u64) -> Vec<Point3> {
    let s = Stream::new(seed, TAG_POINTS);
    (0..n as u64)
        .map(|i| [s.uniform(3 * i), s.uniform(3 * i + 1), s.uniform(3 * i + 2)])
        .collect()
}

/// `n` uniform points in the unit cube with uniform values. Sets for the same
/// seed are nested: a smaller `n` gives a prefix of a larger one.
pub fn gen_uniform_cube(n: usize, seed: u64) -> NodeSet {
    let set = NodeSet::with_values(cube_points(n, seed), uniform_values(n, seed))
        .expect("lengths agree by construction");
    set.with_id(format!("uniform-{n}-{seed}"))
}

/// Folds `p` onto the half plane through `(0.5, 0, 0.5)` spanned by the y
/// axis and `dir`.
fn fold_onto(p: &Point3, dir: &Point3) -> Point3 {
    let c = [0.5, 0.0, 0.5];
    let q = [p[0] - c[0], p[1] - c[1], p[2] - c[2]];
    let s = (q[0] * dir[0] + q[2] * dir[2]).abs();
    [c[0] + s * dir[0], p[1], c[2] + s * dir[2]]
}

/// The uniform-cube nodes projected alternately onto two half planes that
/// share the line `x = z = 0.5` and open at 135 degrees, after which every
/// node closer than [`VPLANE_MIN_SEPARATION`] to another is dropped. Nodes
/// keep their uniform values.
pub fn gen_vplane(n: usize, seed: u64) -> NodeSet {
    let half = (VPLANE_ANGLE_DEG / 2.0).to_radians();
    let dirs = [[half.sin(), 0.0, half.cos()], [-half.sin(), 0.0, half.cos()]];
    let projected: Vec<Point3> = cube_points(n, seed)
        .iter()
        .enumerate()
        .map(|(i, p)| fold_onto(p, &dirs[i % 2]))
        .collect();
    let values = uniform_values(n, seed);
    let keep = separated_indices(&projected, VPLANE_MIN_SEPARATION);
    let removed = n - keep.len();
    if removed > 0 {
        log::info!("vplane: dropped {removed} of {n} nodes closer than {VPLANE_MIN_SEPARATION:e}");
    }
    let points = keep.iter().map(|&i| projected[i]).collect();
    let values = keep.iter().map(|&i| values[i]).collect();
    NodeSet::with_values(points, values)
        .expect("lengths agree by construction")
        .with_id(format!("vplane-{n}-{seed}"))
}

/// Indices of the nodes with no other node strictly closer than `threshold`.
/// Both members of a close pair are dropped.
pub fn separated_indices(points: &[Point3], threshold: f64) -> Vec<usize> {
    let cell = |p: &Point3| -> [i64; 3] { [0, 1, 2].map(|a| (p[a] / threshold).floor() as i64) };
    let mut grid: HashMap<[i64; 3], Vec<usize>> = HashMap::new();
    for (i, p) in points.iter().enumerate() {
        grid.entry(cell(p)).or_default().push(i);
    }
    let t2 = threshold * threshold;
    let mut close = vec![false; points.len()];
    for (i, p) in points.iter().enumerate() {
        let c = cell(p);
        for dx in -1..=1 {
            for dy in -1..=1 {
                for dz in -1..=1 {
                    let Some(bucket) = grid.get(&[c[0] + dx, c[1] + dy, c[2] + dz]) else {
                        continue;
                    };
                    for &j in bucket {
                        if j != i && crate::kernels::dist2(p, &points[j]) < t2 {
                            close[i] = true;
                        }
                    }
                }
            }
        }
    }
    (0..points.len()).filter(|&i| !close[i]).collect()
}

/// Equal-weight mixture of two isotropic Gaussians with standard deviation
/// 0.25 centered at `(0, .5, .5)` and `(1, .5, .5)`. Samples outside the unit
/// cube are kept. Values are uniform.
pub fn gen_bimodal(n: usize, seed: u64) -> NodeSet {
    let comp = Stream::new(seed, TAG_COMPONENT);
    let normal = Stream::new(seed, TAG_NORMAL);
    let points = (0..n as u64)
        .map(|i| {
            let mean = BIMODAL_MEANS[usize::from(comp.uniform(i) >= 0.5)];
            [0, 1, 2].map(|a| mean[a] + BIMODAL_SIGMA * normal.normal(3 * i + a as u64))
        })
        .collect();
    NodeSet::with_values(points, uniform_values(n, seed))
        .expect("lengths agree by construction")
        .with_id(format!("bimodal-{n}-{seed}"))
}
