use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::PointSet;

pub const DEFAULT_SPIRAL_TURNS: f64 = 2.0;
pub const DEFAULT_SPIRAL_NOISE: f64 = 0.02;
pub const DEFAULT_MOONS_NOISE: f64 = 0.07;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ToyKind {
    Moons,
    Spiral,
    Gaussians3,
}

impl ToyKind {
    pub fn name(self) -> &'static str {
        match self {
            ToyKind::Moons => "moons",
            ToyKind::Spiral => "spiral",
            ToyKind::Gaussians3 => "gaussians3",
        }
    }

    /// Noise used when none is given on the command line.
    pub fn default_noise(self) -> f64 {
        match self {
            ToyKind::Moons => DEFAULT_MOONS_NOISE,
            ToyKind::Spiral => DEFAULT_SPIRAL_NOISE,
            ToyKind::Gaussians3 => 1.0,
        }
    }
}

impl std::str::FromStr for ToyKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "moons" => Ok(ToyKind::Moons),
            "spiral" => Ok(ToyKind::Spiral),
            "gaussians3" => Ok(ToyKind::Gaussians3),
            other => Err(Error::usage(format!(
                "unknown dataset kind '{other}' (expected moons, spiral or gaussians3)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ToySpec {
    pub kind: ToyKind,
    /// Total samples, or samples per class for `Gaussians3`.
    pub n: usize,
    /// Gaussian noise scale; the cluster spread for `Gaussians3`.
    pub noise: f64,
    pub seed: u64,
    /// Spiral only.
    pub turns: f64,
}

impl ToySpec {
    pub fn generate(&self) -> Result<PointSet> {
        if !self.noise.is_finite() || self.noise < 0.0 {
            return Err(Error::usage(format!(
                "noise must be finite and >= 0, got {}",
                self.noise
            )));
        }
        match self.kind {
            ToyKind::Moons => two_moons(self.n, self.noise, self.seed),
            ToyKind::Spiral => spiral(self.n, self.turns, self.noise, self.seed),
            ToyKind::Gaussians3 => gaussians3(self.n, None, self.noise, self.seed),
        }
    }
}

fn gaussian(scale: f64) -> Normal<f64> {
    Normal::new(0.0, scale).expect("scale validated by caller")
}

fn check_scale(name: &str, v: f64) -> Result<()> {
    if !v.is_finite() || v < 0.0 {
        return Err(Error::usage(format!("{name} must be finite and >= 0, got {v}")));
    }
    Ok(())
}

fn linspace_pi(k: usize, i: usize) -> f64 {
    if k <= 1 {
        0.0
    } else {
        PI * i as f64 / (k - 1) as f64
    }
}

/// Two interleaving half circles. Rows `0..ceil(n/2)` are class 0 on the upper
/// unit arc; the rest are class 1 on the lower arc centered at `(1, 0.5)`.
pub fn two_moons(n: usize, noise: f64, seed: u64) -> Result<PointSet> {
    if n < 2 {
        return Err(Error::usage(format!("two_moons needs n >= 2, got {n}")));
    }
    check_scale("noise", noise)?;
    let n_upper = n.div_ceil(2);
    let n_lower = n - n_upper;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let jitter = gaussian(noise);
    let mut data = Vec::with_capacity(2 * n);
    let mut labels = Vec::with_capacity(n);
    for i in 0..n_upper {
        let t = linspace_pi(n_upper, i);
        data.extend([t.cos(), t.sin()]);
        labels.push(0);
    }
    for i in 0..n_lower {
        let t = linspace_pi(n_lower, i);
        data.extend([1.0 - t.cos(), 0.5 - t.sin()]);
        labels.push(1);
    }
    if noise > 0.0 {
        for v in &mut data {
            *v += jitter.sample(&mut rng);
        }
    }
    PointSet::with_labels(data, n, 2, labels)
}

/// Noise-free Archimedean spiral point at angle `theta`, scaled so the outer end has radius 1.
pub fn spiral_point(theta: f64, turns: f64) -> [f64; 2] {
    let r = theta / (2.0 * PI * turns);
    [r * theta.cos(), r * theta.sin()]
}

/// Single-class Archimedean spiral with angles uniform in `[0, 2 pi turns]`,
/// rows sorted by angle. All labels are 0.
pub fn spiral(n: usize, turns: f64, noise: f64, seed: u64) -> Result<PointSet> {
    if n < 2 {
        return Err(Error::usage(format!("spiral needs n >= 2, got {n}")));
    }
    if !(turns.is_finite() && turns > 0.0) {
        return Err(Error::usage(format!("turns must be > 0, got {turns}")));
    }
    check_scale("noise", noise)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let max_theta = 2.0 * PI * turns;
    let mut thetas: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..=max_theta)).collect();
    thetas.sort_by(f64::total_cmp);
    let jitter = gaussian(noise);
    let mut data = Vec::with_capacity(2 * n);
    for &t in &thetas {
        let [x, y] = spiral_point(t, turns);
        if noise > 0.0 {
            data.extend([x + jitter.sample(&mut rng), y + jitter.sample(&mut rng)]);
        } else {
            data.extend([x, y]);
        }
    }
    PointSet::with_labels(data, n, 2, vec![0; n])
}

/// Vertices of an equilateral triangle with side `10 * sigma`, centered at the origin.
pub fn default_gaussian_centers(sigma: f64) -> [[f64; 2]; 3] {
    let radius = 10.0 * sigma / 3f64.sqrt();
    [90.0f64, 210.0, 330.0].map(|deg| {
        let a = deg.to_radians();
        [radius * a.cos(), radius * a.sin()]
    })
}

/// Three isotropic Gaussian clusters with `n_per` rows each, labeled 0, 1, 2 in order.
pub fn gaussians3(
    n_per: usize,
    centers: Option<[[f64; 2]; 3]>,
    sigma: f64,
    seed: u64,
) -> Result<PointSet> {
    if n_per < 2 {
        return Err(Error::usage(format!("gaussians3 needs n_per >= 2, got {n_per}")));
    }
    check_scale("sigma", sigma)?;
    let centers = centers.unwrap_or_else(|| default_gaussian_centers(sigma));
    for i in 0..3 {
        for j in 0..i {
            if centers[i] == centers[j] {
                return Err(Error::usage(format!("centers {j} and {i} coincide")));
            }
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let jitter = gaussian(sigma);
    let mut data = Vec::with_capacity(6 * n_per);
    let mut labels = Vec::with_capacity(3 * n_per);
    for (c, center) in centers.iter().enumerate() {
        for _ in 0..n_per {
            for &v in center {
                data.push(v + if sigma > 0.0 { jitter.sample(&mut rng) } else { 0.0 });
            }
            labels.push(c as u32);
        }
    }
    PointSet::with_labels(data, 3 * n_per, 2, labels)
}
