//! Seeded synthetic dataset generators for benchmarks and tests.
//!
//! Everything here is deterministic per seed. Three families:
//! * Gaussian blobs with controllable class separation,
//! * the classic 3-class / 21-feature waveform generator (two of three
//!   triangular base waves mixed by a uniform weight plus unit Gaussian
//!   noise; the class overlap keeps the best attainable accuracy around
//!   86%),
//! * glyph digits: 28 x 28 grayscale renderings of a 5 x 7 digit font with
//!   random placement, stroke intensity, blur, and pixel noise, as a
//!   stand-in for handwritten-digit data when none is available offline.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::matrix::Matrix;

/// Features (d x n) plus a class index per column.
pub struct SynthData {
    pub x: Matrix,
    pub labels: Vec<usize>,
    pub classes: usize,
}

/// Isotropic Gaussian blobs, one cluster per class, classes interleaved
/// across columns. Cluster centers are drawn on the sphere of radius
/// `separation`; samples add `noise`-scaled Gaussian offsets.
pub fn blobs(
    n: usize,
    d: usize,
    classes: usize,
    separation: f64,
    noise: f64,
    seed: u64,
) -> SynthData {
    assert!(classes >= 1 && d >= 1 && n >= classes);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normal = StandardNormal;

    let mut centers = Vec::with_capacity(classes);
    for _ in 0..classes {
        let mut center: Vec<f64> = (0..d).map(|_| normal.sample(&mut rng)).collect();
        let norm = center.iter().map(|v| v * v).sum::<f64>().sqrt().max(1e-12);
        center.iter_mut().for_each(|v| *v *= separation / norm);
        centers.push(center);
    }

    let mut x = Matrix::zeros(d, n);
    let mut labels = Vec::with_capacity(n);
    for j in 0..n {
        let class = j % classes;
        labels.push(class);
        for i in 0..d {
            let eps: f64 = normal.sample(&mut rng);
            x[(i, j)] = centers[class][i] + noise * eps;
        }
    }
    SynthData { x, labels, classes }
}

/// Triangular base wave `max(6 - |t - peak|, 0)` sampled at t = 1..=21.
fn wave(peak: f64, t: f64) -> f64 {
    (6.0 - (t - peak).abs()).max(0.0)
}

/// The 3-class, 21-feature waveform generator. Each class mixes two of the
/// three base waves (peaks at 7, 11, 15) with a uniform weight and adds unit
/// Gaussian noise per feature.
pub fn waveform(n: usize, seed: u64) -> SynthData {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normal = StandardNormal;
    let pairs = [(11.0, 7.0), (11.0, 15.0), (7.0, 15.0)];

    let mut x = Matrix::zeros(21, n);
    let mut labels = Vec::with_capacity(n);
    for j in 0..n {
        let class = j % 3;
        labels.push(class);
        let (peak_a, peak_b) = pairs[class];
        let u: f64 = rng.random_range(0.0..1.0);
        for i in 0..21 {
            let t = (i + 1) as f64;
            let eps: f64 = normal.sample(&mut rng);
            x[(i, j)] = u * wave(peak_a, t) + (1.0 - u) * wave(peak_b, t) + eps;
        }
    }
    SynthData {
        x,
        labels,
        classes: 3,
    }
}

/// 5 x 7 bitmap font for the digits 0-9.
const DIGIT_FONT: [[&str; 7]; 10] = [
    [" ### ", "#   #", "#  ##", "# # #", "##  #", "#   #", " ### "],
    ["  #  ", " ##  ", "  #  ", "  #  ", "  #  ", "  #  ", " ### "],
    [" ### ", "#   #", "    #", "   # ", "  #  ", " #   ", "#####"],
    [" ### ", "#   #", "    #", "  ## ", "    #", "#   #", " ### "],
    ["   # ", "  ## ", " # # ", "#  # ", "#####", "   # ", "   # "],
    ["#####", "#    ", "#### ", "    #", "    #", "#   #", " ### "],
    [" ### ", "#    ", "#    ", "#### ", "#   #", "#   #", " ### "],
    ["#####", "    #", "   # ", "  #  ", "  #  ", " #   ", " #   "],
    [" ### ", "#   #", "#   #", " ### ", "#   #", "#   #", " ### "],
    [" ### ", "#   #", "#   #", " ####", "    #", "    #", " ### "],
];

const GLYPH_SIDE: usize = 28;

/// Glyph digits: each sample renders its class glyph at 3x upscale into a
/// 28 x 28 frame with a random offset, jittered stroke intensity, one box
/// blur pass, heavy pixel noise, and occasional stroke dropout. Pixels are
/// quantized to u8 levels and scaled back to [0, 1], matching what a
/// round-trip through 8-bit image files produces.
pub fn glyph_digits(n: usize, seed: u64) -> SynthData {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let d = GLYPH_SIDE * GLYPH_SIDE;
    let mut x = Matrix::zeros(d, n);
    let mut labels = Vec::with_capacity(n);
    for j in 0..n {
        let class = j % 10;
        labels.push(class);
        let pixels = render_glyph(class, &mut rng);
        for (i, p) in pixels.iter().enumerate() {
            x[(i, j)] = *p as f64 / 255.0;
        }
    }
    SynthData {
        x,
        labels,
        classes: 10,
    }
}

/// Render one digit as 28 x 28 u8 pixels.
pub fn render_glyph(digit: usize, rng: &mut ChaCha8Rng) -> Vec<u8> {
    let side = GLYPH_SIDE;
    let mut canvas = vec![0.0f64; side * side];
    // glyph occupies 15 x 21 at 3x scale; leave room for random offsets
    let dx = rng.random_range(0..=12);
    let dy = rng.random_range(0..=6);
    let intensity: f64 = rng.random_range(0.65..1.0);
    let dropout: f64 = rng.random_range(0.0..0.12);

    for (r, row) in DIGIT_FONT[digit].iter().enumerate() {
        for (c, ch) in row.chars().enumerate() {
            if ch != '#' || rng.random_range(0.0..1.0) < dropout {
                continue;
            }
            let cell = intensity * rng.random_range(0.8..1.2);
            for sr in 0..3 {
                for sc in 0..3 {
                    let y = r * 3 + sr + dy;
                    let x = c * 3 + sc + dx;
                    if y < side && x < side {
                        canvas[y * side + x] = cell.min(1.0);
                    }
                }
            }
        }
    }

    // one 3x3 box blur pass softens the block edges
    let mut blurred = vec![0.0f64; side * side];
    for y in 0..side {
        for x in 0..side {
            let mut acc = 0.0;
            let mut cnt = 0.0;
            for oy in -1i32..=1 {
                for ox in -1i32..=1 {
                    let yy = y as i32 + oy;
                    let xx = x as i32 + ox;
                    if yy >= 0 && yy < side as i32 && xx >= 0 && xx < side as i32 {
                        acc += canvas[yy as usize * side + xx as usize];
                        cnt += 1.0;
                    }
                }
            }
            blurred[y * side + x] = acc / cnt;
        }
    }

    let normal = StandardNormal;
    blurred
        .iter()
        .map(|&v| {
            let eps: f64 = normal.sample(rng);
            let noisy = (v + 0.18 * eps).clamp(0.0, 1.0);
            (noisy * 255.0).round() as u8
        })
        .collect()
}

impl SynthData {
    /// One-hot label matrix (c x n).
    pub fn one_hot(&self) -> Matrix {
        let mut y = Matrix::zeros(self.classes, self.labels.len());
        for (j, &l) in self.labels.iter().enumerate() {
            y[(l, j)] = 1.0;
        }
        y
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn blobs_shapes_and_determinism() {
        let a = blobs(30, 4, 3, 3.0, 1.0, 5);
        assert_eq!(a.x.shape(), (4, 30));
        assert_eq!(a.labels.len(), 30);
        assert!(a.labels.iter().all(|&l| l < 3));
        let b = blobs(30, 4, 3, 3.0, 1.0, 5);
        assert_eq!(a.x, b.x);
        assert_eq!(a.labels, b.labels);
        let c = blobs(30, 4, 3, 3.0, 1.0, 6);
        assert_ne!(a.x, c.x);
    }

    #[test]
    fn waveform_shape_and_range() {
        let w = waveform(90, 1);
        assert_eq!(w.x.shape(), (21, 90));
        assert_eq!(w.classes, 3);
        // waves peak at 6, noise is unit: values stay in a sane band
        assert!(w.x.iter().all(|&v| v > -8.0 && v < 14.0));
    }

    #[test]
    fn glyphs_are_valid_pixels() {
        let g = glyph_digits(20, 3);
        assert_eq!(g.x.shape(), (784, 20));
        assert!(g.x.iter().all(|&v| (0.0..=1.0).contains(&v)));
        assert_eq!(g.labels[3], 3);
        // same class still differs sample to sample (noise + placement)
        assert_ne!(
            g.x.column(0).clone_owned(),
            g.x.column(10).clone_owned()
        );
    }

    #[test]
    fn one_hot_is_consistent() {
        let g = blobs(12, 2, 4, 2.0, 0.5, 9);
        let y = g.one_hot();
        for (j, &l) in g.labels.iter().enumerate() {
            assert_eq!(y[(l, j)], 1.0);
            assert_eq!(y.column(j).sum(), 1.0);
        }
    }
}
