//! Synthetic data: Gaussian mixtures and procedurally drawn digit glyphs.

use rand::Rng;
use rand_distr::StandardNormal;

use super::Dataset;
use crate::error::{Error, Result};
use crate::seed;

/// A mixture sample together with its component centres, both in the
/// normalised coordinates of the returned dataset.
#[derive(Clone, Debug)]
pub struct MixtureSample {
    pub dataset: Dataset,
    pub centers: Vec<Vec<f64>>,
    /// Factor by which raw distances were multiplied during normalisation.
    pub scale: f64,
}

/// Isotropic Gaussian blobs around centres drawn uniformly from the unit cube,
/// then min-max normalised (one affine map for every coordinate) into
/// `[0,1]^d`. The component index is stored as contributor id.
pub fn synth_gaussian_mixture(
    num_components: usize,
    points_per_component: usize,
    dimension: usize,
    spread: f64,
    seed: u64,
) -> Result<Dataset> {
    Ok(synth_gaussian_mixture_detailed(num_components, points_per_component, dimension, spread, seed)?.dataset)
}

pub fn synth_gaussian_mixture_detailed(
    num_components: usize,
    points_per_component: usize,
    dimension: usize,
    spread: f64,
    seed: u64,
) -> Result<MixtureSample> {
    if num_components == 0 || points_per_component == 0 || dimension == 0 {
        return Err(Error::InvalidArgument("mixture counts must be positive".into()));
    }
    if !(spread >= 0.0) {
        return Err(Error::InvalidArgument("spread must be nonnegative".into()));
    }
    let mut rng = seed::rng_for(seed, "synth/mixture", 0);
    let centers: Vec<Vec<f64>> = (0..num_components)
        .map(|_| (0..dimension).map(|_| rng.gen::<f64>()).collect())
        .collect();
    let mut rows = Vec::with_capacity(num_components * points_per_component);
    let mut owners = Vec::with_capacity(rows.capacity());
    for (c, center) in centers.iter().enumerate() {
        for _ in 0..points_per_component {
            rows.push(
                center
                    .iter()
                    .map(|m| m + spread * rng.sample::<f64, _>(StandardNormal))
                    .collect::<Vec<f64>>(),
            );
            owners.push(c as u32);
        }
    }
    let lo = rows.iter().flatten().copied().fold(f64::INFINITY, f64::min);
    let hi = rows.iter().flatten().copied().fold(f64::NEG_INFINITY, f64::max);
    let (shift, scale) = if hi > lo { (lo, 1.0 / (hi - lo)) } else { (lo - 0.5, 1.0) };
    let norm = |v: &Vec<f64>| -> Vec<f64> {
        v.iter().map(|x| ((x - shift) * scale).clamp(0.0, 1.0)).collect()
    };
    let rows: Vec<Vec<f64>> = rows.iter().map(norm).collect();
    let centers = centers.iter().map(|c| c.iter().map(|x| (x - shift) * scale).collect()).collect();
    Ok(MixtureSample {
        dataset: Dataset::new(rows)?.with_contributors(owners)?,
        centers,
        scale,
    })
}

/// Segments of a seven-segment layout on the unit square, `y` pointing down.
const SEGMENTS: [[(f64, f64); 2]; 7] = [
    [(0.22, 0.12), (0.78, 0.12)], // a: top
    [(0.78, 0.12), (0.78, 0.50)], // b: upper right
    [(0.78, 0.50), (0.78, 0.88)], // c: lower right
    [(0.22, 0.88), (0.78, 0.88)], // d: bottom
    [(0.22, 0.50), (0.22, 0.88)], // e: lower left
    [(0.22, 0.12), (0.22, 0.50)], // f: upper left
    [(0.22, 0.50), (0.78, 0.50)], // g: middle
];

const DIGIT_SEGMENTS: [&[usize]; 10] = [
    &[0, 1, 2, 3, 4, 5],
    &[1, 2],
    &[0, 1, 6, 4, 3],
    &[0, 1, 6, 2, 3],
    &[5, 6, 1, 2],
    &[0, 5, 6, 2, 3],
    &[0, 5, 6, 4, 2, 3],
    &[0, 1, 2],
    &[0, 1, 2, 3, 4, 5, 6],
    &[0, 1, 2, 3, 5, 6],
];

/// A straight pen stroke in unit-square coordinates.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Stroke {
    pub from: (f64, f64),
    pub to: (f64, f64),
    /// Ink intensity in `(0,1]`.
    pub weight: f64,
}

/// Handwriting-like variation of one glyph: the class skeleton with every
/// stroke displaced and weighted on its own, a few stray strokes, and a global
/// placement.
#[derive(Clone, Debug, PartialEq)]
pub struct GlyphStyle {
    pub class: u8,
    pub shift: (f64, f64),
    pub scale: f64,
    pub slant: f64,
    /// Half-width of every stroke.
    pub thickness: f64,
    pub strokes: Vec<Stroke>,
}

const ENDPOINT_JITTER: f64 = 0.08;
const MAX_STRAY_STROKES: usize = 2;

impl GlyphStyle {
    pub fn random<R: Rng + ?Sized>(class: u8, rng: &mut R) -> Self {
        let mut strokes: Vec<Stroke> = DIGIT_SEGMENTS[class as usize]
            .iter()
            .map(|&s| {
                let [a, b] = SEGMENTS[s];
                let mut j = |v: f64| v + rng.gen_range(-ENDPOINT_JITTER..ENDPOINT_JITTER);
                Stroke {
                    from: (j(a.0), j(a.1)),
                    to: (j(b.0), j(b.1)),
                    weight: rng.gen_range(0.55..1.0),
                }
            })
            .collect();
        for _ in 0..rng.gen_range(0..=MAX_STRAY_STROKES) {
            let from = (rng.gen_range(0.2..0.8), rng.gen_range(0.1..0.9));
            let angle = rng.gen_range(0.0..std::f64::consts::TAU);
            let len = rng.gen_range(0.15..0.4);
            strokes.push(Stroke {
                from,
                to: (from.0 + len * angle.cos(), from.1 + len * angle.sin()),
                weight: rng.gen_range(0.3..0.8),
            });
        }
        GlyphStyle {
            class,
            shift: (rng.gen_range(-0.06..0.06), rng.gen_range(-0.06..0.06)),
            scale: rng.gen_range(0.85..1.05),
            slant: rng.gen_range(-0.15..0.15),
            thickness: rng.gen_range(0.02..0.05),
            strokes,
        }
    }

    /// A small variation around this style, as another picture of the same
    /// writer would be.
    pub fn perturbed<R: Rng + ?Sized>(&self, amount: f64, rng: &mut R) -> Self {
        let mut s = self.clone();
        let mut j = || rng.gen_range(-amount..amount);
        s.shift.0 += j();
        s.shift.1 += j();
        s.slant += j();
        for st in &mut s.strokes {
            for p in [&mut st.from, &mut st.to] {
                p.0 += j();
                p.1 += j();
            }
        }
        s
    }
}

/// Anti-aliased rendering of a glyph into a `size × size` image in `[0,1]`,
/// plus Gaussian pixel noise of standard deviation `noise`.
pub fn render_glyph<R: Rng + ?Sized>(style: &GlyphStyle, size: usize, noise: f64, rng: &mut R) -> Vec<f64> {
    let place = |(x, y): (f64, f64)| {
        let (cx, cy) = ((x - 0.5) * style.scale, (y - 0.5) * style.scale);
        (0.5 + cx - style.slant * cy + style.shift.0, 0.5 + cy + style.shift.1)
    };
    let strokes: Vec<(Stroke, (f64, f64), (f64, f64))> = style
        .strokes
        .iter()
        .map(|s| (*s, place(s.from), place(s.to)))
        .collect();
    let soft = 0.75 / size as f64;
    let mut img = Vec::with_capacity(size * size);
    for py in 0..size {
        for px in 0..size {
            let p = ((px as f64 + 0.5) / size as f64, (py as f64 + 0.5) / size as f64);
            let ink = strokes
                .iter()
                .map(|(s, a, b)| {
                    let dist = point_segment_distance(p, *a, *b);
                    (1.0 - (dist - style.thickness) / soft).clamp(0.0, 1.0) * s.weight
                })
                .fold(0.0, f64::max);
            let n = if noise > 0.0 {
                noise * rng.sample::<f64, _>(StandardNormal)
            } else {
                0.0
            };
            img.push((ink + n).clamp(0.0, 1.0));
        }
    }
    img
}

fn point_segment_distance(p: (f64, f64), a: (f64, f64), b: (f64, f64)) -> f64 {
    let (dx, dy) = (b.0 - a.0, b.1 - a.1);
    let len2 = dx * dx + dy * dy;
    let t = if len2 > 0.0 {
        (((p.0 - a.0) * dx + (p.1 - a.1) * dy) / len2).clamp(0.0, 1.0)
    } else {
        0.0
    };
    let (qx, qy) = (a.0 + t * dx, a.1 + t * dy);
    ((p.0 - qx).powi(2) + (p.1 - qy).powi(2)).sqrt()
}

/// Pixel noise added to every synthetic digit.
pub const DIGIT_NOISE: f64 = 0.05;

/// `count` random glyphs of the ten digit classes, each flattened row-major
/// into `glyph_size²` features.
pub fn synth_digits(count: usize, glyph_size: usize, seed: u64) -> Result<Dataset> {
    if glyph_size < 6 {
        return Err(Error::InvalidArgument("glyph_size must be at least 6".into()));
    }
    let mut rng = seed::rng_for(seed, "synth/digits", 0);
    let mut rows = Vec::with_capacity(count);
    let mut classes = Vec::with_capacity(count);
    for _ in 0..count {
        let class = rng.gen_range(0..10u8);
        let style = GlyphStyle::random(class, &mut rng);
        rows.push(render_glyph(&style, glyph_size, DIGIT_NOISE, &mut rng));
        classes.push(class);
    }
    Dataset::new(rows)?.with_classes(classes)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numcore::l2_distance;

    #[test]
    fn single_component_without_spread_is_constant() {
        let ds = synth_gaussian_mixture(1, 5, 3, 0.0, 1).unwrap();
        assert!(ds.rows().windows(2).all(|w| w[0] == w[1]));
    }

    #[test]
    fn mixture_is_reproducible_and_normalised() {
        let a = synth_gaussian_mixture(3, 20, 4, 0.1, 5).unwrap();
        let b = synth_gaussian_mixture(3, 20, 4, 0.1, 5).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, synth_gaussian_mixture(3, 20, 4, 0.1, 6).unwrap());
        assert!(a.rows().iter().flatten().all(|v| (0.0..=1.0).contains(v)));
        assert_eq!(a.contributors().unwrap()[25], 1);
    }

    #[test]
    fn digits_shape_and_range() {
        let ds = synth_digits(30, 8, 3).unwrap();
        assert_eq!(ds.len(), 30);
        assert!(ds.rows().iter().all(|r| r.len() == 64));
        assert!(ds.rows().iter().flatten().all(|v| (0.0..=1.0).contains(v)));
        assert!(synth_digits(3, 5, 0).is_err());
    }

    #[test]
    fn different_seeds_different_pixels() {
        let sum = |s| -> f64 { synth_digits(10, 8, s).unwrap().rows().iter().flatten().sum() };
        assert_ne!(sum(1), sum(2));
    }

    #[test]
    fn class_means_are_distinct() {
        let ds = synth_digits(2000, 8, 11).unwrap();
        let classes = ds.classes().unwrap();
        let mut means = vec![vec![0.0; 64]; 10];
        let mut counts = [0usize; 10];
        for (row, &c) in ds.rows().iter().zip(classes) {
            counts[c as usize] += 1;
            for (m, v) in means[c as usize].iter_mut().zip(row) {
                *m += v;
            }
        }
        for (m, &n) in means.iter_mut().zip(&counts) {
            m.iter_mut().for_each(|v| *v /= n as f64);
        }
        let mut min_gap = f64::INFINITY;
        for a in 0..10 {
            for b in a + 1..10 {
                min_gap = min_gap.min(l2_distance(&means[a], &means[b]).unwrap());
            }
        }
        assert!(min_gap > 0.5, "closest class means only {min_gap} apart");
    }
}
