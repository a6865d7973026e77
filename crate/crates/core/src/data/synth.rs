//! Synthetic sample generators for the three desk-scale domains.

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::data::{
    largest_remainder_counts, AttributeSpec, DomainTag, LabeledDataset, PropertyDistribution,
};
use crate::error::{CoreError, Result};
use crate::seeds::rng_from;

/// Standard deviation of each mixture blob.
pub const MIXTURE2D_SIGMA: f64 = 0.15;
/// Radius of the circle the blob centers sit on.
pub const MIXTURE2D_RADIUS: f64 = 0.6;
/// Per-pixel flip probability of the glyph domain.
pub const DIGITLIKE_FLIP_PROB: f64 = 0.05;
/// Category counts of the one-hot tabular fields.
pub const TABULAR_FIELDS: [usize; 4] = [3, 4, 2, 5];

/// Optional perturbation of a domain, used to train a property classifier on
/// a slightly different distribution than the one the generators saw.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DomainShift {
    /// Rotation of the mixture blob centers, radians. Also skews the
    /// tabular peak weights and the glyph flip probability proportionally.
    pub amount: f64,
}

impl DomainShift {
    pub fn none() -> Self {
        Self { amount: 0.0 }
    }
}

/// Center of a mixture2d blob for one attribute class.
pub fn mixture2d_center(class: usize, n_classes: usize, shift: f64) -> [f64; 2] {
    let angle = 2.0 * std::f64::consts::PI * class as f64 / n_classes as f64 + shift;
    [MIXTURE2D_RADIUS * angle.cos(), MIXTURE2D_RADIUS * angle.sin()]
}

const DIGIT_GLYPHS: [[&str; 8]; 10] = [
    [
        "..####..", ".#....#.", "#......#", "#......#", "#......#", "#......#", ".#....#.",
        "..####..",
    ],
    [
        "...#....", "..##....", ".###....", "...#....", "...#....", "...#....", "...#....",
        ".######.",
    ],
    [
        ".#####..", "#.....#.", "......#.", ".....#..", "...##...", "..#.....", ".#......",
        "#######.",
    ],
    [
        ".#####..", "......#.", "......#.", "..####..", "......#.", "......#.", ".....#..",
        "#####...",
    ],
    [
        "....##..", "...#.#..", "..#..#..", ".#...#..", "#....#..", "#######.", ".....#..",
        ".....#..",
    ],
    [
        "#######.", "#.......", "#.......", "######..", "......#.", "......#.", "......#.",
        "######..",
    ],
    [
        "...###..", "..#.....", ".#......", "#.####..", "##....#.", "#......#", ".#....#.",
        "..####..",
    ],
    [
        "#######.", "......#.", ".....#..", "....#...", "...#....", "..#.....", "..#.....",
        "..#.....",
    ],
    [
        "..###...", ".#...#..", ".#...#..", "..###...", ".#...#..", "#.....#.", "#.....#.",
        ".#####..",
    ],
    [
        "..####..", ".#....#.", "#......#", ".#.....#", "..######", ".......#", "......#.",
        "..####..",
    ],
];

/// Flattened +/-1 template for one glyph class.
pub fn digit_template(class: usize) -> Vec<f64> {
    let glyph = &DIGIT_GLYPHS[class];
    let mut out = Vec::with_capacity(64);
    for row in glyph {
        for ch in row.chars() {
            out.push(if ch == '#' { 1.0 } else { -1.0 });
        }
    }
    out
}

fn sample_mixture2d(class: usize, n_classes: usize, shift: f64, rng: &mut impl Rng) -> Vec<f64> {
    let center = mixture2d_center(class, n_classes, shift);
    let normal = Normal::new(0.0, MIXTURE2D_SIGMA).unwrap();
    center
        .iter()
        .map(|c| (c + normal.sample(rng)).clamp(-1.0, 1.0))
        .collect()
}

fn sample_digitlike(class: usize, flip_prob: f64, rng: &mut impl Rng) -> Vec<f64> {
    let mut v = digit_template(class);
    for px in v.iter_mut() {
        if rng.gen_bool(flip_prob) {
            *px = -*px;
        }
    }
    v
}

fn sample_tabular(class: usize, skew: f64, rng: &mut impl Rng) -> Vec<f64> {
    let mut out = Vec::with_capacity(TABULAR_FIELDS.iter().sum());
    for (f, &n_cat) in TABULAR_FIELDS.iter().enumerate() {
        let peak = (class + f) % n_cat;
        let peak_prob = (0.6 + skew).clamp(1.0 / n_cat as f64, 0.95);
        let rest = (1.0 - peak_prob) / (n_cat - 1) as f64;
        let roll: f64 = rng.gen();
        let mut acc = 0.0;
        let mut chosen = n_cat - 1;
        for cat in 0..n_cat {
            acc += if cat == peak { peak_prob } else { rest };
            if roll < acc {
                chosen = cat;
                break;
            }
        }
        for cat in 0..n_cat {
            out.push(if cat == chosen { 1.0 } else { 0.0 });
        }
    }
    out
}

/// Synthesize `n` labeled samples whose class counts realize `property`
/// through largest-remainder rounding.
pub fn synth_domain(
    domain: DomainTag,
    n: usize,
    attribute: &AttributeSpec,
    property: &PropertyDistribution,
    seed: u64,
) -> Result<LabeledDataset> {
    synth_domain_shifted(domain, n, attribute, property, seed, DomainShift::none())
}

/// [`synth_domain`] on a perturbed variant of the domain.
pub fn synth_domain_shifted(
    domain: DomainTag,
    n: usize,
    attribute: &AttributeSpec,
    property: &PropertyDistribution,
    seed: u64,
    shift: DomainShift,
) -> Result<LabeledDataset> {
    if property.n_classes() != attribute.n_classes {
        return Err(CoreError::ShapeMismatch {
            context: "synth property length".into(),
            expected: attribute.n_classes,
            found: property.n_classes(),
        });
    }
    if n < attribute.n_classes {
        return Err(CoreError::InvalidConfig(format!(
            "need at least one sample per class: n={n} < {}",
            attribute.n_classes
        )));
    }
    if domain == DomainTag::Digitlike && attribute.n_classes > 10 {
        return Err(CoreError::InvalidConfig(
            "digitlike supports at most 10 classes".into(),
        ));
    }

    let counts = largest_remainder_counts(property.probs(), n);
    let mut rng = rng_from(seed);
    let mut samples = Vec::with_capacity(n);
    let mut labels = Vec::with_capacity(n);
    for (class, &count) in counts.iter().enumerate() {
        for _ in 0..count {
            let s = match domain {
                DomainTag::Mixture2d => {
                    sample_mixture2d(class, attribute.n_classes, shift.amount, &mut rng)
                }
                DomainTag::Digitlike => sample_digitlike(
                    class,
                    (DIGITLIKE_FLIP_PROB + shift.amount.abs() * 0.1).min(0.45),
                    &mut rng,
                ),
                DomainTag::TabularOnehot => sample_tabular(class, shift.amount, &mut rng),
            };
            samples.push(s);
            labels.push(class);
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng);
    let samples = order.iter().map(|&i| std::mem::take(&mut samples[i])).collect();
    let labels = order.iter().map(|&i| labels[i]).collect();

    Ok(LabeledDataset {
        samples,
        labels,
        domain,
        attribute: attribute.clone(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn binary_rounding_exact_case() {
        let attr = AttributeSpec::binary();
        let p = PropertyDistribution::binary(0.3).unwrap();
        let ds = synth_domain(DomainTag::Mixture2d, 10, &attr, &p, 0).unwrap();
        assert_eq!(ds.class_counts(), vec![7, 3]);
    }

    #[test]
    fn uniform_ten_class_case() {
        let attr = AttributeSpec::new(10).unwrap();
        let p = PropertyDistribution::uniform(10).unwrap();
        let ds = synth_domain(DomainTag::Digitlike, 10, &attr, &p, 0).unwrap();
        let mut counts = ds.class_counts();
        counts.sort_unstable();
        assert_eq!(counts, vec![1; 10]);
    }

    #[test]
    fn mixture_class_means_obey_law_of_large_numbers() {
        // Sample mean of class-1 points within 3 sigma / sqrt(n) of its
        // configured blob center.
        let attr = AttributeSpec::binary();
        let p = PropertyDistribution::binary(0.7).unwrap();
        let n = 10_000;
        let ds = synth_domain(DomainTag::Mixture2d, n, &attr, &p, 17).unwrap();
        let ones: Vec<&Vec<f64>> = ds
            .samples
            .iter()
            .zip(&ds.labels)
            .filter(|(_, &l)| l == 1)
            .map(|(s, _)| s)
            .collect();
        let n1 = ones.len() as f64;
        assert_eq!(ones.len(), 7000);
        let mean: Vec<f64> = (0..2)
            .map(|d| ones.iter().map(|s| s[d]).sum::<f64>() / n1)
            .collect();
        let center = mixture2d_center(1, 2, 0.0);
        let tol = 3.0 * MIXTURE2D_SIGMA / n1.sqrt();
        for d in 0..2 {
            assert!(
                (mean[d] - center[d]).abs() < tol,
                "dim {d}: mean {} vs center {} (tol {tol})",
                mean[d],
                center[d]
            );
        }
    }

    #[test]
    fn all_domains_stay_in_unit_box() {
        let attr = AttributeSpec::binary();
        let p = PropertyDistribution::binary(0.5).unwrap();
        for domain in [
            DomainTag::Mixture2d,
            DomainTag::Digitlike,
            DomainTag::TabularOnehot,
        ] {
            let ds = synth_domain(domain, 200, &attr, &p, 3).unwrap();
            for s in &ds.samples {
                assert!(s.iter().all(|v| (-1.0..=1.0).contains(v)), "{domain}");
            }
        }
    }

    #[test]
    fn expected_dimensions_per_domain() {
        let attr = AttributeSpec::binary();
        let p = PropertyDistribution::binary(0.5).unwrap();
        let m = synth_domain(DomainTag::Mixture2d, 4, &attr, &p, 0).unwrap();
        assert_eq!(m.dim(), 2);
        let d = synth_domain(DomainTag::Digitlike, 4, &attr, &p, 0).unwrap();
        assert_eq!(d.dim(), 64);
        let t = synth_domain(DomainTag::TabularOnehot, 4, &attr, &p, 0).unwrap();
        assert_eq!(t.dim(), TABULAR_FIELDS.iter().sum::<usize>());
    }

    #[test]
    fn synth_is_deterministic_in_seed() {
        let attr = AttributeSpec::binary();
        let p = PropertyDistribution::binary(0.4).unwrap();
        let a = synth_domain(DomainTag::Mixture2d, 50, &attr, &p, 12).unwrap();
        let b = synth_domain(DomainTag::Mixture2d, 50, &attr, &p, 12).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn rejects_property_length_mismatch() {
        let attr = AttributeSpec::binary();
        let p = PropertyDistribution::uniform(3).unwrap();
        assert!(synth_domain(DomainTag::Mixture2d, 10, &attr, &p, 0).is_err());
    }

    #[test]
    fn glyph_templates_are_distinct() {
        for a in 0..10 {
            for b in (a + 1)..10 {
                let ta = digit_template(a);
                let tb = digit_template(b);
                let differing = ta.iter().zip(&tb).filter(|(x, y)| x != y).count();
                assert!(differing >= 8, "glyphs {a} and {b} differ in {differing} px");
            }
        }
    }
}
