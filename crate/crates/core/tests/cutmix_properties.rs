use priorforge::cutmix::{PriorSource, SlotKind};
use priorforge::{
    cutmix, derive_stream, diverging_value, refine_mask, sample_pair, MaskRefineConfig, PriorImage, RngStream,
    SemanticMask,
};
use proptest::prelude::*;

#[test]
fn filter_contracts_toward_binary_on_grid() {
    for i in 1..1000 {
        let m = i as f32 * 1e-3;
        let f = diverging_value(m).unwrap();
        assert!((0.0..=1.0).contains(&f));
        if m < 0.5 {
            assert!(f < m, "f({m}) = {f}");
        } else if m > 0.5 {
            assert!(f > m, "f({m}) = {f}");
        }
    }
}

#[test]
fn converged_masks_are_mostly_binary() {
    // Frozen from 1000 seeds: per-run fraction min 0.70, mean 0.826.
    let cfg = MaskRefineConfig::default();
    let mut total = 0.0;
    for seed in 0..1000 {
        let out = refine_mask(&mut derive_stream(seed, 0), 32, 32, &cfg).unwrap();
        assert!(out.converged);
        let frac = out.mask.data().iter().filter(|&&v| !(0.1..=0.9).contains(&v)).count() as f64 / 1024.0;
        assert!(frac > 0.65, "seed {seed}: {frac}");
        total += frac;
    }
    assert!(total / 1000.0 > 0.80);
}

#[test]
fn late_updates_are_mostly_non_increasing() {
    // Frozen from 1000 seeds: 88.0% non-increasing from the fifth update on.
    let cfg = MaskRefineConfig::default();
    let monotone = (0..1000)
        .filter(|&seed| {
            let out = refine_mask(&mut derive_stream(seed, 0), 32, 32, &cfg).unwrap();
            out.updates.len() <= 4 || out.updates[4..].windows(2).all(|w| w[1] <= w[0])
        })
        .count();
    assert!(monotone >= 850, "{monotone} of 1000");
}

#[test]
fn iteration_cap_is_reported() {
    let cfg = MaskRefineConfig {
        max_iters: 2,
        ..MaskRefineConfig::default()
    };
    let out = refine_mask(&mut derive_stream(1, 0), 32, 32, &cfg).unwrap();
    assert_eq!(out.iterations, 2);
    assert!(!out.converged);
    assert_eq!(out.updates.len(), 2);
}

struct Noise;

impl PriorSource for Noise {
    fn channels(&self) -> usize {
        3
    }
    fn height(&self) -> usize {
        8
    }
    fn width(&self) -> usize {
        8
    }
    fn draw(&self, rng: &mut RngStream) -> priorforge::Result<PriorImage> {
        PriorImage::new(3, 8, 8, (0..192).map(|_| rng.uniform_f32()).collect())
    }
}

#[test]
fn monochrome_frequency_matches_probability() {
    let mut rng = derive_stream(77, 0);
    let draws = 10_000;
    let (mut first, mut second) = (0, 0);
    for _ in 0..draws {
        let ((a, ka), (b, kb)) = sample_pair(&mut rng, &Noise, 0.25).unwrap();
        first += (ka == SlotKind::Monochrome) as u32;
        second += (kb == SlotKind::Monochrome) as u32;
        assert_ne!(a, b);
    }
    for count in [first, second] {
        let freq = count as f64 / draws as f64;
        assert!((freq - 0.25).abs() <= 0.02, "{freq}");
    }
}

#[test]
fn monochrome_slots_are_flat() {
    let mut rng = derive_stream(3, 0);
    let ((a, _), (b, _)) = sample_pair(&mut rng, &Noise, 1.0).unwrap();
    for img in [&a, &b] {
        for c in 0..3 {
            assert!(img.plane(c).iter().all(|&v| v == img.plane(c)[0]));
        }
    }
}

proptest! {
    #[test]
    fn cutmix_is_between_operands(
        a in prop::collection::vec(0.0f32..=1.0, 2 * 9),
        b in prop::collection::vec(0.0f32..=1.0, 2 * 9),
        m in prop::collection::vec(0.0f32..=1.0, 9),
    ) {
        let a = PriorImage::new(2, 3, 3, a).unwrap();
        let b = PriorImage::new(2, 3, 3, b).unwrap();
        let mask = SemanticMask::new(3, 3, m).unwrap();
        let out = cutmix(&a, &b, &mask).unwrap();
        for ((&o, &x), &y) in out.data().iter().zip(a.data()).zip(b.data()) {
            prop_assert!(o >= x.min(y) && o <= x.max(y));
        }
    }
}
