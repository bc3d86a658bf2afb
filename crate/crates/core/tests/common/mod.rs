//! Helpers shared by integration test targets.
#![allow(dead_code)]

use priorforge::EmbeddingSet;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Metrics computed directly from the ball definitions with Euclidean
/// distances and a full sort for the k-th neighbour.
#[derive(Debug, PartialEq)]
pub struct OracleMetrics {
    pub precision: f64,
    pub recall: f64,
    pub density: f64,
    pub coverage: f64,
}

fn dist(a: &[f32], b: &[f32]) -> f64 {
    let mut s = 0.0f64;
    for i in 0..a.len() {
        let d = a[i] as f64 - b[i] as f64;
        s += d * d;
    }
    s.sqrt()
}

fn radii(points: &[Vec<f32>], k: usize) -> Vec<f64> {
    let mut out = Vec::new();
    for i in 0..points.len() {
        let mut d: Vec<f64> = Vec::new();
        for j in 0..points.len() {
            if i != j {
                d.push(dist(&points[i], &points[j]));
            }
        }
        d.sort_by(|a, b| a.partial_cmp(b).unwrap());
        out.push(d[k - 1]);
    }
    out
}

pub fn oracle_metrics(real: &[Vec<f32>], fake: &[Vec<f32>], k: usize) -> OracleMetrics {
    let rr = radii(real, k);
    let fr = radii(fake, k);
    let in_ball = |p: &[f32], center: &[f32], r: f64| dist(p, center) <= r;

    let mut precise = 0;
    let mut density_hits = 0;
    for f in fake {
        let mut hits = 0;
        for (i, r) in real.iter().enumerate() {
            if in_ball(f, r, rr[i]) {
                hits += 1;
            }
        }
        if hits > 0 {
            precise += 1;
        }
        density_hits += hits;
    }

    let mut recalled = 0;
    let mut covered = 0;
    for (i, r) in real.iter().enumerate() {
        if fake.iter().enumerate().any(|(j, f)| in_ball(r, f, fr[j])) {
            recalled += 1;
        }
        if fake.iter().any(|f| in_ball(f, r, rr[i])) {
            covered += 1;
        }
    }

    OracleMetrics {
        precision: precise as f64 / fake.len() as f64,
        recall: recalled as f64 / real.len() as f64,
        density: density_hits as f64 / (k as f64 * fake.len() as f64),
        coverage: covered as f64 / real.len() as f64,
    }
}

pub fn to_set(rows: &[Vec<f32>]) -> EmbeddingSet {
    EmbeddingSet::from_rows(rows).unwrap()
}

/// Random points; `grid` snaps coordinates to small integers so ties and duplicates occur.
pub fn random_points(rng: &mut ChaCha8Rng, n: usize, dim: usize, grid: bool) -> Vec<Vec<f32>> {
    (0..n)
        .map(|_| {
            (0..dim)
                .map(|_| {
                    if grid {
                        rng.random_range(0..6) as f32
                    } else {
                        rng.random_range(-3.0f32..3.0)
                    }
                })
                .collect()
        })
        .collect()
}

pub fn gaussian_points(rng: &mut ChaCha8Rng, n: usize, dim: usize) -> Vec<Vec<f32>> {
    use rand_distr::StandardNormal;
    (0..n)
        .map(|_| (0..dim).map(|_| rng.sample::<f64, _>(StandardNormal) as f32).collect())
        .collect()
}

pub fn seeded(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
