//! Precision, recall, density and coverage between a real and a generated
//! embedding set, using k-nearest-neighbour balls.
//!
//! Every point gets a closed ball whose radius is the distance to its k-th
//! nearest neighbour in its own set. Distances are exact brute force in
//! double precision; membership compares squared distances against squared
//! radii.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::embedding::EmbeddingSet;
use crate::error::{Error, Result};

pub const DEFAULT_K: usize = 5;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub precision: f64,
    pub recall: f64,
    pub density: f64,
    pub coverage: f64,
    pub k: usize,
    pub real_count: usize,
    pub fake_count: usize,
}

#[inline]
fn sq_dist(a: &[f32], b: &[f32]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(&x, &y)| {
            let d = x as f64 - y as f64;
            d * d
        })
        .sum()
}

fn check_k(set: &EmbeddingSet, k: usize, which: &str) -> Result<()> {
    if k == 0 {
        return Err(Error::invalid("k must be at least 1"));
    }
    if k >= set.len() {
        return Err(Error::invalid(format!(
            "{which} set has {} points; k = {k} needs at least {}",
            set.len(),
            k + 1
        )));
    }
    Ok(())
}

/// Squared distance from each point to its k-th nearest other point.
fn knn_radii_sq(set: &EmbeddingSet, k: usize) -> Vec<f64> {
    (0..set.len())
        .into_par_iter()
        .map_init(Vec::new, |dists, i| {
            let p = set.row(i);
            dists.clear();
            dists.extend(
                set.rows()
                    .enumerate()
                    .filter(|&(j, _)| j != i)
                    .map(|(_, q)| sq_dist(p, q)),
            );
            let (_, kth, _) = dists.select_nth_unstable_by(k - 1, f64::total_cmp);
            *kth
        })
        .collect()
}

/// Distance from each point to its k-th nearest neighbour, excluding itself.
pub fn knn_radius(set: &EmbeddingSet, k: usize) -> Result<Vec<f64>> {
    check_k(set, k, "embedding")?;
    Ok(knn_radii_sq(set, k).into_iter().map(f64::sqrt).collect())
}

pub fn compute_metrics(real: &EmbeddingSet, fake: &EmbeddingSet, k: usize) -> Result<MetricsReport> {
    if real.dim() != fake.dim() {
        return Err(Error::invalid(format!(
            "dimension mismatch: real {} vs fake {}",
            real.dim(),
            fake.dim()
        )));
    }
    check_k(real, k, "real")?;
    check_k(fake, k, "fake")?;

    let real_r2 = knn_radii_sq(real, k);
    let fake_r2 = knn_radii_sq(fake, k);

    // Per fake point: how many real balls contain it.
    let containing: Vec<usize> = (0..fake.len())
        .into_par_iter()
        .map(|j| {
            let f = fake.row(j);
            real.rows()
                .zip(&real_r2)
                .filter(|&(r, &r2)| sq_dist(f, r) <= r2)
                .count()
        })
        .collect();

    // Per real point: (its ball holds a fake point, it lies in some fake ball).
    let real_side: Vec<(bool, bool)> = (0..real.len())
        .into_par_iter()
        .map(|i| {
            let r = real.row(i);
            let mut covered = false;
            let mut recalled = false;
            for (f, &f2) in fake.rows().zip(&fake_r2) {
                let d2 = sq_dist(r, f);
                covered |= d2 <= real_r2[i];
                recalled |= d2 <= f2;
                if covered && recalled {
                    break;
                }
            }
            (covered, recalled)
        })
        .collect();

    let n_fake = fake.len() as f64;
    let n_real = real.len() as f64;
    Ok(MetricsReport {
        precision: containing.iter().filter(|&&c| c > 0).count() as f64 / n_fake,
        recall: real_side.iter().filter(|s| s.1).count() as f64 / n_real,
        density: containing.iter().sum::<usize>() as f64 / (k as f64 * n_fake),
        coverage: real_side.iter().filter(|s| s.0).count() as f64 / n_real,
        k,
        real_count: real.len(),
        fake_count: fake.len(),
    })
}
