//! Acceptance suite: one PASS/FAIL line per criterion, non-zero exit on any failure.

mod common;

use std::fs;
use std::path::Path;
use std::process::ExitCode;
use std::time::Instant;

use common::{oracle_metrics, random_points, seeded, to_set};
use priorforge::pipeline::shard_name;
use priorforge::{
    compute_dmax, compute_metrics, derive_stream, diverging_value, refine_mask, synthesize_dataset_with_workers,
    MaskRefineConfig, OutputFormat, ScalePlan, SynthesisConfig, UpscaleMode,
};
use rand::Rng;

type Outcome = Result<String, String>;

fn check(cond: bool, msg: String) -> Outcome {
    if cond {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn diverging_filter() -> Outcome {
    let f = |m: f32| diverging_value(m).map_err(|e| e.to_string());
    for (m, want) in [(0.0, 0.0), (0.5, 0.5), (1.0, 1.0)] {
        if f(m)? != want {
            return Err(format!("f({m}) = {}", f(m)?));
        }
    }
    // h = 2^-12 keeps every f32 operation exact, so only truncation error (2h) remains.
    let h = 1.0f32 / 4096.0;
    let left = (f(0.5)? - f(0.5 - h)?) / h;
    let right = (f(0.5 + h)? - f(0.5)?) / h;
    if (left - 2.0).abs() > 1e-3 || (right - 2.0).abs() > 1e-3 {
        return Err(format!("one-sided derivatives {left}, {right}"));
    }
    for i in 1..1000 {
        let m = i as f32 * 1e-3;
        let v = f(m)?;
        let ok = if m < 0.5 {
            v < m
        } else if m > 0.5 {
            v > m
        } else {
            true
        };
        if !ok {
            return Err(format!("f({m}) = {v}"));
        }
    }
    Ok(format!("fixed points exact, derivatives {left:.6} / {right:.6}, 999 grid points contract"))
}

fn mask_convergence() -> Outcome {
    let cfg = MaskRefineConfig::default_for_side(32);
    let started = Instant::now();
    let mut iters = Vec::with_capacity(1000);
    let mut converged = 0;
    for seed in 0..1000 {
        let out = refine_mask(&mut derive_stream(seed, 0), 32, 32, &cfg).map_err(|e| e.to_string())?;
        converged += out.converged as u32;
        iters.push(out.iterations);
    }
    let secs = started.elapsed().as_secs_f64();
    iters.sort_unstable();
    let median = (iters[499] + iters[500]) as f64 / 2.0;
    check(
        converged == 1000 && iters[999] <= 50 && (5.0..=20.0).contains(&median) && secs < 30.0,
        format!(
            "{converged}/1000 converged, iterations min {} median {median} max {}, {secs:.2}s",
            iters[0], iters[999]
        ),
    )
}

fn dmax_table() -> Outcome {
    let mut got = Vec::new();
    for ((h, w), want) in [((32, 32), 5), ((28, 28), 5), ((64, 64), 6), ((224, 224), 8)] {
        let d = compute_dmax(h, w).map_err(|e| e.to_string())?;
        if d != want {
            return Err(format!("({h},{w}) -> {d}, expected {want}"));
        }
        got.push(format!("({h},{w})->{d}"));
    }
    let plan = ScalePlan::for_target(32, 32, UpscaleMode::Nearest).map_err(|e| e.to_string())?;
    let scales = plan.scales();
    check(
        scales == [1, 2, 4, 8, 16, 32],
        format!("{}, scales at 32: {scales:?}", got.join(" ")),
    )
}

fn shards(dir: &Path, n: usize) -> Vec<Vec<u8>> {
    (0..n as u64)
        .map(|s| fs::read(dir.join(shard_name(s, OutputFormat::F32bin))).unwrap())
        .collect()
}

fn determinism() -> Outcome {
    let cfg = SynthesisConfig {
        count: 1000,
        shard_size: 300,
        master_seed: 2024,
        ..SynthesisConfig::new(3, 32, 32)
    };
    let dirs: Vec<_> = (0..3).map(|_| tempfile::tempdir().unwrap()).collect();
    let run = |dir: &Path, workers| synthesize_dataset_with_workers(&cfg, dir, workers).map_err(|e| e.to_string());
    run(dirs[0].path(), 4)?;
    run(dirs[1].path(), 4)?;
    run(dirs[2].path(), 1)?;
    let a = shards(dirs[0].path(), 4);
    let rerun = a == shards(dirs[1].path(), 4);
    let workers = {
        let b = tempfile::tempdir().unwrap();
        run(b.path(), 8)?;
        shards(dirs[2].path(), 4) == shards(b.path(), 4)
    };
    check(
        rerun && workers,
        format!("rerun identical: {rerun}, 1 vs 8 workers identical: {workers} (1000 images, 4 shards)"),
    )
}

fn metrics_oracle() -> Outcome {
    let started = Instant::now();
    let mut rng = seeded(11);
    for case in 0..50 {
        let dim = rng.random_range(1..=4);
        let k = rng.random_range(1..=3);
        let (n_real, n_fake) = (rng.random_range(k + 1..=64), rng.random_range(k + 1..=64));
        let real = random_points(&mut rng, n_real, dim, case % 2 == 0);
        let fake = random_points(&mut rng, n_fake, dim, case % 2 == 0);
        let got = compute_metrics(&to_set(&real), &to_set(&fake), k).map_err(|e| e.to_string())?;
        let want = oracle_metrics(&real, &fake, k);
        if (got.precision, got.recall, got.density, got.coverage)
            != (want.precision, want.recall, want.density, want.coverage)
        {
            return Err(format!("case {case}: {got:?} vs {want:?}"));
        }
    }

    let pts = random_points(&mut rng, 64, 4, false);
    for k in 1..=3 {
        let m = compute_metrics(&to_set(&pts), &to_set(&pts), k).map_err(|e| e.to_string())?;
        let density = (k + 1) as f64 / k as f64;
        if (m.precision, m.recall, m.coverage) != (1.0, 1.0, 1.0) || (m.density - density).abs() > 1e-9 {
            return Err(format!("identical sets, k = {k}: {m:?}"));
        }
    }

    let a = random_points(&mut rng, 40, 3, false);
    let b: Vec<Vec<f32>> = random_points(&mut rng, 40, 3, false)
        .into_iter()
        .map(|p| p.into_iter().map(|v| v + 1e6).collect())
        .collect();
    let m = compute_metrics(&to_set(&a), &to_set(&b), 3).map_err(|e| e.to_string())?;
    if (m.precision, m.recall, m.density, m.coverage) != (0.0, 0.0, 0.0, 0.0) {
        return Err(format!("disjoint clusters: {m:?}"));
    }
    let secs = started.elapsed().as_secs_f64();
    check(
        secs < 10.0,
        format!("50/50 instances exact, identical and disjoint cases hold, {secs:.3}s"),
    )
}

fn throughput() -> Outcome {
    let cfg = SynthesisConfig {
        count: 10_000,
        master_seed: 7,
        ..SynthesisConfig::new(3, 32, 32)
    };
    let dir = tempfile::tempdir().unwrap();
    let started = Instant::now();
    let manifest = synthesize_dataset_with_workers(&cfg, dir.path(), 1).map_err(|e| e.to_string())?;
    let secs = started.elapsed().as_secs_f64();
    check(
        manifest.total_count == 10_000 && secs < 60.0,
        format!("10000 images at 3x32x32 on 1 worker in {secs:.2}s"),
    )
}

fn main() -> ExitCode {
    let criteria: [(&str, fn() -> Outcome); 6] = [
        ("diverging filter contract", diverging_filter),
        ("mask convergence", mask_convergence),
        ("d_max table", dmax_table),
        ("determinism", determinism),
        ("metrics oracle", metrics_oracle),
        ("throughput floor", throughput),
    ];
    let mut failed = 0;
    for (name, run) in criteria {
        match run() {
            Ok(detail) => println!("PASS  {name}: {detail}"),
            Err(detail) => {
                failed += 1;
                println!("FAIL  {name}: {detail}");
            }
        }
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
