#![allow(dead_code)]

use std::sync::{Mutex, MutexGuard};

use dwb::distributions::{discretize_truncated_gaussian, DiscreteDistribution, SupportGrid};
use dwb::CostKernel;
use rand::Rng;

static SERIAL: Mutex<()> = Mutex::new(());

/// Keeps timed tests from sharing the CPU with each other.
pub fn serial() -> MutexGuard<'static, ()> {
    SERIAL.lock().unwrap_or_else(|e| e.into_inner())
}

pub fn report(id: u32, pass: bool, detail: impl AsRef<str>) {
    println!(
        "criterion {id:>2}: {} {}",
        if pass { "PASS" } else { "FAIL" },
        detail.as_ref()
    );
}

/// Masses drawn uniformly from `[0.05, 1)` and normalized, so every entry is positive.
pub fn random_distribution<R: Rng>(rng: &mut R, n: usize) -> DiscreteDistribution {
    DiscreteDistribution::from_masses((0..n).map(|_| rng.random_range(0.05..1.0)).collect()).unwrap()
}

pub fn line_kernel(n: usize, lo: f64, hi: f64, gamma: f64) -> (SupportGrid, CostKernel) {
    let grid = SupportGrid::linspace(lo, hi, n).unwrap();
    let kernel = CostKernel::for_grid(&grid, gamma, false).unwrap();
    (grid, kernel)
}

pub fn gaussians<R: Rng>(rng: &mut R, grid: &SupportGrid, m: usize) -> Vec<DiscreteDistribution> {
    (0..m)
        .map(|_| {
            let mu = rng.random_range(-1.0..1.0);
            let sigma = rng.random_range(0.2..1.0);
            discretize_truncated_gaussian(mu, sigma, grid).unwrap()
        })
        .collect()
}

/// Least-squares slope of `ys` against `xs`.
pub fn slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    sxy / sxx
}
