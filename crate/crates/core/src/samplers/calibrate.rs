use crate::error::{Error, Result};

/// `points` sweep counts spaced evenly in log scale from `lo` to `hi`,
/// rounded and de-duplicated.
pub fn log_sweep_grid(lo: u64, hi: u64, points: usize) -> Vec<u64> {
    if points <= 1 || hi <= lo {
        return vec![lo.max(1)];
    }
    let (a, b) = ((lo.max(1) as f64).ln(), (hi as f64).ln());
    let mut grid: Vec<u64> = (0..points)
        .map(|k| (a + (b - a) * k as f64 / (points - 1) as f64).exp().round() as u64)
        .collect();
    grid.dedup();
    grid
}

/// Sweep grid from 2500 to 10^7 sweeps.
pub fn default_sweep_grid() -> Vec<u64> {
    log_sweep_grid(2500, 10_000_000, 13)
}

/// Grid value whose estimated effective inverse temperature is closest to
/// `target_beta`. `estimate` runs the sampler with the given sweep count and
/// returns the fitted temperature. Ties go to the smaller sweep count.
pub fn select_sweeps_matching_beta<F>(grid: &[u64], target_beta: f64, mut estimate: F) -> Result<u64>
where
    F: FnMut(u64) -> Result<f64>,
{
    let mut sorted = grid.to_vec();
    sorted.sort_unstable();
    sorted.dedup();
    let mut best: Option<(f64, u64)> = None;
    for sweeps in sorted {
        let gap = (estimate(sweeps)? - target_beta).abs();
        if best.is_none_or(|(g, _)| gap < g) {
            best = Some((gap, sweeps));
        }
    }
    best.map(|(_, s)| s)
        .ok_or_else(|| Error::domain("sweep grid must not be empty"))
}
