//! Shared fixtures for the benchmarks.

use triplex::simlab::{generate, DgmSpec};
use triplex::transport::PointCloud;
use triplex::CellTable;

/// Linear-design cell table with `n` draws per cell.
pub fn linear_table(n: usize, seed: u64) -> CellTable {
    generate(&DgmSpec::linear(), n, seed)
        .expect("linear design generates")
        .0
}

/// Two-dimensional clouds of `n` points built from consecutive draws of
/// two cells.
pub fn cloud_pair(n: usize, seed: u64) -> (PointCloud, PointCloud) {
    let table = linear_table(2 * n, seed);
    let cloud = |k: usize| {
        let (_, cdf) = table.iter().nth(k).expect("eight cells");
        // Sorted values would make every map trivial; interleave the halves.
        let v = cdf.values();
        let points: Vec<[f64; 2]> = (0..n).map(|i| [v[i], v[2 * n - 1 - i]]).collect();
        PointCloud::from_points(&points).expect("finite points")
    };
    (cloud(0), cloud(3))
}
