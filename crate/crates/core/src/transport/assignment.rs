use crate::error::{Error, Result};
use crate::transport::cloud::{cost_matrix, PointCloud};
use crate::transport::map::BrenierMapApprox;

/// Minimum-cost perfect matching for a square row-major cost matrix, by the
/// shortest augmenting path method with potentials. `result[i]` is the column
/// assigned to row `i`.
pub fn hungarian(cost: &[f64], n: usize) -> Vec<usize> {
    assert_eq!(cost.len(), n * n, "cost matrix must be n × n");
    let a = |i: usize, j: usize| cost[(i - 1) * n + (j - 1)];
    // 1-based with a sentinel column 0.
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; n + 1];
    let mut p = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0;
        let mut minv = vec![f64::INFINITY; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0;
            for j in 1..=n {
                if !used[j] {
                    let cur = a(i0, j) - u[i0] - v[j];
                    if cur < minv[j] {
                        minv[j] = cur;
                        way[j] = j0;
                    }
                    if minv[j] < delta {
                        delta = minv[j];
                        j1 = j;
                    }
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if p[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut out = vec![0; n];
    for j in 1..=n {
        out[p[j] - 1] = j - 1;
    }
    out
}

/// Exact optimal map between equal-size uniform clouds.
pub fn exact_assignment_map(source: &PointCloud, target: &PointCloud) -> Result<BrenierMapApprox> {
    if source.len() != target.len() {
        return Err(Error::SizeMismatch {
            source_len: source.len(),
            target_len: target.len(),
        });
    }
    let n = source.len();
    let cost = cost_matrix(source, target)?;
    let mut assign = hungarian(&cost, n);

    // Coincident source points are interchangeable. Hand their targets out in
    // (coordinates, index) order so the result does not depend on solver
    // tie-breaking, and so that in one dimension the matching stays sorted.
    let mut seen = vec![false; n];
    for i in 0..n {
        if seen[i] {
            continue;
        }
        let group: Vec<usize> = (i..n).filter(|&k| source.point(k) == source.point(i)).collect();
        let mut targets: Vec<usize> = group.iter().map(|&k| assign[k]).collect();
        targets.sort_by(|&a, &b| {
            let (pa, pb) = (target.point(a), target.point(b));
            pa.iter()
                .zip(pb)
                .map(|(x, y)| x.total_cmp(y))
                .find(|o| o.is_ne())
                .unwrap_or(std::cmp::Ordering::Equal)
                .then(a.cmp(&b))
        });
        for (k, t) in group.into_iter().zip(targets) {
            seen[k] = true;
            assign[k] = t;
        }
    }

    let mut images = Vec::with_capacity(n * target.dim());
    for j in assign {
        images.extend_from_slice(target.point(j));
    }
    BrenierMapApprox::new(source.clone(), PointCloud::new(target.dim(), images)?)
}
