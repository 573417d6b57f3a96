use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::empirical::EmpiricalCdf;
use crate::error::{Error, Result};
use crate::transport::cloud::{sq_dist, PointCloud};

/// The one-dimensional optimal map `F⁻¹_target ∘ F_source`.
pub fn brenier_1d(source: &EmpiricalCdf, target: &EmpiricalCdf, y: f64) -> Result<f64> {
    target.quantile_eval(source.cdf_eval(y))
}

/// How a map known on its source cloud extends to other points.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Extension {
    /// Image of the nearest source point, lowest index on ties.
    #[default]
    Nearest,
    /// One-dimensional only: image of the largest source point `<= q` (the
    /// smallest source point below the cloud). For a sorted matching this is
    /// exactly `F⁻¹_target ∘ F_source`.
    StepBelow,
    /// One-dimensional only: image of the smallest source point `>= q` (the
    /// largest source point above the cloud). Pushing a cloud through this
    /// extension gives it the cdf `F_cloud ∘ F⁻¹_source ∘ F_target`.
    StepAbove,
}

/// A transport map known on a finite source cloud.
#[derive(Debug, Clone, PartialEq)]
pub struct BrenierMapApprox {
    source: PointCloud,
    images: PointCloud,
    extension: Extension,
    /// Source indices by ascending coordinate, ties by index (step extensions).
    order: Vec<usize>,
}

/// Pairs `(x, x')` checked for `<T(x) - T(x'), x - x'> >= 0`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MonotonicityCheck {
    pub pairs: usize,
    pub violations: usize,
}

impl BrenierMapApprox {
    pub fn new(source: PointCloud, images: PointCloud) -> Result<Self> {
        if source.len() != images.len() {
            return Err(Error::SizeMismatch {
                source_len: source.len(),
                target_len: images.len(),
            });
        }
        Ok(BrenierMapApprox {
            source,
            images,
            extension: Extension::Nearest,
            order: Vec::new(),
        })
    }

    pub fn with_extension(mut self, extension: Extension) -> Result<Self> {
        if extension != Extension::Nearest {
            self.source.check_dim(1)?;
            let mut order: Vec<usize> = (0..self.source.len()).collect();
            order.sort_by(|&a, &b| {
                self.source.point(a)[0]
                    .total_cmp(&self.source.point(b)[0])
                    .then(a.cmp(&b))
            });
            self.order = order;
        }
        self.extension = extension;
        Ok(self)
    }

    pub fn extension(&self) -> Extension {
        self.extension
    }

    pub fn source(&self) -> &PointCloud {
        &self.source
    }

    pub fn images(&self) -> &PointCloud {
        &self.images
    }

    fn nearest(&self, q: &[f64]) -> usize {
        match self.extension {
            Extension::StepBelow => {
                let k = self.order.partition_point(|&i| self.source.point(i)[0] <= q[0]);
                return self.order[k.saturating_sub(1)];
            }
            Extension::StepAbove => {
                let k = self.order.partition_point(|&i| self.source.point(i)[0] < q[0]);
                return self.order[k.min(self.order.len() - 1)];
            }
            Extension::Nearest => {}
        }
        let mut best = (f64::INFINITY, 0);
        for (i, p) in self.source.points().enumerate() {
            let d = sq_dist(p, q);
            if d < best.0 {
                best = (d, i);
            }
        }
        best.1
    }

    /// Image of `q` under the map's extension rule.
    pub fn apply(&self, q: &[f64]) -> Result<&[f64]> {
        self.source.check_dim(q.len())?;
        Ok(self.images.point(self.nearest(q)))
    }

    pub fn push(&self, cloud: &PointCloud) -> Result<PointCloud> {
        self.source.check_dim(cloud.dim())?;
        let mut coords = Vec::with_capacity(cloud.len() * self.images.dim());
        for q in cloud.points() {
            coords.extend_from_slice(self.images.point(self.nearest(q)));
        }
        PointCloud::new(self.images.dim(), coords)
    }

    /// Mean squared displacement over the source cloud.
    pub fn cost(&self) -> f64 {
        let total: f64 = self
            .source
            .points()
            .zip(self.images.points())
            .map(|(a, b)| sq_dist(a, b))
            .sum();
        total / self.source.len() as f64
    }

    /// Counts monotonicity violations of the fitted map. On convex supports a
    /// monotone map is cyclically monotone, so this is a cheap proxy for the
    /// co-monotonicity the pushforward relies on. Checks every pair when there
    /// are at most `max_pairs`, otherwise a seeded random sample.
    pub fn monotonicity(&self, max_pairs: usize, seed: u64) -> Result<MonotonicityCheck> {
        if self.source.dim() != self.images.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.source.dim(),
                found: self.images.dim(),
            });
        }
        let n = self.source.len();
        let violates = |i: usize, j: usize| {
            let (x, y) = (self.source.point(i), self.source.point(j));
            let (tx, ty) = (self.images.point(i), self.images.point(j));
            let inner: f64 = (0..x.len()).map(|k| (tx[k] - ty[k]) * (x[k] - y[k])).sum();
            inner < -1e-12 * (1.0 + sq_dist(x, y) + sq_dist(tx, ty))
        };
        let all_pairs = n * n.saturating_sub(1) / 2;
        let mut check = MonotonicityCheck {
            pairs: 0,
            violations: 0,
        };
        if all_pairs <= max_pairs {
            for i in 0..n {
                for j in i + 1..n {
                    check.pairs += 1;
                    check.violations += violates(i, j) as usize;
                }
            }
        } else {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            while check.pairs < max_pairs {
                let (i, j) = (rng.random_range(0..n), rng.random_range(0..n));
                if i != j {
                    check.pairs += 1;
                    check.violations += violates(i, j) as usize;
                }
            }
        }
        Ok(check)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ecdf(v: &[f64]) -> EmpiricalCdf {
        EmpiricalCdf::new(v.to_vec()).unwrap()
    }

    #[test]
    fn brenier_1d_examples() {
        assert_eq!(brenier_1d(&ecdf(&[0.0, 1.0]), &ecdf(&[10.0, 20.0]), 0.0).unwrap(), 10.0);
        let s = ecdf(&[0.3, -1.0, 2.0, 5.5]);
        for &y in s.values() {
            assert_eq!(brenier_1d(&s, &s, y).unwrap(), y);
        }
        let t = ecdf(&[4.0, 1.0, 9.0]);
        let outs: Vec<f64> = (-20..80).map(|i| brenier_1d(&s, &t, i as f64 * 0.1).unwrap()).collect();
        assert!(outs.windows(2).all(|w| w[0] <= w[1]));
    }

    #[test]
    fn off_cloud_queries_use_nearest_source() {
        let src = PointCloud::from_values(&[0.0, 1.0, 3.0]).unwrap();
        let img = PointCloud::from_values(&[10.0, 11.0, 13.0]).unwrap();
        let m = BrenierMapApprox::new(src, img).unwrap();
        assert_eq!(m.apply(&[0.4]).unwrap(), &[10.0]);
        assert_eq!(m.apply(&[2.1]).unwrap(), &[13.0]);
        // Equidistant: lower index wins.
        assert_eq!(m.apply(&[0.5]).unwrap(), &[10.0]);
        assert!(matches!(m.apply(&[0.0, 1.0]), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn step_below_reproduces_the_quantile_chain() {
        let src = [0.5, -1.0, 2.0, 2.0, 4.0];
        let tgt = [10.0, 30.0, 20.0, 50.0, 40.0];
        let m = crate::transport::exact_assignment_map(
            &PointCloud::from_values(&src).unwrap(),
            &PointCloud::from_values(&tgt).unwrap(),
        )
        .unwrap()
        .with_extension(Extension::StepBelow)
        .unwrap();
        let (fs, ft) = (ecdf(&src), ecdf(&tgt));
        for i in -30..60 {
            let q = i as f64 * 0.1;
            assert_eq!(m.apply(&[q]).unwrap()[0], brenier_1d(&fs, &ft, q).unwrap(), "at {q}");
        }
        let up = m.clone().with_extension(Extension::StepAbove).unwrap();
        let images: Vec<f64> = [-5.0, -1.0, 0.0, 0.5, 1.0, 2.0, 3.0, 9.0]
            .iter()
            .map(|&q| up.apply(&[q]).unwrap()[0])
            .collect();
        assert_eq!(images, vec![10.0, 10.0, 20.0, 20.0, 30.0, 30.0, 50.0, 50.0]);
        // Away from ties both step extensions agree with the matching.
        for (p, im) in m
            .source()
            .points()
            .zip(m.images().points())
            .filter(|(p, _)| p[0] != 2.0)
        {
            assert_eq!(up.apply(p).unwrap(), im);
        }
        let flat = BrenierMapApprox::new(
            PointCloud::from_points(&[[0.0, 0.0]]).unwrap(),
            PointCloud::from_points(&[[0.0, 0.0]]).unwrap(),
        )
        .unwrap();
        assert!(flat.with_extension(Extension::StepBelow).is_err());
    }

    #[test]
    fn monotonicity_counts_crossings() {
        let src = PointCloud::from_values(&[0.0, 1.0, 2.0]).unwrap();
        let ok = BrenierMapApprox::new(src.clone(), PointCloud::from_values(&[0.0, 5.0, 6.0]).unwrap()).unwrap();
        assert_eq!(
            ok.monotonicity(100, 0).unwrap(),
            MonotonicityCheck {
                pairs: 3,
                violations: 0
            }
        );
        let bad = BrenierMapApprox::new(src, PointCloud::from_values(&[6.0, 5.0, 0.0]).unwrap()).unwrap();
        assert_eq!(bad.monotonicity(100, 0).unwrap().violations, 3);
        assert_eq!(bad.monotonicity(2, 0).unwrap().pairs, 2);
    }
}
