use crate::cell::CellId;
use crate::error::{Error, Result};

/// Points of equal dimension stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct PointCloud {
    dim: usize,
    coords: Vec<f64>,
}

impl PointCloud {
    pub fn new(dim: usize, coords: Vec<f64>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidParameter("point dimension must be at least 1".into()));
        }
        if coords.is_empty() {
            return Err(Error::EmptySample);
        }
        if !coords.len().is_multiple_of(dim) {
            return Err(Error::DimensionMismatch {
                expected: dim,
                found: coords.len() % dim,
            });
        }
        if let Some(bad) = coords.iter().find(|v| !v.is_finite()) {
            return Err(Error::NonFinite(*bad));
        }
        Ok(PointCloud { dim, coords })
    }

    pub fn from_points<P: AsRef<[f64]>>(points: &[P]) -> Result<Self> {
        let dim = points.first().ok_or(Error::EmptySample)?.as_ref().len();
        let mut coords = Vec::with_capacity(dim * points.len());
        for p in points {
            let p = p.as_ref();
            if p.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    found: p.len(),
                });
            }
            coords.extend_from_slice(p);
        }
        PointCloud::new(dim, coords)
    }

    /// One-dimensional cloud.
    pub fn from_values(values: &[f64]) -> Result<Self> {
        PointCloud::new(1, values.to_vec())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.coords.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.coords[i * self.dim..(i + 1) * self.dim]
    }

    pub fn points(&self) -> impl Iterator<Item = &[f64]> {
        self.coords.chunks_exact(self.dim)
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords
    }

    /// Adds `v` to every point.
    pub fn translate(&self, v: &[f64]) -> Result<Self> {
        self.check_dim(v.len())?;
        let coords = self
            .coords
            .iter()
            .enumerate()
            .map(|(i, x)| x + v[i % self.dim])
            .collect();
        PointCloud::new(self.dim, coords)
    }

    pub(crate) fn check_dim(&self, found: usize) -> Result<()> {
        if found != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                found,
            });
        }
        Ok(())
    }
}

pub fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Squared-Euclidean costs, row-major `source.len() × target.len()`.
pub fn cost_matrix(source: &PointCloud, target: &PointCloud) -> Result<Vec<f64>> {
    source.check_dim(target.dim())?;
    let mut out = Vec::with_capacity(source.len() * target.len());
    for a in source.points() {
        for b in target.points() {
            out.push(sq_dist(a, b));
        }
    }
    Ok(out)
}

/// Clouds keyed by cell. Only the two-period `t0`/`t1` measures of each
/// (state, group) are used; the treated post-period slot stays empty.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct CloudTable {
    clouds: [Option<PointCloud>; 8],
}

impl CloudTable {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, id: CellId, cloud: PointCloud) -> Option<PointCloud> {
        self.clouds[id.index()].replace(cloud)
    }

    pub fn get(&self, id: CellId) -> Option<&PointCloud> {
        self.clouds[id.index()].as_ref()
    }

    pub fn cloud(&self, id: CellId) -> Result<&PointCloud> {
        self.get(id).ok_or(Error::MissingCell(id))
    }

    pub fn iter(&self) -> impl Iterator<Item = (CellId, &PointCloud)> {
        self.clouds
            .iter()
            .enumerate()
            .filter_map(|(i, c)| c.as_ref().map(|c| (CellId::from_index(i), c)))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_ragged_and_nonfinite() {
        assert!(matches!(
            PointCloud::from_points(&[vec![1.0, 2.0], vec![3.0]]),
            Err(Error::DimensionMismatch { expected: 2, found: 1 })
        ));
        assert!(matches!(
            PointCloud::new(1, vec![f64::INFINITY]),
            Err(Error::NonFinite(_))
        ));
        assert_eq!(PointCloud::new(2, vec![]), Err(Error::EmptySample));
    }

    #[test]
    fn cost_matrix_layout() {
        let a = PointCloud::from_points(&[[0.0, 0.0], [1.0, 0.0]]).unwrap();
        let b = PointCloud::from_points(&[[0.0, 2.0]]).unwrap();
        assert_eq!(cost_matrix(&a, &b).unwrap(), vec![4.0, 5.0]);
        let c = PointCloud::from_values(&[1.0]).unwrap();
        assert!(matches!(cost_matrix(&a, &c), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn translate_shifts_each_coordinate() {
        let a = PointCloud::from_points(&[[0.0, 0.0], [1.0, 2.0]]).unwrap();
        let t = a.translate(&[1.0, -1.0]).unwrap();
        assert_eq!(t.point(1), &[2.0, 1.0]);
    }
}
