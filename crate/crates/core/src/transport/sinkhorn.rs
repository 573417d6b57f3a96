use crate::error::{Error, Result};
use crate::transport::cloud::{cost_matrix, PointCloud};
use crate::transport::map::BrenierMapApprox;

pub const DEFAULT_MAX_ITER: usize = 10_000;
/// Largest row-marginal error accepted as converged.
pub const DEFAULT_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct TransportPlan {
    n_source: usize,
    n_target: usize,
    /// Row-major coupling.
    coupling: Vec<f64>,
    pub converged: bool,
    pub iterations: usize,
    /// Largest absolute deviation of row or column sums from uniform.
    pub marginal_error: f64,
    /// Negated dual objective after each full iteration; nonincreasing.
    pub objective: Vec<f64>,
}

impl TransportPlan {
    pub fn n_source(&self) -> usize {
        self.n_source
    }

    pub fn n_target(&self) -> usize {
        self.n_target
    }

    pub fn entry(&self, i: usize, j: usize) -> f64 {
        self.coupling[i * self.n_target + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.coupling[i * self.n_target..(i + 1) * self.n_target]
    }

    pub fn row_sums(&self) -> Vec<f64> {
        self.coupling
            .chunks_exact(self.n_target)
            .map(|r| r.iter().sum())
            .collect()
    }

    pub fn col_sums(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.n_target];
        for row in self.coupling.chunks_exact(self.n_target) {
            for (o, v) in out.iter_mut().zip(row) {
                *o += v;
            }
        }
        out
    }

    /// `Σ γ_ij c_ij` for a cost matrix of matching shape.
    pub fn cost(&self, cost: &[f64]) -> f64 {
        self.coupling.iter().zip(cost).map(|(g, c)| g * c).sum()
    }
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// `0.05 ×` the median pairwise squared distance. Falls back to the mean, then
/// to 1, when most pairs coincide.
pub fn default_reg(source: &PointCloud, target: &PointCloud) -> Result<f64> {
    let cost = cost_matrix(source, target)?;
    let mean = cost.iter().sum::<f64>() / cost.len() as f64;
    let med = median(cost);
    let scale = if med > 0.0 {
        med
    } else if mean > 0.0 {
        mean
    } else {
        1.0
    };
    Ok(0.05 * scale)
}

fn logsumexp(values: impl Iterator<Item = f64> + Clone) -> f64 {
    let max = values.clone().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    max + values.map(|v| (v - max).exp()).sum::<f64>().ln()
}

/// Each annealing stage halves the regularization.
const ANNEAL_FACTOR: f64 = 0.5;
/// Iteration cap for the intermediate stages; only the last one must converge.
const STAGE_ITER: usize = 200;

struct Duals<'a> {
    cost: &'a [f64],
    n: usize,
    m: usize,
    f: Vec<f64>,
    g: Vec<f64>,
}

impl Duals<'_> {
    fn log_kernel(&self, i: usize, j: usize, reg: f64) -> f64 {
        (self.f[i] + self.g[j] - self.cost[i * self.m + j]) / reg
    }

    /// One full block update: rows, then columns.
    fn sweep(&mut self, reg: f64) -> Result<()> {
        let (n, m) = (self.n, self.m);
        let (log_a, log_b) = (-(n as f64).ln(), -(m as f64).ln());
        for i in 0..n {
            let row = &self.cost[i * m..(i + 1) * m];
            self.f[i] = reg * log_a - reg * logsumexp(self.g.iter().zip(row).map(|(gj, c)| (gj - c) / reg));
        }
        for j in 0..m {
            let (f, cost) = (&self.f, self.cost);
            self.g[j] = reg * log_b - reg * logsumexp((0..n).map(|i| (f[i] - cost[i * m + j]) / reg));
        }
        if self.f.iter().chain(&self.g).any(|v| !v.is_finite()) {
            return Err(Error::NumericalUnderflow(format!(
                "dual potentials became non-finite (reg = {reg})"
            )));
        }
        Ok(())
    }

    /// Dual objective `<a, f> + <b, g> - reg Σ exp((f + g - C) / reg)`.
    fn dual(&self, reg: f64) -> f64 {
        let mut mass = 0.0;
        for i in 0..self.n {
            for j in 0..self.m {
                mass += self.log_kernel(i, j, reg).exp();
            }
        }
        self.f.iter().sum::<f64>() / self.n as f64 + self.g.iter().sum::<f64>() / self.m as f64 - reg * mass
    }

    /// Columns are exact after a sweep; rows show how far off the plan is.
    fn row_error(&self, reg: f64) -> f64 {
        (0..self.n)
            .map(|i| {
                let s: f64 = (0..self.m).map(|j| self.log_kernel(i, j, reg).exp()).sum();
                (s - 1.0 / self.n as f64).abs()
            })
            .fold(0.0, f64::max)
    }
}

/// Entropic optimal transport for squared-Euclidean cost, by Sinkhorn
/// iterations on the dual potentials in the log domain.
///
/// Small `reg` converges slowly from a cold start, so the potentials are first
/// warmed up on a decreasing sequence of larger regularizations. `objective`
/// and the convergence check refer to the final `reg` only.
pub fn sinkhorn_plan(
    source: &PointCloud,
    target: &PointCloud,
    reg: f64,
    max_iter: usize,
    tol: f64,
) -> Result<TransportPlan> {
    if !(reg > 0.0 && reg.is_finite()) {
        return Err(Error::InvalidParameter(format!("reg must be positive, got {reg}")));
    }
    let cost = cost_matrix(source, target)?;
    let (n, m) = (source.len(), target.len());
    let mut duals = Duals {
        cost: &cost,
        n,
        m,
        f: vec![0.0; n],
        g: vec![0.0; m],
    };

    let mut iterations = 0;
    let mut stage = cost.iter().copied().fold(0.0, f64::max);
    while stage > reg && iterations < max_iter {
        for _ in 0..STAGE_ITER {
            iterations += 1;
            duals.sweep(stage)?;
            if duals.row_error(stage) < 1e-3 / n as f64 || iterations >= max_iter {
                break;
            }
        }
        stage *= ANNEAL_FACTOR;
    }

    let mut objective = Vec::new();
    let mut converged = false;
    let mut final_iter = 0;
    while final_iter < max_iter {
        final_iter += 1;
        duals.sweep(reg)?;
        objective.push(-duals.dual(reg));
        if duals.row_error(reg) < tol {
            converged = true;
            break;
        }
    }
    iterations += final_iter;

    let mut coupling = Vec::with_capacity(n * m);
    for i in 0..n {
        for j in 0..m {
            coupling.push(duals.log_kernel(i, j, reg).exp());
        }
    }
    let mut plan = TransportPlan {
        n_source: n,
        n_target: m,
        coupling,
        converged,
        iterations,
        marginal_error: 0.0,
        objective,
    };
    let rows = plan.row_sums().into_iter().map(|s| (s - 1.0 / n as f64).abs());
    let cols = plan.col_sums().into_iter().map(|s| (s - 1.0 / m as f64).abs());
    plan.marginal_error = rows.chain(cols).fold(0.0, f64::max);
    Ok(plan)
}

/// Barycentric projection of an entropic plan: each source point goes to the
/// plan-weighted average of the target points.
pub fn sinkhorn_map(source: &PointCloud, target: &PointCloud, reg: f64) -> Result<BrenierMapApprox> {
    let plan = sinkhorn_plan(source, target, reg, DEFAULT_MAX_ITER, DEFAULT_TOL)?;
    let d = target.dim();
    let mut images = Vec::with_capacity(source.len() * d);
    for i in 0..source.len() {
        let row = plan.row(i);
        let mass: f64 = row.iter().sum();
        if !(mass > 0.0) {
            return Err(Error::NumericalUnderflow(format!("source point {i} carries no mass")));
        }
        let mut y = vec![0.0; d];
        for (j, w) in row.iter().enumerate() {
            for (k, yk) in y.iter_mut().enumerate() {
                *yk += w * target.point(j)[k];
            }
        }
        images.extend(y.into_iter().map(|v| v / mass));
    }
    BrenierMapApprox::new(source.clone(), PointCloud::new(d, images)?)
}
