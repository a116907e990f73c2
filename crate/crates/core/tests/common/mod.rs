//! Independent reference computations for the competitive system on the unit
//! box. Nothing here calls into the library's discretization or residuals.

#![allow(dead_code)]

/// `(2d u_i - sum of neighbours) / h^2 + λu + α max(u, v) - f` and the
/// matching second equation, on an `n`-per-axis lattice of `[0, 1]^dim`.
pub struct CompetitiveOracle {
    pub lambda: f64,
    pub alpha: f64,
    pub beta: f64,
    pub dim: usize,
    pub n: usize,
    pub f: Vec<f64>,
    pub g: Vec<f64>,
}

impl CompetitiveOracle {
    pub fn new(lambda: f64, alpha: f64, beta: f64, dim: usize, n: usize, f: impl Fn(&[f64]) -> f64, g: impl Fn(&[f64]) -> f64) -> Self {
        let pts: Vec<Vec<f64>> = (0..n.pow(dim as u32)).map(|k| point(dim, n, k)).collect();
        Self {
            lambda,
            alpha,
            beta,
            dim,
            n,
            f: pts.iter().map(|x| f(x)).collect(),
            g: pts.iter().map(|x| g(x)).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.n.pow(self.dim as u32)
    }

    pub fn is_interior(&self, k: usize) -> bool {
        let (i, j) = split(self.dim, self.n, k);
        let inside = |a: usize| a > 0 && a + 1 < self.n;
        inside(i) && (self.dim == 1 || inside(j))
    }

    fn lap(&self, u: &[f64], k: usize) -> f64 {
        let h = 1.0 / (self.n - 1) as f64;
        let mut s = 2.0 * u[k] - u[k - 1] - u[k + 1];
        if self.dim == 2 {
            s += 2.0 * u[k] - u[k - self.n] - u[k + self.n];
        }
        s / (h * h)
    }

    /// Residuals at interior nodes, `(node, r1, r2)`.
    pub fn residuals(&self, u: &[f64], v: &[f64]) -> Vec<(usize, f64, f64)> {
        (0..self.len())
            .filter(|&k| self.is_interior(k))
            .map(|k| {
                let m = u[k].max(v[k]);
                let r1 = self.lap(u, k) + self.lambda * u[k] + self.alpha * m - self.f[k];
                let r2 = self.lap(v, k) + self.lambda * v[k] + self.beta * m - self.g[k];
                (k, r1, r2)
            })
            .collect()
    }

    fn zero_boundary(&self, u: &[f64], v: &[f64]) -> bool {
        (0..self.len()).filter(|&k| !self.is_interior(k)).all(|k| u[k] == 0.0 && v[k] == 0.0)
    }

    pub fn is_super_sub(&self, u: &[f64], v: &[f64], tol: f64) -> bool {
        self.zero_boundary(u, v) && self.residuals(u, v).iter().all(|&(_, r1, r2)| r1 >= -tol && r2 <= tol)
    }

    pub fn is_sub_super(&self, u: &[f64], v: &[f64], tol: f64) -> bool {
        self.zero_boundary(u, v) && self.residuals(u, v).iter().all(|&(_, r1, r2)| r1 <= tol && r2 >= -tol)
    }

    pub fn max_residual(&self, u: &[f64], v: &[f64]) -> f64 {
        self.residuals(u, v).iter().fold(0.0f64, |a, &(_, r1, r2)| a.max(r1.abs()).max(r2.abs()))
    }
}

fn split(dim: usize, n: usize, k: usize) -> (usize, usize) {
    if dim == 1 {
        (k, 0)
    } else {
        (k / n, k % n)
    }
}

pub fn point(dim: usize, n: usize, k: usize) -> Vec<f64> {
    let (i, j) = split(dim, n, k);
    let h = 1.0 / (n - 1) as f64;
    if dim == 1 {
        vec![i as f64 * h]
    } else {
        vec![i as f64 * h, j as f64 * h]
    }
}

/// Solution of `-u'' + 2u = 1`, `u(0) = u(1) = 0`.
pub fn symmetric_exact(x: f64) -> f64 {
    let c = 2f64.sqrt();
    0.5 * (1.0 - (c * (x - 0.5)).cosh() / (c / 2.0).cosh())
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).fold(0.0f64, |m, (x, y)| m.max((x - y).abs()))
}
