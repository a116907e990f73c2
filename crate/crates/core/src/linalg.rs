//! Banded LU without pivoting. Only used on M-matrices (weakly diagonally
//! dominant with nonpositive off-diagonals), where elimination is stable.

#[derive(Debug, Clone)]
pub(crate) struct BandMatrix {
    n: usize,
    bw: usize,
    // row i, column j stored at i * width + (j + bw - i)
    data: Vec<f64>,
}

impl BandMatrix {
    pub fn zeros(n: usize, bw: usize) -> Self {
        Self {
            n,
            bw,
            data: vec![0.0; n * (2 * bw + 1)],
        }
    }

    fn width(&self) -> usize {
        2 * self.bw + 1
    }

    fn slot(&self, i: usize, j: usize) -> usize {
        debug_assert!(i.abs_diff(j) <= self.bw);
        i * self.width() + (j + self.bw - i)
    }

    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        let k = self.slot(i, j);
        self.data[k] += v;
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        (0..self.n)
            .map(|i| {
                let lo = i.saturating_sub(self.bw);
                let hi = (i + self.bw).min(self.n - 1);
                (lo..=hi).map(|j| self.data[self.slot(i, j)] * x[j]).sum()
            })
            .collect()
    }

    pub fn norm_inf(&self) -> f64 {
        self.data
            .chunks(self.width())
            .map(|row| row.iter().map(|v| v.abs()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    /// In-place LU factorization; returns `None` on a zero pivot.
    pub fn factor(&self) -> Option<BandLu> {
        let mut lu = self.clone();
        let n = lu.n;
        let bw = lu.bw;
        for k in 0..n {
            let pivot = lu.data[lu.slot(k, k)];
            if pivot == 0.0 || !pivot.is_finite() {
                return None;
            }
            let last = (k + bw).min(n - 1);
            for i in (k + 1)..=last {
                let sik = lu.slot(i, k);
                if lu.data[sik] == 0.0 {
                    continue;
                }
                let factor = lu.data[sik] / pivot;
                lu.data[sik] = factor;
                for j in (k + 1)..=last {
                    let skj = lu.slot(k, j);
                    let sij = lu.slot(i, j);
                    lu.data[sij] -= factor * lu.data[skj];
                }
            }
        }
        Some(BandLu { lu })
    }

    /// Solves `A x = b` with up to three steps of iterative refinement.
    /// Returns the solution and the backward-error history.
    pub fn solve(&self, b: &[f64]) -> (Option<Vec<f64>>, Vec<f64>) {
        let Some(lu) = self.factor() else {
            return (None, Vec::new());
        };
        let mut x = lu.solve(b);
        let mut history = Vec::new();
        let anorm = self.norm_inf();
        let bnorm = b.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        for _ in 0..4 {
            let ax = self.mul_vec(&x);
            let r: Vec<f64> = b.iter().zip(&ax).map(|(bi, ai)| bi - ai).collect();
            let rnorm = r.iter().fold(0.0f64, |a, v| a.max(v.abs()));
            let xnorm = x.iter().fold(0.0f64, |a, v| a.max(v.abs()));
            let scale = (anorm * xnorm + bnorm).max(1.0);
            history.push(rnorm / scale);
            if rnorm / scale <= 1e-14 {
                break;
            }
            let dx = lu.solve(&r);
            x.iter_mut().zip(&dx).for_each(|(xi, di)| *xi += di);
        }
        (Some(x), history)
    }
}

pub(crate) struct BandLu {
    lu: BandMatrix,
}

impl BandLu {
    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let a = &self.lu;
        let n = a.n;
        let mut y = b.to_vec();
        for i in 0..n {
            let lo = i.saturating_sub(a.bw);
            let mut acc = y[i];
            for j in lo..i {
                acc -= a.data[a.slot(i, j)] * y[j];
            }
            y[i] = acc;
        }
        for i in (0..n).rev() {
            let hi = (i + a.bw).min(n - 1);
            let mut acc = y[i];
            for j in (i + 1)..=hi {
                acc -= a.data[a.slot(i, j)] * y[j];
            }
            y[i] = acc / a.data[a.slot(i, i)];
        }
        y
    }
}
