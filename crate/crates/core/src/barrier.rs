//! Barrier construction for the competitive system.
//!
//! Four scalar Dirichlet problems produce the super-sub barrier
//! `z = (ū, v̲)` and the sub-super barrier `w = (u̲, v̄)`:
//!
//! 1. `-Δū + λū = f`
//! 2. `-Δv̲ + λv̲ + β max(ū, v̲) = g`
//! 3. `-Δv̄ + λv̄ = g`
//! 4. `-Δu̲ + λu̲ + α max(u̲, v̄) = f`
//!
//! The semilinear problems are solved by policy iteration over the branch of
//! the max term; every policy step is an M-matrix solve.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::grid::{DiscreteSystem, Grid, VectorGridFunction};
use crate::linalg::BandMatrix;
use crate::operator::OperatorFamily;
use crate::viscosity::{classify, ordering, Classification, ComparisonReport};

pub const DEFAULT_MAX_POLICIES: usize = 100;

/// `-Δ + diag(shift)` on all nodes, identity rows on the boundary.
fn shifted_laplacian(grid: &Grid, shift: impl Fn(usize) -> f64) -> BandMatrix {
    let n = grid.len();
    let h = grid.spacing();
    let mut a = BandMatrix::zeros(n, grid.bandwidth());
    for node in 0..n {
        if !grid.is_interior(node) {
            a.add(node, node, 1.0);
            continue;
        }
        let mut diag = shift(node);
        for k in 0..grid.dim() {
            let d = 1.0 / (h[k] * h[k]);
            let (minus, plus) = grid.neighbours(node, k);
            a.add(node, minus, -d);
            a.add(node, plus, -d);
            diag += 2.0 * d;
        }
        a.add(node, node, diag);
    }
    a
}

fn solve_band(a: &BandMatrix, rhs: &[f64]) -> Result<Vec<f64>> {
    let (x, history) = a.solve(rhs);
    match x {
        Some(x) if history.last().is_some_and(|r| *r <= 1e-12) => Ok(x),
        _ => Err(Error::LinearSolve { history }),
    }
}

fn check_len(grid: &Grid, arg: &str, values: &[f64]) -> Result<()> {
    if values.len() != grid.len() {
        return Err(Error::DimensionMismatch {
            arg: arg.into(),
            expected: grid.len(),
            found: values.len(),
        });
    }
    if let Some(k) = values.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFinite {
            arg: format!("{arg}[{k}]"),
        });
    }
    Ok(())
}

/// Solves `-Δu + λu = data` with zero Dirichlet values.
///
/// `data` holds one value per grid node; boundary entries are ignored.
pub fn solve_scalar_linear(grid: &Grid, lambda: f64, data: &[f64]) -> Result<Vec<f64>> {
    if !(lambda > 0.0) {
        return Err(Error::InvalidArgument {
            arg: "lambda".into(),
            reason: format!("must be positive, got {lambda}"),
        });
    }
    check_len(grid, "data", data)?;
    let a = shifted_laplacian(grid, |_| lambda);
    let rhs: Vec<f64> = (0..grid.len())
        .map(|n| if grid.is_interior(n) { data[n] } else { 0.0 })
        .collect();
    solve_band(&a, &rhs)
}

/// Result of a semilinear scalar solve.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScalarSolve {
    pub values: Vec<f64>,
    /// Number of linear solves (policies evaluated).
    pub policies: usize,
    /// Max-norm of the nodal residual at termination.
    pub residual: f64,
}

/// Nodal residual of `-Δv + λv + weight·max(frozen, v) - data`.
fn semilinear_residual(grid: &Grid, lambda: f64, weight: f64, frozen: &[f64], data: &[f64], v: &[f64]) -> f64 {
    let lap = shifted_laplacian(grid, |_| lambda).mul_vec(v);
    grid.interior_nodes()
        .into_iter()
        .map(|n| (lap[n] + weight * frozen[n].max(v[n]) - data[n]).abs())
        .fold(0.0, f64::max)
}

/// Solves `-Δv + λv + weight·max(frozen, v) = data` with zero Dirichlet values
/// by policy iteration.
pub fn solve_scalar_semilinear(
    grid: &Grid,
    lambda: f64,
    weight: f64,
    frozen: &[f64],
    data: &[f64],
) -> Result<ScalarSolve> {
    solve_scalar_semilinear_with(grid, lambda, weight, frozen, data, DEFAULT_MAX_POLICIES)
}

pub fn solve_scalar_semilinear_with(
    grid: &Grid,
    lambda: f64,
    weight: f64,
    frozen: &[f64],
    data: &[f64],
    max_policies: usize,
) -> Result<ScalarSolve> {
    if !(weight >= 0.0) || !weight.is_finite() {
        return Err(Error::InvalidArgument {
            arg: "coupling_weight".into(),
            reason: format!("must be finite and nonnegative, got {weight}"),
        });
    }
    check_len(grid, "frozen_field", frozen)?;
    if weight == 0.0 {
        let values = solve_scalar_linear(grid, lambda, data)?;
        let residual = semilinear_residual(grid, lambda, 0.0, frozen, data, &values);
        return Ok(ScalarSolve {
            values,
            policies: 1,
            residual,
        });
    }
    if !(lambda > 0.0) {
        return Err(Error::InvalidArgument {
            arg: "lambda".into(),
            reason: format!("must be positive, got {lambda}"),
        });
    }
    check_len(grid, "data", data)?;

    let interior: Vec<bool> = (0..grid.len()).map(|n| grid.is_interior(n)).collect();
    // policy[n] = true: the max term picks the unknown
    let mut policy = vec![true; grid.len()];
    let mut previous: Option<Vec<bool>> = None;
    for count in 1..=max_policies {
        let a = shifted_laplacian(grid, |n| lambda + if policy[n] { weight } else { 0.0 });
        let rhs: Vec<f64> = (0..grid.len())
            .map(|n| match (interior[n], policy[n]) {
                (false, _) => 0.0,
                (true, true) => data[n],
                (true, false) => data[n] - weight * frozen[n],
            })
            .collect();
        let v = solve_band(&a, &rhs)?;
        let next: Vec<bool> = (0..grid.len())
            .map(|n| !interior[n] || v[n] >= frozen[n])
            .collect();
        if next == policy {
            let residual = semilinear_residual(grid, lambda, weight, frozen, data, &v);
            return Ok(ScalarSolve {
                values: v,
                policies: count,
                residual,
            });
        }
        previous = Some(std::mem::replace(&mut policy, next));
    }
    Err(Error::PolicyIteration {
        iterations: max_policies,
        last_two: Box::new((previous.unwrap_or_default(), policy)),
    })
}

/// A super-sub barrier `z` and a sub-super barrier `w` with `z1 >= w1`, `z2 <= w2`.
#[derive(Debug, Clone, Serialize)]
pub struct BarrierPair {
    #[serde(skip)]
    pub z: VectorGridFunction,
    #[serde(skip)]
    pub w: VectorGridFunction,
    pub ordering_verified: bool,
    pub z_classification: Classification,
    pub w_classification: Classification,
    /// Ordering of `w` (sub-super) against `z` (super-sub).
    pub ordering: ComparisonReport,
}

impl BarrierPair {
    /// Validates user-supplied barriers: `z` super-sub, `w` sub-super, ordered.
    pub fn verify(system: &DiscreteSystem, z: VectorGridFunction, w: VectorGridFunction, tol: f64) -> Result<Self> {
        let z_classification = classify(system, &z, tol)?;
        let w_classification = classify(system, &w, tol)?;
        let ord = ordering(&w, &z, tol)?;
        let mut details = Vec::new();
        if !z_classification.is_super_sub() {
            details.push(format!(
                "z classified as {} (component residuals {:?})",
                z_classification.verdict, z_classification.components
            ));
        }
        if !w_classification.is_sub_super() {
            details.push(format!(
                "w classified as {} (component residuals {:?})",
                w_classification.verdict, w_classification.components
            ));
        }
        if let Some(v) = &ord.worst {
            details.push(format!(
                "ordering z1 >= w1, z2 <= w2 fails by {} at node {} component {}",
                v.excess, v.node, v.component
            ));
        }
        if !details.is_empty() {
            return Err(Error::BarrierVerification { details });
        }
        Ok(Self {
            z,
            w,
            ordering_verified: true,
            z_classification,
            w_classification,
            ordering: ord,
        })
    }
}

/// Runs the four-step construction for a competitive operator and verifies the pair.
pub fn build_barriers(system: &DiscreteSystem, tol: f64) -> Result<BarrierPair> {
    let OperatorFamily::Competitive {
        lambda,
        alpha,
        beta,
        f,
        g,
    } = system.spec().family()
    else {
        return Err(Error::UnsupportedOperator {
            operator: system.spec().name().to_string(),
            reason: "barriers are only constructed for the competitive family; supply them explicitly".into(),
        });
    };
    if system.datum() != 0.0 {
        return Err(Error::UnsupportedOperator {
            operator: system.spec().name().to_string(),
            reason: "barrier construction assumes a zero Dirichlet datum".into(),
        });
    }
    let grid = system.grid();
    let f_nodes = grid.sample(|x| f.eval(x));
    let g_nodes = grid.sample(|x| g.eval(x));

    let u_over = solve_scalar_linear(grid, *lambda, &f_nodes)?;
    let v_under = solve_scalar_semilinear(grid, *lambda, *beta, &u_over, &g_nodes)?;
    let v_over = solve_scalar_linear(grid, *lambda, &g_nodes)?;
    let u_under = solve_scalar_semilinear(grid, *lambda, *alpha, &v_over, &f_nodes)?;

    let partition = system.partition();
    let z = VectorGridFunction::new(grid, partition, vec![u_over, v_under.values])?;
    let w = VectorGridFunction::new(grid, partition, vec![u_under.values, v_over])?;
    BarrierPair::verify(system, z, w, tol)
}
