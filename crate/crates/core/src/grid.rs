//! Uniform box grids, vector grid functions and the monotone discretization.
//!
//! Second derivatives use central differences, the drift term is upwinded on
//! the sign of `b_j`, and the coupling `c_j` is evaluated pointwise. The
//! resulting linear part has nonpositive off-diagonal weights and a diagonal
//! dominating them, so the discrete residual is nonincreasing in every
//! neighbouring value.

use std::fmt::Write as _;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::BandMatrix;
use crate::operator::{BoxDomain, OperatorSpec, Partition};

/// Uniform rectangular grid, nodes ordered lexicographically by `(i0, i1)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Grid {
    lower: Vec<f64>,
    upper: Vec<f64>,
    nodes: Vec<usize>,
    spacing: Vec<f64>,
}

/// Builds a grid with `nodes_per_axis[k] >= 3` nodes on `[bounds[k].0, bounds[k].1]`.
pub fn build_grid(dim: usize, bounds: &[(f64, f64)], nodes_per_axis: &[usize]) -> Result<Grid> {
    if !(dim == 1 || dim == 2) {
        return Err(Error::InvalidArgument {
            arg: "dim".into(),
            reason: format!("spatial dimension must be 1 or 2, got {dim}"),
        });
    }
    if bounds.len() != dim || nodes_per_axis.len() != dim {
        return Err(Error::DimensionMismatch {
            arg: "bounds/nodes".into(),
            expected: dim,
            found: bounds.len().min(nodes_per_axis.len()),
        });
    }
    for (k, n) in nodes_per_axis.iter().enumerate() {
        if *n < 3 {
            return Err(Error::InvalidArgument {
                arg: format!("nodes[{k}]"),
                reason: format!("need at least 3 nodes per axis, got {n}"),
            });
        }
    }
    let domain = BoxDomain::new(
        bounds.iter().map(|b| b.0).collect(),
        bounds.iter().map(|b| b.1).collect(),
    )?;
    let spacing = (0..dim)
        .map(|k| (domain.upper[k] - domain.lower[k]) / (nodes_per_axis[k] - 1) as f64)
        .collect();
    Ok(Grid {
        lower: domain.lower,
        upper: domain.upper,
        nodes: nodes_per_axis.to_vec(),
        spacing,
    })
}

impl Grid {
    pub fn dim(&self) -> usize {
        self.nodes.len()
    }

    pub fn len(&self) -> usize {
        self.nodes.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn nodes_per_axis(&self) -> &[usize] {
        &self.nodes
    }

    pub fn spacing(&self) -> &[f64] {
        &self.spacing
    }

    pub fn domain(&self) -> BoxDomain {
        BoxDomain {
            lower: self.lower.clone(),
            upper: self.upper.clone(),
        }
    }

    /// Per-axis indices of a node.
    pub fn multi_index(&self, node: usize) -> [usize; 2] {
        match self.dim() {
            1 => [node, 0],
            _ => [node / self.nodes[1], node % self.nodes[1]],
        }
    }

    fn flat(&self, idx: [usize; 2]) -> usize {
        match self.dim() {
            1 => idx[0],
            _ => idx[0] * self.nodes[1] + idx[1],
        }
    }

    /// Offset between neighbouring nodes along `axis`.
    fn stride(&self, axis: usize) -> usize {
        if self.dim() == 2 && axis == 0 {
            self.nodes[1]
        } else {
            1
        }
    }

    /// Half-bandwidth of nodal linear systems.
    pub(crate) fn bandwidth(&self) -> usize {
        self.stride(0)
    }

    pub fn coordinate(&self, axis: usize, i: usize) -> f64 {
        if i + 1 == self.nodes[axis] {
            self.upper[axis]
        } else {
            self.lower[axis] + i as f64 * self.spacing[axis]
        }
    }

    pub fn point(&self, node: usize) -> Vec<f64> {
        let idx = self.multi_index(node);
        (0..self.dim()).map(|k| self.coordinate(k, idx[k])).collect()
    }

    pub fn is_interior(&self, node: usize) -> bool {
        let idx = self.multi_index(node);
        (0..self.dim()).all(|k| idx[k] > 0 && idx[k] + 1 < self.nodes[k])
    }

    pub fn interior_nodes(&self) -> Vec<usize> {
        (0..self.len()).filter(|n| self.is_interior(*n)).collect()
    }

    /// `(minus, plus)` neighbours of an interior node along `axis`.
    pub fn neighbours(&self, node: usize, axis: usize) -> (usize, usize) {
        let mut idx = self.multi_index(node);
        idx[axis] -= 1;
        let minus = self.flat(idx);
        idx[axis] += 2;
        (minus, self.flat(idx))
    }

    /// Samples a function at every node.
    pub fn sample(&self, f: impl Fn(&[f64]) -> f64) -> Vec<f64> {
        (0..self.len()).map(|n| f(&self.point(n))).collect()
    }
}

/// Nodal values of all `m` components, stored per component.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VectorGridFunction {
    partition: Partition,
    fields: Vec<Vec<f64>>,
}

impl VectorGridFunction {
    pub fn new(grid: &Grid, partition: Partition, fields: Vec<Vec<f64>>) -> Result<Self> {
        if fields.len() != partition.m() {
            return Err(Error::ShapeMismatch(format!(
                "expected {} component fields, got {}",
                partition.m(),
                fields.len()
            )));
        }
        for (j, f) in fields.iter().enumerate() {
            if f.len() != grid.len() {
                return Err(Error::ShapeMismatch(format!(
                    "component {j} has {} values for {} nodes",
                    f.len(),
                    grid.len()
                )));
            }
            if !f.iter().all(|v| v.is_finite()) {
                return Err(Error::NonFinite {
                    arg: format!("component {j}"),
                });
            }
        }
        Ok(Self { partition, fields })
    }

    /// Interior nodes take `values[j]`, boundary nodes take `datum`.
    pub fn constant(grid: &Grid, partition: Partition, values: &[f64], datum: f64) -> Result<Self> {
        if values.len() != partition.m() {
            return Err(Error::ShapeMismatch(format!(
                "expected {} constants, got {}",
                partition.m(),
                values.len()
            )));
        }
        let fields = values
            .iter()
            .map(|v| {
                (0..grid.len())
                    .map(|n| if grid.is_interior(n) { *v } else { datum })
                    .collect()
            })
            .collect();
        Self::new(grid, partition, fields)
    }

    pub fn zeros(grid: &Grid, partition: Partition) -> Self {
        Self {
            partition,
            fields: vec![vec![0.0; grid.len()]; partition.m()],
        }
    }

    pub fn partition(&self) -> Partition {
        self.partition
    }

    pub fn node_count(&self) -> usize {
        self.fields.first().map_or(0, Vec::len)
    }

    pub fn component(&self, j: usize) -> &[f64] {
        &self.fields[j]
    }

    pub fn component_mut(&mut self, j: usize) -> &mut [f64] {
        &mut self.fields[j]
    }

    pub fn group1(&self) -> &[Vec<f64>] {
        &self.fields[..self.partition.m1()]
    }

    pub fn group2(&self) -> &[Vec<f64>] {
        &self.fields[self.partition.m1()..]
    }

    pub fn fields(&self) -> &[Vec<f64>] {
        &self.fields
    }

    /// The full value vector `(r, s)` at a node.
    pub fn values_at(&self, node: usize) -> Vec<f64> {
        self.fields.iter().map(|f| f[node]).collect()
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        self.fields
            .iter()
            .zip(&other.fields)
            .flat_map(|(a, b)| a.iter().zip(b).map(|(x, y)| (x - y).abs()))
            .fold(0.0, f64::max)
    }

    pub fn same_shape(&self, other: &Self) -> bool {
        self.partition == other.partition && self.node_count() == other.node_count()
    }

    /// CSV with header `x[,y],u1_1..u1_m1,u2_1..u2_m2`, one row per node.
    pub fn to_csv(&self, grid: &Grid) -> String {
        let mut out = String::new();
        let axes = ["x", "y"];
        let mut header: Vec<String> = axes[..grid.dim()].iter().map(|s| s.to_string()).collect();
        header.extend((1..=self.partition.m1()).map(|k| format!("u1_{k}")));
        header.extend((1..=self.partition.m2()).map(|k| format!("u2_{k}")));
        out.push_str(&header.join(","));
        out.push('\n');
        for node in 0..grid.len() {
            let row: Vec<String> = grid
                .point(node)
                .into_iter()
                .chain(self.fields.iter().map(|f| f[node]))
                .map(|v| format!("{v:?}"))
                .collect();
            let _ = writeln!(out, "{}", row.join(","));
        }
        out
    }

    /// Reads the layout written by [`to_csv`](Self::to_csv); coordinates must match the grid.
    pub fn from_csv(grid: &Grid, partition: Partition, text: &str) -> Result<Self> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let header = lines
            .next()
            .ok_or_else(|| Error::ShapeMismatch("empty CSV".into()))?;
        let cols = header.split(',').count();
        let expected = grid.dim() + partition.m();
        if cols != expected {
            return Err(Error::ShapeMismatch(format!(
                "CSV has {cols} columns, expected {expected}"
            )));
        }
        let mut fields = vec![Vec::with_capacity(grid.len()); partition.m()];
        let mut count = 0;
        for (node, line) in lines.enumerate() {
            if node >= grid.len() {
                return Err(Error::ShapeMismatch("CSV has more rows than grid nodes".into()));
            }
            let values: Vec<f64> = line
                .split(',')
                .map(|t| t.trim().parse::<f64>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| Error::ShapeMismatch(format!("row {}: {e}", node + 1)))?;
            if values.len() != expected {
                return Err(Error::ShapeMismatch(format!("row {} has {} columns", node + 1, values.len())));
            }
            let point = grid.point(node);
            let tol = 1e-9 * grid.spacing().iter().fold(1.0f64, |a, h| a.max(*h));
            if point.iter().zip(&values).any(|(a, b)| (a - b).abs() > tol) {
                return Err(Error::ShapeMismatch(format!(
                    "row {} coordinates do not match grid node {point:?}",
                    node + 1
                )));
            }
            for (j, f) in fields.iter_mut().enumerate() {
                f.push(values[grid.dim() + j]);
            }
            count += 1;
        }
        if count != grid.len() {
            return Err(Error::ShapeMismatch(format!(
                "CSV has {count} rows for {} nodes",
                grid.len()
            )));
        }
        Self::new(grid, partition, fields)
    }
}

/// Linear stencil of one component at one node: `diag * u_i + sum w * u_nb`.
#[derive(Debug, Clone, Default)]
pub struct NodeStencil {
    pub diag: f64,
    pub neighbours: Vec<(usize, f64)>,
}

/// A structural-form operator frozen on a grid.
#[derive(Debug, Clone)]
pub struct DiscreteSystem {
    spec: OperatorSpec,
    grid: Grid,
    datum: f64,
    interior: Vec<usize>,
    points: Vec<Vec<f64>>,
    // stencils[j][node]; empty on boundary nodes
    stencils: Vec<Vec<NodeStencil>>,
    sources: Vec<Vec<f64>>,
}

/// Discrete `F_j` at every interior node.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResidualField {
    /// Interior node indices, in grid order.
    pub nodes: Vec<usize>,
    /// `values[j][k]` is the residual of component `j` at `nodes[k]`.
    pub values: Vec<Vec<f64>>,
}

impl ResidualField {
    pub fn max_abs(&self) -> f64 {
        self.values
            .iter()
            .flatten()
            .fold(0.0, |a, v| f64::max(a, v.abs()))
    }

    pub fn component_min(&self, j: usize) -> f64 {
        self.values[j].iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn component_max(&self, j: usize) -> f64 {
        self.values[j].iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }
}

/// Discretizes with zero Dirichlet datum.
pub fn discretize(spec: &OperatorSpec, grid: &Grid) -> Result<DiscreteSystem> {
    discretize_with_datum(spec, grid, 0.0)
}

/// Discretizes with a constant Dirichlet datum.
pub fn discretize_with_datum(spec: &OperatorSpec, grid: &Grid, datum: f64) -> Result<DiscreteSystem> {
    let form = spec.structural_form().ok_or_else(|| Error::MissingStructuralForm {
        operator: spec.name().to_string(),
    })?;
    if spec.dim() != grid.dim() {
        return Err(Error::DimensionMismatch {
            arg: "grid".into(),
            expected: spec.dim(),
            found: grid.dim(),
        });
    }
    let domain = spec.domain();
    let gdom = grid.domain();
    if !(domain.contains(&gdom.lower) && domain.contains(&gdom.upper)) {
        return Err(Error::InvalidArgument {
            arg: "grid".into(),
            reason: "grid box must lie inside the operator domain".into(),
        });
    }
    if !datum.is_finite() {
        return Err(Error::NonFinite { arg: "datum".into() });
    }

    let interior = grid.interior_nodes();
    let points: Vec<Vec<f64>> = (0..grid.len()).map(|n| grid.point(n)).collect();
    let h = grid.spacing();
    let mut stencils = Vec::with_capacity(form.len());
    let mut sources = Vec::with_capacity(form.len());
    for (j, comp) in form.iter().enumerate() {
        let mut per_node = vec![NodeStencil::default(); grid.len()];
        for &node in &interior {
            let x = &points[node];
            let a = comp.diffusion.at(x);
            let b = comp.drift.as_ref().map(|f| f(x));
            let mut st = NodeStencil::default();
            for k in 0..grid.dim() {
                let (minus, plus) = grid.neighbours(node, k);
                let d = a[k] / (h[k] * h[k]);
                let (mut wm, mut wp) = (-d, -d);
                st.diag += 2.0 * d;
                if let Some(b) = &b {
                    let c = b[k] / h[k];
                    if c > 0.0 {
                        st.diag += c;
                        wm -= c;
                    } else {
                        st.diag -= c;
                        wp += c;
                    }
                }
                st.neighbours.push((minus, wm));
                st.neighbours.push((plus, wp));
            }
            check_positive_type(&st, j, node, grid)?;
            per_node[node] = st;
        }
        stencils.push(per_node);
        sources.push(points.iter().map(|x| comp.source.eval(x)).collect());
    }
    Ok(DiscreteSystem {
        spec: spec.clone(),
        grid: grid.clone(),
        datum,
        interior,
        points,
        stencils,
        sources,
    })
}

fn check_positive_type(st: &NodeStencil, component: usize, node: usize, grid: &Grid) -> Result<()> {
    let fail = |reason: String| Error::Positivity {
        component,
        node,
        reason,
        suggested_nodes: 2 * grid.nodes_per_axis().iter().max().copied().unwrap_or(3) - 1,
    };
    if let Some((nb, w)) = st.neighbours.iter().find(|(_, w)| *w > 0.0) {
        return Err(fail(format!("positive off-diagonal weight {w} towards node {nb}")));
    }
    let off: f64 = st.neighbours.iter().map(|(_, w)| -w).sum();
    if st.diag < off * (1.0 - 1e-12) {
        return Err(fail(format!(
            "diagonal weight {} below off-diagonal mass {off}",
            st.diag
        )));
    }
    Ok(())
}

impl DiscreteSystem {
    pub fn spec(&self) -> &OperatorSpec {
        &self.spec
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn partition(&self) -> Partition {
        self.spec.partition()
    }

    pub fn datum(&self) -> f64 {
        self.datum
    }

    pub fn interior(&self) -> &[usize] {
        &self.interior
    }

    pub fn stencil(&self, j: usize, node: usize) -> &NodeStencil {
        &self.stencils[j][node]
    }

    pub fn source(&self, j: usize, node: usize) -> f64 {
        self.sources[j][node]
    }

    pub fn point(&self, node: usize) -> &[f64] {
        &self.points[node]
    }

    /// Largest linear diagonal weight over components and interior nodes.
    pub fn max_diagonal_weight(&self) -> f64 {
        self.stencils
            .iter()
            .flatten()
            .map(|s| s.diag)
            .fold(0.0, f64::max)
    }

    /// A grid function with constant interior values and the Dirichlet datum on the boundary.
    pub fn constant_function(&self, values: &[f64]) -> Result<VectorGridFunction> {
        VectorGridFunction::constant(&self.grid, self.partition(), values, self.datum)
    }

    /// Shape, finiteness and boundary-datum check.
    pub fn validate(&self, u: &VectorGridFunction) -> Result<()> {
        if u.partition() != self.partition() || u.node_count() != self.grid.len() {
            return Err(Error::ShapeMismatch(format!(
                "grid function has partition {:?} and {} nodes; system expects {:?} and {}",
                u.partition(),
                u.node_count(),
                self.partition(),
                self.grid.len()
            )));
        }
        for (j, f) in u.fields().iter().enumerate() {
            if let Some(node) = f.iter().position(|v| !v.is_finite()) {
                return Err(Error::NonFinite {
                    arg: format!("component {j} at node {node}"),
                });
            }
            for node in 0..self.grid.len() {
                if !self.grid.is_interior(node) && f[node] != self.datum {
                    return Err(Error::BoundaryMismatch {
                        node,
                        found: f[node],
                        datum: self.datum,
                    });
                }
            }
        }
        Ok(())
    }

    /// Linear part of component `j` at `node` with own nodal value `t`.
    pub fn linear_part(&self, j: usize, node: usize, own: &[f64], t: f64) -> f64 {
        let st = &self.stencils[j][node];
        st.diag * t + st.neighbours.iter().map(|(nb, w)| w * own[*nb]).sum::<f64>()
    }

    /// Coupling minus source at `node` for the value vector `xi`.
    pub fn pointwise_part(&self, j: usize, node: usize, xi: &[f64]) -> f64 {
        let form = self.spec.structural_form().expect("checked at discretization");
        let (r, s) = self.partition().split(xi);
        (form[j].coupling)(&self.points[node], r, s) - self.sources[j][node]
    }

    /// Discrete `F_j` at an interior node, with the own value replaced by `t`.
    pub fn nodal_residual_with(&self, u: &VectorGridFunction, j: usize, node: usize, t: f64) -> f64 {
        let mut xi = u.values_at(node);
        xi[j] = t;
        self.linear_part(j, node, u.component(j), t) + self.pointwise_part(j, node, &xi)
    }

    pub fn nodal_residual(&self, u: &VectorGridFunction, j: usize, node: usize) -> f64 {
        self.nodal_residual_with(u, j, node, u.component(j)[node])
    }

    /// Residual without input validation.
    pub(crate) fn residual_unchecked(&self, u: &VectorGridFunction) -> ResidualField {
        let m = self.partition().m();
        let mut values = vec![Vec::with_capacity(self.interior.len()); m];
        for &node in &self.interior {
            let xi = u.values_at(node);
            for (j, out) in values.iter_mut().enumerate() {
                out.push(
                    self.linear_part(j, node, u.component(j), xi[j]) + self.pointwise_part(j, node, &xi),
                );
            }
        }
        ResidualField {
            nodes: self.interior.clone(),
            values,
        }
    }

    /// Linear operator of component `j` on all nodes, identity rows on the boundary.
    pub(crate) fn assemble_linear(&self, j: usize) -> BandMatrix {
        let n = self.grid.len();
        let mut a = BandMatrix::zeros(n, self.grid.bandwidth());
        for node in 0..n {
            if self.grid.is_interior(node) {
                let st = &self.stencils[j][node];
                a.add(node, node, st.diag);
                for (nb, w) in &st.neighbours {
                    a.add(node, *nb, *w);
                }
            } else {
                a.add(node, node, 1.0);
            }
        }
        a
    }
}

/// Discrete residual `F_j` at every interior node.
pub fn residual(system: &DiscreteSystem, u: &VectorGridFunction) -> Result<ResidualField> {
    system.validate(u)?;
    Ok(system.residual_unchecked(u))
}
