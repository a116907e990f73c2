//! Weakly coupled operators `F_j(x, r, s, p, X)`.
//!
//! Component `j` sees the gradient and Hessian of its own unknown only; the
//! other unknowns enter through their pointwise values, split into the group-1
//! vector `r` (length `m1`) and the group-2 vector `s` (length `m2`).

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Split of the `m` components into a cooperative group 1 and a competing group 2.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Partition {
    m1: usize,
    m2: usize,
}

impl Partition {
    pub fn new(m1: usize, m2: usize) -> Result<Self> {
        if m1 == 0 {
            return Err(Error::InvalidArgument {
                arg: "m1".into(),
                reason: "group 1 must contain at least one component".into(),
            });
        }
        Ok(Self { m1, m2 })
    }

    pub fn m1(&self) -> usize {
        self.m1
    }

    pub fn m2(&self) -> usize {
        self.m2
    }

    pub fn m(&self) -> usize {
        self.m1 + self.m2
    }

    /// Whether the global component index belongs to group 1.
    pub fn in_group1(&self, j: usize) -> bool {
        j < self.m1
    }

    /// Splits a full value vector `xi` into `(r, s)`.
    pub fn split<'a>(&self, xi: &'a [f64]) -> (&'a [f64], &'a [f64]) {
        xi.split_at(self.m1)
    }
}

/// Real symmetric `dim x dim` matrix stored densely (row major).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Vec<f64>>", into = "Vec<Vec<f64>>")]
pub struct SymmetricMatrix {
    dim: usize,
    entries: Vec<f64>,
}

impl SymmetricMatrix {
    pub fn zeros(dim: usize) -> Self {
        Self {
            dim,
            entries: vec![0.0; dim * dim],
        }
    }

    pub fn from_diagonal(diag: &[f64]) -> Self {
        let dim = diag.len();
        let mut m = Self::zeros(dim);
        for (i, d) in diag.iter().enumerate() {
            m.entries[i * dim + i] = *d;
        }
        m
    }

    /// Builds from rows; fails unless `rows[i][j] == rows[j][i]` exactly.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let dim = rows.len();
        let mut entries = Vec::with_capacity(dim * dim);
        for row in rows {
            if row.len() != dim {
                return Err(Error::DimensionMismatch {
                    arg: "X".into(),
                    expected: dim,
                    found: row.len(),
                });
            }
            entries.extend_from_slice(row);
        }
        for i in 0..dim {
            for j in (i + 1)..dim {
                if entries[i * dim + j] != entries[j * dim + i] {
                    return Err(Error::InvalidArgument {
                        arg: "X".into(),
                        reason: format!("entry ({i},{j}) differs from ({j},{i})"),
                    });
                }
            }
        }
        Ok(Self { dim, entries })
    }

    /// `Q diag(eigs) Q^T` with `Q` the rotation by `angle` (dim 2) or identity (dim 1).
    pub fn from_spectral(eigs: &[f64], angle: f64) -> Self {
        match eigs.len() {
            2 => {
                let (sn, cs) = angle.sin_cos();
                let a = cs * cs * eigs[0] + sn * sn * eigs[1];
                let d = sn * sn * eigs[0] + cs * cs * eigs[1];
                let b = cs * sn * (eigs[0] - eigs[1]);
                Self {
                    dim: 2,
                    entries: vec![a, b, b, d],
                }
            }
            _ => Self::from_diagonal(eigs),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[i * self.dim + j]
    }

    pub fn trace(&self) -> f64 {
        (0..self.dim).map(|i| self.get(i, i)).sum()
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.dim).map(|i| self.get(i, i)).collect()
    }

    pub fn add(&self, other: &Self) -> Self {
        Self {
            dim: self.dim,
            entries: self
                .entries
                .iter()
                .zip(&other.entries)
                .map(|(a, b)| a + b)
                .collect(),
        }
    }

    pub fn neg(&self) -> Self {
        Self {
            dim: self.dim,
            entries: self.entries.iter().map(|a| -a).collect(),
        }
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        self.entries.chunks(self.dim.max(1)).map(<[f64]>::to_vec).collect()
    }

    fn is_finite(&self) -> bool {
        self.entries.iter().all(|v| v.is_finite())
    }
}

impl TryFrom<Vec<Vec<f64>>> for SymmetricMatrix {
    type Error = Error;

    fn try_from(rows: Vec<Vec<f64>>) -> Result<Self> {
        Self::from_rows(&rows)
    }
}

impl From<SymmetricMatrix> for Vec<Vec<f64>> {
    fn from(m: SymmetricMatrix) -> Self {
        m.rows()
    }
}

/// Axis-aligned box `[lower_k, upper_k]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoxDomain {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl BoxDomain {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        if lower.len() != upper.len() || lower.is_empty() || lower.len() > 2 {
            return Err(Error::InvalidArgument {
                arg: "bounds".into(),
                reason: "expected one or two axes with matching lower/upper bounds".into(),
            });
        }
        for (k, (lo, hi)) in lower.iter().zip(&upper).enumerate() {
            if !(lo.is_finite() && hi.is_finite() && lo < hi) {
                return Err(Error::InvalidArgument {
                    arg: format!("bounds[{k}]"),
                    reason: format!("need finite low < high, got [{lo}, {hi}]"),
                });
            }
        }
        Ok(Self { lower, upper })
    }

    pub fn unit(dim: usize) -> Self {
        Self {
            lower: vec![0.0; dim],
            upper: vec![1.0; dim],
        }
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.len() == self.dim()
            && x
                .iter()
                .zip(self.lower.iter().zip(&self.upper))
                .all(|(v, (lo, hi))| *lo <= *v && *v <= *hi)
    }

    /// Uniform lattice with `per_axis` points per axis, used for data validation.
    pub fn lattice(&self, per_axis: usize) -> Vec<Vec<f64>> {
        let coord = |k: usize, i: usize| {
            self.lower[k] + (self.upper[k] - self.lower[k]) * i as f64 / (per_axis - 1) as f64
        };
        match self.dim() {
            1 => (0..per_axis).map(|i| vec![coord(0, i)]).collect(),
            _ => (0..per_axis)
                .flat_map(|i| (0..per_axis).map(move |j| (i, j)))
                .map(|(i, j)| vec![coord(0, i), coord(1, j)])
                .collect(),
        }
    }
}

pub type ScalarFn = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;
pub type VectorFn = Arc<dyn Fn(&[f64]) -> Vec<f64> + Send + Sync>;
/// `(x, r, s, p, X) -> F_j`.
pub type ComponentFn =
    Arc<dyn Fn(&[f64], &[f64], &[f64], &[f64], &SymmetricMatrix) -> f64 + Send + Sync>;
/// `(x, r, s) -> c_j`.
pub type CouplingFn = Arc<dyn Fn(&[f64], &[f64], &[f64]) -> f64 + Send + Sync>;

/// Data functions from a fixed catalog, plus arbitrary callables.
#[derive(Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DataFn {
    Constant {
        value: f64,
    },
    /// `offset + slope . x`
    Affine {
        offset: f64,
        slope: Vec<f64>,
    },
    /// `amplitude * prod_k sin(frequency * pi * x_k)`
    ProductOfSines {
        amplitude: f64,
        #[serde(default = "one")]
        frequency: f64,
    },
    /// `amplitude * exp(-|x - center|^2 / (2 width^2))`
    GaussianBump {
        amplitude: f64,
        center: Vec<f64>,
        width: f64,
    },
    #[serde(skip)]
    Custom(ScalarFn),
}

fn one() -> f64 {
    1.0
}

impl DataFn {
    pub fn constant(value: f64) -> Self {
        DataFn::Constant { value }
    }

    pub fn custom(f: impl Fn(&[f64]) -> f64 + Send + Sync + 'static) -> Self {
        DataFn::Custom(Arc::new(f))
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        match self {
            DataFn::Constant { value } => *value,
            DataFn::Affine { offset, slope } => {
                offset + slope.iter().zip(x).map(|(a, b)| a * b).sum::<f64>()
            }
            DataFn::ProductOfSines {
                amplitude,
                frequency,
            } => amplitude * x.iter().map(|v| (frequency * PI * v).sin()).product::<f64>(),
            DataFn::GaussianBump {
                amplitude,
                center,
                width,
            } => {
                let d2: f64 = x.iter().zip(center).map(|(a, b)| (a - b) * (a - b)).sum();
                amplitude * (-d2 / (2.0 * width * width)).exp()
            }
            DataFn::Custom(f) => f(x),
        }
    }

    fn validate(&self, arg: &str, dim: usize) -> Result<()> {
        let bad = |reason: &str| Error::InvalidArgument {
            arg: arg.into(),
            reason: reason.into(),
        };
        match self {
            DataFn::Constant { value } if !value.is_finite() => Err(bad("non-finite value")),
            DataFn::Affine { slope, .. } if slope.len() != dim => {
                Err(bad("slope length must match the spatial dimension"))
            }
            DataFn::GaussianBump { center, width, .. } => {
                if center.len() != dim {
                    Err(bad("center length must match the spatial dimension"))
                } else if !(*width > 0.0) {
                    Err(bad("width must be positive"))
                } else {
                    Ok(())
                }
            }
            _ => Ok(()),
        }
    }
}

impl fmt::Debug for DataFn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DataFn::Custom(_) => f.write_str("Custom(<fn>)"),
            other => f.write_str(&serde_json::to_string(other).unwrap_or_default()),
        }
    }
}

/// Diagonal diffusion matrix `A_j(x)`.
#[derive(Clone)]
pub enum Diffusion {
    Constant(Vec<f64>),
    Variable(VectorFn),
}

impl Diffusion {
    pub fn at(&self, x: &[f64]) -> Vec<f64> {
        match self {
            Diffusion::Constant(a) => a.clone(),
            Diffusion::Variable(f) => f(x),
        }
    }
}

/// Declared decomposition
/// `F_j = -trace(A_j(x) X) + b_j(x) . p + c_j(x, r, s) - source_j(x)`.
///
/// The drift term is the only first-order term supported; it is discretized
/// by upwinding on the sign of `b_j`.
#[derive(Clone)]
pub struct StructuralComponent {
    pub diffusion: Diffusion,
    pub drift: Option<VectorFn>,
    pub coupling: CouplingFn,
    pub source: DataFn,
}

impl StructuralComponent {
    pub fn eval(
        &self,
        x: &[f64],
        r: &[f64],
        s: &[f64],
        p: &[f64],
        hess: &SymmetricMatrix,
    ) -> f64 {
        let a = self.diffusion.at(x);
        let second: f64 = a.iter().enumerate().map(|(k, ak)| ak * hess.get(k, k)).sum();
        let first: f64 = match &self.drift {
            Some(b) => b(x).iter().zip(p).map(|(bk, pk)| bk * pk).sum(),
            None => 0.0,
        };
        -second + first + (self.coupling)(x, r, s) - self.source.eval(x)
    }
}

/// Which constructor produced the operator; barrier construction keys off this.
#[derive(Debug, Clone)]
pub enum OperatorFamily {
    Competitive {
        lambda: f64,
        alpha: f64,
        beta: f64,
        f: DataFn,
        g: DataFn,
    },
    DiagonalLinear {
        lambdas: Vec<f64>,
        data: Vec<DataFn>,
    },
    Custom,
}

/// An `m`-component weakly coupled operator on a box domain.
#[derive(Clone)]
pub struct OperatorSpec {
    name: String,
    partition: Partition,
    domain: BoxDomain,
    components: Vec<ComponentFn>,
    structural: Option<Vec<StructuralComponent>>,
    family: OperatorFamily,
    params: BTreeMap<String, f64>,
}

impl fmt::Debug for OperatorSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("OperatorSpec")
            .field("name", &self.name)
            .field("partition", &self.partition)
            .field("domain", &self.domain)
            .field("structural", &self.structural.is_some())
            .field("family", &self.family)
            .finish()
    }
}

impl OperatorSpec {
    /// A user operator given by component evaluators.
    pub fn custom(
        name: impl Into<String>,
        partition: Partition,
        domain: BoxDomain,
        components: Vec<ComponentFn>,
    ) -> Result<Self> {
        if components.len() != partition.m() {
            return Err(Error::DimensionMismatch {
                arg: "components".into(),
                expected: partition.m(),
                found: components.len(),
            });
        }
        Ok(Self {
            name: name.into(),
            partition,
            domain,
            components,
            structural: None,
            family: OperatorFamily::Custom,
            params: BTreeMap::new(),
        })
    }

    /// Attaches the decomposition used by the discretization.
    pub fn with_structural_form(mut self, form: Vec<StructuralComponent>) -> Result<Self> {
        if form.len() != self.partition.m() {
            return Err(Error::DimensionMismatch {
                arg: "structural_form".into(),
                expected: self.partition.m(),
                found: form.len(),
            });
        }
        self.structural = Some(form);
        Ok(self)
    }

    /// Moves the operator to another box; built-in data is re-validated there.
    pub fn with_domain(mut self, domain: BoxDomain) -> Result<Self> {
        if domain.dim() != self.dim() {
            return Err(Error::DimensionMismatch {
                arg: "domain".into(),
                expected: self.dim(),
                found: domain.dim(),
            });
        }
        match &self.family {
            OperatorFamily::Competitive { f, g, .. } => {
                check_nonnegative(f, "f", &domain)?;
                check_nonnegative(g, "g", &domain)?;
            }
            OperatorFamily::DiagonalLinear { .. } | OperatorFamily::Custom => {}
        }
        self.domain = domain;
        Ok(self)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn partition(&self) -> Partition {
        self.partition
    }

    pub fn m(&self) -> usize {
        self.partition.m()
    }

    pub fn dim(&self) -> usize {
        self.domain.dim()
    }

    pub fn domain(&self) -> &BoxDomain {
        &self.domain
    }

    pub fn family(&self) -> &OperatorFamily {
        &self.family
    }

    pub fn params(&self) -> &BTreeMap<String, f64> {
        &self.params
    }

    pub fn structural_form(&self) -> Option<&[StructuralComponent]> {
        self.structural.as_deref()
    }

    /// `F_j(x, r, s, p, X)` with full argument validation.
    pub fn evaluate(
        &self,
        j: usize,
        x: &[f64],
        r: &[f64],
        s: &[f64],
        p: &[f64],
        hess: &SymmetricMatrix,
    ) -> Result<f64> {
        if j >= self.m() {
            return Err(Error::IndexOutOfRange {
                index: j,
                m: self.m(),
            });
        }
        let dim = self.dim();
        for (arg, len, expected) in [
            ("x", x.len(), dim),
            ("r", r.len(), self.partition.m1()),
            ("s", s.len(), self.partition.m2()),
            ("p", p.len(), dim),
            ("X", hess.dim(), dim),
        ] {
            if len != expected {
                return Err(Error::DimensionMismatch {
                    arg: arg.into(),
                    expected,
                    found: len,
                });
            }
        }
        for (arg, v) in [("x", x), ("r", r), ("s", s), ("p", p)] {
            if !v.iter().all(|t| t.is_finite()) {
                return Err(Error::NonFinite { arg: arg.into() });
            }
        }
        if !hess.is_finite() {
            return Err(Error::NonFinite { arg: "X".into() });
        }
        if !self.domain.contains(x) {
            return Err(Error::OutsideDomain { point: x.to_vec() });
        }
        Ok(self.eval(j, x, r, s, p, hess))
    }

    /// Unchecked evaluation for hot loops; arguments must already be valid.
    pub fn eval(
        &self,
        j: usize,
        x: &[f64],
        r: &[f64],
        s: &[f64],
        p: &[f64],
        hess: &SymmetricMatrix,
    ) -> f64 {
        (self.components[j])(x, r, s, p, hess)
    }

    /// Evaluation with the full value vector `xi = (r, s)`.
    pub fn eval_full(
        &self,
        j: usize,
        x: &[f64],
        xi: &[f64],
        p: &[f64],
        hess: &SymmetricMatrix,
    ) -> f64 {
        let (r, s) = self.partition.split(xi);
        self.eval(j, x, r, s, p, hess)
    }

    /// Evaluation through the declared decomposition, if any.
    pub fn eval_structural(
        &self,
        j: usize,
        x: &[f64],
        r: &[f64],
        s: &[f64],
        p: &[f64],
        hess: &SymmetricMatrix,
    ) -> Option<f64> {
        self.structural.as_ref().map(|form| form[j].eval(x, r, s, p, hess))
    }
}

fn check_positive(value: f64, arg: &str) -> Result<()> {
    if value > 0.0 && value.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidArgument {
            arg: arg.into(),
            reason: format!("must be a positive finite number, got {value}"),
        })
    }
}

fn check_nonnegative(data: &DataFn, arg: &str, domain: &BoxDomain) -> Result<()> {
    data.validate(arg, domain.dim())?;
    for x in domain.lattice(33) {
        let v = data.eval(&x);
        if !(v >= 0.0) {
            return Err(Error::InvalidArgument {
                arg: arg.into(),
                reason: format!("data must be nonnegative, found {v} at {x:?}"),
            });
        }
    }
    Ok(())
}

/// The two-species competitive system
/// `-Δu + λu + α max(u, v) - f = 0`, `-Δv + λv + β max(u, v) - g = 0`
/// on the unit box, partition `(1, 1)`.
pub fn make_competitive(
    lambda: f64,
    alpha: f64,
    beta: f64,
    f: DataFn,
    g: DataFn,
    dim: usize,
) -> Result<OperatorSpec> {
    check_positive(lambda, "lambda")?;
    check_positive(alpha, "alpha")?;
    check_positive(beta, "beta")?;
    check_dim(dim)?;
    let domain = BoxDomain::unit(dim);
    check_nonnegative(&f, "f", &domain)?;
    check_nonnegative(&g, "g", &domain)?;

    let (f1, g1) = (f.clone(), g.clone());
    let components: Vec<ComponentFn> = vec![
        Arc::new(move |x, r, s, _p, hess| {
            -hess.trace() + lambda * r[0] + alpha * r[0].max(s[0]) - f1.eval(x)
        }),
        Arc::new(move |x, r, s, _p, hess| {
            -hess.trace() + lambda * s[0] + beta * r[0].max(s[0]) - g1.eval(x)
        }),
    ];
    let form = vec![
        StructuralComponent {
            diffusion: Diffusion::Constant(vec![1.0; dim]),
            drift: None,
            coupling: Arc::new(move |_x, r, s| lambda * r[0] + alpha * f64::max(r[0], s[0])),
            source: f.clone(),
        },
        StructuralComponent {
            diffusion: Diffusion::Constant(vec![1.0; dim]),
            drift: None,
            coupling: Arc::new(move |_x, r, s| lambda * s[0] + beta * f64::max(r[0], s[0])),
            source: g.clone(),
        },
    ];
    let mut spec = OperatorSpec::custom("competitive", Partition::new(1, 1)?, domain, components)?
        .with_structural_form(form)?;
    spec.family = OperatorFamily::Competitive {
        lambda,
        alpha,
        beta,
        f,
        g,
    };
    spec.params = BTreeMap::from([
        ("alpha".to_string(), alpha),
        ("beta".to_string(), beta),
        ("lambda".to_string(), lambda),
    ]);
    Ok(spec)
}

/// Uncoupled family `F_j = -trace(X) + λ_j u_j - data_j(x)` on the unit box.
pub fn make_diagonal_linear(
    lambdas: &[f64],
    data: Vec<DataFn>,
    partition: Partition,
    dim: usize,
) -> Result<OperatorSpec> {
    check_dim(dim)?;
    let m = partition.m();
    if lambdas.len() != m {
        return Err(Error::DimensionMismatch {
            arg: "lambdas".into(),
            expected: m,
            found: lambdas.len(),
        });
    }
    if data.len() != m {
        return Err(Error::DimensionMismatch {
            arg: "data".into(),
            expected: m,
            found: data.len(),
        });
    }
    for (j, l) in lambdas.iter().enumerate() {
        check_positive(*l, &format!("lambdas[{j}]"))?;
    }
    for (j, d) in data.iter().enumerate() {
        d.validate(&format!("data[{j}]"), dim)?;
    }

    let own = move |j: usize, r: &[f64], s: &[f64]| -> f64 {
        if j < partition.m1() {
            r[j]
        } else {
            s[j - partition.m1()]
        }
    };
    let mut components: Vec<ComponentFn> = Vec::with_capacity(m);
    let mut form = Vec::with_capacity(m);
    for j in 0..m {
        let lambda = lambdas[j];
        let d = data[j].clone();
        components.push(Arc::new(move |x, r, s, _p, hess| {
            -hess.trace() + lambda * own(j, r, s) - d.eval(x)
        }));
        form.push(StructuralComponent {
            diffusion: Diffusion::Constant(vec![1.0; dim]),
            drift: None,
            coupling: Arc::new(move |_x, r, s| lambda * own(j, r, s)),
            source: data[j].clone(),
        });
    }
    let mut spec = OperatorSpec::custom("diagonal_linear", partition, BoxDomain::unit(dim), components)?
        .with_structural_form(form)?;
    spec.params = lambdas
        .iter()
        .enumerate()
        .map(|(j, l)| (format!("lambda_{}", j + 1), *l))
        .collect();
    spec.family = OperatorFamily::DiagonalLinear {
        lambdas: lambdas.to_vec(),
        data,
    };
    Ok(spec)
}

fn check_dim(dim: usize) -> Result<()> {
    if dim == 1 || dim == 2 {
        Ok(())
    } else {
        Err(Error::InvalidArgument {
            arg: "dim".into(),
            reason: format!("spatial dimension must be 1 or 2, got {dim}"),
        })
    }
}
