//! Discrete solution notions.
//!
//! On a monotone scheme a smooth function touching a grid function from below
//! (above) at a node sees exactly the sign of the nodal residual there, so the
//! super-sub / sub-super definitions reduce to sign conditions on
//! [`residual`](crate::grid::residual):
//!
//! * super-sub: group-1 residuals `>= -tol`, group-2 residuals `<= tol`;
//! * sub-super: group-1 residuals `<= tol`, group-2 residuals `>= -tol`;
//! * solution: both, i.e. `max |residual| <= tol`.

use std::fmt;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::grid::{residual, DiscreteSystem, VectorGridFunction};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    SuperSub,
    SubSuper,
    Solution,
    Neither,
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Verdict::SuperSub => "super_sub",
            Verdict::SubSuper => "sub_super",
            Verdict::Solution => "solution",
            Verdict::Neither => "neither",
        })
    }
}

/// Extreme residual values of one component.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ComponentResidual {
    pub component: usize,
    pub group: u8,
    pub min: f64,
    pub max: f64,
    /// Interior node where the component's residual is most unfavourable for
    /// the super-sub reading (smallest for group 1, largest for group 2).
    pub worst_node: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Classification {
    pub verdict: Verdict,
    pub super_sub: bool,
    pub sub_super: bool,
    pub tol: f64,
    pub components: Vec<ComponentResidual>,
}

impl Classification {
    /// Super-sub conditions hold (true also for solutions).
    pub fn is_super_sub(&self) -> bool {
        self.super_sub
    }

    pub fn is_sub_super(&self) -> bool {
        self.sub_super
    }

    /// All components `<= tol`: a subsolution in the fully cooperative sense.
    pub fn cooperative_subsolution(&self) -> bool {
        self.components.iter().all(|c| c.max <= self.tol)
    }

    /// All components `>= -tol`.
    pub fn cooperative_supersolution(&self) -> bool {
        self.components.iter().all(|c| c.min >= -self.tol)
    }
}

pub fn classify(system: &DiscreteSystem, u: &VectorGridFunction, tol: f64) -> Result<Classification> {
    if !(tol >= 0.0) {
        return Err(Error::InvalidArgument {
            arg: "tol".into(),
            reason: format!("must be nonnegative, got {tol}"),
        });
    }
    let res = residual(system, u)?;
    let m1 = system.partition().m1();
    let components: Vec<ComponentResidual> = res
        .values
        .iter()
        .enumerate()
        .map(|(j, vals)| {
            let group1 = j < m1;
            let worst = vals
                .iter()
                .enumerate()
                .fold(0usize, |best, (k, v)| {
                    let better = if group1 { *v < vals[best] } else { *v > vals[best] };
                    if better {
                        k
                    } else {
                        best
                    }
                });
            ComponentResidual {
                component: j,
                group: if group1 { 1 } else { 2 },
                min: res.component_min(j),
                max: res.component_max(j),
                worst_node: res.nodes[worst],
            }
        })
        .collect();

    let super_sub = components.iter().all(|c| {
        if c.group == 1 {
            c.min >= -tol
        } else {
            c.max <= tol
        }
    });
    let sub_super = components.iter().all(|c| {
        if c.group == 1 {
            c.max <= tol
        } else {
            c.min >= -tol
        }
    });
    let verdict = match (super_sub, sub_super) {
        (true, true) => Verdict::Solution,
        (true, false) => Verdict::SuperSub,
        (false, true) => Verdict::SubSuper,
        (false, false) => Verdict::Neither,
    };
    Ok(Classification {
        verdict,
        super_sub,
        sub_super,
        tol,
        components,
    })
}

fn check_same_shape(u: &VectorGridFunction, v: &VectorGridFunction) -> Result<()> {
    if u.same_shape(v) {
        Ok(())
    } else {
        Err(Error::ShapeMismatch(format!(
            "{:?}/{} nodes vs {:?}/{} nodes",
            u.partition(),
            u.node_count(),
            v.partition(),
            v.node_count()
        )))
    }
}

fn combine(
    u: &VectorGridFunction,
    v: &VectorGridFunction,
    g1: fn(f64, f64) -> f64,
    g2: fn(f64, f64) -> f64,
) -> VectorGridFunction {
    let m1 = u.partition().m1();
    let mut w = u.clone();
    for j in 0..u.partition().m() {
        let op = if j < m1 { g1 } else { g2 };
        for (a, b) in w.component_mut(j).iter_mut().zip(v.component(j)) {
            *a = op(*a, *b);
        }
    }
    w
}

fn exact_min(a: f64, b: f64) -> f64 {
    if b < a {
        b
    } else {
        a
    }
}

fn exact_max(a: f64, b: f64) -> f64 {
    if b > a {
        b
    } else {
        a
    }
}

/// `(min(u1, v1), max(u2, v2))` nodewise; preserves the super-sub property.
pub fn lattice_combine_super_sub(u: &VectorGridFunction, v: &VectorGridFunction) -> Result<VectorGridFunction> {
    check_same_shape(u, v)?;
    Ok(combine(u, v, exact_min, exact_max))
}

/// `(max(u1, v1), min(u2, v2))` nodewise; preserves the sub-super property.
pub fn lattice_combine_sub_super(u: &VectorGridFunction, v: &VectorGridFunction) -> Result<VectorGridFunction> {
    check_same_shape(u, v)?;
    Ok(combine(u, v, exact_max, exact_min))
}

/// Nodewise infimum of group 1 and supremum of group 2 over a family.
pub fn family_inf_sup(family: &[VectorGridFunction]) -> Result<VectorGridFunction> {
    let (first, rest) = family.split_first().ok_or(Error::EmptyFamily)?;
    rest.iter()
        .try_fold(first.clone(), |acc, v| lattice_combine_super_sub(&acc, v))
}

/// Dual of [`family_inf_sup`]: supremum of group 1, infimum of group 2.
pub fn family_sup_inf(family: &[VectorGridFunction]) -> Result<VectorGridFunction> {
    let (first, rest) = family.split_first().ok_or(Error::EmptyFamily)?;
    rest.iter()
        .try_fold(first.clone(), |acc, v| lattice_combine_sub_super(&acc, v))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OrderingViolation {
    pub node: usize,
    pub component: usize,
    /// Amount by which the expected ordering fails (before subtracting `tol`).
    pub excess: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ComparisonReport {
    pub holds: bool,
    pub tol: f64,
    /// Largest of `u1 - v1` and `v2 - u2` over all nodes and components.
    pub max_excess: f64,
    pub worst: Option<OrderingViolation>,
}

/// Ordering check `u1 <= v1 + tol`, `v2 <= u2 + tol` without classification.
pub fn ordering(u_sub_super: &VectorGridFunction, v_super_sub: &VectorGridFunction, tol: f64) -> Result<ComparisonReport> {
    check_same_shape(u_sub_super, v_super_sub)?;
    let m1 = u_sub_super.partition().m1();
    let mut max_excess = f64::NEG_INFINITY;
    let mut worst = None;
    for j in 0..u_sub_super.partition().m() {
        let (a, b) = (u_sub_super.component(j), v_super_sub.component(j));
        for node in 0..a.len() {
            let excess = if j < m1 { a[node] - b[node] } else { b[node] - a[node] };
            if excess > max_excess {
                max_excess = excess;
                worst = Some(OrderingViolation {
                    node,
                    component: j,
                    excess,
                });
            }
        }
    }
    let holds = max_excess <= tol;
    Ok(ComparisonReport {
        holds,
        tol,
        max_excess,
        worst: if holds { None } else { worst },
    })
}

/// Comparison verdict between a sub-super and a super-sub grid function.
///
/// Both inputs are classified first; a misclassified input is rejected with
/// its classification attached.
pub fn compare_orderings(
    system: &DiscreteSystem,
    u_sub_super: &VectorGridFunction,
    v_super_sub: &VectorGridFunction,
    tol: f64,
) -> Result<ComparisonReport> {
    let cu = classify(system, u_sub_super, tol)?;
    if !cu.is_sub_super() {
        return Err(Error::Misclassified {
            arg: "u_sub_super".into(),
            expected: "sub_super".into(),
            verdict: cu.verdict.to_string(),
            classification: Box::new(cu),
        });
    }
    let cv = classify(system, v_super_sub, tol)?;
    if !cv.is_super_sub() {
        return Err(Error::Misclassified {
            arg: "v_super_sub".into(),
            expected: "super_sub".into(),
            verdict: cv.verdict.to_string(),
            classification: Box::new(cv),
        });
    }
    ordering(u_sub_super, v_super_sub, tol)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{build_grid, discretize};
    use crate::operator::{make_competitive, DataFn};

    fn system(f: f64, g: f64) -> DiscreteSystem {
        let spec = make_competitive(1.0, 1.0, 1.0, DataFn::constant(f), DataFn::constant(g), 1).unwrap();
        discretize(&spec, &build_grid(1, &[(0.0, 1.0)], &[21]).unwrap()).unwrap()
    }

    #[test]
    fn zero_field_is_a_solution() {
        let sys = system(0.0, 0.0);
        let u = VectorGridFunction::zeros(sys.grid(), sys.partition());
        let c = classify(&sys, &u, 1e-10).unwrap();
        assert_eq!(c.verdict, Verdict::Solution);
        assert!(c.cooperative_subsolution() && c.cooperative_supersolution());
    }

    #[test]
    fn sign_patterns() {
        let sys = system(1.0, 1.0);
        // large u, zero v: F1 > 0, F2 = β·u - g > 0 → super for u but v not sub
        let big_u = sys.constant_function(&[5.0, 0.0]).unwrap();
        assert_eq!(classify(&sys, &big_u, 1e-8).unwrap().verdict, Verdict::Neither);
        // zero u, large v: F1 = α v - 1 > 0, F2 > 0: sub-super needs F1 <= 0
        let zero = sys.constant_function(&[0.0, 0.0]).unwrap();
        let c = classify(&sys, &zero, 1e-8).unwrap();
        // F1 = F2 = -1 < 0 everywhere: group 1 sub, group 2 sub → sub_super fails on group 2
        assert_eq!(c.verdict, Verdict::Neither);
        assert!(c.cooperative_subsolution());
        let super_super = sys.constant_function(&[5.0, 5.0]).unwrap();
        let c = classify(&sys, &super_super, 1e-8).unwrap();
        assert!(c.components.iter().all(|r| r.min > 0.0));
        assert_eq!(c.verdict, Verdict::Neither);
    }

    #[test]
    fn lattice_idempotence_and_absorption() {
        let sys = system(1.0, 1.0);
        let u = sys.constant_function(&[0.2, 0.7]).unwrap();
        let v = sys.constant_function(&[0.5, 0.3]).unwrap();
        assert_eq!(lattice_combine_super_sub(&u, &u).unwrap(), u);
        assert_eq!(lattice_combine_sub_super(&u, &u).unwrap(), u);
        // u1 <= v1, u2 >= v2 → super-sub combination returns u
        assert_eq!(lattice_combine_super_sub(&u, &v).unwrap(), u);
        // mirrored absorption
        assert_eq!(lattice_combine_sub_super(&v, &u).unwrap(), v);
    }

    #[test]
    fn family_operations() {
        let sys = system(1.0, 1.0);
        let u = sys.constant_function(&[0.2, 0.7]).unwrap();
        assert_eq!(family_inf_sup(std::slice::from_ref(&u)).unwrap(), u);
        assert_eq!(family_inf_sup(&vec![u.clone(); 4]).unwrap(), u);
        assert!(matches!(family_inf_sup(&[]), Err(Error::EmptyFamily)));
        let v = sys.constant_function(&[0.5, 0.3]).unwrap();
        let w = family_inf_sup(&[v.clone(), u.clone()]).unwrap();
        assert_eq!(w.component(0)[3], 0.2);
        assert_eq!(w.component(1)[3], 0.7);
        let w = family_sup_inf(&[v, u]).unwrap();
        assert_eq!(w.component(0)[3], 0.5);
        assert_eq!(w.component(1)[3], 0.3);
    }

    #[test]
    fn shape_mismatch_rejected() {
        let sys = system(1.0, 1.0);
        let u = sys.constant_function(&[0.2, 0.7]).unwrap();
        let other = VectorGridFunction::zeros(&build_grid(1, &[(0.0, 1.0)], &[5]).unwrap(), sys.partition());
        assert!(lattice_combine_super_sub(&u, &other).is_err());
        assert!(ordering(&u, &other, 0.0).is_err());
    }

    #[test]
    fn compare_rejects_misclassified_input() {
        let sys = system(1.0, 1.0);
        let bad = sys.constant_function(&[5.0, 0.0]).unwrap();
        let zero = VectorGridFunction::zeros(sys.grid(), sys.partition());
        let err = compare_orderings(&sys, &bad, &zero, 1e-8).unwrap_err();
        assert!(matches!(err, Error::Misclassified { ref arg, .. } if arg == "u_sub_super"));
    }
}
