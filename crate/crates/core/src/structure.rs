//! Sampled verification of the structural hypotheses.
//!
//! Every check draws a deterministic pseudo-random stream of argument tuples
//! from a seeded ChaCha generator, tests one inequality per draw and records
//! the first violation as a [`Witness`]. A failed report can always be
//! re-checked with [`Witness::reproduce`].

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::operator::{BoxDomain, Diffusion, OperatorSpec, SymmetricMatrix};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SamplerConfig {
    pub sample_count: usize,
    pub value_range: (f64, f64),
    pub gradient_range: (f64, f64),
    /// Sampled Hessians have eigenvalues in `[-matrix_scale, matrix_scale]`.
    pub matrix_scale: f64,
    pub seed: u64,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        Self {
            sample_count: 10_000,
            value_range: (-5.0, 5.0),
            gradient_range: (-5.0, 5.0),
            matrix_scale: 5.0,
            seed: 0,
        }
    }
}

impl SamplerConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |arg: &str, reason: &str| {
            Err(Error::InvalidArgument {
                arg: arg.into(),
                reason: reason.into(),
            })
        };
        if self.sample_count == 0 {
            return bad("sample_count", "must be at least 1");
        }
        for (arg, (lo, hi)) in [("value_range", self.value_range), ("gradient_range", self.gradient_range)] {
            if !(lo.is_finite() && hi.is_finite() && lo < hi) {
                return bad(arg, "need finite low < high");
            }
        }
        if !(self.matrix_scale > 0.0 && self.matrix_scale.is_finite()) {
            return bad("matrix_scale", "must be positive and finite");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Condition {
    Ellipticity,
    Mon1,
    Mon2,
    Monorig,
    CondI,
    CondIPrime,
    CondIi,
}

/// One full argument tuple `(x, r, s, p, X)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ArgTuple {
    pub x: Vec<f64>,
    pub r: Vec<f64>,
    pub s: Vec<f64>,
    pub p: Vec<f64>,
    pub hessian: SymmetricMatrix,
}

impl ArgTuple {
    fn eval(&self, spec: &OperatorSpec, j: usize) -> f64 {
        spec.eval(j, &self.x, &self.r, &self.s, &self.p, &self.hessian)
    }
}

/// A violation of `F_j(a) <= F_j(b) + offset` (or `<` when `strict`).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Witness {
    pub component: usize,
    pub a: ArgTuple,
    pub b: ArgTuple,
    pub value_a: f64,
    pub value_b: f64,
    pub offset: f64,
    pub strict: bool,
}

impl Witness {
    fn new(spec: &OperatorSpec, component: usize, a: ArgTuple, b: ArgTuple, offset: f64, strict: bool) -> Self {
        let value_a = a.eval(spec, component);
        let value_b = b.eval(spec, component);
        Self {
            component,
            a,
            b,
            value_a,
            value_b,
            offset,
            strict,
        }
    }

    /// Whether the stored values violate the expected inequality.
    pub fn is_violation(&self) -> bool {
        let rhs = self.value_b + self.offset;
        if self.strict {
            !(self.value_a < rhs)
        } else {
            !(self.value_a <= rhs)
        }
    }

    /// Re-evaluates both tuples; true iff the values match and still violate.
    pub fn reproduce(&self, spec: &OperatorSpec) -> bool {
        let va = self.a.eval(spec, self.component);
        let vb = self.b.eval(spec, self.component);
        va.to_bits() == self.value_a.to_bits() && vb.to_bits() == self.value_b.to_bits() && self.is_violation()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckReport {
    pub condition: Condition,
    pub passed: bool,
    pub samples_tested: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub witness: Option<Witness>,
    /// Conditions i / i': smallest observed margin ratio. Condition ii:
    /// largest observed excess over the candidate modulus.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub empirical_constant: Option<f64>,
    /// Condition ii: slope `L` of the candidate modulus `ω(t) = L t`, an estimate.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub modulus_slope: Option<f64>,
}

impl CheckReport {
    fn new(condition: Condition) -> Self {
        Self {
            condition,
            passed: true,
            samples_tested: 0,
            witness: None,
            empirical_constant: None,
            modulus_slope: None,
        }
    }

    fn record(&mut self, witness: Witness) {
        if witness.is_violation() {
            self.passed = false;
            if self.witness.is_none() {
                self.witness = Some(witness);
            }
        }
    }
}

struct Sampler<'a> {
    rng: ChaCha8Rng,
    cfg: &'a SamplerConfig,
    domain: &'a BoxDomain,
}

impl<'a> Sampler<'a> {
    fn new(cfg: &'a SamplerConfig, domain: &'a BoxDomain, stream: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        rng.set_stream(stream);
        Self { rng, cfg, domain }
    }

    fn uniform(&mut self, (lo, hi): (f64, f64)) -> f64 {
        lo + (hi - lo) * self.rng.gen::<f64>()
    }

    fn point(&mut self) -> Vec<f64> {
        let (lower, upper) = (&self.domain.lower, &self.domain.upper);
        (0..lower.len())
            .map(|k| lower[k] + (upper[k] - lower[k]) * self.rng.gen::<f64>())
            .collect()
    }

    fn values(&mut self, n: usize) -> Vec<f64> {
        (0..n).map(|_| self.uniform(self.cfg.value_range)).collect()
    }

    fn gradient(&mut self, dim: usize) -> Vec<f64> {
        (0..dim).map(|_| self.uniform(self.cfg.gradient_range)).collect()
    }

    fn matrix(&mut self, dim: usize, lo: f64, hi: f64) -> SymmetricMatrix {
        let eigs: Vec<f64> = (0..dim).map(|_| self.uniform((lo, hi))).collect();
        let angle = self.uniform((0.0, std::f64::consts::PI));
        SymmetricMatrix::from_spectral(&eigs, angle)
    }

    fn hessian(&mut self, dim: usize) -> SymmetricMatrix {
        let s = self.cfg.matrix_scale;
        self.matrix(dim, -s, s)
    }

    /// Nonnegative increment; entry `fixed` is zero, others are zero with probability 1/4.
    fn increment(&mut self, n: usize, fixed: Option<usize>) -> Vec<f64> {
        let half = 0.5 * (self.cfg.value_range.1 - self.cfg.value_range.0);
        (0..n)
            .map(|k| {
                let u: f64 = self.rng.gen();
                let v: f64 = self.rng.gen();
                if Some(k) == fixed || u < 0.25 {
                    0.0
                } else {
                    half * v
                }
            })
            .collect()
    }
}

fn add(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x + y).collect()
}

fn tuple(x: &[f64], r: &[f64], s: &[f64], p: &[f64], hessian: &SymmetricMatrix) -> ArgTuple {
    ArgTuple {
        x: x.to_vec(),
        r: r.to_vec(),
        s: s.to_vec(),
        p: p.to_vec(),
        hessian: hessian.clone(),
    }
}

/// `F_j(x, r, p, X) >= F_j(x, r, p, Y)` whenever `X <= Y`.
pub fn check_ellipticity(spec: &OperatorSpec, cfg: &SamplerConfig) -> Result<CheckReport> {
    cfg.validate()?;
    let (m1, m2, dim) = (spec.partition().m1(), spec.partition().m2(), spec.dim());
    let mut smp = Sampler::new(cfg, spec.domain(), 1);
    let mut report = CheckReport::new(Condition::Ellipticity);
    for _ in 0..cfg.sample_count {
        let x = smp.point();
        let r = smp.values(m1);
        let s = smp.values(m2);
        let p = smp.gradient(dim);
        let hx = smp.hessian(dim);
        let psd = smp.matrix(dim, 0.0, cfg.matrix_scale);
        let hy = hx.add(&psd);
        for j in 0..spec.m() {
            report.record(Witness::new(spec, j, tuple(&x, &r, &s, &p, &hy), tuple(&x, &r, &s, &p, &hx), 0.0, false));
        }
        report.samples_tested += 1;
    }
    Ok(report)
}

/// Balanced quasi-monotonicity: the group-1 report and the group-2 report.
pub fn check_balanced_qm(spec: &OperatorSpec, cfg: &SamplerConfig) -> Result<(CheckReport, CheckReport)> {
    cfg.validate()?;
    let (m1, m2, dim) = (spec.partition().m1(), spec.partition().m2(), spec.dim());

    // Draw order matches `check_quasi_monotone` when m2 = 0, so the two
    // checks then see the same sample stream.
    let mut smp = Sampler::new(cfg, spec.domain(), 2);
    let mut mon1 = CheckReport::new(Condition::Mon1);
    for _ in 0..cfg.sample_count {
        let x = smp.point();
        let j = smp.rng.gen_range(0..m1);
        let r = smp.values(m1);
        let s = smp.values(m2);
        let p = smp.gradient(dim);
        let hx = smp.hessian(dim);
        // cooperative within group 1: F_j(r, s) >= F_j(ρ, s) for r <= ρ, r_j = ρ_j
        let rho = add(&r, &smp.increment(m1, Some(j)));
        mon1.record(Witness::new(spec, j, tuple(&x, &rho, &s, &p, &hx), tuple(&x, &r, &s, &p, &hx), 0.0, false));
        // competitive across groups: F_j(r, s) <= F_j(r, σ) for s <= σ
        if m2 > 0 {
            let sigma = add(&s, &smp.increment(m2, None));
            mon1.record(Witness::new(spec, j, tuple(&x, &r, &s, &p, &hx), tuple(&x, &r, &sigma, &p, &hx), 0.0, false));
        }
        mon1.samples_tested += 1;
    }

    let mut mon2 = CheckReport::new(Condition::Mon2);
    if m2 == 0 {
        return Ok((mon1, mon2));
    }
    let mut smp = Sampler::new(cfg, spec.domain(), 3);
    for _ in 0..cfg.sample_count {
        let x = smp.point();
        let jj = smp.rng.gen_range(0..m2);
        let j = m1 + jj;
        let r = smp.values(m1);
        let s = smp.values(m2);
        let p = smp.gradient(dim);
        let hx = smp.hessian(dim);
        // competitive: F(r, s) <= F(ρ, s) for r <= ρ
        let rho = add(&r, &smp.increment(m1, None));
        mon2.record(Witness::new(spec, j, tuple(&x, &r, &s, &p, &hx), tuple(&x, &rho, &s, &p, &hx), 0.0, false));
        // cooperative within group 2: F(r, s) >= F(r, σ) for s <= σ, s_j = σ_j
        let sigma = add(&s, &smp.increment(m2, Some(jj)));
        mon2.record(Witness::new(spec, j, tuple(&x, &r, &sigma, &p, &hx), tuple(&x, &r, &s, &p, &hx), 0.0, false));
        mon2.samples_tested += 1;
    }
    Ok((mon1, mon2))
}

/// Fully cooperative quasi-monotonicity: `F_j(η) <= F_j(ξ)` for `ξ <= η`, `ξ_j = η_j`.
pub fn check_quasi_monotone(spec: &OperatorSpec, cfg: &SamplerConfig) -> Result<CheckReport> {
    cfg.validate()?;
    let (m, dim) = (spec.m(), spec.dim());
    let part = spec.partition();
    let mut smp = Sampler::new(cfg, spec.domain(), 2);
    let mut report = CheckReport::new(Condition::Monorig);
    for _ in 0..cfg.sample_count {
        let x = smp.point();
        let j = smp.rng.gen_range(0..m);
        let xi = smp.values(m);
        let p = smp.gradient(dim);
        let hx = smp.hessian(dim);
        let eta = add(&xi, &smp.increment(m, Some(j)));
        let (r, s) = part.split(&xi);
        let (rho, sigma) = part.split(&eta);
        report.record(Witness::new(spec, j, tuple(&x, rho, sigma, &p, &hx), tuple(&x, r, s, &p, &hx), 0.0, false));
        report.samples_tested += 1;
    }
    Ok(report)
}

/// `F_j(ξ) - F_j(η) >= λ (ξ_j - η_j)` when `ξ_j - η_j = max_k |ξ_k - η_k| > 0`.
pub fn check_condition_i(spec: &OperatorSpec, cfg: &SamplerConfig) -> Result<CheckReport> {
    cfg.validate()?;
    let (m, dim) = (spec.m(), spec.dim());
    let part = spec.partition();
    let half = 0.5 * (cfg.value_range.1 - cfg.value_range.0);
    let mut smp = Sampler::new(cfg, spec.domain(), 4);
    let mut report = CheckReport::new(Condition::CondI);
    let mut min_ratio = f64::INFINITY;
    for _ in 0..cfg.sample_count {
        let x = smp.point();
        let j = smp.rng.gen_range(0..m);
        let eta = smp.values(m);
        let theta = half * (1.0 - smp.rng.gen::<f64>());
        let d: Vec<f64> = (0..m)
            .map(|k| {
                let v = smp.uniform((-theta, theta));
                if k == j {
                    theta
                } else {
                    v
                }
            })
            .collect();
        let xi = add(&eta, &d);
        let p = smp.gradient(dim);
        let hx = smp.hessian(dim);
        let (r, s) = part.split(&xi);
        let (rho, sigma) = part.split(&eta);
        let w = Witness::new(spec, j, tuple(&x, rho, sigma, &p, &hx), tuple(&x, r, s, &p, &hx), 0.0, true);
        min_ratio = min_ratio.min((w.value_b - w.value_a) / (xi[j] - eta[j]));
        report.record(w);
        report.samples_tested += 1;
    }
    report.empirical_constant = Some(min_ratio);
    report.passed = report.witness.is_none() && min_ratio > 0.0;
    Ok(report)
}

/// The balanced variant of condition i, keyed on
/// `θ = max(max_j (r_j - ρ_j), max_j (σ_j - s_j)) > 0`.
pub fn check_condition_i_prime(spec: &OperatorSpec, cfg: &SamplerConfig) -> Result<CheckReport> {
    cfg.validate()?;
    let (m1, m2, dim) = (spec.partition().m1(), spec.partition().m2(), spec.dim());
    let mut smp = Sampler::new(cfg, spec.domain(), 5);
    let mut report = CheckReport::new(Condition::CondIPrime);
    let mut min_ratio = f64::INFINITY;
    for _ in 0..cfg.sample_count {
        let (x, r, s, rho, sigma, theta, at) = loop {
            let x = smp.point();
            let (r, s) = (smp.values(m1), smp.values(m2));
            let (rho, sigma) = (smp.values(m1), smp.values(m2));
            let gaps = (0..m1)
                .map(|k| (r[k] - rho[k], k))
                .chain((0..m2).map(|k| (sigma[k] - s[k], m1 + k)));
            let (theta, at) = gaps.fold((f64::NEG_INFINITY, 0), |best, g| if g.0 > best.0 { g } else { best });
            if theta > 0.0 {
                break (x, r, s, rho, sigma, theta, at);
            }
        };
        let p = smp.gradient(dim);
        let hx = smp.hessian(dim);
        let plus = tuple(&x, &r, &s, &p, &hx);
        let minus = tuple(&x, &rho, &sigma, &p, &hx);
        let w = if at < m1 {
            // F_j(r, s) - F_j(ρ, σ) > 0
            Witness::new(spec, at, minus, plus, 0.0, true)
        } else {
            // F_{m1+j}(ρ, σ) - F_{m1+j}(r, s) > 0
            Witness::new(spec, at, plus, minus, 0.0, true)
        };
        min_ratio = min_ratio.min((w.value_b - w.value_a) / theta);
        report.record(w);
        report.samples_tested += 1;
    }
    report.empirical_constant = Some(min_ratio);
    report.passed = report.witness.is_none() && min_ratio > 0.0;
    Ok(report)
}

const LIPSCHITZ_PROBES: usize = 2_000;

/// Condition ii on the admissible family of negative semidefinite `X, Y`
/// with eigenvalues in `[-3α, 0]`, against the candidate modulus `ω(t) = L t`.
///
/// `L` is estimated from sampled difference quotients of the pointwise part
/// `c_j - source_j` and of the drift; it is an estimate, not a certificate.
pub fn check_condition_ii(spec: &OperatorSpec, cfg: &SamplerConfig) -> Result<CheckReport> {
    cfg.validate()?;
    let form = spec.structural_form().ok_or_else(|| Error::MissingStructuralForm {
        operator: spec.name().to_string(),
    })?;
    if form.iter().any(|c| !matches!(c.diffusion, Diffusion::Constant(_))) {
        return Err(Error::UnsupportedOperator {
            operator: spec.name().to_string(),
            reason: "condition ii check requires constant diagonal diffusion".into(),
        });
    }
    let (m1, m2, dim) = (spec.partition().m1(), spec.partition().m2(), spec.dim());

    let mut smp = Sampler::new(cfg, spec.domain(), 6);
    let mut slope = 0.0f64;
    for _ in 0..LIPSCHITZ_PROBES {
        let (x, y) = (smp.point(), smp.point());
        let (r, s) = (smp.values(m1), smp.values(m2));
        let dist = x.iter().zip(&y).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
        if dist < 1e-9 {
            continue;
        }
        for comp in form {
            let cx = (comp.coupling)(&x, &r, &s) - comp.source.eval(&x);
            let cy = (comp.coupling)(&y, &r, &s) - comp.source.eval(&y);
            let mut l = (cy - cx).abs() / dist;
            if let Some(b) = &comp.drift {
                let (bx, by) = (b(&x), b(&y));
                let db = bx.iter().zip(&by).map(|(a, c)| (a - c) * (a - c)).sum::<f64>().sqrt();
                l += db / dist;
            }
            slope = slope.max(l);
        }
    }

    let mut smp = Sampler::new(cfg, spec.domain(), 7);
    let mut report = CheckReport::new(Condition::CondIi);
    let mut max_excess = f64::NEG_INFINITY;
    for _ in 0..cfg.sample_count {
        let alpha = 10f64.powf(smp.uniform((-2.0, 2.0)));
        let (x, y) = (smp.point(), smp.point());
        let xi = smp.values(m1 + m2);
        let hx = smp.matrix(dim, -3.0 * alpha, 0.0);
        let hy = smp.matrix(dim, -3.0 * alpha, 0.0);
        let p: Vec<f64> = x.iter().zip(&y).map(|(a, b)| alpha * (a - b)).collect();
        let dist2: f64 = x.iter().zip(&y).map(|(a, b)| (a - b) * (a - b)).sum();
        let bound = slope * (alpha * dist2 + 1.0 / alpha);
        let (r, s) = spec.partition().split(&xi);
        for j in 0..spec.m() {
            let w = Witness::new(spec, j, tuple(&y, r, s, &p, &hy.neg()), tuple(&x, r, s, &p, &hx), bound, false);
            max_excess = max_excess.max(w.value_a - w.value_b - bound);
            report.record(w);
        }
        report.samples_tested += 1;
    }
    report.empirical_constant = Some(max_excess);
    report.modulus_slope = Some(slope);
    Ok(report)
}

/// Runs the requested checks in a fixed order.
pub fn run_checks(spec: &OperatorSpec, cfg: &SamplerConfig, which: &[Condition]) -> Result<Vec<CheckReport>> {
    let mut out = Vec::new();
    let wants = |c: Condition| which.contains(&c);
    if wants(Condition::Ellipticity) {
        out.push(check_ellipticity(spec, cfg)?);
    }
    if wants(Condition::Mon1) || wants(Condition::Mon2) {
        let (mon1, mon2) = check_balanced_qm(spec, cfg)?;
        if wants(Condition::Mon1) {
            out.push(mon1);
        }
        if wants(Condition::Mon2) {
            out.push(mon2);
        }
    }
    if wants(Condition::Monorig) {
        out.push(check_quasi_monotone(spec, cfg)?);
    }
    if wants(Condition::CondI) {
        out.push(check_condition_i(spec, cfg)?);
    }
    if wants(Condition::CondIPrime) {
        out.push(check_condition_i_prime(spec, cfg)?);
    }
    if wants(Condition::CondIi) {
        out.push(check_condition_ii(spec, cfg)?);
    }
    Ok(out)
}
