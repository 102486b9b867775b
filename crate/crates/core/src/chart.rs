//! Single-chart Hermitian manifolds.
//!
//! Real coordinates are ordered `(x^1..x^n, x^{n+1}..x^{2n})` with
//! `z^i = x^i + √-1 x^{i+n}`, so `J ∂/∂x^i = ∂/∂x^{i+n}`. Complexified vectors are
//! stored as `2n` complex components over `{∂/∂z^1..∂/∂z^n, ∂/∂z̄^1..∂/∂z̄^n}`.
//!
//! Normalization: `h_{ij̄} = g(∂/∂z^i, ∂/∂z̄^j)` exactly, which forces
//! `g(∂/∂x^i, ∂/∂x^j) = 2 Re h_{ij̄}`. A flat `h = I` therefore has real metric `2·I`.

use std::fmt;
use std::sync::Arc;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, CMatrix, RMatrix, C64, I, ZERO};

#[derive(Clone, Debug, PartialEq)]
pub struct ChartPoint {
    pub z: Vec<C64>,
}

impl ChartPoint {
    pub fn new(z: Vec<C64>) -> Self {
        Self { z }
    }

    pub fn origin(n: usize) -> Self {
        Self { z: vec![ZERO; n] }
    }

    pub fn from_real(x: &[f64]) -> Self {
        let n = x.len() / 2;
        Self { z: (0..n).map(|i| C64::new(x[i], x[i + n])).collect() }
    }

    pub fn to_real(&self) -> Vec<f64> {
        self.z.iter().map(|c| c.re).chain(self.z.iter().map(|c| c.im)).collect()
    }

    pub fn dim(&self) -> usize {
        self.z.len()
    }

    pub fn norm(&self) -> f64 {
        self.z.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt()
    }

    /// Point displaced by a real coordinate vector.
    pub fn offset(&self, dx: &[f64], scale: f64) -> Self {
        let n = self.dim();
        Self {
            z: (0..n)
                .map(|i| self.z[i] + C64::new(dx[i], dx[i + n]) * scale)
                .collect(),
        }
    }
}

impl fmt::Display for ChartPoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (i, c) in self.z.iter().enumerate() {
            if i > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{}{:+}i", c.re, c.im)?;
        }
        write!(f, ")")
    }
}

/// Real tangent vector with components in `{∂/∂x^i, ∂/∂x^{i+n}}`.
#[derive(Clone, Debug, PartialEq)]
pub struct TangentVector {
    pub x: Vec<f64>,
}

impl TangentVector {
    pub fn from_real(x: Vec<f64>) -> Self {
        Self { x }
    }

    pub fn zero(n: usize) -> Self {
        Self { x: vec![0.0; 2 * n] }
    }

    /// `∂/∂x^a` for a real index `a` in `0..2n`.
    pub fn coordinate(n: usize, a: usize) -> Self {
        let mut x = vec![0.0; 2 * n];
        x[a] = 1.0;
        Self { x }
    }

    /// Real vector `X = V^i ∂_i + V̄^i ∂_ī` from its (1,0) part.
    pub fn from_holomorphic(v10: &[C64]) -> Self {
        Self { x: v10.iter().map(|c| c.re).chain(v10.iter().map(|c| c.im)).collect() }
    }

    /// Real part of a complexified vector (exact for real vectors).
    pub fn from_complexified(u: &[C64]) -> Self {
        let n = u.len() / 2;
        Self::from_holomorphic(&u[..n])
    }

    pub fn n(&self) -> usize {
        self.x.len() / 2
    }

    pub fn v10(&self) -> Vec<C64> {
        let n = self.n();
        (0..n).map(|i| C64::new(self.x[i], self.x[i + n])).collect()
    }

    pub fn v01(&self) -> Vec<C64> {
        self.v10().into_iter().map(|c| c.conj()).collect()
    }

    pub fn complexified(&self) -> Vec<C64> {
        let v = self.v10();
        let mut out = v.clone();
        out.extend(v.iter().map(|c| c.conj()));
        out
    }

    pub fn scaled(&self, s: f64) -> Self {
        Self { x: self.x.iter().map(|v| v * s).collect() }
    }

    pub fn add(&self, other: &Self) -> Self {
        Self { x: self.x.iter().zip(&other.x).map(|(a, b)| a + b).collect() }
    }

    pub fn sub(&self, other: &Self) -> Self {
        Self { x: self.x.iter().zip(&other.x).map(|(a, b)| a - b).collect() }
    }

    pub fn euclidean_norm(&self) -> f64 {
        linalg::norm(&self.x)
    }
}

/// Complexified real vector helper used by the tensor evaluators.
pub fn complexify(x: &[f64]) -> Vec<C64> {
    let n = x.len() / 2;
    let mut out = Vec::with_capacity(2 * n);
    for i in 0..n {
        out.push(C64::new(x[i], x[i + n]));
    }
    for i in 0..n {
        out.push(C64::new(x[i], -x[i + n]));
    }
    out
}

/// Real components of a complexified vector. Only the (1,0) block is read.
pub fn realify(u: &[C64]) -> Vec<f64> {
    let n = u.len() / 2;
    u[..n].iter().map(|c| c.re).chain(u[..n].iter().map(|c| c.im)).collect()
}

/// Index in `{1..n} ∪ {1̄..n̄}`; `slot` is zero-based.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ComplexIndex {
    pub slot: usize,
    pub barred: bool,
}

impl ComplexIndex {
    pub fn holo(slot: usize) -> Self {
        Self { slot, barred: false }
    }

    pub fn anti(slot: usize) -> Self {
        Self { slot, barred: true }
    }

    pub fn conj(self) -> Self {
        Self { slot: self.slot, barred: !self.barred }
    }

    /// Position in the flat `2n` ordering.
    pub fn flat(self, n: usize) -> usize {
        self.slot + if self.barred { n } else { 0 }
    }

    pub fn from_flat(n: usize, a: usize) -> Self {
        if a < n {
            Self::holo(a)
        } else {
            Self::anti(a - n)
        }
    }

    /// `√-1` for holomorphic slots, `-√-1` for antiholomorphic ones: `J ∂_A = ε_A ∂_A`.
    pub fn j_eigenvalue(self) -> C64 {
        if self.barred {
            -I
        } else {
            I
        }
    }

    pub fn label(self) -> String {
        if self.barred {
            format!("{}b", self.slot + 1)
        } else {
            format!("{}", self.slot + 1)
        }
    }
}

/// Flat-index conjugation on `0..2n`.
#[inline]
pub fn conj_index(n: usize, a: usize) -> usize {
    if a < n {
        a + n
    } else {
        a - n
    }
}

#[inline]
pub fn j_eigen(n: usize, a: usize) -> C64 {
    if a < n {
        I
    } else {
        -I
    }
}

/// First Wirtinger derivatives of `H_{ij} = h_{ij̄}`.
#[derive(Clone, Debug)]
pub struct MetricFirst {
    /// `dz[k] = ∂H/∂z^k`
    pub dz: Vec<CMatrix>,
    /// `dzbar[k] = ∂H/∂z̄^k`
    pub dzbar: Vec<CMatrix>,
}

/// Second Wirtinger derivatives of `H`.
#[derive(Clone, Debug)]
pub struct MetricSecond {
    /// `dzdz[k][l] = ∂²H/∂z^k∂z^l`
    pub dzdz: Vec<Vec<CMatrix>>,
    /// `dzdzbar[k][l] = ∂²H/∂z^k∂z̄^l`
    pub dzdzbar: Vec<Vec<CMatrix>>,
}

/// A Hermitian metric given by closed-form evaluators on one chart.
pub trait HermitianMetric: Send + Sync + fmt::Debug {
    fn dim(&self) -> usize;

    fn contains(&self, z: &[C64]) -> bool;

    /// `H_{ij} = h_{ij̄}(z)`.
    fn h(&self, z: &[C64]) -> CMatrix;

    fn dh(&self, _z: &[C64]) -> Option<MetricFirst> {
        None
    }

    fn d2h(&self, _z: &[C64]) -> Option<MetricSecond> {
        None
    }

    /// Radii `(r_min, r_max)` of the shell random test points are drawn from.
    fn sampling_shell(&self) -> (f64, f64) {
        (0.0, 1.0)
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelTags {
    pub kahler_expected: bool,
    pub balanced_expected: bool,
}

pub const DEFAULT_FD_STEP: f64 = 1e-5;
pub const DEFAULT_FD_STEP2: f64 = 1e-4;

#[derive(Clone)]
pub struct MetricModel {
    metric: Arc<dyn HermitianMetric>,
    pub spec: String,
    pub fd_step: f64,
    pub fd_step2: f64,
    pub tags: ModelTags,
    /// Distances above this are never claimed minimal.
    pub injectivity_bound: f64,
    analytic: bool,
}

impl fmt::Debug for MetricModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("MetricModel")
            .field("spec", &self.spec)
            .field("n", &self.n())
            .field("tags", &self.tags)
            .field("analytic", &self.analytic)
            .finish()
    }
}

/// Metric data at one point.
#[derive(Clone, Debug)]
pub struct MetricEval {
    pub h: CMatrix,
    pub g_real: RMatrix,
    /// Ordinary matrix inverse `H⁻¹`; note `h^{kℓ̄} = h_inv[(ℓ, k)]`.
    pub h_inv: CMatrix,
}

impl MetricEval {
    /// `h^{kℓ̄}` with `Σ_ℓ h^{kℓ̄} h_{iℓ̄} = δ_{ki}`.
    #[inline]
    pub fn h_upper(&self, k: usize, l: usize) -> C64 {
        self.h_inv[(l, k)]
    }
}

/// Derivative tables of `H` at a point.
#[derive(Clone, Debug)]
pub struct MetricPartials {
    pub first: MetricFirst,
    pub second: Option<MetricSecond>,
}

impl MetricPartials {
    /// `∂H/∂z^E` for flat index `e` (holomorphic or antiholomorphic direction).
    pub fn d(&self, n: usize, e: usize) -> &CMatrix {
        if e < n {
            &self.first.dz[e]
        } else {
            &self.first.dzbar[e - n]
        }
    }
}

/// Complexified ℂ-bilinear metric `g_{AB}` and its inverse on `2n` indices.
#[derive(Clone, Debug)]
pub struct ComplexMetric {
    pub n: usize,
    pub g: CMatrix,
    pub ginv: CMatrix,
}

impl ComplexMetric {
    pub fn from_eval(ev: &MetricEval) -> Self {
        let n = ev.h.nrows();
        let m = 2 * n;
        let mut g = CMatrix::zeros(m, m);
        let mut ginv = CMatrix::zeros(m, m);
        for i in 0..n {
            for j in 0..n {
                g[(i, n + j)] = ev.h[(i, j)];
                g[(n + i, j)] = ev.h[(j, i)];
                ginv[(i, n + j)] = ev.h_inv[(j, i)];
                ginv[(n + i, j)] = ev.h_inv[(i, j)];
            }
        }
        Self { n, g, ginv }
    }

    pub fn pair(&self, u: &[C64], w: &[C64]) -> C64 {
        let m = 2 * self.n;
        let mut s = ZERO;
        for a in 0..m {
            if u[a] == ZERO {
                continue;
            }
            for b in 0..m {
                s += self.g[(a, b)] * u[a] * w[b];
            }
        }
        s
    }

    /// Lowers a vector: `u_B = g_{AB} u^A`.
    pub fn lower(&self, u: &[C64]) -> Vec<C64> {
        let m = 2 * self.n;
        (0..m).map(|b| (0..m).map(|a| self.g[(a, b)] * u[a]).sum()).collect()
    }
}

/// `∂g_{AB}/∂z^E` assembled from the Wirtinger derivatives of `H`.
pub fn complex_metric_derivative(n: usize, dh_e: &CMatrix) -> CMatrix {
    let m = 2 * n;
    let mut d = CMatrix::zeros(m, m);
    for i in 0..n {
        for j in 0..n {
            d[(i, n + j)] = dh_e[(i, j)];
            d[(n + i, j)] = dh_e[(j, i)];
        }
    }
    d
}

pub fn real_metric_from_h(h: &CMatrix) -> RMatrix {
    let n = h.nrows();
    let mut g = RMatrix::zeros(2 * n, 2 * n);
    for i in 0..n {
        for j in 0..n {
            let v = h[(i, j)];
            g[(i, j)] = 2.0 * v.re;
            g[(n + i, n + j)] = 2.0 * v.re;
            g[(i, n + j)] = 2.0 * v.im;
            g[(n + i, j)] = -2.0 * v.im;
        }
    }
    g
}

/// `J` as a real `2n × 2n` matrix acting on column vectors.
pub fn j_matrix(n: usize) -> RMatrix {
    let mut j = RMatrix::zeros(2 * n, 2 * n);
    for i in 0..n {
        j[(n + i, i)] = 1.0;
        j[(i, n + i)] = -1.0;
    }
    j
}

pub fn apply_j(x: &TangentVector) -> TangentVector {
    let n = x.n();
    let mut out = vec![0.0; 2 * n];
    for i in 0..n {
        out[i] = -x.x[i + n];
        out[i + n] = x.x[i];
    }
    TangentVector { x: out }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Pairings {
    pub g_real_val: f64,
    pub g_bilinear: C64,
    pub norm2: f64,
}

impl MetricModel {
    pub fn new(metric: Arc<dyn HermitianMetric>, spec: impl Into<String>, tags: ModelTags) -> Self {
        Self {
            metric,
            spec: spec.into(),
            fd_step: DEFAULT_FD_STEP,
            fd_step2: DEFAULT_FD_STEP2,
            tags,
            injectivity_bound: f64::INFINITY,
            analytic: true,
        }
    }

    pub fn with_injectivity_bound(mut self, bound: f64) -> Self {
        self.injectivity_bound = bound;
        self
    }

    pub fn with_fd_step(mut self, step: f64) -> Self {
        self.fd_step = step;
        self
    }

    /// Same model with analytic derivative evaluators switched off.
    pub fn finite_difference_only(&self) -> Self {
        let mut m = self.clone();
        m.analytic = false;
        m
    }

    pub fn uses_analytic(&self) -> bool {
        self.analytic
    }

    pub fn metric(&self) -> &dyn HermitianMetric {
        self.metric.as_ref()
    }

    pub fn n(&self) -> usize {
        self.metric.dim()
    }

    pub fn contains(&self, p: &ChartPoint) -> bool {
        p.dim() == self.n() && p.z.iter().all(|c| c.re.is_finite() && c.im.is_finite()) && self.metric.contains(&p.z)
    }

    fn check(&self, p: &ChartPoint) -> Result<()> {
        if self.contains(p) {
            Ok(())
        } else {
            Err(Error::DomainError(p.to_string()))
        }
    }

    /// Draws a point from the model's sampling shell, uniformly in direction.
    pub fn random_point<R: Rng + ?Sized>(&self, rng: &mut R) -> ChartPoint {
        let n = self.n();
        let (r0, r1) = self.metric.sampling_shell();
        loop {
            let dir: Vec<f64> = (0..2 * n).map(|_| rng.random_range(-1.0..1.0)).collect();
            let len = linalg::norm(&dir);
            if !(1e-3..=1.0).contains(&len) {
                continue;
            }
            let r = rng.random_range(r0..r1);
            let x: Vec<f64> = dir.iter().map(|d| d / len * r).collect();
            let p = ChartPoint::from_real(&x);
            if self.contains(&p) {
                return p;
            }
        }
    }

    pub fn eval_metric(&self, p: &ChartPoint) -> Result<MetricEval> {
        self.check(p)?;
        let h = self.metric.h(&p.z);
        if !linalg::is_positive_definite(&h) || linalg::hermitian_defect(&h) > 1e-12 {
            return Err(Error::SingularMetric(p.to_string()));
        }
        let h_inv = h
            .clone()
            .try_inverse()
            .ok_or_else(|| Error::SingularMetric(p.to_string()))?;
        let g_real = real_metric_from_h(&h);
        Ok(MetricEval { h, g_real, h_inv })
    }

    pub fn complex_metric(&self, p: &ChartPoint) -> Result<ComplexMetric> {
        Ok(ComplexMetric::from_eval(&self.eval_metric(p)?))
    }

    /// First (and optionally second) Wirtinger derivatives of `H`.
    ///
    /// Analytic evaluators are used when the metric provides them; otherwise central
    /// differences with step `fd_step·max(1,|z|)` (first) and `fd_step2·max(1,|z|)` (second).
    pub fn metric_partials(&self, p: &ChartPoint, second: bool) -> Result<MetricPartials> {
        self.check(p)?;
        let first = match self.analytic.then(|| self.metric.dh(&p.z)).flatten() {
            Some(d) => d,
            None => self.fd_first(p)?,
        };
        let second = if second {
            Some(match self.analytic.then(|| self.metric.d2h(&p.z)).flatten() {
                Some(d) => d,
                None => self.fd_second(p)?,
            })
        } else {
            None
        };
        Ok(MetricPartials { first, second })
    }

    fn h_at(&self, p: &ChartPoint) -> Result<CMatrix> {
        if !self.contains(p) {
            return Err(Error::DomainError(format!("finite-difference stencil point {p}")));
        }
        Ok(self.metric.h(&p.z))
    }

    /// Real partials `∂H/∂x^a`, `a ∈ 0..2n`.
    fn real_first(&self, p: &ChartPoint, step: f64) -> Result<Vec<CMatrix>> {
        let n = self.n();
        let mut out = Vec::with_capacity(2 * n);
        for a in 0..2 * n {
            let e = TangentVector::coordinate(n, a).x;
            let hp = self.h_at(&p.offset(&e, step))?;
            let hm = self.h_at(&p.offset(&e, -step))?;
            out.push((hp - hm) / C64::from(2.0 * step));
        }
        Ok(out)
    }

    fn fd_first(&self, p: &ChartPoint) -> Result<MetricFirst> {
        let n = self.n();
        let step = self.fd_step * p.norm().max(1.0);
        let d = self.real_first(p, step)?;
        let half = C64::from(0.5);
        let dz = (0..n).map(|k| (&d[k] - &d[k + n] * I) * half).collect();
        let dzbar = (0..n).map(|k| (&d[k] + &d[k + n] * I) * half).collect();
        Ok(MetricFirst { dz, dzbar })
    }

    fn fd_second(&self, p: &ChartPoint) -> Result<MetricSecond> {
        let n = self.n();
        let m = 2 * n;
        let s = self.fd_step2 * p.norm().max(1.0);
        let h0 = self.h_at(p)?;
        // Real Hessian of H.
        let mut hess = vec![vec![CMatrix::zeros(n, n); m]; m];
        for a in 0..m {
            let ea = TangentVector::coordinate(n, a).x;
            for b in a..m {
                let v = if a == b {
                    let hp = self.h_at(&p.offset(&ea, s))?;
                    let hm = self.h_at(&p.offset(&ea, -s))?;
                    (hp + hm - &h0 * C64::from(2.0)) / C64::from(s * s)
                } else {
                    let eb = TangentVector::coordinate(n, b).x;
                    let pp = p.offset(&ea, s).offset(&eb, s);
                    let pm = p.offset(&ea, s).offset(&eb, -s);
                    let mp = p.offset(&ea, -s).offset(&eb, s);
                    let mm = p.offset(&ea, -s).offset(&eb, -s);
                    (self.h_at(&pp)? - self.h_at(&pm)? - self.h_at(&mp)? + self.h_at(&mm)?)
                        / C64::from(4.0 * s * s)
                };
                hess[a][b] = v.clone();
                hess[b][a] = v;
            }
        }
        // ∂_k = ½(∂x_k − i∂y_k), ∂_k̄ = ½(∂x_k + i∂y_k).
        let quarter = C64::from(0.25);
        let mut dzdz = vec![vec![CMatrix::zeros(n, n); n]; n];
        let mut dzdzbar = vec![vec![CMatrix::zeros(n, n); n]; n];
        for k in 0..n {
            for l in 0..n {
                let xx = &hess[k][l];
                let xy = &hess[k][l + n];
                let yx = &hess[k + n][l];
                let yy = &hess[k + n][l + n];
                dzdz[k][l] = (xx - yy - (xy + yx) * I) * quarter;
                dzdzbar[k][l] = (xx + yy + (xy - yx) * I) * quarter;
            }
        }
        Ok(MetricSecond { dzdz, dzdzbar })
    }

    pub fn pairings(&self, p: &ChartPoint, x: &TangentVector, y: &TangentVector) -> Result<Pairings> {
        let ev = self.eval_metric(p)?;
        let cm = ComplexMetric::from_eval(&ev);
        Ok(Pairings {
            g_real_val: linalg::bilinear(&ev.g_real, &x.x, &y.x),
            g_bilinear: cm.pair(&x.complexified(), &y.complexified()),
            norm2: linalg::bilinear(&ev.g_real, &x.x, &x.x),
        })
    }

    pub fn norm(&self, p: &ChartPoint, x: &TangentVector) -> Result<f64> {
        let ev = self.eval_metric(p)?;
        Ok(linalg::bilinear(&ev.g_real, &x.x, &x.x).sqrt())
    }

    /// `ω(X, Y) = g(JX, Y)`.
    pub fn fundamental_form(&self, p: &ChartPoint, x: &TangentVector, y: &TangentVector) -> Result<f64> {
        let ev = self.eval_metric(p)?;
        Ok(linalg::bilinear(&ev.g_real, &apply_j(x).x, &y.x))
    }

    /// `ω = √-1 h_{ij̄} dz^i∧dz̄^j` evaluated on complexified vectors.
    pub fn fundamental_form_complex(&self, p: &ChartPoint, u: &[C64], w: &[C64]) -> Result<C64> {
        let cm = self.complex_metric(p)?;
        let n = self.n();
        let mut s = ZERO;
        for a in 0..2 * n {
            for b in 0..2 * n {
                s += j_eigen(n, a) * cm.g[(a, b)] * u[a] * w[b];
            }
        }
        Ok(s)
    }

    /// Real-coordinate partials `∂Ω_{bc}/∂x^a` of the fundamental form matrix `Ω = Jᵀ G`.
    pub fn omega_partials(&self, p: &ChartPoint) -> Result<Vec<RMatrix>> {
        let n = self.n();
        let part = self.metric_partials(p, false)?;
        let jt = j_matrix(n).transpose();
        let mut out = Vec::with_capacity(2 * n);
        for a in 0..2 * n {
            let dh = if a < n {
                &part.first.dz[a] + &part.first.dzbar[a]
            } else {
                let k = a - n;
                (&part.first.dz[k] - &part.first.dzbar[k]) * I
            };
            out.push(&jt * real_metric_from_h(&dh));
        }
        Ok(out)
    }

    /// `dω(X,Y,Z) = Σ (∂_a Ω_{bc} + ∂_b Ω_{ca} + ∂_c Ω_{ab}) X^a Y^b Z^c` in real coordinates.
    pub fn d_omega(&self, p: &ChartPoint, x: &TangentVector, y: &TangentVector, z: &TangentVector) -> Result<f64> {
        let d = self.omega_partials(p)?;
        Ok(d_omega_from_partials(&d, &x.x, &y.x, &z.x))
    }
}

pub fn d_omega_from_partials(d: &[RMatrix], x: &[f64], y: &[f64], z: &[f64]) -> f64 {
    let m = x.len();
    let mut s = 0.0;
    for a in 0..m {
        for b in 0..m {
            for c in 0..m {
                let w = x[a] * y[b] * z[c];
                if w != 0.0 {
                    s += w * (d[a][(b, c)] + d[b][(c, a)] + d[c][(a, b)]);
                }
            }
        }
    }
    s
}

/// Point evaluation bundle used by the rest of the crate.
pub fn eval_metric(model: &MetricModel, p: &ChartPoint) -> Result<MetricEval> {
    model.eval_metric(p)
}

pub fn metric_partials(model: &MetricModel, p: &ChartPoint) -> Result<MetricPartials> {
    model.metric_partials(p, true)
}

pub fn pairings(model: &MetricModel, p: &ChartPoint, x: &TangentVector, y: &TangentVector) -> Result<Pairings> {
    model.pairings(p, x, y)
}
