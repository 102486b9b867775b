//! Built-in metrics and the name → model registry.
//!
//! | spec | `h_{ij̄}` | domain |
//! |------|----------|--------|
//! | `flat(n)` | `δ_ij` | `ℂⁿ` |
//! | `fubini_study(n, s)` | `s(δ_ij/ρ − z̄_i z_j/ρ²)`, `ρ = 1+|z|²` | `|z| < 10` |
//! | `hopf(n)` | `δ_ij/|z|²` | `0.1 ≤ |z| ≤ 10` |
//! | `fs_perturbed(n, ε)` | Fubini-Study (`s = 1`) `+ ε·Re(z¹)·δ_ij` | `|z| < 1`, `ε ∈ [0, 0.2]` |
//!
//! `fubini_study(n, s)` has constant holomorphic sectional curvature `2/s`.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::chart::{HermitianMetric, MetricFirst, MetricModel, MetricSecond, ModelTags};
use crate::error::{Error, Result};
use crate::linalg::{CMatrix, C64};

fn norm2(z: &[C64]) -> f64 {
    z.iter().map(|c| c.norm_sqr()).sum()
}

fn delta(i: usize, j: usize) -> f64 {
    if i == j {
        1.0
    } else {
        0.0
    }
}

#[derive(Debug, Clone)]
pub struct Flat {
    pub n: usize,
}

impl HermitianMetric for Flat {
    fn dim(&self) -> usize {
        self.n
    }
    fn contains(&self, _z: &[C64]) -> bool {
        true
    }
    fn h(&self, _z: &[C64]) -> CMatrix {
        CMatrix::identity(self.n, self.n)
    }
    fn dh(&self, _z: &[C64]) -> Option<MetricFirst> {
        let zero = vec![CMatrix::zeros(self.n, self.n); self.n];
        Some(MetricFirst { dz: zero.clone(), dzbar: zero })
    }
    fn d2h(&self, _z: &[C64]) -> Option<MetricSecond> {
        let zero = vec![vec![CMatrix::zeros(self.n, self.n); self.n]; self.n];
        Some(MetricSecond { dzdz: zero.clone(), dzdzbar: zero })
    }
}

/// Fubini-Study metric `s·∂∂̄ log(1+|z|²)` on the affine chart of `ℂPⁿ`.
#[derive(Debug, Clone)]
pub struct FubiniStudy {
    pub n: usize,
    pub scale: f64,
    pub radius: f64,
}

impl FubiniStudy {
    pub fn new(n: usize, scale: f64) -> Self {
        Self { n, scale, radius: 10.0 }
    }

    /// Holomorphic sectional curvature.
    pub fn hsc(&self) -> f64 {
        2.0 / self.scale
    }
}

impl HermitianMetric for FubiniStudy {
    fn dim(&self) -> usize {
        self.n
    }

    fn contains(&self, z: &[C64]) -> bool {
        norm2(z) < self.radius * self.radius
    }

    fn h(&self, z: &[C64]) -> CMatrix {
        let n = self.n;
        let rho = 1.0 + norm2(z);
        CMatrix::from_fn(n, n, |i, j| {
            (C64::from(delta(i, j) / rho) - z[i].conj() * z[j] / (rho * rho)) * self.scale
        })
    }

    fn dh(&self, z: &[C64]) -> Option<MetricFirst> {
        let n = self.n;
        let s = self.scale;
        let rho = 1.0 + norm2(z);
        let (r2, r3) = (rho * rho, rho * rho * rho);
        let dz = (0..n)
            .map(|k| {
                CMatrix::from_fn(n, n, |i, j| {
                    let zb = |a: usize| z[a].conj();
                    (-zb(k) * delta(i, j) / r2 - zb(i) * delta(j, k) / r2
                        + zb(i) * z[j] * zb(k) * 2.0 / r3)
                        * s
                })
            })
            .collect();
        let dzbar = (0..n)
            .map(|k| {
                CMatrix::from_fn(n, n, |i, j| {
                    (-z[k] * delta(i, j) / r2 - z[j] * delta(i, k) / r2
                        + z[i].conj() * z[j] * z[k] * 2.0 / r3)
                        * s
                })
            })
            .collect();
        Some(MetricFirst { dz, dzbar })
    }

    fn d2h(&self, z: &[C64]) -> Option<MetricSecond> {
        let n = self.n;
        let s = self.scale;
        let rho = 1.0 + norm2(z);
        let (r2, r3, r4) = (rho.powi(2), rho.powi(3), rho.powi(4));
        let zb: Vec<C64> = z.iter().map(|c| c.conj()).collect();
        let mut dzdz = vec![vec![CMatrix::zeros(n, n); n]; n];
        let mut dzdzbar = vec![vec![CMatrix::zeros(n, n); n]; n];
        for k in 0..n {
            for l in 0..n {
                dzdz[k][l] = CMatrix::from_fn(n, n, |i, j| {
                    (zb[k] * zb[l] * 2.0 * delta(i, j) / r3
                        + zb[i] * zb[l] * 2.0 * delta(j, k) / r3
                        + zb[i] * zb[k] * 2.0 * delta(j, l) / r3
                        - zb[i] * z[j] * zb[k] * zb[l] * 6.0 / r4)
                        * s
                });
                dzdzbar[k][l] = CMatrix::from_fn(n, n, |i, j| {
                    let t1 = -(C64::from(delta(k, l) / r2) - zb[k] * z[l] * 2.0 / r3) * delta(i, j);
                    let t2 = -(C64::from(delta(i, l) / r2) - zb[i] * z[l] * 2.0 / r3) * delta(j, k);
                    let t3 = z[j] * 2.0 * ((zb[k] * delta(i, l) + zb[i] * delta(k, l)) / r3 - zb[i] * zb[k] * z[l] * 3.0 / r4);
                    (t1 + t2 + t3) * s
                });
            }
        }
        Some(MetricSecond { dzdz, dzdzbar })
    }

    fn sampling_shell(&self) -> (f64, f64) {
        (0.0, 1.5)
    }
}

/// `h_{ij̄} = δ_ij/|z|²` on an annulus of `ℂⁿ∖{0}`.
#[derive(Debug, Clone)]
pub struct Hopf {
    pub n: usize,
    pub r_min: f64,
    pub r_max: f64,
}

impl HermitianMetric for Hopf {
    fn dim(&self) -> usize {
        self.n
    }

    fn contains(&self, z: &[C64]) -> bool {
        let r = norm2(z).sqrt();
        r >= self.r_min && r <= self.r_max
    }

    fn h(&self, z: &[C64]) -> CMatrix {
        CMatrix::identity(self.n, self.n) / C64::from(norm2(z))
    }

    fn dh(&self, z: &[C64]) -> Option<MetricFirst> {
        let n = self.n;
        let s2 = norm2(z).powi(2);
        let id = CMatrix::identity(n, n);
        let dz = (0..n).map(|k| &id * (-z[k].conj() / s2)).collect();
        let dzbar = (0..n).map(|k| &id * (-z[k] / s2)).collect();
        Some(MetricFirst { dz, dzbar })
    }

    fn d2h(&self, z: &[C64]) -> Option<MetricSecond> {
        let n = self.n;
        let s = norm2(z);
        let id = CMatrix::identity(n, n);
        let mut dzdz = vec![vec![CMatrix::zeros(n, n); n]; n];
        let mut dzdzbar = vec![vec![CMatrix::zeros(n, n); n]; n];
        for k in 0..n {
            for l in 0..n {
                dzdz[k][l] = &id * (z[k].conj() * z[l].conj() * 2.0 / s.powi(3));
                dzdzbar[k][l] = &id * (-(C64::from(delta(k, l) / s.powi(2)) - z[k].conj() * z[l] * 2.0 / s.powi(3)));
            }
        }
        Some(MetricSecond { dzdz, dzdzbar })
    }

    fn sampling_shell(&self) -> (f64, f64) {
        (0.5, 2.0)
    }
}

/// Fubini-Study plus `ε·Re(z¹)·I`; non-Kähler for `n ≥ 2`, `ε > 0`.
#[derive(Debug, Clone)]
pub struct FsPerturbed {
    pub base: FubiniStudy,
    pub eps: f64,
}

impl HermitianMetric for FsPerturbed {
    fn dim(&self) -> usize {
        self.base.n
    }

    fn contains(&self, z: &[C64]) -> bool {
        norm2(z) < 1.0
    }

    fn h(&self, z: &[C64]) -> CMatrix {
        let n = self.base.n;
        self.base.h(z) + CMatrix::identity(n, n) * C64::from(self.eps * z[0].re)
    }

    fn dh(&self, z: &[C64]) -> Option<MetricFirst> {
        let n = self.base.n;
        let mut d = self.base.dh(z)?;
        let bump = CMatrix::identity(n, n) * C64::from(0.5 * self.eps);
        d.dz[0] += &bump;
        d.dzbar[0] += &bump;
        Some(d)
    }

    fn d2h(&self, z: &[C64]) -> Option<MetricSecond> {
        self.base.d2h(z)
    }

    fn sampling_shell(&self) -> (f64, f64) {
        (0.0, 0.8)
    }
}

/// `name(p1, p2, …)` plus an optional finite-difference step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSpec {
    pub name: String,
    #[serde(default)]
    pub params: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fd_step: Option<f64>,
}

impl fmt::Display for ModelSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}(", self.name)?;
        for (i, p) in self.params.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{p}")?;
        }
        write!(f, ")")
    }
}

impl FromStr for ModelSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let (name, rest) = match s.find('(') {
            Some(i) => (&s[..i], &s[i + 1..]),
            None => (s, ")"),
        };
        let inner = rest
            .strip_suffix(')')
            .ok_or_else(|| Error::BadParams { model: s.into(), reason: "missing ')'".into() })?;
        let params = inner
            .split(',')
            .map(str::trim)
            .filter(|t| !t.is_empty())
            .map(|t| {
                t.parse::<f64>()
                    .map_err(|_| Error::BadParams { model: s.into(), reason: format!("'{t}' is not a number") })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(ModelSpec { name: name.trim().to_string(), params, fd_step: None })
    }
}

fn dimension(spec: &ModelSpec) -> Result<usize> {
    let bad = |reason: &str| Error::BadParams { model: spec.to_string(), reason: reason.into() };
    let n = *spec.params.first().ok_or_else(|| bad("missing complex dimension"))?;
    if n < 1.0 || n.fract() != 0.0 || n > 8.0 {
        return Err(bad("complex dimension must be an integer in 1..=8"));
    }
    Ok(n as usize)
}

/// Resolves a model spec to a [`MetricModel`] with its tags and injectivity bound.
pub fn registry(spec: &ModelSpec) -> Result<MetricModel> {
    let bad = |reason: &str| Error::BadParams { model: spec.to_string(), reason: reason.into() };
    let n = dimension(spec)?;
    let arity = |max: usize| {
        if spec.params.len() > max {
            Err(bad("too many parameters"))
        } else {
            Ok(())
        }
    };
    let both = ModelTags { kahler_expected: true, balanced_expected: true };
    let neither = ModelTags::default();
    let mut model = match spec.name.as_str() {
        "flat" => {
            arity(1)?;
            MetricModel::new(Arc::new(Flat { n }), spec.to_string(), both)
        }
        "fubini_study" => {
            arity(2)?;
            let scale = spec.params.get(1).copied().unwrap_or(1.0);
            if !(scale > 0.0 && scale.is_finite()) {
                return Err(bad("scale must be positive"));
            }
            let fs = FubiniStudy::new(n, scale);
            let bound = PI / (2.0 * fs.hsc().sqrt()) * 0.95;
            MetricModel::new(Arc::new(fs), spec.to_string(), both).with_injectivity_bound(bound)
        }
        "hopf" => {
            arity(1)?;
            MetricModel::new(Arc::new(Hopf { n, r_min: 0.1, r_max: 10.0 }), spec.to_string(), neither)
                .with_injectivity_bound(0.5)
        }
        "fs_perturbed" => {
            arity(2)?;
            let eps = spec.params.get(1).copied().unwrap_or(0.0);
            if !(0.0..=0.2).contains(&eps) {
                return Err(bad("eps must lie in [0, 0.2]"));
            }
            let tags = if eps == 0.0 { both } else { neither };
            let m = FsPerturbed { base: FubiniStudy::new(n, 1.0), eps };
            MetricModel::new(Arc::new(m), spec.to_string(), tags).with_injectivity_bound(0.5)
        }
        other => return Err(Error::UnknownModel(other.to_string())),
    };
    if let Some(step) = spec.fd_step {
        if !(step > 0.0 && step < 1e-1) {
            return Err(bad("fd_step must lie in (0, 0.1)"));
        }
        model = model.with_fd_step(step);
    }
    Ok(model)
}

/// Parses and resolves `name(params)` in one go.
pub fn model_from_str(spec: &str) -> Result<MetricModel> {
    registry(&spec.parse()?)
}

/// Holomorphic sectional curvature of a Fubini-Study model, if it is one.
pub fn fubini_study_hsc(spec: &ModelSpec) -> Option<f64> {
    (spec.name == "fubini_study").then(|| 2.0 / spec.params.get(1).copied().unwrap_or(1.0))
}
