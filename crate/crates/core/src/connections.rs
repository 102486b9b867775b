//! Complexified Christoffel symbols of the Levi-Civita and Strominger-Bismut
//! connections, the Strominger-Bismut torsion, and the defining-relation checks.
//!
//! Tables are indexed by flat complex indices in `0..2n` (`a < n` holomorphic,
//! `a ≥ n` antiholomorphic) with `∇_{∂_A} ∂_B = Γ^C_{AB} ∂_C`.
//!
//! Three independent routes are kept apart on purpose:
//! * [`christoffel`] with [`Flavor::LeviCivita`] uses the general formula
//!   `Γ^C_{AB} = ½ g^{CE}(∂_B g_{AE} + ∂_A g_{BE} − ∂_E g_{AB})`;
//! * [`christoffel`] with [`Flavor::StromingerBismut`] assembles the closed-form
//!   families `Γ^k_{ij} = h^{kℓ̄}∂_j h_{iℓ̄}`, `Γ^k_{j̄i} = h^{kℓ̄}(∂_j̄ h_{iℓ̄} − ∂_ℓ̄ h_{ij̄})`;
//! * [`torsion_sb`] builds `T` from its generators `T_{ijℓ̄} = ∂_j h_{iℓ̄} − ∂_i h_{jℓ̄}`,
//!   while `dω` comes from real coordinates in [`crate::chart`].
//!
//! [`ConnectionJet`] (used for curvature) derives both flavors from lowered
//! symbols `g(∇_{∂_A}∂_B, ∂_E) = ½S_{ABE} (+ ½ dω(J∂_A, J∂_B, J∂_E))`.

use serde::{Deserialize, Serialize};

use crate::chart::{
    complex_metric_derivative, complexify, conj_index, j_eigen, ChartPoint, ComplexMetric, MetricModel,
    MetricPartials, TangentVector,
};
use crate::error::Result;
use crate::linalg::{CMatrix, C64, ZERO};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Flavor {
    #[serde(rename = "lc")]
    LeviCivita,
    #[serde(rename = "sb")]
    StromingerBismut,
}

impl std::str::FromStr for Flavor {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s.to_ascii_lowercase().as_str() {
            "lc" => Ok(Flavor::LeviCivita),
            "sb" => Ok(Flavor::StromingerBismut),
            other => Err(format!("unknown flavor '{other}' (expected lc or sb)")),
        }
    }
}

/// Dense `m×m×m` complex table, stored row-major in `(i, j, k)`.
#[derive(Clone, Debug, PartialEq)]
pub struct Table3 {
    pub m: usize,
    pub data: Vec<C64>,
}

impl Table3 {
    pub fn zeros(m: usize) -> Self {
        Self { m, data: vec![ZERO; m * m * m] }
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize, k: usize) -> C64 {
        self.data[(i * self.m + j) * self.m + k]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, k: usize, v: C64) {
        self.data[(i * self.m + j) * self.m + k] = v;
    }

    pub fn max_abs_diff(&self, other: &Table3) -> f64 {
        self.data.iter().zip(&other.data).fold(0.0, |m, (a, b)| m.max((a - b).norm()))
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, a| m.max(a.norm()))
    }
}

/// `Γ^C_{AB}` at a point; `gamma.get(c, a, b)`.
#[derive(Clone, Debug)]
pub struct ConnectionField {
    pub flavor: Flavor,
    pub point: ChartPoint,
    pub n: usize,
    pub gamma: Table3,
}

/// One component of a connection table, for reporting.
#[derive(Clone, Debug, Serialize)]
pub struct Component {
    pub upper: String,
    pub lower: [String; 2],
    pub re: f64,
    pub im: f64,
}

fn label(n: usize, a: usize) -> String {
    crate::chart::ComplexIndex::from_flat(n, a).label()
}

impl ConnectionField {
    /// `(Γ(u, v))^C = Γ^C_{AB} u^A v^B` on complexified vectors.
    pub fn contract(&self, u: &[C64], v: &[C64]) -> Vec<C64> {
        contract3(&self.gamma, u, v)
    }

    /// `Γ(u, v)` for real vectors, returned as real components.
    pub fn contract_real(&self, u: &[f64], v: &[f64]) -> Vec<f64> {
        crate::chart::realify(&self.contract(&complexify(u), &complexify(v)))
    }

    pub fn nonzero_components(&self, tol: f64) -> Vec<Component> {
        let m = 2 * self.n;
        let mut out = Vec::new();
        for c in 0..m {
            for a in 0..m {
                for b in 0..m {
                    let v = self.gamma.get(c, a, b);
                    if v.norm() > tol {
                        out.push(Component {
                            upper: label(self.n, c),
                            lower: [label(self.n, a), label(self.n, b)],
                            re: v.re,
                            im: v.im,
                        });
                    }
                }
            }
        }
        out
    }

    /// `max |Γ^{C̄}_{ĀB̄} − conj(Γ^C_{AB})|`.
    pub fn conjugation_defect(&self) -> f64 {
        conjugation_defect3(&self.gamma, self.n)
    }
}

pub fn conjugation_defect3(t: &Table3, n: usize) -> f64 {
    let m = 2 * n;
    let mut worst: f64 = 0.0;
    for c in 0..m {
        for a in 0..m {
            for b in 0..m {
                let lhs = t.get(conj_index(n, c), conj_index(n, a), conj_index(n, b));
                worst = worst.max((lhs - t.get(c, a, b).conj()).norm());
            }
        }
    }
    worst
}

pub(crate) fn contract3(t: &Table3, u: &[C64], v: &[C64]) -> Vec<C64> {
    let m = t.m;
    let mut out = vec![ZERO; m];
    for a in 0..m {
        if u[a] == ZERO {
            continue;
        }
        for b in 0..m {
            let w = u[a] * v[b];
            if w == ZERO {
                continue;
            }
            for (c, o) in out.iter_mut().enumerate() {
                *o += t.get(c, a, b) * w;
            }
        }
    }
    out
}

/// Lowered connection symbols `L_{ABE} = g(∇_{∂_A}∂_B, ∂_E)` (stored at `(a, b, e)`)
/// from a table of metric derivatives `d(x, y, z) = ∂_X g_{YZ}`.
///
/// The map is linear in `d`, so feeding it second derivatives yields `∂_F L`.
fn lowered<F>(flavor: Flavor, n: usize, d: F) -> Table3
where
    F: Fn(usize, usize, usize) -> C64,
{
    let m = 2 * n;
    let mut out = Table3::zeros(m);
    for a in 0..m {
        for b in 0..m {
            for e in 0..m {
                let s = d(b, a, e) + d(a, b, e) - d(e, a, b);
                let mut v = s * 0.5;
                if flavor == Flavor::StromingerBismut {
                    let (ea, eb, ee) = (j_eigen(n, a), j_eigen(n, b), j_eigen(n, e));
                    // dω_{ABE} with ω_{XY} = ε_X g_{XY}, then T_{ABE} = ε_A ε_B ε_E dω_{ABE}.
                    let domega = eb * d(a, b, e) + ee * d(b, e, a) + ea * d(e, a, b);
                    v += ea * eb * ee * domega * 0.5;
                }
                out.set(a, b, e, v);
            }
        }
    }
    out
}

fn raise(ginv: &CMatrix, low: &Table3) -> Table3 {
    let m = low.m;
    let mut out = Table3::zeros(m);
    for c in 0..m {
        for a in 0..m {
            for b in 0..m {
                let mut s = ZERO;
                for e in 0..m {
                    let gi = ginv[(c, e)];
                    if gi != ZERO {
                        s += gi * low.get(a, b, e);
                    }
                }
                out.set(c, a, b, s);
            }
        }
    }
    out
}

fn metric_derivative_tables(n: usize, part: &MetricPartials) -> Vec<CMatrix> {
    (0..2 * n).map(|e| complex_metric_derivative(n, part.d(n, e))).collect()
}

/// Levi-Civita symbols from the general complexified formula.
fn levi_civita_general(n: usize, cm: &ComplexMetric, part: &MetricPartials) -> Table3 {
    let dg = metric_derivative_tables(n, part);
    let low = lowered(Flavor::LeviCivita, n, |x, y, z| dg[x][(y, z)]);
    raise(&cm.ginv, &low)
}

/// Strominger-Bismut symbols from the closed-form families; all other families are zero.
fn strominger_bismut_explicit(n: usize, cm: &ComplexMetric, part: &MetricPartials) -> Table3 {
    let m = 2 * n;
    let mut t = Table3::zeros(m);
    // h^{kℓ̄} = g^{k, n+ℓ}
    let hup = |k: usize, l: usize| cm.ginv[(k, n + l)];
    let dz = &part.first.dz;
    let dzb = &part.first.dzbar;
    for k in 0..n {
        for i in 0..n {
            for j in 0..n {
                // Γ^k_{ij} = h^{kℓ̄} ∂_j h_{iℓ̄}
                let mut g_ij = ZERO;
                // Γ^k_{j̄i} = h^{kℓ̄}(∂_j̄ h_{iℓ̄} − ∂_ℓ̄ h_{ij̄})
                let mut g_jbar_i = ZERO;
                for l in 0..n {
                    g_ij += hup(k, l) * dz[j][(i, l)];
                    g_jbar_i += hup(k, l) * (dzb[j][(i, l)] - dzb[l][(i, j)]);
                }
                t.set(k, i, j, g_ij);
                t.set(n + k, n + i, n + j, g_ij.conj());
                t.set(k, n + j, i, g_jbar_i);
                t.set(n + k, j, n + i, g_jbar_i.conj());
            }
        }
    }
    t
}

/// Christoffel table of the requested flavor at `p`.
pub fn christoffel(flavor: Flavor, model: &MetricModel, p: &ChartPoint) -> Result<ConnectionField> {
    let ev = model.eval_metric(p)?;
    let cm = ComplexMetric::from_eval(&ev);
    let part = model.metric_partials(p, false)?;
    let n = model.n();
    let gamma = match flavor {
        Flavor::LeviCivita => levi_civita_general(n, &cm, &part),
        Flavor::StromingerBismut => strominger_bismut_explicit(n, &cm, &part),
    };
    Ok(ConnectionField { flavor, point: p.clone(), n, gamma })
}

/// Christoffel symbols together with their first derivatives `∂_F Γ^C_{AB}`.
#[derive(Clone, Debug)]
pub struct ConnectionJet {
    pub flavor: Flavor,
    pub n: usize,
    pub metric: ComplexMetric,
    pub gamma: Table3,
    /// `dgamma[f].get(c, a, b) = ∂Γ^C_{AB}/∂z^F`
    pub dgamma: Vec<Table3>,
}

/// `∂_F ∂_E H` for flat indices.
fn second_h(n: usize, part: &MetricPartials, f: usize, e: usize) -> CMatrix {
    let sec = part.second.as_ref().expect("second derivatives requested");
    match (f < n, e < n) {
        (true, true) => sec.dzdz[f][e].clone(),
        (true, false) => sec.dzdzbar[f][e - n].clone(),
        (false, true) => sec.dzdzbar[e][f - n].clone(),
        (false, false) => sec.dzdz[f - n][e - n].adjoint(),
    }
}

pub fn connection_jet(flavor: Flavor, model: &MetricModel, p: &ChartPoint) -> Result<ConnectionJet> {
    let n = model.n();
    let m = 2 * n;
    let ev = model.eval_metric(p)?;
    let cm = ComplexMetric::from_eval(&ev);
    let part = model.metric_partials(p, true)?;
    let dg = metric_derivative_tables(n, &part);
    let low = lowered(flavor, n, |x, y, z| dg[x][(y, z)]);
    let gamma = raise(&cm.ginv, &low);
    let mut dgamma = Vec::with_capacity(m);
    for f in 0..m {
        let ddg: Vec<CMatrix> = (0..m)
            .map(|e| complex_metric_derivative(n, &second_h(n, &part, f, e)))
            .collect();
        let dlow = lowered(flavor, n, |x, y, z| ddg[x][(y, z)]);
        let dginv = -(&cm.ginv * &dg[f] * &cm.ginv);
        let mut dg_f = raise(&cm.ginv, &dlow);
        let extra = raise(&dginv, &low);
        for (a, b) in dg_f.data.iter_mut().zip(&extra.data) {
            *a += b;
        }
        dgamma.push(dg_f);
    }
    Ok(ConnectionJet { flavor, n, metric: cm, gamma, dgamma })
}

/// Strominger-Bismut torsion at a point.
#[derive(Clone, Debug)]
pub struct TorsionField {
    pub point: ChartPoint,
    pub n: usize,
    /// `t_mixed[(k*n + i)*n + j] = T^k_{ij}`
    pub t_mixed: Vec<C64>,
    /// Fully lowered, totally skew `T_{ABC}` stored at `(a, b, c)`.
    pub lowered: Table3,
    /// `T^C_{AB}` stored at `(c, a, b)`.
    pub raised: Table3,
}

impl TorsionField {
    pub fn mixed(&self, k: usize, i: usize, j: usize) -> C64 {
        self.t_mixed[(k * self.n + i) * self.n + j]
    }

    pub fn eval_complex(&self, u: &[C64], v: &[C64], w: &[C64]) -> C64 {
        let m = 2 * self.n;
        let mut s = ZERO;
        for a in 0..m {
            for b in 0..m {
                let uv = u[a] * v[b];
                if uv == ZERO {
                    continue;
                }
                for c in 0..m {
                    s += self.lowered.get(a, b, c) * uv * w[c];
                }
            }
        }
        s
    }

    /// `T(X, Y, Z)` on real vectors.
    pub fn eval(&self, x: &TangentVector, y: &TangentVector, z: &TangentVector) -> f64 {
        self.eval_complex(&x.complexified(), &y.complexified(), &z.complexified()).re
    }
}

/// Lowered torsion from the generators `G_{ijℓ} = T_{ijℓ̄}` by skew symmetry and conjugation.
fn lowered_torsion(n: usize, gen: &dyn Fn(usize, usize, usize) -> C64) -> Table3 {
    let m = 2 * n;
    let mut t = Table3::zeros(m);
    let one_barred = |a: usize, b: usize, c: usize| -> C64 {
        match (a >= n, b >= n, c >= n) {
            (false, false, true) => gen(a, b, c - n),
            (false, true, false) => -gen(a, c, b - n),
            (true, false, false) => gen(b, c, a - n),
            _ => ZERO,
        }
    };
    for a in 0..m {
        for b in 0..m {
            for c in 0..m {
                let barred = [a, b, c].iter().filter(|&&x| x >= n).count();
                let v = match barred {
                    1 => one_barred(a, b, c),
                    2 => one_barred(conj_index(n, a), conj_index(n, b), conj_index(n, c)).conj(),
                    _ => ZERO,
                };
                t.set(a, b, c, v);
            }
        }
    }
    t
}

pub fn torsion_sb(model: &MetricModel, p: &ChartPoint) -> Result<TorsionField> {
    let n = model.n();
    let ev = model.eval_metric(p)?;
    let cm = ComplexMetric::from_eval(&ev);
    let part = model.metric_partials(p, false)?;
    let dz = &part.first.dz;
    let gen = |i: usize, j: usize, l: usize| dz[j][(i, l)] - dz[i][(j, l)];
    let mut t_mixed = vec![ZERO; n * n * n];
    for k in 0..n {
        for i in 0..n {
            for j in 0..n {
                let mut s = ZERO;
                for l in 0..n {
                    s += ev.h_upper(k, l) * gen(i, j, l);
                }
                t_mixed[(k * n + i) * n + j] = s;
            }
        }
    }
    let lowered = lowered_torsion(n, &gen);
    let raised = {
        let m = 2 * n;
        let mut r = Table3::zeros(m);
        for c in 0..m {
            for a in 0..m {
                for b in 0..m {
                    let mut s = ZERO;
                    for d in 0..m {
                        s += cm.ginv[(c, d)] * lowered.get(a, b, d);
                    }
                    r.set(c, a, b, s);
                }
            }
        }
        r
    };
    Ok(TorsionField { point: p.clone(), n, t_mixed, lowered, raised })
}

/// Trace torsion `η_k = Σ_s T^s_{sk}`.
#[derive(Clone, Debug, PartialEq)]
pub struct TraceTorsion {
    pub eta: Vec<C64>,
}

impl TraceTorsion {
    pub fn norm(&self) -> f64 {
        self.eta.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt()
    }
}

pub fn trace_torsion(model: &MetricModel, p: &ChartPoint) -> Result<TraceTorsion> {
    let t = torsion_sb(model, p)?;
    let n = t.n;
    Ok(TraceTorsion { eta: (0..n).map(|k| (0..n).map(|s| t.mixed(s, s, k)).sum()).collect() })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DefiningResiduals {
    pub r_defn: f64,
    pub r_torsion: f64,
}

/// Residuals of `g(∇^SB_X Y, Z) = g(∇^LC_X Y, Z) + ½ dω(JX,JY,JZ)` and
/// `T(X,Y,Z) = dω(JX,JY,JZ)` for coordinate-constant extensions of `X, Y, Z`.
pub fn defining_relation_residuals(
    model: &MetricModel,
    p: &ChartPoint,
    x: &TangentVector,
    y: &TangentVector,
    z: &TangentVector,
) -> Result<DefiningResiduals> {
    use crate::chart::apply_j;
    let lc = christoffel(Flavor::LeviCivita, model, p)?;
    let sb = christoffel(Flavor::StromingerBismut, model, p)?;
    let torsion = torsion_sb(model, p)?;
    let cm = model.complex_metric(p)?;
    let (u, v, w) = (x.complexified(), y.complexified(), z.complexified());
    let d_sb = cm.pair(&sb.contract(&u, &v), &w);
    let d_lc = cm.pair(&lc.contract(&u, &v), &w);
    let domega = model.d_omega(p, &apply_j(x), &apply_j(y), &apply_j(z))?;
    let t = torsion.eval_complex(&u, &v, &w);
    Ok(DefiningResiduals {
        r_defn: (d_sb - d_lc - C64::from(0.5 * domega)).norm(),
        r_torsion: (t - C64::from(domega)).norm(),
    })
}

/// `max |^SBΓ − ^LCΓ − ½T|` over all components.
pub fn connection_difference_defect(model: &MetricModel, p: &ChartPoint) -> Result<f64> {
    let lc = christoffel(Flavor::LeviCivita, model, p)?;
    let sb = christoffel(Flavor::StromingerBismut, model, p)?;
    let t = torsion_sb(model, p)?;
    Ok(sb
        .gamma
        .data
        .iter()
        .zip(&lc.gamma.data)
        .zip(&t.raised.data)
        .fold(0.0, |m, ((s, l), tt)| m.max((s - l - tt * 0.5).norm())))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::c;
    use crate::models::model_from_str;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn random_vector(rng: &mut ChaCha8Rng, n: usize) -> TangentVector {
        use rand::Rng;
        TangentVector::from_real((0..2 * n).map(|_| rng.random_range(-1.0..1.0)).collect())
    }

    #[test]
    fn flat_symbols_vanish() {
        let m = model_from_str("flat(3)").unwrap();
        let p = ChartPoint::new(vec![c(0.3, 0.1), c(-1.0, 2.0), c(0.0, 0.5)]);
        for flavor in [Flavor::LeviCivita, Flavor::StromingerBismut] {
            assert_eq!(christoffel(flavor, &m, &p).unwrap().gamma.max_abs(), 0.0);
        }
        assert_eq!(trace_torsion(&m, &p).unwrap().norm(), 0.0);
    }

    #[test]
    fn fubini_study_origin_sb_symbol_is_zero() {
        let m = model_from_str("fubini_study(1,1.0)").unwrap();
        let sb = christoffel(Flavor::StromingerBismut, &m, &ChartPoint::origin(1)).unwrap();
        assert!(sb.gamma.get(0, 0, 0).norm() < 1e-15);
    }

    #[test]
    fn hopf_symbols_match_closed_form() {
        // h = δ/|z|² at (1,0): ∂_1 h_{11̄} = −1, so Γ¹₁₁ = −1, Γ²₂₁ = −1, Γ²₁₂ = 0.
        let m = model_from_str("hopf(2)").unwrap();
        let p = ChartPoint::new(vec![c(1.0, 0.0), c(0.0, 0.0)]);
        let sb = christoffel(Flavor::StromingerBismut, &m, &p).unwrap();
        assert!((sb.gamma.get(0, 0, 0) - c(-1.0, 0.0)).norm() < 1e-14);
        assert!((sb.gamma.get(1, 1, 0) - c(-1.0, 0.0)).norm() < 1e-14);
        assert!(sb.gamma.get(1, 0, 1).norm() < 1e-14);
        let t = torsion_sb(&m, &p).unwrap();
        assert!((t.mixed(1, 0, 1) - c(1.0, 0.0)).norm() < 1e-14);
        let eta = trace_torsion(&m, &p).unwrap().eta;
        assert!((eta[0] - c(-1.0, 0.0)).norm() < 1e-14);
        assert!(eta[1].norm() < 1e-14);
    }

    #[test]
    fn hopf_trace_torsion_matches_formula_at_random_points() {
        // η_k = (1 − n) z̄_k / |z|²
        let m = model_from_str("hopf(2)").unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..10 {
            let p = m.random_point(&mut rng);
            let r2: f64 = p.z.iter().map(|z| z.norm_sqr()).sum();
            let eta = trace_torsion(&m, &p).unwrap().eta;
            for k in 0..2 {
                assert!((eta[k] - p.z[k].conj() * (-1.0 / r2)).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn sb_families_vanish_exactly() {
        let m = model_from_str("hopf(2)").unwrap();
        let p = ChartPoint::new(vec![c(0.7, -0.2), c(0.4, 0.9)]);
        let sb = christoffel(Flavor::StromingerBismut, &m, &p).unwrap();
        let n = 2;
        for k in 0..n {
            for i in 0..n {
                for j in 0..n {
                    assert_eq!(sb.gamma.get(k, i, n + j), ZERO);
                    assert_eq!(sb.gamma.get(k, n + i, n + j), ZERO);
                    assert_eq!(sb.gamma.get(n + k, i, j), ZERO);
                }
            }
        }
        assert!(sb.conjugation_defect() < 1e-15);
    }

    #[test]
    fn explicit_sb_agrees_with_lowered_route() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for spec in ["hopf(2)", "fs_perturbed(2,0.15)", "fubini_study(2,1.5)"] {
            let m = model_from_str(spec).unwrap();
            for _ in 0..5 {
                let p = m.random_point(&mut rng);
                let explicit = christoffel(Flavor::StromingerBismut, &m, &p).unwrap();
                let jet = connection_jet(Flavor::StromingerBismut, &m, &p).unwrap();
                assert!(explicit.gamma.max_abs_diff(&jet.gamma) < 1e-12, "{spec}");
                let lc = christoffel(Flavor::LeviCivita, &m, &p).unwrap();
                let lc_jet = connection_jet(Flavor::LeviCivita, &m, &p).unwrap();
                assert!(lc.gamma.max_abs_diff(&lc_jet.gamma) < 1e-12);
            }
        }
    }

    #[test]
    fn torsion_is_antisymmetric_and_matches_domega() {
        let m = model_from_str("hopf(2)").unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..20 {
            let p = m.random_point(&mut rng);
            let t = torsion_sb(&m, &p).unwrap();
            let (x, y, z) = (random_vector(&mut rng, 2), random_vector(&mut rng, 2), random_vector(&mut rng, 2));
            assert!((t.eval(&x, &y, &z) + t.eval(&y, &x, &z)).abs() < 1e-12);
            assert!((t.eval(&x, &y, &z) + t.eval(&x, &z, &y)).abs() < 1e-12);
            let r = defining_relation_residuals(&m, &p, &x, &y, &z).unwrap();
            assert!(r.r_defn < 1e-10 && r.r_torsion < 1e-10, "{r:?}");
        }
    }

    #[test]
    fn sb_minus_lc_is_half_torsion() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for spec in ["hopf(2)", "hopf(3)", "fs_perturbed(2,0.2)"] {
            let m = model_from_str(spec).unwrap();
            for _ in 0..5 {
                let p = m.random_point(&mut rng);
                assert!(connection_difference_defect(&m, &p).unwrap() < 1e-10, "{spec}");
            }
        }
    }

    #[test]
    fn finite_difference_route_agrees_with_analytic() {
        let m = model_from_str("hopf(2)").unwrap();
        let fd = m.finite_difference_only();
        let p = ChartPoint::new(vec![c(0.8, 0.3), c(-0.5, 0.6)]);
        let a = christoffel(Flavor::StromingerBismut, &m, &p).unwrap();
        let b = christoffel(Flavor::StromingerBismut, &fd, &p).unwrap();
        assert!(a.gamma.max_abs_diff(&b.gamma) < 1e-8);
    }

    #[test]
    fn kahler_flavors_coincide() {
        let m = model_from_str("fubini_study(2,1.0)").unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..5 {
            let p = m.random_point(&mut rng);
            let lc = christoffel(Flavor::LeviCivita, &m, &p).unwrap();
            let sb = christoffel(Flavor::StromingerBismut, &m, &p).unwrap();
            assert!(lc.gamma.max_abs_diff(&sb.gamma) < 1e-12);
            assert!(torsion_sb(&m, &p).unwrap().lowered.max_abs() < 1e-12);
        }
    }
}
