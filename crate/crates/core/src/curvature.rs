//! Curvature of the Levi-Civita and Strominger-Bismut connections, Ricci flavors,
//! holomorphic sectional curvature and the balanced-metric identities.
//!
//! `R(X,Y,Z,W) = ⟨∇_X∇_Y Z − ∇_Y∇_X Z − ∇_{[X,Y]}Z, W⟩`, tabulated on flat complex
//! indices as `R_{ABCD}`. Every consumer (index forms, Jacobi fields, Ricci) goes
//! through [`CurvatureField`] so the slot order is fixed in one place.

use serde::Serialize;

use crate::chart::{conj_index, ChartPoint, ComplexMetric, MetricModel, TangentVector};
use crate::connections::{connection_jet, torsion_sb, Flavor};
use crate::error::{Error, Result};
use crate::linalg::{CMatrix, C64, ZERO};

/// Dense `m⁴` complex table indexed `(a, b, c, d)`.
#[derive(Clone, Debug, PartialEq)]
pub struct Table4 {
    pub m: usize,
    pub data: Vec<C64>,
}

impl Table4 {
    pub fn zeros(m: usize) -> Self {
        Self { m, data: vec![ZERO; m * m * m * m] }
    }

    #[inline]
    pub fn get(&self, a: usize, b: usize, c: usize, d: usize) -> C64 {
        self.data[((a * self.m + b) * self.m + c) * self.m + d]
    }

    #[inline]
    fn set(&mut self, a: usize, b: usize, c: usize, d: usize, v: C64) {
        let m = self.m;
        self.data[((a * m + b) * m + c) * m + d] = v;
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.norm()))
    }

    pub fn max_abs_diff(&self, other: &Table4) -> f64 {
        self.data.iter().zip(&other.data).fold(0.0, |m, (a, b)| m.max((a - b).norm()))
    }
}

#[derive(Clone, Debug)]
pub struct CurvatureField {
    pub flavor: Flavor,
    pub point: ChartPoint,
    pub n: usize,
    pub metric: ComplexMetric,
    /// `R_{ABCD} = ⟨R(∂_A,∂_B)∂_C, ∂_D⟩`
    pub r: Table4,
}

pub fn curvature(flavor: Flavor, model: &MetricModel, p: &ChartPoint) -> Result<CurvatureField> {
    let jet = connection_jet(flavor, model, p)?;
    let n = jet.n;
    let m = 2 * n;
    let gamma = &jet.gamma;
    let g = &jet.metric.g;
    let mut r = Table4::zeros(m);
    let mut upper = vec![ZERO; m];
    for a in 0..m {
        for b in 0..m {
            for cc in 0..m {
                // R^D_{ABC} = ∂_AΓ^D_{BC} − ∂_BΓ^D_{AC} + Γ^D_{AE}Γ^E_{BC} − Γ^D_{BE}Γ^E_{AC}
                for (d, u) in upper.iter_mut().enumerate() {
                    let mut v = jet.dgamma[a].get(d, b, cc) - jet.dgamma[b].get(d, a, cc);
                    for e in 0..m {
                        v += gamma.get(d, a, e) * gamma.get(e, b, cc) - gamma.get(d, b, e) * gamma.get(e, a, cc);
                    }
                    *u = v;
                }
                for d in 0..m {
                    let low: C64 = (0..m).map(|e| upper[e] * g[(e, d)]).sum();
                    r.set(a, b, cc, d, low);
                }
            }
        }
    }
    Ok(CurvatureField { flavor, point: p.clone(), n, metric: jet.metric, r })
}

impl CurvatureField {
    fn m(&self) -> usize {
        2 * self.n
    }

    /// `R(u, v, w, x)` on complexified vectors.
    pub fn eval_complex(&self, u: &[C64], v: &[C64], w: &[C64], x: &[C64]) -> C64 {
        let m = self.m();
        let mut s = ZERO;
        for a in 0..m {
            if u[a] == ZERO {
                continue;
            }
            for b in 0..m {
                let ab = u[a] * v[b];
                if ab == ZERO {
                    continue;
                }
                for c in 0..m {
                    let abc = ab * w[c];
                    if abc == ZERO {
                        continue;
                    }
                    for d in 0..m {
                        s += self.r.get(a, b, c, d) * abc * x[d];
                    }
                }
            }
        }
        s
    }

    /// `R(X, Y, Z, W)` on real vectors.
    pub fn eval(&self, x: &TangentVector, y: &TangentVector, z: &TangentVector, w: &TangentVector) -> f64 {
        self.eval_complex(&x.complexified(), &y.complexified(), &z.complexified(), &w.complexified()).re
    }

    /// Largest violation of `R_{ABCD} = −R_{BACD}` and `R_{ABCD} = −R_{ABDC}`, relative to `max|R|`.
    pub fn skew_defect(&self) -> f64 {
        let m = self.m();
        let mut worst: f64 = 0.0;
        for a in 0..m {
            for b in 0..m {
                for c in 0..m {
                    for d in 0..m {
                        let v = self.r.get(a, b, c, d);
                        worst = worst.max((v + self.r.get(b, a, c, d)).norm());
                        worst = worst.max((v + self.r.get(a, b, d, c)).norm());
                    }
                }
            }
        }
        worst / self.r.max_abs().max(1.0)
    }

    /// Largest `|R_{ABCD}|` over last pairs of pure type (both unbarred or both barred).
    pub fn type_vanishing_defect(&self) -> f64 {
        let m = self.m();
        let n = self.n;
        let mut worst: f64 = 0.0;
        for a in 0..m {
            for b in 0..m {
                for c in 0..m {
                    for d in 0..m {
                        if (c < n) == (d < n) {
                            worst = worst.max(self.r.get(a, b, c, d).norm());
                        }
                    }
                }
            }
        }
        worst
    }

    /// `max |R_{ĀB̄C̄D̄} − conj(R_{ABCD})|`
    pub fn conjugation_defect(&self) -> f64 {
        let m = self.m();
        let n = self.n;
        let mut worst: f64 = 0.0;
        for a in 0..m {
            for b in 0..m {
                for c in 0..m {
                    for d in 0..m {
                        let bar = self.r.get(conj_index(n, a), conj_index(n, b), conj_index(n, c), conj_index(n, d));
                        worst = worst.max((bar - self.r.get(a, b, c, d).conj()).norm());
                    }
                }
            }
        }
        worst
    }

    /// `|Σ_cyc R(X,Y,Z,·)|` measured against the coordinate basis (max over the last slot).
    pub fn first_bianchi_defect(&self, x: &TangentVector, y: &TangentVector, z: &TangentVector) -> f64 {
        let n = self.n;
        (0..2 * n)
            .map(|k| {
                let w = TangentVector::coordinate(n, k);
                (self.eval(x, y, z, &w) + self.eval(y, z, x, &w) + self.eval(z, x, y, &w)).abs()
            })
            .fold(0.0, f64::max)
    }

    /// `|R(X,Y,Z,W) − R(Z,W,X,Y)|`
    pub fn pair_interchange_defect(
        &self,
        x: &TangentVector,
        y: &TangentVector,
        z: &TangentVector,
        w: &TangentVector,
    ) -> f64 {
        (self.eval(x, y, z, w) - self.eval(z, w, x, y)).abs()
    }

    /// `Ric(U, W) = Σ_{A,B} g^{AB} R(∂_A, U, W, ∂_B)` on complexified vectors.
    pub fn ricci_complex(&self, u: &[C64], w: &[C64]) -> C64 {
        let m = self.m();
        let mut s = ZERO;
        for a in 0..m {
            for b in 0..m {
                let gi = self.metric.ginv[(a, b)];
                if gi == ZERO {
                    continue;
                }
                let mut inner = ZERO;
                for c in 0..m {
                    if u[c] == ZERO {
                        continue;
                    }
                    for d in 0..m {
                        inner += self.r.get(a, c, d, b) * u[c] * w[d];
                    }
                }
                s += gi * inner;
            }
        }
        s
    }

    /// Real Ricci form through the complexified contraction.
    pub fn ricci_real(&self, x: &TangentVector, y: &TangentVector) -> C64 {
        self.ricci_complex(&x.complexified(), &y.complexified())
    }

    /// Real Ricci form through the real coordinate frame and the inverse of the real metric.
    pub fn ricci_real_by_real_frame(&self, g_real: &crate::linalg::RMatrix, x: &TangentVector, y: &TangentVector) -> f64 {
        let n = self.n;
        let m = 2 * n;
        let ginv = g_real.clone().try_inverse().expect("real metric is positive definite");
        let mut s = 0.0;
        for i in 0..m {
            let ei = TangentVector::coordinate(n, i);
            for l in 0..m {
                if ginv[(i, l)] == 0.0 {
                    continue;
                }
                s += ginv[(i, l)] * self.eval(&ei, x, y, &TangentVector::coordinate(n, l));
            }
        }
        s
    }

    /// `Ric(∂_p, ∂_q̄)` as two equal contractions:
    /// `h^{ℓī} R_{īpq̄ℓ}` and `h^{ℓī} R_{pīℓq̄}`.
    pub fn ricci_mixed_forms(&self, p: usize, q: usize) -> (C64, C64) {
        let n = self.n;
        let mut first = ZERO;
        let mut second = ZERO;
        for i in 0..n {
            for l in 0..n {
                let hup = self.metric.ginv[(n + i, l)];
                first += hup * self.r.get(n + i, p, n + q, l);
                second += hup * self.r.get(p, n + i, l, n + q);
            }
        }
        (first, second)
    }

    /// `𝔯ic(V) = h^{iℓ̄} R(∂_i, V̄, V, ∂_ℓ̄)` for `V = v^k ∂_k`.
    pub fn ricci_hol_complex(&self, v: &[C64]) -> C64 {
        let n = self.n;
        let m = 2 * n;
        let mut vv = vec![ZERO; m];
        let mut vbar = vec![ZERO; m];
        for k in 0..n {
            vv[k] = v[k];
            vbar[n + k] = v[k].conj();
        }
        let mut s = ZERO;
        for i in 0..n {
            for l in 0..n {
                let hup = self.metric.ginv[(i, n + l)];
                let mut inner = ZERO;
                for b in n..m {
                    for c in 0..n {
                        inner += self.r.get(i, b, c, n + l) * vbar[b] * vv[c];
                    }
                }
                s += hup * inner;
            }
        }
        s
    }

    /// `h^{iℓ̄} R(∂_i, V, V̄, ∂_ℓ̄)`: the swapped slot order, kept as a diagnostic only.
    pub fn ricci_hol_swapped(&self, v: &[C64]) -> C64 {
        let n = self.n;
        let mut s = ZERO;
        for i in 0..n {
            for l in 0..n {
                let hup = self.metric.ginv[(i, n + l)];
                for b in 0..n {
                    for c in 0..n {
                        s += hup * self.r.get(i, b, n + c, n + l) * v[b] * v[c].conj();
                    }
                }
            }
        }
        s
    }

    /// `|V|² = h_{ij̄} v^i v̄^j`
    pub fn hol_norm2(&self, v: &[C64]) -> f64 {
        let n = self.n;
        let mut s = ZERO;
        for i in 0..n {
            for j in 0..n {
                s += self.metric.g[(i, n + j)] * v[i] * v[j].conj();
            }
        }
        s.re
    }

    /// `R(JX, X, X, JX) / |X|⁴`
    pub fn hsc(&self, x: &TangentVector) -> Result<f64> {
        let u = x.complexified();
        let norm2 = self.metric.pair(&u, &u).re;
        if !(norm2 > 0.0) || x.euclidean_norm() == 0.0 {
            return Err(Error::ZeroVector);
        }
        let jx = crate::chart::apply_j(x).complexified();
        Ok(self.eval_complex(&jx, &u, &u, &jx).re / (norm2 * norm2))
    }

    /// `M_{kj} = h^{iℓ̄} R_{ij̄kℓ̄}`
    pub fn contracted_ricci_matrix(&self) -> CMatrix {
        let n = self.n;
        CMatrix::from_fn(n, n, |k, j| {
            let mut s = ZERO;
            for i in 0..n {
                for l in 0..n {
                    s += self.metric.ginv[(i, n + l)] * self.r.get(i, n + j, k, n + l);
                }
            }
            s
        })
    }

    /// `max_{j,k} |h^{iℓ̄} R_{ijkℓ̄}|`
    pub fn holomorphic_trace_defect(&self) -> f64 {
        let n = self.n;
        let mut worst: f64 = 0.0;
        for j in 0..n {
            for k in 0..n {
                let mut s = ZERO;
                for i in 0..n {
                    for l in 0..n {
                        s += self.metric.ginv[(i, n + l)] * self.r.get(i, j, k, n + l);
                    }
                }
                worst = worst.max(s.norm());
            }
        }
        worst
    }
}

/// Real Ricci of the SB connection via the complexified contraction, cross-checked
/// against the real-frame sum.
pub fn ricci_real_sb(model: &MetricModel, p: &ChartPoint, x: &TangentVector, y: &TangentVector) -> Result<f64> {
    let routes = ricci_real_routes(model, p, x, y)?;
    let scale = 1.0 + routes.complexified.norm();
    if (routes.complexified.re - routes.real_frame).abs() > 1e-8 * scale || routes.complexified.im.abs() > 1e-10 * scale {
        return Err(Error::SelfTest(format!(
            "Ricci routes disagree at {p}: complexified {} vs real frame {}",
            routes.complexified, routes.real_frame
        )));
    }
    Ok(routes.complexified.re)
}

#[derive(Clone, Copy, Debug)]
pub struct RicciRoutes {
    pub complexified: C64,
    pub real_frame: f64,
}

pub fn ricci_real_routes(model: &MetricModel, p: &ChartPoint, x: &TangentVector, y: &TangentVector) -> Result<RicciRoutes> {
    let r = curvature(Flavor::StromingerBismut, model, p)?;
    let ev = model.eval_metric(p)?;
    Ok(RicciRoutes { complexified: r.ricci_real(x, y), real_frame: r.ricci_real_by_real_frame(&ev.g_real, x, y) })
}

pub fn ricci_hol_sb(model: &MetricModel, p: &ChartPoint, v: &[C64]) -> Result<f64> {
    if v.iter().all(|c| *c == ZERO) {
        return Err(Error::ZeroVector);
    }
    let r = curvature(Flavor::StromingerBismut, model, p)?;
    Ok(r.ricci_hol_complex(v).re)
}

pub fn hsc_sb(model: &MetricModel, p: &ChartPoint, x: &TangentVector) -> Result<f64> {
    curvature(Flavor::StromingerBismut, model, p)?.hsc(x)
}

/// Residuals of the balanced-metric identities at one point.
#[derive(Clone, Debug, Serialize)]
pub struct BalancedSample {
    pub point: Vec<f64>,
    pub trace_torsion: f64,
    /// `max_X |Ric(X,X) − 2 M_{kj} X^k X̄^j|` over a spanning probe set.
    pub ricci_identity: f64,
    pub holomorphic_trace: f64,
    pub hermitian_defect: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct BalancedReport {
    pub balanced_expected: bool,
    pub samples: Vec<BalancedSample>,
}

impl BalancedReport {
    pub fn max_trace_torsion(&self) -> f64 {
        self.samples.iter().map(|s| s.trace_torsion).fold(0.0, f64::max)
    }

    pub fn max_ricci_identity(&self) -> f64 {
        self.samples.iter().map(|s| s.ricci_identity).fold(0.0, f64::max)
    }

    pub fn max_holomorphic_trace(&self) -> f64 {
        self.samples.iter().map(|s| s.holomorphic_trace).fold(0.0, f64::max)
    }

    pub fn max_hermitian_defect(&self) -> f64 {
        self.samples.iter().map(|s| s.hermitian_defect).fold(0.0, f64::max)
    }
}

/// Probe vectors `e_a` and `e_a + e_b` (a < b): a quadratic form agreeing on these agrees everywhere.
fn polarization_probes(n: usize) -> Vec<TangentVector> {
    let m = 2 * n;
    let mut out: Vec<TangentVector> = (0..m).map(|a| TangentVector::coordinate(n, a)).collect();
    for a in 0..m {
        for b in a + 1..m {
            out.push(TangentVector::coordinate(n, a).add(&TangentVector::coordinate(n, b)));
        }
    }
    out
}

pub fn balanced_sample(model: &MetricModel, p: &ChartPoint) -> Result<BalancedSample> {
    let n = model.n();
    let r = curvature(Flavor::StromingerBismut, model, p)?;
    let eta = crate::connections::trace_torsion(model, p)?;
    let mat = r.contracted_ricci_matrix();
    let mut ricci_identity: f64 = 0.0;
    for x in polarization_probes(n) {
        let v = x.v10();
        let mut quad = ZERO;
        for k in 0..n {
            for j in 0..n {
                quad += mat[(k, j)] * v[k] * v[j].conj();
            }
        }
        ricci_identity = ricci_identity.max((r.ricci_real(&x, &x) - quad * 2.0).norm());
    }
    Ok(BalancedSample {
        point: p.to_real(),
        trace_torsion: eta.norm(),
        ricci_identity,
        holomorphic_trace: r.holomorphic_trace_defect(),
        hermitian_defect: crate::linalg::hermitian_defect(&mat),
    })
}

pub fn balanced_identities(model: &MetricModel, points: &[ChartPoint]) -> Result<BalancedReport> {
    let samples = points.iter().map(|p| balanced_sample(model, p)).collect::<Result<Vec<_>>>()?;
    Ok(BalancedReport { balanced_expected: model.tags.balanced_expected, samples })
}

/// `max |R^SB − R^LC|`, which vanishes for Kähler metrics.
pub fn kahler_curvature_gap(model: &MetricModel, p: &ChartPoint) -> Result<f64> {
    let sb = curvature(Flavor::StromingerBismut, model, p)?;
    let lc = curvature(Flavor::LeviCivita, model, p)?;
    Ok(sb.r.max_abs_diff(&lc.r))
}

/// Largest lowered torsion component, which vanishes for Kähler metrics.
pub fn torsion_magnitude(model: &MetricModel, p: &ChartPoint) -> Result<f64> {
    Ok(torsion_sb(model, p)?.lowered.max_abs())
}
