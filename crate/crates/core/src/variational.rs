//! Energy, first and second variation along geodesics, and the index form in its
//! Levi-Civita and Strominger-Bismut shapes.

use std::f64::consts::PI;
use std::sync::{Arc, OnceLock};

use rand::Rng;

use crate::chart::{apply_j, ChartPoint, MetricModel, TangentVector};
use crate::connections::{christoffel, torsion_sb, ConnectionField, Flavor, TorsionField};
use crate::curvature::{curvature, ricci_real_sb, CurvatureField};
use crate::error::{Error, Result};
use crate::geodesy::{exp_map, geodesic_acceleration, Curve, FieldAlongCurve};
use crate::linalg::{bilinear, RMatrix};
use crate::numerics::{derivative, simpson};

/// Tolerance for `α(t,0,0) = γ(t)` and for fixed endpoints of proper surfaces.
pub const SURFACE_TOL: f64 = 1e-10;

/// Default stencil half-width in `s` for energy finite differences.
pub const ENERGY_FD_DELTA: f64 = 1e-3;

/// RK4 steps used for each short `exp_{γ(t)}(s₁V + s₂W)`.
pub const SURFACE_EXP_STEPS: usize = 8;

/// `E = ½∫|γ′|²` by composite Simpson on the curve grid.
pub fn energy(model: &MetricModel, curve: &Curve) -> Result<f64> {
    let speed2: Vec<f64> = curve
        .points
        .iter()
        .zip(&curve.velocities)
        .map(|(p, v)| model.norm(p, v).map(|s| s * s))
        .collect::<Result<_>>()?;
    Ok(0.5 * simpson(&speed2, curve.step()))
}

/// Energy of a sampled curve whose velocities come from the sampled-derivative stencil.
fn sampled_energy(model: &MetricModel, points: &[ChartPoint], h: f64) -> Result<f64> {
    let raw: Vec<Vec<f64>> = points.iter().map(ChartPoint::to_real).collect();
    let vel = derivative(&raw, h)?;
    let speed2: Vec<f64> = points
        .iter()
        .zip(vel)
        .map(|(p, v)| {
            let g = model.eval_metric(p)?.g_real;
            Ok(bilinear(&g, &v, &v))
        })
        .collect::<Result<_>>()?;
    Ok(0.5 * simpson(&speed2, h))
}

/// Closed-form surface `α(t, s₁, s₂)`.
pub type SurfaceFn = Arc<dyn Fn(f64, f64, f64) -> ChartPoint + Send + Sync>;

#[derive(Clone)]
pub enum SurfaceMode {
    /// `α(t,s₁,s₂) = exp_{γ(t)}(s₁V(t) + s₂W(t))`.
    LinearFields { v: FieldAlongCurve, w: FieldAlongCurve },
    ClosedForm(SurfaceFn),
}

impl std::fmt::Debug for SurfaceMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            SurfaceMode::LinearFields { .. } => f.write_str("LinearFields"),
            SurfaceMode::ClosedForm(_) => f.write_str("ClosedForm(..)"),
        }
    }
}

/// Two-parameter variation of a base curve.
#[derive(Clone, Debug)]
pub struct VariationSurface {
    pub base: Curve,
    pub mode: SurfaceMode,
    /// Endpoints fixed for all `(s₁, s₂)`.
    pub proper: bool,
}

impl VariationSurface {
    /// Exponential surface through two fields; proper iff both vanish at the ends.
    pub fn linear_fields(base: Curve, v: FieldAlongCurve, w: FieldAlongCurve) -> Result<Self> {
        v.check_grid(&base)?;
        w.check_grid(&base)?;
        let proper = endpoint_size(&v).max(endpoint_size(&w)) <= SURFACE_TOL;
        Ok(Self { base, mode: SurfaceMode::LinearFields { v, w }, proper })
    }

    /// Closed-form surface, checked against the base curve on its grid and, when
    /// `proper` is claimed, at a few off-center parameters.
    pub fn closed_form(base: Curve, alpha: SurfaceFn, proper: bool) -> Result<Self> {
        let off = base
            .t
            .iter()
            .zip(&base.points)
            .map(|(&t, p)| euclidean_gap(&alpha(t, 0.0, 0.0), p))
            .fold(0.0, f64::max);
        if off > SURFACE_TOL {
            return Err(Error::SurfaceOffBase(off));
        }
        if proper {
            let (a, b) = (base.start(), base.end());
            let mut moved = 0.0f64;
            for (s1, s2) in [(0.1, 0.0), (0.0, 0.1), (-0.07, 0.05), (0.03, -0.11)] {
                moved = moved
                    .max(euclidean_gap(&alpha(a, s1, s2), &alpha(a, 0.0, 0.0)))
                    .max(euclidean_gap(&alpha(b, s1, s2), &alpha(b, 0.0, 0.0)));
            }
            if moved > SURFACE_TOL {
                return Err(Error::NotProper(moved));
            }
        }
        Ok(Self { base, mode: SurfaceMode::ClosedForm(alpha), proper })
    }

    /// The curve `t ↦ α(t, s₁, s₂)` on the base grid.
    pub fn curve_points(&self, model: &MetricModel, s1: f64, s2: f64) -> Result<Vec<ChartPoint>> {
        match &self.mode {
            SurfaceMode::LinearFields { v, w } => self
                .base
                .points
                .iter()
                .enumerate()
                .map(|(k, p)| {
                    let dir = v.samples[k].scaled(s1).add(&w.samples[k].scaled(s2));
                    exp_map(model, p, &dir, SURFACE_EXP_STEPS)
                })
                .collect(),
            SurfaceMode::ClosedForm(alpha) => {
                let pts: Vec<ChartPoint> = self.base.t.iter().map(|&t| alpha(t, s1, s2)).collect();
                if let Some(k) = pts.iter().position(|p| !model.contains(p)) {
                    return Err(Error::DomainExit { time: self.base.t[k] });
                }
                Ok(pts)
            }
        }
    }

    pub fn energy_at(&self, model: &MetricModel, s1: f64, s2: f64) -> Result<f64> {
        sampled_energy(model, &self.curve_points(model, s1, s2)?, self.base.step())
    }

    /// Variational fields `∂α/∂s₁`, `∂α/∂s₂` at `s = 0`. Linear surfaces return their
    /// fields; closed-form ones use a fourth-order stencil in `s` and sampled `t`-derivatives.
    pub fn variation_fields(&self) -> (FieldAlongCurve, FieldAlongCurve) {
        match &self.mode {
            SurfaceMode::LinearFields { v, w } => (v.clone(), w.clone()),
            SurfaceMode::ClosedForm(alpha) => {
                let field = |along_first: bool| {
                    FieldAlongCurve::new(
                        self.base
                            .t
                            .iter()
                            .map(|&t| {
                                let at = |s: f64| {
                                    let (s1, s2) = if along_first { (s, 0.0) } else { (0.0, s) };
                                    alpha(t, s1, s2).to_real()
                                };
                                TangentVector::from_real(four_point(at, ENERGY_FD_DELTA))
                            })
                            .collect(),
                    )
                };
                (field(true), field(false))
            }
        }
    }
}

fn endpoint_size(f: &FieldAlongCurve) -> f64 {
    let first = f.samples.first().map_or(0.0, TangentVector::euclidean_norm);
    let last = f.samples.last().map_or(0.0, TangentVector::euclidean_norm);
    first.max(last)
}

fn euclidean_gap(p: &ChartPoint, q: &ChartPoint) -> f64 {
    p.to_real().iter().zip(q.to_real()).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt()
}

/// Fourth-order central first derivative at 0 of a vector-valued map.
fn four_point(f: impl Fn(f64) -> Vec<f64>, d: f64) -> Vec<f64> {
    let (p2, p1, m1, m2) = (f(2.0 * d), f(d), f(-d), f(-2.0 * d));
    (0..p1.len()).map(|i| (-p2[i] + 8.0 * p1[i] - 8.0 * m1[i] + m2[i]) / (12.0 * d)).collect()
}

/// `∂²E/∂s₁∂s₂` at the origin by the central mixed difference with half-width `delta`.
pub fn mixed_partial_energy_fd(model: &MetricModel, surface: &VariationSurface, delta: f64) -> Result<f64> {
    let e = |s1, s2| surface.energy_at(model, s1, s2);
    Ok((e(delta, delta)? - e(delta, -delta)? - e(-delta, delta)? + e(-delta, -delta)?) / (4.0 * delta * delta))
}

/// `|dE/ds|` at `s = 0` for `α(t,s) = exp_{γ(t)}(sV(t))`, by a fourth-order stencil.
///
/// Vanishes on geodesics up to discretization error; other curves report their slope.
pub fn first_variation_residual(model: &MetricModel, curve: &Curve, v: &FieldAlongCurve) -> Result<f64> {
    v.check_grid(curve)?;
    let moved = endpoint_size(v);
    if moved > SURFACE_TOL {
        return Err(Error::NotProper(moved));
    }
    let surface = VariationSurface::linear_fields(curve.clone(), v.clone(), v.clone())?;
    let d = ENERGY_FD_DELTA;
    let e = |s: f64| surface.energy_at(model, s, 0.0);
    Ok(((-e(2.0 * d)? + 8.0 * e(d)? - 8.0 * e(-d)? + e(-2.0 * d)?) / (12.0 * d)).abs())
}

/// Per-node geometry along a curve, built on first use.
pub struct CurveGeometry<'a> {
    pub model: &'a MetricModel,
    pub curve: &'a Curve,
    metric: Vec<RMatrix>,
    connections: [OnceLock<Result<Vec<ConnectionField>>>; 2],
    curvatures: [OnceLock<Result<Vec<CurvatureField>>>; 2],
    torsion: OnceLock<Result<Vec<TorsionField>>>,
}

fn slot(flavor: Flavor) -> usize {
    match flavor {
        Flavor::LeviCivita => 0,
        Flavor::StromingerBismut => 1,
    }
}

fn cached<T>(cell: &OnceLock<Result<Vec<T>>>, build: impl FnOnce() -> Result<Vec<T>>) -> Result<&Vec<T>> {
    cell.get_or_init(build).as_ref().map_err(Clone::clone)
}

impl<'a> CurveGeometry<'a> {
    pub fn new(model: &'a MetricModel, curve: &'a Curve) -> Result<Self> {
        let metric = curve.points.iter().map(|p| Ok(model.eval_metric(p)?.g_real)).collect::<Result<_>>()?;
        Ok(Self {
            model,
            curve,
            metric,
            connections: [OnceLock::new(), OnceLock::new()],
            curvatures: [OnceLock::new(), OnceLock::new()],
            torsion: OnceLock::new(),
        })
    }

    pub fn inner(&self, k: usize, x: &TangentVector, y: &TangentVector) -> f64 {
        bilinear(&self.metric[k], &x.x, &y.x)
    }

    pub fn connections(&self, flavor: Flavor) -> Result<&Vec<ConnectionField>> {
        cached(&self.connections[slot(flavor)], || {
            self.curve.points.iter().map(|p| christoffel(flavor, self.model, p)).collect()
        })
    }

    pub fn curvatures(&self, flavor: Flavor) -> Result<&Vec<CurvatureField>> {
        cached(&self.curvatures[slot(flavor)], || {
            self.curve.points.iter().map(|p| curvature(flavor, self.model, p)).collect()
        })
    }

    pub fn torsion(&self) -> Result<&Vec<TorsionField>> {
        cached(&self.torsion, || self.curve.points.iter().map(|p| torsion_sb(self.model, p)).collect())
    }

    /// `∇_{γ′}V` at every node.
    pub fn covariant_derivative(&self, flavor: Flavor, field: &FieldAlongCurve) -> Result<Vec<TangentVector>> {
        let d = field.coordinate_derivatives(self.curve)?;
        let conn = self.connections(flavor)?;
        Ok((0..self.curve.len())
            .map(|k| {
                let g = conn[k].contract_real(&self.curve.velocities[k].x, &field.samples[k].x);
                d[k].add(&TangentVector::from_real(g))
            })
            .collect())
    }

    /// `max_t |∇_{γ′}V|`.
    pub fn covariant_residual(&self, flavor: Flavor, field: &FieldAlongCurve) -> Result<f64> {
        let d = self.covariant_derivative(flavor, field)?;
        Ok(d.iter().enumerate().map(|(k, v)| self.inner(k, v, v).sqrt()).fold(0.0, f64::max))
    }
}

/// Separate integrals of the three Strominger-Bismut second-variation terms.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SbIntegrals {
    /// `∫⟨∇V′, ∇W′⟩`
    pub kinetic: f64,
    /// `∫T(V, γ′, ∇W′)`
    pub torsion: f64,
    /// `∫R(V, γ′, γ′, W)`, entering with a minus sign.
    pub curvature: f64,
}

impl SbIntegrals {
    pub fn total(&self) -> f64 {
        self.kinetic + self.torsion - self.curvature
    }
}

pub fn second_variation_sb_parts(geom: &CurveGeometry, v: &FieldAlongCurve, w: &FieldAlongCurve) -> Result<SbIntegrals> {
    let sb = Flavor::StromingerBismut;
    let dv = geom.covariant_derivative(sb, v)?;
    let dw = geom.covariant_derivative(sb, w)?;
    let torsion = geom.torsion()?;
    let curv = geom.curvatures(sb)?;
    let vel = &geom.curve.velocities;
    let len = geom.curve.len();
    let mut kinetic = Vec::with_capacity(len);
    let mut tors = Vec::with_capacity(len);
    let mut rterm = Vec::with_capacity(len);
    for k in 0..len {
        kinetic.push(geom.inner(k, &dv[k], &dw[k]));
        tors.push(torsion[k].eval(&v.samples[k], &vel[k], &dw[k]));
        rterm.push(curv[k].eval(&v.samples[k], &vel[k], &vel[k], &w.samples[k]));
    }
    let h = geom.curve.step();
    Ok(SbIntegrals { kinetic: simpson(&kinetic, h), torsion: simpson(&tors, h), curvature: simpson(&rterm, h) })
}

/// `∫{⟨∇V′,∇W′⟩ + T(V,γ′,∇W′) − R(V,γ′,γ′,W)}` with every derivative Strominger-Bismut.
///
/// Equals `∂²E/∂s₁∂s₂` for proper variations; otherwise add [`general_boundary_term`].
pub fn second_variation_sb(geom: &CurveGeometry, v: &FieldAlongCurve, w: &FieldAlongCurve) -> Result<f64> {
    Ok(second_variation_sb_parts(geom, v, w)?.total())
}

/// `⟨∇^SB_{∂s₁}∂α/∂s₂, γ′⟩` from `a` to `b`, from a closed-form surface.
pub fn general_boundary_term(geom: &CurveGeometry, surface: &VariationSurface) -> Result<f64> {
    let SurfaceMode::ClosedForm(alpha) = &surface.mode else {
        return Err(Error::NeedsClosedForm);
    };
    let d = 1e-4;
    let curve = geom.curve;
    let conn = geom.connections(Flavor::StromingerBismut)?;
    let mut ends = [0.0; 2];
    for (slot, k) in [(0, 0), (1, curve.len() - 1)] {
        let t = curve.t[k];
        let at = |s1: f64, s2: f64| alpha(t, s1, s2).to_real();
        let (pp, pm, mp, mm) = (at(d, d), at(d, -d), at(-d, d), at(-d, -d));
        let mixed: Vec<f64> = (0..pp.len()).map(|i| (pp[i] - pm[i] - mp[i] + mm[i]) / (4.0 * d * d)).collect();
        let v = four_point(|s| at(s, 0.0), 1e-3);
        let w = four_point(|s| at(0.0, s), 1e-3);
        let gam = conn[k].contract_real(&v, &w);
        let acc = TangentVector::from_real(mixed.iter().zip(&gam).map(|(a, b)| a + b).collect());
        ends[slot] = geom.inner(k, &acc, &curve.velocities[k]);
    }
    Ok(ends[1] - ends[0])
}

/// The index form in three independently computed pieces.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct IndexFormResult {
    /// `∫{⟨∇^LC V′, ∇^LC W′⟩ − R^LC(V,γ′,γ′,W)}`
    pub value_lc: f64,
    pub value_sb_bulk: f64,
    /// `½T(V,W,γ′)` at `b` minus at `a`.
    pub boundary_term: f64,
}

impl IndexFormResult {
    pub fn reconciliation_gap(&self) -> f64 {
        (self.value_lc - self.value_sb_bulk - self.boundary_term).abs()
    }
}

pub fn index_form(geom: &CurveGeometry, v: &FieldAlongCurve, w: &FieldAlongCurve) -> Result<IndexFormResult> {
    let lc = Flavor::LeviCivita;
    let dv = geom.covariant_derivative(lc, v)?;
    let dw = geom.covariant_derivative(lc, w)?;
    let curv = geom.curvatures(lc)?;
    let vel = &geom.curve.velocities;
    let integrand: Vec<f64> = (0..geom.curve.len())
        .map(|k| geom.inner(k, &dv[k], &dw[k]) - curv[k].eval(&v.samples[k], &vel[k], &vel[k], &w.samples[k]))
        .collect();
    let value_lc = simpson(&integrand, geom.curve.step());
    let value_sb_bulk = second_variation_sb(geom, v, w)?;
    let torsion = geom.torsion()?;
    let last = geom.curve.len() - 1;
    let end = |k: usize| 0.5 * torsion[k].eval(&v.samples[k], &w.samples[k], &vel[k]);
    Ok(IndexFormResult { value_lc, value_sb_bulk, boundary_term: end(last) - end(0) })
}

/// `sin(π(t−a)/L)` and its derivative on the curve grid.
pub fn sine_bump(curve: &Curve) -> (Vec<f64>, Vec<f64>) {
    let (a, len) = (curve.start(), curve.end() - curve.start());
    let w = PI / len;
    curve.t.iter().map(|&t| ((w * (t - a)).sin(), w * (w * (t - a)).cos())).unzip()
}

/// `f·e_j` for the transported frame vectors `e_2..e_{2n}`.
///
/// The frame must come from [`crate::geodesy::parallel_frame`], so it carries its own
/// derivative samples.
pub fn myers_fields(curve: &Curve, frame: &[FieldAlongCurve], f: &[f64], df: &[f64]) -> Result<Vec<FieldAlongCurve>> {
    let m = 2 * curve.n();
    if frame.len() != m {
        return Err(Error::BadSeedFrame(format!("expected {m} frame fields, got {}", frame.len())));
    }
    if f.len() != curve.len() || df.len() != curve.len() {
        return Err(Error::GridMismatch { expected: curve.len(), found: f.len().min(df.len()) });
    }
    frame[1..]
        .iter()
        .map(|e| {
            e.check_grid(curve)?;
            Ok(e.scaled_by(f, Some(df)))
        })
        .collect()
}

/// `Jγ′` with its exact derivative `Jγ″`.
pub fn synge_direction(model: &MetricModel, curve: &Curve) -> Result<FieldAlongCurve> {
    let samples = curve.velocities.iter().map(apply_j).collect();
    let derivatives = curve
        .points
        .iter()
        .zip(&curve.velocities)
        .map(|(p, v)| Ok(apply_j(&TangentVector::from_real(geodesic_acceleration(model, p, &v.x)?))))
        .collect::<Result<_>>()?;
    Ok(FieldAlongCurve::with_derivatives(samples, derivatives))
}

/// `sin(π(t−a)/L)·Jγ′`.
pub fn synge_field(model: &MetricModel, curve: &Curve) -> Result<FieldAlongCurve> {
    let (f, df) = sine_bump(curve);
    Ok(synge_direction(model, curve)?.scaled_by(&f, Some(&df)))
}

/// The Myers contradiction quantity computed two ways.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MyersSum {
    /// `Σ_j I(V_j, V_j)` from the Levi-Civita index form.
    pub index_sum: f64,
    /// `Σ_j` of the Strominger-Bismut bulk.
    pub sb_sum: f64,
    /// `∫((2n−1)f′² − f² Ric^SB(γ′,γ′))`.
    pub ricci_integral: f64,
}

pub fn myers_sum(geom: &CurveGeometry, fields: &[FieldAlongCurve], f: &[f64], df: &[f64]) -> Result<MyersSum> {
    let (mut index_sum, mut sb_sum) = (0.0, 0.0);
    for v in fields {
        let r = index_form(geom, v, v)?;
        index_sum += r.value_lc;
        sb_sum += r.value_sb_bulk;
    }
    let curve = geom.curve;
    let count = (2 * curve.n() - 1) as f64;
    let integrand: Vec<f64> = (0..curve.len())
        .map(|k| {
            let u = &curve.velocities[k];
            let ric = ricci_real_sb(geom.model, &curve.points[k], u, u)?;
            Ok(count * df[k] * df[k] - f[k] * f[k] * ric)
        })
        .collect::<Result<_>>()?;
    Ok(MyersSum { index_sum, sb_sum, ricci_integral: simpson(&integrand, curve.step()) })
}

/// Coordinate field `Σ_k (a_k sin(kπτ) + b_k cos(kπτ))` with `τ = (t−a)/(b−a)`.
#[derive(Clone, Debug, PartialEq)]
pub struct TrigPolynomialField {
    pub sine: Vec<Vec<f64>>,
    pub cosine: Vec<Vec<f64>>,
}

impl TrigPolynomialField {
    /// Uniform coefficients in `[-amplitude, amplitude]`; `proper` drops the cosine part.
    pub fn random<R: Rng + ?Sized>(rng: &mut R, dim: usize, degree: usize, amplitude: f64, proper: bool) -> Self {
        let mut draw = |on: bool| -> Vec<Vec<f64>> {
            (0..degree)
                .map(|_| (0..dim).map(|_| if on { rng.random_range(-amplitude..=amplitude) } else { 0.0 }).collect())
                .collect()
        };
        let sine = draw(true);
        let cosine = draw(!proper);
        Self { sine, cosine }
    }

    /// Value and `t`-derivative at `τ` for a curve of parameter length `len`.
    pub fn at(&self, tau: f64, len: f64) -> (Vec<f64>, Vec<f64>) {
        let dim = self.sine.first().map_or(0, Vec::len);
        let mut v = vec![0.0; dim];
        let mut dv = vec![0.0; dim];
        for (k, (s, c)) in self.sine.iter().zip(&self.cosine).enumerate() {
            let w = (k + 1) as f64 * PI;
            let (sn, cs) = (w * tau).sin_cos();
            for i in 0..dim {
                v[i] += s[i] * sn + c[i] * cs;
                dv[i] += (s[i] * cs - c[i] * sn) * w / len;
            }
        }
        (v, dv)
    }

    /// Samples with exact `t`-derivatives.
    pub fn along(&self, curve: &Curve) -> FieldAlongCurve {
        let (a, len) = (curve.start(), curve.end() - curve.start());
        let (samples, derivatives) = curve
            .t
            .iter()
            .map(|&t| {
                let (v, dv) = self.at((t - a) / len, len);
                (TangentVector::from_real(v), TangentVector::from_real(dv))
            })
            .unzip();
        FieldAlongCurve::with_derivatives(samples, derivatives)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geodesy::{adapted_frame, integrate_geodesic, parallel_frame, normalize};
    use crate::linalg::c;
    use crate::models::model_from_str;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn unit_geodesic(model: &MetricModel, p: ChartPoint, dir: TangentVector, length: f64, steps: usize) -> Curve {
        let u = normalize(model, &p, &dir).unwrap();
        integrate_geodesic(model, &p, &u, length, steps).unwrap()
    }

    #[test]
    fn flat_unit_segment_has_energy_half() {
        let m = model_from_str("flat(1)").unwrap();
        let curve = unit_geodesic(&m, ChartPoint::origin(1), TangentVector::coordinate(1, 0), 1.0, 1000);
        assert!((energy(&m, &curve).unwrap() - 0.5).abs() < 1e-12);
    }

    #[test]
    fn uneven_speed_raises_energy_but_not_length() {
        let m = model_from_str("flat(1)").unwrap();
        let s = 1.0 / 2f64.sqrt();
        // Quadratic time change of the unit segment: speed 2t.
        let path: crate::geodesy::PathFn = Arc::new(move |t: f64| {
            (ChartPoint::new(vec![c(s * t * t, 0.0)]), TangentVector::from_real(vec![2.0 * s * t, 0.0]))
        });
        let bent = Curve::from_path(&m, 0.0, 1.0, 1000, path).unwrap();
        let straight = unit_geodesic(&m, ChartPoint::origin(1), TangentVector::coordinate(1, 0), 1.0, 1000);
        let length = simpson(&bent.speeds(&m).unwrap(), bent.step());
        assert!((length - 1.0).abs() < 1e-10);
        assert!(energy(&m, &bent).unwrap() > energy(&m, &straight).unwrap() + 0.1);
    }

    #[test]
    fn fubini_study_unit_geodesic_energy_is_half_length() {
        let m = model_from_str("fubini_study(1,1.0)").unwrap();
        let curve = unit_geodesic(&m, ChartPoint::new(vec![c(0.2, 0.1)]), TangentVector::coordinate(1, 1), 1.3, 1300);
        assert!((energy(&m, &curve).unwrap() - 0.65).abs() < 1e-8);
    }

    #[test]
    fn flat_sine_field_second_variation() {
        let m = model_from_str("flat(2)").unwrap();
        let curve = unit_geodesic(&m, ChartPoint::origin(2), TangentVector::coordinate(2, 0), 1.0, 1000);
        let geom = CurveGeometry::new(&m, &curve).unwrap();
        // Unit vector along x² has coordinate length 1/√2 under g = 2I.
        let e2 = TangentVector::coordinate(2, 1).scaled(2f64.sqrt().recip());
        let v = FieldAlongCurve::with_derivatives(
            curve.t.iter().map(|t| e2.scaled((PI * t).sin())).collect(),
            curve.t.iter().map(|t| e2.scaled(PI * (PI * t).cos())).collect(),
        );
        let val = second_variation_sb(&geom, &v, &v).unwrap();
        assert!((val - PI * PI / 2.0).abs() < 1e-9, "{val}");
        let surface = VariationSurface::linear_fields(curve.clone(), v.clone(), v.clone()).unwrap();
        assert!(surface.proper);
        let fd = mixed_partial_energy_fd(&m, &surface, ENERGY_FD_DELTA).unwrap();
        assert!((fd - PI * PI / 2.0).abs() < 1e-6, "{fd}");
        assert!(first_variation_residual(&m, &curve, &v).unwrap() < 1e-10);
    }

    #[test]
    fn fubini_study_geodesic_is_critical() {
        let m = model_from_str("fubini_study(1,1.0)").unwrap();
        let p = ChartPoint::new(vec![c(0.1, -0.2)]);
        let curve = unit_geodesic(&m, p.clone(), TangentVector::coordinate(1, 0), 1.5, 1500);
        let normal = synge_direction(&m, &curve).unwrap();
        let (f, df) = sine_bump(&curve);
        let v = normal.scaled_by(&f, Some(&df));
        assert!(first_variation_residual(&m, &curve, &v).unwrap() < 1e-6);
    }

    #[test]
    fn bent_curve_has_nonzero_first_variation() {
        let m = model_from_str("flat(1)").unwrap();
        let path: crate::geodesy::PathFn = Arc::new(|t: f64| {
            (ChartPoint::new(vec![c(t, 0.3 * (PI * t).sin())]), TangentVector::from_real(vec![1.0, 0.3 * PI * (PI * t).cos()]))
        });
        let curve = Curve::from_path(&m, 0.0, 1.0, 1000, path).unwrap();
        let v = FieldAlongCurve::from_fn(&curve, |t| TangentVector::from_real(vec![0.0, (PI * t).sin()]));
        // Direct oracle: E(s) = ½∫2(1 + (0.3+s)²π²cos²(πt)) dt, slope 0.3π² at s = 0.
        let got = first_variation_residual(&m, &curve, &v).unwrap();
        assert!((got - 0.3 * PI * PI).abs() < 1e-6, "{got}");
    }

    #[test]
    fn not_proper_field_is_rejected() {
        let m = model_from_str("flat(1)").unwrap();
        let curve = unit_geodesic(&m, ChartPoint::origin(1), TangentVector::coordinate(1, 0), 1.0, 1000);
        let v = FieldAlongCurve::from_fn(&curve, |_| TangentVector::coordinate(1, 1));
        assert!(matches!(first_variation_residual(&m, &curve, &v), Err(Error::NotProper(_))));
    }

    #[test]
    fn fubini_study_long_synge_variation_is_negative() {
        let m = model_from_str("fubini_study(1,1.0)").unwrap();
        let k = 2.0;
        let length = 1.05 * PI / f64::sqrt(k);
        // The great circle through 0.5 and its antipode −2 stays inside the chart.
        let curve = unit_geodesic(&m, ChartPoint::new(vec![c(0.5, 0.0)]), TangentVector::coordinate(1, 1), length, 2300);
        let geom = CurveGeometry::new(&m, &curve).unwrap();
        let v = synge_field(&m, &curve).unwrap();
        let got = second_variation_sb(&geom, &v, &v).unwrap();
        // ∫((π/L)²cos² − K sin²) = (L/2)((π/L)² − K).
        let expected = 0.5 * length * ((PI / length).powi(2) - k);
        assert!(got < 0.0);
        assert!((got - expected).abs() < 1e-6, "{got} vs {expected}");
    }

    #[test]
    fn unit_sphere_sine_field_has_zero_index() {
        // Scale 2 gives holomorphic sectional curvature 1.
        let m = model_from_str("fubini_study(1,2.0)").unwrap();
        let curve = unit_geodesic(&m, ChartPoint::new(vec![c(0.0, 0.2)]), TangentVector::coordinate(1, 0), PI, 3200);
        let geom = CurveGeometry::new(&m, &curve).unwrap();
        let v = synge_field(&m, &curve).unwrap();
        let r = index_form(&geom, &v, &v).unwrap();
        assert!(r.value_lc.abs() < 1e-7, "{r:?}");
        assert_eq!(r.boundary_term, 0.0);
    }

    #[test]
    fn hopf_index_form_reconciles_with_boundary_torsion() {
        let m = model_from_str("hopf(2)").unwrap();
        let p = ChartPoint::new(vec![c(1.0, 0.2), c(-0.3, 0.5)]);
        let curve = unit_geodesic(&m, p, TangentVector::from_real(vec![0.3, -0.5, 0.8, 0.1]), 0.8, 800);
        let geom = CurveGeometry::new(&m, &curve).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let v = TrigPolynomialField::random(&mut rng, 4, 3, 0.5, false).along(&curve);
        let w = TrigPolynomialField::random(&mut rng, 4, 3, 0.5, false).along(&curve);
        let r = index_form(&geom, &v, &w).unwrap();
        assert!(r.boundary_term.abs() > 1e-4, "{r:?}");
        assert!(r.reconciliation_gap() < 1e-6, "{r:?}");
        let swapped = index_form(&geom, &w, &v).unwrap();
        assert!((swapped.value_lc - r.value_lc).abs() < 1e-8);
        assert!(index_form(&geom, &v, &v).unwrap().boundary_term.abs() < 1e-12);
    }

    #[test]
    fn hopf_proper_surface_matches_energy_mixed_partial() {
        let m = model_from_str("hopf(2)").unwrap();
        let p = ChartPoint::new(vec![c(0.8, -0.1), c(0.4, 0.6)]);
        let curve = unit_geodesic(&m, p, TangentVector::from_real(vec![0.2, 0.7, -0.4, 0.3]), 0.6, 400);
        let geom = CurveGeometry::new(&m, &curve).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let v = TrigPolynomialField::random(&mut rng, 4, 2, 0.3, true).along(&curve);
        let w = TrigPolynomialField::random(&mut rng, 4, 2, 0.3, true).along(&curve);
        let rhs = second_variation_sb(&geom, &v, &w).unwrap();
        let surface = VariationSurface::linear_fields(curve.clone(), v, w).unwrap();
        let fd = mixed_partial_energy_fd(&m, &surface, ENERGY_FD_DELTA).unwrap();
        assert!((rhs - fd).abs() <= (1e-3 * rhs.abs()).max(1e-5), "{rhs} vs {fd}");
    }

    #[test]
    fn closed_form_general_variation_includes_boundary() {
        // Straight-line surface in the chart, endpoints free: α = γ(t) + s₁V(t) + s₂W(t) + s₁s₂U(t).
        let m = model_from_str("hopf(2)").unwrap();
        let p = ChartPoint::new(vec![c(1.0, 0.3), c(0.2, -0.4)]);
        let curve = unit_geodesic(&m, p, TangentVector::from_real(vec![0.5, 0.1, -0.2, 0.6]), 0.5, 500);
        let geom = CurveGeometry::new(&m, &curve).unwrap();
        let base = curve.clone();
        let h = base.step();
        let on_base = move |t: f64| {
            let k = ((t / h).round() as usize).min(base.steps());
            assert!((base.t[k] - t).abs() < 1e-12, "surface evaluated off the grid");
            base.points[k].clone()
        };
        let alpha: SurfaceFn = Arc::new(move |t: f64, s1: f64, s2: f64| {
            let v = [0.1 + 0.2 * t, -0.3, 0.2 * t * t, 0.1];
            let w = [0.05, 0.2 * (3.0 * t).cos(), -0.1, 0.3 * t];
            let u = [0.2, 0.1 * t, 0.0, -0.15];
            let dx: Vec<f64> = (0..4).map(|i| s1 * v[i] + s2 * w[i] + s1 * s2 * u[i]).collect();
            on_base(t).offset(&dx, 1.0)
        });
        let surface = VariationSurface::closed_form(curve.clone(), alpha, false).unwrap();
        let (v, w) = surface.variation_fields();
        let bulk = second_variation_sb(&geom, &v, &w).unwrap();
        let boundary = general_boundary_term(&geom, &surface).unwrap();
        let fd = mixed_partial_energy_fd(&m, &surface, ENERGY_FD_DELTA).unwrap();
        assert!(boundary.abs() > 1e-3);
        assert!((bulk + boundary - fd).abs() <= (1e-3 * fd.abs()).max(1e-5), "{bulk} + {boundary} vs {fd}");
    }

    #[test]
    fn closed_form_surface_must_pass_through_base() {
        let m = model_from_str("flat(1)").unwrap();
        let curve = unit_geodesic(&m, ChartPoint::origin(1), TangentVector::coordinate(1, 0), 1.0, 100);
        let alpha: SurfaceFn = Arc::new(|t: f64, _, _| ChartPoint::new(vec![c(t / 2f64.sqrt(), 1e-6)]));
        assert!(matches!(VariationSurface::closed_form(curve, alpha, false), Err(Error::SurfaceOffBase(_))));
    }

    #[test]
    fn myers_sum_matches_ricci_integral_on_fubini_study() {
        let m = model_from_str("fubini_study(1,1.0)").unwrap();
        let p = ChartPoint::new(vec![c(0.5, 0.0)]);
        let curve = unit_geodesic(&m, p.clone(), TangentVector::coordinate(1, 1), 2.0, 2000);
        let seed = adapted_frame(&m, &p, &curve.velocities[0]).unwrap();
        let frame = parallel_frame(Flavor::StromingerBismut, &m, &curve, &seed).unwrap();
        let geom = CurveGeometry::new(&m, &curve).unwrap();
        for e in &frame {
            assert!(geom.covariant_residual(Flavor::StromingerBismut, e).unwrap() < 1e-7);
        }
        let (f, df) = sine_bump(&curve);
        let fields = myers_fields(&curve, &frame, &f, &df).unwrap();
        assert_eq!(fields.len(), 1);
        let sum = myers_sum(&geom, &fields, &f, &df).unwrap();
        assert!((sum.index_sum - sum.ricci_integral).abs() < 1e-5, "{sum:?}");
    }

    #[test]
    fn hopf_synge_direction_is_sb_parallel() {
        let m = model_from_str("hopf(2)").unwrap();
        let p = ChartPoint::new(vec![c(0.7, 0.2), c(-0.5, 0.4)]);
        let curve = unit_geodesic(&m, p, TangentVector::from_real(vec![0.1, 0.9, -0.3, 0.2]), 1.0, 1000);
        let geom = CurveGeometry::new(&m, &curve).unwrap();
        let jg = synge_direction(&m, &curve).unwrap();
        assert!(geom.covariant_residual(Flavor::StromingerBismut, &jg).unwrap() < 1e-7);
        let v = synge_field(&m, &curve).unwrap();
        let parts = second_variation_sb_parts(&geom, &v, &v).unwrap();
        assert!(parts.torsion.abs() < 1e-7, "{parts:?}");
    }
}
